"""Abductive explanations for forest predictions.

The main routine greedily shrinks the instance's canonical term while the
remaining literals, closed under unit propagation with the domain theory,
still satisfy every clause of enough trees (the trees voting for the
predicted class, read as CNF).

Because the instance satisfies the theory, every literal that unit
propagation derives from a subset of the instance term is itself a
literal of the instance. That reduces propagation to Horn chaining over
conditions: a theory clause can only fire when exactly one of its
literals agrees with the instance, and it then derives that literal once
all the others are known. A tree's CNF clause is satisfied by the derived
set exactly when one of the path's disagreeing conditions is derived.
The engine keeps one counter per such path and updates counters when a
condition leaves the derived set.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import InfeasibleInstance, OverlappingPreferenceSets, TooLargeForOracle
from .logic import CnfFormula, Literal, Term
from .tabular import instance_to_term
from .theory import DomainTheory
from .trees import DecisionTree, RandomForest, enumerate_paths

ORACLE_LIMIT = 16


class ExplanationKind(str, enum.Enum):
    DIRECT = "direct"
    UP_MAJORITARY = "up_majoritary"
    SUFFICIENT_ORACLE = "sufficient_oracle"


@dataclass(frozen=True)
class Explanation:
    term: Term
    kind: ExplanationKind
    theory_tag: str = "Th"
    ordering_seed: int | None = None
    prediction: int | None = None
    stats: dict = field(default_factory=dict, compare=False, hash=False)

    @property
    def size(self) -> int:
        return len(self.term)


def _as_forest(f) -> RandomForest:
    return RandomForest((f,)) if isinstance(f, DecisionTree) else f


def _theory_cnf(th) -> CnfFormula:
    if th is None:
        return CnfFormula()
    return th.combined if isinstance(th, DomainTheory) else th


def _theory_tag(th) -> str:
    return "Th_e" if isinstance(th, DomainTheory) and th.extended else "Th"


def _strongly_connected(num_nodes: int, succ: list[list[int]]) -> list[int]:
    """Component id per node (iterative Tarjan)."""
    index = [-1] * num_nodes
    low = [0] * num_nodes
    comp = [-1] * num_nodes
    on_stack = [False] * num_nodes
    stack: list[int] = []
    counter = 0
    ncomp = 0
    for root in range(num_nodes):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, i = work[-1]
            if i < len(succ[v]):
                work[-1] = (v, i + 1)
                w = succ[v][i]
                if index[w] == -1:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, 0))
                elif on_stack[w]:
                    low[v] = min(low[v], index[w])
                continue
            work.pop()
            if work:
                u = work[-1][0]
                low[u] = min(low[u], low[v])
            if low[v] == index[v]:
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp[w] = ncomp
                    if w == v:
                        break
                ncomp += 1
    return comp


def _drop_transitive(binary: list[list[int]]) -> list[list[int]]:
    """Binary clauses minus those whose implication a -> c also follows from
    a -> b -> c. Unit propagation derives the same literals either way.

    Only nodes outside implication cycles take part, so every dropped edge
    is bridged by edges spanning strictly fewer components and the
    reachability of the implication graph is preserved.
    """
    if not binary:
        return []

    def node(lit: int) -> int:
        return 2 * (abs(lit) - 1) + (lit > 0)

    num_nodes = 2 * max(abs(v) for c in binary for v in c)
    succ: list[list[int]] = [[] for _ in range(num_nodes)]
    for a, b in binary:
        succ[node(-a)].append(node(b))
        succ[node(-b)].append(node(a))
    comp = _strongly_connected(num_nodes, succ)
    size = [0] * (max(comp) + 1)
    for c in comp:
        size[c] += 1
    alone = [size[comp[v]] == 1 for v in range(num_nodes)]
    reach = [0] * num_nodes
    for v in range(num_nodes):
        row = np.zeros(num_nodes, dtype=bool)
        row[succ[v]] = True
        reach[v] = int.from_bytes(np.packbits(row, bitorder="little").tobytes(), "little")
    two_step = [0] * num_nodes
    for v in range(num_nodes):
        if alone[v]:
            acc = 0
            for w in succ[v]:
                if alone[w]:
                    acc |= reach[w]
            two_step[v] = acc
    out = []
    for a, b in binary:
        u, w = node(-a), node(b)
        if alone[u] and alone[w] and (two_step[u] >> w) & 1:
            continue
        out.append([a, b])
    return out


class CompiledTheory:
    """A theory as a padded array of signed literals, with the binary
    clauses that implication chains already cover left out."""

    def __init__(self, theory: CnfFormula):
        clauses = [c.to_ints() for c in theory]
        binary = [c for c in clauses if len(c) == 2]
        kept = [c for c in clauses if len(c) != 2] + _drop_transitive(binary)
        self.num_clauses = len(clauses)
        width = max([1] + [len(c) for c in kept])
        lits = np.zeros((len(kept), width), dtype=np.int64)
        for i, c in enumerate(kept):
            lits[i, :len(c)] = c
        self.lits = lits
        self._present = lits != 0
        self._cond = np.where(self._present, np.abs(lits) - 1, 0)
        self._positive = lits > 0

    def __len__(self) -> int:
        return len(self.lits)

    def _truth(self, bits) -> np.ndarray:
        b = np.asarray(bits, dtype=bool)
        return (b[self._cond] == self._positive) & self._present

    def satisfied_by(self, bits) -> bool:
        return bool(self._truth(bits).any(axis=1).all())

    def horn_rules(self, bits):
        """(head, body) per clause with exactly one literal true in ``bits``."""
        truth = self._truth(bits)
        rows = np.nonzero(truth.sum(axis=1) == 1)[0]
        if not len(rows):
            return []
        t = truth[rows]
        cond = self._cond[rows]
        heads = cond[np.arange(len(rows)), t.argmax(axis=1)].tolist()
        others = self._present[rows] & ~t
        return [(h, tuple(c[o].tolist())) for h, c, o in zip(heads, cond, others)]


_COMPILED: dict[int, tuple[CnfFormula, CompiledTheory]] = {}
_COMPILED_LIMIT = 32


def compile_theory(theory: CnfFormula) -> CompiledTheory:
    """Compiled form of ``theory``, cached by object identity."""
    hit = _COMPILED.get(id(theory))
    if hit is not None and hit[0] is theory:
        return hit[1]
    compiled = CompiledTheory(theory)
    if len(_COMPILED) >= _COMPILED_LIMIT:
        _COMPILED.pop(next(iter(_COMPILED)))
    _COMPILED[id(theory)] = (theory, compiled)
    return compiled


def required_votes(m: int, label: int) -> int:
    """Trees that must keep voting ``label`` for the forest to keep predicting it.

    Class 1 needs a strict majority. Class 0 only needs half the trees,
    since a tie already yields 0; with an even forest and a tie, a strict
    majority would be unreachable even for the full instance term.
    """
    return m // 2 + 1 if label == 1 else m - m // 2


def direct_reason(f, bits) -> Explanation:
    forest = _as_forest(f)
    lits: set[Literal] = set()
    for t in forest.trees:
        lits |= t.path(bits).term
    return Explanation(Term(lits), ExplanationKind.DIRECT, prediction=forest.predict(bits))


class ReasonEngine:
    """Precomputed state for explaining one instance under one theory."""

    def __init__(self, f, th, bits):
        forest = _as_forest(f)
        self.forest = forest
        self.bits = [int(b) for b in bits]
        n = len(self.bits)
        self.n = n
        compiled = compile_theory(_theory_cnf(th))
        if not compiled.satisfied_by(self.bits):
            raise InfeasibleInstance("the instance violates the domain theory")
        self.theory_tag = _theory_tag(th)
        self.label = forest.predict(self.bits)
        self.m = forest.m
        self.need = required_votes(self.m, self.label)

        # Horn rules over conditions: body = conditions whose literal the
        # instance falsifies, head = the one condition it satisfies.
        rules_by_body: list[list[int]] = [[] for _ in range(n)]
        rules_by_head: list[list[int]] = [[] for _ in range(n)]
        heads: list[int] = []
        for head, body in compiled.horn_rules(self.bits):
            rid = len(heads)
            heads.append(head)
            rules_by_head[head].append(rid)
            for b in body:
                rules_by_body[b].append(rid)
        self._rules_by_body = rules_by_body
        self._rules_by_head = rules_by_head
        self._heads = heads
        self._support = [len(r) for r in rules_by_head]
        # Without derivation cycles the derived set is exactly the asserted
        # conditions plus those with an active rule, so counting suffices.
        self.acyclic = _acyclic(n, heads, rules_by_body)

        # one counter per path of a voting tree that ends in the other class
        path_sets: list[list[int]] = []
        tree_of: list[int] = []
        voting = []
        for i, t in enumerate(forest.trees):
            if t.predict(self.bits) != self.label:
                continue
            voting.append(i)
            for p in enumerate_paths(t):
                if p.leaf_class == self.label:
                    continue
                path_sets.append([lit.condition for lit in p.term if not lit.holds(self.bits)])
                tree_of.append(len(voting) - 1)
        self.voting = voting
        self.num_paths = len(path_sets)
        occ: list[list[int]] = [[] for _ in range(n)]
        for pid, s in enumerate(path_sets):
            for c in s:
                occ[c].append(pid)
        self._occ = occ
        self._tree_of = tree_of
        self._base_cnt = [len(s) for s in path_sets]
        self.relevant = [bool(occ[c]) or bool(rules_by_body[c]) for c in range(n)]
        self.trials = 0

    def instance_term(self) -> Term:
        return instance_to_term(self.bits)

    def reduce(self, order: Sequence[Literal]) -> Term:
        """Single greedy pass over ``order`` (literals of the instance term)."""
        conds = []
        for lit in order:
            if bool(self.bits[lit.condition]) != lit.polarity:
                raise ValueError(f"{lit} is not a literal of the instance")
            conds.append(lit.condition)
        return self._reduce(conds)

    def _reduce(self, conds: Sequence[int]) -> Term:
        n = self.n
        in_t = [True] * n
        if len(self.voting) >= self.need:
            if self.acyclic:
                self._reduce_counting(conds, in_t)
            else:
                self._reduce_dred(conds, in_t)
        return Term(Literal(j, bool(self.bits[j])) for j in range(n) if in_t[j])

    def _reduce_counting(self, conds, in_t) -> None:
        in_d = [True] * len(in_t)
        missing = [0] * len(self._heads)
        support = list(self._support)
        cnt = list(self._base_cnt)
        zeros = [0] * len(self.voting)
        valid = len(self.voting)
        need = self.need
        occ, tree_of, relevant = self._occ, self._tree_of, self.relevant
        rules_by_body, heads = self._rules_by_body, self._heads
        trials = 0
        for j in conds:
            if not in_t[j]:
                continue
            in_t[j] = False
            if not relevant[j]:
                continue
            trials += 1
            if support[j]:
                continue  # still derived by an active rule
            in_d[j] = False
            lost = [j]
            i = 0
            while i < len(lost):
                for rid in rules_by_body[lost[i]]:
                    missing[rid] += 1
                    if missing[rid] == 1:
                        h = heads[rid]
                        support[h] -= 1
                        if not support[h] and in_d[h] and not in_t[h]:
                            in_d[h] = False
                            lost.append(h)
                i += 1
            broken, hits = _count_down(lost, occ, cnt, tree_of, zeros)
            if valid - broken >= need:
                valid -= broken
                continue
            _count_up(lost, occ, cnt, tree_of, zeros, hits)
            for k in lost:
                in_d[k] = True
                for rid in rules_by_body[k]:
                    missing[rid] -= 1
                    if not missing[rid]:
                        support[heads[rid]] += 1
            in_t[j] = True
        self.trials += trials

    def _reduce_dred(self, conds, in_t) -> None:
        # Every derived condition that is not asserted keeps one rule that
        # derived it from earlier conditions. Dropping a condition only
        # invalidates what hangs off it through those rules.
        n = len(in_t)
        in_d = [True] * n
        just = [-1] * n
        missing = [0] * len(self._heads)
        cnt = list(self._base_cnt)
        zeros = [0] * len(self.voting)
        valid = len(self.voting)
        need = self.need
        occ, tree_of, relevant = self._occ, self._tree_of, self.relevant
        rules_by_body, rules_by_head, heads = self._rules_by_body, self._rules_by_head, self._heads
        trials = 0
        for j in conds:
            if not in_t[j]:
                continue
            in_t[j] = False
            if not relevant[j]:
                continue
            trials += 1
            # dependents of j through justifications
            affected = [j]
            mark = {j}
            i = 0
            while i < len(affected):
                for rid in rules_by_body[affected[i]]:
                    h = heads[rid]
                    if just[h] == rid and in_d[h] and h not in mark:
                        mark.add(h)
                        affected.append(h)
                i += 1
            saved = [just[k] for k in affected]
            for k in affected:
                in_d[k] = False
                for rid in rules_by_body[k]:
                    missing[rid] += 1
            work = [(k, rid) for k in affected for rid in rules_by_head[k] if not missing[rid]]
            while work:
                k, rid = work.pop()
                if in_d[k]:
                    continue
                in_d[k] = True
                just[k] = rid
                for r2 in rules_by_body[k]:
                    missing[r2] -= 1
                    if not missing[r2]:
                        h = heads[r2]
                        if not in_d[h] and h in mark:
                            work.append((h, r2))
            lost = [k for k in affected if not in_d[k]]
            if lost:
                broken, hits = _count_down(lost, occ, cnt, tree_of, zeros)
                if valid - broken >= need:
                    valid -= broken
                    for k in lost:
                        just[k] = -1
                    continue
                _count_up(lost, occ, cnt, tree_of, zeros, hits)
                for k in lost:
                    in_d[k] = True
                    for rid in rules_by_body[k]:
                        missing[rid] -= 1
                for k, old in zip(affected, saved):
                    just[k] = old
                in_t[j] = True
        self.trials += trials


def _acyclic(n: int, heads: list[int], rules_by_body: list[list[int]]) -> bool:
    indeg = [0] * n
    for k in range(n):
        for rid in rules_by_body[k]:
            indeg[heads[rid]] += 1
    queue = [k for k in range(n) if not indeg[k]]
    seen = 0
    while queue:
        k = queue.pop()
        seen += 1
        for rid in rules_by_body[k]:
            h = heads[rid]
            indeg[h] -= 1
            if not indeg[h]:
                queue.append(h)
    return seen == n


def _count_down(lost, occ, cnt, tree_of, zeros) -> tuple[int, list[int]]:
    """Charge the lost conditions to path counters; return the number of
    trees that stop being implied and the paths whose counter hit zero."""
    broken = 0
    hits = []
    for k in lost:
        for p in occ[k]:
            cnt[p] -= 1  # a path lists each condition once
            if not cnt[p]:
                hits.append(p)
                t = tree_of[p]
                if not zeros[t]:
                    broken += 1
                zeros[t] += 1
    return broken, hits


def _count_up(lost, occ, cnt, tree_of, zeros, hits) -> None:
    for k in lost:
        for p in occ[k]:
            cnt[p] += 1
    for p in hits:
        zeros[tree_of[p]] -= 1


def _default_order(bits) -> list[Literal]:
    return list(instance_to_term(bits).sorted())


def random_ordering(t_x: Term, seed: int) -> list[Literal]:
    lits = t_x.sorted()
    perm = np.random.default_rng(seed).permutation(len(lits))
    return [lits[i] for i in perm]


def up_majoritary_reason(f, th, bits, elimination_order: Sequence[Literal] | None = None,
                         ordering_seed: int | None = None) -> Explanation:
    """Greedy UP-majoritary reason; ``elimination_order`` lists the
    literals to try to drop first (default: canonical order)."""
    engine = ReasonEngine(f, th, bits)
    order = list(elimination_order) if elimination_order is not None else _default_order(bits)
    term = engine.reduce(order)
    return Explanation(term, ExplanationKind.UP_MAJORITARY, engine.theory_tag, ordering_seed,
                       engine.label, {"trials": engine.trials})


def best_reason(f, th, bits, num_orderings: int = 100, seed: int = 0) -> Explanation:
    """Shortest greedy reason over ``num_orderings`` seeded orderings
    (ordering k uses seed + k; ties keep the first)."""
    engine = ReasonEngine(f, th, bits)
    best = None
    best_seed = None
    for k in range(num_orderings):
        # the instance term lists one literal per condition in id order, so
        # the permutation from random_ordering is the condition sequence
        conds = np.random.default_rng(seed + k).permutation(engine.n).tolist()
        term = engine._reduce(conds)
        if best is None or len(term) < len(best):
            best, best_seed = term, seed + k
    if best is None:
        best = engine.instance_term()
    return Explanation(best, ExplanationKind.UP_MAJORITARY, engine.theory_tag, best_seed,
                       engine.label, {"trials": engine.trials, "orderings": num_orderings})


def preference_order(t_x: Term, prefer_keep: Iterable[Literal] = (), prefer_drop: Iterable[Literal] = (),
                     seed: int = 0) -> list[Literal]:
    keep, drop = set(prefer_keep), set(prefer_drop)
    if keep & drop:
        raise OverlappingPreferenceSets(f"literals both kept and dropped: {sorted(keep & drop)}")
    if not (keep | drop) <= set(t_x):
        raise ValueError("preference sets must be subsets of the instance term")
    rng = np.random.default_rng(seed)
    middle = [lit for lit in t_x.sorted() if lit not in keep and lit not in drop]
    middle = [middle[i] for i in rng.permutation(len(middle))]
    return sorted(drop) + middle + sorted(keep)


# -- exhaustive oracle -----------------------------------------------------------

def all_assignments(n: int) -> np.ndarray:
    if n > ORACLE_LIMIT:
        raise TooLargeForOracle(f"{n} conditions exceed the oracle limit of {ORACLE_LIMIT}")
    codes = np.arange(1 << n, dtype=np.int64)
    return ((codes[:, None] >> np.arange(n)) & 1).astype(np.uint8)


def theory_mask(theory: CnfFormula, assignments: np.ndarray) -> np.ndarray:
    ok = np.ones(assignments.shape[0], dtype=bool)
    for clause in theory:
        sat = np.zeros_like(ok)
        for lit in clause:
            col = assignments[:, lit.condition]
            sat |= (col == 1) if lit.polarity else (col == 0)
        ok &= sat
    return ok


def oracle_is_abductive(t: Term, f, th, bits) -> bool:
    """Every theory model covered by ``t`` gets the same prediction as ``bits``."""
    forest = _as_forest(f)
    n = len(bits)
    space = all_assignments(n)
    mask = theory_mask(_theory_cnf(th), space)
    for lit in t:
        mask &= space[:, lit.condition] == (1 if lit.polarity else 0)
    target = forest.predict(bits)
    return bool(np.all(forest.predict_many(space[mask]) == target))
