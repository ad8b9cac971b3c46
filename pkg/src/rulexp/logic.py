"""Boolean layer over the condition set X: literals, terms, clauses, CNF,
unit propagation and a small complete satisfiability check.

Conditions are addressed by their 0-based id. Internally (hot paths) a
literal is the signed integer ``±(id + 1)``, which is also the DIMACS
encoding used for import/export.
"""
from __future__ import annotations

from typing import Iterable, Iterator, NamedTuple

from .errors import InconsistentTerm, ValidClause


class Literal(NamedTuple):
    condition: int
    polarity: bool = True

    def __invert__(self) -> "Literal":
        return Literal(self.condition, not self.polarity)

    def to_int(self) -> int:
        v = self.condition + 1
        return v if self.polarity else -v

    @classmethod
    def from_int(cls, v: int) -> "Literal":
        if v == 0:
            raise ValueError("0 is not a literal")
        return cls(abs(v) - 1, v > 0)

    def holds(self, bits) -> bool:
        return bool(bits[self.condition]) == self.polarity

    def __str__(self) -> str:
        return ("" if self.polarity else "!") + f"x{self.condition + 1}"


def pos(i: int) -> Literal:
    return Literal(i, True)


def neg(i: int) -> Literal:
    return Literal(i, False)


class _LiteralSet(frozenset):
    def sorted(self) -> list[Literal]:
        return sorted(self)

    def conditions(self) -> set[int]:
        return {lit.condition for lit in self}

    def to_ints(self) -> list[int]:
        return [lit.to_int() for lit in sorted(self)]

    def __repr__(self) -> str:
        return f"{type(self).__name__}({{{', '.join(map(str, sorted(self)))}}})"

    __str__ = __repr__


class Term(_LiteralSet):
    """Conjunction of literals; never contains a literal and its complement."""

    def __new__(cls, literals: Iterable[Literal] = ()):
        self = super().__new__(cls, (Literal(*lit) for lit in literals))
        if len({lit.condition for lit in self}) != len(self):
            raise InconsistentTerm(f"term contains complementary literals: {sorted(self)}")
        return self

    def without(self, lit: Literal) -> "Term":
        return Term(frozenset.__sub__(self, {lit}))

    def covers(self, bits) -> bool:
        return all(lit.holds(bits) for lit in self)

    def negation(self) -> "Clause":
        return Clause(~lit for lit in self)


class Clause(_LiteralSet):
    """Disjunction of literals; never valid (no complementary pair)."""

    def __new__(cls, literals: Iterable[Literal] = ()):
        self = super().__new__(cls, (Literal(*lit) for lit in literals))
        if len({lit.condition for lit in self}) != len(self):
            raise ValidClause(f"clause is valid: {sorted(self)}")
        return self

    def satisfied_by(self, bits) -> bool:
        return any(lit.holds(bits) for lit in self)


class CnfFormula:
    """Conjunction of clauses; duplicates are dropped, the empty formula is true."""

    __slots__ = ("clauses",)

    def __init__(self, clauses: Iterable[Iterable[Literal]] = ()):
        seen = set()
        out = []
        for c in clauses:
            c = c if isinstance(c, Clause) else Clause(c)
            if c not in seen:
                seen.add(c)
                out.append(c)
        self.clauses: tuple[Clause, ...] = tuple(out)

    def __iter__(self) -> Iterator[Clause]:
        return iter(self.clauses)

    def __len__(self) -> int:
        return len(self.clauses)

    def __bool__(self) -> bool:
        return True  # an empty CNF is still a formula (top)

    def __eq__(self, other) -> bool:
        return isinstance(other, CnfFormula) and set(self.clauses) == set(other.clauses)

    def __hash__(self) -> int:
        return hash(frozenset(self.clauses))

    def __add__(self, other: "CnfFormula") -> "CnfFormula":
        return CnfFormula(self.clauses + tuple(other))

    def __repr__(self) -> str:
        return "CnfFormula([" + ", ".join(
            "(" + " | ".join(map(str, c.sorted())) + ")" for c in self.clauses) + "])"

    def conditions(self) -> set[int]:
        return {lit.condition for c in self.clauses for lit in c}

    def num_literals(self) -> int:
        return sum(len(c) for c in self.clauses)

    def satisfied_by(self, bits) -> bool:
        return all(c.satisfied_by(bits) for c in self.clauses)

    def to_dimacs(self, names=None, num_vars: int | None = None) -> str:
        """DIMACS text; ``names`` maps condition id -> display string for ``c`` lines."""
        n = num_vars
        if n is None:
            n = max(self.conditions(), default=-1) + 1
            if names is not None:
                n = max(n, len(names))
        lines = []
        if names is not None:
            for i, name in enumerate(names):
                lines.append(f"c x{i + 1} {name}")
        lines.append(f"p cnf {n} {len(self.clauses)}")
        for c in self.clauses:
            lines.append(" ".join(str(v) for v in c.to_ints()) + " 0")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_dimacs(cls, text: str) -> "CnfFormula":
        return cls(parse_dimacs(text)[0])


def parse_dimacs(text: str) -> tuple[list[Clause], dict[int, str]]:
    """Returns the clauses and the ``c x<k> name`` mapping (0-based ids)."""
    clauses = []
    names: dict[int, str] = {}
    pending: list[int] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        if line.startswith("c"):
            parts = line.split(None, 2)
            if len(parts) == 3 and parts[1].startswith("x") and parts[1][1:].isdigit():
                names[int(parts[1][1:]) - 1] = parts[2]
            continue
        if line.startswith("p"):
            continue
        for tok in line.split():
            v = int(tok)
            if v == 0:
                clauses.append(Clause(Literal.from_int(x) for x in pending))
                pending = []
            else:
                pending.append(v)
    if pending:
        clauses.append(Clause(Literal.from_int(x) for x in pending))
    return clauses, names


class PropagationResult(NamedTuple):
    derived: frozenset
    conflict: bool


class Propagator:
    """Unit propagation over a fixed CNF with an undoable trail.

    Two watched literals per clause; binary clauses go through the same
    machinery. ``assign`` propagates to the fixpoint and reports conflicts;
    after a conflict the caller must ``backtrack`` to an earlier mark.
    ``work`` counts clause visits plus literal scans.
    """

    def __init__(self, theory: CnfFormula, num_conditions: int = 0):
        n = max(num_conditions, max(theory.conditions(), default=-1) + 1)
        self.n = n
        # value of literal l lives at index l + n: 1 true, -1 false, 0 unassigned
        self._val = [0] * (2 * n + 1)
        self.trail: list[int] = []
        self.work = 0
        self._clauses: list[list[int]] = []
        self._watches: dict[int, list[int]] = {}
        self._occ: dict[int, list[int]] = {}
        self._model: list[int] | None = None
        self._model_known = False
        self.root_conflict = False
        self._theory = theory
        # With only unit and binary clauses, propagation is reachability in
        # the implication graph and a conflict-free closed assignment always
        # extends to a model (when the theory has one).
        self._binary = all(len(c) <= 2 for c in theory)
        self._implies: dict[int, list[int]] = {}
        self._closures: dict[int, list[int]] = {}
        units = []
        for c in theory:
            lits = c.to_ints()
            if not lits:
                self.root_conflict = True
                continue
            ci = len(self._clauses)
            self._clauses.append(lits)
            for lit in lits:
                self._occ.setdefault(lit, []).append(ci)
            if len(lits) == 1:
                units.append(lits[0])
            else:
                if len(lits) == 2:
                    a, b = lits
                    self._implies.setdefault(-a, []).append(b)
                    self._implies.setdefault(-b, []).append(a)
                self._watches.setdefault(lits[0], []).append(ci)
                self._watches.setdefault(lits[1], []).append(ci)
        if not self.root_conflict:
            for u in units:
                if not self.assign(u):
                    self.root_conflict = True
                    break
        self.root = len(self.trail)

    def value(self, lit: int) -> int:
        if abs(lit) > self.n:
            return 0
        return self._val[lit + self.n]

    def mark(self) -> int:
        return len(self.trail)

    def backtrack(self, mark: int) -> None:
        val, n, trail = self._val, self.n, self.trail
        while len(trail) > mark:
            lit = trail.pop()
            val[lit + n] = 0
            val[-lit + n] = 0

    def assign(self, lit: int) -> bool:
        """Set ``lit`` true and propagate. False on conflict."""
        if self.root_conflict:
            return False
        if abs(lit) > self.n:
            self._grow(abs(lit))
        v = self._val[lit + self.n]
        if v == 1:
            return True
        if v == -1:
            return False
        if self._binary:
            return self._assign_closure(lit)
        start = len(self.trail)
        self._set(lit)
        return self._propagate(start)

    def _closure(self, lit: int) -> list[int]:
        out = self._closures.get(lit)
        if out is None:
            seen = {lit}
            stack = [lit]
            while stack:
                q = stack.pop()
                for r in self._implies.get(q, ()):
                    if r not in seen:
                        seen.add(r)
                        stack.append(r)
            out = self._closures[lit] = sorted(seen, key=abs)
        return out

    def _assign_closure(self, lit: int) -> bool:
        val, n = self._val, self.n
        closure = self._closure(lit)
        self.work += len(closure)
        top = abs(closure[-1])
        if top > n:
            self._grow(top)
            val, n = self._val, self.n
        for q in closure:
            v = val[q + n]
            if v == 1:
                continue
            if v == -1:
                return False
            val[q + n] = 1
            val[-q + n] = -1
            self.trail.append(q)
        return True

    def _grow(self, n_new: int) -> None:
        # conditions that the theory never mentions: widen the value table
        old_n = self.n
        old = self._val
        self.n = n_new
        self._val = [0] * (2 * n_new + 1)
        for lit in range(-old_n, old_n + 1):
            self._val[lit + n_new] = old[lit + old_n]
        if self._model is not None:
            self._model.extend([-1] * (n_new - old_n))

    def _set(self, lit: int) -> None:
        self._val[lit + self.n] = 1
        self._val[-lit + self.n] = -1
        self.trail.append(lit)

    def _propagate(self, start: int) -> bool:
        val, n = self._val, self.n
        trail, clauses, watches = self.trail, self._clauses, self._watches
        i = start
        work = 0
        while i < len(trail):
            false_lit = -trail[i]
            i += 1
            ws = watches.get(false_lit)
            if not ws:
                continue
            j = 0
            k = 0
            nw = len(ws)
            while k < nw:
                ci = ws[k]
                k += 1
                c = clauses[ci]
                work += 1
                if c[0] == false_lit:
                    c[0], c[1] = c[1], c[0]
                other = c[0]
                if val[other + n] == 1:
                    ws[j] = ci
                    j += 1
                    continue
                moved = False
                for p in range(2, len(c)):
                    work += 1
                    q = c[p]
                    if val[q + n] != -1:
                        c[1], c[p] = q, false_lit
                        watches.setdefault(q, []).append(ci)
                        moved = True
                        break
                if moved:
                    continue
                ws[j] = ci
                j += 1
                if val[other + n] == -1:
                    while k < nw:
                        ws[j] = ws[k]
                        j += 1
                        k += 1
                    del ws[j:]
                    self.work += work
                    return False
                val[other + n] = 1
                val[-other + n] = -1
                trail.append(other)
            del ws[j:]
        self.work += work
        return True

    # -- complete consistency -------------------------------------------------

    def _reference_model(self) -> list[int] | None:
        """A model of the theory alone (index = var), or None if unsatisfiable."""
        if not self._model_known:
            self._model_known = True
            if not self.root_conflict:
                scratch = Propagator(self._theory, self.n)
                self._model = scratch._scan_dpll()
                self.work += scratch.work
        return self._model

    def _scan_dpll(self) -> list[int] | None:
        val, n = self._val, self.n
        for c in self._clauses:
            if any(val[lit + n] == 1 for lit in c):
                continue
            free = [lit for lit in c if val[lit + n] == 0]
            if not free:
                return None
            lit = free[0]
            for choice in (lit, -lit):
                m = self.mark()
                if self.assign(choice):
                    found = self._scan_dpll()
                    if found is not None:
                        self.backtrack(m)
                        return found
                self.backtrack(m)
            return None
        model = [-1] * (n + 1)
        for v in range(1, n + 1):
            if val[v + n] == 1:
                model[v] = 1
        return model

    def satisfiable(self) -> bool:
        """Whether the current assignment extends to a model of the theory.

        Complete (DPLL); the assignment is left as it was.
        """
        if self.root_conflict:
            return False
        model = self._reference_model()
        if model is None:
            return False
        if self._binary:
            return True
        return self._guided_dpll(model)

    def _violated_by_completion(self, model: list[int]) -> list[int] | None:
        # Only clauses holding a literal that is true in the reference model
        # but false now can be falsified by (assignment + model elsewhere).
        val, n = self._val, self.n
        for lit in self.trail:
            v = lit if lit > 0 else -lit
            if (model[v] == 1) == (lit > 0):
                continue
            for ci in self._occ.get(-lit, ()):
                c = self._clauses[ci]
                self.work += 1
                ok = False
                for q in c:
                    x = val[q + n]
                    if x == 0:
                        qv = q if q > 0 else -q
                        x = model[qv] if q > 0 else -model[qv]
                    if x == 1:
                        ok = True
                        break
                if not ok:
                    return c
        return None

    def _guided_dpll(self, model: list[int]) -> bool:
        c = self._violated_by_completion(model)
        if c is None:
            return True
        lit = next(q for q in c if self._val[q + self.n] == 0)
        for choice in (lit, -lit):
            m = self.mark()
            if self.assign(choice) and self._guided_dpll(model):
                self.backtrack(m)
                return True
            self.backtrack(m)
        return False

    def derived(self) -> frozenset:
        return frozenset(Literal.from_int(v) for v in self.trail)


def _as_ints(lits: Iterable[Literal]) -> list[int]:
    return [Literal(*lit).to_int() for lit in lits]


def unit_propagate(theory: CnfFormula, assumptions: Iterable[Literal] = ()) -> PropagationResult:
    """UP-closure of ``assumptions`` together with ``theory``."""
    prop = Propagator(theory)
    if prop.root_conflict:
        return PropagationResult(prop.derived(), True)
    for lit in _as_ints(assumptions):
        if not prop.assign(lit):
            return PropagationResult(prop.derived(), True)
    return PropagationResult(prop.derived(), False)


def is_up_implicant(t: Iterable[Literal], phi: CnfFormula, theory: CnfFormula) -> bool:
    """Every clause of ``phi`` holds a literal derived by UP from ``t`` and ``theory``.

    A UP conflict makes ``t`` a vacuous implicant (returns True).
    """
    res = unit_propagate(theory, t)
    if res.conflict:
        return True
    derived = res.derived
    return all(any(lit in derived for lit in clause) for clause in phi)


def sat(theory: CnfFormula, assumptions: Iterable[Literal] = ()) -> bool:
    """Complete satisfiability of ``assumptions`` together with ``theory``."""
    prop = Propagator(theory)
    for lit in _as_ints(assumptions):
        if not prop.assign(lit):
            return False
    return prop.satisfiable()
