"""Mining of 100%-confidence association rules over binarized data.

Items are literals over X plus the two class literals. A rule is a body of
one or two literals and a single-literal head. Candidates are produced in
decreasing support order (ties in canonical order) and kept unless they
conflict with an already kept rule.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import EmptyDataset, RuleFormatError, ZeroBodySupport
from .logic import Literal, Propagator, Term
from .tabular import BinarizedDataset, Condition
from .theory import DomainTheory

CLASS = -1
Y = Literal(CLASS, True)
NOT_Y = Literal(CLASS, False)


def head_key(lit: Literal) -> tuple:
    # class heads sort after every condition head
    return (float("inf") if lit.condition == CLASS else lit.condition, lit.polarity)


@dataclass(frozen=True)
class AssociationRule:
    body: Term
    head: Literal
    support: Fraction = Fraction(0)
    confidence: Fraction = Fraction(1)

    def __post_init__(self):
        if not isinstance(self.body, Term):
            object.__setattr__(self, "body", Term(self.body))
        if not self.body:
            raise ValueError("a rule body holds at least one literal")
        if self.head.condition in self.body.conditions():
            raise ValueError("head variable occurs in the body")

    @property
    def is_car(self) -> bool:
        return self.head.condition == CLASS

    @property
    def size(self) -> int:
        return len(self.body) + 1

    def canonical_key(self) -> tuple:
        return (tuple(self.body.sorted()), head_key(self.head))

    def covers(self, bits) -> bool:
        return self.body.covers(bits)

    def __str__(self) -> str:
        body = " & ".join(map(str, self.body.sorted()))
        head = ("y" if self.head.polarity else "!y") if self.is_car else str(self.head)
        return f"{body} => {head}"


def car(body: Iterable[Literal], label: int, support=Fraction(0)) -> AssociationRule:
    return AssociationRule(Term(body), Y if label else NOT_Y, Fraction(support))


@dataclass
class MinerConfig:
    max_rule_size: int = 3
    max_cars: int = 100
    max_other_rules: int = 1000
    timeout: float = 3600.0
    min_support: Fraction = Fraction(0)  # strictly greater than this
    min_confidence: Fraction = Fraction(1)

    def __post_init__(self):
        if self.max_rule_size not in (2, 3):
            raise ValueError("rules hold 2 or 3 literals (head included)")
        if self.min_confidence != 1:
            raise ValueError("only 100%-confidence rules are mined")


@dataclass
class MiningResult:
    cars: list[AssociationRule]
    others: list[AssociationRule]
    timed_out: bool = False
    stats: dict = field(default_factory=dict)

    def __iter__(self) -> Iterator[list[AssociationRule]]:
        return iter((self.cars, self.others))


def _holds(lit: Literal, bits: np.ndarray, labels: np.ndarray) -> np.ndarray:
    col = labels if lit.condition == CLASS else bits[:, lit.condition]
    return col == 1 if lit.polarity else col == 0


def _body_mask(body: Term, d: BinarizedDataset) -> np.ndarray:
    m = np.ones(len(d), dtype=bool)
    for lit in body:
        m &= _holds(lit, d.bits, d.labels)
    return m


def support(r: AssociationRule, d: BinarizedDataset) -> Fraction:
    if len(d) == 0:
        raise EmptyDataset("support is undefined on an empty dataset")
    m = _body_mask(r.body, d) & _holds(r.head, d.bits, d.labels)
    return Fraction(int(m.sum()), len(d))


def confidence(r: AssociationRule, d: BinarizedDataset) -> Fraction:
    if len(d) == 0:
        raise EmptyDataset("confidence is undefined on an empty dataset")
    body = _body_mask(r.body, d)
    nb = int(body.sum())
    if nb == 0:
        raise ZeroBodySupport(f"no row satisfies the body of {r}")
    return Fraction(int((body & _holds(r.head, d.bits, d.labels)).sum()), nb)


class _ConsistencyChecker:
    """Complete satisfiability of small terms against one fixed theory."""

    def __init__(self, theory, n: int):
        self.prop = Propagator(theory, n)

    def consistent(self, lits: Iterable[Literal]) -> bool:
        prop = self.prop
        if prop.root_conflict:
            return False
        m = prop.mark()
        ok = all(prop.assign(lit.to_int()) for lit in lits)
        ok = ok and prop.satisfiable()
        prop.backtrack(m)
        return ok

    def closure(self, lits: Iterable[Literal]) -> set[int] | None:
        """UP-derived literal ints, or None on a UP conflict."""
        prop = self.prop
        if prop.root_conflict:
            return None
        m = prop.mark()
        ok = all(prop.assign(lit.to_int()) for lit in lits)
        out = set(prop.trail) if ok else None
        prop.backtrack(m)
        return out


def conflicts(r1: AssociationRule, r2: AssociationRule, th: DomainTheory) -> bool:
    if r1.head.condition != r2.head.condition or r1.head.polarity == r2.head.polarity:
        return False
    conds = {}
    for lit in list(r1.body) + list(r2.body):
        if conds.setdefault(lit.condition, lit.polarity) != lit.polarity:
            return False
    n = max([c + 1 for c in conds] + [0])
    return _ConsistencyChecker(th.structural, n).consistent(Literal(c, p) for c, p in conds.items())


def _item_literal(item: int, n: int) -> Literal:
    if item >= 2 * n:
        return Literal(CLASS, bool(item - 2 * n))
    return Literal(item // 2, bool(item % 2))


def mine(d: BinarizedDataset, th: DomainTheory, cfg: MinerConfig | None = None) -> MiningResult:
    cfg = cfg or MinerConfig()
    if len(d) == 0:
        raise EmptyDataset("cannot mine an empty dataset")
    start = time.monotonic()
    deadline = start + cfg.timeout
    n = d.num_conditions
    rows = len(d)
    bits = np.asarray(d.bits, dtype=np.uint8)
    y = np.asarray(d.labels, dtype=np.float64)

    # item 2j is !x_j, 2j+1 is x_j; item order equals canonical literal order
    M = np.empty((rows, 2 * n), dtype=np.float64)
    M[:, 0::2] = 1 - bits
    M[:, 1::2] = bits
    S = np.rint(M.T @ M).astype(np.int64)
    Ty = np.rint(M.T @ (M * y[:, None])).astype(np.int64)
    Tn = S - Ty
    pos_total = int(y.sum())

    # candidate bodies: (count, first item, second item or -1)
    single = np.arange(2 * n)
    cnt1 = np.diag(S) if n else np.zeros(0, dtype=np.int64)
    keep = cnt1 > 0
    parts_a = [single[keep]]
    parts_b = [np.full(int(keep.sum()), -1)]
    parts_c = [cnt1[keep]]
    if cfg.max_rule_size >= 3 and n >= 2:
        ia, ib = np.triu_indices(2 * n, k=1)
        ok = (ia // 2 != ib // 2) & (S[ia, ib] > 0)
        parts_a.append(ia[ok])
        parts_b.append(ib[ok])
        parts_c.append(S[ia[ok], ib[ok]])
    A = np.concatenate(parts_a)
    B = np.concatenate(parts_b)
    C = np.concatenate(parts_c)
    order = np.lexsort((B, A, -C))

    checker = _ConsistencyChecker(th.combined, n)
    structural = _ConsistencyChecker(th.structural, n)
    cars: list[AssociationRule] = []
    others: list[AssociationRule] = []
    kept_by_head: dict[Literal, list[AssociationRule]] = {}
    stats = {"bodies_examined": 0, "candidates": 0, "rejected_conflict": 0,
             "rejected_trivial": 0, "rejected_vacuous": 0}
    timed_out = False

    def try_keep(rule: AssociationRule, bucket: list) -> None:
        stats["candidates"] += 1
        lits = list(rule.body)
        for other in kept_by_head.get(~rule.head, ()):
            union = {}
            clash = False
            for lit in lits + list(other.body):
                if union.setdefault(lit.condition, lit.polarity) != lit.polarity:
                    clash = True
                    break
            if not clash and structural.consistent(Literal(c, p) for c, p in union.items()):
                stats["rejected_conflict"] += 1
                return
        bucket.append(rule)
        kept_by_head.setdefault(rule.head, []).append(rule)

    for k in order:
        want_cars = len(cars) < cfg.max_cars
        want_others = len(others) < cfg.max_other_rules
        if not (want_cars or want_others):
            break
        if time.monotonic() > deadline:
            timed_out = True
            break
        a, b, c = int(A[k]), int(B[k]), int(C[k])
        items = (a,) if b < 0 else (a, b)
        body = Term(_item_literal(i, n) for i in items)
        car_heads = []
        if want_cars:
            ty = Ty[a, a] if b < 0 else Ty[a, b]
            tn = Tn[a, a] if b < 0 else Tn[a, b]
            if tn == c:
                car_heads.append(NOT_Y)
            elif ty == c:
                car_heads.append(Y)
        x_heads: list[int] = []
        if want_others and len(items) + 1 <= cfg.max_rule_size:
            if b < 0:
                full = np.nonzero(S[a] == c)[0]
            else:
                rows_ab = (M[:, a] > 0) & (M[:, b] > 0)
                full = np.nonzero(M[rows_ab].sum(axis=0) == c)[0]
            body_conds = {i // 2 for i in items}
            x_heads = [int(h) for h in full if int(h) // 2 not in body_conds]
        if not car_heads and not x_heads:
            continue
        stats["bodies_examined"] += 1
        derived = checker.closure(body)
        if derived is None or not checker.consistent(body):
            stats["rejected_vacuous"] += 1
            continue
        sup = Fraction(c, rows)
        for h in x_heads:
            lit = _item_literal(h, n)
            if lit.to_int() in derived:
                stats["rejected_trivial"] += 1
                continue
            if len(others) >= cfg.max_other_rules:
                break
            try_keep(AssociationRule(body, lit, sup), others)
        for lit in car_heads:
            try_keep(AssociationRule(body, lit, sup), cars)

    stats["elapsed"] = time.monotonic() - start
    stats["positives"] = pos_total
    return MiningResult(cars, others, timed_out, stats)


# -- text format ---------------------------------------------------------------

def _format_literal(lit: Literal, conditions: Sequence[Condition]) -> str:
    if lit.condition == CLASS:
        return "y" if lit.polarity else "!y"
    name = str(conditions[lit.condition]) if conditions else f"x{lit.condition + 1}"
    return name if lit.polarity else "!" + name


def format_rule(r: AssociationRule, conditions: Sequence[Condition] = ()) -> str:
    body = ",".join(_format_literal(lit, conditions) for lit in r.body.sorted())
    return (f"{body} => {_format_literal(r.head, conditions)}  "
            f"support={r.support} conf={float(r.confidence)!r}")


def dump_rules(rules: Iterable[AssociationRule], conditions: Sequence[Condition] = ()) -> str:
    return "".join(format_rule(r, conditions) + "\n" for r in rules)


def _parse_literal(text: str, lookup: dict[str, int]) -> Literal:
    text = text.strip()
    polarity = not text.startswith("!")
    name = text.lstrip("!")
    if name == "y":
        return Literal(CLASS, polarity)
    if name in lookup:
        return Literal(lookup[name], polarity)
    if name.startswith("x") and name[1:].isdigit():
        return Literal(int(name[1:]) - 1, polarity)
    raise RuleFormatError(f"unknown condition {name!r}")


def parse_rules(text: str, conditions: Sequence[Condition] = ()) -> list[AssociationRule]:
    lookup = {str(c): c.id for c in conditions}
    rules = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=>" not in line:
            raise RuleFormatError(f"line {lineno}: missing '=>'")
        lhs, rhs = line.split("=>", 1)
        fields = rhs.split()
        if not fields:
            raise RuleFormatError(f"line {lineno}: missing head")
        sup, conf = Fraction(0), Fraction(1)
        for f in fields[1:]:
            key, _, val = f.partition("=")
            try:
                if key == "support":
                    sup = Fraction(val)
                elif key == "conf":
                    conf = Fraction(val)
            except ValueError:
                raise RuleFormatError(f"line {lineno}: bad number {val!r}") from None
        try:
            body = Term(_parse_literal(t, lookup) for t in lhs.split(","))
            rules.append(AssociationRule(body, _parse_literal(fields[0], lookup), sup, conf))
        except (ValueError, RuleFormatError) as exc:
            raise RuleFormatError(f"line {lineno}: {exc}") from None
    return rules
