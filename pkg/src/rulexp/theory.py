"""Domain theories over a condition set: structural constraints plus mined clauses."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Iterable, Sequence

from .errors import CarInTheory
from .logic import Clause, CnfFormula, Literal, neg, parse_dimacs, pos
from .tabular import Condition


@dataclass(frozen=True)
class DomainTheory:
    structural: CnfFormula = field(default_factory=CnfFormula)
    mined: CnfFormula = field(default_factory=CnfFormula)

    @cached_property
    def combined(self) -> CnfFormula:
        return self.structural + self.mined

    @property
    def extended(self) -> bool:
        return len(self.mined) > 0

    def structural_only(self) -> "DomainTheory":
        return DomainTheory(self.structural)

    def to_dimacs(self, conditions: Sequence[Condition] = (), num_vars: int | None = None) -> str:
        names = {c.id: str(c) for c in conditions}
        n = num_vars if num_vars is not None else max(
            [len(conditions)] + [c + 1 for c in self.combined.conditions()])
        lines = [f"p cnf {n} {len(self.structural) + len(self.mined)}"]
        lines += [f"c x{i + 1} {names[i]}" for i in sorted(names)]
        lines.append("c section structural")
        lines += [" ".join(map(str, cl.to_ints())) + " 0" for cl in self.structural]
        lines.append("c section mined")
        lines += [" ".join(map(str, cl.to_ints())) + " 0" for cl in self.mined]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_dimacs(cls, text: str) -> "DomainTheory":
        """Read a theory file; clauses before any section marker count as structural."""
        sections = {"structural": [], "mined": []}
        current = "structural"
        for line in text.splitlines():
            s = line.strip()
            if s.startswith("c section"):
                current = s.split()[-1]
                if current not in sections:
                    raise ValueError(f"unknown theory section {current!r}")
                continue
            if not s or s.startswith("c") or s.startswith("p"):
                continue
            sections[current].append(s)
        parts = []
        for key in ("structural", "mined"):
            clauses, _ = parse_dimacs("\n".join(sections[key]))
            parts.append(CnfFormula(clauses))
        return cls(*parts)


def build_theory(conditions: Sequence[Condition]) -> DomainTheory:
    """Threshold implications and pairwise category exclusions.

    Every pair of thresholds on one attribute gets its own clause, not only
    adjacent pairs: unit propagation cannot chain through missing links.
    Categorical domains are open, so no "exactly one" clause is added.
    """
    by_attr: dict[int, list[Condition]] = {}
    for c in conditions:
        by_attr.setdefault(c.attribute, []).append(c)
    clauses = []
    for group in by_attr.values():
        numeric = sorted((c for c in group if c.op == ">"), key=lambda c: (c.value, c.id))
        for lo, hi in combinations(numeric, 2):
            if lo.value < hi.value:
                clauses.append(Clause([neg(hi.id), pos(lo.id)]))
        equals = sorted((c for c in group if c.op == "="), key=lambda c: c.id)
        for a, b in combinations(equals, 2):
            if a.value != b.value:
                clauses.append(Clause([neg(a.id), neg(b.id)]))
    clauses.sort(key=lambda cl: cl.to_ints())
    return DomainTheory(CnfFormula(clauses))


def rule_clause(body: Iterable[Literal], head: Literal) -> Clause:
    return Clause([~lit for lit in body] + [head])


def extend_theory(th: DomainTheory, rules) -> DomainTheory:
    clauses = []
    for r in rules:
        if r.is_car:
            raise CarInTheory(f"classification rule {r} cannot enter the domain theory")
        clauses.append(rule_clause(r.body, r.head))
    if not clauses:
        return th
    return DomainTheory(th.structural, th.mined + CnfFormula(clauses))
