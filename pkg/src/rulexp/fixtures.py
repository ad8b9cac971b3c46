"""The small loan-approval model used throughout the tests and the README.

Applicants are described by age A, income I (k$) and employment status S
(U unemployed, TP temporary, PP permanent). Seven conditions are tested
by a three-tree forest.
"""
from __future__ import annotations

from .mining import AssociationRule, car
from .logic import pos
from .tabular import AttributeSchema, Condition, Dataset, Kind
from .theory import DomainTheory, build_theory
from .trees import DecisionTree, RandomForest

LOAN_CONDITIONS = (
    Condition(0, 0, ">", 25.0, Kind.NUMERICAL, "A"),
    Condition(1, 0, ">", 60.0, Kind.NUMERICAL, "A"),
    Condition(2, 1, ">", 30.0, Kind.NUMERICAL, "I"),
    Condition(3, 1, ">", 50.0, Kind.NUMERICAL, "I"),
    Condition(4, 2, "=", "U", Kind.CATEGORICAL, "S"),
    Condition(5, 2, "=", "TP", Kind.CATEGORICAL, "S"),
    Condition(6, 2, "=", "PP", Kind.CATEGORICAL, "S"),
)

LOAN_SCHEMA = (
    AttributeSchema("A", Kind.NUMERICAL),
    AttributeSchema("I", Kind.NUMERICAL),
    AttributeSchema("S", Kind.CATEGORICAL, ("PP", "TP", "U")),
)

# (condition, left = condition false, right = condition true)
LOAN_TREES = (
    (0, 0, (1, (2, 0, 1), (6, 0, 1))),
    (4, (3, 0, (5, 0, 1)), 0),
    (6, (3, 0, 1), (0, 0, 1)),
)

LOAN_INSTANCE = (1, 0, 1, 1, 0, 0, 1)


def loan_forest() -> RandomForest:
    return RandomForest(tuple(DecisionTree(t) for t in LOAN_TREES), LOAN_CONDITIONS)


def loan_theory() -> DomainTheory:
    return build_theory(LOAN_CONDITIONS)


def loan_rule() -> AssociationRule:
    """High income and a permanent position grant the loan."""
    return car([pos(3), pos(6)], 1)


def loan_dataset() -> Dataset:
    """A handful of applicants consistent with the rule above."""
    rows = (
        (33.0, 52.0, "PP"), (48.0, 60.0, "PP"), (22.0, 55.0, "PP"), (70.0, 80.0, "PP"),
        (40.0, 35.0, "PP"), (30.0, 20.0, "TP"), (65.0, 45.0, "U"), (19.0, 10.0, "U"),
        (52.0, 70.0, "TP"), (27.0, 40.0, "TP"), (35.0, 58.0, "U"), (61.0, 25.0, "PP"),
    )
    labels = (1, 1, 1, 1, 0, 0, 0, 0, 1, 0, 0, 0)
    schema = tuple(AttributeSchema(a.name, a.kind, tuple(sorted({r[j] for r in rows})))
                   for j, a in enumerate(LOAN_SCHEMA))
    return Dataset(schema, rows, labels)
