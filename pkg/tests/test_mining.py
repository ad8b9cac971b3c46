from fractions import Fraction

import numpy as np
import pytest

from rulexp.errors import EmptyDataset, RuleFormatError, ZeroBodySupport
from rulexp.fixtures import LOAN_CONDITIONS, loan_dataset, loan_theory
from rulexp.logic import CnfFormula, neg, pos
from rulexp.mining import (NOT_Y, Y, AssociationRule, MinerConfig, car, confidence, conflicts, dump_rules,
                           mine, parse_rules, support)
from rulexp.tabular import BinarizedDataset, binarize
from rulexp.theory import DomainTheory, build_theory

from generators import random_binary_theory, random_conditions
from oracles import clauses_of, naive_mine


def _bd(bits, labels, conds=None):
    bits = np.asarray(bits, dtype=np.uint8)
    conds = conds or tuple(random_conditions(np.random.default_rng(0), bits.shape[1]))
    return BinarizedDataset(tuple(conds), bits, np.asarray(labels, dtype=np.int8))


def _as_oracle(rule):
    body = frozenset(lit.to_int() for lit in rule.body)
    if rule.is_car:
        head = "y" if rule.head.polarity else "!y"
    else:
        head = rule.head.to_int()
    return body, head, rule.support


def test_support_and_confidence():
    d = _bd([[1, 0], [1, 1], [0, 1], [1, 1]], [1, 0, 0, 1])
    r = AssociationRule(frozenset({pos(0), pos(1)}), Y)
    assert support(r, d) == Fraction(1, 4)
    assert confidence(r, d) == Fraction(1, 2)
    r2 = AssociationRule(frozenset({pos(0)}), Y)
    assert confidence(r2, d) == Fraction(2, 3)
    never = AssociationRule(frozenset({neg(0), neg(1)}), Y)
    assert support(never, d) == 0
    with pytest.raises(ZeroBodySupport):
        confidence(never, d)
    with pytest.raises(EmptyDataset):
        support(r, _bd(np.zeros((0, 2)), []))


def test_conflicts_examples():
    th = loan_theory()
    assert not conflicts(car([pos(4)], 1), car([pos(6)], 0), th)
    assert conflicts(car([pos(0)], 1), car([pos(2)], 0), DomainTheory())
    assert not conflicts(car([pos(0)], 1), car([pos(0)], 1), DomainTheory())


def test_loan_rule_is_mined():
    b = binarize(loan_dataset(), LOAN_CONDITIONS)
    cars, others = mine(b, loan_theory())
    assert car([pos(3), pos(6)], 1) in [car(r.body, 1) for r in cars if r.head == Y]
    for r in cars + others:
        assert confidence(r, b) == 1 and support(r, b) > 0


def test_constant_label_gives_single_literal_cars():
    d = _bd([[1, 0], [0, 1], [1, 1]], [1, 1, 1])
    cars, _ = mine(d, DomainTheory())
    singles = {r.body for r in cars if len(r.body) == 1}
    assert singles == {frozenset({pos(0)}), frozenset({neg(0)}), frozenset({pos(1)}), frozenset({neg(1)})}


def test_planted_implication_lands_in_others():
    rng = np.random.default_rng(1)
    bits = rng.integers(0, 2, (12, 5))
    bits[:, 3] |= bits[:, 0]
    d = _bd(bits, rng.integers(0, 2, 12))
    _, others = mine(d, DomainTheory())
    assert AssociationRule(frozenset({pos(0)}), pos(3)) in [AssociationRule(r.body, r.head) for r in others]


def test_up_derivable_heads_suppressed():
    b = binarize(loan_dataset(), LOAN_CONDITIONS)
    _, others = mine(b, loan_theory())
    assert AssociationRule(frozenset({pos(1)}), pos(0)) not in [AssociationRule(r.body, r.head) for r in others]


def test_matches_naive_enumerator():
    rng = np.random.default_rng(11)
    for trial in range(60):
        n = int(rng.integers(1, 7))
        rows = int(rng.integers(1, 40))
        bits = rng.integers(0, 2, (rows, n))
        labels = rng.integers(0, 2, rows)
        if trial % 3 == 0:
            th = build_theory(random_conditions(rng, n))
            bits = np.array([b for b in bits if th.structural.satisfied_by(b)] or [[0] * n])
            labels = labels[: len(bits)]
        elif trial % 3 == 1:
            th = DomainTheory(CnfFormula(), random_binary_theory(rng, n, bits[0], 2).structural) if n >= 2 else DomainTheory()
        else:
            th = DomainTheory()
        size = 2 if trial % 7 == 0 else 3
        cfg = MinerConfig(max_rule_size=size, max_cars=int(rng.integers(1, 12)), max_other_rules=int(rng.integers(1, 40)))
        res = mine(_bd(bits, labels), th, cfg)
        ref_cars, ref_others = naive_mine(bits.tolist(), labels.tolist(), clauses_of(th.combined), n, size,
                                          cfg.max_cars, cfg.max_other_rules, clauses_of(th.structural))
        assert [_as_oracle(r) for r in res.cars] == [(frozenset(b), h, s) for b, h, s in ref_cars]
        assert [_as_oracle(r) for r in res.others] == [(frozenset(b), h, s) for b, h, s in ref_others]
        kept = res.cars + res.others
        sups = [r.support for r in kept]
        assert sorted(res.cars, key=lambda r: -r.support) == res.cars
        assert all(s > 0 for s in sups)
        for i, r1 in enumerate(kept):
            for r2 in kept[i + 1:]:
                assert not conflicts(r1, r2, th)


def test_timeout_gives_prefix():
    rng = np.random.default_rng(4)
    d = _bd(rng.integers(0, 2, (30, 6)), rng.integers(0, 2, 30))
    full = mine(d, DomainTheory())
    cut = mine(d, DomainTheory(), MinerConfig(timeout=0.0))
    assert cut.timed_out
    assert full.cars[: len(cut.cars)] == cut.cars and full.others[: len(cut.others)] == cut.others


def test_deterministic():
    rng = np.random.default_rng(5)
    d = _bd(rng.integers(0, 2, (30, 6)), rng.integers(0, 2, 30))
    a, b = mine(d, DomainTheory()), mine(d, DomainTheory())
    assert a.cars == b.cars and a.others == b.others


def test_rules_text_roundtrip():
    b = binarize(loan_dataset(), LOAN_CONDITIONS)
    cars, others = mine(b, loan_theory())
    text = dump_rules(cars + others, LOAN_CONDITIONS)
    assert "I>50,S=PP => y" in text
    back = parse_rules(text, LOAN_CONDITIONS)
    assert [(r.body, r.head, r.support) for r in back] == [(r.body, r.head, r.support) for r in cars + others]
    assert parse_rules("x1,!x2 => x4  support=0.25 conf=1.0")[0].body == {pos(0), neg(1)}
    assert parse_rules("x1 => !y")[0].head == NOT_Y
    with pytest.raises(RuleFormatError):
        parse_rules("x1 x2")
    with pytest.raises(RuleFormatError):
        parse_rules("Q>3 => y", LOAN_CONDITIONS)


def test_config_validation():
    with pytest.raises(ValueError):
        MinerConfig(max_rule_size=4)
    with pytest.raises(ValueError):
        MinerConfig(min_confidence=Fraction(1, 2))
