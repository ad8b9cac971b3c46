import json

import numpy as np
import pytest

from rulexp.errors import DegenerateClassDistribution
from rulexp.fixtures import LOAN_CONDITIONS, loan_dataset, loan_forest, loan_theory
from rulexp.mining import MinerConfig, mine
from rulexp.pipeline import PipelineConfig, reduction_stats, run_pipeline
from rulexp.rectify import rectify_forest
from rulexp.synthetic import planted_dataset
from rulexp.tabular import Dataset, binarize, split
from rulexp.theory import build_theory
from rulexp.trees import learn_forest

SMALL = dict(splits=2, num_trees=5, orderings=5, sample_size=20, rule_budgets=(0, 1000))


@pytest.fixture(scope="module")
def planted():
    return planted_dataset(300, seed=3)


@pytest.fixture(scope="module")
def small_run(planted):
    return run_pipeline(planted, PipelineConfig(**SMALL))


def test_reduction_stats():
    assert reduction_stats([], []) == (0.0, 0.0)
    assert reduction_stats([4, 2, 0], [4, 2, 0]) == (0.0, 0.0)
    red, ins = reduction_stats([4, 2], [2, 2])
    assert red == pytest.approx(25.0) and ins == pytest.approx(50.0)


def test_zero_budget_has_no_reduction(small_run):
    report, stats = small_run
    zero = next(s for s in stats if s.rule_budget == 0)
    assert zero.red == 0 and zero.ins == 0 and zero.sizes_th == zero.sizes_the
    assert len(report.splits) == 2
    for s in report.splits:
        assert s.sampled == min(20, s.sampled) and s.discarded <= s.sampled
        for scores in (s.before, s.after):
            assert 0 <= scores.f_score <= 1 and 0 <= scores.g_mean <= 1


def test_budget_stats_consistent(small_run):
    # greedy runs may diverge under a stronger theory, so sizes are not
    # ordered per instance; Ins counts only strict decreases
    _, stats = small_run
    big = next(s for s in stats if s.rule_budget == 1000)
    assert len(big.sizes_th) == len(big.sizes_the)
    shrunk = sum(b < a for a, b in zip(big.sizes_th, big.sizes_the))
    assert 0 <= big.ins <= 100 and (shrunk > 0) == (big.ins > 0)


def test_report_identical_across_thread_counts(planted, small_run):
    report, _ = small_run
    again, _ = run_pipeline(planted, PipelineConfig(**SMALL, threads=3))
    a = json.dumps(report.to_dict(), sort_keys=True)
    b = json.dumps(again.to_dict(), sort_keys=True)
    assert a == b
    assert "rectify_seconds" not in a


def test_predictions_change_only_under_car_bodies(planted):
    train, test = split(planted, 0.7, 5)
    f = learn_forest(train, m=5, seed=5)
    th = build_theory(f.conditions)
    mined = mine(binarize(train, f.conditions), th)
    out, _ = rectify_forest(f, mined.cars, th)
    dt = binarize(test, f.conditions)
    before, after = f.predict_many(dt.bits), out.predict_many(dt.bits)
    changed = np.flatnonzero(before != after)
    for i in changed:
        bits = dt.bits[i]
        covering = [r for r in mined.cars if r.body.covers(bits)]
        assert covering and all(r.head.polarity == bool(after[i]) for r in covering)


def test_loan_toy_rectification():
    b = binarize(loan_dataset(), LOAN_CONDITIONS)
    mined = mine(b, loan_theory(), MinerConfig())
    out, _ = rectify_forest(loan_forest(), mined.cars, loan_theory())
    assert loan_forest().predict((0, 0, 1, 1, 0, 0, 1)) == 0
    assert out.predict((0, 0, 1, 1, 0, 0, 1)) == 1


def test_single_class_rejected():
    d = planted_dataset(50)
    one = Dataset(d.schema, d.rows, tuple(1 for _ in d.labels))
    with pytest.raises(DegenerateClassDistribution):
        run_pipeline(one, PipelineConfig(**SMALL))


def test_low_support_flag(planted):
    _, stats = run_pipeline(planted, PipelineConfig(splits=1, num_trees=3, orderings=2, sample_size=5,
                                                    rule_budgets=(0,)))
    assert stats[0].low_support


def test_config_validation():
    with pytest.raises(ValueError):
        PipelineConfig(model="boost")
    with pytest.raises(ValueError):
        PipelineConfig(explain_model="final")
