"""End-to-end protocol: learn, mine, rectify, score, explain; repeated over splits."""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateClassDistribution
from .explain import best_reason
from .metrics import Confusion, auc, f_score, g_mean
from .mining import AssociationRule, MinerConfig, mine
from .rectify import rectify_forest
from .tabular import BinarizedDataset, Dataset, binarize, split
from .theory import build_theory, extend_theory
from .trees import RandomForest, learn_forest, learn_tree

log = logging.getLogger(__name__)

THREADS_ENV = "RULEXP_THREADS"
MIN_EXPLAINED = 10


@dataclass
class PipelineConfig:
    model: str = "forest"  # or "tree"
    splits: int = 10
    train_fraction: float = 0.7
    num_trees: int = 100
    max_depth: int | None = None
    miner: MinerConfig = field(default_factory=MinerConfig)
    orderings: int = 100
    rule_budgets: Sequence[int] = (0, 100, 1000)
    sample_size: int = 100
    explain_model: str = "initial"  # or "rectified"
    seed: int = 0
    threads: int | None = None

    def __post_init__(self):
        if self.model not in ("forest", "tree"):
            raise ValueError(f"unknown model kind {self.model!r}")
        if self.explain_model not in ("initial", "rectified"):
            raise ValueError(f"unknown explain_model {self.explain_model!r}")


@dataclass
class ModelScores:
    f_score: float
    g_mean: float
    auc: float | None


@dataclass
class SplitResult:
    split: int
    seed: int
    before: ModelScores
    after: ModelScores
    nodes_before: int
    nodes_after: int
    depth_before: int
    depth_after: int
    num_conditions: int
    num_cars: int
    num_other_rules: int
    miner_timed_out: bool
    rules_changing_model: int
    nr_percent: float
    rectify_seconds: float
    # per budget: sizes under Th and Th_e for the surviving instances
    sizes_th: list[int] = field(default_factory=list)
    sizes_the: dict[int, list[int]] = field(default_factory=dict)
    sampled: int = 0
    discarded: int = 0


@dataclass
class ExplanationStats:
    rule_budget: int
    red: float
    ins: float
    sizes_th: list[int]
    sizes_the: list[int]
    low_support: bool = False


@dataclass
class EvalReport:
    config: dict
    splits: list[SplitResult]
    averages: dict

    def to_dict(self, include_timings: bool = False) -> dict:
        splits = []
        for s in self.splits:
            d = asdict(s)
            d["sizes_the"] = {str(k): v for k, v in d["sizes_the"].items()}
            if not include_timings:
                d.pop("rectify_seconds")
            splits.append(d)
        avg = dict(self.averages)
        if not include_timings:
            avg.pop("rectify_seconds", None)
        return {"config": self.config, "splits": splits, "averages": avg}


def reduction_stats(sizes_th: Sequence[int], sizes_the: Sequence[int]) -> tuple[float, float]:
    """Mean relative size reduction (percent, not clamped) and the percentage
    of instances whose reason strictly shrank."""
    if not sizes_th:
        return 0.0, 0.0
    reds = [(a - b) / a if a else 0.0 for a, b in zip(sizes_th, sizes_the)]
    ins = sum(1 for a, b in zip(sizes_th, sizes_the) if b < a)
    return 100.0 * float(np.mean(reds)), 100.0 * ins / len(sizes_th)


def violates(rule: AssociationRule, bits) -> bool:
    return rule.body.covers(bits) and not rule.head.holds(bits)


def score_model(f: RandomForest, data: BinarizedDataset, use_votes: bool) -> ModelScores:
    pred = f.predict_many(data.bits)
    conf = Confusion.from_predictions(data.labels, pred)
    scores = f.vote_fraction_many(data.bits) if use_votes else pred
    try:
        a = auc(zip(scores.tolist(), data.labels.tolist()))
    except DegenerateClassDistribution:
        a = None
    return ModelScores(f_score(conf), g_mean(conf), a)


def learn_model(train: Dataset, cfg: PipelineConfig, seed: int) -> RandomForest:
    if cfg.model == "tree":
        return learn_tree(train, max_depth=cfg.max_depth, seed=seed)
    return learn_forest(train, m=cfg.num_trees, seed=seed, max_depth=cfg.max_depth)


def run_split(d: Dataset, cfg: PipelineConfig, k: int) -> SplitResult:
    seed = cfg.seed + k
    train, test = split(d, cfg.train_fraction, seed)
    f = learn_model(train, cfg, seed)
    th = build_theory(f.conditions)
    d_train = binarize(train, f.conditions)
    d_test = binarize(test, f.conditions)
    budgets = sorted(set(int(b) for b in cfg.rule_budgets))
    miner_cfg = MinerConfig(cfg.miner.max_rule_size, cfg.miner.max_cars,
                            max(budgets + [0]), cfg.miner.timeout)
    mined = mine(d_train, th, miner_cfg)
    rectified, report = rectify_forest(f, mined.cars, th)
    use_votes = cfg.model == "forest"
    res = SplitResult(
        split=k, seed=seed,
        before=score_model(f, d_test, use_votes), after=score_model(rectified, d_test, use_votes),
        nodes_before=report.node_count_before, nodes_after=report.node_count_after,
        depth_before=report.depth_before, depth_after=report.depth_after,
        num_conditions=len(f.conditions), num_cars=len(mined.cars),
        num_other_rules=len(mined.others), miner_timed_out=mined.timed_out,
        rules_changing_model=report.rules_changing_model, nr_percent=report.nr_percent,
        rectify_seconds=report.elapsed,
    )

    # explanation study on a shared seeded sample of test rows
    model = f if cfg.explain_model == "initial" else rectified
    order = np.random.default_rng(seed).permutation(len(d_test))[: cfg.sample_size]
    rows = [d_test.bits[i] for i in order]
    kept = [b for b in rows
            if th.structural.satisfied_by(b) and not any(violates(r, b) for r in mined.others)]
    res.sampled = len(rows)
    res.discarded = len(rows) - len(kept)
    theories = {b: extend_theory(th, mined.others[:b]) for b in budgets}
    for i, bits in enumerate(kept):
        ordering_seed = seed * 1_000_003 + i
        base = best_reason(model, th, bits, cfg.orderings, ordering_seed).size
        res.sizes_th.append(base)
        for b in budgets:
            size = base if b == 0 else best_reason(model, theories[b], bits, cfg.orderings, ordering_seed).size
            res.sizes_the.setdefault(b, []).append(size)
    for b in budgets:
        res.sizes_the.setdefault(b, [])
    log.info("split %d: %d cars, %d other rules, F %.3f -> %.3f", k, res.num_cars,
             res.num_other_rules, res.before.f_score, res.after.f_score)
    return res


def _mean(values) -> float | None:
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if vals else None


def thread_count(cfg: PipelineConfig) -> int:
    if cfg.threads:
        return cfg.threads
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def run_pipeline(d: Dataset, cfg: PipelineConfig | None = None) -> tuple[EvalReport, list[ExplanationStats]]:
    cfg = cfg or PipelineConfig()
    if len(set(d.labels)) < 2:
        raise DegenerateClassDistribution("the dataset needs both classes")
    threads = thread_count(cfg)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(lambda k: run_split(d, cfg, k), range(cfg.splits)))
    else:
        results = [run_split(d, cfg, k) for k in range(cfg.splits)]

    averages = {}
    for phase in ("before", "after"):
        for metric in ("f_score", "g_mean", "auc"):
            averages[f"{metric}_{phase}"] = _mean(getattr(getattr(r, phase), metric) for r in results)
    for key in ("nodes_before", "nodes_after", "depth_before", "depth_after", "num_conditions",
                "num_cars", "num_other_rules", "nr_percent", "rectify_seconds"):
        averages[key] = _mean(getattr(r, key) for r in results)

    stats = []
    for b in sorted(set(int(x) for x in cfg.rule_budgets)):
        reds, inss = [], []
        all_th, all_the = [], []
        low = False
        for r in results:
            red, ins = reduction_stats(r.sizes_th, r.sizes_the[b])
            reds.append(red)
            inss.append(ins)
            all_th += r.sizes_th
            all_the += r.sizes_the[b]
            low = low or len(r.sizes_th) < MIN_EXPLAINED
        stats.append(ExplanationStats(b, float(np.mean(reds)), float(np.mean(inss)), all_th, all_the, low))

    config = asdict(cfg)
    config["miner"] = {k: (str(v) if not isinstance(v, (int, float)) else v)
                       for k, v in asdict(cfg.miner).items()}
    config["rule_budgets"] = list(cfg.rule_budgets)
    config.pop("threads")
    config["auc_scores"] = "vote_fraction" if cfg.model == "forest" else "hard_prediction"
    return EvalReport(config, results, averages), stats
