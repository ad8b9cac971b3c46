"""Tree ensembles rectified by mined classification rules, with
theory-aware abductive explanations."""

__version__ = "0.1.0"

from .errors import RulexpError
from .explain import (Explanation, ExplanationKind, best_reason, direct_reason,
                      oracle_is_abductive, preference_order, up_majoritary_reason)
from .logic import (Clause, CnfFormula, Literal, PropagationResult, Term,
                    is_up_implicant, neg, pos, sat, unit_propagate)
from .metrics import Confusion, auc, f_score, g_mean
from .mining import (AssociationRule, MinerConfig, MiningResult, car, confidence,
                     conflicts, mine, support)
from .pipeline import EvalReport, ExplanationStats, PipelineConfig, run_pipeline
from .rectify import RectificationReport, patch, rectify_forest, rectify_tree, simplify
from .tabular import (AttributeSchema, BinarizedDataset, Condition, Dataset, Kind,
                      binarize, instance_to_term, load_csv, split)
from .theory import DomainTheory, build_theory, extend_theory
from .trees import (DecisionTree, PathTerm, RandomForest, collect_conditions,
                    enumerate_paths, learn_forest, learn_tree, predict_forest,
                    predict_tree, to_cnf, to_dnf, vote_fraction)
