"""Decision trees and random forests over a shared condition set X.

A tree node is either a leaf, the int 0 or 1, or an internal node
``(condition_id, left, right)`` where ``left`` is followed when the
condition evaluates to 0 and ``right`` when it evaluates to 1. Nodes are
plain nested tuples, so trees are immutable and compare structurally.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple, Sequence, Union

import numpy as np

from .errors import (DanglingConditionId, EmptyTrainingSet, ModelFormatError,
                     SchemaVersionMismatch)
from .logic import CnfFormula, Literal, Term
from .tabular import Condition, Dataset, Kind

Node = Union[int, tuple]
SCHEMA_VERSION = 1


def is_leaf(node: Node) -> bool:
    return not isinstance(node, tuple)


def node_count(node: Node) -> int:
    if is_leaf(node):
        return 1
    return 1 + node_count(node[1]) + node_count(node[2])


def node_depth(node: Node) -> int:
    if is_leaf(node):
        return 0
    return 1 + max(node_depth(node[1]), node_depth(node[2]))


def flip_leaves(node: Node) -> Node:
    if is_leaf(node):
        return 1 - node
    return (node[0], flip_leaves(node[1]), flip_leaves(node[2]))


def _conditions_preorder(node: Node, out: list[int]) -> None:
    if is_leaf(node):
        return
    out.append(node[0])
    _conditions_preorder(node[1], out)
    _conditions_preorder(node[2], out)


def _predict_rows(node: Node, bits: np.ndarray, idx: np.ndarray, out: np.ndarray) -> None:
    if len(idx) == 0:
        return
    if is_leaf(node):
        out[idx] = node
        return
    c, left, right = node
    m = bits[idx, c].astype(bool)
    _predict_rows(left, bits, idx[~m], out)
    _predict_rows(right, bits, idx[m], out)


class PathTerm(NamedTuple):
    term: Term
    leaf_class: int


@dataclass(frozen=True)
class DecisionTree:
    root: Node

    @classmethod
    def leaf(cls, label: int) -> "DecisionTree":
        return cls(int(label))

    @property
    def size(self) -> int:
        return node_count(self.root)

    @property
    def depth(self) -> int:
        return node_depth(self.root)

    def conditions_used(self) -> list[int]:
        out: list[int] = []
        _conditions_preorder(self.root, out)
        return list(dict.fromkeys(out))

    def predict(self, bits) -> int:
        node = self.root
        while not is_leaf(node):
            node = node[2] if bits[node[0]] else node[1]
        return node

    def predict_many(self, bits: np.ndarray) -> np.ndarray:
        bits = np.asarray(bits)
        out = np.zeros(bits.shape[0], dtype=np.int8)
        _predict_rows(self.root, bits, np.arange(bits.shape[0]), out)
        return out

    def path(self, bits) -> PathTerm:
        """The unique root-to-leaf path compatible with ``bits``."""
        lits = []
        node = self.root
        while not is_leaf(node):
            v = bool(bits[node[0]])
            lits.append(Literal(node[0], v))
            node = node[2] if v else node[1]
        return PathTerm(Term(lits), node)

    def negated(self) -> "DecisionTree":
        return DecisionTree(flip_leaves(self.root))


def predict_tree(t: DecisionTree, bits) -> int:
    return t.predict(bits)


@dataclass(frozen=True)
class RandomForest:
    trees: tuple[DecisionTree, ...]
    conditions: tuple[Condition, ...] = ()

    def __post_init__(self):
        if not self.trees:
            raise ValueError("a forest holds at least one tree")
        n = len(self.conditions)
        if n:
            for t in self.trees:
                for c in t.conditions_used():
                    if not 0 <= c < n:
                        raise DanglingConditionId(f"condition id {c} outside X (|X| = {n})")

    @property
    def m(self) -> int:
        return len(self.trees)

    @property
    def num_conditions(self) -> int:
        if self.conditions:
            return len(self.conditions)
        return 1 + max((max(t.conditions_used(), default=-1) for t in self.trees), default=-1)

    @property
    def size(self) -> int:
        return sum(t.size for t in self.trees)

    @property
    def depth(self) -> int:
        return max(t.depth for t in self.trees)

    def votes(self, bits) -> list[int]:
        return [t.predict(bits) for t in self.trees]

    def vote_fraction(self, bits) -> float:
        return sum(self.votes(bits)) / self.m

    def predict(self, bits) -> int:
        return 1 if 2 * sum(self.votes(bits)) > self.m else 0

    def vote_fraction_many(self, bits: np.ndarray) -> np.ndarray:
        bits = np.asarray(bits)
        total = np.zeros(bits.shape[0], dtype=np.int64)
        for t in self.trees:
            total += t.predict_many(bits)
        return total / self.m

    def predict_many(self, bits: np.ndarray) -> np.ndarray:
        bits = np.asarray(bits)
        total = np.zeros(bits.shape[0], dtype=np.int64)
        for t in self.trees:
            total += t.predict_many(bits)
        return (2 * total > self.m).astype(np.int8)

    def with_trees(self, trees: Iterable[DecisionTree]) -> "RandomForest":
        return RandomForest(tuple(trees), self.conditions)


def predict_forest(f: RandomForest, bits) -> int:
    return f.predict(bits)


def vote_fraction(f: RandomForest, bits) -> float:
    return f.vote_fraction(bits)


def collect_conditions(f: RandomForest) -> list[Condition]:
    """Conditions used by the trees, deduplicated, re-numbered by first
    appearance (tree order, then pre-order)."""
    seen: dict = {}
    out: list[Condition] = []
    for t in f.trees:
        order: list[int] = []
        _conditions_preorder(t.root, order)
        for cid in order:
            cond = f.conditions[cid] if f.conditions else Condition(cid, cid, "=", 1, Kind.BOOLEAN, f"x{cid + 1}")
            if cond.key not in seen:
                seen[cond.key] = len(out)
                out.append(cond.with_id(len(out)))
    return out


# -- path views --------------------------------------------------------------

def _paths(node: Node, prefix: list[Literal], out: list[PathTerm]) -> None:
    if is_leaf(node):
        conds = {}
        for lit in prefix:
            if conds.setdefault(lit.condition, lit.polarity) != lit.polarity:
                return  # contradictory tests: the leaf is unreachable
        out.append(PathTerm(Term(prefix), node))
        return
    c = node[0]
    prefix.append(Literal(c, False))
    _paths(node[1], prefix, out)
    prefix[-1] = Literal(c, True)
    _paths(node[2], prefix, out)
    prefix.pop()


def enumerate_paths(t: DecisionTree) -> list[PathTerm]:
    """One entry per reachable leaf, in pre-order (left before right)."""
    out: list[PathTerm] = []
    _paths(t.root, [], out)
    return out


def to_dnf(t: DecisionTree) -> list[Term]:
    return [p.term for p in enumerate_paths(t) if p.leaf_class == 1]


def to_cnf(t: DecisionTree) -> CnfFormula:
    return CnfFormula(p.term.negation() for p in enumerate_paths(t) if p.leaf_class == 0)


# -- learning ----------------------------------------------------------------

@dataclass
class TreeParams:
    max_depth: int | None = None
    min_samples_leaf: int = 1
    seed: int = 0
    max_features: int | None = None  # per-node feature subsample size; None = all


@dataclass
class _Encoded:
    kinds: list[Kind]
    cols: list[np.ndarray]
    names: list[str]
    y: np.ndarray
    cat_values: list[list] = field(default_factory=list)


def _encode(train: Dataset) -> _Encoded:
    kinds, cols, cats = [], [], []
    for j, a in enumerate(train.schema):
        col = train.column(j)
        kinds.append(a.kind)
        if a.kind is Kind.NUMERICAL:
            cols.append(np.asarray(col, dtype=float))
            cats.append([])
        else:
            values = sorted(set(col), key=lambda v: (str(type(v)), v))
            code = {v: i for i, v in enumerate(values)}
            cols.append(np.asarray([code[v] for v in col], dtype=np.int64))
            cats.append(values)
    return _Encoded(kinds, cols, train.names, train.label_array().astype(np.int64), cats)


def _gini_score(nl, pl, nr, pr):
    # sum over children of sum_k n_ck^2 / n_c; larger is purer
    return (pl * pl + (nl - pl) ** 2) / nl + (pr * pr + (nr - pr) ** 2) / nr


def _best_split(enc: _Encoded, idx: np.ndarray, features: Sequence[int], min_leaf: int):
    y = enc.y[idx]
    n = len(idx)
    total_pos = int(y.sum())
    best = None
    best_score = -1.0
    for a in features:
        col = enc.cols[a][idx]
        if enc.kinds[a] is Kind.NUMERICAL:
            order = np.argsort(col, kind="stable")
            v = col[order]
            cut = np.nonzero(v[1:] != v[:-1])[0]
            if len(cut) == 0:
                continue
            cum = np.cumsum(y[order])
            nl = cut + 1
            pl = cum[cut]
            nr = n - nl
            pr = total_pos - pl
            ok = (nl >= min_leaf) & (nr >= min_leaf)
            if not ok.any():
                continue
            score = np.round(_gini_score(nl, pl, nr, pr), 9)
            score[~ok] = -1.0
            k = int(np.argmax(score))
            if score[k] > best_score:
                best_score = float(score[k])
                best = (a, ">", float((v[cut[k]] + v[cut[k] + 1]) / 2.0))
        else:
            present = np.unique(col)
            if len(present) < 2:
                continue
            if enc.kinds[a] is Kind.BOOLEAN:
                present = [1]
            for code in present:
                m = col == code
                nl = int(m.sum())
                nr = n - nl
                if nl < min_leaf or nr < min_leaf:
                    continue
                pl = int(y[m].sum())
                s = round(_gini_score(nl, pl, nr, total_pos - pl), 9)
                if s > best_score:
                    best_score = s
                    value = enc.cat_values[a][int(code)]
                    best = (a, "=", value)
    return best


def _grow(enc: _Encoded, idx: np.ndarray, depth: int, params: TreeParams, rng) -> Node:
    y = enc.y[idx]
    pos = int(y.sum())
    n = len(idx)
    label = 1 if 2 * pos > n else 0
    if pos == 0 or pos == n or n < 2 * params.min_samples_leaf:
        return label
    if params.max_depth is not None and depth >= params.max_depth:
        return label
    p = len(enc.cols)
    all_features = range(p)
    if params.max_features is not None and params.max_features < p:
        features = sorted(rng.choice(p, size=params.max_features, replace=False).tolist())
        split_ = _best_split(enc, idx, features, params.min_samples_leaf)
        if split_ is None:
            rest = [a for a in all_features if a not in set(features)]
            split_ = _best_split(enc, idx, rest, params.min_samples_leaf)
    else:
        split_ = _best_split(enc, idx, all_features, params.min_samples_leaf)
    if split_ is None:
        return label
    a, op, value = split_
    col = enc.cols[a][idx]
    if op == ">":
        m = col > value
    else:
        code = enc.cat_values[a].index(value)
        m = col == code
    left = _grow(enc, idx[~m], depth + 1, params, rng)
    right = _grow(enc, idx[m], depth + 1, params, rng)
    if left == right and is_leaf(left):
        return left
    return (split_, left, right)


def _index_forest(raw_trees: list[Node], enc: _Encoded) -> RandomForest:
    keys: dict = {}
    conds: list[Condition] = []

    def visit(node):
        if is_leaf(node):
            return node
        key, left, right = node
        if key not in keys:
            a, op, value = key
            kind = enc.kinds[a]
            keys[key] = len(conds)
            conds.append(Condition(len(conds), a, op, value, kind, enc.names[a]))
        cid = keys[key]
        return (cid, visit(left), visit(right))

    trees = tuple(DecisionTree(visit(r)) for r in raw_trees)
    return RandomForest(trees, tuple(conds))


def learn_tree(train: Dataset, max_depth: int | None = None, min_samples_leaf: int = 1,
               seed: int = 0) -> RandomForest:
    """CART with Gini impurity; returns a single-tree forest carrying its X."""
    if len(train) == 0:
        raise EmptyTrainingSet("cannot learn from an empty training set")
    enc = _encode(train)
    params = TreeParams(max_depth, min_samples_leaf, seed)
    rng = np.random.default_rng(seed)
    root = _grow(enc, np.arange(len(train)), 0, params, rng)
    return _index_forest([root], enc)


def learn_forest(train: Dataset, m: int = 100, seed: int = 0, bootstrap: bool = True,
                 feature_subsample: float | None = None, max_depth: int | None = None,
                 min_samples_leaf: int = 1) -> RandomForest:
    """Bagged CART trees; tree i uses seed + i, so results do not depend on scheduling.

    ``feature_subsample`` is the per-node fraction of attributes tried;
    the default is ceil(sqrt(p)) attributes.
    """
    if len(train) == 0:
        raise EmptyTrainingSet("cannot learn from an empty training set")
    if m < 1:
        raise ValueError("m must be at least 1")
    enc = _encode(train)
    p = len(enc.cols)
    if feature_subsample is None:
        k = max(1, math.ceil(math.sqrt(p))) if p else 0
    else:
        k = max(1, math.ceil(feature_subsample * p)) if p else 0
    n = len(train)
    raw = []
    for i in range(m):
        rng = np.random.default_rng(seed + i)
        idx = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
        params = TreeParams(max_depth, min_samples_leaf, seed + i, k)
        raw.append(_grow(enc, np.sort(idx), 0, params, rng))
    return _index_forest(raw, enc)


# -- JSON --------------------------------------------------------------------

def _node_to_arena(root: Node) -> list[dict]:
    nodes: list[dict] = []

    def emit(node):
        i = len(nodes)
        if is_leaf(node):
            nodes.append({"leaf": int(node)})
            return i
        nodes.append(None)
        left = emit(node[1])
        right = emit(node[2])
        nodes[i] = {"cond": int(node[0]), "left": left, "right": right}
        return i

    emit(root)
    return nodes


def _arena_to_node(nodes: list, root: int, n_conditions: int | None) -> Node:
    def build(i, stack):
        if not isinstance(i, int) or not 0 <= i < len(nodes):
            raise ModelFormatError(f"node reference {i!r} out of range")
        if i in stack:
            raise ModelFormatError("cycle in tree nodes")
        entry = nodes[i]
        if "leaf" in entry:
            if entry["leaf"] not in (0, 1):
                raise ModelFormatError(f"leaf label {entry['leaf']!r} is not 0/1")
            return int(entry["leaf"])
        c = entry.get("cond")
        if not isinstance(c, int) or c < 0 or (n_conditions is not None and c >= n_conditions):
            raise DanglingConditionId(f"condition id {c!r} not in the condition table")
        stack.add(i)
        node = (c, build(entry["left"], stack), build(entry["right"], stack))
        stack.discard(i)
        return node

    return build(root, set())


def forest_to_json(f: RandomForest) -> dict:
    return {
        "version": SCHEMA_VERSION,
        "conditions": [
            {"id": c.id, "attribute": c.attribute, "name": c.name, "kind": c.kind.value,
             "op": c.op, "value": c.value}
            for c in f.conditions
        ],
        "trees": [{"root": 0, "nodes": _node_to_arena(t.root)} for t in f.trees],
    }


def forest_from_json(doc: dict) -> RandomForest:
    if doc.get("version") != SCHEMA_VERSION:
        raise SchemaVersionMismatch(f"unsupported model version {doc.get('version')!r}")
    conds = []
    for i, c in enumerate(doc.get("conditions", [])):
        if c.get("id") != i:
            raise ModelFormatError(f"condition ids must be dense and ordered (got {c.get('id')!r} at {i})")
        kind = Kind(c["kind"])
        value = c["value"]
        if c["op"] == ">":
            value = float(value)
        conds.append(Condition(i, int(c["attribute"]), c["op"], value, kind, c.get("name", "")))
    trees = []
    for t in doc.get("trees", []):
        trees.append(DecisionTree(_arena_to_node(t["nodes"], t.get("root", 0), len(conds))))
    if not trees:
        raise ModelFormatError("model holds no trees")
    return RandomForest(tuple(trees), tuple(conds))


def dump_forest(f: RandomForest, path) -> None:
    with open(path, "w") as fh:
        json.dump(forest_to_json(f), fh, indent=1)


def load_forest(path) -> RandomForest:
    with open(path) as fh:
        return forest_from_json(json.load(fh))


def iter_leaves(node: Node) -> Iterator[int]:
    if is_leaf(node):
        yield node
    else:
        yield from iter_leaves(node[1])
        yield from iter_leaves(node[2])
