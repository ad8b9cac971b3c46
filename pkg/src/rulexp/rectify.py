"""Rectification of trees and forests by classification rules, and
theory-aware simplification of the resulting trees."""
from __future__ import annotations

import sys
import time
from dataclasses import asdict, dataclass
from typing import Sequence

from .errors import ConflictingRuleSet, NoConflict, NotACar
from .logic import Literal, Propagator
from .mining import AssociationRule
from .theory import DomainTheory
from .trees import DecisionTree, Node, PathTerm, RandomForest, is_leaf

# rectified trees grow by at most |body| levels per rule
if sys.getrecursionlimit() < 20000:
    sys.setrecursionlimit(20000)


@dataclass
class RectificationReport:
    rules_applied: int = 0
    rules_changing_model: int = 0
    paths_patched: int = 0
    node_count_before: int = 0
    node_count_after: int = 0
    depth_before: int = 0
    depth_after: int = 0
    elapsed: float = 0.0

    @property
    def nr_percent(self) -> float:
        if not self.rules_applied:
            return 0.0
        return 100.0 * self.rules_changing_model / self.rules_applied

    def to_dict(self) -> dict:
        out = asdict(self)
        out["nr_percent"] = self.nr_percent
        return out


def _target(r: AssociationRule) -> int:
    if not r.is_car:
        raise NotACar(f"rule {r} does not conclude on the class")
    return 1 if r.head.polarity else 0


def _comb(missing: Sequence[Literal], target: int, fallback: int) -> Node:
    node: Node = target
    for lit in reversed(missing):
        if lit.polarity:
            node = (lit.condition, fallback, node)
        else:
            node = (lit.condition, node, fallback)
    return node


def patch(p: PathTerm, r: AssociationRule) -> DecisionTree:
    """Comb over the body literals missing from ``p``; full match gives the
    rule's class, any mismatch falls back to the path's original leaf."""
    target = _target(r)
    if p.leaf_class == target:
        raise NoConflict(f"leaf {p.leaf_class} already agrees with {r}")
    missing = sorted(lit for lit in r.body if lit not in p.term)
    return DecisionTree(_comb(missing, target, p.leaf_class))


class _Context:
    """A propagator over the theory used as a stack of path literals."""

    def __init__(self, th: DomainTheory, n: int):
        self.prop = Propagator(th.combined, n)

    def push(self, lit: int) -> int | None:
        """Assign ``lit``; returns a mark to pop to, or None on a UP conflict."""
        m = self.prop.mark()
        if self.prop.assign(lit):
            return m
        self.prop.backtrack(m)
        return None

    def pop(self, mark: int) -> None:
        self.prop.backtrack(mark)

    def consistent_with(self, lit: int) -> bool:
        m = self.push(lit)
        if m is None:
            return False
        ok = self.prop.satisfiable()
        self.pop(m)
        return ok


def _leaf_classes(node: Node, memo: dict) -> int:
    """Bit 1: some leaf is 0; bit 2: some leaf is 1."""
    if is_leaf(node):
        return 2 if node else 1
    hit = memo.get(id(node))
    if hit is not None and hit[0] is node:
        return hit[1]
    mask = _leaf_classes(node[1], memo) | _leaf_classes(node[2], memo)
    memo[id(node)] = (node, mask)
    return mask


def _rectify_node(node: Node, r: AssociationRule, target: int, bctx: _Context,
                  pctx: _Context | None, path: list[Literal], counter: list[int],
                  memo: dict) -> Node:
    # bctx holds the rule body plus the path, pctx (when simplifying) the path only
    if not _leaf_classes(node, memo) & (1 if target else 2):
        return node  # every leaf below already agrees with the rule
    if is_leaf(node):
        if node == target or not bctx.prop.satisfiable():
            return node
        counter[0] += 1
        p = set(path)
        missing = sorted(lit for lit in r.body if lit not in p)
        comb = _comb(missing, target, node)
        return comb if pctx is None else _simplify_node(comb, pctx)
    c, left, right = node
    out = []
    for child, polarity in ((left, False), (right, True)):
        lit = Literal(c, polarity).to_int()
        m = bctx.push(lit)
        if m is None:
            out.append(child)  # unreachable together with the rule body
            continue
        pm = pctx.push(lit) if pctx is not None else None
        path.append(Literal(c, polarity))
        out.append(_rectify_node(child, r, target, bctx, pctx, path, counter, memo))
        path.pop()
        if pm is not None:
            pctx.pop(pm)
        bctx.pop(m)
    if out[0] is left and out[1] is right:
        return node
    if pctx is not None and out[0] == out[1]:
        return out[0]
    return (c, out[0], out[1])


def _rectify_root(root: Node, r: AssociationRule, bctx: _Context,
                  pctx: _Context | None = None, memo: dict | None = None) -> tuple[Node, int]:
    """Patch ``root`` by ``r``. With ``pctx`` the result is kept simplified,
    assuming ``root`` was simplified already."""
    target = _target(r)
    base = bctx.prop.mark()
    for lit in r.body:
        if bctx.push(lit.to_int()) is None:
            bctx.pop(base)
            return root, 0
    counter = [0]
    out = _rectify_node(root, r, target, bctx, pctx, [], counter, {} if memo is None else memo)
    bctx.pop(base)
    return out, counter[0]


def _num_conditions(root: Node, r: AssociationRule | None = None) -> int:
    n = 0
    stack = [root]
    while stack:
        node = stack.pop()
        if not is_leaf(node):
            n = max(n, node[0] + 1)
            stack.append(node[1])
            stack.append(node[2])
    if r is not None:
        n = max([n] + [lit.condition + 1 for lit in r.body])
    return n


def rectify_tree(t: DecisionTree, r: AssociationRule, th: DomainTheory) -> DecisionTree:
    """Patch every theory-consistent path of ``t`` whose leaf disagrees with ``r``."""
    _target(r)
    ctx = _Context(th, _num_conditions(t.root, r))
    root, _ = _rectify_root(t.root, r, ctx)
    return DecisionTree(root)


def _simplify_node(node: Node, ctx: _Context) -> Node:
    if is_leaf(node):
        return node
    c, left, right = node
    v = ctx.prop.value(c + 1)
    if v == 1:
        return _simplify_node(right, ctx)
    if v == -1:
        return _simplify_node(left, ctx)
    neg_ok = ctx.consistent_with(-(c + 1))
    pos_ok = ctx.consistent_with(c + 1)
    if not pos_ok and neg_ok:
        return _simplify_node(left, ctx)
    if not neg_ok and pos_ok:
        return _simplify_node(right, ctx)
    if not (neg_ok or pos_ok):
        return node  # the context itself is inconsistent; nothing reaches here
    m = ctx.push(-(c + 1))
    new_left = _simplify_node(left, ctx)
    ctx.pop(m)
    m = ctx.push(c + 1)
    new_right = _simplify_node(right, ctx)
    ctx.pop(m)
    if new_left == new_right:
        return new_left
    if new_left is left and new_right is right:
        return node
    return (c, new_left, new_right)


def _simplify_root(root: Node, ctx: _Context) -> Node:
    # One pass already reaches the fixpoint: pruning only depends on the
    # ancestors, and merges are decided after both children are final.
    return _simplify_node(root, ctx)


def simplify(t: DecisionTree, th: DomainTheory) -> DecisionTree:
    """Drop tests whose outcome the ancestors already force under ``th`` and
    collapse tests whose two subtrees coincide. Predictions on inputs that
    satisfy ``th`` are unchanged."""
    ctx = _Context(th, _num_conditions(t.root))
    return DecisionTree(_simplify_root(t.root, ctx))


def check_conflict_free(cars: Sequence[AssociationRule], th: DomainTheory, n: int) -> None:
    prop = Propagator(th.structural, n)
    for r in cars:
        _target(r)
    pos = [r for r in cars if r.head.polarity]
    negs = [r for r in cars if not r.head.polarity]
    for a in pos:
        for b in negs:
            union = {}
            if any(union.setdefault(l.condition, l.polarity) != l.polarity
                   for l in list(a.body) + list(b.body)):
                continue
            m = prop.mark()
            ok = all(prop.assign(Literal(c, p).to_int()) for c, p in union.items()) and prop.satisfiable()
            prop.backtrack(m)
            if ok:
                first, second = (a, b) if cars.index(a) < cars.index(b) else (b, a)
                raise ConflictingRuleSet(first, second)


def rectify_forest(f: RandomForest, cars: Sequence[AssociationRule],
                   th: DomainTheory) -> tuple[RandomForest, RectificationReport]:
    """Apply ``cars`` one after the other to every tree.

    A tree is re-simplified only when a rule actually patched it; a rule
    counts as changing the model when it patched at least one path.
    """
    start = time.perf_counter()
    n = max([f.num_conditions] + [lit.condition + 1 for r in cars for lit in r.body])
    check_conflict_free(cars, th, n)
    report = RectificationReport(node_count_before=f.size, depth_before=f.depth)
    bctx = _Context(th, n)
    pctx = _Context(th, n)
    roots = [t.root for t in f.trees]
    simplified = [False] * len(roots)
    memo: dict = {}
    for r in cars:
        changed = False
        for i, root in enumerate(roots):
            if simplified[i]:
                new_root, patched = _rectify_root(root, r, bctx, pctx, memo)
            else:
                new_root, patched = _rectify_root(root, r, bctx, memo=memo)
                if patched:
                    new_root = _simplify_root(new_root, pctx)
                    simplified[i] = True
            if patched:
                changed = True
                report.paths_patched += patched
                roots[i] = new_root
        report.rules_applied += 1
        report.rules_changing_model += int(changed)
    out = f.with_trees(DecisionTree(root) for root in roots)
    report.node_count_after = out.size
    report.depth_after = out.depth
    report.elapsed = time.perf_counter() - start
    return out, report
