"""Weighted directed control-flow graphs and the optimization objective.

A graph holds instruction-level nodes with dense integer ids, a unique
source (the only node without predecessors), per-edge subdivision costs
and per-node liveness costs.  ``calc_set`` and ``total_cost`` are the
reference definitions of the objective; both the solvers and the
brute-force oracles are checked against them.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

from .cost import CostVec, ZERO, format_cost, parse_cost
from .errors import CfgError, GraphFormatError

Edge = tuple[int, int]

DEFAULT_EDGE_COST = CostVec(1, 0)
DEFAULT_NODE_COST = CostVec(0, 1)


class Cfg:
    """Immutable weighted directed graph with a unique source.

    Node ids are dense integers ``0..node_count-1``.  Parallel edges are
    rejected (the edge set is a set); self-loops are allowed.  Sinks are
    computed, not stored: any node with no successors.  All queries are
    read-only, so instances are safe to share across threads.
    """

    __slots__ = ("node_count", "edges", "edge_cost", "node_cost", "source",
                 "_succ", "_pred", "_sinks")

    def __init__(self, node_count: int, edges: Iterable[Edge],
                 edge_cost: Optional[dict] = None,
                 node_cost: Optional[dict] = None):
        if node_count <= 0:
            raise CfgError("a CFG must have at least one node")
        edge_list = list(edges)
        edge_set = set(edge_list)
        if len(edge_set) != len(edge_list):
            seen = set()
            for e in edge_list:
                if e in seen:
                    raise CfgError(f"duplicate edge {e[0]} -> {e[1]}")
                seen.add(e)
        for (u, v) in edge_set:
            if not (0 <= u < node_count and 0 <= v < node_count):
                raise CfgError(f"edge ({u}, {v}) references an unknown node id")
        succ = [[] for _ in range(node_count)]
        pred = [[] for _ in range(node_count)]
        for (u, v) in sorted(edge_set):
            succ[u].append(v)
            pred[v].append(u)
        sources = [v for v in range(node_count) if not pred[v]]
        if len(sources) != 1:
            raise CfgError(
                f"expected exactly one node without predecessors, found {len(sources)}"
                f" ({sources[:8]}{'...' if len(sources) > 8 else ''})")

        self.node_count = node_count
        self.edges = frozenset(edge_set)
        self.edge_cost = {e: DEFAULT_EDGE_COST for e in edge_set}
        if edge_cost:
            for e, c in edge_cost.items():
                if e not in edge_set:
                    raise CfgError(f"cost given for unknown edge {e}")
                self.edge_cost[e] = c
        self.node_cost = {v: DEFAULT_NODE_COST for v in range(node_count)}
        if node_cost:
            for v, c in node_cost.items():
                if not (0 <= v < node_count):
                    raise CfgError(f"cost given for unknown node {v}")
                self.node_cost[v] = c
        self.source = sources[0]
        self._succ = tuple(tuple(s) for s in succ)
        self._pred = tuple(tuple(p) for p in pred)
        self._sinks = frozenset(v for v in range(node_count) if not succ[v])

    def successors(self, v: int) -> tuple:
        return self._succ[v]

    def predecessors(self, v: int) -> tuple:
        return self._pred[v]

    @property
    def sinks(self) -> frozenset:
        return self._sinks

    def is_acyclic(self) -> bool:
        indeg = [len(self._pred[v]) for v in range(self.node_count)]
        stack = [v for v in range(self.node_count) if indeg[v] == 0]
        seen = 0
        while stack:
            v = stack.pop()
            seen += 1
            for w in self._succ[v]:
                indeg[w] -= 1
                if indeg[w] == 0:
                    stack.append(w)
        return seen == self.node_count

    def __repr__(self):
        return f"Cfg(nodes={self.node_count}, edges={len(self.edges)}, source={self.source})"


@dataclass(frozen=True)
class ExprProblem:
    """One elimination instance: where the expression is used and what invalidates it."""

    use_set: frozenset
    invalidation_set: frozenset


def make_problem(cfg: Cfg, use: Iterable[int], invalidate: Iterable[int] = ()) -> ExprProblem:
    """Build a problem, adding the source and all sinks to the invalidation set."""
    inv = frozenset(invalidate) | {cfg.source} | cfg.sinks
    problem = ExprProblem(use_set=frozenset(use), invalidation_set=inv)
    validate_problem(cfg, problem)
    return problem


def validate_problem(cfg: Cfg, problem: ExprProblem) -> None:
    for v in problem.use_set | problem.invalidation_set:
        if not (0 <= v < cfg.node_count):
            raise CfgError(f"problem references unknown node id {v}")
    if cfg.source in problem.use_set:
        raise CfgError("the source node cannot be in the use set")
    missing = ({cfg.source} | cfg.sinks) - problem.invalidation_set
    if missing:
        raise CfgError(f"invalidation set must contain the source and all sinks; missing {sorted(missing)}")


def calc_set(cfg: Cfg, problem: ExprProblem, life: Iterable[int]) -> frozenset:
    """Edges that receive a new computation for the given life set.

    Reference definition, used verbatim by the oracles and to re-derive
    solver output: an edge (x, y) is included iff x is not in
    life-minus-invalidation and y is a use or in the life set.
    """
    life = frozenset(life)
    for v in life:
        if not (0 <= v < cfg.node_count):
            raise CfgError(f"life set references unknown node id {v}")
    use = problem.use_set
    inv = problem.invalidation_set
    return frozenset((x, y) for (x, y) in cfg.edges
                     if not (x in life and x not in inv) and (y in use or y in life))


def total_cost(cfg: Cfg, problem: ExprProblem, life: Iterable[int]) -> CostVec:
    """Objective value of a life set: edge costs over calc_set plus node costs over life."""
    life = frozenset(life)
    total = ZERO
    for e in calc_set(cfg, problem, life):
        total = total + cfg.edge_cost[e]
    for v in life:
        total = total + cfg.node_cost[v]
    return total


# ---------------------------------------------------------------------------
# Graph file format
#
#   cfg <node_count>
#   node <id> l=<cost>
#   edge <from> <to> c=<cost>
#   problem use=<ids> invalidate=<ids>
#
# Costs are written as [p,s] or inf; id lists are comma separated and may be
# empty.  '#' starts a comment.  Unlisted nodes default to l=[0,1], edges
# default to c=[1,0].


def _parse_ids(text: str, line: int) -> list:
    text = text.strip()
    if not text:
        return []
    try:
        return [int(t) for t in text.split(",")]
    except ValueError:
        raise GraphFormatError(f"malformed id list {text!r}", line)


def load_cfg(text: str, *, synthetic_source: bool = False):
    """Parse the graph file format.

    Returns ``(cfg, problems)``.  With ``synthetic_source`` a new node is
    appended when the file has zero or several nodes without predecessors,
    restoring the unique-source invariant; otherwise that is an error.
    Problem invalidation sets are augmented with the source and sinks.
    """
    node_count = None
    edges = []
    edge_cost = {}
    node_cost = {}
    raw_problems = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "cfg":
            if node_count is not None:
                raise GraphFormatError("duplicate 'cfg' header", lineno)
            if len(parts) != 2 or not parts[1].isdigit():
                raise GraphFormatError("expected 'cfg <node_count>'", lineno)
            node_count = int(parts[1])
        elif node_count is None:
            raise GraphFormatError("file must start with 'cfg <node_count>'", lineno)
        elif parts[0] == "node":
            if len(parts) != 3 or not parts[2].startswith("l="):
                raise GraphFormatError("expected 'node <id> l=<cost>'", lineno)
            try:
                v = int(parts[1])
                cost = parse_cost(parts[2][2:])
            except ValueError as exc:
                raise GraphFormatError(str(exc), lineno)
            if not (0 <= v < node_count):
                raise GraphFormatError(f"unknown node id {v}", lineno)
            node_cost[v] = cost
        elif parts[0] == "edge":
            if len(parts) != 4 or not parts[3].startswith("c="):
                raise GraphFormatError("expected 'edge <from> <to> c=<cost>'", lineno)
            try:
                u, v = int(parts[1]), int(parts[2])
                cost = parse_cost(parts[3][2:])
            except ValueError as exc:
                raise GraphFormatError(str(exc), lineno)
            if not (0 <= u < node_count and 0 <= v < node_count):
                raise GraphFormatError(f"edge ({u}, {v}) references an unknown node id", lineno)
            if (u, v) in edge_cost:
                raise GraphFormatError(f"duplicate edge {u} -> {v}", lineno)
            edges.append((u, v))
            edge_cost[(u, v)] = cost
        elif parts[0] == "problem":
            use = inv = None
            for p in parts[1:]:
                if p.startswith("use="):
                    use = _parse_ids(p[4:], lineno)
                elif p.startswith("invalidate="):
                    inv = _parse_ids(p[11:], lineno)
                else:
                    raise GraphFormatError(f"unexpected token {p!r}", lineno)
            if use is None or inv is None:
                raise GraphFormatError("expected 'problem use=<ids> invalidate=<ids>'", lineno)
            for v in use + inv:
                if not (0 <= v < node_count):
                    raise GraphFormatError(f"unknown node id {v}", lineno)
            raw_problems.append((use, inv, lineno))
        else:
            raise GraphFormatError(f"unknown directive {parts[0]!r}", lineno)
    if node_count is None:
        raise GraphFormatError("file must start with 'cfg <node_count>'")

    has_pred = [False] * node_count
    for (u, v) in edges:
        has_pred[v] = True
    sources = [v for v in range(node_count) if not has_pred[v]]
    if len(sources) != 1:
        if not synthetic_source:
            raise GraphFormatError(
                f"graph has {len(sources)} nodes without predecessors; "
                "pass synthetic_source=True to repair")
        new = node_count
        node_count += 1
        targets = sources if sources else [0]
        for t in targets:
            edges.append((new, t))
            edge_cost[(new, t)] = DEFAULT_EDGE_COST

    cfg = Cfg(node_count, edges, edge_cost, node_cost)
    problems = []
    for use, inv, lineno in raw_problems:
        try:
            problems.append(make_problem(cfg, use, inv))
        except CfgError as exc:
            raise GraphFormatError(str(exc), lineno)
    return cfg, problems


def dump_dot(cfg: Cfg, problem: Optional[ExprProblem] = None, solution=None,
             *, graph_name: str = "cfg") -> str:
    """Render the graph in DOT.

    Use nodes get a double border, invalidating nodes are filled, life-set
    nodes are dashed, and calculation edges are bold red.  Output is
    deterministic for identical inputs.
    """
    use = problem.use_set if problem else frozenset()
    inv = problem.invalidation_set if problem else frozenset()
    life = solution.life_set if solution is not None else frozenset()
    calc = solution.calc_set if solution is not None else frozenset()
    lines = [f"digraph {graph_name} {{"]
    for v in range(cfg.node_count):
        attrs = [f'label="{v}\\nl={format_cost(cfg.node_cost[v])}"']
        styles = []
        if v in inv:
            styles.append("filled")
            attrs.append('fillcolor="gray75"')
        if v in life:
            styles.append("dashed")
        if v in use:
            attrs.append("peripheries=2")
        if styles:
            attrs.append(f'style="{",".join(styles)}"')
        lines.append(f"  n{v} [{' '.join(attrs)}];")
    for (u, v) in sorted(cfg.edges):
        attrs = [f'label="{format_cost(cfg.edge_cost[(u, v)])}"']
        if (u, v) in calc:
            attrs.append('color="red" style="bold"')
        lines.append(f"  n{u} -> n{v} [{' '.join(attrs)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
