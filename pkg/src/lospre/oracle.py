"""Brute-force reference implementations and reproducible instance generation.

These are the ground truth the solvers are checked against.  They share no
code with the solver modules beyond the objective definition itself
(``calc_set``/``total_cost``); enumeration here is either direct or a
vectorized restatement of the objective, and the reported optimum is
re-validated through ``total_cost`` before being returned.

Tie-breaking matches the solvers' canonical rule so whole solutions, not
just costs, are comparable: among equal-cost assignments, scan node ids
upward and prefer the dead state (lexicographically smallest bit string).
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .cfg import Cfg, DEFAULT_EDGE_COST, DEFAULT_NODE_COST, ExprProblem, calc_set, make_problem, total_cost
from .cost import CostVec
from .dp import LospreSolution
from .errors import SizeGuardError
from .safety import SafetySolution


def _life_key(cfg, mask):
    return tuple((mask >> v) & 1 for v in range(cfg.node_count))


def _finite_costs(cfg) -> bool:
    return not any(c.infinite for c in cfg.edge_cost.values()) and \
        not any(c.infinite for c in cfg.node_cost.values())


def brute_lospre(cfg: Cfg, problem: ExprProblem) -> LospreSolution:
    """Global minimum of the objective over all 2**|V| life sets."""
    n = cfg.node_count
    if n > 20:
        raise SizeGuardError(f"brute_lospre is limited to 20 nodes, got {n}")
    if _finite_costs(cfg) and n >= 4:
        best_mask = _brute_lospre_vectorized(cfg, problem)
    else:
        best = None
        best_mask = 0
        for mask in range(1 << n):
            life = frozenset(v for v in range(n) if (mask >> v) & 1)
            key = (total_cost(cfg, problem, life), _life_key(cfg, mask))
            if best is None or key < best:
                best = key
                best_mask = mask
    life = frozenset(v for v in range(n) if (best_mask >> v) & 1)
    return LospreSolution(life_set=life, calc_set=calc_set(cfg, problem, life),
                          cost=total_cost(cfg, problem, life))


def _brute_lospre_vectorized(cfg, problem):
    """Vectorized enumeration; returns the canonical argmin mask."""
    n = cfg.node_count
    use = problem.use_set
    inv = problem.invalidation_set
    masks = np.arange(1 << n, dtype=np.int64)
    pri = np.zeros(1 << n, dtype=np.int64)
    sec = np.zeros(1 << n, dtype=np.int64)
    for (x, y) in cfg.edges:
        c = cfg.edge_cost[(x, y)]
        x_ok = np.ones(1 << n, dtype=bool) if x in inv else ((masks >> x) & 1) == 0
        y_ok = np.ones(1 << n, dtype=bool) if y in use else ((masks >> y) & 1) == 1
        active = x_ok & y_ok
        pri += active * c.primary
        sec += active * c.secondary
    for v in range(n):
        c = cfg.node_cost[v]
        alive = ((masks >> v) & 1) == 1
        pri += alive * c.primary
        sec += alive * c.secondary
    # bit-reversed mask orders ties as: scan ids upward, prefer dead
    rev = np.zeros(1 << n, dtype=np.int64)
    for v in range(n):
        rev |= ((masks >> v) & 1) << (n - 1 - v)
    order = np.lexsort((rev, sec, pri))
    return int(masks[order[0]])


def brute_safety(cfg: Cfg, problem: ExprProblem) -> SafetySolution:
    """Path-closure reference for invalidation enlargement.

    A node joins the enlarged set iff it is outside the use set and lies on
    a directed path between two invalidating nodes whose nodes strictly
    between the endpoints all avoid the use set.  Computed by forward and
    backward reachability on the graph restricted to non-use nodes.
    """
    n = cfg.node_count
    if n > 16:
        raise SizeGuardError(f"brute_safety is limited to 16 nodes, got {n}")
    use = problem.use_set
    inv = problem.invalidation_set

    fwd = set()
    stack = []
    for a in inv:
        for x in cfg.successors(a):
            if x not in use and x not in fwd:
                fwd.add(x)
                stack.append(x)
    while stack:
        x = stack.pop()
        for y in cfg.successors(x):
            if y not in use and y not in fwd:
                fwd.add(y)
                stack.append(y)

    bwd = set()
    stack = []
    for b in inv:
        for x in cfg.predecessors(b):
            if x not in use and x not in bwd:
                bwd.add(x)
                stack.append(x)
    while stack:
        x = stack.pop()
        for y in cfg.predecessors(x):
            if y not in use and y not in bwd:
                bwd.add(y)
                stack.append(y)

    added = frozenset((fwd & bwd) - inv)
    return SafetySolution(i_prime=frozenset(inv | added), added=added)


def brute_extended(cfg: Cfg, problem: ExprProblem,
                   lifetime_cost: Callable[[int, int, int, int], CostVec]) -> LospreSolution:
    """Global minimum over all 8**|V| (value, left, right) liveness assignments.

    The edge term depends only on the value bits, and the node term is a
    per-node table lookup, so the enumeration iterates the 2**|V| value
    masks and minimizes the operand bits per node exactly; the result and
    its tie-breaking equal full enumeration (cross-checked in tests).
    """
    n = cfg.node_count
    if n > 8:
        raise SizeGuardError(f"brute_extended is limited to 8 nodes, got {n}")
    tables = [[lifetime_cost(v, b, bl, br) for b in (0, 1) for bl in (0, 1) for br in (0, 1)]
              for v in range(n)]
    # tables[v][b*4 + bl*2 + br]

    best = None
    for mask in range(1 << n):
        life = frozenset(v for v in range(n) if (mask >> v) & 1)
        edge_cost = CostVec(0, 0)
        for e in calc_set(cfg, problem, life):
            edge_cost = edge_cost + cfg.edge_cost[e]
        node_cost = CostVec(0, 0)
        op_bits = []
        for v in range(n):
            b = (mask >> v) & 1
            row = tables[v]
            cand = [(row[b * 4 + bl * 2 + br], (bl, br)) for bl in (0, 1) for br in (0, 1)]
            c, bits = min(cand, key=lambda t: (t[0], t[1]))
            node_cost = node_cost + c
            op_bits.append((b, bits[0], bits[1]))
        key = (edge_cost + node_cost, tuple(op_bits))
        if best is None or key < best[0]:
            best = (key, mask, op_bits)

    _, mask, op_bits = best
    life = frozenset(v for v in range(n) if (mask >> v) & 1)
    life_l = frozenset(v for v in range(n) if op_bits[v][1])
    life_r = frozenset(v for v in range(n) if op_bits[v][2])
    cost = CostVec(0, 0)
    for e in calc_set(cfg, problem, life):
        cost = cost + cfg.edge_cost[e]
    for v in range(n):
        b, bl, br = op_bits[v]
        cost = cost + tables[v][b * 4 + bl * 2 + br]
    return LospreSolution(life_set=life, calc_set=calc_set(cfg, problem, life),
                          cost=cost, life_left=life_l, life_right=life_r)


def brute_extended_full(cfg: Cfg, problem: ExprProblem, lifetime_cost) -> LospreSolution:
    """Literal 8**|V| enumeration, for cross-checking brute_extended on tiny graphs."""
    n = cfg.node_count
    if n > 5:
        raise SizeGuardError(f"brute_extended_full is limited to 5 nodes, got {n}")
    best = None
    for assign in range(8 ** n):
        bits = []
        a = assign
        for _ in range(n):
            d = a % 8
            bits.append(((d >> 2) & 1, (d >> 1) & 1, d & 1))  # (b, bl, br)
            a //= 8
        life = frozenset(v for v in range(n) if bits[v][0])
        cost = CostVec(0, 0)
        for e in calc_set(cfg, problem, life):
            cost = cost + cfg.edge_cost[e]
        for v in range(n):
            cost = cost + lifetime_cost(v, *bits[v])
        key = (cost, tuple(bits))
        if best is None or key < best[0]:
            best = (key, bits)
    _, bits = best
    life = frozenset(v for v in range(n) if bits[v][0])
    life_l = frozenset(v for v in range(n) if bits[v][1])
    life_r = frozenset(v for v in range(n) if bits[v][2])
    cost = CostVec(0, 0)
    for e in calc_set(cfg, problem, life):
        cost = cost + cfg.edge_cost[e]
    for v in range(n):
        cost = cost + lifetime_cost(v, *bits[v])
    return LospreSolution(life_set=life, calc_set=calc_set(cfg, problem, life),
                          cost=cost, life_left=life_l, life_right=life_r)


# ---------------------------------------------------------------------------
# Instance generation

STYLES = ("series-parallel", "random-sparse", "chained-diamonds")


@dataclass(frozen=True)
class InstanceGenerator:
    """Reproducible random instances: same seed, same instance.

    All styles produce acyclic graphs with a unique source, and problems
    whose use set avoids the source, the sinks and the extra invalidating
    nodes (use/invalidation overlap is where the enlargement formula and
    the path-closure definition are not interchangeable).
    """

    seed: int
    node_range: tuple = (4, 12)
    edge_density: float = 0.25
    style: str = "random-sparse"
    cost_style: str = "unit"  # or "random"


def _series_parallel_edges(rng, n):
    """Random two-terminal series/parallel DAG on nodes 0..n-1 (0 -> n-1)."""
    edges = set()

    def build(lo, hi, interior):
        if not interior:
            edges.add((lo, hi))
        elif len(interior) >= 2 and rng.random() < 0.5:
            cut = rng.randrange(1, len(interior))
            build(lo, hi, interior[:cut])
            build(lo, hi, interior[cut:])
        else:
            mid = interior[0]
            rest = interior[1:]
            cut = rng.randrange(0, len(rest) + 1)
            build(lo, mid, rest[:cut])
            build(mid, hi, rest[cut:])

    build(0, n - 1, list(range(1, n - 1)) if n > 2 else [])
    return edges


def generate(gen: InstanceGenerator):
    """Build ``(cfg, problem)`` from a generator description."""
    rng = random.Random(gen.seed)
    lo, hi = gen.node_range
    if gen.style == "chained-diamonds":
        n = lo if lo == hi else 4 * rng.randint(max(1, lo // 4), max(1, hi // 4))
        if n <= 0 or n % 4:
            raise ValueError("chained-diamonds sizes must be positive multiples of 4")
        edges = set()
        for d in range(n // 4):
            a = 4 * d
            edges.update({(a, a + 1), (a, a + 2), (a + 1, a + 3), (a + 2, a + 3)})
            if a + 4 < n:
                edges.add((a + 3, a + 4))
    elif gen.style == "series-parallel":
        n = rng.randint(max(3, lo), max(3, hi))
        edges = _series_parallel_edges(rng, n)
    elif gen.style == "random-sparse":
        n = rng.randint(max(2, lo), max(2, hi))
        density = min(gen.edge_density, 1.0)
        edges = set()
        for i in range(n):
            for j in range(i + 1, n):
                if rng.random() < density:
                    edges.add((i, j))
        for j in range(1, n):
            if not any(e[1] == j for e in edges):
                edges.add((rng.randrange(0, j), j))
    else:
        raise ValueError(f"unknown style {gen.style!r}; expected one of {STYLES}")

    if gen.cost_style == "random":
        edge_cost = {e: CostVec(rng.randint(0, 5), rng.randint(0, 3)) for e in edges}
        node_cost = {v: CostVec(rng.randint(0, 2), rng.randint(0, 3)) for v in range(n)}
    else:
        edge_cost = {e: DEFAULT_EDGE_COST for e in edges}
        node_cost = {v: DEFAULT_NODE_COST for v in range(n)}
    cfg = Cfg(n, edges, edge_cost, node_cost)

    interior = [v for v in range(n) if v != cfg.source and v not in cfg.sinks]
    rng.shuffle(interior)
    n_use = rng.randint(0, max(0, len(interior) // 2)) if interior else 0
    use = interior[:n_use]
    rest = interior[n_use:]
    n_inv = rng.randint(0, len(rest) // 3) if rest else 0
    extra_inv = rest[:n_inv]
    problem = make_problem(cfg, use, extra_inv)
    return cfg, problem


# ---------------------------------------------------------------------------
# Random structured programs for end-to-end semantics checks

_OPS = ("+", "-", "*", "/", "<<", ">>", "&", "|", "^")


def generate_program_text(seed: int, *, max_statements: int = 14) -> str:
    """Emit a random structured program: straight-line code, nested
    if/else, bounded counter loops, loads and stores on small literal
    addresses.  Gotos appear only in structured patterns, keeping the
    treewidth of the extracted graph small.  Recently computed expressions
    are re-emitted with some probability so the programs actually contain
    redundancy; loop counters come from a reserved namespace that ordinary
    statements never write, which guarantees termination."""
    rng = random.Random(seed)
    variables = [f"v{k}" for k in range(6)]
    lines = []
    label_counter = [0]
    loop_counter = [0]
    recent = []  # recently seen (op, a, b) computations, for deliberate redundancy

    def fresh_label(tag):
        label_counter[0] += 1
        return f"{tag}{label_counter[0]}"

    def operand():
        return rng.choice(variables) if rng.random() < 0.7 else str(rng.randint(-8, 8))

    def address():
        return str(rng.randint(0, 15)) if rng.random() < 0.8 else rng.choice(variables)

    def computation():
        if recent and rng.random() < 0.55:
            op, a, b = rng.choice(recent)
        else:
            op, a, b = rng.choice(_OPS), operand(), operand()
            recent.append((op, a, b))
            if len(recent) > 4:
                recent.pop(0)
        return f"{rng.choice(variables)} = {a} {op} {b}"

    budget = [3 * max_statements]

    def statement(depth):
        budget[0] -= 1
        kind = rng.random()
        if depth >= 2 or budget[0] <= 0:
            kind = min(kind, 0.7)  # no further nesting
        if kind < 0.45:
            lines.append(computation())
        elif kind < 0.6:
            lines.append(f"{rng.choice(variables)} = *{address()}")
        elif kind < 0.72:
            lines.append(f"*{address()} = {rng.choice(variables)}")
        elif kind < 0.78:
            lines.append(f"{rng.choice(variables)} = {operand()}")
        elif kind < 0.92:
            then_label = fresh_label("then")
            end_label = fresh_label("end")
            lines.append(f"if {rng.choice(variables)} goto {then_label}")
            block(depth + 1)
            lines.append(f"goto {end_label}")
            lines.append(f"{then_label}: " + computation())
            block(depth + 1)
            lines.append(f"{end_label}: " + computation())
        else:
            loop_counter[0] += 1
            counter = f"cnt{loop_counter[0]}"
            head = fresh_label("loop")
            lines.append(f"{counter} = {rng.randint(1, 3)}")
            lines.append(f"{head}: " + computation())
            block(depth + 1)
            lines.append(f"{counter} = {counter} - 1")
            lines.append(f"if {counter} goto {head}")

    def block(depth):
        for _ in range(rng.randint(1, 3 if depth else max_statements // 3)):
            statement(depth)

    for _ in range(rng.randint(2, max(2, max_statements // 3))):
        statement(0)
    lines.append("ret")
    return "\n".join(lines) + "\n"


def generate_inputs(seed: int, variables) -> tuple:
    """Reproducible initial variable values and memory for the interpreter."""
    rng = random.Random(seed)
    values = {v: rng.randint(-64, 64) for v in sorted(variables)}
    memory = {addr: rng.randint(-64, 64) for addr in range(16)}
    return values, memory
