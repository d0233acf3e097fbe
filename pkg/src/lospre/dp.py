"""Optimal life-set computation by dynamic programming over a nice decomposition.

Bag assignments are bitmasks over the sorted bag (one bit per vertex in the
base variant, a three-bit group per vertex in the extended variant).  Leaf
tables hold the single zero entry; introduce nodes reindex the child table;
join nodes add the two child tables entrywise; forget nodes minimize over
the departing vertex's bit(s), charging that vertex's liveness cost and the
costs of its incident edges whose other endpoint is still in the bag.  Every
graph edge is charged at exactly one forget node: the one where the earlier
forgotten endpoint departs with the other endpoint still present.

Costs travel through the tables in the packed integer form from ``cost``;
tie-breaking prefers a dead vertex.  On graphs small enough to compare
against brute force, an extra low-order key (2**(n-1-v) per live vertex v)
makes the reported solution the unique lexicographic minimum among optimal
assignments, scanning vertex ids upward and preferring absence.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from .cfg import Cfg, ExprProblem, calc_set, total_cost, validate_problem
from .cost import (CostVec, PACKED_INF, PACKED_ZERO, format_cost, pack_cost,
                   packed_add, packed_add_saturating, parse_cost)
from .errors import (DecompositionError, LospreError, NoFeasibleSolutionError,
                     WidthExceededError)
from .treedec import INTRODUCE, JOIN, LEAF, NiceTreeDec

# Beyond this size the canonical tie-break key is disabled by default: the
# key needs one low-order bit per graph node and would dominate the packed
# arithmetic on large graphs.  Results stay optimal and deterministic either
# way; only the choice among equal-cost optima changes.
CANONICAL_TIES_MAX_NODES = 24


@dataclass(frozen=True)
class LospreSolution:
    """A life set with its derived calculation set and recomputed cost.

    ``cost`` always equals ``total_cost(cfg, problem, life_set)`` recomputed
    from the reference definition, never a value trusted from the tables.
    ``transitions`` counts DP table operations for work-bound checks.
    """

    life_set: frozenset
    calc_set: frozenset
    cost: CostVec
    life_left: Optional[frozenset] = None
    life_right: Optional[frozenset] = None
    transitions: int = 0


def assign_edges_to_forgets(cfg: Cfg, nice: NiceTreeDec) -> dict:
    """Partition the graph edges over forget nodes for cost charging.

    Edge (x, y) belongs to the forget node of whichever endpoint departs
    first; the other endpoint is then still in the child bag, so both bits
    are available to the membership test.  Raises if the decomposition does
    not cover the graph.
    """
    fm = nice.forget_map()
    if set(fm) != set(range(cfg.node_count)):
        missing = sorted(set(range(cfg.node_count)) - set(fm))
        raise DecompositionError(f"decomposition does not cover vertices {missing[:8]}")
    child_bag_sets = {}
    for v, i in fm.items():
        child_bag_sets[i] = frozenset(nice.bags[nice.children[i][0]])
    assignment = {i: [] for i in fm.values()}
    for (x, y) in sorted(cfg.edges):
        fx = fm[x]
        if y in child_bag_sets[fx]:
            assignment[fx].append((x, y))
            continue
        fy = fm[y]
        if x in child_bag_sets[fy]:
            assignment[fy].append((x, y))
            continue
        raise DecompositionError(f"edge ({x}, {y}) is covered by no bag of the decomposition")
    return assignment


def _resolve_canonical(canonical_ties, node_count, bits_per_node) -> int:
    """Return the tie-key bit count (0 disables the canonical key)."""
    if canonical_ties is None:
        canonical_ties = node_count <= CANONICAL_TIES_MAX_NODES
    if not canonical_ties:
        return 0
    if node_count > 64:
        raise LospreError(
            "canonical tie-breaking is limited to 64 nodes; pass canonical_ties=False")
    return node_count * bits_per_node


def _pick_padd(cfg: Cfg, extra=()) -> Callable:
    """Use the fast packed add unless worst-case component sums could overflow.

    The saturating fallback clamps per addition, which is not associative,
    so callers must skip exact cross-checks when it is selected.
    """
    bound = 0
    for c in list(cfg.edge_cost.values()) + list(cfg.node_cost.values()) + list(extra):
        if not c.infinite:
            bound += max(abs(c.primary), abs(c.secondary))
    if bound < (1 << 61):
        return packed_add
    return packed_add_saturating


def solve(cfg: Cfg, problem: ExprProblem, nice: NiceTreeDec, *,
          max_width: int = 16, canonical_ties: Optional[bool] = None) -> LospreSolution:
    """Minimize the objective exactly over all life sets.

    Requires a valid nice decomposition of ``cfg``; raises
    WidthExceededError when its width exceeds ``max_width`` (the tables grow
    as 2**width) and NoFeasibleSolutionError when every assignment has
    infinite cost.
    """
    validate_problem(cfg, problem)
    width = nice.width
    if width > max_width:
        raise WidthExceededError(f"decomposition width {width} exceeds the guard {max_width}")
    use = problem.use_set
    inv = problem.invalidation_set
    n = cfg.node_count
    shift = _resolve_canonical(canonical_ties, n, 1)
    padd = _pick_padd(cfg)
    exact = padd is packed_add

    pzero = PACKED_ZERO << shift
    pinf = PACKED_INF << shift
    if shift:
        base_add = padd

        def padd(a, b, _add=base_add, _sh=shift, _mask=(1 << shift) - 1):
            return (_add(a >> _sh, b >> _sh) << _sh) | ((a & _mask) + (b & _mask))

    edge_assignment = assign_edges_to_forgets(cfg, nice)

    kinds = nice.kinds
    vertex = nice.vertex
    bags = nice.bags
    children = nice.children
    tables = [None] * nice.node_count
    choices = {}
    transitions = 0

    for i in nice.order:
        kind = kinds[i]
        if kind == LEAF:
            tables[i] = [pzero]
            transitions += 1
        elif kind == INTRODUCE:
            j = children[i][0]
            child = tables[j]
            p = bags[i].index(vertex[i])
            low = (1 << p) - 1
            size = 1 << len(bags[i])
            tables[i] = [child[((m >> (p + 1)) << p) | (m & low)] for m in range(size)]
            tables[j] = None
            transitions += size
        elif kind == JOIN:
            j1, j2 = children[i]
            a, b = tables[j1], tables[j2]
            tables[i] = [padd(a[m], b[m]) for m in range(len(a))]
            tables[j1] = tables[j2] = None
            transitions += len(a)
        else:  # forget
            j = children[i][0]
            child = tables[j]
            v = vertex[i]
            child_bag = bags[j]
            p = child_bag.index(v)
            pos = {u: q for q, u in enumerate(child_bag)}
            # (x_pos, y_pos, packed cost); -1 marks a statically true side
            edges_local = []
            for (x, y) in edge_assignment.get(i, ()):
                cx = -1 if x in inv else pos[x]
                cy = -1 if y in use else pos[y]
                edges_local.append((cx, cy, pack_cost(cfg.edge_cost[(x, y)]) << shift))
            lv = pack_cost(cfg.node_cost[v]) << shift
            if shift:
                lv += 1 << (n - 1 - v)
            low = (1 << p) - 1
            bit = 1 << p
            size = 1 << len(bags[i])
            table = [0] * size
            choice = bytearray(size)
            for m in range(size):
                g0 = ((m >> p) << (p + 1)) | (m & low)
                g1 = g0 | bit
                best = None
                for b, g, extra in ((0, g0, pzero), (1, g1, lv)):
                    c = child[g]
                    if c >= pinf:
                        continue
                    c = padd(c, extra)
                    for (cx, cy, pc) in edges_local:
                        if (cx < 0 or not (g >> cx) & 1) and (cy < 0 or (g >> cy) & 1):
                            c = padd(c, pc)
                    if best is None or c < best:
                        best = c
                        chosen = b
                if best is None:
                    table[m] = pinf
                else:
                    # strict < above keeps the dead bit on ties
                    table[m] = best
                    choice[m] = chosen
            tables[i] = table
            tables[j] = None
            choices[i] = choice
            transitions += 2 * size * (1 + len(edges_local))

    root_table = tables[nice.root]
    if len(root_table) != 1:
        raise DecompositionError("root bag of the nice decomposition must be empty")
    root_cost = root_table[0]
    if root_cost >= pinf:
        raise NoFeasibleSolutionError("no feasible solution: all assignments have infinite cost")

    life = set()
    stack = [(nice.root, 0)]
    while stack:
        i, m = stack.pop()
        kind = kinds[i]
        if kind == LEAF:
            continue
        if kind == JOIN:
            stack.append((children[i][0], m))
            stack.append((children[i][1], m))
        elif kind == INTRODUCE:
            p = bags[i].index(vertex[i])
            stack.append((children[i][0], ((m >> (p + 1)) << p) | (m & ((1 << p) - 1))))
        else:  # forget
            p = bags[children[i][0]].index(vertex[i])
            b = choices[i][m]
            if b:
                life.add(vertex[i])
            stack.append((children[i][0], ((m >> p) << (p + 1)) | (m & ((1 << p) - 1)) | (b << p)))

    life = frozenset(life)
    cost = total_cost(cfg, problem, life)
    # saturating adds are not associative, so the cross-check only holds on
    # the exact path (always taken for realistic cost magnitudes)
    if exact and pack_cost(cost) != (root_cost >> shift if shift else root_cost):
        raise LospreError("internal error: table cost disagrees with recomputed objective")
    return LospreSolution(life_set=life, calc_set=calc_set(cfg, problem, life),
                          cost=cost, transitions=transitions)


# Extended variant: each vertex carries three bits (value life, left operand
# life, right operand life).  Only the value bit feeds the calculation-set
# predicate; the per-node cost table is consulted for all eight combinations,
# including all-dead, at the vertex's forget node.

_GROUP = 3


def _combo_of_digit(d: int) -> tuple:
    # storage order: bit0 = value life, bit1 = left, bit2 = right
    return (d & 1, (d >> 1) & 1, (d >> 2) & 1)


def _canonical_rank(d: int) -> int:
    b, bl, br = _combo_of_digit(d)
    return (b << 2) | (bl << 1) | br


def solve_extended(cfg: Cfg, problem: ExprProblem, nice: NiceTreeDec,
                   lifetime_cost: Callable[[int, int, int, int], CostVec], *,
                   max_width: int = 8, canonical_ties: Optional[bool] = None,
                   allowed_combos: Optional[dict] = None) -> LospreSolution:
    """Minimize edge costs plus ``lifetime_cost(v, b, bl, br)`` summed over all nodes.

    ``lifetime_cost`` must be total over the eight bit combinations per
    node.  ``allowed_combos`` optionally maps a node to an iterable of
    permitted (b, bl, br) triples, as a feasibility-coupling hook; by
    default all eight are permitted.
    """
    validate_problem(cfg, problem)
    width = nice.width
    if width > max_width:
        raise WidthExceededError(f"decomposition width {width} exceeds the guard {max_width}")
    use = problem.use_set
    inv = problem.invalidation_set
    n = cfg.node_count

    node_tables = []
    for v in range(n):
        row = []
        for d in range(8):
            c = lifetime_cost(v, *_combo_of_digit(d))
            if not isinstance(c, CostVec):
                raise LospreError("lifetime_cost must return CostVec values")
            row.append(c)
        node_tables.append(row)
    allowed = [255] * n
    if allowed_combos:
        for v, combos in allowed_combos.items():
            mask = 0
            for (b, bl, br) in combos:
                mask |= 1 << (b | (bl << 1) | (br << 2))
            allowed[v] = mask

    shift = _resolve_canonical(canonical_ties, n, _GROUP)
    padd = _pick_padd(cfg, extra=[c for row in node_tables for c in row])
    exact = padd is packed_add
    pzero = PACKED_ZERO << shift
    pinf = PACKED_INF << shift
    if shift:
        base_add = padd

        def padd(a, b, _add=base_add, _sh=shift, _mask=(1 << shift) - 1):
            return (_add(a >> _sh, b >> _sh) << _sh) | ((a & _mask) + (b & _mask))

    edge_assignment = assign_edges_to_forgets(cfg, nice)

    kinds = nice.kinds
    vertex = nice.vertex
    bags = nice.bags
    children = nice.children
    tables = [None] * nice.node_count
    choices = {}
    transitions = 0
    G = _GROUP

    for i in nice.order:
        kind = kinds[i]
        if kind == LEAF:
            tables[i] = [pzero]
            transitions += 1
        elif kind == INTRODUCE:
            j = children[i][0]
            child = tables[j]
            p = G * bags[i].index(vertex[i])
            low = (1 << p) - 1
            size = 1 << (G * len(bags[i]))
            tables[i] = [child[((m >> (p + G)) << p) | (m & low)] for m in range(size)]
            tables[j] = None
            transitions += size
        elif kind == JOIN:
            j1, j2 = children[i]
            a, b = tables[j1], tables[j2]
            tables[i] = [padd(a[m], b[m]) for m in range(len(a))]
            tables[j1] = tables[j2] = None
            transitions += len(a)
        else:  # forget
            j = children[i][0]
            child = tables[j]
            v = vertex[i]
            child_bag = bags[j]
            p = G * child_bag.index(v)
            pos = {u: G * q for q, u in enumerate(child_bag)}
            edges_local = []
            for (x, y) in edge_assignment.get(i, ()):
                cx = -1 if x in inv else pos[x]
                cy = -1 if y in use else pos[y]
                edges_local.append((cx, cy, pack_cost(cfg.edge_cost[(x, y)]) << shift))
            digit_cost = []
            for d in range(8):
                if not (allowed[v] >> d) & 1:
                    digit_cost.append(None)
                    continue
                c = pack_cost(node_tables[v][d]) << shift
                if shift:
                    c += _canonical_rank(d) << (G * (n - 1 - v))
                digit_cost.append(c)
            low = (1 << p) - 1
            size = 1 << (G * len(bags[i]))
            table = [0] * size
            choice = bytearray(size)
            for m in range(size):
                gbase = ((m >> p) << (p + G)) | (m & low)
                best = None
                for d in range(8):
                    dc = digit_cost[d]
                    if dc is None:
                        continue
                    g = gbase | (d << p)
                    c = child[g]
                    if c >= pinf:
                        continue
                    c = padd(c, dc)
                    for (cx, cy, pc) in edges_local:
                        if (cx < 0 or not (g >> cx) & 1) and (cy < 0 or (g >> cy) & 1):
                            c = padd(c, pc)
                    if best is None or c < best:
                        best = c
                        bd = d
                if best is None:
                    table[m] = pinf
                else:
                    table[m] = best
                    choice[m] = bd
            tables[i] = table
            tables[j] = None
            choices[i] = choice
            transitions += 8 * size * (1 + len(edges_local))

    root_table = tables[nice.root]
    if len(root_table) != 1:
        raise DecompositionError("root bag of the nice decomposition must be empty")
    if root_table[0] >= pinf:
        raise NoFeasibleSolutionError("no feasible solution: all assignments have infinite cost")
    root_cost = root_table[0]

    life, life_l, life_r = set(), set(), set()
    stack = [(nice.root, 0)]
    while stack:
        i, m = stack.pop()
        kind = kinds[i]
        if kind == LEAF:
            continue
        if kind == JOIN:
            stack.append((children[i][0], m))
            stack.append((children[i][1], m))
        elif kind == INTRODUCE:
            p = G * bags[i].index(vertex[i])
            stack.append((children[i][0], ((m >> (p + G)) << p) | (m & ((1 << p) - 1))))
        else:
            p = G * bags[children[i][0]].index(vertex[i])
            d = choices[i][m]
            b, bl, br = _combo_of_digit(d)
            v = vertex[i]
            if b:
                life.add(v)
            if bl:
                life_l.add(v)
            if br:
                life_r.add(v)
            stack.append((children[i][0], ((m >> p) << (p + G)) | (m & ((1 << p) - 1)) | (d << p)))

    life = frozenset(life)
    cset = calc_set(cfg, problem, life)
    cost = CostVec(0, 0)
    for e in cset:
        cost = cost + cfg.edge_cost[e]
    for v in range(n):
        cost = cost + node_tables[v][(v in life) | ((v in life_l) << 1) | ((v in life_r) << 2)]
    if exact and pack_cost(cost) != (root_cost >> shift if shift else root_cost):
        raise LospreError("internal error: table cost disagrees with recomputed objective")
    return LospreSolution(life_set=life, calc_set=cset, cost=cost,
                          life_left=frozenset(life_l), life_right=frozenset(life_r),
                          transitions=transitions)


@dataclass
class EliminationStats:
    """Static computation-count deltas, per candidate and in total."""

    per_candidate: list = field(default_factory=list)  # (display, uses, calcs, delta)
    total: int = 0


def eliminated_count(before) -> EliminationStats:
    """Sum |use set| - |calculation set| over solved (candidate, solution) pairs."""
    stats = EliminationStats()
    for candidate, solution in before:
        uses = len(candidate.occurrence_nodes)
        calcs = len(solution.calc_set)
        stats.per_candidate.append((candidate.display(), uses, calcs, uses - calcs))
        stats.total += uses - calcs
    return stats


def format_solution(solution: LospreSolution, *, index: Optional[int] = None) -> str:
    """Serialize a solution: cost pair, life node ids, calculation edges."""
    lines = []
    if index is not None:
        lines.append(f"problem {index}")
    lines.append(f"cost {format_cost(solution.cost)}")
    lines.append("life " + " ".join(str(v) for v in sorted(solution.life_set)))
    lines.append("calc " + " ".join(f"{u}->{v}" for (u, v) in sorted(solution.calc_set)))
    if solution.life_left is not None:
        lines.append("life_left " + " ".join(str(v) for v in sorted(solution.life_left)))
    if solution.life_right is not None:
        lines.append("life_right " + " ".join(str(v) for v in sorted(solution.life_right)))
    return "\n".join(lines) + "\n"


def parse_solution(text: str) -> LospreSolution:
    cost = None
    life = frozenset()
    calc = frozenset()
    life_l = life_r = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("problem"):
            continue
        head, _, rest = line.partition(" ")
        if head == "cost":
            cost = parse_cost(rest)
        elif head == "life":
            life = frozenset(int(t) for t in rest.split())
        elif head == "calc":
            calc = frozenset(tuple(int(x) for x in t.split("->")) for t in rest.split())
        elif head == "life_left":
            life_l = frozenset(int(t) for t in rest.split())
        elif head == "life_right":
            life_r = frozenset(int(t) for t in rest.split())
        else:
            raise LospreError(f"unknown solution line {line!r}")
    if cost is None:
        raise LospreError("solution text has no cost line")
    return LospreSolution(life_set=life, calc_set=calc, cost=cost,
                          life_left=life_l, life_right=life_r)
