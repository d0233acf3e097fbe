import pytest

from lospre.cfg import Cfg, make_problem
from lospre.errors import SizeGuardError
from lospre.oracle import InstanceGenerator, STYLES, brute_safety, generate
from lospre.safety import apply_safety, solve_safety
from lospre.treedec import decompose, make_nice


def solved(cfg, problem):
    return solve_safety(cfg, problem, make_nice(decompose(cfg)))


def line(n):
    return Cfg(n, [(i, i + 1) for i in range(n - 1)])


def test_straight_line_interior_is_added():
    cfg = line(4)
    sol = solved(cfg, make_problem(cfg, use=[]))
    assert sol.added == {1, 2}
    assert sol.i_prime == {0, 1, 2, 3}


def test_use_blocks_the_corridor():
    cfg = line(4)
    sol = solved(cfg, make_problem(cfg, use=[1]))
    assert sol.added == frozenset()


def test_everything_already_invalidating():
    cfg = line(4)
    sol = solved(cfg, make_problem(cfg, use=[], invalidate=[1, 2]))
    assert sol.added == frozenset()
    assert sol.i_prime == {0, 1, 2, 3}


def test_branch_bypass_nodes_are_added():
    # one arm holds the only use; the bypass arm, the branch and the join
    # form an unguarded corridor between invalidating nodes
    cfg = Cfg(6, [(0, 1), (1, 2), (1, 3), (2, 4), (3, 4), (4, 5)])
    sol = solved(cfg, make_problem(cfg, use=[2]))
    assert sol.added == {1, 3, 4}
    ref = brute_safety(cfg, make_problem(cfg, use=[2]))
    assert sol.i_prime == ref.i_prime


def test_every_path_through_use_adds_nothing():
    cfg = Cfg(5, [(0, 1), (1, 2), (1, 3), (2, 4), (3, 4)])
    sol = solved(cfg, make_problem(cfg, use=[2, 3]))
    # nodes 2 and 3 are uses; 1 and the join 4... 4 is a sink already
    assert sol.added == frozenset()


def test_apply_safety_and_idempotence():
    cfg = line(4)
    problem = make_problem(cfg, use=[])
    sol = solved(cfg, problem)
    enlarged = apply_safety(problem, sol)
    assert enlarged.invalidation_set == sol.i_prime
    assert enlarged.use_set == problem.use_set
    again = solved(cfg, enlarged)
    assert again.added == frozenset()


def test_apply_safety_noop():
    cfg = line(3)
    problem = make_problem(cfg, use=[1])
    sol = solved(cfg, problem)
    assert sol.added == frozenset()
    assert apply_safety(problem, sol) == problem


def test_added_nodes_have_witnesses():
    # restatement of the two finiteness guards on solver output
    for seed in range(60):
        cfg, problem = generate(InstanceGenerator(seed=seed, node_range=(4, 10)))
        sol = solved(cfg, problem)
        use, inv = problem.use_set, problem.invalidation_set
        assert not sol.added & use
        assert inv <= sol.i_prime
        for v in sol.added:
            assert any(w in sol.added or (w in inv and w not in use)
                       for w in cfg.successors(v))
            assert any(u in sol.added or u in inv for u in cfg.predecessors(v))


def test_oracle_equivalence_all_styles():
    for style in STYLES:
        for seed in range(80):
            cfg, problem = generate(InstanceGenerator(seed=seed, node_range=(4, 10), style=style))
            sol = solved(cfg, problem)
            ref = brute_safety(cfg, problem)
            assert sol.i_prime == ref.i_prime, (style, seed)
            assert sol.added == ref.added, (style, seed)


def test_oracle_size_guard():
    cfg = line(17)
    with pytest.raises(SizeGuardError):
        brute_safety(cfg, make_problem(cfg, use=[]))


def test_safety_blocks_speculative_hoist():
    # one arm holds the only use behind two expensive edges; speculation
    # would move the computation above the branch onto the cheap entry
    # edge, executing it on paths that never use it, and the enlarged
    # invalidation set forbids exactly that
    from lospre.cost import CostVec
    from lospre.dp import solve
    from lospre.oracle import brute_lospre

    edges = [(0, 1), (1, 2), (1, 5), (2, 3), (3, 4), (5, 4), (4, 6)]
    cost = {e: CostVec(1, 0) for e in edges}
    cost[(1, 2)] = CostVec(9, 0)
    cost[(2, 3)] = CostVec(9, 0)
    cfg = Cfg(7, edges, edge_cost=cost)
    problem = make_problem(cfg, use=[3])
    nice = make_nice(decompose(cfg))

    unguarded = solve(cfg, problem, nice)
    assert unguarded.life_set == {1, 2}
    assert unguarded.calc_set == {(0, 1)}
    assert unguarded.cost == CostVec(1, 2)

    sol = solve_safety(cfg, problem, nice)
    assert sol.added == {1, 4, 5}
    guarded = solve(cfg, apply_safety(problem, sol), nice)
    assert guarded.life_set == frozenset()
    assert guarded.calc_set == {(2, 3)}
    assert guarded.cost == CostVec(9, 0)
    ref = brute_lospre(cfg, apply_safety(problem, sol))
    assert (ref.cost, ref.life_set) == (guarded.cost, guarded.life_set)
