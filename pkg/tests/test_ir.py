import pytest

from lospre.cfg import calc_set
from lospre.cost import CostVec
from lospre.dp import solve
from lospre.errors import IrParseError
from lospre.interp import equivalent_states, interpret
from lospre.ir import (ASSIGN, BINOP, BRANCH, LOAD, RET, STORE, UNOP,
                       UnreachableCodeWarning, build_cfg, candidate_key,
                       copy_propagate, derive_problems, format_ir, instr_node,
                       parse_ir, rewrite)
from lospre.oracle import generate_inputs, generate_program_text
from lospre.treedec import decompose, make_nice

TWO_ARM = """\
        if b goto else_arm
        t1 = i << 2
        t2 = a + t1
        t3 = *t2
        c = t3 + 8
        goto end
else_arm: t1 = i << 2
        t2 = a + t1
        t3 = *t2
        c = t3 - 13
end:    ret
"""


# -- parsing ------------------------------------------------------------------

def test_parse_forms():
    prog = parse_ir("x = i << 2\ny = x\nz = - y\nw = *p\n*p = w\nif x goto L\nL: ret\n")
    kinds = [ins.kind for ins in prog]
    assert kinds == [BINOP, ASSIGN, UNOP, LOAD, STORE, BRANCH, RET]
    assert prog[0].op == "<<" and prog[0].left == "i" and prog[0].right == 2
    assert prog[6].label == "L"


def test_parse_negative_literal_vs_unop():
    prog = parse_ir("x = -5\ny = - x\nret\n")
    assert prog[0].kind == ASSIGN and prog[0].left == -5
    assert prog[1].kind == UNOP and prog[1].op == "-"


def test_parse_two_arm_program():
    prog = parse_ir(TWO_ARM)
    assert len(prog) == 11  # transcription choice; the shape is what matters
    assert sum(ins.kind == BINOP for ins in prog) == 6
    assert sum(ins.kind == LOAD for ins in prog) == 2


def test_parse_errors():
    with pytest.raises(IrParseError) as err:
        parse_ir("x = y +\n")
    assert err.value.line == 1
    with pytest.raises(IrParseError):
        parse_ir("goto missing\nret\n")
    with pytest.raises(IrParseError):
        parse_ir("L: x = 1\nL: y = 2\nret\n")
    with pytest.raises(IrParseError):
        parse_ir("x = y ** z\n")


def test_format_roundtrip():
    prog = parse_ir(TWO_ARM)
    again = parse_ir(format_ir(prog))
    assert [ins for ins in again] == [ins for ins in prog]


def test_cost_directives():
    prog = parse_ir("!edgecost [2,0]\n!nodecost [0,3]\n!nodecost L [0,7]\nL: x = y + z\nret\n")
    cfg = build_cfg(prog)
    assert cfg.edge_cost[(0, 1)] == CostVec(2, 0)
    assert cfg.node_cost[instr_node(0)] == CostVec(0, 7)
    assert cfg.node_cost[instr_node(1)] == CostVec(0, 3)
    with pytest.raises(IrParseError):
        parse_ir("!nodecost missing [0,1]\nret\n")


# -- graph extraction ---------------------------------------------------------

def test_straight_line_is_a_path():
    prog = parse_ir("a = 1\nb = 2\nc = 3\n")
    cfg = build_cfg(prog)
    assert cfg.node_count == 5  # source + 3 + sink
    assert cfg.edges == {(0, 1), (1, 2), (2, 3), (3, 4)}


def test_two_arm_shape():
    cfg = build_cfg(parse_ir(TWO_ARM))
    branch_node = instr_node(0)
    assert len(cfg.successors(branch_node)) == 2
    assert len(cfg.sinks) == 1


def test_branch_to_next_collapses_parallel_edges():
    prog = parse_ir("if x goto L\nL: y = 1\nret\n")
    cfg = build_cfg(prog)
    assert len(cfg.successors(instr_node(0))) == 1


def test_unreachable_code_warns_but_keeps_nodes():
    text = "goto L\nx = 1\nL: ret\n"
    with pytest.warns(UnreachableCodeWarning):
        cfg = build_cfg(parse_ir(text))
    assert cfg.node_count == 5
    assert cfg.source == 0


def test_empty_function():
    cfg = build_cfg(parse_ir("ret\n"))
    assert cfg.node_count == 3


# -- candidate derivation -----------------------------------------------------

def test_two_arm_candidates():
    prog = parse_ir(TWO_ARM)
    cfg = build_cfg(prog)
    pairs = derive_problems(prog, cfg)
    by_display = {c.display(): (c, p) for c, p in pairs}
    shift, _ = by_display["i << 2"]
    assert len(shift.occurrence_nodes) == 2
    assert not shift.safety_required
    _, shift_problem = by_display["i << 2"]
    assert shift_problem.invalidation_set == {cfg.source} | cfg.sinks
    load, load_problem = by_display["*t2"]
    assert load.safety_required
    # assignments to t2 invalidate the load
    assert instr_node(2) in load_problem.invalidation_set
    assert instr_node(7) in load_problem.invalidation_set


def test_operand_assignment_invalidates():
    prog = parse_ir("x = a + b\na = 7\ny = a + b\nret\n")
    cfg = build_cfg(prog)
    ((cand, problem),) = derive_problems(prog, cfg)
    assert cand.display() == "a + b"
    assert len(cand.occurrence_nodes) == 2
    assert instr_node(1) in problem.invalidation_set


def test_single_use_is_still_a_problem():
    prog = parse_ir("x = a + b\nret\n")
    pairs = derive_problems(prog, build_cfg(prog))
    assert len(pairs) == 1
    assert len(pairs[0][0].occurrence_nodes) == 1


def test_commutative_canonicalization():
    prog = parse_ir("x = b + a\ny = a + b\nz = b - a\nw = a - b\nret\n")
    pairs = derive_problems(prog, build_cfg(prog))
    displays = [c.display() for c, _ in pairs]
    assert displays.count("a + b") == 1
    assert "b - a" in displays and "a - b" in displays


def test_stores_invalidate_loads():
    prog = parse_ir("x = *p\n*q = y\nz = *p\nret\n")
    cfg = build_cfg(prog)
    pairs = dict((c.display(), p) for c, p in derive_problems(prog, cfg))
    assert instr_node(1) in pairs["*p"].invalidation_set


def test_load_result_operand_is_pessimized():
    # an expression over a loaded value is invalidated by any memory access
    prog = parse_ir("a = *p\nx = a + 1\ny = *q\nz = a + 1\nret\n")
    cfg = build_cfg(prog)
    pairs = dict((c.display(), p) for c, p in derive_problems(prog, cfg))
    inv = pairs["1 + a"].invalidation_set
    assert instr_node(0) in inv  # assigns a, and is a load
    assert instr_node(2) in inv  # unrelated load still conservatively invalidates


def test_division_requires_safety():
    prog = parse_ir("x = a / b\nret\n")
    ((cand, _),) = derive_problems(prog, build_cfg(prog))
    assert cand.safety_required


def test_every_problem_invalidates_source_and_sinks():
    import warnings
    warnings.simplefilter("ignore")
    for seed in range(25):
        prog = parse_ir(generate_program_text(seed))
        cfg = build_cfg(prog)
        for _, problem in derive_problems(prog, cfg):
            assert ({cfg.source} | cfg.sinks) <= problem.invalidation_set


# -- rewriting ----------------------------------------------------------------

def _solve_for(prog, cfg, candidate, problem):
    return solve(cfg, problem, make_nice(decompose(cfg)))


def test_rewrite_empty_use_returns_program_unchanged():
    prog = parse_ir("x = a + b\nret\n")
    cfg = build_cfg(prog)
    from lospre.dp import LospreSolution
    from lospre.ir import ExprCandidate
    cand = ExprCandidate("+", "a", "b", frozenset(), False)
    sol = LospreSolution(frozenset(), frozenset(), CostVec(0, 0))
    assert rewrite(prog, cfg, cand, sol) is prog


def test_rewrite_two_arm_once():
    prog = parse_ir(TWO_ARM)
    cfg = build_cfg(prog)
    pairs = derive_problems(prog, cfg)
    cand, problem = pairs[0]
    sol = _solve_for(prog, cfg, cand, problem)
    assert len(sol.calc_set) == 1
    out = rewrite(prog, cfg, cand, sol)
    shifts = [ins for ins in out if ins.kind == BINOP and ins.op == "<<"]
    assert len(shifts) == 1
    assert shifts[0].dest == "__lospre0"
    # static computation count equals the calculation set size
    assert len([ins for ins in out if candidate_key(ins) == ("<<", "i", 2)]) == len(sol.calc_set)
    # occurrences became copies
    assert sum(1 for ins in out if ins.kind == ASSIGN and ins.left == "__lospre0") == 2


def test_rewrite_degenerate_no_motion():
    # a solution with an empty life set puts one computation on each edge
    # entering a use; instruction count grows only by those computations
    prog = parse_ir("x = a + b\ny = a + b\nret\n")
    cfg = build_cfg(prog)
    ((cand, problem),) = derive_problems(prog, cfg)
    from lospre.dp import LospreSolution
    life = frozenset()
    cs = calc_set(cfg, problem, life)
    sol = LospreSolution(life, cs, CostVec(len(cs), 0))
    out = rewrite(prog, cfg, cand, sol)
    assert len(out) == len(prog) + len(cs)
    r0 = interpret(prog, {"a": 3, "b": 4})
    r1 = interpret(out, {"a": 3, "b": 4})
    assert equivalent_states(r0, r1, ["a", "b", "x", "y"])


def test_rewrite_subdivides_branch_edge():
    # the use sits at a label reached both by fallthrough and by jump; the
    # branch edge gets its own block so the other path is untouched
    text = "if c goto L\nx = a + b\nL: y = a + b\nret\n"
    prog = parse_ir(text)
    cfg = build_cfg(prog)
    pairs = dict((c.display(), (c, p)) for c, p in derive_problems(prog, cfg))
    cand, problem = pairs["a + b"]
    sol = _solve_for(prog, cfg, cand, problem)
    out = rewrite(prog, cfg, cand, sol)
    for init in ({"c": 0, "a": 1, "b": 2}, {"c": 1, "a": 1, "b": 2}):
        r0 = interpret(prog, init)
        r1 = interpret(out, init)
        assert equivalent_states(r0, r1, ["x", "y", "a", "b", "c"])


def test_rewrite_loop_edge():
    text = "n = 3\nL: x = a + b\nn = n - 1\nif n goto L\ny = a + b\nret\n"
    prog = parse_ir(text)
    cfg = build_cfg(prog)
    pairs = dict((c.display(), (c, p)) for c, p in derive_problems(prog, cfg))
    cand, problem = pairs["a + b"]
    sol = _solve_for(prog, cfg, cand, problem)
    out = rewrite(prog, cfg, cand, sol)
    r0 = interpret(prog, {"a": 2, "b": 5})
    r1 = interpret(out, {"a": 2, "b": 5})
    assert equivalent_states(r0, r1, ["x", "y", "n", "a", "b"])


# -- copy propagation ---------------------------------------------------------

def test_copy_propagation_through_both_arms():
    # t is an input variable; the same copy exists on both paths into M
    text = "if c goto L\nx = t\ngoto M\nL: x = t\nM: y = x + 1\nret\n"
    out = copy_propagate(parse_ir(text))
    final = [ins for ins in out if ins.kind == BINOP][0]
    assert final.left == "t"


def test_copy_propagation_folds_literals():
    out = copy_propagate(parse_ir("t = 5\nx = t\ny = x + 1\nret\n"))
    add = [ins for ins in out if ins.kind == BINOP][0]
    assert add.left == 5


def test_copy_propagation_blocked_by_redefinition():
    text = "x = t\nt = 9\ny = x + 1\nret\n"
    out = copy_propagate(parse_ir(text))
    add = [ins for ins in out if ins.kind == BINOP][0]
    assert "x" in (add.left, add.right)  # t was clobbered, x must stay


def test_copy_propagation_preserves_semantics():
    for seed in range(40):
        prog = parse_ir(generate_program_text(seed))
        out = copy_propagate(prog)
        pvars = sorted(prog.variables())
        for trial in range(3):
            init, mem = generate_inputs(seed * 10 + trial, pvars)
            r0 = interpret(prog, init, mem)
            r1 = interpret(out, init, mem)
            assert equivalent_states(r0, r1, pvars), (seed, trial)


# -- interpreter --------------------------------------------------------------

def test_interpreter_basics():
    prog = parse_ir("x = 6\ny = x * 7\n*3 = y\nz = *3\nret\n")
    r = interpret(prog)
    assert r.variables["y"] == 42
    assert r.memory == {3: 42}
    assert r.variables["z"] == 42


def test_interpreter_total_semantics():
    prog = parse_ir("a = 5 / 0\nb = 1 << 200\nc = - 3\nd = ~ 0\nret\n")
    r = interpret(prog)
    assert r.variables["a"] == 0
    assert r.variables["b"] == 1 << (200 & 63)
    assert r.variables["c"] == -3 and r.variables["d"] == -1
