"""Mini three-address IR: parsing, CFG extraction, candidate derivation, rewriting.

Grammar, one instruction per line, tokens whitespace-separated except that
``*`` attaches to its operand::

    [label:] x = y             assignment (y a variable or integer)
    [label:] x = y OP z        OP in + - * / << >> & | ^
    [label:] x = OP y          OP in - ~
    [label:] x = *p            load
    [label:] *p = y            store
    [label:] if x goto L       branch on x != 0
    [label:] goto L
    [label:] ret

``#`` starts a comment.  Cost directives override the defaults used when
extracting a graph (``[p,s]`` or ``inf`` syntax)::

    !edgecost [p,s]            default cost of every edge
    !edgecost L1 L2 [p,s]      cost of the edge between two labeled instructions
    !nodecost [p,s]            default cost of every node
    !nodecost L [p,s]          cost of one labeled instruction's node

The extracted graph has one node per instruction plus a synthetic source
before the first instruction and a synthetic sink after every ret.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Union

from .cfg import Cfg, DEFAULT_EDGE_COST, DEFAULT_NODE_COST, make_problem
from .cost import CostVec, parse_cost, format_cost
from .errors import IrParseError, LospreError

Operand = Union[str, int]

BINARY_OPS = ("+", "-", "*", "/", "<<", ">>", "&", "|", "^")
UNARY_OPS = ("-", "~")
COMMUTATIVE = frozenset({"+", "*", "&", "|", "^"})

ASSIGN, BINOP, UNOP, LOAD, STORE, BRANCH, JUMP, RET = (
    "assign", "binop", "unop", "load", "store", "branch", "jump", "ret")


class UnreachableCodeWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Instruction:
    kind: str
    label: Optional[str] = None
    dest: Optional[str] = None
    op: Optional[str] = None
    left: Optional[Operand] = None
    right: Optional[Operand] = None
    target: Optional[str] = None

    def defines(self) -> Optional[str]:
        """Variable written by this instruction, if any."""
        return self.dest if self.kind in (ASSIGN, BINOP, UNOP, LOAD) else None

    def uses(self) -> tuple:
        """Variable operands read by this instruction."""
        ops = ()
        if self.kind == ASSIGN:
            ops = (self.left,)
        elif self.kind == BINOP:
            ops = (self.left, self.right)
        elif self.kind in (UNOP, LOAD, BRANCH):
            ops = (self.left,)
        elif self.kind == STORE:
            ops = (self.left, self.right)
        return tuple(o for o in ops if isinstance(o, str))


@dataclass
class Program:
    """Parsed instruction list plus cost directives.

    Behaves as a sequence of instructions; the directives only matter when
    a graph is extracted.
    """

    instructions: list
    default_edge_cost: CostVec = DEFAULT_EDGE_COST
    default_node_cost: CostVec = DEFAULT_NODE_COST
    edge_cost_overrides: dict = field(default_factory=dict)  # (label, label) -> CostVec
    node_cost_overrides: dict = field(default_factory=dict)  # label -> CostVec

    def __len__(self):
        return len(self.instructions)

    def __iter__(self):
        return iter(self.instructions)

    def __getitem__(self, i):
        return self.instructions[i]

    def labels(self) -> dict:
        return {ins.label: i for i, ins in enumerate(self.instructions) if ins.label}

    def variables(self) -> set:
        out = set()
        for ins in self.instructions:
            out.update(ins.uses())
            d = ins.defines()
            if d:
                out.add(d)
        return out


def _operand(tok: str) -> Operand:
    try:
        return int(tok)
    except ValueError:
        pass
    if tok.isidentifier():
        return tok
    raise ValueError(f"malformed operand {tok!r}")


def _var(tok: str, lineno: int) -> str:
    if not tok.isidentifier():
        raise IrParseError(f"expected a variable name, got {tok!r}", lineno)
    return tok


def parse_ir(text: str) -> Program:
    """Parse IR text; labels are resolved and duplicates rejected."""
    instructions = []
    program = Program(instructions)
    labels = set()
    linenos = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("!"):
            _parse_directive(line, lineno, program)
            continue
        label = None
        if ":" in line.split()[0]:
            head, _, rest = line.partition(":")
            label = head.strip()
            if not label.isidentifier():
                raise IrParseError(f"malformed label {head!r}", lineno)
            if label in labels:
                raise IrParseError(f"duplicate label {label!r}", lineno)
            labels.add(label)
            line = rest.strip()
            if not line:
                raise IrParseError("a label must be followed by an instruction on the same line", lineno)
        try:
            ins = _parse_instruction(line, lineno)
        except ValueError as exc:
            raise IrParseError(str(exc), lineno)
        instructions.append(replace(ins, label=label))
        linenos.append(lineno)
    for ins, lineno in zip(instructions, linenos):
        if ins.target is not None and ins.target not in labels:
            raise IrParseError(f"undefined label {ins.target!r}", lineno)
    for key in program.node_cost_overrides:
        if key not in labels:
            raise IrParseError(f"!nodecost references undefined label {key!r}")
    for (a, b) in program.edge_cost_overrides:
        if a not in labels or b not in labels:
            raise IrParseError(f"!edgecost references undefined label {a!r} or {b!r}")
    return program


def _parse_directive(line: str, lineno: int, program: Program) -> None:
    parts = line.split()
    try:
        if parts[0] == "!edgecost" and len(parts) == 2:
            program.default_edge_cost = parse_cost(parts[1])
        elif parts[0] == "!edgecost" and len(parts) == 4:
            program.edge_cost_overrides[(parts[1], parts[2])] = parse_cost(parts[3])
        elif parts[0] == "!nodecost" and len(parts) == 2:
            program.default_node_cost = parse_cost(parts[1])
        elif parts[0] == "!nodecost" and len(parts) == 3:
            program.node_cost_overrides[parts[1]] = parse_cost(parts[2])
        else:
            raise IrParseError(f"malformed directive {line!r}", lineno)
    except ValueError as exc:
        raise IrParseError(str(exc), lineno)


def _parse_instruction(line: str, lineno: int) -> Instruction:
    toks = line.split()
    if toks == ["ret"]:
        return Instruction(RET)
    if toks[0] == "goto":
        if len(toks) != 2:
            raise IrParseError("expected 'goto L'", lineno)
        return Instruction(JUMP, target=_var(toks[1], lineno))
    if toks[0] == "if":
        if len(toks) != 4 or toks[2] != "goto":
            raise IrParseError("expected 'if x goto L'", lineno)
        return Instruction(BRANCH, left=_operand(toks[1]), target=_var(toks[3], lineno))
    if toks[0].startswith("*"):
        if len(toks) != 3 or toks[1] != "=":
            raise IrParseError("expected '*p = y'", lineno)
        return Instruction(STORE, left=_operand(toks[0][1:]), right=_operand(toks[2]))
    if len(toks) >= 3 and toks[1] == "=":
        dest = _var(toks[0], lineno)
        rhs = toks[2:]
        if len(rhs) == 1:
            if rhs[0].startswith("*"):
                return Instruction(LOAD, dest=dest, left=_operand(rhs[0][1:]))
            return Instruction(ASSIGN, dest=dest, left=_operand(rhs[0]))
        if len(rhs) == 2 and rhs[0] in UNARY_OPS:
            return Instruction(UNOP, dest=dest, op=rhs[0], left=_operand(rhs[1]))
        if len(rhs) == 3 and rhs[1] in BINARY_OPS:
            return Instruction(BINOP, dest=dest, op=rhs[1],
                               left=_operand(rhs[0]), right=_operand(rhs[2]))
        raise IrParseError(f"malformed right-hand side {' '.join(rhs)!r}", lineno)
    raise IrParseError(f"unrecognized instruction {line!r}", lineno)


def format_instruction(ins: Instruction) -> str:
    body = {
        RET: lambda: "ret",
        JUMP: lambda: f"goto {ins.target}",
        BRANCH: lambda: f"if {ins.left} goto {ins.target}",
        STORE: lambda: f"*{ins.left} = {ins.right}",
        LOAD: lambda: f"{ins.dest} = *{ins.left}",
        ASSIGN: lambda: f"{ins.dest} = {ins.left}",
        UNOP: lambda: f"{ins.dest} = {ins.op} {ins.left}",
        BINOP: lambda: f"{ins.dest} = {ins.left} {ins.op} {ins.right}",
    }[ins.kind]()
    return f"{ins.label}: {body}" if ins.label else body


def format_ir(program: Program) -> str:
    lines = []
    if program.default_edge_cost != DEFAULT_EDGE_COST:
        lines.append(f"!edgecost {format_cost(program.default_edge_cost)}")
    if program.default_node_cost != DEFAULT_NODE_COST:
        lines.append(f"!nodecost {format_cost(program.default_node_cost)}")
    for (a, b), c in sorted(program.edge_cost_overrides.items()):
        lines.append(f"!edgecost {a} {b} {format_cost(c)}")
    for a, c in sorted(program.node_cost_overrides.items()):
        lines.append(f"!nodecost {a} {format_cost(c)}")
    for ins in program.instructions:
        body = format_instruction(ins)
        lines.append(body if ins.label else "    " + body)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Graph extraction.  Node ids: 0 is the synthetic source, instruction i maps
# to node i+1, and the synthetic sink is the last id.

SOURCE_NODE = 0


def instr_node(index: int) -> int:
    return index + 1


def node_instr(node: int) -> int:
    return node - 1


def _successor_indices(program) -> list:
    labels = program.labels() if isinstance(program, Program) else \
        {ins.label: i for i, ins in enumerate(program) if ins.label}
    n = len(program)
    succ = []
    for i, ins in enumerate(program):
        out = []
        if ins.kind == RET:
            out.append(n)  # sink marker
        elif ins.kind == JUMP:
            out.append(labels[ins.target])
        elif ins.kind == BRANCH:
            out.append(i + 1 if i + 1 < n else n)
            out.append(labels[ins.target])
        else:
            out.append(i + 1 if i + 1 < n else n)
        succ.append(sorted(set(out)))
    return succ


def build_cfg(program) -> Cfg:
    """Extract the weighted graph.

    Instructions that are unreachable from the entry are kept as nodes and
    reported with an UnreachableCodeWarning; heads of unreachable regions
    get an edge from the source so the unique-source invariant holds.
    """
    instructions = list(program)
    n = len(instructions)
    sink = instr_node(n)
    edges = set()
    succ = _successor_indices(program)
    if n == 0:
        edges.add((SOURCE_NODE, sink))
    else:
        edges.add((SOURCE_NODE, instr_node(0)))
        for i, outs in enumerate(succ):
            for o in outs:
                edges.add((instr_node(i), sink if o == n else instr_node(o)))

    reachable = {SOURCE_NODE}
    stack = [SOURCE_NODE]
    adj = {}
    for (u, v) in edges:
        adj.setdefault(u, []).append(v)
    while stack:
        u = stack.pop()
        for v in adj.get(u, ()):
            if v not in reachable:
                reachable.add(v)
                stack.append(v)
    unreachable = [i for i in range(n) if instr_node(i) not in reachable]
    if unreachable:
        warnings.warn(f"unreachable instructions at indices {unreachable}",
                      UnreachableCodeWarning, stacklevel=2)
        has_pred = {v for (_, v) in edges}
        for i in unreachable:
            if instr_node(i) not in has_pred:
                edges.add((SOURCE_NODE, instr_node(i)))

    if isinstance(program, Program):
        def_edge, def_node = program.default_edge_cost, program.default_node_cost
        edge_over, node_over = program.edge_cost_overrides, program.node_cost_overrides
    else:
        def_edge, def_node = DEFAULT_EDGE_COST, DEFAULT_NODE_COST
        edge_over, node_over = {}, {}

    edge_cost = {e: def_edge for e in edges}
    node_cost = {v: def_node for v in range(sink + 1)}
    labels = {ins.label: i for i, ins in enumerate(instructions) if ins.label}
    for (a, b), c in edge_over.items():
        e = (instr_node(labels[a]), instr_node(labels[b]))
        if e not in edge_cost:
            raise LospreError(f"!edgecost {a} {b}: no such edge in the extracted graph")
        edge_cost[e] = c
    for a, c in node_over.items():
        node_cost[instr_node(labels[a])] = c
    return Cfg(sink + 1, edges, edge_cost, node_cost)


# ---------------------------------------------------------------------------
# Candidate derivation

@dataclass(frozen=True)
class ExprCandidate:
    """A distinct computed expression and where it occurs.

    ``safety_required`` marks loads and divisions, which must never execute
    on operand values the original program would not compute on.
    """

    op: str
    left: Operand
    right: Optional[Operand]
    occurrence_nodes: frozenset
    safety_required: bool

    def display(self) -> str:
        if self.op == "load":
            return f"*{self.left}"
        if self.right is None:
            return f"{self.op}{self.left}"
        return f"{self.left} {self.op} {self.right}"


def _operand_key(o: Operand):
    return (0, o, "") if isinstance(o, int) else (1, 0, o)


def candidate_key(ins: Instruction):
    """Canonical (op, left, right) triple; commutative operands are sorted."""
    if ins.kind == BINOP:
        left, right = ins.left, ins.right
        if ins.op in COMMUTATIVE and _operand_key(right) < _operand_key(left):
            left, right = right, left
        return (ins.op, left, right)
    if ins.kind == UNOP:
        return ({"-": "neg", "~": "not"}[ins.op], ins.left, None)
    if ins.kind == LOAD:
        return ("load", ins.left, None)
    return None


def derive_problems(program, cfg: Cfg) -> list:
    """One (candidate, problem) pair per distinct computed expression.

    The invalidation set contains the source and sinks, every node
    assigning to an operand variable, every store when the candidate reads
    memory, and every store and load when an operand variable is itself the
    result of a load (no pointer analysis: any memory access may conflict).
    """
    instructions = list(program)
    load_results = {ins.dest for ins in instructions if ins.kind == LOAD}
    store_nodes = [instr_node(i) for i, ins in enumerate(instructions) if ins.kind == STORE]
    load_nodes = [instr_node(i) for i, ins in enumerate(instructions) if ins.kind == LOAD]

    occurrences = {}
    order = []
    for i, ins in enumerate(instructions):
        key = candidate_key(ins)
        if key is None:
            continue
        if key not in occurrences:
            occurrences[key] = []
            order.append(key)
        occurrences[key].append(instr_node(i))

    result = []
    for key in order:
        op, left, right = key
        operand_vars = [o for o in (left, right) if isinstance(o, str)]
        inv = set()
        for i, ins in enumerate(instructions):
            if ins.defines() in operand_vars:
                inv.add(instr_node(i))
        if op == "load":
            inv.update(store_nodes)
        if any(o in load_results for o in operand_vars):
            inv.update(store_nodes)
            inv.update(load_nodes)
        candidate = ExprCandidate(op=op, left=left, right=right,
                                  occurrence_nodes=frozenset(occurrences[key]),
                                  safety_required=op in ("load", "/"))
        problem = make_problem(cfg, occurrences[key], inv)
        result.append((candidate, problem))
    return result


# ---------------------------------------------------------------------------
# Rewriting

def _computation_instr(candidate: ExprCandidate, tmp: str) -> Instruction:
    if candidate.op == "load":
        return Instruction(LOAD, dest=tmp, left=candidate.left)
    if candidate.right is None:
        op = {"neg": "-", "not": "~"}[candidate.op]
        return Instruction(UNOP, dest=tmp, op=op, left=candidate.left)
    return Instruction(BINOP, dest=tmp, op=candidate.op,
                       left=candidate.left, right=candidate.right)


def _fresh_names(program, prefix, count):
    existing = {ins.label for ins in program if ins.label}
    existing |= program.variables()
    names = []
    k = 0
    while len(names) < count:
        name = f"{prefix}{k}"
        if name not in existing:
            names.append(name)
        k += 1
    return names


def next_tmp_name(program) -> str:
    return _fresh_names(program, "__lospre", 1)[0]


def rewrite(program: Program, cfg: Cfg, candidate: ExprCandidate, solution,
            *, tmp_name: Optional[str] = None) -> Program:
    """Apply a solution: subdivide every calculation edge with a fresh
    computation of the candidate into a new temporary, and replace every
    occurrence with an assignment from that temporary.

    Fallthrough edges are subdivided inline; jump and branch edges get a
    fresh labeled block at the end of the program with the computation and
    a jump to the original target.  An edge out of a ret (into the sink)
    becomes a jump to a trailing block that computes and returns.
    """
    instructions = list(program.instructions)
    n = len(instructions)
    sink = instr_node(n)
    for (u, v) in solution.calc_set:
        if (u, v) not in cfg.edges:
            raise LospreError(f"solution edge ({u}, {v}) is not an edge of the graph")
    if cfg.node_count != sink + 1:
        raise LospreError("solution/graph/program size mismatch")
    if not candidate.occurrence_nodes:
        return program

    tmp = tmp_name or next_tmp_name(program)
    comp = _computation_instr(candidate, tmp)
    labels_in_use = {ins.label for ins in instructions if ins.label}

    label_counter = [0]

    def fresh_label():
        while True:
            name = f"__L{label_counter[0]}"
            label_counter[0] += 1
            if name not in labels_in_use:
                labels_in_use.add(name)
                return name

    def label_of(idx):
        ins = instructions[idx]
        if ins.label is None:
            lbl = fresh_label()
            instructions[idx] = replace(ins, label=lbl)
        return instructions[idx].label

    inserts_top = []
    inserts_after = {}
    appended = []
    retarget = {}

    for (u, v) in sorted(solution.calc_set):
        if u == SOURCE_NODE:
            inserts_top.append(comp)
            continue
        ui = node_instr(u)
        ins = instructions[ui]
        if ins.kind == RET:
            # only edge out of a ret is the sink edge; compute after returning
            block_label = fresh_label()
            retarget[ui] = block_label
            appended.append([replace(comp, label=block_label), Instruction(RET)])
            continue
        fallthrough = ui + 1 if ui + 1 < n else n
        fall_node = sink if fallthrough == n else instr_node(fallthrough)
        if ins.kind == BRANCH:
            taken_node = instr_node(program.labels()[ins.target])
            if v == fall_node and v == taken_node:
                # collapsed two-way edge: route the taken path through the insert
                lbl = fresh_label()
                retarget[ui] = lbl
                inserts_after.setdefault(ui, []).append(replace(comp, label=lbl))
            elif v == fall_node:
                inserts_after.setdefault(ui, []).append(comp)
            else:
                lbl = fresh_label()
                retarget[ui] = lbl
                appended.append([replace(comp, label=lbl),
                                 Instruction(JUMP, target=label_of(node_instr(v)))])
        elif ins.kind == JUMP:
            lbl = fresh_label()
            retarget[ui] = lbl
            appended.append([replace(comp, label=lbl),
                             Instruction(JUMP, target=label_of(node_instr(v)))])
        else:
            if v != fall_node:
                raise LospreError(f"edge ({u}, {v}) does not leave instruction {ui}")
            inserts_after.setdefault(ui, []).append(comp)

    occurrence_indices = {node_instr(v) for v in candidate.occurrence_nodes}
    out = list(inserts_top)
    for i, ins in enumerate(instructions):
        if i in retarget:
            ins = replace(ins, target=retarget[i])
        if i in occurrence_indices:
            ins = Instruction(ASSIGN, label=ins.label, dest=ins.dest, left=tmp)
        out.append(ins)
        out.extend(inserts_after.get(i, ()))
    for block in appended:
        out.extend(block)
    return Program(out, program.default_edge_cost, program.default_node_cost,
                   dict(program.edge_cost_overrides), dict(program.node_cost_overrides))


# ---------------------------------------------------------------------------
# Copy propagation (pipeline glue between rewriting passes)

def copy_propagate(program: Program) -> Program:
    """Replace variable reads with their copy sources where a copy is
    available on every path; repeated until stable.

    An elimination pass leaves ``x = tmp`` assignments at the former
    occurrences; propagating tmp into downstream reads is what lets
    dependent expressions (address arithmetic feeding a load, for example)
    become candidates in the next pass.
    """
    instructions = list(program.instructions)
    changed = True
    while changed:
        changed = False
        n = len(instructions)
        succ = _successor_indices(instructions)
        preds = [[] for _ in range(n)]
        for i, outs in enumerate(succ):
            for o in outs:
                if o < n:
                    preds[o].append(i)

        # availability is over (dest, source) pairs, so identical copies on
        # different paths merge at joins
        copies = []
        pair_id = {}
        for ins in instructions:
            if ins.kind == ASSIGN and ins.dest != ins.left:
                pair = (ins.dest, ins.left)
                if pair not in pair_id:
                    pair_id[pair] = len(copies)
                    copies.append(pair)
        if not copies:
            break
        all_mask = (1 << len(copies)) - 1
        gen = [0] * n
        kill = [0] * n
        for i, ins in enumerate(instructions):
            d = ins.defines()
            if d is None:
                continue
            for c, (dest, src) in enumerate(copies):
                if d == dest or d == src:
                    kill[i] |= 1 << c
            if ins.kind == ASSIGN and ins.dest != ins.left:
                gen[i] |= 1 << pair_id[(ins.dest, ins.left)]
        # forward must analysis: IN = AND of predecessor OUTs
        out_sets = [all_mask] * n
        in_sets = [0] * n
        work = list(range(n))
        while work:
            i = work.pop()
            if preds[i]:
                new_in = all_mask
                for p in preds[i]:
                    new_in &= out_sets[p]
            else:
                new_in = 0
            new_out = (new_in & ~kill[i]) | gen[i]
            if new_in != in_sets[i] or new_out != out_sets[i]:
                in_sets[i] = new_in
                out_sets[i] = new_out
                for o in succ[i]:
                    if o < n:
                        work.append(o)

        source_of = {}
        for i in range(n):
            avail = {}
            m = in_sets[i]
            c = 0
            while m:
                if m & 1:
                    dest, src = copies[c]
                    avail[dest] = src
                m >>= 1
                c += 1
            if avail:
                source_of[i] = avail

        def sub(i, o):
            nonlocal changed
            if isinstance(o, str) and i in source_of and o in source_of[i]:
                changed = True
                return source_of[i][o]
            return o

        new_instructions = []
        for i, ins in enumerate(instructions):
            if ins.kind == ASSIGN:
                ins = replace(ins, left=sub(i, ins.left))
            elif ins.kind in (BINOP, STORE):
                ins = replace(ins, left=sub(i, ins.left), right=sub(i, ins.right))
            elif ins.kind in (UNOP, LOAD, BRANCH):
                ins = replace(ins, left=sub(i, ins.left))
            new_instructions.append(ins)
        instructions = new_instructions
    return Program(instructions, program.default_edge_cost, program.default_node_cost,
                   dict(program.edge_cost_overrides), dict(program.node_cost_overrides))
