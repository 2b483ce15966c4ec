"""Fixture synthesis and a concrete ground-truth interpreter.

The generator emits bytecode for the eight compiler code-reuse shapes we
target, each built from the same trick: a block's jump operand is pushed
by its predecessors instead of next to the jump, so the block can serve
several unrelated paths.  Every fixture carries its own ground truth:
which offsets are deliberately reused, closed-form path counts for both
recovery modes, and the execution traces enumerated by the interpreter.

The interpreter is intentionally written as a standalone concrete machine
(its arithmetic does not share code with the symbolic emulator) so it can
act as an independent oracle for constant folding and trace coverage.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field

from .bytecode import (
    CODE_SIZE_LIMIT,
    JUMPDEST,
    MNEMONIC_TO_OPCODE,
    OPCODES,
    STACK_LIMIT,
    WORD_MASK,
    disassemble,
    identify_blocks,
)
from .metrics import Trace


class Pattern(enum.Enum):
    BASIC_FAKE_JOIN = "BasicFakeJoin"
    BASIC_FAKE_LOOP = "BasicFakeLoop"
    FAKE_JOIN_SEQUENCE = "FakeJoinSequence"
    NESTED_FAKE_LOOPS = "NestedFakeLoops"
    FAKE_JOIN_WITH_REAL = "FakeJoinWithReal"
    FAKE_LOOP_WITH_REAL_LOOP = "FakeLoopWithRealLoop"
    FAKE_JOIN_MULTI_EXIT = "FakeJoinMultiExit"
    FAKE_LOOP_WITH_TRANSFERS = "FakeLoopWithTransfers"


@dataclass(frozen=True)
class PatternSpec:
    pattern: Pattern
    seed: int = 0
    nesting_depth: int = 1

    def __post_init__(self) -> None:
        if self.nesting_depth < 1:
            raise ValueError("nesting_depth must be >= 1")


@dataclass
class GroundTruth:
    bytecode: bytes
    reused_offsets: set[int]
    expected_sensitive_paths: int
    expected_insensitive_paths: int
    traces: list[Trace]
    label_offsets: dict[str, int] = field(default_factory=dict)


class Assembler:
    """Two-pass label assembler; all label pushes are fixed-width PUSH2."""

    def __init__(self) -> None:
        self._items: list[tuple] = []  # ("op",opcode) ("push",width,value) ("pushl",label) ("label",name) ("raw",bytes)
        self._declared: set[str] = set()
        self.labels: dict[str, int] = {}

    def label(self, name: str) -> None:
        if name in self._declared:
            raise ValueError(f"duplicate label {name}")
        self._declared.add(name)
        self._items.append(("label", name))

    def absorb(self, other: "Assembler", prefix: str) -> None:
        """Inline another program's items with namespaced labels."""
        for item in other._items:
            kind = item[0]
            if kind == "label":
                self.label(prefix + item[1])
            elif kind == "pushl":
                self._items.append(("pushl", prefix + item[1]))
            else:
                self._items.append(item)

    def op(self, mnemonic: str) -> None:
        self._items.append(("op", MNEMONIC_TO_OPCODE[mnemonic]))

    def push(self, value: int, width: int | None = None) -> None:
        if width is None:
            width = max(1, (value.bit_length() + 7) // 8)
        self._items.append(("push", width, value))

    def push_label(self, name: str) -> None:
        self._items.append(("pushl", name))

    def raw(self, data: bytes) -> None:
        self._items.append(("raw", data))

    def _sizes(self) -> None:
        pc = 0
        self.labels = {}
        for item in self._items:
            kind = item[0]
            if kind == "label":
                self.labels[item[1]] = pc
            elif kind == "op":
                pc += 1
            elif kind == "push":
                pc += 1 + item[1]
            elif kind == "pushl":
                pc += 3  # PUSH2 + 2 bytes
            elif kind == "raw":
                pc += len(item[1])

    def assemble(self) -> bytes:
        self._sizes()
        out = bytearray()
        for item in self._items:
            kind = item[0]
            if kind == "label":
                continue
            if kind == "op":
                out.append(item[1])
            elif kind == "push":
                _, width, value = item
                out.append(0x5F + width)
                out += value.to_bytes(width, "big")
            elif kind == "pushl":
                target = self.labels[item[1]]
                out.append(0x61)  # PUSH2
                out += target.to_bytes(2, "big")
            elif kind == "raw":
                out += item[1]
        return bytes(out)


class UnsupportedOpcodeError(Exception):
    def __init__(self, mnemonic: str) -> None:
        super().__init__(f"unsupported opcode in concrete interpreter: {mnemonic}")
        self.mnemonic = mnemonic


_MOD = 1 << 256

# Concrete single-opcode semantics, written independently of the emulator's
# folding table on purpose: the two must agree and are cross-checked.
_CONCRETE_BINOPS = {
    0x01: lambda a, b: (a + b) % _MOD,
    0x02: lambda a, b: (a * b) % _MOD,
    0x03: lambda a, b: (a - b) % _MOD,
    0x04: lambda a, b: 0 if b == 0 else a // b,
    0x06: lambda a, b: 0 if b == 0 else a % b,
    0x0A: lambda a, b: pow(a, b, _MOD),
    0x10: lambda a, b: int(a < b),
    0x11: lambda a, b: int(a > b),
    0x14: lambda a, b: int(a == b),
    0x16: lambda a, b: a & b,
    0x17: lambda a, b: a | b,
    0x18: lambda a, b: a ^ b,
    0x1B: lambda a, b: 0 if a >= 256 else (b << a) % _MOD,
    0x1C: lambda a, b: 0 if a >= 256 else b >> a,
    0x1A: lambda a, b: 0 if a >= 32 else (b >> (8 * (31 - a))) & 0xFF,
}
_CONCRETE_UNOPS = {
    0x15: lambda a: int(a == 0),
    0x19: lambda a: a ^ (_MOD - 1),
}


def concrete_op(mnemonic: str, operands: list[int]) -> int:
    """Concrete result of one pure opcode; operands top-of-stack first."""
    opcode = MNEMONIC_TO_OPCODE[mnemonic]
    if opcode in _CONCRETE_UNOPS:
        return _CONCRETE_UNOPS[opcode](operands[0])
    if opcode in _CONCRETE_BINOPS:
        return _CONCRETE_BINOPS[opcode](operands[0], operands[1])
    raise UnsupportedOpcodeError(mnemonic)


_MAX_FORKS = 65536


def interpret(
    code: bytes,
    branch_bound: int = 16,
    env: dict[str, int] | None = None,
) -> list[Trace]:
    """Concretely execute `code`, forking both arms at every JUMPI.

    Returns the distinct block-offset traces that reach a terminator within
    `branch_bound` branch decisions per run.  Invalid jumps and underflows
    end their fork as a revert-class trace, which is still recorded.  A fork
    that revisits one of its own exact (pc, stack) states makes no progress
    and is pruned.  Environment opcodes are only legal when `env` supplies a
    constant for their mnemonic.
    """
    env = env or {}
    instructions = disassemble(code)
    block_starts = {b.start_offset for b in identify_blocks(instructions)}
    # Bytes inside push payloads are not legal landing sites.
    valid_dests = {i.offset for i in instructions if i.opcode == JUMPDEST}
    n = len(code)

    # (pc, stack tuple, decisions used, trace so far, seen decision states)
    initial = (0, (), 0, (0,), frozenset())
    stack_of_states = [initial]
    traces: list[Trace] = []
    seen_traces: set[tuple[int, ...]] = set()
    forks = 0

    def record(trace: tuple[int, ...]) -> None:
        if trace not in seen_traces:
            seen_traces.add(trace)
            traces.append(Trace(trace))

    while stack_of_states:
        pc, stack, used, trace, seen = stack_of_states.pop()
        stack = list(stack)
        while True:
            if pc >= n:  # implicit STOP beyond the end of code
                record(trace)
                break
            op = code[pc]
            entry = OPCODES.get(op)
            if entry is None:
                record(trace)  # invalid-class: transaction aborts here
                break
            name, pops, pushes = entry
            if name in ("STOP", "RETURN", "REVERT", "INVALID", "SELFDESTRUCT"):
                record(trace)
                break
            if len(stack) < pops:
                record(trace)  # underflow reverts
                break

            next_pc = pc + 1
            if 0x60 <= op <= 0x7F:
                width = op - 0x5F
                payload = code[pc + 1 : pc + 1 + width]
                value = int.from_bytes(payload + b"\x00" * (width - len(payload)), "big")
                stack.append(value)
                next_pc = pc + 1 + len(payload)
            elif name == "PUSH0":
                stack.append(0)
            elif 0x80 <= op <= 0x8F:
                stack.append(stack[-(op - 0x7F)])
            elif 0x90 <= op <= 0x9F:
                depth = op - 0x8F
                stack[-1], stack[-depth - 1] = stack[-depth - 1], stack[-1]
            elif name == "POP":
                stack.pop()
            elif name == "JUMPDEST":
                pass
            elif name == "JUMP":
                target = stack.pop()
                if target not in valid_dests:
                    record(trace)  # invalid jump reverts
                    break
                next_pc = target
            elif name == "JUMPI":
                target = stack.pop()
                stack.pop()  # condition: both arms are explored regardless
                if used >= branch_bound:
                    break  # fork abandoned, no trace
                # A decision state may recur once (one extra loop lap);
                # beyond that the fork makes no progress and is pruned.
                state_key = (pc, tuple(stack))
                if (state_key, 1) not in seen:
                    seen = seen | {(state_key, 1)}
                elif (state_key, 2) not in seen:
                    seen = seen | {(state_key, 2)}
                else:
                    break
                taken_ok = target in valid_dests
                fall_pc = pc + 1
                forks += 1
                if forks > _MAX_FORKS:
                    raise RuntimeError("interpreter fork budget exceeded")
                # Explore fallthrough via the work stack, continue on taken.
                fall_trace = trace + ((fall_pc,) if fall_pc in block_starts else ())
                stack_of_states.append(
                    (fall_pc, tuple(stack), used + 1, fall_trace, seen)
                )
                if not taken_ok:
                    record(trace)  # taken arm reverts on a bad target
                    break
                used += 1
                next_pc = target
            elif name in env:
                for _ in range(pops):
                    stack.pop()
                if pushes:
                    stack.append(env[name] & WORD_MASK)
            else:
                result = concrete_op(name, [stack.pop() for _ in range(pops)])
                if pushes:
                    stack.append(result)

            if len(stack) > STACK_LIMIT:
                record(trace)
                break
            if next_pc in block_starts and next_pc != pc:
                trace = trace + (next_pc,)
            pc = next_pc

    return traces


# ---------------------------------------------------------------------------
# Pattern generators
# ---------------------------------------------------------------------------

def _filler(asm: Assembler, rng: random.Random, budget: int = 2) -> None:
    """Stack-neutral padding so seeds shift offsets and exercise folding."""
    for _ in range(rng.randrange(0, budget + 1)):
        choice = rng.randrange(3)
        if choice == 0:
            asm.push(rng.randrange(256))
            asm.op("POP")
        elif choice == 1:
            asm.push(rng.randrange(256))
            asm.push(rng.randrange(256))
            asm.op(rng.choice(["ADD", "XOR", "AND", "OR"]))
            asm.op("POP")
        else:
            asm.push(rng.randrange(256))
            asm.op("ISZERO")
            asm.op("POP")


def _dispatcher(asm: Assembler, rng: random.Random, arms: list[str]) -> None:
    """Chain of JUMPIs routing to `arms`; the last arm is the fallthrough."""
    for target in arms[:-1]:
        asm.push(0)
        asm.push_label(target)
        asm.op("JUMPI")
    asm.push_label(arms[-1])
    asm.op("JUMP")


def _data_tail(asm: Assembler, rng: random.Random) -> None:
    """Unreachable trailing bytes, standing in for metadata regions."""
    tail = bytes(rng.randrange(256) for _ in range(rng.randrange(0, 12)))
    asm.raw(tail)


def _build_basic_fake_join(rng: random.Random, depth: int):
    """One callee, d+1 callers each pre-pushing its own return target."""
    k = depth + 1
    asm = Assembler()
    callers = [f"caller{i}" for i in range(k)]
    _dispatcher(asm, rng, callers)
    for i in range(k):
        asm.label(callers[i])
        asm.op("JUMPDEST")
        _filler(asm, rng)
        asm.push_label(f"ret{i}")
        asm.push_label("shared")
        asm.op("JUMP")
    asm.label("shared")
    asm.op("JUMPDEST")
    _filler(asm, rng)
    asm.op("JUMP")
    for i in range(k):
        asm.label(f"ret{i}")
        asm.op("JUMPDEST")
        _filler(asm, rng)
        asm.op("STOP")
    return asm, ["shared"], k, k * k


def _build_basic_fake_loop(rng: random.Random, depth: int):
    """One callee revisited d+1 times along a single path."""
    k = depth + 1  # times the shared block executes
    asm = Assembler()
    # Entry pre-pushes every continuation, last use first popped.
    asm.push_label("exit")
    for i in range(depth, 0, -1):
        asm.push_label(f"mid{i}")
    asm.push_label("shared")
    asm.op("JUMP")
    asm.label("shared")
    asm.op("JUMPDEST")
    _filler(asm, rng)
    asm.op("JUMP")
    for i in range(1, depth + 1):
        asm.label(f"mid{i}")
        asm.op("JUMPDEST")
        _filler(asm, rng)
        asm.push_label("shared")
        asm.op("JUMP")
    asm.label("exit")
    asm.op("JUMPDEST")
    _filler(asm, rng)
    asm.op("STOP")
    return asm, ["shared"], 1, depth + 1


def _build_fake_join_sequence(rng: random.Random, depth: int):
    """Nested reuse: level k wraps the level-(k-1) chain with one more
    prologue/epilogue pair, so a whole block sequence is shared."""
    asm = Assembler()
    callers = [f"caller{i}" for i in range(depth + 1)]
    _dispatcher(asm, rng, callers)
    # caller 0 uses the core block alone; caller k uses pro_k..pro_1 core epi_1..epi_k
    for k in range(depth + 1):
        asm.label(callers[k])
        asm.op("JUMPDEST")
        _filler(asm, rng)
        asm.push_label(f"ret{k}")
        for j in range(k, 0, -1):
            asm.push_label(f"epi{j}")
        if k == 0:
            asm.push_label("core")
        else:
            asm.push_label(f"pro{k}")
        asm.op("JUMP")
    for j in range(1, depth + 1):
        asm.label(f"pro{j}")
        asm.op("JUMPDEST")
        _filler(asm, rng)
        if j == 1:
            asm.push_label("core")
        else:
            asm.push_label(f"pro{j-1}")
        asm.op("JUMP")
    asm.label("core")
    asm.op("JUMPDEST")
    _filler(asm, rng)
    asm.op("JUMP")
    for j in range(1, depth + 1):
        asm.label(f"epi{j}")
        asm.op("JUMPDEST")
        _filler(asm, rng)
        asm.op("JUMP")
    for k in range(depth + 1):
        asm.label(f"ret{k}")
        asm.op("JUMPDEST")
        _filler(asm, rng)
        asm.op("STOP")
    reused = ["core"]
    for j in range(1, depth):  # pro_j/epi_j run on levels j..depth
        reused += [f"pro{j}", f"epi{j}"]
    n = depth + 1
    return asm, reused, n, n * n


def _build_nested_fake_loops(rng: random.Random, depth: int):
    """Fake loops nested inside fake loops; one straight-line execution.

    Each nesting level is a shared snippet invoked twice by the level above:
    level 1 is the innermost block, level k wraps level k-1 with an entry
    block, a return site between the two inner invocations, and an exit
    block that pops level k's own pre-pushed return.  The innermost block
    runs 2^depth times overall.
    """
    asm = Assembler()
    inner = "body" if depth == 1 else f"w{depth}_in"
    asm.push_label("m1")
    asm.push_label(inner)
    asm.op("JUMP")
    asm.label("m1")
    asm.op("JUMPDEST")
    _filler(asm, rng)
    asm.push_label("m2")
    asm.push_label(inner)
    asm.op("JUMP")
    asm.label("m2")
    asm.op("JUMPDEST")
    _filler(asm, rng)
    asm.op("STOP")
    for k in range(depth, 1, -1):
        called = "body" if k == 2 else f"w{k-1}_in"
        asm.label(f"w{k}_in")
        asm.op("JUMPDEST")
        _filler(asm, rng)
        asm.push_label(f"w{k}_r1")
        asm.push_label(called)
        asm.op("JUMP")
        asm.label(f"w{k}_r1")
        asm.op("JUMPDEST")
        _filler(asm, rng)
        asm.push_label(f"w{k}_r2")
        asm.push_label(called)
        asm.op("JUMP")
        asm.label(f"w{k}_r2")
        asm.op("JUMPDEST")
        _filler(asm, rng)
        asm.op("JUMP")  # pops this level's own pre-pushed return
    asm.label("body")
    asm.op("JUMPDEST")
    _filler(asm, rng)
    asm.op("JUMP")
    reused = ["body"]
    for k in range(2, depth + 1):
        reused += [f"w{k}_in", f"w{k}_r1", f"w{k}_r2"]
    return asm, reused, 1, depth + 1


def _build_fake_join_with_real(rng: random.Random, depth: int):
    """One caller reuses the shared block; d+1 more form a real join on it."""
    asm = Assembler()
    callers = ["reuser"] + [f"joiner{i}" for i in range(depth + 1)]
    _dispatcher(asm, rng, callers)
    asm.label("reuser")
    asm.op("JUMPDEST")
    _filler(asm, rng)
    asm.push_label("ret_a")
    asm.push_label("shared")
    asm.op("JUMP")
    for i in range(depth + 1):
        asm.label(f"joiner{i}")
        asm.op("JUMPDEST")
        _filler(asm, rng)
        asm.push_label("ret_b")
        asm.push_label("shared")
        asm.op("JUMP")
    asm.label("shared")
    asm.op("JUMPDEST")
    _filler(asm, rng)
    asm.op("JUMP")
    for name in ("ret_a", "ret_b"):
        asm.label(name)
        asm.op("JUMPDEST")
        _filler(asm, rng)
        asm.op("STOP")
    k = depth + 2
    return asm, ["shared"], k, 2 * k


def _build_fake_loop_with_real_loop(rng: random.Random, depth: int):
    """A genuine two-block loop whose exit target changes per reuse round."""
    rounds = depth + 1
    asm = Assembler()
    asm.push_label("exit")
    for r in range(depth, 0, -1):
        asm.push_label(f"hop{r}")
    asm.push_label("head")
    asm.op("JUMP")
    # head tests the pre-pushed exit target without consuming it.
    asm.label("head")
    asm.op("JUMPDEST")
    _filler(asm, rng)
    asm.push(0)
    asm.op("DUP2")
    asm.op("JUMPI")
    # fallthrough: loop body, jumps back to head.
    _filler(asm, rng)
    asm.push_label("head")
    asm.op("JUMP")
    for r in range(1, depth + 1):
        asm.label(f"hop{r}")
        asm.op("JUMPDEST")
        asm.op("POP")
        _filler(asm, rng)
        asm.push_label("head")
        asm.op("JUMP")
    asm.label("exit")
    asm.op("JUMPDEST")
    asm.op("POP")
    _filler(asm, rng)
    asm.op("STOP")
    return asm, ["head", "head_fall"], rounds + 1, rounds + 1


def _build_fake_join_multi_exit(rng: random.Random, depth: int):
    """Reused cluster with a real branch and a real join inside it."""
    asm = Assembler()
    callers = [f"caller{i}" for i in range(depth + 1)]
    _dispatcher(asm, rng, callers)
    for i in range(depth + 1):
        asm.label(callers[i])
        asm.op("JUMPDEST")
        _filler(asm, rng)
        asm.push_label(f"ret{i}")
        asm.push_label("cluster")
        asm.op("JUMP")
    asm.label("cluster")
    asm.op("JUMPDEST")
    _filler(asm, rng)
    asm.push(0)
    asm.push_label("arm_b")
    asm.op("JUMPI")
    # fallthrough arm
    _filler(asm, rng)
    asm.op("JUMP")
    asm.label("arm_b")
    asm.op("JUMPDEST")
    _filler(asm, rng)
    asm.op("JUMP")
    for i in range(depth + 1):
        asm.label(f"ret{i}")
        asm.op("JUMPDEST")
        _filler(asm, rng)
        asm.push_label(f"fin{i}")
        asm.op("JUMP")
    for i in range(depth + 1):
        asm.label(f"fin{i}")
        asm.op("JUMPDEST")
        asm.op("STOP")
    k = depth + 1
    return asm, ["cluster", "cluster_fall", "arm_b"], 2 * k, 2 * k * k


def _build_fake_loop_with_transfers(rng: random.Random, depth: int):
    """Reused cluster (branch + join + a chain of d tail blocks) used twice,
    the first use looping back through a connector block."""
    asm = Assembler()
    asm.push_label("exit")
    asm.push_label("back")
    asm.push_label("head")
    asm.op("JUMP")
    asm.label("head")
    asm.op("JUMPDEST")
    _filler(asm, rng)
    asm.push(0)
    asm.push_label("arm_b")
    asm.op("JUMPI")
    _filler(asm, rng)
    asm.push_label("tail1")
    asm.op("JUMP")
    asm.label("arm_b")
    asm.op("JUMPDEST")
    _filler(asm, rng)
    asm.push_label("tail1")
    asm.op("JUMP")
    for j in range(1, depth + 1):
        asm.label(f"tail{j}")
        asm.op("JUMPDEST")
        _filler(asm, rng)
        if j < depth:
            asm.push_label(f"tail{j+1}")
            asm.op("JUMP")
        else:
            asm.op("JUMP")  # pops the pre-pushed continuation
    asm.label("back")
    asm.op("JUMPDEST")
    _filler(asm, rng)
    asm.push_label("head")
    asm.op("JUMP")
    asm.label("exit")
    asm.op("JUMPDEST")
    _filler(asm, rng)
    asm.op("STOP")
    reused = ["head", "head_fall", "arm_b"] + [f"tail{j}" for j in range(1, depth + 1)]
    return asm, reused, 4, 4


_BUILDERS = {
    Pattern.BASIC_FAKE_JOIN: _build_basic_fake_join,
    Pattern.BASIC_FAKE_LOOP: _build_basic_fake_loop,
    Pattern.FAKE_JOIN_SEQUENCE: _build_fake_join_sequence,
    Pattern.NESTED_FAKE_LOOPS: _build_nested_fake_loops,
    Pattern.FAKE_JOIN_WITH_REAL: _build_fake_join_with_real,
    Pattern.FAKE_LOOP_WITH_REAL_LOOP: _build_fake_loop_with_real_loop,
    Pattern.FAKE_JOIN_MULTI_EXIT: _build_fake_join_multi_exit,
    Pattern.FAKE_LOOP_WITH_TRANSFERS: _build_fake_loop_with_transfers,
}


def generate(spec: PatternSpec, branch_bound: int = 16) -> GroundTruth:
    """Synthesize one labeled fixture for `spec`."""
    rng = random.Random(f"{spec.pattern.value}:{spec.seed}:{spec.nesting_depth}")
    asm, reused_labels, sens, insens = _BUILDERS[spec.pattern](rng, spec.nesting_depth)
    _data_tail(asm, rng)
    code = asm.assemble()
    if len(code) > CODE_SIZE_LIMIT:
        raise ValueError(
            f"fixture exceeds deployable code size limit ({len(code)} > {CODE_SIZE_LIMIT})"
        )
    reused_offsets = set()
    for name in reused_labels:
        if name in asm.labels:
            reused_offsets.add(asm.labels[name])
        elif name.endswith("_fall"):
            # fallthrough half of a JUMPI block: the arm after the branch
            base = name[: -len("_fall")]
            reused_offsets.add(_fallthrough_offset_of(code, asm.labels[base]))
    traces = interpret(code, branch_bound=branch_bound)
    return GroundTruth(
        bytecode=code,
        reused_offsets=reused_offsets,
        expected_sensitive_paths=sens,
        expected_insensitive_paths=insens,
        traces=traces,
        label_offsets=dict(asm.labels),
    )


def _fallthrough_offset_of(code: bytes, block_start: int) -> int:
    """Offset of the fallthrough block following the JUMPI block at
    `block_start`."""
    for block in identify_blocks(disassemble(code)):
        if block.start_offset <= block_start < block.end_offset:
            return block.end_offset
    raise ValueError(f"no block covers offset {block_start:#x}")


def stress_fixture(target_size: int = 24_000, seed: int = 0) -> bytes:
    """Near-code-size-limit composition of pattern segments behind one
    dispatcher; the scalability fixture."""
    rng = random.Random(seed)
    cycle = [
        Pattern.FAKE_JOIN_SEQUENCE,
        Pattern.FAKE_LOOP_WITH_REAL_LOOP,
        Pattern.BASIC_FAKE_JOIN,
        Pattern.FAKE_JOIN_MULTI_EXIT,
        Pattern.NESTED_FAKE_LOOPS,
        Pattern.FAKE_LOOP_WITH_TRANSFERS,
        Pattern.BASIC_FAKE_LOOP,
    ]
    segment_asms: list[Assembler] = []
    estimated = 0
    i = 0
    while True:
        pat = cycle[i % len(cycle)]
        sub_rng = random.Random(f"stress:{seed}:{i}")
        sub_asm, _, _, _ = _BUILDERS[pat](sub_rng, 4)
        size = len(sub_asm.assemble())
        # dispatcher arm (5 bytes) + entry JUMPDEST per segment
        if estimated + size + 6 + 1 > target_size:
            break
        segment_asms.append(sub_asm)
        estimated += size + 6 + 1
        i += 1

    asm = Assembler()
    names = [f"seg{j}_" for j in range(len(segment_asms))]
    for name in names[:-1]:
        asm.push(0)
        asm.push_label(name + "entry")
        asm.op("JUMPI")
    asm.push_label(names[-1] + "entry")
    asm.op("JUMP")
    for name, seg in zip(names, segment_asms):
        asm.label(name + "entry")
        asm.op("JUMPDEST")
        asm.absorb(seg, name)
    code = asm.assemble()
    if len(code) < target_size:
        code += bytes(rng.randrange(256) for _ in range(target_size - len(code)))
    return code
