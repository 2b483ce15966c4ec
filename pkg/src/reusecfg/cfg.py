"""Reuse-sensitive control-flow graph recovery.

Compilers shrink deployed bytecode by letting unrelated execution paths
share identical basic blocks; the shared block's jump operand is pushed by
each predecessor rather than next to the jump.  A context-blind traversal
merges those paths into fake joins and fake loops.  Recovery here keeps a
"reuse context" per block clone: the set of pre-pushed jump operands in
its entry stack, found by tainting each resolved jump operand and walking
its def-use chain back through the predecessor chain to the push that
introduced it.  A successor candidate is accepted only when every tainted
entry matches the incoming stack; otherwise the block is cloned and the
tainted locations are shared with the new clone.  The result gives every
usage context its own node, with genuine joins and loops preserved.

The reuse-insensitive mode of the same traversal (no taints, no clones,
all resolvable targets connected) serves as the comparison baseline.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

from .bytecode import (
    BasicBlock,
    BlockId,
    JUMPDEST,
    disassemble,
    identify_blocks,
)
from .emulator import (
    CONST,
    PHI,
    EmulationResult,
    Snapshot,
    StackState,
    TacOp,
    ValueTable,
    emulate_block,
    prepare_stack,
    trace_origin,
)


class Mode(enum.Enum):
    REUSE_SENSITIVE = "reuse-sensitive"
    REUSE_INSENSITIVE = "reuse-insensitive"


class EdgeKind(enum.Enum):
    JUMP = "jump"
    FALLTHROUGH = "fallthrough"


@dataclass(frozen=True)
class Config:
    """Recovery limits and defaults shared by the library and the CLI."""

    clone_budget_per_offset: int = 512
    total_block_budget: int = 100_000
    reemulation_cap: int = 64
    branch_bound: int = 16
    mode: Mode = Mode.REUSE_SENSITIVE
    output_format: str = "json"

    def __post_init__(self) -> None:
        for name in ("clone_budget_per_offset", "total_block_budget", "reemulation_cap", "branch_bound"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


class AnalysisError(Exception):
    """Recovery could not produce a graph for this input."""


class CloneBudgetError(AnalysisError):
    def __init__(self, offset: int, message: str | None = None) -> None:
        super().__init__(message or f"clone explosion at offset 0x{offset:x}")
        self.offset = offset


@dataclass(frozen=True)
class Edge:
    src: BlockId
    dst: BlockId
    kind: EdgeKind


@dataclass
class Cfg:
    """Recovered control-flow graph plus per-clone analysis state."""

    mode: Mode
    entry: BlockId
    limits: Config = field(default_factory=Config)
    blocks: dict[BlockId, BasicBlock] = field(default_factory=dict)
    edges: list[Edge] = field(default_factory=list)
    snapshots: dict[BlockId, list[Snapshot]] = field(default_factory=dict)
    reuse_contexts: dict[BlockId, dict[int, int]] = field(default_factory=dict)
    diagnostics: list[tuple[str, str, int]] = field(default_factory=list)
    value_table: ValueTable = field(default_factory=ValueTable)
    s_start: dict[BlockId, StackState] = field(default_factory=dict)
    s_end: dict[BlockId, StackState] = field(default_factory=dict)
    tac: dict[BlockId, list[TacOp]] = field(default_factory=dict)
    end_block_clones: set[BlockId] = field(default_factory=set)

    _edge_set: set[tuple[BlockId, BlockId, EdgeKind]] = field(default_factory=set)
    _preds: dict[BlockId, list[BlockId]] = field(default_factory=dict)
    _succs: dict[BlockId, list[tuple[BlockId, EdgeKind]]] = field(default_factory=dict)

    def add_diagnostic(self, severity: str, message: str, offset: int = -1) -> None:
        item = (severity, message, offset)
        if item not in self.diagnostics:
            self.diagnostics.append(item)

    def has_edge(self, src: BlockId, dst: BlockId, kind: EdgeKind) -> bool:
        return (src, dst, kind) in self._edge_set

    def add_edge(self, src: BlockId, dst: BlockId, kind: EdgeKind) -> bool:
        key = (src, dst, kind)
        if key in self._edge_set:
            return False
        self._edge_set.add(key)
        self.edges.append(Edge(src, dst, kind))
        self._preds.setdefault(dst, []).append(src)
        self._succs.setdefault(src, []).append((dst, kind))
        return True

    def remove_out_edges(self, src: BlockId) -> None:
        gone = [e for e in self.edges if e.src == src]
        if not gone:
            return
        self.edges = [e for e in self.edges if e.src != src]
        for e in gone:
            self._edge_set.discard((e.src, e.dst, e.kind))
            preds = self._preds.get(e.dst)
            if preds and e.src in preds:
                preds.remove(e.src)
        self._succs.pop(src, None)

    def predecessors(self, block: BlockId) -> list[BlockId]:
        return list(dict.fromkeys(self._preds.get(block, [])))

    def successors(self, block: BlockId) -> list[tuple[BlockId, EdgeKind]]:
        return list(self._succs.get(block, []))

    def clones_at(self, offset: int) -> list[BlockId]:
        out = []
        clone = 0
        while BlockId(offset, clone) in self.blocks:
            out.append(BlockId(offset, clone))
            clone += 1
        return out

    def jump_successors(self, block: BlockId) -> list[BlockId]:
        return [dst for dst, kind in self.successors(block) if kind is EdgeKind.JUMP]


# ---------------------------------------------------------------------------
# Public per-step operations (used by the recovery loop, callable directly)
# ---------------------------------------------------------------------------

def update_reuse_context(
    cfg: Cfg, block: BlockId, jump_target_value: int, value_table: ValueTable
) -> None:
    """Taint the entry-stack locations feeding `block`'s jump operand.

    The operand's def-use chain is walked back to the pushes that introduced
    it: every chain value found in a block's entry stack taints that
    (index, value) location, and the walk continues into each predecessor,
    re-expanding the chain there, until the block that pushed the value is
    reached.  If the operand was pushed inside `block` itself, nothing is
    tainted.  Tainted offsets share their locations across clones.
    """
    table = value_table
    # (clone, value id) pairs whose def-use chain is matched against that
    # clone's S_start.
    work: list[tuple[BlockId, int]] = [(block, jump_target_value)]
    visited: set[tuple[BlockId, int]] = set()
    touched_offsets: list[int] = []
    while work:
        clone, root = work.pop()
        if (clone, root) in visited:
            continue
        visited.add((clone, root))
        s_start = cfg.s_start.get(clone)
        if s_start is None:
            continue
        preds = cfg.predecessors(clone)
        for vid in sorted(trace_origin(root, table)):
            positions = []
            for idx, entry in enumerate(s_start.entries):
                if entry == vid:
                    positions.append(idx)
                elif table.get(entry).kind == PHI and vid in table.get(entry).members:
                    positions.append(idx)
            if not positions:
                continue  # not pre-pushed relative to this clone
            value = table.get(vid)
            if value.kind == CONST:
                ctx = cfg.reuse_contexts.setdefault(clone, {})
                added = False
                for idx in positions:
                    if ctx.get(idx) != value.const:
                        ctx[idx] = value.const
                        added = True
                if added:
                    touched_offsets.append(clone.offset)
            # The value flowed in from every predecessor stack that still
            # holds it (or computed it): keep walking toward its push.
            for pred in preds:
                work.append((pred, vid))

    for offset in dict.fromkeys(touched_offsets):
        transfer_taint(cfg, offset)


def backpropagate_context(cfg: Cfg, pred: BlockId, succ: BlockId) -> None:
    """Extend an existing successor context backwards through a new edge.

    When a block with tainted entries gains a predecessor, the values at the
    tainted positions flowed through that predecessor too; its own entry
    stack is tainted wherever it still holds them.
    """
    ctx = cfg.reuse_contexts.get(succ)
    s_start = cfg.s_start.get(succ)
    if not ctx or s_start is None:
        return
    table = cfg.value_table
    for idx in sorted(ctx):
        if idx < len(s_start.entries):
            update_reuse_context(cfg, succ, s_start.entries[idx], table)


def transfer_taint(cfg: Cfg, offset: int) -> None:
    """Share tainted locations among the clones of one offset.

    Identical instructions move the stack identically, so clones keep their
    pre-pushed operands at the same positions.  For each clone pair, tainted
    indices are copied across in ascending order while the values at the
    already-shared indices agree; the first disagreement ends the shared
    region.  Runs to a fixpoint and is idempotent.
    """
    clones = [c for c in cfg.clones_at(offset) if cfg.s_start.get(c) is not None]
    if len(clones) < 2:
        return
    table = cfg.value_table
    changed = True
    while changed:
        changed = False
        for a in clones:
            ctx_a = cfg.reuse_contexts.get(a)
            if not ctx_a:
                continue
            for b in clones:
                if a == b:
                    continue
                s_b = cfg.s_start[b]
                ctx_b = cfg.reuse_contexts.setdefault(b, {})
                for idx in sorted(ctx_a):
                    if idx >= len(s_b.entries):
                        cfg.add_diagnostic(
                            "info",
                            f"reuse-context index {idx} out of range for {b}",
                            offset,
                        )
                        continue
                    value_b = table.get(s_b.entries[idx])
                    if value_b.kind != CONST:
                        break  # not a constant: contexts diverge here
                    if idx not in ctx_b:
                        ctx_b[idx] = value_b.const
                        changed = True
                    if ctx_b[idx] != ctx_a[idx]:
                        break  # differing operands end the shared context
    # prune empty context dicts created above
    for c in clones:
        if not cfg.reuse_contexts.get(c):
            cfg.reuse_contexts.pop(c, None)


def reuse_handler(cfg: Cfg, b_c: BlockId, target_offset: int) -> BlockId:
    """Select a non-reused clone of `target_offset` for `b_c`, cloning when
    every existing candidate's tainted context disagrees with b_c's exit
    stack.  Candidates are tried in clone-index order; an unvisited original
    is claimed as-is.  A candidate whose entry stack depth differs cannot be
    the same usage context and is skipped.
    """
    s_end = cfg.s_end[b_c]
    table = cfg.value_table
    for cand in cfg.clones_at(target_offset):
        cand_start = cfg.s_start.get(cand)
        if cand_start is None:
            return cand  # first visit claims the original
        if len(cand_start.entries) != len(s_end.entries):
            continue
        ctx = cfg.reuse_contexts.get(cand, {})
        ok = True
        for idx, expected in sorted(ctx.items()):
            if idx >= len(s_end.entries):
                ok = False
                break
            have = table.get(s_end.entries[idx])
            if have.kind != CONST or have.const != expected:
                ok = False
                break
        if ok:
            return cand
    clone = _make_clone(cfg, target_offset)
    # The clone starts from the connecting block's exit stack, and existing
    # clones share their tainted locations with it right away so the next
    # arrival can already be told apart.
    cfg.s_start[clone] = StackState(s_end.entries)
    transfer_taint(cfg, target_offset)
    return clone


def handle_end_block(cfg: Cfg, b_c: BlockId, end_offset: int) -> BlockId:
    """Per-predecessor clone for transaction-ending blocks.

    End blocks never expose a jump operand, so reuse cannot be told from a
    genuine shared exit; cloning per predecessor keeps every end block at
    in-degree one at the cost of some redundant clones.
    """
    original = BlockId(end_offset, 0)
    if cfg.has_edge(b_c, original, EdgeKind.JUMP) or cfg.has_edge(
        b_c, original, EdgeKind.FALLTHROUGH
    ):
        return original
    if not cfg.predecessors(original) and cfg.s_start.get(original) is None:
        return original
    for cand in cfg.clones_at(end_offset)[1:]:
        if cfg.has_edge(b_c, cand, EdgeKind.JUMP) or cfg.has_edge(
            b_c, cand, EdgeKind.FALLTHROUGH
        ):
            return cand
    clone = _make_clone(cfg, end_offset)
    cfg.end_block_clones.add(clone)
    return clone


def _make_clone(cfg: Cfg, offset: int) -> BlockId:
    clones = cfg.clones_at(offset)
    if len(clones) >= cfg.limits.clone_budget_per_offset:
        raise CloneBudgetError(offset)
    if len(cfg.blocks) >= cfg.limits.total_block_budget:
        raise CloneBudgetError(offset, "total block budget exceeded")
    original = cfg.blocks[BlockId(offset, 0)]
    clone = original.with_clone(len(clones))
    cfg.blocks[clone.id] = clone
    return clone.id


# ---------------------------------------------------------------------------
# Recovery driver
# ---------------------------------------------------------------------------

class _Recovery:
    def __init__(self, code: bytes, mode: Mode, limits: Config) -> None:
        self.code = code
        self.mode = mode
        self.limits = limits
        instructions = disassemble(code)
        blocks = identify_blocks(instructions)
        self.templates: dict[int, BasicBlock] = {b.start_offset: b for b in blocks}
        entry = BlockId(0, 0)
        self.cfg = Cfg(mode=mode, entry=entry, limits=limits)
        for b in blocks:
            self.cfg.blocks[b.id] = b
        for ins in instructions:
            if ins.truncated:
                self.cfg.add_diagnostic(
                    "warning", f"truncated push payload at offset 0x{ins.offset:x}", ins.offset
                )
        self.dirty: set[BlockId] = set()
        self.emulation_count: dict[BlockId, int] = {}
        self.widened: dict[BlockId, set[int]] = {}

    # -- stack bookkeeping ---------------------------------------------------

    def _merge_into(self, pred: BlockId, succ: BlockId) -> None:
        cfg = self.cfg
        merged, changed, diags = prepare_stack(
            cfg.s_end[pred], cfg.s_start.get(succ), cfg.value_table
        )
        for severity, message, _ in diags:
            cfg.add_diagnostic(severity, message, succ.offset)
        if not changed:
            return
        if self.emulation_count.get(succ, 0) >= self.limits.reemulation_cap:
            merged = self._widen(succ, merged)
            if merged == cfg.s_start.get(succ):
                return
        cfg.s_start[succ] = merged
        self.dirty.add(succ)

    def _widen(self, block: BlockId, merged: StackState) -> StackState:
        """Past the re-emulation cap, still-changing positions widen to
        unknown so the fixpoint is forced."""
        cfg = self.cfg
        old = cfg.s_start.get(block)
        if old is None or len(old.entries) != len(merged.entries):
            return merged
        table = cfg.value_table
        out = list(merged.entries)
        widened = self.widened.setdefault(block, set())
        for i, (a, b) in enumerate(zip(old.entries, merged.entries)):
            if a != b:
                if i in widened and table.get(old.entries[i]).kind == "unknown":
                    out[i] = old.entries[i]
                else:
                    out[i] = table.new_unknown("widened")
                    widened.add(i)
        return StackState(tuple(out))

    # -- successor resolution --------------------------------------------------

    def _jump_targets(self, value_id: int, offset_hint: int) -> list[int]:
        """Resolve a jump operand to concrete target offsets.

        Sensitive mode requires a constant; the baseline mode additionally
        fans a phi out to each constant alternative, which is what lets the
        shared block connect to all of its return sites there.
        """
        table = self.cfg.value_table
        value = table.get(value_id)
        if value.kind == CONST:
            return [value.const]
        if self.mode is Mode.REUSE_INSENSITIVE and value.kind == PHI:
            consts = [
                table.get(m).const
                for m in value.members
                if table.get(m).kind == CONST
            ]
            if consts:
                return sorted(dict.fromkeys(consts))
        self.cfg.add_diagnostic(
            "warning", f"unresolved jump at offset 0x{offset_hint:x}", offset_hint
        )
        return []

    def _valid_jump_target(self, offset: int) -> bool:
        template = self.templates.get(offset)
        return template is not None and template.instructions[0].opcode == JUMPDEST

    def _select_successor(self, b_c: BlockId, offset: int) -> BlockId:
        if self.mode is Mode.REUSE_INSENSITIVE:
            return BlockId(offset, 0)
        template = self.templates[offset]
        if template.halts:
            return handle_end_block(self.cfg, b_c, offset)
        return reuse_handler(self.cfg, b_c, offset)

    # -- main loop -------------------------------------------------------------

    def run(self) -> Cfg:
        cfg = self.cfg
        entry = cfg.entry
        if entry not in cfg.blocks:
            raise AnalysisError("no block at offset 0x0")
        cfg.s_start[entry] = StackState(())
        self.dirty.add(entry)
        worklist: list[tuple[BlockId | None, BlockId]] = [(None, entry)]
        while worklist:
            pred, cur = worklist.pop()
            if pred is not None and not (
                cfg.has_edge(pred, cur, EdgeKind.JUMP)
                or cfg.has_edge(pred, cur, EdgeKind.FALLTHROUGH)
            ):
                continue  # stale item: the edge was dropped by a re-emulation
            if cur not in self.dirty:
                continue
            self.dirty.discard(cur)
            self._emulate(cur, worklist)
        self._finalize()
        return cfg

    def _emulate(self, cur: BlockId, worklist: list) -> None:
        cfg = self.cfg
        block = cfg.blocks[cur]
        if self.mode is Mode.REUSE_SENSITIVE:
            # A fresh emulation invalidates previously derived transfers.
            cfg.remove_out_edges(cur)
        result: EmulationResult = emulate_block(
            block, cfg.s_start[cur], cfg.value_table
        )
        for severity, message, off in result.diagnostics:
            cfg.add_diagnostic(severity, message, off)
        cfg.s_end[cur] = result.s_end
        cfg.tac[cur] = result.tac
        count = self.emulation_count.get(cur, 0)
        cfg.snapshots.setdefault(cur, []).append(
            Snapshot(cfg.s_start[cur], result.s_end, count)
        )
        self.emulation_count[cur] = count + 1

        pending: list[tuple[BlockId | None, BlockId]] = []
        for request in result.successors:
            if request.kind == "jump":
                targets = self._jump_targets(request.value, cur.offset)
                for target in targets:
                    if not self._valid_jump_target(target):
                        cfg.add_diagnostic(
                            "warning",
                            f"invalid jump target 0x{target:x} at offset 0x{cur.offset:x}",
                            cur.offset,
                        )
                        continue
                    if self.mode is Mode.REUSE_SENSITIVE:
                        update_reuse_context(cfg, cur, request.value, cfg.value_table)
                    self._connect(cur, target, EdgeKind.JUMP, pending)
            else:
                offset = request.offset
                if offset is None or offset >= len(self.code):
                    continue  # running off the end halts like STOP
                if offset not in self.templates:
                    continue
                self._connect(cur, offset, EdgeKind.FALLTHROUGH, pending)
        # LIFO worklist: queue the fallthrough arm first so the jump arm is
        # explored first and each path completes before its siblings.
        for item in reversed(pending):
            worklist.append(item)

    def _connect(
        self,
        cur: BlockId,
        offset: int,
        kind: EdgeKind,
        pending: list,
    ) -> None:
        cfg = self.cfg
        succ = self._select_successor(cur, offset)
        new_edge = cfg.add_edge(cur, succ, kind)
        self._merge_into(cur, succ)
        if self.mode is Mode.REUSE_SENSITIVE and new_edge:
            backpropagate_context(cfg, cur, succ)
        if succ in self.dirty or self.emulation_count.get(succ, 0) == 0:
            self.dirty.add(succ)
            pending.append((cur, succ))

    def _finalize(self) -> None:
        """Mark never-visited originals as data and drop orphaned clones."""
        cfg = self.cfg
        reachable: set[BlockId] = set()
        stack = [cfg.entry]
        while stack:
            b = stack.pop()
            if b in reachable:
                continue
            reachable.add(b)
            for dst, _ in cfg.successors(b):
                stack.append(dst)
        for block_id, block in list(cfg.blocks.items()):
            if block_id.clone == 0:
                block.is_data = cfg.s_start.get(block_id) is None
            elif block_id not in reachable:
                del cfg.blocks[block_id]
                cfg.s_start.pop(block_id, None)
                cfg.s_end.pop(block_id, None)
                cfg.snapshots.pop(block_id, None)
                cfg.reuse_contexts.pop(block_id, None)
                cfg.tac.pop(block_id, None)
                cfg.end_block_clones.discard(block_id)
        kept = set(cfg.blocks)
        dropped = [e for e in cfg.edges if e.src not in kept or e.dst not in kept]
        for e in dropped:
            cfg.edges.remove(e)
            cfg._edge_set.discard((e.src, e.dst, e.kind))
            preds = cfg._preds.get(e.dst)
            if preds and e.src in preds:
                preds.remove(e.src)
            succs = cfg._succs.get(e.src)
            if succs and (e.dst, e.kind) in succs:
                succs.remove((e.dst, e.kind))


def build_cfg(
    code: bytes,
    mode: Mode = Mode.REUSE_SENSITIVE,
    limits: Config | None = None,
) -> Cfg:
    """Recover the CFG of `code` starting at offset 0 with an empty stack."""
    return _Recovery(code, mode, limits or Config()).run()


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

def _sorted_blocks(cfg: Cfg) -> list[BasicBlock]:
    return [cfg.blocks[k] for k in sorted(cfg.blocks)]


def _sorted_edges(cfg: Cfg) -> list[Edge]:
    return sorted(cfg.edges, key=lambda e: (e.src, e.dst, e.kind.value))


def export(cfg: Cfg, format: str = "json", emit_tac: bool = False) -> bytes:
    """Serialize a built CFG; byte-identical for identical inputs."""
    if format == "json":
        return _export_json(cfg, emit_tac)
    if format == "dot":
        return _export_dot(cfg, emit_tac)
    raise ValueError(f"unknown export format: {format}")


def _export_json(cfg: Cfg, emit_tac: bool) -> bytes:
    blocks = []
    for block in _sorted_blocks(cfg):
        entry = {
            "id": str(block.id),
            "offset": block.start_offset,
            "clone": block.id.clone,
            "instructions": [ins.listing_line() for ins in block.instructions],
            "terminator": block.terminator.value,
            "is_data": block.is_data,
        }
        if emit_tac and block.id in cfg.tac:
            entry["tac"] = [op.render(cfg.value_table) for op in cfg.tac[block.id]]
        blocks.append(entry)
    doc = {
        "entry": str(cfg.entry),
        "blocks": blocks,
        "edges": [
            {"from": str(e.src), "to": str(e.dst), "kind": e.kind.value}
            for e in _sorted_edges(cfg)
        ],
        "diagnostics": [
            {"severity": s, "message": m, "offset": o} for s, m, o in cfg.diagnostics
        ],
    }
    return (json.dumps(doc, indent=2) + "\n").encode()


def _export_dot(cfg: Cfg, emit_tac: bool) -> bytes:
    lines = ["digraph cfg {", "  node [shape=box, fontname=monospace];"]
    for block in _sorted_blocks(cfg):
        body = [ins.listing_line() for ins in block.instructions]
        if emit_tac and block.id in cfg.tac:
            body += ["--"] + [op.render(cfg.value_table) for op in cfg.tac[block.id]]
        label = f"{block.start_offset:#x}_{block.id.clone}\\l" + "\\l".join(
            line.replace('"', '\\"') for line in body
        ) + "\\l"
        attrs = f'label="{label}"'
        if block.is_data:
            attrs += ", style=dotted"
        lines.append(f'  "{block.id}" [{attrs}];')
    for e in _sorted_edges(cfg):
        style = "solid" if e.kind is EdgeKind.JUMP else "dashed"
        lines.append(f'  "{e.src}" -> "{e.dst}" [style={style}];')
    lines.append("}")
    return ("\n".join(lines) + "\n").encode()
