"""Precision instruments over recovered CFGs.

Path counting treats each loop body as a single traversal: back edges found
by a depth-first search from the entry are removed, then entry-to-sink
paths of the remaining DAG are counted with dynamic programming in
arbitrary-precision integers (context-blind graphs explode geometrically).
"""

from __future__ import annotations

from dataclasses import dataclass

from .bytecode import BlockId
from .cfg import AnalysisError, Cfg, EdgeKind


@dataclass(frozen=True)
class Trace:
    """Block start offsets visited by one concrete execution."""

    offsets: tuple[int, ...]


@dataclass(frozen=True)
class PathReport:
    path_count: int
    back_edges_removed: int


def _adjacency(cfg: Cfg) -> dict[BlockId, list[BlockId]]:
    """Successor lists in edge-insertion order, parallel edges collapsed."""
    adj: dict[BlockId, list[BlockId]] = {b: [] for b in cfg.blocks}
    for edge in cfg.edges:
        if edge.dst not in adj[edge.src]:
            adj[edge.src].append(edge.dst)
    return adj


def count_paths(cfg: Cfg) -> PathReport:
    """Entry-to-sink path count after removing DFS back edges."""
    if cfg.entry not in cfg.blocks:
        raise AnalysisError("entry block missing from CFG")
    adj = _adjacency(cfg)

    # Iterative DFS, tracking the gray (on-stack) set to spot back edges.
    WHITE, GRAY, BLACK = 0, 1, 2
    color: dict[BlockId, int] = {b: WHITE for b in cfg.blocks}
    back_edges: set[tuple[BlockId, BlockId]] = set()
    order: list[BlockId] = []  # reverse-postorder accumulator
    stack: list[tuple[BlockId, int]] = [(cfg.entry, 0)]
    color[cfg.entry] = GRAY
    while stack:
        node, idx = stack[-1]
        succs = adj[node]
        if idx < len(succs):
            stack[-1] = (node, idx + 1)
            nxt = succs[idx]
            if color[nxt] == GRAY:
                back_edges.add((node, nxt))
            elif color[nxt] == WHITE:
                color[nxt] = GRAY
                stack.append((nxt, 0))
        else:
            color[node] = BLACK
            order.append(node)
            stack.pop()
    order.reverse()  # topological over the back-edge-free reachable subgraph

    reachable = set(order)
    npaths: dict[BlockId, int] = {b: 0 for b in reachable}
    npaths[cfg.entry] = 1
    total = 0
    for node in order:
        ways = npaths[node]
        if ways == 0:
            continue
        succs = [s for s in adj[node] if (node, s) not in back_edges]
        if not succs:
            total += ways  # sink: halting terminator or unresolved transfer
            continue
        for s in succs:
            npaths[s] += ways
    return PathReport(path_count=total, back_edges_removed=len(back_edges))


def polymorphic_jump_targets(cfg: Cfg) -> list[tuple[BlockId, frozenset[BlockId]]]:
    """Blocks whose non-fallthrough edges reach more than one target."""
    out = []
    for block_id in sorted(cfg.blocks):
        targets = frozenset(
            e.dst for e in cfg.edges if e.src == block_id and e.kind is EdgeKind.JUMP
        )
        if len(targets) > 1:
            out.append((block_id, targets))
    return out


def trace_coverage(
    cfg: Cfg, traces: list
) -> tuple[int, int, list]:
    """How many traces correspond to a walk in the CFG.

    A trace is covered when stepping a frontier of clone candidates through
    its offsets never empties; clones collapse to offsets.  Prefix-walk
    semantics: a covered trace need not end at a terminator block.
    """
    by_offset: dict[int, list[BlockId]] = {}
    for block_id in cfg.blocks:
        by_offset.setdefault(block_id.offset, []).append(block_id)
    succs: dict[BlockId, set[BlockId]] = {}
    for e in cfg.edges:
        succs.setdefault(e.src, set()).add(e.dst)

    covered = 0
    uncovered = []
    for trace in traces:
        offsets = list(trace.offsets)
        ok = bool(offsets)
        frontier = {b for b in by_offset.get(offsets[0], []) if b == cfg.entry} if ok else set()
        if ok and not frontier:
            ok = False
        for offset in offsets[1:]:
            if not ok:
                break
            frontier = {
                nxt
                for b in frontier
                for nxt in succs.get(b, ())
                if nxt.offset == offset
            }
            if not frontier:
                ok = False
        if ok:
            covered += 1
        else:
            uncovered.append(trace)
    return covered, len(traces), uncovered
