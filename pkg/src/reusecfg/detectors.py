"""Vulnerability detectors over the recovered CFG and its three-address form.

Two demonstrations of what context-separated control flow buys downstream:
transaction-origin authentication checks, and check/effect ordering around
external calls (the classic reentrancy shape).  Both work purely on def-use
chains in the value table plus ordering along acyclic CFG paths.
"""

from __future__ import annotations

from dataclasses import dataclass

from .bytecode import BlockId
from .cfg import Cfg
from .emulator import CONST, PHI, SYM, ValueTable, trace_origin

# Opcodes that can hand control to another contract with state at stake.
# STATICCALL cannot re-enter with writes and is excluded.
REENTRANT_CALLS = {"CALL", "CALLCODE", "DELEGATECALL"}

# Condition plumbing through which an origin check still counts as a check.
_CONDITION_CHAIN_OPS = {"EQ", "ISZERO", "AND"}


@dataclass(frozen=True)
class Finding:
    kind: str  # "TxOrigin" | "Reentrancy"
    site_offset: int
    evidence: tuple[tuple[str, int], ...]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "site_offset": self.site_offset,
            "evidence": [{"role": role, "offset": off} for role, off in self.evidence],
        }


def _chain_sources(
    vid: int, table: ValueTable, through: set[str] | None
) -> dict[str, int]:
    """Map of environment-source mnemonics reachable from `vid`, with the
    value id of the first occurrence.  When `through` is given, symbol
    nodes outside that set are not traversed (their operands are opaque)."""
    found: dict[str, int] = {}
    seen: set[int] = set()
    work = [vid]
    while work:
        v = work.pop()
        if v in seen:
            continue
        seen.add(v)
        value = table.get(v)
        if value.kind == SYM:
            if value.op in ("ORIGIN", "CALLER"):
                found.setdefault(value.op, v)
                continue
            if through is not None and value.op not in through:
                continue
            work.extend(value.args)
        elif value.kind == PHI:
            work.extend(value.members)
        elif value.kind == CONST:
            work.extend(value.args)
    return found


def _sym_offsets(cfg: Cfg, mnemonic: str) -> dict[int, int]:
    """value id -> instruction offset for every `mnemonic` result."""
    out: dict[int, int] = {}
    for block_id in sorted(cfg.blocks):
        for op in cfg.tac.get(block_id, []):
            if op.mnemonic == mnemonic and op.result is not None:
                out[op.result] = op.offset
    return out


def detect_tx_origin(cfg: Cfg, value_table: ValueTable) -> list[Finding]:
    """Transaction-origin authentication misuse.

    Flags (a) any branch condition that depends on an ORIGIN result through
    EQ/ISZERO/AND plumbing, and (b) any EQ whose two sides derive from
    ORIGIN and CALLER respectively (address-equality against the caller is
    the textbook phishing-prone check).
    """
    table = value_table
    origin_sites = _sym_offsets(cfg, "ORIGIN")
    findings: dict[tuple, Finding] = {}
    for block_id in sorted(cfg.blocks):
        for op in cfg.tac.get(block_id, []):
            if op.mnemonic == "JUMPI" and len(op.args) == 2:
                cond = op.args[1]
                sources = _chain_sources(cond, table, _CONDITION_CHAIN_OPS)
                if "ORIGIN" in sources:
                    origin_off = origin_sites.get(sources["ORIGIN"], op.offset)
                    finding = Finding(
                        "TxOrigin",
                        op.offset,
                        (("origin", origin_off), ("check", op.offset)),
                    )
                    findings.setdefault(("check", op.offset), finding)
            elif op.mnemonic == "EQ" and len(op.args) == 2:
                left = _chain_sources(op.args[0], table, None)
                right = _chain_sources(op.args[1], table, None)
                pair_hit = ("ORIGIN" in left and "CALLER" in right) or (
                    "ORIGIN" in right and "CALLER" in left
                )
                if pair_hit:
                    origin_vid = left.get("ORIGIN", right.get("ORIGIN"))
                    origin_off = origin_sites.get(origin_vid, op.offset)
                    finding = Finding(
                        "TxOrigin",
                        op.offset,
                        (("origin", origin_off), ("compare", op.offset)),
                    )
                    findings.setdefault(("compare", op.offset), finding)
    return sorted(findings.values(), key=lambda f: (f.site_offset, f.evidence))


def _structurally_equal(a: int, b: int, table: ValueTable) -> bool:
    """Def-use trees equal up to value-id renaming, constants by value.

    Conservative: unknowns never match, phi member sets must align exactly.
    """
    work = [(a, b)]
    seen: set[tuple[int, int]] = set()
    while work:
        x, y = work.pop()
        if x == y:
            continue
        if (x, y) in seen:
            continue
        seen.add((x, y))
        vx, vy = table.get(x), table.get(y)
        if vx.kind != vy.kind:
            return False
        if vx.kind == CONST:
            if vx.const != vy.const:
                return False
            continue
        if vx.kind == SYM:
            if vx.op != vy.op or len(vx.args) != len(vy.args):
                return False
            work.extend(zip(vx.args, vy.args))
            continue
        return False  # phi or unknown: too ambiguous to equate
    return True


def _dag_reachability(cfg: Cfg) -> dict[BlockId, set[BlockId]]:
    """Forward reachability over the back-edge-removed graph."""
    adj: dict[BlockId, list[BlockId]] = {b: [] for b in cfg.blocks}
    for e in cfg.edges:
        if e.dst not in adj[e.src]:
            adj[e.src].append(e.dst)
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {b: WHITE for b in cfg.blocks}
    back: set[tuple[BlockId, BlockId]] = set()
    order: list[BlockId] = []
    for root in sorted(cfg.blocks):
        if color[root] != WHITE:
            continue
        color[root] = GRAY
        stack = [(root, 0)]
        while stack:
            node, idx = stack[-1]
            succs = adj[node]
            if idx < len(succs):
                stack[-1] = (node, idx + 1)
                nxt = succs[idx]
                if color[nxt] == GRAY:
                    back.add((node, nxt))
                elif color[nxt] == WHITE:
                    color[nxt] = GRAY
                    stack.append((nxt, 0))
            else:
                color[node] = BLACK
                order.append(node)
                stack.pop()
    reach: dict[BlockId, set[BlockId]] = {b: set() for b in cfg.blocks}
    for node in order:  # postorder: successors done first
        acc = reach[node]
        for s in adj[node]:
            if (node, s) in back:
                continue
            acc.add(s)
            acc |= reach[s]
    return reach


def detect_reentrancy(cfg: Cfg, value_table: ValueTable) -> list[Finding]:
    """Check-interaction-effect ordering violations.

    Reports a finding when one acyclic path carries, in order: a branch
    whose condition depends on a storage read, then a re-enterable external
    call, then a write back to the structurally-same storage key.  Correct
    code updates state before the external call, so the matched shape is
    exactly the exploitable ordering.
    """
    table = value_table
    sloads: list[tuple[BlockId, int, int, int]] = []  # block, offset, result, key
    jumpis: list[tuple[BlockId, int, int]] = []  # block, offset, cond
    calls: list[tuple[BlockId, int]] = []
    sstores: list[tuple[BlockId, int, int]] = []  # block, offset, key
    for block_id in sorted(cfg.blocks):
        for op in cfg.tac.get(block_id, []):
            if op.mnemonic == "SLOAD" and op.result is not None and op.args:
                sloads.append((block_id, op.offset, op.result, op.args[0]))
            elif op.mnemonic == "JUMPI" and len(op.args) == 2:
                jumpis.append((block_id, op.offset, op.args[1]))
            elif op.mnemonic in REENTRANT_CALLS:
                calls.append((block_id, op.offset))
            elif op.mnemonic == "SSTORE" and len(op.args) == 2:
                sstores.append((block_id, op.offset, op.args[0]))

    reach = _dag_reachability(cfg)

    def ordered(b1: BlockId, off1: int, b2: BlockId, off2: int) -> bool:
        if b1 == b2:
            return off1 < off2
        return b2 in reach[b1]

    findings: dict[tuple, Finding] = {}
    for jb, joff, cond in jumpis:
        cond_chain = trace_origin(cond, table)
        guarded = [
            (sb, soff, res, key)
            for sb, soff, res, key in sloads
            if res in cond_chain and ordered(sb, soff, jb, joff)
        ]
        if not guarded:
            continue
        for cb, coff in calls:
            if not ordered(jb, joff, cb, coff):
                continue
            for stb, stoff, skey in sstores:
                if not ordered(cb, coff, stb, stoff):
                    continue
                for _, _, _, lkey in guarded:
                    if _structurally_equal(lkey, skey, table):
                        key = (joff, coff, stoff)
                        findings.setdefault(
                            key,
                            Finding(
                                "Reentrancy",
                                coff,
                                (
                                    ("check", joff),
                                    ("call", coff),
                                    ("store", stoff),
                                ),
                            ),
                        )
                        break
    return sorted(findings.values(), key=lambda f: (f.site_offset, f.evidence))
