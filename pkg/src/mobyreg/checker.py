"""Termination, Validity, and Ordering checks over operation histories.

Time is round-granular: an operation's invocation time is the round its first
message was sent and its response time is the round of its response event.
``op precedes op'`` iff response(op) < invoke(op').  Ordering is decided in
polynomial time for unique-value histories by grouping each write with its
readers and testing the induced cluster constraints for acyclicity; a
brute-force enumeration over all precedence-respecting total orders serves as
an independent oracle for small histories.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .protocol import BOTTOM


class CheckerInputError(ValueError):
    """The history violates a checker precondition (e.g. duplicate values)."""


class OracleRefusal(RuntimeError):
    """The brute-force oracle does not scale to this history."""


@dataclass(frozen=True)
class Op:
    op_id: int
    client: int
    kind: str                    # "write" | "read"
    value: object                # written value, or the value a read returned
    invoke: int
    response: Optional[int]

    @property
    def complete(self) -> bool:
        return self.response is not None


@dataclass
class Verdict:
    prop: str
    passed: bool
    witness: list = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.passed


def precedes(a: Op, b: Op) -> bool:
    """Strict real-time precedence; incomplete operations precede nothing."""
    return a.response is not None and a.response < b.invoke


def history_from_records(records: Iterable) -> list[Op]:
    """Adapt engine OpRecords (or their dict form) to checker operations."""
    ops = []
    for rec in records:
        d = rec if isinstance(rec, dict) else rec.as_dict()
        value = d["argument"] if d["kind"] == "write" else d["result"]
        response = d["response_round"] if not d.get("failed") else None
        ops.append(Op(op_id=d["op_id"], client=d["client"], kind=d["kind"],
                      value=value, invoke=d["invoke_round"], response=response))
    return ops


def _completed(history: Sequence[Op]) -> list[Op]:
    return [op for op in history if op.complete]


def _writes_by_value(ops: Sequence[Op]) -> dict:
    writes = {}
    for op in ops:
        if op.kind != "write":
            continue
        if op.value in writes:
            raise CheckerInputError(
                f"duplicate written value {op.value!r} (ops {writes[op.value].op_id} "
                f"and {op.op_id}); the checker needs unique values")
        writes[op.value] = op
    return writes


def check_termination(history: Sequence[Op],
                      crashed_clients: Iterable[int] = ()) -> Verdict:
    """Every operation of a non-crashed client must have a response."""
    crashed = set(crashed_clients)
    witnesses = [op for op in history
                 if not op.complete and op.client not in crashed]
    return Verdict("termination", not witnesses,
                   [{"op_id": op.op_id, "client": op.client, "kind": op.kind}
                    for op in witnesses])


def check_validity(history: Sequence[Op]) -> Verdict:
    """Each read returns a non-overwritten preceding or concurrent write.

    A value is allowed for a read exactly when its write w satisfies: the
    read does not precede w, and no other write w' sits wholly between w and
    the read.  The default value is allowed only when no write precedes the
    read.
    """
    ops = _completed(history)
    writes = _writes_by_value(ops)
    witnesses = []
    for read in ops:
        if read.kind != "read":
            continue
        preceding = [w for w in writes.values() if precedes(w, read)]
        if read.value is BOTTOM:
            if preceding:
                witnesses.append({"op_id": read.op_id, "returned": None,
                                  "reason": "default value after a completed write"})
            continue
        w = writes.get(read.value)
        if w is None:
            witnesses.append({"op_id": read.op_id, "returned": read.value,
                              "reason": "value never written"})
            continue
        if precedes(read, w):
            witnesses.append({"op_id": read.op_id, "returned": read.value,
                              "reason": "read precedes its write"})
            continue
        stale = [w2 for w2 in preceding if precedes(w, w2)]
        if stale:
            witnesses.append({"op_id": read.op_id, "returned": read.value,
                              "reason": "overwritten value",
                              "newer_write": stale[0].op_id})
    return Verdict("validity", not witnesses, witnesses)


_INIT = object()  # cluster of the fictional initial write of the default value


def _clusters(ops: Sequence[Op]):
    """Group each read with the write it read from.  Raises on orphans."""
    writes = _writes_by_value(ops)
    cluster = {}
    orphan = None
    for op in ops:
        if op.kind == "write":
            cluster[op.op_id] = op.value
        elif op.value is BOTTOM:
            cluster[op.op_id] = _INIT
        elif op.value in writes:
            cluster[op.op_id] = op.value
        else:
            orphan = op
            break
    return writes, cluster, orphan


def check_ordering(history: Sequence[Op]) -> Verdict:
    """Does a precedence-respecting total order explain every read?

    In any explaining order, a write and its readers form a contiguous block,
    so one exists iff the precedence constraints lifted to those blocks are
    acyclic (with the initial-value block first).
    """
    ops = _completed(history)
    writes, cluster, orphan = _clusters(ops)
    if orphan is not None:
        return Verdict("ordering", False,
                       [{"op_id": orphan.op_id, "returned": orphan.value,
                         "reason": "value never written"}])
    # a read must not finish before the write it observed starts
    for op in ops:
        if op.kind == "read" and cluster[op.op_id] is not _INIT:
            w = writes[op.value]
            if precedes(op, w):
                return Verdict("ordering", False,
                               [{"op_id": op.op_id, "read_from": w.op_id,
                                 "reason": "read precedes its write"}])
    keys = [_INIT] + list(writes)
    edges: dict = {k: set() for k in keys}
    edge_witness: dict = {}
    for k in writes:
        edges[_INIT].add(k)
        edge_witness[(_INIT, k)] = {"reason": "initial value precedes every write"}
    for a, b in itertools.permutations(ops, 2):
        ca, cb = cluster[a.op_id], cluster[b.op_id]
        if ca != cb and precedes(a, b):
            if cb not in edges[ca]:
                edges[ca].add(cb)
                edge_witness[(ca, cb)] = {"before_op": a.op_id, "after_op": b.op_id}
    cycle = _find_cycle(keys, edges)
    if cycle is None:
        return Verdict("ordering", True)
    witness = []
    for src, dst in zip(cycle, cycle[1:] + cycle[:1]):
        witness.append({"from_write": None if src is _INIT else writes[src].op_id,
                        "to_write": None if dst is _INIT else writes[dst].op_id,
                        **edge_witness.get((src, dst), {})})
    return Verdict("ordering", False, witness)


def _find_cycle(keys, edges):
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {k: WHITE for k in keys}
    parent = {}
    for start in keys:
        if color[start] != WHITE:
            continue
        stack = [(start, iter(sorted(edges[start], key=repr)))]
        color[start] = GRAY
        while stack:
            node, it = stack[-1]
            advanced = False
            for nxt in it:
                if color[nxt] == GRAY:
                    cycle = [nxt]
                    cur = node
                    while cur != nxt:
                        cycle.append(cur)
                        cur = parent[cur]
                    cycle.reverse()
                    return cycle
                if color[nxt] == WHITE:
                    color[nxt] = GRAY
                    parent[nxt] = node
                    stack.append((nxt, iter(sorted(edges[nxt], key=repr))))
                    advanced = True
                    break
            if not advanced:
                color[node] = BLACK
                stack.pop()
    return None


BRUTE_FORCE_CAP = 9


def brute_force_linearizable(history: Sequence[Op]) -> Verdict:
    """Enumerate every precedence-respecting total order; independent oracle."""
    ops = _completed(history)
    if len(ops) > BRUTE_FORCE_CAP:
        raise OracleRefusal(f"{len(ops)} operations exceed the "
                            f"{BRUTE_FORCE_CAP}-operation oracle cap")
    _writes_by_value(ops)  # enforce the unique-value precondition
    for perm in itertools.permutations(ops):
        ok = True
        for i, a in enumerate(perm):
            for b in perm[i + 1:]:
                if precedes(b, a):
                    ok = False
                    break
            if not ok:
                break
        if not ok:
            continue
        last = BOTTOM
        for op in perm:
            if op.kind == "write":
                last = op.value
            elif op.value is not last and op.value != last:
                break
        else:
            return Verdict("ordering_oracle", True)
    return Verdict("ordering_oracle", False,
                   [{"reason": "no precedence-respecting order explains the reads"}])


def check_all(history: Sequence[Op],
              crashed_clients: Iterable[int] = ()) -> dict:
    """Run the three register properties; returns {name: Verdict}."""
    return {
        "termination": check_termination(history, crashed_clients),
        "validity": check_validity(history),
        "ordering": check_ordering(history),
    }
