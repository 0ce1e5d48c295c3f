"""Pure state machines for the register servers and clients.

Every phase is a function from (state, inputs) to (state, outputs); nothing
here performs I/O or mutates its arguments, so identical inputs always yield
identical outputs.  The simulation engine owns timing, delivery, and fault
injection.

Wire values are opaque, hashable payloads.  ``BOTTOM`` (``None``) is the
register's default content and is representable on the wire like any other
value, but may never be written by a client.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence, Union

BOTTOM = None

# Destination sentinel: deliver to every server.
SERVERS = "servers"


class UsageError(RuntimeError):
    """A client violated the one-operation-at-a-time rule."""


def value_key(v: object) -> tuple:
    """Total, type-stable order over wire values; BOTTOM sorts first."""
    if v is BOTTOM:
        return (0, "", "")
    return (1, type(v).__name__, repr(v))


# ---------------------------------------------------------------------------
# Messages
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Echo:
    value: object
    server: int


@dataclass(frozen=True)
class Write:
    value: object
    client: int


@dataclass(frozen=True)
class Read:
    client: int


@dataclass(frozen=True)
class Reply:
    value: object
    server: int


Message = Union[Echo, Write, Read, Reply]


@dataclass(frozen=True)
class PhaseOutput:
    """Messages leaving a process during one phase.

    ``outgoing`` entries are (destination, message) pairs where the
    destination is either the SERVERS broadcast sentinel or a client id.
    """

    outgoing: tuple = ()
    response: object = None


# ---------------------------------------------------------------------------
# Server
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ServerState:
    value: object = BOTTOM
    # one entry per distinct sender: duplicate messages from a sender in one
    # round are rejected, so a faulty server cannot vote twice
    echo_vals: dict = field(default_factory=dict)       # server id -> value
    current_writes: dict = field(default_factory=dict)  # client id -> value
    current_reads: frozenset = frozenset()
    cured: bool = False


def server_begin_round(state: ServerState, cured_report: bool) -> ServerState:
    """Empty the round-local buffers and refresh the cure flag."""
    return replace(state, echo_vals={}, current_writes={}, cured=bool(cured_report))


def server_send(state: ServerState, server_id: int) -> tuple[ServerState, PhaseOutput]:
    """Echo the stored value and answer reads recorded last round.

    A server that knows it is cured stays silent, but the pending read set is
    emptied on both branches: readers waiting on a silent cured server are
    dropped (at most f per round, which the protocol tolerates).
    """
    outgoing: list = []
    if not state.cured:
        outgoing.append((SERVERS, Echo(state.value, server_id)))
        for cid in sorted(state.current_reads):
            outgoing.append((cid, Reply(state.value, server_id)))
    return replace(state, current_reads=frozenset()), PhaseOutput(tuple(outgoing))


def server_receive(state: ServerState,
                   inbox: Sequence[tuple[int, Message]]) -> ServerState:
    """Accumulate this round's echoes, write requests, and read requests.

    ``inbox`` holds (authenticated sender id, message) pairs.  Only the first
    message of each kind from a given sender counts.
    """
    echo_vals = dict(state.echo_vals)
    current_writes = dict(state.current_writes)
    current_reads = set(state.current_reads)
    for sender, msg in inbox:
        if isinstance(msg, Echo):
            echo_vals.setdefault(msg.server, msg.value)
        elif isinstance(msg, Write):
            current_writes.setdefault(msg.client, msg.value)
        elif isinstance(msg, Read):
            current_reads.add(msg.client)
        # Reply messages addressed to servers are ignored.
    return replace(state, echo_vals=echo_vals, current_writes=current_writes,
                   current_reads=frozenset(current_reads))


@dataclass(frozen=True)
class ComputeNote:
    """What the compute phase did to the stored value (for probes/oracle)."""

    adopted: bool = False
    source: Optional[str] = None        # "write" | "echo"
    tied_values: tuple = ()             # >1 entries only in inadmissible runs


def server_compute(state: ServerState, s_threshold: int) -> tuple[ServerState, ComputeNote]:
    """Adopt this round's written value, else a sufficiently echoed one.

    With concurrent writes the value paired with the highest client id wins,
    so every server picks the same one.  Among echoes, a value needs at least
    ``s_threshold`` distinct senders; a tie (impossible in admissible
    configurations) is broken toward the smallest value and reported.
    """
    if state.current_writes:
        top_client = max(state.current_writes)
        return (replace(state, value=state.current_writes[top_client]),
                ComputeNote(adopted=True, source="write"))
    counts = Counter(state.echo_vals.values())
    qualifying = sorted((v for v, c in counts.items() if c >= s_threshold),
                        key=value_key)
    if qualifying:
        return (replace(state, value=qualifying[0]),
                ComputeNote(adopted=True, source="echo",
                            tied_values=tuple(qualifying) if len(qualifying) > 1 else ()))
    return state, ComputeNote()


# ---------------------------------------------------------------------------
# Client
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClientState:
    to_send: tuple = ()
    reading: bool = False
    writing: bool = False
    op_start: Optional[int] = None
    replies: dict = field(default_factory=dict)  # server id -> value


@dataclass(frozen=True)
class WriteAck:
    pass


@dataclass(frozen=True)
class ReadOk:
    value: object


@dataclass(frozen=True)
class ReadFailed:
    """No unique value reached the selection threshold.

    Expected only in inadmissible configurations; the engine surfaces it as a
    protocol-failure event and never silently retries.
    """

    counts: tuple        # ((value, distinct sender count), ...) sorted desc
    qualifying: tuple    # values at/above threshold (0 or >=2 of them)


def client_invoke_write(state: ClientState, value: object) -> ClientState:
    if state.reading or state.writing:
        raise UsageError("write() invoked while another operation is in progress")
    if value is BOTTOM:
        raise UsageError("the default value cannot be written")
    return replace(state, to_send=state.to_send + (Write(value, -1),), writing=True)


def client_invoke_read(state: ClientState) -> ClientState:
    if state.reading or state.writing:
        raise UsageError("read() invoked while another operation is in progress")
    return replace(state, to_send=state.to_send + (Read(-1),), reading=True)


def stamp_client_id(state: ClientState, client_id: int) -> ClientState:
    """Fill the sender id into queued messages (the engine knows the id)."""
    stamped = tuple(
        replace(m, client=client_id) if isinstance(m, (Write, Read)) else m
        for m in state.to_send)
    return replace(state, to_send=stamped)


def client_send(state: ClientState, round_no: int) -> tuple[ClientState, PhaseOutput]:
    """Broadcast queued requests; remember the round an operation started.

    ``op_start`` is only set when empty so a read keeps its start round
    across its two rounds, and only while an operation is actually running.
    """
    outgoing = tuple((SERVERS, m) for m in state.to_send)
    op_start = state.op_start
    if op_start is None and (state.reading or state.writing):
        op_start = round_no
    return replace(state, to_send=(), op_start=op_start), PhaseOutput(outgoing)


def client_receive(state: ClientState,
                   inbox: Sequence[tuple[int, Message]]) -> ClientState:
    """Accumulate replies, at most one per distinct server."""
    replies = dict(state.replies)
    for sender, msg in inbox:
        if isinstance(msg, Reply):
            replies.setdefault(msg.server, msg.value)
    return replace(state, replies=replies)


def client_compute(state: ClientState, round_no: int,
                   s_threshold: int) -> tuple[ClientState, object]:
    """Finish operations: a write lasts one round, a read exactly two."""
    if state.writing and state.op_start == round_no:
        return replace(state, writing=False, op_start=None), WriteAck()
    if state.reading and state.op_start == round_no - 1:
        counts = Counter(state.replies.values())
        qualifying = sorted((v for v, c in counts.items() if c >= s_threshold),
                            key=value_key)
        new_state = replace(state, reading=False, op_start=None, replies={})
        if len(qualifying) == 1:
            return new_state, ReadOk(qualifying[0])
        ranked = tuple(sorted(counts.items(), key=lambda kv: (-kv[1], value_key(kv[0]))))
        return new_state, ReadFailed(counts=ranked, qualifying=tuple(qualifying))
    return state, None
