"""Synchronous round loop: send, receive, compute, with fault injection.

One run executes a fixed number of rounds over n servers and a set of
clients.  All messages sent in a round are delivered in that round's receive
phase (channels are reliable and authenticated).  The adversary relocates its
agents per the fault model, corrupts occupied servers, and substitutes their
outgoing messages.  The run records an operation history, per-round agreement
probes, an event trace, and any property violations.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

from .adversary import (Behavior, FaultStatus, Occupancy, Strategy,
                        effective_behavior, rng_stream)
from .model import ConfigError, ModelId, SystemConfig
from .protocol import (BOTTOM, SERVERS, ClientState, Echo, Read, ReadFailed,
                       ReadOk, Reply, ServerState, Write, WriteAck,
                       client_compute, client_invoke_read,
                       client_invoke_write, client_receive, client_send,
                       server_begin_round, server_compute, server_receive,
                       server_send, stamp_client_id, value_key)

# ---------------------------------------------------------------------------
# Workloads
# ---------------------------------------------------------------------------

OPS = ("write", "read", "crash")


@dataclass(frozen=True)
class Directive:
    """One scripted client action; ``round`` is the round its message is sent."""

    round: int
    client: int
    op: str
    value: object = None


@dataclass(frozen=True)
class RandomWorkload:
    """Per-round, per-idle-client operation generator.

    ``op_rate`` is the chance an idle client starts an operation in a round;
    ``read_ratio`` splits those between reads and writes.  Written values
    embed (client id, counter) so they are globally unique, which the history
    checker requires.
    """

    op_rate: float = 0.2
    read_ratio: float = 0.5


Workload = Union[Sequence[Directive], RandomWorkload]


def validate_directives(directives: Sequence[Directive], rounds: int,
                        n_clients: int) -> list[Directive]:
    """Reject overlapping or out-of-range directives before round 1."""
    busy_until: dict[int, int] = {}
    crashed: set[int] = set()
    ordered = sorted(directives, key=lambda d: (d.round, d.client))
    for d in ordered:
        if d.op not in OPS:
            raise ConfigError(f"unknown workload op {d.op!r}")
        if not 1 <= d.round <= rounds:
            raise ConfigError(f"directive round {d.round} outside 1..{rounds}")
        if not 0 <= d.client < n_clients:
            raise ConfigError(f"directive client {d.client} outside 0..{n_clients - 1}")
        if d.client in crashed:
            raise ConfigError(f"client {d.client} acts after crashing")
        if d.op == "crash":
            crashed.add(d.client)
            continue
        if busy_until.get(d.client, 0) >= d.round:
            raise ConfigError(
                f"client {d.client} starts a {d.op} in round {d.round} while busy")
        if d.op == "write":
            if d.value is BOTTOM:
                raise ConfigError("a write directive needs a non-default value")
            busy_until[d.client] = d.round
        else:  # read
            if d.round + 1 > rounds:
                raise ConfigError(
                    f"read at round {d.round} cannot finish within {rounds} rounds")
            busy_until[d.client] = d.round + 1
    return ordered


# ---------------------------------------------------------------------------
# Records
# ---------------------------------------------------------------------------

@dataclass
class OpRecord:
    op_id: int
    client: int
    kind: str                      # "write" | "read"
    argument: object = None        # written value, None for reads
    result: object = None          # returned value for reads
    invoke_round: int = 0          # round the first message was sent
    response_round: Optional[int] = None
    failed: bool = False           # read finished with no unique value

    def as_dict(self) -> dict:
        return {
            "op_id": self.op_id, "client": self.client, "kind": self.kind,
            "argument": self.argument, "result": self.result,
            "invoke_round": self.invoke_round,
            "response_round": self.response_round, "failed": self.failed,
        }


@dataclass(frozen=True)
class TraceEvent:
    round: int
    phase: str
    kind: str
    actor: str
    payload: dict

    def as_line(self) -> str:
        return json.dumps(
            {"round": self.round, "phase": self.phase, "kind": self.kind,
             "actor": self.actor, "payload": self.payload},
            sort_keys=True, separators=(",", ":"), default=str)


@dataclass
class RunResult:
    config: SystemConfig
    rounds: int
    seed: int
    history: list = field(default_factory=list)       # OpRecord
    trace: list = field(default_factory=list)         # TraceEvent
    probes: list = field(default_factory=list)        # per-round dicts
    violations: list = field(default_factory=list)    # agreement-probe dips etc.
    protocol_failures: list = field(default_factory=list)
    realized_workload: list = field(default_factory=list)  # Directive
    crashed_clients: frozenset = frozenset()

    def trace_lines(self) -> str:
        return "\n".join(ev.as_line() for ev in self.trace) + ("\n" if self.trace else "")

    @property
    def min_support(self) -> Optional[int]:
        if not self.probes:
            return None
        return min(p["support"] for p in self.probes)


# ---------------------------------------------------------------------------
# Agreement probe
# ---------------------------------------------------------------------------

def probe_agreement(server_states: dict, faulty: frozenset) -> tuple[object, int]:
    """Modal value among non-faulty servers and its support.

    In admissible runs the support must reach n - f at the end of every
    round; the caller records a violation otherwise.
    """
    values = [st.value for sid, st in server_states.items() if sid not in faulty]
    if not values:
        return BOTTOM, 0
    counts = Counter(values)
    best = min(counts.items(), key=lambda kv: (-kv[1], value_key(kv[0])))
    return best[0], best[1]


# ---------------------------------------------------------------------------
# Message helpers
# ---------------------------------------------------------------------------

def _msg_payload(msg) -> dict:
    d = {"type": type(msg).__name__.lower()}
    for name in ("value", "server", "client"):
        if hasattr(msg, name):
            d[name] = getattr(msg, name)
    return d


def _payload_sender_id(msg) -> Optional[int]:
    if isinstance(msg, (Echo, Reply)):
        return msg.server
    if isinstance(msg, (Write, Read)):
        return msg.client
    return None


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------

def run(config: SystemConfig, strategy: Strategy, workload: Workload, *,
        rounds: int, seed: int = 0, n_clients: int = 3,
        allow_inadmissible: bool = False,
        record_messages: bool = False) -> RunResult:
    """Execute one deterministic simulation.

    Raises ConfigError before round 1 on malformed input or when the
    configuration is inadmissible and ``allow_inadmissible`` is not set.
    """
    if rounds < 0:
        raise ConfigError(f"rounds must be >= 0, got {rounds}")
    if n_clients < 1:
        raise ConfigError(f"need at least one client, got {n_clients}")
    if not config.admissible and not allow_inadmissible:
        raise ConfigError(
            f"n={config.n} <= alpha*f={config.params.alpha * config.f} for model "
            f"{config.params.model}; pass allow_inadmissible to run a bound demo")

    model = config.params.model
    oracle_enabled = config.params.oracle_enabled
    s_threshold = config.selection_threshold
    n, f = config.n, config.f

    scripted: Optional[list[Directive]] = None
    generator: Optional[RandomWorkload] = None
    if isinstance(workload, RandomWorkload):
        generator = workload
    else:
        scripted = validate_directives(list(workload), rounds, n_clients)

    result = RunResult(config=config, rounds=rounds, seed=seed)
    servers = {i: ServerState() for i in range(n)}
    clients = {c: ClientState() for c in range(n_clients)}
    restored = {i: True for i in range(n)}   # state known-good (cure oracle input)
    crashed: set[int] = set()
    pending_op: dict[int, OpRecord] = {}     # client -> outstanding operation
    write_counter: dict[int, int] = {c: 0 for c in range(n_clients)}
    occupied: frozenset = frozenset()        # end-of-previous-round agent positions
    op_seq = 0

    def trace(round_no, phase, kind, actor, payload):
        result.trace.append(TraceEvent(round_no, phase, kind, actor, payload))

    def invoke(round_no: int, d: Directive) -> None:
        nonlocal op_seq
        cst = clients[d.client]
        if d.op == "write":
            clients[d.client] = client_invoke_write(cst, d.value)
        else:
            clients[d.client] = client_invoke_read(cst)
        rec = OpRecord(op_id=op_seq, client=d.client, kind=d.op,
                       argument=d.value if d.op == "write" else None,
                       invoke_round=round_no)
        op_seq += 1
        pending_op[d.client] = rec
        result.history.append(rec)
        result.realized_workload.append(d)
        trace(round_no, "send", "op_invoke", f"c{d.client}",
              {"op_id": rec.op_id, "kind": d.op, "value": d.value})

    for r in range(1, rounds + 1):
        # --- agent movement (round start for M1-M3; M4 moves during send) ---
        occ = strategy.occupancy(config, r, occupied, rng_stream(seed, "sched", r))
        if model is not ModelId.BUHRMAN and occ.moves:
            raise ConfigError("in-send movement is only legal in the Buhrman model")
        if len(occ.pre_send) > f:
            raise ConfigError("occupied set exceeds f")
        pre_send = occ.pre_send
        cured_now = occupied - pre_send      # vacated at this round's start
        for i in cured_now:
            restored[i] = False
        trace(r, "round_start", "fault_move", "adversary",
              {"occupied": sorted(pre_send),
               "cured": sorted(cured_now),
               "planned_moves": [list(m) for m in occ.moves]})

        status = {
            i: (FaultStatus.FAULTY if i in pre_send
                else FaultStatus.CURED if i in cured_now
                else FaultStatus.CORRECT)
            for i in range(n)
        }
        behavior = {i: effective_behavior(model, status[i]) for i in range(n)}

        # --- begin round -------------------------------------------------
        for i in range(n):
            report = (oracle_enabled and not restored[i]
                      and status[i] is not FaultStatus.FAULTY)
            servers[i] = server_begin_round(servers[i], report)
        for i in sorted(pre_send):
            servers[i] = strategy.corrupt_state(
                r, i, rng_stream(seed, "corrupt", r, i), servers[i])
            restored[i] = False

        # --- operation injection (queued at the previous compute) --------
        if scripted is not None:
            todays = [d for d in scripted if d.round == r]
        else:
            todays = []
            rng_w = rng_stream(seed, "workload", r)
            for c in range(n_clients):
                cst = clients[c]
                if c in crashed or cst.reading or cst.writing:
                    continue
                if rng_w.random() >= generator.op_rate:
                    continue
                if rng_w.random() < generator.read_ratio and r + 1 <= rounds:
                    todays.append(Directive(r, c, "read"))
                else:
                    write_counter[c] += 1
                    todays.append(Directive(r, c, "write", f"c{c}w{write_counter[c]}"))
        for d in sorted(todays, key=lambda d: d.client):
            if d.op == "crash":
                crashed.add(d.client)
                trace(r, "round_start", "op_invoke", f"c{d.client}", {"kind": "crash"})
                result.realized_workload.append(d)
                continue
            invoke(r, d)

        # --- send phase ---------------------------------------------------
        outbox: list[tuple[str, int, object, object]] = []  # (kind, id, dest, msg)
        for c in range(n_clients):
            if c in crashed:
                continue
            cst, out = client_send(stamp_client_id(clients[c], c), r)
            clients[c] = cst
            for dest, msg in out.outgoing:
                outbox.append(("client", c, dest, msg))
        byz_senders: set[int] = set()
        for i in range(n):
            if behavior[i] is Behavior.BYZANTINE:
                byz_senders.add(i)
                out_msgs = strategy.byzantine_outgoing(
                    config, r, i, servers[i], rng_stream(seed, "byz", r, i))
                servers[i] = replace(servers[i], current_reads=frozenset())
                for dest, msg in out_msgs:
                    if _payload_sender_id(msg) != i or isinstance(msg, (Write, Read)):
                        # authenticated channels: a server cannot forge another
                        # sender's id nor pose as a client
                        trace(r, "send", "violation", f"s{i}",
                              {"reason": "forged sender rejected"})
                        continue
                    outbox.append(("server", i, dest, msg))
            else:
                st, out = server_send(servers[i], i)
                servers[i] = st
                for dest, msg in out.outgoing:
                    outbox.append(("server", i, dest, msg))
        if record_messages:
            for skind, sid, dest, msg in outbox:
                trace(r, "send", "send", f"{skind[0]}{sid}",
                      {"dest": dest, "msg": _msg_payload(msg)})

        # --- Buhrman in-send movement --------------------------------------
        post_occupied = pre_send
        if occ.moves:
            moved = set(pre_send)
            for src, dst in occ.moves:
                if src not in moved or dst in moved:
                    raise ConfigError(f"illegal agent move {src}->{dst} in round {r}")
                moved.discard(src)
                moved.add(dst)
                # Departing host: restored code reinitializes the round-local
                # buffers; the register value keeps the agent's corruption and
                # pending readers stay known.
                servers[src] = replace(
                    servers[src], echo_vals={}, current_writes={},
                    value=strategy.corrupt_value(
                        r, src, rng_stream(seed, "corrupt-leave", r, src),
                        servers[src].value))
                restored[src] = False
                trace(r, "send", "fault_move", "adversary", {"from": src, "to": dst})
            post_occupied = frozenset(moved)
            if len(post_occupied) > f:
                raise ConfigError("occupied set exceeds f after movement")

        # --- receive phase --------------------------------------------------
        server_inbox: dict[int, list] = {i: [] for i in range(n)}
        client_inbox: dict[int, list] = {c: [] for c in range(n_clients)}
        sent_count = 0
        delivered_count = 0
        for skind, sid, dest, msg in outbox:
            sent_count += 1
            if dest == SERVERS:
                for i in range(n):
                    server_inbox[i].append((skind, sid, msg))
                    delivered_count += 1
            else:
                if dest in client_inbox:
                    client_inbox[dest].append((skind, sid, msg))
                    delivered_count += 1
        # broadcasts fan out to all n servers; point-to-point delivers once
        expected = sum(n if dest == SERVERS else 1 for _, _, dest, _ in outbox)
        assert delivered_count == expected, "reliable-channel accounting broke"

        def sorted_inbox(entries):
            entries.sort(key=lambda e: (e[0], e[1]))
            return [(sid, msg) for _, sid, msg in entries]

        for i in range(n):
            inbox = sorted_inbox(server_inbox[i])
            if record_messages:
                for sid, msg in inbox:
                    trace(r, "receive", "deliver", f"s{i}",
                          {"from": sid, "msg": _msg_payload(msg)})
            servers[i] = server_receive(servers[i], inbox)
        for c in range(n_clients):
            if c in crashed:
                continue
            inbox = sorted_inbox(client_inbox[c])
            if record_messages:
                for sid, msg in inbox:
                    trace(r, "receive", "deliver", f"c{c}",
                          {"from": sid, "msg": _msg_payload(msg)})
            clients[c] = client_receive(clients[c], inbox)

        # --- compute phase ---------------------------------------------------
        for i in range(n):
            st, note = server_compute(servers[i], s_threshold)
            servers[i] = st
            if note.tied_values:
                trace(r, "compute", "state_transition", f"s{i}",
                      {"diagnostic": "echo threshold tie",
                       "tied": list(note.tied_values)})
            if note.adopted and i not in post_occupied:
                restored[i] = True
        for i in sorted(post_occupied):
            servers[i] = strategy.corrupt_state(
                r, i, rng_stream(seed, "corrupt-compute", r, i), servers[i])
            restored[i] = False
        for c in range(n_clients):
            if c in crashed:
                continue
            cst, response = client_compute(clients[c], r, s_threshold)
            clients[c] = cst
            if response is None:
                continue
            rec = pending_op.pop(c, None)
            if rec is None:
                continue
            if isinstance(response, WriteAck):
                rec.response_round = r
                rec.result = "write_confirmation"
                trace(r, "compute", "op_response", f"c{c}",
                      {"op_id": rec.op_id, "kind": "write"})
            elif isinstance(response, ReadOk):
                rec.response_round = r
                rec.result = response.value
                trace(r, "compute", "op_response", f"c{c}",
                      {"op_id": rec.op_id, "kind": "read", "value": response.value})
            elif isinstance(response, ReadFailed):
                rec.failed = True
                failure = {"round": r, "client": c, "op_id": rec.op_id,
                           "reply_counts": [[v, cnt] for v, cnt in response.counts],
                           "qualifying": list(response.qualifying),
                           "threshold": s_threshold}
                result.protocol_failures.append(failure)
                trace(r, "compute", "violation", f"c{c}",
                      dict(failure, reason="protocol_failure"))

        # --- end-of-round probe -----------------------------------------------
        modal, support = probe_agreement(servers, post_occupied)
        probe = {"round": r, "modal": modal, "support": support,
                 "non_faulty": n - len(post_occupied),
                 "pre_send_occupied": sorted(pre_send),
                 "byzantine_senders": sorted(byz_senders),
                 "end_occupied": sorted(post_occupied)}
        result.probes.append(probe)
        trace(r, "end", "probe", "engine", dict(probe))
        if config.admissible and support < n - f:
            violation = {"round": r, "kind": "agreement_probe", "modal": modal,
                         "support": support, "required": n - f}
            result.violations.append(violation)
            trace(r, "end", "violation", "engine", dict(violation))

        occupied = post_occupied

    result.crashed_clients = frozenset(crashed)
    return result


# ---------------------------------------------------------------------------
# Tightness demonstrations
# ---------------------------------------------------------------------------

HONEST_VALUE = "written-value"
FAKE_VALUE = "planted-value"


def tightness_demo(model: ModelId, f: int = 2, *, seed: int = 0) -> dict:
    """Reproduce the boundary (n = alpha*f) indistinguishability scenario.

    A value is written, then read; the scripted split-vote schedule balances
    the reader's reply multiset between the written and a planted value, so
    no selection rule can be correct and the read fails.
    """
    from .model import lookup
    from .adversary import SplitVote

    params = lookup(model)
    n = params.alpha * f
    config = SystemConfig(n=n, f=f, params=params)
    first_wave = frozenset(range(f))
    second_wave = frozenset(range(f, 2 * f))
    if model is ModelId.BUHRMAN:
        # With n = 2f the f occupied servers already balance the f correct
        # ones at the reader; the agents need not move at all.
        schedule = {1: first_wave}
    else:
        # Occupy one set while the value is written and the read requested,
        # then jump: the vacated servers are cured (silent, constrained, or
        # still Byzantine, per model) exactly when the replies go out.
        schedule = {1: first_wave, 3: second_wave}
    strategy = SplitVote(FAKE_VALUE, schedule)
    workload = [Directive(1, 0, "write", HONEST_VALUE), Directive(2, 1, "read")]
    res = run(config, strategy, workload, rounds=3, seed=seed, n_clients=2,
              allow_inadmissible=True)

    failure = res.protocol_failures[0] if res.protocol_failures else None
    counts = {v: c for v, c in (failure["reply_counts"] if failure else [])}
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], value_key(kv[0])))
    top_two = [c for _, c in ranked[:2]]
    repliers = sum(counts.values())
    return {
        "model": model.value,
        "n": n,
        "f": f,
        "threshold": config.selection_threshold,
        "reply_counts": ranked,
        "top_two_support": top_two,
        "silent": n - repliers,
        "failure_emitted": failure is not None,
        "history": [rec.as_dict() for rec in res.history],
    }
