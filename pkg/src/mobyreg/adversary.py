"""Mobile-agent schedules and Byzantine behavior.

A strategy decides, per round, which servers the agents occupy (and, in the
Buhrman model, how they relocate during the send phase), what a corrupted
server's value becomes, and what messages a fully Byzantine server emits.
All decisions draw from deterministic per-(round, server) random streams so
any counterexample reproduces from its seed.

Channels stay authenticated: nothing here can forge a sender id, and servers
can only ever emit Echo/Reply messages under their own id.
"""

from __future__ import annotations

import enum
import hashlib
import random
from dataclasses import dataclass, field

from .model import ConfigError, ModelId, SystemConfig
from .protocol import SERVERS, Echo, Reply, ServerState, replace


class FaultStatus(enum.Enum):
    CORRECT = "correct"
    FAULTY = "faulty"
    CURED = "cured"


class Behavior(enum.Enum):
    HONEST = "honest"
    BYZANTINE = "byzantine"
    # Cured and aware of it: the protocol's own cured branch suppresses sends.
    CURED_SILENT_CAPABLE = "cured_silent_capable"
    # Cured, unaware, but in control of its sends: runs the normal protocol
    # over whatever corrupted state the agent left, so every recipient gets
    # the same content.
    CURED_CONSTRAINED = "cured_constrained"


def effective_behavior(model: ModelId, status: FaultStatus) -> Behavior:
    """Map a server's fault status to its power for the current round."""
    if status is FaultStatus.FAULTY:
        return Behavior.BYZANTINE
    if status is FaultStatus.CURED:
        if model is ModelId.SASAKI:
            return Behavior.BYZANTINE  # acts Byzantine one extra round
        if model is ModelId.BONNET:
            return Behavior.CURED_CONSTRAINED
        return Behavior.CURED_SILENT_CAPABLE  # Garay, Buhrman
    return Behavior.HONEST


def rng_stream(seed: int, *key) -> random.Random:
    """Deterministic generator for one named decision stream."""
    digest = hashlib.sha256(repr((seed,) + key).encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


@dataclass(frozen=True)
class Occupancy:
    """Agent positions for one round.

    ``pre_send`` is the occupied set when the send phase starts.  ``moves``
    are (src, dst) relocations during the send phase and may be nonempty only
    in the Buhrman model, where agents travel with the messages.
    """

    pre_send: frozenset
    moves: tuple = ()

    @property
    def post(self) -> frozenset:
        occ = set(self.pre_send)
        for src, dst in self.moves:
            occ.discard(src)
            occ.add(dst)
        return frozenset(occ)


def _paired_moves(prev: frozenset, target: frozenset) -> tuple:
    leaving = sorted(prev - target)
    arriving = sorted(target - prev)
    return tuple(zip(leaving, arriving))


class Strategy:
    """Base adversary: subclasses pick the per-round target occupation."""

    name = "base"
    fake_value: object = None   # fixed corruption value; None means random token
    corrupts: bool = True       # False leaves occupied state untouched

    def target_set(self, config: SystemConfig, round_no: int,
                   prev: frozenset, rng: random.Random) -> frozenset:
        raise NotImplementedError

    def occupancy(self, config: SystemConfig, round_no: int,
                  prev: frozenset, rng: random.Random) -> Occupancy:
        target = frozenset(self.target_set(config, round_no, prev, rng))
        if len(target) > config.f:
            raise ConfigError(
                f"strategy {self.name!r} occupies {len(target)} servers in "
                f"round {round_no}, but f={config.f}")
        if any(s < 0 or s >= config.n for s in target):
            raise ConfigError(f"strategy {self.name!r} targets an unknown server")
        if config.params.model is ModelId.BUHRMAN and round_no > 1:
            # Agents only relocate with the messages: the pre-send set is
            # last round's set and the difference becomes in-send movement.
            return Occupancy(pre_send=prev, moves=_paired_moves(prev, target))
        return Occupancy(pre_send=target)

    def corrupt_value(self, round_no: int, server: int,
                      rng: random.Random, current: object) -> object:
        """The value an occupying (or departing) agent leaves behind."""
        if not self.corrupts:
            return current
        if self.fake_value is not None:
            return self.fake_value
        return f"byz-{round_no}-s{server}-{rng.randrange(1 << 30)}"

    def corrupt_state(self, round_no: int, server: int,
                      rng: random.Random, state: ServerState) -> ServerState:
        """Corrupt an occupied server's local variables.

        Only the register value is rewritten: the per-round buffers are
        reinitialized by the restored code anyway, and bookkeeping such as
        pending reads is kept so the adversary can answer readers in kind.
        """
        return replace(state, value=self.corrupt_value(round_no, server, rng, state.value))

    def byzantine_outgoing(self, config: SystemConfig, round_no: int, server: int,
                           state: ServerState, rng: random.Random) -> tuple:
        """Send-phase output of a fully Byzantine server.

        Per-recipient equivocation is allowed; the default pushes one wrong
        value into the echo exchange and to every pending reader.  Sender
        identity is always the server's own (the network would reject a
        forgery).
        """
        wrong = self.corrupt_value(round_no, server, rng, state.value)
        outgoing = [(SERVERS, Echo(wrong, server))]
        for cid in sorted(state.current_reads):
            outgoing.append((cid, Reply(wrong, server)))
        return tuple(outgoing)


class NoFaults(Strategy):
    name = "none"
    corrupts = False

    def target_set(self, config, round_no, prev, rng):
        return frozenset()


class Stationary(Strategy):
    """Agents sit on a fixed set of servers."""

    name = "stationary"

    def __init__(self, servers=None, fake_value=None):
        self.servers = None if servers is None else frozenset(servers)
        self.fake_value = fake_value

    def target_set(self, config, round_no, prev, rng):
        if self.servers is not None:
            return self.servers
        return frozenset(range(config.f))


class Sweep(Strategy):
    """Agents rotate deterministically through the servers, f at a time."""

    name = "sweep"

    def target_set(self, config, round_no, prev, rng):
        base = (round_no - 1) * config.f
        return frozenset((base + k) % config.n for k in range(config.f))


class RandomWalk(Strategy):
    """Agents jump to a fresh uniformly random set of f servers each round."""

    name = "random"

    def target_set(self, config, round_no, prev, rng):
        return frozenset(rng.sample(range(config.n), config.f))


class SplitVote(Strategy):
    """Scripted occupation pushing a single alternative value.

    Encodes the indistinguishability constructions from the impossibility
    proofs: every occupied server presents ``fake_value`` so that a reader at
    the resilience boundary sees two values with equal support.
    """

    name = "split_vote"

    def __init__(self, fake_value: object, schedule: dict):
        if fake_value is None:
            raise ConfigError("split_vote needs a non-default fake value")
        self.fake_value = fake_value
        self.schedule = {int(r): frozenset(s) for r, s in schedule.items()}

    def target_set(self, config, round_no, prev, rng):
        if not self.schedule:
            return frozenset()
        applicable = [r for r in self.schedule if r <= round_no]
        if not applicable:
            return frozenset()
        return self.schedule[max(applicable)]

    def byzantine_outgoing(self, config, round_no, server, state, rng):
        # Stay silent toward the servers (a Byzantine option): the proof
        # scenarios only need the reader's reply multiset balanced, and at
        # the boundary even f planted echoes would clear the (degenerate)
        # maintenance threshold and disturb correct servers.
        return tuple((cid, Reply(self.fake_value, server))
                     for cid in sorted(state.current_reads))


class Scripted(Strategy):
    """Explicit round -> occupied-set plan (missing rounds: keep the last)."""

    name = "scripted"

    def __init__(self, schedule: dict, fake_value=None):
        self.schedule = {int(r): frozenset(s) for r, s in schedule.items()}
        self.fake_value = fake_value

    def target_set(self, config, round_no, prev, rng):
        applicable = [r for r in self.schedule if r <= round_no]
        if not applicable:
            return frozenset()
        return self.schedule[max(applicable)]


STRATEGIES = {
    "none": NoFaults,
    "stationary": Stationary,
    "sweep": Sweep,
    "random": RandomWalk,
}


def make_strategy(name: str) -> Strategy:
    try:
        return STRATEGIES[name.strip().lower()]()
    except KeyError:
        raise ConfigError(f"unknown adversary strategy {name!r} (expected one of "
                          f"{', '.join(STRATEGIES)})") from None
