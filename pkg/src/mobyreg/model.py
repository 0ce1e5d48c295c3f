"""Fault-model parameter table and resilience arithmetic.

Four mobile-Byzantine fault models are supported, differing in when agents
move and in what a vacated ("cured") server knows and can do.  Each model
carries a resilience denominator ``alpha`` (the system is usable only when
n > alpha * f) and a vote discount ``beta`` (a value is selected once it is
reported by at least n - beta * f distinct servers).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass


class ConfigError(ValueError):
    """A system or experiment configuration is malformed or inadmissible."""


class ModelId(enum.Enum):
    """The four mobile-Byzantine fault models."""

    GARAY = "garay"        # M1: moves at round start, cured servers know it
    BONNET = "bonnet"      # M2: moves at round start, no cure awareness, constrained cured sends
    SASAKI = "sasaki"      # M3: moves at round start, cured servers Byzantine one extra round
    BUHRMAN = "buhrman"    # M4: agents move with the messages, cured servers know it

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, text: str) -> "ModelId":
        t = text.strip().lower()
        aliases = {"m1": cls.GARAY, "m2": cls.BONNET, "m3": cls.SASAKI, "m4": cls.BUHRMAN}
        if t in aliases:
            return aliases[t]
        for member in cls:
            if member.value == t:
                return member
        raise ConfigError(f"unknown fault model {text!r} (expected one of "
                          f"{', '.join(m.value for m in cls)} or m1..m4)")


@dataclass(frozen=True)
class ModelParams:
    """Per-model tuning: resilience denominator, vote discount, cure oracle."""

    model: ModelId
    alpha: int
    beta: int
    oracle_enabled: bool


_TABLE: dict[ModelId, ModelParams] = {
    ModelId.GARAY: ModelParams(ModelId.GARAY, alpha=3, beta=2, oracle_enabled=True),
    ModelId.BONNET: ModelParams(ModelId.BONNET, alpha=4, beta=2, oracle_enabled=False),
    ModelId.SASAKI: ModelParams(ModelId.SASAKI, alpha=4, beta=2, oracle_enabled=False),
    ModelId.BUHRMAN: ModelParams(ModelId.BUHRMAN, alpha=2, beta=1, oracle_enabled=True),
}


def lookup(model: ModelId) -> ModelParams:
    """Return the parameter row for a fault model.  Total function."""
    return _TABLE[model]


def admissible(n: int, f: int, params: ModelParams) -> bool:
    """True iff the server count clears the model's lower bound (n > alpha*f)."""
    return n > params.alpha * f


def threshold(n: int, f: int, params: ModelParams) -> int:
    """Selection threshold s = n - beta*f.

    Rejects inadmissible configurations; simulation code that deliberately
    runs at or below the bound must compute the raw formula itself (see
    ``SystemConfig.selection_threshold``).
    """
    if not admissible(n, f, params):
        raise ConfigError(
            f"inadmissible configuration: n={n} <= alpha*f={params.alpha * f} "
            f"for model {params.model}")
    return n - params.beta * f


@dataclass(frozen=True)
class SystemConfig:
    """Server count, fault budget, and model parameters for one system."""

    n: int
    f: int
    params: ModelParams

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ConfigError(f"n must be >= 1, got {self.n}")
        if self.f < 0:
            raise ConfigError(f"f must be >= 0, got {self.f}")

    @property
    def admissible(self) -> bool:
        return admissible(self.n, self.f, self.params)

    @property
    def selection_threshold(self) -> int:
        """Raw s = n - beta*f, with no admissibility gate (for bound demos)."""
        return self.n - self.params.beta * self.f

    def threshold(self) -> int:
        """Checked selection threshold; raises ConfigError when inadmissible."""
        return threshold(self.n, self.f, self.params)


def make_config(model: ModelId | str, n: int, f: int) -> SystemConfig:
    mid = model if isinstance(model, ModelId) else ModelId.parse(model)
    return SystemConfig(n=n, f=f, params=lookup(mid))
