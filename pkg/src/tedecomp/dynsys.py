"""Coupled nonlinear stochastic difference equations used as test signals.

Each channel evolves as a sum of lagged, nonlinearly transformed values of
other channels (or itself) plus independent additive noise::

    V_i = sum_t  coefficient_t * f_t(U_{i - lag_t}) + W^V_i

The four-channel system with X, Y, Z, S couplings and the small-coupling,
large-noise regime for S are provided as ready-made configurations.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import InputError, SimulationError


def _xexp(x):
    return x * np.exp(-x * x)


NONLINEARITIES: dict[str, Callable[[float], float]] = {
    "identity": lambda x: x,
    "tanh": np.tanh,
    "sin": np.sin,
    "square": lambda x: x * x,
    "xexp": _xexp,
}

NOISE_KINDS = ("gaussian", "uniform")

DEFAULT_BURN_IN = 1000


@dataclass(frozen=True)
class CouplingTerm:
    source: str
    target: str
    lag: int
    coefficient: float
    function_id: str = "identity"

    def __post_init__(self):
        if int(self.lag) != self.lag or self.lag < 1:
            raise InputError(f"coupling lag must be a positive integer, got {self.lag!r}")
        if self.function_id not in NONLINEARITIES:
            raise InputError(
                f"unknown function {self.function_id!r}; "
                f"choose from {sorted(NONLINEARITIES)}"
            )
        object.__setattr__(self, "lag", int(self.lag))
        object.__setattr__(self, "coefficient", float(self.coefficient))


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "gaussian"
    variance: float = 1.0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise InputError(f"unknown noise kind {self.kind!r}; choose from {NOISE_KINDS}")
        if not np.isfinite(self.variance) or self.variance < 0:
            raise InputError(f"noise variance must be >= 0, got {self.variance!r}")
        object.__setattr__(self, "variance", float(self.variance))

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "gaussian":
            return rng.normal(0.0, np.sqrt(self.variance), size)
        half_width = np.sqrt(3.0 * self.variance)
        return rng.uniform(-half_width, half_width, size)


@dataclass(frozen=True)
class DynSysConfig:
    channels: tuple[str, ...]
    terms: tuple[CouplingTerm, ...] = ()
    noise: dict = field(default_factory=dict)
    n_samples: int = 10_000
    burn_in: int = DEFAULT_BURN_IN
    seed: int = 0

    def __post_init__(self):
        channels = tuple(self.channels)
        if not channels:
            raise InputError("at least one channel is required")
        if len(set(channels)) != len(channels):
            raise InputError(f"duplicate channel names: {channels}")
        terms = tuple(self.terms)
        for term in terms:
            for name in (term.source, term.target):
                if name not in channels:
                    raise InputError(f"coupling refers to undefined channel {name!r}")
        noise = {}
        for name, spec in dict(self.noise).items():
            if name not in channels:
                raise InputError(f"noise given for undefined channel {name!r}")
            noise[name] = spec if isinstance(spec, NoiseSpec) else NoiseSpec(*spec)
        for name in channels:
            noise.setdefault(name, NoiseSpec())
        if self.n_samples < 1:
            raise InputError("n_samples must be >= 1")
        max_lag = max((t.lag for t in terms), default=0)
        if self.burn_in < max_lag:
            raise InputError(f"burn_in {self.burn_in} is shorter than the maximum lag {max_lag}")
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "noise", noise)
        object.__setattr__(self, "n_samples", int(self.n_samples))
        object.__setattr__(self, "burn_in", int(self.burn_in))
        object.__setattr__(self, "seed", int(self.seed))

    def with_(self, **changes) -> "DynSysConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class TimeSeriesPanel:
    """Equal-length real-valued sequences, one per named channel."""

    channels: tuple[str, ...]
    data: np.ndarray  # shape (n_channels, n)
    sample_rate: Optional[float] = None

    def __post_init__(self):
        channels = tuple(self.channels)
        data = np.array(self.data, dtype=float)
        if data.ndim != 2 or data.shape[0] != len(channels):
            raise InputError(
                f"data must have shape (n_channels={len(channels)}, n), got {data.shape}"
            )
        if len(set(channels)) != len(channels):
            raise InputError(f"duplicate channel names: {channels}")
        if not np.all(np.isfinite(data)):
            raise InputError("panel contains non-finite values")
        data.setflags(write=False)
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "data", data)

    @property
    def n(self) -> int:
        return self.data.shape[1]

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self.data[self.channels.index(name)]
        except ValueError:
            raise InputError(f"unknown channel {name!r}; have {list(self.channels)}") from None

    def require(self, *names: str) -> None:
        missing = [n for n in names if n not in self.channels]
        if missing:
            raise InputError(f"unknown channel(s) {missing}; have {list(self.channels)}")

    def select(self, names) -> "TimeSeriesPanel":
        names = tuple(names)
        self.require(*names)
        rows = [self.channels.index(n) for n in names]
        return TimeSeriesPanel(names, self.data[rows], self.sample_rate)


def channel_rng(seed: int, channel: str) -> np.random.Generator:
    """Noise stream for one channel, keyed by name so streams stay put when channels are added."""
    key = zlib.crc32(channel.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(key,)))


def simulate(config: DynSysConfig) -> TimeSeriesPanel:
    """Iterate the update equations and return the post-burn-in samples."""
    channels = config.channels
    index = {name: i for i, name in enumerate(channels)}
    total = config.burn_in + config.n_samples
    noise = np.empty((len(channels), total))
    for name, i in index.items():
        noise[i] = config.noise[name].draw(channel_rng(config.seed, name), total)

    by_target: list[list[tuple[int, int, float, Callable]]] = [[] for _ in channels]
    for t in config.terms:
        by_target[index[t.target]].append(
            (index[t.source], t.lag, t.coefficient, NONLINEARITIES[t.function_id])
        )

    x = np.zeros((len(channels), total))
    with np.errstate(over="ignore", invalid="ignore"):
        _iterate(x, noise, by_target, channels, config.burn_in)
    return TimeSeriesPanel(channels, x[:, config.burn_in:])


def _iterate(x, noise, by_target, channels, burn_in) -> None:
    for step in range(x.shape[1]):
        for ci, terms in enumerate(by_target):
            value = noise[ci, step]
            for src, lag, coef, f in terms:
                if step >= lag:
                    value += coef * f(x[src, step - lag])
            if not np.isfinite(value):
                raise SimulationError(channels[ci], step - burn_in, value)
            x[ci, step] = value


# Default couplings for the X, Y, Z, S system. Values are free choices within
# the stable regime; the S couplings are overwritten by theorem2_config.
PAPER_COEFFICIENTS = {
    ("X", "X", 1): 0.5,
    ("Z", "X", 2): 0.8,
    ("S", "X", 1): 0.5,
    ("Y", "Y", 1): 0.5,
    ("X", "Y", 2): 0.3,
    ("Z", "Y", 2): 0.8,
    ("S", "Y", 1): 0.5,
    ("Z", "Z", 1): 0.9,
    ("S", "S", 1): 0.3,
    ("S", "S", 2): 0.2,
}


def paper_system(
    n_samples: int = 10_000,
    seed: int = 0,
    function_id: str = "identity",
    noise_kind: str = "gaussian",
    coefficients: Optional[dict] = None,
    burn_in: int = DEFAULT_BURN_IN,
) -> DynSysConfig:
    """Four-channel X, Y, Z, S system with unit noise in every channel."""
    coefs = dict(PAPER_COEFFICIENTS)
    coefs.update(coefficients or {})
    terms = tuple(
        CouplingTerm(src, dst, lag, coef, function_id)
        for (src, dst, lag), coef in coefs.items()
    )
    channels = ("X", "Y", "Z", "S")
    return DynSysConfig(
        channels=channels,
        terms=terms,
        noise={c: NoiseSpec(noise_kind, 1.0) for c in channels},
        n_samples=n_samples,
        burn_in=burn_in,
        seed=seed,
    )


def theorem2_config(
    alpha: float,
    c: float,
    base: DynSysConfig,
    s: str = "S",
    x: str = "X",
    y: str = "Y",
) -> DynSysConfig:
    """Set every S coupling to ``alpha`` and the S noise variance to ``c / alpha**2``.

    The affected couplings are S->S at lags 1 and 2, S->X at lag 1 and S->Y
    at lag 1. Terms absent from ``base`` are added with the identity function.
    """
    if not alpha > 0 or not c > 0:
        raise InputError(f"alpha and c must be positive, got alpha={alpha!r}, c={c!r}")
    for name in (s, x, y):
        if name not in base.channels:
            raise InputError(f"base config lacks channel {name!r}")
    wanted = {(s, s, 1), (s, s, 2), (s, x, 1), (s, y, 1)}
    terms, seen = [], set()
    for t in base.terms:
        key = (t.source, t.target, t.lag)
        if key in wanted:
            t = replace(t, coefficient=float(alpha))
            seen.add(key)
        terms.append(t)
    for key in sorted(wanted - seen):
        terms.append(CouplingTerm(*key, coefficient=float(alpha)))
    noise = dict(base.noise)
    noise[s] = NoiseSpec(noise[s].kind, c / alpha**2)
    return replace(base, terms=tuple(terms), noise=noise)
