"""Delay embeddings and causally conditioned transfer entropy.

TE(X -> Y || Z) = I(X^{i-1}; Y_i | Y^{i-1}, Z^{i-1}), with each infinite past
truncated to a uniform delay embedding. Extra conditioning on explicit lags
of other channels (single samples, contiguous blocks, late-past surrogates)
goes through :class:`ConditioningSet`.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .dynsys import TimeSeriesPanel
from .errors import InputError
from .knn import DEFAULT_K, JITTER_SCALE, CmiEstimate, SampleBlock, cmi_knn


@dataclass(frozen=True)
class EmbeddingSpec:
    """Uniform delay embedding: ``dim`` samples spaced ``lag`` apart.

    The source past uses lags ``horizon``, ``horizon + lag``, ...; the target
    past and any channel conditioned "in full" use lags 1, 1+lag, ...
    """

    dim: int = 2
    lag: int = 1
    horizon: int = 1

    def __post_init__(self):
        for name in ("dim", "lag", "horizon"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise InputError(f"embedding {name} must be a positive integer, got {value!r}")
            object.__setattr__(self, name, int(value))

    def past_lags(self, start: int = 1) -> tuple[int, ...]:
        return tuple(start + j * self.lag for j in range(self.dim))

    @property
    def source_lags(self) -> tuple[int, ...]:
        return self.past_lags(self.horizon)

    @property
    def target_lags(self) -> tuple[int, ...]:
        return self.past_lags(1)

    def label(self) -> str:
        return f"dim={self.dim};lag={self.lag};horizon={self.horizon}"


LagSpec = Optional[Sequence[int]]


class ConditioningSet:
    """Extra conditioning channels, each with an explicit lag list.

    A lag list of ``None`` means "the channel's embedded past" and is
    resolved against the :class:`EmbeddingSpec` in use. Entries are stored
    in canonical order (by channel name, lags ascending) so permuting the
    input never changes the embedding.
    """

    def __init__(self, entries: Union[Mapping[str, LagSpec], Iterable[tuple[str, LagSpec]], None] = None):
        if entries is None:
            entries = ()
        if isinstance(entries, Mapping):
            entries = entries.items()
        merged: dict[str, Optional[set]] = {}
        embedded: set[str] = set()
        for channel, lags in entries:
            channel = str(channel)
            if lags is None:
                embedded.add(channel)
                merged.setdefault(channel, set())
                continue
            lags = [int(l) for l in lags]
            if any(l < 1 for l in lags):
                raise InputError(f"conditioning lags must be >= 1, got {lags} for {channel!r}")
            merged.setdefault(channel, set()).update(lags)
        self._entries = tuple(
            (ch, tuple(sorted(merged[ch])), ch in embedded) for ch in sorted(merged)
        )

    @classmethod
    def of(cls, cond=None) -> "ConditioningSet":
        if isinstance(cond, ConditioningSet):
            return cond
        if isinstance(cond, str):
            return cls([(cond, None)])
        if cond is None:
            return cls()
        if isinstance(cond, Mapping):
            return cls(cond)
        return cls([(c, None) if isinstance(c, str) else c for c in cond])

    @property
    def channels(self) -> tuple[str, ...]:
        return tuple(ch for ch, _, _ in self._entries)

    def resolve(self, spec: EmbeddingSpec) -> tuple[tuple[str, tuple[int, ...]], ...]:
        out = []
        for ch, lags, embedded in self._entries:
            all_lags = set(lags)
            if embedded:
                all_lags.update(spec.target_lags)
            out.append((ch, tuple(sorted(all_lags))))
        return tuple(out)

    def union(self, other) -> "ConditioningSet":
        other = ConditioningSet.of(other)
        return ConditioningSet(list(self._raw()) + list(other._raw()))

    def _raw(self):
        for ch, lags, embedded in self._entries:
            if embedded:
                yield ch, None
            if lags:
                yield ch, lags

    def label(self) -> str:
        parts = []
        for ch, lags, embedded in self._entries:
            tag = ch
            if embedded:
                tag += "[past]"
            if lags:
                tag += ":" + ",".join(str(l) for l in lags)
            parts.append(tag)
        return "|".join(parts)

    def __eq__(self, other):
        return isinstance(other, ConditioningSet) and self._entries == other._entries

    def __hash__(self):
        return hash(self._entries)

    def __len__(self):
        return len(self._entries)

    def __repr__(self):
        return f"ConditioningSet({self.label()!r})"


@dataclass(frozen=True)
class EmbeddingPlan:
    """Which (channel, lag) coordinates go into each estimator group."""

    source: str
    target: str
    x: tuple[tuple[str, int], ...]
    y: tuple[tuple[str, int], ...]
    z: tuple[tuple[str, int], ...]

    @property
    def max_lag(self) -> int:
        return max(lag for _, lag in self.x + self.z)

    @property
    def dims(self) -> tuple[int, int, int]:
        return (len(self.x), len(self.y), len(self.z))


def plan_embedding(source: str, target: str, cond=None, spec: EmbeddingSpec = EmbeddingSpec()) -> EmbeddingPlan:
    if source == target:
        raise InputError("source and target must be different channels")
    cond = ConditioningSet.of(cond)
    target_lags = set(spec.target_lags)
    z_rest = []
    for ch, lags in cond.resolve(spec):
        if ch == source:
            raise InputError(f"cannot condition on the source channel {source!r}")
        if ch == target:
            target_lags.update(lags)
        elif lags:
            z_rest.extend((ch, l) for l in lags)
    z = tuple((target, l) for l in sorted(target_lags)) + tuple(z_rest)
    return EmbeddingPlan(
        source=source,
        target=target,
        x=tuple((source, l) for l in spec.source_lags),
        y=((target, 0),),
        z=z,
    )


def embed(
    panel: TimeSeriesPanel,
    source: str,
    target: str,
    cond=None,
    spec: EmbeddingSpec = EmbeddingSpec(),
    min_history: int = 0,
) -> SampleBlock:
    """Time-aligned rows ``[source past | target present | target past, conditioning]``.

    Row ``r`` corresponds to target index ``i = h + r`` where ``h`` is the
    largest lag in use (or ``min_history`` if larger), so every coordinate
    has time index strictly below ``i`` except the target's present.
    """
    plan = plan_embedding(source, target, cond, spec)
    panel.require(source, target, *(ch for ch, _ in plan.z))
    history = max(plan.max_lag, int(min_history))
    rows = panel.n - history
    if rows < 1:
        raise InputError(
            f"panel of length {panel.n} is too short: need at least {history + 1} samples"
        )
    cols = [panel[ch][history - lag: panel.n - lag] for ch, lag in plan.x + plan.y + plan.z]
    return SampleBlock(np.column_stack(cols), *plan.dims)


def transfer_entropy(
    panel: TimeSeriesPanel,
    source: str,
    target: str,
    cond=None,
    spec: EmbeddingSpec = EmbeddingSpec(),
    k: int = DEFAULT_K,
    seed: int = 0,
    normalize: bool = False,
    jitter_scale: float = JITTER_SCALE,
    min_history: int = 0,
    workers: int = 1,
) -> CmiEstimate:
    """Estimate TE(source -> target || cond) in bits."""
    cond = ConditioningSet.of(cond)
    block = embed(panel, source, target, cond, spec, min_history)
    est = cmi_knn(block, k, seed=seed, jitter_scale=jitter_scale, normalize=normalize,
                  workers=workers)
    meta = {
        "source": source,
        "target": target,
        "cond": cond.label(),
        "embedding": spec.label(),
        "history": max(plan_embedding(source, target, cond, spec).max_lag, int(min_history)),
    }
    return replace(est, meta=meta)


def surrogate_te(
    panel: TimeSeriesPanel,
    source: str,
    target: str,
    cond=None,
    spec: EmbeddingSpec = EmbeddingSpec(),
    k: int = DEFAULT_K,
    n_surrogates: int = 100,
    seed: int = 0,
    workers: int = 1,
) -> np.ndarray:
    """TE values after permuting the source-past rows, breaking source/target timing."""
    block = embed(panel, source, target, cond, spec)
    rng = np.random.default_rng(seed)
    xs = block.subspace("x")
    rest = block.points[:, block.x_dim:]
    values = np.empty(n_surrogates)
    for s in range(n_surrogates):
        perm = rng.permutation(block.n)
        shuffled = SampleBlock(np.hstack([xs[perm], rest]), *block.dims)
        values[s] = cmi_knn(shuffled, k, seed=seed, workers=workers).value
    return values


def exceeds_surrogates(value: float, surrogates: np.ndarray, percentile: float = 95.0) -> bool:
    return bool(value > np.percentile(surrogates, percentile))
