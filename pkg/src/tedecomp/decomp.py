"""Synergy- and redundancy-dominated effects of a conditioning series on a TE link.

For a series S and a link X -> Y || Z, candidate subsets of S's lagged
samples are scored by how much conditioning on them raises (synergy) or
lowers (redundancy) the transfer entropy::

    I_syn = max_sub TE(X -> Y || Z, sub) - TE(X -> Y || Z)
    I_red = TE(X -> Y || Z) - min_sub TE(X -> Y || Z, sub)

In bias-matched mode the reference term is conditioned on |sub| samples of
S from the late past (lags T-1, ..., T-|sub|) so both estimates see the same
dimensionality.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dynsys import TimeSeriesPanel
from .errors import ComparisonError, InputError, PolicyError
from .knn import DEFAULT_K
from .te import ConditioningSet, EmbeddingSpec, plan_embedding, transfer_entropy

DEFAULT_DEAD_BAND = 0.03

Subset = tuple[int, ...]


@dataclass(frozen=True)
class SubsetSearchPolicy:
    candidate_lags: tuple[int, ...] = tuple(range(1, 9))
    mode: str = "exhaustive"
    max_subset_size: int = 3
    exhaustive_limit: int = 12

    def __post_init__(self):
        lags = tuple(sorted({int(l) for l in self.candidate_lags}))
        if not lags:
            raise PolicyError("candidate_lags must be nonempty")
        if lags[0] < 1:
            raise PolicyError(f"candidate lags must be >= 1, got {lags}")
        if self.mode not in ("exhaustive", "greedy"):
            raise PolicyError(f"mode must be 'exhaustive' or 'greedy', got {self.mode!r}")
        if self.max_subset_size < 0:
            raise PolicyError("max_subset_size must be >= 0")
        object.__setattr__(self, "candidate_lags", lags)
        object.__setattr__(self, "max_subset_size", min(int(self.max_subset_size), len(lags)))

    def exhaustive_subsets(self) -> list[Subset]:
        if len(self.candidate_lags) > self.exhaustive_limit:
            raise PolicyError(
                f"{len(self.candidate_lags)} candidate lags exceed the exhaustive limit "
                f"of {self.exhaustive_limit}; use mode='greedy' or fewer lags"
            )
        out = []
        for size in range(self.max_subset_size + 1):
            out.extend(itertools.combinations(self.candidate_lags, size))
        return out

    def label(self) -> str:
        lags = ",".join(str(l) for l in self.candidate_lags)
        return f"lags={lags};mode={self.mode};max_size={self.max_subset_size}"


def default_late_offset(policy: SubsetSearchPolicy) -> int:
    return max(50, 10 * max(policy.candidate_lags))


def late_past_lags(size: int, T: int) -> Subset:
    """Lags of S_{i-T+1}, ..., S_{i-T+size}."""
    return tuple(T - j for j in range(1, size + 1))


def _order_key(subset: Subset):
    return (len(subset), subset)


@dataclass
class DecompResult:
    i_syn_hat: Optional[float]
    i_red_hat: Optional[float]
    best_syn_subset: Optional[Subset]
    best_red_subset: Optional[Subset]
    per_subset: list = field(default_factory=list)
    bias_matched: bool = False
    late_past_offset: Optional[int] = None
    te_baseline: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def net(self) -> Optional[float]:
        if self.i_syn_hat is None or self.i_red_hat is None:
            return None
        return self.i_red_hat - self.i_syn_hat


class SubsetScorer:
    """Caches conditioned TE values for subsets of a conditioning channel.

    Every estimate shares one row window (set by the largest lag any
    candidate or late-past surrogate needs) so scores are comparable.
    """

    def __init__(self, panel: TimeSeriesPanel, source: str, target: str, cond_z,
                 s_channel: str, spec: EmbeddingSpec = EmbeddingSpec(), k: int = DEFAULT_K,
                 seed: int = 0, normalize: bool = False, bias_matched: bool = False,
                 late_past_offset: Optional[int] = None, max_lag: int = 1,
                 max_size: int = 0, threads: int = 1, workers: int = 1):
        self.base_cond = ConditioningSet.of(cond_z)
        names = {source, target, s_channel}
        if len(names) != 3:
            raise InputError("source, target and conditioning series must be distinct")
        if s_channel in self.base_cond.channels:
            raise InputError(f"{s_channel!r} is both the searched series and a fixed conditioner")
        panel.require(source, target, s_channel, *self.base_cond.channels)
        plan_embedding(source, target, self.base_cond, spec)
        self.panel = panel
        self.source, self.target, self.s = source, target, s_channel
        self.spec, self.k, self.seed, self.normalize = spec, k, seed, normalize
        self.bias_matched = bias_matched
        self.T = late_past_offset
        history = max_lag
        if bias_matched:
            if self.T is None:
                raise InputError("bias-matched mode needs a late-past offset T")
            if max_size and self.T < 10 * max_lag:
                raise InputError(f"T={self.T} must be at least 10x the largest lag {max_lag}")
            history = max(history, self.T - 1)
        self.history = history
        if panel.n - history <= k:
            raise InputError(
                f"panel of length {panel.n} is too short for history {history} and k={k}"
            )
        self.threads = max(1, int(threads))
        self.workers = workers
        self._cache: dict[Subset, float] = {}

    def _te(self, lags: Subset) -> float:
        cond = self.base_cond.union({self.s: lags}) if lags else self.base_cond
        return transfer_entropy(
            self.panel, self.source, self.target, cond, self.spec, self.k,
            seed=self.seed, normalize=self.normalize, min_history=self.history,
            workers=self.workers,
        ).value

    def te_many(self, subsets: Sequence[Subset]) -> list[float]:
        todo = [s for s in dict.fromkeys(subsets) if s not in self._cache]
        if self.threads > 1 and len(todo) > 1:
            with ThreadPoolExecutor(self.threads) as pool:
                values = list(pool.map(self._te, todo))
        else:
            values = [self._te(s) for s in todo]
        self._cache.update(zip(todo, values))
        return [self._cache[s] for s in subsets]

    def te(self, subset: Subset) -> float:
        return self.te_many([subset])[0]

    def reference(self, subset: Subset) -> float:
        """The term a subset's conditioned TE is compared against."""
        if self.bias_matched and subset:
            return self.te(late_past_lags(len(subset), self.T))
        return self.te(())

    def references(self, subsets: Sequence[Subset]) -> list[float]:
        keys = [late_past_lags(len(s), self.T) if self.bias_matched and s else () for s in subsets]
        return self.te_many(keys)

    def meta(self) -> dict:
        return {
            "source": self.source,
            "target": self.target,
            "cond": self.base_cond.label(),
            "s_channel": self.s,
            "embedding": self.spec.label(),
            "k": self.k,
            "seed": self.seed,
            "normalized": self.normalize,
            "history": self.history,
        }


def _scores(scorer: SubsetScorer, subsets: Sequence[Subset]):
    te = scorer.te_many(subsets)
    ref = scorer.references(subsets)
    return te, ref


def _argbest(subsets, scores) -> tuple[Subset, float]:
    best, best_val = None, -np.inf
    for sub, val in sorted(zip(subsets, scores), key=lambda p: _order_key(p[0])):
        if val > best_val:
            best, best_val = sub, val
    return best, best_val


def _greedy(scorer: SubsetScorer, policy: SubsetSearchPolicy, sign: float):
    """Forward selection maximising ``sign * (TE(sub) - reference(sub))``."""
    current: Subset = ()
    visited = [()]
    for _ in range(policy.max_subset_size):
        options = [tuple(sorted(current + (l,))) for l in policy.candidate_lags if l not in current]
        if not options:
            break
        te, ref = _scores(scorer, options)
        current, _ = _argbest(options, [sign * (a - b) for a, b in zip(te, ref)])
        visited.append(current)
    return visited


def _search(scorer: SubsetScorer, policy: SubsetSearchPolicy, side: str):
    sign = 1.0 if side == "syn" else -1.0
    if policy.mode == "exhaustive":
        subsets = policy.exhaustive_subsets()
    else:
        subsets = _greedy(scorer, policy, sign)
    te, ref = _scores(scorer, subsets)
    best, value = _argbest(subsets, [sign * (a - b) for a, b in zip(te, ref)])
    return best, value, subsets


def _scorer_for(panel, source, target, cond_z, s_channel, policy, spec, k, seed,
                normalize, bias_matched, T, threads, workers):
    if bias_matched and T is None:
        T = default_late_offset(policy)
    return SubsetScorer(
        panel, source, target, cond_z, s_channel, spec, k, seed=seed, normalize=normalize,
        bias_matched=bias_matched, late_past_offset=T if bias_matched else None,
        max_lag=max(policy.candidate_lags),
        max_size=policy.max_subset_size, threads=threads, workers=workers,
    )


def _table(scorer: SubsetScorer, subsets) -> list[dict]:
    rows = []
    for sub in sorted(set(subsets), key=_order_key):
        te, ref = scorer.te(sub), scorer.reference(sub)
        rows.append({
            "subset": sub,
            "te": te,
            "reference": ref,
            "syn_score": te - ref,
            "red_score": ref - te,
        })
    return rows


def decompose(
    panel: TimeSeriesPanel,
    source: str,
    target: str,
    cond_z,
    s_channel: str,
    policy: SubsetSearchPolicy = SubsetSearchPolicy(),
    spec: EmbeddingSpec = EmbeddingSpec(),
    k: int = DEFAULT_K,
    seed: int = 0,
    normalize: bool = False,
    bias_matched: bool = False,
    T: Optional[int] = None,
    sides: Sequence[str] = ("syn", "red"),
    threads: int = 1,
    workers: int = 1,
) -> DecompResult:
    """Search subsets of ``s_channel``'s lags for the largest synergy and redundancy scores."""
    scorer = _scorer_for(panel, source, target, cond_z, s_channel, policy, spec, k, seed,
                         normalize, bias_matched, T, threads, workers)
    found = {}
    evaluated = []
    for side in sides:
        best, value, subsets = _search(scorer, policy, side)
        found[side] = (best, value)
        evaluated.extend(subsets)
    syn = found.get("syn", (None, None))
    red = found.get("red", (None, None))
    meta = scorer.meta()
    meta["policy"] = policy.label()
    return DecompResult(
        i_syn_hat=syn[1],
        i_red_hat=red[1],
        best_syn_subset=syn[0],
        best_red_subset=red[0],
        per_subset=_table(scorer, evaluated),
        bias_matched=bias_matched,
        late_past_offset=scorer.T,
        te_baseline=scorer.te(()),
        meta=meta,
    )


def isyn_hat(panel, source, target, cond_z, s_channel, policy=SubsetSearchPolicy(),
             spec=EmbeddingSpec(), k=DEFAULT_K, **kwargs) -> DecompResult:
    return decompose(panel, source, target, cond_z, s_channel, policy, spec, k,
                     sides=("syn",), **kwargs)


def ired_hat(panel, source, target, cond_z, s_channel, policy=SubsetSearchPolicy(),
             spec=EmbeddingSpec(), k=DEFAULT_K, **kwargs) -> DecompResult:
    return decompose(panel, source, target, cond_z, s_channel, policy, spec, k,
                     sides=("red",), **kwargs)


def bias_matched_pair(
    panel: TimeSeriesPanel,
    source: str,
    target: str,
    cond_z,
    s_channel: str,
    subset: Sequence[int],
    T: int,
    spec: EmbeddingSpec = EmbeddingSpec(),
    k: int = DEFAULT_K,
    seed: int = 0,
    normalize: bool = False,
    workers: int = 1,
):
    """TE conditioned on ``subset`` of S, and on an equally sized late-past block.

    Returns ``(conditioned, surrogate_conditioned)`` as :class:`CmiEstimate`.
    Both are computed over the same rows.
    """
    subset = tuple(sorted({int(l) for l in subset}))
    max_lag = max(subset) if subset else 1
    if subset and T < 10 * max_lag:
        raise InputError(f"T={T} must be at least 10x the largest subset lag {max_lag}")
    history = max(T - 1, max_lag)
    if panel.n - history <= k:
        raise InputError(f"panel of length {panel.n} is too short for T={T}")
    base = ConditioningSet.of(cond_z)
    kwargs = dict(spec=spec, k=k, seed=seed, normalize=normalize,
                  min_history=history, workers=workers)
    cond = base.union({s_channel: subset}) if subset else base
    first = transfer_entropy(panel, source, target, cond, **kwargs)
    if not subset:
        return first, first
    late = base.union({s_channel: late_past_lags(len(subset), T)})
    second = transfer_entropy(panel, source, target, late, **kwargs)
    return first, second


def net_effect(result: DecompResult, other: Optional[DecompResult] = None,
               dead_band: float = DEFAULT_DEAD_BAND) -> tuple[float, str]:
    """``I_red - I_syn`` with a label; ``other`` supplies the missing side if split."""
    if other is not None:
        if result.meta != other.meta or result.bias_matched != other.bias_matched \
                or result.late_past_offset != other.late_past_offset:
            raise ComparisonError("the two sides were computed with different settings")
        syn = result.i_syn_hat if result.i_syn_hat is not None else other.i_syn_hat
        red = result.i_red_hat if result.i_red_hat is not None else other.i_red_hat
    else:
        syn, red = result.i_syn_hat, result.i_red_hat
    if syn is None or red is None:
        raise ComparisonError("both the synergy and the redundancy side are required")
    net = float(red - syn)
    if abs(net) <= dead_band:
        label = "balanced"
    elif net > 0:
        label = "redundancy-dominated"
    else:
        label = "synergy-dominated"
    return net, label


@dataclass
class DtauRow:
    tau: int
    value: float
    baseline: float
    n_pairs: int
    n_conditioners: int


def dtau_scan(
    panel: TimeSeriesPanel,
    pair_set: Sequence[str],
    cond_channels: Sequence[str],
    tau_range: Sequence[int],
    spec: EmbeddingSpec = EmbeddingSpec(),
    k: int = DEFAULT_K,
    seed: int = 0,
    normalize: bool = False,
    threads: int = 1,
    workers: int = 1,
) -> list[DtauRow]:
    """Pair-summed, conditioner-averaged TE given one delayed conditioner sample.

    For each tau: mean over conditioners l of the sum over ordered pairs
    (i, j), i != j, of TE(i -> j || l at lag tau). ``baseline`` is the same
    pair sum without the delayed sample.
    """
    pairs = list(dict.fromkeys(pair_set))
    conds = list(dict.fromkeys(cond_channels))
    taus = [int(t) for t in tau_range]
    if len(pairs) < 2:
        raise InputError("need at least two channels in the pair set")
    if not conds:
        raise InputError("need at least one conditioning channel")
    if not taus or min(taus) < 1:
        raise InputError("tau values must be positive")
    if set(pairs) & set(conds):
        raise InputError("conditioning channels must not be in the pair set")
    panel.require(*pairs, *conds)
    ordered = [(i, j) for i in pairs for j in pairs if i != j]
    history = max(max(taus), spec.horizon + (spec.dim - 1) * spec.lag)

    def te(task):
        (i, j), cond = task
        return transfer_entropy(panel, i, j, cond, spec, k, seed=seed, normalize=normalize,
                                min_history=history, workers=workers).value

    tasks = [(pair, None) for pair in ordered]
    tasks += [(pair, {l: [tau]}) for tau in taus for l in conds for pair in ordered]
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            values = list(pool.map(te, tasks))
    else:
        values = [te(t) for t in tasks]

    baseline = float(sum(values[: len(ordered)]))
    rest = np.array(values[len(ordered):]).reshape(len(taus), len(conds), len(ordered))
    return [
        DtauRow(tau, float(rest[t].sum(axis=1).mean()), baseline, len(ordered), len(conds))
        for t, tau in enumerate(taus)
    ]
