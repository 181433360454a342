"""k-nearest-neighbour estimation of (conditional) mutual information.

Geometry follows KSG algorithm 1: max-norm balls in the joint space, with
marginal counts taken strictly inside the joint k-th neighbour distance.
Conditioning uses the Frenzel-Pompe extension::

    I(X;Y|Z) = psi(k) - < psi(n_xz + 1) + psi(n_yz + 1) - psi(n_z + 1) >

and with no conditioning group the plain KSG-1 formula::

    I(X;Y) = psi(k) + psi(n) - < psi(n_x + 1) + psi(n_y + 1) >

Results are returned in bits.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import digamma

from ._sweep import strict_counts
from .errors import InputError

DEFAULT_K = 10
JITTER_SCALE = 1e-10
_LN2 = np.log(2.0)


@dataclass(frozen=True)
class SampleBlock:
    """Joint samples laid out as ``[x | y | z]`` columns."""

    points: np.ndarray
    x_dim: int
    y_dim: int
    z_dim: int = 0

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2:
            raise InputError(f"points must be 2-D, got shape {pts.shape}")
        if min(self.x_dim, self.y_dim) < 1 or self.z_dim < 0:
            raise InputError("x_dim and y_dim must be >= 1 and z_dim >= 0")
        if pts.shape[1] != self.x_dim + self.y_dim + self.z_dim:
            raise InputError(
                f"points have {pts.shape[1]} columns, dims sum to "
                f"{self.x_dim + self.y_dim + self.z_dim}"
            )
        if not np.all(np.isfinite(pts)):
            raise InputError("sample block contains non-finite coordinates")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_groups(cls, x, y, z=None) -> "SampleBlock":
        x = _as_2d(x)
        y = _as_2d(y)
        parts = [x, y]
        z_dim = 0
        if z is not None:
            z = _as_2d(z)
            if z.shape[1]:
                parts.append(z)
                z_dim = z.shape[1]
        if len({p.shape[0] for p in parts}) != 1:
            raise InputError("groups have different numbers of samples")
        return cls(np.hstack(parts), x.shape[1], y.shape[1], z_dim)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.x_dim, self.y_dim, self.z_dim)

    def columns(self, group: str) -> slice:
        a, b = self.x_dim, self.x_dim + self.y_dim
        return {"x": slice(0, a), "y": slice(a, b), "z": slice(b, b + self.z_dim)}[group]

    def subspace(self, groups: str) -> np.ndarray:
        return np.hstack([self.points[:, self.columns(g)] for g in groups])

    def swapped(self) -> "SampleBlock":
        pts = np.hstack([self.subspace("y"), self.subspace("x"), self.subspace("z")])
        return SampleBlock(pts, self.y_dim, self.x_dim, self.z_dim)


def _as_2d(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return a[:, None] if a.ndim == 1 else a


@dataclass(frozen=True)
class CmiEstimate:
    value: float  # bits; may be slightly negative
    k: int
    n: int
    dims: tuple[int, int, int]
    jitter_scale: float
    normalized: bool = False
    seed: Optional[int] = None
    variant: str = "ksg1-frenzel-pompe"
    meta: dict = field(default_factory=dict)

    def as_record(self) -> dict:
        rec = {
            "value": self.value,
            "k": self.k,
            "n": self.n,
            "x_dim": self.dims[0],
            "y_dim": self.dims[1],
            "z_dim": self.dims[2],
            "jitter_scale": self.jitter_scale,
            "normalized": self.normalized,
            "seed": self.seed,
            "variant": self.variant,
        }
        rec.update(self.meta)
        return rec


def _subspaces(block: SampleBlock) -> list[str]:
    return ["xz", "yz", "z"] if block.z_dim else ["x", "y"]


def knn_radius_counts(block: SampleBlock, k: int, workers: int = 1, method: str = "sweep"):
    """Joint-space k-th neighbour radii and strict marginal counts.

    Returns ``(eps, counts)`` where ``eps[i]`` is the max-norm distance from
    point ``i`` to its k-th nearest other point, and ``counts`` maps each
    marginal subspace label (``"x"``, ``"y"`` or ``"xz"``, ``"yz"``, ``"z"``)
    to the number of other points strictly closer than ``eps[i]`` there.

    ``method="sweep"`` counts all marginals in one compiled pass over the
    points sorted along one coordinate; ``"kdtree"`` issues one ball query
    per marginal space. Both give identical integers.
    """
    k = _check_k(block, k)
    pts = block.points
    dist, _ = cKDTree(pts).query(pts, k=[k + 1], p=np.inf, workers=workers)
    eps = np.ascontiguousarray(dist[:, 0])
    if method == "sweep":
        return eps, _sweep_counts(block, eps)
    if method != "kdtree":
        raise InputError(f"unknown counting method {method!r}")
    radius = np.nextafter(eps, 0.0)
    counts = {}
    for label in _subspaces(block):
        sub = block.subspace(label)
        n_in = cKDTree(sub).query_ball_point(
            sub, radius, p=np.inf, return_length=True, workers=workers
        )
        # a zero radius can only hold the point itself and its exact duplicates
        counts[label] = np.where(eps > 0, np.asarray(n_in, dtype=np.int64) - 1, 0)
    return eps, counts


def _sweep_counts(block: SampleBlock, eps: np.ndarray) -> dict:
    if block.z_dim:
        n_z, n_xz, n_yz = strict_counts(
            block.subspace("z"), eps, block.subspace("x"), block.subspace("y")
        )
        return {"xz": n_xz, "yz": n_yz, "z": n_z}
    return {
        "x": strict_counts(block.subspace("x"), eps)[0],
        "y": strict_counts(block.subspace("y"), eps)[0],
    }


def brute_radius_counts(block: SampleBlock, k: int):
    """All-pairs O(n^2) reference for :func:`knn_radius_counts`."""
    k = _check_k(block, k)
    pts = block.points

    def cheb(a):
        d = np.abs(a[:, None, :] - a[None, :, :]).max(axis=2)
        np.fill_diagonal(d, np.inf)
        return d

    joint = cheb(pts)
    eps = np.sort(joint, axis=1)[:, k - 1]
    counts = {}
    for label in _subspaces(block):
        d = cheb(block.subspace(label))
        counts[label] = (d < eps[:, None]).sum(axis=1).astype(np.int64)
    return eps, counts


def _check_k(block: SampleBlock, k: int) -> int:
    if int(k) != k or k < 1:
        raise InputError(f"k must be a positive integer, got {k!r}")
    if block.n <= k:
        raise InputError(f"need more than k={k} samples, got n={block.n}")
    return int(k)


def _column_jitter(col: np.ndarray, seed: int, scale: float) -> np.ndarray:
    # Keyed on column contents so that reordering columns reorders the jitter too.
    key = zlib.crc32(col.tobytes())
    rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(key,)))
    sd = col.std()
    amplitude = scale * (sd if sd > 0 else 1.0)
    return col + rng.uniform(-amplitude, amplitude, col.shape[0])


def prepare(block: SampleBlock, seed: int = 0, jitter_scale: float = JITTER_SCALE,
            normalize: bool = False) -> SampleBlock:
    """Optionally z-score, then jitter every column of ``block``."""
    pts = np.array(block.points)
    if normalize:
        sd = pts.std(axis=0)
        sd[sd == 0] = 1.0
        pts = (pts - pts.mean(axis=0)) / sd
    if jitter_scale > 0:
        for j in range(pts.shape[1]):
            pts[:, j] = _column_jitter(pts[:, j], seed, jitter_scale)
    return SampleBlock(pts, block.x_dim, block.y_dim, block.z_dim)


def estimate_from_counts(block: SampleBlock, k: int, counts: dict) -> float:
    """Combine neighbour counts into an information value in nats."""
    if block.z_dim:
        terms = (
            digamma(counts["xz"] + 1) + digamma(counts["yz"] + 1) - digamma(counts["z"] + 1)
        )
        return float(digamma(k) - terms.mean())
    terms = digamma(counts["x"] + 1) + digamma(counts["y"] + 1)
    return float(digamma(k) + digamma(block.n) - terms.mean())


def cmi_knn(
    block: SampleBlock,
    k: int = DEFAULT_K,
    seed: int = 0,
    jitter_scale: float = JITTER_SCALE,
    normalize: bool = False,
    workers: int = 1,
) -> CmiEstimate:
    """Estimate I(X;Y|Z) (or I(X;Y) when ``z_dim == 0``) in bits."""
    _check_k(block, k)
    work = prepare(block, seed, jitter_scale, normalize)
    _, counts = knn_radius_counts(work, k, workers=workers)
    nats = estimate_from_counts(work, k, counts)
    return CmiEstimate(
        value=nats / _LN2,
        k=int(k),
        n=block.n,
        dims=block.dims,
        jitter_scale=jitter_scale,
        normalized=normalize,
        seed=seed,
    )


def mi_knn(x, y, k: int = DEFAULT_K, **kwargs) -> CmiEstimate:
    return cmi_knn(SampleBlock.from_groups(x, y), k, **kwargs)
