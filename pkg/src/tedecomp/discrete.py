"""Exact information quantities over finite joint distributions.

Everything here is computed from a dense probability table; there are no
closed-form shortcuts. The Boolean AND triplet used to contrast synergistic
and redundancy-dominated conditioning is built as an ordinary table and fed
through the same engine.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError

#: Multiply a value in bits by this to obtain nats.
BITS_TO_NATS = float(np.log(2.0))

_SUM_TOL = 1e-12


@dataclass(frozen=True)
class JointPmf:
    """Dense joint pmf over named discrete variables.

    ``probs`` has one axis per variable, in the order of ``variables``;
    ``probs[a, b, ...]`` is the probability of the joint outcome.
    """

    variables: tuple[tuple[str, int], ...]
    probs: np.ndarray

    def __post_init__(self):
        variables = tuple((str(name), int(size)) for name, size in self.variables)
        names = [name for name, _ in variables]
        if len(set(names)) != len(names):
            raise InputError(f"duplicate variable names: {names}")
        if any(size < 1 for _, size in variables):
            raise InputError("alphabet sizes must be >= 1")
        shape = tuple(size for _, size in variables)
        probs = np.array(self.probs, dtype=float)
        if probs.size != int(np.prod(shape, dtype=np.int64)):
            raise InputError(
                f"table has {probs.size} entries, expected {int(np.prod(shape))}"
            )
        probs = probs.reshape(shape)
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise InputError("probabilities must be finite and nonnegative")
        if abs(probs.sum() - 1.0) > _SUM_TOL:
            raise InputError(f"probabilities sum to {probs.sum()!r}, not 1")
        probs.setflags(write=False)
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "probs", probs)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.variables)

    @classmethod
    def from_outcomes(cls, variables, outcomes: dict) -> "JointPmf":
        """Build a pmf from ``{(a, b, ...): prob}``; missing outcomes are zero."""
        shape = tuple(int(size) for _, size in variables)
        table = np.zeros(shape)
        for outcome, p in outcomes.items():
            table[tuple(outcome)] += p
        return cls(tuple(variables), table)

    def axes(self, names: Iterable[str]) -> tuple[int, ...]:
        index = {name: i for i, name in enumerate(self.names)}
        out = []
        for name in names:
            if name not in index:
                raise InputError(f"unknown variable {name!r}; have {list(self.names)}")
            out.append(index[name])
        return tuple(out)

    def marginal(self, names: Sequence[str]) -> np.ndarray:
        """Marginal table over ``names`` with axes in the given order."""
        keep = self.axes(names)
        drop = tuple(i for i in range(self.probs.ndim) if i not in keep)
        table = self.probs.sum(axis=drop) if drop else self.probs
        # sum() keeps the remaining axes in ascending order
        order = sorted(keep)
        return np.transpose(table, [order.index(i) for i in keep])


def _as_names(vars) -> tuple[str, ...]:
    if isinstance(vars, str):
        return (vars,)
    return tuple(vars)


def _plogp_sum(table: np.ndarray) -> float:
    p = table[table > 0]
    return float(-(p * np.log2(p)).sum()) + 0.0  # no negative zero


def entropy(pmf: JointPmf, vars) -> float:
    """Shannon entropy in bits of the marginal over ``vars``."""
    names = _as_names(vars)
    if not names:
        raise InputError("entropy needs at least one variable")
    if len(set(names)) != len(names):
        raise InputError(f"repeated variable in {names}")
    return _plogp_sum(pmf.marginal(names))


def _joint_entropy(pmf: JointPmf, names: tuple[str, ...]) -> float:
    return entropy(pmf, names) if names else 0.0


def cond_mutual_info(pmf: JointPmf, x, y, z=()) -> float:
    """Exact I(X;Y|Z) in bits; an empty ``z`` gives plain mutual information."""
    x, y, z = _as_names(x), _as_names(y), _as_names(z)
    if not x or not y:
        raise InputError("x and y must be nonempty")
    sets = [set(x), set(y), set(z)]
    if any(len(s) != len(t) for s, t in zip(sets, (x, y, z))):
        raise InputError("repeated variable inside a group")
    if sets[0] & sets[1] or sets[0] & sets[2] or sets[1] & sets[2]:
        raise InputError(f"variable groups overlap: x={x}, y={y}, z={z}")
    pmf.axes(x + y + z)
    h = _joint_entropy
    # I(X;Y|Z) = H(XZ) + H(YZ) - H(XYZ) - H(Z)
    return h(pmf, x + z) + h(pmf, y + z) - h(pmf, x + y + z) - h(pmf, z)


def interaction_information(pmf: JointPmf, x, y, z) -> float:
    """I(X;Y) - I(X;Y|Z). Negative means synergy-dominated, positive redundancy."""
    if not _as_names(z):
        raise InputError("interaction information needs a nonempty conditioning set")
    return cond_mutual_info(pmf, x, y) - cond_mutual_info(pmf, x, y, z)


def and_gate_pmf(p: float) -> JointPmf:
    """Joint pmf of (A, B, C, D) with B = A AND C, D = A AND C'.

    ``p`` is P(A = 0). C and C' are fair coins independent of A and of each
    other; C' is summed out of the returned table.
    """
    p = float(p)
    if not 0.0 <= p <= 1.0 or not np.isfinite(p):
        raise InputError(f"p must lie in [0, 1], got {p!r}")
    table = np.zeros((2, 2, 2, 2))
    for a, c, c2 in itertools.product((0, 1), repeat=3):
        prob = (p if a == 0 else 1.0 - p) * 0.25
        table[a, a & c, c, a & c2] += prob
    return JointPmf((("A", 2), ("B", 2), ("C", 2), ("D", 2)), table)


@dataclass(frozen=True)
class Theorem1Point:
    """Information quantities of the AND triplet at one value of P(A=0)."""

    p: float
    i_ab_given_c: float
    i_ab: float
    i_ab_given_d: float
    h_a: float


def theorem1_curve(p_grid: Iterable[float]) -> list[Theorem1Point]:
    points = []
    for p in p_grid:
        pmf = and_gate_pmf(p)
        points.append(
            Theorem1Point(
                p=float(p),
                i_ab_given_c=cond_mutual_info(pmf, "A", "B", "C"),
                i_ab=cond_mutual_info(pmf, "A", "B"),
                i_ab_given_d=cond_mutual_info(pmf, "A", "B", "D"),
                h_a=entropy(pmf, "A"),
            )
        )
    return points


def uniform_grid(n: int) -> np.ndarray:
    """``n`` evenly spaced points covering [0, 1] inclusive."""
    if n < 2:
        raise InputError("grid needs at least 2 points")
    return np.linspace(0.0, 1.0, int(n))
