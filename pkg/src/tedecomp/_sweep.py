"""Compiled strict max-norm neighbour counting by a sorted-slab sweep."""

import numpy as np
from numba import njit


@njit(nogil=True, cache=True)
def _sweep(key, base, extra_a, extra_b, eps):
    # key: sort coordinate (first column of base), ascending.
    # Counts, per point p, other points q with |base_q - base_p|_inf < eps_p,
    # and of those the ones also inside in extra_a / extra_b.
    n = key.shape[0]
    nb = np.zeros(n, np.int64)
    na = np.zeros(n, np.int64)
    nab = np.zeros(n, np.int64)
    da = extra_a.shape[1]
    db = extra_b.shape[1]
    dbase = base.shape[1]
    for p in range(n):
        e = eps[p]
        for step in (1, -1):
            q = p + step
            while 0 <= q < n and abs(key[q] - key[p]) < e:
                inside = True
                for c in range(1, dbase):
                    if abs(base[q, c] - base[p, c]) >= e:
                        inside = False
                        break
                if inside:
                    nb[p] += 1
                    ok = True
                    for c in range(da):
                        if abs(extra_a[q, c] - extra_a[p, c]) >= e:
                            ok = False
                            break
                    if ok:
                        na[p] += 1
                    ok = True
                    for c in range(db):
                        if abs(extra_b[q, c] - extra_b[p, c]) >= e:
                            ok = False
                            break
                    if ok:
                        nab[p] += 1
                q += step
    return nb, na, nab


def strict_counts(base, eps, extra_a=None, extra_b=None):
    """Strict max-norm counts inside ``base`` and inside ``base`` x ``extra``.

    Returns ``(n_base, n_base_a, n_base_b)`` in the input point order; the
    last two are only meaningful when the corresponding extra group is given.
    """
    n = base.shape[0]
    empty = np.empty((n, 0))
    extra_a = empty if extra_a is None else extra_a
    extra_b = empty if extra_b is None else extra_b
    order = np.argsort(base[:, 0], kind="stable")
    b = np.ascontiguousarray(base[order])
    nb, na, nab = _sweep(
        np.ascontiguousarray(b[:, 0]),
        b,
        np.ascontiguousarray(extra_a[order]),
        np.ascontiguousarray(extra_b[order]),
        np.ascontiguousarray(eps[order]),
    )
    out = []
    for arr in (nb, na, nab):
        res = np.empty(n, np.int64)
        res[order] = arr
        out.append(res)
    return tuple(out)
