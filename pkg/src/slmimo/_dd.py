"""Double-double (~31 significant digits) float primitives, numba-friendly.

A value is carried as an unevaluated sum (hi, lo) of two float64.  Used by
the closed-form ordered-eigenvalue integrals, whose signed monomial sums can
lose ~8 digits to cancellation at spectrum sizes 5-6; double-double keeps the
result accurate to far better than 1e-9 relative.  Error-free transforms use
the Dekker/Veltkamp split (no FMA dependence).
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


_SPLITTER = 134217729.0  # 2**27 + 1


@njit(cache=True)
def two_sum(a, b):
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return s, err


@njit(cache=True)
def quick_two_sum(a, b):
    # requires |a| >= |b|
    s = a + b
    err = b - (s - a)
    return s, err


@njit(cache=True)
def two_prod(a, b):
    p = a * b
    ta = _SPLITTER * a
    ahi = ta - (ta - a)
    alo = a - ahi
    tb = _SPLITTER * b
    bhi = tb - (tb - b)
    blo = b - bhi
    err = ((ahi * bhi - p) + ahi * blo + alo * bhi) + alo * blo
    return p, err


@njit(cache=True)
def dd_add(ahi, alo, bhi, blo):
    s, e = two_sum(ahi, bhi)
    e += alo + blo
    return quick_two_sum(s, e)


@njit(cache=True)
def dd_sub(ahi, alo, bhi, blo):
    return dd_add(ahi, alo, -bhi, -blo)


@njit(cache=True)
def dd_mul(ahi, alo, bhi, blo):
    p, e = two_prod(ahi, bhi)
    e += ahi * blo + alo * bhi
    return quick_two_sum(p, e)


@njit(cache=True)
def dd_mul_d(ahi, alo, b):
    p, e = two_prod(ahi, b)
    e += alo * b
    return quick_two_sum(p, e)


@njit(cache=True)
def dd_div(ahi, alo, bhi, blo):
    q1 = ahi / bhi
    rhi, rlo = dd_sub(ahi, alo, *dd_mul_d(bhi, blo, q1))
    q2 = rhi / bhi
    rhi, rlo = dd_sub(rhi, rlo, *dd_mul_d(bhi, blo, q2))
    q3 = rhi / bhi
    s, e = quick_two_sum(q1, q2)
    return dd_add(s, e, q3, 0.0)


@njit(cache=True)
def dd_inv(bhi, blo):
    return dd_div(1.0, 0.0, bhi, blo)


def from_exact(x) -> tuple:
    """Exact int/Fraction -> (hi, lo) pair."""
    x = Fraction(x)
    hi = float(x)
    lo = float(x - Fraction(hi))
    return hi, lo


def table_from_ints(values) -> np.ndarray:
    """(K, 2) array of dd pairs from exact integers."""
    out = np.empty((len(values), 2))
    for k, v in enumerate(values):
        out[k, 0], out[k, 1] = from_exact(v)
    return out
