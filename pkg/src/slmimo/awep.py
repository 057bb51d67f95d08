"""Average word-error probability analysis.

The conditional PEP is the Gaussian tail Q(sqrt(sum_m lambda_m |psi_m|^2 /
(2 n0))).  Averaging the exponential Q-bound
Q(x) <= (1/12) e^{-x^2/2} + (1/4) e^{-2x^2/3} over the ordered eigenvalue
density yields two closed-form pieces I_1, I_2 driven by the shift vectors
a_m = |psi_m|^2 / (4 n0) and b_m = |psi_m|^2 / (3 n0); summing over the
difference set with ordered-pair multiplicities gives the AWEP union bound.
The high-SNR asymptote keeps only the dominant monomials and the constant
boundary term after the first N integration levels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc

from . import eigenstats
from .eigenstats import MonomialExpansion
from .structure import DifferenceSet


def q_function(x):
    """Standard normal tail probability."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


def pep_conditional(psi, lambdas, n0: float) -> float:
    """PEP of mistaking s for s + psi given a fixed eigenvalue draw."""
    psi = np.asarray(psi)
    lambdas = np.asarray(lambdas, dtype=float)
    if np.any(lambdas < 0):
        raise ValueError("eigenvalues must be nonnegative")
    if not n0 > 0:
        raise ValueError("n0 must be positive")
    arg = np.sqrt(np.sum(lambdas * np.abs(psi) ** 2) / (2.0 * n0))
    return float(q_function(arg))


@dataclass(frozen=True)
class PepBoundTerms:
    i1: float
    i2: float

    @property
    def total(self) -> float:
        return self.i1 + self.i2


def _shift_pair(abs_sq: np.ndarray, n0: float):
    return abs_sq / (4.0 * n0), abs_sq / (3.0 * n0)


def avg_pep_upper(psi, exp: MonomialExpansion, n0: float) -> PepBoundTerms:
    """Closed-form average-PEP bound pieces for one difference vector.

    Evaluated through the literal nested-series path (the authoritative
    route); (1/12) M(-a) and (1/4) M(-b) through the coefficient-state
    kernel give an independent cross-check of the same quantities.
    """
    psi = np.asarray(psi)
    if not np.any(np.abs(psi) > 0):
        raise ValueError("psi must be nonzero")
    a, b = _shift_pair(np.abs(psi) ** 2, n0)
    vals = eigenstats.nested_sum_batch(exp, np.stack([a, b]))
    c = float(exp.normalizer)
    return PepBoundTerms(i1=float(vals[0]) / (12.0 * c),
                         i2=float(vals[1]) / (4.0 * c))


def _unique_profiles(diffs: DifferenceSet):
    """Collapse difference vectors to unique |psi_m|^2 profiles (the bound
    only sees magnitudes), summing ordered-pair multiplicities."""
    if "profiles" not in diffs.cache:
        prof = np.abs(diffs.vectors) ** 2
        keys = np.round(prof, 12)
        uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
        mult = np.zeros(uniq.shape[0], dtype=np.int64)
        np.add.at(mult, inverse, diffs.multiplicities)
        out = np.zeros_like(uniq)
        out[inverse] = prof
        diffs.cache["profiles"] = (out, mult)
    return diffs.cache["profiles"]


def awep_upper_bound(diffs: DifferenceSet, exp: MonomialExpansion,
                     n0: float, eta: float) -> float:
    """Union-bound AWEP: 2^-eta sum over ordered word pairs of (I_1 + I_2).

    Deduplicated |psi|^2 profiles carry explicit pair multiplicities, so the
    double sum is reproduced exactly.  Values above 1 are returned raw (the
    union bound is vacuous there); callers clip for plotting.
    """
    profiles, mult = _unique_profiles(diffs)
    a, b = _shift_pair(profiles, n0)
    v1 = eigenstats.signed_monomial_sum_batch(exp, a)
    v2 = eigenstats.signed_monomial_sum_batch(exp, b)
    c = float(exp.normalizer)
    per_psi = v1 / (12.0 * c) + v2 / (4.0 * c)
    return float((mult * per_psi).sum() / 2.0 ** eta)


@dataclass(frozen=True)
class DominantSet:
    big_n: int
    b_min: int
    indices: tuple

    def __len__(self):
        return len(self.indices)


def dominant_set(exp: MonomialExpansion, big_n: int) -> DominantSet:
    """Monomials minimizing the trailing exponent sum B_p = sum_{j>N} beta."""
    if not 0 <= big_n < exp.n:
        raise ValueError("need 0 <= N < n")
    tails = exp.betas[:, big_n:].sum(axis=1)
    b_min = int(tails.min())
    return DominantSet(big_n=big_n, b_min=b_min,
                       indices=tuple(np.nonzero(tails == b_min)[0]))


def diversity_gain(n_t: int, n_r: int, big_n: int) -> int:
    """(n_r - N)(n_t - N); the trailing-exponent minimum plus n - N."""
    if not 0 <= big_n < min(n_t, n_r):
        raise ValueError("need 0 <= N < min(n_t, n_r)")
    return (n_r - big_n) * (n_t - big_n)


def asymptotic_pep_terms(psi, exp: MonomialExpansion, n0: float,
                         n_prime: int) -> PepBoundTerms:
    """High-SNR dominant-term value of the (I_1, I_2) pair for one psi with
    at least n_prime leading zeros: sum over the dominant set with the
    boundary polynomial truncated to its constant after level n_prime."""
    psi = np.asarray(psi)
    abs_sq = np.abs(psi) ** 2
    if np.any(abs_sq[:n_prime] > 1e-18):
        raise ValueError("psi must have n_prime leading zeros")
    dom = dominant_set(exp, n_prime)
    a, b = _shift_pair(abs_sq, n0)
    vals = eigenstats.signed_monomial_sum_batch(
        exp, np.stack([a, b]), indices=dom.indices, truncate_after=n_prime)
    c = float(exp.normalizer)
    return PepBoundTerms(i1=float(vals[0]) / (12.0 * c),
                         i2=float(vals[1]) / (4.0 * c))


def asymptotic_awep(diffs: DifferenceSet, exp: MonomialExpansion, n0: float,
                    eta: float, n_prime: int) -> float:
    """Dominant-term AWEP over E_{N'} = {psi : F(psi) >= n_prime}.

    n_prime = N gives the high-SNR asymptote of the full bound; n_prime = 0
    reproduces the full bound exactly (no truncation, all monomials).  The
    value is an estimate, not a bound.
    """
    sel = diffs.with_f_at_least(n_prime)
    if sel.vectors.shape[0] == 0:
        raise ValueError(f"no difference vectors with F >= {n_prime}")
    dom = dominant_set(exp, n_prime)
    profiles, mult = _unique_profiles(sel)
    a, b = _shift_pair(profiles, n0)
    v1 = eigenstats.signed_monomial_sum_batch(
        exp, a, indices=dom.indices, truncate_after=n_prime)
    v2 = eigenstats.signed_monomial_sum_batch(
        exp, b, indices=dom.indices, truncate_after=n_prime)
    c = float(exp.normalizer)
    per_psi = v1 / (12.0 * c) + v2 / (4.0 * c)
    return float((mult * per_psi).sum() / 2.0 ** eta)


def asymptotic_pep_terms_4x4_direct(psi, exp: MonomialExpansion,
                                    n0: float) -> PepBoundTerms:
    """Independent transcription of the printed two-bracket closed form for
    n = 4, N = 2 systems (rising-factorial form), used to cross-check the
    generic truncated-recursion path."""
    if exp.n != 4:
        raise ValueError("this closed form requires n = 4")
    psi = np.asarray(psi)
    abs_sq = np.abs(psi) ** 2
    if np.any(abs_sq[:2] > 1e-18):
        raise ValueError("psi needs two leading zeros")
    dom = dominant_set(exp, 2)

    def rising(x, k):
        return math.factorial(x + k - 1) // math.factorial(x - 1)

    def bracket(s3, s4):
        total = 0.0
        for p in dom.indices:
            b1, b2, b3, b4 = (int(v) for v in exp.betas[p])
            lead = (exp.alphas[p] * rising(1, b1) * rising(1, b3)
                    / (2.0 ** (b3 + b4 + 2)
                       * (1.0 + (1.0 + s3) / 2.0) ** (b3 + b4 + 2)))
            inner1 = sum(rising(i1 + 1, b2) / 2.0 ** (b2 + i1 + 1)
                         for i1 in range(b1 + 1))
            inner3 = sum(rising(i3 + 1, b4)
                         / (1.0 + (1.0 + s4) / (3.0 + s3)) ** (b4 + i3 + 1)
                         for i3 in range(b3 + 1))
            total += lead * inner1 * inner3
        return total

    a, b = _shift_pair(abs_sq, n0)
    c = float(exp.normalizer)
    return PepBoundTerms(i1=bracket(a[2], a[3]) / (12.0 * c),
                         i2=bracket(b[2], b[3]) / (4.0 * c))


def fit_loglog_slope(snr_db: np.ndarray, values: np.ndarray) -> float:
    """Least-squares slope of log10(value) against snr_db / 10."""
    x = np.asarray(snr_db, dtype=float) / 10.0
    y = np.log10(np.asarray(values, dtype=float))
    coef = np.polyfit(x, y, 1)
    return float(coef[0])


@dataclass
class AwepReport:
    snr_db: np.ndarray
    upper_bound: np.ndarray
    asymptotic: np.ndarray
    g_d: int
    mc_estimate: np.ndarray | None = None
    mc_ci_lo: np.ndarray | None = None
    mc_ci_hi: np.ndarray | None = None
    fitted_slope: float | None = None
    coding_gain_estimate: float | None = None
    meta: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        from . import __version__

        def col(arr, i):
            return "" if arr is None else f"{arr[i]:.12g}"

        with open(path, "w") as fh:
            fh.write(f"# version: {__version__}\n")
            fh.write(f"# g_d: {self.g_d}\n")
            for key in sorted(self.meta):
                fh.write(f"# {key}: {self.meta[key]}\n")
            fh.write("snr_db,awep_ub,awep_asym,awep_mc,mc_ci_lo,mc_ci_hi\n")
            for i, snr in enumerate(self.snr_db):
                fh.write(",".join([
                    f"{snr:.6g}",
                    f"{self.upper_bound[i]:.12g}",
                    f"{self.asymptotic[i]:.12g}",
                    col(self.mc_estimate, i),
                    col(self.mc_ci_lo, i),
                    col(self.mc_ci_hi, i),
                ]) + "\n")


def analyze_system(diffs: DifferenceSet, exp: MonomialExpansion,
                   snr_db, eta: float, p_t: float, n_t: int, n_r: int,
                   big_n: int) -> AwepReport:
    """Analytic bound + asymptote over an SNR grid (SNR = P_t / n0)."""
    snr_db = np.asarray(snr_db, dtype=float)
    n0s = p_t / 10.0 ** (snr_db / 10.0)
    ub = np.array([awep_upper_bound(diffs, exp, n0, eta) for n0 in n0s])
    asym = np.array([asymptotic_awep(diffs, exp, n0, eta, big_n)
                     for n0 in n0s])
    report = AwepReport(snr_db=snr_db, upper_bound=ub, asymptotic=asym,
                        g_d=diversity_gain(n_t, n_r, big_n))
    good = ub < 1e-3
    if good.sum() >= 2:
        window = snr_db >= snr_db[good].max() - 10.0
        sel = good & window
        report.fitted_slope = fit_loglog_slope(snr_db[sel], ub[sel])
        # AWEP ~ (G_c * snr)^-G_d  =>  G_c estimate from the last point
        last = np.nonzero(sel)[0][-1]
        gamma = 10.0 ** (snr_db[last] / 10.0)
        report.coding_gain_estimate = float(
            ub[last] ** (-1.0 / report.g_d) / gamma)
    return report
