"""Rayleigh MIMO channel sampling, ordered SVD, and the per-eigen-channel
observation model z_m = sqrt(lambda_m) s_m + n'_m obtained by SVD precoding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class SvdConvergenceError(RuntimeError):
    """The iterative SVD failed to converge within its iteration cap."""


@dataclass(frozen=True)
class MimoConfig:
    n_t: int
    n_r: int
    n0: float = 1.0
    snr_db: float = 0.0

    def __post_init__(self):
        if self.n_t < 1 or self.n_r < 1:
            raise ValueError("antenna counts must be >= 1")
        if not self.n0 > 0:
            raise ValueError("n0 must be positive")

    @property
    def n(self) -> int:
        return min(self.n_t, self.n_r)


@dataclass(frozen=True)
class ChannelRealization:
    h: np.ndarray  # (n_r, n_t) complex

    def __post_init__(self):
        if not np.all(np.isfinite(self.h.view(float))):
            raise ValueError("channel matrix has non-finite entries")


@dataclass(frozen=True)
class EigenSpectrum:
    lambdas: np.ndarray  # (n,) descending, >= 0
    u_bar: np.ndarray    # (n_r, n)
    v_bar: np.ndarray    # (n_t, n)

    @property
    def n(self) -> int:
        return self.lambdas.shape[0]


def sample_channel(cfg: MimoConfig, rng: np.random.Generator
                   ) -> ChannelRealization:
    """Draw H with i.i.d. CN(0, 1) entries (variance 1/2 per real part)."""
    h = sample_channel_batch(cfg, rng, 1)[0]
    return ChannelRealization(h=h)


def sample_channel_batch(cfg: MimoConfig, rng: np.random.Generator,
                         count: int) -> np.ndarray:
    """(count, n_r, n_t) array of i.i.d. CN(0, 1) channel matrices."""
    shape = (count, cfg.n_r, cfg.n_t)
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) / np.sqrt(2.0)


def svd_ordered(chan: ChannelRealization) -> EigenSpectrum:
    """Ordered SVD of one realization: H = u_bar diag(sqrt(lambda)) v_bar^H.

    Uses the LAPACK divide-and-conquer/Golub-Kahan SVD; its internal
    non-convergence (iteration cap) is surfaced as SvdConvergenceError.
    """
    try:
        u, sv, vh = np.linalg.svd(chan.h, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise SvdConvergenceError(f"SVD did not converge: {exc}") from exc
    return EigenSpectrum(lambdas=sv ** 2, u_bar=u, v_bar=vh.conj().T)


def svd_ordered_batch(hs: np.ndarray) -> tuple:
    """Batched SVD: returns (lambdas (B, n) descending, u (B, n_r, n),
    v (B, n_t, n))."""
    try:
        u, sv, vh = np.linalg.svd(hs, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise SvdConvergenceError(f"SVD did not converge: {exc}") from exc
    return sv ** 2, u, np.conj(np.swapaxes(vh, -1, -2))


def eigen_spectrum_pdf_samples(cfg: MimoConfig, rng: np.random.Generator,
                               count: int) -> np.ndarray:
    """(count, n) ordered eigenvalue samples, for Monte Carlo oracles."""
    lam, _, _ = svd_ordered_batch(sample_channel_batch(cfg, rng, count))
    return lam


def observe(spec: EigenSpectrum, s: np.ndarray, n0: float,
            rng: np.random.Generator, full_path: bool = False,
            h: np.ndarray | None = None) -> np.ndarray:
    """Post-processed observation z = diag(sqrt(lambda)) s + n'.

    In eigen-domain mode (default) the unitary rotations are never applied;
    the noise n' ~ CN(0, n0 I) is drawn directly.  In full-path mode the
    physical chain x = v_bar s, y = H x + n, z = u_bar^H y is executed with
    the *same* noise samples pre-rotated by u_bar, so the two modes agree
    sample-for-sample (CN(0, n0 I) is unitarily invariant).
    """
    s = np.asarray(s)
    n = spec.n
    if s.shape != (n,):
        raise ValueError(f"symbol vector must have shape ({n},)")
    if not n0 >= 0:
        raise ValueError("n0 must be nonnegative")
    noise = np.sqrt(n0 / 2.0) * (rng.standard_normal(n)
                                 + 1j * rng.standard_normal(n))
    if not full_path:
        return np.sqrt(spec.lambdas) * s + noise
    if h is None:
        raise ValueError("full-path mode needs the channel matrix h")
    x = spec.v_bar @ s
    y = h @ x + spec.u_bar @ noise  # pre-rotated noise for exact agreement
    return spec.u_bar.conj().T @ y
