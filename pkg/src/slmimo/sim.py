"""Monte Carlo word-error simulation.

A word is one superposed block: a fresh channel realization is drawn per
word, uniform layer data is superposed, observed on the eigen-channels, and
detected; a word error is any wrongly decided layer.  Randomness comes from
counter-based Philox streams keyed by (seed, point index, batch index), so
results are bitwise reproducible for a given config regardless of how many
threads execute the batches.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from . import awep, eigenstats
from .channel import sample_channel_batch, svd_ordered_batch
from .detectors import (FactorGraph, exact_marginals_batch, ml_detect_batch,
                        mp_detect_batch)
from .structure import (CodebookSet, SLMatrix, check_design_condition,
                        difference_set, superposed_alphabet)

WILSON_Z = 1.959963984540054  # 95%


@dataclass(frozen=True)
class SimConfig:
    n_t: int
    n_r: int
    snr_db: tuple
    detector: str = "mp"        # "ml" | "mp" | "exact"
    mp_iters: int = 5
    min_errors: int = 200
    max_words: int = 10 ** 7
    seed: int = 0
    batch_size: int = 2000
    threads: int = 1

    def __post_init__(self):
        if not self.snr_db:
            raise ValueError("snr grid must be nonempty")
        if self.min_errors < 1 or self.max_words < 1:
            raise ValueError("stopping parameters must be positive")
        if self.detector not in ("ml", "mp", "exact"):
            raise ValueError(f"unknown detector {self.detector!r}")

    def hash(self) -> str:
        # threads is an execution detail: results are identical under any
        # thread count, so it must not change the config hash
        fields = {k: v for k, v in asdict(self).items() if k != "threads"}
        blob = json.dumps(fields, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class CurvePoint:
    snr_db: float
    words_run: int
    word_errors: int
    awep_hat: float
    ci_lo: float
    ci_hi: float


def wilson_interval(errors: int, trials: int, z: float = WILSON_Z):
    if trials == 0:
        return 0.0, 1.0
    p = errors / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials
                         + z * z / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


class SimSystem:
    """Precomputed per-system state shared across batches."""

    def __init__(self, sl: SLMatrix, books: CodebookSet):
        res = check_design_condition(sl, books)
        if not res.passed:
            raise ValueError(f"design condition fails: witness {res.witness}")
        self.sl = sl
        self.books = books
        self.embedded = books.embedded_words(sl.n)
        self.graph = FactorGraph(sl, books)
        self.choices, self.words = superposed_alphabet(sl, books)
        self.eta = books.bits_per_word()
        self.p_t = sl.num_layers * books.e_s


def _rng_for(seed: int, point: int, batch: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(point, batch))
    return np.random.Generator(np.random.Philox(ss))


def _draw_batch(system: SimSystem, cfg: SimConfig, n0: float,
                rng: np.random.Generator, count: int):
    """Common word-generation path (fixed draw order for reproducibility)."""
    from .channel import MimoConfig

    mimo = MimoConfig(n_t=cfg.n_t, n_r=cfg.n_r, n0=n0)
    lam, _, _ = svd_ordered_batch(sample_channel_batch(mimo, rng, count))
    data = rng.integers(system.books.m,
                        size=(count, system.sl.num_layers))
    s = np.zeros((count, system.sl.n), dtype=complex)
    for l in range(system.sl.num_layers):
        s += system.embedded[l][data[:, l]]
    noise = np.sqrt(n0 / 2.0) * (
        rng.standard_normal((count, system.sl.n))
        + 1j * rng.standard_normal((count, system.sl.n)))
    z = np.sqrt(lam) * s + noise
    return lam, data, z


def _detect(system: SimSystem, cfg: SimConfig, z, lam, n0: float):
    if cfg.detector == "ml":
        return ml_detect_batch(system.sl, system.books, z, lam,
                               system.choices, system.words)
    if cfg.detector == "exact":
        tables = exact_marginals_batch(system.sl, system.books, z, lam, n0,
                                       system.choices, system.words)
        return np.stack([np.argmax(t, axis=1) for t in tables], axis=1)
    dec, _, _, _ = mp_detect_batch(system.graph, z, lam, n0, cfg.mp_iters)
    return dec


def _run_point(system: SimSystem, cfg: SimConfig, point: int,
               snr_db: float) -> CurvePoint:
    n0 = system.p_t / 10.0 ** (snr_db / 10.0)

    def one_batch(batch_idx: int):
        rng = _rng_for(cfg.seed, point, batch_idx)
        count = min(cfg.batch_size, cfg.max_words)
        lam, data, z = _draw_batch(system, cfg, n0, rng, count)
        dec = _detect(system, cfg, z, lam, n0)
        return count, int(np.any(dec != data, axis=1).sum())

    words = errors = 0
    batch_idx = 0
    wave = max(1, cfg.threads)
    with ThreadPoolExecutor(max_workers=wave) as pool:
        done = False
        while not done:
            idxs = list(range(batch_idx, batch_idx + wave))
            results = list(pool.map(one_batch, idxs))
            batch_idx += wave
            # merge strictly in batch order; the stopping rule is applied
            # per batch so the output is independent of the wave width
            for count, errs in results:
                words += count
                errors += errs
                if errors >= cfg.min_errors or words >= cfg.max_words:
                    done = True
                    break
    lo, hi = wilson_interval(errors, words)
    return CurvePoint(snr_db=snr_db, words_run=words, word_errors=errors,
                      awep_hat=errors / words, ci_lo=lo, ci_hi=hi)


def run_curve(cfg: SimConfig, sl: SLMatrix, books: CodebookSet,
              analytic: bool = True):
    """Simulate every SNR point; returns (points, AwepReport)."""
    system = SimSystem(sl, books)
    points = [_run_point(system, cfg, i, snr)
              for i, snr in enumerate(cfg.snr_db)]
    report = None
    if analytic:
        exp = eigenstats.expand_ordered_pdf(cfg.n_t, cfg.n_r)
        diffs = difference_set(books, sl)
        report = awep.analyze_system(
            diffs, exp, np.asarray(cfg.snr_db, dtype=float), system.eta,
            system.p_t, cfg.n_t, cfg.n_r, sl.big_n)
        report.mc_estimate = np.array([p.awep_hat for p in points])
        report.mc_ci_lo = np.array([p.ci_lo for p in points])
        report.mc_ci_hi = np.array([p.ci_hi for p in points])
        report.meta.update(seed=cfg.seed, config_hash=cfg.hash())
    return points, report


def convergence_study(cfg: SimConfig, snr_db: float, iter_list,
                      words: int = 10 ** 5, sl: SLMatrix = None,
                      books: CodebookSet = None) -> dict:
    """MP word-error rate vs iteration count with common random numbers.

    Every iteration count (and the ML reference) sees the same channels,
    data and noise.  Returns {label: (words, errors, wer)}.
    """
    system = SimSystem(sl, books)
    n0 = system.p_t / 10.0 ** (snr_db / 10.0)
    iter_list = list(iter_list)
    errors = {f"mp_{it}": 0 for it in iter_list}
    errors["ml"] = 0
    total = 0
    batch_idx = 0
    while total < words:
        count = min(cfg.batch_size, words - total)
        rng = _rng_for(cfg.seed, 0, batch_idx)
        lam, data, z = _draw_batch(system, cfg, n0, rng, count)
        for it in iter_list:
            dec, _, _, _ = mp_detect_batch(system.graph, z, lam, n0, it)
            errors[f"mp_{it}"] += int(np.any(dec != data, axis=1).sum())
        dec = ml_detect_batch(system.sl, system.books, z, lam,
                              system.choices, system.words)
        errors["ml"] += int(np.any(dec != data, axis=1).sum())
        total += count
        batch_idx += 1
    return {k: (total, e, e / total) for k, e in errors.items()}


def snr_at_level(snr_db, values, target: float):
    """SNR (dB) at which a monotone-decreasing curve crosses ``target``,
    by interpolation linear in (snr_db, log10 value); None if not reached."""
    snr_db = np.asarray(snr_db, dtype=float)
    logv = np.log10(np.asarray(values, dtype=float))
    logt = math.log10(target)
    for i in range(len(snr_db) - 1):
        lo, hi = logv[i], logv[i + 1]
        if (lo - logt) * (hi - logt) <= 0 and lo != hi:
            frac = (lo - logt) / (lo - hi)
            return float(snr_db[i] + frac * (snr_db[i + 1] - snr_db[i]))
    return None


def compare_systems(curves, targets=(1e-2, 1e-3, 1e-4)) -> list:
    """Horizontal dB gaps of each curve vs the first (reference) curve.

    ``curves``: list of (label, snr_db array, awep array).  Rows:
    (label, target, snr_ref, snr_this, gap_db, reached: bool); when a curve
    does not reach the target the gap is a lower bound computed at the
    curve's last grid SNR and flagged reached=False.
    """
    ref_label, ref_snr, ref_val = curves[0]
    rows = []
    for label, snr, val in curves[1:]:
        for target in targets:
            s_ref = snr_at_level(ref_snr, ref_val, target)
            s_cur = snr_at_level(snr, val, target)
            if s_ref is None:
                rows.append((label, target, None, s_cur, None, False))
            elif s_cur is None:
                rows.append((label, target, s_ref, None,
                             float(np.max(snr)) - s_ref, False))
            else:
                rows.append((label, target, s_ref, s_cur, s_cur - s_ref,
                             True))
    return rows


def points_to_csv(points, path, header: dict) -> None:
    from . import __version__

    with open(path, "w") as fh:
        fh.write(f"# version: {__version__}\n")
        for key in sorted(header):
            fh.write(f"# {key}: {header[key]}\n")
        fh.write("snr_db,words,errors,awep_hat,ci_lo,ci_hi\n")
        for p in points:
            fh.write(f"{p.snr_db:.6g},{p.words_run},{p.word_errors},"
                     f"{p.awep_hat:.12g},{p.ci_lo:.12g},{p.ci_hi:.12g}\n")
