"""Offline codebook design.

A unit-energy base constellation is repeated (optionally rail-permuted) over
each layer's dimensions, then a diagonal layer operator rotates and scales
every dimension.  Rotation angles separate the interferers sharing a channel;
scaling factors are then optimized layer-group by layer-group, from the
layers with the most leading zeros down to the strongest ones, minimizing the
dominant-term AWEP at a fixed design SNR, with the last group placed by
maximizing the minimum mean-weighted Euclidean distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import awep, eigenstats
from .structure import (Codebook, CodebookSet, SLMatrix,
                        check_design_condition, difference_set)

GRID_POINTS = 41          # per hypersphere angle, spanning [0, pi/2]
DESIGN_SNR_DB = 30.0      # SNR at which step objectives are evaluated
E_S = 1.0                 # per-layer symbol energy convention
GRID_BUDGET = 2 ** 21     # max joint grid evaluations per step


class DesignBudgetError(ValueError):
    """The joint grid for one step exceeds the evaluation budget."""


class DesignConditionError(ValueError):
    """The finished design violates the sum-injectivity condition."""

    def __init__(self, witness):
        self.witness = witness
        super().__init__(f"design condition violated; witness pair {witness}")


@dataclass(frozen=True)
class BaseConstellation:
    kind: str                 # "qam" | "pam" | "psk"
    m: int
    points: np.ndarray        # (M,) complex, unit average energy
    permutation: tuple | None  # index permutation for successive dimensions

    def word(self, n_dims: int) -> np.ndarray:
        """(M, n_dims) multidimensional symbols: dimension j carries the
        base point at index perm^j(i)."""
        out = np.empty((self.m, n_dims), dtype=complex)
        idx = np.arange(self.m)
        for j in range(n_dims):
            out[:, j] = self.points[idx]
            if self.permutation is not None:
                idx = np.asarray(self.permutation)[idx]
        return out


def _pam_levels(k: int) -> np.ndarray:
    return np.arange(-(k - 1), k, 2, dtype=float)


def _rail_permutation(k: int) -> np.ndarray:
    """Odd positions then even positions: any two adjacent levels land at
    least two level-spacings apart."""
    return np.concatenate([np.arange(1, k, 2), np.arange(0, k, 2)])


def build_base(kind: str, m: int, permute: bool = False) -> BaseConstellation:
    """Unit-average-energy base constellation of size m.

    "qam" and "pam" both build the square lattice (the pam kind flags that
    real/imaginary rails are processed independently downstream); "psk" puts
    m points on the unit circle.  ``permute`` enables the rail permutation
    used to separate neighboring symbols across dimensions.
    """
    kind = kind.lower()
    if kind in ("qam", "pam"):
        k = math.isqrt(m)
        if k * k != m:
            raise ValueError(f"{kind} size must be a perfect square, got {m}")
        rail = _pam_levels(k)
        re, im = np.meshgrid(rail, rail, indexing="ij")
        points = (re + 1j * im).reshape(-1)
        perm = None
        if permute:
            # independent permutation of the real and imaginary rails
            prail = _rail_permutation(k)
            ri, ii = np.meshgrid(np.arange(k), np.arange(k), indexing="ij")
            perm = tuple(int(prail[r] * k + prail[i])
                         for r, i in zip(ri.reshape(-1), ii.reshape(-1)))
    elif kind == "psk":
        points = np.exp(2j * np.pi * np.arange(m) / m)
        perm = tuple(np.roll(np.arange(m), -1)) if permute else None
    else:
        raise ValueError(f"unsupported constellation kind {kind!r}")
    points = points / np.sqrt(np.mean(np.abs(points) ** 2))
    return BaseConstellation(kind=kind, m=m, points=points,
                             permutation=perm)


def rotation_angles(sl: SLMatrix, m: int,
                    real_valued: bool = False) -> np.ndarray:
    """(n, L) angle table: at channel m', the d interferers get
    k / d * (2 pi / M) in ascending layer order; zeros where a = 0."""
    phis = np.zeros((sl.n, sl.num_layers))
    if real_valued:
        return phis
    for chan in range(sl.n):
        layers = sl.d_sets[chan]
        d = len(layers)
        for k, l in enumerate(layers):
            phis[chan, l] = k / d * (2.0 * np.pi / m)
    return phis


def _build_books(sl: SLMatrix, base: BaseConstellation, phis: np.ndarray,
                 rhos: dict, e_s: float = E_S) -> CodebookSet:
    """Assemble codebooks from per-(layer, dim) scales and angles; layers
    missing from ``rhos`` get the equal-power split."""
    books = []
    for l in range(sl.num_layers):
        support = sl.nl_sets[l]
        n_l = len(support)
        rho = np.asarray(rhos.get(l, np.full(n_l, np.sqrt(e_s / n_l))))
        gains = rho * np.exp(1j * phis[list(support), l])
        words = base.word(n_l) * gains[None, :]
        books.append(Codebook(layer=l, support=support, words=words,
                              energy=e_s))
    return CodebookSet(books=tuple(books))


def _hypersphere(angles: np.ndarray) -> np.ndarray:
    """Map k-1 angles to a unit-norm nonnegative k-vector."""
    k = angles.shape[-1] + 1
    out = np.ones(angles.shape[:-1] + (k,))
    for j in range(k - 1):
        out[..., j] *= np.cos(angles[..., j])
        out[..., j + 1:] *= np.sin(angles[..., j])[..., None]
    return out


def _angle_grid(num_angles: int, grid_res: int) -> np.ndarray:
    """(grid_res^num_angles, num_angles) joint grid over [0, pi/2]."""
    if num_angles == 0:
        return np.zeros((1, 0))
    if grid_res ** num_angles > GRID_BUDGET:
        raise DesignBudgetError(
            f"{grid_res}^{num_angles} grid points exceed the budget")
    axis = np.linspace(0.0, np.pi / 2.0, grid_res)
    mesh = np.meshgrid(*([axis] * num_angles), indexing="ij")
    return np.stack([g.reshape(-1) for g in mesh], axis=1)


@dataclass
class StepRecord:
    n_prime: int
    layers: tuple
    objective: str
    grid_res: int
    evaluations: int
    best_objective: float
    rhos: dict


@dataclass
class DesignResult:
    books: CodebookSet
    phis: np.ndarray
    steps: list
    base: BaseConstellation

    def trace_lines(self) -> list:
        lines = []
        for s in self.steps:
            rho_s = {l: [round(float(v), 6) for v in r]
                     for l, r in s.rhos.items()}
            lines.append(
                f"step N'={s.n_prime} layers={list(s.layers)} "
                f"objective={s.objective} grid={s.grid_res} "
                f"evals={s.evaluations} best={s.best_objective:.6e} "
                f"rhos={rho_s}")
        return lines


def _step_layers(sl: SLMatrix, n_prime: int) -> tuple:
    return tuple(l for l in range(sl.num_layers)
                 if sl.column_leading_zeros(l) == n_prime)


def _collision_tables(sl: SLMatrix, base: BaseConstellation,
                      phis: np.ndarray, step_layers, determined) -> list:
    """Per-channel injectivity test data for the channels that become fully
    determined during the current step.

    For channel m with interferers D_m, the per-channel sum is injective iff
    no nonzero combination of per-layer codeword differences cancels at m.
    Returns (channel, [(layer, dim-in-support)], delta (K, d)) triples where
    delta holds every nonzero per-layer difference pattern at that channel,
    to be contracted with the candidate per-dim scales.
    """
    step_set = set(step_layers)
    tables = []
    for chan in range(sl.n):
        layers = list(sl.d_sets[chan])
        if not (set(layers) <= determined and step_set & set(layers)):
            continue
        dims = [list(sl.nl_sets[l]).index(chan) for l in layers]
        cols = []
        for l, dim in zip(layers, dims):
            w = base.word(len(sl.nl_sets[l]))[:, dim] * np.exp(
                1j * phis[chan, l])
            d = np.unique(np.round((w[:, None] - w[None, :]).reshape(-1),
                                   12))
            cols.append(d)
        mesh = np.meshgrid(*cols, indexing="ij")
        delta = np.stack([g.reshape(-1) for g in mesh], axis=1)
        delta = delta[np.abs(delta).max(axis=1) > 1e-12]
        tables.append((chan, list(zip(layers, dims)), delta))
    return tables


def _candidate_feasible(tables: list, rhos: dict) -> bool:
    """Whether the per-dim scales keep every checked channel collision-free."""
    for _, layer_dims, delta in tables:
        r = np.array([rhos[l][dim] for l, dim in layer_dims])
        if np.min(np.abs(delta @ r)) < 1e-9:
            return False
    return True


def optimize_scaling_step(sl: SLMatrix, base: BaseConstellation,
                          phis: np.ndarray, fixed_rhos: dict,
                          exp, n_prime: int,
                          n0_design: float, grid_res: int = GRID_POINTS,
                          e_s: float = E_S) -> StepRecord:
    """Joint grid search over the hypersphere angles of the layers with
    exactly n_prime leading zeros, minimizing the dominant-term AWEP
    restricted to difference vectors with F >= n_prime.

    Layers with later steps pending (fewer leading zeros) sit at the
    equal-power split during the search; they cannot produce F >= n_prime
    differences and are held equal across candidates anyway.
    """
    layers = _step_layers(sl, n_prime)
    free = [l for l in layers if len(sl.nl_sets[l]) > 1]
    counts = [len(sl.nl_sets[l]) - 1 for l in free]
    grid = _angle_grid(sum(counts), grid_res)
    eta = sl.num_layers * math.log2(base.m)
    participating = [l for l in range(sl.num_layers)
                     if sl.column_leading_zeros(l) >= n_prime]
    tables = _collision_tables(sl, base, phis, layers,
                               set(layers) | set(fixed_rhos))
    best = (math.inf, None)
    for g in range(grid.shape[0]):
        rhos = dict(fixed_rhos)
        pos = 0
        for l, k in zip(free, counts):
            rhos[l] = np.sqrt(e_s) * _hypersphere(grid[g, pos:pos + k])
            pos += k
        for l in layers:
            if l not in rhos:
                rhos[l] = np.array([np.sqrt(e_s)])
        # a zero per-dim scale always breaks per-channel injectivity
        if min(rhos[l].min() for l in layers) < 1e-6 * np.sqrt(e_s):
            continue
        if not _candidate_feasible(tables, rhos):
            continue
        books = _build_books(sl, base, phis, rhos, e_s)
        diffs = difference_set(books, sl, layers=participating)
        val = awep.asymptotic_awep(diffs, exp, n0_design, eta, n_prime)
        if val < best[0]:
            best = (val, {l: rhos[l] for l in layers})
    if best[1] is None:
        raise DesignConditionError(
            f"no collision-free scaling on the N'={n_prime} grid")
    return StepRecord(n_prime=n_prime, layers=layers,
                      objective="asymptotic-awep", grid_res=grid_res,
                      evaluations=grid.shape[0], best_objective=best[0],
                      rhos=best[1])


def maximize_min_weighted_distance(sl: SLMatrix, base: BaseConstellation,
                                   phis: np.ndarray, fixed_rhos: dict,
                                   lambda_bar: np.ndarray,
                                   n_prime: int = 0,
                                   grid_res: int = GRID_POINTS,
                                   e_s: float = E_S,
                                   exp=None,
                                   n0_design: float | None = None,
                                   screen_layers: int = 2,
                                   verify_top: int = 24) -> StepRecord:
    """Final scaling step: screen the grid, then pick the candidate with the
    smallest complete union-bound AWEP at the design SNR.

    Screening uses two cheap figures computed exactly over difference
    patterns in which at most ``screen_layers`` layers differ (per-channel
    sums include the cross terms between layers sharing a channel):

    * the minimum weighted Euclidean distance min sum_m lam_m |psi_m|^2,
    * a diversity-aware union-bound surrogate
      sum_pairs prod_m (1 + lam_m |psi_m|^2 / (4 n0))^-1,
      which penalizes difference vectors whose energy collapses onto few
      (weak) channels in a way the worst-case distance cannot see.

    The top candidates of both rankings are then scored with the exact
    union bound over the full difference set when ``exp`` is given (the
    weighted-distance winner is used directly otherwise).
    """
    from itertools import combinations

    from . import awep

    layers = _step_layers(sl, n_prime)
    free = [l for l in layers if len(sl.nl_sets[l]) > 1]
    counts = [len(sl.nl_sets[l]) - 1 for l in free]
    grid = _angle_grid(sum(counts), grid_res)
    participating = [l for l in range(sl.num_layers)
                     if sl.column_leading_zeros(l) >= n_prime]
    if n0_design is None:
        p_t = sl.num_layers * e_s
        n0_design = p_t / 10.0 ** (DESIGN_SNR_DB / 10.0)

    # Per-layer unscaled codeword differences on the support dims with
    # ordered-pair counts (rotation applied; scaling enters via the rhos).
    diff_cache = {}
    for l in participating:
        n_l = len(sl.nl_sets[l])
        w = base.word(n_l) * np.exp(
            1j * phis[list(sl.nl_sets[l]), l])[None, :]
        d = (w[:, None, :] - w[None, :, :]).reshape(-1, n_l)
        d = d[np.abs(d).max(axis=1) > 1e-12]
        keys = np.round(d, 12).view(float).reshape(d.shape[0], -1)
        uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
        vecs = np.zeros((uniq.shape[0], n_l), dtype=complex)
        vecs[inverse] = d
        diff_cache[l] = (vecs, np.bincount(inverse).astype(float))

    patterns = []
    for r in range(1, min(screen_layers, len(participating)) + 1):
        patterns.extend(combinations(participating, r))

    def rho_for(l, g_angles):
        if l in layers:
            if l in free:
                pos = sum(counts[:free.index(l)])
                k = counts[free.index(l)]
                return np.sqrt(e_s) * _hypersphere(g_angles[pos:pos + k])
            return np.array([np.sqrt(e_s)])
        if l in fixed_rhos:
            return np.asarray(fixed_rhos[l])
        n_l = len(sl.nl_sets[l])
        return np.full(n_l, np.sqrt(e_s / n_l))

    lam = np.asarray(lambda_bar, dtype=float)
    tables = _collision_tables(sl, base, phis, layers,
                               set(layers) | set(fixed_rhos))
    total_pts = grid.shape[0]
    mins = np.full(total_pts, -np.inf)
    srg = np.full(total_pts, np.inf)
    chunk = 4096
    for start in range(0, total_pts, chunk):
        g_block = grid[start:start + chunk]
        b = g_block.shape[0]
        # per free layer, rho profile for the whole block: (b, n_l)
        rho_blk = {}
        pos = 0
        for l, k in zip(free, counts):
            rho_blk[l] = np.sqrt(e_s) * _hypersphere(g_block[:, pos:pos + k])
            pos += k

        def rho_col(l, dim):
            if l in rho_blk:
                return rho_blk[l][:, dim]
            return np.full(b, rho_for(l, None)[dim])

        feas = np.ones(b, dtype=bool)
        # a zero per-dim scale always breaks per-channel injectivity
        for r in rho_blk.values():
            feas &= r.min(axis=1) > 1e-6 * np.sqrt(e_s)
        for _, layer_dims, delta in tables:
            cols = [rho_col(l, dim) for l, dim in layer_dims]
            sums = np.stack(cols, axis=1) @ delta.T
            feas &= np.min(np.abs(sums), axis=1) > 1e-9

        blk_min = np.full(b, np.inf)
        blk_srg = np.zeros(b)
        for combo in patterns:
            # per-channel sums over every cross product of the involved
            # layers' differences: psi_m = sum_l rho_{l,m} delta_{l,m}
            ks = tuple(diff_cache[l][0].shape[0] for l in combo)
            shape = (b,) + ks
            dist = np.zeros(shape)
            bnd = np.ones(shape)
            channels = sorted(set().union(
                *[sl.nl_sets[l] for l in combo]))
            for m in channels:
                psi = np.zeros(shape, dtype=complex)
                for i, l in enumerate(combo):
                    sup = list(sl.nl_sets[l])
                    if m not in sup:
                        continue
                    dim = sup.index(m)
                    d_shape = [1] * (len(combo) + 1)
                    d_shape[i + 1] = ks[i]
                    psi = psi + (rho_col(l, dim).reshape(
                        (b,) + (1,) * len(combo))
                        * diff_cache[l][0][:, dim].reshape(d_shape))
                prof = np.abs(psi) ** 2
                dist += lam[m] * prof
                bnd *= 1.0 / (1.0 + lam[m] * prof / (4.0 * n0_design))
            blk_min = np.minimum(blk_min, dist.reshape(b, -1).min(axis=1))
            w = diff_cache[combo[0]][1]
            for l in combo[1:]:
                w = np.multiply.outer(w, diff_cache[l][1])
            blk_srg += bnd.reshape(b, -1) @ w.reshape(-1)
        mins[start:start + b] = np.where(feas, blk_min, -np.inf)
        srg[start:start + b] = np.where(feas, blk_srg, np.inf)

    if not np.any(np.isfinite(srg)):
        raise DesignConditionError(
            f"no collision-free scaling on the N'={n_prime} grid")

    half = max(1, verify_top // 2)
    shortlist = list(dict.fromkeys(
        list(np.argsort(srg, kind="stable")[:half])
        + list(np.argsort(-mins, kind="stable")[:half])))
    shortlist = [i for i in shortlist if np.isfinite(srg[i])]

    if exp is None:
        idx = shortlist[0] if shortlist else int(np.argmax(mins))
        rhos = {l: rho_for(l, grid[idx]) for l in layers}
        return StepRecord(n_prime=n_prime, layers=layers,
                          objective="min-weighted-distance",
                          grid_res=grid_res, evaluations=total_pts,
                          best_objective=float(mins[idx]), rhos=rhos)

    eta = sl.num_layers * math.log2(base.m)
    best = (math.inf, -math.inf, None)
    for idx in shortlist:
        rhos = {l: rho_for(l, grid[idx]) for l in layers}
        books = _build_books(sl, base, phis, {**fixed_rhos, **rhos}, e_s)
        diffs = difference_set(books, sl, layers=participating)
        ub = awep.awep_upper_bound(diffs.with_f_at_least(n_prime), exp,
                                   n0_design, eta)
        sel = diffs.with_f_at_least(n_prime)
        exact_min = float((np.abs(sel.vectors) ** 2 @ lam).min())
        if (ub, -exact_min) < (best[0], -best[1]):
            best = (ub, exact_min, rhos)
    if best[2] is None:
        raise DesignConditionError(
            f"no collision-free scaling on the N'={n_prime} grid")
    return StepRecord(n_prime=n_prime, layers=layers,
                      objective="complete-awep", grid_res=grid_res,
                      evaluations=total_pts,
                      best_objective=best[0], rhos=best[2])


def design_codebooks(sl: SLMatrix, base: BaseConstellation,
                     e_s: float = E_S, grid_res: int = GRID_POINTS,
                     design_snr_db: float = DESIGN_SNR_DB,
                     real_valued: bool = False,
                     n_t: int | None = None,
                     n_r: int | None = None) -> DesignResult:
    """Full design: rotation angles, then scaling steps N' = N..1 on the
    dominant-term AWEP, then the min-weighted-distance step at N' = 0."""
    n_t = sl.n if n_t is None else n_t
    n_r = sl.n if n_r is None else n_r
    exp = eigenstats.expand_ordered_pdf(n_t, n_r)
    phis = rotation_angles(sl, base.m, real_valued=real_valued)
    p_t = sl.num_layers * e_s
    n0_design = p_t / 10.0 ** (design_snr_db / 10.0)
    rhos: dict = {}
    steps = []
    for n_prime in range(sl.big_n, 0, -1):
        if not _step_layers(sl, n_prime):
            continue
        rec = optimize_scaling_step(sl, base, phis, rhos, exp, n_prime,
                                    n0_design, grid_res, e_s)
        rhos.update(rec.rhos)
        steps.append(rec)
    if _step_layers(sl, 0):
        lam_bar = eigenstats.mean_ordered_eigenvalues(exp)
        rec = maximize_min_weighted_distance(sl, base, phis, rhos, lam_bar,
                                             0, grid_res, e_s, exp=exp,
                                             n0_design=n0_design)
        rhos.update(rec.rhos)
        steps.append(rec)
    books = _build_books(sl, base, phis, rhos, e_s)
    result = check_design_condition(sl, books)
    if not result.passed:
        raise DesignConditionError(result.witness)
    return DesignResult(books=books, phis=phis, steps=steps, base=base)


def baseline_codebooks(sl: SLMatrix, base: BaseConstellation,
                       e_s: float = E_S,
                       real_valued: bool = False) -> CodebookSet:
    """Rotated-base baseline: step-1 angles, equal power on every layer."""
    phis = rotation_angles(sl, base.m, real_valued=real_valued)
    return _build_books(sl, base, phis, {}, e_s)
