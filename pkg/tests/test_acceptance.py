"""End-to-end acceptance criteria.

Each test asserts one criterion and records a one-line PASS/FAIL verdict that
is printed in the terminal summary (see conftest.pytest_terminal_summary).
All Monte Carlo checks use fixed seeds, so they are deterministic
regressions, not flaky statistical tests.
"""

import json
import math
import time
from itertools import product

import numpy as np
import pytest

from conftest import record_acceptance
from slmimo import channel, design, eigenstats, matrices, sim, structure
from slmimo.awep import (asymptotic_awep, asymptotic_pep_terms,
                         asymptotic_pep_terms_4x4_direct, awep_upper_bound,
                         diversity_gain, dominant_set, fit_loglog_slope)
from slmimo.cli import main as cli_main
from slmimo.detectors import ml_detect_batch
from slmimo.eigenstats import (expand_ordered_pdf, joint_mgf_batch,
                               nested_sum_batch, signed_monomial_sum_batch)
from slmimo.sim import SimConfig, convergence_study, run_curve, snr_at_level

# 9 dominant-term rows for the 4x4, N = 2 expansion: (alpha, beta_1..beta_4)
TABLE_4X4_N2 = {
    (1, 6, 4, 2, 0), (-2, 6, 4, 1, 1), (1, 6, 4, 0, 2),
    (-2, 5, 5, 2, 0), (4, 5, 5, 1, 1), (-2, 5, 5, 0, 2),
    (1, 4, 6, 2, 0), (-2, 4, 6, 1, 1), (1, 4, 6, 0, 2),
}

P_T_EXAMPLE = 6.0   # L * E_s for the 4x6 example layering
ETA_EXAMPLE = 12.0  # L * log2(M)


def _example_diffs(sl_example, designed_books):
    return structure.difference_set(designed_books, sl_example)


def _bound_curve(diffs, exp, snr_db, p_t=P_T_EXAMPLE, eta=ETA_EXAMPLE):
    return np.array([awep_upper_bound(diffs, exp, p_t / 10 ** (s / 10), eta)
                     for s in snr_db])


def test_criterion_1_expansion_regression():
    t0 = time.perf_counter()
    exp = expand_ordered_pdf(4, 4)
    dom = dominant_set(exp, 2)
    elapsed = time.perf_counter() - t0
    rows = {(int(exp.alphas[p]),) + tuple(int(b) for b in exp.betas[p])
            for p in dom.indices}
    ok = (exp.count == 201 and exp.normalizer == 144 and dom.b_min == 2
          and rows == TABLE_4X4_N2 and elapsed < 1.0)
    record_acceptance(1, ok, f"P=201 C=144 B_min=2, 9 dominant rows, "
                             f"{elapsed:.3f}s")
    assert exp.count == 201
    assert exp.normalizer == 144
    assert dom.b_min == 2
    assert rows == TABLE_4X4_N2
    assert elapsed < 1.0


def test_criterion_2_mgf_identity(exp22, exp44, exp66):
    rng = np.random.default_rng(0)
    draws = 10 ** 6
    worst_dev = 0.0
    worst_rel = 0.0
    for exp in (exp22, exp44, exp66):
        shifts = rng.exponential(0.5, size=(50, exp.n))
        mgf = joint_mgf_batch(exp, shifts)
        # independent path: literal bottom-up nested recursion
        nested = nested_sum_batch(exp, shifts) / float(exp.normalizer)
        rel = float(np.max(np.abs(nested / mgf - 1)))
        worst_rel = max(worst_rel, rel)
        assert rel < 1e-9
        # Monte Carlo estimate of E{prod exp(-a_m lam_m)} over 1e6 draws
        cfg = channel.MimoConfig(exp.n, exp.n)
        tot = np.zeros(50)
        totsq = np.zeros(50)
        done = 0
        while done < draws:
            lam = channel.eigen_spectrum_pdf_samples(cfg, rng, 200000)
            vals = np.exp(-(lam[:, None, :] * shifts[None, :, :]).sum(axis=2))
            tot += vals.sum(axis=0)
            totsq += (vals ** 2).sum(axis=0)
            done += lam.shape[0]
        mc = tot / done
        se = np.sqrt(np.maximum(totsq / done - mc ** 2, 0) / done)
        dev = float(np.max(np.abs(mc - mgf) / se))
        worst_dev = max(worst_dev, dev)
        assert dev < 3.0
    record_acceptance(2, True,
                      f"MGF vs 1e6-draw MC: worst dev {worst_dev:.2f} SE; "
                      f"nested vs state path rel {worst_rel:.1e}")


def test_criterion_3_diversity(sl_example, designed_books, exp44):
    assert diversity_gain(4, 4, 2) == 4
    for n in (2, 4, 6):
        assert diversity_gain(n, n, 0) == n * n
    diffs = _example_diffs(sl_example, designed_books)
    snr = np.array([40.0, 45.0, 50.0, 55.0, 60.0])
    ubs = _bound_curve(diffs, exp44, snr)
    slope = fit_loglog_slope(snr, ubs)
    ok = abs(slope + 4.0) <= 0.05 * 4.0
    record_acceptance(3, ok, f"G_d values exact; bound slope {slope:.3f} "
                             f"over 40-60 dB (target -4 +/- 5%)")
    assert ok


def test_criterion_4_asymptotic_consistency(sl_example, designed_books,
                                            exp44):
    diffs = _example_diffs(sl_example, designed_books)
    n0 = P_T_EXAMPLE / 10 ** 6.0  # 60 dB
    full = awep_upper_bound(diffs, exp44, n0, ETA_EXAMPLE)
    asym = asymptotic_awep(diffs, exp44, n0, ETA_EXAMPLE, sl_example.big_n)
    ratio = asym / full
    # direct printed closed form vs the generic truncated recursion
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(3):
        psi = np.concatenate([[0.0, 0.0],
                              rng.standard_normal(2)
                              + 1j * rng.standard_normal(2)])
        generic = asymptotic_pep_terms(psi, exp44, 0.05, 2)
        direct = asymptotic_pep_terms_4x4_direct(psi, exp44, 0.05)
        worst = max(worst,
                    abs(direct.i1 / generic.i1 - 1),
                    abs(direct.i2 / generic.i2 - 1))
    ok = 0.8 <= ratio <= 1.2 and worst < 1e-10
    record_acceptance(4, ok, f"asym/full = {ratio:.4f} at 60 dB; direct "
                             f"closed form rel err {worst:.1e}")
    assert 0.8 <= ratio <= 1.2
    assert worst < 1e-10


def test_criterion_5_detector_oracles(sl_example, designed_books):
    # MP == exact marginals on a cycle-free layering
    from slmimo.detectors import (FactorGraph, exact_marginals_batch,
                                  mp_detect_batch)
    a = np.array([[1, 0, 0], [1, 1, 0], [0, 1, 1], [0, 0, 1]], dtype=np.int8)
    sl_tree = structure.analyze_matrix(a)
    rng = np.random.default_rng(2)
    books = []
    for l in range(3):
        words = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
        words *= np.sqrt(4 / np.sum(np.abs(words) ** 2))
        books.append(structure.Codebook(layer=l, support=sl_tree.nl_sets[l],
                                        words=words, energy=1.0))
    books = structure.CodebookSet(books=tuple(books))
    choices, words = structure.superposed_alphabet(sl_tree, books)
    lam = np.sort(rng.exponential(1.0, size=(200, 4)), axis=1)[:, ::-1]
    idx = rng.integers(len(words), size=200)
    noise = np.sqrt(0.4 / 2) * (rng.standard_normal((200, 4))
                                + 1j * rng.standard_normal((200, 4)))
    z = np.sqrt(lam) * words[idx] + noise
    graph = FactorGraph(sl_tree, books)
    dec, beliefs, _, _ = mp_detect_batch(graph, z, lam, 0.8, 6)
    exact = exact_marginals_batch(sl_tree, books, z, lam, 0.8, choices,
                                  words)
    mp_rel = 0.0
    for l in range(3):
        np.testing.assert_allclose(np.exp(beliefs[l]), exact[l], rtol=1e-9,
                                   atol=1e-12)
        mp_rel = max(mp_rel, float(np.max(np.abs(
            np.exp(beliefs[l]) - exact[l]))))
        assert np.array_equal(np.argmax(beliefs[l], axis=1),
                              np.argmax(exact[l], axis=1))

    # ML vs naive brute force on 1000 noisy 4x4, M=4, L=6 instances
    choices_e, words_e = structure.superposed_alphabet(sl_example,
                                                       designed_books)
    count = 1000
    lam = np.sort(rng.exponential(1.0, size=(count, 4)), axis=1)[:, ::-1]
    idx = rng.integers(len(words_e), size=count)
    noise = np.sqrt(0.3) * (rng.standard_normal((count, 4))
                            + 1j * rng.standard_normal((count, 4)))
    z = np.sqrt(lam) * words_e[idx] + noise
    fast = ml_detect_batch(sl_example, designed_books, z, lam, choices_e,
                           words_e)
    amp = np.sqrt(lam)
    best_score = np.full(count, np.inf)
    naive = np.zeros((count, 6), dtype=np.int64)
    for combo in product(range(4), repeat=6):
        s = structure.superpose(sl_example, combo, designed_books)
        score = (np.abs(z - amp * s[None, :]) ** 2).sum(axis=1)
        better = score < best_score
        best_score[better] = score[better]
        naive[better] = combo
    agree = float(np.mean(np.all(fast == naive, axis=1)))
    record_acceptance(5, agree == 1.0,
                      f"MP exact on tree (max abs dev {mp_rel:.1e}); "
                      f"ML vs brute force agreement {agree:.1%} on 1000")
    assert agree == 1.0


def test_criterion_6_mp_convergence(sl_example, designed_books):
    cfg = SimConfig(n_t=4, n_r=4, snr_db=(20.0,), seed=5, batch_size=2500)
    words = 10 ** 5
    table = convergence_study(cfg, 20.0, [5, 10], words=words,
                              sl=sl_example, books=designed_books)
    _, e5, wer5 = table["mp_5"]
    _, e10, wer10 = table["mp_10"]
    _, eml, werml = table["ml"]
    se = math.sqrt(max(wer10 * (1 - wer10), werml * (1 - werml)) / words)
    ok = abs(wer5 - wer10) <= 3 * se and wer5 >= werml - 3 * se
    record_acceptance(6, ok, f"20 dB, {words} words: MP5 {wer5:.2e}, "
                             f"MP10 {wer10:.2e}, ML {werml:.2e}, SE {se:.1e}")
    assert abs(wer5 - wer10) <= 3 * se
    assert wer5 >= werml - 3 * se


def test_criterion_7_bound_tightness(sl_example, designed_books, exp44):
    # the union bound is an ML bound; MP's small suboptimality (criterion 6)
    # can sit above it where the bound is tight, so ML detection is used
    snr = (14.0, 16.0, 18.0, 20.0, 22.0)
    cfg = SimConfig(n_t=4, n_r=4, snr_db=snr, detector="ml",
                    min_errors=200, max_words=500000, seed=11,
                    batch_size=5000)
    points, report = run_curve(cfg, sl_example, designed_books,
                               analytic=True)
    mc = np.array([p.awep_hat for p in points])
    below = bool(np.all(mc <= report.upper_bound))
    snr_mc = snr_at_level(np.array(snr), mc, 1e-3)
    snr_ub = snr_at_level(np.array(snr), report.upper_bound, 1e-3)
    gap = snr_ub - snr_mc
    ok = below and gap <= 1.0
    record_acceptance(7, ok, f"MC below bound at all {len(snr)} points; "
                             f"horizontal gap at 1e-3: {gap:.2f} dB")
    assert below
    assert 0.0 < gap <= 1.0


def test_criterion_8_design_gain(sl_example, designed_books, baseline_books,
                                 exp44):
    snr = np.array([20.0, 22.0, 24.0, 26.0, 28.0])
    diffs_d = structure.difference_set(designed_books, sl_example)
    diffs_b = structure.difference_set(baseline_books, sl_example)
    ub_d = _bound_curve(diffs_d, exp44, snr)
    ub_b = _bound_curve(diffs_b, exp44, snr)
    s_d = snr_at_level(snr, ub_d, 1e-4)
    s_b = snr_at_level(snr, ub_b, 1e-4)
    gain = s_b - s_d
    ok = s_d is not None and s_b is not None and gain >= 1.5
    record_acceptance(8, ok, f"optimized vs rotated-QAM at 1e-4: "
                             f"{gain:.2f} dB (threshold 1.5)")
    assert gain >= 1.5


def test_criterion_9_x_structure_comparison(sl_example, designed_books,
                                            exp44):
    # same-rate X-shaped layering: 4 layers of 8-PSK (eta = 12 bits)
    sl_x = structure.analyze_matrix(matrices.A_X)
    books_x = design.baseline_codebooks(sl_x, design.build_base("psk", 8))
    assert structure.check_design_condition(sl_x, books_x).passed
    diffs_x = structure.difference_set(books_x, sl_x)
    diffs_d = _example_diffs(sl_example, designed_books)
    snr = np.array([18.0, 22.0, 26.0, 30.0, 34.0])
    ub_d = _bound_curve(diffs_d, exp44, snr)
    ub_x = _bound_curve(diffs_x, exp44, snr, p_t=4.0, eta=12.0)
    rows = sim.compare_systems([("sl", snr, ub_d), ("x", snr, ub_x)],
                               targets=(1e-3,))
    row = [r for r in rows if r[0] == "x"][0]
    _, _, s_ref, s_x, gap, reached = row
    ok = bool(reached) and gap > 0
    record_acceptance(9, ok, f"SL vs X-shaped layering at 1e-3: +{gap:.1f} "
                             f"dB (magnitude reported, not asserted)")
    assert reached
    assert gap > 0


def test_criterion_10_cli_determinism(tmp_path, designed_books):
    books_path = tmp_path / "books.json"
    structure.save_codebooks(designed_books, books_path)
    cfg = {"matrix": "example", "codebooks": str(books_path),
           "n_t": 4, "n_r": 4, "snr_db": [14.0], "detector": "mp",
           "mp_iters": 5, "min_errors": 50, "max_words": 2000,
           "batch_size": 250, "seed": 9}
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    outputs = []
    for threads, name in ((1, "t1"), (4, "t4"), (1, "t1b")):
        out = tmp_path / name
        rc = cli_main(["simulate", "--config", str(cfg_path),
                       "--out", str(out), "--threads", str(threads)])
        assert rc == 0
        outputs.append((out / "simulate.csv").read_bytes())
    ok = outputs[0] == outputs[1] == outputs[2]
    record_acceptance(10, ok, "simulate.csv bitwise identical across "
                              "reruns and thread counts 1/4")
    assert ok
