"""Monomial expansion of the ordered-eigenvalue density and the closed-form
nested integrals, cross-checked against exact rational arithmetic, numeric
quadrature, and 50-digit evaluation."""

import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import integrate

from slmimo import eigenstats
from slmimo.eigenstats import (ExpansionSizeError, expand_ordered_pdf,
                               joint_mgf, joint_mgf_batch,
                               mean_ordered_eigenvalues, nested_integral,
                               nested_sum_batch, signed_monomial_sum_batch,
                               _nested_exact, _signed_monomial_sum_mp)


class TestExpansion:
    def test_2x2_terms_by_hand(self, exp22):
        # (lam1 - lam2)^2 = lam1^2 - 2 lam1 lam2 + lam2^2
        assert exp22.n == 2 and exp22.delta == 0 and exp22.count == 3
        terms = {tuple(b): a for a, b in zip(exp22.alphas, exp22.betas)}
        assert terms == {(0, 2): 1, (1, 1): -2, (2, 0): 1}

    def test_4x4_size(self, exp44):
        assert exp44.count == 201
        assert exp44.normalizer == Fraction(144)
        assert exp44.total_degree() == 12
        assert all(int(b.sum()) <= 12 for b in exp44.betas)

    def test_6x6_size(self, exp66):
        assert exp66.count == 56183
        assert exp66.normalizer == Fraction(1194393600)

    def test_rectangular_delta(self):
        exp = expand_ordered_pdf(2, 4)
        assert exp.n == 2 and exp.delta == 2
        # (lam1 lam2)^delta (lam1 - lam2)^2 is homogeneous of degree 6
        assert int(exp.betas.min()) >= exp.delta
        assert all(int(b.sum()) == exp.total_degree() for b in exp.betas)

    def test_size_limits(self):
        with pytest.raises(ExpansionSizeError):
            expand_ordered_pdf(9, 9)
        with pytest.raises(ValueError):
            expand_ordered_pdf(0, 4)

    def test_pdf_integrates_to_one_2x2(self, exp22):
        val, err = integrate.dblquad(
            lambda l2, l1: exp22.pdf(np.array([l1, l2])),
            0, 40, 0, lambda l1: l1)
        assert val == pytest.approx(1.0, abs=1e-7)

    def test_pdf_matches_expansion(self, exp44):
        rng = np.random.default_rng(0)
        for _ in range(10):
            lam = np.sort(rng.exponential(2.0, size=4))[::-1]
            via_terms = (exp44.evaluate(lam) * math.exp(-lam.sum())
                         / float(exp44.normalizer))
            assert exp44.pdf(lam) == pytest.approx(via_terms, rel=1e-9)

    def test_pdf_outside_ordered_domain(self, exp22):
        assert exp22.pdf(np.array([1.0, 2.0])) == 0.0

    def test_dump_format(self, exp22, tmp_path):
        path = tmp_path / "terms.txt"
        exp22.dump(path)
        lines = path.read_text().splitlines()
        assert len(lines) == 3
        assert [int(v) for v in lines[0].split()] == [1, 0, 2]


class TestNestedIntegral:
    def test_one_dimensional_closed_form(self):
        # int_0^inf lam^b e^{-(1+s) lam} = b! / (1+s)^{b+1}
        for b in range(5):
            for s in (0.0, 0.7, 3.2):
                want = math.factorial(b) / (1.0 + s) ** (b + 1)
                assert nested_integral([b], [s]) == pytest.approx(
                    want, rel=1e-12)

    @pytest.mark.parametrize("beta,shift", [
        ((0, 0), (0.0, 0.0)), ((2, 1), (0.5, 0.0)), ((3, 2), (1.3, 2.1))])
    def test_two_dimensional_quadrature(self, beta, shift):
        def f(l2, l1):
            return (l1 ** beta[0] * l2 ** beta[1]
                    * math.exp(-(1 + shift[0]) * l1 - (1 + shift[1]) * l2))

        want, err = integrate.dblquad(f, 0, 60, 0, lambda l1: l1)
        assert nested_integral(beta, shift) == pytest.approx(want, rel=1e-8)

    def test_exact_path_matches_float(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            beta = list(rng.integers(0, 6, size=3))
            shift = [Fraction(int(rng.integers(0, 8)), 4) for _ in range(3)]
            exact = nested_integral(beta, shift)
            as_float = nested_integral(beta, [float(s) + 1e-300
                                              for s in shift])
            assert as_float == pytest.approx(exact, rel=1e-10)

    def test_validation(self):
        with pytest.raises(ValueError):
            nested_integral([-1], [0.0])
        with pytest.raises(ValueError):
            nested_integral([1, 1], [0.0])
        with pytest.raises(ValueError):
            nested_integral([1], [-0.5])


class TestJointMgf:
    def test_zero_shift_is_one(self, exp44):
        assert joint_mgf(exp44, [0.0] * 4) == 1.0

    def test_exact_rational_oracle(self, exp44):
        # integer shifts admit an all-Fraction evaluation of the same sum
        rng = np.random.default_rng(8)
        shifts = rng.integers(0, 5, size=(6, 4))
        got = joint_mgf_batch(exp44, shifts.astype(float))
        for row, g in zip(shifts, got):
            acc = Fraction(0)
            for a, beta in zip(exp44.alphas, exp44.betas):
                acc += a * _nested_exact(list(beta), [int(s) for s in row])
            assert g == pytest.approx(float(acc / exp44.normalizer),
                                      rel=1e-12)

    def test_monotone_in_shift(self, exp44):
        base = np.array([0.3, 0.2, 0.1, 0.05])
        vals = [joint_mgf(exp44, base * k) for k in (0.5, 1.0, 2.0, 4.0)]
        assert all(v1 > v2 > 0 for v1, v2 in zip(vals, vals[1:]))

    def test_validation(self, exp44):
        with pytest.raises(ValueError):
            joint_mgf(exp44, [0.1] * 3)
        with pytest.raises(ValueError):
            joint_mgf(exp44, [-0.1, 0, 0, 0])


class TestBatchedKernels:
    def test_state_kernel_vs_50_digit(self, exp44):
        rng = np.random.default_rng(21)
        shifts = rng.exponential(1.0, size=(5, 4))
        got = signed_monomial_sum_batch(exp44, shifts)
        for row, g in zip(shifts, got):
            ref = _signed_monomial_sum_mp(exp44, row)
            assert g == pytest.approx(ref, rel=1e-9)

    def test_nested_kernel_vs_state_kernel(self, exp44):
        rng = np.random.default_rng(22)
        shifts = rng.exponential(2.0, size=(40, 4))
        a = signed_monomial_sum_batch(exp44, shifts)
        b = nested_sum_batch(exp44, shifts)
        np.testing.assert_allclose(a, b, rtol=1e-9)

    def test_dominant_subset_and_truncation(self, exp44):
        # truncate_after=0 with all indices reproduces the full sum
        shifts = np.array([[0.9, 0.5, 0.2, 0.1]])
        full = signed_monomial_sum_batch(exp44, shifts)
        again = signed_monomial_sum_batch(exp44, shifts,
                                          indices=range(exp44.count),
                                          truncate_after=0)
        np.testing.assert_allclose(full, again, rtol=1e-12)

    def test_shape_validation(self, exp44):
        with pytest.raises(ValueError):
            signed_monomial_sum_batch(exp44, np.zeros((2, 3)))


class TestMeans:
    def test_mean_eigenvalues_4x4(self, exp44):
        lam_bar = mean_ordered_eigenvalues(exp44)
        assert np.all(np.diff(lam_bar) < 0)
        # E[sum lam] = E ||H||_F^2 = n_t n_r, exactly
        assert lam_bar.sum() == pytest.approx(16.0, rel=1e-12)

    def test_mean_eigenvalues_2x2(self, exp22):
        lam_bar = mean_ordered_eigenvalues(exp22)
        assert lam_bar.sum() == pytest.approx(4.0, rel=1e-12)
