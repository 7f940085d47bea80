import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from zipbf import (
    CountSummary,
    log_bf_all_zeros,
    log_bf_gamma,
    log_bf_jeffreys,
    log_bf_l1,
    posterior_prob,
    summarize,
)
from zipbf.errors import AllZerosError, DomainError, InputError

# mpmath evaluations of the finite sums at 30 digits
UTI_BF = 223.12676544057801
TERROR_BF = 0.28132845190167889
N2K1S1_BF = 0.80473785412436502

UTI = [0] * 81 + [1] * 9 + [2] * 7 + [3]
TERROR = [0] * 38 + [1] * 26 + [2] * 8 + [3] * 2 + [4]

summaries = st.integers(1, 300).flatmap(
    lambda n: st.integers(0, n - 1).flatmap(
        lambda k: st.integers(n - k, n - k + 400).map(lambda s: CountSummary(n, k, s))
    )
)


class TestSummary:
    def test_summarize(self):
        s = summarize([0, 2, 0, 3])
        assert (s.n, s.k, s.s) == (4, 2, 5)
        assert s.log_factorial_product == pytest.approx(math.log(12))

    @pytest.mark.parametrize("bad", [[], [-1, 2], [1.5, 2]])
    def test_rejects(self, bad):
        with pytest.raises(InputError):
            summarize(bad)

    @pytest.mark.parametrize("n,k,s", [(0, 0, 0), (3, 4, 1), (3, 1, 1), (3, 3, 2), (3, 1, 0)])
    def test_inconsistent(self, n, k, s):
        with pytest.raises(InputError):
            CountSummary(n, k, s)


class TestJeffreys:
    def test_uti(self):
        res = log_bf_jeffreys(summarize(UTI))
        assert res.bf10 == pytest.approx(UTI_BF, rel=1e-12)
        assert res.method == "closed_form"

    def test_terror(self):
        assert log_bf_jeffreys(summarize(TERROR)).bf10 == pytest.approx(TERROR_BF, rel=1e-12)

    def test_tiny(self):
        assert log_bf_jeffreys(CountSummary(2, 1, 1)).bf10 == pytest.approx(N2K1S1_BF, rel=1e-13)

    def test_no_zeros(self):
        # with k = 0 only the j = 0 term survives
        for n in (1, 5, 40):
            assert log_bf_jeffreys(CountSummary(n, 0, 3 * n)).bf10 == pytest.approx(1 / (n + 1), rel=1e-14)

    def test_all_zeros_refused(self):
        with pytest.raises(AllZerosError):
            log_bf_jeffreys(summarize([0, 0]))

    def test_large_sample_is_finite(self):
        res = log_bf_jeffreys(CountSummary(200_000, 150_000, 120_000))
        assert math.isfinite(res.log_bf10)
        assert res.post_prob_m1 == pytest.approx(1.0)

    @given(summaries)
    @settings(max_examples=200)
    def test_increasing_in_s(self, summ):
        nxt = CountSummary(summ.n, summ.k, summ.s + 1)
        a, b = log_bf_jeffreys(summ).log_bf10, log_bf_jeffreys(nxt).log_bf10
        assert b > a if summ.k else b == pytest.approx(a, abs=1e-12)

    @given(summaries)
    @settings(max_examples=200)
    def test_increasing_in_k(self, summ):
        assume(summ.k + 1 < summ.n and summ.s >= summ.n - summ.k - 1)
        nxt = CountSummary(summ.n, summ.k + 1, summ.s)
        assert log_bf_jeffreys(nxt).log_bf10 > log_bf_jeffreys(summ).log_bf10


class TestPosterior:
    def test_equal_odds(self):
        assert posterior_prob(0.0) == 0.5
        assert posterior_prob(math.log(3.0)) == pytest.approx(0.75)

    def test_prior_odds(self):
        assert posterior_prob(math.log(2.0), prior_odds=0.5) == pytest.approx(0.5)
        res = log_bf_jeffreys(summarize(UTI), prior_odds=0.25)
        assert res.post_prob_m1 == pytest.approx(1 - 1 / (1 + 0.25 * UTI_BF))

    def test_extremes(self):
        assert 0.0 <= posterior_prob(-800.0) < 1e-300
        assert posterior_prob(800.0) == 1.0

    @pytest.mark.parametrize("bad", [0.0, -1.0])
    def test_bad_odds(self, bad):
        with pytest.raises(DomainError):
            posterior_prob(0.0, bad)


def gamma_oracle(x, a, b):
    """m1/m0 by direct quadrature under Gamma(a, b) on lambda and p ~ U(0, 1)."""
    x = np.asarray(x)
    n, k, s = x.size, int(np.sum(x == 0)), int(x.sum())

    def f1(p, lam):
        e = math.exp(-lam)
        return (p + (1 - p) * e) ** k * ((1 - p) * e) ** (n - k) * lam ** (s + a - 1) * math.exp(-b * lam)

    m1 = integrate.dblquad(f1, 0, 80, 0, 1, epsabs=0, epsrel=1e-11)[0]
    m0 = math.exp(special.gammaln(s + a) - (s + a) * math.log(n + b))
    return m1 / m0


class TestGamma:
    def test_small_value(self):
        assert log_bf_gamma(CountSummary(2, 1, 1), 1.0, 1.0).bf10 == pytest.approx(17 / 24, rel=1e-14)

    @pytest.mark.parametrize("x,a,b", [([0, 1], 1.0, 1.0), ([0, 0, 2, 1], 2.0, 0.5), ([0, 3, 0], 0.7, 3.0)])
    def test_against_quadrature(self, x, a, b):
        assert log_bf_gamma(summarize(x), a, b).bf10 == pytest.approx(gamma_oracle(x, a, b), rel=1e-8)

    @given(summaries, st.floats(0.1, 5.0), st.floats(0.0, 5.0))
    @settings(max_examples=100)
    def test_monotone_in_a_and_b(self, summ, a, b):
        assume(summ.k >= 1)
        base = log_bf_gamma(summ, a, b).log_bf10
        assert log_bf_gamma(summ, a + 0.5, b).log_bf10 > base
        assert log_bf_gamma(summ, a, b + 0.5).log_bf10 < base

    def test_improper_all_zero(self):
        with pytest.raises(AllZerosError):
            log_bf_gamma(CountSummary(3, 3, 0), 1.0, 0.0)

    @pytest.mark.parametrize("a,b", [(0.0, 1.0), (1.0, -1.0)])
    def test_bad_params(self, a, b):
        with pytest.raises(DomainError):
            log_bf_gamma(CountSummary(2, 1, 1), a, b)


class TestAllZeros:
    @pytest.mark.parametrize("n", [1, 2, 3, 10, 57])
    def test_harmonic(self, n):
        assert log_bf_all_zeros(n).bf10 == pytest.approx(sum(1 / (j + 1) for j in range(n + 1)), rel=1e-13)

    def test_general_prior_matches_quadrature(self):
        assert log_bf_all_zeros(3, 2.0, 0.5).bf10 == pytest.approx(gamma_oracle([0, 0, 0], 2.0, 0.5), rel=1e-8)

    def test_agrees_with_gamma_form(self):
        assert log_bf_all_zeros(4, 1.5, 2.0).log_bf10 == pytest.approx(
            log_bf_gamma(CountSummary(4, 4, 0), 1.5, 2.0).log_bf10, abs=1e-12)

    @pytest.mark.parametrize("n,a,b", [(0, 1, 1), (3, 1, 0), (3, 0, 1), (2.5, 1, 1)])
    def test_rejects(self, n, a, b):
        with pytest.raises(DomainError):
            log_bf_all_zeros(n, a, b)


class TestL1:
    def test_uti_near_closed_form(self):
        res = log_bf_l1(summarize(UTI))
        assert res.method == "quadrature_l1"
        assert UTI_BF / math.sqrt(2) <= res.bf10 <= UTI_BF * math.sqrt(2)

    def test_unit_k_reproduces_closed_form(self):
        summ = summarize(TERROR)
        assert log_bf_l1(summ, k_fn=np.ones_like).log_bf10 == pytest.approx(
            log_bf_jeffreys(summ).log_bf10, abs=1e-10)

    def test_no_zeros_exact(self):
        # with k = 0 both marginals share the same lambda integral
        assert log_bf_l1(CountSummary(4, 0, 9)).bf10 == pytest.approx(0.2, rel=1e-10)

    def test_all_zeros_refused(self):
        with pytest.raises(AllZerosError):
            log_bf_l1(CountSummary(2, 2, 0))
