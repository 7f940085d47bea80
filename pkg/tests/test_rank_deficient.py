import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from zipbf import IntegrationConfig, load_regression, log_bf_all_zeros, log_bf_rank_deficient
from zipbf.errors import PreconditionError
from zipbf.rank_deficient import average_bfs

QUAD = IntegrationConfig(backend="quadrature")
SYMMETRIC = ([0, 0, 1, 2], [[1, 0], [0, 1], [1, 1], [1, 1]])


class TestAverages:
    def test_values(self):
        arith, geom, notes = average_bfs([math.log(1.0), math.log(4.0)])
        assert arith == pytest.approx(2.5) and geom == pytest.approx(2.0) and notes == ()

    @given(st.lists(st.floats(-50, 50), min_size=1, max_size=20))
    def test_am_gm(self, logs):
        arith, geom, _ = average_bfs(logs)
        assert arith >= geom * (1 - 1e-12)

    def test_non_finite_dropped(self):
        arith, geom, notes = average_bfs([0.0, math.inf, math.nan])
        assert arith == geom == 1.0 and "2 non-finite" in notes[0]

    def test_nothing_finite(self):
        with pytest.raises(PreconditionError):
            average_bfs([math.inf])


class TestSymmetricDesign:
    def test_selections_agree(self):
        res = log_bf_rank_deficient(load_regression(*SYMMETRIC), QUAD, enumerate_all=True)
        a, b = res.selections
        assert (a.l_set, b.l_set) == ((0,), (1,))
        assert a.log_bf10 == pytest.approx(b.log_bf10, abs=1e-8)
        assert (res.t, res.deficiency, res.r) == (1, 1, 0)
        assert res.arithmetic_mean_bf == pytest.approx(res.geometric_mean_bf, rel=1e-8)

    def test_default_only(self):
        res = log_bf_rank_deficient(load_regression(*SYMMETRIC), QUAD)
        assert len(res.selections) == 1
        out = res.default(prior_odds=2.0)
        assert out.method == "rank_deficient" and out.prior_odds == 2.0

    def test_original_row_labels(self):
        x, A = SYMMETRIC
        order = [2, 0, 3, 1]
        res = log_bf_rank_deficient(load_regression(np.array(x)[order], np.array(A)[order]), QUAD,
                                    enumerate_all=True)
        assert sorted(s.l_set for s in res.selections) == [(1,), (3,)]

    def test_mc_reproducible(self):
        cfg = IntegrationConfig(backend="importance_sampling", seed=8)
        a = log_bf_rank_deficient(load_regression(*SYMMETRIC), cfg)
        b = log_bf_rank_deficient(load_regression(*SYMMETRIC), cfg)
        assert a == b
        q = log_bf_rank_deficient(load_regression(*SYMMETRIC), QUAD)
        assert abs(a.selections[0].log_bf10 - q.selections[0].log_bf10) < 4 * a.selections[0].rel_se


class TestSpecialCases:
    @pytest.mark.parametrize("n", [1, 3, 6])
    def test_all_zero_intercept_matches_exponential_prior(self, n):
        # no positive counts: the whole prior is the Exp(1)-induced part
        res = log_bf_rank_deficient(load_regression([0] * n, np.ones((n, 1))), QUAD)
        assert res.selections[0].log_bf10 == pytest.approx(log_bf_all_zeros(n).log_bf10, abs=1e-9)

    def test_zero_row_in_span(self):
        data = load_regression([0, 0, 1, 2], [[2, 2], [0, 1], [1, 1], [1, 1]])
        res = log_bf_rank_deficient(data, QUAD, enumerate_all=True)
        assert res.r == 1 and [s.l_set for s in res.selections] == [(1,)]
        assert math.isfinite(res.selections[0].log_bf10)

    def test_deficiency_two_default(self):
        data = load_regression([0, 0, 0, 1], [[1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 1]])
        res = log_bf_rank_deficient(data, QUAD)
        assert res.deficiency == 2 and math.isfinite(res.selections[0].log_bf10)
        with pytest.raises(PreconditionError):
            log_bf_rank_deficient(data, QUAD, enumerate_all=True)

    def test_full_rank_refused(self):
        with pytest.raises(PreconditionError):
            log_bf_rank_deficient(load_regression([0, 1, 2], [[1, 0], [1, 1], [0, 1]]), QUAD)


def random_deficiency_one(seed):
    """q = 2 design whose positive-count rows all lie on one random line."""
    rng = np.random.default_rng(seed)
    v = rng.normal(size=2)
    n_pos, n_zero = int(rng.integers(2, 6)), int(rng.integers(1, 4))
    A = np.vstack([rng.normal(size=(n_zero, 2)), rng.uniform(0.5, 2.0, (n_pos, 1)) * v])
    x = np.concatenate([np.zeros(n_zero, int), rng.integers(1, 5, n_pos)])
    return load_regression(x, A)


@pytest.mark.parametrize("seed", range(10))
def test_doubling_samples_is_stable(seed):
    # a divergent marginal would drift upward as draws are added
    data = random_deficiency_one(seed)
    cfg = IntegrationConfig(backend="importance_sampling", seed=seed)
    single = log_bf_rank_deficient(data, cfg, enumerate_all=True)
    double = log_bf_rank_deficient(data, IntegrationConfig(backend="importance_sampling", seed=seed,
                                                           mc_samples=2 * cfg.mc_samples), enumerate_all=True)
    for a, b in zip(single.selections, double.selections):
        assert math.isfinite(b.log_bf10)
        assert abs(a.log_bf10 - b.log_bf10) < 3 * math.hypot(a.rel_se, b.rel_se)
