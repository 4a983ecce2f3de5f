import math

import numpy as np
import pytest

from knnlab.stats import (CountDistribution, agg_selfconsistency_run,
                          compute_gamma_and_dependencies, log_poisson_tail_upper,
                          poisson_pmf, poisson_set_mass, reconcile_mu_nu,
                          total_variation, wilson_interval)


def test_pmf_closed_forms():
    assert math.isclose(poisson_pmf(0, 1.0), math.exp(-1.0), rel_tol=1e-12)
    assert poisson_pmf(0, 0.0) == 1.0
    assert poisson_pmf(5, 0.0) == 0.0
    assert math.isclose(poisson_pmf(3, 2.5), math.exp(-2.5) * 2.5 ** 3 / 6, rel_tol=1e-12)


def test_pmf_rejects_negative():
    with pytest.raises(ValueError):
        poisson_pmf(-1, 1.0)
    with pytest.raises(ValueError):
        poisson_pmf(1, -1.0)


def test_set_mass_normalization_and_predicates():
    assert abs(poisson_set_mass(lambda j: True, 7.0) - 1.0) < 1e-12
    assert abs(poisson_set_mass([0, 1, 2], 2.0)
               - sum(poisson_pmf(j, 2.0) for j in range(3))) < 1e-15
    evens = poisson_set_mass(lambda j: j % 2 == 0, 3.0)
    # closed form: (1 + e^{-2 mean}) / 2
    assert abs(evens - (1 + math.exp(-6.0)) / 2) < 1e-12


def test_set_mass_complement():
    a = poisson_set_mass(lambda j: j <= 4, 3.7)
    b = poisson_set_mass(lambda j: j > 4, 3.7)
    assert abs(a + b - 1.0) < 1e-12


def test_log_upper_tail_matches_direct():
    got = math.exp(log_poisson_tail_upper(2.0, 3))
    want = 1.0 - sum(poisson_pmf(j, 2.0) for j in range(3))
    assert abs(got - want) < 1e-12


def test_tv_identity_and_point_mass_example():
    d = CountDistribution.poisson(1.0)
    assert total_variation(d, d) == 0.0
    pm = CountDistribution.point_mass(0)
    # direct summation oracle: (|1 - e^-1| + sum_{j>=1} pmf) / 2
    want = 0.5 * ((1 - math.exp(-1.0))
                  + sum(poisson_pmf(j, 1.0) for j in range(1, 60)))
    assert abs(total_variation(pm, d) - want) < 1e-12
    assert abs(total_variation(pm, d) - (1 - math.exp(-1.0))) < 1e-9
    assert total_variation(pm, CountDistribution.poisson(0.0)) == 0.0


def test_tv_is_a_metric_on_random_triples():
    rng = np.random.default_rng(6)
    for _ in range(20):
        ds = []
        for _ in range(3):
            vals = rng.integers(0, 6, size=50)
            ds.append(CountDistribution.from_samples(vals.tolist()))
        a, b, c = ds
        assert abs(total_variation(a, b) - total_variation(b, a)) < 1e-15
        assert total_variation(a, c) <= total_variation(a, b) + total_variation(b, c) + 1e-12
        assert total_variation(a, a) < 1e-12


def test_tv_rejects_unnormalized():
    bad = CountDistribution.from_probs({0: 0.5})
    with pytest.raises(ValueError):
        total_variation(bad, CountDistribution.poisson(1.0))


def test_wilson_interval_zero_successes():
    lo, hi = wilson_interval(0, 100)
    assert lo == 0.0
    assert abs(hi - 0.036994) < 5e-4


def test_gamma_dependencies_against_exhaustive_oracle():
    n, lam = 2500.0, 0.9
    geom = compute_gamma_and_dependencies(n, lam)
    pts = geom.points()
    side = 4.0 * lam * math.sqrt(math.log(n))
    window = math.floor(side)
    assert geom.window == window
    # exhaustive overlap oracle on the full grid
    sub = pts
    for i in np.random.default_rng(1).choice(len(pts), size=25, replace=False):
        x = pts[i]
        cnt = int((np.maximum(np.abs(sub[:, 0] - x[0]),
                              np.abs(sub[:, 1] - x[1])) <= window).sum())
        assert cnt == geom.dependency_counts[i]
    width = geom.hi - geom.lo + 1
    assert geom.interior_dependency == min(2 * window + 1, width) ** 2
    assert geom.interior_dependency < 256 * lam * lam * math.log(n)
    # separated squares do not overlap
    assert abs(pts[0, 0] - (pts[0, 0] + window + 1)) > side - 1


def test_corner_dependency_smaller_than_interior():
    geom = compute_gamma_and_dependencies(10000.0, 1.5)
    assert geom.dependency_counts[0] < geom.interior_dependency
    assert geom.dependency_counts.max() == geom.interior_dependency


class FakeRecord:
    def __init__(self, connected, count, y):
        self.connected_by_k = {4: connected}
        self.small_component_count_by_k = {4: count}
        self.y_by_k = {4: y}


def test_chen_stein_trivial_all_connected():
    from knnlab.stats import estimate_chen_stein
    cells = [(20, 20), (40, 40)]
    recs = [FakeRecord(True, 0, [0, 0]) for _ in range(50)]
    rep = estimate_chen_stein(recs, 10000.0, 1.5, k=4, cells=cells)
    assert rep.p_hat == 0.0 and rep.b1 == 0.0 and rep.b2 == 0.0
    assert rep.nu == 0.0
    assert rep.tv_X_vs_Po_nu == 0.0
    assert rep.mu == 0.0


def test_chen_stein_synthetic_bernoulli_matches_closed_form():
    from knnlab.stats import estimate_chen_stein
    n, lam = 10000.0, 1.5
    geom = compute_gamma_and_dependencies(n, lam)
    rng = np.random.default_rng(3)
    pts = geom.points()
    cells = [tuple(pts[i]) for i in rng.choice(len(pts), size=12, replace=False)]
    p = 0.05
    recs = []
    for _ in range(4000):
        y = rng.binomial(1, p, size=len(cells)).tolist()
        recs.append(FakeRecord(True, 0, y))
    rep = estimate_chen_stein(recs, n, lam, k=4, cells=cells)
    assert abs(rep.p_hat - p) < 3 * rep.confidence["p_hat"]
    want_b1 = rep.p_hat ** 2 * geom.dependency_counts.sum()
    assert math.isclose(rep.b1, want_b1, rel_tol=1e-12)
    assert rep.mu == pytest.approx(geom.size * rep.p_hat)
    # independent cells: joint frequency near p^2
    if rep.b2 > 0:
        per_pair = rep.b2 / (geom.dependency_counts - 1).sum()
        assert per_pair == pytest.approx(p * p, rel=0.8)


def test_chen_stein_single_cell_formula():
    from knnlab.stats import estimate_chen_stein
    # a 1-cell gamma: b1 = p^2, b2 = 0
    n, lam = 100.0, 1.095
    geom = compute_gamma_and_dependencies(n, lam)
    assert geom.size == 1
    recs = [FakeRecord(True, 0, [1]) for _ in range(10)]
    recs += [FakeRecord(True, 0, [0]) for _ in range(10)]
    rep = estimate_chen_stein(recs, n, lam, k=4, cells=[(geom.lo, geom.lo)])
    assert rep.p_hat == 0.5
    assert rep.b1 == 0.25
    assert rep.b2 == 0.0


def test_reconcile_mu_nu_examples():
    from knnlab.stats import ChenSteinReport
    rep = ChenSteinReport(k=4, n=1e4, lam=1.5, trial_count=10, p_connected=0.5,
                          p_hat=0.0, p_prime=None, mu=1.0, nu=1.1, b1=0.0, b2=0.0,
                          gamma_size=10, gamma_x_size=5,
                          tv_X_vs_Po_nu=None, tv_Po_mu_vs_Po_nu=None)
    rec = reconcile_mu_nu(rep)
    assert rec.bound_holds
    assert rec.tv_bound == pytest.approx(1 - math.exp(-0.1))
    # direct summation oracle for TV(Po_1, Po_1.1)
    want = 0.5 * sum(abs(poisson_pmf(j, 1.0) - poisson_pmf(j, 1.1)) for j in range(80))
    assert rec.tv_exact == pytest.approx(want, abs=1e-10)
    rep0 = ChenSteinReport(k=4, n=1e4, lam=1.5, trial_count=10, p_connected=1.0,
                           p_hat=0.0, p_prime=None, mu=0.7, nu=0.7, b1=0.0, b2=0.0,
                           gamma_size=10, gamma_x_size=5,
                           tv_X_vs_Po_nu=None, tv_Po_mu_vs_Po_nu=None)
    assert reconcile_mu_nu(rep0).tv_exact == 0.0


def test_reconcile_requires_nu():
    from knnlab.stats import ChenSteinReport
    rep = ChenSteinReport(k=4, n=1e4, lam=1.5, trial_count=10, p_connected=0.0,
                          p_hat=0.0, p_prime=None, mu=1.0, nu=None, b1=0.0, b2=0.0,
                          gamma_size=10, gamma_x_size=5,
                          tv_X_vs_Po_nu=None, tv_Po_mu_vs_Po_nu=None)
    with pytest.raises(ValueError):
        reconcile_mu_nu(rep)


def test_coupling_bound_random_means():
    rng = np.random.default_rng(12)
    for _ in range(25):
        mu = float(rng.uniform(0, 3))
        nu = float(rng.uniform(0, 3))
        tv = total_variation(CountDistribution.poisson(mu),
                             CountDistribution.poisson(nu))
        assert tv <= 1 - math.exp(-abs(mu - nu)) + 1e-12


def test_process_comparison_synthetic_independence():
    from knnlab.stats import process_marginal_comparison
    n, lam = 10000.0, 1.5
    geom = compute_gamma_and_dependencies(n, lam)
    pts = geom.points()
    rng = np.random.default_rng(9)
    idx = rng.choice(len(pts), size=14, replace=False)
    cells = [tuple(pts[i]) for i in idx]
    p = 0.08
    recs = [FakeRecord(True, 0, rng.binomial(1, p, size=len(cells)).tolist())
            for _ in range(3000)]
    nu = geom.size * p
    rep = process_marginal_comparison(recs, nu, n, lam, k=4, cells=cells)
    assert rep.p_prime == pytest.approx(p, rel=1e-9)
    # Bernoulli(p) vs Poisson(p): TV = p - p e^{-p} + O(p^2) checked by summation
    want = 0.5 * (abs((1 - p) - math.exp(-p)) + abs(p - p * math.exp(-p))
                  + sum(poisson_pmf(j, p) for j in range(2, 40)))
    for tv in rep.per_cell_tv:
        assert tv == pytest.approx(want, abs=0.02)
    if rep.separated_ci is not None:
        assert rep.separated_ci_contains_zero


def test_agg_selfconsistency_quick():
    out = agg_selfconsistency_run(1000, 0.001, 9, 2000, seed=4)
    assert out["holds"]
    p_hat = out["mu"] / 1000
    assert out["b1"] == pytest.approx(1000 * 9 * p_hat * p_hat)
    assert out["b2"] >= 0.0


def test_b1_closed_sum_equals_naive_enumeration():
    # |Gamma| <= 400: the closed double sum equals brute-force pair counting
    n, lam = 700.0, 0.65
    geom = compute_gamma_and_dependencies(n, lam)
    assert geom.size <= 400
    pts = geom.points()
    p_hat = 0.037
    naive = 0
    for i in range(len(pts)):
        for j in range(len(pts)):
            if (abs(pts[i, 0] - pts[j, 0]) <= geom.window
                    and abs(pts[i, 1] - pts[j, 1]) <= geom.window):
                naive += 1
    assert naive == geom.dependency_counts.sum()
    assert p_hat * p_hat * naive == p_hat * p_hat * geom.dependency_counts.sum()


def test_reconcile_zero_means_point_masses():
    from knnlab.stats import ChenSteinReport
    rep = ChenSteinReport(k=4, n=1e4, lam=1.5, trial_count=10, p_connected=1.0,
                          p_hat=0.0, p_prime=None, mu=0.0, nu=0.0, b1=0.0, b2=0.0,
                          gamma_size=10, gamma_x_size=5,
                          tv_X_vs_Po_nu=None, tv_Po_mu_vs_Po_nu=None)
    rec = reconcile_mu_nu(rep)
    assert rec.tv_exact == 0.0 and rec.tv_bound == 0.0


def test_process_comparison_no_small_components():
    from knnlab.stats import process_marginal_comparison
    n, lam = 10000.0, 1.5
    geom = compute_gamma_and_dependencies(n, lam)
    pts = geom.points()
    cells = [tuple(pts[i]) for i in (0, len(pts) // 2, len(pts) - 1)]
    recs = [FakeRecord(True, 0, [0, 0, 0]) for _ in range(200)]
    nu = 0.3
    rep = process_marginal_comparison(recs, nu, n, lam, k=4, cells=cells)
    p_prime = nu / geom.size
    # all cell laws are point mass at zero: TV is 1 - e^{-p'}
    for tv in rep.per_cell_tv:
        assert tv == pytest.approx(1 - math.exp(-p_prime), abs=1e-12)
