import numpy as np
import pytest

from knnlab.geometry import (PointSet, Region, derive_trial_seed, rng_from_seed,
                             sample_poisson_pointset)


def test_region_rejects_degenerate():
    with pytest.raises(ValueError):
        Region(0.0, 0.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        Region(0.0, 2.0, 1.0, 2.0)


def test_region_area_and_membership():
    r = Region(1.0, 2.0, 4.0, 6.0)
    assert r.area() == 12.0
    assert r.contains(1.0, 2.0)          # closed boundary
    assert r.contains(4.0, 6.0)
    assert not r.contains(4.0001, 3.0)


def test_zero_intensity_gives_empty_pointset():
    ps = sample_poisson_pointset(Region.square(10.0), 0.0, 1)
    assert ps.n == 0


def test_negative_intensity_rejected():
    with pytest.raises(ValueError):
        sample_poisson_pointset(Region.square(10.0), -0.5, 1)


def test_same_seed_identical_pointsets():
    r = Region.square(30.0)
    a = sample_poisson_pointset(r, 1.0, 987)
    b = sample_poisson_pointset(r, 1.0, 987)
    assert np.array_equal(a.xs, b.xs) and np.array_equal(a.ys, b.ys)
    c = sample_poisson_pointset(r, 1.0, 988)
    assert not np.array_equal(a.xs, c.xs)


def test_points_lie_inside_region():
    r = Region(-3.0, 5.0, 2.0, 9.0)
    ps = sample_poisson_pointset(r, 2.0, 5)
    assert r.contains(ps.xs, ps.ys).all()
    assert ps.points.shape == (ps.n, 2)


def test_pointset_validates_membership():
    with pytest.raises(ValueError):
        PointSet(xs=np.array([5.0]), ys=np.array([0.5]),
                 region=Region.square(1.0), seed=0, intensity=1.0)


def test_poisson_mean_over_seeds():
    # mean of Poisson(1000) over 10^4 seeds: within 4 standard errors
    region = Region.square(np.sqrt(1000.0))
    counts = [sample_poisson_pointset(region, 1.0, s).n for s in range(10_000)]
    assert abs(np.mean(counts) - 1000.0) < 4.0 * np.sqrt(1000.0 / 10_000)


def test_trial_seed_derivation_pure_and_spread():
    assert derive_trial_seed(1, 2) == derive_trial_seed(1, 2)
    seeds = {derive_trial_seed(1, i) for i in range(1000)}
    assert len(seeds) == 1000
    assert derive_trial_seed(1, 2) != derive_trial_seed(2, 1)


def test_rng_streams_reproducible():
    a = rng_from_seed(77).uniform(size=5)
    b = rng_from_seed(77).uniform(size=5)
    assert np.array_equal(a, b)
