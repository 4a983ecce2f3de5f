"""Planar regions, seeded RNG streams and Poisson point sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Region:
    """Axis-aligned rectangle with strictly positive area."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"degenerate region {self}")

    @staticmethod
    def square(side: float) -> "Region":
        return Region(0.0, 0.0, side, side)

    @staticmethod
    def centered_square(side: float) -> "Region":
        h = side / 2.0
        return Region(-h, -h, h, h)

    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def width(self) -> float:
        return self.x_max - self.x_min

    def height(self) -> float:
        return self.y_max - self.y_min

    def contains(self, xs, ys) -> np.ndarray:
        """Closed-boundary membership test, vectorized."""
        xs = np.asarray(xs)
        ys = np.asarray(ys)
        return (
            (xs >= self.x_min) & (xs <= self.x_max)
            & (ys >= self.y_min) & (ys <= self.y_max)
        )

    def close_to(self, other: "Region", rel: float = 1e-9) -> bool:
        scale = max(1.0, abs(self.x_min), abs(self.x_max), abs(self.y_min), abs(self.y_max))
        return (
            abs(self.x_min - other.x_min) <= rel * scale
            and abs(self.y_min - other.y_min) <= rel * scale
            and abs(self.x_max - other.x_max) <= rel * scale
            and abs(self.y_max - other.y_max) <= rel * scale
        )


def rng_from_seed(seed: int) -> np.random.Generator:
    """Counter-based generator stream for a 64-bit seed."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def derive_trial_seed(base_seed: int, trial_index: int) -> int:
    """Pure function of (base_seed, trial_index); no sequencing between trials."""
    ss = np.random.SeedSequence((int(base_seed), int(trial_index)))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class PointSet:
    """Sampled planar points; row order is the canonical vertex indexing."""

    xs: np.ndarray
    ys: np.ndarray
    region: Region
    seed: int
    intensity: float

    def __post_init__(self):
        if self.xs.shape != self.ys.shape or self.xs.ndim != 1:
            raise ValueError("xs/ys must be equal-length 1-d arrays")
        if self.xs.size and not self.region.contains(self.xs, self.ys).all():
            raise ValueError("points fall outside the region")
        self.xs.flags.writeable = False
        self.ys.flags.writeable = False

    @property
    def n(self) -> int:
        return int(self.xs.shape[0])

    @property
    def points(self) -> np.ndarray:
        """(n, 2) view of the coordinates in vertex order."""
        return np.column_stack([self.xs, self.ys])

    def take(self, idx: np.ndarray) -> "PointSet":
        """New PointSet over the given rows, preserving their relative order."""
        return PointSet(xs=np.ascontiguousarray(self.xs[idx]),
                        ys=np.ascontiguousarray(self.ys[idx]),
                        region=self.region, seed=self.seed, intensity=self.intensity)


def sample_poisson_pointset(region: Region, intensity: float, seed: int) -> PointSet:
    """Poisson process of the given intensity on the region.

    Draws N ~ Poisson(intensity * area), then N i.i.d. uniform points. Output
    is a pure function of (region, intensity, seed).
    """
    if intensity < 0:
        raise ValueError(f"negative intensity {intensity}")
    rng = rng_from_seed(seed)
    mean = intensity * region.area()
    count = int(rng.poisson(mean)) if mean > 0 else 0
    xs = rng.uniform(region.x_min, region.x_max, count)
    ys = rng.uniform(region.y_min, region.y_max, count)
    return PointSet(xs=xs, ys=ys, region=region, seed=int(seed), intensity=float(intensity))
