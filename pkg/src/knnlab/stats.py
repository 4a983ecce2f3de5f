"""Poisson numerics, total-variation distances and Chen-Stein estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TAIL_EPS = 1e-15
NORMALIZATION_TOL = 1e-12
Z_95 = 1.959963984540054


def poisson_log_pmf(j: int, mean: float) -> float:
    if j < 0 or mean < 0:
        raise ValueError("j and mean must be nonnegative")
    if mean == 0.0:
        return 0.0 if j == 0 else -math.inf
    return -mean + j * math.log(mean) - math.lgamma(j + 1.0)


def poisson_pmf(j: int, mean: float) -> float:
    """Numerically stable Poisson mass at j."""
    lp = poisson_log_pmf(j, mean)
    return math.exp(lp) if lp > -745.0 else 0.0


def _support_cutoff(mean: float) -> int:
    # beyond mean + spread the remaining tail is below TAIL_EPS
    return int(mean + 12.0 * math.sqrt(mean + 1.0) + 60.0)


def poisson_set_mass(a, mean: float) -> float:
    """Mass of a set of nonnegative integers under Poisson(mean).

    ``a`` is either an iterable of integers or a predicate; predicate sets are
    scanned up to the cutoff where the remaining tail is below 1e-15.
    """
    if mean < 0:
        raise ValueError(f"negative mean {mean}")
    if callable(a):
        hi = _support_cutoff(mean)
        return sum(poisson_pmf(j, mean) for j in range(hi + 1) if a(j))
    return sum(poisson_pmf(int(j), mean) for j in set(int(j) for j in a))


def _logsumexp(values: list[float]) -> float:
    m = max(values)
    if m == -math.inf:
        return -math.inf
    return m + math.log(sum(math.exp(v - m) for v in values))


def log_poisson_tail_below(mean: float, j_max: int) -> float:
    """log P(Poisson(mean) <= j_max), exact summation in log space."""
    if j_max < 0:
        return -math.inf
    return _logsumexp([poisson_log_pmf(j, mean) for j in range(j_max + 1)])


def log_poisson_tail_upper(mean: float, j_min: int) -> float:
    """log P(Poisson(mean) >= j_min), exact summation in log space."""
    if j_min <= 0:
        return 0.0
    hi = max(_support_cutoff(mean), j_min + 200)
    return _logsumexp([poisson_log_pmf(j, mean) for j in range(j_min, hi + 1)])


@dataclass(frozen=True)
class CountDistribution:
    """Finite probability mass function on nonnegative integers."""

    probs: dict[int, float]
    total_mass: float

    @staticmethod
    def from_probs(probs: dict[int, float]) -> "CountDistribution":
        if any(p < 0 for p in probs.values()):
            raise ValueError("negative mass")
        return CountDistribution(probs=dict(probs), total_mass=float(sum(probs.values())))

    @staticmethod
    def from_samples(values) -> "CountDistribution":
        values = list(values)
        if not values:
            raise ValueError("empty sample")
        counts: dict[int, float] = {}
        for v in values:
            counts[int(v)] = counts.get(int(v), 0.0) + 1.0
        total = float(len(values))
        return CountDistribution.from_probs({j: c / total for j, c in counts.items()})

    @staticmethod
    def point_mass(j: int) -> "CountDistribution":
        return CountDistribution.from_probs({int(j): 1.0})

    @staticmethod
    def poisson(mean: float) -> "CountDistribution":
        if mean < 0:
            raise ValueError(f"negative mean {mean}")
        hi = _support_cutoff(mean)
        return CountDistribution.from_probs(
            {j: poisson_pmf(j, mean) for j in range(hi + 1)})

    def is_normalized(self) -> bool:
        return abs(self.total_mass - 1.0) <= NORMALIZATION_TOL

    def pmf(self, j: int) -> float:
        return self.probs.get(int(j), 0.0)

    def mean(self) -> float:
        return sum(j * p for j, p in self.probs.items())


def total_variation(d1: CountDistribution, d2: CountDistribution) -> float:
    """Half-L1 distance between two integer laws."""
    if not d1.is_normalized() or not d2.is_normalized():
        raise ValueError("total variation requires normalized distributions")
    support = set(d1.probs) | set(d2.probs)
    tv = 0.5 * sum(abs(d1.pmf(j) - d2.pmf(j)) for j in support)
    return min(1.0, tv)


def wilson_interval(successes: int, trials: int, z: float = Z_95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2.0 * trials)) / denom
    half = (z / denom) * math.sqrt(p * (1.0 - p) / trials + z * z / (4.0 * trials ** 2))
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == trials else min(1.0, center + half)
    return lo, hi


def wilson_half_width(successes: int, trials: int, z: float = Z_95) -> float:
    lo, hi = wilson_interval(successes, trials, z)
    return (hi - lo) / 2.0


@dataclass(frozen=True)
class GammaGeometry:
    """The counting grid and its dependency-neighbourhood sizes."""

    lo: int
    hi: int
    window: int            # max integer offset with overlapping counting boxes
    size: int
    dependency_counts: np.ndarray  # |Gamma_x| per grid point, row-major
    interior_dependency: int

    def points(self) -> np.ndarray:
        vals = np.arange(self.lo, self.hi + 1)
        gx, gy = np.meshgrid(vals, vals, indexing="ij")
        return np.column_stack([gx.ravel(), gy.ravel()])


def compute_gamma_and_dependencies(n: float, lam: float) -> GammaGeometry:
    """Grid of admissible integer points plus exact |Gamma_x| counts.

    Two grid points interact when their counting boxes (side 4*lam*sqrt(log n))
    overlap, i.e. both coordinate gaps are at most the box side. Validates the
    256*lam^2*log n interior bound.
    """
    half = 2.0 * lam * math.sqrt(math.log(n))
    side = math.sqrt(n)
    lo = math.ceil(half)
    hi = math.floor(side - half)
    if hi < lo:
        raise ValueError(f"empty grid at n={n:g}, lam={lam:g}")
    window = math.floor(4.0 * lam * math.sqrt(math.log(n)))
    width = hi - lo + 1
    coords = np.arange(width)
    span = (np.minimum(coords + window, width - 1)
            - np.maximum(coords - window, 0) + 1)
    counts = (span[:, None] * span[None, :]).ravel()
    interior = int(min(2 * window + 1, width) ** 2)
    if not interior < 256.0 * lam * lam * math.log(n):
        raise ValueError("interior dependency count exceeds its geometric bound")
    return GammaGeometry(lo=lo, hi=hi, window=window, size=width * width,
                         dependency_counts=counts.astype(np.int64),
                         interior_dependency=interior)


@dataclass(frozen=True)
class ChenSteinReport:
    """Estimated Poisson-approximation quantities for one (n, k, lam) slice."""

    k: int
    n: float
    lam: float
    trial_count: int
    p_connected: float
    p_hat: float
    p_prime: float | None
    mu: float
    nu: float | None
    b1: float
    b2: float
    gamma_size: int
    gamma_x_size: int
    tv_X_vs_Po_nu: float | None
    tv_Po_mu_vs_Po_nu: float | None
    confidence: dict[str, float] = field(default_factory=dict)

    @property
    def nu_defined(self) -> bool:
        return self.nu is not None

    def to_dict(self) -> dict:
        return {
            "k": self.k, "n": self.n, "lam": self.lam,
            "trial_count": self.trial_count,
            "p_connected": self.p_connected, "p_hat": self.p_hat,
            "p_prime": self.p_prime, "mu": self.mu, "nu": self.nu,
            "nu_defined": self.nu_defined,
            "b1": self.b1, "b2": self.b2,
            "gamma_size": self.gamma_size, "gamma_x_size": self.gamma_x_size,
            "tv_X_vs_Po_nu": self.tv_X_vs_Po_nu,
            "tv_Po_mu_vs_Po_nu": self.tv_Po_mu_vs_Po_nu,
            "confidence": dict(self.confidence),
        }


def _pairs_within_window(cells: list[tuple[int, int]], window: int,
                         max_pairs: int, seed: int) -> list[tuple[int, int]]:
    """Dependent cell pairs among the sampled cells, capped at max_pairs."""
    pairs = []
    for i in range(len(cells)):
        for j in range(i + 1, len(cells)):
            if (abs(cells[i][0] - cells[j][0]) <= window
                    and abs(cells[i][1] - cells[j][1]) <= window):
                pairs.append((i, j))
    if len(pairs) > max_pairs:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))
        keep = rng.choice(len(pairs), size=max_pairs, replace=False)
        pairs = [pairs[int(t)] for t in sorted(keep)]
    return pairs


def estimate_chen_stein(trials, n: float, lam: float, joint_sample_pairs: int = 4096,
                        *, k: int, cells: list[tuple[int, int]]) -> ChenSteinReport:
    """Aggregate trial records into the neighbourhood-sum bounds and the
    total-variation comparisons.

    ``trials`` must carry, per record, the connectivity flag, the
    small-component count and the 0/1 local-count vector over ``cells`` for
    the requested k.
    """
    records = list(trials)
    if not records:
        raise ValueError("no trial records")
    geom = compute_gamma_and_dependencies(n, lam)

    t = len(records)
    connected = sum(1 for r in records if r.connected_by_k[k])
    p_connected = connected / t
    counts = [r.small_component_count_by_k[k] for r in records]

    y_rows = [r.y_by_k[k] for r in records if r.y_by_k is not None]
    y_mat = np.asarray(y_rows, dtype=np.int64)
    if y_mat.ndim != 2 or y_mat.shape[1] != len(cells):
        raise ValueError("trial records carry no local-count samples for these cells")
    singles = int(y_mat.sum())
    y_total = y_mat.size
    p_hat = singles / y_total

    pair_idx = _pairs_within_window(cells, geom.window, joint_sample_pairs, seed=0)
    if pair_idx:
        joint = float(np.mean([
            (y_mat[:, i] * y_mat[:, j]).mean() for i, j in pair_idx]))
        joint_draws = t * len(pair_idx)
    else:
        joint = 0.0
        joint_draws = 0

    b1 = p_hat * p_hat * float(geom.dependency_counts.sum())
    b2 = joint * float((geom.dependency_counts - 1).sum())
    mu = geom.size * p_hat

    nu = None
    p_prime = None
    tv_x = None
    tv_mu_nu = None
    if p_connected > 0.0:
        nu = -math.log(p_connected)
        p_prime = nu / geom.size
        tv_x = total_variation(CountDistribution.from_samples(counts),
                               CountDistribution.poisson(nu))
        tv_mu_nu = total_variation(CountDistribution.poisson(mu),
                                   CountDistribution.poisson(nu))

    confidence = {
        "p_connected": wilson_half_width(connected, t),
        "p_hat": wilson_half_width(singles, y_total),
    }
    if joint_draws:
        confidence["joint"] = wilson_half_width(
            int(round(joint * joint_draws)), joint_draws)

    return ChenSteinReport(
        k=k, n=n, lam=lam, trial_count=t,
        p_connected=p_connected, p_hat=p_hat, p_prime=p_prime,
        mu=mu, nu=nu, b1=b1, b2=b2,
        gamma_size=geom.size, gamma_x_size=geom.interior_dependency,
        tv_X_vs_Po_nu=tv_x, tv_Po_mu_vs_Po_nu=tv_mu_nu,
        confidence=confidence,
    )


@dataclass(frozen=True)
class MuNuReconciliation:
    mu: float
    nu: float
    abs_gap: float
    tv_exact: float
    tv_bound: float  # 1 - exp(-|mu - nu|), from the split-Poisson argument

    @property
    def bound_holds(self) -> bool:
        return self.tv_exact <= self.tv_bound + 1e-12


def reconcile_mu_nu(report: ChenSteinReport) -> MuNuReconciliation:
    """Exact TV between the two fitted Poisson laws, against the coupling
    bound."""
    if report.nu is None:
        raise ValueError("nu undefined: no connected trials")
    gap = abs(report.mu - report.nu)
    tv = total_variation(CountDistribution.poisson(report.mu),
                         CountDistribution.poisson(report.nu))
    return MuNuReconciliation(mu=report.mu, nu=report.nu, abs_gap=gap,
                              tv_exact=tv, tv_bound=1.0 - math.exp(-gap))


@dataclass(frozen=True)
class ProcessComparisonReport:
    """Marginal and pairwise comparison of the local-count field against an
    i.i.d. Poisson field."""

    p_prime: float
    per_cell_tv: list[float]
    max_cell_tv: float
    separated_pairs: int
    separated_correlation: float | None
    separated_ci: tuple[float, float] | None
    close_pairs: int
    close_joint: float | None
    close_product: float | None

    @property
    def separated_ci_contains_zero(self) -> bool | None:
        if self.separated_ci is None:
            return None
        return self.separated_ci[0] <= 0.0 <= self.separated_ci[1]


def process_marginal_comparison(trials, nu: float, n: float, lam: float,
                                *, k: int, cells: list[tuple[int, int]],
                                ) -> ProcessComparisonReport:
    """Per-cell TV against Poisson(nu/|Gamma|) plus correlation checks for
    well-separated and dependent cell pairs."""
    records = list(trials)
    geom = compute_gamma_and_dependencies(n, lam)
    p_prime = nu / geom.size
    po = CountDistribution.poisson(p_prime)
    y_mat = np.asarray([r.y_by_k[k] for r in records], dtype=np.int64)

    per_cell = [total_variation(CountDistribution.from_samples(y_mat[:, c]), po)
                for c in range(len(cells))]

    sep_threshold = 4.0 * math.sqrt(2.0) * lam * math.sqrt(math.log(n))
    sep_vals = []
    close_joint_vals = []
    close_prod_vals = []
    for i in range(len(cells)):
        for j in range(i + 1, len(cells)):
            dx = cells[i][0] - cells[j][0]
            dy = cells[i][1] - cells[j][1]
            yi = y_mat[:, i]
            yj = y_mat[:, j]
            if math.hypot(dx, dy) > sep_threshold:
                sep_vals.append((yi, yj))
            elif abs(dx) <= geom.window and abs(dy) <= geom.window:
                close_joint_vals.append(float((yi * yj).mean()))
                close_prod_vals.append(float(yi.mean()) * float(yj.mean()))

    corr = None
    ci = None
    if sep_vals:
        a = np.concatenate([v[0] for v in sep_vals]).astype(float)
        b = np.concatenate([v[1] for v in sep_vals]).astype(float)
        if a.std() > 0 and b.std() > 0:
            corr = float(np.corrcoef(a, b)[0, 1])
            # Fisher z interval
            m = a.size
            if m > 3 and abs(corr) < 1.0:
                z = 0.5 * math.log((1 + corr) / (1 - corr))
                hw = Z_95 / math.sqrt(m - 3)
                ci = (math.tanh(z - hw), math.tanh(z + hw))

    return ProcessComparisonReport(
        p_prime=p_prime,
        per_cell_tv=per_cell,
        max_cell_tv=max(per_cell) if per_cell else 0.0,
        separated_pairs=len(sep_vals),
        separated_correlation=corr,
        separated_ci=ci,
        close_pairs=len(close_joint_vals),
        close_joint=float(np.mean(close_joint_vals)) if close_joint_vals else None,
        close_product=float(np.mean(close_prod_vals)) if close_prod_vals else None,
    )


def agg_selfconsistency_run(gamma_size: int, p: float, dep_size: int,
                            runs: int, seed: int) -> dict:
    """Synthetic i.i.d. Bernoulli cell field: measured TV of the cell sum
    against Poisson(mu), compared with the neighbourhood-sum bound plus
    Monte Carlo slack.

    Returns the measured TV, b1, b2, the propagated CI width of the TV
    estimate and whether the bound holds.
    """
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))
    sums = rng.binomial(gamma_size, p, size=runs)
    # joint frequency over sampled independent cell pairs
    pair_draws = rng.binomial(1, p, size=(runs, 2))
    joint_hat = float((pair_draws[:, 0] * pair_draws[:, 1]).mean())
    p_hat = float(sums.sum()) / (runs * gamma_size)

    b1 = gamma_size * dep_size * p_hat * p_hat
    b2 = gamma_size * (dep_size - 1) * joint_hat
    mu = gamma_size * p_hat

    emp = CountDistribution.from_samples(sums.tolist())
    po = CountDistribution.poisson(mu)
    tv = total_variation(emp, po)
    ci_width = 0.5 * sum(
        math.sqrt(max(q, 1.0 / runs) * (1 - min(q, 1.0)) / runs)
        for q in (emp.pmf(j) for j in set(emp.probs) | set(
            range(int(mu + 6 * math.sqrt(mu + 1)) + 2))))
    return {
        "tv": tv, "b1": b1, "b2": b2, "mu": mu, "ci_width": ci_width,
        "holds": tv <= b1 + b2 + 3.0 * ci_width,
    }
