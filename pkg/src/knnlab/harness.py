"""Seeded, parallel Monte Carlo experiment driver with JSON Lines persistence.

Every trial is a pure function of (config, trial_id); outputs are identical
across runs and worker counts. One pointset per trial is shared across the
whole k-sweep so connectivity is coupled monotonically in k.
"""

from __future__ import annotations

import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .components import connected_components, find_close_small_pairs
from .counting import (BadEventFlags, GridPoint, LocalCellMetrics, detect_bad_events,
                       gamma_bounds, gamma_points, local_box_indices, local_cell_metrics)
from .geometry import Region, derive_trial_seed, rng_from_seed, sample_poisson_pointset
from .knn import build_knn_graph, directed_neighbors, graph_from_neighbors, longest_edge_length
from .local import E2, ConstantsBundle, compute_constants, evaluate_local_events, scaled_constants
from .stats import (CountDistribution, estimate_chen_stein, total_variation,
                    wilson_interval)

THREADS_ENV = "KNN_LAB_THREADS"
THEOREM_RANGE = (0.3, 0.6)


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: a k-sweep of Monte Carlo trials at fixed area n."""

    n: float
    k_values: tuple[int, ...]
    trial_count: int
    base_seed: int
    lam: float = E2
    mode: str = "global"              # global (square of area n) or local (box)
    scaled_m: float | None = None     # local mode: box size multiplier
    scaled_n_tiles: int | None = None
    scaled_lam1: float | None = None
    scaled_lam2: float | None = None
    grid_sample_count: int = 64
    joint_sample_pairs: int = 4096
    collect_cells: bool = True

    def __post_init__(self):
        if self.trial_count < 1:
            raise ValueError("trial_count must be at least 1")
        if self.n <= 1:
            raise ValueError("n must exceed 1")
        if self.mode not in ("global", "local"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not self.k_values:
            raise ValueError("at least one k required")
        if any(k < 0 for k in self.k_values):
            raise ValueError("k values must be nonnegative")
        object.__setattr__(self, "k_values", tuple(sorted(set(int(k) for k in self.k_values))))

    def warn_if_outside_theorem_range(self, stream=None) -> None:
        stream = stream or sys.stderr
        lo = THEOREM_RANGE[0] * math.log(self.n)
        hi = THEOREM_RANGE[1] * math.log(self.n)
        outside = [k for k in self.k_values if not (lo < k < hi)]
        if outside:
            print(f"warning: k values {outside} outside the window "
                  f"({lo:.2f}, {hi:.2f}) where the structural results apply",
                  file=stream)

    def bundle(self) -> ConstantsBundle | None:
        if self.mode != "local":
            return None
        if self.scaled_m is None and self.scaled_n_tiles is None and self.scaled_lam1 is None:
            return compute_constants(self.lam, self.n)
        return scaled_constants(
            self.n, lam=self.lam,
            M=self.scaled_m if self.scaled_m is not None else 10.0,
            N=self.scaled_n_tiles,
            lam1=self.scaled_lam1, lam2=self.scaled_lam2)

    def to_dict(self) -> dict:
        return {
            "n": self.n, "k_values": list(self.k_values),
            "trial_count": self.trial_count, "base_seed": self.base_seed,
            "lam": self.lam, "mode": self.mode,
            "scaled_m": self.scaled_m, "scaled_n_tiles": self.scaled_n_tiles,
            "scaled_lam1": self.scaled_lam1, "scaled_lam2": self.scaled_lam2,
            "grid_sample_count": self.grid_sample_count,
            "joint_sample_pairs": self.joint_sample_pairs,
            "collect_cells": self.collect_cells,
        }


@dataclass
class TrialRecord:
    """Full outcome of one Monte Carlo trial across the k-sweep."""

    trial_id: int
    seed: int
    point_count: int
    connected_by_k: dict[int, bool]
    small_component_count_by_k: dict[int, int]
    small_component_details: list
    bad_event_flags_by_k: dict[int, BadEventFlags] | None
    local_outcome: dict | None
    longest_edge: float
    runtime_ms: int
    y_by_k: dict[int, list[int]] | None = None
    close_small_pair_count_by_k: dict[int, int] | None = None

    def to_dict(self) -> dict:
        # runtime_ms is intentionally not serialized: record files must be
        # byte-identical for identical configs
        return {
            "type": "trial",
            "trial_id": self.trial_id,
            "seed": self.seed,
            "point_count": self.point_count,
            "connected_by_k": {str(k): v for k, v in self.connected_by_k.items()},
            "small_component_count_by_k": {
                str(k): v for k, v in self.small_component_count_by_k.items()},
            "small_component_details": self.small_component_details,
            "bad_event_flags_by_k": (
                None if self.bad_event_flags_by_k is None
                else {str(k): f.to_dict() for k, f in self.bad_event_flags_by_k.items()}),
            "local_outcome": self.local_outcome,
            "longest_edge": self.longest_edge,
            "y_by_k": (None if self.y_by_k is None
                       else {str(k): v for k, v in self.y_by_k.items()}),
            "close_small_pair_count_by_k": (
                None if self.close_small_pair_count_by_k is None
                else {str(k): v for k, v in self.close_small_pair_count_by_k.items()}),
        }

    @staticmethod
    def from_dict(d: dict) -> "TrialRecord":
        flags = d.get("bad_event_flags_by_k")
        return TrialRecord(
            trial_id=d["trial_id"],
            seed=d["seed"],
            point_count=d["point_count"],
            connected_by_k={int(k): v for k, v in d["connected_by_k"].items()},
            small_component_count_by_k={
                int(k): v for k, v in d["small_component_count_by_k"].items()},
            small_component_details=d["small_component_details"],
            bad_event_flags_by_k=(
                None if flags is None
                else {int(k): BadEventFlags(**v) for k, v in flags.items()}),
            local_outcome=d.get("local_outcome"),
            longest_edge=d["longest_edge"],
            runtime_ms=0,
            y_by_k=(None if d.get("y_by_k") is None
                    else {int(k): v for k, v in d["y_by_k"].items()}),
            close_small_pair_count_by_k=(
                None if d.get("close_small_pair_count_by_k") is None
                else {int(k): v for k, v in d["close_small_pair_count_by_k"].items()}),
        )


def plan_cells(config: ExperimentConfig) -> list[GridPoint]:
    """Fixed grid-cell sample for the whole experiment, derived from the
    config alone so per-cell laws and pair statistics line up across trials."""
    if config.mode != "global" or config.grid_sample_count <= 0:
        return []
    lo, hi = gamma_bounds(config.n, config.lam)
    if hi < lo:
        return []
    width = hi - lo + 1
    total = width * width
    count = min(config.grid_sample_count, total)
    rng = rng_from_seed(derive_trial_seed(config.base_seed, 0x9E3779B9))
    if total <= 4_000_000:
        pts = gamma_points(config.n, config.lam)
        chosen = rng.choice(total, size=count, replace=False)
        return [GridPoint(int(pts[i, 0]), int(pts[i, 1])) for i in sorted(chosen)]
    # grid too large to materialize: draw coordinates directly
    seen: set[tuple[int, int]] = set()
    while len(seen) < count:
        seen.add((int(rng.integers(lo, hi + 1)), int(rng.integers(lo, hi + 1))))
    return [GridPoint(*c) for c in sorted(seen)]


def run_trial(config: ExperimentConfig, trial_id: int,
              cells: list[GridPoint]) -> TrialRecord:
    """Execute one trial; pure function of its arguments."""
    t0 = time.perf_counter()
    seed = derive_trial_seed(config.base_seed, trial_id)
    if config.mode == "local":
        record = _run_local_trial(config, trial_id, seed)
    else:
        record = _run_global_trial(config, trial_id, seed, cells)
    record.runtime_ms = int(1000 * (time.perf_counter() - t0))
    return record


def _run_global_trial(config: ExperimentConfig, trial_id: int, seed: int,
                      cells: list[GridPoint]) -> TrialRecord:
    region = Region.square(math.sqrt(config.n))
    ps = sample_poisson_pointset(region, 1.0, seed)
    small_threshold = config.lam * math.sqrt(math.log(config.n))
    k_max = max(config.k_values)

    nbr = None
    if ps.n > k_max + 1 and k_max >= 1:
        nbr = directed_neighbors(ps, k_max)

    cell_cache = []
    for gp in cells:
        idx = local_box_indices(ps, gp, config.n, config.lam)
        sub = ps.take(idx)
        sub_kmax = min(k_max, max(sub.n - 1, 0))
        sub_nbr = directed_neighbors(sub, sub_kmax) if sub_kmax >= 1 else None
        cell_cache.append((gp, sub, sub_nbr))

    connected = {}
    small_counts = {}
    details = []
    flags_by_k = {}
    y_by_k = {} if (config.collect_cells and cells) else None
    close_counts = {}
    longest = 0.0
    for k in config.k_values:
        graph = (graph_from_neighbors(ps.n, nbr, k) if nbr is not None
                 else build_knn_graph(ps, k))
        comps = connected_components(graph, ps, small_threshold)
        connected[k] = len(comps) <= 1
        smalls = [c for c in comps if c.is_small]
        small_counts[k] = len(smalls)
        for c in smalls:
            details.append([
                k,
                [float(ps.xs[c.bottom_most_vertex]), float(ps.ys[c.bottom_most_vertex])],
                c.diameter, c.size,
            ])
        close_counts[k] = len(find_close_small_pairs(comps, ps, 8.0 * small_threshold))
        metrics: list[LocalCellMetrics] = []
        for gp, sub, sub_nbr in cell_cache:
            gl = (graph_from_neighbors(sub.n, sub_nbr, min(k, max(sub.n - 1, 0)))
                  if sub_nbr is not None else build_knn_graph(sub, k))
            metrics.append(local_cell_metrics(sub, gl, gp, config.n, config.lam))
        flags_by_k[k] = detect_bad_events(
            graph, ps, config.n, config.lam, list(cells),
            components=comps, cell_metrics=metrics)
        if y_by_k is not None:
            y_by_k[k] = [m.y_value for m in metrics]
        if k == k_max:
            longest = longest_edge_length(graph, ps)

    ks = list(config.k_values)
    for a, b in zip(ks, ks[1:]):
        if connected[a] and not connected[b]:
            raise RuntimeError(
                f"coupling violation: trial {trial_id} connected at k={a} "
                f"but not at k={b}")

    return TrialRecord(
        trial_id=trial_id, seed=seed, point_count=ps.n,
        connected_by_k=connected, small_component_count_by_k=small_counts,
        small_component_details=details, bad_event_flags_by_k=flags_by_k,
        local_outcome=None, longest_edge=longest, runtime_ms=0,
        y_by_k=y_by_k, close_small_pair_count_by_k=close_counts,
    )


def _run_local_trial(config: ExperimentConfig, trial_id: int, seed: int) -> TrialRecord:
    bundle = config.bundle()
    ps = sample_poisson_pointset(bundle.u_region(), 1.0, seed)
    small_threshold = config.lam * math.sqrt(math.log(config.n))
    k_max = max(config.k_values)
    nbr = directed_neighbors(ps, k_max) if (ps.n > k_max + 1 and k_max >= 1) else None

    connected = {}
    small_counts = {}
    outcomes = {}
    longest = 0.0
    for k in config.k_values:
        graph = (graph_from_neighbors(ps.n, nbr, k) if nbr is not None
                 else build_knn_graph(ps, k))
        comps = connected_components(graph, ps, small_threshold)
        connected[k] = len(comps) <= 1
        small_counts[k] = sum(1 for c in comps if c.is_small)
        outcomes[str(k)] = evaluate_local_events(ps, k, bundle, graph=graph).to_dict()
        if k == k_max:
            longest = longest_edge_length(graph, ps)

    ks = list(config.k_values)
    for a, b in zip(ks, ks[1:]):
        if connected[a] and not connected[b]:
            raise RuntimeError(
                f"coupling violation: trial {trial_id} connected at k={a} "
                f"but not at k={b}")

    return TrialRecord(
        trial_id=trial_id, seed=seed, point_count=ps.n,
        connected_by_k=connected, small_component_count_by_k=small_counts,
        small_component_details=[], bad_event_flags_by_k=None,
        local_outcome=outcomes, longest_edge=longest, runtime_ms=0,
        y_by_k=None, close_small_pair_count_by_k=None,
    )


# --- aggregation ------------------------------------------------------------

@dataclass
class Aggregator:
    """Mergeable fold over trial records; merge is associative and
    commutative."""

    k_values: tuple[int, ...]
    trials: int = 0
    connected: dict[int, int] = field(default_factory=dict)
    small_hist: dict[int, dict[int, int]] = field(default_factory=dict)
    bad_any: dict[int, int] = field(default_factory=dict)
    close_pair_trials: dict[int, int] = field(default_factory=dict)
    two_small_trials: dict[int, int] = field(default_factory=dict)
    a_k: dict[int, int] = field(default_factory=dict)
    b_k: dict[int, int] = field(default_factory=dict)
    bad_c: dict[int, int] = field(default_factory=dict)
    local_seen: int = 0

    def __post_init__(self):
        for k in self.k_values:
            self.connected.setdefault(k, 0)
            self.small_hist.setdefault(k, {})
            self.bad_any.setdefault(k, 0)
            self.close_pair_trials.setdefault(k, 0)
            self.two_small_trials.setdefault(k, 0)
            self.a_k.setdefault(k, 0)
            self.b_k.setdefault(k, 0)
            self.bad_c.setdefault(k, 0)

    def update(self, r: TrialRecord) -> None:
        if any(k not in r.connected_by_k for k in self.k_values):
            raise ValueError(
                f"record {r.trial_id} does not cover the k-sweep {self.k_values}")
        self.trials += 1
        for k in self.k_values:
            self.connected[k] += int(r.connected_by_k[k])
            cnt = r.small_component_count_by_k[k]
            self.small_hist[k][cnt] = self.small_hist[k].get(cnt, 0) + 1
            if r.bad_event_flags_by_k is not None:
                self.bad_any[k] += int(r.bad_event_flags_by_k[k].any())
            if r.close_small_pair_count_by_k is not None:
                self.close_pair_trials[k] += int(r.close_small_pair_count_by_k[k] > 0)
            self.two_small_trials[k] += int(cnt >= 2)
            if r.local_outcome is not None:
                oc = r.local_outcome[str(k)]
                self.a_k[k] += int(oc["a_k"])
                self.b_k[k] += int(oc["b_k"])
                self.bad_c[k] += int(oc["bad_C"])
        if r.local_outcome is not None:
            self.local_seen += 1

    def merge(self, other: "Aggregator") -> "Aggregator":
        if self.k_values != other.k_values:
            raise ValueError("cannot merge aggregators over different k-sweeps")
        out = Aggregator(self.k_values)
        out.trials = self.trials + other.trials
        out.local_seen = self.local_seen + other.local_seen
        for k in self.k_values:
            out.connected[k] = self.connected[k] + other.connected[k]
            out.bad_any[k] = self.bad_any[k] + other.bad_any[k]
            out.close_pair_trials[k] = self.close_pair_trials[k] + other.close_pair_trials[k]
            out.two_small_trials[k] = self.two_small_trials[k] + other.two_small_trials[k]
            out.a_k[k] = self.a_k[k] + other.a_k[k]
            out.b_k[k] = self.b_k[k] + other.b_k[k]
            out.bad_c[k] = self.bad_c[k] + other.bad_c[k]
            hist = dict(self.small_hist[k])
            for j, c in other.small_hist[k].items():
                hist[j] = hist.get(j, 0) + c
            out.small_hist[k] = hist
        return out


def aggregate(records, config: ExperimentConfig,
              cells: list[GridPoint] | None = None) -> dict:
    """Fold records into the summary report dictionary."""
    records = list(records)
    if not records:
        raise ValueError("no records to aggregate")
    agg = Aggregator(config.k_values)
    for r in records:
        agg.update(r)
    t = agg.trials

    per_k = {}
    for k in config.k_values:
        lo, hi = wilson_interval(agg.connected[k], t)
        hist = {str(j): c for j, c in sorted(agg.small_hist[k].items())}
        mean_small = sum(j * c for j, c in agg.small_hist[k].items()) / t
        entry = {
            "trials": t,
            "p_connected": agg.connected[k] / t,
            "p_connected_ci": [lo, hi],
            "mean_small_components": mean_small,
            "small_count_histogram": hist,
            "bad_event_rate": agg.bad_any[k] / t,
            "close_pair_trial_rate": agg.close_pair_trials[k] / t,
            "two_small_trial_rate": agg.two_small_trials[k] / t,
        }
        clo, chi = wilson_interval(agg.close_pair_trials[k], t)
        tlo, thi = wilson_interval(agg.two_small_trials[k], t)
        entry["close_pair_trial_ci"] = [clo, chi]
        entry["two_small_trial_ci"] = [tlo, thi]
        if agg.local_seen:
            alo, ahi = wilson_interval(agg.a_k[k], t)
            blo, bhi = wilson_interval(agg.b_k[k], t)
            entry["a_k_rate"] = agg.a_k[k] / t
            entry["a_k_ci"] = [alo, ahi]
            entry["b_k_rate"] = agg.b_k[k] / t
            entry["b_k_ci"] = [blo, bhi]
            entry["bad_c_rate"] = agg.bad_c[k] / t
        nu = None
        tv = None
        if agg.connected[k] > 0:
            nu = -math.log(agg.connected[k] / t)
            emp = CountDistribution.from_samples(
                [int(j) for j, c in agg.small_hist[k].items() for _ in range(c)])
            tv = total_variation(emp, CountDistribution.poisson(nu))
        entry["nu"] = nu
        entry["tv_small_count_vs_poisson"] = tv
        if (config.mode == "global" and cells and records[0].y_by_k is not None):
            cs = estimate_chen_stein(
                records, config.n, config.lam, config.joint_sample_pairs,
                k=k, cells=[(c.gx, c.gy) for c in cells])
            entry["chen_stein"] = cs.to_dict()
        per_k[str(k)] = entry
    return {"type": "summary", "per_k": per_k}


# --- persistence ------------------------------------------------------------

def _float17(f: float) -> str:
    if f != f:
        return "NaN"
    if f == math.inf:
        return "Infinity"
    if f == -math.inf:
        return "-Infinity"
    return format(f, ".17g")


class _Float17Encoder(json.JSONEncoder):
    """JSON encoder printing floats with 17 significant digits."""

    def iterencode(self, o, _one_shot=False):
        gen = json.encoder._make_iterencode(
            None, self.default, json.encoder.encode_basestring_ascii,
            None, _float17, self.key_separator, self.item_separator,
            self.sort_keys, self.skipkeys, _one_shot)
        return gen(o, 0)


def dumps_record(obj: dict) -> str:
    return json.dumps(obj, cls=_Float17Encoder, sort_keys=True)


def worker_count(explicit: int | None = None) -> int:
    if explicit is not None and explicit > 0:
        return explicit
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _trial_args(config, cells, trial_id):
    return run_trial(config, trial_id, cells)


def _load_resumable(path: str, config: ExperimentConfig) -> dict[int, TrialRecord]:
    header = None
    records: dict[int, TrialRecord] = {}
    try:
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError:
                    break  # interrupted mid-write; replay what parsed
                if obj.get("type") == "config":
                    header = obj
                elif obj.get("type") == "trial":
                    rec = TrialRecord.from_dict(obj)
                    if 0 <= rec.trial_id < config.trial_count:
                        records[rec.trial_id] = rec
    except OSError:
        return {}
    want = config.to_dict()
    if header is None or any(header.get(k) != v for k, v in want.items()):
        raise ValueError(f"existing file {path} was produced by a different config")
    return records


def run_experiment(config: ExperimentConfig, out_path: str | None = None,
                   workers: int | None = None, progress: bool = False,
                   resume: bool = False):
    """Run all trials (in parallel when workers > 1), stream records to
    out_path as JSON Lines, and return (records, summary).

    With ``resume`` an interrupted record file for the same config is
    replayed: finished trials are reused, only the missing ones run, and the
    rewritten file is byte-identical to an uninterrupted run.
    """
    config.warn_if_outside_theorem_range()
    cells = plan_cells(config)
    nworkers = worker_count(workers)
    done: dict[int, TrialRecord] = {}
    if resume and out_path and os.path.exists(out_path):
        done = _load_resumable(out_path, config)
    ids = [i for i in range(config.trial_count) if i not in done]

    pool = None
    if nworkers <= 1 or len(ids) <= 1:
        fresh = (run_trial(config, i, cells) for i in ids)
    else:
        pool = ProcessPoolExecutor(max_workers=nworkers)
        chunk = max(1, len(ids) // (nworkers * 8))
        fresh = pool.map(_trial_args, [config] * len(ids), [cells] * len(ids), ids,
                         chunksize=chunk)
    sink = open(out_path, "w") if out_path else None
    try:
        if sink:
            header = dict(config.to_dict())
            header["type"] = "config"
            header["cells"] = [[c.gx, c.gy] for c in cells]
            sink.write(dumps_record(header) + "\n")
        records = []
        fresh_it = iter(fresh)
        for i in range(config.trial_count):
            rec = done[i] if i in done else next(fresh_it)
            if rec.trial_id != i:
                raise RuntimeError(f"record order violated at trial {i}")
            records.append(rec)
            if sink:
                sink.write(dumps_record(rec.to_dict()) + "\n")
            if progress and i % 200 == 0:
                print(f"trial {i}/{config.trial_count}", file=sys.stderr)
        summary = aggregate(records, config, cells)
        if sink:
            sink.write(dumps_record(summary) + "\n")
        return records, summary
    finally:
        if sink:
            sink.close()
        if pool is not None:
            pool.shutdown()


def read_jsonl(path: str):
    """Parse a record file into (config dict, records, summary-or-None)."""
    config = None
    records = []
    summary = None
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            kind = obj.get("type")
            if kind == "config":
                config = obj
            elif kind == "trial":
                records.append(TrialRecord.from_dict(obj))
            elif kind == "summary":
                summary = obj
    return config, records, summary


def is_complete(path: str) -> bool:
    """True when the file carries its final summary marker."""
    _, _, summary = read_jsonl(path)
    return summary is not None
