import json
import math

import numpy as np
import pytest

from knnlab.harness import (Aggregator, ExperimentConfig, dumps_record, is_complete,
                            plan_cells, read_jsonl, run_experiment, run_trial)


def small_config(**over):
    base = dict(n=900.0, k_values=(2, 3, 4), trial_count=12, base_seed=31,
                lam=1.1, grid_sample_count=4)
    base.update(over)
    return ExperimentConfig(**base)


def test_config_validation():
    with pytest.raises(ValueError):
        small_config(trial_count=0)
    with pytest.raises(ValueError):
        small_config(mode="weird")
    with pytest.raises(ValueError):
        small_config(k_values=())
    cfg = small_config(k_values=(4, 2, 2, 3))
    assert cfg.k_values == (2, 3, 4)


def test_single_trial_deterministic():
    cfg = small_config()
    cells = plan_cells(cfg)
    a = run_trial(cfg, 3, cells)
    b = run_trial(cfg, 3, cells)
    assert a.seed == b.seed
    assert a.to_dict() == b.to_dict()


def test_connectivity_monotone_in_k():
    cfg = small_config(trial_count=40, k_values=(1, 2, 3, 4, 5))
    cells = plan_cells(cfg)
    for i in range(cfg.trial_count):
        rec = run_trial(cfg, i, cells)
        flags = [rec.connected_by_k[k] for k in cfg.k_values]
        assert flags == sorted(flags)  # False before True only


def test_jsonl_identical_across_runs_and_workers(tmp_path):
    cfg = small_config()
    p1 = tmp_path / "a.jsonl"
    p2 = tmp_path / "b.jsonl"
    p3 = tmp_path / "c.jsonl"
    run_experiment(cfg, out_path=str(p1), workers=1)
    run_experiment(cfg, out_path=str(p2), workers=1)
    run_experiment(cfg, out_path=str(p3), workers=2)
    assert p1.read_bytes() == p2.read_bytes() == p3.read_bytes()


def test_jsonl_round_trip(tmp_path):
    cfg = small_config()
    path = tmp_path / "r.jsonl"
    records, summary = run_experiment(cfg, out_path=str(path), workers=1)
    config_obj, records2, summary2 = read_jsonl(str(path))
    assert config_obj["n"] == cfg.n
    assert len(records2) == len(records)
    for a, b in zip(records, records2):
        assert a.connected_by_k == b.connected_by_k
        assert a.small_component_count_by_k == b.small_component_count_by_k
        assert a.y_by_k == b.y_by_k
    assert summary2["per_k"] == json.loads(dumps_record(summary))["per_k"]
    assert is_complete(str(path))


def test_incomplete_file_detected(tmp_path):
    cfg = small_config(trial_count=3)
    path = tmp_path / "r.jsonl"
    run_experiment(cfg, out_path=str(path), workers=1)
    lines = path.read_text().strip().split("\n")
    partial = tmp_path / "partial.jsonl"
    partial.write_text("\n".join(lines[:-1]) + "\n")
    assert not is_complete(str(partial))


def test_float_serialization_17_digits():
    val = {"x": 1.0 / 3.0, "inf": math.inf, "none": None}
    s = dumps_record(val)
    assert "0.33333333333333331" in s
    assert "Infinity" in s
    back = json.loads(s)
    assert back["x"] == 1.0 / 3.0 and back["inf"] == math.inf


def test_aggregator_merge_matches_bulk():
    cfg = small_config(trial_count=20)
    cells = plan_cells(cfg)
    records = [run_trial(cfg, i, cells) for i in range(cfg.trial_count)]
    rng = np.random.default_rng(2)
    for _ in range(5):
        mask = rng.uniform(size=len(records)) < 0.5
        left = Aggregator(cfg.k_values)
        right = Aggregator(cfg.k_values)
        both = Aggregator(cfg.k_values)
        for r, m in zip(records, mask):
            (left if m else right).update(r)
            both.update(r)
        merged = left.merge(right)
        assert merged.__dict__ == both.__dict__
        # commutativity
        assert right.merge(left).__dict__ == both.__dict__


def test_local_mode_records_outcomes():
    cfg = ExperimentConfig(n=1e4, k_values=(3,), trial_count=6, base_seed=5,
                           mode="local", scaled_m=10.0, scaled_n_tiles=None,
                           scaled_lam1=0.02, scaled_lam2=1.0, grid_sample_count=0)
    records, summary = run_experiment(cfg, workers=1)
    for r in records:
        oc = r.local_outcome["3"]
        assert set(oc) == {"a_k", "b_k", "components_in_half_box", "bad_C"}
        assert oc["b_k"] <= oc["a_k"]
    entry = summary["per_k"]["3"]
    assert 0.0 <= entry["b_k_rate"] <= entry["a_k_rate"] <= 1.0


def test_chen_stein_summary_present_for_global_runs():
    cfg = ExperimentConfig(n=2500.0, k_values=(4,), trial_count=15, base_seed=8,
                           lam=1.3, grid_sample_count=6)
    records, summary = run_experiment(cfg, workers=1)
    cs = summary["per_k"]["4"].get("chen_stein")
    assert cs is not None
    assert cs["gamma_size"] > 0
    assert cs["b1"] >= 0.0 and cs["b2"] >= 0.0
    assert records[0].y_by_k is not None
    assert len(records[0].y_by_k[4]) == 6


def test_resume_completes_partial_file(tmp_path):
    cfg = small_config(trial_count=10)
    full = tmp_path / "full.jsonl"
    run_experiment(cfg, out_path=str(full), workers=1)
    # truncate to a partial file: header + 4 records, no summary
    lines = full.read_text().splitlines()
    partial = tmp_path / "resume.jsonl"
    partial.write_text("\n".join(lines[:5]) + "\n")
    assert not is_complete(str(partial))
    run_experiment(cfg, out_path=str(partial), workers=1, resume=True)
    assert partial.read_bytes() == full.read_bytes()


def test_resume_rejects_mismatched_config(tmp_path):
    cfg = small_config(trial_count=5)
    path = tmp_path / "r.jsonl"
    run_experiment(cfg, out_path=str(path), workers=1)
    other = small_config(trial_count=5, base_seed=99)
    with pytest.raises(ValueError):
        run_experiment(other, out_path=str(path), workers=1, resume=True)
