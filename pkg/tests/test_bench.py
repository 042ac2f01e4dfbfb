from __future__ import annotations

import csv

import numpy as np

from gridsort.bench import BenchConfig, bench_sweep, random_colors, summarize
from gridsort.core import TORUS, GridSpec


def test_row_count_and_seed_order(tmp_path):
    ds, spec = random_colors(64, seed=1), GridSpec(8, 8)
    configs = [BenchConfig(a, {"radius_decay": d}) for a in ("las", "flas") for d in (0.5, 0.7, 0.9)]
    seeds = [4, 2, 9, 1, 7]
    records = bench_sweep(ds, spec, configs, seeds, "dpq16,npq2", tmp_path / "runs.csv", tmp_path / "sum.csv")
    assert len(records) == 30
    for cfg in configs:
        assert [r.seed for r in records if r.config == cfg.label] == seeds
    with open(tmp_path / "runs.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 30 and {"dpq16", "npq2", "time_ms"} <= set(rows[0])
    with open(tmp_path / "sum.csv") as fh:
        summary = list(csv.DictReader(fh))
    assert len(summary) == 6 and all(int(r["runs"]) == 5 for r in summary)


def test_failures_are_recorded_and_the_sweep_continues(tmp_path):
    ds, spec = random_colors(36, seed=1), GridSpec(6, 6, wrap=TORUS)
    records = bench_sweep(ds, spec, [BenchConfig("ssm"), BenchConfig("flas")], [0, 1], runs_csv=tmp_path / "r.csv")
    failed = [r for r in records if r.error]
    assert len(records) == 4 and len(failed) == 2
    assert all(r.algo == "ssm" and "InvalidInputError" in r.error for r in failed)
    rows = summarize(records, ["dpq16"])
    assert {r["algo"]: r["failures"] for r in rows} == {"ssm": 2, "flas": 0}


def test_flas_quality_rises_with_slower_decay():
    ds, spec = random_colors(1024, seed=0), GridSpec(32, 32)
    configs = [BenchConfig("flas", {"radius_decay": d}) for d in (0.5, 0.8, 0.93)]
    rows = summarize(bench_sweep(ds, spec, configs, range(20)), ["dpq16"])
    means = [r["mean_dpq16"] for r in rows]
    assert np.all(np.diff(means) >= 0), means
