"""Quality-versus-runtime sweeps over algorithms, parameter sets and seeds."""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import Dataset, GridSpec
from .metrics import evaluate, parse_metric_tokens
from .sorters import preset_params, run_algorithm


def random_colors(n: int, seed: int = 0) -> Dataset:
    """``n`` uniformly random RGB colors in [0, 1]^3."""
    return Dataset(np.random.default_rng(seed).random((n, 3)))


@dataclass(frozen=True)
class BenchConfig:
    algo: str
    params: dict = field(default_factory=dict)
    preset: str = "quality"

    @property
    def label(self) -> str:
        extra = ",".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.algo}[{self.preset}{';' + extra if extra else ''}]"


@dataclass
class BenchRecord:
    algo: str
    config: str
    params: dict
    seed: int
    time_ms: float
    metrics: dict[str, float]
    error: str = ""


def run_one(ds: Dataset, spec: GridSpec, cfg: BenchConfig, seed: int, tokens: Sequence[str]) -> BenchRecord:
    try:
        params = None if cfg.algo == "random" else preset_params(cfg.algo, cfg.preset, **cfg.params)
        t0 = time.perf_counter()
        arr = run_algorithm(cfg.algo, ds, spec, params, seed=seed)
        elapsed = (time.perf_counter() - t0) * 1000.0
        values = evaluate(arr, ds, tokens, wrap=spec.wrap).values
        metrics = {k: float(v) for k, v in values.items() if not isinstance(v, list)}
    except Exception as exc:  # a failed run is recorded, the sweep goes on
        return BenchRecord(cfg.algo, cfg.label, dict(cfg.params), seed, float("nan"), {}, f"{type(exc).__name__}: {exc}")
    return BenchRecord(cfg.algo, cfg.label, dict(cfg.params), seed, elapsed, metrics)


def bench_sweep(
    ds: Dataset,
    spec: GridSpec,
    configs: Iterable[BenchConfig],
    seeds: Sequence[int],
    metrics: str | Sequence[str] = "dpq16",
    runs_csv: str | Path | None = None,
    summary_csv: str | Path | None = None,
) -> list[BenchRecord]:
    """Run every config on every seed, in the same seed order for all configs.

    Each seed fixes the initial random placement, so all algorithms start from
    the same order of items.
    """
    tokens = [t for t in parse_metric_tokens(metrics) if t != "npk"]
    records = [run_one(ds, spec, cfg, int(s), tokens) for cfg in configs for s in seeds]
    if runs_csv is not None:
        write_runs(records, tokens, runs_csv)
    if summary_csv is not None:
        write_summary(records, tokens, summary_csv)
    return records


def write_runs(records: Sequence[BenchRecord], tokens: Sequence[str], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["algo", "config", "params", "seed", "time_ms", *tokens, "error"])
        for rec in records:
            w.writerow([
                rec.algo, rec.config, json.dumps(rec.params, sort_keys=True), rec.seed,
                f"{rec.time_ms:.3f}", *(rec.metrics.get(t, "") for t in tokens), rec.error,
            ])


def summarize(records: Sequence[BenchRecord], tokens: Sequence[str]) -> list[dict]:
    groups: dict[str, list[BenchRecord]] = {}
    for rec in records:
        groups.setdefault(rec.config, []).append(rec)
    rows = []
    for label, recs in groups.items():
        ok = [r for r in recs if not r.error]
        row = {"algo": recs[0].algo, "config": label, "runs": len(ok), "failures": len(recs) - len(ok)}
        row["mean_time_ms"] = float(np.mean([r.time_ms for r in ok])) if ok else float("nan")
        for t in tokens:
            vals = [r.metrics[t] for r in ok if t in r.metrics]
            row[f"mean_{t}"] = float(np.mean(vals)) if vals else float("nan")
        rows.append(row)
    return rows


def write_summary(records: Sequence[BenchRecord], tokens: Sequence[str], path: str | Path) -> None:
    rows = summarize(records, tokens)
    fields = ["algo", "config", "runs", "failures", "mean_time_ms", *(f"mean_{t}" for t in tokens)]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        w.writerows(rows)
