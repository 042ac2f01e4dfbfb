"""Command-line interface: ``gridsort {sort,score,bench,render,features}``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import _backend
from .bench import BenchConfig, bench_sweep, random_colors
from .constraints import MaskSource, PinDecl, apply_pins, grid_from_mask
from .core import CLAMP, WRAP_MODES, Dataset, GridSpec, InvalidInputError, validate
from .io import (
    extract_features,
    load_arrangement,
    load_vectors,
    render_html,
    render_svg,
    save_arrangement,
    save_report,
    save_vectors,
)
from .metrics import UndefinedMetricError, evaluate, parse_metric_tokens
from .sorters import preset_params, run_algorithm

ALGOS = ("las", "flas", "ssm", "som", "som-filtered", "random")

# CLI flag -> parameter field, per algorithm family
_PARAM_FLAGS = {
    "radius_factor": ("las", "flas", "som", "som-filtered"),
    "radius_decay": ("las", "flas", "som", "som-filtered"),
    "n_candidates": ("flas",),
    "aniso_ratio": ("las", "flas"),
}


@dataclass
class RunConfig:
    command: str = "sort"
    input: str | None = None
    random_colors: int | None = None
    data_seed: int = 0
    algo: str = "flas"
    params: dict = field(default_factory=dict)
    grid: str | None = None
    mask: str | None = None
    pins: str | None = None
    wrap: str = CLAMP
    seed: int = 0
    metrics: str = "dpq16"
    preset: str = "quality"
    out: str = "."

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> RunConfig:
        return cls(**json.loads(text))


def parse_grid(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        w, h = int(w), int(h)
    except ValueError:
        raise InvalidInputError(f"grid must look like WxH, got {text!r}") from None
    if w < 1 or h < 1:
        raise InvalidInputError("grid dimensions must be positive")
    return w, h


def _load_dataset(cfg: RunConfig) -> Dataset:
    if cfg.input and cfg.random_colors:
        raise InvalidInputError("give either --input or --random-colors, not both")
    if cfg.input:
        return load_vectors(cfg.input)
    if cfg.random_colors:
        return random_colors(cfg.random_colors, cfg.data_seed)
    raise InvalidInputError("no data: give --input FILE or --random-colors N")


def _build_spec(cfg: RunConfig, n: int) -> GridSpec:
    if cfg.mask:
        src = MaskSource.load(cfg.mask)
        if cfg.grid and parse_grid(cfg.grid) != (src.width, src.height):
            raise InvalidInputError(f"mask is {src.width}x{src.height} but --grid is {cfg.grid}")
        spec = grid_from_mask(src, cfg.wrap)
    elif cfg.grid:
        w, h = parse_grid(cfg.grid)
        spec = GridSpec(w, h, wrap=cfg.wrap)
    else:
        side = math.isqrt(n)
        if side * side != n:
            raise InvalidInputError(f"N mismatch: N={n} is not a square number; give --grid WxH")
        spec = GridSpec(side, side, wrap=cfg.wrap)
    if cfg.pins:
        spec, _ = apply_pins(spec, PinDecl.load(cfg.pins))
    return spec


def _params(cfg: RunConfig):
    if cfg.algo == "random":
        return None
    for name, value in cfg.params.items():
        if value is not None and cfg.algo not in _PARAM_FLAGS[name]:
            raise InvalidInputError(f"--{name.replace('_', '-')} does not apply to {cfg.algo}")
    return preset_params(cfg.algo, cfg.preset, **cfg.params)


def _report(arr, ds: Dataset, spec: GridSpec, tokens: str) -> dict:
    try:
        rep = evaluate(arr, ds, tokens, wrap=spec.wrap)
    except UndefinedMetricError as exc:
        raise InvalidInputError(str(exc)) from None
    return rep.to_dict()


def run_sort(cfg: RunConfig) -> dict:
    parse_metric_tokens(cfg.metrics)
    ds = _load_dataset(cfg)
    spec = _build_spec(cfg, ds.n)
    spec.check_dataset(ds)
    params = _params(cfg)
    t0 = time.perf_counter()
    arr = run_algorithm(cfg.algo, ds, spec, params, seed=cfg.seed)
    elapsed = (time.perf_counter() - t0) * 1000.0
    check = validate(arr, spec, ds)
    if not check.ok:
        raise RuntimeError("sorter produced an invalid arrangement: " + "; ".join(check.violations))
    report = _report(arr, ds, spec, cfg.metrics)
    report["run"] = {"algo": cfg.algo, "seed": cfg.seed, "time_ms": elapsed, "backend": _backend.NAME}
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    save_arrangement(arr, out / "arrangement.json")
    save_report(report, out / "report.json")
    (out / "config.json").write_text(cfg.to_json())
    return report


# ------------------------------------------------------------------ commands


def _cfg_from_args(args: argparse.Namespace, command: str) -> RunConfig:
    params = {
        "radius_factor": getattr(args, "radius_factor", None),
        "radius_decay": getattr(args, "radius_decay", None),
        "n_candidates": getattr(args, "candidates", None),
        "aniso_ratio": getattr(args, "aniso_ratio", None),
    }
    return RunConfig(
        command=command,
        input=getattr(args, "input", None),
        random_colors=getattr(args, "random_colors", None),
        data_seed=getattr(args, "data_seed", 0),
        algo=getattr(args, "algo", "flas"),
        params={k: v for k, v in params.items() if v is not None},
        grid=getattr(args, "grid", None),
        mask=getattr(args, "mask", None),
        pins=getattr(args, "pins", None),
        wrap=getattr(args, "wrap", CLAMP),
        seed=getattr(args, "seed", 0),
        metrics=getattr(args, "metrics", "dpq16"),
        preset=getattr(args, "preset", "quality"),
        out=getattr(args, "out", "."),
    )


def cmd_sort(args: argparse.Namespace) -> int:
    report = run_sort(_cfg_from_args(args, "sort"))
    print(json.dumps(report["metrics"], sort_keys=True))
    return 0


def cmd_score(args: argparse.Namespace) -> int:
    cfg = _cfg_from_args(args, "score")
    ds = _load_dataset(cfg)
    arr = load_arrangement(args.arrangement)
    spec = _build_spec(cfg, ds.n) if (cfg.mask or cfg.grid or cfg.pins) else GridSpec(arr.width, arr.height, wrap=cfg.wrap, mask=arr.index_grid() >= 0)
    check = validate(arr, spec, ds)
    if not check.ok:
        raise InvalidInputError("arrangement does not fit: " + "; ".join(check.violations))
    report = _report(arr, ds, spec, cfg.metrics)
    text = json.dumps(report, indent=1, sort_keys=True)
    if args.out:
        save_report(report, args.out)
    print(text)
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    cfg = _cfg_from_args(args, "bench")
    ds = _load_dataset(cfg)
    spec = _build_spec(cfg, ds.n)
    spec.check_dataset(ds)
    decays = [float(x) for x in args.radius_decay.split(",")] if args.radius_decay else [None]
    configs = []
    for algo in args.algos.split(","):
        algo = algo.strip()
        if algo not in ALGOS:
            raise InvalidInputError(f"unknown algorithm {algo!r}")
        for d in decays:
            params = {} if d is None or algo in ("ssm", "random") else {"radius_decay": d}
            c = BenchConfig(algo, params, cfg.preset)
            if c not in configs:
                configs.append(c)
    seeds = range(args.seed, args.seed + args.seeds)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    records = bench_sweep(ds, spec, configs, seeds, cfg.metrics, out / "runs.csv", out / "summary.csv")
    failed = sum(1 for r in records if r.error)
    print(f"{len(records)} runs, {failed} failed; wrote {out / 'runs.csv'} and {out / 'summary.csv'}")
    return 0


def cmd_render(args: argparse.Namespace) -> int:
    ds = load_vectors(args.input)
    arr = load_arrangement(args.arrangement)
    spec = grid_from_mask(MaskSource.load(args.mask)) if args.mask else None
    if args.mode == "svg":
        text = render_svg(arr, ds, spec, cell=args.cell)
    else:
        text = render_html(arr, ds, cell=args.cell, base_dir=Path(args.input).parent)
    Path(args.out).write_text(text)
    return 0


def cmd_features(args: argparse.Namespace) -> int:
    skipped: list[str] = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        ds = extract_features(args.images, skipped)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    save_vectors(ds, args.out)
    if args.report:
        save_report({"images": ds.n, "dim": ds.dim, "skipped": skipped}, args.report)
    print(f"{ds.n} images, {len(skipped)} skipped")
    return 0


def _add_data(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("data")
    g.add_argument("--input", help="vectors file (CSV or JSON)")
    g.add_argument("--random-colors", type=int, metavar="N", help="use N random RGB colors instead")
    g.add_argument("--data-seed", type=int, default=0, help="seed for --random-colors")


def _add_grid(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("grid")
    g.add_argument("--grid", metavar="WxH")
    g.add_argument("--mask", help="mask file: 0/1 text grid or grayscale image")
    g.add_argument("--pins", help="pins file with lines col,row,index[,weight]")
    g.add_argument("--wrap", choices=WRAP_MODES, default=CLAMP)


def _add_sorter(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("sorter")
    g.add_argument("--radius-factor", type=float)
    g.add_argument("--radius-decay", type=float)
    g.add_argument("--candidates", type=int, help="swap candidates per FLAS exchange")
    g.add_argument("--aniso-ratio", type=float, help="horizontal / vertical filter radius ratio")
    g.add_argument("--preset", choices=("fast", "quality"), default="quality")


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gridsort", description="Arrange feature vectors on 2D grids and score the layouts.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sort", help="sort a dataset onto a grid")
    _add_data(p)
    _add_grid(p)
    p.add_argument("--algo", choices=ALGOS, default="flas")
    _add_sorter(p)
    p.add_argument("--seed", type=_u64, default=0)
    p.add_argument("--metrics", default="dpq16")
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=cmd_sort)

    p = sub.add_parser("score", help="score an existing arrangement")
    _add_data(p)
    _add_grid(p)
    p.add_argument("--arrangement", required=True)
    p.add_argument("--metrics", default="dpq16,dpq16-,npq2,e1")
    p.add_argument("--out", help="report file")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("bench", help="quality vs runtime sweep")
    _add_data(p)
    _add_grid(p)
    p.add_argument("--algos", default="las,flas")
    p.add_argument("--radius-decay", help="comma-separated decay factors to sweep")
    p.add_argument("--preset", choices=("fast", "quality"), default="quality")
    p.add_argument("--seeds", type=int, default=5, help="number of seeds")
    p.add_argument("--seed", type=_u64, default=0, help="first seed")
    p.add_argument("--metrics", default="dpq16")
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("render", help="render an arrangement as SVG swatches or an HTML montage")
    p.add_argument("--input", required=True)
    p.add_argument("--arrangement", required=True)
    p.add_argument("--mode", choices=("svg", "html"), default="svg")
    p.add_argument("--mask")
    p.add_argument("--cell", type=int, default=16, help="cell size in pixels")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("features", help="extract 48-dim color layout vectors from images")
    p.add_argument("--images", required=True, help="image directory")
    p.add_argument("--out", required=True, help="vectors JSON file")
    p.add_argument("--report", help="write a JSON summary including skipped files")
    p.set_defaults(func=cmd_features)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
