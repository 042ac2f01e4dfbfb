"""Arrangement generators: LAS, FLAS, SSM and SOM.

LAS and FLAS alternate two steps with a shrinking filter radius: smooth the
map (the input vectors copied to their current cells) with a box filter, then
re-assign inputs to the smoothed map by solving linear assignment problems,
either one global problem (LAS) or many small local ones (FLAS).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from itertools import permutations
from typing import Callable, Iterator

import numpy as np

from . import _backend
from .assignment import build_cost_matrix, solve_lap
from .core import TORUS, Arrangement, Dataset, GridSpec, InvalidInputError, make_rng, random_arrangement
from .filtering import FilterSpec, MapState, box_filter, fill_inactive, weighted_box_filter

DEFAULT_PIN_WEIGHT = 8.0

StepCallback = Callable[[int, int, np.ndarray], None]


@dataclass(frozen=True)
class LasParams:
    radius_factor: float = 0.35
    radius_decay: float = 0.93
    q: float = 2.0
    seed: int = 0
    final_pass: bool = True
    aniso_ratio: float = 1.0
    pin_weight: float = DEFAULT_PIN_WEIGHT

    def __post_init__(self) -> None:
        if not 0 < self.radius_factor <= 0.5:
            raise InvalidInputError("radius_factor must lie in (0, 0.5]")
        if not 0 < self.radius_decay < 1:
            raise InvalidInputError("radius_decay must lie in (0, 1)")
        if not self.q > 0:
            raise InvalidInputError("q must be positive")
        if self.aniso_ratio < 1:
            raise InvalidInputError("aniso_ratio must be >= 1")
        if not self.pin_weight > 0:
            raise InvalidInputError("pin_weight must be positive")


@dataclass(frozen=True)
class FlasParams(LasParams):
    radius_factor: float = 0.5
    n_candidates: int = 9

    def __post_init__(self) -> None:
        super().__post_init__()
        if self.n_candidates < 2:
            raise InvalidInputError("n_candidates must be >= 2")


@dataclass(frozen=True)
class SsmParams:
    iterations: int = 12
    seed: int = 0

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise InvalidInputError("iterations must be >= 1")


@dataclass(frozen=True)
class SomParams:
    learning_rate: float = 0.5
    learning_decay: float = 0.97
    radius_factor: float = 0.35
    radius_decay: float = 0.95
    epochs: int = 80
    seed: int = 0
    filtered: bool = False

    def __post_init__(self) -> None:
        if not 0 < self.learning_rate < 1:
            raise InvalidInputError("learning_rate must lie in (0, 1)")
        if not 0 < self.learning_decay <= 1 or not 0 < self.radius_decay <= 1:
            raise InvalidInputError("decay factors must lie in (0, 1]")
        if self.radius_factor <= 0 or self.epochs < 1:
            raise InvalidInputError("radius_factor must be positive and epochs >= 1")


PRESETS: dict[str, dict[str, dict]] = {
    "fast": {
        "las": {"radius_decay": 0.6},
        "flas": {"radius_decay": 0.6},
        "ssm": {"iterations": 3},
        "som": {"epochs": 12, "radius_decay": 0.8, "learning_decay": 0.9},
    },
    "quality": {
        "las": {"radius_decay": 0.93},
        "flas": {"radius_decay": 0.93},
        "ssm": {"iterations": 12},
        "som": {},
    },
}


def preset_params(algo: str, preset: str = "quality", **overrides):
    """Parameter object for ``algo`` under a named preset, with overrides applied."""
    kinds = {"las": LasParams, "flas": FlasParams, "ssm": SsmParams, "som": SomParams, "som-filtered": SomParams}
    if algo not in kinds:
        raise InvalidInputError(f"unknown algorithm {algo!r}")
    if preset not in PRESETS:
        raise InvalidInputError(f"unknown preset {preset!r}")
    base = "som" if algo == "som-filtered" else algo
    values = dict(PRESETS[preset][base])
    if algo == "som-filtered":
        values["filtered"] = True
    values.update({k: v for k, v in overrides.items() if v is not None})
    return kinds[algo](**values)


def radius_schedule(width: int, height: int, radius_factor: float, radius_decay: float) -> Iterator[int]:
    """Integer filter radii: start at ``floor(max(W, H) * f0)``, decay by ``f`` while >= 1."""
    r = float(math.floor(max(width, height) * radius_factor))
    while math.floor(r) >= 1:
        yield int(math.floor(r))
        r *= radius_decay


def filter_spec_for(radius: int, spec: GridSpec, aniso_ratio: float = 1.0, weighted: bool = False) -> FilterSpec:
    """Filter window for one step; horizontal radius is ``ceil(ratio * radius)``."""
    rx = int(math.ceil(aniso_ratio * radius)) if radius > 0 else 0
    ry = radius
    if spec.wrap == TORUS:
        rx = min(rx, (spec.width - 1) // 2)
        ry = min(ry, (spec.height - 1) // 2)
    return FilterSpec(rx, ry, spec.wrap, weighted)


class _MapBuilder:
    """Builds the filtered map from the current placement of inputs."""

    def __init__(self, ds: Dataset, spec: GridSpec, pin_weight: float):
        self.x = ds.vectors
        self.spec = spec
        self.weights = None
        if spec.pins:
            w = np.ones((spec.height, spec.width))
            for (c, r) in spec.pins:
                w[r, c] = spec.pin_weights.get((c, r), pin_weight)
            self.weights = w

    def filtered(self, index_grid: np.ndarray, fspec: FilterSpec) -> np.ndarray:
        h, w = index_grid.shape
        vec = np.zeros((h, w, self.x.shape[1]))
        placed = index_grid >= 0
        vec[placed] = self.x[index_grid[placed]]
        state = fill_inactive(MapState(vec, self.weights), self.spec)
        if fspec.radius_x == 0 and fspec.radius_y == 0:
            return state.vectors
        if self.weights is not None:
            return weighted_box_filter(state, fspec).vectors
        return box_filter(state, fspec).vectors


def _prepare(ds: Dataset, spec: GridSpec, seed) -> tuple[np.random.Generator, np.ndarray]:
    spec.check_dataset(ds)
    rng = make_rng(seed)
    grid = random_arrangement(spec, rng).index_grid()
    return rng, grid


def _swappable(spec: GridSpec) -> np.ndarray:
    ok = spec.mask.copy()
    for (c, r) in spec.pins:
        ok[r, c] = False
    return ok


def las_sort(ds: Dataset, spec: GridSpec, params: LasParams | None = None, on_step: StepCallback | None = None) -> Arrangement:
    """Linear assignment sorting: global re-assignment after every filter step."""
    p = params or LasParams()
    rng, grid = _prepare(ds, spec, p.seed)
    builder = _MapBuilder(ds, spec, p.pin_weight)
    free_cells = np.flatnonzero(_swappable(spec))
    x = ds.vectors
    radii = list(radius_schedule(spec.width, spec.height, p.radius_factor, p.radius_decay))
    if p.final_pass:
        radii.append(0)
    flat = grid.reshape(-1)
    for step, radius in enumerate(radii):
        if free_cells.size > 1:
            fspec = filter_spec_for(radius, spec, p.aniso_ratio, builder.weights is not None)
            mapv = builder.filtered(grid, fspec).reshape(-1, x.shape[1])
            items = flat[free_cells]
            costs = build_cost_matrix(x[items], mapv[free_cells], p.q)
            perm, _ = solve_lap(costs)
            flat[free_cells[perm]] = items
        if on_step is not None:
            on_step(step, radius, grid.copy())
    return Arrangement.from_index_grid(grid)


def flas_sort(ds: Dataset, spec: GridSpec, params: FlasParams | None = None, on_step: StepCallback | None = None, backend: str | None = None) -> Arrangement:
    """Fast linear assignment sorting: many small local exchanges per filter step."""
    p = params or FlasParams()
    kernels = _backend.get(backend)
    rng, grid = _prepare(ds, spec, p.seed)
    builder = _MapBuilder(ds, spec, p.pin_weight)
    swappable = _swappable(spec)
    swap_flat = np.ascontiguousarray(swappable.reshape(-1).astype(np.uint8))
    swap_cells = np.ascontiguousarray(np.flatnonzero(swappable).astype(np.int64))
    x = np.ascontiguousarray(ds.vectors)
    state = int(rng.integers(0, 2**63, dtype=np.int64)) * 2 + 1
    iterations = math.ceil(swap_cells.size / p.n_candidates)
    min_half = math.ceil((math.sqrt(p.n_candidates) - 1) / 2)
    radii = list(radius_schedule(spec.width, spec.height, p.radius_factor, p.radius_decay))
    if p.final_pass:
        radii.append(0)
    flat = np.ascontiguousarray(grid.reshape(-1))
    for step, radius in enumerate(radii):
        fspec = filter_spec_for(radius, spec, p.aniso_ratio, builder.weights is not None)
        mapv = np.ascontiguousarray(builder.filtered(flat.reshape(grid.shape), fspec).reshape(-1, x.shape[1]))
        half = max(radius, min_half)
        state = kernels.flas_pass(
            x, mapv, flat, swap_flat, swap_cells,
            spec.width, spec.height, spec.wrap == TORUS,
            p.n_candidates, half, iterations, state,
        )
        if on_step is not None:
            on_step(step, radius, flat.reshape(grid.shape).copy())
    return Arrangement.from_index_grid(flat.reshape(grid.shape))


# ------------------------------------------------------------------------ SSM

_PERMS = {k: np.array(list(permutations(range(k))), dtype=np.int64) for k in (2, 3, 4)}


def _ssm_levels(width: int, height: int) -> list[int]:
    b = max(1, math.ceil(max(width, height) / 4))
    levels = [b]
    while b > 1:
        b = math.ceil(b / 2)
        levels.append(b)
    return levels


def _block_targets(grid_vec: np.ndarray, b: int) -> np.ndarray:
    """Mean over each block and its adjacent blocks, per block; partial blocks count real cells."""
    h, w, d = grid_vec.shape
    bh, bw = math.ceil(h / b), math.ceil(w / b)
    sums = np.zeros((bh, bw, d))
    counts = np.zeros((bh, bw))
    rows = np.arange(h) // b
    cols = np.arange(w) // b
    np.add.at(sums, (rows[:, None], cols[None, :]), grid_vec)
    np.add.at(counts, (rows[:, None], cols[None, :]), 1.0)
    fs = FilterSpec(1, 1)
    total = box_filter(MapState(sums), fs).vectors
    n = box_filter(MapState(counts[:, :, None]), fs).vectors
    # box means divide by the same window size, so the ratio is sum / count
    return total / n


def _ssm_swap(x: np.ndarray, grid: np.ndarray, b: int, offset: int) -> None:
    """One sweep of best-of-k! exchanges among corresponding cells of 2x2 block groups."""
    h, w = grid.shape
    vec = x[grid]
    targets = _block_targets(vec, b)
    by, bx = np.divmod(np.arange(h * w), w)
    by, bx = by // b, bx // b
    # group origin (in block units) with the sweep's offset; group member 0..3
    gy, gx = (by + offset) // 2, (bx + offset) // 2
    member = ((by + offset) % 2) * 2 + ((bx + offset) % 2)
    ry, rx = np.divmod(np.arange(h * w), w)
    ry, rx = ry % b, rx % b
    key = ((gy * (w + 2) + gx) * b + ry) * b + rx
    order = np.lexsort((member, key))
    key_sorted = key[order]
    starts = np.flatnonzero(np.r_[True, key_sorted[1:] != key_sorted[:-1]])
    sizes = np.diff(np.r_[starts, key_sorted.size])
    flat = grid.reshape(-1)
    for k in (2, 3, 4):
        sel = starts[sizes == k]
        if sel.size == 0:
            continue
        cells = order[sel[:, None] + np.arange(k)[None, :]]
        block_of = by[cells] * targets.shape[1] + bx[cells]
        t = targets.reshape(-1, targets.shape[2])[block_of]
        v = x[flat[cells]]
        cost = ((v[:, :, None, :] - t[:, None, :, :]) ** 2).sum(-1)
        perms = _PERMS[k]
        totals = cost[:, np.arange(k)[None, :], perms].sum(-1)
        best = perms[np.argmin(totals, axis=1)]
        old = flat[cells].copy()
        rows = np.arange(cells.shape[0])[:, None]
        flat[cells[rows, best]] = old


def ssm_sort(ds: Dataset, spec: GridSpec, params: SsmParams | None = None) -> Arrangement:
    """Self-sorting map: hierarchical block swaps, best of all 4! permutations per quad."""
    p = params or SsmParams()
    if not spec.is_full or spec.pins:
        raise InvalidInputError("SSM supports full rectangular grids without pins only")
    if spec.wrap == TORUS:
        raise InvalidInputError("SSM supports clamp borders only")
    _, grid = _prepare(ds, spec, p.seed)
    x = ds.vectors
    for b in _ssm_levels(spec.width, spec.height):
        for it in range(p.iterations):
            _ssm_swap(x, grid, b, it % 2)
    return Arrangement.from_index_grid(grid)


# ------------------------------------------------------------------------ SOM


def som_sort(ds: Dataset, spec: GridSpec, params: SomParams | None = None, backend: str | None = None) -> Arrangement:
    """Self-organizing map with unique assignment of inputs to map cells.

    ``params.filtered`` swaps the per-input neighborhood blend for a copy of
    all inputs followed by one box filter pass per epoch.
    """
    p = params or SomParams()
    if not spec.is_full or spec.pins:
        raise InvalidInputError("SOM supports full rectangular grids without pins only")
    spec.check_dataset(ds)
    kernels = _backend.get(backend)
    rng = make_rng(p.seed)
    x = np.ascontiguousarray(ds.vectors)
    lo, hi = x.min(axis=0), x.max(axis=0)
    mapv = np.ascontiguousarray(rng.uniform(lo, hi, size=(spec.height * spec.width, x.shape[1])))
    active = np.ascontiguousarray(spec.mask.reshape(-1).astype(np.uint8))
    torus = spec.wrap == TORUS
    radius = max(spec.width, spec.height) * p.radius_factor
    alpha = p.learning_rate
    assign = None
    for _ in range(p.epochs):
        order = np.ascontiguousarray(rng.permutation(ds.n).astype(np.int64))
        r = int(math.floor(radius))
        if p.filtered:
            assign = kernels.som_epoch(x, mapv, active, order, spec.width, spec.height, torus, 0, 1.0, False)
            placed = np.zeros_like(mapv)
            placed[assign] = x
            fs = filter_spec_for(r, spec)
            mapv = np.ascontiguousarray(
                box_filter(MapState(placed.reshape(spec.height, spec.width, -1)), fs).vectors.reshape(mapv.shape)
            )
        else:
            assign = kernels.som_epoch(x, mapv, active, order, spec.width, spec.height, torus, r, alpha, True)
        radius *= p.radius_decay
        alpha *= p.learning_decay
    cells = np.stack([assign % spec.width, assign // spec.width], axis=1)
    return Arrangement(spec.width, spec.height, cells)


def random_sort(ds: Dataset, spec: GridSpec, seed: int = 0) -> Arrangement:
    spec.check_dataset(ds)
    return random_arrangement(spec, make_rng(seed))


def run_algorithm(algo: str, ds: Dataset, spec: GridSpec, params=None, seed: int | None = None) -> Arrangement:
    """Dispatch by name; ``seed`` overrides the seed stored in ``params``."""
    if algo == "random":
        return random_sort(ds, spec, 0 if seed is None else seed)
    if params is None:
        params = preset_params(algo)
    if seed is not None:
        params = replace(params, seed=seed)
    if algo == "las":
        return las_sort(ds, spec, params)
    if algo == "flas":
        return flas_sort(ds, spec, params)
    if algo == "ssm":
        return ssm_sort(ds, spec, params)
    if algo in ("som", "som-filtered"):
        return som_sort(ds, spec, params)
    raise InvalidInputError(f"unknown algorithm {algo!r}")
