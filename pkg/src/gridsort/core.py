"""Domain types shared by the sorters and the metrics.

Cells are addressed as integer ``(col, row)`` pairs with unit spacing. An
arrangement stores, for every dataset index, the cell it occupies, and keeps
the inverse as an ``H x W`` integer grid (``-1`` marks a free cell).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

CLAMP = "clamp"
TORUS = "torus"
WRAP_MODES = (CLAMP, TORUS)


class InvalidInputError(ValueError):
    """Raised when an operation receives data that violates its preconditions."""


@dataclass(frozen=True)
class Dataset:
    vectors: np.ndarray
    labels: tuple | None = None
    paths: tuple | None = None

    def __post_init__(self) -> None:
        vecs = np.asarray(self.vectors, dtype=np.float64)
        if vecs.ndim == 1:
            vecs = vecs[:, None]
        if vecs.ndim != 2 or vecs.shape[0] < 1 or vecs.shape[1] < 1:
            raise InvalidInputError("dataset needs N >= 1 vectors of dimension d >= 1")
        if not np.all(np.isfinite(vecs)):
            raise InvalidInputError("dataset vectors must be finite")
        vecs.setflags(write=False)
        object.__setattr__(self, "vectors", vecs)
        for name in ("labels", "paths"):
            value = getattr(self, name)
            if value is not None:
                value = tuple(value)
                if len(value) != vecs.shape[0]:
                    raise InvalidInputError(f"{name} must have exactly N={vecs.shape[0]} entries")
                object.__setattr__(self, name, value)

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True)
class GridSpec:
    """Grid geometry: size, active-cell mask, border mode and pinned cells.

    ``pins`` maps ``(col, row)`` to the dataset index that must sit there.
    ``pin_weights`` optionally overrides the filter weight of a pinned cell.
    """

    width: int
    height: int
    mask: np.ndarray | None = None
    wrap: str = CLAMP
    pins: Mapping[tuple[int, int], int] = field(default_factory=dict)
    pin_weights: Mapping[tuple[int, int], float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise InvalidInputError("grid dimensions must be positive")
        if self.wrap not in WRAP_MODES:
            raise InvalidInputError(f"wrap must be one of {WRAP_MODES}, got {self.wrap!r}")
        if self.mask is None:
            mask = np.ones((self.height, self.width), dtype=bool)
        else:
            mask = np.array(self.mask, dtype=bool)
            if mask.shape != (self.height, self.width):
                raise InvalidInputError(
                    f"mask shape {mask.shape} does not match grid {self.height}x{self.width}"
                )
        if not mask.any():
            raise InvalidInputError("grid has no active cells")
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)
        pins = {(int(c), int(r)): int(i) for (c, r), i in dict(self.pins).items()}
        for (c, r) in pins:
            if not (0 <= c < self.width and 0 <= r < self.height) or not mask[r, c]:
                raise InvalidInputError(f"pinned cell {(c, r)} is not an active cell")
        if len(set(pins.values())) != len(pins):
            raise InvalidInputError("pinned dataset indices must be distinct")
        weights = {(int(c), int(r)): float(w) for (c, r), w in dict(self.pin_weights).items()}
        for cell, w in weights.items():
            if cell not in pins:
                raise InvalidInputError(f"weight given for unpinned cell {cell}")
            if not w > 0:
                raise InvalidInputError("pin weights must be positive")
        object.__setattr__(self, "pins", pins)
        object.__setattr__(self, "pin_weights", weights)

    @property
    def n_active(self) -> int:
        return int(self.mask.sum())

    @property
    def is_full(self) -> bool:
        return bool(self.mask.all())

    def active_cells(self) -> np.ndarray:
        """Active cells as an ``(n_active, 2)`` array of (col, row), row-major order."""
        rows, cols = np.nonzero(self.mask)
        return np.stack([cols, rows], axis=1)

    def check_dataset(self, ds: Dataset) -> None:
        if ds.n != self.n_active:
            raise InvalidInputError(
                f"N mismatch: dataset has {ds.n} items but grid has {self.n_active} active cells"
            )
        for idx in self.pins.values():
            if not 0 <= idx < ds.n:
                raise InvalidInputError(f"pinned index {idx} out of range for N={ds.n}")


class Arrangement:
    """Bijection between dataset indices and grid cells."""

    def __init__(self, width: int, height: int, cells: np.ndarray):
        cells = np.asarray(cells, dtype=np.int64).reshape(-1, 2)
        self.width = int(width)
        self.height = int(height)
        self.cells = cells
        self.cells.setflags(write=False)

    @classmethod
    def from_index_grid(cls, index_grid: np.ndarray) -> Arrangement:
        grid = np.asarray(index_grid)
        h, w = grid.shape
        rows, cols = np.nonzero(grid >= 0)
        idx = grid[rows, cols]
        cells = np.empty((idx.size, 2), dtype=np.int64)
        if idx.size and (np.sort(idx) != np.arange(idx.size)).any():
            raise InvalidInputError("index grid does not hold each index 0..N-1 exactly once")
        cells[idx, 0] = cols
        cells[idx, 1] = rows
        return cls(w, h, cells)

    @classmethod
    def identity(cls, spec: GridSpec) -> Arrangement:
        return cls(spec.width, spec.height, spec.active_cells())

    @property
    def n(self) -> int:
        return self.cells.shape[0]

    def index_grid(self) -> np.ndarray:
        """``H x W`` grid of dataset indices, ``-1`` where no item sits.

        Raises if two items share a cell; use :func:`validate` to inspect
        broken arrangements without raising.
        """
        grid = np.full((self.height, self.width), -1, dtype=np.int64)
        c, r = self.cells[:, 0], self.cells[:, 1]
        if ((c < 0) | (c >= self.width) | (r < 0) | (r >= self.height)).any():
            raise InvalidInputError("arrangement has cells outside the grid")
        grid[r, c] = np.arange(self.n)
        if np.count_nonzero(grid >= 0) != self.n:
            raise InvalidInputError("arrangement is not injective")
        return grid

    def cell_of(self, index: int) -> tuple[int, int]:
        c, r = self.cells[index]
        return int(c), int(r)

    def index_of(self, cell: tuple[int, int]) -> int:
        hit = np.nonzero((self.cells[:, 0] == cell[0]) & (self.cells[:, 1] == cell[1]))[0]
        return int(hit[0]) if hit.size else -1

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Arrangement):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and np.array_equal(self.cells, other.cells)
        )

    def __repr__(self) -> str:
        return f"Arrangement({self.width}x{self.height}, n={self.n})"


@dataclass(frozen=True)
class DistanceConfig:
    hd_metric: str = "euclidean"

    def __post_init__(self) -> None:
        if self.hd_metric not in ("euclidean", "squared_euclidean"):
            raise InvalidInputError(f"unknown hd_metric {self.hd_metric!r}")


def hd_distance(a: Sequence[float], b: Sequence[float], cfg: DistanceConfig | None = None) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidInputError(f"dimension mismatch: {a.shape} vs {b.shape}")
    sq = float(np.sum((a - b) ** 2))
    if cfg is not None and cfg.hd_metric == "squared_euclidean":
        return sq
    return float(np.sqrt(sq))


def pairwise_hd(vectors: np.ndarray, cfg: DistanceConfig | None = None) -> np.ndarray:
    """All pairwise HD distances, exactly zero on the diagonal."""
    x = np.asarray(vectors, dtype=np.float64)
    diff = x[:, None, :] - x[None, :, :] if x.shape[0] <= 512 else None
    if diff is not None:
        sq = np.einsum("ijk,ijk->ij", diff, diff)
    else:
        norms = np.einsum("ij,ij->i", x, x)
        sq = norms[:, None] + norms[None, :] - 2.0 * (x @ x.T)
        np.maximum(sq, 0.0, out=sq)
    np.fill_diagonal(sq, 0.0)
    if cfg is not None and cfg.hd_metric == "squared_euclidean":
        return sq
    return np.sqrt(sq)


def axis_deltas(p: np.ndarray, q: np.ndarray, width: int, height: int, wrap: str) -> tuple[np.ndarray, np.ndarray]:
    """Per-axis absolute cell offsets, wrapped around the grid under torus mode."""
    dx = np.abs(np.asarray(p)[..., 0] - np.asarray(q)[..., 0])
    dy = np.abs(np.asarray(p)[..., 1] - np.asarray(q)[..., 1])
    if wrap == TORUS:
        dx = np.minimum(dx, width - dx)
        dy = np.minimum(dy, height - dy)
    return dx, dy


def grid_distance(c1: tuple[int, int], c2: tuple[int, int], spec: GridSpec) -> float:
    for c in (c1, c2):
        col, row = c
        if not (0 <= col < spec.width and 0 <= row < spec.height) or not spec.mask[row, col]:
            raise InvalidInputError(f"cell {c} is not an active cell")
    dx, dy = axis_deltas(np.array(c1), np.array(c2), spec.width, spec.height, spec.wrap)
    return float(np.hypot(dx, dy))


@dataclass
class Validation:
    violations: list[str]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate(arr: Arrangement, spec: GridSpec, ds: Dataset | None = None) -> Validation:
    """Check bijection, mask and pin invariants; violations are returned, not raised."""
    problems: list[str] = []
    if (arr.width, arr.height) != (spec.width, spec.height):
        problems.append(
            f"grid size mismatch: arrangement {arr.width}x{arr.height}, spec {spec.width}x{spec.height}"
        )
        return Validation(problems)
    if ds is not None and arr.n != ds.n:
        problems.append(f"N mismatch: arrangement has {arr.n} items, dataset {ds.n}")
    c, r = arr.cells[:, 0], arr.cells[:, 1]
    inside = (c >= 0) & (c < spec.width) & (r >= 0) & (r < spec.height)
    if not inside.all():
        problems.append(f"cells outside grid for indices {np.nonzero(~inside)[0].tolist()}")
    ci, ri = c[inside], r[inside]
    flat = ri * spec.width + ci
    if np.unique(flat).size != flat.size:
        problems.append("not injective: several indices share a cell")
    masked = ~spec.mask[ri, ci]
    if masked.any():
        problems.append(f"mask violated: {int(masked.sum())} items on inactive cells")
    if arr.n != spec.n_active:
        problems.append(f"not surjective: {arr.n} items for {spec.n_active} active cells")
    for cell, idx in spec.pins.items():
        if idx >= arr.n or tuple(arr.cells[idx]) != cell:
            problems.append(f"pin broken: cell {cell} should hold index {idx}")
    return Validation(problems)


def make_rng(seed: int | np.random.Generator | None) -> np.random.Generator:
    """Seeded generator; identical seeds give identical streams on one build."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def random_arrangement(spec: GridSpec, rng: np.random.Generator) -> Arrangement:
    """Uniform random placement over active cells that honors the grid's pins."""
    cells = spec.active_cells()
    n = cells.shape[0]
    out = np.empty((n, 2), dtype=np.int64)
    pinned_idx = np.array(sorted(spec.pins.values()), dtype=np.int64)
    pinned_cells = {cell for cell in spec.pins}
    free_cells = np.array([i for i, (c, r) in enumerate(cells) if (int(c), int(r)) not in pinned_cells], dtype=np.int64)
    free_idx = np.setdiff1d(np.arange(n), pinned_idx)
    for cell, idx in spec.pins.items():
        out[idx] = cell
    out[free_idx] = cells[free_cells[rng.permutation(free_cells.size)]]
    return Arrangement(spec.width, spec.height, out)
