"""Low-pass filtering of the map-vector field.

Box means are computed from running sums along each axis, so the cost per
cell does not depend on the radius.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import CLAMP, TORUS, WRAP_MODES, GridSpec, InvalidInputError


@dataclass
class MapState:
    """``H x W x d`` map vectors plus optional per-cell filter weights."""

    vectors: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim == 2:
            self.vectors = self.vectors[:, :, None]
        if self.vectors.ndim != 3:
            raise InvalidInputError("map vectors must have shape (H, W, d)")
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=np.float64)
            if self.weights.shape != self.vectors.shape[:2]:
                raise InvalidInputError("weights must have shape (H, W)")
            if (self.weights < 0).any() or not np.all(np.isfinite(self.weights)):
                raise InvalidInputError("weights must be finite and nonnegative")

    @property
    def height(self) -> int:
        return self.vectors.shape[0]

    @property
    def width(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True)
class FilterSpec:
    radius_x: int
    radius_y: int
    border: str = CLAMP
    weighted: bool = False

    def __post_init__(self) -> None:
        for r in (self.radius_x, self.radius_y):
            if int(r) != r or r < 0:
                raise InvalidInputError("filter radii must be nonnegative integers")
        object.__setattr__(self, "radius_x", int(self.radius_x))
        object.__setattr__(self, "radius_y", int(self.radius_y))
        if self.border not in WRAP_MODES:
            raise InvalidInputError(f"border must be one of {WRAP_MODES}")

    @classmethod
    def isotropic(cls, radius: int, border: str = CLAMP, weighted: bool = False) -> FilterSpec:
        return cls(radius, radius, border, weighted)


def _window_sum(a: np.ndarray, r: int, axis: int, torus: bool) -> np.ndarray:
    """Sum over ``[i - r, i + r]`` along ``axis``; out-of-range terms are 0 or wrapped."""
    if r == 0:
        return a.copy()
    n = a.shape[axis]
    pad = [(0, 0)] * a.ndim
    pad[axis] = (r, r)
    padded = np.pad(a, pad, mode="wrap" if torus else "constant")
    cs = np.cumsum(padded, axis=axis)
    zero_shape = list(cs.shape)
    zero_shape[axis] = 1
    cs = np.concatenate([np.zeros(zero_shape), cs], axis=axis)
    hi = np.take(cs, np.arange(2 * r + 1, 2 * r + 1 + n), axis=axis)
    lo = np.take(cs, np.arange(0, n), axis=axis)
    return hi - lo


def _box_sum(a: np.ndarray, rx: int, ry: int, torus: bool) -> np.ndarray:
    return _window_sum(_window_sum(a, rx, 1, torus), ry, 0, torus)


def _check_radii(height: int, width: int, spec: FilterSpec) -> None:
    if spec.border == TORUS and (spec.radius_x >= width or spec.radius_y >= height):
        raise InvalidInputError(
            f"torus filter radii ({spec.radius_x}, {spec.radius_y}) must be below map size ({width}, {height})"
        )


def box_filter(state: MapState, spec: FilterSpec) -> MapState:
    """Mean over the ``(2rx+1) x (2ry+1)`` window of every cell.

    Clamp mode averages only in-bounds cells; torus mode wraps indices.
    """
    if spec.weighted:
        return weighted_box_filter(state, spec)
    _check_radii(state.height, state.width, spec)
    torus = spec.border == TORUS
    sums = _box_sum(state.vectors, spec.radius_x, spec.radius_y, torus)
    counts = _box_sum(np.ones(state.vectors.shape[:2]), spec.radius_x, spec.radius_y, torus)
    return MapState(sums / counts[:, :, None], state.weights)


def weighted_box_filter(state: MapState, spec: FilterSpec) -> MapState:
    """Weighted window mean ``sum(w * v) / sum(w)``."""
    _check_radii(state.height, state.width, spec)
    weights = state.weights if state.weights is not None else np.ones(state.vectors.shape[:2])
    torus = spec.border == TORUS
    num = _box_sum(state.vectors * weights[:, :, None], spec.radius_x, spec.radius_y, torus)
    den = _box_sum(weights, spec.radius_x, spec.radius_y, torus)
    if (den <= 0).any():
        raise InvalidInputError("a filter window has zero total weight")
    return MapState(num / den[:, :, None], state.weights)


@lru_cache(maxsize=32)
def _nearest_active_cached(mask_bytes: bytes, height: int, width: int, wrap: str) -> np.ndarray:
    mask = np.frombuffer(mask_bytes, dtype=bool).reshape(height, width)
    active = np.flatnonzero(mask)
    ay, ax = np.divmod(active, width)
    nearest = np.arange(height * width)
    inactive = np.flatnonzero(~mask)
    chunk = max(1, 4_000_000 // max(active.size, 1))
    for start in range(0, inactive.size, chunk):
        cells = inactive[start : start + chunk]
        cy, cx = np.divmod(cells, width)
        dx = np.abs(cx[:, None] - ax[None, :])
        dy = np.abs(cy[:, None] - ay[None, :])
        if wrap == TORUS:
            dx = np.minimum(dx, width - dx)
            dy = np.minimum(dy, height - dy)
        # argmin returns the first active cell in row-major order on ties
        nearest[cells] = active[np.argmin(dx * dx + dy * dy, axis=1)]
    nearest.setflags(write=False)
    return nearest


def nearest_active(spec: GridSpec) -> np.ndarray:
    """Flat index of the nearest active cell for every cell (itself if active)."""
    return _nearest_active_cached(
        np.ascontiguousarray(spec.mask).tobytes(), spec.height, spec.width, spec.wrap
    )


def fill_inactive(state: MapState, spec: GridSpec) -> MapState:
    """Copy into every masked-out cell the vector of its nearest active cell."""
    if spec.is_full:
        return MapState(state.vectors.copy(), state.weights)
    h, w, d = state.vectors.shape
    flat = state.vectors.reshape(h * w, d)
    return MapState(flat[nearest_active(spec)].reshape(h, w, d), state.weights)

