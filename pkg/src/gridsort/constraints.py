"""Builders for constrained layouts: shape masks, pinned cells, anisotropic filters."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import CLAMP, GridSpec, InvalidInputError
from .filtering import FilterSpec, MapState
from .sorters import DEFAULT_PIN_WEIGHT, filter_spec_for, radius_schedule


@dataclass(frozen=True)
class MaskSource:
    bitmap: np.ndarray

    def __post_init__(self) -> None:
        bm = np.array(self.bitmap, dtype=bool)
        if bm.ndim != 2 or bm.size == 0:
            raise InvalidInputError("mask bitmap must be a non-empty 2D array")
        if not bm.any():
            raise InvalidInputError("mask has no active cells")
        bm.setflags(write=False)
        object.__setattr__(self, "bitmap", bm)

    @property
    def width(self) -> int:
        return self.bitmap.shape[1]

    @property
    def height(self) -> int:
        return self.bitmap.shape[0]

    @property
    def n_active(self) -> int:
        return int(self.bitmap.sum())

    @classmethod
    def from_text(cls, text: str) -> MaskSource:
        """Rows of ``0``/``1`` characters; whitespace between characters is ignored."""
        rows = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            chars = "".join(line.split())
            if not chars:
                continue
            if set(chars) - {"0", "1"}:
                raise InvalidInputError(f"mask line {lineno}: only 0 and 1 are allowed")
            rows.append([ch == "1" for ch in chars])
        if not rows:
            raise InvalidInputError("mask text is empty")
        if len({len(r) for r in rows}) != 1:
            raise InvalidInputError("mask rows have different lengths")
        return cls(np.array(rows, dtype=bool))

    @classmethod
    def from_image(cls, path: str | Path) -> MaskSource:
        """Grayscale image (PGM P2/P5, PNG, ...); pixels at or above 50% gray are active."""
        from PIL import Image

        with Image.open(path) as im:
            if im.mode in ("I", "I;16", "I;16B", "I;16L"):
                a = np.asarray(im, dtype=np.float64)
                top = 65535.0 if a.max() > 255 else 255.0
            else:
                a = np.asarray(im.convert("L"), dtype=np.float64)
                top = 255.0
        return cls(a >= 0.5 * top)

    @classmethod
    def load(cls, path: str | Path) -> MaskSource:
        path = Path(path)
        with open(path, "rb") as fh:
            head = fh.read(2)
        if head[:1] in (b"0", b"1"):
            return cls.from_text(path.read_text())
        return cls.from_image(path)


def heart_bitmap(width: int, height: int) -> np.ndarray:
    """Filled heart curve ``(x^2 + y^2 - 1)^3 <= x^2 y^3`` sampled at cell centers."""
    xs = (np.arange(width) + 0.5) / width * 2.6 - 1.3
    ys = 1.25 - (np.arange(height) + 0.5) / height * 2.6
    x, y = np.meshgrid(xs, ys)
    return (x**2 + y**2 - 1) ** 3 - x**2 * y**3 <= 0


def grid_from_mask(src: MaskSource, wrap: str = CLAMP) -> GridSpec:
    return GridSpec(src.width, src.height, mask=src.bitmap, wrap=wrap)


@dataclass(frozen=True)
class Pin:
    col: int
    row: int
    index: int
    weight: float = DEFAULT_PIN_WEIGHT


@dataclass(frozen=True)
class PinDecl:
    pins: tuple[Pin, ...] = ()

    def __post_init__(self) -> None:
        pins = tuple(self.pins)
        cells = [(p.col, p.row) for p in pins]
        if len(set(cells)) != len(cells):
            dup = next(c for c in cells if cells.count(c) > 1)
            raise InvalidInputError(f"conflicting pins: cell {dup} is pinned more than once")
        indices = [p.index for p in pins]
        if len(set(indices)) != len(indices):
            raise InvalidInputError("conflicting pins: a dataset index is pinned more than once")
        if any(not p.weight > 0 for p in pins):
            raise InvalidInputError("pin weights must be positive")
        object.__setattr__(self, "pins", pins)

    @classmethod
    def parse(cls, text: str) -> PinDecl:
        """Lines ``col,row,index[,weight]``; blank lines and ``#`` comments are skipped."""
        pins = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) not in (3, 4):
                raise InvalidInputError(f"pins line {lineno}: expected col,row,index[,weight]")
            try:
                col, row, idx = (int(p) for p in parts[:3])
                weight = float(parts[3]) if len(parts) == 4 else DEFAULT_PIN_WEIGHT
            except ValueError:
                raise InvalidInputError(f"pins line {lineno}: non-numeric field") from None
            pins.append(Pin(col, row, idx, weight))
        return cls(tuple(pins))

    @classmethod
    def load(cls, path: str | Path) -> PinDecl:
        return cls.parse(Path(path).read_text())


def apply_pins(spec: GridSpec, pins: PinDecl, state: MapState | None = None) -> tuple[GridSpec, MapState | None]:
    """Write pins into the grid spec and their weights into the map state.

    Pins already present on ``spec`` are kept; a second pin on the same cell
    or for the same index is a conflict.
    """
    merged = dict(spec.pins)
    weights = dict(spec.pin_weights)
    for p in pins.pins:
        cell = (p.col, p.row)
        if cell in merged:
            raise InvalidInputError(f"conflicting pins: cell {cell} is already pinned")
        merged[cell] = p.index
        weights[cell] = p.weight
    new_spec = GridSpec(spec.width, spec.height, spec.mask, spec.wrap, merged, weights)
    if state is None:
        return new_spec, None
    if state.vectors.shape[:2] != (spec.height, spec.width):
        raise InvalidInputError("map state does not match the grid size")
    w = np.ones((spec.height, spec.width))
    for (c, r), wt in weights.items():
        w[r, c] = wt
    return new_spec, MapState(state.vectors, w)


def anisotropic_preset(
    spec: GridSpec, ratio: float, radius_factor: float = 0.35, radius_decay: float = 0.93
) -> list[FilterSpec]:
    """Filter windows for every step of the decay schedule with ``rx = ceil(ratio * ry)``."""
    if not ratio >= 1 or not math.isfinite(ratio):
        raise InvalidInputError("anisotropy ratio must be >= 1")
    return [
        filter_spec_for(r, spec, ratio)
        for r in radius_schedule(spec.width, spec.height, radius_factor, radius_decay)
    ]
