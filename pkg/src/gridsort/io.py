"""Reading datasets, writing arrangements and reports, rendering layouts."""

from __future__ import annotations

import csv
import html
import json
import logging
import warnings
from pathlib import Path

import numpy as np

from .core import Arrangement, Dataset, GridSpec, InvalidInputError

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = {".png", ".ppm", ".pgm", ".pbm", ".jpg", ".jpeg", ".bmp", ".gif", ".tif", ".tiff", ".webp"}


class ParseError(InvalidInputError):
    pass


# -------------------------------------------------------------------- vectors


def _parse_csv(text: str) -> Dataset:
    vectors, labels = [], []
    has_label = None
    dim = None
    for rowno, row in enumerate(csv.reader(text.splitlines()), start=1):
        fields = [f.strip() for f in row]
        if not fields or not any(fields) or fields[0].startswith("#"):
            continue
        label = None
        if fields[-1].startswith("label="):
            label = fields[-1][len("label="):]
            fields = fields[:-1]
        if has_label is None:
            has_label = label is not None
        elif has_label != (label is not None):
            raise ParseError(f"row {rowno}: label column present on some rows only")
        try:
            vec = [float(f) for f in fields]
        except ValueError:
            raise ParseError(f"row {rowno}: non-numeric field") from None
        if dim is None:
            dim = len(vec)
        elif len(vec) != dim:
            raise ParseError(f"row {rowno}: expected {dim} values, found {len(vec)} (ragged row)")
        vectors.append(vec)
        labels.append(label)
    if not vectors:
        raise ParseError("no vectors found")
    return Dataset(np.array(vectors), labels=tuple(labels) if has_label else None)


def _parse_json(text: str) -> Dataset:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from None
    if not isinstance(data, list) or not data:
        raise ParseError("expected a non-empty JSON array")
    vectors, labels, paths = [], [], []
    dim = None
    for rowno, item in enumerate(data, start=1):
        if isinstance(item, dict):
            vec, label, path = item.get("vector"), item.get("label"), item.get("path")
        else:
            vec, label, path = item, None, None
        if not isinstance(vec, list):
            raise ParseError(f"row {rowno}: missing vector")
        try:
            vec = [float(v) for v in vec]
        except (TypeError, ValueError):
            raise ParseError(f"row {rowno}: non-numeric field") from None
        if dim is None:
            dim = len(vec)
        elif len(vec) != dim:
            raise ParseError(f"row {rowno}: expected {dim} values, found {len(vec)} (ragged row)")
        vectors.append(vec)
        labels.append(label)
        paths.append(path)
    return Dataset(
        np.array(vectors),
        labels=tuple(labels) if any(lb is not None for lb in labels) else None,
        paths=tuple(paths) if any(p is not None for p in paths) else None,
    )


def load_vectors(path: str | Path) -> Dataset:
    """CSV (one vector per row, optional trailing ``label=<str>``) or JSON array."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json" or text.lstrip().startswith("["):
        return _parse_json(text)
    return _parse_csv(text)


def save_vectors(ds: Dataset, path: str | Path) -> None:
    rows = []
    for i, vec in enumerate(ds.vectors):
        item: dict = {"vector": [float(v) for v in vec]}
        if ds.labels is not None:
            item["label"] = ds.labels[i]
        if ds.paths is not None:
            item["path"] = ds.paths[i]
        rows.append(item)
    Path(path).write_text(json.dumps(rows) + "\n")


# ------------------------------------------------------------------- features


def _area_weights(n_in: int, n_out: int) -> np.ndarray:
    """``(n_out, n_in)`` matrix averaging input samples over equal-length output bins."""
    edges = np.linspace(0.0, n_in, n_out + 1)
    lo, hi = edges[:-1, None], edges[1:, None]
    px = np.arange(n_in)[None, :]
    overlap = np.clip(np.minimum(hi, px + 1) - np.maximum(lo, px), 0.0, None)
    return overlap / overlap.sum(axis=1, keepdims=True)


def image_features(path: str | Path, blocks: int = 4) -> np.ndarray:
    """Mean RGB of a ``blocks x blocks`` partition, values in [0, 1], row-major."""
    from PIL import Image

    with Image.open(path) as im:
        rgb = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    h, w, _ = rgb.shape
    ay, ax = _area_weights(h, blocks), _area_weights(w, blocks)
    pooled = np.einsum("ih,hwc,jw->ijc", ay, rgb, ax)
    return np.clip(pooled, 0.0, 1.0).reshape(-1)


def extract_features(image_dir: str | Path, skipped: list[str] | None = None) -> Dataset:
    """48-dim color-layout vectors for every decodable image in a directory.

    Undecodable files are skipped with a warning and appended to ``skipped``.
    """
    image_dir = Path(image_dir)
    if not image_dir.is_dir():
        raise InvalidInputError(f"not a directory: {image_dir}")
    vectors, paths = [], []
    for path in sorted(p for p in image_dir.iterdir() if p.is_file()):
        if path.suffix.lower() not in IMAGE_SUFFIXES:
            continue
        try:
            vectors.append(image_features(path))
        except Exception as exc:  # PIL raises a variety of types for bad files
            msg = f"skipping undecodable image {path.name}: {exc}"
            warnings.warn(msg, stacklevel=2)
            log.warning(msg)
            if skipped is not None:
                skipped.append(str(path))
            continue
        paths.append(str(path))
    if not vectors:
        raise InvalidInputError(f"no decodable images in {image_dir}")
    return Dataset(np.array(vectors), paths=tuple(paths))


# --------------------------------------------------------------- arrangements


def arrangement_to_json(arr: Arrangement) -> str:
    cells = [{"col": int(c), "row": int(r), "index": i} for i, (c, r) in enumerate(arr.cells)]
    return json.dumps({"width": arr.width, "height": arr.height, "cells": cells}, indent=1) + "\n"


def arrangement_from_json(text: str) -> Arrangement:
    try:
        data = json.loads(text)
        width, height = int(data["width"]), int(data["height"])
        entries = data["cells"]
        cells = np.full((len(entries), 2), -1, dtype=np.int64)
        for e in entries:
            idx = int(e["index"])
            if not 0 <= idx < len(entries) or cells[idx, 0] >= 0:
                raise InvalidInputError(f"arrangement index {idx} is out of range or repeated")
            cells[idx] = (int(e["col"]), int(e["row"]))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InvalidInputError):
            raise
        raise ParseError(f"malformed arrangement JSON: {exc}") from None
    return Arrangement(width, height, cells)


def save_arrangement(arr: Arrangement, path: str | Path) -> None:
    Path(path).write_text(arrangement_to_json(arr))


def load_arrangement(path: str | Path) -> Arrangement:
    return arrangement_from_json(Path(path).read_text())


def save_report(report: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(report, indent=1, sort_keys=True) + "\n")


# ------------------------------------------------------------------ rendering


def _hex(rgb: np.ndarray) -> str:
    r, g, b = (int(round(float(v) * 255)) for v in rgb)
    return f"#{r:02x}{g:02x}{b:02x}"


def render_svg(arr: Arrangement, ds: Dataset, spec: GridSpec | None = None, cell: int = 16) -> str:
    """One rect per grid cell; item cells take the item's RGB color, inactive cells are transparent."""
    if ds.dim != 3:
        raise InvalidInputError(f"svg swatches need 3-dim RGB vectors, got d={ds.dim}")
    if ds.vectors.min() < 0 or ds.vectors.max() > 1:
        raise InvalidInputError("svg swatches need RGB values in [0, 1]")
    if arr.n != ds.n:
        raise InvalidInputError(f"N mismatch: arrangement has {arr.n} items, dataset {ds.n}")
    grid = arr.index_grid()
    mask = spec.mask if spec is not None else grid >= 0
    w, h = arr.width * cell, arr.height * cell
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">']
    for r in range(arr.height):
        for c in range(arr.width):
            idx = grid[r, c]
            x, y = c * cell, r * cell
            if idx >= 0:
                out.append(f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{_hex(ds.vectors[idx])}"/>')
            elif not mask[r, c]:
                out.append(f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="none" fill-opacity="0"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_html(arr: Arrangement, ds: Dataset, cell: int = 64, base_dir: str | Path | None = None) -> str:
    """Table of ``<img>`` cells; missing image files become placeholder cells with a warning."""
    if ds.paths is None:
        raise InvalidInputError("html montage needs image paths in the dataset")
    if arr.n != ds.n:
        raise InvalidInputError(f"N mismatch: arrangement has {arr.n} items, dataset {ds.n}")
    grid = arr.index_grid()
    base = Path(base_dir) if base_dir is not None else None
    rows = []
    for r in range(arr.height):
        tds = []
        for c in range(arr.width):
            idx = grid[r, c]
            if idx < 0:
                tds.append('<td class="empty"></td>')
                continue
            src = ds.paths[idx]
            local = Path(src) if base is None or Path(src).is_absolute() else base / src
            if not local.exists():
                msg = f"image not found: {src}"
                warnings.warn(msg, stacklevel=2)
                log.warning(msg)
                tds.append(f'<td class="missing" title="{html.escape(src)}">?</td>')
                continue
            tds.append(f'<td><img src="{html.escape(src)}" width="{cell}" height="{cell}" alt=""></td>')
        rows.append("<tr>" + "".join(tds) + "</tr>")
    style = (
        "table{border-collapse:collapse}td{padding:0;width:%dpx;height:%dpx}"
        "td.missing{background:#ccc;text-align:center;color:#666}" % (cell, cell)
    )
    return (
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><style>"
        + style
        + "</style></head><body><table>\n"
        + "\n".join(rows)
        + "\n</table></body></html>\n"
    )
