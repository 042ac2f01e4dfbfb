"""Quality metrics for grid arrangements.

All metrics compare high-dimensional distances ``delta`` between items with
grid distances ``lambda`` between the cells they occupy. Cells at the same
grid distance from a query form a *ring*; every metric resolves ring ties so
that rotating or mirroring an arrangement leaves its score unchanged.

Pairwise work is done in row chunks, so peak memory is O(chunk * N) rather
than O(N^2) for the neighborhood metrics. Chunks may run on several threads
(``GRIDSORT_THREADS``); partial results are always reduced in chunk order.
"""

from __future__ import annotations

import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .core import CLAMP, TORUS, Arrangement, Dataset, DistanceConfig, GridSpec, InvalidInputError

TIE_SORTED = "sorted"
TIE_MEAN = "mean"
_CHUNK_ELEMS = 2_000_000


class UndefinedMetricError(ValueError):
    """Raised when a metric is undefined for the given input (e.g. zero variance)."""


def _threads() -> int:
    try:
        n = int(os.environ.get("GRIDSORT_THREADS", "1"))
    except ValueError:
        n = 1
    return max(1, min(n, os.cpu_count() or 1))


def _hd_rows(x: np.ndarray, rows: slice, cfg: DistanceConfig | None) -> np.ndarray:
    block = x[rows]
    sq = np.zeros((block.shape[0], x.shape[0]))
    for e in range(x.shape[1]):
        diff = block[:, e][:, None] - x[:, e][None, :]
        sq += diff * diff
    if cfg is not None and cfg.hd_metric == "squared_euclidean":
        return sq
    return np.sqrt(sq)


def _grid_sq_rows(cells: np.ndarray, rows: slice, width: int, height: int, wrap: str) -> np.ndarray:
    block = cells[rows]
    dx = np.abs(block[:, 0][:, None] - cells[:, 0][None, :])
    dy = np.abs(block[:, 1][:, None] - cells[:, 1][None, :])
    if wrap == TORUS:
        dx = np.minimum(dx, width - dx)
        dy = np.minimum(dy, height - dy)
    return dx * dx + dy * dy


@dataclass
class _Pairs:
    """Row-chunked access to HD distances and squared grid distances."""

    x: np.ndarray
    cells: np.ndarray
    width: int
    height: int
    wrap: str
    cfg: DistanceConfig | None

    @property
    def n(self) -> int:
        return self.x.shape[0]

    def chunks(self) -> list[slice]:
        step = max(1, _CHUNK_ELEMS // max(self.n, 1))
        return [slice(s, min(s + step, self.n)) for s in range(0, self.n, step)]

    def delta(self, rows: slice) -> np.ndarray:
        return _hd_rows(self.x, rows, self.cfg)

    def grid_sq(self, rows: slice) -> np.ndarray:
        return _grid_sq_rows(self.cells, rows, self.width, self.height, self.wrap)

    def reduce(self, fn: Callable[[slice], np.ndarray]) -> np.ndarray:
        """Sum ``fn(chunk)`` over chunks, combining in chunk order."""
        chunks = self.chunks()
        workers = _threads()
        if workers > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(workers) as pool:
                parts = list(pool.map(fn, chunks))
        else:
            parts = [fn(c) for c in chunks]
        total = parts[0].copy()
        for part in parts[1:]:
            total += part
        return total


def _pairs(arr: Arrangement, ds: Dataset, wrap: str, cfg: DistanceConfig | None) -> _Pairs:
    if arr.n != ds.n:
        raise InvalidInputError(f"N mismatch: arrangement has {arr.n} items, dataset {ds.n}")
    return _Pairs(ds.vectors, np.asarray(arr.cells), arr.width, arr.height, wrap, cfg)


def _first_positions(sorted_vals: np.ndarray) -> np.ndarray:
    """For each sorted entry, the index of the first entry equal to it (per row)."""
    k = sorted_vals.shape[1]
    idx = np.broadcast_to(np.arange(k), sorted_vals.shape)
    starts = np.ones(sorted_vals.shape, dtype=bool)
    starts[:, 1:] = sorted_vals[:, 1:] != sorted_vals[:, :-1]
    return np.maximum.accumulate(np.where(starts, idx, 0), axis=1)


def _last_positions(sorted_vals: np.ndarray) -> np.ndarray:
    flipped = sorted_vals[:, ::-1]
    k = sorted_vals.shape[1]
    return (k - 1) - _first_positions(-flipped)[:, ::-1]


def p_norm(values: np.ndarray, p: float) -> float:
    v = np.abs(np.asarray(values, dtype=np.float64))
    if v.size == 0:
        return 0.0
    top = v.max()
    if top == 0:
        return 0.0
    if np.isinf(p):
        return float(top)
    return float(top * np.sum((v / top) ** p) ** (1.0 / p))


def _check_p(p: float) -> float:
    p = float(p)
    if not p >= 1:
        raise InvalidInputError("p must be >= 1")
    return p


# ---------------------------------------------------------------- neighborhoods


def np_k_curve(
    arr: Arrangement,
    ds: Dataset,
    spec: GridSpec | None = None,
    wrap: str = CLAMP,
    cfg: DistanceConfig | None = None,
) -> np.ndarray:
    """``NP_k`` for ``k = 1..N-1`` as an array of length ``K = N - 1``.

    A ring cut by ``k`` counts each member with the fraction of the ring that
    falls inside the neighborhood, which is the expected overlap over uniform
    tie orders. HD neighborhoods include every item tied with the k-th one.
    """
    pairs = _pairs(arr, ds, wrap, cfg)
    n = pairs.n
    if n < 2:
        return np.zeros(0)
    kmax = n - 1

    def chunk(rows: slice) -> np.ndarray:
        d = pairs.delta(rows)
        g = pairs.grid_sq(rows)
        m = d.shape[0]
        own = np.arange(rows.start, rows.stop)
        # HD rank: 1 + number of other items strictly closer
        order = np.argsort(d, axis=1, kind="stable")
        d_sorted = np.take_along_axis(d, order, axis=1)
        hd_rank = np.empty_like(order)
        np.put_along_axis(hd_rank, order, np.maximum(_first_positions(d_sorted), 1), axis=1)
        # ring geometry: cells strictly closer (excluding self) and ring size
        gorder = np.argsort(g, axis=1, kind="stable")
        g_sorted = np.take_along_axis(g, gorder, axis=1)
        first = _first_positions(g_sorted)
        last = _last_positions(g_sorted)
        before = np.empty_like(gorder)
        size = np.empty_like(gorder)
        np.put_along_axis(before, gorder, first - 1, axis=1)
        np.put_along_axis(size, gorder, last - first + 1, axis=1)

        keep = np.ones((m, n), dtype=bool)
        keep[np.arange(m), own] = False
        r = hd_rank[keep]
        a = before[keep]
        s = size[keep].astype(np.float64)

        lo = np.maximum(r, a + 1)
        hi = a + size[keep] - 1
        ramp = lo <= hi
        const_start = np.maximum(r, a + size[keep])
        nb = kmax + 2
        slope = np.bincount(lo[ramp], weights=1.0 / s[ramp], minlength=nb)[:nb]
        slope -= np.bincount(hi[ramp] + 1, weights=1.0 / s[ramp], minlength=nb)[:nb]
        icpt = np.bincount(lo[ramp], weights=-a[ramp] / s[ramp], minlength=nb)[:nb]
        icpt -= np.bincount(hi[ramp] + 1, weights=-a[ramp] / s[ramp], minlength=nb)[:nb]
        icpt += np.bincount(const_start, minlength=nb)[:nb]
        return np.stack([slope, icpt])

    acc = pairs.reduce(chunk)
    ks = np.arange(1, kmax + 1)
    slope = np.cumsum(acc[0])[1 : kmax + 1]
    icpt = np.cumsum(acc[1])[1 : kmax + 1]
    overlap = slope * ks + icpt
    return overlap / (n * ks)


def npq(
    arr: Arrangement,
    ds: Dataset,
    spec: GridSpec | None = None,
    p: float = 2.0,
    wrap: str = CLAMP,
    cfg: DistanceConfig | None = None,
) -> float:
    """Neighborhood preservation quality: 0 for random, 1 for perfect."""
    p = _check_p(p)
    if ds.n < 2:
        return 1.0
    curve = np_k_curve(arr, ds, wrap=wrap, cfg=cfg)
    k_all = curve.size
    baseline = np.arange(1, k_all + 1) / k_all
    gain = np.maximum(curve - baseline, 0.0)
    ideal = 1.0 - baseline
    denom = p_norm(ideal, p)
    if denom == 0:
        return 1.0
    return p_norm(gain, p) / denom


# ------------------------------------------------------------------ distances


@dataclass
class DistanceCurves:
    """Average neighbor distances per neighborhood size and the global mean."""

    hd: np.ndarray
    grid: np.ndarray
    mean: float

    def gains(self) -> tuple[np.ndarray, np.ndarray]:
        ideal = (self.mean - self.hd) / self.mean
        actual = np.maximum((self.mean - self.grid) / self.mean, 0.0)
        return ideal, actual


def distance_curves(
    arr: Arrangement,
    ds: Dataset,
    tie_mode: str = TIE_SORTED,
    wrap: str = CLAMP,
    cfg: DistanceConfig | None = None,
) -> DistanceCurves:
    if tie_mode not in (TIE_SORTED, TIE_MEAN):
        raise InvalidInputError(f"tie_mode must be 'sorted' or 'mean', got {tie_mode!r}")
    pairs = _pairs(arr, ds, wrap, cfg)
    n = pairs.n
    kmax = n - 1

    def chunk(rows: slice) -> np.ndarray:
        d = pairs.delta(rows)
        g = pairs.grid_sq(rows)
        m = d.shape[0]
        hd_sorted = np.sort(d, axis=1)[:, 1:]
        if tie_mode == TIE_SORTED:
            order = np.lexsort((d, g), axis=1)
            ordered = np.take_along_axis(d, order, axis=1)[:, 1:]
        else:
            order = np.argsort(g, axis=1, kind="stable")
            g_sorted = np.take_along_axis(g, order, axis=1)[:, 1:]
            vals = np.take_along_axis(d, order, axis=1)[:, 1:]
            starts = np.ones(g_sorted.shape, dtype=bool)
            starts[:, 1:] = g_sorted[:, 1:] != g_sorted[:, :-1]
            gid = np.cumsum(starts, axis=1) - 1 + (np.arange(m) * kmax)[:, None]
            flat = gid.ravel()
            sums = np.bincount(flat, weights=vals.ravel())
            counts = np.bincount(flat)
            ordered = (sums[flat] / counts[flat]).reshape(m, kmax)
        out = np.empty((3, kmax))
        out[0] = np.cumsum(hd_sorted, axis=1).sum(axis=0)
        out[1] = np.cumsum(ordered, axis=1).sum(axis=0)
        out[2] = 0.0
        out[2, 0] = d.sum()
        return out

    acc = pairs.reduce(chunk)
    ks = np.arange(1, kmax + 1)
    # mean over distinct pairs: the expected neighbor distance of a random layout
    mean = acc[2, 0] / (n * (n - 1))
    return DistanceCurves(acc[0] / (ks * n), acc[1] / (ks * n), float(mean))


def dpq(
    arr: Arrangement,
    ds: Dataset,
    spec: GridSpec | None = None,
    p: float = 16.0,
    tie_mode: str = TIE_SORTED,
    wrap: str = CLAMP,
    cfg: DistanceConfig | None = None,
) -> float:
    """Distance preservation quality, 0 for random and 1 for perfect layouts.

    ``tie_mode="sorted"`` orders ring members by HD distance (the optimistic
    estimate); ``"mean"`` replaces them by their ring mean (pessimistic).
    """
    p = _check_p(p)
    if ds.n < 2:
        return 1.0
    curves = distance_curves(arr, ds, tie_mode, wrap, cfg)
    if curves.mean == 0:
        return 1.0
    ideal, actual = curves.gains()
    denom = p_norm(ideal, p)
    if denom == 0:
        return 1.0
    return min(p_norm(actual, p) / denom, 1.0)


# ------------------------------------------------------------- global metrics


def _full_pairs(arr: Arrangement, ds: Dataset, wrap: str, cfg: DistanceConfig | None) -> tuple[np.ndarray, np.ndarray]:
    pairs = _pairs(arr, ds, wrap, cfg)
    everything = slice(0, pairs.n)
    return pairs.delta(everything), np.sqrt(pairs.grid_sq(everything).astype(np.float64))


def _weighted_median(values: np.ndarray, weights: np.ndarray) -> float:
    order = np.argsort(values, kind="stable")
    v = values[order]
    cw = np.cumsum(weights[order])
    half = 0.5 * cw[-1]
    return float(v[np.searchsorted(cw, half, side="left")])


def _golden_min(f: Callable[[float], float], lo: float, hi: float, rtol: float = 1e-12) -> float:
    phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - phi * (b - a)
    d = a + phi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > rtol * max(abs(b), 1e-300):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def optimal_scale(delta: np.ndarray, lam: np.ndarray, p: float) -> float:
    """Scale ``c`` minimizing ``sum |c * delta - lam| ** p``."""
    if not np.any(delta > 0):
        return 0.0
    if p == 2:
        return float(np.sum(delta * lam) / np.sum(delta * delta))
    pos = delta > 0
    ratios = lam[pos] / delta[pos]
    if p == 1:
        return _weighted_median(ratios, delta[pos])
    hi = float(ratios.max())
    if hi == 0:
        return 0.0
    return _golden_min(lambda c: float(np.sum(np.abs(c * delta - lam) ** p)), 0.0, hi)


def energy(
    arr: Arrangement,
    ds: Dataset,
    spec: GridSpec | None = None,
    p: float = 1.0,
    wrap: str = CLAMP,
    cfg: DistanceConfig | None = None,
) -> float:
    """Normalized energy ``E'_p = 1 - E_p``; 1 when grid distances scale HD distances exactly."""
    p = _check_p(p)
    if np.isinf(p):
        raise InvalidInputError("energy needs a finite p")
    delta, lam = _full_pairs(arr, ds, wrap, cfg)
    denom = float(np.sum(lam**p))
    if denom == 0:
        raise UndefinedMetricError("energy is undefined when all grid distances are zero")
    c = optimal_scale(delta.ravel(), lam.ravel(), p)
    e = (float(np.sum(np.abs(c * delta - lam) ** p)) / denom) ** (1.0 / p)
    return 1.0 - e


def cross_correlation(
    arr: Arrangement,
    ds: Dataset,
    spec: GridSpec | None = None,
    wrap: str = CLAMP,
    cfg: DistanceConfig | None = None,
) -> float:
    """Pearson correlation between all N^2 grid and HD distance pairs."""
    if ds.n < 2:
        raise UndefinedMetricError("cross-correlation needs at least two items")
    delta, lam = _full_pairs(arr, ds, wrap, cfg)
    dl = lam - lam.mean()
    dd = delta - delta.mean()
    sl = np.sqrt(np.mean(dl * dl))
    sd = np.sqrt(np.mean(dd * dd))
    if sl == 0 or sd == 0:
        raise UndefinedMetricError("cross-correlation is undefined for constant distances")
    return float(np.mean(dl * dd) / (sl * sd))


def arrangement_map(
    arr: Arrangement,
    ds: Dataset,
    spec: GridSpec | None = None,
    wrap: str = CLAMP,
) -> float:
    """Mean average precision of same-label retrieval by grid proximity.

    Each query ranks the other cells by grid distance; the AP is averaged
    exactly over all orders of cells tied at equal distance. Queries whose
    label occurs nowhere else have no defined AP and are skipped.
    """
    if ds.labels is None:
        raise InvalidInputError("arrangement mAP needs class labels")
    n = ds.n
    _, codes = np.unique(np.array([str(lbl) for lbl in ds.labels]), return_inverse=True)
    cells = np.asarray(arr.cells)
    aps = []
    for q in range(n):
        g = _grid_sq_rows(cells, slice(q, q + 1), arr.width, arr.height, wrap)[0]
        rel = codes == codes[q]
        others = np.arange(n) != q
        g, rel = g[others], rel[others]
        m_q = int(rel.sum())
        if m_q == 0:
            continue
        order = np.argsort(g, kind="stable")
        g, rel = g[order], rel[order]
        starts = np.flatnonzero(np.r_[True, g[1:] != g[:-1]])
        sizes = np.diff(np.r_[starts, g.size])
        rel_in = np.add.reduceat(rel.astype(np.int64), starts)
        rel_before = np.r_[0, np.cumsum(rel_in)[:-1]]
        total = 0.0
        for a, s, t, rb in zip(starts, sizes, rel_in, rel_before):
            if t == 0:
                continue
            u = np.arange(1, s + 1, dtype=np.float64)
            extra = (u - 1) * (t - 1) / (s - 1) if s > 1 else np.zeros(1)
            total += t * float(np.mean((rb + 1 + extra) / (a + u)))
        aps.append(total / m_q)
    if not aps:
        raise UndefinedMetricError("no query has another item of the same class")
    return float(np.mean(aps))


# --------------------------------------------------------------------- report

_TOKEN = re.compile(r"^(dpq|npq|e)(\d+(?:\.\d+)?|inf)(-?)$")


@dataclass
class QualityReport:
    values: dict[str, float | list[float]] = field(default_factory=dict)
    parameters: dict[str, object] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"metrics": self.values, "parameters": self.parameters}


def parse_metric_tokens(tokens: str | Iterable[str]) -> list[str]:
    if isinstance(tokens, str):
        tokens = [t for t in tokens.split(",")]
    out = []
    for tok in tokens:
        tok = tok.strip().lower()
        if not tok:
            continue
        m = _TOKEN.match(tok)
        if tok in ("cc", "map", "npk"):
            out.append(tok)
        elif m and (m.group(3) == "" or m.group(1) == "dpq"):
            out.append(tok)
        else:
            raise InvalidInputError(f"unknown metric token {tok!r}")
    return out


def evaluate(
    arr: Arrangement,
    ds: Dataset,
    tokens: str | Iterable[str] = "dpq16",
    wrap: str = CLAMP,
    cfg: DistanceConfig | None = None,
) -> QualityReport:
    """Compute the metrics named by ``tokens`` (``dpq16``, ``dpq16-``, ``npq2``, ``e1``, ``cc``, ``map``, ``npk``)."""
    report = QualityReport(parameters={"wrap": wrap, "hd_metric": (cfg or DistanceConfig()).hd_metric})
    for tok in parse_metric_tokens(tokens):
        if tok == "cc":
            report.values[tok] = cross_correlation(arr, ds, wrap=wrap, cfg=cfg)
        elif tok == "map":
            report.values[tok] = arrangement_map(arr, ds, wrap=wrap)
        elif tok == "npk":
            report.values[tok] = np_k_curve(arr, ds, wrap=wrap, cfg=cfg).tolist()
        else:
            m = _TOKEN.match(tok)
            kind, p, minus = m.group(1), float(m.group(2)), m.group(3)
            if kind == "dpq":
                mode = TIE_MEAN if minus else TIE_SORTED
                report.values[tok] = dpq(arr, ds, p=p, tie_mode=mode, wrap=wrap, cfg=cfg)
            elif kind == "npq":
                report.values[tok] = npq(arr, ds, p=p, wrap=wrap, cfg=cfg)
            else:
                report.values[tok] = energy(arr, ds, p=p, wrap=wrap, cfg=cfg)
    return report
