"""The compiled kernels and the numpy fallback must agree."""

from __future__ import annotations

import numpy as np
import pytest

from gridsort import _backend, _fallback
from gridsort.bench import random_colors
from gridsort.core import TORUS, GridSpec
from gridsort.sorters import FlasParams, SomParams, flas_sort, som_sort

kernels = pytest.importorskip("gridsort._kernels")


def test_selected_backend_is_named():
    assert _backend.NAME in ("cython", "python")
    assert _backend.get("python") is _fallback
    with pytest.raises(ValueError):
        _backend.get("fortran")


def test_splitmix_reference_values():
    # first outputs for state 0, from the published splitmix64 reference
    state, a = _fallback.splitmix_next(0)
    _, b = _fallback.splitmix_next(state)
    assert (a, b) == (0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4)


@pytest.mark.parametrize("n", [2, 5, 9, 16, 40])
def test_small_lap_identical_including_ties(n):
    rng = np.random.default_rng(n)
    for _ in range(50):
        c = rng.integers(0, 3, (n, n)).astype(float)
        assert kernels.lapjv(c).tolist() == _fallback.lapjv(c).tolist()


def test_large_lap_same_cost():
    c = np.random.default_rng(0).random((120, 120))
    a, b = kernels.lapjv(c), _fallback.lapjv(c)
    assert c[np.arange(120), a].sum() == pytest.approx(c[np.arange(120), b].sum(), rel=1e-13)


@pytest.mark.parametrize("torus", [False, True])
def test_flas_pass_identical(torus):
    rng = np.random.default_rng(1)
    w, h = 11, 7
    x = rng.random((w * h, 3))
    m = rng.random((w * h, 3))
    swap = np.ones(w * h, np.uint8)
    swap[[0, 5, 30]] = 0
    cells = np.flatnonzero(swap).astype(np.int64)
    g1 = rng.permutation(w * h).astype(np.int64)
    g2 = g1.copy()
    for half in (1, 3, 6):
        s1 = kernels.flas_pass(x, m, g1, swap, cells, w, h, torus, 9, half, 20, 99)
        s2 = _fallback.flas_pass(x, m, g2, swap, cells, w, h, torus, 9, half, 20, 99)
        assert s1 == s2
        assert g1.tolist() == g2.tolist()


@pytest.mark.parametrize("wrap", ["clamp", TORUS])
def test_full_flas_sort_identical(wrap):
    ds = random_colors(256, seed=3)
    spec = GridSpec(16, 16, wrap=wrap)
    a = flas_sort(ds, spec, FlasParams(seed=5), backend="cython")
    b = flas_sort(ds, spec, FlasParams(seed=5), backend="python")
    assert a == b


def test_som_identical():
    ds = random_colors(100, seed=4)
    spec = GridSpec(10, 10)
    for filtered in (False, True):
        p = SomParams(seed=2, epochs=8, filtered=filtered)
        assert som_sort(ds, spec, p, backend="cython") == som_sort(ds, spec, p, backend="python")
