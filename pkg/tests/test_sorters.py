from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridsort.bench import random_colors
from gridsort.core import TORUS, Dataset, GridSpec, InvalidInputError, validate
from gridsort.metrics import dpq
from gridsort.sorters import (
    FlasParams,
    LasParams,
    SomParams,
    SsmParams,
    _ssm_levels,
    filter_spec_for,
    flas_sort,
    las_sort,
    preset_params,
    radius_schedule,
    random_sort,
    run_algorithm,
    som_sort,
    ssm_sort,
)

ALGOS = ["las", "flas", "ssm", "som", "som-filtered", "random"]


@pytest.fixture(scope="module")
def colors():
    return random_colors(256, seed=42), GridSpec(16, 16)


@pytest.mark.parametrize("algo", ALGOS)
def test_every_algorithm_returns_a_valid_deterministic_layout(algo, colors):
    ds, spec = colors
    a = run_algorithm(algo, ds, spec, seed=5)
    b = run_algorithm(algo, ds, spec, seed=5)
    c = run_algorithm(algo, ds, spec, seed=6)
    assert validate(a, spec, ds).ok
    assert a == b
    assert a != c


@pytest.mark.parametrize("algo", ["las", "flas", "ssm", "som", "som-filtered"])
def test_sorting_beats_random(algo, colors):
    ds, spec = colors
    sorted_q = dpq(run_algorithm(algo, ds, spec, seed=1), ds)
    random_q = dpq(random_sort(ds, spec, seed=1), ds)
    assert sorted_q > 0.85 > random_q


def test_n_mismatch_is_reported():
    with pytest.raises(InvalidInputError, match="N mismatch"):
        las_sort(random_colors(10), GridSpec(4, 4))


def test_radius_schedule():
    radii = list(radius_schedule(32, 32, 0.35, 0.93))
    assert radii[0] == math.floor(32 * 0.35)
    assert all(r >= 1 for r in radii)
    assert radii == sorted(radii, reverse=True)
    assert len(list(radius_schedule(32, 32, 0.35, 0.6))) < len(radii)
    assert list(radius_schedule(3, 3, 0.25, 0.9)) == []


@settings(max_examples=50)
@given(st.integers(1, 80), st.integers(1, 80), st.floats(0.05, 0.5), st.floats(0.1, 0.99))
def test_radius_schedule_terminates_and_decays(w, h, f0, fr):
    radii = list(radius_schedule(w, h, f0, fr))
    assert all(a >= b for a, b in zip(radii, radii[1:]))
    assert all(1 <= r <= max(w, h) for r in radii)


def test_anisotropic_filter_spec():
    spec = GridSpec(20, 20)
    fs = filter_spec_for(2, spec, aniso_ratio=3)
    assert (fs.radius_x, fs.radius_y) == (6, 2)
    assert filter_spec_for(0, spec, 3).radius_x == 0
    torus = filter_spec_for(9, GridSpec(8, 12, wrap=TORUS), 2)
    assert (torus.radius_x, torus.radius_y) == (3, 5)


def test_param_validation():
    with pytest.raises(InvalidInputError):
        LasParams(radius_factor=0.7)
    with pytest.raises(InvalidInputError):
        LasParams(radius_decay=1.0)
    with pytest.raises(InvalidInputError):
        FlasParams(n_candidates=1)
    with pytest.raises(InvalidInputError):
        SsmParams(iterations=0)
    with pytest.raises(InvalidInputError):
        SomParams(learning_rate=1.5)


def test_presets():
    assert preset_params("las", "fast").radius_decay < preset_params("las", "quality").radius_decay
    assert preset_params("flas", "quality", n_candidates=16).n_candidates == 16
    assert preset_params("som-filtered").filtered
    with pytest.raises(InvalidInputError):
        preset_params("tsne")
    with pytest.raises(InvalidInputError):
        preset_params("las", "best")


def test_on_step_sees_every_radius(colors):
    ds, spec = colors
    seen = []
    las_sort(ds, spec, LasParams(radius_decay=0.6), on_step=lambda step, r, grid: seen.append(r))
    assert seen == list(radius_schedule(16, 16, 0.35, 0.6)) + [0]
    seen.clear()
    flas_sort(ds, spec, FlasParams(radius_decay=0.6, final_pass=False), on_step=lambda s, r, g: seen.append(r))
    assert seen == list(radius_schedule(16, 16, 0.5, 0.6))


def test_pins_and_masks_are_respected():
    mask = np.ones((10, 10), bool)
    mask[:3, :3] = False
    pins = {(9, 0): 5, (4, 4): 17}
    spec = GridSpec(10, 10, mask=mask, pins=pins)
    ds = random_colors(spec.n_active, seed=3)
    for sorter in (las_sort, flas_sort):
        arr = sorter(ds, spec)
        assert validate(arr, spec, ds).ok
        assert arr.index_of((9, 0)) == 5 and arr.index_of((4, 4)) == 17


def test_torus_sorting():
    spec = GridSpec(12, 12, wrap=TORUS)
    ds = random_colors(144, seed=2)
    for algo in ("las", "flas", "som"):
        arr = run_algorithm(algo, ds, spec, seed=0)
        assert validate(arr, spec, ds).ok
        assert dpq(arr, ds, wrap=TORUS) > 0.8


def test_ssm_and_som_limits():
    ds = random_colors(16)
    with pytest.raises(InvalidInputError):
        ssm_sort(ds, GridSpec(4, 4, pins={(0, 0): 1}))
    with pytest.raises(InvalidInputError):
        ssm_sort(ds, GridSpec(4, 4, wrap=TORUS))
    with pytest.raises(InvalidInputError):
        som_sort(random_colors(15), GridSpec(4, 4, mask=np.arange(16).reshape(4, 4) != 0))


def test_ssm_levels_halve_down_to_one():
    assert _ssm_levels(32, 32) == [8, 4, 2, 1]
    assert _ssm_levels(10, 3) == [3, 2, 1]
    assert _ssm_levels(2, 2) == [1]


@pytest.mark.parametrize("w,h", [(7, 5), (9, 9), (3, 11)])
def test_ssm_handles_ragged_blocks(w, h):
    ds = random_colors(w * h, seed=w)
    spec = GridSpec(w, h)
    assert validate(ssm_sort(ds, spec), spec, ds).ok


def test_las_on_a_line_recovers_the_order():
    spec = GridSpec(12, 1)
    ds = Dataset(np.arange(12, dtype=float)[:, None])
    arr = las_sort(ds, spec, LasParams(radius_factor=0.5, radius_decay=0.9, seed=4))
    cols = arr.cells[:, 0]
    assert (np.diff(cols) == 1).all() or (np.diff(cols) == -1).all()


def test_anisotropic_sort_prefers_horizontal_similarity():
    ds = random_colors(256, seed=8)
    spec = GridSpec(16, 16)
    h_minus_v = []
    for seed in range(4):
        grid = las_sort(ds, spec, LasParams(aniso_ratio=3, seed=seed)).index_grid()
        x = ds.vectors[grid]
        horiz = np.linalg.norm(x[:, 1:] - x[:, :-1], axis=-1).mean()
        vert = np.linalg.norm(x[1:] - x[:-1], axis=-1).mean()
        h_minus_v.append(horiz - vert)
    assert np.mean(h_minus_v) < 0
