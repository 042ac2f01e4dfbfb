from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridsort.core import CLAMP, TORUS, GridSpec, InvalidInputError
from gridsort.filtering import FilterSpec, MapState, box_filter, fill_inactive, nearest_active, weighted_box_filter
from oracles import naive_box_filter


def test_impulse_response_is_a_block_of_ninths():
    m = np.zeros((9, 9))
    m[4, 4] = 1.0
    out = box_filter(MapState(m), FilterSpec.isotropic(1)).vectors[:, :, 0]
    expected = np.zeros((9, 9))
    expected[3:6, 3:6] = 1 / 9
    assert np.allclose(out, expected, atol=1e-15)


def test_radius_zero_is_identity():
    m = np.random.default_rng(0).random((5, 7, 3))
    assert np.array_equal(box_filter(MapState(m), FilterSpec.isotropic(0)).vectors, m)


def test_constant_map_is_fixed():
    m = np.full((6, 8, 2), 0.3)
    for border in (CLAMP, TORUS):
        out = box_filter(MapState(m), FilterSpec(2, 3, border)).vectors
        assert np.allclose(out, 0.3, atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(
    st.integers(1, 12), st.integers(1, 12), st.integers(0, 5), st.integers(0, 5),
    st.sampled_from([CLAMP, TORUS]), st.integers(0, 2**32 - 1),
)
def test_matches_naive_convolution(h, w, rx, ry, border, seed):
    if border == TORUS and (rx >= w or ry >= h):
        return
    m = np.random.default_rng(seed).random((h, w, 2))
    got = box_filter(MapState(m), FilterSpec(rx, ry, border)).vectors
    want = np.array(naive_box_filter(m.tolist(), rx, ry, border == TORUS))
    assert np.max(np.abs(got - want)) <= 1e-12


def test_torus_16x16_radius_3():
    m = np.random.default_rng(7).random((16, 16, 3))
    got = box_filter(MapState(m), FilterSpec.isotropic(3, TORUS)).vectors
    want = np.array(naive_box_filter(m.tolist(), 3, 3, True))
    assert np.max(np.abs(got - want)) <= 1e-12


def test_torus_radius_must_fit():
    with pytest.raises(InvalidInputError):
        box_filter(MapState(np.zeros((4, 4))), FilterSpec.isotropic(4, TORUS))


def test_invalid_filter_spec():
    with pytest.raises(InvalidInputError):
        FilterSpec(-1, 0)
    with pytest.raises(InvalidInputError):
        FilterSpec(1, 1, "mirror")


def test_weighted_filter_with_unit_weights_equals_plain():
    m = np.random.default_rng(1).random((6, 6, 3))
    plain = box_filter(MapState(m), FilterSpec.isotropic(2)).vectors
    weighted = weighted_box_filter(MapState(m, np.ones((6, 6))), FilterSpec.isotropic(2)).vectors
    assert np.allclose(plain, weighted, atol=1e-14)


def test_weighted_filter_against_direct_sum():
    rng = np.random.default_rng(2)
    m, w = rng.random((5, 6, 2)), rng.random((5, 6)) + 0.1
    got = weighted_box_filter(MapState(m, w), FilterSpec(1, 2)).vectors
    for r in range(5):
        for c in range(6):
            rs, cs = slice(max(r - 2, 0), r + 3), slice(max(c - 1, 0), c + 2)
            ww = w[rs, cs]
            want = (m[rs, cs] * ww[:, :, None]).sum((0, 1)) / ww.sum()
            assert np.allclose(got[r, c], want, atol=1e-13)


def test_zero_weight_window_raises():
    w = np.zeros((3, 3))
    with pytest.raises(InvalidInputError):
        weighted_box_filter(MapState(np.zeros((3, 3)), w), FilterSpec.isotropic(1))


def test_fill_inactive_copies_nearest_active():
    mask = np.array([[1, 0, 0], [0, 0, 0], [0, 0, 1]], bool)
    spec = GridSpec(3, 3, mask=mask)
    m = np.zeros((3, 3, 1))
    m[0, 0], m[2, 2] = 1.0, 2.0
    out = fill_inactive(MapState(m), spec).vectors[:, :, 0]
    # the center is equidistant; ties go to the first active cell in row-major order
    assert out.tolist() == [[1, 1, 1], [1, 1, 2], [1, 2, 2]]
    assert nearest_active(spec)[0] == 0


def test_fill_inactive_torus_uses_wrapped_distance():
    mask = np.zeros((1, 6), bool)
    mask[0, 0] = mask[0, 3] = True
    spec = GridSpec(6, 1, mask=mask, wrap=TORUS)
    assert nearest_active(spec).tolist() == [0, 0, 3, 3, 3, 0]


@pytest.mark.slow
def test_filter_cost_does_not_grow_with_radius():
    import time

    m = np.random.default_rng(0).random((512, 512, 3))

    def best(r):
        times = []
        for _ in range(5):
            t0 = time.perf_counter()
            box_filter(MapState(m), FilterSpec.isotropic(r))
            times.append(time.perf_counter() - t0)
        return min(times)

    assert best(5) <= 2.0 * best(1)
