from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridsort.core import TORUS, Arrangement, Dataset, GridSpec, InvalidInputError, make_rng, random_arrangement
from gridsort.metrics import (
    TIE_MEAN,
    UndefinedMetricError,
    arrangement_map,
    cross_correlation,
    dpq,
    energy,
    evaluate,
    np_k_curve,
    npq,
    optimal_scale,
    p_norm,
    parse_metric_tokens,
)
import oracles


def perfect(w: int, h: int):
    spec = GridSpec(w, h)
    arr = Arrangement.identity(spec)
    return arr, Dataset(arr.cells.astype(float))


def random_instance(seed: int, max_side: int = 4, ties: bool = False):
    rng = np.random.default_rng(seed)
    w, h = int(rng.integers(2, max_side + 1)), int(rng.integers(2, max_side + 1))
    x = rng.random((w * h, int(rng.integers(1, 5))))
    if ties:
        x = np.round(x * 2) / 2
    labels = [int(v) for v in rng.integers(0, 3, w * h)]
    spec = GridSpec(w, h)
    return random_arrangement(spec, rng), Dataset(x, labels=labels)


def transformed(arr: Arrangement, k: int) -> Arrangement:
    """One of the 8 square-grid isometries (needs a square grid)."""
    n = arr.width - 1
    c, r = arr.cells[:, 0], arr.cells[:, 1]
    for _ in range(k % 4):
        c, r = n - r, c
    if k >= 4:
        c = n - c
    return Arrangement(arr.width, arr.height, np.stack([c, r], axis=1))


# ----------------------------------------------------------------- perfect


@pytest.mark.parametrize("w,h", [(3, 3), (4, 6), (8, 8)])
def test_perfect_embedding_scores_one(w, h):
    arr, ds = perfect(w, h)
    assert np.allclose(np_k_curve(arr, ds), 1.0, atol=1e-12)
    for p in (1, 2, 16, np.inf):
        assert npq(arr, ds, p=p) == pytest.approx(1.0, abs=1e-12)
        assert dpq(arr, ds, p=p) == pytest.approx(1.0, abs=1e-12)
        assert dpq(arr, ds, p=p, tie_mode=TIE_MEAN) == pytest.approx(1.0, abs=1e-12)
    assert energy(arr, ds, p=2) == pytest.approx(1.0, abs=1e-12)
    assert cross_correlation(arr, ds) == pytest.approx(1.0, abs=1e-12)


def test_identical_vectors_are_perfect_for_dpq():
    spec = GridSpec(3, 3)
    ds = Dataset(np.ones((9, 2)))
    assert dpq(random_arrangement(spec, make_rng(0)), ds) == 1.0


def test_single_item_conventions():
    arr, ds = Arrangement(1, 1, [[0, 0]]), Dataset([[1.0, 2.0]])
    assert npq(arr, ds) == 1.0 and dpq(arr, ds) == 1.0
    with pytest.raises(UndefinedMetricError):
        cross_correlation(arr, ds)


# ----------------------------------------------------------------- oracles


@pytest.mark.parametrize("seed", range(12))
def test_metrics_match_loop_oracles(seed):
    arr, ds = random_instance(seed, ties=seed % 3 == 0)
    wrap = TORUS if seed % 4 == 1 else "clamp"
    v, c, w, h = ds.vectors.tolist(), arr.cells.tolist(), arr.width, arr.height
    tor = wrap == TORUS
    assert np.allclose(np_k_curve(arr, ds, wrap=wrap), oracles.naive_np_k(v, c, w, h, tor), atol=1e-10, rtol=0)
    assert npq(arr, ds, p=2, wrap=wrap) == pytest.approx(oracles.naive_npq(v, c, w, h, 2, tor), abs=1e-10)
    for mode in ("sorted", "mean"):
        for p in (2, 16):
            got = dpq(arr, ds, p=p, tie_mode=mode, wrap=wrap)
            assert got == pytest.approx(oracles.naive_dpq(v, c, w, h, p, mode, tor), abs=1e-10)
    for p in (1, 2, 3):
        assert energy(arr, ds, p=p, wrap=wrap) == pytest.approx(oracles.naive_energy(v, c, w, h, p, tor), abs=1e-10)
    assert cross_correlation(arr, ds, wrap=wrap) == pytest.approx(oracles.naive_cc(v, c, w, h, tor), abs=1e-10)
    assert arrangement_map(arr, ds, wrap=wrap) == pytest.approx(oracles.naive_map(ds.labels, c, w, h, tor), abs=1e-10)


def test_np_k_hand_computed_2x2():
    # items 0..3 at (0,0), (1,0), (0,1), (1,1) with 1D values 0, 1, 10, 11
    arr = Arrangement(2, 2, [[0, 0], [1, 0], [0, 1], [1, 1]])
    ds = Dataset([[0.0], [1.0], [10.0], [11.0]])
    # k=1: every item's nearest neighbor sits in a two-cell ring -> 1/2
    # k=2: items 0 and 3 see their whole ring, items 1 and 2 half of it
    assert np_k_curve(arr, ds).tolist() == pytest.approx([0.5, 0.75, 1.0])


def test_map_hand_computed_3x3():
    # center is class B, everything else class A; the B query has no match and is skipped
    labels = ["A"] * 9
    labels[4] = "B"
    arr = Arrangement.identity(GridSpec(3, 3))
    ds = Dataset(np.zeros((9, 1)), labels=labels)
    tail = 3 / 4 + 4 / 5 + 5 / 6 + 6 / 7 + 7 / 8
    ap_corner = (1 + 1 + tail) / 7
    # an edge cell's first ring holds two A cells and the B center in unknown order
    ring = (2 + (1 + 2 / 3) + (1 / 2 + 2 / 3)) / 3
    ap_edge = (ring + tail) / 7
    assert arrangement_map(arr, ds) == pytest.approx((ap_corner + ap_edge) / 2, abs=1e-12)


def test_map_single_class_is_one_and_needs_labels():
    arr, ds = perfect(4, 4)
    assert arrangement_map(arr, Dataset(ds.vectors, labels=["x"] * 16)) == 1.0
    with pytest.raises(InvalidInputError):
        arrangement_map(arr, ds)


def test_map_equal_for_same_rank_structure():
    # stripes vs rotated stripes: different pictures, identical same-class rankings
    spec = GridSpec(4, 4)
    arr = Arrangement.identity(spec)
    stripes = ["A" if c % 2 == 0 else "B" for c, r in arr.cells]
    rows = ["A" if r % 2 == 0 else "B" for c, r in arr.cells]
    m1 = arrangement_map(arr, Dataset(np.zeros((16, 1)), labels=stripes))
    m2 = arrangement_map(arr, Dataset(np.zeros((16, 1)), labels=rows))
    assert m1 == pytest.approx(m2, abs=1e-12)


# -------------------------------------------------------------- properties


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_sorted_ties_never_score_below_mean_ties(seed):
    arr, ds = random_instance(seed, max_side=5, ties=seed % 2 == 0)
    for p in (1, 2, 16):
        assert dpq(arr, ds, p=p) >= dpq(arr, ds, p=p, tie_mode=TIE_MEAN) - 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_ranges(seed):
    arr, ds = random_instance(seed, max_side=5)
    assert 0 <= npq(arr, ds) <= 1
    assert 0 <= dpq(arr, ds) <= 1
    assert energy(arr, ds, p=1) <= 1
    assert -1 <= cross_correlation(arr, ds) <= 1
    curve = np_k_curve(arr, ds)
    assert ((curve >= -1e-12) & (curve <= 1 + 1e-12)).all()


@pytest.mark.parametrize("seed", range(6))
def test_isometry_invariance(seed):
    rng = np.random.default_rng(seed)
    side = int(rng.integers(3, 6))
    spec = GridSpec(side, side)
    arr = random_arrangement(spec, rng)
    ds = Dataset(rng.random((side * side, 3)))
    base = (npq(arr, ds, p=2), dpq(arr, ds, p=16), dpq(arr, ds, p=16, tie_mode=TIE_MEAN))
    for k in range(1, 8):
        t = transformed(arr, k)
        got = (npq(t, ds, p=2), dpq(t, ds, p=16), dpq(t, ds, p=16, tie_mode=TIE_MEAN))
        assert np.allclose(got, base, atol=1e-10, rtol=0)


def test_relabeling_items_changes_nothing():
    arr, ds = random_instance(3, max_side=5)
    perm = np.random.default_rng(9).permutation(ds.n)
    ds2 = Dataset(ds.vectors[perm], labels=[ds.labels[i] for i in perm])
    arr2 = Arrangement(arr.width, arr.height, arr.cells[perm])
    for fn in (npq, dpq, energy, cross_correlation, arrangement_map):
        assert fn(arr2, ds2) == pytest.approx(fn(arr, ds), abs=1e-12)


def test_torus_scores_are_invariant_to_cyclic_shifts():
    rng = np.random.default_rng(4)
    spec = GridSpec(6, 5, wrap=TORUS)
    arr = random_arrangement(spec, rng)
    ds = Dataset(rng.random((30, 3)))
    base = dpq(arr, ds, wrap=TORUS), npq(arr, ds, wrap=TORUS)
    shifted = Arrangement(6, 5, (arr.cells + [2, 3]) % [6, 5])
    assert dpq(shifted, ds, wrap=TORUS) == pytest.approx(base[0], abs=1e-10)
    assert npq(shifted, ds, wrap=TORUS) == pytest.approx(base[1], abs=1e-10)


def test_random_np_k_approaches_k_over_big_k():
    rng = np.random.default_rng(0)
    spec = GridSpec(5, 5)
    ds = Dataset(rng.random((25, 3)))
    curves = [np_k_curve(random_arrangement(spec, rng), ds) for _ in range(300)]
    mean = np.mean(curves, axis=0)
    assert np.max(np.abs(mean - np.arange(1, 25) / 24)) < 0.03


def test_quality_drops_as_noise_grows():
    # four color quadrants on 16x16, progressively scrambled by random swaps
    rng = np.random.default_rng(1)
    colors = np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 0]], float)
    spec = GridSpec(16, 16)
    cells = spec.active_cells()
    quad = (cells[:, 0] // 8) + 2 * (cells[:, 1] // 8)
    x = colors[quad] + rng.normal(0, 0.05, (256, 3))
    ds = Dataset(x)
    scores = []
    for swaps in (0, 20, 60, 200):
        c = cells.copy()
        for _ in range(swaps):
            i, j = rng.integers(0, 256, 2)
            c[[i, j]] = c[[j, i]]
        arr = Arrangement(16, 16, c)
        scores.append((npq(arr, ds, p=2), dpq(arr, ds, p=2)))
    for a, b in zip(scores, scores[1:]):
        assert a[0] > b[0] and a[1] > b[1]


# ------------------------------------------------------------ energy and cc


def test_energy_proportional_1d_is_perfect():
    arr = Arrangement(5, 1, [[i, 0] for i in range(5)])
    ds = Dataset([[2.5 * i] for i in range(5)])
    for p in (1, 2, 3):
        assert energy(arr, ds, p=p) == pytest.approx(1.0, abs=1e-9)


def test_optimal_scale_against_a_scan():
    rng = np.random.default_rng(2)
    delta, lam = rng.random(16), rng.random(16)
    scan = np.linspace(0, 5, 200001)
    for p in (1, 2, 3):
        c = optimal_scale(delta, lam, p)
        obj = np.array([np.sum(np.abs(s * delta - lam) ** p) for s in scan[::50]])
        assert np.sum(np.abs(c * delta - lam) ** p) <= obj.min() + 1e-12
    assert optimal_scale(np.zeros(4), lam[:4], 2) == 0.0


def test_cross_correlation_anti_ordered_line():
    # items on a line in reverse value order still have |i-j| = |x_i - x_j|
    arr = Arrangement(3, 1, [[2, 0], [1, 0], [0, 0]])
    ds = Dataset([[0.0], [1.0], [2.0]])
    assert cross_correlation(arr, ds) == pytest.approx(1.0)
    # swapping the outer pair with the middle breaks the proportionality
    arr2 = Arrangement(3, 1, [[1, 0], [0, 0], [2, 0]])
    # lambda pairs (ordered, i != j): (0,1)->1 (0,2)->1 (1,2)->2; delta: 1, 2, 1; diagonal zeros
    lam = np.array([0, 1, 1, 1, 0, 2, 1, 2, 0], float)
    delta = np.array([0, 1, 2, 1, 0, 1, 2, 1, 0], float)
    assert cross_correlation(arr2, ds) == pytest.approx(np.corrcoef(lam, delta)[0, 1], abs=1e-12)


def test_cross_correlation_needs_variance():
    arr = Arrangement(2, 1, [[0, 0], [1, 0]])
    with pytest.raises(UndefinedMetricError):
        cross_correlation(arr, Dataset([[1.0], [1.0]]))


# -------------------------------------------------------------- plumbing


def test_p_norm():
    assert p_norm(np.array([3.0, 4.0]), 2) == pytest.approx(5.0)
    assert p_norm(np.array([3.0, -4.0]), np.inf) == 4.0
    assert p_norm(np.zeros(3), 2) == 0.0


def test_invalid_p():
    arr, ds = perfect(3, 3)
    with pytest.raises(InvalidInputError):
        dpq(arr, ds, p=0.5)
    with pytest.raises(InvalidInputError):
        dpq(arr, ds, tie_mode="median")


def test_token_parsing_and_evaluate():
    assert parse_metric_tokens("dpq16, dpq16-,e1,npq2,cc,map,npk") == ["dpq16", "dpq16-", "e1", "npq2", "cc", "map", "npk"]
    for bad in ("npq2-", "dpq", "foo", "e1-"):
        with pytest.raises(InvalidInputError):
            parse_metric_tokens(bad)
    arr, ds = random_instance(5)
    report = evaluate(arr, ds, "dpq16,dpq16-,e1,npq2,npk").to_dict()
    assert set(report["metrics"]) == {"dpq16", "dpq16-", "e1", "npq2", "npk"}
    assert report["metrics"]["dpq16"] == dpq(arr, ds)
    assert len(report["metrics"]["npk"]) == ds.n - 1


def test_thread_count_does_not_change_results(monkeypatch):
    import gridsort.metrics as m

    rng = np.random.default_rng(6)
    spec = GridSpec(20, 20)
    arr = random_arrangement(spec, rng)
    ds = Dataset(rng.random((400, 3)))
    monkeypatch.setattr(m, "_CHUNK_ELEMS", 4000)
    monkeypatch.setenv("GRIDSORT_THREADS", "1")
    one = (dpq(arr, ds), dpq(arr, ds, tie_mode=TIE_MEAN), npq(arr, ds))
    monkeypatch.setenv("GRIDSORT_THREADS", "4")
    four = (dpq(arr, ds), dpq(arr, ds, tie_mode=TIE_MEAN), npq(arr, ds))
    assert one == four
