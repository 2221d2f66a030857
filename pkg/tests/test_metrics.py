import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import (e_measure_binary_ref, e_measure_mean_ref, mae_loop, nearest_foreground_ref, s_measure_ref,
                     weighted_f_ref)
from phasecod import io
from phasecod import metrics as m
from phasecod.errors import EmptyGroundTruth, ShapeMismatch


def random_pair(seed, size=16):
    r = np.random.default_rng(seed)
    g = r.random((size, size)) < r.uniform(0.1, 0.6)
    if seed % 3 == 0:  # a solid blob instead of salt-and-pepper
        g = np.zeros((size, size), bool)
        y, x = r.integers(0, size // 2, 2)
        g[y:y + r.integers(2, size // 2), x:x + r.integers(2, size // 2)] = True
    p = r.random((size, size))
    if seed % 2:
        p = np.clip(0.6 * g + 0.5 * p, 0, 1)
    return p, g


def blob(size=16):
    g = np.zeros((size, size), bool)
    g[4:11, 3:9] = True
    return g


# ---------------------------------------------------------------------------
# reference agreement


def test_metrics_match_literal_references():
    for seed in range(50):
        p, g = random_pair(seed)
        assert abs(m.s_measure(p, g) - s_measure_ref(p, g)) < 1e-6, seed
        assert abs(m.e_measure_mean(p, g) - e_measure_mean_ref(p, g)) < 1e-6, seed
        assert abs(m.weighted_f(p, g) - weighted_f_ref(p, g)) < 1e-5, seed
        assert abs(m.mae(p, g) - mae_loop(p, g)) < 1e-9, seed


def test_e_measure_curve_matches_binary_reference():
    p, g = random_pair(7)
    curve = m.e_measure_curve(p, g, 16)
    want = [e_measure_binary_ref(p > j / 16, g) for j in range(16)]
    np.testing.assert_allclose(curve, want, atol=1e-12)


def test_nearest_foreground_matches_brute_force():
    for seed in range(20):
        _, g = random_pair(seed, 12)
        if not g.any():
            continue
        dist, rows, cols = m.nearest_foreground(g)
        ref_dist, ref_idx = nearest_foreground_ref(g)
        np.testing.assert_allclose(dist, ref_dist, atol=1e-12)
        np.testing.assert_array_equal(rows, ref_idx[..., 0])
        np.testing.assert_array_equal(cols, ref_idx[..., 1])


def test_optional_cross_check_with_pysodmetrics():
    sod = pytest.importorskip("py_sod_metrics")
    r = np.random.default_rng(0)
    for i in range(20):
        u = (r.random((16, 16)) * 255).astype(np.uint8)
        p = m.minmax_normalize(u / 255.0)
        # generic masks: the S-measure centroid never falls on a rounding tie
        g = r.random((16, 16)) < 0.4
        s = sod.Smeasure()
        s.step(u, g.astype(np.uint8) * 255)
        assert abs(s.get_results()["sm"] - m.s_measure(p, g)) < 1e-6
        # solid blocks: no equidistant nearest-foreground ties for the weighted F-measure
        g = np.zeros((16, 16), bool)
        g[3:9 + i % 5, 4 + i % 3:12] = True
        w = sod.WeightedFmeasure()
        w.step(u, g.astype(np.uint8) * 255)
        assert abs(w.get_results()["wfm"] - m.weighted_f(p, g)) < 1e-6


# ---------------------------------------------------------------------------
# worked examples


def test_perfect_prediction_scores_one():
    for g in (blob(), random_pair(4)[1], random_pair(5)[1]):
        p = g.astype(float)
        assert abs(m.s_measure(p, g) - 1) < 1e-6
        assert abs(m.e_measure_mean(p, g) - 1) < 1e-6
        assert abs(m.weighted_f(p, g) - 1) < 1e-6
        assert m.mae(p, g) == 0


def test_mae_examples():
    g = blob()
    assert m.mae(1.0 - g, g) == 1.0
    p, g = random_pair(11, 8)
    assert abs(m.mae(p, g) - mae_loop(p, g)) < 1e-9


def test_s_measure_degenerate_masks():
    z = np.zeros((8, 8), bool)
    assert m.s_measure(np.zeros((8, 8)), z) == 1.0
    p = np.random.default_rng(0).random((8, 8))
    assert m.s_measure(p, z) == pytest.approx(1 - p.mean())
    assert m.s_measure(p, ~z) == pytest.approx(p.mean())


def test_e_measure_anti_aligned_bound():
    g = np.zeros((4, 4), bool)
    g[:2, :2] = True
    # at xi = -1 the quadratic kernel (1 + xi)^2 / 4 vanishes; every threshold map is 1 - g or all-zero
    assert ((1 + -1) ** 2) / 4 == 0
    assert m.e_measure_mean((~g).astype(float), g) <= 0.25
    assert m.e_measure_mean((1.0 - blob()), blob()) <= 0.25


def test_e_measure_empty_ground_truth_convention():
    z = np.zeros((6, 6), bool)
    assert m.e_measure_mean(np.zeros((6, 6)), z) == 1.0
    p = np.zeros((6, 6))
    p[0, :3] = 1
    assert m.e_measure_mean(p, z) == pytest.approx(33 / 36)


def test_weighted_f_examples():
    g = blob()
    assert m.weighted_f(np.zeros((16, 16)), g) < 1e-6
    with pytest.raises(EmptyGroundTruth):
        m.weighted_f(np.zeros((4, 4)), np.zeros((4, 4), bool))


def test_shape_mismatch():
    for fn in (m.mae, m.s_measure, m.e_measure_mean, m.weighted_f):
        with pytest.raises(ShapeMismatch):
            fn(np.zeros((4, 4)), np.zeros((4, 5), bool))


def test_score_pair_skips_weighted_f_on_empty_mask():
    s = m.score_pair("x", np.random.default_rng(0).random((8, 8)), np.zeros((8, 8), bool))
    assert s.weighted_f is None and 0 <= s.s_measure <= 1


# ---------------------------------------------------------------------------
# properties


pairs = st.integers(0, 100_000).map(random_pair)


@given(pair=pairs)
def test_metrics_bounded(pair):
    p, g = pair
    for v in (m.s_measure(p, g), m.e_measure_mean(p, g), m.mae(p, g)):
        assert 0 <= v <= 1
    if g.any():
        assert 0 <= m.weighted_f(p, g) <= 1


@given(pair=pairs)
def test_mae_complement_symmetry(pair):
    p, g = pair
    assert m.mae(p, g) == pytest.approx(m.mae(1 - p, ~g), abs=1e-15)


def _piecewise_pair(seed):
    r = np.random.default_rng(seed)
    g = np.zeros((8, 8), bool)
    y, x = r.integers(0, 4, 2)
    g[y:y + r.integers(2, 5), x:x + r.integers(2, 5)] = True
    # dyadic grey levels keep every sum exact in floating point
    p = np.where(g, r.integers(4, 9) / 8, r.integers(0, 4) / 8)
    return p, g


def _up(a):
    return np.kron(a, np.ones((2, 2))).astype(a.dtype)


@given(seed=st.integers(0, 100_000))
def test_resolution_consistency_mae_and_e_measure(seed):
    p, g = _piecewise_pair(seed)
    assert m.mae(_up(p), _up(g)) == m.mae(p, g)
    assert abs(m.e_measure_mean(_up(p), _up(g)) - m.e_measure_mean(p, g)) < 1e-6


@given(seed=st.integers(0, 100_000))
def test_resolution_consistency_s_measure_and_weighted_f(seed):
    p, g = _piecewise_pair(seed)
    assert abs(m.s_measure(_up(p), _up(g)) - m.s_measure(p, g)) < 1e-6
    assert abs(m.weighted_f(_up(p), _up(g)) - m.weighted_f(p, g)) < 1e-6


@given(seed=st.integers(0, 100_000))
def test_weighted_f_monotone_under_error_reduction(seed):
    r = np.random.default_rng(seed)
    g = r.random((8, 8)) < 0.4
    g[0, 0] = True
    p = (r.random((8, 8)) < 0.5).astype(float)
    wrong = np.argwhere(p != g)
    if len(wrong) == 0:
        return
    i, j = wrong[r.integers(len(wrong))]
    q = p.copy()
    q[i, j] = g[i, j]
    assert m.weighted_f(q, g) >= m.weighted_f(p, g) - 1e-12


# ---------------------------------------------------------------------------
# dataset evaluation


def _write_pairs(tmp_path, n, identical):
    pred, gt = tmp_path / "pred", tmp_path / "gt"
    pred.mkdir()
    gt.mkdir()
    r = np.random.default_rng(0)
    for i in range(n):
        g = np.zeros((16, 16), np.float32)
        g[2 + i % 4:10, 3:12 - i % 3] = 1
        io.write_image(gt / f"im{i:02d}.png", g)
        io.write_image(pred / f"im{i:02d}.png", g if identical else r.random((16, 16)))
    return pred, gt


def test_evaluate_identical_directories(tmp_path):
    pred, gt = _write_pairs(tmp_path, 4, identical=True)
    rep = m.evaluate_dataset(pred, gt)
    agg = rep.aggregate
    assert rep.n_images == 4 and not rep.errors
    assert agg["s_measure"] == pytest.approx(1) and agg["e_measure_mean"] == pytest.approx(1)
    assert agg["weighted_f"] == pytest.approx(1) and agg["mae"] == 0


def test_evaluate_disjoint_names(tmp_path):
    pred, gt = tmp_path / "p", tmp_path / "g"
    pred.mkdir()
    gt.mkdir()
    io.write_image(pred / "a.png", np.zeros((4, 4)))
    io.write_image(gt / "b.png", np.zeros((4, 4)))
    rep = m.evaluate_dataset(pred, gt)
    assert rep.n_images == 0
    assert [(e["id"], e["kind"]) for e in rep.errors] == [("a", "MissingPair"), ("b", "MissingPair")]


def test_evaluate_aggregate_is_mean_and_sorted(tmp_path):
    pred, gt = _write_pairs(tmp_path, 10, identical=False)
    rep = m.evaluate_dataset(pred, gt, workers=3)
    assert [s.image_id for s in rep.per_image] == [f"im{i:02d}" for i in range(10)]
    for name in m.METRIC_NAMES:
        vals = [getattr(s, name) for s in rep.per_image]
        assert abs(rep.aggregate[name] - sum(vals) / len(vals)) < 1e-9
    single = m.score_pair("im03", io.read_gray(pred / "im03.png"), io.read_gray(gt / "im03.png") > 0.5)
    assert single == rep.per_image[3]


def test_evaluate_collects_unreadable(tmp_path):
    pred, gt = _write_pairs(tmp_path, 2, identical=True)
    (pred / "im01.png").write_bytes(b"not an image")
    rep = m.evaluate_dataset(pred, gt)
    assert rep.n_images == 1 and rep.errors[0]["kind"] == "UnreadableImage"
