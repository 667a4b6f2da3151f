import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from incident_topics import spatialdre as dre
from incident_topics import synth


def _instance(seed, n=500, M=3, q=100):
    gen = np.random.default_rng(seed)
    pts = gen.normal(size=(n, 2)) * [3.0, 1.0]
    labels = gen.integers(0, M, n)
    labels[:M] = np.arange(M)
    Q = gen.uniform(-6, 6, size=(q, 2))
    return pts, labels, Q


def _index(pts, labels, M=None):
    idx = dre.SpatialIndex(pts, labels, M)
    return idx, dre.MixtureWeights.from_index(idx)


# --- radius and counts ---------------------------------------------------

def test_radius_order_statistic():
    idx = dre.SpatialIndex(np.array([[1.0, 0.0], [0.0, 2.0], [-3.0, 0.0]]))
    assert dre.knn_radius(idx, np.zeros(2), 2) == 2.0


def test_radius_on_data_point():
    idx = dre.SpatialIndex(np.array([[1.0, 1.0], [4.0, 5.0]]))
    assert dre.knn_radius(idx, np.array([1.0, 1.0]), 1) == 0.0


def test_radius_matches_sorted_oracle():
    pts, labels, Q = _instance(0)
    idx, _ = _index(pts, labels)
    for x in Q:
        assert dre.knn_radius(idx, x, 50) == np.sort(dre.distances(pts, x))[49]


def test_count_zero_radius_inclusive():
    idx = dre.SpatialIndex(np.array([[0.0, 0.0], [1.0, 0.0]]), np.array([1, 0]))
    assert dre.count_by_label(idx, np.zeros(2), 0.0).tolist() == [0, 1]


def test_count_single_label():
    pts, _, _ = _instance(1)
    idx = dre.SpatialIndex(pts, np.zeros(len(pts), dtype=int), 3)
    N = dre.count_by_label(idx, np.zeros(2), 1.0)
    assert N[1:].tolist() == [0, 0]
    assert N[0] == int(np.sum(dre.distances(pts, np.zeros(2)) <= 1.0))


def test_count_matches_double_loop():
    pts, labels, Q = _instance(2, n=300)
    idx, _ = _index(pts, labels)
    for x in Q[:20]:
        R = dre.knn_radius(idx, x, 17)
        expect = [0, 0, 0]
        for p, m in zip(pts, labels):
            if math.sqrt((p[0] - x[0]) ** 2 + (p[1] - x[1]) ** 2) <= R:
                expect[m] += 1
        assert dre.count_by_label(idx, x, R).tolist() == expect


def test_neighborhoods_with_ties():
    # lattice points: many exact ties at the k-th distance
    g = np.arange(10.0)
    pts = np.array([(a, b) for a in g for b in g])
    labels = (np.arange(100) % 2)
    idx, w = _index(pts, labels)
    Q = np.array([[4.0, 4.0], [4.5, 4.5], [0.0, 0.0], [9.0, 4.5]])
    for k in (1, 4, 5, 9, 13, 50):
        R, N = dre.neighborhoods(idx, Q, k)
        for i, x in enumerate(Q):
            r0, n0 = synth.brute_force_counts(pts, labels, 2, x, k)
            assert R[i] == r0
            assert N[i].tolist() == n0.tolist()
            assert N[i].sum() >= k


@given(st.integers(0, 10 ** 6), st.integers(1, 60), st.integers(1, 4))
@settings(max_examples=40, deadline=None)
def test_tree_equals_brute_force(seed, k, M):
    pts, labels, Q = _instance(seed, n=200, M=M, q=10)
    # snap to a coarse lattice so ties are common
    if seed % 2:
        pts = np.round(pts * 2) / 2
        Q = np.round(Q * 2) / 2
    idx, w = _index(pts, labels, M)
    g = dre.density_ratio(idx, w, Q, k)
    for i, x in enumerate(Q):
        assert np.array_equal(g[i], synth.brute_force_dre(pts, labels, w.rho_hat, x, k))


# --- density ratio -------------------------------------------------------

def test_single_label_is_one():
    pts, _, Q = _instance(3)
    idx, w = _index(pts, np.zeros(len(pts), dtype=int))
    g = dre.density_ratio(idx, w, Q, 10)
    assert np.all(g == 1.0)


def test_pure_neighborhood():
    pts = np.array([[0.0, 0.0], [0.1, 0.0], [0.0, 0.1], [10.0, 10.0], [10.1, 10.0], [10.0, 10.1]])
    labels = np.array([0, 0, 0, 1, 1, 1])
    idx, w = _index(pts, labels)
    assert w.rho_hat.tolist() == [0.5, 0.5]
    assert dre.density_ratio(idx, w, np.array([0.02, 0.02]), 3).tolist() == [2.0, 0.0]


def test_absent_label_error():
    idx = dre.SpatialIndex(np.zeros((3, 2)) + np.arange(3)[:, None], np.array([0, 0, 2]), 3)
    w = dre.MixtureWeights.from_index(idx)
    with pytest.raises(dre.DensityRatioError):
        dre.density_ratio(idx, w, np.zeros(2), 1)


def test_rho_hat_exact():
    w = dre.MixtureWeights.from_labels(np.array([0, 1, 1, 2, 2, 2, 2]))
    assert w.rho_hat.tolist() == [1 / 7, 2 / 7, 4 / 7]
    assert sum(w.counts) == w.n == 7


def test_two_gaussian_centers():
    pts, labels, ratio = synth.generate_mixture(synth.SpatialMixtureSpec(seed=1))
    idx, w = _index(pts, labels)
    probes = np.array([[0.0, 0.0], [-2.0, 0.0]])
    g = dre.density_ratio(idx, w, probes, 50)
    r = ratio(probes)
    assert np.all(np.abs(g[0] - 1.0) <= 0.25)
    assert abs(g[1, 0] - r[1, 0]) <= 0.25


def test_invariants_on_random_instance():
    pts, labels, Q = _instance(4, n=1000, M=4, q=300)
    idx, w = _index(pts, labels)
    R, N = dre.neighborhoods(idx, Q, 25)
    g = (N / 25) / w.rho_hat
    np.testing.assert_allclose((g * w.rho_hat).sum(axis=1), N.sum(axis=1) / 25, rtol=1e-15, atol=0)
    assert np.all(N.sum(axis=1) == 25)
    assert np.all(g >= 0)
    assert np.all(g <= 1 / w.rho_hat)


def _tie_free(pts, Q, k, gap=1e-6):
    keep = []
    for x in Q:
        d = np.sort(dre.distances(pts, x))
        keep.append(d[k] - d[k - 1] > gap * max(d[k], 1.0))
    return np.array(keep)


@pytest.mark.parametrize("kind", ["translate", "rotate", "scale"])
def test_similarity_invariance(kind):
    pts, labels, Q = _instance(5, n=800, M=3, q=100)
    k = 20
    ok = _tie_free(pts, Q, k)
    theta = 0.7
    rot = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    f = {"translate": lambda a: a + [1234.5, -77.25],
         "rotate": lambda a: a @ rot.T,
         "scale": lambda a: a * 3.7}[kind]
    idx, w = _index(pts, labels)
    idx2, w2 = _index(f(pts), labels)
    g1 = dre.density_ratio(idx, w, Q[ok], k)
    g2 = dre.density_ratio(idx2, w2, f(Q[ok]), k)
    assert ok.sum() > 90
    np.testing.assert_allclose(g1, g2, atol=1e-9)


def test_label_permutation_equivariance():
    pts, labels, Q = _instance(6, M=4)
    perm = np.array([2, 0, 3, 1])
    idx, w = _index(pts, labels)
    idx2, w2 = _index(pts, perm[labels])
    g1 = dre.density_ratio(idx, w, Q, 15)
    g2 = dre.density_ratio(idx2, w2, Q, 15)
    assert np.array_equal(g2[:, perm], g1)


def test_index_immutable():
    idx = dre.SpatialIndex(np.zeros((2, 2)) + [[0, 0], [1, 1]])
    with pytest.raises(ValueError):
        idx.points[0, 0] = 5.0


# --- grid ----------------------------------------------------------------

def test_grid_resolution_two():
    pts, labels, _ = _instance(7)
    idx, w = _index(pts, labels)
    grid = dre.evaluate_grid(idx, w, resolution=2, k=5)
    assert grid.values.shape == (3, 2, 2)
    assert grid.radius.shape == (2, 2)


def test_grid_uniform_single_label():
    gen = np.random.default_rng(8)
    pts = gen.uniform(0, 1, size=(2000, 2))
    idx, w = _index(pts, np.zeros(2000, dtype=int))
    grid = dre.evaluate_grid(idx, w, resolution=20, k=50)
    assert np.all(grid.values == 1.0)


def test_grid_matches_direct_queries():
    pts, labels, _ = _instance(9, n=700)
    idx, w = _index(pts, labels)
    grid = dre.evaluate_grid(idx, w, bbox=(-5, -3, 5, 3), resolution=12, k=9)
    xs, ys = grid.centers()
    for iy in (0, 5, 11):
        for ix in (0, 7):
            expect = synth.brute_force_dre(pts, labels, w.rho_hat, (xs[ix], ys[iy]), 9)
            assert np.array_equal(grid.values[:, iy, ix], expect)


def test_bbox_padding():
    bbox = dre.default_bbox(np.array([[0.0, 10.0], [100.0, 60.0]]))
    assert bbox == pytest.approx((-2.0, 9.0, 102.0, 61.0))


def test_raster_roundtrip(tmp_path):
    pts, labels, _ = _instance(10)
    idx, w = _index(pts, labels)
    grid = dre.evaluate_grid(idx, w, resolution=8, k=5, labels=["a", "b", "c"])
    grid.save_raster(tmp_path / "g.bin")
    back = dre.RatioGrid.load_raster(tmp_path / "g.bin")
    assert np.array_equal(back.values, grid.values)
    assert back.labels == ["a", "b", "c"]
    assert (tmp_path / "g.bin").stat().st_size == 3 * 8 * 8 * 8


def test_summary_and_csv(tmp_path):
    pts, labels, _ = _instance(11)
    idx, w = _index(pts, labels)
    grid = dre.evaluate_grid(idx, w, resolution=4, k=5)
    rows = grid.summary(radius_cutoff=float(np.median(grid.radius)))
    assert [r["max"] for r in rows] == [float(v.max()) for v in grid.values]
    assert all(r["dense_cells"] >= 8 for r in rows)
    grid.to_csv(tmp_path / "g.csv")
    lines = (tmp_path / "g.csv").read_text().splitlines()
    assert lines[0] == "x,y,label,g"
    assert len(lines) == 1 + 3 * 16


# --- smoothing -----------------------------------------------------------

def naive_smooth(values, sx, sy):
    rx, ry = int(math.floor(4 * sx)), int(math.floor(4 * sy))
    ny, nx = values.shape
    out = np.empty_like(values)
    for iy in range(ny):
        for ix in range(nx):
            num = den = 0.0
            for oy in range(-ry, ry + 1):
                for ox in range(-rx, rx + 1):
                    y, x = iy + oy, ix + ox
                    if 0 <= y < ny and 0 <= x < nx:
                        wgt = math.exp(-0.5 * (ox / sx) ** 2) * math.exp(-0.5 * (oy / sy) ** 2)
                        num += wgt * values[y, x]
                        den += wgt
            out[iy, ix] = num / den
    return out


def test_smooth_constant():
    v = np.full((30, 20), 2.5)
    np.testing.assert_allclose(dre.smooth_array(v, 3.0, 2.0), 2.5, rtol=1e-14)


def test_smooth_impulse():
    v = np.zeros((41, 41))
    v[20, 20] = 1.0
    s = dre.smooth_array(v, 2.0, 2.0)
    assert np.unravel_index(np.argmax(s), s.shape) == (20, 20)
    k = dre.gaussian_kernel_1d(2.0)
    np.testing.assert_allclose(s[12:29, 12:29], np.outer(k, k), rtol=1e-12)


def test_smooth_matches_naive_small():
    v = np.random.default_rng(12).uniform(size=(15, 18))
    np.testing.assert_allclose(dre.smooth_array(v, 1.5, 2.2), naive_smooth(v, 1.5, 2.2), atol=1e-12)


def test_smooth_grid_meters():
    pts, labels, _ = _instance(13)
    idx, w = _index(pts, labels)
    grid = dre.evaluate_grid(idx, w, bbox=(-5, -5, 5, 5), resolution=10, k=5)
    s = dre.smooth_grid(grid, 2.0)
    assert s.smoothed and s.bandwidth == 2.0 and not grid.smoothed
    np.testing.assert_allclose(s.values[1], dre.smooth_array(grid.values[1], 2.0, 2.0))


# --- KDE -----------------------------------------------------------------

def test_kde_one_point():
    kde = dre.weighted_kde(np.array([[3.3, 7.7]]), np.array([1.0]), (0, 0, 10, 10), 10, bandwidth=1.0)
    assert kde.argmax_point() == pytest.approx((3.5, 7.5))


def test_kde_one_point_default_bandwidth():
    kde = dre.weighted_kde(np.array([[3300.0, 7700.0]]), np.array([1.0]), (0, 0, 10000, 10000), 10)
    assert kde.bandwidth == (100.0, 100.0)
    assert kde.argmax_point() == pytest.approx((3500.0, 7500.0))
    assert kde.values.max() > 0


def test_kde_zero_weight_invisible():
    bbox = (0, 0, 10, 10)
    a = dre.weighted_kde(np.array([[2.0, 3.0], [8.0, 8.0]]), np.array([2.0, 0.0]), bbox, 20, bandwidth=1.5)
    b = dre.weighted_kde(np.array([[2.0, 3.0]]), np.array([1.0]), bbox, 20, bandwidth=1.5)
    np.testing.assert_allclose(a.values, b.values, rtol=1e-14)
    # the default bandwidth ignores zero-weight points too
    a = dre.weighted_kde(np.array([[2.0, 3.0], [8.0, 8.0], [4.0, 1.0]]), np.array([2.0, 0.0, 1.0]), bbox, 20)
    b = dre.weighted_kde(np.array([[2.0, 3.0], [4.0, 1.0]]), np.array([2.0, 1.0]), bbox, 20)
    np.testing.assert_allclose(a.values, b.values, rtol=1e-14)


def test_kde_integrates_to_one():
    gen = np.random.default_rng(14)
    pts = gen.normal(size=(300, 2))
    kde = dre.weighted_kde(pts, np.ones(300), (-8, -8, 8, 8), 200)
    assert kde.values.sum() * kde.cell_area == pytest.approx(1.0, abs=1e-3)


def test_kde_gaussian_argmax():
    gen = np.random.default_rng(15)
    mean = np.array([1.5, -0.5])
    pts = mean + gen.normal(size=(5000, 2)) * [1.0, 2.0]
    kde = dre.weighted_kde(pts, np.ones(5000), (-6, -8, 8, 7), 150)
    ax, ay = kde.argmax_point()
    assert abs(ax - mean[0]) <= kde.bandwidth[0] and abs(ay - mean[1]) <= kde.bandwidth[1]


def test_kde_bad_inputs():
    with pytest.raises(ValueError):
        dre.weighted_kde(np.zeros((2, 2)), np.zeros(2), (0, 0, 1, 1), 4)
    with pytest.raises(ValueError):
        dre.weighted_kde(np.zeros((2, 2)), np.array([1.0, -1.0]), (0, 0, 1, 1), 4)


# --- sampling ------------------------------------------------------------

def test_sample_shortfall():
    dt = np.array([[0.9, 0.1], [0.6, 0.4], [0.2, 0.8], [0.5, 0.5]])
    s = dre.sample_topic_incidents(dt, 0, 0.5, 4000)
    assert s.indices.tolist() == [0, 1, 3] and s.shortfall


def test_sample_threshold_one():
    dt = np.array([[1.0, 0.0], [0.99, 0.01], [1.0, 0.0]])
    assert dre.sample_topic_incidents(dt, 0, 1.0).indices.tolist() == [0, 2]


def test_sample_exact_count():
    gen = np.random.default_rng(16)
    w = np.concatenate([gen.uniform(0.5, 1.0, 6000), gen.uniform(0.0, 0.499, 3000)])
    dt = np.column_stack([w, 1 - w])[gen.permutation(9000)]
    s = dre.sample_topic_incidents(dt, 0, 0.5, 4000, seed=3)
    assert len(s.indices) == len(set(s.indices.tolist())) == 4000
    assert np.all(dt[s.indices, 0] >= 0.5) and not s.shortfall
    again = dre.sample_topic_incidents(dt, 0, 0.5, 4000, seed=3)
    assert np.array_equal(s.indices, again.indices)


def test_sample_none_qualify():
    with pytest.raises(ValueError):
        dre.sample_topic_incidents(np.array([[0.2, 0.8]]), 0, 0.5)
