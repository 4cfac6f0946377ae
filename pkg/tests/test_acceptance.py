"""Acceptance criteria, one test per criterion.

A PASS/FAIL line per criterion is printed in the terminal summary.
"""
import math
import time

import numpy as np
import pytest

from airwaysurv.learning import (FeatureTable, MinMaxScaler, cross_validate, pearson_r, roc_auc,
                                 select_features, svm_train)
from airwaysurv.learning.svm import rbf_kernel
from airwaysurv.morphology import (StructuringElement, close, connected_components, dilate, erode,
                                   extract_non_trachea, extract_trachea, upper_third_start)
from airwaysurv.phantoms import PhantomSpec, generate_phantom
from airwaysurv.radiomics import extract_all, first_order_features
from airwaysurv.segmetrics import combine_score, overall_score, skeletonize
from airwaysurv.volume_io import Geometry, Mask, Volume, read_mask, read_volume, write_mask, write_volume
from oracles import centreline as ref_centreline
from oracles import morphology as ref_morph
from oracles import radiomics as ref_radiomics
from oracles import svm as ref_svm


def acceptance(number, title):
    return pytest.mark.acceptance(number, title)


@acceptance(1, "segmentation score identity on a 128^3 depth-2 tree")
def test_segmentation_score_identity():
    t0 = time.perf_counter()
    ph = generate_phantom(PhantomSpec(kind="binary-tree", dims=(128, 128, 128), trunk_radius=3.0,
                                      depth=2, noise=0))
    assert ph.branch_count == 7
    skel = skeletonize(ph.mask)
    same = overall_score(ph.mask, ph.mask, gt_skeleton=skel)
    assert abs(same.overall - 1.0) <= 1e-9
    pred = ph.mask.with_voxels(ph.mask.voxels & ~ph.branch_voxels[6])
    rep = overall_score(pred, ph.mask, gt_skeleton=skel)
    elapsed = time.perf_counter() - t0
    assert abs(rep.dbr - 6 / 7) <= 1e-9
    expect = ref_centreline.detected_length_ratio(pred.voxels, skel.voxels, (1.0, 1.0, 1.0))
    assert abs(rep.dlr - expect) <= 1e-6
    assert elapsed < 10.0, elapsed


@acceptance(2, "radiomics families equal the enumeration oracle")
def test_radiomics_oracle_equivalence():
    elapsed = 0.0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        vals = rng.uniform(0, 99.9, (6, 6, 6))
        mask = rng.random((6, 6, 6)) < 0.6
        g = Geometry.from_spacing((6, 6, 6), (0.8, 1.0, 1.5))
        t0 = time.perf_counter()
        f = extract_all(Volume(g, vals), Mask(g, mask))
        elapsed += time.perf_counter() - t0
        assert int(np.floor((vals[mask].max() - vals[mask].min()) / 25.0)) + 1 <= 4
        o = ref_radiomics.all_features(vals, mask, (0.8, 1.0, 1.5))
        assert set(f) == set(o) and len(f) == 104
        bad = [k for k in f if not math.isclose(f[k], o[k], rel_tol=1e-9, abs_tol=1e-12)]
        assert not bad, (seed, bad)
    assert elapsed < 5.0, elapsed


@acceptance(3, "first-order features of a constant ROI")
def test_first_order_constant_roi():
    c, shape = -830.0, (3, 4, 5)
    g = Geometry.from_spacing(shape)
    f = first_order_features(Volume(g, np.full(shape, c)), Mask(g, np.ones(shape, bool)))
    n = math.prod(shape)
    assert f["firstorder_Variance"] == 0.0
    assert f["firstorder_Entropy"] == 0.0
    assert f["firstorder_Uniformity"] == 1.0
    assert f["firstorder_Energy"] == n * c * c


@acceptance(4, "morphology and labelling equal brute-force oracles")
def test_morphology_oracle_equivalence():
    rng = np.random.default_rng(2024)
    masks = [rng.random((10, 10, 10)) < rng.uniform(0.2, 0.6) for _ in range(50)]
    g = Geometry.from_spacing((10, 10, 10))
    for conn in (6, 18, 26):
        se = StructuringElement.from_connectivity(conn)
        for a in masks:
            m = Mask(g, a)
            assert np.array_equal(dilate(m, se).voxels, ref_morph.dilate(a, se.offsets))
            assert np.array_equal(erode(m, se).voxels, ref_morph.erode(a, se.offsets))
            assert np.array_equal(close(m, se).voxels, ref_morph.close(a, se.offsets))
            cs = connected_components(m, conn)
            labels, n = ref_morph.flood_fill_labels(a, conn)
            assert len(cs.sizes) == n
            assert ref_morph.same_partition(cs.labels, labels)


def _probe(d):
    grid = np.linspace(0, 1, 5)
    P = np.full((25, d), 0.5)
    P[:, 0] = np.repeat(grid, 5)
    P[:, 1] = np.tile(grid, 5)
    return P


@acceptance(5, "SMO equals a dense projected-gradient dual solver")
def test_svm_oracle_equivalence():
    C, gamma = 10.0, 1.0
    elapsed = 0.0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        n, d = int(rng.integers(4, 13)), int(rng.integers(2, 6))
        X = rng.uniform(0, 1, (n, d))
        y = rng.integers(0, 2, n)
        y[:2] = (0, 1)
        t0 = time.perf_counter()
        m = svm_train(X, y, C, gamma, tol=1e-8)
        f = m.decision_function(_probe(d))
        elapsed += time.perf_counter() - t0
        a, b = ref_svm.solve_dual(X, y, C, gamma)
        g = ref_svm.decision(X, y, a, b, gamma, _probe(d))
        assert np.max(np.abs(f - g)) <= 1e-4, seed

        ys = np.where(y == 1, 1.0, -1.0)
        alpha = np.zeros(n)
        for sv, coef in zip(m.support_vectors, m.alphas):
            alpha[np.flatnonzero((X == sv).all(axis=1))[0]] = coef
        grad = ys * (rbf_kernel(X, X, gamma) @ (alpha * ys)) - 1.0
        v = -ys * grad
        up = np.where(ys > 0, alpha < C, alpha > 0)
        low = np.where(ys > 0, alpha > 0, alpha < C)
        assert v[up].max() - v[low].min() <= 1e-3
        assert abs(np.sum(alpha * ys)) <= 1e-8
    assert elapsed < 10.0, elapsed


@acceptance(6, "Pearson, AUC and min-max scaling are exact")
def test_statistics_correctness():
    rng = np.random.default_rng(6)
    y = rng.integers(0, 2, 30)
    y[:2] = (0, 1)
    for _ in range(100):
        x = rng.normal(size=30) * rng.uniform(0.1, 10)
        n = len(x)
        sx, sy = x.sum(), y.sum()
        num = n * (x * y).sum() - sx * sy
        den = math.sqrt((n * (x * x).sum() - sx * sx) * (n * (y * y).sum() - sy * sy))
        assert abs(pearson_r(x, y) - num / den) <= 1e-12

    for _ in range(50):
        s = np.round(rng.normal(size=30), 1)
        pos, neg = s[y == 1], s[y == 0]
        wins = sum(1.0 if p > q else 0.5 if p == q else 0.0 for p in pos for q in neg)
        assert abs(roc_auc(y, s) - wins / (len(pos) * len(neg))) <= 1e-12

    X = rng.normal(size=(40, 25)) * rng.uniform(1e-4, 1e4, 25) + rng.normal(size=25) * 100
    Z = MinMaxScaler().fit_transform(X)
    assert np.all(Z.min(axis=0) == 0.0) and np.all(Z.max(axis=0) == 1.0)


@acceptance(7, "planted-signal cohort reaches 0.9 CV accuracy reproducibly")
def test_planted_signal_end_to_end():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    n = 60
    y = np.zeros(n, dtype=int)
    y[rng.permutation(n)[:35]] = 1
    X = rng.normal(size=(n, 20))
    X[:, 3] = y + 0.15 * rng.normal(size=n)
    t = FeatureTable([f"s{i:02d}" for i in range(n)], [f"x{j}" for j in range(20)], X, y)
    threshold = 0.7
    assert select_features(t, threshold) == ["x3"]
    a = cross_validate(t, 5, C=8000.0, gamma=0.01, seed=11, thresholds=threshold)
    b = cross_validate(t, 5, C=8000.0, gamma=0.01, seed=11, thresholds=threshold)
    elapsed = time.perf_counter() - t0
    assert a.mean_accuracy >= 0.9, a.mean_accuracy
    assert a.decision_values.tobytes() == b.decision_values.tobytes()
    assert np.array_equal(a.folds, b.folds) and a.reports == b.reports
    assert elapsed < 30.0, elapsed


@acceptance(8, "trachea heuristic returns the generator trunk in the upper third")
def test_trachea_heuristic():
    ph = generate_phantom(PhantomSpec(kind="binary-tree", dims=(64, 64, 96), noise=0))
    t = extract_trachea(ph.mask)
    expected = ph.trunk_voxels.copy()
    expected[:, :, :upper_third_start(96)] = False
    assert np.array_equal(t.voxels, expected)
    rest = extract_non_trachea(ph.mask, t)
    assert np.array_equal(t.voxels | rest.voxels, ph.mask.voxels)


@acceptance(9, "NIfTI roundtrip and cross-read of an externally written file")
def test_nifti_roundtrip(tmp_path, data_dir):
    rng = np.random.default_rng(9)
    g = Geometry.from_spacing((7, 6, 5), (0.68, 0.68, 1.25), origin=(-120.0, 30.0, -4.0))
    v = Volume(g, rng.normal(-600, 250, (7, 6, 5)))
    m = Mask(g, rng.random((7, 6, 5)) < 0.4)
    write_volume(v, tmp_path / "v.nii.gz")
    write_mask(m, tmp_path / "m.nii")
    w, mm = read_volume(tmp_path / "v.nii.gz"), read_mask(tmp_path / "m.nii")
    assert w.geometry.dims == (7, 6, 5) and mm.geometry.dims == (7, 6, 5)
    assert np.max(np.abs(np.subtract(w.geometry.spacing, g.spacing))) <= 1e-6
    assert w.voxels.tobytes() == v.voxels.tobytes()
    assert mm.voxels.tobytes() == m.voxels.tobytes()

    ext = read_volume(data_dir / "ramp_int16.nii.gz")  # written by nibabel
    assert ext.geometry.dims == (4, 4, 4)
    assert np.max(np.abs(np.subtract(ext.geometry.spacing, (0.7, 0.8, 2.5)))) <= 1e-6
    assert np.array_equal(ext.voxels.ravel(order="F"), np.arange(64.0))


@acceptance(10, "score-formula arithmetic")
def test_score_formula():
    assert combine_score(1, 1, 1, 1, 0) == 1.0
    assert combine_score(0, 0, 0, 0, 0) == 0.3
    assert combine_score(1, 1, 1, 1, 2.0) == 0.7
    assert combine_score(0.5, 0.5, 0.5, 0.5, 2.0) == 0.25 * 0.7 * 2.0
