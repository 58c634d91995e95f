"""Acceptance suite: one test per criterion, at the stated tolerances."""
import time

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from mlgpi.classify import (boundary_shift, cross_validate, euclidean_pairwise,
                            fit_model, grid_points, knn_predict,
                            make_pipeline)
from mlgpi.data import (LabeledDataset, Standardizer, StripeLayout,
                        shear_atlas, stripe_midlines, synth_rotation_atlas,
                        synth_stripes)
from mlgpi.errors import DefectiveMatrix
from mlgpi.fusion import (atlas_from_linear, backward, forward,
                          integrate_flow, jacobian_grid)
from mlgpi.linalg import geodesic_interp, mat_exp, mat_log, project_to_glplus
from mlgpi.lmnn import (LmnnConfig, build_triplets, find_target_neighbors,
                        objective_and_gradient, train_lmnn,
                        train_multi_metric)

SEEDS = range(5)
GRID_50 = grid_points(-5, 5, 50, -5, 5, 50)


def criterion(number, title):
    return pytest.mark.criterion(number, title)


def random_generator(rng, n, scale):
    X = rng.normal(size=(n, n))
    return X * scale / np.linalg.norm(X, 2)


@criterion(1, "exp/log roundtrip and det(exp A) = exp(tr A)")
def test_criterion_01_matrix_functions():
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    worst_rt = worst_det = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 7))
        X = random_generator(rng, n, rng.uniform(0.05, 0.99))
        E = mat_exp(X)
        worst_rt = max(worst_rt, np.linalg.norm(mat_log(E) - X)
                       / np.linalg.norm(X),
                       np.linalg.norm(mat_exp(mat_log(E)) - E)
                       / np.linalg.norm(E))
        worst_det = max(worst_det, abs(np.linalg.det(E)
                                       / np.exp(np.trace(X)) - 1.0))
    elapsed = time.perf_counter() - start
    print(f"roundtrip {worst_rt:.2e}, det {worst_det:.2e}, {elapsed:.2f}s")
    assert worst_rt < 1e-9
    assert worst_det < 1e-8
    assert elapsed < 5.0


@criterion(2, "geodesic endpoints f(a,b,0)=a, f(a,b,1)=b")
def test_criterion_02_geodesic_endpoints():
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 6))
        # GL+ pairs whose ratio has a principal log
        a = mat_exp(random_generator(rng, n, 1.5))
        b = mat_exp(random_generator(rng, n, 1.0)) @ a
        for t, ref in ((0.0, a), (1.0, b)):
            err = np.linalg.norm(geodesic_interp(a, b, t) - ref) \
                / np.linalg.norm(ref)
            worst = max(worst, err)
    print(f"worst endpoint error {worst:.2e}")
    assert worst < 1e-10


@criterion(3, "single-component 64-step flow equals L x")
def test_criterion_03_single_component_consistency():
    rng = np.random.default_rng(3)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        L = mat_exp(random_generator(rng, 2, 0.8))
        c = rng.normal(size=2)
        atlas = atlas_from_linear([L], [c], [1.0], steps=64)
        X = rng.normal(size=(100, 2)) * 3
        exact = c + (X - c) @ L.T
        got = integrate_flow(atlas, X)
        rel = np.linalg.norm(got - exact, axis=1) / np.linalg.norm(
            np.column_stack([exact, np.ones(len(X))]), axis=1)
        worst = max(worst, rel.max())
    elapsed = time.perf_counter() - start
    print(f"worst relative error {worst:.2e}, {elapsed:.2f}s")
    assert worst < 1e-6
    assert elapsed < 10.0


def _smooth_atlases():
    rng = np.random.default_rng(4)
    yield synth_rotation_atlas(0.63)
    yield shear_atlas(1.0, sigma=2.0)
    for _ in range(3):
        mats = [mat_exp(random_generator(rng, 2, 1.0)) for _ in range(2)]
        centers = rng.normal(size=(2, 2)) * 2
        yield atlas_from_linear(mats, centers, [1.5, 1.5])


@criterion(4, "RK4 error ratio 16 vs 32 steps in [8, 32]")
def test_criterion_04_rk4_order():
    X = grid_points(-3, 3, 7, -3, 3, 7)
    ratios = []
    for atlas in _smooth_atlases():
        ref = integrate_flow(atlas, X, steps=2048)
        e16 = np.abs(integrate_flow(atlas, X, steps=16) - ref).max()
        e32 = np.abs(integrate_flow(atlas, X, steps=32) - ref).max()
        ratios.append(e16 / e32)
    print("ratios", np.round(ratios, 2))
    assert all(8.0 <= r <= 32.0 for r in ratios)


@criterion(5, "opposed shears fold under displacement, not velocity")
def test_criterion_05_diffeomorphism_contrast():
    atlas = shear_atlas(2.0)
    det_disp = jacobian_grid(atlas, GRID_50, mode="displacement")
    det_flow = jacobian_grid(atlas, GRID_50)
    print(f"displacement: {np.sum(det_disp <= 0)} folded points, "
          f"min {det_disp.min():.3f}; velocity min {det_flow.min():.3f}")
    assert det_flow.size == 2500
    assert np.sum(det_disp <= 0) >= 1
    assert np.all(det_flow > 1e-6)


@criterion(6, "two-rotation atlas: detJ > 0 and roundtrip < 1e-4")
def test_criterion_06_rotation_atlas():
    atlas = synth_rotation_atlas(0.63)
    det = jacobian_grid(atlas, GRID_50)
    err = np.linalg.norm(backward(atlas, forward(atlas, GRID_50)) - GRID_50,
                         axis=1).max()
    print(f"min detJ {det.min():.4f}, roundtrip {err:.2e}")
    assert np.all(det > 1e-6)
    assert err < 1e-4


def _lmnn_instance(rng, n=8):
    dim = int(rng.integers(2, 5))
    X = np.vstack([rng.normal(size=(n, dim)),
                   rng.normal(size=(n, dim)) + 1.0])
    return LabeledDataset(X, np.repeat([0, 1], n))


@criterion(7, "LMNN gradient, monotone objective, det L > 0")
def test_criterion_07_lmnn_properties():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(50):
        data = _lmnn_instance(rng)
        dim = data.dim
        L = np.eye(dim) + 0.3 * rng.normal(size=(dim, dim))
        trip = build_triplets(data, find_target_neighbors(data, 2), L)
        _, G = objective_and_gradient(L, data, trip, 0.5)
        num = np.zeros_like(L)
        h = 1e-6
        for idx in np.ndindex(*L.shape):
            E = np.zeros_like(L)
            E[idx] = h
            num[idx] = (objective_and_gradient(L + E, data, trip, 0.5)[0]
                        - objective_and_gradient(L - E, data, trip, 0.5)[0]
                        ) / (2 * h)
        worst = max(worst, np.linalg.norm(G - num) / np.linalg.norm(num))
    print(f"worst gradient error {worst:.2e}")
    assert worst < 1e-5

    for seed in range(5):
        data = _lmnn_instance(np.random.default_rng(seed), n=15)
        flip = np.eye(data.dim)
        flip[0, 0] = -1.0  # det < 0 start forces the GL+ repair path
        for res in (train_lmnn(LmnnConfig(max_iters=80), data, init=flip),
                    train_multi_metric(LmnnConfig(max_iters=80), data)):
            assert np.all(np.diff(res.history) <= 0)
            assert np.all(np.asarray(res.determinants) > 0)


def _stripe_shift(seed, k, kinds=("velocity", "mmlmnn"), nx=801):
    layout = StripeLayout()
    raw = synth_stripes(layout, noise=0.05, seed=seed)
    ys, mids = stripe_midlines(raw, layout)
    scaler = Standardizer.fit(raw.points)
    data = scaler.apply(raw)
    config = LmnnConfig()
    result = train_multi_metric(config, data)
    x0, x1, _, _ = layout.bounds()
    xs = np.linspace(x0, x1, nx)
    G = np.column_stack([np.tile(xs, len(ys)), np.repeat(ys, nx)])
    shifts = {}
    for kind in kinds:
        model = fit_model(data, kind, config, k=k, result=result)
        labels = model.predict(scaler.transform(G))
        shifts[kind] = boundary_shift(G, labels, nx, mids)
    return shifts


@criterion(8, "stripes boundary shift: velocity < mm-LMNN, 5 seeds")
def test_criterion_08_boundary_shift():
    shifts = [_stripe_shift(seed, k=1) for seed in SEEDS]
    for seed, s in zip(SEEDS, shifts):
        print(f"seed {seed}: velocity {s['velocity']:.4f} "
              f"mm-LMNN {s['mmlmnn']:.4f}")
    for seed in SEEDS:
        s3 = _stripe_shift(seed, k=3)
        print(f"seed {seed} (k=3, informational): velocity "
              f"{s3['velocity']:.4f} mm-LMNN {s3['mmlmnn']:.4f}")
    assert all(s["velocity"] < s["mmlmnn"] for s in shifts)


@criterion(9, "10-fold CV accuracy: velocity >= mm-LMNN, 5 seeds")
def test_criterion_09_classification_ordering():
    config = LmnnConfig()
    rows = []
    for seed in SEEDS:
        data = synth_stripes(StripeLayout(), noise=0.05, seed=seed)
        gpi = cross_validate(data, 10, make_pipeline("velocity", config),
                             seed=seed).mean
        mm = cross_validate(data, 10, make_pipeline("mmlmnn", config),
                            seed=seed).mean
        print(f"seed {seed}: velocity {gpi:.4f} mm-LMNN {mm:.4f}")
        rows.append((gpi, mm))
    assert all(g >= m for g, m in rows)


def _sort_oracle(D_row, labels, k):
    order = sorted(range(len(D_row)), key=lambda i: (D_row[i], i))[:k]
    votes = np.zeros(labels.max() + 1, dtype=int)
    for i in order:
        votes[labels[i]] += 1
    return int(np.flatnonzero(votes == votes.max())[0])


def _flip_oracle(A):
    ev = np.linalg.eigvals(A)
    neg = np.flatnonzero((np.abs(ev.imag) < 1e-12) & (ev.real < 0))
    j = neg[np.argmin(np.abs(ev[neg].real))]
    ev = ev.copy()
    ev[j] = -ev[j]
    return ev


@criterion(10, "k-NN and GL+ projection agree with oracles")
def test_criterion_10_oracles():
    rng = np.random.default_rng(10)
    for _ in range(100):
        n = int(rng.integers(1, 15))
        train = rng.integers(-4, 5, size=(n, 2)).astype(float)
        labels = rng.integers(0, 3, size=n)
        Q = rng.integers(-4, 5, size=(5, 2)).astype(float)
        k = int(rng.integers(1, n + 1))
        D = euclidean_pairwise(Q, train)
        expected = [_sort_oracle(row, labels, k) for row in D]
        np.testing.assert_array_equal(knn_predict(D, labels, k), expected)

    audited = 0
    while audited < 100:
        n = int(rng.integers(2, 7))
        A = rng.normal(size=(n, n))
        if np.linalg.det(A) >= 0:
            continue
        try:
            P = project_to_glplus(A)
        except DefectiveMatrix:
            continue
        want = _flip_oracle(A)
        got = np.linalg.eigvals(P)
        cost = np.abs(want[:, None] - got[None, :])
        r, c = linear_sum_assignment(cost)
        scale = np.abs(want).max()
        assert cost[r, c].max() <= 1e-8 * scale
        assert np.linalg.det(P) > 0
        audited += 1
