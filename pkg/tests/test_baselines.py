import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hckernel import KernelSpec, build_tree, kernel_cross
from hckernel.baselines import draw_rff, independent_gram, nystrom_gram, rff_map, sample_landmarks


def test_nystrom_with_all_points_is_exact():
    X = np.random.default_rng(0).normal(size=(25, 3))
    spec = KernelSpec("gaussian", 1.5, 1e-6)
    np.testing.assert_allclose(nystrom_gram(spec, X, np.arange(25)), kernel_cross(spec, X), atol=1e-9)


def test_nystrom_lossless_on_landmark_rows():
    X = np.random.default_rng(1).normal(size=(50, 2))
    spec = KernelSpec("laplace", 1.0, 1e-5)
    L = sample_landmarks(50, 8, seed=3)
    N = nystrom_gram(spec, X, L)
    np.testing.assert_allclose(N[L], kernel_cross(spec, X)[L], atol=1e-10)


def test_nystrom_psd_and_factor_form():
    X = np.random.default_rng(2).normal(size=(100, 4))
    spec = KernelSpec("invmq", 1.0, 1e-6)
    L = sample_landmarks(100, 10, seed=0)
    N = nystrom_gram(spec, X, L)
    assert np.linalg.eigvalsh(N).min() >= -1e-9
    Phi = nystrom_gram(spec, X, L, factor=True)
    assert Phi.shape == (100, 10)
    assert np.linalg.norm(Phi @ Phi.T - N) <= 1e-9 * np.linalg.norm(N)


def test_nystrom_rejects_repeated_or_singular_landmarks():
    X = np.zeros((5, 2))
    with pytest.raises(ValueError):
        nystrom_gram(KernelSpec(), X, [0, 0])
    with pytest.raises(np.linalg.LinAlgError):
        nystrom_gram(KernelSpec("gaussian", 1.0, 0.0), X, [0, 1])


def test_sample_landmarks_distinct_sorted():
    L = sample_landmarks(30, 12, seed=9)
    assert len(L) == 12 and np.all(np.diff(L) > 0)
    assert len(sample_landmarks(5, 12, seed=9)) == 5


def test_rff_magnitude_and_determinism():
    X = np.random.default_rng(3).normal(size=(40, 3))
    spec = KernelSpec("gaussian", 0.8)
    F = rff_map(spec, X, 64, seed=11)
    assert F.shape == (40, 64)
    assert np.abs(F).max() <= np.sqrt(2 / 64)
    np.testing.assert_array_equal(F, rff_map(spec, X, 64, seed=11))
    assert not np.array_equal(F, rff_map(spec, X, 64, seed=12))


def test_rff_rejects_invmq():
    with pytest.raises(ValueError):
        rff_map(KernelSpec("invmq", 1.0), np.zeros((2, 2)), 8, seed=0)


def test_rff_frequency_distributions():
    g = draw_rff(KernelSpec("gaussian", 0.5), 2, 200_000, seed=0)
    assert np.std(g.omegas) == pytest.approx(2.0, rel=0.01)
    lap = draw_rff(KernelSpec("laplace", 0.5), 2, 200_000, seed=0)
    # Cauchy with scale 2: median absolute value equals the scale
    assert np.median(np.abs(lap.omegas)) == pytest.approx(2.0, rel=0.02)
    assert g.phases.min() >= 0 and g.phases.max() < 2 * np.pi


@pytest.mark.parametrize("family", ["gaussian", "laplace"])
def test_rff_unbiased_at_large_rank(family):
    rng = np.random.default_rng(4)
    spec = KernelSpec(family, 1.0)
    P = rng.uniform(-1, 1, size=(20, 2, 3))
    feats = draw_rff(spec, 3, 2**16, seed=5)
    for x, xp in P:
        approx = feats.transform(x[None]) @ feats.transform(xp[None]).T
        assert abs(approx[0, 0] - kernel_cross(spec, x[None], xp[None])[0, 0]) <= 0.02


def test_independent_single_leaf_exact():
    X = np.random.default_rng(5).normal(size=(7, 2))
    spec = KernelSpec("gaussian", 1.0, 1e-3)
    ik = independent_gram(spec, X, build_tree(X, 8, 4, 0))
    np.testing.assert_array_equal(ik.materialize(), kernel_cross(spec, X))


def test_independent_cross_leaf_zero_and_pd():
    X = np.random.default_rng(6).normal(size=(64, 2))
    spec = KernelSpec("laplace", 1.0, 1e-3)
    tree = build_tree(X, 8, 4, 1)
    ik = independent_gram(spec, X, tree)
    M = ik.materialize()
    owner = tree.leaf_of_position()[np.argsort(tree.perm)]
    assert np.all(M[owner[:, None] != owner[None, :]] == 0)
    for b in ik.blocks.values():
        assert np.linalg.eigvalsh(b).min() > 0


def test_independent_solve_and_cross():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(60, 2))
    spec = KernelSpec("gaussian", 0.7, 1e-4)
    tree = build_tree(X, 10, 5, 2)
    ik = independent_gram(spec, X, tree)
    y = rng.normal(size=60)
    w = ik.solve(y, 0.01)
    np.testing.assert_allclose((ik.materialize() + 0.01 * np.eye(60)) @ w, y, atol=1e-9)
    Q = rng.normal(size=(9, 2))
    from hckernel import locate_leaves

    leaf = locate_leaves(tree, Q)
    owner = tree.leaf_of_position()[np.argsort(tree.perm)]
    Kq = kernel_cross(spec.with_jitter(0), X, Q) * (owner[:, None] == leaf[None, :])
    np.testing.assert_allclose(ik.cross(w, Q), w @ Kq, rtol=1e-12, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(n=st.integers(3, 80), r=st.integers(1, 10), seed=st.integers(0, 10**6))
def test_nystrom_never_exceeds_exact_gram(n, r, seed):
    # the residual K - N is a Schur complement and therefore PSD
    X = np.random.default_rng(seed).normal(size=(n, 2))
    spec = KernelSpec("gaussian", 1.0, 1e-4)
    N = nystrom_gram(spec, X, sample_landmarks(n, r, seed))
    assert np.linalg.eigvalsh(kernel_cross(spec, X) - N).min() >= -1e-9
