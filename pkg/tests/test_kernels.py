import numpy as np
import pytest
from numpy.testing import assert_allclose

from capri.errors import InvalidArgument, Unsupported
from capri.kernels import (
    LINEAR,
    MATERN,
    SE,
    KernelSpec,
    PointSet,
    explicit_features,
    gram,
    kernel_diag,
    kernel_eval,
    kernel_matrix,
    kernel_vector,
    make_point,
    normalized_for,
)


def test_se_values():
    spec = KernelSpec(SE, 1.0)
    u = make_point(0, 0, [0.0, 0.0])
    assert kernel_eval(spec, u, u) == 1.0
    v = make_point(0, 1, [1.0, 1.0])
    assert_allclose(kernel_eval(spec, u, v), np.exp(-1.0), rtol=1e-14)


@pytest.mark.parametrize("nu,expected", [
    (0.5, np.exp(-1.0)),
    (1.5, (1 + np.sqrt(3)) * np.exp(-np.sqrt(3))),
    (2.5, (1 + np.sqrt(5) + 5 / 3) * np.exp(-np.sqrt(5))),
])
def test_matern_unit_distance(nu, expected):
    spec = KernelSpec(MATERN, 1.0, nu)
    u, v = make_point(0, 0, [0.0]), make_point(0, 1, [1.0])
    assert_allclose(kernel_eval(spec, u, v), expected, rtol=1e-14)
    assert kernel_eval(spec, u, u) == 1.0


def test_spec_validation():
    with pytest.raises(InvalidArgument):
        KernelSpec("rbf")
    with pytest.raises(InvalidArgument):
        KernelSpec(MATERN, 1.0, 2.0)
    with pytest.raises(InvalidArgument):
        KernelSpec(SE, 0.0)


def test_dimension_mismatch():
    with pytest.raises(InvalidArgument):
        gram(KernelSpec(), np.zeros((2, 2)), np.zeros((2, 3)))


def test_kernel_matrix_small_cases():
    spec = KernelSpec(SE, 0.7)
    w = make_point(0, 0, [0.3, 0.1])
    assert_allclose(kernel_matrix(spec, [w], [w]), [[1.0]])
    assert_allclose(kernel_matrix(spec, [w, w], [w, w]), np.ones((2, 2)))
    with pytest.raises(InvalidArgument):
        kernel_matrix(spec, [], [w])


@pytest.mark.parametrize("spec", [KernelSpec(SE, 0.4), KernelSpec(MATERN, 0.4, 1.5), KernelSpec(MATERN, 0.4, 0.5)])
def test_gram_is_psd(rng, spec):
    pts = PointSet(np.zeros(10), np.arange(10), rng.random((10, 3)))
    k = kernel_matrix(spec, pts, pts)
    assert_allclose(k, k.T)
    assert np.linalg.eigvalsh(k).min() >= -1e-8


def test_kernel_vector_single():
    spec = KernelSpec(SE, 0.5)
    w = make_point(1, 2, [0.2])
    assert_allclose(kernel_vector(spec, [w], w), [1.0])


def test_linear_orthogonal_vector():
    emb = np.eye(3)
    spec = normalized_for(KernelSpec(LINEAR), emb)
    s = [make_point(0, i, emb[i]) for i in range(3)]
    assert_allclose(kernel_vector(spec, s, s[1]), [0.0, 1.0, 0.0])


def test_linear_normalization(rng):
    emb = rng.standard_normal((12, 4))
    spec = normalized_for(KernelSpec(LINEAR), emb)
    d = kernel_diag(spec, PointSet(np.zeros(12), np.arange(12), emb))
    assert d.max() == pytest.approx(1.0)
    assert np.all(d <= 1.0 + 1e-15)


def test_explicit_features():
    spec = normalized_for(KernelSpec(LINEAR), np.array([[1.0, 0.0, 0.0]]))
    assert_allclose(explicit_features(spec, make_point(0, 0, [1, 0, 0])), [1, 0, 0])
    with pytest.raises(Unsupported):
        explicit_features(KernelSpec(SE), make_point(0, 0, [1.0]))


def test_explicit_features_reproduce_kernel(rng):
    emb = rng.standard_normal((40, 3))
    spec = normalized_for(KernelSpec(LINEAR), emb)
    for i in range(20):
        u, v = make_point(0, 0, emb[2 * i]), make_point(0, 1, emb[2 * i + 1])
        dot = explicit_features(spec, u) @ explicit_features(spec, v)
        assert abs(dot - kernel_eval(spec, u, v)) < 1e-12


def test_pointset_roundtrip(rng):
    ps = PointSet(np.array([0, 1]), np.array([3, 4]), rng.random((2, 2)))
    assert len(ps) == 2
    p = ps[1]
    assert (p.context_id, p.action_id) == (1, 4)
    assert [q.action_id for q in ps] == [3, 4]
