"""Kernels on the joint context-action space.

A point ``w = (c, x)`` carries integer ids into the finite context and action
sets together with a concatenated real embedding.  Every kernel here is
normalized so that ``k(w, w) <= 1``.
"""

from dataclasses import dataclass, replace
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .errors import InvalidArgument, Unsupported

SE = "se"
MATERN = "matern"
LINEAR = "normalized_linear"
FAMILIES = (SE, MATERN, LINEAR)
MATERN_NUS = (0.5, 1.5, 2.5)


class Point(NamedTuple):
    context_id: int
    action_id: int
    embedding: np.ndarray


@dataclass(frozen=True, eq=False)
class PointSet:
    """Array-backed point list; ``index`` holds flat grid indices when known."""

    contexts: np.ndarray
    actions: np.ndarray
    embeddings: np.ndarray
    index: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.contexts)

    def __getitem__(self, i):
        return Point(int(self.contexts[i]), int(self.actions[i]), self.embeddings[i])

    def __iter__(self):
        return (self[i] for i in range(len(self)))


def make_point(context_id, action_id, embedding):
    emb = np.asarray(embedding, dtype=float).ravel()
    if not np.all(np.isfinite(emb)):
        raise InvalidArgument("point embedding must be finite")
    return Point(int(context_id), int(action_id), emb)


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus hyperparameters.

    ``lengthscale`` is ignored by the normalized linear kernel, which instead
    divides inner products by ``scale`` (the largest squared embedding norm of
    the instance, see :func:`normalized_for`).
    """

    family: str = SE
    lengthscale: float = 1.0
    nu: Optional[float] = None
    scale: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidArgument(f"unknown kernel family {self.family!r}")
        if self.family != LINEAR and not self.lengthscale > 0:
            raise InvalidArgument("lengthscale must be positive")
        if self.family == MATERN and self.nu not in MATERN_NUS:
            raise InvalidArgument(f"matern nu must be one of {MATERN_NUS}")
        if not self.scale > 0:
            raise InvalidArgument("scale must be positive")

    @property
    def finite_dimensional(self):
        return self.family == LINEAR


def normalized_for(spec, embeddings):
    """Bind a normalized linear kernel to an embedding table (no-op otherwise)."""
    if spec.family != LINEAR:
        return spec
    emb = np.asarray(embeddings, dtype=float)
    z = float(np.max(np.einsum("ij,ij->i", emb, emb)))
    if z <= 0:
        raise InvalidArgument("all embeddings are zero")
    return replace(spec, scale=z)


def gram(spec, x, y):
    """Kernel matrix between embedding arrays ``x`` (n, D) and ``y`` (m, D)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if x.shape[1] != y.shape[1]:
        raise InvalidArgument(f"embedding dimensions differ: {x.shape[1]} vs {y.shape[1]}")
    if spec.family == LINEAR:
        return (x @ y.T) / spec.scale
    d2 = cdist(x, y, "sqeuclidean")
    ell = spec.lengthscale
    if spec.family == SE:
        return np.exp(-0.5 * d2 / ell**2)
    r = np.sqrt(d2) / ell
    if spec.nu == 0.5:
        return np.exp(-r)
    if spec.nu == 1.5:
        a = np.sqrt(3.0) * r
        return (1.0 + a) * np.exp(-a)
    a = np.sqrt(5.0) * r
    return (1.0 + a + a**2 / 3.0) * np.exp(-a)


def embeddings_of(points):
    """Stack the embeddings of a point sequence into an (n, D) array."""
    if hasattr(points, "embeddings"):
        return np.asarray(points.embeddings, dtype=float)
    if len(points) == 0:
        raise InvalidArgument("point list is empty")
    emb = np.stack([np.asarray(p.embedding, dtype=float) for p in points])
    if emb.ndim != 2:
        raise InvalidArgument("embeddings must share one dimension")
    return emb


def kernel_eval(spec, u, v):
    return float(gram(spec, u.embedding[None, :], v.embedding[None, :])[0, 0])


def kernel_matrix(spec, a: Sequence[Point], b: Sequence[Point]):
    """Gram matrix ``[k(a_i, b_j)]``; exactly symmetric when ``a is b``."""
    ea = embeddings_of(a)
    if b is a:
        k = gram(spec, ea, ea)
        return 0.5 * (k + k.T)
    return gram(spec, ea, embeddings_of(b))


def kernel_vector(spec, s: Sequence[Point], w: Point):
    return gram(spec, embeddings_of(s), w.embedding[None, :])[:, 0]


def kernel_diag(spec, points):
    """``k(w, w)`` for every point."""
    emb = embeddings_of(points)
    if spec.family == LINEAR:
        return np.einsum("ij,ij->i", emb, emb) / spec.scale
    return np.ones(emb.shape[0])


def explicit_features(spec, w):
    """Finite-dimensional feature map with ``phi(u) @ phi(v) == k(u, v)``."""
    if spec.family != LINEAR:
        raise Unsupported(f"{spec.family} kernel has no finite feature map")
    emb = w.embedding if isinstance(w, Point) else embeddings_of(w)
    return np.asarray(emb, dtype=float) / np.sqrt(spec.scale)
