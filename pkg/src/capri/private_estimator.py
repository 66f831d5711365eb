"""Private projected kernel-ridge estimator.

Given a dataset ``(W, y)`` and two independent i.i.d. copies ``S`` (basis) and
``R`` (covariance surrogate) of the query distribution, the estimator is

    mu(w) = k_S(w)^T M^{-1/2} (M^{-1/2} K_SW y + z),   M = K_SR K_RS + tau K_SS

with Gaussian noise ``z`` added once per dataset (JDP) or once per data point
(LDP).  ``M`` and ``K_SS`` are usually rank deficient because ``S`` and ``R``
repeat points, so both are handled through :class:`FlooredPSD`, which applies
``max(lambda, floor)`` to every eigenvalue.
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import numerics
from .errors import InvalidArgument
from .gp import LabeledDataset
from .kernels import KernelSpec, Point, kernel_diag, kernel_matrix, kernel_vector

JDP = "jdp"
LDP = "ldp"
NONPRIVATE = "nonprivate"
MODES = (JDP, LDP, NONPRIVATE)


@dataclass(frozen=True)
class ProjectionPair:
    S: object
    R: object
    tau: float

    def __post_init__(self):
        if len(self.S) != len(self.R):
            raise InvalidArgument("S and R must have the same size")
        if len(self.S) == 0:
            raise InvalidArgument("projection sets are empty")
        if not self.tau > 0:
            raise InvalidArgument("tau must be positive")


@dataclass(frozen=True)
class PrivacyParams:
    epsilon: float
    delta: float
    mode: str = JDP
    horizon: int = 2

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidArgument(f"unknown privacy mode {self.mode!r}")
        if not self.epsilon > 0:
            raise InvalidArgument("epsilon must be positive")
        if not 0 < self.delta < 1:
            raise InvalidArgument("delta must lie in (0, 1)")
        if self.horizon < 2:
            raise InvalidArgument("horizon must be at least 2")


class NoiseSource:
    """Gaussian noise drawn from a dedicated generator, with draw accounting.

    ``draws`` counts noise *vectors*.  With ``record=True`` every vector is kept
    so a caller can replay the accumulation.
    """

    def __init__(self, rng, record=False):
        self.rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        self.draws = 0
        self.recorded = [] if record else None

    def gaussian(self, scale, dim, count=1):
        z = self.rng.normal(0.0, scale, size=(count, dim))
        self.draws += count
        if self.recorded is not None:
            self.recorded.extend(z)
        return z


def _noise_source(rng):
    return rng if isinstance(rng, NoiseSource) else NoiseSource(rng)


class FlooredPSD:
    """Spectral calculus on a PSD matrix with eigenvalues lifted to ``floor``.

    Stores an orthonormal basis ``w`` for the eigenvalues above the floor.  With
    ``partial=True`` the orthogonal complement (null space plus any eigenvalue
    at or under the floor) is treated as having eigenvalue ``floor``.
    """

    def __init__(self, w, s, floor, partial):
        self.w = w
        self.s = s
        self.floor = floor
        self.partial = partial

    @classmethod
    def from_matrix(cls, m):
        lam, vec = numerics.sym_eig(m)
        floor = numerics.EIG_FLOOR * max(1.0, float(lam[0]))
        return cls(vec, numerics.clamp_spectrum(lam, floor), floor, partial=False)

    @classmethod
    def from_root(cls, root, idx):
        """Matrix ``E^T X E`` where ``root`` is ``X^{1/2}`` and ``E`` selects ``idx``.

        Only a grid-sized eigenproblem is solved: the nonzero spectrum of
        ``E^T X E`` equals that of ``root diag(counts) root``.
        """
        counts = np.bincount(idx, minlength=root.shape[0]).astype(float)
        lam, u = numerics.sym_eig((root * counts) @ root)
        floor = numerics.EIG_FLOOR * max(1.0, float(lam[0]))
        numerics.clamp_spectrum(lam, floor)
        keep = lam > floor
        basis = (root @ (u[:, keep] / np.sqrt(lam[keep])))[idx, :]
        return cls(basis, lam[keep], floor, partial=True)

    @property
    def dim(self):
        return self.w.shape[0]

    def power(self, x, p):
        coef = self.w.T @ x
        scale = self.s**p
        out = self.w @ (coef * (scale[:, None] if coef.ndim == 2 else scale))
        if self.partial:
            out = out + self.floor**p * (x - self.w @ coef)
        return out

    def inv_quad(self, x):
        """Column-wise ``x^T A^{-1} x`` under the floored spectrum."""
        coef = self.w.T @ x
        inv = 1.0 / self.s
        q = np.einsum("i...,i...->...", coef * (inv[:, None] if coef.ndim == 2 else inv), coef)
        if self.partial:
            resid = x - self.w @ coef
            q = q + np.einsum("i...,i...->...", resid, resid) / self.floor
        return q


class Projector:
    """Factorized ``M = K_SR K_RS + tau K_SS`` and ``K_SS`` for one projection pair."""

    def __init__(self, m, kss, tau):
        self.m = m
        self.kss = kss
        self.tau = float(tau)

    @classmethod
    def from_gram(cls, k_ss, k_sr, tau):
        k_ss = numerics.as_sym(k_ss)
        m = numerics.as_sym(k_sr @ k_sr.T + tau * k_ss)
        return cls(FlooredPSD.from_matrix(m), FlooredPSD.from_matrix(k_ss), tau)

    @classmethod
    def from_pair(cls, pair: ProjectionPair, spec: KernelSpec):
        k_ss = kernel_matrix(spec, pair.S, pair.S)
        k_sr = kernel_matrix(spec, pair.S, pair.R)
        return cls.from_gram(k_ss, k_sr, pair.tau)

    @classmethod
    def from_grid(cls, grid_gram, s_idx, r_idx, tau):
        """Same operator for ``S``, ``R`` given as indices into a finite grid.

        With ``G`` the grid Gram matrix, ``M = E_S^T (G D_R G + tau G) E_S`` and
        ``K_SS = E_S^T G E_S``, so all eigenproblems are grid-sized.
        """
        if len(s_idx) != len(r_idx):
            raise InvalidArgument("S and R must have the same size")
        g = numerics.as_sym(grid_gram)
        d_r = np.bincount(r_idx, minlength=g.shape[0]).astype(float)
        n = numerics.as_sym((g * d_r) @ g + tau * g)
        return cls(FlooredPSD.from_root(_psd_root(n), s_idx), FlooredPSD.from_root(_psd_root(g), s_idx), tau)

    @property
    def size(self):
        return self.m.dim

    def inv_sqrt(self, x):
        """``M^{-1/2} x`` for a vector or the columns of a matrix."""
        return self.m.power(x, -0.5)

    def inv(self, x):
        return self.m.power(x, -1.0)

    def variances(self, k_sq, k_qq):
        """Projected variance for query columns ``k_sq = K_{S,Q}`` with diagonals ``k_qq``.

        Evaluates ``k^T M^{-1} k + (k(w,w) - k^T K_SS^{-1} k) / tau``, which equals
        ``(k(w,w) - k^T V k) / tau`` whenever ``K_SS`` is invertible.
        """
        stat = self.inv_sqrt(k_sq)
        fit = np.einsum("i...,i...->...", stat, stat)
        resid = np.maximum(k_qq - self.kss.inv_quad(k_sq), 0.0)
        return fit + resid / self.tau


def _psd_root(a):
    lam, vec = numerics.sym_eig(a)
    numerics.clamp_spectrum(lam, numerics.EIG_FLOOR * max(1.0, float(lam[0])))
    return numerics.as_sym((vec * np.sqrt(np.maximum(lam, 0.0))) @ vec.T)


@dataclass
class PrivateEstimator:
    S: object
    spec: KernelSpec
    weights: np.ndarray
    sigma0: float
    noise_draw_count: int

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if not np.all(np.isfinite(self.weights)):
            raise InvalidArgument("estimator weights must be finite")

    def predict_many(self, points):
        return kernel_matrix(self.spec, points, self.S) @ self.weights


def predict(est: PrivateEstimator, w: Point):
    return float(kernel_vector(est.spec, est.S, w) @ est.weights)


def projected_variance(pair, spec, w):
    return float(projected_variances(pair, spec, [w])[0])


def projected_variances(pair, spec, points, projector=None):
    proj = projector or Projector.from_pair(pair, spec)
    k_sq = kernel_matrix(spec, pair.S, points)
    return proj.variances(k_sq, kernel_diag(spec, points))


def max_projected_variance(pair, spec, support, projector=None):
    """Largest projected variance over a finite support (exhaustive scan)."""
    if len(support) == 0:
        raise InvalidArgument("support is empty")
    return float(np.max(projected_variances(pair, spec, support, projector)))


def noise_scale(sigma_max, B, T, eps, delta_dp):
    """Gaussian-mechanism scale ``sigma_max * 4 B log T / eps * sqrt(log(1.25 log T / delta_dp))``."""
    if sigma_max < 0 or not B > 0 or not eps > 0 or not 0 < delta_dp < 1 or T < 2:
        raise InvalidArgument("noise_scale arguments out of range")
    log_t = math.log(T)
    inner = 1.25 * log_t / delta_dp
    if inner <= 1:
        raise InvalidArgument("1.25 log T / delta_dp must exceed 1")
    return sigma_max * (4.0 * B * log_t / eps) * math.sqrt(math.log(inner))


def per_point_statistic(pair, spec, w, y, projector=None):
    """``y * M^{-1/2} k_S(w)``; its norm is at most ``|y| * sqrt(projected variance)``."""
    proj = projector or Projector.from_pair(pair, spec)
    return y * proj.inv_sqrt(kernel_vector(spec, pair.S, w))


def _resolve_sigma0(priv, data_bound, sigma_max, sigma0):
    if sigma0 is not None:
        return float(sigma0)
    if priv.mode == NONPRIVATE:
        return 0.0
    return noise_scale(sigma_max, data_bound, priv.horizon, priv.epsilon, priv.delta)


def assemble_jdp(pair, spec, data: LabeledDataset, priv: PrivacyParams, sigma_max, rng, sigma0=None):
    """Build the estimator with one noise vector for the whole dataset.

    ``sigma_max`` is the square root of the maximal projected variance over the
    sampling support; ``sigma0`` overrides the calibrated noise scale.
    NonPrivate mode adds no noise.
    """
    if priv.mode == LDP:
        raise InvalidArgument("assemble_jdp called with LDP parameters")
    if len(data) != len(pair.S):
        raise InvalidArgument("dataset size must equal |S|")
    proj = Projector.from_pair(pair, spec)
    k_sw = kernel_matrix(spec, pair.S, data.points)
    g = proj.inv_sqrt(k_sw @ data.rewards)
    s0 = _resolve_sigma0(priv, data.reward_bound, sigma_max, sigma0)
    draws = 0
    if priv.mode == JDP:
        noise = _noise_source(rng)
        g = g + noise.gaussian(s0, proj.size)[0]
        draws = 1
    return PrivateEstimator(pair.S, spec, proj.inv_sqrt(g), s0, draws)


def ldp_upload(statistic, sigma0, noise):
    """Client-side privatization of one per-point statistic."""
    return statistic + noise.gaussian(sigma0, statistic.shape[0])[0]


def assemble_ldp(pair, spec, stream, priv: PrivacyParams, sigma_max, rng, reward_bound=None, sigma0=None):
    """Build the estimator from locally privatized per-point uploads.

    ``stream`` is a :class:`LabeledDataset` or an iterable of ``(w_t, y_t)``
    (then ``reward_bound`` is required).  Each statistic receives its own noise
    vector before leaving the client; the server only sums uploads.
    """
    if priv.mode != LDP:
        raise InvalidArgument("assemble_ldp needs LDP parameters")
    if isinstance(stream, LabeledDataset):
        reward_bound = stream.reward_bound
        stream = list(zip(stream.points, stream.rewards))
    else:
        stream = list(stream)
    if reward_bound is None and sigma0 is None:
        raise InvalidArgument("reward_bound is required to calibrate the noise")
    if len(stream) != len(pair.S):
        raise InvalidArgument("stream length must equal |S|")
    proj = Projector.from_pair(pair, spec)
    s0 = _resolve_sigma0(priv, reward_bound, sigma_max, sigma0)
    noise = _noise_source(rng)
    before = noise.draws
    total = np.zeros(proj.size)
    for w, y in stream:
        total += ldp_upload(per_point_statistic(pair, spec, w, y, proj), s0, noise)
    return PrivateEstimator(pair.S, spec, proj.inv_sqrt(total), s0, noise.draws - before)


def nonprivate_projected_mean(data, pair, spec, w):
    """``k_S(w) (K_SR K_RS + tau K_SS)^{-1} K_SW y``."""
    if len(data) == 0:
        return 0.0
    proj = Projector.from_pair(pair, spec)
    k_sw = kernel_matrix(spec, pair.S, data.points)
    return float(kernel_vector(spec, pair.S, w) @ proj.inv(k_sw @ data.rewards))
