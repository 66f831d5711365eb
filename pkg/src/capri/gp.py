"""Non-private GP-model quantities: posterior mean/variance, information gain,
and an empirical covariance-concentration statistic for finite feature maps."""

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from . import numerics
from .errors import InvalidArgument, Unsupported
from .kernels import Point, explicit_features, kernel_diag, kernel_matrix, kernel_vector


@dataclass
class LabeledDataset:
    points: List[Point]
    rewards: np.ndarray
    reward_bound: float

    def __post_init__(self):
        self.rewards = np.asarray(self.rewards, dtype=float).ravel()
        if len(self.points) != self.rewards.size:
            raise InvalidArgument("points and rewards differ in length")
        if not self.reward_bound > 0:
            raise InvalidArgument("reward bound must be positive")
        if self.rewards.size and np.max(np.abs(self.rewards)) > self.reward_bound:
            raise InvalidArgument("reward exceeds the bound B")

    def __len__(self):
        return len(self.points)


def _check_tau(tau):
    if not tau > 0:
        raise InvalidArgument("tau must be positive")


def posterior_mean(data, tau, spec, w):
    """``k_W(w)^T (tau I + K_WW)^{-1} y``; zero for an empty dataset."""
    _check_tau(tau)
    if len(data) == 0:
        return 0.0
    k = kernel_matrix(spec, data.points, data.points)
    alpha = numerics.solve_regularized(k, tau, data.rewards)
    return float(kernel_vector(spec, data.points, w) @ alpha)


def posterior_variance(points, tau, spec, w):
    """``k(w,w) - k_W(w)^T (tau I + K_WW)^{-1} k_W(w)``, clamped to ``[0, k(w,w)]``."""
    _check_tau(tau)
    kww = float(kernel_diag(spec, [w])[0])
    if len(points) == 0:
        return kww
    k = kernel_matrix(spec, points, points)
    kw = kernel_vector(spec, points, w)
    var = kww - kw @ numerics.solve_regularized(k, tau, kw)
    return float(min(max(var, 0.0), kww))


def information_gain_from_gram(k, tau):
    lam, _ = numerics.sym_eig(k)
    lam = np.maximum(lam, 0.0)
    return float(0.5 * np.sum(np.log1p(lam / tau)))


def information_gain(points, tau, spec):
    """``0.5 * log det(I + K / tau)`` from the eigenvalues of ``K``."""
    _check_tau(tau)
    if len(points) == 0:
        return 0.0
    return information_gain_from_gram(kernel_matrix(spec, points, points), tau)


def information_gain_counts(grid_gram, counts, tau):
    """Information gain of a multiset of grid points given visit counts.

    Uses ``det(I + K_WW / tau) == det(I + D^{1/2} G D^{1/2} / tau)`` where
    ``G`` is the Gram matrix of the distinct grid points and ``D`` the counts,
    so the cost depends on the grid size rather than the sample size.
    """
    _check_tau(tau)
    root = np.sqrt(np.asarray(counts, dtype=float))
    if not np.any(root):
        return 0.0
    return information_gain_from_gram(root[:, None] * grid_gram * root[None, :], tau)


def covariance_concentration_stat(spec, measure, sample, tau):
    """Spectral distance between the empirical and expected regularized covariance.

    ``measure`` is a list of ``(point, probability)`` pairs with the exact
    population; ``sample`` holds ``T`` draws.  Returns
    ``|| Z^{-1/2} (sum_i phi(r_i) phi(r_i)^T + tau I) Z^{-1/2} - I ||_2`` with
    ``Z = T * E[phi phi^T] + tau I``.
    """
    if not spec.finite_dimensional:
        raise Unsupported("covariance statistic needs an explicit feature map")
    _check_tau(tau)
    support = [p for p, _ in measure]
    probs = np.array([q for _, q in measure], dtype=float)
    if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
        raise InvalidArgument("measure probabilities must be non-negative and sum to 1")
    phi = explicit_features(spec, support)
    dim = phi.shape[1]
    cov = (phi * probs[:, None]).T @ phi
    n = len(sample)
    z = n * cov + tau * np.eye(dim)
    r = tau * np.eye(dim)
    if n:
        ps = explicit_features(spec, sample)
        r = r + ps.T @ ps
    zi = numerics.inv_sqrt_psd(z, floor=numerics.EIG_FLOOR * tau)
    dev = zi @ r @ zi - np.eye(dim)
    return float(np.linalg.norm(numerics.as_sym(dev), 2))
