"""Synthetic contextual kernel-bandit environments on a finite grid."""

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateReward, InvalidArgument
from .kernels import KernelSpec, PointSet, gram, make_point, normalized_for


@dataclass(frozen=True, eq=False)
class Grid:
    """Finite context and action sets with real embeddings.

    Grid points are flattened as ``index = context * n_actions + action`` and
    embedded as the concatenation ``[context_embedding, action_embedding]``.
    """

    context_embeddings: np.ndarray
    action_embeddings: np.ndarray

    @property
    def n_contexts(self):
        return self.context_embeddings.shape[0]

    @property
    def n_actions(self):
        return self.action_embeddings.shape[0]

    @property
    def size(self):
        return self.n_contexts * self.n_actions

    def flat(self, c, x):
        return np.asarray(c) * self.n_actions + np.asarray(x)

    def embedding_table(self):
        nc, nx = self.n_contexts, self.n_actions
        ctx = np.repeat(self.context_embeddings, nx, axis=0)
        act = np.tile(self.action_embeddings, (nc, 1))
        return np.hstack([ctx, act])

    def points(self, index=None):
        """Grid points as a :class:`PointSet` (all of them, or the given flat indices)."""
        table = self.embedding_table()
        if index is None:
            index = np.arange(self.size)
        index = np.asarray(index, dtype=np.int64)
        return PointSet(index // self.n_actions, index % self.n_actions, table[index], index)

    def point(self, c, x):
        return make_point(c, x, np.concatenate([self.context_embeddings[c], self.action_embeddings[x]]))


def make_grid(n_contexts, n_actions, context_dim, action_dim, rng, layout="uniform"):
    """Embeddings in the unit cube; ``linspace`` spaces 1-d embeddings evenly."""
    if min(n_contexts, n_actions, context_dim, action_dim) < 1:
        raise InvalidArgument("grid sizes and dimensions must be positive")
    if layout == "linspace":
        if context_dim != 1 or action_dim != 1:
            raise InvalidArgument("linspace layout needs 1-d embeddings")
        ctx = np.linspace(0.0, 1.0, n_contexts)[:, None]
        act = np.linspace(0.0, 1.0, n_actions)[:, None]
    elif layout == "uniform":
        ctx = rng.random((n_contexts, context_dim))
        act = rng.random((n_actions, action_dim))
    else:
        raise InvalidArgument(f"unknown grid layout {layout!r}")
    return Grid(ctx, act)


@dataclass(frozen=True, eq=False)
class ContextDistribution:
    probabilities: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        if p.ndim != 1 or p.size == 0 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise InvalidArgument("context probabilities must be non-negative and sum to 1")
        object.__setattr__(self, "probabilities", p)

    @property
    def cdf(self):
        c = np.cumsum(self.probabilities)
        c[-1] = 1.0
        return c

    @property
    def support(self):
        return np.flatnonzero(self.probabilities > 0)


def sample_context(dist, rng):
    return int(sample_contexts(dist, rng, 1)[0])


def sample_contexts(dist, rng, n):
    """Inverse-CDF categorical draws; ``n`` batched draws equal ``n`` single draws."""
    u = rng.random(n)
    return np.minimum(np.searchsorted(dist.cdf, u, side="right"), dist.probabilities.size - 1)


@dataclass(frozen=True, eq=False)
class RkhsReward:
    """``f(w) = sum_j alpha_j k(w, z_j)`` with RKHS norm at most ``norm_bound``."""

    spec: KernelSpec
    centers: np.ndarray
    coefficients: np.ndarray
    norm_bound: float

    def __call__(self, embeddings):
        return gram(self.spec, np.atleast_2d(embeddings), self.centers) @ self.coefficients

    def value(self, w):
        return float(self(w.embedding[None, :])[0])

    @property
    def rkhs_norm(self):
        k = gram(self.spec, self.centers, self.centers)
        return float(np.sqrt(max(self.coefficients @ k @ self.coefficients, 0.0)))


def make_rkhs_reward(spec, centers, raw_coeffs, B, rng=None):
    """Rescale ``raw_coeffs`` so the RKHS norm equals ``min(B, original norm)``.

    ``rng`` is accepted for interface symmetry; the construction is deterministic.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    alpha = np.asarray(raw_coeffs, dtype=float).ravel()
    if centers.shape[0] != alpha.size or alpha.size < 1:
        raise InvalidArgument("need one coefficient per center")
    if not B > 0:
        raise InvalidArgument("norm bound must be positive")
    if not np.any(alpha):
        raise DegenerateReward("all coefficients are zero")
    k = gram(spec, centers, centers)
    norm = float(np.sqrt(max(alpha @ k @ alpha, 0.0)))
    if norm == 0.0:
        raise DegenerateReward("coefficients give the zero function")
    if norm > B:
        alpha = alpha * (B / norm)
    return RkhsReward(spec, centers, alpha, float(B))


def observe(f, w, rng, noise_scale=1.0):
    return float(observe_values(np.array([f.value(w)]), f.norm_bound, rng, noise_scale)[0])


def observe_values(values, B, rng, noise_scale=1.0):
    """Noisy observations ``f + eta`` with ``eta ~ U[-a, a]``, ``a = noise_scale * (B - |f|)``.

    One uniform draw per value, so batched and single calls consume the stream
    identically.  The noise is zero-mean and keeps ``|y| <= B`` exactly.
    """
    values = np.asarray(values, dtype=float)
    u = rng.random(values.shape)
    half = noise_scale * np.maximum(B - np.abs(values), 0.0)
    y = values + half * (2.0 * u - 1.0)
    return np.clip(y, -B, B)


def best_action(f_values, c, actions):
    """Argmax over ``actions`` of ``f(c, x)``; ties go to the smallest action id.

    ``f_values`` is the ``(n_contexts, n_actions)`` table of true rewards.
    """
    actions = np.asarray(sorted(actions))
    if actions.size == 0:
        raise InvalidArgument("action set is empty")
    vals = np.asarray(f_values)[c, actions]
    i = int(np.argmax(vals))
    return int(actions[i]), float(vals[i])


@dataclass(frozen=True, eq=False)
class Instance:
    """A full problem instance: grid, kernel, context law, reward and noise level."""

    grid: Grid
    spec: KernelSpec
    contexts: ContextDistribution
    reward: RkhsReward
    noise_scale: float
    seed: Optional[int] = None

    @property
    def B(self):
        return self.reward.norm_bound

    def reward_table(self):
        """True rewards as an ``(n_contexts, n_actions)`` array."""
        return self.reward(self.grid.embedding_table()).reshape(self.grid.n_contexts, self.grid.n_actions)

    def grid_gram(self):
        table = self.grid.embedding_table()
        k = gram(self.spec, table, table)
        return 0.5 * (k + k.T)

    def to_dict(self):
        return {
            "seed": self.seed,
            "kernel": {
                "family": self.spec.family,
                "lengthscale": self.spec.lengthscale,
                "nu": self.spec.nu,
                "scale": self.spec.scale,
            },
            "context_embeddings": self.grid.context_embeddings.tolist(),
            "action_embeddings": self.grid.action_embeddings.tolist(),
            "context_probabilities": self.contexts.probabilities.tolist(),
            "centers": self.reward.centers.tolist(),
            "coefficients": self.reward.coefficients.tolist(),
            "B": self.reward.norm_bound,
            "noise_scale": self.noise_scale,
        }

    @classmethod
    def from_dict(cls, d):
        spec = KernelSpec(**d["kernel"])
        grid = Grid(np.asarray(d["context_embeddings"], dtype=float), np.asarray(d["action_embeddings"], dtype=float))
        reward = RkhsReward(
            spec, np.asarray(d["centers"], dtype=float), np.asarray(d["coefficients"], dtype=float), float(d["B"])
        )
        return cls(grid, spec, ContextDistribution(d["context_probabilities"]), reward, float(d["noise_scale"]), d["seed"])


def save_instance(inst, path):
    with open(path, "w") as fh:
        json.dump(inst.to_dict(), fh, indent=1)


def load_instance(path):
    with open(path) as fh:
        return Instance.from_dict(json.load(fh))


def make_instance(
    rng,
    n_contexts,
    n_actions,
    spec,
    B=1.0,
    context_dim=1,
    action_dim=1,
    layout="uniform",
    context_probabilities=None,
    n_centers=8,
    noise_scale=1.0,
    seed=None,
):
    """Draw a random instance: grid, reward centers on the grid, N(0,1) raw coefficients."""
    grid = make_grid(n_contexts, n_actions, context_dim, action_dim, rng, layout)
    table = grid.embedding_table()
    spec = normalized_for(spec, table)
    if context_probabilities is None:
        context_probabilities = np.full(n_contexts, 1.0 / n_contexts)
    contexts = ContextDistribution(context_probabilities)
    idx = rng.choice(grid.size, size=min(n_centers, grid.size), replace=False)
    coeffs = rng.standard_normal(idx.size)
    reward = make_rkhs_reward(spec, table[np.sort(idx)], coeffs, B)
    return Instance(grid, spec, contexts, reward, float(noise_scale), seed)
