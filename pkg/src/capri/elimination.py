"""Explore-then-eliminate contextual kernel bandit with private estimates.

Epochs double in length starting from ``ceil(sqrt(T))``.  Inside an epoch the
learner plays uniformly over the surviving actions of each context, so the
played points are i.i.d. and independent of the rewards seen in that epoch.
At the end of an epoch the private estimator is built and every action whose
estimate trails the per-context maximum by more than ``4 * Delta_r`` is removed.
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import gp
from .environment import Instance, observe_values, sample_contexts
from .errors import InvalidArgument
from .private_estimator import (
    JDP,
    LDP,
    NONPRIVATE,
    NoiseSource,
    PrivacyParams,
    ProjectionPair,
    Projector,
    noise_scale,
)

STREAMS = ("instance", "contexts", "actions", "observations", "projection", "privacy")
THEORY = "theory"
ORACLE = "oracle"


def seed_streams(seed):
    """Independent generators for every source of randomness in one run."""
    children = np.random.SeedSequence(seed).spawn(len(STREAMS))
    return {name: np.random.default_rng(ss) for name, ss in zip(STREAMS, children)}


def beta(delta, B, tau, T):
    if not 0 < delta < 1:
        raise InvalidArgument("delta must lie in (0, 1)")
    a = math.log(168.0 * T / delta)
    return (
        90.0 * B * math.sqrt(a)
        + 52.0 * B * math.sqrt(a * math.log(12.0 / delta)) / math.sqrt(tau)
        + 3.0 * B * math.sqrt(2.0 * math.log(6.0 / delta))
        + math.sqrt(24.0 * tau)
    )


def beta1(eps, delta_dp, delta, B, T):
    if not delta > 0 or not delta_dp > 0 or not eps > 0:
        raise InvalidArgument("beta1 arguments out of range")
    log_t = math.log(T)
    inner = 1.25 * log_t / delta_dp
    if inner <= 1:
        raise InvalidArgument("1.25 log T / delta_dp must exceed 1")
    return (8.0 * B * log_t / eps) * math.log(3.0 / delta) * math.sqrt(math.log(inner))


def beta1_ldp(T_r, eps, delta_dp, delta, B, T):
    return math.sqrt(T_r) * beta1(eps, delta_dp, delta, B, T)


def confidence_width(beta_v, beta1_v, sigma_max_sq):
    return beta_v * math.sqrt(sigma_max_sq) + beta1_v * sigma_max_sq


class ActiveSets:
    """Surviving action ids per context, each kept as a sorted int array."""

    def __init__(self, sets):
        self.sets = [np.unique(np.asarray(s, dtype=np.int64)) for s in sets]
        if any(s.size == 0 for s in self.sets):
            raise InvalidArgument("every context needs at least one active action")

    @classmethod
    def full(cls, n_contexts, n_actions):
        return cls([np.arange(n_actions)] * n_contexts)

    def __getitem__(self, c):
        return self.sets[c]

    def __len__(self):
        return len(self.sets)

    def sizes(self):
        return np.array([s.size for s in self.sets])

    def issubset(self, other):
        return all(np.isin(a, b).all() for a, b in zip(self.sets, other.sets))

    def flat_support(self, n_actions, contexts=None):
        """Flat grid indices ``c * n_actions + x`` over the active pairs."""
        cs = range(len(self.sets)) if contexts is None else contexts
        return np.concatenate([c * n_actions + self.sets[c] for c in cs])


def choose_actions(active, contexts, rng):
    """Uniform draw from ``active[c]`` for each context; one uniform per step.

    Receives no reward information, which keeps in-epoch sampling independent
    of the observations.
    """
    u = rng.random(len(contexts))
    sizes = active.sizes()[contexts]
    pick = np.minimum((u * sizes).astype(np.int64), sizes - 1)
    out = np.empty(len(contexts), dtype=np.int64)
    for c in np.unique(contexts):
        m = contexts == c
        out[m] = active[c][pick[m]]
    return out


def prune(scores, active, delta_r):
    """Keep ``x`` with ``scores[c, x] >= max_{x' in X_r(c)} scores[c, x'] - 4 delta_r``."""
    if delta_r < 0:
        raise InvalidArgument("delta_r must be non-negative")
    scores = np.asarray(scores)
    kept = []
    for c, acts in enumerate(active.sets):
        vals = scores[c, acts]
        kept.append(acts[vals >= vals.max() - 4.0 * delta_r])
    return ActiveSets(kept)


def sample_projection_sets(grid, dist, active, T_r, rng, tau=1.0):
    """Two independent i.i.d. samples of ``T_r`` context-then-uniform-action pairs."""
    rng_s, rng_r = rng.spawn(2)
    sets = []
    for g in (rng_s, rng_r):
        ctx = sample_contexts(dist, g, T_r)
        sets.append(grid.points(grid.flat(ctx, choose_actions(active, ctx, g))))
    return ProjectionPair(sets[0], sets[1], tau)


@dataclass
class RunConfig:
    horizon: int
    tau: float = 1.0
    delta_err: float = 0.05
    width_scale: float = 1.0
    width_rule: str = THEORY

    def __post_init__(self):
        if self.horizon < 4:
            raise InvalidArgument("horizon must be at least 4")
        if not self.tau > 0:
            raise InvalidArgument("tau must be positive")
        if not 0 < self.delta_err < 1:
            raise InvalidArgument("delta_err must lie in (0, 1)")
        if not self.width_scale >= 0:
            raise InvalidArgument("width_scale must be non-negative")
        if self.width_rule not in (THEORY, ORACLE):
            raise InvalidArgument(f"unknown width rule {self.width_rule!r}")


@dataclass
class EpochRecord:
    epoch: int
    length: int
    steps: int
    completed: bool
    sigma_max_sq: float
    sigma0: float
    noise_draws: int
    delta_r: float = float("nan")
    simple_regret: float = float("nan")
    info_gain: float = 0.0
    active_sizes: Optional[np.ndarray] = None
    s_index: Optional[np.ndarray] = None
    r_index: Optional[np.ndarray] = None
    max_error: float = float("nan")


@dataclass
class RegretLog:
    contexts: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    inst_regret: np.ndarray
    epochs: np.ndarray
    epoch_records: List[EpochRecord] = field(default_factory=list)
    active_history: List[ActiveSets] = field(default_factory=list)
    noise_draws: int = 0

    def __len__(self):
        return len(self.contexts)

    @property
    def cumulative(self):
        return np.cumsum(self.inst_regret)


def _epoch_width(cfg, priv, inst, T_r, sigma_max_sq):
    T = cfg.horizon
    n_w = inst.grid.size
    d = cfg.delta_err / (n_w * T * math.log(T))
    b = beta(d, inst.B, cfg.tau, T)
    if priv.mode == NONPRIVATE:
        b1 = 0.0
    elif priv.mode == LDP:
        b1 = beta1_ldp(T_r, priv.epsilon, priv.delta, d, inst.B, T)
    else:
        b1 = beta1(priv.epsilon, priv.delta, d, inst.B, T)
    return cfg.width_scale * confidence_width(b, b1, sigma_max_sq)


def run(inst: Instance, priv: PrivacyParams, cfg: RunConfig, streams):
    """Play ``cfg.horizon`` rounds and return the full :class:`RegretLog`.

    ``streams`` is the dict from :func:`seed_streams` (or a seed).  The
    ``privacy`` stream may be a :class:`NoiseSource` for draw accounting.
    """
    if not isinstance(streams, dict):
        streams = seed_streams(streams)
    T = cfg.horizon
    if priv.horizon != T:
        raise InvalidArgument("privacy horizon must match the run horizon")
    grid = inst.grid
    nx = grid.n_actions
    g = inst.grid_gram()
    kdiag = np.diag(g).copy()
    f_tab = inst.reward_table()
    f_flat = f_tab.ravel()
    best = f_tab.max(axis=1)
    noise = streams["privacy"] if isinstance(streams["privacy"], NoiseSource) else NoiseSource(streams["privacy"])
    draws_at_start = noise.draws
    ctx_support = inst.contexts.support

    log_ctx, log_act, log_y, log_reg, log_ep = [], [], [], [], []
    records = []
    active = ActiveSets.full(grid.n_contexts, nx)
    history = [active]
    T_r = math.ceil(math.sqrt(T))
    pair = sample_projection_sets(grid, inst.contexts, active, T_r, streams["projection"], cfg.tau)
    t, r = 0, 1
    while t < T:
        s_idx, r_idx = pair.S.index, pair.R.index
        proj = Projector.from_grid(g, s_idx, r_idx, cfg.tau)
        supp = active.flat_support(nx, ctx_support)
        sigma_max_sq = float(np.max(proj.variances(g[np.ix_(s_idx, supp)], kdiag[supp])))
        sigma0 = 0.0
        if priv.mode != NONPRIVATE:
            sigma0 = noise_scale(math.sqrt(sigma_max_sq), inst.B, T, priv.epsilon, priv.delta)
        draws_before = noise.draws

        n = min(T_r, T - t)
        ctx = sample_contexts(inst.contexts, streams["contexts"], n)
        act = choose_actions(active, ctx, streams["actions"])
        idx = grid.flat(ctx, act)
        y = observe_values(f_flat[idx], inst.B, streams["observations"], inst.noise_scale)
        reg = best[ctx] - f_flat[idx]
        log_ctx.append(ctx)
        log_act.append(act)
        log_y.append(y)
        log_reg.append(reg)
        log_ep.append(np.full(n, r))

        # per-point statistics y_t M^{-1/2} k_S(w_t), tabulated over the grid
        table = proj.inv_sqrt(g[s_idx, :])
        if priv.mode == LDP:
            uploads = (table[:, idx] * y).T + noise.gaussian(sigma0, T_r, count=n)
            stat = uploads.sum(axis=0)
        else:
            stat = table @ np.bincount(idx, weights=y, minlength=grid.size)

        rec = EpochRecord(
            epoch=r,
            length=T_r,
            steps=n,
            completed=n == T_r,
            sigma_max_sq=sigma_max_sq,
            sigma0=sigma0,
            noise_draws=0,
            info_gain=gp.information_gain_counts(g, np.bincount(idx, minlength=grid.size), cfg.tau),
            active_sizes=active.sizes(),
            s_index=s_idx,
            r_index=r_idx,
        )
        records.append(rec)
        t += n
        if not rec.completed:
            rec.noise_draws = noise.draws - draws_before
            break

        if priv.mode == JDP:
            stat = stat + noise.gaussian(sigma0, T_r)[0]
        rec.noise_draws = noise.draws - draws_before
        weights = proj.inv_sqrt(stat)
        mu = (g[:, s_idx] @ weights).reshape(grid.n_contexts, nx)
        rec.max_error = float(np.max(np.abs(mu.ravel()[supp] - f_flat[supp])))
        # context-weighted regret of recommending argmax mu over the active set
        pick = np.array([acts[np.argmax(mu[c, acts])] for c, acts in enumerate(active.sets)])
        gap = best - f_tab[np.arange(grid.n_contexts), pick]
        rec.simple_regret = float(inst.contexts.probabilities @ gap)
        if cfg.width_rule == ORACLE:
            rec.delta_r = rec.max_error
        else:
            rec.delta_r = _epoch_width(cfg, priv, inst, T_r, sigma_max_sq)
        active = prune(mu, active, rec.delta_r)
        history.append(active)
        r += 1
        T_r *= 2
        if t < T:
            pair = sample_projection_sets(grid, inst.contexts, active, T_r, streams["projection"], cfg.tau)

    return RegretLog(
        contexts=np.concatenate(log_ctx),
        actions=np.concatenate(log_act),
        rewards=np.concatenate(log_y),
        inst_regret=np.concatenate(log_reg),
        epochs=np.concatenate(log_ep),
        epoch_records=records,
        active_history=history,
        noise_draws=noise.draws - draws_at_start,
    )


def run_uniform(inst: Instance, horizon, streams):
    """Baseline playing uniformly over all actions, on the same context and noise streams."""
    if not isinstance(streams, dict):
        streams = seed_streams(streams)
    grid = inst.grid
    f_tab = inst.reward_table()
    ctx = sample_contexts(inst.contexts, streams["contexts"], horizon)
    act = choose_actions(ActiveSets.full(grid.n_contexts, grid.n_actions), ctx, streams["actions"])
    idx = grid.flat(ctx, act)
    y = observe_values(f_tab.ravel()[idx], inst.B, streams["observations"], inst.noise_scale)
    reg = f_tab.max(axis=1)[ctx] - f_tab.ravel()[idx]
    return RegretLog(ctx, act, y, reg, np.ones(horizon, dtype=np.int64))
