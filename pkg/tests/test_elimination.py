import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from capri.elimination import (
    ORACLE,
    ActiveSets,
    RunConfig,
    beta,
    beta1,
    beta1_ldp,
    choose_actions,
    confidence_width,
    prune,
    run,
    run_uniform,
    sample_projection_sets,
    seed_streams,
)
from capri.environment import ContextDistribution, Grid, Instance, make_grid, make_instance, make_rkhs_reward
from capri.errors import InvalidArgument
from capri.kernels import SE, KernelSpec
from capri.private_estimator import JDP, LDP, NONPRIVATE, NoiseSource, PrivacyParams

SPEC = KernelSpec(SE, 0.3)


def small_instance(seed, nc=3, nx=6, noise=1.0):
    return make_instance(np.random.default_rng(seed), nc, nx, SPEC, layout="linspace", noise_scale=noise)


def test_beta_values():
    assert_allclose(beta(0.1, 0.0, 1.0, 100), math.sqrt(24))
    assert beta(0.05, 1.0, 1.0, 100) > beta(0.1, 1.0, 1.0, 100)
    lin = lambda B: beta(0.1, B, 1.0, 100) - math.sqrt(24)
    assert_allclose(lin(2.0), 2 * lin(1.0), rtol=1e-14)
    with pytest.raises(InvalidArgument):
        beta(1.0, 1.0, 1.0, 100)


def test_beta1_values():
    assert_allclose(beta1(8.0, 1.25 / math.e, 3 / math.e, 1.0, math.e), 1.0, rtol=1e-14)
    assert beta1(1e9, 0.1, 0.01, 1.0, 1024) < 1e-6
    assert beta1_ldp(4, 1.0, 0.1, 0.01, 1.0, 1024) == 2 * beta1(1.0, 0.1, 0.01, 1.0, 1024)
    with pytest.raises(InvalidArgument):
        beta1(1.0, 0.9, 0.01, 1.0, 2)


def test_confidence_width():
    assert confidence_width(2.0, 3.0, 0.0) == 0.0
    assert_allclose(confidence_width(2.0, 3.0, 0.25), 1.75)
    assert confidence_width(2.0, 3.0, 0.1) < confidence_width(2.0, 3.0, 0.2)


def test_prune_rules():
    active = ActiveSets([[0, 1, 2]])
    scores = np.array([[1.0, 0.9, 0.5]])
    assert prune(scores, active, 0.1)[0].tolist() == [0, 1]
    assert prune(scores, active, 0.2)[0].tolist() == [0, 1, 2]
    tie = np.array([[1.0, 1.0, 0.5]])
    assert prune(tie, active, 0.0)[0].tolist() == [0, 1]
    with pytest.raises(InvalidArgument):
        prune(scores, active, -1.0)


def test_prune_keeps_argmax_and_nests(rng):
    for _ in range(50):
        active = ActiveSets([rng.choice(8, size=int(rng.integers(1, 9)), replace=False) for _ in range(3)])
        scores = rng.standard_normal((3, 8))
        out = prune(scores, active, float(rng.uniform(0, 0.5)))
        assert out.issubset(active)
        for c in range(3):
            assert active[c][np.argmax(scores[c, active[c]])] in out[c]


def test_choose_actions_stays_in_active(rng):
    active = ActiveSets([[1, 4], [0], [2, 3, 5]])
    ctx = rng.integers(0, 3, 500)
    act = choose_actions(active, ctx, rng)
    for c in range(3):
        assert set(act[ctx == c]) == set(active[c].tolist())


def test_projection_sets(rng):
    grid = make_grid(1, 1, 1, 1, rng, "linspace")
    pair = sample_projection_sets(grid, ContextDistribution([1.0]), ActiveSets.full(1, 1), 5, rng)
    assert len(set(map(tuple, pair.S.embeddings))) == 1
    grid = make_grid(3, 4, 1, 1, rng, "linspace")
    dist = ContextDistribution([0.5, 0.3, 0.2])
    pair = sample_projection_sets(grid, dist, ActiveSets.full(3, 4), 10_000, np.random.default_rng(1))
    freq = np.bincount(pair.S.contexts, minlength=3) / 10_000
    assert np.all(np.abs(freq - dist.probabilities) <= 3 * np.sqrt(dist.probabilities * (1 - dist.probabilities) / 10_000))
    again = sample_projection_sets(grid, dist, ActiveSets.full(3, 4), 10_000, np.random.default_rng(1))
    assert np.array_equal(pair.S.index, again.S.index) and np.array_equal(pair.R.index, again.R.index)
    assert not np.array_equal(pair.S.index, pair.R.index)


def test_run_structure_short_horizon():
    inst = small_instance(0)
    log = run(inst, PrivacyParams(1.0, 0.1, JDP, 4), RunConfig(4, width_scale=1e-3), 0)
    assert len(log) == 4
    assert [e.length for e in log.epoch_records] == [2, 4]
    assert [e.steps for e in log.epoch_records] == [2, 2]
    assert log.epochs.tolist() == [1, 1, 2, 2]
    assert log.active_history[0].sizes().tolist() == [6, 6, 6]


def test_epoch_schedule_and_invariants():
    inst = small_instance(1)
    T = 300
    log = run(inst, PrivacyParams(1.0, 0.1, NONPRIVATE, T), RunConfig(T, width_scale=1e-3), 2)
    lengths = [e.length for e in log.epoch_records]
    assert lengths == [18 * 2**k for k in range(len(lengths))]
    assert sum(e.steps for e in log.epoch_records) == T
    assert np.all(log.inst_regret >= 0)
    assert np.all(np.diff(log.cumulative) >= 0)
    for a, b in zip(log.active_history, log.active_history[1:]):
        assert b.issubset(a)
        assert np.all(b.sizes() >= 1)


def test_run_is_deterministic():
    inst = small_instance(2)
    priv = PrivacyParams(1.0, 0.1, LDP, 256)
    cfg = RunConfig(256, width_scale=1e-3)
    a, b = run(inst, priv, cfg, 5), run(inst, priv, cfg, 5)
    for name in ("contexts", "actions", "rewards", "inst_regret", "epochs"):
        assert np.array_equal(getattr(a, name), getattr(b, name))


def test_noise_accounting():
    inst = small_instance(3)
    T = 2**10
    for mode, expected in [(JDP, None), (LDP, T), (NONPRIVATE, 0)]:
        streams = seed_streams(4)
        streams["privacy"] = NoiseSource(streams["privacy"])
        log = run(inst, PrivacyParams(1.0, 0.1, mode, T), RunConfig(T, width_scale=1e-3), streams)
        completed = sum(e.completed for e in log.epoch_records)
        want = completed if mode == JDP else expected
        assert streams["privacy"].draws == log.noise_draws == want


def test_pruning_safety_small():
    for seed in range(10):
        inst = small_instance(seed, noise=0.0)
        log = run(inst, PrivacyParams(1.0, 0.1, NONPRIVATE, 512), RunConfig(512, width_rule=ORACLE), seed)
        best = inst.reward_table().argmax(axis=1)
        for c in range(3):
            assert best[c] in log.active_history[-1][c]


def test_constant_reward_has_zero_regret():
    grid = Grid(np.array([[0.0], [1.0]]), np.full((4, 1), 0.5))
    reward = make_rkhs_reward(SPEC, np.array([[0.0, 0.5]]), [1.0], 1.0)
    inst = Instance(grid, SPEC, ContextDistribution([0.5, 0.5]), reward, 1.0, 0)
    assert np.all(run_uniform(inst, 64, 0).inst_regret == 0)
    for mode in (NONPRIVATE, JDP, LDP):
        log = run(inst, PrivacyParams(1.0, 0.1, mode, 64), RunConfig(64), 0)
        assert np.all(log.inst_regret == 0)


def test_run_rejects_horizon_mismatch():
    with pytest.raises(InvalidArgument):
        run(small_instance(0), PrivacyParams(1.0, 0.1, JDP, 100), RunConfig(64), 0)
    with pytest.raises(InvalidArgument):
        RunConfig(3)
