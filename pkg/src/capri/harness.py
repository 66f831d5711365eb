"""Experiment orchestration: seeded runs, CSV output, privacy audit, baselines."""

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List

import numpy as np

from . import elimination
from .config import ExperimentConfig, dumps
from .environment import make_instance, save_instance
from .private_estimator import JDP, LDP, NONPRIVATE, Projector, noise_scale

STEP_COLUMNS = ["seed", "t", "context", "action", "reward", "inst_regret", "cum_regret", "epoch"]
EPOCH_COLUMNS = ["seed", "epoch", "T_r", "delta_r", "sigma_max_sq", "noise_draws"]
AUDIT_COLUMNS = [
    "seed", "epoch", "T_r", "max_stat_norm", "scaled_bound", "ratio",
    "sensitivity_bound", "sigma0_used", "sigma0_recomputed",
]
VARIANTS = ("uniform", NONPRIVATE, JDP, LDP)
RATIO_TOL = 1e-9


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def build_instance(cfg: ExperimentConfig, seed):
    streams = elimination.seed_streams(seed)
    inst = make_instance(
        streams["instance"],
        cfg.grid.n_contexts,
        cfg.grid.n_actions,
        cfg.kernel.spec(),
        B=cfg.reward.B,
        context_dim=cfg.grid.context_dim,
        action_dim=cfg.grid.action_dim,
        layout=cfg.grid.layout,
        context_probabilities=cfg.contexts.probabilities,
        n_centers=cfg.reward.n_centers,
        noise_scale=cfg.reward.noise_scale,
        seed=seed,
    )
    return inst, streams


def run_config(cfg: ExperimentConfig):
    return elimination.RunConfig(cfg.horizon, cfg.tau, cfg.delta_err, cfg.width_scale, cfg.width_rule)


def run_seed(cfg: ExperimentConfig, seed, variant=None):
    """One run for ``seed``; ``variant`` overrides the privacy mode or selects ``uniform``."""
    inst, streams = build_instance(cfg, seed)
    if variant == "uniform":
        return inst, elimination.run_uniform(inst, cfg.horizon, streams)
    priv = cfg.privacy if variant is None else replace(cfg.privacy, mode=variant)
    return inst, elimination.run(inst, priv.params(cfg.horizon), run_config(cfg), streams)


def _run_task(args):
    cfg, seed, variant = args
    return run_seed(cfg, seed, variant)


def _map(cfg, tasks):
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(_run_task, tasks))
    return [_run_task(t) for t in tasks]


@dataclass
class RunReport:
    seeds: List[int]
    curves: Dict[int, np.ndarray]
    epochs: Dict[int, list]
    logs: Dict[int, object] = field(repr=False, default_factory=dict)

    @property
    def mean_curve(self):
        return np.mean([self.curves[s] for s in self.seeds], axis=0)

    @property
    def median_curve(self):
        return np.median([self.curves[s] for s in self.seeds], axis=0)

    def summary(self):
        return {
            "seeds": self.seeds,
            "final_regret": {str(s): float(self.curves[s][-1]) for s in self.seeds},
            "mean_final_regret": float(self.mean_curve[-1]),
            "median_final_regret": float(self.median_curve[-1]),
            "epochs": {
                str(s): [
                    {
                        "epoch": e.epoch,
                        "T_r": e.length,
                        "steps": e.steps,
                        "completed": e.completed,
                        "delta_r": _num(e.delta_r),
                        "sigma_max_sq": e.sigma_max_sq,
                        "sigma0": e.sigma0,
                        "noise_draws": e.noise_draws,
                        "info_gain": e.info_gain,
                        "simple_regret": _num(e.simple_regret),
                        "active_sizes": e.active_sizes.tolist(),
                    }
                    for e in self.epochs[s]
                ]
                for s in self.seeds
            },
        }


def _num(x):
    return None if math.isnan(x) else x


def _out_dir(cfg, out):
    path = out if out is not None else cfg.output
    os.makedirs(path, exist_ok=True)
    return path


def write_step_csv(path, seeds, logs):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(STEP_COLUMNS)
        for s in seeds:
            log = logs[s]
            cum = log.cumulative
            for t in range(len(log)):
                w.writerow([
                    s, t + 1, int(log.contexts[t]), int(log.actions[t]), _fmt(log.rewards[t]),
                    _fmt(log.inst_regret[t]), _fmt(cum[t]), int(log.epochs[t]),
                ])


def write_epoch_csv(path, seeds, logs):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EPOCH_COLUMNS)
        for s in seeds:
            for e in logs[s].epoch_records:
                w.writerow([s, e.epoch, e.length, _fmt(e.delta_r), _fmt(e.sigma_max_sq), e.noise_draws])


def run_experiment(cfg: ExperimentConfig, out=None):
    """Run every seed and write ``steps.csv``, ``epochs.csv``, ``summary.json`` and instances."""
    path = _out_dir(cfg, out)
    results = _map(cfg, [(cfg, s, None) for s in cfg.seeds])
    logs = {s: log for s, (_, log) in zip(cfg.seeds, results)}
    write_step_csv(os.path.join(path, "steps.csv"), cfg.seeds, logs)
    write_epoch_csv(os.path.join(path, "epochs.csv"), cfg.seeds, logs)
    inst_dir = os.path.join(path, "instances")
    os.makedirs(inst_dir, exist_ok=True)
    for s, (inst, _) in zip(cfg.seeds, results):
        save_instance(inst, os.path.join(inst_dir, f"seed_{s}.json"))
    report = RunReport(
        list(cfg.seeds),
        {s: logs[s].cumulative for s in cfg.seeds},
        {s: logs[s].epoch_records for s in cfg.seeds},
        logs,
    )
    with open(os.path.join(path, "summary.json"), "w") as fh:
        json.dump(report.summary(), fh, indent=1)
    with open(os.path.join(path, "config.json"), "w") as fh:
        fh.write(dumps(cfg))
    return report


@dataclass
class AuditReport:
    rows: List[dict]

    @property
    def max_ratio(self):
        return max((r["ratio"] for r in self.rows), default=0.0)

    @property
    def sigma0_mismatches(self):
        return sum(r["sigma0_used"] != r["sigma0_recomputed"] for r in self.rows)

    @property
    def ok(self):
        return self.max_ratio <= 1.0 + RATIO_TOL and self.sigma0_mismatches == 0


def audit_epoch(inst, record, active, cfg, mode):
    """Exhaustive sensitivity scan for one epoch's projection pair."""
    g = inst.grid_gram()
    proj = Projector.from_grid(g, record.s_index, record.r_index, cfg.tau)
    supp = active.flat_support(inst.grid.n_actions, inst.contexts.support)
    k_sq = g[np.ix_(record.s_index, supp)]
    sigma_max = math.sqrt(float(np.max(proj.variances(k_sq, np.diag(g)[supp]))))
    base = proj.inv_sqrt(k_sq)
    B = inst.B
    norms = [np.linalg.norm(y * base, axis=0).max() for y in (B, -B)]
    max_norm = float(max(norms))
    bound = B * sigma_max
    if mode == NONPRIVATE:
        recomputed = 0.0
    else:
        recomputed = noise_scale(sigma_max, B, cfg.horizon, cfg.privacy.epsilon, cfg.privacy.delta)
    return {
        "epoch": record.epoch,
        "T_r": record.length,
        "max_stat_norm": max_norm,
        "scaled_bound": bound,
        "ratio": max_norm / bound if bound > 0 else 0.0,
        "sensitivity_bound": 2.0 * bound,
        "sigma0_used": record.sigma0,
        "sigma0_recomputed": recomputed,
    }


def privacy_audit(cfg: ExperimentConfig, out=None):
    """Check every epoch of every seed: statistic norms against ``B * sigma_max``
    and the noise scale used against the calibration formula."""
    path = _out_dir(cfg, out)
    results = _map(cfg, [(cfg, s, None) for s in cfg.seeds])
    rows = []
    for s, (inst, log) in zip(cfg.seeds, results):
        for rec in log.epoch_records:
            row = audit_epoch(inst, rec, log.active_history[rec.epoch - 1], cfg, cfg.privacy.mode)
            rows.append({"seed": s, **row})
    with open(os.path.join(path, "audit.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AUDIT_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in AUDIT_COLUMNS])
    return AuditReport(rows)


def compare_baselines(cfg: ExperimentConfig, out=None):
    """Uniform-random, NonPrivate, JDP and LDP on identical instances per seed.

    Writes ``comparison.csv`` (one row per variant and seed) and
    ``comparison_curves.csv`` (mean cumulative regret per variant).
    """
    path = _out_dir(cfg, out)
    tasks = [(cfg, s, v) for v in VARIANTS for s in cfg.seeds]
    results = _map(cfg, tasks)
    curves = {v: {} for v in VARIANTS}
    epochs = {v: {} for v in VARIANTS}
    for (_, s, v), (_, log) in zip(tasks, results):
        curves[v][s] = log.cumulative
        epochs[v][s] = log.epoch_records
    with open(os.path.join(path, "comparison.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["variant", "seed", "final_regret"])
        for v in VARIANTS:
            for s in cfg.seeds:
                w.writerow([v, s, _fmt(curves[v][s][-1])])
    means = {v: np.mean([curves[v][s] for s in cfg.seeds], axis=0) for v in VARIANTS}
    with open(os.path.join(path, "comparison_curves.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", *VARIANTS])
        for t in range(cfg.horizon):
            w.writerow([t + 1, *(_fmt(means[v][t]) for v in VARIANTS)])
    return {v: RunReport(list(cfg.seeds), curves[v], epochs[v]) for v in VARIANTS}
