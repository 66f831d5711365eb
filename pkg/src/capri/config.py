"""Experiment configuration: a JSON document with every field explicit.

Only these keys may be omitted, with the stated defaults:

* ``kernel.nu`` -- ``null``; required (0.5, 1.5 or 2.5) for the Matern family.
* ``contexts.probabilities`` -- ``null`` means uniform over contexts.
* ``width_rule`` -- ``"theory"``.
* ``workers`` -- ``1``.
"""

import json
from dataclasses import MISSING, asdict, dataclass
from typing import List, Optional

from .errors import CapriError, ConfigError
from .kernels import FAMILIES, MATERN, MATERN_NUS, KernelSpec
from .private_estimator import MODES, PrivacyParams


@dataclass
class KernelConfig:
    family: str
    lengthscale: float
    nu: Optional[float] = None

    def spec(self):
        return KernelSpec(self.family, self.lengthscale, self.nu)


@dataclass
class GridConfig:
    n_contexts: int
    n_actions: int
    context_dim: int
    action_dim: int
    layout: str


@dataclass
class ContextConfig:
    probabilities: Optional[List[float]] = None


@dataclass
class RewardConfig:
    B: float
    n_centers: int
    noise_scale: float


@dataclass
class PrivacyConfig:
    mode: str
    epsilon: float
    delta: float

    def params(self, horizon):
        return PrivacyParams(self.epsilon, self.delta, self.mode, horizon)


@dataclass
class ExperimentConfig:
    horizon: int
    kernel: KernelConfig
    grid: GridConfig
    contexts: ContextConfig
    reward: RewardConfig
    tau: float
    privacy: PrivacyConfig
    delta_err: float
    width_scale: float
    seeds: List[int]
    output: str
    width_rule: str = "theory"
    workers: int = 1

    def __post_init__(self):
        validate(self)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return parse(d)


_SECTIONS = {
    "kernel": KernelConfig,
    "grid": GridConfig,
    "contexts": ContextConfig,
    "reward": RewardConfig,
    "privacy": PrivacyConfig,
}


def _build(kind, d, prefix):
    if not isinstance(d, dict):
        raise ConfigError(prefix.rstrip("."), "expected an object")
    fields = kind.__dataclass_fields__
    unknown = set(d) - set(fields)
    if unknown:
        raise ConfigError(prefix + sorted(unknown)[0], "unknown key")
    for name, f in fields.items():
        if name not in d and f.default is MISSING:
            raise ConfigError(prefix + name, "missing")
    return d


def parse(d):
    """Build an :class:`ExperimentConfig` from a decoded JSON object."""
    d = dict(_build(ExperimentConfig, d, ""))
    for key, kind in _SECTIONS.items():
        if key in d:
            d[key] = kind(**_build(kind, d[key], key + "."))
    try:
        return ExperimentConfig(**d)
    except TypeError as exc:
        raise ConfigError("config", str(exc)) from None


def _need(cond, field, message):
    if not cond:
        raise ConfigError(field, message)


def _is_int(x):
    return isinstance(x, int) and not isinstance(x, bool)


def _is_num(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def validate(c):
    _need(_is_int(c.horizon) and c.horizon >= 4, "horizon", "must be an integer >= 4")
    k = c.kernel
    _need(k.family in FAMILIES, "kernel.family", f"must be one of {FAMILIES}")
    _need(_is_num(k.lengthscale) and k.lengthscale > 0, "kernel.lengthscale", "must be positive")
    if k.family == MATERN:
        _need(k.nu in MATERN_NUS, "kernel.nu", f"must be one of {MATERN_NUS}")
    g = c.grid
    for name in ("n_contexts", "n_actions", "context_dim", "action_dim"):
        v = getattr(g, name)
        _need(_is_int(v) and v >= 1, f"grid.{name}", "must be a positive integer")
    _need(g.layout in ("uniform", "linspace"), "grid.layout", "must be 'uniform' or 'linspace'")
    if g.layout == "linspace":
        _need(g.context_dim == 1 and g.action_dim == 1, "grid.layout", "linspace needs 1-d embeddings")
    p = c.contexts.probabilities
    if p is not None:
        _need(
            isinstance(p, list) and len(p) == g.n_contexts and all(_is_num(q) and q >= 0 for q in p)
            and abs(sum(p) - 1.0) <= 1e-9,
            "contexts.probabilities",
            "must list one non-negative probability per context, summing to 1",
        )
    r = c.reward
    _need(_is_num(r.B) and r.B > 0, "reward.B", "must be positive")
    _need(_is_int(r.n_centers) and r.n_centers >= 1, "reward.n_centers", "must be a positive integer")
    _need(_is_num(r.noise_scale) and 0 <= r.noise_scale <= 1, "reward.noise_scale", "must lie in [0, 1]")
    _need(_is_num(c.tau) and c.tau > 0, "tau", "must be positive")
    pr = c.privacy
    _need(pr.mode in MODES, "privacy.mode", f"must be one of {MODES}")
    _need(_is_num(pr.epsilon) and pr.epsilon > 0, "privacy.epsilon", "must be positive")
    _need(_is_num(pr.delta) and 0 < pr.delta < 1, "privacy.delta", "must lie in (0, 1)")
    _need(_is_num(c.delta_err) and 0 < c.delta_err < 1, "delta_err", "must lie in (0, 1)")
    _need(_is_num(c.width_scale) and c.width_scale >= 0, "width_scale", "must be non-negative")
    _need(c.width_rule in ("theory", "oracle"), "width_rule", "must be 'theory' or 'oracle'")
    _need(
        isinstance(c.seeds, list) and len(c.seeds) > 0 and all(_is_int(s) and s >= 0 for s in c.seeds),
        "seeds",
        "must be a non-empty list of non-negative integers",
    )
    _need(isinstance(c.output, str) and c.output, "output", "must be a path string")
    _need(_is_int(c.workers) and c.workers >= 1, "workers", "must be a positive integer")
    try:
        pr.params(c.horizon)
    except CapriError as exc:
        raise ConfigError("privacy", str(exc)) from None


def loads(text):
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON: {exc}") from None
    return parse(d)


def load(path):
    with open(path) as fh:
        return loads(fh.read())


def dumps(c):
    return json.dumps(c.to_dict(), indent=2)
