"""Adam, RMSprop and plain gradient descent over dicts of named arrays."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

KINDS = ("adam", "gd", "rmsprop")

DEFAULT_LR = {"adam": 0.001, "gd": 0.01, "rmsprop": 0.001}


@dataclass
class OptimizerConfig:
    kind: str = "adam"
    lr: float | None = None  # None picks DEFAULT_LR[kind]
    beta1: float = 0.9
    beta2: float = 0.999
    decay_rate: float = 0.9
    eps: float = 1e-8
    lr_decay: float | None = None  # per-epoch exponential factor, off by default
    clip_norm: float | None = None  # global-norm clipping, off by default

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown optimizer {self.kind!r}; choose from {KINDS}")
        if self.lr is None:
            self.lr = DEFAULT_LR[self.kind]
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        for name in ("beta1", "beta2", "decay_rate"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ValueError(f"{name} must be in [0, 1)")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.lr_decay is not None and not 0.0 < self.lr_decay <= 1.0:
            raise ValueError("lr_decay must be in (0, 1]")
        if self.clip_norm is not None and not self.clip_norm > 0:
            raise ValueError("clip_norm must be positive")


@dataclass
class OptimizerState:
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)  # Adam first moment
    v: dict[str, np.ndarray] = field(default_factory=dict)  # Adam second moment / RMSprop cache


def init_state(params: dict[str, np.ndarray], cfg: OptimizerConfig) -> OptimizerState:
    state = OptimizerState()
    if cfg.kind == "adam":
        state.m = {k: np.zeros_like(p) for k, p in params.items()}
    if cfg.kind in ("adam", "rmsprop"):
        state.v = {k: np.zeros_like(p) for k, p in params.items()}
    return state


def global_norm(grads: dict[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(np.sum(np.square(g, dtype=np.float64)) for g in grads.values())))


def clip_by_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> dict[str, np.ndarray]:
    norm = global_norm(grads)
    if norm <= max_norm:
        return grads
    scale = max_norm / norm
    return {k: g * scale for k, g in grads.items()}


def _check_shapes(params, grads, state, cfg) -> None:
    if set(grads) != set(params):
        raise ValueError("gradients do not cover exactly the parameters")
    accumulators = [state.v] + ([state.m] if cfg.kind == "adam" else [])
    for name, p in params.items():
        if grads[name].shape != p.shape:
            raise ValueError(f"{name}: gradient shape {grads[name].shape} != {p.shape}")
        if cfg.kind == "gd":
            continue
        for acc in accumulators:
            if name not in acc or acc[name].shape != p.shape:
                raise ValueError(f"{name}: optimizer state does not match parameter shape")


def step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
         state: OptimizerState, cfg: OptimizerConfig, lr: float | None = None) -> None:
    """Update ``params`` and ``state`` in place.

    ``lr`` overrides ``cfg.lr`` (used by the per-epoch decay schedule).
    """
    _check_shapes(params, grads, state, cfg)
    lr = cfg.lr if lr is None else lr
    if cfg.clip_norm is not None:
        grads = clip_by_global_norm(grads, cfg.clip_norm)
    state.t += 1

    if cfg.kind == "gd":
        for name, p in params.items():
            p -= lr * grads[name]
    elif cfg.kind == "rmsprop":
        rho = cfg.decay_rate
        for name, p in params.items():
            g = grads[name]
            cache = state.v[name]
            cache *= rho
            cache += (1.0 - rho) * g * g
            p -= lr * g / (np.sqrt(cache) + cfg.eps)
    else:
        b1, b2 = cfg.beta1, cfg.beta2
        c1 = 1.0 - b1 ** state.t
        c2 = 1.0 - b2 ** state.t
        for name, p in params.items():
            g = grads[name]
            m, v = state.m[name], state.v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= lr * (m / c1) / (np.sqrt(v / c2) + cfg.eps)
