"""Built-in oracle suite behind ``bilstm-crf check``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import crf, optim
from .corpus import EncodedBatch, LabelSet, Vocabulary
from .model import BiLSTMCRF
from .nn_core import GATES


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def random_transitions(rng, k: int, low=-2.0, high=2.0) -> crf.TransitionModel:
    return crf.TransitionModel(rng.uniform(low, high, (k, k)), rng.uniform(low, high, k),
                               rng.uniform(low, high, k))


def check_crf_oracle(instances: int = 500, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst, mismatches = 0.0, 0
    for _ in range(instances):
        n, k = int(rng.integers(1, 7)), int(rng.integers(1, 6))
        P = rng.uniform(-2, 2, (n, k))
        trans = random_transitions(rng, k)
        worst = max(worst, abs(crf.log_partition(P, trans) - crf.brute_force_logZ(P, trans)))
        mismatches += crf.viterbi_decode(P, trans).tags != crf.brute_force_best(P, trans).tags
    passed = worst <= 1e-9 and mismatches == 0
    return CheckResult("crf-oracle", passed,
                       f"{instances} instances, max |dlogZ| {worst:.2e}, {mismatches} path mismatches")


def tiny_model(seed: int = 0, dropout: float = 0.0):
    """Random double-precision model (V=7, E=4, H=3, k=5) and a 2x6 batch."""
    rng = np.random.default_rng(seed)
    labels = LabelSet(["B-PER", "I-PER", "B-LOC", "I-LOC", "O"])
    model = BiLSTMCRF(Vocabulary("abcde"), labels, embed_dim=4, hidden_dim=3,
                      dropout=dropout, dtype=np.float64, seed=seed)
    for value in model.params.values():
        value[...] = rng.uniform(-0.5, 0.5, value.shape)
    lengths = np.array([6, 4])
    char_ids = rng.integers(1, 7, (2, 6))
    char_ids[1, 4:] = 0
    label_ids = rng.integers(0, 5, (2, 6))
    label_ids[1, 4:] = 0
    return model, EncodedBatch(char_ids, label_ids, lengths)


def param_groups(name: str, value: np.ndarray) -> dict[str, np.ndarray]:
    """Index masks naming each gate block of the stacked LSTM tensors."""
    if not name.startswith(("fwd.", "bwd.")):
        return {name: np.ones(value.shape, bool)}
    direction, kind = name.split(".")
    H = value.shape[0] // 4
    groups = {}
    for j, gate in enumerate(GATES):
        sel = np.zeros(value.shape, bool)
        sel[j * H:(j + 1) * H] = True
        groups[f"{direction}.{kind}_{gate}"] = sel
    return groups


def gradient_errors(model: BiLSTMCRF, batch: EncodedBatch, step: float = 1e-5,
                    abs_floor: float = 1e-7, dropout_seed: int = 7) -> dict[str, float]:
    """Worst relative error per parameter group, analytic vs central differences.

    Entries whose absolute difference is within ``abs_floor`` count as 0.
    Dropout, when enabled, reuses one mask by reseeding every evaluation.
    """
    training = model.dropout > 0

    def rng():
        return np.random.default_rng(dropout_seed) if training else None

    _, grads = model.loss_and_grads(batch, training=training, rng=rng())
    errors = {}
    for name, value in model.params.items():
        numeric = np.zeros_like(value)
        for idx in np.ndindex(value.shape):
            orig = value[idx]
            value[idx] = orig + step
            plus = model.loss(batch, training, rng())
            value[idx] = orig - step
            minus = model.loss(batch, training, rng())
            value[idx] = orig
            numeric[idx] = (plus - minus) / (2 * step)
        diff = np.abs(grads[name] - numeric)
        scale = np.maximum(np.abs(grads[name]), np.abs(numeric))
        rel = np.where(diff <= abs_floor, 0.0, diff / np.where(scale > 0, scale, 1.0))
        for group, sel in param_groups(name, value).items():
            errors[group] = float(rel[sel].max())
    return errors


def check_gradients(seed: int = 0, tol: float = 1e-4) -> CheckResult:
    errors = {}
    for dropout in (0.0, 0.5):
        model, batch = tiny_model(seed, dropout)
        for group, err in gradient_errors(model, batch).items():
            errors[group] = max(err, errors.get(group, 0.0))
    bad = {g: e for g, e in errors.items() if e > tol}
    detail = f"{len(errors)} parameter groups, worst rel err {max(errors.values()):.2e}"
    if bad:
        detail += "; failing: " + ", ".join(f"{g}={e:.2e}" for g, e in sorted(bad.items()))
    return CheckResult("gradients", not bad, detail)


def quadratic_descent(kind: str, lr: float = 0.01, steps: int = 10_000, dim: int = 1):
    """Minimize 0.5*|x|^2 from x=1; returns the first step with |x| < 1e-3 (or None) and the final norm."""
    cfg = optim.OptimizerConfig(kind, lr=lr)
    params = {"x": np.ones(dim)}
    state = optim.init_state(params, cfg)
    reached = None
    for i in range(1, steps + 1):
        optim.step(params, {"x": params["x"].copy()}, state, cfg)
        if reached is None and np.linalg.norm(params["x"]) < 1e-3:
            reached = i
    return reached, float(np.linalg.norm(params["x"]))


def check_optimizers() -> CheckResult:
    parts, passed = [], True
    for kind in optim.KINDS:
        reached, final = quadratic_descent(kind)
        passed &= reached is not None
        parts.append(f"{kind}: |x|<1e-3 at step {reached}, final {final:.1e}")
    return CheckResult("optimizers", passed, "; ".join(parts))


def run_checks(crf_instances: int = 500, seed: int = 0) -> list[CheckResult]:
    return [check_crf_oracle(crf_instances, seed), check_gradients(seed), check_optimizers()]
