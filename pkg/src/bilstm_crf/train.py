"""Mini-batch CRF likelihood training."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import optim
from .corpus import LabeledSentence, LabelSet, build_vocab, encode
from .metrics import score_labels
from .model import BiLSTMCRF
from .nn_core import NumericError

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    embed_dim: int = 200
    hidden_dim: int = 100
    max_len: int = 300
    epochs: int = 300
    batch_size: int = 16
    dropout: float = 0.5
    optimizer: str = "adam"
    lr: float | None = None
    seed: int = 0
    hard_bio_constraints: bool = False
    linear_projection: bool = False
    min_count: int = 1
    clip_norm: float | None = None
    lr_decay: float | None = None
    stop_at_dev_f1: float | None = None
    dtype: str = "float32"

    def __post_init__(self):
        for name in ("embed_dim", "hidden_dim", "max_len", "batch_size", "min_count"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")

    def optimizer_config(self) -> optim.OptimizerConfig:
        return optim.OptimizerConfig(
            self.optimizer, lr=self.lr, clip_norm=self.clip_norm, lr_decay=self.lr_decay
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lr"] = self.optimizer_config().lr
        return d


@dataclass
class EpochLog:
    epoch: int
    loss: float
    lr: float
    dev_f1: float | None = None


@dataclass
class TrainResult:
    model: BiLSTMCRF
    history: list[EpochLog] = field(default_factory=list)
    best_params: dict[str, np.ndarray] | None = None
    best_epoch: int | None = None
    best_dev_f1: float | None = None

    def best_model(self) -> BiLSTMCRF | None:
        if self.best_params is None:
            return None
        m = self.model
        return BiLSTMCRF(m.vocab, m.label_set, m.embed_dim, m.hidden_dim, m.dropout,
                         m.linear_projection, m.hard_bio_constraints, m.dtype,
                         params=self.best_params)

    def epochs_to_reach(self, f1: float) -> int | None:
        for entry in self.history:
            if entry.dev_f1 is not None and entry.dev_f1 >= f1:
                return entry.epoch
        return None


def dev_f1(model: BiLSTMCRF, dev: Sequence[LabeledSentence]) -> float:
    pred = model.tag([s.chars for s in dev])
    report = score_labels([s.labels for s in dev], pred, model.label_set.entity_types)
    return report.overall.f1


def train(
    train_sents: Sequence[LabeledSentence],
    config: TrainConfig,
    dev_sents: Sequence[LabeledSentence] | None = None,
    label_set: LabelSet | None = None,
    init_hook: Callable[[BiLSTMCRF], None] | None = None,
) -> TrainResult:
    """Train a fresh model.

    Sentences are reshuffled every epoch; dropout masks and the shuffle
    share one generator seeded from ``config.seed``, so runs are repeatable.
    ``init_hook`` may adjust the freshly initialized model (e.g. load
    pretrained embeddings) before the first update.
    """
    if not train_sents:
        raise ValueError("empty training set")
    label_set = label_set or LabelSet()
    vocab = build_vocab(train_sents, config.min_count)
    model = BiLSTMCRF(
        vocab, label_set,
        embed_dim=config.embed_dim, hidden_dim=config.hidden_dim, dropout=config.dropout,
        linear_projection=config.linear_projection,
        hard_bio_constraints=config.hard_bio_constraints,
        dtype=np.dtype(config.dtype), seed=config.seed,
    )
    if init_hook is not None:
        init_hook(model)
    opt_cfg = config.optimizer_config()
    state = optim.init_state(model.params, opt_cfg)
    rng = np.random.default_rng([config.seed, 1])
    data = encode(train_sents, vocab, label_set, config.max_len)
    result = TrainResult(model)

    for epoch in range(1, config.epochs + 1):
        lr = opt_cfg.lr * (opt_cfg.lr_decay ** (epoch - 1) if opt_cfg.lr_decay else 1.0)
        order = rng.permutation(len(data))
        losses = []
        for lo in range(0, len(order), config.batch_size):
            rows = order[lo:lo + config.batch_size]
            batch = type(data)(data.char_ids[rows], data.label_ids[rows], data.lengths[rows])
            loss, grads = model.loss_and_grads(batch, training=True, rng=rng)
            if not np.isfinite(loss):
                raise NumericError(f"non-finite loss {loss} at epoch {epoch}")
            optim.step(model.params, grads, state, opt_cfg, lr=lr)
            losses.append(loss * len(rows))
        entry = EpochLog(epoch, float(np.sum(losses) / len(data)), lr)
        if dev_sents:
            entry.dev_f1 = dev_f1(model, dev_sents)
            if result.best_dev_f1 is None or entry.dev_f1 > result.best_dev_f1:
                result.best_dev_f1 = entry.dev_f1
                result.best_epoch = epoch
                result.best_params = {k: v.copy() for k, v in model.params.items()}
        result.history.append(entry)
        log.info("epoch %d loss %.6f dev_f1 %s", epoch, entry.loss,
                 "-" if entry.dev_f1 is None else f"{entry.dev_f1:.4f}")
        if (config.stop_at_dev_f1 is not None and entry.dev_f1 is not None
                and entry.dev_f1 >= config.stop_at_dev_f1):
            log.info("dev F1 reached %.4f, stopping", config.stop_at_dev_f1)
            break
    return result
