"""The BiLSTM-CRF tagger: parameters, batched forward/backward, decoding."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import crf, nn_core
from .corpus import EncodedBatch, LabelSet, Vocabulary, encode_chars
from .nn_core import LstmDirectionParams

PARAM_NAMES = (
    "embedding",
    "fwd.W", "fwd.b",
    "bwd.W", "bwd.b",
    "proj.W", "proj.b",
    "crf.A", "crf.start", "crf.stop",
)


class BiLSTMCRF:
    """Character BiLSTM encoder with a tanh emission layer and a CRF on top.

    ``params`` maps the names in :data:`PARAM_NAMES` to arrays. Optimizers
    update those arrays in place; every view handed out by this class stays
    in sync with them.
    """

    def __init__(
        self,
        vocab: Vocabulary,
        label_set: LabelSet,
        embed_dim: int = 200,
        hidden_dim: int = 100,
        dropout: float = 0.5,
        linear_projection: bool = False,
        hard_bio_constraints: bool = False,
        dtype=np.float32,
        seed: int | None = 0,
        params: dict[str, np.ndarray] | None = None,
    ):
        if embed_dim < 1 or hidden_dim < 1:
            raise ValueError("embed_dim and hidden_dim must be positive")
        if not 0.0 <= dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        self.vocab = vocab
        self.label_set = label_set
        self.embed_dim = embed_dim
        self.hidden_dim = hidden_dim
        self.dropout = dropout
        self.linear_projection = linear_projection
        self.dtype = np.dtype(dtype)
        if params is None:
            params = self.init_params(np.random.default_rng(seed))
        self._check_shapes(params)
        self.params = params
        self.hard_bio_constraints = hard_bio_constraints

    @property
    def hard_bio_constraints(self) -> bool:
        return self._mask is not None

    @hard_bio_constraints.setter
    def hard_bio_constraints(self, on: bool) -> None:
        self._mask = None
        if on:
            m = crf.bio_constraint_mask(self.label_set)
            self._mask = crf.TransitionModel(*(x.astype(self.dtype) for x in (m.A, m.start, m.stop)))

    @property
    def num_tags(self) -> int:
        return len(self.label_set)

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        V, E, H, k = len(self.vocab), self.embed_dim, self.hidden_dim, self.num_tags
        return {
            "embedding": (V, E),
            "fwd.W": (4 * H, H + E), "fwd.b": (4 * H,),
            "bwd.W": (4 * H, H + E), "bwd.b": (4 * H,),
            "proj.W": (k, 2 * H), "proj.b": (k,),
            "crf.A": (k, k), "crf.start": (k,), "crf.stop": (k,),
        }

    def _check_shapes(self, params) -> None:
        expected = self.param_shapes()
        if set(params) != set(expected):
            raise ValueError(f"parameter names {sorted(params)} != {sorted(expected)}")
        for name, shape in expected.items():
            if params[name].shape != shape:
                raise ValueError(f"{name}: shape {params[name].shape}, expected {shape}")

    def init_params(self, rng: np.random.Generator) -> dict[str, np.ndarray]:
        V, E, H, k = len(self.vocab), self.embed_dim, self.hidden_dim, self.num_tags
        dt = self.dtype
        fwd = LstmDirectionParams.init(E, H, rng, dt)
        bwd = LstmDirectionParams.init(E, H, rng, dt)
        return {
            "embedding": nn_core.xavier_uniform(rng, (V, E), V, E, dt),
            "fwd.W": fwd.W, "fwd.b": fwd.b,
            "bwd.W": bwd.W, "bwd.b": bwd.b,
            "proj.W": nn_core.xavier_uniform(rng, (k, 2 * H), 2 * H, k, dt),
            "proj.b": np.zeros(k, dt),
            "crf.A": np.zeros((k, k), dt),
            "crf.start": np.zeros(k, dt),
            "crf.stop": np.zeros(k, dt),
        }

    @property
    def fwd(self) -> LstmDirectionParams:
        return LstmDirectionParams(self.params["fwd.W"], self.params["fwd.b"])

    @property
    def bwd(self) -> LstmDirectionParams:
        return LstmDirectionParams(self.params["bwd.W"], self.params["bwd.b"])

    def transitions(self) -> crf.TransitionModel:
        """Effective CRF transitions, including the BIO mask when enabled."""
        t = crf.TransitionModel(self.params["crf.A"], self.params["crf.start"], self.params["crf.stop"])
        if self._mask is not None:
            t = t + self._mask
        return t

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {name: np.zeros_like(value) for name, value in self.params.items()}

    def forward(self, char_ids, lengths, training: bool = False, rng=None):
        """Emission scores (B, T', k) for the batch, T' = longest row.

        Returns ``(P, cache)``; the cache feeds :meth:`backward`.
        """
        lengths = np.asarray(lengths)
        width = int(lengths.max())
        ids = np.asarray(char_ids)[:, :width]
        p = self.dropout if training else 0.0
        if p > 0.0 and rng is None:
            raise ValueError("training with dropout needs an rng")

        X = self.params["embedding"][ids]
        emb_mask = nn_core.dropout_mask(X.shape, p, rng, self.dtype) if p > 0 else None
        Xd = X * emb_mask if emb_mask is not None else X

        h_f, cache_f = nn_core.lstm_batch_forward(Xd, lengths, self.fwd)
        h_b, cache_b = nn_core.lstm_batch_forward(Xd, lengths, self.bwd, reverse=True)
        states = np.concatenate([h_f, h_b], axis=-1)
        out_mask = nn_core.dropout_mask(states.shape, p, rng, self.dtype) if p > 0 else None
        states_d = states * out_mask if out_mask is not None else states

        P = nn_core.project(states_d, self.params["proj.W"], self.params["proj.b"],
                            self.linear_projection)
        cache = {
            "ids": ids, "lengths": lengths, "emb_mask": emb_mask, "out_mask": out_mask,
            "lstm_f": cache_f, "lstm_b": cache_b, "states": states_d, "P": P,
        }
        return P, cache

    def backward(self, cache, dP, dT: crf.TransitionModel | None = None) -> dict[str, np.ndarray]:
        if cache is None:
            raise RuntimeError("backward called before forward")
        grads = self.zero_grads()
        H = self.hidden_dim
        d_states, grads["proj.W"], grads["proj.b"] = nn_core.project_backward(
            dP, cache["states"], cache["P"], self.params["proj.W"], self.linear_projection
        )
        if cache["out_mask"] is not None:
            d_states = d_states * cache["out_mask"]
        dX_f, grads["fwd.W"], grads["fwd.b"] = nn_core.lstm_batch_backward(
            d_states[..., :H], cache["lstm_f"], self.fwd)
        dX_b, grads["bwd.W"], grads["bwd.b"] = nn_core.lstm_batch_backward(
            d_states[..., H:], cache["lstm_b"], self.bwd)
        dX = dX_f + dX_b
        if cache["emb_mask"] is not None:
            dX = dX * cache["emb_mask"]
        np.add.at(grads["embedding"], cache["ids"], dX)
        if dT is not None:
            grads["crf.A"] += dT.A
            grads["crf.start"] += dT.start
            grads["crf.stop"] += dT.stop
        return grads

    def loss_and_grads(self, batch: EncodedBatch, training: bool = True, rng=None):
        """Mean per-sentence CRF negative log-likelihood and its gradients."""
        P, cache = self.forward(batch.char_ids, batch.lengths, training, rng)
        width = P.shape[1]
        losses, dP, dT = crf.batch_nll(P, batch.label_ids[:, :width], batch.lengths, self.transitions())
        n = len(batch)
        dT = crf.TransitionModel(dT.A / n, dT.start / n, dT.stop / n)
        grads = self.backward(cache, dP / n, dT)
        return float(losses.mean()), grads

    def loss(self, batch: EncodedBatch, training: bool = False, rng=None) -> float:
        P, _ = self.forward(batch.char_ids, batch.lengths, training, rng)
        width = P.shape[1]
        losses, _, _ = crf.batch_nll(P, batch.label_ids[:, :width], batch.lengths, self.transitions())
        return float(losses.mean())

    def decode_ids(self, char_ids, lengths) -> list[list[int]]:
        P, _ = self.forward(char_ids, lengths)
        paths, _ = crf.batch_viterbi(P, lengths, self.transitions())
        return paths

    def tag(self, char_seqs: Sequence[Sequence[str]], batch_size: int = 64) -> list[list[str]]:
        """Predicted labels for each character sequence (no truncation)."""
        out: list[list[str]] = [[] for _ in char_seqs]
        pending = [i for i, s in enumerate(char_seqs) if len(s)]
        for lo in range(0, len(pending), batch_size):
            rows = pending[lo:lo + batch_size]
            chunk = [char_seqs[i] for i in rows]
            ids, lengths = encode_chars(chunk, self.vocab, max(len(s) for s in chunk))
            for i, path in zip(rows, self.decode_ids(ids, lengths)):
                out[i] = [self.label_set.label_of(t) for t in path]
        return out
