"""Linear-chain CRF: path scores, log-partition, NLL gradients and Viterbi.

Scores of a tag path ``y`` over emissions ``P`` (n x k)::

    start[y_0] + sum_i P[i, y_i] + sum_{i>0} A[y_{i-1}, y_i] + stop[y_{n-1}]

The batched functions take emissions of shape (B, T, k) with per-row
``lengths``; positions at or beyond a row's length are ignored.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .corpus import LabelSet, split_label

NEG_INF = -1e4

MAX_BRUTE_FORCE_PATHS = 10**6


@dataclass
class TransitionModel:
    A: np.ndarray  # (k, k), A[a, b] scores tag a followed by tag b
    start: np.ndarray  # (k,)
    stop: np.ndarray  # (k,)

    @classmethod
    def zeros(cls, k: int, dtype=np.float64) -> "TransitionModel":
        return cls(np.zeros((k, k), dtype), np.zeros(k, dtype), np.zeros(k, dtype))

    @property
    def num_tags(self) -> int:
        return self.A.shape[0]

    def __add__(self, other: "TransitionModel") -> "TransitionModel":
        return TransitionModel(self.A + other.A, self.start + other.start, self.stop + other.stop)


@dataclass
class DecodedPath:
    tags: list[int]
    score: float


def logsumexp(x: np.ndarray, axis: int) -> np.ndarray:
    m = np.max(x, axis=axis, keepdims=True)
    out = np.log(np.sum(np.exp(x - m), axis=axis, keepdims=True)) + m
    return np.squeeze(out, axis=axis)


def _check_tags(tags, k: int) -> None:
    for t in tags:
        if not 0 <= t < k:
            raise ValueError(f"tag id {t} out of range for {k} tags")


def path_score(P: np.ndarray, tags, trans: TransitionModel) -> float:
    P = np.asarray(P)
    n, k = P.shape
    tags = [int(t) for t in tags]
    if len(tags) != n or n < 1:
        raise ValueError(f"need {n} >= 1 tags, got {len(tags)}")
    _check_tags(tags, k)
    score = trans.start[tags[0]] + trans.stop[tags[-1]]
    score += P[np.arange(n), tags].sum()
    for a, b in zip(tags[:-1], tags[1:]):
        score += trans.A[a, b]
    return float(score)


def _row_mask(lengths: np.ndarray, width: int) -> np.ndarray:
    return np.arange(width)[None, :] < np.asarray(lengths)[:, None]


def forward_scores(P: np.ndarray, lengths: np.ndarray, trans: TransitionModel):
    """Forward log-scores ``alpha`` (B, T, k) and log-partition per row.

    ``alpha[b, t]`` is only meaningful for ``t < lengths[b]``.
    """
    B, T, k = P.shape
    alpha = np.empty_like(P)
    alpha[:, 0] = trans.start + P[:, 0]
    for t in range(1, T):
        step = logsumexp(alpha[:, t - 1, :, None] + trans.A[None], axis=1) + P[:, t]
        alive = (t < lengths)[:, None]
        alpha[:, t] = np.where(alive, step, alpha[:, t - 1])
    last = alpha[np.arange(B), np.asarray(lengths) - 1]
    return alpha, logsumexp(last + trans.stop, axis=1)


def backward_scores(P: np.ndarray, lengths: np.ndarray, trans: TransitionModel) -> np.ndarray:
    B, T, k = P.shape
    beta = np.empty_like(P)
    beta[:, T - 1] = trans.stop
    for t in range(T - 2, -1, -1):
        nxt = P[:, t + 1] + beta[:, t + 1]
        step = logsumexp(trans.A[None] + nxt[:, None, :], axis=2)
        inside = (t + 1 < lengths)[:, None]
        beta[:, t] = np.where(inside, step, trans.stop)
    return beta


def gold_scores(P: np.ndarray, tags: np.ndarray, lengths: np.ndarray, trans: TransitionModel):
    B, T, _ = P.shape
    mask = _row_mask(lengths, T)
    rows = np.arange(B)
    emit = np.take_along_axis(P, tags[:, :, None], axis=2)[:, :, 0]
    score = np.where(mask, emit, 0.0).sum(axis=1)
    trans_scores = trans.A[tags[:, :-1], tags[:, 1:]]
    score += np.where(mask[:, 1:], trans_scores, 0.0).sum(axis=1)
    score += trans.start[tags[:, 0]] + trans.stop[tags[rows, np.asarray(lengths) - 1]]
    return score


def batch_nll(P: np.ndarray, tags: np.ndarray, lengths: np.ndarray, trans: TransitionModel):
    """Per-row NLL and gradients summed over rows.

    Returns ``(losses (B,), dP (B, T, k), dT)`` where ``dT`` is a
    :class:`TransitionModel` of gradients. ``dP`` is zero at padding.
    """
    B, T, k = P.shape
    lengths = np.asarray(lengths)
    tags = np.asarray(tags)
    if lengths.min() < 1:
        raise ValueError("every sequence needs length >= 1")
    mask = _row_mask(lengths, T)
    alpha, log_z = forward_scores(P, lengths, trans)
    beta = backward_scores(P, lengths, trans)
    # log Z >= gold score mathematically; clamp the rounding residue
    losses = np.maximum(log_z - gold_scores(P, tags, lengths, trans), 0.0)

    marg = np.exp(alpha + beta - log_z[:, None, None])
    marg *= mask[:, :, None]
    onehot = np.zeros_like(P)
    np.put_along_axis(onehot, tags[:, :, None], 1.0, axis=2)
    onehot *= mask[:, :, None]
    dP = marg - onehot

    rows = np.arange(B)
    last = lengths - 1
    d_start = (marg[:, 0] - onehot[:, 0]).sum(axis=0)
    d_stop = (marg[rows, last] - onehot[rows, last]).sum(axis=0)

    d_A = np.zeros_like(trans.A)
    if T > 1:
        pair = (
            alpha[:, :-1, :, None]
            + trans.A[None, None]
            + (P[:, 1:] + beta[:, 1:])[:, :, None, :]
            - log_z[:, None, None, None]
        )
        pair = np.exp(pair) * mask[:, 1:, None, None]
        d_A += pair.sum(axis=(0, 1))
        np.add.at(d_A, (tags[:, :-1][mask[:, 1:]], tags[:, 1:][mask[:, 1:]]), -1.0)
    return losses, dP, TransitionModel(d_A, d_start, d_stop)


def batch_viterbi(P: np.ndarray, lengths: np.ndarray, trans: TransitionModel):
    """Best path per row; back-pointer ties go to the lowest tag id."""
    B, T, k = P.shape
    lengths = np.asarray(lengths)
    delta = trans.start + P[:, 0]
    backptr = np.empty((B, T, k), dtype=np.int64)
    backptr[:, 0] = 0
    keep = np.broadcast_to(np.arange(k), (B, k))
    for t in range(1, T):
        cand = delta[:, :, None] + trans.A[None]
        best_prev = np.argmax(cand, axis=1)
        step = np.take_along_axis(cand, best_prev[:, None, :], axis=1)[:, 0] + P[:, t]
        alive = (t < lengths)[:, None]
        delta = np.where(alive, step, delta)
        backptr[:, t] = np.where(alive, best_prev, keep)
    final = delta + trans.stop
    best = np.argmax(final, axis=1)
    scores = final[np.arange(B), best]
    paths = np.empty((B, T), dtype=np.int64)
    paths[:, T - 1] = best
    for t in range(T - 1, 0, -1):
        paths[:, t - 1] = backptr[np.arange(B), t, paths[:, t]]
    return [paths[b, : lengths[b]].tolist() for b in range(B)], scores


def log_partition(P: np.ndarray, trans: TransitionModel) -> float:
    P = np.asarray(P)
    if P.ndim != 2 or P.shape[0] < 1:
        raise ValueError("emissions must be a non-empty (n, k) matrix")
    _, log_z = forward_scores(P[None], np.array([P.shape[0]]), trans)
    return float(log_z[0])


def nll_loss(P: np.ndarray, gold, trans: TransitionModel):
    """``log Z - score(gold)`` with gradients w.r.t. emissions and transitions."""
    P = np.asarray(P)
    gold = np.asarray(gold, dtype=np.int64)
    if gold.shape != (P.shape[0],):
        raise ValueError("gold path length must match emissions")
    _check_tags(gold, P.shape[1])
    losses, dP, dT = batch_nll(P[None], gold[None], np.array([P.shape[0]]), trans)
    return float(losses[0]), dP[0], dT


def viterbi_decode(P: np.ndarray, trans: TransitionModel) -> DecodedPath:
    P = np.asarray(P)
    if P.ndim != 2 or P.shape[0] < 1:
        raise ValueError("emissions must be a non-empty (n, k) matrix")
    paths, scores = batch_viterbi(P[None], np.array([P.shape[0]]), trans)
    return DecodedPath(paths[0], float(scores[0]))


def _all_path_scores(P: np.ndarray, trans: TransitionModel):
    """Every tag path in lexicographic order with its score, by enumeration."""
    n, k = P.shape
    if k**n > MAX_BRUTE_FORCE_PATHS:
        raise ValueError(f"{k}^{n} paths exceeds the brute-force limit")
    paths = np.array(list(itertools.product(range(k), repeat=n)), dtype=np.int64)
    scores = trans.start[paths[:, 0]] + trans.stop[paths[:, -1]]
    scores = scores + P[np.arange(n), paths].sum(axis=1)
    scores = scores + trans.A[paths[:, :-1], paths[:, 1:]].sum(axis=1)
    return paths, scores


def brute_force_logZ(P: np.ndarray, trans: TransitionModel) -> float:
    _, scores = _all_path_scores(np.asarray(P), trans)
    return float(logsumexp(scores, axis=0))


def brute_force_best(P: np.ndarray, trans: TransitionModel) -> DecodedPath:
    """Highest-scoring path; ties go to the lexicographically first one."""
    paths, scores = _all_path_scores(np.asarray(P), trans)
    best = int(np.argmax(scores))
    return DecodedPath(paths[best].tolist(), float(scores[best]))


def bio_constraint_mask(label_set: LabelSet) -> TransitionModel:
    """Additive mask forbidding ``I-X`` after anything but ``B-X``/``I-X`` and at the start."""
    parsed = [split_label(label) for label in label_set.labels]
    mask = TransitionModel.zeros(len(parsed))
    for b, (prefix_b, type_b) in enumerate(parsed):
        if prefix_b != "I":
            continue
        mask.start[b] = NEG_INF
        for a, (_, type_a) in enumerate(parsed):
            if type_a != type_b:
                mask.A[a, b] = NEG_INF
    return mask
