import math

import numpy as np
import pytest

from bilstm_crf.corpus import LabelSet, validate_bio
from bilstm_crf.crf import (
    NEG_INF,
    TransitionModel,
    batch_nll,
    batch_viterbi,
    bio_constraint_mask,
    brute_force_best,
    brute_force_logZ,
    log_partition,
    nll_loss,
    path_score,
    viterbi_decode,
)
from bilstm_crf.selfcheck import random_transitions

from conftest import assert_grad_close, central_difference

P_HAND = np.array([[1.0, 0.0], [0.0, 2.0]])
T_HAND = TransitionModel(np.array([[0.5, -0.5], [0.0, 0.0]]), np.zeros(2), np.zeros(2))


def random_instance(rng, n=None, k=None):
    n = n or int(rng.integers(1, 7))
    k = k or int(rng.integers(1, 6))
    return rng.uniform(-2, 2, (n, k)), random_transitions(rng, k)


def test_path_score_single_zero():
    for t in range(3):
        assert path_score(np.zeros((1, 3)), [t], TransitionModel.zeros(3)) == 0.0


def test_path_score_hand_sum():
    assert path_score(P_HAND, [0, 1], T_HAND) == 2.5


def test_path_score_includes_start_and_stop():
    T = TransitionModel(np.zeros((2, 2)), np.array([0.1, 0.2]), np.array([0.3, 0.4]))
    assert path_score(P_HAND, [1, 0], T) == pytest.approx(0.2 + 0.0 + 0.0 + 0.3)


def test_path_score_shift_by_constant(rng):
    P, T = random_instance(rng, n=5, k=4)
    y = rng.integers(0, 4, 5)
    assert path_score(P + 0.7, y, T) == pytest.approx(path_score(P, y, T) + 5 * 0.7, abs=1e-12)


def test_path_score_rejects_bad_tag():
    with pytest.raises(ValueError):
        path_score(P_HAND, [0, 2], T_HAND)
    with pytest.raises(ValueError):
        path_score(P_HAND, [0], T_HAND)


def test_log_partition_single_tag(rng):
    P, T = random_instance(rng, n=4, k=1)
    assert log_partition(P, T) == pytest.approx(path_score(P, [0] * 4, T), abs=1e-12)


def test_log_partition_all_zero():
    assert log_partition(np.zeros((3, 4)), TransitionModel.zeros(4)) == pytest.approx(3 * math.log(4), abs=1e-12)


def test_log_partition_matches_brute_force(rng):
    P, T = random_instance(rng, n=5, k=4)
    assert abs(log_partition(P, T) - brute_force_logZ(P, T)) <= 1e-9


def test_brute_force_single_position_closed_form(rng):
    P, T = random_instance(rng, n=1, k=4)
    expected = math.log(sum(math.exp(T.start[t] + P[0, t] + T.stop[t]) for t in range(4)))
    assert brute_force_logZ(P, T) == pytest.approx(expected, abs=1e-12)


def test_brute_force_single_tag(rng):
    P, T = random_instance(rng, n=3, k=1)
    score = path_score(P, [0, 0, 0], T)
    assert brute_force_logZ(P, T) == pytest.approx(score, abs=1e-12)
    assert brute_force_best(P, T).tags == [0, 0, 0]


def test_brute_force_guard():
    with pytest.raises(ValueError):
        brute_force_logZ(np.zeros((9, 5)), TransitionModel.zeros(5))


def test_log_partition_no_overflow():
    P = np.full((50, 3), 800.0)
    assert np.isfinite(log_partition(P, TransitionModel.zeros(3)))


def test_path_score_never_exceeds_log_partition(rng):
    for _ in range(50):
        P, T = random_instance(rng)
        n, k = P.shape
        logz = log_partition(P, T)
        y = rng.integers(0, k, n)
        if k == 1:
            assert path_score(P, y, T) == pytest.approx(logz, abs=1e-12)
        else:
            assert path_score(P, y, T) < logz


def test_nll_single_tag_is_zero(rng):
    P, T = random_instance(rng, n=4, k=1)
    loss, dP, dT = nll_loss(P, [0] * 4, T)
    assert loss == 0.0
    np.testing.assert_allclose(dP, 0.0, atol=1e-12)


def test_nll_nonnegative_and_vanishes_when_gold_dominates(rng):
    for _ in range(50):
        P, T = random_instance(rng)
        y = rng.integers(0, P.shape[1], P.shape[0])
        assert nll_loss(P, y, T)[0] >= 0.0
    P = np.full((4, 3), -50.0)
    P[np.arange(4), [0, 2, 1, 1]] = 50.0
    assert nll_loss(P, [0, 2, 1, 1], TransitionModel.zeros(3))[0] == pytest.approx(0.0, abs=1e-12)


def test_nll_gradients_match_finite_differences(rng):
    for _ in range(5):
        P, T = random_instance(rng, n=6, k=5)
        y = rng.integers(0, 5, 6)
        _, dP, dT = nll_loss(P, y, T)
        loss = lambda: nll_loss(P, y, T)[0]
        assert_grad_close(dP, central_difference(loss, P))
        assert_grad_close(dT.A, central_difference(loss, T.A))
        assert_grad_close(dT.start, central_difference(loss, T.start))
        assert_grad_close(dT.stop, central_difference(loss, T.stop))


def test_emission_gradient_rows_sum_to_zero(rng):
    P, T = random_instance(rng, n=6, k=5)
    _, dP, _ = nll_loss(P, rng.integers(0, 5, 6), T)
    np.testing.assert_allclose(dP.sum(axis=1), 0.0, atol=1e-12)


def test_nll_decreases_under_small_gradient_steps(rng):
    P, T = random_instance(rng, n=6, k=5)
    y = rng.integers(0, 5, 6)
    losses = []
    for _ in range(11):
        loss, dP, dT = nll_loss(P, y, T)
        losses.append(loss)
        P -= 0.01 * dP
        T = TransitionModel(T.A - 0.01 * dT.A, T.start - 0.01 * dT.start, T.stop - 0.01 * dT.stop)
    assert all(b < a for a, b in zip(losses, losses[1:]))


def test_batch_nll_matches_per_sentence(rng):
    k = 4
    T = random_transitions(rng, k)
    lengths = np.array([5, 2, 1])
    P = rng.uniform(-2, 2, (3, 5, k))
    tags = rng.integers(0, k, (3, 5))
    losses, dP, dT = batch_nll(P, tags, lengths, T)
    dA = np.zeros((k, k))
    for b, n in enumerate(lengths):
        loss, dP_b, dT_b = nll_loss(P[b, :n], tags[b, :n], T)
        assert losses[b] == pytest.approx(loss, abs=1e-12)
        np.testing.assert_allclose(dP[b, :n], dP_b, atol=1e-12)
        assert not dP[b, n:].any()
        dA += dT_b.A
    np.testing.assert_allclose(dT.A, dA, atol=1e-12)


def test_viterbi_single_tag(rng):
    P, T = random_instance(rng, n=3, k=1)
    assert viterbi_decode(P, T).tags == [0, 0, 0]


def test_viterbi_hand_example():
    table = {y: path_score(P_HAND, y, T_HAND) for y in [(0, 0), (0, 1), (1, 0), (1, 1)]}
    assert table == {(0, 0): 1.5, (0, 1): 2.5, (1, 0): 0.0, (1, 1): 2.0}
    best = viterbi_decode(P_HAND, T_HAND)
    assert best.tags == [0, 1] and best.score == 2.5


def test_viterbi_score_is_path_score(rng):
    for _ in range(30):
        P, T = random_instance(rng)
        best = viterbi_decode(P, T)
        assert best.score == pytest.approx(path_score(P, best.tags, T), abs=1e-12)


def test_viterbi_invariant_under_shift_and_positive_scaling(rng):
    for _ in range(50):
        P, T = random_instance(rng)
        base = viterbi_decode(P, T).tags
        assert viterbi_decode(P + 3.3, T).tags == base
        c = float(rng.uniform(0.1, 10))
        scaled = TransitionModel(c * T.A, c * T.start, c * T.stop)
        assert viterbi_decode(c * P, scaled).tags == base


def test_viterbi_tie_breaks_to_lowest_id():
    best = viterbi_decode(np.zeros((3, 4)), TransitionModel.zeros(4))
    assert best.tags == [0, 0, 0]
    assert brute_force_best(np.zeros((3, 4)), TransitionModel.zeros(4)).tags == [0, 0, 0]


def test_batch_viterbi_variable_lengths(rng):
    T = random_transitions(rng, 3)
    P = rng.uniform(-2, 2, (3, 6, 3))
    lengths = np.array([6, 3, 1])
    paths, scores = batch_viterbi(P, lengths, T)
    for b, n in enumerate(lengths):
        single = viterbi_decode(P[b, :n], T)
        assert paths[b] == single.tags
        assert scores[b] == pytest.approx(single.score, abs=1e-12)


def test_oracle_equivalence_sample(rng):
    for _ in range(100):
        P, T = random_instance(rng)
        assert abs(log_partition(P, T) - brute_force_logZ(P, T)) <= 1e-9
        assert viterbi_decode(P, T).tags == brute_force_best(P, T).tags


def test_mask_blocks_cross_type_continuation():
    ls = LabelSet()
    mask = bio_constraint_mask(ls)
    assert mask.A[ls.id_of("B-LOC"), ls.id_of("I-ORG")] == NEG_INF
    assert mask.A[ls.id_of("B-PER"), ls.id_of("I-PER")] == 0.0
    assert mask.A[ls.id_of("I-PER"), ls.id_of("I-PER")] == 0.0
    assert mask.A[ls.id_of("O"), ls.id_of("I-PER")] == NEG_INF
    assert mask.A[ls.id_of("I-LOC"), ls.id_of("B-PER")] == 0.0
    assert mask.start[ls.id_of("I-CRI")] == NEG_INF and mask.start[ls.id_of("B-CRI")] == 0.0
    assert not mask.stop.any()


def test_mask_counts():
    mask = bio_constraint_mask(LabelSet())
    # each of 5 I- labels: 11 predecessors minus its own B- and I-
    assert (mask.A == NEG_INF).sum() == 5 * 9
    assert (mask.start == NEG_INF).sum() == 5


def test_mask_rejects_malformed_labels():
    class Fake:
        labels = ("B-PER", "X-PER")
    with pytest.raises(ValueError):
        bio_constraint_mask(Fake())


def test_masked_decode_is_valid_bio(rng):
    ls = LabelSet()
    mask = bio_constraint_mask(ls)
    for _ in range(200):
        n = int(rng.integers(1, 15))
        P = rng.uniform(-2, 2, (n, len(ls)))
        T = random_transitions(rng, len(ls)) + mask
        tags = viterbi_decode(P, T).tags
        assert validate_bio([ls.label_of(t) for t in tags]) == []
