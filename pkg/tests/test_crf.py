import math

import numpy as np
import pytest

from layermix.crf import (
    CrfParams,
    log_partition,
    marginals,
    nll_and_grad,
    score_sequence,
    viterbi_decode,
)
from tests.helpers import (
    crf_brute_best,
    crf_brute_log_partition,
    crf_path_score,
    finite_difference,
    max_rel_err,
    random_crf_instance,
)


def params_from(transitions, start, end):
    return CrfParams(
        transitions=np.asarray(transitions, dtype=np.float64),
        start=np.asarray(start, dtype=np.float64),
        end=np.asarray(end, dtype=np.float64),
    )


def random_params(rng, num_tags):
    return params_from(
        rng.normal(size=(num_tags, num_tags)), rng.normal(size=num_tags), rng.normal(size=num_tags)
    )


class TestScoreSequence:
    def test_named_entries(self):
        crf = params_from([[0.0, 0.0], [0.0, 0.5]], [0.0, 0.0], [0.0, 0.0])
        emissions = np.array([[1.0, 2.0], [0.0, 1.0]])
        assert score_sequence(emissions, crf, [1, 1]) == pytest.approx(3.5)

    def test_all_zero_instance(self):
        crf = params_from(np.zeros((3, 3)), np.zeros(3), np.zeros(3))
        emissions = np.zeros((4, 3))
        for tags in ([0, 1, 2, 0], [2, 2, 2, 2]):
            assert score_sequence(emissions, crf, tags) == 0.0

    def test_matches_independent_summation(self):
        rng = np.random.default_rng(0)
        for _ in range(30):
            emissions, transitions, start, end, gold = random_crf_instance(rng)
            crf = params_from(transitions, start, end)
            expected = crf_path_score(emissions, transitions, start, end, tuple(gold))
            assert score_sequence(emissions, crf, gold) == expected

    def test_length_and_range_errors(self):
        crf = params_from(np.zeros((2, 2)), np.zeros(2), np.zeros(2))
        with pytest.raises(ValueError):
            score_sequence(np.zeros((2, 2)), crf, [0])
        with pytest.raises(ValueError):
            score_sequence(np.zeros((2, 2)), crf, [0, 5])


class TestLogPartition:
    def test_single_position_closed_form(self):
        crf = params_from(np.zeros((2, 2)), np.zeros(2), np.zeros(2))
        value = log_partition(np.array([[1.0, 2.0]]), crf)
        assert value == pytest.approx(2.313261687518223, rel=1e-12)

    def test_all_zero_instance_gives_n_log_t(self):
        for n, num_tags in ((1, 2), (3, 4), (5, 3)):
            crf = params_from(np.zeros((num_tags, num_tags)), np.zeros(num_tags), np.zeros(num_tags))
            value = log_partition(np.zeros((n, num_tags)), crf)
            assert value == pytest.approx(n * math.log(num_tags), rel=1e-12)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(1)
        for _ in range(60):
            emissions, transitions, start, end, _ = random_crf_instance(rng)
            crf = params_from(transitions, start, end)
            brute = crf_brute_log_partition(emissions, transitions, start, end)
            mine = log_partition(emissions, crf)
            assert abs(mine - brute) / max(abs(brute), 1.0) < 1e-10

    def test_upper_bounds_any_path_score(self):
        # ">= 0" up to float reordering noise: when one path holds nearly all
        # mass the two accumulation orders can differ by ~1 ulp
        rng = np.random.default_rng(2)
        for _ in range(30):
            emissions, transitions, start, end, gold = random_crf_instance(rng)
            crf = params_from(transitions, start, end)
            gap = log_partition(emissions, crf) - score_sequence(emissions, crf, gold)
            assert gap >= -1e-12


class TestNll:
    def test_symmetric_single_position(self):
        crf = params_from(np.zeros((2, 2)), np.zeros(2), np.zeros(2))
        loss, grad_e, grad_crf = nll_and_grad(np.zeros((1, 2)), crf, [0])
        assert loss == pytest.approx(math.log(2), rel=1e-12)
        np.testing.assert_allclose(grad_e, [[-0.5, 0.5]], atol=1e-12)
        np.testing.assert_allclose(grad_crf.start, [-0.5, 0.5], atol=1e-12)

    def test_dominant_gold_path_loss_near_zero(self):
        rng = np.random.default_rng(3)
        n, num_tags = 4, 3
        gold = rng.integers(0, num_tags, n)
        emissions = np.full((n, num_tags), -1000.0)
        emissions[np.arange(n), gold] = 1000.0
        crf = params_from(np.zeros((num_tags, num_tags)), np.zeros(num_tags), np.zeros(num_tags))
        loss, _, _ = nll_and_grad(emissions, crf, gold)
        assert abs(loss) < 1e-9

    def test_nll_nonnegative(self):
        # gold path probability <= 1, so the loss is >= 0 up to ~1 ulp of
        # float reordering noise in single-path-mass limits
        rng = np.random.default_rng(4)
        for _ in range(50):
            emissions, transitions, start, end, gold = random_crf_instance(rng)
            crf = params_from(transitions, start, end)
            loss, _, _ = nll_and_grad(emissions, crf, gold)
            assert loss >= -1e-12

    def test_unary_marginals_sum_to_one(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            emissions, transitions, start, end, _ = random_crf_instance(rng)
            crf = params_from(transitions, start, end)
            unary, pairwise, _ = marginals(emissions, crf)
            np.testing.assert_allclose(unary.sum(axis=1), 1.0, atol=1e-10)
            if len(pairwise):
                np.testing.assert_allclose(pairwise.sum(axis=(1, 2)), 1.0, atol=1e-10)

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            emissions, transitions, start, end, gold = random_crf_instance(rng)
            crf = params_from(transitions, start, end)

            def loss():
                return nll_and_grad(emissions, crf, gold)[0]

            _, grad_e, grad_crf = nll_and_grad(emissions, crf, gold)
            numeric = finite_difference(
                loss,
                {
                    "emissions": emissions,
                    "transitions": crf.transitions,
                    "start": crf.start,
                    "end": crf.end,
                },
            )
            assert max_rel_err(grad_e, numeric["emissions"]) < 1e-4
            assert max_rel_err(grad_crf.transitions, numeric["transitions"]) < 1e-4
            assert max_rel_err(grad_crf.start, numeric["start"]) < 1e-4
            assert max_rel_err(grad_crf.end, numeric["end"]) < 1e-4


class TestViterbi:
    def test_single_position(self):
        crf = params_from(np.zeros((2, 2)), np.zeros(2), np.zeros(2))
        tags, score = viterbi_decode(np.array([[1.0, 2.0]]), crf)
        np.testing.assert_array_equal(tags, [1])
        assert score == pytest.approx(2.0)

    def test_all_zero_ties_break_to_lowest_index(self):
        crf = params_from(np.zeros((3, 3)), np.zeros(3), np.zeros(3))
        tags, score = viterbi_decode(np.zeros((5, 3)), crf)
        np.testing.assert_array_equal(tags, np.zeros(5, dtype=np.int64))
        assert score == 0.0

    def test_matches_brute_force_max(self):
        rng = np.random.default_rng(7)
        for _ in range(60):
            emissions, transitions, start, end, _ = random_crf_instance(rng)
            crf = params_from(transitions, start, end)
            brute_score, _ = crf_brute_best(emissions, transitions, start, end)
            tags, score = viterbi_decode(emissions, crf)
            assert score == brute_score
            assert score == score_sequence(emissions, crf, tags)

    def test_returned_score_is_reconstructible(self):
        rng = np.random.default_rng(8)
        for _ in range(30):
            emissions, transitions, start, end, _ = random_crf_instance(rng)
            crf = params_from(transitions, start, end)
            tags, score = viterbi_decode(emissions, crf)
            assert abs(score - score_sequence(emissions, crf, tags)) <= 1e-12
