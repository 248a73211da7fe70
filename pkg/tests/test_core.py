import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from corrfuse import (
    CfmParams, IfmParams, LabeledDataset, LabeledExample, Simplex, ValidationError, entropy, log_loss,
    make_simplex,
)
from corrfuse.core import EPS, clamp_normalize, entropies, log_losses

raw_vectors = arrays(np.float64, st.integers(2, 8), elements=st.floats(0, 1e6)).filter(lambda v: v.sum() > 0)


class TestMakeSimplex:
    def test_valid_input_is_kept(self):
        np.testing.assert_allclose(make_simplex([0.6, 0.2, 0.2]).probs, [0.6, 0.2, 0.2], rtol=0, atol=1e-15)

    def test_normalizes(self):
        np.testing.assert_allclose(make_simplex([3, 1, 1]).probs, [0.6, 0.2, 0.2], atol=1e-15)

    def test_clamps_zeros(self):
        p = make_simplex([1, 0, 0]).probs
        assert p[1] == EPS and p[2] == EPS
        assert p[0] == pytest.approx(1 - 2e-9, abs=1e-15)

    @pytest.mark.parametrize("bad", [[1.0], [0.5, -0.1, 0.6], [np.nan, 1.0], [np.inf, 1.0], [0.0, 0.0]])
    def test_rejects(self, bad):
        with pytest.raises(ValidationError):
            make_simplex(bad)

    def test_rejects_matrix(self):
        with pytest.raises(ValidationError):
            make_simplex(np.ones((2, 2)))

    @given(raw_vectors)
    @settings(max_examples=300)
    def test_invariants(self, v):
        p = make_simplex(v).probs
        assert abs(p.sum() - 1.0) <= 1e-9
        assert np.all(p >= EPS) and np.all(p <= 1.0)

    @given(raw_vectors)
    @settings(max_examples=300)
    def test_idempotent_bitwise(self, v):
        p = make_simplex(v)
        assert np.array_equal(make_simplex(p.probs).probs, p.probs)
        assert make_simplex(p) is p

    def test_batch_clamp_is_idempotent(self, rng):
        X = rng.dirichlet([0.05, 0.05, 0.05], size=(500, 2))
        once = clamp_normalize(X)
        assert np.array_equal(clamp_normalize(once), once)
        assert once.min() >= EPS


class TestSimplexType:
    def test_raw_constructor_checks_sum(self):
        with pytest.raises(ValidationError):
            Simplex(np.array([0.5, 0.6]))

    def test_raw_constructor_checks_positivity(self):
        with pytest.raises(ValidationError):
            Simplex(np.array([1.0, 0.0]))

    def test_immutable(self):
        p = make_simplex([1, 2, 3])
        with pytest.raises(ValueError):
            p.probs[0] = 0.5

    def test_map_label_ties_break_low(self):
        assert make_simplex([0.4, 0.4, 0.2]).map_label() == 1
        assert make_simplex([0.2, 0.4, 0.4]).map_label() == 2


class TestEntropy:
    def test_uniform(self):
        assert entropy([1 / 3] * 3) == pytest.approx(math.log(3), abs=1e-12)

    def test_degenerate(self):
        assert entropy([1, 0, 0]) == pytest.approx(0.0, abs=1e-7)

    def test_value(self):
        assert entropy([0.6, 0.2, 0.2]) == pytest.approx(0.9502705392332347, abs=1e-12)

    @given(raw_vectors, st.randoms())
    def test_permutation_invariant_and_bounded(self, v, rnd):
        p = make_simplex(v).probs
        perm = list(range(p.size))
        rnd.shuffle(perm)
        h = entropy(p)
        assert h == pytest.approx(entropy(p[perm]), abs=1e-12)
        assert -1e-12 <= h <= math.log(p.size) + 1e-12

    def test_vectorized_matches(self, rng):
        P = rng.dirichlet([1, 1, 1], 50)
        np.testing.assert_allclose(entropies(P), [entropy(p) for p in P], atol=1e-13)


class TestLogLoss:
    def test_certain_correct(self):
        assert log_loss([1, 0, 0], 1) == pytest.approx(0.0, abs=1e-8)

    @pytest.mark.parametrize("t", [1, 2, 3])
    def test_uniform(self, t):
        assert log_loss([1 / 3] * 3, t) == pytest.approx(math.log(3), abs=1e-12)

    def test_value(self):
        assert log_loss([0.6, 0.2, 0.2], 2) == pytest.approx(-math.log(0.2), abs=1e-12)

    @pytest.mark.parametrize("t", [0, 4, 1.5])
    def test_label_range(self, t):
        with pytest.raises(ValidationError):
            log_loss([0.6, 0.2, 0.2], t)

    @given(raw_vectors, st.randoms(), st.data())
    def test_permutation(self, v, rnd, data):
        p = make_simplex(v).probs
        t = data.draw(st.integers(1, p.size))
        perm = list(range(p.size))
        rnd.shuffle(perm)
        # class t sits at position perm.index(t - 1) after permuting
        assert log_loss(p, t) == pytest.approx(log_loss(p[perm], perm.index(t - 1) + 1), abs=1e-12)

    def test_vectorized_matches(self, rng):
        P = rng.dirichlet([1, 1, 1], 50)
        t = rng.integers(1, 4, 50)
        np.testing.assert_allclose(log_losses(P, t), [log_loss(p, s) for p, s in zip(P, t)], atol=1e-13)


class TestDataset:
    def test_shapes_and_defaults(self):
        d = LabeledDataset(np.full((2, 2, 3), 1 / 3), np.array([1, 3]))
        assert (d.I, d.K, d.J) == (2, 2, 3)
        assert d.ids == ("e1", "e2")
        assert list(d.class_counts()) == [1, 0, 1]

    def test_label_range(self):
        with pytest.raises(ValidationError):
            LabeledDataset(np.full((1, 2, 3), 1 / 3), np.array([4]))

    def test_needs_examples(self):
        with pytest.raises(ValidationError):
            LabeledDataset(np.zeros((0, 2, 3)), np.array([], dtype=int))

    def test_examples_round_trip(self):
        d = LabeledDataset(np.array([[[0.6, 0.2, 0.2], [0.5, 0.3, 0.2]]]), np.array([2]))
        ex = d.examples[0]
        assert isinstance(ex, LabeledExample) and ex.label == 2
        again = LabeledDataset.from_examples([ex])
        assert np.array_equal(again.outputs, d.outputs)

    def test_example_dimension_check(self):
        with pytest.raises(ValidationError):
            LabeledExample((make_simplex([1, 1]), make_simplex([1, 1, 1])), 1)

    def test_subset_mask_and_index(self):
        d = LabeledDataset(np.full((4, 2, 3), 1 / 3), np.array([1, 2, 3, 1]))
        assert d.subset(d.labels == 1).ids == ("e1", "e4")
        assert d.subset([2]).ids == ("e3",)


class TestParams:
    def test_ifm_defaults_uniform_prior(self):
        p = IfmParams(np.ones((2, 3, 3)))
        np.testing.assert_allclose(p.prior_p, 1 / 3)
        assert p.classifier(1).K == 1

    @pytest.mark.parametrize("alpha", [np.ones((2, 3, 2)), -np.ones((1, 3, 3)), np.zeros((1, 2, 2))])
    def test_ifm_invalid(self, alpha):
        with pytest.raises(ValidationError):
            IfmParams(alpha)

    def test_cfm_closed_bound(self):
        a = np.array([np.eye(3) + 2, np.eye(3) + 2])
        CfmParams(IfmParams(a), a[0])  # delta == alpha is allowed
        with pytest.raises(ValidationError):
            CfmParams(IfmParams(a), a[0] + 1e-9)
        with pytest.raises(ValidationError):
            CfmParams(IfmParams(a), -np.ones((3, 3)))

    def test_cfm_needs_two_classifiers(self):
        with pytest.raises(ValidationError):
            CfmParams(IfmParams(np.ones((3, 2, 2))), np.zeros((2, 2)))
