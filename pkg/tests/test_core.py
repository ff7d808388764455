import numpy as np
import pytest

from offpolicy.core import (CoverageError,
                            DimensionMismatchError,
                            FeatureVector,
                            GvfSpec,
                            InvalidFeatureError,
                            InvalidGvfError,
                            InvalidPolicyError,
                            TabularPolicy,
                            WeightSet,
                            predict,
                            rho,
                            td_error)


###############################################################################
# features
###############################################################################

def test_binary_feature_vector():
    x = FeatureVector.binary(6, [2, 0, 1])
    assert x.is_sparse
    assert list(x.indices) == [0, 1, 2]
    assert x.dense.tolist() == [1.0, 1.0, 1.0, 0.0, 0.0, 0.0]


@pytest.mark.parametrize("indices", [[1, 1], [2, 1], [6], [-1]])
def test_invalid_indices_are_rejected(indices):
    with pytest.raises(InvalidFeatureError):
        FeatureVector(6, indices=indices)


def test_dense_vector_is_immutable():
    x = FeatureVector.from_dense([1.0, 2.0])
    with pytest.raises(ValueError):
        x.dense[0] = 3.0


def test_sparse_and_dense_dot_products_agree_exactly():
    rng = np.random.default_rng(1)
    for _ in range(100):
        w = rng.normal(size=20) * 10.0 ** rng.integers(-8, 8, size=20)
        active = sorted(rng.choice(20, size=5, replace=False).tolist())
        sparse = FeatureVector.binary(20, active)
        dense = FeatureVector.from_dense(sparse.dense.copy())
        assert not dense.is_sparse
        assert sparse.dot(w) == dense.dot(w)
        assert sparse.dot(w, sparse=True) == sparse.dot(w, sparse=False)


def test_dot_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        FeatureVector.one_hot(3, 0).dot(np.zeros(4))


###############################################################################
# policies
###############################################################################

def test_policy_rows_must_sum_to_one():
    with pytest.raises(InvalidPolicyError):
        TabularPolicy([[0.5, 0.4]])
    with pytest.raises(InvalidPolicyError):
        TabularPolicy([[1.5, -0.5]])


def test_policy_sampling_follows_probabilities():
    policy = TabularPolicy([[0.25, 0.75]])
    rng = np.random.default_rng(0)
    draws = [policy.sample(0, rng) for _ in range(20000)]
    assert np.mean(draws) == pytest.approx(0.75, abs=0.02)


def test_deterministic_policy_sampling():
    policy = TabularPolicy([[0.0, 1.0], [1.0, 0.0]])
    rng = np.random.default_rng(0)
    assert policy.is_deterministic
    assert all(policy.sample(0, rng) == 1 for _ in range(100))
    assert all(policy.sample(1, rng) == 0 for _ in range(100))


def test_coverage():
    b = TabularPolicy([[1.0, 0.0], [0.5, 0.5]])
    assert b.covers(TabularPolicy([[1.0, 0.0], [1.0, 0.0]]))
    assert not b.covers(TabularPolicy([[0.0, 1.0], [1.0, 0.0]]))
    assert b.covers(TabularPolicy([[0.0, 1.0], [1.0, 0.0]]), states=[1])


###############################################################################
# GVFs and transitions
###############################################################################

def test_gvf_rejects_out_of_range_discount_and_interest():
    g = GvfSpec(name="bad", target=TabularPolicy([[1.0]]),
                cumulant=lambda s, a, n: 0.0, discount=lambda s, a, n: 1.5, interest=lambda s: -1.0)
    with pytest.raises(InvalidGvfError):
        g.gamma(0, 0, 0)
    with pytest.raises(InvalidGvfError):
        g.interest_of(0)


@pytest.mark.parametrize("pi, b, expected", [
    (1.0, 0.5, 2.0),
    (0.25, 0.25, 1.0),
    (0.5, 0.01, 50.0),
    (0.0, 0.5, 0.0),
])
def test_rho(transition_factory, pi, b, expected):
    t = transition_factory([1.0, 0.0], [0.0, 1.0], pi=pi, b=b)
    assert rho(t) == expected
    assert t.rho == expected


def test_rho_is_scale_covariant(transition_factory):
    a = transition_factory([1.0], [1.0], pi=0.3, b=0.6)
    b = transition_factory([1.0], [1.0], pi=0.3 * 0.5, b=0.6 * 0.5)
    assert rho(a) == pytest.approx(rho(b), rel=1e-15)


def test_zero_behavior_probability_is_a_coverage_error(transition_factory):
    with pytest.raises(CoverageError):
        transition_factory([1.0], [1.0], pi=1.0, b=0.0)


def test_td_error(transition_factory):
    t = transition_factory([1.0, 0.0], [0.0, 1.0], reward=0.0, gamma=0.9)
    assert td_error(np.array([0.5, 0.5]), t) == pytest.approx(-0.05)
    assert td_error(np.zeros(2), transition_factory([1.0, 0.0], [0.0, 1.0], reward=1.0)) == 1.0


def test_td_error_is_zero_for_equal_values_and_unit_discount(transition_factory):
    t = transition_factory([1.0, 0.0], [0.0, 1.0], reward=0.0, gamma=1.0)
    assert td_error(np.array([0.7, 0.7]), t) == 0.0


def test_td_error_homogeneous_part_is_linear(transition_factory):
    rng = np.random.default_rng(3)
    t = transition_factory(rng.normal(size=4), rng.normal(size=4), reward=0.0, gamma=0.9)
    w1, w2 = rng.normal(size=4), rng.normal(size=4)
    lhs = td_error(2.0 * w1 - 3.0 * w2, t)
    rhs = 2.0 * td_error(w1, t) - 3.0 * td_error(w2, t)
    assert lhs == pytest.approx(rhs, abs=1e-12)


###############################################################################
# weights
###############################################################################

def test_predict():
    assert predict(np.zeros(6), FeatureVector.binary(6, [0, 1, 2])) == 0.0
    assert predict(np.array([1, 1, 1, 0, 0, 0], dtype=float), FeatureVector.binary(6, [0, 1, 2])) == 3.0
    values = np.array([0.1, 0.2, 0.3])
    assert predict(values, FeatureVector.one_hot(3, 2)) == 0.3


def test_weight_set_shapes():
    single = WeightSet.zeros(5)
    assert single.dim == 5 and len(single.h) == 0
    double = WeightSet.zeros(5, secondary=True)
    assert len(double.h) == 5
    assert double.is_finite()
    double.w[0] = np.nan
    assert not double.is_finite()
