import numpy as np
import pytest

from offpolicy.core import FeatureVector, GvfSpec, TabularPolicy, Transition
from offpolicy.environments import CollisionProblem, Problem

GAMMA = 0.9

X, Y = 0, 1
A1, A2 = 0, 1


class TwoStateProblem(Problem):
    """
    x --a1--> y, x --a2--> x, y --a1--> terminal (reward 1, restart in x),
    y --a2--> y. The behavior is 0.5 / 0.5 everywhere and the target always takes a1.
    """

    name = "two-state"
    episodic = True

    def __init__(self, features=None):
        features = features or [FeatureVector.one_hot(2, X), FeatureVector.one_hot(2, Y)]
        target = TabularPolicy([[1.0, 0.0], [1.0, 0.0]])
        gvf = GvfSpec(name="two-state", target=target,
                      cumulant=lambda s, a, n: 1.0 if (s, a) == (Y, A1) else 0.0,
                      discount=lambda s, a, n: 0.0 if (s, a) == (Y, A1) else GAMMA,
                      interest=lambda s: 1.0)
        super().__init__(TabularPolicy([[0.5, 0.5], [0.5, 0.5]]), [gvf], features)

    def reset(self, rng):
        return X

    def outcomes(self, state, action):
        table = {(X, A1): Y, (X, A2): X, (Y, A1): X, (Y, A2): Y}
        return [(1.0, table[(state, action)])]

    def next_state(self, state, action, rng):
        return self.outcomes(state, action)[0][1]

    def is_terminal(self, state, action):
        return (state, action) == (Y, A1)

    def transition(self, s, a, episode_start=False):
        s_next = self.next_state(s, a, None)
        g = self.gvfs[0]
        return Transition(s=s, a=a, s_next=s_next,
                          reward=g.cumulant(s, a, s_next), gamma_next=g.gamma(s, a, s_next),
                          pi_prob=g.target.prob(s, a), b_prob=self.behavior.prob(s, a),
                          interest=1.0, x=self.features[s], x_next=self.features[s_next],
                          episode_start=episode_start)


def make_transition(x, x_next, reward=0.0, gamma=GAMMA, pi=1.0, b=1.0, interest=1.0,
                    episode_start=False, s=0, a=0, s_next=1):
    return Transition(s=s, a=a, s_next=s_next, reward=reward, gamma_next=gamma,
                      pi_prob=pi, b_prob=b, interest=interest,
                      x=FeatureVector.from_dense(x), x_next=FeatureVector.from_dense(x_next),
                      episode_start=episode_start)


def collision_stream(n, seed=0, features="binary"):
    problem = CollisionProblem(features=features, seed=seed)
    rng = np.random.default_rng(seed)
    s = problem.reset(rng)
    episode_start = True
    stream = []
    for _ in range(n):
        transitions, s, done = problem.step(s, rng, episode_start=episode_start)
        stream.append(transitions[0])
        episode_start = done
    return stream


def synthetic_stream(n, seed=0, dim=4, n_states=5, gamma=GAMMA, on_policy=False):
    """
    A continuing stream with a constant discount and dense random features.
    On-policy every action has probability 0.25 under both policies;
    off-policy the target probability is one of 0, 0.2, 0.3 or 0.5.
    """
    rng = np.random.default_rng(seed)
    features = [FeatureVector.from_dense(rng.normal(scale=0.5, size=dim)) for _ in range(n_states)]
    s = 0
    stream = []
    for _ in range(n):
        s_next = int(rng.integers(n_states))
        pi = 0.25 if on_policy else float(rng.choice([0.0, 0.2, 0.3, 0.5]))
        stream.append(Transition(s=s, a=0, s_next=s_next, reward=float(rng.normal()),
                                 gamma_next=gamma, pi_prob=pi, b_prob=0.25, interest=1.0,
                                 x=features[s], x_next=features[s_next]))
        s = s_next
    return stream


@pytest.fixture
def two_state():
    return TwoStateProblem()


@pytest.fixture
def transition_factory():
    return make_transition


@pytest.fixture
def collision_transitions():
    return collision_stream


@pytest.fixture
def synthetic_transitions():
    return synthetic_stream
