from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from testreuse.api.bandit import DROP, INIT, PROMOTE, ArmStats, PolicyState
from testreuse.data import TestKind
from testreuse.errors import StructuralError

from conftest import FixedRewards

EFFECTIVE = ['arm%03d' % i for i in range(0, 200, 20)]


def planted_env():
    """200 arms, of which 10 earn a reward."""
    return FixedRewards({a: 1.0 for a in EFFECTIVE}, context=55.0)


def arms(count):
    return ['arm%03d' % i for i in range(count)]


def state_with(rewards, epsilon=0.0):
    state = PolicyState(context=55.0, epsilon=epsilon)
    for arm, r_hat in rewards.items():
        stats = state.add_arm(arm)
        if r_hat is not None:
            state.observe(stats, r_hat)
    return state


class TestSelectArm:

    def test_greedy(self, workbench):
        state = state_with({'a': 0.5, 'b': 2.0, 'c': 1.0})
        assert workbench.bandit.select_arm(state, np.random.default_rng(0)) == 'b'

    def test_ties_prefer_fewest_pulls_then_id(self, workbench):
        state = state_with({'b': 0.0, 'a': 0.0, 'c': None})
        assert workbench.bandit.select_arm(state, np.random.default_rng(0)) == 'c'
        state = state_with({'b': 0.0, 'a': 0.0})
        assert workbench.bandit.select_arm(state, np.random.default_rng(0)) == 'a'

    def test_exploration_is_uniform(self, workbench):
        state = state_with({'a': 1.0, 'b': 0.0, 'c': 0.0, 'd': 0.0}, epsilon=1.0)
        rng = np.random.default_rng(1)
        counts = Counter(workbench.bandit.select_arm(state, rng) for _ in range(4000))
        assert set(counts) == {'a', 'b', 'c', 'd'}
        assert all(800 < c < 1200 for c in counts.values())

    def test_greedy_arm_frequency(self, workbench):
        """At epsilon 0.2 over two arms the best arm is chosen 0.8 + 0.2 / 2 of the time."""
        state = state_with({'a': 1.0, 'b': 0.5}, epsilon=0.2)
        rng = np.random.default_rng(6)
        draws = 20000
        chosen = sum(1 for _ in range(draws) if workbench.bandit.select_arm(state, rng) == 'a')
        assert chosen / draws == pytest.approx(0.9, abs=0.015)

    @pytest.mark.parametrize('scale', [1e-3, 7.0, 1e6])
    def test_rescaled_rewards_keep_the_greedy_arm(self, workbench, scale):
        rewards = {'a': 0.5, 'b': 2.0, 'c': 1.0}
        state = state_with({arm: r * scale for arm, r in rewards.items()})
        assert workbench.bandit.select_arm(state, np.random.default_rng(0)) == 'b'

    def test_empty(self, workbench):
        with pytest.raises(StructuralError):
            workbench.bandit.select_arm(PolicyState(), np.random.default_rng(0))


class TestUpdatePolicy:

    def test_moving_average(self, workbench):
        state = state_with({'a': None, 'b': None})
        for reward in (1.0, 2.0, 6.0):
            workbench.bandit.update_policy(state, 'a', reward)
        stats = state.temp_arms['a']
        assert (stats.r_hat, stats.pulls) == (pytest.approx(3.0), 3)

    def test_weights(self, workbench):
        """Weights are shares of the summed moving averages, uniform before any reward."""
        state = state_with({'a': None, 'b': None})
        assert state.temp_policy == {'a': 50.0, 'b': 50.0}
        workbench.bandit.update_policy(state, 'a', 3.0)
        workbench.bandit.update_policy(state, 'b', 1.0)
        assert state.weight('a') == pytest.approx(75.0)
        assert sum(state.temp_policy.values()) == pytest.approx(100.0)

    def test_unknown_arm(self, workbench):
        with pytest.raises(StructuralError):
            workbench.bandit.update_policy(state_with({'a': None}), 'z', 1.0)

    def test_negative_reward(self, workbench):
        with pytest.raises(StructuralError):
            workbench.bandit.update_policy(state_with({'a': None}), 'a', -0.5)

    def test_remove_arm_rebalances(self):
        state = state_with({'a': 3.0, 'b': 1.0})
        state.remove_arm('a')
        assert state.weight('b') == pytest.approx(100.0)

    def test_duplicate_arm(self):
        with pytest.raises(StructuralError):
            state_with({'a': None}).add_arm('a')


class TestNormalizePolicy:

    def test_against_fractions(self, workbench):
        rng = np.random.default_rng(4)
        for _ in range(100):
            weights = [int(w) for w in rng.integers(0, 50, size=int(rng.integers(1, 10)))]
            if not any(weights):
                continue
            entries = [('a%d' % i, float(w)) for i, w in enumerate(weights)]
            total = sum(weights)
            for (arm, p), w in zip(workbench.bandit.normalize_policy(entries), weights):
                assert p == pytest.approx(float(Fraction(w, total)))

    def test_all_zero(self, workbench):
        with pytest.raises(StructuralError):
            workbench.bandit.normalize_policy([('a', 0.0), ('b', 0.0)])

    def test_singleton(self, workbench):
        assert workbench.bandit.normalize_policy([('a', 3.5)]) == [('a', 1.0)]

    @pytest.mark.parametrize('scale', [1e-3, 7.0, 1e6])
    def test_rescaling_keeps_the_argmax(self, workbench, scale):
        entries = [('a', 0.5), ('b', 2.0), ('c', 1.0)]
        probabilities = workbench.bandit.normalize_policy([(a, w * scale) for a, w in entries])
        assert max(probabilities, key=lambda e: e[1])[0] == 'b'
        unscaled = workbench.bandit.normalize_policy(entries)
        assert [p for _, p in probabilities] == pytest.approx([p for _, p in unscaled])

    def test_negative(self, workbench):
        with pytest.raises(StructuralError):
            workbench.bandit.normalize_policy([('a', 1.0), ('b', -1.0)])


class TestAdaptiveCbTrain:

    def train(self, workbench, seed=0, log=None):
        return workbench.bandit.adaptive_cb_train(
            arms(200), planted_env(), k=100, gamma=3, theta=5.0, n=10000, rng=np.random.default_rng(seed),
            epsilon=0.2, log=log
        )

    def test_recovers_effective_arms(self, workbench):
        """Every effective arm is promoted and no zero-reward arm is."""
        trained, residual = self.train(workbench)
        assert sorted(trained.test_ids) == EFFECTIVE
        assert trained.context == 55.0
        assert trained.kind == TestKind.COVERAGE
        trained.validate()
        assert residual == [a for a in arms(200) if a not in EFFECTIVE]

    def test_zero_arms_pulled_gamma_times(self, workbench):
        """A zero-reward arm is dropped on its third pull, never later."""
        log = []
        self.train(workbench, log=log)
        pulls = Counter(s.arm for s in log)
        drops = Counter(s.arm for s in log if s.action == DROP)
        for arm in arms(200):
            if arm not in EFFECTIVE:
                assert pulls[arm] == 3
                assert drops[arm] == 1
        assert sorted(s.arm for s in log if s.action == PROMOTE) == EFFECTIVE
        assert sum(1 for s in log if s.action == INIT) == 100

    def test_deterministic(self, workbench):
        first, _ = self.train(workbench, seed=3)
        second, _ = self.train(workbench, seed=3)
        assert first == second

    def test_unreachable_threshold_promotes_nothing(self, workbench):
        """Weights never exceed 100%."""
        trained, residual = workbench.bandit.adaptive_cb_train(
            arms(50), planted_env(), k=20, gamma=3, theta=101.0, n=2000, rng=np.random.default_rng(0)
        )
        assert len(trained) == 0
        assert residual == arms(50)

    def test_empty_corpus(self, workbench):
        trained, residual = workbench.bandit.adaptive_cb_train(
            [], planted_env(), k=10, gamma=3, theta=1.0, n=100, rng=np.random.default_rng(0)
        )
        assert len(trained) == 0
        assert residual == []

    def test_corpus_smaller_than_k(self, workbench):
        trained, _ = workbench.bandit.adaptive_cb_train(
            EFFECTIVE[:3] + ['x', 'y'], planted_env(), k=100, gamma=3, theta=5.0, n=500, rng=np.random.default_rng(0)
        )
        assert sorted(trained.test_ids) == EFFECTIVE[:3]


class TestOriginalCbTrain:

    def test_epsilon_greedy_mixture(self, workbench):
        """One rewarding arm out of four: it keeps (1 - epsilon) plus its share of the uniform residual."""
        env = FixedRewards({'a': 2.0}, context=60.0)
        trained = workbench.bandit.original_cb_train(
            ['a', 'b', 'c', 'd'], env, k=4, n=200, rng=np.random.default_rng(0), epsilon=0.2
        )
        probabilities = dict(zip(trained.test_ids, trained.probabilities))
        assert probabilities['a'] == pytest.approx(0.85)
        for arm in 'bcd':
            assert probabilities[arm] == pytest.approx(0.05)
        assert trained.context == 60.0

    def test_keeps_k_arms(self, workbench):
        trained = workbench.bandit.original_cb_train(
            arms(200), planted_env(), k=100, n=1000, rng=np.random.default_rng(0)
        )
        assert len(trained) == 100
        trained.validate()

    def test_kind(self, workbench):
        trained = workbench.bandit.original_cb_train(
            ['v0', 'v1'], FixedRewards({'v0': 1.0}), k=2, n=10, rng=np.random.default_rng(0),
            kind=TestKind.VULNERABILITY
        )
        assert trained.kind == TestKind.VULNERABILITY
        assert set(trained.test_ids) == {'v0', 'v1'}

    def test_empty_corpus(self, workbench):
        assert len(workbench.bandit.original_cb_train([], planted_env(), 10, 10, np.random.default_rng(0))) == 0


class TestArmStats:

    def test_repr(self):
        assert repr(ArmStats('a', 1.5, 2)) == "ArmStats('a', r_hat=1.5, pulls=2)"
