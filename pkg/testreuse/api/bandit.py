"""
The contextual-bandit machinery: epsilon-greedy arm selection, the policy update, the adaptive training loop that
eliminates ineffective arms and promotes effective ones into a test list, and the plain training loop without
elimination.

Arms are test ids. Rewards are coverage increments in percent.
"""

import logging
import math
from abc import ABC, abstractmethod
from collections import OrderedDict, namedtuple
from typing import List, MutableSequence, Optional, Sequence, Tuple

import numpy as np

import testreuse as testreuse_
from testreuse.data import TestKind, TrainedList
from testreuse.errors import StructuralError

logger = logging.getLogger(__name__)

TrainingStep = namedtuple('TrainingStep', ('step', 'context', 'arm', 'reward', 'action'))

INIT = 'init'
KEEP = 'keep'
DROP = 'drop'
PROMOTE = 'promote'


class RewardSource(ABC):
    """
    Reveals the reward of pulling an arm under one coverage context.
    """

    context = None  # type: Optional[float]

    @abstractmethod
    def reward(self, test_id):
        # type: (str) -> float
        pass


class ArmStats:

    __slots__ = ('test_id', 'r_hat', 'pulls')

    def __init__(self, test_id, r_hat=0.0, pulls=0):
        # type: (str, float, int) -> None
        self.test_id = test_id
        self.r_hat = r_hat
        self.pulls = pulls

    def __repr__(self):
        return 'ArmStats(%r, r_hat=%r, pulls=%d)' % (self.test_id, self.r_hat, self.pulls)


class PolicyState:
    """
    The training state of one coverage context.

    `temp_arms` holds at most k arms in play, `promoted` the arms already moved to the test list with the weight they
    had when promoted. The selection weight of an arm in play is its share of the summed moving-average rewards, in
    percent; with no reward observed yet the weights are uniform.
    """

    def __init__(self, context=None, epsilon=0.2):
        # type: (Optional[float], float) -> None
        self.context = context
        self.epsilon = epsilon
        self.temp_arms = OrderedDict()  # type: OrderedDict[str, ArmStats]
        self.promoted = []  # type: List[Tuple[str, float]]
        self._r_sum = 0.0

    def add_arm(self, test_id):
        # type: (str) -> ArmStats
        if test_id in self.temp_arms or any(t == test_id for t, _ in self.promoted):
            raise StructuralError(error='duplicate_arm', description='Arm %r is already known.' % test_id)
        stats = self.temp_arms[test_id] = ArmStats(test_id)
        return stats

    def remove_arm(self, test_id):
        # type: (str) -> ArmStats
        stats = self.temp_arms.pop(test_id)
        self._r_sum = math.fsum(a.r_hat for a in self.temp_arms.values())
        return stats

    def observe(self, stats, reward):
        # type: (ArmStats, float) -> None
        old = stats.r_hat
        stats.r_hat = (stats.r_hat * stats.pulls + reward) / (stats.pulls + 1)
        stats.pulls += 1
        self._r_sum += stats.r_hat - old

    def weight(self, test_id):
        # type: (str) -> float
        """
        :return: The selection weight of an arm in play, in percent.
        """
        if self._r_sum <= 0:
            return 100.0 / len(self.temp_arms)
        return 100.0 * self.temp_arms[test_id].r_hat / self._r_sum

    @property
    def temp_policy(self):
        # type: () -> OrderedDict
        return OrderedDict((a, self.weight(a)) for a in self.temp_arms)


class Bandit:

    def __init__(self, workbench):
        # type: (testreuse_.Workbench) -> None
        self.workbench = workbench

    def select_arm(self, state, rng):
        # type: (PolicyState, np.random.Generator) -> str
        """
        Epsilon-greedy selection: with probability epsilon a uniformly random arm in play, otherwise the arm with the
        highest moving-average reward (ties go to the fewest pulls, then the smallest id).

        :raises StructuralError: When no arm is in play.
        """
        if not state.temp_arms:
            raise StructuralError(error='no_arms', description='Cannot select from an empty arm set.')
        if rng.random() < state.epsilon:
            arms = list(state.temp_arms)
            return arms[int(rng.integers(len(arms)))]
        return min(state.temp_arms.values(), key=lambda a: (-a.r_hat, a.pulls, a.test_id)).test_id

    def update_policy(self, state, arm, reward):
        # type: (PolicyState, str, float) -> PolicyState
        """
        Folds `reward` into the moving average of `arm`, which re-weights every arm in play.

        :raises StructuralError: For an arm not in play or a negative reward.
        """
        stats = state.temp_arms.get(arm)
        if stats is None:
            raise StructuralError(error='unknown_arm', description='Arm %r is not in play.' % arm)
        if reward < 0:
            raise StructuralError(error='negative_reward', description='Reward %r of arm %r is negative.' % (
                reward, arm
            ))
        state.observe(stats, reward)
        return state

    def normalize_policy(self, entries):
        # type: (Sequence[Tuple[str, float]]) -> List[Tuple[str, float]]
        """
        Rescales weights into probabilities.

        :raises StructuralError: When a weight is negative or all are zero.
        """
        if any(w < 0 for _, w in entries):
            raise StructuralError(error='negative_weight', description='Policy weights must be non-negative.')
        total = math.fsum(w for _, w in entries)
        if not total > 0:
            raise StructuralError(error='zero_policy', description='Cannot normalize an all-zero policy.')
        return [(a, w / total) for a, w in entries]

    def adaptive_cb_train(
        self,
        corpus,  # type: Sequence[str]
        env,  # type: RewardSource
        k,  # type: int
        gamma,  # type: int
        theta,  # type: float
        n,  # type: int
        rng,  # type: np.random.Generator
        epsilon=None,  # type: Optional[float]
        log=None  # type: Optional[MutableSequence[TrainingStep]]
    ):
        # type: (...) -> Tuple[TrainedList, List[str]]
        """
        Trains the coverage list of one context.

        k random corpus tests are put in play and pulled once each. Each of the `n` steps then selects an arm, reveals
        its reward and updates the policy. Once an arm has been pulled `gamma` times (counting the first pull), it is
        dropped if its moving-average reward is zero, or promoted into the list if its selection weight reaches
        `theta`. Either way a random test from the rest of the corpus takes its place; when the corpus runs out, fewer
        arms stay in play.

        :param theta:

            The adaptive threshold, a selection weight in percent (a uniform policy over k arms weighs 100 / k).

        :param log:

            (optional) A list that receives a `TrainingStep` for every pull.

        :return:

            The trained list (promoted tests with their weights normalized) and the corpus without the listed tests,
            in corpus order.
        """
        if epsilon is None:
            epsilon = self.workbench.config.epsilon
        context = env.context
        if not corpus:
            return TrainedList(context=context), []
        pool = list(corpus)
        state = PolicyState(context=context, epsilon=epsilon)

        def refill():
            if pool:
                state.add_arm(pool.pop(int(rng.integers(len(pool)))))

        def check(arm, stats):
            if stats.pulls < gamma:
                return KEEP
            if stats.r_hat == 0:
                state.remove_arm(arm)
                refill()
                return DROP
            weight = state.weight(arm)
            if weight >= theta:
                state.remove_arm(arm)
                state.promoted.append((arm, weight))
                refill()
                return PROMOTE
            return KEEP

        for _ in range(min(k, len(pool))):
            refill()
        for arm in list(state.temp_arms):
            reward = env.reward(arm)
            self.update_policy(state, arm, reward)
            if log is not None:
                log.append(TrainingStep(0, context, arm, reward, INIT))
        for arm in [a for a in state.temp_arms]:
            if arm in state.temp_arms:
                action = check(arm, state.temp_arms[arm])
                if action != KEEP and log is not None:
                    log.append(TrainingStep(0, context, arm, 0.0, action))

        for step in range(1, n + 1):
            if not state.temp_arms:
                break
            arm = self.select_arm(state, rng)
            reward = env.reward(arm)
            self.update_policy(state, arm, reward)
            action = check(arm, state.temp_arms[arm])
            if log is not None:
                log.append(TrainingStep(step, context, arm, reward, action))

        entries = self.normalize_policy(state.promoted) if state.promoted else []
        listed = {a for a, _ in entries}
        logger.debug(
            'Context %s: promoted %d tests, %d still in play, %d left in the corpus',
            context, len(entries), len(state.temp_arms), len(pool)
        )
        return (
            TrainedList(context=context, kind=TestKind.COVERAGE, entries=entries),
            [t for t in corpus if t not in listed]
        )

    def original_cb_train(
        self,
        corpus,  # type: Sequence[str]
        env,  # type: RewardSource
        k,  # type: int
        n,  # type: int
        rng,  # type: np.random.Generator
        epsilon=None,  # type: Optional[float]
        kind=TestKind.COVERAGE,  # type: TestKind
        log=None  # type: Optional[MutableSequence[TrainingStep]]
    ):
        # type: (...) -> TrainedList
        """
        The plain epsilon-greedy loop: k random corpus tests, each pulled once, then `n` steps of select, reward and
        update, with no elimination or promotion.

        :return:

            All k arms with the probabilities of the final epsilon-greedy policy: (1 - epsilon) times the arm's share
            of the summed moving-average rewards plus epsilon / k. Arms that never earned a reward keep the uniform
            residual epsilon / k; with epsilon = 0 they are left out.
        """
        if epsilon is None:
            epsilon = self.workbench.config.epsilon
        context = env.context
        pool = list(corpus)
        if not pool:
            return TrainedList(context=context, kind=kind)
        state = PolicyState(context=context, epsilon=epsilon)
        for _ in range(min(k, len(pool))):
            state.add_arm(pool.pop(int(rng.integers(len(pool)))))
        for arm in list(state.temp_arms):
            reward = env.reward(arm)
            self.update_policy(state, arm, reward)
            if log is not None:
                log.append(TrainingStep(0, context, arm, reward, INIT))
        for step in range(1, n + 1):
            arm = self.select_arm(state, rng)
            reward = env.reward(arm)
            self.update_policy(state, arm, reward)
            if log is not None:
                log.append(TrainingStep(step, context, arm, reward, KEEP))

        arms = len(state.temp_arms)
        weights = [
            (a, (1.0 - epsilon) * w / 100.0 + epsilon / arms)
            for a, w in state.temp_policy.items()
        ]
        entries = self.normalize_policy([(a, w) for a, w in weights if w > 0])
        return TrainedList(context=context, kind=kind, entries=entries)
