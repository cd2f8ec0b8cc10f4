"""Buyer behavior classes and the benchmark expert strategies.

Four buyer kinds are shipped: myopic one-shot optimizers, deep-lookahead
buyers (realized as the never-punished good strategy, which dominates any
strategy that risks the bad state), adversarial-bandit learners over a finite
expert family, and explore-then-commit learners that pair with the
mechanism's one-time reset.

Expert strategies map a projected history and a (gridded) valuation to a bid.
The family always contains the two benchmark experts the guarantees rely on:
the good strategy itself, and the bad-state threshold rule that bids the bad
reserve whenever the valuation clears the bad cutoff.
"""

from __future__ import annotations

import math
import warnings
from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .distributions import ValueDistribution
from .mechanism import AgentView, BuyerState, MechanismParams

__all__ = [
    "AgentError",
    "good_strategy_bid",
    "Agent",
    "GoodStrategyAgent",
    "LookaheadAgent",
    "MyopicAgent",
    "Exp3Agent",
    "EtcAgent",
    "ExpertAgent",
    "Exp3Learner",
    "ValueGrid",
    "Expert",
    "ExpertFamily",
    "evaluate_expert",
    "GOOD_TEMPLATE",
    "BAD_THRESHOLD",
    "ZERO_BID",
    "default_expert_family",
    "build_agent",
    "AGENT_KINDS",
]


class AgentError(ValueError):
    """Invalid agent configuration or learner usage."""


def good_strategy_bid(view: AgentView, value: float) -> float:
    """The never-punished good strategy.

    Below the uncleared threshold, bid the good reserve exactly when the
    valuation clears the good cutoff and zero otherwise; at or above the
    threshold, bid the reserve regardless of the valuation.
    """
    cfg = view.config
    if view.uncleared >= cfg.uncleared_threshold:
        return cfg.good_reserve
    return cfg.good_reserve if value >= cfg.good_cutoff else 0.0


# ---------------------------------------------------------------------------
# expert strategies
# ---------------------------------------------------------------------------

GOOD_TEMPLATE = "good-template"
BAD_THRESHOLD = "bad-threshold"
ZERO_BID = "zero"


@dataclass(frozen=True)
class ValueGrid:
    """Uniform bid/value grid; valuations snap down to the nearest grid point."""

    lo: float
    hi: float
    step: float

    def snap(self, v: float) -> float:
        if v <= self.lo:
            return self.lo
        if v >= self.hi:
            return self.hi
        return self.lo + math.floor((v - self.lo) / self.step) * self.step

    def levels(self, count: int) -> tuple[float, ...]:
        """Evenly spread interior bid levels, snapped onto the grid."""
        raw = np.linspace(self.lo, self.hi, count + 2)[1:-1]
        snapped = []
        for x in raw:
            s = self.snap(float(x))
            if s not in snapped:
                snapped.append(s)
        return tuple(snapped)


@dataclass(frozen=True)
class Expert:
    """A parameterized expert template.

    A ``level`` (and, for the bad-state rule, a ``cutoff``) of ``None`` means
    "use the current epoch's reserve/cutoff"; those two canonical experts
    evaluate the raw valuation so they reproduce the benchmark rules exactly,
    while fixed-level variants see the gridded valuation.
    """

    style: str
    level: Optional[float] = None
    cutoff: Optional[float] = None

    def describe(self) -> str:
        if self.style == ZERO_BID:
            return "zero"
        if self.level is None and self.cutoff is None:
            return self.style
        return f"{self.style}(level={self.level}, cutoff={self.cutoff})"


@dataclass(frozen=True)
class ExpertFamily:
    experts: tuple[Expert, ...]
    grid: ValueGrid

    def __len__(self) -> int:
        return len(self.experts)

    def bid(self, index: int, view: AgentView, buyer: int, value: float) -> float:
        return evaluate_expert(self.experts[index], view, buyer, value, self.grid)


def evaluate_expert(
    expert: Expert, view: AgentView, buyer: int, value: float, grid: ValueGrid
) -> float:
    """Deterministic bid of one expert for the buyer's current projection."""
    cfg = view.config
    in_bad = view.states[buyer] == BuyerState.BAD
    if expert.style == ZERO_BID:
        return 0.0
    if expert.style == BAD_THRESHOLD:
        if not in_bad:
            return 0.0
        canonical = expert.level is None and expert.cutoff is None
        level = cfg.bad_reserve if expert.level is None else expert.level
        cutoff = cfg.bad_cutoff if expert.cutoff is None else expert.cutoff
        v = value if canonical else grid.snap(value)
        return level if v >= cutoff else 0.0
    if expert.style == GOOD_TEMPLATE:
        if in_bad:
            return 0.0
        level = cfg.good_reserve if expert.level is None else expert.level
        v = value if expert.level is None else grid.snap(value)
        if view.uncleared >= cfg.uncleared_threshold:
            return level
        return level if v >= cfg.good_cutoff else 0.0
    raise AgentError(f"unknown expert style {expert.style!r}")


def default_expert_family(
    dist: ValueDistribution, levels: int = 6, grid_step: Optional[float] = None
) -> ExpertFamily:
    """Template family of size O(levels) containing both benchmark experts.

    The good strategy sits at index 0 so that exploration-order and tie-break
    conventions favor it.
    """
    lo, hi = dist.support_min, dist.support_max
    if hi <= lo:
        hi = lo + 1.0
    step = grid_step if grid_step is not None else (hi - lo) / 64.0
    grid = ValueGrid(lo, hi, step)
    experts = [Expert(GOOD_TEMPLATE), Expert(BAD_THRESHOLD), Expert(ZERO_BID)]
    for c in grid.levels(levels):
        experts.append(Expert(GOOD_TEMPLATE, level=c))
    for c in grid.levels(levels):
        experts.append(Expert(BAD_THRESHOLD, level=c, cutoff=c))
    return ExpertFamily(tuple(experts), grid)


# ---------------------------------------------------------------------------
# learners
# ---------------------------------------------------------------------------


class Exp3Learner:
    """Adversarial-bandit learner over N arms with multiplicative weights.

    Arm selection probabilities are ``(1-gamma) * w_i / sum(w) + gamma / N``.
    Realized utilities are clipped at zero and scaled by the value-range bound
    before the importance-weighted update, so a zero-utility round leaves the
    weights untouched and the importance-weighted reward never exceeds
    ``N / gamma``.
    """

    def __init__(
        self,
        n_arms: int,
        gamma: float,
        reward_scale: float,
        rng: Optional[np.random.Generator] = None,
    ):
        if n_arms < 1:
            raise AgentError("need at least one arm")
        if not 0.0 < gamma <= 1.0:
            raise AgentError("gamma must lie in (0, 1]")
        self.n_arms = n_arms
        self.gamma = gamma
        self.reward_scale = reward_scale if reward_scale > 0 else 1.0
        self.rng = rng if rng is not None else np.random.default_rng()
        self.weights = np.ones(n_arms)
        self.rounds = 0
        self._pending: Optional[tuple[int, float]] = None

    def probabilities(self) -> np.ndarray:
        w = self.weights / self.weights.sum()
        return (1.0 - self.gamma) * w + self.gamma / self.n_arms

    def select_arm(self) -> tuple[int, float]:
        if self._pending is not None:
            raise AgentError("previous selection was never scored")
        p = self.probabilities()
        idx = int(np.searchsorted(np.cumsum(p), self.rng.random(), side="right"))
        idx = min(idx, self.n_arms - 1)
        self._pending = (idx, float(p[idx]))
        return self._pending

    def update(self, utility: float) -> None:
        if self._pending is None:
            raise AgentError("update without a pending selection")
        idx, prob = self._pending
        self._pending = None
        self.rounds += 1
        reward = min(max(utility, 0.0), self.reward_scale) / self.reward_scale
        estimate = reward / prob
        self.weights[idx] *= math.exp(self.gamma * estimate / self.n_arms)
        self.weights /= self.weights.max()

    @staticmethod
    def tuned_gamma(n_arms: int, horizon: int) -> float:
        if horizon <= 0 or n_arms <= 1:
            return 1.0
        return min(
            1.0, math.sqrt(n_arms * math.log(n_arms) / ((math.e - 1.0) * horizon))
        )


# ---------------------------------------------------------------------------
# agents
# ---------------------------------------------------------------------------


class Agent:
    """Base buyer: bound to a buyer slot, bids on views, observes own outcomes."""

    kind = "agent"
    sophisticated = False

    def __init__(self):
        self.buyer_id: Optional[int] = None

    def bind(
        self,
        buyer_id: int,
        params: MechanismParams,
        dist: ValueDistribution,
        rng: np.random.Generator,
    ) -> None:
        self.buyer_id = buyer_id
        self.params = params
        self.dist = dist
        self.rng = rng
        self._setup()

    def _setup(self) -> None:
        pass

    def bid(self, view: AgentView, value: float) -> float:
        raise NotImplementedError

    def observe(
        self,
        view: AgentView,
        value: float,
        utility: float,
        bids: dict[int, float],
        winner: Optional[int],
    ) -> None:
        pass


class GoodStrategyAgent(Agent):
    """Plays the good strategy verbatim; never enters the bad state."""

    kind = "good-strategy"
    sophisticated = True

    def bid(self, view: AgentView, value: float) -> float:
        if view.states[self.buyer_id] == BuyerState.BAD:
            return 0.0
        return good_strategy_bid(view, value)


class LookaheadAgent(GoodStrategyAgent):
    """Deep-lookahead buyer.

    For a lookahead depth at or beyond the mechanism's threshold, any strategy
    entering the bad state is dominated by the good strategy, so the agent
    plays the good strategy outright.  Construction below the threshold only
    warns; the fallback is still the good strategy.
    """

    kind = "lookahead"

    def __init__(self, k: Optional[int] = None):
        super().__init__()
        self.k = k

    def _setup(self) -> None:
        threshold = self.params.lookahead_threshold
        if self.k is None:
            self.k = threshold
        elif self.k < threshold:
            warnings.warn(
                f"lookahead depth {self.k} is below the sophistication "
                f"threshold {threshold}; playing the good strategy anyway",
                stacklevel=2,
            )

    @property
    def is_deep(self) -> bool:
        return self.k >= self.params.lookahead_threshold


class MyopicAgent(Agent):
    """One-shot optimizer.

    In the bad state the undominated rule is to bid the bad reserve exactly
    when the valuation strictly exceeds it (``bad_mode="reserve"``); the
    ``"value"`` mode bids the valuation itself whenever it covers the reserve.
    Good-state play is configurable: ``"reserve"`` bids the good reserve when
    the valuation covers it, ``"empirical"`` shades toward the best response
    against the observed distribution of opposing top bids, and ``"zero"``
    never bids (a stress roster that walks straight into the bad state).
    """

    kind = "myopic"
    sophisticated = False

    GOOD_MODES = ("reserve", "empirical", "zero")
    BAD_MODES = ("reserve", "value")

    def __init__(self, good_mode: str = "reserve", bad_mode: str = "reserve"):
        super().__init__()
        if good_mode not in self.GOOD_MODES:
            raise AgentError(f"unknown good_mode {good_mode!r}")
        if bad_mode not in self.BAD_MODES:
            raise AgentError(f"unknown bad_mode {bad_mode!r}")
        self.good_mode = good_mode
        self.bad_mode = bad_mode
        self._rival_bids = deque(maxlen=512)

    def bid(self, view: AgentView, value: float) -> float:
        cfg = view.config
        if view.states[self.buyer_id] == BuyerState.BAD:
            r = cfg.bad_reserve
            if self.bad_mode == "value":
                return value if value >= r else 0.0
            return r if value > r else 0.0
        r = cfg.good_reserve
        if self.good_mode == "zero":
            return 0.0
        if self.good_mode == "empirical" and len(self._rival_bids) >= 20:
            return self._empirical_bid(r, value)
        return r if value >= r else 0.0

    def _empirical_bid(self, reserve: float, value: float) -> float:
        if value < reserve:
            return 0.0
        rivals = np.array(self._rival_bids)
        step = (self.dist.support_max - self.dist.support_min) / 64.0
        candidates = np.arange(reserve, value + 1e-12, step if step > 0 else 1.0)
        if candidates.size == 0:
            candidates = np.array([reserve])
        win = np.array([(b > rivals).mean() for b in candidates])
        surplus = (value - candidates) * win
        return float(candidates[int(np.argmax(surplus))])

    def observe(self, view, value, utility, bids, winner) -> None:
        if self.good_mode != "empirical" or view.phase != "good":
            return
        rival = max(
            (b for i, b in bids.items() if i != self.buyer_id), default=None
        )
        if rival is not None:
            self._rival_bids.append(rival)


class Exp3Agent(Agent):
    """No-regret learner: adversarial-bandit weights over an expert family."""

    kind = "exp3"
    sophisticated = False

    def __init__(
        self,
        family: Optional[ExpertFamily] = None,
        gamma: Optional[float] = None,
        grid_step: Optional[float] = None,
        levels: int = 6,
    ):
        super().__init__()
        self.family = family
        self.gamma = gamma
        self.grid_step = grid_step
        self.levels = levels

    def _setup(self) -> None:
        if self.family is None:
            self.family = default_expert_family(
                self.dist, levels=self.levels, grid_step=self.grid_step
            )
        gamma = self.gamma
        if gamma is None:
            gamma = Exp3Learner.tuned_gamma(len(self.family), self.params.horizon)
        self.learner = Exp3Learner(
            len(self.family), gamma, self.dist.support_max, self.rng
        )

    def bid(self, view: AgentView, value: float) -> float:
        idx, _ = self.learner.select_arm()
        return self.family.bid(idx, view, self.buyer_id, value)

    def observe(self, view, value, utility, bids, winner) -> None:
        self.learner.update(utility)


class EtcAgent(Agent):
    """No-policy-regret learner: explore each expert in turn, then commit.

    Exploration assigns global rounds ``[j*L, (j+1)*L)`` to expert ``j``; after
    ``N*L`` rounds the agent commits permanently to the expert with the highest
    accumulated exploration utility (ties to the lowest index).  Pair with a
    mechanism reset at round ``N*L`` so exploration mistakes are forgiven.
    """

    kind = "etc"
    sophisticated = True

    def __init__(
        self,
        family: Optional[ExpertFamily] = None,
        explore_len: Optional[int] = None,
        levels: int = 6,
    ):
        super().__init__()
        self.family = family
        self.explore_len = explore_len
        self.levels = levels
        self.committed_index: Optional[int] = None

    def _setup(self) -> None:
        if self.family is None:
            self.family = default_expert_family(self.dist, levels=self.levels)
        n = len(self.family)
        if self.explore_len is None:
            self.explore_len = max(1, math.ceil(self.params.horizon ** (2.0 / 3.0) / n))
        self.explore_total = n * self.explore_len
        reset = self.params.reset_round
        if reset is not None and reset < self.explore_total:
            warnings.warn(
                f"mechanism reset at round {reset} precedes the end of exploration "
                f"({self.explore_total}); punishments incurred after the reset are "
                "permanent",
                stacklevel=2,
            )
        self._scores = np.zeros(n)

    def _arm_for(self, t: int) -> int:
        if t < self.explore_total:
            return t // self.explore_len
        if self.committed_index is None:
            self.committed_index = int(np.argmax(self._scores))
        return self.committed_index

    def bid(self, view: AgentView, value: float) -> float:
        return self.family.bid(self._arm_for(view.t), view, self.buyer_id, value)

    def observe(self, view, value, utility, bids, winner) -> None:
        if view.t < self.explore_total:
            self._scores[view.t // self.explore_len] += utility


class ExpertAgent(Agent):
    """Deterministically plays a single fixed expert from a family."""

    kind = "expert"
    sophisticated = False

    def __init__(self, family: ExpertFamily, index: int):
        super().__init__()
        if not 0 <= index < len(family):
            raise AgentError(f"expert index {index} outside the family")
        self.family = family
        self.index = index

    def bid(self, view: AgentView, value: float) -> float:
        return self.family.bid(self.index, view, self.buyer_id, value)


AGENT_KINDS = {
    "good-strategy": GoodStrategyAgent,
    "lookahead": LookaheadAgent,
    "myopic": MyopicAgent,
    "exp3": Exp3Agent,
    "etc": EtcAgent,
}


def build_agent(spec: dict) -> Agent:
    """Construct an agent from a roster entry like {"kind": ..., options}."""
    spec = dict(spec)
    spec.pop("id", None)
    try:
        kind = spec.pop("kind")
    except KeyError:
        raise AgentError("agent spec must carry a 'kind'") from None
    try:
        cls = AGENT_KINDS[kind]
    except KeyError:
        raise AgentError(f"unknown agent kind {kind!r}") from None
    try:
        return cls(**spec)
    except TypeError as exc:
        raise AgentError(f"bad options for agent kind {kind!r}: {exc}") from None
