"""Epoch-scheduled repeated first-price auctions with good/bad/rest buyer states.

Every buyer starts in the good state.  Each epoch first runs a block of
auctions among bad-state buyers, then a longer block among good-state buyers,
with reserve prices fixed for the epoch from the current state counts.  During
the good block a buyer is punished (moved to the absorbing bad state) for
bidding below the reserve once too many auctions have gone uncleared, and is
temporarily rested after winning its per-epoch allocation quota.  Rested
buyers return to the good state when the epoch ends.

Transition rules fire in a fixed order after each good-block auction: first
the uncleared-threshold punishment, then the rest move for the round's winner.
A winner has necessarily bid at least the reserve, so the order cannot punish
a winner; it is fixed purely for determinism.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Optional

from .distributions import (
    ValueDistribution,
    tail_quantile,
    upper_tail_mean,
    win_quantile,
)

__all__ = [
    "MechanismError",
    "BuyerState",
    "GOOD_PHASE",
    "BAD_PHASE",
    "MechanismParams",
    "EpochConfig",
    "derive_epoch_config",
    "ProjectedHistory",
    "AgentView",
    "RoundOutcome",
    "EpochRecord",
    "Mechanism",
]

GOOD_PHASE = "good"
BAD_PHASE = "bad"


class MechanismError(ValueError):
    """Invalid mechanism parameters or an ill-formed round."""


class BuyerState(IntEnum):
    GOOD = 0
    BAD = 1
    REST = 2

    @property
    def label(self) -> str:
        return _STATE_LABELS[self]


_STATE_LABELS = {BuyerState.GOOD: "good", BuyerState.BAD: "bad", BuyerState.REST: "rest"}


@dataclass(frozen=True)
class MechanismParams:
    """Global mechanism parameters, validated at construction.

    ``rho`` must satisfy both admissibility caps (the tighter of
    eps*(1-eps)^4/12 and eps*(1-eps)*(1-delta)*(1-rho)/(12*(1+eps))), which
    is what the revenue guarantees require.
    """

    n: int
    horizon: int
    epsilon: float
    delta: float
    rho: float
    reset_round: Optional[int] = None
    # opt-out for schedule arithmetic only; the revenue guarantees need the cap
    enforce_rho_cap: bool = True

    def __post_init__(self):
        if self.n < 1:
            raise MechanismError("need at least one buyer")
        if self.horizon < 0:
            raise MechanismError("horizon must be nonnegative")
        for name in ("epsilon", "delta", "rho"):
            x = getattr(self, name)
            if not 0.0 < x < 1.0:
                raise MechanismError(f"{name} must lie strictly inside (0, 1)")
        if self.enforce_rho_cap and self.rho > self.rho_cap + 1e-15:
            raise MechanismError(
                f"rho={self.rho} exceeds the admissible cap {self.rho_cap:.8g}"
            )
        if self.reset_round is not None and self.reset_round < 0:
            raise MechanismError("reset_round must be nonnegative")

    @property
    def rho_cap(self) -> float:
        eps, delta, rho = self.epsilon, self.delta, self.rho
        cap_main = eps * (1.0 - eps) ** 4 / 12.0
        cap_cons = eps * (1.0 - eps) * (1.0 - delta) * (1.0 - rho) / (12.0 * (1.0 + eps))
        return min(cap_main, cap_cons)

    @property
    def rest_threshold(self) -> int:
        """Allocations a buyer may win per epoch before being rested."""
        return max(1, math.ceil(4.0 * math.log(1.0 / self.epsilon) / self.delta**2))

    @property
    def max_epoch_length(self) -> int:
        return math.ceil(
            2.0 * self.rest_threshold * self.n / ((1.0 - self.delta) * (1.0 - self.rho))
        )

    @property
    def lookahead_threshold(self) -> int:
        """Smallest lookahead depth that guarantees never entering the bad state."""
        eps = self.epsilon
        return math.ceil(10.0 / (eps * (1.0 - eps)) * self.max_epoch_length)


@dataclass(frozen=True)
class EpochConfig:
    """Per-epoch derived quantities; reserves stay fixed for the whole epoch."""

    index: int
    good_count: int
    bad_count: int
    length: int
    bad_rounds: int
    good_rounds: int
    good_reserve: float
    bad_reserve: float
    good_cutoff: float
    good_tail_mean: float
    bad_cutoff: float
    bad_quantile: float
    bad_tail_mean: float
    uncleared_threshold: int


def derive_epoch_config(
    params: MechanismParams,
    good_set,
    bad_set,
    dist: ValueDistribution,
    index: int = 0,
) -> EpochConfig:
    """Compute the epoch schedule and reserves from the current state partition.

    ``good_set`` and ``bad_set`` must partition the buyers (nobody rests at an
    epoch boundary).  Fractional schedule lengths are rounded with ceilings,
    which preserves every lower bound the revenue analysis relies on.
    """
    good_set, bad_set = set(good_set), set(bad_set)
    if good_set & bad_set:
        raise MechanismError("good and bad sets overlap")
    if good_set | bad_set != set(range(params.n)):
        raise MechanismError("good and bad sets must partition the buyers")
    m_good = max(1, len(good_set))
    m_bad = max(math.ceil(params.n / 2), len(bad_set))
    h = params.rest_threshold
    length = math.ceil(
        2.0 * h * m_good / ((1.0 - params.delta) * (1.0 - params.rho))
    )
    bad_rounds = math.ceil(params.rho * length)
    good_rounds = length - bad_rounds
    good_tail = upper_tail_mean(dist, m_good)
    bad_q = tail_quantile(dist, m_bad)
    bad_p = win_quantile(dist, m_bad)
    bad_reserve = bad_p - (params.epsilon / params.n) * bad_q
    if bad_reserve < (1.0 - params.epsilon / params.n) * bad_q - 1e-9:
        raise MechanismError("bad reserve fell below its quantile floor")
    return EpochConfig(
        index=index,
        good_count=m_good,
        bad_count=m_bad,
        length=length,
        bad_rounds=bad_rounds,
        good_rounds=good_rounds,
        good_reserve=(1.0 - params.epsilon) * good_tail,
        bad_reserve=bad_reserve,
        good_cutoff=tail_quantile(dist, m_good),
        good_tail_mean=good_tail,
        bad_cutoff=bad_p,
        bad_quantile=bad_q,
        bad_tail_mean=upper_tail_mean(dist, m_bad),
        uncleared_threshold=math.ceil(m_good * h / (1.0 - params.delta)),
    )


@dataclass(frozen=True)
class ProjectedHistory:
    """The fixed-size history projection that expert strategies see."""

    in_bad_state: bool
    num_good: int
    num_bad: int
    uncleared_this_epoch: int


@dataclass(frozen=True)
class AgentView:
    """Everything an agent may condition on when bidding in the current round."""

    t: int
    phase: str
    config: EpochConfig
    uncleared: int
    states: tuple[BuyerState, ...]
    num_good: int
    num_bad: int

    def projected(self, buyer: int) -> ProjectedHistory:
        return ProjectedHistory(
            in_bad_state=self.states[buyer] == BuyerState.BAD,
            num_good=self.num_good,
            num_bad=self.num_bad,
            uncleared_this_epoch=self.uncleared,
        )


@dataclass(frozen=True)
class RoundOutcome:
    """Public log of one auction round."""

    t: int
    phase: str
    epoch: int
    participants: tuple[int, ...]
    bids: dict[int, float]
    winner: Optional[int]
    payment: float
    cleared: bool
    transitions: tuple[tuple[int, BuyerState, BuyerState], ...]
    uncleared_before: int
    uncleared: int
    allocations: tuple[int, ...]
    states_before: tuple[BuyerState, ...]


@dataclass(frozen=True)
class EpochRecord:
    """Per-epoch accounting emitted when an epoch closes (or is truncated)."""

    config: EpochConfig
    start: int
    end: int
    completed: bool
    reset: bool
    good_revenue: float
    bad_revenue: float
    good_start: tuple[int, ...]
    bad_start: tuple[int, ...]
    good_end: tuple[int, ...]
    uncleared_final: int
    allocations_final: tuple[int, ...]
    threshold_round: Optional[int]
    good_at_threshold: Optional[tuple[int, ...]]


class Mechanism:
    """Mutable state machine running the epoch schedule round by round.

    The caller drives it: collect bids from the current participants, call
    ``run_bad_round`` or ``run_good_round`` (matching ``phase``), then
    ``advance``.  Tie-breaking consumes exactly one uniform draw per round,
    supplied by the caller, so replays under common random numbers stay
    aligned.
    """

    def __init__(self, params: MechanismParams, dist: ValueDistribution):
        self.params = params
        self.dist = dist
        self.t = 0
        self.states: list[BuyerState] = [BuyerState.GOOD] * params.n
        self.allocations: list[int] = [0] * params.n
        self.uncleared = 0
        self.epoch_index = 0
        self.epoch_records: list[EpochRecord] = []
        self._reset_done = False
        self._start_epoch()

    # -- state inspection ---------------------------------------------------

    @property
    def config(self) -> EpochConfig:
        return self._config

    @property
    def phase(self) -> str:
        return self._phase

    def states_snapshot(self) -> tuple[BuyerState, ...]:
        return tuple(self.states)

    def participants(self) -> tuple[int, ...]:
        return self._bad_ids if self._phase == BAD_PHASE else self._good_ids

    def view(self) -> AgentView:
        return AgentView(
            t=self.t,
            phase=self._phase,
            config=self._config,
            uncleared=self.uncleared,
            states=tuple(self.states),
            num_good=len(self._good_ids),
            num_bad=len(self._bad_ids),
        )

    def projected_history(self, buyer: int) -> ProjectedHistory:
        if not 0 <= buyer < self.params.n:
            raise MechanismError(f"unknown buyer {buyer}")
        return self.view().projected(buyer)

    # -- rounds ---------------------------------------------------------------

    def run_bad_round(self, bids: dict[int, float], tie: float = 0.0) -> RoundOutcome:
        """First-price auction among bad-state buyers; never moves anyone."""
        if self._phase != BAD_PHASE:
            raise MechanismError("not in the bad phase")
        self._check_bids(bids, self._bad_set)
        states_before = tuple(self.states)
        winner, payment, cleared = None, 0.0, False
        if bids:
            winner, payment = self._settle(bids, self._bad_ids, self._config.bad_reserve, tie)
            cleared = winner is not None
            if cleared:
                self._bad_revenue += payment
        return RoundOutcome(
            t=self.t,
            phase=BAD_PHASE,
            epoch=self.epoch_index,
            participants=self._bad_ids,
            bids=dict(bids),
            winner=winner,
            payment=payment,
            cleared=cleared,
            transitions=(),
            uncleared_before=self.uncleared,
            uncleared=self.uncleared,
            allocations=tuple(self.allocations),
            states_before=states_before,
        )

    def run_good_round(self, bids: dict[int, float], tie: float = 0.0) -> RoundOutcome:
        """First-price auction among good-state buyers, then state moves.

        An uncleared auction bumps the uncleared counter.  Once the counter
        has reached the epoch threshold, every good buyer bidding below the
        reserve is moved to the bad state; a winner reaching the allocation
        quota is rested.
        """
        if self._phase != GOOD_PHASE:
            raise MechanismError("not in the good phase")
        cfg = self._config
        self._check_bids(bids, self._good_set)
        states_before = tuple(self.states)
        uncleared_before = self.uncleared
        winner, payment, cleared = None, 0.0, False
        if bids:
            winner, payment = self._settle(bids, self._good_ids, cfg.good_reserve, tie)
            cleared = winner is not None
        if cleared:
            self.allocations[winner] += 1
            self._good_revenue += payment
        else:
            self.uncleared += 1
        transitions = []
        if self.uncleared >= cfg.uncleared_threshold and bids:
            for i in self._good_ids:
                if bids[i] < cfg.good_reserve:
                    self.states[i] = BuyerState.BAD
                    transitions.append((i, BuyerState.GOOD, BuyerState.BAD))
        if winner is not None and self.allocations[winner] >= self.params.rest_threshold:
            self.states[winner] = BuyerState.REST
            transitions.append((winner, BuyerState.GOOD, BuyerState.REST))
        if transitions:
            self._rebuild_rosters()
        if (
            self._threshold_round is None
            and uncleared_before < cfg.uncleared_threshold <= self.uncleared
        ):
            self._threshold_round = self.t
            self._good_at_threshold = tuple(
                i for i in range(self.params.n) if self.states[i] == BuyerState.GOOD
            )
        return RoundOutcome(
            t=self.t,
            phase=GOOD_PHASE,
            epoch=self.epoch_index,
            participants=tuple(sorted(bids)),
            bids=dict(bids),
            winner=winner,
            payment=payment,
            cleared=cleared,
            transitions=tuple(transitions),
            uncleared_before=uncleared_before,
            uncleared=self.uncleared,
            allocations=tuple(self.allocations),
            states_before=states_before,
        )

    def run_round(self, bids: dict[int, float], tie: float = 0.0) -> RoundOutcome:
        if self._phase == BAD_PHASE:
            return self.run_bad_round(bids, tie)
        return self.run_good_round(bids, tie)

    def advance(self) -> None:
        """Book-keep the end of a round: phase switches, epoch ends, the reset."""
        self.t += 1
        params = self.params
        if (
            params.reset_round is not None
            and not self._reset_done
            and self.t >= params.reset_round
        ):
            self._reset_done = True
            self._close_epoch(completed=False, reset=True)
            self.states = [BuyerState.GOOD] * params.n
            self._start_epoch()
            return
        self._rounds_left -= 1
        if self._rounds_left > 0:
            return
        if self._phase == BAD_PHASE:
            self._phase = GOOD_PHASE
            self._rounds_left = self._config.good_rounds
        else:
            self._close_epoch(completed=True)
            self._start_epoch()

    def finish(self) -> None:
        """Record the final partial epoch, if any rounds of it were executed."""
        if self.t > self._epoch_start:
            self._close_epoch(completed=False)

    # -- internals ------------------------------------------------------------

    def _settle(self, bids, ordered_ids, reserve, tie):
        best = max(bids.values())
        tied = [i for i in ordered_ids if bids[i] == best]
        leader = tied[int(tie * len(tied))] if len(tied) > 1 else tied[0]
        if best >= reserve:
            return leader, best
        return None, 0.0

    def _check_bids(self, bids, expected: frozenset) -> None:
        if bids.keys() != expected:
            raise MechanismError(
                f"bids must come from exactly the current participants {sorted(expected)}"
            )
        for i, b in bids.items():
            if not (isinstance(b, (int, float)) and math.isfinite(b) and b >= 0.0):
                raise MechanismError(f"buyer {i} submitted an invalid bid {b!r}")

    def _rebuild_rosters(self) -> None:
        self._good_ids = tuple(
            i for i in range(self.params.n) if self.states[i] == BuyerState.GOOD
        )
        self._bad_ids = tuple(
            i for i in range(self.params.n) if self.states[i] == BuyerState.BAD
        )
        self._good_set = frozenset(self._good_ids)
        self._bad_set = frozenset(self._bad_ids)

    def _start_epoch(self) -> None:
        if any(s == BuyerState.REST for s in self.states):
            raise MechanismError("rest state must be cleared before an epoch starts")
        self._rebuild_rosters()
        self._good_ids_at_start = self._good_ids
        self._bad_ids_at_start = self._bad_ids
        self._config = derive_epoch_config(
            self.params, self._good_ids, self._bad_ids, self.dist, index=self.epoch_index
        )
        self.uncleared = 0
        self.allocations = [0] * self.params.n
        self._phase = BAD_PHASE
        self._rounds_left = self._config.bad_rounds
        self._good_revenue = 0.0
        self._bad_revenue = 0.0
        self._epoch_start = self.t
        self._threshold_round: Optional[int] = None
        self._good_at_threshold: Optional[tuple[int, ...]] = None

    def _close_epoch(self, completed: bool, reset: bool = False) -> None:
        good_end = tuple(
            i for i in range(self.params.n) if self.states[i] != BuyerState.BAD
        )
        self.epoch_records.append(
            EpochRecord(
                config=self._config,
                start=self._epoch_start,
                end=self.t,
                completed=completed,
                reset=reset,
                good_revenue=self._good_revenue,
                bad_revenue=self._bad_revenue,
                good_start=self._good_ids_at_start,
                bad_start=self._bad_ids_at_start,
                good_end=good_end,
                uncleared_final=self.uncleared,
                allocations_final=tuple(self.allocations),
                threshold_round=self._threshold_round,
                good_at_threshold=self._good_at_threshold,
            )
        )
        for i in range(self.params.n):
            if self.states[i] == BuyerState.REST:
                self.states[i] = BuyerState.GOOD
        self.epoch_index += 1
