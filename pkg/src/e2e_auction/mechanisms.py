"""Auction clearing on top of the price-blind network optimiser.

* :func:`double_auction` -- two-step mechanism: greedy P1 picks candidate
  (request, server) matches, then a McAfee-style trade reduction prices them.
* :func:`forward_vcg` / :func:`forward_greedy` -- provider owns every resource.
* :func:`split_payment` -- proportional sharing of a charge across seller groups.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .netmodel import InstanceError, NetworkInstance, RequestKey, SplitVector
from .netopt import (AllocationPlan, SizeLimits, branch_and_bound, check_feasibility,
                     greedy_allocate, solve_p1_greedy)

MONEY_TOL = 1e-9
CRITICAL_TOL = 1e-6


@dataclass(frozen=True)
class CandidateMatch:
    key: RequestKey
    seller_id: int
    bid: float
    ask: float

    @property
    def spread(self) -> float:
        return self.bid - self.ask


@dataclass(frozen=True)
class Trade:
    candidate: CandidateMatch
    buyer_charge: float
    seller_payment: float

    @property
    def key(self) -> RequestKey:
        return self.candidate.key


@dataclass
class AuctionOutcome:
    mechanism: str
    trades: List[Trade] = field(default_factory=list)
    final_plan: AllocationPlan = field(default_factory=AllocationPlan)
    losers: List[RequestKey] = field(default_factory=list)
    thresholds: Optional[Tuple[float, float]] = None

    @property
    def provider_revenue(self) -> float:
        return (math.fsum(t.buyer_charge for t in self.trades)
                - math.fsum(t.seller_payment for t in self.trades))

    @property
    def winners(self) -> List[RequestKey]:
        return [t.key for t in self.trades]

    def trade_for(self, key: RequestKey) -> Optional[Trade]:
        for t in self.trades:
            if t.key == key:
                return t
        return None


def enumerate_candidates(instance: NetworkInstance, plan: AllocationPlan) -> List[CandidateMatch]:
    out = []
    for key in sorted(plan.assignment):
        seller = instance.seller(plan.assignment[key])
        if key not in seller.asks:
            raise InstanceError(f"seller {seller.id} has no ask for request {key}")
        out.append(CandidateMatch(key, seller.id, instance.request(key).bid, seller.asks[key]))
    return out


def trade_reduction(candidates: Sequence[CandidateMatch]) -> Tuple[List[Trade], Optional[Tuple[float, float]]]:
    """Cross-sorted McAfee trade reduction with uniform thresholds.

    Bids are ranked descending and asks ascending (ties by request key).
    With ``k`` the last rank where the ranked bid still covers the ranked ask,
    the ``k``-th bid and ask become the buyer and seller prices, and a
    candidate trades only if both its bid and its ask rank strictly above ``k``.
    Returns the trades and ``(buyer_price, seller_price)``, or ``None`` when
    nothing clears.
    """
    keys = [c.key for c in candidates]
    if len(set(keys)) != len(keys):
        raise ValueError("candidates must have distinct request keys")
    live = [c for c in candidates if c.spread >= 0]
    by_bid = sorted(live, key=lambda c: (-c.bid, c.key))
    by_ask = sorted(live, key=lambda c: (c.ask, c.key))
    k = 0
    for kappa in range(1, len(live) + 1):
        if by_bid[kappa - 1].bid >= by_ask[kappa - 1].ask:
            k = kappa
        else:
            break
    if k <= 1:
        return [], None
    p_b = by_bid[k - 1].bid
    p_s = by_ask[k - 1].ask
    top_bids = {c.key for c in by_bid[:k - 1]}
    top_asks = {c.key for c in by_ask[:k - 1]}
    trades = [Trade(c, p_b, p_s) for c in sorted(live, key=lambda c: c.key)
              if c.key in top_bids and c.key in top_asks]
    return trades, (p_b, p_s)


def _finish(mechanism, instance, plan, trades, thresholds=None) -> AuctionOutcome:
    won = {t.key for t in trades}
    losers = sorted(r.key for r in instance.requests if r.key not in won)
    return AuctionOutcome(mechanism, sorted(trades, key=lambda t: t.key),
                          plan.restricted_to(won), losers, thresholds)


def double_auction(instance: NetworkInstance) -> AuctionOutcome:
    """Greedy P1 for candidates, then trade reduction; winners keep their P1 resources."""
    plan = solve_p1_greedy(instance)
    trades, thresholds = trade_reduction(enumerate_candidates(instance, plan))
    return _finish("double", instance, plan, trades, thresholds)


def forward_vcg(instance: NetworkInstance, limits: SizeLimits = SizeLimits()) -> AuctionOutcome:
    """Welfare-maximising allocation with Clarke pivot charges.

    Resources are provider-owned: asks are ignored and sellers receive nothing.
    Raises :class:`~e2e_auction.netopt.SizeLimitError` beyond the exact-solver limits.
    """
    bids = {r.key: r.bid for r in instance.requests}
    welfare, plan = branch_and_bound(instance, bids, limits)
    trades = []
    for key in sorted(plan.assignment):
        without = dict(bids)
        del without[key]
        welfare_without, _ = branch_and_bound(instance, without, limits)
        others_now = welfare - bids[key]
        charge = min(max(welfare_without - others_now, 0.0), bids[key])
        cand = CandidateMatch(key, plan.assignment[key], bids[key], 0.0)
        trades.append(Trade(cand, charge, 0.0))
    return _finish("vcg", instance, plan, trades)


def bid_order(bids: Dict[RequestKey, float], reserve: float = 0.0) -> List[RequestKey]:
    return sorted((k for k, b in bids.items() if b >= reserve), key=lambda k: (-bids[k], k))


def _wins(instance, bids, key, bid, reserve) -> bool:
    trial = dict(bids)
    trial[key] = bid
    order = bid_order(trial, reserve)
    return key in greedy_allocate(instance, order).assignment


def critical_bid(instance: NetworkInstance, key: RequestKey, reserve: float = 0.0,
                 tol: float = CRITICAL_TOL) -> Optional[float]:
    """Smallest bid at which ``key`` still wins the greedy allocation (others fixed).

    Bisection over reruns brackets the threshold to ``tol``; since the outcome
    only changes where the bid crosses another bid, the bracket is then snapped
    onto that crossing. ``None`` if the request cannot win at any bid.
    """
    bids = {r.key: r.bid for r in instance.requests}
    if _wins(instance, bids, key, reserve, reserve):
        return reserve
    others = [b for k, b in bids.items() if k != key and b >= reserve]
    lo, hi = reserve, max(others, default=reserve) + 1.0
    if not _wins(instance, bids, key, hi, reserve):
        return None
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _wins(instance, bids, key, mid, reserve):
            hi = mid
        else:
            lo = mid
    # ranks only change at other bids: the infimum is the first crossing in
    # [lo, hi] at which bidding just above it wins
    for t in sorted({lo} | {b for b in others if lo <= b <= hi}):
        above = math.nextafter(t, math.inf)
        if _wins(instance, bids, key, above, reserve):
            return t
    return hi


def forward_greedy(instance: NetworkInstance, reserve: float = 0.0,
                   charge_keys: Optional[Sequence[RequestKey]] = None) -> AuctionOutcome:
    """Greedy admission by descending bid, winners charged their critical bid.

    ``charge_keys`` yields a partial outcome for single-agent probes: only
    those winners are priced and listed in ``trades``; other winners are left
    out of both ``trades`` and ``losers``.
    """
    bids = {r.key: r.bid for r in instance.requests}
    plan = greedy_allocate(instance, bid_order(bids, reserve))
    wanted = set(plan.assignment) if charge_keys is None else set(charge_keys) & set(plan.assignment)
    trades = []
    for key in sorted(wanted):
        charge = critical_bid(instance, key, reserve)
        charge = min(charge, bids[key])
        cand = CandidateMatch(key, plan.assignment[key], bids[key], 0.0)
        trades.append(Trade(cand, charge, 0.0))
    outcome = _finish("greedy", instance, plan, trades)
    if charge_keys is not None:
        # uncharged winners are still winners, not losers
        outcome.losers = sorted(k for k in outcome.losers if k not in plan.assignment)
        outcome.final_plan = plan
    return outcome


def split_payment(buyer_charge: float, split, seller_groups: Sequence[Sequence[int]]) -> Dict[int, float]:
    """Share ``buyer_charge`` across seller categories by ``split`` fractions.

    Each category's share is divided equally among its sellers.
    """
    if not isinstance(split, SplitVector):
        split = SplitVector(tuple(float(f) for f in split))
    if len(seller_groups) != len(split.fractions):
        raise ValueError("need one seller group per split fraction")
    shares: Dict[int, float] = {}
    for fraction, group in zip(split.fractions, seller_groups):
        if fraction > 0 and not group:
            raise ValueError("empty seller group for a positive fraction")
        if not group:
            continue
        each = buyer_charge * fraction / len(group)
        for seller in group:
            shares[seller] = shares.get(seller, 0.0) + each
    return shares


MECHANISMS = {
    "double": double_auction,
    "greedy": forward_greedy,
    "vcg": forward_vcg,
}


def outcome_violations(instance: NetworkInstance, outcome: AuctionOutcome) -> List[str]:
    """Individual rationality, budget balance and QoS checks for one outcome."""
    problems = []
    for t in outcome.trades:
        c = t.candidate
        if t.buyer_charge > c.bid + MONEY_TOL:
            problems.append(f"IR buyer {c.key}: charge {t.buyer_charge} > bid {c.bid}")
        if t.seller_payment < c.ask - MONEY_TOL:
            problems.append(f"IR seller {c.seller_id} on {c.key}: payment {t.seller_payment} < ask {c.ask}")
        if outcome.mechanism == "double" and t.buyer_charge < t.seller_payment - MONEY_TOL:
            problems.append(f"negative margin on {c.key}")
    if outcome.provider_revenue < -MONEY_TOL:
        problems.append(f"budget deficit {outcome.provider_revenue}")
    report = check_feasibility(instance, outcome.final_plan)
    problems.extend(f"QoS {v.kind} {v.entity} slack {v.slack}" for v in report.violations)
    return problems
