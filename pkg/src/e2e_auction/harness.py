"""Experiments: band sweep, single-buyer payoff surface, unilateral deviation probes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .mechanisms import MECHANISMS, double_auction, forward_greedy
from .netmodel import NetworkInstance, RequestKey, ScenarioConfig, generate_instance, with_reports
from .netopt import plan_throughput, solve_p1_greedy
from .serialize import to_csv

GAIN_TOL = 1e-9


class AgentError(ValueError):
    """Unknown or unsupported agent."""


# ---------------------------------------------------------------- band sweep


SWEEP_COLUMNS = ("band_count", "trial_seed", "p1_throughput_mbps",
                 "auction_throughput_mbps", "revenue")


@dataclass
class SweepResult:
    rows: List[Tuple[int, int, float, float, float]] = field(default_factory=list)

    def means(self):
        """``{band_count: (mean P1 throughput, mean auction throughput, mean revenue)}``."""
        out = {}
        for n in sorted({r[0] for r in self.rows}):
            sel = [r for r in self.rows if r[0] == n]
            out[n] = tuple(math.fsum(r[i] for r in sel) / len(sel) for i in (2, 3, 4))
        return out

    def to_csv(self) -> str:
        return to_csv(SWEEP_COLUMNS, self.rows)

    def means_csv(self) -> str:
        cols = ("band_count", "mean_p1_throughput_mbps", "mean_auction_throughput_mbps",
                "mean_revenue")
        return to_csv(cols, [(n, *m) for n, m in self.means().items()])


def run_band_sweep(config: ScenarioConfig, band_counts: Sequence[int], trials: int) -> SweepResult:
    """Trial ``t`` uses seed ``config.seed + t`` for every band count.

    The generator never draws for bands, so a larger band count sees the same
    topology and market plus extra bands.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    result = SweepResult()
    for n in sorted(band_counts):
        for t in range(trials):
            seed = config.seed + t
            inst = generate_instance(replace(config, n_bands=n, seed=seed))
            p1 = plan_throughput(solve_p1_greedy(inst), inst)
            outcome = double_auction(inst)
            won = plan_throughput(outcome.final_plan, inst)
            result.rows.append((n, seed, p1, won, outcome.provider_revenue))
    return result


# ---------------------------------------------------------------- payoff surface


@dataclass
class PayoffSurface:
    buyer_id: int
    keys: Tuple[RequestKey, RequestKey]
    axis: List[float]
    truthful_index: Tuple[int, int]
    utility: List[List[float]]  # utility[i][j]: first request bids axis[i], second axis[j]

    @property
    def truthful_utility(self) -> float:
        i, j = self.truthful_index
        return self.utility[i][j]

    @property
    def max_utility(self) -> float:
        return max(max(row) for row in self.utility)

    def cells(self):
        for i, b1 in enumerate(self.axis):
            for j, b2 in enumerate(self.axis):
                yield b1, b2, self.utility[i][j]

    def to_csv(self) -> str:
        return to_csv(("bid1", "bid2", "utility"), self.cells())


def designated_buyer(instance: NetworkInstance) -> int:
    """Lowest buyer id holding exactly two requests."""
    counts = {}
    for r in instance.requests:
        counts[r.buyer_id] = counts.get(r.buyer_id, 0) + 1
    for b in sorted(counts):
        if counts[b] == 2:
            return b
    raise AgentError("no buyer with exactly two requests")


def buyer_utility(instance: NetworkInstance, outcome, keys) -> float:
    total = 0.0
    for k in keys:
        t = outcome.trade_for(k)
        if t is not None:
            total += instance.request(k).true_value - t.buyer_charge
    return total


def payoff_surface(instance: NetworkInstance, buyer_id: int, points: int = 41,
                   low: float = 0.0, high: float = 4.0, mechanism: str = "double") -> PayoffSurface:
    """Buyer's total utility over a grid of its two bids, all else fixed.

    The buyer's true values (and truthful bids) are snapped to the nearest grid
    point so the truthful report is a grid cell.
    """
    reqs = sorted(instance.buyer_requests(buyer_id), key=lambda r: r.index)
    if len(reqs) != 2:
        raise AgentError(f"buyer {buyer_id} has {len(reqs)} requests; surface needs exactly 2")
    if points < 2:
        raise ValueError("need at least 2 grid points per axis")
    step = (high - low) / (points - 1)
    axis = [low + i * step for i in range(points)]

    def snap(v):
        return min(max(int(round((v - low) / step)), 0), points - 1)

    idx = tuple(snap(r.true_value) for r in reqs)
    snapped = [replace(r, bid=axis[i], true_value=axis[i]) for r, i in zip(reqs, idx)]
    by_key = {r.key: r for r in snapped}
    base = NetworkInstance(instance.nodes, instance.links, instance.bands, instance.sellers,
                           tuple(by_key.get(r.key, r) for r in instance.requests),
                           instance.config, instance.splits)
    run = MECHANISMS[mechanism]
    keys = (reqs[0].key, reqs[1].key)
    grid = []
    for b1 in axis:
        row = []
        for b2 in axis:
            outcome = run(with_reports(base, bids={keys[0]: b1, keys[1]: b2}))
            row.append(buyer_utility(base, outcome, keys))
        grid.append(row)
    return PayoffSurface(buyer_id, keys, axis, idx, grid)


# ---------------------------------------------------------------- deviation probes


@dataclass(frozen=True)
class Agent:
    """A single report: a buyer's bid on one request, or a seller's ask toward one."""

    role: str  # "buyer" or "seller"
    key: RequestKey
    seller_id: Optional[int] = None

    @classmethod
    def parse(cls, spec: str) -> "Agent":
        """``buyer:I:K`` or ``seller:J:I:K``."""
        parts = spec.split(":")
        try:
            if parts[0] == "buyer" and len(parts) == 3:
                return cls("buyer", (int(parts[1]), int(parts[2])))
            if parts[0] == "seller" and len(parts) == 4:
                return cls("seller", (int(parts[2]), int(parts[3])), int(parts[1]))
        except ValueError:
            pass
        raise AgentError(f"bad agent spec {spec!r}; expected buyer:I:K or seller:J:I:K")

    def __str__(self):
        if self.role == "buyer":
            return f"buyer:{self.key[0]}:{self.key[1]}"
        return f"seller:{self.seller_id}:{self.key[0]}:{self.key[1]}"


@dataclass
class DeviationReport:
    agent: Agent
    truthful_utility: float
    best_utility: float
    best_report: float
    reports_tried: int

    @property
    def role(self) -> str:
        return "buyer request" if self.agent.role == "buyer" else "seller ask entry"

    @property
    def max_gain(self) -> float:
        return self.best_utility - self.truthful_utility

    def to_dict(self) -> dict:
        return {
            "agent": str(self.agent),
            "role": self.role,
            "truthful_utility": self.truthful_utility,
            "best_utility": self.best_utility,
            "best_report": self.best_report,
            "max_gain": self.max_gain,
            "reports_tried": self.reports_tried,
        }


def _truth(instance: NetworkInstance, agent: Agent) -> float:
    if agent.role == "buyer":
        if not instance.has_request(agent.key):
            raise AgentError(f"unknown request {agent.key}")
        return instance.request(agent.key).true_value
    if agent.role == "seller":
        if not instance.has_seller(agent.seller_id):
            raise AgentError(f"unknown seller {agent.seller_id}")
        costs = instance.seller(agent.seller_id).true_costs
        if agent.key not in costs:
            raise AgentError(f"seller {agent.seller_id} has no entry for {agent.key}")
        return costs[agent.key]
    raise AgentError(f"unknown role {agent.role!r}")


def default_probe_grid(truthful: float, points: int = 21) -> List[float]:
    """``points`` evenly spaced reports on ``[0, 2 * truthful]``, truthful exactly included.

    A zero true value would collapse the grid, so it then spans ``[0, 1]``.
    """
    half = (points - 1) // 2
    if truthful > 0:
        grid = [truthful * (i / half) for i in range(points)]
    else:
        grid = [i / (points - 1) for i in range(points)]
    return grid


def agent_utility(instance: NetworkInstance, agent: Agent, report: float,
                  mechanism: str) -> float:
    """Quasi-linear utility of ``agent`` when it reports ``report`` and everyone else is truthful-as-given."""
    truth = _truth(instance, agent)
    if agent.role == "buyer":
        trial = with_reports(instance, bids={agent.key: report})
        if mechanism == "greedy":
            outcome = forward_greedy(trial, charge_keys=[agent.key])
        else:
            outcome = MECHANISMS[mechanism](trial)
        t = outcome.trade_for(agent.key)
        return 0.0 if t is None else truth - t.buyer_charge
    if mechanism != "double":
        raise AgentError(f"sellers do not report under the {mechanism!r} mechanism")
    trial = with_reports(instance, asks={(agent.seller_id, agent.key): report})
    t = double_auction(trial).trade_for(agent.key)
    if t is None or t.candidate.seller_id != agent.seller_id:
        return 0.0
    return t.seller_payment - truth


def deviation_probe(instance: NetworkInstance, agent: Agent,
                    probe_grid: Optional[Sequence[float]] = None,
                    mechanism: str = "double") -> DeviationReport:
    """Best unilateral misreport of ``agent`` over ``probe_grid``."""
    if mechanism not in MECHANISMS:
        raise ValueError(f"unknown mechanism {mechanism!r}")
    truth = _truth(instance, agent)
    grid = list(default_probe_grid(truth) if probe_grid is None else probe_grid)
    if truth not in grid:
        raise ValueError("probe grid must include the truthful report")
    truthful = agent_utility(instance, agent, truth, mechanism)
    best, best_report = truthful, truth
    for report in grid:
        if report == truth:
            continue
        u = agent_utility(instance, agent, report, mechanism)
        if u > best:
            best, best_report = u, report
    return DeviationReport(agent, truthful, best, best_report, len(grid))


def probe_agents(instance: NetworkInstance, mechanism: str, n_losers: int = 5,
                 rng_seed: int = 0) -> List[Agent]:
    """Every winning report plus ``n_losers`` randomly chosen losing ones.

    Under the double auction both sides of each winning trade are probed, and
    losers are drawn from all buyer requests and from the asks attached to
    candidate matches that did not trade.
    """
    outcome = MECHANISMS[mechanism](instance)
    winners = []
    for t in outcome.trades:
        winners.append(Agent("buyer", t.key))
        if mechanism == "double":
            winners.append(Agent("seller", t.key, t.candidate.seller_id))
    won = {t.key for t in outcome.trades}
    losers = [Agent("buyer", r.key) for r in instance.requests if r.key not in won]
    if mechanism == "double":
        plan = solve_p1_greedy(instance)
        losers += [Agent("seller", k, j) for k, j in sorted(plan.assignment.items()) if k not in won]
    rng = np.random.default_rng(rng_seed)
    if len(losers) > n_losers:
        picks = sorted(rng.choice(len(losers), size=n_losers, replace=False))
        losers = [losers[i] for i in picks]
    return winners + losers
