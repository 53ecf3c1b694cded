"""Joint request assignment, spectrum allocation and routing (throughput maximisation).

Every solver here is price-blind: bids and asks never enter the search, so the
candidate assignments handed to the auction step cannot be steered by reports.
"""

from __future__ import annotations

import itertools
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

from .netmodel import RELAY, LinkKey, NetworkInstance, RequestKey, conflicts

TOL = 1e-9
# objective gaps below this count as ties (keeps the first optimum found)
TIE = 1e-10


class StructuralError(ValueError):
    """A plan references entities that do not exist in the instance."""


class SizeLimitError(ValueError):
    """Instance too large for the exhaustive solver."""


@dataclass(frozen=True)
class SizeLimits:
    max_requests: int = 8
    max_sellers: int = 3
    max_bands: int = 4
    max_nodes: int = 10


@dataclass
class AllocationPlan:
    """Assignment ``h``, spectrum ``x``, flows ``f`` and node routes.

    Only assigned requests appear in ``assignment``, ``flows`` and ``routes``.
    """

    assignment: Dict[RequestKey, int] = field(default_factory=dict)
    spectrum: Dict[LinkKey, FrozenSet[int]] = field(default_factory=dict)
    flows: Dict[RequestKey, Dict[LinkKey, float]] = field(default_factory=dict)
    routes: Dict[RequestKey, Tuple[int, ...]] = field(default_factory=dict)

    def restricted_to(self, keys: Iterable[RequestKey]) -> "AllocationPlan":
        """Sub-plan keeping only ``keys``; unused links drop their bands."""
        keys = set(keys) & set(self.assignment)
        flows = {k: dict(self.flows.get(k, {})) for k in keys}
        used = {l for k in keys for l, rate in flows[k].items() if rate > 0}
        spectrum = {l: b for l, b in self.spectrum.items() if l in used}
        return AllocationPlan(
            {k: self.assignment[k] for k in keys},
            spectrum,
            flows,
            {k: self.routes[k] for k in keys if k in self.routes},
        )


@dataclass(frozen=True)
class Violation:
    kind: str
    entity: object
    slack: float


@dataclass
class FeasibilityReport:
    violations: List[Violation] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.passed


def plan_throughput(plan: AllocationPlan, instance: NetworkInstance) -> float:
    return math.fsum(instance.request(k).qos.rate_mbps for k in plan.assignment)


def _route_links(route: Sequence[int]) -> List[LinkKey]:
    return list(zip(route[:-1], route[1:]))


# ---------------------------------------------------------------- audit


def check_feasibility(instance: NetworkInstance, plan: AllocationPlan) -> FeasibilityReport:
    """Audit ``plan`` against every E2E QoS constraint.

    Raises :class:`StructuralError` for dangling references; constraint
    breaches are returned as violations with their slack (negative = overshoot).
    """
    for key, seller_id in plan.assignment.items():
        if not instance.has_request(key):
            raise StructuralError(f"unknown request {key}")
        if not instance.has_seller(seller_id):
            raise StructuralError(f"request {key}: unknown seller {seller_id}")
    for key, per_link in plan.flows.items():
        if not instance.has_request(key):
            raise StructuralError(f"flows for unknown request {key}")
        for l in per_link:
            if not instance.has_link(l):
                raise StructuralError(f"flow on unknown link {l}")
    for l, bands in plan.spectrum.items():
        if not instance.has_link(l):
            raise StructuralError(f"spectrum on unknown link {l}")
        for b in bands:
            if not instance.has_band(b):
                raise StructuralError(f"unknown band {b} on link {l}")
    for key, route in plan.routes.items():
        if not instance.has_request(key):
            raise StructuralError(f"route for unknown request {key}")
        for n in route:
            if not instance.has_node(n):
                raise StructuralError(f"route {key} visits unknown node {n}")

    report = FeasibilityReport()
    bad = report.violations.append

    for key, per_link in plan.flows.items():
        if key not in plan.assignment and any(abs(f) > TOL for f in per_link.values()):
            bad(Violation("flow_unassigned", key, -max(abs(f) for f in per_link.values())))
        for l, f in per_link.items():
            if f < -TOL:
                bad(Violation("negative_flow", (key, l), f))

    for key, seller_id in sorted(plan.assignment.items()):
        req = instance.request(key)
        src = req.buyer_id
        dst = instance.seller(seller_id).host_node
        route = plan.routes.get(key)
        if route is None or len(route) < 2 or route[0] != src or route[-1] != dst:
            bad(Violation("route", key, -1.0))
        else:
            if len(set(route)) != len(route):
                bad(Violation("route", key, -1.0))
            for n in route[1:-1]:
                if instance.node(n).role != RELAY:
                    bad(Violation("route", (key, n), -1.0))
            on_route = set(_route_links(route))
            for l in sorted(on_route):
                if not instance.has_link(l):
                    bad(Violation("route", (key, l), -1.0))
            for l, f in sorted(plan.flows.get(key, {}).items()):
                if l not in on_route and abs(f) > TOL:
                    bad(Violation("flow_off_route", (key, l), -abs(f)))

        # (a) conservation: net outflow is +d at the buyer, -d at the server, 0 elsewhere
        net: Dict[int, float] = {}
        for (u, v), f in plan.flows.get(key, {}).items():
            net[u] = net.get(u, 0.0) + f
            net[v] = net.get(v, 0.0) - f
        delivered = net.get(src, 0.0)
        for n, value in sorted(net.items()):
            expected = delivered if n == src else (-delivered if n == dst else 0.0)
            if abs(value - expected) > TOL:
                bad(Violation("flow_conservation", (key, n), -abs(value - expected)))
        # (b) E2E rate
        if delivered < req.qos.rate_mbps - TOL:
            bad(Violation("rate", key, delivered - req.qos.rate_mbps))

    # (c) link capacity
    load: Dict[LinkKey, float] = {}
    for key, per_link in plan.flows.items():
        for l, f in per_link.items():
            load[l] = load.get(l, 0.0) + f
    for l in sorted(load):
        cap = len(plan.spectrum.get(l, ())) * instance.link(l).per_band_capacity_mbps
        if load[l] > cap + TOL:
            bad(Violation("link_capacity", l, cap - load[l]))

    # (d) one band never on two conflicting links
    positions = {n.id: (n.x_m, n.y_m) for n in instance.nodes}
    interference = instance.config.interference_range_m
    holders = sorted((l, bands) for l, bands in plan.spectrum.items() if bands)
    for (la, ba), (lb, bb) in itertools.combinations(holders, 2):
        shared = set(ba) & set(bb)
        if shared and conflicts(instance.link(la), instance.link(lb), interference, positions):
            bad(Violation("band_conflict", (la, lb, tuple(sorted(shared))), -float(len(shared))))

    # (e) server compute / storage
    used_cpu: Dict[int, float] = {}
    used_mem: Dict[int, float] = {}
    for key, j in plan.assignment.items():
        q = instance.request(key).qos
        used_cpu[j] = used_cpu.get(j, 0.0) + q.compute_ghz
        used_mem[j] = used_mem.get(j, 0.0) + q.storage_gb
    for j in sorted(used_cpu):
        s = instance.seller(j)
        if used_cpu[j] > s.compute_capacity_ghz + TOL:
            bad(Violation("compute_capacity", j, s.compute_capacity_ghz - used_cpu[j]))
        if used_mem[j] > s.storage_capacity_gb + TOL:
            bad(Violation("storage_capacity", j, s.storage_capacity_gb - used_mem[j]))
    return report


# ---------------------------------------------------------------- shared context


class NetworkContext:
    """Bid-independent view of an instance: routes, conflicts, memoised greedy runs."""

    def __init__(self, instance: NetworkInstance):
        self.instance = instance
        self.band_ids = tuple(sorted(b.id for b in instance.bands))
        positions = {n.id: (n.x_m, n.y_m) for n in instance.nodes}
        links = sorted(instance.links, key=lambda l: l.key)
        self.capacity = {l.key: l.per_band_capacity_mbps for l in links}
        r = instance.config.interference_range_m
        self.conflict: Dict[LinkKey, FrozenSet[LinkKey]] = {}
        for a in links:
            self.conflict[a.key] = frozenset(
                b.key for b in links if b.key != a.key and conflicts(a, b, r, positions))
        self.requests = {q.key: q for q in instance.requests}
        self.sellers = sorted(instance.sellers, key=lambda s: s.id)
        adj: Dict[int, List[int]] = {n.id: [] for n in instance.nodes}
        for u, v in self.capacity:
            adj[u].append(v)
        for nbrs in adj.values():
            nbrs.sort()
        self._adj = adj
        self._relays = {n.id for n in instance.nodes if n.role == RELAY}
        self._paths: Dict[Tuple[int, int], List[Tuple[int, ...]]] = {}
        self.greedy_memo: Dict[Tuple[RequestKey, ...], "AllocationPlan"] = {}

    def paths(self, src: int, dst: int) -> List[Tuple[int, ...]]:
        """Simple paths src -> dst through relays only, by (hops, node sequence)."""
        key = (src, dst)
        if key not in self._paths:
            found = []

            def walk(path, seen):
                for nxt in self._adj[path[-1]]:
                    if nxt == dst:
                        found.append(tuple(path) + (dst,))
                    elif nxt in self._relays and nxt not in seen:
                        seen.add(nxt)
                        path.append(nxt)
                        walk(path, seen)
                        path.pop()
                        seen.discard(nxt)

            walk([src], {src})
            found.sort(key=lambda p: (len(p), p))
            self._paths[key] = found
        return self._paths[key]

    def bands_needed(self, link: LinkKey, load: float) -> Optional[int]:
        if load <= TOL:
            return 0
        cap = self.capacity[link]
        if cap <= 0:
            return None
        return max(0, math.ceil((load - TOL) / cap))


_CONTEXTS: "OrderedDict[tuple, NetworkContext]" = OrderedDict()
_CONTEXT_CACHE_SIZE = 256


def _physical_key(instance: NetworkInstance) -> tuple:
    return (
        instance.nodes,
        instance.links,
        instance.bands,
        tuple((s.id, s.host_node, s.compute_capacity_ghz, s.storage_capacity_gb)
              for s in instance.sellers),
        tuple((r.key, r.qos) for r in instance.requests),
        instance.config.interference_range_m,
    )


def network_context(instance: NetworkInstance) -> NetworkContext:
    """Shared context for every instance with the same physical layer.

    Reports (bids, asks) are not part of the key, so misreport probes reuse it.
    """
    key = _physical_key(instance)
    ctx = _CONTEXTS.get(key)
    if ctx is None:
        ctx = NetworkContext(instance)
        _CONTEXTS[key] = ctx
        if len(_CONTEXTS) > _CONTEXT_CACHE_SIZE:
            _CONTEXTS.popitem(last=False)
    else:
        _CONTEXTS.move_to_end(key)
    return ctx


# ---------------------------------------------------------------- greedy


class _Residual:
    def __init__(self, ctx: NetworkContext):
        self.ctx = ctx
        self.cpu = {s.id: s.compute_capacity_ghz for s in ctx.sellers}
        self.mem = {s.id: s.storage_capacity_gb for s in ctx.sellers}
        self.link_bands: Dict[LinkKey, set] = {}
        self.link_load: Dict[LinkKey, float] = {}
        self.band_links: Dict[int, set] = {b: set() for b in ctx.band_ids}

    def free_bands(self, link: LinkKey) -> List[int]:
        mine = self.link_bands.get(link, ())
        blocked = self.ctx.conflict[link]
        return [b for b in self.ctx.band_ids
                if b not in mine and not (self.band_links[b] & blocked)]

    def grant(self, links: Sequence[LinkKey], rate: float) -> Optional[Dict[LinkKey, Tuple[int, ...]]]:
        """Fresh bands per link so every link carries ``rate`` more; exhaustive."""
        ctx = self.ctx
        needs = []
        for l in links:
            have = len(self.link_bands.get(l, ()))
            total = ctx.bands_needed(l, self.link_load.get(l, 0.0) + rate)
            if total is None:
                return None
            extra = max(0, total - have)
            free = self.free_bands(l) if extra else []
            if extra > len(free):
                return None
            needs.append((l, extra, free))

        chosen: Dict[LinkKey, Tuple[int, ...]] = {}

        def place(i):
            if i == len(needs):
                return True
            l, extra, free = needs[i]
            if extra == 0:
                chosen[l] = ()
                return place(i + 1)
            taken = set()
            for other, bands in chosen.items():
                if other in ctx.conflict[l]:
                    taken.update(bands)
            options = [b for b in free if b not in taken]
            for combo in itertools.combinations(options, extra):
                chosen[l] = combo
                if place(i + 1):
                    return True
            chosen.pop(l, None)
            return False

        return dict(chosen) if place(0) else None

    def commit(self, seller_id: int, qos, links, grants):
        self.cpu[seller_id] -= qos.compute_ghz
        self.mem[seller_id] -= qos.storage_gb
        for l in links:
            self.link_load[l] = self.link_load.get(l, 0.0) + qos.rate_mbps
            for b in grants[l]:
                self.link_bands.setdefault(l, set()).add(b)
                self.band_links[b].add(l)


def greedy_allocate(instance: NetworkInstance, order: Sequence[RequestKey]) -> AllocationPlan:
    """Admit requests one by one in ``order``; each takes the first fit.

    Servers are tried by hop distance (ties: seller id) among those with
    enough residual compute and storage; routes by hop count. A request that
    fits nowhere is skipped. Results are memoised per processing order.
    """
    ctx = network_context(instance)
    order = tuple(order)
    cached = ctx.greedy_memo.get(order)
    if cached is not None:
        return cached

    state = _Residual(ctx)
    plan = AllocationPlan()
    for key in order:
        req = ctx.requests[key]
        q = req.qos
        servers = []
        for s in ctx.sellers:
            paths = ctx.paths(req.buyer_id, s.host_node)
            if paths:
                servers.append((len(paths[0]) - 1, s.id, paths))
        servers.sort(key=lambda t: (t[0], t[1]))
        for _, sid, paths in servers:
            if state.cpu[sid] < q.compute_ghz - TOL or state.mem[sid] < q.storage_gb - TOL:
                continue
            placed = False
            for path in paths:
                links = _route_links(path)
                grants = state.grant(links, q.rate_mbps)
                if grants is None:
                    continue
                state.commit(sid, q, links, grants)
                plan.assignment[key] = sid
                plan.routes[key] = path
                plan.flows[key] = {l: q.rate_mbps for l in links}
                placed = True
                break
            if placed:
                break
    plan.spectrum = {l: frozenset(b) for l, b in state.link_bands.items() if b}
    ctx.greedy_memo[order] = plan
    return plan


def rate_order(instance: NetworkInstance) -> List[RequestKey]:
    return [r.key for r in sorted(instance.requests, key=lambda r: (-r.qos.rate_mbps, r.key))]


def solve_p1_greedy(instance: NetworkInstance) -> AllocationPlan:
    """Heuristic throughput maximiser: descending rate, first fit."""
    return greedy_allocate(instance, rate_order(instance))


# ---------------------------------------------------------------- exact


def _color_links(ctx: NetworkContext, demand: Dict[LinkKey, int]) -> Optional[Dict[LinkKey, Tuple[int, ...]]]:
    """Give each link ``demand[l]`` bands with conflicting links disjoint."""
    links = sorted(l for l, n in demand.items() if n > 0)
    if any(demand[l] > len(ctx.band_ids) for l in links):
        return None
    chosen: Dict[LinkKey, Tuple[int, ...]] = {}

    def place(i):
        if i == len(links):
            return True
        l = links[i]
        taken = set()
        for other in links[:i]:
            if other in ctx.conflict[l]:
                taken.update(chosen[other])
        options = [b for b in ctx.band_ids if b not in taken]
        for combo in itertools.combinations(options, demand[l]):
            chosen[l] = combo
            if place(i + 1):
                return True
        chosen.pop(l, None)
        return False

    return dict(chosen) if place(0) else None


def _check_limits(instance: NetworkInstance, limits: SizeLimits) -> None:
    checks = [
        ("requests", len(instance.requests), limits.max_requests),
        ("sellers", len(instance.sellers), limits.max_sellers),
        ("bands", len(instance.bands), limits.max_bands),
        ("nodes", len(instance.nodes), limits.max_nodes),
    ]
    for what, n, cap in checks:
        if n > cap:
            raise SizeLimitError(f"{n} {what} exceeds exact-solver limit {cap}")


def branch_and_bound(instance: NetworkInstance, weights: Dict[RequestKey, float],
                     limits: SizeLimits = SizeLimits()) -> Tuple[float, AllocationPlan]:
    """Maximise the total weight of served requests over all feasible plans.

    Depth-first over requests in key order; each request tries every
    (seller, route) option before being left out, so the first optimum found
    is the lexicographically smallest. Requests with nonpositive weight stay out.
    """
    _check_limits(instance, limits)
    ctx = network_context(instance)
    keys = sorted(k for k, w in weights.items() if w > 0)
    w = [weights[k] for k in keys]
    tail = [math.fsum(w[i:]) for i in range(len(keys))] + [0.0]
    options = []
    for k in keys:
        req = ctx.requests[k]
        opts = []
        for s in ctx.sellers:
            for path in ctx.paths(req.buyer_id, s.host_node):
                opts.append((s.id, path, tuple(_route_links(path))))
        options.append(opts)

    cpu = {s.id: s.compute_capacity_ghz for s in ctx.sellers}
    mem = {s.id: s.storage_capacity_gb for s in ctx.sellers}
    load: Dict[LinkKey, float] = {}
    color_memo: Dict[FrozenSet, Optional[dict]] = {}
    picked: List[Optional[tuple]] = [None] * len(keys)
    best = {"value": 0.0, "picks": [None] * len(keys)}

    def colorable():
        demand = {}
        for l, f in load.items():
            n = ctx.bands_needed(l, f)
            if n is None:
                return None
            if n:
                demand[l] = n
        sig = frozenset(demand.items())
        if sig not in color_memo:
            color_memo[sig] = _color_links(ctx, demand)
        return color_memo[sig]

    def dfs(i, value):
        if value + tail[i] <= best["value"] + TIE:
            return
        if i == len(keys):
            if value > best["value"] + TIE:
                best["value"] = value
                best["picks"] = list(picked)
            return
        q = ctx.requests[keys[i]].qos
        for sid, path, links in options[i]:
            if cpu[sid] < q.compute_ghz - TOL or mem[sid] < q.storage_gb - TOL:
                continue
            for l in links:
                load[l] = load.get(l, 0.0) + q.rate_mbps
            if colorable() is not None:
                cpu[sid] -= q.compute_ghz
                mem[sid] -= q.storage_gb
                picked[i] = (sid, path, links)
                dfs(i + 1, value + w[i])
                picked[i] = None
                cpu[sid] += q.compute_ghz
                mem[sid] += q.storage_gb
            for l in links:
                load[l] -= q.rate_mbps
                if abs(load[l]) <= TOL:
                    del load[l]
        dfs(i + 1, value)

    dfs(0, 0.0)

    plan = AllocationPlan()
    load.clear()
    for k, pick in zip(keys, best["picks"]):
        if pick is None:
            continue
        sid, path, links = pick
        rate = ctx.requests[k].qos.rate_mbps
        plan.assignment[k] = sid
        plan.routes[k] = path
        plan.flows[k] = {l: rate for l in links}
        for l in links:
            load[l] = load.get(l, 0.0) + rate
    coloring = colorable() or {}
    plan.spectrum = {l: frozenset(b) for l, b in coloring.items() if b}
    return best["value"], plan


def solve_p1_exact(instance: NetworkInstance, limits: SizeLimits = SizeLimits()) -> AllocationPlan:
    """Throughput-optimal plan by exhaustive branch and bound."""
    weights = {r.key: r.qos.rate_mbps for r in instance.requests}
    return branch_and_bound(instance, weights, limits)[1]
