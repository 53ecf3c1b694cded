"""Hand-built instances and brute-force oracles shared by the test modules."""

import itertools
import math
from dataclasses import replace

from e2e_auction.netmodel import (BUYER, RELAY, SERVER, Band, NetworkInstance, Node, QosSpec,
                                  ScenarioConfig, Seller, ServiceRequest, conflicts,
                                  derive_links, generate_instance)

TINY = ScenarioConfig(
    area_width_m=500.0, area_height_m=500.0, n_buyers=2, requests_per_buyer=2,
    n_sellers=2, n_relays=1, n_bands=2, communication_range_m=300.0,
    interference_range_m=250.0,
    server_compute_ghz_range=(3.0, 8.0), server_storage_gb_range=(3.0, 8.0),
)


def tiny_instance(seed, **overrides):
    return generate_instance(replace(TINY, seed=seed, **overrides))


def make_instance(nodes, requests, sellers, n_bands=1, *, bandwidth=10.0, comm_range=250.0,
                  interference=500.0, efficiency=1.0):
    """Build an instance by hand.

    nodes: ``(id, x, y, role)``; requests: ``(buyer, index, compute, storage, rate, bid)``;
    sellers: ``(id, host, cpu, mem)`` or ``(id, host, cpu, mem, {key: ask})``
    (missing asks default to 0).
    """
    config = ScenarioConfig(
        n_buyers=sum(1 for n in nodes if n[3] == BUYER), requests_per_buyer=0,
        n_sellers=len(sellers), n_relays=sum(1 for n in nodes if n[3] == RELAY),
        n_bands=n_bands, band_bandwidth_mhz=bandwidth, communication_range_m=comm_range,
        interference_range_m=interference, spectral_efficiency_bps_per_hz=efficiency)
    node_objs = tuple(Node(i, float(x), float(y), role) for i, x, y, role in nodes)
    reqs = tuple(ServiceRequest(b, k, QosSpec(c, s, r), float(bid), float(bid))
                 for b, k, c, s, r, bid in requests)
    seller_objs = []
    for entry in sellers:
        sid, host, cpu, mem = entry[:4]
        asks = {q.key: 0.0 for q in reqs}
        if len(entry) > 4:
            asks.update(entry[4])
        seller_objs.append(Seller(sid, host, cpu, mem, asks, dict(asks)))
    links = derive_links(node_objs, comm_range, bandwidth * efficiency)
    bands = tuple(Band(b + 1, bandwidth) for b in range(n_bands))
    return NetworkInstance(node_objs, links, bands, tuple(seller_objs), reqs, config)


def star_instance(bids, rate=4.0, compute=1.0, cpu=6.0, mem=8.0, n_bands=4, asks=None):
    """Every buyer 100 m from one server; one request each, keys ``(b, 1)``."""
    n = len(bids)
    nodes = [(b + 1, 500.0 + 100.0 * math.cos(2 * math.pi * b / n),
              500.0 + 100.0 * math.sin(2 * math.pi * b / n), BUYER) for b in range(n)]
    nodes.append((n + 1, 500.0, 500.0, SERVER))
    requests = [(b + 1, 1, compute, 1.0, rate, bid) for b, bid in enumerate(bids)]
    seller = (1, n + 1, cpu, mem) if asks is None else (1, n + 1, cpu, mem, asks)
    return make_instance(nodes, requests, [seller], n_bands=n_bands, interference=0.0)


# ---------------------------------------------------------------- brute-force P1


def relay_paths(instance, src, dst):
    """All simple src->dst node paths whose interior nodes are relays (naive DFS)."""
    links = {l.key for l in instance.links}
    relays = [n.id for n in instance.nodes if n.role == RELAY]
    out = []
    for length in range(len(relays) + 1):
        for middle in itertools.permutations(relays, length):
            path = (src, *middle, dst)
            if all((a, b) in links for a, b in zip(path, path[1:])):
                out.append(path)
    return out


def _bands_fit(instance, load):
    """Naive check: enumerate, per band, every conflict-free set of loaded links."""
    used = sorted(load)
    if not used:
        return True
    pos = {n.id: (n.x_m, n.y_m) for n in instance.nodes}
    r = instance.config.interference_range_m
    link = {l.key: l for l in instance.links}
    independent = []
    for size in range(len(used) + 1):
        for subset in itertools.combinations(used, size):
            if all(not conflicts(link[a], link[b], r, pos)
                   for a, b in itertools.combinations(subset, 2)):
                independent.append(subset)
    for choice in itertools.product(independent, repeat=len(instance.bands)):
        count = {l: 0 for l in used}
        for subset in choice:
            for l in subset:
                count[l] += 1
        if all(count[l] * link[l].per_band_capacity_mbps >= load[l] - 1e-9 for l in used):
            return True
    return False


def brute_force_best(instance, weight=lambda req: req.qos.rate_mbps):
    """Optimal total weight over every (server, route) choice per request."""
    reqs = sorted(instance.requests, key=lambda q: q.key)
    options = []
    for q in reqs:
        opts = [None]
        for s in instance.sellers:
            for p in relay_paths(instance, q.buyer_id, s.host_node):
                opts.append((s, p))
        options.append(opts)
    fit_memo = {}
    best = 0.0
    for combo in itertools.product(*options):
        value = math.fsum(weight(q) for q, o in zip(reqs, combo) if o is not None)
        if value <= best:
            continue
        cpu, mem, load = {}, {}, {}
        for q, o in zip(reqs, combo):
            if o is None:
                continue
            s, p = o
            cpu[s.id] = cpu.get(s.id, 0.0) + q.qos.compute_ghz
            mem[s.id] = mem.get(s.id, 0.0) + q.qos.storage_gb
            for l in zip(p, p[1:]):
                load[l] = load.get(l, 0.0) + q.qos.rate_mbps
        if any(cpu[j] > instance.seller(j).compute_capacity_ghz + 1e-9 or
               mem[j] > instance.seller(j).storage_capacity_gb + 1e-9 for j in cpu):
            continue
        sig = tuple(sorted(load.items()))
        if sig not in fit_memo:
            fit_memo[sig] = _bands_fit(instance, load)
        if fit_memo[sig]:
            best = value
    return best
