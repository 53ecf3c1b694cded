"""Physical network and market entities, plus the random instance generator."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

BUYER = "buyer-device"
RELAY = "relay"
SERVER = "server-host"
ROLES = (BUYER, RELAY, SERVER)

RequestKey = Tuple[int, int]
LinkKey = Tuple[int, int]


class ConfigError(ValueError):
    """Raised when a scenario config (or its JSON form) is invalid.

    ``field`` names the offending entry.
    """

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class InstanceError(ValueError):
    """Raised when an instance violates its structural invariants."""


@dataclass(frozen=True)
class Node:
    id: int
    x_m: float
    y_m: float
    role: str


@dataclass(frozen=True)
class Band:
    id: int
    bandwidth_mhz: float

    def __post_init__(self):
        if not self.bandwidth_mhz > 0:
            raise InstanceError(f"band {self.id}: bandwidth must be positive")


@dataclass(frozen=True)
class Link:
    u: int
    v: int
    per_band_capacity_mbps: float

    @property
    def key(self) -> LinkKey:
        return (self.u, self.v)


@dataclass(frozen=True)
class QosSpec:
    compute_ghz: float
    storage_gb: float
    rate_mbps: float

    def __post_init__(self):
        if min(self.compute_ghz, self.storage_gb, self.rate_mbps) <= 0:
            raise InstanceError(f"QoS values must be strictly positive: {self}")


@dataclass(frozen=True)
class ServiceRequest:
    buyer_id: int
    index: int
    qos: QosSpec
    bid: float
    true_value: float

    @property
    def key(self) -> RequestKey:
        return (self.buyer_id, self.index)


@dataclass(frozen=True)
class Seller:
    id: int
    host_node: int
    compute_capacity_ghz: float
    storage_capacity_gb: float
    asks: Dict[RequestKey, float]
    true_costs: Dict[RequestKey, float]

    def __post_init__(self):
        if self.compute_capacity_ghz <= 0 or self.storage_capacity_gb <= 0:
            raise InstanceError(f"seller {self.id}: capacities must be positive")
        if any(a < 0 for a in self.asks.values()):
            raise InstanceError(f"seller {self.id}: negative ask")


@dataclass(frozen=True)
class SplitVector:
    """Fractions of a buyer's charge owed to each seller category."""

    fractions: Tuple[float, ...]

    def __post_init__(self):
        if any(f < 0 for f in self.fractions):
            raise ValueError(f"split fractions must be nonnegative: {self.fractions}")
        if abs(math.fsum(self.fractions) - 1.0) > 1e-12:
            raise ValueError(f"split fractions must sum to 1: {self.fractions}")


Interval = Tuple[float, float]


@dataclass
class ScenarioConfig:
    """Market and topology parameters.

    Defaults: 12 buyers with 2 requests each,
    3 sellers, 4 relays in a 1000 x 1000 m area, 10 MHz bands.
    """

    area_width_m: float = 1000.0
    area_height_m: float = 1000.0
    n_buyers: int = 12
    requests_per_buyer: int = 2
    n_sellers: int = 3
    n_relays: int = 4
    rate_mbps_range: Interval = (4.0, 8.0)
    compute_ghz_range: Interval = (1.0, 4.0)
    storage_gb_range: Interval = (1.0, 3.0)
    bid_range: Interval = (0.5, 4.0)
    ask_range: Interval = (0.0, 1.0)
    server_compute_ghz_range: Interval = (6.0, 14.0)
    server_storage_gb_range: Interval = (8.0, 24.0)
    n_bands: int = 4
    band_bandwidth_mhz: float = 10.0
    communication_range_m: float = 250.0
    interference_range_m: float = 500.0
    spectral_efficiency_bps_per_hz: float = 1.0
    seed: int = 0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name.endswith("_range") and isinstance(value, (list, tuple)):
                setattr(self, f.name, tuple(float(v) for v in value))
        self.validate()

    def validate(self) -> None:
        for name in ("n_buyers", "requests_per_buyer", "n_sellers", "n_relays", "n_bands"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                raise ConfigError(name, f"must be a nonnegative integer, got {value!r}")
        for f in fields(self):
            if not f.name.endswith("_range"):
                continue
            value = getattr(self, f.name)
            if not isinstance(value, tuple) or len(value) != 2:
                raise ConfigError(f.name, f"must be a [low, high] pair, got {value!r}")
            low, high = value
            if not low <= high:
                raise ConfigError(f.name, f"low {low} exceeds high {high}")
        for name in ("rate_mbps_range", "compute_ghz_range", "storage_gb_range",
                     "server_compute_ghz_range", "server_storage_gb_range"):
            if getattr(self, name)[0] <= 0:
                raise ConfigError(name, "lower bound must be strictly positive")
        for name in ("bid_range", "ask_range"):
            if getattr(self, name)[0] < 0:
                raise ConfigError(name, "lower bound must be nonnegative")
        for name in ("area_width_m", "area_height_m", "band_bandwidth_mhz"):
            if not getattr(self, name) > 0:
                raise ConfigError(name, "must be positive")
        for name in ("communication_range_m", "interference_range_m",
                     "spectral_efficiency_bps_per_hz"):
            if getattr(self, name) < 0:
                raise ConfigError(name, "must be nonnegative")

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        if not isinstance(data, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        known = {f.name for f in fields(cls)}
        for key in data:
            if key not in known:
                raise ConfigError(key, "unknown field")
        for name in known:
            if name not in data:
                raise ConfigError(name, "missing required field")
        return cls(**data)


@dataclass(frozen=True)
class NetworkInstance:
    nodes: Tuple[Node, ...]
    links: Tuple[Link, ...]
    bands: Tuple[Band, ...]
    sellers: Tuple[Seller, ...]
    requests: Tuple[ServiceRequest, ...]
    config: ScenarioConfig
    splits: Optional[Dict[RequestKey, SplitVector]] = None
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        node_ids = [n.id for n in self.nodes]
        if len(set(node_ids)) != len(node_ids):
            raise InstanceError("duplicate node id")
        by_id = {n.id: n for n in self.nodes}
        for s in self.sellers:
            host = by_id.get(s.host_node)
            if host is None or host.role != SERVER:
                raise InstanceError(f"seller {s.id}: host {s.host_node} is not a server-host node")
        keys = [r.key for r in self.requests]
        if len(set(keys)) != len(keys):
            raise InstanceError("duplicate request key")
        for r in self.requests:
            node = by_id.get(r.buyer_id)
            if node is None or node.role != BUYER:
                raise InstanceError(f"request {r.key}: buyer {r.buyer_id} has no buyer-device node")
            if r.bid < 0:
                raise InstanceError(f"request {r.key}: negative bid")
        link_keys = {l.key for l in self.links}
        for u, v in link_keys:
            if (v, u) not in link_keys:
                raise InstanceError(f"link ({u},{v}) has no reverse")
        object.__setattr__(self, "_index", {
            "nodes": by_id,
            "links": {l.key: l for l in self.links},
            "sellers": {s.id: s for s in self.sellers},
            "requests": {r.key: r for r in self.requests},
            "bands": {b.id: b for b in self.bands},
        })

    def node(self, node_id: int) -> Node:
        return self._index["nodes"][node_id]

    def link(self, key: LinkKey) -> Link:
        return self._index["links"][key]

    def seller(self, seller_id: int) -> Seller:
        return self._index["sellers"][seller_id]

    def request(self, key: RequestKey) -> ServiceRequest:
        return self._index["requests"][key]

    def has_node(self, node_id) -> bool:
        return node_id in self._index["nodes"]

    def has_link(self, key) -> bool:
        return key in self._index["links"]

    def has_seller(self, seller_id) -> bool:
        return seller_id in self._index["sellers"]

    def has_request(self, key) -> bool:
        return key in self._index["requests"]

    def has_band(self, band_id) -> bool:
        return band_id in self._index["bands"]

    def buyer_requests(self, buyer_id: int) -> List[ServiceRequest]:
        return [r for r in self.requests if r.buyer_id == buyer_id]

    def distance(self, a: int, b: int) -> float:
        na, nb = self.node(a), self.node(b)
        return math.hypot(na.x_m - nb.x_m, na.y_m - nb.y_m)


def band_capacity(band: Band, spectral_efficiency: float) -> float:
    """Mbps carried by one band on an in-range link."""
    return band.bandwidth_mhz * spectral_efficiency


def _dist(a: Node, b: Node) -> float:
    return math.hypot(a.x_m - b.x_m, a.y_m - b.y_m)


def derive_links(nodes: Iterable[Node], communication_range: float,
                 per_band_capacity: float) -> Tuple[Link, ...]:
    """Directed links between every ordered pair of distinct nodes within range."""
    nodes = sorted(nodes, key=lambda n: n.id)
    links = []
    for a in nodes:
        for b in nodes:
            if a.id != b.id and _dist(a, b) <= communication_range:
                links.append(Link(a.id, b.id, per_band_capacity))
    return tuple(links)


def conflicts(link_a: Link, link_b: Link, interference_range: float,
              positions: Dict[int, Tuple[float, float]]) -> bool:
    """Protocol-model interference: shared endpoint or any endpoints within range."""
    ends_a = (link_a.u, link_a.v)
    ends_b = (link_b.u, link_b.v)
    if set(ends_a) & set(ends_b):
        return True
    for p in ends_a:
        for q in ends_b:
            (x1, y1), (x2, y2) = positions[p], positions[q]
            if math.hypot(x1 - x2, y1 - y2) <= interference_range:
                return True
    return False


def generate_instance(config: ScenarioConfig) -> NetworkInstance:
    """Draw a random instance; deterministic given ``config.seed``.

    Node ids: buyers ``1..I``, server hosts ``I+1..I+J`` (seller ``j`` sits on
    ``I+j``), relays after that. The number of bands does not touch the RNG,
    so instances differing only in ``n_bands`` share every other draw.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    n_b, n_s, n_r = config.n_buyers, config.n_sellers, config.n_relays

    roles = [BUYER] * n_b + [SERVER] * n_s + [RELAY] * n_r
    xs = rng.uniform(0.0, config.area_width_m, size=len(roles))
    ys = rng.uniform(0.0, config.area_height_m, size=len(roles))
    nodes = tuple(Node(i + 1, float(xs[i]), float(ys[i]), role) for i, role in enumerate(roles))

    def draw(interval, n):
        return rng.uniform(interval[0], interval[1], size=n)

    n_req = n_b * config.requests_per_buyer
    rates = draw(config.rate_mbps_range, n_req)
    computes = draw(config.compute_ghz_range, n_req)
    storages = draw(config.storage_gb_range, n_req)
    bids = draw(config.bid_range, n_req)
    requests = []
    for pos in range(n_req):
        buyer, idx = divmod(pos, config.requests_per_buyer)
        qos = QosSpec(float(computes[pos]), float(storages[pos]), float(rates[pos]))
        bid = float(bids[pos])
        requests.append(ServiceRequest(buyer + 1, idx + 1, qos, bid, bid))

    cpu_caps = draw(config.server_compute_ghz_range, n_s)
    mem_caps = draw(config.server_storage_gb_range, n_s)
    asks = draw(config.ask_range, n_s * n_req).reshape(n_s, n_req) if n_req else np.zeros((n_s, 0))
    sellers = []
    for j in range(n_s):
        table = {requests[p].key: float(asks[j, p]) for p in range(n_req)}
        sellers.append(Seller(j + 1, n_b + j + 1, float(cpu_caps[j]), float(mem_caps[j]),
                              table, dict(table)))

    bands = tuple(Band(b + 1, config.band_bandwidth_mhz) for b in range(config.n_bands))
    per_band = config.band_bandwidth_mhz * config.spectral_efficiency_bps_per_hz
    links = derive_links(nodes, config.communication_range_m, per_band)
    return NetworkInstance(nodes, links, bands, tuple(sellers), tuple(requests), config)


def with_reports(instance: NetworkInstance,
                 bids: Optional[Dict[RequestKey, float]] = None,
                 asks: Optional[Dict[Tuple[int, RequestKey], float]] = None) -> NetworkInstance:
    """Copy of ``instance`` with some bids and/or asks replaced (true values kept)."""
    requests = instance.requests
    if bids:
        requests = tuple(
            ServiceRequest(r.buyer_id, r.index, r.qos, float(bids[r.key]), r.true_value)
            if r.key in bids else r
            for r in requests)
    sellers = instance.sellers
    if asks:
        new = []
        for s in sellers:
            mine = {key: a for (j, key), a in asks.items() if j == s.id}
            if mine:
                table = dict(s.asks)
                table.update({k: float(v) for k, v in mine.items()})
                s = Seller(s.id, s.host_node, s.compute_capacity_ghz,
                           s.storage_capacity_gb, table, s.true_costs)
            new.append(s)
        sellers = tuple(new)
    return NetworkInstance(instance.nodes, instance.links, instance.bands, sellers,
                           requests, instance.config, instance.splits)


def with_bands(instance: NetworkInstance, n_bands: int) -> NetworkInstance:
    bandwidth = instance.config.band_bandwidth_mhz
    bands = tuple(Band(b + 1, bandwidth) for b in range(n_bands))
    return NetworkInstance(instance.nodes, instance.links, bands, instance.sellers,
                           instance.requests, replace(instance.config, n_bands=n_bands),
                           instance.splits)
