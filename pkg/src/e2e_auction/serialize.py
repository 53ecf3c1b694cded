"""JSON / CSV (de)serialisation. Field names carry their units."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Iterable, Sequence

from .netmodel import (Band, ConfigError, Link, NetworkInstance, Node, QosSpec,
                       ScenarioConfig, Seller, ServiceRequest, SplitVector)
from .netopt import AllocationPlan, FeasibilityReport


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def write_json(obj, path) -> None:
    Path(path).write_text(dumps(obj))


def read_json(path):
    return json.loads(Path(path).read_text())


# ---------------------------------------------------------------- config


def load_config(path) -> ScenarioConfig:
    try:
        data = read_json(path)
    except json.JSONDecodeError as exc:
        raise ConfigError("<root>", f"invalid JSON: {exc}") from exc
    return ScenarioConfig.from_dict(data)


def save_config(config: ScenarioConfig, path) -> None:
    write_json(config.to_dict(), path)


# ---------------------------------------------------------------- instance


def _entries(table):
    return [{"buyer_id": k[0], "index": k[1], "value": v} for k, v in sorted(table.items())]


def _table(entries):
    return {(e["buyer_id"], e["index"]): float(e["value"]) for e in entries}


def instance_to_dict(inst: NetworkInstance) -> dict:
    return {
        "config": inst.config.to_dict(),
        "nodes": [{"id": n.id, "x_m": n.x_m, "y_m": n.y_m, "role": n.role} for n in inst.nodes],
        "bands": [{"id": b.id, "bandwidth_mhz": b.bandwidth_mhz} for b in inst.bands],
        "links": [{"u": l.u, "v": l.v, "per_band_capacity_mbps": l.per_band_capacity_mbps}
                  for l in inst.links],
        "sellers": [{
            "id": s.id,
            "host_node": s.host_node,
            "compute_capacity_ghz": s.compute_capacity_ghz,
            "storage_capacity_gb": s.storage_capacity_gb,
            "asks": _entries(s.asks),
            "true_costs": _entries(s.true_costs),
        } for s in inst.sellers],
        "requests": [{
            "buyer_id": r.buyer_id,
            "index": r.index,
            "compute_ghz": r.qos.compute_ghz,
            "storage_gb": r.qos.storage_gb,
            "rate_mbps": r.qos.rate_mbps,
            "bid": r.bid,
            "true_value": r.true_value,
        } for r in inst.requests],
        "splits": None if inst.splits is None else [
            {"buyer_id": k[0], "index": k[1], "fractions": list(v.fractions)}
            for k, v in sorted(inst.splits.items())],
    }


def instance_from_dict(d: dict) -> NetworkInstance:
    try:
        config = ScenarioConfig.from_dict(d["config"])
        nodes = tuple(Node(n["id"], n["x_m"], n["y_m"], n["role"]) for n in d["nodes"])
        bands = tuple(Band(b["id"], b["bandwidth_mhz"]) for b in d["bands"])
        links = tuple(Link(l["u"], l["v"], l["per_band_capacity_mbps"]) for l in d["links"])
        sellers = tuple(Seller(s["id"], s["host_node"], s["compute_capacity_ghz"],
                               s["storage_capacity_gb"], _table(s["asks"]), _table(s["true_costs"]))
                        for s in d["sellers"])
        requests = tuple(ServiceRequest(r["buyer_id"], r["index"],
                                        QosSpec(r["compute_ghz"], r["storage_gb"], r["rate_mbps"]),
                                        r["bid"], r["true_value"])
                         for r in d["requests"])
        splits = None
        if d.get("splits") is not None:
            splits = {(e["buyer_id"], e["index"]): SplitVector(tuple(e["fractions"]))
                      for e in d["splits"]}
    except KeyError as exc:
        raise ConfigError(str(exc.args[0]), "missing required field") from exc
    return NetworkInstance(nodes, links, bands, sellers, requests, config, splits)


def load_instance(path) -> NetworkInstance:
    return instance_from_dict(read_json(path))


# ---------------------------------------------------------------- plans and outcomes


def plan_to_dict(plan: AllocationPlan) -> dict:
    return {
        "assignment": [{"buyer_id": k[0], "index": k[1], "seller_id": j}
                       for k, j in sorted(plan.assignment.items())],
        "spectrum": [{"u": l[0], "v": l[1], "bands": sorted(b)}
                     for l, b in sorted(plan.spectrum.items())],
        "flows": [{"buyer_id": k[0], "index": k[1], "u": l[0], "v": l[1], "rate_mbps": f}
                  for k, per in sorted(plan.flows.items()) for l, f in sorted(per.items())],
        "routes": [{"buyer_id": k[0], "index": k[1], "path": list(p)}
                   for k, p in sorted(plan.routes.items())],
    }


def plan_from_dict(d: dict) -> AllocationPlan:
    plan = AllocationPlan()
    for e in d["assignment"]:
        plan.assignment[(e["buyer_id"], e["index"])] = e["seller_id"]
    for e in d["spectrum"]:
        plan.spectrum[(e["u"], e["v"])] = frozenset(e["bands"])
    for e in d["flows"]:
        plan.flows.setdefault((e["buyer_id"], e["index"]), {})[(e["u"], e["v"])] = e["rate_mbps"]
    for e in d["routes"]:
        plan.routes[(e["buyer_id"], e["index"])] = tuple(e["path"])
    return plan


def report_to_dict(report: FeasibilityReport) -> dict:
    return {
        "pass": report.passed,
        "violations": [{"kind": v.kind, "entity": repr(v.entity), "slack": v.slack}
                       for v in report.violations],
    }


def outcome_to_dict(outcome) -> dict:
    return {
        "mechanism": outcome.mechanism,
        "trades": [{
            "buyer_id": t.key[0],
            "index": t.key[1],
            "seller_id": t.candidate.seller_id,
            "bid": t.candidate.bid,
            "ask": t.candidate.ask,
            "buyer_charge": t.buyer_charge,
            "seller_payment": t.seller_payment,
        } for t in outcome.trades],
        "provider_revenue": outcome.provider_revenue,
        "thresholds": None if outcome.thresholds is None else {
            "buyer_price": outcome.thresholds[0], "seller_price": outcome.thresholds[1]},
        "losers": [{"buyer_id": k[0], "index": k[1]} for k in outcome.losers],
        "final_plan": plan_to_dict(outcome.final_plan),
    }


# ---------------------------------------------------------------- CSV


def _cell(v):
    return repr(v) if isinstance(v, float) else v


def to_csv(columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()
