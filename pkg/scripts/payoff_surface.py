"""Utility of one buyer over a grid of its two bids (4 bands by default).

    python scripts/payoff_surface.py --seed 0 --grid 41 --out results/
"""

import argparse
from dataclasses import replace
from pathlib import Path

from e2e_auction.harness import designated_buyer, payoff_surface
from e2e_auction.netmodel import ScenarioConfig, generate_instance
from e2e_auction.serialize import load_config

parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
parser.add_argument("--config")
parser.add_argument("--seed", type=int, default=0)
parser.add_argument("--buyer", type=int)
parser.add_argument("--grid", type=int, default=41)
parser.add_argument("--out", default="results")
args = parser.parse_args()

config = load_config(args.config) if args.config else ScenarioConfig()
inst = generate_instance(replace(config, seed=args.seed))
buyer = args.buyer if args.buyer is not None else designated_buyer(inst)
surface = payoff_surface(inst, buyer, points=args.grid)
out = Path(args.out)
out.mkdir(parents=True, exist_ok=True)
(out / f"payoff_surface_seed{args.seed}_buyer{buyer}.csv").write_text(surface.to_csv())

i, j = surface.truthful_index
print(f"buyer {buyer}: truthful bids ({surface.axis[i]:.2f}, {surface.axis[j]:.2f}) "
      f"utility {surface.truthful_utility:.4f}; grid max {surface.max_utility:.4f}")
