"""Throughput vs. number of bands for P1 and for the double auction.

    python scripts/band_sweep.py --trials 20 --out results/
"""

import argparse
from pathlib import Path

from e2e_auction.harness import run_band_sweep
from e2e_auction.serialize import load_config
from e2e_auction.netmodel import ScenarioConfig

parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
parser.add_argument("--config", help="scenario JSON (default: built-in scenario)")
parser.add_argument("--bands", type=int, nargs="+", default=[1, 2, 3, 4, 5, 6])
parser.add_argument("--trials", type=int, default=20)
parser.add_argument("--out", default="results")
args = parser.parse_args()

config = load_config(args.config) if args.config else ScenarioConfig()
result = run_band_sweep(config, args.bands, args.trials)
out = Path(args.out)
out.mkdir(parents=True, exist_ok=True)
(out / "band_sweep_rows.csv").write_text(result.to_csv())
(out / "band_sweep_means.csv").write_text(result.means_csv())

print(f"{'bands':>5} {'P1 Mbps':>9} {'auction Mbps':>13} {'revenue':>8}")
for n, (p1, won, revenue) in result.means().items():
    print(f"{n:>5} {p1:>9.2f} {won:>13.2f} {revenue:>8.3f}")
