"""End-to-end service auctions over edge-computing wireless mesh networks."""

from .harness import (Agent, DeviationReport, PayoffSurface, SweepResult, deviation_probe,
                      payoff_surface, run_band_sweep)
from .mechanisms import (AuctionOutcome, CandidateMatch, Trade, double_auction,
                         enumerate_candidates, forward_greedy, forward_vcg, split_payment,
                         trade_reduction)
from .netmodel import (Band, ConfigError, InstanceError, Link, NetworkInstance, Node,
                       QosSpec, ScenarioConfig, Seller, ServiceRequest, SplitVector,
                       band_capacity, conflicts, derive_links, generate_instance)
from .netopt import (AllocationPlan, FeasibilityReport, SizeLimitError, SizeLimits,
                     StructuralError, check_feasibility, plan_throughput, solve_p1_exact,
                     solve_p1_greedy)
from .serialize import load_config

__version__ = "0.1.0"
