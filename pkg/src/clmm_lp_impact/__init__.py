"""Liquidity-provider impact analytics for concentrated-liquidity pools."""

__version__ = "0.1.0"

from .counterfactual import (
    BaselineFlags,
    ClassifierConfig,
    Label,
    LsisReport,
    baseline_b1,
    baseline_b2,
    baseline_b3,
    classify,
    lsis_score,
    run_analysis,
)
from .etwl import EtwlEntry, compute_etwl, lambda_sweep, rank_lps
from .events import EventDataset, EventType, PoolEvent, fetch_and_preprocess, ingest_jsonl, load, persist
from .gatekeeper import BurnRequest, GateDecision, GateState, GateThresholds, Verdict, evaluate_burn
from .liquidity import LiquidityProfile, active_liquidity_at, build_liquidity_profile
from .swap_math import (
    SyntheticSwap,
    calculate_average_pi,
    generate_synthetic_swaps,
    price_impact,
    sqrtp_to_sqrtx96,
    sqrtx96_to_sqrtp,
    swap_volume_dx,
    swap_volume_dy,
    tick_to_price,
)
