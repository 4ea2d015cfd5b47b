"""Counterfactual LP exclusion, LSIS scores, baseline whale detectors and labels.

LSIS for an LP is the relative rise in mean price-impact magnitude when all
of that LP's events are removed from the liquidity history:
``(pi_excluded - pi_baseline) / pi_baseline`` (0 when ``pi_baseline`` is 0).
Both means run over the same fixed swap set, restricted to swaps that are
computable in both states.
"""

from __future__ import annotations

import csv
import enum
import json
import logging
import math
import os
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from decimal import Decimal, localcontext
from typing import Sequence

from .etwl import DEFAULT_LAMBDA, compute_etwl, rank_lps
from .events import EventDataset
from .liquidity import LiquidityProfile, active_liquidity_at, build_liquidity_profile
from .numeric import CONTEXT, fmt, to_decimal
from .swap_math import (
    DEFAULT_GRID,
    NoMeasurableImpactError,
    SyntheticSwap,
    UncomputableSwapError,
    generate_synthetic_swaps,
    price_impact,
    swap_impacts,
)

logger = logging.getLogger(__name__)

INFINITY = Decimal("Infinity")


class AnalysisError(RuntimeError):
    pass


class Label(str, enum.Enum):
    LINCHPIN_WHALE = "LinchpinWhale"
    DORMANT_LINCHPIN = "DormantLinchpin"
    ACTIVE_CRITICAL_WHALE = "ActiveCriticalWhale"
    DORMANT_CRITICAL_WHALE = "DormantCriticalWhale"
    FALSE_POSITIVE_WHALE = "FalsePositiveWhale"
    NON_WHALE = "NonWhale"


@dataclass(frozen=True)
class ClassifierConfig:
    lsis_epsilon: Decimal = Decimal("0.001")
    lsis_significant: Decimal = Decimal("0.01")
    lsis_linchpin: Decimal = Decimal("4.0")
    active_rank_max: int = 500

    def __post_init__(self):
        for name in ("lsis_epsilon", "lsis_significant", "lsis_linchpin"):
            object.__setattr__(self, name, to_decimal(getattr(self, name)))
        if not 0 < self.lsis_epsilon < self.lsis_significant < self.lsis_linchpin:
            raise ValueError("need 0 < lsis_epsilon < lsis_significant < lsis_linchpin")
        if self.active_rank_max < 1:
            raise ValueError("active_rank_max must be >= 1")


@dataclass(frozen=True)
class BaselineFlags:
    b1: bool = False
    b2: bool = False
    b3: bool = False

    def any(self) -> bool:
        return self.b1 or self.b2 or self.b3


@dataclass(frozen=True)
class LsisReport:
    owner: str
    etwl_rank: int
    pi_baseline: Decimal
    pi_excluded: Decimal
    lsis: Decimal
    skipped_swaps: int = 0
    baseline_flags: BaselineFlags = field(default_factory=BaselineFlags)
    label: Label = Label.NON_WHALE
    collapsed: bool = False
    clamped_ticks: int = 0


def lsis_score(pi_baseline: Decimal, pi_excluded: Decimal) -> Decimal:
    if pi_baseline == 0:
        return Decimal(0)
    with localcontext(CONTEXT):
        return (pi_excluded - pi_baseline) / pi_baseline


# -- classification ---------------------------------------------------------


def classify_one(lsis: Decimal, etwl_rank: int, flags: BaselineFlags, config: ClassifierConfig) -> Label:
    dormant = etwl_rank > config.active_rank_max
    if lsis < config.lsis_epsilon:
        return Label.FALSE_POSITIVE_WHALE if flags.any() else Label.NON_WHALE
    if lsis >= config.lsis_linchpin:
        return Label.DORMANT_LINCHPIN if dormant else Label.LINCHPIN_WHALE
    if lsis >= config.lsis_significant:
        return Label.DORMANT_CRITICAL_WHALE if dormant else Label.ACTIVE_CRITICAL_WHALE
    return Label.NON_WHALE


def classify(reports: Sequence[LsisReport], config: ClassifierConfig | None = None) -> list[LsisReport]:
    config = config or ClassifierConfig()
    return [replace(r, label=classify_one(r.lsis, r.etwl_rank, r.baseline_flags, config)) for r in reports]


# -- baseline detectors -----------------------------------------------------


@dataclass
class OwnerStats:
    minted: int = 0
    burned: int = 0
    outstanding: int = 0
    peak: int = 0

    @property
    def turnover(self) -> Decimal:
        denom = self.outstanding if self.outstanding > 0 else self.peak
        if denom <= 0:
            return Decimal(0)
        with localcontext(CONTEXT):
            return Decimal(self.minted + self.burned) / denom


def owner_stats(dataset: EventDataset) -> tuple[dict[str, OwnerStats], int]:
    """Per-owner totals plus the pool's peak outstanding liquidity."""
    per_owner: dict[str, OwnerStats] = defaultdict(OwnerStats)
    pool = pool_peak = 0
    for ev in dataset.events:
        s = per_owner[ev.owner]
        if ev.signed_liquidity > 0:
            s.minted += ev.liquidity
        else:
            s.burned += ev.liquidity
        s.outstanding += ev.signed_liquidity
        s.peak = max(s.peak, s.outstanding)
        pool += ev.signed_liquidity
        pool_peak = max(pool_peak, pool)
    return dict(per_owner), pool_peak


def nearest_rank_percentile(values, q: float):
    """Nearest-rank percentile: the ``ceil(q/100 * n)``-th smallest value."""
    ordered = sorted(values)
    if not ordered:
        raise ValueError("no values")
    idx = max(1, math.ceil(q / 100 * len(ordered)))
    return ordered[idx - 1]


def baseline_b1(dataset: EventDataset, percentile: float = 99) -> set[str]:
    """Owners whose total minted liquidity is at or above the percentile."""
    stats_, _ = owner_stats(dataset)
    cut = nearest_rank_percentile([s.minted for s in stats_.values()], percentile)
    return {o for o, s in stats_.items() if s.minted >= cut}


def baseline_b2(dataset: EventDataset, share_threshold=Decimal("0.01")) -> set[str]:
    """Owners whose peak outstanding liquidity is >= share of the pool's peak."""
    stats_, pool_peak = owner_stats(dataset)
    if pool_peak <= 0:
        return set()
    share = to_decimal(share_threshold)
    with localcontext(CONTEXT):
        return {o for o, s in stats_.items() if Decimal(s.peak) >= share * pool_peak}


def baseline_b3(dataset: EventDataset, size_percentile: float = 99, turnover_percentile: float = 95) -> set[str]:
    stats_, _ = owner_stats(dataset)
    size_cut = nearest_rank_percentile([s.minted for s in stats_.values()], size_percentile)
    turnover_cut = nearest_rank_percentile([s.turnover for s in stats_.values()], turnover_percentile)
    return {o for o, s in stats_.items() if s.minted >= size_cut and s.turnover >= turnover_cut}


def baseline_flags(dataset: EventDataset, share_threshold=Decimal("0.01")) -> dict[str, BaselineFlags]:
    b1, b2, b3 = baseline_b1(dataset), baseline_b2(dataset, share_threshold), baseline_b3(dataset)
    return {o: BaselineFlags(o in b1, o in b2, o in b3) for o in dataset.owners}


# -- exclusion runs ---------------------------------------------------------


@dataclass(frozen=True)
class ExclusionResult:
    pi_baseline: Decimal
    pi_excluded: Decimal
    skipped: int
    collapsed: bool
    clamped_ticks: int


class ImpactEvaluator:
    """Replays a fixed swap set against modified profiles.

    Baseline impacts are computed once; for a modified profile only swaps
    on ticks whose active liquidity changed are recomputed. The result is
    identical to recomputing every swap.
    """

    def __init__(self, swaps: Sequence[SyntheticSwap], baseline: LiquidityProfile, signed=False, canonical=False):
        self.swaps = list(swaps)
        self.baseline = baseline
        self.signed = signed
        self.canonical = canonical
        self.base_impacts = swap_impacts(self.swaps, baseline, signed, canonical)
        self.by_tick: dict[int, list[int]] = defaultdict(list)
        for i, s in enumerate(self.swaps):
            self.by_tick[s.tick].append(i)
        self.base_liquidity = {t: active_liquidity_at(baseline, t) for t in self.by_tick}

    def impacts_under(self, profile: LiquidityProfile) -> list[Decimal | None]:
        impacts = list(self.base_impacts)
        for tick, idxs in self.by_tick.items():
            L = active_liquidity_at(profile, tick)
            if L == self.base_liquidity[tick]:
                continue
            for i in idxs:
                try:
                    pi = price_impact(self.swaps[i], L, self.canonical)
                except UncomputableSwapError:
                    impacts[i] = None
                else:
                    impacts[i] = pi.percent if self.signed else pi.magnitude
        return impacts

    def compare(self, profile: LiquidityProfile) -> ExclusionResult:
        """Pairwise means over swaps computable in both the baseline and ``profile``."""
        other = self.impacts_under(profile)
        total_b = total_x = Decimal(0)
        count = 0
        with localcontext(CONTEXT):
            for b, x in zip(self.base_impacts, other):
                if b is None or x is None:
                    continue
                total_b += b
                total_x += x
                count += 1
            skipped = len(self.swaps) - count
            if count == 0:
                return ExclusionResult(INFINITY, INFINITY, skipped, True, profile.clamped_ticks)
            return ExclusionResult(total_b / count, total_x / count, skipped, False, profile.clamped_ticks)


_WORKER: dict = {}


def _init_worker(dataset: EventDataset, evaluator: ImpactEvaluator) -> None:
    _WORKER["dataset"] = dataset
    _WORKER["evaluator"] = evaluator


def _exclusion_job(owner: str) -> ExclusionResult:
    profile = build_liquidity_profile(_WORKER["dataset"], excluded_lp=owner)
    return _WORKER["evaluator"].compare(profile)


@dataclass
class AnalysisResult:
    reports: list[LsisReport]
    pi_baseline: Decimal
    baseline_skipped: int
    swap_count: int
    metadata: dict


def run_analysis(
    dataset: EventDataset,
    k: int = 100,
    lam=DEFAULT_LAMBDA,
    swap_grid=DEFAULT_GRID,
    seed: int = 42,
    config: ClassifierConfig | None = None,
    *,
    threads: int = 1,
    swaps: Sequence[SyntheticSwap] | None = None,
    signed: bool = False,
    canonical: bool = False,
    close_at: bool = False,
    b2_share=Decimal("0.01"),
) -> AnalysisResult:
    """Rank LPs by ETWL, then score the top ``k`` by counterfactual exclusion.

    Reports come back sorted by LSIS (descending), then address. An LP whose
    removal leaves no computable swap gets ``lsis = Infinity`` and
    ``collapsed = True``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    config = config or ClassifierConfig()
    top = rank_lps(compute_etwl(dataset, lam, close_at), k)

    baseline = build_liquidity_profile(dataset)
    if not baseline.ticks:
        raise AnalysisError("baseline profile is empty")
    if swaps is None:
        swaps = generate_synthetic_swaps(baseline, *swap_grid, rng_seed=seed)
    if not swaps:
        raise AnalysisError("no synthetic swaps: baseline has no active liquidity")
    evaluator = ImpactEvaluator(swaps, baseline, signed, canonical)
    try:
        computable = [v for v in evaluator.base_impacts if v is not None]
        if not computable:
            raise NoMeasurableImpactError()
        with localcontext(CONTEXT):
            pi_baseline = sum(computable, Decimal(0)) / len(computable)
    except NoMeasurableImpactError as exc:
        raise AnalysisError("all baseline swaps are uncomputable") from exc
    logger.info("baseline mean impact %s over %d swaps", fmt(pi_baseline), len(computable))

    owners = [e.owner for e in top]
    threads = max(1, int(threads))
    if threads == 1 or len(owners) < 2:
        _init_worker(dataset, evaluator)
        results = [_exclusion_job(o) for o in owners]
    else:
        with ProcessPoolExecutor(max_workers=min(threads, len(owners)), initializer=_init_worker,
                                 initargs=(dataset, evaluator)) as pool:
            results = list(pool.map(_exclusion_job, owners, chunksize=max(1, len(owners) // (threads * 4))))

    flags = baseline_flags(dataset, b2_share)
    reports = []
    for entry, res in zip(top, results):
        lsis = INFINITY if res.collapsed else lsis_score(res.pi_baseline, res.pi_excluded)
        reports.append(LsisReport(
            owner=entry.owner,
            etwl_rank=entry.rank,
            pi_baseline=res.pi_baseline,
            pi_excluded=res.pi_excluded,
            lsis=lsis,
            skipped_swaps=res.skipped,
            baseline_flags=flags[entry.owner],
            collapsed=res.collapsed,
            clamped_ticks=res.clamped_ticks,
        ))
    reports = sort_reports(classify(reports, config))
    metadata = {
        "lambda": str(to_decimal(lam)),
        "k": k,
        "seed": seed,
        "grid": [str(to_decimal(g)) for g in swap_grid],
        "thresholds": {key: str(v) for key, v in asdict(config).items()},
        "dataset_hash": dataset.content_hash(),
        "signed_mean": signed,
        "canonical_math": canonical,
        "close_at": close_at,
        "b2_share": str(b2_share),
    }
    return AnalysisResult(reports, pi_baseline, len(swaps) - len(computable), len(swaps), metadata)


def sort_reports(reports: Sequence[LsisReport]) -> list[LsisReport]:
    return sorted(reports, key=lambda r: (-r.lsis, r.owner))


def top_percentile(reports: Sequence[LsisReport], percentage: float) -> list[LsisReport]:
    """Keep the highest-LSIS ``percentage`` percent of reports (at least one)."""
    if not 0 < percentage <= 100:
        raise ValueError("percentage must be in (0, 100]")
    ordered = sort_reports(reports)
    n = max(1, math.ceil(len(ordered) * percentage / 100)) if ordered else 0
    return ordered[:n]


def default_threads() -> int:
    return os.cpu_count() or 1


# -- report files -----------------------------------------------------------

REPORT_COLUMNS = ["owner", "etwl_rank", "pi_baseline", "pi_excluded", "lsis", "skipped_swaps", "b1", "b2", "b3", "label"]


def _bool(v: bool) -> str:
    return "true" if v else "false"


def _parse_decimal(text: str) -> Decimal:
    return INFINITY if text == "inf" else Decimal(text)


def write_reports_csv(reports: Sequence[LsisReport], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in reports:
            f = r.baseline_flags
            w.writerow([r.owner, r.etwl_rank, fmt(r.pi_baseline), fmt(r.pi_excluded), fmt(r.lsis),
                        r.skipped_swaps, _bool(f.b1), _bool(f.b2), _bool(f.b3), r.label.value])


def read_reports_csv(path) -> list[LsisReport]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [report_from_row(row) for row in rows]


def report_from_row(row: dict) -> LsisReport:
    lsis = _parse_decimal(row["lsis"])
    return LsisReport(
        owner=row["owner"],
        etwl_rank=int(row["etwl_rank"]),
        pi_baseline=_parse_decimal(row["pi_baseline"]),
        pi_excluded=_parse_decimal(row["pi_excluded"]),
        lsis=lsis,
        skipped_swaps=int(row["skipped_swaps"]),
        baseline_flags=BaselineFlags(*(str(row[b]).lower() == "true" for b in ("b1", "b2", "b3"))),
        label=Label(row["label"]),
        collapsed=lsis.is_infinite(),
    )


def report_to_row(r: LsisReport) -> dict:
    f = r.baseline_flags
    return {
        "owner": r.owner,
        "etwl_rank": r.etwl_rank,
        "pi_baseline": fmt(r.pi_baseline),
        "pi_excluded": fmt(r.pi_excluded),
        "lsis": fmt(r.lsis),
        "skipped_swaps": r.skipped_swaps,
        "b1": _bool(f.b1),
        "b2": _bool(f.b2),
        "b3": _bool(f.b3),
        "label": r.label.value,
        "collapsed": r.collapsed,
        "clamped_ticks": r.clamped_ticks,
    }


def write_reports_json(result: AnalysisResult, path) -> None:
    payload = {
        "metadata": result.metadata,
        "pi_baseline": fmt(result.pi_baseline),
        "baseline_skipped": result.baseline_skipped,
        "swap_count": result.swap_count,
        "reports": [report_to_row(r) for r in result.reports],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_reports_json(path) -> list[LsisReport]:
    with open(path) as fh:
        payload = json.load(fh)
    return [report_from_row(row) for row in payload["reports"]]
