"""Exponentially time-weighted liquidity (ETWL) scores and LP ranking.

For each owner, events are replayed in ``(block, log_index)`` order. Between
two consecutive events of that owner, the liquidity held since the earlier
event accrues ``L * blocks_elapsed * exp(lambda * (1 - t_norm))`` where
``t_norm = (earlier_block - min_block) / (max_block - min_block)``.
Nothing accrues after an owner's last event unless ``close_at`` is set.
"""

from __future__ import annotations

import csv
import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from decimal import Decimal, localcontext

from scipy import stats

from .events import EventDataset
from .numeric import CONTEXT, fmt, to_decimal

logger = logging.getLogger(__name__)

DEFAULT_LAMBDA = Decimal("-1.5")


@dataclass
class EtwlAccumulator:
    current_liquidity: int = 0
    last_block: int | None = None
    total: Decimal = Decimal(0)


@dataclass(frozen=True)
class EtwlEntry:
    owner: str
    score: Decimal
    rank: int
    floored: bool = False


def compute_etwl(dataset: EventDataset, lam=DEFAULT_LAMBDA, close_at: bool = False) -> dict[str, Decimal]:
    """ETWL score for every owner in ``dataset``.

    ``lam`` should be negative; ``lam == 0`` gives plain liquidity-blocks.
    With ``close_at`` a terminal checkpoint at ``max_block`` lets standing
    liquidity accrue to the end of the dataset.
    """
    lam = to_decimal(lam)
    if lam > 0:
        logger.warning("decay factor %s is positive: older liquidity will outweigh recent", lam)
    if not dataset.events:
        raise ValueError("dataset is empty")
    min_block = dataset.min_block
    block_range = dataset.max_block - min_block

    acc: dict[str, EtwlAccumulator] = defaultdict(EtwlAccumulator)
    with localcontext(CONTEXT):
        weights: dict[int, Decimal] = {}

        def weight(last_block: int) -> Decimal:
            w = weights.get(last_block)
            if w is None:
                t_norm = Decimal(last_block - min_block) / block_range if block_range else Decimal(0)
                w = weights[last_block] = (lam * (1 - t_norm)).exp()
            return w

        def accrue(a: EtwlAccumulator, block: int) -> None:
            if a.last_block is not None:
                a.total += a.current_liquidity * (block - a.last_block) * weight(a.last_block)

        # events are already in (block, log_index) order; per-owner order follows
        for ev in dataset.events:
            a = acc[ev.owner]
            accrue(a, ev.block_number)
            a.current_liquidity += ev.signed_liquidity
            a.last_block = ev.block_number
        if close_at:
            for a in acc.values():
                accrue(a, dataset.max_block)
                a.last_block = dataset.max_block
    return {owner: a.total for owner, a in acc.items()}


def raw_liquidity_time(dataset: EventDataset) -> dict[str, Decimal]:
    """Unweighted sum of liquidity * blocks per owner."""
    return compute_etwl(dataset, 0)


def _ordered(scores: dict[str, Decimal]) -> list[tuple[str, Decimal, bool]]:
    floored = [(o, max(s, Decimal(0)), s < 0) for o, s in scores.items()]
    if any(f for _, _, f in floored):
        logger.warning("%d owner(s) with negative ETWL floored at 0", sum(f for _, _, f in floored))
    return sorted(floored, key=lambda t: (-t[1], t[0]))


def rank_lps(scores: dict[str, Decimal], k: int) -> list[EtwlEntry]:
    """Top ``k`` owners by score; ties go to the lower address."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return [EtwlEntry(o, s, i, f) for i, (o, s, f) in enumerate(_ordered(scores)[:k], 1)]


def rank_all(scores: dict[str, Decimal]) -> dict[str, int]:
    return {o: i for i, (o, _, _) in enumerate(_ordered(scores), 1)}


def average_ranks(values: list[Decimal]) -> list[float]:
    """1-based ranks, ties averaged (exact comparisons on decimals)."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        for m in range(i, j + 1):
            ranks[order[m]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def spearman(a: dict[str, Decimal], b: dict[str, Decimal]) -> float:
    owners = sorted(a)
    ra = average_ranks([a[o] for o in owners])
    rb = average_ranks([b[o] for o in owners])
    if ra == rb:
        return 1.0
    if len(owners) < 2 or len(set(ra)) == 1 or len(set(rb)) == 1:
        return math.nan
    return float(stats.spearmanr(ra, rb).statistic)


@dataclass(frozen=True)
class SweepRow:
    lam: Decimal
    ranking: list[EtwlEntry]
    spearman: float
    top_k_overlap: float


def lambda_sweep(dataset: EventDataset, lambdas, k: int, default_lambda=DEFAULT_LAMBDA, close_at: bool = False) -> list[SweepRow]:
    """Rank owners at each decay factor.

    Each row carries the Spearman correlation between ETWL scores and raw
    liquidity-time, and the fraction of the top-``k`` shared with the
    ranking at ``default_lambda``.
    """
    lambdas = [to_decimal(x) for x in lambdas]
    if len(lambdas) < 2:
        raise ValueError("need at least two lambda values")
    raw = compute_etwl(dataset, 0, close_at)
    default_top = {e.owner for e in rank_lps(compute_etwl(dataset, default_lambda, close_at), k)}
    rows = []
    for lam in lambdas:
        scores = compute_etwl(dataset, lam, close_at)
        ranking = rank_lps(scores, k)
        overlap = len({e.owner for e in ranking} & default_top) / len(default_top)
        rows.append(SweepRow(lam, ranking, spearman(scores, raw), overlap))
    return rows


def lambda_range(start, stop, step) -> list[Decimal]:
    """Inclusive range from ``start`` toward ``stop``; ``step`` sign is inferred."""
    start, stop, step = to_decimal(start), to_decimal(stop), abs(to_decimal(step))
    if step == 0:
        raise ValueError("step must be nonzero")
    sign = 1 if stop >= start else -1
    out = []
    x = start
    while (x - stop) * sign <= 0:
        out.append(x)
        x += sign * step
    return out


def write_ranking_csv(entries: list[EtwlEntry], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "owner", "etwl_score"])
        for e in entries:
            w.writerow([e.rank, e.owner, fmt(e.score)])


def write_sweep_csv(rows: list[SweepRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lambda", "spearman", "top_k_overlap_vs_default"])
        for r in rows:
            w.writerow([str(r.lam), f"{r.spearman:.12g}", f"{r.top_k_overlap:.6g}"])
