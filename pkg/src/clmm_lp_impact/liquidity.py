"""Per-tick liquidityNet and the cumulative active-liquidity profile."""

from __future__ import annotations

import bisect
import csv
import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable

from .events import EventDataset, PoolEvent

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LiquidityProfile:
    ticks: tuple[int, ...]
    cumulative_liquidity: tuple[int, ...]
    excluded_lp: str | None = None

    def __post_init__(self):
        if len(self.ticks) != len(self.cumulative_liquidity):
            raise ValueError("ticks and cumulative_liquidity differ in length")
        if any(a >= b for a, b in zip(self.ticks, self.ticks[1:])):
            raise ValueError("ticks must be strictly increasing")

    def __len__(self):
        return len(self.ticks)

    @property
    def clamped_ticks(self) -> int:
        """How many cumulative entries are negative (read back as 0)."""
        return sum(1 for v in self.cumulative_liquidity if v < 0)

    def active_liquidity_at(self, tick: int) -> int:
        return active_liquidity_at(self, tick)


def _events(source) -> Iterable[PoolEvent]:
    return source.events if isinstance(source, EventDataset) else source


def liquidity_net(source, excluded_lp: str | None = None) -> dict[int, int]:
    """Aggregate signed liquidity deltas per tick.

    A Mint adds its liquidity at ``tick_lower`` and removes it at
    ``tick_upper``; a Burn does the reverse. Ticks touched by events that
    cancel out stay in the map with a zero entry.
    """
    excluded = excluded_lp.lower() if excluded_lp else None
    net: dict[int, int] = defaultdict(int)
    for ev in _events(source):
        if excluded is not None and ev.owner == excluded:
            continue
        delta = ev.signed_liquidity
        net[ev.tick_lower] += delta
        net[ev.tick_upper] -= delta
    return dict(net)


def profile_from_net(net: dict[int, int], excluded_lp: str | None = None) -> LiquidityProfile:
    ticks = sorted(net)
    cumulative = []
    running = 0
    for t in ticks:
        running += net[t]
        cumulative.append(running)
    profile = LiquidityProfile(tuple(ticks), tuple(cumulative), excluded_lp)
    if profile.clamped_ticks:
        logger.warning("profile (excluded=%s) has %d negative tick(s); clamped to 0 on lookup",
                       excluded_lp, profile.clamped_ticks)
    return profile


def build_liquidity_profile(source, excluded_lp: str | None = None) -> LiquidityProfile:
    """Rebuild the active-liquidity profile, optionally without one LP's events.

    ``source`` is an :class:`EventDataset` or any iterable of events.
    """
    excluded = excluded_lp.lower() if excluded_lp else None
    return profile_from_net(liquidity_net(source, excluded), excluded)


def active_liquidity_at(profile: LiquidityProfile, tick: int) -> int:
    """Cumulative liquidity at the greatest profile tick <= ``tick``.

    Below the first tick (or on an empty profile) the answer is 0. Negative
    entries, which only counterfactual profiles can contain, read as 0.
    """
    j = bisect.bisect_right(profile.ticks, tick) - 1
    if j < 0:
        return 0
    return max(profile.cumulative_liquidity[j], 0)


def subtract_range(profile: LiquidityProfile, tick_lower: int, tick_upper: int, liquidity: int) -> LiquidityProfile:
    """Profile with ``liquidity`` removed on ``[tick_lower, tick_upper)``."""
    net = {}
    prev = 0
    for t, cum in zip(profile.ticks, profile.cumulative_liquidity):
        net[t] = cum - prev
        prev = cum
    net[tick_lower] = net.get(tick_lower, 0) - liquidity
    net[tick_upper] = net.get(tick_upper, 0) + liquidity
    return profile_from_net(net, profile.excluded_lp)


def write_profile_csv(profile: LiquidityProfile, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["tick", "cumulative_liquidity"])
        for t, cum in zip(profile.ticks, profile.cumulative_liquidity):
            writer.writerow([t, cum])
