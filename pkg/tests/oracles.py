"""Independent reference implementations used as test oracles.

None of these import the code paths they check: the impact oracle uses
mpmath at 100 digits, the profile oracle replays events into a plain dict,
and the analysis oracle recomputes every swap for every LP with no caching.
"""

from __future__ import annotations

from decimal import Decimal

import mpmath

ORACLE_DPS = 100


def impact_percent(liquidity, sqrt_price_x96, amount0, amount1):
    """Signed single-tick price impact in percent, or None if uncomputable."""
    with mpmath.workdps(ORACLE_DPS):
        L = mpmath.mpf(int(liquidity))
        p = mpmath.mpf(int(sqrt_price_x96)) / mpmath.mpf(2) ** 96
        if L <= 0:
            return None
        if mpmath.mpf(str(amount1)) == 0:
            denom = L - mpmath.mpf(str(amount0)) * p
            if denom <= 0:
                return None
            pf = L * p / denom
            return (p**2 - pf**2) / p**2 * 100
        pf = p - mpmath.mpf(str(amount1)) / L
        if pf <= 0:
            return None
        return (pf**2 - p**2) / p**2 * 100


def brute_profile(events, excluded=None):
    """(ticks, cumulative) by direct replay into a dict."""
    net = {}
    for ev in events:
        if excluded is not None and ev.owner == excluded:
            continue
        sign = 1 if ev.event_type.value == "Mint" else -1
        net[ev.tick_lower] = net.get(ev.tick_lower, 0) + sign * ev.liquidity
        net[ev.tick_upper] = net.get(ev.tick_upper, 0) - sign * ev.liquidity
    ticks = sorted(net)
    cum, run = [], 0
    for t in ticks:
        run += net[t]
        cum.append(run)
    return ticks, cum


def linear_lookup(ticks, cum, tick):
    best = 0
    for t, c in zip(ticks, cum):
        if t <= tick:
            best = c
    return max(best, 0)


def etwl_direct(intervals, lam, t_min, t_max):
    """Sum of L * dt * exp(lam * (1 - (t - t_min)/(t_max - t_min))) at 60 digits."""
    with mpmath.workdps(60):
        total = mpmath.mpf(0)
        for L, t_start, dt in intervals:
            norm = mpmath.mpf(t_start - t_min) / (t_max - t_min)
            total += L * dt * mpmath.exp(mpmath.mpf(str(lam)) * (1 - norm))
        return total


def naive_analysis(dataset, owners, swaps):
    """Per-owner (pi_baseline, pi_excluded, skipped, collapsed), recomputing everything.

    Uses the package's Decimal impact formula so results can be compared
    field-for-field; the independence lies in the orchestration (no caching,
    no per-tick reuse, no worker pool, profile by brute replay).
    """
    from clmm_lp_impact.swap_math import UncomputableSwapError, price_impact

    def impacts(ticks, cum):
        out = []
        for s in swaps:
            try:
                out.append(price_impact(s, linear_lookup(ticks, cum, s.tick)).magnitude)
            except UncomputableSwapError:
                out.append(None)
        return out

    base = impacts(*brute_profile(dataset.events))
    results = {}
    from clmm_lp_impact.numeric import CONTEXT
    from decimal import localcontext

    for owner in owners:
        excl = impacts(*brute_profile(dataset.events, owner))
        pairs = [(b, x) for b, x in zip(base, excl) if b is not None and x is not None]
        if not pairs:
            results[owner] = (Decimal("Infinity"), Decimal("Infinity"), len(swaps), True)
            continue
        with localcontext(CONTEXT):
            tb = tx = Decimal(0)
            for b, x in pairs:
                tb += b
                tx += x
            results[owner] = (tb / len(pairs), tx / len(pairs), len(swaps) - len(pairs), False)
    return results
