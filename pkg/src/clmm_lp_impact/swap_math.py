"""Q96 price math, single-tick price impact and synthetic swap sets.

All arithmetic runs in :data:`numeric.CONTEXT` (80 significant digits).

Price impact follows the single-tick formulas, with ``P`` the *square-root*
price and ``L`` the active liquidity at the swap's tick:

* token0 in:  ``P_f = L*P / (L - dX*P)``,  ``PI = (P^2 - P_f^2) / P^2 * 100``
* token1 in:  ``P_f = P - dY/L``,          ``PI = (P_f^2 - P^2) / P^2 * 100``

Note the token0 formula moves the price *up*; ``canonical=True`` swaps in
``L + dX*P`` (the textbook direction) for comparison.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from decimal import Decimal, localcontext
from typing import Iterable, Sequence

from .liquidity import LiquidityProfile, active_liquidity_at
from .numeric import CONTEXT, to_decimal

logger = logging.getLogger(__name__)

Q96 = 2**96
MIN_TICK = -887272
MAX_TICK = 887272
TICK_BASE = Decimal("1.0001")

SQRT_PRICE_DRAW_LOW = 2**95
SQRT_PRICE_DRAW_HIGH = 2**100

DEFAULT_GRID = (Decimal("0.0001"), Decimal("0.01"), Decimal("0.001"))


class UncomputableSwapError(ValueError):
    pass


class NoLiquidityError(UncomputableSwapError):
    def __init__(self, tick=None):
        super().__init__(f"no liquidity at tick {tick}" if tick is not None else "no liquidity at tick")


class TickCapacityError(UncomputableSwapError):
    def __init__(self):
        super().__init__("swap exceeds single-tick capacity")


class NoMeasurableImpactError(ValueError):
    def __init__(self, message="no measurable impact"):
        super().__init__(message)


# -- conversions ------------------------------------------------------------


def tick_to_price(tick: int) -> Decimal:
    """``1.0001 ** tick``."""
    if not MIN_TICK <= tick <= MAX_TICK:
        raise ValueError(f"tick {tick} outside [{MIN_TICK}, {MAX_TICK}]")
    with localcontext(CONTEXT):
        return TICK_BASE ** tick


def sqrtx96_to_sqrtp(raw: int) -> Decimal:
    if raw <= 0:
        raise ValueError("sqrtPriceX96 must be positive")
    with localcontext(CONTEXT):
        return Decimal(raw) / Decimal(Q96)


def sqrtp_to_sqrtx96(sqrt_p) -> int:
    sqrt_p = to_decimal(sqrt_p)
    if sqrt_p <= 0:
        raise ValueError("sqrt price must be positive")
    with localcontext(CONTEXT):
        return int((sqrt_p * Q96).to_integral_value())


def _check_sqrt(*values: Decimal) -> None:
    for v in values:
        if v <= 0:
            raise ValueError("sqrt prices must be positive")


def swap_volume_dx(liquidity, sqrt_pa, sqrt_pb) -> Decimal:
    """token0 moved between two sqrt prices: ``L * |1/sqrt_pb - 1/sqrt_pa|``."""
    sqrt_pa, sqrt_pb = to_decimal(sqrt_pa), to_decimal(sqrt_pb)
    _check_sqrt(sqrt_pa, sqrt_pb)
    with localcontext(CONTEXT):
        return to_decimal(liquidity) * abs(1 / sqrt_pb - 1 / sqrt_pa)


def swap_volume_dy(liquidity, sqrt_pa, sqrt_pb) -> Decimal:
    """token1 moved between two sqrt prices: ``L * |sqrt_pb - sqrt_pa|``."""
    sqrt_pa, sqrt_pb = to_decimal(sqrt_pa), to_decimal(sqrt_pb)
    _check_sqrt(sqrt_pa, sqrt_pb)
    with localcontext(CONTEXT):
        return to_decimal(liquidity) * abs(sqrt_pb - sqrt_pa)


# -- swaps and impact -------------------------------------------------------


@dataclass(frozen=True, slots=True)
class SyntheticSwap:
    tick: int
    amount0_in: Decimal
    amount1_in: Decimal
    liquidity: int
    sqrt_price_x96: int

    @property
    def token0_in(self) -> bool:
        # a swap with both amounts zero is treated as a null token0 swap
        return self.amount1_in == 0

    @property
    def sqrt_price(self) -> Decimal:
        return sqrtx96_to_sqrtp(self.sqrt_price_x96)


@dataclass(frozen=True, slots=True)
class PriceImpact:
    percent: Decimal

    @property
    def magnitude(self) -> Decimal:
        return abs(self.percent)


def price_impact(swap: SyntheticSwap, liquidity: int, canonical: bool = False) -> PriceImpact:
    """Impact of ``swap`` against ``liquidity`` at a single tick.

    Raises :class:`NoLiquidityError` when ``liquidity`` is 0 and
    :class:`TickCapacityError` when the swap would drive the denominator
    or the new price to zero.
    """
    if liquidity <= 0:
        raise NoLiquidityError(swap.tick)
    if swap.amount0_in == 0 and swap.amount1_in == 0:
        # exact zero: going through L*P/L would leave rounding noise in P_f
        return PriceImpact(Decimal(0))
    with localcontext(CONTEXT):
        L = Decimal(liquidity)
        p = Decimal(swap.sqrt_price_x96) / Decimal(Q96)
        p2 = p * p
        if swap.token0_in:
            dx_p = swap.amount0_in * p
            denom = L + dx_p if canonical else L - dx_p
            if denom <= 0:
                raise TickCapacityError()
            pf = L * p / denom
            pi = (p2 - pf * pf) / p2 * 100
        else:
            pf = p - swap.amount1_in / L
            if pf <= 0:
                raise TickCapacityError()
            pi = (pf * pf - p2) / p2 * 100
    return PriceImpact(pi)


class SplitMix64:
    """SplitMix64 generator (Steele, Lea & Flood constants).

    ``randint`` concatenates 64-bit outputs, most significant first, into
    ``ceil(bits(n)/64)`` words and rejection-samples so draws are exactly
    uniform over ``[lo, hi]``.
    """

    _MASK = (1 << 64) - 1

    def __init__(self, seed: int):
        self.state = seed & self._MASK

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & self._MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & self._MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & self._MASK
        return z ^ (z >> 31)

    def randint(self, lo: int, hi: int) -> int:
        if hi < lo:
            raise ValueError("empty range")
        n = hi - lo + 1
        words = max(1, (n.bit_length() + 63) // 64)
        space = 1 << (64 * words)
        limit = space - space % n
        while True:
            r = 0
            for _ in range(words):
                r = (r << 64) | self.next()
            if r < limit:
                return lo + r % n


def percentage_grid(start, end, step) -> list[Decimal]:
    """Inclusive arithmetic range ``start, start+step, ... <= end``."""
    start, end, step = to_decimal(start), to_decimal(end), to_decimal(step)
    if not 0 < start <= end:
        raise ValueError(f"need 0 < pct_start <= pct_end, got {start}, {end}")
    if step <= 0:
        raise ValueError("step must be positive")
    out = []
    i = 0
    with localcontext(CONTEXT):
        while (pct := start + i * step) <= end:
            out.append(pct)
            i += 1
    return out


def generate_synthetic_swaps(profile: LiquidityProfile, pct_start, pct_end, step, rng_seed: int) -> list[SyntheticSwap]:
    """Fixed swap set: two swaps (token0 in, token1 in) per percentage per active tick.

    Each tick with positive active liquidity gets one sqrt price drawn
    uniformly from ``[2^95, 2^100]``; the swap sizes are fractions of the
    reserves estimated from that price (``L/sqrt_p`` and ``L*sqrt_p``).
    """
    grid = percentage_grid(pct_start, pct_end, step)
    if not profile.ticks:
        logger.warning("empty liquidity profile: no synthetic swaps generated")
        return []
    rng = SplitMix64(rng_seed)
    swaps = []
    with localcontext(CONTEXT):
        for tick in profile.ticks:
            liquidity = active_liquidity_at(profile, tick)
            if liquidity <= 0:
                continue
            sqrt_price_x96 = rng.randint(SQRT_PRICE_DRAW_LOW, SQRT_PRICE_DRAW_HIGH)
            sqrt_p = Decimal(sqrt_price_x96) / Decimal(Q96)
            reserve0 = Decimal(liquidity) / sqrt_p
            reserve1 = Decimal(liquidity) * sqrt_p
            zero = Decimal(0)
            for pct in grid:
                swaps.append(SyntheticSwap(tick, reserve0 * pct, zero, liquidity, sqrt_price_x96))
                swaps.append(SyntheticSwap(tick, zero, reserve1 * pct, liquidity, sqrt_price_x96))
    return swaps


def swap_impacts(
    swaps: Sequence[SyntheticSwap],
    profile: LiquidityProfile,
    signed: bool = False,
    canonical: bool = False,
) -> list[Decimal | None]:
    """Per-swap impact against ``profile`` (``None`` where uncomputable).

    Liquidity is re-resolved from ``profile`` rather than taken from the
    value captured on the swap, which is what lets one swap set be replayed
    against counterfactual profiles.
    """
    out: list[Decimal | None] = []
    cache: dict[int, int] = {}
    for swap in swaps:
        L = cache.get(swap.tick)
        if L is None:
            L = cache[swap.tick] = active_liquidity_at(profile, swap.tick)
        try:
            pi = price_impact(swap, L, canonical)
        except UncomputableSwapError:
            out.append(None)
            continue
        out.append(pi.percent if signed else pi.magnitude)
    return out


@dataclass(frozen=True)
class MeanImpact:
    mean: Decimal
    computed: int
    skipped: int


def mean_of(values: Iterable[Decimal | None]) -> MeanImpact:
    total = Decimal(0)
    count = skipped = 0
    with localcontext(CONTEXT):
        for v in values:
            if v is None:
                skipped += 1
            else:
                total += v
                count += 1
        if count == 0:
            raise NoMeasurableImpactError()
        return MeanImpact(total / count, count, skipped)


def calculate_average_pi(
    swaps: Sequence[SyntheticSwap],
    profile: LiquidityProfile,
    signed: bool = False,
    canonical: bool = False,
) -> MeanImpact:
    """Mean impact magnitude (or signed impact) over the computable swaps."""
    if not swaps:
        raise ValueError("swaps must be non-empty")
    return mean_of(swap_impacts(swaps, profile, signed, canonical))


# -- swap-set files ---------------------------------------------------------


def write_swaps_jsonl(swaps: Iterable[SyntheticSwap], path, seed: int) -> None:
    with open(path, "w") as fh:
        for s in swaps:
            fh.write(json.dumps({
                "tick": s.tick,
                "amount0": str(s.amount0_in),
                "amount1": str(s.amount1_in),
                "liquidity": str(s.liquidity),
                "sqrtPriceX96": str(s.sqrt_price_x96),
                "seed": seed,
            }, separators=(",", ":")) + "\n")


def read_swaps_jsonl(path) -> list[SyntheticSwap]:
    swaps = []
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            swaps.append(SyntheticSwap(
                tick=int(obj["tick"]),
                amount0_in=Decimal(obj["amount0"]),
                amount1_in=Decimal(obj["amount1"]),
                liquidity=int(obj["liquidity"]),
                sqrt_price_x96=int(obj["sqrtPriceX96"]),
            ))
    return swaps
