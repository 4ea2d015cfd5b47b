"""
Tick math and single-tick price impact
======================================

Prices live on a geometric grid, P(i) = 1.0001^i, and pools store the
square root of the price as a Q64.96 integer. This walk-through converts
between the two and then pushes a few swaps through one tick.
"""

# %%
from decimal import Decimal

from clmm_lp_impact.swap_math import (
    Q96, SyntheticSwap, price_impact, sqrtp_to_sqrtx96, sqrtx96_to_sqrtp, swap_volume_dx, swap_volume_dy,
    tick_to_price, TickCapacityError,
)

# one tick is one basis point
print("P(1)    =", tick_to_price(1))
# about 6932 ticks double the price
print("P(6932) =", f"{tick_to_price(6932):.12f}")

# %%
# sqrtPriceX96 is just sqrt(P) scaled by 2^96
raw = 2**97
print("sqrt price of 2^97:", sqrtx96_to_sqrtp(raw))
print("back again:", sqrtp_to_sqrtx96(Decimal(2)) == raw)

# %%
# Token amounts that move the price between two sqrt prices
print("dy for L=1000, 1 -> 1.1:", swap_volume_dy(1000, 1, Decimal("1.1")))
print("dx for L=1000, 1 -> 1.1:", f"{swap_volume_dx(1000, 1, Decimal('1.1')):.6f}")

# %%
# Impact of selling 100 token1 into L=1000 at sqrt price 2: the sqrt price
# drops to 1.9 and the squared price falls by 9.75%.
sell1 = SyntheticSwap(0, Decimal(0), Decimal(100), 1000, 2 * Q96)
print("token1 in:", price_impact(sell1, 1000).percent, "%")

# Selling token0 uses P_f = L*P/(L - dX*P); the sign comes out negative,
# which is why averages run over magnitudes.
sell0 = SyntheticSwap(0, Decimal(100), Decimal(0), 1000, Q96)
print("token0 in:", f"{price_impact(sell0, 1000).percent:.6f}", "%")
print("canonical:", f"{price_impact(sell0, 1000, canonical=True).percent:.6f}", "%")

# %%
# Doubling liquidity shrinks the impact; a swap bigger than the tick can
# absorb is simply not computable.
for L in (1000, 2000, 4000):
    print(L, f"{price_impact(sell1, L).magnitude:.4f}")
try:
    price_impact(SyntheticSwap(0, Decimal(0), Decimal(5000), 1000, 2 * Q96), 1000)
except TickCapacityError as exc:
    print("skipped:", exc)
