"""
Rebuilding pool liquidity from Mint/Burn events
===============================================

Each position adds liquidity at its lower tick and removes it at its
upper tick. A prefix sum over those deltas gives the active liquidity
at every tick, and dropping one owner's events gives the counterfactual.
"""

# %%
from clmm_lp_impact.liquidity import active_liquidity_at, build_liquidity_profile, liquidity_net
from clmm_lp_impact.synthetic import address, dataset, event

alice, bob = address(0xA11CE), address(0xB0B)
ds = dataset([
    event("Mint", alice, -100, 100, 5_000, 1),
    event("Mint", bob, 0, 200, 2_000, 2),
    event("Burn", alice, -100, 100, 1_000, 3),
])

print("liquidityNet:", liquidity_net(ds))
profile = build_liquidity_profile(ds)
for t, c in zip(profile.ticks, profile.cumulative_liquidity):
    print(f"  from tick {t:>4}: {c}")

# %%
# Looking up a tick finds the last breakpoint at or below it.
for tick in (-150, -100, 50, 150, 250):
    print(tick, active_liquidity_at(profile, tick))

# %%
# What would the pool look like if Bob had never shown up?
without_bob = build_liquidity_profile(ds, excluded_lp=bob)
for tick in (-50, 50, 150):
    print(tick, active_liquidity_at(profile, tick), "->", active_liquidity_at(without_bob, tick))
