"""
Vetting burns before they land
==============================

The gatekeeper removes the requested liquidity from the baseline profile,
replays the swap set and compares mean impact. Small dents pass, a band
in the middle goes to review and big ones are refused.
"""

# %%
from clmm_lp_impact.gatekeeper import BurnRequest, GateState, GateThresholds, evaluate_burn
from clmm_lp_impact.synthetic import address, linchpin_fixture

state = GateState(linchpin_fixture())
whale = address(1)
position = 10**20

for share in (0.0001, 0.01, 0.1, 0.5, 1.0):
    d = evaluate_burn(BurnRequest(whale, -600, 600, int(position * share)), state)
    print(f"burn {share:>7.2%}: {d.verdict.value:<8} degradation {d.projected_degradation:.4g}  {d.reason}")

# %%
# Asking for more than the owner holds is refused outright.
print(evaluate_burn(BurnRequest(whale, -600, 600, position + 1), state).reason)

# %%
# Thresholds are plain settings; a stricter gate sends the 1% burn to review.
strict = GateThresholds(allow="0.0001", deny="0.05")
print(evaluate_burn(BurnRequest(whale, -600, 600, position // 100), state, strict).verdict.value)
