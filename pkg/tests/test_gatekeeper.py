import random
from decimal import Decimal

import pytest
from fastapi.testclient import TestClient

from clmm_lp_impact.counterfactual import INFINITY, run_analysis
from clmm_lp_impact.events import ValidationError, write_jsonl
from clmm_lp_impact.gatekeeper import (
    BurnRequest,
    GateService,
    GateState,
    GateThresholds,
    ServeConfig,
    Verdict,
    build_service,
    create_app,
    evaluate_burn,
    market_depth,
)
from clmm_lp_impact.liquidity import LiquidityProfile
from clmm_lp_impact.synthetic import address, dataset, event, linchpin_fixture

SEVERITY = {Verdict.ALLOW: 0, Verdict.SUSPEND: 1, Verdict.DENY: 2}
WHALE = address(1)
WHALE_L = 10**20


@pytest.fixture(scope="module")
def state():
    return GateState(linchpin_fixture())


def burn(liq, lo=-600, hi=600, owner=WHALE, **kw):
    return BurnRequest(owner, lo, hi, liq, **kw)


def test_dust_burn_allowed(state):
    d = evaluate_burn(burn(WHALE_L // 10_000), state)
    assert d.verdict == Verdict.ALLOW
    assert 0 < d.projected_degradation < Decimal("0.005")
    assert d.depth_after < d.depth_before


def test_full_linchpin_burn_denied(state):
    d = evaluate_burn(burn(WHALE_L), state)
    assert d.verdict == Verdict.DENY
    assert d.projected_degradation > Decimal("0.05")
    assert d.reason == "degradation above deny threshold"


def test_over_request_denied(state):
    d = evaluate_burn(burn(WHALE_L + 1), state)
    assert (d.verdict, d.reason) == (Verdict.DENY, "insufficient position")
    d = evaluate_burn(burn(1, -700, 600), state)
    assert d.reason == "insufficient position"
    assert evaluate_burn(burn(1, owner=address(0xDEAD)), state).reason == "insufficient position"


def test_suspend_band(state):
    # pick a size whose degradation lands between the thresholds
    lo, hi = 1, WHALE_L
    for _ in range(80):
        mid = (lo + hi) // 2
        deg = evaluate_burn(burn(mid), state).projected_degradation
        if deg < Decimal("0.02"):
            lo = mid
        else:
            hi = mid
    d = evaluate_burn(burn(hi), state)
    assert d.verdict == Verdict.SUSPEND
    assert d.reason == "degradation within review band"


def test_min_depth_denies(state):
    floor = evaluate_burn(burn(1), state).depth_before
    d = evaluate_burn(burn(WHALE_L // 10_000), state, GateThresholds(min_depth=floor))
    assert (d.verdict, d.reason) == (Verdict.DENY, "depth below minimum")


def test_oracle_degraded_suspends():
    # one LP with no computable swap: a huge tick-capacity-exceeding grid
    st = GateState(dataset([event("Mint", 1, -10, 10, 1000, 1)]), grid=("2", "2", "1"))
    assert st.pi_baseline is None
    d = evaluate_burn(burn(10, -10, 10), st)
    assert (d.verdict, d.reason) == (Verdict.SUSPEND, "oracle degraded")


def test_exhausting_a_tick_is_infinite(state):
    small = GateState(dataset([
        event("Mint", 1, -100, 100, 10**18, 1),
        event("Mint", 2, -100, 0, 10**18, 2),
    ]))
    d = evaluate_burn(burn(10**18, -100, 100, address(1)), small)
    assert d.projected_degradation == INFINITY and d.verdict == Verdict.DENY


def test_market_depth():
    p = LiquidityProfile((-50, 0, 50), (10, 4, 0))
    assert market_depth(p, 0, 10) == 4
    assert market_depth(p, -20, 10) == 10
    assert market_depth(p, 0, 100) == 0


def test_evaluation_is_read_only_and_idempotent(state):
    before = (state.dataset_hash, state.baseline, state.pi_baseline)
    a = evaluate_burn(burn(WHALE_L // 3), state)
    b = evaluate_burn(burn(WHALE_L // 3), state)
    assert a == b
    assert (state.dataset_hash, state.baseline, state.pi_baseline) == before


@pytest.mark.parametrize("seed", range(5))
def test_monotone_severity(state, seed):
    rng = random.Random(seed)
    for _ in range(10):
        lo = rng.randrange(-600, 590, 10)
        hi = rng.randrange(lo + 10, 601, 10)
        a, b = sorted((rng.randint(1, WHALE_L), rng.randint(1, WHALE_L)))
        da, db = evaluate_burn(burn(a, lo, hi), state), evaluate_burn(burn(b, lo, hi), state)
        assert da.projected_degradation <= db.projected_degradation
        assert SEVERITY[da.verdict] <= SEVERITY[db.verdict]


def test_request_validation():
    with pytest.raises(ValidationError):
        BurnRequest(WHALE, 10, 10, 1)
    with pytest.raises(ValidationError):
        BurnRequest(WHALE, 0, 10, 0)
    with pytest.raises(ValidationError):
        BurnRequest.from_json({"owner": WHALE, "tick_lower": 0, "tick_upper": 10})
    with pytest.raises(ValidationError):
        BurnRequest.from_json({"owner": WHALE, "tick_lower": 0, "tick_upper": 10, "liquidity": 1.5})
    r = BurnRequest.from_json({"owner": WHALE.upper().replace("0X", "0x"), "tick_lower": "-10",
                               "tick_upper": 10, "liquidity": "5", "request_id": "r1"})
    assert (r.owner, r.tick_lower, r.liquidity, r.request_id) == (WHALE, -10, 5, "r1")


def test_threshold_validation():
    with pytest.raises(ValueError):
        GateThresholds(allow="0.1", deny="0.05")
    with pytest.raises(ValueError):
        GateThresholds(depth_window=-1)


# -- HTTP


@pytest.fixture()
def client(state):
    reports = run_analysis(linchpin_fixture(), k=5).reports
    st = GateState(state.dataset, reports=reports)
    service = GateService(st, loader=lambda: GateState(linchpin_fixture()))
    return TestClient(create_app(service))


def body(liq, **kw):
    return {"owner": WHALE, "tick_lower": -600, "tick_upper": 600, "liquidity": str(liq), **kw}


def test_http_evaluate(client):
    r = client.post("/v1/evaluate-burn", json=body(WHALE_L // 10_000, request_id="abc"))
    assert r.status_code == 200
    out = r.json()
    assert out["verdict"] == "Allow" and out["request_id"] == "abc"
    assert set(out) == {"request_id", "verdict", "projected_degradation", "depth_before", "depth_after", "reason"}
    assert client.post("/v1/evaluate-burn", json=body(WHALE_L)).json()["verdict"] == "Deny"


def test_http_errors(client):
    r = client.post("/v1/evaluate-burn", content=b"{not json")
    assert r.status_code == 400 and r.json()["code"] == "malformed_json"
    r = client.post("/v1/evaluate-burn", json={"owner": WHALE})
    assert r.status_code == 400 and r.json()["code"] == "invalid_request"
    r = client.post("/v1/evaluate-burn", json=[1, 2])
    assert r.status_code == 400


def test_http_health_hash_stable(client):
    h = client.get("/v1/health").json()
    assert h["dataset_hash"] == linchpin_fixture().content_hash()
    for i in range(20):
        client.post("/v1/evaluate-burn", json=body(1 + i * 10**18))
    assert client.get("/v1/health").json() == h


def test_http_threshold_hot_reload(client):
    liq = WHALE_L // 10_000
    assert client.post("/v1/evaluate-burn", json=body(liq)).json()["verdict"] == "Allow"
    r = client.put("/v1/thresholds", json={"allow": "0", "deny": "0"})
    assert r.status_code == 200 and r.json()["allow"] == "0"
    assert client.post("/v1/evaluate-burn", json=body(liq)).json()["verdict"] == "Deny"
    assert client.put("/v1/thresholds", json={"bogus": 1}).status_code == 400
    assert client.put("/v1/thresholds", json={"allow": "1", "deny": "0.5"}).status_code == 400
    assert client.get("/v1/health").json()["thresholds"]["deny"] == "0"


def test_http_rankings(client):
    r = client.get("/v1/rankings", params={"limit": 2}).json()["reports"]
    assert len(r) == 2 and r[0]["owner"] == WHALE
    assert client.get("/v1/rankings", params={"limit": -1}).status_code == 400


def test_http_reload(client):
    r = client.post("/v1/reload")
    assert r.status_code == 200
    assert r.json()["dataset_hash"] == linchpin_fixture().content_hash()
    assert client.get("/v1/rankings").json()["reports"] == []


def test_build_service_from_files(tmp_path):
    write_jsonl(linchpin_fixture(), tmp_path / "events.jsonl")
    svc = build_service(ServeConfig(str(tmp_path / "events.jsonl"), pool_address=linchpin_fixture().pool_address))
    assert svc.state.dataset_hash == linchpin_fixture().content_hash()
    assert svc.evaluate(burn(WHALE_L)).verdict == Verdict.DENY
