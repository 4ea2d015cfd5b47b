"""Protective oracle: vet proposed burns before they reach the pool.

A burn request is scored by replaying the fixed swap set against the
baseline profile with the request's liquidity removed on its range. The
relative rise in mean impact (projected degradation) and the market depth
around the current tick decide the verdict:

* ``Allow``   degradation <= allow threshold and depth after >= min depth
* ``Suspend`` allow threshold < degradation <= deny threshold
* ``Deny``    anything else
"""

from __future__ import annotations

import enum
import json
import logging
import threading
from dataclasses import asdict, dataclass, replace
from decimal import Decimal, localcontext

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .counterfactual import INFINITY, ImpactEvaluator, LsisReport, lsis_score, report_to_row
from .events import EventDataset, ValidationError, load_dataset, normalize_address
from .liquidity import LiquidityProfile, active_liquidity_at, build_liquidity_profile, subtract_range
from .numeric import CONTEXT, fmt, to_decimal
from .swap_math import DEFAULT_GRID, generate_synthetic_swaps

logger = logging.getLogger(__name__)


class Verdict(str, enum.Enum):
    ALLOW = "Allow"
    DENY = "Deny"
    SUSPEND = "Suspend"


@dataclass(frozen=True)
class BurnRequest:
    owner: str
    tick_lower: int
    tick_upper: int
    liquidity: int
    request_id: str = ""
    volatility: Decimal | None = None  # reserved; not used in the decision

    def __post_init__(self):
        object.__setattr__(self, "owner", normalize_address(self.owner))
        if not self.tick_lower < self.tick_upper:
            raise ValidationError("tick_lower must be < tick_upper")
        if self.liquidity <= 0:
            raise ValidationError("liquidity must be positive")

    @classmethod
    def from_json(cls, obj: dict) -> "BurnRequest":
        if not isinstance(obj, dict):
            raise ValidationError("body must be a JSON object")
        try:
            vol = obj.get("volatility")
            return cls(
                owner=obj["owner"],
                tick_lower=_strict_int(obj["tick_lower"]),
                tick_upper=_strict_int(obj["tick_upper"]),
                liquidity=_strict_int(obj["liquidity"]),
                request_id=str(obj.get("request_id", "")),
                volatility=None if vol is None else Decimal(str(vol)),
            )
        except KeyError as exc:
            raise ValidationError(f"missing field {exc.args[0]}") from None


def _strict_int(v) -> int:
    if isinstance(v, bool) or not isinstance(v, (int, str)):
        raise ValidationError(f"expected integer or decimal string, got {v!r}")
    try:
        return int(v)
    except ValueError:
        raise ValidationError(f"not an integer: {v!r}") from None


@dataclass(frozen=True)
class GateDecision:
    verdict: Verdict
    projected_degradation: Decimal
    depth_before: int
    depth_after: int
    reason: str
    request_id: str = ""

    def to_json(self) -> dict:
        return {
            "request_id": self.request_id,
            "verdict": self.verdict.value,
            "projected_degradation": fmt(self.projected_degradation),
            "depth_before": str(self.depth_before),
            "depth_after": str(self.depth_after),
            "reason": self.reason,
        }


@dataclass(frozen=True)
class GateThresholds:
    allow: Decimal = Decimal("0.005")
    deny: Decimal = Decimal("0.05")
    min_depth: int = 0
    depth_window: int = 100
    current_tick: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "allow", to_decimal(self.allow))
        object.__setattr__(self, "deny", to_decimal(self.deny))
        if not 0 <= self.allow <= self.deny:
            raise ValueError("need 0 <= allow <= deny")
        if self.depth_window < 0 or self.min_depth < 0:
            raise ValueError("depth_window and min_depth must be non-negative")

    def to_json(self) -> dict:
        return {k: (str(v) if isinstance(v, Decimal) else v) for k, v in asdict(self).items()}


class GateState:
    """Immutable snapshot: dataset, baseline profile and the fixed swap set."""

    def __init__(self, dataset: EventDataset, grid=DEFAULT_GRID, seed: int = 42, reports: list[LsisReport] | None = None):
        self.dataset = dataset
        self.dataset_hash = dataset.content_hash()
        self.baseline = build_liquidity_profile(dataset)
        self.swaps = generate_synthetic_swaps(self.baseline, *grid, rng_seed=seed) if self.baseline.ticks else []
        self.evaluator = ImpactEvaluator(self.swaps, self.baseline)
        computable = [v for v in self.evaluator.base_impacts if v is not None]
        if computable:
            with localcontext(CONTEXT):
                self.pi_baseline: Decimal | None = sum(computable, Decimal(0)) / len(computable)
        else:
            self.pi_baseline = None
        self.reports = list(reports or [])
        self._owner_profiles: dict[str, LiquidityProfile] = {}
        self._lock = threading.Lock()
        # densest tick stands in for the current price; no Swap events are ingested
        pairs = list(zip(self.baseline.cumulative_liquidity, self.baseline.ticks))
        self.default_tick = max(pairs, key=lambda p: (p[0], -p[1]))[1] if pairs else 0

    def owner_profile(self, owner: str) -> LiquidityProfile:
        with self._lock:
            prof = self._owner_profiles.get(owner)
            if prof is None:
                prof = build_liquidity_profile(ev for ev in self.dataset.events if ev.owner == owner)
                self._owner_profiles[owner] = prof
            return prof


def _breakpoints(profile: LiquidityProfile, lo: int, hi: int, include_hi: bool) -> list[int]:
    pts = [lo] + [t for t in profile.ticks if lo < t < hi or (include_hi and t == hi)]
    return pts


def market_depth(profile: LiquidityProfile, center: int, window: int) -> int:
    """Minimum active liquidity over ``[center - window, center + window]``."""
    return min(active_liquidity_at(profile, t) for t in _breakpoints(profile, center - window, center + window, True))


def holds_position(state: GateState, request: BurnRequest) -> bool:
    prof = state.owner_profile(request.owner)
    pts = _breakpoints(prof, request.tick_lower, request.tick_upper, False)
    return all(active_liquidity_at(prof, t) >= request.liquidity for t in pts)


def projected_degradation(state: GateState, profile: LiquidityProfile) -> Decimal:
    """Relative rise in mean impact under ``profile``.

    A swap that is computable at baseline but not under ``profile`` means
    the burn would exhaust a tick; that counts as infinite degradation.
    """
    other = state.evaluator.impacts_under(profile)
    total_b = total_x = Decimal(0)
    count = 0
    with localcontext(CONTEXT):
        for b, x in zip(state.evaluator.base_impacts, other):
            if b is None:
                continue
            if x is None:
                return INFINITY
            total_b += b
            total_x += x
            count += 1
        if count == 0:
            return INFINITY
        return lsis_score(total_b / count, total_x / count)


def evaluate_burn(request: BurnRequest, state: GateState, thresholds: GateThresholds | None = None) -> GateDecision:
    """Decide on ``request`` against ``state``; never mutates the state."""
    thresholds = thresholds or GateThresholds()
    center = state.default_tick if thresholds.current_tick is None else thresholds.current_tick
    depth_before = market_depth(state.baseline, center, thresholds.depth_window)

    def decide(verdict, degradation, depth_after, reason):
        return GateDecision(verdict, degradation, depth_before, depth_after, reason, request.request_id)

    if not holds_position(state, request):
        return decide(Verdict.DENY, Decimal(0), depth_before, "insufficient position")
    if state.pi_baseline is None:
        return decide(Verdict.SUSPEND, Decimal(0), depth_before, "oracle degraded")

    hypothetical = subtract_range(state.baseline, request.tick_lower, request.tick_upper, request.liquidity)
    degradation = projected_degradation(state, hypothetical)
    depth_after = market_depth(hypothetical, center, thresholds.depth_window)

    if degradation <= thresholds.allow:
        if depth_after >= thresholds.min_depth:
            return decide(Verdict.ALLOW, degradation, depth_after, "within stability criteria")
        return decide(Verdict.DENY, degradation, depth_after, "depth below minimum")
    if degradation <= thresholds.deny:
        return decide(Verdict.SUSPEND, degradation, depth_after, "degradation within review band")
    return decide(Verdict.DENY, degradation, depth_after, "degradation above deny threshold")


# -- HTTP service -----------------------------------------------------------


class GateService:
    """Holds the current snapshot and thresholds; both swap atomically."""

    def __init__(self, state: GateState, thresholds: GateThresholds | None = None, loader=None):
        self._state = state
        self._thresholds = thresholds or GateThresholds()
        self._loader = loader
        self._lock = threading.Lock()

    @property
    def state(self) -> GateState:
        return self._state

    @property
    def thresholds(self) -> GateThresholds:
        return self._thresholds

    def evaluate(self, request: BurnRequest) -> GateDecision:
        # capture both under the lock so a reload mid-request cannot mix snapshots
        with self._lock:
            state, thresholds = self._state, self._thresholds
        return evaluate_burn(request, state, thresholds)

    def update_thresholds(self, changes: dict) -> GateThresholds:
        with self._lock:
            self._thresholds = replace(self._thresholds, **changes)
            return self._thresholds

    def reload(self) -> GateState:
        if self._loader is None:
            raise RuntimeError("service has no dataset loader")
        new_state = self._loader()
        with self._lock:
            self._state = new_state
        return new_state


def _error(status: int, code: str, message: str):
    return JSONResponse(status_code=status, content={"code": code, "message": message})


_THRESHOLD_FIELDS = {"allow": Decimal, "deny": Decimal, "min_depth": int, "depth_window": int, "current_tick": int}


def create_app(service: GateService):
    app = FastAPI(title="LP burn gatekeeper")

    @app.post("/v1/evaluate-burn")
    async def evaluate_route(request: Request):
        try:
            body = json.loads(await request.body())
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            return _error(400, "malformed_json", str(exc))
        try:
            burn = BurnRequest.from_json(body)
        except ValidationError as exc:
            return _error(400, "invalid_request", str(exc))
        return service.evaluate(burn).to_json()

    @app.get("/v1/health")
    def health():
        state = service.state
        return {
            "dataset_hash": state.dataset_hash,
            "baseline_pi": None if state.pi_baseline is None else fmt(state.pi_baseline),
            "swap_count": len(state.swaps),
            "thresholds": service.thresholds.to_json(),
        }

    @app.get("/v1/rankings")
    def rankings(limit: int = 100):
        if limit < 0:
            return _error(400, "invalid_request", "limit must be non-negative")
        return {"reports": [report_to_row(r) for r in service.state.reports[:limit]]}

    @app.put("/v1/thresholds")
    async def thresholds_route(request: Request):
        try:
            body = json.loads(await request.body())
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            return _error(400, "malformed_json", str(exc))
        if not isinstance(body, dict) or set(body) - set(_THRESHOLD_FIELDS):
            return _error(400, "invalid_request", f"allowed fields: {sorted(_THRESHOLD_FIELDS)}")
        try:
            changes = {k: (None if v is None else _THRESHOLD_FIELDS[k](str(v))) for k, v in body.items()}
            return service.update_thresholds(changes).to_json()
        except (ValueError, ArithmeticError) as exc:
            return _error(400, "invalid_request", str(exc))

    @app.post("/v1/reload")
    def reload_route():
        try:
            state = service.reload()
        except Exception as exc:  # surfaced to the caller; old snapshot stays live
            return _error(500, "reload_failed", str(exc))
        return {"dataset_hash": state.dataset_hash}

    return app


@dataclass
class ServeConfig:
    dataset_path: str
    host: str = "127.0.0.1"
    port: int = 8080
    grid: tuple = DEFAULT_GRID
    seed: int = 42
    thresholds: GateThresholds = GateThresholds()
    reports_path: str | None = None
    pool_address: str | None = None


def build_service(config: ServeConfig) -> GateService:
    from .counterfactual import read_reports_csv, read_reports_json

    def loader():
        dataset = load_dataset(config.dataset_path, config.pool_address)
        reports = None
        if config.reports_path:
            read = read_reports_json if config.reports_path.endswith(".json") else read_reports_csv
            reports = read(config.reports_path)
        return GateState(dataset, config.grid, config.seed, reports)

    return GateService(loader(), config.thresholds, loader)


def serve(config: ServeConfig) -> None:
    import uvicorn

    service = build_service(config)
    uvicorn.run(create_app(service), host=config.host, port=config.port, log_level="info")
