"""Mint/Burn event ingestion for a single concentrated-liquidity pool.

Events come either from a JSONL fixture file or from a remote node via the
:class:`EventSource` protocol. Every path produces an immutable
:class:`EventDataset`, sorted by ``(block_number, log_index)``.
"""

from __future__ import annotations

import enum
import hashlib
import json
import logging
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Protocol

logger = logging.getLogger(__name__)

MIN_TICK = -887272
MAX_TICK = 887272

MINT_TOPIC = "0x7a53080ba414158be7ec69b987b5fb7d07dee101fe85488f0853ae16239d0bde"
BURN_TOPIC = "0x0c396cd989a39f4459b5fa1aed6a9a8dcdbc45908acfd67e028cd568da98982c"

JSONL_KEYS = (
    "type", "owner", "sender", "tickLower", "tickUpper", "liquidity",
    "amount0", "amount1", "blockNumber", "logIndex", "txHash",
)

_ADDRESS_RE = re.compile(r"^0x[0-9a-f]{40}$")
_HASH_RE = re.compile(r"^0x[0-9a-f]{64}$")
_MAX_SAFE_JSON_INT = 2**53 - 1


class IngestError(Exception):
    pass


class ValidationError(IngestError):
    pass


class EmptyDatasetError(IngestError):
    def __init__(self, message: str = "empty dataset"):
        super().__init__(message)


class FetchError(IngestError):
    """Remote source kept failing after the retry budget was spent."""


class TransportError(Exception):
    """Raised by an :class:`EventSource` for retryable transport failures."""


class NotFoundError(KeyError):
    pass


class EventType(str, enum.Enum):
    MINT = "Mint"
    BURN = "Burn"


def normalize_address(value: str) -> str:
    if not isinstance(value, str):
        raise ValidationError(f"address must be a string, got {type(value).__name__}")
    addr = value.strip().lower()
    if not _ADDRESS_RE.match(addr):
        raise ValidationError(f"malformed address {value!r}")
    return addr


def _normalize_hash(value: str) -> str:
    if not isinstance(value, str):
        raise ValidationError("tx hash must be a string")
    h = value.strip().lower()
    if not _HASH_RE.match(h):
        raise ValidationError(f"malformed tx hash {value!r}")
    return h


def _as_int(value: Any, name: str) -> int:
    # bool is an int subclass; floats would silently lose precision
    if isinstance(value, bool) or isinstance(value, float):
        raise ValidationError(f"{name}: expected integer, got {value!r}")
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        text = value.strip()
        try:
            return int(text, 16) if text.lower().startswith(("0x", "-0x")) else int(text, 10)
        except ValueError:
            raise ValidationError(f"{name}: not an integer string {value!r}") from None
    raise ValidationError(f"{name}: expected integer, got {type(value).__name__}")


@dataclass(frozen=True, slots=True)
class PoolEvent:
    event_type: EventType
    owner: str
    sender: str
    tick_lower: int
    tick_upper: int
    liquidity: int
    amount0: int
    amount1: int
    block_number: int
    log_index: int
    tx_hash: str

    def __post_init__(self):
        if not isinstance(self.event_type, EventType):
            object.__setattr__(self, "event_type", EventType(self.event_type))
        object.__setattr__(self, "owner", normalize_address(self.owner))
        object.__setattr__(self, "sender", normalize_address(self.sender))
        object.__setattr__(self, "tx_hash", _normalize_hash(self.tx_hash))
        if not self.tick_lower < self.tick_upper:
            raise ValidationError(f"tick_lower {self.tick_lower} must be < tick_upper {self.tick_upper}")
        if self.tick_lower < MIN_TICK or self.tick_upper > MAX_TICK:
            raise ValidationError("tick range outside global bounds")
        if not 0 < self.liquidity < 2**128:
            raise ValidationError(f"liquidity {self.liquidity} outside (0, 2^128)")
        for name in ("amount0", "amount1"):
            if not 0 <= getattr(self, name) < 2**256:
                raise ValidationError(f"{name} outside uint256")
        if not 0 <= self.block_number < 2**64:
            raise ValidationError("block_number outside uint64")
        if not 0 <= self.log_index < 2**32:
            raise ValidationError("log_index outside uint32")

    @property
    def key(self) -> tuple[int, int]:
        return (self.block_number, self.log_index)

    @property
    def signed_liquidity(self) -> int:
        """+liquidity for a Mint, -liquidity for a Burn."""
        return self.liquidity if self.event_type is EventType.MINT else -self.liquidity

    def to_json(self) -> dict:
        """JSONL record; integers that exceed 2^53-1 are written as decimal strings."""

        def num(v: int):
            return v if abs(v) <= _MAX_SAFE_JSON_INT else str(v)

        return {
            "type": self.event_type.value,
            "owner": self.owner,
            "sender": self.sender,
            "tickLower": self.tick_lower,
            "tickUpper": self.tick_upper,
            "liquidity": num(self.liquidity),
            "amount0": num(self.amount0),
            "amount1": num(self.amount1),
            "blockNumber": num(self.block_number),
            "logIndex": self.log_index,
            "txHash": self.tx_hash,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PoolEvent":
        if not isinstance(obj, dict):
            raise ValidationError("record is not a JSON object")
        missing = [k for k in JSONL_KEYS if k not in obj]
        if missing:
            raise ValidationError(f"missing keys: {', '.join(missing)}")
        extra = sorted(set(obj) - set(JSONL_KEYS))
        if extra:
            raise ValidationError(f"unexpected keys: {', '.join(extra)}")
        try:
            event_type = EventType(obj["type"])
        except ValueError:
            raise ValidationError(f"unknown event type {obj['type']!r}") from None
        return cls(
            event_type=event_type,
            owner=obj["owner"],
            sender=obj["sender"],
            tick_lower=_as_int(obj["tickLower"], "tickLower"),
            tick_upper=_as_int(obj["tickUpper"], "tickUpper"),
            liquidity=_as_int(obj["liquidity"], "liquidity"),
            amount0=_as_int(obj["amount0"], "amount0"),
            amount1=_as_int(obj["amount1"], "amount1"),
            block_number=_as_int(obj["blockNumber"], "blockNumber"),
            log_index=_as_int(obj["logIndex"], "logIndex"),
            tx_hash=obj["txHash"],
        )


@dataclass(frozen=True)
class EventDataset:
    pool_address: str
    events: tuple[PoolEvent, ...]
    min_block: int
    max_block: int
    skipped: int = field(default=0, compare=False)

    @classmethod
    def from_events(cls, pool_address: str, events: Iterable[PoolEvent], skipped: int = 0) -> "EventDataset":
        """Sort, de-duplicate and validate ``events``.

        Identical events sharing a ``(block, logIndex)`` key are collapsed
        (each extra copy counts as skipped); conflicting ones raise.
        """
        by_key: dict[tuple[int, int], PoolEvent] = {}
        for ev in events:
            prev = by_key.get(ev.key)
            if prev is None:
                by_key[ev.key] = ev
            elif prev == ev:
                skipped += 1
            else:
                raise ValidationError(f"conflicting events at block {ev.block_number} log {ev.log_index}")
        if not by_key:
            raise EmptyDatasetError()
        ordered = tuple(by_key[k] for k in sorted(by_key))
        return cls(
            pool_address=normalize_address(pool_address),
            events=ordered,
            min_block=ordered[0].block_number,
            max_block=max(ev.block_number for ev in ordered),
            skipped=skipped,
        )

    def __len__(self) -> int:
        return len(self.events)

    @property
    def owners(self) -> list[str]:
        return sorted({ev.owner for ev in self.events})

    def to_json(self) -> dict:
        return {
            "poolAddress": self.pool_address,
            "minBlock": str(self.min_block),
            "maxBlock": str(self.max_block),
            # every integer is a string here so 256-bit values never narrow
            "events": [
                {k: (str(v) if isinstance(v, int) else v) for k, v in ev.to_json().items()}
                for ev in self.events
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "EventDataset":
        events = [PoolEvent.from_json(e) for e in obj["events"]]
        ds = cls.from_events(obj["poolAddress"], events)
        if (str(ds.min_block), str(ds.max_block)) != (str(obj["minBlock"]), str(obj["maxBlock"])):
            raise ValidationError("stored block range does not match events")
        return ds

    def content_hash(self) -> str:
        """sha256 over the canonical JSON form; stable across runs and platforms."""
        blob = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


# -- JSONL fixtures ---------------------------------------------------------


def ingest_jsonl(path, pool_address: str, strict: bool = False) -> EventDataset:
    """Load a JSONL event file.

    Lenient mode skips malformed and zero-liquidity lines and reports the
    count in ``dataset.skipped``; strict mode raises on the first bad line.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc

    events = []
    skipped = 0
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            if isinstance(obj, dict) and _is_zero_liquidity(obj):
                skipped += 1
                continue
            events.append(PoolEvent.from_json(obj))
        except (json.JSONDecodeError, ValidationError) as exc:
            if strict:
                raise ValidationError(f"{path}:{lineno}: {exc}") from exc
            logger.debug("skipping %s:%d: %s", path, lineno, exc)
            skipped += 1
    if skipped:
        logger.warning("%s: skipped %d line(s)", path, skipped)
    return EventDataset.from_events(pool_address, events, skipped=skipped)


def _is_zero_liquidity(obj: dict) -> bool:
    try:
        return _as_int(obj.get("liquidity"), "liquidity") == 0
    except ValidationError:
        return False


def write_jsonl(dataset: EventDataset, path) -> None:
    with open(path, "w") as fh:
        for ev in dataset.events:
            fh.write(json.dumps(ev.to_json(), separators=(",", ":")) + "\n")


# -- remote node ------------------------------------------------------------


class EventSource(Protocol):
    """What :func:`fetch_and_preprocess` needs from a node.

    Responses mirror standard ``eth_getLogs`` / ``eth_getTransactionByHash``
    results. Implementations raise :class:`TransportError` for failures worth
    retrying.
    """

    def get_logs(self, address: str, topic: str, from_block: int, to_block: int) -> list[dict]: ...

    def get_transaction(self, tx_hash: str) -> dict: ...


class JsonRpcEventSource:
    """EventSource over an Ethereum JSON-RPC endpoint."""

    def __init__(self, url: str, timeout: float = 30.0, client=None):
        import httpx

        self.url = url
        self._client = client or httpx.Client(timeout=timeout)
        self._id = 0

    def _call(self, method: str, params: list):
        import httpx

        self._id += 1
        try:
            resp = self._client.post(self.url, json={"jsonrpc": "2.0", "id": self._id, "method": method, "params": params})
            resp.raise_for_status()
            body = resp.json()
        except (httpx.HTTPError, ValueError) as exc:
            raise TransportError(str(exc)) from exc
        if "error" in body:
            raise TransportError(f"{method}: {body['error']}")
        return body["result"]

    def get_logs(self, address, topic, from_block, to_block):
        return self._call("eth_getLogs", [{
            "address": address,
            "topics": [topic],
            "fromBlock": hex(from_block),
            "toBlock": hex(to_block),
        }])

    def get_transaction(self, tx_hash):
        return self._call("eth_getTransactionByHash", [tx_hash])


def _word(data: str, i: int) -> int:
    return int(data[2 + 64 * i: 2 + 64 * (i + 1)], 16)


def _topic_int24(topic: str) -> int:
    v = int(topic, 16)
    return v - (1 << 256) if v >= 1 << 255 else v


def _topic_address(topic: str) -> str:
    return "0x" + topic[-40:].lower()


def decode_log(log: dict, event_type: EventType, tx_sender: str) -> PoolEvent:
    """Decode a raw Uniswap V3 Mint or Burn log.

    Mint: ``owner``, ``tickLower``, ``tickUpper`` indexed; data =
    ``sender, amount, amount0, amount1``. Burn: ``owner`` (the caller),
    ``tickLower``, ``tickUpper`` indexed; data = ``amount, amount0, amount1``.
    A Burn is attributed to the transaction sender.
    """
    topics = log["topics"]
    data = log["data"]
    tick_lower = _topic_int24(topics[2])
    tick_upper = _topic_int24(topics[3])
    if event_type is EventType.MINT:
        owner = _topic_address(topics[1])
        sender = "0x" + data[2 + 24: 2 + 64].lower()
        amount, amount0, amount1 = _word(data, 1), _word(data, 2), _word(data, 3)
    else:
        owner = tx_sender
        sender = _topic_address(topics[1])
        amount, amount0, amount1 = _word(data, 0), _word(data, 1), _word(data, 2)
    return PoolEvent(
        event_type=event_type,
        owner=owner,
        sender=sender,
        tick_lower=tick_lower,
        tick_upper=tick_upper,
        liquidity=amount,
        amount0=amount0,
        amount1=amount1,
        block_number=_as_int(log["blockNumber"], "blockNumber"),
        log_index=_as_int(log["logIndex"], "logIndex"),
        tx_hash=log["transactionHash"],
    )


def _with_retries(fn, *args, retries: int, backoff: float):
    for attempt in range(retries + 1):
        try:
            return fn(*args)
        except TransportError as exc:
            if attempt == retries:
                raise FetchError(f"{getattr(fn, '__name__', fn)} failed after {retries + 1} attempts: {exc}") from exc
            time.sleep(backoff * 2**attempt)


def fetch_and_preprocess(
    fetcher: EventSource,
    pool_address: str,
    start_block: int,
    end_block: int,
    *,
    chunk_size: int | None = None,
    max_workers: int = 1,
    retries: int = 3,
    backoff: float = 0.5,
) -> EventDataset:
    """Fetch Mint and Burn logs in ``[start_block, end_block]``.

    Each log is enriched with its transaction's sender, decoded, and the
    merged list sorted by ``(block_number, log_index)``. Zero-liquidity
    events (fee collections) are dropped.
    """
    if start_block > end_block:
        raise ValueError(f"block range inverted: {start_block} > {end_block}")
    pool_address = normalize_address(pool_address)
    step = chunk_size or (end_block - start_block + 1)
    ranges = [(lo, min(lo + step - 1, end_block)) for lo in range(start_block, end_block + 1, step)]

    def fetch_range(topic, rng):
        return _with_retries(fetcher.get_logs, pool_address, topic, rng[0], rng[1], retries=retries, backoff=backoff)

    raw: list[tuple[EventType, dict]] = []
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        for event_type, topic in ((EventType.MINT, MINT_TOPIC), (EventType.BURN, BURN_TOPIC)):
            for logs in pool.map(lambda r: fetch_range(topic, r), ranges):
                raw.extend((event_type, log) for log in logs if not log.get("removed", False))

    senders: dict[str, str] = {}
    for _, log in raw:
        tx_hash = log["transactionHash"].lower()
        if tx_hash not in senders:
            tx = _with_retries(fetcher.get_transaction, tx_hash, retries=retries, backoff=backoff)
            senders[tx_hash] = normalize_address(tx["from"])

    events = []
    dropped = 0
    for event_type, log in raw:
        ev_sender = senders[log["transactionHash"].lower()]
        amount = _word(log["data"], 1 if event_type is EventType.MINT else 0)
        if amount == 0:
            dropped += 1
            continue
        events.append(decode_log(log, event_type, ev_sender))
    return EventDataset.from_events(pool_address, events, skipped=dropped)


# -- persistence ------------------------------------------------------------


class KeyValueStore(Protocol):
    def put(self, key: str, value: bytes) -> None: ...

    def get(self, key: str) -> bytes: ...


class MemoryStore:
    def __init__(self):
        self._data: dict[str, bytes] = {}

    def put(self, key, value):
        self._data[key] = bytes(value)

    def get(self, key):
        try:
            return self._data[key]
        except KeyError:
            raise NotFoundError(key) from None


class DirectoryStore:
    """One ``<key>.json`` file per key under ``root``."""

    def __init__(self, root):
        self.root = Path(root)

    def _path(self, key: str) -> Path:
        if not re.match(r"^[A-Za-z0-9_.-]+$", key):
            raise ValueError(f"invalid store key {key!r}")
        return self.root / f"{key}.json"

    def put(self, key, value):
        self.root.mkdir(parents=True, exist_ok=True)
        path = self._path(key)
        tmp = path.with_suffix(".tmp")
        tmp.write_bytes(value)
        tmp.replace(path)

    def get(self, key):
        path = self._path(key)
        try:
            return path.read_bytes()
        except FileNotFoundError:
            raise NotFoundError(key) from None


def persist(dataset: EventDataset, store: KeyValueStore, key: str | None = None) -> str:
    key = key or dataset.pool_address
    store.put(key, json.dumps(dataset.to_json(), sort_keys=True).encode())
    return key


def load(store: KeyValueStore, key: str) -> EventDataset:
    return EventDataset.from_json(json.loads(store.get(key)))


def load_dataset(path, pool_address: str | None = None, strict: bool = False) -> EventDataset:
    """Open a JSONL fixture, a persisted dataset JSON file, or a store directory."""
    path = Path(path)
    if path.is_dir():
        return load(DirectoryStore(path), "dataset")
    if path.suffix == ".jsonl":
        return ingest_jsonl(path, pool_address or "0x" + "0" * 40, strict=strict)
    try:
        return EventDataset.from_json(json.loads(path.read_text()))
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc
