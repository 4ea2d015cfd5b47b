"""Deterministic synthetic event histories for tests, demos and benchmarks."""

from __future__ import annotations

import hashlib
import random

from .events import EventDataset, EventType, PoolEvent

DEFAULT_POOL = "0x88e6a0c2ddd26feeb64f039a2c41296fcb3f5640"

def address(n: int) -> str:
    return f"0x{n:040x}"


def event(kind, owner, tick_lower, tick_upper, liquidity, block, log_index=0, *, sender=None,
          amount0=0, amount1=0, tx_hash=None) -> PoolEvent:
    """Terse PoolEvent constructor; ``owner`` may be an int (see :func:`address`)."""
    if isinstance(owner, int):
        owner = address(owner)
    if tx_hash is None:
        seed = f"{kind}:{owner}:{tick_lower}:{tick_upper}:{liquidity}:{block}:{log_index}"
        tx_hash = "0x" + hashlib.sha256(seed.encode()).hexdigest()
    return PoolEvent(
        event_type=EventType(kind),
        owner=owner,
        sender=sender or owner,
        tick_lower=tick_lower,
        tick_upper=tick_upper,
        liquidity=liquidity,
        amount0=amount0,
        amount1=amount1,
        block_number=block,
        log_index=log_index,
        tx_hash=tx_hash,
    )


def dataset(events, pool: str = DEFAULT_POOL) -> EventDataset:
    return EventDataset.from_events(pool, events)


def random_dataset(
    seed: int,
    n_events: int = 200,
    n_owners: int = 20,
    *,
    tick_spacing: int = 10,
    tick_radius: int = 2000,
    max_width: int = 60,
    blocks: int = 100_000,
    burn_prob: float = 0.35,
    max_liquidity: int = 10**18,
    pool: str = DEFAULT_POOL,
) -> EventDataset:
    """Random well-formed history: burns never exceed the position they hit.

    Ticks are multiples of ``tick_spacing`` within ``+-tick_radius``;
    positions span at most ``max_width`` spacings.
    """
    rng = random.Random(seed)
    owners = sorted({f"0x{rng.getrandbits(160):040x}" for _ in range(n_owners)})
    open_positions: dict[str, dict[tuple[int, int], int]] = {o: {} for o in owners}
    block_numbers = sorted(rng.randrange(blocks) for _ in range(n_events))
    n_slots = tick_radius // tick_spacing
    events = []
    for i, block in enumerate(block_numbers):
        owner = rng.choice(owners)
        held = open_positions[owner]
        if held and rng.random() < burn_prob:
            pos = rng.choice(sorted(held))
            amount = rng.randint(1, held[pos])
            held[pos] -= amount
            if held[pos] == 0:
                del held[pos]
            kind = "Burn"
            lo, hi = pos
        else:
            lo_slot = rng.randint(-n_slots, n_slots - 1)
            hi_slot = min(n_slots, lo_slot + rng.randint(1, max_width))
            lo, hi = lo_slot * tick_spacing, hi_slot * tick_spacing
            amount = rng.randint(1, max_liquidity)
            held[(lo, hi)] = held.get((lo, hi), 0) + amount
            kind = "Mint"
        events.append(PoolEvent(
            event_type=EventType(kind),
            owner=owner,
            sender=owner,
            tick_lower=lo,
            tick_upper=hi,
            liquidity=amount,
            amount0=rng.getrandbits(rng.randint(1, 255)),
            amount1=rng.getrandbits(rng.randint(1, 255)),
            block_number=block,
            log_index=i,
            tx_hash=f"0x{rng.getrandbits(256):064x}",
        ))
    return EventDataset.from_events(pool, events)


def recent_vs_historic() -> EventDataset:
    """Two owners: B held more liquidity-blocks early on, A less but recently.

    Raw liquidity-time: B = 100*500 = 50000 > A = 100*200 = 20000. With decay
    factor ``lam`` the scores are ``50000*e^lam`` and ``20000*e^(0.2*lam)``,
    so A overtakes B once ``lam < ln(0.4)/0.8`` (about -1.1454).
    """
    a, b = address(0xA), address(0xB)
    return dataset([
        event("Mint", b, -100, 100, 100, 0, 0),
        event("Burn", b, -100, 100, 100, 500, 0),
        event("Mint", a, -100, 100, 100, 800, 0),
        event("Burn", a, -100, 100, 100, 1000, 0),
    ])


def linchpin_fixture() -> EventDataset:
    """One LP (``address(1)``) supplies over 99% of liquidity on ``[-600, 600)``."""
    events = [event("Mint", 1, -600, 600, 10**20, 10, 0)]
    for i, (lo, hi) in enumerate([(-600, -200), (-300, 300), (0, 600), (-600, 600)], start=2):
        events.append(event("Mint", i, lo, hi, 10**17 // i, 10 + i, 0))
    events.append(event("Burn", 3, -300, 300, 10**16, 50, 0))
    events.append(event("Mint", 2, -600, -200, 10**15, 60, 0))
    return dataset(events)


def sole_lp_fixture() -> EventDataset:
    """A single LP provides all liquidity."""
    return dataset([
        event("Mint", 1, -100, 100, 10**18, 1, 0),
        event("Mint", 1, -50, 50, 10**18, 2, 0),
    ])
