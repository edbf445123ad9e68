"""Operation counters for cost accounting.

A :class:`CostLedger` is activated for a block of code with :func:`metered`;
every countable primitive calls :func:`count`, which charges the party set by
:func:`acting_as`. With no active ledger, counting is a no-op, so metering
never changes what a protocol computes.
"""
from __future__ import annotations

import threading
from collections import Counter, defaultdict
from contextlib import contextmanager
from contextvars import ContextVar
from typing import Iterable, Iterator, Optional

COUNTERS = (
    "scalar_mults",
    "modexps",
    "sym_cipher_calls",
    "point_adds",
    "bytes_sent",
    "content_bytes",
)

_ledger: ContextVar[Optional["CostLedger"]] = ContextVar("clshare_ledger", default=None)
_party: ContextVar[str] = ContextVar("clshare_party", default="-")


class CostLedger:
    """Per-party operation counts for one run."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._counts: dict[str, Counter] = defaultdict(Counter)
        self.audit: list[tuple[str, str, bytes]] = []

    def add(self, counter: str, n: int = 1, party: Optional[str] = None) -> None:
        if counter not in COUNTERS:
            raise KeyError(counter)
        if n < 0:
            raise ValueError("ledger counts never decrease")
        with self._lock:
            self._counts[party or _party.get()][counter] += n

    def note(self, kind: str, signer: str, digest: bytes) -> None:
        with self._lock:
            self.audit.append((kind, signer, digest))

    def party(self, pid: str) -> dict[str, int]:
        c = self._counts.get(pid, Counter())
        return {k: c[k] for k in COUNTERS}

    def parties(self) -> list[str]:
        return sorted(self._counts)

    def total(self, parties: Optional[Iterable[str]] = None) -> dict[str, int]:
        wanted = self._counts.keys() if parties is None else parties
        out = Counter()
        for pid in wanted:
            out.update(self._counts.get(pid, Counter()))
        return {k: out[k] for k in COUNTERS}

    def snapshot(self) -> dict[str, dict[str, int]]:
        return {pid: self.party(pid) for pid in self.parties()}

    def reset(self) -> None:
        with self._lock:
            self._counts.clear()
            self.audit.clear()


def active() -> Optional[CostLedger]:
    return _ledger.get()


def count(counter: str, n: int = 1) -> None:
    led = _ledger.get()
    if led is not None:
        led.add(counter, n)


def note(kind: str, signer: bytes, digest: bytes) -> None:
    led = _ledger.get()
    if led is not None:
        led.note(kind, signer.decode("utf-8", "replace"), digest)


def current_party() -> str:
    return _party.get()


@contextmanager
def metered(ledger: Optional[CostLedger]) -> Iterator[Optional[CostLedger]]:
    token = _ledger.set(ledger)
    try:
        yield ledger
    finally:
        _ledger.reset(token)


@contextmanager
def acting_as(party: str) -> Iterator[None]:
    token = _party.set(party)
    try:
        yield
    finally:
        _party.reset(token)
