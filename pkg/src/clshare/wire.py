"""Message framing: ``tag(1) || [varint(len) || field]*`` in declaration order.

Protocol messages subclass :class:`Message` and list their fields in
``FIELDS`` as ``(name, kind)`` pairs. The trailing ``sig`` field, when
present, signs every byte before it unless the class overrides
:meth:`Message.signed_bytes`.
"""
from __future__ import annotations

import dataclasses
from typing import ClassVar

from .errors import DecodeError, ParseError
from .group import Point
from .primitives import CT_OVERHEAD, DH_LEN, dh_decode, dh_encode
from .signcrypt import Signature

ID, BYTES, BLOB, U64, RANGE, POINT, DH, SIG, DIGEST = (
    "id", "bytes", "blob", "u64", "range", "point", "dh", "sig", "digest",
)

_FIXED = {U64: 8, RANGE: 16, POINT: 33, DH: DH_LEN, SIG: 65, DIGEST: 32}

_registry: dict[int, type["Message"]] = {}


def put_varint(n: int) -> bytes:
    out = bytearray()
    while True:
        b = n & 0x7F
        n >>= 7
        if n:
            out.append(b | 0x80)
        else:
            out.append(b)
            return bytes(out)


def get_varint(data: bytes, pos: int) -> tuple[int, int]:
    n = shift = 0
    while True:
        if pos >= len(data):
            raise ParseError("truncated length prefix")
        b = data[pos]
        pos += 1
        n |= (b & 0x7F) << shift
        if not b & 0x80:
            return n, pos
        shift += 7
        if shift > 35:
            raise ParseError("length prefix too long")


def _enc(kind: str, value) -> bytes:
    if kind in (ID, BYTES, BLOB, DIGEST):
        return bytes(value)
    if kind == U64:
        return int(value).to_bytes(8, "big")
    if kind == RANGE:
        off, ln = value
        return off.to_bytes(8, "big") + ln.to_bytes(8, "big")
    if kind == POINT:
        return value.encode()
    if kind == DH:
        return dh_encode(value)
    if kind == SIG:
        return value.encode()
    raise ValueError(kind)


def _dec(kind: str, raw: bytes):
    want = _FIXED.get(kind)
    if want is not None and len(raw) != want:
        raise ParseError(f"{kind} field must be {want} bytes, got {len(raw)}")
    if kind in (ID, BYTES, BLOB, DIGEST):
        return raw
    if kind == U64:
        return int.from_bytes(raw, "big")
    if kind == RANGE:
        return int.from_bytes(raw[:8], "big"), int.from_bytes(raw[8:], "big")
    if kind == POINT:
        return Point.decode(raw)
    if kind == DH:
        return dh_decode(raw)
    if kind == SIG:
        return Signature.decode(raw)
    raise ValueError(kind)


def split(raw: bytes) -> tuple[int, list[tuple[int, int]]]:
    """Tag and (start, end) spans of each field body."""
    if not raw:
        raise ParseError("empty frame")
    pos, spans = 1, []
    while pos < len(raw):
        ln, pos = get_varint(raw, pos)
        if pos + ln > len(raw):
            raise ParseError("field overruns frame")
        spans.append((pos, pos + ln))
        pos += ln
    return raw[0], spans


class Message:
    TAG: ClassVar[int]
    FIELDS: ClassVar[tuple[tuple[str, str], ...]]
    CONTENT: ClassVar[str | None] = None

    def __init_subclass__(cls, **kw):
        super().__init_subclass__(**kw)
        if "TAG" in cls.__dict__:
            if cls.TAG in _registry:
                raise TypeError(f"duplicate tag {cls.TAG:#x}")
            _registry[cls.TAG] = cls

    @property
    def kind(self) -> str:
        return type(self).__name__

    def encode(self) -> bytes:
        out = [bytes([self.TAG])]
        for name, kind in self.FIELDS:
            body = _enc(kind, getattr(self, name))
            out += [put_varint(len(body)), body]
        return b"".join(out)

    def unsigned_prefix(self) -> bytes:
        out = [bytes([self.TAG])]
        for name, kind in self.FIELDS:
            if name == "sig":
                break
            body = _enc(kind, getattr(self, name))
            out += [put_varint(len(body)), body]
        return b"".join(out)

    def signed_bytes(self, context: bytes = b"") -> bytes:
        return self.unsigned_prefix() + context

    def content_len(self) -> int:
        """Plaintext bytes of file content carried (excluded from overhead)."""
        if self.CONTENT is None:
            return 0
        return max(0, len(getattr(self, self.CONTENT)) - CT_OVERHEAD)

    @classmethod
    def decode(cls, raw: bytes) -> "Message":
        tag, spans = split(raw)
        target = _registry.get(tag)
        if target is None:
            raise ParseError(f"unknown message tag {tag:#x}")
        if cls is not Message and not issubclass(target, cls):
            raise ParseError(f"expected {cls.__name__}, got {target.__name__}")
        if len(spans) != len(target.FIELDS):
            raise ParseError(f"{target.__name__}: expected {len(target.FIELDS)} fields, got {len(spans)}")
        values = {}
        for (name, kind), (a, b) in zip(target.FIELDS, spans):
            try:
                values[name] = _dec(kind, raw[a:b])
            except DecodeError as exc:
                raise ParseError(f"{target.__name__}.{name}: {exc}") from None
        return target(**values)


def kind_of(raw: bytes) -> str:
    """Message class name for a frame, or ``"?"`` if the tag is unknown."""
    if not raw:
        return "?"
    cls = _registry.get(raw[0])
    return cls.__name__ if cls else "?"


def field_span(raw: bytes, path: str) -> tuple[int, int]:
    """Absolute byte span of a (possibly nested, dotted) field body in ``raw``.

    ``"m2.ct"`` in an M3 frame names the ciphertext inside the embedded M2.
    """
    base = 0
    frame = raw
    for part in path.split("."):
        tag, spans = split(frame)
        cls = _registry.get(tag)
        if cls is None:
            raise ParseError(f"unknown message tag {tag:#x}")
        names = [n for n, _ in cls.FIELDS]
        if part not in names:
            raise ParseError(f"{cls.__name__} has no field {part!r}")
        a, b = spans[names.index(part)]
        base += a
        frame = frame[a:b]
    return base, base + len(frame)


def message(cls):
    """Class decorator: frozen dataclass registered as a wire message."""
    return dataclasses.dataclass(frozen=True)(cls)
