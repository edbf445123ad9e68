"""Scenario files, world construction and ``run_scenario``.

A scenario is line-oriented text; ``#`` starts a comment. Directives::

    protocol segds|sedds
    seed <int>
    members <N>                     # segds group size (excluding the CH)
    file <bytes>
    latency <ms> | deadline <ms> | freshness <ms> | threshold <k> | prepay <pct>
    max_rounds <k>
    behavior <party> <name>         # e.g. behavior m3 freeride, behavior uav bogus
    weight <party> <w>              # segds weighted split
    rule <action> [src=..] [dst=..] [kind=..] [ms=..] [field=..] [offset=..] [xor=..] [times=..]
    inject at=<ms> src=<id> dst=<id> (hex=<bytes> | capture=<Kind>)
    expect <assertion> [args...]

Party ids: segds uses ``sp``, ``ch``, ``m1``..``mN``; sedds uses ``sp``,
``ue``, ``uav``, ``ausf``. Both worlds also enroll ``eve``, an insider
adversary with a valid key of her own and nobody else's.
"""
from __future__ import annotations

import dataclasses
import shlex
from dataclasses import dataclass, field
from typing import Callable, Optional

from . import pki
from .errors import ParseError
from .netsim import AdversaryScript, Injection, Network, Rule
from .primitives import H3
from .rng import HashDrbg
from .roles import Timing
from .segds import ClusterHead, GroupMember, ServiceProvider
from .sedds import Ausf, RelayUav, UserEquipment, sign_content
from .signcrypt import sign
from .wire import Message, field_span, kind_of

FILE_NAME = b"file.bin"
ACTIONS = ("pass", "drop", "delay", "tamper", "replay", "impersonate")


@dataclass
class Scenario:
    protocol: str = "segds"
    seed: int = 0
    members: int = 5
    file_size: int = 65536
    latency: int = 5
    deadline: int = 10_000
    freshness: int = 30_000
    threshold: int = 1
    prepay: int = 20
    max_rounds: Optional[int] = None
    behaviors: dict[str, str] = field(default_factory=dict)
    weights: dict[str, int] = field(default_factory=dict)
    rules: list[Rule] = field(default_factory=list)
    injections: list[tuple[int, str, str, str, str]] = field(default_factory=list)  # at, src, dst, how, arg
    expects: list[list[str]] = field(default_factory=list)


_INT_KEYS = {"seed", "members", "file", "latency", "deadline", "freshness", "threshold", "prepay", "max_rounds"}
_ATTR = {"file": "file_size"}
_RULE_INTS = {"ms": "delay_ms", "offset": "offset", "xor": "xor", "times": "times"}


def _int(text: str, lineno: int) -> int:
    try:
        return int(text, 0)
    except ValueError:
        raise ParseError(f"line {lineno}: expected an integer, got {text!r}") from None


def _kv(parts: list[str], lineno: int) -> dict[str, str]:
    out = {}
    for p in parts:
        if "=" not in p:
            raise ParseError(f"line {lineno}: expected key=value, got {p!r}")
        k, v = p.split("=", 1)
        out[k] = v
    return out


def parse(text: str) -> Scenario:
    sc = Scenario()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            words = shlex.split(line)
        except ValueError as exc:
            raise ParseError(f"line {lineno}: {exc}") from None
        head, args = words[0], words[1:]
        if head == "protocol":
            if args not in (["segds"], ["sedds"]):
                raise ParseError(f"line {lineno}: protocol must be segds or sedds")
            sc.protocol = args[0]
        elif head in _INT_KEYS:
            if len(args) != 1:
                raise ParseError(f"line {lineno}: {head} takes one value")
            setattr(sc, _ATTR.get(head, head), _int(args[0], lineno))
        elif head in ("behavior", "weight"):
            if len(args) != 2:
                raise ParseError(f"line {lineno}: {head} <party> <value>")
            if head == "behavior":
                sc.behaviors[args[0]] = args[1]
            else:
                sc.weights[args[0]] = _int(args[1], lineno)
        elif head == "rule":
            if not args or args[0] not in ACTIONS:
                raise ParseError(f"line {lineno}: rule action must be one of {', '.join(ACTIONS)}")
            kv = _kv(args[1:], lineno)
            rule = Rule(args[0])
            for k, v in kv.items():
                if k in ("src", "dst", "kind", "field"):
                    setattr(rule, k, v)
                elif k in _RULE_INTS:
                    setattr(rule, _RULE_INTS[k], _int(v, lineno))
                else:
                    raise ParseError(f"line {lineno}: unknown rule key {k!r}")
            sc.rules.append(rule)
        elif head == "inject":
            kv = _kv(args, lineno)
            try:
                at, src, dst = _int(kv.pop("at"), lineno), kv.pop("src"), kv.pop("dst")
            except KeyError as exc:
                raise ParseError(f"line {lineno}: inject needs {exc.args[0]}=") from None
            if len(kv) != 1 or next(iter(kv)) not in ("hex", "capture"):
                raise ParseError(f"line {lineno}: inject needs exactly one of hex= or capture=")
            how, arg = next(iter(kv.items()))
            if how == "hex":
                try:
                    bytes.fromhex(arg)
                except ValueError:
                    raise ParseError(f"line {lineno}: bad hex") from None
            sc.injections.append((at, src, dst, how, arg))
        elif head == "expect":
            if not args or args[0] not in ASSERTIONS:
                raise ParseError(f"line {lineno}: unknown assertion {args[0] if args else ''!r}")
            sc.expects.append(args)
        else:
            raise ParseError(f"line {lineno}: unknown directive {head!r}")
    if sc.protocol == "segds" and sc.members < 2:
        raise ParseError("segds needs at least 2 members")
    if sc.file_size <= 0:
        raise ParseError("file size must be positive")
    if not 0 < sc.prepay < 100:
        raise ParseError("prepay must be strictly between 0 and 100")
    return sc


def load(path: str) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())


# --- world -------------------------------------------------------------------

@dataclass
class World:
    scenario: Scenario
    params: pki.SystemParams
    kgc: pki.KgcState
    net: Network
    content: bytes
    keys: dict[str, pki.FullKeyPair]
    parties: dict[str, object]

    def __getitem__(self, pid: str):
        return self.parties[pid]


def _capture_builder(kind: str, src: str, dst: str) -> Callable[[Network], bytes]:
    def build(net: Network) -> bytes:
        for _, s, d, raw in reversed(net.wire):
            if kind_of(raw) == kind and dst in d.split(","):
                return raw
        return b""
    return build


def _impersonator(eve_sign: Callable[[bytes], object]) -> Callable[[bytes, Rule], bytes]:
    """Alter a field, then re-sign with Eve's key while keeping the victim's ids."""
    def forge(raw: bytes, rule: Rule) -> bytes:
        msg = Message.decode(raw)
        if rule.field:
            a, b = field_span(raw, rule.field)
            if b > a:
                out = bytearray(raw)
                out[a + (rule.offset or 0) % (b - a)] ^= rule.xor or 0x01
                try:
                    msg = Message.decode(bytes(out))
                except ParseError:
                    return bytes(out)
        if "sig" not in [n for n, _ in msg.FIELDS]:
            return msg.encode()
        return dataclasses.replace(msg, sig=eve_sign(msg.signed_bytes())).encode()
    return forge


def build_world(sc: Scenario, seed: Optional[int] = None) -> World:
    seed = sc.seed if seed is None else seed
    root = HashDrbg(seed)
    params, kgc = pki.setup(rng=root.fork("kgc"), threshold=sc.threshold)
    content = root.fork("file").randbytes(sc.file_size)
    timing = Timing(freshness_ms=sc.freshness, deadline_ms=sc.deadline)

    if sc.protocol == "segds":
        members = [f"m{i}" for i in range(1, sc.members + 1)]
        ids = ["sp", "ch", *members, "eve"]
    else:
        ids = ["sp", "ue", "uav", "eve"]
    keys = {pid: pki.enroll(params, kgc, pid.encode(), rng=root.fork("enroll/" + pid)) for pid in ids}
    eve_rng = root.fork("eve")
    net = Network(seed=seed, latency_ms=sc.latency, max_steps=200_000,
                  adversary=AdversaryScript([dataclasses.replace(r, fired=0) for r in sc.rules]))
    net.impersonate = _impersonator(lambda data: sign(params, keys["eve"], data, eve_rng))
    for at, src, dst, how, arg in sc.injections:
        if how == "hex":
            net.adversary.injections.append(Injection(at, src, dst, bytes.fromhex(arg)))
        else:
            net.adversary.injections.append(Injection(at, src, dst, build=_capture_builder(arg, src, dst)))
    net.schedule_injections()

    def common(pid: str) -> dict:
        return dict(timing=timing, rng=root.fork("party/" + pid))

    parties: dict[str, object] = {}
    if sc.protocol == "segds":
        parties["sp"] = ServiceProvider(params, keys["sp"], kgc, files={FILE_NAME: content}, **common("sp"))
        mids = [m.encode() for m in members]
        weights = None
        if sc.weights:
            weights = {pid.encode(): w for pid, w in sc.weights.items()}
        parties["ch"] = ClusterHead(params, keys["ch"], kgc, sp_id=b"sp", members=mids, fn=FILE_NAME,
                                    file_size=sc.file_size, weights=weights, max_rounds=sc.max_rounds,
                                    **common("ch"))
        for m in members:
            parties[m] = GroupMember(params, keys[m], kgc, ch_id=b"ch", sp_id=b"sp", roster=[b"ch", *mids],
                                     behavior=sc.behaviors.get(m, "honest"), **common(m))
    else:
        with net.act("sp"):
            sp_sig = sign_content(params, keys["sp"], FILE_NAME, content, root.fork("sp-sign"))
        ausf = Ausf(params, kgc, {FILE_NAME: content}, prepay_percent=sc.prepay)
        parties["ausf"] = ausf
        parties["uav"] = RelayUav(params, keys["uav"], kgc, cache={FILE_NAME: (content, sp_sig)},
                                  behavior=sc.behaviors.get("uav", "honest"), **common("uav"))
        parties["ue"] = UserEquipment(params, keys["ue"], kgc, ausf=ausf, behavior=sc.behaviors.get("ue", "honest"),
                                      **common("ue"))
    net.add(*parties.values())
    return World(sc, params, kgc, net, content, keys, parties)


def start(world: World) -> None:
    if world.scenario.protocol == "segds":
        with world.net.act("ch"):
            world["ch"].start(world.net)
    else:
        with world.net.act("ue"):
            world["ue"].start(world.net, "uav", FILE_NAME)


# --- assertions --------------------------------------------------------------

def _segds_members(world: World) -> list[str]:
    return [p for p in world.parties if p.startswith("m")]


def _has_plaintext(world: World, pid: str) -> bool:
    p = world[pid]
    if world.scenario.protocol == "segds":
        return getattr(p, "file", None) is not None or (pid == "ch" and p.k_d is not None)
    if pid == "ue":
        return any(s.plaintext is not None for s in p.sessions.values())
    return pid in ("uav", "sp")


def _finalized(world: World, pid: str) -> bool:
    p = world[pid]
    if world.scenario.protocol == "segds":
        return pid == "ch" and p.m4 is not None or getattr(p, "file", None) == world.content
    return any(s.plaintext == world.content for s in p.sessions.values())


def _excluded(world: World, pid: str) -> bool:
    from .mre import MreCiphertext
    m4 = world["ch"].m4
    return m4 is None or pid.encode() not in MreCiphertext.decode(m4.mre).recipients()


def _forgeries(world: World) -> list[str]:
    """Accepted signatures over data their claimed signer never signed."""
    signed = {(s, d) for k, s, d in world.net.ledger.audit if k == "sign"}
    return [f"{s}:{d.hex()[:12]}" for k, s, d in world.net.ledger.audit if k == "verify" and (s, d) not in signed]


def _payment(world: World) -> str:
    return world["ausf"].payments.get(b"ue", FILE_NAME).state.value


def _verdicts(world: World) -> list[str]:
    return [v.outcome.value for v in world["ausf"].verdicts]


def _check(world: World, args: list[str]) -> tuple[bool, str]:
    name, rest = args[0], args[1:]
    net = world.net
    if name in ("finalized", "excluded", "blacklisted", "no_plaintext"):
        test = {
            "finalized": lambda p: _finalized(world, p),
            "excluded": lambda p: _excluded(world, p),
            "blacklisted": lambda p: p.encode() in getattr(world.parties.get("ch"), "blacklist", set())
            or world.kgc.is_revoked(p.encode()),
            "no_plaintext": lambda p: not _has_plaintext(world, p),
        }[name]
        targets = rest
        if rest == ["all"]:
            targets = _segds_members(world) if world.scenario.protocol == "segds" else ["ue"]
        missing = [p for p in targets if p not in world.parties]
        if missing:
            return False, f"unknown party {missing[0]}"
        bad = [p for p in targets if not test(p)]
        return not bad, ("" if not bad else "fails for " + ",".join(bad))
    if name == "rejected":
        if len(rest) != 2:
            return False, "rejected <party> <Error>"
        return net.rejected(rest[0], rest[1]), ""
    if name == "no_rejections":
        return not net.rejections, "; ".join(f"{p}:{k}:{e}" for p, k, e, _ in net.rejections[:3])
    if name == "verdict":
        got = _verdicts(world)
        return bool(got) and got[-1] == rest[0], f"verdicts={got}"
    if name == "payment":
        got = _payment(world)
        return got == rest[0], f"payment={got}"
    if name == "conserved":
        return net.conserved(), ""
    if name == "no_forgeries":
        f = _forgeries(world)
        return not f, ",".join(f[:3])
    if name == "aborted":
        return world["ch"].aborted is not None, ""
    if name == "transcript_has":
        needle = " ".join(rest)
        return any(needle in line for line in net.transcript), needle
    return False, f"unknown assertion {name}"


ASSERTIONS = ("finalized", "excluded", "blacklisted", "no_plaintext", "rejected", "no_rejections",
              "verdict", "payment", "conserved", "no_forgeries", "aborted", "transcript_has")


# --- running -----------------------------------------------------------------

@dataclass
class RunResult:
    world: World
    results: list[tuple[str, bool, str]]

    @property
    def ok(self) -> bool:
        return all(ok for _, ok, _ in self.results)

    @property
    def transcript(self) -> str:
        return "\n".join(self.world.net.transcript) + "\n"

    def assertions_text(self) -> str:
        return "".join(f"{'PASS' if ok else 'FAIL'} {text}{'  # ' + why if why and not ok else ''}\n"
                       for text, ok, why in self.results)


def run_scenario(sc: Scenario, seed: Optional[int] = None) -> RunResult:
    world = build_world(sc, seed)
    start(world)
    world.net.run()
    results = []
    for args in sc.expects:
        ok, why = _check(world, args)
        results.append((" ".join(args), ok, why))
    return RunResult(world, results)


def digest(result: RunResult) -> str:
    return H3(result.transcript.encode()).hex()
