"""Spontaneous key agreement between two registered devices.

Message flow (initiator a, responder b)::

    a -> b  KeyShare(a, pk_a, U_a)
    b -> a  KeyShare(b, pk_b, U_b)
    a -> b  Challenge   C = Enc(k, n_a)
    b -> a  Response    F = Enc(k, n_a + 1 || n_b)
    a -> b  Confirm       Enc(k, n_b + 1)

Each side computes its own contribution V = l * (d_peer + x_peer) * P from the
peer's public key, and recovers the peer's contribution as (d + x) * U_peer.
"""
from __future__ import annotations

import enum
import random
import struct
from dataclasses import dataclass
from typing import Callable, Sequence

from . import crypto
from .credentials import Credential, PublicKey, SystemParams, combined_public_point
from .crypto import AuthFailure, encode_id, scalar_random
from .ec import CurveGroup, InvalidPoint, Point
from .signatures import TrustSignature, verify_trust_signature

NONCE_BYTES = 16
_NONCE_MOD = 1 << (8 * NONCE_BYTES)

__all__ = [
    "AuthFailure", "Candidate", "Challenge", "Confirm", "InvalidPeerKey", "KeyShare",
    "NoCandidates", "NonceMismatch", "PairingError", "PairingSession", "Response",
    "Role", "SessionTimeout", "State", "StateError", "decode_message", "encode_message",
    "run_pairing", "select_peer", "session_key",
]


class PairingError(Exception):
    pass


class InvalidPeerKey(PairingError):
    pass


class NonceMismatch(PairingError):
    pass


class StateError(PairingError):
    pass


class SessionTimeout(PairingError):
    pass


class NoCandidates(PairingError):
    pass


class Role(enum.Enum):
    INITIATOR = "initiator"
    RESPONDER = "responder"


class State(enum.IntEnum):
    INIT = 0
    KEY_DERIVED = 1
    CHALLENGE_SENT = 2
    CONFIRMED = 3
    FAILED = 4


@dataclass(frozen=True)
class KeyShare:
    sender_id: str
    pk: PublicKey
    U: Point


@dataclass(frozen=True)
class Challenge:
    C: bytes


@dataclass(frozen=True)
class Response:
    F: bytes


@dataclass(frozen=True)
class Confirm:
    payload: bytes


def _nonce_bytes(n: int) -> bytes:
    return (n % _NONCE_MOD).to_bytes(NONCE_BYTES, "big")


def session_key(params: SystemParams, id_x: str, v_x: Point, id_y: str, v_y: Point) -> bytes:
    """h1 over both ids and the V contributed by each, ordered by id so both ends agree."""
    g = params.group
    (i1, v1), (i2, v2) = sorted(((id_x, v_x), (id_y, v_y)), key=lambda e: e[0])
    return params.hashes.h1(encode_id(i1) + encode_id(i2) + g.encode_point(v1) + g.encode_point(v2))


class PairingSession:
    """One side of a pairing exchange.  Single-owner mutable state."""

    def __init__(
        self,
        params: SystemParams,
        cred: Credential,
        role: Role,
        rng: random.Random,
        started_at: int = 0,
        timeout_ticks: int | None = None,
    ):
        self.params = params
        self.cred = cred
        self.role = role
        self.rng = rng
        self.state = State.INIT
        self.l = scalar_random(params.group, rng)
        self.U = self.l * params.P
        self.n_self = rng.getrandbits(8 * NONCE_BYTES)
        self.peer_id: str | None = None
        self.peer_pk: PublicKey | None = None
        self.peer_U: Point | None = None
        self.k: bytes | None = None
        self.started_at = started_at
        self.timeout_ticks = timeout_ticks

    @property
    def self_id(self) -> str:
        return self.cred.device_id

    @property
    def confirmed(self) -> bool:
        return self.state is State.CONFIRMED

    def _fail(self, exc: Exception):
        self.state = State.FAILED
        raise exc

    def _expect(self, *states: State):
        if self.state not in states:
            self._fail(StateError(f"{self.role.value} in state {self.state.name}"))

    def key_share(self) -> KeyShare:
        return KeyShare(self.self_id, self.cred.pk, self.U)

    def _validate(self, pt: Point) -> None:
        g = self.params.group
        if not isinstance(pt, Point) or pt.group is not g or pt.is_identity or not g.on_curve(pt.x, pt.y):
            self._fail(InvalidPeerKey("peer point is not a valid group element"))

    def accept_key_share(self, msg: KeyShare) -> bytes:
        """Record the peer's key share and derive the session key."""
        self._expect(State.INIT)
        if msg.sender_id == self.self_id:
            self._fail(InvalidPeerKey("peer claims our own identity"))
        for pt in (msg.pk.P_dev, msg.pk.R, msg.U):
            self._validate(pt)
        self.peer_id, self.peer_pk = msg.sender_id, msg.pk
        return self.derive_shared_secret(msg.U)

    def derive_shared_secret(self, peer_U: Point) -> bytes:
        if self.peer_id is None:
            self._fail(StateError("peer key share not received"))
        self._validate(peer_U)
        v_own = self.l * combined_public_point(self.params, self.peer_id, self.peer_pk)
        v_peer = self.cred.secret * peer_U
        self.peer_U = peer_U
        self.k = session_key(self.params, self.self_id, v_own, self.peer_id, v_peer)
        self.state = State.KEY_DERIVED
        return self.k

    def _dec(self, ct: bytes) -> bytes:
        try:
            return crypto.dec(self.k, ct)
        except AuthFailure as exc:
            self._fail(exc)

    def make_challenge(self) -> Challenge:
        self._expect(State.KEY_DERIVED)
        if self.role is not Role.INITIATOR:
            self._fail(StateError("only the initiator issues the challenge"))
        self.state = State.CHALLENGE_SENT
        return Challenge(crypto.enc(self.k, _nonce_bytes(self.n_self), self.rng))

    def answer_challenge(self, ch: Challenge) -> Response:
        self._expect(State.KEY_DERIVED)
        if self.role is not Role.RESPONDER:
            self._fail(StateError("only the responder answers a challenge"))
        pt = self._dec(ch.C)
        if len(pt) != NONCE_BYTES:
            self._fail(NonceMismatch("challenge payload has the wrong length"))
        n_peer = int.from_bytes(pt, "big")
        self.state = State.CHALLENGE_SENT
        return Response(crypto.enc(self.k, _nonce_bytes(n_peer + 1) + _nonce_bytes(self.n_self), self.rng))

    def verify_response(self, resp: Response) -> Confirm:
        self._expect(State.CHALLENGE_SENT)
        if self.role is not Role.INITIATOR:
            self._fail(StateError("only the initiator verifies a response"))
        pt = self._dec(resp.F)
        if len(pt) != 2 * NONCE_BYTES or pt[:NONCE_BYTES] != _nonce_bytes(self.n_self + 1):
            self._fail(NonceMismatch("response does not answer our challenge"))
        n_peer = int.from_bytes(pt[NONCE_BYTES:], "big")
        self.state = State.CONFIRMED
        return Confirm(crypto.enc(self.k, _nonce_bytes(n_peer + 1), self.rng))

    def verify_confirm(self, conf: Confirm) -> None:
        self._expect(State.CHALLENGE_SENT)
        if self.role is not Role.RESPONDER:
            self._fail(StateError("only the responder verifies the confirmation"))
        pt = self._dec(conf.payload)
        if pt != _nonce_bytes(self.n_self + 1):
            self._fail(NonceMismatch("confirmation does not answer our nonce"))
        self.state = State.CONFIRMED

    def check_timeout(self, now: int) -> None:
        if (
            self.timeout_ticks is not None
            and self.state not in (State.CONFIRMED, State.FAILED)
            and now - self.started_at > self.timeout_ticks
        ):
            self._fail(SessionTimeout(f"not confirmed within {self.timeout_ticks} ticks"))


def run_pairing(a: PairingSession, b: PairingSession) -> bytes:
    """Drive the full five-message exchange between two in-memory sessions."""
    b.accept_key_share(a.key_share())
    a.accept_key_share(b.key_share())
    conf = a.verify_response(b.answer_challenge(a.make_challenge()))
    b.verify_confirm(conf)
    return a.k


# -- wire encoding ---------------------------------------------------------

_TAGS = {KeyShare: 1, Challenge: 2, Response: 3, Confirm: 4}


def encode_message(msg, group: CurveGroup) -> bytes:
    lp = crypto.lp
    if isinstance(msg, KeyShare):
        body = (
            lp(msg.sender_id.encode("utf-8"))
            + lp(group.encode_point(msg.pk.P_dev))
            + lp(group.encode_point(msg.pk.R))
            + lp(group.encode_point(msg.U))
        )
    elif isinstance(msg, Challenge):
        body = lp(msg.C)
    elif isinstance(msg, Response):
        body = lp(msg.F)
    elif isinstance(msg, Confirm):
        body = lp(msg.payload)
    else:
        raise TypeError(f"not a pairing message: {msg!r}")
    return bytes([_TAGS[type(msg)]]) + body


def _fields(data: bytes) -> list[bytes]:
    out, i = [], 0
    while i < len(data):
        if i + 2 > len(data):
            raise ValueError("truncated length prefix")
        (n,) = struct.unpack(">H", data[i : i + 2])
        if i + 2 + n > len(data):
            raise ValueError("truncated field")
        out.append(data[i + 2 : i + 2 + n])
        i += 2 + n
    return out


def decode_message(data: bytes, group: CurveGroup):
    if not data:
        raise ValueError("empty message")
    tag, fields = data[0], _fields(data[1:])
    try:
        if tag == 1 and len(fields) == 4:
            P_dev, R, U = (group.decode_point(f) for f in fields[1:])
            return KeyShare(fields[0].decode("utf-8"), PublicKey(P_dev, R), U)
        if tag in (2, 3, 4) and len(fields) == 1:
            return {2: Challenge, 3: Response, 4: Confirm}[tag](fields[0])
    except InvalidPoint as exc:
        raise InvalidPeerKey(str(exc)) from exc
    raise ValueError(f"malformed message with tag {tag}")


# -- peer selection ----------------------------------------------------------

@dataclass(frozen=True)
class Candidate:
    peer_id: str
    pk: PublicKey
    trust: tuple
    signature: TrustSignature | None
    link_metric: float | None = None


def select_peer(
    params: SystemParams,
    candidates: Sequence[Candidate],
    task_index: int,
    policy: Callable[[Candidate, int], float] | None = None,
    verify: Callable = verify_trust_signature,
) -> str:
    """Pick the verified candidate with the highest score (ties: smallest id).

    The default score is the candidate's trustvalue for ``task_index``; the link
    metric is ignored unless a ``policy`` uses it.
    """
    score = policy or (lambda c, n: c.trust[n])
    valid = [c for c in candidates if verify(params, c.pk, c.trust, c.signature)]
    if not valid:
        raise NoCandidates("no candidate presented a valid trust signature")
    return min(valid, key=lambda c: (-score(c, task_index), c.peer_id)).peer_id
