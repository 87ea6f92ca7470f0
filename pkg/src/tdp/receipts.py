"""Per-transaction receipts.

A receipt belongs to one end of a transaction (the *owner*) and is produced by
the other end (the *rater*), which encrypts its rating of the owner under a key
only it and the backend can derive, and signs with its partial private key::

    er = Enc(h1(d_rater), rating)
    h' = h2(er || c || q || lambda || t0 || owner || rater || role || index)
    T2 = l * d_rater * P
    T1 = l * h' * (d_owner * P)

The backend, holding both partial keys, accepts when (d_owner h' / d_rater) T2 == T1.
"""
from __future__ import annotations

import json
import random
import struct
from dataclasses import dataclass, replace
from pathlib import Path

from . import crypto
from .credentials import SystemParams, partial_public_point
from .crypto import encode_id, encode_real, scalar_random
from .ec import CurveGroup, Point
from .pairing import PairingSession, Role
from .trust import INITIATOR, PEER, TransactionType


class SessionNotConfirmed(Exception):
    pass


@dataclass(frozen=True)
class Receipt:
    owner_id: str
    peer_id: str
    owner_role: tuple
    q: float
    c: float
    er: bytes
    lam: TransactionType
    t0: float
    T1: Point
    T2: Point
    txn_index: int
    T3: bytes = b""

    def mutate(self, **changes) -> "Receipt":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        g = self.T1.group
        return {
            "owner_id": self.owner_id,
            "peer_id": self.peer_id,
            "owner_role": list(self.owner_role),
            "q": self.q,
            "c": self.c,
            "er": self.er.hex(),
            "lambda": {"index": self.lam.index, "value": self.lam.value, "dim": self.lam.dim},
            "t0": self.t0,
            "T1": g.encode_point(self.T1).hex(),
            "T2": g.encode_point(self.T2).hex(),
            "T3": self.T3.hex(),
            "txn_index": self.txn_index,
        }

    @classmethod
    def from_dict(cls, d: dict, group: CurveGroup) -> "Receipt":
        lam = d["lambda"]
        return cls(
            owner_id=d["owner_id"],
            peer_id=d["peer_id"],
            owner_role=tuple(d["owner_role"]),
            q=float(d["q"]),
            c=float(d["c"]),
            er=bytes.fromhex(d["er"]),
            lam=TransactionType(int(lam["index"]), float(lam["value"]), int(lam["dim"])),
            t0=d["t0"],
            T1=group.decode_point(bytes.fromhex(d["T1"])),
            T2=group.decode_point(bytes.fromhex(d["T2"])),
            txn_index=int(d["txn_index"]),
            T3=bytes.fromhex(d.get("T3", "")),
        )


def rating_key(params: SystemParams, d: int) -> bytes:
    return params.hashes.h1(params.group.encode_scalar(d))


def encode_rating(r: int) -> bytes:
    return struct.pack(">b", r)


def decode_rating(data: bytes) -> int:
    (r,) = struct.unpack(">b", data)
    if r not in (1, -1):
        raise ValueError(f"invalid rating {r}")
    return r


def receipt_context(r: Receipt) -> bytes:
    """Every receipt field except er, T1 and T2; authenticated data for er."""
    lam = struct.pack(">HH", r.lam.dim, r.lam.index) + encode_real(r.lam.value)
    return (
        encode_real(r.c)
        + encode_real(r.q)
        + lam
        + encode_real(r.t0)
        + encode_id(r.owner_id)
        + encode_id(r.peer_id)
        + bytes(r.owner_role)
        + struct.pack(">Q", r.txn_index)
    )


def receipt_digest(params: SystemParams, r: Receipt) -> int:
    """h' binding every receipt field except the signature components."""
    return params.hashes.h2(crypto.lp(r.er) + receipt_context(r))


def generate_receipt(
    session: PairingSession,
    q: float,
    c: float,
    rating: int,
    lam: TransactionType,
    t0: float,
    txn_index: int,
    rng: random.Random,
) -> Receipt:
    """Run by the rater: build the receipt of the session's remote party.

    ``rating`` is the rater's rating of that party; ``txn_index`` is the owner's
    own transaction counter.
    """
    if not session.confirmed:
        raise SessionNotConfirmed(f"session is {session.state.name}")
    params = session.params
    d_rater = session.cred.d
    owner_role = PEER if session.role is Role.INITIATOR else INITIATOR
    draft = Receipt(
        owner_id=session.peer_id,
        peer_id=session.self_id,
        owner_role=owner_role,
        q=float(q),
        c=float(c),
        er=b"",
        lam=lam,
        t0=t0,
        T1=params.group.identity,
        T2=params.group.identity,
        txn_index=txn_index,
    )
    # T1/T2 are computable from public points, so er's tag is what ties the fields to the rater
    er = crypto.enc(rating_key(params, d_rater), encode_rating(rating), rng, aad=receipt_context(draft))
    draft = replace(draft, er=er)
    h = receipt_digest(params, draft)
    l_t = scalar_random(params.group, rng)
    T2 = (l_t * d_rater) * params.P
    T1 = (l_t * h) * partial_public_point(params, session.peer_id, session.peer_pk)
    return replace(draft, T1=T1, T2=T2)


def save_receipts(path: str | Path, receipts) -> None:
    with open(path, "w") as fh:
        for r in receipts:
            fh.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")


def load_receipts(path: str | Path, group: CurveGroup) -> list[Receipt]:
    out = []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            out.append(Receipt.from_dict(json.loads(line), group))
    return out
