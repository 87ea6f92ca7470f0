"""Certificate-less device credentials.

A device picks its own secret ``x_dev`` and the backend binds it to the device
identity with a partial private key ``d``.  The device's private part is
``(d, x_dev)`` and its public part ``(P_dev, R)``; neither the device nor the
backend alone holds the full private key.
"""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

from .crypto import HashSuite, encode_id, scalar_random
from .ec import SECP160R1, CurveGroup, Point

BOOTSTRAP_TRUST = math.exp(-1.0)


class DuplicateRegistration(Exception):
    pass


class UnknownDevice(KeyError):
    pass


@dataclass(frozen=True)
class MasterKey:
    x: int
    p_pub: Point

    @classmethod
    def generate(cls, group: CurveGroup, rng: random.Random) -> "MasterKey":
        x = scalar_random(group, rng)
        return cls(x, x * group.generator)


@dataclass(frozen=True, eq=False)
class SystemParams:
    """Public parameter set shipped with the crowdsourcing application."""

    group: CurveGroup
    p_pub: Point
    hashes: HashSuite
    t0_bootstrap: float = BOOTSTRAP_TRUST

    @classmethod
    def from_master(cls, master: MasterKey, group: CurveGroup = SECP160R1) -> "SystemParams":
        group.precompute(master.p_pub)
        return cls(group, master.p_pub, HashSuite(group.order))

    @property
    def P(self) -> Point:
        return self.group.generator


@dataclass(frozen=True)
class PublicKey:
    P_dev: Point
    R: Point


@dataclass(frozen=True)
class Credential:
    """Device-side key material.  ``r_reg`` never leaves the backend."""

    device_id: str
    x_dev: int
    P_dev: Point
    R: Point
    d: int

    @property
    def pk(self) -> PublicKey:
        return PublicKey(self.P_dev, self.R)

    @property
    def secret(self) -> int:
        """d + x_dev, the scalar behind the combined public point."""
        return (self.d + self.x_dev) % self.P_dev.group.order


@dataclass
class BsRegistryEntry:
    device_id: str
    r_reg: int
    d: int
    P_dev: Point
    R: Point
    trust: list = field(default_factory=list)


class Registry:
    """Backend-side table of registered devices; single writer."""

    def __init__(self):
        self._entries: dict[str, BsRegistryEntry] = {}

    def __contains__(self, device_id: str) -> bool:
        return device_id in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries.values())

    def get(self, device_id: str) -> BsRegistryEntry:
        try:
            return self._entries[device_id]
        except KeyError:
            raise UnknownDevice(device_id) from None

    def add(self, entry: BsRegistryEntry) -> None:
        if entry.device_id in self._entries:
            raise DuplicateRegistration(entry.device_id)
        self._entries[entry.device_id] = entry

    def ids(self) -> list[str]:
        return sorted(self._entries)


def binding_hash(params: SystemParams, device_id: str, R: Point, P_dev: Point) -> int:
    """h0(id || R || P_dev)."""
    g = params.group
    return params.hashes.h0(encode_id(device_id) + g.encode_point(R) + g.encode_point(P_dev))


@lru_cache(maxsize=4096)
def _partial_public(params: SystemParams, device_id: str, P_dev: Point, R: Point) -> Point:
    return R + binding_hash(params, device_id, R, P_dev) * params.p_pub


def partial_public_point(params: SystemParams, device_id: str, pk: PublicKey) -> Point:
    """d*P, computable from public data: R + h0(id || R || P_dev) * P_pub."""
    return _partial_public(params, device_id, pk.P_dev, pk.R)


def combined_public_point(params: SystemParams, device_id: str, pk: PublicKey) -> Point:
    """(d + x_dev)*P from public data."""
    return partial_public_point(params, device_id, pk) + pk.P_dev


def device_begin_registration(params: SystemParams, rng: random.Random) -> tuple[int, Point]:
    x_dev = scalar_random(params.group, rng)
    return x_dev, x_dev * params.P


def bs_extract_partial_key(
    params: SystemParams,
    master: MasterKey,
    registry: Registry,
    device_id: str,
    P_dev: Point,
    rng: random.Random,
    bootstrap_trust: list | None = None,
) -> tuple[Point, int, int]:
    """Issue (R, d) for ``device_id`` and record the registry entry.

    R = r*P and d = r + x*h0(id || R || P_dev) mod q.
    """
    if not device_id:
        raise ValueError("device id must be nonempty")
    if device_id in registry:
        raise DuplicateRegistration(device_id)
    q = params.group.order
    r_reg = scalar_random(params.group, rng)
    R = r_reg * params.P
    d = (r_reg + master.x * binding_hash(params, device_id, R, P_dev)) % q
    registry.add(BsRegistryEntry(device_id, r_reg, d, P_dev, R, list(bootstrap_trust or [])))
    return R, d, r_reg


def verify_partial_key(params: SystemParams, device_id: str, pk: PublicKey, d: int) -> bool:
    try:
        return d * params.P == partial_public_point(params, device_id, pk)
    except (TypeError, AttributeError):
        return False


def register_device(
    params: SystemParams,
    master: MasterKey,
    registry: Registry,
    device_id: str,
    rng: random.Random,
    bootstrap_trust: list | None = None,
) -> Credential:
    """Full registration as a trusted local call, verified on both sides."""
    x_dev, P_dev = device_begin_registration(params, rng)
    R, d, _ = bs_extract_partial_key(params, master, registry, device_id, P_dev, rng, bootstrap_trust)
    if not verify_partial_key(params, device_id, PublicKey(P_dev, R), d):
        raise RuntimeError("extracted partial key failed verification")
    return Credential(device_id, x_dev, P_dev, R, d)


def export_public(cred: Credential, path: str | Path | None = None) -> dict:
    g = cred.P_dev.group
    doc = {
        "device_id": cred.device_id,
        "curve": g.name,
        "P_dev": g.encode_point(cred.P_dev).hex(),
        "R": g.encode_point(cred.R).hex(),
    }
    if path is not None:
        Path(path).write_text(json.dumps(doc, indent=2))
    return doc


def import_public(doc_or_path, group: CurveGroup = SECP160R1) -> tuple[str, PublicKey]:
    if isinstance(doc_or_path, (str, Path)):
        doc = json.loads(Path(doc_or_path).read_text())
    else:
        doc = doc_or_path
    if doc.get("curve", group.name) != group.name:
        raise ValueError(f"credential is for curve {doc['curve']}, expected {group.name}")
    pk = PublicKey(
        group.decode_point(bytes.fromhex(doc["P_dev"])),
        group.decode_point(bytes.fromhex(doc["R"])),
    )
    return doc["device_id"], pk
