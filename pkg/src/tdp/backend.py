"""Backend server engine: registry, receipt checking, trust adjustment,
trust signatures and trust-management cycles.

The backend never sees a pairing session key; nothing here derives one.
"""
from __future__ import annotations

import hashlib
import json
import logging
import random
import struct
from dataclasses import dataclass, field

from . import crypto
from .credentials import (
    Credential,
    MasterKey,
    Registry,
    SystemParams,
    UnknownDevice,
    register_device,
)
from .crypto import AuthFailure
from .ec import SECP160R1, CurveGroup
from .receipts import Receipt, decode_rating, rating_key, receipt_context, receipt_digest
from .signatures import TrustSignature, sign_trust
from .trust import TrustParams, behavior_estimate, update_trust

log = logging.getLogger(__name__)


class StaleReceipt(Exception):
    pass


class InvalidReceipt(Exception):
    pass


class DuplicateReceipt(Exception):
    pass


def trust_digest(trust) -> str:
    return hashlib.sha256(json.dumps([float(t) for t in trust]).encode()).hexdigest()


@dataclass
class CycleReport:
    cycle: int
    sigma_bar: float
    next_sigma_bar: float
    accepted: int
    rejected: list = field(default_factory=list)
    devices: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "cycle": self.cycle,
            "sigma_bar": self.sigma_bar,
            "next_sigma_bar": self.next_sigma_bar,
            "accepted": self.accepted,
            "rejected": self.rejected,
            "devices": self.devices,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


class BackendServer:
    def __init__(
        self,
        params: SystemParams,
        master: MasterKey,
        trust_params: TrustParams,
        rng: random.Random,
        freshness_window: float = float("inf"),
    ):
        self.params = params
        self.master = master
        self.trust_params = trust_params
        self.rng = rng
        self.registry = Registry()
        self.freshness_window = freshness_window
        self.sigma_bar = float(trust_params.sigma_bar)
        self.cycle = 0
        self._seen: set[tuple[str, int]] = set()
        self._signatures: dict[str, TrustSignature] = {}
        self._cycle_accepted: dict[str, int] = {}
        self._cycle_rejected: dict[str, int] = {}
        self._cycle_rejections: list[dict] = []

    @classmethod
    def setup(
        cls,
        trust_params: TrustParams,
        rng: random.Random,
        group: CurveGroup = SECP160R1,
        freshness_window: float = float("inf"),
    ) -> "BackendServer":
        master = MasterKey.generate(group, rng)
        return cls(SystemParams.from_master(master, group), master, trust_params, rng, freshness_window)

    # -- registry -----------------------------------------------------------

    def register(self, device_id: str, rng: random.Random | None = None) -> Credential:
        t0 = [self.params.t0_bootstrap] * self.trust_params.n_types
        cred = register_device(self.params, self.master, self.registry, device_id, rng or self.rng, t0)
        self._signatures[device_id] = sign_trust(self.params, self.master, self.registry.get(device_id), t0, self.rng)
        return cred

    def trust_of(self, device_id: str) -> list[float]:
        return list(self.registry.get(device_id).trust)

    def signature_of(self, device_id: str) -> TrustSignature:
        self.registry.get(device_id)
        return self._signatures[device_id]

    # -- receipts -------------------------------------------------------------

    def verify_receipt(self, receipt: Receipt, now: float) -> bool:
        owner = self.registry.get(receipt.owner_id)
        rater = self.registry.get(receipt.peer_id)
        age = now - receipt.t0
        if age < 0 or age > self.freshness_window:
            raise StaleReceipt(f"receipt {receipt.owner_id}#{receipt.txn_index} has age {age}")
        q = self.params.group.order
        h = receipt_digest(self.params, receipt)
        k = owner.d * h * pow(rater.d, -1, q) % q
        return k * receipt.T2 == receipt.T1

    def adjust_trust(self, receipt: Receipt, now: float) -> list[float]:
        key = (receipt.owner_id, receipt.txn_index)
        if key in self._seen:
            raise DuplicateReceipt(f"{receipt.owner_id}#{receipt.txn_index} already processed")
        if not self.verify_receipt(receipt, now):
            raise InvalidReceipt(f"{receipt.owner_id}#{receipt.txn_index} failed verification")
        rater = self.registry.get(receipt.peer_id)
        try:
            r = decode_rating(
                crypto.dec(rating_key(self.params, rater.d), receipt.er, aad=receipt_context(receipt)))
        except (AuthFailure, ValueError, struct.error) as exc:
            raise InvalidReceipt(f"rating does not decrypt: {exc}") from exc
        tp = self.trust_params
        if receipt.lam.dim != tp.n_types:
            raise InvalidReceipt("transaction type dimension mismatch")
        if not (0.0 <= receipt.q <= 1.0 and 0.0 <= receipt.c <= 1.0):
            raise InvalidReceipt("QoS and credibility must lie in [0, 1]")
        delta = behavior_estimate(receipt.q, receipt.c, r, receipt.lam, tp, receipt.owner_role)
        owner = self.registry.get(receipt.owner_id)
        if any(delta):
            owner.trust = update_trust(owner.trust, delta, tp.c_g)
        self._seen.add(key)
        self._cycle_accepted[owner.device_id] = self._cycle_accepted.get(owner.device_id, 0) + 1
        return list(owner.trust)

    def sign(self, device_id: str) -> TrustSignature:
        entry = self.registry.get(device_id)
        sig = sign_trust(self.params, self.master, entry, entry.trust, self.rng)
        self._signatures[device_id] = sig
        return sig

    def process_receipts(self, receipts, now: float) -> tuple[list[str], list[dict]]:
        """Apply a batch of uploads in per-device index order and re-sign changed devices.

        Returns (ids of re-signed devices, rejection records).
        """
        rejected, touched = [], set()
        for rc in sorted(receipts, key=lambda r: (r.owner_id, r.txn_index)):
            try:
                before = self.registry.get(rc.owner_id).trust
                after = self.adjust_trust(rc, now)
                if after != before:
                    touched.add(rc.owner_id)
            except (InvalidReceipt, DuplicateReceipt, StaleReceipt, UnknownDevice) as exc:
                log.debug("rejected receipt %s#%s: %s", rc.owner_id, rc.txn_index, exc)
                self._cycle_rejected[rc.owner_id] = self._cycle_rejected.get(rc.owner_id, 0) + 1
                rejected.append({"owner_id": rc.owner_id, "txn_index": rc.txn_index,
                                 "reason": type(exc).__name__})
        self._cycle_rejections.extend(rejected)
        for dev in sorted(touched):
            self.sign(dev)
        return sorted(touched), rejected

    def run_trust_cycle(self, receipts, now: float) -> CycleReport:
        """Close the current cycle: process pending receipts, recompute the
        average transaction count and emit signed trust snapshots."""
        self.process_receipts(receipts, now)
        rejected = list(self._cycle_rejections)
        ids = self.registry.ids()
        total = sum(self._cycle_accepted.values())
        old = self.sigma_bar
        if total > 0 and ids:
            self.sigma_bar = total / len(ids)
        devices = []
        for dev in ids:
            trust = self.trust_of(dev)
            devices.append({
                "device_id": dev,
                "trust": trust,
                "trust_digest": trust_digest(trust),
                "signature": self.signature_of(dev).to_dict(),
                "accepted": self._cycle_accepted.get(dev, 0),
                "rejected": self._cycle_rejected.get(dev, 0),
            })
        report = CycleReport(
            cycle=self.cycle,
            sigma_bar=old,
            next_sigma_bar=self.sigma_bar,
            accepted=sum(self._cycle_accepted.values()),
            rejected=rejected,
            devices=devices,
        )
        self.cycle += 1
        self._cycle_accepted.clear()
        self._cycle_rejected.clear()
        self._cycle_rejections.clear()
        return report
