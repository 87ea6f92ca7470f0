"""Backend signatures over device trustvalues.

The backend signs the quantized sum of the trust vector as
T4 = l * s / (x + r) mod q and T5 = l * P; anyone holding the device's
public ``R`` checks T4 * (P_pub + R) == s * T5.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Sequence

from .credentials import BsRegistryEntry, MasterKey, PublicKey, SystemParams
from .crypto import scalar_random
from .ec import Point

QUANT_SCALE = 10**6


class DegenerateKey(Exception):
    """x + r is zero mod q; the device has to re-register."""


@dataclass(frozen=True)
class TrustSignature:
    T4: int
    T5: Point
    scale: int = QUANT_SCALE

    def to_dict(self) -> dict:
        g = self.T5.group
        return {"T4": g.encode_scalar(self.T4).hex(), "T5": g.encode_point(self.T5).hex(), "scale": self.scale}


def quantize_trust(trust: Sequence[float], scale: int = QUANT_SCALE) -> int:
    """Fixed-point image of t . u with u the all-ones vector."""
    return round(sum(trust) * scale)


def sign_trust(
    params: SystemParams,
    master: MasterKey,
    entry: BsRegistryEntry,
    trust: Sequence[float],
    rng: random.Random,
) -> TrustSignature:
    q = params.group.order
    denom = (master.x + entry.r_reg) % q
    if denom == 0:
        raise DegenerateKey(entry.device_id)
    s = quantize_trust(trust)
    if s <= 0:
        raise ValueError("trust vector quantizes to zero; refusing to sign")
    l_bs = scalar_random(params.group, rng)
    T4 = l_bs * s * pow(denom, -1, q) % q
    return TrustSignature(T4, l_bs * params.P)


def verify_trust_signature(
    params: SystemParams, pk: PublicKey, claimed_trust: Sequence[float], sig: TrustSignature
) -> bool:
    if sig is None or sig.scale != QUANT_SCALE or sig.T5.is_identity:
        return False
    s = quantize_trust(claimed_trust)
    if s <= 0:
        return False
    return sig.T4 * (params.p_pub + pk.R) == s * sig.T5
