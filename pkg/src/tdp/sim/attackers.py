"""Traffic-oriented attacker behaviors."""
from __future__ import annotations

import random
from dataclasses import dataclass

FORGED_TRUST = 0.99


@dataclass
class AttackContext:
    """What an attacker knows when it acts: who it is dealing with and the
    rating an honest device would have given."""

    attacker_id: str
    other_id: str
    honest_rating: int
    colluders: frozenset = frozenset()


@dataclass(frozen=True)
class Override:
    rating: int | None = None
    advertise: tuple | None = None


def attacker_behavior(model: str, intensity: float, rng: random.Random, context: AttackContext,
                      n_types: int = 1, action: str = "rate") -> Override | None:
    """Decide whether the attacker deviates on this transaction and how.

    ``action`` is ``"rate"`` when the attacker is about to rate its peer and
    ``"advertise"`` when it presents its trustvalue as a candidate.  Returns None
    when it behaves honestly.  One random draw per call, so the override
    frequency equals ``intensity``.
    """
    if model == "none":
        return None
    if rng.random() >= intensity:
        return None
    if action == "advertise":
        if model == "TO1":
            return Override(advertise=(FORGED_TRUST,) * n_types)
        return None
    if model == "TO2":
        return Override(rating=-1)
    if model == "TO3":
        return Override(rating=1 if context.other_id in context.colluders else -1)
    return None
