"""Executable adversaries for the channel (CO1-CO3) and trust (TO1-TO3) attack models.

Each scenario attempts the attack a number of times and counts violations, i.e.
trials where the attacker got what it wanted.  A scenario passes with zero
violations.
"""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field

from . import crypto
from .backend import BackendServer
from .credentials import Credential, combined_public_point
from .crypto import AuthFailure, scalar_random
from .pairing import (
    Candidate, Challenge, KeyShare, NoCandidates, PairingError, PairingSession, Response,
    Role, State, run_pairing, select_peer, session_key,
)
from .receipts import generate_receipt
from .signatures import TrustSignature
from .trust import ContactHistory, TransactionType, TrustParams, credibility, damping_cutoff

SCENARIOS = ("co1", "co2", "co3", "to1", "to2", "to3")


@dataclass
class ScenarioResult:
    scenario: str
    trials: int
    violations: int
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.trials > 0 and self.violations == 0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{self.scenario}: {status} ({self.violations}/{self.trials} violations)"

    def to_dict(self) -> dict:
        return {"scenario": self.scenario, "passed": self.passed, "trials": self.trials,
                "violations": self.violations, "details": self.details}


def _world(seed: int, n: int = 3, trust_params: TrustParams | None = None):
    rng = random.Random(f"{seed}:adversary")
    bs = BackendServer.setup(trust_params or TrustParams(), rng)
    creds = [bs.register(f"dev{i}") for i in range(n)]
    return bs, creds, rng


# -- CO1: passive transcript observer --------------------------------------------

def _observer_points(params, a: KeyShare, b: KeyShare) -> list:
    """Every point an observer can form from the transcript without a private scalar:
    the public points, their h0-weighted forms, and pairwise sums and differences."""
    base = [params.P, params.p_pub, a.pk.P_dev, a.pk.R, b.pk.P_dev, b.pk.R, a.U, b.U,
            combined_public_point(params, a.sender_id, a.pk),
            combined_public_point(params, b.sender_id, b.pk)]
    g = params.group
    for ks in (a, b):
        h = params.hashes.h0(crypto.encode_id(ks.sender_id) + g.encode_point(ks.pk.R) + g.encode_point(ks.pk.P_dev))
        base.append(h * params.p_pub)
    out = list(base)
    for x, y in itertools.combinations(base, 2):
        out.extend((x + y, x - y, y - x))
    return [p for p in dict.fromkeys(out) if not p.is_identity]


def co1_observer(trials: int = 20, seed: int = 0) -> ScenarioResult:
    bs, (ca, cb, _), rng = _world(seed)
    params = bs.params
    hits = tried = 0
    for _ in range(trials):
        sa = PairingSession(params, ca, Role.INITIATOR, rng)
        sb = PairingSession(params, cb, Role.RESPONDER, rng)
        ka, kb_share = sa.key_share(), sb.key_share()
        k = run_pairing(sa, sb)
        pts = _observer_points(params, ka, kb_share)
        for v1, v2 in itertools.product(pts, repeat=2):
            tried += 1
            if session_key(params, ca.device_id, v1, cb.device_id, v2) == k:
                hits += 1
    return ScenarioResult("co1", trials, hits, {"key_guesses": tried})


# -- CO2: impersonation with the victim's public key only ------------------------

def _drive(init: PairingSession, resp: PairingSession) -> None:
    try:
        run_pairing(init, resp)
    except (PairingError, AuthFailure):
        pass


def co2_impersonation(trials: int = 200, seed: int = 0) -> ScenarioResult:
    """The attacker claims the victim's id and public key but holds made-up secrets.

    Variants alternate between reusing the victim's P_dev with a random secret
    and substituting a fresh P_dev of its own under the victim's R.
    """
    bs, (victim, honest, _), rng = _world(seed)
    params, group = bs.params, bs.params.group
    violations = 0
    for t in range(trials):
        if t % 2 == 0:
            fake = Credential(victim.device_id, scalar_random(group, rng), victim.P_dev, victim.R,
                              scalar_random(group, rng))
        else:
            x = scalar_random(group, rng)
            fake = Credential(victim.device_id, x, x * params.P, victim.R, scalar_random(group, rng))
        if (t // 2) % 2 == 0:
            m = PairingSession(params, fake, Role.INITIATOR, rng)
            h = PairingSession(params, honest, Role.RESPONDER, rng)
            _drive(m, h)
        else:
            h = PairingSession(params, honest, Role.INITIATOR, rng)
            m = PairingSession(params, fake, Role.RESPONDER, rng)
            _drive(h, m)
        if h.state is State.CONFIRMED:
            violations += 1
    return ScenarioResult("co2", trials, violations)


# -- CO3: message-rewriting man in the middle ---------------------------------

_MITM_STRATEGIES = ("swap_U", "swap_pk", "swap_pk_and_U", "inject_challenge", "tamper_ciphertext", "replay_challenge")


def _flip(ct: bytes, rng: random.Random) -> bytes:
    i = rng.randrange(len(ct))
    return ct[:i] + bytes([ct[i] ^ (1 << rng.randrange(8))]) + ct[i + 1:]


def co3_mitm(trials: int = 200, seed: int = 0) -> ScenarioResult:
    """An adversary with its own valid credential sits between two honest devices
    and rewrites their messages while keeping the claimed identities.

    Tampering with only the final confirmation is left out: the initiator has
    already confirmed a key the adversary does not know, so it gains nothing.
    """
    bs, (ca, cb, cm), rng = _world(seed)
    params = bs.params
    violations, per_strategy = 0, {s: 0 for s in _MITM_STRATEGIES}
    old_challenge = None
    for t in range(trials):
        strategy = _MITM_STRATEGIES[t % len(_MITM_STRATEGIES)]
        flip_challenge = (t // len(_MITM_STRATEGIES)) % 2 == 0
        a = PairingSession(params, ca, Role.INITIATOR, rng)
        b = PairingSession(params, cb, Role.RESPONDER, rng)
        ml = scalar_random(params.group, rng)
        mU = ml * params.P
        ka, kb = a.key_share(), b.key_share()
        if strategy in ("swap_U", "swap_pk_and_U"):
            ka, kb = KeyShare(ka.sender_id, ka.pk, mU), KeyShare(kb.sender_id, kb.pk, mU)
        if strategy in ("swap_pk", "swap_pk_and_U"):
            ka, kb = KeyShare(ka.sender_id, cm.pk, ka.U), KeyShare(kb.sender_id, cm.pk, kb.U)
        try:
            b.accept_key_share(ka)
            a.accept_key_share(kb)
            ch = a.make_challenge()
            if strategy == "inject_challenge":
                # best key the adversary can compute: its own ephemeral against b's public point
                guess = session_key(params, ca.device_id, ml * combined_public_point(params, cb.device_id, cb.pk),
                                    cb.device_id, b.U)
                ch = Challenge(crypto.enc(guess, rng.randbytes(16), rng))
            elif strategy == "replay_challenge" and old_challenge is not None:
                ch = old_challenge
            elif strategy == "tamper_ciphertext" and flip_challenge:
                ch = Challenge(_flip(ch.C, rng))
            if strategy != "replay_challenge":
                old_challenge = ch
            resp = b.answer_challenge(ch)
            if strategy == "tamper_ciphertext" and not flip_challenge:
                resp = Response(_flip(resp.F, rng))
            b.verify_confirm(a.verify_response(resp))
        except (PairingError, AuthFailure):
            pass
        if a.state is State.CONFIRMED or b.state is State.CONFIRMED:
            violations += 1
            per_strategy[strategy] += 1
    return ScenarioResult("co3", trials, violations, {"per_strategy": per_strategy})


# -- TO1: forged trustvalue advertisement -------------------------------------

_FORGERIES = ("own_stale", "copied", "random")


def to1_forgery(trials: int = 200, seed: int = 0, forged_value: float = 0.99) -> ScenarioResult:
    """A forger advertises ``forged_value`` next to honest candidates with lower trust.

    The forged advertisement carries a signature the BS never issued for it: the
    forger's own signature on its real trust, one copied from another device, or
    random components.
    """
    bs, creds, rng = _world(seed, n=7)
    params, group = bs.params, bs.params.group
    n_types = bs.trust_params.n_types
    violations = 0
    for t in range(trials):
        kind = _FORGERIES[t % len(_FORGERIES)]
        honest = rng.sample(creds[1:], rng.randint(1, 6))
        forger = creds[0]
        offers = []
        for c in honest:
            trust = [rng.uniform(0.05, 0.9) for _ in range(n_types)]
            entry = bs.registry.get(c.device_id)
            entry.trust = trust
            offers.append(Candidate(c.device_id, c.pk, tuple(trust), bs.sign(c.device_id)))
        if kind == "own_stale":
            sig = bs.signature_of(forger.device_id)
        elif kind == "copied":
            sig = bs.signature_of(honest[0].device_id)
        else:
            sig = TrustSignature(scalar_random(group, rng), scalar_random(group, rng) * params.P)
        offers.append(Candidate(forger.device_id, forger.pk, (forged_value,) * n_types, sig))
        rng.shuffle(offers)
        try:
            chosen = select_peer(params, offers, rng.randrange(n_types))
        except NoCandidates:
            chosen = None
        if chosen == forger.device_id:
            violations += 1
    return ScenarioResult("to1", trials, violations)


def signature_rescaling(seed: int = 0, target: float = 0.99) -> bool:
    """Whether a device can turn its own genuine trust signature into one for ``target``.

    Outside the TO1 model above: T4 is linear in the quantized trust and T5 does not
    bind it, so T4 * s' / s verifies for s'.  Returns True when the rescaled
    signature verifies.
    """
    from .signatures import quantize_trust, verify_trust_signature

    bs, (cred, *_), rng = _world(seed, n=1)
    q = bs.params.group.order
    sig = bs.signature_of(cred.device_id)
    s_old = quantize_trust(bs.trust_of(cred.device_id))
    claimed = (target,) * bs.trust_params.n_types
    forged = TrustSignature(sig.T4 * quantize_trust(claimed) * pow(s_old, -1, q) % q, sig.T5)
    return verify_trust_signature(bs.params, cred.pk, claimed, forged)


# -- TO2: continuous negative ratings (simulation) --------------------------------

def to2_suppression(seeds=(0,), config=None) -> ScenarioResult:
    """Baseline vs continuous TO2 runs; a violation is a seed where the attackers'
    mean final trust is not strictly below the same devices' baseline mean."""
    from .sim.config import SimConfig
    from .sim.engine import run

    base_cfg = config or SimConfig()
    violations, rows = 0, []
    for seed in seeds:
        base = run(base_cfg.replace(seed=seed, attacker_model="none"))
        atk = run(base_cfg.replace(seed=seed, attacker_model="TO2", attack_intensity=1.0))
        b, a = base.mean_trust(atk.attackers), atk.mean_trust(atk.attackers)
        if not a < b:
            violations += 1
        rows.append({"seed": seed, "attackers": list(atk.attackers),
                     "attacker_baseline": b, "attacker_attack": a,
                     "benign_baseline": base.mean_trust(atk.benign), "benign_attack": atk.mean_trust(atk.benign),
                     "false_positives": atk.false_positives,
                     "baseline_attracted": base.attracted(atk.attackers)})
    return ScenarioResult("to2", len(rows), violations, {"runs": rows})


# -- TO3: colluding pair ----------------------------------------------------------

def colluder_trace(trust_params: TrustParams | None = None, extra: int = 10, seed: int = 0) -> list[dict]:
    """Two colluders transact repeatedly, rating each other +1, through pairing,
    receipts and the backend.  One row per transaction with the pair's prior
    transaction count, the credibility used and both trustvalues afterwards."""
    tp = trust_params or TrustParams(task_types=["service"], pattern_map={"service": (0, 1)})
    bs, (c1, c2), rng = _world(seed, n=2, trust_params=tp)
    params = bs.params
    cutoff = damping_cutoff(tp.c_w, bs.sigma_bar)
    h1, h2 = ContactHistory(), ContactHistory()
    lam = TransactionType(0, 0.5, tp.n_types)
    rows, idx = [], {c1.device_id: 0, c2.device_id: 0}
    for n in range(cutoff + 1 + extra):
        req, peer = (c1, c2) if n % 2 == 0 else (c2, c1)
        sa = PairingSession(params, req, Role.INITIATOR, rng)
        sb = PairingSession(params, peer, Role.RESPONDER, rng)
        run_pairing(sa, sb)
        sigma = h1.transactions_with(c2.device_id)
        c = credibility(h1, h2, sigma, tp, sigma_bar=bs.sigma_bar)
        q = 1.0
        for h, other in ((h1, c2.device_id), (h2, c1.device_id)):
            h.record_rating(other, 1)
            h.record_transaction(other)
        receipts = [
            generate_receipt(sa, q, c, 1, lam, float(n), idx[peer.device_id], rng),
            generate_receipt(sb, q, c, 1, lam, float(n), idx[req.device_id], rng),
        ]
        idx[req.device_id] += 1
        idx[peer.device_id] += 1
        _, rejected = bs.process_receipts(receipts, float(n))
        rows.append({"n": n, "sigma": sigma, "credibility": c, "cutoff": cutoff, "rejected": len(rejected),
                     "trust": {c1.device_id: bs.trust_of(c1.device_id)[0], c2.device_id: bs.trust_of(c2.device_id)[0]}})
    return rows


def to3_damping(extra: int = 10, seed: int = 0, trust_params: TrustParams | None = None) -> ScenarioResult:
    """Violations: transactions past the cutoff with nonzero credibility or a trust change,
    and transactions up to the cutoff with zero credibility."""
    rows = colluder_trace(trust_params, extra, seed)
    violations, prev = 0, None
    for row in rows:
        past = row["sigma"] > row["cutoff"]
        if past and (row["credibility"] != 0.0 or (prev is not None and row["trust"] != prev)):
            violations += 1
        if not past and row["credibility"] <= 0.0:
            violations += 1
        prev = row["trust"]
    first_zero = next((r["n"] for r in rows if r["credibility"] == 0.0), None)
    return ScenarioResult("to3", len(rows), violations,
                          {"cutoff": rows[0]["cutoff"], "first_zero_transaction": first_zero,
                           "final_trust": rows[-1]["trust"]})


def run_scenario(name: str, trials: int = 200, seed: int = 0, seeds=None) -> ScenarioResult:
    name = name.lower()
    if name == "co1":
        return co1_observer(min(trials, 20), seed)
    if name == "co2":
        return co2_impersonation(trials, seed)
    if name == "co3":
        return co3_mitm(trials, seed)
    if name == "to1":
        return to1_forgery(trials, seed)
    if name == "to2":
        return to2_suppression(seeds if seeds is not None else (seed,))
    if name == "to3":
        return to3_damping(seed=seed)
    raise ValueError(f"unknown scenario {name!r}; expected one of {', '.join(SCENARIOS)}")
