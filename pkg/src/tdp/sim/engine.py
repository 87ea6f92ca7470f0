"""Trace-driven simulation of a D2D crowdsourcing system under attack.

Every contact window lets one of its two endpoints post a request.  The
requester picks among all devices it is currently in contact with by signed
trustvalue, pairs with the chosen peer, both rate each other, and each produces
the other's receipt.  Receipts reach the backend at upload ticks; trust-cycle
boundaries additionally reset contact histories and refresh sigma_bar.
"""
from __future__ import annotations

import heapq
import logging
import math
import random
from dataclasses import dataclass, field

from ..backend import BackendServer
from ..credentials import Credential, combined_public_point, partial_public_point
from ..pairing import Candidate, NoCandidates, PairingError, PairingSession, Role, run_pairing, select_peer
from ..receipts import generate_receipt
from ..signatures import TrustSignature, verify_trust_signature
from ..trust import (
    BehaviorEwma,
    ContactHistory,
    TransactionType,
    bootstrap_beta,
    credibility,
    rate,
)
from .attackers import AttackContext, attacker_behavior
from .config import ConfigError, SimConfig
from .trace import TraceEvent, contact_rate_for, device_ids, load_trace, synth_trace

log = logging.getLogger(__name__)


@dataclass
class Device:
    cred: Credential
    history: ContactHistory = field(default_factory=ContactHistory)
    ewma: BehaviorEwma = field(default_factory=BehaviorEwma)
    trust: tuple = ()
    signature: TrustSignature | None = None
    txn_index: int = 0
    requests: int = 0
    transactions: int = 0
    attacker: bool = False

    @property
    def id(self) -> str:
        return self.cred.device_id


@dataclass(frozen=True)
class TxnLog:
    time: float
    requester: str
    peer: str
    q: float
    c: float
    sigma: int
    rating_of_peer: int
    rating_of_requester: int
    false_positive: bool


@dataclass
class MetricsRecord:
    config: dict
    devices: list
    attackers: list
    task_index: int
    final_trust: dict = field(default_factory=dict)
    trust_series: list = field(default_factory=list)
    transactions: list = field(default_factory=list)
    fp_series: list = field(default_factory=list)
    txn_counts: dict = field(default_factory=dict)
    sigma_bars: list = field(default_factory=list)
    failed_pairings: int = 0
    no_candidate: int = 0
    forged_offers: int = 0
    forged_selected: int = 0
    rejected_receipts: int = 0
    accepted_receipts: int = 0

    @property
    def benign(self) -> list:
        atk = set(self.attackers)
        return [d for d in self.devices if d not in atk]

    @property
    def false_positives(self) -> int:
        return self.fp_series[-1][1] if self.fp_series else 0

    def mean_trust(self, cohort) -> float:
        vals = [self.final_trust[d] for d in cohort]
        return sum(vals) / len(vals) if vals else float("nan")

    def attracted(self, cohort, until: float | None = None) -> int:
        """Transactions in which a device outside ``cohort`` selected one inside it."""
        cohort = set(cohort)
        return sum(
            1
            for t in self.transactions
            if t.peer in cohort and t.requester not in cohort and (until is None or t.time <= until)
        )


def _qos(config: SimConfig, window: float, norm: float) -> float:
    if config.qos_model == "constant":
        return config.qos_constant
    if config.qos_model == "data_volume":
        return min(1.0, window * config.data_rate / (norm * config.data_rate))
    return min(1.0, window / norm)


def _percentile(values, pct: float) -> float:
    vals = sorted(values)
    if not vals:
        return 1.0
    k = (len(vals) - 1) * pct
    lo, hi = math.floor(k), math.ceil(k)
    return vals[lo] + (vals[hi] - vals[lo]) * (k - lo)


def build_trace(config: SimConfig) -> list[TraceEvent]:
    if config.trace_path:
        return load_trace(config.trace_path, config.trace_layout, config.trace_granularity)
    rate_ = contact_rate_for(config.n_devices, config.duration, config.expected_contacts)
    return synth_trace(
        config.n_devices, config.duration, rate_, random.Random(f"{config.seed}:trace"),
        config.mean_contact_duration,
    )


def choose_attackers(config: SimConfig, ids: list[str]) -> list[str]:
    if config.attacker_model == "none":
        return []
    k = max(1, round(config.attacker_pct * len(ids)))
    if config.attacker_selection == "random":
        return sorted(random.Random(f"{config.seed}:attackers").sample(ids, k))
    base = run(config.replace(attacker_model="none"))
    if config.attacker_selection == "topTV":
        key = lambda d: (-base.final_trust[d], d)
    else:
        key = lambda d: (-base.txn_counts[d], d)
    return sorted(sorted(ids, key=key)[:k])


class Simulation:
    def __init__(self, config: SimConfig, events: list[TraceEvent] | None = None):
        self.config = config
        self.events = events if events is not None else build_trace(config)
        self.ids = device_ids(self.events)
        if len(self.ids) < 2:
            raise ConfigError("trace has fewer than two devices")
        self.tp = config.trust
        self.task_index = self.tp.task_index(config.task_type)
        self.lam = TransactionType(self.task_index, config.task_value, self.tp.n_types)
        self.crypto_rng = random.Random(f"{config.seed}:crypto")
        self.attack_rng = random.Random(f"{config.seed}:attack")
        self.bs = BackendServer.setup(self.tp, self.crypto_rng, freshness_window=config.freshness)
        self.devices: dict[str, Device] = {}
        for dev_id in self.ids:
            cred = self.bs.register(dev_id)
            params = self.bs.params
            # every partner multiplies by these points; precompute their tables
            params.group.precompute(combined_public_point(params, dev_id, cred.pk))
            params.group.precompute(partial_public_point(params, dev_id, cred.pk))
            self.devices[dev_id] = Device(
                cred,
                ewma=BehaviorEwma(self.tp.ewma_weight),
                trust=tuple(self.bs.trust_of(dev_id)),
                signature=self.bs.signature_of(dev_id),
            )
        self.attackers = set(choose_attackers(config, self.ids))
        for a in self.attackers:
            self.devices[a].attacker = True
        self.qos_norm = _percentile([ev.duration for ev in self.events], 0.95)
        self._verified: dict = {}
        self.pending: list = []
        self.record = MetricsRecord(
            config=config.to_dict(),
            devices=list(self.ids),
            attackers=sorted(self.attackers),
            task_index=self.task_index,
        )
        self._fp = 0

    # -- helpers ------------------------------------------------------------

    def _verify(self, params, pk, trust, sig) -> bool:
        # signatures are deterministic to check; memoize per (key, claim, signature)
        key = (pk.R.x, tuple(trust), sig.T4 if sig else None, sig.T5.x if sig else None)
        hit = self._verified.get(key)
        if hit is None:
            hit = self._verified[key] = verify_trust_signature(params, pk, trust, sig)
        return hit

    def _advertisement(self, dev: Device) -> tuple[tuple, bool]:
        if dev.attacker and self.config.attacker_model == "TO1":
            ov = attacker_behavior(
                "TO1", self.config.attack_intensity, self.attack_rng,
                AttackContext(dev.id, "", 0), self.tp.n_types, action="advertise",
            )
            if ov is not None:
                return ov.advertise, True
        return dev.trust, False

    def _rating(self, rater: Device, other: Device, honest: int) -> int:
        if not rater.attacker or self.config.attacker_model not in ("TO2", "TO3"):
            return honest
        ov = attacker_behavior(
            self.config.attacker_model, self.config.attack_intensity, self.attack_rng,
            AttackContext(rater.id, other.id, honest, frozenset(self.attackers)),
        )
        return honest if ov is None else ov.rating

    def _upload(self, now: float, close_cycle: bool) -> None:
        batch, self.pending = self.pending, []
        if close_cycle:
            report = self.bs.run_trust_cycle(batch, now)
            self.record.rejected_receipts += len(report.rejected)
            self.record.accepted_receipts += report.accepted
            self.record.sigma_bars.append(report.next_sigma_bar)
            for dev in self.devices.values():
                dev.history.reset()
        else:
            self.bs.process_receipts(batch, now)
        for dev in self.devices.values():
            dev.trust = tuple(self.bs.trust_of(dev.id))
            dev.signature = self.bs.signature_of(dev.id)
        for dev_id in self.ids:
            self.record.trust_series.append((now, dev_id, self.devices[dev_id].trust[self.task_index]))

    # -- main loop ----------------------------------------------------------

    def run(self) -> MetricsRecord:
        cfg = self.config
        ticks = []
        t = cfg.upload_interval
        while t < cfg.duration:
            ticks.append(t)
            t += cfg.upload_interval
        cycles = []
        t = cfg.cycle
        while t < cfg.duration:
            cycles.append(t)
            t += cfg.cycle
        boundaries = sorted({(x, False) for x in ticks if x not in cycles} | {(x, True) for x in cycles})
        boundaries.append((cfg.duration, True))
        bi = 0
        active: dict[str, dict[str, float]] = {d: {} for d in self.ids}
        ends: list = []
        self.record.sigma_bars.append(self.bs.sigma_bar)

        for ev in self.events:
            if ev.t_start >= cfg.duration:
                break
            while bi < len(boundaries) and boundaries[bi][0] <= ev.t_start:
                self._upload(*boundaries[bi])
                bi += 1
            while ends and ends[0][0] <= ev.t_start:
                t_end, i, j = heapq.heappop(ends)
                if active[i].get(j) == t_end:
                    del active[i][j]
                    del active[j][i]
            active[ev.node_i][ev.node_j] = ev.t_end
            active[ev.node_j][ev.node_i] = ev.t_end
            heapq.heappush(ends, (ev.t_end, ev.node_i, ev.node_j))
            if ev.duration < cfg.min_contact:
                continue
            a, b = self.devices[ev.node_i], self.devices[ev.node_j]
            requester = min((a, b), key=lambda d: (d.requests, d.id))
            requester.requests += 1
            cands = sorted(active[requester.id])
            if cfg.prototype_exclusion and len(cands) > 1:
                cands.pop(requester.requests % len(cands))
            self._transact(requester, cands, ev)

        while bi < len(boundaries):
            self._upload(*boundaries[bi])
            bi += 1
        rec = self.record
        rec.final_trust = {d: self.devices[d].trust[self.task_index] for d in self.ids}
        rec.txn_counts = {d: self.devices[d].transactions for d in self.ids}
        return rec

    def _transact(self, req: Device, cand_ids: list[str], ev: TraceEvent) -> None:
        params = self.bs.params
        offers, forged = [], set()
        for cid in cand_ids:
            dev = self.devices[cid]
            trust, is_forged = self._advertisement(dev)
            if is_forged:
                forged.add(cid)
                self.record.forged_offers += 1
            offers.append(Candidate(cid, dev.cred.pk, trust, dev.signature))
        try:
            peer_id = select_peer(params, offers, self.task_index, verify=self._verify)
        except NoCandidates:
            self.record.no_candidate += 1
            return
        if peer_id in forged:
            self.record.forged_selected += 1
        peer = self.devices[peer_id]

        sa = PairingSession(params, req.cred, Role.INITIATOR, self.crypto_rng)
        sb = PairingSession(params, peer.cred, Role.RESPONDER, self.crypto_rng)
        try:
            run_pairing(sa, sb)
        except PairingError:
            self.record.failed_pairings += 1
            return

        q = _qos(self.config, ev.duration, self.qos_norm)
        sigma = req.history.transactions_with(peer.id)
        c = credibility(req.history, peer.history, sigma, self.tp, sigma_bar=self.bs.sigma_bar)
        beta = bootstrap_beta(req.history, peer.history, self.tp.beta)
        r_peer = self._rating(req, peer, rate(q, c, req.ewma, beta))
        r_req = self._rating(peer, req, rate(q, c, peer.ewma, beta))

        req.history.record_rating(peer.id, r_peer)
        peer.history.record_rating(req.id, r_req)
        req.history.record_transaction(peer.id)
        peer.history.record_transaction(req.id)
        req.ewma.update(q, c)
        peer.ewma.update(q, c)

        t0 = ev.t_start
        self.pending.append(generate_receipt(sb, q, c, r_req, self.lam, t0, req.txn_index, self.crypto_rng))
        self.pending.append(generate_receipt(sa, q, c, r_peer, self.lam, t0, peer.txn_index, self.crypto_rng))
        req.txn_index += 1
        peer.txn_index += 1
        req.transactions += 1
        peer.transactions += 1

        fp = peer.attacker and not req.attacker
        if fp:
            self._fp += 1
            self.record.fp_series.append((ev.t_start, self._fp))
        self.record.transactions.append(
            TxnLog(ev.t_start, req.id, peer.id, q, c, sigma, r_peer, r_req, fp)
        )


def run(config: SimConfig, events: list[TraceEvent] | None = None) -> MetricsRecord:
    return Simulation(config, events).run()
