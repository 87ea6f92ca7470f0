import dataclasses
import math
import random

import pytest

from tdp.backend import BackendServer, DuplicateReceipt, InvalidReceipt, StaleReceipt
from tdp.crypto import AuthFailure
from tdp.pairing import PairingSession, Role, run_pairing
from tdp.receipts import (
    Receipt, SessionNotConfirmed, encode_rating, generate_receipt, load_receipts, rating_key,
    receipt_digest, save_receipts,
)
from tdp.credentials import partial_public_point
from tdp import crypto
from tdp.signatures import verify_trust_signature
from tdp.trust import INITIATOR, PEER, TransactionType, TrustParams


def _session(bs, a, b, rng):
    sa = PairingSession(bs.params, a, Role.INITIATOR, rng)
    sb = PairingSession(bs.params, b, Role.RESPONDER, rng)
    run_pairing(sa, sb)
    return sa, sb


def _receipts(bs, a, b, rng, rating=1, task=0, q=0.8, c=0.7, t0=0.0, idx=(0, 0)):
    """(receipt owned by a, receipt owned by b) for one a->b transaction."""
    sa, sb = _session(bs, a, b, rng)
    lam = TransactionType(task, 0.5, bs.trust_params.n_types)
    owned_by_a = generate_receipt(sb, q, c, rating, lam, t0, idx[0], rng)
    owned_by_b = generate_receipt(sa, q, c, rating, lam, t0, idx[1], rng)
    return owned_by_a, owned_by_b


def test_receipt_roles_and_verification(world):
    bs, (a, b, _), rng = world
    ra, rb = _receipts(bs, a, b, rng)
    assert (ra.owner_id, ra.peer_id, ra.owner_role) == ("alice", "bob", INITIATOR)
    assert (rb.owner_id, rb.peer_id, rb.owner_role) == ("bob", "alice", PEER)
    assert bs.verify_receipt(ra, 1.0) and bs.verify_receipt(rb, 1.0)


def test_every_field_mutation_fails(world):
    bs, (a, b, c), rng = world
    ra, _ = _receipts(bs, a, b, rng)
    other, _ = _receipts(bs, a, b, rng, idx=(1, 1))
    flipped_er = ra.er[:-1] + bytes([ra.er[-1] ^ 1])
    reenc = crypto.enc(rating_key(bs.params, b.d), encode_rating(-1), rng)
    mutations = {
        "owner_id": "carol", "peer_id": "carol", "owner_role": PEER,
        "q": math.nextafter(ra.q, 1.0), "c": math.nextafter(ra.c, 0.0), "er": flipped_er,
        "lam": TransactionType(1, 0.5, 2), "t0": ra.t0 + 1e-6, "T1": other.T1, "T2": other.T2,
        "txn_index": 7,
    }
    assert set(mutations) | {"T3"} == {f.name for f in dataclasses.fields(Receipt)}
    for name, value in mutations.items():
        assert not bs.verify_receipt(ra.mutate(**{name: value}), 5.0), name
    assert not bs.verify_receipt(ra.mutate(er=reenc), 5.0)
    assert not bs.verify_receipt(ra.mutate(T1=2 * ra.T1), 5.0)


def test_receipt_rebuilt_from_public_points_is_rejected(world):
    bs, (a, b, _), rng = world
    ra, _ = _receipts(bs, a, b, rng)
    l = 12345
    for change in ({"q": 1.0}, {"txn_index": 9}, {"owner_role": PEER}):
        forged = ra.mutate(**change)
        h = receipt_digest(bs.params, forged)
        forged = forged.mutate(T2=l * partial_public_point(bs.params, b.device_id, b.pk),
                               T1=(l * h) * partial_public_point(bs.params, a.device_id, a.pk))
        assert bs.verify_receipt(forged, 1.0)
        with pytest.raises(InvalidReceipt, match="decrypt"):
            bs.adjust_trust(forged, 1.0)
    bs.adjust_trust(ra, 1.0)


def test_adjust_trust_monotone_and_pattern(world):
    bs, (a, b, _), rng = world
    t_a, t_b = bs.trust_of("alice"), bs.trust_of("bob")
    ra, rb = _receipts(bs, a, b, rng, task=1)  # packet-delivery: (1, 0)
    bs.adjust_trust(ra, 1.0)
    bs.adjust_trust(rb, 1.0)
    assert bs.trust_of("alice")[1] > t_a[1] and bs.trust_of("alice")[0] == t_a[0]
    assert bs.trust_of("bob") == t_b


def test_worked_update_value():
    rng = random.Random(0)
    bs = BackendServer.setup(TrustParams(), rng)
    a, b = bs.register("a"), bs.register("b")
    ra, _ = _receipts(bs, a, b, rng, q=0.5, c=0.5)
    # ra.lam is 0.5 on collaborative-computing, pattern (1, 1)
    assert bs.adjust_trust(ra, 0.0)[0] == pytest.approx(math.exp(-math.exp(-0.308 * 0.125)), abs=1e-9)


def test_negative_rating_lowers_trust(world):
    bs, (a, b, _), rng = world
    before = bs.trust_of("alice")[0]
    ra, _ = _receipts(bs, a, b, rng, rating=-1)
    assert bs.adjust_trust(ra, 1.0)[0] < before


def test_duplicate_and_stale(world):
    bs, (a, b, _), rng = world
    ra, _ = _receipts(bs, a, b, rng, t0=10.0)
    bs.adjust_trust(ra, 10.0)
    after = bs.trust_of("alice")
    with pytest.raises(DuplicateReceipt):
        bs.adjust_trust(ra, 10.0)
    assert bs.trust_of("alice") == after
    bs.freshness_window = 100.0
    ra2, _ = _receipts(bs, a, b, rng, t0=10.0, idx=(1, 1))
    with pytest.raises(StaleReceipt):
        bs.verify_receipt(ra2, 111.0)
    with pytest.raises(StaleReceipt):
        bs.verify_receipt(ra2, 9.0)
    assert bs.verify_receipt(ra2, 110.0)


def test_forged_signature_components_rejected(world):
    bs, (a, b, _), rng = world
    ra, _ = _receipts(bs, a, b, rng)
    with pytest.raises(InvalidReceipt):
        bs.adjust_trust(ra.mutate(q=0.99), 1.0)


def test_unconfirmed_session_cannot_issue(world):
    bs, (a, b, _), rng = world
    s = PairingSession(bs.params, a, Role.INITIATOR, rng)
    with pytest.raises(SessionNotConfirmed):
        generate_receipt(s, 0.5, 0.5, 1, TransactionType(0, 0.5, 2), 0.0, 0, rng)


def test_rating_hidden_from_peer_key(world):
    bs, (a, b, _), rng = world
    ra, _ = _receipts(bs, a, b, rng)
    with pytest.raises(AuthFailure):
        crypto.dec(rating_key(bs.params, a.d), ra.er)


def test_process_receipts_resigns(world):
    bs, (a, b, _), rng = world
    ra, rb = _receipts(bs, a, b, rng)
    touched, rejected = bs.process_receipts([rb, ra, ra.mutate(q=0.1)], 1.0)
    assert touched == ["alice", "bob"]
    assert len(rejected) == 1 and rejected[0]["reason"] == "DuplicateReceipt"
    for dev, cred in (("alice", a), ("bob", b)):
        assert verify_trust_signature(bs.params, cred.pk, bs.trust_of(dev), bs.signature_of(dev))


def test_cycle_reports(world):
    bs, (a, b, c), rng = world
    before = {d: bs.trust_of(d) for d in ("alice", "bob", "carol")}
    rep = bs.run_trust_cycle([], 0.0)
    assert rep.next_sigma_bar == rep.sigma_bar == 50.0
    assert {d["device_id"]: d["trust"] for d in rep.devices} == before

    ra, _ = _receipts(bs, a, b, rng)
    bad, _ = _receipts(bs, a, c, rng, idx=(1, 0))
    rep = bs.run_trust_cycle([ra, bad.mutate(c=0.0)], 1.0)
    assert rep.accepted == 1 and len(rep.rejected) == 1
    assert rep.rejected[0]["reason"] == "InvalidReceipt"
    assert "trust_digest" in rep.devices[0] and rep.to_json()


def test_sigma_bar_is_mean_of_counts():
    rng = random.Random(5)
    bs = BackendServer.setup(TrustParams(), rng)
    creds = [bs.register(f"d{i}") for i in range(3)]
    batch = []
    for i, n in enumerate((10, 20, 30)):
        for k in range(n):
            owned, _ = _receipts(bs, creds[i], creds[(i + 1) % 3], rng, idx=(k, 0))
            batch.append(owned)
    rep = bs.run_trust_cycle(batch, 0.0)
    assert [d["accepted"] for d in rep.devices] == [10, 20, 30]
    assert rep.next_sigma_bar == 20.0
    assert bs.sigma_bar == 20.0


def test_receipt_file_roundtrip(world, tmp_path):
    bs, (a, b, _), rng = world
    ra, rb = _receipts(bs, a, b, rng)
    path = tmp_path / "r.jsonl"
    save_receipts(path, [ra, rb])
    loaded = load_receipts(path, bs.params.group)
    assert loaded == [ra, rb]
    assert bs.verify_receipt(loaded[0], 1.0)
