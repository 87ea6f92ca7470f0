import pytest

from tdp.credentials import Credential, PublicKey
from tdp.crypto import AuthFailure, scalar_random
from tdp.pairing import (
    Candidate, InvalidPeerKey, KeyShare, NoCandidates, NonceMismatch, PairingSession, Response,
    Role, SessionTimeout, State, StateError, decode_message, encode_message, run_pairing, select_peer,
)


def _pair(bs, a, b, rng):
    return (PairingSession(bs.params, a, Role.INITIATOR, rng),
            PairingSession(bs.params, b, Role.RESPONDER, rng))


def test_honest_pairing_confirms(world):
    bs, (a, b, _), rng = world
    for _ in range(20):
        sa, sb = _pair(bs, a, b, rng)
        k = run_pairing(sa, sb)
        assert sa.k == sb.k == k and len(k) == 16
        assert sa.state is sb.state is State.CONFIRMED


def test_keys_fresh_per_session(world):
    bs, (a, b, _), rng = world
    keys = {run_pairing(*_pair(bs, a, b, rng)) for _ in range(10)}
    assert len(keys) == 10


def test_substituted_pk_breaks_confirmation(world):
    bs, (a, b, _), rng = world
    sa, sb = _pair(bs, a, b, rng)
    ks = sb.key_share()
    fake = PublicKey(scalar_random(bs.params.group, rng) * bs.params.P, ks.pk.R)
    sb.accept_key_share(sa.key_share())
    sa.accept_key_share(KeyShare(ks.sender_id, fake, ks.U))
    assert sa.k != sb.k
    with pytest.raises(AuthFailure):
        sb.answer_challenge(sa.make_challenge())
    assert sb.state is State.FAILED


def test_impersonation_without_secret_fails(world):
    bs, (a, b, _), rng = world
    g = bs.params.group
    fake = Credential("alice", scalar_random(g, rng), a.P_dev, a.R, scalar_random(g, rng))
    sm, sb = _pair(bs, fake, b, rng)
    with pytest.raises(AuthFailure):
        run_pairing(sm, sb)
    assert sb.state is State.FAILED


def test_replayed_challenge_in_new_session_fails(world):
    bs, (a, b, _), rng = world
    sa1, sb1 = _pair(bs, a, b, rng)
    sb1.accept_key_share(sa1.key_share())
    sa1.accept_key_share(sb1.key_share())
    old = sa1.make_challenge()
    sa2, sb2 = _pair(bs, a, b, rng)
    sb2.accept_key_share(sa2.key_share())
    sa2.accept_key_share(sb2.key_share())
    with pytest.raises((AuthFailure, NonceMismatch)):
        sb2.answer_challenge(old)
    assert sb2.state is State.FAILED


def test_reflected_challenge_is_nonce_mismatch(world):
    bs, (a, b, _), rng = world
    sa, sb = _pair(bs, a, b, rng)
    sb.accept_key_share(sa.key_share())
    sa.accept_key_share(sb.key_share())
    sa.make_challenge()
    # an encryption of the wrong nonce pair under the right key
    from tdp import crypto
    forged = Response(crypto.enc(sa.k, bytes(32), rng))
    with pytest.raises(NonceMismatch):
        sa.verify_response(forged)
    assert sa.state is State.FAILED


def test_invalid_peer_points(world):
    bs, (a, b, _), rng = world
    g = bs.params.group
    sa, sb = _pair(bs, a, b, rng)
    ks = sa.key_share()
    with pytest.raises(InvalidPeerKey):
        sb.accept_key_share(KeyShare(ks.sender_id, ks.pk, g.identity))
    sa2, sb2 = _pair(bs, a, a, rng)
    with pytest.raises(InvalidPeerKey):
        sb2.accept_key_share(sa2.key_share())


def test_state_machine_order(world):
    bs, (a, b, _), rng = world
    sa, sb = _pair(bs, a, b, rng)
    with pytest.raises(StateError):
        sa.make_challenge()
    assert sa.state is State.FAILED
    sa, sb = _pair(bs, a, b, rng)
    sb.accept_key_share(sa.key_share())
    with pytest.raises(StateError):
        sb.make_challenge()
    with pytest.raises(StateError):
        sb.accept_key_share(sa.key_share())


def test_timeout(world):
    bs, (a, b, _), rng = world
    sa = PairingSession(bs.params, a, Role.INITIATOR, rng, started_at=10, timeout_ticks=5)
    sa.check_timeout(15)
    with pytest.raises(SessionTimeout):
        sa.check_timeout(16)
    assert sa.state is State.FAILED


def test_wire_roundtrip(world):
    bs, (a, b, _), rng = world
    g = bs.params.group
    sa, sb = _pair(bs, a, b, rng)

    def wire(m):
        return decode_message(encode_message(m, g), g)

    sb.accept_key_share(wire(sa.key_share()))
    sa.accept_key_share(wire(sb.key_share()))
    conf = sa.verify_response(wire(sb.answer_challenge(wire(sa.make_challenge()))))
    sb.verify_confirm(wire(conf))
    assert sa.confirmed and sb.confirmed
    for bad in (b"", b"\x09\x00\x00", b"\x02\x00\x05ab"):
        with pytest.raises(ValueError):
            decode_message(bad, g)
    with pytest.raises(InvalidPeerKey):
        decode_message(b"\x01" + b"\x00\x01a" + (b"\x00\x15" + b"\x02" + bytes([0xff]) * 20) * 3, g)


def _cands(bs, creds, values, n=0):
    out = []
    for c, v in zip(creds, values):
        entry = bs.registry.get(c.device_id)
        entry.trust = [v] * bs.trust_params.n_types
        out.append(Candidate(c.device_id, c.pk, tuple(entry.trust), bs.sign(c.device_id)))
    return out


def test_select_peer_argmax_and_ties(world):
    bs, creds, rng = world
    assert select_peer(bs.params, _cands(bs, creds, [0.4, 0.7, 0.5]), 0) == "bob"
    assert select_peer(bs.params, _cands(bs, creds, [0.5, 0.5, 0.3]), 0) == "alice"
    assert select_peer(bs.params, _cands(bs, [creds[1], creds[0]], [0.5, 0.5]), 0) == "alice"


def test_select_peer_excludes_forgery(world):
    bs, creds, rng = world
    offers = _cands(bs, creds, [0.4, 0.7, 0.5])
    forged = Candidate("carol", creds[2].pk, (0.99, 0.99), offers[2].signature)
    assert select_peer(bs.params, offers[:2] + [forged], 0) == "bob"
    with pytest.raises(NoCandidates):
        select_peer(bs.params, [forged], 0)
    with pytest.raises(NoCandidates):
        select_peer(bs.params, [], 0)


def test_select_peer_policy_hook(world):
    bs, creds, rng = world
    offers = [c.__class__(c.peer_id, c.pk, c.trust, c.signature, link_metric=m)
              for c, m in zip(_cands(bs, creds, [0.4, 0.7, 0.5]), [9.0, 1.0, 2.0])]
    assert select_peer(bs.params, offers, 0, policy=lambda c, n: c.link_metric) == "alice"
