import pytest

from tdp.credentials import PublicKey
from tdp.signatures import TrustSignature, quantize_trust, sign_trust, verify_trust_signature


def test_honest_signature_verifies(world):
    bs, creds, rng = world
    for c in creds:
        assert verify_trust_signature(bs.params, c.pk, bs.trust_of(c.device_id), bs.signature_of(c.device_id))


def test_raised_entry_fails(world):
    bs, (a, *_), rng = world
    trust = bs.trust_of("alice")
    sig = bs.signature_of("alice")
    for i in range(len(trust)):
        raised = list(trust)
        raised[i] += 0.1
        assert not verify_trust_signature(bs.params, a.pk, raised, sig)


def test_signature_bound_to_device(world):
    bs, (a, b, _), rng = world
    trust = bs.trust_of("alice")
    assert not verify_trust_signature(bs.params, b.pk, trust, bs.signature_of("alice"))


def test_zero_trust_refused(world):
    bs, _, rng = world
    with pytest.raises(ValueError):
        sign_trust(bs.params, bs.master, bs.registry.get("alice"), [0.0, 0.0], rng)
    sig = bs.signature_of("alice")
    assert not verify_trust_signature(bs.params, PublicKey(sig.T5, sig.T5), [0, 0], sig)
    assert not verify_trust_signature(bs.params, PublicKey(sig.T5, sig.T5), [0.5], None)


def test_identity_T5_rejected(world):
    bs, (a, *_), _ = world
    g = bs.params.group
    assert not verify_trust_signature(bs.params, a.pk, [0.5, 0.5], TrustSignature(0, g.identity))


def test_quantization():
    assert quantize_trust([0.25, 0.5]) == 750000
    assert quantize_trust([1e-7]) == 0


def test_rescaling_malleability_is_documented():
    # A holder of a genuine signature can rescale T4 for another claimed value;
    # tracked in the design notes as a limitation of the construction.
    from tdp.adversary import signature_rescaling

    assert signature_rescaling(seed=3) is True
