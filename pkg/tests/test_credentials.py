import dataclasses
import json
import random

import pytest

from tdp.credentials import (
    BOOTSTRAP_TRUST, Credential, DuplicateRegistration, MasterKey, PublicKey, Registry, SystemParams,
    UnknownDevice, bs_extract_partial_key, combined_public_point, device_begin_registration,
    export_public, import_public, register_device, verify_partial_key,
)
from tdp.ec import SECP160R1


@pytest.fixture
def setup():
    rng = random.Random(1)
    master = MasterKey.generate(SECP160R1, rng)
    params = SystemParams.from_master(master)
    return params, master, Registry(), rng


def test_begin_registration(setup):
    params, _, _, rng = setup
    x1, P1 = device_begin_registration(params, rng)
    x2, P2 = device_begin_registration(params, rng)
    assert P1 == x1 * params.P
    assert x1 != x2


def test_partial_key_verifies(setup):
    params, master, reg, rng = setup
    for i in range(20):
        cred = register_device(params, master, reg, f"d{i}", rng)
        assert verify_partial_key(params, cred.device_id, cred.pk, cred.d)
        assert combined_public_point(params, cred.device_id, cred.pk) == cred.secret * params.P
    assert len(reg) == 20


def test_duplicate_registration(setup):
    params, master, reg, rng = setup
    register_device(params, master, reg, "a", rng)
    with pytest.raises(DuplicateRegistration):
        register_device(params, master, reg, "a", rng)
    with pytest.raises(UnknownDevice):
        reg.get("nobody")


def test_tampering_breaks_verification(setup):
    params, master, reg, rng = setup
    a = register_device(params, master, reg, "a", rng)
    b = register_device(params, master, reg, "b", rng)
    assert not verify_partial_key(params, "a", PublicKey(a.P_dev, a.R + params.P), a.d)
    assert not verify_partial_key(params, "a", a.pk, a.d + 1)
    assert not verify_partial_key(params, "a", b.pk, b.d)
    assert not verify_partial_key(params, "b", a.pk, a.d)
    assert not verify_partial_key(params, "a", PublicKey(b.P_dev, a.R), a.d)


def test_bootstrap_trust_recorded(setup):
    params, master, reg, rng = setup
    x, P_dev = device_begin_registration(params, rng)
    R, d, r_reg = bs_extract_partial_key(params, master, reg, "z", P_dev, rng, [BOOTSTRAP_TRUST] * 2)
    entry = reg.get("z")
    assert entry.trust == [BOOTSTRAP_TRUST] * 2
    assert entry.r_reg == r_reg and R == r_reg * params.P


def test_credential_hides_registration_nonce():
    assert "r_reg" not in {f.name for f in dataclasses.fields(Credential)}


def test_export_import_public(setup, tmp_path):
    params, master, reg, rng = setup
    cred = register_device(params, master, reg, "dev-ü", rng)
    path = tmp_path / "pk.json"
    export_public(cred, path)
    dev_id, pk = import_public(path)
    assert dev_id == "dev-ü" and pk == cred.pk
    assert set(json.loads(path.read_text())) == {"device_id", "curve", "P_dev", "R"}
