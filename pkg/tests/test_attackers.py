import random

from tdp.sim.attackers import FORGED_TRUST, AttackContext, attacker_behavior

CTX = AttackContext("m", "x", 1, frozenset({"m", "m2"}))


def test_intensity_zero_is_benign():
    r = random.Random(0)
    for model in ("TO1", "TO2", "TO3"):
        for action in ("rate", "advertise"):
            assert all(attacker_behavior(model, 0.0, r, CTX, action=action) is None for _ in range(100))


def test_to2_always_negative():
    r = random.Random(0)
    assert all(attacker_behavior("TO2", 1.0, r, CTX).rating == -1 for _ in range(200))


def test_to3_collusion_split():
    r = random.Random(0)
    assert attacker_behavior("TO3", 1.0, r, AttackContext("m", "m2", -1, CTX.colluders)).rating == 1
    assert attacker_behavior("TO3", 1.0, r, CTX).rating == -1


def test_to1_advertises_forged_vector():
    r = random.Random(0)
    ov = attacker_behavior("TO1", 1.0, r, CTX, n_types=3, action="advertise")
    assert ov.advertise == (FORGED_TRUST,) * 3
    assert attacker_behavior("TO1", 1.0, r, CTX, action="rate") is None
    assert attacker_behavior("TO2", 1.0, r, CTX, action="advertise") is None


def test_half_intensity_binomial_bound():
    r = random.Random(2024)
    n = 1000
    k = sum(attacker_behavior("TO2", 0.5, r, CTX) is not None for _ in range(n))
    sd = (n * 0.25) ** 0.5
    assert abs(k - 500) <= 3 * sd


def test_none_model():
    assert attacker_behavior("none", 1.0, random.Random(0), CTX) is None
