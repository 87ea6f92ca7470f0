import random

import pytest

from tdp.backend import BackendServer
from tdp.ec import CurveGroup
from tdp.trust import TrustParams


def _is_prime(n):
    if n < 2:
        return False
    return all(n % k for k in range(2, int(n**0.5) + 1))


def _tiny_curve(p=1019, a=1):
    """First curve y^2 = x^3 + a x + b over F_p whose point count is prime."""
    squares = {}
    for y in range(p):
        squares.setdefault(y * y % p, []).append(y)
    for b in range(1, p):
        if (4 * a**3 + 27 * b * b) % p == 0:
            continue
        pts = [(x, y) for x in range(p) for y in squares.get((x**3 + a * x + b) % p, [])]
        n = len(pts) + 1
        if _is_prime(n):
            gx, gy = pts[0]
            return CurveGroup("tiny", p, a, b, gx, gy, n), pts
    raise RuntimeError("no prime-order curve found")


@pytest.fixture(scope="session")
def tiny():
    """(group, all affine points) for a small prime-order curve."""
    return _tiny_curve()


@pytest.fixture
def rng():
    return random.Random(1234)


@pytest.fixture
def world():
    """Backend with default trust parameters and three registered devices."""
    rng = random.Random("tests:world")
    bs = BackendServer.setup(TrustParams(), rng)
    creds = [bs.register(name) for name in ("alice", "bob", "carol")]
    return bs, creds, rng


def pytest_terminal_summary(terminalreporter):
    lines = [
        value
        for key in ("passed", "failed")
        for rep in terminalreporter.stats.get(key, [])
        if rep.when == "call"
        for name, value in rep.user_properties
        if name == "acceptance"
    ]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
