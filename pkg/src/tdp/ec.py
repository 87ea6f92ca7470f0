"""Short-Weierstrass elliptic-curve groups of prime order.

Points are immutable affine values; scalar multiplication runs in Jacobian
coordinates.  Fixed points (the generator, the master public key) can be given
a precomputed window table for faster multiplication.
"""
from __future__ import annotations

from dataclasses import dataclass, field


class InvalidPoint(ValueError):
    """Bytes do not decode to an element of the prime-order group."""


def _sqrt_mod(a: int, p: int) -> int | None:
    """Square root modulo an odd prime (Tonelli-Shanks), or None."""
    a %= p
    if a == 0:
        return 0
    if pow(a, (p - 1) // 2, p) != 1:
        return None
    if p % 4 == 3:
        return pow(a, (p + 1) // 4, p)
    q, s = p - 1, 0
    while q % 2 == 0:
        q //= 2
        s += 1
    z = 2
    while pow(z, (p - 1) // 2, p) != p - 1:
        z += 1
    m, c, t, r = s, pow(z, q, p), pow(a, q, p), pow(a, (q + 1) // 2, p)
    while t != 1:
        i, t2 = 0, t
        while t2 != 1:
            t2 = t2 * t2 % p
            i += 1
        b = pow(c, 1 << (m - i - 1), p)
        m, c = i, b * b % p
        t, r = t * c % p, r * b % p
    return r


@dataclass(frozen=True, eq=False)
class CurveGroup:
    """The group of points on y^2 = x^3 + a*x + b over F_p, generated by (gx, gy).

    ``order`` must be prime and ``cofactor`` the index of the generated
    subgroup in the full curve group.
    """

    name: str
    p: int
    a: int
    b: int
    gx: int
    gy: int
    order: int
    cofactor: int = 1
    _tables: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not self.on_curve(self.gx, self.gy):
            raise ValueError(f"{self.name}: generator is not on the curve")

    # -- basic accessors -------------------------------------------------

    @property
    def generator(self) -> "Point":
        return Point(self, self.gx, self.gy)

    @property
    def identity(self) -> "Point":
        return Point(self, None, None)

    @property
    def field_bytes(self) -> int:
        return (self.p.bit_length() + 7) // 8

    @property
    def scalar_bytes(self) -> int:
        return (self.order.bit_length() + 7) // 8

    def on_curve(self, x: int, y: int) -> bool:
        p = self.p
        return 0 <= x < p and 0 <= y < p and (y * y - (x * x * x + self.a * x + self.b)) % p == 0

    def point(self, x: int, y: int) -> "Point":
        """Validated constructor for an affine point in the prime-order subgroup."""
        if not self.on_curve(x, y):
            raise InvalidPoint("point is not on the curve")
        pt = Point(self, x, y)
        if self.cofactor != 1 and not self._mul(self.order, pt).is_identity:
            raise InvalidPoint("point is not in the prime-order subgroup")
        return pt

    # -- encoding --------------------------------------------------------

    def encode_scalar(self, k: int) -> bytes:
        return (k % self.order).to_bytes(self.scalar_bytes, "big")

    def decode_scalar(self, data: bytes) -> int:
        if len(data) != self.scalar_bytes:
            raise ValueError("bad scalar length")
        k = int.from_bytes(data, "big")
        if k >= self.order:
            raise ValueError("scalar out of range")
        return k

    def encode_point(self, pt: "Point") -> bytes:
        """Compressed SEC1 encoding; the identity encodes as a single zero byte."""
        if pt.is_identity:
            return b"\x00"
        return bytes([2 | (pt.y & 1)]) + pt.x.to_bytes(self.field_bytes, "big")

    def decode_point(self, data: bytes) -> "Point":
        if data == b"\x00":
            return self.identity
        if len(data) != 1 + self.field_bytes or data[0] not in (2, 3):
            raise InvalidPoint("bad point encoding")
        x = int.from_bytes(data[1:], "big")
        if x >= self.p:
            raise InvalidPoint("x coordinate out of range")
        y = _sqrt_mod(x * x * x + self.a * x + self.b, self.p)
        if y is None:
            raise InvalidPoint("x coordinate is not on the curve")
        if (y & 1) != (data[0] & 1):
            y = self.p - y
        return self.point(x, y)

    # -- Jacobian arithmetic ----------------------------------------------

    def _double(self, X, Y, Z):
        p = self.p
        if Y == 0 or Z == 0:
            return 0, 1, 0
        YY = Y * Y % p
        S = 4 * X * YY % p
        ZZ = Z * Z % p
        M = (3 * X * X + self.a * ZZ * ZZ) % p
        X3 = (M * M - 2 * S) % p
        Y3 = (M * (S - X3) - 8 * YY * YY) % p
        Z3 = 2 * Y * Z % p
        return X3, Y3, Z3

    def _add_mixed(self, X1, Y1, Z1, x2, y2):
        # (X1:Y1:Z1) + affine (x2, y2)
        p = self.p
        if Z1 == 0:
            return x2, y2, 1
        Z1Z1 = Z1 * Z1 % p
        U2 = x2 * Z1Z1 % p
        S2 = y2 * Z1 * Z1Z1 % p
        H = (U2 - X1) % p
        r = (S2 - Y1) % p
        if H == 0:
            if r == 0:
                return self._double(X1, Y1, Z1)
            return 0, 1, 0
        HH = H * H % p
        HHH = H * HH % p
        V = X1 * HH % p
        X3 = (r * r - HHH - 2 * V) % p
        Y3 = (r * (V - X3) - Y1 * HHH) % p
        Z3 = Z1 * H % p
        return X3, Y3, Z3

    def _to_affine(self, X, Y, Z) -> "Point":
        if Z == 0:
            return self.identity
        p = self.p
        zi = pow(Z, -1, p)
        zi2 = zi * zi % p
        return Point(self, X * zi2 % p, Y * zi2 * zi % p)

    def _add(self, P: "Point", Q: "Point") -> "Point":
        if P.is_identity:
            return Q
        if Q.is_identity:
            return P
        p = self.p
        if P.x == Q.x:
            if (P.y + Q.y) % p == 0:
                return self.identity
            lam = (3 * P.x * P.x + self.a) * pow(2 * P.y, -1, p) % p
        else:
            lam = (Q.y - P.y) * pow(Q.x - P.x, -1, p) % p
        x3 = (lam * lam - P.x - Q.x) % p
        return Point(self, x3, (lam * (P.x - x3) - P.y) % p)

    def _mul(self, k: int, P: "Point") -> "Point":
        """Variable-base scalar multiplication, width-4 NAF."""
        if P.is_identity or k == 0:
            return self.identity
        if k < 0:
            return self._mul(-k, -P)
        table = self._tables.get((P.x, P.y))
        if table is not None:
            return self._mul_fixed(k, table)
        p = self.p
        # odd multiples P, 3P, 5P, 7P in affine
        twoP = self._add(P, P)
        odd = [P]
        for _ in range(3):
            odd.append(self._add(odd[-1], twoP))
        naf = []
        while k:
            if k & 1:
                d = k & 15
                if d > 8:
                    d -= 16
                k -= d
            else:
                d = 0
            naf.append(d)
            k >>= 1
        X, Y, Z = 0, 1, 0
        for d in reversed(naf):
            X, Y, Z = self._double(X, Y, Z)
            if d > 0:
                q = odd[d >> 1]
                X, Y, Z = self._add_mixed(X, Y, Z, q.x, q.y)
            elif d < 0:
                q = odd[(-d) >> 1]
                X, Y, Z = self._add_mixed(X, Y, Z, q.x, p - q.y)
        return self._to_affine(X, Y, Z)

    def _mul_fixed(self, k: int, table) -> "Point":
        X, Y, Z = 0, 1, 0
        i = 0
        while k:
            d = k & 15
            if d:
                x, y = table[i][d]
                X, Y, Z = self._add_mixed(X, Y, Z, x, y)
            k >>= 4
            i += 1
        return self._to_affine(X, Y, Z)

    def precompute(self, P: "Point") -> None:
        """Build a 4-bit fixed-window table so later multiples of P are cheap."""
        if P.is_identity or (P.x, P.y) in self._tables:
            return
        windows = (self.order.bit_length() + 3) // 4 + 1
        table = []
        base = P
        for _ in range(windows):
            row = [None, (base.x, base.y)]
            acc = base
            for _ in range(14):
                acc = self._add(acc, base)
                row.append(None if acc.is_identity else (acc.x, acc.y))
            table.append(row)
            acc = self._add(acc, base)  # 16 * base
            base = acc
            if base.is_identity:
                break
        if any(e is None for row in table for e in row[1:]):
            return  # tiny groups: fall back to the generic path
        self._tables[(P.x, P.y)] = table

    def mul(self, k: int, P: "Point") -> "Point":
        return self._mul(k % self.order, P)


class Point:
    """An affine point, or the identity when ``x is None``."""

    __slots__ = ("group", "x", "y")

    def __init__(self, group: CurveGroup, x: int | None, y: int | None):
        self.group = group
        self.x = x
        self.y = y

    @property
    def is_identity(self) -> bool:
        return self.x is None

    def __add__(self, other: "Point") -> "Point":
        return self.group._add(self, other)

    def __neg__(self) -> "Point":
        if self.is_identity:
            return self
        return Point(self.group, self.x, (-self.y) % self.group.p)

    def __sub__(self, other: "Point") -> "Point":
        return self + (-other)

    def __rmul__(self, k: int) -> "Point":
        return self.group.mul(k, self)

    __mul__ = __rmul__

    def __eq__(self, other) -> bool:
        if not isinstance(other, Point):
            return NotImplemented
        return self.group is other.group and self.x == other.x and self.y == other.y

    def __hash__(self) -> int:
        return hash((self.group.name, self.x, self.y))

    def __bytes__(self) -> bytes:
        return self.group.encode_point(self)

    def __repr__(self) -> str:
        if self.is_identity:
            return f"Point({self.group.name}, identity)"
        return f"Point({self.group.name}, x={self.x:#x})"


SECP160R1 = CurveGroup(
    name="secp160r1",
    p=0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFF7FFFFFFF,
    a=0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFF7FFFFFFC,
    b=0x1C97BEFC54BD7A8B65ACF89F81D4D4ADC565FA45,
    gx=0x4A96B5688EF573284664698968C38BB913CBFC82,
    gy=0x23A628553168947D59DCC912042351377AC5FB32,
    order=0x0100000000000000000001F4C8F927AED3CA752257,
)
SECP160R1.precompute(SECP160R1.generator)
