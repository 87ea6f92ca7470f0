"""Trustvalue mathematics: Gompertz accumulation, credibility, ratings,
behavior estimation, bootstrapping, the Josang baseline and the solvers for
the sensitivity parameters c_g and c_w.
"""
from __future__ import annotations

import json
import math
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import mpmath
import yaml
from scipy.optimize import brentq

TRUST_EPS = 1e-9
INITIATOR = (1, 0)
PEER = (0, 1)
PATTERNS = {(0, 0), (0, 1), (1, 0), (1, 1)}

# u^2 - 3u + 1 = 0, smaller root; g''' vanishes where exp(-c_g x) equals it
_U_STAR = (3.0 - math.sqrt(5.0)) / 2.0


class DomainError(ValueError):
    pass


class EmptyIntersection(ValueError):
    pass


class EmptyHistory(ValueError):
    pass


class UnknownTaskType(KeyError):
    pass


class NoPositiveRoot(ValueError):
    pass


# -- parameters --------------------------------------------------------------

@dataclass
class TrustParams:
    c_g: float = 0.308
    c_w: float = 0.5
    alpha: float = 0.5
    beta: float = 0.1
    sigma_bar: float = 50.0
    task_types: list = field(default_factory=lambda: ["collaborative-computing", "packet-delivery"])
    pattern_map: dict = field(
        default_factory=lambda: {"collaborative-computing": (1, 1), "packet-delivery": (1, 0)}
    )
    ewma_weight: float = 0.125

    def __post_init__(self):
        self.pattern_map = {k: tuple(v) for k, v in self.pattern_map.items()}
        if self.c_g <= 0 or self.c_w <= 0:
            raise ValueError("c_g and c_w must be positive")
        if not (0 <= self.alpha <= 1 and 0 <= self.beta <= 1):
            raise ValueError("alpha and beta must lie in [0, 1]")
        if self.sigma_bar <= 0:
            raise ValueError("sigma_bar must be positive")
        if not 0 < self.ewma_weight <= 1:
            raise ValueError("ewma_weight must lie in (0, 1]")
        for name, pat in self.pattern_map.items():
            if pat not in PATTERNS:
                raise ValueError(f"pattern for {name!r} must be one of {sorted(PATTERNS)}")

    @property
    def n_types(self) -> int:
        return len(self.task_types)

    @property
    def cutoff(self) -> int:
        return damping_cutoff(self.c_w, self.sigma_bar)

    def task_index(self, name: str) -> int:
        try:
            return self.task_types.index(name)
        except ValueError:
            raise UnknownTaskType(name) from None

    def pattern(self, task_index: int) -> tuple:
        try:
            return self.pattern_map[self.task_types[task_index]]
        except (IndexError, KeyError):
            raise UnknownTaskType(task_index) from None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pattern_map"] = {k: list(v) for k, v in self.pattern_map.items()}
        return d

    @classmethod
    def from_dict(cls, data: Mapping) -> "TrustParams":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown trust parameters: {sorted(unknown)}")
        return cls(**dict(data))

    @classmethod
    def load(cls, path: str | Path) -> "TrustParams":
        return cls.from_dict(yaml.safe_load(Path(path).read_text()) or {})


# -- Gompertz accumulation ---------------------------------------------------

def gompertz(x: float, c_g: float) -> float:
    return math.exp(-math.exp(-c_g * x))


def gompertz_inv(t: float, c_g: float) -> float:
    if not 0.0 < t < 1.0:
        raise DomainError(f"Gompertz inverse needs t in (0, 1), got {t!r}")
    return -math.log(-math.log(t)) / c_g


def gompertz_d3(x: float, c_g: float) -> float:
    """Closed-form third derivative: c^3 g u (u^2 - 3u + 1) with u = exp(-c x)."""
    u = math.exp(-c_g * x)
    return c_g**3 * gompertz(x, c_g) * u * (u * u - 3.0 * u + 1.0)


def _clamp(t: float) -> float:
    return min(max(t, TRUST_EPS), 1.0 - TRUST_EPS)


def update_trust(t_prev: Sequence[float], delta: Sequence[float], c_g: float) -> list[float]:
    """Entrywise G(G^-1(t_prev) + delta), entries kept inside (0, 1)."""
    if len(t_prev) != len(delta):
        raise ValueError("trust and delta dimensions differ")
    out = []
    for t, dt in zip(t_prev, delta):
        if not 0.0 <= t <= 1.0:
            raise DomainError(f"trust entry {t!r} outside [0, 1]")
        out.append(_clamp(gompertz(gompertz_inv(_clamp(t), c_g) + dt, c_g)))
    return out


# -- device-local state -------------------------------------------------------

class ContactHistory:
    """Devices paired with during one trust-management cycle, in encounter order,
    with the share of positive ratings given to each and per-peer transaction counts."""

    def __init__(self):
        self.order: list[str] = []
        self.positive: dict[str, int] = {}
        self.total: dict[str, int] = {}
        self.sigma: dict[str, int] = {}

    def __len__(self) -> int:
        return len(self.order)

    def __contains__(self, device_id: str) -> bool:
        return device_id in self.total

    @property
    def devices(self) -> set[str]:
        return set(self.order)

    def e(self, device_id: str) -> float:
        return self.positive[device_id] / self.total[device_id]

    @property
    def theta(self) -> list[float]:
        return [self.e(x) for x in self.order]

    def record_rating(self, device_id: str, rating: int) -> None:
        if device_id not in self.total:
            self.order.append(device_id)
            self.total[device_id] = 0
            self.positive[device_id] = 0
        self.total[device_id] += 1
        if rating > 0:
            self.positive[device_id] += 1

    def record_transaction(self, device_id: str) -> None:
        self.sigma[device_id] = self.sigma.get(device_id, 0) + 1

    def transactions_with(self, device_id: str) -> int:
        return self.sigma.get(device_id, 0)

    def reset(self) -> None:
        self.__init__()

    def snapshot(self) -> dict:
        """What a device exchanges with its peer before computing credibility."""
        return {"order": list(self.order), "theta": self.theta}


@dataclass
class BehaviorEwma:
    weight: float = 0.125
    q_bar: float | None = None
    c_bar: float | None = None

    @property
    def empty(self) -> bool:
        return self.q_bar is None

    def update(self, q: float, c: float) -> None:
        if self.q_bar is None:
            self.q_bar, self.c_bar = q, c
        else:
            w = self.weight
            self.q_bar = (1 - w) * self.q_bar + w * q
            self.c_bar = (1 - w) * self.c_bar + w * c


@dataclass
class JosangState:
    count_p: int = 0
    count_n: int = 0

    @property
    def value(self) -> float:
        return (self.count_p + 1) / (self.count_p + self.count_n + 2)


def josang_update(state: JosangState, rating: int) -> float:
    if rating not in (1, -1):
        raise ValueError("rating must be +1 or -1")
    if rating > 0:
        state.count_p += 1
    else:
        state.count_n += 1
    return state.value


# -- credibility ---------------------------------------------------------------

def similarity(hist_a: ContactHistory, hist_b: ContactHistory) -> float:
    common = hist_a.devices & hist_b.devices
    if not common:
        raise EmptyIntersection("histories share no device")
    sq = sum((hist_a.e(x) - hist_b.e(x)) ** 2 for x in sorted(common))
    return 1.0 - math.sqrt(sq / len(common))


def successive_spread(theta: Sequence[float]) -> float:
    """RMS of cyclic successive differences of theta (last entry pairs with the first)."""
    n = len(theta)
    if n == 0:
        raise EmptyHistory("empty rating vector")
    sq = sum((theta[y] - theta[(y + 1) % n]) ** 2 for y in range(n))
    return math.sqrt(sq / n)


def diversity(theta_a: Sequence[float], theta_b: Sequence[float]) -> float:
    return 1.0 - abs(successive_spread(theta_a) - successive_spread(theta_b))


def damping_cutoff(c_w: float, sigma_bar: float) -> int:
    return math.floor(math.sqrt(1.0 / c_w) * sigma_bar)


def damping(sigma_ab: int, sigma_bar: float, c_w: float) -> float:
    if sigma_ab < 0 or sigma_bar <= 0:
        raise ValueError("need sigma_ab >= 0 and sigma_bar > 0")
    if sigma_ab == 0:
        return 1.0
    if sigma_ab <= damping_cutoff(c_w, sigma_bar):
        return -c_w * (sigma_ab / sigma_bar) ** 2 + 1.0
    return 0.0


def credibility(
    hist_a: ContactHistory,
    hist_b: ContactHistory,
    sigma_ab: int,
    params: TrustParams,
    sigma_bar: float | None = None,
) -> float:
    """(alpha s^2 + (1 - alpha) d^2) w.

    Freshly encountered pairs have no common device (or no history at all);
    the missing similarity or diversity term then counts as 1, so a new device
    is not penalized before it has a record.
    """
    w = damping(sigma_ab, sigma_bar if sigma_bar is not None else params.sigma_bar, params.c_w)
    if w == 0.0:
        return 0.0
    try:
        s = similarity(hist_a, hist_b)
    except EmptyIntersection:
        s = 1.0
    if len(hist_a) and len(hist_b):
        d = diversity(hist_a.theta, hist_b.theta)
    else:
        d = 1.0
    a = params.alpha
    return (a * s * s + (1 - a) * d * d) * w


def bootstrap_beta(hist_a: ContactHistory, hist_b: ContactHistory, beta: float) -> float:
    if not len(hist_a) or not len(hist_b) or not (hist_a.devices & hist_b.devices):
        return 1.0
    return beta


def rate(q: float, c: float, ewma: BehaviorEwma, beta: float) -> int:
    """+1 when the weighted current profile is at least the historical one."""
    if ewma.empty:
        return 1
    lhs = beta * q * q + (1 - beta) * c * c
    rhs = beta * ewma.q_bar**2 + (1 - beta) * ewma.c_bar**2
    return 1 if lhs >= rhs else -1


# -- behavior estimation ---------------------------------------------------------

@dataclass(frozen=True)
class TransactionType:
    """One-hot-positive transaction type vector: ``value`` at ``index``, zeros elsewhere."""

    index: int
    value: float
    dim: int

    def __post_init__(self):
        if not 0 <= self.index < self.dim:
            raise UnknownTaskType(self.index)
        if not 0.0 < self.value <= 1.0:
            raise ValueError("transaction type entry must lie in (0, 1]")

    @property
    def vector(self) -> list[float]:
        v = [0.0] * self.dim
        v[self.index] = self.value
        return v

    @classmethod
    def from_vector(cls, vec: Sequence[float]) -> "TransactionType":
        nz = [i for i, v in enumerate(vec) if v != 0]
        if len(nz) != 1:
            raise ValueError("transaction type vector must have exactly one nonzero entry")
        return cls(nz[0], float(vec[nz[0]]), len(vec))


def behavior_estimate(
    q: float,
    c: float,
    r: int,
    lam: TransactionType,
    pattern_map,
    role: tuple,
) -> list[float]:
    """q c r (f(lam) . role) lam.

    ``pattern_map`` is either a TrustParams or a mapping from task index to an
    adjustment pattern.
    """
    if isinstance(pattern_map, TrustParams):
        pat = pattern_map.pattern(lam.index)
    else:
        try:
            pat = tuple(pattern_map[lam.index])
        except KeyError:
            raise UnknownTaskType(lam.index) from None
    sel = pat[0] * role[0] + pat[1] * role[1]
    scale = q * c * r * sel
    return [scale * v for v in lam.vector]


# -- parameter solvers -------------------------------------------------------------

def solve_cg(sigma_bar: float, positive_prob: float = 0.5, avg_delta: float = 0.125) -> float:
    """c_g placing the zero of g''' at x* = sigma_bar * positive_prob * avg_delta."""
    x_star = sigma_bar * positive_prob * avg_delta
    if not (sigma_bar > 0 and positive_prob > 0 and avg_delta > 0 and math.isfinite(x_star)):
        raise NoPositiveRoot(f"degenerate inputs: x* = {x_star!r}")
    c_closed = math.log(1.0 / _U_STAR) / x_star
    # independent numeric route on the same equation
    f = lambda c: (lambda u: u * u - 3.0 * u + 1.0)(math.exp(-c * x_star))
    c_num = brentq(f, 1e-12 / x_star, 60.0 / x_star, xtol=1e-15, rtol=1e-14)
    if abs(c_num - c_closed) > 1e-9 * max(1.0, c_closed):
        raise NoPositiveRoot(f"closed form {c_closed} and root finder {c_num} disagree")
    return c_closed


def solve_cw(target_slope: float = -1.0, at: float = 1.0) -> float:
    """c_w such that d/dx(-c_w x^2 + 1) equals ``target_slope`` at ``at``."""
    return -target_slope / (2.0 * at)


def third_derivative_residual(x: float, c_g: float, h: float = 1e-4) -> float:
    """Central finite-difference g'''(x), evaluated at 50 significant digits.

    Double precision cannot resolve a step of 1e-4 in a third difference, so the
    stencil is evaluated with mpmath.
    """
    with mpmath.workdps(50):
        X, C, H = mpmath.mpf(x), mpmath.mpf(c_g), mpmath.mpf(h)
        g = lambda t: mpmath.exp(-mpmath.exp(-C * t))
        val = (g(X + 2 * H) - 2 * g(X + H) + 2 * g(X - H) - g(X - 2 * H)) / (2 * H**3)
        return float(val)


# -- Josang comparison ----------------------------------------------------------------

def compare_with_josang(
    positive_prob: float,
    n: int = 200,
    rng: random.Random | None = None,
    c_g: float = 0.308,
    lam: float = 0.5,
    profile_range: tuple = (0.0, 1.0),
) -> tuple[list[float], list[float]]:
    """Trust series of one device under both models over ``n`` transactions.

    Each transaction draws a rating (+1 with ``positive_prob``) and a QoS and
    credibility uniform in ``profile_range``.  Returns (tdp_series, josang_series),
    element i being the value after transaction i + 1.
    """
    rng = rng or random.Random(0)
    lo, hi = profile_range
    x = gompertz_inv(math.exp(-1.0), c_g)
    js = JosangState()
    tdp, jos = [], []
    for _ in range(n):
        r = 1 if rng.random() < positive_prob else -1
        q, c = rng.uniform(lo, hi), rng.uniform(lo, hi)
        x += q * c * r * lam
        tdp.append(_clamp(gompertz(x, c_g)))
        jos.append(josang_update(js, r))
    return tdp, jos


def dumps_params(params: TrustParams) -> str:
    return json.dumps(params.to_dict(), sort_keys=True)
