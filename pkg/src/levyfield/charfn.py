"""Characteristic-function models and the bound constants of the inversion method.

Each model knows its log characteristic function with a *continuous* branch
along frequency (needed when raising to non-integer powers) and its cumulants
at time 1. Raising to the power ``delta`` then means ``exp(delta * log_cf)``,
which is exactly the characteristic function of the increment over a time step
``delta``.

The GIG and GH models require the modified Bessel function K at complex
arguments in the right half-plane; that evaluation (asymptotic series plus
scaled quadrature) lives here as a private helper since the public special
function module is real-only.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from math import comb
from typing import Sequence, Union

import numpy as np

from .errors import DomainError, UnsupportedMomentError
from .specfun import _GL_NODES, _GL_WEIGHTS, log_bessel_k

__all__ = [
    "Gig",
    "Gh1",
    "Ig",
    "Gaussian",
    "StudentT3",
    "Cauchy",
    "CharFnModel",
    "BoundMode",
    "InversionBounds",
    "ThetaBound",
    "eval_power",
    "log_cf_power_grid",
    "moment_at_zero",
    "cumulants_at_one",
    "tail_bound_R",
    "estimate_theta_B",
    "moments_from_cumulants",
    "cumulants_from_moments",
]


# ---------------------------------------------------------------------------
# Complex log K_nu on the right half-plane
# ---------------------------------------------------------------------------


def _log_bessel_k_cplx(nu: float, z: np.ndarray) -> np.ndarray:
    """log K_nu(z) elementwise for complex z with Re z > 0.

    Uses the large-|z| asymptotic series where it is certified below 1e-12
    and otherwise quadrature of exp(-z(cosh t - 1))*cosh(nu t) with the
    factor e^{-z} split off. Branch: continuous on any path that stays in
    the right half-plane and starts on the positive real axis, up to jumps
    of 2*pi*i the *caller* must unwrap (they can only originate from the
    principal log of the quadrature integral, which has small argument).
    """
    z = np.asarray(z, dtype=complex)
    out = np.empty(z.shape, dtype=complex)
    az = np.abs(z)
    mu4 = 4.0 * nu * nu
    # threshold below which the asymptotic series cannot reach 1e-12
    z_min_asym = max(16.0, 0.6 * mu4)
    use_asym = az >= z_min_asym
    if np.any(use_asym):
        za = z[use_asym]
        term = np.ones_like(za)
        total = np.ones_like(za)
        smallest = np.full(za.shape, np.inf)
        for j in range(1, 40):
            term = term * ((mu4 - (2 * j - 1) ** 2) / (8.0 * j)) / za
            grow = np.abs(term) >= smallest
            term[grow] = 0.0
            smallest = np.minimum(smallest, np.where(grow, smallest, np.abs(term)))
            total += term
        out[use_asym] = -za + 0.5 * np.log(np.pi / (2.0 * za)) + np.log(total)
    rest = ~use_asym
    if np.any(rest):
        out[rest] = _log_bessel_k_cplx_quad(nu, z[rest])
    return out


def _log_bessel_k_cplx_quad(nu: float, z: np.ndarray) -> np.ndarray:
    # exp(z) K_nu(z) = int_0^inf exp(-z(cosh t - 1)) cosh(nu t) dt; for
    # Re z bounded below the integrand decays like exp(-Re z (cosh t - 1)).
    re_min = float(np.min(z.real))
    if re_min <= 0:
        raise DomainError("complex K requires Re z > 0")
    t_hi = math.acosh(1.0 + 50.0 / re_min)
    if nu != 0.0:
        # push the endpoint past the cosh(nu t) growth if needed
        while abs(nu) * t_hi - re_min * (math.cosh(t_hi) - 1.0) > -46.0:
            t_hi += 0.5
    prev = None
    n_panels = 4
    for _ in range(8):
        edges = np.linspace(0.0, t_hi, n_panels + 1)
        mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
        half = 0.5 * (edges[1:] - edges[:-1])[:, None]
        t = (mid + half * _GL_NODES[None, :]).ravel()
        w = (half * np.broadcast_to(_GL_WEIGHTS, (n_panels, _GL_WEIGHTS.size))).ravel()
        ch = np.cosh(t) - 1.0
        body = np.exp(-np.multiply.outer(z, ch)) * np.cosh(nu * t)[None, :]
        total = body @ w
        if prev is not None and np.all(
            np.abs(total - prev) <= 1e-13 * np.abs(total)
        ):
            break
        prev = total
        n_panels *= 2
    return -z + np.log(total)


# ---------------------------------------------------------------------------
# Models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Gig:
    """Generalized inverse Gaussian law GIG(a, b, p); a, b > 0."""

    a: float
    b: float
    p: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise DomainError("GIG requires a > 0 and b > 0")

    def log_cf_raw(self, u: np.ndarray) -> np.ndarray:
        w = np.sqrt(1.0 - 2j * u / self.b**2)
        ab = self.a * self.b
        return (
            -0.5 * self.p * np.log(1.0 - 2j * u / self.b**2)
            + _log_bessel_k_cplx(self.p, ab * w)
            - log_bessel_k(self.p, ab)
        )

    needs_unwrap = True

    def log_mgf(self, s: np.ndarray) -> np.ndarray:
        """log E exp(s * X) for complex s with Re(1 - 2s/b^2) > 0 (no unwrap)."""
        s = np.asarray(s, dtype=complex)
        w = np.sqrt(1.0 - 2.0 * s / self.b**2)
        ab = self.a * self.b
        return (
            -self.p * np.log(w)
            + _log_bessel_k_cplx(self.p, ab * w)
            - log_bessel_k(self.p, ab)
        )

    def moments(self, kmax: int) -> list[float]:
        ab = self.a * self.b
        lk = log_bessel_k(self.p, ab)
        return [
            (self.a / self.b) ** k * math.exp(log_bessel_k(self.p + k, ab) - lk)
            for k in range(1, kmax + 1)
        ]

    def cumulants(self, kmax: int) -> list[float]:
        return cumulants_from_moments(self.moments(kmax))

    # phase-rate bound of log_cf, used to pick unwrap step sizes
    def phase_rate_bound(self) -> float:
        return self.cumulants(1)[0] + self.a + 1.0


@dataclass(frozen=True)
class Ig:
    """Inverse Gaussian law IG(a, b) = GIG(a, b, -1/2); closed-form log cf."""

    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise DomainError("IG requires a > 0 and b > 0")

    def log_cf_raw(self, u: np.ndarray) -> np.ndarray:
        return self.a * self.b * (1.0 - np.sqrt(1.0 - 2j * u / self.b**2))

    needs_unwrap = False

    def cumulants(self, kmax: int) -> list[float]:
        # cum_j = a * (2j-3)!! / b^(2j-1)
        out = []
        dfac = 1.0
        for j in range(1, kmax + 1):
            if j >= 2:
                dfac *= 2 * j - 3
            out.append(self.a * dfac / self.b ** (2 * j - 1))
        return out

    def phase_rate_bound(self) -> float:
        return self.a / self.b + self.a + 1.0


@dataclass(frozen=True)
class Gh1:
    """One-dimensional generalized hyperbolic law GH(lam, alpha, beta, delta, mu)."""

    lam: float
    alpha: float
    beta: float
    delta: float
    mu: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.delta > 0):
            raise DomainError("GH requires alpha > 0 and delta > 0")
        if not self.alpha**2 > self.beta**2:
            raise DomainError("GH requires alpha^2 > beta^2")

    @property
    def gamma_bar(self) -> float:
        return math.sqrt(self.alpha**2 - self.beta**2)

    def mixing_gig(self) -> Gig:
        return Gig(self.delta, self.gamma_bar, self.lam)

    def log_cf_raw(self, u: np.ndarray) -> np.ndarray:
        g2 = self.gamma_bar**2
        q = g2 + u * u - 2j * self.beta * u  # alpha^2 - (beta + iu)^2
        dk = self.delta * np.sqrt(q)
        return (
            1j * u * self.mu
            + 0.5 * self.lam * (math.log(g2) - np.log(q))
            + _log_bessel_k_cplx(self.lam, dk)
            - log_bessel_k(self.lam, self.delta * self.gamma_bar)
        )

    needs_unwrap = True

    def cumulants(self, kmax: int) -> list[float]:
        # X = mu + beta*Y + sqrt(Y)*Z with Y ~ mixing GIG: compose the GIG
        # cumulant generating function with s(t) = beta*t + t^2/2.
        cy = self.mixing_gig().cumulants(kmax)
        out = []
        for n in range(1, kmax + 1):
            total = self.mu if n == 1 else 0.0
            for m in range(1, n + 1):
                total += cy[m - 1] * _bell_beta_half(n, m, self.beta)
            out.append(total)
        return out

    def phase_rate_bound(self) -> float:
        return abs(self.mu) + abs(self.beta) + self.delta + 1.0


@dataclass(frozen=True)
class Gaussian:
    """Normal law with the given mean and variance."""

    mean: float
    var: float

    def __post_init__(self):
        if not self.var > 0:
            raise DomainError("Gaussian requires var > 0")

    def log_cf_raw(self, u: np.ndarray) -> np.ndarray:
        return 1j * u * self.mean - 0.5 * self.var * u * u

    needs_unwrap = False

    def cumulants(self, kmax: int) -> list[float]:
        return [self.mean, self.var][:kmax] + [0.0] * max(0, kmax - 2)

    def phase_rate_bound(self) -> float:
        return abs(self.mean) + 1.0


@dataclass(frozen=True)
class StudentT3:
    """Student's t law with three degrees of freedom (infinitely divisible)."""

    def log_cf_raw(self, u: np.ndarray) -> np.ndarray:
        s = math.sqrt(3.0) * np.abs(u)
        return (-s + np.log1p(s)) + 0j

    needs_unwrap = False

    def cumulants(self, kmax: int) -> list[float]:
        if kmax >= 3:
            raise UnsupportedMomentError("t3 has no moments of order >= 3")
        return [0.0, 3.0][:kmax]

    def phase_rate_bound(self) -> float:
        return 1.0


@dataclass(frozen=True)
class Cauchy:
    """Centered Cauchy law with the given scale."""

    scale: float

    def __post_init__(self):
        if not self.scale > 0:
            raise DomainError("Cauchy requires scale > 0")

    def log_cf_raw(self, u: np.ndarray) -> np.ndarray:
        return -self.scale * np.abs(u) + 0j

    needs_unwrap = False

    def cumulants(self, kmax: int) -> list[float]:
        if kmax >= 1:
            raise UnsupportedMomentError("the Cauchy law has no moments")
        return []

    def phase_rate_bound(self) -> float:
        return 1.0


CharFnModel = Union[Gig, Ig, Gh1, Gaussian, StudentT3, Cauchy]


# ---------------------------------------------------------------------------
# Continuous-branch evaluation
# ---------------------------------------------------------------------------


def _log_cf_continuous(model: CharFnModel, u: np.ndarray) -> np.ndarray:
    """log cf at nonnegative sorted frequencies, branch continuous from u=0."""
    u = np.asarray(u, dtype=float)
    if u.size == 0:
        return np.zeros(0, dtype=complex)
    if not model.needs_unwrap:
        return model.log_cf_raw(u)
    # insert filler points so the true phase never moves more than ~pi/2
    # between consecutive samples, then unwrap the principal-branch jumps
    step = 0.5 * math.pi / model.phase_rate_bound()
    knots = np.unique(np.concatenate([[0.0], u]))
    gaps = np.diff(knots)
    extra = []
    for left, gap in zip(knots[:-1], gaps):
        n_fill = int(gap / step)
        if n_fill > 0:
            extra.append(left + gap * (np.arange(1, n_fill + 1) / (n_fill + 1)))
    dense = np.unique(np.concatenate([knots] + extra)) if extra else knots
    raw = model.log_cf_raw(dense)
    phase = np.unwrap(raw.imag)
    # anchor the branch at u = 0 where log cf = 0
    phase -= phase[np.searchsorted(dense, 0.0)]
    idx = np.searchsorted(dense, u)
    return raw.real[idx] + 1j * phase[idx]


def log_cf_power_grid(model: CharFnModel, delta: float, u: np.ndarray) -> np.ndarray:
    """delta * log cf on an arbitrary real frequency grid (continuous branch)."""
    if not delta > 0:
        raise DomainError("delta must be positive")
    u = np.asarray(u, dtype=float)
    au = np.abs(u)
    order = np.argsort(au)
    vals_sorted = _log_cf_continuous(model, au[order])
    vals = np.empty(u.shape, dtype=complex)
    vals[order] = vals_sorted
    vals = np.where(u < 0, np.conj(vals), vals)
    return delta * vals


def eval_power(model: CharFnModel, u: float, delta: float) -> complex:
    """(phi(u))^delta with the branch tracked continuously from u = 0."""
    return complex(np.exp(log_cf_power_grid(model, delta, np.array([u]))[0]))


# ---------------------------------------------------------------------------
# Moments and cumulants
# ---------------------------------------------------------------------------


def cumulants_from_moments(m: Sequence[float]) -> list[float]:
    c: list[float] = []
    for n in range(1, len(m) + 1):
        cn = m[n - 1]
        for k in range(1, n):
            cn -= comb(n - 1, k - 1) * c[k - 1] * m[n - k - 1]
        c.append(cn)
    return c


def moments_from_cumulants(c: Sequence[float]) -> list[float]:
    m: list[float] = []
    for n in range(1, len(c) + 1):
        mn = c[n - 1]
        for k in range(1, n):
            mn += comb(n - 1, k - 1) * c[k - 1] * m[n - k - 1]
        m.append(mn)
    return m


def _bell_beta_half(n: int, m: int, beta: float) -> float:
    # partial Bell polynomial B_{n,m}(x1, x2, 0, ...) with x1 = beta, x2 = 1:
    # splits n into m parts of size 1 or 2, so j = n - m parts equal 2.
    j = n - m
    if j < 0 or 2 * m - n < 0:
        return 0.0
    return (
        math.factorial(n)
        / (math.factorial(2 * m - n) * math.factorial(j) * 2.0**j)
        * beta ** (2 * m - n)
    )


def cumulants_at_one(model: CharFnModel, kmax: int) -> list[float]:
    """First kmax cumulants of the time-1 law; raises if any do not exist."""
    return model.cumulants(kmax)


def moment_at_zero(model: CharFnModel, delta: float, k: int) -> float:
    """k-th moment of the increment law with characteristic function (phi)^delta.

    Computed through the cumulant route: cumulants scale linearly in delta and
    the moment is assembled with the complete Bell recursion.
    """
    if not (isinstance(k, int) and k >= 1):
        raise DomainError("moment order k must be a positive integer")
    if not delta > 0:
        raise DomainError("delta must be positive")
    cums = [c * delta for c in cumulants_at_one(model, k)]
    return moments_from_cumulants(cums)[k - 1]


def tail_bound_R(model: CharFnModel, delta: float, eta: int) -> float:
    """Tail constant R for even eta: the eta-th derivative magnitude at zero
    of (phi)^delta, i.e. the eta-th moment of the increment law."""
    if not (isinstance(eta, int) and eta > 0 and eta % 2 == 0):
        raise DomainError("eta must be an even positive integer")
    r = moment_at_zero(model, delta, eta)
    if not r > 0:
        raise DomainError(f"derived tail constant is not positive: {r}")
    return r


# ---------------------------------------------------------------------------
# Bound constants
# ---------------------------------------------------------------------------


class BoundMode(enum.Enum):
    """Which tail assumption the (R, eta) pair refers to."""

    CDF_TAIL = "cdf_tail"
    DENSITY_TAIL = "density_tail"


@dataclass(frozen=True)
class InversionBounds:
    """Certified decay constants of an increment law: tails and frequency decay.

    ``F(-x), 1 - F(x) <= R x^-eta`` (CDF_TAIL mode) or ``f(x) <= R |x|^-eta``
    (DENSITY_TAIL mode), together with ``|phi(u)^delta| <= B |u/2pi|^-theta``.
    """

    mode: BoundMode
    eta: float
    R: float
    theta: float
    B: float
    log_B: float = None  # type: ignore[assignment]

    def __post_init__(self):
        if not self.eta > 1:
            raise DomainError("eta must exceed 1")
        if not self.R > 0 or not self.theta > 0:
            raise DomainError("R and theta must be positive")
        if self.log_B is None:
            if not self.B > 0:
                raise DomainError("B must be positive")
            object.__setattr__(self, "log_B", math.log(self.B))


@dataclass(frozen=True)
class ThetaBound:
    """One admissible (theta, B) pair; ``feasible`` is False when the scanned
    frequency range did not contain the maximum of |u|^theta |phi^delta|."""

    theta: float
    B: float
    log_B: float
    feasible: bool


_SCAN_POINTS = 2**18
_SCAN_U_MAX = 1.0e6
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def estimate_theta_B(
    model: CharFnModel,
    delta: float,
    theta_grid: Sequence[float],
    *,
    u_max: float = _SCAN_U_MAX,
    n_scan: int = _SCAN_POINTS,
) -> list[ThetaBound]:
    """For each theta, the smallest B with |phi(u)^delta| <= B |u/(2pi)|^-theta.

    A dense logarithmic scan of ``|u|^theta |phi(u)|^delta`` up to ``u_max``
    locates the maximum, followed by golden-section refinement. Entries whose
    maximum sits on the scan boundary (still growing) are marked infeasible.
    """
    if len(theta_grid) == 0:
        raise DomainError("theta grid must be nonempty")
    if not delta > 0:
        raise DomainError("delta must be positive")
    lug = np.linspace(math.log(1e-8), math.log(u_max), n_scan)
    ug = np.exp(lug)
    relog = delta * model.log_cf_raw(ug).real  # modulus needs no branch

    def g_scalar(lu: float, theta: float) -> float:
        uval = math.exp(lu)
        re = float(model.log_cf_raw(np.array([uval])).real[0])
        return theta * lu + delta * re

    out = []
    for theta in theta_grid:
        if not theta > 0:
            raise DomainError("theta values must be positive")
        g = theta * lug + relog
        i = int(np.argmax(g))
        if i == n_scan - 1:
            out.append(ThetaBound(theta, math.inf, math.inf, False))
            continue
        lo = lug[max(i - 1, 0)]
        hi = lug[min(i + 1, n_scan - 1)]
        a, b = lo, hi
        fa = g_scalar(a + (1 - _GOLDEN) * (b - a), theta)
        fb = g_scalar(a + _GOLDEN * (b - a), theta)
        x1 = a + (1 - _GOLDEN) * (b - a)
        x2 = a + _GOLDEN * (b - a)
        for _ in range(40):
            if fa < fb:
                a = x1
                x1, fa = x2, fb
                x2 = a + _GOLDEN * (b - a)
                fb = g_scalar(x2, theta)
            else:
                b = x2
                x2, fb = x1, fa
                x1 = a + (1 - _GOLDEN) * (b - a)
                fa = g_scalar(x1, theta)
        log_c = max(fa, fb, float(g[i]))
        log_b = log_c - theta * math.log(2.0 * math.pi)
        b_val = math.exp(log_b) if log_b < 709.0 else math.inf
        out.append(ThetaBound(theta, b_val, log_b, True))
    return out


def default_theta_grid() -> list[float]:
    """theta sweep 1, 1.5, ..., 100 used throughout the experiments."""
    return [1.0 + 0.5 * i for i in range(199)]
