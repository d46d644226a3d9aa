"""Discrete Fourier inversion of (phi)^delta: parameter selection, coefficient
precomputation, CDF evaluation and the closed-form error budgets.

Given bound constants (eta, R, theta, B) for an increment law, the method picks
a smoothing parameter kappa, a period J and an even summand count M such that
the trigonometric sum

    F(x) = sum_{k=-M/2}^{M/2} q_k exp(-2*pi*i*k*x/J),
    q_0 = 1/2,  q_k = (1 - cos(2*pi*kappa*k)) / (2*pi*i*k) * phi(-2*pi*k/J)^delta

approximates the true increment CDF within eps on the window [-D/2, D/2].
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import charfn
from ._kernels import cdf_and_derivative, cdf_values
from .charfn import BoundMode, CharFnModel, InversionBounds, ThetaBound
from .errors import DomainError, InfeasibleOrderError, PlanTooLargeError
from .specfun import hurwitz_zeta, v1, v2

__all__ = [
    "InversionPlan",
    "ErrorBudget",
    "choose_kappa",
    "default_eps",
    "tuned_D",
    "build_plan",
    "build_plan_auto",
    "select_theta",
    "eval_cdf",
    "eval_cdf_derivative",
    "lp_sampling_budget",
    "plan_to_csv",
]

KAPPA_GRID_STEP = 1e-3
M_HARD_CAP = 10**8


def _v_aggregate(bounds_mode: BoundMode, kappa: float, eta: float) -> float:
    return v1(kappa, eta) if bounds_mode is BoundMode.CDF_TAIL else v2(kappa, eta)


def _kappa_ok(mode: BoundMode, kappa: float, eta: float) -> bool:
    if mode is BoundMode.CDF_TAIL:
        return kappa**eta * v1(kappa, eta) <= 2.0 ** (eta + 1.0)
    return kappa ** (eta - 1.0) * v2(kappa, eta) <= 2.0**eta / (eta - 1.0)


def choose_kappa(bounds: InversionBounds) -> float:
    """Largest kappa on the grid {0.001, ..., 0.666} meeting the mode's
    admissibility condition. Larger kappa shrinks J >= D/kappa and hence M."""
    best = None
    k = KAPPA_GRID_STEP
    while k < 2.0 / 3.0:
        if _kappa_ok(bounds.mode, k, bounds.eta):
            best = k
        k = round(k + KAPPA_GRID_STEP, 9)
    if best is None:
        # feasibility is guaranteed for admissible eta: kappa -> 0 always works
        raise DomainError("no admissible kappa found; check eta > 1")
    return best


def default_eps(bounds: InversionBounds, kappa: float, D: float) -> float:
    """Accuracy making the two lower bounds on J coincide for the given D."""
    if not D > 0:
        raise DomainError("D must be positive")
    v = _v_aggregate(bounds.mode, kappa, bounds.eta)
    if bounds.mode is BoundMode.CDF_TAIL:
        return 1.5 * bounds.R * v * kappa**bounds.eta * D ** (-bounds.eta)
    return 1.5 * bounds.R * v * kappa ** (bounds.eta - 1.0) * D ** (-bounds.eta + 1.0)


def tuned_D(delta: float, eta: float, p: float) -> float:
    """Window width D = delta^(p/(p-eta)) equilibrating the L^p error terms."""
    if not eta > p:
        raise InfeasibleOrderError(f"need eta > p, got eta={eta}, p={p}")
    if not delta > 0:
        raise DomainError("delta must be positive")
    return delta ** (p / (p - eta))


def _j_lower_bounds(bounds: InversionBounds, kappa: float, D: float, eps: float):
    v = _v_aggregate(bounds.mode, kappa, bounds.eta)
    if bounds.mode is BoundMode.CDF_TAIL:
        j2 = (1.5 * bounds.R * v / eps) ** (1.0 / bounds.eta)
    else:
        j2 = (1.5 * bounds.R * v / eps) ** (1.0 / (bounds.eta - 1.0))
    return D / kappa, j2


def _summand_count(J: float, eps: float, theta: float, log_B: float) -> float:
    return 2.0 + 2.0 * J * math.exp(
        (math.log(6.0) + log_B - math.log(eps * math.pi * theta)) / theta
    )


@dataclass
class InversionPlan:
    """Precomputed Fourier coefficients plus their certification parameters.

    ``q[k]`` holds the coefficients for k = 0 .. M/2 - 1 (Hermitean symmetry
    covers negative k and q_{M/2} is zero); the certified guarantee is
    |F(x) - F_true(x)| < eps on [-D/2, D/2].
    """

    model: CharFnModel
    delta: float
    bounds: InversionBounds
    kappa: float
    J: float
    M: int
    D: float
    eps: float
    q: np.ndarray
    _tables: object = field(default=None, repr=False, compare=False)

    @property
    def omega(self) -> float:
        return 2.0 * math.pi / self.J

    @property
    def half_width(self) -> float:
        return 0.5 * self.D

    def __post_init__(self):
        if self.M % 2 != 0 or self.M < 4:
            raise DomainError("M must be an even integer >= 4")
        if self.q.shape[0] != self.M // 2:
            raise DomainError("coefficient array must have length M/2")
        if self.q[0] != 0.5:
            raise DomainError("q_0 must equal 1/2")


def build_plan(
    model: CharFnModel,
    delta: float,
    bounds: InversionBounds,
    D: float,
    eps: float,
    *,
    kappa: Optional[float] = None,
    m_cap: int = M_HARD_CAP,
) -> InversionPlan:
    """Certify (kappa, J, M) for the target accuracy and precompute q_k."""
    if not delta > 0 or not D > 0 or not eps > 0:
        raise DomainError("delta, D and eps must be positive")
    if kappa is None:
        kappa = choose_kappa(bounds)
    elif not _kappa_ok(bounds.mode, kappa, bounds.eta):
        raise DomainError(f"kappa = {kappa} violates the admissibility condition")
    j1, j2 = _j_lower_bounds(bounds, kappa, D, eps)
    J = max(j1, j2)
    m_min = _summand_count(J, eps, bounds.theta, bounds.log_B)
    if not math.isfinite(m_min) or m_min > m_cap:
        raise PlanTooLargeError(m_min, m_cap)
    M = max(4, 2 * math.ceil(m_min / 2.0))
    half = M // 2
    k = np.arange(1, half)
    u = 2.0 * math.pi * k / J
    log_pow = charfn.log_cf_power_grid(model, delta, u)
    # q_k needs phi(-u_k)^delta = conj(phi(u_k)^delta)
    phi_pow = np.exp(np.conj(log_pow))
    weights = (1.0 - np.cos(2.0 * math.pi * kappa * k)) / (2.0 * math.pi * k)
    q = np.empty(half, dtype=complex)
    q[0] = 0.5
    q[1:] = -1j * weights * phi_pow
    return InversionPlan(model, delta, bounds, kappa, J, M, D, eps, q)


def eval_cdf(plan: InversionPlan, x) -> float | np.ndarray:
    """The approximate CDF at x (scalar or array), real by construction."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = cdf_values(plan.q, plan.omega, xs)
    return float(out[0]) if np.isscalar(x) or np.asarray(x).ndim == 0 else out


def eval_cdf_derivative(plan: InversionPlan, x) -> float | np.ndarray:
    """Exact x-derivative of the finite trigonometric sum."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    _, df = cdf_and_derivative(plan.q, plan.omega, xs)
    return float(df[0]) if np.isscalar(x) or np.asarray(x).ndim == 0 else df


# ---------------------------------------------------------------------------
# theta selection and the automatic pipeline
# ---------------------------------------------------------------------------


def select_theta(
    candidates: Sequence[ThetaBound], J: float, eps: float
) -> tuple[ThetaBound, float]:
    """The feasible (theta, B) whose certified summand count M is smallest."""
    best = None
    for tb in candidates:
        if not tb.feasible:
            continue
        m = _summand_count(J, eps, tb.theta, tb.log_B)
        if best is None or m < best[1]:
            best = (tb, m)
    if best is None:
        raise DomainError("no feasible (theta, B) pair in the scanned range")
    return best


def build_plan_auto(
    model: CharFnModel,
    delta: float,
    eta: int,
    *,
    p: float = 1.0,
    D: Optional[float] = None,
    eps: Optional[float] = None,
    theta_grid: Optional[Sequence[float]] = None,
    mode: BoundMode = BoundMode.CDF_TAIL,
    m_cap: int = M_HARD_CAP,
) -> InversionPlan:
    """Full tuning pipeline: R from moments, kappa, window, accuracy, theta sweep.

    Defaults follow the experimental recipe: D = delta^(p/(p-eta)), eps chosen
    so both J bounds coincide, theta from the sweep 1, 1.5, ..., 100 taking the
    smallest certified M.
    """
    if mode is not BoundMode.CDF_TAIL:
        raise DomainError("automatic tuning derives R from moments (CDF-tail mode)")
    R = charfn.tail_bound_R(model, delta, eta)
    probe = InversionBounds(mode, eta, R, theta=1.0, B=1.0)
    kappa = choose_kappa(probe)
    if D is None:
        D = tuned_D(delta, eta, p)
    if eps is None:
        eps = default_eps(probe, kappa, D)
    J = max(*_j_lower_bounds(probe, kappa, D, eps))
    grid = charfn.default_theta_grid() if theta_grid is None else theta_grid
    candidates = charfn.estimate_theta_B(model, delta, grid)
    best, _ = select_theta(candidates, J, eps)
    bounds = InversionBounds(mode, eta, R, best.theta, best.B, best.log_B)
    return build_plan(model, delta, bounds, D, eps, kappa=kappa, m_cap=m_cap)


# ---------------------------------------------------------------------------
# L^p error budgets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ErrorBudget:
    """Closed-form L^p error budget for a piecewise-constant approximation.

    ``total = tail_term + cdf_gap_term + bridge_term``; the first two bound
    the per-step inversion error accumulated over T/delta steps (window
    clamping and CDF gap), the third the refinement (bridge) error with the
    computable stand-in constant E|l(1)|^p.
    """

    p: float
    tail_term: float
    cdf_gap_term: float
    bridge_term: float
    total: float
    e_gig_1: Optional[float] = None
    e_gig_2: Optional[float] = None


def lp_sampling_budget(
    model: CharFnModel,
    bounds: InversionBounds,
    D: float,
    C: float,
    p: float,
    delta: float,
    T: float,
) -> ErrorBudget:
    """Evaluate the L^p budget for step size delta on [0, T].

    ``C`` is the window constant in D = C * eps^(-1/eta) (CDF-tail mode) resp.
    D = C * eps^(-1/(eta-1)) (density-tail mode); with the default accuracy it
    equals kappa * (1.5 R V)^(1/eta) resp. the (eta-1)-root analogue.
    """
    if not p >= 1:
        raise InfeasibleOrderError("p must be >= 1")
    eta = bounds.eta
    if bounds.mode is BoundMode.CDF_TAIL:
        if not p < eta:
            raise InfeasibleOrderError(f"CDF-tail budget needs p < eta ({p} >= {eta})")
        tail = 2.0 * bounds.R * p * hurwitz_zeta(eta + 1.0 - p, D / 2.0) + 2.0 * bounds.R * (
            D / 2.0
        ) ** (p - eta)
        gap = C**eta * D ** (p - eta)
    else:
        if not p < eta - 1.0:
            raise InfeasibleOrderError(
                f"density-tail budget needs p < eta - 1 ({p} >= {eta - 1})"
            )
        tail = 2.0 ** (p + 1.0) * bounds.R * hurwitz_zeta(eta - p, D / 2.0)
        gap = C ** (eta - 1.0) * D ** (p - (eta - 1.0))
    steps = T / delta
    tail_term = steps * tail ** (1.0 / p)
    gap_term = steps * gap ** (1.0 / p)
    # stand-in for E|l(1)|^p: exact for nonnegative laws at p=1 and any law at
    # p=2; otherwise the sqrt of the second moment is used as a proxy.
    if p == 2.0:
        c_ltp = charfn.moment_at_zero(model, 1.0, 2)
    else:
        m1 = charfn.moment_at_zero(model, 1.0, 1)
        if isinstance(model, (charfn.Gig, charfn.Ig)) and p == 1.0:
            c_ltp = m1
        else:
            c_ltp = math.sqrt(charfn.moment_at_zero(model, 1.0, 2))
    bridge = c_ltp ** (1.0 / p) * (delta / T) ** (1.0 / p) / (2.0 ** (1.0 / p) - 1.0)
    total = tail_term + gap_term + bridge
    return ErrorBudget(p, tail_term, gap_term, bridge, total)


def window_constant(bounds: InversionBounds, kappa: float) -> float:
    """C with D = C * eps^(-d): kappa * (1.5 R V)^d for the mode's exponent d."""
    v = _v_aggregate(bounds.mode, kappa, bounds.eta)
    if bounds.mode is BoundMode.CDF_TAIL:
        return kappa * (1.5 * bounds.R * v) ** (1.0 / bounds.eta)
    return kappa * (1.5 * bounds.R * v) ** (1.0 / (bounds.eta - 1.0))


def subordinator_error_pair(
    model: CharFnModel, delta: float, eta: int, T: float = 1.0
) -> tuple[ErrorBudget, ErrorBudget]:
    """(E^1, E^2) budgets for a subordinator under the default tuning."""
    R = charfn.tail_bound_R(model, delta, eta)
    probe = InversionBounds(BoundMode.CDF_TAIL, eta, R, 1.0, 1.0)
    kappa = choose_kappa(probe)
    D = tuned_D(delta, eta, 1.0)
    C = window_constant(probe, kappa)
    e1 = lp_sampling_budget(model, probe, D, C, 1.0, delta, T)
    e2 = lp_sampling_budget(model, probe, D, C, 2.0, delta, T)
    return e1, e2


def plan_to_csv(plan: InversionPlan, path) -> None:
    """Dump the stored coefficients (k, Re q_k, Im q_k) for audit."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "re", "im"])
        for k, qk in enumerate(plan.q):
            writer.writerow([k, repr(qk.real), repr(qk.imag)])
