"""Multivariate generalized hyperbolic laws built from GIG-subordinated
Brownian motion: densities, subordination, marginal extraction, the
decorrelation construction and point laws of weighted sums.

Parameter conventions: GIG(a, b, p) has density proportional to
x^(p-1) exp(-(a^2/x + b^2 x)/2); GH_N(lambda, alpha, beta, delta, mu, Gamma)
is the normal variance-mean mixture over GIG(delta, sqrt(alpha^2 -
beta'Gamma beta), lambda) with symmetric positive definite structure matrix
Gamma of unit determinant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import charfn
from .errors import (
    DegenerateCombinationError,
    DomainError,
    IncompatibleScaleError,
    IncompatibleShapeError,
    InfeasibleDecorrelationError,
    InvalidSubordinatorError,
)
from .sampler import PathSkeleton
from .specfun import log_bessel_k

__all__ = [
    "GigParams",
    "Gh1Params",
    "GhNParams",
    "gig_density",
    "gh1_density",
    "ghn_density",
    "subordinator_of",
    "subordinate",
    "marginal",
    "decorrelate",
    "gh_mean",
    "gh_cov",
    "gh1_mean",
    "gh1_variance",
    "point_law",
    "to_charfn_gig",
    "to_charfn_gh1",
]

_DET_TOL = 1e-9
_SYM_TOL = 1e-12


@dataclass(frozen=True)
class GigParams:
    """Generalized inverse Gaussian parameters (a, b > 0, p real)."""

    a: float
    b: float
    p: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise DomainError("GIG requires a > 0 and b > 0")


@dataclass(frozen=True)
class Gh1Params:
    """One-dimensional GH parameters with the admissibility alpha^2 > beta^2."""

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

    @property
    def scale_invariant(self) -> float:
        """delta * sqrt(alpha^2 - beta^2); equal across joint marginals."""
        return self.delta * self.gamma_bar


@dataclass(frozen=True)
class GhNParams:
    """N-dimensional GH parameters with unit-determinant structure matrix.

    When ``strict`` is False (default) an input Gamma with determinant != 1 is
    renormalized by the law-preserving rescaling Gamma -> c*Gamma,
    delta -> delta/sqrt(c), alpha -> alpha*sqrt(c) with c = det(Gamma)^(-1/N);
    with ``strict`` it is rejected instead.
    """

    n: int
    lam: float
    alpha: float
    delta: float
    beta: np.ndarray
    mu: np.ndarray
    gamma: np.ndarray
    strict: bool = field(default=False, compare=False)

    def __post_init__(self):
        beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        gamma = np.asarray(self.gamma, dtype=float)
        if self.n < 1 or beta.shape != (self.n,) or mu.shape != (self.n,):
            raise DomainError("beta and mu must be vectors of length n")
        if gamma.shape != (self.n, self.n):
            raise DomainError("gamma must be an n-by-n matrix")
        if np.max(np.abs(gamma - gamma.T)) > _SYM_TOL * (1.0 + np.max(np.abs(gamma))):
            raise DomainError("gamma must be symmetric")
        gamma = 0.5 * (gamma + gamma.T)
        sign, logdet = np.linalg.slogdet(gamma)
        if sign <= 0:
            raise DomainError("gamma must be positive definite")
        alpha, delta = self.alpha, self.delta
        if abs(math.expm1(logdet)) > _DET_TOL:
            if self.strict:
                raise DomainError(
                    f"gamma determinant {math.exp(logdet):.6g} != 1 (strict mode)"
                )
            c = math.exp(-logdet / self.n)
            gamma = gamma * c
            delta = delta / math.sqrt(c)
            alpha = alpha * math.sqrt(c)
        if not (alpha > 0 and delta > 0):
            raise DomainError("GH requires alpha > 0 and delta > 0")
        if not alpha**2 > float(beta @ gamma @ beta):
            raise DomainError("GH requires alpha^2 > beta' Gamma beta")
        np.linalg.cholesky(gamma)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "alpha", float(alpha))
        object.__setattr__(self, "delta", float(delta))

    @property
    def gamma_bar(self) -> float:
        return math.sqrt(self.alpha**2 - float(self.beta @ self.gamma @ self.beta))


# ---------------------------------------------------------------------------
# Densities
# ---------------------------------------------------------------------------


def gig_density(params: GigParams, x) -> float | np.ndarray:
    """GIG density; zero for x <= 0."""
    xs = np.asarray(x, dtype=float)
    out = np.zeros_like(xs, dtype=float)
    pos = xs > 0
    ab = params.a * params.b
    log_norm = params.p * math.log(params.b / params.a) - math.log(2.0) - log_bessel_k(
        params.p, ab
    )
    xp = xs[pos]
    out[pos] = np.exp(
        log_norm
        + (params.p - 1.0) * np.log(xp)
        - 0.5 * (params.a**2 / xp + params.b**2 * xp)
    )
    return float(out) if np.isscalar(x) else out


def gh1_density(params: Gh1Params, x) -> float | np.ndarray:
    """One-dimensional GH density."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    gb = params.gamma_bar
    lam, alpha, delta = params.lam, params.alpha, params.delta
    g = np.sqrt(delta**2 + (xs - params.mu) ** 2)
    log_pref = (
        lam * math.log(gb / delta)
        + (0.5 - lam) * math.log(alpha)
        - 0.5 * math.log(2.0 * math.pi)
        - log_bessel_k(lam, delta * gb)
    )
    kv = np.array([log_bessel_k(lam - 0.5, alpha * gi) for gi in g])
    out = np.exp(log_pref + kv + (lam - 0.5) * np.log(g) + params.beta * (xs - params.mu))
    return float(out[0]) if np.isscalar(x) else out


def ghn_density(params: GhNParams, x: np.ndarray) -> float:
    """N-dimensional GH density at a point."""
    x = np.asarray(x, dtype=float)
    if x.shape != (params.n,):
        raise DomainError("x must be a vector of length n")
    d = x - params.mu
    gb = params.gamma_bar
    n, lam = params.n, params.lam
    g = math.sqrt(params.delta**2 + float(d @ params.gamma @ d))
    log_val = (
        lam * math.log(gb / params.delta)
        + (0.5 * n - lam) * math.log(params.alpha)
        - 0.5 * n * math.log(2.0 * math.pi)
        - log_bessel_k(lam, params.delta * gb)
        + log_bessel_k(lam - 0.5 * n, params.alpha * g)
        + (lam - 0.5 * n) * math.log(g)
        + float(params.beta @ d)
    )
    return math.exp(log_val)


# ---------------------------------------------------------------------------
# Subordination
# ---------------------------------------------------------------------------


def subordinator_of(params: GhNParams) -> GigParams:
    """The GIG law of the common subordinator: (a, b, p) = (delta, gamma_bar, lambda)."""
    return GigParams(params.delta, params.gamma_bar, params.lam)


def subordinate(
    params: GhNParams, gig_path: PathSkeleton, normals: np.ndarray
) -> np.ndarray:
    """GH_N increments from subordinator increments and i.i.d. standard normals.

    ``normals`` has shape (steps, n); step j receives
    mu*delta_t + Gamma beta * dG_j + sqrt(dG_j) * chol(Gamma) w_j.
    """
    d_gig = gig_path.increments()
    if np.any(d_gig < 0):
        raise InvalidSubordinatorError("subordinator increments must be nonnegative")
    steps = d_gig.shape[0]
    normals = np.asarray(normals, dtype=float)
    if normals.shape != (steps, params.n):
        raise DomainError(f"normals must have shape ({steps}, {params.n})")
    chol = np.linalg.cholesky(params.gamma)
    drift = params.mu[None, :] * gig_path.delta
    skew = np.outer(d_gig, params.gamma @ params.beta)
    diffuse = np.sqrt(d_gig)[:, None] * (normals @ chol.T)
    return drift + skew + diffuse


# ---------------------------------------------------------------------------
# Marginals, point laws, decorrelation
# ---------------------------------------------------------------------------


def marginal(params: GhNParams, i: int) -> Gh1Params:
    """Law of the i-th coordinate (0-based index)."""
    if not 0 <= i < params.n:
        raise DomainError("index out of range")
    if params.n == 1:
        return Gh1Params(
            params.lam, params.alpha, float(params.beta[0]), params.delta, float(params.mu[0])
        )
    g = params.gamma
    keep = [j for j in range(params.n) if j != i]
    gii = g[i, i]
    g12 = g[i, keep]
    g22 = g[np.ix_(keep, keep)]
    b_rest = params.beta[keep]
    schur = g22 - np.outer(g12, g12) / gii
    alpha_i = math.sqrt((params.alpha**2 - float(b_rest @ schur @ b_rest)) / gii)
    beta_i = float(params.beta[i] + (g12 @ b_rest) / gii)
    delta_i = math.sqrt(gii) * params.delta
    return Gh1Params(params.lam, alpha_i, beta_i, delta_i, float(params.mu[i]))


def point_law(params: GhNParams, coeffs: np.ndarray) -> Gh1Params:
    """Law of the weighted sum sum_i coeffs[i] * X_i of a joint GH vector.

    Zero coefficients are dropped first; all-zero coefficients are rejected.
    """
    coeffs = np.atleast_1d(np.asarray(coeffs, dtype=float))
    if coeffs.shape != (params.n,):
        raise DomainError("coefficient vector must have length n")
    nz = np.nonzero(coeffs)[0]
    if nz.size == 0:
        raise DegenerateCombinationError("all combination coefficients vanish")
    if nz.size < params.n:
        params = _submodel(params, nz)
        coeffs = coeffs[nz]
    n = params.n
    mu_l = float(coeffs @ params.mu)
    if n == 1:
        a = float(coeffs[0])
        s = abs(a)
        return Gh1Params(
            params.lam,
            params.alpha / s,
            float(params.beta[0]) / a,
            params.delta * s,
            mu_l,
        )
    amat = np.zeros((n, n))
    amat[0, :] = coeffs
    for j in range(1, n):
        amat[j, j] = coeffs[j]
    gt = amat @ params.gamma @ amat.T
    gt11 = gt[0, 0]
    gt21 = gt[1:, 0]
    gt22 = gt[1:, 1:]
    beta_tilde = params.beta[1:] / coeffs[1:] - params.beta[0] / coeffs[0]
    schur = gt22 - np.outer(gt21, gt21) / gt11
    alpha_l = math.sqrt(
        (params.alpha**2 - float(beta_tilde @ schur @ beta_tilde)) / gt11
    )
    delta_l = params.delta * math.sqrt(gt11)
    beta_l = float(params.beta[0] / coeffs[0] + (gt21 @ beta_tilde) / gt11)
    return Gh1Params(params.lam, alpha_l, beta_l, delta_l, mu_l)


def _submodel(params: GhNParams, idx: np.ndarray) -> GhNParams:
    """Joint law of a sub-vector of coordinates (block marginalization)."""
    idx = np.asarray(idx, dtype=int)
    m = idx.size
    rest = np.array([j for j in range(params.n) if j not in set(idx.tolist())], dtype=int)
    g11 = params.gamma[np.ix_(idx, idx)]
    det11 = float(np.linalg.det(g11))
    if rest.size == 0:
        gamma_s = g11
        alpha_s = params.alpha
        delta_s = params.delta
        beta_s = params.beta[idx]
    else:
        g12 = params.gamma[np.ix_(idx, rest)]
        g22 = params.gamma[np.ix_(rest, rest)]
        b2 = params.beta[rest]
        schur = g22 - g12.T @ np.linalg.solve(g11, g12)
        scale = det11 ** (1.0 / (2.0 * m))
        gamma_s = g11 / det11 ** (1.0 / m)
        delta_s = params.delta * scale
        alpha_s = math.sqrt(params.alpha**2 - float(b2 @ schur @ b2)) / scale
        beta_s = params.beta[idx] + np.linalg.solve(g11, g12 @ b2)
    return GhNParams(
        n=m,
        lam=params.lam,
        alpha=alpha_s,
        delta=delta_s,
        beta=beta_s,
        mu=params.mu[idx],
        gamma=gamma_s,
    )


def decorrelate(marginals: list[Gh1Params]) -> GhNParams:
    """Assemble an N-dimensional GH law with uncorrelated coordinates whose
    marginals match the given one-dimensional laws.

    Requires all shape parameters lambda equal and all scale invariants
    delta*sqrt(alpha^2-beta^2) equal; the assembled matrix U must be positive
    definite.
    """
    n = len(marginals)
    if n < 1:
        raise DomainError("need at least one marginal")
    lam = marginals[0].lam
    if any(abs(m.lam - lam) > 1e-9 for m in marginals):
        raise IncompatibleShapeError("all marginals must share the same lambda")
    c = marginals[0].scale_invariant
    for m in marginals:
        if abs(m.scale_invariant - c) > 1e-9 * abs(c):
            raise IncompatibleScaleError(
                "all marginals must share delta*sqrt(alpha^2-beta^2)"
            )
    deltas = np.array([m.delta for m in marginals])
    betas = np.array([m.beta for m in marginals])
    mus = np.array([m.mu for m in marginals])
    k0 = log_bessel_k(lam, c)
    k1 = log_bessel_k(lam + 1.0, c)
    k2 = log_bessel_k(lam + 2.0, c)
    # (K_{l+1}^2 - K_{l+2} K_l) / (K_{l+1} K_l), evaluated stably in logs
    off_factor = math.exp(k1 - k0) - math.exp(k2 - k1)
    u = np.diag(deltas**2).astype(float)
    w = betas * deltas**2
    outer = np.outer(w, w) * (off_factor / c)
    u[~np.eye(n, dtype=bool)] = outer[~np.eye(n, dtype=bool)]
    try:
        np.linalg.cholesky(u)
    except np.linalg.LinAlgError as exc:
        raise InfeasibleDecorrelationError("matrix U is not positive definite") from exc
    sign, logdet = np.linalg.slogdet(u)
    delta_u = math.exp(logdet / (2.0 * n))
    gamma_u = u / delta_u**2
    # diag(1/Gamma_ii) Gamma beta_u = beta  =>  Gamma beta_u = diag(Gamma_ii) beta
    rhs = np.diag(gamma_u) * betas
    beta_u = np.linalg.solve(gamma_u, rhs)
    alpha_u = math.sqrt(float(beta_u @ gamma_u @ beta_u) + (c / delta_u) ** 2)
    return GhNParams(
        n=n, lam=lam, alpha=alpha_u, delta=delta_u, beta=beta_u, mu=mus, gamma=gamma_u
    )


# ---------------------------------------------------------------------------
# Moments
# ---------------------------------------------------------------------------


def _bessel_ratios(lam: float, x: float) -> tuple[float, float]:
    k0 = log_bessel_k(lam, x)
    return math.exp(log_bessel_k(lam + 1.0, x) - k0), math.exp(
        log_bessel_k(lam + 2.0, x) - k0
    )


def gh_mean(params: GhNParams) -> np.ndarray:
    """Mean vector of the GH law at time 1."""
    gb = params.gamma_bar
    r1, _ = _bessel_ratios(params.lam, params.delta * gb)
    return params.mu + params.delta / gb * r1 * (params.gamma @ params.beta)


def gh_cov(params: GhNParams) -> np.ndarray:
    """Covariance matrix of the GH law at time 1 (symmetric PSD)."""
    gb = params.gamma_bar
    r1, r2 = _bessel_ratios(params.lam, params.delta * gb)
    gb_beta = params.gamma @ params.beta
    cov = (
        params.delta / gb * r1 * params.gamma
        + (params.delta / gb) ** 2 * (r2 - r1 * r1) * np.outer(gb_beta, gb_beta)
    )
    return 0.5 * (cov + cov.T)


def gh1_mean(params: Gh1Params) -> float:
    gb = params.gamma_bar
    r1, _ = _bessel_ratios(params.lam, params.delta * gb)
    return params.mu + params.delta / gb * r1 * params.beta


def gh1_variance(params: Gh1Params) -> float:
    gb = params.gamma_bar
    r1, r2 = _bessel_ratios(params.lam, params.delta * gb)
    return params.delta / gb * r1 + (params.delta / gb) ** 2 * (r2 - r1 * r1) * params.beta**2


# ---------------------------------------------------------------------------
# Adapters to characteristic-function models
# ---------------------------------------------------------------------------


def to_charfn_gig(params: GigParams) -> charfn.Gig:
    return charfn.Gig(params.a, params.b, params.p)


def to_charfn_gh1(params: Gh1Params) -> charfn.Gh1:
    return charfn.Gh1(params.lam, params.alpha, params.beta, params.delta, params.mu)
