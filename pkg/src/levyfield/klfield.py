"""Matern covariance operator, Nystrom eigenpairs, truncation selection and
assembly of the approximated random field.

The covariance operator Q on L^2 of an interval acts by integration against
v * k_chi(x, y); its trace equals v times the interval length because the
unscaled kernel is one on the diagonal. Eigenpairs are approximated on a
midpoint quadrature grid through the symmetrized discrete problem and
interpolated off the nodes by the quadrature identity.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import charfn, ghmodel, inversion, sampler
from .errors import DegenerateModeError, DomainError
from .specfun import gamma_fn, log_bessel_k

__all__ = [
    "MaternConfig",
    "KlBasis",
    "FieldSample",
    "TruncationChoice",
    "matern_kernel",
    "nystrom_eigs",
    "nystrom_interp",
    "c_ell_constants",
    "truncation_select",
    "assemble_field",
    "field_error_bound",
]


@dataclass(frozen=True)
class MaternConfig:
    """Matern covariance parameters: variance v, correlation length r,
    smoothness chi."""

    v: float
    r: float
    chi: float

    def __post_init__(self):
        if not (self.v > 0 and self.r > 0 and self.chi > 0):
            raise DomainError("Matern parameters must be positive")


def matern_kernel(x, y, cfg: MaternConfig) -> float | np.ndarray:
    """Unscaled Matern kernel k_chi(x, y) with k(x, x) = 1."""
    d = np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
    scalar = d.ndim == 0
    d = np.atleast_1d(d)
    out = np.ones_like(d)
    nz = d > 0
    if np.any(nz):
        z = math.sqrt(2.0 * cfg.chi) * d[nz] / cfg.r
        log_pref = (1.0 - cfg.chi) * math.log(2.0) - math.log(gamma_fn(cfg.chi))
        vals = np.array(
            [math.exp(log_pref + cfg.chi * math.log(zi) + log_bessel_k(cfg.chi, zi)) for zi in z]
        )
        out[nz] = vals
    return float(out[0]) if scalar else out


@dataclass
class KlBasis:
    """Nystrom-discretized eigenpairs of the Matern covariance operator.

    ``evecs[:, i]`` holds eigenfunction i at the nodes, orthonormal under the
    quadrature weights; ``rho`` is nonincreasing with negatives clipped to 0.
    """

    cfg: MaternConfig
    domain: tuple[float, float]
    nodes: np.ndarray
    weights: np.ndarray
    rho: np.ndarray
    evecs: np.ndarray

    @property
    def trace(self) -> float:
        return float(np.sum(self.rho))

    @property
    def size(self) -> int:
        return int(self.rho.shape[0])


def nystrom_eigs(cfg: MaternConfig, domain: tuple[float, float], m: int) -> KlBasis:
    """Eigenpairs of Q = v * integral of k_chi on the interval, midpoint rule.

    Solves the symmetric problem W^(1/2) K W^(1/2) and rescales eigenvectors
    back to node values of the eigenfunctions.
    """
    lo, hi = domain
    if not (hi > lo and m >= 2):
        raise DomainError("domain must be nondegenerate and m >= 2")
    h = (hi - lo) / m
    nodes = lo + h * (np.arange(m) + 0.5)
    weights = np.full(m, h)
    # the midpoint grid is uniform: |x_i - x_j| takes only m distinct values
    dist_vals = matern_kernel(nodes[0], nodes, cfg)
    idx = np.abs(np.subtract.outer(np.arange(m), np.arange(m)))
    kmat = cfg.v * dist_vals[idx]
    sq = math.sqrt(h)
    sym = kmat * h  # W^(1/2) K W^(1/2) for constant weights
    evals, evecs = np.linalg.eigh(sym)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order] / sq  # back to function values, weighted-orthonormal
    return KlBasis(cfg, (lo, hi), nodes, weights, evals, evecs)


def nystrom_interp(basis: KlBasis, i: int, x) -> float | np.ndarray:
    """Eigenfunction i off the nodes via the quadrature identity
    e_i(x) = (1/rho_i) * sum_j w_j v k(x, x_j) e_i(x_j)."""
    if not 0 <= i < basis.size:
        raise DomainError("eigenpair index out of range")
    if basis.rho[i] <= 0.0:
        raise DegenerateModeError(f"eigenvalue {i} is zero; cannot interpolate")
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty(xs.shape)
    coeff = basis.weights * basis.evecs[:, i]
    for j, xj in enumerate(xs):
        krow = basis.cfg.v * matern_kernel(xj, basis.nodes, basis.cfg)
        out[j] = float(krow @ coeff) / basis.rho[i]
    return float(out[0]) if np.isscalar(x) else out


# ---------------------------------------------------------------------------
# Truncation and error bookkeeping
# ---------------------------------------------------------------------------


def c_ell_constants(
    e1: float, e2: float, params: ghmodel.GhNParams, delta: float
) -> tuple[np.ndarray, float]:
    """Per-coordinate mean-square path constants and their maximum.

    C_i = (e2 * (Gamma beta)_i^2 + e1 * ||Gamma_[i]||) / delta, built from the
    subordinator budgets e1 = E^1 and e2 = E^2.
    """
    if e1 < 0 or e2 < 0:
        raise DomainError("budgets must be nonnegative")
    gb = params.gamma @ params.beta
    row_norms = np.sqrt(np.sum(params.gamma**2, axis=1))
    cs = (e2 * gb**2 + e1 * row_norms) / delta
    return cs, float(np.max(cs))


class TruncationChoice(NamedTuple):
    n: int
    capped: bool


def truncation_select(
    basis: KlBasis, c_ell: float, delta: float, T: float
) -> TruncationChoice:
    """Smallest N equilibrating truncation tail against sampling error:
    T * (tr Q - sum_{i<=N} rho_i) <= c_ell * delta * sum_{i<=N} rho_i."""
    if not c_ell > 0:
        raise DomainError("c_ell must be positive")
    partial = np.cumsum(basis.rho)
    tr = partial[-1]
    ok = T * (tr - partial) <= c_ell * delta * partial
    if not ok.any():
        return TruncationChoice(basis.size, True)
    return TruncationChoice(int(np.argmax(ok)) + 1, False)


def field_error_bound(
    basis: KlBasis, N: int, c_ell: float, delta: float, T: float
) -> float:
    """Mean-square field error bound: sqrt(T * tail) + sqrt(c_ell*delta*head)."""
    if not 1 <= N <= basis.size:
        raise DomainError("N out of range")
    head = float(np.sum(basis.rho[:N]))
    tail = max(float(np.sum(basis.rho)) - head, 0.0)
    return math.sqrt(T * tail) + math.sqrt(c_ell * delta * head)


# ---------------------------------------------------------------------------
# Field assembly
# ---------------------------------------------------------------------------


@dataclass
class FieldSample:
    """Field values on an (x, t) grid, piecewise constant in t."""

    x: np.ndarray
    t: np.ndarray
    values: np.ndarray  # shape (len(x), len(t))
    meta: dict

    def __post_init__(self):
        if self.values.shape != (self.x.shape[0], self.t.shape[0]):
            raise DomainError("values must have shape (len(x), len(t))")
        if np.any(self.values[:, 0] != 0.0):
            raise DomainError("fields start at zero")

    def to_csv(self, path) -> None:
        header = "x\\t," + ",".join(repr(float(tj)) for tj in self.t)
        rows = [
            ",".join([repr(float(xi))] + [repr(float(v)) for v in row])
            for xi, row in zip(self.x, self.values)
        ]
        with open(path, "w") as fh:
            fh.write(header + "\n")
            fh.write("\n".join(rows) + "\n")

    def write_metadata(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.meta, fh, indent=2, sort_keys=True, default=str)


def assemble_field(
    basis: KlBasis,
    N: int,
    params: ghmodel.GhNParams,
    n: int,
    T: float,
    x_grid: np.ndarray,
    stream: sampler.RngStream,
    *,
    plan: Optional[inversion.InversionPlan] = None,
    eta: int = 4,
    theta_grid: Optional[Sequence[float]] = None,
) -> FieldSample:
    """One realization of the truncated field sum_i sqrt(rho_i) e_i(x) l_i(t).

    Draws one subordinator path by Fourier inversion, subordinates an N-dim
    Brownian motion, normalizes each coordinate process to unit variance per
    unit time and contracts against the spectral basis. Deterministic given
    the stream.
    """
    if N > basis.size:
        raise DomainError("N exceeds the basis size")
    if params.n != N:
        raise DomainError("params dimension must equal N")
    delta = T / 2**n
    if plan is None:
        gig = ghmodel.subordinator_of(params)
        plan = inversion.build_plan_auto(
            charfn.Gig(gig.a, gig.b, gig.p), delta, eta, p=1.0, theta_grid=theta_grid
        )
    gig_path = sampler.sample_path(plan, n, T, stream.split(0))
    steps = 2**n
    normals = stream.split(1).generator().standard_normal((steps, N))
    incs = ghmodel.subordinate(params, gig_path, normals)
    sd = np.sqrt(np.diag(ghmodel.gh_cov(params)))
    incs = incs / sd[None, :]
    paths = np.vstack([np.zeros(N), np.cumsum(incs, axis=0)])  # (steps+1, N)
    x_grid = np.asarray(x_grid, dtype=float)
    phi = np.empty((x_grid.shape[0], N))
    for i in range(N):
        phi[:, i] = math.sqrt(basis.rho[i]) * nystrom_interp(basis, i, x_grid)
    values = phi @ paths.T  # (len(x), steps+1)
    t = np.arange(steps + 1) * delta
    meta = {
        "seed": stream.master_seed,
        "stream_index": stream.stream_index,
        "N": N,
        "delta": delta,
        "T": T,
        "eta": eta,
        "plan_M": plan.M,
        "plan_J": plan.J,
        "plan_D": plan.D,
        "plan_eps": plan.eps,
        "gh": {
            "lambda": params.lam,
            "alpha": params.alpha,
            "delta": params.delta,
        },
        "matern": {"v": basis.cfg.v, "r": basis.cfg.r, "chi": basis.cfg.chi},
    }
    return FieldSample(x_grid, t, values, meta)
