"""Goodness-of-fit and error-measurement harness: one-sample KS tests against
numerically integrated reference CDFs, empirical correlations and convergence
studies for the coupled path error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator

from . import charfn, inversion, sampler
from .errors import DomainError, NumericFailureError

__all__ = [
    "KsResult",
    "numeric_cdf",
    "cached_cdf",
    "ks_test",
    "empirical_corr",
    "ConvergenceRow",
    "ConvergenceStudy",
    "convergence_study",
]


@dataclass(frozen=True)
class KsResult:
    """Two-sided one-sample Kolmogorov-Smirnov result."""

    statistic: float
    p_value: float
    n: int


def numeric_cdf(density: Callable[[float], float], lo: float, hi: float, x: float) -> float:
    """CDF of a density supported on [lo, hi], by adaptive quadrature."""
    if x <= lo:
        return 0.0
    val, err = quad(density, lo, min(x, hi), epsabs=1e-10, limit=400)
    if err > 1e-6:
        raise NumericFailureError("cdf quadrature did not converge", est_error=err)
    return min(max(val, 0.0), 1.0)


def cached_cdf(
    density: Callable, lo: float, hi: float, n_grid: int = 4096
) -> Callable[[np.ndarray], np.ndarray]:
    """Reference CDF on a fixed grid with monotone interpolation.

    Fast enough for KS tests on large samples; the interpolation error is
    far below the KS resolution at the sample sizes used here.
    """
    xs = np.linspace(lo, hi, n_grid)
    dens = np.array([max(float(density(x)), 0.0) for x in xs])
    # composite Simpson on each cell pair for the cumulative values
    h = xs[1] - xs[0]
    mids = 0.5 * (xs[1:] + xs[:-1])
    dmid = np.array([max(float(density(x)), 0.0) for x in mids])
    cells = h / 6.0 * (dens[:-1] + 4.0 * dmid + dens[1:])
    cum = np.maximum.accumulate(np.concatenate([[0.0], np.cumsum(cells)]))
    interp = PchipInterpolator(xs, cum)

    def cdf(x):
        arr = np.clip(interp(np.asarray(x, dtype=float)), 0.0, 1.0)
        arr = np.where(np.asarray(x) <= lo, 0.0, arr)
        arr = np.where(np.asarray(x) >= hi, interp(hi), arr)
        return arr

    return cdf


def _kolmogorov_sf(y: float) -> float:
    """Survival function of the Kolmogorov distribution, 2*sum (-1)^(j-1) exp(-2 j^2 y^2)."""
    if y < 1e-8:
        return 1.0
    total = 0.0
    sign = 1.0
    for j in range(1, 101):
        term = math.exp(-2.0 * j * j * y * y)
        total += sign * term
        if term < 1e-16:
            break
        sign = -sign
    return min(max(2.0 * total, 0.0), 1.0)


def ks_test(samples: np.ndarray, cdf: Callable) -> KsResult:
    """Two-sided one-sample KS test with the asymptotic Kolmogorov p-value."""
    samples = np.asarray(samples, dtype=float)
    n = samples.shape[0]
    if n < 20:
        raise DomainError("KS test needs at least 20 samples")
    xs = np.sort(samples)
    f = np.asarray(cdf(xs), dtype=float)
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - f)
    d_minus = np.max(f - (i - 1) / n)
    stat = float(max(d_plus, d_minus))
    return KsResult(stat, _kolmogorov_sf(math.sqrt(n) * stat), n)


def empirical_corr(increments: np.ndarray) -> np.ndarray:
    """Correlation matrix of columns; rejects degenerate columns."""
    increments = np.asarray(increments, dtype=float)
    if increments.ndim != 2 or increments.shape[1] < 2 or increments.shape[0] < 30:
        raise DomainError("need a matrix with >= 30 rows and >= 2 columns")
    sd = np.std(increments, axis=0)
    if np.any(sd <= 0):
        raise DomainError("zero-variance column")
    c = np.corrcoef(increments, rowvar=False)
    np.fill_diagonal(c, 1.0)
    return 0.5 * (c + c.T)


# ---------------------------------------------------------------------------
# Convergence study
# ---------------------------------------------------------------------------


class ConvergenceRow(NamedTuple):
    delta: float
    empirical: float
    stderr: float
    budget: float


@dataclass(frozen=True)
class ConvergenceStudy:
    rows: list[ConvergenceRow]
    slope: float
    p: float

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("delta,empirical,stderr,budget\n")
            for r in self.rows:
                fh.write(f"{r.delta!r},{r.empirical!r},{r.stderr!r},{r.budget!r}\n")


def convergence_study(
    model: charfn.CharFnModel,
    eta: int,
    deltas: Sequence[float],
    p: float,
    n_samples: int,
    stream: sampler.RngStream,
    *,
    exact_quantile: Callable[[np.ndarray, float], np.ndarray],
    T: float = 1.0,
    theta_grid: Optional[Sequence[float]] = None,
) -> ConvergenceStudy:
    """Coupled-uniform path error against an exact quantile oracle, per delta.

    For each step size the same uniforms drive the exact increments
    ``exact_quantile(u, delta)`` and the pseudo-inverted ones; the empirical
    L^p path error sup_t E(|l(t) - l~(t)|^p)^(1/p) is estimated over
    ``n_samples`` paths and set against the closed-form budget. The log-log
    slope is the least-squares fit of log(error) on log(delta).
    """
    if p not in (1.0, 2.0):
        raise DomainError("p must be 1 or 2")
    rows = []
    for k, delta in enumerate(deltas):
        steps = round(T / delta)
        if abs(steps * delta - T) > 1e-9 * T or steps & (steps - 1):
            raise DomainError("each delta must equal T / 2^n")
        plan = inversion.build_plan_auto(model, delta, eta, p=p, theta_grid=theta_grid)
        gen = stream.split(k).generator()
        us = gen.random((n_samples, steps))
        x_apx = sampler.pseudo_inverse_batch(plan, us.ravel()).reshape(us.shape)
        x_ex = exact_quantile(us.ravel(), delta).reshape(us.shape)
        gap = np.cumsum(x_ex - x_apx, axis=1)
        per_t = np.mean(np.abs(gap) ** p, axis=0)
        j = int(np.argmax(per_t))
        est = float(per_t[j] ** (1.0 / p))
        se_mean = float(np.std(np.abs(gap[:, j]) ** p) / math.sqrt(n_samples))
        se = se_mean if p == 1.0 else se_mean / max(p * est ** (p - 1.0), 1e-300)
        kappa = inversion.choose_kappa(plan.bounds)
        c_window = inversion.window_constant(plan.bounds, kappa)
        budget = inversion.lp_sampling_budget(
            model, plan.bounds, plan.D, c_window, p, delta, T
        )
        rows.append(ConvergenceRow(delta, est, se, budget.total))
    logs = np.log([r.delta for r in rows])
    errs = np.log([max(r.empirical, 1e-300) for r in rows])
    slope = float(np.polyfit(logs, errs, 1)[0])
    return ConvergenceStudy(rows, slope, float(p))
