"""Inverse-transform sampling through the approximate CDF.

The pseudo-inverse clamps to the window endpoints when a uniform falls outside
the attained CDF range and otherwise returns a root of F(x) = u located by a
globalized (projected, Armijo-backtracked) Newton iteration with bisection as
the safety net. Paths are piecewise-constant cadlag cumulative sums of i.i.d.
increments, reproducible through counter-based random streams.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Callable, NamedTuple

import numpy as np
from scipy.stats import invgauss

from . import charfn
from ._kernels import cdf_and_derivative, cdf_values
from .errors import DomainError, NumericFailureError
from .inversion import InversionPlan

__all__ = [
    "RngStream",
    "PathSkeleton",
    "CoupledError",
    "ROOT_TOL",
    "pseudo_inverse",
    "pseudo_inverse_batch",
    "newton_invert",
    "initial_value",
    "sample_path",
    "coupled_error",
]

ROOT_TOL = 1e-10
ARMIJO_SLOPE = 1e-4
MAX_NEWTON_ITERS = 50
MAX_BACKTRACKS = 8
TABLE_POINTS = 16385
_MIX = 0x9E3779B97F4A7C15


@dataclass(frozen=True)
class RngStream:
    """A reproducible uniform stream: counter-based Philox keyed by
    (master_seed, stream_index). Distinct indices give independent streams;
    identical pairs reproduce draws bit for bit."""

    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        if self.stream_index < 0:
            raise DomainError("stream_index must be nonnegative")

    def generator(self) -> np.random.Generator:
        key = np.array(
            [self.master_seed % 2**64, self.stream_index % 2**64], dtype=np.uint64
        )
        return np.random.Generator(np.random.Philox(key=key))

    def split(self, tag: int) -> "RngStream":
        """A decorrelated child stream for sub-tasks (normals vs uniforms...)."""
        mixed = (self.stream_index * _MIX + tag + 1) % 2**63
        return RngStream(self.master_seed, mixed)


@dataclass
class PathSkeleton:
    """Piecewise-constant cadlag path on the dyadic grid t_j = j * delta."""

    delta: float
    t: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.values[0] != 0.0:
            raise DomainError("paths start at zero")
        if self.t.shape != self.values.shape:
            raise DomainError("grid and values must align")

    def value_at(self, s: float) -> float:
        j = min(int(s / self.delta), len(self.values) - 1)
        return float(self.values[j])

    def increments(self) -> np.ndarray:
        return np.diff(self.values)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "value"])
            for tj, vj in zip(self.t, self.values):
                w.writerow([repr(float(tj)), repr(float(vj))])


class CoupledError(NamedTuple):
    estimate: float
    stderr: float
    p: float
    n_samples: int


# ---------------------------------------------------------------------------
# Sampling tables (lazy, one per plan)
# ---------------------------------------------------------------------------


class _PlanTables:
    """Dense CDF values over the window: brackets, initial guesses and the
    attained min/max needed for the clamping branches."""

    def __init__(self, plan: InversionPlan):
        half = plan.half_width
        self.xs = np.linspace(-half, half, TABLE_POINTS)
        self.F = cdf_values(plan.q, plan.omega, self.xs)
        self.env = np.maximum.accumulate(self.F)
        self.fmin = self._refine(plan, int(np.argmin(self.F)), sign=1.0)
        self.fmax = self._refine(plan, int(np.argmax(self.F)), sign=-1.0)

    def _refine(self, plan: InversionPlan, i: int, sign: float) -> float:
        lo = self.xs[max(i - 1, 0)]
        hi = self.xs[min(i + 1, len(self.xs) - 1)]
        phi = (math.sqrt(5.0) - 1.0) / 2.0

        def f(x):
            return sign * float(cdf_values(plan.q, plan.omega, np.array([x]))[0])

        x1 = hi - phi * (hi - lo)
        x2 = lo + phi * (hi - lo)
        f1, f2 = f(x1), f(x2)
        for _ in range(40):
            if f1 < f2:
                hi, x2, f2 = x2, x1, f1
                x1 = hi - phi * (hi - lo)
                f1 = f(x1)
            else:
                lo, x1, f1 = x1, x2, f2
                x2 = lo + phi * (hi - lo)
                f2 = f(x2)
        return sign * min(f1, f2, sign * float(self.F[i]))


def _tables(plan: InversionPlan) -> _PlanTables:
    if plan._tables is None:
        plan._tables = _PlanTables(plan)
    return plan._tables


# ---------------------------------------------------------------------------
# Root finding
# ---------------------------------------------------------------------------


def _first_crossing_cell(tab: _PlanTables, u: float):
    """Index i of the first grid cell where F - u changes sign, or None."""
    d = tab.F - u
    idx = np.nonzero(d[:-1] * d[1:] <= 0.0)[0]
    if idx.size == 0:
        return None
    return int(idx[0])


def _invert_prepared(
    plan: InversionPlan,
    us: np.ndarray,
    x0: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
    root_tol: float,
    count_iters: bool = False,
):
    """Vectorized safeguarded Newton on F(x) = u with per-point brackets.

    Each round evaluates all active proposals in one kernel pass. A proposal
    is accepted on sufficient decrease of the squared residual (Armijo with
    interpolated backtracking); points that keep rejecting steps, exceed the
    Newton budget or get pinned to a bracket edge switch to bisection.
    """
    n = us.shape[0]
    x = x0.copy()
    lam = np.ones(n)
    r2 = np.full(n, np.inf)
    r = np.zeros(n)
    dF = np.zeros(n)
    newton_iters = np.zeros(n, dtype=np.int64)
    backtracks = np.zeros(n, dtype=np.int64)
    bisect = np.zeros(n, dtype=bool)
    active = np.ones(n, dtype=bool)
    have_base = np.zeros(n, dtype=bool)
    proposal = x.copy()
    for _ in range(MAX_NEWTON_ITERS * MAX_BACKTRACKS + 80):
        if not active.any():
            break
        idx = np.nonzero(active)[0]
        f_val, df_val = cdf_and_derivative(plan.q, plan.omega, proposal[idx])
        r_new = f_val - us[idx]
        r2_new = r_new * r_new

        armijo_ok = r2_new <= r2[idx] * (1.0 - 2.0 * ARMIJO_SLOPE * lam[idx])
        accept = (~have_base[idx]) | bisect[idx] | armijo_ok

        acc = idx[accept]
        x[acc] = proposal[acc]
        r[acc] = r_new[accept]
        r2[acc] = r2_new[accept]
        dF[acc] = df_val[accept]
        have_base[acc] = True
        lam[acc] = 1.0
        backtracks[acc] = 0
        pos = acc[r[acc] > 0.0]
        neg = acc[r[acc] <= 0.0]
        hi[pos] = np.minimum(hi[pos], x[pos])
        lo[neg] = np.maximum(lo[neg], x[neg])
        active[acc[np.abs(r[acc]) <= root_tol]] = False

        rej = idx[~accept]
        if rej.size:
            num = r2[rej] * lam[rej] * lam[rej]
            den = r2_new[~accept] + (2.0 * lam[rej] - 1.0) * r2[rej]
            lam_star = np.where(den > 0, num / den, 0.5 * lam[rej])
            lam[rej] = np.clip(lam_star, 0.1 * lam[rej], 0.5 * lam[rej])
            backtracks[rej] += 1
            bisect[rej] |= backtracks[rej] > MAX_BACKTRACKS

        live = np.nonzero(active)[0]
        if live.size == 0:
            break
        nb = live[~bisect[live]]
        bi = live[bisect[live]]
        if nb.size:
            newton_iters[nb] += 1
            overrun = nb[newton_iters[nb] > MAX_NEWTON_ITERS]
            bisect[overrun] = True
            nb = nb[newton_iters[nb] <= MAX_NEWTON_ITERS]
            bi = np.concatenate([bi, overrun])
        if nb.size:
            safe_df = np.where(np.abs(dF[nb]) > 1e-300, dF[nb], 1.0)
            step = np.where(np.abs(dF[nb]) > 1e-300, -r[nb] / safe_df, 0.0)
            raw = x[nb] + lam[nb] * step
            bad = (step == 0.0) | ~np.isfinite(raw)
            raw = np.where(bad, 0.5 * (lo[nb] + hi[nb]), raw)
            proposal[nb] = np.clip(raw, lo[nb], hi[nb])
            stuck = (proposal[nb] == x[nb]) & have_base[nb]
            if stuck.any():
                s = nb[stuck]
                bisect[s] = True
                proposal[s] = 0.5 * (lo[s] + hi[s])
        if bi.size:
            proposal[bi] = 0.5 * (lo[bi] + hi[bi])
            tiny = (hi[bi] - lo[bi]) <= 4e-16 * (1.0 + np.abs(lo[bi]))
            if tiny.any():
                t = bi[tiny]
                x[t] = proposal[t]
                active[t] = False
    if active.any():
        raise NumericFailureError(
            "root finder did not converge",
            n_failed=int(active.sum()),
            worst_residual=float(np.max(np.abs(r[active]))),
            root_tol=root_tol,
        )
    if count_iters:
        return x, newton_iters
    return x


def pseudo_inverse_batch(
    plan: InversionPlan, us: np.ndarray, root_tol: float = ROOT_TOL
) -> np.ndarray:
    """Pseudo-inverse of the approximate CDF applied to an array of uniforms."""
    us = np.asarray(us, dtype=float)
    if np.any((us < 0.0) | (us > 1.0)):
        raise DomainError("uniforms must lie in [0, 1]")
    tab = _tables(plan)
    half = plan.half_width
    out = np.empty(us.shape)
    below = us < tab.fmin
    above = us > tab.fmax
    out[below] = -half
    out[above] = half
    mid = np.nonzero(~(below | above))[0]
    if mid.size == 0:
        return out
    um = us[mid]
    pos = np.searchsorted(tab.env, um, side="left")
    i = np.clip(pos, 1, len(tab.xs) - 1)
    lo = tab.xs[i - 1].copy()
    hi = tab.xs[i].copy()
    flo = tab.F[i - 1].copy()
    fhi = tab.F[i].copy()
    keep = np.ones(um.shape, dtype=bool)
    # u at or below F(-D/2) yet above the window minimum: the first crossing
    # is a down-crossing the running-max envelope cannot see
    for j in np.nonzero(pos == 0)[0]:
        cell = _first_crossing_cell(tab, um[j])
        if cell is None:
            out[mid[j]] = -half
            keep[j] = False
        else:
            lo[j], hi[j] = tab.xs[cell], tab.xs[cell + 1]
            flo[j], fhi[j] = tab.F[cell], tab.F[cell + 1]
    sel = np.nonzero(keep)[0]
    if sel.size == 0:
        return out
    denom = np.where(fhi[sel] != flo[sel], fhi[sel] - flo[sel], 1.0)
    x0 = lo[sel] + (um[sel] - flo[sel]) / denom * (hi[sel] - lo[sel])
    x0 = np.clip(x0, lo[sel], hi[sel])
    out[mid[sel]] = _invert_prepared(
        plan, um[sel], x0, lo[sel].copy(), hi[sel].copy(), root_tol
    )
    return out


def pseudo_inverse(plan: InversionPlan, u: float, root_tol: float = ROOT_TOL) -> float:
    """Clamped generalized inverse of the approximate CDF at a single uniform."""
    return float(pseudo_inverse_batch(plan, np.array([u]), root_tol)[0])


def newton_invert(
    plan: InversionPlan,
    u: float,
    x0: float,
    root_tol: float = ROOT_TOL,
    return_iterations: bool = False,
):
    """Globalized Newton solve of F(x) = u started from x0 inside the window."""
    half = plan.half_width
    if not -half <= x0 <= half:
        raise DomainError("x0 must lie inside [-D/2, D/2]")
    tab = _tables(plan)
    cell = _first_crossing_cell(tab, u)
    lo, hi = (-half, half) if cell is None else (tab.xs[cell], tab.xs[cell + 1])
    x, iters = _invert_prepared(
        plan,
        np.array([u], dtype=float),
        np.array([float(x0)]),
        np.array([min(lo, x0)], dtype=float),
        np.array([max(hi, x0)], dtype=float),
        root_tol,
        count_iters=True,
    )
    if return_iterations:
        return float(x[0]), int(iters[0])
    return float(x[0])


# ---------------------------------------------------------------------------
# Initial values and path generation
# ---------------------------------------------------------------------------


def initial_value(model: charfn.CharFnModel, delta: float, u: float) -> float:
    """Moment-matched starting point for the Newton inversion.

    GIG-type increments are matched by an inverse Gaussian in mean and
    variance; other finite-variance models by a normal law. Models without a
    variance fall back to zero.
    """
    try:
        m1 = charfn.moment_at_zero(model, delta, 1)
        m2 = charfn.moment_at_zero(model, delta, 2)
    except Exception:
        return 0.0
    var = m2 - m1 * m1
    if var <= 0:
        return m1
    if isinstance(model, (charfn.Gig, charfn.Ig)):
        b0 = math.sqrt(m1 / var)
        a0 = m1 * b0
        return float(invgauss.ppf(u, 1.0 / (a0 * b0), scale=a0 * a0))
    return m1 + math.sqrt(var) * NormalDist().inv_cdf(min(max(u, 1e-16), 1 - 1e-16))


def sample_path(
    plan: InversionPlan, n: int, T: float, stream: RngStream
) -> PathSkeleton:
    """2^n i.i.d. increments drawn by pseudo-inversion, cumulatively summed."""
    if n < 0:
        raise DomainError("n must be >= 0")
    steps = 2**n
    if not math.isclose(plan.delta, T / steps, rel_tol=1e-9):
        raise DomainError(f"plan step {plan.delta} does not match T/2^n = {T / steps}")
    us = stream.generator().random(steps)
    incs = pseudo_inverse_batch(plan, us)
    values = np.concatenate([[0.0], np.cumsum(incs)])
    t = np.arange(steps + 1) * plan.delta
    return PathSkeleton(plan.delta, t, values)


def coupled_error(
    plan: InversionPlan,
    exact_quantile: Callable[[np.ndarray], np.ndarray],
    n_samples: int,
    p: float,
    stream: RngStream,
) -> CoupledError:
    """Monte Carlo estimate of E|X - X~|^p with X and X~ driven by the same
    uniforms (exact quantile vs pseudo-inverse)."""
    if p not in (1.0, 2.0):
        raise DomainError("p must be 1 or 2")
    us = stream.generator().random(n_samples)
    x_exact = np.asarray(exact_quantile(us), dtype=float)
    x_approx = pseudo_inverse_batch(plan, us)
    d = np.abs(x_exact - x_approx) ** p
    return CoupledError(
        float(np.mean(d)), float(np.std(d) / math.sqrt(n_samples)), float(p), n_samples
    )
