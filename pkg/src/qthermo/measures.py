"""Conformal and invariant measure estimates, pressure, correlations."""

from dataclasses import dataclass, field
import io
import json
import math
import warnings

import numpy as np

from .bvfunc import GridFunction, cell_midpoints, grid_function
from .transfer import (PositivityError, _backward_orbit, estimate_cocycle,
                       fully_normalized_apply, g_hat, nu_hat_values, transfer_matrix,
                       transfer_pointwise)

CONVERGENCE_TOL = 1e-4
CHECK_HORIZON = 20


class HorizonWarning(UserWarning):
    """nu_hat changed by more than the tolerance between horizons 20 and 30."""


class ConformalFunctional:
    """nu_hat_k(f) = ||L^n_k f||_inf / ||L^n_k 1||_inf, signed f split by sign."""

    def __init__(self, process, k, horizon=30, check=False):
        if horizon < 1:
            raise ValueError("horizon must be >= 1")
        self.process = process
        self.k = k
        self.horizon = horizon
        self.check = check
        self._cache = {}
        self.warnings = []

    def __call__(self, f):
        key = id(f)
        hit = self._cache.get(key)
        if hit is not None and hit[0] is f:
            return hit[1]
        val = nu_hat_values(self.process, self.k, self.horizon, f)
        if self.check and self.horizon > CHECK_HORIZON:
            other = nu_hat_values(self.process, self.k, CHECK_HORIZON, f)
            if abs(other - val) > CONVERGENCE_TOL:
                msg = f"nu_hat not converged at fiber {self.k}: {other!r} vs {val!r}"
                self.warnings.append(msg)
                warnings.warn(msg, HorizonWarning, stacklevel=2)
        self._cache[key] = (f, val)
        return val

    def push(self, f):
        """Iterate L^n_k f together with L^n_k 1; returns (L^n f, ||L^n 1||)."""
        v = f.values if isinstance(f, GridFunction) else np.asarray(f, dtype=float)
        W = np.column_stack([np.ones(v.size), v])
        scale = 0.0
        for j in range(self.horizon):
            W = transfer_matrix(self.process.fiber_at(self.k + j), v.size) @ W
            s = float(np.max(W[:, 0]))
            scale += math.log(s)
            W = W / s
        return W[:, 1], float(np.max(W[:, 0]))


def conformal_eval(process, k, f, horizon=30, check=True):
    return ConformalFunctional(process, k, horizon, check=check)(f)


def invariant_eval(process, k, f, horizon=30, est=None, grid=None):
    """mu_hat_k(f) = nu_hat_k(f q_hat_k)."""
    if est is None:
        est = estimate_cocycle(process, k, horizon, 1, grid or f.n_cells, residuals=False)
    return nu_hat_values(process, k, horizon, f.values * est.q(k).values)


def conformality_residual(process, k, observables, horizon=30, grid=4096, est=None):
    """max over f of |nu_{k+1}(L_k f) - lambda_k nu_k(f)|.

    L_k f is evaluated exactly at the grid midpoints of fiber k+1 from the
    callable f, while nu_k(f) uses the midpoint samples of f, so the residual
    exposes the discretisation error.
    """
    if est is None:
        est = estimate_cocycle(process, k, horizon, 1, grid, residuals=False)
    x = cell_midpoints(grid)
    fs = process.fiber_at(k)
    worst = 0.0
    for f in observables:
        Lf = transfer_pointwise(fs, f, x)
        a = nu_hat_values(process, k + 1, horizon, Lf)
        b = est.lam(k) * nu_hat_values(process, k, horizon, grid_function(f, grid))
        worst = max(worst, abs(a - b))
    return worst


def standard_observables():
    """1, x and the indicators of the four dyadic quarters."""
    obs = [lambda x: np.ones_like(x), lambda x: np.asarray(x, dtype=float)]
    for i in range(4):
        obs.append(lambda x, i=i: ((x >= i / 4) & (x < (i + 1) / 4)).astype(float))
    return obs


@dataclass
class PressureEstimate:
    ep: float
    stderr: float
    samples: int
    log_lambdas: np.ndarray = field(repr=False)
    boundary_correction: float = 0.0

    def to_csv(self):
        buf = io.StringIO()
        buf.write("sample,log_lambda\n")
        for i, v in enumerate(self.log_lambdas):
            buf.write(f"{i},{float(v)!r}\n")
        return buf.getvalue()


def _batch_stderr(x, n_batches=50):
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return float("nan")
    if x.size < 4 * n_batches:
        return float(np.std(x, ddof=1) / math.sqrt(x.size))
    b = x.size // n_batches
    means = x[: b * n_batches].reshape(n_batches, b).mean(axis=1)
    return float(np.std(means, ddof=1) / math.sqrt(n_batches))


def expected_pressure(process, horizon=30, samples=10_000, grid=4096, k0=0):
    """Average of log lambda_hat over fibers k0..k0+samples-1.

    With lambda_hat_j = c_j lambda^Leb_j / c_{j+1} (c_j the conformal
    normalisation of q_hat_j), the sum of logs telescopes, so the average
    needs the Lebesgue ratios of one backward orbit plus c at both ends.
    The per-sample rows are the Lebesgue ratios.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rec, growth = _backward_orbit(process, k0, k0 + samples, horizon, grid)
    logs = np.array([math.log(growth[j]) for j in range(k0, k0 + samples)])
    if not np.all(np.isfinite(logs)):
        raise PositivityError("nonpositive lambda estimate")
    c0 = 1.0 / nu_hat_values(process, k0, horizon, rec[k0])
    c1 = 1.0 / nu_hat_values(process, k0 + samples, horizon, rec[k0 + samples])
    corr = math.log(c0) - math.log(c1)
    ep = (float(np.sum(logs)) + corr) / samples
    return PressureEstimate(ep, _batch_stderr(logs), samples, logs, corr)


@dataclass
class CorrelationTable:
    n: list
    C: list
    rate: object
    slope: object
    noise_floor: float

    def to_csv(self):
        buf = io.StringIO()
        buf.write("n,C_n,abs_C_n\n")
        for n, c in zip(self.n, self.C):
            buf.write(f"{n},{c!r},{abs(c)!r}\n")
        return buf.getvalue()

    def summary(self):
        return {"rate": self.rate, "slope": self.slope, "noise_floor": self.noise_floor}


def correlation_sequence(process, k, f, h, n_max=12, horizon=30, grid=None, est=None):
    """C_n = mu_{k+n}(f . L^^n (h - mu_k(h))) for n = 0..n_max and the fitted rate."""
    grid = grid or h.n_cells
    f = grid_function(f, grid)
    h = grid_function(h, grid)
    if est is None:
        est = estimate_cocycle(process, k, horizon, n_max + 1, grid, residuals=False)
    mu_h = nu_hat_values(process, k, horizon, h.values * est.q(k).values)
    u = h - mu_h
    C = []
    for n in range(n_max + 1):
        j = k + n
        C.append(float(nu_hat_values(process, j, horizon, f.values * u.values * est.q(j).values)))
        if n < n_max:
            u = fully_normalized_apply(process, j, est, u)
    floor = 1e-12 * float(np.max(np.abs(f.values))) * float(np.max(np.abs(h.values)))
    ns = [n for n, c in enumerate(C) if abs(c) > 10 * floor]
    if len(ns) >= 2:
        slope = float(np.polyfit(ns, [math.log(abs(C[n])) for n in ns], 1)[0])
        rate = math.exp(slope)
    else:
        slope = None
        rate = "below noise"
    return CorrelationTable(list(range(n_max + 1)), C, rate, slope, floor)


def equilibrium_identity_check(process, k, horizon=30, grid=4096, est=None):
    """|int(-log g^ + phi) dmu_k - (log lambda_k + mu_{k+1}(log q_{k+1}) - mu_k(log q_k))|.

    The left integrand is built pointwise from g^ at cell midpoints; the right
    side uses only lambda_hat and integrals of log q_hat.
    """
    if est is None:
        est = estimate_cocycle(process, k, horizon, 2, grid, residuals=False)
    x = cell_midpoints(grid)
    fs = process.fiber_at(k)
    gh = g_hat(process, k, est, x)
    if np.min(gh) <= 0:
        raise PositivityError("g_hat is not positive")
    integrand = -np.log(gh) + np.log(fs.weight(x))
    lhs = nu_hat_values(process, k, horizon, integrand * est.q(k).values)
    qk, qk1 = est.q(k).values, est.q(k + 1).values
    rhs = (math.log(est.lam(k))
           + nu_hat_values(process, k + 1, horizon, np.log(qk1) * qk1)
           - nu_hat_values(process, k, horizon, np.log(qk) * qk))
    return abs(lhs - rhs)


def invariance_defect(process, k, f, horizon=30, grid=None, est=None):
    """|mu_k(f o T_k) - mu_{k+1}(f)| for a grid function f."""
    grid = grid or f.n_cells
    if est is None:
        est = estimate_cocycle(process, k, horizon, 1, grid, residuals=False)
    fT = f(process.fiber_at(k).map.forward(cell_midpoints(grid)))
    a = nu_hat_values(process, k, horizon, fT * est.q(k).values)
    b = nu_hat_values(process, k + 1, horizon, f.values * est.q(k + 1).values)
    return abs(a - b)


def summary_json(**items):
    return json.dumps(items, sort_keys=True, indent=2, default=float)
