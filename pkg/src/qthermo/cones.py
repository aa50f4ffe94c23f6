"""Hilbert projective metrics on positive and variation-bounded cones."""

from dataclasses import dataclass
import math

import numpy as np

from .bvfunc import GridFunction, variation
from .measures import ConformalFunctional

POS_FLOOR = 1e-300
BISECT_ITERS = 80
BISECT_TOL = 1e-9


class ConeDomainError(ValueError):
    pass


def _vals(f):
    return f.values if isinstance(f, GridFunction) else np.asarray(f, dtype=float)


def theta_plus(f, h):
    """log(sup h/f * sup f/h) over cells; +inf when the supports differ."""
    a, b = _vals(f), _vals(h)
    if np.any(a < 0) or np.any(b < 0):
        raise ConeDomainError("theta_plus needs nonnegative functions")
    pa, pb = a > POS_FLOOR, b > POS_FLOOR
    if np.any(pa != pb):
        return math.inf
    if not np.any(pa):
        return 0.0
    r = b[pa] / a[pa]
    return float(math.log(np.max(r)) - math.log(np.min(r)))


@dataclass(frozen=True)
class ConeParams:
    """C_a = {f >= 0 : var f <= a nu(f)} for the functional ``nu``."""
    a: float
    nu: object = None

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("cone aperture a must be positive")


class _Pushed:
    """nu(h - s f) for many s from one pair of iterates."""

    def __init__(self, nu, f, h):
        self.f, self.h = _vals(f), _vals(h)
        if isinstance(nu, ConformalFunctional):
            Lf, one = nu.push(self.f)
            Lh, _ = nu.push(self.h)
            self.Lf, self.Lh, self.one = Lf, Lh, one
            self.linear = None
        else:
            # any linear callable functional, e.g. Lebesgue integration
            self.linear = nu
            self.nf = nu(GridFunction(self.f))
            self.nh = nu(GridFunction(self.h))

    def nu_comb(self, s, t):
        """nu(s h + t f) for a nonnegative combination."""
        if self.linear is not None:
            return s * self.nh + t * self.nf
        return float(np.max(np.abs(s * self.Lh + t * self.Lf))) / self.one

    def member(self, s, t, a):
        v = s * self.h + t * self.f
        if np.min(v) < -1e-13 * max(1.0, float(np.max(np.abs(v)))):
            return False
        return variation(v) <= a * self.nu_comb(s, t) * (1 + 1e-12) + 1e-15


def in_cone(f, cone):
    f = f if isinstance(f, GridFunction) else GridFunction(f)
    if np.min(f.values) < 0:
        return False
    return variation(f) <= cone.a * cone.nu(f) * (1 + 1e-12)


def theta_a(f, h, cone, nu=None):
    """Hilbert metric of C_a: log(beta/alpha) with
    alpha = sup{s : h - s f in C_a}, beta = inf{s : s f - h in C_a}."""
    nu = nu or cone.nu
    if nu is None:
        raise ValueError("theta_a needs a conformal functional")
    P = _Pushed(nu, f, h)
    a = cone.a
    if not (P.member(0, 1, a) and P.member(1, 0, a)):
        raise ConeDomainError("inputs are not members of the cone")
    fv, hv = P.f, P.h
    pos = fv > POS_FLOOR
    if np.any(hv[~pos] > POS_FLOOR):
        lo_cap = math.inf
    else:
        lo_cap = float(np.min(hv[pos] / fv[pos])) if np.any(pos) else 0.0
    # alpha: largest s in [0, min h/f] with h - s f in the cone
    lo, hi = 0.0, min(lo_cap, 1e300)
    if P.member(1, -hi, a):
        alpha = hi
    else:
        for _ in range(BISECT_ITERS):
            mid = 0.5 * (lo + hi)
            if P.member(1, -mid, a):
                lo = mid
            else:
                hi = mid
            if hi - lo <= BISECT_TOL * max(hi, 1e-300):
                break
        alpha = lo
    # beta: smallest s >= max h/f with s f - h in the cone
    if math.isinf(lo_cap) or not np.any(pos):
        return math.inf
    start = float(np.max(hv[pos] / fv[pos]))
    lo = start
    hi = max(start, 1e-300) * 2
    grow = 0
    while not P.member(-1, hi, a):
        lo = hi
        hi *= 2
        grow += 1
        if grow > 200:
            return math.inf
    if P.member(-1, start, a):
        beta = start
    else:
        for _ in range(BISECT_ITERS):
            mid = 0.5 * (lo + hi)
            if P.member(-1, mid, a):
                hi = mid
            else:
                lo = mid
            if hi - lo <= BISECT_TOL * hi:
                break
        beta = hi
    if alpha <= 0:
        return math.inf
    return float(math.log(beta / alpha))


def birkhoff_factor(diameter):
    return math.tanh(diameter / 4) if math.isfinite(diameter) else 1.0


def diameter_bound(C_star, alpha_star, a):
    """Delta_a = 2 log(C* (3 + a) / alpha*)."""
    return 2 * math.log(C_star * (3 + a) / alpha_star)


def random_cone_member(rng, n_cells, a=None, nu=None, pieces=8):
    """Positive random step function with a few jumps, shifted up into C_a if needed."""
    cuts = np.sort(rng.integers(1, n_cells, size=pieces - 1))
    lv = rng.uniform(0.1, 2.0, size=pieces)
    v = np.repeat(lv, np.diff(np.concatenate([[0], cuts, [n_cells]])))
    f = GridFunction(v)
    if a is not None:
        nuf = nu(f) if nu is not None else float(np.mean(v))
        var = variation(v)
        if var > a * nuf:
            shift = var / a - nuf + 1e-3
            f = GridFunction(v + shift)
    return f


@dataclass
class ContractionDiagnostic:
    max_ratio: float
    diam_estimate: float
    tanh_bound: float
    trials: int


def cone_contraction_diagnostic(process, k, n, cone=None, trials=200, grid=1024, seed=0, est=None):
    """Empirical Theta_+ contraction of L~^n over random positive step pairs."""
    from .transfer import estimate_cocycle, normalized_cocycle

    rng = np.random.default_rng(seed)
    if est is None:
        est = estimate_cocycle(process, k, 30, n, grid, residuals=False)
    nu = cone.nu if cone is not None else None
    a = cone.a if cone is not None else None
    worst = 0.0
    images = []
    for _ in range(trials):
        f = random_cone_member(rng, grid, a, nu)
        h = random_cone_member(rng, grid, a, nu)
        d0 = theta_plus(f, h)
        Lf = normalized_cocycle(process, est, k, n, f)
        Lh = normalized_cocycle(process, est, k, n, h)
        d1 = theta_plus(Lf, Lh)
        if d0 > 0:
            worst = max(worst, d1 / d0)
        images.append(Lf)
        images.append(Lh)
    diam = 0.0
    for i in range(0, len(images) - 1):
        diam = max(diam, theta_plus(images[i], images[i + 1]))
    return ContractionDiagnostic(worst, diam, birkhoff_factor(diam), trials)
