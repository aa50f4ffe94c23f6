"""Fiber map families, branch inverses, monotonicity partitions and covering."""

from dataclasses import dataclass, field
from functools import lru_cache
import math

import numpy as np
from scipy.special import zeta as hurwitz_zeta

COVER_GAP = 1e-12
MIN_CELL = 1e-14
NEWTON_TOL = 1e-12
NEWTON_MAXIT = 60

FAMILIES = ("beta", "shifted_beta", "gauss", "renyi", "pm", "contracting", "lasota_yorke")


class MapValidationError(ValueError):
    pass


def _as_array(x):
    return np.asarray(x, dtype=float)


def monotone_solve(f, df, y, lo, hi, tol=NEWTON_TOL, maxit=NEWTON_MAXIT):
    """Solve f(x) = y for increasing f on [lo, hi], vectorised.

    Newton steps are kept inside a shrinking bracket and replaced by a
    bisection step whenever they would leave it.
    """
    y = _as_array(y)
    a = np.full_like(y, lo)
    b = np.full_like(y, hi)
    x = 0.5 * (a + b)
    for _ in range(maxit):
        fx = f(x) - y
        a = np.where(fx < 0, x, a)
        b = np.where(fx >= 0, x, b)
        d = df(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = x - fx / d
        bad = ~np.isfinite(xn) | (xn <= a) | (xn >= b)
        xn = np.where(bad, 0.5 * (a + b), xn)
        done = np.abs(xn - x) <= tol
        x = xn
        if np.all(done):
            break
    return x


class MonotoneBranch:
    """One branch T|_[l, r) with its analytic inverse.

    ``image`` is the closure of T([l, r)), which is what preimage lookup uses.
    """

    def __init__(self, l, r, forward, inverse, deriv_abs, index=0, closed=False):
        self.l = float(l)
        self.r = float(r)
        self.forward = forward
        self.inverse = inverse
        self.deriv_abs = deriv_abs
        self.index = index
        self.closed = closed
        fl = float(forward(np.array(self.l)))
        fr = float(forward(np.array(self.r)))
        self.orientation = 1 if fr > fl else -1
        self.image = (min(fl, fr), max(fl, fr))
        self.is_full = self.image[0] <= 1e-14 and self.image[1] >= 1 - 1e-14

    @property
    def width(self):
        return self.r - self.l

    def contains_image(self, x):
        x = _as_array(x)
        return (x >= self.image[0] - 1e-15) & (x <= self.image[1] + 1e-15)

    def __repr__(self):
        return f"MonotoneBranch([{self.l:.6g}, {self.r:.6g}{']' if self.closed else ')'}, image={self.image})"


def _affine_branch(l, r, slope, shift, index, closed=False):
    def fwd(x):
        return slope * _as_array(x) + shift

    def inv(y):
        return (_as_array(y) - shift) / slope

    def der(x):
        return np.full_like(_as_array(x), abs(slope))

    b = MonotoneBranch(l, r, fwd, inv, der, index=index, closed=closed)
    b.slope = slope
    return b


@dataclass
class FiberMap:
    family: str
    params: tuple
    branches: tuple
    tail: object = None

    @property
    def param_dict(self):
        return dict(self.params)

    @property
    def breakpoints(self):
        if self.tail is not None:
            return self.tail.breakpoints(self.branches)
        return np.array([b.l for b in self.branches] + [1.0])

    @property
    def n_branches(self):
        return len(self.branches)

    def branch_index(self, x):
        x = _as_array(x)
        bp = np.array([b.l for b in self.branches])
        idx = np.searchsorted(bp, x, side="right") - 1
        return np.clip(idx, 0, len(self.branches) - 1)

    def forward(self, x):
        x = _as_array(x)
        if self.tail is not None:
            return self.tail.forward(x)
        idx = self.branch_index(x)
        out = np.empty_like(x)
        for i, b in enumerate(self.branches):
            m = idx == i
            if np.any(m):
                out[m] = b.forward(x[m])
        return out

    def deriv_abs(self, x):
        x = _as_array(x)
        if self.tail is not None:
            return self.tail.deriv_abs(x)
        idx = self.branch_index(x)
        out = np.empty_like(x)
        for i, b in enumerate(self.branches):
            m = idx == i
            if np.any(m):
                out[m] = b.deriv_abs(x[m])
        return out

    def images_of(self, a, b):
        """Closed images of [a, b] intersected with every monotone branch."""
        if self.tail is not None:
            return self.tail.images_of(a, b)
        out = []
        for br in self.branches:
            lo, hi = max(a, br.l), min(b, br.r)
            if hi - lo > 0:
                u, v = float(br.forward(np.array(lo))), float(br.forward(np.array(hi)))
                out.append((min(u, v), max(u, v)))
        return out

    def image_endpoints(self):
        pts = set()
        for b in self.branches:
            pts.update(b.image)
        return sorted(pts)


# ----------------------------------------------------------------------
# families

def _beta_branches(beta, alpha=0.0):
    cuts = []
    m = 1
    while True:
        x = (m - alpha) / beta
        if x >= 1 - 1e-15:
            break
        if x > 0:
            cuts.append((x, m))
        m += 1
    lefts = [(0.0, math.floor(alpha))] + cuts
    out = []
    for i, (l, m) in enumerate(lefts):
        r = lefts[i + 1][0] if i + 1 < len(lefts) else 1.0
        out.append(_affine_branch(l, r, beta, alpha - m, i, closed=(i == len(lefts) - 1)))
    return tuple(out)


def _pm_branches(a):
    c = 2.0 ** a

    def fwd(x):
        x = _as_array(x)
        # rounding in pullbacks can land a hair below 0
        return x + c * np.maximum(x, 0.0) ** (1 + a)

    def der(x):
        x = _as_array(x)
        return 1 + c * (1 + a) * np.maximum(x, 0.0) ** a

    def inv(y):
        return monotone_solve(fwd, der, y, 0.0, 0.5)

    left = MonotoneBranch(0.0, 0.5, fwd, inv, der, index=0)
    right = _affine_branch(0.5, 1.0, 2.0, -1.0, 1, closed=True)
    return (left, right)


def _contracting_branches(a):
    left = _affine_branch(0.0, 0.5, a, 0.0, 0)
    right = _affine_branch(0.5, 1.0, 2.0 - a, -(1.0 - a), 1, closed=True)
    return (left, right)


def _ly_branches(beta, alpha, eps):
    w = 2 * math.pi

    def S(x):
        x = _as_array(x)
        return beta * x + alpha + eps / w * np.sin(w * x)

    def dS(x):
        return beta + eps * np.cos(w * _as_array(x))

    s0, s1 = float(S(0.0)), float(S(1.0))
    cuts = []
    for m in range(math.floor(s0) + 1, math.ceil(s1)):
        cuts.append((float(monotone_solve(S, dS, np.array(float(m)), 0.0, 1.0)), m))
    lefts = [(0.0, math.floor(s0))] + cuts
    out = []
    for i, (l, m) in enumerate(lefts):
        r = lefts[i + 1][0] if i + 1 < len(lefts) else 1.0

        def fwd(x, m=m):
            return S(x) - m

        def inv(y, m=m, l=l, r=r):
            return monotone_solve(S, dS, _as_array(y) + m, l, r)

        def der(x):
            return np.abs(dS(x))

        if r - l > 1e-15:
            out.append(MonotoneBranch(l, r, fwd, inv, der, index=len(out), closed=(i == len(lefts) - 1)))
    return tuple(out)


class GaussTail:
    """Branches j = 1, 2, ... of x -> 1/x mod 1 (or its mirror x -> 1/(1-x) mod 1).

    Branches j <= k_cut are explicit; the weight of the remainder is summed
    analytically with the Hurwitz zeta function.
    """

    def __init__(self, k_cut, mirrored):
        self.k_cut = int(k_cut)
        self.mirrored = bool(mirrored)

    def region(self):
        e = 1.0 / (self.k_cut + 1)
        return (1.0 - e, 1.0) if self.mirrored else (0.0, e)

    def branch(self, j):
        lo, hi = 1.0 / (j + 1), 1.0 / j
        if not self.mirrored:
            def fwd(x, j=j):
                return 1.0 / _as_array(x) - j

            def inv(y, j=j):
                return 1.0 / (j + _as_array(y))

            def der(x):
                return 1.0 / _as_array(x) ** 2

            return MonotoneBranch(lo, hi, fwd, inv, der, index=j, closed=(j == 1))

        def fwd(x, j=j):
            return 1.0 / (1.0 - _as_array(x)) - j

        def inv(y, j=j):
            return 1.0 - 1.0 / (j + _as_array(y))

        def der(x):
            return 1.0 / (1.0 - _as_array(x)) ** 2

        return MonotoneBranch(1.0 - hi, 1.0 - lo, fwd, inv, der, index=j, closed=(j == 1))

    def breakpoints(self, branches):
        pts = sorted({0.0, 1.0} | {b.l for b in branches} | {b.r for b in branches})
        return np.array(pts)

    def _u(self, x):
        return 1.0 - x if self.mirrored else x

    def forward(self, x):
        u = self._u(_as_array(x))
        with np.errstate(divide="ignore"):
            inv = np.where(u > 0, 1.0 / np.maximum(u, 1e-300), 0.0)
        out = inv - np.floor(inv)
        return np.where(u > 0, out, 0.0)

    def deriv_abs(self, x):
        u = self._u(_as_array(x))
        with np.errstate(divide="ignore", over="ignore"):
            return 1.0 / np.maximum(u, 1e-300) ** 2

    def lumped_weight(self, x, s):
        """Sum over j > k_cut of (j + x)^(-s): the geometric weight of the tail."""
        return hurwitz_zeta(s, self.k_cut + 1 + _as_array(x))

    def representative(self, x):
        y = 1.0 / (self.k_cut + 1 + _as_array(x))
        return 1.0 - y if self.mirrored else y

    def images_of(self, a, b):
        if self.mirrored:
            a, b = 1.0 - b, 1.0 - a
        if a <= 0.0:
            return [(0.0, 1.0)] if b > 0 else []
        j_lo, j_hi = math.floor(1.0 / b), math.floor(1.0 / a)
        if j_hi - j_lo >= 2:
            return [(0.0, 1.0)]
        out = []
        for j in range(max(j_lo, 1), j_hi + 1):
            lo, hi = max(a, 1.0 / (j + 1)), min(b, 1.0 / j)
            if hi - lo > 0:
                out.append((1.0 / hi - j, 1.0 / lo - j))
        return out


def make_fiber_map(family, params):
    """Construct a FiberMap; ``params`` is a dict (or tuple of pairs)."""
    p = dict(params)
    fam = str(family).lower().replace("-", "_")
    if fam not in FAMILIES:
        raise MapValidationError(f"unknown map family {family!r}; choose from {FAMILIES}")
    key = tuple(sorted(p.items()))
    tail = None
    if fam == "beta":
        beta = float(p.get("beta", 2.0))
        if not beta > 1:
            raise MapValidationError(f"beta family requires beta > 1 (got {beta})")
        branches = _beta_branches(beta)
    elif fam == "shifted_beta":
        beta = float(p.get("beta"))
        alpha = float(p.get("alpha", 0.0))
        delta = p.get("delta")
        if not beta > 2:
            raise MapValidationError(f"shifted beta requires beta > 2 (got {beta})")
        if delta is not None and not (float(delta) > 0 and beta >= 2 + float(delta)):
            raise MapValidationError(f"shifted beta requires beta >= 2 + delta with delta > 0 (beta={beta}, delta={delta})")
        if not 0 <= alpha < 1:
            raise MapValidationError(f"shift alpha must lie in [0, 1) (got {alpha})")
        branches = _beta_branches(beta, alpha)
    elif fam in ("gauss", "renyi"):
        k_cut = int(p.get("k_cut", 64))
        if k_cut < 1:
            raise MapValidationError("Gauss/Renyi families need a truncation cutoff k_cut >= 1")
        tail = GaussTail(k_cut, mirrored=(fam == "renyi"))
        bl = [tail.branch(j) for j in range(1, k_cut + 1)]
        bl.sort(key=lambda b: b.l)
        branches = tuple(bl)
    elif fam == "pm":
        a = float(p.get("a", 1.0))
        if not a > 0:
            raise MapValidationError(f"PM family requires a > 0 (got {a})")
        branches = _pm_branches(a)
    elif fam == "contracting":
        a = float(p.get("a", 0.5))
        if not 0 < a < 1:
            raise MapValidationError(f"contracting-branch family requires 0 < a < 1 (got {a})")
        branches = _contracting_branches(a)
    else:
        beta = float(p.get("beta", 2.0))
        alpha = float(p.get("alpha", 0.0))
        eps = float(p.get("eps", 0.0))
        if not beta - abs(eps) > 0 or beta < 1:
            raise MapValidationError(f"lasota_yorke family requires beta >= 1 and beta > |eps| (beta={beta}, eps={eps})")
        branches = _ly_branches(beta, alpha, eps)
    return FiberMap(fam, key, branches, tail)


@lru_cache(maxsize=256)
def cached_fiber_map(family, params):
    return make_fiber_map(family, params)


def preimages(fmap, x):
    """All (y, branch index) with T(y) = x, one per branch whose closed image holds x.

    Branches of a truncated Gauss/Renyi map beyond the cutoff are not listed.
    """
    x = float(x)
    out = []
    for i, b in enumerate(fmap.branches):
        if b.contains_image(x):
            y = float(b.inverse(np.array(min(max(x, b.image[0]), b.image[1]))))
            out.append((y, i))
    return out


# ----------------------------------------------------------------------
# partitions

@dataclass(frozen=True)
class Partition:
    breakpoints: tuple
    warnings: tuple = ()
    cells: tuple = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        bp = self.breakpoints
        if bp[0] != 0.0 or bp[-1] != 1.0 or any(b <= a for a, b in zip(bp, bp[1:])):
            raise ValueError("partition breakpoints must increase strictly from 0 to 1")

    @property
    def n_cells(self):
        return len(self.breakpoints) - 1

    def intervals(self):
        bp = self.breakpoints
        return [(bp[i], bp[i + 1]) for i in range(len(bp) - 1)]


@dataclass
class _Cell:
    l: float
    r: float
    path: tuple       # branches applied, in order
    monotone: bool = True

    def image_of(self, x):
        for b in self.path:
            x = b.forward(x)
        return x

    def pull_back(self, y):
        for b in reversed(self.path):
            y = b.inverse(y)
        return y


def _cells_of(fmap):
    cells = [_Cell(b.l, b.r, (b,)) for b in fmap.branches]
    if fmap.tail is not None:
        lo, hi = fmap.tail.region()
        cells.append(_Cell(lo, hi, (), monotone=False))
        cells.sort(key=lambda c: c.l)
    return cells


def refine_partition(maps, n=None):
    """Z^(n) for the window ``maps`` = [T_k, T_{k+1}, ...] (first n used).

    Breakpoints are all pullbacks of branch endpoints; the unrefined tail cell
    of a truncated Gauss/Renyi map is kept as one cell.
    """
    maps = list(maps)
    if n is None:
        n = len(maps)
    if n < 1 or n > len(maps):
        raise ValueError("need 1 <= n <= len(maps)")
    cells = _cells_of(maps[0])
    for j in range(1, n):
        fm = maps[j]
        new = []
        for c in cells:
            if not c.monotone:
                new.append(c)
                continue
            ua = float(c.image_of(np.array(c.l)))
            ub = float(c.image_of(np.array(c.r)))
            lo, hi = min(ua, ub), max(ua, ub)
            pieces = []
            for br in _cells_of(fm):
                a, b = max(lo, br.l), min(hi, br.r)
                if b - a <= 0:
                    continue
                xa = float(c.pull_back(np.array(a)))
                xb = float(c.pull_back(np.array(b)))
                pieces.append(_Cell(min(xa, xb), max(xa, xb), c.path + br.path, br.monotone and c.monotone))
            pieces.sort(key=lambda q: q.l)
            if pieces:
                pieces[0].l = c.l
                pieces[-1].r = c.r
                for q0, q1 in zip(pieces, pieces[1:]):
                    q1.l = q0.r
            new.extend(pieces)
        cells = new
    warnings = []
    kept = []
    for c in cells:
        if c.r - c.l < MIN_CELL:
            warnings.append(f"degenerate cell of width {c.r - c.l:.3g} at {c.l:.17g} merged")
            if kept:
                kept[-1].r = c.r
            continue
        kept.append(c)
    kept[-1].r = 1.0
    kept[0].l = 0.0
    bp = tuple([c.l for c in kept] + [1.0])
    return Partition(bp, tuple(warnings), tuple(kept))


# ----------------------------------------------------------------------
# covering

def _merge(intervals):
    intervals = sorted((max(0.0, a), min(1.0, b)) for a, b in intervals if b > a)
    out = []
    for a, b in intervals:
        if out and a <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], b))
        else:
            out.append((a, b))
    return out


def _gap(intervals):
    return 1.0 - sum(b - a for a, b in intervals)


@dataclass
class CoveringResult:
    n: object
    covered_fraction: float


def covering_time(process, k, J, max_n=64, detail=False):
    """Least n <= max_n with T^n(J) = [0, 1] along the fibers k, k+1, ...

    Returns None when the budget is exhausted (``detail=True`` gives the
    covered fraction as a diagnostic).
    """
    a, b = float(J[0]), float(J[1])
    if not b > a:
        raise ValueError("covering interval must be non-degenerate")
    cur = _merge([(a, b)])
    n = 0
    while True:
        if _gap(cur) < COVER_GAP:
            res = CoveringResult(n, 1.0)
            return res if detail else n
        if n >= max_n:
            res = CoveringResult(None, 1.0 - _gap(cur))
            return res if detail else None
        fm = process.fiber_at(k + n).map
        imgs = []
        for u, v in cur:
            imgs.extend(fm.images_of(u, v))
        cur = _merge(imgs)
        n += 1


def _beta_at(betas, j):
    if hasattr(betas, "fiber_at"):
        return float(betas.fiber_at(j).map.param_dict["beta"])
    seq = betas if isinstance(betas, (list, tuple)) else [float(betas)]
    return float(seq[j] if j < len(seq) else seq[-1])


def tau(s, betas, k=0, max_n=10_000):
    """min{n >= 1 : beta^(n) s >= 1}.

    ``betas`` is a process whose fibers carry a ``beta`` parameter, a
    sequence (extended by its last entry) or a single number.
    """
    s = float(s)
    if not s > 0:
        raise ValueError("tau requires s > 0")
    prod = s
    for n in range(1, max_n + 1):
        prod *= _beta_at(betas, k + n - 1)
        if prod >= 1:
            return n
    return None


def covering_bounds(kind, **params):
    """Closed-form covering bounds: 'tau', 'beta_delta', 'conze_raugi'."""
    kind = kind.lower().replace("-", "_")
    if kind == "tau":
        return tau(params["s"], params["betas"], params.get("k", 0))
    if kind == "beta_delta":
        d = float(params["delta"])
        if not d > 0:
            raise ValueError("delta must be positive")
        return 1 + math.ceil(-math.log(d) / math.log1p(d))
    if kind == "conze_raugi":
        d = float(params["delta"])
        s = float(params["s"])
        if not s > 0:
            raise ValueError("s must be positive")
        if not d > 0:
            raise ValueError("delta must be positive")
        C = 1 + 2 / d
        return math.ceil(-math.log(s / C) / math.log1p(d / 2)) + int(params["N"])
    raise ValueError(f"unknown covering bound {kind!r}")


def covering_csv_rows(rows):
    """rows: iterables (family, params, J, empirical, bound) -> CSV text lines."""
    out = ["family,params,J,empirical,bound"]
    for fam, par, J, emp, bd in rows:
        ps = ";".join(f"{k}={v!r}" for k, v in sorted(dict(par).items()))
        out.append(f"{fam},{ps},[{J[0]!r} {J[1]!r}],{'' if emp is None else emp},{bd}")
    return "\n".join(out) + "\n"
