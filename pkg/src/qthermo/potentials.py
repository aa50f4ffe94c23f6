"""Potentials, Birkhoff weights and summability / contraction checks."""

from dataclasses import dataclass
import math

import numpy as np
from scipy.optimize import minimize_scalar

from .maps import refine_partition

KINDS = ("geometric", "constant", "tabulated")


@dataclass(frozen=True)
class PotentialSpec:
    """Weight g = exp(phi) of one fiber.

    geometric: g = |T'|^(-t); constant: g = c (phi = log c);
    tabulated: phi given as step values on a uniform grid.
    """
    kind: str = "geometric"
    t: float = 1.0
    c: float = 1.0
    table: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.kind == "geometric" and not (self.t >= 0 and math.isfinite(self.t)):
            raise ValueError(f"geometric potential needs finite t >= 0 (got {self.t})")
        if self.kind == "constant" and not (self.c > 0 and math.isfinite(self.c)):
            raise ValueError(f"constant weight must be finite and positive (got {self.c})")
        if self.kind == "tabulated":
            if len(self.table) < 1 or not all(math.isfinite(v) for v in self.table):
                raise ValueError("tabulated potential needs finite values")

    def validate_for(self, fmap):
        if fmap.tail is not None and not (self.kind == "geometric" and 2 * self.t > 1):
            raise ValueError("Gauss/Renyi fibers need a geometric potential with t > 1/2 "
                             "(otherwise the branch weights are not summable)")

    def _from_deriv(self, d, y):
        if self.kind == "geometric":
            return d ** (-self.t) if self.t != 0 else np.ones_like(d)
        if self.kind == "constant":
            return np.full_like(d, self.c)
        tab = np.asarray(self.table)
        idx = np.clip(np.floor(np.asarray(y) * tab.size).astype(np.int64), 0, tab.size - 1)
        return np.exp(tab[idx])

    def weight(self, fmap, x):
        x = np.asarray(x, dtype=float)
        d = fmap.deriv_abs(x) if self.kind == "geometric" else np.ones_like(x)
        return self._from_deriv(d, x)

    def branch_weight(self, fmap, branch, y):
        y = np.asarray(y, dtype=float)
        d = branch.deriv_abs(y) if self.kind == "geometric" else np.ones_like(y)
        return self._from_deriv(d, y)

    def log_weight(self, fmap, x):
        return np.log(self.weight(fmap, x))


def make_potential(d):
    d = dict(d)
    kind = d.pop("kind", "geometric")
    if "table" in d:
        d["table"] = tuple(float(v) for v in d["table"])
    return PotentialSpec(kind, **{k: (float(v) if k != "table" else v) for k, v in d.items()})


def birkhoff_weight(process, k, n, x):
    """g^(n)(x) = prod_{j<n} g_{k+j}(T^j x)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    x = np.asarray(x, dtype=float)
    w = np.ones_like(x)
    for j in range(n):
        fs = process.fiber_at(k + j)
        w = w * fs.weight(x)
        if j < n - 1:
            x = fs.map.forward(x)
    return w if w.ndim else float(w)


def _cell_samples(l, r, m):
    # both closure endpoints plus interior points
    inner = l + (r - l) * (np.arange(1, m + 1) / (m + 1))
    return np.concatenate([[l], inner, [r]])


def refine_extrema(fn, xs, w, flat=1e-13):
    """(min, max) of fn on [xs[0], xs[-1]] from samples w = fn(xs), each
    polished by a bounded scalar search between the neighbouring samples.

    Sampling alone misses interior extrema of non-monotone weights, and a
    missed sup would make the Lasota-Yorke constants too small.
    """
    lo, hi = float(np.min(w)), float(np.max(w))
    if hi - lo <= flat * max(abs(hi), 1e-300):
        return lo, hi
    out = []
    for i, sign in ((int(np.argmin(w)), 1.0), (int(np.argmax(w)), -1.0)):
        a, b = xs[max(i - 1, 0)], xs[min(i + 1, xs.size - 1)]
        best = float(w[i])
        if b > a:
            r = minimize_scalar(lambda x: sign * float(fn(np.array([x]))[0]), bounds=(a, b),
                                method="bounded", options={"xatol": 1e-12 * max(b - a, 1e-300) + 1e-15})
            v = sign * float(r.fun)
            best = min(best, v) if sign > 0 else max(best, v)
        out.append(best)
    return out[0], out[1]


def weight_on_cells(process, k, n, samples_per_cell=8, partition=None):
    """Per-cell (inf, sup) of g^(n) over the cells of Z^(n).

    Monotone cells are evaluated along their branch path, so closure values
    at the endpoints are exact; unrefined tail cells use the map itself.
    Interior extrema are located by refine_extrema.
    """
    fibers = [process.fiber_at(k + j) for j in range(n)]
    part = partition or refine_partition([f.map for f in fibers], n)
    out = []
    for c in part.cells:
        if c.monotone and len(c.path) == n:
            def fn(x, path=c.path):
                w = np.ones_like(x)
                for fs, br in zip(fibers, path):
                    w = w * fs.branch_weight(br, x)
                    x = br.forward(x)
                return w
        else:
            def fn(x):
                w = np.ones_like(x)
                for fs in fibers:
                    w = w * fs.weight(x)
                    x = fs.map.forward(x)
                return w
        xs = _cell_samples(c.l, c.r, samples_per_cell)
        lo, hi = refine_extrema(fn, xs, fn(xs))
        out.append((c.l, c.r, lo, hi))
    return part, out


def sup_weight(process, k, n, samples_per_cell=8):
    _, cells = weight_on_cells(process, k, n, samples_per_cell)
    return max(c[3] for c in cells)


@dataclass
class SummabilityReport:
    S1: float
    tail_bound: float
    branch_inf: list
    variation: float
    inf_positive: bool
    bounded_variation: bool
    summable: bool

    @property
    def passed(self):
        return self.inf_positive and self.bounded_variation and self.summable


def summability_report(fiber, samples_per_branch=32):
    """Summability checks for one fiber: S1 = sum_Z sup_Z g, inf g > 0, var g."""
    fm = fiber.map
    pot = fiber.potential
    sups, infs, seq = [], [], []
    for br in fm.branches:
        xs = _cell_samples(br.l, br.r, samples_per_branch)
        g = pot.branch_weight(fm, br, xs)
        sups.append(float(np.max(g)))
        infs.append(float(np.min(g)))
        seq.append((br.l, g))
    tail = 0.0
    if fm.tail is not None:
        # integral bound for sum_{j > K} j^(-2t); g is monotone on the tail region
        s = 2 * pot.t
        K = fm.tail.k_cut
        tail = K ** (1 - s) / (s - 1)
        lo, hi = fm.tail.region()
        seq.append((lo, pot.weight(fm, np.array([lo, hi]))))
    seq.sort(key=lambda p: p[0])
    vals = np.concatenate([g for _, g in seq])
    var = float(np.sum(np.abs(np.diff(vals))))
    S1 = float(sum(sups)) + tail
    return SummabilityReport(S1=S1, tail_bound=tail, branch_inf=infs, variation=var,
                             inf_positive=min(infs) > 0, bounded_variation=math.isfinite(var),
                             summable=math.isfinite(S1))


@dataclass
class ContractingReport:
    N: int
    samples: int
    mean_log_sup_g: float
    mean_log_inf_LN1: float
    margin: float
    positivity_ok: bool

    @property
    def contracting(self):
        return self.positivity_ok and self.margin > 0


def contracting_report(process, N, samples=10_000, grid=1024, k0=0):
    """Birkhoff averages of log sup g^(N) and log inf L^N 1 over fiber windows.

    Windows with the same symbol word share their value, so long runs cost
    one evaluation per distinct word.
    """
    from .transfer import inf_sup_cocycle_one

    if N < 1:
        raise ValueError("N must be >= 1")
    memo = {}
    s_sup = s_inf = 0.0
    ok = True
    for i in range(samples):
        k = k0 + i
        key = process.word_at(k, N)
        if key not in memo:
            sg = sup_weight(process, k, N)
            lo, _ = inf_sup_cocycle_one(process, k, N, grid)
            memo[key] = (math.log(sg), math.log(lo) if lo > 0 else -math.inf)
        a, b = memo[key]
        if b == -math.inf:
            ok = False
        s_sup += a
        s_inf += b
    m_sup = s_sup / samples
    m_inf = s_inf / samples
    return ContractingReport(N, samples, m_sup, m_inf, m_inf - m_sup, ok)
