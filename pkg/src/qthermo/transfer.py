"""Transfer operators on step functions, cocycles and eigen-data estimates."""

from dataclasses import dataclass, field
from functools import lru_cache
import io
import math

import numpy as np
import scipy.sparse as sp
from scipy.integrate import quad
from scipy.special import zeta as hurwitz_zeta

from .bvfunc import DIV_FLOOR, GridFunction, cell_index, cell_midpoints, grid_function

POINTWISE_BUDGET = 4_000_000
EDGE_OFFSET = 1e-9


class PositivityError(ArithmeticError):
    pass


# ----------------------------------------------------------------------
# grid operator

def _tail_groups(tail, s, x, n):
    """Branches j > k_cut of a truncated Gauss/Renyi map, grouped by grid cell.

    For each point x and each cell c of an n-cell grid, the preimages
    1/(j + x) lying in c are summed exactly as a difference of Hurwitz zeta
    values.  Returns (point index, Gauss-side cell, weight, branch index of
    one member of the group).
    """
    K = tail.k_cut
    rows, cols, vals, reps = [], [], [], []
    c_max = int(n // (K + 1)) + 1
    for c in range(0, c_max + 1):
        lo = np.floor(n / (c + 1) - x) + 1
        lo = np.maximum(lo, K + 1)
        if c == 0:
            w = hurwitz_zeta(s, lo + x)
            j = lo
        else:
            hi = np.floor(n / c - x)
            ok = hi >= lo
            if not np.any(ok):
                continue
            w = np.where(ok, hurwitz_zeta(s, lo + x) - hurwitz_zeta(s, np.maximum(hi, lo) + 1 + x), 0.0)
            j = np.floor(0.5 * (lo + np.maximum(hi, lo)))
        m = w > 0
        rows.append(np.nonzero(m)[0])
        cols.append(np.full(int(m.sum()), min(c, n - 1)))
        vals.append(w[m])
        reps.append(np.broadcast_to(j, x.shape)[m])
    return (np.concatenate(rows), np.concatenate(cols), np.concatenate(vals),
            np.concatenate(reps))


def _gauss_tail_entries(fmap, s, n):
    """Matrix entries of the branches j > k_cut on an n-cell grid."""
    rows, cols, vals, _ = _tail_groups(fmap.tail, s, cell_midpoints(n), n)
    if fmap.tail.mirrored:
        cols = n - 1 - cols
    return rows, cols, vals


@lru_cache(maxsize=128)
def transfer_matrix(fiber, n_cells):
    """Sparse collocation matrix of L for one fiber on a grid of n_cells.

    Row i collects g(y) for every preimage y of the midpoint x_i, placed in the
    column of the cell containing y.
    """
    fm = fiber.map
    x = cell_midpoints(n_cells)
    rows, cols, vals = [], [], []
    for br in fm.branches:
        m = br.contains_image(x)
        if not np.any(m):
            continue
        xi = np.nonzero(m)[0]
        y = br.inverse(x[xi])
        w = fiber.branch_weight(br, y)
        rows.append(xi)
        cols.append(cell_index(y, n_cells))
        vals.append(w)
    if fm.tail is not None:
        r, c, v = _gauss_tail_entries(fm, 2 * fiber.potential.t, n_cells)
        rows.append(r)
        cols.append(c)
        vals.append(v)
    M = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n_cells, n_cells))
    M.sum_duplicates()
    return M


def _values(f):
    return f.values if isinstance(f, GridFunction) else np.asarray(f, dtype=float)


def apply_transfer(fiber, f):
    """L f on the grid of f."""
    return GridFunction(transfer_matrix(fiber, f.n_cells) @ f.values)


def _push(process, k, n, V):
    """Apply L^n_k to the columns of V (raw arrays, no renormalisation)."""
    ncell = V.shape[0]
    for j in range(n):
        V = transfer_matrix(process.fiber_at(k + j), ncell) @ V
    return V


def apply_cocycle(process, k, n, f):
    """L_{k+n-1} o ... o L_k f; n = 0 is the identity."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return f
    return GridFunction(_push(process, k, n, f.values))


def _cell_integrals(fn, n, nodes=8):
    """int over each cell of fn; Gauss-Legendre inside, QUADPACK on the two
    end cells where the Gauss/Renyi densities are singular."""
    t, w = np.polynomial.legendre.leggauss(nodes)
    h = 1.0 / n
    x = (np.arange(n)[:, None] + 0.5 * (t[None, :] + 1)) * h
    vals = fn(x.ravel()).reshape(n, nodes) @ w * (0.5 * h)
    for i in (0, n - 1):
        vals[i] = quad(lambda u: float(fn(np.array([u]))[0]), i * h, (i + 1) * h, limit=200)[0]
    return vals


def duality_defect(fiber, f):
    """|Leb(L f) - Leb(f g |T'|)|: the change-of-variables identity on the grid.

    The right side integrates g |T'| exactly over each cell, so only the
    collocation error of L enters.
    """
    Lf = apply_transfer(fiber, f)
    gd = _cell_integrals(lambda x: fiber.weight(x) * fiber.map.deriv_abs(x), f.n_cells)
    return abs(float(np.mean(Lf.values)) - float(np.dot(f.values, gd)))


# ----------------------------------------------------------------------
# exact pointwise operator

def _expand(fiber, pts, owner, w, tail_cells=None):
    """Preimage expansion of weighted points through one fiber (closed images).

    The Gauss/Renyi tail is lumped at one representative point, or, with
    ``tail_cells`` = n, split over the cells of an n-cell grid with one true
    preimage per cell (exact for step functions on that grid).
    """
    fm = fiber.map
    P, O, W = [], [], []
    for br in fm.branches:
        m = br.contains_image(pts)
        if not np.any(m):
            continue
        y = br.inverse(np.clip(pts[m], br.image[0], br.image[1]))
        P.append(y)
        O.append(owner[m])
        W.append(w[m] * fiber.branch_weight(br, y))
    if fm.tail is not None:
        s = 2 * fiber.potential.t
        if tail_cells is None:
            P.append(fm.tail.representative(pts))
            O.append(owner)
            W.append(w * fm.tail.lumped_weight(pts, s))
        else:
            r, _, v, j = _tail_groups(fm.tail, s, pts, tail_cells)
            y = 1.0 / (j + pts[r])
            P.append(1.0 - y if fm.tail.mirrored else y)
            O.append(owner[r])
            W.append(w[r] * v)
    return np.concatenate(P), np.concatenate(O), np.concatenate(W)


def cocycle_pointwise(process, k, n, phi, xs):
    """(L^n_k phi)(x) summed over exact preimage trees.

    ``phi`` is a callable on arrays (None means the constant 1).  The tail of a
    truncated Gauss/Renyi fiber is lumped at one representative point, which
    is exact whenever phi is constant on that tiny interval.
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    pts = xs.copy()
    owner = np.arange(xs.size)
    w = np.ones_like(xs)
    for j in range(n - 1, -1, -1):
        pts, owner, w = _expand(process.fiber_at(k + j), pts, owner, w)
        if pts.size > POINTWISE_BUDGET:
            raise MemoryError("preimage tree exceeds the pointwise budget")
    vals = w if phi is None else w * np.asarray(phi(pts), dtype=float)
    return np.bincount(owner, weights=vals, minlength=xs.size)


def transfer_pointwise(fiber, phi, xs, tail_cells=None):
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    pts, owner, w = _expand(fiber, xs, np.arange(xs.size), np.ones_like(xs), tail_cells)
    vals = w if phi is None else w * np.asarray(phi(pts), dtype=float)
    return np.bincount(owner, weights=vals, minlength=xs.size)


def discontinuity_images(process, k, n):
    """Points where L^n_k 1 may jump: images of branch-image endpoints."""
    pts = np.zeros(0)
    for j in range(n):
        fm = process.fiber_at(k + j).map
        if pts.size:
            pts = fm.forward(pts)
        pts = np.concatenate([pts, np.asarray(fm.image_endpoints(), dtype=float)])
        pts = np.unique(np.round(pts, 15))
    return pts


def inf_sup_cocycle_one(process, k, n, grid=1024):
    """(inf, sup) of L^n_k 1 over midpoints plus both sides of its jump points."""
    e = discontinuity_images(process, k, n)
    aug = np.concatenate([e - EDGE_OFFSET, e + EDGE_OFFSET, [EDGE_OFFSET, 1 - EDGE_OFFSET]])
    aug = aug[(aug > 0) & (aug < 1)]
    xs = np.concatenate([cell_midpoints(grid), aug])
    try:
        v = cocycle_pointwise(process, k, n, None, xs)
    except MemoryError:
        v = _push(process, k, n, np.ones(grid))
    return float(np.min(v)), float(np.max(v))


def inf_cocycle_indicator(process, k, n, J, grid=1024):
    """inf of L^n_k 1_J over grid midpoints and jump-point sides."""
    a, b = J

    def ind(y):
        return ((y >= a) & (y <= b)).astype(float)

    e = discontinuity_images(process, k, n)
    aug = np.concatenate([e - EDGE_OFFSET, e + EDGE_OFFSET])
    aug = aug[(aug > 0) & (aug < 1)]
    xs = np.concatenate([cell_midpoints(grid), aug])
    try:
        v = cocycle_pointwise(process, k, n, ind, xs)
    except MemoryError:
        v = _push(process, k, n, grid_function(ind, grid).values)
    return float(np.min(v))


# ----------------------------------------------------------------------
# conformal ratio and eigen-data

def sup_ratio(process, k, n, V):
    """||L^n_k v||_inf / ||L^n_k 1||_inf for the nonnegative columns v of V.

    Renormalised each step by the sup of the iterate of 1, which cancels.
    """
    V = np.atleast_2d(np.asarray(V, dtype=float).T).T
    ncell = V.shape[0]
    W = np.column_stack([np.ones(ncell), V])
    for j in range(n):
        W = transfer_matrix(process.fiber_at(k + j), ncell) @ W
        s = np.max(W[:, 0])
        if not s > 0:
            raise PositivityError(f"L^n 1 vanished at fiber {k + j}")
        W = W / s
    return np.max(np.abs(W[:, 1:]), axis=0) / np.max(W[:, 0])


def nu_hat_values(process, k, n, f):
    """nu_k(f) by the sup ratio at horizon n, signed f split into f+ and f-."""
    v = _values(f)
    pos = np.maximum(v, 0.0)
    neg = np.maximum(-v, 0.0)
    cols = [c for c in (pos, neg) if np.any(c > 0)]
    if not cols:
        return 0.0
    r = sup_ratio(process, k, n, np.column_stack(cols))
    out = 0.0
    i = 0
    if np.any(pos > 0):
        out += r[i]
        i += 1
    if np.any(neg > 0):
        out -= r[i]
    return float(out)


def _backward_orbit(process, k_start, k_end, n, ncell):
    """Lebesgue-normalised iterates of 1 started at k_start - n, recorded on
    fibers k_start..k_end, with the Lebesgue growth factor of each step."""
    v = np.ones(ncell)
    j = k_start - n
    rec, growth = {}, {}
    while j <= k_end:
        if j >= k_start:
            rec[j] = v
        w = transfer_matrix(process.fiber_at(j), ncell) @ v
        m = float(np.mean(w))
        if not m > 0:
            raise PositivityError(f"L 1 lost all mass at fiber {j}; check covering/contraction")
        growth[j] = m
        v = w / m
        j += 1
    return rec, growth


@dataclass
class CocycleEstimates:
    """Eigen-data estimates on fibers k..k+window.

    q_hat[j] is normalised so that nu_hat_j(q_hat[j]) = 1 and
    lambda_hats[j] = nu_hat_{j+1}(L_j q_hat[j]), which makes
    L_j q_hat[j] = lambda_hats[j] q_hat[j+1] hold exactly on the grid.
    """
    k: int
    n_used: int
    n_cells: int
    lambda_hats: dict
    q_hat: dict
    lebesgue_ratio: dict
    residuals: dict = field(default_factory=dict)
    normalization: str = "conformal"

    def lam(self, j):
        return self.lambda_hats[j]

    def q(self, j):
        return self.q_hat[j]

    def log_lambda_n(self, j, n):
        return sum(math.log(self.lambda_hats[j + i]) for i in range(n))

    def to_csv(self):
        buf = io.StringIO()
        buf.write("fiber_index,lambda_hat,residual\n")
        for j in sorted(self.lambda_hats):
            buf.write(f"{j},{self.lambda_hats[j]!r},{self.residuals.get(j, float('nan'))!r}\n")
        return buf.getvalue()


def estimate_cocycle(process, k, horizon=30, window=1, grid=4096, residuals=True):
    """lambda_hat and q_hat on fibers k..k+window-1 (q_hat also at k+window)."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    rec, growth = _backward_orbit(process, k, k + window, horizon, grid)
    qs, lam = {}, {}
    for j in range(k, k + window + 1):
        nu = nu_hat_values(process, j, horizon, rec[j])
        if not nu > 0:
            raise PositivityError(f"nu_hat(q) vanished at fiber {j}")
        q = rec[j] / nu
        if np.min(q) < DIV_FLOOR:
            raise PositivityError(f"q_hat below floor at fiber {j} (min {np.min(q):.3g})")
        qs[j] = GridFunction(q)
    for j in range(k, k + window):
        lam[j] = float(np.mean(transfer_matrix(process.fiber_at(j), grid) @ qs[j].values)
                       / np.mean(qs[j + 1].values))
    est = CocycleEstimates(k, horizon, grid, lam, qs,
                           {j: growth[j] for j in range(k, k + window)})
    if residuals:
        for j in range(k, k + window):
            fresh, _ = _backward_orbit(process, j + 1, j + 1, horizon, grid)
            f = fresh[j + 1]
            f = f / nu_hat_values(process, j + 1, horizon, f)
            Lq = transfer_matrix(process.fiber_at(j), grid) @ qs[j].values / lam[j]
            est.residuals[j] = float(np.max(np.abs(Lq - f)))
    return est


def lambda_estimate(process, k, horizon=30, grid=4096):
    return estimate_cocycle(process, k, horizon, 1, grid, residuals=False).lam(k)


def lebesgue_lambda(process, k, horizon=30, grid=4096):
    """Leb(L^{n+1} 1) / Leb(L^n 1) along the backward orbit ending at k."""
    _, growth = _backward_orbit(process, k, k, horizon, grid)
    return growth[k]


def invariant_density(process, k, horizon=30, grid=4096):
    """q_hat at fiber k plus the residual ||L~ q_k - q_{k+1}||_inf."""
    est = estimate_cocycle(process, k, horizon, 1, grid)
    return est.q(k), est.residuals[k]


def normalized_cocycle(process, est, k, n, f):
    """L~^n f = L^n f / lambda^n using the estimates."""
    v = _values(f)
    for j in range(n):
        v = transfer_matrix(process.fiber_at(k + j), v.size) @ v / est.lam(k + j)
    return GridFunction(v)


def fully_normalized_apply(process, k, est, f):
    """L^ f = L(f q_k) / (lambda_k q_{k+1})."""
    qk, qk1 = est.q(k).values, est.q(k + 1).values
    if min(np.min(qk), np.min(qk1)) < DIV_FLOOR:
        raise PositivityError("q_hat floor violated")
    v = transfer_matrix(process.fiber_at(k), f.n_cells) @ (_values(f) * qk)
    return GridFunction(v / (est.lam(k) * qk1))


def fully_normalized_cocycle(process, k, est, n, f):
    for j in range(n):
        f = fully_normalized_apply(process, k + j, est, f)
    return f


def g_hat(process, k, est, x):
    """Normalised weight g q_k / (lambda_k q_{k+1} o T) at points x."""
    fs = process.fiber_at(k)
    x = np.asarray(x, dtype=float)
    return fs.weight(x) * est.q(k)(x) / (est.lam(k) * est.q(k + 1)(fs.map.forward(x)))


def pull_out_sides(process, k, est, f, h):
    """Both sides of L^(h . f o T) = f . L^ h for one step.

    The left side uses exact preimages (so f o T is evaluated at T(y) = x);
    the right side uses the grid operator.
    """
    n = h.n_cells
    x = cell_midpoints(n)
    fs = process.fiber_at(k)
    qk = est.q(k)
    qk1 = est.q(k + 1)

    def phi(y):
        return h(y) * qk(y) * f(fs.map.forward(y))

    lhs = transfer_pointwise(fs, phi, x, tail_cells=n) / (est.lam(k) * qk1.values)
    rhs = f.values * fully_normalized_apply(process, k, est, h).values
    return lhs, rhs
