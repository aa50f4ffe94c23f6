"""Lasota-Yorke constants, adapted partitions, N* and the good-fiber predicate."""

from dataclasses import dataclass, field, asdict
import io
import math

import numpy as np
from scipy.special import zeta as hurwitz_zeta

from .bvfunc import GridFunction, cell_midpoints, variation
from .maps import Partition, covering_time, refine_partition
from .potentials import birkhoff_weight, refine_extrema, weight_on_cells
from .transfer import (EDGE_OFFSET, _expand, discontinuity_images, estimate_cocycle,
                       inf_sup_cocycle_one, nu_hat_values, normalized_cocycle)

NEG_MARGIN = 1e-12


class PartitionInfeasible(ValueError):
    pass


class CoveringNotReached(RuntimeError):
    pass


# ----------------------------------------------------------------------
# partitions P_{k,n}

@dataclass
class AdaptedPartition:
    partition: Partition
    alpha_hat: float
    gamma_hat: float
    sup_g: float
    uses_Z: bool
    # for truncated Gauss/Renyi fibers: number of explicit branches kept
    explicit_branches: int = 0


def _has_tail(process, k, n):
    return any(process.fiber_at(k + j).map.tail is not None for j in range(n))


def _gauss_partition(process, k, alpha_hat, gamma_hat):
    fs = process.fiber_at(k)
    tail = fs.map.tail
    s = 2 * fs.potential.t
    # sup g = 1 (at x = 1 for Gauss, x = 0 for Renyi)
    sup_g = 1.0
    if alpha_hat < 1.0:
        raise PartitionInfeasible("Gauss/Renyi weights have variation 1 on [0,1]; need alpha_hat >= 1")
    K = 1
    while hurwitz_zeta(s, K + 1) > gamma_hat * sup_g:
        K = K * 2 if K < 1 << 20 else K + (1 << 20)
        if K > 1 << 40:
            raise PartitionInfeasible("tail sum never drops below gamma_hat")
    lo, hi = K // 2, K
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if hurwitz_zeta(s, mid + 1) <= gamma_hat * sup_g:
            hi = mid
        else:
            lo = mid
    K = hi if hurwitz_zeta(s, lo + 1) > gamma_hat * sup_g else lo
    pts = sorted({0.0, 1.0} | {1.0 / j for j in range(1, K + 2)})
    if tail.mirrored:
        pts = sorted({1.0 - p for p in pts})
    return AdaptedPartition(Partition(tuple(pts)), alpha_hat, gamma_hat, sup_g, False, K)


def build_partition(process, k, n, alpha_hat=0.0, gamma_hat=1.0, samples=64):
    """A partition satisfying var_P g^(n) <= alpha_hat sup g^(n) and
    sum_{Z meets P} sup g^(n) <= gamma_hat sup g^(n).

    Z^(n) is returned when g^(n) is constant on its cells; otherwise cells are
    split greedily so that no piece straddles a cell of Z^(n).
    """
    if alpha_hat < 0 or gamma_hat < 1:
        raise ValueError("need alpha_hat >= 0 and gamma_hat >= 1")
    if _has_tail(process, k, n):
        if n != 1:
            raise NotImplementedError("truncated Gauss/Renyi partitions are supported for n = 1")
        return _gauss_partition(process, k, alpha_hat, gamma_hat)
    Z, cells = weight_on_cells(process, k, n)
    sup_g = max(c[3] for c in cells)
    if all(c[3] - c[2] <= 1e-13 * sup_g for c in cells):
        return AdaptedPartition(Z, alpha_hat, gamma_hat, sup_g, True)
    budget = alpha_hat * sup_g
    fibers = [process.fiber_at(k + j) for j in range(n)]
    pts = [0.0]
    for c in Z.cells:
        xs = np.linspace(c.l, c.r, samples + 1)
        w = np.ones_like(xs)
        x = xs
        for fs, br in zip(fibers, c.path):
            w = w * fs.branch_weight(br, x)
            x = br.forward(x)
        steps = np.abs(np.diff(w))
        run = 0.0
        for i, d in enumerate(steps):
            if d > budget:
                raise PartitionInfeasible(
                    f"weight varies by {d:.3g} > alpha_hat*sup g = {budget:.3g} inside one sample step; "
                    "a partition needs a larger alpha_hat (alpha_hat > 1 in general)")
            if run + d > budget:
                pts.append(float(xs[i]))
                run = 0.0
            run += d
        pts.append(c.r)
    pts = sorted(set(pts))
    pts[-1] = 1.0
    return AdaptedPartition(Partition(tuple(pts)), alpha_hat, gamma_hat, sup_g, False)


def verify_partition(process, k, n, ap, samples=64):
    """Post-hoc (P1) check: max var_P g^(n) / sup g^(n) over the pieces."""
    worst = 0.0
    for l, r in ap.partition.intervals():
        xs = np.linspace(l, r, samples + 1)[:-1]
        xs = np.append(xs, r - 1e-13 * (r - l))
        w = birkhoff_weight(process, k, n, xs)
        worst = max(worst, float(np.sum(np.abs(np.diff(np.atleast_1d(w))))))
    return worst / ap.sup_g


# ----------------------------------------------------------------------
# LY constants

@dataclass
class LYReport:
    k: int
    n: int
    alpha_hat: float
    gamma_hat: float
    sup_g: float
    inf_Ln1: float
    sup_LM1: float
    inf_J_gM: float
    M: int
    A: float
    B: float
    Q: float
    K: float
    L: float
    covering_times: list = field(default_factory=list)
    J_selection: list = field(default_factory=list)
    N_star: object = None
    xi_hat: object = None
    rho_hat: object = None

    @property
    def Q_flag(self):
        """True when Q >= 1, i.e. no contraction at this n."""
        return self.Q >= 1

    def recomputed(self):
        A = (self.alpha_hat + 2 * self.gamma_hat + 1) * self.sup_g
        B = (self.alpha_hat + 2 * self.gamma_hat) * self.sup_LM1 / self.inf_J_gM
        Q = A / self.inf_Ln1
        K = max(Q * B, 6.0 ** self.n)
        L = 2 * max(K, Q) + 1
        return A, B, Q, K, L

    def to_dict(self):
        return asdict(self)


def _select_J(process, k, interval, n_max, cache):
    pl, pr = interval
    tol = 1e-15
    for N in range(1, n_max + 1):
        if N not in cache:
            cache[N] = refine_partition(process.maps_window(k, N), N)
        inside = [c for c in cache[N].cells if c.l >= pl - tol and c.r <= pr + tol]
        if inside:
            width = max(c.r - c.l for c in inside)
            J = next(c for c in inside if c.r - c.l == width)
            return N, (J.l, J.r)
    raise CoveringNotReached(f"no cell of Z^(N), N <= {n_max}, fits inside {interval}")


def _inf_weight_on(process, k, M, J, samples=129):
    l, r = J
    eps = 1e-12 * (r - l)
    xs = np.linspace(l + eps, r - eps, samples)
    fn = lambda x: np.atleast_1d(birkhoff_weight(process, k, M, x))
    return refine_extrema(fn, xs, fn(xs))[0]


def _sup_cocycle_one(process, k, M, grid, memo):
    if M not in memo:
        memo[M] = inf_sup_cocycle_one(process, k, M, grid)[1]
    return memo[M]


def ly_constants(process, k, n, alpha_hat=0.0, gamma_hat=1.0, grid=1024, max_cover=64, partition=None):
    """A, B, Q, K and L at fiber k for n steps."""
    ap = partition or build_partition(process, k, n, alpha_hat, gamma_hat)
    sup_g = ap.sup_g
    inf_L, _ = inf_sup_cocycle_one(process, k, n, grid)
    if not inf_L > 0:
        raise ArithmeticError(f"inf L^{n} 1 vanished at fiber {k}")
    cover_memo = {}
    sup_memo = {}
    best = None
    covers, Js = [], []
    if ap.explicit_branches:
        fs = process.fiber_at(k)
        s = 2 * fs.potential.t
        # every piece holds a full branch (M = 1); the tail piece's largest
        # branch has index explicit_branches + 1 and the smallest weight
        Kp = ap.explicit_branches
        sup_L1 = float(hurwitz_zeta(s, 1.0))
        inf_gJ = (Kp + 2.0) ** (-s)
        mirrored = fs.map.tail.mirrored
        jl, jr = 1.0 / (Kp + 2), 1.0 / (Kp + 1)
        J = (1 - jr, 1 - jl) if mirrored else (jl, jr)
        best = (sup_L1 / inf_gJ, 1, sup_L1, inf_gJ, J)
        covers = [1] * ap.partition.n_cells
        Js = [J]
    else:
        for P in ap.partition.intervals():
            N, J = _select_J(process, k, P, max(n, 1) + 8, cover_memo)
            M = covering_time(process, k, J, max_cover)
            if M is None:
                raise CoveringNotReached(f"cell J={J} inside P={P} did not cover within {max_cover} steps")
            supM = _sup_cocycle_one(process, k, M, grid, sup_memo)
            infg = _inf_weight_on(process, k, M, J)
            Bh = supM / infg
            covers.append(M)
            Js.append(J)
            if best is None or Bh > best[0]:
                best = (Bh, M, supM, infg, J)
    Bh, M, supM, infg, J = best
    A = (alpha_hat + 2 * gamma_hat + 1) * sup_g
    B = (alpha_hat + 2 * gamma_hat) * supM / infg
    Q = A / inf_L
    K = max(Q * B, 6.0 ** n)
    L = 2 * max(K, Q) + 1
    return LYReport(k, n, alpha_hat, gamma_hat, sup_g, inf_L, supM, infg, M,
                    A, B, Q, K, L, covers, Js)


def _dependency_length(rep):
    return max(rep.n, rep.M, max(rep.covering_times) if rep.covering_times else 0)


class _WordMemo:
    """Reports keyed by the symbol word they depend on."""

    def __init__(self, process, fn):
        self.process = process
        self.fn = fn
        self.store = {}

    def get(self, k, n):
        wn = self.process.word_at(k, n)
        for d, word, val in self.store.get((n, wn), ()):
            if self.process.word_at(k, d) == word:
                return val
        val = self.fn(k, n)
        d = _dependency_length(val) if isinstance(val, LYReport) else n
        self.store.setdefault((n, wn), []).append((d, self.process.word_at(k, d), val))
        return val


@dataclass
class NStarResult:
    N_star: object
    xi_hat: object
    rho_hat: object
    trajectory: list

    def to_csv(self):
        buf = io.StringIO()
        buf.write("n,mean_log_Q,mean_log_L\n")
        for n, q, l in self.trajectory:
            buf.write(f"{n},{q!r},{l!r}\n")
        return buf.getvalue()


def find_Nstar(process, alpha_hat=0.0, gamma_hat=1.0, samples=1000, n_max=6, grid=512, k0=0,
               memo=None):
    """Least n with mean log Q^(n) < 0 (Birkhoff average over fibers k0..)."""
    if memo is None:
        memo = _WordMemo(process, lambda k, n: ly_constants(process, k, n, alpha_hat, gamma_hat, grid))
    traj = []
    if process.kind == "periodic":
        samples = min(samples, len(process.word))
    for n in range(1, n_max + 1):
        sq = sl = 0.0
        for i in range(samples):
            rep = memo.get(k0 + i, n)
            sq += math.log(rep.Q)
            sl += math.log(rep.L)
        mq, ml = sq / samples, sl / samples
        traj.append((n, mq, ml))
        if mq < -NEG_MARGIN:
            return NStarResult(n, -mq / n, ml / n, traj)
    return NStarResult(None, None, None, traj)


def random_step_functions(rng, n_cells, count, signed=True, max_pieces=32):
    out = []
    for _ in range(count):
        pieces = int(rng.integers(1, max_pieces + 1))
        cuts = np.sort(rng.choice(np.arange(1, n_cells), size=pieces - 1, replace=False)) if pieces > 1 else []
        lv = rng.normal(size=pieces) if signed else rng.uniform(0.0, 2.0, size=pieces)
        v = np.repeat(lv, np.diff(np.concatenate([[0], cuts, [n_cells]]).astype(int)))
        out.append(GridFunction(v))
    return out


def verify_ly(process, k, n, trials=100, grid=1024, report=None, est=None, seed=0,
              alpha_hat=0.0, gamma_hat=1.0, horizon=30):
    """min over trial f of Q var f + K nu(|f|) - var(L~^n f)."""
    rep = report or ly_constants(process, k, n, alpha_hat, gamma_hat, grid)
    est = est or estimate_cocycle(process, k, horizon, n, grid, residuals=False)
    rng = np.random.default_rng(seed)
    fs = random_step_functions(rng, grid, trials)
    one_cell = np.zeros(grid)
    one_cell[int(rng.integers(grid))] = 1.0
    fs += [GridFunction(np.ones(grid)), GridFunction(one_cell)]
    worst = math.inf
    for f in fs:
        lhs = variation(normalized_cocycle(process, est, k, n, f))
        rhs = rep.Q * variation(f) + rep.K * nu_hat_values(process, k, horizon, np.abs(f.values))
        worst = min(worst, rhs - lhs)
    return worst


# ----------------------------------------------------------------------
# good fibers

@dataclass
class GoodFiberParams:
    B_star: float
    R_a: int
    C_star: float
    alpha_star: float
    N_star: int = 1
    rho: float = 0.0
    epsilon: float = 0.01
    a: object = None
    t_max: int = 16

    def __post_init__(self):
        if self.a is None:
            self.a = 6 * self.B_star
        if not 0 < self.alpha_star <= self.C_star:
            raise ValueError("need 0 < alpha* <= C*")
        if self.R_a % self.N_star:
            raise ValueError("R_a must be a multiple of N*")

    @property
    def delta_a(self):
        return 2 * math.log(self.C_star * (3 + self.a) / self.alpha_star)


@dataclass
class GoodFiberReport:
    G1: bool
    G2: bool
    G3: bool
    G4: bool
    G5: bool
    delta_a: float
    details: dict = field(default_factory=dict)

    @property
    def good(self):
        return self.G1 and self.G2 and self.G3 and self.G4 and self.G5


def _t_omega_a(process, k, a, t_max, grid, persist=2):
    """First n <= t_max with sup g^(n)/inf L^n 1 < 1/(2a) that stays below for
    ``persist`` further steps (the all-n requirement is only checked on that window)."""
    def ok(n):
        sg = _sup_weight_fast(process, k, n)
        lo, _ = inf_sup_cocycle_one(process, k, n, grid)
        return lo > 0 and sg / lo < 1 / (2 * a)

    for n in range(1, t_max + 1):
        if ok(n) and all(ok(n + j) for j in range(1, persist + 1)):
            return n
    return None


def _sup_weight_fast(process, k, n):
    cells = _affine_cells(process, k, n)
    if cells is not None:
        return float(np.max(cells[3]))
    return max(c[3] for c in weight_on_cells(process, k, n)[1])


def _affine_cells(process, k, n):
    """Vectorised Z^(n) for windows of affine branches with constant weights.

    Returns (l, r, image_lo, weight, image_hi) arrays or None when some branch
    is not affine or the weight is not constant on branches.
    """
    fibers = [process.fiber_at(k + j) for j in range(n)]
    for fs in fibers:
        if fs.map.tail is not None or fs.potential.kind == "tabulated":
            return None
        if not all(hasattr(b, "slope") for b in fs.map.branches):
            return None
    fm = fibers[0].map
    l = np.array([b.l for b in fm.branches])
    r = np.array([b.r for b in fm.branches])
    s = np.array([b.slope for b in fm.branches])
    c = np.array([float(b.forward(np.array(0.0))) for b in fm.branches])
    w = np.array([float(fibers[0].branch_weight(b, np.array(b.l))) for b in fm.branches])
    for fs in fibers[1:]:
        lo = s * l + c
        hi = s * r + c
        bl = np.array([b.l for b in fs.map.branches] + [1.0])
        i0 = np.clip(np.searchsorted(bl, lo, side="right") - 1, 0, len(bl) - 2)
        i1 = np.clip(np.searchsorted(bl, hi, side="left") - 1, 0, len(bl) - 2)
        cnt = i1 - i0 + 1
        rep = np.repeat(np.arange(l.size), cnt)
        off = np.arange(rep.size) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        bi = i0[rep] + off
        a_img = np.maximum(lo[rep], bl[bi])
        b_img = np.minimum(hi[rep], bl[bi + 1])
        keep = b_img > a_img
        rep, bi, a_img, b_img = rep[keep], bi[keep], a_img[keep], b_img[keep]
        nl = (a_img - c[rep]) / s[rep]
        nr = (b_img - c[rep]) / s[rep]
        bs = np.array([b.slope for b in fs.map.branches])
        bc = np.array([float(b.forward(np.array(0.0))) for b in fs.map.branches])
        bw = np.array([float(fs.branch_weight(b, np.array(b.l))) for b in fs.map.branches])
        l, r = nl, nr
        c = bs[bi] * c[rep] + bc[bi]
        s = bs[bi] * s[rep]
        w = w[rep] * bw[bi]
    for fs in fibers:
        for b in fs.map.branches:
            gl = float(fs.branch_weight(b, np.array(b.l)))
            gr = float(fs.branch_weight(b, np.array(b.r)))
            if abs(gl - gr) > 1e-14 * max(gl, gr):
                return None
    return l, r, s * l + c, w, s * r + c


def _covering_of_cells(process, k, t, cells, max_cover=64):
    l, r, ilo, w, ihi = cells
    full = (ilo <= 1e-12) & (ihi >= 1 - 1e-12)
    M = np.full(l.size, t)
    for i in np.nonzero(~full)[0]:
        extra = covering_time(process, k + t, (float(ilo[i]), float(ihi[i])), max_cover)
        M[i] = -1 if extra is None else t + extra
    return M


def _inf_L_indicators(process, k, R, breaks, grid):
    """For each cell [breaks[i], breaks[i+1]) the inf over x of L^R 1_cell(x)."""
    e = discontinuity_images(process, k, R)
    aug = np.concatenate([e - EDGE_OFFSET, e + EDGE_OFFSET])
    aug = aug[(aug > 0) & (aug < 1)]
    xs = np.concatenate([cell_midpoints(grid), aug])
    pts, owner, wt = xs.copy(), np.arange(xs.size), np.ones_like(xs)
    for j in range(R - 1, -1, -1):
        pts, owner, wt = _expand(process.fiber_at(k + j), pts, owner, wt)
    ncell = len(breaks) - 1
    u = np.clip(np.searchsorted(breaks, pts, side="right") - 1, 0, ncell - 1)
    acc = np.bincount(owner * ncell + u, weights=wt, minlength=xs.size * ncell)
    return acc.reshape(xs.size, ncell).min(axis=0)


def good_fiber_check(process, k, params, grid=512, trials=8, horizon=30, seed=0, est=None,
                     memo=None, alpha_hat=0.0, gamma_hat=1.0):
    """Evaluate G1..G5 at fiber k for the supplied parameters."""
    p = params
    R = p.R_a
    det = {}
    if est is None:
        est = estimate_cocycle(process, k, horizon, R, grid, residuals=False)
    rng = np.random.default_rng(seed + k)
    # G1 on random nonnegative step functions
    g1 = True
    worst = math.inf
    for h in random_step_functions(rng, grid, trials, signed=False):
        lhs = variation(normalized_cocycle(process, est, k, R, h))
        rhs = variation(h) / 3 + p.B_star * nu_hat_values(process, k, horizon, h.values)
        worst = min(worst, rhs - lhs)
        g1 &= lhs <= rhs
    det["G1_slack"] = worst
    # G2 block average of log L^(N*)
    if memo is None:
        memo = _WordMemo(process, lambda kk, n: ly_constants(process, kk, n, alpha_hat, gamma_hat, grid))
    blocks = R // p.N_star
    avg = sum(math.log(memo.get(k + i * p.N_star, p.N_star).L) for i in range(blocks)) / R
    det["G2_average"] = avg
    g2 = p.rho - p.epsilon <= avg <= p.rho + p.epsilon
    # G3 / G5 through U = Z^(t)
    t = _t_omega_a(process, k, p.a, p.t_max, grid)
    det["t_omega_a"] = t
    g3 = g5 = False
    if t is not None:
        cells = _affine_cells(process, k, t)
        if cells is None:
            Z = refine_partition(process.maps_window(k, t), t)
            breaks = np.array(Z.breakpoints)
            M = [covering_time(process, k, iv, 64) for iv in Z.intervals()]
            M = np.array([-1 if m is None else m for m in M])
        else:
            order = np.argsort(cells[0])
            cells = tuple(c[order] for c in cells)
            breaks = np.append(cells[0], 1.0)
            breaks[0] = 0.0
            M = _covering_of_cells(process, k, t, cells)
        N_wa = -1 if np.any(M < 0) else int(np.max(M))
        det["N_omega_a"] = N_wa
        g3 = N_wa >= 0 and R >= N_wa
        infs = _inf_L_indicators(process, k, R, breaks, grid)
        det["min_inf_LR_1U"] = float(np.min(infs))
        g5 = bool(np.min(infs) >= p.alpha_star)
    # G4
    lo, hi = inf_sup_cocycle_one(process, k, R, grid)
    lamR = math.exp(est.log_lambda_n(k, R))
    det.update(inf_LR1=lo, lambda_R=lamR, sup_LR1=hi)
    tol = 1e-12
    g4 = (1 / p.C_star <= lo * (1 + tol) and lo <= lamR * (1 + tol)
          and lamR <= hi * (1 + tol) and hi <= p.C_star * (1 + tol))
    return GoodFiberReport(bool(g1), bool(g2), bool(g3), bool(g4), bool(g5), p.delta_a, det)


def observed_c_eps(process, k, N_star, xi, eps=0.01, q_max=4, trials=6, grid=512, horizon=30, seed=0):
    """Smallest C with var(L~^{qN*} f) <= C e^{-(xi-eps) q N*} var f + C nu(|f|)
    over random trial f and q <= q_max."""
    est = estimate_cocycle(process, k, horizon, q_max * N_star, grid, residuals=False)
    rng = np.random.default_rng(seed + 7919 * k)
    fs = random_step_functions(rng, grid, trials)
    C = 0.0
    for f in fs:
        vf = variation(f)
        nf = nu_hat_values(process, k, horizon, np.abs(f.values))
        for q in range(1, q_max + 1):
            lhs = variation(normalized_cocycle(process, est, k, q * N_star, f))
            C = max(C, lhs / (math.exp(-(xi - eps) * q * N_star) * vf + nf))
    return C


def calibrate_good_params(process, N_star, xi, rho, eps=0.01, samples=200, grid=512, k0=10_000,
                          percentile=95.0, horizon=30, seed=0, memo=None):
    """Choose B*, R_a, C*, alpha* from a calibration run on fibers k0.. .

    B* is the given percentile of the observed C_eps; C* and alpha* come from
    the extremes of the calibration sample with a factor 2 (resp. 4) of slack.
    """
    cs = [observed_c_eps(process, k0 + i, N_star, xi, eps, grid=grid, horizon=horizon, seed=seed)
          for i in range(samples)]
    B_star = max(float(np.percentile(cs, percentile)), 1e-12)
    a = 6 * B_star
    ts = []
    for i in range(samples):
        t = _t_omega_a(process, k0 + i, a, 16, grid)
        ts.append(16 if t is None else t)
    R_needed = max(ts)
    # one extra block of slack for words rarer than the calibration sample
    R_a = N_star * math.ceil(R_needed / N_star) + N_star
    lo_vals, hi_vals, a_vals = [], [], []
    for i in range(samples):
        k = k0 + i
        lo, hi = inf_sup_cocycle_one(process, k, R_a, grid)
        est = estimate_cocycle(process, k, horizon, R_a, grid, residuals=False)
        lam = math.exp(est.log_lambda_n(k, R_a))
        lo_vals.append(min(lo, lam))
        hi_vals.append(max(hi, lam))
        t = _t_omega_a(process, k, a, 16, grid)
        cells = _affine_cells(process, k, t) if t else None
        if cells is not None:
            order = np.argsort(cells[0])
            br = np.append(cells[0][order], 1.0)
            br[0] = 0.0
            a_vals.append(float(np.min(_inf_L_indicators(process, k, R_a, br, grid))))
    C_star = 2 * max(max(hi_vals), 1 / min(lo_vals))
    alpha_star = 0.25 * min(a_vals) if a_vals else 1e-3
    alpha_star = min(alpha_star, C_star)
    return GoodFiberParams(B_star, R_a, C_star, alpha_star, N_star, rho, eps, a)
