"""Hypothesis validators for the shipped example families."""

from dataclasses import dataclass, field, asdict
import itertools
import json
import math

import numpy as np

from .driving import DrivingProcess, iid_process, make_fiber_spec
from .maps import covering_bounds, covering_time, refine_partition, tau

PASS_MARGIN = 1e-12
GAUSS_T_MAX = 0.613
EXAMPLE_FAMILIES = ("beta_I", "beta_II", "shifted_beta", "gauss_renyi", "pm", "contracting",
                    "lasota_yorke")


class ExampleValidationError(ValueError):
    pass


# ----------------------------------------------------------------------
# zeta with a certified bracket

@dataclass(frozen=True)
class ZetaBracket:
    value: float
    lo: float
    hi: float
    terms: int

    @property
    def half_width(self):
        return 0.5 * (self.hi - self.lo)


def zeta_minus_one(s, tol=1e-8):
    """zeta(s) - 1 = sum_{j>=2} j^-s, tail bracketed by integrals of x^-s.

    The partial sum runs to J with J^-s / 2 <= tol, so the bracket
    [int_{J+1}^inf, int_J^inf] has half-width at most tol.
    """
    s = float(s)
    if not s > 1:
        raise ArithmeticError(f"series diverges for s = {s} <= 1")
    if not tol > 0:
        raise ValueError("tol must be positive")
    J = max(2, math.ceil((2 * tol) ** (-1 / s)))
    part = 0.0
    chunk = 1 << 20
    for a in range(2, J + 1, chunk):
        j = np.arange(a, min(J, a + chunk - 1) + 1, dtype=float)
        part += float(np.sum(j ** -s))
    t_lo = (J + 1.0) ** (1 - s) / (s - 1)
    t_hi = float(J) ** (1 - s) / (s - 1)
    # floating error of the partial sum, generously
    fp = 4e-16 * J + 1e-15 * part
    lo, hi = part + t_lo - fp, part + t_hi + fp
    return ZetaBracket(0.5 * (lo + hi), lo, hi, J)


# ----------------------------------------------------------------------
# reports

@dataclass
class Hypothesis:
    name: str
    margin: float
    strict: bool = True
    quantities: dict = field(default_factory=dict)
    note: str = ""

    @property
    def verdict(self):
        if self.margin is None or (isinstance(self.margin, float) and math.isnan(self.margin)):
            return False
        return self.margin > PASS_MARGIN if self.strict else self.margin >= -PASS_MARGIN


@dataclass
class ExampleReport:
    family: str
    params: dict
    hypotheses: list

    @property
    def overall(self):
        return all(h.verdict for h in self.hypotheses)

    @property
    def margin(self):
        return min(h.margin for h in self.hypotheses)

    def get(self, name):
        return next(h for h in self.hypotheses if h.name == name)

    def to_dict(self):
        return {
            "family": self.family,
            "params": self.params,
            "overall": self.overall,
            "margin": self.margin,
            "hypotheses": [dict(asdict(h), verdict=h.verdict) for h in self.hypotheses],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, default=float)


# ----------------------------------------------------------------------
# closed-form thresholds

def pm_p_max(beta, a, t):
    """Largest p for which mixing a beta map with the intermittent map stays contracting on average."""
    fb = math.floor(beta)
    return math.log(fb / 4) / math.log(fb * (2 * a + 4) ** t / (2 ** t + (a + 2) ** t))


def contracting_p_max(beta, a, t):
    fb = math.floor(beta)
    return math.log(fb / 4) / math.log(fb * (2 - a) ** t / a ** t)


def frac_plus(x):
    """Fractional part, with 1 in place of 0 at integers."""
    f = x - math.floor(x)
    return 1.0 if f < 1e-15 or f > 1 - 1e-15 else f


def shortest_branch(betas, N):
    """s_{omega,N}, the shortest cell of Z^(N) for unshifted beta maps.

    Every cell of Z^(k) maps affinely onto some [0, u] with slope beta^(k);
    the set of image lengths u is carried forward one map at a time, and the
    shortest cell is min u / beta^(k).
    """
    us = {1.0}
    prod = 1.0
    for b in betas[:N]:
        nxt = set()
        for u in us:
            if u * b >= 1 - 1e-15:
                nxt.add(1.0)
            r = u * b - math.floor(u * b + 1e-15)
            if r > 1e-15:
                nxt.add(r)
        us = nxt
        prod *= b
    return min(us) / prod


def shortest_branch_one_step(betas, N):
    """The two-candidate recursion min{s_{sigma^k,1}/beta^(k), {beta^(k+1) s_k}_+/beta_k}.

    Kept for comparison: it can miss the shortest cell, see shortest_branch.
    """
    s = frac_plus(betas[0]) / betas[0]
    prod = betas[0]
    for k in range(1, N):
        s = min(frac_plus(betas[k]) / betas[k] / prod, frac_plus(prod * betas[k] * s) / betas[k])
        prod *= betas[k]
    return s


def shortest_cell(maps, N):
    """Exact shortest cell of Z^(N) from the refined partition."""
    bp = np.array(refine_partition(maps, N).breakpoints)
    return float(np.min(np.diff(bp)))


# ----------------------------------------------------------------------
# expectation helpers

def _alphabet(params):
    vals = params.get("betas")
    if vals is None:
        vals = [params["beta"]]
    vals = [float(b) for b in vals]
    p = params.get("p_alphabet") or params.get("weights")
    if p is None:
        p = [1.0 / len(vals)] * len(vals)
    p = [float(x) for x in p]
    if len(p) != len(vals) or abs(sum(p) - 1) > 1e-12 or min(p) < 0:
        raise ExampleValidationError("alphabet weights must be a probability vector matching betas")
    return vals, p


def _expect(values, p):
    return float(sum(pi * v for pi, v in zip(p, values) if pi > 0))


def _require(params, *names):
    missing = [n for n in names if n not in params]
    if missing:
        raise ExampleValidationError(f"missing parameters: {missing}")
    out = []
    for n in names:
        v = params[n]
        try:
            v = float(v)
        except (TypeError, ValueError):
            raise ExampleValidationError(f"parameter {n} must be a number") from None
        if not math.isfinite(v):
            raise ExampleValidationError(f"parameter {n} must be finite")
        out.append(v)
    return out


def _sample_stats(xs):
    xs = np.asarray(xs, dtype=float)
    return {"mean": float(np.mean(xs)), "stderr": float(np.std(xs, ddof=1) / math.sqrt(xs.size)) if xs.size > 1 else 0.0,
            "max": float(np.max(xs)), "samples": int(xs.size)}


# ----------------------------------------------------------------------
# processes matching each family

def example_process(family, params, seed=0):
    """A DrivingProcess realising the family at the given parameters."""
    fam = family.lower()
    if fam in ("pm", "contracting"):
        beta, a, t, p = _require(params, "beta", "a", "t", "p")
        other = ("pm", {"a": a}) if fam == "pm" else ("contracting", {"a": a})
        pot = {"kind": "geometric", "t": t}
        return iid_process([("beta", {"beta": beta}, pot), (other[0], other[1], pot)],
                           [1 - p, p], seed=seed)
    if fam == "gauss_renyi":
        t, = _require(params, "t")
        p = float(params.get("p", 0.5))
        pot = {"kind": "geometric", "t": t}
        return iid_process([("gauss", {}, pot), ("renyi", {}, pot)], [1 - p, p], seed=seed)
    if fam in ("beta_i", "beta_ii"):
        betas, w = _alphabet(params)
        pot = {"kind": "geometric", "t": float(params.get("t", 1.0))}
        return iid_process([("beta", {"beta": b}, pot) for b in betas], w, seed=seed)
    if fam == "shifted_beta":
        betas, w = _alphabet(params)
        alphas = [float(x) for x in params.get("alphas", [0.0] * len(betas))]
        delta = float(params.get("delta", min(betas) - 2))
        pot = {"kind": "geometric", "t": float(params.get("t", 1.0))}
        return iid_process([("shifted_beta", {"beta": b, "alpha": al, "delta": delta}, pot)
                            for b, al in zip(betas, alphas)], w, seed=seed)
    raise ExampleValidationError(f"no canonical process for family {family!r}")


# ----------------------------------------------------------------------
# per-family validators

def _validate_pm_like(fam, params):
    beta, a, t, p = _require(params, "beta", "a", "t", "p")
    if fam == "pm":
        if not a > 0:
            raise ExampleValidationError("intermittent map needs a > 0")
        pmax = pm_p_max(beta, a, t)
        name = "p < log(floor(beta)/4) / log(floor(beta) (2a+4)^t / (2^t + (a+2)^t))"
    else:
        if not 0 < a < 1:
            raise ExampleValidationError("contracting branch needs 0 < a < 1")
        pmax = contracting_p_max(beta, a, t)
        name = "p < log(floor(beta)/4) / log(floor(beta) (2-a)^t / a^t)"
    if t < 0:
        raise ExampleValidationError("t must be >= 0")
    hyps = [
        Hypothesis("beta >= 5", beta - 5, strict=False, quantities={"beta": beta}),
        Hypothesis("p > 0", p, quantities={"p": p}),
        Hypothesis(name, pmax - p, quantities={"p": p, "p_max": pmax}),
    ]
    return hyps


def _validate_gauss_renyi(params):
    t, = _require(params, "t")
    zb = zeta_minus_one(2 * t, tol=float(params.get("tol", 1e-8))) if 2 * t > 1 else None
    hyps = [Hypothesis("t > 1/2", t - 0.5, quantities={"t": t}),
            Hypothesis(f"t <= {GAUSS_T_MAX}", GAUSS_T_MAX - t, strict=False, quantities={"t": t})]
    if zb is None:
        hyps.append(Hypothesis("4/(zeta(2t)-1) < 1", float("nan"), note="zeta(2t) diverges"))
    else:
        ratio_hi = 4 / zb.lo
        hyps.append(Hypothesis("4/(zeta(2t)-1) < 1", 1 - ratio_hi,
                               quantities={"zeta_minus_one": zb.value, "bracket": [zb.lo, zb.hi],
                                           "ratio_upper": ratio_hi, "terms": zb.terms}))
    return hyps


def _tau_stats(process, samples, s_fn):
    vals = []
    for k in range(samples):
        s = s_fn(k)
        n = tau(s, process, k)
        vals.append(n)
    return _sample_stats(vals)


def _geometric_phi_bounds(betas, t, params):
    if "phi_minus" in params and "phi_plus" in params:
        return float(params["phi_minus"]), float(params["phi_plus"])
    logs = [-t * math.log(b) for b in betas]
    return min(logs), max(logs)


def _validate_beta_I(params, process, samples):
    betas, w = _alphabet(params)
    t = float(params.get("t", 1.0))
    if min(betas) <= 0:
        raise ExampleValidationError("beta must be positive")
    E = _expect([math.log(b) for b in betas], w)
    Em = _expect([math.log(math.floor(b)) if b >= 1 else -math.inf for b in betas], w)
    lo, hi = _geometric_phi_bounds(betas, t, params)
    hyps = [Hypothesis("E = int log beta > 0", E, quantities={"E": E}),
            Hypothesis("phi_+ - phi_- < E_- = int log floor(beta)", Em - (hi - lo),
                       quantities={"E_minus": Em, "phi_minus": lo, "phi_plus": hi}),
            Hypothesis("int log beta < inf", 0.0 if math.isfinite(E) else -1.0, strict=False)]
    if process is not None and samples:
        stats = _tau_stats(process, samples,
                           lambda k: frac_plus(process.fiber_at(k).params["beta"]) / process.fiber_at(k).params["beta"])
        hyps.append(Hypothesis("covering time tau(s) integrable (empirical)", 0.0, strict=False,
                               quantities=stats, note="empirical tail statistics only"))
    return hyps


def _validate_beta_II(params):
    betas, w = _alphabet(params)
    delta, = _require(params, "delta")
    if not delta > 0:
        raise ExampleValidationError("delta must be positive")
    band = min(b - math.floor(b) - delta if b - math.floor(b) > 1e-15 else 1 - delta for b in betas)
    band = min(band, min(b - 1 - delta for b in betas))
    L3 = _expect([math.log(math.floor(b)) for b in betas], w)
    Lc = _expect([math.log(math.ceil(b)) for b in betas], w)
    bound = covering_bounds("beta_delta", delta=delta)
    return [Hypothesis("beta in union of [k+delta, k+1]", band, strict=False, quantities={"delta": delta}),
            Hypothesis("int log floor(beta) > log 3", L3 - math.log(3), quantities={"int_log_floor": L3}),
            Hypothesis("int log ceil(beta) < inf", 0.0 if math.isfinite(Lc) else -1.0, strict=False,
                       quantities={"int_log_ceil": Lc, "covering_bound": bound})]


def _validate_shifted(params, process, samples):
    betas, w = _alphabet(params)
    delta = float(params.get("delta", min(betas) - 2))
    t = float(params.get("t", 1.0))
    N = int(params.get("N_star", 1))
    Em = _expect([math.log(math.floor(b)) for b in betas], w)
    lo, hi = _geometric_phi_bounds(betas, t, params)
    hyps = [Hypothesis("delta > 0", delta, quantities={"delta": delta}),
            Hypothesis("ess inf beta >= 2 + delta", min(betas) - 2 - delta, strict=False),
            Hypothesis("phi_+ - phi_- < E_-", Em - (hi - lo),
                       quantities={"E_minus": Em, "phi_minus": lo, "phi_plus": hi})]
    if samples:
        if process is None:
            process = example_process("shifted_beta", params)
        logs, bounds = [], []
        for k in range(samples):
            s = shortest_cell(process.maps_window(k, N), N)
            logs.append(abs(math.log(s)))
            if delta > 0:
                bounds.append(covering_bounds("conze_raugi", delta=delta, s=s, N=N))
        stats = _sample_stats(logs)
        if bounds:
            stats["covering_bound_max"] = max(bounds)
        hyps.append(Hypothesis("log s_N integrable (empirical)", 0.0 if math.isfinite(stats["max"]) else -1.0,
                               strict=False, quantities=stats, note="empirical tail statistics only"))
    return hyps


def _with_unit_weights(process):
    table = {s: make_fiber_spec(s, fs.map_family, fs.params, {"kind": "constant", "c": 1.0})
             for s, fs in process.fiber_table.items()}
    return DrivingProcess(process.kind, table, p=process.p, word=process.word, seed=process.seed,
                          max_window=process.max_window, offset=process.offset,
                          _streams=process._streams)


def _words(process, n):
    """(word, probability) pairs: exact for iid and periodic driving."""
    if process.kind == "iid":
        syms = process.symbols
        for w in itertools.product(syms, repeat=n):
            yield w, float(np.prod([process.p[s] for s in w]))
    else:
        L = len(process.word)
        seen = {}
        for i in range(L):
            w = process.word_at(i, n)
            seen[w] = seen.get(w, 0.0) + 1.0 / L
        yield from seen.items()


def _word_process(process, word):
    return DrivingProcess("periodic", process.fiber_table, word=list(word) + [word[-1]])


def _deriv_bounds(fs, samples=2049):
    """sup |T'|, inf |T'| and sup |T''|/|T'| over branch interiors."""
    lo, hi, K = math.inf, 0.0, 0.0
    for br in fs.map.branches:
        x = np.linspace(br.l, br.r, samples)[1:-1]
        d = br.deriv_abs(x)
        lo, hi = min(lo, float(d.min())), max(hi, float(d.max()))
        h = x[1] - x[0] if x.size > 1 else 1e-6
        dd = np.abs(np.gradient(d, h))
        K = max(K, float(np.max(dd / d)))
    return lo, hi, K


def _validate_lasota_yorke(params, process, samples):
    if process is None:
        raise ExampleValidationError("the Lasota-Yorke validator needs a driving process")
    t = float(params.get("t", 1.0))
    n_max = int(params.get("n_max", 3))
    unit = _with_unit_weights(process)
    lam, Lam, K = math.inf, 0.0, 0.0
    for s in process.symbols:
        fs = process.fiber_table[s]
        a, b, k = _deriv_bounds(fs)
        lam, Lam, K = min(lam, a), max(Lam, b), max(K, k)
    hyps = [Hypothesis("lambda > 1 (n1 = 1)", lam - 1, quantities={"lambda": lam, "Lambda": Lam, "K": K}),
            Hypothesis("Lambda < inf", 0.0 if math.isfinite(Lam) else -1.0, strict=False)]
    # I^(n): minimal number of n-fold preimages, exact word averages
    from .transfer import inf_sup_cocycle_one
    best = None
    rows = []
    for n in range(1, n_max + 1):
        acc, deltas = 0.0, []
        for w, pw in _words(unit, n):
            wp = _word_process(unit, w)
            lo, _ = inf_sup_cocycle_one(wp, 0, n, 512)
            acc += pw * math.log(max(round(lo), 1e-300))
            deltas.append(shortest_cell(wp.maps_window(0, n), n))
        margin = acc / n - t * math.log(Lam / lam)
        rows.append({"n": n, "mean_log_I": acc, "delta_n": min(deltas), "margin": margin})
        if best is None or margin > best["margin"]:
            best = rows[-1]
    hyps.append(Hypothesis("(1/n2) int log I^(n2) > t log(Lambda/lambda)", best["margin"],
                           quantities={"n2": best["n"], "rows": rows}))
    hyps.append(Hypothesis("delta_n > 0", min(r["delta_n"] for r in rows), quantities={}))
    if samples:
        worst = 0
        for k in range(min(samples, 200)):
            Z = refine_partition(process.maps_window(k, 1), 1)
            for iv in Z.intervals():
                m = covering_time(process, k, iv, 64)
                worst = max(worst, 10**9 if m is None else m)
        hyps.append(Hypothesis("strong random covering (empirical M(1))", 64 - worst, strict=False,
                               quantities={"max_covering_time": worst}, note="sampled fibers only"))
    return hyps


def validate_example(family, params, process=None, samples=0):
    """Evaluate the hypotheses of one example family; returns an ExampleReport."""
    if not isinstance(params, dict):
        raise ExampleValidationError("params must be a dict")
    fam = family.lower().replace("-", "_")
    if fam in ("pm", "contracting"):
        hyps = _validate_pm_like(fam, params)
    elif fam == "gauss_renyi":
        hyps = _validate_gauss_renyi(params)
    elif fam == "beta_i":
        hyps = _validate_beta_I(params, process, samples)
    elif fam == "beta_ii":
        hyps = _validate_beta_II(params)
    elif fam == "shifted_beta":
        hyps = _validate_shifted(params, process, samples)
    elif fam == "lasota_yorke":
        hyps = _validate_lasota_yorke(params, process, samples)
    else:
        raise ExampleValidationError(f"unknown example family {family!r}; expected one of {EXAMPLE_FAMILIES}")
    return ExampleReport(fam, dict(params), hyps)
