"""qthermo command line: config loading, dispatch and reproducible output files."""

import argparse
import hashlib
import json
import math
import os
import sys
import tempfile

import numpy as np

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_INVALID = 2
EXIT_USAGE = 64
EXIT_NOINPUT = 66

COMMANDS = ("density", "pressure", "conformal", "correlations", "ly-constants", "nstar",
            "covering", "cone-contract", "good-fibers", "validate-example", "equilibrium")

USAGE = ("usage: qthermo <command> --config path [--seed N --grid N --horizon N --samples N --out dir]\n"
         "commands: " + ", ".join(COMMANDS) + "\n")


class ConfigError(ValueError):
    """Config content is invalid (exit 2)."""


class ConfigUnreadable(OSError):
    """Config missing, unreadable or empty (exit 66)."""


# ----------------------------------------------------------------------
# configuration

DEFAULTS = {"grid": 4096, "horizon": 30, "samples": 1000, "seed": 0, "k": 0, "out": "qthermo_out"}


def load_config(path):
    if path is None:
        raise ConfigUnreadable("no --config given")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigUnreadable(f"cannot read config {path}: {exc.strerror}") from None
    if not text.strip():
        raise ConfigUnreadable(f"config {path} is empty")
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigUnreadable(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict) or not cfg:
        raise ConfigUnreadable(f"config {path} is empty")
    return cfg


def effective_config(cfg, flags):
    out = dict(DEFAULTS)
    out.update(cfg)
    for key in ("seed", "grid", "horizon", "samples", "out"):
        v = getattr(flags, key, None)
        if v is not None:
            out[key] = v
    g = out["grid"]
    if not isinstance(g, int) or g < 2 or g & (g - 1):
        raise ConfigError(f"grid must be a power of two >= 2 (got {g!r})")
    if not isinstance(out["horizon"], int) or out["horizon"] < 1:
        raise ConfigError("horizon must be an integer >= 1")
    if not isinstance(out["samples"], int) or out["samples"] < 1:
        raise ConfigError("samples must be an integer >= 1")
    return out


def config_hash(cfg):
    # where results land is not part of the experiment
    cfg = {k: v for k, v in cfg.items() if k != "out"}
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canon.encode()).hexdigest()


def build_process(cfg):
    from .driving import DrivingError, make_driving

    drv = dict(cfg.get("driving") or {})
    fibers = cfg.get("fibers") or drv.pop("fibers", None)
    if not fibers:
        raise ConfigError("config needs a 'fibers' table mapping symbols to family/params/potential")
    drv.setdefault("seed", cfg["seed"])
    drv["seed"] = cfg["seed"]
    if drv.get("kind", "iid") == "iid" and "p" not in drv:
        if len(fibers) == 1:
            drv["p"] = [1.0]
        else:
            raise ConfigError("iid driving needs probabilities 'p'")
    try:
        return make_driving(drv, fibers)
    except (DrivingError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"invalid driving/fiber specification: {exc}") from None


# ----------------------------------------------------------------------
# output

def _atomic_write(path, text):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _clean(obj):
    """JSON-safe version of results: numpy scalars, tuples, non-finite floats."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


class Output:
    def __init__(self, cfg, command):
        self.dir = cfg["out"]
        self.header = {"command": command, "config_hash": config_hash(cfg), "seed": cfg["seed"]}
        self.written = []

    def json(self, name, payload):
        doc = {"header": self.header, "result": _clean(payload)}
        path = os.path.join(self.dir, name)
        _atomic_write(path, json.dumps(doc, sort_keys=True, indent=2) + "\n")
        self.written.append(path)
        return doc

    def csv(self, name, body):
        head = "".join(f"# {k}={self.header[k]}\n" for k in ("command", "config_hash", "seed"))
        path = os.path.join(self.dir, name)
        _atomic_write(path, head + body)
        self.written.append(path)


# ----------------------------------------------------------------------
# observables by name (no code evaluation)

def observable(spec, grid):
    from .bvfunc import grid_function, indicator

    if isinstance(spec, (int, float)):
        return grid_function(float(spec), grid)
    name = str(spec)
    if name == "one":
        return grid_function(1.0, grid)
    if name == "x":
        return grid_function(lambda x: x, grid)
    if name == "x_centered":
        return grid_function(lambda x: x - 0.5, grid)
    if name.startswith("indicator:"):
        _, a, b = name.split(":")
        return indicator(float(a), float(b), grid)
    if name.startswith("cos:"):
        m = float(name.split(":")[1])
        return grid_function(lambda x: np.cos(2 * np.pi * m * x), grid)
    raise ConfigError(f"unknown observable {spec!r}")


# ----------------------------------------------------------------------
# commands

def cmd_density(cfg, out):
    from .bvfunc import bv_stats, to_csv
    from .transfer import estimate_cocycle

    P = build_process(cfg)
    k = int(cfg["k"])
    est = estimate_cocycle(P, k, cfg["horizon"], 1, cfg["grid"])
    q = est.q(k)
    st = bv_stats(q)
    out.csv("density.csv", to_csv(q))
    return out.json("density.json", {"k": k, "lambda_hat": est.lam(k), "residual": est.residuals.get(k),
                                     "variation": st.variation, "sup": st.sup, "inf": st.inf})


def cmd_pressure(cfg, out):
    from .measures import expected_pressure

    P = build_process(cfg)
    pe = expected_pressure(P, cfg["horizon"], cfg["samples"], cfg["grid"], int(cfg["k"]))
    out.csv("pressure.csv", pe.to_csv())
    return out.json("pressure.json", {"ep": pe.ep, "stderr": pe.stderr, "samples": pe.samples,
                                      "boundary_correction": pe.boundary_correction})


def cmd_conformal(cfg, out):
    from .measures import conformal_eval, conformality_residual, standard_observables
    from .bvfunc import grid_function

    P = build_process(cfg)
    k, grid, hz = int(cfg["k"]), cfg["grid"], cfg["horizon"]
    obs = standard_observables()
    names = ["one", "x"] + [f"indicator:{i/4}:{(i+1)/4}" for i in range(4)]
    vals = {n: conformal_eval(P, k, grid_function(f, grid), hz, check=False) for n, f in zip(names, obs)}
    res = conformality_residual(P, k, obs, hz, grid)
    return out.json("conformal.json", {"k": k, "nu_hat": vals, "conformality_residual": res})


def cmd_correlations(cfg, out):
    from .measures import correlation_sequence

    P = build_process(cfg)
    grid = cfg["grid"]
    f = observable(cfg.get("f", "x_centered"), grid)
    h = observable(cfg.get("h", "x_centered"), grid)
    tab = correlation_sequence(P, int(cfg["k"]), f, h, int(cfg.get("n_max", 12)), cfg["horizon"], grid)
    out.csv("correlations.csv", tab.to_csv())
    return out.json("correlations.json", tab.summary())


def cmd_ly(cfg, out):
    from .lyconsts import ly_constants, verify_ly

    P = build_process(cfg)
    k, n = int(cfg["k"]), int(cfg.get("n", 1))
    ah, gh = float(cfg.get("alpha_hat", 0.0)), float(cfg.get("gamma_hat", 1.0))
    grid = min(cfg["grid"], 1024)
    rep = ly_constants(P, k, n, ah, gh, grid)
    slack = verify_ly(P, k, n, int(cfg.get("trials", 100)), grid, report=rep, seed=cfg["seed"],
                      horizon=cfg["horizon"])
    d = rep.to_dict()
    d.update(Q_flag=rep.Q_flag, verify_slack=slack)
    return out.json("ly_constants.json", d)


def cmd_nstar(cfg, out):
    from .lyconsts import find_Nstar

    P = build_process(cfg)
    res = find_Nstar(P, float(cfg.get("alpha_hat", 0.0)), float(cfg.get("gamma_hat", 1.0)),
                     cfg["samples"], int(cfg.get("n_max", 6)), min(cfg["grid"], 1024), int(cfg["k"]))
    out.csv("ly.csv", res.to_csv())
    return out.json("nstar.json", {"N_star": res.N_star, "xi_hat": res.xi_hat, "rho_hat": res.rho_hat})


def cmd_covering(cfg, out):
    from .maps import covering_time

    P = build_process(cfg)
    k = int(cfg["k"])
    ivs = cfg.get("intervals") or [[0.0, 0.5], [0.5, 1.0]]
    rows = ["J_left,J_right,covering_time"]
    res = []
    for a, b in ivs:
        m = covering_time(P, k, (float(a), float(b)), int(cfg.get("max_n", 64)))
        rows.append(f"{float(a)!r},{float(b)!r},{'' if m is None else m}")
        res.append({"J": [a, b], "covering_time": m})
    out.csv("covering.csv", "\n".join(rows) + "\n")
    return out.json("covering.json", {"k": k, "results": res})


def cmd_cone(cfg, out):
    from .cones import cone_contraction_diagnostic

    P = build_process(cfg)
    d = cone_contraction_diagnostic(P, int(cfg["k"]), int(cfg.get("n", 10)), None,
                                    int(cfg.get("trials", 200)), min(cfg["grid"], 1024), cfg["seed"])
    return out.json("cone_contract.json", {"max_ratio": d.max_ratio, "diam_estimate": d.diam_estimate,
                                           "tanh_bound": d.tanh_bound, "trials": d.trials})


def cmd_good(cfg, out):
    from .lyconsts import _WordMemo, calibrate_good_params, find_Nstar, good_fiber_check, ly_constants

    P = build_process(cfg)
    grid = min(cfg["grid"], 512)
    ah, gh = float(cfg.get("alpha_hat", 0.0)), float(cfg.get("gamma_hat", 1.0))
    eps = float(cfg.get("epsilon", 0.01))
    memo = _WordMemo(P, lambda kk, n: ly_constants(P, kk, n, ah, gh, grid))
    ns = find_Nstar(P, ah, gh, cfg["samples"], int(cfg.get("n_max", 6)), grid, memo=memo)
    if ns.N_star is None:
        raise ConfigError("no N* found: mean log Q never negative up to n_max")
    gp = calibrate_good_params(P, ns.N_star, ns.xi_hat, ns.rho_hat, eps,
                               int(cfg.get("calibration", 200)), grid, horizon=cfg["horizon"],
                               seed=cfg["seed"])
    nf = int(cfg.get("fibers_checked", 1000))
    rows = ["fiber,good,G1,G2,G3,G4,G5"]
    good = 0
    for k in range(nf):
        r = good_fiber_check(P, k, gp, grid, horizon=cfg["horizon"], seed=cfg["seed"], memo=memo)
        good += r.good
        rows.append(f"{k},{int(r.good)},{int(r.G1)},{int(r.G2)},{int(r.G3)},{int(r.G4)},{int(r.G5)}")
    out.csv("good_fibers.csv", "\n".join(rows) + "\n")
    frac = good / nf
    return out.json("good_fibers.json", {"fraction_good": frac, "target": 1 - eps / 4, "N_star": ns.N_star,
                                         "B_star": gp.B_star, "R_a": gp.R_a, "C_star": gp.C_star,
                                         "alpha_star": gp.alpha_star, "a": gp.a, "delta_a": gp.delta_a})


def cmd_validate(cfg, out):
    from .examples import ExampleValidationError, example_process, validate_example

    ex = dict(cfg.get("example") or {})
    fam = ex.pop("family", None)
    params = ex.get("params", ex)
    if fam is None:
        raise ConfigError("validate-example needs --family or an 'example' block")
    proc = build_process(cfg) if cfg.get("fibers") else None
    try:
        if proc is None and fam in ("beta_I", "beta_i", "shifted_beta") and cfg.get("samples_example"):
            proc = example_process(fam, params, cfg["seed"])
        rep = validate_example(fam, params, proc, int(cfg.get("samples_example", 0)))
    except ExampleValidationError as exc:
        raise ConfigError(str(exc)) from None
    doc = out.json("validate_example.json", rep.to_dict())
    doc["_status"] = EXIT_OK if rep.overall else EXIT_INVALID
    return doc


def cmd_equilibrium(cfg, out):
    from .measures import equilibrium_identity_check

    P = build_process(cfg)
    r = equilibrium_identity_check(P, int(cfg["k"]), cfg["horizon"], cfg["grid"])
    return out.json("equilibrium.json", {"k": int(cfg["k"]), "residual": r})


DISPATCH = {
    "density": cmd_density, "pressure": cmd_pressure, "conformal": cmd_conformal,
    "correlations": cmd_correlations, "ly-constants": cmd_ly, "nstar": cmd_nstar,
    "covering": cmd_covering, "cone-contract": cmd_cone, "good-fibers": cmd_good,
    "validate-example": cmd_validate, "equilibrium": cmd_equilibrium,
}


def _parser():
    ap = argparse.ArgumentParser(prog="qthermo", add_help=True)
    ap.add_argument("--config")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--grid", type=int)
    ap.add_argument("--horizon", type=int)
    ap.add_argument("--samples", type=int)
    ap.add_argument("--out")
    ap.add_argument("--family")
    ap.add_argument("--beta", type=float)
    ap.add_argument("--a", type=float)
    ap.add_argument("--t", type=float)
    ap.add_argument("--p", type=float)
    ap.add_argument("--delta", type=float)
    return ap


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] not in DISPATCH:
        if argv and argv[0] in ("-h", "--help"):
            sys.stdout.write(USAGE)
            return EXIT_OK
        sys.stderr.write(USAGE)
        return EXIT_USAGE
    command, rest = argv[0], argv[1:]
    ap = _parser()
    try:
        flags = ap.parse_args(rest)
    except SystemExit:
        return EXIT_USAGE
    try:
        if command == "validate-example" and flags.config is None:
            cfg = {}
        else:
            cfg = load_config(flags.config)
        if command == "validate-example" and flags.family:
            ex = {"family": flags.family}
            for key in ("beta", "a", "t", "p", "delta"):
                v = getattr(flags, key)
                if v is not None:
                    ex[key] = v
            cfg["example"] = ex
        cfg = effective_config(cfg, flags)
        out = Output(cfg, command)
        doc = DISPATCH[command](cfg, out)
    except ConfigUnreadable as exc:
        sys.stderr.write(f"qthermo: {exc}\n")
        return EXIT_NOINPUT
    except ConfigError as exc:
        sys.stderr.write(f"qthermo: invalid configuration: {exc}\n")
        return EXIT_INVALID
    except Exception as exc:  # runtime failure of a computation
        sys.stderr.write(f"qthermo: {type(exc).__name__}: {exc}\n")
        return EXIT_RUNTIME
    status = doc.pop("_status", EXIT_OK)
    sys.stdout.write(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    return status


if __name__ == "__main__":
    sys.exit(main())
