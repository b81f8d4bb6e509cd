"""Command-line entry point: configuration, subcommand dispatch and file output.

Every run writes the fully-defaulted configuration to ``config.json`` in the
output directory, then the subcommand's CSV/JSON files. Failures write
``error.json`` and exit nonzero.
"""
from __future__ import annotations

import argparse
import copy
import json
import math
import os
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import ArtifactError, ConfigError, DomainError, GridMismatch
from .fields import BUILTIN_RHS, builtin_rhs
from .fixed_point import KappaSpec, construct
from .grid import RadialField, RadialGrid, norm_X, norm_Y, read_csv, write_csv
from .mode_solver import (ModeSpec, relative_residual, solve_mode, stability_ratio,
                          weighted_mode_residual)
from .params import (Params, derive_params, eigenvalue, identity_residuals, mode_exponents,
                     sign_certificate)
from .profile import (ProfileSpec, profile_field, scalar_residual, scaled_w_values,
                      sigma_limit_constant, weighted_residual)
from .verify import (VERIFY_DEFAULTS, decay_in_t, positivity_and_blowup, scaled_derivative_check,
                     system_residual, verify_all)

VERSION = "0.1.0"
THREADS_ENV = "SINGULAR_THREADS"

DEFAULTS = {
    "grid": {"r_min": 1e-6, "nodes": 2048},
    "profile": {"t": 0.0},
    "kappa1": {"family": "power", "c": 0.5, "alpha": 0.5},
    "kappa2": {"family": "power", "c": 0.5, "alpha": 0.5},
    "fixed_point": {"R": None, "delta": None, "t": None, "tol": 1e-8, "max_iter": 200},
    "output": {"out_dir": "out", "emit_csv": True, "emit_json": True},
    "seed": 0,
    "verify": VERIFY_DEFAULTS,
}
KAPPA_KEYS = {"family", "c", "alpha", "table_r", "table_values"}


# ---------------------------------------------------------------- configuration

@dataclass
class RunConfig:
    N: int
    p: float
    grid: dict
    profile: dict
    kappa1: dict
    kappa2: dict
    fixed_point: dict
    output: dict
    seed: int
    verify: dict = field(default_factory=dict)

    def params(self) -> Params:
        return derive_params(self.N, self.p)

    def radial_grid(self) -> RadialGrid:
        return RadialGrid(self.grid["r_min"], self.grid["nodes"])

    def kappas(self):
        return KappaSpec(**self.kappa1), KappaSpec(**self.kappa2)

    def to_dict(self):
        return {"N": self.N, "p": self.p, "grid": dict(self.grid), "profile": dict(self.profile),
                "kappa1": copy.deepcopy(self.kappa1), "kappa2": copy.deepcopy(self.kappa2),
                "fixed_point": dict(self.fixed_point), "output": dict(self.output),
                "seed": self.seed, "verify": copy.deepcopy(self.verify)}


def _number(value, path, *, integer=False, allow_none=False):
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"must be a number, got {value!r}")
    if integer:
        if int(value) != value:
            raise ConfigError(path, f"must be an integer, got {value!r}")
        return int(value)
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(path, "must be finite")
    return value


def _block(doc, name):
    raw = doc.get(name, {})
    if not isinstance(raw, dict):
        raise ConfigError(name, "must be an object")
    unknown = sorted(set(raw) - set(DEFAULTS[name]) - (KAPPA_KEYS if name.startswith("kappa")
                                                        else set()))
    if unknown:
        raise ConfigError(f"{name}.{unknown[0]}", "unknown key")
    out = copy.deepcopy(DEFAULTS[name])
    out.update(raw)
    return out


def _positive(value, path, strict=True):
    if (value <= 0.0) if strict else (value < 0.0):
        raise ConfigError(path, "must be > 0" if strict else "must be >= 0")
    return value


def _parse_kappa(doc, name):
    blk = _block(doc, name)
    fam = blk["family"]
    if fam not in ("power", "ramp", "table"):
        raise ConfigError(f"{name}.family", "must be one of power, ramp, table")
    out = {"family": fam}
    if fam == "table":
        for key in ("table_r", "table_values"):
            vals = blk.get(key)
            if not isinstance(vals, list):
                raise ConfigError(f"{name}.{key}", "must be a list of numbers")
            out[key] = [_number(v, f"{name}.{key}[{i}]") for i, v in enumerate(vals)]
    else:
        out["c"] = _positive(_number(blk["c"], f"{name}.c"), f"{name}.c", strict=False)
        out["alpha"] = _positive(_number(blk["alpha"], f"{name}.alpha"), f"{name}.alpha")
    try:
        KappaSpec(**out)
    except DomainError as exc:
        raise ConfigError(name, str(exc)) from None
    return out


def _parse_verify(doc):
    raw = doc.get("verify", {})
    if not isinstance(raw, dict):
        raise ConfigError("verify", "must be an object")
    out = copy.deepcopy(VERIFY_DEFAULTS)
    for key, val in raw.items():
        if key not in out:
            raise ConfigError(f"verify.{key}", "unknown key")
        ref = out[key]
        path = f"verify.{key}"
        if isinstance(ref, list):
            if not isinstance(val, list) or not val:
                raise ConfigError(path, "must be a nonempty list")
            integer = isinstance(ref[0], int)
            out[key] = [_number(v, f"{path}[{i}]", integer=integer) for i, v in enumerate(val)]
        elif isinstance(ref, int):
            out[key] = _positive(_number(val, path, integer=True), path)
        else:
            out[key] = _number(val, path)
    if not 0.0 < out["decay_rho"] < 1.0:
        raise ConfigError("verify.decay_rho", "must lie in (0, 1)")
    if out["inequality_samples"] < 1000:
        raise ConfigError("verify.inequality_samples", "must be >= 1000")
    return out


def parse_config(text) -> RunConfig:
    """Validate a UTF-8 JSON document and materialize every default.

    N and p sit at the top level (a ``params`` object holding them is also
    accepted). Unknown keys are rejected; errors carry the dotted path.
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ConfigError("<document>", f"not UTF-8: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<document>", f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("<document>", "must be a JSON object")
    doc = dict(doc)
    if "params" in doc:
        inner = doc.pop("params")
        if not isinstance(inner, dict) or set(inner) - {"N", "p"}:
            raise ConfigError("params", "must be an object with keys N, p")
        for key in ("N", "p"):
            if key in inner:
                if key in doc:
                    raise ConfigError(f"params.{key}", "given twice")
                doc[key] = inner[key]
    allowed = {"N", "p", "seed"} | set(DEFAULTS)
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ConfigError(unknown[0], "unknown key")

    # p bounds that do not depend on N are checked first
    if "p" not in doc:
        raise ConfigError("params.p", "required")
    p = _number(doc["p"], "params.p")
    if p >= 2.0:
        raise ConfigError("params.p", "must be < 2")
    if p <= 1.0:
        raise ConfigError("params.p", "must be > 1")
    if "N" not in doc:
        raise ConfigError("params.N", "required")
    n = _number(doc["N"], "params.N", integer=True)
    if n < 3:
        raise ConfigError("params.N", "must be >= 3")
    if p <= n / (n - 1.0):
        raise ConfigError("params.p", f"must be > N/(N-1) = {n / (n - 1.0)!r}")
    try:
        derive_params(n, p)
    except ArtifactError as exc:
        raise ConfigError("params.p", str(exc)) from None

    grid = _block(doc, "grid")
    grid["r_min"] = _number(grid["r_min"], "grid.r_min")
    if not 0.0 < grid["r_min"] < 1.0:
        raise ConfigError("grid.r_min", "must lie in (0, 1)")
    grid["nodes"] = _number(grid["nodes"], "grid.nodes", integer=True)
    if grid["nodes"] < 16:
        raise ConfigError("grid.nodes", "must be >= 16")

    prof = _block(doc, "profile")
    prof["t"] = _positive(_number(prof["t"], "profile.t"), "profile.t", strict=False)

    fp = _block(doc, "fixed_point")
    for key in ("R", "delta", "t"):
        fp[key] = _number(fp[key], f"fixed_point.{key}", allow_none=True)
        if fp[key] is not None:
            _positive(fp[key], f"fixed_point.{key}")
    if fp["t"] is not None and fp["t"] <= 1.0:
        raise ConfigError("fixed_point.t", "must be > 1")
    if fp["R"] is not None and fp["t"] is None:
        raise ConfigError("fixed_point.R", "an explicit R needs fixed_point.t")
    fp["tol"] = _positive(_number(fp["tol"], "fixed_point.tol"), "fixed_point.tol")
    fp["max_iter"] = _positive(_number(fp["max_iter"], "fixed_point.max_iter", integer=True),
                               "fixed_point.max_iter")

    out = _block(doc, "output")
    if not isinstance(out["out_dir"], str) or not out["out_dir"]:
        raise ConfigError("output.out_dir", "must be a nonempty string")
    for key in ("emit_csv", "emit_json"):
        if not isinstance(out[key], bool):
            raise ConfigError(f"output.{key}", "must be true or false")

    seed = _number(doc.get("seed", 0), "seed", integer=True)
    if seed < 0:
        raise ConfigError("seed", "must be >= 0")
    return RunConfig(n, p, grid, prof, _parse_kappa(doc, "kappa1"), _parse_kappa(doc, "kappa2"),
                     fp, out, seed, _parse_verify(doc))


def echo_config(cfg: RunConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True)


# ---------------------------------------------------------------- output helpers

def sanitize(obj):
    """JSON-safe copy: numpy scalars/arrays to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return sanitize(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def write_json(path, payload, timestamp=True):
    """Write sorted-key JSON; floats use repr (17 significant digits, lossless)."""
    doc = sanitize(payload)
    if timestamp:
        doc["_metadata"] = {"timestamp": datetime.now(timezone.utc).isoformat(),
                            "version": VERSION}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


class Run:
    def __init__(self, cfg: RunConfig, out_dir: Path):
        self.cfg = cfg
        self.out = out_dir
        self.out.mkdir(parents=True, exist_ok=True)
        (self.out / "config.json").write_text(echo_config(cfg) + "\n")

    def csv(self, name, columns, where=None):
        if self.cfg.output["emit_csv"]:
            write_csv((where or self.out) / name, columns)

    def json(self, name, payload, where=None):
        if self.cfg.output["emit_json"]:
            write_json((where or self.out) / name, payload)


def workers():
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(THREADS_ENV, f"must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(THREADS_ENV, "must be >= 1")
    return n


# ---------------------------------------------------------------- subcommands

def cmd_params(run: Run, args):
    prm = run.cfg.params()
    sign = sign_certificate(prm)
    modes = []
    for k in range(0, args.modes + 1):
        for s in (1, -1):
            ex = mode_exponents(prm, k, s)
            modes.append({"k": k, "sign": "+" if s > 0 else "-", "lambda_k": eigenvalue(prm, k),
                          "gamma_plus": ex.gamma_plus, "gamma_minus": ex.gamma_minus})
    run.json("params.json", {
        "N": prm.n_dim, "p": prm.p, "xi": prm.xi, "beta": prm.beta, "sigma": prm.sigma,
        "C_beta": prm.c_beta, "identities": identity_residuals(prm),
        "sign_certificate": {"direct": sign.direct, "closed_form": sign.closed_form,
                             "scaled_error": sign.scaled_error, "negative": sign.negative},
        "exponents": modes})
    return True


def cmd_profile(run: Run, args):
    prm = run.cfg.params()
    grid = run.cfg.radial_grid()
    t = run.cfg.profile["t"] if args.t is None else args.t
    if t < 0.0:
        raise DomainError("t must be >= 0")
    spec = ProfileSpec(prm, t)
    w = profile_field(spec, grid)
    res = scalar_residual(spec, grid)
    lim = sigma_limit_constant(spec, r_min=grid.r_min)
    sd = scaled_derivative_check(prm, t, grid)
    wr = weighted_residual(spec, grid)
    r = grid.r
    run.csv("profile.csv", {"r": r, "w": w.values, "w_prime": w.deriv,
                            "scaled_w": scaled_w_values(spec, r),
                            "scaled_wprime": r ** (prm.sigma + 1.0) * w.deriv,
                            "residual": res.values})
    ok = wr <= 1e-8 and sd["monotone"]
    run.json("profile.json", {
        "t": t, "C_estimate": lim.estimate, "C_error": lim.error, "weighted_residual": wr,
        "checks": {"weighted_residual_below_1e-8": wr <= 1e-8, "scaled_derivative": sd,
                   "weighted_residual_fd": weighted_residual(spec, grid, "fd")}})
    return ok


def _load_rhs(spec_text, grid, prm):
    if spec_text in BUILTIN_RHS:
        return builtin_rhs(grid, prm, spec_text)
    path = Path(spec_text)
    if not path.exists():
        raise DomainError(f"--rhs must be one of {BUILTIN_RHS} or a CSV path, got {spec_text!r}")
    try:
        cols = read_csv(path)
    except ValueError as exc:
        raise DomainError(f"cannot read rhs CSV {path}: {exc}") from None
    if "r" not in cols or len(cols) < 2:
        raise DomainError("rhs CSV needs an 'r' column and a value column")
    vals = cols.get("value", cols[[k for k in cols if k != "r"][0]])
    if len(cols["r"]) != len(grid.r) or not np.allclose(cols["r"], grid.r, rtol=1e-12, atol=0):
        raise GridMismatch("rhs CSV nodes do not match the configured grid")
    return RadialField(grid, vals, label=path.name)


def cmd_solve_linear(run: Run, args):
    prm = run.cfg.params()
    grid = run.cfg.radial_grid()
    t = run.cfg.profile["t"] if args.t is None else args.t
    spec = ModeSpec(prm, args.k, args.sign, t)
    b = _load_rhs(args.rhs, grid, prm)
    sol = solve_mode(spec, b)
    res = weighted_mode_residual(sol)
    rel = relative_residual(sol)
    run.csv("mode_solution.csv", {"r": grid.r, "a": sol.a.values, "a_prime": sol.a.deriv,
                                  "residual": res})
    run.json("mode_solution.json", {
        "k": spec.k, "sign": spec.sign_label, "t": spec.t, "rhs": args.rhs,
        "norm_X": norm_X(sol.a, prm.sigma), "norm_Y_rhs": norm_Y(b, prm.sigma),
        "ratio": stability_ratio(sol), "method": sol.solve_method, "anchor": sol.anchor,
        "relative_residual": rel})
    return rel <= 1e-6


def _construct_once(run: Run, t, where):
    cfg = run.cfg
    prm = cfg.params()
    grid = cfg.radial_grid()
    k1, k2 = cfg.kappas()
    fp = cfg.fixed_point
    R = fp["R"] if t == fp["t"] else None
    pair, rep, choice = construct(prm, k1, k2, grid, t=t, R=R,
                                  delta=fp["delta"] if R is not None else None, tol=fp["tol"],
                                  max_iter=fp["max_iter"], seed=cfg.seed)
    _, _, sysrep = system_residual(prm, pair, k1, k2)
    pos = positivity_and_blowup(prm, pair)
    where.mkdir(parents=True, exist_ok=True)
    run.csv("solution.csv", {"r": grid.r, "w": pair.w.values, "phi": pair.phi.values,
                             "psi": pair.psi.values, "u": pair.u.values, "v": pair.v.values,
                             "u_prime": pair.u.deriv, "v_prime": pair.v.deriv}, where)
    report = rep.as_dict()
    report["chosen"] = {"R": pair.R_ball, "t": pair.t, "delta": rep.parameters["delta"],
                        "source": "choose_parameters" if choice is not None else "config"}
    if choice is not None:
        report["choice"] = choice.as_dict()
    report["system_residual"] = sysrep
    report["positivity"] = pos
    run.json("iteration_report.json", report, where)
    return pair, bool(rep.converged and sysrep["pass"] and pos["pass"])


def cmd_construct(run: Run, args):
    t = run.cfg.fixed_point["t"] if args.t is None else args.t
    _, ok = _construct_once(run, t, run.out)
    return ok


def cmd_sweep(run: Run, args):
    cfg = run.cfg
    t_list = sorted(args.t)
    pairs = {}
    ok = True
    for t in t_list:
        pair, good = _construct_once(run, t, run.out / f"t_{t!r}")
        pairs[t] = pair
        ok = ok and good
    k1, k2 = cfg.kappas()
    decay = decay_in_t(cfg.params(), k1, k2, cfg.verify["decay_rho"], t_list,
                       cfg.radial_grid(), runs=pairs)
    run.json("decay_report.json", decay)
    return ok and (decay["pass"] or len(t_list) < 2)


def cmd_verify_all(run: Run, args):
    cfg = run.cfg
    k1, k2 = cfg.kappas()
    fp = {k: v for k, v in cfg.fixed_point.items() if v is not None}
    verdict = verify_all(cfg.params(), cfg.radial_grid(), k1, k2, cfg.verify, fp, cfg.seed,
                         workers())
    payload = dict(verdict)
    run.json("verdict.json", payload)
    for name, res in verdict.items():
        print(f"{'PASS' if res['pass'] else 'FAIL'} {name}: metric={res['metric']!r} "
              f"tolerance={res['tolerance']!r}")
    return all(r["pass"] for r in verdict.values())


# ---------------------------------------------------------------- argument parsing

def _float_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration (default: {\"N\":3,\"p\":1.6})")
    common.add_argument("--out", help="output directory (overrides output.out_dir)")
    common.add_argument("--seed", type=int, help="random seed (overrides the config)")
    common.add_argument("--N", type=int, help="dimension (overrides the config)")
    common.add_argument("--p", type=float, help="gradient exponent (overrides the config)")

    ap = argparse.ArgumentParser(prog="singular-system",
                                 description="Singular radial solutions of a gradient-coupled "
                                             "elliptic system.")
    sub = ap.add_subparsers(dest="command", required=True)
    sp = sub.add_parser("params", parents=[common], help="derived constants and exponents")
    sp.add_argument("--modes", type=int, default=5, help="highest mode index to tabulate")
    sp = sub.add_parser("profile", parents=[common], help="the explicit profile w_t")
    sp.add_argument("--t", type=float)
    sp = sub.add_parser("solve-linear", parents=[common], help="one radial mode problem")
    sp.add_argument("--k", type=int, default=0)
    sp.add_argument("--sign", default="+", help="drift sign: + or -")
    sp.add_argument("--t", type=float)
    sp.add_argument("--rhs", default="unit", help=f"built-in ({', '.join(BUILTIN_RHS)}) or CSV")
    sp = sub.add_parser("construct", parents=[common], help="fixed-point construction")
    sp.add_argument("--t", type=float)
    sp = sub.add_parser("sweep", parents=[common], help="construction over several t")
    sp.add_argument("--t", type=_float_list, required=True, help="comma-separated t values")
    sub.add_parser("verify-all", parents=[common], help="run every certificate")
    return ap


COMMANDS = {"params": cmd_params, "profile": cmd_profile, "solve-linear": cmd_solve_linear,
            "construct": cmd_construct, "sweep": cmd_sweep, "verify-all": cmd_verify_all}


def load_config(args) -> RunConfig:
    if args.config:
        try:
            text = Path(args.config).read_bytes()
        except OSError as exc:
            raise ConfigError("--config", str(exc)) from None
        doc = parse_config(text).to_dict()
    else:
        doc = {"N": 3, "p": 1.6}
    if args.N is not None:
        doc["N"] = args.N
    if args.p is not None:
        doc["p"] = args.p
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.out is not None:
        doc.setdefault("output", {})["out_dir"] = args.out
    return parse_config(json.dumps(doc))


def _error_dir(args):
    if args.out:
        return Path(args.out)
    if args.config:
        try:
            out = json.loads(Path(args.config).read_text()).get("output", {}).get("out_dir")
            if isinstance(out, str) and out:
                return Path(out)
        except (OSError, ValueError, AttributeError):
            pass
    return Path(DEFAULTS["output"]["out_dir"])


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        run = Run(cfg, Path(cfg.output["out_dir"]))
        ok = COMMANDS[args.command](run, args)
    except (ArtifactError, OSError) as exc:
        payload = {"error": type(exc).__name__, "message": str(exc), "command": args.command}
        if isinstance(exc, ConfigError):
            payload["path"] = exc.path
        out = _error_dir(args)
        try:
            out.mkdir(parents=True, exist_ok=True)
            write_json(out / "error.json", payload)
        except OSError:
            pass
        print(f"error: {payload['error']}: {payload['message']}", file=sys.stderr)
        return 2 if isinstance(exc, ConfigError) else 1
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
