"""Acceptance criteria 1-10. Each test prints one PASS/FAIL line."""
import json
import re

import numpy as np
import pytest

from singular_system.cli import main
from singular_system.fields import rhs_family
from singular_system.fixed_point import KappaSpec, choose_parameters, picard
from singular_system.grid import norm_Y
from singular_system.verify import (check_exponents, check_identities, check_mode_oracles,
                                    check_profile, check_scaled_derivative, check_stability,
                                    decay_in_t, inequality_suite, positivity_and_blowup,
                                    system_residual)


@pytest.fixture
def report(capsys):
    def emit(number, ok, text):
        with capsys.disabled():
            print(f"\nACCEPTANCE {number}: {'PASS' if ok else 'FAIL'} {text}")
        assert ok, text
    return emit


def test_01_identities(report):
    res = check_identities(seed=0, count=50)
    report(1, res["pass"], f"50 random (N,p): worst identity/sign error {res['metric']:.2e} "
                           f"(tol 1e-10)")


def test_02_profile_oracle(report, prm, grid):
    closed, resid = check_profile(prm, grid, [0.0, 1.0, 1e2, 1e4])
    report(2, closed["pass"] and resid["pass"],
           f"closed form {closed['metric']:.2e} (tol 1e-9); weighted residual "
           f"{resid['metric']:.2e} (tol 1e-8)")


def test_03_scaled_derivative(report, prm, grid):
    res = check_scaled_derivative(prm, grid, [0.0, 1.0, 1e2, 1e4])
    mono = all(r["monotone"] for r in res["details"]["per_t"].values())
    report(3, res["pass"], f"defect {res['metric']:.2e} relative; monotone towards -C_beta: {mono}")


def test_04_mode_oracles(report, prm, grid):
    manu, bvp = check_mode_oracles(prm, grid, [0.0, 10.0, 1e3], [1, 2, 5], 5, seed=0)
    report(4, manu["pass"] and bvp["pass"],
           f"manufactured {manu['metric']:.2e} (tol 1e-6); bvp vs t0 {bvp['metric']:.2e} "
           f"(tol 1e-5)")


def test_05_stability(report, prm, grid):
    res = check_stability(prm, grid, [0.0, 1.0, 10.0, 1e2, 1e3, 1e4], 5, workers=1)
    spreads = {k: round(v["spread"], 3) for k, v in res["details"]["solvers"].items()}
    assert all(abs(norm_Y(f, prm.sigma) - 1.0) < 1e-15 for f in rhs_family(grid, prm, 5))
    report(5, res["pass"], f"max/min of the family-sup ratio per solver {spreads} (tol < 10)")


def test_06_kernel_exponents(report):
    res = check_exponents(seed=0, count=20, max_mode=50)
    report(6, res["pass"], f"k=1..50, 20 random (N,p): straddle {res['details']['straddles']}, "
                           f"root residual {res['metric']:.2e} (tol 1e-10)")


def test_07_construction(report, prm, grid):
    k = KappaSpec("power", 0.5, 0.5)
    choice = choose_parameters(prm, k, k, grid)
    pair, rep = picard(prm, choice.t, k, k, choice.R, tol=1e-8, max_iter=200, grid=grid)
    _, _, sysrep = system_residual(prm, pair, k, k)
    pos = positivity_and_blowup(prm, pair)
    n_iter = len(rep.iterations)
    step = rep.iterations[-1]["step_norm"]
    res = max(sysrep["relative_u"], sysrep["relative_v"])
    ok = (rep.converged and n_iter <= 50 and rep.empirical_contraction <= 0.9 and step <= 1e-8
          and res <= 1e-4 and bool(np.all(pair.u.values[:-1] > 0))
          and bool(np.all(pair.v.values[:-1] > 0)) and pos["pass"])
    report(7, ok, f"(R, delta, t)=({choice.R:g}, {choice.delta:g}, {choice.t:g}); "
                  f"{n_iter} iterations, contraction {rep.empirical_contraction:.3f}, "
                  f"step {step:.1e}, residual {res:.2e}, r^sigma u in {pos['scaled_u_range']} "
                  f"within bracket {pos['bracket']}")


def test_08_decay(report, prm, grid):
    k = KappaSpec("power", 0.5, 0.5)
    rep = decay_in_t(prm, k, k, 0.1, [1e2, 1e3, 1e4], grid)
    sups = [f"{r['sup_u']:.3e}<={r['bound']:.3e}" for r in rep["rows"]]
    report(8, rep["pass"], f"sup_(r>=0.1) u over t=1e2,1e3,1e4: {sups}")


@pytest.mark.parametrize("p", [1.1, 1.5, 2.0])
def test_09_inequalities(report, p):
    rep = inequality_suite(p, (1, 2, 3, 5), 100_000, seed=0)
    change = max(max(r["relative_change"]) for r in rep["rows"])
    zero = max(r["zero_case_max"] for r in rep["rows"])
    extra = ""
    if p == 2.0:
        extra = f", p=2 identity error {max(r['p2_identity_error'] for r in rep['rows']):.1e}"
    report(9, rep["pass"], f"p={p}: max sup change on doubling {change:.3%}, zero cases {zero}"
                           f"{extra}")


_STAMP = re.compile(r'\n\s*"_metadata": \{[^}]*\},?')


def _strip(path):
    return _STAMP.sub("", path.read_text())


def test_10_determinism(report, tmp_path):
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps({"N": 3, "p": 1.6, "seed": 7}))
    out = tmp_path / "run"
    names = ("verdict.json", "config.json")
    codes, snapshots = [], []
    for _ in range(2):
        codes.append(main(["verify-all", "--config", str(cfg), "--out", str(out)]))
        snapshots.append([_strip(out / n) for n in names])
    same = snapshots[0] == snapshots[1]
    # the stamp is the only thing removed
    doc = json.loads((out / "verdict.json").read_text())
    assert "timestamp" in doc["_metadata"] and "_metadata" not in snapshots[0][0]
    report(10, same and codes == [0, 0],
           f"two verify-all runs: exit codes {codes}, result files identical: {same}")
