"""Acceptance criteria, one test each; every test prints a PASS/FAIL line via ``report_criterion``."""

import json
import time

import numpy as np
import pytest

from conftest import report_criterion
from lcrlab.cli import main
from lcrlab.convexity import estimate_lcr, verify_convexity
from lcrlab.maps import derivative_lipschitz, derivative_sup, lip1_estimate, lip2_estimate, linear_map, quadratic_map, shear_map
from lcrlab.openness import lipo_membership_probe, lipo_via_inverse
from lcrlab.oracles import grid_convexity_oracle_2d
from lcrlab.scenario import dumps, proposition_checks, run_scenario, run_suite
from lcrlab.spaces import Ball, conv2_estimate, delta_estimate, delta_hilbert_exact, euclidean, l1, linf, lp

pytestmark = pytest.mark.acceptance


@pytest.fixture(scope="module")
def paper_suite():
    t0 = time.perf_counter()
    rep = run_suite("paper-verification")
    return rep, time.perf_counter() - t0


def test_criterion_01_conv2_euclidean():
    ok, parts = True, []
    for dim in (2, 3):
        t0 = time.perf_counter()
        est = conv2_estimate(euclidean(dim), 100_000, 0, refine=True)
        dt = time.perf_counter() - t0
        good = abs(est.value - 0.125) <= 0.007 and est.value <= 0.125 + 1e-6 and dt <= 30
        ok &= good
        parts.append(f"l2^{dim} conv2={est.value:.8f} ({dt:.1f}s)")
    report_criterion(1, "conv2 of Euclidean space", ok, ", ".join(parts))
    assert ok


def test_criterion_02_delta_closed_form():
    grid = [0.25, 0.5, 1.0, 1.5, 2.0]
    t0 = time.perf_counter()
    curve = delta_estimate(euclidean(2), grid, 20_000, 0)
    errs = [abs(v - delta_hilbert_exact(t)) if v is not None else np.inf for t, v in zip(grid, curve.values)]
    flat = delta_estimate(linf(2), [1.0], 20_000, 0).values[0]
    dt = time.perf_counter() - t0
    ok = max(errs) <= 0.01 and flat is not None and flat <= 0.005 and dt <= 30
    report_criterion(2, "delta closed form", ok, f"max |err|={max(errs):.2e}, linf delta(1)={flat}, {dt:.1f}s")
    assert ok


def test_criterion_03_lip2_exactness():
    ok, parts = True, []
    for k in (0.5, 1.0, 2.0, 4.0):
        t0 = time.perf_counter()
        v = lip2_estimate(shear_map(k)).lip_constant
        dt = time.perf_counter() - t0
        ok &= 0.99 * k <= v <= k and dt <= 10
        parts.append(f"k={k:g}: {v:.6f} ({dt:.1f}s)")
    for A in ([[2.0, 1.0], [0.0, 0.5]], 2 * np.eye(2)):
        t0 = time.perf_counter()
        v = lip2_estimate(linear_map(A)).lip_constant
        dt = time.perf_counter() - t0
        ok &= v == 0.0 and dt <= 10
        parts.append(f"linear: {v:g}")
    report_criterion(3, "Lip2 exactness", ok, ", ".join(parts))
    assert ok


def test_criterion_04_proposition_inequalities(maps):
    bad = []
    for name, m in maps.items():
        _, fails = proposition_checks(m, 2000, 0)
        bad += [f"{name}: {f}" for f in fails]
    ok = not bad
    report_criterion(4, "proposition inequalities", ok, f"{len(maps)} registry maps" if ok else "; ".join(bad))
    assert ok


def test_criterion_05_lipo_cross_validation():
    t0 = time.perf_counter()
    m = shear_map(1.0)
    inv = lipo_via_inverse(m).value
    probe = lipo_membership_probe(m).value
    two = linear_map(2 * np.eye(2))
    inv2, probe2 = lipo_via_inverse(two).value, lipo_membership_probe(two).value
    dt = time.perf_counter() - t0
    ok = abs(probe - inv) <= 0.05 * inv and abs(inv2 - 2) <= 1e-6 and abs(probe2 - 2) <= 1e-6 and dt <= 60
    report_criterion(
        5, "Lip_o cross-validation", ok,
        f"shear inverse={inv:.4f} probe={probe:.4f}; 2x inverse={inv2:.8f} probe={probe2:.8f}; {dt:.1f}s",
    )
    assert ok


@pytest.mark.parametrize("k", [1.0, 2.0, 4.0])
def test_criterion_06_lcr_tightness(k):
    t0 = time.perf_counter()
    m = shear_map(k)
    est = estimate_lcr(m)
    exact = min(1 / k, 1.0)
    lo, hi = est.bracket
    grid_lo = grid_convexity_oracle_2d(m, Ball(m.domain_space, [0.0, 0.0], lo), 256).verdict
    checks = {"closed form": abs(est.value - exact) <= 0.05 * exact, "width": est.width <= 0.02,
              "oracle convex at lower end": grid_lo == "convex"}
    if not est.domain_limited:
        grid_far = grid_convexity_oracle_2d(m, Ball(m.domain_space, [0.0, 0.0], 1.0), 256).verdict
        tight = verify_convexity(m, Ball(m.domain_space, [0.0, 0.0], hi))
        checks["oracle non_convex at eps=1"] = grid_far == "non_convex"
        checks["certified witness at upper end"] = (
            tight.verdict == "non_convex" and tight.witness.get("certificate") == "boundary_winding"
        )
    dt = time.perf_counter() - t0
    checks["runtime"] = dt <= 120
    ok = all(checks.values())
    failed = [c for c, v in checks.items() if not v]
    report_criterion(
        6, f"lcr tightness k={k:g}", ok,
        f"lcr={est.value:.4f} bracket=({lo:.4f}, {hi:.4f}) exact={exact:g} {dt:.1f}s" + (f" failed: {failed}" if failed else ""),
    )
    assert ok


def test_criterion_07_theorem_bound(paper_suite):
    rep, dt = paper_suite
    parts, ok = [], rep.exit_code == 0
    for sc in rep.results["scenarios"]:
        b = sc["results"]["bound"]
        ok &= sc["exit_code"] == 0 and b["bound_holds"] and sc["results"].get("hilbert_bound_holds", False)
        bound = b["bound"] if isinstance(b["bound"], str) else f"{b['bound']:.3f}"
        lcr = b["lcr_measured"]
        cmp = "domain-limited" if lcr["domain_limited"] else f"<={lcr['bracket'][0]:.3f}"
        parts.append(f"{sc['scenario']['name']} {bound} {cmp}")
    ok &= rep.results["exit_codes"] == [0] * len(rep.results["scenarios"])
    report_criterion(7, "theorem bound on the verification suite", ok, ", ".join(parts) + f" ({dt:.0f}s)")
    assert ok


def test_criterion_08_degeneracy():
    rep = run_suite("degeneracy-demo")
    balls = rep.results["balls"]
    certified = [
        b["verdict"] == "non_convex" and bool(b["witness"]) and bool(b["witness"].get("certificate"))
        and b["linf_witness_rejected_by_newton"]
        for b in balls
    ]
    eps = [b["eps"] for b in balls]
    ok = all(certified) and eps == [0.05, 0.1, 0.2, 0.4, 0.8] and rep.results["bound"] == 0.0 and rep.exit_code == 0
    report_criterion(8, "max-norm degeneracy", ok,
                     f"non_convex certified at {sum(certified)}/5 radii, bound={rep.results['bound']}")
    assert ok


def test_criterion_09_claim1_trace(paper_suite):
    rep, _ = paper_suite
    ok, worst, gaps = True, np.inf, []
    for sc in rep.results["scenarios"]:
        cl = sc["results"]["claim1"]
        ok &= cl["pairs"] >= 100 and cl["all_inequalities_hold"]
        worst = min(worst, min(v for k, v in cl["min_margins"].items() if k != "conclusion"))
        if "collinear_iv_max_abs_margin" in cl:
            gaps.append(cl["collinear_iv_max_abs_margin"])
            ok &= cl["collinear_iv_max_abs_margin"] <= 1e-9
    ok &= len(gaps) == 4  # one collinear check per shear scenario
    report_criterion(9, "Claim 1 trace", ok, f"min margin {worst:.2e}, max collinear |iv| {max(gaps):.1e}")
    assert ok


def _monotone_trial(rng: np.random.Generator) -> list[str]:
    seed = int(rng.integers(0, 2**31))
    n = int(rng.integers(50, 400))
    space = [euclidean(2), euclidean(3), lp(2, float(rng.uniform(1.2, 4.0))), l1(2), linf(2)][rng.integers(5)]
    Q = rng.uniform(-1, 1, (2, 2, 2))
    m = quadratic_map(0.5 * (Q + Q.transpose(0, 2, 1)))
    bad = []

    def check(name, small, large, kind):
        if (kind == "min" and large > small) or (kind == "max" and large < small):
            bad.append(f"{name} seed={seed} n={n}: {small} -> {large}")

    check("conv2", conv2_estimate(space, n, seed).value, conv2_estimate(space, 2 * n, seed).value, "min")
    d1, d2 = delta_estimate(space, [0.5, 1.0, 1.5], n, seed), delta_estimate(space, [0.5, 1.0, 1.5], 2 * n, seed)
    for a, b in zip(d1.values, d2.values):
        if a is not None and b is not None:
            check("delta", a, b, "min")
    check("lip1", lip1_estimate(m, n, seed).lip_constant, lip1_estimate(m, 2 * n, seed).lip_constant, "max")
    check("lip2", lip2_estimate(m, n, seed).lip_constant, lip2_estimate(m, 2 * n, seed).lip_constant, "max")
    check("sup f'", derivative_sup(m, n, seed).value, derivative_sup(m, 2 * n, seed).value, "max")
    check("Lip(f')", derivative_lipschitz(m, n, seed).value, derivative_lipschitz(m, 2 * n, seed).value, "max")
    c = int(rng.integers(2, 6))
    small = lipo_membership_probe(m, centers=c, radii_per_center=2, directions=8, seed=seed).value
    large = lipo_membership_probe(m, centers=2 * c, radii_per_center=2, directions=8, seed=seed).value
    check("Lip_o probe", small, large, "min")
    return bad


def test_criterion_10_determinism_and_contracts(tmp_path):
    scenario = {"space": {"kind": "euclidean", "dim": 2},
                "map": {"family": "parabolic_shear", "params": {"k": 2.0}}, "task": "lip2", "seed": 11}
    a = dumps(run_scenario(scenario).to_dict())
    b = dumps(run_scenario(json.loads(json.dumps(scenario))).to_dict())
    identical = a == b

    def code(obj):
        p = tmp_path / "s.json"
        p.write_text(json.dumps(obj))
        return main(["run", str(p)])

    codes = (
        code({"space": {"kind": "euclidean", "dim": 2}, "task": "conv2", "params": {"samples": 2000}}),
        code({"space": {"kind": "euclidean", "dim": 2}, "task": "delta", "params": {"tolerance": 1e-12, "samples": 500}}),
        code({"space": {"kind": "euclidean", "dim": 2}, "task": "conv2", "seed": -3}),
    )
    rng = np.random.default_rng(20)
    bad = [msg for _ in range(20) for msg in _monotone_trial(rng)]
    ok = identical and codes == (0, 1, 2) and not bad
    report_criterion(10, "determinism and contracts", ok,
                     f"byte-identical={identical}, exit codes={codes}, monotonicity violations={len(bad)} in 20 trials"
                     + (f": {bad[:3]}" if bad else ""))
    assert ok
