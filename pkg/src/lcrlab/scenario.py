"""Declarative scenarios: validation, task dispatch, deterministic reports, suites.

A scenario is a JSON object::

    {"name": "...", "space": {...}, "map": {...}, "task": "lcr",
     "params": {...}, "seed": 0}

``codomain`` is optional (defaults to the domain space). Reports carry the
package version and the scenario echo; wall time is included only on request
so that identical scenarios produce byte-identical reports.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from . import __version__
from .convexity import (
    check_theorem,
    claim1_batch,
    claim1_pairs,
    estimate_lcr,
    theorem_bound,
    verify_convexity,
)
from .errors import DescriptorError, LabError
from .maps import (
    FAMILIES,
    MapSpec,
    ParabolicShear,
    default_t_grid,
    derivative_check,
    lip1_estimate,
    lip2_estimate,
    omega_estimate,
)
from .openness import (
    derivative_surjectivity_diagnostic,
    lipo_membership_probe,
    lipo_via_inverse,
    newton_batch,
)
from .oracles import grid_convexity_oracle_2d, shear_lcr_exact, shear_linf_witness
from .spaces import (
    KINDS,
    Ball,
    NormedSpace,
    conv2_estimate,
    delta_estimate,
    delta_hilbert_exact,
    has_power_type_2,
)

TASKS = ("delta", "conv2", "omega", "lip1", "lip2", "dcheck", "lipo", "verify", "lcr", "bound", "claim1", "suite")
SUITES = ("paper-verification", "degeneracy-demo")
NEEDS_MAP = {"omega", "lip1", "lip2", "dcheck", "lipo", "verify", "lcr", "bound", "claim1"}
SCENARIO_FIELDS = {"name", "space", "codomain", "map", "task", "params", "seed"}

EXIT_OK = 0
EXIT_CHECK = 1
EXIT_INPUT = 2


@dataclass
class Scenario:
    task: str
    space: NormedSpace | None
    map: MapSpec | None
    params: dict[str, Any]
    seed: int
    raw: dict[str, Any]
    name: str = ""


@dataclass
class ScenarioReport:
    scenario: dict[str, Any]
    results: dict[str, Any]
    failures: list[str] = field(default_factory=list)
    rows: list[dict[str, Any]] = field(default_factory=list)
    wall_time: float | None = None

    @property
    def exit_code(self) -> int:
        return EXIT_CHECK if self.failures else EXIT_OK

    def to_dict(self) -> dict[str, Any]:
        out = {
            "version": __version__,
            "scenario": self.scenario,
            "results": self.results,
            "failures": self.failures,
            "exit_code": self.exit_code,
        }
        if self.wall_time is not None:
            out["wall_time_s"] = self.wall_time
        return out


# ---------------------------------------------------------------------------
# serialization


def clean(obj: Any) -> Any:
    """JSON-safe copy: numpy scalars/arrays to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def dumps(report: dict[str, Any]) -> str:
    return json.dumps(clean(report), indent=2, sort_keys=True) + "\n"


def rows_to_csv(rows: list[dict[str, Any]]) -> str:
    if not rows:
        return ""
    keys: list[str] = []
    for r in rows:
        for k in r:
            if k not in keys:
                keys.append(k)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: json.dumps(clean(v)) if isinstance(v, (list, dict)) else clean(v) for k, v in r.items()})
    return buf.getvalue()


# ---------------------------------------------------------------------------
# parsing


def _int(params: dict[str, Any], key: str, default: int, minimum: int = 1) -> int:
    v = params.get(key, default)
    if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
        raise DescriptorError(f"params.{key}", f"must be an integer >= {minimum}, got {v!r}")
    return v


def _num(params: dict[str, Any], key: str, default: float | None, positive: bool = True) -> float | None:
    v = params.get(key, default)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) or (positive and v <= 0):
        raise DescriptorError(f"params.{key}", f"must be a {'positive ' if positive else ''}number, got {v!r}")
    return float(v)


def _vector(params: dict[str, Any], key: str, dim: int, default) -> np.ndarray:
    v = params.get(key, default)
    if not isinstance(v, list) or len(v) != dim or not all(
        isinstance(a, (int, float)) and not isinstance(a, bool) for a in v
    ):
        raise DescriptorError(f"params.{key}", f"must be a list of {dim} numbers")
    return np.asarray(v, dtype=float)


def _grid(params: dict[str, Any], key: str, default) -> list[float]:
    v = params.get(key, default)
    if not isinstance(v, list) or not v or not all(
        isinstance(a, (int, float)) and not isinstance(a, bool) and a > 0 for a in v
    ):
        raise DescriptorError(f"params.{key}", "must be a nonempty list of positive numbers")
    return [float(a) for a in v]


def parse_scenario(d: Any, seed: int | None = None, samples: int | None = None) -> Scenario:
    """Validate a scenario object against the registries (no computation)."""
    if not isinstance(d, dict):
        raise DescriptorError("scenario", "must be a JSON object")
    unknown = set(d) - SCENARIO_FIELDS
    if unknown:
        raise DescriptorError(sorted(unknown)[0], "unknown field")
    task = d.get("task")
    if task not in TASKS:
        raise DescriptorError("task", f"must be one of {list(TASKS)}, got {task!r}")
    params = d.get("params", {})
    if not isinstance(params, dict):
        raise DescriptorError("params", "must be a JSON object")
    params = dict(params)
    if samples is not None:
        params["samples"] = samples
    s = d.get("seed", 0) if seed is None else seed
    if isinstance(s, bool) or not isinstance(s, int) or s < 0:
        raise DescriptorError("seed", f"must be a nonnegative integer, got {s!r}")
    raw = dict(d)
    raw["params"] = params
    raw["seed"] = s
    name = d.get("name", "")
    if not isinstance(name, str):
        raise DescriptorError("name", "must be a string")

    if task == "suite":
        sname = params.get("name")
        if sname not in SUITES:
            raise DescriptorError("params.name", f"unknown suite {sname!r}; expected one of {list(SUITES)}")
        return Scenario(task, None, None, params, s, raw, name)

    if "space" not in d:
        raise DescriptorError("space", "missing")
    space = NormedSpace.from_dict(d["space"], "space")
    codomain = NormedSpace.from_dict(d["codomain"], "codomain") if "codomain" in d else None
    m = None
    if task in NEEDS_MAP:
        if "map" not in d:
            raise DescriptorError("map", f"task {task!r} needs a map")
        m = MapSpec.from_dict(d["map"], space, codomain, "map")
    elif "map" in d:
        m = MapSpec.from_dict(d["map"], space, codomain, "map")
    return Scenario(task, space, m, params, s, raw, name)


def load_scenario(path: str, seed: int | None = None, samples: int | None = None) -> Scenario:
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except OSError as exc:
        raise DescriptorError("path", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise DescriptorError("json", f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_scenario(d, seed, samples)


# ---------------------------------------------------------------------------
# tasks


def _shear_k(m: MapSpec) -> float | None:
    return float(m.family.k) if isinstance(m.family, ParabolicShear) else None


def _ball(sc: Scenario) -> Ball:
    m = sc.map
    b = sc.params.get("ball", {})
    if not isinstance(b, dict):
        raise DescriptorError("params.ball", "must be a JSON object")
    c = _vector(b, "center", m.domain.dim, list(m.domain.center))
    r = b.get("radius", m.domain.radius)
    if isinstance(r, bool) or not isinstance(r, (int, float)) or not r > 0:
        raise DescriptorError("params.ball.radius", f"must be a positive number, got {r!r}")
    ball = Ball(m.domain_space, c, float(r))
    if not m.domain.contains_ball(ball, tol=1e-12 * m.domain.radius):
        raise DescriptorError("params.ball", "ball exits the map domain")
    return ball


def task_delta(sc: Scenario) -> ScenarioReport:
    grid = _grid(sc.params, "t_grid", [0.25, 0.5, 1.0, 1.5, 2.0])
    if any(t > 2 for t in grid):
        raise DescriptorError("params.t_grid", "values must lie in (0, 2]")
    n = _int(sc.params, "samples", 20000)
    tol = _num(sc.params, "tolerance", 0.01)
    curve = delta_estimate(sc.space, grid, n, sc.seed)
    res: dict[str, Any] = {"curve": curve.to_dict()}
    fails = []
    rows = []
    for t, v in zip(curve.t_grid, curve.values):
        row = {"t": t, "delta": v}
        if sc.space.is_euclidean:
            ex = delta_hilbert_exact(t)
            row["exact"] = ex
            if v is None or abs(v - ex) > tol:
                fails.append(f"delta({t}) = {v} differs from the closed form {ex:.6g} by more than {tol}")
        rows.append(row)
    if sc.space.is_euclidean:
        res["oracle"] = "1 - sqrt(1 - (t/2)^2)"
    return ScenarioReport(sc.raw, res, fails, rows)


def task_conv2(sc: Scenario) -> ScenarioReport:
    n = _int(sc.params, "samples", 100000, 2)
    refine = bool(sc.params.get("refine", True))
    thr = _num(sc.params, "threshold", 1e-3)
    est = conv2_estimate(sc.space, n, sc.seed, refine)
    res: dict[str, Any] = {"conv2": est.to_dict(), "power_type_2": has_power_type_2(est, thr).to_dict()}
    fails = []
    if est.value > 0.125 + 1e-6:
        fails.append(f"conv2 estimate {est.value} exceeds the universal ceiling 1/8")
    if sc.space.is_euclidean:
        res["oracle"] = 0.125
        if abs(est.value - 0.125) > 0.007:
            fails.append(f"conv2 estimate {est.value} differs from 1/8 by more than 0.007")
    return ScenarioReport(sc.raw, res, fails, [{"conv2": est.value, "exact": res.get("oracle")}])


def task_omega(sc: Scenario) -> ScenarioReport:
    m = sc.map
    order = sc.params.get("order", 2)
    if order not in (1, 2):
        raise DescriptorError("params.order", "must be 1 or 2")
    grid = _grid(sc.params, "t_grid", default_t_grid(m)) if "t_grid" in sc.params else None
    n = _int(sc.params, "samples", 2000)
    est = omega_estimate(m, order, grid, n, sc.seed)
    rows = [{"t": t, "omega": w} for t, w in zip(est.t_grid, est.omega_values)]
    return ScenarioReport(sc.raw, {"omega": est.to_dict()}, [], rows)


def _shear_lip2_check(m: MapSpec, value: float) -> list[str]:
    k = _shear_k(m)
    if k is None or not m.domain_space.is_euclidean or not m.codomain_space.is_euclidean:
        return []
    if not (0.99 * k - 1e-12 <= value <= k * (1 + 1e-12)):
        return [f"Lip_2 estimate {value} outside [0.99 k, k] for k = {k}"]
    return []


def task_lip(sc: Scenario) -> ScenarioReport:
    m = sc.map
    n = _int(sc.params, "samples", 2000)
    est = lip1_estimate(m, n, sc.seed) if sc.task == "lip1" else lip2_estimate(m, n, sc.seed)
    res: dict[str, Any] = {sc.task: est.to_dict()}
    fails = []
    if sc.task == "lip2":
        k = _shear_k(m)
        if k is not None:
            res["oracle"] = k
        fails = _shear_lip2_check(m, est.lip_constant)
    return ScenarioReport(sc.raw, res, fails, [{sc.task: est.lip_constant}])


def proposition_checks(m: MapSpec, samples: int, seed: int) -> tuple[dict[str, Any], list[str]]:
    l1 = lip1_estimate(m, samples, seed)
    l2 = lip2_estimate(m, samples, seed)
    dc = derivative_check(m, samples, seed)
    sup = dc.operator_norm_sup.value
    ld = dc.lip1_of_derivative.value
    checks = {
        "lip1_le_derivative_sup": {"lhs": l1.lip_constant, "rhs": sup, "holds": l1.lip_constant <= sup + 1e-6},
        "lip2_le_lip1_of_derivative": {"lhs": l2.lip_constant, "rhs": ld, "holds": l2.lip_constant <= ld + 1e-6},
        "frechet_le_half_lip1_of_derivative": {
            "lhs": dc.frechet_residual_max,
            "rhs": 0.5 * ld,
            "holds": dc.frechet_residual_max <= 0.5 * ld + 1e-6,
        },
    }
    fails = [f"{k} violated: {v['lhs']} > {v['rhs']}" for k, v in checks.items() if not v["holds"]]
    res = {"lip1": l1.lip_constant, "lip2": l2.lip_constant, "derivative_check": dc.to_dict(), "checks": checks}
    return res, fails


def task_dcheck(sc: Scenario) -> ScenarioReport:
    res, fails = proposition_checks(sc.map, _int(sc.params, "samples", 2000), sc.seed)
    rows = [{"check": k, **v} for k, v in res["checks"].items()]
    return ScenarioReport(sc.raw, res, fails, rows)


def task_lipo(sc: Scenario) -> ScenarioReport:
    m = sc.map
    p = sc.params
    probe = lipo_membership_probe(
        m,
        centers=_int(p, "centers", 24),
        radii_per_center=_int(p, "radii_per_center", 3),
        directions=_int(p, "directions", 32),
        seed=sc.seed,
        keep_certificates=False,
    )
    res: dict[str, Any] = {"membership_probe": probe.to_dict()}
    fails = []
    rows = [{"method": "membership_probe", "value": probe.value}]
    if m.has_inverse:
        inv = lipo_via_inverse(m, _int(p, "samples", 4000), sc.seed)
        res["inverse_lipschitz"] = inv.to_dict()
        rows.append({"method": "inverse_lipschitz", "value": inv.value})
        tol = _num(p, "agreement", 0.05)
        if abs(inv.value - probe.value) > tol * inv.value:
            fails.append(f"Lip_o routes disagree: inverse {inv.value} vs probe {probe.value}")
    res["surjectivity"] = derivative_surjectivity_diagnostic(m, 2000, sc.seed).to_dict()
    return ScenarioReport(sc.raw, res, fails, rows)


def task_verify(sc: Scenario) -> ScenarioReport:
    m = sc.map
    ball = _ball(sc)
    pairs = _int(sc.params, "pairs", _int(sc.params, "samples", 512))
    margin = _num(sc.params, "margin", None)
    v = verify_convexity(m, ball, pairs, sc.seed, margin)
    res: dict[str, Any] = {"verdict": v.to_dict()}
    fails = []
    if ball.dim == 2 and m.codomain_space.dim == 2 and sc.params.get("oracle", True):
        g = grid_convexity_oracle_2d(m, ball, _int(sc.params, "resolution", 256, 64))
        res["grid_oracle"] = g.to_dict()
        if g.verdict == "non_convex" and v.verdict == "convex":
            fails.append("verifier says convex where the grid oracle finds an uncovered hull region")
    return ScenarioReport(sc.raw, res, fails, [{"eps": ball.radius, "verdict": v.verdict}])


def _lcr(sc: Scenario):
    m = sc.map
    p = sc.params
    center = _vector(p, "center", m.domain.dim, list(m.domain.center))
    eps_max = _num(p, "eps_max", None)
    mode = p.get("mode", "at_point")
    if mode not in ("at_point", "uniform"):
        raise DescriptorError("params.mode", "must be 'at_point' or 'uniform'")
    room = m.domain.radius - float(m.domain.distance_from_center(center))
    if room <= 0:
        raise DescriptorError("params.center", "must lie inside the domain")
    if eps_max is not None and eps_max > room * (1 + 1e-12):
        raise DescriptorError("params.eps_max", f"ball of radius {eps_max} exits the domain (room {room})")
    return estimate_lcr(
        m, center, eps_max, _int(p, "bisection_steps", 12, 0), _int(p, "pairs", 512), sc.seed, mode
    )


def task_lcr(sc: Scenario) -> ScenarioReport:
    m = sc.map
    est = _lcr(sc)
    res: dict[str, Any] = {"lcr": est.to_dict()}
    fails = []
    k = _shear_k(m)
    if k and k > 0 and m.domain_space.is_euclidean and m.domain_space.dim == 2:
        exact = min(shear_lcr_exact(k), est.eps_max)
        res["oracle"] = exact
        if abs(est.value - exact) > 0.05 * exact:
            fails.append(f"lcr {est.value} differs from the closed form {exact} by more than 5%")
    rows = [{"eps": s["eps"], "verdict": s["verdict"]} for s in est.steps]
    return ScenarioReport(sc.raw, res, fails, rows)


def _constants(sc: Scenario) -> dict[str, Any]:
    m = sc.map
    p = sc.params
    conv2 = conv2_estimate(sc.space, _int(p, "conv2_samples", 100000, 2), sc.seed, True)
    lip2 = lip2_estimate(m, _int(p, "samples", 2000), sc.seed)
    if m.has_inverse:
        lipo = lipo_via_inverse(m, 4000, sc.seed)
    else:
        lipo = lipo_membership_probe(m, seed=sc.seed, keep_certificates=False)
    return {"conv2": conv2, "lip2": lip2, "lipo": lipo}


def _claim1(sc: Scenario, lipo: float, lip2: float, conv2: float, bound) -> tuple[dict[str, Any], list[str]]:
    m = sc.map
    count = _int(sc.params, "claim1_pairs", 100)
    R = m.domain.radius
    eps = R if bound == "unbounded" or bound <= 0 else min(float(bound), R)
    ball = Ball(m.domain_space, m.domain.center, eps)
    X, Y = claim1_pairs(ball, count, sc.seed)
    traces = claim1_batch(m, ball, X, Y, lipo, lip2, conv2)
    fails = []
    out: dict[str, Any] = {"ball": ball.to_dict(), "pairs": count}
    k = _shear_k(m)
    if k is not None:
        # pairs on the e_1 axis through the center, where (iv) is an equality
        s = np.linspace(-1.0, 1.0, 21) * eps * (1 - 1e-9)
        A = np.zeros((20, ball.dim)) + ball.c
        B = np.zeros((20, ball.dim)) + ball.c
        A[:, 0] += s[:-1]
        B[:, 0] += s[::-1][:-1]
        col = claim1_batch(m, ball, A, B, lipo, lip2, conv2)
        gap = max(abs(t.margins["iv"]) for t in col)
        out["collinear_iv_max_abs_margin"] = gap
        out["collinear_all_hold"] = all(t.all_inequalities_hold for t in col)
        if gap > 1e-9:
            fails.append(f"collinear shear pairs: inequality (iv) not tight, |margin| = {gap}")
        traces = traces + col
    keys = ("i", "ii", "iii", "iv", "conclusion")
    out["min_margins"] = {k2: min(t.margins[k2] for t in traces) for k2 in keys}
    out["all_inequalities_hold"] = all(t.all_inequalities_hold for t in traces)
    out["conclusion_holds"] = all(t.conclusion_holds for t in traces)
    out["eta_equals_lipo_delta"] = all(t.eta == lipo * t.delta for t in traces)
    out["worst"] = min(traces, key=lambda t: min(t.margins[q] for q in keys[:4])).to_dict()
    if not out["all_inequalities_hold"]:
        fails.append("a Claim 1 inequality failed: " + json.dumps(clean(out["min_margins"])))
    return out, fails


def task_bound(sc: Scenario) -> ScenarioReport:
    m = sc.map
    c = _constants(sc)
    lcr = _lcr(sc)
    rep = check_theorem(m, sc.space, lcr, c["conv2"], c["lipo"], c["lip2"], _num(sc.params, "slack", 0.1))
    res: dict[str, Any] = {
        "bound": rep.to_dict(),
        "lipo": c["lipo"].to_dict(),
        "lip2": c["lip2"].to_dict(),
        "conv2": c["conv2"].to_dict(),
    }
    fails = []
    if not rep.bound_holds:
        fails.append(f"bound {rep.bound} not respected by the measured lcr bracket {list(lcr.bracket)}")
    if rep.bound_hilbert is not None:
        hb = rep.bound_hilbert
        h_holds = lcr.domain_limited or (hb != "unbounded" and lcr.bracket[0] >= hb * (1 - rep.slack))
        res["hilbert_bound_holds"] = bool(h_holds)
        if not h_holds:
            fails.append(f"Hilbert bound {hb} not respected")
    if sc.params.get("claim1_pairs", 0):
        cl, cf = _claim1(sc, rep.lipo, rep.lip2, rep.conv2, rep.bound)
        res["claim1"] = cl
        fails += cf
    row = {
        "map": m.name,
        "params": m.family.params(),
        "conv2": rep.conv2,
        "lipo": rep.lipo,
        "lip2": rep.lip2,
        "bound": rep.bound,
        "lcr_lower": lcr.bracket[0],
        "lcr_upper": lcr.bracket[1],
        "domain_limited": lcr.domain_limited,
        "holds": rep.bound_holds,
    }
    return ScenarioReport(sc.raw, res, fails, [row])


def task_claim1(sc: Scenario) -> ScenarioReport:
    c = _constants(sc)
    conv2 = 0.125 if sc.space.is_euclidean else c["conv2"].value
    lipo = c["lipo"].value
    lip2 = c["lip2"].lip_constant
    bound = theorem_bound(conv2, lipo, lip2)
    params = dict(sc.params)
    params.setdefault("claim1_pairs", 100)
    cl, fails = _claim1(Scenario(sc.task, sc.space, sc.map, params, sc.seed, sc.raw), lipo, lip2, conv2, bound)
    res = {"conv2": conv2, "lipo": lipo, "lip2": lip2, "bound": bound, "claim1": cl}
    return ScenarioReport(sc.raw, res, fails, [{"bound": bound, **cl["min_margins"]}])


# ---------------------------------------------------------------------------
# suites


def _euclid(dim: int = 2) -> dict[str, Any]:
    return {"kind": "euclidean", "dim": dim}


def paper_verification_scenarios(seed: int = 0) -> list[dict[str, Any]]:
    maps: list[tuple[str, dict[str, Any]]] = [
        (f"shear-k{k:g}", {"family": "parabolic_shear", "params": {"k": k}}) for k in (0.5, 1.0, 2.0, 4.0)
    ]
    maps += [
        (
            "quadratic",
            {"family": "quadratic_perturbation", "params": {"Q": [[[0.0, 0.25], [0.25, 0.0]], [[0.5, 0.0], [0.0, 0.25]]]}},
        ),
        ("linear", {"family": "linear", "params": {"A": [[2.0, 1.0], [0.0, 0.5]]}}),
        (
            "composed",
            {
                "family": "composed",
                "params": {
                    "outer": {"A": [[1.0, 0.5], [0.0, 1.0]]},
                    "inner": {"family": "parabolic_shear", "params": {"k": 1.0}},
                },
            },
        ),
    ]
    return [
        {
            "name": name,
            "space": _euclid(),
            "map": mp,
            "task": "bound",
            "params": {"claim1_pairs": 100},
            "seed": seed,
        }
        for name, mp in maps
    ]


DEGENERACY_EPS = (0.05, 0.1, 0.2, 0.4, 0.8)


def run_degeneracy(seed: int = 0, samples: int | None = None) -> ScenarioReport:
    """Max-norm plane, shear k = 1: every probed ball image is non-convex while the bound is 0."""
    raw = {
        "name": "degeneracy-demo",
        "space": {"kind": "linf", "dim": 2},
        "map": {"family": "parabolic_shear", "params": {"k": 1.0}},
        "task": "suite",
        "params": {"name": "degeneracy-demo", "eps": list(DEGENERACY_EPS)},
        "seed": seed,
    }
    sc = parse_scenario({k: v for k, v in raw.items() if k != "task"} | {"task": "lcr"}, seed)
    m = sc.map
    n = samples or 100000
    conv2 = conv2_estimate(m.domain_space, n, seed, True)
    lip2 = lip2_estimate(m, 2000, seed)
    lipo = lipo_via_inverse(m, 4000, seed)
    bound = theorem_bound(conv2.value, lipo.value, lip2.lip_constant)
    fails = []
    rows = []
    balls = []
    for eps in DEGENERACY_EPS:
        ball = Ball(m.domain_space, m.domain.center, eps)
        v = verify_convexity(m, ball, 512, seed)
        w = shear_linf_witness(1.0, eps)
        mid = np.asarray(w.midpoint)
        jit = np.random.default_rng([seed, 7]).standard_normal((5, 2)) * 0.25 * eps
        starts = np.clip(ball.c + jit, -eps * (1 - 1e-6), eps * (1 - 1e-6))
        out = newton_batch(m, np.repeat(mid[None, :], 5, axis=0), starts, ball.c[None, :], np.array([eps]))
        rejected = not bool(np.any(out["success"]))
        g = grid_convexity_oracle_2d(m, ball, 256)
        entry = {
            "eps": eps,
            "verdict": v.verdict,
            "witness": v.witness,
            "linf_witness": w.to_dict(),
            "linf_witness_rejected_by_newton": rejected,
            "grid_oracle": g.to_dict(),
        }
        balls.append(entry)
        rows.append({"eps": eps, "verdict": v.verdict, "witness_margin": w.margin, "grid_verdict": g.verdict,
                     "grid_margin": g.margin})
        if v.verdict != "non_convex":
            fails.append(f"eps = {eps}: expected a certified non-convex image, got {v.verdict}")
        if not rejected:
            fails.append(f"eps = {eps}: Newton found a preimage of the closed-form witness midpoint")
    if bound != 0.0:
        fails.append(f"computed bound is {bound}, expected 0 (conv2 estimate {conv2.value})")
    res = {
        "conv2": conv2.to_dict(),
        "lipo": lipo.value,
        "lip2": lip2.lip_constant,
        "bound": bound,
        "balls": balls,
        "note": "bound 0 is vacuously respected; without conv2 > 0 there is no positive guarantee",
    }
    return ScenarioReport(raw, res, fails, rows)


# ---------------------------------------------------------------------------
# dispatch


TASK_RUNNERS: dict[str, Callable[[Scenario], ScenarioReport]] = {
    "delta": task_delta,
    "conv2": task_conv2,
    "omega": task_omega,
    "lip1": task_lip,
    "lip2": task_lip,
    "dcheck": task_dcheck,
    "lipo": task_lipo,
    "verify": task_verify,
    "lcr": task_lcr,
    "bound": task_bound,
    "claim1": task_claim1,
}


def run(sc: Scenario, timing: bool = False) -> ScenarioReport:
    t0 = time.perf_counter()
    if sc.task == "suite":
        rep = run_suite(sc.params["name"], sc.seed, sc.params.get("samples"))
        rep.scenario = sc.raw
    else:
        rep = TASK_RUNNERS[sc.task](sc)
    if timing:
        rep.wall_time = time.perf_counter() - t0
    return rep


def run_scenario(path_or_dict: Any, seed: int | None = None, samples: int | None = None,
                 timing: bool = False) -> ScenarioReport:
    if isinstance(path_or_dict, dict):
        sc = parse_scenario(path_or_dict, seed, samples)
    else:
        sc = load_scenario(str(path_or_dict), seed, samples)
    return run(sc, timing)


def run_suite(name: str, seed: int = 0, samples: int | None = None) -> ScenarioReport:
    if name not in SUITES:
        raise DescriptorError("suite", f"unknown suite {name!r}; expected one of {list(SUITES)}")
    if name == "degeneracy-demo":
        return run_degeneracy(seed, samples)
    reports = [run_scenario(d, seed, samples) for d in paper_verification_scenarios(seed)]
    rows = []
    for d, r in zip(paper_verification_scenarios(seed), reports):
        for row in r.rows:
            rows.append({"scenario": d["name"], **row})
    fails = [f"{d['name']}: {f}" for d, r in zip(paper_verification_scenarios(seed), reports) for f in r.failures]
    res = {
        "scenarios": [r.to_dict() for r in reports],
        "exit_codes": [r.exit_code for r in reports],
    }
    raw = {"task": "suite", "params": {"name": name}, "seed": seed}
    return ScenarioReport(raw, res, fails, rows)


def describe(what: str) -> dict[str, Any]:
    if what == "spaces":
        return {
            "kinds": list(KINDS),
            "fields": {"kind": "one of kinds", "dim": "positive integer", "p": "real > 1 (lp, weighted_lp)",
                       "weights": "positive list (weighted_lp)"},
            "example": {"kind": "lp", "dim": 2, "p": 1.5},
        }
    if what == "maps":
        return {
            "families": list(FAMILIES),
            "params": {
                "linear": {"A": "matrix", "b": "optional offset"},
                "parabolic_shear": {"k": "real >= 0"},
                "quadratic_perturbation": {"Q": "list of symmetric matrices, one per output"},
                "composed": {"outer": {"A": "matrix", "b": "optional offset"}, "inner": "non-composed map descriptor"},
            },
            "domain": {"center": "vector (default 0)", "radius": "positive (default 1)"},
            "example": {"family": "parabolic_shear", "params": {"k": 2.0}, "domain": {"radius": 1.0}},
        }
    if what == "tasks":
        return {
            "tasks": list(TASKS),
            "suites": list(SUITES),
            "params": {
                "delta": ["t_grid", "samples", "tolerance"],
                "conv2": ["samples", "refine", "threshold"],
                "omega": ["order", "t_grid", "samples"],
                "lip1": ["samples"],
                "lip2": ["samples"],
                "dcheck": ["samples"],
                "lipo": ["centers", "radii_per_center", "directions", "samples", "agreement"],
                "verify": ["ball", "pairs", "margin", "resolution", "oracle"],
                "lcr": ["center", "eps_max", "bisection_steps", "pairs", "mode"],
                "bound": ["center", "eps_max", "bisection_steps", "pairs", "mode", "slack", "conv2_samples",
                          "samples", "claim1_pairs"],
                "claim1": ["claim1_pairs", "samples", "conv2_samples"],
                "suite": ["name"],
            },
        }
    raise DescriptorError("describe", f"expected one of spaces, maps, tasks; got {what!r}")


__all__ = [
    "EXIT_CHECK",
    "EXIT_INPUT",
    "EXIT_OK",
    "Scenario",
    "ScenarioReport",
    "describe",
    "dumps",
    "load_scenario",
    "parse_scenario",
    "paper_verification_scenarios",
    "rows_to_csv",
    "run",
    "run_scenario",
    "run_suite",
]
