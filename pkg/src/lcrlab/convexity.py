"""Convexity of ball images, local convexity radii, and the lower bound on them.

``verify_convexity`` tests chord midpoints of ``f(B)``: a midpoint is certified
inside by a constrained Newton preimage, and certified outside either by a
winding-number certificate on the image of the boundary circle (2D, with a
Jacobian of constant sign) or through the analytic inverse. Anything that is
neither makes the verdict ``inconclusive``; it never turns into a false verdict.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from ._util import nested_draw, ordered_map, pattern_search
from .errors import DomainError, LabError
from .maps import MapSpec, SmoothnessEstimate, _batch_operator_norms
from .openness import BISECTION_TOL, OpennessEstimate, _probe_balls, newton_batch
from .spaces import Ball, Conv2Estimate, NormedSpace, clamp_to_radius, norm, sample_ball

VERDICTS = ("convex", "non_convex", "inconclusive")

# pair endpoints sit this far (relative) inside the ball
BOUNDARY_INSET = 1e-7
RESTARTS = 5
REFINE_STARTS = 3
DEFAULT_MARGIN = 1e-4
BOUNDARY_POINTS = 16384
BISECTION_STEPS = 12
UNIFORM_BALLS = 16
DEFAULT_SLACK = 0.10
EUCLIDEAN_CONV2 = 0.125


@dataclass
class ConvexityVerdict:
    ball: Ball
    verdict: str
    method: str
    tolerance: float
    pairs: int
    seed: int
    witness: dict[str, Any] | None = None
    certified_inside: int = 0
    suspects: int = 0
    min_depth: float = math.inf

    def to_dict(self) -> dict[str, Any]:
        return {
            "ball": self.ball.to_dict(),
            "verdict": self.verdict,
            "method": self.method,
            "tolerance": self.tolerance,
            "pairs": self.pairs,
            "seed": self.seed,
            "certified_inside": self.certified_inside,
            "suspects": self.suspects,
            "min_depth": self.min_depth,
            "witness": self.witness,
        }


def _pair_sample(ball: Ball, pairs: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Nested preimage pairs: boundary chords, short boundary chords, interior pairs."""
    X = ball.space
    n = X.dim
    r = ball.radius * (1.0 - BOUNDARY_INSET)
    n_chord = max(1, pairs // 2)
    n_local = max(1, pairs // 4)
    n_inner = max(1, pairs - n_chord - n_local)

    A1 = sample_ball(X, r, n_chord, seed, "sphere", tag=301)
    B1 = sample_ball(X, r, n_chord, seed, "sphere", tag=302)

    def draw(rng, k):
        return np.concatenate([rng.standard_normal((k, n)), rng.random((k, 1))], axis=1)

    loc = nested_draw(seed, 303, n_local, draw)
    A2 = sample_ball(X, r, n_local, seed, "sphere", tag=304)
    g = loc[:, :n] / np.maximum(norm(X, loc[:, :n]), 1e-300)[:, None]
    s = r * np.exp(math.log(1e-3) + loc[:, n] * (math.log(1.0) - math.log(1e-3)))
    B2 = A2 + s[:, None] * g
    nb = norm(X, B2)
    B2 = B2 * (r / np.maximum(nb, 1e-300))[:, None]
    B2 = clamp_to_radius(X, B2, r)

    A3 = sample_ball(X, r, n_inner, seed, "interior", tag=305)
    B3 = sample_ball(X, r, n_inner, seed, "interior", tag=306)
    P = np.concatenate([A1, A2, A3]) + ball.c
    Q = np.concatenate([B1, B2, B3]) + ball.c
    return P, Q


def _preimage_depth(m: MapSpec, ball: Ball, T: np.ndarray, starts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Relative depth ``(eps - |p - c|) / eps`` of a located preimage ``p`` of each target.

    Uses the analytic inverse when there is one, otherwise unconstrained
    Newton from ``starts``; rows where Newton does not converge get ``-inf``
    (treated as most suspicious). Only a search heuristic, never a certificate.
    """
    if m.has_inverse:
        P = m.inverse(T)
        ok = np.ones(T.shape[0], dtype=bool)
    else:
        out = newton_batch(m, T, starts, ball.c[None, :], np.array([ball.radius]), constrained=False)
        P = out["z"]
        ok = out["residual"] <= 1e-9 * max(1.0, ball.radius)
    d = (ball.radius - ball.distance_from_center(P)) / ball.radius
    return np.where(ok, d, -np.inf), P


def _euclid_lower_constant(Y: NormedSpace) -> float:
    """``c`` with ``|v|_Y >= c |v|_2`` in the plane, slightly conservative."""
    th = np.linspace(0.0, 2 * np.pi, 4096, endpoint=False)
    return 0.999 * float(np.min(norm(Y, np.column_stack([np.cos(th), np.sin(th)]))))


def _jacobian_sign(m: MapSpec, ball: Ball) -> int:
    """+1 / -1 if det f' keeps a strict sign on a dense sample of the closed ball, else 0."""
    pts = np.concatenate(
        [
            ball.sample(4096, 0, "interior", tag=311),
            ball.sample(2048, 0, "sphere", tag=312),
            ball.c[None, :],
        ]
    )
    det = np.linalg.det(m.jac(pts))
    scale = max(1e-300, float(np.max(np.abs(det))))
    if np.all(det > 1e-9 * scale):
        return 1
    if np.all(det < -1e-9 * scale):
        return -1
    return 0


def boundary_curve(m: MapSpec, ball: Ball, points: int = BOUNDARY_POINTS) -> np.ndarray:
    """Image of the ball's boundary as a closed polygon (2D), diagonals and axes included."""
    th = 2 * np.pi * np.arange(points) / points
    u = np.column_stack([np.cos(th), np.sin(th)])
    u = u / norm(ball.space, u)[:, None]
    return m.f(ball.c + ball.radius * u)


def _segment_distance(poly: np.ndarray, t: np.ndarray) -> float:
    a = poly
    b = np.roll(poly, -1, axis=0)
    ab = b - a
    L2 = np.einsum("ij,ij->i", ab, ab)
    s = np.clip(np.einsum("ij,ij->i", t - a, ab) / np.where(L2 > 0, L2, 1.0), 0.0, 1.0)
    proj = a + s[:, None] * ab
    return float(np.min(np.sqrt(np.sum((proj - t) ** 2, axis=1))))


def _winding(poly: np.ndarray, t: np.ndarray) -> int:
    v = poly - t
    w = np.roll(v, -1, axis=0)
    ang = np.arctan2(v[:, 0] * w[:, 1] - v[:, 1] * w[:, 0], np.einsum("ij,ij->i", v, w))
    return int(round(float(np.sum(ang)) / (2 * np.pi)))


def boundary_exclusion_certificate(m: MapSpec, ball: Ball, t) -> dict[str, Any]:
    """Certified lower bound on the codomain distance from ``t`` to ``f(ball)`` in the plane.

    With ``det f'`` of one sign on the closed ball, the number of preimages of
    ``t`` equals the winding number of the boundary image around ``t`` (up to
    sign), so winding 0 means ``t`` is outside; every image point then has
    winding number nonzero, and any segment to it crosses the boundary curve.
    The polygon is corrected by a sagitta bound from its second differences.
    Returns ``{"excluded": bool, "distance": float, ...}``.
    """
    t = np.asarray(t, dtype=float)
    if ball.dim != 2 or m.codomain_space.dim != 2:
        return {"excluded": False, "distance": 0.0, "reason": "planar maps only"}
    sign = _jacobian_sign(m, ball)
    if sign == 0:
        return {"excluded": False, "distance": 0.0, "reason": "Jacobian changes sign or vanishes"}
    poly = boundary_curve(m, ball)
    second = poly - 0.5 * (np.roll(poly, 1, axis=0) + np.roll(poly, -1, axis=0))
    sagitta = 2.0 * float(np.max(np.sqrt(np.sum(second * second, axis=1))))
    d2 = _segment_distance(poly, t) - sagitta
    if d2 <= 0:
        return {"excluded": False, "distance": 0.0, "reason": "target too close to the boundary image"}
    wind = _winding(poly, t)
    dist = d2 * _euclid_lower_constant(m.codomain_space)
    return {
        "excluded": wind == 0,
        "distance": dist if wind == 0 else 0.0,
        "winding": wind,
        "sagitta_bound": sagitta,
        "certificate": "boundary_winding",
        "reason": "" if wind == 0 else "target enclosed by the boundary image",
    }


def inverse_exclusion_certificate(m: MapSpec, ball: Ball, t, margin: float) -> dict[str, Any]:
    """Exclusion via the analytic inverse: ``f^-1(t)`` lies outside the ball by ``s``,
    and the inverse's local Lipschitz bound ``L`` on the codomain ball ``B_margin(t)``
    satisfies ``1.5 L margin < s``, so no image point lies within ``margin`` of ``t``.
    """
    t = np.asarray(t, dtype=float)
    if not m.has_inverse:
        return {"excluded": False, "distance": 0.0, "reason": "no analytic inverse"}
    z = m.inverse(t)
    s = float(ball.distance_from_center(z)) - ball.radius
    if s <= 0:
        return {"excluded": False, "distance": 0.0, "reason": "inverse image inside the ball"}
    Y = m.codomain_space
    W = t + sample_ball(Y, margin, 256, 0, "interior", tag=321)
    W = np.vstack([t[None, :], W, t + sample_ball(Y, margin, 256, 0, "sphere", tag=322)])
    Jinv = np.linalg.pinv(m.jac(m.inverse(W)))
    L = float(np.max(_batch_operator_norms(Jinv, Y, m.domain_space, 0)))
    ok = 1.5 * L * margin < s
    return {
        "excluded": bool(ok),
        "distance": s / (1.5 * L) if ok else 0.0,
        "preimage_excess": s,
        "inverse_lipschitz_local": L,
        "certificate": "analytic_inverse",
        "reason": "" if ok else "inverse Lipschitz bound too weak for the margin",
    }


def _certify_exclusion(m: MapSpec, ball: Ball, t: np.ndarray, margin: float) -> dict[str, Any]:
    cert: dict[str, Any] = {"excluded": False, "distance": 0.0, "reason": "no certificate available"}
    if ball.dim == 2 and m.codomain_space.dim == 2:
        cert = boundary_exclusion_certificate(m, ball, t)
        if cert["excluded"] and cert["distance"] > margin:
            return cert
    if m.has_inverse:
        alt = inverse_exclusion_certificate(m, ball, t, margin)
        if alt["excluded"] and alt["distance"] > margin:
            return alt
        if not cert["excluded"]:
            cert = alt
    cert = dict(cert)
    if cert.get("excluded") and cert["distance"] <= margin:
        cert["reason"] = "distance below the exclusion margin"
    cert["excluded"] = False
    return cert


def verify_convexity(
    m: MapSpec,
    ball: Ball,
    pairs: int = 512,
    seed: int = 0,
    margin: float | None = None,
    refine: bool = True,
) -> ConvexityVerdict:
    """Decide convexity of ``f(ball)`` from chord midpoints of sampled preimage pairs.

    ``margin`` is the exclusion distance a non-convex witness must exceed
    (default ``1e-4 * eps``).
    """
    if ball.space != m.domain_space:
        raise LabError("ball and map domain live in different spaces")
    if not m.domain.contains_ball(ball, tol=1e-12 * m.domain.radius):
        raise DomainError("ball exits the map domain")
    if pairs < 1:
        raise LabError("pairs must be positive")
    eps = ball.radius
    tol = DEFAULT_MARGIN * eps if margin is None else float(margin)
    n = ball.dim

    P, Q = _pair_sample(ball, pairs, seed)
    T = 0.5 * (m.f(P) + m.f(Q))
    S = 0.5 * (P + Q)
    out = newton_batch(m, T, S, ball.c[None, :], np.array([eps]))
    inside = out["success"].copy()

    fail = np.flatnonzero(~inside)
    if fail.size:
        jit = nested_draw(seed, 331, RESTARTS * pairs, lambda rng, k: rng.standard_normal((k, n)))
        for j in range(RESTARTS):
            fail = np.flatnonzero(~inside)
            if fail.size == 0:
                break
            starts = S[fail] + 0.25 * eps * jit[j * pairs + fail] / math.sqrt(n)
            starts = ball.c + clamp_to_radius(ball.space, starts - ball.c, eps * (1 - 1e-6))
            r = newton_batch(m, T[fail], starts, ball.c[None, :], np.array([eps]))
            inside[fail[r["success"]]] = True

    depth, _ = _preimage_depth(m, ball, T, S)
    depth = np.where(inside, np.maximum(depth, 0.0), depth)
    order = np.argsort(depth, kind="stable")
    suspects = [int(i) for i in order[:3] if not inside[i]]

    cand: list[tuple[np.ndarray, np.ndarray]] = [(P[i], Q[i]) for i in suspects]
    best_depth = float(depth[order[0]])
    if refine:
        r_in = eps * (1 - BOUNDARY_INSET)

        def pairs_of(Z):
            A = ball.c + clamp_to_radius(ball.space, Z[:, :n] - ball.c, r_in)
            B = ball.c + clamp_to_radius(ball.space, Z[:, n:] - ball.c, r_in)
            return A, B

        def obj(Z, normalized=True):
            A, B = pairs_of(Z)
            d, _ = _preimage_depth(m, ball, 0.5 * (m.f(A) + m.f(B)), 0.5 * (A + B))
            if normalized:
                # depth over squared chord length, so collapsing the pair is not rewarded
                sp = np.asarray(norm(ball.space, A - B)) / eps
                d = np.where(sp > 1e-3, d / np.maximum(sp, 1e-3) ** 2, np.inf)
            return np.where(np.isfinite(d), d, np.inf)

        sep = np.asarray(norm(ball.space, P - Q)) / eps
        score = np.where(sep > 1e-3, depth / np.maximum(sep, 1e-3) ** 2, np.inf)
        starts = list(np.argsort(score, kind="stable")[:REFINE_STARTS])
        found = []
        for i0 in starts:
            z, fz = pattern_search(obj, np.concatenate([P[i0], Q[i0]]), step=0.1 * eps, step_min=1e-6 * eps)
            if fz < 0:
                # widen the witness: push the raw midpoint depth down from here
                z, fz = pattern_search(lambda Z: obj(Z, False), z, step=0.01 * eps, step_min=1e-7 * eps)
                A, B = pairs_of(z[None, :])
                found.append((float(fz), A[0], B[0]))
            best_depth = min(best_depth, float(obj(z[None, :], False)[0]))
        found.sort(key=lambda r: r[0])
        cand = [(a, b) for _, a, b in found] + cand

    witness = None
    last_reason = ""
    for a_pre, b_pre in cand:
        t = 0.5 * (m.f(a_pre[None, :])[0] + m.f(b_pre[None, :])[0])
        cert = _certify_exclusion(m, ball, t, tol)
        if cert["excluded"]:
            witness = {
                "a": m.f(a_pre[None, :])[0].tolist(),
                "b": m.f(b_pre[None, :])[0].tolist(),
                "preimages": [a_pre.tolist(), b_pre.tolist()],
                "midpoint": t.tolist(),
                "distance": cert["distance"],
                "certificate": cert["certificate"],
            }
            break
        last_reason = cert.get("reason", "")

    if witness is not None:
        verdict = "non_convex"
    elif not cand and np.all(inside):
        verdict = "convex"
    else:
        verdict = "inconclusive"
        witness = {"reason": last_reason or "midpoint not certified either way"}
    return ConvexityVerdict(
        ball=ball,
        verdict=verdict,
        method="midpoint_solve",
        tolerance=tol,
        pairs=pairs,
        seed=seed,
        witness=witness,
        certified_inside=int(np.sum(inside)),
        suspects=len(cand),
        min_depth=best_depth,
    )


# ---------------------------------------------------------------------------
# local convexity radius


@dataclass
class LcrEstimate:
    center: list[float]
    value: float
    bracket: tuple[float, float]
    mode: str
    eps_max: float
    domain_limited: bool
    steps: list[dict[str, Any]] = field(default_factory=list)
    map_name: str = ""
    map_key: str = field(default="", repr=False)

    @property
    def width(self) -> float:
        return self.bracket[1] - self.bracket[0]

    def to_dict(self) -> dict[str, Any]:
        return {
            "center": self.center,
            "value": self.value,
            "bracket": list(self.bracket),
            "mode": self.mode,
            "eps_max": self.eps_max,
            "domain_limited": self.domain_limited,
            "steps": self.steps,
        }


def _map_key(m: MapSpec) -> str:
    return json.dumps(m.to_dict(), sort_keys=True)


def _uniform_centers(m: MapSpec, eps: float, count: int, seed: int) -> np.ndarray:
    D = m.domain
    room = D.radius - eps
    if room <= 0:
        return np.empty((0, D.dim))
    return D.c + sample_ball(D.space, room * (1 - 1e-9), count, seed, "interior", tag=341)


def _verdict_at(m: MapSpec, center: np.ndarray, eps: float, mode: str, pairs: int, seed: int) -> dict[str, Any]:
    balls = [Ball(m.domain_space, center, eps)]
    if mode == "uniform":
        balls += [Ball(m.domain_space, c, eps) for c in _uniform_centers(m, eps, UNIFORM_BALLS, seed)]
    verdicts = ordered_map(lambda b: verify_convexity(m, b, pairs, seed), balls)
    kinds = [v.verdict for v in verdicts]
    if "non_convex" in kinds:
        j = kinds.index("non_convex")
        agg = "non_convex"
    elif "inconclusive" in kinds:
        j = kinds.index("inconclusive")
        agg = "inconclusive"
    else:
        j = 0
        agg = "convex"
    return {"eps": eps, "verdict": agg, "balls": len(balls), "center": list(verdicts[j].ball.center),
            "witness": verdicts[j].witness}


def estimate_lcr(
    m: MapSpec,
    center=None,
    eps_max: float | None = None,
    bisection_steps: int = BISECTION_STEPS,
    pairs: int = 512,
    seed: int = 0,
    mode: str = "at_point",
) -> LcrEstimate:
    """Bisection on eps for the largest radius whose ball images are all convex.

    The bracket runs from the largest eps verified convex to the smallest eps
    verified non-convex (or ``eps_max`` when none was). Inconclusive verdicts
    shrink the search interval but not the verified upper end.
    """
    if mode not in ("at_point", "uniform"):
        raise LabError(f"unknown mode {mode!r}")
    c = m.domain.c if center is None else np.asarray(center, dtype=float)
    room = m.domain.radius - float(m.domain.distance_from_center(c))
    if eps_max is None:
        eps_max = room
    if not (eps_max > 0) or eps_max > room * (1 + 1e-12):
        raise DomainError(f"B_{eps_max}(center) does not fit in the domain")
    if bisection_steps < 0:
        raise LabError("bisection_steps must be nonnegative")

    steps = [_verdict_at(m, c, eps_max, mode, pairs, seed)]
    if steps[0]["verdict"] == "convex":
        return LcrEstimate(c.tolist(), float(eps_max), (float(eps_max), float(eps_max)), mode, float(eps_max),
                           True, steps, m.name, _map_key(m))
    lo, hi_search, hi_ver = 0.0, float(eps_max), float(eps_max)
    for _ in range(bisection_steps):
        mid = 0.5 * (lo + hi_search)
        st = _verdict_at(m, c, mid, mode, pairs, seed)
        steps.append(st)
        if st["verdict"] == "convex":
            lo = mid
        else:
            hi_search = mid
            if st["verdict"] == "non_convex":
                hi_ver = mid
    return LcrEstimate(c.tolist(), 0.5 * (lo + hi_ver), (lo, hi_ver), mode, float(eps_max), False, steps, m.name,
                       _map_key(m))


# ---------------------------------------------------------------------------
# the lower bound


def theorem_bound(conv2: float, lipo: float, lip2: float) -> float | str:
    """``8 lipo conv2 / lip2``; ``"unbounded"`` when ``lip2 = 0``."""
    for name, v in (("conv2", conv2), ("lipo", lipo), ("lip2", lip2)):
        if not v >= 0 or math.isnan(v):
            raise LabError(f"{name} must be nonnegative, got {v!r}")
    if lip2 == 0:
        return "unbounded"
    if conv2 == 0 or lipo == 0:
        return 0.0
    return 8.0 * lipo * conv2 / lip2


@dataclass
class BoundReport:
    conv2: float
    lipo: float
    lip2: float
    bound: float | str
    lcr_measured: LcrEstimate
    bound_holds: bool
    slack: float
    conv2_source: str
    bound_hilbert: float | str | None
    biases: dict[str, str]
    conv2_sampled: float | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "conv2": self.conv2,
            "conv2_source": self.conv2_source,
            "conv2_sampled": self.conv2_sampled,
            "lipo": self.lipo,
            "lip2": self.lip2,
            "bound": self.bound,
            "bound_hilbert": self.bound_hilbert,
            "slack": self.slack,
            "lcr_measured": self.lcr_measured.to_dict(),
            "bound_holds": self.bound_holds,
            "biases": self.biases,
        }


def _value(est: Any) -> tuple[float, str]:
    if isinstance(est, Conv2Estimate):
        return est.value, est.bias
    if isinstance(est, OpennessEstimate):
        return est.value, est.bias
    if isinstance(est, SmoothnessEstimate):
        return est.lip_constant, est.bias
    return float(est), "exact"


def check_theorem(
    m: MapSpec,
    space: NormedSpace,
    lcr: LcrEstimate,
    conv2,
    lipo,
    lip2,
    slack: float = DEFAULT_SLACK,
    exact_euclidean: bool = True,
) -> BoundReport:
    """Compare the measured lcr bracket with ``8 Lip_o conv2 / Lip_2``.

    Sampled conv2 over-estimates and sampled Lip_2 under-estimates, so the
    computed bound errs high; it is accepted within ``slack`` (relative). In a
    Euclidean space the exact conv2 = 1/8 replaces the sample. A lcr that is
    limited only by the domain (every domain-fitting ball convex) satisfies
    any bound.
    """
    if space != m.domain_space:
        raise LabError("estimates refer to a different space than the map domain")
    if (lcr.map_key and lcr.map_key != _map_key(m)) or (lcr.map_name and lcr.map_name != m.name):
        raise LabError("lcr estimate was computed for a different map")
    c2, b_c2 = _value(conv2)
    lo, b_lo = _value(lipo)
    l2, b_l2 = _value(lip2)
    sampled = None
    source = b_c2
    if exact_euclidean and space.is_euclidean:
        sampled = c2 if b_c2 != "exact" else None
        c2, source = EUCLIDEAN_CONV2, "exact-euclidean"
    bound = theorem_bound(c2, lo, l2)
    hilbert = theorem_bound(EUCLIDEAN_CONV2, lo, l2) if space.is_euclidean else None
    if bound == "unbounded":
        holds = lcr.domain_limited
    else:
        holds = lcr.domain_limited or lcr.bracket[0] >= bound * (1.0 - slack)
    biases = {
        "conv2": source,
        "lipo": b_lo,
        "lip2": b_l2,
        "bound": "anti-conservative (conv2 high, Lip_2 low)",
        "lcr": "bracket lower end is a verified convex radius",
    }
    return BoundReport(c2, lo, l2, bound, lcr, bool(holds), slack, source, hilbert, biases, sampled)


# ---------------------------------------------------------------------------
# Claim 1 trace


@dataclass
class Claim1Trace:
    x: list[float]
    y: list[float]
    z: list[float]
    delta: float
    eta: float
    midpoint_deviation: float
    margins: dict[str, float]
    holds: dict[str, bool]
    all_inequalities_hold: bool
    conclusion_holds: bool

    def to_dict(self) -> dict[str, Any]:
        return {
            "x": self.x,
            "y": self.y,
            "z": self.z,
            "delta": self.delta,
            "eta": self.eta,
            "midpoint_deviation": self.midpoint_deviation,
            "margins": self.margins,
            "holds": self.holds,
            "all_inequalities_hold": self.all_inequalities_hold,
            "conclusion_holds": self.conclusion_holds,
        }


def claim1_batch(
    m: MapSpec,
    ball: Ball,
    xs,
    ys,
    lipo: float,
    lip2: float,
    conv2: float,
    directions: int = 32,
    round_tol: float = 1e-12,
) -> list[Claim1Trace]:
    """Walk the midpoint argument for each pair and record the margin of every step.

    (i)   eps - |z| >= conv2 |x - y|^2 / eps
    (ii)  B_delta(z) inside the ball, delta = conv2 |x - y|^2 / eps
    (iii) B_eta(f(z)) inside f(B_delta(z)), eta = lipo delta, by certified probing
    (iv)  |(f(x) + f(y))/2 - f(z)| <= lip2 |x - y|^2 / 8

    and the conclusion ``(f(x) + f(y))/2`` in ``B_eta(f(z))``, which needs
    eps at most the bound and is reported separately. Norms are taken
    relative to the ball center. A margin holds when it is >= -round_tol
    (times max(1, eps)), which absorbs rounding only.
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    X = ball.space
    Y = m.codomain_space
    slack = 1e-12 * ball.radius
    if not (np.all(ball.contains(xs, -slack)) and np.all(ball.contains(ys, -slack))):
        raise DomainError("x and y must lie in the ball")
    if not m.domain.contains_ball(ball, tol=1e-12 * m.domain.radius):
        raise DomainError("ball exits the map domain")
    eps = ball.radius
    zs = 0.5 * (xs + ys)
    sep = np.asarray(norm(X, xs - ys), dtype=float)
    rz = np.asarray(ball.distance_from_center(zs), dtype=float)
    delta = conv2 * sep * sep / eps
    eta = lipo * delta
    dev = np.asarray(norm(Y, 0.5 * (m.f(xs) + m.f(ys)) - m.f(zs)), dtype=float)

    m_iii = np.zeros_like(delta)
    live = np.flatnonzero((delta > 0) & (eta > 0))
    if live.size:
        Ydirs = np.vstack([np.eye(Y.dim), -np.eye(Y.dim), sample_ball(Y, 1.0, directions, 0, "sphere", tag=351)])
        Ydirs = Ydirs / norm(Y, Ydirs)[:, None]
        res = _probe_balls(m, [(zs[i], float(delta[i])) for i in live], Ydirs, BISECTION_TOL * 1e-3)
        m_iii[live] = np.array([r["ratio"] for r in res]) * delta[live] - eta[live]

    tol = round_tol * max(1.0, eps)
    out = []
    for i in range(xs.shape[0]):
        margins = {
            "i": float(eps - rz[i] - delta[i]),
            "ii": float(eps - (rz[i] + delta[i])),
            "iii": float(m_iii[i]),
            "iv": float(lip2 * sep[i] ** 2 / 8.0 - dev[i]),
            "conclusion": float(eta[i] - dev[i]),
        }
        holds = {k: bool(v >= -tol) for k, v in margins.items()}
        out.append(
            Claim1Trace(
                x=xs[i].tolist(),
                y=ys[i].tolist(),
                z=zs[i].tolist(),
                delta=float(delta[i]),
                eta=float(eta[i]),
                midpoint_deviation=float(dev[i]),
                margins=margins,
                holds=holds,
                all_inequalities_hold=all(holds[k] for k in ("i", "ii", "iii", "iv")),
                conclusion_holds=holds["conclusion"],
            )
        )
    return out


def claim1_trace(m: MapSpec, ball: Ball, x, y, lipo: float, lip2: float, conv2: float, **kw) -> Claim1Trace:
    """Single-pair :func:`claim1_batch`."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != (ball.dim,) or y.shape != (ball.dim,):
        raise LabError("x and y must be vectors of the ball's dimension")
    return claim1_batch(m, ball, x[None, :], y[None, :], lipo, lip2, conv2, **kw)[0]


def claim1_pairs(ball: Ball, count: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Nested random pairs in the ball for Claim 1 traces."""
    return ball.sample(count, seed, "interior", tag=361), ball.sample(count, seed, "interior", tag=362)


__all__: Sequence[str] = [
    "BoundReport",
    "Claim1Trace",
    "ConvexityVerdict",
    "LcrEstimate",
    "boundary_exclusion_certificate",
    "check_theorem",
    "claim1_batch",
    "claim1_pairs",
    "claim1_trace",
    "estimate_lcr",
    "inverse_exclusion_certificate",
    "theorem_bound",
    "verify_convexity",
]
