"""Lipschitz-open constant of a map, by two independent routes.

``lipo_via_inverse`` uses the analytic inverse: for a bijection onto its image
the openness constant is the reciprocal of the inverse's Lipschitz constant
(scaling check: ``f(x) = 2x`` maps ``B_eps(x)`` onto ``B_{2 eps}(2x)``, giving 2,
while ``f^{-1}`` has Lipschitz constant 1/2).

``lipo_membership_probe`` measures inner radii of image balls directly,
certifying every inclusion with a Newton preimage strictly inside the ball.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ._util import nested_draw, ordered_map, pattern_search
from .errors import DimensionError, LabError
from .maps import MapSpec, _base_points, _batch_operator_norms
from .spaces import Ball, clamp_to_radius, norm, sample_ball

NEWTON_MAX_ITER = 50
NEWTON_TOL = 1e-10
NEWTON_HALVINGS = 30
INTERIOR_MARGIN = 1e-9
BISECTION_TOL = 1e-6
# balls per vectorized probe batch
PROBE_BATCH = 8


@dataclass
class PreimageResult:
    target: list[float]
    preimage: list[float] | None
    residual: float
    iterations: int
    reason: str = ""

    @property
    def found(self) -> bool:
        return self.preimage is not None

    def to_dict(self) -> dict[str, Any]:
        return {
            "target": self.target,
            "preimage": self.preimage,
            "residual": self.residual,
            "iterations": self.iterations,
            "reason": self.reason,
        }


def _solve_steps(J: np.ndarray, r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Newton steps ``J^+ r`` for a batch; second value flags (near-)singular Jacobians."""
    s = np.linalg.svd(J, compute_uv=False)
    singular = s[:, -1] <= 1e-13 * np.maximum(s[:, 0], 1e-300)
    steps = np.zeros((J.shape[0], J.shape[2]))
    ok = ~singular
    if np.any(ok):
        if J.shape[1] == J.shape[2]:
            steps[ok] = np.linalg.solve(J[ok], r[ok][:, :, None])[:, :, 0]
        else:
            steps[ok] = np.einsum("mij,mj->mi", np.linalg.pinv(J[ok]), r[ok])
    return steps, singular


def newton_batch(
    m: MapSpec,
    targets: np.ndarray,
    starts: np.ndarray,
    centers: np.ndarray,
    radii: np.ndarray,
    *,
    max_iter: int = NEWTON_MAX_ITER,
    tol: float = NEWTON_TOL,
    halvings: int = NEWTON_HALVINGS,
    constrained: bool = True,
) -> dict[str, np.ndarray]:
    """Damped Newton on ``f(z) = target`` for a batch, each kept inside its own ball.

    A step is accepted at the first halving ``alpha = 2^-j`` whose iterate lies
    at relative depth > INTERIOR_MARGIN (times the radius) in its ball and lowers the residual. Elements
    are independent of one another. ``constrained=False`` drops the ball
    (used only to locate candidate preimages, never to certify).

    Returns arrays ``z``, ``residual``, ``iterations``, ``success`` and ``status``
    (0 ok, 1 singular Jacobian, 2 stalled, 3 iteration cap, 4 start outside).
    """
    Y = m.codomain_space
    X = m.domain_space
    targets = np.asarray(targets, dtype=float)
    z = np.array(starts, dtype=float)
    centers = np.broadcast_to(np.asarray(centers, dtype=float), z.shape)
    radii = np.broadcast_to(np.asarray(radii, dtype=float), (z.shape[0],))
    M = z.shape[0]

    def depth(Z, idx):
        # relative depth, so that tiny balls are treated like large ones
        return (radii[idx] - norm(X, Z - centers[idx])) / radii[idx]

    res = np.asarray(norm(Y, m.f(z) - targets), dtype=float)
    iters = np.zeros(M, dtype=int)
    status = np.zeros(M, dtype=int)
    if constrained:
        status[depth(z, np.arange(M)) <= INTERIOR_MARGIN] = 4
    active = (res > tol) & (status == 0)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        iters[idx] += 1
        r = m.f(z[idx]) - targets[idx]
        step, singular = _solve_steps(m.jac(z[idx]), r)
        status[idx[singular]] = 1
        live = ~singular
        alpha = np.ones(idx.size)
        accepted = np.zeros(idx.size, dtype=bool)
        for _h in range(halvings + 1):
            pend = live & ~accepted
            if not np.any(pend):
                break
            p = np.flatnonzero(pend)
            cand = z[idx[p]] - alpha[p, None] * step[p]
            newres = norm(Y, m.f(cand) - targets[idx[p]])
            good = newres < res[idx[p]]
            if constrained:
                good &= depth(cand, idx[p]) > INTERIOR_MARGIN
            g = p[good]
            z[idx[g]] = cand[good]
            res[idx[g]] = newres[good]
            accepted[g] = True
            alpha[p[~good]] *= 0.5
        stalled = live & ~accepted
        status[idx[stalled]] = 2
        active = (res > tol) & (status == 0)
    status[active] = 3
    success = (res <= tol) & (status == 0)
    if constrained:
        success &= depth(z, np.arange(M)) > INTERIOR_MARGIN
    return {"z": z, "residual": res, "iterations": iters, "success": success, "status": status}


_REASONS = {0: "", 1: "singular Jacobian", 2: "stalled: no admissible damped step", 3: "no convergence within max_iter",
            4: "start outside the constraint ball"}


def newton_preimage(
    m: MapSpec,
    target,
    start,
    constraint: Ball,
    max_iter: int = NEWTON_MAX_ITER,
    tol: float = NEWTON_TOL,
) -> PreimageResult:
    """Certified preimage of ``target`` strictly inside ``constraint``, or an absent result with a reason."""
    target = np.asarray(target, dtype=float)
    start = np.asarray(start, dtype=float)
    if target.shape != (m.codomain_space.dim,) or start.shape != (m.domain_space.dim,):
        raise DimensionError("target/start dimension mismatch")
    if not constraint.contains(start, INTERIOR_MARGIN * constraint.radius):
        raise LabError("start must lie inside the constraint ball")
    out = newton_batch(m, target[None, :], start[None, :], constraint.c[None, :], np.array([constraint.radius]),
                       max_iter=max_iter, tol=tol)
    ok = bool(out["success"][0])
    reason = _REASONS[int(out["status"][0])]
    if not ok and not reason:
        reason = "residual above tolerance"
    return PreimageResult(
        target=target.tolist(),
        preimage=out["z"][0].tolist() if ok else None,
        residual=float(out["residual"][0]),
        iterations=int(out["iterations"][0]),
        reason="" if ok else reason,
    )


@dataclass
class OpennessEstimate:
    value: float
    method: str
    bias: str
    probes: int
    witness: dict[str, Any]
    seed: int
    inverse_lipschitz: float | None = None
    failures: int = 0
    certificates: list[dict[str, Any]] = field(default_factory=list, repr=False)

    def to_dict(self, with_certificates: bool = False) -> dict[str, Any]:
        out = {
            "value": self.value,
            "method": self.method,
            "bias": self.bias,
            "probes": self.probes,
            "witness": self.witness,
            "seed": self.seed,
            "failures": self.failures,
        }
        if self.inverse_lipschitz is not None:
            out["inverse_lipschitz"] = self.inverse_lipschitz
        if with_certificates:
            out["certificates"] = self.certificates
        return out


def _is_singular_linear(m: MapSpec) -> bool:
    _, A, Q = m.polynomial()
    if np.any(Q != 0):
        return False
    return np.linalg.matrix_rank(A) < m.codomain_space.dim


def lipo_via_inverse(m: MapSpec, samples: int = 4000, seed: int = 0) -> OpennessEstimate:
    """``1 / Lip(f^{-1})`` with the inverse's Lipschitz constant taken over pairs in ``f(domain)``."""
    if _is_singular_linear(m):
        return OpennessEstimate(0.0, "inverse_lipschitz", "point-estimate", 0, {"reason": "image has empty interior"},
                                seed, inverse_lipschitz=math.inf)
    if not m.has_inverse:
        raise LabError(f"{m.name} map has no analytic inverse")
    X = m.domain_space
    Y = m.codomain_space
    D = m.domain
    xs = _base_points(m, samples, seed, tag=61)
    ys = m.f(xs)
    dirs = sample_ball(Y, 1.0, samples, seed, "sphere", tag=62)
    axes = np.vstack([np.eye(Y.dim), -np.eye(Y.dim)])
    axes = axes / norm(Y, axes)[:, None]
    use_axis = (np.arange(samples) % 4) == 0
    dirs[use_axis] = np.tile(axes, (-(-samples // axes.shape[0]), 1))[: int(use_axis.sum())]
    u = nested_draw(seed, 63, samples, lambda rng, n: rng.random(n))
    scale = D.radius * float(np.max(_batch_operator_norms(m.jac(xs[:1]), X, Y, seed)))
    s = scale * np.exp(math.log(1e-4) * u)
    y2 = ys + dirs * s[:, None]

    def ratio(A: np.ndarray, B: np.ndarray) -> np.ndarray:
        pa = m.inverse(A)
        pb = m.inverse(B)
        inside = (D.distance_from_center(pa) <= D.radius * (1 + 1e-12)) & (
            D.distance_from_center(pb) <= D.radius * (1 + 1e-12)
        )
        dy = norm(Y, A - B)
        out = norm(X, pa - pb) / np.where(dy > 0, dy, 1.0)
        return np.where(inside & (dy > 1e-9 * scale), out, -np.inf)

    vals = ratio(ys, y2)
    j = int(np.argmax(vals))
    if not np.isfinite(vals[j]):
        raise LabError("no admissible image pair sampled")
    a, b = ys[j], y2[j]
    best = float(vals[j])

    # Polish over (x, v): image point y = f(x) with x kept just inside the
    # domain, partner y + s v (or y - s v if that leaves the image) at a tiny
    # step s, so the ratio tracks the local slope of the inverse.
    n = X.dim
    step_s = 1e-7 * scale
    inner = D.radius * (1 - 1e-7)

    def pair(Z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        x = D.c + clamp_to_radius(X, Z[:, :n] - D.c, inner)
        v = Z[:, n:]
        nv = norm(Y, v)
        v = v / np.where(nv > 0, nv, 1.0)[:, None]
        A = m.f(x)
        B = A + step_s * v
        back = D.distance_from_center(m.inverse(B)) > D.radius * (1 + 1e-12)
        B[back] = A[back] - step_s * v[back]
        return A, B

    def neg(Z: np.ndarray) -> np.ndarray:
        A, B = pair(Z)
        return -ratio(A, B)

    x0 = m.inverse(a[None, :])[0]
    v0 = (b - a) / float(norm(Y, b - a))
    z, fz = pattern_search(neg, np.concatenate([x0, v0]), step=0.1 * D.radius, step_min=1e-7 * D.radius)
    if -fz > best:
        best = -fz
        A, B = pair(z[None, :])
        a, b = A[0], B[0]
    return OpennessEstimate(
        value=1.0 / best,
        method="inverse_lipschitz",
        bias="point-estimate",
        probes=samples,
        witness={"y": a.tolist(), "y2": b.tolist(), "preimages": [m.inverse(a).tolist(), m.inverse(b).tolist()]},
        seed=seed,
        inverse_lipschitz=best,
    )


def _probe_balls(m: MapSpec, plan: list[tuple[np.ndarray, float]], dirs: np.ndarray, tol: float) -> list[dict[str, Any]]:
    """Largest certified ``r`` along each direction with ``f(x) + r d`` in ``f(B_eps(x))``, per planned ball.

    All (ball, direction) rows are solved together. The bracket is seeded at
    the linearized boundary ``r0 = eps / |J^-1 d|``, then grown by doubling
    and closed by bisection to ``tol * eps``.
    """
    nb, k = len(plan), dirs.shape[0]
    xs = np.repeat(np.array([p[0] for p in plan]), k, axis=0)
    eps = np.repeat(np.array([p[1] for p in plan], dtype=float), k)
    D = np.tile(dirs, (nb, 1))
    fx = m.f(xs)
    J = m.jac(xs)
    X = m.domain_space

    lin = np.full(xs.shape[0], np.nan)
    if J.shape[1] == J.shape[2]:
        det_ok = np.abs(np.linalg.det(J)) > 1e-300
        if np.any(det_ok):
            w = np.linalg.solve(J[det_ok], D[det_ok][:, :, None])[:, :, 0]
            nw = norm(X, w)
            lin[det_ok] = np.where(nw > 0, eps[det_ok] / np.where(nw > 0, nw, 1.0), np.nan)
    fallback = 2.0 * eps * np.maximum(_batch_operator_norms(J, X, m.codomain_space, 0), 1e-12)
    r0 = np.where(np.isfinite(lin), lin, fallback)

    lo = np.zeros_like(eps)
    lo_z = xs.copy()
    lo_res = np.zeros_like(eps)
    hi = np.full_like(eps, np.inf)
    failures = np.zeros_like(eps, dtype=int)

    def attempt(r: np.ndarray, rows: np.ndarray) -> np.ndarray:
        out = newton_batch(m, fx[rows] + r[:, None] * D[rows], lo_z[rows], xs[rows], eps[rows])
        ok = out["success"]
        g = rows[ok]
        lo[g] = r[ok]
        lo_z[g] = out["z"][ok]
        lo_res[g] = out["residual"][ok]
        bad = rows[~ok]
        hi[bad] = np.minimum(hi[bad], r[~ok])
        failures[bad] += 1
        return ok

    allrows = np.arange(eps.size)
    attempt(r0 * (1 - 1e-7), allrows)
    rows = np.flatnonzero(np.isinf(hi))
    if rows.size:
        attempt(r0[rows] * (1 + 1e-3), rows)
    for _ in range(8):
        rows = np.flatnonzero(np.isinf(hi))
        if rows.size == 0:
            break
        attempt(2.0 * np.maximum(lo[rows], r0[rows]), rows)
    hi = np.where(np.isinf(hi), lo, hi)
    while True:
        rows = np.flatnonzero((hi - lo) > tol * eps)
        if rows.size == 0:
            break
        attempt(0.5 * (lo[rows] + hi[rows]), rows)

    results = []
    for b in range(nb):
        sl = slice(b * k, (b + 1) * k)
        ratios = lo[sl] / eps[sl]
        j = int(np.argmin(ratios))
        x, e = plan[b]
        certs = [
            {"target": (fx[b * k + i] + lo[b * k + i] * dirs[i]).tolist(), "preimage": lo_z[b * k + i].tolist(),
             "residual": float(lo_res[b * k + i]), "center": x.tolist(), "eps": e}
            for i in range(k)
            if lo[b * k + i] > 0
        ]
        results.append({"ratio": float(ratios[j]), "direction": dirs[j].tolist(),
                        "failures": int(failures[sl].sum()), "certificates": certs})
    return results


def probe_plan(m: MapSpec, centers: int, radii_per_center: int, seed: int) -> list[tuple[np.ndarray, float]]:
    """Nested (center, eps) probe list with ``B_eps(center)`` inside the domain.

    Half of the centers are uniform in the domain; the other half sit at
    relative depth 10^-U(0.5, 2.5), where openness is usually weakest.
    """
    D = m.domain
    n = D.dim
    R = D.radius

    def draw(rng, k):
        return np.concatenate([rng.standard_normal((k, n)), rng.random((k, 2))], axis=1)

    raw = nested_draw(seed, 71, centers, draw)
    dirs = raw[:, :n] / np.maximum(norm(D.space, raw[:, :n]), 1e-300)[:, None]
    uniform = raw[:, n] ** (1.0 / n)
    shallow = 1.0 - 10.0 ** (-(0.5 + 2.0 * raw[:, n]))
    rad = np.where(raw[:, n + 1] < 0.5, uniform, shallow) * R
    rad = np.minimum(rad, R * (1 - 1e-3))
    plan = []
    for i in range(centers):
        x = D.c + rad[i] * dirs[i]
        room = R - float(D.distance_from_center(x))
        lo_e, hi_e = 0.01 * R, 0.99 * room
        lo_e = min(lo_e, hi_e)
        us = nested_draw(seed, 10_000 + i, radii_per_center, lambda rng, k: rng.random(k))
        for u in us:
            eps = math.exp(math.log(lo_e) + float(u) * (math.log(hi_e) - math.log(lo_e))) if hi_e > lo_e else hi_e
            plan.append((x, eps))
    return plan


def lipo_membership_probe(
    m: MapSpec,
    centers: int = 24,
    radii_per_center: int = 3,
    directions: int = 32,
    seed: int = 0,
    tol: float = BISECTION_TOL,
    keep_certificates: bool = True,
) -> OpennessEstimate:
    """Minimum over probed balls of the certified inner radius of ``f(B_eps(x))`` about ``f(x)``, over eps."""
    if centers <= 0 or radii_per_center <= 0 or directions <= 0:
        raise LabError("probe counts must be positive")
    if _is_singular_linear(m):
        return OpennessEstimate(0.0, "membership_probe", "lower-bound", 0, {"reason": "image has empty interior"}, seed)
    Y = m.codomain_space
    axes = np.vstack([np.eye(Y.dim), -np.eye(Y.dim)])
    axes = axes / norm(Y, axes)[:, None]
    rand = sample_ball(Y, 1.0, directions, seed, "sphere", tag=72)
    dirs = np.vstack([axes, rand])
    plan = probe_plan(m, centers, radii_per_center, seed)
    chunks = [plan[i : i + PROBE_BATCH] for i in range(0, len(plan), PROBE_BATCH)]
    results = [r for part in ordered_map(lambda c: _probe_balls(m, c, dirs, tol), chunks) for r in part]
    ratios = [r["ratio"] for r in results]
    j = int(np.argmin(ratios))
    x, eps = plan[j]
    certs: list[dict[str, Any]] = []
    if keep_certificates:
        for r in results:
            certs.extend(r["certificates"])
    return OpennessEstimate(
        value=float(ratios[j]),
        method="membership_probe",
        bias="lower-bound",
        probes=len(plan) * dirs.shape[0],
        witness={"x": x.tolist(), "eps": eps, "direction": results[j]["direction"]},
        seed=seed,
        failures=sum(r["failures"] for r in results),
        certificates=certs,
    )


@dataclass
class SurjectivityReport:
    min_singular_value: float
    witness: list[float]
    samples: int
    seed: int
    note: str = "numerical indicator for surjective derivatives, not a proof"

    def to_dict(self) -> dict[str, Any]:
        return {
            "min_singular_value": self.min_singular_value,
            "witness": self.witness,
            "samples": self.samples,
            "seed": self.seed,
            "note": self.note,
        }


def derivative_surjectivity_diagnostic(m: MapSpec, samples: int = 2000, seed: int = 0) -> SurjectivityReport:
    pts = _base_points(m, samples, seed, tag=81)
    s = np.linalg.svd(m.jac(pts), compute_uv=False)
    smin = s[:, min(m.codomain_space.dim, m.domain_space.dim) - 1]
    if m.codomain_space.dim > m.domain_space.dim:
        smin = np.zeros_like(smin)
    j = int(np.argmin(smin))
    return SurjectivityReport(float(smin[j]), pts[j].tolist(), samples, seed)
