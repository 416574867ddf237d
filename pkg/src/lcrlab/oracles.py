"""Brute-force and closed-form ground truths, built on different algorithms than the estimators.

The grid oracle rasterizes a planar ball, maps the grid forward and compares
the area of the convex hull of the image points with the area the dilated
image points actually cover. The shear oracles are closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy.spatial import cKDTree

from .errors import DimensionError, LabError
from .maps import MapSpec
from .spaces import Ball, norm


def monotone_chain(points: np.ndarray) -> np.ndarray:
    """Convex hull vertices in counter-clockwise order (Andrew's monotone chain)."""
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[np.ndarray] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[np.ndarray] = []
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def polygon_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def in_convex_polygon(poly: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Membership in a counter-clockwise convex polygon (boundary counts as inside)."""
    inside = np.ones(len(pts), dtype=bool)
    nxt = np.roll(poly, -1, axis=0)
    for a, b in zip(poly, nxt):
        c = (b[0] - a[0]) * (pts[:, 1] - a[1]) - (b[1] - a[1]) * (pts[:, 0] - a[0])
        inside &= c >= -1e-12
    return inside


@dataclass
class GridOracleResult:
    verdict: str
    hull_area: float
    covered_area: float
    resolution: int
    margin: float
    witness: list[float] | None = None
    witness_gap: float = 0.0

    @property
    def threshold(self) -> float:
        return 3.0 / self.resolution

    def to_dict(self) -> dict[str, Any]:
        return {
            "verdict": self.verdict,
            "hull_area": self.hull_area,
            "covered_area": self.covered_area,
            "resolution": self.resolution,
            "margin": self.margin,
            "threshold": self.threshold,
            "witness": self.witness,
            "witness_gap": self.witness_gap,
        }


def grid_convexity_oracle_2d(m: MapSpec, ball: Ball, resolution: int = 256) -> GridOracleResult:
    """Area test of convexity of ``f(ball)`` for planar maps.

    The ball is sampled on a ``resolution x resolution`` grid and mapped
    forward. Each image point covers a disk of one mapped grid cell (cell
    size times the largest Jacobian singular value on the ball). The hull of
    the image points is rasterized on a grid of the same resolution; hull
    raster points outside every disk are uncovered. ``margin`` is the
    uncovered fraction of the hull area, and the verdict is non-convex iff
    it exceeds ``3 / resolution``.
    """
    if ball.dim != 2 or m.codomain_space.dim != 2:
        raise DimensionError("grid oracle needs a planar map")
    if resolution < 64:
        raise LabError("resolution must be at least 64")
    h = 2.0 * ball.radius / resolution
    g = ball.radius * (2.0 * (np.arange(resolution) + 0.5) / resolution - 1.0)
    G = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1).reshape(-1, 2) + ball.c
    G = G[ball.contains(G)]
    th = 2 * np.pi * np.arange(4 * resolution) / (4 * resolution)
    u = np.column_stack([np.cos(th), np.sin(th)])
    rim = ball.c + ball.radius * u / norm(ball.space, u)[:, None]
    pre = np.vstack([G, rim])
    img = m.f(pre)

    smax = float(np.max(np.linalg.svd(m.jac(pre), compute_uv=False)[:, 0]))
    rho = h * smax

    hull = monotone_chain(img)
    hull_area = polygon_area(hull)
    lo = hull.min(axis=0)
    hi = hull.max(axis=0)
    gx = lo[0] + (hi[0] - lo[0]) * (np.arange(resolution) + 0.5) / resolution
    gy = lo[1] + (hi[1] - lo[1]) * (np.arange(resolution) + 0.5) / resolution
    R = np.stack(np.meshgrid(gx, gy, indexing="ij"), axis=-1).reshape(-1, 2)
    R = R[in_convex_polygon(hull, R)]
    dist, _ = cKDTree(img).query(R)
    uncovered = dist > rho
    frac = float(np.mean(uncovered)) if len(R) else 0.0
    covered_area = hull_area * (1.0 - frac)
    witness = None
    gap = 0.0
    if np.any(uncovered):
        j = int(np.argmax(dist))
        witness = R[j].tolist()
        gap = float(dist[j])
    verdict = "non_convex" if frac > 3.0 / resolution else "convex"
    return GridOracleResult(verdict, hull_area, covered_area, resolution, frac, witness, gap)


def shear_lcr_exact(k: float) -> float:
    """Convexity threshold ``1/k`` of Euclidean disk images under the parabolic shear.

    The image of the eps-disk lies between ``(k/2)u^2 -+ sqrt(eps^2 - u^2)``;
    the upper curve has second derivative ``k - eps^2 / (eps^2 - u^2)^{3/2}``,
    which is nonpositive for all ``|u| < eps`` iff ``eps <= 1/k`` (worst at u = 0).
    """
    if not (k > 0 and math.isfinite(k)):
        raise LabError(f"k must be positive, got {k!r}")
    return 1.0 / k


def shear_upper_boundary(k: float, eps: float, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    return 0.5 * k * u * u + np.sqrt(np.maximum(eps * eps - u * u, 0.0))


def shear_dent_depth(k: float, eps: float) -> float:
    """Height of the chord over the upper boundary's dip at ``u = 0``: ``(k/2)(eps - 1/k)^2`` past the threshold."""
    if eps <= 1.0 / k:
        return 0.0
    return 0.5 * k * (eps - 1.0 / k) ** 2


@dataclass
class LinfWitness:
    a: list[float]
    b: list[float]
    preimages: list[list[float]]
    midpoint: list[float]
    tau: float
    margin: float
    distance: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "a": self.a,
            "b": self.b,
            "preimages": self.preimages,
            "midpoint": self.midpoint,
            "tau": self.tau,
            "margin": self.margin,
            "distance": self.distance,
        }


def shear_linf_witness(k: float, eps: float) -> LinfWitness:
    """Midpoint witness of non-convexity for the shear image of the max-norm eps-square.

    The image's upper boundary is ``eps + (k/2)u^2``. The chord from
    ``f(-eps, eps(1 - tau))`` to ``f(eps, eps(1 - tau))`` has its midpoint at
    height ``eps(1 - tau) + (k/2)eps^2``, above the boundary value ``eps`` at
    ``u = 0`` by ``margin = (k/2)eps^2 - tau eps >= (k/4)eps^2``. ``distance``
    is the max-norm distance from the midpoint to the image, the smallest
    ``s`` with ``s = margin - (k/2)s^2``.
    """
    if not (k > 0 and eps > 0):
        raise LabError("k and eps must be positive")
    tau = min(0.5, k * eps / 4.0)
    x2 = eps * (1.0 - tau)
    pa = np.array([-eps, x2])
    pb = np.array([eps, x2])
    lift = 0.5 * k * eps * eps
    a = np.array([-eps, x2 + lift])
    b = np.array([eps, x2 + lift])
    mid = 0.5 * (a + b)
    margin = lift - tau * eps
    dist = (math.sqrt(1.0 + 2.0 * k * margin) - 1.0) / k
    return LinfWitness(a.tolist(), b.tolist(), [pa.tolist(), pb.tolist()], mid.tolist(), tau, margin, dist)


__all__ = [
    "GridOracleResult",
    "LinfWitness",
    "grid_convexity_oracle_2d",
    "monotone_chain",
    "polygon_area",
    "shear_dent_depth",
    "shear_lcr_exact",
    "shear_linf_witness",
    "shear_upper_boundary",
]
