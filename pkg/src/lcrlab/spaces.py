"""Finite-dimensional normed spaces and estimators of their convexity moduli.

All norms act on the last axis, so ``norm(space, X)`` with ``X`` of shape
``(m, dim)`` returns ``m`` norms. Estimators of infima (``delta_estimate``,
``conv2_estimate``) minimize over sampled pairs; their values are upper bounds
of the true infimum and carry the bias tag ``"upper-bound-of-infimum"``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from ._util import nested_draw, pattern_search, prefix_records
from .errors import DescriptorError, DimensionError, LabError

KINDS = ("euclidean", "lp", "l1", "linf", "weighted_lp")

UPPER_BOUND_OF_INFIMUM = "upper-bound-of-infimum"

# Pairs closer than this are never divided by.
DEGENERATE_SEPARATION = 1e-10
# Pairs closer than this are skipped by the 2-convexity estimator. Below it the
# rounding error of 1 - ||(x+y)/2|| (about 1e-16) divided by ||x-y||^2 swamps
# the ratio.
MIN_SEPARATION = 1e-4
# Relative slack on the constraint ||x - y|| >= t, so that antipodal pairs
# count for t = 2 despite rounding in the norm.
SEPARATION_SLACK = 1e-12


@dataclass(frozen=True)
class NormedSpace:
    dim: int
    kind: str = "euclidean"
    p: float | None = None
    weights: tuple[float, ...] | None = None
    label: str = ""

    def __post_init__(self):
        if not isinstance(self.dim, (int, np.integer)) or self.dim < 1:
            raise DescriptorError("space.dim", f"must be a positive integer, got {self.dim!r}")
        if self.kind not in KINDS:
            raise DescriptorError("space.kind", f"unknown kind {self.kind!r}; expected one of {KINDS}")
        if self.kind in ("lp", "weighted_lp"):
            if self.p is None or not float(self.p) > 1.0 or not math.isfinite(float(self.p)):
                raise DescriptorError("space.p", f"must be a finite real > 1, got {self.p!r}")
        if self.kind == "weighted_lp":
            if self.weights is None or len(self.weights) != self.dim:
                raise DescriptorError("space.weights", f"need {self.dim} positive weights")
            if any(not (w > 0 and math.isfinite(w)) for w in self.weights):
                raise DescriptorError("space.weights", "weights must be positive and finite")
            object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if not self.label:
            object.__setattr__(self, "label", self._default_label())

    def _default_label(self) -> str:
        if self.kind == "euclidean":
            return f"l2^{self.dim}"
        if self.kind == "l1":
            return f"l1^{self.dim}"
        if self.kind == "linf":
            return f"linf^{self.dim}"
        if self.kind == "lp":
            return f"l{self.p:g}^{self.dim}"
        return f"weighted l{self.p:g}^{self.dim}"

    @property
    def is_euclidean(self) -> bool:
        return self.kind == "euclidean" or (self.kind == "lp" and self.p == 2.0)

    def norm(self, x) -> np.ndarray | float:
        return norm(self, x)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind, "dim": int(self.dim)}
        if self.p is not None:
            out["p"] = float(self.p)
        if self.weights is not None:
            out["weights"] = list(self.weights)
        return out

    @classmethod
    def from_dict(cls, d: Any, path: str = "space") -> "NormedSpace":
        if not isinstance(d, dict):
            raise DescriptorError(path, "must be a JSON object")
        unknown = set(d) - {"kind", "dim", "p", "weights", "label"}
        if unknown:
            raise DescriptorError(f"{path}.{sorted(unknown)[0]}", "unknown field")
        if "kind" not in d:
            raise DescriptorError(f"{path}.kind", "missing")
        if "dim" not in d:
            raise DescriptorError(f"{path}.dim", "missing")
        dim = d["dim"]
        if isinstance(dim, bool) or not isinstance(dim, int):
            raise DescriptorError(f"{path}.dim", f"must be a positive integer, got {dim!r}")
        p = d.get("p")
        if p is not None and (isinstance(p, bool) or not isinstance(p, (int, float))):
            raise DescriptorError(f"{path}.p", f"must be a number, got {p!r}")
        weights = d.get("weights")
        if weights is not None:
            if not isinstance(weights, list) or not all(
                isinstance(w, (int, float)) and not isinstance(w, bool) for w in weights
            ):
                raise DescriptorError(f"{path}.weights", "must be a list of numbers")
            weights = tuple(float(w) for w in weights)
        try:
            return cls(
                dim=dim,
                kind=d["kind"],
                p=None if p is None else float(p),
                weights=weights,
                label=str(d.get("label", "")),
            )
        except DescriptorError as exc:
            raise DescriptorError(exc.field.replace("space", path, 1), str(exc).split(": ", 1)[1]) from None


def euclidean(dim: int) -> NormedSpace:
    return NormedSpace(dim, "euclidean")


def lp(dim: int, p: float) -> NormedSpace:
    return NormedSpace(dim, "lp", p=float(p))


def l1(dim: int) -> NormedSpace:
    return NormedSpace(dim, "l1")


def linf(dim: int) -> NormedSpace:
    return NormedSpace(dim, "linf")


def weighted_lp(dim: int, p: float, weights: Sequence[float]) -> NormedSpace:
    return NormedSpace(dim, "weighted_lp", p=float(p), weights=tuple(weights))


def norm(space: NormedSpace, x) -> np.ndarray | float:
    """Norm of ``x`` (or of each row of a batch) in ``space``."""
    a = np.asarray(x, dtype=float)
    if a.ndim == 0 or a.shape[-1] != space.dim:
        raise DimensionError(f"expected vectors of dimension {space.dim}, got shape {a.shape}")
    k = space.kind
    if k == "euclidean":
        out = np.sqrt(np.sum(a * a, axis=-1))
    elif k == "l1":
        out = np.sum(np.abs(a), axis=-1)
    elif k == "linf":
        out = np.max(np.abs(a), axis=-1)
    else:
        p = space.p
        w = 1.0 if space.weights is None else np.asarray(space.weights)
        if p == 2.0:
            out = np.sqrt(np.sum(w * a * a, axis=-1))
        else:
            # scale by the max magnitude to avoid under/overflow in |x|^p
            m = np.max(np.abs(a), axis=-1, keepdims=True)
            safe = np.where(m > 0, m, 1.0)
            out = m[..., 0] * np.sum(w * np.abs(a / safe) ** p, axis=-1) ** (1.0 / p)
    if np.ndim(out) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class Ball:
    space: NormedSpace
    center: tuple[float, ...]
    radius: float

    def __post_init__(self):
        c = tuple(float(v) for v in np.asarray(self.center, dtype=float).ravel())
        if len(c) != self.space.dim:
            raise DimensionError(f"center has dimension {len(c)}, space has {self.space.dim}")
        object.__setattr__(self, "center", c)
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise LabError(f"ball radius must be positive, got {self.radius!r}")
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def c(self) -> np.ndarray:
        return np.asarray(self.center)

    @property
    def dim(self) -> int:
        return self.space.dim

    def distance_from_center(self, x) -> np.ndarray | float:
        return norm(self.space, np.asarray(x, dtype=float) - self.c)

    def contains(self, x, margin: float = 0.0):
        """``radius - ||x - center|| >= margin`` (closed ball for margin 0)."""
        return self.radius - self.distance_from_center(x) >= margin

    def contains_ball(self, other: "Ball", tol: float = 1e-12) -> bool:
        return bool(self.distance_from_center(other.c) + other.radius <= self.radius + tol)

    def sample(self, count: int, seed: int, mode: str = "interior", tag: int = 0) -> np.ndarray:
        return self.c + sample_ball(self.space, self.radius, count, seed, mode, tag=tag)

    def to_dict(self) -> dict[str, Any]:
        return {"center": list(self.center), "radius": self.radius}


def clamp_to_radius(space: NormedSpace, X: np.ndarray, radius: float = 1.0) -> np.ndarray:
    """Scale rows whose computed norm exceeds ``radius`` back onto the closed ball.

    Rounding can leave ``norm(x)`` one ulp above the radius after normalizing;
    a second nudge guarantees ``norm(x) <= radius`` as computed.
    """
    X = np.array(X, dtype=float)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    n = norm(space, X)
    over = n > radius
    if np.any(over):
        X[over] *= (radius / n[over])[:, None]
        n2 = norm(space, X[over])
        still = n2 > radius
        if np.any(still):
            idx = np.flatnonzero(over)[still]
            X[idx] *= 1.0 - 4 * np.finfo(float).eps
    return X[0] if single else X


def _directions(space: NormedSpace, g: np.ndarray) -> np.ndarray:
    """Scale Gaussian directions onto the unit sphere of ``space``."""
    n = norm(space, g)
    bad = n == 0
    if np.any(bad):
        g = g.copy()
        g[bad, 0] = 1.0
        n = norm(space, g)
    return g / n[:, None]


def sample_ball(
    space: NormedSpace,
    radius: float,
    count: int,
    seed: int,
    mode: str = "interior",
    *,
    tag: int = 0,
) -> np.ndarray:
    """Deterministic samples of the ball (``interior``) or sphere (``sphere``) of ``radius``.

    Directions are isotropic Gaussians scaled to the norm sphere; interior points
    use the radial factor ``u**(1/dim)``. Results are nested in ``count``.
    """
    if count <= 0:
        raise LabError("count must be positive")
    if mode not in ("interior", "sphere"):
        raise LabError(f"unknown sampling mode {mode!r}")
    d = space.dim

    def draw(rng: np.random.Generator, n: int) -> np.ndarray:
        g = rng.standard_normal((n, d))
        u = rng.random(n)
        return np.concatenate([g, u[:, None]], axis=1)

    raw = nested_draw(seed, 1000 + tag, count, draw)
    dirs = _directions(space, raw[:, :d])
    if mode == "sphere":
        return radius * dirs
    r = radius * raw[:, d] ** (1.0 / d)
    return clamp_to_radius(space, r[:, None] * dirs, radius)


# ---------------------------------------------------------------------------
# modulus of convexity


@dataclass
class ModulusCurve:
    t_grid: list[float]
    values: list[float | None]
    samples: int
    seed: int
    witnesses: list[tuple[list[float], list[float]] | None] = field(default_factory=list)
    absent: list[float] = field(default_factory=list)
    bias: str = UPPER_BOUND_OF_INFIMUM

    def to_dict(self) -> dict[str, Any]:
        return {
            "t_grid": list(self.t_grid),
            "values": list(self.values),
            "absent": list(self.absent),
            "witnesses": [None if w is None else [list(w[0]), list(w[1])] for w in self.witnesses],
            "samples": self.samples,
            "seed": self.seed,
            "bias": self.bias,
        }


def delta_hilbert_exact(t: float) -> float:
    """Modulus of convexity of a Hilbert space, ``1 - sqrt(1 - (t/2)^2)``."""
    if not 0.0 <= t <= 2.0:
        raise LabError(f"t must lie in [0, 2], got {t!r}")
    return 1.0 - math.sqrt(1.0 - (t / 2.0) ** 2)


def _local_partner(space: NormedSpace, X: np.ndarray, g: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Points ``X + s * v`` with ``v`` a unit direction, pulled back onto the sphere of ``X``."""
    v = _directions(space, g)
    Y = X + s[:, None] * v
    nx = norm(space, X)
    ny = norm(space, Y)
    ny = np.where(ny > 0, ny, 1.0)
    return Y * (nx / ny)[:, None]


def _pair_pool(space: NormedSpace, samples: int, seed: int, antipodal: bool) -> tuple[np.ndarray, np.ndarray]:
    """Candidate pairs in the unit ball, nested in ``samples``.

    Four families: random sphere chords, local sphere chords at log-uniform
    separation in [MIN_SEPARATION, 2], random interior pairs, and (optionally)
    antipodal pairs, which are the only way to reach separation 2.
    """
    d = space.dim
    n_local = max(1, samples // 2)
    n_chord = max(1, samples // 4)
    n_inner = max(1, samples - n_local - n_chord)

    def draw_local(rng, n):
        return np.concatenate([rng.standard_normal((n, 2 * d)), rng.random((n, 1))], axis=1)

    loc = nested_draw(seed, 11, n_local, draw_local)
    X1 = _directions(space, loc[:, :d])
    s = np.exp(math.log(MIN_SEPARATION) + loc[:, 2 * d] * (math.log(2.0) - math.log(MIN_SEPARATION)))
    Y1 = _local_partner(space, X1, loc[:, d : 2 * d], s)

    X2 = sample_ball(space, 1.0, n_chord, seed, "sphere", tag=12)
    Y2 = sample_ball(space, 1.0, n_chord, seed, "sphere", tag=13)
    X3 = sample_ball(space, 1.0, n_inner, seed, "interior", tag=14)
    Y3 = sample_ball(space, 1.0, n_inner, seed, "interior", tag=15)
    xs = [X1, X2, X3]
    ys = [Y1, Y2, Y3]
    if antipodal:
        X4 = sample_ball(space, 1.0, n_chord, seed, "sphere", tag=16)
        xs.append(X4)
        ys.append(-X4)
    X = clamp_to_radius(space, np.concatenate(xs))
    Y = clamp_to_radius(space, np.concatenate(ys))
    return X, Y


def delta_estimate(space: NormedSpace, t_grid: Sequence[float], samples: int, seed: int) -> ModulusCurve:
    """Upper estimate of the modulus of convexity on ``t_grid`` from sampled ball pairs."""
    ts = [float(t) for t in t_grid]
    if not ts or any(not (0.0 < t <= 2.0) for t in ts):
        raise LabError("t_grid must be a nonempty subset of (0, 2]")
    if samples < 1:
        raise LabError("samples must be positive")
    X, Y = _pair_pool(space, samples, seed, antipodal=True)
    sep = norm(space, X - Y)
    gap = np.clip(1.0 - norm(space, 0.5 * (X + Y)), 0.0, 1.0)

    raw: list[float | None] = []
    wit: list[tuple[list[float], list[float]] | None] = []
    for t in ts:
        ok = sep >= t * (1.0 - SEPARATION_SLACK)
        if not np.any(ok):
            raw.append(None)
            wit.append(None)
            continue
        idx = np.flatnonzero(ok)
        j = idx[int(np.argmin(gap[idx]))]
        raw.append(float(gap[j]))
        wit.append((X[j].tolist(), Y[j].tolist()))

    # running minimum from the right: the true modulus is nondecreasing
    order = np.argsort(ts, kind="stable")
    values: list[float | None] = list(raw)
    best = math.inf
    for i in order[::-1]:
        v = values[i]
        if v is None:
            continue
        best = min(best, v)
        values[i] = best
    absent = [ts[i] for i, v in enumerate(values) if v is None]
    return ModulusCurve(ts, values, samples, seed, wit, absent)


# ---------------------------------------------------------------------------
# 2-convexity number


@dataclass
class Conv2Estimate:
    value: float
    witness: tuple[list[float], list[float]]
    samples: int
    seed: int
    refined: bool = False
    bias: str = UPPER_BOUND_OF_INFIMUM

    def to_dict(self) -> dict[str, Any]:
        return {
            "value": self.value,
            "witness": [list(self.witness[0]), list(self.witness[1])],
            "samples": self.samples,
            "seed": self.seed,
            "refined": self.refined,
            "bias": self.bias,
        }


def conv2_ratio(space: NormedSpace, x, y, min_separation: float = DEGENERATE_SEPARATION):
    """``(1 - ||(x+y)/2||) / ||x - y||^2``; ``nan`` where ``||x - y|| < min_separation``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    sep = np.asarray(norm(space, x - y), dtype=float)
    num = np.maximum(1.0 - np.asarray(norm(space, 0.5 * (x + y))), 0.0)
    safe = np.where(sep >= min_separation, sep, 1.0)
    out = np.where(sep >= min_separation, num / (safe * safe), np.nan)
    return float(out) if out.ndim == 0 else out


def conv2_estimate(space: NormedSpace, samples: int, seed: int, refine: bool = True) -> Conv2Estimate:
    """Upper estimate of the 2-convexity number over pairs of the closed unit ball.

    With ``refine`` every record pair (one whose ratio beats all earlier
    samples) is polished by compass search over both endpoints (steps 0.1
    down to 1e-6, projected back into the ball). Refining records rather than
    only the best pair keeps the estimate monotone under sample doubling.
    """
    if samples < 2:
        raise LabError("samples must be at least 2")
    X, Y = _pair_pool(space, samples, seed, antipodal=False)
    r = conv2_ratio(space, X, Y, min_separation=MIN_SEPARATION)
    r = np.where(np.isnan(r), np.inf, r)
    j = int(np.argmin(r))
    if not np.isfinite(r[j]):
        raise LabError("no nondegenerate pair sampled")
    value = float(r[j])
    x, y = X[j], Y[j]

    if refine:
        d = space.dim

        def objective(Z: np.ndarray) -> np.ndarray:
            return conv2_ratio(space, Z[:, :d], Z[:, d:], min_separation=MIN_SEPARATION)

        def project(Z: np.ndarray) -> np.ndarray:
            Z = Z.copy()
            Z[:, :d] = clamp_to_radius(space, Z[:, :d])
            Z[:, d:] = clamp_to_radius(space, Z[:, d:])
            return Z

        for j in prefix_records(-r):
            z, fz = pattern_search(objective, np.concatenate([X[j], Y[j]]), step=0.1, step_min=1e-6, project=project)
            if fz < value:
                x, y = z[:d], z[d:]
                value = float(conv2_ratio(space, x, y))
    return Conv2Estimate(value, (x.tolist(), y.tolist()), samples, seed, refined=refine)


@dataclass(frozen=True)
class PowerTypeDiagnostic:
    verdict: str
    value: float
    threshold: float
    note: str = "sampling diagnostic, not a proof of power type 2"

    def to_dict(self) -> dict[str, Any]:
        return {"verdict": self.verdict, "value": self.value, "threshold": self.threshold, "note": self.note}


def has_power_type_2(estimate: Conv2Estimate | float, threshold: float) -> PowerTypeDiagnostic:
    """Classify a 2-convexity estimate as plausibly positive, plausibly zero, or inconclusive."""
    if not threshold > 0:
        raise LabError("threshold must be positive")
    value = estimate.value if isinstance(estimate, Conv2Estimate) else float(estimate)
    if value > threshold:
        verdict = "plausibly-positive"
    elif value < threshold / 10:
        verdict = "plausibly-zero"
    else:
        verdict = "inconclusive"
    return PowerTypeDiagnostic(verdict, value, float(threshold))


__all__ = [
    "Ball",
    "Conv2Estimate",
    "ModulusCurve",
    "NormedSpace",
    "PowerTypeDiagnostic",
    "clamp_to_radius",
    "conv2_estimate",
    "conv2_ratio",
    "delta_estimate",
    "delta_hilbert_exact",
    "euclidean",
    "has_power_type_2",
    "l1",
    "linf",
    "lp",
    "norm",
    "sample_ball",
    "weighted_lp",
]
