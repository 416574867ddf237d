"""Registry of smooth map families and their smoothness / Lipschitz estimators.

Every registry family is a polynomial map of degree at most two,

    f(x) = b + A x + Q[x, x],    Q[u, v]_i = u^T Q_i v,  Q_i symmetric,

so first and second differences have cancellation-free forms
``A h + Q[2x + h, h]`` and ``2 Q[h, h]``. The moduli of smoothness are
estimated from those forms; :func:`second_difference` keeps the literal
``f(x+h) - 2 f(x) + f(x-h)`` for cross-checking.

Sup-type estimates are maxima over samples, hence lower bounds of the true
supremum (bias tag ``"lower-bound-of-supremum"``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from ._util import nested_draw, pattern_search, prefix_records
from .errors import DescriptorError, DimensionError, DomainError, EstimationError, LabError
from .spaces import Ball, NormedSpace, clamp_to_radius, norm, sample_ball

LOWER_BOUND_OF_SUPREMUM = "lower-bound-of-supremum"

FAMILIES = ("linear", "parabolic_shear", "quadratic_perturbation", "composed")

# closed-domain membership tolerance (relative to the radius)
DOMAIN_TOL = 1e-12


# ---------------------------------------------------------------------------
# families


def _matrix(a, name: str) -> np.ndarray:
    m = np.asarray(a, dtype=float)
    if m.ndim != 2 or not np.all(np.isfinite(m)):
        raise DescriptorError(name, "must be a finite 2-D matrix")
    return m


@dataclass(frozen=True, eq=False)
class Linear:
    """``x -> A x + b``."""

    A: np.ndarray
    b: np.ndarray | None = None

    def __post_init__(self):
        A = _matrix(self.A, "map.params.A")
        b = np.zeros(A.shape[0]) if self.b is None else np.asarray(self.b, dtype=float).ravel()
        if b.shape != (A.shape[0],):
            raise DescriptorError("map.params.b", f"must have length {A.shape[0]}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    name = "linear"

    @property
    def in_dim(self) -> int:
        return self.A.shape[1]

    @property
    def out_dim(self) -> int:
        return self.A.shape[0]

    def evaluate(self, X: np.ndarray) -> np.ndarray:
        return X @ self.A.T + self.b

    def jacobian(self, X: np.ndarray) -> np.ndarray:
        return np.broadcast_to(self.A, (X.shape[0],) + self.A.shape).copy()

    def polynomial(self):
        m, n = self.A.shape
        return self.b, self.A, np.zeros((m, n, n))

    @property
    def invertible(self) -> bool:
        A = self.A
        return A.shape[0] == A.shape[1] and np.linalg.matrix_rank(A) == A.shape[0]

    def inverse(self, Y: np.ndarray) -> np.ndarray:
        return np.linalg.solve(self.A, (Y - self.b).T).T

    def params(self) -> dict[str, Any]:
        return {"A": self.A.tolist(), "b": self.b.tolist()}


@dataclass(frozen=True, eq=False)
class ParabolicShear:
    """``(x_1, ..., x_n) -> (x_1, ..., x_{n-1}, x_n + (k/2) x_1^2)``."""

    k: float
    dim: int = 2

    name = "parabolic_shear"

    def __post_init__(self):
        if not (math.isfinite(self.k) and self.k >= 0):
            raise DescriptorError("map.params.k", f"must be a finite real >= 0, got {self.k!r}")
        if self.dim < 2:
            raise DescriptorError("map.params.dim", "parabolic shear needs dimension >= 2")

    @property
    def in_dim(self) -> int:
        return self.dim

    out_dim = in_dim

    def evaluate(self, X: np.ndarray) -> np.ndarray:
        Y = X.copy()
        Y[:, -1] = X[:, -1] + 0.5 * self.k * X[:, 0] ** 2
        return Y

    def jacobian(self, X: np.ndarray) -> np.ndarray:
        J = np.broadcast_to(np.eye(self.dim), (X.shape[0], self.dim, self.dim)).copy()
        J[:, -1, 0] = self.k * X[:, 0]
        return J

    def polynomial(self):
        n = self.dim
        Q = np.zeros((n, n, n))
        Q[-1, 0, 0] = 0.5 * self.k
        return np.zeros(n), np.eye(n), Q

    invertible = True

    def inverse(self, Y: np.ndarray) -> np.ndarray:
        X = Y.copy()
        X[:, -1] = Y[:, -1] - 0.5 * self.k * Y[:, 0] ** 2
        return X

    def params(self) -> dict[str, Any]:
        return {"k": float(self.k), "dim": int(self.dim)}


@dataclass(frozen=True, eq=False)
class QuadraticPerturbation:
    """``x -> x + (x^T Q_1 x, ..., x^T Q_n x)`` with symmetric ``Q_i``."""

    Q: np.ndarray

    name = "quadratic_perturbation"

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        if Q.ndim != 3 or Q.shape[0] != Q.shape[1] or Q.shape[1] != Q.shape[2]:
            raise DescriptorError("map.params.Q", "must be a list of n symmetric n x n matrices")
        if not np.all(np.isfinite(Q)):
            raise DescriptorError("map.params.Q", "entries must be finite")
        if not np.allclose(Q, np.transpose(Q, (0, 2, 1)), rtol=0, atol=1e-12):
            raise DescriptorError("map.params.Q", "matrices must be symmetric")
        object.__setattr__(self, "Q", 0.5 * (Q + np.transpose(Q, (0, 2, 1))))

    @property
    def in_dim(self) -> int:
        return self.Q.shape[0]

    out_dim = in_dim

    def evaluate(self, X: np.ndarray) -> np.ndarray:
        return X + np.einsum("mi,kij,mj->mk", X, self.Q, X)

    def jacobian(self, X: np.ndarray) -> np.ndarray:
        n = self.in_dim
        return np.eye(n) + 2.0 * np.einsum("kij,mj->mki", self.Q, X)

    def polynomial(self):
        n = self.in_dim
        return np.zeros(n), np.eye(n), self.Q

    invertible = False

    def inverse(self, Y):
        raise LabError("quadratic_perturbation has no analytic inverse")

    def params(self) -> dict[str, Any]:
        return {"Q": self.Q.tolist()}


@dataclass(frozen=True, eq=False)
class Composed:
    """``x -> A inner(x) + b`` for an outer affine map and a registry ``inner`` family."""

    outer: Linear
    inner: Any

    name = "composed"

    def __post_init__(self):
        if self.outer.in_dim != self.inner.out_dim:
            raise DescriptorError("map.params.outer.A", f"must have {self.inner.out_dim} columns")

    @property
    def in_dim(self) -> int:
        return self.inner.in_dim

    @property
    def out_dim(self) -> int:
        return self.outer.out_dim

    def evaluate(self, X: np.ndarray) -> np.ndarray:
        return self.outer.evaluate(self.inner.evaluate(X))

    def jacobian(self, X: np.ndarray) -> np.ndarray:
        return np.einsum("ij,mjk->mik", self.outer.A, self.inner.jacobian(X))

    def polynomial(self):
        b, A, Q = self.inner.polynomial()
        M = self.outer.A
        return M @ b + self.outer.b, M @ A, np.einsum("ij,jkl->ikl", M, Q)

    @property
    def invertible(self) -> bool:
        return self.outer.invertible and bool(self.inner.invertible)

    def inverse(self, Y: np.ndarray) -> np.ndarray:
        return self.inner.inverse(self.outer.inverse(Y))

    def params(self) -> dict[str, Any]:
        return {"outer": self.outer.params(), "inner": {"family": self.inner.name, "params": self.inner.params()}}


def _family_from_dict(family: Any, params: Any, path: str, dim: int | None):
    if family not in FAMILIES:
        raise DescriptorError(f"{path}.family", f"unknown family {family!r}; expected one of {FAMILIES}")
    if not isinstance(params, dict):
        raise DescriptorError(f"{path}.params", "must be a JSON object")

    def need(key):
        if key not in params:
            raise DescriptorError(f"{path}.params.{key}", "missing")
        return params[key]

    try:
        if family == "linear":
            return Linear(np.asarray(need("A"), dtype=float), params.get("b"))
        if family == "parabolic_shear":
            k = need("k")
            if isinstance(k, bool) or not isinstance(k, (int, float)):
                raise DescriptorError(f"{path}.params.k", f"must be a number, got {k!r}")
            d = params.get("dim", dim if dim is not None else 2)
            if isinstance(d, bool) or not isinstance(d, int):
                raise DescriptorError(f"{path}.params.dim", f"must be an integer, got {d!r}")
            return ParabolicShear(float(k), d)
        if family == "quadratic_perturbation":
            return QuadraticPerturbation(np.asarray(need("Q"), dtype=float))
        outer = need("outer")
        inner = need("inner")
        if not isinstance(outer, dict) or not isinstance(inner, dict):
            raise DescriptorError(f"{path}.params", "outer and inner must be JSON objects")
        if "A" not in outer:
            raise DescriptorError(f"{path}.params.outer.A", "missing")
        inner_fam = _family_from_dict(inner.get("family"), inner.get("params", {}), f"{path}.params.inner", dim)
        if isinstance(inner_fam, Composed):
            raise DescriptorError(f"{path}.params.inner.family", "nested composition is not supported")
        return Composed(Linear(np.asarray(outer["A"], dtype=float), outer.get("b")), inner_fam)
    except DescriptorError as exc:
        if exc.field.startswith("map."):
            raise DescriptorError(path + exc.field[3:], str(exc).split(": ", 1)[1]) from None
        raise
    except (TypeError, ValueError) as exc:
        raise DescriptorError(f"{path}.params", str(exc)) from None


# ---------------------------------------------------------------------------
# MapSpec


@dataclass(frozen=True, eq=False)
class MapSpec:
    family: Any
    domain: Ball
    codomain_space: NormedSpace

    def __post_init__(self):
        if self.family.in_dim != self.domain.dim:
            raise DimensionError(f"map expects dimension {self.family.in_dim}, domain has {self.domain.dim}")
        if self.family.out_dim != self.codomain_space.dim:
            raise DimensionError(
                f"map produces dimension {self.family.out_dim}, codomain has {self.codomain_space.dim}"
            )

    @property
    def domain_space(self) -> NormedSpace:
        return self.domain.space

    @property
    def name(self) -> str:
        return self.family.name

    @property
    def has_analytic_derivative(self) -> bool:
        return True

    @property
    def has_inverse(self) -> bool:
        return bool(self.family.invertible)

    def _batch(self, x, dim: int) -> tuple[np.ndarray, bool]:
        a = np.asarray(x, dtype=float)
        single = a.ndim == 1
        if single:
            a = a[None, :]
        if a.ndim != 2 or a.shape[1] != dim:
            raise DimensionError(f"expected vectors of dimension {dim}, got shape {np.shape(x)}")
        return a, single

    def in_domain(self, X) -> np.ndarray:
        X, _ = self._batch(X, self.domain.dim)
        return self.domain.distance_from_center(X) <= self.domain.radius * (1.0 + DOMAIN_TOL)

    def evaluate(self, x) -> np.ndarray:
        X, single = self._batch(x, self.domain.dim)
        if not np.all(self.in_domain(X)):
            raise DomainError("point outside the closed domain ball")
        Y = self.family.evaluate(X)
        return Y[0] if single else Y

    def f(self, X: np.ndarray) -> np.ndarray:
        """Unchecked batch evaluation (callers guarantee domain membership)."""
        return self.family.evaluate(np.atleast_2d(np.asarray(X, dtype=float)))

    def jac(self, X: np.ndarray) -> np.ndarray:
        return self.family.jacobian(np.atleast_2d(np.asarray(X, dtype=float)))

    def inverse(self, y) -> np.ndarray:
        if not self.has_inverse:
            raise LabError(f"{self.name} map has no analytic inverse")
        Y, single = self._batch(y, self.codomain_space.dim)
        X = self.family.inverse(Y)
        return X[0] if single else X

    def polynomial(self):
        return self.family.polynomial()

    def difference(self, order: int, X: np.ndarray, H: np.ndarray) -> np.ndarray:
        """Cancellation-free first or second difference for a batch of (x, h)."""
        _, A, Q = self.polynomial()
        if order == 1:
            return H @ A.T + np.einsum("mi,kij,mj->mk", 2.0 * X + H, Q, H)
        if order == 2:
            return 2.0 * np.einsum("mi,kij,mj->mk", H, Q, H)
        raise LabError("only orders 1 and 2 are supported")

    def to_dict(self) -> dict[str, Any]:
        return {
            "family": self.name,
            "params": self.family.params(),
            "domain": self.domain.to_dict(),
        }

    @classmethod
    def from_dict(
        cls,
        d: Any,
        space: NormedSpace,
        codomain: NormedSpace | None = None,
        path: str = "map",
    ) -> "MapSpec":
        if not isinstance(d, dict):
            raise DescriptorError(path, "must be a JSON object")
        unknown = set(d) - {"family", "params", "domain"}
        if unknown:
            raise DescriptorError(f"{path}.{sorted(unknown)[0]}", "unknown field")
        if "family" not in d:
            raise DescriptorError(f"{path}.family", "missing")
        fam = _family_from_dict(d["family"], d.get("params", {}), path, space.dim)
        dom = d.get("domain", {"center": [0.0] * space.dim, "radius": 1.0})
        if not isinstance(dom, dict):
            raise DescriptorError(f"{path}.domain", "must be a JSON object")
        center = dom.get("center", [0.0] * space.dim)
        radius = dom.get("radius", 1.0)
        if not isinstance(center, list) or len(center) != space.dim:
            raise DescriptorError(f"{path}.domain.center", f"must be a list of {space.dim} numbers")
        if isinstance(radius, bool) or not isinstance(radius, (int, float)) or not radius > 0:
            raise DescriptorError(f"{path}.domain.radius", f"must be a positive number, got {radius!r}")
        if fam.in_dim != space.dim:
            raise DescriptorError(f"{path}.params", f"map input dimension {fam.in_dim} != space dimension {space.dim}")
        if codomain is None:
            if fam.out_dim == space.dim:
                codomain = space
            else:
                codomain = NormedSpace(fam.out_dim, space.kind, space.p, None)
        if codomain.dim != fam.out_dim:
            raise DescriptorError("codomain.dim", f"map output dimension is {fam.out_dim}")
        return cls(fam, Ball(space, center, float(radius)), codomain)


def linear_map(A, b=None, *, space: NormedSpace | None = None, radius: float = 1.0, center=None,
               codomain: NormedSpace | None = None) -> MapSpec:
    fam = Linear(np.asarray(A, dtype=float), b)
    space = space or NormedSpace(fam.in_dim)
    codomain = codomain or (space if fam.out_dim == space.dim else NormedSpace(fam.out_dim))
    return MapSpec(fam, Ball(space, center if center is not None else [0.0] * space.dim, radius), codomain)


def shear_map(k: float, *, space: NormedSpace | None = None, radius: float = 1.0, center=None,
              codomain: NormedSpace | None = None) -> MapSpec:
    space = space or NormedSpace(2)
    fam = ParabolicShear(float(k), space.dim)
    return MapSpec(fam, Ball(space, center if center is not None else [0.0] * space.dim, radius), codomain or space)


def quadratic_map(Q, *, space: NormedSpace | None = None, radius: float = 1.0, center=None,
                  codomain: NormedSpace | None = None) -> MapSpec:
    fam = QuadraticPerturbation(np.asarray(Q, dtype=float))
    space = space or NormedSpace(fam.in_dim)
    return MapSpec(fam, Ball(space, center if center is not None else [0.0] * space.dim, radius), codomain or space)


def composed_map(A, inner: MapSpec, b=None, *, codomain: NormedSpace | None = None) -> MapSpec:
    fam = Composed(Linear(np.asarray(A, dtype=float), b), inner.family)
    codomain = codomain or (inner.codomain_space if fam.out_dim == inner.codomain_space.dim else NormedSpace(fam.out_dim))
    return MapSpec(fam, inner.domain, codomain)


# ---------------------------------------------------------------------------
# pointwise operations


def evaluate(m: MapSpec, x) -> np.ndarray:
    return m.evaluate(x)


def second_difference(m: MapSpec, x, h) -> np.ndarray:
    """``f(x+h) - 2 f(x) + f(x-h)``, requiring both ``x + h`` and ``x - h`` in the domain."""
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    if x.shape != (m.domain.dim,) or h.shape != (m.domain.dim,):
        raise DimensionError("x and h must have the domain dimension")
    ends = np.stack([x + h, x - h])
    if not np.all(m.in_domain(ends)):
        raise DomainError("segment [x-h, x+h] leaves the domain")
    fp, fm = m.f(ends)
    return fp - 2.0 * m.f(x[None, :])[0] + fm


def derivative(m: MapSpec, x) -> np.ndarray:
    """Analytic Jacobian of the map at ``x``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (m.domain.dim,):
        raise DimensionError("x must have the domain dimension")
    if not m.in_domain(x)[0]:
        raise DomainError("point outside the closed domain ball")
    return m.jac(x[None, :])[0]


def derivative_fd(m: MapSpec, x, step: float = 1e-5) -> np.ndarray:
    """Central finite-difference Jacobian (columns ``(f(x+s e_j) - f(x-s e_j)) / 2s``)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    E = step * np.eye(n)
    return ((m.f(x + E) - m.f(x - E)) / (2.0 * step)).T


# ---------------------------------------------------------------------------
# operator norms


def operator_norm(
    T: np.ndarray,
    X: NormedSpace,
    Y: NormedSpace,
    samples: int = 512,
    seed: int = 0,
) -> tuple[float, np.ndarray]:
    """``sup_{||u||_X <= 1} ||T u||_Y`` and a maximizing direction.

    Exact for Euclidean pairs (largest singular value), for ``X = l1``
    (best column) and for ``X = linf`` with ``dim <= 12`` (best vertex).
    Otherwise the max over sampled sphere directions polished by compass
    ascent, which is a lower bound.
    """
    T = np.asarray(T, dtype=float)
    n = X.dim
    if X.is_euclidean and Y.is_euclidean and X.kind == "euclidean" and Y.kind == "euclidean":
        _, s, vt = np.linalg.svd(T)
        return float(s[0]), vt[0]
    if X.kind == "l1":
        cand = np.vstack([np.eye(n), -np.eye(n)])
    elif X.kind == "linf" and n <= 12:
        grid = np.array(np.meshgrid(*([[-1.0, 1.0]] * n), indexing="ij")).reshape(n, -1).T
        cand = grid
    else:
        cand = None
    if cand is not None:
        vals = norm(Y, cand @ T.T)
        j = int(np.argmax(vals))
        return float(vals[j]), cand[j]

    U = np.vstack([np.eye(n) / norm(X, np.eye(n))[:, None], sample_ball(X, 1.0, samples, seed, "sphere", tag=77)])
    vals = norm(Y, U @ T.T)
    j = int(np.argmax(vals))

    def neg(Z):
        nz = norm(X, Z)
        ok = nz > 0
        out = np.full(Z.shape[0], np.inf)
        out[ok] = -norm(Y, (Z[ok] / nz[ok, None]) @ T.T)
        return out

    u, fu = pattern_search(neg, U[j], step=0.1, step_min=1e-9)
    u = u / norm(X, u)
    best = max(float(vals[j]), -fu)
    return best, (u if -fu >= vals[j] else U[j])


def _batch_operator_norms(Ts: np.ndarray, X: NormedSpace, Y: NormedSpace, seed: int) -> np.ndarray:
    if X.kind == "euclidean" and Y.kind == "euclidean":
        return np.linalg.svd(Ts, compute_uv=False)[:, 0]
    U = np.vstack([np.eye(X.dim) / norm(X, np.eye(X.dim))[:, None], sample_ball(X, 1.0, 64, seed, "sphere", tag=78)])
    if X.kind == "l1":
        U = np.vstack([np.eye(X.dim), -np.eye(X.dim)])
    elif X.kind == "linf" and X.dim <= 12:
        U = np.array(np.meshgrid(*([[-1.0, 1.0]] * X.dim), indexing="ij")).reshape(X.dim, -1).T
    V = np.einsum("mij,uj->mui", Ts, U)
    return np.max(norm(Y, V), axis=1)


# ---------------------------------------------------------------------------
# estimates


@dataclass
class ConstantEstimate:
    name: str
    value: float
    bias: str
    witness: dict[str, Any]
    samples: int
    seed: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "value": self.value,
            "bias": self.bias,
            "witness": self.witness,
            "samples": self.samples,
            "seed": self.seed,
        }


@dataclass
class SmoothnessEstimate:
    order: int
    t_grid: list[float]
    omega_values: list[float]
    lip_constant: float
    witness: dict[str, Any]
    samples: int
    seed: int
    bias: str = LOWER_BOUND_OF_SUPREMUM

    def to_dict(self) -> dict[str, Any]:
        return {
            "order": self.order,
            "t_grid": list(self.t_grid),
            "omega_values": list(self.omega_values),
            "lip_constant": self.lip_constant,
            "witness": self.witness,
            "samples": self.samples,
            "seed": self.seed,
            "bias": self.bias,
        }


@dataclass
class DerivativeCheck:
    frechet_residual_max: float
    lip1_of_derivative: ConstantEstimate
    operator_norm_sup: ConstantEstimate
    frechet_witness: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "frechet_residual_max": self.frechet_residual_max,
            "frechet_witness": self.frechet_witness,
            "lip1_of_derivative": self.lip1_of_derivative.to_dict(),
            "operator_norm_sup": self.operator_norm_sup.to_dict(),
            "bias": LOWER_BOUND_OF_SUPREMUM,
        }


def default_t_grid(m: MapSpec, levels: int = 20) -> list[float]:
    diam = 2.0 * m.domain.radius
    return [diam * 2.0 ** (-j) for j in range(levels + 1)]


def _directions(m: MapSpec, count: int, seed: int, tag: int) -> np.ndarray:
    """Domain-sphere directions: the signed coordinate axes first, then random ones."""
    X = m.domain_space
    n = X.dim
    axes = np.vstack([np.eye(n), -np.eye(n)])
    axes = axes / norm(X, axes)[:, None]
    rand = sample_ball(X, 1.0, count, seed, "sphere", tag=tag)
    reps = -(-count // axes.shape[0])
    cyc = np.tile(axes, (reps, 1))[:count]
    # every fourth direction is an axis, the rest are isotropic
    use_axis = (np.arange(count) % 4) == 0
    out = rand.copy()
    out[use_axis] = cyc[: int(use_axis.sum())]
    return out


def _base_points(m: MapSpec, count: int, seed: int, tag: int) -> np.ndarray:
    """Domain points: the center first, then interior samples with a sphere share."""
    D = m.domain
    pts = sample_ball(D.space, D.radius, count, seed, "interior", tag=tag)
    sph = sample_ball(D.space, D.radius, count, seed, "sphere", tag=tag + 1)
    on_sphere = (np.arange(count) % 5) == 4
    pts[on_sphere] = sph[on_sphere]
    pts[0] = 0.0
    return D.c + pts


def omega_estimate(
    m: MapSpec,
    order: int,
    t_grid: Sequence[float] | None = None,
    samples: int = 2000,
    seed: int = 0,
    polish: bool = True,
) -> SmoothnessEstimate:
    """Modulus of smoothness of order 1 or 2 on ``t_grid`` and the induced Lipschitz constant.

    For each t, ``(x, h)`` pairs are sampled with ``||h|| = min(t, R - ||x - c||)``
    (a quarter of them at a uniformly smaller magnitude), which keeps the probing
    segment inside the domain ball by the triangle inequality. Omega values are
    made nondecreasing in t by a running maximum, and the constant is
    ``max_t omega(t) / t**order``.
    """
    if order not in (1, 2):
        raise LabError("order must be 1 or 2")
    ts = default_t_grid(m) if t_grid is None else [float(t) for t in t_grid]
    diam = 2.0 * m.domain.radius
    if not ts or any(not (0.0 < t <= diam * (1 + 1e-12)) for t in ts):
        raise LabError("t_grid must be positive and at most the domain diameter")
    X = m.domain_space
    Y = m.codomain_space
    D = m.domain

    xs = _base_points(m, samples, seed, tag=21)
    reach = np.maximum(D.radius - D.distance_from_center(xs), 0.0)
    dirs = _directions(m, samples, seed, tag=23)
    u = nested_draw(seed, 24, samples, lambda rng, n: rng.random(n))
    shrink = np.where((np.arange(samples) % 4) == 3, u, 1.0)

    table = np.empty((len(ts), samples))
    Hs: list[np.ndarray] = []
    for i, t in enumerate(ts):
        s = np.minimum(t, reach) * shrink
        ok = s > 0
        if not np.any(ok):
            raise EstimationError(f"no admissible (x, h) sample for t = {t:g}")
        H = dirs * s[:, None]
        table[i] = np.where(ok, norm(Y, m.difference(order, xs, H)), -np.inf)
        Hs.append(H)
    tpow = np.array([t**order for t in ts])
    best_t = np.argmax(table / tpow[:, None], axis=0)
    raw = [float(v) for v in table.max(axis=1)]
    wits = [(xs[j].copy(), Hs[i][j].copy()) for i, j in enumerate(np.argmax(table, axis=1))]

    if polish:
        n = X.dim
        score = table[best_t, np.arange(samples)] / tpow[best_t]
        for j in prefix_records(score):
            i = int(best_t[j])
            t = ts[i]

            def neg(Z: np.ndarray, t: float = t) -> np.ndarray:
                x = Z[:, :n]
                v = Z[:, n:]
                nv = norm(X, v)
                room = D.radius - D.distance_from_center(x)
                s = np.minimum(t, np.maximum(room, 0.0))
                H = v * (s / np.where(nv > 0, nv, 1.0))[:, None]
                out = -norm(Y, m.difference(order, x, H))
                return np.where((nv > 0) & (s > 0), out, np.inf)

            h0 = Hs[i][j]
            z, fz = pattern_search(neg, np.concatenate([xs[j], h0 / max(norm(X, h0), 1e-300)]), step=0.1, step_min=1e-6)
            if -fz > raw[i]:
                x = z[:n]
                v = z[n:]
                s = min(t, max(D.radius - float(D.distance_from_center(x)), 0.0))
                h = v * (s / float(norm(X, v)))
                val = float(norm(Y, m.difference(order, x[None, :], h[None, :])[0]))
                if val > raw[i]:
                    raw[i] = val
                    wits[i] = (x, h)

    ratios = np.array([w / tp for w, tp in zip(raw, tpow)])
    jstar = int(np.argmax(ratios))

    order_t = np.argsort(ts, kind="stable")
    omega = list(raw)
    best = -math.inf
    for i in order_t:
        best = max(best, omega[i])
        omega[i] = best

    x, h = wits[jstar]
    witness = {"x": x.tolist(), "h": h.tolist(), "t": ts[jstar]}
    return SmoothnessEstimate(order, ts, omega, float(ratios[jstar]), witness, samples, seed)


def lipschitz_from_witness(m: MapSpec, est: SmoothnessEstimate) -> float:
    w = est.witness
    x = np.asarray(w["x"])[None, :]
    h = np.asarray(w["h"])[None, :]
    return float(norm(m.codomain_space, m.difference(est.order, x, h)[0])) / w["t"] ** est.order


def lip1_estimate(m: MapSpec, samples: int = 2000, seed: int = 0) -> SmoothnessEstimate:
    return omega_estimate(m, 1, None, samples, seed)


def lip2_estimate(m: MapSpec, samples: int = 2000, seed: int = 0) -> SmoothnessEstimate:
    return omega_estimate(m, 2, None, samples, seed)


def derivative_sup(m: MapSpec, samples: int = 2000, seed: int = 0) -> ConstantEstimate:
    """``sup_x ||f'(x)||`` in the operator norm between the domain and codomain norms."""
    X = m.domain_space
    Y = m.codomain_space
    D = m.domain
    pts = _base_points(m, samples, seed, tag=31)
    norms = _batch_operator_norms(m.jac(pts), X, Y, seed)
    j = int(np.argmax(norms))
    best_x = pts[j]
    best = float(norms[j])

    def neg(Z):
        Z = D.c + clamp_to_radius(X, Z - D.c, D.radius)
        return -_batch_operator_norms(m.jac(Z), X, Y, seed)

    def project(Z):
        return D.c + clamp_to_radius(X, Z - D.c, D.radius)

    for j in prefix_records(norms):
        z, fz = pattern_search(neg, pts[j], step=0.1 * D.radius, step_min=1e-6 * D.radius, project=project)
        # exact (or polished) norm at the refined point
        val, _ = operator_norm(m.jac(z[None, :])[0], X, Y, seed=seed)
        val = max(val, -fz)
        if val > best:
            best, best_x = val, z
    _, u = operator_norm(m.jac(best_x[None, :])[0], X, Y, seed=seed)
    return ConstantEstimate(
        "operator_norm_sup", best, LOWER_BOUND_OF_SUPREMUM, {"x": best_x.tolist(), "direction": u.tolist()}, samples, seed
    )


def derivative_lipschitz(m: MapSpec, samples: int = 2000, seed: int = 0) -> ConstantEstimate:
    """``sup ||f'(x) - f'(y)|| / ||x - y||`` over sampled domain pairs."""
    X = m.domain_space
    Y = m.codomain_space
    D = m.domain
    xs = _base_points(m, samples, seed, tag=41)
    dirs = _directions(m, samples, seed, tag=43)
    reach = np.maximum(D.radius - D.distance_from_center(xs), 0.0)
    u = nested_draw(seed, 44, samples, lambda rng, n: rng.random(n))
    s = reach * np.where((np.arange(samples) % 2) == 0, 1.0, u)
    s = np.where(s > 0, s, D.radius)
    ys = xs + dirs * s[:, None]
    ok = D.distance_from_center(ys) <= D.radius * (1 + DOMAIN_TOL)
    ys = np.where(ok[:, None], ys, xs + dirs * (0.5 * D.radius))
    ok = D.distance_from_center(ys) <= D.radius * (1 + DOMAIN_TOL)
    sep = norm(X, xs - ys)
    diffs = m.jac(xs) - m.jac(ys)
    vals = _batch_operator_norms(diffs, X, Y, seed) / np.where(sep > 0, sep, 1.0)
    vals = np.where(ok & (sep > 1e-12), vals, -np.inf)
    j = int(np.argmax(vals))
    x, y = xs[j], ys[j]
    best = float(vals[j])
    if not np.isfinite(best):
        raise EstimationError("no admissible pair for the derivative Lipschitz estimate")
    n = X.dim

    def neg(Z):
        a = D.c + clamp_to_radius(X, Z[:, :n] - D.c, D.radius)
        b = D.c + clamp_to_radius(X, Z[:, n:] - D.c, D.radius)
        sp = norm(X, a - b)
        v = _batch_operator_norms(m.jac(a) - m.jac(b), X, Y, seed) / np.where(sp > 0, sp, 1.0)
        return np.where(sp > 1e-6 * D.radius, -v, np.inf)

    for j in prefix_records(vals):
        z, fz = pattern_search(neg, np.concatenate([xs[j], ys[j]]), step=0.05 * D.radius, step_min=1e-6 * D.radius)
        a = D.c + clamp_to_radius(X, z[:n] - D.c, D.radius)
        b = D.c + clamp_to_radius(X, z[n:] - D.c, D.radius)
        sp = float(norm(X, a - b))
        if sp <= 1e-6 * D.radius:
            continue
        val, _ = operator_norm(m.jac(a[None, :])[0] - m.jac(b[None, :])[0], X, Y, seed=seed)
        val = max(val / sp, -fz)
        if val > best:
            best, x, y = val, a, b
    return ConstantEstimate(
        "lip1_of_derivative", best, LOWER_BOUND_OF_SUPREMUM, {"x": x.tolist(), "y": y.tolist()}, samples, seed
    )


def frechet_residual(m: MapSpec, samples: int = 2000, seed: int = 0) -> tuple[float, dict[str, Any]]:
    """``max ||f(x+h) - f(x) - f'(x) h|| / ||h||^2`` over probes with ``[x, x+h]`` in the domain.

    Step sizes are kept at least 5% of the reach to keep the literal residual
    clear of rounding.
    """
    X = m.domain_space
    Y = m.codomain_space
    D = m.domain
    xs = _base_points(m, samples, seed, tag=51)
    dirs = _directions(m, samples, seed, tag=53)
    reach = np.maximum(D.radius - D.distance_from_center(xs), 0.0)
    u = nested_draw(seed, 54, samples, lambda rng, n: rng.random(n))
    s = reach * (0.05 + 0.95 * np.where((np.arange(samples) % 2) == 0, 1.0, u))
    ok = s > 1e-3 * D.radius
    H = dirs * s[:, None]
    J = m.jac(xs)
    res = m.f(xs + H) - m.f(xs) - np.einsum("mij,mj->mi", J, H)
    hn = norm(X, H)
    vals = np.where(ok, norm(Y, res) / np.where(ok, hn, 1.0) ** 2, -np.inf)
    j = int(np.argmax(vals))
    return float(vals[j]), {"x": xs[j].tolist(), "h": H[j].tolist()}


def derivative_check(m: MapSpec, samples: int = 2000, seed: int = 0) -> DerivativeCheck:
    fr, fw = frechet_residual(m, samples, seed)
    return DerivativeCheck(
        frechet_residual_max=fr,
        lip1_of_derivative=derivative_lipschitz(m, samples, seed),
        operator_norm_sup=derivative_sup(m, samples, seed),
        frechet_witness=fw,
    )
