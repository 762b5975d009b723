"""Compact convex feasible sets defined by inequality constraints.

Each set variant represents ``G = {x : q_j(x) <= 0, j = 0..p-1}`` and supports
exact Euclidean projection, active-constraint queries, and projection onto the
tangent/normal cones at a feasible point.  These are the geometric primitives
used by the projected gradient iteration and the projected-flow solver.

Variants with closed-form projections are ``Ball`` and ``Box``; general
``HalfspaceIntersection`` sets are projected with Dykstra's alternating
projection algorithm.  Tangent-cone projections use the polar-cone
decomposition ``v = P_T(v) + P_N(v)`` with ``<P_T(v), P_N(v)> = 0``: the
normal-cone projection is computed in closed form where available and by a
non-negative least-squares solve over the active constraint normals otherwise.

All operations are pure functions of their inputs; instances hold no mutable
state and can be shared freely across threads.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog, nnls

__all__ = ["ConstraintSet", "Ball", "Box", "HalfspaceIntersection", "build_constraint_set"]

# Dykstra iteration budget and sweep-change stopping tolerance.
_DYKSTRA_MAX_SWEEPS = 10_000
_DYKSTRA_TOL = 1e-12

# Active constraint normals with condition number above this trigger a
# qualification warning (nearly dependent normals make multipliers unstable).
_QUALIFICATION_COND_LIMIT = 1e8


def _as_finite(x, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{what} must be finite")
    return x


class ConstraintSet:
    """A nonempty compact convex set with projection and cone operations.

    Subclasses provide ``constraint_values`` (the vector of q_j), the matching
    ``constraint_gradients``, an exact ``project``, uniform ``sample``, and a
    ``diameter`` bound.  Cone projections default to the generic active-normal
    construction and are overridden with closed forms where they exist.
    """

    dimension: int
    active_tolerance: float

    # -- subclass surface ------------------------------------------------

    def constraint_values(self, theta: np.ndarray) -> np.ndarray:
        """Vector (q_0(theta), ..., q_{p-1}(theta))."""
        raise NotImplementedError

    def constraint_gradients(self, theta: np.ndarray) -> np.ndarray:
        """(p, d) array whose row j is the gradient of q_j at theta."""
        raise NotImplementedError

    def project(self, x: np.ndarray) -> np.ndarray:
        """Euclidean projection of x onto the set."""
        raise NotImplementedError

    def project_blocks(self, blocks: np.ndarray) -> np.ndarray:
        """Row-wise projection of an (n, d) array; overridden where it vectorizes."""
        out = np.empty_like(blocks)
        for k in range(blocks.shape[0]):
            out[k] = self.project(blocks[k])
        return out

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        """One point drawn uniformly from the set."""
        raise NotImplementedError

    def diameter(self) -> float:
        """An upper bound on the set diameter (exact for Ball and Box)."""
        raise NotImplementedError

    # -- shared operations -------------------------------------------------

    @property
    def n_constraints(self) -> int:
        return self.constraint_values(np.zeros(self.dimension)).size

    def contains(self, theta) -> bool:
        """Membership test with slack ``active_tolerance`` on each q_j."""
        theta = _as_finite(theta, "point")
        return bool(np.all(self.constraint_values(theta) <= self.active_tolerance))

    def _require_member(self, theta) -> np.ndarray:
        theta = _as_finite(theta, "point")
        violation = float(np.max(self.constraint_values(theta)))
        if violation > self.active_tolerance:
            raise ValueError(
                f"point lies outside the feasible set (constraint excess {violation:.3e})"
            )
        return theta

    def active_set(self, theta) -> np.ndarray:
        """Indices of constraints active at a feasible point.

        A constraint counts as active when its value lies within
        ``active_tolerance`` of zero.  Raises ``ValueError`` if the point is
        infeasible beyond the tolerance.
        """
        theta = self._require_member(theta)
        values = self.constraint_values(theta)
        return np.flatnonzero(values >= -self.active_tolerance)

    def project_normal_cone(self, theta, v) -> np.ndarray:
        """Projection of v onto the normal cone at a feasible point.

        Generic implementation: the normal cone is the conical hull of the
        active constraint gradients, so the projection solves a small
        non-negative least-squares problem over those normals.
        """
        theta = self._require_member(theta)
        v = _as_finite(v, "vector")
        active = self.active_set(theta)
        if active.size == 0:
            return np.zeros_like(v)
        normals = self.constraint_gradients(theta)[active]
        cond = np.linalg.cond(normals)
        if cond > _QUALIFICATION_COND_LIMIT:
            warnings.warn(
                f"active constraint normals are nearly dependent (cond {cond:.2e}); "
                "consider removing redundant constraints",
                RuntimeWarning,
                stacklevel=2,
            )
        coeffs, _ = nnls(normals.T, v)
        return normals.T @ coeffs

    def project_tangent_cone(self, theta, v) -> np.ndarray:
        """Projection of v onto the tangent cone at a feasible point.

        Equals v itself at interior points.  Satisfies the orthogonal
        decomposition v = P_T(v) + P_N(v).
        """
        v = _as_finite(v, "vector")
        return v - self.project_normal_cone(theta, v)

    def kkt_residual(self, grad, theta) -> float:
        """Norm of the tangent-cone projection of the negative gradient.

        Zero exactly when ``-grad`` lies in the normal cone at theta, i.e.
        when theta is a first-order stationary point of any objective whose
        gradient at theta equals ``grad``.
        """
        grad = _as_finite(grad, "gradient")
        return float(np.linalg.norm(self.project_tangent_cone(theta, -grad)))


@dataclass(frozen=True, eq=False)
class Ball(ConstraintSet):
    """Euclidean ball {x : |x - center|^2 <= radius^2} (single constraint)."""

    center: np.ndarray
    radius: float
    active_tolerance: float = 1e-9

    def __post_init__(self):
        center = _as_finite(self.center, "center")
        object.__setattr__(self, "center", center)
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")

    @property
    def dimension(self) -> int:
        return self.center.size

    def constraint_values(self, theta):
        theta = np.asarray(theta, dtype=float)
        return np.array([float(np.dot(theta - self.center, theta - self.center)) - self.radius**2])

    def constraint_gradients(self, theta):
        theta = np.asarray(theta, dtype=float)
        return (2.0 * (theta - self.center))[None, :]

    def project(self, x):
        x = _as_finite(x, "point")
        offset = x - self.center
        norm = float(np.linalg.norm(offset))
        if norm <= self.radius:
            return x.copy()
        return self.center + offset * (self.radius / norm)

    def project_blocks(self, blocks):
        offsets = blocks - self.center
        norms = np.linalg.norm(offsets, axis=1)
        scale = np.ones_like(norms)
        outside = norms > self.radius
        scale[outside] = self.radius / norms[outside]
        return self.center + offsets * scale[:, None]

    def project_normal_cone(self, theta, v):
        theta = self._require_member(theta)
        v = _as_finite(v, "vector")
        offset = theta - self.center
        sq = float(np.dot(offset, offset))
        if sq - self.radius**2 < -self.active_tolerance:
            return np.zeros_like(v)
        unit = offset / np.sqrt(sq)
        outward = float(np.dot(v, unit))
        if outward <= 0.0:
            return np.zeros_like(v)
        return outward * unit

    def sample(self, rng):
        # Rejection from the bounding box; acceptance rate is fine in the
        # low dimensions this library targets.
        while True:
            candidate = self.center + self.radius * rng.uniform(-1.0, 1.0, self.dimension)
            if float(np.linalg.norm(candidate - self.center)) <= self.radius:
                return candidate

    def diameter(self):
        return 2.0 * self.radius


@dataclass(frozen=True, eq=False)
class Box(ConstraintSet):
    """Axis-aligned box {x : lower <= x <= upper} componentwise.

    Constraints are ordered as the d lower bounds (indices 0..d-1, with
    q = lower_k - x_k) followed by the d upper bounds (indices d..2d-1,
    with q = x_k - upper_k).
    """

    lower: np.ndarray
    upper: np.ndarray
    active_tolerance: float = 1e-9

    def __post_init__(self):
        lower = _as_finite(self.lower, "lower")
        upper = _as_finite(self.upper, "upper")
        if lower.shape != upper.shape:
            raise ValueError("lower and upper must have the same shape")
        if np.any(lower > upper):
            raise ValueError("box requires lower <= upper componentwise")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dimension(self) -> int:
        return self.lower.size

    def constraint_values(self, theta):
        theta = np.asarray(theta, dtype=float)
        return np.concatenate([self.lower - theta, theta - self.upper])

    def constraint_gradients(self, theta):
        eye = np.eye(self.dimension)
        return np.vstack([-eye, eye])

    def project(self, x):
        x = _as_finite(x, "point")
        return np.clip(x, self.lower, self.upper)

    def project_blocks(self, blocks):
        return np.clip(blocks, self.lower, self.upper)

    def project_normal_cone(self, theta, v):
        theta = self._require_member(theta)
        v = _as_finite(v, "vector")
        z = np.zeros_like(v)
        at_upper = theta >= self.upper - self.active_tolerance
        at_lower = theta <= self.lower + self.active_tolerance
        z[at_upper] += np.maximum(v[at_upper], 0.0)
        z[at_lower] += np.minimum(v[at_lower], 0.0)
        return z

    def sample(self, rng):
        return rng.uniform(self.lower, self.upper)

    def diameter(self):
        return float(np.linalg.norm(self.upper - self.lower))


@dataclass(frozen=True, eq=False)
class HalfspaceIntersection(ConstraintSet):
    """Bounded polyhedron {x : normals @ x <= offsets}.

    Boundedness and nonemptiness are verified at construction by linear
    programs (one feasibility check plus a min/max per coordinate); the
    resulting coordinate bounds are kept for uniform rejection sampling.
    Projection runs Dykstra's alternating projections over the halfspaces.
    """

    normals: np.ndarray
    offsets: np.ndarray
    active_tolerance: float = 1e-9

    def __post_init__(self):
        normals = np.atleast_2d(_as_finite(self.normals, "normals"))
        offsets = np.atleast_1d(_as_finite(self.offsets, "offsets"))
        if normals.shape[0] != offsets.size:
            raise ValueError("one offset per halfspace is required")
        row_norms = np.linalg.norm(normals, axis=1)
        if np.any(row_norms == 0.0):
            raise ValueError("zero normal vector in halfspace description")
        object.__setattr__(self, "normals", normals)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "_sq_norms", row_norms**2)
        lower, upper = self._coordinate_bounds()
        object.__setattr__(self, "_bound_lower", lower)
        object.__setattr__(self, "_bound_upper", upper)

    def _coordinate_bounds(self):
        d = self.normals.shape[1]
        lower = np.empty(d)
        upper = np.empty(d)
        free = [(None, None)] * d
        for k in range(d):
            for sign, store in ((1.0, lower), (-1.0, upper)):
                c = np.zeros(d)
                c[k] = sign
                res = linprog(c, A_ub=self.normals, b_ub=self.offsets, bounds=free, method="highs")
                if res.status == 2:
                    raise ValueError("halfspace intersection is empty")
                if res.status == 3:
                    raise ValueError("halfspace intersection is unbounded")
                if not res.success:
                    raise ValueError(f"could not verify boundedness: {res.message}")
                store[k] = sign * res.fun
        return lower, upper

    @property
    def dimension(self) -> int:
        return self.normals.shape[1]

    def constraint_values(self, theta):
        theta = np.asarray(theta, dtype=float)
        return self.normals @ theta - self.offsets

    def constraint_gradients(self, theta):
        return self.normals

    def project(self, x):
        x = _as_finite(x, "point")
        if np.all(self.constraint_values(x) <= 0.0):
            return x.copy()
        y = x.copy()
        corrections = np.zeros((self.normals.shape[0], self.dimension))
        for _ in range(_DYKSTRA_MAX_SWEEPS):
            y_start = y.copy()
            for j in range(self.normals.shape[0]):
                z = y + corrections[j]
                excess = float(self.normals[j] @ z - self.offsets[j])
                if excess > 0.0:
                    y = z - (excess / self._sq_norms[j]) * self.normals[j]
                else:
                    y = z
                corrections[j] = z - y
            if float(np.max(np.abs(y - y_start))) < _DYKSTRA_TOL:
                return y
        warnings.warn("Dykstra projection hit its sweep budget before converging", RuntimeWarning)
        return y

    def sample(self, rng, max_attempts: int = 100_000):
        for _ in range(max_attempts):
            candidate = rng.uniform(self._bound_lower, self._bound_upper)
            if np.all(self.constraint_values(candidate) <= 0.0):
                return candidate
        raise RuntimeError("rejection sampling failed; the set is too thin for its bounding box")

    def diameter(self):
        return float(np.linalg.norm(self._bound_upper - self._bound_lower))


def build_constraint_set(spec: dict) -> ConstraintSet:
    """Build a constraint set from its JSON-style description.

    Recognized forms:
      {"type": "ball", "center": [...], "radius": r}
      {"type": "box", "lower": [...], "upper": [...]}
      {"type": "halfspaces", "normals": [[...], ...], "offsets": [...]}
    """
    kind = spec.get("type")
    if kind == "ball":
        return Ball(center=np.asarray(spec["center"], dtype=float), radius=float(spec["radius"]))
    if kind == "box":
        return Box(
            lower=np.asarray(spec["lower"], dtype=float),
            upper=np.asarray(spec["upper"], dtype=float),
        )
    if kind == "halfspaces":
        return HalfspaceIntersection(
            normals=np.asarray(spec["normals"], dtype=float),
            offsets=np.asarray(spec["offsets"], dtype=float),
        )
    raise ValueError(f"unknown constraint set type: {kind!r}")
