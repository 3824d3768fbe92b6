"""Ray geometry on convex domains and quadrature on the unit sphere.

Supported domains are balls and axis-aligned ellipsoids in 2 or 3 dimensions.
Both are strictly convex with closed-form chord intersections, so travel
times to the boundary come from quadratic roots instead of iterative surface
solves.  Directions are plain unit numpy vectors; ``direction`` normalizes
and validates.  The sphere measure is normalized (total mass 1), while the
boundary measure is the induced (unnormalized) surface measure, so the
natural flux measure at a boundary point x with direction theta has density
``|n(x) . theta|`` against ``d(surface) x d(direction)``.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Callable

import numpy as np
from scipy.stats import qmc

from .errors import ConfigurationError, DomainError

# Points closer than this to the surface count as boundary points.
BOUNDARY_ATOL = 1e-9
# Pairs with |n . theta| below this are excluded from boundary quadratures.
GRAZING_TOL = 1e-8

_GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


def direction(components) -> np.ndarray:
    """Return a unit direction vector (norm 1 to machine precision)."""
    v = np.asarray(components, dtype=float)
    if v.ndim != 1 or v.size not in (2, 3):
        raise ValueError("direction must be a 2- or 3-vector")
    nrm = float(np.linalg.norm(v))
    if not math.isfinite(nrm) or nrm == 0.0:
        raise ValueError("direction must be a nonzero finite vector")
    return v / nrm


def unit_rows(vectors: np.ndarray) -> np.ndarray:
    """Normalize the rows of an (N, dim) array."""
    v = np.asarray(vectors, dtype=float)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


@dataclasses.dataclass(frozen=True)
class ConvexDomain:
    """Ball or axis-aligned ellipsoid, described by center and semi-axes.

    The implicit surface function is F(x) = sum(((x_i - c_i)/s_i)^2) - 1,
    negative inside and zero on the boundary.
    """

    center: np.ndarray
    semi_axes: np.ndarray
    shape: str  # "ball" or "ellipsoid"

    @staticmethod
    def ball(center, radius: float) -> "ConvexDomain":
        c = np.asarray(center, dtype=float)
        if radius <= 0.0:
            raise ConfigurationError("ball radius must be positive")
        return ConvexDomain(c, np.full(c.size, float(radius)), "ball")

    @staticmethod
    def ellipsoid(center, semi_axes) -> "ConvexDomain":
        c = np.asarray(center, dtype=float)
        s = np.asarray(semi_axes, dtype=float)
        if s.shape != c.shape:
            raise ConfigurationError("semi_axes must match the center dimension")
        if np.any(s <= 0.0):
            raise ConfigurationError("all semi-axes must be positive")
        return ConvexDomain(c, s, "ellipsoid")

    @property
    def dim(self) -> int:
        return int(self.center.size)

    @property
    def diameter(self) -> float:
        return 2.0 * float(np.max(self.semi_axes))

    def implicit(self, points) -> np.ndarray:
        y = (np.asarray(points, dtype=float) - self.center) / self.semi_axes
        return np.sum(y * y, axis=-1) - 1.0

    def boundary_excess(self, points) -> np.ndarray:
        """Approximate signed distance to the surface (positive outside)."""
        # F grows like 2 d / min(s) near the surface; scale back to length units.
        return self.implicit(points) * float(np.min(self.semi_axes)) / 2.0

    def contains(self, points, atol: float = BOUNDARY_ATOL) -> np.ndarray:
        return self.boundary_excess(points) <= atol

    def normal_at(self, points) -> np.ndarray:
        """Outward unit normal of the implicit surface at boundary points."""
        g = (np.asarray(points, dtype=float) - self.center) / (self.semi_axes ** 2)
        return g / np.linalg.norm(g, axis=-1, keepdims=True)

    def boundary_defining(self, points) -> np.ndarray:
        """b(x) = -F(x): positive inside, zero on the boundary."""
        return -self.implicit(points)

    def boundary_defining_gradient(self, points) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        return -2.0 * (p - self.center) / (self.semi_axes ** 2)

    def bounding_box(self):
        return self.center - self.semi_axes, self.center + self.semi_axes


def exit_times(domain: ConvexDomain, points, thetas) -> np.ndarray:
    """Forward travel times to the boundary for batched (point, direction) rows.

    Assumes the points lie inside the closed domain; no validation is done
    here (the scalar wrappers validate).  Directions broadcast: a single
    (dim,) vector applies to every row.
    """
    p = np.atleast_2d(np.asarray(points, dtype=float))
    t = np.asarray(thetas, dtype=float)
    if t.ndim == 1:
        t = np.broadcast_to(t, p.shape)
    y = (p - domain.center) / domain.semi_axes
    d = t / domain.semi_axes
    a = np.sum(d * d, axis=-1)
    b = np.sum(y * d, axis=-1)
    c = np.sum(y * y, axis=-1) - 1.0
    disc = np.maximum(b * b - a * c, 0.0)
    return np.maximum((-b + np.sqrt(disc)) / a, 0.0)


def _require_inside(domain: ConvexDomain, x) -> np.ndarray:
    p = np.asarray(x, dtype=float)
    excess = float(domain.boundary_excess(p))
    if excess > BOUNDARY_ATOL:
        raise DomainError(f"point {p.tolist()} lies outside the domain by {excess:.3e}")
    return p


def exit_time(domain: ConvexDomain, x, theta) -> float:
    """Travel time from x to the boundary in direction theta (tau_plus).

    The backward time tau_minus is ``exit_time(domain, x, -theta)``, and the
    chord length through (x, theta) is their sum, bounded by the diameter.
    """
    p = _require_inside(domain, x)
    return float(exit_times(domain, p, np.asarray(theta, dtype=float))[0])


@dataclasses.dataclass(frozen=True)
class BoundaryPoint:
    """A boundary position together with the outward unit normal there."""

    position: np.ndarray
    normal: np.ndarray


def exit_point(domain: ConvexDomain, x, theta) -> BoundaryPoint:
    """Boundary point x + tau_plus * theta hit when leaving x along theta."""
    p = _require_inside(domain, x)
    t = np.asarray(theta, dtype=float)
    pos = p + exit_times(domain, p, t)[0] * t
    return BoundaryPoint(pos, domain.normal_at(pos))


def entry_point(domain: ConvexDomain, x, theta) -> BoundaryPoint:
    """Boundary point from which x is reached by traveling along theta."""
    return exit_point(domain, x, -np.asarray(theta, dtype=float))


def boundary_weight(bp: BoundaryPoint, theta) -> float:
    """Flux density |n(x) . theta| of the boundary measure at (x, theta)."""
    return abs(float(np.dot(bp.normal, np.asarray(theta, dtype=float))))


@dataclasses.dataclass(frozen=True)
class SphereQuadrature:
    """Equal-weight nodes integrating the normalized sphere measure.

    2D rules are uniformly spaced angles (trigonometric exactness up to the
    node count); 3D rules are Fibonacci spirals, antipodally symmetrized for
    even orders so that -theta is a node whenever theta is.
    """

    nodes: np.ndarray    # (N, dim)
    weights: np.ndarray  # (N,), sums to 1

    @property
    def order(self) -> int:
        return int(self.weights.size)

    @property
    def dim(self) -> int:
        return int(self.nodes.shape[1])

    def integrate(self, values) -> float:
        return float(np.dot(np.asarray(values, dtype=float), self.weights))

    def antipodal_indices(self) -> np.ndarray:
        """Permutation j -> j' with nodes[j'] = -nodes[j]; None-free by construction.

        Only available for even orders (the node sets are built antipodally
        symmetric in that case).
        """
        n = self.order
        if n % 2 != 0:
            raise ConfigurationError("antipodal pairing needs an even quadrature order")
        if self.dim == 2:
            return (np.arange(n) + n // 2) % n
        half = n // 2
        return np.concatenate([np.arange(half) + half, np.arange(half)])


def _fibonacci_hemisphere(m: int) -> np.ndarray:
    # the half-offset azimuth markedly improves the second moments
    i = np.arange(m, dtype=float)
    z = (i + 0.5) / m
    r = np.sqrt(np.maximum(1.0 - z * z, 0.0))
    psi = (i + 0.5) * _GOLDEN_ANGLE
    return np.column_stack([r * np.cos(psi), r * np.sin(psi), z])


def make_sphere_quadrature(dimension: int, order: int) -> SphereQuadrature:
    """Equal-weight direction set of the given size on S^(dimension-1)."""
    if dimension not in (2, 3):
        raise ConfigurationError("dimension must be 2 or 3")
    if order < 4:
        raise ConfigurationError("quadrature order must be at least 4")
    if dimension == 2:
        ang = 2.0 * np.pi * np.arange(order) / order
        nodes = np.column_stack([np.cos(ang), np.sin(ang)])
    elif order % 2 == 0:
        half = _fibonacci_hemisphere(order // 2)
        nodes = np.vstack([half, -half])
    else:
        # Odd orders fall back to a plain spiral (no antipodal pairing).
        i = np.arange(order, dtype=float)
        z = 1.0 - (2.0 * i + 1.0) / order
        r = np.sqrt(np.maximum(1.0 - z * z, 0.0))
        psi = i * _GOLDEN_ANGLE
        nodes = np.column_stack([r * np.cos(psi), r * np.sin(psi), z])
    weights = np.full(order, 1.0 / order)
    return SphereQuadrature(nodes, weights)


@dataclasses.dataclass(frozen=True)
class BoundaryGrid:
    """Sampled boundary points with surface-measure weights."""

    positions: np.ndarray   # (M, dim)
    normals: np.ndarray     # (M, dim)
    mu_weights: np.ndarray  # (M,), sums to the surface measure of the boundary

    @property
    def size(self) -> int:
        return int(self.mu_weights.size)


def make_boundary_grid(domain: ConvexDomain, n_points: int) -> BoundaryGrid:
    """Quasi-uniform boundary sample with per-point surface weights.

    2D uses uniformly spaced parameter angles with the exact arc-length
    Jacobian; 3D maps a Fibonacci sphere sample through the axis scaling with
    the analytic area Jacobian s1*s2*s3*sqrt(sum(w_i^2/s_i^2)).
    """
    if n_points < 4:
        raise ConfigurationError("boundary grid needs at least 4 points")
    s = domain.semi_axes
    if domain.dim == 2:
        t = 2.0 * np.pi * (np.arange(n_points) + 0.5) / n_points
        omega = np.column_stack([np.cos(t), np.sin(t)])
        jac = np.sqrt((s[0] * np.sin(t)) ** 2 + (s[1] * np.cos(t)) ** 2)
        weights = jac * (2.0 * np.pi / n_points)
    else:
        i = np.arange(n_points, dtype=float)
        z = 1.0 - (2.0 * i + 1.0) / n_points
        r = np.sqrt(np.maximum(1.0 - z * z, 0.0))
        psi = i * _GOLDEN_ANGLE
        omega = np.column_stack([r * np.cos(psi), r * np.sin(psi), z])
        jac = np.prod(s) * np.sqrt(np.sum((omega / s) ** 2, axis=1))
        weights = jac * (4.0 * np.pi / n_points)
    positions = domain.center + omega * s
    return BoundaryGrid(positions, domain.normal_at(positions), weights)


def halton_interior_points(domain: ConvexDomain, n: int, seed: int = 0) -> np.ndarray:
    """Quasi-random points inside the domain (scrambled Halton, then rejection)."""
    lo, hi = domain.bounding_box()
    sampler = qmc.Halton(d=domain.dim, scramble=True, seed=seed)
    points = np.empty((0, domain.dim))
    while points.shape[0] < n:
        draw = lo + (hi - lo) * sampler.random(max(2 * n, 64))
        keep = draw[domain.contains(draw, atol=-BOUNDARY_ATOL)]
        points = np.vstack([points, keep])
    return points[:n]


def random_directions(dim: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """n independent uniformly distributed unit vectors."""
    v = rng.normal(size=(n, dim))
    return unit_rows(v)
