"""Forward transport solves and the albedo operator on boundary fluxes.

The solver is a source iteration on a phase-space grid: Cartesian cell
centers inside the domain crossed with an equal-weight direction set.  Each
sweep rebuilds the scattering source on the grid, then integrates it along
exact backward rays with attenuation (long characteristics), which keeps the
collision orders separately accessible: order 0 is the purely attenuated
boundary flux, order 1 the single-scatter response, and the converged
remainder everything beyond.

Exit fluxes are evaluated by running the same attenuated ray integral from
each boundary sample point, not by interpolating the volume solution onto
the boundary.
"""

from __future__ import annotations

import dataclasses
import itertools
import warnings
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from .errors import ConfigurationError, ConvergenceError, DomainError, ParallelDirectionsError
from .geometry import (BOUNDARY_ATOL, GRAZING_TOL, BoundaryGrid, BoundaryPoint,
                       ConvexDomain, SphereQuadrature, exit_times,
                       make_boundary_grid, make_sphere_quadrature)
from .media import MediumPair, check_subcritical_cs, check_subcritical_dl
from .rays import attenuated_source_integral, even_panels, simpson_coefficients

_DIVERGENCE_GUARD = 1e8


# ---------------------------------------------------------------------------
# Boundary fluxes
# ---------------------------------------------------------------------------

class BoundaryFlux:
    """Incoming boundary data f(x, theta), evaluated on position batches."""

    def eval(self, positions, theta) -> np.ndarray:
        raise NotImplementedError


@dataclasses.dataclass(frozen=True)
class IsotropicFlux(BoundaryFlux):
    value: float = 1.0

    def eval(self, positions, theta):
        return np.full(np.atleast_2d(positions).shape[0], self.value)


@dataclasses.dataclass(frozen=True)
class BeamFlux(BoundaryFlux):
    """Smooth beam: compact bump in position around ``center`` and in
    direction around ``axis`` (widths in chord metric)."""

    center: np.ndarray
    axis: np.ndarray
    pos_width: float
    ang_width: float
    amplitude: float = 1.0

    @staticmethod
    def _bump(r):
        return np.maximum(0.0, 1.0 - r * r) ** 4

    def eval(self, positions, theta):
        p = np.atleast_2d(positions)
        r_pos = np.linalg.norm(p - self.center, axis=1) / self.pos_width
        r_ang = np.linalg.norm(np.asarray(theta, dtype=float) - self.axis) / self.ang_width
        return self.amplitude * self._bump(r_pos) * self._bump(np.asarray(r_ang))


@dataclasses.dataclass(frozen=True)
class LinearCombinationFlux(BoundaryFlux):
    fluxes: Tuple[BoundaryFlux, ...]
    coeffs: Tuple[float, ...]

    def eval(self, positions, theta):
        total = np.zeros(np.atleast_2d(positions).shape[0])
        for c, f in zip(self.coeffs, self.fluxes):
            total = total + c * f.eval(positions, theta)
        return total


def flux_mass(flux: BoundaryFlux, bgrid: BoundaryGrid, quad: SphereQuadrature) -> float:
    """Integral of the flux over the incoming boundary set in the flux measure."""
    mass = 0.0
    for node, w in zip(quad.nodes, quad.weights):
        cos = bgrid.normals @ node
        incoming = cos < -GRAZING_TOL
        if not np.any(incoming):
            continue
        vals = flux.eval(bgrid.positions[incoming], node)
        mass += w * float(np.sum(vals * np.abs(cos[incoming]) * bgrid.mu_weights[incoming]))
    return mass


@dataclasses.dataclass(frozen=True)
class SampledBoundaryFlux(BoundaryFlux):
    """Flux sampled on a boundary grid crossed with the direction set."""

    bgrid: BoundaryGrid
    quad: SphereQuadrature
    values: np.ndarray  # (M, n_dirs)
    side: str = "outgoing"

    def _side_mask(self):
        cos = self.bgrid.normals @ self.quad.nodes.T
        if self.side == "outgoing":
            return cos > GRAZING_TOL
        return cos < -GRAZING_TOL

    def _dxi_weights(self):
        cos = np.abs(self.bgrid.normals @ self.quad.nodes.T)
        return cos * self.bgrid.mu_weights[:, None] * self.quad.weights[None, :]

    def l1_dxi(self) -> float:
        mask = self._side_mask()
        return float(np.sum(np.abs(self.values) * self._dxi_weights() * mask))

    def relative_l1_diff(self, other: "SampledBoundaryFlux") -> float:
        mask = self._side_mask()
        w = self._dxi_weights()
        num = float(np.sum(np.abs(self.values - other.values) * w * mask))
        den = float(np.sum(np.abs(self.values) * w * mask))
        return num / max(den, 1e-300)

    def eval(self, positions, theta):
        j = int(np.argmax(self.quad.nodes @ np.asarray(theta, dtype=float)))
        p = np.atleast_2d(positions)
        idx = np.argmin(
            np.sum((p[:, None, :] - self.bgrid.positions[None, :, :]) ** 2, axis=2), axis=1)
        return self.values[idx, j]


# ---------------------------------------------------------------------------
# Phase-space grid
# ---------------------------------------------------------------------------

class PhaseGrid:
    """Cell-center lattice over the domain's bounding box with an inside mask.

    Values are stored on the full box; nodes outside the domain are filled
    with the value of the nearest inside node so that multilinear
    interpolation stays sane up to the boundary.
    """

    def __init__(self, domain: ConvexDomain, spatial_step: float):
        if spatial_step <= 0.0:
            raise ConfigurationError("spatial_step must be positive")
        self.domain = domain
        lo, hi = domain.bounding_box()
        extent = hi - lo
        self.counts = np.maximum(2, np.ceil(extent / spatial_step).astype(int))
        self.steps = extent / self.counts
        self.lo = lo
        axes = [lo[d] + (np.arange(self.counts[d]) + 0.5) * self.steps[d]
                for d in range(domain.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        self.nodes = np.column_stack([m.ravel() for m in mesh])
        self.inside = domain.contains(self.nodes, atol=0.0)
        self.inside_idx = np.flatnonzero(self.inside)
        self.n_box = self.nodes.shape[0]
        self.cell_volume = float(np.prod(self.steps))
        self._strides = np.array(
            [int(np.prod(self.counts[d + 1:])) for d in range(domain.dim)])
        self._corners = [(int(np.dot(c, self._strides)), c)
                         for c in itertools.product((0, 1), repeat=domain.dim)]
        self.fill_map = self._nearest_inside_map()

    def _nearest_inside_map(self) -> np.ndarray:
        outside = (~self.inside).reshape(self.counts)
        if not outside.any():
            return np.arange(self.n_box)
        idx = ndimage.distance_transform_edt(outside, return_distances=False,
                                             return_indices=True)
        flat = np.zeros(self.counts, dtype=int)
        for d in range(len(self.counts)):
            flat = flat + idx[d] * self._strides[d]
        return flat.ravel()

    @property
    def n_inside(self) -> int:
        return int(self.inside_idx.size)

    @property
    def inside_nodes(self) -> np.ndarray:
        return self.nodes[self.inside_idx]

    def fill(self, inside_values: np.ndarray) -> np.ndarray:
        """Scatter per-inside-node values onto the box, ghost-filling outside."""
        shape = (self.n_box,) + inside_values.shape[1:]
        box = np.zeros(shape)
        box[self.inside_idx] = inside_values
        return box[self.fill_map]

    def interpolate(self, box_values: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Multilinear interpolation of one box-valued column at given points."""
        p = np.atleast_2d(points)
        frac = (p - self.lo) / self.steps - 0.5
        base = np.floor(frac).astype(int)
        np.clip(base, 0, self.counts - 2, out=base)
        t = np.clip(frac - base, 0.0, 1.0)
        base_flat = base @ self._strides
        weights_1d = [(1.0 - t[:, d], t[:, d]) for d in range(p.shape[1])]
        out = np.zeros(p.shape[0])
        for offset, corner in self._corners:
            w = weights_1d[0][corner[0]]
            for d in range(1, len(corner)):
                w = w * weights_1d[d][corner[d]]
            out += w * box_values[base_flat + offset]
        return out


@dataclasses.dataclass(frozen=True)
class PhaseSpaceField:
    """Sampled u(x_i, theta_j): multilinear in x, nearest node in theta."""

    grid: PhaseGrid
    quad: SphereQuadrature
    values: np.ndarray  # (n_box, n_dirs), ghost-filled outside the domain

    def eval(self, x, theta) -> float:
        j = int(np.argmax(self.quad.nodes @ np.asarray(theta, dtype=float)))
        return float(self.grid.interpolate(self.values[:, j], np.asarray(x, dtype=float))[0])

    def inside_values(self) -> np.ndarray:
        return self.values[self.grid.inside_idx]

    def l1_norm(self) -> float:
        u = np.abs(self.inside_values())
        return float(self.grid.cell_volume * np.sum(u @ self.quad.weights))

    def min_inside(self) -> float:
        return float(np.min(self.inside_values()))


# ---------------------------------------------------------------------------
# Elementary operations
# ---------------------------------------------------------------------------

def attenuation_integral(pair: MediumPair, domain: ConvexDomain, x, theta,
                         s_from: float, s_to: float, step: float) -> float:
    """Composite-Simpson integral of a(x - t*theta, theta) for t in [s_from, s_to]."""
    if s_to < s_from:
        return -attenuation_integral(pair, domain, x, theta, s_to, s_from, step)
    p = np.asarray(x, dtype=float)
    t = np.asarray(theta, dtype=float)
    for endpoint in (p - s_from * t, p - s_to * t):
        if float(domain.boundary_excess(endpoint)) > BOUNDARY_ATOL * 10:
            raise DomainError("ray segment leaves the domain")
    length = s_to - s_from
    n = even_panels(length, step)
    h = length / n
    coeff = simpson_coefficients(n)
    samples = p - (s_from + h * np.arange(n + 1))[:, None] * t
    vals = pair.absorption.eval(samples, t)
    return float(np.dot(coeff, vals) * h / 3.0)


def _direction_caches(pair, domain, grid, quad, f_minus, ray_step):
    """Per-direction chord data and ballistic values at the inside nodes."""
    X = grid.inside_nodes
    caches = []
    for node in quad.nodes:
        tau = exit_times(domain, X, -node)
        n = even_panels(float(np.max(tau, initial=0.0)), ray_step)
        _, depth = attenuated_source_integral(
            lambda pts: pair.absorption.eval(pts, node), None, X, -node, tau, n)
        entries = X - tau[:, None] * node
        u0 = np.exp(-depth) * f_minus.eval(entries, node)
        caches.append({"tau": tau, "panels": n, "u0": u0})
    return caches


def ballistic_solve(pair: MediumPair, domain: ConvexDomain, f_minus: BoundaryFlux,
                    quad: SphereQuadrature, spatial_step: float,
                    ray_step: float) -> PhaseSpaceField:
    """Zero-collision solution: boundary data attenuated along straight rays."""
    grid = PhaseGrid(domain, spatial_step)
    caches = _direction_caches(pair, domain, grid, quad, f_minus, ray_step)
    u0 = np.column_stack([c["u0"] for c in caches])
    return PhaseSpaceField(grid, quad, grid.fill(u0))


def scattering_apply(pair: MediumPair, domain: ConvexDomain, u: PhaseSpaceField,
                     quad: SphereQuadrature) -> PhaseSpaceField:
    """S[u](x, theta) = sum_j w_j k(x, theta_j, theta) u(x, theta_j)."""
    q = _scatter_inside(pair, u.grid, quad, u.inside_values())
    return PhaseSpaceField(u.grid, quad, u.grid.fill(q))


def _scatter_inside(pair, grid, quad, u_inside):
    kernel = pair.scattering
    parts = kernel.factor_parts(grid.inside_nodes, quad)
    w = quad.weights
    if parts is not None:
        g, h_mat, gauge_logs = parts
        if gauge_logs is None:
            return g[:, None] * ((u_inside * w) @ h_mat)
        damp = np.exp(-gauge_logs)
        return np.exp(gauge_logs) * (g[:, None] * (((u_inside * damp) * w) @ h_mat))
    # generic fallback: loop over direction pairs
    X = grid.inside_nodes
    q = np.zeros_like(u_inside)
    for j, node_in in enumerate(quad.nodes):
        for i, node_out in enumerate(quad.nodes):
            q[:, i] += w[j] * kernel.eval(X, node_in, node_out) * u_inside[:, j]
    return q


def _sweep(pair, grid, quad, q_box, caches, u0, ray_step):
    """One transport application: u0 + ray-integrated attenuated source."""
    X = grid.inside_nodes
    out = np.empty_like(u0)
    for j, node in enumerate(quad.nodes):
        cache = caches[j]
        integral, _ = attenuated_source_integral(
            lambda pts: pair.absorption.eval(pts, node),
            lambda pts, col=q_box[:, j]: grid.interpolate(col, pts),
            X, -node, cache["tau"], cache["panels"])
        out[:, j] = u0[:, j] + integral
    return out


@dataclasses.dataclass
class SolveResult:
    field: PhaseSpaceField
    orders: Tuple[PhaseSpaceField, ...]   # collision orders 0 and 1
    iterations: int
    residual: float
    residual_history: Tuple[float, ...]
    source_box: np.ndarray                # converged scattering source (box values)
    first_source_box: np.ndarray          # scattering source of the ballistic field
    grid: PhaseGrid
    quad: SphereQuadrature
    pair: MediumPair
    domain: ConvexDomain
    f_minus: BoundaryFlux
    ray_step: float


def source_iteration_solve(pair: MediumPair, domain: ConvexDomain,
                           f_minus: BoundaryFlux, quad: SphereQuadrature,
                           spatial_step: float, ray_step: float,
                           tol: float = 1e-8, max_iter: int = 200,
                           check_subcriticality: bool = True,
                           subcritical_sample: int = 2000) -> SolveResult:
    """Fixed-point iteration u <- u0 + B[u] retaining collision orders 0 and 1.

    Warns (does not refuse) when neither sampled subcriticality condition
    holds.  Raises ConvergenceError with the residual history if the relative
    L1 change has not dropped below ``tol`` after ``max_iter`` sweeps.
    """
    if check_subcriticality:
        cs = check_subcritical_cs(pair, domain, sample=subcritical_sample)
        dl = check_subcritical_dl(pair, domain, sample=subcritical_sample)
        if not (cs.satisfied or dl.satisfied):
            warnings.warn("medium fails both sampled subcriticality conditions; "
                          "the source iteration may diverge", stacklevel=2)

    grid = PhaseGrid(domain, spatial_step)
    caches = _direction_caches(pair, domain, grid, quad, f_minus, ray_step)
    u0 = np.column_stack([c["u0"] for c in caches])

    u = u0.copy()
    u1 = None
    first_q_box = None
    history = []
    w = quad.weights
    for iteration in range(1, max_iter + 1):
        q_box = grid.fill(_scatter_inside(pair, grid, quad, u))
        if first_q_box is None:
            first_q_box = q_box
        u_new = _sweep(pair, grid, quad, q_box, caches, u0, ray_step)
        if u1 is None:
            u1 = u_new - u0
        num = float(np.sum(np.abs(u_new - u) @ w))
        den = max(float(np.sum(np.abs(u_new) @ w)), 1e-300)
        residual = num / den
        history.append(residual)
        u = u_new
        if residual < tol:
            break
        if not np.isfinite(residual) or residual > _DIVERGENCE_GUARD:
            raise ConvergenceError("source iteration diverged", history)
    else:
        raise ConvergenceError(
            f"source iteration did not reach tol={tol:g} in {max_iter} sweeps "
            f"(last residual {history[-1]:.3e})", history)

    final_q_box = grid.fill(_scatter_inside(pair, grid, quad, u))
    make = lambda vals: PhaseSpaceField(grid, quad, grid.fill(vals))
    return SolveResult(make(u), (make(u0), make(u1)), iteration, history[-1],
                       tuple(history), final_q_box, first_q_box, grid, quad,
                       pair, domain, f_minus, ray_step)


# ---------------------------------------------------------------------------
# Exit fluxes and the albedo kernel decomposition
# ---------------------------------------------------------------------------

def _exit_values(result: SolveResult, bgrid: BoundaryGrid, component: str) -> np.ndarray:
    """Exit flux on outgoing (boundary point, direction) pairs.

    Components: "total" (converged), "ballistic" (order 0), "single"
    (order 1), "remainder" (total minus orders 0 and 1).
    """
    pair, domain, quad = result.pair, result.domain, result.quad
    grid, f_minus = result.grid, result.f_minus
    values = np.zeros((bgrid.size, quad.order))
    for j, node in enumerate(quad.nodes):
        cos = bgrid.normals @ node
        outgoing = cos > GRAZING_TOL
        if not np.any(outgoing):
            continue
        B = bgrid.positions[outgoing]
        tau = exit_times(domain, B, -node)
        n = even_panels(float(np.max(tau, initial=0.0)), result.ray_step)
        absorption_at = lambda pts: pair.absorption.eval(pts, node)
        if component == "ballistic":
            _, depth = attenuated_source_integral(absorption_at, None, B, -node, tau, n)
            entries = B - tau[:, None] * node
            values[outgoing, j] = np.exp(-depth) * f_minus.eval(entries, node)
            continue
        if component == "total":
            q_col = result.source_box[:, j]
        elif component == "single":
            q_col = result.first_source_box[:, j]
        elif component == "remainder":
            q_col = result.source_box[:, j] - result.first_source_box[:, j]
        else:
            raise ConfigurationError(f"unknown exit-flux component {component!r}")
        integral, depth = attenuated_source_integral(
            absorption_at, lambda pts: grid.interpolate(q_col, pts), B, -node, tau, n)
        if component == "total":
            entries = B - tau[:, None] * node
            integral = integral + np.exp(-depth) * f_minus.eval(entries, node)
        values[outgoing, j] = integral
    return values


@dataclasses.dataclass(frozen=True)
class SolverConfig:
    spatial_step: float
    angular_order: int
    ray_step: float
    tol: float = 1e-8
    max_iter: int = 200
    boundary_points: Optional[int] = None

    def default_boundary_points(self, dim: int) -> int:
        if self.boundary_points is not None:
            return self.boundary_points
        return 256 if dim == 2 else 800


def solve_with_config(pair: MediumPair, domain: ConvexDomain, f_minus: BoundaryFlux,
                      config: SolverConfig) -> SolveResult:
    quad = make_sphere_quadrature(domain.dim, config.angular_order)
    return source_iteration_solve(pair, domain, f_minus, quad,
                                  config.spatial_step, config.ray_step,
                                  tol=config.tol, max_iter=config.max_iter)


def albedo_apply(pair: MediumPair, domain: ConvexDomain, f_minus: BoundaryFlux,
                 config: SolverConfig) -> SampledBoundaryFlux:
    """Outgoing boundary flux of the converged solution for given incoming data."""
    result = solve_with_config(pair, domain, f_minus, config)
    bgrid = make_boundary_grid(domain, config.default_boundary_points(domain.dim))
    values = _exit_values(result, bgrid, "total")
    return SampledBoundaryFlux(bgrid, result.quad, values, "outgoing")


def chord_attenuation_map(pair: MediumPair, domain: ConvexDomain,
                          bgrid: BoundaryGrid, quad: SphereQuadrature,
                          ray_step: float) -> np.ndarray:
    """exp(-full chord optical depth) for each outgoing exit pair."""
    values = np.zeros((bgrid.size, quad.order))
    for j, node in enumerate(quad.nodes):
        cos = bgrid.normals @ node
        outgoing = cos > GRAZING_TOL
        if not np.any(outgoing):
            continue
        B = bgrid.positions[outgoing]
        tau = exit_times(domain, B, -node)
        n = even_panels(float(np.max(tau, initial=0.0)), ray_step)
        _, depth = attenuated_source_integral(
            lambda pts: pair.absorption.eval(pts, node), None, B, -node, tau, n)
        values[outgoing, j] = np.exp(-depth)
    return values


def alpha2_eval(pair: MediumPair, domain: ConvexDomain, x_plus: BoundaryPoint,
                theta, x_prime: BoundaryPoint, theta_prime, ray_step: float,
                parallel_tol: float = 1e-6, geom_tol: float = 1e-7) -> float:
    """Single-scattering kernel density for the exit pair (x_plus, theta) and
    the entry pair (x_prime, theta_prime).

    Locates the scattering vertex as the closest-approach point of the exit
    line and the entry beam; returns 0 when the broken path misses the pair
    by more than ``geom_tol`` (always a miss for skew lines in 3D beyond it).
    """
    t_out = np.asarray(theta, dtype=float)
    t_in = np.asarray(theta_prime, dtype=float)
    c = float(np.dot(t_out, t_in))
    if 1.0 - abs(c) < parallel_tol:
        raise ParallelDirectionsError("directions too close to parallel for a vertex")
    w0 = x_prime.position - x_plus.position
    det = 1.0 - c * c
    s_star = (-np.dot(w0, t_in) + c * np.dot(w0, t_out)) / det
    t_star = (-np.dot(w0, t_out) + c * np.dot(w0, t_in)) / det
    gap = float(np.linalg.norm(w0 + s_star * t_in + t_star * t_out))
    if gap > geom_tol or t_star < -geom_tol:
        return 0.0
    vertex = x_plus.position - max(t_star, 0.0) * t_out
    if not bool(domain.contains(vertex, atol=BOUNDARY_ATOL)):
        return 0.0
    tau_in = float(exit_times(domain, vertex, -t_in)[0])
    expected_entry = vertex - tau_in * t_in
    if float(np.linalg.norm(expected_entry - x_prime.position)) > max(geom_tol, 1e-6):
        return 0.0
    att_out = attenuation_integral(pair, domain, x_plus.position, t_out,
                                   0.0, max(t_star, 0.0), ray_step)
    att_in = attenuation_integral(pair, domain, vertex, t_in, 0.0, tau_in, ray_step)
    k_val = float(pair.scattering.eval(vertex, t_in, t_out))
    return float(np.exp(-(att_out + att_in)) * k_val)


@dataclasses.dataclass(frozen=True)
class AlbedoDecomposition:
    """Exit-grid samples of the albedo response split by collision count."""

    bgrid: BoundaryGrid
    quad: SphereQuadrature
    ballistic_map: np.ndarray                 # chord attenuation per exit pair
    beams: Tuple[BoundaryFlux, ...]
    beam_masses: Tuple[float, ...]
    components: Tuple[dict, ...]              # per beam: component -> (M, n_dirs)

    def l1_dxi(self, beam_index: int, component: str) -> float:
        flux = SampledBoundaryFlux(self.bgrid, self.quad,
                                   self.components[beam_index][component], "outgoing")
        return flux.l1_dxi()

    def min_value(self, beam_index: int, component: str) -> float:
        return float(np.min(self.components[beam_index][component]))


def decompose_albedo(pair: MediumPair, domain: ConvexDomain,
                     beam_grid: Sequence[BoundaryFlux],
                     config: SolverConfig) -> AlbedoDecomposition:
    """Solve per input beam and split the exit flux into collision orders."""
    quad = make_sphere_quadrature(domain.dim, config.angular_order)
    bgrid = make_boundary_grid(domain, config.default_boundary_points(domain.dim))
    ballistic_map = chord_attenuation_map(pair, domain, bgrid, quad, config.ray_step)
    components = []
    masses = []
    for beam in beam_grid:
        result = source_iteration_solve(pair, domain, beam, quad,
                                        config.spatial_step, config.ray_step,
                                        tol=config.tol, max_iter=config.max_iter)
        parts = {name: _exit_values(result, bgrid, name)
                 for name in ("ballistic", "single", "remainder")}
        parts["total"] = parts["ballistic"] + parts["single"] + parts["remainder"]
        components.append(parts)
        masses.append(flux_mass(beam, bgrid, quad))
    return AlbedoDecomposition(bgrid, quad, ballistic_map, tuple(beam_grid),
                               tuple(masses), tuple(components))
