"""Singularity-extraction functionals on the albedo kernel.

Two routes are provided for the ballistic factor and the single-scattering
density.  The exact route evaluates the closed-form chord/broken-ray
attenuation integrals directly from the medium.  The mollified route
convolves the kernel against shrinking test functions: the ballistic and
single-scatter parts are integrated semi-analytically over their known
geometric supports (a point mass for the ballistic part, a one-dimensional
vertex family for single scattering), while the multiple-scattering
remainder, when requested, is obtained from a forward solve driven by the
test function itself, so that distributional inputs are never materialized
on a grid.

Mollified functionals are only defined in three dimensions; in 2D use the
exact route.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Optional

import numpy as np

from .errors import (ConfigurationError, ParallelDirectionsError,
                     ResolutionError)
from .geometry import (BoundaryGrid, ConvexDomain, SphereQuadrature,
                       exit_times, make_sphere_quadrature)
from .media import MediumPair
from .rays import even_panels, segment_simpson, simpson_coefficients
from .transport import (BoundaryFlux, SolverConfig, _exit_values,
                        source_iteration_solve)

PARALLEL_TOL = 1e-8


# ---------------------------------------------------------------------------
# Mollifiers
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class Mollifier1D:
    """Even bump c*(1-t^2)^4 on (-1, 1), normalized to unit integral."""

    normalization: float = 315.0 / 256.0

    def profile(self, t):
        t = np.asarray(t, dtype=float)
        return self.normalization * np.maximum(0.0, 1.0 - t * t) ** 4

    def integral(self, n: int = 20001) -> float:
        t = np.linspace(-1.0, 1.0, n)
        return float(np.trapezoid(self.profile(t), t))


@dataclasses.dataclass(frozen=True)
class MollifierND:
    """Radial plateau bump: 1 on |y| <= 1/2, 0 on |y| >= 1, quintic in between."""

    def radial(self, r):
        r = np.asarray(r, dtype=float)
        s = np.clip((r - 0.5) / 0.5, 0.0, 1.0)
        return 1.0 - s ** 3 * (10.0 - 15.0 * s + 6.0 * s * s)

    def profile(self, y):
        return self.radial(np.linalg.norm(np.atleast_2d(y), axis=-1))


# ---------------------------------------------------------------------------
# Direction pair frame
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class DirectionPairFrame:
    """Orthogonal frame for a nonparallel direction pair.

    ``perp`` is the unit vector in span{theta, theta_prime} orthogonal to
    theta_prime with theta . perp > 0; ``projector`` maps onto the span.
    """

    theta: np.ndarray
    theta_prime: np.ndarray
    perp: np.ndarray
    projector: np.ndarray

    @staticmethod
    def build(theta, theta_prime, parallel_tol: float = PARALLEL_TOL) -> "DirectionPairFrame":
        t = np.asarray(theta, dtype=float)
        tp = np.asarray(theta_prime, dtype=float)
        c = float(np.dot(t, tp))
        if 1.0 - abs(c) < parallel_tol:
            raise ParallelDirectionsError(
                f"direction pair is parallel within tolerance (|cos| = {abs(c):.12f})")
        perp = t - c * tp
        perp = perp / np.linalg.norm(perp)
        projector = np.outer(tp, tp) + np.outer(perp, perp)
        return DirectionPairFrame(t, tp, perp, projector)

    def project(self, y):
        return np.asarray(y, dtype=float) @ self.projector.T


# ---------------------------------------------------------------------------
# Exact functionals
# ---------------------------------------------------------------------------

def _chord_attenuations(pair, domain, points, thetas, ray_step):
    """Full-chord optical depth, anchored at the entry point of each ray."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    t = np.asarray(thetas, dtype=float)
    if t.ndim == 1:
        t = np.broadcast_to(t, p.shape)
    tau_minus = exit_times(domain, p, -t)
    tau = tau_minus + exit_times(domain, p, t)
    entries = p - tau_minus[:, None] * t
    n = even_panels(float(np.max(tau, initial=0.0)), ray_step)
    return segment_simpson(lambda pts: pair.absorption.eval(pts, t), entries, t, tau, n)


def j0_values(pair: MediumPair, domain: ConvexDomain, points, thetas,
              ray_step: float) -> np.ndarray:
    """Batched ballistic factors exp(-full chord attenuation)."""
    return np.exp(-_chord_attenuations(pair, domain, points, thetas, ray_step))


def j0_exact(pair: MediumPair, domain: ConvexDomain, x, theta, ray_step: float) -> float:
    """Ballistic factor through (x, theta); constant along the chord."""
    return float(j0_values(pair, domain, x, theta, ray_step)[0])


def _half_attenuations(pair, domain, points, thetas_in, thetas_out, ray_step):
    p = np.atleast_2d(np.asarray(points, dtype=float))
    tin = np.asarray(thetas_in, dtype=float)
    tout = np.asarray(thetas_out, dtype=float)
    if tin.ndim == 1:
        tin = np.broadcast_to(tin, p.shape)
    if tout.ndim == 1:
        tout = np.broadcast_to(tout, p.shape)
    tau_in = exit_times(domain, p, -tin)
    tau_out = exit_times(domain, p, tout)
    n_in = even_panels(float(np.max(tau_in, initial=0.0)), ray_step)
    n_out = even_panels(float(np.max(tau_out, initial=0.0)), ray_step)
    att_in = segment_simpson(lambda pts: pair.absorption.eval(pts, tin), p, -tin, tau_in, n_in)
    att_out = segment_simpson(lambda pts: pair.absorption.eval(pts, tout), p, tout, tau_out, n_out)
    return att_in, att_out


def i00_values(pair: MediumPair, domain: ConvexDomain, points, thetas_in, thetas_out,
               ray_step: float) -> np.ndarray:
    """Batched single-scattering densities (no parallelism guard)."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    att_in, att_out = _half_attenuations(pair, domain, p, thetas_in, thetas_out, ray_step)
    k_vals = pair.scattering.eval(p, np.asarray(thetas_in, dtype=float),
                                  np.asarray(thetas_out, dtype=float))
    return np.exp(-(att_in + att_out)) * k_vals


def i00_exact(pair: MediumPair, domain: ConvexDomain, x, theta_prime, theta,
              ray_step: float, parallel_tol: float = PARALLEL_TOL) -> float:
    """Single-scattering density at x for incoming theta_prime, outgoing theta.

    Near-parallel pairs (theta_prime close to +theta) are excluded: there the
    single-scattering and ballistic supports merge.  The antipodal
    (backscatter) configuration is allowed; it is the input of the
    absorption reconstruction formula and is well defined by continuity.
    """
    c = float(np.dot(np.asarray(theta_prime, dtype=float), np.asarray(theta, dtype=float)))
    if 1.0 - c < parallel_tol:
        raise ParallelDirectionsError("incoming direction nearly parallel to outgoing")
    return float(i00_values(pair, domain, x, theta_prime, theta, ray_step)[0])


@dataclasses.dataclass(frozen=True)
class ExtractionData:
    """Exact extraction-data provider backed by a medium pair.

    Evaluates the ballistic factor and single-scattering density anywhere,
    which is what the finite-difference absorption recovery needs.
    """

    pair: MediumPair
    domain: ConvexDomain
    ray_step: float = 1e-3
    provenance: str = "exact"

    def j0(self, x, theta) -> float:
        return j0_exact(self.pair, self.domain, x, theta, self.ray_step)

    def j0_batch(self, points, thetas) -> np.ndarray:
        return j0_values(self.pair, self.domain, points, thetas, self.ray_step)

    def i00(self, x, theta_prime, theta) -> float:
        return float(i00_values(self.pair, self.domain, x, theta_prime, theta,
                                self.ray_step)[0])

    def i00_batch(self, points, thetas_in, thetas_out) -> np.ndarray:
        return i00_values(self.pair, self.domain, points, thetas_in, thetas_out,
                          self.ray_step)


# ---------------------------------------------------------------------------
# Mollified functionals
# ---------------------------------------------------------------------------

def _orthonormal_complement(theta):
    """Two unit vectors completing theta to an orthonormal 3D basis."""
    t = np.asarray(theta, dtype=float)
    seed = np.zeros(3)
    seed[int(np.argmin(np.abs(t)))] = 1.0
    e1 = seed - np.dot(seed, t) * t
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(t, e1)


def _cap_rule(theta, eps, n_radial: int = 8, n_azimuth: int = 16):
    """Quadrature for the normalized sphere measure on the cap |w - theta| <= eps."""
    alpha_max = 2.0 * math.asin(min(eps, 2.0) / 2.0)
    x, gw = np.polynomial.legendre.leggauss(n_radial)
    alpha = 0.5 * (x + 1.0) * alpha_max
    w_alpha = gw * 0.5 * alpha_max
    psi = 2.0 * np.pi * (np.arange(n_azimuth) + 0.5) / n_azimuth
    e1, e2 = _orthonormal_complement(theta)
    t = np.asarray(theta, dtype=float)
    nodes = []
    weights = []
    for a, wa in zip(alpha, w_alpha):
        ring = (math.cos(a) * t[None, :]
                + math.sin(a) * (np.cos(psi)[:, None] * e1 + np.sin(psi)[:, None] * e2))
        nodes.append(ring)
        weights.append(np.full(n_azimuth, wa * math.sin(a) * (2.0 * np.pi / n_azimuth)
                               / (4.0 * np.pi)))
    return np.vstack(nodes), np.concatenate(weights)


class _LumpedDirectionFlux(BoundaryFlux):
    """Positional profile times a single-direction mass lump on the node set.

    Represents inputs whose angular factor concentrates faster than the
    direction set resolves: the full angular mass is assigned to the node
    closest to the target direction (the response is smooth in angle there).
    """

    def __init__(self, positional, node, node_weight, mass):
        self._positional = positional
        self._node = np.asarray(node, dtype=float)
        self._scale = mass / node_weight

    def eval(self, positions, theta):
        p = np.atleast_2d(positions)
        if float(np.dot(np.asarray(theta, dtype=float), self._node)) < 1.0 - 1e-12:
            return np.zeros(p.shape[0])
        return self._scale * self._positional(p)


class AlbedoKernelEvaluator:
    """Mollified functionals of the albedo kernel for a medium pair.

    The ballistic and single-scatter contributions are integrated over their
    geometric supports.  With ``include_remainder=True`` a forward solve per
    evaluation adds the multiple-scattering contribution; this requires a
    solver configuration and probe directions that belong to the direction
    set of the solver.
    """

    def __init__(self, pair: MediumPair, domain: ConvexDomain, ray_step: float = 1e-3,
                 s_panels: int = 160, include_remainder: bool = False,
                 solver_config: Optional[SolverConfig] = None):
        if domain.dim != 3:
            raise ConfigurationError("mollified extraction is defined in 3D only")
        self.pair = pair
        self.domain = domain
        self.ray_step = ray_step
        self.s_panels = s_panels + (s_panels % 2)
        self.include_remainder = include_remainder
        self.solver_config = solver_config
        self._quad = None
        if include_remainder:
            if solver_config is None:
                raise ConfigurationError("remainder evaluation needs a solver config")
            self._quad = make_sphere_quadrature(3, solver_config.angular_order)

    # -- geometry helpers ---------------------------------------------------

    def _chord(self, x, theta):
        p = np.asarray(x, dtype=float)
        t = np.asarray(theta, dtype=float)
        tau_minus = float(exit_times(self.domain, p, -t)[0])
        tau_plus = float(exit_times(self.domain, p, t)[0])
        entry = p - tau_minus * t
        exit_pos = p + tau_plus * t
        return entry, exit_pos, tau_minus + tau_plus

    def _outgoing_cumdepth(self, exit_pos, theta, tau):
        """Optical depth from the exit point backwards at the s-grid nodes."""
        k = self.s_panels
        s = tau * np.arange(k + 1) / k
        pts = exit_pos[None, :] - s[:, None] * theta
        a = self.pair.absorption.eval(pts, np.asarray(theta, dtype=float))
        h = tau / k
        depth = np.concatenate([[0.0], np.cumsum(0.5 * h * (a[1:] + a[:-1]))])
        return s, pts, depth

    def _incoming_attenuation(self, vertices, theta_prime):
        tp = np.asarray(theta_prime, dtype=float)
        tau_in = exit_times(self.domain, vertices, -tp)
        n = even_panels(float(np.max(tau_in, initial=0.0)), max(self.ray_step, 1e-2))
        att = segment_simpson(lambda pts: self.pair.absorption.eval(pts, tp),
                              vertices, -tp, tau_in, n)
        return tau_in, att

    def _node_index(self, theta):
        dots = self._quad.nodes @ np.asarray(theta, dtype=float)
        j = int(np.argmax(dots))
        if dots[j] < 1.0 - 1e-9:
            raise ConfigurationError(
                "remainder evaluation requires probe directions from the solver's "
                "direction set")
        return j

    def _remainder_exit(self, flux, exit_pos, theta):
        cfg = self.solver_config
        result = source_iteration_solve(self.pair, self.domain, flux, self._quad,
                                        cfg.spatial_step, cfg.ray_step,
                                        tol=cfg.tol, max_iter=cfg.max_iter,
                                        check_subcriticality=False)
        bgrid = BoundaryGrid(np.atleast_2d(exit_pos),
                             np.atleast_2d(self.domain.normal_at(exit_pos)),
                             np.ones(1))
        vals = _exit_values(result, bgrid, "remainder")
        return float(vals[0, self._node_index(theta)])

    # -- ballistic functional -----------------------------------------------

    def j_eps(self, x, theta, eps: float, mollifier: MollifierND) -> float:
        if eps <= 0.0:
            raise ConfigurationError("eps must be positive")
        if self.include_remainder and eps < self.solver_config.spatial_step:
            raise ResolutionError("eps below the spatial resolution of the remainder solve")
        t = np.asarray(theta, dtype=float)
        entry, exit_pos, tau = self._chord(x, theta)

        # ballistic part: point mass at (entry, theta); the plateau gives 1 there
        s, verts, cum_out = self._outgoing_cumdepth(exit_pos, t, tau)
        att_full = cum_out[-1]
        value = math.exp(-att_full)

        # single-scatter part: vertex integral against both mollifier factors
        cap_nodes, cap_w = _cap_rule(t, eps)
        coeff = simpson_coefficients(self.s_panels)
        h = tau / self.s_panels
        for node, w_dir in zip(cap_nodes, cap_w):
            dir_factor = float(mollifier.radial(np.linalg.norm(node - t) / eps))
            if dir_factor == 0.0:
                continue
            tau_in, att_in = self._incoming_attenuation(verts, node)
            entries_in = verts - tau_in[:, None] * node
            pos_factor = mollifier.radial(
                np.linalg.norm(entries_in - entry, axis=1) / eps)
            k_vals = self.pair.scattering.eval(verts, node, t)
            integrand = np.exp(-(cum_out + att_in)) * k_vals * pos_factor
            value += w_dir * dir_factor * float(np.dot(coeff, integrand)) * h / 3.0

        if self.include_remainder:
            mass = float(np.sum(cap_w * mollifier.radial(
                np.linalg.norm(cap_nodes - t, axis=1) / eps)))
            positional = lambda p: mollifier.radial(
                np.linalg.norm(p - entry, axis=1) / eps)
            j = self._node_index(t)
            flux = _LumpedDirectionFlux(positional, self._quad.nodes[j],
                                        float(self._quad.weights[j]), mass)
            value += self._remainder_exit(flux, exit_pos, t)
        return value

    # -- single-scatter functional -------------------------------------------

    def i_eps_delta(self, x, theta_prime, theta, eps: float, delta: float,
                    m1: Mollifier1D, mnd: MollifierND) -> float:
        if eps <= 0.0 or delta <= 0.0:
            raise ConfigurationError("eps and delta must be positive")
        if self.include_remainder and eps < self.solver_config.spatial_step:
            raise ResolutionError("eps below the spatial resolution of the remainder solve")
        frame = DirectionPairFrame.build(theta, theta_prime)
        t, tp = frame.theta, frame.theta_prime
        p = np.asarray(x, dtype=float)
        _, exit_pos, tau = self._chord(p, t)
        tau_in_ref = float(exit_times(self.domain, p, -tp)[0])
        entry_ref = p - tau_in_ref * tp

        s, verts, cum_out = self._outgoing_cumdepth(exit_pos, t, tau)
        tau_in, att_in = self._incoming_attenuation(verts, tp)
        entries_in = verts - tau_in[:, None] * tp
        y_arg = entries_in - entry_ref
        along = y_arg @ frame.perp
        transverse = y_arg - frame.project(y_arg)
        f1 = m1.profile(along / (eps * float(np.dot(t, frame.perp)))) / eps
        f2 = mnd.radial(np.linalg.norm(transverse, axis=1) / delta)
        k_vals = self.pair.scattering.eval(verts, tp, t)
        integrand = np.exp(-(cum_out + att_in)) * k_vals * f1 * f2
        coeff = simpson_coefficients(self.s_panels)
        value = float(np.dot(coeff, integrand)) * (tau / self.s_panels) / 3.0

        if self.include_remainder:
            def positional(q, _frame=frame, _ref=entry_ref):
                d = np.atleast_2d(q) - _ref
                a = d @ _frame.perp
                tr = d - _frame.project(d)
                g1 = m1.profile(a / (eps * float(np.dot(t, _frame.perp)))) / eps
                g2 = mnd.radial(np.linalg.norm(tr, axis=1) / delta)
                return g1 * g2
            j_in = self._node_index(tp)
            flux = _LumpedDirectionFlux(positional, self._quad.nodes[j_in],
                                        float(self._quad.weights[j_in]), 1.0)
            value += self._remainder_exit(flux, exit_pos, t)
        return value


def j_eps_mollified(evaluator: AlbedoKernelEvaluator, domain: ConvexDomain,
                    x, theta, eps: float, mollifier: MollifierND) -> float:
    """Mollified ballistic functional; converges to j0_exact as eps -> 0."""
    return evaluator.j_eps(x, theta, eps, mollifier)


def i_eps_delta_mollified(evaluator: AlbedoKernelEvaluator, domain: ConvexDomain,
                          x, theta_prime, theta, eps: float, delta: float,
                          m1: Mollifier1D, mnd: MollifierND) -> float:
    """Mollified single-scatter functional; converges to i00_exact as
    delta -> 0 then eps -> 0."""
    return evaluator.i_eps_delta(x, theta_prime, theta, eps, delta, m1, mnd)
