"""Gauge fields and the gauge transformation of coefficient pairs.

A gauge is carried as its logarithm v(x, theta) with phi = exp(v), so
positivity of phi holds by construction.  The parametric family multiplies
the domain's boundary-defining function b(x) (zero on the boundary, positive
inside) by a polynomial in (x, theta), which makes phi = 1 on the boundary
exact rather than approximate.  Gauges recovered from data are carried
numerically through half-line integrals of the absorption difference.
"""

from __future__ import annotations

import dataclasses
from typing import Callable, Optional, Tuple

import numpy as np

from .errors import GaugeValidationError, NotGaugeEquivalentError
from .geometry import (ConvexDomain, exit_times, halton_interior_points,
                       make_boundary_grid, random_directions)
from .media import (AbsorptionField, FieldTerm, GaugeDecoratedKernel,
                    GeneralSumAbsorption, MediumPair)
from .rays import even_panels, segment_simpson

BOUNDARY_VANISH_TOL = 1e-9


def _norm_args(points, thetas):
    p = np.asarray(points, dtype=float)
    t = np.asarray(thetas, dtype=float)
    return np.broadcast_arrays(p, t)


class GaugeField:
    """Log-gauge v with phi = exp(v) and the ray derivative theta . grad_x v."""

    theta_independent = False

    def v(self, points, thetas) -> np.ndarray:
        raise NotImplementedError

    def log_derivative(self, points, thetas) -> np.ndarray:
        raise NotImplementedError

    def phi(self, points, thetas) -> np.ndarray:
        return np.exp(self.v(points, thetas))


@dataclasses.dataclass(frozen=True)
class BoundaryPolyGauge(GaugeField):
    """v(x, theta) = b(x) * p(x, theta) with polynomial p.

    ``terms`` holds (coef, x_powers, theta_powers) monomials of p.  Because b
    vanishes on the boundary, phi = 1 there exactly.  The ray derivative is
    assembled analytically from grad b and the monomial gradients.
    """

    domain: ConvexDomain
    terms: Tuple[Tuple[float, Tuple[int, ...], Tuple[int, ...]], ...]

    @property
    def theta_independent(self) -> bool:
        return all(sum(tp) == 0 for _, _, tp in self.terms)

    def _poly(self, p, t):
        val = np.zeros(p.shape[:-1])
        for coef, xp, tp in self.terms:
            val = val + coef * np.prod(p ** np.asarray(xp), axis=-1) \
                * np.prod(t ** np.asarray(tp), axis=-1)
        return val

    def _poly_ray_derivative(self, p, t):
        """theta . grad_x of the polynomial part."""
        val = np.zeros(p.shape[:-1])
        for coef, xp, tp in self.terms:
            mono_t = np.prod(t ** np.asarray(tp), axis=-1)
            for i, power in enumerate(xp):
                if power == 0:
                    continue
                reduced = list(xp)
                reduced[i] -= 1
                val = val + coef * power * np.prod(p ** np.asarray(reduced), axis=-1) \
                    * mono_t * t[..., i]
        return val

    def v(self, points, thetas):
        p, t = _norm_args(points, thetas)
        return self.domain.boundary_defining(p) * self._poly(p, t)

    def log_derivative(self, points, thetas):
        p, t = _norm_args(points, thetas)
        b = self.domain.boundary_defining(p)
        grad_b = -2.0 * (p - self.domain.center) / (self.domain.semi_axes ** 2)
        t_dot_gb = np.sum(t * grad_b, axis=-1)
        return t_dot_gb * self._poly(p, t) + b * self._poly_ray_derivative(p, t)


def identity_gauge(domain: ConvexDomain) -> BoundaryPolyGauge:
    return BoundaryPolyGauge(domain, ())


def _field_eval(f) -> Callable:
    return f.eval if hasattr(f, "eval") else f


@dataclasses.dataclass(frozen=True)
class NumericGauge(GaugeField):
    """Gauge built from a field f via half-line integrals along -theta.

    v(x, theta) integrates f over the ray segment from the entry point to x,
    so theta . grad_x v = f by construction; the stored ``log_derivative``
    uses central differences (second order) as an independent realization.
    """

    domain: ConvexDomain
    source: object            # field with eval(points, thetas)
    step: float
    fd_step: float = 1e-4

    def v(self, points, thetas):
        p, t = _norm_args(points, thetas)
        rows = p.reshape(-1, p.shape[-1])
        trows = t.reshape(-1, t.shape[-1])
        tau = exit_times(self.domain, rows, -trows)
        n = even_panels(float(np.max(tau, initial=0.0)), self.step)
        f_eval = _field_eval(self.source)
        # integral over [0, tau] of f(x - s*theta, theta) ds
        vals = segment_simpson(lambda pts: f_eval(pts, trows), rows, -trows, tau, n)
        return vals.reshape(p.shape[:-1])

    def log_derivative(self, points, thetas):
        p, t = _norm_args(points, thetas)
        rows = p.reshape(-1, p.shape[-1])
        trows = t.reshape(-1, t.shape[-1])
        room = np.minimum(exit_times(self.domain, rows, trows),
                          exit_times(self.domain, rows, -trows))
        h = np.minimum(self.fd_step, 0.45 * room)
        h = np.maximum(h, 1e-9)
        vp = self.v(rows + h[:, None] * trows, trows)
        vm = self.v(rows - h[:, None] * trows, trows)
        return ((vp - vm) / (2.0 * h)).reshape(p.shape[:-1])


@dataclasses.dataclass(frozen=True)
class GaugeShiftTerm:
    """Absorption summand -theta . grad_x v carried by a gauge application."""

    gauge: GaugeField
    even = None

    def eval(self, points, thetas):
        return -self.gauge.log_derivative(points, thetas)


@dataclasses.dataclass(frozen=True)
class GaugeReport:
    max_boundary_abs_v: float
    sup_abs_v: float
    sup_abs_log_derivative: float


def validate_gauge(gauge: GaugeField, domain: ConvexDomain,
                   n_boundary: int = 64, n_interior: int = 128,
                   seed: int = 0) -> GaugeReport:
    """Check phi = 1 on the boundary and boundedness of v and its derivative."""
    bgrid = make_boundary_grid(domain, n_boundary)
    rng = np.random.default_rng(seed)
    dirs_b = random_directions(domain.dim, n_boundary, rng)
    boundary_v = float(np.max(np.abs(gauge.v(bgrid.positions, dirs_b))))
    points = halton_interior_points(domain, n_interior, seed=seed)
    dirs = random_directions(domain.dim, n_interior, rng)
    sup_v = float(np.max(np.abs(gauge.v(points, dirs))))
    sup_dv = float(np.max(np.abs(gauge.log_derivative(points, dirs))))
    report = GaugeReport(boundary_v, sup_v, sup_dv)
    if boundary_v > BOUNDARY_VANISH_TOL:
        raise GaugeValidationError(
            f"gauge does not vanish on the boundary: max |v| = {boundary_v:.3e}")
    if not (np.isfinite(sup_v) and np.isfinite(sup_dv)):
        raise GaugeValidationError("gauge or its ray derivative is unbounded on the sample")
    return report


def apply_gauge(pair: MediumPair, gauge: GaugeField,
                domain: Optional[ConvexDomain] = None) -> MediumPair:
    """Transformed pair (a - theta.grad log phi, phi(theta)/phi(theta') k).

    When the gauge does not depend on theta the kernel ratio is identically
    one and the original kernel object is returned unchanged.
    """
    check_domain = domain if domain is not None else getattr(gauge, "domain", None)
    if check_domain is not None:
        validate_gauge(gauge, check_domain)
    absorption = GeneralSumAbsorption((FieldTerm(pair.absorption), GaugeShiftTerm(gauge)))
    if gauge.theta_independent:
        scattering = pair.scattering
    else:
        scattering = GaugeDecoratedKernel(pair.scattering, gauge)
    return MediumPair(absorption, scattering, pair.continuity)


def beam_transform(f, domain: ConvexDomain, x, theta, step: float) -> float:
    """Half-line integral of f(x + s*theta, theta) over s in (-tau_minus, 0)."""
    p = np.asarray(x, dtype=float)
    if float(domain.boundary_excess(p)) > 1e-9:
        raise GaugeValidationError("beam transform point lies outside the domain")
    t = np.asarray(theta, dtype=float)
    tau = float(exit_times(domain, p, -t)[0])
    n = even_panels(tau, step)
    f_eval = _field_eval(f)
    val = segment_simpson(lambda pts: f_eval(pts, t), p, -t, np.array([tau]), n)
    return float(val[0])


def gauge_from_difference(a: AbsorptionField, a_tilde: AbsorptionField,
                          domain: ConvexDomain, step: float,
                          ray_sample: int = 64, tol_scale: float = 1e-6,
                          seed: int = 0) -> NumericGauge:
    """Construct the gauge whose ray derivative is f = a - a_tilde.

    Requires the full line integrals of f to vanish (checked on a sampled set
    of chords); otherwise the pairs cannot be gauge equivalent and a
    NotGaugeEquivalentError is raised.
    """
    diff = GeneralSumAbsorption((FieldTerm(a), FieldTerm(a_tilde, scale=-1.0)))
    points = halton_interior_points(domain, ray_sample, seed=seed)
    rng = np.random.default_rng(seed + 1)
    thetas = random_directions(domain.dim, ray_sample, rng)
    tau_minus = exit_times(domain, points, -thetas)
    tau = tau_minus + exit_times(domain, points, thetas)
    entries = points - tau_minus[:, None] * thetas
    n = even_panels(float(np.max(tau)), step)
    line_integrals = segment_simpson(lambda pts: diff.eval(pts, thetas),
                                     entries, thetas, tau, n)
    tolerances = tol_scale * tau + 1e-14
    worst = float(np.max(np.abs(line_integrals)))
    if np.any(np.abs(line_integrals) > tolerances):
        raise NotGaugeEquivalentError(
            f"absorption difference has nonvanishing line integrals (max {worst:.3e})",
            max_violation=worst)
    return NumericGauge(domain, diff, step)
