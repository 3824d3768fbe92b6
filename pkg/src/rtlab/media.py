"""Parametric absorption and scattering coefficients with validation checks.

Media are parametric families rather than arbitrary callables: every kind is
JSON-serializable, pure to evaluate, and has closed-form angular totals where
possible, which keeps independent oracles available for testing.

Argument order convention for scattering: ``eval(x, theta_in, theta_out)``
evaluates k(x, theta', theta), the density for particles arriving along
``theta_in`` to leave along ``theta_out``.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import special

from .errors import ConfigurationError, DomainError
from .geometry import (ConvexDomain, SphereQuadrature, direction, exit_times,
                       halton_interior_points, make_sphere_quadrature,
                       random_directions)

SYMMETRY_TOL = 1e-12
DL_TOL = 1e-12


def _row_shape(arr: np.ndarray) -> tuple:
    return np.asarray(arr).shape[:-1]


def _broadcast_rows(*arrays) -> tuple:
    return np.broadcast_shapes(*[_row_shape(a) for a in arrays])


# ---------------------------------------------------------------------------
# Spatial fields g(x)
# ---------------------------------------------------------------------------

class SpatialField:
    kind = "abstract"

    def eval(self, points) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, points) -> np.ndarray:
        return self.eval(points)


@dataclasses.dataclass(frozen=True)
class ConstantField(SpatialField):
    value: float
    kind = "constant"

    def eval(self, points):
        return np.full(_row_shape(points), self.value)


@dataclasses.dataclass(frozen=True)
class PolynomialField(SpatialField):
    """Multivariate polynomial sum(coef * prod(x_i^p_i))."""

    terms: Tuple[Tuple[float, Tuple[int, ...]], ...]
    kind = "polynomial"

    def eval(self, points):
        p = np.asarray(points, dtype=float)
        out = np.zeros(_row_shape(p))
        for coef, powers in self.terms:
            out = out + coef * np.prod(p ** np.asarray(powers), axis=-1)
        return out


@dataclasses.dataclass(frozen=True)
class GaussianBumpField(SpatialField):
    """amplitude * exp(-|x - center|^2 / width^2); peak value is the amplitude."""

    center: np.ndarray
    width: float
    amplitude: float
    kind = "gaussian_bump"

    def eval(self, points):
        d = np.asarray(points, dtype=float) - self.center
        return self.amplitude * np.exp(-np.sum(d * d, axis=-1) / self.width ** 2)


# ---------------------------------------------------------------------------
# Direction factors m(theta)
# ---------------------------------------------------------------------------

class DirectionFactor:
    kind = "abstract"
    even: Optional[bool] = None

    def eval(self, thetas) -> np.ndarray:
        raise NotImplementedError


@dataclasses.dataclass(frozen=True)
class MonomialFactor(DirectionFactor):
    """prod(theta_i^p_i); parity is the parity of the total degree."""

    powers: Tuple[int, ...]
    kind = "monomial"

    @property
    def even(self):
        return sum(self.powers) % 2 == 0

    def eval(self, thetas):
        t = np.asarray(thetas, dtype=float)
        return np.prod(t ** np.asarray(self.powers), axis=-1)


@dataclasses.dataclass(frozen=True)
class AxisPowerFactor(DirectionFactor):
    """(theta . axis)^power."""

    axis: np.ndarray
    power: int
    kind = "axis_power"

    @property
    def even(self):
        return self.power % 2 == 0

    def eval(self, thetas):
        t = np.asarray(thetas, dtype=float)
        return np.sum(t * self.axis, axis=-1) ** self.power


# ---------------------------------------------------------------------------
# Absorption a(x, theta)
# ---------------------------------------------------------------------------

class AbsorptionField:
    kind = "abstract"
    # True when a(x, theta) = a(x, -theta) holds exactly by construction.
    even_in_theta: Optional[bool] = None

    def eval(self, points, thetas) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, points, thetas) -> np.ndarray:
        return self.eval(points, thetas)


@dataclasses.dataclass(frozen=True)
class ConstantAbsorption(AbsorptionField):
    value: float
    kind = "constant"
    even_in_theta = True

    def eval(self, points, thetas):
        return np.full(_broadcast_rows(points, thetas), self.value)


@dataclasses.dataclass(frozen=True)
class IsotropicAbsorption(AbsorptionField):
    """Direction-independent absorption a(x)."""

    field: SpatialField
    kind_name: str = "isotropic"
    even_in_theta = True

    @property
    def kind(self):
        return self.kind_name

    def eval(self, points, thetas):
        vals = self.field.eval(points)
        return np.broadcast_to(vals, _broadcast_rows(points, thetas)).copy()


@dataclasses.dataclass(frozen=True)
class LineSymmetricAbsorption(AbsorptionField):
    """a(x, theta) = p(x) + q(x) (theta . axis)^2, even in theta exactly."""

    p: SpatialField
    q: SpatialField
    axis: np.ndarray
    kind = "line_symmetric"
    even_in_theta = True

    def eval(self, points, thetas):
        dot = np.sum(np.asarray(thetas, dtype=float) * self.axis, axis=-1)
        return self.p.eval(points) + self.q.eval(points) * dot * dot


@dataclasses.dataclass(frozen=True)
class SeparableTerm:
    """g(x) * m(theta) summand for GeneralSumAbsorption."""

    g: SpatialField
    m: DirectionFactor

    @property
    def even(self):
        return self.m.even

    def eval(self, points, thetas):
        return self.g.eval(points) * self.m.eval(thetas)


@dataclasses.dataclass(frozen=True)
class FieldTerm:
    """Wraps an existing absorption field as a summand."""

    field: AbsorptionField
    scale: float = 1.0

    @property
    def even(self):
        return self.field.even_in_theta

    def eval(self, points, thetas):
        return self.scale * self.field.eval(points, thetas)


@dataclasses.dataclass(frozen=True)
class GeneralSumAbsorption(AbsorptionField):
    """Sum of terms, each evaluable pointwise in (x, theta)."""

    terms: tuple
    kind = "general_sum"

    @property
    def even_in_theta(self):
        parities = [t.even for t in self.terms]
        if all(p is True for p in parities):
            return True
        if any(p is None for p in parities):
            return None
        return False

    def eval(self, points, thetas):
        out = np.zeros(_broadcast_rows(points, thetas))
        for term in self.terms:
            out = out + term.eval(points, thetas)
        return out


# ---------------------------------------------------------------------------
# Cosine profiles h(theta . theta')
# ---------------------------------------------------------------------------

class CosineProfile:
    kind = "abstract"

    def eval(self, cosine) -> np.ndarray:
        raise NotImplementedError

    def mean(self, dim: int) -> float:
        """Average against the normalized sphere measure over one direction."""
        raise NotImplementedError

    def abs_mean(self, dim: int) -> float:
        grid, w = _cosine_density_grid(dim)
        return float(np.sum(np.abs(self.eval(grid)) * w))


def _cosine_moment(m: int, dim: int) -> float:
    """Mean of (theta . e)^m over the normalized sphere measure."""
    if m % 2 == 1:
        return 0.0
    if dim == 3:
        return 1.0 / (m + 1)
    return math.comb(m, m // 2) / 2.0 ** m


def _cosine_density_grid(dim: int, n: int = 4001):
    """Cosine values and weights of the sphere measure pushed to [-1, 1]."""
    if dim == 3:
        t = np.linspace(-1.0, 1.0, n)
        w = np.full(n, 1.0 / (n - 1))
        w[0] = w[-1] = 0.5 / (n - 1)
        return t, w
    ang = np.pi * (np.arange(n) + 0.5) / n
    return np.cos(ang), np.full(n, 1.0 / n)


@dataclasses.dataclass(frozen=True)
class PolyCosineProfile(CosineProfile):
    coeffs: Tuple[float, ...]
    kind = "cos_poly"

    def eval(self, cosine):
        c = np.asarray(cosine, dtype=float)
        out = np.zeros_like(c)
        for m, coef in enumerate(self.coeffs):
            out = out + coef * c ** m
        return out

    def mean(self, dim):
        return sum(coef * _cosine_moment(m, dim) for m, coef in enumerate(self.coeffs))


@dataclasses.dataclass(frozen=True)
class ExpCosineProfile(CosineProfile):
    """amplitude * exp(rate * cosine), a smooth forward/backward-peaked profile."""

    amplitude: float
    rate: float
    kind = "cos_exp"

    def eval(self, cosine):
        return self.amplitude * np.exp(self.rate * np.asarray(cosine, dtype=float))

    def mean(self, dim):
        if self.rate == 0.0:
            return self.amplitude
        if dim == 3:
            return self.amplitude * math.sinh(self.rate) / self.rate
        return self.amplitude * float(special.i0(self.rate))


# ---------------------------------------------------------------------------
# Scattering kernels k(x, theta_in, theta_out)
# ---------------------------------------------------------------------------

class ScatteringKernel:
    kind = "abstract"
    # True when k(x, a, b) = k(x, b, a) holds exactly by construction.
    symmetric: Optional[bool] = None

    def eval(self, points, thetas_in, thetas_out) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, points, thetas_in, thetas_out) -> np.ndarray:
        return self.eval(points, thetas_in, thetas_out)

    def total(self, points, thetas_in, quad: Optional[SphereQuadrature] = None,
              absolute: bool = False) -> np.ndarray:
        """Angular integral over outgoing directions for fixed incoming ones.

        Uses the closed form when the family has one; otherwise integrates
        with the supplied quadrature.
        """
        raise NotImplementedError

    def factor_parts(self, points, quad: SphereQuadrature):
        """(g(x), H[j_in, j_out], gauge log values or None) when separable."""
        return None


def _quadrature_total(kernel, points, thetas_in, quad, absolute):
    if quad is None:
        raise ConfigurationError(f"kernel kind {kernel.kind!r} needs a quadrature for totals")
    p = np.asarray(points, dtype=float)
    t = np.asarray(thetas_in, dtype=float)
    out = np.zeros(_broadcast_rows(p, t))
    for node, w in zip(quad.nodes, quad.weights):
        vals = kernel.eval(p, t, node)
        out = out + w * (np.abs(vals) if absolute else vals)
    return out


@dataclasses.dataclass(frozen=True)
class ZeroKernel(ScatteringKernel):
    kind = "zero"
    symmetric = True

    def eval(self, points, thetas_in, thetas_out):
        return np.zeros(_broadcast_rows(points, thetas_in, thetas_out))

    def total(self, points, thetas_in, quad=None, absolute=False):
        return np.zeros(_broadcast_rows(points, thetas_in))

    def factor_parts(self, points, quad):
        n = _row_shape(np.atleast_2d(points))[0]
        return np.zeros(n), np.zeros((quad.order, quad.order)), None


@dataclasses.dataclass(frozen=True)
class ConstantKernel(ScatteringKernel):
    value: float
    kind = "constant"
    symmetric = True

    def eval(self, points, thetas_in, thetas_out):
        return np.full(_broadcast_rows(points, thetas_in, thetas_out), self.value)

    def total(self, points, thetas_in, quad=None, absolute=False):
        v = abs(self.value) if absolute else self.value
        return np.full(_broadcast_rows(points, thetas_in), v)

    def factor_parts(self, points, quad):
        n = _row_shape(np.atleast_2d(points))[0]
        return np.ones(n), np.full((quad.order, quad.order), self.value), None


@dataclasses.dataclass(frozen=True)
class SeparableKernel(ScatteringKernel):
    """g(x) * h(theta . theta'); symmetric because it depends on the cosine only."""

    xfield: SpatialField
    profile: CosineProfile
    kind = "separable"
    symmetric = True

    def eval(self, points, thetas_in, thetas_out):
        cosine = np.sum(np.asarray(thetas_in, dtype=float)
                        * np.asarray(thetas_out, dtype=float), axis=-1)
        return self.xfield.eval(points) * self.profile.eval(cosine)

    def total(self, points, thetas_in, quad=None, absolute=False):
        g = self.xfield.eval(points)
        dim = np.asarray(points).shape[-1]
        h_mean = self.profile.abs_mean(dim) if absolute else self.profile.mean(dim)
        g = np.abs(g) if absolute else g
        return np.broadcast_to(g * h_mean, _broadcast_rows(points, thetas_in)).copy()

    def factor_parts(self, points, quad):
        cosmat = quad.nodes @ quad.nodes.T
        return self.xfield.eval(np.atleast_2d(points)), self.profile.eval(cosmat), None


@dataclasses.dataclass(frozen=True)
class DotProductKernel(SeparableKernel):
    """g(x) * polynomial(theta . theta'), the optical-tomography staple."""

    kind = "dot_product"

    @staticmethod
    def make(xfield: SpatialField, coeffs: Sequence[float]) -> "DotProductKernel":
        return DotProductKernel(xfield, PolyCosineProfile(tuple(float(c) for c in coeffs)))


@dataclasses.dataclass(frozen=True)
class GaugeDecoratedKernel(ScatteringKernel):
    """k~(x, a, b) = exp(v(x, b) - v(x, a)) * k(x, a, b) for a log-gauge v.

    Produced by gauge application; not part of the JSON medium schema.
    Symmetry is lost unless v is independent of theta.
    """

    base: ScatteringKernel
    gauge: object  # anything with v(points, thetas) -> log-gauge values

    kind = "gauge_decorated"

    @property
    def symmetric(self):
        if getattr(self.gauge, "theta_independent", False):
            return self.base.symmetric
        return None

    def eval(self, points, thetas_in, thetas_out):
        ratio = np.exp(self.gauge.v(points, thetas_out) - self.gauge.v(points, thetas_in))
        return ratio * self.base.eval(points, thetas_in, thetas_out)

    def total(self, points, thetas_in, quad=None, absolute=False):
        return _quadrature_total(self, points, thetas_in, quad, absolute)

    def factor_parts(self, points, quad):
        parts = self.base.factor_parts(points, quad)
        if parts is None:
            return None
        g, h, logs = parts
        if logs is not None:
            raise ConfigurationError("stacked gauge decorations are not supported")
        pts = np.atleast_2d(points)
        v = np.column_stack([self.gauge.v(pts, node) for node in quad.nodes])
        return g, h, v


# ---------------------------------------------------------------------------
# Medium pair and pointwise evaluation
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class MediumPair:
    """Absorption/scattering pair; ``continuity`` asserts both are continuous."""

    absorption: AbsorptionField
    scattering: ScatteringKernel
    continuity: bool = True


def _maybe_check_domain(domain, x):
    if domain is not None:
        excess = float(np.max(np.atleast_1d(domain.boundary_excess(x))))
        if excess > 1e-9:
            raise DomainError(f"evaluation point outside the domain by {excess:.3e}")


def eval_a(pair: MediumPair, x, theta, domain: Optional[ConvexDomain] = None):
    """Absorption a(x, theta); validates x against the domain when given."""
    _maybe_check_domain(domain, x)
    out = pair.absorption.eval(np.asarray(x, dtype=float), np.asarray(theta, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def eval_k(pair: MediumPair, x, theta_in, theta_out, domain: Optional[ConvexDomain] = None):
    """Scattering k(x, theta_in, theta_out) mapping incoming to outgoing."""
    _maybe_check_domain(domain, x)
    out = pair.scattering.eval(np.asarray(x, dtype=float),
                               np.asarray(theta_in, dtype=float),
                               np.asarray(theta_out, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# Sampled checks
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class AdmissibilityReport:
    admissible: bool
    sup_absorption: float
    sup_total_scattering: float
    sample_size: int


@dataclasses.dataclass(frozen=True)
class SubcriticalityReport:
    satisfied: bool
    worst_value: float
    worst_point: np.ndarray
    worst_direction: np.ndarray


@dataclasses.dataclass(frozen=True)
class SymmetryReport:
    sym_atten: bool
    sym_scat: bool
    k_positive: bool
    max_absorption_asymmetry: float
    max_scattering_asymmetry: float
    min_kernel_value: float


def _default_quad(dim: int) -> SphereQuadrature:
    return make_sphere_quadrature(dim, 128 if dim == 2 else 256)


def _sample_phase_space(domain, n, seed):
    points = halton_interior_points(domain, n, seed=seed)
    rng = np.random.default_rng(seed + 1)
    thetas = random_directions(domain.dim, n, rng)
    return points, thetas


def _extreme_candidates(domain):
    """Center-anchored rays along the coordinate axes carry the widest chords."""
    dim = domain.dim
    axes = np.vstack([np.eye(dim), -np.eye(dim)])
    points = np.tile(domain.center, (2 * dim, 1))
    return points, axes


def check_admissibility(pair: MediumPair, domain: ConvexDomain, sample: int = 10000,
                        quad: Optional[SphereQuadrature] = None,
                        seed: int = 0) -> AdmissibilityReport:
    """Sampled boundedness of |a| and of the total scattering integral."""
    points, thetas = _sample_phase_space(domain, sample, seed)
    a_vals = np.abs(pair.absorption.eval(points, thetas))
    if quad is None and pair.scattering.kind == "gauge_decorated":
        quad = _default_quad(domain.dim)
    k_tot = pair.scattering.total(points, thetas, quad=quad, absolute=True)
    sup_a = float(np.max(a_vals))
    sup_k = float(np.max(k_tot))
    bounded = bool(np.isfinite(sup_a) and np.isfinite(sup_k))
    return AdmissibilityReport(bounded, sup_a, sup_k, sample)


def check_subcritical_cs(pair: MediumPair, domain: ConvexDomain, sample: int = 100000,
                         quad: Optional[SphereQuadrature] = None,
                         seed: int = 0) -> SubcriticalityReport:
    """sup |tau(x, theta) * integral k(x, theta, .)| < 1 over a sampled sup.

    The sample is quasi-random, augmented with center-anchored axis rays so
    that the maximal chord of a ball or axis-aligned ellipsoid is hit exactly.
    """
    points, thetas = _sample_phase_space(domain, sample, seed)
    xp, xt = _extreme_candidates(domain)
    points = np.vstack([points, xp])
    thetas = np.vstack([thetas, xt])
    tau = exit_times(domain, points, thetas) + exit_times(domain, points, -thetas)
    if quad is None and pair.scattering.kind == "gauge_decorated":
        quad = _default_quad(domain.dim)
    totals = pair.scattering.total(points, thetas, quad=quad)
    values = np.abs(tau * totals)
    worst = int(np.argmax(values))
    return SubcriticalityReport(bool(values[worst] < 1.0), float(values[worst]),
                                points[worst], thetas[worst])


def check_subcritical_dl(pair: MediumPair, domain: ConvexDomain, sample: int = 100000,
                         quad: Optional[SphereQuadrature] = None,
                         seed: int = 0) -> SubcriticalityReport:
    """min of a(x, theta) - integral k(x, theta, .) >= 0 over the sample."""
    points, thetas = _sample_phase_space(domain, sample, seed)
    if quad is None and pair.scattering.kind == "gauge_decorated":
        quad = _default_quad(domain.dim)
    margin = pair.absorption.eval(points, thetas) - pair.scattering.total(points, thetas, quad=quad)
    worst = int(np.argmin(margin))
    return SubcriticalityReport(bool(margin[worst] >= -DL_TOL), float(margin[worst]),
                                points[worst], thetas[worst])


def check_symmetries(pair: MediumPair, domain: ConvexDomain, sample: int = 10000,
                     seed: int = 0) -> SymmetryReport:
    """Sampled line symmetry of a, exchange symmetry of k, and positivity of k."""
    points, thetas = _sample_phase_space(domain, sample, seed)
    rng = np.random.default_rng(seed + 2)
    thetas_b = random_directions(domain.dim, sample, rng)
    a_asym = np.max(np.abs(pair.absorption.eval(points, thetas)
                           - pair.absorption.eval(points, -thetas)))
    k_fwd = pair.scattering.eval(points, thetas, thetas_b)
    k_rev = pair.scattering.eval(points, thetas_b, thetas)
    k_asym = np.max(np.abs(k_fwd - k_rev))
    min_k = float(min(np.min(k_fwd), np.min(k_rev)))
    return SymmetryReport(bool(a_asym <= SYMMETRY_TOL), bool(k_asym <= SYMMETRY_TOL),
                          bool(min_k > 0.0), float(a_asym), float(k_asym), min_k)


# ---------------------------------------------------------------------------
# JSON specs
# ---------------------------------------------------------------------------

def _take(spec: dict, context: str, required: Sequence[str], optional: Sequence[str] = ()):
    if not isinstance(spec, dict):
        raise ConfigurationError(f"{context}: expected an object, got {type(spec).__name__}")
    unknown = set(spec) - set(required) - set(optional)
    if unknown:
        raise ConfigurationError(f"{context}: unknown keys {sorted(unknown)}")
    missing = [k for k in required if k not in spec]
    if missing:
        raise ConfigurationError(f"{context}: missing keys {missing}")
    return [spec.get(k) for k in list(required) + list(optional)]


def _vector(value, dim: int, context: str) -> np.ndarray:
    v = np.asarray(value, dtype=float)
    if v.shape != (dim,):
        raise ConfigurationError(f"{context}: expected a {dim}-vector")
    return v


def _poly_terms(terms, dim: int, context: str):
    parsed = []
    for t in terms:
        coef, powers = _take(t, context, ["coef", "powers"])
        powers = tuple(int(p) for p in powers)
        if len(powers) != dim or any(p < 0 for p in powers):
            raise ConfigurationError(f"{context}: powers must be {dim} nonnegative ints")
        parsed.append((float(coef), powers))
    return tuple(parsed)


def spatial_field_from_spec(spec: dict, dim: int) -> SpatialField:
    kind = spec.get("kind")
    if kind == "constant":
        _, value = _take(spec, "spatial constant", ["kind", "value"])
        return ConstantField(float(value))
    if kind == "polynomial":
        _, terms = _take(spec, "spatial polynomial", ["kind", "terms"])
        return PolynomialField(_poly_terms(terms, dim, "spatial polynomial"))
    if kind == "gaussian_bump":
        _, center, width, amplitude = _take(
            spec, "gaussian bump", ["kind", "center", "width", "amplitude"])
        if float(width) <= 0.0:
            raise ConfigurationError("gaussian bump width must be positive")
        return GaussianBumpField(_vector(center, dim, "gaussian bump"),
                                 float(width), float(amplitude))
    raise ConfigurationError(f"unknown spatial field kind {kind!r}")


def _direction_factor_from_spec(spec: dict, dim: int) -> DirectionFactor:
    kind = spec.get("kind")
    if kind == "monomial":
        _, powers = _take(spec, "direction monomial", ["kind", "powers"])
        powers = tuple(int(p) for p in powers)
        if len(powers) != dim:
            raise ConfigurationError("direction monomial powers must match the dimension")
        return MonomialFactor(powers)
    if kind == "axis_power":
        _, axis, power = _take(spec, "axis power", ["kind", "axis", "power"])
        return AxisPowerFactor(_vector(axis, dim, "axis power"), int(power))
    raise ConfigurationError(f"unknown direction factor kind {kind!r}")


def absorption_from_spec(spec: dict, dim: int) -> AbsorptionField:
    kind = spec.get("kind")
    if kind == "constant":
        _, value = _take(spec, "absorption constant", ["kind", "value"])
        return ConstantAbsorption(float(value))
    if kind == "isotropic_polynomial":
        _, terms = _take(spec, "isotropic polynomial", ["kind", "terms"])
        field = PolynomialField(_poly_terms(terms, dim, "isotropic polynomial"))
        return IsotropicAbsorption(field, "isotropic_polynomial")
    if kind == "isotropic_bump":
        _, center, width, amplitude = _take(
            spec, "isotropic bump", ["kind", "center", "width", "amplitude"])
        if float(width) <= 0.0:
            raise ConfigurationError("isotropic bump width must be positive")
        field = GaussianBumpField(_vector(center, dim, "isotropic bump"),
                                  float(width), float(amplitude))
        return IsotropicAbsorption(field, "isotropic_bump")
    if kind == "line_symmetric":
        _, p, q, axis = _take(spec, "line_symmetric absorption", ["kind", "p", "q", "axis"])
        return LineSymmetricAbsorption(spatial_field_from_spec(p, dim),
                                       spatial_field_from_spec(q, dim),
                                       direction(axis))
    if kind == "general_sum":
        _, terms = _take(spec, "general_sum absorption", ["kind", "terms"])
        parsed = []
        for t in terms:
            g, m = _take(t, "general_sum term", ["g", "m"])
            parsed.append(SeparableTerm(spatial_field_from_spec(g, dim),
                                        _direction_factor_from_spec(m, dim)))
        return GeneralSumAbsorption(tuple(parsed))
    raise ConfigurationError(f"unknown absorption kind {kind!r}")


def _profile_from_spec(spec: dict) -> CosineProfile:
    kind = spec.get("kind")
    if kind == "cos_poly":
        _, coeffs = _take(spec, "cosine polynomial", ["kind", "coeffs"])
        return PolyCosineProfile(tuple(float(c) for c in coeffs))
    if kind == "cos_exp":
        _, amplitude, rate = _take(spec, "cosine exponential", ["kind", "amplitude", "rate"])
        return ExpCosineProfile(float(amplitude), float(rate))
    raise ConfigurationError(f"unknown cosine profile kind {kind!r}")


def scattering_from_spec(spec: dict, dim: int) -> ScatteringKernel:
    kind = spec.get("kind")
    if kind == "zero":
        _take(spec, "zero kernel", ["kind"])
        return ZeroKernel()
    if kind == "constant":
        _, value = _take(spec, "constant kernel", ["kind", "value"])
        return ConstantKernel(float(value))
    if kind == "separable":
        _, xfield, profile = _take(spec, "separable kernel", ["kind", "xfield", "profile"])
        return SeparableKernel(spatial_field_from_spec(xfield, dim),
                               _profile_from_spec(profile))
    if kind == "dot_product":
        _, xfield, poly = _take(spec, "dot_product kernel", ["kind", "xfield", "poly"])
        return DotProductKernel.make(spatial_field_from_spec(xfield, dim), poly)
    raise ConfigurationError(f"unknown scattering kind {kind!r}")


def medium_from_spec(spec: dict, dim: int) -> MediumPair:
    absorption, scattering = _take(spec, "medium", ["absorption", "scattering"])
    return MediumPair(absorption_from_spec(absorption, dim),
                      scattering_from_spec(scattering, dim))
