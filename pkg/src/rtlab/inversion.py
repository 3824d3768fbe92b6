"""Coefficient reconstruction from extraction data.

The scattering kernel comes from the square-root quotient of forward and
reversed single-scatter densities over the two ballistic factors; the
line-of-travel symmetric absorption from a directional derivative of the
backscatter log-ratio; isotropic absorption from a Kaczmarz sweep over its
X-ray (full line integral) data.
"""

from __future__ import annotations

import dataclasses
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .errors import (ConfigurationError, DataError, DataInconsistencyError,
                     DomainError, NotGaugeEquivalentError)
from .gauge import GaugeField, gauge_from_difference, validate_gauge
from .geometry import (ConvexDomain, SphereQuadrature, exit_times,
                       halton_interior_points, make_boundary_grid,
                       random_directions)
from .media import MediumPair
from .rays import even_panels, segment_simpson

CLAMP_TOL = 1e-12


@dataclasses.dataclass(frozen=True)
class LineIntegralData:
    """Full line integrals of the absorption along sampled rays."""

    points: np.ndarray      # (M, dim), one anchor point per ray
    directions: np.ndarray  # (M, dim), unit
    values: np.ndarray      # (M,)
    provenance: str = "exact"

    @property
    def size(self) -> int:
        return int(self.values.size)

    @staticmethod
    def from_absorption(absorption, domain: ConvexDomain, points, directions,
                        ray_step: float = 1e-3) -> "LineIntegralData":
        p = np.atleast_2d(np.asarray(points, dtype=float))
        d = np.atleast_2d(np.asarray(directions, dtype=float))
        tau_minus = exit_times(domain, p, -d)
        tau = tau_minus + exit_times(domain, p, d)
        entries = p - tau_minus[:, None] * d
        n = even_panels(float(np.max(tau)), ray_step)
        vals = segment_simpson(lambda pts: absorption.eval(pts, d), entries, d, tau, n)
        return LineIntegralData(p, d, vals, "exact")

    @staticmethod
    def from_ballistic(provider, points, directions) -> "LineIntegralData":
        p = np.atleast_2d(np.asarray(points, dtype=float))
        d = np.atleast_2d(np.asarray(directions, dtype=float))
        j0 = provider.j0_batch(p, d)
        if np.any(j0 <= 0.0):
            raise DataError("ballistic factors must be positive to take logarithms")
        return LineIntegralData(p, d, -np.log(j0), provider.provenance)


@dataclasses.dataclass(frozen=True)
class ReconstructionReport:
    recovered: np.ndarray
    truth: Optional[np.ndarray] = None
    sup_error: Optional[float] = None
    l1_error: Optional[float] = None
    rel_l2_error: Optional[float] = None
    residual_history: Tuple[float, ...] = ()
    config: dict = dataclasses.field(default_factory=dict)


def _error_norms(recovered, truth):
    err = np.abs(recovered - truth)
    return float(np.max(err)), float(np.mean(err))


# ---------------------------------------------------------------------------
# Scattering kernel recovery
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class ExtractionTable:
    """Sampled extraction data on (x, theta_prime, theta) triples."""

    points: np.ndarray        # (N, dim)
    thetas_in: np.ndarray     # (N, dim)  incoming theta'
    thetas_out: np.ndarray    # (N, dim)  outgoing theta
    i00_fwd: np.ndarray       # I(x, theta', theta)
    i00_rev: np.ndarray       # I(x, theta, theta')
    j0_out: np.ndarray        # J(x, theta)
    j0_in: np.ndarray         # J(x, theta')
    provenance: str = "exact"


def build_extraction_table(provider, points, thetas_in, thetas_out) -> ExtractionTable:
    p = np.atleast_2d(np.asarray(points, dtype=float))
    tin = np.atleast_2d(np.asarray(thetas_in, dtype=float))
    tout = np.atleast_2d(np.asarray(thetas_out, dtype=float))
    return ExtractionTable(
        p, tin, tout,
        provider.i00_batch(p, tin, tout),
        provider.i00_batch(p, tout, tin),
        provider.j0_batch(p, tout),
        provider.j0_batch(p, tin),
        provider.provenance)


def recover_k_symmetric(table: ExtractionTable, truth: Optional[np.ndarray] = None,
                        clamp_tol: float = CLAMP_TOL) -> ReconstructionReport:
    """Pointwise square-root recovery of a symmetric scattering kernel.

    Exact for exact inputs under the exchange symmetry; tiny negative
    products from interpolation are clamped, anything beyond ``clamp_tol``
    raises a data-inconsistency error.
    """
    if np.any(table.j0_out <= 0.0) or np.any(table.j0_in <= 0.0):
        raise DataError("ballistic factors must be strictly positive")
    product = table.i00_fwd * table.i00_rev
    if np.any(product < -clamp_tol):
        raise DataInconsistencyError(
            f"single-scatter product below clamp tolerance (min {np.min(product):.3e})")
    product = np.maximum(product, 0.0)
    recovered = np.sqrt(product / (table.j0_out * table.j0_in))
    sup_err = l1_err = None
    if truth is not None:
        sup_err, l1_err = _error_norms(recovered, truth)
    return ReconstructionReport(recovered, truth, sup_err, l1_err,
                                config={"provenance": table.provenance})


# ---------------------------------------------------------------------------
# Absorption recovery (line-symmetric case)
# ---------------------------------------------------------------------------

def _backscatter_log_ratio(provider, points, thetas):
    p = np.atleast_2d(points)
    t = np.atleast_2d(thetas)
    i_fwd = provider.i00_batch(p, -t, t)
    i_rev = provider.i00_batch(p, t, -t)
    j_out = provider.j0_batch(p, t)
    j_in = provider.j0_batch(p, -t)
    stacked = np.stack([i_fwd, i_rev, j_out, j_in])
    if np.any(stacked <= 0.0):
        raise DataError("backscatter data must be strictly positive to take logarithms")
    return np.log(i_fwd) - np.log(i_rev) - np.log(j_out) - np.log(j_in)


def recover_a_values(provider, points, thetas, fd_step: float) -> np.ndarray:
    """Batched absorption recovery by central differences along each theta."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    t = np.atleast_2d(np.asarray(thetas, dtype=float))
    room = np.minimum(exit_times(provider.domain, p, t),
                      exit_times(provider.domain, p, -t))
    if np.any(room <= fd_step):
        raise DomainError("finite-difference stencil reaches the boundary; "
                          "shrink fd_step or move the points inward")
    f_plus = _backscatter_log_ratio(provider, p + fd_step * t, t)
    f_minus = _backscatter_log_ratio(provider, p - fd_step * t, t)
    return (f_plus - f_minus) / (8.0 * fd_step)


def recover_a_line_symmetric(provider, x, theta, fd_step: float) -> float:
    """Absorption at (x, theta) from backscatter data.

    Recovers a(x, theta) when the absorption is even in theta; in general it
    yields the even part (a(x, theta) + a(x, -theta)) / 2.
    """
    return float(recover_a_values(provider, x, theta, fd_step)[0])


# ---------------------------------------------------------------------------
# Gauge class verification and the total absorption
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class GaugeClassReport:
    equivalent: bool
    gauge: Optional[GaugeField]
    max_boundary_violation: float
    max_kernel_violation: float
    line_integral_violation: float


def verify_gauge_class(pair: MediumPair, pair_tilde: MediumPair, domain: ConvexDomain,
                       tol: float = 1e-6, step: float = 1e-3, sample: int = 200,
                       seed: int = 0) -> GaugeClassReport:
    """Decide whether two pairs are related by a boundary-trivial gauge.

    Builds the candidate gauge from the absorption difference (refusing when
    the full line integrals do not vanish), then checks the kernel relation
    k~ = (phi(theta)/phi(theta')) k on a sampled set.
    """
    try:
        gauge = gauge_from_difference(pair.absorption, pair_tilde.absorption,
                                      domain, step, seed=seed)
    except NotGaugeEquivalentError as err:
        return GaugeClassReport(False, None, np.inf, np.inf,
                                float(err.max_violation or np.inf))
    bgrid = make_boundary_grid(domain, min(sample, 128))
    rng = np.random.default_rng(seed + 3)
    dirs_b = random_directions(domain.dim, bgrid.size, rng)
    boundary_violation = float(np.max(np.abs(gauge.v(bgrid.positions, dirs_b))))

    points = halton_interior_points(domain, sample, seed=seed + 1)
    tin = random_directions(domain.dim, sample, rng)
    tout = random_directions(domain.dim, sample, rng)
    k_base = pair.scattering.eval(points, tin, tout)
    k_tilde = pair_tilde.scattering.eval(points, tin, tout)
    ratio = np.exp(gauge.v(points, tout) - gauge.v(points, tin))
    scale = max(float(np.max(np.abs(k_base))), 1e-30)
    kernel_violation = float(np.max(np.abs(k_tilde - ratio * k_base))) / scale
    line_violation = 0.0
    equivalent = kernel_violation <= tol and boundary_violation <= tol
    return GaugeClassReport(equivalent, gauge, boundary_violation,
                            kernel_violation, line_violation)


def recover_total_absorption(v_field: Optional[GaugeField], pair_tilde: MediumPair,
                             quad: SphereQuadrature) -> Callable[[np.ndarray], np.ndarray]:
    """Direction-averaged absorption reconstructed from a class representative.

    Returns a callable evaluating sum_j w_j (a~(x, theta_j) + theta_j . grad v)
    on point batches, which is gauge invariant across the equivalence class.
    """
    def total(points):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros(p.shape[0])
        for node, w in zip(quad.nodes, quad.weights):
            vals = pair_tilde.absorption.eval(p, node)
            if v_field is not None:
                vals = vals + v_field.log_derivative(p, node)
            out += w * vals
        return out
    return total


# ---------------------------------------------------------------------------
# Kaczmarz inversion of the X-ray data (isotropic absorption, 2D grids)
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class PixelGrid:
    """Uniform 2D pixel grid; values live on cells, rays see constant pixels."""

    lo: np.ndarray
    cell: np.ndarray
    shape: Tuple[int, int]

    @staticmethod
    def cover(domain: ConvexDomain, n: int) -> "PixelGrid":
        if domain.dim != 2:
            raise ConfigurationError("pixel grids are 2D; X-ray inversion runs on planes")
        lo, hi = domain.bounding_box()
        return PixelGrid(lo, (hi - lo) / n, (n, n))

    @property
    def n_cells(self) -> int:
        return int(self.shape[0] * self.shape[1])

    def centers(self) -> np.ndarray:
        xs = self.lo[0] + (np.arange(self.shape[0]) + 0.5) * self.cell[0]
        ys = self.lo[1] + (np.arange(self.shape[1]) + 0.5) * self.cell[1]
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        return np.column_stack([gx.ravel(), gy.ravel()])


def _ray_cells(grid: PixelGrid, p0, d):
    """Pixel indices and intersection lengths of one line with the grid."""
    hi = grid.lo + grid.cell * np.asarray(grid.shape)
    t_lo, t_hi = -np.inf, np.inf
    for a in range(2):
        if abs(d[a]) < 1e-14:
            if not (grid.lo[a] <= p0[a] <= hi[a]):
                return np.empty(0, dtype=int), np.empty(0)
            continue
        t1 = (grid.lo[a] - p0[a]) / d[a]
        t2 = (hi[a] - p0[a]) / d[a]
        t_lo = max(t_lo, min(t1, t2))
        t_hi = min(t_hi, max(t1, t2))
    if not (t_hi > t_lo):
        return np.empty(0, dtype=int), np.empty(0)
    cuts = [np.array([t_lo, t_hi])]
    for a in range(2):
        if abs(d[a]) < 1e-14:
            continue
        planes = grid.lo[a] + grid.cell[a] * np.arange(grid.shape[a] + 1)
        cuts.append((planes - p0[a]) / d[a])
    ts = np.unique(np.concatenate(cuts))
    ts = ts[(ts >= t_lo - 1e-12) & (ts <= t_hi + 1e-12)]
    if ts.size < 2:
        return np.empty(0, dtype=int), np.empty(0)
    lengths = np.diff(ts)
    mids = p0 + (0.5 * (ts[:-1] + ts[1:]))[:, None] * np.asarray(d)
    ij = np.floor((mids - grid.lo) / grid.cell).astype(int)
    ok = ((ij[:, 0] >= 0) & (ij[:, 0] < grid.shape[0])
          & (ij[:, 1] >= 0) & (ij[:, 1] < grid.shape[1]) & (lengths > 1e-14))
    flat = ij[ok, 0] * grid.shape[1] + ij[ok, 1]
    return flat, lengths[ok]


def build_ray_system(data: LineIntegralData, grid: PixelGrid):
    """Sparse ray/pixel intersection rows for the Kaczmarz sweeps."""
    cols, lens, ptr, rhs = [], [], [0], []
    for p0, d, b in zip(data.points, data.directions, data.values):
        c, ln = _ray_cells(grid, p0, d)
        if c.size == 0:
            continue
        cols.append(c)
        lens.append(ln)
        ptr.append(ptr[-1] + c.size)
        rhs.append(b)
    if not rhs:
        raise ConfigurationError("no ray intersects the reconstruction grid")
    return (np.concatenate(cols), np.concatenate(lens),
            np.asarray(ptr, dtype=int), np.asarray(rhs))


def kaczmarz_xray_invert(data: LineIntegralData, grid: PixelGrid,
                         sweeps: int = 30, relaxation: float = 1.0,
                         truth: Optional[np.ndarray] = None) -> ReconstructionReport:
    """Row-action (ART) inversion of the X-ray data on the pixel grid.

    Rays are processed sequentially within a sweep; the residual history is
    recorded once per full sweep.
    """
    if data.size == 0:
        raise ConfigurationError("empty line-integral data")
    if not (0.0 < relaxation <= 1.0):
        raise ConfigurationError("relaxation must lie in (0, 1]")
    cols, lens, ptr, rhs = build_ray_system(data, grid)
    row_sq = np.add.reduceat(lens * lens, ptr[:-1])
    x = np.zeros(grid.n_cells)
    norm_b = max(float(np.linalg.norm(rhs)), 1e-300)
    history = []
    n_rays = rhs.size
    for _ in range(sweeps):
        for i in range(n_rays):
            sl = slice(ptr[i], ptr[i + 1])
            c = cols[sl]
            w = lens[sl]
            resid = rhs[i] - np.dot(w, x[c])
            x[c] += relaxation * resid / row_sq[i] * w
        predicted = np.add.reduceat(lens * x[cols], ptr[:-1])
        history.append(float(np.linalg.norm(predicted - rhs)) / norm_b)
    recovered = x.reshape(grid.shape)
    sup_err = l1_err = rel_l2 = None
    if truth is not None:
        sup_err, l1_err = _error_norms(recovered, truth)
        rel_l2 = float(np.linalg.norm(recovered - truth)
                       / max(np.linalg.norm(truth), 1e-300))
    return ReconstructionReport(recovered, truth, sup_err, l1_err, rel_l2,
                                tuple(history),
                                {"sweeps": sweeps, "relaxation": relaxation,
                                 "grid": list(grid.shape)})
