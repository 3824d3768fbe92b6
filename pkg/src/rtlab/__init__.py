"""rtlab: stationary radiative transport forward solves and inverse recovery."""

from .errors import (ConfigurationError, ConvergenceError, DataError,
                     DataInconsistencyError, DomainError, GaugeValidationError,
                     HypothesisError, NotGaugeEquivalentError,
                     ParallelDirectionsError, RadiativeTransferError,
                     ResolutionError)
from .geometry import (BoundaryGrid, BoundaryPoint, ConvexDomain,
                       SphereQuadrature, boundary_weight, direction,
                       entry_point, exit_point, exit_time, exit_times,
                       make_boundary_grid, make_sphere_quadrature)
from .media import (AbsorptionField, ConstantAbsorption, ConstantKernel,
                    DotProductKernel, GaussianBumpField, GeneralSumAbsorption,
                    IsotropicAbsorption, LineSymmetricAbsorption, MediumPair,
                    PolynomialField, ScatteringKernel, SeparableKernel,
                    ZeroKernel, check_admissibility, check_subcritical_cs,
                    check_subcritical_dl, check_symmetries, eval_a, eval_k,
                    medium_from_spec)
from .gauge import (BoundaryPolyGauge, GaugeField, NumericGauge, apply_gauge,
                    beam_transform, gauge_from_difference, identity_gauge,
                    validate_gauge)
from .transport import (AlbedoDecomposition, BeamFlux, BoundaryFlux,
                        IsotropicFlux, PhaseGrid, PhaseSpaceField,
                        SampledBoundaryFlux, SolverConfig, albedo_apply,
                        alpha2_eval, attenuation_integral, ballistic_solve,
                        decompose_albedo, scattering_apply,
                        source_iteration_solve)
from .extraction import (AlbedoKernelEvaluator, DirectionPairFrame,
                         ExtractionData, Mollifier1D, MollifierND,
                         i00_exact, i00_values, i_eps_delta_mollified,
                         j0_exact, j0_values, j_eps_mollified)
from .inversion import (ExtractionTable, GaugeClassReport, LineIntegralData,
                        PixelGrid, ReconstructionReport,
                        build_extraction_table, kaczmarz_xray_invert,
                        recover_a_line_symmetric, recover_a_values,
                        recover_k_symmetric, recover_total_absorption,
                        verify_gauge_class)

__version__ = "0.1.0"
