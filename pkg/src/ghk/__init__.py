"""Gowers-Host-Kra norms on discretized R^n: sharp constants, extremizers,
rearrangements, admissibility geometry and polynomial phase recovery."""
from .errors import (BudgetError, ConfigError, DomainError, GHKError, ParameterError, RankError,
                     SampleLookupError, SamplingError, ShapeError)
from .grid import (GridFunction, indicator, layer_cake, lorentz_seminorm, lp_norm, make_grid,
                   read_ghk1, sample, super_level_mask, translate_multiply, write_ghk1)
from .gowers import (GaussianTuple, deficit, gaussian_tuple_inner, gowers_inner, holder_exponent,
                     sharp_constant, sharp_young_B, u2_norm, uk_norm, young_c)
from .extremizer import ExtremizerParams, fit, moment_init, normalize, synthesize
from .rearrange import distribution_distance, symmetric_rearrangement
from .geometry import (AdmissibleTuple, burchard_check, h_profile, is_admissible, phi_profile, psi)
from .phase import (PhaseSamples, RealPolynomial, affine_recover, mult_derivative,
                    poly_phase_recover)

__version__ = "0.1.0"
