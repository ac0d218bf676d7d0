"""Sticky distorted Brownian motion: discretize, simulate, verify.

The library builds the weighted measure rho*(lambda + S) for a sticky set S,
evaluates the explicit generator and energy form on a test-function catalog,
discretizes the form into a reversible jump chain, simulates it exactly, and
turns paths into the statistics that identify the process: sejour fractions,
ergodic averages, crossing counts, drift/diffusion recovery, and martingale
residuals.
"""

__version__ = "0.1.0"

from .chain import (GridSpec, JumpChain, build_chain, chain_summary,
                    discrete_energy, discrete_generator_apply)
from .config import ConfigParseError, ExperimentConfig, parse_config
from .dirichlet import (GeneratorValue, apply_generator, energy_form,
                        energy_measure_density, generator_pairing,
                        symmetry_residual)
from .errors import (ConfigurationError, ContractViolation,
                     InternalConsistencyError, NumericalFailure, StickyDbmError)
from .measure import (Density, StickyStructure, TruncationBox,
                      constant_density, gaussian_density,
                      nearest_sticky_distance, points_1d, rect_boundary_2d,
                      rho_mu_mass, surface_quadrature, truncation_box)
from .simulate import (PathSample, SimConfig, batch_simulate, mix_seed,
                       simulate_chain, simulate_timechange_sticky_bm)
from .stats import (Estimate, FukushimaReport, MomentReport, OccupancyReport,
                    continuum_average, crossing_counts, ergodic_average,
                    fukushima_residual, increment_moments, ks_two_sample,
                    sejour_fraction, small_ball_fraction)
from .testfunctions import TestFunction, default_catalog

__all__ = [name for name in dir() if not name.startswith("_")]
