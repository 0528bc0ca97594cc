"""Brownian dynamics of a quantum two-state (or N-level) system in a classical heat bath.

The density operator follows a stochastic non-linear Liouville equation:
each noise realization is integrated separately and the ensemble average
shows decoherence and dissipation.  Closed-form transition rates are
provided for cross-checks.
"""

from .analysis import (FitReport, asymptotic_pxd_check, decoherence_time,
                       fit_damped_oscillation, fit_exponential, initial_slope, plateau_rate)
from .bloch import Trajectory, TssState, dissipated_power, integrate_trajectory, step
from .ensemble import EnsembleConfig, EnsembleResult, entropy_track, run_ensemble
from .exceptions import (ConfigError, DimensionError, DivergenceError, FitError,
                         InvalidStateError, NumericalAbort, StochLiouvilleError)
from .liouville import (LiouvilleSystem, dissipated_power_general, step_density,
                        two_level_system)
from .noise import NoiseStream, effective_field_sigma, next_sample
from .physcore import (CONSTANTS, PolarizationVector, SystemParams, bloch_to_density,
                       density_to_bloch, entropy_of_polarization, validate_density_matrix,
                       vonneumann_entropy)
from .rates import (RateResult, einstein_a, perturbative_occupation, rate_noise, rate_ohmic,
                    rates_quantized)
from .spectral import (Blackbody, DeltaKernel, Ohmic, SampledKernel, Tabulated, evaluate_J,
                       memory_kernel, planck_occupation)

__version__ = "0.1.0"
