"""Ornstein-Uhlenbeck semigroups, logarithmic convexity and backward-in-time stability.

Modules
-------
matops      Gramians, Lyapunov solves and the analyticity angle.
field       Sampled fields on a periodic box, transforms, weighted norms, file I/O.
semigroup   Fourier and Kolmogorov evaluation of the (fractional) OU semigroup.
convexity   Convexity constants, log-convexity checks and stability bounds.
thickset    Thick observation sets and grid masks.
inverse     Observation operator, adjoint, Tikhonov reconstruction, stability sweeps.
cli         Command-line experiment driver.
"""

from .errors import (ConfigError, DegenerateNorm, DomainError, DomainTooSmall,
                     DomainTooSmallWarning, FractionalUnsupported, FrequencyBoxExceeded,
                     GridMismatch, HurwitzViolation, MissingDerivative, NonConvergence,
                     OUError, QuadratureError, RegimeRefused, ResolutionTooCoarse)
from .matops import (AngleReport, OUModel, analyticity_angle, angle_exponents, expm,
                     gramian_qinf, gramian_qt, is_hurwitz, lyapunov_residual, lyapunov_solve)
from .field import (Field, GridSpec, SpectralField, auto_half_width, forward_transform,
                    inverse_transform, invariant_density, norm_h_s_mu, norm_l2, norm_l2_mu,
                    norm_l2_masked, read_field, sample_admissible, write_field, write_field_csv)
from .semigroup import (PropagatorConfig, apply_generator, kolmogorov_eval, propagate_fourier,
                        propagate_kolmogorov, symbol_integral, time_series)
from .convexity import (ConvexityReport, beta, check_logconvexity_analytic,
                        check_logconvexity_fractional, convexity_constant,
                        elementary_inequality, holder_defaults, stability_bound_analytic,
                        stability_bound_fractional)
from .special import incomplete_gamma
from .thickset import (ObservationMask, ThickSetSpec, build_mask, check_thickness, read_mask,
                       restrict, write_mask)
from .inverse import (ObservationData, ReconstructionResult, StabilityFit, add_noise,
                      adjoint_observe, forward_observe, observation_norms, stability_sweep,
                      tikhonov_reconstruct)

__version__ = "0.1.0"
