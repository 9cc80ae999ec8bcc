from .field import DivergenceError, GreenField, Sweep, green_field, green_fields, sweep
from .spectral import (InconsistentBounds, SpectralRadiusEstimate, extrapolate_radius,
                       return_moments, spectral_radius)
from .checks import (Certified, CertificateWarning, InequalityReport, InternalConsistencyError,
                     avoidance, complement_of, derivative_identity_check, first_passage,
                     inequality_suite, renewal_residual, restricted_green, restricted_series)
