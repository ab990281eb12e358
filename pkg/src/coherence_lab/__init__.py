"""Numerical laboratory for two partially hyperbolic skew products on T^3."""

from .bundles import (CertificationReport, GridSpec, LineDirection, SkewProduct,
                      apply_map, center_direction, certify_ph, certify_scan,
                      check_invariance, differential, min_alpha_prime,
                      stable_direction, unstable_direction)
from .circle import (BACKWARD, FORWARD, MorseSmaleMap, OrbitSegment,
                     comparison_constants, make_sine_map, make_symmetric_map)
from .cohomology import (Profile, SeriesResult, alpha, alpha_many, alpha_prime,
                         alpha_prime_many, beta, beta_many, beta_prime,
                         beta_prime_many, gamma, gamma_many, gamma_prime,
                         gamma_prime_many, residual_twisted)
from .config import LabConfig, default_config
from .errors import (CertificationFailed, CoherenceLabError, ConditionFails,
                     ConditionViolated, GeometryInfeasible, HorizonTooShort,
                     InconsistentSigns, NoConvergence, NoDecay, NotHyperbolic,
                     SampleDegenerate, TooCloseToSingularity)
from .geometry import (CurveSample, ExponentFit, PositivityResult, ProbeRecord,
                       WitnessReport, a_exponent, attractor_probe, blowup_fit,
                       center_fiber, fiber_deviation, integrate_center,
                       nonintegrability_witness, positivity_condition,
                       reeb_strip_sample, rho_exponent, semiconjugacy,
                       semiconjugacy_residual, strong_stable_curve)
from .linalg import (Point3, Tangent3, ToralAutomorphism, circle_dist,
                     eigen_data, wrap_point)

__version__ = "0.1.0"
