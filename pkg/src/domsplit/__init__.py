"""Dominated splittings and periodic data for linear cocycles over subshifts of finite type."""

__version__ = "0.1.0"

from .errors import *  # noqa: E402,F401,F403
from .sft import (Point, PeriodicMeasure, PeriodicOrbit, SftSystem, close_orbit, enumerate_orbits,  # noqa: E402
                  enumerate_periodic, point_distance, shift)
from .snumbers import (GelfandProfile, NormContext, NormKind, gelfand, gelfand_bracket, noncompactness,  # noqa: E402
                       volume_growth)
from .cocycle import CocycleSpec, evaluate, holder_estimate, product, restricted_inverse  # noqa: E402
from .periodic_data import PeriodicDatum, NarrownessReport, eigen_moduli, exponents_at, scan_narrowness  # noqa: E402
from .lyapunov import (LyapunovSpectrum, finite_time_lq, gelfand_profile, semicontinuity_probe,  # noqa: E402
                       spectrum_estimate, uniform_convergence_profile)
from .certifier import (DominationCertificate, SplittingSample, certify, classify, fit_certificate,  # noqa: E402
                        gap_profile, reconstruct_splitting, verify_domination)
