"""Phonon-subtraction protocol simulator and analysis toolkit."""

__version__ = "0.1.0"

from .errors import (ConfigError, DemonSimError, DomainError,
                     NoExcitationPossible, NoLocalMaximum, ProtocolError,
                     ScheduleError, TruncationError, ZeroProbabilityOutcome)
from .fock import (FockDistribution, MomentSummary, ThermalEnvironment,
                   default_n_max, fock_distribution, moments,
                   nbar_from_temperature, poisson_distribution,
                   read_distribution, thermal_distribution,
                   write_distribution)
from .jc import (OptimumReport, SearchOptions, dawson,
                 excitation_probability_linear,
                 excitation_probability_nonlinear,
                 first_local_optimal_theta_nonlinear, gaussian_nonlinear_pe,
                 optimal_theta_linear, seed_theta_linear, semiclassical_pe)
from .oracle import (JointState, jc_apply, measure_excited,
                     montecarlo_protocol, recursion_equivalence_check)
from .protocols import (ProtocolTrajectory, RoundRecord, Schedule, StepSpec,
                        charge_performance, mass_production, run_schedule,
                        step_linear_I, step_linear_II, step_nonlinear_II,
                        write_trajectory)
