"""SIR epidemic model stability certification toolkit.

Simulation of the SIR model with demography under time-varying
newborn/immigration rates, explicit piecewise Lyapunov functions for the
disease-free and endemic equilibria, numerical certification of their
decrease and input-to-state stability properties, and level-set extraction.
"""

from .errors import (ConfigError, DomainError, InfeasibleOverride,
                     MismatchedEquilibrium, NoConvergence, NonFiniteState,
                     NotConverged, OnBoundary, OutOfH, R0NotAboveOne,
                     RangeError, RegimeError, SirLyapError)
from .model import (Deviation, Equilibrium, EquilibriumKind, ModelParams,
                    Regime, State, classify_regime, disease_free_eq,
                    endemic_eq, r0_hat, rhs, total_population_bound)
from .ode import (Constant, InputSignal, Piecewise, Sinusoid, Step, Trajectory,
                  integrate, sample_input, steady_state)
from .lyap_df import (DfLyapParams, DfRegion, DiseaseFreeLyapunov, df_chi,
                      df_decrease_slack, df_gradient, df_region, df_value,
                      select_df_params)
from .lyap_en import (EndemicLyapunov, EnLyapParams, EnRegion, check_condition_50,
                      en_eta, en_gradient, en_input_range, en_params_from,
                      en_region, en_value, in_H, in_sublevel, k0_bound,
                      lambda3_bound, nu_fun, omega, omega_inv, p_fun, p_inv,
                      select_en_params, theta, theta_inv)
from .verify import CheckResult, VerificationReport, run_certification
from .levelset import Contour, analytic_contour_df, extract_contours

__version__ = "0.1.0"
