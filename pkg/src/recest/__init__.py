"""Recursive parameter estimation for dependent observations.

The engine runs theta_t = theta_{t-1} + Gamma_t^{-1} psi_t(theta_{t-1});
:mod:`recest.estimators` builds (psi, Gamma) pairs, :mod:`recest.models`
supplies data-generating processes, and :mod:`recest.conditions` checks the
convergence conditions numerically.
"""
from .engine import (EngineOptions, EstimatorState, HistoryWindow, OnlineEstimator,
                     Trajectory, estimate_path, initial_state, run_ensemble,
                     run_trajectory, step)
from .errors import (ConfigError, InvalidAlpha, InvalidPhi, NonFiniteStep, NonMonotone,
                     QuadratureFailure, RecestError, SingularFisher, SingularNormalizer)
from .estimators import (EstimatingProcedure, LinearProcedureSpec, TuningSchedule,
                         least_squares_ar_spec, make_campbell_robust, make_iid_mle,
                         make_linear, make_student_ar1, newton_raphson_scoring,
                         sample_mean_spec)
from .models import (ARModel, BernoulliModel, GaussianInnovation, LocationModel,
                     StudentInnovation, fisher_scalar, normal_location, sample_student,
                     score_ar, student_location, update_cumulative_fisher)

__version__ = "0.1.0"
