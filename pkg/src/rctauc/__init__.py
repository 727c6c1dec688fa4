"""AUROC estimation for predictive models evaluated on randomized trial data."""

from .data import (EPS, AucEstimate, BiasDiagnostics, DegenerateEstimationError, Method,
                   NuisanceEstimates, RctDataset, ScoreSet, make_nuisance, split_by_treatment,
                   validate_dataset)
from .estimators import (NpwConfig, auc_all, auc_naive, auc_npw, auc_npw_omega, auc_npw_tau,
                         auc_standard, auc_treated, estimate)
from .metrics import TiePolicy, auc, c_index, empirical_cdf, mae, weighted_auc

__version__ = "0.1.0"
