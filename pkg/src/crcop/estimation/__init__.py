from .fitting import (
    FitResult,
    fit_cox,
    fit_cox_csh,
    fit_full_mle,
    fit_structural,
    numeric_hessian,
)
from .partial_likelihood import (
    RestructuredDataset,
    cox_partial_loglik,
    restructure,
    structural_partial_loglik,
    unrestructure,
)
from .study import StudyReport, alpha_sweep, coverage_study, summarize
