from .catalog import catalog, catalog_names, get_model
from .models import ModelSpec, Term, design_matrix, fit_model, parse_model, parse_models
from .ols import FitResult, TermEstimate, fit_ols, householder_qr
from .report import Report, fit_report
from .tdist import betainc, student_t_sf

__all__ = [
    "FitResult",
    "ModelSpec",
    "Report",
    "Term",
    "TermEstimate",
    "betainc",
    "catalog",
    "catalog_names",
    "design_matrix",
    "fit_model",
    "fit_ols",
    "fit_report",
    "get_model",
    "householder_qr",
    "parse_model",
    "parse_models",
    "student_t_sf",
]
