"""Linear mixed-effects models fit by a blocked Cholesky factorization.

The profiled log-likelihood is evaluated from the blocked lower Cholesky
factor of an augmented Gram matrix; random-effects terms are amalgamated
by grouping factor and ordered to limit fill-in.
"""

from .datasets import INSTEVAL_FORMULA, crossed_design, insteval_path, load_insteval
from .factor import FactorizationError, PerfectFitWarning, StaleFactorError
from .fit import FitOptions, FitResult, VarCorr, conditional_modes, fit, fixed_effects, sigma2
from .formula import FormulaAST, FormulaError, TermSpec, amalgamate, parse_formula
from .ingest import DataError, DataTable, load_csv, read_csv_text
from .model import LinearMixedModel
from .relcov import ThetaError

__all__ = [
    "DataError",
    "DataTable",
    "FactorizationError",
    "FitOptions",
    "FitResult",
    "FormulaAST",
    "FormulaError",
    "INSTEVAL_FORMULA",
    "LinearMixedModel",
    "PerfectFitWarning",
    "StaleFactorError",
    "TermSpec",
    "ThetaError",
    "VarCorr",
    "amalgamate",
    "conditional_modes",
    "crossed_design",
    "fit",
    "fixed_effects",
    "insteval_path",
    "load_csv",
    "load_insteval",
    "parse_formula",
    "read_csv_text",
    "sigma2",
]
