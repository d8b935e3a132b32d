from ..discretize import FieldRestriction
from .amg import AmgHierarchy, AmgParams, AmgSetupError, amg_setup, rs_splitting, strength_of_connection
from .ilu0 import Ilu0Factors, ZeroPivotError, ilu0_factor
from .strategies import (
    BLOCK_FACTORIZATION,
    COUPLED_AMG,
    CPR_AMG1,
    CPR_AMG2,
    DISPLAY_NAMES,
    EXACT,
    METHODS,
    BlockFactorization,
    CoupledAmg,
    CprAmg1,
    CprAmg2,
    PreconditionerSpec,
    SchurError,
    build_preconditioner,
    build_simple_schur,
    canonical_method,
)

__all__ = [
    "AmgHierarchy", "AmgParams", "AmgSetupError", "amg_setup", "rs_splitting",
    "strength_of_connection", "Ilu0Factors", "ZeroPivotError", "ilu0_factor",
    "FieldRestriction", "PreconditionerSpec", "build_preconditioner", "build_simple_schur",
    "BlockFactorization", "CoupledAmg", "CprAmg1", "CprAmg2", "SchurError",
    "canonical_method", "METHODS", "DISPLAY_NAMES", "COUPLED_AMG", "CPR_AMG1", "CPR_AMG2",
    "BLOCK_FACTORIZATION", "EXACT",
]
