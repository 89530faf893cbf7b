"""Bounded solutions of linear Caputo systems ``D^alpha x = A x + f``.

Modules: :mod:`~fracperron.mlf` (Mittag-Leffler evaluation),
:mod:`~fracperron.spectral` (sector classification and Jordan structure),
:mod:`~fracperron.solver` (variation-of-constants solver),
:mod:`~fracperron.bounded` (bounded-solution sets),
:mod:`~fracperron.asymptotics` (numerical checks of the estimates) and
:mod:`~fracperron.cli`.
"""

import os as _os

# BLAS pools are sized at import, so the cap must be exported before numpy loads
_threads = _os.environ.get("FRAC_PERRON_THREADS", "")
if _threads.isdigit() and int(_threads) >= 1:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

from .asymptotics import (  # noqa: E402
    EstimateReport,
    LemmaId,
    WitnessReport,
    verify_lemma3,
    verify_lemma4,
    verify_limit_lemma,
    witness_resonant,
    witness_trivial,
)
from .bounded import (  # noqa: E402
    BoundedSolutionSet,
    NotHyperbolic,
    bounded_set,
    certify_boundedness,
    decay_check,
    unstable_init_block,
    unstable_init_scalar,
)
from .errors import (  # noqa: E402
    DefectiveMatrixError,
    DomainError,
    FracPerronError,
    IllConditionedError,
    MissingSupNormError,
    NotHyperbolicError,
    ParseError,
    PrecisionError,
    PreconditionError,
    SectorError,
)
from .forcing import (  # noqa: E402
    ComplexExponential,
    Constant,
    ExpDecay,
    ForcingFunction,
    PiecewiseLinearTable,
    Sinusoid,
)
from .mlf import MLQuery, MLResult, Regime, eval_mlf, eval_mlf_matrix, mittag_leffler  # noqa: E402
from .solver import Trajectory, chain_solve, solve_ivp  # noqa: E402
from .spectral import SectorClass, SpectralReport, analyze, classify_eigenvalue, split_system  # noqa: E402
from .system import SystemSpec, load_spec  # noqa: E402

__version__ = "0.1.0"

__all__ = [
    "BoundedSolutionSet", "ComplexExponential", "Constant", "DefectiveMatrixError", "DomainError",
    "EstimateReport", "ExpDecay", "ForcingFunction", "FracPerronError", "IllConditionedError",
    "LemmaId", "MLQuery", "MLResult", "MissingSupNormError", "NotHyperbolic", "NotHyperbolicError",
    "ParseError", "PiecewiseLinearTable", "PrecisionError", "PreconditionError", "Regime",
    "SectorClass", "SectorError", "Sinusoid", "SpectralReport", "SystemSpec", "Trajectory",
    "WitnessReport", "analyze", "bounded_set", "certify_boundedness", "chain_solve",
    "classify_eigenvalue", "decay_check", "eval_mlf", "eval_mlf_matrix", "load_spec",
    "mittag_leffler", "solve_ivp", "split_system", "unstable_init_block", "unstable_init_scalar",
    "verify_lemma3", "verify_lemma4", "verify_limit_lemma", "witness_resonant", "witness_trivial",
]
