"""Coherence-constrained CP decomposition for multi-subarray source separation."""

__version__ = "0.1.0"

from .array_model import ArrayScenario, GroundTruth, Source, steering, subarray_gain, synthesize
from .certificates import Certificate, Check, certify_model
from .coherence_metrics import INFINITE, coherence, krank, spark
from .degeneracy import DslInstance, dsl_limit, dsl_sequence
from .solver import (
    SolverOptions,
    SolveTrace,
    align_models,
    als_decompose,
    constrained_decompose,
    decompose,
)
from .tensor_core import (
    CpModel,
    Tensor3,
    cp_evaluate,
    frobenius_inner,
    frobenius_norm,
    outer3,
    residual,
)

__all__ = [
    "ArrayScenario",
    "Certificate",
    "Check",
    "CpModel",
    "DslInstance",
    "GroundTruth",
    "INFINITE",
    "Source",
    "SolverOptions",
    "SolveTrace",
    "Tensor3",
    "align_models",
    "als_decompose",
    "certify_model",
    "coherence",
    "constrained_decompose",
    "cp_evaluate",
    "decompose",
    "dsl_limit",
    "dsl_sequence",
    "frobenius_inner",
    "frobenius_norm",
    "krank",
    "outer3",
    "residual",
    "spark",
    "steering",
    "subarray_gain",
    "synthesize",
]
