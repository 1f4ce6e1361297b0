"""Beamformer with a coherence-based Wiener postfilter driven by CDR estimates."""

from .cdr import CdrEstimatorKind, CdrValue
from .filterbank import FilterbankConfig, analyze, synthesize
from .kernels import BACKEND
from .pipeline import EnhancementConfig, Enhancer, enhance
from .postfilter import MU_OPT, PostfilterConfig
from .spatial import ArrayGeometry, Doa

__all__ = [
    "ArrayGeometry", "BACKEND", "CdrEstimatorKind", "CdrValue", "Doa",
    "EnhancementConfig", "Enhancer", "FilterbankConfig", "MU_OPT",
    "PostfilterConfig", "analyze", "enhance", "synthesize",
]
__version__ = "0.1.0"
