"""CDR-driven Wiener postfilter."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cdr import CdrEstimatorKind

G_MIN_DEFAULT = 0.1

# Overestimation factors selected per estimator on real recordings.
MU_OPT = {
    CdrEstimatorKind.DOA_INDEP: 1.1,
    CdrEstimatorKind.DOA_DEP: 1.2,
    CdrEstimatorKind.THIERGART: 0.4,
    CdrEstimatorKind.JEUB: 0.8,
}


@dataclass(frozen=True)
class PostfilterConfig:
    estimator: CdrEstimatorKind = CdrEstimatorKind.DOA_DEP
    mu: float | None = None
    g_min: float = G_MIN_DEFAULT

    def __post_init__(self):
        est = CdrEstimatorKind.parse(self.estimator)
        object.__setattr__(self, "estimator", est)
        if self.mu is None:
            object.__setattr__(self, "mu", MU_OPT[est])
        if not (math.isfinite(self.mu) and self.mu >= 0):
            raise ValueError("mu must be finite and nonnegative")
        if not 0 < self.g_min <= 1:
            raise ValueError("g_min must lie in (0, 1]")


def wiener_gain(cdr_bf, cfg: PostfilterConfig | None = None, *,
                mu: float | None = None, g_min: float | None = None):
    """``max(1 - mu / (1 + CDR), g_min)``, elementwise for arrays."""
    if cfg is not None:
        mu = cfg.mu if mu is None else mu
        g_min = cfg.g_min if g_min is None else g_min
    if mu is None or g_min is None:
        raise TypeError("need a PostfilterConfig or explicit mu and g_min")
    cdr = np.asarray(cdr_bf, dtype=float)
    if np.any(cdr < 0):
        raise ValueError("CDR must be nonnegative")
    g = np.maximum(1.0 - mu / (1.0 + cdr), g_min)
    return float(g) if g.ndim == 0 else g


def apply(y_bf, gains) -> np.ndarray:
    """Scale the complex beamformer output bin by bin; phase is untouched."""
    y = np.asarray(y_bf)
    g = np.asarray(gains, dtype=float)
    if y.shape[-2:] != g.shape[-2:]:
        raise ValueError(f"gain grid {g.shape} does not match tensor {y.shape}")
    return y * g
