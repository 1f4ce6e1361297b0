"""Coherent-to-diffuse power ratio estimators.

Every estimator maps a short-time coherence estimate ``gx`` and the
diffuse-field coherence ``gn`` (plus, for the DOA-dependent ones, the
direct-path coherence ``gs``) to a nonnegative CDR.  Results are clamped to
``CDR_MAX``; a bin is flagged ``clamped_high`` when it hits the clamp or when
the estimator's denominator falls below ``EPS_DEN``.

The ``*_array`` functions are vectorized and return ``(cdr, clamped_high)``;
the scalar functions wrap them into :class:`CdrValue`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

CDR_MAX = 1e4
EPS_DEN = 1e-6


class CdrEstimatorKind(enum.Enum):
    DOA_INDEP = "doaindep"
    DOA_DEP = "doadep"
    THIERGART = "thiergart"
    JEUB = "jeub"

    @property
    def needs_doa(self) -> bool:
        return self in (CdrEstimatorKind.DOA_DEP, CdrEstimatorKind.JEUB)

    @property
    def code(self) -> int:
        """Integer id used by the compiled kernel."""
        return _CODES[self]

    @classmethod
    def parse(cls, value) -> "CdrEstimatorKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown estimator {value!r} (choose from {names})") from None


_CODES = {CdrEstimatorKind.DOA_INDEP: 0, CdrEstimatorKind.DOA_DEP: 1,
          CdrEstimatorKind.THIERGART: 2, CdrEstimatorKind.JEUB: 3}


@dataclass(frozen=True)
class CdrValue:
    cdr: float
    clamped_high: bool = False
    low_energy: bool = False


def _finish(value, singular):
    value = np.where(singular, CDR_MAX, value)
    value = np.maximum(value, 0.0)
    clamped = singular | (value >= CDR_MAX)
    return np.minimum(value, CDR_MAX), clamped


def cdr_doaindep_array(gx, gn):
    gx = np.asarray(gx, dtype=complex)
    gn = np.asarray(gn, dtype=float)
    re = gx.real
    mag2 = re * re + gx.imag * gx.imag
    # gn^2 re^2 - gn^2 |gx|^2 + gn^2 - 2 gn re + |gx|^2, regrouped so that it
    # vanishes exactly at gx = gn instead of by cancellation
    radicand = (gn - re) ** 2 + gx.imag * gx.imag * (1.0 - gn * gn)
    num = gn * re - mag2 - np.sqrt(np.maximum(radicand, 0.0))
    den = mag2 - 1.0
    singular = np.abs(den) < EPS_DEN
    with np.errstate(divide="ignore", invalid="ignore"):
        value = np.where(singular, 0.0, num / np.where(singular, 1.0, den))
    return _finish(value, singular)


def cdr_doadep_array(gx, gn, gs):
    gx = np.asarray(gx, dtype=complex)
    gn = np.asarray(gn, dtype=float)
    gs = np.asarray(gs, dtype=complex)
    prefactor_num = 1.0 - gn * np.cos(np.angle(gs))
    prefactor_den = np.abs(gn - gs)
    den = (np.conj(gs) * gx).real - 1.0
    singular = (np.abs(den) < EPS_DEN) | (prefactor_den < EPS_DEN)
    safe_den = np.where(singular, 1.0, den)
    safe_pden = np.where(singular, 1.0, prefactor_den)
    value = prefactor_num / safe_pden * np.abs(np.conj(gs) * (gn - gx) / safe_den)
    return _finish(np.where(singular, 0.0, value), singular)


def cdr_thiergart_array(gx, gn):
    gx = np.asarray(gx, dtype=complex)
    gn = np.asarray(gn, dtype=float)
    # arg(0) == 0, so exp(j arg gx) == 1 for gx == 0
    den = gx - np.exp(1j * np.angle(gx))
    singular = np.abs(den) < EPS_DEN
    value = ((gn - gx) / np.where(singular, 1.0, den)).real
    return _finish(np.where(singular, 0.0, value), singular)


def cdr_jeub_array(gx, gn, gs):
    gx = np.asarray(gx, dtype=complex)
    gn = np.asarray(gn, dtype=float)
    gs = np.asarray(gs, dtype=complex)
    proj = (np.conj(gs) * gx).real
    den = proj - 1.0
    singular = np.abs(den) < EPS_DEN
    value = (gn - proj) / np.where(singular, 1.0, den)
    return _finish(np.where(singular, 0.0, value), singular)


def estimate_array(kind, gx, gn, gs=None):
    """Dispatch to the vectorized estimator for ``kind``."""
    kind = CdrEstimatorKind.parse(kind)
    if kind.needs_doa:
        if gs is None:
            raise ValueError(f"{kind.value} estimator needs the direct-path coherence")
        fn = cdr_doadep_array if kind is CdrEstimatorKind.DOA_DEP else cdr_jeub_array
        return fn(gx, gn, gs)
    fn = cdr_doaindep_array if kind is CdrEstimatorKind.DOA_INDEP else cdr_thiergart_array
    return fn(gx, gn)


def _scalar(result) -> CdrValue:
    cdr, clamped = result
    return CdrValue(float(cdr), bool(clamped))


def cdr_doaindep(gx: complex, gn: float) -> CdrValue:
    """DOA-independent estimator; uses only the real part and magnitude of ``gx``."""
    return _scalar(cdr_doaindep_array(gx, gn))


def cdr_doadep(gx: complex, gn: float, gs: complex) -> CdrValue:
    """DOA-dependent estimator; unbiased for any direct-path phase."""
    return _scalar(cdr_doadep_array(gx, gn, gs))


def cdr_thiergart(gx: complex, gn: float) -> CdrValue:
    """Uses the phase of ``gx`` in place of the direct-path coherence."""
    return _scalar(cdr_thiergart_array(gx, gn))


def cdr_jeub(gx: complex, gn: float, gs: complex) -> CdrValue:
    return _scalar(cdr_jeub_array(gx, gn, gs))


def estimate(kind, gx: complex, gn: float, gs: complex | None = None) -> CdrValue:
    return _scalar(estimate_array(kind, gx, gn, gs))


def diffuseness(cdr) -> float | np.ndarray:
    """``1 / (1 + CDR)``; accepts a :class:`CdrValue`, a float or an array."""
    if isinstance(cdr, CdrValue):
        cdr = cdr.cdr
    value = np.asarray(cdr, dtype=float)
    if np.any(value < 0):
        raise ValueError("CDR must be nonnegative")
    out = 1.0 / (1.0 + value)
    return float(out) if out.ndim == 0 else out
