"""Combine pairwise CDR estimates and map them to the beamformer output."""

from __future__ import annotations

import numpy as np

from .cdr import CDR_MAX, CdrValue

EPS_D = 1e-4
EPS_A = 1e-4


class PairSet(tuple):
    """Sorted, nonempty tuple of ``(p, q)`` pairs with ``p < q``."""

    def __new__(cls, pairs, num_channels: int | None = None):
        items = tuple(sorted((int(p), int(q)) for p, q in pairs))
        if not items:
            raise ValueError("pair set is empty")
        for p, q in items:
            if not p < q:
                raise ValueError(f"pair ({p}, {q}) must satisfy p < q")
            if p < 0 or (num_channels is not None and q >= num_channels):
                raise ValueError(f"pair ({p}, {q}) out of range")
        if len(set(items)) != len(items):
            raise ValueError("duplicate pairs")
        return super().__new__(cls, items)

    @classmethod
    def from_channels(cls, channels) -> "PairSet":
        ch = sorted(channels)
        return cls([(p, q) for i, p in enumerate(ch) for q in ch[i + 1:]])


def _cdr_values(pair_cdrs):
    vals = [c.cdr if isinstance(c, CdrValue) else c for c in pair_cdrs]
    return np.asarray(vals, dtype=float)


def average_diffuseness(pair_cdrs, pairs=None, axis: int = 0):
    """Mean of ``1 / (1 + CDR_pq)`` over pairs, clamped to ``[EPS_D, 1]``.

    ``pair_cdrs`` may be a list of :class:`CdrValue`/floats (one per pair) or
    an array whose ``axis`` runs over pairs.
    """
    cdrs = _cdr_values(pair_cdrs) if isinstance(pair_cdrs, (list, tuple)) \
        else np.asarray(pair_cdrs, dtype=float)
    if cdrs.size == 0 or cdrs.shape[axis] == 0:
        raise ValueError("need at least one pair")
    if pairs is not None and len(pairs) != cdrs.shape[axis]:
        raise ValueError("pair count does not match the CDR values")
    dbar = np.mean(1.0 / (1.0 + cdrs), axis=axis)
    out = np.clip(dbar, EPS_D, 1.0)
    return float(out) if out.ndim == 0 else out


def average_cdr(pair_cdrs, axis: int = 0):
    """Plain CDR-domain mean (diagnostic only, not used by the pipeline)."""
    return np.mean(np.asarray(pair_cdrs, dtype=float), axis=axis)


def input_cdr(mean_diffuseness):
    d = np.asarray(mean_diffuseness, dtype=float)
    if np.any(d < EPS_D * (1 - 1e-12)) or np.any(d > 1.0):
        raise ValueError("mean diffuseness outside [EPS_D, 1]")
    out = (1.0 - d) / d
    return float(out) if out.ndim == 0 else out


def diffuse_array_gain(weights, jdiff) -> float:
    """``w^H J w`` for complex beamformer weights ``w`` (length N).

    The result is real for symmetric ``J``; it is floored at ``EPS_A``.
    """
    w = np.asarray(weights, dtype=complex)
    j = np.asarray(jdiff, dtype=float)
    if w.ndim != 1 or j.shape != (w.size, w.size):
        raise ValueError(f"weights {w.shape} and matrix {j.shape} do not match")
    value = np.conj(w) @ j @ w
    if abs(value.imag) > 1e-9 * max(1.0, abs(value.real)):
        raise ValueError("coherence matrix is not symmetric (complex array gain)")
    return max(float(value.real), EPS_A)


def diffuse_array_gain_grid(gains, taus, freqs, distances, c):
    """Array gain of delay-and-sum weights over frames and bins.

    Args:
        gains: real channel gains ``(L, N)``.
        taus: steering TDOAs ``(L, N)`` in seconds.
        freqs: bin frequencies ``(F,)``.
        distances: ``(N, N)`` inter-microphone distances.
        c: speed of sound.

    Returns:
        ``(L, F)`` array, floored at ``EPS_A``.
    """
    gains = np.asarray(gains, dtype=float)
    taus = np.asarray(taus, dtype=float)
    freqs = np.asarray(freqs, dtype=float)
    n = gains.shape[1]
    out = np.broadcast_to(np.sum(gains ** 2, axis=1)[:, None],
                          (gains.shape[0], freqs.size)).copy()
    for p in range(n):
        for q in range(p + 1, n):
            jpq = np.sinc(2.0 * freqs * distances[p, q] / c)
            phase = 2.0 * np.pi * np.outer(taus[:, p] - taus[:, q], freqs)
            out += 2.0 * (gains[:, p] * gains[:, q])[:, None] * jpq * np.cos(phase)
    return np.maximum(out, EPS_A)


def beamformer_output_cdr(cdr_in, a_gamma):
    """``CDR_in / A_gamma`` clamped to ``CDR_MAX``; returns ``(cdr_bf, clamped)``."""
    a = np.maximum(np.asarray(a_gamma, dtype=float), EPS_A)
    value = np.asarray(cdr_in, dtype=float) / a
    clamped = value >= CDR_MAX
    value = np.minimum(value, CDR_MAX)
    if value.ndim == 0:
        return float(value), bool(clamped)
    return value, clamped
