"""Pure-numpy postfilter kernel (reference and fallback for ``_kernels.pyx``)."""

import numpy as np

from .aggregation import EPS_A, EPS_D
from .cdr import CDR_MAX, CdrEstimatorKind, estimate_array
from .coherence import EPS_COH, PSD_FLOOR_REL, clamp_coherence

FLAG_LOW_ENERGY = 1
FLAG_CLAMPED = 2
FLAG_WARMUP = 4

_KINDS = {k.code: k for k in CdrEstimatorKind}


def process_block(X, dtau, a_gamma, freqs, gamma_n, pair_p, pair_q,
                  auto_psd, cross_psd, frames_seen, lam, estimator, mu, g_min,
                  warmup, gain, dbar, cdr_in, cdr_bf, flags):
    """Run the per-frame postfilter recursion over a block of frames.

    Args:
        X: microphone spectra ``(L, N, F)`` complex.
        dtau: per-frame pair TDOA differences ``tau_p - tau_q`` ``(L, P)``.
        a_gamma: diffuse array gain of the beamformer ``(L, F)``.
        freqs: bin frequencies ``(F,)``.
        gamma_n: diffuse model coherence per pair ``(P, F)``.
        pair_p, pair_q: pair channel indices ``(P,)``.
        auto_psd, cross_psd: PSD state ``(N, F)`` / ``(P, F)``, updated in place.
        frames_seen: frames folded into the state before this block.
        lam, estimator, mu, g_min, warmup: parameters (estimator as int code).
        gain, dbar, cdr_in, cdr_bf: ``(L, F)`` float outputs.
        flags: ``(L, F)`` uint8 output bitmask.

    Returns:
        Updated ``frames_seen``.
    """
    kind = _KINDS[estimator]
    n_frames = X.shape[0]
    two_pi_f = 2.0 * np.pi * freqs
    for l in range(n_frames):
        x = X[l]
        auto_psd *= lam
        auto_psd += (1.0 - lam) * (x.real * x.real + x.imag * x.imag)
        cross_psd *= lam
        cross_psd += (1.0 - lam) * (x[pair_p] * np.conj(x[pair_q]))
        frames_seen += 1

        floor = PSD_FLOOR_REL * np.mean(auto_psd)
        weak = auto_psd <= floor
        low = weak[pair_p] | weak[pair_q]
        denom = np.sqrt(auto_psd[pair_p] * auto_psd[pair_q])
        gx = clamp_coherence(cross_psd / np.where(low, 1.0, denom), EPS_COH)
        gx = np.where(low, gamma_n, gx)

        gs = None
        if kind.needs_doa:
            gs = np.exp(1j * np.outer(dtau[l], two_pi_f))
        cdr, clamped = estimate_array(kind, gx, gamma_n, gs)

        d = np.clip(np.mean(1.0 / (1.0 + cdr), axis=0), EPS_D, 1.0)
        ci = (1.0 - d) / d
        cb = ci / np.maximum(a_gamma[l], EPS_A)
        bf_clamped = cb >= CDR_MAX
        cb = np.minimum(cb, CDR_MAX)
        g = np.maximum(1.0 - mu / (1.0 + cb), g_min)

        fl = np.where(low.any(axis=0), FLAG_LOW_ENERGY, 0)
        fl |= np.where(clamped.any(axis=0) | bf_clamped, FLAG_CLAMPED, 0)
        if frames_seen <= warmup:
            g = np.ones_like(g)
            fl |= FLAG_WARMUP
        gain[l] = g
        dbar[l] = d
        cdr_in[l] = ci
        cdr_bf[l] = cb
        flags[l] = fl
    return frames_seen
