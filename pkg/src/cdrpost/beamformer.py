"""GCC-PHAT TDOA estimation and weighted delay-and-sum beamforming.

Per-channel TDOAs follow the model convention in :mod:`cdrpost.spatial`.
When they are estimated from the signals, channel 0 is the reference
(``tau_0 = 0``) and ``tau_n = -delay(x_0, x_n)``, where ``delay(a, b)`` is the
lag by which ``b`` trails ``a``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

SILENCE_FLOOR = 1e-10
CONFIDENCE_THRESHOLD = 0.1
SEGMENT_S = 0.5
SCROLL_S = 0.25


def gcc_phat_tdoa(sig_p, sig_q, max_lag: float, fs: float = 16000.0):
    """Delay of ``sig_q`` relative to ``sig_p`` via the phase transform.

    Args:
        sig_p, sig_q: equal-length segments.
        max_lag: search range in seconds (symmetric).
        fs: sample rate.

    Returns:
        ``(delay_seconds, confidence)``; confidence is the PHAT correlation
        peak in ``[0, 1]``.  Silent segments give ``(0.0, 0.0)``.
    """
    a = np.asarray(sig_p, dtype=float)
    b = np.asarray(sig_q, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("segments must be 1-D and of equal length")
    n = a.size
    max_k = int(np.ceil(max_lag * fs))
    if n < 4 * max_k or n < 2:
        raise ValueError(f"segment of {n} samples too short for a {max_k}-sample lag")
    if np.mean(a * a) < SILENCE_FLOOR or np.mean(b * b) < SILENCE_FLOOR:
        return 0.0, 0.0
    nfft = 1 << (2 * n - 1).bit_length()
    cross = np.fft.rfft(b, nfft) * np.conj(np.fft.rfft(a, nfft))
    mag = np.abs(cross)
    keep = mag > 1e-12 * mag.max()
    phat = np.where(keep, cross / np.where(keep, mag, 1.0), 0.0)
    # normalise so that identical inputs peak at exactly 1
    cc = np.fft.irfft(phat, nfft) / np.fft.irfft(keep.astype(float), nfft)[0]
    lags = np.arange(-max_k, max_k + 1)
    window = cc[lags % nfft]
    i = int(np.argmax(window))
    peak = window[i]
    shift = 0.0
    if 0 < i < window.size - 1:
        y0, y1, y2 = window[i - 1], peak, window[i + 1]
        den = y0 - 2.0 * y1 + y2
        if den < 0:
            shift = 0.5 * (y0 - y2) / den
    delay = (lags[i] + shift) / fs
    return float(delay), float(np.clip(peak, 0.0, 1.0))


@dataclass
class TdoaTrack:
    """Per-segment TDOA vectors ``(segments, N)`` with confidences ``(segments, N)``.

    Segment ``k`` starts at ``k * scroll`` seconds and lasts ``segment``.
    """

    tdoas: np.ndarray
    confidence: np.ndarray
    segment: float = SEGMENT_S
    scroll: float = SCROLL_S
    fallback: bool = False
    replaced: np.ndarray = field(default=None)

    def __post_init__(self):
        self.tdoas = np.atleast_2d(np.asarray(self.tdoas, dtype=float))
        self.confidence = np.atleast_2d(np.asarray(self.confidence, dtype=float))
        if self.tdoas.shape != self.confidence.shape:
            raise ValueError("tdoas and confidence shapes differ")
        if self.tdoas.shape[0] < 1:
            raise ValueError("track needs at least one segment")
        if self.replaced is None:
            self.replaced = np.zeros(self.tdoas.shape, dtype=bool)

    @property
    def num_segments(self) -> int:
        return self.tdoas.shape[0]

    def segment_index(self, times) -> np.ndarray:
        """Index of the segment whose centre is nearest to each time (s)."""
        k = np.rint((np.asarray(times, dtype=float) - 0.5 * self.segment) / self.scroll)
        return np.clip(k, 0, self.num_segments - 1).astype(np.intp)

    def at(self, times) -> np.ndarray:
        return self.tdoas[self.segment_index(times)]

    def to_dict(self) -> dict:
        return {"segment_s": self.segment, "scroll_s": self.scroll,
                "fallback": bool(self.fallback),
                "tdoas_s": self.tdoas.tolist(),
                "confidence": self.confidence.tolist()}


def estimate_tdoa_track(audio, fs: float, max_lags, segment: float = SEGMENT_S,
                        scroll: float = SCROLL_S, reference: int = 0) -> TdoaTrack:
    """GCC-PHAT of every channel against ``reference`` over sliding segments.

    ``max_lags`` is a scalar or a per-channel array of search limits (s).
    """
    x = np.atleast_2d(np.asarray(audio, dtype=float))
    n_ch, n = x.shape
    max_lags = np.broadcast_to(np.asarray(max_lags, dtype=float), (n_ch,))
    seg_len = int(round(segment * fs))
    hop = int(round(scroll * fs))
    if n <= seg_len:
        starts = [0]
        seg_len = n
    else:
        starts = list(range(0, n - seg_len + 1, hop))
    taus = np.zeros((len(starts), n_ch))
    conf = np.ones((len(starts), n_ch))
    for k, s in enumerate(starts):
        ref = x[reference, s:s + seg_len]
        for ch in range(n_ch):
            if ch == reference:
                continue
            lag = min(max_lags[ch], seg_len / (4 * fs))
            delay, c = gcc_phat_tdoa(ref, x[ch, s:s + seg_len], lag, fs)
            taus[k, ch] = -delay
            conf[k, ch] = c
    return TdoaTrack(taus, conf, segment, scroll)


def segment_tdoa_smoothing(track: TdoaTrack, threshold: float = CONFIDENCE_THRESHOLD,
                           neighbours: int = 2) -> TdoaTrack:
    """Replace unreliable segment TDOAs by the median of nearby reliable ones.

    For each channel, a segment whose confidence is below ``threshold`` takes
    the median of up to ``neighbours`` reliable segments on each side.  When a
    channel has no reliable segment at all, the whole track falls back to
    zero TDOAs and is flagged.
    """
    tdoas = track.tdoas.copy()
    replaced = np.zeros(tdoas.shape, dtype=bool)
    good = track.confidence >= threshold
    fallback = False
    for ch in range(tdoas.shape[1]):
        ok = np.flatnonzero(good[:, ch])
        if ok.size == 0:
            fallback = True
            break
        for k in np.flatnonzero(~good[:, ch]):
            before = ok[ok < k][-neighbours:]
            after = ok[ok > k][:neighbours]
            tdoas[k, ch] = np.median(track.tdoas[np.concatenate([before, after]), ch])
            replaced[k, ch] = True
    if fallback:
        log.warning("no reliable TDOA segment; falling back to zero TDOAs")
        tdoas = np.zeros_like(tdoas)
        replaced = np.ones(tdoas.shape, dtype=bool)
    return TdoaTrack(tdoas, track.confidence.copy(), track.segment, track.scroll,
                     fallback=fallback, replaced=replaced)


@dataclass
class BeamformerWeights:
    """Real channel gains ``(L, N)`` and steering TDOAs ``(L, N)`` per frame."""

    gains: np.ndarray
    tdoas: np.ndarray

    def __post_init__(self):
        self.gains = np.atleast_2d(np.asarray(self.gains, dtype=float))
        self.tdoas = np.atleast_2d(np.asarray(self.tdoas, dtype=float))
        if self.gains.shape != self.tdoas.shape:
            raise ValueError("gains and tdoas must have the same shape")
        if np.any(self.gains < 0):
            raise ValueError("channel gains must be nonnegative")
        if not np.allclose(self.gains.sum(axis=1), 1.0, atol=1e-12):
            raise ValueError("channel gains must sum to one")

    @classmethod
    def constant(cls, gains, tdoas, frames: int) -> "BeamformerWeights":
        g = np.broadcast_to(np.asarray(gains, dtype=float), (frames, len(gains)))
        t = np.broadcast_to(np.asarray(tdoas, dtype=float), (frames, len(tdoas)))
        return cls(g, t)

    def complex_weights(self, freqs) -> np.ndarray:
        """``W_n(l, f) = w_n(l) exp(-j 2 pi f tau_n(l))``, shape ``(L, N, F)``."""
        f = np.asarray(freqs, dtype=float)
        return self.gains[:, :, None] * np.exp(-2j * np.pi * self.tdoas[:, :, None] * f)


def uniform_gains(num_channels: int, active=None) -> np.ndarray:
    active = np.ones(num_channels, dtype=bool) if active is None else np.asarray(active, bool)
    if not active.any():
        raise ValueError("no active channel")
    g = active.astype(float)
    return g / g.sum()


def steer_and_sum(frames, weights: BeamformerWeights, freqs) -> np.ndarray:
    """``Y(l, f) = sum_n W_n(l, f) X_n(l, f)`` for ``frames`` of shape ``(N, L, F)``."""
    x = np.asarray(frames)
    if x.ndim != 3 or x.shape[:2] != weights.gains.shape[::-1] \
            or x.shape[2] != len(freqs):
        raise ValueError(
            f"tensor {x.shape} does not match weights {weights.gains.shape} "
            f"and {len(freqs)} bins")
    w = weights.complex_weights(freqs)
    return np.einsum("lnf,nlf->lf", w, x)[None]


def distortionless_response(weights: BeamformerWeights, steering_tdoas, freqs) -> np.ndarray:
    """``sum_n W_n h_n`` for a plane wave with the given TDOAs; 1 when distortionless."""
    h = np.exp(2j * np.pi * np.asarray(steering_tdoas, dtype=float)[..., None]
               * np.asarray(freqs, dtype=float))
    return np.sum(weights.complex_weights(freqs) * h, axis=1)


def screen_channels(audio, energy_db: float = 20.0, min_xcorr: float = 0.2,
                    max_lag: float = 1e-3, fs: float = 16000.0) -> np.ndarray:
    """Flag failing channels over a whole utterance.

    A channel fails when its energy is more than ``energy_db`` away from the
    median channel energy, or when its peak normalised cross-correlation with
    every other channel stays below ``min_xcorr``.  Returns a boolean mask of
    usable channels.
    """
    x = np.atleast_2d(np.asarray(audio, dtype=float))
    n_ch = x.shape[0]
    energy = np.mean(x * x, axis=1)
    level = 10 * np.log10(np.maximum(energy, 1e-30))
    ok = np.abs(level - np.median(level)) <= energy_db
    if n_ch > 1:
        k = int(np.ceil(max_lag * fs))
        nfft = 1 << (2 * x.shape[1] - 1).bit_length()
        spec = np.fft.rfft(x - x.mean(axis=1, keepdims=True), nfft)
        norms = np.sqrt(np.sum(x * x, axis=1))
        best = np.zeros((n_ch, n_ch))
        for p in range(n_ch):
            for q in range(p + 1, n_ch):
                cc = np.fft.irfft(spec[q] * np.conj(spec[p]), nfft)
                lags = np.arange(-k, k + 1) % nfft
                den = norms[p] * norms[q]
                best[p, q] = best[q, p] = np.max(np.abs(cc[lags])) / den if den > 0 else 0.0
        np.fill_diagonal(best, 0.0)
        ok &= best.max(axis=1) >= min_xcorr
    if not ok.any():
        log.warning("channel screening rejected every channel; keeping all")
        ok[:] = True
    return ok


def correlation_gains(audio, active=None, max_lag: float = 1e-3,
                      fs: float = 16000.0) -> np.ndarray:
    """Channel gains proportional to mean peak cross-correlation with the others."""
    x = np.atleast_2d(np.asarray(audio, dtype=float))
    n_ch = x.shape[0]
    active = np.ones(n_ch, bool) if active is None else np.asarray(active, bool)
    if n_ch == 1:
        return np.ones(1)
    k = int(np.ceil(max_lag * fs))
    nfft = 1 << (2 * x.shape[1] - 1).bit_length()
    spec = np.fft.rfft(x, nfft)
    norms = np.sqrt(np.sum(x * x, axis=1))
    score = np.zeros(n_ch)
    idx = np.flatnonzero(active)
    for p in idx:
        vals = []
        for q in idx:
            if q == p:
                continue
            den = norms[p] * norms[q]
            cc = np.fft.irfft(spec[q] * np.conj(spec[p]), nfft)
            vals.append(np.max(np.abs(cc[np.arange(-k, k + 1) % nfft])) / den if den > 0 else 0.0)
        score[p] = np.mean(vals) if vals else 1.0
    score = np.where(active, np.maximum(score, 1e-6), 0.0)
    return score / score.sum()
