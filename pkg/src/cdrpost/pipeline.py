"""Beamformer plus coherence-based postfilter, frame by frame.

Audio is padded with ``window_length - hop`` zeros at the start so that every
input sample lies in the perfectly reconstructed interior; the output is
trimmed back to the input length.  :class:`Enhancer` processes audio in
arbitrary chunks and produces the same result as a single call.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .aggregation import PairSet, diffuse_array_gain_grid
from .beamformer import (BeamformerWeights, TdoaTrack, correlation_gains,
                         estimate_tdoa_track, screen_channels, segment_tdoa_smoothing,
                         uniform_gains)
from .cdr import CdrEstimatorKind
from .coherence import LAMBDA_DEFAULT, WARMUP_FRAMES, PsdState, pair_diffuse_coherence
from .filterbank import FilterbankConfig, StreamingAnalyzer, StreamingSynthesizer
from .postfilter import PostfilterConfig
from .spatial import ArrayGeometry, Doa, tdoas

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EnhancementConfig:
    filterbank: FilterbankConfig = field(default_factory=FilterbankConfig)
    postfilter: PostfilterConfig = field(default_factory=PostfilterConfig)
    lam: float = LAMBDA_DEFAULT
    doa: Doa | None = None           # None -> GCC-PHAT estimation
    bypass_postfilter: bool = False
    screen_channels: bool = False
    channel_weighting: str = "uniform"   # or "xcorr"
    warmup_frames: int = WARMUP_FRAMES
    backend: str | None = None

    def __post_init__(self):
        if not 0.0 <= self.lam < 1.0:
            raise ValueError("lambda must lie in [0, 1)")
        if self.channel_weighting not in ("uniform", "xcorr"):
            raise ValueError(f"unknown channel weighting {self.channel_weighting!r}")
        if self.warmup_frames < 0:
            raise ValueError("warmup_frames must be >= 0")
        kernels.get_kernel(self.backend)


@dataclass
class Diagnostics:
    """Per-frame/bin quantities; grids have shape ``(frames, bins)``.

    Frame ``l`` is centred at ``frame_times[l]`` seconds of the input signal.
    """

    freqs: np.ndarray
    frame_rate: float
    frame_times: np.ndarray
    mean_diffuseness: np.ndarray
    cdr_in: np.ndarray
    cdr_bf: np.ndarray
    gain: np.ndarray
    flags: np.ndarray
    tdoas: np.ndarray
    channels: np.ndarray
    channel_gains: np.ndarray
    tdoa_track: TdoaTrack | None = None
    postfilter_bypassed: bool = False


class Enhancer:
    """Streaming front-end for a fixed geometry and steering.

    Args:
        geometry: array geometry (one entry per input channel).
        config: processing parameters.
        tdoa_track: per-segment TDOAs (model convention); required when
            ``config.doa`` is None.  Times refer to the unpadded input.
        channel_gains: beamformer channel gains (sum to one); zero-gain
            channels are excluded from the pair set.  Uniform if omitted.
    """

    def __init__(self, geometry: ArrayGeometry, config: EnhancementConfig,
                 tdoa_track: TdoaTrack | None = None, channel_gains=None):
        self.geometry = geometry
        self.config = config
        fb = config.filterbank
        n = geometry.num_mics
        if config.doa is None and tdoa_track is None:
            raise ValueError("need either a fixed DOA or a TDOA track")
        if tdoa_track is not None and tdoa_track.tdoas.shape[1] != n:
            raise ValueError("TDOA track channel count does not match geometry")
        self.tdoa_track = tdoa_track
        self.fixed_tdoas = tdoas(geometry, config.doa) if config.doa is not None else None
        gains = uniform_gains(n) if channel_gains is None else np.asarray(channel_gains, float)
        if gains.shape != (n,) or np.any(gains < 0) or not np.isclose(gains.sum(), 1.0):
            raise ValueError("channel gains must be N nonnegative values summing to one")
        self.channel_gains = gains
        self.active = np.flatnonzero(gains > 0)
        self.freqs = fb.freqs()
        self.pad = fb.window_length - fb.hop
        self.bypass = config.bypass_postfilter or self.active.size < 2
        if self.active.size < 2 and not config.bypass_postfilter:
            log.warning("fewer than two active channels: postfilter bypassed")

        pairs = PairSet.from_channels(self.active) if self.active.size >= 2 else ()
        self.pairs = list(pairs)
        self.pair_p = np.array([p for p, _ in self.pairs], dtype=np.intp)
        self.pair_q = np.array([q for _, q in self.pairs], dtype=np.intp)
        self.state = PsdState(n, fb.num_bins, config.lam, self.pairs) if self.pairs else None
        self.gamma_n = np.ascontiguousarray(pair_diffuse_coherence(
            geometry.distances, self.pairs, self.freqs, geometry.speed_of_sound)) \
            if self.pairs else None
        self._kernel = kernels.get_kernel(config.backend)
        self._analyzer = StreamingAnalyzer(fb, n)
        self._synth = StreamingSynthesizer(fb)
        self._frame_index = 0
        self._samples_in = 0
        self._to_skip = self.pad
        self._emitted = 0
        self._started = False
        self._finished = False
        self._diag = {k: [] for k in ("dbar", "cdr_in", "cdr_bf", "gain", "flags", "tdoas")}

    # -- steering ---------------------------------------------------------
    def _frame_tdoas(self, frame_idx: np.ndarray) -> np.ndarray:
        n = self.geometry.num_mics
        if self.fixed_tdoas is not None:
            return np.broadcast_to(self.fixed_tdoas, (frame_idx.size, n)).copy()
        fb = self.config.filterbank
        centre = (frame_idx * fb.hop + fb.window_length / 2 - self.pad) / fb.sample_rate
        return self.tdoa_track.at(centre)

    # -- processing -------------------------------------------------------
    def process(self, chunk) -> np.ndarray:
        """Feed ``(channels, samples)`` audio; returns the enhanced samples ready so far."""
        if self._finished:
            raise RuntimeError("enhancer already flushed")
        x = np.atleast_2d(np.asarray(chunk, dtype=float))
        if x.shape[0] != self.geometry.num_mics:
            raise ValueError(
                f"got {x.shape[0]} channels for a {self.geometry.num_mics}-mic geometry")
        if not np.all(np.isfinite(x)):
            raise ValueError("audio contains non-finite samples")
        if not self._started:
            x = np.concatenate([np.zeros((x.shape[0], self.pad)), x], axis=1)
            self._started = True
            self._samples_in -= self.pad
        self._samples_in += x.shape[1]
        return self._run(self._analyzer.push(x))

    def flush(self) -> np.ndarray:
        """Drain remaining samples; the total output equals the input length."""
        if self._finished:
            return np.zeros(0)
        fb = self.config.filterbank
        n = self.geometry.num_mics
        if not self._started:
            self.process(np.zeros((n, 0)))
        buffered = self._samples_in + self.pad - self._frame_index * fb.hop
        tail = self.pad + (-(buffered + self.pad - fb.window_length)) % fb.hop
        out = [self._run(self._analyzer.push(np.zeros((n, tail))))]
        out.append(self._emit(self._synth.flush()))
        self._finished = True
        return np.concatenate(out)

    def _emit(self, samples: np.ndarray) -> np.ndarray:
        if self._to_skip:
            k = min(self._to_skip, samples.size)
            samples = samples[k:]
            self._to_skip -= k
        remaining = max(self._samples_in - self._emitted, 0)
        samples = samples[:remaining]
        self._emitted += samples.size
        return samples

    def _run(self, spectra: np.ndarray) -> np.ndarray:
        # spectra: (N, L, F)
        n_frames = spectra.shape[1]
        if n_frames == 0:
            return np.zeros(0)
        fb = self.config.filterbank
        idx = np.arange(self._frame_index, self._frame_index + n_frames)
        self._frame_index += n_frames
        taus = self._frame_tdoas(idx)
        gains = np.broadcast_to(self.channel_gains, taus.shape)
        weights = BeamformerWeights(gains, taus)
        w = weights.complex_weights(self.freqs)
        y_bf = np.einsum("lnf,nlf->lf", w, spectra)

        n_bins = fb.num_bins
        if self.bypass:
            gain = np.ones((n_frames, n_bins))
            dbar = np.full((n_frames, n_bins), np.nan)
            cdr_in = np.full((n_frames, n_bins), np.nan)
            cdr_bf = np.full((n_frames, n_bins), np.nan)
            flags = np.zeros((n_frames, n_bins), dtype=np.uint8)
        else:
            gain, dbar, cdr_in, cdr_bf, flags = self._postfilter(spectra, taus, gains)
        y = y_bf * gain
        for key, val in zip(("dbar", "cdr_in", "cdr_bf", "gain", "flags", "tdoas"),
                            (dbar, cdr_in, cdr_bf, gain, flags, taus)):
            self._diag[key].append(val)
        return self._emit(self._synth.push(y))

    def _postfilter(self, spectra, taus, gains):
        cfg = self.config
        n_frames = spectra.shape[1]
        n_bins = cfg.filterbank.num_bins
        X = np.ascontiguousarray(np.transpose(spectra, (1, 0, 2)))
        dtau = np.ascontiguousarray(taus[:, self.pair_p] - taus[:, self.pair_q])
        a_gamma = np.ascontiguousarray(diffuse_array_gain_grid(
            gains, taus, self.freqs, self.geometry.distances, self.geometry.speed_of_sound))
        gain = np.empty((n_frames, n_bins))
        dbar = np.empty((n_frames, n_bins))
        cdr_in = np.empty((n_frames, n_bins))
        cdr_bf = np.empty((n_frames, n_bins))
        flags = np.empty((n_frames, n_bins), dtype=np.uint8)
        pf = cfg.postfilter
        st = self.state
        st.frames_seen = self._kernel(
            X, dtau, a_gamma, self.freqs, self.gamma_n, self.pair_p, self.pair_q,
            st.auto_psd, st.cross_psd, st.frames_seen, st.lam, pf.estimator.code,
            float(pf.mu), float(pf.g_min), cfg.warmup_frames,
            gain, dbar, cdr_in, cdr_bf, flags)
        return gain, dbar, cdr_in, cdr_bf, flags

    def diagnostics(self) -> Diagnostics:
        fb = self.config.filterbank
        n_bins = fb.num_bins

        def cat(key, dtype=float, width=n_bins):
            parts = self._diag[key]
            return np.concatenate(parts) if parts else np.zeros((0, width), dtype=dtype)

        n_frames = self._frame_index
        times = (np.arange(n_frames) * fb.hop + fb.window_length / 2 - self.pad) / fb.sample_rate
        return Diagnostics(
            freqs=self.freqs, frame_rate=fb.frame_rate, frame_times=times,
            mean_diffuseness=cat("dbar"), cdr_in=cat("cdr_in"), cdr_bf=cat("cdr_bf"),
            gain=cat("gain"), flags=cat("flags", np.uint8),
            tdoas=cat("tdoas", width=self.geometry.num_mics),
            channels=self.active, channel_gains=self.channel_gains,
            tdoa_track=self.tdoa_track, postfilter_bypassed=self.bypass)


def _max_lags(geometry: ArrayGeometry, fs: float) -> np.ndarray:
    return geometry.distances[0] / geometry.speed_of_sound + 1.0 / fs


def prepare(audio, geometry: ArrayGeometry, config: EnhancementConfig):
    """Utterance-level decisions: channel screening, weights and TDOA track."""
    x = np.atleast_2d(np.asarray(audio, dtype=float))
    n = geometry.num_mics
    if x.shape[0] != n:
        raise ValueError(f"audio has {x.shape[0]} channels but geometry has {n} mics")
    fs = config.filterbank.sample_rate
    lag = float(geometry.aperture / geometry.speed_of_sound + 1.0 / fs)
    active = screen_channels(x, max_lag=lag, fs=fs) if config.screen_channels and n > 1 \
        else np.ones(n, dtype=bool)
    if config.channel_weighting == "xcorr" and n > 1:
        gains = correlation_gains(x, active, max_lag=lag, fs=fs)
    else:
        gains = uniform_gains(n, active)
    track = None
    if config.doa is None:
        track = segment_tdoa_smoothing(estimate_tdoa_track(x, fs, _max_lags(geometry, fs)))
    return gains, track


def enhance(audio, geometry: ArrayGeometry, config: EnhancementConfig | None = None,
            chunk_size: int | None = None):
    """Enhance multichannel audio ``(channels, samples)``.

    Returns ``(enhanced, diagnostics)`` with ``enhanced`` the same length as
    the input.  ``chunk_size`` feeds the streaming core in pieces (the result
    does not depend on it).
    """
    config = config or EnhancementConfig()
    x = np.atleast_2d(np.asarray(audio, dtype=float))
    if x.size == 0:
        raise ValueError("empty input")
    gains, track = prepare(x, geometry, config)
    enh = Enhancer(geometry, config, track, gains)
    step = x.shape[1] if not chunk_size else int(chunk_size)
    out = [enh.process(x[:, i:i + step]) for i in range(0, x.shape[1], step)]
    out.append(enh.flush())
    return np.concatenate(out), enh.diagnostics()


def beamform_only(audio, geometry: ArrayGeometry, config: EnhancementConfig | None = None):
    """Delay-and-sum output without postfilter."""
    config = config or EnhancementConfig()
    return enhance(audio, geometry, replace(config, bypass_postfilter=True))[0]


def apply_gains(audio, geometry: ArrayGeometry, config: EnhancementConfig, gains,
                tdoa_track: TdoaTrack | None = None, channel_gains=None) -> np.ndarray:
    """Beamform ``audio`` and apply a given ``(frames, bins)`` gain grid.

    Steering, padding and synthesis match :func:`enhance`, so passing the
    separated components of a scene with ``diagnostics.gain`` reproduces the
    enhanced output component by component.
    """
    x = np.atleast_2d(np.asarray(audio, dtype=float))
    enh = Enhancer(geometry, replace(config, bypass_postfilter=True), tdoa_track,
                   channel_gains)
    g = np.asarray(gains, dtype=float)
    spectra = enh._analyzer.push(np.concatenate([np.zeros((x.shape[0], enh.pad)), x], 1))
    enh._started = True
    enh._samples_in = x.shape[1]
    # drain with the same tail as Enhancer.flush
    fb = config.filterbank
    buffered = x.shape[1] + enh.pad
    tail = enh.pad + (-(buffered + enh.pad - fb.window_length)) % fb.hop
    spectra = np.concatenate([spectra, enh._analyzer.push(np.zeros((x.shape[0], tail)))], 1)
    if g.shape != (spectra.shape[1], fb.num_bins):
        raise ValueError(f"gain grid {g.shape} does not match "
                         f"{(spectra.shape[1], fb.num_bins)} frames x bins")
    taus = enh._frame_tdoas(np.arange(spectra.shape[1]))
    w = BeamformerWeights(np.broadcast_to(enh.channel_gains, taus.shape), taus)
    y = np.einsum("lnf,nlf->lf", w.complex_weights(enh.freqs), spectra) * g
    out = [enh._emit(enh._synth.push(y)), enh._emit(enh._synth.flush())]
    return np.concatenate(out)
