"""DFT-based uniform analysis/synthesis filterbank.

The default configuration folds a 1024-sample windowed frame into 512 samples
before a 512-point FFT (polyphase/time-aliased analysis) and advances by 128
samples.  The synthesis window is designed per polyphase component by minimum
norm least squares so that the overlap-add of the synthesis stage cancels the
time aliasing introduced by the folding and reconstructs the input exactly on
the fully overlapped interior.

Time-frequency tensors are plain complex arrays of shape
``(channels, frames, bins)`` with ``bins = fft_size // 2 + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


@dataclass(frozen=True)
class FilterbankConfig:
    window_length: int = 1024
    fft_size: int = 512
    hop: int = 128
    sample_rate: float = 16000.0
    window_shape: str = "hann"

    def __post_init__(self):
        w, m, r = self.window_length, self.fft_size, self.hop
        if not (isinstance(w, (int, np.integer)) and isinstance(m, (int, np.integer))
                and isinstance(r, (int, np.integer))):
            raise TypeError("window_length, fft_size and hop must be integers")
        if not w >= m >= r > 0:
            raise ValueError("need window_length >= fft_size >= hop > 0")
        if w % m:
            raise ValueError("window_length must be an integer multiple of fft_size")
        if w % r:
            raise ValueError("window_length must be an integer multiple of hop")
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")
        if self.window_shape not in ("hann", "sqrt_hann"):
            raise ValueError(f"unknown window shape {self.window_shape!r}")

    @classmethod
    def stft(cls, sample_rate: float = 16000.0) -> "FilterbankConfig":
        """Plain STFT fallback: 1024-point window and FFT, hop 128."""
        return cls(1024, 1024, 128, sample_rate)

    @property
    def num_bins(self) -> int:
        return self.fft_size // 2 + 1

    @property
    def folds(self) -> int:
        return self.window_length // self.fft_size

    @property
    def frame_rate(self) -> float:
        return self.sample_rate / self.hop

    def freqs(self) -> np.ndarray:
        return np.arange(self.num_bins) * (self.sample_rate / self.fft_size)

    def num_frames(self, num_samples: int) -> int:
        if num_samples < self.window_length:
            return 0
        return (num_samples - self.window_length) // self.hop + 1

    def interior(self, num_frames: int) -> slice:
        """Sample range reconstructed without edge effects."""
        return slice(self.window_length - self.hop, num_frames * self.hop)

    def analysis_window(self) -> np.ndarray:
        return _windows(self)[0]

    def synthesis_window(self) -> np.ndarray:
        return _windows(self)[1]


@lru_cache(maxsize=16)
def _windows(cfg: FilterbankConfig) -> tuple[np.ndarray, np.ndarray]:
    w, m, r = cfg.window_length, cfg.fft_size, cfg.hop
    h = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(w) / w)
    if cfg.window_shape == "sqrt_hann":
        h = np.sqrt(h)
    g = np.zeros(w)
    shifts = range(-(cfg.folds - 1), cfg.folds)
    for phase in range(r):
        idx = np.arange(phase, w, r)
        rows = []
        for s in shifts:
            j = idx + s * m
            rows.append(np.where((j >= 0) & (j < w), h[np.clip(j, 0, w - 1)], 0.0))
        a = np.array(rows)
        b = np.array([1.0 if s == 0 else 0.0 for s in shifts])
        g[idx] = np.linalg.lstsq(a, b, rcond=None)[0]
    h.setflags(write=False)
    g.setflags(write=False)
    return h, g


def _as_channels(audio) -> np.ndarray:
    x = np.asarray(audio, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2:
        raise ValueError("audio must be (channels, samples)")
    return x


def _frames_to_spectra(frames: np.ndarray, cfg: FilterbankConfig) -> np.ndarray:
    # frames: (..., L, W)
    h = cfg.analysis_window()
    seg = frames * h
    if cfg.folds > 1:
        seg = seg.reshape(*seg.shape[:-1], cfg.folds, cfg.fft_size).sum(axis=-2)
    return np.fft.rfft(seg, axis=-1)


def analyze(audio, config: FilterbankConfig = FilterbankConfig()) -> np.ndarray:
    """Multichannel analysis.

    Args:
        audio: array ``(channels, samples)``, a single 1-D channel, or a list
            of equal-length channels.
        config: filterbank parameters.

    Returns:
        Complex array ``(channels, frames, bins)``.
    """
    if isinstance(audio, (list, tuple)):
        lengths = {len(np.asarray(a)) for a in audio}
        if len(lengths) > 1:
            raise ValueError(f"channel length mismatch: {sorted(lengths)}")
    x = _as_channels(audio)
    if x.size == 0:
        raise ValueError("empty input")
    if x.shape[1] < config.window_length:
        raise ValueError(
            f"input of {x.shape[1]} samples is shorter than one window "
            f"({config.window_length})")
    frames = sliding_window_view(x, config.window_length, axis=1)[:, ::config.hop]
    return _frames_to_spectra(frames, config)


def _frames_to_time(spec: np.ndarray, cfg: FilterbankConfig) -> np.ndarray:
    # spec: (L, F) -> windowed output segments (L, W)
    t = np.fft.irfft(spec, n=cfg.fft_size, axis=-1)
    if cfg.folds > 1:
        t = np.tile(t, cfg.folds)
    return t * cfg.synthesis_window()


def _check_tf(tf: np.ndarray, cfg: FilterbankConfig) -> np.ndarray:
    tf = np.asarray(tf)
    if tf.ndim == 3:
        if tf.shape[0] != 1:
            raise ValueError("synthesize expects a single-channel tensor")
        tf = tf[0]
    if tf.ndim != 2 or tf.shape[-1] != cfg.num_bins:
        raise ValueError(
            f"tensor shape {tf.shape} does not match config "
            f"({cfg.num_bins} bins)")
    return tf


def synthesize(tf, config: FilterbankConfig = FilterbankConfig()) -> np.ndarray:
    """Overlap-add synthesis of a single-channel tensor ``(frames, bins)``.

    The output has ``(frames - 1) * hop + window_length`` samples; only
    ``config.interior(frames)`` is free of edge effects.
    """
    tf = _check_tf(tf, config)
    n_frames = tf.shape[0]
    if n_frames == 0:
        return np.zeros(0)
    k, r = config.window_length // config.hop, config.hop
    seg = _frames_to_time(tf, config).reshape(n_frames, k, r)
    blocks = np.zeros((n_frames + k - 1, r))
    for j in range(k):
        blocks[j:j + n_frames] += seg[:, j, :]
    return blocks.reshape(-1)


class StreamingAnalyzer:
    """Incremental analysis; frames match :func:`analyze` on the concatenated input."""

    def __init__(self, config: FilterbankConfig, channels: int):
        self.config = config
        self.channels = channels
        self._buf = np.zeros((channels, 0))

    def push(self, audio) -> np.ndarray:
        x = _as_channels(audio)
        if x.shape[0] != self.channels:
            raise ValueError(f"expected {self.channels} channels, got {x.shape[0]}")
        self._buf = np.concatenate([self._buf, x], axis=1)
        cfg = self.config
        n = cfg.num_frames(self._buf.shape[1])
        if n == 0:
            return np.zeros((self.channels, 0, cfg.num_bins), dtype=complex)
        used = self._buf[:, :(n - 1) * cfg.hop + cfg.window_length]
        frames = sliding_window_view(used, cfg.window_length, axis=1)[:, ::cfg.hop]
        out = _frames_to_spectra(frames, cfg)
        self._buf = self._buf[:, n * cfg.hop:]
        return out


class StreamingSynthesizer:
    """Incremental overlap-add; emits samples once no later frame overlaps them."""

    def __init__(self, config: FilterbankConfig):
        self.config = config
        self._acc = np.zeros(config.window_length)

    def push(self, tf) -> np.ndarray:
        tf = _check_tf(tf, self.config)
        r = self.config.hop
        out = []
        for seg in _frames_to_time(tf, self.config):
            self._acc += seg
            out.append(self._acc[:r].copy())
            self._acc = np.concatenate([self._acc[r:], np.zeros(r)])
        return np.concatenate(out) if out else np.zeros(0)

    def flush(self) -> np.ndarray:
        tail = self._acc[:self.config.window_length - self.config.hop].copy()
        self._acc = np.zeros(self.config.window_length)
        return tail
