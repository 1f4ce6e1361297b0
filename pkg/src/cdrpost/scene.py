"""Synthetic sound fields with known direct and diffuse components.

The diffuse field is drawn in a single long DFT: independent complex
Gaussian spectra are mixed per frequency bin by the symmetric square root of
the spherically isotropic coherence matrix, so the cross-spectral matrix of
the result equals the sinc model at every bin.  The direct component is the
source with a per-channel phase ramp ``exp(+j 2 pi f tau_n)``, which is an
exact fractional delay for a bandlimited (circular) signal.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .spatial import ArrayGeometry, Doa, diffuse_coherence_matrix, tdoas

log = logging.getLogger(__name__)


def speech_spectrum(f) -> np.ndarray:
    """Long-term speech-like amplitude shape: flat to 500 Hz, then -6 dB/octave,
    with a gentle roll-off below 100 Hz."""
    f = np.abs(np.asarray(f, dtype=float))
    high = np.where(f > 500.0, 500.0 / np.maximum(f, 1e-9), 1.0)
    low = f / np.sqrt(f * f + 100.0 ** 2)
    return high * low


def white_spectrum(f) -> np.ndarray:
    return np.ones_like(np.asarray(f, dtype=float))


def _shape_values(spectral_shape, freqs):
    if spectral_shape is None:
        return np.ones_like(freqs)
    if callable(spectral_shape):
        return np.asarray(spectral_shape(freqs), dtype=float)
    values = np.asarray(spectral_shape, dtype=float)
    if values.shape != freqs.shape:
        raise ValueError(f"spectral shape needs {freqs.size} values, got {values.shape}")
    return values


def speech_shaped_noise(num_samples: int, fs: float = 16000.0, rng=None) -> np.ndarray:
    """Stationary Gaussian noise with :func:`speech_spectrum` coloring."""
    rng = np.random.default_rng(rng)
    freqs = np.fft.rfftfreq(num_samples, 1.0 / fs)
    spec = (rng.standard_normal(freqs.size) + 1j * rng.standard_normal(freqs.size))
    x = np.fft.irfft(spec * speech_spectrum(freqs), num_samples)
    return x / np.std(x)


def speech_like_source(num_samples: int, fs: float = 16000.0, rng=None) -> np.ndarray:
    """Nonstationary test signal with voiced/unvoiced syllables and pauses.

    Syllables of 120-300 ms alternate with pauses; voiced syllables are
    harmonic with a drifting pitch, unvoiced ones are speech-shaped noise.
    The result is sparse in time and frequency, unlike stationary noise.
    """
    rng = np.random.default_rng(rng)
    out = np.zeros(num_samples)
    t = 0
    while t < num_samples:
        t += int(rng.uniform(0.05, 0.25) * fs)
        length = int(rng.uniform(0.12, 0.30) * fs)
        end = min(t + length, num_samples)
        n = end - t
        if n <= 0:
            break
        env = np.sin(np.pi * (np.arange(n) + 0.5) / n) ** 2
        if rng.random() < 0.75:
            f0 = rng.uniform(90.0, 220.0) * (1 + 0.15 * np.linspace(-1, 1, n) * rng.uniform(-1, 1))
            phase = 2 * np.pi * np.cumsum(f0) / fs
            seg = np.zeros(n)
            for k in range(1, int(fs / 2 / f0.max())):
                seg += speech_spectrum(k * f0.mean()) * np.sin(k * phase + rng.uniform(0, 2 * np.pi))
        else:
            seg = speech_shaped_noise(max(n, 2), fs, rng)[:n]
        out[t:end] += env * seg / max(np.std(seg), 1e-12) * rng.uniform(0.5, 1.5)
        t = end
    return out / max(np.std(out), 1e-12)


def _mixing_matrices(geometry: ArrayGeometry, freqs: np.ndarray) -> np.ndarray:
    j = diffuse_coherence_matrix(geometry, freqs)
    vals, vecs = np.linalg.eigh(j)
    if np.any(vals < -1e-9):
        log.debug("clipping negative eigenvalues of the diffuse coherence matrix")
    root = np.sqrt(np.clip(vals, 0.0, None))
    return (vecs * root[:, None, :]) @ np.swapaxes(vecs, -1, -2)


def synthesize_diffuse(geometry: ArrayGeometry, num_samples: int, spectral_shape=None,
                       fs: float = 16000.0, rng=None) -> np.ndarray:
    """Multichannel spherically diffuse noise, shape ``(N, num_samples)``.

    ``spectral_shape`` is a callable of frequency (Hz) or an array of
    ``num_samples // 2 + 1`` amplitudes; ``None`` means white.  Each channel
    has unit average power.
    """
    if num_samples < 2:
        raise ValueError("need at least two samples")
    rng = np.random.default_rng(rng)
    n_ch = geometry.num_mics
    if geometry.has_duplicate_positions():
        log.warning("duplicate microphone positions: those channels are fully coherent")
    freqs = np.fft.rfftfreq(num_samples, 1.0 / fs)
    z = (rng.standard_normal((n_ch, freqs.size))
         + 1j * rng.standard_normal((n_ch, freqs.size))) / np.sqrt(2.0)
    z[:, 0] = z[:, 0].real * np.sqrt(2.0)
    if num_samples % 2 == 0:
        z[:, -1] = z[:, -1].real * np.sqrt(2.0)
    z *= _shape_values(spectral_shape, freqs)
    if n_ch > 1:
        mix = _mixing_matrices(geometry, freqs)
        z = np.einsum("fnm,mf->nf", mix, z)
    x = np.fft.irfft(z, num_samples, axis=1)
    power = np.mean(x * x)
    return x / np.sqrt(power) if power > 0 else x


def delay_channels(source, taus, fs: float = 16000.0) -> np.ndarray:
    """Steer ``source`` with the phase ramp ``exp(+j 2 pi f tau_n)`` per channel."""
    s = np.asarray(source, dtype=float)
    n = s.size
    freqs = np.fft.rfftfreq(n, 1.0 / fs)
    spec = np.fft.rfft(s)
    if n % 2 == 0:
        spec[-1] = 0.0  # a fractional delay at Nyquist is not real-valued
    ramps = np.exp(2j * np.pi * np.outer(np.asarray(taus, dtype=float), freqs))
    return np.fft.irfft(spec * ramps, n, axis=1)


@dataclass
class SyntheticScene:
    mixture: np.ndarray
    direct: np.ndarray
    diffuse: np.ndarray
    doa: Doa
    geometry: ArrayGeometry
    sample_rate: float
    ddr_db: float
    seed: int | None = None
    band_freqs: np.ndarray = field(default=None, repr=False)
    band_cdr: np.ndarray = field(default=None, repr=False)

    @property
    def tdoas(self) -> np.ndarray:
        return tdoas(self.geometry, self.doa)

    def measured_ddr_db(self) -> float:
        return 10 * np.log10(np.sum(self.direct ** 2) / np.sum(self.diffuse ** 2))

    def sidecar(self) -> dict:
        return {
            "sample_rate": self.sample_rate,
            "doa_az_deg": float(np.degrees(self.doa.azimuth)),
            "doa_el_deg": float(np.degrees(self.doa.elevation)),
            "ddr_db": self.ddr_db,
            "seed": self.seed,
            "num_samples": int(self.mixture.shape[1]),
            "geometry": self.geometry.to_dict(),
            "files": {"mixture": "mixture.wav", "direct": "direct.wav",
                      "diffuse": "diffuse.wav"},
        }


def band_cdr_profile(direct, diffuse, fs: float, nperseg: int = 512):
    """Per-band true CDR from long-term channel-averaged PSDs."""
    from scipy.signal import welch

    f, pd = welch(direct, fs, nperseg=nperseg, axis=-1)
    _, pn = welch(diffuse, fs, nperseg=nperseg, axis=-1)
    pd, pn = pd.mean(axis=0), pn.mean(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        cdr = np.where(pn > 0, pd / pn, np.inf)
    return f, cdr


def synthesize_scene(geometry: ArrayGeometry, doa: Doa, source, target_ddr_db: float,
                     fs: float = 16000.0, seed: int | None = None,
                     diffuse_shape=speech_spectrum) -> SyntheticScene:
    """Plane-wave source plus diffuse noise at a given broadband DDR.

    The diffuse component is scaled so that the energy ratio of the returned
    direct and diffuse signals (summed over channels) equals
    ``target_ddr_db``.  ``mixture`` is exactly ``direct + diffuse``.
    """
    s = np.asarray(source, dtype=float)
    if s.ndim != 1 or s.size < 2:
        raise ValueError("source must be a 1-D signal")
    if not np.all(np.isfinite(s)):
        raise ValueError("source contains non-finite samples")
    if not np.isfinite(target_ddr_db):
        raise ValueError("target DDR must be finite")
    if np.sum(s * s) == 0.0:
        raise ValueError("source is silent")
    rng = np.random.default_rng(seed)
    direct = delay_channels(s, tdoas(geometry, doa), fs)
    diffuse = synthesize_diffuse(geometry, s.size, diffuse_shape, fs, rng)
    scale = np.sqrt(np.sum(direct ** 2) / (np.sum(diffuse ** 2) * 10 ** (target_ddr_db / 10)))
    diffuse = diffuse * scale
    mixture = direct + diffuse
    bf, bcdr = band_cdr_profile(direct, diffuse, fs)
    return SyntheticScene(mixture, direct, diffuse, doa, geometry, fs, float(target_ddr_db),
                          seed, bf, bcdr)


def write_scene(scene: SyntheticScene, directory: str | os.PathLike) -> Path:
    """Write ``mixture/direct/diffuse.wav`` (float32) and ``scene.json``."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    rate = int(round(scene.sample_rate))
    for name in ("mixture", "direct", "diffuse"):
        data = getattr(scene, name).T.astype(np.float32)
        wavfile.write(out / f"{name}.wav", rate, data)
    side = out / "scene.json"
    side.write_text(json.dumps(scene.sidecar(), indent=2))
    return side


def read_scene(sidecar: str | os.PathLike) -> SyntheticScene:
    path = Path(sidecar)
    meta = json.loads(path.read_text())
    files = meta.get("files", {"mixture": "mixture.wav", "direct": "direct.wav",
                               "diffuse": "diffuse.wav"})
    parts = {}
    for name in ("mixture", "direct", "diffuse"):
        rate, data = wavfile.read(path.parent / files[name])
        parts[name] = np.atleast_2d(np.asarray(data, dtype=float).T)
    geometry = ArrayGeometry.from_dict(meta["geometry"])
    doa = Doa.from_degrees(meta["doa_az_deg"], meta["doa_el_deg"])
    return SyntheticScene(parts["mixture"], parts["direct"], parts["diffuse"], doa, geometry,
                          float(meta["sample_rate"]), float(meta["ddr_db"]), meta.get("seed"))
