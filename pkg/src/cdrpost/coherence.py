"""Recursively averaged auto/cross PSDs and short-time coherence."""

from __future__ import annotations

import itertools

import numpy as np

from .spatial import diffuse_coherence

LAMBDA_DEFAULT = 0.68
EPS_COH = 1e-4
PSD_FLOOR_REL = 1e-12
WARMUP_FRAMES = 5


def all_pairs(num_channels: int) -> list[tuple[int, int]]:
    return list(itertools.combinations(range(num_channels), 2))


class PsdState:
    """Running PSD estimates for ``channels`` microphones over ``bins`` frequencies.

    ``auto_psd`` has shape ``(channels, bins)`` and ``cross_psd`` shape
    ``(pairs, bins)`` with pairs ordered as ``self.pairs``.  The state starts
    at zero and the forgetting factor applies from the first frame.
    """

    def __init__(self, channels: int, bins: int, lam: float = LAMBDA_DEFAULT,
                 pairs=None):
        if not 0.0 <= lam < 1.0:
            raise ValueError("forgetting factor must lie in [0, 1)")
        self.lam = float(lam)
        self.channels = channels
        self.bins = bins
        self.pairs = list(pairs) if pairs is not None else all_pairs(channels)
        for p, q in self.pairs:
            if not (0 <= p < q < channels):
                raise ValueError(f"invalid pair ({p}, {q})")
        self.auto_psd = np.zeros((channels, bins))
        self.cross_psd = np.zeros((len(self.pairs), bins), dtype=complex)
        self.frames_seen = 0
        self._pair_index = {pq: i for i, pq in enumerate(self.pairs)}
        self._p = np.array([p for p, _ in self.pairs], dtype=np.intp)
        self._q = np.array([q for _, q in self.pairs], dtype=np.intp)

    @property
    def in_warmup(self) -> bool:
        return self.frames_seen < WARMUP_FRAMES

    def update(self, frame) -> "PsdState":
        """Fold one frame ``(channels, bins)`` into the averages (in place)."""
        x = np.asarray(frame)
        if x.shape != (self.channels, self.bins):
            raise ValueError(
                f"frame shape {x.shape} != ({self.channels}, {self.bins})")
        lam = self.lam
        self.auto_psd *= lam
        self.auto_psd += (1.0 - lam) * (x.real ** 2 + x.imag ** 2)
        self.cross_psd *= lam
        self.cross_psd += (1.0 - lam) * x[self._p] * np.conj(x[self._q])
        self.frames_seen += 1
        return self

    def power_floor(self) -> float:
        return PSD_FLOOR_REL * float(np.mean(self.auto_psd))

    def low_energy(self) -> np.ndarray:
        """Per-pair mask ``(pairs, bins)`` of bins whose auto PSDs are under the floor."""
        floor = self.power_floor()
        weak = self.auto_psd <= floor
        return weak[self._p] | weak[self._q]

    def coherence_all(self, gn=None) -> tuple[np.ndarray, np.ndarray]:
        """Clamped coherence for every pair, shape ``(pairs, bins)``.

        Low-energy bins take the neutral value ``gn`` (diffuse model, 0 if
        omitted).  Returns ``(coherence, low_energy_mask)``.
        """
        if self.frames_seen == 0:
            raise RuntimeError("coherence requested before any update")
        low = self.low_energy()
        denom = np.sqrt(self.auto_psd[self._p] * self.auto_psd[self._q])
        gx = self.cross_psd / np.where(low, 1.0, denom)
        gx = clamp_coherence(gx)
        neutral = np.zeros(low.shape) if gn is None else np.broadcast_to(gn, low.shape)
        return np.where(low, neutral, gx), low

    def coherence(self, pair: tuple[int, int], f: int | slice | None = None,
                  gn=None):
        """Coherence of ``pair`` at bin index ``f`` (all bins if None).

        ``coherence((q, p))`` is the complex conjugate of ``coherence((p, q))``.
        """
        p, q = pair
        swap = p > q
        key = (q, p) if swap else (p, q)
        if key not in self._pair_index:
            raise KeyError(f"pair {pair} is not tracked")
        i = self._pair_index[key]
        gx, low = self.coherence_all(gn)
        value = gx[i] if f is None else gx[i, f]
        return np.conj(value) if swap else value


def clamp_coherence(gx, eps: float = EPS_COH):
    """Scale coherence values so that ``|gx| <= 1 - eps``."""
    gx = np.asarray(gx, dtype=complex)
    mag = np.abs(gx)
    limit = 1.0 - eps
    scale = np.where(mag > limit, limit / np.where(mag > 0, mag, 1.0), 1.0)
    return gx * scale


def pair_diffuse_coherence(distances, pairs, freqs, c: float, eps: float = EPS_COH):
    """Diffuse model coherence per pair ``(pairs, bins)``, capped at ``1 - eps``.

    The cap keeps the estimators away from the ``gn == 1`` singularity at DC
    and for very closely spaced microphones.
    """
    d = np.array([distances[p, q] for p, q in pairs])
    gn = diffuse_coherence(d[:, None], np.asarray(freqs)[None, :], c)
    return np.minimum(gn, 1.0 - eps)
