"""Array geometry, plane-wave TDOAs and closed-form coherence models.

Phase convention: a plane wave from the target direction reaches microphone
``n`` as ``X_n(l, f) = S(l, f) * exp(+j 2 pi f tau_n)``, so the direct-path
coherence between microphones ``p`` and ``q`` is ``exp(+j 2 pi f (tau_p - tau_q))``.
The scene synthesizer and the beamformer both follow this convention.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

SPEED_OF_SOUND = 343.0


@dataclass(frozen=True)
class Doa:
    """Direction of arrival in radians.

    ``azimuth`` is measured from the positive x-axis in the x-y plane and
    ``elevation`` from the positive z-axis (polar angle), so ``elevation=0``
    points along +z and ``elevation=pi/2`` lies in the horizontal plane.
    """

    azimuth: float
    elevation: float = math.pi / 2

    def __post_init__(self):
        if not (math.isfinite(self.azimuth) and math.isfinite(self.elevation)):
            raise ValueError("DOA angles must be finite")

    @classmethod
    def from_degrees(cls, azimuth: float, elevation: float = 90.0) -> "Doa":
        return cls(math.radians(azimuth), math.radians(elevation))

    def propagation_vector(self) -> np.ndarray:
        """Unit vector pointing from the source direction towards the origin."""
        st = math.sin(self.elevation)
        return -np.array([st * math.cos(self.azimuth),
                          st * math.sin(self.azimuth),
                          math.cos(self.elevation)])


@dataclass(frozen=True, eq=False)
class ArrayGeometry:
    """Microphone positions (meters, shape ``(N, 3)``) and speed of sound."""

    positions: np.ndarray
    speed_of_sound: float = SPEED_OF_SOUND
    _distances: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if pos.ndim != 2 or pos.shape[1] != 3 or pos.shape[0] < 1:
            raise ValueError(f"positions must have shape (N, 3), got {pos.shape}")
        if not np.all(np.isfinite(pos)):
            raise ValueError("microphone positions must be finite")
        if not (self.speed_of_sound > 0 and math.isfinite(self.speed_of_sound)):
            raise ValueError("speed_of_sound must be positive")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        d = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
        d.setflags(write=False)
        object.__setattr__(self, "_distances", d)

    def __eq__(self, other):
        if not isinstance(other, ArrayGeometry):
            return NotImplemented
        return (self.speed_of_sound == other.speed_of_sound
                and np.array_equal(self.positions, other.positions))

    def __hash__(self):
        return hash((self.positions.tobytes(), self.speed_of_sound))

    @property
    def num_mics(self) -> int:
        return self.positions.shape[0]

    @property
    def distances(self) -> np.ndarray:
        """Pairwise distance matrix ``d_pq``."""
        return self._distances

    def distance(self, p: int, q: int) -> float:
        return float(self._distances[p, q])

    @property
    def aperture(self) -> float:
        """Largest inter-microphone distance."""
        return float(self._distances.max())

    def has_duplicate_positions(self) -> bool:
        n = self.num_mics
        return bool(np.any(self._distances[~np.eye(n, dtype=bool)] == 0.0))

    def subset(self, channels) -> "ArrayGeometry":
        return ArrayGeometry(self.positions[list(channels)], self.speed_of_sound)

    def to_dict(self) -> dict:
        return {"speed_of_sound": self.speed_of_sound,
                "positions_m": self.positions.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "ArrayGeometry":
        try:
            positions = data["positions_m"]
        except (KeyError, TypeError):
            raise ValueError("geometry JSON needs a 'positions_m' list") from None
        c = data.get("speed_of_sound", SPEED_OF_SOUND)
        return cls(np.asarray(positions, dtype=float), float(c))


def load_geometry(path: str | os.PathLike) -> ArrayGeometry:
    """Read a geometry JSON file ``{"speed_of_sound": ..., "positions_m": [...]}``."""
    with open(path) as fh:
        return ArrayGeometry.from_dict(json.load(fh))


def save_geometry(geometry: ArrayGeometry, path: str | os.PathLike) -> None:
    with open(path, "w") as fh:
        json.dump(geometry.to_dict(), fh, indent=2)


def builtin_geometry_path(name: str = "chime_front5") -> str:
    return str(resources.files("cdrpost") / "data" / f"{name}.json")


def chime_front5() -> ArrayGeometry:
    """Five forward-facing microphones of the CHiME-3 tablet array."""
    return load_geometry(builtin_geometry_path("chime_front5"))


def tdoas(geometry: ArrayGeometry, doa: Doa) -> np.ndarray:
    """TDOA of every microphone relative to the coordinate origin, in seconds."""
    return geometry.positions @ doa.propagation_vector() / geometry.speed_of_sound


def tdoa(geometry: ArrayGeometry, doa: Doa, n: int) -> float:
    if not 0 <= n < geometry.num_mics:
        raise IndexError(f"channel {n} out of range for {geometry.num_mics} mics")
    return float(tdoas(geometry, doa)[n])


def steering_vector(taus: np.ndarray, freqs: np.ndarray) -> np.ndarray:
    """Plane-wave steering vectors, shape ``(N, F)``."""
    return np.exp(2j * np.pi * np.outer(taus, freqs))


def _check_pair(geometry: ArrayGeometry, p: int, q: int) -> None:
    n = geometry.num_mics
    if not (0 <= p < n and 0 <= q < n):
        raise IndexError(f"pair ({p}, {q}) out of range for {n} mics")
    if p == q:
        raise ValueError("direct coherence needs two distinct microphones")


def direct_coherence(geometry: ArrayGeometry, doa: Doa, pair: tuple[int, int], f):
    """Coherence of the direct-path component, ``exp(j 2 pi f (tau_p - tau_q))``."""
    p, q = pair
    _check_pair(geometry, p, q)
    t = tdoas(geometry, doa)
    return np.exp(2j * np.pi * np.asarray(f, dtype=float) * (t[p] - t[q]))


def diffuse_coherence(d, f, c: float = SPEED_OF_SOUND):
    """Spherically isotropic noise coherence ``sin(2 pi f d / c) / (2 pi f d / c)``.

    Evaluates to exactly 1 where the argument is zero.
    """
    # np.sinc(x) = sin(pi x)/(pi x) and returns 1 at x == 0
    return np.sinc(2.0 * np.asarray(f, dtype=float) * np.asarray(d, dtype=float) / c)


def diffuse_coherence_matrix(geometry: ArrayGeometry, f) -> np.ndarray:
    """Diffuse-field coherence matrix; ``(N, N)`` for scalar f, else ``(F, N, N)``."""
    f = np.asarray(f, dtype=float)
    j = diffuse_coherence(geometry.distances, f[..., None, None], geometry.speed_of_sound)
    return j
