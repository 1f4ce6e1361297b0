"""WAV reading/writing and diagnostic grid export."""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np
from scipy.io import wavfile


def read_wav(path: str | os.PathLike) -> tuple[float, np.ndarray]:
    """Read PCM-16/32 or float WAV as float64 ``(channels, samples)``."""
    rate, data = wavfile.read(path)
    data = np.asarray(data)
    if data.dtype == np.int16:
        x = data / 32768.0
    elif data.dtype == np.int32:
        x = data / 2147483648.0
    elif data.dtype == np.uint8:
        x = (data.astype(float) - 128.0) / 128.0
    elif np.issubdtype(data.dtype, np.floating):
        x = data.astype(float)
    else:
        raise ValueError(f"unsupported WAV sample type {data.dtype}")
    x = x.T if x.ndim == 2 else x[None, :]
    return float(rate), np.ascontiguousarray(x)


def read_multichannel(paths) -> tuple[float, np.ndarray]:
    """One interleaved file or several mono files (channel order = path order)."""
    paths = list(paths)
    if len(paths) == 1:
        return read_wav(paths[0])
    rates, chans = [], []
    for p in paths:
        rate, x = read_wav(p)
        if x.shape[0] != 1:
            raise ValueError(f"{p}: expected a mono file when several inputs are given")
        rates.append(rate)
        chans.append(x[0])
    if len(set(rates)) != 1:
        raise ValueError("input files have different sample rates")
    if len({c.size for c in chans}) != 1:
        raise ValueError("input files have different lengths")
    return rates[0], np.stack(chans)


def write_wav(path: str | os.PathLike, rate: float, audio) -> None:
    """Write float32 WAV; ``audio`` is ``(samples,)`` or ``(channels, samples)``."""
    x = np.asarray(audio, dtype=np.float32)
    if x.ndim == 2:
        x = x.T
    wavfile.write(path, int(round(rate)), x)


def dump_grid(directory: str | os.PathLike, name: str, grid, freqs, frame_rate: float,
              frame_times=None, extra: dict | None = None) -> Path:
    """Write ``name.f32`` (row-major float32, frames x bins) and ``name.json``."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    g = np.ascontiguousarray(grid, dtype="<f4")
    (out / f"{name}.f32").write_bytes(g.tobytes(order="C"))
    header = {
        "quantity": name,
        "dtype": "float32",
        "byte_order": "little",
        "layout": "row-major (frames, bins)",
        "shape": list(g.shape),
        "frame_rate_hz": frame_rate,
        "freqs_hz": [float(f) for f in freqs],
    }
    if frame_times is not None and len(frame_times):
        header["first_frame_time_s"] = float(frame_times[0])
    if extra:
        header.update(extra)
    path = out / f"{name}.json"
    path.write_text(json.dumps(header, indent=1))
    return path


def load_grid(header_path: str | os.PathLike) -> tuple[np.ndarray, dict]:
    header_path = Path(header_path)
    header = json.loads(header_path.read_text())
    raw = (header_path.parent / f"{header['quantity']}.f32").read_bytes()
    grid = np.frombuffer(raw, dtype="<f4").reshape(header["shape"])
    return grid, header
