"""Per-pair CDR estimator accuracy on synthetic scenes with known components."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .cdr import CDR_MAX, CdrEstimatorKind, estimate_array
from .coherence import PsdState, WARMUP_FRAMES, pair_diffuse_coherence
from .filterbank import FilterbankConfig, analyze
from .scene import SyntheticScene

COLUMNS = ("estimator", "true_cdr_db", "tdoa_us", "lambda", "median_err_db", "iqr_db")
CDR_FLOOR = 1e-4
ACTIVE_DB = -40.0


@dataclass
class BenchRow:
    estimator: str
    true_cdr_db: float
    tdoa_us: float
    lam: float
    median_err_db: float
    iqr_db: float
    pairs: tuple = ()

    def as_csv(self) -> list:
        return [self.estimator, f"{self.true_cdr_db:.3f}", f"{self.tdoa_us:.2f}",
                f"{self.lam:g}", f"{self.median_err_db:.3f}", f"{self.iqr_db:.3f}"]


def recursive_average(power, lam):
    """Recursive average along axis 0 with zero initial state (power: ``(L, ...)``)."""
    from scipy.signal import lfilter

    return lfilter([1.0 - lam], [1.0, -lam], power, axis=0)


def pairwise_estimates(mixture_tf, pairs, gamma_n, dtau, freqs, kinds, lam):
    """Run the coherence tracker over all frames and every estimator.

    Returns a dict ``kind -> (L, P, F)`` CDR array.
    """
    n_ch, n_frames, n_bins = mixture_tf.shape
    state = PsdState(n_ch, n_bins, lam, pairs)
    gs = np.exp(2j * np.pi * np.asarray(dtau)[:, None] * freqs[None, :])
    out = {k: np.empty((n_frames, len(pairs), n_bins)) for k in kinds}
    for l in range(n_frames):
        state.update(mixture_tf[:, l, :])
        gx, _ = state.coherence_all(gamma_n)
        for k in kinds:
            out[k][l] = estimate_array(k, gx, gamma_n, gs)[0]
    return out


def true_pair_cdr(direct_tf, diffuse_tf, pairs, lam):
    """Ground-truth CDR per pair from recursively averaged component powers."""
    pd = recursive_average(np.transpose(np.abs(direct_tf) ** 2, (1, 0, 2)), lam)
    pn = recursive_average(np.transpose(np.abs(diffuse_tf) ** 2, (1, 0, 2)), lam)
    p = [a for a, _ in pairs]
    q = [b for _, b in pairs]
    num = 0.5 * (pd[:, p] + pd[:, q])
    den = 0.5 * (pn[:, p] + pn[:, q])
    with np.errstate(divide="ignore", invalid="ignore"):
        return num / den, num


def bench_scene(scene: SyntheticScene, lambdas=(0.68,), kinds=None,
                config: FilterbankConfig | None = None, pairs=None) -> list[BenchRow]:
    """Median and IQR of ``10 log10(est / true)`` over active bins.

    Pairs with the same TDOA difference (to 0.01 us) are pooled into one row.
    """
    kinds = list(kinds or CdrEstimatorKind)
    config = config or FilterbankConfig(sample_rate=scene.sample_rate)
    geo = scene.geometry
    n = geo.num_mics
    if n < 2:
        raise ValueError("bench needs at least two microphones")
    pairs = pairs or [(p, q) for p in range(n) for q in range(p + 1, n)]
    freqs = config.freqs()
    taus = scene.tdoas
    dtau = np.array([taus[p] - taus[q] for p, q in pairs])
    gamma_n = pair_diffuse_coherence(geo.distances, pairs, freqs, geo.speed_of_sound)
    xm = analyze(scene.mixture, config)
    xd = analyze(scene.direct, config)
    xn = analyze(scene.diffuse, config)
    true_db = float(10 * np.log10(np.sum(scene.direct ** 2) / np.sum(scene.diffuse ** 2)))
    rows = []
    for lam in lambdas:
        est = pairwise_estimates(xm, pairs, gamma_n, dtau, freqs, kinds, lam)
        truth, direct_pow = true_pair_cdr(xd, xn, pairs, lam)
        groups: dict[float, list[int]] = {}
        for i in range(len(pairs)):
            groups.setdefault(round(dtau[i] * 1e6, 2) + 0.0, []).append(i)
        for tdoa_us, members in groups.items():
            errs = {k: [] for k in kinds}
            for i in members:
                active = direct_pow[:, i] > direct_pow[:, i].max() * 10 ** (ACTIVE_DB / 10)
                active[:WARMUP_FRAMES] = False
                active[:, 0] = False  # DC carries no spatial information
                t_db = 10 * np.log10(np.clip(truth[:, i][active], CDR_FLOOR, CDR_MAX))
                for k in kinds:
                    e_db = 10 * np.log10(np.clip(est[k][:, i][active], CDR_FLOOR, CDR_MAX))
                    errs[k].append(e_db - t_db)
            for k in kinds:
                q25, q50, q75 = np.percentile(np.concatenate(errs[k]), [25, 50, 75])
                rows.append(BenchRow(k.value, true_db, tdoa_us, lam, float(q50),
                                     float(q75 - q25), tuple(pairs[i] for i in members)))
    return rows


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow(r.as_csv())
    return buf.getvalue()
