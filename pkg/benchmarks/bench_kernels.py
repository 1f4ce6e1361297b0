"""Compare the compiled and numpy postfilter kernels.

Times ``process_block`` on random spectra and full ``enhance`` on an oracle
scene, and checks that both backends agree.

    python benchmarks/bench_kernels.py --seconds 10 --repeat 3
"""

import argparse
import time

import numpy as np

from cdrpost import kernels
from cdrpost.cdr import CdrEstimatorKind
from cdrpost.coherence import all_pairs, pair_diffuse_coherence
from cdrpost.filterbank import FilterbankConfig
from cdrpost.pipeline import EnhancementConfig, enhance
from cdrpost.postfilter import PostfilterConfig
from cdrpost.scene import speech_shaped_noise, synthesize_scene
from cdrpost.spatial import Doa, chime_front5, tdoas


def kernel_inputs(frames, geo, rng):
    fb = FilterbankConfig()
    n, f = geo.num_mics, fb.num_bins
    freqs = fb.freqs()
    pairs = all_pairs(n)
    X = rng.standard_normal((frames, n, f)) + 1j * rng.standard_normal((frames, n, f))
    taus = tdoas(geo, Doa(0.3, 0.5))
    dtau = np.tile([taus[p] - taus[q] for p, q in pairs], (frames, 1))
    return dict(
        X=X, dtau=np.ascontiguousarray(dtau),
        a_gamma=np.full((frames, f), 0.3), freqs=freqs,
        gamma_n=np.ascontiguousarray(pair_diffuse_coherence(geo.distances, pairs, freqs, 343.0)),
        pair_p=np.array([p for p, _ in pairs], dtype=np.intp),
        pair_q=np.array([q for _, q in pairs], dtype=np.intp))


def time_kernel(name, inp, kind, repeat):
    fn = kernels.get_kernel(name)
    frames, n, f = inp["X"].shape
    best = np.inf
    for _ in range(repeat):
        auto = np.zeros((n, f))
        cross = np.zeros((inp["pair_p"].size, f), complex)
        outs = [np.empty((frames, f)) for _ in range(4)] + [np.empty((frames, f), np.uint8)]
        t0 = time.perf_counter()
        fn(inp["X"], inp["dtau"], inp["a_gamma"], inp["freqs"], inp["gamma_n"],
           inp["pair_p"], inp["pair_q"], auto, cross, 0, 0.68, kind.code, 1.2, 0.1, 5, *outs)
        best = min(best, time.perf_counter() - t0)
    return best, outs


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seconds", type=float, default=10.0, help="audio duration")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    names = sorted(kernels.BACKENDS)
    if "cython" not in names:
        print("compiled extension not built; only the python backend is available")
    geo = chime_front5()
    rng = np.random.default_rng(0)
    frames = int(args.seconds * 125)
    inp = kernel_inputs(frames, geo, rng)

    print(f"process_block: {frames} frames x {geo.num_mics} mics x 257 bins")
    print(f"{'estimator':<10} " + " ".join(f"{n:>10}" for n in names) + "   speedup  max|diff|")
    for kind in CdrEstimatorKind:
        res = {n: time_kernel(n, inp, kind, args.repeat) for n in names}
        speed = res["python"][0] / res["cython"][0] if "cython" in res else 1.0
        diff = max(float(np.max(np.abs(a - b)))
                   for a, b in zip(res["python"][1][:4], res[names[0]][1][:4]))
        print(f"{kind.value:<10} " + " ".join(f"{res[n][0] * 1e3:8.1f}ms" for n in names)
              + f"   {speed:6.1f}x  {diff:.1e}")

    src = speech_shaped_noise(int(args.seconds * 16000), 16000.0, rng)
    scene = synthesize_scene(geo, Doa(0.0, 0.0), src, 0.0, seed=1)
    print(f"\nenhance: {args.seconds:g} s of 5-channel audio")
    outs = {}
    for n in names:
        cfg = EnhancementConfig(postfilter=PostfilterConfig(), doa=Doa(0.0, 0.0), backend=n)
        best = np.inf
        for _ in range(args.repeat):
            t0 = time.perf_counter()
            outs[n], _ = enhance(scene.mixture, geo, cfg)
            best = min(best, time.perf_counter() - t0)
        print(f"  {n:<8} {best:.3f} s  ({args.seconds / best:.0f}x real time)")
    if len(outs) == 2:
        print(f"  max |output difference| {np.max(np.abs(outs['python'] - outs['cython'])):.1e}")


if __name__ == "__main__":
    main()
