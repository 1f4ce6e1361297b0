"""Command-line interface: ``enhance``, ``synth`` and ``bench``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import audio_io
from .bench import bench_scene, rows_to_csv
from .cdr import CdrEstimatorKind
from .coherence import LAMBDA_DEFAULT
from .filterbank import FilterbankConfig
from .pipeline import EnhancementConfig, enhance
from .postfilter import G_MIN_DEFAULT, MU_OPT, PostfilterConfig
from .scene import read_scene, speech_like_source, synthesize_scene, write_scene
from .spatial import Doa, builtin_geometry_path, load_geometry

log = logging.getLogger("cdrpost")

EXIT_USAGE = 2


class CliError(Exception):
    pass


def _load_geometry(path):
    p = Path(path)
    if not p.is_file():
        raise CliError(f"geometry file not found: {p}")
    try:
        return load_geometry(p)
    except (ValueError, json.JSONDecodeError) as exc:
        raise CliError(f"invalid geometry file {p}: {exc}") from None


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--geometry", default=builtin_geometry_path(),
                   help="geometry JSON (default: bundled CHiME-3 front-5 array)")
    p.add_argument("--doa-az", type=float, default=None,
                   help="target azimuth in degrees from +x (default 0)")
    p.add_argument("--doa-el", type=float, default=None,
                   help="target polar angle in degrees from +z (default 0, broadside "
                        "to an array in the x-y plane)")


def _doa_from_args(args) -> Doa:
    az = 0.0 if args.doa_az is None else args.doa_az
    el = 0.0 if args.doa_el is None else args.doa_el
    return Doa.from_degrees(az, el)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cdrpost",
        description="Delay-and-sum beamformer with CDR-based Wiener postfilter.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    e = sub.add_parser("enhance", help="enhance a multichannel recording")
    e.add_argument("paths", nargs="+", metavar="PATH",
                   help="input WAV (multichannel) or several mono WAVs, then the output WAV")
    e.add_argument("--estimator", default="doadep",
                   choices=[k.value for k in CdrEstimatorKind])
    e.add_argument("--mu", type=float, default=None,
                   help="overestimation factor (default: per-estimator optimum "
                        + ", ".join(f"{k.value}={v}" for k, v in MU_OPT.items()) + ")")
    e.add_argument("--gmin", type=float, default=G_MIN_DEFAULT, help="gain floor (0.1)")
    e.add_argument("--lambda", dest="lam", type=float, default=LAMBDA_DEFAULT,
                   help="PSD forgetting factor (0.68)")
    _add_common(e)
    e.add_argument("--estimate-doa", action="store_true",
                   help="estimate TDOAs with GCC-PHAT instead of a fixed DOA")
    e.add_argument("--bypass-postfilter", action="store_true")
    e.add_argument("--screen-channels", action="store_true",
                   help="drop failing channels before beamforming")
    e.add_argument("--weighting", choices=["uniform", "xcorr"], default="uniform")
    e.add_argument("--stft", action="store_true",
                   help="plain 1024-point STFT instead of the polyphase filterbank")
    e.add_argument("--dump-diagnostics", metavar="DIR", default=None)
    e.add_argument("--seed", type=int, default=None, help="unused; accepted for symmetry")

    s = sub.add_parser("synth", help="generate a synthetic scene")
    s.add_argument("--out", default="scene", help="output directory")
    s.add_argument("--ddr-db", type=float, default=0.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--duration", type=float, default=10.0, help="seconds")
    s.add_argument("--sample-rate", type=float, default=16000.0)
    s.add_argument("--source", choices=["speech-like", "noise"], default="speech-like")
    _add_common(s)

    b = sub.add_parser("bench", help="score CDR estimators on synthetic scenes")
    b.add_argument("scenes", nargs="+", help="scene directories or sidecar JSON files")
    b.add_argument("--lambda", dest="lams", type=float, action="append", default=None,
                   help="forgetting factor (repeatable; default 0.68)")
    b.add_argument("--estimator", action="append", default=None,
                   choices=[k.value for k in CdrEstimatorKind])
    b.add_argument("--output", default="-", help="CSV path ('-' for stdout)")
    return parser


def cmd_enhance(args) -> int:
    if len(args.paths) < 2:
        raise CliError("enhance needs at least one input and one output path")
    inputs, output = args.paths[:-1], args.paths[-1]
    for p in inputs:
        if not Path(p).is_file():
            raise CliError(f"input file not found: {p}")
    geometry = _load_geometry(args.geometry)
    try:
        rate, audio = audio_io.read_multichannel(inputs)
    except (ValueError, OSError) as exc:
        raise CliError(f"cannot read input: {exc}") from None
    if audio.shape[0] != geometry.num_mics:
        raise CliError(f"input has {audio.shape[0]} channels but geometry "
                       f"{args.geometry} lists {geometry.num_mics} microphones")
    if args.estimate_doa and (args.doa_az is not None or args.doa_el is not None):
        raise CliError("--estimate-doa cannot be combined with --doa-az/--doa-el")
    fb = FilterbankConfig.stft(rate) if args.stft else FilterbankConfig(sample_rate=rate)
    if audio.shape[1] == 0:
        raise CliError("input is empty")
    try:
        pf = PostfilterConfig(args.estimator, args.mu, args.gmin)
        cfg = EnhancementConfig(
            filterbank=fb, postfilter=pf, lam=args.lam,
            doa=None if args.estimate_doa else _doa_from_args(args),
            bypass_postfilter=args.bypass_postfilter,
            screen_channels=args.screen_channels, channel_weighting=args.weighting)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    out, diag = enhance(audio, geometry, cfg)
    audio_io.write_wav(output, rate, out)
    log.info("wrote %s (%d samples, %g Hz)", output, out.size, rate)
    if args.dump_diagnostics:
        _dump(diag, args.dump_diagnostics, cfg)
    return 0


def _dump(diag, directory, cfg) -> None:
    extra = {"estimator": cfg.postfilter.estimator.value, "mu": cfg.postfilter.mu,
             "g_min": cfg.postfilter.g_min, "lambda": cfg.lam}
    for name, grid in (("mean_diffuseness", diag.mean_diffuseness),
                       ("cdr_in", diag.cdr_in), ("cdr_bf", diag.cdr_bf),
                       ("gain", diag.gain)):
        audio_io.dump_grid(directory, name, grid, diag.freqs, diag.frame_rate,
                           diag.frame_times, extra)
    track = {"frame_times_s": diag.frame_times.tolist(),
             "frame_tdoas_s": diag.tdoas.tolist(),
             "active_channels": diag.channels.tolist(),
             "channel_gains": diag.channel_gains.tolist()}
    if diag.tdoa_track is not None:
        track["segments"] = diag.tdoa_track.to_dict()
    (Path(directory) / "tdoa_track.json").write_text(json.dumps(track))


def cmd_synth(args) -> int:
    if not args.duration > 0:
        raise CliError("--duration must be positive")
    if not np.isfinite(args.ddr_db):
        raise CliError("--ddr-db must be finite")
    if args.seed < 0:
        raise CliError("--seed must be nonnegative")
    geometry = _load_geometry(args.geometry)
    fs = args.sample_rate
    n = int(round(args.duration * fs))
    if n < 2:
        raise CliError("--duration too short")
    rng = np.random.default_rng(args.seed)
    if args.source == "noise":
        from .scene import speech_shaped_noise
        src = speech_shaped_noise(n, fs, rng)
    else:
        src = speech_like_source(n, fs, rng)
    scene = synthesize_scene(geometry, _doa_from_args(args), src, args.ddr_db, fs,
                             seed=int(rng.integers(2 ** 63)))
    scene.seed = args.seed
    side = write_scene(scene, args.out)
    log.info("wrote scene %s (DDR %.2f dB)", side, scene.measured_ddr_db())
    return 0


def _find_sidecars(paths) -> list[Path]:
    found = []
    for p in map(Path, paths):
        if p.is_file() and p.suffix == ".json":
            found.append(p)
        elif p.is_dir():
            found.extend(sorted(p.rglob("scene.json")))
        else:
            raise CliError(f"not a scene directory or sidecar: {p}")
    return found


def cmd_bench(args) -> int:
    sidecars = _find_sidecars(args.scenes)
    if not sidecars:
        raise CliError("no scene sidecars (scene.json) found")
    lams = args.lams or [LAMBDA_DEFAULT]
    kinds = [CdrEstimatorKind.parse(k) for k in args.estimator] if args.estimator else None
    rows = []
    for side in sidecars:
        try:
            scene = read_scene(side)
        except (OSError, KeyError, ValueError) as exc:
            raise CliError(f"cannot load scene {side}: {exc}") from None
        rows.extend(bench_scene(scene, lams, kinds))
    text = rows_to_csv(rows)
    if args.output == "-":
        sys.stdout.write(text)
    else:
        Path(args.output).write_text(text)
    return 0


COMMANDS = {"enhance": cmd_enhance, "synth": cmd_synth, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except CliError as exc:
        print(f"cdrpost {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
