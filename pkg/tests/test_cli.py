import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest
from scipy.io import wavfile

from cdrpost.audio_io import load_grid, read_wav, write_wav
from cdrpost.cli import main
from cdrpost.spatial import builtin_geometry_path


@pytest.fixture(scope="module")
def scene_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("scene")
    assert main(["synth", "--out", str(out), "--ddr-db", "0", "--seed", "7",
                 "--doa-az", "45", "--duration", "3"]) == 0
    return out


def test_synth_outputs(scene_dir):
    names = sorted(p.name for p in scene_dir.iterdir())
    assert names == ["diffuse.wav", "direct.wav", "mixture.wav", "scene.json"]
    meta = json.loads((scene_dir / "scene.json").read_text())
    assert meta["seed"] == 7 and meta["ddr_db"] == 0.0 and meta["doa_az_deg"] == 45
    rate, data = wavfile.read(scene_dir / "mixture.wav")
    assert rate == 16000 and data.shape == (48000, 5) and data.dtype == np.float32


def test_synth_reproducible(scene_dir, tmp_path):
    assert main(["synth", "--out", str(tmp_path), "--ddr-db", "0", "--seed", "7",
                 "--doa-az", "45", "--duration", "3"]) == 0
    for name in ("mixture.wav", "direct.wav", "diffuse.wav"):
        assert (tmp_path / name).read_bytes() == (scene_dir / name).read_bytes()


@pytest.mark.parametrize("argv", [["--duration", "0"], ["--duration", "-1"],
                                  ["--seed", "-3"], ["--ddr-db", "nan"]])
def test_synth_invalid_flags(tmp_path, argv, capsys):
    assert main(["synth", "--out", str(tmp_path / "x")] + argv) == 2
    assert "error" in capsys.readouterr().err


def test_enhance_published_defaults(scene_dir, tmp_path):
    out = tmp_path / "out.wav"
    rc = main(["enhance", "--estimator", "doadep", "--mu", "1.2", "--gmin", "0.1",
               "--lambda", "0.68", "--geometry", builtin_geometry_path(),
               "--doa-az", "45", str(scene_dir / "mixture.wav"), str(out)])
    assert rc == 0
    rate, y = read_wav(out)
    assert rate == 16000 and y.shape == (1, 48000)
    assert wavfile.read(out)[1].dtype == np.float32


def test_enhance_thiergart_and_diagnostics(scene_dir, tmp_path):
    diag = tmp_path / "diag"
    rc = main(["enhance", "--estimator", "thiergart", "--mu", "0.4",
               str(scene_dir / "mixture.wav"), str(tmp_path / "o.wav"),
               "--dump-diagnostics", str(diag)])
    assert rc == 0
    for name in ("mean_diffuseness", "cdr_in", "cdr_bf", "gain"):
        grid, header = load_grid(diag / f"{name}.json")
        assert grid.shape == tuple(header["shape"]) and grid.shape[1] == 257
        assert len(header["freqs_hz"]) == 257
        assert header["estimator"] == "thiergart"
    track = json.loads((diag / "tdoa_track.json").read_text())
    assert len(track["frame_tdoas_s"]) == grid.shape[0]


def test_enhance_mono_inputs_and_gcc(scene_dir, tmp_path):
    _, x = read_wav(scene_dir / "mixture.wav")
    paths = []
    for i, ch in enumerate(x):
        paths.append(str(tmp_path / f"ch{i}.wav"))
        write_wav(paths[-1], 16000, ch)
    assert main(["enhance", "--estimate-doa", *paths, str(tmp_path / "o.wav")]) == 0


def test_enhance_errors(scene_dir, tmp_path, capsys):
    missing = tmp_path / "nope.json"
    rc = main(["enhance", "--geometry", str(missing), str(scene_dir / "mixture.wav"),
               str(tmp_path / "o.wav")])
    assert rc == 2
    assert str(missing) in capsys.readouterr().err

    assert main(["enhance", str(tmp_path / "missing.wav"), str(tmp_path / "o.wav")]) == 2
    write_wav(tmp_path / "two.wav", 16000, np.zeros((2, 2000)))
    assert main(["enhance", str(tmp_path / "two.wav"), str(tmp_path / "o.wav")]) == 2
    assert "microphones" in capsys.readouterr().err
    assert main(["enhance", "--gmin", "0", str(scene_dir / "mixture.wav"),
                 str(tmp_path / "o.wav")]) == 2
    assert main(["enhance", "--estimate-doa", "--doa-az", "10",
                 str(scene_dir / "mixture.wav"), str(tmp_path / "o.wav")]) == 2
    with pytest.raises(SystemExit):
        main(["enhance", "--estimator", "mvdr", "a.wav", "b.wav"])


def test_bench_empty_directory(tmp_path):
    assert main(["bench", str(tmp_path)]) == 2


def test_bench_csv(scene_dir, tmp_path):
    out = tmp_path / "bench.csv"
    assert main(["bench", str(scene_dir), "--estimator", "doadep", "--output", str(out)]) == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert list(rows[0]) == ["estimator", "true_cdr_db", "tdoa_us", "lambda",
                             "median_err_db", "iqr_db"]
    assert {r["estimator"] for r in rows} == {"doadep"}


def test_synth_then_bench_reports_true_cdr(tmp_path, capsys):
    assert main(["synth", "--out", str(tmp_path), "--ddr-db", "-60", "--seed", "3",
                 "--duration", "2"]) == 0
    assert main(["bench", str(tmp_path / "scene.json")]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert all(abs(float(r["true_cdr_db"]) + 60) < 0.1 for r in rows)


def _bench(capsys, scene, extra=()):
    assert main(["bench", str(scene), *extra]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    return {r["estimator"]: float(r["median_err_db"]) for r in rows}


@pytest.mark.slow
def test_bench_zero_tdoa_scene_within_3db(tmp_path, capsys):
    # Fails for doaindep and thiergart at the default forgetting factor:
    # both read about +4.3 dB (finite-averaging coherence bias).
    assert main(["synth", "--out", str(tmp_path), "--ddr-db", "0", "--seed", "1",
                 "--duration", "10", "--doa-el", "0"]) == 0
    err = _bench(capsys, tmp_path)
    assert all(abs(e) <= 3 for e in err.values()), err


@pytest.mark.slow
def test_bench_200us_scene_ranks_biased_estimators(tmp_path, capsys):
    # Two mics 6.86 cm apart, end-fire source: tau_0 - tau_1 = 200 us.
    geo = tmp_path / "pair.json"
    geo.write_text(json.dumps({"positions_m": [[0, 0, 0], [343 * 200e-6, 0, 0]]}))
    assert main(["synth", "--out", str(tmp_path / "s"), "--geometry", str(geo),
                 "--doa-az", "180", "--doa-el", "90", "--ddr-db", "0", "--seed", "1",
                 "--duration", "10"]) == 0
    err = _bench(capsys, tmp_path / "s")
    assert abs(err["jeub"]) > abs(err["doadep"]), err
    assert abs(err["thiergart"]) > abs(err["doadep"]), err


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "cdrpost", "--help"], capture_output=True,
                       text=True)
    assert r.returncode == 0
    assert "enhance" in r.stdout and "bench" in r.stdout
