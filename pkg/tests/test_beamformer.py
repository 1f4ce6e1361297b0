import numpy as np
import pytest

from cdrpost.beamformer import (BeamformerWeights, TdoaTrack, correlation_gains,
                                distortionless_response, estimate_tdoa_track, gcc_phat_tdoa,
                                screen_channels, segment_tdoa_smoothing, steer_and_sum,
                                uniform_gains)
from cdrpost.filterbank import FilterbankConfig, analyze
from cdrpost.scene import delay_channels
from cdrpost.spatial import Doa, tdoas

FS = 16000.0


def _frac_delay(x, d):
    """Delay ``x`` by ``d`` samples with a frequency-domain phase ramp."""
    # model convention: channel n carries s(t + tau_n)
    return delay_channels(x, np.array([-d / FS]), FS)[0]


def test_gcc_identical():
    x = np.random.default_rng(0).standard_normal(8000)
    d, c = gcc_phat_tdoa(x, x, 1e-3, FS)
    assert abs(d) < 1e-6 / FS
    assert c == pytest.approx(1.0, abs=1e-9)


def test_gcc_integer_delay_impulse_train():
    x = np.zeros(8000)
    x[::997] = 1.0
    y = np.roll(x, 10)
    d, c = gcc_phat_tdoa(x, y, 2e-3, FS)
    assert round(d * FS, 9) == 10
    assert c > 0.9


@pytest.mark.parametrize("shift", [-7, -1, 3, 12])
def test_gcc_integer_delay_noise(shift):
    rng = np.random.default_rng(abs(shift))
    x = rng.standard_normal(8000)
    y = np.roll(x, shift) + 0.1 * rng.standard_normal(8000)  # 20 dB SNR
    d, _ = gcc_phat_tdoa(x, y, 2e-3, FS)
    assert round(d * FS) == shift


@pytest.mark.parametrize("shift", [3.5, -2.25, 0.4])
def test_gcc_fractional_delay(shift):
    rng = np.random.default_rng(3)
    x = rng.standard_normal(8000)
    y = _frac_delay(x, shift) + 0.1 * rng.standard_normal(8000)
    d, _ = gcc_phat_tdoa(x, y, 1e-3, FS)
    assert abs(d * FS - shift) < 0.5


def test_gcc_silence_and_errors():
    assert gcc_phat_tdoa(np.zeros(4000), np.ones(4000), 1e-3, FS) == (0.0, 0.0)
    with pytest.raises(ValueError):
        gcc_phat_tdoa(np.ones(10), np.ones(10), 1e-3, FS)
    with pytest.raises(ValueError):
        gcc_phat_tdoa(np.ones(100), np.ones(101), 1e-4, FS)


def test_tdoa_track_follows_model_convention(front5):
    rng = np.random.default_rng(5)
    doa = Doa.from_degrees(30, 50)
    taus = tdoas(front5, doa)
    src = rng.standard_normal(int(2 * FS))
    x = delay_channels(src, taus, FS) + 0.01 * rng.standard_normal((5, src.size))
    track = estimate_tdoa_track(x, FS, 1e-3)
    assert track.num_segments == 7
    expected = taus - taus[0]
    np.testing.assert_allclose(np.median(track.tdoas, axis=0), expected, atol=0.5 / FS)


def test_smoothing_examples():
    t = np.array([[0.0, 1e-4]] * 3)
    c = np.ones((3, 2))
    out = segment_tdoa_smoothing(TdoaTrack(t, c))
    np.testing.assert_array_equal(out.tdoas, t)
    assert not out.fallback

    t2 = t.copy()
    t2[1, 1] = 9e-4
    c2 = c.copy()
    c2[1, 1] = 0.01
    out = segment_tdoa_smoothing(TdoaTrack(t2, c2))
    assert out.tdoas[1, 1] == 1e-4
    assert out.replaced[1, 1] and not out.replaced[0, 1]

    silent = estimate_tdoa_track(np.zeros((3, 20000)), FS, 1e-3)
    out = segment_tdoa_smoothing(silent)
    assert out.fallback
    assert not np.any(out.tdoas)


def test_track_lookup():
    tr = TdoaTrack(np.arange(4)[:, None] * np.ones((1, 2)), np.ones((4, 2)))
    # segment k is centred at 0.25 + 0.25 k seconds
    np.testing.assert_array_equal(tr.segment_index([0.0, 0.25, 0.5, 0.76, 10.0]),
                                  [0, 0, 1, 2, 3])
    assert tr.to_dict()["segment_s"] == 0.5


def test_steer_and_sum_examples(rng):
    cfg = FilterbankConfig()
    f = cfg.freqs()
    x = rng.standard_normal(4000)
    tf = analyze(np.stack([x, x, x]), cfg)
    L = tf.shape[1]
    w = BeamformerWeights.constant(uniform_gains(3), np.zeros(3), L)
    np.testing.assert_allclose(steer_and_sum(tf, w, f)[0], tf[0], atol=1e-12)

    w = BeamformerWeights.constant([0.0, 1.0, 0.0], np.zeros(3), L)
    other = analyze(rng.standard_normal((3, 4000)), cfg)
    np.testing.assert_allclose(steer_and_sum(other, w, f)[0], other[1], atol=1e-12)


def test_phase_ramp_channel_realigned(rng):
    f = np.linspace(0, 8000, 257)
    x1 = rng.standard_normal((10, 257)) + 1j * rng.standard_normal((10, 257))
    tau = 1.7e-4
    x2 = x1 * np.exp(2j * np.pi * f * tau)
    tf = np.stack([x1, x2])
    w = BeamformerWeights.constant([0.5, 0.5], [0.0, tau], 10)
    np.testing.assert_allclose(steer_and_sum(tf, w, f)[0], x1, atol=1e-12)


def test_distortionless(front5, rng):
    f = FilterbankConfig().freqs()
    for _ in range(5):
        doa = Doa(rng.uniform(-np.pi, np.pi), rng.uniform(0, np.pi))
        t = tdoas(front5, doa)
        w = BeamformerWeights.constant(rng.dirichlet(np.ones(5)), t, 3)
        r = distortionless_response(w, t, f)
        assert np.max(np.abs(r - 1)) < 1e-6


def test_white_noise_gain_and_output_energy(rng):
    g = rng.dirichlet(np.ones(4))
    assert np.sum(g ** 2) <= 1
    assert np.sum(np.array([0, 1.0, 0, 0]) ** 2) == 1
    x = rng.standard_normal((4, 200, 33)) + 1j * rng.standard_normal((4, 200, 33))
    w = BeamformerWeights.constant(uniform_gains(4), rng.uniform(-1e-3, 1e-3, 4), 200)
    y = steer_and_sum(x, w, np.linspace(0, 8000, 33))
    assert np.mean(np.abs(y) ** 2) <= np.mean(np.abs(x) ** 2)


def test_weights_validation():
    with pytest.raises(ValueError):
        BeamformerWeights([[0.5, 0.6]], [[0, 0]])
    with pytest.raises(ValueError):
        BeamformerWeights([[1.5, -0.5]], [[0, 0]])
    with pytest.raises(ValueError):
        BeamformerWeights([[0.5, 0.5]], [[0, 0, 0]])
    with pytest.raises(ValueError):
        uniform_gains(3, [False] * 3)
    np.testing.assert_array_equal(uniform_gains(4, [1, 0, 1, 1]), [1 / 3, 0, 1 / 3, 1 / 3])


def test_channel_screening(rng):
    src = rng.standard_normal(16000)
    x = np.stack([src + 0.1 * rng.standard_normal(16000) for _ in range(4)])
    x[2] *= 1e-3                           # 60 dB down
    x[3] = rng.standard_normal(16000)      # uncorrelated with the others
    ok = screen_channels(x)
    np.testing.assert_array_equal(ok, [True, True, False, False])
    g = correlation_gains(x, ok)
    assert g[2] == 0 and g[3] == 0
    assert g.sum() == pytest.approx(1.0)
