import json

import numpy as np
import pytest

from cdrpost.spatial import (ArrayGeometry, Doa, builtin_geometry_path, chime_front5,
                             diffuse_coherence, diffuse_coherence_matrix, direct_coherence,
                             load_geometry, save_geometry, steering_vector, tdoa, tdoas)


def test_mic_at_origin_has_zero_tdoa(rng):
    geo = ArrayGeometry(np.zeros((1, 3)))
    for _ in range(10):
        doa = Doa(rng.uniform(-np.pi, np.pi), rng.uniform(0, np.pi))
        assert tdoa(geo, doa, 0) == 0.0


def test_tdoa_hand_value():
    geo = ArrayGeometry(np.array([[0.05, 0.0, 0.0]]))
    assert tdoa(geo, Doa(0.0, np.pi / 2), 0) == pytest.approx(-0.05 / 343, rel=1e-12)


def test_broadside_pair(pair_geometry):
    t = tdoas(pair_geometry, Doa(np.pi / 2, np.pi / 2))
    assert abs(t[0] - t[1]) < 1e-18


def test_tdoa_linear_in_position(rng):
    doa = Doa(0.7, 1.1)
    a = rng.standard_normal(3)
    b = rng.standard_normal(3)
    geo = ArrayGeometry(np.stack([a, b, 2 * a - 3 * b]))
    t = tdoas(geo, doa)
    assert t[2] == pytest.approx(2 * t[0] - 3 * t[1], abs=1e-15)


def test_tdoa_index_error(pair_geometry):
    with pytest.raises(IndexError):
        tdoa(pair_geometry, Doa(0.0), 5)


def test_direct_coherence_equal_tdoa_is_one(pair_geometry):
    f = np.linspace(0, 8000, 50)
    g = direct_coherence(pair_geometry, Doa(np.pi / 2, np.pi / 2), (0, 1), f)
    np.testing.assert_allclose(g, 1.0 + 0j, atol=1e-12)


def test_direct_coherence_unit_modulus(rng):
    for _ in range(20):
        geo = ArrayGeometry(rng.uniform(-0.2, 0.2, (3, 3)))
        doa = Doa(rng.uniform(-np.pi, np.pi), rng.uniform(0, np.pi))
        f = rng.uniform(0, 8000, 16)
        assert np.allclose(np.abs(direct_coherence(geo, doa, (0, 2), f)), 1.0)


def test_direct_coherence_phase_250us():
    # mic 1 at +x so tau_0 - tau_1 = 250 us for a wave travelling along +x.
    d = 250e-6 * 343
    geo = ArrayGeometry(np.array([[0.0, 0, 0], [-d, 0, 0]]))
    doa = Doa(np.pi, np.pi / 2)
    t = tdoas(geo, doa)
    assert t[0] - t[1] == pytest.approx(250e-6, rel=1e-12)
    g = direct_coherence(geo, doa, (0, 1), 1000.0)
    assert np.angle(g) == pytest.approx(2 * np.pi * 0.25, abs=1e-12)


def test_direct_coherence_same_mic_rejected(pair_geometry):
    with pytest.raises(ValueError):
        direct_coherence(pair_geometry, Doa(0.0), (1, 1), 100.0)


def test_diffuse_coherence_values():
    assert diffuse_coherence(0.1, 0.0) == 1.0
    assert diffuse_coherence(0.0, 1000.0) == 1.0
    assert abs(diffuse_coherence(0.1, 343 / 0.2)) < 1e-15
    x = 2 * np.pi * 1000 * 0.1 / 343
    assert diffuse_coherence(0.1, 1000.0) == pytest.approx(np.sin(x) / x, rel=1e-12)
    assert diffuse_coherence(0.1, 1000.0) == pytest.approx(0.5276, abs=5e-4)


def test_diffuse_coherence_even_and_bounded(rng):
    f = rng.uniform(0, 8000, 100)
    d = rng.uniform(0, 0.5, 100)
    g = diffuse_coherence(d, f)
    np.testing.assert_array_equal(g, diffuse_coherence(-d, f))
    np.testing.assert_array_equal(g, diffuse_coherence(d, -f))
    assert np.all((g >= -1) & (g <= 1))


def test_diffuse_matrix(front5):
    single = ArrayGeometry(np.zeros((1, 3)))
    np.testing.assert_array_equal(diffuse_coherence_matrix(single, 500.0), [[1.0]])
    np.testing.assert_array_equal(diffuse_coherence_matrix(front5, 0.0), np.ones((5, 5)))
    j = diffuse_coherence_matrix(front5, np.linspace(0, 8000, 33))
    assert j.shape == (33, 5, 5)
    np.testing.assert_array_equal(j, np.swapaxes(j, 1, 2))
    np.testing.assert_array_equal(np.diagonal(j, axis1=1, axis2=2), 1.0)
    assert np.all(np.abs(j) <= 1)


def test_steering_vector_shape(front5):
    t = tdoas(front5, Doa(0.3, 1.0))
    f = np.linspace(0, 8000, 257)
    h = steering_vector(t, f)
    assert h.shape == (5, 257)
    np.testing.assert_allclose(np.abs(h), 1.0)


def test_geometry_json_round_trip(tmp_path, front5):
    path = tmp_path / "g.json"
    save_geometry(front5, path)
    back = load_geometry(path)
    np.testing.assert_array_equal(back.positions, front5.positions)
    assert back.speed_of_sound == front5.speed_of_sound


def test_builtin_geometry():
    geo = load_geometry(builtin_geometry_path())
    assert geo.num_mics == 5
    assert geo == chime_front5()
    assert geo != ArrayGeometry(np.zeros((5, 3)))
    data = json.loads(open(builtin_geometry_path()).read())
    assert len(data["positions_m"]) == 5


@pytest.mark.parametrize("positions", [np.zeros((0, 3)), np.zeros((2, 2)),
                                       np.array([[np.nan, 0, 0]])])
def test_geometry_validation(positions):
    with pytest.raises(ValueError):
        ArrayGeometry(positions)


def test_geometry_rejects_bad_speed():
    with pytest.raises(ValueError):
        ArrayGeometry(np.zeros((1, 3)), speed_of_sound=0.0)
