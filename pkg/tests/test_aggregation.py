import numpy as np
import pytest

from cdrpost.aggregation import (EPS_A, PairSet, average_diffuseness, beamformer_output_cdr,
                                 diffuse_array_gain, diffuse_array_gain_grid, input_cdr)
from cdrpost.cdr import CDR_MAX, CdrValue, diffuseness
from cdrpost.spatial import ArrayGeometry, Doa, diffuse_coherence_matrix, tdoas


def test_average_diffuseness_examples():
    assert average_diffuseness([1.0]) == 0.5
    assert average_diffuseness([CdrValue(0.0), CdrValue(CDR_MAX, clamped_high=True)]) \
        == pytest.approx(0.5, abs=1e-4)
    d = [0.2, 0.4, 0.9]
    cdrs = [1 / x - 1 for x in d]
    assert average_diffuseness(cdrs) == pytest.approx(0.5)


def test_average_diffuseness_permutation_invariant(rng):
    c = rng.uniform(0, 10, (6, 4, 9))
    perm = rng.permutation(6)
    np.testing.assert_allclose(average_diffuseness(c), average_diffuseness(c[perm]))


def test_average_diffuseness_floor():
    assert average_diffuseness([1e9, 1e9]) == 1e-4


def test_input_cdr():
    assert input_cdr(0.5) == 1.0
    assert input_cdr(1.0) == 0.0
    for rho in (0.1, 1.0, 10.0):
        assert input_cdr(diffuseness(rho)) == pytest.approx(rho)
    with pytest.raises(ValueError):
        input_cdr(1.5)


def test_array_gain_examples(front5):
    assert diffuse_array_gain([1.0], [[1.0]]) == 1.0
    n = front5.num_mics
    w = np.full(n, 1 / n)
    assert diffuse_array_gain(w, np.eye(n)) == pytest.approx(1 / n)
    assert diffuse_array_gain(w, diffuse_coherence_matrix(front5, 0.0)) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        diffuse_array_gain(w, np.eye(3))


def test_array_gain_grid_matches_quadratic_form(front5, rng):
    f = np.linspace(0, 8000, 65)
    taus = np.stack([tdoas(front5, Doa(0.4, 0.9)), tdoas(front5, Doa(-1.0, 0.3))])
    gains = np.stack([np.full(5, 0.2), rng.dirichlet(np.ones(5))])
    grid = diffuse_array_gain_grid(gains, taus, f, front5.distances, 343.0)
    j = diffuse_coherence_matrix(front5, f)
    for l in range(2):
        for k in range(0, 65, 8):
            w = gains[l] * np.exp(-2j * np.pi * f[k] * taus[l])
            assert grid[l, k] == pytest.approx(diffuse_array_gain(w, j[k]), rel=1e-10)
    assert np.all(grid >= EPS_A)


def test_output_cdr():
    assert beamformer_output_cdr(3.0, 1.0) == (3.0, False)
    assert beamformer_output_cdr(1.0, 0.2)[0] == pytest.approx(5.0)
    assert beamformer_output_cdr(1e4, 1e-6) == (CDR_MAX, True)


def test_output_cdr_not_below_input_when_gain_le_one(rng):
    a = rng.uniform(1e-3, 1.0, 100)
    c = rng.uniform(0, 100, 100)
    out, _ = beamformer_output_cdr(c, a)
    assert np.all(out >= np.minimum(c, CDR_MAX))


def test_pairset():
    ps = PairSet.from_channels([0, 2, 4])
    assert list(ps) == [(0, 2), (0, 4), (2, 4)]
    for bad in ([], [(1, 0)], [(0, 1), (0, 1)]):
        with pytest.raises(ValueError):
            PairSet(bad)
    with pytest.raises(ValueError):
        PairSet([(0, 5)], num_channels=3)
