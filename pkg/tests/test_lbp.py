import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from oracles import canonical, chain_map, exhaustive_min_energy, grid_energy
from segvol.labels import connected_components, is_four_connected, is_partition
from segvol.lbp import (OptimizerConfig, _check_data, _sweep, energy, lbp_minimize,
                        resolve_segmentation)

unit = st.floats(0, 1, allow_nan=False)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(1, 5), st.integers(1, 5)),
              elements=unit))
def test_lambda_zero_is_argmin(d):
    alpha = lbp_minimize(d, OptimizerConfig(lam=0.0))
    assert np.array_equal(alpha, np.argmin(d, axis=0))


@pytest.mark.parametrize("lam", [0.01, 0.1, 0.3, 1.0])
def test_chain_matches_dynamic_programming(rng, lam):
    for _ in range(10):
        d = rng.uniform(size=(5, 1, 16))
        alpha = lbp_minimize(d, OptimizerConfig(lam=lam, max_iterations=40))
        expected = chain_map(d[:, 0, :], lam)
        assert grid_energy(d, alpha, lam) == pytest.approx(grid_energy(d, expected[None], lam), abs=1e-9)


def test_column_chain(rng):
    d = rng.uniform(size=(4, 12, 1))
    alpha = lbp_minimize(d, OptimizerConfig(lam=0.2, max_iterations=30))
    assert np.array_equal(alpha[:, 0], chain_map(d[:, :, 0], 0.2))


def test_small_grid_against_enumeration(rng):
    for _ in range(3):
        d = rng.uniform(size=(3, 3, 3))
        alpha = lbp_minimize(d, OptimizerConfig(lam=0.1))
        e = energy(d, alpha, 0.1)
        assert e <= energy(d, np.argmin(d, axis=0), 0.1) + 1e-12
        assert e >= exhaustive_min_energy(d, 0.1) - 1e-12


def test_energy_examples():
    assert energy(np.zeros((3, 1, 2)), np.array([[0, 2]]), 0.5) == 1.0
    d = np.random.default_rng(0).uniform(size=(3, 4, 4))
    alpha = np.full((4, 4), 2)
    assert energy(d, alpha, 7.0) == pytest.approx(d[2].sum())


def test_energy_matches_oracle(rng):
    d = rng.uniform(size=(4, 5, 6))
    alpha = rng.integers(0, 4, size=(5, 6))
    assert energy(d, alpha, 0.37) == pytest.approx(grid_energy(d, alpha, 0.37))


def test_energy_below_uniform_labelings(rng):
    for _ in range(5):
        d = rng.uniform(size=(4, 6, 6))
        lam = 0.05
        e = energy(d, lbp_minimize(d, OptimizerConfig(lam=lam)), lam)
        for i in range(4):
            assert e <= energy(d, np.full((6, 6), i), lam) + 1e-12


def test_ties_prefer_lower_index():
    d = np.zeros((3, 2, 2))
    assert np.all(lbp_minimize(d, OptimizerConfig(lam=0.5)) == 0)


def test_messages_bounded(rng):
    k, lam = 5, 0.3
    d = np.moveaxis(rng.uniform(size=(k, 7, 7)), 0, -1).copy()
    msg = np.zeros((4, 7, 7, k))
    new = np.zeros_like(msg)
    for _ in range(25):
        _sweep(d, msg, new, lam)
        msg, new = new, msg
        assert msg.min() >= 0 and msg.max() <= k * (1 + lam * k)
        nonzero = msg.reshape(-1, k)
        assert np.all(nonzero.min(axis=1) == 0)


def test_energy_trace_recorded(rng):
    trace = []
    d = rng.uniform(size=(3, 5, 5))
    alpha = lbp_minimize(d, OptimizerConfig(lam=0.1, max_iterations=7), energy_trace=trace)
    assert 1 <= len(trace) <= 7
    assert trace[-1] == pytest.approx(energy(d, alpha, 0.1))


def test_rejects_bad_data():
    with pytest.raises(ValueError):
        _check_data(np.full((2, 2, 2), np.inf))
    with pytest.raises(ValueError):
        lbp_minimize(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        OptimizerConfig(lam=-1)
    with pytest.raises(ValueError):
        OptimizerConfig(max_iterations=0)
    with pytest.raises(ValueError):
        OptimizerConfig(convergence_tol=0)


def test_resolve_two_columns():
    vol = [np.zeros((2, 2), int), np.zeros((2, 2), int)]
    alpha = np.array([[0, 1], [0, 1]])
    out = resolve_segmentation(alpha, vol)
    assert np.array_equal(out, alpha)


def test_resolve_constant_alpha(rng):
    vol = [rng.integers(0, 3, size=(6, 6)) for _ in range(3)]
    out = resolve_segmentation(np.full((6, 6), 1), vol)
    assert np.array_equal(canonical(out), canonical(connected_components(vol[1])))


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_resolve_is_connected_partition(data):
    shape = data.draw(st.tuples(st.integers(1, 7), st.integers(1, 7)))
    vol = [data.draw(arrays(np.int64, shape, elements=st.integers(0, 2))) for _ in range(3)]
    alpha = data.draw(arrays(np.int64, shape, elements=st.integers(0, 2)))
    out = resolve_segmentation(alpha, vol)
    assert is_partition(out) and is_four_connected(out)
    # every final segment lies inside one chosen hypothesis segment
    for v in np.unique(out):
        m = out == v
        a = np.unique(alpha[m])
        assert a.size == 1
        assert np.unique(vol[a[0]][m]).size == 1


def test_resolve_rejects_out_of_range():
    with pytest.raises(ValueError):
        resolve_segmentation(np.full((2, 2), 2), [np.zeros((2, 2), int)] * 2)
