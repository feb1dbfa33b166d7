import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gqs.errors import InvariantError
from gqs.gstate import density_matrix, expectation, expectation_with_error, histogram, uniform_grid_density
from gqs.hybrid import (
    HybridState,
    RegionGrid,
    box_embedding,
    box_map,
    box_pushforward_density,
    capacity_bounds,
    decompose,
    embedding,
    pushforward,
    pushforward_measure,
    reconstruct,
    reduced_density_matrix,
)
from gqs.manifold import PureStatePoint, prob_phase_arrays
from gqs.observables import Observable, observable_values, pauli
from oracles import random_hermitian

REGION = RegionGrid.uniform((0.0, 0.0), (1.0, 2.0), (16, 16))


def random_hybrid(rng, levels=4, region=REGION):
    psi = rng.standard_normal((region.n_points, levels)) + 1j * rng.standard_normal((region.n_points, levels))
    return HybridState.normalized(region, psi)


def dense_reduced(state):
    """Trace out x directly from psi[x, s]."""
    w = state.region.cell_measures()
    return np.einsum("x,xs,xt->st", w, state.psi, state.psi.conj())


def test_product_state():
    rng = np.random.default_rng(0)
    g = rng.standard_normal(REGION.n_points) + 1j * rng.standard_normal(REGION.n_points)
    c = np.array([0.6, 0.8j])
    state = HybridState.normalized(REGION, g[:, None] * c)
    dec = decompose(state)
    np.testing.assert_allclose(dec.p, np.broadcast_to([0.36, 0.64], dec.p.shape), atol=1e-12)
    assert np.ptp(dec.phi[:, 1]) <= 1e-12
    np.testing.assert_allclose(np.abs(dec.f), np.abs(state.psi[:, 0]) / 0.6, atol=1e-12)
    np.testing.assert_allclose(reduced_density_matrix(dec).matrix, np.outer(c, c.conj()), atol=1e-12)
    ens = pushforward(dec, 500, seed=1)
    target = PureStatePoint(c).amplitudes
    assert np.max(np.abs(ens.amplitudes - target)) <= 1e-12


def test_phase_free_state():
    rng = np.random.default_rng(1)
    state = HybridState.normalized(REGION, rng.random((REGION.n_points, 3)) + 0.1)
    dec = decompose(state)
    assert np.all(dec.phi == 0)
    assert np.all(dec.f.imag == 0) and np.all(dec.f.real > 0)


def test_zero_norm_points():
    rng = np.random.default_rng(2)
    psi = rng.standard_normal((REGION.n_points, 2)).astype(complex)
    psi[:10] = 0
    state = HybridState.normalized(REGION, psi)
    dec = decompose(state)
    assert np.all(dec.f[:10] == 0)
    np.testing.assert_allclose(reconstruct(dec).psi, state.psi, atol=1e-12)
    assert np.all(pushforward_measure(dec).weights > 0)


def test_roundtrip_random():
    rng = np.random.default_rng(3)
    for _ in range(50):
        state = random_hybrid(rng)
        assert np.max(np.abs(reconstruct(decompose(state)).psi - state.psi)) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 5))
def test_reduced_matches_partial_trace(seed, levels):
    state = random_hybrid(np.random.default_rng(seed), levels)
    np.testing.assert_allclose(reduced_density_matrix(decompose(state)).matrix, dense_reduced(state), atol=1e-10)


def test_nonuniform_axes():
    region = RegionGrid((np.array([0.0, 0.1, 0.5, 1.5]),))
    state = random_hybrid(np.random.default_rng(4), 2, region)
    dec = decompose(state)
    np.testing.assert_allclose(reconstruct(dec).psi, state.psi, atol=1e-12)
    np.testing.assert_allclose(reduced_density_matrix(dec).matrix, dense_reduced(state), atol=1e-12)


def test_pushforward_expectation_consistency():
    rng = np.random.default_rng(5)
    dec = decompose(random_hybrid(rng, 3))
    rho = reduced_density_matrix(dec).matrix
    ens = pushforward(dec, 50_000, seed=6)
    for _ in range(3):
        o = Observable(random_hermitian(3, rng))
        mean, se = expectation_with_error(ens, o)
        assert abs(mean - np.trace(rho @ o.matrix).real) <= 3 * se
        direct = np.sum(dec.probability_weights() * observable_values(o, dec.discrete_states()))
        assert expectation(pushforward_measure(dec), o) == pytest.approx(direct, abs=1e-12)


def test_pushforward_normalization():
    dec = decompose(random_hybrid(np.random.default_rng(7)))
    assert pushforward_measure(dec).weights.sum() == pytest.approx(1.0, abs=1e-14)
    assert len(pushforward(dec, 123, seed=0)) == 123


def test_pushforward_seeded():
    dec = decompose(random_hybrid(np.random.default_rng(8)))
    np.testing.assert_array_equal(pushforward(dec, 100, 3).amplitudes, pushforward(dec, 100, 3).amplitudes)


def test_box_map_points():
    p, phi = box_map(0.0, 0.0, 0, 2, 0, 3)
    assert (p, phi) == (0.0, 0.0)
    p, phi = box_map(1.0, 1.5, 0, 2, 0, 3)
    assert p == 0.5 and phi == pytest.approx(math.pi)


def test_box_embedding_structure():
    dec = box_embedding(-1, 1, 0, 2, shape=(32, 32))
    np.testing.assert_allclose(dec.p[:, 0], 1 - dec.p[:, 1])
    assert np.all(dec.phi[:, 0] == 0)
    z = embedding(dec)
    p, nu = prob_phase_arrays(z.amplitudes)
    np.testing.assert_allclose(p[:, 0], dec.p[:, 1], atol=1e-12)


def test_box_uniform_reduces_to_mixed():
    rho = reduced_density_matrix(box_embedding(0, 1, 0, 1, shape=(128, 128))).matrix
    ref = density_matrix(uniform_grid_density(2, 128, 128)).matrix
    np.testing.assert_allclose(rho, ref, atol=1e-3)
    np.testing.assert_allclose(rho, np.eye(2) / 2, atol=1e-3)


def test_box_uniform_pushforward_histogram():
    n = 100_000
    h = histogram(pushforward(box_embedding(0, 1, 0, 1, shape=(100, 100)), n, seed=2), 10, 10)
    se = math.sqrt(0.01 * 0.99 / n)
    assert np.all(np.abs(h.mass - 0.01) <= 4 * se)


def _bump(x, y):
    return np.exp(-((x - 0.3) ** 2) / 0.05 - ((y - 1.2) ** 2) / 0.4)


@pytest.mark.parametrize("label", ["I", "X", "Y", "Z"])
def test_box_change_of_variables(label):
    x0, x1, y0, y1 = 0.0, 1.0, 0.0, 2.0
    dec = box_embedding(x0, x1, y0, y1, shape=(128, 128), density=_bump)
    lhs = expectation(pushforward_measure(dec), pauli(label))

    norm = np.sum(_bump(*dec.region.points().T) * dec.region.cell_measures())
    n = 128
    p = (np.arange(n) + 0.5) / n
    phi = 2 * math.pi * (np.arange(n) + 0.5) / n
    pp, ff = np.meshgrid(p, phi, indexing="ij")
    q = box_pushforward_density(pp, ff, lambda x, y: _bump(x, y) / norm, x0, x1, y0, y1)
    z = np.stack([np.sqrt(1 - pp.ravel()), np.sqrt(pp.ravel()) * np.exp(1j * ff.ravel())], axis=1)
    o = observable_values(pauli(label), z).reshape(n, n)
    rhs = 0.5 * np.sum(q * o) * (1 / n) * (2 * math.pi / n)
    assert lhs == pytest.approx(rhs, abs=1e-3)


@pytest.mark.parametrize(
    "n, d, full, prod",
    [(2, 2, 1.0, 1.0), (6, 2, 2.0, 3.0), (16, 4, math.log(9) / math.log(4), 16 / 6)],
)
def test_capacity_examples(n, d, full, prod):
    b = capacity_bounds(n, d)
    assert b.m_full == pytest.approx(full, abs=1e-12)
    assert b.m_prod == pytest.approx(prod, abs=1e-12)


def test_capacity_ordering_where_bounds_are_meaningful():
    for n, d in itertools.product(range(2, 65), range(2, 9)):
        b = capacity_bounds(n, d)
        assert math.floor(b.m_full) <= math.floor(b.m_prod)
        if b.m_prod >= 1:
            assert b.m_full <= b.m_prod + 1e-12


def test_invalid_inputs():
    with pytest.raises(InvariantError):
        capacity_bounds(0, 2)
    with pytest.raises(InvariantError):
        capacity_bounds(4, 1)
    with pytest.raises(InvariantError):
        HybridState(REGION, np.ones((REGION.n_points, 2)))
    with pytest.raises(InvariantError):
        RegionGrid((np.array([0.0, 0.0, 1.0]),))
