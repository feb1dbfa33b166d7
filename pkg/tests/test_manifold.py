import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gqs.errors import DimensionError, InvariantError
from gqs.manifold import (
    ProbPhasePoint,
    PureStatePoint,
    from_prob_phase,
    fs_uniform_grid,
    fs_volume,
    gauge_fix,
    random_amplitudes,
    to_prob_phase,
)

complex_entry = st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False)


def vectors(min_dim=2, max_dim=5):
    return st.integers(min_dim, max_dim).flatmap(
        lambda d: st.lists(complex_entry, min_size=d, max_size=d)
    ).filter(lambda v: np.linalg.norm(v) > 1e-3)


def test_basis_state_coordinates():
    c = to_prob_phase(PureStatePoint([1, 0]))
    assert c.probs[0] == 0 and c.phases[0] == 0


@pytest.mark.parametrize(
    "z, expected",
    [
        ([0.657, 0.418 + 0.627j], (0.568, 0.983)),
        ([0.754, -0.364 - 0.546j], (0.432, 4.124)),
    ],
)
def test_reference_coordinates(z, expected):
    c = to_prob_phase(PureStatePoint(z))
    assert abs(c.probs[0] - expected[0]) <= 2e-3
    assert abs(c.phases[0] - expected[1]) <= 2e-3


def test_from_coordinates():
    assert from_prob_phase(ProbPhasePoint([0.0], [1.7])) == PureStatePoint([1, 0])
    z = from_prob_phase(ProbPhasePoint([0.568], [0.983])).amplitudes
    assert np.max(np.abs(z - [0.657, 0.418 + 0.627j])) <= 2e-3


def test_random_roundtrip():
    z = random_amplitudes(3, 1000, np.random.default_rng(7))
    for v in z:
        back = from_prob_phase(to_prob_phase(PureStatePoint(v))).amplitudes
        assert np.max(np.abs(back - v)) <= 1e-12


def test_zero_first_component_uses_next_reference():
    c = to_prob_phase(PureStatePoint([0, 1j, 1]))
    assert c.p0 == pytest.approx(0.0)
    assert c.phases[0] == 0.0
    assert c.phases[1] == pytest.approx(1.5 * math.pi)


@settings(max_examples=200, deadline=None)
@given(vectors())
def test_gauge_idempotent(v):
    once = gauge_fix(np.asarray(v) / np.linalg.norm(v))
    assert np.allclose(gauge_fix(once), once, atol=1e-15)


@settings(max_examples=200, deadline=None)
@given(vectors(), st.floats(0, 2 * math.pi))
def test_point_is_gauge_invariant(v, lam):
    assert PureStatePoint(v) == PureStatePoint(np.exp(1j * lam) * np.asarray(v))


@settings(max_examples=200, deadline=None)
@given(vectors())
def test_roundtrip_property(v):
    z = PureStatePoint(v)
    if abs(z.amplitudes[0]) < 1e-3:  # sqrt(1 - sum p) loses ~eps/|Z^0| near p_0 = 0
        return
    back = from_prob_phase(to_prob_phase(z))
    assert np.max(np.abs(back.amplitudes - z.amplitudes)) <= 1e-12


def test_tiny_grid():
    g = fs_uniform_grid(2, 2, 2)
    assert len(g) == 4
    assert g.total_volume == pytest.approx(math.pi, rel=1e-12)


@pytest.mark.parametrize("dim, bins, tol", [(2, 256, 0.01), (3, 32, 0.05), (4, 8, 0.05)])
def test_grid_volume(dim, bins, tol):
    g = fs_uniform_grid(dim, bins, bins)
    assert g.total_volume == pytest.approx(fs_volume(dim), rel=tol)


def test_grid_volume_converges():
    errs = [abs(fs_uniform_grid(3, b, 4).total_volume - fs_volume(3)) for b in (4, 16, 64)]
    assert errs[-1] <= errs[0] + 1e-12
    assert errs[-1] < 1e-10


def test_grid_nodes_inside_simplex():
    g = fs_uniform_grid(3, 16, 4)
    assert np.all(g.p_nodes.sum(axis=1) <= 1 + 1e-12)
    assert np.all(g.volumes > 0)
    np.testing.assert_allclose(np.linalg.norm(g.amplitudes(), axis=1), 1, atol=1e-12)


def test_grid_rejects_high_dimension():
    with pytest.raises(DimensionError):
        fs_uniform_grid(5, 4, 4)


def test_invalid_coordinates():
    with pytest.raises(InvariantError):
        ProbPhasePoint([0.7, 0.5], [0, 0])
    with pytest.raises(InvariantError):
        PureStatePoint([0, 0])


def test_json_roundtrip():
    z = PureStatePoint([0.3, 0.2 - 0.9j, 0.1j])
    assert PureStatePoint.from_json(z.to_json()) == z
    c = to_prob_phase(z)
    assert np.allclose(ProbPhasePoint.from_json(c.to_json()).probs, c.probs)
