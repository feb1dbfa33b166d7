"""Geometric quantum states: normalized distributions q(Z) on CP^{D-1}.

Three concrete representations share one set of reductions:

``DeltaMixture``
    finite convex combination of covariant Dirac deltas, kept as exact atoms;
``GridDensity``
    values of q on the nodes of an :class:`~gqs.manifold.FsGrid`;
``SampleEnsemble``
    a (possibly weighted, possibly correlated) Monte Carlo sample.

Every representation reduces to a list of ``(mass, amplitudes)`` pairs whose
masses sum to one, which is all that the expectation functional and the
density-matrix map need.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import DimensionError, InvariantError
from .manifold import (
    TWO_PI,
    FsGrid,
    PureStatePoint,
    fs_uniform_grid,
    gauge_fix,
    normalize,
    prob_phase_arrays,
    random_amplitudes,
)
from .observables import (
    DensityMatrix,
    Observable,
    Povm,
    observable_values,
)

WEIGHT_TOL = 1e-12
GRID_NORM_TOL = 1e-6


def _check_weights(w: np.ndarray, what: str) -> np.ndarray:
    w = np.asarray(w, dtype=float).reshape(-1)
    if np.any(w < 0):
        raise InvariantError(f"{what} must be nonnegative")
    if abs(w.sum() - 1.0) > WEIGHT_TOL:
        raise InvariantError(f"{what} sum to {w.sum()!r}, expected 1")
    return w


def _freeze(*arrays):
    for a in arrays:
        a.setflags(write=False)


@dataclass(frozen=True, eq=False)
class DeltaMixture:
    """``sum_j w_j delta(Z - Z_j)`` with strictly positive weights."""

    weights: np.ndarray
    amplitudes: np.ndarray

    def __post_init__(self):
        w = _check_weights(self.weights, "delta weights")
        if np.any(w <= 0):
            raise InvariantError("delta weights must be strictly positive")
        z = np.atleast_2d(np.asarray(self.amplitudes, dtype=complex))
        if z.shape[0] != w.size:
            raise InvariantError(f"{w.size} weights for {z.shape[0]} atoms")
        z = gauge_fix(normalize(z))
        _freeze(w, z)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "amplitudes", z)

    @classmethod
    def from_atoms(cls, atoms) -> "DeltaMixture":
        atoms = list(atoms)
        return cls(
            np.array([w for w, _ in atoms], dtype=float),
            np.array([pt.amplitudes for _, pt in atoms]),
        )

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[1]

    @property
    def atoms(self) -> list[tuple[float, PureStatePoint]]:
        return [(float(w), PureStatePoint(z)) for w, z in zip(self.weights, self.amplitudes)]


@dataclass(frozen=True, eq=False)
class GridDensity:
    """Density values on grid nodes, rescaled so that ``sum(q * volume) == 1``."""

    grid: FsGrid
    values: np.ndarray

    def __post_init__(self):
        q = np.array(self.values, dtype=float).reshape(-1)
        if q.size != len(self.grid):
            raise InvariantError(f"{q.size} values for a grid of {len(self.grid)} cells")
        if np.any(q < 0) or not np.all(np.isfinite(q)):
            raise InvariantError("grid density values must be finite and nonnegative")
        total = float(np.sum(q * self.grid.volumes))
        if total <= 0:
            raise InvariantError("grid density has zero total mass")
        q = q / total
        _freeze(q)
        object.__setattr__(self, "values", q)

    @classmethod
    def from_function(cls, grid: FsGrid, fn) -> "GridDensity":
        """Evaluate ``fn(amplitudes) -> values`` at the grid nodes and normalize."""
        return cls(grid, fn(grid.amplitudes()))

    @property
    def dim(self) -> int:
        return self.grid.dim

    def masses(self) -> np.ndarray:
        return self.values * self.grid.volumes


@dataclass(frozen=True, eq=False)
class SampleEnsemble:
    """Monte Carlo representation of q(Z).

    ``weights`` of ``None`` means uniform. ``info`` carries sampler diagnostics
    (acceptance rate, burn-in, step sizes) and is not used in reductions.
    """

    amplitudes: np.ndarray
    weights: np.ndarray | None = None
    rng_seed: int | None = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        z = np.atleast_2d(np.asarray(self.amplitudes, dtype=complex))
        if z.shape[0] == 0:
            raise InvariantError("sample ensemble is empty")
        z = gauge_fix(normalize(z))
        _freeze(z)
        object.__setattr__(self, "amplitudes", z)
        if self.weights is not None:
            w = _check_weights(self.weights, "sample weights")
            if w.size != z.shape[0]:
                raise InvariantError(f"{w.size} weights for {z.shape[0]} samples")
            _freeze(w)
            object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[1]

    def __len__(self) -> int:
        return self.amplitudes.shape[0]


GeometricState = Union[DeltaMixture, GridDensity, SampleEnsemble]


def masses_and_points(state: GeometricState) -> tuple[np.ndarray, np.ndarray]:
    """Probability masses (summing to 1) and the amplitudes they sit on."""
    if isinstance(state, DeltaMixture):
        return state.weights, state.amplitudes
    if isinstance(state, GridDensity):
        return state.masses(), state.grid.amplitudes()
    if isinstance(state, SampleEnsemble):
        n = len(state)
        w = state.weights if state.weights is not None else np.full(n, 1.0 / n)
        return w, state.amplitudes
    raise TypeError(f"not a geometric state: {type(state).__name__}")


def _check_dim(state: GeometricState, dim: int):
    if state.dim != dim:
        raise DimensionError(f"state has dim {state.dim}, operator has dim {dim}")


def weighted_outer_sum(weights: np.ndarray, amplitudes: np.ndarray) -> np.ndarray:
    """``sum_n w_n Z_n Z_n^dag`` with entry-wise pairwise summation.

    Small dimensions go entry by entry through ``np.sum`` so the result does
    not depend on BLAS threading; large ones fall back to a matrix product.
    """
    d = amplitudes.shape[1]
    if d > 16:
        return (amplitudes * weights[:, None]).T @ amplitudes.conj()
    out = np.empty((d, d), dtype=complex)
    wz = amplitudes * weights[:, None]
    for a in range(d):
        for b in range(a, d):
            out[a, b] = np.sum(wz[:, a] * amplitudes[:, b].conj())
            out[b, a] = np.conj(out[a, b])
    return out


def expectation(state: GeometricState, obs: Observable) -> float:
    """The functional ``P_q[O] = integral of q(Z) O(Z) dV_FS``."""
    _check_dim(state, obs.dim)
    w, z = masses_and_points(state)
    return float(np.sum(w * observable_values(obs, z)))


def density_matrix(state: GeometricState) -> DensityMatrix:
    """Barycenter ``rho_ab = P_q[Z^a conj(Z^b)]``."""
    w, z = masses_and_points(state)
    return DensityMatrix(weighted_outer_sum(w, z))


def povm_statistics(state: GeometricState, povm: Povm) -> np.ndarray:
    """Outcome probabilities ``Tr(rho^q E_j)``; they see q only through rho^q."""
    _check_dim(state, povm.dim)
    rho = density_matrix(state).matrix
    probs = np.array([np.real(np.trace(rho @ e)) for e in povm.effects])
    return np.clip(probs, 0.0, None)


def eigen_mixture(rho: DensityMatrix, cutoff: float = 1e-12) -> DeltaMixture:
    """Delta mixture on the eigenvectors of ``rho`` weighted by its eigenvalues.

    Eigenvalues at or below ``cutoff`` are dropped. For degenerate spectra the
    eigenbasis returned by LAPACK is used as-is.
    """
    w, v = rho.eigh()
    keep = w > cutoff
    return DeltaMixture(w[keep], v[:, keep].T)


def batch_standard_error(values: np.ndarray, weights: np.ndarray | None = None, n_batches: int = 50) -> np.ndarray:
    """Batch-means standard error of a (weighted) mean along axis 0.

    Contiguous batches absorb serial correlation of Markov-chain samples as
    long as each batch is much longer than the autocorrelation time.
    """
    values = np.asarray(values)
    n = values.shape[0]
    if weights is None:
        weights = np.full(n, 1.0 / n)
    b = min(n_batches, n // 2)
    if b < 2:
        return np.full(values.shape[1:], np.inf)
    edges = np.linspace(0, n, b + 1).astype(int)
    means = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        w = weights[lo:hi]
        means.append(np.tensordot(w, values[lo:hi], axes=(0, 0)) / w.sum())
    means = np.array(means)
    return np.std(means, axis=0, ddof=1) / math.sqrt(b)


def expectation_with_error(state: SampleEnsemble, obs: Observable, n_batches: int = 50) -> tuple[float, float]:
    """Sample estimate of ``P_q[O]`` and its batch-means standard error."""
    _check_dim(state, obs.dim)
    w, z = masses_and_points(state)
    vals = observable_values(obs, z)
    return float(np.sum(w * vals)), float(batch_standard_error(vals, w, n_batches))


def density_matrix_with_error(state: SampleEnsemble, n_batches: int = 50) -> tuple[DensityMatrix, np.ndarray]:
    """Sample barycenter and entry-wise standard errors.

    The error array is complex: its real (imaginary) part is the standard
    error of the real (imaginary) part of each entry.
    """
    w, z = masses_and_points(state)
    outer = z[:, :, None] * z[:, None, :].conj()
    se_re = batch_standard_error(outer.real, w, n_batches)
    se_im = batch_standard_error(outer.imag, w, n_batches)
    return density_matrix(state), se_re + 1j * se_im


def gaussian_inverse_density(rho: DensityMatrix, bins_p: int = 512, bins_phase: int = 512) -> GridDensity:
    """Grid state ``q(Z) ~ exp(-1/2 <psi(Z)| rho^-1 |psi(Z)>)`` normalized by quadrature.

    A smooth distribution over the whole manifold built from a full-rank
    ``rho``; its barycenter shares the eigenbasis of ``rho`` but not, in
    general, its eigenvalues.
    """
    inv = np.linalg.inv(rho.matrix)
    inv = 0.5 * (inv + inv.conj().T)
    grid = fs_uniform_grid(rho.dim, bins_p, bins_phase)

    def shape(z):
        e = np.einsum("ni,ij,nj->n", z.conj(), inv, z).real
        return np.exp(-0.5 * (e - e.min()))

    return GridDensity.from_function(grid, shape)


def uniform_grid_density(dim: int, bins_p: int, bins_phase: int) -> GridDensity:
    grid = fs_uniform_grid(dim, bins_p, bins_phase)
    return GridDensity(grid, np.ones(len(grid)))


def fs_uniform_samples(dim: int, n: int, seed: int) -> SampleEnsemble:
    """Independent draws from the normalized Fubini-Study measure."""
    rng = np.random.default_rng(seed)
    return SampleEnsemble(random_amplitudes(dim, n, rng), rng_seed=seed, info={"sampler": "haar"})


@dataclass(frozen=True, eq=False)
class Histogram:
    """Probability mass per (p, nu) bin for a qubit geometric state."""

    p_edges: np.ndarray
    nu_edges: np.ndarray
    mass: np.ndarray  # shape (bins_p, bins_phase)

    def rows(self):
        for i in range(self.mass.shape[0]):
            for j in range(self.mass.shape[1]):
                yield (
                    self.p_edges[i],
                    self.p_edges[i + 1],
                    self.nu_edges[j],
                    self.nu_edges[j + 1],
                    self.mass[i, j],
                )

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("p_lo,p_hi,nu_lo,nu_hi,mass\n")
        for row in self.rows():
            buf.write(",".join(repr(float(x)) for x in row) + "\n")
        return buf.getvalue()

    def bin_of(self, p: float, nu: float) -> tuple[int, int]:
        i = min(int(p * (len(self.p_edges) - 1)), len(self.p_edges) - 2)
        j = int((nu % TWO_PI) / TWO_PI * (len(self.nu_edges) - 1)) % (len(self.nu_edges) - 1)
        return i, j


def histogram(state: GeometricState, bins_p: int, bins_phase: int) -> Histogram:
    """Bin the mass of a qubit state on the (p, nu) rectangle.

    Phase bins are half-open on [0, 2*pi); p = 1 falls into the last bin.
    Grid cells contribute their whole mass to the bin holding their node.
    """
    if state.dim != 2:
        raise DimensionError(f"histograms are defined for qubits only, got D = {state.dim}")
    if bins_p < 1 or bins_phase < 1:
        raise InvariantError("bin counts must be >= 1")
    w, z = masses_and_points(state)
    if isinstance(state, GridDensity):
        p, nu = state.grid.p_nodes[:, 0], state.grid.nu_nodes[:, 0]
    else:
        pp, nn = prob_phase_arrays(z)
        p, nu = pp[:, 0], nn[:, 0]
    i = np.clip((p * bins_p).astype(int), 0, bins_p - 1)
    j = np.floor(nu / TWO_PI * bins_phase).astype(int) % bins_phase
    if isinstance(state, SampleEnsemble) and state.weights is None:
        counts = np.zeros((bins_p, bins_phase), dtype=np.int64)
        np.add.at(counts, (i, j), 1)
        mass = counts / len(state)
    else:
        mass = np.zeros((bins_p, bins_phase))
        np.add.at(mass, (i, j), w)
    return Histogram(
        np.linspace(0.0, 1.0, bins_p + 1),
        np.linspace(0.0, TWO_PI, bins_phase + 1),
        mass,
    )
