"""Hybrid continuous-discrete states and their decomposition.

A state ``psi_s(x)`` of N continuous coordinates and a ``d^M``-level discrete
register is rewritten as ``f(x) |x> |q(x)>`` with

    f(x)   = sqrt(sum_s |psi_s(x)|^2) e^{i theta_0(x)}
    p_s(x) = |psi_s(x)|^2 / sum_l |psi_l(x)|^2
    phi_s(x) = theta_s(x) - theta_0(x)

so that ``x -> Z(x) = (sqrt(p_s) e^{i phi_s})_s`` embeds the region into
CP^{d^M - 1} and ``|f(x)|^2 dx`` pushes forward to a geometric state there.
Continuous integrals are sums over a user-supplied tensor-product grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import InvariantError
from .gstate import DeltaMixture, SampleEnsemble, weighted_outer_sum
from .manifold import TWO_PI, PureStatePoint, gauge_fix, wrap_phase
from .observables import DensityMatrix

NORM_TOL = 1e-10


def _cell_widths(axis: np.ndarray) -> np.ndarray:
    """Voronoi widths of sample points, with end cells mirrored outward."""
    if axis.size == 1:
        return np.ones(1)
    mids = 0.5 * (axis[1:] + axis[:-1])
    lo = axis[0] - (mids[0] - axis[0])
    hi = axis[-1] + (axis[-1] - mids[-1])
    return np.diff(np.concatenate([[lo], mids, [hi]]))


@dataclass(frozen=True, eq=False)
class RegionGrid:
    """Tensor-product sample grid over a region of R^N.

    Points are ordered row-major (last axis fastest); ``cell_measures`` are the
    products of per-axis widths.
    """

    axes: tuple[np.ndarray, ...]

    def __post_init__(self):
        axes = tuple(np.asarray(a, dtype=float).reshape(-1) for a in self.axes)
        if not axes:
            raise InvariantError("region grid needs at least one axis")
        for i, a in enumerate(axes):
            if a.size == 0 or np.any(np.diff(a) <= 0):
                raise InvariantError(f"axis {i} must be non-empty and strictly increasing")
            a.setflags(write=False)
        object.__setattr__(self, "axes", axes)

    @classmethod
    def uniform(cls, lows: Sequence[float], highs: Sequence[float], shape: Sequence[int]) -> "RegionGrid":
        """Midpoint grid on the box ``prod [lo, hi]``."""
        axes = []
        for lo, hi, n in zip(lows, highs, shape):
            if not hi > lo or n < 1:
                raise InvariantError(f"degenerate axis [{lo}, {hi}] with {n} points")
            h = (hi - lo) / n
            axes.append(lo + h * (np.arange(n) + 0.5))
        return cls(tuple(axes))

    @property
    def n_dims(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.size for a in self.axes)

    @property
    def n_points(self) -> int:
        return int(np.prod(self.shape))

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    def cell_measures(self) -> np.ndarray:
        widths = [_cell_widths(a) for a in self.axes]
        mesh = np.meshgrid(*widths, indexing="ij")
        return np.prod(np.stack([m.reshape(-1) for m in mesh]), axis=0)


@dataclass(frozen=True, eq=False)
class HybridState:
    """Amplitudes ``psi[x, s]`` on the grid, normalized: ``sum dx |psi|^2 = 1``."""

    region: RegionGrid
    psi: np.ndarray

    def __post_init__(self):
        psi = np.array(self.psi, dtype=complex)
        if psi.ndim != 2 or psi.shape[0] != self.region.n_points:
            raise InvariantError(
                f"psi must have shape ({self.region.n_points}, levels), got {psi.shape}"
            )
        norm = float(np.sum(self.region.cell_measures() * np.sum(np.abs(psi) ** 2, axis=1)))
        if abs(norm - 1.0) > NORM_TOL:
            raise InvariantError(f"hybrid state has norm {norm!r}, expected 1")
        psi.setflags(write=False)
        object.__setattr__(self, "psi", psi)

    @classmethod
    def normalized(cls, region: RegionGrid, psi) -> "HybridState":
        psi = np.asarray(psi, dtype=complex)
        norm = np.sum(region.cell_measures() * np.sum(np.abs(psi) ** 2, axis=1))
        if norm <= 0:
            raise InvariantError("cannot normalize a zero hybrid state")
        return cls(region, psi / math.sqrt(norm))

    @property
    def n_levels(self) -> int:
        return self.psi.shape[1]


@dataclass(frozen=True, eq=False)
class HybridDecomposition:
    """Fields ``f(x)``, ``p_s(x)`` and ``phi_s(x)`` with ``phi_0 = 0``."""

    region: RegionGrid
    f: np.ndarray
    p: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        f = np.array(self.f, dtype=complex).reshape(-1)
        p = np.array(self.p, dtype=float)
        phi = np.array(self.phi, dtype=float)
        n = self.region.n_points
        if f.size != n or p.shape[0] != n or p.shape != phi.shape:
            raise InvariantError("decomposition fields do not match the grid")
        norm = float(np.sum(self.region.cell_measures() * np.abs(f) ** 2))
        if abs(norm - 1.0) > NORM_TOL:
            raise InvariantError(f"integral of |f|^2 is {norm!r}, expected 1")
        if np.any(p < 0) or np.max(np.abs(p.sum(axis=1) - 1.0)) > 1e-12:
            raise InvariantError("p_s(x) must be a probability vector at every x")
        if np.any(phi < 0) or np.any(phi >= TWO_PI) or np.any(phi[:, 0] != 0):
            raise InvariantError("phases must lie in [0, 2pi) with phi_0 = 0")
        for a in (f, p, phi):
            a.setflags(write=False)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "phi", phi)

    @property
    def n_levels(self) -> int:
        return self.p.shape[1]

    def discrete_states(self) -> np.ndarray:
        """``q_s(x) = sqrt(p_s(x)) e^{i phi_s(x)}``, shape ``(n_points, levels)``."""
        return np.sqrt(self.p) * np.exp(1j * self.phi)

    def probability_weights(self) -> np.ndarray:
        """``|f(x)|^2 dx`` per grid point."""
        return self.region.cell_measures() * np.abs(self.f) ** 2


def decompose(state: HybridState) -> HybridDecomposition:
    psi = state.psi
    levels = state.n_levels
    mag2 = np.abs(psi) ** 2
    norm2 = mag2.sum(axis=1)
    theta = np.where(np.abs(psi) > 0, np.angle(psi), 0.0)
    zero = norm2 == 0

    safe = np.where(zero, 1.0, norm2)
    f = np.sqrt(norm2) * np.exp(1j * theta[:, 0])
    p = np.where(zero[:, None], 1.0 / levels, mag2 / safe[:, None])
    phi = wrap_phase(theta - theta[:, :1])
    phi[:, 0] = 0.0
    phi[zero] = 0.0
    return HybridDecomposition(state.region, np.where(zero, 0.0, f), p, phi)


def reconstruct(dec: HybridDecomposition) -> HybridState:
    return HybridState(dec.region, dec.f[:, None] * dec.discrete_states())


def reduced_density_matrix(dec: HybridDecomposition) -> DensityMatrix:
    """Trace over the continuous factor: ``integral dx |f|^2 |q(x)><q(x)|``."""
    return DensityMatrix(weighted_outer_sum(dec.probability_weights(), dec.discrete_states()))


@dataclass(frozen=True, eq=False)
class Embedding:
    """The map ``x -> Z(x)`` sampled on the grid (gauge-fixed amplitudes)."""

    region: RegionGrid
    amplitudes: np.ndarray

    def __call__(self, index: int) -> PureStatePoint:
        return PureStatePoint(self.amplitudes[index])


def embedding(dec: HybridDecomposition) -> Embedding:
    z = gauge_fix(dec.discrete_states())
    z.setflags(write=False)
    return Embedding(dec.region, z)


def pushforward_measure(dec: HybridDecomposition) -> DeltaMixture:
    """Exact pushforward of ``|f|^2 dx`` as one atom per grid point of nonzero weight."""
    w = dec.probability_weights()
    keep = w > 0
    w = w[keep] / w[keep].sum()
    return DeltaMixture(w, embedding(dec).amplitudes[keep])


def pushforward(dec: HybridDecomposition, n_samples: int, seed: int) -> SampleEnsemble:
    """Monte Carlo pushforward: draw grid points from ``|f|^2 dx`` and map them.

    No inverse of the embedding is needed, so non-injective maps are fine.
    """
    if n_samples < 1:
        raise InvariantError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    w = dec.probability_weights()
    idx = rng.choice(w.size, size=n_samples, p=w / w.sum())
    return SampleEnsemble(
        embedding(dec).amplitudes[idx],
        rng_seed=seed,
        info={"sampler": "pushforward", "grid_points": int(w.size)},
    )


def box_map(x, y, x0: float, x1: float, y0: float, y1: float):
    """Affine box embedding: ``p_1 = (x-x0)/(x1-x0)``, ``phi_1 = 2 pi (y-y0)/(y1-y0)``."""
    p1 = (np.asarray(x, dtype=float) - x0) / (x1 - x0)
    phi1 = TWO_PI * (np.asarray(y, dtype=float) - y0) / (y1 - y0)
    return p1, wrap_phase(phi1)


def box_embedding(
    x0: float,
    x1: float,
    y0: float,
    y1: float,
    shape: tuple[int, int] = (128, 128),
    density: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None,
) -> HybridDecomposition:
    """Spin-1/2 particle in the box ``[x0, x1] x [y0, y1]`` with the affine embedding.

    ``density`` gives an unnormalized ``|f(x, y)|^2``; uniform by default.
    ``f`` is taken real and nonnegative.
    """
    if not (x1 > x0 and y1 > y0):
        raise InvariantError(f"degenerate box [{x0}, {x1}] x [{y0}, {y1}]")
    region = RegionGrid.uniform((x0, y0), (x1, y1), shape)
    pts = region.points()
    fsq = np.ones(region.n_points) if density is None else np.asarray(density(pts[:, 0], pts[:, 1]), float)
    if np.any(fsq < 0):
        raise InvariantError("|f|^2 must be nonnegative")
    fsq = fsq / np.sum(fsq * region.cell_measures())
    p1, phi1 = box_map(pts[:, 0], pts[:, 1], x0, x1, y0, y1)
    p = np.stack([1.0 - p1, p1], axis=1)
    phi = np.stack([np.zeros_like(phi1), phi1], axis=1)
    return HybridDecomposition(region, np.sqrt(fsq).astype(complex), p, phi)


def box_pushforward_density(p1, phi1, fsq_normalized: Callable, x0: float, x1: float, y0: float, y1: float):
    """Analytic pushforward density on CP^1 for the (invertible, affine) box map.

    ``dx dy = A dp dphi / (2 pi)`` and ``dV_FS = dp dphi / 2`` give
    ``q(Z) = |f(x(p), y(phi))|^2 A / pi`` with ``A`` the box area.
    """
    x = x0 + np.asarray(p1) * (x1 - x0)
    y = y0 + np.asarray(phi1) / TWO_PI * (y1 - y0)
    area = (x1 - x0) * (y1 - y0)
    return np.asarray(fsq_normalized(x, y), dtype=float) * area / math.pi


@dataclass(frozen=True)
class CapacityBounds:
    m_full: float
    m_prod: float


def capacity_bounds(n_continuous: int, qudit_dim: int) -> CapacityBounds:
    """Real-valued qudit-count bounds for N continuous coordinates.

    ``m_full = log(N/2 + 1) / log d`` (reach all of CP^{d^M - 1}) and
    ``m_prod = N / (2 (d - 1))`` (reach product states only). Callers floor.
    """
    if int(n_continuous) != n_continuous or n_continuous < 1:
        raise InvariantError(f"N must be a positive integer, got {n_continuous!r}")
    if int(qudit_dim) != qudit_dim or qudit_dim < 2:
        raise InvariantError(f"d must be an integer >= 2, got {qudit_dim!r}")
    n, d = int(n_continuous), int(qudit_dim)
    return CapacityBounds(math.log(n / 2 + 1) / math.log(d), n / (2 * (d - 1)))
