"""Points of the pure-state manifold CP^{D-1} and its Fubini-Study volume.

Two coordinate systems are used throughout:

* homogeneous amplitudes ``Z = (Z^0, ..., Z^{D-1})``, normalized and gauge-fixed;
* probability + phase coordinates ``(p_1..p_{D-1}, nu_1..nu_{D-1})`` with
  ``p_0 = 1 - sum(p)`` and ``nu_0 = 0``.

In the second chart the Fubini-Study volume element is flat,
``dV = prod(dp_a dnu_a) / 2``, which is what makes grid quadrature and
random-walk sampling on the manifold straightforward.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .errors import DimensionError, InvariantError

TWO_PI = 2.0 * math.pi
GAUGE_EPS = 1e-9
NORM_TOL = 1e-12
MAX_GRID_DIM = 4
MAX_GRID_CELLS = 4_000_000
# sub-sample lattice per axis used to place quadrature nodes in clipped cells
_SUBSAMPLES_PER_AXIS = 4


def fs_volume(dim: int) -> float:
    """Total Fubini-Study volume of CP^{dim-1}: pi^(D-1) / (D-1)!."""
    return math.pi ** (dim - 1) / math.factorial(dim - 1)


def wrap_phase(nu):
    """Map phases onto the half-open interval [0, 2*pi)."""
    out = np.mod(nu, TWO_PI)
    # np.mod(-tiny, 2pi) rounds to exactly 2pi
    return np.where(out >= TWO_PI, 0.0, out)


def gauge_fix(amplitudes: np.ndarray) -> np.ndarray:
    """Rotate each state so its first non-negligible component is real and >= 0.

    Works on a single vector of shape ``(D,)`` or a stack ``(n, D)``.
    """
    z = np.asarray(amplitudes, dtype=complex)
    single = z.ndim == 1
    z = np.atleast_2d(z)
    mags = np.abs(z)
    ref = np.argmax(mags > GAUGE_EPS, axis=1)
    zref = z[np.arange(z.shape[0]), ref]
    rmag = np.abs(zref)
    phase = np.where(rmag > 0, np.conj(zref) / np.where(rmag > 0, rmag, 1.0), 1.0)
    out = z * phase[:, None]
    out[np.arange(z.shape[0]), ref] = np.abs(out[np.arange(z.shape[0]), ref])
    return out[0] if single else out


def normalize(amplitudes: np.ndarray) -> np.ndarray:
    z = np.asarray(amplitudes, dtype=complex)
    norms = np.linalg.norm(z, axis=-1, keepdims=True)
    if np.any(norms == 0):
        raise InvariantError("cannot normalize the zero vector")
    return z / norms


@dataclass(frozen=True)
class PureStatePoint:
    """A normalized, gauge-fixed point of CP^{D-1}.

    Any nonzero complex vector is accepted; it is rescaled to unit norm and
    its global phase removed on construction.
    """

    amplitudes: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if z.size < 2:
            raise InvariantError(f"pure states need dimension >= 2, got {z.size}")
        z = gauge_fix(normalize(z))
        z.setflags(write=False)
        object.__setattr__(self, "amplitudes", z)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def projector(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())

    def to_json(self) -> list:
        return [[float(c.real), float(c.imag)] for c in self.amplitudes]

    @classmethod
    def from_json(cls, data) -> "PureStatePoint":
        arr = np.asarray(data, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise InvariantError("pure state must be a list of [re, im] pairs")
        return cls(arr[:, 0] + 1j * arr[:, 1])

    def __eq__(self, other):
        if not isinstance(other, PureStatePoint):
            return NotImplemented
        return self.dim == other.dim and bool(
            np.allclose(self.amplitudes, other.amplitudes, atol=NORM_TOL, rtol=0)
        )

    def __hash__(self):
        return hash(tuple(np.round(self.amplitudes, 9)))


@dataclass(frozen=True)
class ProbPhasePoint:
    """Probability + phase coordinates of a point; index 0 is implicit."""

    probs: np.ndarray
    phases: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float).reshape(-1)
        nu = np.asarray(self.phases, dtype=float).reshape(-1)
        if p.size != nu.size or p.size < 1:
            raise InvariantError("probs and phases must both have D-1 >= 1 entries")
        if np.any(p < -NORM_TOL):
            raise InvariantError(f"negative probability in {p}")
        if p.sum() > 1.0 + NORM_TOL:
            raise InvariantError(f"probabilities sum to {p.sum()} > 1")
        p = np.clip(p, 0.0, 1.0)
        nu = wrap_phase(nu)
        p.setflags(write=False)
        nu.setflags(write=False)
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "phases", nu)

    @property
    def dim(self) -> int:
        return self.probs.size + 1

    @property
    def p0(self) -> float:
        return max(0.0, 1.0 - float(self.probs.sum()))

    def to_json(self) -> dict:
        return {"p": self.probs.tolist(), "nu": self.phases.tolist()}

    @classmethod
    def from_json(cls, data) -> "ProbPhasePoint":
        return cls(np.asarray(data["p"], float), np.asarray(data["nu"], float))


def prob_phase_arrays(amplitudes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized chart map: ``(n, D)`` amplitudes to ``(n, D-1)`` probs and phases.

    Phases are measured relative to component 0, or to the first component
    with modulus above ``GAUGE_EPS`` when ``Z^0`` vanishes.
    """
    z = np.atleast_2d(np.asarray(amplitudes, dtype=complex))
    mags = np.abs(z)
    ref = np.argmax(mags > GAUGE_EPS, axis=1)
    ref_angle = np.angle(z[np.arange(z.shape[0]), ref])
    p = mags[:, 1:] ** 2
    nu = np.angle(z[:, 1:]) - ref_angle[:, None]
    nu = np.where(mags[:, 1:] > 0, wrap_phase(nu), 0.0)
    return p, nu


def amplitudes_from_prob_phase(probs: np.ndarray, phases: np.ndarray) -> np.ndarray:
    """Vectorized inverse chart: ``Z^0 = sqrt(p_0)``, ``Z^a = sqrt(p_a) e^{i nu_a}``."""
    p = np.atleast_2d(np.asarray(probs, dtype=float))
    nu = np.atleast_2d(np.asarray(phases, dtype=float))
    p0 = np.clip(1.0 - p.sum(axis=1), 0.0, None)
    z = np.empty((p.shape[0], p.shape[1] + 1), dtype=complex)
    z[:, 0] = np.sqrt(p0)
    z[:, 1:] = np.sqrt(np.clip(p, 0.0, None)) * np.exp(1j * nu)
    return z


def to_prob_phase(point: PureStatePoint) -> ProbPhasePoint:
    p, nu = prob_phase_arrays(point.amplitudes)
    return ProbPhasePoint(p[0], nu[0])


def from_prob_phase(coords: ProbPhasePoint) -> PureStatePoint:
    return PureStatePoint(amplitudes_from_prob_phase(coords.probs, coords.phases)[0])


def random_amplitudes(dim: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` states from the unitarily invariant (Fubini-Study) measure."""
    z = rng.standard_normal((n, dim)) + 1j * rng.standard_normal((n, dim))
    return gauge_fix(normalize(z))


@dataclass(frozen=True)
class FsCell:
    """Rectangular cell in (p, nu) space together with its Fubini-Study volume."""

    p_lo: np.ndarray
    p_hi: np.ndarray
    nu_lo: np.ndarray
    nu_hi: np.ndarray
    volume: float

    def to_json(self) -> dict:
        return {
            "p_lo": self.p_lo.tolist(),
            "p_hi": self.p_hi.tolist(),
            "nu_lo": self.nu_lo.tolist(),
            "nu_hi": self.nu_hi.tolist(),
            "volume": self.volume,
        }


@dataclass(frozen=True, eq=False)
class FsGrid:
    """Midpoint quadrature grid covering simplex x torus.

    Stored column-wise as arrays; iterate to get ``(ProbPhasePoint, FsCell)`` pairs.
    ``p_nodes`` and ``nu_nodes`` are the quadrature nodes (the cell center, or
    the centroid of the in-simplex part for clipped cells).
    """

    dim: int
    bins_p: int
    bins_phase: int
    p_lo: np.ndarray
    nu_lo: np.ndarray
    p_nodes: np.ndarray
    nu_nodes: np.ndarray
    volumes: np.ndarray
    _amps: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def dp(self) -> float:
        return 1.0 / self.bins_p

    @property
    def dnu(self) -> float:
        return TWO_PI / self.bins_phase

    def __len__(self) -> int:
        return self.volumes.size

    @property
    def total_volume(self) -> float:
        return float(np.sum(self.volumes))

    def amplitudes(self) -> np.ndarray:
        """Gauge-fixed amplitudes at every node, shape ``(n_cells, D)``."""
        if "z" not in self._amps:
            z = amplitudes_from_prob_phase(self.p_nodes, self.nu_nodes)
            z.setflags(write=False)
            self._amps["z"] = z
        return self._amps["z"]

    def cell(self, i: int) -> FsCell:
        return FsCell(
            self.p_lo[i],
            self.p_lo[i] + self.dp,
            self.nu_lo[i],
            self.nu_lo[i] + self.dnu,
            float(self.volumes[i]),
        )

    def __iter__(self) -> Iterator[tuple[ProbPhasePoint, FsCell]]:
        for i in range(len(self)):
            yield ProbPhasePoint(self.p_nodes[i], self.nu_nodes[i]), self.cell(i)


def _irwin_hall_cdf(s: np.ndarray, k: int) -> np.ndarray:
    """Volume fraction of the unit k-cube with coordinate sum <= s."""
    total = np.zeros_like(s)
    for j in range(k + 1):
        total += (-1) ** j * math.comb(k, j) * np.clip(s - j, 0.0, None) ** k
    return np.clip(total / math.factorial(k), 0.0, 1.0)


def _simplex_cells(k: int, bins: int):
    """Probability-cells of the k-dim simplex grid: lower corners, nodes, fractions."""
    h = 1.0 / bins
    idx = np.array(list(itertools.product(range(bins), repeat=k)), dtype=float).reshape(-1, k)
    lo = idx * h
    s = (1.0 - lo.sum(axis=1)) / h
    keep = s > 0
    lo, s = lo[keep], s[keep]
    inside = s >= k - 1e-12
    frac = np.where(inside, 1.0, _irwin_hall_cdf(s, k))
    nodes = lo + 0.5 * h

    clipped = np.flatnonzero(~inside)
    if clipped.size:
        m = _SUBSAMPLES_PER_AXIS
        offs = (np.array(list(itertools.product(range(m), repeat=k)), dtype=float) + 0.5) * (h / m)
        for i in clipped:
            sub = lo[i] + offs
            ok = sub.sum(axis=1) <= 1.0
            if ok.any():
                nodes[i] = sub[ok].mean(axis=0)
            else:
                # centroid of the small corner simplex cut from the cell
                nodes[i] = lo[i] + (1.0 - lo[i].sum()) / (k + 1)
    return lo, nodes, frac


def fs_uniform_grid(dim: int, bins_p: int, bins_phase: int) -> FsGrid:
    """Midpoint grid on CP^{dim-1} in probability + phase coordinates.

    Each of the ``dim - 1`` probability axes is cut into ``bins_p`` intervals
    and each phase axis into ``bins_phase``. Cells straddling the simplex
    face ``sum(p) = 1`` carry only their in-simplex volume.
    """
    if dim < 2:
        raise DimensionError(f"dimension must be >= 2, got {dim}")
    if dim > MAX_GRID_DIM:
        raise DimensionError(
            f"grid quadrature supports D <= {MAX_GRID_DIM}; use sampling for D = {dim}"
        )
    if bins_p < 1 or bins_phase < 1:
        raise InvariantError("bin counts must be >= 1")
    k = dim - 1
    p_lo, p_nodes, frac = _simplex_cells(k, bins_p)
    n_phase = bins_phase**k
    n_cells = p_lo.shape[0] * n_phase
    if n_cells > MAX_GRID_CELLS:
        raise InvariantError(
            f"grid would have {n_cells} cells (limit {MAX_GRID_CELLS}); reduce bins"
        )
    dnu = TWO_PI / bins_phase
    nu_idx = np.array(list(itertools.product(range(bins_phase), repeat=k)), dtype=float).reshape(-1, k)
    nu_lo_cells = nu_idx * dnu
    cell_vol = ((1.0 / bins_p) * dnu / 2.0) ** k

    n_p = p_lo.shape[0]
    return FsGrid(
        dim=dim,
        bins_p=bins_p,
        bins_phase=bins_phase,
        p_lo=np.repeat(p_lo, n_phase, axis=0),
        nu_lo=np.tile(nu_lo_cells, (n_p, 1)),
        p_nodes=np.repeat(p_nodes, n_phase, axis=0),
        nu_nodes=np.tile(nu_lo_cells + 0.5 * dnu, (n_p, 1)),
        volumes=np.repeat(frac * cell_vol, n_phase),
    )
