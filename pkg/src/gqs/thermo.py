"""System-environment reduction of a bipartite pure state.

For ``|psi_SE> = sum_{k,a} psi[k, a] |s_k>|e_a>`` each environment basis
label ``a`` carries a weight ``p_a = sum_k |psi[k, a]|^2`` and a conditional
system state ``chi_a = psi[:, a] / sqrt(p_a)``. The labeled family both
reproduces the system's reduced state and, because the weights are real,
rebuilds the global state exactly:

    psi[k, a] = sqrt(p_a) <s_k|chi_a>
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvariantError
from .gstate import DeltaMixture, Histogram, histogram, weighted_outer_sum
from .manifold import gauge_fix
from .observables import DensityMatrix

NORM_TOL = 1e-12
MAX_ENV_DIM = 4096
MAX_TOTAL_DIM = 1 << 16


@dataclass(frozen=True, eq=False)
class BipartitePureState:
    psi: np.ndarray  # shape (d_s, d_e)

    def __post_init__(self):
        psi = np.array(self.psi, dtype=complex)
        if psi.ndim != 2:
            raise InvariantError(f"psi must be a d_S x d_E matrix, got shape {psi.shape}")
        norm = float(np.sum(np.abs(psi) ** 2))
        if abs(norm - 1.0) > NORM_TOL:
            raise InvariantError(f"bipartite state has norm {norm!r}, expected 1")
        psi.setflags(write=False)
        object.__setattr__(self, "psi", psi)

    @classmethod
    def from_vector(cls, vec, d_s: int) -> "BipartitePureState":
        """Reshape a flat system-major vector (index ``k * d_E + a``)."""
        vec = np.asarray(vec, dtype=complex).reshape(-1)
        if vec.size % d_s:
            raise InvariantError(f"vector of length {vec.size} does not split with d_S = {d_s}")
        return cls(vec.reshape(d_s, -1))

    @property
    def d_s(self) -> int:
        return self.psi.shape[0]

    @property
    def d_e(self) -> int:
        return self.psi.shape[1]


@dataclass(frozen=True, eq=False)
class LabeledEnsemble:
    """Environment-labeled ensemble ``{(p_a, chi_a, a)}``.

    ``states`` keeps the conditional states with the phases produced by the
    reduction (not gauge-fixed). Labels whose weight vanishes are listed in
    ``empty_labels`` and have no entry.
    """

    weights: np.ndarray
    states: np.ndarray  # shape (n_entries, d_s)
    labels: np.ndarray
    d_e: int
    empty_labels: tuple[int, ...] = field(default=())

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if abs(w.sum() - 1.0) > NORM_TOL or np.any(w <= 0):
            raise InvariantError("ensemble weights must be positive and sum to 1")
        labels = np.asarray(self.labels, dtype=int)
        if labels.size != w.size or self.states.shape[0] != w.size:
            raise InvariantError("weights, states and labels must have equal length")
        if np.any(labels < 0) or np.any(labels >= self.d_e):
            raise InvariantError(f"labels must lie in [0, {self.d_e})")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "labels", labels)

    @property
    def d_s(self) -> int:
        return self.states.shape[1]

    def gauge_fixed_states(self) -> np.ndarray:
        return gauge_fix(self.states)

    def system_density_matrix(self) -> DensityMatrix:
        return DensityMatrix(weighted_outer_sum(self.weights, self.states))


def reduce(state: BipartitePureState) -> LabeledEnsemble:
    psi = state.psi
    p = np.sum(np.abs(psi) ** 2, axis=0)
    nonzero = p > 0
    labels = np.flatnonzero(nonzero)
    chi = (psi[:, nonzero] / np.sqrt(p[nonzero])).T
    return LabeledEnsemble(
        weights=p[nonzero],
        states=chi,
        labels=labels,
        d_e=state.d_e,
        empty_labels=tuple(int(a) for a in np.flatnonzero(~nonzero)),
    )


def geometric_state_of(ensemble: LabeledEnsemble) -> DeltaMixture:
    """One atom per environment label, at the gauge-fixed conditional state.

    Atoms that coincide on the manifold are kept separate.
    """
    return DeltaMixture(ensemble.weights, ensemble.states)


def reconstruct_global(ensemble: LabeledEnsemble, d_e: int | None = None) -> BipartitePureState:
    d_e = ensemble.d_e if d_e is None else d_e
    if np.any(ensemble.labels >= d_e):
        raise InvariantError(f"label {int(ensemble.labels.max())} out of range for d_E = {d_e}")
    psi = np.zeros((ensemble.d_s, d_e), dtype=complex)
    psi[:, ensemble.labels] = (np.sqrt(ensemble.weights)[:, None] * ensemble.states).T
    return BipartitePureState(psi)


def environment_density_matrix(ensemble: LabeledEnsemble) -> DensityMatrix:
    """``rho^E[a, b] = sqrt(p_a p_b) <chi_b|chi_a>`` with empty labels as zero rows."""
    amps = np.sqrt(ensemble.weights)[:, None] * ensemble.states
    gram = amps @ amps.conj().T  # [i, j] = sqrt(p_i p_j) <chi_j|chi_i>
    rho = np.zeros((ensemble.d_e, ensemble.d_e), dtype=complex)
    rho[np.ix_(ensemble.labels, ensemble.labels)] = gram
    return DensityMatrix(rho)


def haar_random_state(d_s: int, d_e: int, rng: np.random.Generator) -> BipartitePureState:
    """Unitarily invariant random global state from normalized complex Gaussians."""
    g = rng.standard_normal((d_s, d_e)) + 1j * rng.standard_normal((d_s, d_e))
    return BipartitePureState(g / np.linalg.norm(g))


def trace_distance_to_mixed(rho: DensityMatrix) -> float:
    w = np.linalg.eigvalsh(rho.matrix)
    return 0.5 * float(np.sum(np.abs(w - 1.0 / rho.dim)))


@dataclass(frozen=True, eq=False)
class ScalingRow:
    d_e: int
    distances: np.ndarray  # one per seed, in seed order
    histogram: Histogram | None  # pooled over seeds; qubit systems only

    @property
    def mean_distance(self) -> float:
        return float(np.mean(self.distances))

    @property
    def stderr(self) -> float:
        n = self.distances.size
        return float(np.std(self.distances, ddof=1) / math.sqrt(n)) if n > 1 else float("nan")


def scaling_seed(seed: int, index: int) -> int:
    return seed + index


def environment_scaling_report(
    d_s: int,
    d_e_values,
    seed: int,
    n_seeds: int = 100,
    bins_p: int = 10,
    bins_phase: int = 10,
) -> list[ScalingRow]:
    """Geometric state of the system for Haar-random global states of growing d_E.

    Run ``i`` at every d_E draws from generator seed ``seed + i``, so rows are
    paired seed by seed. The trace distance of rho^S from the maximally mixed
    state is recorded per run; for qubits the histogram of the system's
    geometric state is pooled (averaged) over runs.
    """
    rows = []
    for d_e in d_e_values:
        d_e = int(d_e)
        if d_e < 1 or d_e > MAX_ENV_DIM:
            raise InvariantError(f"d_E must lie in [1, {MAX_ENV_DIM}], got {d_e}")
        if d_s * d_e > MAX_TOTAL_DIM:
            raise InvariantError(f"d_S * d_E = {d_s * d_e} exceeds {MAX_TOTAL_DIM}")
        dists = np.empty(n_seeds)
        pooled = np.zeros((bins_p, bins_phase)) if d_s == 2 else None
        hist = None
        for i in range(n_seeds):
            rng = np.random.default_rng(scaling_seed(seed, i))
            ens = reduce(haar_random_state(d_s, d_e, rng))
            dists[i] = trace_distance_to_mixed(ens.system_density_matrix())
            if pooled is not None:
                hist = histogram(geometric_state_of(ens), bins_p, bins_phase)
                pooled += hist.mass
        if pooled is not None:
            hist = Histogram(hist.p_edges, hist.nu_edges, pooled / n_seeds)
        rows.append(ScalingRow(d_e, dists, hist))
    return rows
