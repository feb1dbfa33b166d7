"""Geometric canonical ensemble ``q(Z) = exp(-beta h(Z)) / Q_beta``.

``h(Z) = <psi(Z)|H|psi(Z)>`` is the energy expectation at a point. The
ensemble is realized either on a quadrature grid (D <= 4) or by a Metropolis
random walk in probability + phase coordinates, where the Fubini-Study volume
is flat and the target density needs no Jacobian.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InvariantError, ResolutionError
from .gstate import GridDensity, SampleEnsemble, density_matrix, density_matrix_with_error
from .manifold import (
    TWO_PI,
    FsGrid,
    PureStatePoint,
    amplitudes_from_prob_phase,
    fs_uniform_grid,
)
from .observables import DensityMatrix, Observable, eval_observable, quadratic_form

DEFAULT_STEP_P = 0.1
DEFAULT_STEP_PHASE = 0.5
DEFAULT_BURN_IN = 0.1
REFINEMENT_RTOL = 1e-3


class SamplerWarning(UserWarning):
    """Metropolis acceptance rate is outside the useful range."""


@dataclass(frozen=True, eq=False)
class CanonicalSpec:
    hamiltonian: Observable
    beta: float

    def __post_init__(self):
        beta = float(self.beta)
        if not math.isfinite(beta) or beta < 0:
            raise InvariantError(f"beta must be finite and >= 0, got {self.beta!r}")
        object.__setattr__(self, "beta", beta)

    @property
    def dim(self) -> int:
        return self.hamiltonian.dim


def energy(spec: CanonicalSpec, point: PureStatePoint) -> float:
    return eval_observable(spec.hamiltonian, point)


def _energies(spec: CanonicalSpec, amplitudes: np.ndarray) -> np.ndarray:
    return quadratic_form(spec.hamiltonian.matrix, amplitudes).real


def _boltzmann_on(grid: FsGrid, spec: CanonicalSpec) -> tuple[np.ndarray, float]:
    """Shifted Boltzmann weights on the grid nodes and the shift ``beta * h_min``."""
    h = _energies(spec, grid.amplitudes())
    shift = spec.beta * float(h.min())
    return np.exp(-(spec.beta * h - shift)), shift


def _q_on(grid: FsGrid, spec: CanonicalSpec) -> float:
    boltz, shift = _boltzmann_on(grid, spec)
    return float(np.sum(boltz * grid.volumes)) * math.exp(-shift)


def _check_refinement(spec, bins_p, bins_phase, rtol, q_fine):
    if bins_p < 2 or bins_phase < 2:
        return
    coarse = fs_uniform_grid(spec.dim, bins_p // 2, max(1, bins_phase // 2))
    q_coarse = _q_on(coarse, spec)
    rel = abs(q_fine - q_coarse) / abs(q_fine)
    if rel > rtol:
        raise ResolutionError(
            f"partition function changed by {rel:.2e} (> {rtol:g}) between "
            f"{bins_p // 2} and {bins_p} bins; refine the grid"
        )


def partition_function(
    spec: CanonicalSpec,
    bins_p: int = 256,
    bins_phase: int | None = None,
    rtol: float = REFINEMENT_RTOL,
    check: bool = True,
) -> float:
    """``Q_beta`` by midpoint quadrature on the simplex x torus grid.

    With ``check`` the grid is also halved and a :class:`ResolutionError` is
    raised if the two estimates differ by more than ``rtol`` relative.
    """
    bins_phase = min(bins_p, 256) if bins_phase is None else bins_phase
    grid = fs_uniform_grid(spec.dim, bins_p, bins_phase)
    q = _q_on(grid, spec)
    if check:
        _check_refinement(spec, bins_p, bins_phase, rtol, q)
    return q


def canonical_grid_state(
    spec: CanonicalSpec,
    bins_p: int = 256,
    bins_phase: int | None = None,
    rtol: float = REFINEMENT_RTOL,
    check: bool = True,
) -> GridDensity:
    bins_phase = min(bins_p, 256) if bins_phase is None else bins_phase
    grid = fs_uniform_grid(spec.dim, bins_p, bins_phase)
    boltz, shift = _boltzmann_on(grid, spec)
    if check:
        q = float(np.sum(boltz * grid.volumes)) * math.exp(-shift)
        _check_refinement(spec, bins_p, bins_phase, rtol, q)
    return GridDensity(grid, boltz)


def _fold_unit(x: np.ndarray) -> np.ndarray:
    """Reflect into [0, 1] (mirror boundaries, any overshoot)."""
    y = np.mod(x, 2.0)
    return np.where(y > 1.0, 2.0 - y, y)


def canonical_sampler(
    spec: CanonicalSpec,
    n_samples: int,
    seed: int,
    step_p: float = DEFAULT_STEP_P,
    step_phase: float = DEFAULT_STEP_PHASE,
    burn_in: float = DEFAULT_BURN_IN,
    n_chains: int = 1,
) -> SampleEnsemble:
    """Metropolis sampling of the geometric canonical ensemble.

    Chains walk in (p, nu): Gaussian steps in each probability, mirrored at 0
    and 1, are rejected when they leave the simplex; phases wrap on the torus.
    ``burn_in`` is the fraction of the kept length discarded up front, per
    chain. Chains run one after another from a single seeded generator and
    are concatenated in chain order.
    """
    if n_samples < 1:
        raise InvariantError("n_samples must be >= 1")
    if n_chains < 1:
        raise InvariantError("n_chains must be >= 1")
    if step_p <= 0 or step_phase <= 0:
        raise InvariantError("step sizes must be positive")
    rng = np.random.default_rng(seed)
    d = spec.dim
    k = d - 1
    per_chain = -(-n_samples // n_chains)
    n_burn = int(math.ceil(burn_in * per_chain))
    n_steps = n_burn + per_chain
    H = spec.hamiltonian.matrix.tolist()
    beta = spec.beta

    def h_of(p, nu):
        z = [complex(math.sqrt(max(0.0, 1.0 - sum(p))), 0.0)]
        z += [math.sqrt(pa) * complex(math.cos(na), math.sin(na)) for pa, na in zip(p, nu)]
        return sum(
            (z[a].conjugate() * H[a][b] * z[b]).real for a in range(d) for b in range(d)
        )

    start_p = rng.dirichlet(np.ones(d), size=n_chains)[:, 1:].tolist()
    start_nu = rng.uniform(0.0, TWO_PI, size=(n_chains, k)).tolist()
    kept_p = np.empty((n_chains, per_chain, k))
    kept_nu = np.empty((n_chains, per_chain, k))
    accepted = 0
    for c in range(n_chains):
        p, nu = start_p[c], start_nu[c]
        h = h_of(p, nu)
        dp = (rng.standard_normal((n_steps, k)) * step_p).tolist()
        dnu = (rng.standard_normal((n_steps, k)) * step_phase).tolist()
        logu = np.log(rng.uniform(size=n_steps)).tolist()
        out_p, out_nu = kept_p[c], kept_nu[c]
        for t in range(n_steps):
            p_new = []
            for pa, da in zip(p, dp[t]):
                x = (pa + da) % 2.0
                p_new.append(2.0 - x if x > 1.0 else x)
            ok = sum(p_new) <= 1.0
            if ok:
                nu_new = [(na + da) % TWO_PI for na, da in zip(nu, dnu[t])]
                h_new = h_of(p_new, nu_new)
                ok = logu[t] < -beta * (h_new - h)
                if ok:
                    p, nu, h = p_new, nu_new, h_new
            if t >= n_burn:
                out_p[t - n_burn] = p
                out_nu[t - n_burn] = nu
                accepted += ok

    rate = accepted / (per_chain * n_chains)
    if not 0.1 <= rate <= 0.9:
        factor = 2.0 if rate > 0.9 else 0.5
        warnings.warn(
            f"Metropolis acceptance rate {rate:.3f} outside [0.1, 0.9]; "
            f"try step_p={step_p * factor:g}, step_phase={step_phase * factor:g}",
            SamplerWarning,
            stacklevel=2,
        )
    flat_p = kept_p.reshape(-1, k)[:n_samples]
    flat_nu = kept_nu.reshape(-1, k)[:n_samples]
    info = {
        "sampler": "metropolis",
        "acceptance_rate": rate,
        "burn_in": n_burn,
        "n_chains": n_chains,
        "step_p": step_p,
        "step_phase": step_phase,
        "beta": beta,
    }
    return SampleEnsemble(amplitudes_from_prob_phase(flat_p, flat_nu), rng_seed=seed, info=info)


def gibbs_density_matrix(spec: CanonicalSpec) -> DensityMatrix:
    """``exp(-beta H) / Tr exp(-beta H)`` via the spectral decomposition."""
    e, v = np.linalg.eigh(spec.hamiltonian.matrix)
    w = np.exp(-spec.beta * (e - e[0]))
    w /= w.sum()
    return DensityMatrix((v * w) @ v.conj().T)


def _populations(rho: np.ndarray, basis: np.ndarray) -> np.ndarray:
    return np.real(np.einsum("ia,ij,ja->a", basis.conj(), rho, basis))


def _commutator_norm(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a @ b - b @ a)))


@dataclass(frozen=True, eq=False)
class ComparisonReport:
    rho_geom: DensityMatrix
    rho_gibbs: DensityMatrix
    energies: np.ndarray
    populations_geom: np.ndarray
    populations_gibbs: np.ndarray
    max_abs_diff: float
    commutator_geom: float
    commutator_gibbs: float
    method: str
    stderr: np.ndarray | None = None

    @property
    def population_gap(self) -> np.ndarray:
        return self.populations_geom - self.populations_gibbs


def compare_geometric_gibbs(
    spec: CanonicalSpec,
    bins_p: int = 256,
    bins_phase: int | None = None,
    n_samples: int | None = None,
    seed: int = 0,
    rtol: float = REFINEMENT_RTOL,
) -> ComparisonReport:
    """Contrast the geometric ensemble's barycenter with the Gibbs state.

    Uses grid quadrature unless ``n_samples`` is given, in which case the
    Metropolis sampler provides the geometric side together with standard
    errors. Populations are reported in the eigenbasis of H, ascending energy.
    """
    stderr = None
    if n_samples is None:
        rho_geom = density_matrix(canonical_grid_state(spec, bins_p, bins_phase, rtol=rtol))
        method = "grid"
    else:
        ens = canonical_sampler(spec, n_samples, seed)
        rho_geom, stderr = density_matrix_with_error(ens)
        method = "samples"
    rho_gibbs = gibbs_density_matrix(spec)
    H = spec.hamiltonian.matrix
    e, v = np.linalg.eigh(H)
    return ComparisonReport(
        rho_geom=rho_geom,
        rho_gibbs=rho_gibbs,
        energies=e,
        populations_geom=_populations(rho_geom.matrix, v),
        populations_gibbs=_populations(rho_gibbs.matrix, v),
        max_abs_diff=float(np.max(np.abs(rho_geom.matrix - rho_gibbs.matrix))),
        commutator_geom=_commutator_norm(rho_geom.matrix, H),
        commutator_gibbs=_commutator_norm(rho_gibbs.matrix, H),
        method=method,
        stderr=stderr,
    )
