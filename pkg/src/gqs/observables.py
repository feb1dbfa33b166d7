"""Observables, POVMs and density matrices as quadratic functions on CP^{D-1}.

Matrices are stored in the usual operator convention (row index = bra index)
and a point ``Z`` is evaluated as ``conj(Z)^T M Z = <psi(Z)|M|psi(Z)>``.
Writing the same real number as ``sum O_ab Z^a conj(Z)^b`` requires
``O_ab = M_ba``; callers never need that transposed form.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionError, InvariantError, PovmError
from .manifold import PureStatePoint

HERMITIAN_TOL = 1e-12
POVM_TOL = 1e-10
DENSITY_TOL = 1e-10
IMAG_TOL = 1e-12


def _as_square(matrix, name: str) -> np.ndarray:
    m = np.array(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvariantError(f"{name} must be a square matrix, got shape {m.shape}")
    return m


def _hermitian_defect(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


def _frozen_hermitian(m: np.ndarray) -> np.ndarray:
    m = 0.5 * (m + m.conj().T)
    m.setflags(write=False)
    return m


@dataclass(frozen=True, eq=False)
class Observable:
    """Hermitian operator; ``matrix`` is symmetrized and frozen on construction."""

    matrix: np.ndarray

    def __post_init__(self):
        m = _as_square(self.matrix, "observable")
        defect = _hermitian_defect(m)
        if defect > HERMITIAN_TOL:
            raise InvariantError(f"observable is not Hermitian (max |M - M^dag| = {defect:.3g})")
        object.__setattr__(self, "matrix", _frozen_hermitian(m))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __add__(self, other: "Observable") -> "Observable":
        return Observable(self.matrix + other.matrix)

    def __mul__(self, scalar: float) -> "Observable":
        return Observable(float(scalar) * self.matrix)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite matrix.

    ``atol`` loosens the trace and eigenvalue checks for Monte Carlo estimates.
    """

    matrix: np.ndarray
    atol: float = DENSITY_TOL

    def __post_init__(self):
        m = _as_square(self.matrix, "density matrix")
        defect = _hermitian_defect(m)
        if defect > self.atol:
            raise InvariantError(f"density matrix is not Hermitian (defect {defect:.3g})")
        m = _frozen_hermitian(m)
        tr = float(np.trace(m).real)
        if abs(tr - 1.0) > self.atol:
            raise InvariantError(f"density matrix trace is {tr!r}, expected 1")
        lo = float(np.linalg.eigvalsh(m)[0])
        if lo < -self.atol:
            raise InvariantError(f"density matrix has negative eigenvalue {lo:.3g}")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def eigh(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigenvalues in descending order with matching column eigenvectors."""
        w, v = np.linalg.eigh(self.matrix)
        return w[::-1], v[:, ::-1]

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))


@dataclass(frozen=True, eq=False)
class Povm:
    """Validated list of effects; build through :func:`validate_povm`."""

    effects: tuple[np.ndarray, ...]

    @property
    def dim(self) -> int:
        return self.effects[0].shape[0]

    def __len__(self) -> int:
        return len(self.effects)


def validate_povm(effects: Sequence) -> Povm:
    """Check Hermiticity, positivity and completeness, in that order.

    Raises :class:`PovmError` naming the first violated condition.
    """
    if len(effects) == 0:
        raise PovmError("POVM has no effects")
    mats = [_as_square(e, "effect") for e in effects]
    dim = mats[0].shape[0]
    for j, m in enumerate(mats):
        if m.shape[0] != dim:
            raise PovmError(f"effect {j} has dimension {m.shape[0]}, expected {dim}")
    for j, m in enumerate(mats):
        if _hermitian_defect(m) > POVM_TOL:
            raise PovmError(f"effect {j} is not Hermitian")
    mats = [_frozen_hermitian(m) for m in mats]
    for j, m in enumerate(mats):
        lo = float(np.linalg.eigvalsh(m)[0])
        if lo < -POVM_TOL:
            raise PovmError(f"effect {j} is not positive semidefinite (min eigenvalue {lo:.3g})")
    total = sum(mats)
    err = float(np.max(np.abs(total - np.eye(dim))))
    if err > POVM_TOL:
        raise PovmError(f"effects do not sum to the identity (max deviation {err:.3g})")
    return Povm(tuple(mats))


def quadratic_form(matrix: np.ndarray, amplitudes: np.ndarray) -> np.ndarray:
    """``<psi|M|psi>`` for each row of ``amplitudes`` (shape ``(n, D)``), complex."""
    z = np.atleast_2d(amplitudes)
    return np.einsum("ni,ij,nj->n", z.conj(), matrix, z)


def _real_or_raise(values: np.ndarray, scale: float) -> np.ndarray:
    resid = float(np.max(np.abs(values.imag))) if values.size else 0.0
    if resid > IMAG_TOL * max(1.0, scale):
        raise InvariantError(f"quadratic form has imaginary residue {resid:.3g}")
    return values.real


def observable_values(obs: Observable, amplitudes: np.ndarray) -> np.ndarray:
    """Vectorized :func:`eval_observable` over a stack of normalized amplitudes."""
    z = np.atleast_2d(amplitudes)
    if z.shape[1] != obs.dim:
        raise DimensionError(f"observable has dim {obs.dim}, points have dim {z.shape[1]}")
    scale = float(np.max(np.abs(obs.matrix))) if obs.matrix.size else 1.0
    return _real_or_raise(quadratic_form(obs.matrix, z), scale)


def eval_observable(obs: Observable, point: PureStatePoint) -> float:
    """Expectation ``<psi(Z)|O|psi(Z)>`` of ``obs`` at a single point."""
    if point.dim != obs.dim:
        raise DimensionError(f"observable has dim {obs.dim}, point has dim {point.dim}")
    return float(observable_values(obs, point.amplitudes)[0])


def povm_probabilities_point(povm: Povm, point: PureStatePoint) -> np.ndarray:
    if point.dim != povm.dim:
        raise DimensionError(f"POVM has dim {povm.dim}, point has dim {point.dim}")
    z = point.amplitudes[None, :]
    probs = np.array([_real_or_raise(quadratic_form(e, z), 1.0)[0] for e in povm.effects])
    return np.clip(probs, 0.0, None)


def pauli(label: str) -> Observable:
    """Single-qubit Pauli observable ``"I"``, ``"X"``, ``"Y"`` or ``"Z"``."""
    mats = {
        "I": [[1, 0], [0, 1]],
        "X": [[0, 1], [1, 0]],
        "Y": [[0, -1j], [1j, 0]],
        "Z": [[1, 0], [0, -1]],
    }
    return Observable(np.array(mats[label.upper()], dtype=complex))
