"""Golden checks for the reference qubit example.

The example is a two-atom delta mixture on CP^1 and a smooth Gaussian-like
state built from the same density matrix. Each check records the measured
value, the reference value (three decimals) and the tolerance. Checks
marked ``gated=False`` are measurements that are reported but do not affect
the exit status.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from .gstate import (
    DeltaMixture,
    density_matrix,
    expectation,
    gaussian_inverse_density,
    histogram,
    povm_statistics,
)
from .manifold import PureStatePoint, ProbPhasePoint, from_prob_phase, prob_phase_arrays, to_prob_phase
from .observables import DensityMatrix, pauli, povm_probabilities_point, validate_povm

REF_TOL = 2e-3

Z_PLUS = np.array([0.657, 0.418 + 0.627j])
Z_MINUS = np.array([0.754, -0.364 - 0.546j])
W_PLUS, W_MINUS = 0.864, 0.136
COORDS_PLUS = (0.568, 0.983)
COORDS_MINUS = (0.432, 4.124)
RHO_00, RHO_11, RHO_01 = 0.45, 0.55, 0.2 - 0.3j


def example_delta_state() -> DeltaMixture:
    """The two-atom state: 0.864 at Z_+ and 0.136 at Z_-."""
    return DeltaMixture.from_atoms([(W_PLUS, PureStatePoint(Z_PLUS)), (W_MINUS, PureStatePoint(Z_MINUS))])


def example_rho() -> DensityMatrix:
    return DensityMatrix(np.array([[RHO_00, RHO_01], [np.conj(RHO_01), RHO_11]]))


@dataclass(frozen=True)
class CheckResult:
    name: str
    source: str
    measured: object
    expected: object
    tol: float
    passed: bool
    gated: bool = True

    def line(self) -> str:
        status = ("PASS" if self.passed else "FAIL") if self.gated else "REPORT"
        return (
            f"{status} {self.name}: measured={_fmt(self.measured)} "
            f"expected={_fmt(self.expected)} tol={self.tol:g} [{self.source}]"
        )


def _fmt(x) -> str:
    if isinstance(x, str):
        return repr(x)
    arr = np.atleast_1d(np.asarray(x))
    if np.iscomplexobj(arr):
        parts = [f"{v.real:.6g}{v.imag:+.6g}i" for v in arr.ravel()]
    else:
        parts = [f"{v:.6g}" for v in arr.ravel()]
    return parts[0] if len(parts) == 1 else "(" + ", ".join(parts) + ")"


def _close(measured, expected, tol) -> bool:
    return bool(np.max(np.abs(np.asarray(measured) - np.asarray(expected))) <= tol)


def _phase_close(measured, expected, tol) -> bool:
    d = (np.asarray(measured) - np.asarray(expected) + math.pi) % (2 * math.pi) - math.pi
    return bool(np.max(np.abs(d)) <= tol)


@dataclass(frozen=True)
class Check:
    name: str
    source: str
    run: Callable[["Context"], CheckResult]
    gated: bool = True


@dataclass
class Context:
    rho_override: np.ndarray | None = None
    q1_bins: int = 512

    def delta(self) -> DeltaMixture:
        return example_delta_state()

    def rho_matrix(self) -> np.ndarray:
        if self.rho_override is not None:
            return np.asarray(self.rho_override, dtype=complex)
        return density_matrix(self.delta()).matrix

    @cached_property
    def q1(self):
        return gaussian_inverse_density(example_rho(), self.q1_bins, self.q1_bins)


def _result(check: Check, measured, expected, tol, passed) -> CheckResult:
    return CheckResult(check.name, check.source, measured, expected, tol, passed, check.gated)


def _coords_check(z, expected):
    def run(ctx, check):
        c = to_prob_phase(PureStatePoint(z))
        m = (float(c.probs[0]), float(c.phases[0]))
        ok = abs(m[0] - expected[0]) <= REF_TOL and _phase_close(m[1], expected[1], REF_TOL)
        return _result(check, m, expected, REF_TOL, ok)

    return run


def _from_coords(ctx, check):
    z = from_prob_phase(ProbPhasePoint([COORDS_PLUS[0]], [COORDS_PLUS[1]])).amplitudes
    return _result(check, z, Z_PLUS, REF_TOL, _close(z, Z_PLUS, REF_TOL))


def _povm_point(ctx, check):
    povm = validate_povm([np.diag([1.0, 0.0]), np.diag([0.0, 1.0])])
    m = povm_probabilities_point(povm, PureStatePoint(Z_PLUS))
    exp = (1 - COORDS_PLUS[0], COORDS_PLUS[0])
    return _result(check, m, exp, REF_TOL, _close(m, exp, REF_TOL))


def _pure_functional(ctx, check):
    z = PureStatePoint(Z_PLUS)
    single = DeltaMixture.from_atoms([(1.0, z)])
    m, e = [], []
    for label in "XYZ":
        obs = pauli(label)
        m.append(expectation(single, obs))
        e.append(float(np.real(z.amplitudes.conj() @ obs.matrix @ z.amplitudes)))
    return _result(check, m, e, 1e-12, _close(m, e, 1e-12))


def _rho_entry(i, j, expected):
    def run(ctx, check):
        m = ctx.rho_matrix()[i, j]
        return _result(check, m, expected, REF_TOL, _close(m, expected, REF_TOL))

    return run


def _eigen_weights(ctx, check):
    w = np.sort(np.linalg.eigvalsh(ctx.rho_matrix()))[::-1]
    exp = (W_PLUS, W_MINUS)
    return _result(check, w, exp, REF_TOL, _close(w, exp, REF_TOL))


def _eigen_coords(ctx, check):
    rho = ctx.rho_matrix()
    w, v = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    v = v[:, ::-1]
    p, nu = prob_phase_arrays(v.T)
    m = (float(p[0, 0]), float(nu[0, 0]), float(p[1, 0]), float(nu[1, 0]))
    exp = COORDS_PLUS + COORDS_MINUS
    ok = _close(m[0::2], exp[0::2], REF_TOL) and _phase_close(m[1::2], exp[1::2], REF_TOL)
    return _result(check, m, exp, REF_TOL, ok)


def _delta_histogram(ctx, check):
    h = histogram(ctx.delta(), 10, 10)
    i_p, j_p = h.bin_of(*COORDS_PLUS)
    i_m, j_m = h.bin_of(*COORDS_MINUS)
    m = (h.mass[i_p, j_p], h.mass[i_m, j_m], h.mass.sum() - h.mass[i_p, j_p] - h.mass[i_m, j_m])
    exp = (W_PLUS, W_MINUS, 0.0)
    return _result(check, m, exp, REF_TOL, _close(m, exp, REF_TOL))


def _smooth_histogram(ctx, check):
    h = histogram(ctx.q1, 20, 20)
    m = float(h.mass.min())
    return _result(check, m, "> 0 in all 400 bins", 0.0, m > 0)


def _q1_rho(ctx, check):
    m = density_matrix(ctx.q1).matrix
    exp = example_rho().matrix
    return _result(check, m.ravel(), exp.ravel(), REF_TOL, _close(m, exp, REF_TOL))


def _q1_q2_povm(ctx, check):
    rng = np.random.default_rng(2020)
    a = [np.outer(v, v.conj()) for v in rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))]
    s = sum(a)
    w, u = np.linalg.eigh(s)
    s_inv_half = (u / np.sqrt(w)) @ u.conj().T
    povm = validate_povm([s_inv_half @ x @ s_inv_half for x in a])
    m = povm_statistics(ctx.q1, povm)
    e = povm_statistics(ctx.delta(), povm)
    return _result(check, m, e, REF_TOL, _close(m, e, REF_TOL))


CHECKS: list[Check] = [
    Check("example.coords_plus", "eigenvector (p+, phi+)", _coords_check(Z_PLUS, COORDS_PLUS)),
    Check("example.coords_minus", "eigenvector (p-, phi-)", _coords_check(Z_MINUS, COORDS_MINUS)),
    Check("example.from_coords", "amplitudes of Z+", _from_coords),
    Check("example.povm_point", "basis probabilities at Z+", _povm_point),
    Check("pure.functional", "pure-state functional P0[O] = O(Z0)", _pure_functional),
    Check("example.rho_00", "barycenter rho_00", _rho_entry(0, 0, RHO_00)),
    Check("example.rho_11", "barycenter rho_11", _rho_entry(1, 1, RHO_11)),
    Check("example.rho_01", "barycenter rho_01", _rho_entry(0, 1, RHO_01)),
    Check("example.eigenvalues", "eigenvalues rho+/rho-", _eigen_weights),
    Check("example.eigen_coords", "eigenvector coordinates", _eigen_coords),
    Check("example.delta_histogram", "two-atom histogram", _delta_histogram),
    Check("example.smooth_histogram", "smooth-state histogram", _smooth_histogram),
    Check("example.smooth_rho", "smooth state vs rho (measured)", _q1_rho, gated=False),
    Check("example.smooth_vs_atoms_povm", "smooth vs two-atom POVM statistics (measured)", _q1_q2_povm, gated=False),
]


def run_checks(rho_override: np.ndarray | None = None, q1_bins: int = 512) -> list[CheckResult]:
    ctx = Context(rho_override=rho_override, q1_bins=q1_bins)
    out = []
    for check in CHECKS:
        res = check.run(ctx, check)
        out.append(res)
    return out
