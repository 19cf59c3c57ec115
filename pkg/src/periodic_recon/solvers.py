"""Closed-form solvers for quadratic data-fidelity problems on the native space.

Two estimators share the basis ``phi_m = h_gamma * nu_m``:

* the representer solution ``f = sum a_m phi_m + sum b_n e_{k_n}`` of
  ``min sum |y_m - <f, nu_m>|^2 + lam ||L f||^2``, which leaves the
  null space unpenalized and enforces ``P^T a = 0``;
* the gamma-regularized solution ``f = sum d_m phi_m`` of
  ``min sum |y_m - <f, nu_m>|^2 + lam ||L_gamma f||^2`` with
  ``d = (G + lam I)^{-1} y``. With ``lam = sigma0^2`` and ``gamma = gamma0``
  this is the MMSE estimator of a Gaussian bridge.

Both saddle-point and gamma systems are solved with the null-space part of
the Gram matrix split off (``G = G_range + P P^H / gamma^2``) so that neither
``gamma -> 0`` nor ``gamma -> inf`` loses precision.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSystemError, InvalidInputError, InvalidParameterError
from .rkhs import TIME, SystemMatrices
from .spectral import OperatorSpec, PeriodicSignal, frequencies

__all__ = [
    "REPRESENTER",
    "GAMMA_REGULARIZED",
    "ReconstructionModel",
    "solve_representer",
    "solve_gamma_regularized",
    "verify_spline",
    "reconstruct_signal",
    "objective",
    "ConditioningWarning",
]

REPRESENTER = "representer"
GAMMA_REGULARIZED = "gamma_regularized"

CONSTRAINT_TOL = 1e-10
IMAG_TOL = 1e-10
WARN_CONDITION = 1e12
SINGULAR_CONDITION = 1e16


class ConditioningWarning(RuntimeWarning):
    pass


@dataclass(frozen=True, eq=False)
class ReconstructionModel:
    """A solved estimator.

    ``a_coeffs`` holds ``a`` (representer) or ``d`` (gamma-regularized).
    ``b_coeffs`` is empty for the gamma-regularized estimator; its null-space
    Fourier coefficients are kept in ``null_component`` instead, which for the
    representer solution coincides with ``b``.
    """

    kind: str
    a_coeffs: np.ndarray
    b_coeffs: np.ndarray
    null_component: np.ndarray
    system: SystemMatrices
    lam: float
    condition: float

    @property
    def operator(self) -> OperatorSpec:
        return self.system.operator

    @property
    def gamma(self) -> float:
        return self.system.gamma

    @property
    def basis(self) -> list[PeriodicSignal]:
        return self.system.basis

    @property
    def n_coef(self) -> int:
        return self.system.n_coef


def _check_inputs(sys: SystemMatrices, y, lam) -> np.ndarray:
    if not (isinstance(lam, (int, float, np.floating, np.integer)) and math.isfinite(lam) and lam > 0):
        raise InvalidParameterError(f"lambda must be positive and finite, got {lam}")
    y = np.asarray(y)
    if y.ndim != 1 or y.size != sys.size:
        raise InvalidInputError(f"expected {sys.size} measurements, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise InvalidInputError("measurements must be finite")
    if sys.measurements.is_real:
        if np.iscomplexobj(y):
            if np.max(np.abs(y.imag)) > IMAG_TOL * max(1.0, float(np.max(np.abs(y)))):
                raise InvalidInputError("real-valued functionals need real measurements")
            y = y.real
        return y.astype(float)
    return y.astype(complex)


def _solve(A: np.ndarray, rhs: np.ndarray, what: str) -> tuple[np.ndarray, float]:
    """Dense LU solve with a condition check; ``A`` may be indefinite."""
    cond = float(np.linalg.cond(A))
    if not math.isfinite(cond) or cond > SINGULAR_CONDITION:
        raise DegenerateSystemError(f"{what} is numerically singular", cond)
    if cond > WARN_CONDITION:
        warnings.warn(f"{what} is ill-conditioned (condition {cond:.3g})", ConditioningWarning, stacklevel=3)
    try:
        x = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise DegenerateSystemError(f"{what} is singular", cond) from exc
    return x, cond


def _realify(x: np.ndarray, sys: SystemMatrices, what: str) -> np.ndarray:
    """Drop the imaginary residue of coefficients that must be real."""
    if not sys.measurements.is_real:
        return x
    scale = max(1.0, float(np.max(np.abs(x)))) if x.size else 1.0
    if x.size and np.max(np.abs(x.imag)) > IMAG_TOL * scale:
        raise DegenerateSystemError(
            f"{what} has imaginary residue {np.max(np.abs(x.imag)):.3g}", float("nan")
        )
    return x.real.copy()


def solve_representer(sys: SystemMatrices, y, lam: float) -> ReconstructionModel:
    """Solve ``[[G + lam I, P], [P^H, 0]] [a; b] = [y; 0]``."""
    y = _check_inputs(sys, y, lam)
    M = sys.size
    P = sys.p_matrix
    n0 = P.shape[1]
    A = np.zeros((M + n0, M + n0), dtype=complex)
    A[:M, :M] = sys.gram_range + lam * np.eye(M)
    A[:M, M:] = P
    A[M:, :M] = P.conj().T
    rhs = np.concatenate([y, np.zeros(n0)]).astype(complex)
    x, cond = _solve(A, rhs, "representer system")
    a = _realify(x[:M], sys, "representer weights")
    b = x[M:].copy()
    _freeze(a, b)
    return ReconstructionModel(REPRESENTER, a, b, b, sys, float(lam), cond)


def solve_gamma_regularized(sys: SystemMatrices, y, lam: float) -> ReconstructionModel:
    """Solve ``(G + lam I) d = y``.

    For ``gamma >= 1`` the system is solved as written. For smaller ``gamma``
    the equivalent augmented system
    ``[[G_range + lam I, P], [P^H, -gamma^2 I]] [d; c] = [y; 0]`` is solved
    instead, which avoids forming ``P P^H / gamma^2``. In both cases ``c``
    holds the null-space coefficients of the reconstruction.
    """
    y = _check_inputs(sys, y, lam)
    M = sys.size
    P = sys.p_matrix
    n0 = P.shape[1]
    g2 = sys.gamma**2
    if g2 >= 1.0 or n0 == 0:
        d, cond = _solve(sys.gram + lam * np.eye(M), y, "gamma-regularized system")
        c = (P.conj().T @ d) / g2
    else:
        A = np.zeros((M + n0, M + n0), dtype=complex)
        A[:M, :M] = sys.gram_range + lam * np.eye(M)
        A[:M, M:] = P
        A[M:, :M] = P.conj().T
        A[M:, M:] = -g2 * np.eye(n0)
        rhs = np.concatenate([y, np.zeros(n0)]).astype(complex)
        x, cond = _solve(A, rhs, "gamma-regularized system")
        d, c = x[:M], x[M:]
    d = _realify(np.asarray(d, dtype=complex), sys, "gamma-regularized weights")
    c = np.asarray(c, dtype=complex).copy()
    b = np.zeros(0, dtype=complex)
    _freeze(d, b, c)
    return ReconstructionModel(GAMMA_REGULARIZED, d, b, c, sys, float(lam), cond)


def _freeze(*arrays):
    for arr in arrays:
        arr.setflags(write=False)


def reconstruction_coeffs(model: ReconstructionModel) -> np.ndarray:
    """Fourier coefficients of the reconstruction as a plain array."""
    sys = model.system
    coeffs = (model.a_coeffs @ sys.functionals) * sys.kernel.range_coeffs
    coeffs = coeffs.astype(complex)
    coeffs[sys.operator.null_positions(sys.n_coef)] = model.null_component
    return coeffs


def reconstruct_signal(model: ReconstructionModel) -> PeriodicSignal:
    """``f = sum a_m phi_m + sum b_n e_{k_n}`` in the coefficient domain."""
    coeffs = reconstruction_coeffs(model)
    return PeriodicSignal(coeffs, real=PeriodicSignal(coeffs).is_hermitian())


def verify_spline(model: ReconstructionModel, meas=None) -> float:
    """Largest deviation of ``|L[k]|^2 f[k]`` from ``sum a_m exp(-j 2 pi k t_m)``.

    A representer solution for time samples is a periodic spline whose
    image under ``L* L`` is ``sum a_m Sha(. - t_m)``; in the Fourier domain
    that is the identity checked here. Null-space frequencies are included:
    there the left side vanishes and the check reduces to ``P^T a = 0``.
    """
    if model.kind != REPRESENTER:
        raise InvalidInputError("spline check applies to representer solutions only")
    meas = model.system.measurements if meas is None else meas
    if meas.kind != TIME:
        raise InvalidInputError("spline check needs time-sample measurements")
    K = model.n_coef
    lhat2 = np.abs(model.operator.frequency_response(K)) ** 2
    f = reconstruction_coeffs(model)
    ks = frequencies(K)
    innovation = model.a_coeffs @ np.exp(-2j * np.pi * np.outer(meas.locations, ks))
    return float(np.max(np.abs(lhat2 * f - innovation)))


def objective(sys: SystemMatrices, f: PeriodicSignal, y, lam: float, gamma: float | None = None) -> float:
    """Quadratic data term plus ``lam ||L f||^2``.

    With ``gamma`` given the penalty is ``lam ||L_gamma f||^2``, which adds
    ``gamma^2`` times the null-space energy of ``f``.
    """
    y = np.asarray(y)
    residual = y - np.conj(sys.functionals) @ f.coeffs
    lhat2 = np.abs(sys.operator.frequency_response(f.n_coef)) ** 2
    penalty = float(np.sum(lhat2 * np.abs(f.coeffs) ** 2))
    if gamma is not None:
        penalty += gamma**2 * float(np.sum(np.abs(f.coeffs[sys.operator.null_positions(f.n_coef)]) ** 2))
    return float(np.sum(np.abs(residual) ** 2)) + lam * penalty
