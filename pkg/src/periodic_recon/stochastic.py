"""Periodic white noise, Gaussian bridges and the noisy measurement model.

Random draws come from counter-based Philox substreams keyed by
``(seed, trial, stream)``, so that a trial can be reproduced on its own and
different parts of one trial (sample layout, innovation, measurement noise)
never share a sequence. Gaussian deviates use numpy's ziggurat sampler
(``Generator.standard_normal``), which is deterministic for a given key.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, InvalidParameterError, NotAdmissibleError, UnsupportedOperatorError
from .rkhs import FOURIER, TIME, MeasurementSet, build_kernel, rkhs_admissible
from .spectral import OperatorSpec, PeriodicSignal

__all__ = [
    "LAYOUT_STREAM",
    "NOISE_STREAM",
    "MEASUREMENT_STREAM",
    "substream",
    "NoiseDraw",
    "BridgeDraw",
    "MeasurementDraw",
    "draw_white_noise",
    "draw_bridge",
    "unit_measurement_noise",
    "measure",
    "closed_form_fourier_mse",
    "nmse",
    "nmse_standard_error",
    "expected_energy",
    "tail_energy",
]

LAYOUT_STREAM = 0
NOISE_STREAM = 1
MEASUREMENT_STREAM = 2


def substream(seed: int, trial: int = 0, stream: int = 0) -> np.random.Generator:
    """Independent generator for one ``(trial, stream)`` pair of a run."""
    if seed < 0 or trial < 0 or stream < 0:
        raise InvalidParameterError("seed, trial and stream must be non-negative")
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(trial), int(stream)))
    return np.random.Generator(np.random.Philox(ss))


def _as_generator(rng) -> tuple[np.random.Generator, int | None]:
    if isinstance(rng, np.random.Generator):
        return rng, None
    if isinstance(rng, (int, np.integer)):
        return substream(int(rng)), int(rng)
    raise InvalidParameterError(f"expected a numpy Generator or an integer seed, got {type(rng).__name__}")


@dataclass(frozen=True, eq=False)
class NoiseDraw:
    """Fourier coefficients of one realization of periodic Gaussian white noise."""

    n_coef: int
    coeffs: np.ndarray
    seed: int | None = None

    @property
    def signal(self) -> PeriodicSignal:
        return PeriodicSignal(self.coeffs, real=True)


@dataclass(frozen=True, eq=False)
class BridgeDraw:
    signal: PeriodicSignal
    operator: OperatorSpec
    gamma0: float
    noise: NoiseDraw


@dataclass(frozen=True, eq=False)
class MeasurementDraw:
    """``y = clean + epsilon`` where ``clean`` holds the noiseless measurements."""

    y: np.ndarray
    sigma0_sq: float
    epsilon: np.ndarray
    clean: np.ndarray


def draw_white_noise(n_coef: int, rng) -> NoiseDraw:
    """Hermitian-symmetric coefficients with ``w[0] ~ N(0, 1)`` and, for ``k > 0``,
    independent real and imaginary parts ``~ N(0, 1/2)``."""
    if n_coef < 1:
        raise InvalidParameterError("n_coef must be positive")
    gen, seed = _as_generator(rng)
    z = gen.standard_normal(2 * n_coef + 1)
    pos = (z[1:n_coef + 1] + 1j * z[n_coef + 1:]) / math.sqrt(2.0)
    c = np.empty(2 * n_coef + 1, dtype=complex)
    c[n_coef] = z[0]
    c[n_coef + 1:] = pos
    c[:n_coef] = np.conj(pos[::-1])
    c.setflags(write=False)
    return NoiseDraw(n_coef, c, seed)


def bridge_filter(op: OperatorSpec, gamma0: float, n_coef: int) -> np.ndarray:
    """Multipliers mapping white noise to the bridge: ``1/L[k]`` off the null space, ``1/gamma0`` on it."""
    lhat = op.frequency_response(n_coef)
    null = op.null_mask(n_coef)
    out = np.empty(lhat.size, dtype=complex)
    out[~null] = 1.0 / lhat[~null]
    out[null] = 1.0 / gamma0
    return out


def draw_bridge(op: OperatorSpec, gamma0: float, n_coef: int, rng=None, noise: NoiseDraw | None = None) -> BridgeDraw:
    """Synthesize a Gaussian bridge by filtering white noise with ``L_gamma0^{-1}``.

    Pass ``noise`` to reuse an existing innovation (common random numbers);
    otherwise it is drawn from ``rng``.
    """
    if not (gamma0 > 0 and math.isfinite(gamma0)):
        raise InvalidParameterError(f"gamma0 must be positive and finite, got {gamma0}")
    if noise is None:
        if rng is None:
            raise InvalidParameterError("need either a random stream or a noise draw")
        noise = draw_white_noise(n_coef, rng)
    elif noise.n_coef != n_coef:
        raise InvalidInputError("noise band limit does not match n_coef")
    s = PeriodicSignal(noise.coeffs * bridge_filter(op, gamma0, n_coef), real=True)
    return BridgeDraw(s, op, float(gamma0), noise)


def unit_measurement_noise(meas: MeasurementSet, rng) -> np.ndarray:
    """Measurement noise with ``E|eps_m|^2 = 1``, scaled later by ``sigma0``.

    Time samples (and other real functionals) get i.i.d. ``N(0, 1)``. Fourier
    samples get complex noise with real and imaginary parts ``~ N(0, 1/2)``,
    conjugated between ``k`` and ``-k``; the ``k = 0`` sample is real.
    """
    gen, _ = _as_generator(rng)
    M = meas.size
    if meas.kind == FOURIER:
        eps = np.zeros(M, dtype=complex)
        where = {int(k): m for m, k in enumerate(meas.indices)}
        positive = sorted(k for k in where if k > 0)
        z = gen.standard_normal(2 * len(positive) + 1)
        if 0 in where:
            eps[where[0]] = z[0]
        for i, k in enumerate(positive):
            v = (z[1 + 2 * i] + 1j * z[2 + 2 * i]) / math.sqrt(2.0)
            eps[where[k]] = v
            eps[where[-k]] = np.conj(v)
        return eps
    if meas.is_real:
        return gen.standard_normal(M)
    z = gen.standard_normal(2 * M)
    return (z[:M] + 1j * z[M:]) / math.sqrt(2.0)


def measure(
    bridge: BridgeDraw,
    meas: MeasurementSet,
    sigma0_sq: float,
    rng=None,
    unit_noise: np.ndarray | None = None,
    functionals: np.ndarray | None = None,
) -> MeasurementDraw:
    """Noisy measurements ``y = <s, nu> + eps`` with ``E|eps_m|^2 = sigma0_sq``."""
    if not (sigma0_sq >= 0 and math.isfinite(sigma0_sq)):
        raise InvalidParameterError(f"sigma0_sq must be non-negative, got {sigma0_sq}")
    s = bridge.signal
    if meas.kind == TIME:
        ok, _ = rkhs_admissible(bridge.operator, s.n_coef)
        if not ok:
            raise NotAdmissibleError(f"point samples of a {bridge.operator.name} bridge are not defined")
    if functionals is None:
        clean = meas.apply(s)
    else:
        clean = np.conj(functionals) @ s.coeffs
        if meas.is_real:
            clean = clean.real
    if unit_noise is None:
        if rng is None:
            raise InvalidParameterError("need either a random stream or a noise realization")
        unit_noise = unit_measurement_noise(meas, rng)
    eps = math.sqrt(sigma0_sq) * np.asarray(unit_noise)
    return MeasurementDraw(clean + eps, float(sigma0_sq), eps, clean)


def expected_energy(op: OperatorSpec, gamma0: float, n_coef: int) -> float:
    """``E ||s||^2 = sum_k h_gamma0[k]`` for the band-limited bridge."""
    return float(np.sum(build_kernel(op, gamma0, n_coef).coeffs))


def tail_energy(op: OperatorSpec, n_coef: int, span: int = 100) -> float:
    """Bridge energy ``sum_{|k| > n_coef} 1/|L[k]|^2`` lost to truncation.

    Summed explicitly up to ``span * n_coef``; for polynomial operators the
    remainder is added from the leading-term integral.
    """
    ks = np.arange(n_coef + 1, span * n_coef + 1)
    mags = np.abs(np.asarray(op.response(ks), dtype=complex)) ** 2
    total = 2.0 * float(np.sum(1.0 / mags))
    deg = op.degree
    if deg is not None:
        if deg < 1:
            return math.inf
        lead = op.coefficients[deg]
        upper = span * n_coef
        total += 2.0 / (lead**2 * (2 * math.pi) ** (2 * deg) * (2 * deg - 1) * upper ** (2 * deg - 1))
    return total


def closed_form_fourier_mse(op: OperatorSpec, sampled: MeasurementSet, lam: float, sigma0_sq: float, n_coef: int) -> float:
    """Exact MSE of the regularized estimator from Fourier samples.

    Sampled frequencies contribute ``h (lam^2 + h sigma0^2) / (h + lam)^2``;
    every unsampled frequency up to the band limit contributes its full
    energy ``h``. Needs an invertible operator so that ``gamma`` plays no role.
    """
    if op.n0:
        raise UnsupportedOperatorError(f"{op.name} has a nontrivial null space")
    if sampled.kind != FOURIER:
        raise InvalidInputError("closed form needs Fourier samples")
    if not (lam > 0):
        raise InvalidParameterError(f"lambda must be positive, got {lam}")
    if not (sigma0_sq >= 0):
        raise InvalidParameterError(f"sigma0_sq must be non-negative, got {sigma0_sq}")
    h = build_kernel(op, 1.0, n_coef).coeffs
    on = sampled.indices + n_coef
    hs = h[on]
    sampled_part = float(np.sum(hs * (lam**2 + hs * sigma0_sq) / (hs + lam) ** 2))
    return sampled_part + float(np.sum(h) - np.sum(hs))


def nmse(errors, energies) -> float:
    """``sum(errors) / sum(energies)``."""
    e = np.asarray(errors, dtype=float).ravel()
    s = np.asarray(energies, dtype=float).ravel()
    if e.size == 0 or e.size != s.size:
        raise InvalidInputError("need equally many errors and energies, at least one")
    if np.any(e < 0) or np.any(s < 0):
        raise InvalidInputError("errors and energies must be non-negative")
    total = float(np.sum(s))
    if total <= 0:
        raise InvalidInputError("total signal energy is zero")
    return float(np.sum(e)) / total


def nmse_standard_error(errors, energies) -> float:
    """Delta-method standard error of the ratio estimator :func:`nmse`."""
    e = np.asarray(errors, dtype=float).ravel()
    s = np.asarray(energies, dtype=float).ravel()
    n = e.size
    if n < 2:
        return math.nan
    ratio = nmse(e, s)
    z = e - ratio * s
    return float(math.sqrt(np.sum(z**2) / (n * (n - 1))) / np.mean(s))
