"""Reproducing kernel, measurement functionals and the Gram / null-space matrices.

The native space of an operator ``L`` carries the inner product

    <f, g>_H = sum_{k not null} f[k] conj(g[k]) |L[k]|^2
               + gamma^2 sum_{k null} f[k] conj(g[k])

whose reproducing kernel has Fourier coefficients ``1/|L[k]|^2`` off the null
space and ``1/gamma^2`` on it.

Measurement convention: functional ``m`` is stored through its Fourier
coefficients ``nu_m[k] = <nu_m, e_k>`` and acts on a signal as
``<f, nu_m> = sum_k f[k] conj(nu_m[k])``. A time sample at ``t_m`` has
``nu_m[k] = exp(-j 2 pi k t_m)``; a Fourier sample at ``k_m`` is a unit vector.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import (
    DegenerateMeasurementsError,
    InvalidInputError,
    InvalidParameterError,
    NotAdmissibleError,
)
from .spectral import OperatorSpec, PeriodicSignal, frequencies

__all__ = [
    "KernelSpec",
    "MeasurementSet",
    "SystemMatrices",
    "rkhs_admissible",
    "build_kernel",
    "kernel_value",
    "kernel_signal",
    "assemble_system",
    "inner_product_HL",
]

TIME, FOURIER, GENERIC = "time", "fourier", "generic"


def rkhs_admissible(op: OperatorSpec, n_coef: int) -> tuple[bool, float]:
    """Whether point evaluations are continuous on the native space of ``op``.

    Returns the decision and the partial sum of ``1/|L[k]|^2`` over the
    non-null frequencies ``|k| <= n_coef``. For polynomial operators the
    decision is analytic (degree >= 1). Custom responses fall back to a
    doubling test on the partial sums.
    """
    def partial(n):
        lhat = op.frequency_response(n)
        keep = ~op.null_mask(n)
        return float(np.sum(1.0 / np.abs(lhat[keep]) ** 2))

    diagnostic = partial(n_coef)
    if op.degree is not None:
        return op.degree >= 1, diagnostic
    doubled = partial(2 * n_coef)
    return (doubled - diagnostic) <= 1e-3 * doubled, diagnostic


@dataclass(frozen=True, eq=False)
class KernelSpec:
    operator: OperatorSpec
    gamma: float
    n_coef: int
    coeffs: np.ndarray

    @property
    def range_coeffs(self) -> np.ndarray:
        """Kernel coefficients with the null-space part removed."""
        c = self.coeffs.copy()
        c[self.operator.null_positions(self.n_coef)] = 0.0
        return c


def build_kernel(op: OperatorSpec, gamma: float, n_coef: int) -> KernelSpec:
    if not (gamma > 0 and math.isfinite(gamma)):
        raise InvalidParameterError(f"gamma must be positive and finite, got {gamma}")
    lhat = op.frequency_response(n_coef)
    null = op.null_mask(n_coef)
    h = np.empty(lhat.size)
    h[~null] = 1.0 / np.abs(lhat[~null]) ** 2
    h[null] = 1.0 / gamma**2
    h.setflags(write=False)
    return KernelSpec(operator=op, gamma=float(gamma), n_coef=n_coef, coeffs=h)


def kernel_value(kernel: KernelSpec, t):
    """``h_gamma(t)``; real and even because the coefficients are."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    K = kernel.n_coef
    h = kernel.coeffs
    pos = np.arange(1, K + 1)
    out = np.empty(t_arr.size)
    flat = t_arr.ravel()
    step = max(1, (1 << 20) // max(K, 1))
    for s in range(0, flat.size, step):
        blk = flat[s:s + step]
        out[s:s + step] = h[K] + 2.0 * np.cos(2 * np.pi * np.outer(blk, pos)) @ h[K + 1:]
    out = out.reshape(t_arr.shape)
    return float(out[0]) if np.ndim(t) == 0 else out


def kernel_signal(kernel: KernelSpec, shift: float = 0.0) -> PeriodicSignal:
    """The shifted kernel ``h_gamma(. - shift)`` as a signal."""
    ks = frequencies(kernel.n_coef)
    return PeriodicSignal(kernel.coeffs * np.exp(-2j * np.pi * ks * shift), real=True)


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    """``M`` linear functionals: time samples, Fourier samples or generic signals."""

    kind: str
    locations: np.ndarray | None = None
    indices: np.ndarray | None = None
    signals: tuple[PeriodicSignal, ...] | None = None

    @classmethod
    def time_samples(cls, locations: Sequence[float]) -> "MeasurementSet":
        t = np.array(locations, dtype=float).ravel()
        if t.size < 1:
            raise InvalidInputError("need at least one sample location")
        if not np.all(np.isfinite(t)) or np.any(t < 0.0) or np.any(t >= 1.0):
            raise InvalidInputError("sample locations must lie in [0, 1)")
        if np.unique(t).size != t.size:
            raise InvalidInputError("sample locations must be pairwise distinct")
        t.setflags(write=False)
        return cls(kind=TIME, locations=t)

    @classmethod
    def fourier_samples(cls, indices: Sequence[int]) -> "MeasurementSet":
        k = np.array(indices, dtype=int).ravel()
        if k.size < 1:
            raise InvalidInputError("need at least one sampled frequency")
        if np.unique(k).size != k.size:
            raise InvalidInputError("sampled frequencies must be distinct")
        if set(k.tolist()) != set((-k).tolist()):
            raise InvalidInputError("sampled frequencies must be closed under negation")
        k.setflags(write=False)
        return cls(kind=FOURIER, indices=k)

    @classmethod
    def generic(cls, signals: Sequence[PeriodicSignal]) -> "MeasurementSet":
        signals = tuple(signals)
        if not signals:
            raise InvalidInputError("need at least one functional")
        if len({s.n_coef for s in signals}) != 1:
            raise InvalidInputError("generic functionals must share a band limit")
        return cls(kind=GENERIC, signals=signals)

    @property
    def size(self) -> int:
        if self.kind == TIME:
            return self.locations.size
        if self.kind == FOURIER:
            return self.indices.size
        return len(self.signals)

    def __len__(self):
        return self.size

    @property
    def is_real(self) -> bool:
        """True when every functional is real-valued (data from real signals is real)."""
        if self.kind == TIME:
            return True
        if self.kind == FOURIER:
            return bool(np.all(self.indices == 0))
        return all(s.real for s in self.signals)

    def functional_coeffs(self, n_coef: int) -> np.ndarray:
        """``(M, 2K+1)`` array of ``nu_m[k]``."""
        ks = frequencies(n_coef)
        if self.kind == TIME:
            return np.exp(-2j * np.pi * np.outer(self.locations, ks))
        if self.kind == FOURIER:
            if np.max(np.abs(self.indices)) > n_coef:
                raise InvalidInputError(f"sampled frequency outside band limit {n_coef}")
            out = np.zeros((self.size, ks.size), dtype=complex)
            out[np.arange(self.size), self.indices + n_coef] = 1.0
            return out
        if self.signals[0].n_coef != n_coef:
            raise InvalidInputError(
                f"generic functionals have band limit {self.signals[0].n_coef}, not {n_coef}"
            )
        return np.vstack([s.coeffs for s in self.signals])

    def apply(self, f: PeriodicSignal) -> np.ndarray:
        """The noiseless measurements ``<f, nu_m>``; real for time samples."""
        values = np.conj(self.functional_coeffs(f.n_coef)) @ f.coeffs
        if self.kind == TIME and f.real:
            return values.real
        return values

    @classmethod
    def from_config(cls, cfg: Mapping[str, Any], n_coef: int | None = None) -> "MeasurementSet":
        kind = cfg.get("kind")
        if kind == TIME:
            return cls.time_samples(cfg["locations"])
        if kind == FOURIER:
            return cls.fourier_samples(cfg["indices"])
        if kind == GENERIC:
            if n_coef is None:
                n_coef = int(cfg.get("n_coef", 0)) or None
            if n_coef is None:
                raise InvalidInputError("generic measurements need a band limit (n_coef)")
            signals = []
            for spec in cfg["signals"]:
                c = {int(k): complex(re_, im_) for k, re_, im_ in
                     zip(spec["k"], spec.get("re", [0.0] * len(spec["k"])),
                         spec.get("im", [0.0] * len(spec["k"])))}
                s = PeriodicSignal.from_mapping(c, n_coef)
                signals.append(PeriodicSignal(s.coeffs, real=s.is_hermitian()))
            return cls.generic(signals)
        raise InvalidInputError(f"unknown measurement kind {kind!r}")

    def to_config(self) -> dict:
        if self.kind == TIME:
            return {"kind": TIME, "locations": self.locations.tolist()}
        if self.kind == FOURIER:
            return {"kind": FOURIER, "indices": self.indices.tolist()}
        sigs = []
        for s in self.signals:
            nz = np.flatnonzero(s.coeffs)
            sigs.append({"k": (nz - s.n_coef).tolist(),
                         "re": s.coeffs[nz].real.tolist(), "im": s.coeffs[nz].imag.tolist()})
        return {"kind": GENERIC, "n_coef": self.signals[0].n_coef, "signals": sigs}

    @classmethod
    def load(cls, path, n_coef: int | None = None) -> "MeasurementSet":
        with open(path) as fh:
            return cls.from_config(json.load(fh), n_coef)


@dataclass(frozen=True, eq=False)
class SystemMatrices:
    """Gram matrix ``G``, null-space matrix ``P`` and the basis ``phi_m = h * nu_m``.

    ``gram_range`` is the Gram matrix of the kernel with its null-space part
    removed, so that ``gram = gram_range + P P^H / gamma^2``. Solvers use the
    split form to stay accurate when ``gamma`` is extreme.
    """

    kernel: KernelSpec
    measurements: MeasurementSet
    functionals: np.ndarray
    gram: np.ndarray
    gram_range: np.ndarray
    p_matrix: np.ndarray

    @property
    def operator(self) -> OperatorSpec:
        return self.kernel.operator

    @property
    def gamma(self) -> float:
        return self.kernel.gamma

    @property
    def n_coef(self) -> int:
        return self.kernel.n_coef

    @property
    def size(self) -> int:
        return self.gram.shape[0]

    @property
    def basis_coeffs(self) -> np.ndarray:
        return self.functionals * self.kernel.coeffs

    @property
    def basis(self) -> list[PeriodicSignal]:
        real = self.measurements.is_real
        return [PeriodicSignal(row, real=real) for row in self.basis_coeffs]

    def with_gamma(self, gamma: float) -> "SystemMatrices":
        """Same measurements, kernel rebuilt for another ``gamma`` without reassembly."""
        kernel = build_kernel(self.kernel.operator, gamma, self.kernel.n_coef)
        P = self.p_matrix
        gram = self.gram_range + (P @ P.conj().T) / gamma**2
        if self.measurements.is_real:
            gram = gram.real
        return SystemMatrices(kernel, self.measurements, self.functionals,
                              _frozen(gram), self.gram_range, P)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def assemble_system(
    kernel: KernelSpec,
    meas: MeasurementSet,
    check_null_space: bool = True,
    functionals: np.ndarray | None = None,
) -> SystemMatrices:
    """Build ``G`` and ``P`` for the given kernel and measurements.

    ``G[m1, m2] = <phi_m2, nu_m1>``; for time samples this is
    ``h_gamma(t_m1 - t_m2)``, for Fourier samples it is diagonal. ``P[m, n] =
    <e_{k_n}, nu_m>``. ``functionals`` may pass a precomputed
    :meth:`MeasurementSet.functional_coeffs` array.
    """
    op = kernel.operator
    K = kernel.n_coef
    if meas.kind == TIME:
        ok, _ = rkhs_admissible(op, K)
        if not ok:
            raise NotAdmissibleError(
                f"time sampling needs an RKHS; sum 1/|L[k]|^2 diverges for {op.name}"
            )
    nu = meas.functional_coeffs(K) if functionals is None else functionals
    h_range = kernel.range_coeffs
    null_pos = op.null_positions(K)

    if meas.kind == FOURIER:
        gram_range = np.diag(h_range[meas.indices + K]).astype(complex)
    else:
        gram_range = (np.conj(nu) * h_range) @ nu.T
        gram_range = 0.5 * (gram_range + gram_range.conj().T)
    P = np.conj(nu[:, null_pos])

    if check_null_space and op.n0 and np.linalg.matrix_rank(P) < op.n0:
        raise DegenerateMeasurementsError(
            f"measurements do not determine the null space of {op.name} "
            f"(rank P = {np.linalg.matrix_rank(P)} < {op.n0})"
        )
    if meas.is_real:
        gram_range = gram_range.real
    gram = gram_range + (P @ P.conj().T) / kernel.gamma**2
    if meas.is_real:
        gram = gram.real
    return SystemMatrices(kernel, meas, _frozen(nu), _frozen(gram), _frozen(gram_range), _frozen(P))


def inner_product_HL(op: OperatorSpec, gamma: float, f: PeriodicSignal, g: PeriodicSignal) -> complex:
    if f.n_coef != g.n_coef:
        raise ValueError("band limits differ")
    K = f.n_coef
    weights = np.abs(op.frequency_response(K)) ** 2
    weights[op.null_positions(K)] = gamma**2
    return complex(np.sum(f.coeffs * np.conj(g.coeffs) * weights))
