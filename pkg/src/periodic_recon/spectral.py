"""Truncated Fourier-series signals and LSI operators on the unit circle.

A 1-periodic (generalized) function is stored as its Fourier coefficients
``f[k]`` for ``k = -K..K`` in a dense array of length ``2K+1``; index ``i``
holds frequency ``k = i - K``. An LSI operator is stored as its frequency
response ``L[k]``, i.e. the multiplier it applies to each coefficient.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidOperatorError

__all__ = [
    "DEFAULT_N_COEF",
    "NULL_TOL",
    "REAL_TOL",
    "NUM_TOL",
    "PeriodicSignal",
    "OperatorSpec",
    "PolynomialOperator",
    "frequencies",
    "make_operator",
    "parse_operator",
    "custom_operator",
    "apply_operator",
    "evaluate",
    "convolve",
    "project_null_space",
    "parseval_energy",
    "dirac_comb",
]

DEFAULT_N_COEF = 1000
NULL_TOL = 1e-9
REAL_TOL = 1e-9
NUM_TOL = 1e-8

# Evaluation builds (len(t), 2K+1) exponential tables; cap their size.
_EVAL_CHUNK = 1 << 20


def frequencies(n_coef: int) -> np.ndarray:
    return np.arange(-n_coef, n_coef + 1)


@dataclass(frozen=True, eq=False)
class PeriodicSignal:
    """Fourier coefficients of a 1-periodic signal, band-limited to ``[-K, K]``.

    ``real=True`` asserts Hermitian symmetry, ``c[-k] == conj(c[k])``; the
    stored array is symmetrized exactly so that downstream sums are real up
    to rounding.
    """

    coeffs: np.ndarray
    real: bool = False

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.ndim != 1 or c.size % 2 != 1:
            raise ValueError("coefficient array must be 1-D with odd length 2K+1")
        if self.real:
            mirrored = np.conj(c[::-1])
            scale = max(1.0, float(np.max(np.abs(c))))
            if np.max(np.abs(c - mirrored)) > REAL_TOL * scale:
                raise ValueError("coefficients are not Hermitian-symmetric")
            c = 0.5 * (c + mirrored)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def n_coef(self) -> int:
        return (self.coeffs.size - 1) // 2

    @property
    def freqs(self) -> np.ndarray:
        return frequencies(self.n_coef)

    def coef(self, k: int) -> complex:
        if abs(k) > self.n_coef:
            return 0j
        return complex(self.coeffs[k + self.n_coef])

    def energy(self) -> float:
        """Squared L2 norm over one period (Parseval)."""
        return float(np.sum(np.abs(self.coeffs) ** 2))

    def is_hermitian(self, tol: float = REAL_TOL) -> bool:
        c = self.coeffs
        scale = max(1.0, float(np.max(np.abs(c))))
        return bool(np.max(np.abs(c - np.conj(c[::-1]))) <= tol * scale)

    @classmethod
    def zeros(cls, n_coef: int) -> "PeriodicSignal":
        return cls(np.zeros(2 * n_coef + 1, dtype=complex), real=True)

    @classmethod
    def atom(cls, k: int, n_coef: int) -> "PeriodicSignal":
        """The complex sinusoid ``e_k(t) = exp(j 2 pi k t)``."""
        if abs(k) > n_coef:
            raise ValueError(f"frequency {k} outside band [-{n_coef}, {n_coef}]")
        c = np.zeros(2 * n_coef + 1, dtype=complex)
        c[k + n_coef] = 1.0
        return cls(c, real=(k == 0))

    @classmethod
    def from_mapping(cls, coeffs: Mapping[int, complex], n_coef: int, real: bool = False):
        c = np.zeros(2 * n_coef + 1, dtype=complex)
        for k, v in coeffs.items():
            if abs(k) > n_coef:
                raise ValueError(f"frequency {k} outside band [-{n_coef}, {n_coef}]")
            c[k + n_coef] = v
        return cls(c, real=real)

    def _check_band(self, other: "PeriodicSignal"):
        if other.n_coef != self.n_coef:
            raise ValueError(f"band limits differ: {self.n_coef} vs {other.n_coef}")

    def __add__(self, other: "PeriodicSignal") -> "PeriodicSignal":
        self._check_band(other)
        return PeriodicSignal(self.coeffs + other.coeffs, real=self.real and other.real)

    def __sub__(self, other: "PeriodicSignal") -> "PeriodicSignal":
        self._check_band(other)
        return PeriodicSignal(self.coeffs - other.coeffs, real=self.real and other.real)

    def __mul__(self, scalar) -> "PeriodicSignal":
        real = self.real and np.isrealobj(scalar)
        return PeriodicSignal(self.coeffs * scalar, real=real)

    __rmul__ = __mul__

    def __neg__(self) -> "PeriodicSignal":
        return PeriodicSignal(-self.coeffs, real=self.real)


def _hermitian_response(response: Callable, ks: np.ndarray) -> bool:
    a = np.asarray(response(ks), dtype=complex)
    b = np.asarray(response(-ks), dtype=complex)
    scale = np.maximum(1.0, np.abs(a))
    return bool(np.all(np.abs(a - np.conj(b)) <= 1e-12 * scale))


@dataclass(frozen=True, eq=False)
class OperatorSpec:
    """A real LSI operator given by its frequency response.

    ``response`` maps an integer array of frequencies to complex multipliers.
    ``null_space`` lists the frequencies annihilated by the operator; the
    array returned by :meth:`frequency_response` is exactly zero there.
    ``degree`` is the polynomial degree when the response is a polynomial in
    ``j 2 pi k`` and ``None`` for custom responses.
    """

    response: Callable[[np.ndarray], np.ndarray]
    null_space: tuple[int, ...] = ()
    name: str = "L"
    degree: int | None = None
    coefficients: tuple[float, ...] | None = None

    def __post_init__(self):
        ns = tuple(sorted(int(k) for k in self.null_space))
        if len(set(ns)) != len(ns):
            raise InvalidOperatorError("null-space frequencies must be distinct")
        if set(ns) != {-k for k in ns}:
            raise InvalidOperatorError("null space of a real operator must be closed under negation")
        object.__setattr__(self, "null_space", ns)
        probe = np.arange(0, 8)
        if not _hermitian_response(self.response, probe):
            raise InvalidOperatorError(f"{self.name}: response is not Hermitian-symmetric")
        if ns:
            at_null = np.abs(np.asarray(self.response(np.array(ns)), dtype=complex))
            if np.any(at_null > NULL_TOL * max(1.0, float(np.max(np.abs(self.response(probe)))))):
                raise InvalidOperatorError(f"{self.name}: response does not vanish on the null space")

    @property
    def n0(self) -> int:
        return len(self.null_space)

    def null_positions(self, n_coef: int) -> np.ndarray:
        """Array positions of the null-space frequencies for band limit ``n_coef``."""
        ns = np.array(self.null_space, dtype=int)
        if ns.size and np.max(np.abs(ns)) > n_coef:
            raise InvalidOperatorError(
                f"{self.name}: null space {self.null_space} exceeds band limit {n_coef}"
            )
        return ns + n_coef

    def null_mask(self, n_coef: int) -> np.ndarray:
        mask = np.zeros(2 * n_coef + 1, dtype=bool)
        mask[self.null_positions(n_coef)] = True
        return mask

    def frequency_response(self, n_coef: int) -> np.ndarray:
        values = np.asarray(self.response(frequencies(n_coef)), dtype=complex).copy()
        values[self.null_positions(n_coef)] = 0.0
        return values

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class PolynomialOperator:
    """``L = sum_i c_i D^i``, hence ``L[k] = sum_i c_i (j 2 pi k)^i``."""

    coefficients: tuple[float, ...]
    name: str | None = None

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coefficients)
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def degree(self) -> int:
        nz = [i for i, c in enumerate(self.coefficients) if c != 0.0]
        return nz[-1] if nz else -1


_J_POWERS = (1.0, 1j, -1.0, -1j)


def _polynomial_response(coeffs: Sequence[float]) -> Callable[[np.ndarray], np.ndarray]:
    coeffs = tuple(coeffs)

    def response(k):
        w = 2.0 * math.pi * np.asarray(k, dtype=float)
        out = np.zeros(w.shape, dtype=complex)
        for i, c in enumerate(coeffs):
            if c != 0.0:
                out += c * _J_POWERS[i % 4] * w**i
        return out

    return response


def _poly_name(coeffs: Sequence[float]) -> str:
    terms = []
    for i, c in enumerate(coeffs):
        if c == 0.0:
            continue
        op = "I" if i == 0 else ("D" if i == 1 else f"D{i}")
        terms.append(op if c == 1.0 else f"{c:g}*{op}")
    return "+".join(reversed(terms)) or "0"


def make_operator(spec: PolynomialOperator, n_coef: int = DEFAULT_N_COEF) -> OperatorSpec:
    """Build the :class:`OperatorSpec` of a constant-coefficient differential operator.

    Frequencies ``|k| <= n_coef`` with ``|L[k]| <= NULL_TOL * max(1, |L[n_coef]|)``
    are declared part of the null space.
    """
    coeffs = spec.coefficients
    if len(coeffs) == 0:
        raise InvalidOperatorError("operator needs at least one coefficient")
    if not all(math.isfinite(c) for c in coeffs):
        raise InvalidOperatorError("operator coefficients must be finite")
    if spec.degree < 0:
        raise InvalidOperatorError("operator coefficients are all zero")
    if n_coef < 1:
        raise InvalidOperatorError("n_coef must be positive")
    response = _polynomial_response(coeffs)
    ks = frequencies(n_coef)
    mags = np.abs(response(ks))
    threshold = NULL_TOL * max(1.0, float(np.abs(response(np.array([n_coef])))[0]))
    null = tuple(int(k) for k in ks[mags <= threshold])
    return OperatorSpec(
        response=response,
        null_space=null,
        name=spec.name or _poly_name(coeffs),
        degree=spec.degree,
        coefficients=coeffs,
    )


_NAMED = {
    "I": ((1.0,), "I"),
    "D": ((0.0, 1.0), "D"),
    "D+I": ((1.0, 1.0), "D+I"),
    "D2": ((0.0, 0.0, 1.0), "D2"),
    "D2+4pi2I": ((4.0 * math.pi**2, 0.0, 1.0), "D2+4pi2I"),
}


def parse_operator(text: str, n_coef: int = DEFAULT_N_COEF) -> OperatorSpec:
    """Parse ``"D"``, ``"D+I"``, ``"D2"``, ``"D2+4pi2I"``, ``"I"`` or ``"poly:c0,c1,..."``."""
    key = re.sub(r"\s+", "", text)
    if key in _NAMED:
        coeffs, name = _NAMED[key]
        return make_operator(PolynomialOperator(coeffs, name), n_coef)
    if key.lower().startswith("poly:"):
        body = key[5:]
        try:
            coeffs = tuple(float(c) for c in body.split(",") if c != "")
        except ValueError as exc:
            raise InvalidOperatorError(f"bad polynomial coefficients in {text!r}") from exc
        return make_operator(PolynomialOperator(coeffs), n_coef)
    raise InvalidOperatorError(
        f"unknown operator {text!r}; expected one of {sorted(_NAMED)} or 'poly:c0,c1,...'"
    )


def custom_operator(
    response: Callable[[np.ndarray], np.ndarray],
    null_space: Iterable[int] = (),
    name: str = "L",
) -> OperatorSpec:
    """Wrap an arbitrary Hermitian frequency response, e.g. a fractional derivative."""
    return OperatorSpec(response=response, null_space=tuple(null_space), name=name)


def apply_operator(op: OperatorSpec, f: PeriodicSignal) -> PeriodicSignal:
    return PeriodicSignal(f.coeffs * op.frequency_response(f.n_coef), real=f.real)


def evaluate(f: PeriodicSignal, t):
    """Evaluate ``sum_k f[k] exp(j 2 pi k t)`` at scalar or array ``t``."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    ks = f.freqs
    out = np.empty(t_arr.shape, dtype=complex)
    flat_t, flat_out = t_arr.ravel(), out.reshape(-1)
    step = max(1, _EVAL_CHUNK // ks.size)
    for start in range(0, flat_t.size, step):
        block = flat_t[start:start + step]
        flat_out[start:start + step] = np.exp(2j * np.pi * np.outer(block, ks)) @ f.coeffs
    if np.ndim(t) == 0:
        return complex(out[0])
    return out


def convolve(f: PeriodicSignal, g: PeriodicSignal) -> PeriodicSignal:
    f._check_band(g)
    return PeriodicSignal(f.coeffs * g.coeffs, real=f.real and g.real)


def project_null_space(op: OperatorSpec, f: PeriodicSignal) -> PeriodicSignal:
    c = np.zeros_like(f.coeffs)
    pos = op.null_positions(f.n_coef)
    c[pos] = f.coeffs[pos]
    return PeriodicSignal(c, real=f.real)


def parseval_energy(op: OperatorSpec, f: PeriodicSignal) -> float:
    """``||L f||^2`` computed from the coefficients."""
    lhat = op.frequency_response(f.n_coef)
    return float(np.sum(np.abs(f.coeffs) ** 2 * np.abs(lhat) ** 2))


def dirac_comb(n_coef: int, shift: float = 0.0) -> PeriodicSignal:
    """Band-limited surrogate of the shifted Dirac comb ``Sha(t - shift)``.

    The true comb has every coefficient of modulus one; only ``|k| <= n_coef``
    is kept.
    """
    ks = frequencies(n_coef)
    return PeriodicSignal(np.exp(-2j * np.pi * ks * shift), real=True)
