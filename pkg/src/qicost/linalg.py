"""Dense linear algebra and entropy primitives.

Every entropy in the package is in bits. Matrices are plain complex numpy
arrays; the helpers here add the contract checks (hermiticity, trace,
positivity, dimension cap) that the rest of the package relies on.
"""

from __future__ import annotations

import os
from contextlib import contextmanager

import numpy as np

__all__ = [
    "DEFAULT_DIM_CAP",
    "DimensionCapError",
    "NotHermitianError",
    "NormalizationError",
    "PositivityError",
    "get_dim_cap",
    "set_dim_cap",
    "dim_cap",
    "check_dim",
    "kron",
    "is_hermitian",
    "hermitian_eigenvalues",
    "entropy_from_spectrum",
    "von_neumann_entropy",
    "renyi2_entropy",
    "binary_entropy",
    "shannon_entropy",
    "cqmi",
]

DEFAULT_DIM_CAP = 4096
HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-6
CLIP_TOL = 1e-8


class DimensionCapError(ValueError):
    """A matrix dimension exceeded the configured cap."""


class NotHermitianError(ValueError):
    pass


class NormalizationError(ValueError):
    pass


class PositivityError(ValueError):
    pass


_cap_override: int | None = None


def get_dim_cap() -> int:
    """Current dimension cap: explicit override, else QICOST_DIM_CAP, else 4096."""
    if _cap_override is not None:
        return _cap_override
    env = os.environ.get("QICOST_DIM_CAP")
    if env:
        try:
            value = int(env)
        except ValueError as exc:
            raise ValueError(f"QICOST_DIM_CAP must be an integer, got {env!r}") from exc
        if value < 1:
            raise ValueError("QICOST_DIM_CAP must be positive")
        return value
    return DEFAULT_DIM_CAP


def set_dim_cap(value: int | None) -> None:
    """Override the cap for this process (None restores env/default)."""
    global _cap_override
    if value is not None and value < 1:
        raise ValueError("dimension cap must be positive")
    _cap_override = value


@contextmanager
def dim_cap(value: int | None):
    global _cap_override
    old = _cap_override
    set_dim_cap(value)
    try:
        yield
    finally:
        _cap_override = old


def check_dim(dim: int, what: str = "matrix") -> None:
    cap = get_dim_cap()
    if dim > cap:
        raise DimensionCapError(f"{what} dimension {dim} exceeds the cap {cap}")


def kron(a, b) -> np.ndarray:
    """Kronecker product with a guard on the resulting dimension."""
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    b = np.atleast_2d(np.asarray(b, dtype=complex))
    check_dim(a.shape[0] * b.shape[0], "kron")
    check_dim(a.shape[1] * b.shape[1], "kron")
    return np.kron(a, b)


def is_hermitian(m, tol: float = HERMITIAN_TOL) -> bool:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    return bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= tol)


def hermitian_eigenvalues(m) -> np.ndarray:
    """Eigenvalues of a Hermitian matrix, sorted in descending order."""
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NotHermitianError(f"expected a square matrix, got shape {m.shape}")
    if not is_hermitian(m):
        dev = float(np.max(np.abs(m - m.conj().T)))
        raise NotHermitianError(f"matrix is not Hermitian (max |M - M^dag| = {dev:.3e})")
    check_dim(m.shape[0], "eigenproblem")
    # LAPACK heevd; symmetrise first so round-off in the input cannot leak in
    return np.linalg.eigvalsh(0.5 * (m + m.conj().T))[::-1]


def _clip_spectrum(evals: np.ndarray) -> np.ndarray:
    evals = np.asarray(evals, dtype=float)
    low = evals.min(initial=0.0)
    if low < -CLIP_TOL:
        raise PositivityError(f"eigenvalue {low:.3e} below -{CLIP_TOL:g}")
    total = evals.sum()
    if abs(total - 1.0) > TRACE_TOL:
        raise NormalizationError(f"trace {total:.12f} is not 1")
    return np.clip(evals, 0.0, 1.0)


def entropy_from_spectrum(evals) -> float:
    """-sum p lg p over a density spectrum (0 lg 0 = 0)."""
    p = _clip_spectrum(evals)
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def von_neumann_entropy(rho) -> float:
    return entropy_from_spectrum(hermitian_eigenvalues(rho))


def renyi2_entropy(rho) -> float:
    rho = np.asarray(rho, dtype=complex)
    if not is_hermitian(rho):
        raise NotHermitianError("renyi2_entropy expects a Hermitian matrix")
    # validate the spectrum exactly as for the von Neumann entropy
    _clip_spectrum(hermitian_eigenvalues(rho))
    purity = float(np.real(np.vdot(rho, rho)))  # Tr(rho^2) for Hermitian rho
    return float(-np.log2(purity))


def binary_entropy(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability {p} outside [0, 1]")
    if p == 0.0 or p == 1.0:
        return 0.0
    return float(-p * np.log2(p) - (1 - p) * np.log2(1 - p))


def shannon_entropy(probs) -> float:
    """Entropy of a classical distribution given as an array of weights."""
    p = np.asarray(probs, dtype=float).ravel()
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def cqmi(state, a, b, c=()) -> float:
    """Conditional mutual information I(A;B|C) in bits.

    ``state`` is anything exposing ``entropy(names)`` (pure states, density
    operators, classical joint tables); ``a``, ``b``, ``c`` are collections of
    register names and must be pairwise disjoint.
    """
    a, b, c = frozenset(a), frozenset(b), frozenset(c)
    if a & b or a & c or b & c:
        raise ValueError(
            f"register sets overlap: {sorted(a & b | a & c | b & c)}"
        )
    h = state.entropy
    return h(a | c) + h(b | c) - h(c) - h(a | b | c)
