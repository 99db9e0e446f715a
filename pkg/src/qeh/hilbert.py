"""Finite-dimensional states, observables and unitary steps.

Everything here is dense numpy linear algebra. Values are immutable once
built: the wrapped arrays are copied and flagged read-only, and no operation
mutates its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (
    BadTrace,
    ConvergenceFailure,
    DimMismatch,
    InvariantError,
    NotHermitian,
    NotPositive,
    NotUnitary,
)

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
TRACE_RENORM_TOL = 1e-6
POSITIVITY_TOL = 1e-10
UNITARY_TOL = 1e-10
PAIRING_IMAG_TOL = 1e-10
DEGENERACY_TOL = 1e-9


def _frozen(matrix) -> np.ndarray:
    a = np.array(matrix, dtype=complex, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimMismatch(f"expected a square matrix, got shape {a.shape}")
    a.flags.writeable = False
    return a


def _hermitian_residual(a: np.ndarray) -> float:
    return float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0


def _hermitize(a: np.ndarray) -> np.ndarray:
    return (a + a.conj().T) / 2


class _Operator:
    """Shared behaviour of the matrix-valued value types."""

    __slots__ = ("matrix",)

    def __init__(self, matrix):
        object.__setattr__(self, "matrix", _frozen(matrix))

    def __setattr__(self, name, value):
        raise AttributeError(f"{type(self).__name__} is immutable")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim})"


class DensityState(_Operator):
    """Hermitian, positive, trace-one matrix.

    The constructor trusts its input; use :func:`make_density` to validate
    matrices from outside the package.
    """

    __slots__ = ()


class Observable(_Operator):
    """Hermitian matrix. Use :func:`make_observable` to validate."""

    __slots__ = ()


class Unitary(_Operator):
    """Unitary matrix. Use :func:`make_unitary` to validate."""

    __slots__ = ()


@dataclass(frozen=True)
class EigenSystem:
    """Eigen-decomposition of a unitary ``U = V diag(exp(i phases)) V^dagger``.

    ``phases`` lie in (-pi, pi] and are sorted ascending; ``vectors`` holds the
    matching orthonormal eigenvectors as columns.
    """

    phases: np.ndarray
    vectors: np.ndarray
    degeneracy_flag: bool
    tolerance: float = field(default=DEGENERACY_TOL)

    @property
    def dim(self) -> int:
        return len(self.phases)

    def to_eigenbasis(self, matrix) -> np.ndarray:
        v = self.vectors
        return v.conj().T @ np.asarray(matrix) @ v

    def from_eigenbasis(self, matrix) -> np.ndarray:
        v = self.vectors
        return v @ np.asarray(matrix) @ v.conj().T

    def clusters(self) -> list[np.ndarray]:
        """Groups of indices whose phases agree within ``tolerance`` (mod 2 pi)."""
        return phase_clusters(self.phases, self.tolerance)

    def block_mask(self) -> np.ndarray:
        """Boolean mask selecting eigenbasis entries inside degenerate blocks."""
        labels = np.empty(self.dim, dtype=int)
        for i, c in enumerate(self.clusters()):
            labels[c] = i
        return labels[:, None] == labels[None, :]

    def power(self, n: int) -> np.ndarray:
        """``U**n`` rebuilt from the decomposition (exact phases, no drift)."""
        v = self.vectors
        return (v * np.exp(1j * n * self.phases)) @ v.conj().T


def phase_clusters(phases, tol=DEGENERACY_TOL) -> list[np.ndarray]:
    """Partition ``phases`` into chains of neighbours closer than ``tol`` on the circle."""
    phases = np.asarray(phases, dtype=float)
    n = len(phases)
    if n == 0:
        return []
    order = np.argsort(phases, kind="stable")
    s = phases[order]
    gaps = np.diff(s)
    breaks = np.nonzero(gaps >= tol)[0]
    groups = np.split(order, breaks + 1)
    wrap = (s[0] + 2 * np.pi) - s[-1]
    if len(groups) > 1 and wrap < tol:
        groups[0] = np.concatenate([groups[-1], groups[0]])
        groups.pop()
    return [np.sort(g) for g in groups]


def _as_matrix(x) -> np.ndarray:
    if isinstance(x, _Operator):
        return x.matrix
    a = np.asarray(x, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimMismatch(f"expected a square matrix, got shape {a.shape}")
    return a


def _check_dims(*mats):
    dims = {m.shape[0] for m in mats}
    if len(dims) != 1:
        raise DimMismatch(f"dimension mismatch: {sorted(dims)}")


def make_density(matrix) -> DensityState:
    """Validate ``matrix`` as a density operator.

    A trace within 1e-6 of one is renormalized; anything further off is
    rejected, as are non-Hermitian and non-positive inputs.

    Raises
    ------
    NotHermitian, BadTrace, NotPositive
    """
    a = _as_matrix(matrix)
    res = _hermitian_residual(a)
    if res > HERMITIAN_TOL:
        raise NotHermitian("Hermitian", res, HERMITIAN_TOL)
    a = _hermitize(a)
    tr = np.trace(a).real
    if abs(tr - 1) > TRACE_RENORM_TOL:
        raise BadTrace("trace = 1", abs(tr - 1), TRACE_RENORM_TOL)
    a = a / tr
    lo = float(np.linalg.eigvalsh(a).min())
    if lo < -POSITIVITY_TOL:
        raise NotPositive("positive semidefinite", -lo, POSITIVITY_TOL)
    return DensityState(a)


def pure_state(vector) -> DensityState:
    """``|psi><psi|`` for a vector normalized on the fly."""
    v = np.asarray(vector, dtype=complex)
    v = v / np.linalg.norm(v)
    return DensityState(np.outer(v, v.conj()))


def maximally_mixed(dim: int) -> DensityState:
    return DensityState(np.eye(dim) / dim)


def make_observable(matrix) -> Observable:
    a = _as_matrix(matrix)
    res = _hermitian_residual(a)
    if res > HERMITIAN_TOL:
        raise NotHermitian("Hermitian", res, HERMITIAN_TOL)
    return Observable(_hermitize(a))


def make_unitary(matrix) -> Unitary:
    a = _as_matrix(matrix)
    res = float(np.max(np.abs(a.conj().T @ a - np.eye(a.shape[0]))))
    if res > UNITARY_TOL:
        raise NotUnitary("U^dagger U = I", res, UNITARY_TOL)
    return Unitary(a)


def pair(a, b) -> complex:
    """Complex ``Tr(a b)`` without forming the product."""
    x, y = _as_matrix(a), _as_matrix(b)
    _check_dims(x, y)
    return complex(np.einsum("ij,ji->", x, y))


def trace_pair(rho, obs) -> float:
    """``(rho|O) = Re Tr(rho O)``; the imaginary part must vanish."""
    z = pair(rho, obs)
    if abs(z.imag) >= PAIRING_IMAG_TOL:
        raise InvariantError("real pairing Im Tr(rho O) = 0", abs(z.imag), PAIRING_IMAG_TOL)
    return z.real


def quantum_correlation(rho, obs) -> float:
    """``(rho|O) - (rho|I)(I|O)`` with ``(rho|I) = 1`` and ``(I|O) = Tr O``."""
    o = _as_matrix(obs)
    return trace_pair(rho, o) - float(np.trace(o).real)


def evolve(rho, u) -> DensityState:
    """Schrodinger step ``U rho U^dagger``."""
    r, m = _as_matrix(rho), _as_matrix(u)
    _check_dims(r, m)
    return DensityState(_hermitize(m @ r @ m.conj().T))


def heisenberg(obs, u, steps: int = 1) -> Observable:
    """Heisenberg-picture observable ``(U^dagger)^steps O U^steps``."""
    o, m = _as_matrix(obs), _as_matrix(u)
    _check_dims(o, m)
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    p = np.linalg.matrix_power(m, steps)
    return Observable(_hermitize(p.conj().T @ o @ p))


def eig_unitary(u, tol: float = DEGENERACY_TOL) -> EigenSystem:
    """Eigensystem of a unitary via the complex Schur form.

    For a normal matrix the Schur factor is diagonal and the Schur vectors are
    an orthonormal eigenbasis even inside degenerate blocks.
    """
    m = _as_matrix(u)
    try:
        t, z = scipy.linalg.schur(m, output="complex")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise ConvergenceFailure(f"Schur iteration failed: {exc}") from exc
    off = np.abs(np.triu(t, 1)).max() if len(t) > 1 else 0.0
    if off > 1e-8:
        raise ConvergenceFailure(f"Schur factor not diagonal (off-diagonal {off:.2e}); input not unitary?")
    phases = np.angle(np.diag(t))
    phases[phases <= -np.pi] = np.pi
    order = np.argsort(phases, kind="stable")
    phases = phases[order]
    vectors = z[:, order]
    degenerate = any(len(c) > 1 for c in phase_clusters(phases, tol))
    return EigenSystem(phases, vectors, bool(degenerate), tol)
