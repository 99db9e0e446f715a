"""Discrete Weyl symbols on the N x N phase-space torus, N odd.

Phase-point operators ``A(q, p) = sum_s w^{2ps} |q+s><q-s|`` with
``w = exp(2 pi i / N)`` satisfy ``Tr A = 1``, ``sum_{q,p} A = N I`` and
``Tr A(x) A(y) = N delta_xy``. Hence

    W_op(q, p) = Tr(op A(q, p))
    op         = (1/N) sum_{q,p} W_op(q, p) A(q, p)
    Tr(a b)    = (1/N) sum_{q,p} W_a W_b

and the symbol of a density matrix averages to 1/N over the grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimMismatch, EvenDimension
from .hilbert import _as_matrix

REALITY_TOL = 1e-10


def _check_odd(N: int):
    if N % 2 == 0:
        raise EvenDimension(f"discrete Wigner construction needs odd N, got {N}")


def pairing_constant(N: int) -> float:
    """``c_N`` in ``Tr(ab) = c_N sum W_a W_b``."""
    _check_odd(N)
    return 1.0 / N


@dataclass(frozen=True)
class WeylSymbol:
    """Symbol values indexed ``values[q, p]``; real for Hermitian operators."""

    N: int
    values: np.ndarray

    def __post_init__(self):
        _check_odd(self.N)
        v = np.array(self.values, copy=True)
        if v.shape != (self.N, self.N):
            raise DimMismatch(f"symbol shape {v.shape} does not match N={self.N}")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, N: int, c: float = 1.0) -> "WeylSymbol":
        return cls(N, np.full((N, N), float(c)))

    @classmethod
    def indicator(cls, mask) -> "WeylSymbol":
        m = np.asarray(mask, dtype=bool)
        return cls(m.shape[0], m.astype(float))

    def mean(self) -> float:
        return float(np.mean(self.values).real)


def _phase_table(N: int) -> np.ndarray:
    """``E[p, s] = w^{2ps}``."""
    k = (2 * np.outer(np.arange(N), np.arange(N))) % N
    return np.exp(2j * np.pi * k / N)


def phase_point_operator(N: int, q: int, p: int) -> np.ndarray:
    _check_odd(N)
    a = np.zeros((N, N), dtype=complex)
    for s in range(N):
        a[(q + s) % N, (q - s) % N] = np.exp(2j * np.pi * 2 * p * s / N)
    return a


def wigner_transform(op) -> WeylSymbol:
    """``W(q, p) = sum_s w^{2ps} op[q-s, q+s]``."""
    m = _as_matrix(op)
    N = m.shape[0]
    _check_odd(N)
    q = np.arange(N)[:, None]
    s = np.arange(N)[None, :]
    g = m[(q - s) % N, (q + s) % N]
    w = g @ _phase_table(N).T
    if np.abs(w.imag).max() < REALITY_TOL and np.abs(m - m.conj().T).max() < REALITY_TOL:
        w = w.real
    return WeylSymbol(N, w)


def inverse_weyl(symbol: WeylSymbol) -> np.ndarray:
    """``(1/N) sum_{q,p} W(q, p) A(q, p)`` as a dense matrix.

    Entry ``(a, b)`` only involves ``q = (a + b) / 2`` and ``s = a - q``
    (division mod N), so the sum over ``p`` is one small matrix product.
    """
    N = symbol.N
    _check_odd(N)
    h = symbol.values @ _phase_table(N) / N
    half = pow(2, -1, N) if N > 1 else 0
    a = np.arange(N)[:, None]
    b = np.arange(N)[None, :]
    q = ((a + b) * half) % N
    s = (a - q) % N
    out = h[q, s]
    if np.isrealobj(symbol.values):
        out = (out + out.conj().T) / 2
    return out


def _pair_dims(a, b):
    x, y = _as_matrix(a), _as_matrix(b)
    if x.shape != y.shape:
        raise DimMismatch(f"dimension mismatch: {x.shape[0]} vs {y.shape[0]}")
    _check_odd(x.shape[0])
    return x, y


def pairing_check(a, b) -> float:
    """``|Tr(ab) - c_N sum W_a W_b|``."""
    x, y = _pair_dims(a, b)
    lhs = np.einsum("ij,ji->", x, y)
    rhs = pairing_constant(x.shape[0]) * np.sum(wigner_transform(x).values * wigner_transform(y).values)
    return float(abs(lhs - rhs))


def product_symbol_discrepancy(a, b) -> float:
    """``max |W_{ab} - W_a W_b|``; reported, no bound asserted."""
    x, y = _pair_dims(a, b)
    return float(np.abs(wigner_transform(x @ y).values - wigner_transform(x).values * wigner_transform(y).values).max())


@dataclass(frozen=True)
class QuasiProjector:
    matrix: np.ndarray
    eigenvalues: np.ndarray
    idempotency_residual: float

    @property
    def negativity(self) -> float:
        return float(max(0.0, -self.eigenvalues.min()))


def quasi_projector(mask) -> QuasiProjector:
    """Quantization of a phase-space indicator, with its distance from being a projector."""
    p = inverse_weyl(WeylSymbol.indicator(mask))
    ev = np.linalg.eigvalsh(p)
    return QuasiProjector(p, ev, float(np.abs(p @ p - p).max()))


def normalized_pair(a, b) -> float:
    """``Tr(ab) / N``: the pairing under which a constant symbol 1 has weight 1."""
    x, y = _pair_dims(a, b)
    return float(np.einsum("ij,ji->", x, y).real) / x.shape[0]


@dataclass(frozen=True)
class IndicatorCorrelation:
    set_value: float
    quantum_value: float
    literal_value: float
    quasi_projector_residual: float

    @property
    def discrepancy(self) -> float:
        return abs(self.set_value - self.quantum_value)


def indicator_correlation(mask_a, mask_b) -> IndicatorCorrelation:
    """Set correlation of two grid sets against its quantized counterpart.

    ``set_value = mu(A & B) - mu(A) mu(B)`` with counting measure over the
    N^2 phase points. ``quantum_value`` is ``(P_A|P_B) - (P_A|I)(I|P_B)``
    with ``(x|y) = Tr(xy)/N``. ``literal_value`` uses the unnormalized
    ``Tr(P_A P_B) - Tr(P_A) Tr(P_B)`` for comparison.
    """
    ma, mb = np.asarray(mask_a, dtype=bool), np.asarray(mask_b, dtype=bool)
    if ma.shape != mb.shape:
        raise DimMismatch("masks differ in shape")
    N = ma.shape[0]
    mu_a, mu_b, mu_ab = ma.mean(), mb.mean(), (ma & mb).mean()
    pa, pb = quasi_projector(ma), quasi_projector(mb)
    eye = np.eye(N)
    q = normalized_pair(pa.matrix, pb.matrix) - normalized_pair(pa.matrix, eye) * normalized_pair(eye, pb.matrix)
    lit = float(np.einsum("ij,ji->", pa.matrix, pb.matrix).real - np.trace(pa.matrix).real * np.trace(pb.matrix).real)
    return IndicatorCorrelation(float(mu_ab - mu_a * mu_b), float(q), lit,
                                max(pa.idempotency_residual, pb.idempotency_residual))
