"""Dephasing of interference terms under a discrete spectrum.

A state written in an energy basis evolves as ``rho_ab(t) = rho_ab e^{-i (w_a - w_b) t}``.
The mean of a projector then splits into a constant diagonal part and an
oscillating interference part. Time averages of the interference part vanish
like 1/T when no two energies coincide; a coincident pair with nonzero
coherence leaves a constant behind.

Time is measured in units where hbar = 1.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSpectrum, DimMismatch, NonIntegrableProfile
from .hilbert import _as_matrix

DEGENERATE_GAP = 1e-12


@dataclass(frozen=True)
class SpectrumSpec:
    energies: np.ndarray
    min_gap: float
    degenerate: bool

    @classmethod
    def from_energies(cls, energies) -> "SpectrumSpec":
        w = np.sort(np.asarray(energies, dtype=float))
        if w.ndim != 1 or len(w) == 0:
            raise ValueError("need a nonempty 1-d list of energies")
        gap = float(np.diff(w).min()) if len(w) > 1 else float("inf")
        w.flags.writeable = False
        return cls(w, gap, gap < DEGENERATE_GAP)

    @classmethod
    def from_text(cls, text: str) -> "SpectrumSpec":
        """One energy per line; blank lines and ``#`` comments ignored."""
        vals = []
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                vals.extend(float(tok) for tok in line.replace(",", " ").split())
        return cls.from_energies(vals)

    def __len__(self):
        return len(self.energies)

    def degenerate_pairs(self, tol: float = DEGENERATE_GAP) -> list[tuple[int, int]]:
        w = self.energies
        d = np.abs(np.subtract.outer(w, w))
        i, j = np.nonzero(np.triu(d < tol, 1))
        return list(zip(i.tolist(), j.tolist()))


def random_spectrum(rng: np.random.Generator, levels: int, spread: float = 1.0) -> SpectrumSpec:
    """Uniformly scattered levels on ``[0, spread * levels)``."""
    return SpectrumSpec.from_energies(rng.uniform(0, spread * levels, size=levels))


def coherent_state(rng: np.random.Generator, levels: int) -> np.ndarray:
    """Random pure state with every energy component populated."""
    v = rng.normal(size=levels) + 1j * rng.normal(size=levels)
    v /= np.linalg.norm(v)
    return np.outer(v, v.conj())


@dataclass(frozen=True)
class AmplitudeSplit:
    """``amplitude(t) = p_diag + p_int(t)``.

    ``coefficients[a, b] = rho_ab P_ba`` and ``deltas[a, b] = w_a - w_b`` are
    kept so time averages can be taken in closed form.
    """

    p_diag: float
    times: np.ndarray
    p_int: np.ndarray
    coefficients: np.ndarray = field(repr=False)
    deltas: np.ndarray = field(repr=False)

    @property
    def amplitude(self) -> np.ndarray:
        return self.p_diag + self.p_int.real


def _oscillating(coeff, deltas, times) -> np.ndarray:
    off = ~np.eye(len(coeff), dtype=bool)
    c, d = coeff[off], deltas[off]
    times = np.asarray(times, dtype=float)
    out = np.empty(len(times), dtype=complex)
    for i0 in range(0, len(times), 256):
        out[i0:i0 + 256] = np.exp(-1j * np.multiply.outer(times[i0:i0 + 256], d)) @ c
    return out


def amplitude_series(spec: SpectrumSpec, rho, projector, times) -> AmplitudeSplit:
    """``sum_ab rho_ab P_ba e^{-i (w_a - w_b) t}`` split into diagonal and interference parts.

    ``rho`` and ``projector`` are given in the basis of ``spec.energies``
    (sorted ascending).
    """
    r, p = _as_matrix(rho), _as_matrix(projector)
    if r.shape[0] != len(spec) or p.shape[0] != len(spec):
        raise DimMismatch(f"spectrum has {len(spec)} levels, got {r.shape[0]} and {p.shape[0]}")
    coeff = r * p.T
    deltas = np.subtract.outer(spec.energies, spec.energies)
    p_diag = float(np.trace(coeff).real)
    times = np.array(times, dtype=float)
    times.flags.writeable = False
    return AmplitudeSplit(p_diag, times, _oscillating(coeff, deltas, times), coeff, deltas)


def direct_amplitude(spec: SpectrumSpec, rho, projector, t: float) -> float:
    """``Tr(rho(t) P)`` with ``rho(t) = e^{-iHt} rho e^{iHt}``, by explicit evolution."""
    u = np.diag(np.exp(-1j * spec.energies * t))
    r = u @ _as_matrix(rho) @ u.conj().T
    return float(np.einsum("ij,ji->", r, _as_matrix(projector)).real)


@dataclass(frozen=True)
class CesaroAverage:
    average: float
    residual_vs_pdiag: float
    bound: float
    horizon: float
    degenerate_pairs: tuple[tuple[int, int], ...] = ()
    plateau: float = 0.0


class DegeneratePlateauWarning(UserWarning):
    """Coincident levels with nonzero coherence leave a non-decaying term."""


def _mean_phase(deltas, T):
    """``(1/T) int_0^T e^{-i d t} dt = i (e^{-i d T} - 1) / (d T)``, equal to 1 at ``d = 0``."""
    deltas = np.asarray(deltas, dtype=float)
    zero = np.abs(deltas) < DEGENERATE_GAP
    safe = np.where(zero, 1.0, deltas)
    return np.where(zero, 1.0, 1j * np.expm1(-1j * safe * T) / (safe * T))


def cesaro_average(split: AmplitudeSplit, T: float, strict: bool = False) -> CesaroAverage:
    """Closed-form time average of the amplitude over ``[0, T]``.

    ``bound`` is the term-wise estimate ``(2/T) sum |c_ab| / |d_ab|`` over
    nondegenerate pairs. Degenerate pairs with ``|c_ab| > 1e-14`` are listed
    and their sum reported as ``plateau``; ``strict=True`` raises instead.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    c, d = split.coefficients, split.deltas
    off = ~np.eye(len(c), dtype=bool)
    zero = off & (np.abs(d) < DEGENERATE_GAP)
    live = zero & (np.abs(c) > 1e-14)
    pairs = tuple((int(a), int(b)) for a, b in zip(*np.nonzero(np.triu(live | live.T, 1))))
    plateau = float(abs(c[zero].sum()))
    if pairs:
        msg = f"{len(pairs)} degenerate level pair(s) carry coherence; residual plateau {plateau:.3e}"
        if strict:
            raise DegenerateSpectrum(msg, pairs)
        warnings.warn(DegeneratePlateauWarning(msg), stacklevel=2)
    osc = complex(np.sum(c[off] * _mean_phase(d[off], T)))
    nz = off & ~zero
    bound = float(2 / T * np.sum(np.abs(c[nz]) / np.abs(d[nz]))) if nz.any() else 0.0
    avg = split.p_diag + osc.real
    return CesaroAverage(avg, abs(avg - split.p_diag), bound, float(T), pairs, plateau)


def cesaro_residual(split: AmplitudeSplit, horizons) -> np.ndarray:
    """``|cesaro_average - p_diag|`` at each horizon, vectorized."""
    c, d = split.coefficients, split.deltas
    off = ~np.eye(len(c), dtype=bool)
    cc, dd = c[off], d[off]
    hs = np.asarray(horizons, dtype=float)
    out = np.empty(len(hs))
    for i0 in range(0, len(hs), 256):
        h = hs[i0:i0 + 256, None]
        out[i0:i0 + 256] = np.abs((_mean_phase(np.broadcast_to(dd, (len(h), len(dd))), h) @ cc).real)
    return out


QC_SAMPLES = 4096
QC_SPAN = 6.0


def quasi_continuous_interference(density_profile, x_over_lambda: float, center: float = 0.0, width: float = 1.0,
                                  samples: int = QC_SAMPLES, span: float = QC_SPAN) -> float:
    """``|sum_k f(k) e^{-i k x}|`` on a dense k-grid.

    ``density_profile`` is either a callable ``f(k)``, sampled on ``samples``
    points spanning ``center +- span * width``, or a pair ``(k, f)`` of
    arrays used as given. Profiles that are not finite, negative, or not
    decayed to 1e-6 of their peak at the grid edges are rejected.
    """
    if x_over_lambda < 0:
        raise ValueError("x must be nonnegative")
    if callable(density_profile):
        k = np.linspace(center - span * width, center + span * width, samples)
        f = np.asarray(density_profile(k), dtype=float)
    else:
        k, f = (np.asarray(a, dtype=float) for a in density_profile)
    if f.shape != k.shape or f.ndim != 1:
        raise NonIntegrableProfile("profile and k-grid must be matching 1-d arrays")
    if not np.all(np.isfinite(f)) or np.any(f < 0):
        raise NonIntegrableProfile("profile must be finite and nonnegative")
    peak = f.max() if len(f) else 0.0
    if peak <= 0:
        raise NonIntegrableProfile("profile is identically zero")
    if max(f[0], f[-1]) > 1e-6 * peak:
        raise NonIntegrableProfile("profile has not decayed at the grid edges; widen the grid")
    return float(abs(np.sum(f * np.exp(-1j * k * x_over_lambda))))


def gaussian_interference(x, width: float = 1.0, samples: int = QC_SAMPLES, span: float = QC_SPAN) -> float:
    """Analytic value for a unit-peak Gaussian envelope: ``sqrt(2 pi) width / dk * exp(-(x width)^2 / 2)``."""
    dk = 2 * span * width / (samples - 1)
    return float(np.sqrt(2 * np.pi) * width / dk * np.exp(-0.5 * (x * width) ** 2))
