"""Quantum kicked rotator on a truncated momentum basis.

Momenta are ``n = -(N-1)/2 .. (N-1)/2`` (N odd). One period is a free
rotation followed by a kick, ``F = K @ Free``:

    Free = diag(exp(-i tau hbar (n + beta)^2 / 2))
    K    = W^dagger diag(exp(-i (lam / hbar) cos theta_j)) W,  theta_j = 2 pi j / N

with ``W`` the unitary DFT between momentum and angle grids. ``beta`` is an
optional quasi-momentum offset; at ``beta = 0`` parity makes the Floquet
spectrum degenerate, and any ``beta`` not in ``{0, 1/2}`` lifts this.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimMismatch, InvalidSpec
from .hierarchy import Trajectory, geometric_mean_phase, quantum_verdict
from .hilbert import DensityState, Unitary, _as_matrix, pure_state
from .rates import doubling_ratio
from .verdict import HierarchyVerdict


@dataclass(frozen=True)
class RotatorSpec:
    lam: float
    tau: float = 1.0
    hbar_eff: float = 1.0
    N: int = 255
    beta: float = 0.0

    def __post_init__(self):
        if not (isinstance(self.N, (int, np.integer)) and self.N >= 3 and self.N % 2 == 1):
            raise InvalidSpec(f"N must be an odd integer >= 3, got {self.N!r}")
        if not self.lam >= 0:
            raise InvalidSpec(f"lambda must be >= 0, got {self.lam!r}")
        if not self.tau > 0:
            raise InvalidSpec(f"tau must be > 0, got {self.tau!r}")
        if not self.hbar_eff > 0:
            raise InvalidSpec(f"hbar_eff must be > 0, got {self.hbar_eff!r}")
        if not math.isfinite(self.beta):
            raise InvalidSpec("beta must be finite")

    @property
    def momenta(self) -> np.ndarray:
        return np.arange(self.N) - (self.N - 1) // 2

    @property
    def angles(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.N) / self.N

    def free_phases(self) -> np.ndarray:
        n = self.momenta + self.beta
        return np.exp(-0.5j * self.tau * self.hbar_eff * n ** 2)

    def kick_phases(self) -> np.ndarray:
        return np.exp(-1j * (self.lam / self.hbar_eff) * np.cos(self.angles))

    def index(self, n: int) -> int:
        """Array index of momentum ``n``."""
        i = int(n) + (self.N - 1) // 2
        if not 0 <= i < self.N:
            raise IndexError(f"momentum {n} outside the basis")
        return i


def dft_matrix(N: int) -> np.ndarray:
    """``W[j, n] = exp(i n theta_j) / sqrt(N)`` for the centred momenta."""
    n = np.arange(N) - (N - 1) // 2
    theta = 2 * np.pi * np.arange(N) / N
    return np.exp(1j * np.outer(theta, n)) / np.sqrt(N)


def kick_matrix(spec: RotatorSpec) -> np.ndarray:
    w = dft_matrix(spec.N)
    return w.conj().T @ (spec.kick_phases()[:, None] * w)


def build_floquet(spec: RotatorSpec) -> Unitary:
    return Unitary(kick_matrix(spec) * spec.free_phases()[None, :])


def apply_floquet(spec: RotatorSpec, psi, kicks: int = 1, free=None, kick=None) -> np.ndarray:
    """Apply ``F**kicks`` to momentum-basis vectors (columns of ``psi``) by FFT.

    The centring phases of the DFT cancel around the diagonal kick, so one
    step is ``fft(kick * ifft(free * psi))``.
    """
    psi = np.array(psi, dtype=complex)
    free = spec.free_phases() if free is None else free
    kick = spec.kick_phases() if kick is None else kick
    if psi.ndim == 1:
        free_b, kick_b = free, kick
    else:
        free_b, kick_b = free[:, None], kick[:, None]
    for _ in range(int(kicks)):
        psi = np.fft.fft(kick_b * np.fft.ifft(free_b * psi, axis=0), axis=0)
    return psi


def rotator_trajectory(spec: RotatorSpec, rho0) -> Trajectory:
    r = _as_matrix(rho0)
    if r.shape[0] != spec.N:
        raise DimMismatch(f"state dim {r.shape[0]} vs rotator N={spec.N}")
    return Trajectory(rho0 if isinstance(rho0, DensityState) else DensityState(r), build_floquet(spec))


def momentum_state(spec: RotatorSpec, n: int = 0) -> DensityState:
    v = np.zeros(spec.N)
    v[spec.index(n)] = 1
    return pure_state(v)


def gaussian_packet(spec: RotatorSpec, center: float = 0.0, width: float = 2.0, kick: float = 0.0) -> DensityState:
    """Pure Gaussian momentum packet, optionally displaced in angle by ``kick``."""
    n = spec.momenta
    amp = np.exp(-((n - center) ** 2) / (4 * width ** 2)) * np.exp(-1j * kick * n)
    return pure_state(amp)


def cos_theta(N: int) -> np.ndarray:
    """``cos(theta)`` in the momentum basis (nearest-neighbour hopping / 2, periodic)."""
    return (np.eye(N, k=1) + np.eye(N, k=-1) + np.eye(N, k=N - 1) + np.eye(N, k=1 - N)) / 2


def momentum_window(spec: RotatorSpec, half_width: int) -> np.ndarray:
    """Projector onto ``|n| <= half_width``."""
    return np.diag((np.abs(spec.momenta) <= half_width).astype(float))


@dataclass(frozen=True)
class CesaroCheck:
    cesaro_value: float
    closed_form_value: float
    residual: float
    horizon: int
    degenerate: bool
    min_gap: float
    cesaro_state: np.ndarray = field(repr=False)


def cesaro_limit_check(spec: RotatorSpec, rho0, obs, N: int, traj: Trajectory | None = None) -> CesaroCheck:
    """Compare the time average of ``(rho(j)|O)``, ``j < N``, with ``sum_k rho_kk O_kk``.

    The time average is summed from the expectation series itself; the
    closed form uses Floquet-eigenbasis diagonals (whole blocks if the
    spectrum is degenerate, which is flagged).
    """
    traj = rotator_trajectory(spec, rho0) if traj is None else traj
    es = traj.eigensystem
    cesaro = float(traj.series(obs, N)[:N].mean())
    oe = es.to_eigenbasis(_as_matrix(obs))
    closed = float(np.sum(np.where(es.block_mask(), traj._rho_e * oe.T, 0)).real)
    gaps = np.diff(np.concatenate([es.phases, es.phases[:1] + 2 * np.pi]))
    state = es.from_eigenbasis(traj._rho_e * geometric_mean_phase(np.subtract.outer(es.phases, es.phases), N))
    return CesaroCheck(cesaro, closed, abs(cesaro - closed), int(N), es.degeneracy_flag,
                       float(gaps.min()), state)


def cesaro_residual_profile(traj: Trajectory, obs, horizon: int, target: float | None = None) -> np.ndarray:
    """``|(1/N) sum_{j<N} (rho(j)|O) - target|`` for ``N = 0..horizon`` (entry 0 is nan).

    ``target`` defaults to the eigenbasis-diagonal value ``(rho*|O)``.
    """
    target = traj.equilibrium.pair(obs) if target is None else target
    s = traj.series(obs, horizon)[:horizon]
    out = np.full(horizon + 1, np.nan)
    out[1:] = np.abs(np.cumsum(s) / np.arange(1, horizon + 1) - target)
    return out


def cesaro_rate(traj: Trajectory, obs, n: int) -> float:
    """RMS doubling ratio of the Cesaro residual at horizon ``n``."""
    return doubling_ratio(cesaro_residual_profile(traj, obs, 4 * n), n)


@dataclass(frozen=True)
class MomentumDistribution:
    momenta: np.ndarray
    probabilities: np.ndarray
    l_s: float
    fit_r2: float
    fit_range: tuple[int, int]
    kicks: int
    truncated: bool


def _eig_factor(rho0) -> tuple[np.ndarray, np.ndarray]:
    w, v = np.linalg.eigh(_as_matrix(rho0))
    keep = w > 1e-15
    return w[keep], v[:, keep]


def fit_localization(momenta, probabilities, fit_fraction: float = 0.6, floor: float = 1e-28):
    """Least-squares fit of ``log f`` against ``|n|`` over the central ``fit_fraction`` of the basis.

    Returns ``(l_s, r2, (lo, hi))`` with ``l_s = 2 / |slope|``. Entries below
    ``floor`` are treated as numerically zero and left out.
    """
    n = np.asarray(momenta)
    f = np.asarray(probabilities, dtype=float)
    half = int(fit_fraction * len(n) / 2)
    sel = (np.abs(n) <= half) & (f > floor)
    x, y = np.abs(n[sel]).astype(float), np.log(f[sel])
    if len(x) < 3 or np.ptp(x) == 0:
        return float("inf"), 0.0, (-half, half)
    slope, icept = np.polyfit(x, y, 1)
    pred = slope * x + icept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1 - ss_res / ss_tot if ss_tot > 0 else 1.0
    l_s = 2 / abs(slope) if slope != 0 else float("inf")
    return float(l_s), float(r2), (-half, half)


def momentum_distribution(spec: RotatorSpec, rho0, kicks: int, fit_fraction: float = 0.6) -> MomentumDistribution:
    """Momentum probabilities after ``kicks`` periods plus an exponential-profile fit.

    Runs flagged ``truncated`` have a fitted ``l_s`` above ``N / 8``, where
    the basis edge starts to matter.
    """
    if kicks < 0:
        raise ValueError("kicks must be nonnegative")
    w, v = _eig_factor(rho0)
    if v.shape[0] != spec.N:
        raise DimMismatch(f"state dim {v.shape[0]} vs rotator N={spec.N}")
    psi = apply_floquet(spec, v, kicks)
    f = (np.abs(psi) ** 2) @ w
    f = f / f.sum()
    l_s, r2, rng = fit_localization(spec.momenta, f, fit_fraction)
    return MomentumDistribution(spec.momenta, f, l_s, r2, rng, int(kicks), bool(l_s > spec.N / 8))


@dataclass(frozen=True)
class RegimeReport:
    spec: RotatorSpec
    verdict: HierarchyVerdict
    l_s: float
    fit_r2: float
    decoherence_time: float
    post_td_residual: float
    post_td_pass: bool
    horizon: int
    truncated: bool


def regime_report(spec: RotatorSpec, rho0, observables, horizon: int = 10000, eps: float = 1e-2,
                  fit_kicks: int = 2000, seed: int = 0) -> RegimeReport:
    """All four level tests plus the decoherence-time estimate ``t_D = tau * l_s``.

    ``post_td_residual`` is ``max |(rho(n)|O) - (rho*|O)|`` over
    ``ceil(l_s) <= n <= horizon``; it is reported next to the strict
    all-times Bernoulli verdict rather than replacing it.
    """
    traj = rotator_trajectory(spec, rho0)
    verdict = quantum_verdict(traj, observables, horizon, eps, seed=seed)
    dist = momentum_distribution(spec, rho0, fit_kicks)
    t_d = spec.tau * dist.l_s
    start = int(math.ceil(dist.l_s)) if math.isfinite(dist.l_s) else horizon + 1
    eq = traj.equilibrium
    post = 0.0
    if start <= horizon:
        for o in observables:
            post = max(post, float(np.abs(traj.series(o, horizon)[start:] - eq.pair(o)).max()))
    else:
        post = float("nan")
    return RegimeReport(spec, verdict, dist.l_s, dist.fit_r2, t_d, post, bool(post < eps), horizon, dist.truncated)
