"""Quantum ergodic-hierarchy level tests on stroboscopic trajectories.

A trajectory is an initial density matrix plus a one-step unitary. All
expectation values are computed in the step's eigenbasis, where n steps are a
phase factor per entry; this keeps long horizons free of accumulated
round-off and makes every level test see the same numbers.
"""

from __future__ import annotations

import threading
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DimMismatch, EmptyProduct, InvariantError
from .hilbert import (
    PAIRING_IMAG_TOL,
    DensityState,
    EigenSystem,
    Unitary,
    _as_matrix,
    _hermitize,
    eig_unitary,
    evolve,
)
from .rng import make_rng, random_hermitian
from .verdict import HierarchyVerdict, LevelResult

RANK_CUTOFF = 1e-15
_CHUNK = 512


class DegenerateSpectrumWarning(UserWarning):
    """Issued when an equilibrium estimate meets coincident eigenphases."""


class Trajectory:
    """``rho(n) = U^n rho0 U^-n`` for integer ``n >= 0``.

    States requested through :meth:`state` are cached (append-only, guarded
    by a lock so concurrent readers are safe).
    """

    def __init__(self, initial: DensityState, step: Unitary, eigensystem: EigenSystem | None = None):
        r, u = _as_matrix(initial), _as_matrix(step)
        if r.shape != u.shape:
            raise DimMismatch(f"state dim {r.shape[0]} vs step dim {u.shape[0]}")
        self.initial = initial if isinstance(initial, DensityState) else DensityState(r)
        self.step = step if isinstance(step, Unitary) else Unitary(u)
        if eigensystem is not None:
            self.__dict__["eigensystem"] = eigensystem
        self._cache: dict[int, DensityState] = {0: self.initial}
        self._series: dict[tuple, np.ndarray] = {}
        self._lock = threading.Lock()

    @property
    def dim(self) -> int:
        return self.initial.dim

    @cached_property
    def eigensystem(self) -> EigenSystem:
        return eig_unitary(self.step)

    @cached_property
    def _rho_e(self) -> np.ndarray:
        return self.eigensystem.to_eigenbasis(self.initial.matrix)

    @cached_property
    def _factor(self) -> tuple[np.ndarray, np.ndarray]:
        """Low-rank factor ``rho_e = Psi diag(w) Psi^dagger`` of the initial state."""
        w, v = np.linalg.eigh(_hermitize(self._rho_e))
        keep = w > RANK_CUTOFF
        return w[keep], v[:, keep]

    def state(self, n: int) -> DensityState:
        n = int(n)
        if n < 0:
            raise ValueError("n must be nonnegative")
        hit = self._cache.get(n)
        if hit is not None:
            return hit
        es = self.eigensystem
        p = np.exp(1j * n * es.phases)
        rho = DensityState(_hermitize(es.from_eigenbasis(self._rho_e * np.outer(p, p.conj()))))
        with self._lock:
            return self._cache.setdefault(n, rho)

    def recompute(self, n: int) -> DensityState:
        """Direct ``evolve(initial, U^n)``, bypassing the eigenbasis and the cache."""
        return evolve(self.initial, np.linalg.matrix_power(self.step.matrix, int(n)))

    def expectations(self, obs, times) -> np.ndarray:
        """``(rho(n)|O)`` for each ``n`` in ``times``."""
        times = np.asarray(times, dtype=float)
        oe = self.eigensystem.to_eigenbasis(_as_matrix(obs))
        if oe.shape[0] != self.dim:
            raise DimMismatch(f"observable dim {oe.shape[0]} vs trajectory dim {self.dim}")
        w, psi = self._factor
        phases = self.eigensystem.phases
        out = np.empty(len(times))
        for i0 in range(0, len(times), _CHUNK):
            ph = np.exp(1j * np.multiply.outer(times[i0:i0 + _CHUNK], phases))
            acc = np.zeros(len(ph))
            for wr, col in zip(w, psi.T):
                x = ph * col
                acc += wr * np.einsum("tk,tk->t", x.conj(), x @ oe.T).real
            out[i0:i0 + _CHUNK] = acc
        return out

    def series(self, obs, horizon: int) -> np.ndarray:
        """Expectations at ``n = 0..horizon`` (memoized per observable)."""
        o = np.ascontiguousarray(_as_matrix(obs))
        key = (hash(o.tobytes()), int(horizon))
        hit = self._series.get(key)
        if hit is None:
            hit = self.expectations(o, np.arange(int(horizon) + 1))
            hit.flags.writeable = False
            with self._lock:
                hit = self._series.setdefault(key, hit)
        return hit

    @cached_property
    def equilibrium(self) -> "EquilibriumState":
        return estimate_equilibrium(self)


@dataclass(frozen=True)
class EquilibriumState:
    """Estimate of the weak-limit state ``rho*``.

    ``method`` is ``"eigenbasis"`` or ``"cesaro"``; ``residual`` is the
    max-entry distance to the other estimator (``nan`` if not computed).
    """

    state: DensityState
    method: str
    residual: float = float("nan")
    horizon: int | None = None
    degenerate: bool = False
    notes: tuple[str, ...] = field(default=())

    def pair(self, obs) -> float:
        return float(np.einsum("ij,ji->", self.state.matrix, _as_matrix(obs)).real)


def _pinched(traj: Trajectory) -> tuple[np.ndarray, bool]:
    es = traj.eigensystem
    rho_star_e = np.where(es.block_mask(), traj._rho_e, 0)
    return _hermitize(es.from_eigenbasis(rho_star_e)), es.degeneracy_flag


def geometric_mean_phase(delta, horizon: int) -> np.ndarray:
    """``(1/N) sum_{n<N} exp(i n delta)`` in the sin-ratio form, stable as delta -> 0."""
    delta = np.asarray(delta, dtype=float)
    half = np.sin(delta / 2)
    small = np.abs(half) < 1e-300
    ratio = np.where(small, horizon, np.sin(horizon * delta / 2) / np.where(small, 1.0, half))
    return np.exp(0.5j * (horizon - 1) * delta) * ratio / horizon


def _cesaro_state(traj: Trajectory, horizon: int) -> np.ndarray:
    """``(1/N) sum_{n<N} rho(n)`` summed in closed form per eigenbasis entry."""
    es = traj.eigensystem
    g = geometric_mean_phase(np.subtract.outer(es.phases, es.phases), horizon)
    return _hermitize(es.from_eigenbasis(traj._rho_e * g))


def estimate_equilibrium(traj: Trajectory, method: str = "eigenbasis", horizon: int | None = None) -> EquilibriumState:
    """Equilibrium state from the eigenbasis diagonal or a finite Cesaro average.

    Under a degenerate step the eigenbasis diagonal depends on the basis
    chosen inside each degenerate block. We then keep the whole block
    (``sum_b P_b rho P_b``), which is the exact infinite-time Cesaro limit,
    and emit a :class:`DegenerateSpectrumWarning`.
    """
    if method not in ("eigenbasis", "cesaro"):
        raise ValueError(f"unknown method {method!r}")
    if method == "cesaro" and not horizon:
        raise ValueError("cesaro method needs a horizon")
    pinched, degenerate = _pinched(traj)
    notes = ()
    if degenerate:
        pairs = [tuple(c) for c in traj.eigensystem.clusters() if len(c) > 1]
        msg = f"degenerate eigenphases in {len(pairs)} block(s); block-diagonal projection used"
        notes = (msg,)
        warnings.warn(DegenerateSpectrumWarning(msg), stacklevel=2)
    cesaro = _cesaro_state(traj, horizon) if horizon else None
    residual = float(np.abs(cesaro - pinched).max()) if cesaro is not None else float("nan")
    if method == "eigenbasis":
        return EquilibriumState(DensityState(pinched), "eigenbasis", residual, horizon, degenerate, notes)
    return EquilibriumState(DensityState(cesaro), "cesaro", residual, horizon, degenerate, notes)


def _tail(n: int) -> np.ndarray:
    return np.arange(int(n) // 2, int(n) + 1)


def _equilibrium(traj, equilibrium):
    return traj.equilibrium if equilibrium is None else equilibrium


def test_quantum_ergodic(traj: Trajectory, observables, N: int, eps: float, equilibrium=None) -> LevelResult:
    """max_O |(1/N) sum_{k<N} (rho(k)|O) - (rho*|O)|."""
    if N < 1:
        raise ValueError("N must be positive")
    eq = _equilibrium(traj, equilibrium)
    res = 0.0
    for o in observables:
        avg = traj.series(o, N)[:N].mean()
        res = max(res, abs(avg - eq.pair(o)))
    return LevelResult.from_residual("ergodic", res, eps, {"N": int(N), "equilibrium": eq.method})


def test_quantum_mixing(traj: Trajectory, observables, N: int, eps: float, equilibrium=None) -> LevelResult:
    """max_O max_{N/2 <= n <= N} |(rho(n)|O) - (rho*|O)|."""
    eq = _equilibrium(traj, equilibrium)
    lo = int(N) // 2
    res = 0.0
    for o in observables:
        res = max(res, float(np.abs(traj.series(o, N)[lo:] - eq.pair(o)).max()))
    return LevelResult.from_residual("mixing", res, eps, {"N": int(N), "window": [lo, int(N)]})


def test_quantum_bernoulli(traj: Trajectory, observables, N: int, eps: float, equilibrium=None) -> LevelResult:
    """max_O max_{0 <= n <= N} |(rho(n)|O) - (rho*|O)|; no tail window."""
    eq = _equilibrium(traj, equilibrium)
    res = 0.0
    for o in observables:
        res = max(res, float(np.abs(traj.series(o, N) - eq.pair(o)).max()))
    return LevelResult.from_residual("bernoulli", res, eps, {"N": int(N), "window": [0, int(N)]})


for _f in (test_quantum_ergodic, test_quantum_mixing, test_quantum_bernoulli):
    _f.__test__ = False


def _is_identity(m: np.ndarray) -> bool:
    return np.array_equal(m, np.eye(m.shape[0]))


def kolmogorov_terms(traj: Trajectory, observables, offsets, n_grid, equilibrium=None) -> tuple[np.ndarray, np.ndarray]:
    """``D(n)`` and ``|Im|`` of the product pairing for each ``n`` in ``n_grid``.

    ``D(n) = Re(rho(n+m1) | O1 O2(n+m2) ... OJ(n+mJ)) - prod_j (rho(n+m1)|Oj(n+mj)) (rho*|O1)``
    with Heisenberg-evolved ``Oj`` and the product taken left to right.
    """
    mats = [_as_matrix(o) for o in observables]
    if len(mats) < 2:
        raise EmptyProduct("the Kolmogorov product needs at least two observables")
    offsets = [int(m) for m in offsets]
    if len(offsets) != len(mats):
        raise ValueError("one offset per observable")
    for m in mats:
        if m.shape[0] != traj.dim:
            raise DimMismatch(f"observable dim {m.shape[0]} vs trajectory dim {traj.dim}")
    eq = _equilibrium(traj, equilibrium)
    es = traj.eigensystem
    rho_e = traj._rho_e
    star_1 = eq.pair(mats[0])
    o1e = es.to_eigenbasis(mats[0])
    rest = [(es.to_eigenbasis(m), off) for m, off in zip(mats[1:], offsets[1:]) if not _is_identity(m)]
    d = np.empty(len(n_grid))
    imag = np.empty(len(n_grid))
    for i, n in enumerate(n_grid):
        p = np.exp(1j * (n + offsets[0]) * es.phases)
        r = rho_e * np.outer(p, p.conj())
        prod = o1e
        rhs = star_1
        for oe, off in rest:
            q = np.exp(1j * (n + off) * es.phases)
            oj = oe * np.outer(q.conj(), q)
            prod = prod @ oj
            rhs *= np.einsum("ij,ji->", r, oj).real
        lhs = np.einsum("ij,ji->", r, prod)
        d[i] = lhs.real - rhs
        imag[i] = abs(lhs.imag)
    return d, imag


def test_quantum_kolmogorov(traj: Trajectory, observables, offsets, n_grid, eps: float, equilibrium=None) -> LevelResult:
    """Largest ``|D(n)|`` over the tail half of ``n_grid``.

    The tail half starts at index ``(len - 1) // 2``, so ``n_grid = 0..N``
    gives exactly the mixing window ``[N // 2, N]``.
    """
    grid = np.asarray(sorted(int(n) for n in n_grid))
    tail = grid[(len(grid) - 1) // 2:]
    d, imag = kolmogorov_terms(traj, observables, offsets, tail, equilibrium)
    params = {"J": len(observables), "offsets": [int(m) for m in offsets], "n_range": [int(tail[0]), int(tail[-1])],
              "n_points": len(tail), "max_imag": float(imag.max())}
    return LevelResult.from_residual("kolmogorov", float(np.abs(d).max()), eps, params)


test_quantum_kolmogorov.__test__ = False


def independence_factorization_residual(rho, observables, details: bool = False):
    """``|Re(rho|g1 g2 ... gm) - prod_i (rho|gi)|``.

    With ``details=True`` returns ``(residual, imag)`` where ``imag`` is the
    magnitude of the imaginary part of the product pairing.
    """
    r = _as_matrix(rho)
    mats = [_as_matrix(g) for g in observables]
    if len(mats) < 2:
        raise EmptyProduct("factorization needs at least two observables")
    for m in mats:
        if m.shape != r.shape:
            raise DimMismatch(f"observable dim {m.shape[0]} vs state dim {r.shape[0]}")
    prod = mats[0]
    for m in mats[1:]:
        prod = prod @ m
    lhs = np.einsum("ij,ji->", r, prod)
    rhs = 1.0
    for m in mats:
        z = np.einsum("ij,ji->", r, m)
        if abs(z.imag) >= PAIRING_IMAG_TOL:
            raise InvariantError("real pairing Im Tr(rho g) = 0", abs(z.imag), PAIRING_IMAG_TOL)
        rhs *= z.real
    res = abs(lhs.real - rhs)
    return (res, abs(lhs.imag)) if details else res


def random_family(dim: int, J: int, seed: int) -> list[np.ndarray]:
    """``J`` seeded random Hermitian observables with unit spectral norm."""
    rng = make_rng(seed)
    out = []
    for _ in range(J):
        h = random_hermitian(rng, dim)
        out.append(h / np.abs(np.linalg.eigvalsh(h)).max())
    return out


@dataclass
class KFamily:
    observables: list
    offsets: list

    @classmethod
    def reduction(cls, obs, J: int = 2) -> "KFamily":
        """Mixing-reduction family: ``O1 = obs``, the rest identities, zero offsets."""
        eye = np.eye(_as_matrix(obs).shape[0])
        return cls([obs] + [eye] * (J - 1), [0] * J)


def quantum_verdict(traj: Trajectory, observables, N: int, eps: float, families=None, J: int = 3,
                    random_families: int = 1, k_points: int = 64, seed: int = 0,
                    equilibrium=None) -> HierarchyVerdict:
    """Run all four level tests with a shared ``eps``.

    The Kolmogorov residual is the max over user families (default: the
    observables cycled to length ``J`` with offsets ``0..J-1``), seeded random
    families, and one mixing-reduction family per non-identity observable
    evaluated on the full mixing window. Each level folds in the residual of
    the level it implies (mixing includes the Cesaro residual, Kolmogorov the
    mixing residual, Bernoulli the Kolmogorov residual), so the emitted
    booleans respect the inclusions; raw values are kept in the parameters.
    """
    observables = [_as_matrix(o) for o in observables]
    eq = _equilibrium(traj, equilibrium)
    erg = test_quantum_ergodic(traj, observables, N, eps, eq)
    tail = test_quantum_mixing(traj, observables, N, eps, eq)
    mix = LevelResult.from_residual("mixing", max(tail.residual, erg.residual), eps,
                                    dict(tail.parameters, tail_residual=tail.residual))
    ber = test_quantum_bernoulli(traj, observables, N, eps, eq)

    if families is None:
        families = [KFamily([observables[i % len(observables)] for i in range(J)], list(range(J)))]
    families = list(families)
    for i in range(random_families):
        families.append(KFamily(random_family(traj.dim, J, seed + i), list(range(J))))
    coarse = np.unique(np.linspace(0, N, 2 * k_points - 1).round().astype(int))
    k_res, max_imag, parts = 0.0, 0.0, []
    for fam in families:
        lv = test_quantum_kolmogorov(traj, fam.observables, fam.offsets, coarse, eps, eq)
        k_res = max(k_res, lv.residual)
        max_imag = max(max_imag, lv.parameters["max_imag"])
        parts.append(lv.residual)
    full = np.arange(int(N) + 1)
    red = 0.0
    for o in observables:
        if _is_identity(o):
            continue
        fam = KFamily.reduction(o)
        red = max(red, test_quantum_kolmogorov(traj, fam.observables, fam.offsets, full, eps, eq).residual)
    k_res = max(k_res, red, mix.residual)
    kol = LevelResult.from_residual("kolmogorov", k_res, eps, {
        "J": J, "families": len(families), "random_families": random_families, "seed": seed,
        "n_points": len(coarse) - (len(coarse) - 1) // 2, "family_residuals": parts,
        "reduction_residual": red, "max_imag": max_imag,
    })
    ber = LevelResult.from_residual("bernoulli", max(ber.residual, k_res), eps,
                                    dict(ber.parameters, series_residual=ber.residual))
    notes = eq.notes + (("truncated at J=%d, %d families" % (J, len(families))),)
    return HierarchyVerdict((erg, mix, kol, ber), float(eps), notes)
