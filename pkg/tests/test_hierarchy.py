import warnings

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from qeh import hierarchy as qh
from qeh.errors import DimMismatch, EmptyProduct
from qeh.hilbert import DensityState, Unitary, maximally_mixed, pure_state
from qeh.rates import doubling_ratio
from qeh.rng import make_rng, random_density, random_hermitian, random_unitary
from qeh.rotator import RotatorSpec, build_floquet, cos_theta, gaussian_packet

seeds = st.integers(0, 2**32 - 1)
SX = np.array([[0, 1], [1, 0]], dtype=complex)


def random_traj(seed, dim, rank=None):
    rng = make_rng(seed)
    return qh.Trajectory(DensityState(random_density(rng, dim, rank)), Unitary(random_unitary(rng, dim)))


def four_cycle():
    """Step with phases (0, pi/2) and |+><+|: (rho(n)|sx) = cos(n pi / 2)."""
    return qh.Trajectory(pure_state([1, 1]), Unitary(np.diag([1, 1j])))


def explicit_series(rho, u, obs, horizon):
    """(rho(n)|O) by repeated matrix products, n = 0..horizon."""
    r, out = np.array(rho), []
    for _ in range(horizon + 1):
        out.append(np.trace(r @ obs).real)
        r = u @ r @ u.conj().T
    return np.array(out)


# trajectory

def test_state_matches_recompute():
    t = random_traj(1, 12)
    for n in (0, 1, 7, 50, 333):
        assert np.abs(t.state(n).matrix - t.recompute(n).matrix).max() < 1e-12
    assert t.state(7) is t.state(7)


def test_series_matches_explicit():
    rng = make_rng(2)
    t = random_traj(2, 10)
    o = random_hermitian(rng, 10)
    assert np.abs(t.series(o, 300) - explicit_series(t.initial.matrix, t.step.matrix, o, 300)).max() < 1e-11


def test_trajectory_dim_mismatch():
    with pytest.raises(DimMismatch):
        qh.Trajectory(maximally_mixed(3), Unitary(np.eye(4)))


# equilibrium

def test_equilibrium_of_stationary_initial():
    rng = make_rng(3)
    u = random_unitary(rng, 6)
    es_v = np.linalg.eig(u)[1]
    q, _ = np.linalg.qr(es_v)
    rho = q @ np.diag([0.1, 0.2, 0.3, 0.15, 0.05, 0.2]) @ q.conj().T
    t = qh.Trajectory(DensityState(rho), Unitary(u))
    assert np.abs(qh.estimate_equilibrium(t).state.matrix - rho).max() < 1e-12


def test_cesaro_with_identity_step():
    rho = random_density(make_rng(4), 5)
    t = qh.Trajectory(DensityState(rho), Unitary(np.eye(5)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", qh.DegenerateSpectrumWarning)
        eq = qh.estimate_equilibrium(t, "cesaro", horizon=37)
    assert np.abs(eq.state.matrix - rho).max() < 1e-14


def test_cesaro_matches_eigenbasis_at_1e4():
    t = random_traj(5, 16)
    eq = qh.estimate_equilibrium(t, "cesaro", horizon=10_000)
    assert eq.residual < 1e-3
    star = qh.estimate_equilibrium(t).state.matrix
    assert np.abs(eq.state.matrix - star).max() < 1e-3


def test_cesaro_state_matches_explicit_average():
    t = random_traj(6, 6)
    u, r = t.step.matrix, t.initial.matrix.copy()
    acc = np.zeros_like(r)
    for _ in range(400):
        acc += r
        r = u @ r @ u.conj().T
    eq = qh.estimate_equilibrium(t, "cesaro", horizon=400)
    assert np.abs(eq.state.matrix - acc / 400).max() < 1e-12


def test_degenerate_step_warns_and_pinches():
    u = np.diag([1, 1, -1]).astype(complex)
    rho = random_density(make_rng(7), 3)
    t = qh.Trajectory(DensityState(rho), Unitary(u))
    with pytest.warns(qh.DegenerateSpectrumWarning):
        eq = qh.estimate_equilibrium(t)
    expect = rho.copy()
    expect[2, :2] = expect[:2, 2] = 0
    assert eq.degenerate
    assert np.abs(eq.state.matrix - expect).max() < 1e-12


def test_unknown_method():
    with pytest.raises(ValueError):
        qh.estimate_equilibrium(random_traj(1, 2), "time")


# ergodic

def test_ergodic_identity_observable():
    t = random_traj(8, 6)
    assert qh.test_quantum_ergodic(t, [np.eye(6)], 500, 1e-2).residual < 1e-13


def test_ergodic_stationary_diagonal():
    t = qh.Trajectory(DensityState(np.diag([0.5, 0.3, 0.2])), Unitary(np.diag(np.exp([1j, 2j, 0.5j]))))
    lv = qh.test_quantum_ergodic(t, [np.diag([1.0, -2.0, 3.0])], 123, 1e-2)
    assert lv.residual < 1e-14 and lv.passed


def test_ergodic_rotator_rate_oracle():
    spec = RotatorSpec(1.3, N=31, beta=0.3819660112501051)
    u = build_floquet(spec).matrix
    rho = gaussian_packet(spec, 0, 2, 0.7)
    obs = cos_theta(31)
    t = qh.Trajectory(rho, Unitary(u))
    ex = explicit_series(rho.matrix, u, obs, 2000)
    star = t.equilibrium.pair(obs)
    res = [qh.test_quantum_ergodic(t, [obs], n, 1).residual for n in (2000,)]
    assert res[0] == pytest.approx(abs(ex[:2000].mean() - star), abs=1e-10)
    # single horizons oscillate; the dyadic-window RMS carries the 1/N rate
    ex = explicit_series(rho.matrix, u, obs, 8000)
    prof = np.full(8001, np.nan)
    prof[1:] = np.abs(np.cumsum(ex[:8000]) / np.arange(1, 8001) - star)
    assert doubling_ratio(prof, 2000) <= 0.6
    # closed-form envelope: |g(d, N)| <= 1 / (N |sin(d/2)|)
    es = t.eigensystem
    c = es.to_eigenbasis(rho.matrix) * es.to_eigenbasis(obs).T
    d = np.subtract.outer(es.phases, es.phases)
    off = ~np.eye(31, dtype=bool)
    env = np.sum(np.abs(c[off]) / np.abs(np.sin(d[off] / 2)))
    assert res[0] <= env / 2000 + 1e-12


# mixing

def test_mixing_identity_observable():
    assert qh.test_quantum_mixing(random_traj(9, 4), [np.eye(4)], 200, 1e-2).residual < 1e-13


def test_mixing_four_cycle_fails():
    t = four_cycle()
    n = np.arange(401)
    assert np.allclose(t.series(SX, 400), np.cos(n * np.pi / 2), atol=1e-12)
    lv = qh.test_quantum_mixing(t, [SX], 400, 1e-2)
    assert lv.residual == pytest.approx(1, abs=1e-12)
    assert not lv.passed


def test_mixing_diagonal_in_eigenbasis():
    rng = make_rng(10)
    u = random_unitary(rng, 5)
    v = np.linalg.qr(np.linalg.eig(u)[1])[0]
    rho = v @ np.diag([0.4, 0.3, 0.1, 0.1, 0.1]) @ v.conj().T
    t = qh.Trajectory(DensityState(rho), Unitary(u))
    assert qh.test_quantum_mixing(t, [random_hermitian(rng, 5)], 300, 1e-2).residual < 1e-12


# kolmogorov

def test_kolmogorov_reduction_equals_mixing():
    t = random_traj(11, 8)
    o = random_hermitian(make_rng(11), 8)
    fam = qh.KFamily.reduction(o, J=3)
    k = qh.test_quantum_kolmogorov(t, fam.observables, fam.offsets, range(601), 1e-2)
    m = qh.test_quantum_mixing(t, [o], 600, 1e-2)
    assert abs(k.residual - m.residual) < 1e-12
    assert k.parameters["n_range"] == m.parameters["window"]


def test_kolmogorov_diagonal_oracle():
    p = np.array([0.5, 0.3, 0.2])
    t = qh.Trajectory(DensityState(np.diag(p)), Unitary(np.diag(np.exp([0.3j, 1.1j, -2j]))))
    o1, o2, o3 = np.diag([1.0, 2, 3]), np.diag([0.5, -1, 2]), np.diag([2.0, 0, 1])
    d, imag = qh.kolmogorov_terms(t, [o1, o2, o3], [0, 1, 2], [0, 5, 17])
    lhs = np.sum(p * np.diag(o1) * np.diag(o2) * np.diag(o3))
    rhs = np.sum(p * np.diag(o2)) * np.sum(p * np.diag(o3)) * np.sum(p * np.diag(o1))
    assert np.allclose(d, lhs - rhs, atol=1e-13)
    assert imag.max() < 1e-13


def test_kolmogorov_identities_vanish():
    t = random_traj(12, 4)
    lv = qh.test_quantum_kolmogorov(t, [np.eye(4), np.eye(4)], [0, 0], range(50), 1e-2)
    assert lv.residual < 1e-13


def test_kolmogorov_matches_explicit_heisenberg():
    from qeh.hilbert import heisenberg
    rng = make_rng(13)
    t = random_traj(13, 5)
    obs = [random_hermitian(rng, 5) for _ in range(3)]
    offs = [0, 2, 5]
    d, imag = qh.kolmogorov_terms(t, obs, offs, [4])
    n = 4
    rho = t.recompute(n + offs[0]).matrix
    o2 = heisenberg(obs[1], t.step, n + offs[1]).matrix
    o3 = heisenberg(obs[2], t.step, n + offs[2]).matrix
    prod = obs[0] @ o2 @ o3
    lhs = np.trace(rho @ prod)
    rhs = np.trace(rho @ o2).real * np.trace(rho @ o3).real * t.equilibrium.pair(obs[0])
    assert d[0] == pytest.approx(lhs.real - rhs, abs=1e-10)
    assert imag[0] == pytest.approx(abs(lhs.imag), abs=1e-10)


def test_kolmogorov_needs_two():
    with pytest.raises(EmptyProduct):
        qh.test_quantum_kolmogorov(random_traj(1, 2), [np.eye(2)], [0], range(4), 1e-2)


# bernoulli

def test_bernoulli_from_equilibrium():
    t = random_traj(14, 6)
    t2 = qh.Trajectory(t.equilibrium.state, t.step)
    o = random_hermitian(make_rng(14), 6)
    assert qh.test_quantum_bernoulli(t2, [o], 500, 1e-2).residual < 1e-12
    assert qh.test_quantum_bernoulli(t, [np.eye(6)], 500, 1e-2).residual < 1e-12


def test_bernoulli_rotator_n0_oracle():
    spec = RotatorSpec(2.0, N=21, beta=0.3819660112501051)
    u = build_floquet(spec).matrix
    rho = gaussian_packet(spec, 0, 1.5, 0.4).matrix
    o = cos_theta(21)
    w, v = np.linalg.eig(u)
    re, oe = v.conj().T @ rho @ v, v.conj().T @ o @ v
    off = ~np.eye(21, dtype=bool)
    expect = abs(np.sum(re[off] * oe.T[off]))
    t = qh.Trajectory(DensityState(rho), Unitary(u))
    assert abs(t.series(o, 0)[0] - t.equilibrium.pair(o)) == pytest.approx(expect, abs=1e-10)
    lv = qh.test_quantum_bernoulli(t, [o], 200, 1e-2)
    assert lv.residual >= expect - 1e-10 and not lv.passed


# factorization

def test_factorization_examples():
    rho = random_density(make_rng(15), 3)
    assert qh.independence_factorization_residual(rho, [np.eye(3)] * 3) < 1e-14
    e0 = np.diag([1.0, 0, 0])
    gs = [np.diag([2.0, 1, 3]), np.diag([0.5, 4, 1])]
    assert qh.independence_factorization_residual(e0, gs) == 0
    res, imag = qh.independence_factorization_residual(np.eye(2) / 2, [SX, SX], details=True)
    assert res == pytest.approx(1) and imag == 0


def test_factorization_needs_two():
    with pytest.raises(EmptyProduct):
        qh.independence_factorization_residual(np.eye(2) / 2, [SX])


# verdict

def test_verdict_four_cycle():
    v = qh.quantum_verdict(four_cycle(), [SX], 400, 1e-2)
    assert v.flags() == {"ergodic": True, "mixing": False, "kolmogorov": False, "bernoulli": False}
    assert v["mixing"].parameters["tail_residual"] == pytest.approx(1)


def test_verdict_records_parameters():
    v = qh.quantum_verdict(random_traj(16, 4), [np.eye(4)], 100, 1e-2)
    for rec in v.as_records():
        assert rec["parameters"] and rec["passed"] == (rec["residual"] < rec["epsilon"])


# properties

@given(seeds, st.integers(2, 9), st.integers(0, 400))
def test_cache_and_recompute_agree(seed, dim, n):
    t = random_traj(seed, dim)
    assert np.abs(t.state(n).matrix - t.recompute(n).matrix).max() < 1e-12


@given(seeds, st.integers(2, 8), st.sampled_from([1e-3, 1e-2, 1e-1, 0.5]))
def test_verdict_inclusions(seed, dim, eps):
    t = random_traj(seed, dim, rank=1)
    obs = [random_hermitian(make_rng(seed + 1), dim), np.eye(dim)]
    v = qh.quantum_verdict(t, obs, 300, eps, k_points=16, seed=seed)
    assert v.inclusions_hold()


@given(seeds, st.integers(2, 8), st.integers(20, 300))
def test_reduction_equals_mixing(seed, dim, n):
    t = random_traj(seed, dim)
    o = random_hermitian(make_rng(seed ^ 5), dim)
    fam = qh.KFamily.reduction(o)
    k = qh.test_quantum_kolmogorov(t, fam.observables, fam.offsets, range(n + 1), 1e-2)
    assert abs(k.residual - qh.test_quantum_mixing(t, [o], n, 1e-2).residual) < 1e-12


@given(seeds, st.integers(2, 10))
def test_eigenbasis_equilibrium_is_fixed_point(seed, dim):
    t = random_traj(seed, dim)
    star = t.equilibrium.state.matrix
    u = t.step.matrix
    assert np.abs(u @ star @ u.conj().T - star).max() < 1e-10
    assert np.abs(u @ star - star @ u).max() < 1e-8


@given(seeds, st.integers(3, 8))
def test_cesaro_residual_halves(seed, dim):
    t = random_traj(seed, dim, rank=1)
    gaps = np.diff(np.concatenate([t.eigensystem.phases, t.eigensystem.phases[:1] + 2 * np.pi]))
    assume(gaps.min() > 0.05)
    o = random_hermitian(make_rng(seed + 3), dim)
    s = t.series(o, 4000)
    prof = np.full(4001, np.nan)
    prof[1:] = np.abs(np.cumsum(s[:4000]) / np.arange(1, 4001) - t.equilibrium.pair(o))
    for n in (500, 1000):
        assert doubling_ratio(prof, n) <= 0.6
