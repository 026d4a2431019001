import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from cavitynet import (
    IntegratorConfig,
    SystemParams,
    build_basis,
    build_chain,
    fidelity,
    integrate,
    phase_profile,
    propagate,
    pure_state,
)
from cavitynet.errors import IntegrationAccuracyError, UndefinedFidelityError
from cavitynet.evolve import min_gap
from cavitynet.hamiltonian import snapshot_from_omega
from cavitynet.protocol import empty_protocol, split_protocol, transfer_protocol
from cavitynet.sector import StateVector, p_state_superposition
from cavitynet.targets import TargetSpec

import oracles

HERM = SystemParams()


def _fast_chain3():
    lat = build_chain(3)
    return lat, transfer_protocol(lat, [0, 1, 2], rate=0.2, fast_rate=1.0)


def test_lasers_off_leaves_p_state():
    lat = build_chain(3)
    proto = empty_protocol(lat, 0, 100.0)
    traj = integrate(lat, HERM, proto)
    assert np.array_equal(traj.final.amplitudes, pure_state(build_basis(lat), "p0").amplitudes)
    assert np.all(traj.probs[:, 0] == 1)


def test_two_cavity_transfer():
    lat = build_chain(2)
    proto = transfer_protocol(lat, [0, 1])
    traj = integrate(lat, HERM, proto)
    assert traj.probs[-1, 1] >= 0.99
    assert traj.dark_pop[0] >= 1 - 1e-4 and traj.dark_pop[-1] >= 1 - 1e-4


def test_rk4_matches_expm_piecewise():
    lat, proto = _fast_chain3()
    a = propagate(lat, HERM, proto, IntegratorConfig(method="rk4_fixed"))
    b = propagate(lat, HERM, proto, IntegratorConfig(method="expm_piecewise"))
    assert np.linalg.norm(a.amplitudes - b.amplitudes) <= 1e-6


def test_rk4_matches_adaptive_reference():
    lat, proto = _fast_chain3()
    basis = build_basis(lat)

    def rhs(t, y):
        om = proto.omega(min(t, proto.duration))
        h = oracles.hamiltonian(lat.n_nodes, lat.bonds, om / HERM.delta, HERM.w)
        return -1j * (h @ y)

    psi0 = proto.initial_vector(basis).amplitudes
    ref = solve_ivp(rhs, (0, proto.duration), psi0, method="DOP853", rtol=1e-11, atol=1e-12).y[:, -1]
    got = propagate(lat, HERM, proto).amplitudes
    assert np.linalg.norm(got - ref) <= 1e-7


def test_lossy_rk4_matches_expm():
    lat, proto = _fast_chain3()
    params = SystemParams(gamma=0.1, kappa=0.2, kappa_f=0.05, dissipative=True)
    a = propagate(lat, params, proto, IntegratorConfig(method="rk4_fixed"))
    b = propagate(lat, params, proto, IntegratorConfig(method="expm_piecewise"))
    assert np.linalg.norm(a.amplitudes - b.amplitudes) <= 1e-6


def test_populations_and_norm():
    lat, proto = _fast_chain3()
    traj = integrate(lat, HERM, proto, IntegratorConfig(sample_every=10))
    total = traj.probs.sum(axis=1) + traj.q_total + traj.f_total
    assert np.max(np.abs(total - traj.norm2)) <= 1e-12
    assert np.max(np.abs(traj.norm2 - 1)) <= 1e-8
    assert traj.meta["norm_drift"] <= 1e-8


def test_real_drives_keep_real_p_amplitudes():
    # H maps {P, F} onto Q and back, so real drives keep P amplitudes real
    lat, proto = _fast_chain3()
    for method in ("rk4_fixed", "expm_piecewise"):
        traj = integrate(lat, HERM, proto, IntegratorConfig(method=method, sample_every=50), track_dark=False)
        defined = np.isfinite(traj.phases)
        ph = np.abs(traj.phases[defined])
        assert np.all((ph < 1e-9) | (np.abs(ph - np.pi) < 1e-9))


@settings(max_examples=10)
@given(st.complex_numbers(max_magnitude=2), st.complex_numbers(max_magnitude=2))
def test_linearity(alpha, beta):
    lat, proto = _fast_chain3()
    basis = build_basis(lat)
    v1 = pure_state(basis, "p0").amplitudes
    v2 = (pure_state(basis, "q1").amplitudes + pure_state(basis, "f0").amplitudes) / np.sqrt(2)
    a = propagate(lat, HERM, proto, psi0=v1).amplitudes
    b = propagate(lat, HERM, proto, psi0=v2).amplitudes
    c = propagate(lat, HERM, proto, psi0=alpha * v1 + beta * v2).amplitudes
    assert np.allclose(c, alpha * a + beta * b, atol=1e-10)


def test_lossy_norm_never_grows():
    lat = build_chain(4)
    proto = transfer_protocol(lat, [0, 1, 2, 3], omega_max=3.0, rate=0.05)
    params = SystemParams(gamma=0.1, kappa=0.3, kappa_f=0.1, dissipative=True)
    traj = integrate(lat, params, proto, IntegratorConfig(sample_every=1), track_dark=False)
    assert traj.max_norm_increase() <= 1e-10
    assert traj.norm2[-1] < 1


@pytest.mark.parametrize("name", ["gamma", "kappa", "kappa_f"])
def test_fidelity_non_increasing_in_each_loss(name):
    lat = build_chain(4)
    proto = transfer_protocol(lat, [0, 1, 2, 3])
    vals = []
    for v in (0.0, 0.05, 0.1):
        params = SystemParams(dissipative=True, **{name: v})
        vals.append(fidelity(propagate(lat, params, proto), proto.target))
    assert vals[0] >= vals[1] >= vals[2]


def test_fiber_loss_lowers_fidelity():
    lat = build_chain(4)
    proto = transfer_protocol(lat, [0, 1, 2, 3])
    f = {
        kf: fidelity(propagate(lat, SystemParams(gamma=0.1, kappa_f=kf, dissipative=True), proto), proto.target)
        for kf in (0.0, 0.1)
    }
    assert f[0.1] < f[0.0]


def test_fidelity_examples():
    basis = build_basis(build_chain(3))
    tgt = TargetSpec.w_state([0, 1])
    psi = p_state_superposition(basis, {0: 1 / np.sqrt(2), 1: 1 / np.sqrt(2)})
    assert fidelity(psi, tgt) == pytest.approx(1.0)
    assert fidelity(tgt.vector(basis), tgt) == pytest.approx(1.0)
    half = psi * 0.5
    assert fidelity(half, tgt) == pytest.approx(0.25)
    assert fidelity(half, tgt, conditional=True) == pytest.approx(1.0)
    with pytest.raises(UndefinedFidelityError):
        fidelity(StateVector(basis, np.zeros(basis.dim)), tgt, conditional=True)


def test_phase_profile():
    lat = build_chain(3)
    basis = build_basis(lat)
    proto = empty_protocol(lat, {"p0": 1.0, "p1": 1j}, 1.0)
    traj = integrate(lat, HERM, proto)
    prof = phase_profile(traj, 1.0, reference=0, spacing=np.pi / 2, nodes=[0, 1])
    assert prof.phases[1] == pytest.approx(np.pi / 2)
    assert prof.undefined.tolist() == [False, False, True]
    assert np.isnan(prof.phases[2])
    assert prof.equispacing == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        phase_profile(traj, 1.0, reference=2)
    assert basis.dim == traj.states.shape[1]


def test_step_bound_enforced():
    lat, proto = _fast_chain3()
    with pytest.raises(IntegrationAccuracyError):
        integrate(lat, HERM, proto, IntegratorConfig(step=0.2))


def test_norm_drift_reported():
    lat, proto = _fast_chain3()
    with pytest.raises(IntegrationAccuracyError):
        integrate(lat, HERM, proto, IntegratorConfig(step=0.02, norm_drift_tol=1e-16))


def test_trajectory_table():
    lat, proto = _fast_chain3()
    traj = integrate(lat, HERM, proto, IntegratorConfig(sample_every=100))
    cols = traj.columns()
    assert cols[:4] == ["t", "P1", "P2", "P3"] and cols[-5:] == ["Qtot", "Ftot", "norm2", "dark_pop", "fidelity"]
    assert traj.table().shape == (traj.times.size, len(cols))
    assert traj.times[-1] == pytest.approx(proto.duration)
    assert np.array_equal(traj.state_at(proto.duration).amplitudes, traj.final.amplitudes)


def test_min_gap_positive_when_driven():
    lat = build_chain(2)
    proto = split_protocol(lat, {0: 1.0}, {0: 1 / np.sqrt(2), 1: 1 / np.sqrt(2)})
    gap = min_gap(lat, HERM, proto, np.array([proto.duration / 2]))
    basis = build_basis(lat)
    snap = snapshot_from_omega(proto.omega(proto.duration / 2), HERM)
    assert gap > 0 and np.isfinite(gap)
    assert snap.s.shape == (2,) and basis.dim == 5


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(step=0)
    with pytest.raises(ValueError):
        IntegratorConfig(method="euler")
    with pytest.raises(ValueError):
        IntegratorConfig(sample_every=0)
