import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cavitynet import (
    IntegratorConfig,
    SystemParams,
    build_chain,
    build_square,
    fidelity,
    integrate,
    propagate,
)
from cavitynet.errors import ScheduleError
from cavitynet.protocol import (
    Protocol,
    RampSegment,
    Schedule,
    empty_protocol,
    evaluate,
    fourier_protocol,
    split_protocol,
    transfer_protocol,
    w_state_protocol,
)
from cavitynet.targets import TargetSpec

H = 1 / math.sqrt(2)


def _ramp(kind="turn_on", t0=50.0, r=0.1, amp=2.0, phase=None):
    return RampSegment(kind, 0.0, 100.0, amp, r, t0, phase)


def test_turn_on_midpoint_and_saturation():
    sched = Schedule((_ramp(),))
    assert evaluate(sched, 50.0, 100.0) == pytest.approx(1.0)
    seg = _ramp()
    assert abs(seg.magnitude(50.0 + 10 / 0.1) - 2.0) < 1e-8
    off = _ramp("turn_off")
    assert off.magnitude(50.0) == pytest.approx(1.0)
    assert off.magnitude(50.0 + 10 / 0.1) < 1e-8


def test_phase_makes_drive_imaginary():
    val = Schedule((_ramp(),), phase=np.pi / 2).evaluate(80.0)
    assert abs(val.real) < 1e-15
    assert val.imag == pytest.approx(_ramp().magnitude(80.0))
    seg_phase = Schedule((_ramp(phase=np.pi),), phase=0.3).evaluate(80.0)
    assert seg_phase.real < 0 and abs(seg_phase.imag) < 1e-15


def test_evaluate_range_and_vectorisation():
    sched = Schedule((_ramp(),))
    with pytest.raises(ScheduleError):
        evaluate(sched, 101.0, 100.0)
    with pytest.raises(ScheduleError):
        evaluate(sched, -1.0, 100.0)
    ts = np.linspace(0, 100, 7)
    assert np.allclose(sched.evaluate(ts), [sched.evaluate(t) for t in ts])
    # zero outside every window
    assert Schedule((RampSegment("hold", 10, 20, 1.0),)).evaluate(25.0) == 0


def test_segment_validation():
    with pytest.raises(ScheduleError):
        RampSegment("sideways", 0, 1)
    with pytest.raises(ScheduleError):
        RampSegment("hold", 2, 1, 1.0)
    with pytest.raises(ScheduleError):
        RampSegment("turn_on", 0, 1, 1.0, rate=0.0)
    with pytest.raises(ScheduleError):
        RampSegment("hold", 0, 1, -1.0)
    with pytest.raises(ScheduleError):
        Schedule((RampSegment("hold", 0, 2, 1.0), RampSegment("hold", 1, 3, 1.0)))
    with pytest.raises(ScheduleError):
        Protocol((Schedule((RampSegment("hold", 0, 20, 1.0),)),), 10.0, {"p0": 1})


def test_transfer_counterintuitive_order():
    lat = build_chain(3)
    proto = transfer_protocol(lat, [0, 1, 2], rate=0.05)
    assert proto.initial == (("p0", 1 + 0j),)
    assert proto.target == TargetSpec.site(2)
    ts = np.linspace(0, proto.duration, 4001)
    om = np.abs(proto.omega(ts))
    # first hop: node 1 rises before node 0 is switched on
    t_on = {k: ts[np.argmax(om[:, k] > 0.5)] for k in (0, 1)}
    assert t_on[1] < t_on[0]
    # lasers start and end at the tanh tail, below 1e-6 of the peak
    assert om[0, :].max() <= 1e-6 * proto.omega_max() and om[-1, :].max() <= 1e-6 * proto.omega_max()
    assert proto.continuity_defects() == {}
    assert om.max() <= proto.omega_max() + 1e-15


def test_transfer_errors_and_identity():
    lat = build_chain(6)
    with pytest.raises(ValueError):
        transfer_protocol(lat, [1, 3])
    ident = transfer_protocol(lat, [2])
    assert ident.duration == 0 and all(not s.segments for s in ident.schedules)
    psi = propagate(lat, SystemParams(), ident)
    assert fidelity(psi, ident.target) == 1.0


@pytest.mark.parametrize(
    "make",
    [
        lambda: transfer_protocol(build_chain(4), [0, 1, 2, 3]),
        lambda: split_protocol(build_chain(4, True), {0: H, 1: H}, {1: H, 2: 0.5, 3: 0.5}),
        lambda: fourier_protocol(build_chain(8), 2 * np.pi / 7),
        lambda: split_protocol(build_square(3, 3), {0: H, 2: H}, {4: H, 6: H}),
    ],
)
def test_generators_are_continuous_and_round_trip(make):
    proto = make()
    assert proto.continuity_defects() == {}
    proto.check()
    blob = json.loads(json.dumps(proto.to_dict()))
    back = Protocol.from_dict(blob, proto.n_nodes)
    assert back == proto
    assert back.digest() == proto.digest()
    ts = np.linspace(0, proto.duration, 1001)
    assert np.array_equal(back.omega(ts), proto.omega(ts))


def test_discontinuity_is_reported():
    seg = RampSegment("turn_on", 0.0, 10.0, 1.0, 0.1, 5.0)
    bad = Protocol((Schedule((seg,)),), 10.0, {"p0": 1})
    assert bad.continuity_defects()
    with pytest.raises(ScheduleError):
        bad.check()


def test_scaling_doubles_durations():
    proto = transfer_protocol(build_chain(3), [0, 1, 2])
    twice = proto.scaled(2.0)
    assert twice.duration == pytest.approx(2 * proto.duration)
    assert np.allclose(twice.omega(np.array([2 * 100.0, 2 * 700.0])), proto.omega(np.array([100.0, 700.0])))


def test_split_identity():
    lat = build_chain(4, True)
    proto = split_protocol(lat, {0: H, 1: H}, {0: H, 1: H})
    assert proto.duration == 0
    assert fidelity(propagate(lat, SystemParams(), proto), proto.target) == pytest.approx(1.0)


def test_split_requires_normalised_weights():
    with pytest.raises(ValueError):
        split_protocol(build_chain(3), {0: 1.0}, {1: 0.5, 2: 0.5})


def test_split_flags_merges():
    lat = build_chain(3)
    proto = split_protocol(lat, {0: H, 2: H}, {1: 1.0})
    assert "unsupported" in proto.meta


def test_ring_split_reaches_target():
    lat = build_chain(4, True)
    proto = split_protocol(lat, {0: H, 1: H}, {1: H, 2: 0.5, 3: 0.5})
    psi = propagate(lat, SystemParams(), proto)
    assert fidelity(psi, proto.target) > 0.999


def test_w_state_three_chain():
    lat = build_chain(3)
    proto = w_state_protocol(lat, 0, [0, 1, 2])
    psi = propagate(lat, SystemParams(), proto)
    assert fidelity(psi, TargetSpec.w_state([0, 1, 2])) > 0.999


def test_fourier_requires_chain():
    with pytest.raises(ValueError):
        fourier_protocol(build_chain(4, True), 0.3)
    with pytest.raises(ValueError):
        fourier_protocol(build_square(3, 3), 0.3)


def test_fourier_zero_phase_gives_uniform_phases():
    lat = build_chain(4)
    proto = fourier_protocol(lat, 0.0, rate=0.025)
    traj = integrate(lat, SystemParams(), proto, IntegratorConfig(sample_every=1000), track_dark=False)
    a = traj.final.A[1:]
    rel = np.angle(a / a[0])
    assert np.max(np.abs(rel)) < 1e-3
    assert np.allclose(np.abs(a) ** 2, 1 / 3, atol=5e-3)


def test_adiabatic_convergence_three_chain():
    lat = build_chain(3)
    base = transfer_protocol(lat, [0, 1, 2], rate=0.08)
    errs = []
    for f in (1, 2, 4):
        p = base.scaled(f)
        errs.append(1 - fidelity(propagate(lat, SystemParams(), p), p.target))
    assert errs[0] > errs[1] > errs[2]


@given(st.floats(0, 2 * np.pi))
def test_global_phase_leaves_populations(dphi):
    lat = build_chain(3)
    proto = transfer_protocol(lat, [0, 1, 2], rate=0.2, fast_rate=1.0)
    cfg = IntegratorConfig(sample_every=200)
    a = integrate(lat, SystemParams(), proto, cfg, track_dark=False)
    b = integrate(lat, SystemParams(), proto.with_global_phase(dphi), cfg, track_dark=False)
    assert np.max(np.abs(a.probs - b.probs)) < 1e-10


def test_empty_protocol():
    lat = build_chain(3)
    proto = empty_protocol(lat, 1, 50.0)
    assert proto.omega(25.0).tolist() == [0, 0, 0]
    with pytest.raises(ScheduleError):
        proto.omega(60.0)
