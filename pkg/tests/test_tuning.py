import numpy as np
import pytest

from cavitynet import SystemParams, build_chain
from cavitynet.errors import ConfigError
from cavitynet.protocol import empty_protocol, transfer_protocol, w_state_protocol
from cavitynet.targets import TargetSpec
from cavitynet.tuning import optimize, parse_free_params

HERM = SystemParams()


@pytest.fixture(scope="module")
def short_transfer():
    lat = build_chain(2)
    return lat, transfer_protocol(lat, [0, 1], rate=0.2, fast_rate=1.0)


def test_identity_protocol_is_kept():
    lat = build_chain(2)
    proto = empty_protocol(lat, 0, 10.0, target=TargetSpec.site(0))
    res = optimize(proto, lat, HERM, ["omega"], budget=20)
    assert res.fidelity == pytest.approx(1.0)
    assert res.protocol is proto


def test_short_ramps_improve(short_transfer):
    lat, proto = short_transfer
    res = optimize(proto, lat, HERM, ["scale"], budget=30)
    assert res.initial_fidelity < 0.95
    assert res.fidelity > 0.999
    assert res.evaluations <= 30
    assert res.protocol.meta["optimized"]["evaluations"] == res.evaluations


def test_w_state_reaches_threshold():
    lat = build_chain(3)
    proto = w_state_protocol(lat, 0, [0, 1, 2], rate=0.2, fast_rate=1.0)
    res = optimize(proto, lat, HERM, ["scale", "omega"], budget=500, seed=1, stop_at=0.99)
    assert res.initial_fidelity < 0.7
    assert res.fidelity >= 0.98 and res.evaluations <= 500


def test_segment_parameters_never_worse(short_transfer):
    lat, proto = short_transfer
    res = optimize(proto, lat, HERM, ["0:0:rate", "1:0:center", "1:1:phase"], budget=25, seed=3)
    assert res.fidelity >= res.initial_fidelity
    assert not res.protocol.continuity_defects()


def test_budget_zero_returns_input(short_transfer):
    lat, proto = short_transfer
    res = optimize(proto, lat, HERM, ["scale"], budget=0)
    assert res.protocol is proto
    assert res.fidelity == res.initial_fidelity
    with pytest.raises(ValueError):
        optimize(proto, lat, HERM, ["scale"], budget=-1)


def test_deterministic_given_seed(short_transfer):
    lat, proto = short_transfer
    a = optimize(proto, lat, HERM, ["0:0:rate", "1:0:center"], budget=20, seed=7)
    b = optimize(proto, lat, HERM, ["0:0:rate", "1:0:center"], budget=20, seed=7)
    assert np.array_equal(a.x, b.x) and a.history == b.history
    assert a.protocol.digest() == b.protocol.digest()


@pytest.mark.parametrize("name", ["speed", "0:0", "x:0:rate", "0:0:width", "9:0:rate", "0:9:rate"])
def test_invalid_names(short_transfer, name):
    _, proto = short_transfer
    with pytest.raises(ConfigError):
        parse_free_params(proto, [name])


def test_aliases_resolve(short_transfer):
    _, proto = short_transfer
    a, b = parse_free_params(proto, ["0:0:r", "1:1:omega_max"])
    assert (a.field, b.field) == ("rate", "amplitude")
    assert a.read(proto) == pytest.approx(proto.schedules[0].segments[0].rate)


def test_stop_at_ends_early(short_transfer):
    lat, proto = short_transfer
    full = optimize(proto, lat, HERM, ["scale"], budget=30)
    early = optimize(proto, lat, HERM, ["scale"], budget=30, stop_at=0.99)
    assert early.fidelity >= 0.99 and early.evaluations < full.evaluations
