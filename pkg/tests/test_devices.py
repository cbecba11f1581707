import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hfgt_hydro.architecture import ExogenousSignal, SignalShape
from hfgt_hydro.devices import (
    CLAMP_MARGIN,
    EPS_V,
    HeadParameters,
    MixingPair,
    PhysicalConstants,
    WaterEdge,
    clamp_withdrawals,
    exogenous_rates,
    hydraulic_head,
    nitrogen_transport_rates,
    water_transport_rates,
)
from hfgt_hydro.hfit import build_tensors
from hfgt_hydro.simulator import simulate

KEEP = 1.0 - CLAMP_MARGIN  # share of the available volume the clamp may draw

RHO_G = 1000.0 * 9.81


def params(area, elev, vmin):
    return HeadParameters(1.0 / np.asarray(area, float), np.asarray(elev, float), np.asarray(vmin, float))


def test_head_threshold_and_identity():
    np.testing.assert_array_equal(hydraulic_head([5.0], params([7.0], [0.0], [5.0])), [0.0])
    np.testing.assert_array_equal(hydraulic_head([3.0], params([1.0], [3.0], [1.0])), [5.0])


def test_head_example1_initial(ex1):
    T = build_tensors(ex1.architecture)
    hp = HeadParameters.from_architecture(ex1.architecture, T.places)
    # lake 1e6 m^3 over 1e5 m^2 at 5 m; point 1e5 m^3 over 1e6 m^2 at 0 m
    np.testing.assert_allclose(hydraulic_head([1e6, 1e5], hp), [15.0, 0.1], rtol=1e-15)


def test_rates_example1(ex1):
    T = build_tensors(ex1.architecture)
    c = PhysicalConstants()
    rate = water_transport_rates([15.0, 0.1], T, [2.94e5], c)
    assert rate[0] == pytest.approx(RHO_G / 2.94e5 * (1e6 / 1e5 - 1e5 / 1e6 + 5 - 0), rel=1e-14)
    assert water_transport_rates([2.0, 2.0], T, [2.94e5], c)[0] == 0.0
    assert water_transport_rates([15.0, 0.1], T, [5.88e5], c)[0] == pytest.approx(rate[0] / 2, rel=1e-15)
    assert water_transport_rates([0.1, 15.0], T, [2.94e5], c)[0] == pytest.approx(-rate[0], rel=1e-15)


def test_clamp_at_minimum():
    hp = params([1.0, 1.0], [0.0, 0.0], [5.0, 0.0])
    rates, warns = clamp_withdrawals([2.0], [5.0, 1.0], hp, 10.0, [WaterEdge(0, 0, 1)], ["a", "b"], step=7)
    assert rates.tolist() == [0.0]
    assert len(warns) == 1 and warns[0].place == "a" and warns[0].step == 7 and warns[0].factor == 0.0


def test_clamp_noop():
    hp = params([1.0, 1.0], [0.0, 0.0], [0.0, 0.0])
    rates, warns = clamp_withdrawals([2.0, -1.0], [100.0, 100.0], hp, 1.0, [WaterEdge(0, 0, 1), WaterEdge(1, 0, 1)])
    assert rates.tolist() == [2.0, -1.0] and warns == []


def test_clamp_two_outgoing_same_factor():
    # 10 m^3 available, 3 + 2 m^3/s requested for 4 s = 20 m^3 -> factor 1/2
    hp = params([1.0, 1.0, 1.0], [0.0] * 3, [2.0, 0.0, 0.0])
    edges = [WaterEdge(0, 0, 1), WaterEdge(1, 0, 2)]
    rates, warns = clamp_withdrawals([3.0, 2.0], [12.0, 0.0, 0.0], hp, 4.0, edges)
    np.testing.assert_allclose(rates, [1.5 * KEEP, 1.0 * KEEP], rtol=1e-15)
    assert [w.factor for w in warns] == [0.5 * KEEP]


def test_clamp_backflow_counts_against_destination():
    hp = params([1.0, 1.0], [0.0, 0.0], [0.0, 0.0])
    rates, warns = clamp_withdrawals([-4.0], [100.0, 2.0], hp, 1.0, [WaterEdge(0, 0, 1)], ["a", "b"])
    np.testing.assert_allclose(rates, [-2.0 * KEEP], rtol=1e-15)
    assert warns[0].place == "b"


def test_clamp_leaves_inflows_alone():
    # place 1 is drained by edge 1 and fed by edge 0; only edge 1 scales
    hp = params([1.0] * 3, [0.0] * 3, [0.0] * 3)
    edges = [WaterEdge(0, 0, 1), WaterEdge(1, 1, 2)]
    rates, _ = clamp_withdrawals([5.0, 4.0], [100.0, 2.0, 0.0], hp, 1.0, edges)
    assert rates[0] == 5.0
    np.testing.assert_allclose(rates[1], 2.0 * KEEP, rtol=1e-15)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=1, max_size=6), st.lists(st.floats(0, 50), min_size=4, max_size=4),
       st.floats(0.01, 10))
def test_clamp_never_overdraws(raw, volumes, dt):
    edges = [WaterEdge(i, i % 4, (i + 1) % 4) for i in range(len(raw))]
    hp = params([1.0] * 4, [0.0] * 4, [1.0] * 4)
    rates, _ = clamp_withdrawals(raw, volumes, hp, dt, edges)
    drawn = np.zeros(4)
    for r, e in zip(rates, edges):
        drawn[e.origin if r > 0 else e.destination] += abs(r)
        assert abs(r) <= abs(raw[edges.index(e)]) and np.sign(r) in (0, np.sign(raw[edges.index(e)]))
    avail = np.maximum(np.array(volumes) - 1.0, 0.0)
    assert np.all(drawn * dt <= avail * (1 + 1e-12) + 1e-300)


PAIR = MixingPair(1, 0, 0, 1, 0, 1)


def test_nitrogen_rates():
    assert nitrogen_transport_rates([0.0, 5.0], [10.0, 10.0], [1.0], [PAIR]).tolist() == [0.0]
    assert nitrogen_transport_rates([2.0, 0.0], [10.0, 10.0], [1.0], [PAIR]).tolist() == [pytest.approx(0.2)]
    # backflow carries the destination's concentration
    assert nitrogen_transport_rates([2.0, 3.0], [10.0, 30.0], [-1.5], [PAIR])[0] == pytest.approx(-0.15)
    assert nitrogen_transport_rates([2.0, 3.0], [EPS_V / 2, 30.0], [1.0], [PAIR]).tolist() == [0.0]


def test_effluent_concentration_tracks_lake(ex1):
    traj = simulate(ex1)
    ids = traj.capabilities
    w, n = ids.index("river1_h2o"), ids.index("river1_n")
    c_eff = traj.firings[:, n] / traj.firings[:, w]
    c_lake = traj.states[:, traj.places["N", "lake1"]] / traj.states[:, traj.places["H2O", "lake1"]]
    np.testing.assert_allclose(c_eff, c_lake, rtol=1e-14)


def test_exogenous_shapes():
    sig = [ExogenousSignal("a", SignalShape.CONSTANT, (0.5,)),
           ExogenousSignal("b", SignalShape.SINUSOID, (1.0, 2.0, 100.0, 0.0))]
    assert exogenous_rates(1234.5, sig)["a"] == 0.5
    assert exogenous_rates(75.0, sig)["b"] == 0.0  # trough: 1 - 2 floored
    assert exogenous_rates(25.0, sig)["b"] == pytest.approx(3.0)


def test_fertilizer_firing_is_periodic(ex3):
    traj = simulate(ex3)
    u = traj.firings[:, traj.capabilities.index("fert_land1")]
    spec = np.abs(np.fft.rfft(u - u.mean()))
    freqs = np.fft.rfftfreq(len(u), d=ex3.config.dt)
    f_peak = freqs[np.argmax(spec)]
    assert 1.0 / f_peak == pytest.approx(365 * 86400, rel=0.05)
