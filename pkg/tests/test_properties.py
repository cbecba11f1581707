"""Cross-module invariants over bundled and randomly generated networks."""

import dataclasses
import math
import re

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hfgt_hydro.architecture import CapabilityClass, ExogenousSignal, SignalShape, validate
from hfgt_hydro.devices import PhysicalConstants, water_transport_rates
from hfgt_hydro.esn import SimulationError
from hfgt_hydro.hfit import build_tensors
from hfgt_hydro.ingest import emit_scenario, parse_scenario
from hfgt_hydro.reference import OdeModel, rk4_integrate
from hfgt_hydro.simulator import concentrations, simulate, stability_max_dt

from conftest import networks, two_tank, with_config

slow = settings(max_examples=40, deadline=None)


def _safe_config(doc, horizon=30):
    """A step inside the stability bound, so random networks stay well behaved."""
    try:
        dt = stability_max_dt(doc.architecture) / 2
    except ValueError:
        dt = 60.0
    return with_config(doc, dt=dt, horizon=horizon)


def _accept_columns(traj, doc, *classes):
    T = build_tensors(doc.architecture)
    return [traj.capabilities.index(T.capabilities.ids[c]) for c in T.capabilities.columns_of(*classes)]


# -- architecture ----------------------------------------------------------------

@slow
@given(networks())
def test_validate_pure_and_valid_nets_simulate(text):
    doc = parse_scenario(text)
    first, second = validate(doc.architecture), validate(doc.architecture)
    assert first.render() == second.render() and first.valid
    traj = simulate(_safe_config(doc, horizon=5))
    assert traj.states.shape[0] == 6


# -- hfit ------------------------------------------------------------------------

def _reorder_buffers(text, order):
    block = re.search(r"  <buffers>\n(.*?)\n  </buffers>", text, re.S)
    lines = block.group(1).split("\n")
    return text.replace(block.group(1), "\n".join(lines[i] for i in order))


@slow
@given(networks(), st.randoms(use_true_random=False))
def test_permutation_equivariance(text, rnd):
    base = parse_scenario(text)
    order = list(range(len(base.architecture.buffers)))
    rnd.shuffle(order)
    perm = parse_scenario(_reorder_buffers(text, order))
    A, B = build_tensors(base.architecture), build_tensors(perm.architecture)
    assert A.capabilities.ids == B.capabilities.ids
    rows = [B.places[key] for key in A.places.places]  # A's row i lives at B's rows[i]
    for a, b in ((A.Mplus, B.Mplus), (A.Mminus, B.Mminus), (A.M, B.M)):
        assert sorted((rows[r], c, v) for r, c, v in a.triplets()) == sorted(b.triplets())


@pytest.mark.parametrize("name", ["example1", "example2", "example3"])
def test_round_trip_same_triplets(name, request):
    doc = request.getfixturevalue(name.replace("example", "ex"))
    again = parse_scenario(emit_scenario(doc))
    A, B = build_tensors(doc.architecture), build_tensors(again.architecture)
    assert A.M.triplets() == B.M.triplets() and A.Mplus.triplets() == B.Mplus.triplets()


# -- devices ---------------------------------------------------------------------

@given(st.lists(st.floats(-100, 100), min_size=5, max_size=5), st.floats(-100, 100), st.floats(0.1, 10))
def test_rates_linear_and_antisymmetric(ex2, heads, shift, scale):
    T = build_tensors(ex2.architecture)
    R = np.array([3e5, 3e5, 2.5e5, 3.5e5])
    c = PhysicalConstants()
    h = np.array(heads)
    base = water_transport_rates(h, T, R, c)
    np.testing.assert_allclose(water_transport_rates(h + shift, T, R, c), base, atol=1e-9)
    np.testing.assert_allclose(water_transport_rates(scale * h, T, R, c), scale * base, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(water_transport_rates(h, T, R * scale, c), base / scale, rtol=1e-12, atol=1e-15)
    # swap endpoints of a single edge: lake1 (row 0) and point1 (row 3)
    swapped = h.copy()
    swapped[[0, 3]] = h[[3, 0]]
    assert water_transport_rates(swapped, T, R, c)[0] == pytest.approx(-base[0], rel=1e-12, abs=1e-12)


@slow
@given(networks(), st.floats(1.0, 1e6))
def test_volumes_respect_minimum(text, dt):
    # any dt, including unstable ones: the clamp alone must hold the floor
    doc = with_config(parse_scenario(text), dt=dt, horizon=25)
    try:
        traj = simulate(doc)
    except SimulationError:
        return
    vmin = np.array([doc.architecture.buffer(b).min_volume for b in traj.buffers()])
    assert np.all(traj.water() >= vmin - 1e-9)


@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.floats(1e-3, 1e9), st.floats(-1e9, 1e9),
       st.lists(st.floats(0, 1e12), min_size=1, max_size=50))
def test_exogenous_nonnegative(mean, amp, period, phase, times):
    v = ExogenousSignal("x", SignalShape.SINUSOID, (mean, amp, period, phase)).evaluate(np.array(times))
    assert np.all(v >= 0) and np.all(np.isfinite(v))


# -- esn / simulator budgets -------------------------------------------------------

@slow
@given(networks())
def test_budgets_every_row(text):
    doc = _safe_config(parse_scenario(text), horizon=40)
    traj = simulate(doc)
    dt = doc.config.dt
    acc_w = _accept_columns(traj, doc, CapabilityClass.ACCEPT_H2O_LAKE, CapabilityClass.ACCEPT_H2O_LAND)
    acc_n = _accept_columns(traj, doc, CapabilityClass.ACCEPT_N_LAND)
    total_v = np.array([math.fsum(r) for r in traj.water()])
    total_m = np.array([math.fsum(r) for r in traj.nitrogen()])
    dv = np.diff(total_v) - traj.firings[:-1, acc_w].sum(axis=1) * dt
    # relative to the larger total across the step, where the rounding happens
    assert np.all(np.abs(dv) <= 1e-12 * np.maximum(total_v[:-1], total_v[1:]) + 1e-300)
    dm = np.diff(total_m) - traj.firings[:-1, acc_n].sum(axis=1) * dt
    assert np.all(np.abs(dm) <= 1e-9 * np.maximum(total_m[:-1], 1e-300) + 1e-12 * len(traj.buffers()))


def test_determinism_and_warnings_reproducible():
    doc = dataclasses.replace(two_tank(area=1.0, resistance=1e3, v_a=5.0, v_b=0.0, dt=1.0, horizon=20))
    a, b = simulate(doc), simulate(doc)
    assert np.array_equal(a.states, b.states) and np.array_equal(a.firings, b.firings)
    assert [str(w) for w in a.warnings] == [str(w) for w in b.warnings] and a.warnings


def test_first_order_refinement(ex1):
    dt0 = stability_max_dt(ex1.architecture) / 10
    steps = round(ex1.config.duration / dt0)
    finals = []
    for j in range(4):
        traj = simulate(with_config(ex1, dt=dt0 / 2 ** j, horizon=steps * 2 ** j))
        finals.append(concentrations(traj)["lake1"][-1])
    d = np.diff(finals)
    ratios = d[1:] / d[:-1]
    assert np.all((0.4 <= ratios) & (ratios <= 0.6)), ratios


# -- reference -------------------------------------------------------------------

@slow
@given(networks(), st.floats(0, 1e8))
def test_ode_nitrogen_derivative_matches_inputs(text, t):
    doc = parse_scenario(text)
    model = OdeModel(doc.architecture)
    y = model.initial_state()
    d = model.rhs(y, t)
    inject = sum(float(s.evaluate(t)) for s in doc.architecture.signals
                 if doc.architecture.capability(s.target).operand == "N")
    dm = d[model.n:]
    scale = max(np.abs(dm).max(initial=0.0), abs(inject), 1e-300)
    assert abs(math.fsum(dm) - inject) <= 1e-12 * scale * len(dm)


def test_equilibrium_fixed_point_both_integrators():
    doc = two_tank(v_a=1000.0, v_b=1000.0, horizon=30)
    model = OdeModel(doc.architecture)
    assert not model.rhs(model.initial_state(), 0.0).any()
    for traj in (simulate(doc), rk4_integrate(doc, doc.config.dt / 4)):
        assert np.array_equal(traj.states, np.repeat(traj.states[:1], len(traj), axis=0))
