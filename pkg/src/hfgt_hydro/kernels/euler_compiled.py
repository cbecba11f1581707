"""Flatten an :class:`~hfgt_hydro.simulator.EulerProblem` and run the compiled loop."""

from __future__ import annotations

import numpy as np

from ..devices import CLAMP_MARGIN, EPS_V, ClampWarning
from ..esn import NITROGEN_UNDERFLOW, NitrogenUnderflow, NonFiniteState
from . import _euler


def _idx(values):
    return np.ascontiguousarray(values, dtype=np.int64)


def _f64(values):
    return np.ascontiguousarray(values, dtype=np.float64)


def run(problem):
    cfg = problem.config
    T = problem.tensors
    asm = problem.assembler
    places = T.places
    hp = asm.head_params
    pairs = asm.pairs
    q = problem.q0.astype(np.float64, copy=True)
    n_rec = problem.record_count()
    states = np.empty((n_rec, len(q)))
    firings = np.empty((n_rec, len(T.capabilities)))
    events: list = []
    wat, nit = places.water, places.nitrogen

    status, k, index = _euler.euler_loop(
        q,
        _idx(T.M.rows), _idx(T.M.cols), _f64(T.M.vals),
        wat.start, wat.stop - wat.start, nit.start, nit.stop - nit.start,
        _f64(hp.inv_area), _f64(hp.min_volume), _f64(hp.elevation),
        _idx([e.column for e in asm.edges]), _idx([e.origin for e in asm.edges]),
        _idx([e.destination for e in asm.edges]), _f64(asm.resistances),
        _idx([p.nitrogen_column for p in pairs]), _idx([asm.edge_of_column[p.water_column] for p in pairs]),
        _idx([p.origin_water for p in pairs]), _idx([p.destination_water for p in pairs]),
        _idx([p.origin_nitrogen for p in pairs]), _idx([p.destination_nitrogen for p in pairs]),
        _idx(problem.accept_columns), _f64(problem.exogenous.reshape(cfg.horizon + 1, -1)),
        float(cfg.dt), int(cfg.horizon), int(cfg.stride), float(cfg.constants.rho_g), EPS_V, NITROGEN_UNDERFLOW,
        1.0 - CLAMP_MARGIN,
        states, firings, events,
    )
    if status == _euler.NON_FINITE:
        raise NonFiniteState(f"non-finite marking at {places.places[index]}", k)
    if status == _euler.UNDERFLOW:
        raise NitrogenUnderflow(f"nitrogen at {places.places[index][1]} fell to {q[index]:.3e} kg", k)
    names = asm.water_names
    return states, firings, [ClampWarning(step, names[p], f) for step, p, f in events]
