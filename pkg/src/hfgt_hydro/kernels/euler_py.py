"""Reference time loop built directly on the net and device functions."""

from __future__ import annotations

import numpy as np

from ..esn import EngineeringSystemNet


def run(problem):
    cfg = problem.config
    dt, K, stride = cfg.dt, cfg.horizon, cfg.stride
    net = EngineeringSystemNet(problem.tensors, problem.q0.copy())
    asm = problem.assembler
    n_rec = problem.record_count()
    states = np.empty((n_rec, len(net.marking)))
    firings = np.empty((n_rec, len(problem.tensors.capabilities)))
    warnings = []
    for k in range(K + 1):
        fv = asm(net.marking, k * dt, dt, k)
        if k % stride == 0:
            states[k // stride] = net.marking
            firings[k // stride] = fv.U
        if k == K:
            break
        warnings += fv.warnings
        net.fire(fv.U, dt, k)
    return states, firings, warnings
