"""Continuous-time oracle: the lake/point mass balances written per buffer and integrated with RK4.

This path never touches the incidence matrices. It walks the
architecture's transport capabilities as an edge list and sums inflows and
outflows per buffer, so agreement with the Euler engine cross-checks the
matrix construction as well as the time discretisation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .architecture import BUFFER_CLASS_ORDER, CAPABILITY_BLOCK_ORDER, InstantiatedArchitecture, QuantityKind
from .devices import CLAMP_MARGIN, EPS_V, PhysicalConstants
from .esn import NonFiniteState
from .hfit import PlaceIndex
from .simulator import Trajectory, concentrations, stability_max_dt


class MismatchedArchitecture(ValueError):
    pass


@dataclass(frozen=True)
class _Edge:
    water_id: str
    nitrogen_id: str | None
    origin: int  # buffer position in the layout
    destination: int
    resistance: float


class OdeModel:
    """Right-hand side ``d[V; m]/dt`` for one architecture.

    The state is ``[V_1..V_n, m_1..m_n]`` with buffers ordered lake, land,
    point (declaration order inside each class), the same order the
    discrete marking uses.
    """

    def __init__(self, arch: InstantiatedArchitecture, constants: PhysicalConstants = PhysicalConstants()):
        self.arch = arch
        self.rho_g = constants.rho * constants.g
        self.buffers = [b for cls in BUFFER_CLASS_ORDER for b in arch.buffers if b.buffer_class is cls]
        pos = {b.id: i for i, b in enumerate(self.buffers)}
        self.n = len(self.buffers)
        self.area = np.array([b.surface_area for b in self.buffers])
        self.elev = np.array([b.elevation for b in self.buffers])
        self.vmin = np.array([b.min_volume for b in self.buffers])

        water_kind = {o.id: o.kind for o in arch.operands}
        carriers = {c.paired_with: c.id for c in arch.capabilities
                    if c.origin is not None and water_kind.get(c.operand) is QuantityKind.MASS}
        self.edges = [
            _Edge(c.id, carriers.get(c.id), pos[c.origin], pos[c.destination], c.resistance)
            for c in arch.capabilities
            if c.origin is not None and water_kind.get(c.operand) is QuantityKind.VOLUME
        ]
        signals = {s.target: s for s in arch.signals}
        # (capability id, is_water, buffer position, signal or None)
        self.accepts = [
            (c.id, water_kind[c.operand] is QuantityKind.VOLUME, pos[c.location], signals.get(c.id))
            for c in arch.capabilities if c.kind.value == "accept"
        ]

        order = {cls: i for i, cls in enumerate(CAPABILITY_BLOCK_ORDER)}
        caps = sorted(enumerate(arch.capabilities), key=lambda ic: (order[arch.capability_class(ic[1])], ic[0]))
        self.capability_ids = tuple(c.id for _, c in caps)

        counts = [sum(1 for b in self.buffers if b.buffer_class is cls) for cls in BUFFER_CLASS_ORDER]
        bounds = np.cumsum([0] + counts + counts)
        self.places = PlaceIndex(
            tuple((arch.water.id, b.id) for b in self.buffers) + tuple((arch.nitrogen.id, b.id) for b in self.buffers),
            tuple(slice(int(bounds[i]), int(bounds[i + 1])) for i in range(6)),
        )

    def initial_state(self) -> np.ndarray:
        return np.array([b.initial_water_volume for b in self.buffers] +
                        [b.initial_nitrogen_mass for b in self.buffers], dtype=float)

    def rates(self, y, t: float, dt: float | None = None) -> dict[str, float]:
        """Every capability's instantaneous rate; mixing capabilities fire at zero."""
        V, m = y[:self.n], y[self.n:]
        out = dict.fromkeys(self.capability_ids, 0.0)
        for cap_id, _, _, sig in self.accepts:
            if sig is not None:
                out[cap_id] = float(sig.evaluate(t))

        head = (V - self.vmin) / self.area + self.elev
        flow = [self.rho_g * (head[e.origin] - head[e.destination]) / e.resistance for e in self.edges]

        if dt is not None:
            drawn = np.zeros(self.n)
            for e, f in zip(self.edges, flow):
                drawn[e.origin if f > 0 else e.destination] += abs(f)
            scale = np.ones(self.n)
            for i in range(self.n):
                room = V[i] - self.vmin[i]
                need = drawn[i] * dt
                if drawn[i] > 0 and need > room:
                    scale[i] = max(room, 0.0) * (1.0 - CLAMP_MARGIN) / need if need > 0 else 0.0
            flow = [f * scale[e.origin if f > 0 else e.destination] for e, f in zip(self.edges, flow)]

        for e, f in zip(self.edges, flow):
            out[e.water_id] = f
            if e.nitrogen_id is not None:
                src = e.origin if f >= 0 else e.destination
                out[e.nitrogen_id] = m[src] / V[src] * f if V[src] > EPS_V else 0.0
        return out

    def rhs(self, y, t: float, dt: float | None = None) -> np.ndarray:
        r = self.rates(y, t, dt)
        dy = np.zeros(2 * self.n)
        for cap_id, is_water, b, _ in self.accepts:
            dy[b if is_water else self.n + b] += r[cap_id]
        for e in self.edges:
            f = r[e.water_id]
            dy[e.origin] -= f
            dy[e.destination] += f
            if e.nitrogen_id is not None:
                mdot = r[e.nitrogen_id]
                dy[self.n + e.origin] -= mdot
                dy[self.n + e.destination] += mdot
        return dy


def ode_rhs(state, t: float, arch: InstantiatedArchitecture, constants: PhysicalConstants = PhysicalConstants(),
            dt: float | None = None) -> np.ndarray:
    """Time derivative of ``[V; m]``.

    ``dt`` enables the same minimum-volume clamp the discrete engine applies
    over one step of that length.
    """
    return OdeModel(arch, constants).rhs(np.asarray(state, dtype=float), t, dt)


def rk4_integrate(doc, dt_ref: float, stride: int = 1, check_bound: bool = True) -> Trajectory:
    """Classical fixed-step RK4 over the document's physical horizon.

    The clamp is evaluated inside every stage with the full step length.
    """
    cfg = doc.config
    arch = doc.architecture
    if check_bound:
        try:
            bound = stability_max_dt(arch, cfg.constants)
        except ValueError:
            bound = math.inf
        if dt_ref > bound / 4 * (1 + 1e-12):
            raise ValueError(f"dt_ref = {dt_ref:g} s exceeds a quarter of the stability bound ({bound / 4:g} s)")
    model = OdeModel(arch, cfg.constants)
    n_steps = max(1, round(cfg.duration / dt_ref))
    h = dt_ref
    y = model.initial_state()
    rec = list(range(0, n_steps + 1, stride))
    states = np.empty((len(rec), len(y)))
    firings = np.empty((len(rec), len(model.capability_ids)))
    for k in range(n_steps + 1):
        t = k * h
        if k % stride == 0:
            states[k // stride] = y
            r = model.rates(y, t, h)
            firings[k // stride] = [r[c] for c in model.capability_ids]
        if k == n_steps:
            break
        k1 = model.rhs(y, t, h)
        k2 = model.rhs(y + 0.5 * h * k1, t + 0.5 * h, h)
        k3 = model.rhs(y + 0.5 * h * k2, t + 0.5 * h, h)
        k4 = model.rhs(y + h * k3, t + h, h)
        y = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise NonFiniteState("non-finite reference state", k)
        y[model.n:] = np.maximum(y[model.n:], 0.0)
    return Trajectory(np.array(rec, dtype=float) * h, states, firings, model.places, model.capability_ids, h,
                      stride, method="rk4")


@dataclass(frozen=True)
class ComparisonMetrics:
    per_buffer: dict  # buffer id -> {"linf": float, "rmse": float}
    linf: float
    rmse: float


def compare_trajectories(a: Trajectory, b: Trajectory) -> ComparisonMetrics:
    """Concentration error of ``b`` against ``a``, with ``b`` interpolated onto ``a``'s times."""
    if tuple(a.places.places) != tuple(b.places.places):
        raise MismatchedArchitecture("trajectories have different place layouts")
    ca, cb = concentrations(a), concentrations(b)
    per, all_sq, linf = {}, [], 0.0
    for buf in ca:
        ok_b = np.isfinite(cb[buf])
        resampled = np.interp(a.times, b.times[ok_b], cb[buf][ok_b]) if ok_b.any() else np.full(len(a.times), np.nan)
        err = ca[buf] - resampled
        err = err[np.isfinite(err)]
        if err.size:
            per[buf] = {"linf": float(np.max(np.abs(err))), "rmse": float(np.sqrt(np.mean(err ** 2)))}
            all_sq.append(err ** 2)
            linf = max(linf, per[buf]["linf"])
        else:
            per[buf] = {"linf": math.nan, "rmse": math.nan}
    rmse = float(np.sqrt(np.mean(np.concatenate(all_sq)))) if all_sq else math.nan
    return ComparisonMetrics(per, linf, rmse)
