"""Engineering system net: marking, firing vector assembly and the discrete state transition."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .architecture import CapabilityClass, InstantiatedArchitecture
from .devices import (
    HeadParameters,
    MixingPair,
    PhysicalConstants,
    WaterEdge,
    clamp_withdrawals,
    exogenous_rates,
    hydraulic_head,
    nitrogen_transport_rates,
    resistance_rates,
    transport_slice,
    water_transport_columns,
)
from .hfit import IncidenceTensors

# Nitrogen entries between this and zero are rounding noise and are clamped to 0.
NITROGEN_UNDERFLOW = -1e-12


class SimulationError(Exception):
    """Base class for failures while advancing the net."""

    def __init__(self, message, step=None):
        self.step = step
        super().__init__(message if step is None else f"step {step}: {message}")


class NonFiniteState(SimulationError):
    pass


class NitrogenUnderflow(SimulationError):
    pass


@dataclass
class FiringVector:
    """Per-capability rates for one step, aligned to the capability index."""

    U: np.ndarray
    warnings: list = field(default_factory=list)

    def __array__(self, dtype=None, copy=None):
        return self.U if dtype is None else self.U.astype(dtype)

    def __len__(self):
        return len(self.U)


@dataclass
class EngineeringSystemNet:
    """Places, transitions, arcs and the place marking ``Q_B``.

    Water places hold m^3, nitrogen places kg. Transitions fire
    instantaneously, so no transition marking is kept.
    """

    tensors: IncidenceTensors
    marking: np.ndarray

    @classmethod
    def from_architecture(cls, arch: InstantiatedArchitecture, tensors: IncidenceTensors) -> "EngineeringSystemNet":
        return cls(tensors, initial_marking(arch, tensors))

    @property
    def places(self):
        return self.tensors.places

    @property
    def capabilities(self):
        return self.tensors.capabilities

    def fire(self, U, dt: float, k=None) -> np.ndarray:
        self.marking = step(self, U, dt, k)
        return self.marking


def initial_marking(arch: InstantiatedArchitecture, tensors: IncidenceTensors) -> np.ndarray:
    q = np.zeros(len(tensors.places))
    for row, (operand, buffer_id) in enumerate(tensors.places):
        b = arch.buffer(buffer_id)
        q[row] = b.initial_water_volume if operand == arch.water.id else b.initial_nitrogen_mass
    return q


def step(net: EngineeringSystemNet, U, dt: float, k=None) -> np.ndarray:
    """``Q_B[k+1] = Q_B[k] + M U dt``, with tiny nitrogen underflow clamped to zero."""
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    U = np.asarray(U, dtype=float)
    nxt = net.marking + net.tensors.M.matvec(U) * dt
    if not np.all(np.isfinite(nxt)):
        bad = [net.places.places[i] for i in np.flatnonzero(~np.isfinite(nxt))]
        raise NonFiniteState(f"non-finite marking at {bad}", k)
    nit = nxt[net.places.nitrogen]
    if nit.size and nit.min() < 0:
        if nit.min() < NITROGEN_UNDERFLOW:
            row = net.places.nitrogen.start + int(np.argmin(nit))
            raise NitrogenUnderflow(f"nitrogen at {net.places.places[row][1]} fell to {nit.min():.3e} kg", k)
        nxt[net.places.nitrogen] = np.maximum(nit, 0.0)
    return nxt


class FiringAssembler:
    """Precomputed device wiring for one architecture; call it to get ``U[k]``."""

    def __init__(self, arch: InstantiatedArchitecture, tensors: IncidenceTensors,
                 constants: PhysicalConstants = PhysicalConstants()):
        self.arch = arch
        self.tensors = tensors
        self.constants = constants
        places, caps = tensors.places, tensors.capabilities
        wat, nit = places.water, places.nitrogen
        self.water_names = places.buffers()
        self.head_params = HeadParameters.from_architecture(arch, places)

        self.water_columns = water_transport_columns(tensors)
        self.M_transp = transport_slice(tensors, self.water_columns)
        self.resistances = np.array([arch.capability(caps.ids[c]).resistance for c in self.water_columns])
        self.edges = []
        for c in self.water_columns:
            col = tensors.M.column(c)
            origin = next(r for r, v in col.items() if v < 0) - wat.start
            dest = next(r for r, v in col.items() if v > 0) - wat.start
            self.edges.append(WaterEdge(c, origin, dest))
        edge_of = {e.column: i for i, e in enumerate(self.edges)}
        self.edge_of_column = edge_of

        n_cols = caps.columns_of(CapabilityClass.TRANSP_N_LAND, CapabilityClass.TRANSP_N_RIVER)
        self.pairs = []
        for c in n_cols:
            cap = arch.capability(caps.ids[c])
            partner = caps[cap.paired_with]
            e = self.edges[edge_of[partner]]
            self.pairs.append(MixingPair(
                nitrogen_column=c, water_column=partner,
                origin_water=e.origin, destination_water=e.destination,
                origin_nitrogen=places[arch.nitrogen.id, cap.origin] - nit.start,
                destination_nitrogen=places[arch.nitrogen.id, cap.destination] - nit.start,
            ))
        self.accept_columns = {cid: c for c, cid in enumerate(caps.ids) if caps.classes[c].is_accept}

    def __call__(self, q, t: float, dt: float, k=None) -> FiringVector:
        places = self.tensors.places
        q = np.asarray(q, dtype=float)
        q_w, q_n = q[places.water], q[places.nitrogen]
        U = np.zeros(len(self.tensors.capabilities))

        for cap_id, rate in exogenous_rates(t, self.arch.signals).items():
            U[self.accept_columns[cap_id]] = rate

        head = hydraulic_head(q_w, self.head_params)
        rates = resistance_rates(head, self.M_transp, self.resistances, self.constants.rho_g)
        rates, warnings = clamp_withdrawals(rates, q_w, self.head_params, dt, self.edges, self.water_names, k)
        U[self.water_columns] = rates

        partner_rates = [rates[self.edge_of_column[p.water_column]] for p in self.pairs]
        U[[p.nitrogen_column for p in self.pairs]] = nitrogen_transport_rates(q_n, q_w, partner_rates, self.pairs)
        return FiringVector(U, warnings)


def assemble_firing(arch: InstantiatedArchitecture, tensors: IncidenceTensors, q, t: float, dt: float,
                    constants: PhysicalConstants = PhysicalConstants(), k=None) -> FiringVector:
    """One-off firing vector; build a :class:`FiringAssembler` when stepping repeatedly."""
    return FiringAssembler(arch, tensors, constants)(q, t, dt, k)
