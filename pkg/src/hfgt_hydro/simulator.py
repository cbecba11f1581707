"""Initial-value simulation of a scenario with explicit Euler stepping."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .architecture import InstantiatedArchitecture
from .devices import EPS_V, PhysicalConstants, exogenous_table
from .esn import FiringAssembler, initial_marking
from .hfit import IncidenceTensors, PlaceIndex, build_tensors

log = logging.getLogger(__name__)


class NoTransportEdges(ValueError):
    """The architecture has no water transport, so no stability bound exists."""


@dataclass(frozen=True)
class SimulationConfig:
    """Time step (s), horizon in steps, physical constants and recording stride."""

    dt: float
    horizon: int
    constants: PhysicalConstants = PhysicalConstants()
    stride: int = 1

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be finite and > 0, got {self.dt!r}")
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ValueError(f"horizon must be an integer >= 1, got {self.horizon!r}")
        if int(self.stride) != self.stride or self.stride < 1:
            raise ValueError(f"stride must be an integer >= 1, got {self.stride!r}")
        if not math.isfinite(self.dt * self.horizon):
            raise ValueError("dt * horizon must be finite")

    @property
    def duration(self) -> float:
        return self.dt * self.horizon

    def with_dt(self, dt: float, keep_duration: bool = True) -> "SimulationConfig":
        """Copy with a new step; by default the physical horizon is kept."""
        horizon = max(1, round(self.duration / dt)) if keep_duration else self.horizon
        return replace(self, dt=dt, horizon=horizon)


@dataclass(frozen=True)
class StabilityWarning:
    dt: float
    bound: float

    def __str__(self):
        return f"dt = {self.dt:g} s exceeds the explicit-Euler stability bound {self.bound:g} s"


@dataclass
class Trajectory:
    """Recorded markings and firings at ``times``.

    Row ``i`` of ``states`` is ``Q_B`` at ``times[i]``; row ``i`` of
    ``firings`` is the firing vector evaluated from that state.
    """

    times: np.ndarray
    states: np.ndarray
    firings: np.ndarray
    places: PlaceIndex
    capabilities: tuple[str, ...]
    dt: float
    stride: int = 1
    warnings: list = field(default_factory=list)
    method: str = "euler"

    def __len__(self):
        return len(self.times)

    def buffers(self) -> list[str]:
        return self.places.buffers()

    def water(self) -> np.ndarray:
        return self.states[:, self.places.water]

    def nitrogen(self) -> np.ndarray:
        return self.states[:, self.places.nitrogen]


# -- stability -----------------------------------------------------------------

def edge_time_constants(arch: InstantiatedArchitecture,
                        constants: PhysicalConstants = PhysicalConstants()) -> list[tuple[str, float]]:
    """Relaxation time (s) of each water-transport edge taken as an isolated two-buffer exchange.

    ``tau = R * A_o A_d / (A_o + A_d) / (rho g)``.
    """
    out = []
    for cap in arch.water_transports():
        a_o = arch.buffer(cap.origin).surface_area
        a_d = arch.buffer(cap.destination).surface_area
        out.append((cap.id, cap.resistance * (a_o * a_d / (a_o + a_d)) / constants.rho_g))
    return out


def stability_max_dt(arch: InstantiatedArchitecture, constants: PhysicalConstants = PhysicalConstants()) -> float:
    """A tenth of the stiffest edge's time constant."""
    taus = edge_time_constants(arch, constants)
    if not taus:
        raise NoTransportEdges("architecture has no water-transport edges")
    return min(t for _, t in taus) / 10.0


# -- problem setup -------------------------------------------------------------

@dataclass
class EulerProblem:
    """Everything a backend needs to run the time loop."""

    arch: InstantiatedArchitecture
    tensors: IncidenceTensors
    config: SimulationConfig
    assembler: FiringAssembler
    q0: np.ndarray
    exogenous: np.ndarray  # (K+1, n_accept)
    accept_columns: np.ndarray

    @classmethod
    def build(cls, arch, tensors, config) -> "EulerProblem":
        asm = FiringAssembler(arch, tensors, config.constants)
        targets = list(asm.accept_columns)
        times = np.arange(config.horizon + 1) * config.dt
        return cls(arch, tensors, config, asm, initial_marking(arch, tensors),
                   exogenous_table(times, arch.signals, targets),
                   np.array(list(asm.accept_columns.values()), dtype=np.int64))

    def record_count(self) -> int:
        return self.config.horizon // self.config.stride + 1


def simulate(doc, backend: str | None = None, config: SimulationConfig | None = None) -> Trajectory:
    """Run a scenario document from its initial condition over the configured horizon.

    ``backend`` is ``"compiled"``, ``"python"`` or None for the import-time
    default. ``config`` overrides the document's configuration.
    """
    from . import kernels

    arch = doc.architecture
    cfg = config or doc.config
    tensors = build_tensors(arch)
    warnings: list = []
    try:
        bound = stability_max_dt(arch, cfg.constants)
    except NoTransportEdges:
        bound = math.inf
    if cfg.dt > bound:
        w = StabilityWarning(cfg.dt, bound)
        log.warning("%s", w)
        warnings.append(w)

    problem = EulerProblem.build(arch, tensors, cfg)
    states, firings, clamps = kernels.get_backend(backend)(problem)
    times = np.arange(0, cfg.horizon + 1, cfg.stride) * cfg.dt
    return Trajectory(times, states, firings, tensors.places, tensors.capabilities.ids, cfg.dt, cfg.stride,
                      warnings + clamps)


def concentrations(traj: Trajectory, places: PlaceIndex | None = None) -> dict[str, np.ndarray]:
    """Per-buffer nitrogen concentration (kg/m^3); NaN marks steps where the volume is below the guard."""
    if places is None:
        places = traj.places
    out = {}
    for i, buffer_id in enumerate(places.buffers()):
        v = traj.states[:, places.water.start + i]
        m = traj.states[:, places.nitrogen.start + i]
        c = np.full(len(v), np.nan)
        ok = v > EPS_V
        c[ok] = m[ok] / v[ok]
        out[buffer_id] = c
    return out
