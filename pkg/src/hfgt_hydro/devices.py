"""Constitutive device models.

* linear fluidic resistance: ``Vdot = rho g / R * (head_origin - head_dest)``
* complete mixing: effluent concentration equals the source concentration
* exogenous accept rates from configured signals

All functions are pure and operate on numpy vectors aligned to the place
and capability indices built in :mod:`hfgt_hydro.hfit`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .architecture import CapabilityClass, InstantiatedArchitecture
from .hfit import SparseMatrix

# Mixing guard: below this source volume (m^3) no nitrogen is transported.
EPS_V = 1e-9

# The clamp keeps this fraction of the available volume back so the rounding
# of Q + M U dt cannot push a drained buffer below its minimum.
CLAMP_MARGIN = 64 * 2.0 ** -52


@dataclass(frozen=True)
class PhysicalConstants:
    rho: float = 1000.0  # kg/m^3
    g: float = 9.81  # m/s^2

    def __post_init__(self):
        if not (self.rho > 0 and self.g > 0 and math.isfinite(self.rho) and math.isfinite(self.g)):
            raise ValueError(f"rho and g must be finite and > 0, got {self.rho!r}, {self.g!r}")

    @property
    def rho_g(self) -> float:
        return self.rho * self.g


@dataclass(frozen=True)
class HeadParameters:
    """Per water place: inverse area (1/m^2), elevation (m), minimum volume (m^3)."""

    inv_area: np.ndarray
    elevation: np.ndarray
    min_volume: np.ndarray

    @classmethod
    def from_architecture(cls, arch: InstantiatedArchitecture, places) -> "HeadParameters":
        buffers = [arch.buffer(b) for b in places.buffers()]
        if any(b.surface_area <= 0 for b in buffers):
            raise ValueError("surface areas must be > 0")
        return cls(
            inv_area=np.array([1.0 / b.surface_area for b in buffers]),
            elevation=np.array([b.elevation for b in buffers], dtype=float),
            min_volume=np.array([b.min_volume for b in buffers], dtype=float),
        )


@dataclass(frozen=True)
class WaterEdge:
    """Endpoints of one water-transport column, as rows of the water sub-vector."""

    column: int
    origin: int
    destination: int


@dataclass(frozen=True)
class MixingPair:
    """A nitrogen-transport column tied to its water partner.

    ``*_water`` are rows of the water sub-vector, ``*_nitrogen`` rows of the
    nitrogen sub-vector, for origin and destination buffers.
    """

    nitrogen_column: int
    water_column: int
    origin_water: int
    destination_water: int
    origin_nitrogen: int
    destination_nitrogen: int


@dataclass(frozen=True)
class ClampWarning:
    step: int | None
    place: str
    factor: float

    def __str__(self):
        where = f"step {self.step}: " if self.step is not None else ""
        return f"{where}withdrawals from {self.place} scaled by {self.factor:.6g} to hold minimum volume"


def hydraulic_head(q_water, params: HeadParameters) -> np.ndarray:
    """Effective depth above the minimum volume plus elevation, in metres."""
    q_water = np.asarray(q_water, dtype=float)
    return params.inv_area * (q_water - params.min_volume) + params.elevation


def transport_slice(T, water_columns):
    """Rows of M restricted to water places, columns to ``water_columns``."""
    wat = T.places.water
    cols = np.asarray(water_columns, dtype=np.int64)
    M = T.M
    sel = np.isin(M.cols, cols) & (M.rows >= wat.start) & (M.rows < wat.stop)
    local = {c: i for i, c in enumerate(cols.tolist())}
    return SparseMatrix(M.rows[sel] - wat.start, [local[c] for c in M.cols[sel].tolist()], M.vals[sel],
                        (wat.stop - wat.start, len(cols)))


def water_transport_rates(head, T, resistances, constants: PhysicalConstants, water_columns=None) -> np.ndarray:
    """Signed volumetric rates (m^3/s) for the water-transport columns.

    ``rate = R^-1 * rho g * (-M_transp^T) head``; positive means origin to
    destination. ``water_columns`` defaults to every water-transport column
    of ``T`` in index order and must line up with ``resistances``.
    """
    if water_columns is None:
        water_columns = water_transport_columns(T)
    return resistance_rates(head, transport_slice(T, water_columns), resistances, constants.rho_g)


def resistance_rates(head, M_transp: SparseMatrix, resistances, rho_g: float) -> np.ndarray:
    """Same law as :func:`water_transport_rates` with a prebuilt transport slice."""
    drop = -M_transp.rmatvec(np.asarray(head, dtype=float))
    return rho_g * drop / np.asarray(resistances, dtype=float)


def water_transport_columns(T) -> list[int]:
    return T.capabilities.columns_of(CapabilityClass.TRANSP_H2O_LAND, CapabilityClass.TRANSP_H2O_RIVER)


def clamp_withdrawals(rates, q_water, params: HeadParameters, dt: float, edges, names=None, step=None):
    """Scale each place's outgoing flows so one step cannot draw it below its minimum volume.

    ``edges`` gives the (origin, destination) water rows of each rate. A
    negative rate withdraws from the destination. Inflows are not counted
    toward the budget and are never modified. Returns ``(rates, warnings)``.
    """
    rates = np.array(rates, dtype=float)
    q_water = np.asarray(q_water, dtype=float)
    withdrawal = np.zeros(len(q_water))
    for rate, edge in zip(rates, edges):
        if rate > 0:
            withdrawal[edge.origin] += rate
        elif rate < 0:
            withdrawal[edge.destination] -= rate
    warnings = []
    factors = np.ones(len(q_water))
    for p, w in enumerate(withdrawal):
        if w <= 0:
            continue
        available = q_water[p] - params.min_volume[p]
        drawn = w * dt
        if drawn > available:
            # drawn can underflow to 0 for subnormal w; nothing may leave then
            factors[p] = max(available, 0.0) * (1.0 - CLAMP_MARGIN) / drawn if drawn > 0 else 0.0
            name = names[p] if names is not None else str(p)
            warnings.append(ClampWarning(step, name, float(factors[p])))
    if warnings:
        for i, edge in enumerate(edges):
            src = edge.origin if rates[i] > 0 else edge.destination
            if rates[i] != 0 and factors[src] != 1.0:
                rates[i] *= factors[src]
    return rates, warnings


def nitrogen_transport_rates(q_nitrogen, q_water, water_rates, pairs) -> np.ndarray:
    """Nitrogen rates (kg/s) for each mixing pair, from the source buffer's concentration.

    ``water_rates`` is indexed like ``pairs`` (the partner's rate). The
    source is the origin for forward flow and the destination for backflow.
    """
    out = np.zeros(len(pairs))
    for i, (pair, vdot) in enumerate(zip(pairs, water_rates)):
        if vdot >= 0:
            v, m = q_water[pair.origin_water], q_nitrogen[pair.origin_nitrogen]
        else:
            v, m = q_water[pair.destination_water], q_nitrogen[pair.destination_nitrogen]
        if v > EPS_V:
            out[i] = m * vdot / v
    return out


def exogenous_rates(t: float, signals) -> dict[str, float]:
    """Accept-capability rates at time ``t``; unsignaled accepts are simply absent (zero)."""
    return {s.target: float(s.evaluate(t)) for s in signals}


def exogenous_table(times, signals, targets) -> np.ndarray:
    """Rates for every ``targets`` entry at each time, shape ``(len(times), len(targets))``."""
    times = np.asarray(times, dtype=float)
    table = np.zeros((len(times), len(targets)))
    by_target = {s.target: s for s in signals}
    for j, target in enumerate(targets):
        if target in by_target:
            table[:, j] = by_target[target].evaluate(times)
    return table
