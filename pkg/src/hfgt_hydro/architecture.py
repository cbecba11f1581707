"""Domain types for an instantiated watershed architecture.

An architecture is a set of operands (water, nitrogen), buffers (lakes,
land segments, river points) and capabilities ("resource does process").
Everything here is immutable; validity is checked by :func:`validate`,
which reports violations as data instead of raising.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterator


class QuantityKind(str, enum.Enum):
    VOLUME = "volume"  # m^3
    MASS = "mass"  # kg


class BufferClass(str, enum.Enum):
    LAKE = "lake"
    LAND = "land"
    POINT = "point"


class CapabilityClass(str, enum.Enum):
    """The ten capability blocks, in firing-vector order."""

    ACCEPT_H2O_LAKE = "AcceptH2O-Lake"
    ACCEPT_H2O_LAND = "AcceptH2O-Land"
    ACCEPT_N_LAND = "AcceptN-Land"
    MIX_H2O_LAKE = "MixH2O-Lake"
    MIX_H2O_LAND = "MixH2O-Land"
    MIX_H2O_POINT = "MixH2O-Point"
    TRANSP_H2O_LAND = "TranspH2O-Land"
    TRANSP_N_LAND = "TranspN-Land"
    TRANSP_H2O_RIVER = "TranspH2O-River"
    TRANSP_N_RIVER = "TranspN-River"

    @property
    def block(self) -> int:
        """1-based block number within the firing vector."""
        return CAPABILITY_BLOCK_ORDER.index(self) + 1

    @property
    def is_accept(self) -> bool:
        return self in _ACCEPT

    @property
    def is_mix(self) -> bool:
        return self in _MIX

    @property
    def is_transport(self) -> bool:
        return self in _TRANSPORT

    @property
    def moves_water(self) -> bool:
        return self in (CapabilityClass.TRANSP_H2O_LAND, CapabilityClass.TRANSP_H2O_RIVER)

    @property
    def moves_nitrogen(self) -> bool:
        return self in (CapabilityClass.TRANSP_N_LAND, CapabilityClass.TRANSP_N_RIVER)


CAPABILITY_BLOCK_ORDER = tuple(CapabilityClass)
BUFFER_CLASS_ORDER = (BufferClass.LAKE, BufferClass.LAND, BufferClass.POINT)

_ACCEPT = frozenset(CAPABILITY_BLOCK_ORDER[0:3])
_MIX = frozenset(CAPABILITY_BLOCK_ORDER[3:6])
_TRANSPORT = frozenset(CAPABILITY_BLOCK_ORDER[6:10])

_MIX_CLASS = {
    BufferClass.LAKE: CapabilityClass.MIX_H2O_LAKE,
    BufferClass.LAND: CapabilityClass.MIX_H2O_LAND,
    BufferClass.POINT: CapabilityClass.MIX_H2O_POINT,
}


class CapabilityKind(str, enum.Enum):
    """Surface form of a capability, before its class is resolved."""

    ACCEPT = "accept"
    MIX = "mix"
    TRANSPORT = "transport"


class SignalShape(str, enum.Enum):
    CONSTANT = "constant"
    SINUSOID = "sinusoid"
    TABLE = "table"


@dataclass(frozen=True)
class Operand:
    id: str
    name: str
    kind: QuantityKind


@dataclass(frozen=True)
class Buffer:
    """A storage location. Units: area m^2, elevation m, volumes m^3, mass kg."""

    id: str
    name: str
    buffer_class: BufferClass
    surface_area: float
    elevation: float
    min_volume: float
    initial_water_volume: float
    initial_nitrogen_mass: float


@dataclass(frozen=True)
class Capability:
    """A resource executing a process.

    ``location`` is the buffer an accept/mix acts on; ``origin`` and
    ``destination`` are only set for transports. ``subject`` names the
    facilitating resource (the buffer itself, a land segment or a river
    segment).
    """

    id: str
    kind: CapabilityKind
    operand: str | None
    subject: str
    location: str | None = None
    origin: str | None = None
    destination: str | None = None
    resistance: float | None = None  # Pa s / m^3, water transport only
    paired_with: str | None = None  # nitrogen transport only


@dataclass(frozen=True)
class ExogenousSignal:
    """Boundary rate for one accept capability.

    ``parameters`` is ``(value,)`` for constants, ``(mean, amplitude,
    period, phase)`` for sinusoids and a tuple of ``(time, value)`` pairs
    for tables.
    """

    target: str
    shape: SignalShape
    parameters: tuple

    def evaluate(self, t):
        """Rate at time(s) ``t`` in seconds; works on scalars and arrays."""
        import numpy as np

        t = np.asarray(t, dtype=float)
        if self.shape is SignalShape.CONSTANT:
            out = np.full(t.shape, float(self.parameters[0]))
        elif self.shape is SignalShape.SINUSOID:
            mean, amplitude, period, phase = self.parameters
            out = mean + amplitude * np.sin(2.0 * np.pi * (t - phase) / period)
            out = np.maximum(out, 0.0)
        else:
            times = np.array([p[0] for p in self.parameters], dtype=float)
            values = np.array([p[1] for p in self.parameters], dtype=float)
            # hold-last; the first value also holds before the first knot
            idx = np.searchsorted(times, t, side="right") - 1
            out = values[np.clip(idx, 0, len(values) - 1)]
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class InstantiatedArchitecture:
    operands: tuple[Operand, ...] = ()
    buffers: tuple[Buffer, ...] = ()
    capabilities: tuple[Capability, ...] = ()
    signals: tuple[ExogenousSignal, ...] = ()
    _lookup: dict = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        lookup = {}
        for item in (*self.operands, *self.buffers, *self.capabilities):
            lookup.setdefault(item.id, item)
        object.__setattr__(self, "_lookup", lookup)

    def get(self, id_):
        return self._lookup.get(id_)

    def buffer(self, id_) -> Buffer:
        item = self._lookup.get(id_)
        if not isinstance(item, Buffer):
            raise KeyError(id_)
        return item

    def capability(self, id_) -> Capability:
        item = self._lookup.get(id_)
        if not isinstance(item, Capability):
            raise KeyError(id_)
        return item

    def operand(self, id_) -> Operand:
        item = self._lookup.get(id_)
        if not isinstance(item, Operand):
            raise KeyError(id_)
        return item

    @property
    def water(self) -> Operand:
        return next(o for o in self.operands if o.kind is QuantityKind.VOLUME)

    @property
    def nitrogen(self) -> Operand:
        return next(o for o in self.operands if o.kind is QuantityKind.MASS)

    def capability_class(self, cap: Capability) -> CapabilityClass | None:
        """Resolve the firing-vector block of ``cap``; None if unresolvable."""
        try:
            if cap.kind is CapabilityKind.MIX:
                return _MIX_CLASS[self.buffer(cap.location).buffer_class]
            operand = self.operand(cap.operand)
            if cap.kind is CapabilityKind.ACCEPT:
                cls = self.buffer(cap.location).buffer_class
                if operand.kind is QuantityKind.VOLUME:
                    return {
                        BufferClass.LAKE: CapabilityClass.ACCEPT_H2O_LAKE,
                        BufferClass.LAND: CapabilityClass.ACCEPT_H2O_LAND,
                    }.get(cls)
                return CapabilityClass.ACCEPT_N_LAND if cls is BufferClass.LAND else None
            on_land = self.buffer(cap.origin).buffer_class is BufferClass.LAND
            if operand.kind is QuantityKind.VOLUME:
                return CapabilityClass.TRANSP_H2O_LAND if on_land else CapabilityClass.TRANSP_H2O_RIVER
            return CapabilityClass.TRANSP_N_LAND if on_land else CapabilityClass.TRANSP_N_RIVER
        except KeyError:
            return None

    def accepts(self) -> Iterator[Capability]:
        return (c for c in self.capabilities if c.kind is CapabilityKind.ACCEPT)

    def water_transports(self) -> Iterator[Capability]:
        for cap in self.capabilities:
            cls = self.capability_class(cap)
            if cls is not None and cls.moves_water:
                yield cap

    def nitrogen_transports(self) -> Iterator[Capability]:
        for cap in self.capabilities:
            cls = self.capability_class(cap)
            if cls is not None and cls.moves_nitrogen:
                yield cap


@dataclass(frozen=True)
class Violation:
    subject: str
    code: str
    message: str

    def __str__(self):
        return f"{self.subject}: {self.code}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def valid(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.valid

    def __iter__(self):
        return iter(self.violations)

    def __len__(self):
        return len(self.violations)

    def codes(self) -> list[str]:
        return [v.code for v in self.violations]

    def render(self) -> str:
        if not self.violations:
            return "valid: no violations\n"
        return "".join(f"{v}\n" for v in self.violations)


def _finite(*values) -> bool:
    return all(v is not None and math.isfinite(v) for v in values)


def validate(arch: InstantiatedArchitecture) -> ValidationReport:
    """Check every architecture invariant and report violations in a stable order."""
    out: list[Violation] = []

    def bad(subject, code, message):
        out.append(Violation(subject, code, message))

    seen: set[str] = set()
    for item in (*arch.operands, *arch.buffers, *arch.capabilities):
        if item.id in seen:
            bad(item.id, "duplicate id", f"id {item.id!r} is declared more than once")
        seen.add(item.id)

    kinds = [o.kind for o in arch.operands]
    if len(kinds) != 2 or kinds.count(QuantityKind.VOLUME) != 1 or kinds.count(QuantityKind.MASS) != 1:
        bad("operands", "operand set", "expected exactly one volume-kind and one mass-kind operand")

    for b in arch.buffers:
        if not _finite(b.surface_area, b.elevation, b.min_volume, b.initial_water_volume, b.initial_nitrogen_mass):
            bad(b.id, "non-finite", "buffer attributes must be finite")
            continue
        if b.surface_area <= 0:
            bad(b.id, "nonpositive area", f"surface area {b.surface_area!r} must be > 0")
        if b.min_volume < 0:
            bad(b.id, "negative minimum volume", f"minimum volume {b.min_volume!r} must be >= 0")
        if b.initial_water_volume < b.min_volume:
            bad(b.id, "initial volume below minimum", f"{b.initial_water_volume!r} < {b.min_volume!r}")
        if b.initial_nitrogen_mass < 0:
            bad(b.id, "negative initial mass", f"initial nitrogen mass {b.initial_nitrogen_mass!r} < 0")

    def resolve_buffer(cap, ref, role):
        if ref is None:
            bad(cap.id, "missing reference", f"{role} buffer is required")
            return None
        target = arch.get(ref)
        if not isinstance(target, Buffer):
            bad(cap.id, "dangling reference", f"{role} {ref!r} does not name a buffer")
            return None
        return target

    paired_count: dict[str, int] = {}
    for cap in arch.capabilities:
        operand = None
        if cap.kind is not CapabilityKind.MIX:
            operand = arch.get(cap.operand) if cap.operand is not None else None
            if not isinstance(operand, Operand):
                bad(cap.id, "dangling reference", f"operand {cap.operand!r} does not name an operand")
                continue

        if cap.kind is CapabilityKind.MIX:
            resolve_buffer(cap, cap.location, "location")
            continue

        if cap.kind is CapabilityKind.ACCEPT:
            loc = resolve_buffer(cap, cap.location, "location")
            if loc is not None and arch.capability_class(cap) is None:
                bad(cap.id, "unsupported accept",
                    f"{operand.kind.value}-kind operand cannot be accepted at a {loc.buffer_class.value}")
            continue

        origin = resolve_buffer(cap, cap.origin, "origin")
        dest = resolve_buffer(cap, cap.destination, "destination")
        if origin is None or dest is None:
            continue
        if origin.id == dest.id:
            bad(cap.id, "self-loop", f"transport starts and ends at {origin.id!r}")
            continue
        if origin.buffer_class is BufferClass.LAND:
            if dest.buffer_class is not BufferClass.LAKE:
                bad(cap.id, "block structure", "land runoff must drain into a lake")
        elif BufferClass.LAND in (origin.buffer_class, dest.buffer_class):
            bad(cap.id, "block structure", "river transport must join lakes and points")

        if operand.kind is QuantityKind.VOLUME:
            if cap.resistance is None:
                bad(cap.id, "missing resistance", "water transport needs a resistance")
            elif not _finite(cap.resistance) or cap.resistance <= 0:
                bad(cap.id, "nonpositive resistance", f"resistance {cap.resistance!r} must be finite and > 0")
            if cap.paired_with is not None:
                bad(cap.id, "unexpected pairing", "only nitrogen transports name a paired water transport")
            continue

        if cap.paired_with is None:
            bad(cap.id, "missing pairing", "nitrogen transport must name its water transport")
            continue
        partner = arch.get(cap.paired_with)
        partner_cls = arch.capability_class(partner) if isinstance(partner, Capability) else None
        if partner_cls is None or not partner_cls.moves_water:
            bad(cap.id, "dangling reference", f"paired capability {cap.paired_with!r} is not a water transport")
            continue
        if (partner.origin, partner.destination) != (cap.origin, cap.destination):
            bad(cap.id, "mixing pair mismatch",
                f"paired water transport {partner.id!r} joins {partner.origin!r}->{partner.destination!r}, "
                f"not {cap.origin!r}->{cap.destination!r}")
        paired_count[partner.id] = paired_count.get(partner.id, 0) + 1
        if paired_count[partner.id] == 2:
            bad(cap.id, "duplicate pairing", f"water transport {partner.id!r} is already paired")

    if not any(True for _ in arch.accepts()):
        bad("capabilities", "closed system", "at least one accept capability is required")

    targeted: set[str] = set()
    for sig in arch.signals:
        target = arch.get(sig.target)
        if not isinstance(target, Capability) or target.kind is not CapabilityKind.ACCEPT:
            bad(sig.target, "bad signal target", "signals may only drive accept capabilities")
        if sig.target in targeted:
            bad(sig.target, "duplicate signal", "capability already has a signal")
        targeted.add(sig.target)
        params = sig.parameters
        if sig.shape is SignalShape.CONSTANT:
            if not _finite(*params) or params[0] < 0:
                bad(sig.target, "bad signal", "constant rate must be finite and >= 0")
        elif sig.shape is SignalShape.SINUSOID:
            if not _finite(*params):
                bad(sig.target, "bad signal", "sinusoid parameters must be finite")
            elif params[2] <= 0:
                bad(sig.target, "bad signal", "sinusoid period must be > 0")
        else:
            if not params:
                bad(sig.target, "bad signal", "table needs at least one entry")
            elif not all(_finite(t, v) for t, v in params):
                bad(sig.target, "bad signal", "table entries must be finite")
            elif any(t1 <= t0 for (t0, _), (t1, _) in zip(params, params[1:])):
                bad(sig.target, "bad signal", "table times must be strictly increasing")
            elif any(v < 0 for _, v in params):
                bad(sig.target, "bad signal", "table rates must be >= 0")

    return ValidationReport(tuple(out))
