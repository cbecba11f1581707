"""XML scenario format: parsing and emission.

Layout::

    <scenario name="...">
      <description>...</description>
      <config dt="3600" horizon="2880" rho="1000" g="9.81" stride="1"/>
      <operands>
        <operand id="H2O" name="water" kind="volume"/>
        <operand id="N" name="nitrogen" kind="mass"/>
      </operands>
      <buffers>
        <lake|land|point id=".." name=".." area=".." elev=".." vmin=".." v0=".." m0=".."/>
      </buffers>
      <capabilities>
        <accept id=".." at=".." operand=".."/>
        <mix id=".." at=".."/>
        <transport id=".." via=".." operand=".." from=".." to=".." resistance=".." pairedWith=".."/>
      </capabilities>
      <signals>
        <constant target=".." value=".."/>
        <sinusoid target=".." mean=".." amplitude=".." period=".." phase=".."/>
        <table target=".."><entry time=".." value=".."/>...</table>
      </signals>
    </scenario>

All quantities are SI (m, m^2, m^3, kg, s, Pa s/m^3).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from xml.parsers import expat
from xml.sax.saxutils import escape, quoteattr

from .architecture import (
    Buffer,
    BufferClass,
    Capability,
    CapabilityKind,
    ExogenousSignal,
    InstantiatedArchitecture,
    Operand,
    QuantityKind,
    SignalShape,
)
from .devices import PhysicalConstants
from .simulator import SimulationConfig


class ScenarioError(Exception):
    """Base class for scenario parse failures; carries the source position."""

    def __init__(self, message, line=None, column=None, subject=None):
        self.line = line
        self.column = column
        self.subject = subject
        where = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(f"{where}{message}")


class MalformedXml(ScenarioError):
    pass


class SchemaViolation(ScenarioError):
    pass


class DanglingReference(ScenarioError):
    pass


class DomainViolation(ScenarioError):
    pass


@dataclass(frozen=True)
class ScenarioDocument:
    architecture: InstantiatedArchitecture
    config: SimulationConfig
    name: str = ""
    description: str = ""


# -- minimal positioned tree -------------------------------------------------

@dataclass
class _Node:
    tag: str
    attrs: dict
    line: int
    column: int
    children: list
    text: str = ""


def _build_tree(text) -> _Node:
    parser = expat.ParserCreate()
    root: list[_Node] = []
    stack: list[_Node] = []

    def start(tag, attrs):
        node = _Node(tag, dict(attrs), parser.CurrentLineNumber, parser.CurrentColumnNumber + 1, [])
        if stack:
            stack[-1].children.append(node)
        else:
            root.append(node)
        stack.append(node)

    def end(tag):
        stack.pop()

    def chars(data):
        if stack:
            stack[-1].text += data

    parser.StartElementHandler = start
    parser.EndElementHandler = end
    parser.CharacterDataHandler = chars
    try:
        if isinstance(text, str):
            parser.Parse(text.encode("utf-8"), True)
        else:
            parser.Parse(text, True)
    except expat.ExpatError as exc:
        raise MalformedXml(expat.ErrorString(exc.code), exc.lineno, exc.offset + 1) from None
    return root[0]


# -- parsing -----------------------------------------------------------------

_BUFFER_ATTRS = {"id", "name", "area", "elev", "vmin", "v0", "m0"}
_SIGNAL_ATTRS = {
    "constant": ({"target", "value"}, {"target", "value"}),
    "sinusoid": ({"target", "mean", "amplitude", "period", "phase"}, {"target", "mean", "amplitude", "period"}),
    "table": ({"target"}, {"target"}),
}


class _Reader:
    def __init__(self):
        self.positions: dict[str, tuple[int, int]] = {}

    def check_attrs(self, node, allowed, required):
        for key in node.attrs:
            if key not in allowed:
                raise SchemaViolation(f"unknown attribute {key!r} on <{node.tag}>", node.line, node.column,
                                      node.attrs.get("id"))
        for key in sorted(required):
            if key not in node.attrs:
                who = node.attrs.get("id") or node.attrs.get("target")
                label = f" {who!r}" if who else ""
                raise SchemaViolation(f"<{node.tag}>{label} is missing required attribute {key!r}",
                                      node.line, node.column, who)

    def number(self, node, key, default=None, positive=False, nonnegative=False):
        raw = node.attrs.get(key)
        if raw is None:
            return default
        who = node.attrs.get("id") or node.attrs.get("target")
        try:
            value = float(raw)
        except ValueError:
            raise DomainViolation(f"attribute {key!r}={raw!r} is not a number", node.line, node.column, who) from None
        if not math.isfinite(value):
            raise DomainViolation(f"attribute {key!r}={raw!r} is not finite", node.line, node.column, who)
        if positive and value <= 0:
            raise DomainViolation(f"attribute {key!r}={raw!r} must be > 0", node.line, node.column, who)
        if nonnegative and value < 0:
            raise DomainViolation(f"attribute {key!r}={raw!r} must be >= 0", node.line, node.column, who)
        return value

    def integer(self, node, key, default):
        value = self.number(node, key, default, positive=True)
        if value != int(value):
            raise DomainViolation(f"attribute {key!r} must be an integer", node.line, node.column)
        return int(value)

    def only_children(self, node, allowed):
        for child in node.children:
            if child.tag not in allowed:
                raise SchemaViolation(f"unknown element <{child.tag}> inside <{node.tag}>", child.line, child.column)
        return node.children

    def intern(self, node):
        id_ = node.attrs["id"]
        if id_ in self.positions:
            line, _ = self.positions[id_]
            raise SchemaViolation(f"duplicate id {id_!r} (first declared on line {line})", node.line, node.column, id_)
        self.positions[id_] = (node.line, node.column)
        return id_


def parse_scenario(text) -> ScenarioDocument:
    """Parse XML text (str or bytes) into a fully resolved :class:`ScenarioDocument`.

    Raises one of :class:`MalformedXml`, :class:`SchemaViolation`,
    :class:`DanglingReference` or :class:`DomainViolation`; nothing is
    returned on failure.
    """
    root = _build_tree(text)
    if root.tag != "scenario":
        raise SchemaViolation(f"root element must be <scenario>, got <{root.tag}>", root.line, root.column)
    r = _Reader()
    r.check_attrs(root, {"name"}, set())
    sections = {}
    for child in r.only_children(root, {"description", "config", "operands", "buffers", "capabilities", "signals"}):
        if child.tag in sections:
            raise SchemaViolation(f"<{child.tag}> appears more than once", child.line, child.column)
        sections[child.tag] = child
    for tag in ("config", "operands", "buffers", "capabilities"):
        if tag not in sections:
            raise SchemaViolation(f"<scenario> is missing <{tag}>", root.line, root.column)

    cfg = sections["config"]
    r.check_attrs(cfg, {"dt", "horizon", "rho", "g", "stride"}, {"dt", "horizon"})
    config = SimulationConfig(
        dt=r.number(cfg, "dt", positive=True),
        horizon=r.integer(cfg, "horizon", None),
        constants=PhysicalConstants(
            rho=r.number(cfg, "rho", 1000.0, positive=True),
            g=r.number(cfg, "g", 9.81, positive=True),
        ),
        stride=r.integer(cfg, "stride", 1),
    )

    operands = []
    for node in r.only_children(sections["operands"], {"operand"}):
        r.check_attrs(node, {"id", "name", "kind"}, {"id", "kind"})
        try:
            kind = QuantityKind(node.attrs["kind"])
        except ValueError:
            raise DomainViolation(f"operand kind must be 'volume' or 'mass', got {node.attrs['kind']!r}",
                                  node.line, node.column, node.attrs["id"]) from None
        operands.append(Operand(r.intern(node), node.attrs.get("name", node.attrs["id"]), kind))

    buffers = []
    for node in r.only_children(sections["buffers"], {"lake", "land", "point"}):
        r.check_attrs(node, _BUFFER_ATTRS, {"id", "area", "elev", "v0", "m0"})
        buffers.append(Buffer(
            id=r.intern(node),
            name=node.attrs.get("name", node.attrs["id"]),
            buffer_class=BufferClass(node.tag),
            surface_area=r.number(node, "area", positive=True),
            elevation=r.number(node, "elev"),
            min_volume=r.number(node, "vmin", 0.0, nonnegative=True),
            initial_water_volume=r.number(node, "v0", nonnegative=True),
            initial_nitrogen_mass=r.number(node, "m0", nonnegative=True),
        ))

    pending_refs = []  # (node, attr, expected type)
    capabilities = []
    for node in r.only_children(sections["capabilities"], {"accept", "mix", "transport"}):
        if node.tag == "accept":
            r.check_attrs(node, {"id", "at", "operand"}, {"id", "at", "operand"})
            cap = Capability(r.intern(node), CapabilityKind.ACCEPT, node.attrs["operand"], node.attrs["at"],
                             location=node.attrs["at"])
            pending_refs += [(node, "at", Buffer), (node, "operand", Operand)]
        elif node.tag == "mix":
            r.check_attrs(node, {"id", "at"}, {"id", "at"})
            cap = Capability(r.intern(node), CapabilityKind.MIX, None, node.attrs["at"], location=node.attrs["at"])
            pending_refs.append((node, "at", Buffer))
        else:
            r.check_attrs(node, {"id", "via", "operand", "from", "to", "resistance", "pairedWith"},
                          {"id", "via", "operand", "from", "to"})
            cap = Capability(
                r.intern(node), CapabilityKind.TRANSPORT, node.attrs["operand"], node.attrs["via"],
                origin=node.attrs["from"], destination=node.attrs["to"],
                resistance=r.number(node, "resistance", positive=True),
                paired_with=node.attrs.get("pairedWith"),
            )
            pending_refs += [(node, "from", Buffer), (node, "to", Buffer), (node, "operand", Operand)]
            if cap.paired_with is not None:
                pending_refs.append((node, "pairedWith", Capability))
        capabilities.append(cap)

    signals = []
    sig_section = sections.get("signals")
    for node in (r.only_children(sig_section, set(_SIGNAL_ATTRS)) if sig_section is not None else []):
        allowed, required = _SIGNAL_ATTRS[node.tag]
        r.check_attrs(node, allowed, required)
        shape = SignalShape(node.tag)
        if shape is SignalShape.CONSTANT:
            params = (r.number(node, "value", nonnegative=True),)
        elif shape is SignalShape.SINUSOID:
            params = (r.number(node, "mean"), r.number(node, "amplitude"),
                      r.number(node, "period", positive=True), r.number(node, "phase", 0.0))
        else:
            entries = []
            for entry in r.only_children(node, {"entry"}):
                r.check_attrs(entry, {"time", "value"}, {"time", "value"})
                t, v = r.number(entry, "time"), r.number(entry, "value", nonnegative=True)
                if entries and t <= entries[-1][0]:
                    raise DomainViolation("table times must be strictly increasing", entry.line, entry.column,
                                          node.attrs["target"])
                entries.append((t, v))
            if not entries:
                raise SchemaViolation(f"<table> for {node.attrs['target']!r} has no <entry>", node.line, node.column,
                                      node.attrs["target"])
            params = tuple(entries)
        signals.append(ExogenousSignal(node.attrs["target"], shape, params))
        pending_refs.append((node, "target", Capability))

    arch = InstantiatedArchitecture(tuple(operands), tuple(buffers), tuple(capabilities), tuple(signals))
    for node, attr, kind in pending_refs:
        ref = node.attrs[attr]
        if not isinstance(arch.get(ref), kind):
            raise DanglingReference(f"{attr}={ref!r} on <{node.tag}> does not name a {kind.__name__.lower()}",
                                    node.line, node.column, ref)

    for node in _transport_nodes(sections["capabilities"]):
        kind = arch.get(node.attrs["operand"]).kind
        if kind is QuantityKind.VOLUME and "resistance" not in node.attrs:
            raise SchemaViolation(f"<transport> {node.attrs['id']!r} moves water and needs 'resistance'",
                                  node.line, node.column, node.attrs["id"])
        if kind is QuantityKind.MASS and "pairedWith" not in node.attrs:
            raise SchemaViolation(f"<transport> {node.attrs['id']!r} moves nitrogen and needs 'pairedWith'",
                                  node.line, node.column, node.attrs["id"])
        if kind is QuantityKind.MASS and "resistance" in node.attrs:
            raise SchemaViolation(f"<transport> {node.attrs['id']!r} moves nitrogen; 'resistance' is not allowed",
                                  node.line, node.column, node.attrs["id"])

    desc = sections.get("description")
    return ScenarioDocument(arch, config, root.attrs.get("name", ""), desc.text.strip() if desc is not None else "")


def _transport_nodes(section):
    return [n for n in section.children if n.tag == "transport"]


def read_scenario(path) -> ScenarioDocument:
    with open(path, "rb") as fh:
        return parse_scenario(fh.read())


# -- emission ----------------------------------------------------------------

def _num(x) -> str:
    return repr(float(x))


def _attrs(pairs) -> str:
    return "".join(f" {k}={quoteattr(str(v))}" for k, v in pairs if v is not None)


def emit_scenario(doc: ScenarioDocument) -> str:
    """Serialize ``doc``; numbers use the shortest round-tripping repr."""
    arch, cfg = doc.architecture, doc.config
    lines = ['<?xml version="1.0" encoding="UTF-8"?>', f"<scenario{_attrs([('name', doc.name or None)])}>"]
    if doc.description:
        lines.append(f"  <description>{escape(doc.description)}</description>")
    lines.append("  <config" + _attrs([
        ("dt", _num(cfg.dt)), ("horizon", cfg.horizon), ("rho", _num(cfg.constants.rho)),
        ("g", _num(cfg.constants.g)), ("stride", cfg.stride)]) + "/>")
    lines.append("  <operands>")
    for o in arch.operands:
        lines.append("    <operand" + _attrs([("id", o.id), ("name", o.name), ("kind", o.kind.value)]) + "/>")
    lines.append("  </operands>")
    lines.append("  <buffers>")
    for b in arch.buffers:
        lines.append(f"    <{b.buffer_class.value}" + _attrs([
            ("id", b.id), ("name", b.name), ("area", _num(b.surface_area)), ("elev", _num(b.elevation)),
            ("vmin", _num(b.min_volume)), ("v0", _num(b.initial_water_volume)),
            ("m0", _num(b.initial_nitrogen_mass))]) + "/>")
    lines.append("  </buffers>")
    lines.append("  <capabilities>")
    for c in arch.capabilities:
        if c.kind is CapabilityKind.ACCEPT:
            body = [("id", c.id), ("at", c.location), ("operand", c.operand)]
        elif c.kind is CapabilityKind.MIX:
            body = [("id", c.id), ("at", c.location)]
        else:
            body = [("id", c.id), ("via", c.subject), ("operand", c.operand), ("from", c.origin),
                    ("to", c.destination),
                    ("resistance", _num(c.resistance) if c.resistance is not None else None),
                    ("pairedWith", c.paired_with)]
        lines.append(f"    <{c.kind.value}" + _attrs(body) + "/>")
    lines.append("  </capabilities>")
    if arch.signals:
        lines.append("  <signals>")
        for s in arch.signals:
            if s.shape is SignalShape.CONSTANT:
                lines.append("    <constant" + _attrs([("target", s.target), ("value", _num(s.parameters[0]))]) + "/>")
            elif s.shape is SignalShape.SINUSOID:
                mean, amp, period, phase = s.parameters
                lines.append("    <sinusoid" + _attrs([
                    ("target", s.target), ("mean", _num(mean)), ("amplitude", _num(amp)),
                    ("period", _num(period)), ("phase", _num(phase))]) + "/>")
            else:
                lines.append("    <table" + _attrs([("target", s.target)]) + ">")
                for t, v in s.parameters:
                    lines.append("      <entry" + _attrs([("time", _num(t)), ("value", _num(v))]) + "/>")
                lines.append("    </table>")
        lines.append("  </signals>")
    lines.append("</scenario>")
    return "\n".join(lines) + "\n"
