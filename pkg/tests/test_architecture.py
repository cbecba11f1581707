import dataclasses

import numpy as np
import pytest

from hfgt_hydro.architecture import (
    Buffer,
    BufferClass,
    Capability,
    CapabilityClass,
    CapabilityKind,
    ExogenousSignal,
    InstantiatedArchitecture,
    Operand,
    QuantityKind,
    SignalShape,
    validate,
)

W = Operand("H2O", "water", QuantityKind.VOLUME)
N = Operand("N", "nitrogen", QuantityKind.MASS)


def buf(id_, cls=BufferClass.LAKE, **kw):
    base = dict(surface_area=100.0, elevation=0.0, min_volume=0.0, initial_water_volume=10.0,
                initial_nitrogen_mass=1.0)
    base.update(kw)
    return Buffer(id_, id_, cls, **base)


def transport(id_, operand, o, d, resistance=None, paired=None):
    return Capability(id_, CapabilityKind.TRANSPORT, operand, "r", origin=o, destination=d,
                      resistance=resistance, paired_with=paired)


def lake_point(*extra_caps, buffers=None):
    buffers = buffers or (buf("lake1"), buf("point1", BufferClass.POINT))
    caps = (
        Capability("acc", CapabilityKind.ACCEPT, "H2O", "lake1", location="lake1"),
        Capability("mix_lake1", CapabilityKind.MIX, None, "lake1", location="lake1"),
        Capability("mix_point1", CapabilityKind.MIX, None, "point1", location="point1"),
    ) + extra_caps
    return InstantiatedArchitecture((W, N), buffers, caps)


def test_example1_is_valid(ex1):
    report = validate(ex1.architecture)
    assert report.valid and report.violations == ()
    assert report.render() == "valid: no violations\n"


def test_all_bundled_valid(bundled):
    assert validate(bundled.architecture).valid


def test_self_loop():
    arch = lake_point(transport("loop", "H2O", "lake1", "lake1", 1e5))
    report = validate(arch)
    assert "self-loop" in report.codes()
    assert "loop: self-loop" in report.render()


def test_mixing_pair_mismatch():
    buffers = (buf("lake1"), buf("lake2"), buf("point1", BufferClass.POINT))
    arch = lake_point(
        transport("w1", "H2O", "lake1", "point1", 1e5),
        transport("w2", "H2O", "lake2", "point1", 1e5),
        transport("n1", "N", "lake1", "point1", paired="w2"),
        buffers=buffers,
    )
    assert validate(arch).codes() == ["mixing pair mismatch"]


@pytest.mark.parametrize("field,value,code", [
    ("surface_area", 0.0, "nonpositive area"),
    ("min_volume", -1.0, "negative minimum volume"),
    ("initial_water_volume", -1.0, "initial volume below minimum"),
    ("initial_nitrogen_mass", -0.5, "negative initial mass"),
    ("elevation", float("nan"), "non-finite"),
])
def test_buffer_domain(field, value, code):
    bad = dataclasses.replace(buf("lake1"), **{field: value})
    arch = lake_point(buffers=(bad, buf("point1", BufferClass.POINT)))
    assert code in validate(arch).codes()


def test_missing_resistance_and_pairing():
    arch = lake_point(transport("w", "H2O", "lake1", "point1"), transport("n", "N", "lake1", "point1"))
    assert validate(arch).codes() == ["missing resistance", "missing pairing"]


def test_duplicate_pairing():
    arch = lake_point(
        transport("w", "H2O", "lake1", "point1", 1.0),
        transport("n1", "N", "lake1", "point1", paired="w"),
        transport("n2", "N", "lake1", "point1", paired="w"),
    )
    assert validate(arch).codes() == ["duplicate pairing"]


def test_dangling_reference():
    arch = lake_point(transport("w", "H2O", "lake1", "lake9", 1.0))
    report = validate(arch)
    assert report.codes() == ["dangling reference"]
    assert "lake9" in report.render()


def test_land_must_drain_into_lake():
    buffers = (buf("lake1"), buf("land1", BufferClass.LAND), buf("point1", BufferClass.POINT))
    arch = lake_point(transport("w", "H2O", "land1", "point1", 1.0), buffers=buffers)
    assert "block structure" in validate(arch).codes()


def test_closed_system_and_duplicate_id():
    arch = InstantiatedArchitecture((W, N), (buf("a"), buf("a")), ())
    codes = validate(arch).codes()
    assert "duplicate id" in codes and "closed system" in codes


def test_operand_set():
    arch = InstantiatedArchitecture((W,), (buf("a"),), (Capability("acc", CapabilityKind.ACCEPT, "H2O", "a",
                                                                  location="a"),))
    assert "operand set" in validate(arch).codes()


def test_unsupported_accepts():
    arch = lake_point(
        Capability("acc_p", CapabilityKind.ACCEPT, "H2O", "point1", location="point1"),
        Capability("acc_n", CapabilityKind.ACCEPT, "N", "lake1", location="lake1"),
    )
    assert validate(arch).codes() == ["unsupported accept", "unsupported accept"]


def test_signal_checks():
    arch = dataclasses.replace(lake_point(), signals=(
        ExogenousSignal("acc", SignalShape.CONSTANT, (1.0,)),
        ExogenousSignal("acc", SignalShape.CONSTANT, (-1.0,)),
        ExogenousSignal("mix_lake1", SignalShape.CONSTANT, (1.0,)),
    ))
    assert validate(arch).codes() == ["duplicate signal", "bad signal", "bad signal target"]


@pytest.mark.parametrize("origin_cls,dest_cls,operand,expected", [
    (BufferClass.LAND, BufferClass.LAKE, "H2O", CapabilityClass.TRANSP_H2O_LAND),
    (BufferClass.LAND, BufferClass.LAKE, "N", CapabilityClass.TRANSP_N_LAND),
    (BufferClass.LAKE, BufferClass.POINT, "H2O", CapabilityClass.TRANSP_H2O_RIVER),
    (BufferClass.POINT, BufferClass.LAKE, "N", CapabilityClass.TRANSP_N_RIVER),
])
def test_transport_class(origin_cls, dest_cls, operand, expected):
    arch = InstantiatedArchitecture((W, N), (buf("o", origin_cls), buf("d", dest_cls)), ())
    assert arch.capability_class(transport("t", operand, "o", "d", 1.0)) is expected


def test_capability_class_blocks_are_ordered():
    assert [c.block for c in CapabilityClass] == list(range(1, 11))


def test_signal_shapes():
    s = ExogenousSignal("x", SignalShape.SINUSOID, (1.0, 2.0, 4.0, 0.0))
    assert s.evaluate(3.0) == 0.0  # trough is -1 before the floor
    assert s.evaluate(1.0) == pytest.approx(3.0)
    table = ExogenousSignal("x", SignalShape.TABLE, ((10.0, 1.0), (20.0, 2.0)))
    np.testing.assert_array_equal(table.evaluate(np.array([0.0, 10.0, 15.0, 20.0, 99.0])), [1, 1, 1, 2, 2])
    assert ExogenousSignal("x", SignalShape.CONSTANT, (0.5,)).evaluate(123.0) == 0.5
