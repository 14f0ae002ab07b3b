"""Turn a parsed circuit into an instrument."""

from __future__ import annotations

from ..channels import Superoperator, identity_superop
from ..errors import UnsupportedError
from ..instruments import (
    Instrument,
    compose_after,
    compose_before,
    ideal_subsystem_measurement,
    prepare_and_discard,
)
from . import gates as G
from .ir import CircuitIR, Gate, Relabel


def element_channel(ir: CircuitIR, index: int) -> Superoperator:
    """Full-register channel of gate element ``index`` including its noise binding."""
    gate = ir.elements[index]
    local = G.noisy_gate_channel(gate, ir.noise_for(index), ir.dims.d, ir.matrices)
    return G.place(local, gate.qudits, ir.dims)


def segment_channel(ir: CircuitIR, start: int, stop: int) -> Superoperator:
    """Composition of the gates in ``elements[start:stop]`` in circuit order."""
    S = identity_superop(ir.dims)
    for i in range(start, stop):
        if isinstance(ir.elements[i], Gate):
            S = element_channel(ir, i) @ S
    return S


def single_measure(ir: CircuitIR):
    ms = ir.measures()
    if len(ms) != 1:
        span = ms[1][1].span if len(ms) > 1 else None
        where = f" (second measure at line {span.line}, col {span.col})" if span else ""
        raise UnsupportedError(f"circuits must contain exactly one measure statement, found {len(ms)}{where}")
    return ms[0]


def elaborate(ir: CircuitIR) -> Instrument:
    """Gates before the measurement, the measurement, then any gates and relabels after it."""
    mi, meas = single_measure(ir)
    side = ir.matrices[meas.side] if meas.side is not None else None
    inst = ideal_subsystem_measurement(side, ir.dims, meas.qudits)
    inst = compose_before(inst, segment_channel(ir, 0, mi))
    for i in range(mi + 1, len(ir.elements)):
        el = ir.elements[i]
        if isinstance(el, Gate):
            inst = compose_after(inst, element_channel(ir, i))
        elif isinstance(el, Relabel):
            d = ir.dims.d
            inst = inst.replace(
                branches={
                    k: inst.branches[tuple((a - b) % d for a, b in zip(k, el.x))] for k in inst.outcomes
                }
            )
    meta = dict(inst.metadata)
    if meas.data is not None:
        meta["data"] = list(meas.data)
    return inst.replace(metadata=meta)


def data_view(inst: Instrument, data) -> Instrument:
    """Read an indirect measurement relative to its data qudits.

    The measured (readout) qudits are prepared in ``|0>`` and discarded; the
    result lives on the remaining qudits with ``data`` as measured set.
    """
    prepared = {q: 0 for q in inst.measured}
    keep = [q for q in range(inst.dims.n) if q not in prepared]
    measured = tuple(keep.index(q) for q in data)
    return prepare_and_discard(inst, prepared, measured, readout="virtual")


def elaborate_data(ir: CircuitIR) -> Instrument:
    """:func:`elaborate`, then :func:`data_view` when the measure names data qudits."""
    inst = elaborate(ir)
    _, meas = single_measure(ir)
    if meas.data is None:
        return inst
    return data_view(inst, meas.data)
