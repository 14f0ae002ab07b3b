"""Randomized-compiling rewrite of a parsed circuit.

Sampled mode emits dressed circuit instances; exact mode averages every
dressing analytically. Two dressings are supported:

* measurement dressing around the single ``measure`` statement, and
* with ``dress_gate``, Weyl dressing of the Clifford gate right before it,
  whose correction is a layer of single-qudit Weyl gates.

When the measure names ``data`` qudits, the whole circuit is treated as one
indirect measurement of those qudits: the measurement dressing goes on the
data qudits at the very start of the circuit and right after the readout.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from ..channels import Superoperator, weyl_design
from ..errors import DomainError, UnsupportedError
from ..instruments import (
    Instrument,
    compose_after,
    compose_before,
    ideal_subsystem_measurement,
)
from ..rc import (
    CliffordAverage,
    DressingTuple,
    RCReport,
    all_tuples,
    clifford_label_map,
    correction_label,
    rc_average_exact,
    rc_clifford_average,
)
from ..weyl import QuditDims, WeylLabel, all_labels, embed
from . import gates as G
from .elaborate import elaborate_data, element_channel, segment_channel, single_measure
from .ir import CircuitIR, Gate, Measure, NoiseBinding, ParseError, Relabel


@dataclass(frozen=True)
class _Plan:
    dims: QuditDims
    measure_index: int
    measured: tuple  # qudits carrying the a, b, x dressing
    rest: tuple  # qudits carrying the G dressing
    data_mode: bool
    side: np.ndarray | None
    gate_index: int | None  # dressed Clifford, if any
    label_map: object = None


def _plan(ir: CircuitIR, dress_gate: bool) -> _Plan:
    mi, meas = single_measure(ir)
    n = ir.dims.n
    if meas.data is not None:
        if dress_gate:
            raise UnsupportedError("gate dressing is not available when the measure names data qudits")
        if meas.side is not None:
            raise UnsupportedError("a side unitary cannot be combined with data qudits")
        rest = tuple(q for q in range(n) if q not in meas.data and q not in meas.qudits)
        return _Plan(ir.dims, mi, tuple(meas.data), rest, True, None, None)
    rest = tuple(q for q in range(n) if q not in meas.qudits)
    side = ir.matrices[meas.side] if meas.side is not None else None
    gate_index, lmap = None, None
    if dress_gate:
        gates = [(i, e) for i, e in ir.gates() if i < mi]
        if not gates:
            raise DomainError("gate dressing requested but no gate precedes the measurement")
        noisy = [(i, e) for i, e in gates if ir.noise_for(i) is not None]
        gate_index, gate = noisy[-1] if noisy else gates[-1]
        for i, e in gates:
            if i > gate_index:
                raise ParseError(
                    "semantic",
                    e.span.line if e.span else 0,
                    e.span.col if e.span else 0,
                    f"gate {e.name} sits between the dressed Clifford gate and its Weyl correction",
                )
        V = _full_unitary(ir, gate)
        lmap = clifford_label_map(V, ir.dims.d)
    return _Plan(ir.dims, mi, tuple(meas.qudits), rest, False, side, gate_index, lmap)


def _full_unitary(ir: CircuitIR, gate: Gate) -> np.ndarray:
    U = G.gate_unitary(gate, ir.dims.d, ir.matrices)
    return embed(U, list(gate.qudits), ir.dims.d, ir.dims.n)


# --------------------------------------------------------------- instances


@dataclass(frozen=True, eq=False)
class DressedInstance:
    ir: CircuitIR
    dressing: DressingTuple
    clifford_label: WeylLabel | None
    relabel: tuple


@dataclass(frozen=True, eq=False)
class ShotBundle:
    seed: int
    mode: str
    instances: list
    source: CircuitIR = field(repr=False, default=None)


def _weyl_gates(qudits, x, z):
    """One single-qudit ``W`` gate per qudit; identity factors are skipped."""
    out = []
    for q, xv, zv in zip(qudits, x, z):
        if xv or zv:
            out.append(Gate("W", (q,), (("x", str(xv)), ("z", str(zv)))))
    return out


def _instance_elements(ir, plan, t: DressingTuple, pq: WeylLabel | None, matrices: dict):
    d = ir.dims.d
    g = weyl_design(QuditDims(d, len(plan.rest))).labels[t.g_index]
    neg_x = tuple((-v) % d for v in t.x)
    pre = _weyl_gates(plan.measured, neg_x, t.a) + _weyl_gates(plan.rest, g.x, g.z)
    post = _weyl_gates(plan.measured, t.x, t.b)
    if plan.side is None:
        ng = -g
        post += _weyl_gates(plan.rest, ng.x, ng.z)
    elif len(plan.rest):
        Gm = weyl_design(QuditDims(d, len(plan.rest))).elements[t.g_index]
        U = plan.side
        name = f"@side_g{t.g_index}"
        matrices[name] = U @ Gm.conj().T @ U.conj().T
        post.append(Gate("U", plan.rest, (), name))
    els = list(ir.elements)
    out = []
    if plan.data_mode:
        out.extend(pre)
    n = ir.dims.n
    for i, el in enumerate(els):
        if plan.gate_index is not None and i == plan.gate_index:
            out.extend(_weyl_gates(range(n), pq.x, pq.z))
        if i == plan.measure_index and not plan.data_mode:
            out.extend(pre)
        out.append(el)
        if plan.gate_index is not None and i == plan.gate_index:
            # the correction goes after the gate's noise binding
            if i + 1 < len(els) and isinstance(els[i + 1], NoiseBinding):
                continue
            corr = correction_label(plan.label_map, pq)
            out.extend(_weyl_gates(range(n), corr.x, corr.z))
        if isinstance(el, NoiseBinding) and plan.gate_index is not None and el.target == plan.gate_index:
            corr = correction_label(plan.label_map, pq)
            out.extend(_weyl_gates(range(n), corr.x, corr.z))
        if i == plan.measure_index:
            out.extend(post)
            out.append(Relabel(tuple(t.x)))
    return out


def _retarget(elements):
    """Recompute noise targets: each binding follows its gate."""
    out, last_gate = [], None
    for el in elements:
        if isinstance(el, NoiseBinding):
            out.append(NoiseBinding(last_gate, el.model, el.params, el.span))
        else:
            if isinstance(el, Gate):
                last_gate = len(out)
            out.append(el)
    return tuple(out)


def _weyl_of(gate: Gate, d: int):
    if len(gate.qudits) != 1 or gate.ref is not None:
        return None
    p = int(gate.param("pow", 1))
    if gate.name == "X":
        return (p % d, 0)
    if gate.name == "Z":
        return (0, p % d)
    if gate.name == "W":
        return (int(gate.param("x", "0")), int(gate.param("z", "0")))
    return None


def merge_single_qudit(elements, d: int, matrices: dict):
    """Fuse runs of noiseless single-qudit gates on the same qudit.

    Weyl-only runs become one ``W`` gate (dropped if trivial); mixed runs
    become one ``U`` gate with a generated matrix name. Spans of the first
    gate in each run are kept.
    """
    els = list(elements)
    out = []
    last = {}
    counter = [len([k for k in matrices if k.startswith("@merged")])]
    for i, el in enumerate(els):
        noisy_next = i + 1 < len(els) and isinstance(els[i + 1], NoiseBinding)
        if isinstance(el, Gate) and len(el.qudits) == 1 and not noisy_next:
            q = el.qudits[0]
            j = last.get(q)
            if j is not None and out[j] is not None:
                out[j] = _fuse(out[j], el, d, matrices, counter)
                if out[j] is None:
                    last[q] = None
                continue
            out.append(el)
            last[q] = len(out) - 1
            continue
        if isinstance(el, (Gate, Measure)):
            for q in el.qudits:
                last[q] = None
        out.append(el)
    return [e for e in out if e is not None]


def _fuse(first: Gate, second: Gate, d: int, matrices: dict, counter):
    wa, wb = _weyl_of(first, d), _weyl_of(second, d)
    if wa is not None and wb is not None:
        x, z = (wa[0] + wb[0]) % d, (wa[1] + wb[1]) % d
        if x == 0 and z == 0:
            return None
        return Gate("W", first.qudits, (("x", str(x)), ("z", str(z))), None, first.span)
    M = G.gate_unitary(second, d, matrices) @ G.gate_unitary(first, d, matrices)
    name = f"@merged{counter[0]}"
    counter[0] += 1
    matrices[name] = M
    return Gate("U", first.qudits, (), name, first.span)


def build_instance(ir, plan, t, pq, merge=True) -> DressedInstance:
    matrices = dict(ir.matrices)
    els = _instance_elements(ir, plan, t, pq, matrices)
    if merge:
        els = merge_single_qudit(els, ir.dims.d, matrices)
    inst_ir = CircuitIR(ir.dims, _retarget(els), matrices, dict(ir.metadata))
    return DressedInstance(inst_ir, t, pq, tuple(t.x))


def _draw(plan, seed: int, index: int):
    d = plan.dims.d
    m = len(plan.measured)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))
    a, b, x = (tuple(int(v) for v in rng.integers(0, d, size=m)) for _ in range(3))
    t = DressingTuple(a, b, x, int(rng.integers(0, d ** (2 * len(plan.rest)))))
    pq = None
    if plan.gate_index is not None:
        n = plan.dims.n
        pq = WeylLabel(tuple(rng.integers(0, d, size=n)), tuple(rng.integers(0, d, size=n)), d)
    return t, pq


def _all_draws(plan):
    d = plan.dims.d
    tuples = list(all_tuples(d, len(plan.measured), d ** (2 * len(plan.rest))))
    labels = all_labels(d, plan.dims.n) if plan.gate_index is not None else [None]
    return list(itertools.product(tuples, labels))


# ------------------------------------------------------------------ entry


@dataclass(frozen=True, eq=False)
class ExactRewrite:
    instrument: Instrument
    report: RCReport
    clifford: CliffordAverage | None = None


def rc_rewrite(
    ir: CircuitIR,
    mode: str = "exact",
    seed: int = 0,
    samples: int = 16,
    stratified: bool = False,
    exhaustive: bool = False,
    dress_gate: bool = False,
    merge: bool = True,
    tol: float | None = None,
    workers: int | None = None,
):
    """Randomly compile ``ir``.

    ``mode="exact"`` returns :class:`ExactRewrite`; ``mode="sampled"``
    returns a :class:`ShotBundle`. With ``exhaustive`` the bundle holds every
    dressing once in enumeration order; with ``stratified`` it holds a seeded
    permutation of them.
    """
    plan = _plan(ir, dress_gate)
    if mode == "exact":
        return _exact(ir, plan, tol, workers)
    if mode != "sampled":
        raise DomainError(f"unknown mode {mode!r}")
    if exhaustive:
        draws = _all_draws(plan)
        kind = "exhaustive"
    elif stratified:
        every = _all_draws(plan)
        order = np.random.default_rng(np.random.SeedSequence(seed)).permutation(len(every))
        draws = [every[order[s % len(every)]] for s in range(samples)]
        kind = "stratified"
    else:
        if samples < 1:
            raise DomainError("samples must be at least 1")
        draws = [_draw(plan, seed, s) for s in range(samples)]
        kind = "sampled"
    instances = [build_instance(ir, plan, t, pq, merge) for t, pq in draws]
    return ShotBundle(int(seed), kind, instances, ir)


def _exact(ir: CircuitIR, plan: _Plan, tol, workers) -> ExactRewrite:
    if plan.data_mode:
        noisy = elaborate_data(ir)
        report = rc_average_exact(noisy, tol=tol, workers=workers)
        return ExactRewrite(report.averaged, report)
    mi = plan.measure_index
    meas = ir.elements[mi]
    ideal = ideal_subsystem_measurement(plan.side, ir.dims, meas.qudits)
    report = rc_average_exact(ideal, tol=tol, workers=workers)
    inst = report.averaged
    clifford = None
    if plan.gate_index is not None:
        gi = plan.gate_index
        V = _full_unitary(ir, ir.elements[gi])
        clifford = rc_clifford_average(element_channel(ir, gi), V, tol)
        before = clifford.averaged @ segment_channel(ir, 0, gi)
    else:
        before = segment_channel(ir, 0, mi)
    inst = compose_before(inst, before)
    for i in range(mi + 1, len(ir.elements)):
        if isinstance(ir.elements[i], Gate):
            inst = compose_after(inst, element_channel(ir, i))
    return ExactRewrite(inst, report, clifford)


def average_bundle(bundle: ShotBundle) -> Instrument:
    """Mean of the elaborated instances, read relative to data qudits when named."""
    insts = [elaborate_data(i.ir) for i in bundle.instances]
    first = insts[0]
    acc = {k: np.zeros_like(S.matrix) for k, S in first.branches.items()}
    for inst in insts:
        for k in acc:
            acc[k] += inst.branches[k].matrix
    return first.replace(
        branches={k: Superoperator(v / len(insts), first.dims) for k, v in acc.items()},
        side_unitary=first.side_unitary,
    )


def gate_counts(ir: CircuitIR) -> dict:
    single = sum(1 for _, g in ir.gates() if len(g.qudits) == 1)
    multi = sum(1 for _, g in ir.gates() if len(g.qudits) > 1)
    return {"single": single, "multi": multi}
