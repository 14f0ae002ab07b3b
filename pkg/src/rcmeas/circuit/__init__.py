"""Circuit DSL: parsing, elaboration to instruments and the RC rewrite."""

from .elaborate import data_view, elaborate, elaborate_data
from .ir import CircuitIR, Gate, Measure, NoiseBinding, ParseError, Relabel, Span
from .parser import format_circuit, parse, parse_file
from .rewrite import (
    DressedInstance,
    ExactRewrite,
    ShotBundle,
    average_bundle,
    gate_counts,
    rc_rewrite,
)

__all__ = [
    "CircuitIR",
    "DressedInstance",
    "ExactRewrite",
    "Gate",
    "Measure",
    "NoiseBinding",
    "ParseError",
    "Relabel",
    "ShotBundle",
    "Span",
    "average_bundle",
    "data_view",
    "elaborate",
    "elaborate_data",
    "format_circuit",
    "gate_counts",
    "parse",
    "parse_file",
    "rc_rewrite",
]
