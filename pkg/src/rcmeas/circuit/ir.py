"""Circuit intermediate representation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import RCMeasError
from ..weyl import QuditDims


@dataclass(frozen=True)
class Span:
    line: int
    col: int


class ParseError(RCMeasError, ValueError):
    """Syntax or semantic error with a 1-based source position."""

    def __init__(self, kind, line, col, message, expected=()):
        self.kind = kind
        self.line = line
        self.col = col
        self.message = message
        self.expected = tuple(expected)
        where = f"{line}:{col}"
        extra = f" (expected {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"{kind} error at {where}: {message}{extra}")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "line": self.line,
            "col": self.col,
            "message": self.message,
            "expected": list(self.expected),
        }


@dataclass(frozen=True)
class Gate:
    name: str
    qudits: tuple
    params: tuple = ()
    ref: str | None = None
    span: Span | None = None

    def param(self, key, default=None):
        for k, v in self.params:
            if k == key:
                return v
        return default

    def structure(self) -> dict:
        out = {"type": "gate", "name": self.name, "qudits": list(self.qudits), "params": {k: v for k, v in self.params}}
        if self.ref is not None:
            out["ref"] = self.ref
        return out


@dataclass(frozen=True)
class NoiseBinding:
    target: int  # element index of the bound gate
    model: str
    params: tuple = ()
    span: Span | None = None

    def param(self, key, default=None):
        for k, v in self.params:
            if k == key:
                return v
        return default

    def structure(self) -> dict:
        return {"type": "noise", "target": self.target, "model": self.model, "params": {k: v for k, v in self.params}}


@dataclass(frozen=True)
class Measure:
    qudits: tuple
    side: str | None = None
    data: tuple | None = None
    span: Span | None = None

    def structure(self) -> dict:
        out = {"type": "measure", "qudits": list(self.qudits)}
        if self.side is not None:
            out["side"] = self.side
        if self.data is not None:
            out["data"] = list(self.data)
        return out


@dataclass(frozen=True)
class Relabel:
    """Add ``x`` to the reported outcome. Only produced by the RC rewrite."""

    x: tuple
    span: Span | None = None

    def structure(self) -> dict:
        return {"type": "relabel", "x": list(self.x)}


@dataclass(frozen=True, eq=False)
class CircuitIR:
    dims: QuditDims
    elements: tuple
    matrices: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def structure(self) -> dict:
        """Position-free view used for structural comparison."""
        return {
            "dims": {"d": self.dims.d, "n": self.dims.n},
            "elements": [e.structure() for e in self.elements],
        }

    def to_dict(self) -> dict:
        out = self.structure()
        for el, src in zip(out["elements"], self.elements):
            if src.span is not None:
                el["line"], el["col"] = src.span.line, src.span.col
        return out

    def replace(self, **changes) -> "CircuitIR":
        fields = dict(dims=self.dims, elements=self.elements, matrices=self.matrices, metadata=self.metadata)
        fields.update(changes)
        return CircuitIR(**fields)

    def gates(self):
        return [(i, e) for i, e in enumerate(self.elements) if isinstance(e, Gate)]

    def measures(self):
        return [(i, e) for i, e in enumerate(self.elements) if isinstance(e, Measure)]

    def noise_for(self, index: int) -> NoiseBinding | None:
        for e in self.elements:
            if isinstance(e, NoiseBinding) and e.target == index:
                return e
        return None

    def matrix(self, ref: str) -> np.ndarray:
        return self.matrices[ref]
