"""JSON views of the toolkit's results.

Matrices are nested lists of ``[re, im]`` pairs, outcome keys are digit
strings, and floats keep full double precision (``json`` writes ``repr``).
"""

from __future__ import annotations

import json

import numpy as np

from .channels import StochasticCertificate, Superoperator
from .instruments import ConfusionMatrix, ExtractionFailure, Instrument


def key(digits) -> str:
    return "".join(str(int(v)) for v in digits)


def ab_key(ab) -> str:
    a, b = ab
    return f"a={key(a)},b={key(b)}"


def matrix_to_json(M) -> list:
    M = np.asarray(M, dtype=complex)
    return [[[float(v.real), float(v.imag)] for v in row] for row in M]


def matrix_from_json(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]


def superop_to_json(S: Superoperator) -> dict:
    return {"d": S.dims.d, "n": S.dims.n, "matrix": matrix_to_json(S.matrix)}


def instrument_to_json(inst: Instrument) -> dict:
    return {
        "dims": {"d": inst.dims.d, "n": inst.dims.n},
        "measured": list(inst.measured),
        "readout": inst.readout,
        "side_unitary": matrix_to_json(inst.side_unitary),
        "branches": {key(k): matrix_to_json(S.matrix) for k, S in inst.branches.items()},
    }


def certificate_to_json(c: StochasticCertificate) -> dict:
    return {
        "is_stochastic": bool(c.is_stochastic),
        "identity_weight": float(c.identity_weight),
        "weyl_weights": {str(L): float(w) for L, w in c.weyl_weights.items()},
        "residual": float(c.residual),
        "max_imag": float(c.max_imag),
        "min_weight": float(c.min_weight),
        "total_weight": float(c.total_weight),
        "pre_twirl_residual": None if c.pre_twirl_residual is None else float(c.pre_twirl_residual),
    }


def confusion_to_json(C: ConfusionMatrix) -> dict:
    return {"outcomes": [key(k) for k in C.outcomes], "entries": [[float(v) for v in row] for row in C.entries]}


def form_to_json(form, include_maps: bool = False) -> dict:
    if isinstance(form, ExtractionFailure):
        return {
            "ok": False,
            "failed": list(form.failed),
            "dyad_residual": float(form.dyad_residual),
            "k_independence_residual": float(form.k_independence_residual),
            "stochastic_residual": float(form.stochastic_residual),
            "message": form.message,
        }
    out = {
        "ok": True,
        "dyad_residual": float(form.dyad_residual),
        "k_independence_residual": float(form.k_independence_residual),
        "stochastic_residual": float(form.stochastic_residual),
        "trace_weights": {ab_key(ab): float(w) for ab, w in form.misreport_state_weights.items()},
        "side_unitary": matrix_to_json(form.side_unitary),
    }
    if include_maps:
        out["T"] = {ab_key(ab): matrix_to_json(T.matrix) for ab, T in form.T.items()}
    return out


def rc_report_to_json(report, include_instrument: bool = False) -> dict:
    out = {
        "success": bool(report.success),
        "mode": dict(report.mode),
        "tuples_evaluated": int(report.tuples_evaluated),
        "dyad_residual": float(report.dyad_residual),
        "k_independence_residual": float(report.k_independence_residual),
        "stochastic_residual_max": float(report.stochastic_residual_max),
        "exact_deviation": None if report.exact_deviation is None else float(report.exact_deviation),
        "confusion": confusion_to_json(report.confusion),
        "trace_weights": {ab_key(ab): float(w) for ab, w in report.trace_weights.items()},
        "form": form_to_json(report.form),
    }
    if include_instrument:
        out["averaged"] = instrument_to_json(report.averaged)
    return out


def outcome_table_to_json(records, include_states: bool = True) -> list:
    rows = []
    for r in records:
        row = {"outcome": key(r.outcome), "probability": float(r.probability), "negligible": bool(r.negligible)}
        if include_states:
            row["post_state"] = None if r.post_state is None else matrix_to_json(r.post_state)
        rows.append(row)
    return rows


def leakage_to_json(report) -> dict:
    return {
        "params": dict(report.params),
        "outcomes": [
            {"outcome": e.outcome, "ideal": float(e.ideal), "cross": float(e.cross), "outside": float(e.outside)}
            for e in report.entries
        ],
    }


def shot_bundle_to_json(bundle) -> dict:
    from .circuit.parser import format_circuit

    return {
        "seed": int(bundle.seed),
        "mode": bundle.mode,
        "count": len(bundle.instances),
        "instances": [
            {
                "dressing": inst.dressing.as_dict(),
                "clifford_label": None if inst.clifford_label is None else str(inst.clifford_label),
                "relabel_x": list(inst.relabel),
                "circuit": format_circuit(inst.ir),
                "elements": inst.ir.structure()["elements"],
            }
            for inst in bundle.instances
        ],
    }


def _plain(o):
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False, default=_plain)


# ------------------------------------------------------------------ schemas

_MATRIX = {
    "type": "array",
    "items": {
        "type": "array",
        "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
    },
}
_CONFUSION = {
    "type": "object",
    "required": ["outcomes", "entries"],
    "properties": {
        "outcomes": {"type": "array", "items": {"type": "string", "pattern": "^[0-9]+$"}},
        "entries": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
    },
}
_FORM = {
    "type": "object",
    "required": ["ok", "dyad_residual", "k_independence_residual", "stochastic_residual"],
    "properties": {
        "ok": {"type": "boolean"},
        "failed": {"type": "array", "items": {"enum": ["dyad", "k_independence", "stochastic"]}},
        "dyad_residual": {"type": "number", "minimum": 0},
        "k_independence_residual": {"type": "number", "minimum": 0},
        "stochastic_residual": {"type": "number", "minimum": 0},
        "trace_weights": {"type": "object", "additionalProperties": {"type": "number"}},
        "side_unitary": _MATRIX,
        "T": {"type": "object", "additionalProperties": _MATRIX},
    },
}
_INSTRUMENT = {
    "type": "object",
    "required": ["dims", "measured", "branches", "side_unitary"],
    "properties": {
        "dims": {"type": "object", "required": ["d", "n"]},
        "measured": {"type": "array", "items": {"type": "integer"}},
        "readout": {"enum": ["direct", "virtual"]},
        "side_unitary": _MATRIX,
        "branches": {"type": "object", "patternProperties": {"^[0-9]*$": _MATRIX}, "additionalProperties": False},
    },
}
_RC_REPORT = {
    "type": "object",
    "required": [
        "success",
        "mode",
        "tuples_evaluated",
        "dyad_residual",
        "k_independence_residual",
        "stochastic_residual_max",
        "confusion",
        "trace_weights",
        "form",
    ],
    "properties": {
        "success": {"type": "boolean"},
        "mode": {"type": "object", "required": ["mode"], "properties": {"mode": {"enum": ["exact", "sampled"]}}},
        "tuples_evaluated": {"type": "integer", "minimum": 1},
        "dyad_residual": {"type": "number", "minimum": 0},
        "k_independence_residual": {"type": "number", "minimum": 0},
        "stochastic_residual_max": {"type": "number", "minimum": 0},
        "exact_deviation": {"type": ["number", "null"]},
        "confusion": _CONFUSION,
        "trace_weights": {"type": "object", "additionalProperties": {"type": "number"}},
        "form": _FORM,
        "averaged": _INSTRUMENT,
    },
}
_OUTCOME_TABLE = {
    "type": "array",
    "items": {
        "type": "object",
        "required": ["outcome", "probability", "negligible"],
        "properties": {
            "outcome": {"type": "string", "pattern": "^[0-9]*$"},
            "probability": {"type": "number"},
            "negligible": {"type": "boolean"},
            "post_state": {"anyOf": [{"type": "null"}, _MATRIX]},
        },
    },
}
_LEAKAGE = {
    "type": "object",
    "required": ["params", "outcomes"],
    "properties": {
        "params": {"type": "object"},
        "outcomes": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["outcome", "ideal", "cross", "outside"],
                "properties": {
                    "outcome": {"type": "integer"},
                    "ideal": {"type": "number", "minimum": 0},
                    "cross": {"type": "number", "minimum": 0},
                    "outside": {"type": "number", "minimum": 0},
                },
            },
        },
    },
}
_SHOT_BUNDLE = {
    "type": "object",
    "required": ["seed", "mode", "count", "instances"],
    "properties": {
        "seed": {"type": "integer"},
        "mode": {"enum": ["sampled", "stratified", "exhaustive"]},
        "count": {"type": "integer", "minimum": 1},
        "instances": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["dressing", "relabel_x", "circuit", "elements"],
                "properties": {
                    "dressing": {
                        "type": "object",
                        "required": ["a", "b", "x", "g_index"],
                    },
                    "clifford_label": {"type": ["string", "null"]},
                    "relabel_x": {"type": "array", "items": {"type": "integer"}},
                    "circuit": {"type": "string"},
                    "elements": {"type": "array"},
                },
            },
        },
    },
}
_CHECK = {
    "type": "object",
    "required": ["name", "passed"],
    "properties": {"name": {"type": "string"}, "passed": {"type": "boolean"}},
}

SCHEMAS = {
    "instrument": _INSTRUMENT,
    "confusion": _CONFUSION,
    "form": _FORM,
    "rc_report": _RC_REPORT,
    "outcome_table": _OUTCOME_TABLE,
    "leakage": _LEAKAGE,
    "shot_bundle": _SHOT_BUNDLE,
    "simulate": {
        "type": "object",
        "required": ["command", "outcomes"],
        "properties": {"command": {"const": "simulate"}, "outcomes": _OUTCOME_TABLE},
    },
    "rc": {
        "type": "object",
        "required": ["command", "mode"],
        "properties": {
            "command": {"const": "rc"},
            "mode": {"enum": ["exact", "sampled"]},
            "report": _RC_REPORT,
            "bundle": _SHOT_BUNDLE,
            "confusion": _CONFUSION,
            "clifford": {"type": ["object", "null"]},
        },
    },
    "verify": {
        "type": "object",
        "required": ["command", "target", "passed", "checks"],
        "properties": {
            "command": {"const": "verify"},
            "target": {"enum": ["lemma1", "theorem1", "appendix"]},
            "passed": {"type": "boolean"},
            "tol": {"type": "number"},
            "checks": {"type": "array", "items": _CHECK},
        },
    },
    "confusion_sweep": {
        "type": "object",
        "required": ["command", "results"],
        "properties": {
            "command": {"const": "confusion"},
            "results": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["phi", "raw", "rc"],
                    "properties": {"phi": {"type": "number"}, "raw": _CONFUSION, "rc": _CONFUSION},
                },
            },
        },
    },
    "error": {
        "type": "object",
        "required": ["error"],
        "properties": {
            "error": {
                "type": "object",
                "required": ["type", "message"],
                "properties": {"type": {"type": "string"}, "message": {"type": "string"}},
            }
        },
    },
}
