"""Line-oriented circuit DSL.

Grammar, one statement per line, ``#`` starts a comment::

    dims d=<int> n=<int>
    gate <NAME>[(<params>)] <q> [<q> ...]
    noise <model>(<params>) on last
    measure <q> [<q> ...] [side=<ref>] [data=<q>[,<q>...]]

Gate names are X, Z, F, CX, CW, W, U(<matrix file>) and
CLIFFORD(<label-map file>). Parameter values are numbers, digit strings or
arithmetic on numbers and ``pi``.
"""

from __future__ import annotations

import ast
import math
import operator
import os
import re

import numpy as np

from ..errors import DomainError, RCMeasError, ResourceError
from ..weyl import QuditDims
from . import gates as G
from .ir import CircuitIR, Gate, Measure, NoiseBinding, ParseError, Relabel, Span

KEYWORDS = ("dims", "gate", "noise", "measure")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_INT = re.compile(r"\d+")

GATE_PARAMS = {
    "X": {"pow"},
    "Z": {"pow"},
    "F": {"pow"},
    "CX": {"pow"},
    "CW": {"x", "z", "t"},
    "W": {"x", "z"},
    "U": set(),
    "CLIFFORD": set(),
}
NOISE_PARAMS = {"overrot": ({"phi"}, {"phi"}), "depol": ({"p"}, {"p"}), "coherent": ({"eps", "seed"}, {"eps"})}
DIGIT_KEYS = {"x", "z"}
INT_KEYS = {"pow", "seed"}

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}


def eval_number(text: str) -> float:
    """Evaluate arithmetic on numeric literals and ``pi``."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return node.value
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        raise ValueError(text)

    try:
        return ev(ast.parse(text.strip(), mode="eval"))
    except (SyntaxError, ValueError, ZeroDivisionError):
        raise ValueError(text) from None


class _Line:
    """Cursor over one source line with 1-based columns."""

    def __init__(self, text: str, lineno: int):
        self.text = text
        self.lineno = lineno
        self.pos = 0

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos] in " \t":
            self.pos += 1

    @property
    def col(self) -> int:
        return self.pos + 1

    def at_end(self) -> bool:
        self.skip_ws()
        return self.pos >= len(self.text)

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def error(self, message, expected=(), col=None, kind="syntax"):
        return ParseError(kind, self.lineno, self.col if col is None else col, message, expected)

    def word(self, what="a word"):
        self.skip_ws()
        m = re.compile(r"[^\s(),=]+").match(self.text, self.pos)
        if not m:
            found = self.text[self.pos] if self.pos < len(self.text) else "end of line"
            raise self.error(f"unexpected {found!r}" if found != "end of line" else "unexpected end of line", (what,))
        self.pos = m.end()
        return m.group(0), m.start() + 1

    def token(self, what="a value"):
        """Everything up to the next whitespace, commas included."""
        self.skip_ws()
        m = re.compile(r"\S+").match(self.text, self.pos)
        if not m:
            raise self.error("unexpected end of line", (what,))
        self.pos = m.end()
        return m.group(0), m.start() + 1

    def expect(self, ch: str):
        self.skip_ws()
        if self.pos >= len(self.text) or self.text[self.pos] != ch:
            found = self.text[self.pos] if self.pos < len(self.text) else "end of line"
            raise self.error(f"unexpected {found!r}" if found != "end of line" else "unexpected end of line", (repr(ch),))
        self.pos += 1

    def until(self, stops: str):
        """Raw text up to a top-level stop character."""
        self.skip_ws()
        start = self.pos
        depth = 0
        while self.pos < len(self.text):
            ch = self.text[self.pos]
            if ch == "(":
                depth += 1
            elif ch == ")":
                if depth == 0 and ")" in stops:
                    break
                depth -= 1
            elif ch in stops and depth == 0:
                break
            self.pos += 1
        return self.text[start : self.pos].strip(), start + 1


def _strip_comment(line: str) -> str:
    i = line.find("#")
    return line if i < 0 else line[:i]


def _param_list(cur: _Line, allow_ref: bool):
    """Parse ``(k=v, ...)``; returns ``(ref, [(key, raw, col)])``."""
    cur.expect("(")
    ref, items = None, []
    if cur.peek() == ")":
        cur.expect(")")
        return ref, items
    first = True
    while True:
        raw, col = cur.until(",)")
        if not raw:
            raise cur.error("empty parameter", ("a parameter",))
        if "=" in raw:
            key, val = (s.strip() for s in raw.split("=", 1))
            if not _IDENT.fullmatch(key):
                raise ParseError("syntax", cur.lineno, col, f"invalid parameter name {key!r}", ("an identifier",))
            if not val:
                raise ParseError("syntax", cur.lineno, col, f"parameter {key} has no value", ("a value",))
            items.append((key, val, col))
        elif allow_ref and first:
            ref = raw
        else:
            raise ParseError("syntax", cur.lineno, col, f"expected key=value, found {raw!r}", ("key=value",))
        first = False
        if cur.peek() == ",":
            cur.expect(",")
            continue
        cur.expect(")")
        return ref, items


def _convert_params(items, allowed, lineno, what):
    out, seen = [], set()
    for key, raw, col in items:
        if key not in allowed:
            expected = tuple(sorted(allowed))
            raise ParseError("semantic", lineno, col, f"{what} does not take parameter {key!r}", expected)
        if key in seen:
            raise ParseError("semantic", lineno, col, f"duplicate parameter {key!r}")
        seen.add(key)
        if key in DIGIT_KEYS:
            if not raw.isdigit():
                raise ParseError("syntax", lineno, col, f"parameter {key} must be a digit string", ("digits",))
            out.append((key, raw))
            continue
        try:
            val = eval_number(raw)
        except ValueError:
            raise ParseError("syntax", lineno, col, f"cannot read number {raw!r}", ("a number",)) from None
        if key in INT_KEYS:
            if float(val) != int(val):
                raise ParseError("semantic", lineno, col, f"parameter {key} must be an integer")
            val = int(val)
        else:
            val = float(val)
        out.append((key, val))
    return tuple(out)


def _qudit_list(cur: _Line, n: int, stop_at_kw=False):
    qs = []
    while not cur.at_end():
        save = cur.pos
        tok, col = cur.word("a qudit index")
        if stop_at_kw and cur.peek() == "=":
            cur.pos = save
            break
        if not _INT.fullmatch(tok):
            raise ParseError("syntax", cur.lineno, col, f"expected a qudit index, found {tok!r}", ("a qudit index",))
        q = int(tok)
        if q >= n:
            raise ParseError("semantic", cur.lineno, col, f"qudit index {q} out of range for n={n}")
        if q in qs:
            raise ParseError("semantic", cur.lineno, col, f"qudit {q} listed twice")
        qs.append(q)
    return qs


class _Parser:
    def __init__(self, source: str, base_dir: str | None, matrices: dict | None):
        self.source = source
        self.base_dir = base_dir or "."
        self.matrices = dict(matrices or {})
        self.dims = None
        self.elements = []

    def parse(self) -> CircuitIR:
        for lineno, raw in enumerate(self.source.splitlines(), start=1):
            text = _strip_comment(raw)
            if not text.strip():
                continue
            cur = _Line(text, lineno)
            kw, col = cur.word("a statement keyword")
            if kw not in KEYWORDS:
                raise ParseError("syntax", lineno, col, f"unknown statement {kw!r}", KEYWORDS)
            if kw != "dims" and self.dims is None:
                raise ParseError("semantic", lineno, col, "the first statement must be 'dims'", ("dims",))
            getattr(self, "_" + kw)(cur, Span(lineno, col))
            if not cur.at_end():
                raise cur.error(f"unexpected trailing text {cur.text[cur.pos:].strip()!r}", ("end of line",))
        if self.dims is None:
            n_lines = len(self.source.splitlines())
            raise ParseError("semantic", max(n_lines, 1), 1, "missing 'dims' statement", ("dims",))
        return CircuitIR(self.dims, tuple(self.elements), self.matrices)

    # statements -------------------------------------------------------

    def _dims(self, cur, span):
        if self.dims is not None:
            raise ParseError("semantic", span.line, span.col, "duplicate 'dims' statement")
        vals = {}
        while not cur.at_end():
            key, col = cur.word("d= or n=")
            if key not in ("d", "n"):
                raise ParseError("syntax", cur.lineno, col, f"unknown dims field {key!r}", ("d", "n"))
            cur.expect("=")
            val, vcol = cur.word("an integer")
            if not _INT.fullmatch(val):
                raise ParseError("syntax", cur.lineno, vcol, f"expected an integer, found {val!r}", ("an integer",))
            if key in vals:
                raise ParseError("semantic", cur.lineno, col, f"duplicate dims field {key!r}")
            vals[key] = (int(val), vcol)
        for key in ("d", "n"):
            if key not in vals:
                raise cur.error(f"dims is missing {key}=", (f"{key}=",), kind="syntax")
        if vals["n"][0] < 1:
            raise ParseError("semantic", cur.lineno, vals["n"][1], "n must be at least 1")
        try:
            self.dims = QuditDims(vals["d"][0], vals["n"][0])
        except ResourceError:
            raise
        except RCMeasError as exc:
            raise ParseError("semantic", cur.lineno, vals["d"][1], str(exc)) from None

    def _gate(self, cur, span):
        name, ncol = cur.word("a gate name")
        if name not in G.GATE_NAMES:
            raise ParseError("syntax", cur.lineno, ncol, f"unknown gate {name!r}", G.GATE_NAMES)
        ref, items = None, []
        if cur.peek() == "(":
            ref, items = _param_list(cur, allow_ref=name in G.REF_GATES)
        if name in G.REF_GATES and ref is None:
            raise ParseError("syntax", cur.lineno, cur.col, f"gate {name} needs a file reference", ("(<file>)",))
        params = _convert_params(items, GATE_PARAMS[name], cur.lineno, f"gate {name}")
        qs = _qudit_list(cur, self.dims.n)
        if not qs:
            raise cur.error(f"gate {name} needs at least one qudit", ("a qudit index",))
        self._check_arity(name, qs, params, ref, cur.lineno, ncol)
        gate = Gate(name, tuple(qs), params, ref, span)
        if ref is not None:
            self._load_ref(name, ref, len(qs), cur.lineno, ncol)
        try:
            G.gate_unitary(gate, self.dims.d, self.matrices)
        except (DomainError, ValueError) as exc:
            raise ParseError("semantic", cur.lineno, ncol, str(exc)) from None
        self.elements.append(gate)

    def _check_arity(self, name, qs, params, ref, lineno, col):
        k = len(qs)
        if name in G.ARITY and k != G.ARITY[name]:
            raise ParseError("semantic", lineno, col, f"gate {name} acts on {G.ARITY[name]} qudit(s), got {k}")
        if name == "CW" and k < 2:
            raise ParseError("semantic", lineno, col, "gate CW needs a control and at least one target")
        d = self.dims.d
        for key, val in params:
            if key in DIGIT_KEYS:
                width = k - 1 if name == "CW" else k
                if len(val) != width or any(int(ch) >= d for ch in val):
                    raise ParseError(
                        "semantic", lineno, col, f"parameter {key}={val} must be {width} digit(s) below {d}"
                    )

    def _load_ref(self, name, ref, k, lineno, col):
        if ref not in self.matrices:
            path = ref if os.path.isabs(ref) else os.path.join(self.base_dir, ref)
            try:
                with open(path, encoding="utf-8") as fh:
                    text = fh.read()
            except OSError:
                raise ParseError("semantic", lineno, col, f"cannot read file {ref!r}") from None
            try:
                if name == "CLIFFORD":
                    images = G.parse_clifford_text(text, self.dims.d, k)
                    M = G.clifford_from_images(images, self.dims.d, k)
                else:
                    M = G.parse_matrix_text(text)
            except (DomainError, ValueError) as exc:
                raise ParseError("semantic", lineno, col, f"{ref}: {exc}") from None
            self.matrices[ref] = M
        M = self.matrices[ref]
        D = self.dims.d**k
        if M.shape != (D, D):
            raise ParseError("semantic", lineno, col, f"matrix {ref!r} has shape {M.shape}, expected {(D, D)}")
        if np.max(np.abs(M.conj().T @ M - np.eye(D))) > 1e-9:
            raise ParseError("semantic", lineno, col, f"matrix {ref!r} is not unitary")

    def _noise(self, cur, span):
        model, mcol = cur.word("a noise model")
        if model not in NOISE_PARAMS:
            raise ParseError("syntax", cur.lineno, mcol, f"unknown noise model {model!r}", G.NOISE_MODELS)
        if cur.peek() != "(":
            raise cur.error("noise model needs parameters", ("'('",))
        _, items = _param_list(cur, allow_ref=False)
        allowed, required = NOISE_PARAMS[model]
        params = _convert_params(items, allowed, cur.lineno, f"noise model {model}")
        missing = sorted(required - {k for k, _ in params})
        if missing:
            raise ParseError("semantic", cur.lineno, mcol, f"noise model {model} needs {', '.join(missing)}")
        on, ocol = cur.word("'on'")
        if on != "on":
            raise ParseError("syntax", cur.lineno, ocol, f"expected 'on', found {on!r}", ("on",))
        tgt, tcol = cur.word("'last'")
        if tgt != "last":
            raise ParseError("syntax", cur.lineno, tcol, f"expected 'last', found {tgt!r}", ("last",))
        target = None
        for i in range(len(self.elements) - 1, -1, -1):
            if isinstance(self.elements[i], Gate):
                target = i
                break
            if isinstance(self.elements[i], Measure):
                break
        if target is None:
            raise ParseError("semantic", span.line, span.col, "'on last' has no preceding gate to bind to")
        for e in self.elements:
            if isinstance(e, NoiseBinding) and e.target == target:
                raise ParseError("semantic", span.line, span.col, "gate already has a noise binding")
        gate = self.elements[target]
        if model == "overrot" and (gate.name != "CX" or self.dims.d != 2 or gate.param("pow", 1) != 1):
            raise ParseError("semantic", span.line, mcol, "overrot noise applies only to a qubit CX gate")
        self.elements.append(NoiseBinding(target, model, params, span))

    def _measure(self, cur, span):
        qs = _qudit_list(cur, self.dims.n, stop_at_kw=True)
        if not qs:
            raise ParseError("syntax", cur.lineno, cur.col, "measure needs at least one qudit", ("a qudit index",))
        side = data = None
        while not cur.at_end():
            key, kcol = cur.word("side= or data=")
            if key not in ("side", "data"):
                raise ParseError("syntax", cur.lineno, kcol, f"unknown measure option {key!r}", ("side", "data"))
            cur.expect("=")
            if key == "side":
                if side is not None:
                    raise ParseError("semantic", cur.lineno, kcol, "duplicate option 'side'")
                side, vcol = cur.word("a file reference")
                rest_n = self.dims.n - len(qs)
                if rest_n == 0:
                    raise ParseError("semantic", cur.lineno, vcol, "side unitary given but no qudit is unmeasured")
                self._load_ref("U", side, rest_n, cur.lineno, vcol)
            else:
                if data is not None:
                    raise ParseError("semantic", cur.lineno, kcol, "duplicate option 'data'")
                raw, vcol = cur.token("qudit indices")
                data = []
                for part in raw.split(","):
                    if not _INT.fullmatch(part):
                        raise ParseError("syntax", cur.lineno, vcol, f"expected qudit indices, found {raw!r}", ("q[,q...]",))
                    q = int(part)
                    if q >= self.dims.n:
                        raise ParseError("semantic", cur.lineno, vcol, f"qudit index {q} out of range for n={self.dims.n}")
                    if q in qs:
                        raise ParseError("semantic", cur.lineno, vcol, f"data qudit {q} is also measured")
                    if q in data:
                        raise ParseError("semantic", cur.lineno, vcol, f"qudit {q} listed twice")
                    data.append(q)
                if len(data) != len(qs):
                    raise ParseError(
                        "semantic", cur.lineno, vcol, f"{len(data)} data qudit(s) for {len(qs)} measured qudit(s)"
                    )
                data = tuple(data)
        self.elements.append(Measure(tuple(qs), side, data, span))


def parse(source: str, base_dir: str | None = None, matrices: dict | None = None) -> CircuitIR:
    """Parse DSL text; file references resolve against ``base_dir``."""
    return _Parser(source, base_dir, matrices).parse()


def parse_file(path: str) -> CircuitIR:
    with open(path, encoding="utf-8") as fh:
        source = fh.read()
    ir = parse(source, os.path.dirname(os.path.abspath(path)))
    return ir.replace(metadata={**ir.metadata, "source": os.path.basename(path)})


# ---------------------------------------------------------------- printing


def _fmt_value(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, int):
        return str(v)
    return repr(float(v))


def _fmt_params(params, ref=None) -> str:
    parts = [ref] if ref is not None else []
    parts += [f"{k}={_fmt_value(v)}" for k, v in params]
    return "(" + ", ".join(parts) + ")" if parts else ""


def format_circuit(ir: CircuitIR) -> str:
    lines = [f"dims d={ir.dims.d} n={ir.dims.n}"]
    for el in ir.elements:
        if isinstance(el, Gate):
            lines.append(f"gate {el.name}{_fmt_params(el.params, el.ref)} " + " ".join(map(str, el.qudits)))
        elif isinstance(el, NoiseBinding):
            lines.append(f"noise {el.model}{_fmt_params(el.params)} on last")
        elif isinstance(el, Measure):
            line = "measure " + " ".join(map(str, el.qudits))
            if el.side is not None:
                line += f" side={el.side}"
            if el.data is not None:
                line += " data=" + ",".join(map(str, el.data))
            lines.append(line)
        elif isinstance(el, Relabel):
            lines.append("# relabel: add x=" + "".join(map(str, el.x)) + " to the outcome")
    return "\n".join(lines) + "\n"
