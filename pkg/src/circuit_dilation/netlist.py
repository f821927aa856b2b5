"""Textual single-loop circuit descriptions: parser, printer and compiler.

Grammar (whitespace-insensitive, ``#`` starts a line comment)::

    circuit   := "circuit" "{" item+ "}"
    item      := element | parallel | drive
    element   := ("L"|"C"|"R"|"M") "{" kv ("," kv)* "}"
    parallel  := "parallel" "{" element element "}"
    drive     := "drive" "{" driveform "}"
    driveform := "zero" | "const(" num ")"
               | "sin(amp=" num ",omega=" num ",phase=" num ")"
    kv        := ident "=" (num | polylit)
    polylit   := "poly(" var ";" num ("," num)* ")"      ascending powers

Element keys (exactly one characteristic per element, ``lo``/``hi``
optionally narrow the domain of the characteristic's variable):

    L: L0=num | L=poly(I; ...)        inductance L(I)
    C: C0=num | V=poly(q; ...)        capacitance, or capacitor voltage Phi_C'(q)
    R: R0=num | R=poly(I; ...)        resistance R(I)
    M: M0=num | M=poly(q; ...)        memristance M(q)
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from .circuit import (PASSIVITY_TOL, PassivityError, PhaseSpaceModel, RepresentationError,
                      capacitor_voltage, kinetic_from_inductance)
from .functions import DEFAULT_DOMAIN, ScalarFunction


@dataclass(frozen=True)
class Span:
    line: int
    col: int

    def __str__(self):
        return f"{self.line}:{self.col}"


class NetlistError(ValueError):
    """Diagnostic carrying a source position."""

    def __init__(self, message: str, span: Span | None = None, expected=()):
        self.message = message
        self.span = span
        self.expected = tuple(sorted(set(expected)))
        text = message if span is None else f"{span}: {message}"
        if self.expected:
            text += f" (expected one of: {', '.join(self.expected)})"
        super().__init__(text)

    @property
    def line(self) -> int | None:
        return None if self.span is None else self.span.line

    @property
    def col(self) -> int | None:
        return None if self.span is None else self.span.col


class NetlistSyntaxError(NetlistError):
    pass


# AST ---------------------------------------------------------------------

@dataclass(frozen=True)
class NumLit:
    value: float
    span: Span


@dataclass(frozen=True)
class PolyLit:
    var: str
    coeffs: tuple[float, ...]
    span: Span


@dataclass(frozen=True)
class ElementNode:
    kind: str
    params: tuple[tuple[str, NumLit | PolyLit], ...]
    span: Span

    def get(self, key):
        for k, v in self.params:
            if k == key:
                return v
        return None


@dataclass(frozen=True)
class ParallelNode:
    elements: tuple[ElementNode, ElementNode]
    span: Span


@dataclass(frozen=True)
class DriveNode:
    form: str  # zero | const | sin
    args: tuple[float, ...]
    span: Span


@dataclass(frozen=True)
class NetlistAst:
    items: tuple[ElementNode | ParallelNode | DriveNode, ...]
    span: Span = field(default=Span(1, 1))

    @property
    def elements(self) -> list[ElementNode]:
        return [i for i in self.items if isinstance(i, ElementNode)]

    @property
    def parallels(self) -> list[ParallelNode]:
        return [i for i in self.items if isinstance(i, ParallelNode)]

    @property
    def drive(self) -> DriveNode | None:
        d = [i for i in self.items if isinstance(i, DriveNode)]
        return d[0] if d else None


# lexer -------------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<num>[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[{}();,=])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str  # num | ident | punct | eof
    text: str
    span: Span


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        span = Span(line, pos - line_start + 1)
        if m is None:
            raise NetlistSyntaxError(f"unexpected character {text[pos]!r}", span)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(Token(kind, m.group(), span))
        chunk = m.group()
        nl = chunk.count("\n")
        if nl:
            line += nl
            line_start = pos + chunk.rfind("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", Span(line, pos - line_start + 1)))
    return tokens


# parser ------------------------------------------------------------------

ELEMENT_KEYS = {
    "L": {"L0": "num", "L": "I", "lo": "num", "hi": "num"},
    "C": {"C0": "num", "V": "q", "lo": "num", "hi": "num"},
    "R": {"R0": "num", "R": "I", "lo": "num", "hi": "num"},
    "M": {"M0": "num", "M": "q", "lo": "num", "hi": "num"},
}
_CHARACTERISTIC = {"L": ("L0", "L"), "C": ("C0", "V"), "R": ("R0", "R"), "M": ("M0", "M")}


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def fail(self, expected, what=None):
        t = self.tok
        found = "end of input" if t.kind == "eof" else repr(t.text)
        raise NetlistSyntaxError(what or f"unexpected {found}", t.span, expected)

    def expect(self, text: str) -> Token:
        if self.tok.text != text or self.tok.kind == "eof":
            self.fail([repr(text)])
        t = self.tok
        self.i += 1
        return t

    def number(self) -> NumLit:
        if self.tok.kind != "num":
            self.fail(["number"])
        t = self.tok
        self.i += 1
        return NumLit(float(t.text), t.span)

    def circuit(self) -> NetlistAst:
        start = self.expect("circuit")
        self.expect("{")
        items = []
        while self.tok.text != "}" or self.tok.kind == "eof":
            if self.tok.kind == "eof":
                self.fail(["'}'", "element", "'parallel'", "'drive'"])
            items.append(self.item())
        self.expect("}")
        if self.tok.kind != "eof":
            self.fail(["end of input"])
        return NetlistAst(tuple(items), start.span)

    def item(self):
        t = self.tok
        if t.kind == "ident" and t.text in ELEMENT_KEYS:
            return self.element()
        if t.text == "parallel":
            return self.parallel()
        if t.text == "drive":
            return self.drive()
        self.fail(["'L'", "'C'", "'R'", "'M'", "'parallel'", "'drive'", "'}'"])

    def element(self) -> ElementNode:
        head = self.tok
        if head.kind != "ident" or head.text not in ELEMENT_KEYS:
            self.fail(["'L'", "'C'", "'R'", "'M'"])
        self.i += 1
        self.expect("{")
        params = [self.kv(head.text)]
        while self.tok.text == ",":
            self.i += 1
            params.append(self.kv(head.text))
        self.expect("}")
        keys = [k for k, _ in params]
        dup = {k for k in keys if keys.count(k) > 1}
        if dup:
            raise NetlistError(f"duplicate key {sorted(dup)[0]!r} in {head.text}", head.span)
        chars = [k for k in keys if k in _CHARACTERISTIC[head.text]]
        if len(chars) != 1:
            raise NetlistError(
                f"element {head.text} needs exactly one of "
                f"{' / '.join(_CHARACTERISTIC[head.text])}", head.span)
        return ElementNode(head.text, tuple(params), head.span)

    def kv(self, kind: str):
        t = self.tok
        if t.kind != "ident":
            self.fail(["key"])
        allowed = ELEMENT_KEYS[kind]
        if t.text not in allowed:
            raise NetlistError(f"unknown key {t.text!r} for element {kind}", t.span,
                               [repr(k) for k in allowed])
        self.i += 1
        self.expect("=")
        want = allowed[t.text]
        if want == "num":
            return t.text, self.number()
        if self.tok.text == "poly":
            lit = self.polylit()
            if lit.var != want:
                raise NetlistError(f"{kind}.{t.text} is a polynomial in {want}, got {lit.var}",
                                   lit.span)
            return t.text, lit
        if self.tok.kind == "num":
            n = self.number()
            return t.text, PolyLit(want, (n.value,), n.span)
        self.fail(["number", "'poly'"])

    def polylit(self) -> PolyLit:
        start = self.expect("poly")
        self.expect("(")
        v = self.tok
        if v.kind != "ident" or v.text not in ("q", "I"):
            self.fail(["'q'", "'I'"])
        self.i += 1
        self.expect(";")
        coeffs = [self.number().value]
        while self.tok.text == ",":
            self.i += 1
            coeffs.append(self.number().value)
        self.expect(")")
        return PolyLit(v.text, tuple(coeffs), start.span)

    def parallel(self) -> ParallelNode:
        start = self.expect("parallel")
        self.expect("{")
        a = self.element()
        if self.tok.text == "}":
            raise NetlistError("parallel dissipator needs one R and one M", start.span)
        b = self.element()
        self.expect("}")
        if sorted((a.kind, b.kind)) != ["M", "R"]:
            raise NetlistError("parallel dissipator needs exactly one R and one M", start.span)
        return ParallelNode((a, b) if a.kind == "R" else (b, a), start.span)

    def drive(self) -> DriveNode:
        start = self.expect("drive")
        self.expect("{")
        t = self.tok
        if t.text == "zero":
            self.i += 1
            node = DriveNode("zero", (), start.span)
        elif t.text == "const":
            self.i += 1
            self.expect("(")
            v = self.number().value
            self.expect(")")
            node = DriveNode("const", (v,), start.span)
        elif t.text == "sin":
            self.i += 1
            self.expect("(")
            args = []
            for j, name in enumerate(("amp", "omega", "phase")):
                if j:
                    self.expect(",")
                self.expect(name)
                self.expect("=")
                args.append(self.number().value)
            self.expect(")")
            node = DriveNode("sin", tuple(args), start.span)
        else:
            self.fail(["'zero'", "'const'", "'sin'"])
        self.expect("}")
        return node


def parse(text: str) -> NetlistAst:
    """Parse and validate circuit arity rules."""
    ast = _Parser(text).circuit()
    counts = {k: 0 for k in "LCRM"}
    for el in ast.elements:
        counts[el.kind] += 1
        if el.kind in "LC" and counts[el.kind] > 1:
            raise NetlistError(f"duplicate {el.kind}: at most one "
                               f"{'inductor' if el.kind == 'L' else 'capacitor'} allowed",
                               el.span)
    drives = [i for i in ast.items if isinstance(i, DriveNode)]
    if len(drives) > 1:
        raise NetlistError("at most one drive allowed", drives[1].span)
    if not ast.elements and not ast.parallels:
        raise NetlistError("empty circuit", ast.span)
    if counts["L"] != 1:
        raise NetlistError("exactly one inductor required", ast.span)
    return ast


# printer -----------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def _print_element(el: ElementNode) -> str:
    parts = []
    for k, v in el.params:
        if isinstance(v, NumLit):
            parts.append(f"{k}={_fmt(v.value)}")
        else:
            parts.append(f"{k}=poly({v.var}; {', '.join(_fmt(c) for c in v.coeffs)})")
    return f"{el.kind}{{{', '.join(parts)}}}"


def to_text(ast: NetlistAst) -> str:
    lines = ["circuit {"]
    for item in ast.items:
        if isinstance(item, ElementNode):
            lines.append("  " + _print_element(item))
        elif isinstance(item, ParallelNode):
            lines.append("  parallel { " + " ".join(_print_element(e) for e in item.elements) + " }")
        else:
            if item.form == "zero":
                body = "zero"
            elif item.form == "const":
                body = f"const({_fmt(item.args[0])})"
            else:
                a, w, ph = item.args
                body = f"sin(amp={_fmt(a)}, omega={_fmt(w)}, phase={_fmt(ph)})"
            lines.append(f"  drive {{ {body} }}")
    lines.append("}")
    return "\n".join(lines) + "\n"


def strip_spans(ast: NetlistAst):
    """Span-free structural view used for round-trip comparison."""
    out = []
    for item in ast.items:
        if isinstance(item, ElementNode):
            out.append(_strip_el(item))
        elif isinstance(item, ParallelNode):
            out.append(("parallel",) + tuple(_strip_el(e) for e in item.elements))
        else:
            out.append(("drive", item.form, item.args))
    return tuple(out)


def _strip_el(el):
    return (el.kind, tuple((k, v.value if isinstance(v, NumLit) else (v.var, v.coeffs))
                           for k, v in el.params))


# compiler ----------------------------------------------------------------

def _characteristic(el: ElementNode) -> ScalarFunction:
    lo = el.get("lo")
    hi = el.get("hi")
    domain = (lo.value if lo else DEFAULT_DOMAIN[0], hi.value if hi else DEFAULT_DOMAIN[1])
    const_key, poly_key = _CHARACTERISTIC[el.kind]
    v = el.get(const_key) or el.get(poly_key)
    coeffs = (v.value,) if isinstance(v, NumLit) else v.coeffs
    return ScalarFunction.poly(coeffs, domain)


def compile_ast(ast: NetlistAst) -> PhaseSpaceModel:
    """Loop decomposition: series voltages add, parallel pairs combine."""
    el_by_kind = {k: [e for e in ast.elements if e.kind == k] for k in "LCRM"}
    try:
        (L_el,) = el_by_kind["L"]
        kin = kinetic_from_inductance(_characteristic(L_el))
    except (PassivityError, RepresentationError) as exc:
        raise NetlistError(str(exc), L_el.span) from exc

    cap = ScalarFunction.zero()
    for el in el_by_kind["C"]:
        try:
            if el.get("C0") is not None:
                c0 = el.get("C0").value
                if c0 <= 0:
                    raise PassivityError("capacitance must be > 0")
                lo = el.get("lo")
                hi = el.get("hi")
                dom = (lo.value if lo else DEFAULT_DOMAIN[0], hi.value if hi else DEFAULT_DOMAIN[1])
                cap = capacitor_voltage(ScalarFunction.const(c0, dom))
            else:
                cap = _characteristic(el)
        except (PassivityError, RepresentationError) as exc:
            raise NetlistError(str(exc), el.span) from exc

    def summed(kind):
        total = ScalarFunction.zero()
        for el in el_by_kind[kind]:
            f = _characteristic(el)
            if f.minimum() < -PASSIVITY_TOL:
                raise NetlistError(f"passivity violation: {kind} characteristic negative "
                                   f"on its domain (min {f.minimum():g})", el.span)
            total = total + f
        return total

    R = summed("R")
    M = summed("M")
    parallel = []
    for node in ast.parallels:
        r_el, m_el = node.elements
        pair = []
        for el in (r_el, m_el):
            f = _characteristic(el)
            if f.minimum() < -PASSIVITY_TOL:
                raise NetlistError(f"passivity violation: {el.kind} characteristic negative "
                                   f"on its domain (min {f.minimum():g})", el.span)
            pair.append(f)
        parallel.append(tuple(pair))

    drive = ScalarFunction.zero((float("-inf"), float("inf")))
    d = ast.drive
    if d is not None and d.form == "const":
        drive = ScalarFunction.const(d.args[0], (float("-inf"), float("inf")))
    elif d is not None and d.form == "sin":
        drive = ScalarFunction.sine(*d.args, domain=(float("-inf"), float("inf")))
    try:
        return PhaseSpaceModel(kinetic=kin, capacitor=cap, resistance=R, memristance=M,
                               parallel=tuple(parallel), drive=drive)
    except PassivityError as exc:
        raise NetlistError(str(exc), ast.span) from exc


def compile_text(text: str) -> PhaseSpaceModel:
    return compile_ast(parse(text))


REFERENCE_NETLIST = """\
# reference series circuit: L0 = C0 = 1, R0 = 0.2, M0 = 0.3, no drive
circuit {
  L{L0=1}
  C{C0=1}
  R{R=poly(I; 0.2)}
  M{M=poly(q; 0.3)}
}
"""
