import json
import os
import re
import zlib

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.polynomial import polynomial as npoly
from scipy.optimize import brentq

from circuit_dilation.circuit import drift_field
from circuit_dilation.netlist import (REFERENCE_NETLIST, NetlistError, compile_text, parse,
                                      strip_spans, to_text)

from conftest import DATA

VALID = os.path.join(DATA, "netlists", "valid")
MALFORMED = os.path.join(DATA, "netlists", "malformed")
with open(os.path.join(VALID, "oracles.json")) as fh:
    ORACLES = json.load(fh)


def _read(path):
    with open(path) as fh:
        return fh.read()


def _current(L, p):
    """Independent inverse of p = int_0^I L by bracketing root search."""
    k = npoly.polyint(np.asarray(L, float))
    if len(L) == 1:
        return p / L[0]
    lo, hi = -1.0, 1.0
    while npoly.polyval(lo, k) > p:
        lo *= 2
    while npoly.polyval(hi, k) < p:
        hi *= 2
    return brentq(lambda i: npoly.polyval(i, k) - p, lo, hi, xtol=1e-15, rtol=1e-15)


def _oracle_drift(spec, t, q, p):
    i = _current(spec["L"], p)
    v = npoly.polyval(q, spec.get("V", [0.0]))
    vd = 0.0
    if "R" in spec:
        vd += npoly.polyval(i, npoly.polyint(spec["R"]))
    if "M" in spec:
        vd += npoly.polyval(q, spec["M"]) * i
    if "parallel" in spec:
        vr = npoly.polyval(i, npoly.polyint(spec["parallel"][0]))
        vm = npoly.polyval(q, spec["parallel"][1]) * i
        vd += 0.0 if vr * vm == 0 else 1.0 / (1.0 / vr + 1.0 / vm)
    e = 0.0
    drive = spec.get("drive")
    if drive and drive[0] == "const":
        e = drive[1]
    elif drive:
        e = drive[1] * np.sin(drive[2] * t + drive[3])
    return i, -v - vd + e


@pytest.mark.parametrize("name", sorted(ORACLES))
def test_valid_netlist_matches_oracle(name):
    model = compile_text(_read(os.path.join(VALID, name)))
    spec = ORACLES[name]
    lo, hi = spec.get("q_range", [-2, 2])
    rng = np.random.default_rng(zlib.crc32(name.encode()))
    for _ in range(40):
        t = rng.uniform(0, 5)
        q = rng.uniform(max(lo, -2), min(hi, 2))
        p = rng.uniform(-2, 2)
        got = np.array(drift_field(model, t, q, p), dtype=float)
        want = np.array(_oracle_drift(spec, t, q, p))
        assert np.allclose(got, want, rtol=1e-12, atol=1e-12), (name, t, q, p, got, want)


@pytest.mark.parametrize("name", sorted(f for f in os.listdir(VALID) if f.endswith(".net")))
def test_valid_round_trip(name):
    ast = parse(_read(os.path.join(VALID, name)))
    again = parse(to_text(ast))
    assert strip_spans(again) == strip_spans(ast)


@pytest.mark.parametrize("name", sorted(os.listdir(MALFORMED)))
def test_malformed_reports_position(name):
    text = _read(os.path.join(MALFORMED, name))
    header = re.match(r"# expect (\d+):(\d+) (.*)", text.splitlines()[0])
    line, col, message = int(header[1]), int(header[2]), header[3]
    with pytest.raises(NetlistError) as info:
        compile_text(text)
    err = info.value
    assert (err.line, err.col) == (line, col)
    assert message in str(err)
    assert str(err).startswith(f"{line}:{col}:")


def test_reference_netlist_is_reference_circuit():
    model = compile_text(REFERENCE_NETLIST)
    assert np.allclose(drift_field(model, 0, 1.0, 1.0), (1.0, -1.5))


_num = st.floats(0.05, 5, allow_nan=False).map(lambda x: round(x, 6))


@st.composite
def netlists(draw):
    parts = [f"L{{L0={draw(_num)}}}"]
    if draw(st.booleans()):
        parts.append(f"C{{C0={draw(_num)}}}")
    if draw(st.booleans()):
        cs = draw(st.lists(_num, min_size=1, max_size=3))
        parts.append("R{R=poly(I; " + ", ".join(map(str, cs)) + ")}")
    if draw(st.booleans()):
        parts.append(f"M{{M0={draw(_num)}}}")
    if draw(st.booleans()):
        parts.append(f"parallel {{ R{{R0={draw(_num)}}} M{{M0={draw(_num)}}} }}")
    parts = draw(st.permutations(parts))
    drive = draw(st.sampled_from(["", "drive { zero }", f"drive {{ const({draw(_num)}) }}",
                                  f"drive {{ sin(amp={draw(_num)}, omega={draw(_num)}, phase=0) }}"]))
    sep = draw(st.sampled_from([" ", "\n  ", "\n\n\t"]))
    return "circuit {" + sep + sep.join(parts + ([drive] if drive else [])) + "\n}"


@given(netlists())
def test_parse_print_parse_round_trip(text):
    ast = parse(text)
    printed = to_text(ast)
    assert strip_spans(parse(printed)) == strip_spans(ast)
    assert to_text(parse(printed)) == printed
