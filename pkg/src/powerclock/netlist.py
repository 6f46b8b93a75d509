"""Circuit description, SPICE-subset netlist parsing and serialization.

The element zoo is deliberately small: linear R, L, C, independent voltage
sources (DC, damped sine, piecewise linear) and a four-terminal switch whose
resistance is selected by the voltage across a control pair.  That is enough
to express resonant clock tanks and switch-level pass-transistor logic.

Grammar (one card per line, case-insensitive, '*' starts a comment):

    R<id> n+ n- <ohms>
    C<id> n+ n- <farads> [ic=<volts>]
    L<id> n+ n- <henries> [ic=<amperes>]
    V<id> n+ n- DC <volts>
    V<id> n+ n- SIN(<offset> <ampl> <hz> [<delay> [<damping> [<phase_deg>]]])
    V<id> n+ n- PWL(t1 v1 t2 v2 ...)
    W<id> n+ n- nc+ nc- ron=<ohms> roff=<ohms> vth=<volts> type=<n|p>
    .ic v(<node>)=<volts> | i(<Lname>)=<amperes>
    .tran <dt> <tstop>

Numeric literals accept the unit suffixes f, p, n, u, m, k, meg, g
(1e-15 .. 1e9).  Node and element names are normalized to lower case, and
node "0" is ground.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Union

__all__ = [
    "NetlistError",
    "Diagnostic",
    "Dc",
    "Sine",
    "Pwl",
    "Resistor",
    "Capacitor",
    "Inductor",
    "VSource",
    "Switch",
    "Circuit",
    "circuit",
    "merge",
    "parse_value",
    "parse_netlist",
    "serialize_netlist",
    "validate",
]

GROUND = "0"


class NetlistError(Exception):
    """Raised for any malformed netlist input.  Carries a line number when
    the problem can be tied to one."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


# ---------------------------------------------------------------------------
# value literals
# ---------------------------------------------------------------------------

_SUFFIX = {
    "f": 1e-15,
    "p": 1e-12,
    "n": 1e-9,
    "u": 1e-6,
    "m": 1e-3,
    "k": 1e3,
    "meg": 1e6,
    "g": 1e9,
}

_NUM_RE = re.compile(r"^([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)([a-zA-Z]*)$")


def parse_value(token: str) -> float:
    """Parse a numeric literal with an optional engineering suffix.

    Parameters
    ----------
    token : str
        Text such as ``"100"``, ``"4.7u"``, ``"1.6g"`` or ``"15k"``.

    Returns
    -------
    float
        The value in base SI units.

    Raises
    ------
    NetlistError
        If the token is not a number or uses an unknown suffix.
    """
    m = _NUM_RE.match(token.strip())
    if not m:
        raise NetlistError(f"bad numeric literal {token!r}")
    mantissa, suffix = m.groups()
    scale = 1.0
    if suffix:
        try:
            scale = _SUFFIX[suffix.lower()]
        except KeyError:
            raise NetlistError(f"unknown unit suffix {suffix!r} in {token!r}") from None
    return float(mantissa) * scale


def format_value(x: float) -> str:
    """Render a float so that ``parse_value(format_value(x)) == x``."""
    return repr(float(x))


# ---------------------------------------------------------------------------
# source waveforms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Dc:
    volts: float

    def value_at(self, t: float) -> float:
        return self.volts

    def card(self) -> str:
        return f"dc {format_value(self.volts)}"


@dataclass(frozen=True)
class Sine:
    offset: float
    amplitude: float
    frequency: float
    delay: float = 0.0
    damping: float = 0.0
    phase_deg: float = 0.0

    def value_at(self, t: float) -> float:
        import math

        if t < self.delay:
            return self.offset + self.amplitude * math.sin(math.radians(self.phase_deg))
        te = t - self.delay
        return self.offset + self.amplitude * math.sin(
            2.0 * math.pi * self.frequency * te + math.radians(self.phase_deg)
        ) * math.exp(-self.damping * te)

    def card(self) -> str:
        args = [self.offset, self.amplitude, self.frequency, self.delay, self.damping, self.phase_deg]
        return "sin(" + " ".join(format_value(a) for a in args) + ")"


@dataclass(frozen=True)
class Pwl:
    points: tuple  # ((t0, v0), (t1, v1), ...)

    def value_at(self, t: float) -> float:
        pts = self.points
        if t <= pts[0][0]:
            return pts[0][1]
        for (t0, v0), (t1, v1) in zip(pts, pts[1:]):
            if t <= t1:
                return v0 + (v1 - v0) * (t - t0) / (t1 - t0)
        return pts[-1][1]

    def card(self) -> str:
        flat = " ".join(f"{format_value(t)} {format_value(v)}" for t, v in self.points)
        return f"pwl({flat})"


Waveform = Union[Dc, Sine, Pwl]


# ---------------------------------------------------------------------------
# elements
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Resistor:
    name: str
    a: str
    b: str
    ohms: float


@dataclass(frozen=True)
class Capacitor:
    name: str
    a: str
    b: str
    farads: float
    ic: float = 0.0  # initial voltage across a-b


@dataclass(frozen=True)
class Inductor:
    name: str
    a: str
    b: str
    henries: float
    ic: float = 0.0  # initial current flowing a -> b


@dataclass(frozen=True)
class VSource:
    name: str
    a: str
    b: str
    wave: Waveform


@dataclass(frozen=True)
class Switch:
    """Voltage-controlled resistance.

    Conduction happens between ``a`` and ``b``.  The state is chosen by the
    voltage v(cp) - v(cn): an ``n`` switch closes (r_on) when that voltage
    is at or above ``vth``, a ``p`` switch closes when it is at or below
    ``vth``.  The control pair draws no current.
    """

    name: str
    a: str
    b: str
    cp: str
    cn: str
    r_on: float
    r_off: float
    vth: float
    kind: str = "n"  # "n" or "p"

    def closed(self, v_control: float) -> bool:
        if self.kind == "n":
            return v_control >= self.vth
        return v_control <= self.vth


Element = Union[Resistor, Capacitor, Inductor, VSource, Switch]

_KIND_LETTER = {Resistor: "r", Capacitor: "c", Inductor: "l", VSource: "v", Switch: "w"}


# ---------------------------------------------------------------------------
# circuit container
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Circuit:
    """An ordered element list plus node bookkeeping.

    ``nodes`` lists ground first and then every other node in first-seen
    order.  ``node_ic`` holds ``.ic v(node)=x`` entries and wins over
    element-level ``ic=`` values at simulation start.  ``tran`` keeps the
    ``.tran`` hint (dt, tstop) when the netlist carried one.
    """

    elements: tuple
    nodes: tuple
    node_ic: tuple = ()  # ((node, volts), ...)
    tran: Optional[tuple] = None  # (dt, tstop)

    def element(self, name: str) -> Element:
        name = name.lower()
        for e in self.elements:
            if e.name == name:
                return e
        raise KeyError(name)

    def names(self) -> tuple:
        return tuple(e.name for e in self.elements)

    def with_tran(self, dt: float, tstop: float) -> "Circuit":
        return replace(self, tran=(float(dt), float(tstop)))


def _terminals(e: Element) -> tuple:
    if isinstance(e, Switch):
        return (e.a, e.b, e.cp, e.cn)
    return (e.a, e.b)


def _conduction_terminals(e: Element) -> tuple:
    return (e.a, e.b)


def circuit(elements: Iterable[Element], node_ic: Iterable = (), tran=None) -> Circuit:
    """Assemble a Circuit, normalizing names and collecting nodes.

    Raises ``NetlistError`` on duplicate element names or a name whose first
    letter does not match the element kind.
    """
    elems = []
    seen = set()
    nodes = [GROUND]
    node_set = {GROUND}
    for e in elements:
        letter = _KIND_LETTER[type(e)]
        name = e.name.lower()
        if not name.startswith(letter):
            raise NetlistError(f"element name {e.name!r} must start with {letter!r}")
        if name in seen:
            raise NetlistError(f"duplicate element name {e.name!r}")
        seen.add(name)
        fields = {"name": name}
        for attr in ("a", "b", "cp", "cn"):
            if hasattr(e, attr):
                fields[attr] = getattr(e, attr).lower()
        e = replace(e, **fields)
        elems.append(e)
        for n in _terminals(e):
            if n not in node_set:
                node_set.add(n)
                nodes.append(n)
    ics = []
    ic_nodes = set()
    for n, v in node_ic:
        n = n.lower()
        if n in ic_nodes:
            raise NetlistError(f"duplicate .ic entry for node {n!r}")
        ic_nodes.add(n)
        ics.append((n, float(v)))
    return Circuit(tuple(elems), tuple(nodes), tuple(ics), tran)


def merge(*parts: Circuit) -> Circuit:
    """Union several circuit fragments; shared node names connect them."""
    elems = []
    ics = []
    tran = None
    for p in parts:
        elems.extend(p.elements)
        ics.extend(p.node_ic)
        if p.tran is not None:
            tran = p.tran
    return circuit(elems, ics, tran)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

_SIN_RE = re.compile(r"^sin\s*\(\s*(.*?)\s*\)$", re.IGNORECASE | re.DOTALL)
_PWL_RE = re.compile(r"^pwl\s*\(\s*(.*?)\s*\)$", re.IGNORECASE | re.DOTALL)
_DC_RE = re.compile(r"^dc\s+(\S+)$", re.IGNORECASE)
_IC_V_RE = re.compile(r"^v\(([^()=\s]+)\)=(\S+)$", re.IGNORECASE)
_IC_I_RE = re.compile(r"^i\(([^()=\s]+)\)=(\S+)$", re.IGNORECASE)


def _parse_source_wave(text: str, line_no: int) -> Waveform:
    text = text.strip()
    m = _DC_RE.match(text)
    if m:
        return Dc(parse_value(m.group(1)))
    m = _SIN_RE.match(text)
    if m:
        args = [parse_value(t) for t in m.group(1).split()]
        if not 3 <= len(args) <= 6:
            raise NetlistError("sin() takes 3 to 6 arguments", line_no)
        return Sine(*args)
    m = _PWL_RE.match(text)
    if m:
        vals = [parse_value(t) for t in m.group(1).split()]
        if len(vals) < 2 or len(vals) % 2:
            raise NetlistError("pwl() needs an even number of values", line_no)
        pts = tuple(zip(vals[0::2], vals[1::2]))
        return Pwl(pts)
    raise NetlistError(f"unrecognized source waveform {text!r}", line_no)


def _parse_kv(tokens, required, line_no: int) -> dict:
    out = {}
    for tok in tokens:
        if "=" not in tok:
            raise NetlistError(f"expected key=value, got {tok!r}", line_no)
        key, _, val = tok.partition("=")
        key = key.lower()
        if key not in required:
            raise NetlistError(f"unknown switch parameter {key!r}", line_no)
        if key in out:
            raise NetlistError(f"repeated switch parameter {key!r}", line_no)
        out[key] = val
    missing = [k for k in required if k not in out]
    if missing:
        raise NetlistError(f"switch card missing {', '.join(missing)}", line_no)
    return out


def _parse_card(line: str, line_no: int, elements: list, node_ics: list, tran_box: list):
    tokens = line.split()
    head = tokens[0].lower()

    if head == ".ic":
        for tok in tokens[1:]:
            m = _IC_V_RE.match(tok)
            if m:
                node_ics.append((m.group(1).lower(), parse_value(m.group(2))))
                continue
            m = _IC_I_RE.match(tok)
            if m:
                target = m.group(1).lower()
                amps = parse_value(m.group(2))
                for i, e in enumerate(elements):
                    if isinstance(e, Inductor) and e.name == target:
                        elements[i] = replace(e, ic=amps)
                        break
                else:
                    raise NetlistError(f".ic names unknown inductor {target!r}", line_no)
                continue
            raise NetlistError(f"bad .ic assignment {tok!r}", line_no)
        if len(tokens) == 1:
            raise NetlistError(".ic card carries no assignments", line_no)
        return

    if head == ".tran":
        if len(tokens) != 3:
            raise NetlistError(".tran takes <dt> <tstop>", line_no)
        tran_box.append((parse_value(tokens[1]), parse_value(tokens[2])))
        return

    if head.startswith("."):
        raise NetlistError(f"unknown directive {tokens[0]!r}", line_no)

    kind = head[0]
    name = head
    if kind == "r":
        if len(tokens) != 4:
            raise NetlistError("resistor card takes n+ n- <ohms>", line_no)
        elements.append(Resistor(name, tokens[1], tokens[2], parse_value(tokens[3])))
    elif kind == "c":
        if len(tokens) not in (4, 5):
            raise NetlistError("capacitor card takes n+ n- <farads> [ic=...]", line_no)
        ic = 0.0
        if len(tokens) == 5:
            key, _, val = tokens[4].partition("=")
            if key.lower() != "ic":
                raise NetlistError(f"unknown capacitor parameter {tokens[4]!r}", line_no)
            ic = parse_value(val)
        elements.append(Capacitor(name, tokens[1], tokens[2], parse_value(tokens[3]), ic))
    elif kind == "l":
        if len(tokens) not in (4, 5):
            raise NetlistError("inductor card takes n+ n- <henries> [ic=...]", line_no)
        ic = 0.0
        if len(tokens) == 5:
            key, _, val = tokens[4].partition("=")
            if key.lower() != "ic":
                raise NetlistError(f"unknown inductor parameter {tokens[4]!r}", line_no)
            ic = parse_value(val)
        elements.append(Inductor(name, tokens[1], tokens[2], parse_value(tokens[3]), ic))
    elif kind == "v":
        if len(tokens) < 4:
            raise NetlistError("source card takes n+ n- <waveform>", line_no)
        wave = _parse_source_wave(" ".join(tokens[3:]), line_no)
        elements.append(VSource(name, tokens[1], tokens[2], wave))
    elif kind == "w":
        if len(tokens) != 10:
            raise NetlistError(
                "switch card takes n+ n- nc+ nc- ron= roff= vth= type=", line_no
            )
        kv = _parse_kv(tokens[6:], ("ron", "roff", "vth", "type"), line_no)
        stype = kv["type"].lower()
        if stype not in ("n", "p"):
            raise NetlistError(f"switch type must be n or p, got {kv['type']!r}", line_no)
        elements.append(
            Switch(
                name,
                tokens[1],
                tokens[2],
                tokens[3],
                tokens[4],
                parse_value(kv["ron"]),
                parse_value(kv["roff"]),
                parse_value(kv["vth"]),
                stype,
            )
        )
    else:
        raise NetlistError(f"unknown card {tokens[0]!r}", line_no)


def parse_netlist(text: str) -> Circuit:
    """Parse netlist text into a :class:`Circuit`.

    Parameters
    ----------
    text : str
        Netlist source.  Arbitrary input is safe: every failure mode is
        reported as :class:`NetlistError` with a line number.

    Returns
    -------
    Circuit
    """
    elements: list = []
    node_ics: list = []
    tran_box: list = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("*"):
            continue
        try:
            _parse_card(line, line_no, elements, node_ics, tran_box)
        except NetlistError:
            raise
        except Exception as exc:  # the contract is diagnostics, not crashes
            raise NetlistError(f"malformed card ({exc})", line_no) from exc
    if len(tran_box) > 1:
        raise NetlistError("multiple .tran directives")
    try:
        return circuit(elements, node_ics, tran_box[0] if tran_box else None)
    except NetlistError:
        raise
    except Exception as exc:
        raise NetlistError(f"malformed netlist ({exc})") from exc


# ---------------------------------------------------------------------------
# serializer
# ---------------------------------------------------------------------------


def serialize_netlist(c: Circuit) -> str:
    """Render a Circuit back to netlist text.

    The output is deterministic and reparses to an equal Circuit:
    ``parse_netlist(serialize_netlist(c)) == c``.
    """
    lines = []
    for e in c.elements:
        if isinstance(e, Resistor):
            lines.append(f"{e.name} {e.a} {e.b} {format_value(e.ohms)}")
        elif isinstance(e, Capacitor):
            ic = f" ic={format_value(e.ic)}" if e.ic != 0.0 else ""
            lines.append(f"{e.name} {e.a} {e.b} {format_value(e.farads)}{ic}")
        elif isinstance(e, Inductor):
            ic = f" ic={format_value(e.ic)}" if e.ic != 0.0 else ""
            lines.append(f"{e.name} {e.a} {e.b} {format_value(e.henries)}{ic}")
        elif isinstance(e, VSource):
            lines.append(f"{e.name} {e.a} {e.b} {e.wave.card()}")
        elif isinstance(e, Switch):
            lines.append(
                f"{e.name} {e.a} {e.b} {e.cp} {e.cn} "
                f"ron={format_value(e.r_on)} roff={format_value(e.r_off)} "
                f"vth={format_value(e.vth)} type={e.kind}"
            )
        else:
            raise NetlistError(f"cannot serialize {type(e).__name__}")
    for node, volts in c.node_ic:
        lines.append(f".ic v({node})={format_value(volts)}")
    if c.tran is not None:
        lines.append(f".tran {format_value(c.tran[0])} {format_value(c.tran[1])}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" or "warning"
    message: str
    subject: str = ""


def _finite(x: float) -> bool:
    return x == x and abs(x) != float("inf")


def validate(c: Circuit) -> list:
    """Check a Circuit for structural and value problems.

    Returns a list of :class:`Diagnostic`.  Severity "error" marks a circuit
    the simulator will refuse; "warning" is advisory (dangling nodes and the
    like).
    """
    diags = []

    def err(msg, subject=""):
        diags.append(Diagnostic("error", msg, subject))

    def warn(msg, subject=""):
        diags.append(Diagnostic("warning", msg, subject))

    for e in c.elements:
        if isinstance(e, Resistor):
            if not _finite(e.ohms) or e.ohms <= 0:
                err(f"resistor value must be positive and finite, got {e.ohms}", e.name)
        elif isinstance(e, Capacitor):
            if not _finite(e.farads) or e.farads <= 0:
                err(f"capacitance must be positive and finite, got {e.farads}", e.name)
            if not _finite(e.ic):
                err("capacitor ic must be finite", e.name)
        elif isinstance(e, Inductor):
            if not _finite(e.henries) or e.henries <= 0:
                err(f"inductance must be positive and finite, got {e.henries}", e.name)
            if not _finite(e.ic):
                err("inductor ic must be finite", e.name)
        elif isinstance(e, VSource):
            w = e.wave
            if isinstance(w, Sine):
                if not _finite(w.frequency) or w.frequency <= 0:
                    err(f"sine frequency must be positive, got {w.frequency}", e.name)
            elif isinstance(w, Pwl):
                ts = [t for t, _ in w.points]
                if any(t1 <= t0 for t0, t1 in zip(ts, ts[1:])):
                    err("pwl times must be strictly increasing", e.name)
                if not all(_finite(t) and _finite(v) for t, v in w.points):
                    err("pwl points must be finite", e.name)
            elif isinstance(w, Dc):
                if not _finite(w.volts):
                    err("dc level must be finite", e.name)
        elif isinstance(e, Switch):
            if not _finite(e.r_on) or e.r_on <= 0:
                err(f"switch r_on must be positive and finite, got {e.r_on}", e.name)
            if not _finite(e.r_off) or e.r_off <= e.r_on:
                err("switch needs r_on < r_off (finite)", e.name)
            if not _finite(e.vth):
                err("switch vth must be finite", e.name)
            if e.a == e.b:
                err("switch conducts to itself", e.name)

    # every non-ground node must couple to ground through conduction paths
    parent = {n: n for n in c.nodes}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(x, y):
        rx, ry = find(x), find(y)
        if rx != ry:
            parent[rx] = ry

    touch_count = {n: 0 for n in c.nodes}
    for e in c.elements:
        a, b = _conduction_terminals(e)
        union(a, b)
        for n in _terminals(e):
            touch_count[n] += 1
    ground_root = find(GROUND)
    for n in c.nodes:
        if n == GROUND:
            continue
        if find(n) != ground_root:
            err("node has no conductive path to ground", n)
        elif touch_count[n] == 1:
            warn("floating node (touched by a single terminal)", n)

    for node, volts in c.node_ic:
        if node not in c.nodes:
            err(f".ic names unknown node {node!r}", node)
        if not _finite(volts):
            err(".ic value must be finite", node)

    return diags
