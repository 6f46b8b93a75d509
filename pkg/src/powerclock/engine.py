"""Fixed-step transient simulation by modified nodal analysis.

Unknowns are the non-ground node voltages plus one branch current per
inductor and per voltage source.  Capacitors and inductors are replaced by
their trapezoidal (default) or backward-Euler companion models; switches are
piecewise-constant resistors resolved by a per-step fixed-point iteration on
their control voltages.

The t=0 state is solved exactly: capacitors act as voltage sources at their
initial voltage, inductors as current sources at their initial current, and
``.ic`` node entries pin node voltages directly (they win over element-level
``ic=`` values).  That gives consistent node voltages and capacitor currents
at the first sample, so the trapezoidal rule starts clean.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
import scipy.linalg

from .netlist import (
    GROUND,
    Capacitor,
    Circuit,
    Inductor,
    NetlistError,
    Resistor,
    Switch,
    VSource,
    validate,
)

__all__ = [
    "SimConfig",
    "Trace",
    "EnergyReport",
    "SimulationError",
    "SingularSystemError",
    "ConvergenceError",
    "simulate",
    "energy_audit",
    "trace_csv",
]

TRAPEZOID = "trapezoid"
BACKWARD_EULER = "backward_euler"


class SimulationError(Exception):
    """Numerical failure during transient analysis."""


class SingularSystemError(SimulationError):
    def __init__(self, subject: str, when: str = ""):
        self.subject = subject
        msg = f"singular system matrix (implicated unknown: {subject})"
        if when:
            msg += f" {when}"
        super().__init__(msg)


class ConvergenceError(SimulationError):
    def __init__(self, t: float, limit: int):
        self.t = t
        super().__init__(
            f"switch states failed to reach a fixed point within {limit} "
            f"iterations at t={t:.6e} s"
        )


@dataclass(frozen=True)
class SimConfig:
    dt: float
    tstop: float
    method: str = TRAPEZOID
    record_stride: int = 1
    switch_iteration_limit: int = 10

    def __post_init__(self):
        if self.dt <= 0 or self.tstop <= 0:
            raise ValueError("dt and tstop must be positive")
        if self.method not in (TRAPEZOID, BACKWARD_EULER):
            raise ValueError(f"unknown method {self.method!r}")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")


@dataclass
class Trace:
    """Recorded waveforms.  Node voltages are keyed by node name, element
    currents by element name (positive a -> b)."""

    times: np.ndarray
    voltages: Dict[str, np.ndarray]
    currents: Dict[str, np.ndarray]
    nodes: tuple
    element_names: tuple

    def voltage(self, node: str) -> np.ndarray:
        node = node.lower()
        if node == GROUND:
            return np.zeros_like(self.times)
        try:
            return self.voltages[node]
        except KeyError:
            raise KeyError(
                f"unknown node {node!r}; have {', '.join(self.nodes)}"
            ) from None

    def current(self, element: str) -> np.ndarray:
        element = element.lower()
        try:
            return self.currents[element]
        except KeyError:
            raise KeyError(f"unknown element {element!r}") from None

    def window(self, t0: float, t1: float) -> "Trace":
        m = (self.times >= t0) & (self.times <= t1)
        return Trace(
            self.times[m],
            {k: v[m] for k, v in self.voltages.items()},
            {k: v[m] for k, v in self.currents.items()},
            self.nodes,
            self.element_names,
        )


# ---------------------------------------------------------------------------
# assembly helpers
# ---------------------------------------------------------------------------


class _System:
    """Index maps and stamp bookkeeping for one circuit and config."""

    def __init__(self, c: Circuit, cfg: SimConfig):
        self.circuit = c
        self.cfg = cfg
        self.nodes = tuple(n for n in c.nodes if n != GROUND)
        self.nidx = {GROUND: -1}
        for i, n in enumerate(self.nodes):
            self.nidx[n] = i
        self.n_nodes = len(self.nodes)

        self.resistors = [e for e in c.elements if isinstance(e, Resistor)]
        self.caps = [e for e in c.elements if isinstance(e, Capacitor)]
        self.inductors = [e for e in c.elements if isinstance(e, Inductor)]
        self.sources = [e for e in c.elements if isinstance(e, VSource)]
        self.switches = [e for e in c.elements if isinstance(e, Switch)]

        nb = self.n_nodes
        self.l_rows = {e.name: nb + i for i, e in enumerate(self.inductors)}
        nb += len(self.inductors)
        self.v_rows = {e.name: nb + i for i, e in enumerate(self.sources)}
        nb += len(self.sources)
        self.size = nb

        if cfg.method == TRAPEZOID:
            self.cap_g = np.array([2.0 * e.farads / cfg.dt for e in self.caps])
            self.l_r = np.array([2.0 * e.henries / cfg.dt for e in self.inductors])
        else:
            self.cap_g = np.array([e.farads / cfg.dt for e in self.caps])
            self.l_r = np.array([e.henries / cfg.dt for e in self.inductors])

        # padded index arrays: slot n_nodes is a scratch ground slot
        def rows(pairs):
            return (
                np.array([self.nidx[a] for a, _ in pairs], dtype=int),
                np.array([self.nidx[b] for _, b in pairs], dtype=int),
            )

        self.cap_a, self.cap_b = rows([(e.a, e.b) for e in self.caps])
        self.ind_a, self.ind_b = rows([(e.a, e.b) for e in self.inductors])
        self.src_a, self.src_b = rows([(e.a, e.b) for e in self.sources])
        self.sw_a, self.sw_b = rows([(e.a, e.b) for e in self.switches])
        self.sw_cp, self.sw_cn = rows([(e.cp, e.cn) for e in self.switches])
        self.sw_gon = np.array([1.0 / e.r_on for e in self.switches])
        self.sw_goff = np.array([1.0 / e.r_off for e in self.switches])
        self.sw_is_n = np.array([e.kind == "n" for e in self.switches])
        self.sw_vth = np.array([e.vth for e in self.switches])

    def label(self, index: int) -> str:
        if index < self.n_nodes:
            return f"v({self.nodes[index]})"
        for name, row in self.l_rows.items():
            if row == index:
                return f"i({name})"
        for name, row in self.v_rows.items():
            if row == index:
                return f"i({name})"
        return f"unknown#{index}"

    # -- matrix assembly ---------------------------------------------------

    def _stamp_g(self, A, ia, ib, g):
        if ia >= 0:
            A[ia, ia] += g
        if ib >= 0:
            A[ib, ib] += g
        if ia >= 0 and ib >= 0:
            A[ia, ib] -= g
            A[ib, ia] -= g

    def base_matrix(self) -> np.ndarray:
        A = np.zeros((self.size, self.size))
        for e in self.resistors:
            self._stamp_g(A, self.nidx[e.a], self.nidx[e.b], 1.0 / e.ohms)
        for g, ia, ib in zip(self.cap_g, self.cap_a, self.cap_b):
            self._stamp_g(A, ia, ib, g)
        for e, rl in zip(self.inductors, self.l_r):
            row = self.l_rows[e.name]
            ia, ib = self.nidx[e.a], self.nidx[e.b]
            if ia >= 0:
                A[ia, row] += 1.0
                A[row, ia] += 1.0
            if ib >= 0:
                A[ib, row] -= 1.0
                A[row, ib] -= 1.0
            A[row, row] -= rl
        for e in self.sources:
            row = self.v_rows[e.name]
            ia, ib = self.nidx[e.a], self.nidx[e.b]
            if ia >= 0:
                A[ia, row] += 1.0
                A[row, ia] += 1.0
            if ib >= 0:
                A[ib, row] -= 1.0
                A[row, ib] -= 1.0
        return A

    def stamp_switch(self, A, i, g):
        self._stamp_g(A, self.sw_a[i], self.sw_b[i], g)

    def switch_states(self, vfull: np.ndarray) -> np.ndarray:
        vc = vfull[self.sw_cp] - vfull[self.sw_cn]
        return np.where(self.sw_is_n, vc >= self.sw_vth, vc <= self.sw_vth)

    def factor(self, A, when=""):
        lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
        diag = np.abs(np.diag(lu))
        if diag.size and (np.min(diag) == 0.0 or not np.all(np.isfinite(diag))):
            bad = int(np.argmin(np.where(np.isfinite(diag), diag, 0.0)))
            raise SingularSystemError(self.label(bad), when)
        return lu, piv


def _vfull(x: np.ndarray, n_nodes: int) -> np.ndarray:
    """Node voltages with a trailing 0 slot standing in for ground."""
    v = np.empty(n_nodes + 1)
    v[:n_nodes] = x[:n_nodes]
    v[n_nodes] = 0.0
    return v


def _initial_state(sys: _System, limit: int):
    """Solve the exact t=0 network: caps pinned to their initial voltage,
    inductors injected as known currents, .ic node entries pinned directly.

    Returns (vfull, cap_currents, switch_states).
    """
    c = sys.circuit
    pinned = {node for node, _ in c.node_ic}
    pinned.add(GROUND)

    kept_caps = [
        (i, e)
        for i, e in enumerate(sys.caps)
        if not (e.a in pinned and e.b in pinned)
    ]
    n = sys.n_nodes
    rows = {}
    k = n
    for i, _ in kept_caps:
        rows[("cap", i)] = k
        k += 1
    for e in sys.sources:
        rows[("src", e.name)] = k
        k += 1
    for node, _ in c.node_ic:
        rows[("pin", node)] = k
        k += 1
    size = k

    A = np.zeros((size, size))
    rhs = np.zeros(size)
    for e in sys.resistors:
        sys._stamp_g(A, sys.nidx[e.a], sys.nidx[e.b], 1.0 / e.ohms)

    def branch(row, ia, ib, value):
        if ia >= 0:
            A[ia, row] += 1.0
            A[row, ia] += 1.0
        if ib >= 0:
            A[ib, row] -= 1.0
            A[row, ib] -= 1.0
        rhs[row] = value

    for i, e in kept_caps:
        branch(rows[("cap", i)], sys.nidx[e.a], sys.nidx[e.b], e.ic)
    for e in sys.sources:
        branch(rows[("src", e.name)], sys.nidx[e.a], sys.nidx[e.b], e.wave.value_at(0.0))
    for node, volts in c.node_ic:
        branch(rows[("pin", node)], sys.nidx[node], -1, volts)
    for e in sys.inductors:
        ia, ib = sys.nidx[e.a], sys.nidx[e.b]
        if ia >= 0:
            rhs[ia] -= e.ic
        if ib >= 0:
            rhs[ib] += e.ic

    base = A.copy()
    states = sys.switch_states(np.zeros(n + 1))
    seen = {states.tobytes()}
    for _ in range(limit + 1):
        A = base.copy()
        for i, st in enumerate(states):
            g = sys.sw_gon[i] if st else sys.sw_goff[i]
            sys._stamp_g(A, sys.sw_a[i], sys.sw_b[i], g)
        lu = None
        lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
        diag = np.abs(np.diag(lu))
        if diag.size and (np.min(diag) == 0.0 or not np.all(np.isfinite(diag))):
            bad = int(np.argmin(np.where(np.isfinite(diag), diag, 0.0)))
            label = sys.label(bad) if bad < n else "initial-condition branch"
            raise SingularSystemError(label, "while solving the t=0 state")
        x = scipy.linalg.lu_solve((lu, piv), rhs, check_finite=False)
        vf = _vfull(x, n)
        new_states = sys.switch_states(vf)
        if np.array_equal(new_states, states):
            break
        if new_states.tobytes() in seen:
            # the iteration revisited a state: no fixed point exists, the
            # map cycles through threshold chatter; keep the current state
            break
        seen.add(new_states.tobytes())
        states = new_states
    else:
        raise ConvergenceError(0.0, limit)

    cap_i = np.zeros(len(sys.caps))
    for i, _ in kept_caps:
        cap_i[i] = x[rows[("cap", i)]]
    return vf, cap_i, states


# ---------------------------------------------------------------------------
# main loop
# ---------------------------------------------------------------------------


def simulate(c: Circuit, cfg: SimConfig) -> Trace:
    """Run a transient analysis and return the recorded Trace.

    Raises
    ------
    NetlistError
        If validation reports any error-severity diagnostics.
    SimulationError
        On singular systems or switch fixed-point failure.
    """
    errors = [d for d in validate(c) if d.severity == "error"]
    if errors:
        listing = "; ".join(
            f"{d.message}" + (f" [{d.subject}]" if d.subject else "") for d in errors
        )
        raise NetlistError(f"circuit failed validation: {listing}")

    sys_ = _System(c, cfg)
    n = sys_.n_nodes
    n_steps = int(round(cfg.tstop / cfg.dt))
    times = np.arange(n_steps + 1) * cfg.dt

    trapezoid = cfg.method == TRAPEZOID

    # source waveforms evaluated up front for the whole run
    src_vals = np.empty((len(sys_.sources), n_steps + 1))
    for i, e in enumerate(sys_.sources):
        w = e.wave
        if hasattr(w, "points"):  # Pwl
            pts = np.asarray(w.points)
            src_vals[i] = np.interp(times, pts[:, 0], pts[:, 1])
        elif hasattr(w, "frequency"):  # Sine
            te = times - w.delay
            ph = np.radians(w.phase_deg)
            live = w.offset + w.amplitude * np.sin(
                2.0 * np.pi * w.frequency * te + ph
            ) * np.exp(-w.damping * np.clip(te, 0.0, None))
            idle = w.offset + w.amplitude * np.sin(ph)
            src_vals[i] = np.where(te < 0.0, idle, live)
        else:  # Dc
            src_vals[i] = w.volts

    vfull, cap_i, states = _initial_state(sys_, cfg.switch_iteration_limit)

    A = sys_.base_matrix()
    for i, st in enumerate(states):
        sys_.stamp_switch(A, i, sys_.sw_gon[i] if st else sys_.sw_goff[i])
    lu_piv = sys_.factor(A, "at the first step")

    cap_v = vfull[sys_.cap_a] - vfull[sys_.cap_b]
    ind_v = vfull[sys_.ind_a] - vfull[sys_.ind_b]
    ind_i = np.array([e.ic for e in sys_.inductors])

    # recording buffers
    rec_idx = np.arange(0, n_steps + 1, cfg.record_stride)
    n_rec = len(rec_idx)
    rec_v = np.empty((n, n_rec))
    rec_ind = np.empty((len(sys_.inductors), n_rec))
    rec_src = np.empty((len(sys_.sources), n_rec))
    rec_cap = np.empty((len(sys_.caps), n_rec))
    rec_swg = np.empty((len(sys_.switches), n_rec))

    def record(slot):
        rec_v[:, slot] = vfull[:n]
        rec_ind[:, slot] = ind_i
        rec_cap[:, slot] = cap_i
        rec_swg[:, slot] = np.where(states, sys_.sw_gon, sys_.sw_goff)
        # source currents are solved unknowns; at t=0 they come from the
        # initial solve which is not kept, so recompute below in the loop
        # and patch slot 0 afterwards.

    record(0)
    src_rows = np.array([sys_.v_rows[e.name] for e in sys_.sources], dtype=int)
    l_rows = np.array([sys_.l_rows[e.name] for e in sys_.inductors], dtype=int)
    rec_src[:, 0] = 0.0
    t0_src_current_fixed = False

    cap_rows_a = sys_.cap_a
    cap_rows_b = sys_.cap_b
    mask_ca = cap_rows_a >= 0
    mask_cb = cap_rows_b >= 0
    rec_pos = {int(k): i for i, k in enumerate(rec_idx)}

    limit = cfg.switch_iteration_limit
    for k in range(1, n_steps + 1):
        rhs = np.zeros(sys_.size)
        if trapezoid:
            ieq = sys_.cap_g * cap_v + cap_i
        else:
            ieq = sys_.cap_g * cap_v
        np.add.at(rhs, cap_rows_a[mask_ca], ieq[mask_ca])
        np.add.at(rhs, cap_rows_b[mask_cb], -ieq[mask_cb])
        if len(l_rows):
            if trapezoid:
                rhs[l_rows] = -sys_.l_r * ind_i - ind_v
            else:
                rhs[l_rows] = -sys_.l_r * ind_i
        if len(src_rows):
            rhs[src_rows] = src_vals[:, k]

        seen = {states.tobytes()}
        for attempt in range(limit + 1):
            x = scipy.linalg.lu_solve(lu_piv, rhs, check_finite=False)
            vf = _vfull(x, n)
            new_states = sys_.switch_states(vf)
            if np.array_equal(new_states, states):
                break
            if new_states.tobytes() in seen:
                # the iteration revisited a state: no fixed point exists,
                # the map cycles through threshold chatter; keep this state
                break
            seen.add(new_states.tobytes())
            for i in np.nonzero(new_states != states)[0]:
                old_g = sys_.sw_gon[i] if states[i] else sys_.sw_goff[i]
                new_g = sys_.sw_gon[i] if new_states[i] else sys_.sw_goff[i]
                sys_.stamp_switch(A, i, new_g - old_g)
            states = new_states
            lu_piv = sys_.factor(A, f"at t={k * cfg.dt:.6e}")
        else:
            raise ConvergenceError(k * cfg.dt, limit)

        if not np.all(np.isfinite(x)):
            raise SimulationError(f"non-finite solution at t={k * cfg.dt:.6e} s")

        vfull = vf
        new_cap_v = vfull[cap_rows_a] - vfull[cap_rows_b]
        if trapezoid:
            cap_i = sys_.cap_g * new_cap_v - ieq
        else:
            cap_i = sys_.cap_g * (new_cap_v - cap_v)
        cap_v = new_cap_v
        ind_v = vfull[sys_.ind_a] - vfull[sys_.ind_b]
        if len(l_rows):
            ind_i = x[l_rows]
        slot = rec_pos.get(k)
        if slot is not None:
            record(slot)
            if len(src_rows):
                rec_src[:, slot] = x[src_rows]
            if not t0_src_current_fixed:
                # best available estimate for the t=0 source current
                rec_src[:, 0] = rec_src[:, slot]
                t0_src_current_fixed = True

    rec_times = times[rec_idx]
    voltages = {node: rec_v[i] for i, node in enumerate(sys_.nodes)}

    currents: Dict[str, np.ndarray] = {}
    vf_rec = np.vstack([rec_v, np.zeros((1, n_rec))])
    for e in sys_.resistors:
        va = vf_rec[sys_.nidx[e.a]] if sys_.nidx[e.a] >= 0 else 0.0
        vb = vf_rec[sys_.nidx[e.b]] if sys_.nidx[e.b] >= 0 else 0.0
        currents[e.name] = (va - vb) / e.ohms
    for i, e in enumerate(sys_.caps):
        currents[e.name] = rec_cap[i]
    for i, e in enumerate(sys_.inductors):
        currents[e.name] = rec_ind[i]
    for i, e in enumerate(sys_.sources):
        currents[e.name] = rec_src[i]
    for i, e in enumerate(sys_.switches):
        va = vf_rec[sys_.sw_a[i]]
        vb = vf_rec[sys_.sw_b[i]]
        currents[e.name] = (va - vb) * rec_swg[i]

    return Trace(
        rec_times,
        voltages,
        currents,
        sys_.nodes,
        tuple(e.name for e in c.elements),
    )


# ---------------------------------------------------------------------------
# energy accounting
# ---------------------------------------------------------------------------


@dataclass
class EnergyReport:
    stored_initial: float
    stored_final: float
    dissipated: float
    source_delivered: Dict[str, float]
    source_delivered_total: float
    residual: float
    residual_relative: float
    stored_series: np.ndarray = field(repr=False, default=None)
    dissipated_series: np.ndarray = field(repr=False, default=None)


def _cumtrapz(y: np.ndarray, t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(y)
    if len(t) > 1:
        seg = 0.5 * (y[1:] + y[:-1]) * np.diff(t)
        out[1:] = np.cumsum(seg)
    return out


def energy_audit(c: Circuit, tr: Trace) -> EnergyReport:
    """Account for every joule over the recorded window.

    stored = sum of 0.5*C*V^2 + 0.5*L*I^2; dissipated integrates v*i over
    resistors and switches with trapezoidal quadrature on the recorded grid;
    delivered is the net energy each source pushed into the circuit.  The
    residual is delivered - (stored change) - dissipated.
    """

    def v_ab(e):
        return tr.voltage(e.a) - tr.voltage(e.b)

    stored = np.zeros_like(tr.times)
    for e in c.elements:
        if isinstance(e, Capacitor):
            stored += 0.5 * e.farads * v_ab(e) ** 2
        elif isinstance(e, Inductor):
            stored += 0.5 * e.henries * tr.current(e.name) ** 2

    p_diss = np.zeros_like(tr.times)
    for e in c.elements:
        if isinstance(e, (Resistor, Switch)):
            p_diss += v_ab(e) * tr.current(e.name)
    diss_series = _cumtrapz(p_diss, tr.times)

    delivered = {}
    total = 0.0
    for e in c.elements:
        if isinstance(e, VSource):
            # solved branch current flows a -> b through the source, so the
            # energy pushed into the rest of the circuit is the negative
            w = -float(np.trapezoid(v_ab(e) * tr.current(e.name), tr.times))
            delivered[e.name] = w
            total += w

    e0 = float(stored[0])
    e1 = float(stored[-1])
    dissipated = float(diss_series[-1])
    residual = total - (e1 - e0) - dissipated
    scale = max(abs(total), e0, e1, dissipated, 1e-30)
    return EnergyReport(
        stored_initial=e0,
        stored_final=e1,
        dissipated=dissipated,
        source_delivered=delivered,
        source_delivered_total=total,
        residual=residual,
        residual_relative=abs(residual) / scale,
        stored_series=stored,
        dissipated_series=diss_series,
    )


# ---------------------------------------------------------------------------
# delimited export
# ---------------------------------------------------------------------------


def trace_csv(tr: Trace) -> str:
    """Full-precision CSV with one row per sample: time, node voltages in
    circuit order, element currents in circuit order."""
    cols = [("time_s", tr.times)]
    cols += [(f"v({n})", tr.voltages[n]) for n in tr.nodes]
    cols += [(f"i({e})", tr.currents[e]) for e in tr.element_names if e in tr.currents]
    header = ",".join(name for name, _ in cols)
    rows = [header]
    data = [arr for _, arr in cols]
    for i in range(len(tr.times)):
        rows.append(",".join(repr(float(arr[i])) for arr in data))
    return "\n".join(rows) + "\n"
