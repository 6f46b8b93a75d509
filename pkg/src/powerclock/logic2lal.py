"""Switch-level dual-rail pass-gate logic powered by the four-phase clocks.

Signals are dual-rail pairs swinging between -A and +A: logical 1 drives
the true rail through a full clock excursion while the false rail rests at
-A, and vice versa.  A pipeline stage connects its output rails to one
clock phase through CMOS-style transmission gates (one n plus one p switch
with cross-coupled control), and each rail carries two of them:

  * a compute gate controlled by the previous stage, on while the stage's
    clock rises through its peak;
  * a decompute gate controlled by the next stage, on while the clock falls
    back down.

With sinusoidal clocks the two control windows overlap around the peak and
hand the rail back to the clock symmetrically, so the rail is parked and
reconnected at the same voltage and almost no charge is lost to steps.
Data advances one stage per tick (a quarter period); each rail pair accepts
one new symbol per full clock cycle.

The eight-phase generator is the same stage built into a four-stage ring
with the rails crossed on the wrap edge.  The circulating twist makes every
stage toggle once per lap, producing eight rail waveforms of period 2T
spaced T/4 apart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .engine import Trace
from .netlist import (
    GROUND,
    Capacitor,
    Circuit,
    Pwl,
    Sine,
    Switch,
    VSource,
    circuit,
)
from .resonator import phase_class

__all__ = [
    "GateParams",
    "park_fraction",
    "ClockSpec",
    "StageMap",
    "TickSchedule",
    "LogicFragment",
    "build_shift_register",
    "build_eight_phase_generator",
    "build_ideal_clocks",
    "decode_dual_rail",
    "decode_output",
    "dissipation_per_cycle",
    "measure_offsets",
    "is_dc",
]

# decode thresholds as fractions of the rail swing (low rail .. high rail)
HIGH_FRACTION = 0.7
LOW_FRACTION = 0.3

# A rail is dropped (and later picked up) when the controlling rail pair
# crosses vth, at clock phase 90deg + arccos(park - vth/A) past the peak.
# Self-consistency of the parked level p (as a fraction of amplitude)
# across a chain of identical stages, p = sin(arccos(p - vth/A)), gives
# p = (v + sqrt(2 - v^2)) / 2 with v = vth/A.  Control sources rest there
# so boundary stages park exactly like inner ones and reconnection
# involves no voltage step.


def park_fraction(vth_over_amp: float) -> float:
    v = vth_over_amp
    if not 0.0 < v < math.sqrt(2.0):
        raise ValueError("vth must be between 0 and sqrt(2) times the amplitude")
    return 0.5 * (v + math.sqrt(2.0 - v * v))


PARK_FRACTION = park_fraction(0.5)  # the vth = A/2 operating point


@dataclass(frozen=True)
class GateParams:
    # r_off is near-ideal so off-state leakage (independent of r_on) stays
    # well below the resistive tracking loss the energy scaling tests probe
    r_on: float = 10e3
    r_off: float = 1e13
    vth: float = 0.5  # volts across the control pair
    c_gate: float = 1e-15
    c_wire: float = 1e-15

    def rail_capacitance(self) -> float:
        # each rail is sensed by 8 switch gates in a full pipeline (4 from
        # the next stage's compute gates, 4 from the previous stage's
        # decompute gates); terminal stages are padded to the same loading
        return self.c_wire + 8.0 * self.c_gate


@dataclass(frozen=True)
class ClockSpec:
    frequency: float
    amplitude: float
    nodes: Tuple[str, str, str, str] = ("p0", "p1", "p2", "p3")

    @property
    def period(self) -> float:
        return 1.0 / self.frequency


@dataclass(frozen=True)
class StageMap:
    """Which clock phase powers each stage, and the capacitance that phase
    switches per clock cycle (one rail per stage per cycle)."""

    stages: tuple  # ((stage_index, phase_class), ...)
    phase_loads: dict  # {phase_class: farads}


@dataclass(frozen=True)
class TickSchedule:
    period: float
    input_peaks: tuple
    output_peaks: tuple
    stages: int

    @property
    def tick(self) -> float:
        return self.period / 4.0


@dataclass
class LogicFragment:
    circuit: Circuit
    stage_map: StageMap
    outputs: tuple  # output nodes
    schedule: Optional[TickSchedule] = None
    suggested_tstop: float = 0.0


# ---------------------------------------------------------------------------
# building blocks
# ---------------------------------------------------------------------------


def _tgate(name: str, supply: str, rail: str, ctrl_t: str, ctrl_f: str, p: GateParams):
    """CMOS-style transmission gate: n and p switches in parallel, control
    pair cross-coupled so both close when v(ctrl_t) - v(ctrl_f) >= vth.
    The supply side is always terminal a (used by the energy bookkeeping)."""
    return [
        Switch(f"w{name}.n", supply, rail, ctrl_t, ctrl_f, p.r_on, p.r_off, p.vth, "n"),
        Switch(f"w{name}.p", supply, rail, ctrl_f, ctrl_t, p.r_on, p.r_off, -p.vth, "p"),
    ]


def _control_pwl(
    peaks: Sequence[float], T: float, amp: float, tstop: float,
    samples: int = 256, park: float = PARK_FRACTION,
) -> Pwl:
    """Dual-rail control waveform: rest at the parked-rail level, cosine
    excursion centered on each active peak, truncated where the cosine
    meets the rest level so the waveform is continuous.  Sampled on a
    T/samples grid so peaks (multiples of T/4) land exactly on grid
    points."""
    rest = -park * amp
    half = math.acos(-park) / (2.0 * math.pi) * T
    n = int(math.ceil(tstop / T * samples)) + 1
    ts = np.arange(n) * (T / samples)
    vs = np.full(n, rest)
    for pk in peaks:
        lo = max(int(math.ceil((pk - half) / (T / samples))), 0)
        hi = min(int(math.floor((pk + half) / (T / samples))), n - 1)
        if hi < lo:
            continue
        window = ts[lo : hi + 1]
        vs[lo : hi + 1] = amp * np.cos(2.0 * math.pi * (window - pk) / T)
    return Pwl(tuple(zip(ts.tolist(), vs.tolist())))


def _rail_cap(name: str, rail: str, value: float, ic: float) -> Capacitor:
    return Capacitor(name, rail, GROUND, value, ic)


# ---------------------------------------------------------------------------
# shift register
# ---------------------------------------------------------------------------


def build_shift_register(
    stages: int,
    params: GateParams,
    clocks: ClockSpec,
    pattern: Sequence[int],
    prefix: str = "sr",
) -> LogicFragment:
    """Dual-rail pipeline of ``stages`` buffer stages fed by a source-driven
    input pair presenting ``pattern`` one symbol per clock cycle.

    The stage after the last one exists only as a pair of sources replaying
    the delayed pattern; it operates the final decompute gates so every real
    stage is uncomputed cleanly.  Decoded output equals the input pattern
    delayed by ``stages`` ticks.
    """
    if stages < 1:
        raise ValueError("need at least one stage")
    bits = [int(b) for b in pattern]
    if any(b not in (0, 1) for b in bits):
        raise ValueError("pattern entries must be 0 or 1")
    if not bits:
        raise ValueError("pattern is empty")

    T = clocks.period
    A = clocks.amplitude
    crail = params.rail_capacitance()
    park = park_fraction(params.vth / A)

    t_in = [0.75 * T + m * T for m in range(len(bits))]
    t_out = [t + stages * T / 4.0 for t in t_in]
    t_phantom = [t + (stages + 1) * T / 4.0 for t in t_in]
    tstop = T * math.ceil((t_phantom[-1] + 0.75 * T) / T)

    def rail(j: int, which: str) -> str:
        return f"{prefix}.s{j}.{which}"

    def ctrl(peaks, keep):
        chosen = [t for t, b in zip(peaks, bits) if b == keep]
        return _control_pwl(chosen, T, A, tstop, park=park)

    in_t, in_f = f"{prefix}.in.t", f"{prefix}.in.f"
    nx_t, nx_f = f"{prefix}.nx.t", f"{prefix}.nx.f"

    elems: List = []
    elems.append(VSource(f"v{prefix}.in.t", in_t, GROUND, ctrl(t_in, 1)))
    elems.append(VSource(f"v{prefix}.in.f", in_f, GROUND, ctrl(t_in, 0)))
    elems.append(VSource(f"v{prefix}.nx.t", nx_t, GROUND, ctrl(t_phantom, 1)))
    elems.append(VSource(f"v{prefix}.nx.f", nx_f, GROUND, ctrl(t_phantom, 0)))

    stage_list = []
    for j in range(stages):
        phase = j % 4
        stage_list.append((j, phase))
        clk = clocks.nodes[phase]
        prev_t, prev_f = (rail(j - 1, "t"), rail(j - 1, "f")) if j else (in_t, in_f)
        next_t, next_f = (
            (rail(j + 1, "t"), rail(j + 1, "f")) if j + 1 < stages else (nx_t, nx_f)
        )
        for which, ct, cf, dt_, df_ in (
            ("t", prev_t, prev_f, next_t, next_f),
            ("f", prev_f, prev_t, next_f, next_t),
        ):
            r = rail(j, which)
            elems.append(_rail_cap(f"c{prefix}.s{j}.{which}", r, crail, -park * A))
            elems += _tgate(f"{prefix}.s{j}.{which}.cmp", clk, r, ct, cf, params)
            elems += _tgate(f"{prefix}.s{j}.{which}.dcp", clk, r, dt_, df_, params)

    loads: Dict[int, float] = {p: 0.0 for p in range(4)}
    for _, p in stage_list:
        loads[p] += crail

    return LogicFragment(
        circuit=circuit(elems),
        stage_map=StageMap(tuple(stage_list), loads),
        outputs=(rail(stages - 1, "t"), rail(stages - 1, "f")),
        schedule=TickSchedule(T, tuple(t_in), tuple(t_out), stages),
        suggested_tstop=tstop,
    )


# ---------------------------------------------------------------------------
# eight-phase generator
# ---------------------------------------------------------------------------


def build_eight_phase_generator(
    params: GateParams,
    clocks: ClockSpec,
    prefix: str = "epg",
) -> LogicFragment:
    """Four-stage twisted ring whose eight rails are square-ish waves of
    period 2T offset by successive quarter periods.

    The wrap edge (stage 3 back to stage 0) crosses the rails, so the
    circulating symbol inverts every lap and each stage toggles once per
    two clock cycles.  Initial rail voltages seed the ring mid-flight,
    consistent with the clock phases at t=0.
    """
    T = clocks.period
    A = clocks.amplitude
    crail = params.rail_capacitance()

    def rail(j: int, which: str) -> str:
        return f"{prefix}.s{j}.{which}"

    # ring state at t=0: stages 0..2 carry 1 (at peak, mid-rise, pre-rise),
    # stage 3 still finishing the fall of the previous 0 on its false rail;
    # idle rails rest at the parked level
    pk = -park_fraction(params.vth / A) * A
    seeds = {
        (0, "t"): A, (0, "f"): pk,
        (1, "t"): 0.0, (1, "f"): pk,
        (2, "t"): pk, (2, "f"): pk,
        (3, "t"): pk, (3, "f"): 0.0,
    }

    elems: List = []
    stage_list = []
    for j in range(4):
        stage_list.append((j, j))
        clk = clocks.nodes[j]
        jp = (j - 1) % 4
        jn = (j + 1) % 4
        # the twist: controls crossing the 3 -> 0 edge swap rails
        swap_prev = j == 0
        swap_next = j == 3
        prev_t = rail(jp, "f" if swap_prev else "t")
        prev_f = rail(jp, "t" if swap_prev else "f")
        next_t = rail(jn, "f" if swap_next else "t")
        next_f = rail(jn, "t" if swap_next else "f")
        for which, ct, cf, dt_, df_ in (
            ("t", prev_t, prev_f, next_t, next_f),
            ("f", prev_f, prev_t, next_f, next_t),
        ):
            r = rail(j, which)
            elems.append(_rail_cap(f"c{prefix}.s{j}.{which}", r, crail, seeds[(j, which)]))
            elems += _tgate(f"{prefix}.s{j}.{which}.cmp", clk, r, ct, cf, params)
            elems += _tgate(f"{prefix}.s{j}.{which}.dcp", clk, r, dt_, df_, params)

    loads = {p: crail for p in range(4)}
    outputs = tuple(rail(j, "t") for j in range(4)) + tuple(rail(j, "f") for j in range(4))
    return LogicFragment(
        circuit=circuit(elems),
        stage_map=StageMap(tuple(stage_list), loads),
        outputs=outputs,
    )


def build_ideal_clocks(clocks: ClockSpec) -> Circuit:
    """Stiff sinusoidal sources on the four clock nodes, for exercising
    logic without a resonator: phase k carries A cos(2 pi f t - k 90deg)."""
    elems = [
        VSource(
            f"vclk{k}",
            clocks.nodes[k],
            GROUND,
            Sine(0.0, clocks.amplitude, clocks.frequency, 0.0, 0.0, 90.0 - 90.0 * k),
        )
        for k in range(4)
    ]
    return circuit(elems)


# ---------------------------------------------------------------------------
# decode and measurement
# ---------------------------------------------------------------------------


def decode_dual_rail(
    tr: Trace,
    rail_t: str,
    rail_f: str,
    times: Sequence[float],
    amplitude: float,
) -> List[Optional[int]]:
    """Sample a rail pair at the given instants and decode each to 1, 0 or
    None (invalid).  High means above the 70% point of the -A..+A swing,
    low means below the 30% point."""
    lo = -amplitude
    swing = 2.0 * amplitude
    hi_thr = lo + HIGH_FRACTION * swing
    lo_thr = lo + LOW_FRACTION * swing
    vt = np.interp(times, tr.times, tr.voltage(rail_t))
    vf = np.interp(times, tr.times, tr.voltage(rail_f))
    out: List[Optional[int]] = []
    for a, b in zip(vt, vf):
        if a >= hi_thr and b <= lo_thr:
            out.append(1)
        elif a <= lo_thr and b >= hi_thr:
            out.append(0)
        else:
            out.append(None)
    return out


def decode_output(tr: Trace, frag: LogicFragment, amplitude: float) -> List[Optional[int]]:
    """Decode a shift register's output pair at its scheduled peak times."""
    if frag.schedule is None:
        raise ValueError("fragment carries no tick schedule")
    t, f = frag.outputs
    return decode_dual_rail(tr, t, f, frag.schedule.output_peaks, amplitude)


def dissipation_per_cycle(
    c: Circuit,
    tr: Trace,
    period: float,
    cycles: int = 10,
) -> Tuple[float, float]:
    """(joules per cycle dissipated in the logic switches, recycling
    efficiency) measured over the trailing ``cycles`` full clock periods.

    Efficiency is 1 - dissipated/delivered with delivered the gross energy
    entering the switch fragment from the clock nodes (positive half of the
    per-phase power flow).  Requires a trace at least 20 cycles long.
    """
    if tr.times[-1] - tr.times[0] < 20.0 * period:
        raise ValueError("need a steady run of at least 20 clock cycles")
    t_end = math.floor(tr.times[-1] / period) * period
    w = tr.window(t_end - cycles * period, t_end)

    switches = [e for e in c.elements if isinstance(e, Switch)]
    if not switches:
        raise ValueError("circuit has no switches to account")

    by_phase: Dict[int, np.ndarray] = {}
    dissipated = 0.0
    for e in switches:
        v_ab = w.voltage(e.a) - w.voltage(e.b)
        i = w.current(e.name)
        dissipated += float(np.trapezoid(v_ab * i, w.times))
        p_in = w.voltage(e.a) * i  # supply side is terminal a
        cls = phase_class(e.a)
        if cls in by_phase:
            by_phase[cls] = by_phase[cls] + p_in
        else:
            by_phase[cls] = p_in

    gross = 0.0
    for p_cls in by_phase.values():
        gross += float(np.trapezoid(np.clip(p_cls, 0.0, None), w.times))
    if gross <= 0.0:
        raise ValueError("no energy entered the logic over the window")
    return dissipated / cycles, 1.0 - dissipated / gross


def measure_offsets(
    tr: Trace,
    nodes: Sequence[str],
    period: float,
    output_periods: int = 8,
) -> np.ndarray:
    """Circular cross-correlation lag of each node behind the first, in
    seconds, over the trailing ``output_periods`` output periods (the
    output period is 2 * period)."""
    span = output_periods * 2.0 * period
    t_end = tr.times[-1]
    w = tr.window(t_end - span, t_end)
    n = len(w.times)
    ref = w.voltage(nodes[0])
    ref = ref - np.mean(ref)
    fref = np.fft.rfft(ref)
    lags = []
    dt = w.times[1] - w.times[0]
    for node in nodes:
        sig = w.voltage(node)
        sig = sig - np.mean(sig)
        corr = np.fft.irfft(np.fft.rfft(sig) * np.conj(fref), n=n)
        k = int(np.argmax(corr))
        lags.append((k * dt) % (2.0 * period))
    return np.array(lags)


def is_dc(
    tr: Trace,
    nodes: Sequence[str],
    period: float,
    amplitude: float,
    window_periods: int = 4,
    fraction: float = 0.1,
) -> bool:
    """True when every node's peak-to-peak over the trailing window is
    below ``fraction`` of the nominal rail swing (2 * amplitude)."""
    t_end = tr.times[-1]
    w = tr.window(t_end - window_periods * period, t_end)
    swing = 2.0 * amplitude
    for node in nodes:
        v = w.voltage(node)
        if float(np.max(v) - np.min(v)) >= fraction * swing:
            return False
    return True
