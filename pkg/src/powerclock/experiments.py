"""Scenario harness: does a driven resonator keep its logic alive?

A scenario couples three ingredients on the four clock nodes:

  * a quad (or array) resonator seeded in its circulating quadrature state,
  * a logic load (shift register and/or eight-phase generator),
  * an AC drive injected through per-node resistors, slightly detuned
    below the resonator so the delivered power is set by the drive
    resistor rather than by a perfect resonance.

With a strong enough drive the tank locks to the source and the logic
runs indefinitely; with a weak drive the amplitude sags until the gate
windows shrink, switching turns lossy, and the whole clock system
collapses.  The sustain verdict captures that distinction with explicit
thresholds.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import planner
from .engine import EnergyReport, SimConfig, Trace, energy_audit, simulate
from .logic2lal import (
    ClockSpec,
    GateParams,
    LogicFragment,
    build_eight_phase_generator,
    build_shift_register,
    dissipation_per_cycle,
    is_dc,
)
from .netlist import Circuit, merge
from .resonator import (
    ArraySpec,
    Modes,
    QuadSpec,
    attach_drive,
    build_array,
    build_quad,
    eigenmodes,
    mode_energies,
    quadrature_ic,
    quadrature_mode,
)

__all__ = [
    "SustainRules",
    "DriveSpec",
    "LogicLoad",
    "Scenario",
    "ModeTrend",
    "SustainVerdict",
    "SustainResult",
    "SweepRow",
    "SweepResult",
    "StudyRow",
    "reference_scenario",
    "run_sustain_check",
    "sweep_drive_resistor",
    "adiabatic_scaling_study",
    "drive_scheme_comparison",
    "study_csv",
]

DEFAULT_PATTERN = (1, 0, 1, 1, 0, 0, 1, 0, 1, 1, 1, 0, 0, 0, 1, 1)


@dataclass(frozen=True)
class SustainRules:
    """Explicit thresholds behind the sustain verdict."""

    amplitude_fraction: float = 0.7  # of nominal, over the tail
    tail_fraction: float = 0.1  # last part of the run the verdict looks at
    dc_window_periods: int = 4  # clock periods for the outputs-went-DC test
    dc_p2p_fraction: float = 0.1  # of the nominal rail swing
    collapse_fraction: float = 0.3  # envelope below this marks collapse


@dataclass(frozen=True)
class DriveSpec:
    scheme: str  # "four_phase" or "two_phase"
    amplitude: float
    frequency: float
    r_drive: float


@dataclass(frozen=True)
class LogicLoad:
    gates: GateParams
    shift_stages: int = 8
    eight_phase: bool = True
    pattern: tuple = DEFAULT_PATTERN


@dataclass(frozen=True)
class Scenario:
    quad: Optional[QuadSpec] = None
    array: Optional[ArraySpec] = None
    amplitude: float = 1.0  # nominal clock amplitude the tank is seeded at
    drive: Optional[DriveSpec] = None
    logic: Optional[LogicLoad] = None
    cycles: float = 50.0
    steps_per_cycle: int = 400
    rules: SustainRules = field(default_factory=SustainRules)

    def __post_init__(self):
        if (self.quad is None) == (self.array is None):
            raise ValueError("scenario needs exactly one of quad or array")
        if self.cycles <= 0 or self.steps_per_cycle < 16:
            raise ValueError("bad run length")
        if self.amplitude <= 0:
            raise ValueError("amplitude must be positive")

    def resonator_circuit(self) -> Circuit:
        if self.quad is not None:
            return build_quad(self.quad)
        return build_array(self.array)

    def natural_frequency(self) -> float:
        omega, _ = quadrature_mode(self.resonator_circuit())
        return omega / (2.0 * math.pi)

    def operating_frequency(self) -> float:
        """The rate everything is clocked at: the drive when present
        (locked operation), else the resonator itself."""
        if self.drive is not None:
            return self.drive.frequency
        return self.natural_frequency()


def reference_scenario() -> Scenario:
    """The frozen baseline: a quad tuned to 5 MHz carrying an 8-stage
    shift register plus the eight-phase generator, topped off through
    5 kOhm resistors by a four-phase drive at 4.7 MHz.

    The drive sits on the loaded resonance: the live logic's wiring
    capacitance pulls the tank about 6% below its bare 5 MHz, so a
    4.7 MHz drive pumps a healthy quad on-peak.  The steady amplitude is
    then set by the coupling 1/(2 pi f R C).  5 kOhm holds the clocks
    near nominal for either drive scheme.  15 kOhm lets them sag below
    the 0.72 V switching threshold; the logic stops toggling, its pass
    gates freeze, and the off-state leakage (1.5 MOhm) bleeds the parked
    dual-rail charge away so the gates never reopen.  The dead load
    detaches, the bare tank springs back to 5 MHz where the drive no
    longer reaches it, and the clocks settle on a deep off-resonance
    floor: a detected collapse.
    """
    f0 = 5e6
    c_node = 100e-12
    ind = planner.size_inductor(f0, c_node, planner.load_process("seeqc"), 1.0)
    return Scenario(
        quad=QuadSpec(inductance=ind.inductance, capacitance=c_node),
        amplitude=1.0,
        drive=DriveSpec(
            scheme="four_phase",
            amplitude=1.7,
            frequency=f0 * (1.0 - 0.06),
            r_drive=5e3,
        ),
        logic=LogicLoad(
            gates=GateParams(
                r_on=5e3,
                r_off=1.5e6,
                vth=0.72,
                c_gate=0.05e-12,
                c_wire=4e-12,
            ),
            shift_stages=8,
            eight_phase=True,
        ),
        cycles=50.0,
        steps_per_cycle=400,
    )


# ---------------------------------------------------------------------------
# verdict machinery
# ---------------------------------------------------------------------------


@dataclass
class ModeTrend:
    pair_fraction_final: float  # quadrature pair / modal total, final 10 cycles
    initial_modal_total: float  # J
    final_modal_total: float  # J
    modal_total_at_collapse: Optional[float]  # J, at time_of_collapse


@dataclass
class SustainVerdict:
    sustained: bool
    final_amplitude_fraction: float
    time_of_collapse: Optional[float]
    mode_trend: Optional[ModeTrend]


@dataclass
class SustainResult:
    scenario: Scenario
    verdict: SustainVerdict
    trace: Trace
    energy: EnergyReport
    circuit: Circuit
    envelope_times: np.ndarray
    envelope: np.ndarray  # cycle-peak amplitude averaged over clock nodes
    modes: Modes
    sr: Optional[LogicFragment]
    epg: Optional[LogicFragment]

    @property
    def sustained(self) -> bool:
        return self.verdict.sustained


def _build_system(s: Scenario) -> Tuple[Circuit, Optional[LogicFragment],
                                        Optional[LogicFragment], float]:
    tank = s.resonator_circuit()
    f_nat = s.natural_frequency()
    f_op = s.operating_frequency()
    if s.drive is not None and abs(s.drive.frequency - f_nat) > 0.1 * f_nat:
        warnings.warn(
            f"drive frequency {s.drive.frequency:g} Hz is more than 10% away "
            f"from the resonator's {f_nat:g} Hz",
            stacklevel=3,
        )
    c = quadrature_ic(tank, s.amplitude)
    sr = epg = None
    if s.logic is not None:
        clocks = ClockSpec(f_op, s.amplitude)
        if s.logic.shift_stages > 0:
            symbols = max(len(s.logic.pattern), int(math.ceil(s.cycles)))
            reps = math.ceil(symbols / len(s.logic.pattern))
            pattern = (tuple(s.logic.pattern) * reps)[:symbols]
            sr = build_shift_register(s.logic.shift_stages, s.logic.gates,
                                      clocks, pattern)
            c = merge(c, sr.circuit)
        if s.logic.eight_phase:
            epg = build_eight_phase_generator(s.logic.gates, clocks)
            c = merge(c, epg.circuit)
    if s.drive is not None:
        c = attach_drive(c, s.drive.scheme, s.drive.amplitude,
                         s.drive.frequency, s.drive.r_drive)
    return c, sr, epg, f_op


def _cycle_envelope(tr: Trace, nodes: Sequence[str], period: float
                    ) -> Tuple[np.ndarray, np.ndarray]:
    """Cycle amplitude (half the peak-to-peak swing, immune to standing DC
    offsets), averaged over the given nodes: one sample per full clock
    period, timestamped at the period's end."""
    n_cycles = int(math.floor((tr.times[-1] - tr.times[0]) / period))
    volts = np.vstack([tr.voltage(nd) for nd in nodes])
    edges = tr.times[0] + np.arange(n_cycles + 1) * period
    idx = np.searchsorted(tr.times, edges)
    env = np.empty(n_cycles)
    for k in range(n_cycles):
        seg = volts[:, idx[k]:max(idx[k + 1], idx[k] + 1)]
        env[k] = float(np.mean(0.5 * (np.max(seg, axis=1) - np.min(seg, axis=1))))
    return edges[1:], env


def run_sustain_check(s: Scenario) -> SustainResult:
    """Simulate the scenario and apply the sustain rule.

    Sustained means the clock-node envelope stays at or above
    ``rules.amplitude_fraction`` of nominal throughout the final
    ``rules.tail_fraction`` of the run, and (when an eight-phase generator
    is present) its outputs have not settled to DC.
    """
    c, sr, epg, f_op = _build_system(s)
    T = 1.0 / f_op
    cfg = SimConfig(dt=T / s.steps_per_cycle, tstop=s.cycles * T)
    tr = simulate(c, cfg)

    tank = s.resonator_circuit()
    modes = eigenmodes(tank)
    phase_nodes = list(modes.nodes)
    env_t, env = _cycle_envelope(tr, phase_nodes, T)
    nominal = s.amplitude
    rules = s.rules

    tail_t0 = tr.times[-1] - rules.tail_fraction * (tr.times[-1] - tr.times[0])
    tail = env[env_t >= tail_t0]
    if len(tail) == 0:
        tail = env[-1:]
    final_fraction = float(np.min(tail)) / nominal

    collapsed = env < rules.collapse_fraction * nominal
    time_of_collapse = float(env_t[np.argmax(collapsed)]) if collapsed.any() else None

    healthy_logic = True
    if epg is not None:
        healthy_logic = not is_dc(tr, epg.outputs, T, nominal,
                                  rules.dc_window_periods,
                                  rules.dc_p2p_fraction)

    sustained = final_fraction >= rules.amplitude_fraction and healthy_logic

    me = mode_energies(modes, tr)
    totals = me.sum(axis=1)
    pair_om, _ = quadrature_mode(tank)
    pair = [i for i, w in enumerate(modes.omegas)
            if abs(w - pair_om) <= 1e-6 * pair_om]
    last10 = tr.times >= tr.times[-1] - 10.0 * T
    tot_last = totals[last10]
    pair_last = me[np.ix_(last10, pair)].sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = np.where(tot_last > 0, pair_last / tot_last, 0.0)
    at_collapse = None
    if time_of_collapse is not None:
        k = int(np.searchsorted(tr.times, time_of_collapse))
        at_collapse = float(totals[min(k, len(totals) - 1)])
    trend = ModeTrend(
        pair_fraction_final=float(np.mean(frac)),
        initial_modal_total=float(totals[0]),
        final_modal_total=float(totals[-1]),
        modal_total_at_collapse=at_collapse,
    )

    verdict = SustainVerdict(
        sustained=sustained,
        final_amplitude_fraction=final_fraction,
        time_of_collapse=time_of_collapse,
        mode_trend=trend,
    )
    return SustainResult(
        scenario=s,
        verdict=verdict,
        trace=tr,
        energy=energy_audit(c, tr),
        circuit=c,
        envelope_times=env_t,
        envelope=env,
        modes=modes,
        sr=sr,
        epg=epg,
    )


# ---------------------------------------------------------------------------
# sweeps and studies
# ---------------------------------------------------------------------------


@dataclass
class SweepRow:
    parameter: float
    sustained: bool
    final_amplitude_fraction: float
    dissipation_J_per_cycle: float
    efficiency: float


@dataclass
class SweepResult:
    rows: List[SweepRow]
    threshold: Optional[float]  # R*: midpoint of the sustain/fail boundary
    monotone: bool

    def to_csv(self) -> str:
        lines = ["parameter,sustained,final_amplitude_fraction,"
                 "dissipation_J_per_cycle,efficiency"]
        for r in self.rows:
            lines.append(
                f"{r.parameter!r},{str(r.sustained).lower()},"
                f"{r.final_amplitude_fraction!r},"
                f"{r.dissipation_J_per_cycle!r},{r.efficiency!r}"
            )
        return "\n".join(lines) + "\n"


def _logic_energy(res: SustainResult, cycles: int = 10) -> Tuple[float, float]:
    T = 1.0 / res.scenario.operating_frequency()
    try:
        return dissipation_per_cycle(res.circuit, res.trace, T, cycles)
    except ValueError:
        return float("nan"), float("nan")


def sweep_drive_resistor(s: Scenario, r_values: Sequence[float]) -> SweepResult:
    """Run the sustain check across drive resistors.

    The threshold estimate R* is the midpoint between the largest
    sustaining and the smallest failing value; ``monotone`` reports
    whether the sustained set was downward-closed as expected.
    """
    if s.drive is None:
        raise ValueError("scenario has no drive to sweep")
    values = list(r_values)
    if not values:
        raise ValueError("r_values is empty")
    if any(r <= 0 for r in values):
        raise ValueError("r_values must be positive")
    if sorted(values) != values:
        raise ValueError("r_values must be sorted ascending")

    rows = []
    for r in values:
        res = run_sustain_check(replace(s, drive=replace(s.drive, r_drive=r)))
        epj, eff = _logic_energy(res)
        rows.append(SweepRow(r, res.sustained,
                             res.verdict.final_amplitude_fraction, epj, eff))

    flags = [row.sustained for row in rows]
    monotone = all(a >= b for a, b in zip(flags, flags[1:]))
    threshold = None
    if any(flags) and not all(flags):
        last_ok = max(v for v, okay in zip(values, flags) if okay)
        first_bad = min(v for v, okay in zip(values, flags) if not okay)
        threshold = 0.5 * (last_ok + first_bad)
    return SweepResult(rows, threshold, monotone)


@dataclass
class StudyRow:
    frequency: float
    dissipation_J_per_cycle: float
    efficiency: float


def adiabatic_scaling_study(s: Scenario, freqs: Sequence[float]) -> List[StudyRow]:
    """Re-run the scenario at each clock rate, resizing the quad inductor
    (planner loop) and scaling the drive to keep the same relative
    detuning and coupling.  Reports the logic's per-cycle dissipation and
    recycling efficiency at each rate."""
    if s.quad is None:
        raise ValueError("scaling study needs a quad scenario")
    if not list(freqs):
        raise ValueError("freqs is empty")
    proc = planner.load_process("seeqc")
    f_ref = s.natural_frequency()
    rows = []
    for f in freqs:
        if f <= 0:
            raise ValueError("frequencies must be positive")
        ind = planner.size_inductor(f, s.quad.capacitance, proc, s.amplitude)
        spec = replace(s.quad, inductance=ind.inductance)
        drive = s.drive
        if drive is not None:
            drive = replace(
                drive,
                frequency=drive.frequency * f / f_ref,
                r_drive=drive.r_drive * f_ref / f,
            )
        res = run_sustain_check(replace(s, quad=spec, drive=drive))
        epj, eff = _logic_energy(res)
        rows.append(StudyRow(f, epj, eff))
    return rows


def drive_scheme_comparison(s: Scenario) -> Tuple[SustainResult, SustainResult]:
    """(two_phase, four_phase) sustain results at identical amplitude,
    frequency and drive resistance."""
    if s.drive is None:
        raise ValueError("scenario has no drive")
    two = run_sustain_check(replace(s, drive=replace(s.drive, scheme="two_phase")))
    four = run_sustain_check(replace(s, drive=replace(s.drive, scheme="four_phase")))
    return two, four


def study_csv(rows: Sequence[StudyRow]) -> str:
    lines = ["frequency_Hz,dissipation_J_per_cycle,efficiency"]
    for r in rows:
        lines.append(f"{r.frequency!r},{r.dissipation_J_per_cycle!r},{r.efficiency!r}")
    return "\n".join(lines) + "\n"
