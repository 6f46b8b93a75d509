"""Switch-level transient simulation and design planning for resonant
energy-recycling power clocks.

The package has three layers:

* ``netlist`` / ``engine``: a small circuit description (R, L, C,
  sources, threshold switches) with a SPICE-flavored text format, and a
  nodal transient solver with an energy audit.
* ``resonator`` / ``logic2lal``: builders for the four-phase LC
  resonator (standalone quad or n x n array), its eigenmode analysis,
  and dual-rail adiabatic logic loads (shift register, eight-phase
  generator) clocked by it.
* ``planner`` / ``experiments``: kinetic-inductance sizing and on-chip
  power budgeting, plus scenario harnesses (sustain checks, drive
  resistor sweeps, frequency scaling studies).

``cli`` exposes the same workflows as subcommands; reports render
matplotlib figures next to the CSV/JSON files.
"""

from .engine import (
    ConvergenceError,
    EnergyReport,
    SimConfig,
    SimulationError,
    SingularSystemError,
    Trace,
    energy_audit,
    simulate,
    trace_csv,
)
from .experiments import (
    DriveSpec,
    LogicLoad,
    Scenario,
    SustainResult,
    SustainRules,
    SweepResult,
    adiabatic_scaling_study,
    drive_scheme_comparison,
    reference_scenario,
    run_sustain_check,
    sweep_drive_resistor,
)
from .logic2lal import (
    GateParams,
    build_eight_phase_generator,
    build_ideal_clocks,
    build_shift_register,
    decode_output,
    dissipation_per_cycle,
)
from .netlist import (
    Circuit,
    NetlistError,
    circuit,
    merge,
    parse_netlist,
    parse_value,
    serialize_netlist,
    validate,
)
from .planner import (
    ChipProfile,
    HkiProcess,
    PlannerError,
    load_chip,
    load_process,
    plan_report,
    size_inductor,
)
from .resonator import (
    ArraySpec,
    QuadSpec,
    attach_drive,
    build_array,
    build_quad,
    eigenmodes,
    quadrature_ic,
    quadrature_mode,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "NetlistError",
    "Circuit",
    "circuit",
    "merge",
    "parse_value",
    "parse_netlist",
    "serialize_netlist",
    "validate",
    "SimConfig",
    "Trace",
    "EnergyReport",
    "SimulationError",
    "SingularSystemError",
    "ConvergenceError",
    "simulate",
    "energy_audit",
    "trace_csv",
    "QuadSpec",
    "ArraySpec",
    "build_quad",
    "build_array",
    "eigenmodes",
    "quadrature_mode",
    "quadrature_ic",
    "attach_drive",
    "GateParams",
    "build_shift_register",
    "build_eight_phase_generator",
    "build_ideal_clocks",
    "decode_output",
    "dissipation_per_cycle",
    "PlannerError",
    "HkiProcess",
    "ChipProfile",
    "load_process",
    "load_chip",
    "size_inductor",
    "plan_report",
    "SustainRules",
    "DriveSpec",
    "LogicLoad",
    "Scenario",
    "SustainResult",
    "SweepResult",
    "reference_scenario",
    "run_sustain_check",
    "sweep_drive_resistor",
    "adiabatic_scaling_study",
    "drive_scheme_comparison",
]
