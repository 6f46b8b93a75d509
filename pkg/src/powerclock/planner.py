"""Design planning for kinetic-inductance energy recycling layers.

Turns film properties (sheet inductance, critical current density) into
chip-level answers: how much energy a patterned inductor layer can hold
per unit area, how many layers a given chip's power budget needs, and the
geometry of one quad inductor sized to resonate a capacitive load at a
target clock rate.

SI units throughout; the report renderer also shows the customary
nJ/cm^2 and mW/cm^2 forms.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Optional, Union

__all__ = [
    "PlannerError",
    "HkiProcess",
    "ChipProfile",
    "LayerPlan",
    "InductorPlan",
    "PlanReport",
    "energy_density",
    "power_density_and_layers",
    "size_inductor",
    "plan_report",
    "load_process",
    "load_chip",
    "bundled_profiles",
]

J_PER_M2_TO_NJ_PER_CM2 = 1e5
W_PER_M2_TO_MW_PER_CM2 = 0.1


class PlannerError(ValueError):
    pass


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise PlannerError(msg)


@dataclass(frozen=True)
class HkiProcess:
    """Inductive film process corner.

    Parameters
    ----------
    name : str
        Profile label.
    sheet_inductance : float
        Henries per square of patterned film.
    critical_current_per_width : float
        Amperes per meter of trace width at which the film quenches.
    min_width : float
        Lithographic minimum trace width, meters.
    min_space : float
        Lithographic minimum gap between traces, meters.
    derate : float
        Fraction of the critical current used at peak, in (0, 1].
    """

    name: str
    sheet_inductance: float
    critical_current_per_width: float
    min_width: float
    min_space: float
    derate: float = 1.0 / 3.0

    def __post_init__(self):
        _require(self.sheet_inductance > 0, "sheet_inductance must be positive")
        _require(self.critical_current_per_width > 0,
                 "critical_current_per_width must be positive")
        _require(self.min_width > 0, "min_width must be positive")
        _require(self.min_space > 0, "min_space must be positive")
        _require(0 < self.derate <= 1, "derate must be in (0, 1]")


@dataclass(frozen=True)
class ChipProfile:
    """Chip to be powered: area, dissipation budget and clock.

    Parameters
    ----------
    name : str
        Profile label.
    area : float
        Die area in square meters.
    power : float
        Power budget in watts at ``clock_frequency``.
    clock_frequency : float
        Clock rate in hertz the power figure corresponds to.
    supply_amplitude : float
        Power-clock amplitude in volts.
    """

    name: str
    area: float
    power: float
    clock_frequency: float
    supply_amplitude: float = 1.0

    def __post_init__(self):
        _require(self.area > 0, "area must be positive")
        _require(self.power > 0, "power must be positive")
        _require(self.clock_frequency > 0, "clock_frequency must be positive")
        _require(self.supply_amplitude > 0, "supply_amplitude must be positive")

    @property
    def power_density(self) -> float:
        return self.power / self.area


@dataclass(frozen=True)
class LayerPlan:
    power_density: float  # W/m^2 recyclable per layer at the chip clock
    layers_required: int


@dataclass(frozen=True)
class InductorPlan:
    inductance: float  # H
    squares: float
    width: float  # m
    footprint: float  # m^2, meander including min spacing
    peak_current: float  # A
    current_margin_ok: bool


@dataclass(frozen=True)
class PlanReport:
    process: str
    chip: str
    energy_density: float  # J/m^2 per layer
    power_density: float  # W/m^2 per layer at the chip clock
    chip_power_density: float  # W/m^2 demanded by the chip
    layers_required: int
    load_per_phase: float  # F, inferred from the chip power
    inductor: InductorPlan

    def to_json(self, indent: Optional[int] = 2) -> str:
        return json.dumps(asdict(self), indent=indent, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PlanReport":
        d = json.loads(text)
        d["inductor"] = InductorPlan(**d["inductor"])
        return cls(**d)

    def render(self) -> str:
        rows = [
            ("process", self.process, ""),
            ("chip", self.chip, ""),
            ("energy density / layer",
             f"{self.energy_density * J_PER_M2_TO_NJ_PER_CM2:.3f}", "nJ/cm^2"),
            ("power density / layer",
             f"{self.power_density * W_PER_M2_TO_MW_PER_CM2:.1f}", "mW/cm^2"),
            ("chip power density",
             f"{self.chip_power_density * W_PER_M2_TO_MW_PER_CM2:.1f}", "mW/cm^2"),
            ("layers required", str(self.layers_required), ""),
            ("load per phase", f"{self.load_per_phase * 1e12:.3f}", "pF"),
            ("inductance", f"{self.inductor.inductance * 1e9:.3f}", "nH"),
            ("film squares", f"{self.inductor.squares:.1f}", ""),
            ("trace width", f"{self.inductor.width * 1e6:.2f}", "um"),
            ("meander footprint", f"{self.inductor.footprint * 1e6:.4f}", "mm^2"),
            ("peak current", f"{self.inductor.peak_current * 1e3:.3f}", "mA"),
            ("current margin ok", str(self.inductor.current_margin_ok).lower(), ""),
        ]
        key_w = max(len(r[0]) for r in rows)
        val_w = max(len(r[1]) for r in rows)
        return "\n".join(f"{k:<{key_w}}  {v:>{val_w}}  {u}".rstrip()
                         for k, v, u in rows)


# ---------------------------------------------------------------------------
# core formulas
# ---------------------------------------------------------------------------


def energy_density(p: HkiProcess, derate: Optional[float] = None) -> float:
    """Recyclable energy per unit film area, J/m^2: half L-per-square times
    the square of the operating surface current density.  Width cancels, so
    the figure holds for any trace geometry."""
    d = p.derate if derate is None else derate
    _require(0 < d <= 1, "derate must be in (0, 1]")
    i = d * p.critical_current_per_width
    return 0.5 * p.sheet_inductance * i * i


def power_density_and_layers(p: HkiProcess, chip: ChipProfile) -> LayerPlan:
    """Per-layer recyclable power density at the chip's clock, and how many
    film layers cover the chip's own power density."""
    _require(chip.clock_frequency > 0, "clock frequency must be positive")
    per_layer = energy_density(p) * chip.clock_frequency
    layers = max(1, math.ceil(chip.power_density / per_layer))
    return LayerPlan(per_layer, layers)


def size_inductor(
    f: float,
    load: float,
    p: HkiProcess,
    amplitude: float,
    max_width: Optional[float] = None,
) -> InductorPlan:
    """Size one quad-ring inductor so the quadrature pair of a symmetric
    quad (resonance sqrt(2/(L C))) lands on the target clock.

    Parameters
    ----------
    f : float
        Target clock frequency, Hz.
    load : float
        Capacitance per clock node, farads.
    p : HkiProcess
        Film process.
    amplitude : float
        Clock amplitude, volts; sets the peak inductor current
        sqrt(2) A / (2 pi f L).
    max_width : float, optional
        Reject plans needing wider traces than this.

    Returns
    -------
    InductorPlan
    """
    _require(f > 0, "frequency must be positive")
    _require(load > 0, "load capacitance must be positive")
    _require(amplitude > 0, "amplitude must be positive")
    w0 = 2.0 * math.pi * f
    L = 2.0 / (w0 * w0 * load)
    squares = L / p.sheet_inductance
    i_pk = math.sqrt(2.0) * amplitude / (w0 * L)
    allowed_per_width = p.derate * p.critical_current_per_width
    needed = i_pk / allowed_per_width
    width = math.ceil(needed / p.min_width - 1e-12) * p.min_width
    width = max(width, p.min_width)
    if max_width is not None and width > max_width:
        raise PlannerError(
            f"no feasible trace width <= {max_width:g} m: "
            f"peak current {i_pk:g} A needs width {needed:g} m"
        )
    footprint = squares * width * (width + p.min_space)
    return InductorPlan(
        inductance=L,
        squares=squares,
        width=width,
        footprint=footprint,
        peak_current=i_pk,
        current_margin_ok=i_pk <= allowed_per_width * width * (1 + 1e-12),
    )


def plan_report(p: HkiProcess, chip: ChipProfile) -> PlanReport:
    """Full plan: densities, layer count and a sized inductor for the load
    the chip's power figure implies (C = P / (V^2 f), split across the four
    clock phases)."""
    lp = power_density_and_layers(p, chip)
    load = chip.power / (
        chip.supply_amplitude * chip.supply_amplitude * chip.clock_frequency
    ) / 4.0
    ind = size_inductor(chip.clock_frequency, load, p, chip.supply_amplitude)
    return PlanReport(
        process=p.name,
        chip=chip.name,
        energy_density=energy_density(p),
        power_density=lp.power_density,
        chip_power_density=chip.power_density,
        layers_required=lp.layers_required,
        load_per_phase=load,
        inductor=ind,
    )


# ---------------------------------------------------------------------------
# JSON profiles
# ---------------------------------------------------------------------------


def _profile_dir():
    from importlib.resources import files

    return files("powerclock") / "profiles"


def bundled_profiles() -> list:
    """Names of the profile files shipped with the package."""
    return sorted(p.name[: -len(".json")] for p in _profile_dir().iterdir()
                  if p.name.endswith(".json"))


def _load_json(source: Union[str, dict]) -> dict:
    if isinstance(source, dict):
        return source
    import os

    if os.path.exists(source):
        with open(source, "r", encoding="utf-8") as fh:
            return json.load(fh)
    bundled = _profile_dir() / f"{source}.json"
    try:
        return json.loads(bundled.read_text())
    except FileNotFoundError:
        raise PlannerError(
            f"no profile file or bundled profile named {source!r}"
        ) from None


def load_process(source: Union[str, dict]) -> HkiProcess:
    """Load a film process profile from a path, bundled name, or dict.

    Parameters
    ----------
    source : str or dict
        Path to a JSON file, name of a bundled profile (``seeqc``), or an
        already-parsed mapping.

    Returns
    -------
    HkiProcess
    """
    d = dict(_load_json(source))
    kind = d.pop("kind", "process")
    _require(kind == "process", f"profile {source!r} is a {kind}, not a process")
    try:
        return HkiProcess(**d)
    except TypeError as e:
        raise PlannerError(f"bad process profile {source!r}: {e}") from None


def load_chip(source: Union[str, dict]) -> ChipProfile:
    """Load a chip profile from a path, bundled name, or dict.

    Parameters
    ----------
    source : str or dict
        Path to a JSON file, name of a bundled profile (``horseridge``), or
        an already-parsed mapping.

    Returns
    -------
    ChipProfile
    """
    d = dict(_load_json(source))
    kind = d.pop("kind", "chip")
    _require(kind == "chip", f"profile {source!r} is a {kind}, not a chip")
    try:
        return ChipProfile(**d)
    except TypeError as e:
        raise PlannerError(f"bad chip profile {source!r}: {e}") from None
