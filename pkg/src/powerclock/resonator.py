"""Resonant clock tanks: the four-phase LC quad and its two-dimensional
array extension, plus eigenmode analysis and quadrature state preparation.

A quad is four nodes p0..p3 joined in a ring by equal inductors, each node
loaded by a capacitor to ground.  Its oscillation spectrum contains a
degenerate pair whose superposition rotates a voltage pattern around the
ring with 90 degree steps; starting in that state gives four sinusoidal
power-clock phases from one passive network.

The array tiles the same idea over an (n+1) x (n+1) grid of nodes with a
repeating p0,p1 / p3,p2 labeling.  Grid edges carry inductance L inside and
2L on the perimeter, which keeps the boundary cells closer to the interior
tiling (whether that makes the checkerboard pattern an exact eigenvector is
decided numerically; see quadrature_ic).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from .engine import Trace
from .netlist import (
    GROUND,
    Capacitor,
    Circuit,
    Inductor,
    Resistor,
    Sine,
    VSource,
    circuit,
    merge,
)

__all__ = [
    "QuadSpec",
    "ArraySpec",
    "Modes",
    "QuadratureModeError",
    "build_quad",
    "build_array",
    "lc_skeleton",
    "eigenmodes",
    "quadrature_mode",
    "quadrature_ic",
    "attach_drive",
    "mode_energies",
    "phase_class",
]

# phase class -> unit phasor exp(-i * class * 90deg), kept exact
_PHASOR = {0: 1.0 + 0.0j, 1: -1.0j, 2: -1.0 + 0.0j, 3: 1.0j}
# phase class -> cos(class * 90deg), the t=0 voltage profile
_COS = {0: 1.0, 1: 0.0, 2: -1.0, 3: 0.0}

MAX_PHASE_RESIDUAL_DEG = 5.0


class QuadratureModeError(Exception):
    """No eigenmode matches the checkerboard quadrature pattern closely
    enough.  Carries the best candidate's phase residual in degrees."""

    def __init__(self, residual_deg: float, detail: str = ""):
        self.residual_deg = residual_deg
        msg = (
            f"quadrature pattern is not an eigenmode of this network "
            f"(best phase residual {residual_deg:.2f} deg, limit "
            f"{MAX_PHASE_RESIDUAL_DEG:.1f} deg)"
        )
        if detail:
            msg += f"; {detail}"
        super().__init__(msg)


@dataclass(frozen=True)
class QuadSpec:
    """Four-node ring tank.  ``capacitance`` may be a single value or one
    per node (p0..p3)."""

    inductance: float
    capacitance: Union[float, Sequence[float]]
    amplitude: float = 1.0

    def caps(self) -> Tuple[float, float, float, float]:
        c = self.capacitance
        if isinstance(c, (int, float)):
            return (float(c),) * 4
        vals = tuple(float(x) for x in c)
        if len(vals) != 4:
            raise ValueError("capacitance needs 1 or 4 values")
        return vals


@dataclass(frozen=True)
class ArraySpec:
    """(n+1) x (n+1) grid tank with uniform node capacitance."""

    n: int
    inductance: float
    capacitance: float
    amplitude: float = 1.0


def phase_class(node: str) -> int:
    """Phase class 0..3 encoded in a power-clock node label ('p2...')."""
    node = node.lower()
    if len(node) >= 2 and node[0] == "p" and node[1] in "0123":
        return int(node[1])
    raise ValueError(f"node {node!r} carries no phase class")


def build_quad(spec: QuadSpec) -> Circuit:
    if spec.inductance <= 0:
        raise ValueError("inductance must be positive")
    caps = spec.caps()
    if any(c <= 0 for c in caps):
        raise ValueError("capacitance must be positive")
    elems = []
    for i in range(4):
        j = (i + 1) % 4
        elems.append(Inductor(f"l{i}{j}", f"p{i}", f"p{j}", spec.inductance))
    for i, c in enumerate(caps):
        elems.append(Capacitor(f"c{i}", f"p{i}", GROUND, c))
    return circuit(elems)


# class pattern over a 2x2 cell of grid coordinates (row, col)
_CELL = ((0, 1), (3, 2))


def _grid_node(r: int, c: int) -> str:
    return f"p{_CELL[r % 2][c % 2]}_r{r}c{c}"


def build_array(spec: ArraySpec) -> Circuit:
    """Grid of (n+1)^2 nodes; interior edges get L, perimeter edges 2L."""
    if spec.n < 1:
        raise ValueError("array needs n >= 1")
    if spec.inductance <= 0 or spec.capacitance <= 0:
        raise ValueError("component values must be positive")
    n = spec.n
    elems = []
    for r in range(n + 1):
        for c in range(n):
            val = 2.0 * spec.inductance if r in (0, n) else spec.inductance
            elems.append(
                Inductor(f"lh_r{r}c{c}", _grid_node(r, c), _grid_node(r, c + 1), val)
            )
    for r in range(n):
        for c in range(n + 1):
            val = 2.0 * spec.inductance if c in (0, n) else spec.inductance
            elems.append(
                Inductor(f"lv_r{r}c{c}", _grid_node(r, c), _grid_node(r + 1, c), val)
            )
    for r in range(n + 1):
        for c in range(n + 1):
            elems.append(
                Capacitor(f"c_r{r}c{c}", _grid_node(r, c), GROUND, spec.capacitance)
            )
    return circuit(elems)


def lc_skeleton(c: Circuit) -> Circuit:
    """Keep only inductors and capacitors (for mode analysis of a loaded
    circuit)."""
    keep = [e for e in c.elements if isinstance(e, (Inductor, Capacitor))]
    return circuit(keep)


# ---------------------------------------------------------------------------
# eigenmodes of the LC network
# ---------------------------------------------------------------------------


@dataclass
class Modes:
    """Oscillation modes sorted by frequency, shapes C-orthonormal."""

    omegas: np.ndarray  # rad/s, ascending
    shapes: np.ndarray  # (n_nodes, n_modes)
    nodes: tuple
    cmat: np.ndarray
    inductor_names: tuple
    inductor_pairs: tuple  # ((ia, ib), ...) indices into nodes, -1 = ground

    def shape(self, k: int) -> Dict[str, float]:
        return {n: float(self.shapes[i, k]) for i, n in enumerate(self.nodes)}

    def frequencies_hz(self) -> np.ndarray:
        return self.omegas / (2.0 * math.pi)


def _lc_matrices(c: Circuit):
    inductors = [e for e in c.elements if isinstance(e, Inductor)]
    caps = [e for e in c.elements if isinstance(e, Capacitor)]
    for e in c.elements:
        if not isinstance(e, (Inductor, Capacitor)):
            raise ValueError(
                f"eigenmodes needs a pure LC network; strip {e.name!r} first "
                "(see lc_skeleton)"
            )
    nodes = []
    seen = set()
    for e in c.elements:
        for n in (e.a, e.b):
            if n != GROUND and n not in seen:
                seen.add(n)
                nodes.append(n)
    idx = {n: i for i, n in enumerate(nodes)}
    idx[GROUND] = -1
    nn = len(nodes)
    gamma = np.zeros((nn, nn))
    cmat = np.zeros((nn, nn))

    def stamp(M, ia, ib, w):
        if ia >= 0:
            M[ia, ia] += w
        if ib >= 0:
            M[ib, ib] += w
        if ia >= 0 and ib >= 0:
            M[ia, ib] -= w
            M[ib, ia] -= w

    for e in inductors:
        stamp(gamma, idx[e.a], idx[e.b], 1.0 / e.henries)
    for e in caps:
        stamp(cmat, idx[e.a], idx[e.b], e.farads)

    for i, n in enumerate(nodes):
        if cmat[i, i] == 0.0:
            raise ValueError(
                f"node {n!r} has no capacitance; the mode problem is singular"
            )
    return nodes, idx, gamma, cmat, inductors


def eigenmodes(c: Circuit) -> Modes:
    """Solve the generalized problem Gamma x = omega^2 C x.

    Gamma is the inverse-inductance node Laplacian and C the capacitance
    matrix over non-ground nodes.  Shapes come back C-orthonormal; a node
    with capacitance but no inductor path simply yields a zero-frequency
    mode supported there.
    """
    nodes, idx, gamma, cmat, inductors = _lc_matrices(c)
    w, vecs = scipy.linalg.eigh(gamma, cmat)
    omegas = np.sqrt(np.clip(w, 0.0, None))
    pairs = tuple((idx[e.a], idx[e.b]) for e in inductors)
    return Modes(
        omegas=omegas,
        shapes=vecs,
        nodes=tuple(nodes),
        cmat=cmat,
        inductor_names=tuple(e.name for e in inductors),
        inductor_pairs=pairs,
    )


def _group_modes(omegas: np.ndarray):
    """Index groups of (near-)degenerate eigenfrequencies."""
    scale = max(float(omegas[-1]), 1e-300) if len(omegas) else 1.0
    groups = []
    current = [0]
    for i in range(1, len(omegas)):
        if omegas[i] - omegas[i - 1] <= 1e-9 * scale:
            current.append(i)
        else:
            groups.append(current)
            current = [i]
    if current:
        groups.append(current)
    return groups


def _quadrature_fit(c: Circuit, amplitude: float):
    modes = eigenmodes(c)
    classes = {n: phase_class(n) for n in modes.nodes}
    u = np.array([amplitude * _PHASOR[classes[n]] for n in modes.nodes])
    coeffs = modes.shapes.T @ (modes.cmat @ u)
    total = float(np.sum(np.abs(coeffs) ** 2))
    if total == 0.0:
        raise QuadratureModeError(90.0, "zero target pattern")
    best = None
    for grp in _group_modes(modes.omegas):
        omega = float(np.mean(modes.omegas[grp]))
        if omega <= 1e-12 * max(float(modes.omegas[-1]), 1e-300):
            continue  # a static mode cannot carry a rotating pattern
        frac = float(np.sum(np.abs(coeffs[grp]) ** 2)) / total
        if best is None or frac > best[1]:
            best = (omega, frac)
    if best is None:
        raise QuadratureModeError(90.0, "network has no oscillatory mode")
    omega, frac = best
    residual = math.degrees(math.acos(min(1.0, math.sqrt(frac))))
    return modes, u, omega, residual


def quadrature_mode(c: Circuit) -> Tuple[float, float]:
    """(omega_rad_s, phase_residual_deg) of the best quadrature candidate."""
    _, _, omega, residual = _quadrature_fit(c, 1.0)
    return omega, residual


def quadrature_ic(c: Circuit, amplitude: float) -> Circuit:
    """Set initial conditions that start the tank in its rotating state.

    Capacitor voltages get amplitude * cos(class * 90deg) exactly; inductor
    currents get the phasor-consistent value at t=0.  Raises
    :class:`QuadratureModeError` when the checkerboard pattern projects
    poorly onto any single eigenfrequency (residual above 5 degrees), which
    happens for asymmetric loads.
    """
    if amplitude == 0.0:
        elems = []
        for e in c.elements:
            if isinstance(e, (Capacitor, Inductor)):
                elems.append(replace(e, ic=0.0))
            else:
                elems.append(e)
        return circuit(elems, (), c.tran)

    modes, u, omega, residual = _quadrature_fit(c, amplitude)
    if residual > MAX_PHASE_RESIDUAL_DEG:
        raise QuadratureModeError(residual)

    v0 = {n: amplitude * _COS[phase_class(n)] for n in modes.nodes}
    v0[GROUND] = 0.0
    uc = {n: u[i] for i, n in enumerate(modes.nodes)}
    uc[GROUND] = 0.0 + 0.0j

    elems = []
    for e in c.elements:
        if isinstance(e, Capacitor):
            elems.append(replace(e, ic=v0[e.a] - v0[e.b]))
        elif isinstance(e, Inductor):
            du = uc[e.a] - uc[e.b]
            elems.append(replace(e, ic=du.imag / (omega * e.henries)))
        else:
            elems.append(e)
    return circuit(elems, (), c.tran)


# ---------------------------------------------------------------------------
# drive
# ---------------------------------------------------------------------------

_SCHEME_CLASSES = {"four_phase": (0, 1, 2, 3), "two_phase": (0, 1)}


def attach_drive(
    c: Circuit,
    scheme: str,
    amplitude: float,
    frequency: float,
    r_drive: float,
) -> Circuit:
    """Add one sine source in series with r_drive to every phase-labeled
    node of the driven classes.  four_phase drives all classes; two_phase
    drives only p0 and p1 (three wires counting ground), relying on the
    ring to carry p2 and p3.

    The source for class k is amplitude * cos(2 pi f t - k * 90deg), in
    phase with the quadrature initial state at t=0.
    """
    try:
        classes = _SCHEME_CLASSES[scheme]
    except KeyError:
        raise ValueError(f"unknown drive scheme {scheme!r}") from None
    if r_drive <= 0:
        raise ValueError("r_drive must be positive")
    if frequency <= 0:
        raise ValueError("drive frequency must be positive")
    extra = []
    for node in c.nodes:
        if node == GROUND:
            continue
        try:
            cls = phase_class(node)
        except ValueError:
            continue
        if cls not in classes:
            continue
        mid = f"drv_{node}"
        extra.append(
            VSource(
                f"vdrv_{node}",
                mid,
                GROUND,
                Sine(0.0, amplitude, frequency, 0.0, 0.0, 90.0 - 90.0 * cls),
            )
        )
        extra.append(Resistor(f"rdrv_{node}", mid, node, r_drive))
    if not extra:
        raise ValueError("circuit has no phase-labeled nodes to drive")
    return merge(c, circuit(extra))


# ---------------------------------------------------------------------------
# modal energy bookkeeping
# ---------------------------------------------------------------------------


def mode_energies(modes: Modes, tr: Trace) -> np.ndarray:
    """Per-mode energy time series, shape (n_samples, n_modes).

    In C-orthonormal coordinates q_k the capacitive energy is the modal
    kinetic term and the inductive energy the potential term:
    E_k = 0.5 * (qdot_k^2 + omega_k^2 q_k^2).  Summed over modes this equals
    the total LC stored energy for a pure LC network, except for any
    circulating (loop) inductor current, which projects onto no node mode.
    """
    vmat = np.vstack([tr.voltage(n) for n in modes.nodes])  # (nodes, T)
    p = modes.shapes.T @ (modes.cmat @ vmat)  # (modes, T)

    inj = np.zeros_like(vmat)
    for name, (ia, ib) in zip(modes.inductor_names, modes.inductor_pairs):
        i_l = tr.current(name)
        if ia >= 0:
            inj[ia] += i_l
        if ib >= 0:
            inj[ib] -= i_l
    pdot = -(modes.shapes.T @ inj)  # (modes, T)

    scale = max(float(modes.omegas[-1]), 1e-300)
    energies = 0.5 * p**2
    for k, om in enumerate(modes.omegas):
        if om > 1e-9 * scale:
            energies[k] += 0.5 * (pdot[k] / om) ** 2
    return energies.T
