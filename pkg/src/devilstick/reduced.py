"""One-degree-of-freedom dynamics of the stick angle on the constraint
manifold, its conserved energy-like integral, and orbit classification.

Once the circular constraint holds exactly, the angle q2 obeys
q2'' = -(g sin q2)/(R sin phase) + cot(phase) q2'^2. This flow admits an
integral of motion E built from a state-dependent reduced mass M(q2) and
potential P(q2). For phase = +/- pi/2 the flow is exactly a pendulum and
E level sets above the potential maximum are full-rotation orbits.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

from .dynamics import StickParams
from .errors import BelowPotentialError, NotPropellerError, SingularVhcError
from .vhc import SIN_PHI_FLOOR, VhcSpec

HALF_PI = math.pi / 2


class ReducedState(NamedTuple):
    q2: float  # rad, unwrapped
    dq2: float  # rad/s


@dataclass(frozen=True)
class OrbitSpec:
    """Level set E = energy of the reduced flow, on a given constraint."""

    energy: float
    vhc: VhcSpec


class OrbitClass(enum.Enum):
    PROPELLER = "propeller"
    OSCILLATION = "oscillation"
    SEPARATRIX = "separatrix"
    APERIODIC = "aperiodic"


def _cot_phase(spec: VhcSpec) -> float:
    """cot(phase), exactly zero at phase = +/- pi/2.

    The zero is structural: float cos(pi/2) is ~6e-17, which would make
    the reduced mass spuriously drift over many rotations.
    """
    if spec.phase == HALF_PI or spec.phase == -HALF_PI:
        return 0.0
    s = math.sin(spec.phase)
    if abs(s) < SIN_PHI_FLOOR:
        raise SingularVhcError("reduced dynamics undefined at this phase")
    return math.cos(spec.phase) / s


def reduced_accel(s: ReducedState, vhc: VhcSpec, p: StickParams) -> float:
    sin_phase = math.sin(vhc.phase)
    if abs(sin_phase) < SIN_PHI_FLOOR:
        raise SingularVhcError("reduced dynamics undefined at this phase")
    cot = _cot_phase(vhc)
    return -(p.gravity * math.sin(s.q2)) / (vhc.radius * sin_phase) + cot * s.dq2 * s.dq2


def reduced_mass(q2: float, vhc: VhcSpec) -> float:
    return math.exp(-2.0 * q2 * _cot_phase(vhc))


def reduced_potential(q2: float, vhc: VhcSpec, p: StickParams) -> float:
    cot = _cot_phase(vhc)
    scale = math.exp(-2.0 * q2 * cot)
    denom = vhc.radius * math.sin(vhc.phase) * (4.0 * cot * cot + 1.0)
    return -p.gravity * scale * (2.0 * math.sin(q2) * cot + math.cos(q2)) / denom


def energy(s: ReducedState, vhc: VhcSpec, p: StickParams) -> float:
    """Integral of motion of the reduced flow.

    For phase = pi/2 this is the pendulum energy q2'^2/2 - (g/R) cos q2;
    in general the kinetic term carries the reduced mass M(q2).
    """
    return 0.5 * reduced_mass(s.q2, vhc) * s.dq2 * s.dq2 + reduced_potential(
        s.q2, vhc, p
    )


def potential_peak(vhc: VhcSpec, p: StickParams) -> float:
    """Separatrix level: for phase = +/- pi/2 this is g/R at q2 = pi."""
    if _cot_phase(vhc) != 0.0:
        raise NotPropellerError("no closed orbits exist off phase = +/- pi/2")
    return p.gravity / vhc.radius


def classify_orbit(spec: OrbitSpec, p: StickParams) -> OrbitClass:
    """Structural first: any phase with cot != 0 has no closed orbits."""
    if _cot_phase(spec.vhc) != 0.0:
        return OrbitClass.APERIODIC
    peak = potential_peak(spec.vhc, p)
    if abs(spec.energy - peak) <= 1e-9:
        return OrbitClass.SEPARATRIX
    return OrbitClass.PROPELLER if spec.energy > peak else OrbitClass.OSCILLATION


def dq2_on_orbit(q2: float, spec: OrbitSpec, p: StickParams) -> float:
    """Positive-branch angular rate on the orbit at the given angle."""
    pot = reduced_potential(q2, spec.vhc, p)
    if spec.energy < pot:
        raise BelowPotentialError(
            f"energy {spec.energy} is below the potential {pot:.6f} at q2 = {q2}"
        )
    return math.sqrt(2.0 * (spec.energy - pot) / reduced_mass(q2, spec.vhc))
