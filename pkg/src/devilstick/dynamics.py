"""Planar rigid-stick dynamics under a single normal force.

The stick is a rigid rod moving in a vertical plane. Its configuration is
the center of mass (h_x, h_y) and the orientation theta (unwrapped,
radians). The only actuation is a force F applied normal to the stick at
a signed distance r from the center of mass, so the torque is F * r and
the force direction rotates with the stick.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

GRAVITY_DEFAULT = 9.81


class FullState(NamedTuple):
    """Full planar state. theta accumulates rotations (never wrapped)."""

    hx: float
    hy: float
    theta: float
    dhx: float
    dhy: float
    dtheta: float


@dataclass(frozen=True)
class StickParams:
    mass: float = 0.1  # kg
    length: float = 0.5  # m
    inertia: float = 0.0021  # kg m^2, rounded value used by the experiments
    gravity: float = GRAVITY_DEFAULT  # m/s^2

    def __post_init__(self):
        for name in ("mass", "length", "inertia", "gravity"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise ValueError(f"{name} must be positive and finite, got {value}")
        nominal = self.mass * self.length**2 / 12.0
        if abs(self.inertia - nominal) > 0.25 * nominal:
            warnings.warn(
                f"inertia {self.inertia} deviates more than 25% from the uniform-rod "
                f"value {nominal:.6g}; check units",
                stacklevel=2,
            )


@dataclass(frozen=True)
class ControlInput:
    """Force magnitude and its application point along the stick.

    arm_feasible records whether r lies strictly inside the physical stick;
    it is diagnostic and never enforced by the dynamics.
    """

    force: float  # N
    arm: float  # m, signed offset from the center of mass
    arm_feasible: bool | None = None

    def with_feasibility(self, p: StickParams) -> "ControlInput":
        half = 0.5 * p.length
        return ControlInput(self.force, self.arm, -half < self.arm < half)


def accelerations(state: FullState, u: ControlInput, p: StickParams):
    """(d2h_x, d2h_y, d2theta) for the given state and control."""
    sin_t = math.sin(state.theta)
    cos_t = math.cos(state.theta)
    f = u.force
    return (
        -(sin_t / p.mass) * f,
        -p.gravity + (cos_t / p.mass) * f,
        f * u.arm / p.inertia,
    )


def standard_form_matrices(theta: float, p: StickParams):
    """Control-affine form q1'' = A + B u, q2'' = C + D u with u = [F, F r].

    Splitting the inputs as force and torque makes the translational block
    independent of r; all r dependence enters through the second input.
    """
    if not math.isfinite(theta):
        raise ValueError("theta must be finite")
    a = np.array([0.0, -p.gravity])
    b = np.array(
        [
            [-math.sin(theta) / p.mass, 0.0],
            [math.cos(theta) / p.mass, 0.0],
        ]
    )
    c = 0.0
    d = np.array([0.0, 1.0 / p.inertia])
    return a, b, c, d


def mechanical_energy(state: FullState, p: StickParams) -> float:
    """Kinetic plus gravitational potential energy of the free stick."""
    translational = 0.5 * p.mass * (state.dhx**2 + state.dhy**2)
    rotational = 0.5 * p.inertia * state.dtheta**2
    return translational + rotational + p.mass * p.gravity * state.hy
