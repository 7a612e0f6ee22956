"""Circular virtual constraint on the center of mass, and the continuous
controller that enforces it.

The constraint ties the center of mass to a circle of radius R phased to
the stick angle: q1 = Phi(q2) = R [cos(q2 - phi), sin(q2 - phi)]. The
controller feedback-linearizes the constraint error rho = q1 - Phi(q2)
so that rho'' = -kp rho - kd rho', which makes the constraint manifold
attractive and invariant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .dynamics import ControlInput, FullState, StickParams
from .errors import DegenerateForceError, SingularVhcError

SIN_PHI_FLOOR = 1e-9
FORCE_FLOOR = 1e-6  # N, below this no application point is defined


def _gain_matrix(value) -> np.ndarray:
    g = np.array(value, dtype=float)
    if g.ndim == 0:
        g = float(g) * np.eye(2)
    if g.shape != (2, 2):
        raise ValueError(f"gain must be scalar or 2x2, got shape {g.shape}")
    if abs(g[0, 1] - g[1, 0]) > 1e-12:
        raise ValueError("gain matrix must be symmetric")
    if g[0, 0] <= 0.0 or g[0, 0] * g[1, 1] - g[0, 1] * g[1, 0] <= 0.0:
        raise ValueError("gain matrix must be positive definite")
    return g


@dataclass(frozen=True, eq=False)
class VhcSpec:
    radius: float = 1.0  # m
    phase: float = math.pi / 2  # rad, in (-pi, pi], never 0 or pi
    kp: np.ndarray = field(default_factory=lambda: 40.0 * np.eye(2))
    kd: np.ndarray = field(default_factory=lambda: 5.5 * np.eye(2))

    def __post_init__(self):
        if not (math.isfinite(self.radius) and self.radius > 0.0):
            raise ValueError(f"radius must be positive, got {self.radius}")
        if not (-math.pi < self.phase <= math.pi):
            raise ValueError("phase must lie in (-pi, pi]")
        if abs(math.sin(self.phase)) < SIN_PHI_FLOOR:
            raise SingularVhcError(
                f"phase {self.phase} makes the constraint geometry singular"
            )
        object.__setattr__(self, "kp", _gain_matrix(self.kp))
        object.__setattr__(self, "kd", _gain_matrix(self.kd))


class ConstraintError(NamedTuple):
    rho: np.ndarray  # m, 2-vector
    rho_dot: np.ndarray  # m/s, 2-vector


def phi_and_derivatives(q2: float, spec: VhcSpec):
    """Constraint map Phi(q2) and its first two q2-derivatives.

    The second derivative is -Phi exactly (circle identity); it is
    returned rather than recomputed so callers cannot drift from it.
    """
    c = math.cos(q2 - spec.phase)
    s = math.sin(q2 - spec.phase)
    r = spec.radius
    phi = np.array([r * c, r * s])
    dphi = np.array([-r * s, r * c])
    return phi, dphi, -phi


def constraint_error(state: FullState, spec: VhcSpec) -> ConstraintError:
    phi, dphi, _ = phi_and_derivatives(state.theta, spec)
    rho = np.array([state.hx, state.hy]) - phi
    rho_dot = np.array([state.dhx, state.dhy]) - dphi * state.dtheta
    return ConstraintError(rho, rho_dot)


def state_on_manifold(q2: float, dq2: float, spec: VhcSpec) -> FullState:
    """Full state with the constraint and its velocity consequence exact."""
    phi, dphi, _ = phi_and_derivatives(q2, spec)
    return FullState(
        float(phi[0]), float(phi[1]), float(q2),
        float(dphi[0] * dq2), float(dphi[1] * dq2), float(dq2),
    )


def decoupling_matrix(q2: float, spec: VhcSpec, p: StickParams):
    """Input map of the constraint-error dynamics and its determinant.

    Returns (M, det) where M = B - Phi'(q2) D for u = [F, F r]. The
    determinant is (R sin(phase)) / (m J), independent of q2.
    """
    sin_phase = math.sin(spec.phase)
    if abs(sin_phase) < SIN_PHI_FLOOR:
        raise SingularVhcError("decoupling matrix is singular at this phase")
    sd = math.sin(q2 - spec.phase)
    cd = math.cos(q2 - spec.phase)
    m = np.array(
        [
            [-math.sin(q2) / p.mass, spec.radius * sd / p.inertia],
            [math.cos(q2) / p.mass, -spec.radius * cd / p.inertia],
        ]
    )
    det = spec.radius * sin_phase / (p.mass * p.inertia)
    return m, det


def make_controller(spec: VhcSpec, p: StickParams):
    """Closure state -> (F, F*r) evaluating the constraint controller.

    This is the integrator's hot path, so it works in scalars: the 2x2
    solve is written out via the analytic determinant, which is constant
    in q2 and bounded away from zero for any valid spec.
    """
    m_mass = p.mass
    inertia = p.inertia
    g = p.gravity
    radius = spec.radius
    phase = spec.phase
    kp11, kp12 = spec.kp[0, 0], spec.kp[0, 1]
    kp21, kp22 = spec.kp[1, 0], spec.kp[1, 1]
    kd11, kd12 = spec.kd[0, 0], spec.kd[0, 1]
    kd21, kd22 = spec.kd[1, 0], spec.kd[1, 1]
    sin = math.sin
    cos = math.cos

    def control(s):
        hx, hy, th, dhx, dhy, dth = s
        sd = sin(th - phase)
        cd = cos(th - phase)
        rho1 = hx - radius * cd
        rho2 = hy - radius * sd
        rd1 = dhx + radius * sd * dth
        rd2 = dhy - radius * cd * dth
        # target rho'' = -kp rho - kd rho'; move Phi'' q2'^2 and gravity across
        rhs1 = -radius * cd * dth * dth - kp11 * rho1 - kp12 * rho2 - kd11 * rd1 - kd12 * rd2
        rhs2 = g - radius * sd * dth * dth - kp21 * rho1 - kp22 * rho2 - kd21 * rd1 - kd22 * rd2
        m11 = -sin(th) / m_mass
        m12 = radius * sd / inertia
        m21 = cos(th) / m_mass
        m22 = -radius * cd / inertia
        det = m11 * m22 - m12 * m21
        force = (rhs1 * m22 - m12 * rhs2) / det
        torque = (m11 * rhs2 - m21 * rhs1) / det
        return force, torque

    return control


def continuous_control(state: FullState, spec: VhcSpec, p: StickParams) -> ControlInput:
    """Constraint controller output as a force and application point.

    Raises DegenerateForceError when the force magnitude is below
    FORCE_FLOOR, where no application point reproduces the torque.
    """
    force, torque = make_controller(spec, p)(state)
    if abs(force) < FORCE_FLOOR:
        raise DegenerateForceError(
            f"force {force:.3e} N is too small to define an application point"
        )
    return ControlInput(force, torque / force).with_feasibility(p)


def force_on_manifold(q2: float, dq2: float, spec: VhcSpec, p: StickParams) -> float:
    """Closed-form controller force when the constraint holds exactly."""
    g_over_r = p.gravity / spec.radius
    return (p.mass * spec.radius / math.sin(spec.phase)) * (
        dq2 * dq2 - g_over_r * math.sin(q2 - spec.phase)
    )


def arm_on_manifold(q2: float, dq2: float, spec: VhcSpec, p: StickParams) -> float:
    """Closed-form application point when the constraint holds exactly."""
    g_over_r = p.gravity / spec.radius
    num = dq2 * dq2 * math.cos(spec.phase) - g_over_r * math.sin(q2)
    den = dq2 * dq2 - g_over_r * math.sin(q2 - spec.phase)
    if abs(den) < 1e-12:
        raise DegenerateForceError("on-manifold force vanishes at this state")
    return (p.inertia / (p.mass * spec.radius)) * num / den


class FeasibilityMonitor:
    """Tracks contact-feasibility diagnostics along a trajectory.

    Two conditions are watched, never enforced: the controller force must
    keep one sign (it must not pass through zero, since the stick is only
    pushed), and the application point must stay inside the stick.
    """

    def __init__(self, spec: VhcSpec, p: StickParams):
        self.spec = spec
        self.params = p
        self.half_length = 0.5 * p.length
        self.force_sign_constant = True
        self.arm_always_inside = True
        self._sign = 0

    def update(self, force: float, arm: float) -> dict:
        sign = 1 if force > 0.0 else (-1 if force < 0.0 else 0)
        if sign == 0 or (self._sign != 0 and sign != self._sign):
            self.force_sign_constant = False
        if self._sign == 0:
            self._sign = sign
        inside = -self.half_length < arm < self.half_length
        if not inside:
            self.arm_always_inside = False
        return {
            "force_sign_constant_so_far": self.force_sign_constant,
            "arm_inside": inside,
        }

    def summary(self) -> dict:
        return {
            "force_sign_constant": self.force_sign_constant,
            "arm_always_inside": self.arm_always_inside,
        }


def contact_feasibility(state: FullState, spec: VhcSpec, p: StickParams) -> dict:
    """Pointwise feasibility check for a state assumed on the manifold.

    The sign condition dq2^2 > (g/R) sin(q2 - phase) is exactly where the
    on-manifold force crosses zero.
    """
    g_over_r = p.gravity / spec.radius
    sign_ok = state.dtheta**2 > g_over_r * math.sin(state.theta - spec.phase)
    if sign_ok:
        arm = arm_on_manifold(state.theta, state.dtheta, spec, p)
        inside = -0.5 * p.length < arm < 0.5 * p.length
    else:
        inside = False
    return {"force_sign_ok": sign_ok, "arm_inside": inside}
