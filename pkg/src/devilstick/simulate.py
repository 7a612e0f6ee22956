"""Closed-loop time integration with section-crossing detection.

The integrator is fixed-step classical RK4 over the 6-state
(h_x, h_y, theta, dh_x, dh_y, dtheta), with the continuous controller
re-evaluated at every stage. Section crossings (theta mod 2pi passing a
target angle with positive rate) are localized by bisecting the step that
bracketed the crossing. Impulsive velocity changes are realized as brief
high-gain force episodes, not as state jumps.

States travel through the hot loop as plain tuples; only values handed
back to callers are wrapped in FullState.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .dynamics import FullState, StickParams
from .errors import EpisodeTimeoutError, NoCrossingError, NonFiniteStateError
from .reduced import ReducedState
from .reduced import energy as reduced_energy
from .vhc import FORCE_FLOOR, VhcSpec

TAU = math.tau


@dataclass(frozen=True)
class SectionSpec:
    """Crossing surface: theta mod 2pi equals q2_star with dtheta > 0."""

    q2_star: float = math.pi / 6

    def __post_init__(self):
        if not 0.0 <= self.q2_star < TAU:
            raise ValueError("q2_star must lie in [0, 2pi)")


@dataclass(frozen=True)
class HighGainConfig:
    mu: float = 5e-4  # s, velocity-error decay constant of the episode
    eps3: float = 1e-3  # rad/s, band inside which the episode may end
    max_duration: float = 0.1  # s of simulated time before giving up


@dataclass(frozen=True)
class SimConfig:
    step_size: float = 1e-5  # s
    event_tolerance: float = 1e-13  # s, final bisection bracket width
    max_time: float = 5.0  # s budget for reaching the next crossing
    log_stride: int = 20  # record every Nth step
    high_gain: HighGainConfig = field(default_factory=HighGainConfig)

    def __post_init__(self):
        if self.step_size <= 0.0:
            raise ValueError("step_size must be positive")
        if not 0.0 < self.event_tolerance <= self.step_size:
            raise ValueError("event_tolerance must be in (0, step_size]")
        if self.log_stride < 1:
            raise ValueError("log_stride must be at least 1")


class TrajectoryLog:
    """Uniformly strided samples plus one record per section crossing."""

    CSV_COLUMNS = (
        "t",
        "h_x",
        "h_y",
        "theta",
        "dh_x",
        "dh_y",
        "dtheta",
        "F",
        "r",
        "rho1",
        "rho2",
        "E",
    )

    def __init__(self):
        self.samples: list[tuple] = []
        self.crossings: list[dict] = []
        self.min_force = math.inf
        self.max_force = -math.inf

    def add_sample(self, t, state, force, arm, rho1, rho2, e_reduced):
        if self.samples and t <= self.samples[-1][0]:
            return
        self.samples.append((t, *state, force, arm, rho1, rho2, e_reduced))
        if force < self.min_force:
            self.min_force = force
        if force > self.max_force:
            self.max_force = force

    def add_crossing(self, record: dict):
        self.crossings.append(record)

    def write_csv(self, path, include_wrapped_theta: bool = False):
        columns = self.CSV_COLUMNS + (
            ("theta_wrapped",) if include_wrapped_theta else ()
        )
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(columns) + "\n")
            for row in self.samples:
                cells = [format(v, ".12g") for v in row]
                if include_wrapped_theta:
                    cells.append(format(wrap_angle(row[3]), ".12g"))
                fh.write(",".join(cells) + "\n")

    def write_crossings_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.crossings, fh, indent=2)
            fh.write("\n")


def wrap_angle(x: float) -> float:
    """Map an angle to (-pi, pi]."""
    w = math.remainder(x, TAU)
    if w <= -math.pi:
        w += TAU
    return w


def make_rhs(control, p: StickParams):
    """Derivative closure for a control law returning (force, torque)."""
    mass = p.mass
    inertia = p.inertia
    g = p.gravity
    sin = math.sin
    cos = math.cos

    def rhs(s):
        force, torque = control(s)
        th = s[2]
        if not math.isfinite(th):
            # catches divergence at the stage level, before sin/cos
            # turn it into a bare math domain error
            raise NonFiniteStateError(f"state became non-finite: {s}")
        return (
            s[3],
            s[4],
            s[5],
            -(sin(th) / mass) * force,
            -g + (cos(th) / mass) * force,
            torque / inertia,
        )

    return rhs


def _rk4(s, rhs, dt):
    a1, a2, a3, a4, a5, a6 = s
    k1 = rhs(s)
    h = 0.5 * dt
    k2 = rhs(
        (a1 + h * k1[0], a2 + h * k1[1], a3 + h * k1[2],
         a4 + h * k1[3], a5 + h * k1[4], a6 + h * k1[5])
    )
    k3 = rhs(
        (a1 + h * k2[0], a2 + h * k2[1], a3 + h * k2[2],
         a4 + h * k2[3], a5 + h * k2[4], a6 + h * k2[5])
    )
    k4 = rhs(
        (a1 + dt * k3[0], a2 + dt * k3[1], a3 + dt * k3[2],
         a4 + dt * k3[3], a5 + dt * k3[4], a6 + dt * k3[5])
    )
    w = dt / 6.0
    return (
        a1 + w * (k1[0] + 2.0 * (k2[0] + k3[0]) + k4[0]),
        a2 + w * (k1[1] + 2.0 * (k2[1] + k3[1]) + k4[1]),
        a3 + w * (k1[2] + 2.0 * (k2[2] + k3[2]) + k4[2]),
        a4 + w * (k1[3] + 2.0 * (k2[3] + k3[3]) + k4[3]),
        a5 + w * (k1[4] + 2.0 * (k2[4] + k3[4]) + k4[4]),
        a6 + w * (k1[5] + 2.0 * (k2[5] + k3[5]) + k4[5]),
    )


def _check_finite(s):
    for v in s:
        if not math.isfinite(v):
            raise NonFiniteStateError(f"state became non-finite: {s}")


def rk4_step(state: FullState, controller, p: StickParams, dt: float) -> FullState:
    """One classical RK4 step under the given control law."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    out = _rk4(tuple(state), make_rhs(controller, p), dt)
    _check_finite(out)
    return FullState(*out)


class _Sampler:
    """Shared sampling of (state, control, constraint error, E) into a log."""

    def __init__(self, log: TrajectoryLog | None, control, spec: VhcSpec,
                 p: StickParams):
        self.log = log
        self.control = control
        self.spec = spec
        self.params = p

    def record(self, t, s):
        if self.log is None:
            return
        force, torque = self.control(s)
        arm = torque / force if abs(force) > FORCE_FLOOR else math.nan
        radius, phase = self.spec.radius, self.spec.phase
        cd = math.cos(s[2] - phase)
        sd = math.sin(s[2] - phase)
        e_val = reduced_energy(ReducedState(s[2], s[5]), self.spec, self.params)
        self.log.add_sample(
            t, s, force, arm,
            s[0] - radius * cd, s[1] - radius * sd, e_val,
        )


def integrate_to_section(
    state: FullState,
    controller,
    section: SectionSpec,
    cfg: SimConfig,
    p: StickParams,
    spec: VhcSpec,
    log: TrajectoryLog | None = None,
    t0: float = 0.0,
):
    """Integrate until theta mod 2pi next crosses the section going up.

    Returns (FullState at the crossing, crossing time). A start exactly on
    the section does not count as a crossing; the search always moves
    forward in time. Raises NoCrossingError after cfg.max_time of
    simulated time.
    """
    rhs = make_rhs(controller, p)
    sampler = _Sampler(log, controller, spec, p)
    dt = cfg.step_size
    stride = cfg.log_stride
    q2_star = section.q2_star
    s = tuple(state)
    t = t0
    g_prev = wrap_angle(s[2] - q2_star)
    sampler.record(t, s)
    deadline = t0 + cfg.max_time
    steps = 0
    while True:
        s_new = _rk4(s, rhs, dt)
        t_new = t + dt
        g_new = wrap_angle(s_new[2] - q2_star)
        if g_prev < 0.0 <= g_new and (g_new - g_prev) < math.pi and s_new[5] > 0.0:
            lo, hi = 0.0, dt
            while hi - lo > cfg.event_tolerance:
                mid = 0.5 * (lo + hi)
                g_mid = wrap_angle(_rk4(s, rhs, mid)[2] - q2_star)
                if g_mid < 0.0:
                    lo = mid
                else:
                    hi = mid
            s_cross = _rk4(s, rhs, hi)
            t_cross = t + hi
            _check_finite(s_cross)
            sampler.record(t_cross, s_cross)
            return FullState(*s_cross), t_cross
        s, t, g_prev = s_new, t_new, g_new
        steps += 1
        if steps % stride == 0:
            _check_finite(s)
            sampler.record(t, s)
        if t >= deadline:
            raise NoCrossingError(
                f"no section crossing within {cfg.max_time} s of simulated time"
            )


def integrate_to_angle(
    state: FullState,
    controller,
    theta_target: float,
    cfg: SimConfig,
    p: StickParams,
    spec: VhcSpec,
    log: TrajectoryLog | None = None,
    t0: float = 0.0,
):
    """Integrate until the unwrapped angle reaches theta_target (rising).

    Used to finish a run at a whole number of rotations after the last
    section crossing. Returns the state unchanged when theta is already
    at or past the target. Raises NoCrossingError after cfg.max_time.
    """
    if state.theta >= theta_target:
        return state, t0
    rhs = make_rhs(controller, p)
    sampler = _Sampler(log, controller, spec, p)
    dt = cfg.step_size
    s = tuple(state)
    t = t0
    deadline = t0 + cfg.max_time
    steps = 0
    while True:
        s_new = _rk4(s, rhs, dt)
        t_new = t + dt
        if s_new[2] >= theta_target:
            lo, hi = 0.0, dt
            while hi - lo > cfg.event_tolerance:
                mid = 0.5 * (lo + hi)
                if _rk4(s, rhs, mid)[2] < theta_target:
                    lo = mid
                else:
                    hi = mid
            s_end = _rk4(s, rhs, hi)
            _check_finite(s_end)
            sampler.record(t + hi, s_end)
            return FullState(*s_end), t + hi
        s, t = s_new, t_new
        steps += 1
        if steps % cfg.log_stride == 0:
            _check_finite(s)
            sampler.record(t, s)
        if t >= deadline:
            raise NoCrossingError(
                f"angle did not reach target within {cfg.max_time} s"
            )


def high_gain_episode(
    state: FullState,
    r_k: float,
    dq2_des: float,
    cfg: SimConfig,
    controller,
    p: StickParams,
    spec: VhcSpec,
    log: TrajectoryLog | None = None,
    t0: float = 0.0,
):
    """Drive dtheta to dq2_des with a stiff force at the frozen arm r_k.

    The added force (inertia / (mu * r_k)) * (dq2_des - dtheta) acts at
    r_k on top of the continuous controller, whose own output keeps being
    evaluated at the current state. The episode does not stop at the eps3
    band edge: quitting there would leave a bias the size of eps3 in every
    delivered jump, which the crossing feedback then has to spend extra
    impulses correcting. It rides the decay until the error changes sign
    ("zero-cross") or stops shrinking inside the band ("stall"), so the
    exit error sits at the resolution floor of the decay rather than at
    eps3. Returns (exit FullState, exit time, info dict).

    The torque the underlying controller produces while the stiff force
    is active biases the trackable error by about mu * torque / inertia.
    Commanding a jump large enough to push that bias past eps3 leaves the
    error parked outside the exit band, which ends in EpisodeTimeoutError;
    jumps the section feedback commands in practice sit well below that.
    """
    if abs(r_k) <= FORCE_FLOOR:
        raise ValueError("episode arm r_k is too close to zero")
    hg = cfg.high_gain
    err0 = dq2_des - state.dtheta
    info = {
        "commanded": float(err0),
        "duration": 0.0,
        "delivered": 0.0,
        "exit": "immediate",
        "min_force": math.inf,
        "max_force": -math.inf,
    }
    if abs(err0) <= hg.eps3:
        info["min_force"] = info["max_force"] = float(controller(tuple(state))[0])
        return state, t0, info

    stiffness = p.inertia / (hg.mu * r_k)

    def total_control(s):
        force, torque = controller(s)
        f_hg = stiffness * (dq2_des - s[5])
        return force + f_hg, torque + f_hg * r_k

    rhs = make_rhs(total_control, p)
    sampler = _Sampler(log, total_control, spec, p)
    dt = cfg.step_size
    sign = 1.0 if err0 > 0.0 else -1.0
    prev_mag = abs(err0)
    s = tuple(state)
    t = t0
    min_f = math.inf
    max_f = -math.inf
    steps = 0
    while True:
        s = _rk4(s, rhs, dt)
        t += dt
        force_now = total_control(s)[0]
        if force_now < min_f:
            min_f = force_now
        if force_now > max_f:
            max_f = force_now
        steps += 1
        if steps % cfg.log_stride == 0:
            _check_finite(s)
            sampler.record(t, s)
        err = dq2_des - s[5]
        mag = abs(err)
        if err * sign <= 0.0:
            info["exit"] = "zero-cross"
            break
        if mag <= hg.eps3 and mag >= prev_mag:
            info["exit"] = "stall"
            break
        prev_mag = mag
        if t - t0 > hg.max_duration:
            raise EpisodeTimeoutError(
                f"velocity error still {err:.3e} after {hg.max_duration} s"
            )
    _check_finite(s)
    sampler.record(t, s)
    info["duration"] = float(t - t0)
    info["delivered"] = float(s[5] - state.dtheta)
    info["min_force"] = float(min_f)
    info["max_force"] = float(max_f)
    return FullState(*s), t, info
