"""Section-to-section return map, its linearization, and the impulse
feedback that stabilizes a rotation orbit.

Between crossings of the section the stick flows under the continuous
constraint controller. At each crossing the state deviation from the
orbit's fixed point is mapped through a gain to a corrective impulse,
realized as a high-gain force episode. The return map is linearized by
forward differences around the fixed point and the gain comes from a
discrete LQR design on that linear model.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dynamics import FullState, StickParams
from .errors import NotControllableError, NotPropellerError
from .linalg import (
    eigenvalues_dense,
    finite_difference_column,
    solve_dare,
    spectral_radius,
)
from .reduced import OrbitClass, OrbitSpec, ReducedState, classify_orbit, dq2_on_orbit
from .reduced import energy as reduced_energy
from .simulate import (
    SectionSpec,
    SimConfig,
    TrajectoryLog,
    high_gain_episode,
    integrate_to_angle,
    integrate_to_section,
)
from .vhc import VhcSpec, continuous_control, make_controller, state_on_manifold

__all__ = [
    "section_state",
    "full_from_section",
    "apply_impulse",
    "fixed_point",
    "poincare_map",
    "verify_fixed_point",
    "LinearizedMap",
    "linearize_map",
    "IcpmGains",
    "synthesize_gain",
    "stabilize_run",
]


def section_state(state: FullState) -> np.ndarray:
    """Reduce a full state on the section to z = [h_x, h_y, dh_x, dh_y, dtheta].

    theta is fixed by the section, so it carries no information there.
    """
    return np.array([state.hx, state.hy, state.dhx, state.dhy, state.dtheta])


def full_from_section(z, section: SectionSpec) -> FullState:
    z = np.asarray(z, dtype=float)
    return FullState(float(z[0]), float(z[1]), section.q2_star,
                     float(z[2]), float(z[3]), float(z[4]))


def apply_impulse(z, impulse: float, arm: float, section: SectionSpec,
                  p: StickParams) -> np.ndarray:
    """Instantaneous velocity jump from a force impulse at the given arm."""
    out = np.array(z, dtype=float, copy=True)
    out[2] += -math.sin(section.q2_star) / p.mass * impulse
    out[3] += math.cos(section.q2_star) / p.mass * impulse
    out[4] += impulse * arm / p.inertia
    return out


def fixed_point(orbit: OrbitSpec, section: SectionSpec, p: StickParams) -> np.ndarray:
    """Section state the orbit passes through, built in closed form."""
    if classify_orbit(orbit, p) is not OrbitClass.PROPELLER:
        raise NotPropellerError(
            "fixed point exists only for full-rotation orbits"
        )
    dq2 = dq2_on_orbit(section.q2_star, orbit, p)
    return section_state(state_on_manifold(section.q2_star, dq2, orbit.vhc))


def poincare_map(
    z,
    impulse: float,
    section: SectionSpec,
    vhc: VhcSpec,
    p: StickParams,
    cfg: SimConfig,
) -> np.ndarray:
    """One return of the section map under an idealized impulse.

    The impulse is applied as an instantaneous velocity jump at the arm
    the continuous controller commands at z, then the closed loop flows
    to the next crossing. The idealized jump is what the linearization
    differentiates; full runs realize impulses as high-gain episodes
    instead.
    """
    z = np.asarray(z, dtype=float)
    if impulse != 0.0:
        arm = continuous_control(full_from_section(z, section), vhc, p).arm
        z = apply_impulse(z, impulse, arm, section, p)
    controller = make_controller(vhc, p)
    crossing, _ = integrate_to_section(
        full_from_section(z, section), controller, section, cfg, p, vhc
    )
    return section_state(crossing)


def verify_fixed_point(z_star, section: SectionSpec, vhc: VhcSpec,
                       p: StickParams, cfg: SimConfig) -> float:
    """Max-norm residual of one impulse-free return from z_star."""
    mapped = poincare_map(z_star, 0.0, section, vhc, p, cfg)
    return float(np.max(np.abs(mapped - np.asarray(z_star, dtype=float))))


@dataclass(frozen=True)
class LinearizedMap:
    amat: np.ndarray  # 5x5, state part
    bvec: np.ndarray  # 5, impulse part
    eps1: float
    eps2: float
    r_star: float
    z_star: np.ndarray

    def to_dict(self) -> dict:
        return {
            "A": self.amat.tolist(),
            "B": self.bvec.tolist(),
            "eps1": self.eps1,
            "eps2": self.eps2,
            "r_star": self.r_star,
            "z_star": self.z_star.tolist(),
        }


def _map_task(args):
    z, impulse, section, vhc, p, cfg = args
    return poincare_map(z, impulse, section, vhc, p, cfg)


def linearize_map(
    z_star,
    section: SectionSpec,
    vhc: VhcSpec,
    p: StickParams,
    cfg: SimConfig,
    eps1: float = 1e-6,
    eps2: float = 1e-6,
    jobs: int = 1,
) -> LinearizedMap:
    """Forward-difference linearization of the return map at its fixed point.

    Columns of A use state perturbations eps1 * e_i; the impulse column B
    uses an impulse of eps2. The base value is pinned to z_star itself
    (the defining property of the fixed point), so the six map
    evaluations are independent and may run in parallel processes.

    Callers are expected to have checked verify_fixed_point(z_star) first;
    a stale z_star silently biases every column.
    """
    z_star = np.asarray(z_star, dtype=float)
    r_star = float(continuous_control(full_from_section(z_star, section), vhc, p).arm)

    if jobs > 1:
        tasks = []
        for i in range(5):
            z_pert = z_star.copy()
            z_pert[i] += eps1
            tasks.append((z_pert, 0.0, section, vhc, p, cfg))
        tasks.append((z_star, eps2, section, vhc, p, cfg))
        with ProcessPoolExecutor(max_workers=min(jobs, 6)) as pool:
            mapped = list(pool.map(_map_task, tasks))
        amat = np.column_stack(
            [(mapped[i] - z_star) / eps1 for i in range(5)]
        )
        bvec = (mapped[5] - z_star) / eps2
    else:
        flow = lambda z: poincare_map(z, 0.0, section, vhc, p, cfg)
        amat = np.column_stack(
            [
                finite_difference_column(flow, z_star, i, eps1, f0=z_star)
                for i in range(5)
            ]
        )
        bvec = (poincare_map(z_star, eps2, section, vhc, p, cfg) - z_star) / eps2

    return LinearizedMap(
        amat=amat, bvec=bvec, eps1=eps1, eps2=eps2, r_star=r_star, z_star=z_star
    )


@dataclass(frozen=True)
class IcpmGains:
    gain: np.ndarray  # 1x5 row K with I(k) = K e(k); A + B K is stable
    q_weight: np.ndarray
    r_weight: float
    closed_loop_spectral_radius: float
    open_loop_eigenvalues: np.ndarray
    controllability_sigma_min: float

    def to_dict(self) -> dict:
        return {
            "K": self.gain.tolist(),
            "Q": self.q_weight.tolist(),
            "R": self.r_weight,
            "closed_loop_spectral_radius": self.closed_loop_spectral_radius,
            "open_loop_eigenvalues": [
                [float(lam.real), float(lam.imag)]
                for lam in self.open_loop_eigenvalues
            ],
            "controllability_sigma_min": self.controllability_sigma_min,
        }


def controllability_min_singular_value(amat, bvec) -> float:
    """Smallest singular value of [B, AB, ..., A^4 B].

    Computed from the symmetric block matrix [[0, C'], [C, 0]], whose
    eigenvalues are +/- the singular values of C. Unlike the Gram matrix
    C'C, this resolves singular values down to roundoff of the largest
    one rather than its square.
    """
    a = np.asarray(amat, dtype=float)
    b = np.asarray(bvec, dtype=float).reshape(-1)
    cols = [b]
    for _ in range(a.shape[0] - 1):
        cols.append(a @ cols[-1])
    ctrb = np.column_stack(cols)
    n, m = ctrb.shape
    aug = np.zeros((n + m, n + m))
    aug[:m, m:] = ctrb.T
    aug[m:, :m] = ctrb
    return float(np.min(np.abs(eigenvalues_dense(aug))))


def synthesize_gain(lin: LinearizedMap, q=None, r: float = 2.0) -> IcpmGains:
    """LQR gain for the linearized return map.

    The Riccati solver returns K with u = -K x stabilizing; the impulse
    law is written I(k) = K e(k), so the sign is flipped here once and
    the reported closed loop is A + B K.

    The controllability gate rejects only roundoff-level rank deficiency.
    At the reference configuration the four transverse directions contract
    by ~0.067 per return, which drives the late Krylov columns nearly
    collinear (sigma_min ~ 1e-11 even though the pair is controllable);
    any looser absolute threshold would spuriously reject it. Weakly
    reachable but unstable directions are still caught, by the Riccati
    solver raising NotStabilizableError.
    """
    q = np.eye(5) if q is None else np.asarray(q, dtype=float)
    sigma_min = controllability_min_singular_value(lin.amat, lin.bvec)
    sigma_floor = 1e-14 * max(1.0, float(np.max(np.abs(lin.amat))),
                              float(np.max(np.abs(lin.bvec))))
    if sigma_min <= sigma_floor:
        raise NotControllableError(
            f"controllability matrix smallest singular value {sigma_min:.3e} "
            f"is at roundoff level (floor {sigma_floor:.3e})"
        )
    sol = solve_dare(lin.amat, lin.bvec.reshape(5, 1), q, r)
    gain = -sol.gain.reshape(-1)
    closed = lin.amat + np.outer(lin.bvec, gain)
    return IcpmGains(
        gain=gain,
        q_weight=q,
        r_weight=float(r),
        closed_loop_spectral_radius=spectral_radius(closed),
        open_loop_eigenvalues=eigenvalues_dense(lin.amat),
        controllability_sigma_min=sigma_min,
    )


def stabilize_run(
    initial: FullState,
    section: SectionSpec,
    vhc: VhcSpec,
    p: StickParams,
    cfg: SimConfig,
    rotations: int,
    z_star=None,
    gain=None,
    log: TrajectoryLog | None = None,
):
    """Flow through the given number of full rotations, correcting at each
    section crossing along the way.

    At crossing k the deviation e(k) = z(k) - z_star (measured before any
    correction) sets the impulse I(k) = gain . e(k), delivered as a
    high-gain episode at the arm the controller commands there. Episodes
    whose velocity jump would not exceed the eps3 band are skipped: the
    realization cannot resolve them. With gain or z_star None the run is
    impulse-free.

    The run spans exactly `rotations` revolutions of the unwrapped angle,
    which places one section crossing inside each revolution; the reported
    duration is the time to complete the final revolution, not the time of
    the last crossing. Returns (log, summary dict).
    """
    if log is None:
        log = TrajectoryLog()
    controller = make_controller(vhc, p)
    eps3 = cfg.high_gain.eps3
    z_star_arr = None if z_star is None else np.asarray(z_star, dtype=float)
    state = initial
    t = 0.0
    theta_end = float(initial.theta) + rotations * 2.0 * math.pi
    for k in range(1, rotations + 1):
        state, t = integrate_to_section(
            state, controller, section, cfg, p, vhc, log=log, t0=t
        )
        z = section_state(state)
        record = {
            "k": k,
            "t": float(t),
            "z": [float(v) for v in z],
            "energy": float(
                reduced_energy(ReducedState(state.theta, state.dtheta), vhc, p)
            ),
        }
        impulse = 0.0
        if z_star_arr is not None and gain is not None:
            e = z - z_star_arr
            impulse = float(np.dot(gain, e))
            record["e_norm"] = float(np.max(np.abs(e)))
        arm = float(continuous_control(state, vhc, p).arm)
        commanded = impulse * arm / p.inertia
        applied = bool(abs(commanded) > eps3)
        record.update(
            {
                "impulse": impulse,
                "arm": arm,
                "commanded_jump": commanded,
                "applied": applied,
            }
        )
        if applied:
            state, t, info = high_gain_episode(
                state, arm, state.dtheta + commanded, cfg, controller, p, vhc,
                log=log, t0=t,
            )
            record["episode"] = info
        log.add_crossing(record)
    state, t = integrate_to_angle(
        state, controller, theta_end, cfg, p, vhc, log=log, t0=t
    )
    summary = {
        "rotations": rotations,
        "duration": float(t),
        "final_time": float(t),
        "final_state": [float(v) for v in state],
        "final_energy": float(
            reduced_energy(ReducedState(state.theta, state.dtheta), vhc, p)
        ),
        "crossing_times": [c["t"] for c in log.crossings],
        "impulses": [c["impulse"] for c in log.crossings],
        "applied": [c["applied"] for c in log.crossings],
        "energies": [c["energy"] for c in log.crossings],
        "min_sampled_force": float(log.min_force)
        if log.min_force is not None else None,
    }
    return log, summary
