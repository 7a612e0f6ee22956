"""Config-driven experiment runner and report comparison.

A scenario is a JSON file selecting a mode and the physical/controller
settings. Flow modes (stabilize, continuous-only, aperiodic) produce a
trajectory CSV, a crossings JSON and a report JSON; analysis modes
(linearize, gain) produce a report JSON only. Reports can be compared
against a reference file that carries its own per-quantity tolerances.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .dynamics import FullState, StickParams
from .errors import ConfigError, DevilstickError
from .reduced import OrbitSpec, ReducedState
from .reduced import energy as reduced_energy
from .simulate import HighGainConfig, SectionSpec, SimConfig, TrajectoryLog
from .stabilize import (
    fixed_point,
    linearize_map,
    stabilize_run,
    synthesize_gain,
    verify_fixed_point,
)
from .vhc import VhcSpec, state_on_manifold

MODES = ("stabilize", "continuous-only", "aperiodic", "linearize", "gain")
FLOW_MODES = ("stabilize", "continuous-only", "aperiodic")
OUT_DIR_ENV = "DEVILSTICK_OUT_DIR"


@dataclass(frozen=True)
class IcpmSettings:
    q_weight: np.ndarray = field(default_factory=lambda: np.eye(5))
    r_weight: float = 2.0
    eps1: float = 1e-6
    eps2: float = 1e-6
    eps_sweep: tuple = ()
    gain: np.ndarray | None = None  # explicit row overrides synthesis


@dataclass(frozen=True)
class ScenarioConfig:
    mode: str
    stick: StickParams
    vhc: VhcSpec
    section: SectionSpec
    sim: SimConfig
    icpm: IcpmSettings
    orbit_energy: float | None
    initial_state: FullState | None
    rotations: int

    def to_dict(self) -> dict:
        """Canonical form: parse(to_dict()) reproduces this config."""
        out = {
            "mode": self.mode,
            "stick": {
                "mass": self.stick.mass,
                "length": self.stick.length,
                "inertia": self.stick.inertia,
                "gravity": self.stick.gravity,
            },
            "vhc": {
                "radius": self.vhc.radius,
                "phase": self.vhc.phase,
                "kp": self.vhc.kp.tolist(),
                "kd": self.vhc.kd.tolist(),
            },
            "section": {"q2_star": self.section.q2_star},
            "sim": {
                "step_size": self.sim.step_size,
                "event_tolerance": self.sim.event_tolerance,
                "max_time": self.sim.max_time,
                "log_stride": self.sim.log_stride,
                "mu": self.sim.high_gain.mu,
                "eps3": self.sim.high_gain.eps3,
                "episode_max_duration": self.sim.high_gain.max_duration,
            },
            "icpm": {
                "q_weight": self.icpm.q_weight.tolist(),
                "r_weight": self.icpm.r_weight,
                "eps1": self.icpm.eps1,
                "eps2": self.icpm.eps2,
                "eps_sweep": list(self.icpm.eps_sweep),
                "gain": None if self.icpm.gain is None else self.icpm.gain.tolist(),
            },
            "rotations": self.rotations,
        }
        if self.orbit_energy is not None:
            out["orbit"] = {"energy": self.orbit_energy}
        if self.initial_state is not None:
            out["initial_state"] = list(self.initial_state)
        return out


def _require_keys(section: dict, allowed: set, where: str):
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(
            f"{where}: unknown key(s) {sorted(unknown)}; allowed: {sorted(allowed)}"
        )


def _number(raw, where, positive=False):
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {raw!r}")
    value = float(raw)
    if not math.isfinite(value):
        raise ConfigError(f"{where}: must be finite")
    if positive and value <= 0.0:
        raise ConfigError(f"{where}: must be positive, got {value}")
    return value


def _vector(raw, length, where):
    if not isinstance(raw, (list, tuple)) or len(raw) != length:
        raise ConfigError(f"{where}: expected a list of {length} numbers")
    return [_number(v, f"{where}[{i}]") for i, v in enumerate(raw)]


def parse_scenario(source) -> ScenarioConfig:
    """Validate a config from a dict, JSON text path, or file object.

    Every section rejects keys it does not know; a typo never silently
    falls back to a default.
    """
    if isinstance(source, dict):
        raw = source
    else:
        try:
            with open(source, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}"
            ) from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")

    _require_keys(
        raw,
        {
            "mode", "stick", "vhc", "section", "sim", "icpm", "orbit",
            "initial_state", "initial_reduced", "rotations",
        },
        "config",
    )
    mode = raw.get("mode")
    if mode not in MODES:
        raise ConfigError(f"mode: expected one of {MODES}, got {mode!r}")

    stick_raw = raw.get("stick", {})
    _require_keys(stick_raw, {"mass", "length", "inertia", "gravity"}, "stick")
    try:
        stick = StickParams(
            mass=_number(stick_raw.get("mass", 0.1), "stick.mass", positive=True),
            length=_number(stick_raw.get("length", 0.5), "stick.length", positive=True),
            inertia=_number(
                stick_raw.get("inertia", 0.0021), "stick.inertia", positive=True
            ),
            gravity=_number(
                stick_raw.get("gravity", 9.81), "stick.gravity", positive=True
            ),
        )
    except ValueError as exc:
        raise ConfigError(f"stick: {exc}") from exc

    vhc_raw = raw.get("vhc", {})
    _require_keys(vhc_raw, {"radius", "phase", "kp", "kd"}, "vhc")
    try:
        vhc = VhcSpec(
            radius=_number(vhc_raw.get("radius", 1.0), "vhc.radius", positive=True),
            phase=_number(vhc_raw.get("phase", math.pi / 2), "vhc.phase"),
            kp=vhc_raw.get("kp", 40.0),
            kd=vhc_raw.get("kd", 5.5),
        )
    except (ValueError, DevilstickError) as exc:
        raise ConfigError(f"vhc: {exc}") from exc

    section_raw = raw.get("section", {})
    _require_keys(section_raw, {"q2_star"}, "section")
    try:
        section = SectionSpec(
            q2_star=_number(section_raw.get("q2_star", math.pi / 6), "section.q2_star")
        )
    except ValueError as exc:
        raise ConfigError(f"section: {exc}") from exc

    sim_raw = raw.get("sim", {})
    _require_keys(
        sim_raw,
        {
            "step_size", "event_tolerance", "max_time", "log_stride",
            "mu", "eps3", "episode_max_duration",
        },
        "sim",
    )
    log_stride = sim_raw.get("log_stride", 20)
    if isinstance(log_stride, bool) or not isinstance(log_stride, int):
        raise ConfigError("sim.log_stride: expected an integer")
    try:
        sim = SimConfig(
            step_size=_number(
                sim_raw.get("step_size", 1e-5), "sim.step_size", positive=True
            ),
            event_tolerance=_number(
                sim_raw.get("event_tolerance", 1e-13),
                "sim.event_tolerance",
                positive=True,
            ),
            max_time=_number(
                sim_raw.get("max_time", 5.0), "sim.max_time", positive=True
            ),
            log_stride=log_stride,
            high_gain=HighGainConfig(
                mu=_number(sim_raw.get("mu", 5e-4), "sim.mu", positive=True),
                eps3=_number(sim_raw.get("eps3", 1e-3), "sim.eps3", positive=True),
                max_duration=_number(
                    sim_raw.get("episode_max_duration", 0.1),
                    "sim.episode_max_duration",
                    positive=True,
                ),
            ),
        )
    except ValueError as exc:
        raise ConfigError(f"sim: {exc}") from exc

    icpm_raw = raw.get("icpm", {})
    _require_keys(
        icpm_raw,
        {"q_weight", "r_weight", "eps1", "eps2", "eps_sweep", "gain"},
        "icpm",
    )
    q_raw = icpm_raw.get("q_weight", 1.0)
    if isinstance(q_raw, (int, float)) and not isinstance(q_raw, bool):
        q_weight = float(q_raw) * np.eye(5)
        if q_raw <= 0:
            raise ConfigError("icpm.q_weight: must be positive")
    else:
        rows = q_raw
        if not isinstance(rows, list) or len(rows) != 5:
            raise ConfigError("icpm.q_weight: expected a scalar or 5x5 matrix")
        q_weight = np.array(
            [_vector(row, 5, f"icpm.q_weight[{i}]") for i, row in enumerate(rows)]
        )
    sweep_raw = icpm_raw.get("eps_sweep", [])
    if not isinstance(sweep_raw, list):
        raise ConfigError("icpm.eps_sweep: expected a list of numbers")
    eps_sweep = tuple(
        _number(v, f"icpm.eps_sweep[{i}]", positive=True)
        for i, v in enumerate(sweep_raw)
    )
    gain_raw = icpm_raw.get("gain")
    gain = None if gain_raw is None else np.array(
        _vector(gain_raw, 5, "icpm.gain")
    )
    icpm = IcpmSettings(
        q_weight=q_weight,
        r_weight=_number(icpm_raw.get("r_weight", 2.0), "icpm.r_weight", positive=True),
        eps1=_number(icpm_raw.get("eps1", 1e-6), "icpm.eps1", positive=True),
        eps2=_number(icpm_raw.get("eps2", 1e-6), "icpm.eps2", positive=True),
        eps_sweep=eps_sweep,
        gain=gain,
    )

    orbit_energy = None
    if "orbit" in raw:
        _require_keys(raw["orbit"], {"energy"}, "orbit")
        orbit_energy = _number(raw["orbit"].get("energy"), "orbit.energy")

    initial_state = None
    if "initial_state" in raw and "initial_reduced" in raw:
        raise ConfigError("give initial_state or initial_reduced, not both")
    if "initial_state" in raw:
        initial_state = FullState(*_vector(raw["initial_state"], 6, "initial_state"))
    elif "initial_reduced" in raw:
        q2, dq2 = _vector(raw["initial_reduced"], 2, "initial_reduced")
        initial_state = state_on_manifold(q2, dq2, vhc)

    rotations = raw.get("rotations", 8)
    if isinstance(rotations, bool) or not isinstance(rotations, int) or rotations < 1:
        raise ConfigError("rotations: expected a positive integer")

    if mode in FLOW_MODES and initial_state is None:
        raise ConfigError(f"mode {mode!r} requires initial_state or initial_reduced")
    if mode in ("stabilize", "linearize", "gain") and orbit_energy is None:
        raise ConfigError(f"mode {mode!r} requires orbit.energy")

    return ScenarioConfig(
        mode=mode,
        stick=stick,
        vhc=vhc,
        section=section,
        sim=sim,
        icpm=icpm,
        orbit_energy=orbit_energy,
        initial_state=initial_state,
        rotations=rotations,
    )


def bundled_config_path(name: str):
    """Path to a config shipped with the package (e.g. 'periodic.json')."""
    ref = resources.files("devilstick") / "configs" / name
    if not ref.is_file():
        raise ConfigError(f"no bundled config named {name!r}")
    return ref


def _feasibility_from_log(log: TrajectoryLog, cfg: ScenarioConfig) -> dict:
    half = 0.5 * cfg.stick.length
    sign_constant = True
    arm_inside = True
    prev_sign = 0
    for row in log.samples:
        force, arm = row[7], row[8]
        sign = 1 if force > 0 else (-1 if force < 0 else 0)
        if sign == 0 or (prev_sign != 0 and sign != prev_sign):
            sign_constant = False
        prev_sign = sign if sign != 0 else prev_sign
        if not (math.isnan(arm) or -half < arm < half):
            arm_inside = False
    min_force = log.min_force
    for crossing in log.crossings:
        episode = crossing.get("episode")
        if episode is not None:
            min_force = min(min_force, episode["min_force"])
    return {
        "force_sign_constant": sign_constant,
        "arm_always_inside": arm_inside,
        "min_force": float(min_force),
        "max_sampled_force": float(log.max_force),
    }


def _linearization_report(cfg: ScenarioConfig, z_star, jobs: int) -> dict:
    residual = verify_fixed_point(z_star, cfg.section, cfg.vhc, cfg.stick, cfg.sim)
    lin = linearize_map(
        z_star, cfg.section, cfg.vhc, cfg.stick, cfg.sim,
        eps1=cfg.icpm.eps1, eps2=cfg.icpm.eps2, jobs=jobs,
    )
    out = {
        "fixed_point_residual": residual,
        "linearization": lin.to_dict(),
    }
    if cfg.icpm.eps_sweep:
        sweep = []
        for eps in cfg.icpm.eps_sweep:
            alt = linearize_map(
                z_star, cfg.section, cfg.vhc, cfg.stick, cfg.sim,
                eps1=eps, eps2=eps, jobs=jobs,
            )
            sweep.append({"eps": eps, "A": alt.amat.tolist(), "B": alt.bvec.tolist()})
        out["eps_sweep"] = sweep
    return out, lin


def run_scenario(config, out_dir=None, jobs: int = 1) -> dict:
    """Execute a scenario and write its artifacts.

    config may be a path or a parsed ScenarioConfig. out_dir defaults to
    the DEVILSTICK_OUT_DIR environment variable, then the current
    directory. Returns the report dict (also written as report.json).
    """
    cfg = config if isinstance(config, ScenarioConfig) else parse_scenario(config)
    if out_dir is None:
        out_dir = os.environ.get(OUT_DIR_ENV, ".")
    os.makedirs(out_dir, exist_ok=True)

    report = {"mode": cfg.mode, "config": cfg.to_dict()}
    log = None

    if cfg.mode in ("linearize", "gain", "stabilize") and cfg.orbit_energy is not None:
        orbit = OrbitSpec(energy=cfg.orbit_energy, vhc=cfg.vhc)
    else:
        orbit = None

    if cfg.mode == "linearize":
        z_star = fixed_point(orbit, cfg.section, cfg.stick)
        report["z_star"] = z_star.tolist()
        lin_report, _ = _linearization_report(cfg, z_star, jobs)
        report.update(lin_report)
    elif cfg.mode == "gain":
        z_star = fixed_point(orbit, cfg.section, cfg.stick)
        report["z_star"] = z_star.tolist()
        lin_report, lin = _linearization_report(cfg, z_star, jobs)
        report.update(lin_report)
        gains = synthesize_gain(lin, q=cfg.icpm.q_weight, r=cfg.icpm.r_weight)
        report["gains"] = gains.to_dict()
    else:
        z_star = None
        gain_row = None
        if cfg.mode == "stabilize":
            z_star = fixed_point(orbit, cfg.section, cfg.stick)
            report["z_star"] = z_star.tolist()
            if cfg.icpm.gain is not None:
                gain_row = cfg.icpm.gain
                report["gain_source"] = "explicit"
            else:
                lin_report, lin = _linearization_report(cfg, z_star, jobs)
                report.update(lin_report)
                gains = synthesize_gain(lin, q=cfg.icpm.q_weight, r=cfg.icpm.r_weight)
                report["gains"] = gains.to_dict()
                gain_row = gains.gain
                report["gain_source"] = "synthesized"
        log, summary = stabilize_run(
            cfg.initial_state,
            cfg.section,
            cfg.vhc,
            cfg.stick,
            cfg.sim,
            rotations=cfg.rotations,
            z_star=z_star,
            gain=gain_row,
        )
        times = summary["crossing_times"]
        report.update(
            {
                "duration": summary["duration"],
                "final_energy": summary["final_energy"],
                "final_state": summary["final_state"],
                "crossing_energies": summary["energies"],
                "impulses": summary["impulses"],
                "applied": summary["applied"],
                "n_applied_after_6": sum(
                    1 for c in log.crossings if c["k"] > 6 and c["applied"]
                ),
                "rotation_timings": [
                    t - (times[i - 1] if i else 0.0) for i, t in enumerate(times)
                ],
                "crossing_dq2": [c["z"][4] for c in log.crossings],
                "feasibility": _feasibility_from_log(log, cfg),
            }
        )

    if log is not None:
        log.write_csv(os.path.join(out_dir, "trajectory.csv"),
                      include_wrapped_theta=True)
        log.write_crossings_json(os.path.join(out_dir, "crossings.json"))
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    return report


def _lookup(report: dict, path: str):
    node = report
    for part in path.split("."):
        if isinstance(node, list):
            node = node[int(part)]
        elif isinstance(node, dict) and part in node:
            node = node[part]
        else:
            raise KeyError(path)
    return node


def _check_row(check: dict, report: dict) -> dict:
    name = check.get("name", check.get("path", "?"))
    path = check["path"]
    row = {"name": name, "path": path}
    try:
        got = _lookup(report, path)
    except KeyError:
        row.update({"passed": False, "error": "path not found in report"})
        return row
    op = check.get("op", "close")
    if op in ("ge", "le"):
        bound = float(check["bound"])
        value = float(got)
        passed = value >= bound if op == "ge" else value <= bound
        row.update({"got": value, "op": op, "bound": bound, "passed": passed})
        return row
    expect = check["expect"]
    abs_tol = float(check.get("abs_tol", 0.0))
    rel_tol = float(check.get("rel_tol", 0.0))
    exp_arr = np.atleast_1d(np.array(expect, dtype=float))
    got_arr = np.atleast_1d(np.array(got, dtype=float))
    if exp_arr.shape != got_arr.shape:
        row.update({"passed": False, "error": "shape mismatch"})
        return row
    err = np.abs(got_arr - exp_arr)
    allowed = abs_tol + rel_tol * np.abs(exp_arr)
    passed = bool(np.all(err <= allowed))
    row.update(
        {
            "got": got,
            "expect": expect,
            "max_error": float(np.max(err)),
            "allowed": float(np.max(allowed)),
            "passed": passed,
        }
    )
    return row


def compare_report(report_path, reference_path):
    """Check report quantities against a reference with its own tolerances.

    Returns (all_passed, rows, warnings). An empty reference passes
    vacuously with a warning, so a missing-by-mistake file is visible.
    """
    with open(report_path, "r", encoding="utf-8") as fh:
        report = json.load(fh)
    with open(reference_path, "r", encoding="utf-8") as fh:
        reference = json.load(fh)
    warnings = []
    checks = reference.get("checks", []) if isinstance(reference, dict) else []
    if not checks:
        warnings.append("reference file contains no checks; comparison is vacuous")
        return True, [], warnings
    rows = [_check_row(check, report) for check in checks]
    return all(row["passed"] for row in rows), rows, warnings
