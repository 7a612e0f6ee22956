"""Shared fixtures.

The expensive artifacts (section returns at dt = 1e-5, the linearized
return map, the closed-loop run) are built once per session and shared
between the module tests and the acceptance suite. Elapsed wall times are
kept alongside results that have a runtime budget.
"""

import math
import os
import time

import pytest

from devilstick import (
    FullState,
    OrbitSpec,
    SectionSpec,
    SimConfig,
    StickParams,
    VhcSpec,
    fixed_point,
    linearize_map,
    stabilize_run,
    state_on_manifold,
    synthesize_gain,
    verify_fixed_point,
)

JOBS = min(6, os.cpu_count() or 1)

# Off-orbit launch state used by the periodic and continuous-only runs.
INIT_PERIODIC = FullState(0.1206, -1.1608, 0.0, 7.2965, -0.8040, 9.1055)


@pytest.fixture(scope="session")
def params():
    return StickParams()


@pytest.fixture(scope="session")
def vhc():
    return VhcSpec()


@pytest.fixture(scope="session")
def vhc_tilted():
    # Phase offset slightly off a quarter turn: same circle, energy no
    # longer conserved along rotations, so the spin keeps accelerating.
    return VhcSpec(phase=math.pi / 2 - 0.01)


@pytest.fixture(scope="session")
def section():
    return SectionSpec(q2_star=math.pi / 6)


@pytest.fixture(scope="session")
def simcfg():
    return SimConfig(step_size=1e-5)


@pytest.fixture(scope="session")
def simcfg_coarse():
    # For property tests where fourth-order accuracy at 1e-4 is plenty.
    return SimConfig(step_size=1e-4)


@pytest.fixture(scope="session")
def orbit(vhc):
    return OrbitSpec(energy=22.19, vhc=vhc)


@pytest.fixture(scope="session")
def z_star(orbit, section, params):
    return fixed_point(orbit, section, params)


@pytest.fixture(scope="session")
def fixed_point_check(z_star, section, vhc, params, simcfg):
    start = time.perf_counter()
    residual = verify_fixed_point(z_star, section, vhc, params, simcfg)
    return {"residual": residual, "elapsed": time.perf_counter() - start}


@pytest.fixture(scope="session")
def linearization_timed(z_star, section, vhc, params, simcfg):
    start = time.perf_counter()
    lin = linearize_map(z_star, section, vhc, params, simcfg, jobs=JOBS)
    return {"lin": lin, "elapsed": time.perf_counter() - start}


@pytest.fixture(scope="session")
def linearization(linearization_timed):
    return linearization_timed["lin"]


@pytest.fixture(scope="session")
def eps_sweep_maps(z_star, section, vhc, params, simcfg):
    """Return maps linearized at the two step sizes flanking the default."""
    return {
        eps: linearize_map(
            z_star, section, vhc, params, simcfg, eps1=eps, eps2=eps, jobs=JOBS
        )
        for eps in (1e-5, 1e-7)
    }


@pytest.fixture(scope="session")
def halving_maps(z_star, section, vhc, params, simcfg):
    """Linearizations at a coarse eps1 and two halvings of it.

    At these sizes the forward-difference truncation error dominates
    roundoff, so the error model err ~ c*eps is testable.
    """
    return {
        eps: linearize_map(
            z_star, section, vhc, params, simcfg, eps1=eps, jobs=JOBS
        )
        for eps in (1e-4, 5e-5, 2.5e-5)
    }


@pytest.fixture(scope="session")
def gains(linearization):
    return synthesize_gain(linearization)


@pytest.fixture(scope="session")
def stabilize_result(z_star, gains, section, vhc, params, simcfg):
    start = time.perf_counter()
    log, summary = stabilize_run(
        INIT_PERIODIC,
        section,
        vhc,
        params,
        simcfg,
        rotations=8,
        z_star=z_star,
        gain=gains.gain,
    )
    summary["wall_time"] = time.perf_counter() - start
    return log, summary


@pytest.fixture(scope="session")
def continuous_result(section, vhc, params, simcfg):
    log, summary = stabilize_run(
        INIT_PERIODIC, section, vhc, params, simcfg, rotations=8
    )
    return log, summary


@pytest.fixture(scope="session")
def aperiodic_result(vhc_tilted, params, simcfg):
    init = state_on_manifold(0.0, 8.0, vhc_tilted)
    log, summary = stabilize_run(
        init, SectionSpec(q2_star=0.0), vhc_tilted, params, simcfg, rotations=4
    )
    return log, summary
