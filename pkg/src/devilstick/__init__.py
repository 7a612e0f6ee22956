"""Simulation and stabilization of rotary devil-stick motion.

A rigid stick in the vertical plane is driven by a single normal force F
applied at a point r along the stick. A circular virtual constraint ties
the center of mass to the stick angle, reducing the closed loop to a
one-degree-of-freedom flow with a conserved quantity E. Rotations are
then stabilized by impulsive corrections at a section crossing, realized
as brief high-gain force episodes.
"""

from .dynamics import (
    ControlInput,
    FullState,
    StickParams,
    accelerations,
    mechanical_energy,
    standard_form_matrices,
)
from .errors import (
    BelowPotentialError,
    ConfigError,
    DegenerateForceError,
    DevilstickError,
    EpisodeTimeoutError,
    NoConvergenceError,
    NoCrossingError,
    NonFiniteStateError,
    NotControllableError,
    NotPropellerError,
    NotStabilizableError,
    SingularMatrixError,
    SingularVhcError,
)
from .linalg import (
    DareSolution,
    determinant,
    eigenvalues_dense,
    finite_difference_column,
    solve_dare,
    solve_linear,
    spectral_radius,
)
from .reduced import (
    OrbitClass,
    OrbitSpec,
    ReducedState,
    classify_orbit,
    dq2_on_orbit,
    energy,
    potential_peak,
    reduced_accel,
    reduced_mass,
    reduced_potential,
)
from .scenario import (
    ScenarioConfig,
    bundled_config_path,
    compare_report,
    parse_scenario,
    run_scenario,
)
from .simulate import (
    HighGainConfig,
    SectionSpec,
    SimConfig,
    TrajectoryLog,
    high_gain_episode,
    integrate_to_angle,
    integrate_to_section,
    rk4_step,
    wrap_angle,
)
from .stabilize import (
    IcpmGains,
    LinearizedMap,
    apply_impulse,
    controllability_min_singular_value,
    fixed_point,
    full_from_section,
    linearize_map,
    poincare_map,
    section_state,
    stabilize_run,
    synthesize_gain,
    verify_fixed_point,
)
from .vhc import (
    ConstraintError,
    FeasibilityMonitor,
    VhcSpec,
    arm_on_manifold,
    constraint_error,
    contact_feasibility,
    continuous_control,
    decoupling_matrix,
    force_on_manifold,
    make_controller,
    phi_and_derivatives,
    state_on_manifold,
)

__version__ = "0.1.0"
