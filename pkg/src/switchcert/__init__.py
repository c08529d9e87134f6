"""Safety-certified switching among learned motion primitives.

Discrete-time primitive libraries with quadratic Lyapunov certificates,
average-dwell-time switching budgets, certificate synthesis, Monte Carlo
falsification, and a planar leader-following walker scenario built on
stride-to-stride reduced dynamics.
"""

__version__ = "0.1.0"

from .primitives import (
    BasinReport,
    ContractionReport,
    Primitive,
    PrimitiveLibrary,
    PrimitiveMap,
    QuadraticLyapunov,
    certify_basin,
    eval_map,
    lyapunov_value,
    sample_in_sublevel_set,
    verify_contraction,
)
from .library_io import (
    library_fingerprint,
    library_from_dict,
    library_to_dict,
    load_library,
    save_library,
)
from .switching import (
    DwellTimeBudget,
    DwellTimeReport,
    Supervisor,
    SwitchingSignal,
    admit_switch,
    count_switches,
    heading_policy,
    validate_dwell_time,
)
from .simulation import (
    CampaignReport,
    DisturbanceSequence,
    SafetyReport,
    Trace,
    budget_from_certificate,
    derive_rng,
    empirical_trapping_level,
    monte_carlo,
    run,
    run_episode,
    safety_monitor,
    sample_admissible_signal,
    sample_disturbances,
    sample_initial_state,
)
from .certificates import (
    Certificate,
    ContainmentReport,
    KappaDiagnostic,
    MarginEstimate,
    SynthesisResult,
    default_epsilon,
    default_kappa_grid,
    dwell_time_bound,
    ellipsoid_radii,
    estimate_disturbance_margin,
    feasibility_check,
    mu_analytic,
    mu_grid,
    omega_analytic,
    omega_grid,
    synthesize_certificate,
)
from .walker import (
    LeaderModel,
    Pose,
    ScenarioTrace,
    StrideForce,
    StridePrimitive,
    WalkerScenario,
    heading_estimate,
    impedance_force,
    integrate_stride_force,
    load_scenario,
    run_scenario,
    shipped_certificate,
    shipped_stride_primitives,
    shipped_walker_library,
    stride_update,
    wrap_angle,
)

__all__ = [name for name in dir() if not name.startswith("_")]
