"""gnls: pseudo-spectral and Monte-Carlo laboratory for the exponential
nonlinear Schrodinger equation on the flat torus."""

from .spectral import (
    DivergentSeriesError,
    GridField,
    SpectralField,
    TorusGeometry,
    from_grid,
    load_snapshot,
    project,
    save_snapshot,
    sigma,
    smooth_project,
    sobolev_norm,
    to_grid,
    weyl_count,
)
from .measures import (
    EnsembleReport,
    GibbsEnsemble,
    ModelParams,
    NonIntegrableError,
    RngStream,
    exp_moment_oracle,
    gibbs_ensemble,
    gibbs_weight,
    hamiltonian,
    mass,
    potential,
    sample_gaussian,
    tail_fit,
)
from .dynamics import (
    FlowConfig,
    Trajectory,
    evolve,
    linear_substep,
    liouville_check,
    nonlinear_substep_collocation,
    nonlinear_substep_galerkin,
    truncation_convergence,
)
from .gauge import (
    CoeffSequence,
    MultilinearSpec,
    apply_gauge,
    decomposition_check,
    gauge_value,
    gauged_flow_equivalence,
    mean_functional,
    multilinear_n,
    multilinear_r,
)
from .variational import (
    BumpField,
    DriftPath,
    VariationalConfig,
    build_bump,
    bump_norm_scan,
    divergence_scan,
    drift_cost,
    objective_estimate,
    ou_gap_oracle,
    simulate_drift,
    simulate_ou_gap,
    stability_dt,
)
from .harness import (
    ExperimentConfig,
    InvarianceReport,
    invariance_test,
    observable_suite,
    run,
)

__version__ = "0.1.0"
