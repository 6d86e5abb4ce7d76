from importlib.metadata import version

from ._expression import ExpressionError, parse_expression
from ._utils import QuadratureError
from .geometry import (
    ChartError,
    NotInCollarError,
    make_curve,
    make_circle,
    make_disc,
    make_annulus,
    make_chart,
    curvature_bounds,
    validate_collar,
    from_normal,
    to_normal,
    metric_factor,
    jacobian,
)
from .field import (
    FieldSingularError,
    DecompositionError,
    build_field,
    field_from_function,
    eval_cartesian,
    eval_collar_density,
    eval_collar_field,
    potential,
    potential_s_derivative,
    collar_decomposition,
    check_blowup_hypothesis,
    check_tangential_hypothesis,
    devt_comparison,
)
from .dynamics import (
    ParticleParams,
    IntegrationOptions,
    make_state,
    rhs,
    integrate,
    to_canonical,
    hamiltonian,
    ps_rate,
    diagnostics_pass,
)
from .bounds import (
    ConfinementConstants,
    proposition_constants,
    theorem2_constants,
    make_constants,
    distance_bound,
    theorem2_lower_bound,
    verify_potential_bound,
    verify_distance_bound,
    surrogate_distance_check,
    hypothesis_report,
)
from .scenario import ScenarioError, load_scenario, load_builtin, list_builtin, parse_scenario
from .runner import build_setup, initial_states, run_simulation, run_check, run_verification
from .output import (
    OutputFormatError,
    plot_trajectories,
    read_trajectory_csv,
    write_report,
    write_trajectory_csv,
)

__version__ = version("magconfine")
