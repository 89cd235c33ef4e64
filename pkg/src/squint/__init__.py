"""Parameter-free expert-advice algorithms on a second-order potential."""

from .algorithms import (
    BracketViolationError,
    Hedge,
    RootResult,
    SharedVarianceSquint,
    Squint,
    hedge_weights,
    shared_variance_predict,
    shared_variance_update,
    shared_variance_weights,
    solve_round_variance,
    squint_predict,
    squint_update,
    squint_weights,
)
from .game import (
    PerExpertState,
    RoundRecord,
    SharedVarState,
    accumulate,
    instantaneous_regret,
)
from .harness import ExperimentConfig, RunResult, run_experiment
from .metrics import (
    AuditReport,
    bound_checks,
    epsilon_grid,
    potential_audit,
    quantile_index,
    quantile_regret,
    regret_bound,
)
from .potential import (
    PotentialRangeError,
    V_SWITCH,
    d2potential_dR2,
    dpotential_dR,
    log_moment,
    potential,
)

__version__ = "0.1.0"

__all__ = [
    "AuditReport",
    "BracketViolationError",
    "ExperimentConfig",
    "Hedge",
    "PerExpertState",
    "PotentialRangeError",
    "RootResult",
    "RoundRecord",
    "RunResult",
    "SharedVarState",
    "SharedVarianceSquint",
    "Squint",
    "V_SWITCH",
    "accumulate",
    "bound_checks",
    "d2potential_dR2",
    "dpotential_dR",
    "epsilon_grid",
    "hedge_weights",
    "instantaneous_regret",
    "log_moment",
    "potential",
    "potential_audit",
    "quantile_index",
    "quantile_regret",
    "regret_bound",
    "run_experiment",
    "shared_variance_predict",
    "shared_variance_update",
    "shared_variance_weights",
    "solve_round_variance",
    "squint_predict",
    "squint_update",
    "squint_weights",
    "__version__",
]
