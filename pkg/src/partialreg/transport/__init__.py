"""Transport solvers and correspondence updates."""

from .correspondence import (LAMBDA_MAX, LAMBDA_MIN, SliceDirectionSet, adapt_lambda,
                             barycentric_update, sample_directions, sliced_balanced_step, sliced_step)
from .entropic import (SinkhornConvergenceWarning, sinkhorn_entropic_opt_penalized,
                       sinkhorn_entropic_primal_opt, sinkhorn_log)
from .exact import (certify_optimality, reservoir_extension, solve_balanced_ot,
                    solve_primal_opt, solve_transport_lp, sq_euclidean_cost)
from .opt1d import solve_opt_1d

__all__ = [
    "LAMBDA_MAX", "LAMBDA_MIN", "SliceDirectionSet", "SinkhornConvergenceWarning",
    "adapt_lambda", "barycentric_update", "certify_optimality", "reservoir_extension",
    "sample_directions", "sinkhorn_entropic_opt_penalized", "sinkhorn_entropic_primal_opt",
    "sinkhorn_log", "sliced_balanced_step", "sliced_step", "solve_balanced_ot", "solve_opt_1d", "solve_primal_opt",
    "solve_transport_lp", "sq_euclidean_cost",
]
