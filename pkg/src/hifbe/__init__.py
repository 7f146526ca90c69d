"""High-order forward-backward splitting maps and envelopes for phi = f + g."""

__version__ = "0.1.0"

from .core import (CompositeProblem, NonsmoothOracle, SmoothOracle, composite_value,  # noqa: E402
                   estimate_holder_constant)
from .catalog import CATALOG_IDS, problem_catalog_get  # noqa: E402
from .inner import (EnvelopeConfig, SubproblemSolution, model_value, prox_registry_lookup,  # noqa: E402
                    soft_threshold, solve_subproblem)
from .envelope import (EnvelopeEval, candidate_gradient, fd_gradient, forward_value_closed_form,  # noqa: E402
                       hifbe, hifbs, home, residual)
from .algo import HifbaTrace, hifba_run, hifba_step, scaled_gradient_check  # noqa: E402
from .analysis import CheckReport  # noqa: E402

__all__ = [
    "CompositeProblem", "NonsmoothOracle", "SmoothOracle", "composite_value", "estimate_holder_constant",
    "CATALOG_IDS", "problem_catalog_get", "EnvelopeConfig", "SubproblemSolution", "model_value",
    "prox_registry_lookup", "soft_threshold", "solve_subproblem", "EnvelopeEval", "candidate_gradient",
    "fd_gradient", "forward_value_closed_form", "hifbe", "hifbs", "home", "residual", "HifbaTrace",
    "hifba_run", "hifba_step", "scaled_gradient_check", "CheckReport",
]
