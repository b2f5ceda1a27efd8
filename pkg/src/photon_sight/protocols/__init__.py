"""The four experiments, composed from source, states and observer."""

from .bell import (
    CHResult,
    CHSettings,
    CHTerms,
    ch_lhs,
    detector_terms,
    p_obs_threshold,
    run_bell,
    terms_with_observer,
)
from .forced_choice import SuperpositionComparison, run_2afc, run_superposition_vs_mixture
from .hecht import run_hecht, simulate_hecht
from .power import exact_power, required_trials

__all__ = [
    "CHResult",
    "CHSettings",
    "CHTerms",
    "SuperpositionComparison",
    "ch_lhs",
    "detector_terms",
    "exact_power",
    "p_obs_threshold",
    "required_trials",
    "run_2afc",
    "run_bell",
    "run_hecht",
    "run_superposition_vs_mixture",
    "simulate_hecht",
    "terms_with_observer",
]
