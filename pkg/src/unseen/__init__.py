"""Multi-population unseen-element estimation.

Predict how many new distinct elements future samples will reveal across
several populations, recover the joint frequency histogram from a
fingerprint, and allocate a sampling budget to maximize discoveries.
"""

from .core import (
    Fingerprint,
    Histogram,
    PopulationModel,
    SampleSet,
    build_fingerprint,
    empirical_histogram,
    marginal_fingerprint,
    observed_distinct,
)
from .linear import (
    ExtrapolationPlan,
    WeightConfig,
    default_rate,
    exact_expected_new,
    poisson_tail_weight,
    unbiased_estimate,
    weighted_estimate,
)
from .histstat import (
    emd,
    expected_distinct,
    expected_fingerprint,
    expected_new_distinct,
    expected_new_seen_at_least,
)
from .histfit import FitConfig, FitResult, fit_histogram, split_ones
from .synth import ModelSpec, draw_samples, ingest_text, make_model
from .alloc import AllocationProblem, AllocationResult, optimize_allocation

__version__ = "0.1.0"

__all__ = [
    "AllocationProblem",
    "AllocationResult",
    "ExtrapolationPlan",
    "Fingerprint",
    "FitConfig",
    "FitResult",
    "Histogram",
    "ModelSpec",
    "PopulationModel",
    "SampleSet",
    "WeightConfig",
    "build_fingerprint",
    "default_rate",
    "draw_samples",
    "emd",
    "empirical_histogram",
    "exact_expected_new",
    "expected_distinct",
    "expected_fingerprint",
    "expected_new_distinct",
    "expected_new_seen_at_least",
    "fit_histogram",
    "ingest_text",
    "make_model",
    "marginal_fingerprint",
    "observed_distinct",
    "optimize_allocation",
    "poisson_tail_weight",
    "split_ones",
    "unbiased_estimate",
    "weighted_estimate",
]
