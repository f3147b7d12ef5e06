from .audit import AuditResult, epsilon_audit, neighbouring_pair, run_audit
from .ledger import BudgetLedger
from .mechanisms import (
    Mechanism,
    QueryKind,
    clamped_total,
    count_mechanism,
    derive_mean,
    dp_count,
    dp_sum,
    sum_mechanism,
)
from .noise import (
    NoiseSource,
    ZeroNoise,
    gaussian_sigma,
    laplace_scale,
    noise_for,
    sample_noise,
)
from .sampling import amplify_by_subsampling, sample_size, subsample, subsample_indices

__all__ = [
    "AuditResult",
    "BudgetLedger",
    "Mechanism",
    "NoiseSource",
    "QueryKind",
    "ZeroNoise",
    "amplify_by_subsampling",
    "clamped_total",
    "count_mechanism",
    "derive_mean",
    "dp_count",
    "dp_sum",
    "epsilon_audit",
    "gaussian_sigma",
    "laplace_scale",
    "neighbouring_pair",
    "noise_for",
    "run_audit",
    "sample_noise",
    "sample_size",
    "subsample",
    "subsample_indices",
    "sum_mechanism",
]
