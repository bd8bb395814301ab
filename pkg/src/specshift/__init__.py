"""Reward-shifted speculative sampling on tabular autoregressive models.

The library provides exact categorical arithmetic, the four tabular
policies (SFT draft, shifted draft, target, tilted optimum), standard
and shifted speculative decoders with full tracing, closed-form oracle
laws, and a CLI harness of seeded verification and measurement suites.
"""

from . import _kernels
from .distributions import (
    Categorical,
    chi_square_gof,
    clamp_normalize,
    kl_divergence,
    sample,
    tv_distance,
)
from .errors import (
    ConfigInvalid,
    DegenerateResidual,
    DimensionMismatch,
    EnumerationTooLarge,
    InsufficientSamples,
    NoFeasibleVertex,
    OverflowGuard,
    SpecShiftError,
    SupportViolation,
    ZeroDraftMass,
    ZeroSftMass,
)
from .models import (
    Context,
    ModelQuartet,
    RewardField,
    TabularModel,
    build_shifted_model,
    gen_matched_target,
    gen_random_model,
    gen_random_reward,
    load_model,
    make_quartet,
    rlhf_objective,
    rlhf_optimal,
    save_model,
    sequence_distribution,
    worked_example_quartet,
)
from .oracle import (
    DistortionReport,
    StepLaw,
    acceptance_table,
    best_of_n,
    distortion_scan,
    exact_sequence_law,
    exact_step_ss,
    exact_step_sss,
    monte_carlo_law,
    rejection_baseline,
    ss_sequence_law,
    sss_sequence_law,
)
from .rng import RngStream
from .sampling import (
    DecodeTrace,
    LookaheadConfig,
    accept_prob_shifted,
    accept_prob_standard,
    bonus_shifted,
    bonus_standard,
    decode_spec_shifted,
    decode_spec_standard,
    decode_vanilla,
)

__version__ = "0.1.0"

#: Selected decode-kernel backend: "cython" (compiled) or "pure".
KERNEL_BACKEND = _kernels.BACKEND
