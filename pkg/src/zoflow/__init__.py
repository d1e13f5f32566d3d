"""Zero-order optimization through black-box flow sampling chains."""

from .backends import (
    AffineBackend,
    AffineParams,
    Condition,
    DdimNoiseBackend,
    MixtureBackend,
    VelocityBackend,
    eval_velocity,
    make_backend,
)
from .baselines import (
    FixedPointInversionConfig,
    JacobianGDConfig,
    invert_fixed_point,
    jacobian_gd,
)
from .bound import (
    BoundEstimate,
    PairSample,
    affine_bound_exact,
    estimate_bound_mc,
    pairwise_ratio,
    proof_interval,
    proof_interval_from_flow,
)
from .codec import LinearCodec, codec_roundtrip, make_random_codec
from .errors import (
    AssumptionViolatedError,
    ConfigError,
    DegeneratePairError,
    DivergenceError,
    InvalidArgumentError,
)
from .experiments import (
    conditions_equal,
    resolve_eta,
    run_editing_experiment,
    run_inversion_experiment,
    run_step_size_sweep,
    summarize,
)
from .flow import BlackBoxFlow, NfeCounter, ddim_step, flow_step, invert_naive, run_flow
from .mixtures import GaussianMixture
from .optimizer import (
    LossSpec,
    OptConfig,
    OptTrace,
    early_stop_select,
    stopgrad_equivalence_check,
    zero_order_general,
    zero_order_run,
)
from .schedule import (
    DdimSchedule,
    FlowSchedule,
    ddim_delta,
    make_cosine_ddim_schedule,
    make_uniform_schedule,
)

__version__ = "0.1.0"

__all__ = [
    "AffineBackend", "AffineParams", "Condition", "DdimNoiseBackend",
    "MixtureBackend", "VelocityBackend", "eval_velocity", "make_backend",
    "FixedPointInversionConfig", "JacobianGDConfig", "invert_fixed_point",
    "jacobian_gd", "BoundEstimate", "PairSample", "affine_bound_exact",
    "estimate_bound_mc", "pairwise_ratio", "proof_interval",
    "proof_interval_from_flow", "LinearCodec", "codec_roundtrip",
    "make_random_codec", "AssumptionViolatedError", "ConfigError",
    "DegeneratePairError", "DivergenceError", "InvalidArgumentError",
    "BlackBoxFlow", "NfeCounter", "ddim_step", "flow_step", "invert_naive",
    "run_flow", "GaussianMixture", "LossSpec", "OptConfig", "OptTrace",
    "early_stop_select", "stopgrad_equivalence_check", "zero_order_general",
    "zero_order_run", "DdimSchedule", "FlowSchedule", "ddim_delta",
    "make_cosine_ddim_schedule", "make_uniform_schedule", "conditions_equal",
    "resolve_eta", "run_editing_experiment", "run_inversion_experiment",
    "run_step_size_sweep", "summarize",
]
