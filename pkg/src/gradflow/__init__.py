"""Gradient-flow dichotomy experiments for networks with bounded-slope activations.

The package follows one storyline: dense networks with smooth, bounded-slope
activations train toward polynomial (and PDE / image) targets, and their
gradient flow either settles at a critical point or drifts to infinity while
the loss flattens.  Modules: scalar activations and their Taylor jets, dense
network forward/backward, sparse polynomials and linear-form decompositions,
weighted losses, the explicit power-unit network builder, ODE integration of
the flow with a dichotomy classifier, SGD/Adam training, Monte Carlo targets
for heat / Black-Scholes terminal values, and the experiment harness (config,
runners, IDX parsing, SVG plots, CLI).
"""

__version__ = "0.1.0"

from .activations import (
    ALL_ACTIVATIONS,
    ANALYTIC_ACTIVATIONS,
    Activation,
    ELU,
    GELU,
    HARNESS_ACTIVATIONS,
    Jet,
    LOGISTIC,
    MISH,
    RELU,
    SOFTPLUS,
    SOFTSIGN,
    SWISH,
    TANH,
    act_deriv,
    act_eval,
    act_jet,
    find_expansion_point,
    jet_shift,
    parse_activation,
    sublinearity_probe,
)
from .config import (
    EXPERIMENTS,
    ExperimentConfig,
    apply_overrides,
    config_from_dict,
    config_to_dict,
    default_config,
    load_config,
)
from .errors import (
    AllZeroReference,
    ArchitectureTooSmall,
    BadMagic,
    ConfigError,
    DegenerateScale,
    DimensionMismatch,
    DomainError,
    GradflowError,
    IllConditioned,
    NoNonzeroCoefficient,
    NonFiniteGradient,
    NonFiniteState,
    SchemaMismatch,
    StepSizeUnderflow,
    TruncatedPayload,
    UnsupportedOrder,
    UnsupportedType,
    ZeroMass,
)
from .experiments import (
    METRICS_HEADER,
    MetricsRow,
    default_poly_target,
    run_experiment,
    run_flow_experiment,
    run_kolmogorov_experiment,
    run_mnist_experiment,
    run_polynomial_experiment,
    run_theoremC_sweep,
)
from .flow import (
    AdaptiveRKF45,
    ClassifyThresholds,
    DichotomyVerdict,
    ExplicitEuler,
    FlowConfig,
    RK4,
    TrajectoryLog,
    TrajectorySample,
    VerdictTag,
    check_energy_identity,
    check_norm_bound,
    classify,
    integrate_flow,
    trajectory_from_csv,
    trajectory_to_csv,
)
from .idx import IdxTensor, parse_idx, write_idx
from .kolmogorov import (
    BlackScholesSpec,
    HeatSpec,
    McEstimate,
    bs_payoff_sample,
    bs_payoff_samples,
    bs_sampler,
    default_bs_spec,
    default_heat_spec,
    heat_exact,
    heat_sampler,
    heat_terminal_sample,
    heat_terminal_samples,
    kolmogorov_batch,
    mc_reference,
    relative_mse,
)
from .losses import (
    BCE,
    CROSS_ENTROPY_SOFTMAX,
    FIXED_LABELS,
    LossKind,
    SQUARED_ERROR,
    TargetSpec,
    WeightedDataset,
    expected_loss,
    expected_loss_grad,
    expected_loss_grad_reference,
    huber,
    polynomial_target,
    quadrature_dataset,
)
from .network import (
    Architecture,
    GlorotUniform,
    Normal,
    Uniform,
    check_finite,
    forward,
    forward_backward,
    forward_backward_batch,
    forward_batch,
    init_params,
    layer_shapes,
    pack_params,
    param_dim,
    params_from_bytes,
    params_from_json,
    params_to_bytes,
    params_to_json,
    unpack_params,
)
from .optim import (
    EmaTracker,
    OptimizerConfig,
    OptimizerState,
    adam,
    ema_update,
    minibatch_indices,
    opt_step,
    sgd,
)
from .plots import average_runs, emit_plots, read_curve_csv, render_svg
from .polynet import (
    PowerFragment,
    ShallowNet,
    build_poly_shallow,
    build_univariate_power_jet,
    embed_deep,
    shallow_to_params,
    sup_error,
    width_bound,
)
from .polynomials import (
    LinearFormDecomposition,
    Polynomial,
    compose_affine,
    decompose_homogeneous,
    format_poly,
    homogeneous_parts,
    lattice_points,
    linear_form_power,
    monomials_of_degree,
    multinomial,
    parse_poly,
)
