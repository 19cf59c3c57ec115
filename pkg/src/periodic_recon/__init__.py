"""Reconstruction of 1-periodic signals from finitely many noisy linear measurements.

Two estimators are provided: the representer (periodic spline) solution of a
Tikhonov-regularized problem and the MMSE estimator of a Gaussian bridge,
together with the Monte Carlo machinery that compares them.
"""
from .errors import (
    ConfigError,
    DegenerateMeasurementsError,
    DegenerateSystemError,
    InvalidInputError,
    InvalidOperatorError,
    InvalidParameterError,
    NotAdmissibleError,
    NumericalError,
    ReconstructionError,
    UnsupportedOperatorError,
)
from .harness import (
    ExperimentConfig,
    ExperimentRecord,
    dump_kernel,
    run_gamma_sweep,
    run_lambda_sweep,
    run_table2,
    table2_csv,
)
from .rkhs import (
    KernelSpec,
    MeasurementSet,
    SystemMatrices,
    assemble_system,
    build_kernel,
    inner_product_HL,
    kernel_signal,
    kernel_value,
    rkhs_admissible,
)
from .solvers import (
    ReconstructionModel,
    reconstruct_signal,
    solve_gamma_regularized,
    solve_representer,
    verify_spline,
)
from .spectral import (
    OperatorSpec,
    PeriodicSignal,
    PolynomialOperator,
    apply_operator,
    convolve,
    custom_operator,
    dirac_comb,
    evaluate,
    make_operator,
    parse_operator,
    parseval_energy,
    project_null_space,
)
from .stochastic import (
    BridgeDraw,
    MeasurementDraw,
    NoiseDraw,
    closed_form_fourier_mse,
    draw_bridge,
    draw_white_noise,
    measure,
    nmse,
    substream,
)

__version__ = "0.1.0"
