"""Deterministic laboratory for epoch-shuffled SGD.

The package is organised around one experiment loop: build a finite family
of component functions (:mod:`~shuffle_sgd.objectives`), run shuffled SGD
over it with reproducible permutation streams (:mod:`~shuffle_sgd.engine`,
:mod:`~shuffle_sgd.permutation`), and interrogate the result three ways —
exact permutation statistics (:mod:`~shuffle_sgd.permstats`), Monte Carlo
coupling checks (:mod:`~shuffle_sgd.coupling`), and closed-form error
bounds (:mod:`~shuffle_sgd.bounds`).  The sweep harness
(:mod:`~shuffle_sgd.harness`) and the ``shuffle-sgd`` command line
(:mod:`~shuffle_sgd.cli`) tie the pieces together.

Everything downstream of a ``(base_seed, sweep_index, repeat_index)``
triple is bit-reproducible: identical inputs give identical trajectories,
CSV files, and SVG plots on any platform.
"""

from shuffle_sgd.bounds import (
    BoundReport,
    Precondition,
    alpha_window,
    lower_bound_general,
    upper_bound_quadratic,
)
from shuffle_sgd.coupling import (
    CheckReport,
    CheckRow,
    CoupledPair,
    couple_pair,
    epoch_drift_check,
    gradient_gap_check,
    posexp_check,
    swap_distance_check,
)
from shuffle_sgd.engine import (
    DivergenceError,
    RecordMode,
    RunConfig,
    StepSizeRegime,
    Trajectory,
    alpha_of,
    final_sq_errors,
    parse_regime,
    run_batch,
    run_sgd_with_replacement,
    run_sgdo,
    sgdo_step,
)
from shuffle_sgd.harness import (
    RateFit,
    SweepConfig,
    SweepPoint,
    SweepResult,
    emit_csv,
    emit_svg,
    fit_rate,
    read_csv,
    reference_curve,
    run_sweep,
)
from shuffle_sgd.objectives import (
    AssumptionConstants,
    PiecewiseFamily,
    Product2DFamily,
    QuadraticFamily,
    family_from_spec,
    make_f2,
    make_linear_offsets,
    make_product2d,
    make_quadratic,
)
from shuffle_sgd.permstats import (
    Lemma13Report,
    Lemma13Row,
    PartialSumDistribution,
    check_lemma13,
    enumerate_bruteforce,
    exact_distribution,
    expected_abs,
    prob_negative,
    prob_positive,
    prob_zero,
)
from shuffle_sgd.permutation import (
    BatchRng,
    Lineage,
    RngStream,
    batch_shuffle,
    derive_stream,
    shuffle,
    sign_labels,
    splitmix64_sequence,
    swap,
)

__all__ = [
    # objectives
    "AssumptionConstants",
    "PiecewiseFamily",
    "Product2DFamily",
    "QuadraticFamily",
    "family_from_spec",
    "make_f2",
    "make_linear_offsets",
    "make_product2d",
    "make_quadratic",
    # permutation
    "BatchRng",
    "Lineage",
    "RngStream",
    "batch_shuffle",
    "derive_stream",
    "shuffle",
    "sign_labels",
    "splitmix64_sequence",
    "swap",
    # engine
    "DivergenceError",
    "RecordMode",
    "RunConfig",
    "StepSizeRegime",
    "Trajectory",
    "alpha_of",
    "final_sq_errors",
    "parse_regime",
    "run_batch",
    "run_sgd_with_replacement",
    "run_sgdo",
    "sgdo_step",
    # permstats
    "Lemma13Report",
    "Lemma13Row",
    "PartialSumDistribution",
    "check_lemma13",
    "enumerate_bruteforce",
    "exact_distribution",
    "expected_abs",
    "prob_negative",
    "prob_positive",
    "prob_zero",
    # coupling
    "CheckReport",
    "CheckRow",
    "CoupledPair",
    "couple_pair",
    "epoch_drift_check",
    "gradient_gap_check",
    "posexp_check",
    "swap_distance_check",
    # bounds
    "BoundReport",
    "Precondition",
    "alpha_window",
    "lower_bound_general",
    "upper_bound_quadratic",
    # harness
    "RateFit",
    "SweepConfig",
    "SweepPoint",
    "SweepResult",
    "emit_csv",
    "emit_svg",
    "fit_rate",
    "read_csv",
    "reference_curve",
    "run_sweep",
]

__version__ = "0.1.0"
