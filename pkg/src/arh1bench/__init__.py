"""Spectral simulation and estimation benchmark for ARH(1) processes.

The package splits into five layers: ``spectral_model`` (eigenvalue laws,
Beta priors, model realizations), ``simulator`` (componentwise trajectory
generation and rendering), ``estimators`` (classical and Bayesian
coefficient estimators plus plug-in prediction), ``metrics`` (EFMSE,
asymptotic limits, statistical diagnostics) and ``harness`` (seeded
parallel experiment runner with CSV/JSON emission; CLI in ``cli``).
"""
from .spectral_model import (
    EigenvalueLaw,
    ModelRealization,
    PriorSpec,
    RatioDecayDiagnostic,
    SpectralModelSpec,
    check_ratio_decay,
    draw_rho,
    eigenvalue,
    prior_mean,
    prior_mean_sq,
    prior_params,
    prior_variance,
    realize,
    truncate_realization,
)
from .simulator import (
    PositivityReport,
    Trajectory,
    positivity_diagnostic,
    read_trajectory_binary,
    render_curve,
    simulate,
    trigonometric_basis,
    write_trajectory_binary,
    write_trajectory_csv,
)
from .estimators import (
    ComplexRootError,
    DegenerateTrajectoryError,
    EstimateSet,
    SufficientStats,
    bayes_estimate,
    classical_estimate,
    cubic_score_solve,
    estimate_all,
    plugin_predict,
    sufficient_stats,
)
from .metrics import (
    EfmseInput,
    EfmseReport,
    KtRule,
    bartlett_check,
    efmse_param,
    efmse_pred,
    ergodic_estimates,
    ks_distance_to_normal,
    normality_check,
    prior_param_limit,
    prior_pred_limit,
    theory_param_limit,
    theory_pred_limit,
    truncation_order,
)
from .harness import (
    AbortedReplicationsError,
    ExperimentConfig,
    config_from_dict,
    emit_reports,
    load_config,
    run_diagnostics,
    run_experiment,
)

__version__ = "0.1.0"
