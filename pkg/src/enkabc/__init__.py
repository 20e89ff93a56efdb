"""Ensemble-Kalman and Monte Carlo estimators of intractable likelihoods.

Implements the simulation-based likelihood estimators (ABC kernel average,
synthetic likelihood, particle filter, ensemble Kalman filter, and the
iterative ensemble Kalman inversion family with direct, unbiased, and
path-sampling readouts), tolerance-tempering schedules with target
skipping, pseudo-marginal MCMC on top of any estimator, and the
command-line studies that sweep them.
"""
from .estimates import LogLikelihoodEstimate
from .estimators import (
    bootstrap_pf_loglik,
    direct_log_ml,
    enkf_filter_loglik,
    enkf_loglik,
    particle_filter_loglik,
    path_sampling_log_ml,
    synthetic_loglik,
    unbiased_log_ml,
)
from .gaussian import (
    EnsembleMoments,
    HzResult,
    IllConditionedError,
    chol_with_jitter,
    diag_mvn_logpdf,
    ensemble_moments,
    ghurye_olkin_logdensity,
    hz_normality_test,
    mvn_logpdf,
    sample_mvn,
)
from .ienki import (
    Ensemble,
    IenkiTrace,
    SHIFTER_KINDS,
    apply_shift,
    default_schedule_for,
    gamma_from_tolerances,
    ienki_abc_run,
    kalman_gain,
    shift_adjustment,
    shift_square_root,
    shift_stochastic,
    trace_to_csv,
)
from .kernels import AbcKernel, abc_loglik_estimate, kernel_logvalue, weighted_euclidean
from .mcmc import (
    ChainRecord,
    LogUniformPrior,
    MultiEssResult,
    UniformPrior,
    chain_to_csv,
    lv_default_prior,
    multi_ess,
    multi_ess_samples,
    pilot_proposal_cov,
    pm_mh_run,
)
from .simulators import (
    LV_OBS_TIMES,
    LV_THETA_STAR,
    LV_X0,
    LotkaVolterraModel,
    LVPath,
    ToyModel,
    gillespie_lv,
    gillespie_lv_batch,
    lv_summary,
    make_observed_lv_data,
    toy_exact_abc_likelihood,
)
from .tempering import (
    SkipPolicy,
    TemperingSchedule,
    adaptive_next_epsilon,
    build_schedule,
    closed_form_alpha,
    ess,
    ess_from_log,
    estimate_kappa,
    schedule_to_csv,
    skip_decision,
)
from .experiments import (
    ExperimentConfig,
    PRESETS,
    run_gaussian_study,
    run_lv_mcmc_study,
    run_lv_sd_study,
    run_study,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "1.0.0"
