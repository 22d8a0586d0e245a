//! Nonstationary covariance models on the sphere and the exact FFT
//! likelihood for axially symmetric Gaussian processes on regular
//! latitude-longitude grids, with simulation, maximum-likelihood fitting
//! and spatial diagnostics.

pub mod covmodel;
pub mod diagnostics;
pub mod fitting;
pub mod geometry;
pub mod meanfield;
pub mod prep;
pub mod specialfn;
pub mod spectral;

pub use covmodel::{
    cov_eval, cov_k1, cov_kz, matern_cov, matern_t_deriv, pole_check, CovError, MaternParams,
    ModelSpec, OperatorOrders, OperatorParams, ParamId, ParamVector,
};
pub use diagnostics::{
    empirical_dir_variogram, empirical_profile, fitted_dir_variogram, fitted_profile,
    profile_with_fit, DiagnosticsError, Direction, ProfileCurve, ProfileKind,
};
pub use fitting::{
    default_init, fit_mle, hessian_se, profile_loglik, FitError, FitOptions, FitResult,
    ProfilePoint,
};
pub use meanfield::{
    evaluate_mean, fit_mean, fit_mean_with, sh_basis, sh_basis_size, MeanFieldError, MeanFit,
    MeanFitOptions, MeanModel, SH_CONVENTION,
};
pub use prep::{impute_missing, taper_field, taper_weights, PrepError, TaperSpec};
pub use geometry::{
    chordal_distance, great_circle_distance, Field, GeometryError, GridSpec, LonOffset,
    EARTH_RADIUS_KM,
};
pub use specialfn::{
    bessel_k, bessel_k_product, legendre_series, LegendreCoeffs, SpecialFnError,
};
pub use spectral::{
    cross_cov_tensor, loglik_dense, loglik_fft, simulate_grid, spectral_blocks, CrossCovTensor,
    SpectralBlocks, SpectralError,
};
