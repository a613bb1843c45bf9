//! The renewal kernel `G = Σ_n P^n` on `S^{d-1} × A × R`, its limit operator
//! `Π₀`, and the Fourier representation of `G - Π₀/σ`.

mod fourier;
mod green;
mod omega;
mod regular;

pub use fourier::{
    boundary_renewal, fourier_green, fourier_green_at, fourier_green_refined, BoundaryOptions, BoundaryRenewal, FourierEstimate, FourierGreen, FourierOptions, RefinedFourier,
};
pub use green::{
    check_transience, drift_bound, geometric_series_on_a, green_mc, pi0_apply, rate_fit, truncation, GreenOptions, RateFit, RateOptions, RatePoint, RenewalEstimate, DRIFT_N,
    MAX_DRIFT_S,
};
pub use omega::{boundary_decompose, e_norm, omega, omega0, psi, BoundaryDecomposition, Envelope, Evaluator, OmegaFunction, Site, BOUNDARY_T};
pub use regular::{
    convolve_phi_k, gaussian_term, phi, phi_moment, profile_integral, random_piecewise_profile, regularizing_constant, tail_integral, tauberian_bound, Profile,
    RegularFunction, Regularized, SeparableTerm, Spatial, TauberianBracket, TauberianCheck, Transform, NORM_WINDOW,
};
