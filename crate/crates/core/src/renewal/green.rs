use std::sync::Arc;

use num_complex::Complex64;

use super::omega::OmegaFunction;
use crate::error::{Error, Result};
use crate::measure::GeneratorMeasure;
use crate::quad::{integrate_to_infinity, Quad};
use crate::rng::{map_partitions, purpose};
use crate::stats::linear_fit;
use crate::transfer::{drift_check, DriftBound, GridFunction, SpectralData, StateGrid};
use crate::walk::lyapunov_estimate;

/// `Σ_{n ≤ N} P^n f(x, a, t)` by Monte Carlo.
#[derive(Clone, Debug, PartialEq)]
pub struct RenewalEstimate {
    pub t: f64,
    pub value: f64,
    pub mc_std_error: f64,
    /// Bound on `Σ_{n > N} P^n |f|` from the drift decay.
    pub truncation_bound: f64,
    pub n_terms: usize,
    /// Number of sampled terms `f(X_n, a_n, t + S_n)` that were not zero.
    pub nonzero_terms: u64,
}

#[derive(Clone, Copy, Debug)]
pub struct GreenOptions {
    pub walks: usize,
    /// Target for the truncation bound.
    pub tolerance: f64,
    pub seed: u64,
    pub max_terms: usize,
    /// Steps and walks of the transience check.
    pub lyapunov_steps: usize,
    pub lyapunov_walks: usize,
}

impl Default for GreenOptions {
    fn default() -> Self {
        GreenOptions { walks: 20_000, tolerance: 1e-4, seed: 1, max_terms: 100_000, lyapunov_steps: 500, lyapunov_walks: 200 }
    }
}

/// Largest envelope rate accepted, inside the strip `|Re z| < ETA`.
pub const MAX_DRIFT_S: f64 = 0.15;
/// Powers tabulated by the drift check.
pub const DRIFT_N: [usize; 8] = [1, 2, 4, 8, 12, 16, 24, 32];

fn drift_grid(dim: usize, a_size: usize) -> Result<Arc<StateGrid>> {
    Ok(Arc::new(if dim == 2 { StateGrid::circle(254, a_size)? } else { StateGrid::icosphere(3, a_size)? }))
}

/// Drift bound at rate `s`.
pub fn drift_bound(rho: &GeneratorMeasure, s: f64) -> Result<DriftBound> {
    let grid = drift_grid(rho.dim(), rho.a_size())?;
    let table = drift_check(rho, &grid, &[s], &DRIFT_N)?;
    Ok(table.bound(0))
}

/// Number of terms `N` making `b c e^{-s t} e^{-r s (N+1)} / (1 - e^{-r s})`
/// at most `tolerance`, and that bound.
pub fn truncation(bound: &DriftBound, b: f64, t_min: f64, tolerance: f64, max_terms: usize) -> Result<(usize, f64)> {
    if b == 0.0 {
        return Ok((0, 0.0));
    }
    let q = (-bound.rate * bound.s).exp();
    if !(bound.rate > 0.0 && q < 1.0) {
        return Err(Error::Tolerance(format!("drift bound does not decay (rate {})", bound.rate)));
    }
    let head = b * bound.c * (-bound.s * t_min).exp() / (1.0 - q);
    let n = ((head / tolerance).ln() / (bound.rate * bound.s) - 1.0).ceil().max(0.0) as usize;
    if n > max_terms {
        return Err(Error::Tolerance(format!("{n} terms needed for truncation bound {tolerance:e}")));
    }
    Ok((n, head * q.powi(n as i32 + 1)))
}

/// Checks `λ_ρ > 3 σ` and returns the estimate.
pub fn check_transience(rho: &GeneratorMeasure, steps: usize, walks: usize, seed: u64) -> Result<f64> {
    let l = lyapunov_estimate(rho, steps, walks, seed)?;
    if !(l.lambda_rho > 3.0 * l.std_error) {
        return Err(Error::NonTransient { lambda: l.lambda_rho, std_error: l.std_error });
    }
    Ok(l.lambda_rho)
}

/// `Σ_{n ≤ N} E f(X_n, a_n, t + S_n)` from `(x, a)` for every `t` in
/// `t_values`, with one set of walks shared by all `t`. `f` needs an
/// envelope `|f(·, u)| ≤ b e^{-s u}` to bound the truncated tail.
pub fn green_mc(rho: &GeneratorMeasure, f: &OmegaFunction, x: &[f64], a: usize, t_values: &[f64], opts: &GreenOptions) -> Result<Vec<RenewalEstimate>> {
    if x.len() != rho.dim() || f.dim() != rho.dim() || a >= rho.a_size() {
        return Err(Error::Dimension("start point, function and measure disagree".into()));
    }
    if t_values.is_empty() || opts.walks < 2 {
        return Err(Error::precondition("need at least one t and two walks"));
    }
    if f.p_plus.iter().any(|p| p.abs() > 1e-12) {
        return Err(Error::precondition("f must vanish at +infinity"));
    }
    let env = f.envelope.ok_or_else(|| Error::precondition("green_mc needs an envelope |f(x,u)| <= b e^(-s u)"))?;
    check_transience(rho, opts.lyapunov_steps, opts.lyapunov_walks, opts.seed)?;
    if !(env.s > 0.0 && env.s <= MAX_DRIFT_S) {
        return Err(Error::precondition(format!("envelope rate must lie in (0, {MAX_DRIFT_S}]")));
    }
    let bound = drift_bound(rho, env.s)?;
    let b = env.b;
    let t_min = t_values.iter().copied().fold(f64::INFINITY, f64::min);
    let (n_terms, tail) = truncation(&bound, b, t_min, opts.tolerance, opts.max_terms)?;
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let x0: Vec<f64> = x.iter().map(|v| v / norm).collect();
    let nt = t_values.len();
    let d = rho.dim();
    let atoms = rho.atoms();
    let parts = map_partitions(opts.walks, opts.seed, purpose::GREEN, |rng, range| {
        let mut sum = vec![0.0; nt];
        let mut sq = vec![0.0; nt];
        let mut nonzero = 0u64;
        let mut y = vec![0.0; nt];
        let mut pos = vec![0.0; d];
        let mut buf = vec![0.0; d];
        for _ in range {
            pos.copy_from_slice(&x0);
            let mut state = a;
            let mut s = 0.0;
            y.iter_mut().for_each(|v| *v = 0.0);
            for n in 0..=n_terms {
                for (k, &t) in t_values.iter().enumerate() {
                    let v = f.eval(&pos, state, t + s);
                    if v != 0.0 {
                        nonzero += 1;
                        y[k] += v;
                    }
                }
                if n == n_terms {
                    break;
                }
                let idx = rho.sample_index(rng);
                s += crate::walk::step(&atoms[idx].g, &mut pos, &mut buf);
                state = atoms[idx].perm[state];
            }
            for k in 0..nt {
                sum[k] += y[k];
                sq[k] += y[k] * y[k];
            }
        }
        (sum, sq, nonzero)
    });
    let mut sum = vec![0.0; nt];
    let mut sq = vec![0.0; nt];
    let mut nonzero = 0u64;
    for (s, q, z) in parts {
        for k in 0..nt {
            sum[k] += s[k];
            sq[k] += q[k];
        }
        nonzero += z;
    }
    let w = opts.walks as f64;
    Ok(t_values
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let mean = sum[k] / w;
            let var = ((sq[k] / w - mean * mean) * w / (w - 1.0)).max(0.0);
            RenewalEstimate {
                t,
                value: mean,
                mc_std_error: (var / w).sqrt(),
                truncation_bound: tail * (-bound.s * (t - t_min)).exp(),
                n_terms,
                nonzero_terms: nonzero,
            }
        })
        .collect())
}

/// `Π₀ f(x, a, t) = Σ_i p_i(x, a) ∫_t^∞ ∫ f(·, u) dν_i du`, with `p_i`
/// interpolated from the grid.
pub fn pi0_apply(spectral: &SpectralData, grid: &StateGrid, f: &OmegaFunction, x: &[f64], a: usize, t: f64, tol: f64) -> Result<Quad> {
    let mut total = Quad::default();
    for i in 0..spectral.r {
        let p = GridFunction::from_real(&spectral.p[i], 1.0).eval(grid, x, a)?.re;
        if p.abs() < 1e-15 {
            continue;
        }
        let support: Vec<(usize, f64)> = spectral.nu[i].iter().copied().enumerate().filter(|(_, w)| *w > 0.0).collect();
        let inner = |u: f64| {
            support
                .iter()
                .map(|&(s, w)| {
                    let (y, b) = grid.state(s);
                    w * f.eval(y, b, u)
                })
                .sum::<f64>()
        };
        let q = integrate_to_infinity(&inner, t, 4.0, &f.breaks, tol / (spectral.r as f64 * p.abs()), 100_000)?;
        total = total + Quad { value: p * q.value, error: p.abs() * q.error };
    }
    Ok(total)
}

/// Residual of `G f - Π₀ f / λ` at one radius.
#[derive(Clone, Debug, PartialEq)]
pub struct RatePoint {
    pub radius: f64,
    pub residual: f64,
    pub mc_error: f64,
    pub n_terms: usize,
    pub green: f64,
    pub pi0: f64,
}

#[derive(Clone, Debug)]
pub struct RateFit {
    /// `α̂` with `R(s) ≈ Ĉ / (1 + |ln s|)^{α̂}`.
    pub alpha_hat: f64,
    pub c_hat: f64,
    pub r_squared: f64,
    pub points: Vec<RatePoint>,
    /// Whether residuals decrease with the radius up to two combined
    /// standard errors.
    pub monotone_within_noise: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct RateOptions {
    pub green: GreenOptions,
    /// `σ_ρ = λ_ρ` used in `Π₀ / σ_ρ`.
    pub lambda: f64,
    pub quad_tol: f64,
}

/// Residuals `R(s) = |G f - Π₀ f / λ|` at `s · direction` for each radius,
/// i.e. at `(direction, t = ln s)`, fitted as `ln R = ln Ĉ - α̂ ln(1 + |ln s|)`.
/// `f` is a function on `R^d` written in `(x, t)` coordinates; `f(0) = 0`
/// means its boundary value at `-∞` vanishes.
pub fn rate_fit(rho: &GeneratorMeasure, grid: &StateGrid, spectral: &SpectralData, f: &OmegaFunction, direction: &[f64], a: usize, radii: &[f64], opts: &RateOptions) -> Result<RateFit> {
    if f.p_minus.iter().any(|p| p.abs() > 1e-12) {
        return Err(Error::precondition("f(0) must vanish (boundary value at -infinity is nonzero)"));
    }
    if radii.len() < 2 || radii.iter().any(|&s| !(s > 0.0 && s < 1.0)) {
        return Err(Error::precondition("need at least two radii in (0, 1)"));
    }
    let t_values: Vec<f64> = radii.iter().map(|s| s.ln()).collect();
    let g = green_mc(rho, f, direction, a, &t_values, &opts.green)?;
    let mut points = Vec::with_capacity(radii.len());
    for (est, &s) in g.iter().zip(radii) {
        let pi0 = pi0_apply(spectral, grid, f, direction, a, est.t, opts.quad_tol)?;
        let residual = (est.value - pi0.value / opts.lambda).abs();
        points.push(RatePoint {
            radius: s,
            residual,
            mc_error: est.mc_std_error + est.truncation_bound + pi0.error / opts.lambda,
            n_terms: est.n_terms,
            green: est.value,
            pi0: pi0.value,
        });
    }
    if points.iter().all(|p| p.residual == 0.0) {
        return Ok(RateFit { alpha_hat: 0.0, c_hat: 0.0, r_squared: 1.0, points, monotone_within_noise: true });
    }
    if points.iter().any(|p| p.residual <= p.mc_error) {
        return Err(Error::Tolerance("Monte Carlo error exceeds a residual; raise the walk count".into()));
    }
    let xs: Vec<f64> = points.iter().map(|p| (1.0 + p.radius.ln().abs()).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.residual.ln()).collect();
    let (slope, intercept) = linear_fit(&xs, &ys);
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let ss_tot: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    let mut sorted: Vec<&RatePoint> = points.iter().collect();
    sorted.sort_by(|p, q| q.radius.total_cmp(&p.radius));
    let monotone_within_noise = sorted.windows(2).all(|w| w[1].residual <= w[0].residual + 2.0 * (w[0].mc_error.powi(2) + w[1].mc_error.powi(2)).sqrt());
    Ok(RateFit { alpha_hat: -slope, c_hat: intercept.exp(), r_squared, points, monotone_within_noise })
}

/// `Σ_n P_A^n p` for the chain induced on `A`, summed until the terms fall
/// below `tol`.
pub fn geometric_series_on_a(rho: &GeneratorMeasure, p: &[f64], tol: f64, max_terms: usize) -> Result<Vec<f64>> {
    let chain = rho.chain_on_a();
    let mut term = p.to_vec();
    let mut acc = p.to_vec();
    for _ in 0..max_terms {
        term = chain.iter().map(|row| row.iter().zip(&term).map(|(w, v)| w * v).sum()).collect();
        for (a, t) in acc.iter_mut().zip(&term) {
            *a += t;
        }
        if term.iter().all(|v| v.abs() < tol) {
            return Ok(acc);
        }
    }
    Err(Error::Tolerance("geometric series on A did not converge".into()))
}

pub(crate) fn real_grid_values(grid: &StateGrid, f: impl Fn(&[f64], usize) -> f64) -> Vec<Complex64> {
    (0..grid.len())
        .map(|s| {
            let (x, a) = grid.state(s);
            Complex64::new(f(x, a), 0.0)
        })
        .collect()
}
