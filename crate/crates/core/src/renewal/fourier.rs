use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use super::green::real_grid_values;
use super::omega::psi;
use super::regular::{tail_integral, RegularFunction};
use crate::error::{Error, Result};
use crate::quad::integrate_to_infinity;
use crate::transfer::{GridFunction, HolderNorm, UOperator};

#[derive(Clone, Copy, Debug)]
pub struct FourierOptions {
    /// The integral runs over `|ξ| ≤ cutoff`.
    pub cutoff: f64,
    /// Trapezoid step; `None` picks `min(π / (8 max|t|), 0.1)`.
    pub step: Option<f64>,
    /// Largest cutoff-tail bound accepted.
    pub tolerance: f64,
    /// `‖U(-iξ)‖ ≤ resolvent_c (1 + |ξ|)^{resolvent_l + 1}`, from a scan.
    pub resolvent_c: f64,
    pub resolvent_l: f64,
    pub quad_tol: f64,
}

impl Default for FourierOptions {
    fn default() -> Self {
        FourierOptions { cutoff: 8.0, step: None, tolerance: 1e-6, resolvent_c: 10.0, resolvent_l: 1.0, quad_tol: 1e-10 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FourierEstimate {
    pub t: f64,
    pub value: f64,
    /// `Σ_i p_i(x) / σ_i ∫_t^∞ ∫ f(·, u) dν_i du`.
    pub pi0_term: f64,
    /// `(1/2π) ∫_{|ξ| ≤ cutoff} e^{iξt} U(-iξ) f̂(x, ξ) dξ`.
    pub oscillatory: f64,
    /// Bound on the discarded `|ξ| > cutoff` part.
    pub cutoff_bound: f64,
    /// `|I_h - I_{2h}|`, the change when the step is doubled.
    pub step_error: f64,
    /// Error of the quadratures in the first term.
    pub pi0_error: f64,
}

impl FourierEstimate {
    pub fn error_bound(&self) -> f64 {
        self.cutoff_bound + self.step_error + self.pi0_error
    }
}

#[derive(Clone, Debug)]
pub struct FourierGreen {
    pub estimates: Vec<FourierEstimate>,
    /// `(ξ, sup_grid |U(-iξ) f̂(·, ξ)|)` at every node.
    pub trace: Vec<(f64, f64)>,
    pub step: f64,
}

fn trapezoid_step(t_values: &[f64], opts: &FourierOptions) -> (f64, usize) {
    let t_max = t_values.iter().map(|t| t.abs()).fold(0.0, f64::max);
    let target = opts.step.unwrap_or(if t_max > 0.0 { (PI / (8.0 * t_max)).min(0.1) } else { 0.1 });
    let mut n = (opts.cutoff / target).ceil() as usize;
    n += n % 2;
    (opts.cutoff / n as f64, n.max(2))
}

/// `(1/2π) ∫_{-X}^{X} e^{iξt} F(ξ) dξ` for `F(-ξ) = conj F(ξ)` sampled at
/// `ξ_j = j h`, `j = 0..=n`, by the trapezoid rule with step `h` and with
/// step `2h`.
fn symmetric_trapezoid(values: &[Complex64], h: f64, t: f64) -> (f64, f64) {
    let n = values.len() - 1;
    let term = |j: usize| (Complex64::from_polar(1.0, j as f64 * h * t) * values[j]).re;
    let weight = |j: usize| if j == n { 0.5 } else { 1.0 };
    let fine = h * (values[0].re + 2.0 * (1..=n).map(|j| weight(j) * term(j)).sum::<f64>()) / (2.0 * PI);
    let coarse = 2.0 * h * (values[0].re + 2.0 * (2..=n).step_by(2).map(|j| weight(j) * term(j)).sum::<f64>()) / (2.0 * PI);
    (fine, coarse)
}

/// `Σ_n P^n f(x, a, t) = Σ_i p_i(x) / σ_i ∫_t^∞ ν_i(f(·, u)) du
/// + (1/2π) ∫ e^{iξt} U(-iξ) f̂(·, ξ)(x) dξ` for every `t` in `t_values`.
pub fn fourier_green(u: &UOperator, f: &RegularFunction, x: &[f64], a: usize, t_values: &[f64], opts: &FourierOptions) -> Result<FourierGreen> {
    let sites: Vec<(Vec<f64>, usize, f64)> = t_values.iter().map(|&t| (x.to_vec(), a, t)).collect();
    fourier_green_at(u, f, &sites, opts)
}

/// [`fourier_green`] at arbitrary sites `(x, a, t)`, sharing the frequency
/// nodes.
pub fn fourier_green_at(u: &UOperator, f: &RegularFunction, sites: &[(Vec<f64>, usize, f64)], opts: &FourierOptions) -> Result<FourierGreen> {
    let grid = u.grid().clone();
    if f.terms.is_empty() {
        let estimates = sites.iter().map(|s| FourierEstimate { t: s.2, value: 0.0, pi0_term: 0.0, oscillatory: 0.0, cutoff_bound: 0.0, step_error: 0.0, pi0_error: 0.0 }).collect();
        return Ok(FourierGreen { estimates, trace: Vec::new(), step: 0.0 });
    }
    let k_needed = opts.resolvent_l.max(0.0).ceil() as usize + 3;
    if f.k < k_needed {
        return Err(Error::precondition(format!("f has {} derivatives, {k_needed} needed", f.k)));
    }
    let spatial: Vec<Vec<Complex64>> = f.terms.iter().map(|term| real_grid_values(&grid, |y, b| (term.spatial)(y, b))).collect();
    let cutoff_bound = cutoff_tail(u, f, &spatial, opts, k_needed)?;
    if cutoff_bound > opts.tolerance {
        return Err(Error::Cutoff { tail: cutoff_bound, tolerance: opts.tolerance });
    }
    let t_values: Vec<f64> = sites.iter().map(|s| s.2).collect();
    let (h, n) = trapezoid_step(&t_values, opts);
    // Σ_k ĝ_k(ξ) U(-iξ) h_k on the grid at every node.
    let nodes: Vec<Vec<Complex64>> = (0..=n)
        .into_par_iter()
        .map(|j| {
            let xi = j as f64 * h;
            let uh = u.apply_batch(Complex64::new(0.0, -xi), &spatial)?;
            let gh: Vec<Complex64> = f.terms.iter().map(|term| term.transform_at(xi)).collect::<Result<_>>()?;
            Ok((0..grid.len()).map(|s| uh.iter().zip(&gh).map(|(v, g)| v[s] * g).sum()).collect())
        })
        .collect::<Result<_>>()?;
    let trace: Vec<(f64, f64)> = nodes.iter().enumerate().map(|(j, v)| (j as f64 * h, v.iter().map(|c| c.norm()).fold(0.0, f64::max))).collect();
    let spectral = u.spectral();
    let mut estimates = Vec::with_capacity(sites.len());
    for (x, a, t) in sites {
        let (a, t) = (*a, *t);
        let values: Vec<Complex64> = nodes.iter().map(|v| GridFunction::new(v.clone(), f.gamma).eval(&grid, x, a)).collect::<Result<_>>()?;
        let (fine, coarse) = symmetric_trapezoid(&values, h, t);
        // Σ_i p_i(x)/σ_i Σ_k ν_i(h_k) ∫_t^∞ g_k.
        let mut weights = vec![0.0; f.terms.len()];
        for i in 0..spectral.r {
            let p = GridFunction::from_real(&spectral.p[i], 1.0).eval(&grid, x, a)?.re;
            for (w, h_k) in weights.iter_mut().zip(&spatial) {
                *w += p / u.drifts()[i] * spectral.integrate(i, h_k).re;
            }
        }
        let mut pi0_term = 0.0;
        let mut pi0_error = 0.0;
        for (w, term) in weights.iter().zip(&f.terms) {
            if *w != 0.0 {
                let q = tail_integral(&term.derivatives[0], &term.breaks, t, opts.quad_tol)?;
                pi0_term += w * q.value;
                pi0_error += w.abs() * q.error;
            }
        }
        estimates.push(FourierEstimate { t, value: pi0_term + fine, pi0_term, oscillatory: fine, cutoff_bound, step_error: (fine - coarse).abs(), pi0_error });
    }
    Ok(FourierGreen { estimates, trace, step: h })
}

/// Values on the finer of two grids with the coarse-to-fine change attached
/// as `discretization_error`.
#[derive(Clone, Debug)]
pub struct RefinedFourier {
    pub fine: FourierGreen,
    pub discretization_error: Vec<f64>,
}

impl RefinedFourier {
    /// Quadrature and discretization error of estimate `i`.
    pub fn error_bound(&self, i: usize) -> f64 {
        self.fine.estimates[i].error_bound() + self.discretization_error[i]
    }
}

pub fn fourier_green_refined(coarse: &UOperator, fine: &UOperator, f: &RegularFunction, sites: &[(Vec<f64>, usize, f64)], opts: &FourierOptions) -> Result<RefinedFourier> {
    let c = fourier_green_at(coarse, f, sites, opts)?;
    let fine = fourier_green_at(fine, f, sites, opts)?;
    let discretization_error = c.estimates.iter().zip(&fine.estimates).map(|(a, b)| (a.value - b.value).abs()).collect();
    Ok(RefinedFourier { fine, discretization_error })
}

/// `(1/π) Ĉ' Σ_k ‖h_k‖_γ ∫_X^∞ (1 + ξ)^{L+1} |ĝ_k(ξ)| dξ`, with `|ĝ_k|` in
/// closed form when available and otherwise bounded by
/// `(‖g_k‖_1 + ‖g_k^{(K)}‖_1) / (1 + ξ^K)`. `Ĉ'` adds the pole part
/// `Σ_i ‖p_i‖_γ / (σ_i X)` to the scan constant.
fn cutoff_tail(u: &UOperator, f: &RegularFunction, spatial: &[Vec<Complex64>], opts: &FourierOptions, k: usize) -> Result<f64> {
    let grid = u.grid();
    let norm = HolderNorm::new(grid, f.gamma, false)?;
    let x = opts.cutoff;
    let spectral = u.spectral();
    let pole: f64 = (0..spectral.r)
        .map(|i| {
            let p: Vec<Complex64> = spectral.p[i].iter().map(|v| Complex64::new(*v, 0.0)).collect();
            norm.norm(&p) / (u.drifts()[i].abs() * x)
        })
        .sum();
    let c = opts.resolvent_c + pole;
    let growth = opts.resolvent_l + 1.0;
    let mut total = 0.0;
    for (term, h) in f.terms.iter().zip(spatial) {
        let hn = norm.norm(h);
        if hn == 0.0 {
            continue;
        }
        let tail = match &term.transform {
            Some(tr) => integrate_to_infinity(&|xi: f64| (1.0 + xi).powf(growth) * tr(xi).norm(), x, 4.0, &[], 1e-16, 10_000)?.value,
            None => {
                let l1 = term.l1_norm(0)? + term.l1_norm(k)?;
                l1 * integrate_to_infinity(&|xi: f64| (1.0 + xi).powf(growth) / (1.0 + xi.powi(k as i32)), x, 16.0, &[], 1e-12, 100_000)?.value
            }
        };
        total += hn * tail;
    }
    Ok(c * total / PI)
}

#[derive(Clone, Copy, Debug)]
pub struct BoundaryOptions {
    pub cutoff: f64,
    pub step: f64,
}

impl Default for BoundaryOptions {
    fn default() -> Self {
        BoundaryOptions { cutoff: 10.0, step: 0.05 }
    }
}

#[derive(Clone, Debug)]
pub struct BoundaryRenewal {
    /// `(t, (G - Π₀/σ) f(x, a, t))` for `f = p(a) ψ(t)`.
    pub values: Vec<(f64, f64)>,
    /// `N_1 p (x, a) = U(0) p`, the limit as `t → -∞`.
    pub limit: f64,
    pub step_error: Vec<f64>,
}

/// `(G - Π₀/σ)(p ψ)(x, a, t) = N_1 p ψ(t) - (1/2π) ∫ e^{iξt} V(-iξ) p e^{-ξ²/2} dξ`
/// where `V(z) = (U(z) - U(0)) / z`; the `Π₀` part vanishes because `p` has
/// zero sum.
pub fn boundary_renewal(u: &UOperator, p: &[f64], x: &[f64], a: usize, t_values: &[f64], opts: &BoundaryOptions) -> Result<BoundaryRenewal> {
    let grid = u.grid().clone();
    if grid.a_size() < 2 || p.len() != grid.a_size() {
        return Err(Error::precondition("p needs one value per element of a nontrivial A"));
    }
    let scale = p.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if p.iter().sum::<f64>().abs() > 1e-12 * scale.max(1e-300) {
        return Err(Error::precondition("p must have zero sum over A"));
    }
    if scale == 0.0 {
        return Ok(BoundaryRenewal { values: t_values.iter().map(|&t| (t, 0.0)).collect(), limit: 0.0, step_error: vec![0.0; t_values.len()] });
    }
    let pg = real_grid_values(&grid, |_, b| p[b]);
    let u0 = u.apply_zero(&pg)?;
    let limit = GridFunction::new(u0.clone(), 1.0).eval(&grid, x, a)?.re;
    let mut n = (opts.cutoff / opts.step).ceil() as usize;
    n += n % 2;
    let h = opts.cutoff / n as f64;
    let values: Vec<Complex64> = (0..=n)
        .into_par_iter()
        .map(|j| {
            let xi = j as f64 * h;
            let v = u.apply_v(Complex64::new(0.0, -xi), &pg, &u0)?;
            Ok(GridFunction::new(v, 1.0).eval(&grid, x, a)? * (-xi * xi / 2.0).exp())
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(t_values.len());
    let mut step_error = Vec::with_capacity(t_values.len());
    for &t in t_values {
        let (fine, coarse) = symmetric_trapezoid(&values, h, t);
        out.push((t, limit * psi(t) - fine));
        step_error.push((fine - coarse).abs());
    }
    Ok(BoundaryRenewal { values: out, limit, step_error })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_of_gaussian_transform() {
        // (1/2π) ∫ e^{iξt} √(2π) e^{-ξ²/2} dξ = e^{-t²/2}.
        let h = 0.05;
        let vals: Vec<Complex64> = (0..=200).map(|j| Complex64::new((2.0 * PI).sqrt() * (-(j as f64 * h).powi(2) / 2.0).exp(), 0.0)).collect();
        for &t in &[0.0, 1.0, -2.5] {
            let (fine, coarse) = symmetric_trapezoid(&vals, h, t);
            assert!((fine - (-t * t / 2.0f64).exp()).abs() < 1e-12);
            assert!((fine - coarse).abs() < 1e-10);
        }
    }
}
