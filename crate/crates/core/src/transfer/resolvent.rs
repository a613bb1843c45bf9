use std::sync::Arc;

use nalgebra::{DMatrix, DVector, LU};
use num_complex::Complex64;
use rand::Rng;

use super::function::{random_probe, GridFunction, HolderNorm};
use super::grid::StateGrid;
use super::operator::{build_operator, DiscretizedOperator};
use super::spectral::SpectralData;
use crate::error::{Error, Result};
use crate::measure::GeneratorMeasure;
use crate::rng::{purpose, stream};
use crate::stats::linear_fit;

/// Relative smallest-singular-value level below which `I - P(z)` counts as
/// singular.
pub const SINGULAR_TOL: f64 = 1e-9;

/// Required relative residual of a resolvent solve.
pub const RESIDUAL_TOL: f64 = 1e-8;

type Dyn = nalgebra::Dyn;

/// LU factorization of `I - P(z)`.
pub struct Resolvent {
    op: DiscretizedOperator,
    lu: LU<Complex64, Dyn, Dyn>,
    /// Estimate of the smallest singular value of `I - P(z)` from inverse
    /// iteration.
    pub sigma_min: f64,
}

impl Resolvent {
    pub fn new(op: &DiscretizedOperator) -> Result<Self> {
        let n = op.len();
        let a = DMatrix::<Complex64>::identity(n, n) - op.to_dense();
        let scale = a.row_iter().map(|r| r.iter().map(|v| v.norm()).sum::<f64>()).fold(0.0, f64::max).max(1.0);
        let lu = a.lu();
        let z = op.z();
        let singular = |sigma_min: f64| Error::Singular { re: z.re, im: z.im, sigma_min };
        // Inverse iteration from a fixed pseudo-random start.
        let mut rng = stream(0x5eed, purpose::PROBES, 0);
        let mut v = DVector::from_fn(n, |_, _| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        v /= Complex64::new(v.norm(), 0.0);
        let mut growth = 0.0;
        for _ in 0..4 {
            let w = lu.solve(&v).ok_or_else(|| singular(0.0))?;
            growth = w.norm();
            if !growth.is_finite() {
                return Err(singular(0.0));
            }
            v = w / Complex64::new(growth, 0.0);
        }
        let sigma_min = 1.0 / growth;
        if sigma_min < SINGULAR_TOL * scale {
            return Err(singular(sigma_min));
        }
        Ok(Resolvent { op: op.clone(), lu, sigma_min })
    }

    pub fn operator(&self) -> &DiscretizedOperator {
        &self.op
    }

    /// Solves `(I - P) g = f` with one step of iterative refinement; returns
    /// `g` and the relative sup-norm residual.
    pub fn solve(&self, f: &[Complex64]) -> Result<(Vec<Complex64>, f64)> {
        let fnorm = f.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if fnorm == 0.0 {
            return Ok((vec![Complex64::new(0.0, 0.0); f.len()], 0.0));
        }
        let z = self.op.z();
        let b = DVector::from_column_slice(f);
        let mut x = self.lu.solve(&b).ok_or(Error::Singular { re: z.re, im: z.im, sigma_min: 0.0 })?;
        let mut residual = 0.0;
        for _ in 0..2 {
            let ax = self.op.apply_i_minus(x.as_slice());
            let r = DVector::from_iterator(f.len(), f.iter().zip(&ax).map(|(a, b)| a - b));
            residual = r.iter().map(|v| v.norm()).fold(0.0, f64::max) / fnorm;
            if residual <= RESIDUAL_TOL * 1e-3 {
                break;
            }
            if let Some(dx) = self.lu.solve(&r) {
                x += dx;
            }
        }
        let ax = self.op.apply_i_minus(x.as_slice());
        residual = residual.min(f.iter().zip(&ax).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / fnorm);
        if !(residual <= RESIDUAL_TOL) {
            return Err(Error::Singular { re: z.re, im: z.im, sigma_min: self.sigma_min });
        }
        Ok((x.as_slice().to_vec(), residual))
    }
}

/// `g` with `(I - P(z)) g = f`.
pub fn resolvent_apply(op: &DiscretizedOperator, f: &GridFunction) -> Result<GridFunction> {
    let (g, _) = Resolvent::new(op)?.solve(&f.values)?;
    Ok(GridFunction::new(g, f.gamma))
}

/// Truncated Neumann series `Σ_{n<N} P^n f`, the oracle for `Re z > 0`.
pub fn neumann_series(op: &DiscretizedOperator, f: &[Complex64], terms: usize) -> Vec<Complex64> {
    let mut acc = f.to_vec();
    let mut cur = f.to_vec();
    for _ in 1..terms {
        cur = op.apply(&cur);
        for (a, c) in acc.iter_mut().zip(&cur) {
            *a += c;
        }
    }
    acc
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanPoint {
    pub t: f64,
    pub norm_estimate: f64,
    /// Largest relative residual among the solves at this `t`.
    pub residual: f64,
    pub grid_size: usize,
}

/// `‖(I - P(it))^{-1}‖ ≈ Ĉ |t|^{L̂}`; `c_hat` is the smallest constant for
/// which the fitted power dominates every scanned point.
#[derive(Clone, Debug)]
pub struct ResolventScan {
    pub points: Vec<ScanPoint>,
    pub l_hat: f64,
    pub c_hat: f64,
    /// Root mean square of the log-log fit residuals.
    pub fit_rms: f64,
    pub gamma: f64,
    pub probes: usize,
}

/// Randomized estimate of the operator norm of `(I - P(it))^{-1}` in
/// `‖·‖_∞ + m_γ`: `probes` smooth random functions, each followed by
/// `power_steps` normalized applications; the largest ratio is kept.
pub fn resolvent_norm_estimate(res: &Resolvent, norm: &HolderNorm, probes: &[GridFunction], power_steps: usize) -> Result<(f64, f64)> {
    let mut best: f64 = 0.0;
    let mut worst_residual: f64 = 0.0;
    for p in probes {
        let mut f = p.values.clone();
        for _ in 0..power_steps.max(1) {
            let nf = norm.norm(&f);
            let (g, r) = res.solve(&f)?;
            worst_residual = worst_residual.max(r);
            let ng = norm.norm(&g);
            best = best.max(ng / nf);
            f = g.into_iter().map(|v| v / ng).collect();
        }
    }
    Ok((best, worst_residual))
}

pub const DEFAULT_PROBES: usize = 20;
pub const DEFAULT_POWER_STEPS: usize = 3;

pub fn resolvent_scan(rho: &GeneratorMeasure, grid: &Arc<StateGrid>, gamma: f64, t_values: &[f64], seed: u64) -> Result<ResolventScan> {
    resolvent_scan_with(rho, grid, gamma, t_values, seed, DEFAULT_PROBES, DEFAULT_POWER_STEPS)
}

pub fn resolvent_scan_with(
    rho: &GeneratorMeasure,
    grid: &Arc<StateGrid>,
    gamma: f64,
    t_values: &[f64],
    seed: u64,
    probes: usize,
    power_steps: usize,
) -> Result<ResolventScan> {
    if t_values.is_empty() || t_values.iter().any(|t| t.abs() < 2.0) {
        return Err(Error::precondition("scan needs |t| >= 2"));
    }
    let norm = HolderNorm::new(grid, gamma, false)?;
    let mut rng = stream(seed, purpose::PROBES, 1);
    let probe_fns: Vec<GridFunction> = (0..probes).map(|_| random_probe(grid, gamma, &mut rng)).collect();
    let mut points = Vec::with_capacity(t_values.len());
    for &t in t_values {
        let op = build_operator(rho, Complex64::new(0.0, t), grid)?;
        let res = Resolvent::new(&op)?;
        let (est, residual) = resolvent_norm_estimate(&res, &norm, &probe_fns, power_steps)?;
        points.push(ScanPoint { t, norm_estimate: est, residual, grid_size: grid.len() });
    }
    let x: Vec<f64> = points.iter().map(|p| p.t.abs().ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.norm_estimate.ln()).collect();
    let (l_hat, intercept) = if points.len() >= 2 { linear_fit(&x, &y) } else { (0.0, y[0]) };
    let fit_rms = (x.iter().zip(&y).map(|(a, b)| (b - intercept - l_hat * a).powi(2)).sum::<f64>() / x.len() as f64).sqrt();
    let c_hat = points.iter().map(|p| p.norm_estimate / p.t.abs().powf(l_hat)).fold(0.0, f64::max);
    Ok(ResolventScan { points, l_hat, c_hat, fit_rms, gamma, probes })
}

/// Per-class drift `σ_i = Σ_x ν_i(x) Σ_g w_g σ(g, x)` of the discretized
/// walk; the pole of `(I - P(z))^{-1}` at zero is `Σ_i p_i ν_i / (σ_i z)`.
pub fn class_drifts(spectral: &SpectralData, grid: &StateGrid, rho: &GeneratorMeasure) -> Vec<f64> {
    let mut y = vec![0.0; grid.dim()];
    (0..spectral.r)
        .map(|i| {
            spectral.nu[i]
                .iter()
                .enumerate()
                .filter(|(_, w)| **w > 0.0)
                .map(|(s, w)| {
                    let (x, _) = grid.state(s);
                    w * rho.atoms().iter().map(|a| a.weight * crate::matrix::sigma_slice(&a.g, x, &mut y)).sum::<f64>()
                })
                .sum()
        })
        .collect()
}

/// `U(z) = (I - P(z))^{-1} - Σ_i p_i ν_i / (σ_i z)`, the resolvent with its
/// pole at zero removed.
pub struct UOperator {
    rho: GeneratorMeasure,
    grid: Arc<StateGrid>,
    spectral: SpectralData,
    drifts: Vec<f64>,
    eta: f64,
    /// Lower boundary of the domain: `Re z > -1 / (c (1 + |Im z|)^{l + 1})`.
    pub domain: (f64, f64),
}

/// Half-distance used to evaluate `U` and its derivative at zero.
pub const ZERO_STEP: f64 = 1e-4;

impl UOperator {
    pub fn new(rho: &GeneratorMeasure, grid: &Arc<StateGrid>, spectral: &SpectralData) -> Self {
        UOperator {
            rho: rho.clone(),
            grid: grid.clone(),
            drifts: class_drifts(spectral, grid, rho),
            spectral: spectral.clone(),
            eta: super::operator::ETA,
            domain: (1.0, 0.0),
        }
    }

    pub fn with_domain(mut self, c: f64, l: f64) -> Self {
        self.domain = (c, l);
        self
    }

    pub fn drifts(&self) -> &[f64] {
        &self.drifts
    }

    pub fn spectral(&self) -> &SpectralData {
        &self.spectral
    }

    pub fn grid(&self) -> &Arc<StateGrid> {
        &self.grid
    }

    fn check_domain(&self, z: Complex64) -> Result<()> {
        let (c, l) = self.domain;
        let lower = -1.0 / (c * (1.0 + z.im.abs()).powf(l + 1.0));
        if !(z.re > lower && z.re < self.eta) {
            return Err(Error::OutOfDomain { re: z.re, im: z.im });
        }
        Ok(())
    }

    /// Pole part `Σ_i p_i ∫ f dν_i / (σ_i z)`.
    pub fn pole(&self, z: Complex64, f: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); f.len()];
        for i in 0..self.spectral.r {
            let c = self.spectral.integrate(i, f) / (z * self.drifts[i]);
            for (o, p) in out.iter_mut().zip(&self.spectral.p[i]) {
                *o += c * *p;
            }
        }
        out
    }

    /// `U(z) f` together with `(I - P(z))^{-1} f`.
    pub fn apply_parts(&self, z: Complex64, f: &[Complex64]) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
        if z.norm() == 0.0 {
            return Err(Error::precondition("U(0) is a limit; use apply_zero"));
        }
        self.check_domain(z)?;
        let op = build_operator(&self.rho, z, &self.grid)?;
        let (r, _) = Resolvent::new(&op)?.solve(f)?;
        let pole = self.pole(z, f);
        Ok((r.iter().zip(&pole).map(|(a, b)| a - b).collect(), r))
    }

    /// `U(z) f` for several right-hand sides sharing one factorization;
    /// `z = 0` is handled as in [`UOperator::apply_zero`].
    pub fn apply_batch(&self, z: Complex64, fs: &[Vec<Complex64>]) -> Result<Vec<Vec<Complex64>>> {
        if z.norm() == 0.0 {
            let a = self.apply_batch(Complex64::new(0.0, ZERO_STEP), fs)?;
            let b = self.apply_batch(Complex64::new(0.0, -ZERO_STEP), fs)?;
            return Ok(a.iter().zip(&b).map(|(u, v)| u.iter().zip(v).map(|(x, y)| (x + y) * 0.5).collect()).collect());
        }
        self.check_domain(z)?;
        let op = build_operator(&self.rho, z, &self.grid)?;
        let res = Resolvent::new(&op)?;
        fs.iter()
            .map(|f| {
                let (r, _) = res.solve(f)?;
                let pole = self.pole(z, f);
                Ok(r.iter().zip(&pole).map(|(a, b)| a - b).collect())
            })
            .collect()
    }

    pub fn apply(&self, z: Complex64, f: &[Complex64]) -> Result<Vec<Complex64>> {
        if z.norm() == 0.0 {
            return self.apply_zero(f);
        }
        Ok(self.apply_parts(z, f)?.0)
    }

    /// `N_1 f = U(0) f` as the symmetric average of `U(±iε)`.
    pub fn apply_zero(&self, f: &[Complex64]) -> Result<Vec<Complex64>> {
        let a = self.apply(Complex64::new(0.0, ZERO_STEP), f)?;
        let b = self.apply(Complex64::new(0.0, -ZERO_STEP), f)?;
        Ok(a.iter().zip(&b).map(|(x, y)| (x + y) * 0.5).collect())
    }

    /// `V(z) = (U(z) - U(0)) / z`, with the symmetric difference at zero.
    pub fn apply_v(&self, z: Complex64, f: &[Complex64], u0: &[Complex64]) -> Result<Vec<Complex64>> {
        if z.norm() < ZERO_STEP {
            let e = Complex64::new(0.0, ZERO_STEP);
            let a = self.apply(e, f)?;
            let b = self.apply(-e, f)?;
            return Ok(a.iter().zip(&b).map(|(x, y)| (x - y) / (e * 2.0)).collect());
        }
        let u = self.apply(z, f)?;
        Ok(u.iter().zip(u0).map(|(x, y)| (x - y) / z).collect())
    }
}
