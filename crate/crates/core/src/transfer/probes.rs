use std::sync::Arc;

use num_complex::Complex64;

use super::function::{random_probe, GridFunction, HolderNorm};
use super::grid::StateGrid;
use super::operator::{build_operator, DiscretizedOperator};
use crate::error::{Error, Result};
use crate::matrix::{wedge2, GroupElement, ProjectivePoint};
use crate::measure::GeneratorMeasure;
use crate::rng::{purpose, stream};
use crate::stats::linear_fit;
use crate::walk::EmpiricalMeasure;

fn c(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

#[derive(Clone, Debug)]
pub struct DolgopyatResult {
    pub found: bool,
    /// Witness state and power when `found`.
    pub x0: Option<usize>,
    pub n: Option<usize>,
    pub value: Option<f64>,
    /// `‖P_e(it)^n f‖_∞` for every probed `n`.
    pub sup_norms: Vec<f64>,
    /// When nothing was found: `∫ |e^{-itσ(g,x)} f(gx) - f(x)|² dρ_e^{*n}(g)`
    /// at each regular point, `n = ⌊β ln|t|⌋`.
    pub defects: Option<Vec<(usize, f64)>>,
}

/// States `(x, a)` whose direction is `Δ`-regular for `nu` at scale `r`:
/// `ν(B(x, r)) ≥ c r^Δ`.
pub fn regular_points(grid: &StateGrid, nu: &EmpiricalMeasure, r: f64, delta: f64, c: f64) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for s in 0..grid.len() {
        let (x, _) = grid.state(s);
        let mass = nu.mass_in_ball(&ProjectivePoint::from_slice(x)?, r)?;
        if mass >= c * r.powf(delta) {
            out.push(s);
        }
    }
    Ok(out)
}

/// Looks for `n ≤ ⌊β ln|t|⌋` and a regular `x_0` with
/// `|P_e(it)^n f(x_0)| ≤ 1 - |t|^{-α_1}`.
pub fn dolgopyat_probe(p_lazy: &DiscretizedOperator, f: &GridFunction, t: f64, alpha1: f64, beta: f64, regular: &[usize]) -> Result<DolgopyatResult> {
    if regular.is_empty() {
        return Err(Error::EmptyRegularSet);
    }
    let threshold = 1.0 - t.abs().powf(-alpha1);
    let n_max = (beta * t.abs().ln()).floor().max(0.0) as usize;
    let mut g = f.values.clone();
    let mut sup_norms = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        if n > 0 {
            g = p_lazy.apply(&g);
        }
        sup_norms.push(g.iter().map(|v| v.norm()).fold(0.0, f64::max));
        if let Some(&s) = regular.iter().find(|&&s| g[s].norm() <= threshold) {
            return Ok(DolgopyatResult { found: true, x0: Some(s), n: Some(n), value: Some(g[s].norm()), sup_norms, defects: None });
        }
    }
    // ∫|e^{-itσ} f(gx) - f(x)|² = P(0)^n|f|²(x) - 2 Re(conj f(x) P(it)^n f(x)) + |f(x)|².
    let p0 = build_operator(p_lazy.rho(), c(0.0), p_lazy.grid())?;
    let sq: Vec<Complex64> = f.values.iter().map(|v| c(v.norm_sqr())).collect();
    let m2 = p0.apply_n(&sq, n_max);
    let defects = regular.iter().map(|&s| (s, (m2[s].re - 2.0 * (f.values[s].conj() * g[s]).re + f.values[s].norm_sqr()).max(0.0))).collect();
    Ok(DolgopyatResult { found: false, x0: None, n: None, value: None, sup_norms, defects: Some(defects) })
}

/// `sup_x P(s)^n 1(x)` over a table of `s` and `n`.
#[derive(Clone, Debug)]
pub struct DriftTable {
    pub s_values: Vec<f64>,
    pub n_values: Vec<usize>,
    /// `sup[i][j]` for `s_values[i]`, `n_values[j]`.
    pub sup: Vec<Vec<f64>>,
    /// Fitted `t̂` with `sup ≈ C e^{-t̂ s n}`; zero for `s = 0`.
    pub rates: Vec<f64>,
}

/// `sup_x ∫ e^{-sσ(g,x)} dρ^{*n}(g) ≤ c e^{-rate·s·n}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriftBound {
    pub s: f64,
    pub c: f64,
    pub rate: f64,
}

impl DriftBound {
    pub fn at(&self, n: usize) -> f64 {
        self.c * (-self.rate * self.s * n as f64).exp()
    }
}

impl DriftTable {
    /// Bound for `s_values[i]` with the fitted rate halved (safety factor 2)
    /// and the constant chosen to dominate every tabulated value.
    pub fn bound(&self, i: usize) -> DriftBound {
        let s = self.s_values[i];
        let rate = self.rates[i] / 2.0;
        let c = self.n_values.iter().zip(&self.sup[i]).map(|(&n, v)| v * (rate * s * n as f64).exp()).fold(1.0, f64::max);
        DriftBound { s, c, rate }
    }
}

pub fn drift_check(rho: &GeneratorMeasure, grid: &Arc<StateGrid>, s_values: &[f64], n_values: &[usize]) -> Result<DriftTable> {
    let n_max = n_values.iter().copied().max().unwrap_or(0);
    let mut sup = Vec::with_capacity(s_values.len());
    let mut rates = Vec::with_capacity(s_values.len());
    for &s in s_values {
        let op = build_operator(rho, c(s), grid)?;
        let mut g = vec![c(1.0); grid.len()];
        let mut row = Vec::with_capacity(n_values.len());
        for n in 0..=n_max {
            if n > 0 {
                g = op.apply(&g);
            }
            if n_values.contains(&n) {
                row.push(g.iter().map(|v| v.re).fold(f64::NEG_INFINITY, f64::max));
            }
        }
        let rate = if s > 0.0 && n_values.len() >= 2 {
            let x: Vec<f64> = n_values.iter().map(|&n| n as f64).collect();
            let y: Vec<f64> = row.iter().map(|v| v.ln()).collect();
            -linear_fit(&x, &y).0 / s
        } else {
            0.0
        };
        sup.push(row);
        rates.push(rate);
    }
    Ok(DriftTable { s_values: s_values.to_vec(), n_values: n_values.to_vec(), sup, rates })
}

/// `[σ]_M` and `[σ]_∞` of the norm cocycle, with suprema over all words of
/// length at most `max_len` and over grid points (pairs within a fiber for
/// the Lipschitz part).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CocycleBounds {
    pub m: f64,
    pub sigma_m: f64,
    pub sigma_inf: f64,
}

pub fn cocycle_bounds(rho: &GeneratorMeasure, grid: &StateGrid, m: f64, max_len: usize) -> CocycleBounds {
    let mut sigma_m: f64 = 0.0;
    let mut sigma_inf: f64 = 0.0;
    let pts: Vec<&[f64]> = (0..grid.sphere_len()).map(|i| grid.sphere_point(i)).collect();
    let mut y = vec![0.0; grid.dim()];
    for g in words(rho, max_len) {
        let n = g.norm();
        let sig: Vec<f64> = pts.iter().map(|x| crate::matrix::sigma_slice(&g, x, &mut y)).collect();
        let sup = sig.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let mut lip: f64 = 0.0;
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                let d: f64 = pts[i].iter().zip(pts[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                lip = lip.max((sig[i] - sig[j]).abs() / d);
            }
        }
        sigma_m = sigma_m.max(lip / n.powf(m));
        sigma_inf = sigma_inf.max(sup.exp() / n.powf(m));
    }
    CocycleBounds { m, sigma_m, sigma_inf }
}

/// Products of all words of length `1..=max_len` (no weights).
fn words(rho: &GeneratorMeasure, max_len: usize) -> Vec<GroupElement> {
    let mut out = Vec::new();
    let mut layer = vec![GroupElement::identity(rho.dim())];
    for _ in 0..max_len {
        layer = layer.iter().flat_map(|h| rho.atoms().iter().map(move |a| a.g.mul(h))).collect();
        out.extend(layer.iter().cloned());
    }
    out
}

/// All words of length `n` with their probabilities.
pub fn weighted_words(rho: &GeneratorMeasure, n: usize) -> Vec<(GroupElement, f64)> {
    let mut layer = vec![(GroupElement::identity(rho.dim()), 1.0)];
    for _ in 0..n {
        layer = layer.iter().flat_map(|(h, p)| rho.atoms().iter().map(move |a| (a.g.mul(h), p * a.weight))).collect();
    }
    layer
}

/// `u_n = sup_{x ≠ y} ∫ d(gx, gy)^γ / d(x, y)^γ dρ^{*n}(g)` on projective
/// space, computed exactly over words for `n = 1..=n_max` and over pairs of
/// `points` equally spaced directions.
pub fn contraction_coefficients(rho: &GeneratorMeasure, gamma: f64, n_max: usize, points: usize) -> Result<Vec<f64>> {
    if rho.dim() != 2 {
        return Err(Error::Dimension("contraction coefficients are tabulated on the circle".into()));
    }
    let dirs: Vec<[f64; 2]> = (0..points).map(|k| {
        let th = std::f64::consts::PI * (k as f64 + 0.5) / points as f64;
        [th.cos(), th.sin()]
    }).collect();
    let mut out = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let ws = weighted_words(rho, n);
        let images: Vec<Vec<[f64; 2]>> = ws
            .iter()
            .map(|(g, _)| {
                dirs.iter()
                    .map(|x| {
                        let mut y = [0.0; 2];
                        g.apply_slice(x, &mut y);
                        let s = (y[0] * y[0] + y[1] * y[1]).sqrt();
                        [y[0] / s, y[1] / s]
                    })
                    .collect()
            })
            .collect();
        let mut best: f64 = 0.0;
        for i in 0..points {
            for j in (i + 1)..points {
                let d = wedge2(&dirs[i], &dirs[j]);
                let mut acc = 0.0;
                for (k, (_, p)) in ws.iter().enumerate() {
                    acc += p * wedge2(&images[k][i], &images[k][j]).powf(gamma);
                }
                best = best.max(acc / d.powf(gamma));
            }
        }
        out.push(best);
    }
    Ok(out)
}

/// `m_γ(P(it)^n f) ≤ C (e^{-δ n} m_γ(f) + (1 + |t|) ‖f‖_∞)`.
#[derive(Clone, Debug)]
pub struct DoeblinFortet {
    pub c: f64,
    pub delta: f64,
    /// Largest ratio seen on held-out probes; at most `c` when the shape
    /// generalizes.
    pub held_out_ratio: f64,
    pub samples: usize,
}

/// Candidate contraction rates for the Doeblin–Fortet fit.
const DF_DELTAS: [f64; 12] = [0.01, 0.02, 0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5, 0.75, 1.0, 1.5];

/// Fits the inequality on half of the probes and reports the worst ratio on
/// the other half. For each candidate `δ` the constant is the smallest one
/// making the inequality hold on the training half; `δ̂` is the largest
/// candidate whose constant stays within twice the `δ = 0` constant.
pub fn doeblin_fortet_fit(rho: &GeneratorMeasure, grid: &Arc<StateGrid>, gamma: f64, t_values: &[f64], n_max: usize, probes: usize, seed: u64) -> Result<DoeblinFortet> {
    let norm = HolderNorm::new(grid, gamma, false)?;
    let mut rng = stream(seed, purpose::PROBES, 2);
    let fs: Vec<GridFunction> = (0..probes).map(|_| random_probe(grid, gamma, &mut rng)).collect();
    // (training?, n, m_γ(P^n f), m_γ(f), (1 + |t|) ‖f‖_∞)
    let mut rows = Vec::new();
    for &t in t_values {
        let op = build_operator(rho, Complex64::new(0.0, t), grid)?;
        for (k, f) in fs.iter().enumerate() {
            let m0 = norm.seminorm(&f.values);
            let s0 = (1.0 + t.abs()) * f.sup_norm();
            let mut g = f.values.clone();
            for n in 1..=n_max {
                g = op.apply(&g);
                rows.push((k % 2 == 0, n as f64, norm.seminorm(&g), m0, s0));
            }
        }
    }
    let constant = |delta: f64, train: bool| rows.iter().filter(|r| r.0 == train).map(|r| r.2 / ((-delta * r.1).exp() * r.3 + r.4)).fold(0.0, f64::max);
    let base = constant(0.0, true).max(1.0);
    let delta = DF_DELTAS.iter().copied().filter(|&d| constant(d, true) <= 2.0 * base).fold(0.0, f64::max);
    let c = constant(delta, true).max(1.0);
    let held_out_ratio = constant(delta, false);
    Ok(DoeblinFortet { c, delta, held_out_ratio, samples: rows.len() })
}

/// Largest measured `‖P(it)^n f‖_{(t)} / ‖f‖_{(t)}` over probes, `t` and
/// `n ≤ n_max`.
pub fn t_norm_iterate_ratio(rho: &GeneratorMeasure, grid: &Arc<StateGrid>, gamma: f64, c2: f64, t_values: &[f64], n_max: usize, probes: usize, seed: u64) -> Result<f64> {
    let norm = HolderNorm::new(grid, gamma, false)?;
    let mut rng = stream(seed, purpose::PROBES, 3);
    let fs: Vec<GridFunction> = (0..probes).map(|_| random_probe(grid, gamma, &mut rng)).collect();
    let tn = |v: &[Complex64], t: f64| {
        let s = v.iter().map(|x| x.norm()).fold(0.0, f64::max);
        s.max(norm.seminorm(v) / (2.0 * c2 * t.abs()))
    };
    let mut worst: f64 = 0.0;
    for &t in t_values {
        let op = build_operator(rho, Complex64::new(0.0, t), grid)?;
        for f in &fs {
            let base = tn(&f.values, t);
            let mut g = f.values.clone();
            for _ in 1..=n_max {
                g = op.apply(&g);
                worst = worst.max(tn(&g, t) / base);
            }
        }
    }
    Ok(worst)
}
