use crate::error::{Error, Result};
use crate::matrix::{dual_pairing, proj_distance, DualProjectivePoint, GroupElement, ProjectivePoint};
use crate::measure::GeneratorMeasure;
use crate::proximality::auto_certify;
use crate::rng::{map_partitions, purpose};
use crate::stats::{linear_fit, proportion, quantile};

use super::{lyapunov_spectrum, sample_word, word_product, EmpiricalMeasure, MAX_LOG_NORM};

fn check_length(rho: &GeneratorMeasure, n: usize) -> Result<()> {
    let worst = rho.atoms().iter().map(|a| a.g.norm().ln()).fold(0.0, f64::max);
    if n == 0 || worst * n as f64 > MAX_LOG_NORM {
        return Err(Error::precondition(format!("product length {n} out of range")));
    }
    Ok(())
}

fn sampled_products(rho: &GeneratorMeasure, n: usize, count: usize, seed: u64, tag: u64) -> Vec<GroupElement> {
    map_partitions(count, seed, tag, |rng, range| range.map(|_| word_product(rho, &sample_word(rho, n, rng)).0).collect::<Vec<_>>())
        .into_iter()
        .flatten()
        .collect()
}

#[derive(Clone, Debug)]
pub struct RegularityProbe {
    /// Fraction of certified samples passing at `delta_estimate`.
    pub pass_fraction: f64,
    pub delta_estimate: f64,
    /// Smallest passing exponent `-ln ν(B(V_g^+, r)) / (M n)` per certified
    /// sample (infinite when the ball carries no mass).
    pub sample_deltas: Vec<f64>,
    pub certified: usize,
    pub count: usize,
}

impl RegularityProbe {
    pub fn pass_fraction_at(&self, delta: f64) -> f64 {
        self.sample_deltas.iter().filter(|&&d| d <= delta).count() as f64 / self.sample_deltas.len().max(1) as f64
    }
}

/// Lower regularity of `nu` at the attracting directions of `ρ^{*n}`, on
/// balls of radius `e^{-Mn}`; `t_rate` sets the target pass fraction
/// `1 - e^{-t n}`.
pub fn regularity_probe(rho: &GeneratorMeasure, nu: &EmpiricalMeasure, n: usize, m: f64, count: usize, seed: u64, t_rate: f64) -> Result<RegularityProbe> {
    let r = (-m * n as f64).exp();
    if nu.resolution() >= r {
        return Err(Error::Resolution(format!("ball radius {r:e} below measure resolution {:e}", nu.resolution())));
    }
    check_length(rho, n)?;
    let mut deltas = Vec::new();
    for g in sampled_products(rho, n, count, seed, purpose::REGULARITY) {
        if let Some(cert) = auto_certify(&g) {
            let mass = nu.mass_in_ball(&cert.v_plus, r)?;
            deltas.push(if mass > 0.0 { (-mass.ln() / (m * n as f64)).max(0.0) } else { f64::INFINITY });
        }
    }
    let target = 1.0 - (-t_rate * n as f64).exp();
    let delta_estimate = if deltas.is_empty() || target <= 0.0 { 0.0 } else { quantile(&deltas, target) };
    let mut out = RegularityProbe { pass_fraction: 0.0, delta_estimate, certified: deltas.len(), sample_deltas: deltas, count };
    out.pass_fraction = out.pass_fraction_at(delta_estimate);
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EventFrequency {
    pub frequency: f64,
    pub std_error: f64,
}

/// Fixed data of the six events.
#[derive(Clone, Debug)]
pub struct GenericityParams {
    pub x: ProjectivePoint,
    pub y: DualProjectivePoint,
    /// `λ_1 ≥ ... ≥ λ_d`.
    pub lyapunov: Vec<f64>,
}

impl GenericityParams {
    /// Generic-looking `x`, `y` and a QR estimate of the Lyapunov spectrum.
    pub fn default_for(rho: &GeneratorMeasure, seed: u64) -> Self {
        let d = rho.dim();
        let xv: Vec<f64> = (0..d).map(|i| 0.5f64.powi(i as i32)).collect();
        let yv: Vec<f64> = (0..d).map(|i| 0.5f64.powi((d - 1 - i) as i32) * if i % 2 == 1 { -1.0 } else { 1.0 }).collect();
        GenericityParams {
            x: ProjectivePoint::from_slice(&xv).expect("nonzero"),
            y: DualProjectivePoint::from_slice(&yv).expect("nonzero"),
            lyapunov: lyapunov_spectrum(rho, 2000, 64, seed),
        }
    }
}

/// Empirical frequencies of, in order:
/// `|ln κ_i(g)/n - λ_i| ≤ ε` for all `i`, `δ(x, y_g^m) ≥ 2e^{-εn}`,
/// `d(gx, x_g^M) ≤ e^{-(λ_1-λ_2-ε)n}`, `δ(x_g^M, y) ≥ 2e^{-εn}`,
/// `δ(gx, y) ≥ 2e^{-εn}` and `δ(x_g^M, y_g^m) ≥ 2e^{-εn}`.
#[derive(Clone, Debug)]
pub struct GenericityStats {
    pub events: [EventFrequency; 6],
    pub n: usize,
    pub epsilon: f64,
    pub count: usize,
}

pub fn genericity_stats(rho: &GeneratorMeasure, n: usize, epsilon: f64, count: usize, seed: u64) -> Result<GenericityStats> {
    let params = GenericityParams::default_for(rho, seed);
    genericity_stats_with(rho, n, epsilon, count, seed, &params)
}

pub fn genericity_stats_with(rho: &GeneratorMeasure, n: usize, epsilon: f64, count: usize, seed: u64, params: &GenericityParams) -> Result<GenericityStats> {
    check_length(rho, n)?;
    if count == 0 || params.lyapunov.len() != rho.dim() {
        return Err(Error::precondition("need count >= 1 and a full Lyapunov spectrum"));
    }
    let nf = n as f64;
    let thr = 2.0 * (-epsilon * nf).exp();
    let lam = &params.lyapunov;
    let contraction = (-(lam[0] - lam[1] - epsilon) * nf).exp();
    let mut hits = [0usize; 6];
    for g in sampled_products(rho, n, count, seed, purpose::GENERICITY) {
        let c = g.cartan();
        let gx = g.act(&params.x);
        let flags = [
            c.kappa.iter().zip(lam).all(|(k, l)| (k.ln() / nf - l).abs() <= epsilon),
            dual_pairing(&params.x, &c.y_m)? >= thr,
            proj_distance(&gx, &c.x_m)? <= contraction,
            dual_pairing(&c.x_m, &params.y)? >= thr,
            dual_pairing(&gx, &params.y)? >= thr,
            dual_pairing(&c.x_m, &c.y_m)? >= thr,
        ];
        for (h, f) in hits.iter_mut().zip(flags) {
            *h += f as usize;
        }
    }
    let events = hits.map(|h| {
        let p = proportion(h, count);
        EventFrequency { frequency: p.mean, std_error: p.se }
    });
    Ok(GenericityStats { events, n, epsilon, count })
}

/// Exponential rate `t̂ = min_n -ln(failure_n) / n` over a family of runs;
/// a run with no failures uses the half-count floor `0.5 / count`.
pub fn fitted_rate(runs: &[GenericityStats], event: usize) -> f64 {
    runs.iter()
        .map(|s| {
            let fail = (1.0 - s.events[event].frequency).max(0.5 / s.count as f64);
            -fail.ln() / s.n as f64
        })
        .fold(f64::INFINITY, f64::min)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiophantinePoint {
    pub b: f64,
    pub d: f64,
    pub std_error: f64,
    pub length: usize,
    pub certified_fraction: f64,
}

#[derive(Clone, Debug)]
pub struct DiophantineScan {
    pub points: Vec<DiophantinePoint>,
    /// Least-squares decay exponent of `D(b)` in `|b|`, floored at zero.
    pub alpha_hat: f64,
}

impl DiophantineScan {
    /// `min_b |b|^α D(b)` over the scan.
    pub fn lower_bound(&self, alpha: f64) -> f64 {
        self.points.iter().map(|p| p.b.abs().powf(alpha) * p.d).fold(f64::INFINITY, f64::min)
    }
}

/// `n(β, b) = ⌊β ln|b|⌋`.
pub fn diophantine_length(beta: f64, b: f64) -> usize {
    (beta * b.abs().ln()).floor().max(0.0) as usize
}

pub fn diophantine_scan(rho: &GeneratorMeasure, beta: f64, p: usize, b_values: &[f64], count: usize, seed: u64) -> Result<DiophantineScan> {
    if p == 0 || count == 0 {
        return Err(Error::precondition("need p >= 1 and count >= 1"));
    }
    for &b in b_values {
        if b.abs() < 2.0 || diophantine_length(beta, b) == 0 {
            return Err(Error::precondition(format!("b = {b} needs |b| >= 2 and n(beta, b) >= 1")));
        }
    }
    let mut points = Vec::with_capacity(b_values.len());
    for (k, &b) in b_values.iter().enumerate() {
        let length = p * diophantine_length(beta, b);
        check_length(rho, length)?;
        let tag = purpose::DIOPHANTINE | ((k as u64 + 1) << 16);
        let vals: Vec<Option<f64>> = sampled_products(rho, length, count, seed, tag)
            .iter()
            .map(|g| auto_certify(g).map(|c| 4.0 * (0.5 * b * c.lambda1).sin().powi(2)))
            .collect();
        let certified = vals.iter().filter(|v| v.is_some()).count();
        let xs: Vec<f64> = vals.iter().map(|v| v.unwrap_or(0.0)).collect();
        let m = crate::stats::mean_and_se(&xs);
        points.push(DiophantinePoint { b, d: m.mean, std_error: m.se, length, certified_fraction: certified as f64 / count as f64 });
    }
    let fit: Vec<(f64, f64)> = points.iter().filter(|p| p.d > 0.0).map(|p| (p.b.abs().ln(), -p.d.ln())).collect();
    let alpha_hat = if fit.len() >= 2 {
        let (x, y): (Vec<f64>, Vec<f64>) = fit.into_iter().unzip();
        linear_fit(&x, &y).0.max(0.0)
    } else {
        0.0
    };
    Ok(DiophantineScan { points, alpha_hat })
}

/// How `ρ^{*n}` is evaluated in [`convolution_regularity_probe`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConvolutionMode {
    /// All `|atoms|^n` words with their probabilities.
    Exact,
    /// `count` sampled words, ball masses estimated from the same sample.
    Sampled,
}

/// Largest word count enumerated in [`ConvolutionMode::Exact`].
pub const MAX_EXACT_WORDS: usize = 4096;

#[derive(Clone, Debug)]
pub struct ConvolutionProbe {
    pub t3_estimate: f64,
    /// Fraction of `g` whose ball has mass at least `e^{-t_3 n}` for the
    /// requested `t_3`.
    pub pass_fraction: f64,
    /// `ρ^{*n}`-average of the ball mass around `g ~ ρ^{*n}`.
    pub mean_ball_mass: f64,
    pub mean_std_error: f64,
    pub mode: ConvolutionMode,
}

/// Mass of `ρ^{*n}` in operator-norm balls `B(g, e^{-t_2 n})`; `t1` sets the
/// target pass fraction `1 - e^{-t_1 n}` for `t3_estimate` and `t3` the
/// threshold at which `pass_fraction` is reported.
#[allow(clippy::too_many_arguments)]
pub fn convolution_regularity_probe(
    rho: &GeneratorMeasure,
    n: usize,
    t2: f64,
    count: usize,
    seed: u64,
    t1: f64,
    t3: f64,
    mode: ConvolutionMode,
) -> Result<ConvolutionProbe> {
    check_length(rho, n)?;
    let nf = n as f64;
    let r = (-t2 * nf).exp();
    let (products, probs): (Vec<GroupElement>, Vec<f64>) = match mode {
        ConvolutionMode::Exact => {
            let k = rho.atoms().len();
            let total = (k as f64).powi(n as i32);
            if total > MAX_EXACT_WORDS as f64 {
                return Err(Error::precondition(format!("{total} words exceed exact enumeration limit")));
            }
            let mut out = (Vec::new(), Vec::new());
            let mut word = vec![0usize; n];
            loop {
                let p: f64 = word.iter().map(|&i| rho.atoms()[i].weight).product();
                out.0.push(word_product(rho, &word).0);
                out.1.push(p);
                let mut pos = 0;
                while pos < n {
                    word[pos] += 1;
                    if word[pos] < k {
                        break;
                    }
                    word[pos] = 0;
                    pos += 1;
                }
                if pos == n {
                    break;
                }
            }
            out
        }
        ConvolutionMode::Sampled => {
            if count == 0 {
                return Err(Error::precondition("count must be positive"));
            }
            let ps = sampled_products(rho, n, count, seed, purpose::CONVOLUTION);
            let w = 1.0 / ps.len() as f64;
            let len = ps.len();
            (ps, vec![w; len])
        }
    };
    let masses: Vec<f64> = {
        use rayon::prelude::*;
        (0..products.len())
            .into_par_iter()
            .map(|i| products.iter().zip(&probs).filter(|(h, _)| products[i].distance(h) <= r).map(|(_, p)| p).sum())
            .collect()
    };
    // Weighted lower quantile of the ball masses at level e^{-t1 n}.
    let level = (-t1 * nf).exp();
    let mut order: Vec<usize> = (0..masses.len()).collect();
    order.sort_by(|&a, &b| masses[a].total_cmp(&masses[b]));
    let mut acc = 0.0;
    let mut m_star = masses[order[order.len() - 1]];
    for &i in &order {
        acc += probs[i];
        if acc > level {
            m_star = masses[i];
            break;
        }
    }
    let t3_estimate = (-m_star.ln() / nf).max(0.0);
    let thr = (-t3 * nf).exp();
    let pass_fraction = masses.iter().zip(&probs).filter(|(m, _)| **m >= thr * (1.0 - 1e-12)).map(|(_, p)| p).sum::<f64>().min(1.0);
    let mean: f64 = masses.iter().zip(&probs).map(|(m, p)| m * p).sum();
    let var: f64 = masses.iter().zip(&probs).map(|(m, p)| p * (m - mean).powi(2)).sum();
    let mean_std_error = match mode {
        ConvolutionMode::Exact => 0.0,
        // Each ball mass is itself a sample proportion; both sources of noise
        // are of the same order, so the spread of the masses is doubled.
        ConvolutionMode::Sampled => 2.0 * (var / masses.len() as f64).sqrt() + (mean * (1.0 - mean) / masses.len() as f64).sqrt(),
    };
    Ok(ConvolutionProbe { t3_estimate, pass_fraction, mean_ball_mass: mean, mean_std_error, mode })
}
