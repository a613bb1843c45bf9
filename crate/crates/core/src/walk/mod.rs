//! Seeded Monte Carlo over products of iid matrices.

mod empirical;
mod probes;

pub use empirical::{CellKey, EmpiricalMeasure};
pub use probes::{
    convolution_regularity_probe, diophantine_length, diophantine_scan, fitted_rate, genericity_stats, genericity_stats_with, regularity_probe, ConvolutionMode, ConvolutionProbe, DiophantinePoint,
    DiophantineScan, EventFrequency, GenericityParams, GenericityStats, RegularityProbe, MAX_EXACT_WORDS,
};

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::{GroupElement, ProjectivePoint};
use crate::measure::GeneratorMeasure;
use crate::rng::{map_partitions, purpose, stream};
use crate::stats::{mean_and_se, MeanSe};

/// Largest `ln‖g_n ... g_1‖` for which products are formed explicitly.
pub const MAX_LOG_NORM: f64 = 600.0;

#[derive(Clone, Debug)]
pub struct WalkSample {
    pub product: GroupElement,
    pub log_norm: f64,
    /// Direction of `g_n ... g_1 x_0` with `x_0 = e_1`.
    pub proj_point: ProjectivePoint,
    /// Image of `a_0 = 0` under the permutations.
    pub a_point: usize,
    pub length: usize,
    /// Atom indices, `word[0]` applied first.
    pub word: Vec<usize>,
}

/// `count` iid products of length `n`.
pub fn sample_products(rho: &GeneratorMeasure, n: usize, count: usize, seed: u64) -> Result<Vec<WalkSample>> {
    if n == 0 || count == 0 {
        return Err(Error::precondition("n and count must be at least 1"));
    }
    let worst = rho.atoms().iter().map(|a| a.g.norm().ln()).fold(0.0, f64::max);
    if worst * n as f64 > MAX_LOG_NORM {
        return Err(Error::precondition(format!("products of length {n} may overflow (ln‖g‖ up to {worst:.3} per step)")));
    }
    let parts = map_partitions(count, seed, purpose::PRODUCTS, |rng, range| range.map(|_| sample_one(rho, n, rng)).collect::<Vec<_>>());
    Ok(parts.into_iter().flatten().collect())
}

pub(crate) fn sample_word<R: Rng + ?Sized>(rho: &GeneratorMeasure, n: usize, rng: &mut R) -> Vec<usize> {
    (0..n).map(|_| rho.sample_index(rng)).collect()
}

pub(crate) fn word_product(rho: &GeneratorMeasure, word: &[usize]) -> (GroupElement, usize) {
    let atoms = rho.atoms();
    let mut g = GroupElement::identity(rho.dim());
    let mut a = 0;
    for &i in word {
        g = atoms[i].g.mul(&g);
        a = atoms[i].perm[a];
    }
    (g, a)
}

fn sample_one<R: Rng + ?Sized>(rho: &GeneratorMeasure, n: usize, rng: &mut R) -> WalkSample {
    let word = sample_word(rho, n, rng);
    let (product, a_point) = word_product(rho, &word);
    let log_norm = product.norm().ln();
    let proj_point = product.act(&ProjectivePoint::basis(rho.dim(), 0));
    WalkSample { product, log_norm, proj_point, a_point, length: n, word }
}

/// Average of `(1/n) ln‖g_n ... g_1 x_0‖` over independent walks, plus an
/// independent Birkhoff estimate along one long trajectory. Each walk first
/// runs `min(n, BURN_IN)` unrecorded steps from `e_1`, so `x_0` is close to
/// stationary and the `O(1/n)` start-up bias of a fixed `x_0` disappears.
#[derive(Clone, Debug)]
pub struct LyapunovEstimate {
    pub lambda_rho: f64,
    pub std_error: f64,
    pub n_steps: usize,
    pub n_walks: usize,
    pub birkhoff: BirkhoffEstimate,
}

/// Time average of `∫ σ(g, X_k) dρ(g)` along a single trajectory, with a
/// batch-means standard error.
#[derive(Clone, Debug)]
pub struct BirkhoffEstimate {
    pub lambda: f64,
    pub std_error: f64,
    pub trajectory_length: usize,
    pub batches: usize,
}

impl LyapunovEstimate {
    /// `|difference| / combined standard error` of the two estimators.
    pub fn agreement_sigmas(&self) -> f64 {
        let s = (self.std_error.powi(2) + self.birkhoff.std_error.powi(2)).sqrt();
        (self.lambda_rho - self.birkhoff.lambda).abs() / s
    }
}

/// Default number of steps discarded before recording a trajectory.
pub const BURN_IN: usize = 1000;

/// One step of the projective chain from a unit vector; returns `σ(g, x)`.
#[inline]
pub(crate) fn step(g: &GroupElement, x: &mut [f64], buf: &mut [f64]) -> f64 {
    let s = crate::matrix::sigma_slice(g, x, buf);
    x.copy_from_slice(buf);
    s
}

fn floor_se(se: f64, value: f64) -> f64 {
    se.max(f64::EPSILON * value.abs().max(1.0))
}

pub fn lyapunov_estimate(rho: &GeneratorMeasure, n: usize, n_walks: usize, seed: u64) -> Result<LyapunovEstimate> {
    if n == 0 || n_walks < 2 {
        return Err(Error::precondition("need n >= 1 and at least two walks"));
    }
    let d = rho.dim();
    let atoms = rho.atoms();
    let burn_in = n.min(BURN_IN);
    let per_walk: Vec<f64> = map_partitions(n_walks, seed, purpose::LYAPUNOV, |rng, range| {
        let mut x = vec![0.0; d];
        let mut buf = vec![0.0; d];
        range
            .map(|_| {
                x.iter_mut().for_each(|v| *v = 0.0);
                x[0] = 1.0;
                for _ in 0..burn_in {
                    step(&atoms[rho.sample_index(rng)].g, &mut x, &mut buf);
                }
                let mut s = 0.0;
                for _ in 0..n {
                    s += step(&atoms[rho.sample_index(rng)].g, &mut x, &mut buf);
                }
                s / n as f64
            })
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect();
    let MeanSe { mean, se } = mean_and_se(&per_walk);
    let birkhoff = birkhoff_estimate(rho, n * n_walks, BURN_IN, seed);
    Ok(LyapunovEstimate { lambda_rho: mean, std_error: floor_se(se, mean), n_steps: n, n_walks, birkhoff })
}

fn birkhoff_estimate(rho: &GeneratorMeasure, length: usize, burn_in: usize, seed: u64) -> BirkhoffEstimate {
    let d = rho.dim();
    let atoms = rho.atoms();
    let mut rng = stream(seed, purpose::BIRKHOFF, 0);
    let mut x = vec![0.0; d];
    x[0] = 1.0;
    let mut buf = vec![0.0; d];
    for _ in 0..burn_in {
        step(&atoms[rho.sample_index(&mut rng)].g, &mut x, &mut buf);
    }
    let batches = 50.min(length).max(1);
    let per_batch = length / batches;
    let mut means = Vec::with_capacity(batches);
    let mut xs = vec![0.0; d];
    for _ in 0..batches {
        let mut acc = 0.0;
        for _ in 0..per_batch {
            // Exact expectation over the next step given the current state.
            let mut h = 0.0;
            for a in atoms {
                xs.copy_from_slice(&x);
                h += a.weight * crate::matrix::sigma_slice(&a.g, &xs, &mut buf);
            }
            acc += h;
            step(&atoms[rho.sample_index(&mut rng)].g, &mut x, &mut buf);
        }
        means.push(acc / per_batch as f64);
    }
    let MeanSe { mean, se } = mean_and_se(&means);
    BirkhoffEstimate { lambda: mean, std_error: floor_se(se, mean), trajectory_length: batches * per_batch, batches }
}

/// Lyapunov spectrum `λ_1 ≥ ... ≥ λ_d` by QR re-orthonormalization along
/// `walks` trajectories of length `n`.
pub fn lyapunov_spectrum(rho: &GeneratorMeasure, n: usize, walks: usize, seed: u64) -> Vec<f64> {
    let d = rho.dim();
    let atoms = rho.atoms();
    let sums: Vec<Vec<f64>> = map_partitions(walks, seed, purpose::LYAPUNOV ^ 0x5151, |rng, range| {
        range
            .map(|_| {
                let mut q = DMatrix::<f64>::identity(d, d);
                let mut acc = vec![0.0; d];
                for _ in 0..n {
                    let g = &atoms[rho.sample_index(rng)].g;
                    let qr = (g.matrix() * &q).qr();
                    let r = qr.r();
                    for i in 0..d {
                        acc[i] += r[(i, i)].abs().ln();
                    }
                    q = qr.q();
                }
                acc
            })
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect();
    let mut out = vec![0.0; d];
    for s in &sums {
        for i in 0..d {
            out[i] += s[i];
        }
    }
    let mut out: Vec<f64> = out.into_iter().map(|v| v / (n * sums.len()) as f64).collect();
    out.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    out
}

/// Options for [`stationary_measure_from`].
#[derive(Clone, Debug)]
pub struct StationaryOptions {
    pub burn_in: usize,
    pub samples: usize,
    pub resolution: f64,
    pub start: Vec<f64>,
    pub start_a: usize,
}

/// Default angular resolution of empirical measures.
pub const DEFAULT_RESOLUTION: f64 = 1.0 / 1024.0;

/// Empirical occupation measure of the projective chain, started near
/// `e_1` (slightly tilted so that `e_1` is not an exact fixed point of a
/// diagonal atom by accident).
pub fn stationary_measure_estimate(rho: &GeneratorMeasure, burn_in: usize, samples: usize, resolution: f64, seed: u64) -> Result<EmpiricalMeasure> {
    let d = rho.dim();
    let mut start = vec![0.0; d];
    start[0] = 1.0;
    if d > 1 {
        start[1] = 0.1;
    }
    stationary_measure_from(rho, &StationaryOptions { burn_in, samples, resolution, start, start_a: 0 }, seed)
}

/// Each sample partition runs its own chain with its own burn-in.
pub fn stationary_measure_from(rho: &GeneratorMeasure, opts: &StationaryOptions, seed: u64) -> Result<EmpiricalMeasure> {
    let d = rho.dim();
    if !(2..=3).contains(&d) {
        return Err(Error::Dimension(format!("empirical measures support d = 2, 3, got {d}")));
    }
    if opts.start.len() != d {
        return Err(Error::Dimension("start vector has wrong dimension".into()));
    }
    if opts.samples == 0 || !(opts.resolution > 0.0) {
        return Err(Error::precondition("need samples >= 1 and a positive resolution"));
    }
    let norm = opts.start.iter().map(|v| v * v).sum::<f64>().sqrt();
    let start: Vec<f64> = opts.start.iter().map(|v| v / norm).collect();
    let atoms = rho.atoms();
    let points: Vec<(Vec<f64>, usize)> = map_partitions(opts.samples, seed, purpose::STATIONARY, |rng, range| {
        let mut x = start.clone();
        let mut a = opts.start_a;
        let mut buf = vec![0.0; d];
        for _ in 0..opts.burn_in {
            let i = rho.sample_index(rng);
            step(&atoms[i].g, &mut x, &mut buf);
            a = atoms[i].perm[a];
        }
        range
            .map(|_| {
                let i = rho.sample_index(rng);
                step(&atoms[i].g, &mut x, &mut buf);
                a = atoms[i].perm[a];
                (x.clone(), a)
            })
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect();
    Ok(EmpiricalMeasure::from_points(d, rho.a_size(), opts.resolution, &points))
}
