//! The subcommands. Each reads its knobs from [`Params`], falling back to
//! the values of the acceptance suite, and returns its tables.

use std::sync::Arc;

use clap::ValueEnum;
use num_complex::Complex64;
use rand::Rng;
use renewal_lab::measure::{lazy_measure, GeneratorMeasure};
use renewal_lab::proximality::admissible::{run_suite, Lemma};
use renewal_lab::proximality::auto_certify;
use renewal_lab::renewal::{
    convolve_phi_k, fourier_green_refined, green_mc, psi, random_piecewise_profile, rate_fit, tauberian_bound, FourierOptions, GreenOptions, OmegaFunction, RateOptions,
    RegularFunction, Spatial,
};
use renewal_lab::rng::{purpose, stream};
use renewal_lab::transfer::{build_operator, dolgopyat_probe, regular_points, resolvent_scan, spectral_data, GridFunction, StateGrid, UOperator};
use renewal_lab::walk::{
    convolution_regularity_probe, diophantine_scan, lyapunov_estimate, lyapunov_spectrum, regularity_probe, sample_products, stationary_measure_estimate, ConvolutionMode,
    EmpiricalMeasure, DEFAULT_RESOLUTION,
};

use crate::config::{ExperimentConfig, Params};
use crate::output::{Cell, Table};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    Lyapunov,
    Stationary,
    ProximalCert,
    DiophantineScan,
    ResolventScan,
    DolgopyatProbe,
    RenewalRate,
    FourierCheck,
    RegularityProbe,
    TauberianCheck,
}

impl Experiment {
    pub const ALL: [Experiment; 10] = [
        Experiment::Lyapunov,
        Experiment::Stationary,
        Experiment::ProximalCert,
        Experiment::DiophantineScan,
        Experiment::ResolventScan,
        Experiment::DolgopyatProbe,
        Experiment::RenewalRate,
        Experiment::FourierCheck,
        Experiment::RegularityProbe,
        Experiment::TauberianCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Lyapunov => "lyapunov",
            Experiment::Stationary => "stationary",
            Experiment::ProximalCert => "proximal-cert",
            Experiment::DiophantineScan => "diophantine-scan",
            Experiment::ResolventScan => "resolvent-scan",
            Experiment::DolgopyatProbe => "dolgopyat-probe",
            Experiment::RenewalRate => "renewal-rate",
            Experiment::FourierCheck => "fourier-check",
            Experiment::RegularityProbe => "regularity-probe",
            Experiment::TauberianCheck => "tauberian-check",
        }
    }
}

/// Tables plus a one-line human summary.
pub struct Outcome {
    pub tables: Vec<Table>,
    pub summary: String,
}

pub fn run(exp: Experiment, cfg: &ExperimentConfig, seed: u64) -> Result<Outcome, CliError> {
    let rho = cfg.measure()?;
    let p = &cfg.params;
    match exp {
        Experiment::Lyapunov => lyapunov(&rho, p, seed),
        Experiment::Stationary => stationary(&rho, p, seed),
        Experiment::ProximalCert => proximal_cert(&rho, p, seed),
        Experiment::DiophantineScan => diophantine(&rho, p, seed),
        Experiment::ResolventScan => resolvent(&rho, p, seed),
        Experiment::DolgopyatProbe => dolgopyat(&rho, p, seed),
        Experiment::RenewalRate => renewal_rate(&rho, p, seed),
        Experiment::FourierCheck => fourier_check(&rho, p, seed),
        Experiment::RegularityProbe => regularity(&rho, p, seed),
        Experiment::TauberianCheck => tauberian(p, seed),
    }
}

fn state_grid(rho: &GeneratorMeasure, p: &Params, default: usize) -> Result<Arc<StateGrid>, CliError> {
    Ok(Arc::new(StateGrid::for_dim(rho.dim(), p.grid.unwrap_or(default), rho.a_size())?))
}

fn blank() -> Cell {
    Cell::Text(String::new())
}

/// `steps` (1000) steps on `walks` (1000) walks; the spectrum uses at most
/// 100 walks.
fn lyapunov(rho: &GeneratorMeasure, p: &Params, seed: u64) -> Result<Outcome, CliError> {
    let steps = p.steps.unwrap_or(1000);
    let walks = p.walks.unwrap_or(1000);
    let est = lyapunov_estimate(rho, steps, walks, seed)?;
    let mut t = Table::new("", &["estimator", "lambda", "std_error", "length", "samples"]);
    t.push(vec!["walks".into(), est.lambda_rho.into(), est.std_error.into(), est.n_steps.into(), est.n_walks.into()]);
    let b = &est.birkhoff;
    t.push(vec!["birkhoff".into(), b.lambda.into(), b.std_error.into(), b.trajectory_length.into(), b.batches.into()]);
    let mut spec = Table::new("spectrum", &["index", "lambda"]);
    for (i, l) in lyapunov_spectrum(rho, steps, walks.min(100), seed).into_iter().enumerate() {
        spec.push(vec![(i + 1).into(), l.into()]);
    }
    let summary = format!(
        "lambda_rho = {:.6} +- {:.1e} (walks), {:.6} +- {:.1e} (birkhoff), {:.2} sigma apart",
        est.lambda_rho,
        est.std_error,
        b.lambda,
        b.std_error,
        est.agreement_sigmas()
    );
    Ok(Outcome { tables: vec![t, spec], summary })
}

/// Spectral data of `P(0)` on a grid of `grid` (254) points, compared with
/// the empirical measure of `samples` (200000) chain steps after `burn_in`
/// (1000) on `bins` (16) coarse bins.
fn stationary(rho: &GeneratorMeasure, p: &Params, seed: u64) -> Result<Outcome, CliError> {
    let grid = state_grid(rho, p, 254)?;
    let op = build_operator(rho, Complex64::new(0.0, 0.0), &grid)?;
    let sd = spectral_data(&op)?;
    let d = rho.dim();
    let mut header: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
    header.insert(0, "state".into());
    header.push("a".into());
    header.push("nu".into());
    header.extend((0..sd.r).map(|i| format!("p{i}")));
    let mut states = Table { name: String::new(), header, rows: Vec::new() };
    let mixed = sd.mixed_measure();
    for s in 0..grid.len() {
        let (x, a) = grid.state(s);
        let mut row: Vec<Cell> = vec![s.into()];
        row.extend(x.iter().map(|v| Cell::Real(*v)));
        row.push(a.into());
        row.push(mixed[s].into());
        row.extend(sd.p.iter().map(|pi| Cell::Real(pi[s])));
        states.push(row);
    }
    let p_sum_error = (0..grid.len()).map(|s| (sd.p.iter().map(|pi| pi[s]).sum::<f64>() - 1.0).abs()).fold(0.0, f64::max);
    let bins = p.bins.unwrap_or(16);
    let nu = stationary_measure_estimate(rho, p.burn_in.unwrap_or(1000), p.samples.unwrap_or(200_000), p.resolution.unwrap_or(DEFAULT_RESOLUTION), seed)?;
    let points: Vec<(Vec<f64>, usize, f64)> = (0..grid.len()).map(|s| (grid.state(s).0.to_vec(), grid.state(s).1, mixed[s])).collect();
    let eigen_measure = EmpiricalMeasure::from_weighted(d, rho.a_size(), nu.resolution(), &points)?;
    let tv = nu.total_variation(&eigen_measure, bins);
    let mut summary = Table::new("summary", &["r", "gap", "quotient_gap", "p_sum_error", "tv_empirical", "bins", "grid_size"]);
    summary.push(vec![sd.r.into(), sd.gap.into(), sd.quotient_gap.into(), p_sum_error.into(), tv.into(), bins.into(), grid.len().into()]);
    let mut eig: Vec<(f64, f64)> = op.to_dense_real().complex_eigenvalues().iter().map(|c| (c.re, c.im)).collect();
    eig.sort_by(|a, b| (b.0.hypot(b.1)).total_cmp(&a.0.hypot(a.1)).then(b.0.total_cmp(&a.0)).then(b.1.total_cmp(&a.1)));
    let mut eigen = Table::new("eigenvalues", &["index", "re", "im", "modulus"]);
    for (i, (re, im)) in eig.into_iter().take(16).enumerate() {
        eigen.push(vec![i.into(), re.into(), im.into(), re.hypot(im).into()]);
    }
    let text = format!("r = {}, gap = {:.4}, sum p_i - 1 = {:.1e}, TV(eigen, empirical) = {:.4}", sd.r, sd.gap, p_sum_error, tv);
    Ok(Outcome { tables: vec![states, summary, eigen], summary: text })
}

/// Certificates of `count` (1000) products of length `length` (8), and the
/// randomized lemma suite with `lemma_draws` (1000) admissible draws per
/// lemma in d = 2 and 3.
fn proximal_cert(rho: &GeneratorMeasure, p: &Params, seed: u64) -> Result<Outcome, CliError> {
    let length = p.length.unwrap_or(8);
    let count = p.count.unwrap_or(1000);
    let mut t = Table::new(
        "",
        &["index", "log_norm", "certified", "epsilon", "lambda1", "sign", "d_vplus_xm", "bound_vplus_xm", "d_vless_ym", "bound_vless_ym", "restricted_norm", "bound_restricted_norm"],
    );
    let mut certified = 0;
    for (i, s) in sample_products(rho, length, count, seed)?.iter().enumerate() {
        let mut row: Vec<Cell> = vec![i.into(), s.log_norm.into()];
        match auto_certify(&s.product) {
            Some(c) => {
                certified += 1;
                row.extend([
                    true.into(),
                    c.epsilon.into(),
                    c.lambda1.into(),
                    c.sign1.into(),
                    c.d_vplus_xm.into(),
                    c.bound_vplus_xm.into(),
                    c.d_vless_ym.into(),
                    c.bound_vless_ym.into(),
                    c.restricted_norm.into(),
                    c.bound_restricted_norm.into(),
                ]);
            }
            None => {
                row.push(false.into());
                row.extend((0..9).map(|_| blank()));
            }
        }
        t.push(row);
    }
    let draws = p.lemma_draws.unwrap_or(1000);
    let mut lemmas = Table::new("lemmas", &["lemma", "d", "passed", "rejected", "failed", "first_failure"]);
    let mut failed = 0;
    for d in [2, 3] {
        for lemma in Lemma::ALL {
            let tally = run_suite(lemma, d, draws, seed);
            failed += tally.failures.len();
            let first = tally.failures.first().map(|e| e.to_string()).unwrap_or_default();
            lemmas.push(vec![lemma.name().into(), d.into(), tally.passed.into(), tally.rejected.into(), tally.failures.len().into(), first.into()]);
        }
    }
    let summary = format!("{certified}/{count} products certified; lemma suite: {failed} violations over {} checks", 12 * draws);
    Ok(Outcome { tables: vec![t, lemmas], summary })
}

/// `D(b)` at `b_points` (41) values evenly spaced in `[b_min, b_max]`
/// (`[2, 100]`), products of length `power · ⌊beta ln b⌋` (4, 2), `count`
/// (2000) samples each; the lower bound uses `|b|^alpha` (4).
fn diophantine(rho: &GeneratorMeasure, p: &Params, seed: u64) -> Result<Outcome, CliError> {
    let (lo, hi, n) = (p.b_min.unwrap_or(2.0), p.b_max.unwrap_or(100.0), p.b_points.unwrap_or(41));
    let b_values: Vec<f64> = if n < 2 { vec![lo] } else { (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect() };
    let alpha = p.alpha.unwrap_or(4.0);
    let scan = diophantine_scan(rho, p.beta.unwrap_or(2.0), p.power.unwrap_or(4), &b_values, p.count.unwrap_or(2000), seed)?;
    let mut t = Table::new("", &["b", "d", "std_error", "length", "certified_fraction", "b_alpha_d"]);
    for q in &scan.points {
        t.push(vec![q.b.into(), q.d.into(), q.std_error.into(), q.length.into(), q.certified_fraction.into(), (q.b.abs().powf(alpha) * q.d).into()]);
    }
    let lower = scan.lower_bound(alpha);
    let positive = scan.points.iter().all(|q| q.d > 0.0);
    let mut s = Table::new("summary", &["alpha", "lower_bound", "all_positive", "alpha_hat"]);
    s.push(vec![alpha.into(), lower.into(), positive.into(), scan.alpha_hat.into()]);
    let summary = format!("min |b|^{alpha} D(b) = {lower:.4e}, all D(b) > 0: {positive}, fitted decay {:.3}", scan.alpha_hat);
    Ok(Outcome { tables: vec![t, s], summary })
}

/// Resolvent norms at `t_values` (2, 4, ..., 64) on the grid of `grid` (254)
/// points and on its refinement, in the `gamma` (0.25) Hölder norm.
fn resolvent(rho: &GeneratorMeasure, p: &Params, seed: u64) -> Result<Outcome, CliError> {
    let gamma = p.gamma.unwrap_or(0.25);
    let ts = p.t_values.clone().unwrap_or_else(|| vec![2.0, 4.0, 8.0, 16.0, 32.0, 64.0]);
    let coarse = state_grid(rho, p, 254)?;
    let fine = Arc::new(coarse.refined()?);
    let mut t = Table::new("", &["t", "norm_estimate", "residual", "grid_size", "gamma", "seed"]);
    let mut fit = Table::new("fit", &["grid_size", "l_hat", "c_hat", "fit_rms"]);
    let mut slopes = Vec::new();
    for grid in [&coarse, &fine] {
        let scan = resolvent_scan(rho, grid, gamma, &ts, seed)?;
        for q in &scan.points {
            t.push(vec![q.t.into(), q.norm_estimate.into(), q.residual.into(), q.grid_size.into(), gamma.into(), seed.into()]);
        }
        fit.push(vec![grid.len().into(), scan.l_hat.into(), scan.c_hat.into(), scan.fit_rms.into()]);
        slopes.push(scan.l_hat);
    }
    let summary = format!("fitted slope L = {:.3} (grid {}), {:.3} (grid {})", slopes[0], coarse.len(), slopes[1], fine.len());
    Ok(Outcome { tables: vec![t, fit], summary })
}

/// Lazy-walk probe of the constant function at `t_values` (10, 20, 40) with
/// `alpha1` (0.5) and `beta` (2); regular points are grid states with
/// `ν(B(x, regular_radius)) ≥ regular_c · regular_radius^delta`
/// (0.05, 0.1, 1), `ν` from `samples` (200000) chain steps.
fn dolgopyat(rho: &GeneratorMeasure, p: &Params, seed: u64) -> Result<Outcome, CliError> {
    let grid = state_grid(rho, p, 254)?;
    let ts = p.t_values.clone().unwrap_or_else(|| vec![10.0, 20.0, 40.0]);
    let (alpha1, beta) = (p.alpha1.unwrap_or(0.5), p.beta.unwrap_or(2.0));
    let nu = stationary_measure_estimate(rho, p.burn_in.unwrap_or(1000), p.samples.unwrap_or(200_000), p.resolution.unwrap_or(DEFAULT_RESOLUTION), seed)?;
    let regular = regular_points(&grid, &nu, p.regular_radius.unwrap_or(0.05), p.delta.unwrap_or(1.0), p.regular_c.unwrap_or(0.1))?;
    let lazy = lazy_measure(rho);
    let f = GridFunction::from_real(&vec![1.0; grid.len()], p.gamma.unwrap_or(0.25));
    let mut t = Table::new("", &["t", "found", "state", "n", "value", "threshold", "regular_points"]);
    let mut sups = Table::new("sup", &["t", "n", "sup_norm"]);
    let mut found = 0;
    for &tv in &ts {
        let op = build_operator(&lazy, Complex64::new(0.0, tv), &grid)?;
        let r = dolgopyat_probe(&op, &f, tv, alpha1, beta, &regular)?;
        let threshold = 1.0 - tv.abs().powf(-alpha1);
        found += r.found as usize;
        t.push(vec![
            tv.into(),
            r.found.into(),
            r.x0.map(Cell::from).unwrap_or_else(blank),
            r.n.map(Cell::from).unwrap_or_else(blank),
            r.value.map(Cell::from).unwrap_or_else(blank),
            threshold.into(),
            regular.len().into(),
        ]);
        for (n, s) in r.sup_norms.iter().enumerate() {
            sups.push(vec![tv.into(), n.into(), (*s).into()]);
        }
    }
    let summary = format!("contraction witness found at {found} of {} frequencies ({} regular points)", ts.len(), regular.len());
    Ok(Outcome { tables: vec![t, sups], summary })
}

/// The bump `(|y|/R)^a (1 - |y|/R)_+^m` in `(x, t)` coordinates, with
/// `R = bump_radius`, `m = bump_edge`, `a = bump_origin`.
pub fn radial_bump(dim: usize, a_size: usize, radius: f64, edge: i32, origin: f64) -> Result<OmegaFunction, CliError> {
    let log_r = radius.ln();
    let f = OmegaFunction::new(
        dim,
        a_size,
        origin.min(1.0),
        Arc::new(move |_, _, t| {
            let u = t - log_r;
            if u < 0.0 {
                (origin * u).exp() * (1.0 - u.exp()).powi(edge)
            } else {
                0.0
            }
        }),
    )?;
    Ok(f.with_envelope(radius.powf(0.15), 0.15).with_breaks(vec![log_r]))
}

/// `rate_fit` at `direction` ([0.6, 0.8]) over `radii` (2^-2 .. 2^-12) with
/// `walks` (200000) walks, truncation `tolerance` (1e-4) and `quad_tol`
/// (1e-9) on a grid of `grid` (254) points, for the bump with `R = 8`,
/// `m = 6`, `a = 0.25`. `σ_ρ` is estimated with 1000 steps on 4000 walks.
fn renewal_rate(rho: &GeneratorMeasure, p: &Params, seed: u64) -> Result<Outcome, CliError> {
    let grid = state_grid(rho, p, 254)?;
    let sd = spectral_data(&build_operator(rho, Complex64::new(0.0, 0.0), &grid)?)?;
    let f = radial_bump(rho.dim(), rho.a_size(), p.bump_radius.unwrap_or(8.0), p.bump_edge.unwrap_or(6), p.bump_origin.unwrap_or(0.25))?;
    let direction = p.direction.clone().unwrap_or_else(|| default_direction(rho.dim()));
    let radii = p.radii.clone().unwrap_or_else(|| (2..=12).map(|j| 2f64.powi(-j)).collect());
    let lambda = lyapunov_estimate(rho, p.steps.unwrap_or(1000), 4000, seed)?.lambda_rho;
    let green = GreenOptions { walks: p.walks.unwrap_or(200_000), tolerance: p.tolerance.unwrap_or(1e-4), seed, ..Default::default() };
    let fit = rate_fit(rho, &grid, &sd, &f, &direction, 0, &radii, &RateOptions { green, lambda, quad_tol: p.quad_tol.unwrap_or(1e-9) })?;
    let mut t = Table::new("", &["radius", "residual", "mc_error", "n_terms", "green", "pi0"]);
    for q in &fit.points {
        t.push(vec![q.radius.into(), q.residual.into(), q.mc_error.into(), q.n_terms.into(), q.green.into(), q.pi0.into()]);
    }
    let mut s = Table::new("fit", &["alpha_hat", "c_hat", "r_squared", "monotone_within_noise", "lambda"]);
    s.push(vec![fit.alpha_hat.into(), fit.c_hat.into(), fit.r_squared.into(), fit.monotone_within_noise.into(), lambda.into()]);
    let summary = format!("alpha_hat = {:.4}, r^2 = {:.4}, monotone: {}", fit.alpha_hat, fit.r_squared, fit.monotone_within_noise);
    Ok(Outcome { tables: vec![t, s], summary })
}

fn default_direction(dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[0] = 0.6;
    v[1] = 0.8;
    v
}

/// Sites used by `fourier-check` in `d = 2`.
pub const FOURIER_DIRECTIONS: [[f64; 2]; 5] = [[1.0, 0.0], [0.6, 0.8], [-0.8, 0.6], [0.0, -1.0], [0.28, 0.96]];

/// `(1 + x_0 x_1 / 2) e^{-t²/2}` summed by the Fourier formula on grids of
/// `grid` (254) points and its refinement, against `walks` (200000) walks
/// with truncation `tolerance` (1e-5), at directions
/// [`FOURIER_DIRECTIONS`] and `t_values` (-2, -1, 0, 1, 2) paired in order.
/// The smoothness order is `k` (6), the resolvent bound
/// `resolvent_c (1 + |ξ|)^{resolvent_l + 1}` (6, 0.3), cutoff `cutoff` (8).
fn fourier_check(rho: &GeneratorMeasure, p: &Params, seed: u64) -> Result<Outcome, CliError> {
    let d = rho.dim();
    let coarse = state_grid(rho, p, 254)?;
    let fine = Arc::new(coarse.refined()?);
    let u_of = |g: &Arc<StateGrid>| -> Result<UOperator, CliError> { Ok(UOperator::new(rho, g, &spectral_data(&build_operator(rho, Complex64::new(0.0, 0.0), g)?)?)) };
    let (uc, uf) = (u_of(&coarse)?, u_of(&fine)?);
    let gamma = p.gamma.unwrap_or(0.25);
    let h: Spatial = Arc::new(|x: &[f64], _| 1.0 + 0.5 * x[0] * x[1]);
    let f = RegularFunction::gaussian(d, rho.a_size(), gamma, h.clone(), p.k.unwrap_or(6))?;
    let hh = h.clone();
    let of = OmegaFunction::new(d, rho.a_size(), gamma, Arc::new(move |x, a, t| hh(x, a) * (-t * t / 2.0).exp()))?.with_envelope(1.5 * (0.15f64 * 0.15 / 2.0).exp(), 0.15);
    let ts = p.t_values.clone().unwrap_or_else(|| vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
    let sites: Vec<(Vec<f64>, usize, f64)> = ts
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let x = if d == 2 {
                FOURIER_DIRECTIONS[i % FOURIER_DIRECTIONS.len()].to_vec()
            } else {
                (0..d).map(|j| if j == i % d { 1.0 } else { 0.0 }).collect()
            };
            (x, 0, t)
        })
        .collect();
    let opts = FourierOptions {
        resolvent_c: p.resolvent_c.unwrap_or(6.0),
        resolvent_l: p.resolvent_l.unwrap_or(0.3),
        cutoff: p.cutoff.unwrap_or(FourierOptions::default().cutoff),
        ..Default::default()
    };
    let rf = fourier_green_refined(&uc, &uf, &f, &sites, &opts)?;
    let green = GreenOptions { walks: p.walks.unwrap_or(200_000), tolerance: p.tolerance.unwrap_or(1e-5), seed, ..Default::default() };
    let mut header: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
    header.extend(["t", "fourier", "fourier_error", "mc", "mc_std_error", "truncation_bound", "ratio"].map(String::from));
    let mut t = Table { name: String::new(), header, rows: Vec::new() };
    let mut worst: f64 = 0.0;
    for (i, (x, a, tv)) in sites.iter().enumerate() {
        let mc = &green_mc(rho, &of, x, *a, &[*tv], &green)?[0];
        let e = &rf.fine.estimates[i];
        let err = rf.error_bound(i);
        let ratio = (e.value - mc.value).abs() / (mc.mc_std_error + mc.truncation_bound + err);
        worst = worst.max(ratio);
        let mut row: Vec<Cell> = x.iter().map(|v| Cell::Real(*v)).collect();
        row.extend([(*tv).into(), e.value.into(), err.into(), mc.value.into(), mc.mc_std_error.into(), mc.truncation_bound.into(), ratio.into()]);
        t.push(row);
    }
    let mut trace = Table::new("trace", &["xi", "integrand_norm"]);
    for (xi, v) in &rf.fine.trace {
        trace.push(vec![(*xi).into(), (*v).into()]);
    }
    let summary = format!("worst |fourier - mc| / (errors) = {worst:.3} over {} sites", sites.len());
    Ok(Outcome { tables: vec![t, trace], summary })
}

/// Lower regularity of `ν` at attracting directions of products of length
/// `length` (4) on balls `e^{-m_rate n}` (1), target rate `t_rate` (0.1),
/// and the operator-norm ball masses of `ρ^{*n}` with `t1, t2, t3`
/// (0.1, 1, 1); `count` (1000) samples, `ν` from `samples` (200000) steps.
fn regularity(rho: &GeneratorMeasure, p: &Params, seed: u64) -> Result<Outcome, CliError> {
    let n = p.length.unwrap_or(4);
    let count = p.count.unwrap_or(1000);
    let nu = stationary_measure_estimate(rho, p.burn_in.unwrap_or(1000), p.samples.unwrap_or(200_000), p.resolution.unwrap_or(DEFAULT_RESOLUTION), seed)?;
    let probe = regularity_probe(rho, &nu, n, p.m_rate.unwrap_or(1.0), count, seed, p.t_rate.unwrap_or(0.1))?;
    let mode = if (rho.atoms().len() as f64).powi(n as i32) <= renewal_lab::walk::MAX_EXACT_WORDS as f64 { ConvolutionMode::Exact } else { ConvolutionMode::Sampled };
    let conv = convolution_regularity_probe(rho, n, p.t2.unwrap_or(1.0), count, seed, p.t1.unwrap_or(0.1), p.t3.unwrap_or(1.0), mode)?;
    let mut t = Table::new("", &["sample", "delta"]);
    for (i, dlt) in probe.sample_deltas.iter().enumerate() {
        t.push(vec![i.into(), (*dlt).into()]);
    }
    let mut s = Table::new("summary", &["probe", "estimate", "pass_fraction", "mean", "std_error", "samples"]);
    s.push(vec!["stationary".into(), probe.delta_estimate.into(), probe.pass_fraction.into(), blank(), blank(), probe.certified.into()]);
    let mode_name = if mode == ConvolutionMode::Exact { "convolution-exact" } else { "convolution-sampled" };
    s.push(vec![mode_name.into(), conv.t3_estimate.into(), conv.pass_fraction.into(), conv.mean_ball_mass.into(), conv.mean_std_error.into(), count.into()]);
    let summary = format!("Delta estimate {:.4} ({} certified), t3 estimate {:.4}", probe.delta_estimate, probe.certified, conv.t3_estimate);
    Ok(Outcome { tables: vec![t, s], summary })
}

/// Smallest `L` with `|f(s) - f(t)| ≤ L |s - t|` on a fine grid of
/// `[-20, 20]`, padded by one percent.
pub fn lipschitz_estimate(f: &dyn Fn(f64) -> f64) -> f64 {
    let h = 1e-3;
    let steps = (40.0 / h) as usize;
    let mut prev = f(-20.0);
    let mut lip: f64 = 0.0;
    for i in 1..=steps {
        let v = f(-20.0 + i as f64 * h);
        lip = lip.max((v - prev).abs() / h);
        prev = v;
    }
    1.01 * lip
}

/// `profiles` (100) random piecewise-linear profiles damped at `gamma`
/// (0.3). Profile `i` is regularized at order `i mod 5` and checked against
/// the Tauberian bound at order `max(i mod 5, 1)`, calibrated on a 0.05 grid
/// of `[-12, 12]` and checked at 100 uniform points.
fn tauberian(p: &Params, seed: u64) -> Result<Outcome, CliError> {
    let gamma = p.gamma.unwrap_or(0.3);
    let profiles = p.profiles.unwrap_or(100);
    let mut rng = stream(seed, purpose::PROBES, 0);
    let mut t = Table::new("", &["profile", "k", "input_norm", "measured_norm", "constant", "regularization_ratio", "tauberian_c", "worst_check_ratio", "dominated"]);
    let v_grid: Vec<f64> = (0..40).map(|j| 1.2f64.powi(j)).collect();
    let train: Vec<f64> = (0..=480).map(|j| -12.0 + 0.05 * j as f64).collect();
    let (mut worst_reg, mut worst_tau): (f64, f64) = (0.0, 0.0);
    for i in 0..profiles {
        let (f, breaks) = random_piecewise_profile(&mut rng, gamma);
        let check: Vec<f64> = (0..100).map(|_| rng.gen_range(-12.0..12.0)).collect();
        let k = i % 5;
        let reg = convolve_phi_k(f.clone(), &breaks, k, gamma)?;
        let measured = reg.measured_norm(0.05)?;
        let ratio = measured / (reg.constant() * reg.input_norm);
        let lip = lipschitz_estimate(&|x| f(x));
        let tb = tauberian_bound(&f, &breaks, &move |delta| lip * delta, k.max(1), &v_grid, &train, &check)?;
        let check_ratio = tb.checks.iter().map(|(_, v, b)| if *v == 0.0 { 0.0 } else { v / b }).fold(0.0, f64::max);
        worst_reg = worst_reg.max(ratio);
        worst_tau = worst_tau.max(check_ratio);
        t.push(vec![i.into(), k.into(), reg.input_norm.into(), measured.into(), reg.constant().into(), ratio.into(), tb.c.into(), check_ratio.into(), tb.dominated.into()]);
    }
    let mut s = Table::new("summary", &["worst_regularization_ratio", "worst_tauberian_ratio", "psi_minus_error", "psi_plus_error"]);
    let big = renewal_lab::renewal::BOUNDARY_T;
    s.push(vec![worst_reg.into(), worst_tau.into(), (psi(-big) - 1.0).abs().into(), psi(big).abs().into()]);
    let summary = format!("worst ||phi*f|| / (C_k ||f||) = {worst_reg:.4}, worst |f| / tauberian bound = {worst_tau:.5}");
    Ok(Outcome { tables: vec![t, s], summary })
}
