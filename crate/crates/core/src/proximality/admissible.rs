//! Random inputs satisfying the hypotheses of the certified bounds.
//!
//! Matrices are drawn as `k diag(e^{l_1}, ..., e^{l_d}) l` with Haar
//! rotations and a prescribed gap `l_1 - l_2`, so the smallness conditions on
//! `kappa_12` hold by construction. Transversality is left to chance and a
//! draw that misses it is rejected.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{certify_proximal, contraction_bound, fgh_defect, power_neighborhood_bounds, product_bounds, spectral_radius_defect, LemmaConstants};
use crate::error::{Error, Result};
use crate::matrix::{GroupElement, ProjectivePoint};
use crate::rng::{purpose, stream};

/// Haar-distributed element of SO(d).
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = a.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    if q.determinant() < 0.0 {
        q.column_mut(0).neg_mut();
    }
    q
}

/// Log singular values summing to zero with `l_1 - l_2 = -log_gap` and the
/// lower ones spaced by `spread`.
pub fn log_singular_values(d: usize, log_gap: f64, spread: f64) -> Vec<f64> {
    let g = -log_gap;
    let l2 = (spread * ((d - 2) * (d - 1)) as f64 / 2.0 - g) / d as f64;
    let mut out = vec![l2 + g];
    out.extend((0..d - 1).map(|i| l2 - spread * i as f64));
    out
}

/// `g = k diag(e^{l}) l` together with its factors.
#[derive(Clone, Debug)]
pub struct RandomCartan {
    pub g: GroupElement,
    pub k: DMatrix<f64>,
    pub log_s: Vec<f64>,
    pub l: DMatrix<f64>,
}

impl RandomCartan {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, log_s: &[f64]) -> Result<Self> {
        let d = log_s.len();
        let k = random_rotation(rng, d);
        let l = random_rotation(rng, d);
        let diag = DMatrix::from_diagonal(&DVector::from_iterator(d, log_s.iter().map(|v| v.exp())));
        let g = GroupElement::new(&k * diag * &l)?;
        Ok(RandomCartan { g, k, log_s: log_s.to_vec(), l })
    }

    /// Draws with `kappa_12 = e^{log_gap}` and a random spread of the lower
    /// singular values.
    pub fn with_gap<R: Rng + ?Sized>(rng: &mut R, d: usize, log_gap: f64) -> Result<Self> {
        let spread = rng.gen_range(0.5..2.0);
        Self::sample(rng, &log_singular_values(d, log_gap, spread))
    }

    /// `k D^p (I + N) l` with `N` strictly lower triangular, so the result is
    /// unimodular and `‖g^p - f‖ = ‖D^p N‖ ≤ radius` up to rounding.
    pub fn power_neighbor<R: Rng + ?Sized>(&self, rng: &mut R, p: u32, radius: f64) -> Result<GroupElement> {
        let d = self.log_s.len();
        let dp = DMatrix::from_diagonal(&DVector::from_iterator(d, self.log_s.iter().map(|v| (p as f64 * v).exp())));
        let mut n = DMatrix::<f64>::identity(d, d);
        for i in 1..d {
            for j in 0..i {
                n[(i, j)] = rng.gen_range(-1.0..1.0) * radius / (d as f64 * dp[(i, i)]);
            }
        }
        GroupElement::new(&self.k * dp * n * &self.l)
    }
}

fn random_point<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Result<ProjectivePoint> {
    let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    ProjectivePoint::from_slice(&v)
}

/// The certified bounds exercised by [`draw_and_check`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lemma {
    Certify,
    Product,
    Contraction,
    SpectralRadius,
    PowerNeighborhood,
    Fgh,
}

impl Lemma {
    pub const ALL: [Lemma; 6] = [Lemma::Certify, Lemma::Product, Lemma::Contraction, Lemma::SpectralRadius, Lemma::PowerNeighborhood, Lemma::Fgh];

    pub fn name(self) -> &'static str {
        match self {
            Lemma::Certify => "certify_proximal",
            Lemma::Product => "product_bounds",
            Lemma::Contraction => "contraction_bound",
            Lemma::SpectralRadius => "spectral_radius_defect",
            Lemma::PowerNeighborhood => "power_neighborhood_bounds",
            Lemma::Fgh => "fgh_defect",
        }
    }
}

/// Outcome of one draw.
#[derive(Clone, Debug, PartialEq)]
pub enum Draw {
    /// The draw missed a hypothesis.
    Rejected,
    /// All hypotheses held and every recomputed bound was met.
    Passed,
    /// All hypotheses held and the check failed.
    Failed(Error),
}

fn verdict<T>(r: Result<T>) -> Draw {
    match r {
        Ok(_) => Draw::Passed,
        Err(Error::Precondition(_)) => Draw::Rejected,
        Err(e) => Draw::Failed(e),
    }
}

/// Gap exponent `kappa_12 = epsilon^power · e^{-u}`, `u ∈ [0, 4)`.
fn gap<R: Rng + ?Sized>(rng: &mut R, epsilon: f64, power: i32) -> f64 {
    power as f64 * epsilon.ln() - rng.gen_range(0.0..4.0)
}

/// Draws one input for `lemma` in dimension `d` with the default constants
/// and runs the checks.
pub fn draw_and_check<R: Rng + ?Sized>(lemma: Lemma, d: usize, rng: &mut R) -> Result<Draw> {
    let consts = LemmaConstants::default();
    let draw = match lemma {
        Lemma::Certify => {
            let eps = rng.gen_range(0.05..0.25);
            let lg = gap(rng, eps, 3);
            let g = RandomCartan::with_gap(rng, d, lg)?;
            verdict(certify_proximal(&g.g, eps))
        }
        Lemma::Product => {
            let eps = rng.gen_range(0.05..0.25);
            let p = rng.gen_range(2..5);
            let mut gs = Vec::with_capacity(p);
            for _ in 0..p {
                let lg = gap(rng, eps, 3);
                gs.push(RandomCartan::with_gap(rng, d, lg)?.g);
            }
            verdict(product_bounds(&gs, eps))
        }
        Lemma::Contraction => {
            let eps = rng.gen_range(0.05..0.25);
            let lg = gap(rng, eps, 4);
            let g = RandomCartan::with_gap(rng, d, lg)?;
            let (x, y) = (random_point(rng, d)?, random_point(rng, d)?);
            verdict(contraction_bound(&g.g, eps, &x, &y))
        }
        Lemma::SpectralRadius => {
            let eps = rng.gen_range(0.25 * consts.c1..consts.c1);
            let lg = gap(rng, eps, 4);
            let g = RandomCartan::with_gap(rng, d, lg)?;
            let lg = gap(rng, eps, 4);
            let h = RandomCartan::with_gap(rng, d, lg)?;
            verdict(spectral_radius_defect(&g.g, &h.g, eps, &consts))
        }
        Lemma::PowerNeighborhood => {
            let eps = rng.gen_range(0.25 * consts.c1..consts.c1);
            let p = rng.gen_range(1..3);
            let lg = gap(rng, eps, 3);
            let g = RandomCartan::with_gap(rng, d, lg)?;
            let k = g.g.try_cartan()?.kappa_gap;
            let radius = eps * eps * (k / (eps * eps)).powi(p as i32);
            let f = near_power(rng, &g, p, radius)?;
            verdict(power_neighborhood_bounds(&g.g, p, eps, &f, &consts))
        }
        Lemma::Fgh => {
            let eps = rng.gen_range(0.25 * consts.c1..consts.c1);
            let p = rng.gen_range(1..3);
            let lg = gap(rng, eps, 5);
            let g = RandomCartan::with_gap(rng, d, lg)?;
            // Half the draws make kappa_12(h) small enough for the cross-ratio part.
            let extra = if rng.gen_bool(0.5) { g.log_s[0] + 2f64.ln() } else { 0.0 };
            let lg = gap(rng, eps, 3) - extra;
            let h = RandomCartan::with_gap(rng, d, lg)?;
            let k = g.g.try_cartan()?.kappa_gap;
            let radius = eps * eps * (k / eps).powi(p as i32);
            let f = near_power(rng, &g, p, radius)?;
            verdict(fgh_defect(&f, &g.g, &h.g, p, eps, &consts))
        }
    };
    Ok(draw)
}

/// Counts of one run of [`run_suite`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Tally {
    pub passed: usize,
    pub rejected: usize,
    /// Failed checks, and draws whose generation failed.
    pub failures: Vec<Error>,
}

impl Tally {
    /// Draws that met every hypothesis.
    pub fn admissible(&self) -> usize {
        self.passed + self.failures.len()
    }
}

/// Draws until `draws` admissible inputs were checked, giving up after
/// `100 · draws` rejections.
pub fn run_suite(lemma: Lemma, d: usize, draws: usize, seed: u64) -> Tally {
    let index = Lemma::ALL.iter().position(|l| *l == lemma).expect("listed") as u64;
    let mut rng = stream(seed, purpose::LEMMAS, ((d as u64) << 8) | index);
    let mut tally = Tally::default();
    while tally.admissible() < draws && tally.rejected < 100 * draws {
        match draw_and_check(lemma, d, &mut rng) {
            Ok(Draw::Passed) => tally.passed += 1,
            Ok(Draw::Rejected) => tally.rejected += 1,
            Ok(Draw::Failed(e)) | Err(e) => tally.failures.push(e),
        }
    }
    tally
}

/// A perturbation of `g^p` inside the ball of the given radius. Rounding in
/// `g^p` can exceed the radius for large norms; the perturbation then
/// shrinks, ending at `g^p` itself.
fn near_power<R: Rng + ?Sized>(rng: &mut R, g: &RandomCartan, p: u32, radius: f64) -> Result<GroupElement> {
    let mut scale = rng.gen_range(0.1..0.9);
    for _ in 0..3 {
        let f = g.power_neighbor(rng, p, scale * radius)?;
        if g.g.pow(p).distance(&f) <= radius {
            return Ok(f);
        }
        scale *= 0.1;
    }
    Ok(g.g.pow(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn rotation_is_special_orthogonal() {
        let mut rng = stream(1, 0, 0);
        for d in 2..5 {
            let q = random_rotation(&mut rng, d);
            let e = &q.transpose() * &q - DMatrix::<f64>::identity(d, d);
            assert!(e.amax() < 1e-14);
            assert!((q.determinant() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn prescribed_singular_values() {
        let mut rng = stream(2, 0, 0);
        let ls = log_singular_values(3, -6.0, 1.0);
        assert!((ls.iter().sum::<f64>()).abs() < 1e-14);
        let c = RandomCartan::sample(&mut rng, &ls).unwrap();
        let cart = c.g.try_cartan().unwrap();
        assert!((cart.kappa_gap.ln() + 6.0).abs() < 1e-9);
        for (k, l) in cart.kappa.iter().zip(&ls) {
            assert!((k.ln() - l).abs() < 1e-9);
        }
    }

    #[test]
    fn short_suites_pass() {
        for lemma in Lemma::ALL {
            let t = run_suite(lemma, 2, 50, 1);
            assert_eq!(t.passed, 50, "{}: {:?}", lemma.name(), t.failures.first());
        }
    }

    #[test]
    fn power_neighbor_is_close() {
        let mut rng = stream(3, 0, 0);
        let c = RandomCartan::with_gap(&mut rng, 2, -8.0).unwrap();
        let f = c.power_neighbor(&mut rng, 1, 1e-6).unwrap();
        let dist = c.g.distance(&f);
        assert!(dist <= 1e-6 && dist > 0.0);
    }
}
