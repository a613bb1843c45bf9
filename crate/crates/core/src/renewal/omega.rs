use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::rng::{purpose, stream};

/// A point `(x, a, t)` of `S^{d-1} × A × R`.
#[derive(Clone, Copy, Debug)]
pub struct Site<'a> {
    pub x: &'a [f64],
    pub a: usize,
    pub t: f64,
}

impl<'a> Site<'a> {
    pub fn new(x: &'a [f64], a: usize, t: f64) -> Self {
        Site { x, a, t }
    }
}

fn chordal(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
}

/// `ω(u, v) = e^{(t+t')/2} √(d(x,x')² + (2 sinh((t-t')/2))²) / ((1+e^t)(1+e^{t'}))`,
/// which equals `‖e^t x - e^{t'} x'‖ / ((1+e^t)(1+e^{t'}))` for the chordal
/// metric `d`; `1` across different `A`-fibers.
pub fn omega(u: Site, v: Site) -> f64 {
    if u.a != v.a {
        return 1.0;
    }
    let d = chordal(u.x, v.x);
    let sh = 2.0 * ((u.t - v.t) / 2.0).sinh();
    // e^{(t+t')/2} / ((1+e^t)(1+e^t')) = 1 / (4 cosh(t/2) cosh(t'/2)).
    (d * d + sh * sh).sqrt() / (4.0 * (u.t / 2.0).cosh() * (v.t / 2.0).cosh())
}

/// `ω₀(u, v) = √(|t-t'|² + d(x,x')²) / ((1+|t|)(1+|t'|))`; `1` across fibers.
pub fn omega0(u: Site, v: Site) -> f64 {
    if u.a != v.a {
        return 1.0;
    }
    let d = chordal(u.x, v.x);
    ((u.t - v.t).powi(2) + d * d).sqrt() / ((1.0 + u.t.abs()) * (1.0 + v.t.abs()))
}

/// `ψ(t) = (2π)^{-1/2} ∫_t^∞ e^{-u²/2} du`.
pub fn psi(t: f64) -> f64 {
    0.5 * erfc(t / std::f64::consts::SQRT_2)
}

pub type Evaluator = Arc<dyn Fn(&[f64], usize, f64) -> f64 + Send + Sync>;

/// `|f(x, a, u)| ≤ b e^{-s u}` for every `u`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Envelope {
    pub b: f64,
    pub s: f64,
}

/// Where the boundary values `p^±` are read off.
pub const BOUNDARY_T: f64 = 200.0;
/// Pairs sampled for the `ω`-Hölder norm estimate.
const NORM_PAIRS: usize = 4000;
/// Directions sampled per fiber for boundary values.
const BOUNDARY_DIRECTIONS: usize = 16;

/// A function on `S^{d-1} × A × R` with sampled `‖f‖_{γ,ω}` and boundary
/// values `p^±(a) = lim_{t→±∞} f(x, a, t)`.
#[derive(Clone)]
pub struct OmegaFunction {
    evaluator: Evaluator,
    pub gamma: f64,
    pub omega_norm: f64,
    pub p_minus: Vec<f64>,
    pub p_plus: Vec<f64>,
    /// Kinks in `t` shared by all `(x, a)`, used as quadrature breakpoints.
    pub breaks: Vec<f64>,
    pub envelope: Option<Envelope>,
    dim: usize,
    a_size: usize,
}

impl std::fmt::Debug for OmegaFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OmegaFunction")
            .field("gamma", &self.gamma)
            .field("omega_norm", &self.omega_norm)
            .field("p_minus", &self.p_minus)
            .field("p_plus", &self.p_plus)
            .field("envelope", &self.envelope)
            .finish()
    }
}

pub(crate) fn random_direction<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 1e-8 {
            return v.into_iter().map(|a| a / n).collect();
        }
    }
}

impl OmegaFunction {
    /// Samples boundary values and the norm. Fails when a boundary value
    /// depends on the direction.
    pub fn new(dim: usize, a_size: usize, gamma: f64, evaluator: Evaluator) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::precondition("gamma must lie in (0, 1]"));
        }
        let mut rng = stream(0, purpose::PROBES, 100);
        let dirs: Vec<Vec<f64>> = (0..BOUNDARY_DIRECTIONS).map(|_| random_direction(dim, &mut rng)).collect();
        let boundary = |t: f64| -> Result<Vec<f64>> {
            (0..a_size)
                .map(|a| {
                    let vals: Vec<f64> = dirs.iter().map(|x| evaluator(x, a, t)).collect();
                    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    if hi - lo > 1e-6 * (1.0 + hi.abs()) {
                        return Err(Error::precondition(format!("boundary value at t = {t} depends on the direction")));
                    }
                    Ok(0.5 * (lo + hi))
                })
                .collect()
        };
        let p_minus = boundary(-BOUNDARY_T)?;
        let p_plus = boundary(BOUNDARY_T)?;
        let mut out = OmegaFunction { evaluator, gamma, omega_norm: 0.0, p_minus, p_plus, breaks: Vec::new(), envelope: None, dim, a_size };
        out.omega_norm = out.sample_norm(&mut rng);
        Ok(out)
    }

    pub fn zero(dim: usize, a_size: usize) -> Self {
        OmegaFunction {
            evaluator: Arc::new(|_, _, _| 0.0),
            gamma: 1.0,
            omega_norm: 0.0,
            p_minus: vec![0.0; a_size],
            p_plus: vec![0.0; a_size],
            breaks: Vec::new(),
            envelope: Some(Envelope { b: 0.0, s: 0.1 }),
            dim,
            a_size,
        }
    }

    pub fn with_envelope(mut self, b: f64, s: f64) -> Self {
        self.envelope = Some(Envelope { b, s });
        self
    }

    pub fn with_breaks(mut self, breaks: Vec<f64>) -> Self {
        self.breaks = breaks;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn a_size(&self) -> usize {
        self.a_size
    }

    pub fn eval(&self, x: &[f64], a: usize, t: f64) -> f64 {
        (self.evaluator)(x, a, t)
    }

    pub fn evaluator(&self) -> &Evaluator {
        &self.evaluator
    }

    /// `sup |f| + sup |f(u) - f(v)| / ω(u, v)^γ` over sampled points and
    /// pairs, half of them at small separation.
    fn sample_norm<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mut sup: f64 = 0.0;
        let mut semi: f64 = 0.0;
        for k in 0..NORM_PAIRS {
            let a = rng.gen_range(0..self.a_size);
            let x = random_direction(self.dim, rng);
            let t = rng.gen_range(-20.0..20.0);
            let (y, s) = if k % 2 == 0 {
                (random_direction(self.dim, rng), rng.gen_range(-20.0..20.0))
            } else {
                let h = 10f64.powf(rng.gen_range(-4.0..-1.0));
                let mut y: Vec<f64> = x.iter().map(|v| v + h * rng.gen_range(-1.0..1.0)).collect();
                let n = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                y.iter_mut().for_each(|v| *v /= n);
                (y, t + h * rng.gen_range(-1.0..1.0))
            };
            let fu = self.eval(&x, a, t);
            let fv = self.eval(&y, a, s);
            sup = sup.max(fu.abs()).max(fv.abs());
            let w = omega(Site::new(&x, a, t), Site::new(&y, a, s));
            if w > 0.0 {
                semi = semi.max((fu - fv).abs() / w.powf(self.gamma));
            }
        }
        sup + semi
    }
}

/// `f = φ + p^-(a) ψ(t) + p^+(a) (1 - ψ(t))` with `φ` decaying at both ends.
#[derive(Clone)]
pub struct BoundaryDecomposition {
    pub phi: Evaluator,
    pub p_minus: Vec<f64>,
    pub p_plus: Vec<f64>,
    /// Sampled `‖φ‖_{γ,0} = sup e^{γ|t|} |φ| + m_{γ,E}(φ)`.
    pub phi_norm: f64,
    /// `phi_norm / ‖f‖_{γ,ω}`, or zero when both vanish.
    pub constant: f64,
}

pub fn boundary_decompose(f: &OmegaFunction) -> BoundaryDecomposition {
    let g = f.evaluator.clone();
    let (pm, pp) = (f.p_minus.clone(), f.p_plus.clone());
    let phi: Evaluator = Arc::new(move |x, a, t| {
        let s = psi(t);
        g(x, a, t) - pm[a] * s - pp[a] * (1.0 - s)
    });
    let phi_norm = e_norm(&phi, f.dim, f.a_size, f.gamma, 20.0, 0.05);
    let constant = if phi_norm == 0.0 { 0.0 } else { phi_norm / f.omega_norm };
    BoundaryDecomposition { phi, p_minus: f.p_minus.clone(), p_plus: f.p_plus.clone(), phi_norm, constant }
}

/// Sampled `‖f‖_{γ,E} = sup e^{γ|t|} |f| + sup e^{γ|t|} |f(x,t) - f(x',t)| / d(x,x')^γ`
/// on `t ∈ [-t_max, t_max]` with spacing `dt`, over 32 directions per fiber.
pub fn e_norm(f: &Evaluator, dim: usize, a_size: usize, gamma: f64, t_max: f64, dt: f64) -> f64 {
    let mut rng = stream(0, purpose::PROBES, 101);
    let dirs: Vec<Vec<f64>> = (0..32).map(|_| random_direction(dim, &mut rng)).collect();
    let steps = (2.0 * t_max / dt).round() as usize;
    let mut sup: f64 = 0.0;
    let mut semi: f64 = 0.0;
    for a in 0..a_size {
        for k in 0..=steps {
            let t = -t_max + k as f64 * dt;
            let w = (gamma * t.abs()).exp();
            let vals: Vec<f64> = dirs.iter().map(|x| f(x, a, t)).collect();
            for (i, v) in vals.iter().enumerate() {
                sup = sup.max(w * v.abs());
                for j in (i + 1)..vals.len() {
                    semi = semi.max(w * (v - vals[j]).abs() / chordal(&dirs[i], &dirs[j]).powf(gamma));
                }
            }
        }
    }
    sup + semi
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn omega_pullback_example() {
        let e1 = [1.0, 0.0];
        let w = omega(Site::new(&e1, 0, 0.0), Site::new(&e1, 0, 4f64.ln()));
        assert!((w - 0.3).abs() < 1e-15);
        assert_eq!(omega(Site::new(&e1, 0, 1.0), Site::new(&e1, 1, 1.0)), 1.0);
        assert_eq!(omega0(Site::new(&e1, 0, 1.0), Site::new(&e1, 0, 1.0)), 0.0);
    }

    #[test]
    fn psi_endpoints() {
        assert!((psi(0.0) - 0.5).abs() < 1e-15);
        assert!((psi(-40.0) - 1.0).abs() < 1e-15);
        assert!(psi(40.0) < 1e-300);
    }

    #[test]
    fn psi_decomposes_to_zero() {
        let f = OmegaFunction::new(2, 1, 0.5, Arc::new(|_, _, t| psi(t))).unwrap();
        assert_eq!(f.p_minus, vec![1.0]);
        assert_eq!(f.p_plus, vec![0.0]);
        let d = boundary_decompose(&f);
        assert!(d.phi_norm < 1e-14);
    }

    #[test]
    fn direction_dependent_boundary_rejected() {
        assert!(OmegaFunction::new(2, 1, 0.5, Arc::new(|x, _, _| x[0])).is_err());
    }
}
