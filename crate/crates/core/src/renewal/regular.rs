use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;

use super::omega::{e_norm, Evaluator};
use crate::error::{Error, Result};
use crate::quad::{integrate, integrate_line, integrate_to_infinity, Quad};

pub type Profile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type Spatial = Arc<dyn Fn(&[f64], usize) -> f64 + Send + Sync>;
pub type Transform = Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;

/// `h(x, a) g(t)`, with `g` and its first derivatives, and optionally the
/// closed form of `ĝ(ξ) = ∫ e^{-iξt} g(t) dt`.
#[derive(Clone)]
pub struct SeparableTerm {
    pub spatial: Spatial,
    /// `derivatives[m] = g^{(m)}`.
    pub derivatives: Vec<Profile>,
    pub transform: Option<Transform>,
    /// Kinks of `g`, for quadrature.
    pub breaks: Vec<f64>,
}

impl SeparableTerm {
    pub fn new(spatial: Spatial, derivatives: Vec<Profile>) -> Self {
        SeparableTerm { spatial, derivatives, transform: None, breaks: Vec::new() }
    }

    pub fn with_transform(mut self, transform: Transform) -> Self {
        self.transform = Some(transform);
        self
    }

    pub fn with_breaks(mut self, breaks: Vec<f64>) -> Self {
        self.breaks = breaks;
        self
    }

    pub fn profile(&self, t: f64) -> f64 {
        (self.derivatives[0])(t)
    }

    /// `ĝ(ξ)`, by quadrature when no closed form is attached.
    pub fn transform_at(&self, xi: f64) -> Result<Complex64> {
        if let Some(tr) = &self.transform {
            return Ok(tr(xi));
        }
        let g = &self.derivatives[0];
        let window = if xi.abs() > 1.0 { PI / xi.abs() * 4.0 } else { 4.0 };
        let re = integrate_line(&|t: f64| g(t) * (xi * t).cos(), 0.0, window, &self.breaks, 1e-12, 100_000)?;
        let im = integrate_line(&|t: f64| -g(t) * (xi * t).sin(), 0.0, window, &self.breaks, 1e-12, 100_000)?;
        Ok(Complex64::new(re.value, im.value))
    }

    /// `∫ |g^{(m)}|`.
    pub fn l1_norm(&self, m: usize) -> Result<f64> {
        let g = &self.derivatives[m];
        Ok(integrate_line(&|t: f64| g(t).abs(), 0.0, 4.0, &self.breaks, 1e-10, 10_000)?.value)
    }
}

/// A function `f = Σ_k h_k(x, a) g_k(t)` of `E^{γ,k}` with derivatives in `t`
/// up to order `k`.
#[derive(Clone)]
pub struct RegularFunction {
    pub terms: Vec<SeparableTerm>,
    pub gamma: f64,
    pub k: usize,
    /// Sampled `‖f‖_{γ,k} = max_{m ≤ k} ‖f^{(m)}‖_{γ,E}`.
    pub norm_gamma_k: f64,
    dim: usize,
    a_size: usize,
}

impl RegularFunction {
    pub fn new(dim: usize, a_size: usize, gamma: f64, terms: Vec<SeparableTerm>) -> Result<Self> {
        if terms.iter().any(|t| t.derivatives.is_empty()) {
            return Err(Error::precondition("every term needs at least its profile"));
        }
        let k = terms.iter().map(|t| t.derivatives.len() - 1).min().unwrap_or(0);
        let mut out = RegularFunction { terms, gamma, k, norm_gamma_k: 0.0, dim, a_size };
        out.norm_gamma_k = (0..=k).map(|m| e_norm(&out.derivative_evaluator(m), dim, a_size, gamma, 20.0, 0.05)).fold(0.0, f64::max);
        Ok(out)
    }

    pub fn zero(dim: usize, a_size: usize) -> Self {
        RegularFunction { terms: Vec::new(), gamma: 1.0, k: usize::MAX, norm_gamma_k: 0.0, dim, a_size }
    }

    /// `h(x, a) e^{-t²/2}` with `k` derivatives and the closed-form transform
    /// `√(2π) e^{-ξ²/2}`.
    pub fn gaussian(dim: usize, a_size: usize, gamma: f64, spatial: Spatial, k: usize) -> Result<Self> {
        RegularFunction::new(dim, a_size, gamma, vec![gaussian_term(spatial, 0.0, k)])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn a_size(&self) -> usize {
        self.a_size
    }

    pub fn eval(&self, x: &[f64], a: usize, t: f64) -> f64 {
        self.derivative(0, x, a, t)
    }

    pub fn derivative(&self, m: usize, x: &[f64], a: usize, t: f64) -> f64 {
        self.terms.iter().map(|term| (term.spatial)(x, a) * (term.derivatives[m])(t)).sum()
    }

    pub fn evaluator(&self) -> Evaluator {
        self.derivative_evaluator(0)
    }

    fn derivative_evaluator(&self, m: usize) -> Evaluator {
        let me = self.clone();
        Arc::new(move |x, a, t| me.derivative(m, x, a, t))
    }
}

/// Probabilists' Hermite polynomial `He_m`.
fn hermite(m: usize, t: f64) -> f64 {
    let (mut a, mut b) = (1.0, t);
    if m == 0 {
        return a;
    }
    for j in 1..m {
        let c = t * b - j as f64 * a;
        a = b;
        b = c;
    }
    b
}

/// `h(x, a) e^{-(t-c)²/2}` with derivatives up to `k`.
pub fn gaussian_term(spatial: Spatial, center: f64, k: usize) -> SeparableTerm {
    let derivatives: Vec<Profile> = (0..=k)
        .map(|m| {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            Arc::new(move |t: f64| sign * hermite(m, t - center) * (-(t - center).powi(2) / 2.0).exp()) as Profile
        })
        .collect();
    let transform: Transform = Arc::new(move |xi: f64| Complex64::from_polar((2.0 * PI).sqrt() * (-xi * xi / 2.0).exp(), -xi * center));
    SeparableTerm::new(spatial, derivatives).with_transform(transform)
}

/// `φ_j(u) = u^j e^{-u}` on `u ≥ 0`.
pub fn phi(j: usize, u: f64) -> f64 {
    if u < 0.0 {
        0.0
    } else {
        u.powi(j as i32) * (-u).exp()
    }
}

/// `∫_0^∞ u^j e^{-u} f(t - u) du = (φ_j * f)(t)`.
pub fn phi_moment(f: &Profile, breaks: &[f64], j: usize, t: f64, tol: f64) -> Result<Quad> {
    let kinks: Vec<f64> = breaks.iter().map(|b| t - b).filter(|u| *u > 0.0).collect();
    let window = (j as f64 + 4.0).max(8.0);
    integrate_to_infinity(&|u: f64| phi(j, u) * f(t - u), 0.0, window, &kinks, tol, 10_000)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn falling(n: usize, l: usize) -> f64 {
    (0..l).fold(1.0, |acc, i| acc * (n - i) as f64)
}

/// `C_k = max_{m ≤ k} Σ_{l ≤ m} C(m, l) (k+1)! / (1-γ)^{k+2-l}`, the constant
/// of `‖φ_{k+1} * f‖_{γ,k} ≤ C_k ‖f‖_{γ,0}` obtained from
/// `∫ e^{γu} u^{k+1-l} e^{-u} du = (k+1-l)! / (1-γ)^{k+2-l}`.
pub fn regularizing_constant(k: usize, gamma: f64) -> f64 {
    let fact: f64 = (1..=k + 1).map(|i| i as f64).product();
    (0..=k)
        .map(|m| (0..=m).map(|l| binomial(m, l) * fact / (1.0 - gamma).powi((k + 2 - l) as i32)).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `φ_{k+1} * f` for a profile `f` on `R`, with its first `k` derivatives
/// `(φ_{k+1} * f)^{(m)} = Σ_l C(m,l) (-1)^{m-l} (k+1)!/(k+1-l)! φ_{k+1-l} * f`.
#[derive(Clone)]
pub struct Regularized {
    pub k: usize,
    pub gamma: f64,
    f: Profile,
    breaks: Vec<f64>,
    /// Sampled `‖f‖_{γ,0} = sup e^{γ|t|} |f|`.
    pub input_norm: f64,
    pub tol: f64,
}

/// Half-width of the window where norms are sampled.
pub const NORM_WINDOW: f64 = 30.0;

pub fn convolve_phi_k(f: Profile, breaks: &[f64], k: usize, gamma: f64) -> Result<Regularized> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::precondition("gamma must lie in (0, 1)"));
    }
    let weighted = |t: f64| (gamma * t.abs()).exp() * f(t).abs();
    let steps = (2.0 * NORM_WINDOW / 0.01) as usize;
    let mut inner: f64 = 0.0;
    let mut edge: f64 = 0.0;
    for i in 0..=steps {
        let t = -NORM_WINDOW + i as f64 * 0.01;
        if t.abs() <= NORM_WINDOW - 5.0 {
            inner = inner.max(weighted(t));
        } else {
            edge = edge.max(weighted(t));
        }
    }
    if edge > 1.01 * inner && edge > 1e-300 {
        return Err(Error::Grid(format!("profile does not decay like e^(-{gamma}|t|): weighted edge value {edge:e} exceeds interior {inner:e}")));
    }
    let input_norm = inner.max(edge);
    Ok(Regularized { k, gamma, f, breaks: breaks.to_vec(), input_norm, tol: 1e-10 * input_norm.max(1e-300) })
}

impl Regularized {
    /// `(φ_{k+1} * f)^{(m)}(t)` for `m ≤ k`.
    pub fn derivative(&self, m: usize, t: f64) -> Result<f64> {
        if m > self.k {
            return Err(Error::precondition("derivative order exceeds k"));
        }
        let k1 = self.k + 1;
        let mut acc = 0.0;
        for l in 0..=m {
            let sign = if (m - l) % 2 == 0 { 1.0 } else { -1.0 };
            let moment = phi_moment(&self.f, &self.breaks, k1 - l, t, self.tol)?.value;
            acc += binomial(m, l) * sign * falling(k1, l) * moment;
        }
        Ok(acc)
    }

    pub fn value(&self, t: f64) -> Result<f64> {
        self.derivative(0, t)
    }

    /// Sampled `‖φ_{k+1} * f‖_{γ,k} = max_m sup_t e^{γ|t|} |(φ_{k+1} * f)^{(m)}(t)|`
    /// on `[-NORM_WINDOW, NORM_WINDOW]` with spacing `dt`.
    pub fn measured_norm(&self, dt: f64) -> Result<f64> {
        let steps = (2.0 * NORM_WINDOW / dt).round() as usize;
        let k1 = self.k + 1;
        let mut best: f64 = 0.0;
        for i in 0..=steps {
            let t = -NORM_WINDOW + i as f64 * dt;
            let moments: Vec<f64> = (0..=k1).map(|j| if j + self.k >= k1 { phi_moment(&self.f, &self.breaks, j, t, self.tol).map(|q| q.value) } else { Ok(0.0) }).collect::<Result<_>>()?;
            let w = (self.gamma * t.abs()).exp();
            for m in 0..=self.k {
                let mut acc = 0.0;
                for l in 0..=m {
                    let sign = if (m - l) % 2 == 0 { 1.0 } else { -1.0 };
                    acc += binomial(m, l) * sign * falling(k1, l) * moments[k1 - l];
                }
                best = best.max(w * acc.abs());
            }
        }
        Ok(best)
    }

    /// `C_k` from [`regularizing_constant`].
    pub fn constant(&self) -> f64 {
        regularizing_constant(self.k, self.gamma)
    }
}

/// Random piecewise linear profile through knots on `[-10, 10]`, damped by
/// `e^{-γ'|t|}` with `γ' ∈ [γ, γ + 0.5]`. Returns the profile and its kinks.
pub fn random_piecewise_profile<R: Rng + ?Sized>(rng: &mut R, gamma: f64) -> (Profile, Vec<f64>) {
    let knots = rng.gen_range(3..9);
    let mut xs: Vec<f64> = (0..knots).map(|_| rng.gen_range(-10.0..10.0)).collect();
    xs.sort_by(f64::total_cmp);
    let ys: Vec<f64> = (0..knots).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let damp = gamma + rng.gen_range(0.0..0.5);
    let (kx, ky) = (xs.clone(), ys);
    let profile: Profile = Arc::new(move |t: f64| {
        let base = if t <= kx[0] {
            ky[0]
        } else if t >= kx[kx.len() - 1] {
            ky[ky.len() - 1]
        } else {
            let j = kx.partition_point(|&x| x <= t) - 1;
            let w = (t - kx[j]) / (kx[j + 1] - kx[j]);
            ky[j] * (1.0 - w) + ky[j + 1] * w
        };
        base * (-damp * t.abs()).exp()
    });
    let mut breaks = xs;
    breaks.push(0.0);
    (profile, breaks)
}

/// Result of calibrating and checking the Tauberian remainder bound
/// `|f(t)| ≤ C inf_V [ω_f(1/V) + ‖f‖_∞/V + (1+V)^k sup_{t'} e^{-|t'|} |φ_k * f(t - t')|]`.
#[derive(Clone, Debug)]
pub struct TauberianCheck {
    pub c: f64,
    pub k: usize,
    /// `(t, |f(t)|, C · bound(t))` at the check points.
    pub checks: Vec<(f64, f64, f64)>,
    pub dominated: bool,
}

/// The bracket of the Tauberian bound without the constant, on a table of
/// `φ_k * f` values at `tau` (uniform spacing).
pub struct TauberianBracket {
    tau: Vec<f64>,
    conv: Vec<f64>,
    f_sup: f64,
    k: usize,
    v_grid: Vec<f64>,
}

impl TauberianBracket {
    pub fn new(f: &Profile, breaks: &[f64], k: usize, v_grid: &[f64], f_sup: f64, window: f64, dt: f64) -> Result<Self> {
        let steps = (2.0 * window / dt).round() as usize;
        let tau: Vec<f64> = (0..=steps).map(|i| -window + i as f64 * dt).collect();
        let fact: f64 = (1..=k).map(|i| i as f64).product();
        let tol = 1e-10 * fact * f_sup.max(1e-300);
        let conv = tau.iter().map(|&t| phi_moment(f, breaks, k, t, tol).map(|q| q.value)).collect::<Result<_>>()?;
        Ok(TauberianBracket { tau, conv, f_sup, k, v_grid: v_grid.to_vec() })
    }

    /// `inf_V [ω(1/V) + ‖f‖_∞/V + (1+V)^k S(t)]` with
    /// `S(t) = sup_τ e^{-|t-τ|} |φ_k * f(τ)|` over the table and `τ = t`.
    pub fn eval(&self, modulus: &dyn Fn(f64) -> f64, t: f64) -> f64 {
        let mut s = self.tau.iter().zip(&self.conv).map(|(tau, c)| (-(t - tau).abs()).exp() * c.abs()).fold(0.0, f64::max);
        // τ = t itself, interpolated between table nodes.
        let (lo, dt) = (self.tau[0], self.tau[1] - self.tau[0]);
        let x = (t - lo) / dt;
        if x >= 0.0 && x < (self.tau.len() - 1) as f64 {
            let (i, w) = (x.floor() as usize, x.fract());
            s = s.max(((1.0 - w) * self.conv[i] + w * self.conv[i + 1]).abs());
        }
        self.v_grid.iter().map(|&v| modulus(1.0 / v) + self.f_sup / v + (1.0 + v).powi(self.k as i32) * s).fold(f64::INFINITY, f64::min)
    }
}

/// Calibrates `C` as the smallest constant with `|f| ≤ C · bracket` on
/// `train_t` together with the breaks inside its range (where `|f|` can
/// peak), then checks domination at `check_t`.
pub fn tauberian_bound(f: &Profile, breaks: &[f64], modulus: &dyn Fn(f64) -> f64, k: usize, v_grid: &[f64], train_t: &[f64], check_t: &[f64]) -> Result<TauberianCheck> {
    let f_sup = train_t.iter().chain(check_t).map(|&t| f(t).abs()).fold(0.0, f64::max);
    let lo = train_t.iter().chain(check_t).copied().fold(f64::INFINITY, f64::min);
    let hi = train_t.iter().chain(check_t).copied().fold(f64::NEG_INFINITY, f64::max);
    let window = lo.abs().max(hi.abs()) + 20.0;
    let bracket = TauberianBracket::new(f, breaks, k, v_grid, f_sup, window, 0.05)?;
    let (t_lo, t_hi) = train_t.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &t| (a.min(t), b.max(t)));
    let mut pts: Vec<f64> = train_t.iter().copied().chain(breaks.iter().copied().filter(|b| *b >= t_lo && *b <= t_hi)).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let ratio = |t: f64| -> Result<f64> {
        let v = f(t).abs();
        if v == 0.0 {
            return Ok(0.0);
        }
        let b = bracket.eval(modulus, t);
        if b <= 0.0 {
            return Err(Error::precondition("bracket vanishes where f does not"));
        }
        Ok(v / b)
    };
    let ratios = pts.iter().map(|&t| ratio(t)).collect::<Result<Vec<f64>>>()?;
    let mut c = ratios.iter().copied().fold(0.0, f64::max);
    // The bracket has sharp minima between grid points; refine each local
    // maximum of the ratio over its neighboring cell.
    for i in 1..pts.len().saturating_sub(1) {
        if ratios[i] >= ratios[i - 1] && ratios[i] >= ratios[i + 1] && ratios[i] > 0.0 {
            c = c.max(golden_max(&ratio, pts[i - 1], pts[i + 1])?);
        }
    }
    let checks: Vec<(f64, f64, f64)> = check_t.iter().map(|&t| (t, f(t).abs(), c * bracket.eval(modulus, t))).collect();
    let dominated = checks.iter().all(|(_, v, b)| v <= b);
    Ok(TauberianCheck { c, k, checks, dominated })
}

/// Golden-section search for a local maximum of `g` on `[a, b]`.
fn golden_max(g: &dyn Fn(f64) -> Result<f64>, mut a: f64, mut b: f64) -> Result<f64> {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (b - r * (b - a), a + r * (b - a));
    let (mut g1, mut g2) = (g(x1)?, g(x2)?);
    let mut best = g1.max(g2);
    for _ in 0..60 {
        if g1 >= g2 {
            b = x2;
            (x2, g2) = (x1, g1);
            x1 = b - r * (b - a);
            g1 = g(x1)?;
        } else {
            a = x1;
            (x1, g1) = (x2, g2);
            x2 = a + r * (b - a);
            g2 = g(x2)?;
        }
        best = best.max(g1).max(g2);
    }
    Ok(best)
}

/// `∫_t^∞ g`.
pub fn tail_integral(g: &Profile, breaks: &[f64], t: f64, tol: f64) -> Result<Quad> {
    integrate_to_infinity(&|u: f64| g(u), t, 4.0, breaks, tol, 100_000)
}

/// `∫_a^b g`.
pub fn profile_integral(g: &Profile, breaks: &[f64], a: f64, b: f64, tol: f64) -> Result<Quad> {
    integrate(&|u: f64| g(u), a, b, breaks, tol)
}
