use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::grid::StateGrid;
use crate::error::{Error, Result};

/// Complex values on the states of a [`StateGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    pub values: Vec<Complex64>,
    pub gamma: f64,
}

impl GridFunction {
    pub fn new(values: Vec<Complex64>, gamma: f64) -> Self {
        GridFunction { values, gamma }
    }

    pub fn zeros(len: usize, gamma: f64) -> Self {
        GridFunction { values: vec![Complex64::new(0.0, 0.0); len], gamma }
    }

    pub fn from_real(values: &[f64], gamma: f64) -> Self {
        GridFunction { values: values.iter().map(|&v| Complex64::new(v, 0.0)).collect(), gamma }
    }

    pub fn from_fn(grid: &StateGrid, gamma: f64, f: impl Fn(&[f64], usize) -> Complex64) -> Self {
        let values = (0..grid.len())
            .map(|s| {
                let (x, a) = grid.state(s);
                f(x, a)
            })
            .collect();
        GridFunction { values, gamma }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, c: Complex64) -> GridFunction {
        GridFunction { values: self.values.iter().map(|v| v * c).collect(), gamma: self.gamma }
    }

    pub fn sub(&self, other: &GridFunction) -> GridFunction {
        GridFunction { values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(), gamma: self.gamma }
    }

    pub fn add(&self, other: &GridFunction) -> GridFunction {
        GridFunction { values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(), gamma: self.gamma }
    }

    /// Linear interpolation at an arbitrary `(x, a)`.
    pub fn eval(&self, grid: &StateGrid, x: &[f64], a: usize) -> Result<Complex64> {
        Ok(grid.locate(x)?.iter().map(|&(i, w)| self.values[grid.index(i, a)] * w).sum())
    }
}

/// Precomputed pair weights `d(x_i, x_j)^{-γ}` for the grid Hölder
/// seminorm.
///
/// On the full sphere the metric is the chordal distance. With the quotient
/// flag, `x` is compared with whichever of `y`, `-y` is closer, at distance
/// `‖x ∧ y‖` (the projective metric), so even functions are measured as
/// functions on projective space.
#[derive(Clone, Debug)]
pub struct HolderNorm {
    gamma: f64,
    quotient: bool,
    sphere_len: usize,
    a_size: usize,
    /// `(i, partner of j, d(x_i, x_j)^{-γ})` over pairs `i < j`.
    pairs: Vec<(u32, u32, f64)>,
}

impl HolderNorm {
    pub fn new(grid: &StateGrid, gamma: f64, quotient: bool) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::precondition(format!("Hölder exponent {gamma} outside (0, 1]")));
        }
        let m = grid.sphere_len();
        if m < 2 {
            return Err(Error::precondition("need at least two points per fiber"));
        }
        let mut pairs = Vec::with_capacity(m * (m - 1) / 2);
        for i in 0..m {
            let x = grid.sphere_point(i);
            for j in (i + 1)..m {
                let y = grid.sphere_point(j);
                let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
                let (partner, d) = if quotient {
                    let p = if dot >= 0.0 { j } else { grid.antipode(j) % m };
                    (p, crate::matrix::wedge2(x, y))
                } else {
                    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
                    (j, d2.sqrt())
                };
                if d > 1e-12 {
                    pairs.push((i as u32, partner as u32, d.powf(-gamma)));
                }
            }
        }
        Ok(HolderNorm { gamma, quotient, sphere_len: m, a_size: grid.a_size(), pairs })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn quotient(&self) -> bool {
        self.quotient
    }

    /// `m_γ(f)`: maximum Hölder quotient over grid pairs in the same fiber.
    pub fn seminorm(&self, f: &[Complex64]) -> f64 {
        let m = self.sphere_len;
        let mut best: f64 = 0.0;
        for a in 0..self.a_size {
            let v = &f[a * m..(a + 1) * m];
            for &(i, p, w) in &self.pairs {
                let q = (v[i as usize] - v[p as usize]).norm_sqr() * w * w;
                if q > best {
                    best = q;
                }
            }
        }
        best.sqrt()
    }

    /// `‖f‖_∞ + m_γ(f)`.
    pub fn norm(&self, f: &[Complex64]) -> f64 {
        f.iter().map(|v| v.norm()).fold(0.0, f64::max) + self.seminorm(f)
    }
}

/// One-shot Hölder seminorm; build a [`HolderNorm`] when evaluating many
/// functions on the same grid.
pub fn holder_seminorm(grid: &StateGrid, f: &GridFunction, quotient: bool) -> Result<f64> {
    Ok(HolderNorm::new(grid, f.gamma, quotient)?.seminorm(&f.values))
}

/// `max(‖f‖_∞, m_γ(f) / (2 C_2 |t|))`.
pub fn t_norm(f: &GridFunction, seminorm: f64, t: f64, c2: f64) -> Result<f64> {
    if t.abs() < 2.0 || c2 < 1.0 {
        return Err(Error::precondition("t-norm needs |t| >= 2 and C2 >= 1"));
    }
    Ok(f.sup_norm().max(seminorm / (2.0 * c2 * t.abs())))
}

/// Even and odd parts under `ϑ(x, a) = (-x, a)`.
pub fn isotypic_split(f: &GridFunction, grid: &StateGrid) -> (GridFunction, GridFunction) {
    let mut even = f.clone();
    let mut odd = f.clone();
    for s in 0..f.len() {
        let t = grid.antipode(s);
        even.values[s] = (f.values[s] + f.values[t]) * 0.5;
        odd.values[s] = (f.values[s] - f.values[t]) * 0.5;
    }
    (even, odd)
}

/// A smooth random probe `Σ_k c_k exp(i w_k·x)` (same formula on every
/// grid, so probes can be compared across refinements).
pub fn random_probe<R: Rng + ?Sized>(grid: &StateGrid, gamma: f64, rng: &mut R) -> GridFunction {
    let d = grid.dim();
    let terms: Vec<(Complex64, Vec<f64>, usize)> = (0..4)
        .map(|_| {
            let c = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
            let w: Vec<f64> = (0..d).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)).collect();
            (c, w, rng.gen_range(0..grid.a_size()))
        })
        .collect();
    GridFunction::from_fn(grid, gamma, |x, a| {
        terms
            .iter()
            .map(|(c, w, b)| {
                let phase: f64 = w.iter().zip(x).map(|(u, v)| u * v).sum();
                let bump = if *b == a { 1.0 } else { 0.5 };
                c * Complex64::from_polar(bump, phase)
            })
            .sum()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_has_zero_seminorm() {
        let g = StateGrid::circle(62, 1).unwrap();
        let f = GridFunction::from_fn(&g, 0.5, |_, _| Complex64::new(3.0, 0.0));
        assert_eq!(holder_seminorm(&g, &f, false).unwrap(), 0.0);
        assert_eq!(holder_seminorm(&g, &f, true).unwrap(), 0.0);
    }

    #[test]
    fn isotypic_parts() {
        let g = StateGrid::circle(30, 1).unwrap();
        let f = GridFunction::from_fn(&g, 1.0, |x, _| Complex64::new(x[0], 0.0));
        let (e, o) = isotypic_split(&f, &g);
        assert!(e.sup_norm() < 1e-15);
        assert!(o.sub(&f).sup_norm() < 1e-15);
    }
}
