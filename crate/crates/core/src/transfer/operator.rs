use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use super::grid::StateGrid;
use crate::error::{Error, Result};
use crate::measure::GeneratorMeasure;

/// Default half-width `η` of the strip `|Re z| < η` where `P(z)` is built.
pub const ETA: f64 = 0.2;

/// `P(z) f(x, a) = Σ_g w_g e^{-z σ(g, x)} f(g·x, g·a)`, with `f(g·x)` read off
/// by linear interpolation among grid points. Stored row-compressed.
#[derive(Clone, Debug)]
pub struct DiscretizedOperator {
    grid: Arc<StateGrid>,
    rho: GeneratorMeasure,
    z: Complex64,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

pub fn build_operator(rho: &GeneratorMeasure, z: Complex64, grid: &Arc<StateGrid>) -> Result<DiscretizedOperator> {
    build_operator_eta(rho, z, grid, ETA)
}

pub fn build_operator_eta(rho: &GeneratorMeasure, z: Complex64, grid: &Arc<StateGrid>, eta: f64) -> Result<DiscretizedOperator> {
    if z.re.abs() >= eta {
        return Err(Error::OutOfDomain { re: z.re, im: z.im });
    }
    if rho.dim() != grid.dim() || rho.a_size() != grid.a_size() {
        return Err(Error::Dimension("measure and grid disagree on d or |A|".into()));
    }
    let m = grid.sphere_len();
    let rows: Vec<Vec<(usize, Complex64)>> = (0..grid.len())
        .into_par_iter()
        .map(|s| {
            let (x, a) = grid.state(s);
            let mut y = vec![0.0; x.len()];
            let mut row: Vec<(usize, Complex64)> = Vec::with_capacity(rho.atoms().len() * 3);
            for atom in rho.atoms() {
                let sigma = crate::matrix::sigma_slice(&atom.g, x, &mut y);
                let factor = (-z * sigma).exp() * atom.weight;
                let b = atom.perm[a];
                for (j, w) in grid.locate(&y)? {
                    let col = b * m + j;
                    match row.iter_mut().find(|e| e.0 == col) {
                        Some(e) => e.1 += factor * w,
                        None => row.push((col, factor * w)),
                    }
                }
            }
            row.sort_by_key(|e| e.0);
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let mut row_ptr = Vec::with_capacity(rows.len() + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    row_ptr.push(0);
    for r in rows {
        for (c, v) in r {
            cols.push(c);
            vals.push(v);
        }
        row_ptr.push(cols.len());
    }
    Ok(DiscretizedOperator { grid: grid.clone(), rho: rho.clone(), z, row_ptr, cols, vals })
}

impl DiscretizedOperator {
    pub fn grid(&self) -> &Arc<StateGrid> {
        &self.grid
    }

    pub fn rho(&self) -> &GeneratorMeasure {
        &self.rho
    }

    pub fn z(&self) -> Complex64 {
        self.z
    }

    pub fn len(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Nonzero entries of row `s`.
    pub fn row(&self, s: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        (self.row_ptr[s]..self.row_ptr[s + 1]).map(move |k| (self.cols[k], self.vals[k]))
    }

    pub fn apply(&self, f: &[Complex64]) -> Vec<Complex64> {
        (0..self.len()).map(|s| self.row(s).map(|(c, v)| v * f[c]).sum()).collect()
    }

    pub fn apply_n(&self, f: &[Complex64], n: usize) -> Vec<Complex64> {
        let mut g = f.to_vec();
        for _ in 0..n {
            g = self.apply(&g);
        }
        g
    }

    /// `f ↦ f - P f`.
    pub fn apply_i_minus(&self, f: &[Complex64]) -> Vec<Complex64> {
        self.apply(f).iter().zip(f).map(|(p, v)| v - p).collect()
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for s in 0..n {
            for (c, v) in self.row(s) {
                m[(s, c)] = v;
            }
        }
        m
    }

    /// Real part of the dense matrix; exact when `z` is real.
    pub fn to_dense_real(&self) -> DMatrix<f64> {
        self.to_dense().map(|v| v.re)
    }

    /// `max_s Σ_c |P_{sc}|`, the norm of `P` on bounded functions.
    pub fn sup_operator_norm(&self) -> f64 {
        (0..self.len()).map(|s| self.row(s).map(|(_, v)| v.norm()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// Row sums `Σ_c P_{sc}`.
    pub fn row_sums(&self) -> Vec<Complex64> {
        (0..self.len()).map(|s| self.row(s).map(|(_, v)| v).sum()).collect()
    }

    /// Quotient by the antipodal map on even functions:
    /// `P_even[i][j] = P[i][j] + P[i][ϑj]` over one representative per pair.
    pub fn even_part_dense(&self) -> (DMatrix<Complex64>, Vec<usize>) {
        let n = self.len();
        let mut rep = vec![usize::MAX; n];
        let mut reps = Vec::new();
        for s in 0..n {
            if rep[s] == usize::MAX {
                rep[s] = reps.len();
                rep[self.grid.antipode(s)] = reps.len();
                reps.push(s);
            }
        }
        let mut m = DMatrix::zeros(reps.len(), reps.len());
        for (i, &s) in reps.iter().enumerate() {
            for (c, v) in self.row(s) {
                m[(i, rep[c])] += v;
            }
        }
        (m, reps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::GroupElement;
    use crate::measure::cone2;

    #[test]
    fn identity_measure_gives_identity() {
        let g = Arc::new(StateGrid::circle(30, 1).unwrap());
        let p = build_operator(&GeneratorMeasure::dirac(GroupElement::identity(2)), Complex64::new(0.1, 3.0), &g).unwrap();
        let d = p.to_dense() - DMatrix::<Complex64>::identity(30, 30);
        assert!(d.iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn stochastic_at_zero() {
        let g = Arc::new(StateGrid::circle(62, 1).unwrap());
        let p = build_operator(&cone2(), Complex64::new(0.0, 0.0), &g).unwrap();
        for s in p.row_sums() {
            assert!((s.re - 1.0).abs() < 1e-12 && s.im == 0.0);
        }
        assert!(p.vals.iter().all(|v| v.re >= 0.0));
        let q = build_operator(&cone2(), Complex64::new(0.0, 5.0), &g).unwrap();
        assert!(q.sup_operator_norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn strip_is_enforced() {
        let g = Arc::new(StateGrid::circle(30, 1).unwrap());
        assert!(matches!(build_operator(&cone2(), Complex64::new(0.3, 0.0), &g), Err(Error::OutOfDomain { .. })));
    }
}
