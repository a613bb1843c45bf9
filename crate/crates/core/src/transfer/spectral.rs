use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use super::operator::DiscretizedOperator;
use crate::error::{Error, Result};

/// Entries below this are treated as absent when finding closed classes.
const EDGE_TOL: f64 = 1e-14;

/// Minimal separation of the leading cluster.
pub const GAP_TOL: f64 = 1e-6;

/// Largest number of closed classes allowed (`|H| = 2`).
pub const MAX_CLASSES: usize = 2;

/// Spectral data of `P(0)`.
///
/// `nu[i]` is the stationary probability vector of the `i`-th closed class
/// (a left eigenvector for 1), `p[i]` the probability of absorption into that
/// class (a right eigenvector); `Σ_i p_i = 1`. The gap is `1 - ρ(P - N_0)`
/// with `N_0 = Σ_i p_i ν_i`, estimated from above through norms of powers,
/// so the reported gap is conservative.
#[derive(Clone, Debug)]
pub struct SpectralData {
    pub leading_eigenvalue: Complex64,
    pub gap: f64,
    /// Gap of the operator induced on even functions, where the leading
    /// eigenvalue is simple.
    pub quotient_gap: f64,
    pub r: usize,
    pub nu: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    pub classes: Vec<Vec<usize>>,
}

impl SpectralData {
    /// `∫ f dν_i`.
    pub fn integrate(&self, i: usize, f: &[Complex64]) -> Complex64 {
        self.nu[i].iter().zip(f).map(|(w, v)| v * *w).sum()
    }

    /// `N_0 f = Σ_i p_i ∫ f dν_i`.
    pub fn n0_apply(&self, f: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); f.len()];
        for i in 0..self.r {
            let c = self.integrate(i, f);
            for (o, p) in out.iter_mut().zip(&self.p[i]) {
                *o += c * *p;
            }
        }
        out
    }

    /// `Σ_i ν_i`, normalized.
    pub fn mixed_measure(&self) -> Vec<f64> {
        let n = self.nu[0].len();
        (0..n).map(|s| self.nu.iter().map(|v| v[s]).sum::<f64>() / self.r as f64).collect()
    }
}

/// Closed classes, stationary vectors, absorption probabilities and the gap
/// of a row-stochastic matrix.
#[derive(Clone, Debug)]
pub struct StochasticAnalysis {
    pub classes: Vec<Vec<usize>>,
    pub nu: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    pub gap: f64,
}

pub fn analyze_stochastic(p: &DMatrix<f64>, max_classes: usize) -> Result<StochasticAnalysis> {
    let n = p.nrows();
    let mut graph = DiGraph::<(), ()>::with_capacity(n, n * 4);
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for i in 0..n {
        for j in 0..n {
            if p[(i, j)] > EDGE_TOL {
                graph.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    let sccs = tarjan_scc(&graph);
    let mut component = vec![0usize; n];
    for (k, c) in sccs.iter().enumerate() {
        for v in c {
            component[v.index()] = k;
        }
    }
    let mut classes: Vec<Vec<usize>> = sccs
        .iter()
        .enumerate()
        .filter(|(k, c)| c.iter().all(|v| (0..n).all(|j| p[(v.index(), j)] <= EDGE_TOL || component[j] == *k)))
        .map(|(_, c)| {
            let mut v: Vec<usize> = c.iter().map(|x| x.index()).collect();
            v.sort_unstable();
            v
        })
        .collect();
    classes.sort();
    if classes.len() > max_classes {
        return Err(Error::DegenerateSpectrum(format!("{} closed classes (at most {max_classes} allowed)", classes.len())));
    }
    let mut in_class = vec![usize::MAX; n];
    for (k, c) in classes.iter().enumerate() {
        for &s in c {
            in_class[s] = k;
        }
    }
    let nu: Vec<Vec<f64>> = classes.iter().map(|c| class_stationary(p, c)).collect::<Result<_>>()?;
    let transient: Vec<usize> = (0..n).filter(|&s| in_class[s] == usize::MAX).collect();
    let mut probs = vec![vec![0.0; n]; classes.len()];
    for (k, c) in classes.iter().enumerate() {
        for &s in c {
            probs[k][s] = 1.0;
        }
    }
    if !transient.is_empty() {
        let t = transient.len();
        let a = DMatrix::from_fn(t, t, |i, j| if i == j { 1.0 } else { 0.0 } - p[(transient[i], transient[j])]);
        let lu = a.lu();
        for (k, c) in classes.iter().enumerate() {
            let b = DVector::from_fn(t, |i, _| c.iter().map(|&s| p[(transient[i], s)]).sum());
            let x = lu.solve(&b).ok_or_else(|| Error::DegenerateSpectrum("transient block is singular".into()))?;
            for (i, &s) in transient.iter().enumerate() {
                probs[k][s] = x[i];
            }
        }
    }
    // Deflated operator P - Σ p_k ν_k^T; its spectral radius is the second
    // eigenvalue modulus.
    let mut q = p.clone();
    for k in 0..classes.len() {
        for i in 0..n {
            if probs[k][i] != 0.0 {
                for j in 0..n {
                    q[(i, j)] -= probs[k][i] * nu[k][j];
                }
            }
        }
    }
    let gap = 1.0 - spectral_radius_bound(q, 10);
    Ok(StochasticAnalysis { classes, nu, p: probs, gap })
}

fn class_stationary(p: &DMatrix<f64>, class: &[usize]) -> Result<Vec<f64>> {
    let m = class.len();
    let n = p.nrows();
    let mut a = DMatrix::from_fn(m, m, |i, j| p[(class[j], class[i])] - if i == j { 1.0 } else { 0.0 });
    for j in 0..m {
        a[(m - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(m);
    b[m - 1] = 1.0;
    let x = a.lu().solve(&b).ok_or_else(|| Error::DegenerateSpectrum("closed class has no unique stationary vector".into()))?;
    let mut out = vec![0.0; n];
    for (i, &s) in class.iter().enumerate() {
        out[s] = x[i].max(0.0);
    }
    let total: f64 = out.iter().sum();
    Ok(out.into_iter().map(|v| v / total).collect())
}

/// `‖Q^k‖_∞^{1/k}` for `k = 2^squarings`, an upper bound for the spectral
/// radius.
pub fn spectral_radius_bound(mut q: DMatrix<f64>, squarings: u32) -> f64 {
    let norm = |m: &DMatrix<f64>| m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    // Invariant: Q_original^k = e^{log_scale} q.
    let mut log_scale = 0.0;
    let mut k = 1.0;
    for _ in 0..squarings {
        let s = norm(&q);
        if s == 0.0 {
            return 0.0;
        }
        q /= s;
        log_scale = 2.0 * (log_scale + s.ln());
        q = &q * &q;
        k *= 2.0;
    }
    let s = norm(&q);
    if s == 0.0 {
        return 0.0;
    }
    ((log_scale + s.ln()) / k).exp()
}

/// Spectral data of `P(0)` on the full grid and on the even quotient.
pub fn spectral_data(op: &DiscretizedOperator) -> Result<SpectralData> {
    if op.z().norm() != 0.0 {
        return Err(Error::precondition("spectral data is computed at z = 0"));
    }
    let dense = op.to_dense_real();
    let full = analyze_stochastic(&dense, MAX_CLASSES)?;
    let (even, _) = op.even_part_dense();
    let quotient = analyze_stochastic(&even.map(|v| v.re), 1)?;
    let gap = full.gap.min(quotient.gap);
    if !(full.gap >= GAP_TOL) || !(quotient.gap >= GAP_TOL) {
        return Err(Error::DegenerateSpectrum(format!("gap {gap:e} below {GAP_TOL:e}")));
    }
    let nu = full.nu;
    // Leading eigenvalue measured as the Rayleigh quotient ν P 1 / ν 1.
    let pn: f64 = (0..dense.nrows()).map(|i| nu[0][i] * dense.row(i).sum()).sum();
    Ok(SpectralData {
        leading_eigenvalue: Complex64::new(pn, 0.0),
        gap: full.gap,
        quotient_gap: quotient.gap,
        r: full.classes.len(),
        nu,
        p: full.p,
        classes: full.classes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radius_of_known_matrix() {
        let q = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.0, 0.3]);
        let r = spectral_radius_bound(q, 10);
        assert!(r >= 0.5 && r < 0.5 * 1.01, "{r}");
        assert_eq!(spectral_radius_bound(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]), 4), 0.0);
    }

    #[test]
    fn two_state_chain() {
        let p = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.25, 0.5, 0.25, 0.0, 0.0, 1.0]);
        let a = analyze_stochastic(&p, 2).unwrap();
        assert_eq!(a.classes, vec![vec![0], vec![2]]);
        assert!((a.p[0][1] - 0.5).abs() < 1e-14);
        assert!((a.gap - 0.5).abs() < 0.01);
        assert!(analyze_stochastic(&DMatrix::identity(3, 3), 2).is_err());
    }
}
