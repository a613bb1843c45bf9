//! Top eigen-data of a real matrix, computed without going through the
//! singular value decomposition so it can cross-check the Cartan path.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative agreement demanded between the iterated eigenvalue and the
/// characteristic polynomial.
pub const EIGEN_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct TopEigen {
    /// `ln |mu|` for the dominant eigenvalue `mu`.
    pub log_modulus: f64,
    /// Sign of `mu`.
    pub sign: f64,
    /// Unit eigenvector.
    pub vector: DVector<f64>,
    /// Largest modulus among the remaining eigenvalues.
    pub second_modulus: f64,
}

fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn best_column(m: &DMatrix<f64>) -> DVector<f64> {
    let mut best = 0;
    let mut bn = -1.0;
    for j in 0..m.ncols() {
        let n = m.column(j).norm();
        if n > bn {
            bn = n;
            best = j;
        }
    }
    let c = m.column(best).into_owned();
    let n = c.norm();
    c / n
}

fn aligned_gap(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let s = if a.dot(b) < 0.0 { -1.0 } else { 1.0 };
    (a - b * s).norm()
}

/// Dominant real eigenvalue and eigenvector by normalized repeated squaring
/// followed by power-iteration polishing. For `d <= 3` the result is
/// checked against the characteristic polynomial; larger dimensions fall
/// back to a Schur decomposition for the separation test.
pub fn top_eigen(m: &DMatrix<f64>) -> Result<TopEigen> {
    let d = m.nrows();
    let scale = frobenius(m);
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::Eigen("zero or non-finite matrix".into()));
    }
    let mut pw = m / scale;
    let mut dir = best_column(&pw);
    let mut gap = f64::INFINITY;
    for _ in 0..64 {
        let sq = &pw * &pw;
        let n = frobenius(&sq);
        if !(n > 0.0) {
            return Err(Error::Eigen("nilpotent power".into()));
        }
        pw = sq / n;
        let next = best_column(&pw);
        gap = aligned_gap(&next, &dir);
        dir = next;
        if gap < 1e-15 {
            break;
        }
    }
    // Non-normal inputs leave the rank-one limit jittering by a few ulps;
    // the residual and characteristic polynomial checks below decide.
    if !(gap < 1e-10) {
        return Err(Error::Eigen("dominant direction did not stabilize".into()));
    }
    let mut x = dir;
    for _ in 0..4 {
        let y = m * &x;
        let n = y.norm();
        let s = if y.dot(&x) < 0.0 { -1.0 } else { 1.0 };
        x = y * (s / n);
    }
    let y = m * &x;
    let rayleigh = y.dot(&x);
    let sign = if rayleigh < 0.0 { -1.0 } else { 1.0 };
    let modulus = y.norm();
    let mu = sign * modulus;
    let residual = (&y - &x * mu).norm();
    if residual > 1e-9 * scale {
        return Err(Error::Eigen(format!("eigen residual {residual:e} too large (rotation-like or Jordan block)")));
    }

    let second_modulus = if d <= 3 {
        charpoly_check(m, mu)?
    } else {
        schur_second(m, mu)?
    };
    if second_modulus >= modulus * (1.0 - 1e-9) {
        return Err(Error::Eigen(format!("top eigenvalue not simple: |mu| = {modulus:e}, next = {second_modulus:e}")));
    }
    let x = canonical_unit(x);
    Ok(TopEigen { log_modulus: modulus.ln(), sign, vector: x, second_modulus })
}

fn canonical_unit(mut v: DVector<f64>) -> DVector<f64> {
    let n = v.norm();
    v /= n;
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v = -v;
    }
    v
}

/// Newton-step agreement of `mu` with the characteristic polynomial and the
/// modulus of the deflated roots.
fn charpoly_check(m: &DMatrix<f64>, mu: f64) -> Result<f64> {
    let d = m.nrows();
    let tr = m.trace();
    let det = m.determinant();
    match d {
        2 => {
            let p = mu * mu - tr * mu + det;
            let dp = 2.0 * mu - tr;
            let noise = (mu.abs() + frobenius(m)).powi(2);
            newton_ok(p, dp, mu, noise)?;
            Ok((det / mu).abs())
        }
        3 => {
            let c1 = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)] + m[(0, 0)] * m[(2, 2)] - m[(0, 2)] * m[(2, 0)]
                + m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)];
            let p = ((mu - tr) * mu + c1) * mu - det;
            let dp = (3.0 * mu - 2.0 * tr) * mu + c1;
            let noise = (mu.abs() + frobenius(m)).powi(3);
            newton_ok(p, dp, mu, noise)?;
            // Remaining roots: sum tr - mu, product det / mu.
            let s = tr - mu;
            let q = det / mu;
            let disc = s * s - 4.0 * q;
            if disc >= 0.0 {
                let r = disc.sqrt();
                let a = if s >= 0.0 { (s + r) / 2.0 } else { (s - r) / 2.0 };
                let b = if a != 0.0 { q / a } else { 0.0 };
                Ok(a.abs().max(b.abs()))
            } else {
                Ok(q.abs().sqrt())
            }
        }
        _ => unreachable!("charpoly check is for d <= 3"),
    }
}

/// `noise` bounds the terms of `p` and of its coefficients computed from the
/// entries, which sets the rounding floor of `p`.
fn newton_ok(p: f64, dp: f64, mu: f64, noise: f64) -> Result<()> {
    let step = if dp != 0.0 { (p / dp).abs() } else { f64::INFINITY };
    let floor = 16.0 * f64::EPSILON * noise / dp.abs();
    if step > EIGEN_TOL * mu.abs() + floor {
        return Err(Error::Eigen(format!("characteristic polynomial disagrees: Newton step {step:e} at mu = {mu:e}")));
    }
    Ok(())
}

fn schur_second(m: &DMatrix<f64>, mu: f64) -> Result<f64> {
    let eig = m.clone().complex_eigenvalues();
    let mut mods: Vec<f64> = eig.iter().map(|c| c.norm()).collect();
    mods.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    let top = mods[0];
    if ((top - mu.abs()) / top).abs() > 1e-8 {
        return Err(Error::Eigen(format!("Schur spectrum disagrees: {top:e} vs {:e}", mu.abs())));
    }
    Ok(mods[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn golden_eigen() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.0]);
        let e = top_eigen(&m).unwrap();
        assert_relative_eq!(e.log_modulus, ((3.0 + 5f64.sqrt()) / 2.0).ln(), max_relative = 1e-14);
        assert_eq!(e.sign, 1.0);
    }

    #[test]
    fn negative_dominant_eigenvalue() {
        let m = DMatrix::from_row_slice(3, 3, &[-4.0, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.5]);
        let e = top_eigen(&m).unwrap();
        assert_relative_eq!(e.log_modulus, 4f64.ln(), max_relative = 1e-14);
        assert_eq!(e.sign, -1.0);
        assert_relative_eq!(e.vector[0], 1.0);
        assert_relative_eq!(e.second_modulus, 0.5, max_relative = 1e-12);
    }

    #[test]
    fn rotation_is_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[0.6, -0.8, 0.8, 0.6]);
        assert!(top_eigen(&m).is_err());
        assert!(top_eigen(&DMatrix::identity(2, 2)).is_err());
    }

    #[test]
    fn larger_dimension_uses_schur() {
        let m = DMatrix::from_diagonal(&DVector::from_row_slice(&[5.0, 2.0, 0.5, 0.2, 1.0]));
        let e = top_eigen(&m).unwrap();
        assert_relative_eq!(e.log_modulus, 5f64.ln(), max_relative = 1e-14);
        assert_relative_eq!(e.second_modulus, 2.0, max_relative = 1e-10);
    }
}
