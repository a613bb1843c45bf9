//! Matrix primitives on SL_d(R): Cartan data, wedge powers, projective
//! distance, dual pairing and the norm cocycle.

use std::fmt;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance on `|det - 1|` after construction.
pub const DET_TOL: f64 = 1e-8;
/// Inputs with `|det - 1|` up to this are renormalized by `det^{1/d}`.
pub const DET_RENORM_TOL: f64 = 1e-4;
/// Convergence threshold of the SVD iteration.
const SVD_EPS: f64 = 8.0 * f64::EPSILON;
/// Relative gap below which `kappa_1 = kappa_2` is treated as degenerate.
pub const DEGENERATE_TOL: f64 = 1e-12;

/// A d x d real matrix of determinant one.
#[derive(Clone)]
pub struct GroupElement {
    m: DMatrix<f64>,
    cartan: OnceLock<CartanDecomposition>,
}

impl fmt::Debug for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GroupElement").field("rows", &self.rows()).finish()
    }
}

impl PartialEq for GroupElement {
    fn eq(&self, other: &Self) -> bool {
        self.m == other.m
    }
}

impl GroupElement {
    /// Validates `m` as an element of SL_d(R), renormalizing small
    /// determinant drift.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let d = m.nrows();
        if d < 2 || m.ncols() != d {
            return Err(Error::Dimension(format!("expected a square matrix with d >= 2, got {}x{}", m.nrows(), m.ncols())));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Dimension("non-finite matrix entry".into()));
        }
        let det = m.determinant();
        // Rounding error of the determinant scales with the Hadamard bound.
        let hadamard: f64 = m.row_iter().map(|r| r.norm()).product::<f64>().max(1.0);
        let noise = 64.0 * f64::EPSILON * hadamard;
        let dev = (det - 1.0).abs();
        let m = if dev <= noise {
            m
        } else if det > 0.0 && dev <= DET_RENORM_TOL {
            let s = det.powf(1.0 / d as f64);
            m / s
        } else {
            return Err(Error::NotUnimodular { det });
        };
        let g = GroupElement { m, cartan: OnceLock::new() };
        let det = g.m.determinant();
        if (det - 1.0).abs() > DET_TOL.max(noise) {
            return Err(Error::NotUnimodular { det });
        }
        Ok(g)
    }

    /// Product of two group elements. No determinant check is made since
    /// the product of unimodular matrices is unimodular.
    pub fn mul(&self, other: &GroupElement) -> GroupElement {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch in product");
        GroupElement { m: &self.m * &other.m, cartan: OnceLock::new() }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Dimension("rows of unequal length".into()));
        }
        Self::new(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
    }

    pub fn identity(d: usize) -> Self {
        GroupElement { m: DMatrix::identity(d, d), cartan: OnceLock::new() }
    }

    pub fn diag(entries: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_row_slice(entries)))
    }

    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        GroupElement { m: DMatrix::from_row_slice(2, 2, &[c, -s, s, c]), cartan: OnceLock::new() }
    }

    /// `-g`, which stays in SL_d only for even d.
    pub fn negated(&self) -> Result<Self> {
        if self.dim() % 2 == 1 {
            return Err(Error::NotUnimodular { det: -1.0 });
        }
        Ok(GroupElement { m: -&self.m, cartan: OnceLock::new() })
    }

    pub fn pow(&self, p: u32) -> GroupElement {
        let mut acc = GroupElement::identity(self.dim());
        for _ in 0..p {
            acc = acc.mul(self);
        }
        acc
    }

    pub fn transpose(&self) -> GroupElement {
        GroupElement { m: self.m.transpose(), cartan: OnceLock::new() }
    }

    pub fn inverse(&self) -> GroupElement {
        let inv = self.m.clone().try_inverse().expect("unimodular matrix is invertible");
        GroupElement { m: inv, cartan: OnceLock::new() }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim()).map(|i| self.m.row(i).iter().copied().collect()).collect()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    /// Operator norm, equal to `kappa_1`.
    pub fn norm(&self) -> f64 {
        self.cartan().kappa[0]
    }

    /// `out = g x` on plain slices, for hot loops.
    #[inline]
    pub fn apply_slice(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for i in 0..d {
            let mut s = 0.0;
            for j in 0..d {
                s += self.m[(i, j)] * x[j];
            }
            out[i] = s;
        }
    }

    pub fn apply_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.m * x
    }

    /// Projective action `X -> gX`.
    pub fn act(&self, x: &ProjectivePoint) -> ProjectivePoint {
        ProjectivePoint::from_vector(self.apply_vec(x.rep())).expect("invertible image of a unit vector is nonzero")
    }

    /// Cached Cartan data. Panics only if the SVD routine fails, which
    /// `try_cartan` reports instead.
    pub fn cartan(&self) -> &CartanDecomposition {
        if let Some(c) = self.cartan.get() {
            return c;
        }
        let c = compute_cartan(&self.m).expect("singular value decomposition failed");
        let _ = self.cartan.set(c);
        self.cartan.get().expect("just set")
    }

    pub fn try_cartan(&self) -> Result<&CartanDecomposition> {
        if let Some(c) = self.cartan.get() {
            return Ok(c);
        }
        let c = compute_cartan(&self.m)?;
        let _ = self.cartan.set(c);
        Ok(self.cartan.get().expect("just set"))
    }

    /// Operator norm of `g - h`.
    pub fn distance(&self, other: &GroupElement) -> f64 {
        top_singular_value(&(&self.m - &other.m))
    }
}

/// Singular values and top singular directions of `g = k a l`.
#[derive(Clone, Debug, PartialEq)]
pub struct CartanDecomposition {
    /// Nonincreasing singular values.
    pub kappa: Vec<f64>,
    /// Top left singular direction `k e_1`.
    pub x_m: ProjectivePoint,
    /// Top right singular direction as a covector `l^T e_1^*`.
    pub y_m: DualProjectivePoint,
    /// `kappa_2 / kappa_1`.
    pub kappa_gap: f64,
    /// Set when `kappa_1 = kappa_2` to within `DEGENERATE_TOL`; the axes are
    /// then an arbitrary valid choice.
    pub degenerate: bool,
}

pub fn cartan_decompose(g: &GroupElement) -> Result<CartanDecomposition> {
    g.try_cartan().cloned()
}

fn compute_cartan(m: &DMatrix<f64>) -> Result<CartanDecomposition> {
    let d = m.nrows();
    let kappa = if d <= 4 {
        // Ratios of compound-matrix norms stay accurate for tiny kappa_i.
        let mut wedges = vec![1.0; d + 1];
        for i in 1..d {
            wedges[i] = top_singular_value(&compound(m, i));
        }
        wedges[d] = 1.0;
        (1..=d).map(|i| wedges[i] / wedges[i - 1]).collect::<Vec<_>>()
    } else {
        let svd = m.clone().try_svd(false, false, SVD_EPS, 10_000).ok_or_else(|| Error::Decomposition("SVD did not converge".into()))?;
        let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
        s.sort_by(|a, b| b.partial_cmp(a).expect("finite singular values"));
        s
    };
    let mut kappa = kappa;
    // Compound ratios can be off by an ulp; keep them monotone.
    for i in 1..d {
        if kappa[i] > kappa[i - 1] {
            kappa[i] = kappa[i - 1];
        }
    }
    // The SVD iteration loses the top singular vectors of ill-conditioned
    // products, so take them from the symmetric eigenproblem instead.
    let (y, _) = top_right_singular(m)?;
    let x = m * &y;
    let x_m = ProjectivePoint::from_vector(x)?;
    let y_m = DualProjectivePoint::from_vector(y)?;
    let kappa_gap = kappa[1] / kappa[0];
    let degenerate = kappa[0] - kappa[1] <= DEGENERATE_TOL * kappa[0];
    Ok(CartanDecomposition { kappa, x_m, y_m, kappa_gap, degenerate })
}

/// Unit top right singular vector of `m` and the top singular value.
fn top_right_singular(m: &DMatrix<f64>) -> Result<(DVector<f64>, f64)> {
    let scale = m.amax();
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Decomposition("matrix is zero or not finite".into()));
    }
    let a = m / scale;
    let eig = (a.transpose() * &a).symmetric_eigen();
    let (imax, top) = eig.eigenvalues.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, &s)| if s > acc.1 { (i, s) } else { acc });
    Ok((eig.eigenvectors.column(imax).into_owned(), top.max(0.0).sqrt() * scale))
}

pub(crate) fn top_singular_value(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 1 && m.ncols() == 1 {
        return m[(0, 0)].abs();
    }
    // Polish the eigenvalue estimate with the exact norm of m y.
    match top_right_singular(m) {
        Ok((y, _)) => (m * y).norm(),
        Err(_) => 0.0,
    }
}

/// Index subsets of `{0..d}` of size `k` in lexicographic order.
fn subsets(d: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, d: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..d {
            cur.push(i);
            rec(i + 1, d, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, d, k, &mut Vec::new(), &mut out);
    out
}

/// The k-th compound matrix: minors indexed by ordered k-subsets. In the
/// basis `e_I` of the k-th exterior power this is the matrix of `∧^k g`.
pub fn compound(m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let d = m.nrows();
    let sets = subsets(d, k);
    let n = sets.len();
    DMatrix::from_fn(n, n, |a, b| {
        let rows = &sets[a];
        let cols = &sets[b];
        DMatrix::from_fn(k, k, |i, j| m[(rows[i], cols[j])]).determinant()
    })
}

/// `‖∧^i g‖`, equal to `kappa_1 ... kappa_i`.
pub fn wedge_norm(g: &GroupElement, i: usize) -> Result<f64> {
    let d = g.dim();
    if i == 0 || i > d {
        return Err(Error::Dimension(format!("wedge index {i} outside 1..={d}")));
    }
    if i == d {
        return Ok(1.0);
    }
    if d <= 4 {
        Ok(top_singular_value(&compound(g.matrix(), i)))
    } else {
        Ok(g.try_cartan()?.kappa[..i].iter().product())
    }
}

fn canonical(mut v: DVector<f64>) -> Result<DVector<f64>> {
    let n = v.norm();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::Dimension("zero or non-finite vector has no direction".into()));
    }
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
    Ok(v)
}

/// A line in R^d represented by a unit vector whose largest coordinate (in
/// absolute value) is positive.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectivePoint {
    rep: DVector<f64>,
}

impl ProjectivePoint {
    pub fn from_vector(v: DVector<f64>) -> Result<Self> {
        Ok(ProjectivePoint { rep: canonical(v)? })
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        Self::from_vector(DVector::from_row_slice(v))
    }

    /// The basis line `R e_i`.
    pub fn basis(d: usize, i: usize) -> Self {
        let mut v = DVector::zeros(d);
        v[i] = 1.0;
        ProjectivePoint { rep: v }
    }

    pub fn from_angle(theta: f64) -> Self {
        Self::from_slice(&[theta.cos(), theta.sin()]).expect("unit vector")
    }

    pub fn rep(&self) -> &DVector<f64> {
        &self.rep
    }

    pub fn dim(&self) -> usize {
        self.rep.len()
    }

    /// Angle in `[0, pi)` of a point of P(R^2).
    pub fn angle(&self) -> f64 {
        let a = self.rep[1].atan2(self.rep[0]);
        a.rem_euclid(std::f64::consts::PI)
    }

    pub fn as_dual(&self) -> DualProjectivePoint {
        DualProjectivePoint { rep: self.rep.clone() }
    }
}

/// A line in the dual space, represented by a unit covector in the
/// standard dual basis, with the same sign convention.
#[derive(Clone, Debug, PartialEq)]
pub struct DualProjectivePoint {
    rep: DVector<f64>,
}

impl DualProjectivePoint {
    pub fn from_vector(v: DVector<f64>) -> Result<Self> {
        Ok(DualProjectivePoint { rep: canonical(v)? })
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        Self::from_vector(DVector::from_row_slice(v))
    }

    pub fn basis(d: usize, i: usize) -> Self {
        let mut v = DVector::zeros(d);
        v[i] = 1.0;
        DualProjectivePoint { rep: v }
    }

    pub fn rep(&self) -> &DVector<f64> {
        &self.rep
    }

    pub fn dim(&self) -> usize {
        self.rep.len()
    }

    /// The line of R^d identified with this covector by the standard scalar
    /// product.
    pub fn as_point(&self) -> ProjectivePoint {
        ProjectivePoint { rep: self.rep.clone() }
    }
}

/// `‖x ∧ y‖` for unit vectors, computed from the 2x2 minors.
pub fn wedge2(x: &[f64], y: &[f64]) -> f64 {
    let d = x.len();
    let mut s = 0.0;
    for i in 0..d {
        for j in (i + 1)..d {
            let m = x[i] * y[j] - x[j] * y[i];
            s += m * m;
        }
    }
    s.sqrt()
}

pub fn proj_distance(x: &ProjectivePoint, y: &ProjectivePoint) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(Error::Dimension(format!("{} vs {}", x.dim(), y.dim())));
    }
    Ok(wedge2(x.rep.as_slice(), y.rep.as_slice()).min(1.0))
}

pub fn dual_pairing(x: &ProjectivePoint, y: &DualProjectivePoint) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(Error::Dimension(format!("{} vs {}", x.dim(), y.dim())));
    }
    Ok(x.rep.dot(&y.rep).abs().min(1.0))
}

/// The norm cocycle `ln(‖gx‖/‖x‖)`.
pub fn sigma(g: &GroupElement, x: &ProjectivePoint) -> f64 {
    g.apply_vec(x.rep()).norm().ln()
}

/// Cocycle on a plain unit vector; also returns the normalized image.
#[inline]
pub fn sigma_slice(g: &GroupElement, x: &[f64], image: &mut [f64]) -> f64 {
    g.apply_slice(x, image);
    let n = image.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in image.iter_mut() {
        *v /= n;
    }
    n.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn golden() -> GroupElement {
        GroupElement::from_rows(&[vec![2.0, 1.0], vec![1.0, 1.0]]).unwrap()
    }

    #[test]
    fn identity_is_degenerate() {
        let c = cartan_decompose(&GroupElement::identity(2)).unwrap();
        assert_eq!(c.kappa, vec![1.0, 1.0]);
        assert_eq!(c.kappa_gap, 1.0);
        assert!(c.degenerate);
    }

    #[test]
    fn diagonal_cartan() {
        let c = cartan_decompose(&GroupElement::diag(&[2.0, 0.5]).unwrap()).unwrap();
        assert_relative_eq!(c.kappa[0], 2.0, max_relative = 1e-14);
        assert_relative_eq!(c.kappa[1], 0.5, max_relative = 1e-14);
        assert_relative_eq!(c.kappa_gap, 0.25, max_relative = 1e-14);
        assert_eq!(c.x_m, ProjectivePoint::basis(2, 0));
        assert_eq!(c.y_m, DualProjectivePoint::basis(2, 0));
    }

    #[test]
    fn golden_singular_values() {
        // Singular values are square roots of the eigenvalues (7 ± 3√5)/2 of
        // g^T g, i.e. (3 ± √5)/2 for this symmetric matrix.
        let c = golden().cartan().clone();
        let s5 = 5f64.sqrt();
        assert_relative_eq!(c.kappa[0], (3.0 + s5) / 2.0, max_relative = 1e-10);
        assert_relative_eq!(c.kappa[1], (3.0 - s5) / 2.0, max_relative = 1e-10);
        assert_relative_eq!(wedge_norm(&golden(), 1).unwrap(), (3.0 + s5) / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn distance_and_pairing_examples() {
        let e1 = ProjectivePoint::basis(2, 0);
        let e2 = ProjectivePoint::basis(2, 1);
        let diag = ProjectivePoint::from_slice(&[1.0, 1.0]).unwrap();
        assert_eq!(proj_distance(&e1, &e1).unwrap(), 0.0);
        assert_relative_eq!(proj_distance(&e1, &e2).unwrap(), 1.0);
        assert_relative_eq!(proj_distance(&e1, &diag).unwrap(), 0.5f64.sqrt(), max_relative = 1e-15);
        let f1 = DualProjectivePoint::basis(2, 0);
        let f2 = DualProjectivePoint::basis(2, 1);
        assert_eq!(dual_pairing(&e1, &f1).unwrap(), 1.0);
        assert_eq!(dual_pairing(&e1, &f2).unwrap(), 0.0);
        assert_relative_eq!(dual_pairing(&diag, &f1).unwrap(), 0.5f64.sqrt(), max_relative = 1e-15);
        assert!(proj_distance(&e1, &ProjectivePoint::basis(3, 0)).is_err());
    }

    #[test]
    fn sigma_examples() {
        let e1 = ProjectivePoint::basis(2, 0);
        assert_eq!(sigma(&GroupElement::identity(2), &e1), 0.0);
        assert_relative_eq!(sigma(&GroupElement::diag(&[2.0, 0.5]).unwrap(), &e1), 2f64.ln(), max_relative = 1e-15);
        assert_relative_eq!(sigma(&golden(), &e1), 5f64.sqrt().ln(), max_relative = 1e-15);
    }

    #[test]
    fn wedge_examples() {
        let g = GroupElement::diag(&[3.0, 1.0, 1.0 / 3.0]).unwrap();
        assert_relative_eq!(wedge_norm(&g, 2).unwrap(), 3.0, max_relative = 1e-14);
        assert_eq!(wedge_norm(&g, 3).unwrap(), 1.0);
        assert!(wedge_norm(&g, 0).is_err());
        assert!(wedge_norm(&g, 4).is_err());
    }

    #[test]
    fn determinant_handling() {
        let g = GroupElement::from_rows(&[vec![2.0 * 1.00001, 0.0], vec![0.0, 0.5]]).unwrap();
        assert_relative_eq!(g.matrix().determinant(), 1.0, max_relative = 1e-12);
        assert!(matches!(
            GroupElement::from_rows(&[vec![2.0, 0.0], vec![0.0, 1.0]]),
            Err(Error::NotUnimodular { .. })
        ));
        assert!(GroupElement::from_rows(&[vec![-1.0, 0.0], vec![0.0, 1.0]]).is_err());
    }

    #[test]
    fn canonical_sign_uses_largest_coordinate() {
        let p = ProjectivePoint::from_slice(&[0.1, -2.0]).unwrap();
        assert!(p.rep()[1] > 0.0 && p.rep()[0] < 0.0);
    }

    #[test]
    fn compound_of_diagonal() {
        let m = DMatrix::from_diagonal(&DVector::from_row_slice(&[2.0, 3.0, 5.0]));
        let c = compound(&m, 2);
        assert_eq!(c.nrows(), 3);
        assert_relative_eq!(c[(0, 0)], 6.0);
        assert_relative_eq!(c[(1, 1)], 10.0);
        assert_relative_eq!(c[(2, 2)], 15.0);
    }
}
