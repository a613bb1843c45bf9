//! Certified quantitative proximality bounds.
//!
//! Each operation checks the explicit hypotheses, computes the eigen-data of
//! the matrices involved by an iteration that is independent of the SVD, and
//! verifies the claimed inequalities against that data. Violations beyond a
//! small floating point slack are reported as errors rather than assumed away.

pub mod admissible;

use nalgebra::{DMatrix, DVector};

use crate::eigen::top_eigen;
use crate::error::{Error, Result};
use crate::matrix::{dual_pairing, proj_distance, sigma, top_singular_value, DualProjectivePoint, GroupElement, ProjectivePoint};

/// Relative slack when comparing a recomputed quantity with its bound.
pub const REL_SLACK: f64 = 1e-7;
/// Absolute slack for quantities that are themselves at rounding level.
pub const ABS_SLACK: f64 = 1e-13;

/// The constants that the lemmas only assert to exist.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LemmaConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl Default for LemmaConstants {
    fn default() -> Self {
        LemmaConstants { c1: 1.0 / 64.0, c2: 1024.0, c3: 1024.0 }
    }
}

#[derive(Clone, Debug)]
pub struct ProximalCertificate {
    pub lambda1: f64,
    pub sign1: f64,
    pub v_plus: ProjectivePoint,
    /// Covector whose kernel is the invariant complement of `v_plus`.
    pub v_less: DualProjectivePoint,
    pub epsilon: f64,
    pub bound_vplus_xm: f64,
    pub bound_vless_ym: f64,
    pub bound_restricted_norm: f64,
    /// Measured counterparts of the three bounds above.
    pub d_vplus_xm: f64,
    pub d_vless_ym: f64,
    pub restricted_norm: f64,
}

pub(crate) fn check_bound(name: &str, lhs: f64, rhs: f64) -> Result<()> {
    if lhs.is_nan() || lhs > rhs * (1.0 + REL_SLACK) + ABS_SLACK {
        return Err(Error::BoundViolation { name: name.to_string(), lhs, rhs });
    }
    Ok(())
}

fn need(cond: bool, what: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::precondition(what()))
    }
}

fn check_epsilon(epsilon: f64, upper: f64) -> Result<()> {
    need(epsilon > 0.0 && epsilon <= upper, || format!("epsilon = {epsilon} outside (0, {upper}]"))
}

fn non_degenerate(g: &GroupElement, label: &str) -> Result<()> {
    need(!g.try_cartan()?.degenerate, || format!("{label}: degenerate Cartan data (kappa_1 = kappa_2)"))
}

fn transversal(x: &ProjectivePoint, y: &DualProjectivePoint, two_eps: f64, what: &str) -> Result<()> {
    let v = dual_pairing(x, y)?;
    need(v >= two_eps, || format!("{what} = {v:e} < {two_eps:e}"))
}

/// Orthonormal basis of the kernel of a unit covector, as columns.
fn kernel_basis(phi: &DVector<f64>) -> DMatrix<f64> {
    let d = phi.len();
    let mut skip = 0;
    for i in 1..d {
        if phi[i].abs() > phi[skip].abs() {
            skip = i;
        }
    }
    let mut basis: Vec<DVector<f64>> = vec![phi.clone()];
    for i in (0..d).filter(|&i| i != skip) {
        let mut v = DVector::zeros(d);
        v[i] = 1.0;
        for _ in 0..2 {
            for b in &basis {
                let c = v.dot(b);
                v -= b * c;
            }
        }
        let n = v.norm();
        basis.push(v / n);
    }
    DMatrix::from_columns(&basis[1..])
}

/// `‖g|_H‖` for the hyperplane `H = ker phi`.
fn restricted_norm(g: &GroupElement, phi: &DualProjectivePoint) -> f64 {
    let b = kernel_basis(phi.rep());
    top_singular_value(&(g.matrix() * b))
}

/// Unchecked eigen-data: `(lambda1, sign, V+, V<)`.
pub fn eigen_data(g: &GroupElement) -> Result<(f64, f64, ProjectivePoint, DualProjectivePoint)> {
    let right = top_eigen(g.matrix())?;
    let left = top_eigen(&g.matrix().transpose())?;
    let v_plus = ProjectivePoint::from_vector(right.vector)?;
    let v_less = DualProjectivePoint::from_vector(left.vector)?;
    Ok((right.log_modulus, right.sign, v_plus, v_less))
}

/// Certified proximality of `g` at scale `epsilon`.
pub fn certify_proximal(g: &GroupElement, epsilon: f64) -> Result<ProximalCertificate> {
    check_epsilon(epsilon, 0.25)?;
    non_degenerate(g, "g")?;
    let c = g.try_cartan()?;
    let k = c.kappa_gap;
    need(k <= epsilon.powi(3), || format!("kappa_12(g) = {k:e} > epsilon^3 = {:e}", epsilon.powi(3)))?;
    transversal(&c.x_m, &c.y_m, 2.0 * epsilon, "delta(X_g^M, Y_g^m)")?;

    let (lambda1, sign1, v_plus, v_less) = eigen_data(g)?;
    let bound_vplus_xm = k / epsilon;
    let bound_vless_ym = k / epsilon;
    let bound_restricted_norm = 2.0 * c.kappa[1] / epsilon;
    let d_vplus_xm = proj_distance(&v_plus, &c.x_m)?;
    let d_vless_ym = proj_distance(&v_less.as_point(), &c.y_m.as_point())?;
    let rn = restricted_norm(g, &v_less);
    check_bound("d(V+, X^M)", d_vplus_xm, bound_vplus_xm)?;
    check_bound("d(V<, Y^m)", d_vless_ym, bound_vless_ym)?;
    check_bound("norm of g on V<", rn, bound_restricted_norm)?;
    // e^{lambda_1} |<X^M, v+>| = kappa_1 |<Y^m, v+>| exactly, so the angle
    // phi between V+ and X^M costs a tan(phi) in the lower bound.
    let sin_phi = bound_vplus_xm.min(0.5);
    let tan_phi = sin_phi / (1.0 - sin_phi * sin_phi).sqrt();
    let lower = c.kappa[0] * (dual_pairing(&c.x_m, &c.y_m)? - tan_phi);
    if lower > 0.0 {
        check_bound("kappa_1 (delta(X^M,Y^m) - tan phi) <= e^lambda1", lower.ln(), lambda1)?;
    }
    Ok(ProximalCertificate {
        lambda1,
        sign1,
        v_plus,
        v_less,
        epsilon,
        bound_vplus_xm,
        bound_vless_ym,
        bound_restricted_norm,
        d_vplus_xm,
        d_vless_ym,
        restricted_norm: rn,
    })
}

/// Largest `epsilon = 2^{-k}`, `k >= 2`, at which `g` certifies.
pub fn auto_certify(g: &GroupElement) -> Option<ProximalCertificate> {
    let c = g.try_cartan().ok()?;
    if c.degenerate {
        return None;
    }
    let delta = dual_pairing(&c.x_m, &c.y_m).ok()?;
    let mut eps = 0.25;
    for _ in 0..40 {
        if c.kappa_gap <= eps * eps * eps && delta >= 2.0 * eps {
            return certify_proximal(g, eps).ok();
        }
        eps *= 0.5;
    }
    None
}

#[derive(Clone, Debug)]
pub struct ProductBounds {
    pub kappa1_lower: f64,
    pub kappa_gap_upper: f64,
    pub d_xm_upper: f64,
    pub d_ym_upper: f64,
    /// The sharper lower bound `(p/2) eps^{p-1} prod kappa_1` that the
    /// argument actually yields; reported, not enforced.
    pub kappa1_lower_sharp: f64,
    pub kappa1: f64,
    pub kappa_gap: f64,
    pub d_xm: f64,
    pub d_ym: f64,
}

/// Bounds on the Cartan data of `gs[p-1] ... gs[0]`.
pub fn product_bounds(gs: &[GroupElement], epsilon: f64) -> Result<ProductBounds> {
    check_epsilon(epsilon, 0.25)?;
    let p = gs.len();
    need(p >= 2, || format!("need at least two factors, got {p}"))?;
    let e3 = epsilon.powi(3);
    for (i, g) in gs.iter().enumerate() {
        non_degenerate(g, &format!("g_{}", i + 1))?;
        let k = g.try_cartan()?.kappa_gap;
        need(k <= e3, || format!("kappa_12(g_{}) = {k:e} > epsilon^3", i + 1))?;
    }
    for i in 0..p - 1 {
        let a = gs[i].cartan();
        let b = gs[i + 1].cartan();
        transversal(&b.x_m, &a.y_m, 2.0 * epsilon, &format!("delta(X_{{g_{}}}^M, Y_{{g_{}}}^m)", i + 2, i + 1))?;
        transversal(&a.x_m, &b.y_m, 2.0 * epsilon, &format!("delta(X_{{g_{}}}^M, Y_{{g_{}}}^m)", i + 1, i + 2))?;
    }
    let mut prod = gs[0].clone();
    for g in &gs[1..] {
        prod = g.mul(&prod);
    }
    let pc = prod.try_cartan()?;
    let pf = (p - 1) as i32;
    let log_k1: f64 = gs.iter().map(|g| g.cartan().kappa[0].ln()).sum();
    let kappa1_lower = (pf as f64 * epsilon.ln() + log_k1).exp();
    let kappa1_lower_sharp = kappa1_lower * p as f64 / 2.0;
    let kappa_gap_upper = gs.iter().map(|g| g.cartan().kappa_gap).product::<f64>() / epsilon.powi(2 * pf);
    let d_xm_upper = gs[p - 1].cartan().kappa_gap / epsilon;
    let d_ym_upper = gs[0].cartan().kappa_gap / epsilon;
    let d_xm = proj_distance(&pc.x_m, &gs[p - 1].cartan().x_m)?;
    let d_ym = proj_distance(&pc.y_m.as_point(), &gs[0].cartan().y_m.as_point())?;
    // Compare kappa_1 in log scale to stay clear of overflow.
    check_bound("ln kappa_1 lower", pf as f64 * epsilon.ln() + log_k1, pc.kappa[0].ln() + 1e-12)?;
    check_bound("kappa_12 of product", pc.kappa_gap, kappa_gap_upper)?;
    check_bound("d(X^M_prod, X^M_{g_p})", d_xm, d_xm_upper)?;
    check_bound("d(Y^m_prod, Y^m_{g_1})", d_ym, d_ym_upper)?;
    Ok(ProductBounds {
        kappa1_lower,
        kappa_gap_upper,
        d_xm_upper,
        d_ym_upper,
        kappa1_lower_sharp,
        kappa1: pc.kappa[0],
        kappa_gap: pc.kappa_gap,
        d_xm,
        d_ym,
    })
}

#[derive(Clone, Debug)]
pub struct ContractionBounds {
    pub sigma_defect: f64,
    pub sigma_defect_bound: f64,
    pub pair_contraction: f64,
    pub pair_contraction_bound: f64,
}

/// Norm growth and pair contraction for `g` acting on two points far from
/// the repelling hyperplane.
pub fn contraction_bound(g: &GroupElement, epsilon: f64, x: &ProjectivePoint, y: &ProjectivePoint) -> Result<ContractionBounds> {
    check_epsilon(epsilon, 0.25)?;
    non_degenerate(g, "g")?;
    let c = g.try_cartan()?;
    let k = c.kappa_gap;
    need(k <= epsilon.powi(4), || format!("kappa_12(g) = {k:e} > epsilon^4 = {:e}", epsilon.powi(4)))?;
    transversal(&c.x_m, &c.y_m, 2.0 * epsilon, "delta(X_g^M, Y_g^m)")?;
    let cert = certify_proximal(g, epsilon)?;
    transversal(x, &cert.v_less, 2.0 * epsilon, "delta(X, V_g^<)")?;
    transversal(y, &cert.v_less, 2.0 * epsilon, "delta(Y, V_g^<)")?;
    let ratio = dual_pairing(x, &cert.v_less)? / dual_pairing(&cert.v_plus, &cert.v_less)?;
    let sigma_defect = (sigma(g, x) - cert.lambda1 - ratio.ln()).abs();
    let sigma_defect_bound = 2.0 * k / epsilon.powi(3);
    let pair_contraction = proj_distance(&g.act(x), &g.act(y))?;
    let pair_contraction_bound = k / (4.0 * epsilon.powi(4));
    check_bound("sigma defect", sigma_defect, sigma_defect_bound)?;
    check_bound("d(gX, gY)", pair_contraction, pair_contraction_bound)?;
    Ok(ContractionBounds { sigma_defect, sigma_defect_bound, pair_contraction, pair_contraction_bound })
}

#[derive(Clone, Debug)]
pub struct SpectralRadiusDefect {
    pub defect: f64,
    pub transversality_term: f64,
    pub bound: f64,
}

/// `lambda_1(g) + lambda_1(h) - lambda_1(gh)` against its cross-ratio
/// prediction.
pub fn spectral_radius_defect(g: &GroupElement, h: &GroupElement, epsilon: f64, consts: &LemmaConstants) -> Result<SpectralRadiusDefect> {
    check_epsilon(epsilon, consts.c1)?;
    non_degenerate(g, "g")?;
    non_degenerate(h, "h")?;
    let cg = g.try_cartan()?;
    let ch = h.try_cartan()?;
    let e4 = epsilon.powi(4);
    need(cg.kappa_gap <= e4, || format!("kappa_12(g) = {:e} > epsilon^4", cg.kappa_gap))?;
    need(ch.kappa_gap <= e4, || format!("kappa_12(h) = {:e} > epsilon^4", ch.kappa_gap))?;
    let te = 2.0 * epsilon;
    transversal(&cg.x_m, &cg.y_m, te, "delta(X_g^M, Y_g^m)")?;
    transversal(&ch.x_m, &ch.y_m, te, "delta(X_h^M, Y_h^m)")?;
    transversal(&cg.x_m, &ch.y_m, te, "delta(X_g^M, Y_h^m)")?;
    transversal(&ch.x_m, &cg.y_m, te, "delta(X_h^M, Y_g^m)")?;
    let a = certify_proximal(g, epsilon)?;
    let b = certify_proximal(h, epsilon)?;
    let gh = g.mul(h);
    let (lgh, _, _, _) = eigen_data(&gh).map_err(|e| Error::Eigen(format!("gh not proximal: {e}")))?;
    let defect = a.lambda1 + b.lambda1 - lgh;
    let num = dual_pairing(&b.v_plus, &b.v_less)? * dual_pairing(&a.v_plus, &a.v_less)?;
    let den = dual_pairing(&a.v_plus, &b.v_less)? * dual_pairing(&b.v_plus, &a.v_less)?;
    let transversality_term = (num / den).ln();
    let bound = consts.c2 * (cg.kappa_gap + ch.kappa_gap) / epsilon.powi(3);
    check_bound("spectral radius defect", (defect - transversality_term).abs(), bound)?;
    Ok(SpectralRadiusDefect { defect, transversality_term, bound })
}

#[derive(Clone, Debug)]
pub struct PowerNeighborhoodBounds {
    /// `delta(X_f^M, Y_f^m)`, required to be at least `epsilon`.
    pub transversality: f64,
    pub d_xm: f64,
    pub d_ym: f64,
    pub axis_bound: f64,
    pub kappa1: f64,
    pub kappa1_lower: f64,
    pub kappa_gap: f64,
    pub kappa_gap_upper: f64,
    pub d_vplus: f64,
    pub d_vless: f64,
    pub eigen_bound: f64,
}

/// Cartan and eigen-data of any `f` close to `g^p`.
pub fn power_neighborhood_bounds(g: &GroupElement, p: u32, epsilon: f64, f: &GroupElement, consts: &LemmaConstants) -> Result<PowerNeighborhoodBounds> {
    check_epsilon(epsilon, consts.c1)?;
    need(p >= 1, || "p must be at least 1".into())?;
    non_degenerate(g, "g")?;
    let cg = g.try_cartan()?;
    let k = cg.kappa_gap;
    need(k <= epsilon.powi(3), || format!("kappa_12(g) = {k:e} > epsilon^3"))?;
    transversal(&cg.x_m, &cg.y_m, 2.0 * epsilon, "delta(X_g^M, Y_g^m)")?;
    let gp = g.pow(p);
    let radius = epsilon * epsilon * (k / (epsilon * epsilon)).powi(p as i32);
    let dist = gp.distance(f);
    need(dist <= radius, || format!("‖g^p - f‖ = {dist:e} > {radius:e}"))?;

    let cf = f.try_cartan()?;
    let transversality = dual_pairing(&cf.x_m, &cf.y_m)?;
    check_bound("epsilon <= delta(X_f^M, Y_f^m)", epsilon, transversality)?;
    let axis_bound = 2.0 * k / epsilon;
    let d_xm = proj_distance(&cf.x_m, &cg.x_m)?;
    let d_ym = proj_distance(&cf.y_m.as_point(), &cg.y_m.as_point())?;
    check_bound("d(X_f^M, X_g^M)", d_xm, axis_bound)?;
    check_bound("d(Y_f^m, Y_g^m)", d_ym, axis_bound)?;
    let pm1 = (p - 1) as i32;
    let log_lower = (0.5f64).ln() + pm1 as f64 * epsilon.ln() + p as f64 * cg.kappa[0].ln();
    check_bound("ln kappa_1(f) lower", log_lower, cf.kappa[0].ln() + 1e-12)?;
    let kappa_gap_upper = 16.0 * k.powi(p as i32) / epsilon.powi(2 * pm1);
    check_bound("kappa_12(f)", cf.kappa_gap, kappa_gap_upper)?;
    let (_, _, vg_plus, vg_less) = eigen_data(g)?;
    let (_, _, vf_plus, vf_less) = eigen_data(f)?;
    let eigen_bound = consts.c2 * k.powi(p as i32) / epsilon.powi(2 * p as i32 - 1);
    let d_vplus = proj_distance(&vf_plus, &vg_plus)?;
    let d_vless = proj_distance(&vf_less.as_point(), &vg_less.as_point())?;
    check_bound("d(V_f^+, V_g^+)", d_vplus, eigen_bound)?;
    check_bound("d(V_f^<, V_g^<)", d_vless, eigen_bound)?;
    Ok(PowerNeighborhoodBounds {
        transversality,
        d_xm,
        d_ym,
        axis_bound,
        kappa1: cf.kappa[0],
        kappa1_lower: log_lower.exp(),
        kappa_gap: cf.kappa_gap,
        kappa_gap_upper,
        d_vplus,
        d_vless,
        eigen_bound,
    })
}

/// Bounds on `ln |φ_g^<(v_g^+) φ_h^<(g v_h^+) / (φ_h^<(v_g^+) φ_g^<(g v_h^+))|`.
#[derive(Clone, Debug)]
pub struct CrossRatioBounds {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug)]
pub struct FghDefect {
    /// `lambda_1(fgh) - lambda_1(f) - lambda_1(gh)`.
    pub defect: f64,
    pub log_cross_ratio: f64,
    /// `|defect + log_cross_ratio|`, the verified quantity.
    pub error: f64,
    /// `|defect - log_cross_ratio|`, the literal form of the estimate.
    pub error_literal: f64,
    pub bound: f64,
    /// Present when the second set of hypotheses holds and the two-sided
    /// cross-ratio bounds were verified.
    pub cross_ratio_bounds: Option<CrossRatioBounds>,
    /// Which second-part hypothesis failed, if any.
    pub second_part_skipped: Option<String>,
}

/// Projection onto `ker phi_g^<` parallel to `v_g^+`.
pub fn pi_g(v_plus: &ProjectivePoint, v_less: &DualProjectivePoint, x: &DVector<f64>) -> DVector<f64> {
    let v = v_plus.rep();
    let phi = v_less.rep();
    x - v * (phi.dot(x) / phi.dot(v))
}

/// Spectral radius of `fgh` when `f` is close to a power of `g`.
pub fn fgh_defect(f: &GroupElement, g: &GroupElement, h: &GroupElement, p: u32, epsilon: f64, consts: &LemmaConstants) -> Result<FghDefect> {
    check_epsilon(epsilon, consts.c1)?;
    need(p >= 1, || "p must be at least 1".into())?;
    non_degenerate(g, "g")?;
    non_degenerate(h, "h")?;
    let cg = g.try_cartan()?;
    let ch = h.try_cartan()?;
    let kg = cg.kappa_gap;
    let kh = ch.kappa_gap;
    need(kg <= epsilon.powi(5), || format!("kappa_12(g) = {kg:e} > epsilon^5"))?;
    need(kh <= epsilon.powi(3), || format!("kappa_12(h) = {kh:e} > epsilon^3"))?;
    let te = 2.0 * epsilon;
    transversal(&cg.x_m, &cg.y_m, te, "delta(X_g^M, Y_g^m)")?;
    transversal(&ch.x_m, &ch.y_m, te, "delta(X_h^M, Y_h^m)")?;
    transversal(&ch.x_m, &cg.y_m, te, "delta(X_h^M, Y_g^m)")?;
    transversal(&cg.x_m, &ch.y_m, te, "delta(X_g^M, Y_h^m)")?;
    let radius = epsilon * epsilon * (kg / epsilon).powi(p as i32);
    let dist = g.pow(p).distance(f);
    need(dist <= radius, || format!("‖g^p - f‖ = {dist:e} > {radius:e}"))?;

    let (_, _, vg_plus, vg_less) = eigen_data(g)?;
    let (_, _, vh_plus, vh_less) = eigen_data(h)?;
    let gvh = g.act(&vh_plus);
    let num = dual_pairing(&vg_plus, &vg_less)? * dual_pairing(&gvh, &vh_less)?;
    let den = dual_pairing(&vg_plus, &vh_less)? * dual_pairing(&gvh, &vg_less)?;
    let log_cross_ratio = (num / den).ln();

    let gh = g.mul(h);
    let fgh = f.mul(&gh);
    let (lf, _, _, _) = eigen_data(f)?;
    let (lgh, _, _, _) = eigen_data(&gh)?;
    let (lfgh, _, _, _) = eigen_data(&fgh)?;
    let defect = lfgh - lf - lgh;
    let bound = consts.c2 * (kg.powi(p as i32) / epsilon.powi(2 * p as i32) + kh / epsilon);
    let error = (defect + log_cross_ratio).abs();
    let error_literal = (defect - log_cross_ratio).abs();
    check_bound("fgh spectral radius defect", error, bound)?;

    let d = g.dim() as i32;
    let mut skipped = None;
    if proj_distance(&ch.x_m, &vg_plus)? <= 0.0 {
        skipped = Some("X_h^M = V_g^+".to_string());
    }
    if skipped.is_none() {
        let projected = pi_g(&vg_plus, &vg_less, ch.x_m.rep());
        match ProjectivePoint::from_vector(g.apply_vec(&projected)) {
            Ok(img) => {
                let v = dual_pairing(&img, &ch.y_m)?;
                if v < te {
                    skipped = Some(format!("delta(g pi_g X_h^M, Y_h^m) = {v:e} < 2 epsilon"));
                }
            }
            Err(_) => skipped = Some("pi_g X_h^M = 0".to_string()),
        }
    }
    if skipped.is_none() {
        let v = proj_distance(&cg.x_m, &ch.x_m)?;
        if v < te {
            skipped = Some(format!("d(X_g^M, X_h^M) = {v:e} < 2 epsilon"));
        }
    }
    if skipped.is_none() && kh * cg.kappa[0] > epsilon.powi(3) / 2.0 {
        skipped = Some(format!("kappa_12(h) kappa_1(g) = {:e} > epsilon^3 / 2", kh * cg.kappa[0]));
    }
    let cross_ratio_bounds = if skipped.is_none() {
        let lower = epsilon.powi(3) / (consts.c3 * cg.kappa[0].powi(d));
        let upper = consts.c3 * kg / epsilon.powi(5);
        let a = log_cross_ratio.abs();
        check_bound("|ln CR| lower", lower, a)?;
        check_bound("|ln CR| upper", a, upper)?;
        Some(CrossRatioBounds { lower, upper })
    } else {
        None
    };
    Ok(FghDefect {
        defect,
        log_cross_ratio,
        error,
        error_literal,
        bound,
        cross_ratio_bounds,
        second_part_skipped: skipped,
    })
}

/// Ratios of the recomputed quantities to their constant-free bounds; the
/// maxima over a sample are the smallest constants that sample supports.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Calibration {
    pub c2_spectral_radius: f64,
    pub c2_power_neighborhood: f64,
    pub c2_fgh: f64,
    pub c3_upper: f64,
    pub c3_lower: f64,
}

impl Calibration {
    pub fn c2(&self) -> f64 {
        self.c2_spectral_radius.max(self.c2_power_neighborhood).max(self.c2_fgh)
    }

    pub fn c3(&self) -> f64 {
        self.c3_upper.max(self.c3_lower)
    }

    pub fn absorb_spectral_radius(&mut self, r: &SpectralRadiusDefect, c2: f64) {
        let ratio = (r.defect - r.transversality_term).abs() / (r.bound / c2);
        self.c2_spectral_radius = self.c2_spectral_radius.max(ratio);
    }

    pub fn absorb_power_neighborhood(&mut self, r: &PowerNeighborhoodBounds, c2: f64) {
        let base = r.eigen_bound / c2;
        self.c2_power_neighborhood = self.c2_power_neighborhood.max(r.d_vplus.max(r.d_vless) / base);
    }

    pub fn absorb_fgh(&mut self, r: &FghDefect, consts: &LemmaConstants) {
        self.c2_fgh = self.c2_fgh.max(r.error / (r.bound / consts.c2));
        if let Some(b) = &r.cross_ratio_bounds {
            let a = r.log_cross_ratio.abs();
            self.c3_upper = self.c3_upper.max(a / (b.upper / consts.c3));
            self.c3_lower = self.c3_lower.max((b.lower * consts.c3) / a);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn diag2(a: f64) -> GroupElement {
        GroupElement::diag(&[a, 1.0 / a]).unwrap()
    }

    #[test]
    fn identity_rejected() {
        assert!(matches!(certify_proximal(&GroupElement::identity(2), 0.1), Err(Error::Precondition(_))));
    }

    #[test]
    fn diagonal_certificate() {
        let g = GroupElement::diag(&[64.0, 0.25, 1.0 / 16.0]).unwrap();
        let c = certify_proximal(&g, 0.2).unwrap();
        assert_relative_eq!(c.lambda1, 64f64.ln(), max_relative = 1e-14);
        assert_eq!(c.v_plus, ProjectivePoint::basis(3, 0));
        assert!(c.d_vplus_xm <= 1e-15);
    }

    #[test]
    fn small_gap_matrices_are_not_certifiable() {
        // kappa_12 = 1/8 needs epsilon >= 1/2.
        let g = GroupElement::diag(&[4.0, 0.5, 0.5]).unwrap();
        assert!(matches!(certify_proximal(&g, 0.2), Err(Error::Precondition(_))));
        assert!(matches!(certify_proximal(&g, 0.25), Err(Error::Precondition(_))));
    }

    #[test]
    fn golden_cube_certificate() {
        let g = GroupElement::from_rows(&[vec![2.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(auto_certify(&g).is_none());
        let c = certify_proximal(&g.pow(3), 0.25).unwrap();
        assert_relative_eq!(c.lambda1, 3.0 * ((3.0 + 5f64.sqrt()) / 2.0).ln(), max_relative = 1e-13);
    }

    #[test]
    fn commuting_product_bounds() {
        let g = diag2(64.0);
        let b = product_bounds(&[g.clone(), g.clone()], 0.2).unwrap();
        assert_relative_eq!(b.kappa1, 4096.0, max_relative = 1e-12);
        assert!(b.kappa1 >= b.kappa1_lower);
        assert!(b.kappa_gap <= b.kappa_gap_upper);
        // kappa_12 = 1/16 exceeds 0.2^3.
        assert!(matches!(product_bounds(&[diag2(4.0), diag2(4.0)], 0.2), Err(Error::Precondition(_))));
    }

    #[test]
    fn non_transversal_product_rejected() {
        let g = diag2(64.0);
        let swap = GroupElement::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap();
        // X^M of the second factor is e_2, orthogonal to Y^m of the first.
        let h = swap.mul(&g);
        assert!(matches!(product_bounds(&[g, h], 0.2), Err(Error::Precondition(_))));
    }

    #[test]
    fn contraction_examples() {
        // diag(8, 1/8) has kappa_12 = 1/64 > 0.1^4, outside the hypotheses.
        let e1 = ProjectivePoint::basis(2, 0);
        let y = ProjectivePoint::from_slice(&[1.0, 0.1]).unwrap();
        assert!(matches!(contraction_bound(&diag2(8.0), 0.1, &e1, &y), Err(Error::Precondition(_))));
        let g = diag2(128.0);
        let r = contraction_bound(&g, 0.1, &e1, &y).unwrap();
        assert!(r.sigma_defect <= r.sigma_defect_bound);
        assert!(r.pair_contraction <= r.pair_contraction_bound);
        let fixed = contraction_bound(&g, 0.1, &e1, &e1).unwrap();
        assert!(fixed.sigma_defect < 1e-14);
        let bad = ProjectivePoint::from_slice(&[0.1, 1.0]).unwrap();
        assert!(matches!(contraction_bound(&g, 0.1, &bad, &e1), Err(Error::Precondition(_))));
    }

    #[test]
    fn commuting_spectral_radius_defect() {
        let g = diag2(2f64.powi(14));
        let r = spectral_radius_defect(&g, &g, 1.0 / 64.0, &LemmaConstants::default()).unwrap();
        assert!(r.defect.abs() < 1e-12);
        assert_eq!(r.transversality_term, 0.0);
        let swap = GroupElement::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap();
        let h = swap.mul(&g).mul(&swap.inverse());
        assert!(matches!(spectral_radius_defect(&g, &h, 1.0 / 64.0, &LemmaConstants::default()), Err(Error::Precondition(_))));
    }

    #[test]
    fn exact_power_neighborhood() {
        let g = diag2(1024.0);
        let f = g.pow(2);
        let r = power_neighborhood_bounds(&g, 2, 1.0 / 64.0, &f, &LemmaConstants::default()).unwrap();
        assert!(r.d_vplus < 1e-15);
        let far = GroupElement::from_rows(&[vec![1024.0 * 1024.0, 1.0], vec![0.0, 1.0 / (1024.0 * 1024.0)]]).unwrap();
        assert!(matches!(
            power_neighborhood_bounds(&g, 2, 1.0 / 64.0, &far, &LemmaConstants::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn commuting_fgh_rejected() {
        let g = diag2(2f64.powi(20));
        let h = diag2(2f64.powi(12));
        let consts = LemmaConstants { c1: 0.06, ..Default::default() };
        // X_g^M = X_h^M, so the second part is skipped; the first part holds.
        let r = fgh_defect(&g.pow(2), &g, &h, 2, 0.05, &consts).unwrap();
        assert!(r.second_part_skipped.is_some());
        assert!(r.error < 1e-9);
    }

    #[test]
    fn projection_kills_top_vector() {
        let v = ProjectivePoint::from_slice(&[1.0, 0.2]).unwrap();
        let phi = DualProjectivePoint::from_slice(&[0.3, 1.0]).unwrap();
        let p = pi_g(&v, &phi, v.rep());
        assert!(p.norm() < 1e-15);
        let x = DVector::from_row_slice(&[0.7, -0.1]);
        assert!(phi.rep().dot(&pi_g(&v, &phi, &x)).abs() < 1e-15);
    }
}
