//! Property tests for the structural invariants of the public types.

use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use renewal_lab::matrix::{dual_pairing, proj_distance, sigma, wedge_norm, DualProjectivePoint, GroupElement, ProjectivePoint};
use renewal_lab::measure::{cone2, lazy_measure, GeneratorMeasure};
use renewal_lab::proximality::admissible::{log_singular_values, RandomCartan};
use renewal_lab::proximality::auto_certify;
use renewal_lab::renewal::{omega, psi, Site};
use renewal_lab::transfer::{build_operator, holder_seminorm, random_probe, t_norm, GridFunction, HolderNorm, StateGrid};
use renewal_lab::walk::{stationary_measure_estimate, DEFAULT_RESOLUTION};

fn element(seed: u64, d: usize, log_gap: f64, spread: f64) -> GroupElement {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    RandomCartan::sample(&mut rng, &log_singular_values(d, log_gap, spread)).unwrap().g
}

fn point(v: &[f64]) -> Option<ProjectivePoint> {
    ProjectivePoint::from_slice(v).ok()
}

fn vec3() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn cartan_data_is_consistent(seed in any::<u64>(), d in 2usize..5, log_gap in -8.0f64..0.0, spread in 0.0f64..1.5) {
        let g = element(seed, d, log_gap, spread);
        let c = g.cartan();
        prop_assert!(g.norm() >= 1.0 - 1e-12);
        prop_assert!((c.kappa[0] / g.norm() - 1.0).abs() < 1e-10);
        prop_assert!(c.kappa.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!((c.kappa.iter().map(|k| k.ln()).sum::<f64>()).abs() < 1e-8);
        prop_assert!(c.kappa_gap > 0.0 && c.kappa_gap <= 1.0);
        prop_assert!((c.kappa_gap - log_gap.exp()).abs() <= 1e-8 * log_gap.exp().max(1e-3));
        prop_assert!((wedge_norm(&g, d).unwrap() - 1.0).abs() < 1e-8);
        prop_assert!((c.x_m.rep().norm() - 1.0).abs() < 1e-12);
        // g maps the top right singular direction to kappa_1 x_M.
        let image = g.apply_vec(c.y_m.rep());
        prop_assert!((image.norm() / c.kappa[0] - 1.0).abs() < 1e-9);
        prop_assert!(proj_distance(&ProjectivePoint::from_vector(image).unwrap(), &c.x_m).unwrap() < 1e-9);
    }

    #[test]
    fn cocycle_identity(s1 in any::<u64>(), s2 in any::<u64>(), v in vec3(), g1 in -6.0f64..0.0, g2 in -6.0f64..0.0) {
        let Some(x) = point(&v) else { return Ok(()) };
        let a = element(s1, 3, g1, 0.7);
        let b = element(s2, 3, g2, 0.3);
        let lhs = sigma(&b.mul(&a), &x);
        let rhs = sigma(&b, &a.act(&x)) + sigma(&a, &x);
        prop_assert!((lhs - rhs).abs() < 1e-9, "{lhs} vs {rhs}");
        // ln kappa_d ≤ σ ≤ ln kappa_1; |σ| ≤ ln|a| fails when kappa_1 = kappa_2.
        let kappa = a.cartan().kappa.clone();
        let s = sigma(&a, &x);
        prop_assert!(s <= kappa[0].ln() + 1e-12 && s >= kappa[2].ln() - 1e-12, "{s} outside {kappa:?}");
    }

    #[test]
    fn action_is_lipschitz(seed in any::<u64>(), u in vec3(), v in vec3(), log_gap in -6.0f64..0.0) {
        let (Some(x), Some(y)) = (point(&u), point(&v)) else { return Ok(()) };
        let g = element(seed, 3, log_gap, 0.5);
        let before = proj_distance(&x, &y).unwrap();
        let after = proj_distance(&g.act(&x), &g.act(&y)).unwrap();
        prop_assert!(after <= g.norm().powi(6) * before * (1.0 + 1e-9) + 1e-15);
    }

    #[test]
    fn distance_and_pairing_ranges(u in vec3(), v in vec3()) {
        let (Some(x), Some(y)) = (point(&u), point(&v)) else { return Ok(()) };
        let dxy = proj_distance(&x, &y).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&dxy));
        prop_assert!((dxy - proj_distance(&y, &x).unwrap()).abs() < 1e-15);
        prop_assert!(proj_distance(&x, &x).unwrap() < 1e-7);
        let phi = DualProjectivePoint::from_slice(&v).unwrap();
        let delta = dual_pairing(&x, &phi).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&delta));
        // δ² + d² = 1 when the covector is the transpose of the second point.
        prop_assert!((delta * delta + dxy * dxy - 1.0).abs() < 1e-12);
        // Sign of the representative does not matter.
        let neg: Vec<f64> = u.iter().map(|t| -t).collect();
        let flipped = point(&neg).unwrap();
        prop_assert_eq!(flipped.rep(), x.rep());
    }

    #[test]
    fn certificates_satisfy_eigen_equation(seed in any::<u64>(), d in 2usize..4, log_gap in -30.0f64..-10.0) {
        let g = element(seed, d, log_gap, 0.4);
        if let Some(c) = auto_certify(&g) {
            let v = c.v_plus.rep();
            let gv = g.apply_vec(v);
            let expected = v * (c.sign1 * c.lambda1.exp());
            prop_assert!((gv - expected).norm() <= 1e-9 * c.lambda1.exp());
            prop_assert!(c.d_vplus_xm <= c.bound_vplus_xm * (1.0 + 1e-7) + 1e-13);
            prop_assert!(c.d_vless_ym <= c.bound_vless_ym * (1.0 + 1e-7) + 1e-13);
            prop_assert!(c.restricted_norm <= c.bound_restricted_norm * (1.0 + 1e-7) + 1e-13);
        }
    }

    #[test]
    fn operator_rows(n in 2usize..40, t in -40.0f64..40.0, re in -0.15f64..0.15) {
        let grid = Arc::new(StateGrid::circle(4 * n + 2, 1).unwrap());
        let rho = cone2();
        let p0 = build_operator(&rho, Complex64::new(0.0, 0.0), &grid).unwrap();
        for (s, r) in p0.row_sums().iter().enumerate() {
            prop_assert!((r.re - 1.0).abs() < 1e-10 && r.im == 0.0, "row {s}");
            prop_assert!(p0.row(s).all(|(_, v)| v.re >= 0.0));
        }
        let pit = build_operator(&rho, Complex64::new(0.0, t), &grid).unwrap();
        prop_assert!(pit.sup_operator_norm() <= 1.0 + 1e-12);
        // Lazy identity entry by entry.
        let z = Complex64::new(re, t);
        let p = build_operator(&rho, z, &grid).unwrap().to_dense();
        let pe = build_operator(&lazy_measure(&rho), z, &grid).unwrap().to_dense();
        for i in 0..grid.len() {
            for j in 0..grid.len() {
                let id = if i == j { 1.0 } else { 0.0 };
                prop_assert!(((id - pe[(i, j)]) - 0.5 * (id - p[(i, j)])).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn holder_seminorm_shape(seed in any::<u64>(), c_re in -5.0f64..5.0, c_im in -5.0f64..5.0, scale in -3.0f64..3.0, gamma in 0.05f64..1.0) {
        let grid = StateGrid::circle(62, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_probe(&grid, gamma, &mut rng);
        let m = holder_seminorm(&grid, &f, false).unwrap();
        let shifted = f.add(&GridFunction::new(vec![Complex64::new(c_re, c_im); grid.len()], gamma));
        prop_assert!((holder_seminorm(&grid, &shifted, false).unwrap() - m).abs() <= 1e-9 * m.max(1.0));
        let scaled = f.scale(Complex64::new(scale, 0.0));
        prop_assert!((holder_seminorm(&grid, &scaled, false).unwrap() - scale.abs() * m).abs() <= 1e-9 * m.max(1.0));
        let norm = HolderNorm::new(&grid, gamma, false).unwrap();
        prop_assert!((norm.norm(&f.values) - f.sup_norm() - m).abs() <= 1e-9 * m.max(1.0));
    }

    #[test]
    fn t_norm_sandwich(seed in any::<u64>(), t in 2.0f64..200.0, c2 in 1.0f64..10.0) {
        let grid = StateGrid::circle(126, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_probe(&grid, 0.5, &mut rng);
        let m = holder_seminorm(&grid, &f, false).unwrap();
        let tn = t_norm(&f, m, t, c2).unwrap();
        let full = f.sup_norm() + m;
        prop_assert!(tn <= full * (1.0 + 1e-12));
        prop_assert!(full <= (1.0 + 2.0 * c2 * t) * tn * (1.0 + 1e-12));
    }

    #[test]
    fn omega_and_psi(x in 0.0f64..6.3, y in 0.0f64..6.3, t in -30.0f64..30.0, u in -30.0f64..30.0) {
        let (px, py) = ([x.cos(), x.sin()], [y.cos(), y.sin()]);
        let w = omega(Site::new(&px, 0, t), Site::new(&py, 0, u));
        prop_assert!((w - omega(Site::new(&py, 0, u), Site::new(&px, 0, t))).abs() < 1e-15);
        prop_assert!((0.0..=1.0).contains(&w));
        prop_assert!(omega(Site::new(&px, 0, t), Site::new(&px, 0, t)) == 0.0);
        prop_assert_eq!(omega(Site::new(&px, 0, t), Site::new(&py, 1, u)), 1.0);
        prop_assert!((psi(t) + psi(-t) - 1.0).abs() < 1e-15);
        if t < u {
            prop_assert!(psi(t) >= psi(u));
        }
    }
}

#[test]
fn stationary_estimate_has_unit_mass_and_lives_in_the_cone() {
    let nu = stationary_measure_estimate(&cone2(), 200, 20_000, DEFAULT_RESOLUTION, 4).unwrap();
    assert!((nu.total_mass() - 1.0).abs() < 1e-12);
    for key in nu.bins().keys() {
        let c = nu.center(key);
        // Cone directions up to sign, within one cell.
        assert!(c[0] * c[1] >= -2.0 * nu.resolution(), "cell centered at {c:?}");
    }
}

#[test]
fn weights_are_validated() {
    let g = GroupElement::diag(&[2.0, 0.5]).unwrap();
    assert!(GeneratorMeasure::new(vec![(g.clone(), 0.5), (g.clone(), 0.4)]).is_err());
    assert!(GeneratorMeasure::new(vec![(g, 1.0)]).is_ok());
}
