use std::path::PathBuf;

use proptest::option;
use proptest::prelude::*;
use renewal_lab_cli::config::{AtomSpec, MeasureSpec, Params, MAX_SEED};
use renewal_lab_cli::{Experiment, ExperimentConfig};

fn positive() -> impl Strategy<Value = f64> {
    prop_oneof![1e-12f64..1e-3, 1e-3f64..1e3, Just(0.25)]
}

fn real() -> impl Strategy<Value = f64> {
    prop_oneof![-1e6f64..1e6, Just(0.0), Just(-0.5), any::<i32>().prop_map(f64::from)]
}

fn reals() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(real(), 0..6)
}

fn params() -> impl Strategy<Value = Params> {
    let a = (option::of(positive()), option::of(0usize..5000), option::of(0usize..5000), option::of(0usize..1_000_000), option::of(positive()), option::of(reals()), option::of(reals()));
    let b = (option::of(real()), option::of(1usize..100), option::of(positive()), option::of(0usize..8), option::of(real()), option::of(positive()), option::of(positive()));
    let c = (option::of(positive()), option::of(positive()), option::of(positive()), option::of(-3i32..10), option::of(real()), option::of(0usize..12), option::of(real()));
    (a, b, c).prop_map(|((gamma, grid, steps, walks, resolution, t_values, radii), (alpha, b_points, beta, power, alpha1, tolerance, quad_tol), (cutoff, resolvent_c, bump_radius, bump_edge, bump_origin, k, t3))| Params {
        gamma,
        grid,
        steps,
        walks,
        resolution,
        t_values,
        radii,
        alpha,
        b_points,
        beta,
        power,
        alpha1,
        tolerance,
        quad_tol,
        cutoff,
        resolvent_c,
        bump_radius,
        bump_edge,
        bump_origin,
        k,
        t3,
        ..Default::default()
    })
}

fn measure() -> impl Strategy<Value = MeasureSpec> {
    let atom = (prop::collection::vec(prop::collection::vec(real(), 2), 2), positive(), option::of(Just(vec![1usize, 0]))).prop_map(|(matrix, weight, perm)| AtomSpec { matrix, weight, perm });
    prop_oneof![
        Just(MeasureSpec::default()),
        prop::sample::select(vec!["cone2", "hyperbolic-rotate", "diag-lattice"]).prop_map(|n| MeasureSpec { builtin: Some(n.to_string()), atoms: vec![] }),
        prop::collection::vec(atom, 1..4).prop_map(|atoms| MeasureSpec { builtin: None, atoms }),
    ]
}

fn config() -> impl Strategy<Value = ExperimentConfig> {
    (option::of(prop::sample::select(Experiment::ALL.to_vec())), option::of(0..=MAX_SEED), option::of("[a-z][a-z0-9_/-]{0,20}"), measure(), params()).prop_map(|(exp, seed, out, measure, params)| ExperimentConfig {
        experiment: exp.map(|e| e.name().to_string()),
        seed,
        out: out.map(PathBuf::from),
        measure,
        params,
    })
}

proptest! {
    #[test]
    fn serialization_round_trips(cfg in config()) {
        let text = cfg.to_toml();
        let back = ExperimentConfig::parse(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
    }

    #[test]
    fn normalization_is_idempotent(cfg in config()) {
        let once = ExperimentConfig::normalize(&cfg.to_toml()).unwrap();
        let twice = ExperimentConfig::normalize(&once).unwrap();
        prop_assert_eq!(once, twice);
    }
}
