use opfix_core::bounds::{eta, eta_with_argmax, knorm_zeta_beta, sanov_delta};
use opfix_core::engine::{run, Correlation, IterationConfig, UpdateModel};
use opfix_core::operators::{set_distance, BlockPartition, BoxSet, OnlineOperatorSpec, OperatorSpec, SetDistanceMode};
use opfix_core::subweibull::{hp_bound, NoiseFamily, NoiseSpec, Schedule};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn boxes(dim: usize) -> impl Strategy<Value = BoxSet> {
    prop::collection::vec((-10.0f64..10.0, 0.0f64..5.0), dim)
        .prop_map(|axes| {
            let lower: Vec<f64> = axes.iter().map(|(l, _)| *l).collect();
            let upper: Vec<f64> = axes.iter().map(|(l, w)| l + w).collect();
            BoxSet::new(lower, upper).unwrap()
        })
}

fn triple() -> impl Strategy<Value = (BoxSet, BoxSet, BoxSet)> {
    (1usize..4).prop_flat_map(|d| (boxes(d), boxes(d), boxes(d)))
}

/// `E[zeta^(k beta)]^(1/k)` summed over the binomial pmf directly.
fn knorm_oracle(zeta: f64, p: f64, ell: usize, k: f64) -> f64 {
    let mut ln_pmf = ell as f64 * (1.0 - p).ln();
    let mut total = 0.0;
    for j in 0..=ell {
        if j > 0 {
            ln_pmf += ((ell - j + 1) as f64).ln() - (j as f64).ln() + p.ln() - (1.0 - p).ln();
        }
        total += (ln_pmf + k * j as f64 * zeta.ln()).exp();
    }
    total.powf(1.0 / k)
}

proptest! {
    #[test]
    fn set_distance_is_symmetric((a, b, _c) in triple()) {
        for mode in [SetDistanceMode::Minimal, SetDistanceMode::Hausdorff] {
            let ab = set_distance(&a, &b, mode).unwrap();
            let ba = set_distance(&b, &a, mode).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!(ab >= 0.0);
        }
    }

    #[test]
    fn hausdorff_satisfies_triangle_inequality((a, b, c) in triple()) {
        let h = |x: &BoxSet, y: &BoxSet| set_distance(x, y, SetDistanceMode::Hausdorff).unwrap();
        prop_assert!(h(&a, &c) <= h(&a, &b) + h(&b, &c) + 1e-12);
    }

    #[test]
    fn minimal_never_exceeds_hausdorff((a, b, _c) in triple()) {
        let m = set_distance(&a, &b, SetDistanceMode::Minimal).unwrap();
        let h = set_distance(&a, &b, SetDistanceMode::Hausdorff).unwrap();
        prop_assert!(m <= h);
    }

    #[test]
    fn singletons_reduce_to_euclidean(x in prop::collection::vec(-5.0f64..5.0, 3), y in prop::collection::vec(-5.0f64..5.0, 3)) {
        let e = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let (bx, by) = (BoxSet::point(x).unwrap(), BoxSet::point(y).unwrap());
        for mode in [SetDistanceMode::Minimal, SetDistanceMode::Hausdorff] {
            prop_assert!((set_distance(&bx, &by, mode).unwrap() - e).abs() <= 1e-12 * (1.0 + e));
        }
    }

    #[test]
    fn knorm_matches_binomial_sum(zeta in 0.05f64..0.99, p in 0.01f64..0.99, ell in 0usize..80, k in 1.0f64..8.0) {
        let got = knorm_zeta_beta(zeta, p, ell, k);
        let want = knorm_oracle(zeta, p, ell, k);
        prop_assert!((got - want).abs() <= 1e-9 * want, "got {got}, want {want}");
    }

    #[test]
    fn eta_is_nonincreasing_and_bracketed(zeta in 0.1f64..0.99, p in 0.05f64..1.0, ell in 0usize..300) {
        let now = eta(zeta, p, ell);
        let next = eta(zeta, p, ell + 1);
        prop_assert!(next <= now * (1.0 + 1e-9));
        prop_assert!(now <= 1.0 + 1e-12);
        // k = 1 is a feasible order, so eta dominates the first moment
        let chi = 1.0 - p + p * zeta;
        prop_assert!(now >= chi.powf(ell as f64) * (1.0 - 1e-9));
        let (_, k) = eta_with_argmax(zeta, p, ell);
        prop_assert!(k >= 1.0);
    }

    #[test]
    fn sanov_delta_is_a_probability(p in 0.01f64..0.99, frac in 0.0f64..1.0, ell in 0usize..500) {
        let eps = p * frac;
        let d = sanov_delta(p, eps, ell).unwrap();
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert!(sanov_delta(p, eps, ell + 1).unwrap() <= d);
    }
}

/// Fraction of `num` sampled error norms above the declared tail level.
fn exceedance(spec: &NoiseSpec, delta: f64, num: usize, seed: u64) -> f64 {
    let level = hp_bound(spec.declared_at(0), delta).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf = vec![0.0; spec.dim()];
    let mut over = 0usize;
    for _ in 0..num {
        spec.sample_into(0, &mut rng, &mut buf);
        if buf.iter().map(|v| v * v).sum::<f64>().sqrt() > level {
            over += 1;
        }
    }
    over as f64 / num as f64
}

#[test]
fn declared_parameters_cover_tails_for_every_family() {
    let families = [
        NoiseFamily::Gaussian { std: 0.3 },
        NoiseFamily::Weibull { theta: 0.5, scale: 1.0 },
        NoiseFamily::Weibull { theta: 1.0, scale: 2.0 },
        NoiseFamily::Weibull { theta: 2.0, scale: 0.5 },
        NoiseFamily::BoundedUniform { half_width: 1.5 },
    ];
    let num = 200_000;
    // Hoeffding slack at confidence 1 - 1e-6 per check
    let slack = ((2.0f64 / 1e-6).ln() / (2.0 * num as f64)).sqrt();
    for (f, family) in families.into_iter().enumerate() {
        for dim in [1, 3] {
            let spec = NoiseSpec::new(family, Schedule::Constant, dim).unwrap();
            for delta in [0.5, 0.1, 0.01] {
                let frac = exceedance(&spec, delta, num, 100 + f as u64);
                assert!(frac <= delta + slack, "{family:?} d={dim} delta={delta}: {frac}");
            }
        }
    }
}

fn two_block_config(p: Vec<f64>, correlation: Correlation, horizon: usize) -> IterationConfig {
    let t = OperatorSpec::affine(
        BlockPartition::uniform(2, 1).unwrap(),
        vec![DMatrix::from_element(1, 1, 0.5), DMatrix::from_element(1, 1, 0.5)],
        vec![0.0, 0.0],
    )
    .unwrap();
    IterationConfig {
        operator: OnlineOperatorSpec::static_only(t),
        update: UpdateModel::new(p, correlation).unwrap(),
        noise: vec![NoiseSpec::new(NoiseFamily::Gaussian { std: 0.1 }, Schedule::Constant, 1).unwrap(); 2],
        horizon,
        initial_point: vec![1.0, 1.0],
        record_iterates: false,
    }
}

#[test]
fn mask_frequencies_and_update_counts() {
    let p = vec![0.3, 0.8];
    let horizon = 2_000;
    let cfg = two_block_config(p.clone(), Correlation::Independent, horizon);
    let traj = run(&cfg, 5).unwrap();
    let slack = ((2.0f64 / 1e-6).ln() / (2.0 * horizon as f64)).sqrt();
    for (i, pi) in p.iter().enumerate() {
        let mut count = 0u32;
        for ell in 0..horizon {
            assert_eq!(traj.beta(ell, i), count);
            count += u32::from(traj.mask(ell, i));
        }
        assert_eq!(traj.beta(horizon, i), count);
        let freq = f64::from(count) / horizon as f64;
        assert!((freq - pi).abs() <= slack, "block {i}: {freq} vs {pi}");
    }
}

#[test]
fn coupled_masks_are_nested() {
    let cfg = two_block_config(vec![0.3, 0.8], Correlation::Coupled, 1_000);
    let traj = run(&cfg, 9).unwrap();
    for ell in 0..1_000 {
        // one uniform draw per iteration: updating the p = 0.3 block implies updating the p = 0.8 block
        assert!(!traj.mask(ell, 0) || traj.mask(ell, 1));
    }
}

#[test]
fn runs_are_reproducible_per_seed() {
    let cfg = two_block_config(vec![0.5, 0.5], Correlation::Independent, 100);
    let a = run(&cfg, 17).unwrap();
    let b = run(&cfg, 17).unwrap();
    let c = run(&cfg, 18).unwrap();
    for ell in 0..=100 {
        assert_eq!(a.dist(ell, 0).to_bits(), b.dist(ell, 0).to_bits());
    }
    assert!((0..=100).any(|ell| a.dist(ell, 0) != c.dist(ell, 0)));
}
