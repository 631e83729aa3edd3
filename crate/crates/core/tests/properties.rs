//! Property tests for the distribution, divergence and occupancy invariants.

use pairlearn::data::{make_synthetic, neighbor, NeighborSpec, SyntheticKind};
use pairlearn::losses::{uniform_in_ball, PairwiseHinge, PairwiseLogistic, PairwiseLossModel, PairwiseSquared};
use pairlearn::rng::stream_rng;
use pairlearn::sampling::{
    flat_to_pair, kl_step, renyi6_step, sample_uniform_trajectory, occupancy, StepDistribution,
};
use proptest::prelude::*;

fn weights_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..10.0, n * (n - 1)).prop_filter("positive mass", |w| {
        w.iter().sum::<f64>() > 1e-6
    })
}

proptest! {
    #[test]
    fn step_distributions_are_normalized_off_diagonal(n in 2usize..7, weights in weights_strategy(6)) {
        let m = n * (n - 1);
        let dist = StepDistribution::from_weights(n, weights[..m].to_vec());
        prop_assume!(dist.is_ok());
        let dist = dist.unwrap();
        prop_assert!((dist.total_mass() - 1.0).abs() <= 1e-12);
        for i in 1..=n {
            prop_assert_eq!(dist.prob(i, i), 0.0);
        }
        for flat in 0..m {
            let p = flat_to_pair(flat, n);
            prop_assert!(dist.prob(p.i, p.j) >= 0.0);
        }
    }

    #[test]
    fn kl_nonnegative_and_zero_only_at_equality(n in 2usize..6, weights in weights_strategy(5)) {
        let m = n * (n - 1);
        let q = StepDistribution::from_weights(n, weights[..m].to_vec());
        prop_assume!(q.is_ok());
        let q = q.unwrap();
        let p = StepDistribution::uniform(n).unwrap();
        let kl = kl_step(&q, &p).unwrap();
        prop_assert!(kl >= 0.0);
        prop_assert_eq!(kl_step(&q, &q).unwrap(), 0.0);
        // distributions visibly different from uniform have positive KL
        let max_dev = (0..m)
            .map(|f| {
                let pair = flat_to_pair(f, n);
                (q.prob(pair.i, pair.j) - p.prob(pair.i, pair.j)).abs()
            })
            .fold(0.0f64, f64::max);
        if max_dev > 1e-6 {
            prop_assert!(kl > 0.0);
        }
    }

    #[test]
    fn renyi6_at_least_one_with_equality_at_p(n in 2usize..6, weights in weights_strategy(5)) {
        let m = n * (n - 1);
        let q = StepDistribution::from_weights(n, weights[..m].to_vec());
        prop_assume!(q.is_ok());
        let q = q.unwrap();
        let p = StepDistribution::uniform(n).unwrap();
        let r = renyi6_step(&q, &p).unwrap();
        prop_assert!(r >= 1.0 - 1e-15);
        prop_assert!((renyi6_step(&q, &q).unwrap() - 1.0).abs() <= 1e-12);
        let max_dev = (0..m)
            .map(|f| {
                let pair = flat_to_pair(f, n);
                (q.prob(pair.i, pair.j) - p.prob(pair.i, pair.j)).abs()
            })
            .fold(0.0f64, f64::max);
        if max_dev > 1e-4 {
            prop_assert!(r > 1.0);
        }
    }

    #[test]
    fn occupancies_sum_to_twice_steps(n in 2usize..9, t in 1usize..60, seed in 0u64..500) {
        let mut rng = stream_rng(seed, "prop-traj", 0);
        let traj = sample_uniform_trajectory(n, t, &mut rng).unwrap();
        let total: usize = (1..=n).map(|k| occupancy(&traj, k).unwrap()).sum();
        prop_assert_eq!(total, 2 * t);
    }

    #[test]
    fn neighbor_touches_only_the_replaced_position(k in 1usize..8, seed in 0u64..200) {
        let s = make_synthetic(SyntheticKind::GaussLinear, 8, 2, 0.2, seed).unwrap();
        let replacement = make_synthetic(SyntheticKind::GaussLinear, 2, 2, 0.2, seed + 1)
            .unwrap()
            .sample(1)
            .clone();
        let t = neighbor(&s, &NeighborSpec { index: k, replacement }).unwrap();
        for i in 1..=8 {
            if i != k {
                prop_assert_eq!(s.sample(i), t.sample(i));
            }
        }
        // restoring the original sample recovers S exactly
        let back = neighbor(&t, &NeighborSpec { index: k, replacement: s.sample(k).clone() }).unwrap();
        prop_assert_eq!(&s, &back);
    }
}

/// |ℓ(w₁) − ℓ(w₂)| ≤ L·‖w₁ − w₂‖₂ + 1e−12 on random domain probes, and the
/// declared M bounds every observed value (10⁵ probes across the losses).
#[test]
fn lipschitz_and_range_certificates_hold_on_mass_probes() {
    let d = 3;
    let r_x = 2.0;
    let r_w = 1.5;
    let losses: Vec<(&str, Box<dyn PairwiseLossModel>)> = vec![
        ("logistic", Box::new(PairwiseLogistic::new(r_x, r_w).unwrap())),
        ("hinge", Box::new(PairwiseHinge::new(r_x, r_w).unwrap())),
        ("squared", Box::new(PairwiseSquared::new(r_x, 1.0, r_w).unwrap())),
    ];
    let mut rng = stream_rng(99, "mass-probe", 0);
    for (name, loss) in &losses {
        let c = loss.constants();
        for _ in 0..34_000 {
            let (z, zt) = loss.sample_probe_pair(d, &mut rng);
            let w1 = uniform_in_ball(&mut rng, d, r_w);
            let w2 = uniform_in_ball(&mut rng, d, r_w);
            let (f1, f2) = (loss.value(&w1, &z, &zt), loss.value(&w2, &z, &zt));
            assert!(f1 >= 0.0 && f1 <= c.bound, "{name}: value {f1} outside [0, {}]", c.bound);
            assert!(f2 >= 0.0 && f2 <= c.bound);
            let dw = (&w1 - &w2).iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(
                (f1 - f2).abs() <= c.lipschitz * dw + 1e-12,
                "{name}: Lipschitz violated: |{f1} - {f2}| > {} * {dw}",
                c.lipschitz
            );
        }
    }
}

/// Jensen midpoint inequality to 1e−12 for every convex-flagged loss.
#[test]
fn convex_losses_pass_midpoint_checks() {
    let d = 3;
    let losses: Vec<Box<dyn PairwiseLossModel>> = vec![
        Box::new(PairwiseLogistic::new(2.0, 1.5).unwrap()),
        Box::new(PairwiseHinge::new(2.0, 1.5).unwrap()),
        Box::new(PairwiseSquared::new(2.0, 1.0, 1.5).unwrap()),
    ];
    let mut rng = stream_rng(7, "jensen", 0);
    for loss in &losses {
        assert!(loss.constants().convex);
        for _ in 0..1000 {
            let (z, zt) = loss.sample_probe_pair(d, &mut rng);
            let w1 = uniform_in_ball(&mut rng, d, 1.5);
            let w2 = uniform_in_ball(&mut rng, d, 1.5);
            let mid = (&w1 + &w2) * 0.5;
            let lhs = loss.value(&mid, &z, &zt);
            let rhs = 0.5 * (loss.value(&w1, &z, &zt) + loss.value(&w2, &z, &zt));
            assert!(lhs <= rhs + 1e-12, "midpoint convexity violated: {lhs} > {rhs}");
        }
    }
}
