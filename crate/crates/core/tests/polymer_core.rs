mod common;

use common::Rng;
use polymerlab::env::{DisorderModel, Environment, Site};
use polymerlab::lattice::log_sum_exp;
use polymerlab::polymer::{self, Dim, PathConstraint, PolymerParams, Skeleton};
use polymerlab::skeletons::simple_skeleton;
use polymerlab::stats::summarize;
use proptest::prelude::*;

fn gaussian(seed: u64, replica: u64) -> Environment {
    Environment::new(DisorderModel::standard_gaussian(), seed, replica)
}

#[test]
fn beta_zero_is_zero() {
    let env = gaussian(1, 0);
    for (d, n) in [(1, 1), (1, 17), (2, 9)] {
        let p = PolymerParams::new(d, n, 0.0).unwrap();
        assert_eq!(polymer::log_partition(&env, &p), 0.0);
        assert_eq!(polymer::log_partition_shifted(&env, &p, Site::d2(3, 1, 0)), 0.0);
    }
    let p = PolymerParams::new(1, 6, 0.0).unwrap();
    assert!(polymer::brute_force_log_partition(&env, &p, PathConstraint::Free).unwrap().abs() < 1e-15);
}

#[test]
fn two_path_closed_form() {
    let env = gaussian(0, 0).with_override(Site::d1(1, 1), 0.3).with_override(Site::d1(1, -1), -0.1);
    let p = PolymerParams::new(1, 1, 1.0).unwrap();
    let expected = 0.11986807184000742;
    assert!((polymer::log_partition(&env, &p) - expected).abs() < 1e-15);
}

#[test]
fn dp_matches_brute_force_d1() {
    let mut rng = Rng::new(3);
    for n in 1..=10 {
        for r in 0..10u64 {
            let env = gaussian(rng.next_u64(), r);
            for beta in [0.3, 1.0] {
                let p = PolymerParams::new(1, n, beta).unwrap();
                let dp = polymer::log_partition(&env, &p);
                let bf = polymer::brute_force_log_partition(&env, &p, PathConstraint::Free).unwrap();
                assert!((dp - bf).abs() <= 1e-9, "N={n} dp={dp} bf={bf}");
            }
        }
    }
}

#[test]
fn dp_matches_brute_force_d2() {
    let mut rng = Rng::new(4);
    for r in 0..20u64 {
        let env = gaussian(rng.next_u64(), r);
        let p = PolymerParams::new(2, 5, 0.7).unwrap();
        let dp = polymer::log_partition(&env, &p);
        let bf = polymer::brute_force_log_partition(&env, &p, PathConstraint::Free).unwrap();
        assert!((dp - bf).abs() <= 1e-9);
        let z = rng.reachable_point(Dim::Two, 5);
        let dp = polymer::log_partition_p2p(&env, &p, z);
        let bf = polymer::brute_force_log_partition(&env, &p, PathConstraint::Endpoint(z)).unwrap();
        assert!((dp - bf).abs() <= 1e-9);
    }
}

#[test]
fn brute_force_refuses_above_cap() {
    let env = gaussian(1, 0);
    let p = PolymerParams::new(2, 12, 1.0).unwrap();
    let err = polymer::brute_force_log_partition(&env, &p, PathConstraint::Free).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn p2p_examples() {
    let env = gaussian(5, 0);
    let p = PolymerParams::new(1, 2, 0.0).unwrap();
    assert!((polymer::log_partition_p2p(&env, &p, [0, 0]) - 0.5f64.ln()).abs() < 1e-15);
    assert_eq!(polymer::log_partition_p2p(&env, &p, [4, 0]), f64::NEG_INFINITY);
    assert_eq!(polymer::log_partition_p2p(&env, &p, [1, 0]), f64::NEG_INFINITY);
}

#[test]
fn partition_of_unity_on_grid() {
    for (d, n) in [(1, 1), (1, 7), (1, 64), (2, 3), (2, 16)] {
        let env = gaussian(9, n as u64);
        let p = PolymerParams::new(d, n, 0.8).unwrap();
        let field = polymer::point_to_point_field(&env, &p);
        let parts: Vec<f64> = field.iter().map(|(_, v)| v).collect();
        let total = polymer::log_partition(&env, &p);
        assert!((log_sum_exp(&parts) - total).abs() <= 1e-12 * total.abs().max(1.0));
        let dist = polymer::endpoint_distribution(&env, &p);
        assert!((dist.values().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn shifted_at_origin_is_exact() {
    let env = gaussian(6, 0);
    let p = PolymerParams::new(2, 9, 1.0).unwrap();
    assert_eq!(polymer::log_partition_shifted(&env, &p, Site::ORIGIN), polymer::log_partition(&env, &p));
}

#[test]
fn shift_invariance_in_law() {
    let p = PolymerParams::new(1, 16, 1.0).unwrap();
    let r = 10_000u64;
    let (a, b): (Vec<f64>, Vec<f64>) = (0..r)
        .map(|k| {
            let env = gaussian(31, k);
            (polymer::log_partition(&env, &p), polymer::log_partition_shifted(&env, &p, Site::d1(2, 0)))
        })
        .unzip();
    let (sa, sb) = (summarize(&a), summarize(&b));
    let joint = (sa.stderr.powi(2) + sb.stderr.powi(2)).sqrt();
    assert!((sa.mean - sb.mean).abs() < 4.0 * joint, "{} vs {}", sa.mean, sb.mean);
}

#[test]
fn between_examples() {
    let env = gaussian(8, 2);
    let d = Dim::One;
    let p = PolymerParams::new(1, 6, 0.9).unwrap();
    let z = [2, 0];
    let between = polymer::log_partition_between(&env, d, Site::ORIGIN, Site::d1(6, 2), 0.9).unwrap();
    assert_eq!(between, polymer::log_partition_p2p(&env, &p, z));

    let start = Site::d1(3, 1);
    let end = Site::d1(4, 2);
    let one = polymer::log_partition_between(&env, d, start, end, 0.9).unwrap();
    assert!((one - (0.9 * env.omega(end) + 0.5f64.ln())).abs() < 1e-14);

    assert_eq!(polymer::log_partition_between(&env, d, start, Site::d1(4, 1), 0.9).unwrap(), f64::NEG_INFINITY);
    assert_eq!(polymer::log_partition_between(&env, d, start, start, 0.9).unwrap_err().exit_code(), 1);
}

#[test]
fn skeleton_single_block_and_factorization() {
    let mut rng = Rng::new(12);
    for r in 0..20u64 {
        let env = gaussian(rng.next_u64(), r);
        let p = PolymerParams::new(1, 8, 1.0).unwrap();
        let z = rng.reachable_point(Dim::One, 8);
        let single = Skeleton::new(8, vec![Site::ORIGIN, Site::new(8, z)]).unwrap();
        assert_eq!(polymer::log_partition_skeleton(&env, &p, &single).unwrap(), polymer::log_partition_p2p(&env, &p, z));

        let path = rng.path(Dim::One, 8);
        let skel = simple_skeleton(&path, 2).unwrap();
        let direct = polymer::log_partition_skeleton(&env, &p, &skel).unwrap();
        let blocks = polymer::log_partition_skeleton_blocks(&env, &p, &skel).unwrap();
        assert!((direct - blocks).abs() <= 1e-10);
        let bf = polymer::brute_force_log_partition(&env, &p, PathConstraint::Skeleton(&skel)).unwrap();
        assert!((direct - bf).abs() <= 1e-9);
    }
}

#[test]
fn endpoint_distribution_binomial() {
    let env = gaussian(1, 0);
    let p = PolymerParams::new(1, 2, 0.0).unwrap();
    let dist = polymer::endpoint_distribution(&env, &p);
    let want = [([-2, 0], 0.25), ([0, 0], 0.5), ([2, 0], 0.25)];
    assert_eq!(dist.len(), 3);
    for (z, pr) in want {
        assert!((dist[&z] - pr).abs() < 1e-15);
    }
}

#[test]
fn mirrored_environment_mirrors_distribution() {
    let n = 10;
    let env = gaussian(17, 0);
    let mut mirrored = gaussian(999, 0);
    for m in 1..=n as i64 {
        for x in (-m..=m).step_by(2) {
            mirrored = mirrored.with_override(Site::d1(m, -x), env.omega(Site::d1(m, x)));
        }
    }
    let p = PolymerParams::new(1, n, 1.3).unwrap();
    let a = polymer::endpoint_distribution(&env, &p);
    let b = polymer::endpoint_distribution(&mirrored, &p);
    for (z, pr) in &a {
        assert_eq!(pr.to_bits(), b[&[-z[0], 0]].to_bits());
    }
}

#[test]
fn occupation_examples() {
    let env = gaussian(1, 0);
    let p = PolymerParams::new(1, 2, 0.0).unwrap();
    let occ = polymer::occupation_probabilities(&env, &p);
    assert!((occ.probability(Site::d1(1, -1)) - 0.5).abs() < 1e-15);
    assert!((occ.probability(Site::d1(1, 1)) - 0.5).abs() < 1e-15);

    for (d, n) in [(1, 40), (2, 12)] {
        let env = gaussian(3, 1);
        let p = PolymerParams::new(d, n, 1.0).unwrap();
        let occ = polymer::occupation_probabilities(&env, &p);
        assert!((occ.total() - n as f64).abs() <= 1e-10);
        for m in 1..=n {
            assert!((occ.layer_sum(m) - 1.0).abs() <= 1e-12);
        }
        assert!(occ.iter().all(|(_, v)| (0.0..=1.0 + 1e-12).contains(&v)));
    }
}

fn gradient_check(env: &Environment, p: &PolymerParams, site: Site) -> (f64, f64, f64) {
    let h = 1e-5;
    let w = env.omega(site);
    let (up, down) = (env.with_override(site, w + h), env.with_override(site, w - h));
    let exact = p.beta * polymer::occupation_probabilities(env, p).probability(site);
    let fd = common::log_z_difference(&up, &down, p.d, p.n, p.beta) / (2.0 * h);
    let plain = (polymer::log_partition(&up, p) - polymer::log_partition(&down, p)) / (2.0 * h);
    ((fd - exact).abs() / exact, (plain - exact).abs(), exact)
}

#[test]
fn gradient_identity_random_sites() {
    let mut rng = Rng::new(21);
    let p = PolymerParams::new(1, 16, 1.0).unwrap();
    let env = gaussian(rng.next_u64(), 0);
    let log_z = polymer::log_partition(&env, &p);
    for _ in 0..20 {
        let m = 1 + rng.below(16) as usize;
        let x = rng.reachable_point(Dim::One, m);
        let site = Site::new(m as i64, x);
        let (rel, plain_abs, exact) = gradient_check(&env, &p, site);
        assert!(rel <= 1e-6, "site {site:?} rel err {rel}");
        // the f64 difference of two log partitions is only good to roundoff over the step
        let floor = 64.0 * p.n as f64 * f64::EPSILON * log_z.abs().max(1.0) / 1e-5;
        assert!(plain_abs <= 1e-6 * exact + floor, "site {site:?} f64 difference off by {plain_abs}");
    }
}

#[test]
fn restriction_inequality_pointwise() {
    let mut rng = Rng::new(5);
    for r in 0..30u64 {
        let env = gaussian(rng.next_u64(), r);
        let (n, m) = (6usize, 4usize);
        let x = rng.reachable_point(Dim::One, n);
        let y = rng.reachable_point(Dim::One, m);
        let end = [x[0] + y[0], 0];
        let whole = polymer::log_partition_p2p(&env, &PolymerParams::new(1, n + m, 0.8).unwrap(), end);
        let head = polymer::log_partition_p2p(&env, &PolymerParams::new(1, n, 0.8).unwrap(), x);
        let tail = polymer::log_partition_between(&env, Dim::One, Site::new(n as i64, x), Site::new((n + m) as i64, end), 0.8).unwrap();
        assert!(whole - (head + tail) >= -1e-10);
    }
}

#[test]
fn annealed_identity() {
    let p = PolymerParams::new(1, 16, 0.5).unwrap();
    let z: Vec<f64> = (0..100_000u64).map(|k| polymer::log_partition(&gaussian(77, k), &p).exp()).collect();
    let s = summarize(&z);
    let expected = (0.125f64 * 16.0).exp();
    assert!((s.mean - expected).abs() < 4.0 * s.stderr, "{} vs {expected} se {}", s.mean, s.stderr);
}

#[test]
fn jensen_sandwich_per_replica_set() {
    let p = PolymerParams::new(1, 32, 0.5).unwrap();
    let v: Vec<f64> = (0..5000u64).map(|k| polymer::log_partition(&gaussian(13, k), &p) / 32.0).collect();
    let s = summarize(&v);
    assert!(s.mean >= -3.0 * s.stderr);
    assert!(s.mean <= 0.125 + 3.0 * s.stderr);
}

#[test]
fn negative_correlation_probe() {
    let beta = 1.0;
    let p = PolymerParams::new(1, 12, beta).unwrap();
    let site = Site::d1(6, 0);
    let r = 10_000u64;
    let (mu, e): (Vec<f64>, Vec<f64>) = (0..r)
        .map(|k| {
            let env = gaussian(41, k);
            let occ = polymer::occupation_probabilities(&env, &p);
            (occ.probability(site), (-beta * env.omega(site)).exp())
        })
        .unzip();
    let (sm, se) = (summarize(&mu), summarize(&e));
    let prods: Vec<f64> = mu.iter().zip(&e).map(|(a, b)| (a - sm.mean) * (b - se.mean)).collect();
    let c = summarize(&prods);
    assert!(c.mean <= 3.0 * c.stderr, "cov {} se {}", c.mean, c.stderr);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prop_partition_of_unity(seed in any::<u64>(), d in 1usize..=2, n in 1usize..24, beta in 0.0f64..3.0) {
        let env = gaussian(seed, 0);
        let p = PolymerParams::new(d, n, beta).unwrap();
        let parts: Vec<f64> = polymer::point_to_point_field(&env, &p).iter().map(|(_, v)| v).collect();
        let total = polymer::log_partition(&env, &p);
        prop_assert!((log_sum_exp(&parts) - total).abs() <= 1e-12 * total.abs().max(1.0));
    }

    #[test]
    fn prop_monotone_in_single_site(seed in any::<u64>(), n in 1usize..20, bump in 1e-3f64..2.0, pick in any::<u64>()) {
        let env = gaussian(seed, 0);
        let p = PolymerParams::new(1, n, 0.7).unwrap();
        let mut rng = Rng::new(pick);
        let m = 1 + rng.below(n as u64) as usize;
        let site = Site::new(m as i64, rng.reachable_point(Dim::One, m));
        let before = polymer::log_partition(&env, &p);
        let after = polymer::log_partition(&env.with_override(site, env.omega(site) + bump), &p);
        prop_assert!(after > before);
    }

    #[test]
    fn prop_occupation_sums(seed in any::<u64>(), d in 1usize..=2, n in 1usize..16, beta in 0.0f64..2.0) {
        let env = gaussian(seed, 1);
        let p = PolymerParams::new(d, n, beta).unwrap();
        let occ = polymer::occupation_probabilities(&env, &p);
        prop_assert!((occ.total() - n as f64).abs() <= 1e-10);
    }
}
