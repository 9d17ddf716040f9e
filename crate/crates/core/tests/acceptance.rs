//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use common::Rng;
use polymerlab::cli::run::default_sites;
use polymerlab::env::{DisorderModel, Environment, Site};
use polymerlab::estimators::{self as est, ReplicaStats, ResourceCaps};
use polymerlab::lattice::log_sum_exp;
use polymerlab::nearly_gamma::{self as ng, Density, Side};
use polymerlab::polymer::{self, Dim, PathConstraint, PolymerParams};
use polymerlab::skeletons::{decomposition_check, simple_skeleton};
use serde_json::json;

const G: fn() -> DisorderModel = DisorderModel::standard_gaussian;

struct Outcome {
    pass: bool,
    detail: String,
    /// Serialized results; compared across thread counts.
    fingerprint: String,
}

fn caps() -> ResourceCaps {
    ResourceCaps::default()
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed.as_secs_f64() < limit_s as f64
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = Rng::new(0xACCE_0001);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    let mut values = Vec::new();
    for (d, n) in [(1, 4), (1, 6), (1, 8), (1, 10), (2, 3), (2, 4), (2, 5)] {
        let dim = Dim::new(d).unwrap();
        let block = (2..n).find(|b| n % b == 0).unwrap_or(1);
        for r in 0..100u64 {
            let env = Environment::new(G(), 0xACCE_0001, r);
            let z = rng.reachable_point(dim, n);
            let skel = simple_skeleton(&rng.path(dim, n), block).unwrap();
            for beta in [0.3, 1.0] {
                let p = PolymerParams::new(d, n, beta).unwrap();
                let pairs = [
                    (polymer::log_partition(&env, &p), PathConstraint::Free),
                    (polymer::log_partition_p2p(&env, &p, z), PathConstraint::Endpoint(z)),
                    (polymer::log_partition_skeleton(&env, &p, &skel).unwrap(), PathConstraint::Skeleton(&skel)),
                ];
                for (dp, c) in pairs {
                    let bf = polymer::brute_force_log_partition(&env, &p, c).unwrap();
                    worst = worst.max((dp - bf).abs());
                    values.push(dp);
                    cases += 1;
                }
            }
        }
    }
    let t = start.elapsed();
    Outcome {
        pass: worst <= 1e-9 && within(t, 60),
        detail: format!("max |DP - brute force| = {worst:.3e} over {cases} cases ({:.1} s)", t.as_secs_f64()),
        fingerprint: json!(values).to_string(),
    }
}

fn gradient_identity() -> Outcome {
    let start = Instant::now();
    let mut rng = Rng::new(0xACCE_0002);
    let p = PolymerParams::new(1, 16, 1.0).unwrap();
    let env = Environment::new(G(), rng.next_u64(), 0);
    let occ = polymer::occupation_probabilities(&env, &p);
    let h = 1e-5;
    let (mut worst, mut worst_plain): (f64, f64) = (0.0, 0.0);
    let mut values = Vec::new();
    for _ in 0..20 {
        let m = 1 + rng.below(16) as usize;
        let site = Site::new(m as i64, rng.reachable_point(Dim::One, m));
        let w = env.omega(site);
        let (up, down) = (env.with_override(site, w + h), env.with_override(site, w - h));
        let fd = common::log_z_difference(&up, &down, p.d, p.n, p.beta) / (2.0 * h);
        let plain = (polymer::log_partition(&up, &p) - polymer::log_partition(&down, &p)) / (2.0 * h);
        let exact = p.beta * occ.probability(site);
        worst = worst.max((fd - exact).abs() / exact);
        worst_plain = worst_plain.max((plain - exact).abs() / exact);
        values.push(exact);
    }
    let t = start.elapsed();
    Outcome {
        pass: worst <= 1e-6 && within(t, 60),
        detail: format!(
            "max relative error {worst:.3e} at 20 sites (extended-precision difference; plain f64 difference {worst_plain:.3e}) ({:.2} s)",
            t.as_secs_f64()
        ),
        fingerprint: json!(values).to_string(),
    }
}

fn exact_identities() -> Outcome {
    let mut unity: f64 = 0.0;
    let mut layer_err: f64 = 0.0;
    let mut total_err: f64 = 0.0;
    let mut decomposition: f64 = 0.0;
    let mut values = Vec::new();
    for (d, n) in [(1, 1), (1, 8), (1, 33), (1, 256), (2, 2), (2, 9), (2, 40)] {
        for r in 0..5u64 {
            let env = Environment::new(G(), 0xACCE_0003, r);
            let p = PolymerParams::new(d, n, 0.9).unwrap();
            let parts: Vec<f64> = polymer::point_to_point_field(&env, &p).iter().map(|(_, v)| v).collect();
            let total = polymer::log_partition(&env, &p);
            unity = unity.max((log_sum_exp(&parts) - total).abs() / total.abs().max(f64::MIN_POSITIVE));
            let occ = polymer::occupation_probabilities(&env, &p);
            for m in 1..=n {
                layer_err = layer_err.max((occ.layer_sum(m) - 1.0).abs());
            }
            total_err = total_err.max((occ.total() - n as f64).abs());
            values.push(total);
        }
    }
    for r in 0..20u64 {
        let env = Environment::new(G(), 0xACCE_0003, 100 + r);
        let p = PolymerParams::new(1, 8, 1.0).unwrap();
        let c = decomposition_check(&env, &p, 2, [0, 0], 1_000_000).unwrap();
        decomposition = decomposition.max(c.residual);
        values.push(c.decomposed);
    }
    Outcome {
        pass: unity <= 1e-12 && layer_err <= 1e-10 && total_err <= 1e-10 && decomposition <= 1e-10,
        detail: format!(
            "unity rel {unity:.2e}, layer sums {layer_err:.2e}, total {total_err:.2e}, decomposition {decomposition:.2e}"
        ),
        fingerprint: json!(values).to_string(),
    }
}

fn annealed_identity() -> Outcome {
    let start = Instant::now();
    let stats = est::run_replicas(G(), Dim::One, 0.5, &[16], 100_000, 0xACCE_0004, &caps()).unwrap();
    let a = est::annealed_check(&stats, 16).unwrap();
    let t = start.elapsed();
    Outcome {
        pass: a.z_score.abs() <= 4.0 && within(t, 120),
        detail: format!(
            "mean Z_16 = {:.5} +/- {:.5}, exp(16 lambda) = {:.5}, z = {:.2} ({:.1} s)",
            a.mean_z,
            a.stderr_z,
            a.expected,
            a.z_score,
            t.as_secs_f64()
        ),
        fingerprint: serde_json::to_string(&(a, &stats)).unwrap(),
    }
}

const SHARED_GRID: [usize; 8] = [8, 16, 32, 64, 128, 256, 512, 1024];

fn shared_run() -> (ReplicaStats, Duration) {
    let start = Instant::now();
    let stats = est::run_replicas(G(), Dim::One, 0.5, &SHARED_GRID, 2000, 0xACCE_0005, &caps()).unwrap();
    (stats, start.elapsed())
}

fn sandwich_and_superadditivity(stats: &ReplicaStats, run_time: Duration) -> Outcome {
    let start = Instant::now();
    let sandwich = est::jensen_sandwich(stats).unwrap();
    let sandwich: Vec<_> = sandwich.into_iter().filter(|r| r.n <= 512).collect();
    let sandwich_ok = sandwich.iter().all(|r| r.lower_ok && r.upper_ok);
    let mut restrictions = Vec::new();
    for n in [8, 16, 32, 64, 128, 256, 512] {
        restrictions.push(est::restriction_check(G(), Dim::One, 0.5, n, [0, 0], 2000, 0xACCE_0005, &caps()).unwrap());
    }
    let restriction_ok = restrictions.iter().all(|r| r.holds);
    let worst_margin = restrictions
        .iter()
        .map(|r| r.diff_mean / r.joint_stderr.max(f64::MIN_POSITIVE))
        .fold(f64::INFINITY, f64::min);
    let doubling = est::superadditivity_doubling(stats);
    let t = run_time + start.elapsed();
    Outcome {
        pass: sandwich_ok && restriction_ok && within(t, 600),
        detail: format!(
            "sandwich holds for N = 8..512: {sandwich_ok}; restriction doubling N = 8..512 holds: {restriction_ok} (smallest diff/stderr {worst_margin:.1}); mean/N doubling rows holding {}/{} ({:.1} s)",
            doubling.iter().filter(|d| d.holds).count(),
            doubling.len(),
            t.as_secs_f64()
        ),
        fingerprint: serde_json::to_string(&(sandwich, restrictions, doubling)).unwrap(),
    }
}

fn rate_shadow(stats: &ReplicaStats, run_time: Duration) -> Outcome {
    let start = Instant::now();
    let fe = est::free_energy_at(stats, 1024).unwrap();
    let report = est::convergence_gap(stats, &fe);
    let rows: Vec<_> = report.rows.iter().filter(|r| r.n <= 512).collect();
    let gaps_ok = rows.iter().all(|r| r.nonnegative_within_3se);
    let first = rows.first().unwrap().normalized_gap.unwrap();
    let last = rows.last().unwrap().normalized_gap.unwrap();
    let table: Vec<String> = rows.iter().map(|r| format!("{}:{:.3}", r.n, r.normalized_gap.unwrap())).collect();
    let t = run_time + start.elapsed();
    Outcome {
        pass: gaps_ok && last <= 2.0 * first && within(t, 1200),
        detail: format!(
            "p_hat(1024) = {:.6}; gaps >= -3 se: {gaps_ok}; normalized gap {} ({:.1} s)",
            fe.p_hat,
            table.join(" "),
            t.as_secs_f64()
        ),
        fingerprint: serde_json::to_string(&report).unwrap(),
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

fn nearly_gamma_golden() -> Outcome {
    let mk = |kind: &str, ps: &[(&str, f64)]| {
        let params = ps.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        DisorderModel::from_parts(kind, &params).unwrap()
    };
    let gauss = G();
    let expo = mk("centered_exponential", &[("rate", 1.0)]);
    let gamma = mk("centered_gamma", &[("shape", 2.0), ("scale", 1.0)]);
    let unif = mk("centered_uniform", &[("half_width", 1.0)]);

    let g_grid = linspace(-5.0, 5.0, 1001);
    let g_report = ng::fit_envelope(&gauss, &g_grid, 1.0).unwrap();
    let psi_dev = g_report.psi_values.iter().map(|p| (p - 1.0).abs()).fold(0.0, f64::max);
    let gauss_ok = psi_dev <= 1e-8 && g_report.a_fit == 0.0 && g_report.b == 1.0 && g_report.envelope_holds;

    let tail = ng::check_tail_ratio(&expo, Side::Upper).unwrap();
    let ratio_dev = (tail.ratio_min - 1.0).abs().max((tail.ratio_max - 1.0).abs());
    let b = ng::psi(&expo, 0.0).unwrap().value.powi(2);
    let e_report = ng::fit_envelope(&expo, &linspace(-0.99, 30.0, 3101), b).unwrap();
    let expo_ok = tail.pass && ratio_dev <= 1e-8 && (1.8..=2.6).contains(&e_report.a_fit);

    let iv: Vec<_> = [(-1.0, Side::Lower), (1.0, Side::Upper)]
        .into_iter()
        .map(|(e, s)| ng::check_endpoint_exponent(&unif, e, s).unwrap())
        .collect();
    let unif_ok = iv.iter().all(|v| v.pass && v.alpha.unwrap().abs() < 1e-6);

    let env = Environment::new(G(), 0xACCE_0006, 0);
    let xi: Vec<f64> = (1..=100_000i64).map(|n| env.omega(Site::d1(n, n % 2))).collect();
    let mut ks_worst: f64 = 0.0;
    for m in [expo, gamma, unif] {
        let mut pushed: Vec<f64> = xi.iter().map(|&x| ng::gaussian_transport(&m, x).unwrap()).collect();
        ks_worst = ks_worst.max(common::ks_distance(&mut pushed, |y| m.cdf(y)));
    }
    Outcome {
        pass: gauss_ok && expo_ok && unif_ok && ks_worst < 0.006,
        detail: format!(
            "gaussian |psi-1| {psi_dev:.1e}, (A,B) = ({}, {}); exponential tail ratio dev {ratio_dev:.1e}, A_fit {:.4}; uniform endpoint alpha {:?}; transport KS {ks_worst:.4}",
            g_report.a_fit,
            g_report.b,
            e_report.a_fit,
            iv.iter().map(|v| v.alpha.unwrap()).collect::<Vec<_>>()
        ),
        fingerprint: serde_json::to_string(&(g_report, e_report, tail, iv, ks_worst)).unwrap(),
    }
}

fn concentration_shadow() -> Outcome {
    let start = Instant::now();
    let grid = [32, 64, 128, 256, 512];
    let stats = est::run_replicas(G(), Dim::One, 1.0, &grid, 2000, 0xACCE_0007, &caps()).unwrap();
    let t_grid = polymerlab::cli::config::default_t_grid();
    let prof = est::concentration_from_samples(256, &stats.at(256).unwrap().samples, &t_grid).unwrap();
    let monotone = prof.exceedance.windows(2).all(|w| w[1] <= w[0]);
    let slope = prof.fitted_log_slope;
    let scale = est::variance_scale(&stats);
    let at = |n: usize| scale.iter().find(|s| s.0 == n).unwrap().1;
    let (v32, v512) = (at(32), at(512));
    let t = start.elapsed();
    Outcome {
        pass: monotone && slope.is_some_and(|s| s < 0.0) && v512 <= 2.0 * v32 && within(t, 900),
        detail: format!(
            "N=256 exceedance non-increasing: {monotone}, slope {:.3} (R^2 {:.3}, {} points); Var ln N/N at 32 {v32:.4}, at 512 {v512:.4} ({:.1} s)",
            slope.unwrap_or(f64::NAN),
            prof.r_squared.unwrap_or(f64::NAN),
            prof.fit_points,
            t.as_secs_f64()
        ),
        fingerprint: serde_json::to_string(&(prof, scale)).unwrap(),
    }
}

fn influence_bound() -> Outcome {
    let start = Instant::now();
    let p = PolymerParams::new(1, 16, 0.5).unwrap();
    let sites = default_sites(16);
    let r = est::site_influence(G(), &p, &sites, Some([0, 0]), 10_000, 8, 0xACCE_0009, &caps()).unwrap();
    let bound = r.l_plus_bound.unwrap();
    let ok = r.sites.len() == 10
        && r.sites.iter().all(|s| s.reachable && s.l_plus_second_moment.unwrap() <= bound + 3.0 * s.l_plus_stderr.unwrap());
    let largest = r.sites.iter().map(|s| s.l_plus_second_moment.unwrap()).fold(0.0, f64::max);
    let t = start.elapsed();
    Outcome {
        pass: ok && within(t, 300),
        detail: format!("largest E[(L+)^2] = {largest:.4} vs bound {bound:.4} at 10 sites ({:.1} s)", t.as_secs_f64()),
        fingerprint: serde_json::to_string(&r).unwrap(),
    }
}

/// Runs every CLI subcommand and returns the concatenated output bytes.
fn cli_outputs(threads: usize) -> Vec<u8> {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(
        &cfg,
        r#"{"dimension": 1, "disorder": {"kind": "gaussian", "params": {"sigma": 1}},
            "beta": 0.5, "n_grid": [8, 16, 32, 64, 128], "replicas": 300, "seed": 5}"#,
    )
    .unwrap();
    let mut bytes = Vec::new();
    for exp in ["logz", "replicas", "free-energy", "concentration", "rate", "influence", "exponents", "ng-cert", "skeleton"] {
        let out = dir.path().join(format!("{exp}.csv"));
        let code = polymerlab::cli::main_with_args([
            "polymerlab",
            exp,
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--threads",
            &threads.to_string(),
        ]);
        assert_eq!(code, 0, "{exp}");
        bytes.extend(std::fs::read(&out).unwrap());
        bytes.extend(std::fs::read(out.with_extension("json")).unwrap());
    }
    bytes
}

type Criterion = (u32, &'static str);

const NAMES: [Criterion; 9] = [
    (1, "oracle equivalence"),
    (2, "gradient identity"),
    (3, "exact identities"),
    (4, "annealed identity"),
    (5, "Jensen sandwich and superadditivity"),
    (6, "nearly-gamma golden cases"),
    (7, "concentration shadow"),
    (8, "rate shadow"),
    (9, "influence bound"),
];

fn all_criteria() -> Vec<Outcome> {
    let (stats, run_time) = shared_run();
    vec![
        oracle_equivalence(),
        gradient_identity(),
        exact_identities(),
        annealed_identity(),
        sandwich_and_superadditivity(&stats, run_time),
        nearly_gamma_golden(),
        concentration_shadow(),
        rate_shadow(&stats, run_time),
        influence_bound(),
    ]
}

fn line(pass: bool, id: u32, name: &str, detail: &str) {
    println!("{} {id:>2} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
}

fn main() {
    let pool = |k| rayon::ThreadPoolBuilder::new().num_threads(k).build().unwrap();
    let single = pool(1).install(all_criteria);
    let mut failures = 0;
    for ((id, name), o) in NAMES.iter().zip(&single) {
        line(o.pass, *id, name, &o.detail);
        failures += usize::from(!o.pass);
    }

    let start = Instant::now();
    let eight = pool(8).install(all_criteria);
    let differing: Vec<u32> =
        NAMES.iter().zip(single.iter().zip(&eight)).filter(|(_, (a, b))| a.fingerprint != b.fingerprint).map(|(n, _)| n.0).collect();
    let cli_same = cli_outputs(1) == cli_outputs(8);
    let pass = differing.is_empty() && cli_same;
    line(
        pass,
        10,
        "determinism",
        &format!(
            "criteria 1-9 rerun at 8 threads byte-identical to 1 thread: {} (differing {differing:?}); all CLI subcommands identical: {cli_same} ({:.1} s)",
            differing.is_empty(),
            start.elapsed().as_secs_f64()
        ),
    );
    failures += usize::from(!pass);
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
