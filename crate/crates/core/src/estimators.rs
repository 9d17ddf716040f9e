//! Monte Carlo experiment drivers over independent disorder replicas.
//!
//! Replica `r` always uses the environment `(base_seed, r)`. Work is spread
//! over the rayon pool but every aggregate is assembled in replica order,
//! so results do not depend on the number of worker threads.

use rayon::prelude::*;
use serde::Serialize;

use crate::env::{self, DisorderModel, Environment, Point, Site};
use crate::error::{Error, Result};
use crate::lattice;
use crate::polymer::{self, Dim, PolymerParams, TransferMatrix};
use crate::stats::{linear_fit, quantile_sorted, summarize, Summary};

const INFLUENCE_DOMAIN: u64 = 0x696e_666c_7565_6e63;

/// Limits checked before any work starts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResourceCaps {
    pub max_memory_mb: f64,
    pub max_enumeration: u64,
}

impl Default for ResourceCaps {
    fn default() -> Self {
        ResourceCaps { max_memory_mb: 4096.0, max_enumeration: 1_000_000 }
    }
}

impl ResourceCaps {
    pub fn check_memory(&self, what: &str, bytes: f64) -> Result<()> {
        let mb = bytes / (1024.0 * 1024.0);
        if mb > self.max_memory_mb {
            return Err(Error::ResourceCap(format!(
                "{what} needs an estimated {mb:.1} MB, above the cap of {} MB",
                self.max_memory_mb
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quantiles {
    pub q01: f64,
    pub q05: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q95: f64,
    pub q99: f64,
}

impl Quantiles {
    fn of(samples: &[f64]) -> Self {
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let q = |p| quantile_sorted(&s, p);
        Quantiles {
            q01: q(0.01),
            q05: q(0.05),
            q25: q(0.25),
            q50: q(0.5),
            q75: q(0.75),
            q95: q(0.95),
            q99: q(0.99),
        }
    }
}

/// Statistics of `ln Z_N` over replicas at one path length.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NStats {
    pub n: usize,
    pub replicas: usize,
    pub mean: f64,
    pub variance: f64,
    pub stderr: f64,
    pub quantiles: Quantiles,
    /// Replica average of the quenched `E_mu |x_N|^2`.
    pub msd: f64,
    /// `ln Z_N` per replica, in replica order.
    #[serde(skip)]
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicaStats {
    pub model: DisorderModel,
    pub d: Dim,
    pub beta: f64,
    pub base_seed: u64,
    pub replicas: usize,
    pub per_n: Vec<NStats>,
}

impl ReplicaStats {
    pub fn at(&self, n: usize) -> Option<&NStats> {
        self.per_n.iter().find(|s| s.n == n)
    }

    pub fn grid(&self) -> Vec<usize> {
        self.per_n.iter().map(|s| s.n).collect()
    }
}

pub(crate) fn validate_grid(name: &str, grid: &[usize]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Argument(format!("{name} must be nonempty")));
    }
    if grid[0] < 1 {
        return Err(Error::Argument(format!("{name} entries must be >= 1")));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Argument(format!("{name} must be strictly increasing")));
    }
    Ok(())
}

/// `ln Z_N` and the quenched mean squared displacement for every `N` in the
/// grid, from a single transfer-matrix pass per replica.
pub fn run_replicas(
    model: DisorderModel,
    d: Dim,
    beta: f64,
    n_grid: &[usize],
    replicas: usize,
    base_seed: u64,
    caps: &ResourceCaps,
) -> Result<ReplicaStats> {
    if replicas < 2 {
        return Err(Error::Argument(format!("at least 2 replicas are required, got {replicas}")));
    }
    validate_grid("n_grid", n_grid)?;
    let n_max = *n_grid.last().expect("nonempty");
    PolymerParams::new(d.get(), n_max, beta)?;
    let sample_bytes = (replicas * n_grid.len() * 2 * 8) as f64;
    let layer_bytes = (lattice::layer_len(d.get(), n_max) * 2 * 8) as f64;
    caps.check_memory("replica run", sample_bytes + layer_bytes)?;

    let one = |r: u64| -> Vec<(f64, f64)> {
        let env = Environment::new(model, base_seed, r);
        let mut tm = TransferMatrix::new(&env, d, beta, Site::ORIGIN);
        let mut out = Vec::with_capacity(n_grid.len());
        for &n in n_grid {
            tm.advance(n - tm.field().steps());
            let log_z = if beta == 0.0 { 0.0 } else { tm.field().log_total() };
            out.push((log_z, tm.field().mean_square_displacement()));
        }
        out
    };
    let rows: Vec<Vec<(f64, f64)>> = if beta == 0.0 {
        // the environment is irrelevant: every replica is the same walk
        vec![one(0); replicas]
    } else {
        (0..replicas as u64).into_par_iter().map(one).collect()
    };

    let per_n = n_grid
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let samples: Vec<f64> = rows.iter().map(|r| r[k].0).collect();
            let msd: Vec<f64> = rows.iter().map(|r| r[k].1).collect();
            let s = summarize(&samples);
            NStats {
                n,
                replicas,
                mean: s.mean,
                variance: s.variance,
                stderr: s.stderr,
                quantiles: Quantiles::of(&samples),
                msd: summarize(&msd).mean,
                samples,
            }
        })
        .collect();
    Ok(ReplicaStats { model, d, beta, base_seed, replicas, per_n })
}

pub const FREE_ENERGY_NOTE: &str =
    "p_hat = max_N mean(ln Z_N)/N; by superadditivity it is biased low, E p_hat <= p(beta)";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FreeEnergy {
    pub p_hat: f64,
    pub argmax_n: usize,
    /// Standard error of `mean(ln Z_N)/N` at the argmax.
    pub stderr: f64,
    pub note: String,
}

pub fn estimate_free_energy(stats: &ReplicaStats) -> FreeEnergy {
    let best = stats
        .per_n
        .iter()
        .max_by(|a, b| (a.mean / a.n as f64).total_cmp(&(b.mean / b.n as f64)))
        .expect("nonempty grid");
    free_energy_from(best)
}

/// `mean(ln Z_N)/N` at one fixed `N`.
pub fn free_energy_at(stats: &ReplicaStats, n: usize) -> Result<FreeEnergy> {
    stats
        .at(n)
        .map(free_energy_from)
        .ok_or_else(|| Error::Argument(format!("N = {n} is not in the replica grid")))
}

fn free_energy_from(s: &NStats) -> FreeEnergy {
    FreeEnergy {
        p_hat: s.mean / s.n as f64,
        argmax_n: s.n,
        stderr: s.stderr / s.n as f64,
        note: FREE_ENERGY_NOTE.into(),
    }
}

/// Per-`N` check of `0 <= mean(ln Z_N)/N <= lambda(beta)` with slack.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichRow {
    pub n: usize,
    pub mean_over_n: f64,
    pub stderr_over_n: f64,
    pub lambda_beta: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
}

pub fn jensen_sandwich(stats: &ReplicaStats) -> Result<Vec<SandwichRow>> {
    let lambda = stats.model.log_mgf(stats.beta)?;
    Ok(stats
        .per_n
        .iter()
        .map(|s| {
            let n = s.n as f64;
            let ratio = s.mean / n;
            SandwichRow {
                n: s.n,
                mean_over_n: ratio,
                stderr_over_n: s.stderr / n,
                lambda_beta: lambda,
                lower_ok: ratio >= -3.0 * s.stderr,
                upper_ok: ratio <= lambda + 3.0 * s.stderr / n,
            }
        })
        .collect())
}

/// `E Z_N` against the annealed value `exp(N lambda(beta))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnealedCheck {
    pub n: usize,
    pub mean_z: f64,
    pub stderr_z: f64,
    pub expected: f64,
    pub z_score: f64,
}

pub fn annealed_check(stats: &ReplicaStats, n: usize) -> Result<AnnealedCheck> {
    let s = stats.at(n).ok_or_else(|| Error::Argument(format!("N = {n} is not in the replica grid")))?;
    let z: Vec<f64> = s.samples.iter().map(|v| v.exp()).collect();
    let sz = summarize(&z);
    let expected = (n as f64 * stats.model.log_mgf(stats.beta)?).exp();
    Ok(AnnealedCheck {
        n,
        mean_z: sz.mean,
        stderr_z: sz.stderr,
        expected,
        z_score: if sz.stderr > 0.0 { (sz.mean - expected) / sz.stderr } else { 0.0 },
    })
}

/// `mean(ln Z_2N)/(2N) - mean(ln Z_N)/N` on paired replicas.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoublingRow {
    pub n: usize,
    pub ratio_n: f64,
    pub ratio_2n: f64,
    pub diff: f64,
    pub joint_stderr: f64,
    pub holds: bool,
}

/// Every `N` whose double is also in the grid.
pub fn superadditivity_doubling(stats: &ReplicaStats) -> Vec<DoublingRow> {
    stats
        .per_n
        .iter()
        .filter_map(|a| stats.at(2 * a.n).map(|b| (a, b)))
        .map(|(a, b)| {
            let (n, n2) = (a.n as f64, b.n as f64);
            let diff: Vec<f64> = a.samples.iter().zip(&b.samples).map(|(x, y)| y / n2 - x / n).collect();
            let s = summarize(&diff);
            DoublingRow {
                n: a.n,
                ratio_n: a.mean / n,
                ratio_2n: b.mean / n2,
                diff: s.mean,
                joint_stderr: s.stderr,
                holds: s.mean >= -3.0 * s.stderr,
            }
        })
        .collect()
}

/// Path-restriction lower bound for `ln Z_2N`: paths forced through `(N, x)`
/// give `ln Z_2N >= ln Z_N(x) + ln Z_N` of the walk restarted at `(N, x)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestrictionCheck {
    pub n: usize,
    pub x: Point,
    pub mean_log_z_2n: f64,
    pub mean_point: f64,
    pub mean_block: f64,
    pub diff_mean: f64,
    pub joint_stderr: f64,
    /// Smallest per-replica value of the difference; the bound is exact, so
    /// only roundoff may push it below zero.
    pub min_pointwise: f64,
    pub holds: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn restriction_check(
    model: DisorderModel,
    d: Dim,
    beta: f64,
    n: usize,
    x: Point,
    replicas: usize,
    base_seed: u64,
    caps: &ResourceCaps,
) -> Result<RestrictionCheck> {
    if replicas < 2 {
        return Err(Error::Argument("at least 2 replicas are required".into()));
    }
    let params = PolymerParams::new(d.get(), n, beta)?;
    let mid = Site::new(n as i64, x);
    if !mid.reachable() || (d == Dim::One && x[1] != 0) {
        return Err(Error::Argument(format!("{mid} is not reachable")));
    }
    caps.check_memory("restriction check", (replicas * 3 * 8 + lattice::layer_len(d.get(), 2 * n) * 16) as f64)?;
    let rows: Vec<(f64, f64, f64)> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let env = Environment::new(model, base_seed, r);
            let full = polymer::log_partition(&env, &params.with_n(2 * n));
            let point = polymer::log_partition_p2p(&env, &params, x);
            let block = polymer::log_partition_shifted(&env, &params, mid);
            (full, point, block)
        })
        .collect();
    let diff: Vec<f64> = rows.iter().map(|r| r.0 - r.1 - r.2).collect();
    let s = summarize(&diff);
    let col = |f: fn(&(f64, f64, f64)) -> f64| summarize(&rows.iter().map(f).collect::<Vec<_>>()).mean;
    Ok(RestrictionCheck {
        n,
        x,
        mean_log_z_2n: col(|r| r.0),
        mean_point: col(|r| r.1),
        mean_block: col(|r| r.2),
        diff_mean: s.mean,
        joint_stderr: s.stderr,
        min_pointwise: diff.iter().copied().fold(f64::INFINITY, f64::min),
        holds: s.mean >= -3.0 * s.stderr,
    })
}

/// Empirical tails of `ln Z_N` on the scale `sqrt(N / ln N)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailProfile {
    pub n: usize,
    pub replicas: usize,
    pub mean: f64,
    pub scale: f64,
    pub t_grid: Vec<f64>,
    /// Fraction of replicas with `|ln Z_N - mean| > t * scale`.
    pub exceedance: Vec<f64>,
    /// Exceedance window `[10/R, 0.5]` used by the fit.
    pub fit_window: (f64, f64),
    pub fit_points: usize,
    /// Least-squares slope of `ln exceedance` against `t`.
    pub fitted_log_slope: Option<f64>,
    pub fitted_intercept: Option<f64>,
    pub r_squared: Option<f64>,
    /// Zero-variance input: profile is identically zero and no slope exists.
    pub degenerate: bool,
}

pub fn concentration_profile(
    model: DisorderModel,
    params: &PolymerParams,
    replicas: usize,
    t_grid: &[f64],
    base_seed: u64,
    caps: &ResourceCaps,
) -> Result<TailProfile> {
    let stats = run_replicas(model, params.d, params.beta, &[params.n], replicas, base_seed, caps)?;
    concentration_from_samples(params.n, &stats.per_n[0].samples, t_grid)
}

pub fn concentration_from_samples(n: usize, samples: &[f64], t_grid: &[f64]) -> Result<TailProfile> {
    if n < 2 {
        return Err(Error::Argument("the sqrt(N / ln N) scale needs N >= 2".into()));
    }
    if t_grid.is_empty() || t_grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::Argument("t_grid must be nonempty with finite t >= 0".into()));
    }
    if t_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Argument("t_grid must be strictly increasing".into()));
    }
    let s: Summary = summarize(samples);
    let r = samples.len();
    let nf = n as f64;
    let scale = (nf / nf.ln()).sqrt();
    let dev: Vec<f64> = samples.iter().map(|v| (v - s.mean).abs()).collect();
    let exceedance: Vec<f64> = t_grid
        .iter()
        .map(|t| dev.iter().filter(|&&a| a > t * scale).count() as f64 / r as f64)
        .collect();
    let window = (10.0 / r as f64, 0.5);
    let (xs, ys): (Vec<f64>, Vec<f64>) = t_grid
        .iter()
        .zip(&exceedance)
        .filter(|(_, e)| **e > 0.0 && **e >= window.0 && **e <= window.1)
        .map(|(t, e)| (*t, e.ln()))
        .unzip();
    let degenerate = s.variance == 0.0;
    let fit = if degenerate { None } else { linear_fit(&xs, &ys) };
    Ok(TailProfile {
        n,
        replicas: r,
        mean: s.mean,
        scale,
        t_grid: t_grid.to_vec(),
        exceedance,
        fit_window: window,
        fit_points: xs.len(),
        fitted_log_slope: fit.map(|f| f.slope),
        fitted_intercept: fit.map(|f| f.intercept),
        r_squared: fit.map(|f| f.r_squared),
        degenerate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    pub n: usize,
    /// `N p_hat - mean(ln Z_N)`.
    pub gap: f64,
    pub gap_stderr: f64,
    /// `gap / (sqrt(N / ln N) ln ln N)`, defined for `N >= 3`.
    pub normalized_gap: Option<f64>,
    pub nonnegative_within_3se: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub p_hat: f64,
    pub p_hat_n: usize,
    pub rows: Vec<RateRow>,
    pub note: String,
}

/// Gaps to the plug-in free energy. When `p_hat` was measured on the same
/// replicas, the gap standard error is computed on paired differences.
pub fn convergence_gap(stats: &ReplicaStats, fe: &FreeEnergy) -> RateReport {
    let reference = stats.at(fe.argmax_n).filter(|s| (s.mean / s.n as f64) == fe.p_hat);
    let rows = stats
        .per_n
        .iter()
        .map(|s| {
            let nf = s.n as f64;
            let gap = nf * fe.p_hat - s.mean;
            let gap_stderr = match reference {
                Some(rf) => {
                    let ratio = nf / rf.n as f64;
                    let paired: Vec<f64> = rf.samples.iter().zip(&s.samples).map(|(a, b)| ratio * a - b).collect();
                    summarize(&paired).stderr
                }
                None => s.stderr,
            };
            let normalized_gap = (s.n >= 3).then(|| gap / ((nf / nf.ln()).sqrt() * nf.ln().ln()));
            RateRow { n: s.n, gap, gap_stderr, normalized_gap, nonnegative_within_3se: gap >= -3.0 * gap_stderr }
        })
        .collect();
    RateReport { p_hat: fe.p_hat, p_hat_n: fe.argmax_n, rows, note: FREE_ENERGY_NOTE.into() }
}

/// `Var(ln Z_N) ln N / N` per grid point with `N >= 2`.
pub fn variance_scale(stats: &ReplicaStats) -> Vec<(usize, f64)> {
    stats
        .per_n
        .iter()
        .filter(|s| s.n >= 2)
        .map(|s| (s.n, s.variance * (s.n as f64).ln() / s.n as f64))
        .collect()
}

/// Second moments of single-site sensitivities at one probed site.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SiteInfluence {
    pub site: Site,
    /// The site lies on some path counted by the functional; otherwise every
    /// sensitivity is zero.
    pub reachable: bool,
    /// `E[Y^2]` with `Y = E~|ln Z_N(resampled) - ln Z_N|`.
    pub y_second_moment: f64,
    pub y_stderr: f64,
    /// Point-to-point analogues for `ln Z_N(z)`, split into total, positive
    /// and negative parts.
    pub l_second_moment: Option<f64>,
    pub l_stderr: Option<f64>,
    pub l_plus_second_moment: Option<f64>,
    pub l_plus_stderr: Option<f64>,
    pub l_minus_second_moment: Option<f64>,
    pub l_minus_stderr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfluenceReport {
    pub n: usize,
    pub endpoint: Option<Point>,
    pub replicas: usize,
    pub resamples: usize,
    pub sites: Vec<SiteInfluence>,
    /// `E[(sum over probed sites of Y)^2]`, the probed part of `Y_N`.
    pub aggregate_second_moment: f64,
    pub aggregate_stderr: f64,
    /// `exp(lambda(-2 beta) + 2 lambda(beta))`, the bound on the positive
    /// point-to-point second moment; `None` where `lambda` is infinite.
    pub l_plus_bound: Option<f64>,
}

struct ReplicaInfluence {
    y: Vec<f64>,
    l: Vec<(f64, f64, f64)>,
}

/// Resampling estimate of single-site influences on `ln Z_N` and, with an
/// endpoint, on `ln Z_N(z)`.
#[allow(clippy::too_many_arguments)]
pub fn site_influence(
    model: DisorderModel,
    params: &PolymerParams,
    sites: &[Site],
    endpoint: Option<Point>,
    replicas: usize,
    resamples: usize,
    base_seed: u64,
    caps: &ResourceCaps,
) -> Result<InfluenceReport> {
    if replicas < 2 || resamples < 1 {
        return Err(Error::Argument("need at least 2 replicas and 1 resample".into()));
    }
    if sites.is_empty() {
        return Err(Error::Argument("no sites to probe".into()));
    }
    if let Some(z) = endpoint {
        if params.d == Dim::One && z[1] != 0 {
            return Err(Error::Argument("d = 1 endpoint with a nonzero second coordinate".into()));
        }
    }
    caps.check_memory(
        "influence run",
        (replicas * sites.len() * 4 * 8 + lattice::layer_len(params.d.get(), params.n) * 16) as f64,
    )?;
    let n = params.n as i64;
    let end_site = endpoint.map(|z| Site::new(n, z));
    let on_cone = |s: &Site| s.n >= 1 && s.n <= n && s.reachable() && (params.d == Dim::Two || s.x[1] == 0);
    let reach_f: Vec<bool> = sites.iter().map(on_cone).collect();
    let reach_l: Vec<bool> = sites
        .iter()
        .map(|s| on_cone(s) && end_site.is_none_or(|e| s.reaches(&e) && e.reachable()))
        .collect();

    let per_replica: Vec<ReplicaInfluence> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let env = Environment::new(model, base_seed, r);
            let base = polymer::point_to_point_field(&env, params);
            let f0 = base.log_total();
            let l0 = endpoint.map(|z| base.value(z));
            let mut y = Vec::with_capacity(sites.len());
            let mut l = Vec::with_capacity(sites.len());
            for (i, site) in sites.iter().enumerate() {
                let (mut abs_f, mut abs_l, mut pos_l, mut neg_l) = (0.0, 0.0, 0.0, 0.0);
                if reach_f[i] && params.beta > 0.0 {
                    for j in 0..resamples {
                        let fresh = env::hash_words(INFLUENCE_DOMAIN, &[base_seed, r, i as u64, j as u64]);
                        let alt = env.resample_site(*site, fresh);
                        let field = polymer::point_to_point_field(&alt, params);
                        abs_f += (field.log_total() - f0).abs();
                        if let (Some(z), Some(l0)) = (endpoint, l0) {
                            if reach_l[i] {
                                let dl = field.value(z) - l0;
                                abs_l += dl.abs();
                                pos_l += dl.max(0.0);
                                neg_l += (-dl).max(0.0);
                            }
                        }
                    }
                }
                let k = resamples as f64;
                y.push(abs_f / k);
                l.push((abs_l / k, pos_l / k, neg_l / k));
            }
            ReplicaInfluence { y, l }
        })
        .collect();

    let squares = |f: &dyn Fn(&ReplicaInfluence) -> f64| {
        let v: Vec<f64> = per_replica.iter().map(|p| f(p).powi(2)).collect();
        let s = summarize(&v);
        (s.mean, s.stderr)
    };
    let site_reports = sites
        .iter()
        .enumerate()
        .map(|(i, site)| {
            let (y2, yse) = squares(&|p| p.y[i]);
            let (l, lp, lm) = if endpoint.is_some() {
                (
                    Some(squares(&|p| p.l[i].0)),
                    Some(squares(&|p| p.l[i].1)),
                    Some(squares(&|p| p.l[i].2)),
                )
            } else {
                (None, None, None)
            };
            SiteInfluence {
                site: *site,
                reachable: if endpoint.is_some() { reach_l[i] } else { reach_f[i] },
                y_second_moment: y2,
                y_stderr: yse,
                l_second_moment: l.map(|v| v.0),
                l_stderr: l.map(|v| v.1),
                l_plus_second_moment: lp.map(|v| v.0),
                l_plus_stderr: lp.map(|v| v.1),
                l_minus_second_moment: lm.map(|v| v.0),
                l_minus_stderr: lm.map(|v| v.1),
            }
        })
        .collect();
    let (agg, agg_se) = squares(&|p| p.y.iter().sum());
    let l_plus_bound = match (model.log_mgf(-2.0 * params.beta), model.log_mgf(params.beta)) {
        (Ok(a), Ok(b)) => Some((a + 2.0 * b).exp()),
        _ => None,
    };
    Ok(InfluenceReport {
        n: params.n,
        endpoint,
        replicas,
        resamples,
        sites: site_reports,
        aggregate_second_moment: agg,
        aggregate_stderr: agg_se,
        l_plus_bound,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentReport {
    pub n_grid: Vec<usize>,
    /// Half the slope of `ln Var(ln Z_N)` against `ln N`; `None` when some
    /// variance is zero.
    pub chi_hat: Option<f64>,
    pub chi_residual_rms: Option<f64>,
    /// Half the slope of `ln E_mu|x_N|^2` against `ln N`.
    pub xi_hat: f64,
    pub xi_residual_rms: f64,
    /// `chi_hat - (2 xi_hat - 1)`, a diagnostic only.
    pub hyperscaling_residual: Option<f64>,
    pub chi_undefined: bool,
}

pub fn scaling_exponents(n_grid: &[usize], variance: &[f64], msd: &[f64]) -> Result<ExponentReport> {
    if n_grid.len() < 4 {
        return Err(Error::Argument(format!("exponent fits need at least 4 grid points, got {}", n_grid.len())));
    }
    if variance.len() != n_grid.len() || msd.len() != n_grid.len() {
        return Err(Error::Argument("grid, variance and msd lengths differ".into()));
    }
    if msd.iter().any(|m| !(*m > 0.0)) {
        return Err(Error::Argument("mean squared displacements must be positive".into()));
    }
    let ln_n: Vec<f64> = n_grid.iter().map(|n| (*n as f64).ln()).collect();
    let xi = linear_fit(&ln_n, &msd.iter().map(|m| m.ln()).collect::<Vec<_>>())
        .ok_or_else(|| Error::Argument("degenerate N grid".into()))?;
    let chi_undefined = variance.iter().any(|v| !(*v > 0.0));
    let chi = if chi_undefined {
        None
    } else {
        linear_fit(&ln_n, &variance.iter().map(|v| v.ln()).collect::<Vec<_>>())
    };
    let xi_hat = xi.slope / 2.0;
    let chi_hat = chi.map(|f| f.slope / 2.0);
    Ok(ExponentReport {
        n_grid: n_grid.to_vec(),
        chi_hat,
        chi_residual_rms: chi.map(|f| f.residual_rms),
        xi_hat,
        xi_residual_rms: xi.residual_rms,
        hyperscaling_residual: chi_hat.map(|c| c - (2.0 * xi_hat - 1.0)),
        chi_undefined,
    })
}

/// [`scaling_exponents`] on the variance and displacement columns of a run.
pub fn exponents_from_stats(stats: &ReplicaStats) -> Result<ExponentReport> {
    let grid = stats.grid();
    let var: Vec<f64> = stats.per_n.iter().map(|s| s.variance).collect();
    let msd: Vec<f64> = stats.per_n.iter().map(|s| s.msd).collect();
    scaling_exponents(&grid, &var, &msd)
}
