//! Block coarse-graining: simple skeletons, their enumeration, the exact
//! decomposition of a point-to-point partition function over skeletons, the
//! inefficiency map `s(n, x)` and the adequate/efficient classification.

use rayon::prelude::*;
use serde::Serialize;

use crate::env::{DisorderModel, Environment, Point, Site};
use crate::error::{Error, Result};
use crate::estimators::ResourceCaps;
use crate::lattice;
use crate::polymer::{self, Dim, PolymerParams, Skeleton};
use crate::stats::summarize;

/// Slowly varying scale functions with a configurable constant `k13`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaleFns {
    pub k13: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaleValues {
    pub rho: f64,
    pub theta: f64,
    pub phi: u64,
}

impl Default for ScaleFns {
    fn default() -> Self {
        ScaleFns { k13: 1.0 }
    }
}

impl ScaleFns {
    pub fn new(k13: f64) -> Result<Self> {
        if !(k13.is_finite() && k13 > 0.0) {
            return Err(Error::Argument(format!("k13 must be positive and finite, got {k13}")));
        }
        Ok(ScaleFns { k13 })
    }

    /// `rho(m) = ln ln m / (k13 sqrt(ln m))`, `theta(m) = (ln m)^{5/2}`,
    /// `phi(m) = floor((ln m)^3)`.
    pub fn eval(&self, m: f64) -> Result<ScaleValues> {
        if !(m >= 3.0) {
            return Err(Error::Domain(format!("scale functions need m >= 3, got {m}")));
        }
        let l = m.ln();
        Ok(ScaleValues {
            rho: l.ln() / (self.k13 * l.sqrt()),
            theta: l.powf(2.5),
            phi: (l * l * l).floor() as u64,
        })
    }
}

pub fn scale_functions(m: f64, k13: f64) -> Result<ScaleValues> {
    ScaleFns::new(k13)?.eval(m)
}

/// Waypoints of `path` at layers `0, n, 2n, ...`.
///
/// `path` lists the sites visited at layers `0..=N`, starting at the origin.
pub fn simple_skeleton(path: &[Site], n: usize) -> Result<Skeleton> {
    if path.first() != Some(&Site::ORIGIN) {
        return Err(Error::Argument("path must start at the origin".into()));
    }
    for (k, w) in path.windows(2).enumerate() {
        let step = (w[1].x[0] - w[0].x[0]).abs() + (w[1].x[1] - w[0].x[1]).abs();
        if w[1].n != w[0].n + 1 || step != 1 {
            return Err(Error::Argument(format!("path is not a nearest-neighbour walk at step {}", k + 1)));
        }
    }
    let len = path.len() - 1;
    if n == 0 || len % n != 0 {
        return Err(Error::Argument(format!("path length {len} is not divisible by block length {n}")));
    }
    Skeleton::new(n, path.iter().step_by(n).copied().collect())
}

/// All simple skeletons with `k` blocks of length `n` from the origin to
/// `(k n, endpoint)`, in lexicographic lattice order. Refuses once more
/// than `cap` skeletons exist.
pub fn enumerate_skeletons(d: Dim, n: usize, k: usize, endpoint: Point, cap: u64) -> Result<Vec<Skeleton>> {
    if n == 0 || k == 0 {
        return Err(Error::Argument("block length and block count must be positive".into()));
    }
    if d == Dim::One && endpoint[1] != 0 {
        return Err(Error::Argument("d = 1 endpoint with a nonzero second coordinate".into()));
    }
    let end = Site::new((k * n) as i64, endpoint);
    if !end.reachable() {
        return Ok(Vec::new());
    }
    let offsets: Vec<Point> = (0..lattice::layer_len(d.get(), n)).map(|i| lattice::point_of(d.get(), n, i)).collect();
    let mut out = Vec::new();
    let mut stack = vec![Site::ORIGIN];
    enumerate_from(&offsets, n, k, end, cap, &mut stack, &mut out)?;
    Ok(out)
}

fn enumerate_from(
    offsets: &[Point],
    n: usize,
    k: usize,
    end: Site,
    cap: u64,
    stack: &mut Vec<Site>,
    out: &mut Vec<Skeleton>,
) -> Result<()> {
    let cur = *stack.last().expect("nonempty");
    if stack.len() == k {
        // last block is forced onto the endpoint
        if cur.reaches(&end) {
            if out.len() as u64 >= cap {
                return Err(Error::ResourceCap(format!("more than {cap} skeletons")));
            }
            let mut waypoints = stack.clone();
            waypoints.push(end);
            out.push(Skeleton::new(n, waypoints)?);
        }
        return Ok(());
    }
    for off in offsets {
        let next = Site::new(cur.n + n as i64, [cur.x[0] + off[0], cur.x[1] + off[1]]);
        if next.reaches(&end) {
            stack.push(next);
            enumerate_from(offsets, n, k, end, cap, stack, out)?;
            stack.pop();
        }
    }
    Ok(())
}

/// Outcome of comparing the skeleton decomposition with the direct value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionCheck {
    pub skeletons: usize,
    /// `ln sum_S Z_N(S)`.
    pub decomposed: f64,
    /// `ln Z_N(endpoint)` from a single transfer-matrix pass.
    pub direct: f64,
    pub residual: f64,
}

/// Sums `Z_N(S)` over every skeleton with block length `n` ending at
/// `endpoint` and compares with `Z_N(endpoint)`.
pub fn decomposition_check(
    env: &Environment,
    params: &PolymerParams,
    n: usize,
    endpoint: Point,
    cap: u64,
) -> Result<DecompositionCheck> {
    if n == 0 || params.n % n != 0 {
        return Err(Error::Argument(format!(
            "path length {} is not divisible by block length {n}",
            params.n
        )));
    }
    let skels = enumerate_skeletons(params.d, n, params.n / n, endpoint, cap)?;
    let parts = skels
        .iter()
        .map(|s| polymer::log_partition_skeleton(env, params, s))
        .collect::<Result<Vec<_>>>()?;
    let decomposed = lattice::log_sum_exp(&parts);
    let direct = polymer::log_partition_p2p(env, params, endpoint);
    let residual = if decomposed == direct { 0.0 } else { (decomposed - direct).abs() };
    Ok(DecompositionCheck { skeletons: skels.len(), decomposed, direct, residual })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SEntry {
    pub x: Point,
    pub s_hat: f64,
    pub stderr: f64,
}

/// Monte Carlo estimate of `s(n, x) = n p - E ln Z_n(x)` with `p` replaced by
/// a plug-in estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SMap {
    pub d: Dim,
    pub n: usize,
    pub beta: f64,
    pub p_hat: f64,
    pub replicas: usize,
    /// Every reachable `x` at layer `n`, in lattice order.
    pub entries: Vec<SEntry>,
    pub note: String,
}

impl SMap {
    pub fn get(&self, x: Point) -> Option<&SEntry> {
        self.entries.iter().find(|e| e.x == x)
    }
}

pub const SMAP_BIAS_NOTE: &str =
    "p_hat is a lower-biased plug-in for p, so s_hat is biased toward smaller values; labels are relative to the plug-in";

/// One transfer-matrix pass per replica gives `ln Z_n(x)` for every `x`.
#[allow(clippy::too_many_arguments)]
pub fn s_map(
    model: DisorderModel,
    d: Dim,
    n: usize,
    beta: f64,
    replicas: usize,
    p_hat: f64,
    base_seed: u64,
    caps: &ResourceCaps,
) -> Result<SMap> {
    if n < 3 {
        return Err(Error::Argument(format!("s-map needs block length n >= 3, got {n}")));
    }
    if replicas < 1 {
        return Err(Error::Argument("at least one replica is required".into()));
    }
    let params = PolymerParams::new(d.get(), n, beta)?;
    let width = lattice::layer_len(d.get(), n);
    caps.check_memory("s-map", (replicas * width * 8) as f64)?;
    let fields: Vec<Vec<f64>> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let env = Environment::new(model, base_seed, r);
            polymer::point_to_point_field(&env, &params).values().to_vec()
        })
        .collect();
    let mut column = vec![0.0; replicas];
    let entries = (0..width)
        .map(|i| {
            for (c, f) in column.iter_mut().zip(&fields) {
                *c = f[i];
            }
            let s = summarize(&column);
            SEntry { x: lattice::point_of(d.get(), n, i), s_hat: n as f64 * p_hat - s.mean, stderr: s.stderr }
        })
        .collect();
    Ok(SMap { d, n, beta, p_hat, replicas, entries, note: SMAP_BIAS_NOTE.into() })
}

/// Paired comparison behind the subadditivity of `s`: pointwise
/// `ln Z_{2n}(0) >= ln Z_n(x) + ln Z((n, x) -> (2n, 0))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubadditivityShadow {
    pub n: usize,
    pub x: Point,
    pub lhs_mean: f64,
    pub rhs_mean: f64,
    /// Mean and standard error of the paired difference `lhs - rhs`.
    pub diff_mean: f64,
    pub diff_stderr: f64,
    pub holds: bool,
}

pub fn subadditivity_shadow(
    model: DisorderModel,
    d: Dim,
    n: usize,
    beta: f64,
    x: Point,
    replicas: usize,
    base_seed: u64,
) -> Result<SubadditivityShadow> {
    let params = PolymerParams::new(d.get(), n, beta)?;
    let mid = Site::new(n as i64, x);
    let end = Site::new(2 * n as i64, [0, 0]);
    if !mid.reachable() || !mid.reaches(&end) || (d == Dim::One && x[1] != 0) {
        return Err(Error::Argument(format!("{mid} does not lie on a path from the origin to {end}")));
    }
    let rows: Vec<(f64, f64)> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let env = Environment::new(model, base_seed, r);
            let lhs = polymer::log_partition_p2p(&env, &params.with_n(2 * n), [0, 0]);
            let first = polymer::log_partition_p2p(&env, &params, x);
            let second = polymer::log_partition_between(&env, d, mid, end, beta).expect("layers ordered");
            (lhs, first + second)
        })
        .collect();
    let lhs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let rhs: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let diff: Vec<f64> = rows.iter().map(|r| r.0 - r.1).collect();
    let ds = summarize(&diff);
    Ok(SubadditivityShadow {
        n,
        x,
        lhs_mean: summarize(&lhs).mean,
        rhs_mean: summarize(&rhs).mean,
        diff_mean: ds.mean,
        diff_stderr: ds.stderr,
        holds: ds.mean >= -3.0 * ds.stderr,
    })
}

/// Adequate and efficient increments of an s-map.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub n: usize,
    pub k13: f64,
    /// Scale point used in the efficiency threshold (defaults to `n`).
    pub m: f64,
    pub adequate_threshold: f64,
    pub efficient_threshold: f64,
    pub adequate: Vec<Point>,
    pub efficient: Vec<Point>,
    /// Largest `|x|_inf` over adequate `x`; `None` when no site is adequate.
    pub h_n: Option<i64>,
    pub phi_n: u64,
    pub u_n: i64,
    /// `2 floor(h_n / (2 phi(n)))` fell below 2 and was raised to 2.
    pub u_n_clamped: bool,
    pub note: String,
}

/// Adequate iff `s_hat <= sqrt(n) theta(n)`; efficient iff
/// `s_hat <= 4 sqrt(n) rho(n)`.
pub fn classify(smap: &SMap, scale: &ScaleFns) -> Result<Classification> {
    classify_at(smap, scale, smap.n as f64)
}

/// As [`classify`] with the efficiency threshold `4 sqrt(n) rho(m)`.
pub fn classify_at(smap: &SMap, scale: &ScaleFns, m: f64) -> Result<Classification> {
    if smap.entries.is_empty() {
        return Err(Error::Argument("empty s-map".into()));
    }
    let at_n = scale.eval(smap.n as f64)?;
    let at_m = scale.eval(m)?;
    let root_n = (smap.n as f64).sqrt();
    let adequate_threshold = root_n * at_n.theta;
    let efficient_threshold = 4.0 * root_n * at_m.rho;
    let adequate: Vec<Point> =
        smap.entries.iter().filter(|e| e.s_hat <= adequate_threshold).map(|e| e.x).collect();
    let efficient: Vec<Point> =
        smap.entries.iter().filter(|e| e.s_hat <= efficient_threshold).map(|e| e.x).collect();
    let h_n = adequate.iter().map(|x| x[0].abs().max(x[1].abs())).max();
    let raw = 2 * (h_n.unwrap_or(0) / (2 * at_n.phi.max(1) as i64));
    let u_n_clamped = raw < 2;
    Ok(Classification {
        n: smap.n,
        k13: scale.k13,
        m,
        adequate_threshold,
        efficient_threshold,
        adequate,
        efficient,
        h_n,
        phi_n: at_n.phi,
        u_n: raw.max(2),
        u_n_clamped,
        note: smap.note.clone(),
    })
}
