//! Exact log-space transfer-matrix evaluation of directed-polymer partition
//! functions.
//!
//! For a walk started at `origin` the engine carries, layer by layer, the
//! field `log E[exp(beta * sum omega) ; x_k = z]` over every reachable
//! displacement `z`. Each step is a log-sum-exp over the `2d` predecessors,
//! minus `ln(2d)` for the uniform step kernel, plus `beta * omega` at the new
//! site. Empty path sets are carried as `-inf`.
//!
//! Layer 0 (the starting site) carries no disorder weight; layers `1..=N`
//! do.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::env::{Environment, Point, Site};
use crate::error::{Error, Result};
use crate::lattice::{self, log_add, LogAccumulator};

/// Transverse dimension of the walk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Dim {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

impl Dim {
    pub fn new(d: usize) -> Result<Self> {
        match d {
            1 => Ok(Dim::One),
            2 => Ok(Dim::Two),
            _ => Err(Error::Argument(format!("dimension must be 1 or 2, got {d}"))),
        }
    }

    pub fn get(self) -> usize {
        match self {
            Dim::One => 1,
            Dim::Two => 2,
        }
    }

    /// `ln(2d)`, the log of the number of nearest-neighbour steps.
    pub fn ln_coordination(self) -> f64 {
        ((2 * self.get()) as f64).ln()
    }

    /// The `2d` unit steps, in a fixed order.
    pub fn steps(self) -> &'static [Point] {
        match self {
            Dim::One => &[[1, 0], [-1, 0]],
            Dim::Two => &[[1, 0], [-1, 0], [0, 1], [0, -1]],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolymerParams {
    pub d: Dim,
    /// Path length `N`.
    pub n: usize,
    pub beta: f64,
}

impl PolymerParams {
    pub fn new(d: usize, n: usize, beta: f64) -> Result<Self> {
        let d = Dim::new(d)?;
        if n < 1 {
            return Err(Error::Argument("path length must be at least 1".into()));
        }
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::Argument(format!("beta must be finite and >= 0, got {beta}")));
        }
        Ok(PolymerParams { d, n, beta })
    }

    pub fn with_n(self, n: usize) -> Self {
        PolymerParams { n, ..self }
    }
}

/// Log point-to-point partition values over one layer, keyed by displacement
/// from the walk's starting site.
#[derive(Debug, Clone, PartialEq)]
pub struct LogZField {
    d: Dim,
    origin: Site,
    steps: usize,
    values: Vec<f64>,
}

impl LogZField {
    fn start(d: Dim, origin: Site) -> Self {
        LogZField { d, origin, steps: 0, values: vec![0.0] }
    }

    pub fn dim(&self) -> Dim {
        self.d
    }

    pub fn origin(&self) -> Site {
        self.origin
    }

    /// Number of steps taken from the origin.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Absolute time coordinate of this layer.
    pub fn layer(&self) -> i64 {
        self.origin.n + self.steps as i64
    }

    /// Raw values in the layer's flat layout (see [`crate::lattice`]).
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Log weight at displacement `z`; `-inf` when `z` is not reachable.
    pub fn value(&self, z: Point) -> f64 {
        lattice::index_of(self.d.get(), self.steps, z)
            .map_or(f64::NEG_INFINITY, |i| self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (Point, f64)> + '_ {
        let (d, steps) = (self.d.get(), self.steps);
        self.values
            .iter()
            .enumerate()
            .map(move |(i, v)| (lattice::point_of(d, steps, i), *v))
    }

    /// Log of the total weight of the layer (the point-to-line value).
    pub fn log_total(&self) -> f64 {
        lattice::log_sum_exp(&self.values)
    }

    /// Keeps only displacement `z`; everything else becomes `-inf`.
    pub fn retain_only(&mut self, z: Point) {
        let keep = lattice::index_of(self.d.get(), self.steps, z);
        for (i, v) in self.values.iter_mut().enumerate() {
            if Some(i) != keep {
                *v = f64::NEG_INFINITY;
            }
        }
    }

    /// Quenched mean squared endpoint displacement `sum_z p(z) |z|^2`.
    pub fn mean_square_displacement(&self) -> f64 {
        let total = self.log_total();
        self.iter()
            .map(|(z, v)| (v - total).exp() * (z[0] * z[0] + z[1] * z[1]) as f64)
            .sum()
    }
}

/// Layer-by-layer evaluator for a walk started at `origin`.
pub struct TransferMatrix<'a> {
    env: &'a Environment,
    beta: f64,
    field: LogZField,
    scratch: Vec<f64>,
}

impl<'a> TransferMatrix<'a> {
    pub fn new(env: &'a Environment, d: Dim, beta: f64, origin: Site) -> Self {
        TransferMatrix { env, beta, field: LogZField::start(d, origin), scratch: Vec::new() }
    }

    pub fn field(&self) -> &LogZField {
        &self.field
    }

    pub fn field_mut(&mut self) -> &mut LogZField {
        &mut self.field
    }

    pub fn into_field(self) -> LogZField {
        self.field
    }

    pub fn advance(&mut self, steps: usize) {
        for _ in 0..steps {
            self.step();
        }
    }

    /// Extends the field by one layer.
    pub fn step(&mut self) {
        let steps = self.field.steps + 1;
        let origin = self.field.origin;
        let layer = origin.n + steps as i64;
        let ln2d = self.field.d.ln_coordination();
        let (env, beta) = (self.env, self.beta);
        let weight = |x0: i64, x1: i64| {
            if beta == 0.0 {
                0.0
            } else {
                beta * env.omega_at(layer, origin.x[0] + x0, origin.x[1] + x1)
            }
        };
        let prev = &self.field.values;
        let next = &mut self.scratch;
        next.clear();
        match self.field.d {
            Dim::One => {
                next.reserve(steps + 1);
                for i in 0..=steps {
                    let a = if i > 0 { prev[i - 1] } else { f64::NEG_INFINITY };
                    let b = if i < steps { prev[i] } else { f64::NEG_INFINITY };
                    let s = log_add(a, b);
                    if s == f64::NEG_INFINITY {
                        next.push(s);
                    } else {
                        let x = 2 * i as i64 - steps as i64;
                        next.push(s - ln2d + weight(x, 0));
                    }
                }
            }
            Dim::Two => {
                let side = steps + 1;
                let prev_side = steps;
                next.reserve(side * side);
                let at = |i: usize, j: usize| -> f64 {
                    if i >= 1 && j >= 1 && i <= prev_side && j <= prev_side {
                        prev[(i - 1) * prev_side + (j - 1)]
                    } else {
                        f64::NEG_INFINITY
                    }
                };
                for i in 0..side {
                    for j in 0..side {
                        // predecessors (i-1|i, j-1|j) in the previous layer,
                        // shifted by one so out-of-range maps to -inf
                        let s = log_sum_exp4(at(i, j), at(i, j + 1), at(i + 1, j), at(i + 1, j + 1));
                        if s == f64::NEG_INFINITY {
                            next.push(s);
                        } else {
                            let u = 2 * i as i64 - steps as i64;
                            let v = 2 * j as i64 - steps as i64;
                            next.push(s - ln2d + weight((u + v) / 2, (u - v) / 2));
                        }
                    }
                }
            }
        }
        std::mem::swap(&mut self.field.values, &mut self.scratch);
        self.field.steps = steps;
    }
}

#[inline]
fn log_sum_exp4(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let m = a.max(b).max(c.max(d));
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp() + (c - m).exp() + (d - m).exp()).ln()
}

/// Final-layer field `log Z_N(z)` for all `z`.
pub fn point_to_point_field(env: &Environment, params: &PolymerParams) -> LogZField {
    let mut tm = TransferMatrix::new(env, params.d, params.beta, Site::ORIGIN);
    tm.advance(params.n);
    tm.into_field()
}

/// `log Z_N`, the point-to-line log partition function.
pub fn log_partition(env: &Environment, params: &PolymerParams) -> f64 {
    if params.beta == 0.0 {
        return 0.0;
    }
    point_to_point_field(env, params).log_total()
}

/// `log Z_N(z)`; `-inf` when `z` cannot be reached in `N` steps.
pub fn log_partition_p2p(env: &Environment, params: &PolymerParams, z: Point) -> f64 {
    if lattice::index_of(params.d.get(), params.n, z).is_none() {
        return f64::NEG_INFINITY;
    }
    point_to_point_field(env, params).value(z)
}

/// Point-to-line log partition function of the walk started at `origin`,
/// i.e. in the environment translated by `origin`.
pub fn log_partition_shifted(env: &Environment, params: &PolymerParams, origin: Site) -> f64 {
    if params.beta == 0.0 {
        return 0.0;
    }
    let mut tm = TransferMatrix::new(env, params.d, params.beta, origin);
    tm.advance(params.n);
    tm.field().log_total()
}

/// Log partition function of walks from `start` constrained to end at `end`.
pub fn log_partition_between(env: &Environment, d: Dim, start: Site, end: Site, beta: f64) -> Result<f64> {
    if start.n >= end.n {
        return Err(Error::Argument(format!(
            "start layer {} must precede end layer {}",
            start.n, end.n
        )));
    }
    let steps = (end.n - start.n) as usize;
    let dz = [end.x[0] - start.x[0], end.x[1] - start.x[1]];
    if lattice::index_of(d.get(), steps, dz).is_none() {
        return Ok(f64::NEG_INFINITY);
    }
    let mut tm = TransferMatrix::new(env, d, beta, start);
    tm.advance(steps);
    Ok(tm.field().value(dz))
}

/// Waypoints of a path at layers `0, n, 2n, ..., kn`, starting at the origin.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Skeleton {
    block_length: usize,
    waypoints: Vec<Site>,
}

impl Skeleton {
    pub fn new(block_length: usize, waypoints: Vec<Site>) -> Result<Self> {
        if block_length == 0 {
            return Err(Error::Argument("block length must be positive".into()));
        }
        if waypoints.first() != Some(&Site::ORIGIN) {
            return Err(Error::Argument("skeleton must start at the origin (0, 0)".into()));
        }
        for (j, w) in waypoints.iter().enumerate() {
            if w.n != (j * block_length) as i64 {
                return Err(Error::Argument(format!(
                    "waypoint {j} sits at layer {} instead of {}",
                    w.n,
                    j * block_length
                )));
            }
        }
        Ok(Skeleton { block_length, waypoints })
    }

    pub fn block_length(&self) -> usize {
        self.block_length
    }

    pub fn waypoints(&self) -> &[Site] {
        &self.waypoints
    }

    /// Number of blocks `k`.
    pub fn blocks(&self) -> usize {
        self.waypoints.len() - 1
    }

    pub fn total_steps(&self) -> usize {
        self.blocks() * self.block_length
    }

    /// Every consecutive pair of waypoints can be joined by a walk segment.
    pub fn feasible(&self) -> bool {
        self.waypoints.windows(2).all(|w| w[0].reaches(&w[1]))
    }

    pub fn endpoint(&self) -> Site {
        *self.waypoints.last().expect("nonempty")
    }
}

fn check_skeleton_span(params: &PolymerParams, skel: &Skeleton) -> Result<()> {
    if skel.total_steps() != params.n {
        return Err(Error::Argument(format!(
            "skeleton spans {} steps but the path length is {}",
            skel.total_steps(),
            params.n
        )));
    }
    if params.d == Dim::One && skel.waypoints.iter().any(|w| w.x[1] != 0) {
        return Err(Error::Argument("d = 1 skeleton with a nonzero second coordinate".into()));
    }
    Ok(())
}

/// `log Z_N(S)`: walks passing through every waypoint of `skel`, evaluated by
/// a single forward pass that masks each waypoint layer.
pub fn log_partition_skeleton(env: &Environment, params: &PolymerParams, skel: &Skeleton) -> Result<f64> {
    check_skeleton_span(params, skel)?;
    let mut tm = TransferMatrix::new(env, params.d, params.beta, Site::ORIGIN);
    for w in &skel.waypoints[1..] {
        tm.advance(skel.block_length);
        tm.field_mut().retain_only(w.x);
    }
    Ok(tm.field().log_total())
}

/// `log Z_N(S)` as the sum of block partition functions between consecutive
/// waypoints.
pub fn log_partition_skeleton_blocks(
    env: &Environment,
    params: &PolymerParams,
    skel: &Skeleton,
) -> Result<f64> {
    check_skeleton_span(params, skel)?;
    let mut total = 0.0;
    for pair in skel.waypoints.windows(2) {
        total += log_partition_between(env, params.d, pair[0], pair[1], params.beta)?;
    }
    Ok(total)
}

/// Gibbs law of the endpoint `x_N`.
pub fn endpoint_distribution(env: &Environment, params: &PolymerParams) -> BTreeMap<Point, f64> {
    let field = point_to_point_field(env, params);
    let total = field.log_total();
    field.iter().map(|(z, v)| (z, (v - total).exp())).collect()
}

/// Gibbs probabilities `mu((m, y) in path)` for layers `1..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupationField {
    d: Dim,
    layers: Vec<Vec<f64>>,
}

impl OccupationField {
    pub fn path_length(&self) -> usize {
        self.layers.len()
    }

    /// Occupation probability of `site`; zero off the reachable cone.
    pub fn probability(&self, site: Site) -> f64 {
        if site.n < 1 || site.n as usize > self.layers.len() {
            return 0.0;
        }
        let m = site.n as usize;
        lattice::index_of(self.d.get(), m, site.x).map_or(0.0, |i| self.layers[m - 1][i])
    }

    pub fn layer_sum(&self, m: usize) -> f64 {
        self.layers[m - 1].iter().sum()
    }

    pub fn total(&self) -> f64 {
        self.layers.iter().flatten().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Site, f64)> + '_ {
        let d = self.d.get();
        self.layers.iter().enumerate().flat_map(move |(k, layer)| {
            let m = k + 1;
            layer
                .iter()
                .enumerate()
                .map(move |(i, p)| (Site::new(m as i64, lattice::point_of(d, m, i)), *p))
        })
    }
}

/// Forward-backward evaluation of all occupation probabilities.
pub fn occupation_probabilities(env: &Environment, params: &PolymerParams) -> OccupationField {
    let d = params.d.get();
    let ln2d = params.d.ln_coordination();
    let n = params.n;
    let mut forward = Vec::with_capacity(n + 1);
    let mut tm = TransferMatrix::new(env, params.d, params.beta, Site::ORIGIN);
    forward.push(tm.field().values().to_vec());
    for _ in 0..n {
        tm.step();
        forward.push(tm.field().values().to_vec());
    }
    let log_z = tm.field().log_total();

    // weight[m][i] = beta * omega at layer m, kept to avoid recomputing draws
    let weight = |m: usize, i: usize| {
        if params.beta == 0.0 {
            0.0
        } else {
            let x = lattice::point_of(d, m, i);
            params.beta * env.omega_at(m as i64, x[0], x[1])
        }
    };

    // backward[i] at layer m = log E_{(m, x_i)}[exp(beta * sum_{k > m} omega)]
    let mut backward = vec![0.0; lattice::layer_len(d, n)];
    let mut layers = vec![Vec::new(); n];
    for m in (1..=n).rev() {
        layers[m - 1] = forward[m]
            .iter()
            .zip(&backward)
            .map(|(f, b)| (f + b - log_z).exp())
            .collect();
        // successor weights at layer m for the recursion to layer m - 1
        let succ: Vec<f64> = backward
            .iter()
            .enumerate()
            .map(|(i, b)| b + weight(m, i))
            .collect();
        let prev_len = lattice::layer_len(d, m - 1);
        let mut prev = vec![f64::NEG_INFINITY; prev_len];
        match params.d {
            Dim::One => {
                for (i, p) in prev.iter_mut().enumerate() {
                    *p = log_add(succ[i], succ[i + 1]) - ln2d;
                }
            }
            Dim::Two => {
                let side = m;
                let next_side = m + 1;
                for i in 0..side {
                    for j in 0..side {
                        let s = |a: usize, b: usize| succ[a * next_side + b];
                        prev[i * side + j] =
                            log_sum_exp4(s(i, j), s(i, j + 1), s(i + 1, j), s(i + 1, j + 1)) - ln2d;
                    }
                }
            }
        }
        backward = prev;
    }
    OccupationField { d: params.d, layers }
}

/// Largest number of paths the brute-force oracle will enumerate.
pub const BRUTE_FORCE_CAP: u64 = 10_000_000;

/// Optional restriction on the paths summed by the brute-force oracle.
#[derive(Debug, Clone, Copy)]
pub enum PathConstraint<'a> {
    Free,
    Endpoint(Point),
    Skeleton(&'a Skeleton),
}

/// Exact enumeration of all `(2d)^N` paths. Reference for every other
/// evaluation in this module.
pub fn brute_force_log_partition(
    env: &Environment,
    params: &PolymerParams,
    constraint: PathConstraint<'_>,
) -> Result<f64> {
    let paths = ((2 * params.d.get()) as u64).checked_pow(params.n as u32);
    if paths.is_none_or(|p| p > BRUTE_FORCE_CAP) {
        return Err(Error::ResourceCap(format!(
            "brute force over (2d)^N = {}^{} paths exceeds the cap of {BRUTE_FORCE_CAP}",
            2 * params.d.get(),
            params.n
        )));
    }
    if let PathConstraint::Skeleton(s) = constraint {
        check_skeleton_span(params, s)?;
    }
    let mut acc = LogAccumulator::default();
    let mut walker = BruteForce { env, params, constraint, acc: &mut acc };
    walker.visit(0, [0, 0], 0.0);
    Ok(acc.value() - params.n as f64 * params.d.ln_coordination())
}

struct BruteForce<'a, 'b> {
    env: &'a Environment,
    params: &'a PolymerParams,
    constraint: PathConstraint<'a>,
    acc: &'b mut LogAccumulator,
}

impl BruteForce<'_, '_> {
    fn visit(&mut self, depth: usize, pos: Point, energy: f64) {
        if depth == self.params.n {
            let accept = match self.constraint {
                PathConstraint::Endpoint(z) => pos == z,
                _ => true,
            };
            if accept {
                self.acc.push(self.params.beta * energy);
            }
            return;
        }
        let next_depth = depth + 1;
        for step in self.params.d.steps() {
            let p = [pos[0] + step[0], pos[1] + step[1]];
            if let PathConstraint::Skeleton(s) = self.constraint {
                if next_depth % s.block_length() == 0 && s.waypoints()[next_depth / s.block_length()].x != p {
                    continue;
                }
            }
            let w = self.env.omega(Site::new(next_depth as i64, p));
            self.visit(next_depth, p, energy + w);
        }
    }
}
