//! Experiment dispatch: each subcommand turns a config into a CSV table and
//! a JSON summary.

use clap::ValueEnum;
use serde::Serialize;
use serde_json::{json, Value};

use crate::cli::config::ExperimentConfig;
use crate::cli::emit::{ResultRow, Table, SCHEMA_LINE};
use crate::env::{Environment, Point, Site};
use crate::error::{Error, Result};
use crate::estimators::{self, NStats};
use crate::nearly_gamma::{self, Density, TabulatedDensity};
use crate::polymer::{Dim, PolymerParams, TransferMatrix};
use crate::skeletons::{self, ScaleFns};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    Logz,
    Replicas,
    FreeEnergy,
    Concentration,
    Rate,
    Influence,
    Exponents,
    NgCert,
    Skeleton,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Logz => "logz",
            Experiment::Replicas => "replicas",
            Experiment::FreeEnergy => "free-energy",
            Experiment::Concentration => "concentration",
            Experiment::Rate => "rate",
            Experiment::Influence => "influence",
            Experiment::Exponents => "exponents",
            Experiment::NgCert => "ng-cert",
            Experiment::Skeleton => "skeleton",
        }
    }
}

/// Everything an experiment produces, not yet written anywhere.
pub struct Output {
    pub table: Table,
    pub summary: Value,
}

struct Ctx<'a> {
    exp: Experiment,
    cfg: &'a ExperimentConfig,
    metrics: Vec<ResultRow>,
}

impl Ctx<'_> {
    fn metric(&mut self, params: Value, metric: &str, value: Option<f64>, stderr: Option<f64>, units: &str) {
        let mut p = json!({
            "d": self.cfg.dimension.get(),
            "beta": self.cfg.beta,
            "disorder": self.cfg.disorder,
            "seed": self.cfg.seed,
        });
        if let (Some(base), Some(extra)) = (p.as_object_mut(), params.as_object()) {
            for (k, v) in extra {
                base.insert(k.clone(), v.clone());
            }
        }
        self.metrics.push(ResultRow {
            experiment: self.exp.name().into(),
            params: p,
            metric: metric.into(),
            value,
            stderr,
            units: units.into(),
        });
    }

    fn finish(self, table: Table, report: impl Serialize) -> Result<Output> {
        let report = serde_json::to_value(report).map_err(|e| Error::Numeric(format!("report serialization: {e}")))?;
        let summary = json!({
            "schema": SCHEMA_LINE.trim_start_matches("# "),
            "experiment": self.exp.name(),
            "config": self.cfg.to_json(),
            "warnings": self.cfg.warnings(),
            "metrics": self.metrics,
            "report": report,
        });
        Ok(Output { table, summary })
    }
}

pub fn run(exp: Experiment, cfg: &ExperimentConfig) -> Result<Output> {
    let ctx = Ctx { exp, cfg, metrics: Vec::new() };
    match exp {
        Experiment::Logz => logz(ctx),
        Experiment::Replicas => replicas(ctx),
        Experiment::FreeEnergy => free_energy(ctx),
        Experiment::Concentration => concentration(ctx),
        Experiment::Rate => rate(ctx),
        Experiment::Influence => influence(ctx),
        Experiment::Exponents => exponents(ctx),
        Experiment::NgCert => ng_cert(ctx),
        Experiment::Skeleton => skeleton(ctx),
    }
}

fn point_cells(d: Dim, x: Point) -> Vec<crate::cli::emit::Cell> {
    match d {
        Dim::One => vec![x[0].into()],
        Dim::Two => vec![x[0].into(), x[1].into()],
    }
}

fn coord_columns(d: Dim, prefix: &str) -> Vec<String> {
    (0..d.get()).map(|i| format!("{prefix}{i}")).collect()
}

fn logz(ctx: Ctx) -> Result<Output> {
    let cfg = ctx.cfg;
    let n_max = *cfg.n_grid.last().expect("validated");
    PolymerParams::new(cfg.dimension.get(), n_max, cfg.beta)?;
    let layer = crate::lattice::layer_len(cfg.dimension.get(), n_max) as f64 * 16.0;
    cfg.caps.check_memory("logz", layer + (cfg.replicas * cfg.n_grid.len() * 16) as f64)?;
    let mut cols = vec!["replica", "N", "log_z"];
    if cfg.endpoint.is_some() {
        cols.push("log_z_endpoint");
    }
    let mut table = Table::new("logz", &cols);
    use rayon::prelude::*;
    let rows: Vec<Vec<(f64, Option<f64>)>> = (0..cfg.replicas as u64)
        .into_par_iter()
        .map(|r| {
            let env = Environment::new(cfg.disorder, cfg.seed, r);
            let mut tm = TransferMatrix::new(&env, cfg.dimension, cfg.beta, Site::ORIGIN);
            cfg.n_grid
                .iter()
                .map(|&n| {
                    tm.advance(n - tm.field().steps());
                    let total = if cfg.beta == 0.0 { 0.0 } else { tm.field().log_total() };
                    (total, cfg.endpoint.map(|z| tm.field().value(z)))
                })
                .collect()
        })
        .collect();
    for (r, row) in rows.iter().enumerate() {
        for (&n, (lz, lp)) in cfg.n_grid.iter().zip(row) {
            let mut cells = vec![r.into(), n.into(), (*lz).into()];
            if cfg.endpoint.is_some() {
                cells.push((*lp).into());
            }
            table.push(cells);
        }
    }
    let report = json!({"rows": table.len(), "replicas": cfg.replicas, "n_grid": cfg.n_grid});
    ctx.finish(table, report)
}

fn run_stats(cfg: &ExperimentConfig) -> Result<estimators::ReplicaStats> {
    estimators::run_replicas(cfg.disorder, cfg.dimension, cfg.beta, &cfg.n_grid, cfg.replicas, cfg.seed, &cfg.caps)
}

fn stats_table(exp: &str, per_n: &[NStats]) -> Table {
    let mut table = Table::new(
        exp,
        &["N", "replicas", "mean", "variance", "stderr", "q01", "q05", "q25", "q50", "q75", "q95", "q99", "msd"],
    );
    for s in per_n {
        let q = &s.quantiles;
        table.push(vec![
            s.n.into(),
            s.replicas.into(),
            s.mean.into(),
            s.variance.into(),
            s.stderr.into(),
            q.q01.into(),
            q.q05.into(),
            q.q25.into(),
            q.q50.into(),
            q.q75.into(),
            q.q95.into(),
            q.q99.into(),
            s.msd.into(),
        ]);
    }
    table
}

fn replicas(mut ctx: Ctx) -> Result<Output> {
    let stats = run_stats(ctx.cfg)?;
    for s in &stats.per_n {
        ctx.metric(json!({"N": s.n, "replicas": s.replicas}), "mean_log_z", Some(s.mean), Some(s.stderr), "nats");
        ctx.metric(json!({"N": s.n, "replicas": s.replicas}), "var_log_z", Some(s.variance), None, "nats^2");
    }
    let table = stats_table("replicas", &stats.per_n);
    ctx.finish(table, &stats)
}

fn free_energy(mut ctx: Ctx) -> Result<Output> {
    let stats = run_stats(ctx.cfg)?;
    let fe = estimators::estimate_free_energy(&stats);
    let sandwich = estimators::jensen_sandwich(&stats).ok();
    let doubling = estimators::superadditivity_doubling(&stats);
    ctx.metric(json!({"argmax_N": fe.argmax_n}), "p_hat", Some(fe.p_hat), Some(fe.stderr), "nats per step");
    let mut table = Table::new("free-energy", &["N", "mean_over_n", "stderr_over_n"]);
    for s in &stats.per_n {
        table.push(vec![s.n.into(), (s.mean / s.n as f64).into(), (s.stderr / s.n as f64).into()]);
    }
    ctx.finish(table, json!({"free_energy": fe, "jensen_sandwich": sandwich, "doubling": doubling}))
}

fn concentration(mut ctx: Ctx) -> Result<Output> {
    let cfg = ctx.cfg;
    if cfg.n_grid[0] < 2 {
        return Err(Error::Argument("concentration needs every N >= 2".into()));
    }
    let stats = run_stats(cfg)?;
    let mut table = Table::new("concentration", &["N", "t", "exceedance"]);
    let mut profiles = Vec::new();
    for s in &stats.per_n {
        let p = estimators::concentration_from_samples(s.n, &s.samples, &cfg.t_grid)?;
        for (t, e) in p.t_grid.iter().zip(&p.exceedance) {
            table.push(vec![s.n.into(), (*t).into(), (*e).into()]);
        }
        ctx.metric(json!({"N": s.n, "replicas": s.replicas}), "fitted_log_slope", p.fitted_log_slope, None, "per unit t");
        profiles.push(p);
    }
    let scale = estimators::variance_scale(&stats);
    ctx.finish(table, json!({"profiles": profiles, "variance_scale": scale}))
}

fn rate(mut ctx: Ctx) -> Result<Output> {
    let stats = run_stats(ctx.cfg)?;
    let fe = estimators::estimate_free_energy(&stats);
    let report = estimators::convergence_gap(&stats, &fe);
    let mut table = Table::new("rate", &["N", "gap", "gap_stderr", "normalized_gap"]);
    for r in &report.rows {
        table.push(vec![r.n.into(), r.gap.into(), r.gap_stderr.into(), r.normalized_gap.into()]);
        ctx.metric(json!({"N": r.n, "p_hat_N": report.p_hat_n}), "gap", Some(r.gap), Some(r.gap_stderr), "nats");
    }
    ctx.finish(table, &report)
}

/// Up to ten on-axis sites spread over layers `1..=n`.
pub fn default_sites(n: usize) -> Vec<Site> {
    let mut layers: Vec<i64> = (1..=10).map(|k| ((k * n) as f64 / 10.0).round().max(1.0) as i64).collect();
    layers.dedup();
    layers.into_iter().map(|m| Site::new(m, [m % 2, 0])).collect()
}

fn influence(mut ctx: Ctx) -> Result<Output> {
    let cfg = ctx.cfg;
    let n = *cfg.n_grid.last().expect("validated");
    let params = PolymerParams::new(cfg.dimension.get(), n, cfg.beta)?;
    let sites = cfg.sites.clone().unwrap_or_else(|| default_sites(n));
    let report = estimators::site_influence(
        cfg.disorder,
        &params,
        &sites,
        cfg.endpoint,
        cfg.replicas,
        cfg.resamples,
        cfg.seed,
        &cfg.caps,
    )?;
    let d = cfg.dimension;
    let mut cols: Vec<String> = vec!["m".into()];
    cols.extend(coord_columns(d, "x"));
    for c in [
        "reachable",
        "y_second_moment",
        "y_stderr",
        "l_second_moment",
        "l_stderr",
        "l_plus_second_moment",
        "l_plus_stderr",
        "l_minus_second_moment",
        "l_minus_stderr",
    ] {
        cols.push(c.into());
    }
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut table = Table::new("influence", &col_refs);
    for s in &report.sites {
        let mut cells = vec![s.site.n.into()];
        cells.extend(point_cells(d, s.site.x));
        cells.extend([
            s.reachable.into(),
            s.y_second_moment.into(),
            s.y_stderr.into(),
            s.l_second_moment.into(),
            s.l_stderr.into(),
            s.l_plus_second_moment.into(),
            s.l_plus_stderr.into(),
            s.l_minus_second_moment.into(),
            s.l_minus_stderr.into(),
        ]);
        table.push(cells);
        ctx.metric(
            json!({"N": n, "site": s.site, "resamples": report.resamples}),
            "y_second_moment",
            Some(s.y_second_moment),
            Some(s.y_stderr),
            "nats^2",
        );
    }
    ctx.finish(table, &report)
}

fn exponents(mut ctx: Ctx) -> Result<Output> {
    let stats = run_stats(ctx.cfg)?;
    let report = estimators::exponents_from_stats(&stats)?;
    ctx.metric(json!({"n_grid": report.n_grid}), "chi_hat", report.chi_hat, None, "dimensionless");
    ctx.metric(json!({"n_grid": report.n_grid}), "xi_hat", Some(report.xi_hat), None, "dimensionless");
    let mut table = Table::new("exponents", &["N", "variance", "msd"]);
    for s in &stats.per_n {
        table.push(vec![s.n.into(), s.variance.into(), s.msd.into()]);
    }
    ctx.finish(table, &report)
}

fn ng_cert(mut ctx: Ctx) -> Result<Output> {
    let cfg = ctx.cfg;
    let tabulated = match &cfg.ng.table {
        Some(path) => Some(TabulatedDensity::from_csv(&std::fs::read_to_string(path)?)?),
        None => None,
    };
    let law: &dyn Density = match &tabulated {
        Some(t) => t,
        None => &cfg.disorder,
    };
    let grid = match cfg.ng.grid_range {
        Some((lo, hi)) => {
            let k = cfg.ng.grid_points;
            (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect()
        }
        None => nearly_gamma::default_grid(law, cfg.ng.grid_points)?,
    };
    let b = match cfg.ng.b {
        Some(b) => b,
        None => nearly_gamma::default_b(law)?,
    };
    let report = nearly_gamma::fit_envelope(law, &grid, b)?;
    let t = cfg.ng.t.unwrap_or(4.0 * cfg.beta);
    let certified = nearly_gamma::exp_moment_certificate(&report, t);
    let source = if cfg.ng.table.is_some() { "table" } else { cfg.disorder.kind() };
    ctx.metric(json!({"source": source, "B": b}), "A_fit", Some(report.a_fit), None, "dimensionless");
    ctx.metric(json!({"source": source, "t": t}), "exp_moment_certified", Some(certified as u8 as f64), None, "boolean");
    let mut table = Table::new("ng-cert", &["y", "psi", "tail_asymptotic"]);
    for ((y, p), a) in report.grid.iter().zip(&report.psi_values).zip(&report.tail_asymptotic) {
        table.push(vec![(*y).into(), (*p).into(), (*a).into()]);
    }
    ctx.finish(table, json!({"certificate": report, "t": t, "exp_moment_certified": certified, "source": source}))
}

fn skeleton(mut ctx: Ctx) -> Result<Output> {
    let cfg = ctx.cfg;
    let n = cfg.block_length;
    let stats = run_stats(cfg)?;
    let fe = estimators::estimate_free_energy(&stats);
    let smap = skeletons::s_map(
        cfg.disorder,
        cfg.dimension,
        n,
        cfg.beta,
        cfg.replicas,
        fe.p_hat,
        cfg.seed,
        &cfg.caps,
    )?;
    let scale = ScaleFns::new(cfg.k13)?;
    let class = skeletons::classify(&smap, &scale)?;
    let params = PolymerParams::new(cfg.dimension.get(), 2 * n, cfg.beta)?;
    let env = Environment::new(cfg.disorder, cfg.seed, 0);
    let decomposition =
        skeletons::decomposition_check(&env, &params, n, [0, 0], cfg.caps.max_enumeration)?;
    let d = cfg.dimension;
    let mut cols: Vec<String> = vec!["n".into()];
    cols.extend(coord_columns(d, "x"));
    cols.extend(["s_hat", "stderr", "adequate", "efficient"].map(String::from));
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut table = Table::new("skeleton", &col_refs);
    for e in &smap.entries {
        let mut cells = vec![n.into()];
        cells.extend(point_cells(d, e.x));
        cells.extend([
            e.s_hat.into(),
            e.stderr.into(),
            class.adequate.contains(&e.x).into(),
            class.efficient.contains(&e.x).into(),
        ]);
        table.push(cells);
    }
    ctx.metric(json!({"n": n, "k13": cfg.k13}), "h_n", class.h_n.map(|h| h as f64), None, "lattice units");
    ctx.metric(json!({"n": n, "k13": cfg.k13}), "u_n", Some(class.u_n as f64), None, "lattice units");
    ctx.metric(
        json!({"N": 2 * n, "n": n, "replica": 0}),
        "decomposition_residual",
        Some(decomposition.residual),
        None,
        "nats",
    );
    let subadd = skeletons::subadditivity_shadow(cfg.disorder, d, n, cfg.beta, [n as i64 % 2, 0], cfg.replicas, cfg.seed)?;
    ctx.finish(
        table,
        json!({"free_energy": fe, "s_map": smap, "classification": class, "decomposition": decomposition,
               "subadditivity": subadd}),
    )
}
