//! Strict JSON experiment configuration.

use std::collections::BTreeMap;

use serde_json::{json, Map, Value};

use crate::env::{DisorderModel, Point, Site};
use crate::error::{Error, Result};
use crate::estimators::ResourceCaps;
use crate::polymer::Dim;

pub const TOP_KEYS: [&str; 14] = [
    "dimension",
    "beta",
    "disorder",
    "n_grid",
    "replicas",
    "seed",
    "t_grid",
    "block_length",
    "k13",
    "endpoint",
    "sites",
    "resamples",
    "ng",
    "caps",
];
const NG_KEYS: [&str; 5] = ["table", "b", "grid_points", "grid_range", "t"];
const CAP_KEYS: [&str; 2] = ["max_memory_mb", "max_enumeration"];

/// Nearly-gamma certification settings.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NgConfig {
    /// CSV of `y,h,H` rows used instead of the configured disorder law.
    pub table: Option<String>,
    pub b: Option<f64>,
    pub grid_points: usize,
    pub grid_range: Option<(f64, f64)>,
    /// Exponential moment to certify; defaults to `4 beta`.
    pub t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dimension: Dim,
    pub beta: f64,
    pub disorder: DisorderModel,
    pub n_grid: Vec<usize>,
    pub replicas: usize,
    pub seed: u64,
    pub t_grid: Vec<f64>,
    pub block_length: usize,
    pub k13: f64,
    pub endpoint: Option<Point>,
    pub sites: Option<Vec<Site>>,
    pub resamples: usize,
    pub ng: NgConfig,
    pub caps: ResourceCaps,
}

pub fn default_t_grid() -> Vec<f64> {
    (0..=16).map(|k| k as f64 * 0.25).collect()
}

struct Collector {
    errors: Vec<String>,
}

impl Collector {
    fn unknown_keys(&mut self, scope: &str, obj: &Map<String, Value>, allowed: &[&str]) {
        for key in obj.keys() {
            if !allowed.contains(&key.as_str()) {
                self.errors.push(format!(
                    "{scope}unknown key \"{key}\" (allowed: {})",
                    allowed.join(", ")
                ));
            }
        }
    }

    fn f64_in(&mut self, key: &str, v: &Value, ok: impl Fn(f64) -> bool, bounds: &str) -> Option<f64> {
        match v.as_f64() {
            Some(x) if ok(x) => Some(x),
            Some(x) => {
                self.errors.push(format!("{key}: {x} out of range ({bounds})"));
                None
            }
            None => {
                self.errors.push(format!("{key}: expected a number"));
                None
            }
        }
    }

    fn uint_min(&mut self, key: &str, v: &Value, min: u64) -> Option<u64> {
        match v.as_u64() {
            Some(x) if x >= min => Some(x),
            Some(x) => {
                self.errors.push(format!("{key}: {x} out of range (must be >= {min})"));
                None
            }
            None => {
                match v.as_i64() {
                    Some(x) => self.errors.push(format!("{key}: {x} out of range (must be >= {min})")),
                    None => self.errors.push(format!("{key}: expected a nonnegative integer")),
                }
                None
            }
        }
    }

    fn int(&mut self, key: &str, v: &Value) -> Option<i64> {
        let r = v.as_i64();
        if r.is_none() {
            self.errors.push(format!("{key}: expected an integer"));
        }
        r
    }

    fn array<'a>(&mut self, key: &str, v: &'a Value) -> Option<&'a Vec<Value>> {
        let r = v.as_array();
        if r.is_none() {
            self.errors.push(format!("{key}: expected an array"));
        }
        r
    }
}

/// Parses and validates a configuration, reporting every problem found.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let root: Value =
        serde_json::from_str(text).map_err(|e| Error::Config(vec![format!("not valid JSON: {e}")]))?;
    let Some(obj) = root.as_object() else {
        return Err(Error::Config(vec!["top level must be a JSON object".into()]));
    };
    let mut c = Collector { errors: Vec::new() };
    c.unknown_keys("", obj, &TOP_KEYS);
    let req = |c: &mut Collector, key: &str| -> Option<&Value> {
        let v = obj.get(key);
        if v.is_none() {
            c.errors.push(format!("{key}: missing required key"));
        }
        v
    };

    let dimension = req(&mut c, "dimension").and_then(|v| match v.as_u64() {
        Some(1) => Some(Dim::One),
        Some(2) => Some(Dim::Two),
        _ => {
            c.errors.push(format!("dimension: {v} out of range (must be 1 or 2)"));
            None
        }
    });
    let beta = req(&mut c, "beta").and_then(|v| c.f64_in("beta", v, |b| b >= 0.0 && b.is_finite(), ">= 0, finite"));
    let disorder = req(&mut c, "disorder").and_then(|v| parse_disorder(&mut c, v));
    let n_grid = req(&mut c, "n_grid").and_then(|v| {
        let arr = c.array("n_grid", v)?;
        let vals: Vec<Option<u64>> =
            arr.iter().enumerate().map(|(i, x)| c.uint_min(&format!("n_grid[{i}]"), x, 1)).collect();
        let vals: Option<Vec<usize>> = vals.into_iter().map(|x| x.map(|x| x as usize)).collect();
        let vals = vals?;
        if vals.is_empty() {
            c.errors.push("n_grid: must be nonempty".into());
            return None;
        }
        if vals.windows(2).any(|w| w[0] >= w[1]) {
            c.errors.push("n_grid: must be strictly increasing".into());
            return None;
        }
        Some(vals)
    });
    let replicas = req(&mut c, "replicas").and_then(|v| c.uint_min("replicas", v, 2)).map(|x| x as usize);
    let seed = req(&mut c, "seed").and_then(|v| {
        let r = v.as_u64();
        if r.is_none() {
            c.errors.push(format!("seed: {v} out of range (must be an integer in [0, 2^64))"));
        }
        r
    });
    let t_grid = match obj.get("t_grid") {
        None => Some(default_t_grid()),
        Some(v) => c.array("t_grid", v).and_then(|arr| {
            let vals: Option<Vec<f64>> = arr
                .iter()
                .enumerate()
                .map(|(i, x)| c.f64_in(&format!("t_grid[{i}]"), x, |t| t >= 0.0 && t.is_finite(), ">= 0, finite"))
                .collect();
            let vals = vals?;
            if vals.is_empty() {
                c.errors.push("t_grid: must be nonempty".into());
                return None;
            }
            if vals.windows(2).any(|w| w[0] >= w[1]) {
                c.errors.push("t_grid: must be strictly increasing".into());
                return None;
            }
            Some(vals)
        }),
    };
    let block_length = match obj.get("block_length") {
        None => Some(4),
        Some(v) => c.uint_min("block_length", v, 1).map(|x| x as usize),
    };
    let k13 = match obj.get("k13") {
        None => Some(1.0),
        Some(v) => c.f64_in("k13", v, |k| k > 0.0 && k.is_finite(), "> 0, finite"),
    };
    let d_len = dimension.map_or(2, |d| d.get());
    let endpoint = match obj.get("endpoint") {
        None => Some(None),
        Some(v) => c.array("endpoint", v).and_then(|arr| {
            if arr.len() != d_len {
                c.errors.push(format!("endpoint: expected {d_len} coordinates, got {}", arr.len()));
                return None;
            }
            let xs: Option<Vec<i64>> =
                arr.iter().enumerate().map(|(i, x)| c.int(&format!("endpoint[{i}]"), x)).collect();
            xs.map(|xs| Some([xs[0], xs.get(1).copied().unwrap_or(0)]))
        }),
    };
    let sites = match obj.get("sites") {
        None => Some(None),
        Some(v) => c.array("sites", v).and_then(|arr| {
            let mut out = Vec::new();
            let mut ok = true;
            for (i, s) in arr.iter().enumerate() {
                let key = format!("sites[{i}]");
                match s.as_array() {
                    Some(p) if p.len() == d_len + 1 => {
                        let xs: Option<Vec<i64>> = p.iter().map(|x| c.int(&key, x)).collect();
                        match xs {
                            Some(xs) if xs[0] >= 1 => {
                                out.push(Site::new(xs[0], [xs[1], xs.get(2).copied().unwrap_or(0)]))
                            }
                            Some(xs) => {
                                c.errors.push(format!("{key}: layer {} out of range (must be >= 1)", xs[0]));
                                ok = false;
                            }
                            None => ok = false,
                        }
                    }
                    _ => {
                        c.errors.push(format!("{key}: expected [m, x_1, ..., x_d] with d = {d_len}"));
                        ok = false;
                    }
                }
            }
            if out.is_empty() && ok {
                c.errors.push("sites: must be nonempty when given".into());
                ok = false;
            }
            ok.then_some(Some(out))
        }),
    };
    let resamples = match obj.get("resamples") {
        None => Some(8),
        Some(v) => c.uint_min("resamples", v, 1).map(|x| x as usize),
    };
    let ng = match obj.get("ng") {
        None => Some(NgConfig { grid_points: 2001, ..NgConfig::default() }),
        Some(v) => parse_ng(&mut c, v),
    };
    let caps = match obj.get("caps") {
        None => Some(ResourceCaps::default()),
        Some(v) => parse_caps(&mut c, v),
    };

    if !c.errors.is_empty() {
        return Err(Error::Config(c.errors));
    }
    Ok(ExperimentConfig {
        dimension: dimension.expect("validated"),
        beta: beta.expect("validated"),
        disorder: disorder.expect("validated"),
        n_grid: n_grid.expect("validated"),
        replicas: replicas.expect("validated"),
        seed: seed.expect("validated"),
        t_grid: t_grid.expect("validated"),
        block_length: block_length.expect("validated"),
        k13: k13.expect("validated"),
        endpoint: endpoint.expect("validated"),
        sites: sites.expect("validated"),
        resamples: resamples.expect("validated"),
        ng: ng.expect("validated"),
        caps: caps.expect("validated"),
    })
}

fn parse_disorder(c: &mut Collector, v: &Value) -> Option<DisorderModel> {
    let Some(obj) = v.as_object() else {
        c.errors.push("disorder: expected an object {\"kind\": ..., \"params\": {...}}".into());
        return None;
    };
    c.unknown_keys("disorder: ", obj, &["kind", "params"]);
    let Some(kind) = obj.get("kind").and_then(Value::as_str) else {
        c.errors.push("disorder.kind: missing or not a string".into());
        return None;
    };
    let mut params = BTreeMap::new();
    match obj.get("params") {
        None => {}
        Some(Value::Object(p)) => {
            for (k, x) in p {
                match x.as_f64() {
                    Some(x) => {
                        params.insert(k.clone(), x);
                    }
                    None => c.errors.push(format!("disorder.params.{k}: expected a number")),
                }
            }
        }
        Some(_) => c.errors.push("disorder.params: expected an object".into()),
    }
    match DisorderModel::from_parts(kind, &params) {
        Ok(m) => Some(m),
        Err(es) => {
            c.errors.extend(es);
            None
        }
    }
}

fn parse_ng(c: &mut Collector, v: &Value) -> Option<NgConfig> {
    let Some(obj) = v.as_object() else {
        c.errors.push("ng: expected an object".into());
        return None;
    };
    c.unknown_keys("ng: ", obj, &NG_KEYS);
    let before = c.errors.len();
    let table = match obj.get("table") {
        None => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => {
            c.errors.push("ng.table: expected a file path string".into());
            None
        }
    };
    let b = obj.get("b").and_then(|x| c.f64_in("ng.b", x, |b| b >= 0.0 && b.is_finite(), ">= 0, finite"));
    let grid_points = match obj.get("grid_points") {
        None => 2001,
        Some(x) => c.uint_min("ng.grid_points", x, 2).unwrap_or(0) as usize,
    };
    let grid_range = obj.get("grid_range").and_then(|x| {
        let arr = c.array("ng.grid_range", x)?;
        let vals: Vec<f64> = arr.iter().filter_map(Value::as_f64).collect();
        if vals.len() != 2 || arr.len() != 2 || !(vals[0] < vals[1]) {
            c.errors.push("ng.grid_range: expected [lo, hi] with lo < hi".into());
            return None;
        }
        Some((vals[0], vals[1]))
    });
    let t = obj.get("t").and_then(|x| c.f64_in("ng.t", x, |t| t.is_finite(), "finite"));
    (c.errors.len() == before).then_some(NgConfig { table, b, grid_points, grid_range, t })
}

fn parse_caps(c: &mut Collector, v: &Value) -> Option<ResourceCaps> {
    let Some(obj) = v.as_object() else {
        c.errors.push("caps: expected an object".into());
        return None;
    };
    c.unknown_keys("caps: ", obj, &CAP_KEYS);
    let before = c.errors.len();
    let defaults = ResourceCaps::default();
    let max_memory_mb = match obj.get("max_memory_mb") {
        None => defaults.max_memory_mb,
        Some(x) => c.f64_in("caps.max_memory_mb", x, |m| m > 0.0 && m.is_finite(), "> 0, finite").unwrap_or(0.0),
    };
    let max_enumeration = match obj.get("max_enumeration") {
        None => defaults.max_enumeration,
        Some(x) => c.uint_min("caps.max_enumeration", x, 1).unwrap_or(0),
    };
    (c.errors.len() == before).then_some(ResourceCaps { max_memory_mb, max_enumeration })
}

impl ExperimentConfig {
    /// Fully explicit JSON form; `parse_config` of its text returns `self`.
    pub fn to_json(&self) -> Value {
        let d = self.dimension.get();
        let params: Map<String, Value> =
            self.disorder.params().into_iter().map(|(k, v)| (k.to_string(), json!(v))).collect();
        let mut obj = Map::new();
        obj.insert("dimension".into(), json!(d));
        obj.insert("beta".into(), json!(self.beta));
        obj.insert("disorder".into(), json!({"kind": self.disorder.kind(), "params": params}));
        obj.insert("n_grid".into(), json!(self.n_grid));
        obj.insert("replicas".into(), json!(self.replicas));
        obj.insert("seed".into(), json!(self.seed));
        obj.insert("t_grid".into(), json!(self.t_grid));
        obj.insert("block_length".into(), json!(self.block_length));
        obj.insert("k13".into(), json!(self.k13));
        if let Some(z) = self.endpoint {
            obj.insert("endpoint".into(), json!(&z[..d]));
        }
        if let Some(sites) = &self.sites {
            let rows: Vec<Vec<i64>> = sites
                .iter()
                .map(|s| std::iter::once(s.n).chain(s.x[..d].iter().copied()).collect())
                .collect();
            obj.insert("sites".into(), json!(rows));
        }
        obj.insert("resamples".into(), json!(self.resamples));
        let mut ng = Map::new();
        if let Some(t) = &self.ng.table {
            ng.insert("table".into(), json!(t));
        }
        if let Some(b) = self.ng.b {
            ng.insert("b".into(), json!(b));
        }
        ng.insert("grid_points".into(), json!(self.ng.grid_points));
        if let Some((lo, hi)) = self.ng.grid_range {
            ng.insert("grid_range".into(), json!([lo, hi]));
        }
        if let Some(t) = self.ng.t {
            ng.insert("t".into(), json!(t));
        }
        obj.insert("ng".into(), Value::Object(ng));
        obj.insert(
            "caps".into(),
            json!({"max_memory_mb": self.caps.max_memory_mb, "max_enumeration": self.caps.max_enumeration}),
        );
        Value::Object(obj)
    }

    /// Advisory messages about model hypotheses that the run does not enforce.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let (_, hi) = self.disorder.mgf_interval();
        if 4.0 * self.beta >= hi {
            out.push(format!(
                "E exp(4 beta |omega|) is infinite for {} at beta = {} (needs beta < {}); concentration results assume it is finite",
                self.disorder.kind(),
                self.beta,
                hi / 4.0
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"dimension": 1, "disorder": {"kind": "gaussian", "params": {"sigma": 1}},
        "beta": 0.5, "n_grid": [16], "replicas": 100, "seed": 1}"#;

    #[test]
    fn minimal_config_parses() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.dimension, Dim::One);
        assert_eq!(c.n_grid, vec![16]);
        assert_eq!(c.replicas, 100);
        assert_eq!(c.seed, 1);
    }

    #[test]
    fn unknown_key_is_named() {
        let text = MINIMAL.replacen("\"dimension\"", "\"dimention\"", 1);
        let Err(Error::Config(errs)) = parse_config(&text) else { panic!("expected config error") };
        assert!(errs.iter().any(|e| e.contains("\"dimention\"")));
        assert!(errs.iter().any(|e| e.contains("dimension: missing")));
    }

    #[test]
    fn zero_path_length_is_a_range_error() {
        let text = MINIMAL.replace("[16]", "[0]");
        let Err(Error::Config(errs)) = parse_config(&text) else { panic!("expected config error") };
        assert!(errs.iter().any(|e| e.contains("n_grid[0]") && e.contains(">= 1")));
    }

    #[test]
    fn all_errors_are_reported() {
        let text = r#"{"dimension": 3, "beta": -1, "disorder": {"kind": "cauchy"}, "n_grid": [4, 2],
            "replicas": 1, "seed": -5, "bogus": true}"#;
        let Err(Error::Config(errs)) = parse_config(text) else { panic!("expected config error") };
        assert!(errs.len() >= 7, "{errs:?}");
    }

    #[test]
    fn round_trip() {
        let c = parse_config(MINIMAL).unwrap();
        let back = parse_config(&c.to_json().to_string()).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn exponential_moment_warning() {
        let text = MINIMAL.replace(r#""kind": "gaussian", "params": {"sigma": 1}"#, r#""kind": "centered_exponential", "params": {"rate": 1}"#);
        assert_eq!(parse_config(&text.replace("\"beta\": 0.5", "\"beta\": 0.2")).unwrap().warnings().len(), 0);
        let text = text.replace("\"beta\": 0.5", "\"beta\": 0.3");
        assert_eq!(parse_config(&text).unwrap().warnings().len(), 1);
    }
}
