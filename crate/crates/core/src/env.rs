//! Disorder laws and the seeded environment field `omega(n, x)`.
//!
//! The field is never stored. Each coordinate is drawn from a per-site
//! stream of uniforms produced by hashing `(base_seed, replica, n, x)`, so a
//! single coordinate can be replaced without touching any other, and a whole
//! experiment is a pure function of its seed.
//!
//! Uniforms use the 53-bit mantissa convention `u = (bits >> 11) * 2^-53`,
//! giving values in `[0, 1)`. Draws per law:
//!
//! * gaussian: Box-Muller cosine branch, `sigma * sqrt(-2 ln(1 - u0)) * cos(2 pi u1)`
//! * centered exponential: inversion, `-ln(1 - u0) / rate - 1 / rate`
//! * centered uniform: `(2 u0 - 1) * half_width`
//! * centered gamma: Marsaglia-Tsang on the same stream, minus `shape * scale`

use std::collections::BTreeMap;
use std::fmt;

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Transverse coordinates of a lattice point. In `d = 1` the second entry is
/// always zero.
pub type Point = [i64; 2];

/// A space-time lattice site `(n, x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Site {
    pub n: i64,
    pub x: Point,
}

impl Site {
    pub const ORIGIN: Site = Site { n: 0, x: [0, 0] };

    pub fn new(n: i64, x: Point) -> Self {
        Site { n, x }
    }

    /// Site of a one-dimensional walk.
    pub fn d1(n: i64, x: i64) -> Self {
        Site { n, x: [x, 0] }
    }

    pub fn d2(n: i64, x0: i64, x1: i64) -> Self {
        Site { n, x: [x0, x1] }
    }

    pub fn l1(&self) -> i64 {
        self.x[0].abs() + self.x[1].abs()
    }

    /// `n + x_1 + ... + x_d` is even.
    pub fn on_even_sublattice(&self) -> bool {
        (self.n + self.x[0] + self.x[1]).rem_euclid(2) == 0
    }

    /// Reachable from the origin by a nearest-neighbour directed walk.
    pub fn reachable(&self) -> bool {
        self.n >= 0 && self.on_even_sublattice() && self.l1() <= self.n
    }

    /// Whether a walk started at `self` can be at `other`.
    pub fn reaches(&self, other: &Site) -> bool {
        let dn = other.n - self.n;
        let dx = (other.x[0] - self.x[0]).abs() + (other.x[1] - self.x[1]).abs();
        dn >= 0 && dx <= dn && (dn + dx) % 2 == 0
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, [{}, {}])", self.n, self.x[0], self.x[1])
    }
}

/// Mean-zero, absolutely continuous disorder laws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DisorderModel {
    Gaussian { sigma: f64 },
    /// `Exp(rate) - 1/rate`.
    CenteredExponential { rate: f64 },
    /// `Gamma(shape, scale) - shape * scale`.
    CenteredGamma { shape: f64, scale: f64 },
    /// `Uniform(-half_width, half_width)`.
    CenteredUniform { half_width: f64 },
}

impl DisorderModel {
    pub const KINDS: [&'static str; 4] = [
        "gaussian",
        "centered_exponential",
        "centered_gamma",
        "centered_uniform",
    ];

    pub fn standard_gaussian() -> Self {
        DisorderModel::Gaussian { sigma: 1.0 }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            DisorderModel::Gaussian { .. } => "gaussian",
            DisorderModel::CenteredExponential { .. } => "centered_exponential",
            DisorderModel::CenteredGamma { .. } => "centered_gamma",
            DisorderModel::CenteredUniform { .. } => "centered_uniform",
        }
    }

    /// Parameter names accepted for `kind`, in serialization order.
    pub fn param_names(kind: &str) -> Option<&'static [&'static str]> {
        match kind {
            "gaussian" => Some(&["sigma"]),
            "centered_exponential" => Some(&["rate"]),
            "centered_gamma" => Some(&["shape", "scale"]),
            "centered_uniform" => Some(&["half_width"]),
            _ => None,
        }
    }

    pub fn params(&self) -> Vec<(&'static str, f64)> {
        match *self {
            DisorderModel::Gaussian { sigma } => vec![("sigma", sigma)],
            DisorderModel::CenteredExponential { rate } => vec![("rate", rate)],
            DisorderModel::CenteredGamma { shape, scale } => {
                vec![("shape", shape), ("scale", scale)]
            }
            DisorderModel::CenteredUniform { half_width } => vec![("half_width", half_width)],
        }
    }

    /// Builds a model from its kind name and named parameters, collecting
    /// every problem rather than stopping at the first.
    pub fn from_parts(kind: &str, params: &BTreeMap<String, f64>) -> std::result::Result<Self, Vec<String>> {
        let mut errors = Vec::new();
        let Some(names) = Self::param_names(kind) else {
            return Err(vec![format!(
                "disorder.kind: unknown kind \"{kind}\" (expected one of {})",
                Self::KINDS.join(", ")
            )]);
        };
        for key in params.keys() {
            if !names.contains(&key.as_str()) {
                errors.push(format!(
                    "disorder.params: unknown key \"{key}\" for kind \"{kind}\" (expected {})",
                    names.join(", ")
                ));
            }
        }
        let mut values = Vec::with_capacity(names.len());
        for name in names {
            match params.get(*name) {
                None => errors.push(format!("disorder.params.{name}: missing")),
                Some(v) if !(v.is_finite() && *v > 0.0) => {
                    errors.push(format!("disorder.params.{name}: must be a positive finite number, got {v}"))
                }
                Some(v) => values.push(*v),
            }
        }
        if !errors.is_empty() {
            return Err(errors);
        }
        Ok(match kind {
            "gaussian" => DisorderModel::Gaussian { sigma: values[0] },
            "centered_exponential" => DisorderModel::CenteredExponential { rate: values[0] },
            "centered_gamma" => DisorderModel::CenteredGamma { shape: values[0], scale: values[1] },
            _ => DisorderModel::CenteredUniform { half_width: values[0] },
        })
    }

    /// Open interval on which the log-moment generating function is finite.
    pub fn mgf_interval(&self) -> (f64, f64) {
        match *self {
            DisorderModel::Gaussian { .. } | DisorderModel::CenteredUniform { .. } => {
                (f64::NEG_INFINITY, f64::INFINITY)
            }
            DisorderModel::CenteredExponential { rate } => (f64::NEG_INFINITY, rate),
            DisorderModel::CenteredGamma { scale, .. } => (f64::NEG_INFINITY, 1.0 / scale),
        }
    }

    /// `lambda(theta) = log E[exp(theta * omega)]`, in closed form.
    pub fn log_mgf(&self, theta: f64) -> Result<f64> {
        let (lo, hi) = self.mgf_interval();
        if !(theta > lo && theta < hi) {
            return Err(Error::Domain(format!(
                "log_mgf of {} is finite only for theta in ({lo}, {hi}); got {theta}",
                self.kind()
            )));
        }
        Ok(match *self {
            DisorderModel::Gaussian { sigma } => 0.5 * sigma * sigma * theta * theta,
            DisorderModel::CenteredExponential { rate } => {
                let u = theta / rate;
                -u - (-u).ln_1p()
            }
            DisorderModel::CenteredGamma { shape, scale } => {
                let u = theta * scale;
                -shape * (u + (-u).ln_1p())
            }
            DisorderModel::CenteredUniform { half_width } => ln_sinhc(half_width * theta),
        })
    }

    pub fn variance(&self) -> f64 {
        match *self {
            DisorderModel::Gaussian { sigma } => sigma * sigma,
            DisorderModel::CenteredExponential { rate } => 1.0 / (rate * rate),
            DisorderModel::CenteredGamma { shape, scale } => shape * scale * scale,
            DisorderModel::CenteredUniform { half_width } => half_width * half_width / 3.0,
        }
    }

    /// Draws one value from the law using the given uniform stream.
    pub(crate) fn sample(&self, stream: &mut UniformStream) -> f64 {
        match *self {
            DisorderModel::Gaussian { sigma } => sigma * stream.standard_normal(),
            DisorderModel::CenteredExponential { rate } => {
                let u = stream.next_unit();
                -(-u).ln_1p() / rate - 1.0 / rate
            }
            DisorderModel::CenteredUniform { half_width } => (2.0 * stream.next_unit() - 1.0) * half_width,
            DisorderModel::CenteredGamma { shape, scale } => {
                scale * stream.standard_gamma(shape) - shape * scale
            }
        }
    }
}

/// `ln(sinh(a) / a)`, accurate for small and large `a`.
fn ln_sinhc(a: f64) -> f64 {
    let a = a.abs();
    if a < 1e-3 {
        let a2 = a * a;
        a2 / 6.0 - a2 * a2 / 180.0 + a2 * a2 * a2 / 2835.0
    } else {
        a + (-(-2.0 * a).exp()).ln_1p() - (2.0 * a).ln()
    }
}

impl Serialize for DisorderModel {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        struct Params<'a>(&'a DisorderModel);
        impl Serialize for Params<'_> {
            fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
                let params = self.0.params();
                let mut map = serializer.serialize_map(Some(params.len()))?;
                for (k, v) in params {
                    map.serialize_entry(k, &v)?;
                }
                map.end()
            }
        }
        let mut map = serializer.serialize_map(Some(2))?;
        map.serialize_entry("kind", self.kind())?;
        map.serialize_entry("params", &Params(self))?;
        map.end()
    }
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const ENV_DOMAIN: u64 = 0x706f_6c79_6d65_7201;
const RESAMPLE_DOMAIN: u64 = 0x7265_7361_6d70_6c65;

/// SplitMix64 finalizer.
#[inline]
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
pub(crate) fn absorb(h: u64, word: u64) -> u64 {
    mix64(h.wrapping_add(GOLDEN) ^ word)
}

/// Hash of an arbitrary list of words under a domain tag.
pub(crate) fn hash_words(domain: u64, words: &[u64]) -> u64 {
    words.iter().fold(mix64(domain), |h, &w| absorb(h, w))
}

/// Counter-based stream of uniforms attached to one key.
pub(crate) struct UniformStream {
    key: u64,
    counter: u64,
}

impl UniformStream {
    pub(crate) fn new(key: u64) -> Self {
        UniformStream { key, counter: 0 }
    }

    #[inline]
    pub(crate) fn next_bits(&mut self) -> u64 {
        let bits = mix64(self.key ^ self.counter.wrapping_add(1).wrapping_mul(GOLDEN));
        self.counter += 1;
        bits
    }

    /// Uniform on `[0, 1)` with 53 random mantissa bits.
    #[inline]
    pub(crate) fn next_unit(&mut self) -> f64 {
        (self.next_bits() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub(crate) fn standard_normal(&mut self) -> f64 {
        let u0 = self.next_unit();
        let u1 = self.next_unit();
        (-2.0 * (-u0).ln_1p()).sqrt() * (std::f64::consts::TAU * u1).cos()
    }

    fn standard_gamma(&mut self, shape: f64) -> f64 {
        if shape < 1.0 {
            let g = self.standard_gamma(shape + 1.0);
            let u = 1.0 - self.next_unit();
            return g * u.powf(1.0 / shape);
        }
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d).sqrt();
        loop {
            let x = self.standard_normal();
            let v = 1.0 + c * x;
            if v <= 0.0 {
                continue;
            }
            let v = v * v * v;
            let u = 1.0 - self.next_unit();
            let x2 = x * x;
            if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
                return d * v;
            }
        }
    }
}

/// One realisation of the disorder field, identified by `(model, base_seed,
/// replica)`, with an optional finite set of overridden coordinates.
///
/// Values are immutable; [`Environment::resample_site`] and
/// [`Environment::with_override`] return modified copies.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    model: DisorderModel,
    base_seed: u64,
    replica: u64,
    prefix: u64,
    overrides: BTreeMap<Site, f64>,
}

impl Environment {
    pub fn new(model: DisorderModel, base_seed: u64, replica: u64) -> Self {
        let prefix = absorb(absorb(mix64(ENV_DOMAIN), base_seed), replica);
        Environment { model, base_seed, replica, prefix, overrides: BTreeMap::new() }
    }

    pub fn model(&self) -> &DisorderModel {
        &self.model
    }

    pub fn base_seed(&self) -> u64 {
        self.base_seed
    }

    pub fn replica(&self) -> u64 {
        self.replica
    }

    pub fn overrides(&self) -> &BTreeMap<Site, f64> {
        &self.overrides
    }

    /// The disorder value at `site`.
    pub fn omega(&self, site: Site) -> f64 {
        self.omega_at(site.n, site.x[0], site.x[1])
    }

    #[inline]
    pub(crate) fn omega_at(&self, n: i64, x0: i64, x1: i64) -> f64 {
        if !self.overrides.is_empty() {
            if let Some(v) = self.overrides.get(&Site { n, x: [x0, x1] }) {
                return *v;
            }
        }
        let key = absorb(absorb(absorb(self.prefix, n as u64), x0 as u64), x1 as u64);
        self.model.sample(&mut UniformStream::new(key))
    }

    /// Copy of `self` with `site` pinned to `value`.
    pub fn with_override(&self, site: Site, value: f64) -> Self {
        let mut env = self.clone();
        env.overrides.insert(site, value);
        env
    }

    /// Copy of `self` in which the coordinate at `site` is replaced by an
    /// independent draw keyed on `fresh_seed`.
    pub fn resample_site(&self, site: Site, fresh_seed: u64) -> Self {
        let key = hash_words(
            RESAMPLE_DOMAIN,
            &[fresh_seed, site.n as u64, site.x[0] as u64, site.x[1] as u64],
        );
        let value = self.model.sample(&mut UniformStream::new(key));
        self.with_override(site, value)
    }
}
