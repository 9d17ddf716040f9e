//! Numerical certification that a disorder law is nearly gamma.
//!
//! For a law with density `h` and distribution function `H` the key quantity
//! is `psi(y) = phi(Phi^{-1}(H(y))) / h(y)`, the derivative of the monotone
//! map `T = H^{-1} o Phi` that pushes a standard normal onto the law,
//! evaluated at `T^{-1}(y)`. The law is nearly gamma with parameters
//! `(A, B)` when `psi(y)^2 <= B + A |y|` on its support. A grid can only
//! certify this up to resolution; the endpoint and tail checks give the
//! classical sufficient conditions for the region beyond the grid.

use serde::Serialize;

use crate::env::DisorderModel;
use crate::error::{Error, Result};
use crate::special::{
    ln_std_normal_upper_tail, std_normal_cdf, std_normal_ln_pdf, std_normal_pdf,
    std_normal_quantile, std_normal_quantile_from_ln_tail,
};

/// Slack allowed in `psi^2 <= B + A |y|` before `A` is raised.
pub const ENVELOPE_SLACK: f64 = 1e-12;
/// Largest max/min ratio accepted as "bounded away from zero and infinity".
pub const BOUNDED_FACTOR: f64 = 10.0;
/// Below this tail mass `psi` switches to the log-tail evaluation path.
const TAIL_UNDERFLOW: f64 = 1e-300;

/// A continuous law on an interval: density, distribution function and
/// quantiles.
pub trait Density {
    /// Support interval `(lower, upper)`; endpoints may be infinite.
    fn support(&self) -> (f64, f64);

    fn pdf(&self, y: f64) -> f64;

    fn ln_pdf(&self, y: f64) -> f64 {
        self.pdf(y).ln()
    }

    fn cdf(&self, y: f64) -> f64;

    /// `1 - H(y)`; implementors should keep this accurate in the upper tail.
    fn sf(&self, y: f64) -> f64 {
        1.0 - self.cdf(y)
    }

    fn ln_cdf(&self, y: f64) -> f64 {
        self.cdf(y).ln()
    }

    fn ln_sf(&self, y: f64) -> f64 {
        self.sf(y).ln()
    }

    /// `H^{-1}(p)`.
    fn quantile(&self, p: f64) -> Result<f64> {
        bisect_monotone(self, p, |d, y| d.cdf(y), true)
    }

    /// The `y` with `1 - H(y) = q`.
    fn upper_quantile(&self, q: f64) -> Result<f64> {
        bisect_monotone(self, q, |d, y| d.sf(y), false)
    }
}

/// Monotone bracketing plus bisection to `1e-12` relative width.
fn bisect_monotone<D: Density + ?Sized>(
    law: &D,
    target: f64,
    f: impl Fn(&D, f64) -> f64,
    increasing: bool,
) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Numeric(format!("quantile level {target} outside (0, 1)")));
    }
    let (lo_s, hi_s) = law.support();
    // g(y) < 0 left of the root, > 0 right of it
    let g = |y: f64| {
        let v = f(law, y) - target;
        if increasing {
            v
        } else {
            -v
        }
    };
    let mut lo = if lo_s.is_finite() { lo_s } else { -1.0 };
    let mut hi = if hi_s.is_finite() { hi_s } else { 1.0 };
    let mut expansions = 0;
    while !lo_s.is_finite() && g(lo) > 0.0 {
        lo *= 2.0;
        expansions += 1;
        if expansions > 1100 {
            return Err(Error::Numeric(format!(
                "could not bracket quantile level {target} from below (reached y = {lo})"
            )));
        }
    }
    while !hi_s.is_finite() && g(hi) < 0.0 {
        hi *= 2.0;
        expansions += 1;
        if expansions > 1100 {
            return Err(Error::Numeric(format!(
                "could not bracket quantile level {target} from above (reached y = {hi})"
            )));
        }
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-12 * mid.abs().max(1.0) || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

impl Density for DisorderModel {
    fn support(&self) -> (f64, f64) {
        match *self {
            DisorderModel::Gaussian { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            DisorderModel::CenteredExponential { rate } => (-1.0 / rate, f64::INFINITY),
            DisorderModel::CenteredGamma { shape, scale } => (-shape * scale, f64::INFINITY),
            DisorderModel::CenteredUniform { half_width } => (-half_width, half_width),
        }
    }

    fn pdf(&self, y: f64) -> f64 {
        match *self {
            DisorderModel::Gaussian { sigma } => std_normal_pdf(y / sigma) / sigma,
            DisorderModel::CenteredUniform { half_width } => {
                if y.abs() <= half_width {
                    0.5 / half_width
                } else {
                    0.0
                }
            }
            _ => self.ln_pdf(y).exp(),
        }
    }

    fn ln_pdf(&self, y: f64) -> f64 {
        match *self {
            DisorderModel::Gaussian { sigma } => std_normal_ln_pdf(y / sigma) - sigma.ln(),
            DisorderModel::CenteredExponential { rate } => {
                let t = y + 1.0 / rate;
                if t < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    rate.ln() - rate * t
                }
            }
            DisorderModel::CenteredGamma { shape, scale } => {
                let t = y + shape * scale;
                if t < 0.0 {
                    return f64::NEG_INFINITY;
                }
                if t == 0.0 {
                    return match shape.partial_cmp(&1.0) {
                        Some(std::cmp::Ordering::Less) => f64::INFINITY,
                        Some(std::cmp::Ordering::Equal) => -scale.ln(),
                        _ => f64::NEG_INFINITY,
                    };
                }
                (shape - 1.0) * t.ln() - t / scale - statrs::function::gamma::ln_gamma(shape) - shape * scale.ln()
            }
            DisorderModel::CenteredUniform { .. } => self.pdf(y).ln(),
        }
    }

    fn cdf(&self, y: f64) -> f64 {
        match *self {
            DisorderModel::Gaussian { sigma } => std_normal_cdf(y / sigma),
            DisorderModel::CenteredExponential { rate } => {
                let t = (y + 1.0 / rate).max(0.0);
                -(-rate * t).exp_m1()
            }
            DisorderModel::CenteredGamma { shape, scale } => {
                let t = (y + shape * scale).max(0.0);
                statrs::function::gamma::gamma_lr(shape, t / scale)
            }
            DisorderModel::CenteredUniform { half_width } => {
                ((y + half_width) / (2.0 * half_width)).clamp(0.0, 1.0)
            }
        }
    }

    fn sf(&self, y: f64) -> f64 {
        match *self {
            DisorderModel::Gaussian { sigma } => std_normal_cdf(-y / sigma),
            DisorderModel::CenteredExponential { rate } => {
                (-rate * (y + 1.0 / rate).max(0.0)).exp()
            }
            DisorderModel::CenteredGamma { shape, scale } => {
                let t = (y + shape * scale).max(0.0);
                statrs::function::gamma::gamma_ur(shape, t / scale)
            }
            DisorderModel::CenteredUniform { half_width } => {
                ((half_width - y) / (2.0 * half_width)).clamp(0.0, 1.0)
            }
        }
    }

    fn ln_cdf(&self, y: f64) -> f64 {
        match *self {
            DisorderModel::Gaussian { sigma } if y < 0.0 => ln_std_normal_upper_tail(-y / sigma),
            _ => self.cdf(y).ln(),
        }
    }

    fn ln_sf(&self, y: f64) -> f64 {
        match *self {
            DisorderModel::Gaussian { sigma } if y > 0.0 => ln_std_normal_upper_tail(y / sigma),
            DisorderModel::CenteredExponential { rate } => -rate * (y + 1.0 / rate).max(0.0),
            _ => self.sf(y).ln(),
        }
    }

    fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Numeric(format!("quantile level {p} outside (0, 1)")));
        }
        match *self {
            DisorderModel::Gaussian { sigma } => Ok(sigma * std_normal_quantile(p)),
            DisorderModel::CenteredExponential { rate } => Ok(-(-p).ln_1p() / rate - 1.0 / rate),
            DisorderModel::CenteredUniform { half_width } => Ok((2.0 * p - 1.0) * half_width),
            DisorderModel::CenteredGamma { .. } => bisect_monotone(self, p, |d, y| d.cdf(y), true),
        }
    }

    fn upper_quantile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::Numeric(format!("tail level {q} outside (0, 1)")));
        }
        match *self {
            DisorderModel::Gaussian { sigma } => Ok(-sigma * std_normal_quantile(q)),
            DisorderModel::CenteredExponential { rate } => Ok(-q.ln() / rate - 1.0 / rate),
            DisorderModel::CenteredUniform { half_width } => Ok((1.0 - 2.0 * q) * half_width),
            DisorderModel::CenteredGamma { .. } => bisect_monotone(self, q, |d, y| d.sf(y), false),
        }
    }
}

/// Piecewise-linear law read from a table of `(y, h, H)` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedDensity {
    y: Vec<f64>,
    h: Vec<f64>,
    cdf: Vec<f64>,
}

impl TabulatedDensity {
    pub fn new(rows: Vec<(f64, f64, f64)>) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::Argument("a density table needs at least two rows".into()));
        }
        let mut errors = Vec::new();
        for (i, w) in rows.windows(2).enumerate() {
            if !(w[1].0 > w[0].0) {
                errors.push(format!("row {}: y must be strictly increasing", i + 1));
            }
            if w[1].2 < w[0].2 {
                errors.push(format!("row {}: H must be nondecreasing", i + 1));
            }
        }
        for (i, r) in rows.iter().enumerate() {
            if !(r.0.is_finite() && r.1.is_finite() && r.1 >= 0.0 && (0.0..=1.0).contains(&r.2)) {
                errors.push(format!("row {i}: need finite y, h >= 0 and H in [0, 1]"));
            }
        }
        if !errors.is_empty() {
            return Err(Error::Argument(errors.join("; ")));
        }
        Ok(TabulatedDensity {
            y: rows.iter().map(|r| r.0).collect(),
            h: rows.iter().map(|r| r.1).collect(),
            cdf: rows.iter().map(|r| r.2).collect(),
        })
    }

    /// Parses `y,h,H` CSV text. Blank lines, `#` comments and a non-numeric
    /// header line are skipped.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
            match parsed {
                Ok(v) if v.len() == 3 => rows.push((v[0], v[1], v[2])),
                Err(_) if rows.is_empty() => continue,
                _ => {
                    return Err(Error::Argument(format!(
                        "density table line {}: expected three numbers y,h,H",
                        lineno + 1
                    )))
                }
            }
        }
        Self::new(rows)
    }

    fn interp(&self, vals: &[f64], y: f64) -> f64 {
        let k = self.y.partition_point(|&v| v <= y);
        if k == 0 {
            return vals[0];
        }
        if k == self.y.len() {
            return vals[k - 1];
        }
        let (y0, y1) = (self.y[k - 1], self.y[k]);
        vals[k - 1] + (y - y0) / (y1 - y0) * (vals[k] - vals[k - 1])
    }
}

impl Density for TabulatedDensity {
    fn support(&self) -> (f64, f64) {
        (self.y[0], self.y[self.y.len() - 1])
    }

    fn pdf(&self, y: f64) -> f64 {
        let (lo, hi) = self.support();
        if y < lo || y > hi {
            0.0
        } else {
            self.interp(&self.h, y)
        }
    }

    fn cdf(&self, y: f64) -> f64 {
        let (lo, hi) = self.support();
        if y <= lo {
            0.0
        } else if y >= hi {
            1.0
        } else {
            self.interp(&self.cdf, y)
        }
    }
}

/// A value of `psi` and how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsiValue {
    pub value: f64,
    /// Evaluated through the log-tail path because the tail mass underflows.
    pub tail_asymptotic: bool,
}

/// `psi(y) = phi(Phi^{-1}(H(y))) / h(y)`.
pub fn psi<D: Density + ?Sized>(law: &D, y: f64) -> Result<PsiValue> {
    let (lo, hi) = law.support();
    if !(y > lo && y < hi) {
        return Err(Error::Domain(format!("y = {y} is outside the support interior ({lo}, {hi})")));
    }
    let h = law.pdf(y);
    if !(h > 0.0) {
        return Err(Error::Domain(format!("density vanishes at y = {y}")));
    }
    let lower = law.cdf(y);
    let upper = law.sf(y);
    let tail = lower.min(upper);
    if tail > TAIL_UNDERFLOW {
        // phi is symmetric, so the smaller tail gives the same value accurately
        let z = std_normal_quantile(tail);
        return Ok(PsiValue { value: std_normal_pdf(z) / h, tail_asymptotic: false });
    }
    let ln_tail = if lower <= upper { law.ln_cdf(y) } else { law.ln_sf(y) };
    if !ln_tail.is_finite() {
        return Err(Error::Numeric(format!("tail mass at y = {y} is not representable even in log space")));
    }
    let z = std_normal_quantile_from_ln_tail(ln_tail);
    Ok(PsiValue { value: (std_normal_ln_pdf(z) - law.ln_pdf(y)).exp(), tail_asymptotic: true })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Lower,
    Upper,
}

/// Behaviour of the density at a finite support endpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EndpointVerdict {
    pub side: Side,
    pub endpoint: f64,
    /// Fitted exponent in `h(x) ~ |x - endpoint|^alpha`; `None` when the
    /// density vanishes faster than any power on the probe sequence.
    pub alpha: Option<f64>,
    /// max/min of `h(x) / |x - endpoint|^alpha` over the probe sequence.
    pub ratio_band: Option<f64>,
    pub pass: bool,
}

/// Behaviour of `tail mass / density` along an infinite tail.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailVerdict {
    pub side: Side,
    pub probe_points: Vec<f64>,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub pass: bool,
}

/// Checks that `h(x) / |x - endpoint|^alpha` stays within a bounded band for
/// some `alpha > -1` as `x` approaches a finite support endpoint.
pub fn check_endpoint_exponent<D: Density + ?Sized>(law: &D, endpoint: f64, side: Side) -> Result<EndpointVerdict> {
    if !endpoint.is_finite() {
        return Err(Error::Argument("the endpoint exponent check applies to finite endpoints only".into()));
    }
    let (lo, hi) = law.support();
    let width = hi - lo;
    let scale = if width.is_finite() { width.min(1.0) } else { 1.0 };
    let mut ln_dist = Vec::new();
    let mut ln_h = Vec::new();
    for k in 2..=16 {
        let delta = scale * 10f64.powf(-(k as f64) / 2.0);
        let x = match side {
            Side::Lower => endpoint + delta,
            Side::Upper => endpoint - delta,
        };
        ln_dist.push(delta.ln());
        ln_h.push(law.ln_pdf(x));
    }
    if ln_h.iter().any(|v| !v.is_finite()) {
        return Ok(EndpointVerdict { side, endpoint, alpha: None, ratio_band: None, pass: false });
    }
    let fit = crate::stats::linear_fit(&ln_dist, &ln_h)
        .ok_or_else(|| Error::Numeric("degenerate endpoint probe sequence".into()))?;
    let alpha = fit.slope;
    let compensated: Vec<f64> = ln_h.iter().zip(&ln_dist).map(|(h, l)| h - alpha * l).collect();
    let max = compensated.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = compensated.iter().copied().fold(f64::INFINITY, f64::min);
    let band = (max - min).exp();
    Ok(EndpointVerdict {
        side,
        endpoint,
        alpha: Some(alpha),
        ratio_band: Some(band),
        pass: alpha > -1.0 && band <= BOUNDED_FACTOR,
    })
}

/// Checks that `(tail mass beyond x) / h(x)` stays within a bounded band as
/// `x` runs out an infinite tail.
pub fn check_tail_ratio<D: Density + ?Sized>(law: &D, side: Side) -> Result<TailVerdict> {
    let (lo, hi) = law.support();
    let infinite = match side {
        Side::Lower => lo == f64::NEG_INFINITY,
        Side::Upper => hi == f64::INFINITY,
    };
    if !infinite {
        return Err(Error::Argument(format!("the {side:?} tail is not infinite")));
    }
    let q1 = law.quantile(0.25)?;
    let q3 = law.quantile(0.75)?;
    let spread = (q3 - q1).max(1e-12);
    let mut probe_points = Vec::new();
    let mut ratios = Vec::new();
    for k in 0..64 {
        let offset = spread * (2f64.powi(k) - 1.0);
        let x = match side {
            Side::Upper => q3 + offset,
            Side::Lower => q1 - offset,
        };
        let ln_tail = match side {
            Side::Upper => law.ln_sf(x),
            Side::Lower => law.ln_cdf(x),
        };
        let ln_h = law.ln_pdf(x);
        if !(ln_tail > -700.0 && ln_h.is_finite()) {
            break;
        }
        probe_points.push(x);
        ratios.push((ln_tail - ln_h).exp());
    }
    if ratios.len() < 3 {
        return Err(Error::Numeric("tail underflows before three probe points".into()));
    }
    let ratio_min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let ratio_max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(TailVerdict { side, probe_points, ratio_min, ratio_max, pass: ratio_max / ratio_min <= BOUNDED_FACTOR })
}

/// Numerical nearly-gamma certificate over a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NearlyGammaReport {
    pub grid: Vec<f64>,
    pub psi_values: Vec<f64>,
    /// Grid points evaluated through the log-tail path.
    pub tail_asymptotic: Vec<bool>,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "A_fit")]
    pub a_fit: f64,
    /// Grid point attaining `A_fit`, if any point forced `A > 0`.
    pub witness_y: Option<f64>,
    /// `psi^2 <= B + A_fit |y|` holds (within slack) at every grid point,
    /// including `y = 0` where only `B` can help.
    pub envelope_holds: bool,
    pub cond_iv: Vec<EndpointVerdict>,
    pub cond_v: Vec<TailVerdict>,
    /// `2 / A_fit`; `None` when `A_fit = 0` (every exponential moment).
    pub moment_threshold: Option<f64>,
    pub notes: Vec<String>,
}

/// Smallest `A` with `psi(y)^2 <= B + A |y|` on the grid, together with the
/// endpoint and tail checks for the support.
pub fn fit_envelope<D: Density + ?Sized>(law: &D, grid: &[f64], b: f64) -> Result<NearlyGammaReport> {
    if !(b.is_finite() && b >= 0.0) {
        return Err(Error::Argument(format!("B must be finite and >= 0, got {b}")));
    }
    let mut psi_values = Vec::with_capacity(grid.len());
    let mut tail_asymptotic = Vec::with_capacity(grid.len());
    let mut a_fit = 0.0;
    let mut witness_y = None;
    let mut envelope_holds = true;
    for &y in grid {
        let p = psi(law, y)?;
        let excess = p.value * p.value - b;
        if excess > ENVELOPE_SLACK {
            if y == 0.0 {
                envelope_holds = false;
            } else if excess / y.abs() > a_fit {
                a_fit = excess / y.abs();
                witness_y = Some(y);
            }
        }
        psi_values.push(p.value);
        tail_asymptotic.push(p.tail_asymptotic);
    }
    let (lo, hi) = law.support();
    let mut cond_iv = Vec::new();
    let mut cond_v = Vec::new();
    if lo.is_finite() {
        cond_iv.push(check_endpoint_exponent(law, lo, Side::Lower)?);
    } else {
        cond_v.push(check_tail_ratio(law, Side::Lower)?);
    }
    if hi.is_finite() {
        cond_iv.push(check_endpoint_exponent(law, hi, Side::Upper)?);
    } else {
        cond_v.push(check_tail_ratio(law, Side::Upper)?);
    }
    let mut notes = vec![format!(
        "numerical certificate on {} grid points; endpoint exponent and tail ratio checks cover the support beyond the grid",
        grid.len()
    )];
    if cond_v.iter().any(|v| !v.pass) {
        notes.push(
            "a tail fails the tail ratio check, which is sufficient but not necessary; the psi envelope is the certificate there"
                .into(),
        );
    }
    Ok(NearlyGammaReport {
        grid: grid.to_vec(),
        psi_values,
        tail_asymptotic,
        b,
        a_fit,
        witness_y,
        envelope_holds,
        cond_iv,
        cond_v,
        moment_threshold: if a_fit > 0.0 { Some(2.0 / a_fit) } else { None },
        notes,
    })
}

/// Default `B`: 1.05 times the largest `psi^2` on `|y| <= 1`.
pub fn default_b<D: Density + ?Sized>(law: &D) -> Result<f64> {
    let (lo, hi) = law.support();
    let mut max: f64 = 0.0;
    for k in 0..=200 {
        let y = -1.0 + k as f64 / 100.0;
        if y > lo && y < hi && law.pdf(y) > 0.0 {
            let p = psi(law, y)?.value;
            max = max.max(p * p);
        }
    }
    Ok(1.05 * max)
}

/// Evenly spaced grid covering the bulk of the law, from the `1e-9` quantile
/// to the `1e-12` upper-tail quantile, kept inside the open support.
pub fn default_grid<D: Density + ?Sized>(law: &D, points: usize) -> Result<Vec<f64>> {
    let (lo, hi) = law.support();
    let a = law.quantile(1e-9)?.max(lo);
    let b = law.upper_quantile(1e-12)?.min(hi);
    let points = points.max(2);
    let pad = 1e-6 * (b - a);
    let (a, b) = (a + pad, b - pad);
    Ok((0..points).map(|k| a + (b - a) * k as f64 / (points - 1) as f64).collect())
}

/// `T(xi) = H^{-1}(Phi(xi))`, the monotone map sending a standard normal to
/// the law.
pub fn gaussian_transport<D: Density + ?Sized>(law: &D, xi: f64) -> Result<f64> {
    if !xi.is_finite() {
        return Err(Error::Argument("xi must be finite".into()));
    }
    if xi <= 0.0 {
        let p = std_normal_cdf(xi);
        if p == 0.0 {
            return Err(Error::Numeric(format!("Phi({xi}) underflows; transport undefined in floating point")));
        }
        law.quantile(p)
    } else {
        let q = std_normal_cdf(-xi);
        if q == 0.0 {
            return Err(Error::Numeric(format!("1 - Phi({xi}) underflows; transport undefined in floating point")));
        }
        law.upper_quantile(q)
    }
}

/// Whether the fitted envelope certifies `E[exp(t omega)] < infinity`,
/// i.e. `t < 2 / A_fit`.
pub fn exp_moment_certificate(report: &NearlyGammaReport, t: f64) -> bool {
    report.a_fit == 0.0 || t < 2.0 / report.a_fit
}
