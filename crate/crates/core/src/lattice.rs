//! Layer geometry for nearest-neighbour directed walks and log-space sums.
//!
//! After `n` steps a walk in `d = 1` sits at `x = 2i - n`, `i = 0..=n`. In
//! `d = 2` the rotated coordinates `u = x0 + x1`, `v = x0 - x1` each perform
//! an independent simple walk, so layer `n` is the `(n+1) x (n+1)` grid
//! `u = 2i - n`, `v = 2j - n`. Both layouts hold exactly the parity- and
//! cone-valid points and nothing else.

use crate::env::Point;

/// Number of stored points in a layer after `steps` steps.
#[inline]
pub fn layer_len(d: usize, steps: usize) -> usize {
    (steps + 1).pow(d as u32)
}

/// Point of flat index `idx` in a layer after `steps` steps.
#[inline]
pub fn point_of(d: usize, steps: usize, idx: usize) -> Point {
    let n = steps as i64;
    if d == 1 {
        [2 * idx as i64 - n, 0]
    } else {
        let side = steps + 1;
        let u = 2 * (idx / side) as i64 - n;
        let v = 2 * (idx % side) as i64 - n;
        [(u + v) / 2, (u - v) / 2]
    }
}

/// Flat index of `x` after `steps` steps, or `None` when unreachable.
#[inline]
pub fn index_of(d: usize, steps: usize, x: Point) -> Option<usize> {
    let n = steps as i64;
    if d == 1 {
        if x[1] != 0 || x[0].abs() > n || (n + x[0]).rem_euclid(2) != 0 {
            return None;
        }
        Some(((x[0] + n) / 2) as usize)
    } else {
        let u = x[0] + x[1];
        let v = x[0] - x[1];
        if u.abs() > n || v.abs() > n || (n + u).rem_euclid(2) != 0 {
            return None;
        }
        let i = ((u + n) / 2) as usize;
        let j = ((v + n) / 2) as usize;
        Some(i * (steps + 1) + j)
    }
}

/// `ln(e^a + e^b)`; `-inf` is absorbing.
#[inline]
pub fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(sum e^v)` with a fixed left-to-right reduction order.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Streaming log-sum-exp over values that arrive one at a time.
#[derive(Debug, Clone, Copy)]
pub struct LogAccumulator {
    max: f64,
    scaled_sum: f64,
}

impl Default for LogAccumulator {
    fn default() -> Self {
        LogAccumulator { max: f64::NEG_INFINITY, scaled_sum: 0.0 }
    }
}

impl LogAccumulator {
    pub fn push(&mut self, v: f64) {
        if v == f64::NEG_INFINITY {
            return;
        }
        if v > self.max {
            self.scaled_sum = self.scaled_sum * (self.max - v).exp() + 1.0;
            self.max = v;
        } else {
            self.scaled_sum += (v - self.max).exp();
        }
    }

    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled_sum.ln()
        }
    }
}
