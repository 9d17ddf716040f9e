#![allow(dead_code)]

use polymerlab::env::{Point, Site};
use polymerlab::polymer::Dim;

/// Small deterministic generator for choosing test inputs.
pub struct Rng(u64);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.next_u64() % n
    }

    /// A uniformly random nearest-neighbour path of `n` steps from the origin.
    pub fn path(&mut self, d: Dim, n: usize) -> Vec<Site> {
        let mut out = vec![Site::ORIGIN];
        let steps = d.steps();
        for k in 1..=n {
            let prev = out[k - 1].x;
            let s = steps[self.below(steps.len() as u64) as usize];
            out.push(Site::new(k as i64, [prev[0] + s[0], prev[1] + s[1]]));
        }
        out
    }

    /// A uniformly random reachable point after `n` steps.
    pub fn reachable_point(&mut self, d: Dim, n: usize) -> Point {
        let len = polymerlab::lattice::layer_len(d.get(), n);
        polymerlab::lattice::point_of(d.get(), n, self.below(len as u64) as usize)
    }
}

/// Kolmogorov distance between the empirical law of `samples` and `cdf`.
pub fn ks_distance(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Double-double value `hi + lo` with about 32 significant digits.
#[derive(Clone, Copy, Debug, Default)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

impl Dd {
    pub fn new(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    fn two_sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        let bb = s - a;
        Dd { hi: s, lo: (a - (s - bb)) + (b - bb) }
    }

    fn renorm(hi: f64, lo: f64) -> Dd {
        let s = hi + lo;
        Dd { hi: s, lo: lo - (s - hi) }
    }

    pub fn add(self, o: Dd) -> Dd {
        let s = Dd::two_sum(self.hi, o.hi);
        Dd::renorm(s.hi, s.lo + self.lo + o.lo)
    }

    pub fn sub(self, o: Dd) -> Dd {
        self.add(Dd { hi: -o.hi, lo: -o.lo })
    }

    pub fn mul_f64(self, b: f64) -> Dd {
        let p = self.hi * b;
        let e = self.hi.mul_add(b, -p);
        Dd::renorm(p, e + self.lo * b)
    }
}

/// `ln Z_N(env')` for two environments that differ only at `site`, returned
/// as the exact difference `ln Z(up) - ln Z(down)`. The linear transfer
/// matrix runs in double-double so the difference keeps its relative
/// accuracy even when the site is rarely visited.
pub fn log_z_difference(
    up: &polymerlab::env::Environment,
    down: &polymerlab::env::Environment,
    d: Dim,
    n: usize,
    beta: f64,
) -> f64 {
    let z_of = |env: &polymerlab::env::Environment| -> Dd {
        let dd = d.get();
        let kernel = 1.0 / (2 * dd) as f64;
        let mut layer = vec![Dd::new(1.0)];
        for m in 1..=n {
            let len = polymerlab::lattice::layer_len(dd, m);
            let mut next = vec![Dd::default(); len];
            for (idx, slot) in next.iter_mut().enumerate() {
                let x = polymerlab::lattice::point_of(dd, m, idx);
                let mut acc = Dd::default();
                for s in d.steps() {
                    let prev = [x[0] - s[0], x[1] - s[1]];
                    if let Some(j) = polymerlab::lattice::index_of(dd, m - 1, prev) {
                        acc = acc.add(layer[j]);
                    }
                }
                let w = (beta * env.omega(Site::new(m as i64, x))).exp();
                *slot = acc.mul_f64(kernel).mul_f64(w);
            }
            layer = next;
        }
        layer.into_iter().fold(Dd::default(), Dd::add)
    };
    let (a, b) = (z_of(up), z_of(down));
    let diff = a.sub(b);
    (diff.hi / b.hi).ln_1p()
}
