use serde::{Deserialize, Serialize};

/// Exactly rounded floating-point sum (Shewchuk's non-overlapping partials).
/// The rounded value does not depend on the order of additions.
#[derive(Clone, Debug, Default)]
pub struct ExactSum {
    partials: Vec<f64>,
    special: f64,
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        if !x.is_finite() {
            self.special += x;
            return;
        }
        let mut x = x;
        let mut i = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    pub fn merge(&mut self, other: &ExactSum) {
        for &p in &other.partials {
            self.add(p);
        }
        self.special += other.special;
    }

    pub fn value(&self) -> f64 {
        if self.special != 0.0 || self.special.is_nan() {
            return self.special;
        }
        let p = &self.partials;
        let mut n = p.len();
        if n == 0 {
            return 0.0;
        }
        n -= 1;
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = p[n];
            hi = x + y;
            lo = y - (hi - x);
            if lo != 0.0 {
                break;
            }
        }
        // round-half-even correction when the remainder sits exactly on a tie
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
        hi
    }
}

/// Monte Carlo mean with standard error. Merging is exact, so any merge
/// order gives bit-identical results.
#[derive(Clone, Debug, Default)]
pub struct Estimate {
    count: u64,
    sum: ExactSum,
    sum_sq: ExactSum,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateSummary {
    pub mean: f64,
    pub stderr: f64,
    pub count: u64,
}

impl Estimate {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Self {
        let mut e = Estimate::new();
        for x in values {
            e.push(x);
        }
        e
    }

    /// `hits` values equal to `scale` among `count`, the rest zero.
    pub fn from_counts(count: u64, hits: u64, scale: f64) -> Self {
        let mut e = Estimate { count, ..Default::default() };
        e.sum.add(hits as f64 * scale);
        e.sum_sq.add(hits as f64 * scale * scale);
        e
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum.add(x);
        self.sum_sq.add(x * x);
    }

    pub fn merge(&mut self, other: &Estimate) {
        self.count += other.count;
        self.sum.merge(&other.sum);
        self.sum_sq.merge(&other.sum_sq);
    }

    pub fn merged<'a>(parts: impl IntoIterator<Item = &'a Estimate>) -> Estimate {
        let mut e = Estimate::new();
        for p in parts {
            e.merge(p);
        }
        e
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn sum(&self) -> f64 {
        self.sum.value()
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        self.sum.value() / self.count as f64
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return f64::NAN;
        }
        let n = self.count as f64;
        let s = self.sum.value();
        let mut centered = self.sum_sq.clone();
        centered.add(-s * s / n);
        (centered.value() / (n - 1.0)).max(0.0)
    }

    pub fn stderr(&self) -> f64 {
        (self.variance() / self.count as f64).sqrt()
    }

    pub fn summary(&self) -> EstimateSummary {
        EstimateSummary { mean: self.mean(), stderr: self.stderr(), count: self.count }
    }

    /// Multiplies every sample by `c` (exact up to one rounding per sum).
    pub fn scaled(&self, c: f64) -> Estimate {
        let mut e = Estimate { count: self.count, ..Default::default() };
        e.sum.add(self.sum.value() * c);
        e.sum_sq.add(self.sum_sq.value() * c * c);
        e
    }
}

impl Serialize for Estimate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.summary().serialize(s)
    }
}
