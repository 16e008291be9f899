//! Compensated summation and the fixed-chunk reduction used by every sum.

use std::ops::Range;

use num_complex::Complex64;

/// Neumaier-compensated running sum of `f64` values.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Neumaier {
    sum: f64,
    compensation: f64,
}

impl Neumaier {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.compensation += (self.sum - t) + v;
        } else {
            self.compensation += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &Self) {
        self.add(other.sum);
        self.add(other.compensation);
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Compensated accumulator for complex terms; real and imaginary parts carry
/// independent compensation.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ComplexAccumulator {
    re: Neumaier,
    im: Neumaier,
}

impl ComplexAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn merge(&mut self, other: &Self) {
        self.re.merge(&other.re);
        self.im.merge(&other.im);
    }

    #[inline]
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

impl FromIterator<Complex64> for ComplexAccumulator {
    fn from_iter<I: IntoIterator<Item = Complex64>>(iter: I) -> Self {
        let mut acc = Self::new();
        for z in iter {
            acc.add(z);
        }
        acc
    }
}

/// Split `0..n` into fixed-size chunks, evaluate each (in parallel when the
/// `parallel` feature is on) and merge the partial sums in chunk order.
///
/// Chunk boundaries do not depend on the thread count, so the result is
/// bit-identical for any pool size.
pub(crate) fn sum_chunks<F>(n: u64, chunk: u64, f: F) -> ComplexAccumulator
where
    F: Fn(Range<u64>) -> ComplexAccumulator + Sync + Send,
{
    let chunk = chunk.max(1);
    let count = n.div_ceil(chunk);
    let range_of = |i: u64| i * chunk..((i + 1) * chunk).min(n);

    #[cfg(feature = "parallel")]
    let partials: Vec<ComplexAccumulator> = {
        use rayon::prelude::*;
        (0..count).into_par_iter().map(|i| f(range_of(i))).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let partials: Vec<ComplexAccumulator> = (0..count).map(|i| f(range_of(i))).collect();

    let mut total = ComplexAccumulator::new();
    for part in &partials {
        total.merge(part);
    }
    total
}
