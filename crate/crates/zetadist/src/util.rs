//! Small numeric utilities: compensated summation and deterministic
//! fixed-chunk parallel reductions.
//!
//! Every parallel reduction in this crate partitions its index range into
//! chunks of a fixed size and combines per-chunk partial results
//! sequentially in a fixed order. Results are therefore bit-identical for
//! any worker count, which the reproducibility guarantees elsewhere rely on.

use num_complex::Complex64;
use rayon::prelude::*;

/// Fixed chunk length for parallel prime-range reductions.
pub(crate) const CHUNK: usize = 4096;

/// Neumaier-compensated accumulator. `value()` folds the compensation in.
#[derive(Debug, Clone, Copy, Default)]
pub struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    /// Folds another accumulator in (sum first, then its compensation).
    #[inline]
    pub fn combine(&mut self, other: Kahan) {
        self.add(other.sum);
        self.add(other.comp);
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Componentwise compensated complex accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanComplex {
    re: Kahan,
    im: Kahan,
}

impl KahanComplex {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    #[inline]
    pub fn combine(&mut self, other: KahanComplex) {
        self.re.combine(other.re);
        self.im.combine(other.im);
    }

    #[inline]
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

/// Splits `0..len` into fixed chunks, maps each chunk in parallel, and
/// combines the partials sequentially from the LAST chunk to the first.
/// With ascending-magnitude data stored descending-by-index this realizes
/// the "descending order, compensated" accumulation policy.
pub(crate) fn par_chunked_sum_complex<F>(len: usize, per_chunk: F) -> Complex64
where
    F: Fn(std::ops::Range<usize>) -> KahanComplex + Sync,
{
    let n_chunks = len.div_ceil(CHUNK);
    let partials: Vec<KahanComplex> = (0..n_chunks)
        .into_par_iter()
        .map(|c| per_chunk(c * CHUNK..((c + 1) * CHUNK).min(len)))
        .collect();
    let mut acc = KahanComplex::new();
    for partial in partials.into_iter().rev() {
        acc.combine(partial);
    }
    acc.value()
}

/// Like `par_chunked_sum_complex` but multiplies per-chunk products, again
/// combining from the last chunk down.
pub(crate) fn par_chunked_product<F>(len: usize, per_chunk: F) -> Complex64
where
    F: Fn(std::ops::Range<usize>) -> Complex64 + Sync,
{
    let n_chunks = len.div_ceil(CHUNK);
    let partials: Vec<Complex64> = (0..n_chunks)
        .into_par_iter()
        .map(|c| per_chunk(c * CHUNK..((c + 1) * CHUNK).min(len)))
        .collect();
    let mut acc = Complex64::new(1.0, 0.0);
    for partial in partials.into_iter().rev() {
        acc *= partial;
    }
    acc
}
