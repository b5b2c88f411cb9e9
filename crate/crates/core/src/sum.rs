//! Compensated accumulation with a fixed merge order.
//!
//! All pair sums in this crate are split into partitions whose boundaries do
//! not depend on the thread count. Each partition is accumulated with
//! Neumaier's variant of Kahan summation and the partials are merged
//! sequentially in partition order, so results are bit-reproducible.

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub const fn new() -> Self {
        Self {
            sum: 0.0,
            comp: 0.0,
        }
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    /// Folds another partial into this one.
    #[inline]
    pub fn merge(&mut self, other: &NeumaierSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Merges partials strictly in slice order.
pub fn merge_ordered<'a, I: IntoIterator<Item = &'a NeumaierSum>>(parts: I) -> NeumaierSum {
    let mut acc = NeumaierSum::new();
    for p in parts {
        acc.merge(p);
    }
    acc
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = NeumaierSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}
