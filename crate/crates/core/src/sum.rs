//! Fixed-order reductions. Every sum in the crate that feeds a reported
//! number goes through here so results do not depend on thread count.

use crate::Vec2;

const BLOCK: usize = 64;

/// Pairwise (cascade) summation with a fixed block size.
pub(crate) fn pairwise(values: &[f64]) -> f64 {
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise(&values[..mid]) + pairwise(&values[mid..])
}

#[cfg(test)]
pub(crate) fn pairwise_vec(values: &[Vec2]) -> Vec2 {
    if values.len() <= BLOCK {
        return values.iter().fold(Vec2::ZERO, |a, &b| a + b);
    }
    let mid = values.len() / 2;
    pairwise_vec(&values[..mid]) + pairwise_vec(&values[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_exact_integers() {
        let v: Vec<f64> = (1..=10_000).map(|i| i as f64).collect();
        assert_eq!(pairwise(&v), 50_005_000.0);
    }

    #[test]
    fn pairwise_handles_empty() {
        assert_eq!(pairwise(&[]), 0.0);
        assert_eq!(pairwise_vec(&[]), Vec2::ZERO);
    }
}

/// Streaming cascade summation: values are added in blocks of fixed size
/// and block sums are merged like a binary counter, which reproduces the
/// same pairwise tree as [`pairwise`] without storing the terms.
#[derive(Debug, Clone)]
pub(crate) struct Cascade {
    block: Vec2,
    in_block: usize,
    stack: [Vec2; 64],
    count: u64,
}

impl Default for Cascade {
    fn default() -> Self {
        Self {
            block: Vec2::ZERO,
            in_block: 0,
            stack: [Vec2::ZERO; 64],
            count: 0,
        }
    }
}

impl Cascade {
    #[inline]
    pub(crate) fn add(&mut self, v: Vec2) {
        self.block += v;
        self.in_block += 1;
        if self.in_block == BLOCK {
            self.flush();
        }
    }

    fn flush(&mut self) {
        let mut carry = std::mem::take(&mut self.block);
        self.in_block = 0;
        let mut level = 0;
        while self.count & (1 << level) != 0 {
            carry = self.stack[level] + carry;
            level += 1;
        }
        self.stack[level] = carry;
        self.count += 1;
    }

    pub(crate) fn finish(mut self) -> Vec2 {
        let mut acc = self.block;
        for level in 0..64 {
            if self.count & (1 << level) != 0 {
                acc = self.stack[level] + acc;
            }
        }
        self.block = Vec2::ZERO;
        acc
    }
}

/// Scalar variant of [`Cascade`].
#[derive(Debug, Clone, Default)]
pub(crate) struct ScalarCascade(Cascade);

impl ScalarCascade {
    #[inline]
    pub(crate) fn add(&mut self, v: f64) {
        self.0.add(Vec2::new(v, 0.0));
    }

    pub(crate) fn finish(self) -> f64 {
        self.0.finish().x1
    }
}

#[cfg(test)]
mod cascade_tests {
    use super::*;

    #[test]
    fn cascade_is_accurate() {
        let mut c = ScalarCascade::default();
        let mut naive = 0.0f64;
        for i in 0..1_000_000 {
            let v = 0.1 + (i % 7) as f64 * 1e-9;
            c.add(v);
            naive += v;
        }
        let exact = 100_000.0 + (0..1_000_000).map(|i| (i % 7) as f64).sum::<f64>() * 1e-9;
        let got = c.finish();
        assert!((got - exact).abs() <= (naive - exact).abs());
        assert!((got - exact).abs() < 1e-8);
    }
}
