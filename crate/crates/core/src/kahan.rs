//! Compensated (Kahan) summation.
//!
//! The prime-sum covariances add millions of terms of magnitude `p^{-1-eps}`;
//! plain accumulation loses digits that the reordered-summation cross-checks
//! are meant to detect, so every long sum in this crate goes through
//! [`KahanSum`].

/// Error-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    err: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let y = value - self.err;
        let t = self.sum + y;
        self.err = (t - self.sum) - y;
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum
    }
}

impl std::ops::AddAssign<f64> for KahanSum {
    #[inline]
    fn add_assign(&mut self, rhs: f64) {
        self.add(rhs);
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = KahanSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Sum an iterator with compensation.
pub fn kahan_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<KahanSum>().value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensates_small_terms() {
        // 1 + 1e-16 * 10^8 should be 1 + 1e-8; naive summation loses it all.
        let mut k = KahanSum::new();
        k.add(1.0);
        for _ in 0..100_000_000u64 {
            k.add(1e-16);
        }
        let expected = 1.0 + 1e-8;
        assert!((k.value() - expected).abs() < 1e-12, "got {}", k.value());
    }

    #[test]
    fn matches_exact_on_integers() {
        let v: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(kahan_sum(v), 500_500.0);
    }
}
