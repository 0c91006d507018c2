//! Streaming mean and population variance.

/// Welford accumulator with Chan's pairwise merge.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Welford {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Welford {
    pub const fn new() -> Self {
        Welford {
            n: 0,
            mean: 0.0,
            m2: 0.0,
        }
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Population variance `m2 / n`; zero before the first observation.
    pub fn variance(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.m2 / self.n as f64).max(0.0)
        }
    }

    /// State equivalent to having observed both streams.
    pub fn merge(&self, other: &Welford) -> Welford {
        if other.n == 0 {
            return *self;
        }
        if self.n == 0 {
            return *other;
        }
        let n = self.n + other.n;
        let (na, nb, nf) = (self.n as f64, other.n as f64, n as f64);
        let delta = other.mean - self.mean;
        Welford {
            n,
            mean: (na * self.mean + nb * other.mean) / nf,
            m2: self.m2 + other.m2 + delta * delta * na * nb / nf,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_stream_has_zero_variance() {
        let mut w = Welford::new();
        (0..100).for_each(|_| w.push(0.5));
        assert_eq!(w.variance(), 0.0);
        assert_eq!(w.mean, 0.5);
    }

    #[test]
    fn alternating_zero_one_reaches_quarter() {
        let mut w = Welford::new();
        (0..1000).for_each(|i| w.push((i % 2) as f64));
        assert!((w.variance() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn merge_identity() {
        let mut a = Welford::new();
        [0.1, 0.4, 0.3].iter().for_each(|&x| a.push(x));
        assert_eq!(a.merge(&Welford::new()), a);
        assert_eq!(Welford::new().merge(&a), a);
    }
}
