//! Streaming mean and variance (Welford), with the Chan et al. merge for
//! combining per-stream accumulators.

use num_complex::Complex64 as C64;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&self, other: &RunningStats) -> RunningStats {
        if other.count == 0 {
            return *self;
        }
        if self.count == 0 {
            return *other;
        }
        let n = self.count + other.count;
        let (na, nb, nf) = (self.count as f64, other.count as f64, n as f64);
        let delta = other.mean - self.mean;
        RunningStats {
            count: n,
            mean: self.mean + delta * nb / nf,
            m2: self.m2 + other.m2 + delta * delta * na * nb / nf,
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero for fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.count > 1 {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        } else {
            0.0
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        (self.variance() / self.count as f64).sqrt()
    }
}

/// Merge accumulators as a balanced binary tree in slice order, so the
/// result depends only on the slice contents, never on who produced them
/// first.
pub fn merge_tree(parts: &[RunningStats]) -> RunningStats {
    match parts.len() {
        0 => RunningStats::new(),
        1 => parts[0],
        n => {
            let (a, b) = parts.split_at(n / 2);
            merge_tree(a).merge(&merge_tree(b))
        }
    }
}

/// Independent accumulators for the real and imaginary parts.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ComplexStats {
    pub re: RunningStats,
    pub im: RunningStats,
}

impl ComplexStats {
    pub fn push(&mut self, z: C64) {
        self.re.push(z.re);
        self.im.push(z.im);
    }

    pub fn merge(&self, other: &ComplexStats) -> ComplexStats {
        ComplexStats {
            re: self.re.merge(&other.re),
            im: self.im.merge(&other.im),
        }
    }

    pub fn mean(&self) -> C64 {
        C64::new(self.re.mean(), self.im.mean())
    }

    pub fn std_error(&self) -> C64 {
        C64::new(self.re.std_error(), self.im.std_error())
    }
}

/// `(estimate − expected) / std_error`, with a zero-width band meaning an
/// exact comparison.
pub fn z_score(estimate: f64, expected: f64, std_error: f64) -> f64 {
    let diff = estimate - expected;
    if std_error > 0.0 {
        diff / std_error
    } else if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    }
}
