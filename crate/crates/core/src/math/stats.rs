use crate::scalar::Real;

/// Gini coefficient `sum_i sum_j |x_i - x_j| / (2 n sum_i x_i)`.
///
/// `None` for an empty input or when the total is zero.
pub fn gini<T: Real>(values: &[T]) -> Option<T> {
    let n = values.len();
    let total: T = values.iter().copied().sum();
    if n == 0 || !(total > T::zero()) {
        return None;
    }
    let mut diff = T::zero();
    for &a in values {
        for &b in values {
            diff = diff + (a - b).abs();
        }
    }
    Some(diff / (T::lit(2.0) * T::count(n) * total))
}

/// `(n) / sum 1/(step + eps)`; `None` for no steps.
pub fn harmonic_mean_step<T: Real>(steps: &[T], eps: T) -> Option<T> {
    if steps.is_empty() {
        return None;
    }
    let denom: T = steps.iter().map(|&s| T::one() / (s + eps)).sum();
    Some(T::count(steps.len()) / denom)
}

/// Single-pass mean and population variance (Welford).
#[derive(Debug, Clone, Copy, Default)]
pub struct RunningStats {
    n: usize,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> Option<f64> {
        (self.n > 0).then_some(self.mean)
    }

    /// Population standard deviation.
    pub fn std(&self) -> Option<f64> {
        (self.n > 0).then(|| (self.m2 / self.n as f64).max(0.0).sqrt())
    }
}

impl FromIterator<f64> for RunningStats {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = RunningStats::default();
        for x in iter {
            s.push(x);
        }
        s
    }
}
