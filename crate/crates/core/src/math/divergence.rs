use crate::scalar::Real;

/// Shannon entropy in bits, with `0 log 0 = 0`.
pub fn entropy_bits<T: Real>(p: &[T]) -> T {
    -p.iter()
        .filter(|&&x| x > T::zero())
        .map(|&x| x * x.log2())
        .sum::<T>()
}

fn kl_bits<T: Real>(p: &[T], m: &[T]) -> T {
    p.iter()
        .zip(m)
        .filter(|(&pi, _)| pi > T::zero())
        .map(|(&pi, &mi)| pi * (pi / mi).log2())
        .sum()
}

/// Jensen-Shannon divergence in base 2, clamped to `[0, 1]`.
///
/// Inputs are assumed to be probability vectors of equal length.
pub fn jensen_shannon_bits<T: Real>(p: &[T], q: &[T]) -> T {
    assert_eq!(p.len(), q.len(), "distributions over different supports");
    let half = T::lit(0.5);
    let m: Vec<T> = p.iter().zip(q).map(|(&a, &b)| half * (a + b)).collect();
    let js = half * kl_bits(p, &m) + half * kl_bits(q, &m);
    js.max(T::zero()).min(T::one())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_distributions_have_zero_divergence() {
        let p = [0.2_f64, 0.3, 0.5];
        assert_eq!(jensen_shannon_bits(&p, &p), 0.0);
    }

    #[test]
    fn disjoint_point_masses_reach_one_bit() {
        let p = [1.0_f64, 0.0];
        let q = [0.0_f64, 1.0];
        assert_eq!(jensen_shannon_bits(&p, &q), 1.0);
    }

    #[test]
    fn half_vs_point_mass() {
        // m = (0.75, 0.25); JSD = 0.5*KL(p||m) + 0.5*KL(q||m)
        let oracle = 0.5 * (0.5 * (0.5f64 / 0.75).log2() + 0.5 * (0.5f64 / 0.25).log2())
            + 0.5 * (1.0f64 / 0.75).log2();
        let js = jensen_shannon_bits(&[0.5_f64, 0.5], &[1.0, 0.0]);
        assert!((js - oracle).abs() < 1e-15);
        assert!((js - 0.311_278_124_459_132_8).abs() < 1e-12);
    }

    #[test]
    fn entropy_of_quarter_split() {
        let h = entropy_bits(&[0.5_f64, 0.25, 0.25]);
        assert!((h - 1.5).abs() < 1e-15);
    }
}
