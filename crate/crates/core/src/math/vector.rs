use crate::scalar::Real;

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Raw cosine in `[-1, 1]`; zero when either vector has zero norm.
///
/// Written as `dot / sqrt(|a|^2 |b|^2)` so that `cosine(a, a)` is exactly one.
pub fn cosine<T: Real>(a: &[T], b: &[T]) -> T {
    let na = dot(a, a);
    let nb = dot(b, b);
    if na <= T::zero() || nb <= T::zero() {
        return T::zero();
    }
    let c = dot(a, b) / (na * nb).sqrt();
    c.max(-T::one()).min(T::one())
}

pub fn euclidean<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<T>()
        .sqrt()
}

/// Unit-length copy of `a`, or `None` when the norm is zero or not finite.
pub fn normalized<T: Real>(a: &[T]) -> Option<Vec<T>> {
    let n = norm(a);
    if !(n > T::zero()) || !n.is_finite() {
        return None;
    }
    Some(a.iter().map(|&x| x / n).collect())
}

/// Coordinate-wise mean. Panics on an empty input or ragged rows.
pub fn mean_vector<T: Real, V: AsRef<[T]>>(rows: &[V]) -> Vec<T> {
    assert!(!rows.is_empty(), "mean of zero vectors");
    let dim = rows[0].as_ref().len();
    let mut acc = vec![T::zero(); dim];
    for row in rows {
        let row = row.as_ref();
        assert_eq!(row.len(), dim, "ragged rows");
        for (a, &x) in acc.iter_mut().zip(row) {
            *a = *a + x;
        }
    }
    let n = T::count(rows.len());
    acc.into_iter().map(|a| a / n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_cosine_is_exactly_one() {
        let v = [0.3_f64, -1.7, 2.2, 1e-3];
        assert_eq!(cosine(&v, &v), 1.0);
        let w = [0.3_f32, -1.7, 2.2, 1e-3];
        assert_eq!(cosine(&w, &w), 1.0);
    }

    #[test]
    fn zero_vector_has_zero_cosine_and_no_normalization() {
        let z = [0.0_f64; 3];
        assert_eq!(cosine(&z, &[1.0, 0.0, 0.0]), 0.0);
        assert!(normalized(&z).is_none());
    }

    #[test]
    fn mean_of_rows() {
        let m = mean_vector(&[vec![1.0_f64, 0.0], vec![0.0, 1.0]]);
        assert_eq!(m, vec![0.5, 0.5]);
    }
}
