use crate::real::Real;

/// Least-squares solution of `A c ≈ y` by Householder QR.
///
/// `columns` holds the columns of `A`, each of length `y.len()`. Returns `None` when `A` is
/// numerically rank deficient.
pub(crate) fn least_squares<T: Real>(columns: &[Vec<T>], y: &[T]) -> Option<Vec<T>> {
    let m = y.len();
    let n = columns.len();
    if n == 0 || m < n || columns.iter().any(|c| c.len() != m) {
        return None;
    }
    // Row-major working copy of [A | y].
    let mut a: Vec<Vec<T>> = (0..m)
        .map(|i| {
            let mut row: Vec<T> = columns.iter().map(|c| c[i]).collect();
            row.push(y[i]);
            row
        })
        .collect();

    let scale = columns
        .iter()
        .map(|c| c.iter().fold(T::zero(), |acc, v| acc.max(v.abs())))
        .fold(T::zero(), T::max);

    for k in 0..n {
        let norm = (k..m).fold(T::zero(), |acc, i| acc + a[i][k] * a[i][k]).sqrt();
        if norm <= T::epsilon() * T::lit(16.0) * scale.max(T::min_positive_value()) {
            return None;
        }
        let alpha = if a[k][k] > T::zero() { -norm } else { norm };
        // v = x - alpha e_k, stored in place.
        a[k][k] = a[k][k] - alpha;
        let vnorm2 = (k..m).fold(T::zero(), |acc, i| acc + a[i][k] * a[i][k]);
        for j in (k + 1)..=n {
            let dot = (k..m).fold(T::zero(), |acc, i| acc + a[i][k] * a[i][j]);
            let f = T::lit(2.0) * dot / vnorm2;
            for row in a.iter_mut().take(m).skip(k) {
                row[j] = row[j] - f * row[k];
            }
        }
        a[k][k] = alpha;
        for row in a.iter_mut().take(m).skip(k + 1) {
            row[k] = T::zero();
        }
    }

    let mut c = vec![T::zero(); n];
    for k in (0..n).rev() {
        let mut s = a[k][n];
        for j in (k + 1)..n {
            s = s - a[k][j] * c[j];
        }
        c[k] = s / a[k][k];
    }
    Some(c)
}
