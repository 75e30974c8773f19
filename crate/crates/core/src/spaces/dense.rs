//! Small dense helpers for reference-element construction.

use crate::scalar::Real;

/// Inverse of the row-major `n x n` matrix `a` by Gauss–Jordan elimination
/// with partial pivoting. `None` if a pivot vanishes.
pub fn invert<T: Real>(a: &[T], n: usize) -> Option<Vec<T>> {
    let mut m = a.to_vec();
    let mut inv = vec![T::zero(); n * n];
    for i in 0..n {
        inv[i * n + i] = T::one();
    }
    let scale = a.iter().fold(T::zero(), |s, &x| s.max(x.abs()));
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r, &s| m[r * n + col].abs().partial_cmp(&m[s * n + col].abs()).unwrap())?;
        if m[pivot * n + col].abs() <= scale * T::epsilon() * T::of(n) {
            return None;
        }
        if pivot != col {
            for j in 0..n {
                m.swap(pivot * n + j, col * n + j);
                inv.swap(pivot * n + j, col * n + j);
            }
        }
        let d = m[col * n + col];
        for j in 0..n {
            m[col * n + j] /= d;
            inv[col * n + j] /= d;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = m[r * n + col];
            if f == T::zero() {
                continue;
            }
            for j in 0..n {
                let (mc, ic) = (m[col * n + j], inv[col * n + j]);
                m[r * n + j] -= f * mc;
                inv[r * n + j] -= f * ic;
            }
        }
    }
    Some(inv)
}
