use alloc::vec::Vec;

/// Solves `a x = b` in place by Gaussian elimination with partial
/// pivoting. `a` is row-major `n × n`. Returns `None` when a pivot falls
/// below `tiny` times the largest entry.
pub(crate) fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize) -> Option<()> {
    debug_assert_eq!(a.len(), n * n);
    let scale = a.iter().fold(0.0f64, |m, v| m.max(libm::fabs(*v)));
    let tiny = 1e-14 * scale.max(f64::MIN_POSITIVE);
    for col in 0..n {
        let (piv, best) = (col..n)
            .map(|r| (r, libm::fabs(a[r * n + col])))
            .fold((col, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if !(best > tiny) {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] / d;
            if f != 0.0 {
                for k in col..n {
                    a[r * n + k] -= f * a[col * n + k];
                }
                b[r] -= f * b[col];
            }
        }
    }
    for col in (0..n).rev() {
        let mut s = b[col];
        for k in col + 1..n {
            s -= a[col * n + k] * b[k];
        }
        b[col] = s / a[col * n + col];
    }
    Some(())
}

#[allow(dead_code)]
pub(crate) fn identity(n: usize) -> Vec<f64> {
    let mut m = alloc::vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn solves_small_system() {
        let mut a = vec![0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0];
        let mut b = vec![5.0, 3.0, 6.0];
        solve_dense(&mut a, &mut b, 3).unwrap();
        // x = (1, 2, 3)... check by substitution
        let a0 = [0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0];
        for r in 0..3 {
            let lhs: f64 = (0..3).map(|k| a0[r * 3 + k] * b[k]).sum();
            assert!((lhs - [5.0, 3.0, 6.0][r]).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_detected() {
        let mut a = vec![1.0, 2.0, 2.0, 4.0];
        let mut b = vec![1.0, 2.0];
        assert!(solve_dense(&mut a, &mut b, 2).is_none());
        let mut i = identity(2);
        let mut b = vec![3.0, 4.0];
        solve_dense(&mut i, &mut b, 2).unwrap();
        assert_eq!(b, vec![3.0, 4.0]);
    }
}
