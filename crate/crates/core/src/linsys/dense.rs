//! Small dense kernels: block products, LU with partial pivoting.

/// `c -= a * b` for `n×n` row-major blocks.
pub fn gemm_sub(c: &mut [f64], a: &[f64], b: &[f64], n: usize) {
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                c[i * n + j] -= aik * b[k * n + j];
            }
        }
    }
}

/// `a * b` for `n×n` row-major blocks.
pub fn gemm(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            for j in 0..n {
                c[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    c
}

/// `y += a * x` for an `n×n` block.
pub fn gemv_add(y: &mut [f64], a: &[f64], x: &[f64], n: usize) {
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..n {
            s += a[i * n + j] * x[j];
        }
        y[i] += s;
    }
}

/// `y -= a * x` for an `n×n` block.
pub fn gemv_sub(y: &mut [f64], a: &[f64], x: &[f64], n: usize) {
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..n {
            s += a[i * n + j] * x[j];
        }
        y[i] -= s;
    }
}

/// In-place LU factorization with partial pivoting. Returns `None` on an
/// exactly zero or non-finite pivot.
pub fn lu_factor(a: &mut [f64], n: usize) -> Option<Vec<usize>> {
    let mut piv: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let (p, big) = (k..n)
            .map(|i| (i, a[i * n + k].abs()))
            .fold((k, -1.0), |m, x| if x.1 > m.1 { x } else { m });
        if !(big > 0.0) || !big.is_finite() {
            return None;
        }
        if p != k {
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
            }
            piv.swap(k, p);
        }
        let d = a[k * n + k];
        for i in k + 1..n {
            let l = a[i * n + k] / d;
            a[i * n + k] = l;
            if l != 0.0 {
                for j in k + 1..n {
                    a[i * n + j] -= l * a[k * n + j];
                }
            }
        }
    }
    Some(piv)
}

pub fn lu_solve(lu: &[f64], piv: &[usize], b: &[f64], n: usize) -> Vec<f64> {
    let mut x: Vec<f64> = piv.iter().map(|&p| b[p]).collect();
    for i in 0..n {
        for j in 0..i {
            x[i] -= lu[i * n + j] * x[j];
        }
    }
    for i in (0..n).rev() {
        for j in i + 1..n {
            x[i] -= lu[i * n + j] * x[j];
        }
        x[i] /= lu[i * n + i];
    }
    x
}

/// Dense solve of `a x = b`; `None` when `a` is singular.
pub fn solve(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut lu = a.to_vec();
    let piv = lu_factor(&mut lu, n)?;
    Some(lu_solve(&lu, &piv, b, n))
}

pub fn invert(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut lu = a.to_vec();
    let piv = lu_factor(&mut lu, n)?;
    let mut inv = vec![0.0; n * n];
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.fill(0.0);
        e[j] = 1.0;
        let col = lu_solve(&lu, &piv, &e, n);
        for i in 0..n {
            inv[i * n + j] = col[i];
        }
    }
    if inv.iter().all(|v| v.is_finite()) {
        Some(inv)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_3x3() {
        let a = [2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0];
        let x = [1.0, -2.0, 0.5];
        let mut b = [0.0; 3];
        gemv_add(&mut b, &a, &x, 3);
        let got = solve(&a, &b, 3).unwrap();
        for i in 0..3 {
            approx::assert_abs_diff_eq!(got[i], x[i], epsilon = 1e-14);
        }
    }

    #[test]
    fn needs_pivoting() {
        let a = [0.0, 1.0, 1.0, 0.0];
        let inv = invert(&a, 2).unwrap();
        assert_eq!(inv, vec![0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn singular() {
        assert!(invert(&[1.0, 2.0, 2.0, 4.0], 2).is_none());
    }
}
