use super::dense::{gemm, gemm_sub, gemv_add, gemv_sub, invert};
use super::Csr;

/// Block-ILU(0) of the square interior part of one worker's rows.
/// Falls back to block-Jacobi when a diagonal block is singular.
#[derive(Debug, Clone)]
pub struct BlockIlu {
    nb: usize,
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
    diag: Vec<usize>,
    dinv: Vec<f64>,
    jacobi: bool,
}

impl BlockIlu {
    pub fn new(a: &Csr) -> BlockIlu {
        let nb = a.nb;
        let nb2 = nb * nb;
        let n = a.n_rows;
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        let mut diag = Vec::with_capacity(n);
        for r in 0..n {
            let mut have_diag = false;
            for k in a.row_ptr[r]..a.row_ptr[r + 1] {
                let c = a.col_idx[k];
                if c >= n {
                    continue;
                }
                if c > r && !have_diag {
                    diag.push(col_idx.len());
                    col_idx.push(r);
                    vals.extend(std::iter::repeat_n(0.0, nb2));
                    have_diag = true;
                }
                if c == r {
                    diag.push(col_idx.len());
                    have_diag = true;
                }
                col_idx.push(c);
                vals.extend_from_slice(a.block(k));
            }
            if !have_diag {
                diag.push(col_idx.len());
                col_idx.push(r);
                vals.extend(std::iter::repeat_n(0.0, nb2));
            }
            row_ptr.push(col_idx.len());
        }
        let orig = vals.clone();
        let mut ilu = BlockIlu {
            nb,
            n,
            row_ptr,
            col_idx,
            vals,
            diag,
            dinv: vec![0.0; n * nb2],
            jacobi: false,
        };
        if !ilu.factor() {
            ilu.vals = orig;
            ilu.jacobi = true;
            for i in 0..n {
                let d = ilu.diag[i];
                let inv = invert(&ilu.vals[d * nb2..(d + 1) * nb2], nb).unwrap_or_else(|| identity(nb));
                ilu.dinv[i * nb2..(i + 1) * nb2].copy_from_slice(&inv);
            }
        }
        ilu
    }

    /// Whether the factorization fell back to block-Jacobi.
    pub fn is_jacobi(&self) -> bool {
        self.jacobi
    }

    fn factor(&mut self) -> bool {
        let nb = self.nb;
        let nb2 = nb * nb;
        for i in 0..self.n {
            for kk in self.row_ptr[i]..self.diag[i] {
                let k = self.col_idx[kk];
                let l = gemm(&self.vals[kk * nb2..(kk + 1) * nb2], &self.dinv[k * nb2..(k + 1) * nb2], nb);
                self.vals[kk * nb2..(kk + 1) * nb2].copy_from_slice(&l);
                for jj in self.diag[k] + 1..self.row_ptr[k + 1] {
                    let j = self.col_idx[jj];
                    let row = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
                    if let Ok(p) = row.binary_search(&j) {
                        let at = self.row_ptr[i] + p;
                        let ukj = self.vals[jj * nb2..(jj + 1) * nb2].to_vec();
                        gemm_sub(&mut self.vals[at * nb2..(at + 1) * nb2], &l, &ukj, nb);
                    }
                }
            }
            let d = self.diag[i];
            match invert(&self.vals[d * nb2..(d + 1) * nb2], nb) {
                Some(inv) => self.dinv[i * nb2..(i + 1) * nb2].copy_from_slice(&inv),
                None => return false,
            }
        }
        true
    }

    /// `z = M⁻¹ x` over the interior entries.
    pub fn apply(&self, x: &[f64], z: &mut [f64]) {
        let nb = self.nb;
        let nb2 = nb * nb;
        if self.jacobi {
            for i in 0..self.n {
                let zi = &mut z[i * nb..(i + 1) * nb];
                zi.fill(0.0);
                gemv_add(zi, &self.dinv[i * nb2..(i + 1) * nb2], &x[i * nb..(i + 1) * nb], nb);
            }
            return;
        }
        let mut y = x[..self.n * nb].to_vec();
        for i in 0..self.n {
            for kk in self.row_ptr[i]..self.diag[i] {
                let k = self.col_idx[kk];
                let (head, tail) = y.split_at_mut(i * nb);
                gemv_sub(&mut tail[..nb], &self.vals[kk * nb2..(kk + 1) * nb2], &head[k * nb..(k + 1) * nb], nb);
            }
        }
        for i in (0..self.n).rev() {
            let mut t = y[i * nb..(i + 1) * nb].to_vec();
            for jj in self.diag[i] + 1..self.row_ptr[i + 1] {
                let j = self.col_idx[jj];
                gemv_sub(&mut t, &self.vals[jj * nb2..(jj + 1) * nb2], &z[j * nb..(j + 1) * nb], nb);
            }
            let zi = &mut z[i * nb..(i + 1) * nb];
            zi.fill(0.0);
            gemv_add(zi, &self.dinv[i * nb2..(i + 1) * nb2], &t, nb);
        }
    }
}

fn identity(nb: usize) -> Vec<f64> {
    let mut m = vec![0.0; nb * nb];
    for i in 0..nb {
        m[i * nb + i] = 1.0;
    }
    m
}
