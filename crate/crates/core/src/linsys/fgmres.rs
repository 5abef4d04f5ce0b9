use super::{BlockIlu, BlockMatrix, Comm, Csr, LinearReport, LinsysError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Relative residual target `‖b − Au‖ / ‖b‖`.
    pub tol: f64,
    pub restart: usize,
    pub max_iters: usize,
}

impl Default for SolveOptions {
    fn default() -> SolveOptions {
        SolveOptions {
            tol: 1e-4,
            restart: 30,
            max_iters: 200,
        }
    }
}

type Parts = Vec<Vec<f64>>;

struct System<'a> {
    csr: Vec<Csr>,
    ilu: Vec<BlockIlu>,
    comm: &'a dyn Comm,
    nb: usize,
}

impl System<'_> {
    fn zeros(&self) -> Parts {
        self.csr.iter().map(|c| vec![0.0; c.n_rows * self.nb]).collect()
    }

    fn dot(&self, a: &Parts, b: &Parts) -> f64 {
        let partials: Vec<f64> = a
            .iter()
            .zip(b)
            .map(|(x, y)| x.iter().zip(y).map(|(u, v)| u * v).sum())
            .collect();
        self.comm.sum(&partials)
    }

    fn norm(&self, a: &Parts) -> f64 {
        self.dot(a, a).sqrt()
    }

    fn matvec(&self, x: &Parts) -> Parts {
        let nb = self.nb;
        let mut full: Parts = self
            .csr
            .iter()
            .zip(x)
            .map(|(c, xp)| {
                let mut f = vec![0.0; c.n_cols * nb];
                f[..xp.len()].copy_from_slice(xp);
                f
            })
            .collect();
        self.comm.exchange(&mut full, nb);
        let mut y = self.zeros();
        for (p, c) in self.csr.iter().enumerate() {
            c.matvec(&full[p], &mut y[p]);
        }
        y
    }

    fn precond(&self, x: &Parts) -> Parts {
        let mut z = self.zeros();
        for (p, m) in self.ilu.iter().enumerate() {
            m.apply(&x[p], &mut z[p]);
        }
        z
    }
}

fn axpy(y: &mut Parts, a: f64, x: &Parts) {
    for (yp, xp) in y.iter_mut().zip(x) {
        for (u, v) in yp.iter_mut().zip(xp) {
            *u += a * v;
        }
    }
}

fn scale(x: &mut Parts, a: f64) {
    for xp in x.iter_mut() {
        for u in xp.iter_mut() {
            *u *= a;
        }
    }
}

/// Right-preconditioned restarted FGMRES with block-ILU(0) per part and
/// block-Jacobi coupling between parts. `mats` are the group members' rows
/// in rank order; each receives its slice of the solution in `u`.
pub fn solve(mats: &mut [BlockMatrix], comm: &dyn Comm, opts: &SolveOptions) -> Result<LinearReport, LinsysError> {
    debug_assert_eq!(mats.len(), comm.n_parts());
    let nb = mats.first().map_or(1, |m| m.nb);
    let csr: Vec<Csr> = mats.iter().map(|m| m.to_csr()).collect();
    let ilu: Vec<BlockIlu> = csr.iter().map(BlockIlu::new).collect();
    let fallback = ilu.iter().any(|m| m.is_jacobi());
    let sys = System { csr, ilu, comm, nb };
    let b: Parts = mats.iter().map(|m| m.b.clone()).collect();
    let bnorm = sys.norm(&b);
    let mut x = sys.zeros();
    let mut report = LinearReport {
        iterations: 0,
        residual: 0.0,
        converged: true,
        fallback,
    };
    if bnorm == 0.0 || !bnorm.is_finite() {
        for m in mats.iter_mut() {
            m.u.fill(0.0);
        }
        if !bnorm.is_finite() {
            return Err(LinsysError::NoConvergence {
                iterations: 0,
                residual: f64::NAN,
            });
        }
        return Ok(report);
    }
    let m = opts.restart.max(1);
    let mut iters = 0;
    let mut r = b.clone();
    let mut rel;
    'outer: loop {
        let beta = sys.norm(&r);
        rel = beta / bnorm;
        if rel <= opts.tol || iters >= opts.max_iters {
            break;
        }
        let mut v: Vec<Parts> = Vec::with_capacity(m + 1);
        let mut z: Vec<Parts> = Vec::with_capacity(m);
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut v0 = r.clone();
        scale(&mut v0, 1.0 / beta);
        v.push(v0);
        let mut k = 0;
        while k < m && iters < opts.max_iters {
            let zk = sys.precond(&v[k]);
            let mut w = sys.matvec(&zk);
            z.push(zk);
            for (i, vi) in v.iter().enumerate() {
                let hik = sys.dot(&w, vi);
                h[i][k] = hik;
                axpy(&mut w, -hik, vi);
            }
            let hn = sys.norm(&w);
            h[k + 1][k] = hn;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let den = h[k][k].hypot(h[k + 1][k]);
            if den == 0.0 || !den.is_finite() {
                break;
            }
            cs[k] = h[k][k] / den;
            sn[k] = h[k + 1][k] / den;
            h[k][k] = den;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            iters += 1;
            k += 1;
            rel = g[k].abs() / bnorm;
            if rel <= opts.tol || hn == 0.0 {
                break;
            }
            let mut vk = w;
            scale(&mut vk, 1.0 / hn);
            v.push(vk);
        }
        if k == 0 {
            break 'outer;
        }
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (j, zj) in z.iter().enumerate().take(k) {
            axpy(&mut x, y[j], zj);
        }
        let ax = sys.matvec(&x);
        r = b.clone();
        axpy(&mut r, -1.0, &ax);
    }
    for (mp, xp) in mats.iter_mut().zip(&x) {
        mp.u.copy_from_slice(xp);
    }
    report.iterations = iters;
    report.residual = rel;
    report.converged = rel <= opts.tol;
    if !report.converged {
        return Err(LinsysError::NoConvergence {
            iterations: iters,
            residual: rel,
        });
    }
    Ok(report)
}
