use super::{axpy, dot, norm2, CsrMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Relative tolerance on `||b - A x|| / ||b||`.
    pub tol: f64,
    pub max_iter: usize,
    /// Krylov dimension between GMRES restarts.
    pub restart: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 2000,
            restart: 40,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SolveStats {
    pub iterations: usize,
    /// Final relative residual `||b - A x|| / ||b||`.
    pub relative_residual: f64,
    /// Residual norm after each iteration.
    pub residual_history: Vec<f64>,
    /// CG only: `1/2 x^T A x - b^T x` after each iteration. It differs from
    /// `1/2 ||x - x*||_A^2` by a constant, so it must never increase.
    pub energy_history: Vec<f64>,
}

/// Jacobi preconditioner; zero diagonal entries fall back to 1.
fn inverse_diagonal(a: &CsrMatrix) -> Vec<f64> {
    a.diagonal()
        .into_iter()
        .map(|d| if d != 0.0 { 1.0 / d } else { 1.0 })
        .collect()
}

fn check_square(a: &CsrMatrix, b: &[f64]) -> Result<()> {
    if a.nrows() != a.ncols() || a.nrows() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} system with right-hand side of length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    Ok(())
}

/// Jacobi-preconditioned conjugate gradient for symmetric positive definite `A`.
pub fn solve_spd(
    a: &CsrMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    opts: &SolveOptions,
) -> Result<(Vec<f64>, SolveStats)> {
    check_square(a, b)?;
    let n = b.len();
    let inv_d = inverse_diagonal(a);
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let bnorm = norm2(b);
    let mut stats = SolveStats::default();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok((x, stats));
    }
    let target = opts.tol * bnorm;

    let mut r = a.mul_vec(&x)?;
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    let mut z: Vec<f64> = r.iter().zip(&inv_d).map(|(ri, d)| ri * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];

    let mut rnorm = norm2(&r);
    while rnorm > target {
        if stats.iterations >= opts.max_iter {
            return Err(Error::NotConverged {
                iterations: stats.iterations,
                residual: rnorm / bnorm,
            });
        }
        a.spmv_unchecked(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::Degenerate(
                "matrix is not positive definite along a search direction".into(),
            ));
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        rnorm = norm2(&r);
        stats.iterations += 1;
        stats.residual_history.push(rnorm);
        stats
            .energy_history
            .push(-0.5 * x.iter().zip(b).zip(&r).map(|((xi, bi), ri)| xi * (bi + ri)).sum::<f64>());

        z.iter_mut()
            .zip(&r)
            .zip(&inv_d)
            .for_each(|((zi, ri), d)| *zi = ri * d);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    stats.relative_residual = rnorm / bnorm;
    Ok((x, stats))
}

/// Restarted GMRES with right Jacobi preconditioning. Holds its Krylov
/// workspace so repeated solves of the same size do not reallocate.
#[derive(Debug, Clone)]
pub struct Gmres {
    n: usize,
    restart: usize,
    basis: Vec<Vec<f64>>,
    hess: Vec<Vec<f64>>,
    cs: Vec<f64>,
    sn: Vec<f64>,
    g: Vec<f64>,
    w: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
}

impl Gmres {
    pub fn new(n: usize, restart: usize) -> Self {
        let m = restart.max(1);
        Self {
            n,
            restart: m,
            basis: vec![vec![0.0; n]; m + 1],
            hess: vec![vec![0.0; m]; m + 1],
            cs: vec![0.0; m],
            sn: vec![0.0; m],
            g: vec![0.0; m + 1],
            w: vec![0.0; n],
            z: vec![0.0; n],
            r: vec![0.0; n],
        }
    }

    fn residual(&mut self, a: &CsrMatrix, b: &[f64], x: &[f64]) -> f64 {
        a.spmv_unchecked(x, &mut self.r);
        self.r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
        norm2(&self.r)
    }

    /// Solves `A x = b` in place, starting from the incoming `x`.
    pub fn solve(
        &mut self,
        a: &CsrMatrix,
        inv_diag: &[f64],
        b: &[f64],
        x: &mut [f64],
        opts: &SolveOptions,
        record_history: bool,
    ) -> Result<SolveStats> {
        check_square(a, b)?;
        if b.len() != self.n || x.len() != self.n || inv_diag.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "GMRES workspace of size {} used with system of size {}",
                self.n,
                b.len()
            )));
        }
        let mut stats = SolveStats::default();
        let bnorm = norm2(b);
        if bnorm == 0.0 {
            x.iter_mut().for_each(|v| *v = 0.0);
            return Ok(stats);
        }
        let target = opts.tol * bnorm;
        let mut beta = self.residual(a, b, x);

        while beta > target {
            if stats.iterations >= opts.max_iter {
                return Err(Error::NotConverged {
                    iterations: stats.iterations,
                    residual: beta / bnorm,
                });
            }
            let inv_beta = 1.0 / beta;
            for (v, r) in self.basis[0].iter_mut().zip(&self.r) {
                *v = r * inv_beta;
            }
            self.g.iter_mut().for_each(|v| *v = 0.0);
            self.g[0] = beta;

            let mut k = 0;
            for j in 0..self.restart {
                for ((zi, vi), di) in self.z.iter_mut().zip(&self.basis[j]).zip(inv_diag) {
                    *zi = vi * di;
                }
                a.spmv_unchecked(&self.z, &mut self.w);
                for i in 0..=j {
                    let h = dot(&self.w, &self.basis[i]);
                    self.hess[i][j] = h;
                    axpy(-h, &self.basis[i], &mut self.w);
                }
                let hnext = norm2(&self.w);
                self.hess[j + 1][j] = hnext;
                if hnext > 0.0 {
                    let inv = 1.0 / hnext;
                    for (v, wi) in self.basis[j + 1].iter_mut().zip(&self.w) {
                        *v = wi * inv;
                    }
                }
                for i in 0..j {
                    let (c, s) = (self.cs[i], self.sn[i]);
                    let (h0, h1) = (self.hess[i][j], self.hess[i + 1][j]);
                    self.hess[i][j] = c * h0 + s * h1;
                    self.hess[i + 1][j] = -s * h0 + c * h1;
                }
                let (h0, h1) = (self.hess[j][j], self.hess[j + 1][j]);
                let denom = h0.hypot(h1);
                let (c, s) = if denom == 0.0 { (1.0, 0.0) } else { (h0 / denom, h1 / denom) };
                self.cs[j] = c;
                self.sn[j] = s;
                self.hess[j][j] = denom;
                self.hess[j + 1][j] = 0.0;
                self.g[j + 1] = -s * self.g[j];
                self.g[j] *= c;

                stats.iterations += 1;
                k = j + 1;
                let estimate = self.g[j + 1].abs();
                if record_history {
                    stats.residual_history.push(estimate);
                }
                if estimate <= target || hnext == 0.0 || stats.iterations >= opts.max_iter {
                    break;
                }
            }

            // Back substitution on the rotated Hessenberg system.
            let mut y = vec![0.0; k];
            for i in (0..k).rev() {
                let mut acc = self.g[i];
                for l in i + 1..k {
                    acc -= self.hess[i][l] * y[l];
                }
                y[i] = if self.hess[i][i] != 0.0 { acc / self.hess[i][i] } else { 0.0 };
            }
            self.w.iter_mut().for_each(|v| *v = 0.0);
            for (i, yi) in y.iter().enumerate() {
                axpy(*yi, &self.basis[i], &mut self.w);
            }
            for ((xi, wi), di) in x.iter_mut().zip(&self.w).zip(inv_diag) {
                *xi += wi * di;
            }
            let previous = beta;
            beta = self.residual(a, b, x);
            if beta > target && beta >= previous && k < self.restart {
                // Lucky breakdown that did not reduce the true residual: stagnation.
                return Err(Error::NotConverged {
                    iterations: stats.iterations,
                    residual: beta / bnorm,
                });
            }
        }
        stats.relative_residual = beta / bnorm;
        Ok(stats)
    }
}

/// Jacobi-preconditioned restarted GMRES for general nonsingular `A`.
pub fn solve_general(
    a: &CsrMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    opts: &SolveOptions,
) -> Result<(Vec<f64>, SolveStats)> {
    check_square(a, b)?;
    let n = b.len();
    let inv_d = inverse_diagonal(a);
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut gmres = Gmres::new(n, opts.restart.min(n.max(1)));
    let stats = gmres.solve(a, &inv_d, b, &mut x, opts, true)?;
    Ok((x, stats))
}

/// Row-sum lumping: `diag(sum_j M_ij)`. Row sums that vanish up to rounding
/// count as non-positive.
pub fn lump(m: &CsrMatrix) -> Result<CsrMatrix> {
    let sums = m.row_sums();
    let scale = sums.iter().fold(0.0f64, |a, s| a.max(s.abs()));
    let floor = 1e-12 * scale;
    if let Some((row, &sum)) = sums.iter().enumerate().find(|(_, s)| **s <= floor) {
        return Err(Error::NonPositiveRowSum { row, sum });
    }
    Ok(CsrMatrix::diagonal_matrix(&sums))
}
