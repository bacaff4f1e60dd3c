//! Sparse matrices and the Krylov solvers used by assembly and time stepping.

mod krylov;
mod sparse;

pub use krylov::{lump, solve_general, solve_spd, Gmres, SolveOptions, SolveStats};
pub use sparse::{CooBuilder, CsrMatrix};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
