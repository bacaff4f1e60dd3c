use crate::error::{Error, Result};

/// Coordinate-format staging buffer. Duplicate entries are summed on `build`.
#[derive(Debug, Clone)]
pub struct CooBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl CooBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, capacity: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::with_capacity(capacity),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    /// Appends every entry of `other` (same shape).
    pub fn merge(&mut self, other: CooBuilder) {
        debug_assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        self.entries.extend(other.entries);
    }

    /// Appends `scale * m`, shifted by (`row_offset`, `col_offset`).
    pub fn push_matrix(&mut self, m: &CsrMatrix, scale: f64, row_offset: usize, col_offset: usize) {
        for i in 0..m.nrows() {
            for (j, v) in m.row(i) {
                self.push(i + row_offset, j + col_offset, scale * v);
            }
        }
    }

    pub fn build(mut self) -> CsrMatrix {
        // Stable, so duplicates are summed in insertion order: symmetric
        // contributions pushed symmetrically stay bitwise symmetric.
        self.entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::with_capacity(self.entries.len());
        let mut data: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *data.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                data.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..self.nrows {
            indptr[i + 1] += indptr[i];
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr,
            indices,
            data,
        }
    }
}

/// Compressed sparse row matrix with sorted, duplicate-free column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal_matrix(&vec![1.0; n])
    }

    pub fn diagonal_matrix(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            data: diag.to_vec(),
        }
    }

    /// Builds from a dense row-major matrix, dropping exact zeros.
    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut coo = CooBuilder::new(nrows, ncols);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    coo.push(i, j, v);
                }
            }
        }
        coo.build()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        out
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.data[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.indptr[i]..self.indptr[i + 1];
        match self.indices[span.clone()].binary_search(&j) {
            Ok(k) => self.data[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nrows).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    /// `y = A x`
    pub fn spmv(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        if x.len() != self.ncols || y.len() != self.nrows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix applied to vector of length {} into {}",
                self.nrows,
                self.ncols,
                x.len(),
                y.len()
            )));
        }
        self.spmv_unchecked(x, y);
        Ok(())
    }

    pub(crate) fn spmv_unchecked(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let (a, b) = (self.indptr[i], self.indptr[i + 1]);
            let mut acc = 0.0;
            for k in a..b {
                acc += self.data[k] * x[self.indices[k]];
            }
            *yi = acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.nrows];
        self.spmv(x, &mut y)?;
        Ok(y)
    }

    /// `x^T A x`
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (i, xi) in x.iter().enumerate().take(self.nrows) {
            let mut row = 0.0;
            for (j, v) in self.row(i) {
                row += v * x[j];
            }
            acc += xi * row;
        }
        acc
    }

    /// `x^T A y`
    pub fn bilinear_form(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (i, xi) in x.iter().enumerate().take(self.nrows) {
            let mut row = 0.0;
            for (j, v) in self.row(i) {
                row += v * y[j];
            }
            acc += xi * row;
        }
        acc
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut coo = CooBuilder::with_capacity(self.ncols, self.nrows, self.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                coo.push(j, i, v);
            }
        }
        coo.build()
    }

    pub fn scaled(&self, alpha: f64) -> CsrMatrix {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    /// `sum_k coef_k * A_k` over matrices of identical shape.
    pub fn linear_combination(terms: &[(f64, &CsrMatrix)]) -> Result<CsrMatrix> {
        let (nrows, ncols) = match terms.first() {
            Some((_, m)) => (m.nrows, m.ncols),
            None => return Err(Error::DimensionMismatch("empty combination".into())),
        };
        let mut coo = CooBuilder::with_capacity(
            nrows,
            ncols,
            terms.iter().map(|(_, m)| m.nnz()).sum(),
        );
        for (c, m) in terms {
            if (m.nrows, m.ncols) != (nrows, ncols) {
                return Err(Error::DimensionMismatch(format!(
                    "cannot combine {}x{} with {}x{}",
                    nrows, ncols, m.nrows, m.ncols
                )));
            }
            coo.push_matrix(m, *c, 0, 0);
        }
        Ok(coo.build())
    }

    /// Largest `|A_ij - B_ij|` over the union of both patterns.
    pub fn max_abs_diff(&self, other: &CsrMatrix) -> Result<f64> {
        let diff = CsrMatrix::linear_combination(&[(1.0, self), (-1.0, other)])?;
        Ok(diff.data.iter().fold(0.0f64, |m, v| m.max(v.abs())))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `max |A - A^T|`, exact (no tolerance).
    pub fn asymmetry(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        self.max_abs_diff(&self.transpose()).unwrap_or(f64::INFINITY)
    }

    /// Extracts rows `r0..r1` and columns `c0..c1`.
    pub fn block(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> CsrMatrix {
        let mut coo = CooBuilder::new(rows.len(), cols.len());
        for i in rows.clone() {
            for (j, v) in self.row(i) {
                if cols.contains(&j) {
                    coo.push(i - rows.start, j - cols.start, v);
                }
            }
        }
        coo.build()
    }

    /// `D A D` for a diagonal `D` given as a vector.
    pub fn symmetric_scale(&self, d: &[f64]) -> CsrMatrix {
        let mut out = self.clone();
        for i in 0..out.nrows {
            for k in out.indptr[i]..out.indptr[i + 1] {
                out.data[k] *= d[i] * d[out.indices[k]];
            }
        }
        out
    }

    /// Replaces every listed row by the corresponding identity row.
    pub fn replace_rows_with_identity(&self, rows: &[usize]) -> CsrMatrix {
        let mut mark = vec![false; self.nrows];
        for &r in rows {
            mark[r] = true;
        }
        let mut coo = CooBuilder::with_capacity(self.nrows, self.ncols, self.nnz());
        for (i, &constrained) in mark.iter().enumerate() {
            if constrained {
                coo.push(i, i, 1.0);
            } else {
                for (j, v) in self.row(i) {
                    coo.push(i, j, v);
                }
            }
        }
        coo.build()
    }
}
