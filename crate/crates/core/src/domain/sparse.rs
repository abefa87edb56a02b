//! Compressed-column matrices with a fixed sparsity pattern and a sparse
//! direct solver behind them.

use std::sync::{Arc, OnceLock};

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::Mat;

use crate::{Error, Result};

/// Sparsity pattern in compressed-column form (row indices sorted per column).
#[derive(Debug)]
pub struct SparsePattern {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    symbolic_lu: OnceLock<std::result::Result<SymbolicLu<usize>, String>>,
}

impl SparsePattern {
    /// Builds a pattern from `(row, col)` pairs; duplicates are merged.
    pub fn from_entries(nrows: usize, ncols: usize, mut entries: Vec<(usize, usize)>) -> Self {
        entries.sort_unstable_by_key(|&(r, c)| (c, r));
        entries.dedup();
        let mut col_ptr = vec![0usize; ncols + 1];
        let mut row_idx = Vec::with_capacity(entries.len());
        for &(r, c) in &entries {
            debug_assert!(r < nrows && c < ncols);
            col_ptr[c + 1] += 1;
            row_idx.push(r);
        }
        for c in 0..ncols {
            col_ptr[c + 1] += col_ptr[c];
        }
        Self {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            symbolic_lu: OnceLock::new(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    /// Storage slot of entry `(row, col)`, if it is part of the pattern.
    #[inline]
    pub fn position(&self, row: usize, col: usize) -> Option<usize> {
        let lo = self.col_ptr[col];
        let hi = self.col_ptr[col + 1];
        self.row_idx[lo..hi]
            .binary_search(&row)
            .ok()
            .map(|k| lo + k)
    }

    fn symbolic(&self) -> SymbolicSparseColMatRef<'_, usize> {
        SymbolicSparseColMatRef::new_checked(
            self.nrows,
            self.ncols,
            &self.col_ptr,
            None,
            &self.row_idx,
        )
    }

    fn symbolic_lu(&self) -> Result<SymbolicLu<usize>> {
        self.symbolic_lu
            .get_or_init(|| SymbolicLu::try_new(self.symbolic()).map_err(|e| format!("{e:?}")))
            .clone()
            .map_err(|e| Error::Assembly(format!("symbolic factorization failed: {e}")))
    }
}

/// Matrix values on a shared [`SparsePattern`].
#[derive(Debug, Clone)]
pub struct CscMatrix {
    pattern: Arc<SparsePattern>,
    values: Vec<f64>,
}

impl CscMatrix {
    pub fn zeros(pattern: Arc<SparsePattern>) -> Self {
        let nnz = pattern.nnz();
        Self {
            pattern,
            values: vec![0.0; nnz],
        }
    }

    pub fn pattern(&self) -> &Arc<SparsePattern> {
        &self.pattern
    }

    pub fn nrows(&self) -> usize {
        self.pattern.nrows
    }

    pub fn ncols(&self) -> usize {
        self.pattern.ncols
    }

    pub fn clear(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Adds `v` to entry `(row, col)`; the entry must be in the pattern.
    #[inline]
    pub fn add(&mut self, row: usize, col: usize, v: f64) {
        let k = self
            .pattern
            .position(row, col)
            .unwrap_or_else(|| panic!("entry ({row}, {col}) not in sparsity pattern"));
        self.values[k] += v;
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pattern
            .position(row, col)
            .map_or(0.0, |k| self.values[k])
    }

    /// `self += alpha * other` for matrices on the same pattern.
    pub fn axpy(&mut self, alpha: f64, other: &CscMatrix) {
        assert!(
            Arc::ptr_eq(&self.pattern, &other.pattern),
            "pattern mismatch"
        );
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.values.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows()];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols());
        y.iter_mut().for_each(|v| *v = 0.0);
        let p = &self.pattern;
        for c in 0..p.ncols {
            let xc = x[c];
            if xc == 0.0 {
                continue;
            }
            for k in p.col_ptr[c]..p.col_ptr[c + 1] {
                y[p.row_idx[k]] += self.values[k] * xc;
            }
        }
    }

    /// `Σ_j |a_ij x_j|` per row, the natural scale of a residual `A x − b`.
    pub fn abs_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let p = &self.pattern;
        let mut y = vec![0.0; p.nrows];
        for c in 0..p.ncols {
            let xc = x[c].abs();
            if xc == 0.0 {
                continue;
            }
            for k in p.col_ptr[c]..p.col_ptr[c + 1] {
                y[p.row_idx[k]] += (self.values[k] * xc).abs();
            }
        }
        y
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let p = &self.pattern;
        let mut s = 0.0;
        for c in 0..p.ncols {
            for k in p.col_ptr[c]..p.col_ptr[c + 1] {
                s += x[p.row_idx[k]] * self.values[k] * y[c];
            }
        }
        s
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let p = &self.pattern;
        let mut r = vec![0.0; p.nrows];
        for c in 0..p.ncols {
            for k in p.col_ptr[c]..p.col_ptr[c + 1] {
                r[p.row_idx[k]] += self.values[k];
            }
        }
        r
    }

    /// Iterates `(row, col, value)` over stored entries.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let p = &self.pattern;
        (0..p.ncols).flat_map(move |c| {
            (p.col_ptr[c]..p.col_ptr[c + 1]).map(move |k| (p.row_idx[k], c, self.values[k]))
        })
    }

    /// LU factorization with partial pivoting.
    pub fn factorize(&self) -> Result<LuFactors> {
        let symbolic = self.pattern.symbolic_lu()?;
        let mat = SparseColMatRef::new(self.pattern.symbolic(), &self.values);
        let lu = Lu::try_new_with_symbolic(symbolic, mat)
            .map_err(|e| Error::Assembly(format!("numeric LU failed: {e:?}")))?;
        Ok(LuFactors {
            lu,
            n: self.nrows(),
        })
    }
}

/// Factorized sparse matrix.
pub struct LuFactors {
    lu: Lu<usize, f64>,
    n: usize,
}

impl LuFactors {
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(rhs.len(), self.n);
        let b = Mat::<f64>::from_fn(self.n, 1, |i, _| rhs[i]);
        let x = self.lu.solve(&b);
        let out: Vec<f64> = (0..self.n).map(|i| x[(i, 0)]).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Assembly(
                "linear solve produced non-finite values (singular system)".into(),
            ));
        }
        Ok(out)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
