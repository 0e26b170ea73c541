//! Symmetric sparse matrices in compressed row form and preconditioned
//! conjugate gradients.

use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error(
        "conjugate gradients did not converge in {iterations} iterations (residual {residual:e})"
    )]
    NotConverged { iterations: usize, residual: f64 },
    #[error("dimension mismatch: matrix is {expected}×{expected}, vector has {found} entries")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrices do not share a sparsity pattern")]
    PatternMismatch,
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("conjugate gradients broke down: non-positive curvature {0:e}")]
    Breakdown(f64),
}

/// Row offsets and sorted column indices of an `n × n` matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityPattern {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
}

impl SparsityPattern {
    /// Builds the pattern from per-row column lists (duplicates allowed).
    pub fn from_rows(rows: Vec<Vec<usize>>) -> Self {
        let n = rows.len();
        let mut row_offsets = Vec::with_capacity(n + 1);
        let mut col_indices = Vec::new();
        row_offsets.push(0);
        for mut cols in rows {
            cols.sort_unstable();
            cols.dedup();
            debug_assert!(cols.last().map_or(true, |&c| c < n));
            col_indices.extend(cols);
            row_offsets.push(col_indices.len());
        }
        SparsityPattern {
            n,
            row_offsets,
            col_indices,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.col_indices[self.row_offsets[i]..self.row_offsets[i + 1]]
    }

    /// Position of entry `(i, j)` in the value array.
    pub fn index_of(&self, i: usize, j: usize) -> Option<usize> {
        let start = self.row_offsets[i];
        self.row(i).binary_search(&j).ok().map(|k| start + k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pattern: Arc<SparsityPattern>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(pattern: Arc<SparsityPattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        CsrMatrix { pattern, values }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let pattern = SparsityPattern::from_rows((0..d.len()).map(|i| vec![i]).collect());
        CsrMatrix {
            pattern: Arc::new(pattern),
            values: d.to_vec(),
        }
    }

    /// Dense row-major input; zeros are dropped.
    pub fn from_dense(n: usize, dense: &[f64]) -> Self {
        assert_eq!(dense.len(), n * n);
        let rows = (0..n)
            .map(|i| (0..n).filter(|&j| dense[i * n + j] != 0.0).collect())
            .collect();
        let pattern = Arc::new(SparsityPattern::from_rows(rows));
        let mut m = CsrMatrix::zeros(pattern);
        for i in 0..n {
            for j in 0..n {
                if let Some(k) = m.pattern.index_of(i, j) {
                    m.values[k] = dense[i * n + j];
                }
            }
        }
        m
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn dim(&self) -> usize {
        self.pattern.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.index_of(i, j).map_or(0.0, |k| self.values[k])
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.dim();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for (k, &j) in self.pattern.row(i).iter().enumerate() {
                d[i * n + j] = self.values[self.pattern.row_offsets[i] + k];
            }
        }
        d
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        let p = &self.pattern;
        for (i, yi) in y.iter_mut().enumerate() {
            let (s, e) = (p.row_offsets[i], p.row_offsets[i + 1]);
            let mut acc = 0.0;
            for k in s..e {
                acc += self.values[k] * x[p.col_indices[k]];
            }
            *yi = acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// Applies the matrix to each length-`n` block of a component-major vector.
    pub fn mul_block(&self, x: &[f64], n: usize) -> Vec<f64> {
        assert_eq!(n, self.dim());
        let mut y = vec![0.0; x.len()];
        y.par_chunks_mut(n)
            .zip(x.par_chunks(n))
            .for_each(|(yb, xb)| self.mul_vec_into(xb, yb));
        y
    }

    /// `xᵀ A x`
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.mul_vec(x))
    }

    /// `a·self + b·other` on the shared pattern.
    pub fn linear_combination(
        &self,
        a: f64,
        other: &CsrMatrix,
        b: f64,
    ) -> Result<CsrMatrix, SolveError> {
        if !Arc::ptr_eq(&self.pattern, &other.pattern) && self.pattern != other.pattern {
            return Err(SolveError::PatternMismatch);
        }
        Ok(CsrMatrix {
            pattern: Arc::clone(&self.pattern),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        })
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim() {
            for &j in self.pattern.row(i) {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preconditioner {
    None,
    Jacobi,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Defaults to `10·N` when unset.
    pub max_iterations: Option<usize>,
    pub preconditioner: Preconditioner,
}

impl Default for CgConfig {
    fn default() -> Self {
        CgConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_iterations: None,
            preconditioner: Preconditioner::Jacobi,
        }
    }
}

impl CgConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol >= 0.0) {
            return Err(SolveError::InvalidConfig(format!(
                "tolerances must be positive (rel {}, abs {})",
                self.rel_tol, self.abs_tol
            )));
        }
        if self.max_iterations == Some(0) {
            return Err(SolveError::InvalidConfig(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Euclidean norm of the final recursive residual.
    pub residual: f64,
    /// Residual norm before the first and after every iteration.
    pub residual_history: Vec<f64>,
}

/// Solves `A x = b` for symmetric positive definite `A`, starting at zero.
pub fn cg_solve(a: &CsrMatrix, b: &[f64], config: &CgConfig) -> Result<CgSolution, SolveError> {
    cg_solve_from(a, b, None, config)
}

/// Conjugate gradients from an optional initial guess; stops when
/// `‖r‖ ≤ max(rel_tol·‖b‖, abs_tol)`.
pub fn cg_solve_from(
    a: &CsrMatrix,
    b: &[f64],
    guess: Option<&[f64]>,
    config: &CgConfig,
) -> Result<CgSolution, SolveError> {
    config.validate()?;
    let inv_diag = match config.preconditioner {
        Preconditioner::Jacobi => Some(jacobi(a)),
        Preconditioner::None => None,
    };
    pcg(a, b, guess, inv_diag.as_deref(), config)
}

fn jacobi(a: &CsrMatrix) -> Vec<f64> {
    a.diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect()
}

fn pcg(
    a: &CsrMatrix,
    b: &[f64],
    guess: Option<&[f64]>,
    inv_diag: Option<&[f64]>,
    config: &CgConfig,
) -> Result<CgSolution, SolveError> {
    let n = a.dim();
    if b.len() != n {
        return Err(SolveError::DimensionMismatch {
            expected: n,
            found: b.len(),
        });
    }
    if let Some(g) = guess {
        if g.len() != n {
            return Err(SolveError::DimensionMismatch {
                expected: n,
                found: g.len(),
            });
        }
    }
    let max_iter = config.max_iterations.unwrap_or(10 * n.max(1));
    let target = (config.rel_tol * norm(b)).max(config.abs_tol);

    let mut x = guess.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut r = b.to_vec();
    let mut ap = vec![0.0; n];
    if guess.is_some() {
        a.mul_vec_into(&x, &mut ap);
        for (ri, api) in r.iter_mut().zip(&ap) {
            *ri -= api;
        }
    }
    let precondition = |r: &[f64], z: &mut [f64]| match inv_diag {
        Some(d) => z
            .iter_mut()
            .zip(r.iter().zip(d))
            .for_each(|(z, (r, d))| *z = r * d),
        None => z.copy_from_slice(r),
    };

    let mut rnorm = norm(&r);
    let mut history = vec![rnorm];
    if rnorm <= target {
        return Ok(CgSolution {
            x,
            iterations: 0,
            residual: rnorm,
            residual_history: history,
        });
    }
    let mut z = vec![0.0; n];
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);

    for it in 1..=max_iter {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(SolveError::Breakdown(pap));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rnorm = norm(&r);
        history.push(rnorm);
        if rnorm <= target {
            return Ok(CgSolution {
                x,
                iterations: it,
                residual: rnorm,
                residual_history: history,
            });
        }
        precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(SolveError::NotConverged {
        iterations: max_iter,
        residual: rnorm,
    })
}

/// Solves `A X = B` column by column, sharing one Jacobi preconditioner.
///
/// Columns run concurrently; each column's arithmetic is sequential, so the
/// result does not depend on the thread count.
pub fn multi_rhs_solve(
    a: &CsrMatrix,
    rhs: &[&[f64]],
    guesses: Option<&[&[f64]]>,
    config: &CgConfig,
) -> Result<Vec<CgSolution>, SolveError> {
    config.validate()?;
    if let Some(g) = guesses {
        if g.len() != rhs.len() {
            return Err(SolveError::DimensionMismatch {
                expected: rhs.len(),
                found: g.len(),
            });
        }
    }
    let inv_diag = match config.preconditioner {
        Preconditioner::Jacobi => Some(jacobi(a)),
        Preconditioner::None => None,
    };
    rhs.par_iter()
        .enumerate()
        .map(|(c, b)| pcg(a, b, guesses.map(|g| g[c]), inv_diag.as_deref(), config))
        .collect()
}
