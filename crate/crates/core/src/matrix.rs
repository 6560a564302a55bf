//! Immutable row-oriented matrices.
//!
//! [`RowMatrix`] stores either dense row-major entries or compressed sparse
//! rows. Every solver only touches a matrix through row dot products,
//! conjugated row updates and full mat-vecs, so both layouts look the same to
//! callers. Squared row norms and the squared Frobenius norm are computed once
//! at construction, and a matrix with an all-zero row is rejected.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
enum Storage<T> {
    Dense(Vec<T>),
    Csr {
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<T>,
    },
}

/// Borrowed view of one stored row.
#[derive(Debug, Clone, Copy)]
pub enum Row<'a, T> {
    Dense(&'a [T]),
    Sparse { indices: &'a [usize], values: &'a [T] },
}

impl<T: Scalar> Row<'_, T> {
    /// `(column, value)` pairs of the stored entries, left to right.
    pub fn entries(&self) -> Box<dyn Iterator<Item = (usize, T)> + '_> {
        match *self {
            Row::Dense(vals) => Box::new(vals.iter().copied().enumerate()),
            Row::Sparse { indices, values } => {
                Box::new(indices.iter().copied().zip(values.iter().copied()))
            }
        }
    }

    pub fn nnz(&self) -> usize {
        match self {
            Row::Dense(v) => v.len(),
            Row::Sparse { indices, .. } => indices.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowMatrix<T> {
    m: usize,
    n: usize,
    storage: Storage<T>,
    row_sq_norms: Vec<f64>,
    frob_sq: f64,
}

impl<T: Scalar> RowMatrix<T> {
    /// Builds a dense matrix from row-major entries.
    pub fn from_row_major(m: usize, n: usize, entries: Vec<T>) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::invalid(format!("empty matrix shape {m}x{n}")));
        }
        if entries.len() != m * n {
            return Err(Error::DimensionMismatch {
                what: "row-major entries",
                expected: m * n,
                got: entries.len(),
            });
        }
        let row_sq_norms = entries
            .chunks_exact(n)
            .map(|row| row_sq_norm(row.iter().copied()))
            .collect();
        Self::finish(m, n, Storage::Dense(entries), row_sq_norms)
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        let mut entries = Vec::with_capacity(m * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "row length",
                    expected: n,
                    got: row.len(),
                });
            }
            entries.extend_from_slice(row);
        }
        Self::from_row_major(m, n, entries)
    }

    /// Builds a CSR matrix. Column indices within a row must be strictly
    /// increasing.
    pub fn from_csr(
        m: usize,
        n: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<T>,
    ) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::invalid(format!("empty matrix shape {m}x{n}")));
        }
        if indptr.len() != m + 1 {
            return Err(Error::DimensionMismatch {
                what: "CSR indptr",
                expected: m + 1,
                got: indptr.len(),
            });
        }
        if indices.len() != values.len() || indptr[m] != values.len() || indptr[0] != 0 {
            return Err(Error::invalid("inconsistent CSR arrays"));
        }
        let mut row_sq_norms = Vec::with_capacity(m);
        for i in 0..m {
            let (lo, hi) = (indptr[i], indptr[i + 1]);
            if lo > hi {
                return Err(Error::invalid("CSR indptr is not monotone"));
            }
            let cols = &indices[lo..hi];
            if cols.iter().any(|&j| j >= n) || cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid(format!(
                    "row {i}: column indices out of range or not strictly increasing"
                )));
            }
            row_sq_norms.push(row_sq_norm(values[lo..hi].iter().copied()));
        }
        Self::finish(
            m,
            n,
            Storage::Csr {
                indptr,
                indices,
                values,
            },
            row_sq_norms,
        )
    }

    /// Builds a CSR matrix from unordered `(row, col, value)` triplets;
    /// duplicates are summed and explicit zeros dropped.
    pub fn from_triplets(m: usize, n: usize, triplets: &[(usize, usize, T)]) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, T)> = triplets.to_vec();
        for &(i, j, _) in &sorted {
            if i >= m {
                return Err(Error::IndexOutOfRange { index: i, len: m });
            }
            if j >= n {
                return Err(Error::IndexOutOfRange { index: j, len: n });
            }
        }
        sorted.sort_by_key(|&(i, j, _)| (i, j));
        let mut merged: Vec<(usize, usize, T)> = Vec::with_capacity(sorted.len());
        for (i, j, v) in sorted {
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => merged.push((i, j, v)),
            }
        }
        merged.retain(|t| !t.2.is_zero());
        let mut indptr = vec![0usize; m + 1];
        for &(i, _, _) in &merged {
            indptr[i + 1] += 1;
        }
        let indices = merged.iter().map(|t| t.1).collect();
        let values = merged.iter().map(|t| t.2).collect();
        for i in 0..m {
            indptr[i + 1] += indptr[i];
        }
        Self::from_csr(m, n, indptr, indices, values)
    }

    fn finish(m: usize, n: usize, storage: Storage<T>, row_sq_norms: Vec<f64>) -> Result<Self> {
        if let Some(i) = row_sq_norms.iter().position(|&s| s <= 0.0) {
            return Err(Error::ZeroRow(i));
        }
        let frob_sq = row_sq_norms.iter().sum();
        Ok(RowMatrix {
            m,
            n,
            storage,
            row_sq_norms,
            frob_sq,
        })
    }

    pub fn nrows(&self) -> usize {
        self.m
    }

    pub fn ncols(&self) -> usize {
        self.n
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Csr { .. })
    }

    pub fn nnz(&self) -> usize {
        match &self.storage {
            Storage::Dense(v) => v.len(),
            Storage::Csr { values, .. } => values.len(),
        }
    }

    /// `||A_{i,:}||^2` for every row.
    pub fn row_sq_norms(&self) -> &[f64] {
        &self.row_sq_norms
    }

    /// `||A||_F^2`.
    pub fn frob_sq(&self) -> f64 {
        self.frob_sq
    }

    /// `||A_{idx,:}||_F^2`.
    pub fn frob_sq_rows(&self, idx: &[usize]) -> f64 {
        idx.iter().map(|&i| self.row_sq_norms[i]).sum()
    }

    pub fn row(&self, i: usize) -> Row<'_, T> {
        match &self.storage {
            Storage::Dense(v) => Row::Dense(&v[i * self.n..(i + 1) * self.n]),
            Storage::Csr {
                indptr,
                indices,
                values,
            } => {
                let (lo, hi) = (indptr[i], indptr[i + 1]);
                Row::Sparse {
                    indices: &indices[lo..hi],
                    values: &values[lo..hi],
                }
            }
        }
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        match self.row(i) {
            Row::Dense(v) => v[j],
            Row::Sparse { indices, values } => match indices.binary_search(&j) {
                Ok(k) => values[k],
                Err(_) => T::zero(),
            },
        }
    }

    /// `A_{i,:} . v` without conjugation.
    #[inline]
    pub fn row_dot(&self, i: usize, v: &[T]) -> T {
        let mut acc = T::zero();
        match self.row(i) {
            Row::Dense(row) => {
                for (&a, &x) in row.iter().zip(v) {
                    acc += a * x;
                }
            }
            Row::Sparse { indices, values } => {
                for (&j, &a) in indices.iter().zip(values) {
                    acc += a * v[j];
                }
            }
        }
        acc
    }

    /// `out += coef * conj(A_{i,:})^T`.
    #[inline]
    pub fn add_conj_row(&self, i: usize, coef: T, out: &mut [T]) {
        match self.row(i) {
            Row::Dense(row) => {
                for (o, &a) in out.iter_mut().zip(row) {
                    *o += coef * a.conj();
                }
            }
            Row::Sparse { indices, values } => {
                for (&j, &a) in indices.iter().zip(values) {
                    out[j] += coef * a.conj();
                }
            }
        }
    }

    /// `A v`.
    pub fn matvec(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch {
                what: "matvec operand",
                expected: self.n,
                got: v.len(),
            });
        }
        let mut out = vec![T::zero(); self.m];
        self.matvec_into(v, &mut out);
        Ok(out)
    }

    pub(crate) fn matvec_into(&self, v: &[T], out: &mut [T]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row_dot(i, v);
        }
    }

    /// `A_{idx,:}^* w`, i.e. `sum_j conj(A_{idx[j],:})^T w_j`.
    pub fn adjoint_matvec_rows(&self, idx: &[usize], w: &[T]) -> Result<Vec<T>> {
        if idx.len() != w.len() {
            return Err(Error::DimensionMismatch {
                what: "adjoint weights",
                expected: idx.len(),
                got: w.len(),
            });
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= self.m) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                len: self.m,
            });
        }
        let mut out = vec![T::zero(); self.n];
        for (&i, &wi) in idx.iter().zip(w) {
            self.add_conj_row(i, wi, &mut out);
        }
        Ok(out)
    }

    /// `A^* w` over all rows.
    pub fn adjoint_matvec(&self, w: &[T]) -> Result<Vec<T>> {
        let all: Vec<usize> = (0..self.m).collect();
        self.adjoint_matvec_rows(&all, w)
    }

    /// Dense row-major copy of the entries.
    pub fn to_dense(&self) -> Vec<T> {
        match &self.storage {
            Storage::Dense(v) => v.clone(),
            Storage::Csr { .. } => {
                let mut out = vec![T::zero(); self.m * self.n];
                for i in 0..self.m {
                    for (j, a) in self.row(i).entries() {
                        out[i * self.n + j] = a;
                    }
                }
                out
            }
        }
    }

    /// Rows `idx` as a new dense matrix.
    pub fn select_rows(&self, idx: &[usize]) -> Result<RowMatrix<T>> {
        let mut entries = vec![T::zero(); idx.len() * self.n];
        for (k, &i) in idx.iter().enumerate() {
            if i >= self.m {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    len: self.m,
                });
            }
            for (j, a) in self.row(i).entries() {
                entries[k * self.n + j] = a;
            }
        }
        RowMatrix::from_row_major(idx.len(), self.n, entries)
    }
}

fn row_sq_norm<T: Scalar>(row: impl Iterator<Item = T>) -> f64 {
    let mut acc = 0.0;
    for a in row {
        acc += a.abs_sq();
    }
    acc
}

/// `b - A x`.
pub fn residual<T: Scalar>(a: &RowMatrix<T>, b: &[T], x: &[T]) -> Result<Vec<T>> {
    if b.len() != a.nrows() {
        return Err(Error::DimensionMismatch {
            what: "right-hand side",
            expected: a.nrows(),
            got: b.len(),
        });
    }
    let mut r = a.matvec(x)?;
    for (ri, &bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    Ok(r)
}
