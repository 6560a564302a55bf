//! Weighted row losses and the greedy row-index selections built on them.
//!
//! For a residual `r`, row `i` has loss `psi_i = |r_i|^2 / ||A_i||^2`. The
//! single-row rule picks the largest loss; the relaxed block rule keeps every
//! row whose loss reaches `theta * max + (1 - theta) * sum_i beta_i psi_i`,
//! where `beta_i = ||A_i||^2 / ||A||_F^2`.

use crate::error::{Error, Result};
use crate::matrix::RowMatrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct LossVector {
    pub psi: Vec<f64>,
    /// First index attaining the maximum.
    pub max_idx: usize,
    pub max_val: f64,
    /// `sum_i beta_i psi_i`, equal to `||r||^2 / ||A||_F^2`.
    pub weighted_avg: f64,
    /// `||r||^2`.
    pub residual_sq: f64,
}

impl LossVector {
    pub fn is_zero(&self) -> bool {
        self.max_val == 0.0
    }

    /// Rows with nonzero loss.
    pub fn support(&self) -> IndexSet {
        IndexSet(
            self.psi
                .iter()
                .enumerate()
                .filter(|(_, &p)| p != 0.0)
                .map(|(i, _)| i)
                .collect(),
        )
    }
}

/// Sorted set of distinct row indices.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IndexSet(Vec<usize>);

impl IndexSet {
    pub fn new(mut idx: Vec<usize>) -> Self {
        idx.sort_unstable();
        idx.dedup();
        IndexSet(idx)
    }

    pub fn all(m: usize) -> Self {
        IndexSet((0..m).collect())
    }

    pub fn singleton(i: usize) -> Self {
        IndexSet(vec![i])
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn is_subset_of(&self, other: &IndexSet) -> bool {
        self.0.iter().all(|&i| other.contains(i))
    }
}

pub fn row_losses<T: Scalar>(a: &RowMatrix<T>, r: &[T]) -> Result<LossVector> {
    if r.len() != a.nrows() {
        return Err(Error::DimensionMismatch {
            what: "residual",
            expected: a.nrows(),
            got: r.len(),
        });
    }
    let norms = a.row_sq_norms();
    let mut psi = Vec::with_capacity(r.len());
    let mut max_idx = 0;
    let mut max_val = f64::NEG_INFINITY;
    let mut residual_sq = 0.0;
    for (i, (&ri, &ni)) in r.iter().zip(norms).enumerate() {
        let s = ri.abs_sq();
        residual_sq += s;
        let p = s / ni;
        if p > max_val {
            max_val = p;
            max_idx = i;
        }
        psi.push(p);
    }
    Ok(LossVector {
        psi,
        max_idx,
        max_val,
        weighted_avg: residual_sq / a.frob_sq(),
        residual_sq,
    })
}

/// Relaxed greedy set `{ i : psi_i >= theta * max + (1 - theta) * avg }`.
///
/// `theta = 1` gives the argmax set; `theta = 0` the above-average set.
pub fn greedy_set(loss: &LossVector, theta: f64) -> Result<IndexSet> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::invalid(format!("theta must lie in [0, 1], got {theta}")));
    }
    if loss.is_zero() {
        return Err(Error::ZeroLoss);
    }
    // Rounding in the average can push the threshold past the maximum when
    // all losses are equal; the maximizer always belongs to the set.
    let threshold =
        (theta * loss.max_val + (1.0 - theta) * loss.weighted_avg).min(loss.max_val);
    Ok(IndexSet(
        loss.psi
            .iter()
            .enumerate()
            .filter(|(_, &p)| p >= threshold)
            .map(|(i, _)| i)
            .collect(),
    ))
}

/// Residual restricted to a row set: `eta_i = r_i` on the set, zero elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct Eta<T> {
    pub len: usize,
    pub support: IndexSet,
    pub values: Vec<T>,
}

impl<T: Scalar> Eta<T> {
    pub fn to_dense(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.len];
        for (&i, &v) in self.support.as_slice().iter().zip(&self.values) {
            out[i] = v;
        }
        out
    }

    /// `||eta||^2`.
    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v.abs_sq()).sum()
    }

    /// `eta^* r`, summed over the support.
    pub fn dot_conj(&self, r: &[T]) -> T {
        let mut acc = T::zero();
        for (&i, &v) in self.support.as_slice().iter().zip(&self.values) {
            acc += v.conj() * r[i];
        }
        acc
    }
}

pub fn build_eta<T: Scalar>(r: &[T], set: &IndexSet) -> Result<Eta<T>> {
    if set.is_empty() {
        return Err(Error::invalid("eta needs a nonempty row set"));
    }
    if let Some(&bad) = set.as_slice().iter().find(|&&i| i >= r.len()) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            len: r.len(),
        });
    }
    Ok(Eta {
        len: r.len(),
        support: set.clone(),
        values: set.as_slice().iter().map(|&i| r[i]).collect(),
    })
}
