//! Dense square matrices used for travel times, counts, and costs.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// A dense row-major square matrix.
///
/// Serializes as a list of rows so the JSON artifacts stay readable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<T>>", into = "Vec<Vec<T>>")]
pub struct SquareMatrix<T: Clone> {
    n: usize,
    data: Vec<T>,
}

impl<T: Copy> SquareMatrix<T> {
    pub fn filled(n: usize, value: T) -> Self {
        Self {
            n,
            data: vec![value; n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    /// Number of rows (= columns).
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: T) {
        self.data[i * self.n + j] = value;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn entries(&self) -> impl Iterator<Item = T> + '_ {
        self.data.iter().copied()
    }
}

impl<T: Copy + num_traits::Zero> SquareMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self::filled(n, T::zero())
    }
}

impl<S: Scalar> SquareMatrix<S> {
    /// Largest entry, or zero for an empty matrix.
    pub fn max_entry(&self) -> S {
        self.data.iter().copied().fold(S::zero(), S::max)
    }

    /// Divides every entry by `divisor`.
    pub fn scaled_by_inverse(&self, divisor: S) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|&v| v / divisor).collect(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("matrix rows are not square: {rows} rows, row {bad_row} has {bad_len} entries")]
pub struct NotSquare {
    pub rows: usize,
    pub bad_row: usize,
    pub bad_len: usize,
}

impl<T: Clone> TryFrom<Vec<Vec<T>>> for SquareMatrix<T> {
    type Error = NotSquare;

    fn try_from(rows: Vec<Vec<T>>) -> Result<Self, NotSquare> {
        let n = rows.len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(NotSquare {
                    rows: n,
                    bad_row: i,
                    bad_len: row.len(),
                });
            }
        }
        Ok(Self {
            n,
            data: rows.into_iter().flatten().collect(),
        })
    }
}

impl<T: Clone> From<SquareMatrix<T>> for Vec<Vec<T>> {
    fn from(m: SquareMatrix<T>) -> Self {
        m.data.chunks(m.n.max(1)).map(|c| c.to_vec()).collect()
    }
}
