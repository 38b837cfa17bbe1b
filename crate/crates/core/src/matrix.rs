//! Correlation matrices and their Cholesky factorisation.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

const SYMMETRY_TOL: f64 = 1e-12;
const PIVOT_TOL: f64 = 1e-12;

/// Symmetric, unit-diagonal matrix of pairwise correlations.
///
/// Entries are stored row-major. Construction checks symmetry, the unit
/// diagonal, and that off-diagonal entries lie in `[-1, 1]`; positive
/// semi-definiteness is validated where needed by attempting a Cholesky
/// factorisation ([`cholesky`] / [`CorrelationMatrix::validate_psd`]).
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl CorrelationMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Config("empty matrix".into()));
        }
        let mut entries = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Config(format!(
                    "row {i} has length {}, expected {n}",
                    row.len()
                )));
            }
            entries.extend_from_slice(row);
        }
        Self::from_flat(n, entries)
    }

    pub fn from_flat(n: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::Config(format!(
                "expected {} entries for n = {n}, got {}",
                n * n,
                entries.len()
            )));
        }
        let mut m = Self { n, entries };
        for i in 0..n {
            let d = m.get(i, i);
            if (d - 1.0).abs() > SYMMETRY_TOL {
                return Err(Error::NotUnitDiagonal { i, value: d });
            }
            m.entries[i * n + i] = 1.0;
            for j in 0..i {
                let a = m.get(i, j);
                let b = m.get(j, i);
                if (a - b).abs() > SYMMETRY_TOL {
                    return Err(Error::NotSymmetric { i, j, a, b });
                }
                if a.abs() > 1.0 + SYMMETRY_TOL || !a.is_finite() {
                    return Err(Error::CorrelationOutOfRange { i, j, value: a });
                }
                let v = a.clamp(-1.0, 1.0);
                m.entries[i * n + j] = v;
                m.entries[j * n + i] = v;
            }
        }
        Ok(m)
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        Self { n, entries }
    }

    pub fn equicorrelated(n: usize, r: f64) -> Result<Self> {
        let mut entries = vec![r; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        Self::from_flat(n, entries)
    }

    /// Stationary matrix with `entries[j][k] = r(|j - k|)`.
    pub fn stationary(n: usize, r: impl Fn(usize) -> f64) -> Result<Self> {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                entries[i * n + j] = if i == j { 1.0 } else { r(i.abs_diff(j)) };
            }
        }
        Self::from_flat(n, entries)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| self.entries[i * self.n..(i + 1) * self.n].to_vec())
            .collect()
    }

    /// Rejects any off-diagonal entry with |r| = 1 (a "repeated variable").
    pub fn require_no_repeats(&self) -> Result<()> {
        for i in 0..self.n {
            for j in 0..i {
                if self.get(i, j).abs() >= 1.0 {
                    return Err(Error::RepeatedVariable { i, j });
                }
            }
        }
        Ok(())
    }

    /// Positive semi-definiteness check via a Cholesky attempt.
    pub fn validate_psd(&self) -> Result<()> {
        cholesky(self).map(|_| ())
    }

    /// Largest entrywise absolute difference against another matrix.
    pub fn max_abs_diff(&self, other: &CorrelationMatrix) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixWire {
    n: usize,
    entries: Vec<Vec<f64>>,
}

impl Serialize for CorrelationMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixWire {
            n: self.n,
            entries: self.rows(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CorrelationMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = MatrixWire::deserialize(d)?;
        if wire.entries.len() != wire.n {
            return Err(serde::de::Error::custom(format!(
                "matrix claims n = {} but has {} rows",
                wire.n,
                wire.entries.len()
            )));
        }
        CorrelationMatrix::from_rows(wire.entries).map_err(serde::de::Error::custom)
    }
}

/// Lower-triangular Cholesky factor, stored as packed rows.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    n: usize,
    // row i occupies positions i(i+1)/2 .. i(i+1)/2 + i inclusive
    lower: Vec<f64>,
}

impl CholeskyFactor {
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.lower[i * (i + 1) / 2 + j]
        }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.lower[i * (i + 1) / 2..i * (i + 1) / 2 + i + 1]
    }

    /// `lower * lowerT` as a dense row-major matrix.
    pub fn reconstruct(&self) -> Vec<Vec<f64>> {
        let n = self.n;
        let mut out = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let k = i.min(j);
                out[i][j] = (0..=k).map(|l| self.get(i, l) * self.get(j, l)).sum();
            }
        }
        out
    }

    /// In-place `y = L g` where `g` holds i.i.d. standard normals.
    /// `out` must have length `n`.
    #[inline]
    pub fn multiply(&self, g: &[f64], out: &mut [f64]) {
        debug_assert_eq!(g.len(), self.n);
        for i in 0..self.n {
            let row = self.row(i);
            let mut acc = 0.0;
            for (l, gv) in row.iter().zip(&g[..=i]) {
                acc += l * gv;
            }
            out[i] = acc;
        }
    }
}

/// Cholesky factorisation of a correlation matrix.
///
/// A pivot at or below 1e-12 rejects the matrix as not positive definite,
/// naming the failing index. Near-singular inputs are rejected rather than
/// perturbed; callers who want jitter must opt in via [`cholesky_jittered`].
pub fn cholesky(m: &CorrelationMatrix) -> Result<CholeskyFactor> {
    cholesky_jittered(m, 0.0)
}

/// Cholesky with an additive diagonal jitter (in correlation units).
pub fn cholesky_jittered(m: &CorrelationMatrix, jitter: f64) -> Result<CholeskyFactor> {
    let n = m.n();
    let mut lower = vec![0.0f64; n * (n + 1) / 2];
    for i in 0..n {
        let base_i = i * (i + 1) / 2;
        for j in 0..=i {
            let base_j = j * (j + 1) / 2;
            let mut acc = m.get(i, j) + if i == j { jitter } else { 0.0 };
            for l in 0..j {
                acc -= lower[base_i + l] * lower[base_j + l];
            }
            if i == j {
                if acc <= PIVOT_TOL {
                    return Err(Error::NotPositiveDefinite {
                        index: i,
                        pivot: acc,
                    });
                }
                lower[base_i + j] = acc.sqrt();
            } else {
                lower[base_i + j] = acc / lower[base_j + j];
            }
        }
    }
    Ok(CholeskyFactor { n, lower })
}
