use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::CascadeError;
use crate::phase_dynamics::RationalPhase;

/// Largest operator dimension accepted.
pub const DIM_CAP: usize = 64;

/// Dense square real matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct LinOp {
    dim: usize,
    entries: Vec<f64>,
}

impl LinOp {
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self, CascadeError> {
        if dim == 0 || dim > DIM_CAP {
            return Err(CascadeError::DimensionCap(dim));
        }
        if entries.len() != dim * dim {
            return Err(CascadeError::DimMismatch(format!(
                "{} entries for a {dim}x{dim} operator",
                entries.len()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(CascadeError::NonFinite);
        }
        Ok(Self { dim, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, CascadeError> {
        let dim = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(CascadeError::DimMismatch(format!(
                "row of length {} in a {dim}-row matrix",
                r.len()
            )));
        }
        Self::new(dim, rows.concat())
    }

    pub fn identity(dim: usize) -> Self {
        Self::diag(&vec![1.0; dim])
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![0.0; dim * dim],
        }
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n);
        for (i, v) in values.iter().enumerate() {
            m.entries[i * n + i] = *v;
        }
        m
    }

    /// Rotation by `turns` of a full turn in the `(i, j)` coordinate plane.
    /// Quarter turns are exact.
    pub fn rotation(dim: usize, i: usize, j: usize, turns: RationalPhase) -> Result<Self, CascadeError> {
        if i >= dim || j >= dim || i == j {
            return Err(CascadeError::InvalidOperator(format!(
                "plane ({i}, {j}) in dimension {dim}"
            )));
        }
        let (num, den) = (turns.numerator(), turns.denominator());
        let (c, s) = if (4 * num) % den == 0 {
            match 4 * num / den {
                0 => (1.0, 0.0),
                1 => (0.0, 1.0),
                2 => (-1.0, 0.0),
                _ => (0.0, -1.0),
            }
        } else {
            let a = turns.radians();
            (a.cos(), a.sin())
        };
        let mut m = Self::identity(dim);
        m.set(i, i, c);
        m.set(i, j, -s);
        m.set(j, i, s);
        m.set(j, j, c);
        Ok(m)
    }

    /// The matrix sending `e_k` to `signs[k] · e_{perm[k]}`.
    pub fn signed_permutation(perm: &[usize], signs: Option<&[f64]>) -> Result<Self, CascadeError> {
        let n = perm.len();
        let mut seen = vec![false; n];
        for &p in perm {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return Err(CascadeError::InvalidOperator(format!("{perm:?} is not a permutation")));
            }
        }
        if let Some(s) = signs {
            if s.len() != n || s.iter().any(|&v| v != 1.0 && v != -1.0) {
                return Err(CascadeError::InvalidOperator("signs must be ±1, one per axis".into()));
            }
        }
        let mut m = Self::zeros(n);
        for (k, &p) in perm.iter().enumerate() {
            m.set(p, k, signs.map_or(1.0, |s| s[k]));
        }
        Self::new(n, m.entries)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.entries[i * self.dim + j] = v;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.dim).map(<[f64]>::to_vec).collect()
    }

    fn check_same_dim(&self, other: &LinOp) -> Result<(), CascadeError> {
        if self.dim != other.dim {
            return Err(CascadeError::DimMismatch(format!(
                "{} vs {}",
                self.dim, other.dim
            )));
        }
        Ok(())
    }

    /// `self · other`.
    pub fn matmul(&self, other: &LinOp) -> Result<LinOp, CascadeError> {
        self.check_same_dim(other)?;
        let n = self.dim;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[i * n + j] += a * other.get(k, j);
                }
            }
        }
        Ok(LinOp { dim: n, entries: out })
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        self.entries
            .chunks(self.dim)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn add(&self, other: &LinOp) -> Result<LinOp, CascadeError> {
        self.check_same_dim(other)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &LinOp) -> Result<LinOp, CascadeError> {
        self.check_same_dim(other)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    fn zip_with(&self, other: &LinOp, f: impl Fn(f64, f64) -> f64) -> LinOp {
        LinOp {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        }
    }

    pub fn scale(&self, s: f64) -> LinOp {
        LinOp {
            dim: self.dim,
            entries: self.entries.iter().map(|v| v * s).collect(),
        }
    }

    pub fn power(&self, k: u64) -> LinOp {
        let mut acc = LinOp::identity(self.dim);
        for _ in 0..k {
            acc = acc.matmul(self).expect("same dimension");
        }
        acc
    }

    /// Induced ∞-norm: largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        self.entries
            .chunks(self.dim)
            .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn transpose(&self) -> LinOp {
        let n = self.dim;
        let mut t = LinOp::zeros(n);
        for i in 0..n {
            for j in 0..n {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }
}

impl fmt::Debug for LinOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.entries.chunks(self.dim)).finish()
    }
}

impl Serialize for LinOp {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for LinOp {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        LinOp::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}
