use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

const ROW_TOL: f64 = 1e-9;

/// Square row-stochastic matrix, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTransition", into = "RawTransition")]
pub struct TransitionMatrix {
    n: usize,
    data: Vec<f64>,
}

impl TransitionMatrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || data.len() != n * n {
            return Err(invalid(format!(
                "transition matrix needs {} entries for n = {n}, got {}",
                n * n,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(invalid("transition entries must be finite and non-negative"));
        }
        for (i, row) in data.chunks(n).enumerate() {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_TOL {
                return Err(invalid(format!("row {i} sums to {s}")));
            }
        }
        Ok(Self { n, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(invalid("transition matrix must be square"));
        }
        Self::new(n, rows.concat())
    }

    /// Every row uniform over all states.
    pub fn uniform(n: usize) -> Self {
        Self { n, data: vec![1.0 / n as f64; n * n] }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn log_entries(&self) -> Vec<f64> {
        self.data.iter().map(|p| p.ln()).collect()
    }

    /// Permutes states: entry `(i, j)` of the result is entry
    /// `(perm[i], perm[j])` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = self.get(perm[i], perm[j]);
            }
        }
        Self { n, data }
    }
}

#[derive(Serialize, Deserialize)]
struct RawTransition {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl From<TransitionMatrix> for RawTransition {
    fn from(t: TransitionMatrix) -> Self {
        RawTransition { rows: t.n, cols: t.n, data: t.data }
    }
}

impl TryFrom<RawTransition> for TransitionMatrix {
    type Error = Error;

    fn try_from(raw: RawTransition) -> Result<Self> {
        if raw.rows != raw.cols {
            return Err(Error::Format("transition matrix is not square".into()));
        }
        TransitionMatrix::new(raw.rows, raw.data)
    }
}

/// Largest absolute entry-wise difference between two transition matrices.
pub fn linf_distance(a: &TransitionMatrix, b: &TransitionMatrix) -> Result<f64> {
    if a.size() != b.size() {
        return Err(invalid(format!("shape mismatch: {} vs {}", a.size(), b.size())));
    }
    Ok(a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}
