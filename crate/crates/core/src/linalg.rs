//! Small dense symmetric linear algebra.
//!
//! Every certificate matrix in this crate has the shape `M ⊗ I_n` with a
//! 3×3 factor `M`. The spectrum of `M ⊗ I_n` is the spectrum of `M` with
//! each eigenvalue repeated `n` times, so all eigenvalue work happens on the
//! factor. [`SymMatrix::kron_with_identity`] exists to test that identity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sweep budget for the cyclic Jacobi solver.
pub const JACOBI_MAX_SWEEPS: usize = 100;
/// Off-diagonal magnitudes below `JACOBI_REL_TOL * max|diag|` count as zero.
pub const JACOBI_REL_TOL: f64 = 1e-14;
/// Relative slack for positive-definiteness: `λ_min > PD_REL_TOL * |λ_max|`.
pub const PD_REL_TOL: f64 = 1e-12;

/// A dense symmetric matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SymMatrix {
    order: usize,
    entries: Vec<f64>,
}

impl SymMatrix {
    /// Builds from rows, rejecting anything that is not exactly symmetric.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let order = Self::check_square(rows)?;
        for i in 0..order {
            for j in (i + 1)..order {
                let (a, b) = (rows[i][j], rows[j][i]);
                if a != b {
                    return Err(Error::NotSymmetric { i, j, a, b });
                }
            }
        }
        Ok(Self {
            order,
            entries: rows.iter().flatten().copied().collect(),
        })
    }

    /// Builds from rows, replacing each off-diagonal pair by its mean.
    pub fn symmetrized(rows: &[Vec<f64>]) -> Result<Self> {
        let order = Self::check_square(rows)?;
        let mut entries = vec![0.0; order * order];
        for i in 0..order {
            entries[i * order + i] = rows[i][i];
            for j in (i + 1)..order {
                let mean = 0.5 * (rows[i][j] + rows[j][i]);
                entries[i * order + j] = mean;
                entries[j * order + i] = mean;
            }
        }
        Ok(Self { order, entries })
    }

    pub fn identity(order: usize) -> Result<Self> {
        Self::diagonal(&vec![1.0; order])
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        let order = diag.len();
        if order == 0 {
            return Err(Error::EmptyMatrix);
        }
        let mut entries = vec![0.0; order * order];
        for (i, &d) in diag.iter().enumerate() {
            if !d.is_finite() {
                return Err(Error::NonFiniteEntry { i, j: i });
            }
            entries[i * order + i] = d;
        }
        Ok(Self { order, entries })
    }

    fn check_square(rows: &[Vec<f64>]) -> Result<usize> {
        let order = rows.len();
        if order == 0 {
            return Err(Error::EmptyMatrix);
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != order {
                return Err(Error::NotSquare {
                    rows: order,
                    row: i,
                    len: row.len(),
                });
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteEntry { i, j });
            }
        }
        Ok(order)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.order + j]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.entries
            .chunks(self.order)
            .map(<[f64]>::to_vec)
            .collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.order).map(|i| self.get(i, i)).sum()
    }

    /// Returns `self ⊗ I_n`.
    pub fn kron_with_identity(&self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyMatrix);
        }
        let big = self.order * n;
        let mut entries = vec![0.0; big * big];
        for i in 0..self.order {
            for j in 0..self.order {
                let v = self.get(i, j);
                for k in 0..n {
                    entries[(i * n + k) * big + (j * n + k)] = v;
                }
            }
        }
        Ok(Self {
            order: big,
            entries,
        })
    }

    /// Quadratic form `xᵀ M x`.
    pub fn quadratic_form(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.order {
            return Err(Error::DimensionMismatch {
                expected: self.order,
                got: x.len(),
            });
        }
        let mut acc = 0.0;
        for i in 0..self.order {
            let row = &self.entries[i * self.order..(i + 1) * self.order];
            let dot: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
            acc += x[i] * dot;
        }
        Ok(acc)
    }
}

impl TryFrom<Vec<Vec<f64>>> for SymMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl From<SymMatrix> for Vec<Vec<f64>> {
    fn from(m: SymMatrix) -> Self {
        m.to_rows()
    }
}

/// Extreme eigenvalues and the sorted spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSummary {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub spectrum: Vec<f64>,
}

/// Eigenvalues (ascending) with matching unit eigenvectors.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    /// `vectors[k]` is the eigenvector for `values[k]`.
    pub vectors: Vec<Vec<f64>>,
    pub sweeps: usize,
}

impl EigenDecomposition {
    pub fn summary(&self) -> EigenSummary {
        EigenSummary {
            lambda_min: self.values[0],
            lambda_max: self.values[self.values.len() - 1],
            spectrum: self.values.clone(),
        }
    }
}

fn max_off_diag(a: &[f64], n: usize) -> f64 {
    let mut m = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            m = m.max(a[i * n + j].abs());
        }
    }
    m
}

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix.
pub fn eig_sym_full(mat: &SymMatrix) -> Result<EigenDecomposition> {
    let n = mat.order;
    let mut a = mat.entries.clone();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let mut sweeps = 0;
    loop {
        let max_diag = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max);
        let off = max_off_diag(&a, n);
        if off <= JACOBI_REL_TOL * max_diag || off == 0.0 {
            break;
        }
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::EigenNoConvergence {
                sweeps,
                off_diag: off,
            });
        }
        sweeps += 1;

        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let tau = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + tau.hypot(1.0));
                let c = 1.0 / t.hypot(1.0);
                let s = t * c;

                // A <- A J (columns p, q)
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                // A <- Jᵀ A (rows p, q)
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;

                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let vectors = order
        .iter()
        .map(|&col| (0..n).map(|row| v[row * n + col]).collect())
        .collect();
    Ok(EigenDecomposition {
        values,
        vectors,
        sweeps,
    })
}

pub fn eig_sym(mat: &SymMatrix) -> Result<EigenSummary> {
    eig_sym_full(mat).map(|d| d.summary())
}

/// `true` iff `λ_min(mat) > tol`.
pub fn is_positive_definite(mat: &SymMatrix, tol: f64) -> Result<bool> {
    if !(tol >= 0.0) {
        return Err(Error::OutOfRange(format!("PD tolerance must be >= 0, got {tol}")));
    }
    Ok(eig_sym(mat)?.lambda_min > tol)
}

/// The relative tolerance `PD_REL_TOL * |λ_max|` used across the crate.
pub fn default_pd_tol(summary: &EigenSummary) -> f64 {
    PD_REL_TOL * summary.lambda_max.abs()
}

/// Positive-definiteness with the default relative tolerance.
pub fn is_positive_definite_default(mat: &SymMatrix) -> Result<bool> {
    let s = eig_sym(mat)?;
    Ok(s.lambda_min > default_pd_tol(&s))
}
