//! Dense symmetric matrix kernels.
//!
//! Everything here works on small matrices (Gram matrices of at most a few
//! hundred rows); storage is a flat row-major `Vec<f64>` holding the full
//! square.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{BiqError, Result};

/// Relative accuracy target of [`eig_sym`].
pub const EIG_TOL: f64 = 1e-10;

const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_OFF_TOL: f64 = 1e-12;

/// A real symmetric matrix stored as a full row-major square.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * diag.len() + i] = d;
        }
        m
    }

    /// Builds a matrix from a full row-major square, replacing it by its
    /// symmetric part `(A + Aᵀ) / 2`.
    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(BiqError::DimensionMismatch {
                expected: dim * dim,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(BiqError::InvalidMatrix("non-finite entry".into()));
        }
        let mut m = Self { dim, data };
        m.symmetrize();
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(BiqError::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_row_major(dim, data)
    }

    /// `Σ_p w_p c_p c_pᵀ`.
    pub fn from_outer_products<'a>(dim: usize, vectors: impl IntoIterator<Item = &'a [f64]>) -> Self {
        let mut m = Self::zeros(dim);
        for c in vectors {
            debug_assert_eq!(c.len(), dim);
            for r in 0..dim {
                if c[r] == 0.0 {
                    continue;
                }
                for s in 0..dim {
                    m.data[r * dim + s] += c[r] * c[s];
                }
            }
        }
        m
    }

    fn symmetrize(&mut self) {
        let n = self.dim;
        for r in 0..n {
            for c in (r + 1)..n {
                let avg = 0.5 * (self.data[r * n + c] + self.data[c * n + r]);
                self.data[r * n + c] = avg;
                self.data[c * n + r] = avg;
            }
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.dim + c]
    }

    /// Sets both `(r, c)` and `(c, r)`.
    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.dim + c] = value;
        self.data[c * self.dim + r] = value;
    }

    /// Adds `value` at `(r, c)` and, off the diagonal, at `(c, r)`.
    #[inline]
    pub fn add_sym(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.dim + c] += value;
        if r != c {
            self.data[c * self.dim + r] += value;
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.dim.max(1)).take(self.dim).map(<[f64]>::to_vec).collect()
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Frobenius inner product `⟨A, B⟩ = tr(AᵀB)`.
    pub fn inner(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn distance(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// `self + s·other`.
    pub fn add_scaled(&self, other: &Self, s: f64) -> Self {
        debug_assert_eq!(self.dim, other.dim);
        Self {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + s * b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add_scaled(other, -1.0)
    }

    /// `zᵀ M z`.
    pub fn quad_form(&self, z: &[f64]) -> f64 {
        debug_assert_eq!(z.len(), self.dim);
        let n = self.dim;
        let mut acc = 0.0;
        for r in 0..n {
            let row = &self.data[r * n..(r + 1) * n];
            let dot: f64 = row.iter().zip(z).map(|(a, b)| a * b).sum();
            acc += z[r] * dot;
        }
        acc
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim;
        (0..n)
            .map(|r| self.data[r * n..(r + 1) * n].iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn cholesky(&self) -> Option<Cholesky> {
        Cholesky::factor(self)
    }
}

impl Serialize for SymMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SymMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(deserializer)?;
        SymMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Lower-triangular Cholesky factor `A = L Lᵀ` of a positive definite matrix.
#[derive(Clone, Debug)]
pub struct Cholesky {
    dim: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    fn factor(a: &SymMatrix) -> Option<Self> {
        let n = a.dim;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = a.get(j, j);
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if d <= 0.0 || !d.is_finite() {
                return None;
            }
            let d = d.sqrt();
            l[j * n + j] = d;
            for i in (j + 1)..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / d;
            }
        }
        Some(Self { dim: n, lower: l })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let l = &self.lower;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= l[i * n + k] * y[k];
            }
            y[i] = s / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= l[k * n + i] * y[k];
            }
            y[i] = s / l[i * n + i];
        }
        y
    }

    pub fn inverse(&self) -> SymMatrix {
        let n = self.dim;
        let mut inv = SymMatrix::zeros(n);
        let mut e = vec![0.0; n];
        for c in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[c] = 1.0;
            let col = self.solve(&e);
            for r in 0..n {
                inv.data[r * n + c] = col[r];
            }
        }
        inv.symmetrize();
        inv
    }
}

/// Eigenvalues sorted descending with matching orthonormal eigenvectors.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    /// `vectors[i]` is the unit eigenvector for `values[i]`.
    pub vectors: Vec<Vec<f64>>,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn lambda_min(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn lambda_max(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    /// `Σ_i f(λ_i) u_i u_iᵀ` over the first `count` eigenpairs.
    pub fn recompose_with(&self, count: usize, f: impl Fn(f64) -> f64) -> SymMatrix {
        let n = self.dim();
        let mut m = SymMatrix::zeros(n);
        for (value, u) in self.values.iter().zip(&self.vectors).take(count) {
            let w = f(*value);
            if w == 0.0 {
                continue;
            }
            for r in 0..n {
                let wr = w * u[r];
                if wr == 0.0 {
                    continue;
                }
                for c in r..n {
                    m.data[r * n + c] += wr * u[c];
                }
            }
        }
        for r in 0..n {
            for c in 0..r {
                m.data[r * n + c] = m.data[c * n + r];
            }
        }
        m
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.recompose_with(self.dim(), |l| l)
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Sweeps run in a fixed `(p, q)` order, so equal inputs give bit-identical
/// outputs. The first three sweeps skip rotations below a threshold.
pub fn eig_sym(m: &SymMatrix) -> Result<EigenDecomposition> {
    if !m.is_finite() {
        return Err(BiqError::InvalidMatrix("non-finite entry".into()));
    }
    let n = m.dim;
    let mut a = m.data.clone();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let norm = m.frobenius_norm();
    let target = JACOBI_OFF_TOL * norm;
    for sweep in 0..JACOBI_MAX_SWEEPS {
        let mut off_sq = 0.0;
        let mut off_abs = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off_sq += 2.0 * a[p * n + q] * a[p * n + q];
                off_abs += a[p * n + q].abs();
            }
        }
        if off_sq.sqrt() <= target {
            break;
        }
        let thresh = if sweep < 3 {
            0.2 * off_abs / (n * n) as f64
        } else {
            0.0
        };
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 || apq.abs() <= thresh {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let g = 100.0 * apq.abs();
                if sweep > 3 && app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let arp = a[r * n + p];
                    let arq = a[r * n + q];
                    let new_rp = c * arp - s * arq;
                    let new_rq = s * arp + c * arq;
                    a[r * n + p] = new_rp;
                    a[p * n + r] = new_rp;
                    a[r * n + q] = new_rq;
                    a[q * n + r] = new_rq;
                }
                for r in 0..n {
                    let vrp = v[r * n + p];
                    let vrq = v[r * n + q];
                    v[r * n + p] = c * vrp - s * vrq;
                    v[r * n + q] = s * vrp + c * vrq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal eigenvalues keep sweep order
    order.sort_by(|&x, &y| a[y * n + y].total_cmp(&a[x * n + x]));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let vectors = order
        .iter()
        .map(|&i| (0..n).map(|r| v[r * n + i]).collect())
        .collect();
    Ok(EigenDecomposition { values, vectors })
}

/// Frobenius-nearest PSD matrix: negative eigenvalues clamped to zero.
pub fn psd_project(m: &SymMatrix) -> Result<SymMatrix> {
    let eig = eig_sym(m)?;
    Ok(eig.recompose_with(eig.dim(), |l| l.max(0.0)))
}

/// Keeps the `rank` largest eigenvalues, clamped at zero.
pub fn psd_project_rank_capped(m: &SymMatrix, rank: usize) -> Result<SymMatrix> {
    if rank == 0 || rank > m.dim {
        return Err(BiqError::InvalidRank { rank, dim: m.dim });
    }
    let eig = eig_sym(m)?;
    Ok(eig.recompose_with(rank, |l| l.max(0.0)))
}

/// Number of eigenvalues with `|λ| > tol · max(1, λ_max)`.
pub fn rank_eps(m: &SymMatrix, tol: f64) -> Result<usize> {
    let eig = eig_sym(m)?;
    Ok(rank_of(&eig, tol))
}

pub fn rank_of(eig: &EigenDecomposition, tol: f64) -> usize {
    let cutoff = tol * eig.lambda_max().max(1.0);
    eig.values.iter().filter(|l| l.abs() > cutoff).count()
}

pub fn lambda_min(m: &SymMatrix) -> Result<f64> {
    Ok(eig_sym(m)?.lambda_min())
}
