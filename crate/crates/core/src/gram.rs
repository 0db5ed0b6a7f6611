//! The affine space of symmetric Gram matrices of a biquadratic form.
//!
//! With `z = x ⊗ y` indexed by `(i, j) ↦ i·n + j`, every symmetric `M`
//! satisfying `zᵀ M z = P(x, y)` is `M₀ + Σ_q γ_q H_q`, where `M₀` is the
//! natural Gram matrix and `H_q` (one per `i < k`, `j < l`) moves weight
//! between the positions `((i,j),(k,l))` and `((i,l),(k,j))`.

use serde::{Deserialize, Serialize};

use crate::error::{BiqError, Result};
use crate::forms::{monomial_positions, BiquadraticForm};
use crate::numerics::{eig_sym, SymMatrix};

/// Position of `x_i y_j` in `z = x ⊗ y`.
pub fn index_of(i: usize, j: usize, m: usize, n: usize) -> Result<usize> {
    if i >= m || j >= n {
        return Err(BiqError::InvalidIndex(format!("cell ({i},{j}) outside {m}x{n}")));
    }
    Ok(i * n + j)
}

/// One nullity direction: `+1` at `plus` and its mirror, `-1` at `minus`
/// and its mirror. All four positions are off the diagonal.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NullDirection {
    pub plus: (usize, usize),
    pub minus: (usize, usize),
}

impl NullDirection {
    pub fn to_matrix(&self, dim: usize) -> SymMatrix {
        let mut h = SymMatrix::zeros(dim);
        h.set(self.plus.0, self.plus.1, 1.0);
        h.set(self.minus.0, self.minus.1, -1.0);
        h
    }

    /// `⟨X, H⟩_F`.
    #[inline]
    pub fn inner(&self, x: &SymMatrix) -> f64 {
        2.0 * (x.get(self.plus.0, self.plus.1) - x.get(self.minus.0, self.minus.1))
    }

    /// `uᵀ H u`, the derivative of `λ_min` along this direction when `u`
    /// is a simple minimal eigenvector.
    #[inline]
    pub fn quad(&self, u: &[f64]) -> f64 {
        2.0 * (u[self.plus.0] * u[self.plus.1] - u[self.minus.0] * u[self.minus.1])
    }

    #[inline]
    pub fn add_to(&self, x: &mut SymMatrix, s: f64) {
        x.add_sym(self.plus.0, self.plus.1, s);
        x.add_sym(self.minus.0, self.minus.1, -s);
    }

    /// Non-zero entries `(row, col, value)` of the full matrix.
    pub fn entries(&self) -> [(usize, usize, f64); 4] {
        let (a, b) = self.plus;
        let (c, d) = self.minus;
        [(a, b, 1.0), (b, a, 1.0), (c, d, -1.0), (d, c, -1.0)]
    }
}

/// `‖H_q‖_F²` for every basis element.
pub const NULL_NORM_SQ: f64 = 4.0;

pub fn null_directions(m: usize, n: usize) -> Vec<NullDirection> {
    let mut dirs = Vec::with_capacity(binom2(m) * binom2(n));
    for i in 0..m {
        for k in (i + 1)..m {
            for j in 0..n {
                for l in (j + 1)..n {
                    dirs.push(NullDirection {
                        plus: (i * n + j, k * n + l),
                        minus: (i * n + l, k * n + j),
                    });
                }
            }
        }
    }
    dirs
}

/// The basis `{H_q}` as dense matrices, ordered by `(i, k, j, l)`.
pub fn nullity_basis(m: usize, n: usize) -> Vec<SymMatrix> {
    null_directions(m, n).iter().map(|d| d.to_matrix(m * n)).collect()
}

pub fn binom2(k: usize) -> usize {
    k * k.saturating_sub(1) / 2
}

/// `M₀ = (a_{ijkl})` in the `index_of` ordering.
pub fn natural_gram(form: &BiquadraticForm) -> SymMatrix {
    let (m, n) = (form.m(), form.n());
    let mut g = SymMatrix::zeros(m * n);
    for i in 0..m {
        for j in 0..n {
            for k in 0..m {
                for l in 0..n {
                    let a = form.tensor(i, j, k, l);
                    if a != 0.0 {
                        g.set(i * n + j, k * n + l, a);
                    }
                }
            }
        }
    }
    g
}

#[derive(Clone, Debug)]
pub struct GramSpace {
    m: usize,
    n: usize,
    natural: SymMatrix,
    directions: Vec<NullDirection>,
}

impl GramSpace {
    pub fn new(form: &BiquadraticForm) -> Self {
        Self {
            m: form.m(),
            n: form.n(),
            natural: natural_gram(form),
            directions: null_directions(form.m(), form.n()),
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.m * self.n
    }

    /// Number of free parameters, `C(m,2)·C(n,2)`.
    pub fn num_params(&self) -> usize {
        self.directions.len()
    }

    pub fn natural(&self) -> &SymMatrix {
        &self.natural
    }

    pub fn directions(&self) -> &[NullDirection] {
        &self.directions
    }

    pub fn basis(&self) -> Vec<SymMatrix> {
        self.directions.iter().map(|d| d.to_matrix(self.dim())).collect()
    }

    fn check_gamma(&self, gamma: &[f64]) -> Result<()> {
        if gamma.len() != self.directions.len() {
            return Err(BiqError::DimensionMismatch {
                expected: self.directions.len(),
                got: gamma.len(),
            });
        }
        Ok(())
    }

    /// `M(γ) = M₀ + Σ γ_q H_q`.
    pub fn gram_at(&self, gamma: &[f64]) -> Result<SymMatrix> {
        self.check_gamma(gamma)?;
        let mut g = self.natural.clone();
        for (d, &s) in self.directions.iter().zip(gamma) {
            if s != 0.0 {
                d.add_to(&mut g, s);
            }
        }
        Ok(g)
    }

    fn check_dim(&self, x: &SymMatrix) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(BiqError::DimensionMismatch {
                expected: self.dim(),
                got: x.dim(),
            });
        }
        Ok(())
    }

    /// Coordinates of the Frobenius projection of `X` onto the space.
    pub fn coordinates(&self, x: &SymMatrix) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let diff = x.sub(&self.natural);
        Ok(self
            .directions
            .iter()
            .map(|d| d.inner(&diff) / NULL_NORM_SQ)
            .collect())
    }

    /// Frobenius-nearest member of the space.
    pub fn project(&self, x: &SymMatrix) -> Result<SymMatrix> {
        let gamma = self.coordinates(x)?;
        self.gram_at(&gamma)
    }

    /// Largest entrywise gap between `X` and its projection.
    pub fn membership_residual(&self, x: &SymMatrix) -> Result<f64> {
        let p = self.project(x)?;
        Ok(p.sub(x).max_abs())
    }
}

/// A sum of squares `Σ_p f_p(x, y)²` with `f_p(x, y) = Σ (C_p)_{ij} x_i y_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct SosDecomposition {
    m: usize,
    n: usize,
    /// Each term flattened in `index_of` order.
    terms: Vec<Vec<f64>>,
}

impl SosDecomposition {
    pub fn new(m: usize, n: usize, terms: Vec<Vec<f64>>) -> Result<Self> {
        for t in &terms {
            if t.len() != m * n {
                return Err(BiqError::DimensionMismatch {
                    expected: m * n,
                    got: t.len(),
                });
            }
        }
        Ok(Self { m, n, terms })
    }

    /// From `m x n` coefficient matrices.
    pub fn from_matrices(m: usize, n: usize, mats: &[Vec<Vec<f64>>]) -> Result<Self> {
        let mut terms = Vec::with_capacity(mats.len());
        for mat in mats {
            if mat.len() != m || mat.iter().any(|row| row.len() != n) {
                return Err(BiqError::DimensionMismatch {
                    expected: m * n,
                    got: mat.iter().map(Vec::len).sum(),
                });
            }
            terms.push(mat.concat());
        }
        Self::new(m, n, terms)
    }

    /// One term `x_i y_j` per listed cell.
    pub fn identity_on(m: usize, n: usize, cells: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut terms = Vec::new();
        for (i, j) in cells {
            let mut t = vec![0.0; m * n];
            t[index_of(i, j, m, n)?] = 1.0;
            terms.push(t);
        }
        Self::new(m, n, terms)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[Vec<f64>] {
        &self.terms
    }

    pub fn term_matrix(&self, p: usize) -> Vec<Vec<f64>> {
        self.terms[p].chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    /// `Σ_p c_p c_pᵀ`.
    pub fn gram(&self) -> SymMatrix {
        SymMatrix::from_outer_products(self.m * self.n, self.terms.iter().map(Vec::as_slice))
    }

    pub fn to_form(&self) -> Result<BiquadraticForm> {
        BiquadraticForm::from_gram(self.m, self.n, &self.gram())
    }

    pub fn evaluate(&self, x: &[f64], y: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let f: f64 = (0..self.m)
                    .flat_map(|i| (0..self.n).map(move |j| (i, j)))
                    .map(|(i, j)| t[i * self.n + j] * x[i] * y[j])
                    .sum();
                f * f
            })
            .sum()
    }

    /// Mixes terms by a square matrix `Q` (`f'_p = Σ_s Q_{ps} f_s`); an
    /// orthogonal `Q` leaves `Σ f_p²` unchanged.
    pub fn mixed(&self, q: &[Vec<f64>]) -> Self {
        let terms = q
            .iter()
            .map(|row| {
                let mut t = vec![0.0; self.m * self.n];
                for (w, term) in row.iter().zip(&self.terms) {
                    for (acc, c) in t.iter_mut().zip(term) {
                        *acc += w * c;
                    }
                }
                t
            })
            .collect();
        Self {
            m: self.m,
            n: self.n,
            terms,
        }
    }

    pub fn report(&self, residual: f64) -> DecompositionReport {
        DecompositionReport {
            terms: (0..self.len()).map(|p| self.term_matrix(p)).collect(),
            residual,
        }
    }
}

/// `{"terms": [[[c_11, ..., c_1n], ..., [c_m1, ..., c_mn]], ...], "residual": real}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub terms: Vec<Vec<Vec<f64>>>,
    pub residual: f64,
}

/// Default threshold below which eigenvalues are dropped (and above whose
/// negation a Gram matrix is rejected as not PSD).
pub const PSD_TOL: f64 = 1e-8;

/// Factors a PSD Gram matrix as `Σ λ_p u_p u_pᵀ`, one term `√λ_p u_p` per
/// eigenvalue above `tol`.
pub fn decomposition_from_psd_gram(m: usize, n: usize, gram: &SymMatrix, tol: f64) -> Result<SosDecomposition> {
    if gram.dim() != m * n {
        return Err(BiqError::DimensionMismatch {
            expected: m * n,
            got: gram.dim(),
        });
    }
    let eig = eig_sym(gram)?;
    let lmin = eig.lambda_min();
    if lmin < -tol {
        return Err(BiqError::NotPsd { lambda_min: lmin, tol });
    }
    let cutoff = tol * eig.lambda_max().max(1.0);
    let terms = eig
        .values
        .iter()
        .zip(&eig.vectors)
        .filter(|(l, _)| **l > cutoff)
        .map(|(l, u)| {
            let s = l.sqrt();
            u.iter().map(|c| s * c).collect()
        })
        .collect();
    SosDecomposition::new(m, n, terms)
}

/// Largest monomial-coefficient gap between `Σ f_p²` and `P`.
pub fn verify_decomposition(form: &BiquadraticForm, decomposition: &SosDecomposition) -> Result<f64> {
    if decomposition.m() != form.m() || decomposition.n() != form.n() {
        return Err(BiqError::DimensionMismatch {
            expected: form.m() * form.n(),
            got: decomposition.m() * decomposition.n(),
        });
    }
    let rebuilt = decomposition.to_form()?;
    Ok(monomial_positions(form.m(), form.n())
        .map(|(i, k, j, l)| {
            let a = form.monomial_coeff(i, k, j, l).expect("ordered indices");
            let b = rebuilt.monomial_coeff(i, k, j, l).expect("ordered indices");
            (a - b).abs()
        })
        .fold(0.0, f64::max))
}
