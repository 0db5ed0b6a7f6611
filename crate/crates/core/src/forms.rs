//! Biquadratic forms `P(x, y) = Σ a_{ijkl} x_i x_k y_j y_l`.
//!
//! Indices are 0-based in the Rust API and 1-based in the JSON file format.
//! A coefficient tensor with the symmetry `a_{ijkl} = a_{kjil} = a_{klij}`
//! is determined by one value per orbit
//! `{(i,j,k,l), (k,j,i,l), (k,l,i,j), (i,l,k,j)}`, and each orbit is
//! exactly the set of tensor positions feeding the monomial
//! `x_i x_k y_j y_l`. Forms store one value per orbit keyed by the
//! lexicographically smallest member.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{BiqError, Result};
use crate::graphs::BipartiteGraph;
use crate::numerics::SymMatrix;

/// A tensor position `(i, j, k, l)`: `i, k` index `x`, `j, l` index `y`.
pub type Quad = (usize, usize, usize, usize);

/// The four symmetry images of a tensor position.
pub fn orbit(q: Quad) -> [Quad; 4] {
    let (i, j, k, l) = q;
    [(i, j, k, l), (k, j, i, l), (k, l, i, j), (i, l, k, j)]
}

pub fn canonical(q: Quad) -> Quad {
    orbit(q).into_iter().min().expect("orbit is non-empty")
}

/// Number of distinct positions in the orbit of `q`: 1, 2 or 4.
pub fn orbit_size(q: Quad) -> usize {
    let (i, j, k, l) = q;
    match (i == k, j == l) {
        (true, true) => 1,
        (true, false) | (false, true) => 2,
        (false, false) => 4,
    }
}

/// One expanded monomial `coefficient · x_i x_k y_j y_l` with `i ≤ k`, `j ≤ l`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Monomial {
    pub i: usize,
    pub k: usize,
    pub j: usize,
    pub l: usize,
    pub coefficient: f64,
}

impl Monomial {
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        self.coefficient * x[self.i] * x[self.k] * y[self.j] * y[self.l]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChoiVariant {
    /// The standard PSD, non-SOS form with `-2` cross terms.
    Classical,
    /// Squares only, with three negated terms. Takes negative values.
    Printed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BiquadraticForm {
    m: usize,
    n: usize,
    coeffs: BTreeMap<Quad, f64>,
}

impl BiquadraticForm {
    pub fn zero(m: usize, n: usize) -> Result<Self> {
        Self::new(m, n, std::iter::empty())
    }

    /// Builds a form from tensor entries `(i, j, k, l, a_{ijkl})`.
    /// Entries landing in the same orbit are summed.
    pub fn new(m: usize, n: usize, entries: impl IntoIterator<Item = (usize, usize, usize, usize, f64)>) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(BiqError::InvalidIndex(format!("form dimensions {m}x{n} must be positive")));
        }
        let mut coeffs = BTreeMap::new();
        for (i, j, k, l, value) in entries {
            if i >= m || k >= m || j >= n || l >= n {
                return Err(BiqError::InvalidIndex(format!(
                    "entry ({i},{j},{k},{l}) outside {m}x{n} form"
                )));
            }
            if !value.is_finite() {
                return Err(BiqError::InvalidIndex(format!("entry ({i},{j},{k},{l}) is not finite")));
            }
            *coeffs.entry(canonical((i, j, k, l))).or_insert(0.0) += value;
        }
        coeffs.retain(|_, v| *v != 0.0);
        Ok(Self { m, n, coeffs })
    }

    /// `P_G = Σ_{(i,j) ∈ E} x_i² y_j²`.
    pub fn from_graph(graph: &BipartiteGraph) -> Result<Self> {
        Self::new(
            graph.m(),
            graph.n(),
            graph.edges().map(|(i, j)| (i, j, i, j, 1.0)),
        )
    }

    pub fn choi(variant: ChoiVariant) -> Self {
        // x_i^2 y_j^2 terms shared by both variants
        let squares = [(0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (2, 0)];
        let mut entries: Vec<_> = squares.iter().map(|&(i, j)| (i, j, i, j, 1.0)).collect();
        match variant {
            ChoiVariant::Classical => {
                // -2 x_i x_k y_i y_k spread over a 4-position orbit
                for (i, k) in [(0, 1), (1, 2), (2, 0)] {
                    entries.push((i, i, k, k, -0.5));
                }
            }
            ChoiVariant::Printed => {
                for (i, j) in [(0, 2), (1, 0), (2, 1)] {
                    entries.push((i, j, i, j, -1.0));
                }
            }
        }
        Self::new(3, 3, entries).expect("Choi entries are in range")
    }

    /// Reads the form `zᵀ M z` off a Gram matrix: each orbit value is the
    /// mean of `M` over the orbit's positions.
    pub fn from_gram(m: usize, n: usize, gram: &SymMatrix) -> Result<Self> {
        if gram.dim() != m * n {
            return Err(BiqError::DimensionMismatch {
                expected: m * n,
                got: gram.dim(),
            });
        }
        let mut entries = Vec::new();
        for q in canonical_quads(m, n) {
            let positions = distinct_orbit(q);
            let sum: f64 = positions
                .iter()
                .map(|&(i, j, k, l)| gram.get(i * n + j, k * n + l))
                .sum();
            let value = sum / positions.len() as f64;
            if value != 0.0 {
                entries.push((q.0, q.1, q.2, q.3, value));
            }
        }
        Self::new(m, n, entries)
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Non-zero orbits keyed by canonical representative.
    pub fn orbits(&self) -> impl Iterator<Item = (Quad, f64)> + '_ {
        self.coeffs.iter().map(|(&q, &v)| (q, v))
    }

    pub fn num_orbits(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Tensor value `a_{ijkl}` at any position.
    pub fn tensor(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.coeffs.get(&canonical((i, j, k, l))).copied().unwrap_or(0.0)
    }

    fn check_point(&self, x: &[f64], y: &[f64]) -> Result<()> {
        if x.len() != self.m {
            return Err(BiqError::DimensionMismatch {
                expected: self.m,
                got: x.len(),
            });
        }
        if y.len() != self.n {
            return Err(BiqError::DimensionMismatch {
                expected: self.n,
                got: y.len(),
            });
        }
        Ok(())
    }

    /// Full expansion over all `i, k ∈ [m]`, `j, l ∈ [n]`.
    pub fn evaluate(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_point(x, y)?;
        let mut acc = 0.0;
        for (&q, &a) in &self.coeffs {
            for (i, j, k, l) in distinct_orbit(q) {
                acc += a * x[i] * x[k] * y[j] * y[l];
            }
        }
        Ok(acc)
    }

    /// Total coefficient of `x_i x_k y_j y_l`, requiring `i ≤ k` and `j ≤ l`.
    pub fn monomial_coeff(&self, i: usize, k: usize, j: usize, l: usize) -> Result<f64> {
        if i > k || j > l {
            return Err(BiqError::InvalidIndex(format!(
                "monomial indices must satisfy i <= k and j <= l, got ({i},{k},{j},{l})"
            )));
        }
        if k >= self.m || l >= self.n {
            return Err(BiqError::InvalidIndex(format!(
                "monomial ({i},{k},{j},{l}) outside {}x{} form",
                self.m, self.n
            )));
        }
        let q = (i, j, k, l);
        Ok(orbit_size(q) as f64 * self.tensor(i, j, k, l))
    }

    /// Every monomial of the `m x n` monomial basis, including zero ones.
    pub fn monomials(&self) -> Vec<Monomial> {
        monomial_positions(self.m, self.n)
            .map(|(i, k, j, l)| Monomial {
                i,
                k,
                j,
                l,
                coefficient: orbit_size((i, j, k, l)) as f64 * self.tensor(i, j, k, l),
            })
            .collect()
    }

    pub fn scaled(&self, c: f64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .map(|(&q, &v)| (q, v * c))
            .filter(|(_, v)| *v != 0.0)
            .collect();
        Self {
            m: self.m,
            n: self.n,
            coeffs,
        }
    }

    /// `Some(edges)` when every orbit is a square term `x_i² y_j²` with a
    /// positive coefficient.
    pub fn simple_support(&self) -> Option<Vec<((usize, usize), f64)>> {
        self.coeffs
            .iter()
            .map(|(&(i, j, k, l), &v)| (i == k && j == l && v > 0.0).then_some(((i, j), v)))
            .collect()
    }

    pub fn to_file(&self) -> FormFile {
        FormFile {
            m: self.m,
            n: self.n,
            entries: self
                .coeffs
                .iter()
                .map(|(&(i, j, k, l), &v)| (i + 1, j + 1, k + 1, l + 1, v))
                .collect(),
        }
    }

    pub fn from_file(file: &FormFile) -> Result<Self> {
        let mut entries = Vec::with_capacity(file.entries.len());
        for &(i, j, k, l, v) in &file.entries {
            if i == 0 || j == 0 || k == 0 || l == 0 {
                return Err(BiqError::InvalidIndex(format!(
                    "form file indices are 1-based, got ({i},{j},{k},{l})"
                )));
            }
            entries.push((i - 1, j - 1, k - 1, l - 1, v));
        }
        Self::new(file.m, file.n, entries)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(&serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("form file serializes")
    }
}

/// On-disk form: `{"m": int, "n": int, "entries": [[i,j,k,l,value], ...]}`, 1-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormFile {
    pub m: usize,
    pub n: usize,
    pub entries: Vec<(usize, usize, usize, usize, f64)>,
}

fn distinct_orbit(q: Quad) -> Vec<Quad> {
    let mut v = orbit(q).to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

/// All `(i, k, j, l)` with `i ≤ k`, `j ≤ l`.
pub fn monomial_positions(m: usize, n: usize) -> impl Iterator<Item = (usize, usize, usize, usize)> {
    (0..m).flat_map(move |i| {
        (i..m).flat_map(move |k| (0..n).flat_map(move |j| (j..n).map(move |l| (i, k, j, l))))
    })
}

fn canonical_quads(m: usize, n: usize) -> impl Iterator<Item = Quad> {
    monomial_positions(m, n).map(|(i, k, j, l)| canonical((i, j, k, l)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn example_one() -> BiquadraticForm {
        BiquadraticForm::new(2, 2, [(0, 0, 0, 0, 1.0), (1, 1, 1, 1, 1.0)]).unwrap()
    }

    fn random_form(rng: &mut ChaCha8Rng, m: usize, n: usize) -> BiquadraticForm {
        let entries: Vec<_> = (0..12)
            .map(|_| {
                (
                    rng.random_range(0..m),
                    rng.random_range(0..n),
                    rng.random_range(0..m),
                    rng.random_range(0..n),
                    rng.random_range(-1.0..1.0),
                )
            })
            .collect();
        BiquadraticForm::new(m, n, entries).unwrap()
    }

    #[test]
    fn make_form_examples() {
        let p = example_one();
        assert_eq!(p.num_orbits(), 2);
        assert_eq!(p.evaluate(&[1.0, 1.0], &[1.0, 1.0]).unwrap(), 2.0);

        let zero = BiquadraticForm::zero(3, 2).unwrap();
        assert!(zero.is_zero());
        assert_eq!(zero.evaluate(&[1.0, -2.0, 3.0], &[0.5, 4.0]).unwrap(), 0.0);

        let merged = BiquadraticForm::new(2, 2, [(0, 0, 1, 1, 0.5), (1, 1, 0, 0, 0.5)]).unwrap();
        assert_eq!(merged.num_orbits(), 1);
        assert_eq!(merged.tensor(0, 0, 1, 1), 1.0);
        assert_eq!(merged.tensor(1, 0, 0, 1), 1.0);
    }

    #[test]
    fn make_form_rejects_bad_indices() {
        assert!(matches!(
            BiquadraticForm::new(2, 2, [(2, 0, 0, 0, 1.0)]),
            Err(BiqError::InvalidIndex(_))
        ));
        assert!(matches!(
            BiquadraticForm::new(2, 2, [(0, 0, 0, 5, 1.0)]),
            Err(BiqError::InvalidIndex(_))
        ));
        assert!(BiquadraticForm::zero(0, 2).is_err());
    }

    #[test]
    fn evaluate_rejects_wrong_lengths() {
        let p = example_one();
        assert!(matches!(
            p.evaluate(&[1.0], &[1.0, 1.0]),
            Err(BiqError::DimensionMismatch { expected: 2, got: 1 })
        ));
        assert!(p.evaluate(&[1.0, 1.0], &[1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn symmetry_images_share_a_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = random_form(&mut rng, 3, 4);
        for i in 0..3 {
            for k in 0..3 {
                for j in 0..4 {
                    for l in 0..4 {
                        let a = p.tensor(i, j, k, l);
                        for (ii, jj, kk, ll) in orbit((i, j, k, l)) {
                            assert_eq!(p.tensor(ii, jj, kk, ll), a);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn choi_values() {
        let c = BiquadraticForm::choi(ChoiVariant::Classical);
        assert_eq!(c.evaluate(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(c.evaluate(&[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(c.monomial_coeff(0, 1, 0, 1).unwrap(), -2.0);
        assert_eq!(c.monomial_coeff(0, 0, 1, 1).unwrap(), 1.0);
        // x1^2 y3^2 is absent from the classical form
        assert_eq!(c.monomial_coeff(0, 0, 2, 2).unwrap(), 0.0);

        let p = BiquadraticForm::choi(ChoiVariant::Printed);
        assert_eq!(p.evaluate(&[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]).unwrap(), -1.0);
        assert!(p.simple_support().is_none());
        assert_eq!(p.num_orbits(), 9);
    }

    #[test]
    fn classical_choi_is_nonnegative_on_samples() {
        let c = BiquadraticForm::choi(ChoiVariant::Classical);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..2000 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            assert!(c.evaluate(&x, &y).unwrap() >= -1e-12);
        }
    }

    #[test]
    fn monomial_coeff_examples() {
        let p = example_one();
        assert_eq!(p.monomial_coeff(0, 0, 0, 0).unwrap(), 1.0);
        assert_eq!(p.monomial_coeff(0, 1, 0, 1).unwrap(), 0.0);
        assert!(matches!(p.monomial_coeff(1, 0, 0, 0), Err(BiqError::InvalidIndex(_))));
        assert!(matches!(p.monomial_coeff(0, 0, 1, 0), Err(BiqError::InvalidIndex(_))));
    }

    #[test]
    fn evaluate_matches_monomial_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (m, n) in [(2, 2), (3, 3), (4, 3), (2, 5)] {
            let p = random_form(&mut rng, m, n);
            let monos = p.monomials();
            for _ in 0..100 {
                let x: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
                let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
                let direct = p.evaluate(&x, &y).unwrap();
                let via: f64 = monos.iter().map(|mono| mono.eval(&x, &y)).sum();
                assert!((direct - via).abs() <= 1e-12 * direct.abs().max(1.0));
            }
        }
    }

    #[test]
    fn graph_forms() {
        let g = crate::graphs::paper_graph_4x3();
        let p = BiquadraticForm::from_graph(&g).unwrap();
        assert_eq!(p.num_orbits(), 7);
        for i in 0..4 {
            for j in 0..3 {
                let expected = if g.has_edge(i, j) { 1.0 } else { 0.0 };
                assert_eq!(p.monomial_coeff(i, i, j, j).unwrap(), expected);
            }
        }
        for mono in p.monomials() {
            if mono.i != mono.k || mono.j != mono.l {
                assert_eq!(mono.coefficient, 0.0);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
            let y: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
            assert!(p.evaluate(&x, &y).unwrap() >= 0.0);
        }

        let matching = BipartiteGraph::new(2, 2, [(0, 0), (1, 1)]).unwrap();
        assert_eq!(BiquadraticForm::from_graph(&matching).unwrap(), example_one());
        let empty = BipartiteGraph::new(3, 3, []).unwrap();
        assert!(BiquadraticForm::from_graph(&empty).unwrap().is_zero());
    }

    #[test]
    fn file_format() {
        let text = r#"{"m": 2, "n": 2, "entries": [[1,1,1,1,1.0],[2,2,2,2,1]]}"#;
        let p = BiquadraticForm::from_json(text).unwrap();
        assert_eq!(p, example_one());
        let back = BiquadraticForm::from_json(&p.to_json()).unwrap();
        assert_eq!(back, p);
        assert!(BiquadraticForm::from_json(r#"{"m":2,"n":2,"entries":[[0,1,1,1,1]]}"#).is_err());
        assert!(BiquadraticForm::from_json(r#"{"m":2,"n":2,"entries":[[3,1,1,1,1]]}"#).is_err());
    }

    #[test]
    fn gram_readback_recovers_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = random_form(&mut rng, 3, 3);
        let space = crate::gram::GramSpace::new(&p);
        let back = BiquadraticForm::from_gram(3, 3, space.natural()).unwrap();
        for (a, b) in p.monomials().iter().zip(back.monomials()) {
            assert!((a.coefficient - b.coefficient).abs() < 1e-15);
        }
    }
}
