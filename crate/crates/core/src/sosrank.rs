//! SOS certification and SOS-rank search over the Gram family.
//!
//! A form is SOS exactly when some member `M(γ)` of its Gram family is PSD,
//! so certification maximizes the concave function `γ ↦ λ_min(M(γ))`.
//! The SOS rank is the smallest rank of a PSD member; [`sos_rank_search`]
//! bounds it from above with rank-capped alternating projections, and for
//! 4-cycle-free graph forms [`simple_rank_exact`] gives it exactly.

use std::collections::BTreeMap;
use std::fmt;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{BiqError, Result};
use crate::forms::BiquadraticForm;
use crate::gram::{decomposition_from_psd_gram, verify_decomposition, GramSpace, SosDecomposition, NULL_NORM_SQ};
use crate::graphs::BipartiteGraph;
use crate::numerics::{eig_sym, psd_project_rank_capped, SymMatrix};

/// Numerical settings for certification and rank search. Every field is
/// echoed into reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SosConfig {
    /// `λ_star ≥ -cert_tol` certifies SOS.
    pub cert_tol: f64,
    /// `λ_star ≤ -cert_margin` (after convergence) reports NOT_SOS.
    pub cert_margin: f64,
    /// Frobenius gap at which alternating projections count as converged.
    pub conv_tol: f64,
    pub ascent_iters: usize,
    pub projection_iters: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Standard deviation of the rank-search start perturbations, relative
    /// to the largest Gram entry.
    pub restart_sigma: f64,
    /// Eigenvalue threshold when factoring a Gram matrix into squares.
    pub psd_tol: f64,
    /// Largest accepted reconstruction residual of an emitted decomposition.
    pub residual_tol: f64,
}

impl Default for SosConfig {
    fn default() -> Self {
        Self {
            cert_tol: 1e-7,
            cert_margin: 1e-4,
            conv_tol: 1e-9,
            ascent_iters: 5000,
            projection_iters: 20000,
            restarts: 8,
            seed: 42,
            restart_sigma: 0.1,
            psd_tol: 1e-8,
            residual_tol: 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SosStatus {
    #[serde(rename = "SOS")]
    Sos,
    #[serde(rename = "NOT_SOS")]
    NotSos,
    #[serde(rename = "INCONCLUSIVE")]
    Inconclusive,
}

impl fmt::Display for SosStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SosStatus::Sos => "SOS",
            SosStatus::NotSos => "NOT_SOS",
            SosStatus::Inconclusive => "INCONCLUSIVE",
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SosCertificate {
    pub status: SosStatus,
    pub gamma_star: Vec<f64>,
    pub lambda_star: f64,
    /// Upper bound on `max_γ λ_min(M(γ))` from a dual PSD matrix
    /// orthogonal to the nullity directions, when one was built.
    pub dual_bound: Option<f64>,
    pub witness: SymMatrix,
    /// Subgradient iterations plus Newton steps, summed over restarts.
    pub iterations: usize,
    /// Whether the maximization stopped on a convergence criterion rather
    /// than an iteration cap.
    pub converged: bool,
}

/// `λ_min(M(γ))` together with its supergradient `(u₁ᵀ H_q u₁)_q`.
pub fn lambda_min_with_gradient(space: &GramSpace, gamma: &[f64]) -> Result<(f64, Vec<f64>)> {
    let g = space.gram_at(gamma)?;
    let eig = eig_sym(&g)?;
    let u = eig.vectors.last().expect("Gram matrices are non-empty");
    let grad = space.directions().iter().map(|d| d.quad(u)).collect();
    Ok((eig.lambda_min(), grad))
}

struct AscentOutcome {
    lambda: f64,
    gamma: Vec<f64>,
    iterations: usize,
    stalled: bool,
}

const STALL_WINDOW: usize = 150;

/// Normalized subgradient ascent with step `α₀ / √(k+1)`.
fn subgradient_ascent(space: &GramSpace, start: Vec<f64>, scale: f64, max_iters: usize) -> Result<AscentOutcome> {
    let step0 = 0.25 * scale;
    let mut gamma = start;
    let mut best_lambda = f64::NEG_INFINITY;
    let mut best_gamma = gamma.clone();
    let mut last_improvement = 0;
    let mut iterations = 0;
    let mut stalled = false;
    for k in 0..max_iters {
        iterations = k + 1;
        let (lambda, grad) = lambda_min_with_gradient(space, &gamma)?;
        if lambda > best_lambda + 1e-12 * scale {
            last_improvement = k;
        }
        if lambda > best_lambda {
            best_lambda = lambda;
            best_gamma.clone_from(&gamma);
        }
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        // a simple minimal eigenvalue with zero gradient is a maximizer
        if norm <= 1e-12 || k - last_improvement >= STALL_WINDOW {
            stalled = true;
            break;
        }
        let step = step0 / ((k + 1) as f64).sqrt() / norm;
        for (g, d) in gamma.iter_mut().zip(&grad) {
            *g += step * d;
        }
    }
    Ok(AscentOutcome {
        lambda: best_lambda,
        gamma: best_gamma,
        iterations,
        stalled,
    })
}

struct BarrierOutcome {
    gamma: Vec<f64>,
    lambda: f64,
    dual_bound: Option<f64>,
    steps: usize,
    converged: bool,
}

/// Interior-point refinement of `max t  s.t.  M(γ) − tI ⪰ 0` by damped
/// Newton steps on `−t − μ·log det(M(γ) − tI)` with `μ` driven to zero.
/// At a central point `Z = μ (M − tI)⁻¹` is (after cleanup) a dual
/// feasible matrix whose value bounds the optimum from above.
fn barrier_refine(space: &GramSpace, start: &[f64], scale: f64) -> Result<BarrierOutcome> {
    let d = space.num_params();
    let dim = space.dim();
    let dirs = space.directions();
    let lambda0 = crate::numerics::lambda_min(&space.gram_at(start)?)?;
    let mut gamma = start.to_vec();
    let mut t = lambda0 - 0.1 * scale;
    let mut mu = 0.1 * scale;
    let target_gap = 1e-12 * scale;
    let mut steps = 0;
    let mut converged = false;
    let mut last_inverse: Option<SymMatrix> = None;

    let slack = |gamma: &[f64], t: f64| -> Result<SymMatrix> {
        let mut s = space.gram_at(gamma)?;
        for i in 0..dim {
            s.add_sym(i, i, -t);
        }
        Ok(s)
    };
    let objective = |chol_diag_log: f64, t: f64, mu: f64| -t - mu * chol_diag_log;

    'outer: loop {
        let mut centered = false;
        for _ in 0..80 {
            let s = slack(&gamma, t)?;
            let Some(chol) = s.cholesky() else {
                break 'outer;
            };
            let logdet = log_det(&chol_factor_diag(&s));
            let inv = chol.inverse();
            // gradient of −t − μ log det S in (γ, t)
            let mut grad = Vec::with_capacity(d + 1);
            for dir in dirs {
                grad.push(-mu * dir.inner(&inv));
            }
            grad.push(-1.0 + mu * inv.trace());

            let inv_sq = square(&inv);
            let mut hess = SymMatrix::zeros(d + 1);
            for (a, da) in dirs.iter().enumerate() {
                for (b, db) in dirs.iter().enumerate().skip(a) {
                    let mut acc = 0.0;
                    for (y, u, h1) in da.entries() {
                        for (v, x, h2) in db.entries() {
                            acc += h1 * h2 * inv.get(x, y) * inv.get(u, v);
                        }
                    }
                    hess.set(a, b, mu * acc);
                }
                let mut acc = 0.0;
                for (y, u, h) in da.entries() {
                    acc += h * inv_sq.get(u, y);
                }
                hess.set(a, d, -mu * acc);
            }
            hess.set(d, d, mu * inv_sq.trace());

            let chol_h = match hess.cholesky() {
                Some(c) => c,
                None => {
                    let ridge = 1e-12 * hess.max_abs().max(1e-300);
                    let mut h = hess.clone();
                    for i in 0..=d {
                        h.add_sym(i, i, ridge);
                    }
                    match h.cholesky() {
                        Some(c) => c,
                        None => break 'outer,
                    }
                }
            };
            let neg_grad: Vec<f64> = grad.iter().map(|g| -g).collect();
            let delta = chol_h.solve(&neg_grad);
            let decrement_sq: f64 = -grad.iter().zip(&delta).map(|(g, s)| g * s).sum::<f64>();
            last_inverse = Some(inv);
            steps += 1;
            if decrement_sq / mu <= 1e-9 || decrement_sq <= 0.0 {
                centered = true;
                break;
            }

            let f0 = objective(logdet, t, mu);
            let mut step = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let trial_gamma: Vec<f64> = gamma.iter().zip(&delta).map(|(g, s)| g + step * s).collect();
                let trial_t = t + step * delta[d];
                let trial = slack(&trial_gamma, trial_t)?;
                if trial.cholesky().is_some() {
                    let f1 = objective(log_det(&chol_factor_diag(&trial)), trial_t, mu);
                    if f1 <= f0 - 0.25 * step * decrement_sq {
                        gamma = trial_gamma;
                        t = trial_t;
                        accepted = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !accepted {
                // no further progress is representable at this μ
                centered = true;
                break;
            }
        }
        if !centered {
            break;
        }
        if dim as f64 * mu <= target_gap {
            converged = true;
            break;
        }
        mu *= 0.2;
    }

    let lambda = crate::numerics::lambda_min(&space.gram_at(&gamma)?)?;
    let dual_bound = match last_inverse {
        Some(inv) => dual_value(space, &inv.scaled(mu))?,
        None => None,
    };
    Ok(BarrierOutcome {
        gamma,
        lambda,
        dual_bound,
        steps,
        converged,
    })
}

fn chol_factor_diag(s: &SymMatrix) -> Vec<f64> {
    // diagonal of the Cholesky factor; only called on PD matrices
    let n = s.dim();
    let mut l = vec![0.0; n * n];
    let mut diag = Vec::with_capacity(n);
    for j in 0..n {
        let mut dj = s.get(j, j);
        for k in 0..j {
            dj -= l[j * n + k] * l[j * n + k];
        }
        let dj = dj.max(f64::MIN_POSITIVE).sqrt();
        l[j * n + j] = dj;
        diag.push(dj);
        for i in (j + 1)..n {
            let mut v = s.get(i, j);
            for k in 0..j {
                v -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = v / dj;
        }
    }
    diag
}

fn log_det(chol_diag: &[f64]) -> f64 {
    2.0 * chol_diag.iter().map(|d| d.ln()).sum::<f64>()
}

fn square(a: &SymMatrix) -> SymMatrix {
    let n = a.dim();
    let mut out = vec![0.0; n * n];
    for r in 0..n {
        for c in r..n {
            let v: f64 = (0..n).map(|k| a.get(r, k) * a.get(k, c)).sum();
            out[r * n + c] = v;
            out[c * n + r] = v;
        }
    }
    SymMatrix::from_row_major(n, out).expect("finite product")
}

/// `⟨M₀, Z⟩ / tr Z` after making `Z` orthogonal to every `H_q` and PSD.
fn dual_value(space: &GramSpace, z: &SymMatrix) -> Result<Option<f64>> {
    if !z.is_finite() {
        return Ok(None);
    }
    let mut z = z.clone();
    for dir in space.directions() {
        let c = dir.inner(&z) / NULL_NORM_SQ;
        dir.add_to(&mut z, -c);
    }
    // H_q vanish on the diagonal, so an identity shift keeps orthogonality
    let lmin = eig_sym(&z)?.lambda_min();
    if lmin < 0.0 {
        for i in 0..z.dim() {
            z.add_sym(i, i, -lmin);
        }
    }
    let tr = z.trace();
    if tr <= 0.0 {
        return Ok(None);
    }
    Ok(Some(space.natural().inner(&z) / tr))
}

fn gram_scale(space: &GramSpace) -> f64 {
    let s = space.natural().max_abs();
    if s > 0.0 {
        s
    } else {
        1.0
    }
}

/// Certifies SOS (or not) by maximizing `λ_min(M(γ))`.
pub fn certify_sos(form: &BiquadraticForm, cfg: &SosConfig) -> Result<SosCertificate> {
    certify_in_space(&GramSpace::new(form), cfg)
}

pub fn certify_in_space(space: &GramSpace, cfg: &SosConfig) -> Result<SosCertificate> {
    let d = space.num_params();
    if space.natural().max_abs() == 0.0 {
        return Ok(SosCertificate {
            status: SosStatus::Sos,
            gamma_star: vec![0.0; d],
            lambda_star: 0.0,
            dual_bound: Some(0.0),
            witness: SymMatrix::zeros(space.dim()),
            iterations: 0,
            converged: true,
        });
    }
    let scale = gram_scale(space);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut starts = vec![vec![0.0; d]];
    for _ in 0..cfg.restarts {
        starts.push((0..d).map(|_| scale * rng.random_range(-1.0..1.0)).collect());
    }

    let outcomes: Vec<Result<AscentOutcome>> = starts
        .into_par_iter()
        .map(|s| subgradient_ascent(space, s, scale, cfg.ascent_iters))
        .collect();
    let mut iterations = 0;
    let mut best: Option<AscentOutcome> = None;
    for o in outcomes {
        let o = o?;
        iterations += o.iterations;
        // strictly greater keeps the lowest restart index on ties
        if best.as_ref().is_none_or(|b| o.lambda > b.lambda) {
            best = Some(o);
        }
    }
    let best = best.expect("at least one start");

    let mut gamma_star = best.gamma.clone();
    let mut lambda_star = best.lambda;
    let mut dual_bound = None;
    let mut converged = best.stalled;
    if d > 0 {
        let refined = barrier_refine(space, &best.gamma, scale)?;
        iterations += refined.steps;
        dual_bound = refined.dual_bound;
        converged |= refined.converged;
        if refined.lambda > lambda_star {
            lambda_star = refined.lambda;
            gamma_star = refined.gamma;
        }
    } else {
        // a single Gram matrix: nothing to optimize
        converged = true;
    }

    let status = if lambda_star >= -cfg.cert_tol {
        SosStatus::Sos
    } else if lambda_star <= -cfg.cert_margin
        && (converged || dual_bound.is_some_and(|b| b <= -cfg.cert_margin))
    {
        SosStatus::NotSos
    } else {
        SosStatus::Inconclusive
    };
    let witness = space.gram_at(&gamma_star)?;
    Ok(SosCertificate {
        status,
        gamma_star,
        lambda_star,
        dual_bound,
        witness,
        iterations,
        converged,
    })
}

/// Outcome of alternating projections at one rank cap.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RankAttempt {
    pub rank: usize,
    pub converged: bool,
    /// Projection starts tried.
    pub starts_tried: usize,
    /// Random-factor fits tried after every projection start stalled.
    pub factor_fits: usize,
    /// Smallest final gap over the starts tried.
    pub best_gap: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug)]
pub struct RankSearchResult {
    /// Smallest rank cap at which the projections converged.
    pub r_upper: usize,
    /// Exact lower bound, available for 4-cycle-free graph forms.
    pub r_lower: Option<usize>,
    pub gram: SymMatrix,
    pub decomposition: SosDecomposition,
    pub residual: f64,
    /// Index of the converging start: 0 is the certificate witness, then the
    /// perturbed starts, then the random-factor fits.
    pub restarts_used: usize,
    pub attempts: Vec<RankAttempt>,
}

struct ProjectionRun {
    converged: Option<SymMatrix>,
    gap: f64,
    iterations: usize,
}

const PROGRESS_WINDOW: usize = 100;
const PROGRESS_RATIO: f64 = 0.98;

/// Alternates between the Gram family and the PSD matrices of rank ≤ `rank`.
fn alternating_projections(space: &GramSpace, start: SymMatrix, rank: usize, cfg: &SosConfig, scale: f64) -> Result<ProjectionRun> {
    let tol = cfg.conv_tol * scale.max(1.0);
    let mut x = start;
    let mut gap = f64::INFINITY;
    let mut checkpoint = f64::INFINITY;
    for it in 1..=cfg.projection_iters {
        let y = psd_project_rank_capped(&x, rank)?;
        let next = space.project(&y)?;
        gap = y.distance(&next);
        if gap <= tol {
            return Ok(ProjectionRun {
                converged: Some(y),
                gap,
                iterations: it,
            });
        }
        x = next;
        if it % PROGRESS_WINDOW == 0 {
            if gap > PROGRESS_RATIO * checkpoint {
                return Ok(ProjectionRun {
                    converged: None,
                    gap,
                    iterations: it,
                });
            }
            checkpoint = gap;
        }
    }
    Ok(ProjectionRun {
        converged: None,
        gap,
        iterations: cfg.projection_iters,
    })
}

/// Least-squares fit of `r` squares to the form: Levenberg–Marquardt on the
/// factor `V` of `G = V Vᵀ`, with one residual per monomial. Started from a
/// rank-capped iterate, it returns the polished Gram matrix when every
/// monomial gap is below `tol`.
fn refine_factor(form: &BiquadraticForm, start: &SymMatrix, rank: usize, tol: f64, max_iters: usize) -> Result<Option<SymMatrix>> {
    let (m, n) = (form.m(), form.n());
    let dim = m * n;
    let eig = eig_sym(start)?;
    let cols = dim * rank;
    // v[c * rank + p]: entry c of the p-th factor column
    let mut v = vec![0.0; cols];
    for p in 0..rank {
        let s = eig.values[p].max(0.0).sqrt();
        for c in 0..dim {
            v[c * rank + p] = s * eig.vectors[p][c];
        }
    }
    let monomials: Vec<(f64, Vec<(usize, usize)>)> = crate::forms::monomial_positions(m, n)
        .map(|(i, k, j, l)| {
            let mut pairs = Vec::with_capacity(4);
            for (i1, i2) in [(i, k), (k, i)] {
                for (j1, j2) in [(j, l), (l, j)] {
                    let pair = (i1 * n + j1, i2 * n + j2);
                    if !pairs.contains(&pair) {
                        pairs.push(pair);
                    }
                }
            }
            (form.monomial_coeff(i, k, j, l).expect("ordered indices"), pairs)
        })
        .collect();
    let rows = monomials.len();
    let residuals = |v: &[f64]| -> Vec<f64> {
        monomials
            .iter()
            .map(|(c, pairs)| {
                let mut acc = -c;
                for &(a, b) in pairs {
                    acc += (0..rank).map(|p| v[a * rank + p] * v[b * rank + p]).sum::<f64>();
                }
                acc
            })
            .collect()
    };
    let cost = |r: &[f64]| r.iter().map(|x| x * x).sum::<f64>();
    let max_gap = |r: &[f64]| r.iter().fold(0.0f64, |a, x| a.max(x.abs()));

    let mut res = residuals(&v);
    let mut current = cost(&res);
    let mut damping = 1e-3 * (1.0 + current);
    let mut stagnant = 0;
    for _ in 0..max_iters {
        if max_gap(&res) <= tol {
            let vecs: Vec<Vec<f64>> = (0..rank).map(|p| (0..dim).map(|c| v[c * rank + p]).collect()).collect();
            return Ok(Some(SymMatrix::from_outer_products(dim, vecs.iter().map(|x| x.as_slice()))));
        }
        let mut jac = vec![0.0; rows * cols];
        for (t, (_, pairs)) in monomials.iter().enumerate() {
            let row = &mut jac[t * cols..(t + 1) * cols];
            for &(a, b) in pairs {
                for p in 0..rank {
                    row[a * rank + p] += v[b * rank + p];
                    row[b * rank + p] += v[a * rank + p];
                }
            }
        }
        let mut improved = false;
        while damping < 1e12 * (1.0 + current) {
            let step = lm_step(&jac, &res, rows, cols, damping);
            let Some(step) = step else {
                damping *= 4.0;
                continue;
            };
            let trial: Vec<f64> = v.iter().zip(&step).map(|(a, b)| a + b).collect();
            let trial_res = residuals(&trial);
            let trial_cost = cost(&trial_res);
            if trial_cost < current {
                if trial_cost > (1.0 - 1e-6) * current && current > tol * tol {
                    stagnant += 1;
                } else {
                    stagnant = 0;
                }
                v = trial;
                res = trial_res;
                current = trial_cost;
                damping = (damping / 3.0).max(1e-15);
                improved = true;
                break;
            }
            damping *= 4.0;
        }
        if !improved || stagnant >= 10 {
            break;
        }
    }
    Ok(None)
}

/// `−Jᵀ(JJᵀ + μI)⁻¹ r`, or the equivalent `−(JᵀJ + μI)⁻¹Jᵀ r` when that
/// system is smaller.
fn lm_step(jac: &[f64], res: &[f64], rows: usize, cols: usize, damping: f64) -> Option<Vec<f64>> {
    if rows <= cols {
        let mut a = vec![0.0; rows * rows];
        for s in 0..rows {
            for t in s..rows {
                let dot: f64 = jac[s * cols..(s + 1) * cols].iter().zip(&jac[t * cols..(t + 1) * cols]).map(|(x, y)| x * y).sum();
                a[s * rows + t] = dot;
                a[t * rows + s] = dot;
            }
            a[s * rows + s] += damping;
        }
        let w = SymMatrix::from_row_major(rows, a).ok()?.cholesky()?.solve(res);
        Some((0..cols).map(|c| -(0..rows).map(|t| jac[t * cols + c] * w[t]).sum::<f64>()).collect())
    } else {
        let mut a = vec![0.0; cols * cols];
        let mut g = vec![0.0; cols];
        for t in 0..rows {
            let row = &jac[t * cols..(t + 1) * cols];
            for c in 0..cols {
                if row[c] == 0.0 {
                    continue;
                }
                g[c] += row[c] * res[t];
                for d in c..cols {
                    a[c * cols + d] += row[c] * row[d];
                }
            }
        }
        for c in 0..cols {
            for d in 0..c {
                a[c * cols + d] = a[d * cols + c];
            }
            a[c * cols + c] += damping;
        }
        let x = SymMatrix::from_row_major(cols, a).ok()?.cholesky()?.solve(&g);
        Some(x.into_iter().map(|v| -v).collect())
    }
}

const FACTOR_STARTS: usize = 64;
const FACTOR_ITERS: usize = 200;

/// Random rank-`rank` Gram matrices `V Vᵀ` with the trace of the family
/// (the nullity directions vanish on the diagonal) in expectation.
fn factor_starts(space: &GramSpace, rank: usize, cfg: &SosConfig) -> Vec<SymMatrix> {
    let dim = space.dim();
    let sd = (space.natural().trace().max(0.0) / (dim * rank) as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x0fac_7000 ^ (rank as u64) << 32);
    (0..FACTOR_STARTS)
        .map(|_| {
            let cols: Vec<Vec<f64>> = (0..rank)
                .map(|_| {
                    (0..dim)
                        .map(|_| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            sd * z
                        })
                        .collect()
                })
                .collect();
            SymMatrix::from_outer_products(dim, cols.iter().map(|c| c.as_slice()))
        })
        .collect()
}

/// The witness of `cert` followed by `cfg.restarts` Gaussian perturbations.
pub fn rank_search_starts(space: &GramSpace, cert: &SosCertificate, cfg: &SosConfig) -> Result<Vec<SymMatrix>> {
    let scale = gram_scale(space);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5e_ed0f_5a4c);
    let mut starts = vec![cert.witness.clone()];
    for _ in 0..cfg.restarts {
        let gamma: Vec<f64> = cert
            .gamma_star
            .iter()
            .map(|g| {
                let z: f64 = StandardNormal.sample(&mut rng);
                g + cfg.restart_sigma * scale * z
            })
            .collect();
        starts.push(space.gram_at(&gamma)?);
    }
    Ok(starts)
}

fn accept(
    form: &BiquadraticForm,
    space: &GramSpace,
    converged: Option<SymMatrix>,
    rank: usize,
    cfg: &SosConfig,
) -> Result<Option<(SymMatrix, SosDecomposition, f64)>> {
    let Some(gram) = converged else {
        return Ok(None);
    };
    let decomposition = decomposition_from_psd_gram(space.m(), space.n(), &gram, cfg.psd_tol)?;
    let residual = verify_decomposition(form, &decomposition)?;
    if residual <= cfg.residual_tol && decomposition.len() <= rank {
        Ok(Some((gram, decomposition, residual)))
    } else {
        Ok(None)
    }
}

/// Runs the projections at one rank cap from each start in order, then
/// from seeded random-factor fits, and stops at the first start that
/// converges to a decomposition within tolerance.
pub fn try_rank(
    form: &BiquadraticForm,
    space: &GramSpace,
    starts: &[SymMatrix],
    rank: usize,
    cfg: &SosConfig,
) -> Result<(RankAttempt, Option<(usize, SymMatrix, SosDecomposition, f64)>)> {
    let scale = gram_scale(space);
    let mut attempt = RankAttempt {
        rank,
        converged: false,
        starts_tried: 0,
        factor_fits: 0,
        best_gap: f64::INFINITY,
        iterations: 0,
    };
    for (idx, start) in starts.iter().enumerate() {
        let run = alternating_projections(space, start.clone(), rank, cfg, scale)?;
        attempt.starts_tried += 1;
        attempt.iterations += run.iterations;
        attempt.best_gap = attempt.best_gap.min(run.gap);
        if let Some(found) = accept(form, space, run.converged, rank, cfg)? {
            attempt.converged = true;
            return Ok((attempt, Some((idx, found.0, found.1, found.2))));
        }
    }
    // every projection start stalled: fit squares from random factors and
    // let the projections confirm any fit
    for (fit, start) in factor_starts(space, rank, cfg).iter().enumerate() {
        attempt.factor_fits += 1;
        let Some(fitted) = refine_factor(form, start, rank, 1e-12 * scale.max(1.0), FACTOR_ITERS)? else {
            continue;
        };
        let run = alternating_projections(space, fitted, rank, cfg, scale)?;
        attempt.iterations += run.iterations;
        attempt.best_gap = attempt.best_gap.min(run.gap);
        if let Some(found) = accept(form, space, run.converged, rank, cfg)? {
            attempt.converged = true;
            return Ok((attempt, Some((starts.len() + fit, found.0, found.1, found.2))));
        }
    }
    Ok((attempt, None))
}

/// Default first rank to try: `|E|` for 4-cycle-free graph forms, else 1.
pub fn default_rank_floor(form: &BiquadraticForm) -> usize {
    match simple_form_graph(form) {
        Some((g, _)) if g.is_c4_free() && g.num_edges() > 0 => g.num_edges(),
        _ => 1,
    }
}

/// Upper-bounds the SOS rank by the smallest rank cap in `r_min..=r_max`
/// at which rank-capped alternating projections reach the Gram family.
pub fn sos_rank_search(form: &BiquadraticForm, r_min: usize, r_max: usize, cfg: &SosConfig) -> Result<RankSearchResult> {
    let space = GramSpace::new(form);
    let cert = certify_in_space(&space, cfg)?;
    rank_search_with_certificate(form, &space, &cert, r_min, r_max, cfg)
}

pub fn rank_search_with_certificate(
    form: &BiquadraticForm,
    space: &GramSpace,
    cert: &SosCertificate,
    r_min: usize,
    r_max: usize,
    cfg: &SosConfig,
) -> Result<RankSearchResult> {
    if cert.status != SosStatus::Sos {
        return Err(BiqError::NotCertified(cert.status.to_string()));
    }
    if form.is_zero() {
        return Ok(RankSearchResult {
            r_upper: 0,
            r_lower: Some(0),
            gram: SymMatrix::zeros(space.dim()),
            decomposition: SosDecomposition::new(form.m(), form.n(), Vec::new())?,
            residual: 0.0,
            restarts_used: 0,
            attempts: Vec::new(),
        });
    }
    let dim = space.dim();
    if r_min == 0 || r_min > r_max {
        return Err(BiqError::InvalidRank { rank: r_min, dim });
    }
    if r_max > dim {
        return Err(BiqError::InvalidRank { rank: r_max, dim });
    }
    let starts = rank_search_starts(space, cert, cfg)?;
    let mut attempts = Vec::new();
    for rank in r_min..=r_max {
        let (attempt, found) = try_rank(form, space, &starts, rank, cfg)?;
        attempts.push(attempt);
        if let Some((restarts_used, gram, decomposition, residual)) = found {
            let r_lower = match orthogonality_rank_lower(form, &decomposition) {
                Ok(count) => Some(count),
                Err(BiqError::NotSimpleForm(_)) | Err(BiqError::NotC4Free) => None,
                Err(e) => return Err(e),
            };
            return Ok(RankSearchResult {
                r_upper: rank,
                r_lower,
                gram,
                decomposition,
                residual,
                restarts_used,
                attempts,
            });
        }
    }
    Err(BiqError::RankSearchFailed { r_min, r_max })
}

/// The vectors `v_ij = (c_ij^(1), …, c_ij^(r))` of a decomposition, one per
/// cell `(i, j)`.
#[derive(Clone, Debug)]
pub struct EdgeVectorSystem {
    pub r: usize,
    pub vectors: BTreeMap<(usize, usize), Vec<f64>>,
}

impl EdgeVectorSystem {
    pub fn from_decomposition(d: &SosDecomposition) -> Self {
        let (m, n) = (d.m(), d.n());
        let mut vectors = BTreeMap::new();
        for i in 0..m {
            for j in 0..n {
                vectors.insert((i, j), d.terms().iter().map(|t| t[i * n + j]).collect());
            }
        }
        Self { r: d.len(), vectors }
    }

    pub fn dot(&self, a: (usize, usize), b: (usize, usize)) -> f64 {
        self.vectors[&a].iter().zip(&self.vectors[&b]).map(|(x, y)| x * y).sum()
    }

    pub fn norm_sq(&self, a: (usize, usize)) -> f64 {
        self.dot(a, a)
    }
}

fn ensure_reconstructs(form: &BiquadraticForm, d: &SosDecomposition) -> Result<()> {
    let residual = verify_decomposition(form, d)?;
    if residual > 1e-8 {
        return Err(BiqError::InvalidDecomposition(residual));
    }
    Ok(())
}

/// Largest violation of `v_ij·v_kl + v_il·v_kj = 2·a_{ijkl}` over all index
/// quadruples. For `i ≠ k`, `j ≠ l` the right side is half the coefficient
/// of `x_i x_k y_j y_l`; for graph forms it vanishes off the squares.
pub fn check_cycle_condition(form: &BiquadraticForm, d: &SosDecomposition) -> Result<f64> {
    ensure_reconstructs(form, d)?;
    let sys = EdgeVectorSystem::from_decomposition(d);
    let (m, n) = (form.m(), form.n());
    let mut worst: f64 = 0.0;
    for i in 0..m {
        for k in 0..m {
            for j in 0..n {
                for l in 0..n {
                    let lhs = sys.dot((i, j), (k, l)) + sys.dot((i, l), (k, j));
                    worst = worst.max((lhs - 2.0 * form.tensor(i, j, k, l)).abs());
                }
            }
        }
    }
    Ok(worst)
}

/// `(G, coefficients)` when the form is `Σ_{(i,j) ∈ E} c_ij x_i² y_j²`.
pub fn simple_form_graph(form: &BiquadraticForm) -> Option<(BipartiteGraph, Vec<((usize, usize), f64)>)> {
    let support = form.simple_support()?;
    let g = BipartiteGraph::new(form.m(), form.n(), support.iter().map(|(cell, _)| *cell)).ok()?;
    Some((g, support))
}

const ORTHO_TOL: f64 = 1e-6;

/// Counts the edge vectors of a decomposition of a 4-cycle-free simple
/// form after checking they are pairwise orthogonal with `‖v_ij‖² = c_ij`
/// and that non-edge vectors vanish. Orthogonal non-zero vectors in `ℝ^r`
/// number at most `r`, so the count bounds every decomposition's length.
pub fn orthogonality_rank_lower(form: &BiquadraticForm, d: &SosDecomposition) -> Result<usize> {
    let Some((graph, support)) = simple_form_graph(form) else {
        return Err(BiqError::NotSimpleForm("form has a mixed or negative term".into()));
    };
    if !graph.is_c4_free() {
        return Err(BiqError::NotC4Free);
    }
    ensure_reconstructs(form, d)?;
    let sys = EdgeVectorSystem::from_decomposition(d);
    let coeff: BTreeMap<(usize, usize), f64> = support.into_iter().collect();
    for &cell in sys.vectors.keys() {
        let expected = coeff.get(&cell).copied().unwrap_or(0.0);
        let norm_sq = sys.norm_sq(cell);
        if (norm_sq - expected).abs() > ORTHO_TOL * expected.max(1.0) {
            return Err(BiqError::InvalidDecomposition((norm_sq - expected).abs()));
        }
    }
    let edges: Vec<(usize, usize)> = graph.edges().collect();
    for (a, &e) in edges.iter().enumerate() {
        for &f in &edges[a + 1..] {
            let dot = sys.dot(e, f);
            if dot.abs() > ORTHO_TOL * (coeff[&e] * coeff[&f]).sqrt().max(1.0) {
                return Err(BiqError::InvalidDecomposition(dot.abs()));
            }
        }
    }
    Ok(edges.len())
}

/// Exact SOS rank `|E|` of `P_G` for a 4-cycle-free `G`, re-checked through
/// the identity decomposition's edge vectors.
pub fn simple_rank_exact(graph: &BipartiteGraph) -> Result<usize> {
    if !graph.is_c4_free() {
        return Err(BiqError::NotC4Free);
    }
    if graph.num_edges() == 0 {
        return Ok(0);
    }
    let form = BiquadraticForm::from_graph(graph)?;
    let d = SosDecomposition::identity_on(graph.m(), graph.n(), graph.edges())?;
    let violation = check_cycle_condition(&form, &d)?;
    if violation > 1e-12 {
        return Err(BiqError::InvalidDecomposition(violation));
    }
    let lower = orthogonality_rank_lower(&form, &d)?;
    debug_assert_eq!(lower, d.len());
    Ok(lower)
}
