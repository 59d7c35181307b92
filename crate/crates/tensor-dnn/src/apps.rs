//! End-to-end pipelines: best nonnegative rank-one approximation,
//! copositivity testing, worst-case bound constants and brute-force oracles.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};
use std::time::{Duration, Instant};

use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis::{binomial, compositions, nu};
use crate::error::{Error, Result};
use crate::extract::{
    certify, extract_even_candidates, extract_odd_candidates, metrics, ExtractionResult,
};
use crate::model::{assemble_with, lift_odd, DnnProblem, LiftRecord};
use crate::solver::{solve, DnnSolution, Residuals, SolveStatus, SolverOptions};
use crate::tensor::{GroupedVector, MultiForm, Shape, Tensor};

/// Lightweight view of a finished solve for reports.
#[derive(Debug, Clone)]
pub struct SolverSummary {
    /// Raw objective value of the (possibly lifted) minimization.
    pub f_dnn_raw: f64,
    pub iters: usize,
    pub status: SolveStatus,
    pub residuals: Residuals,
}

impl From<&DnnSolution> for SolverSummary {
    fn from(s: &DnnSolution) -> Self {
        SolverSummary {
            f_dnn_raw: s.f_dnn,
            iters: s.iters,
            status: s.status,
            residuals: s.residuals,
        }
    }
}

/// Report of a best nonnegative rank-one approximation run.
#[derive(Debug, Clone)]
pub struct ApproxReport {
    pub extraction: ExtractionResult,
    /// Best nonnegative weight; the approximation is `λ · x_*^{⊗α}`.
    pub lambda: f64,
    /// `‖A − λ x_*^{⊗α}‖² = ‖A‖² − λ²`.
    pub best_tensor_norm_sq: f64,
    pub wall_time: Duration,
    pub solver: SolverSummary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Copositive,
    NotCopositive,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Copositive => write!(f, "copositive"),
            Verdict::NotCopositive => write!(f, "not_copositive"),
            Verdict::Inconclusive => write!(f, "inconclusive"),
        }
    }
}

/// Outcome of a copositivity test.
///
/// The test is one-sided in both directions: `not_copositive` exhibits a
/// feasible point with negative value, while `copositive` means the search
/// found no negative value and the relaxation bound is nonnegative within the
/// tolerance band.
#[derive(Debug, Clone)]
pub struct CopositivityVerdict {
    pub verdict: Verdict,
    /// Relaxation bound (the sign carrier of decision rule one).
    pub f_dnn: f64,
    /// Best objective value found at a feasible point.
    pub f_app: f64,
}

struct PipelineSolve {
    problem: DnnProblem,
    solution: DnnSolution,
    scale: f64,
}

/// Assemble and solve `min ⟨−A, x^{⊗α}⟩` (lifting odd degrees first).
fn solve_negated(a: &Tensor, opts: &SolverOptions) -> Result<PipelineSolve> {
    let f0 = a.to_multiform().negated();
    let (f, lift) = if a.shape().has_odd_group() {
        let (fl, rec) = lift_odd(&f0)?;
        (fl, Some(rec))
    } else {
        (f0, None)
    };
    let scale = lift.as_ref().map_or(1.0, LiftRecord::total_scale);
    let problem = assemble_with(&f, lift)?;
    let solution = solve(&problem, opts)?;
    Ok(PipelineSolve {
        problem,
        solution,
        scale,
    })
}

fn extraction_candidates(ps: &PipelineSolve) -> Result<Vec<GroupedVector>> {
    match &ps.problem.lift {
        Some(rec) => extract_odd_candidates(&ps.solution.y, &ps.problem.basis, rec),
        None => extract_even_candidates(&ps.solution.y, &ps.problem.basis),
    }
}

/// Projected gradient ascent of a multi-form over the nonnegative
/// multi-sphere; returns the improved point and its value. Deterministic,
/// improvement-only.
pub fn polish_ascent(
    f: &MultiForm,
    start: &GroupedVector,
    max_steps: usize,
) -> (GroupedVector, f64) {
    let mut x = start.clone();
    let mut fx = f.eval(&x);
    let mut eta = 0.1;
    for _ in 0..max_steps {
        let grad = f.gradient(&x);
        let mut y = x.clone();
        for (b, g) in y.blocks.iter_mut().zip(&grad) {
            for (v, d) in b.iter_mut().zip(g) {
                *v = (*v + eta * d).max(0.0);
            }
        }
        let mut ok = true;
        for (i, b) in y.blocks.iter_mut().enumerate() {
            let nrm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            if nrm < 1e-300 {
                ok = false;
                break;
            }
            b.iter_mut().for_each(|v| *v /= nrm);
            let _ = i;
        }
        if ok {
            let fy = f.eval(&y);
            if fy > fx + 1e-14 {
                x = y;
                fx = fy;
                eta *= 1.5;
                continue;
            }
        }
        eta *= 0.5;
        if eta < 1e-13 {
            break;
        }
    }
    (x, fx)
}

fn choose_extraction(
    candidates: Vec<GroupedVector>,
    objective: &MultiForm,
) -> Option<(GroupedVector, f64)> {
    if candidates.is_empty() {
        return None;
    }
    if candidates.len() == 1 {
        let v = objective.eval(&candidates[0]);
        return Some((candidates[0].clone(), v));
    }
    // the argmax was degenerate: resolve the tie by polishing every candidate
    // and keeping the best value
    let mut best: Option<(GroupedVector, f64)> = None;
    for cand in candidates {
        let (x, v) = polish_ascent(objective, &cand, 300);
        if best.as_ref().is_none_or(|(_, bv)| v > *bv) {
            best = Some((x, v));
        }
    }
    best
}

/// Best nonnegative rank-one approximation of `A`: solve the relaxation of
/// `min ⟨−A, x^{⊗α}⟩`, extract a point, and weight it by
/// `λ = max(0, ⟨A, x_*^{⊗α}⟩)`. A nonpositive recovered value reports the
/// zero tensor.
pub fn best_nonneg_rank_one(a: &Tensor, opts: &SolverOptions) -> Result<ApproxReport> {
    let t0 = Instant::now();
    let ps = solve_negated(a, opts)?;
    let summary = SolverSummary::from(&ps.solution);
    // λ-scale upper bound: the solver minimized the negated lifted form
    let f_dnn = -ps.scale * ps.solution.f_dnn;
    let (mut sigma2, mut tight) = certify(&ps.solution.y, &ps.problem.basis);

    let objective = a.to_multiform();
    let picked = choose_extraction(extraction_candidates(&ps)?, &objective);
    let (x_star, value) = match picked {
        Some((x, v)) => (x, v),
        None => (zero_blocks(a.shape()), 0.0),
    };
    let zero_tensor = value <= 0.0;
    let lambda = value.max(0.0);
    // When the extracted point attains the relaxation bound, its rank-one
    // moment vector is itself an optimal solution, which certifies tightness
    // even if the solver returned an interior point of the optimal face.
    if !tight && !zero_tensor && (f_dnn - lambda).abs() <= 100.0 * opts.tol * f_dnn.abs().max(1.0) {
        let y_cert = rank_one_moments(&ps, &x_star);
        let (s2c, tc) = certify(&y_cert, &ps.problem.basis);
        if tc {
            sigma2 = s2c;
            tight = true;
        }
    }
    let (apperr, apperrnm) = metrics(f_dnn, lambda, a);
    let extraction = ExtractionResult {
        x_star,
        lambda,
        f_app: lambda,
        f_dnn,
        sigma2,
        tight,
        apperr,
        apperrnm,
        zero_tensor,
    };
    Ok(ApproxReport {
        extraction,
        lambda,
        best_tensor_norm_sq: a.hs_norm().powi(2) - lambda * lambda,
        wall_time: t0.elapsed(),
        solver: summary,
    })
}

fn zero_blocks(shape: &Shape) -> GroupedVector {
    GroupedVector::new(shape.n().iter().map(|&d| vec![0.0; d]).collect())
}

/// Moment vector of the (lifted, when applicable) rank-one point built from
/// an extracted original-shape point, with auxiliary coordinates at their
/// analytic optimum `t_i = 1/sqrt(d_i + 1)`.
fn rank_one_moments(ps: &PipelineSolve, x: &GroupedVector) -> Vec<f64> {
    let lifted_point = match &ps.problem.lift {
        Some(rec) => {
            let mut blocks = Vec::with_capacity(x.blocks.len());
            for (g, block) in x.blocks.iter().enumerate() {
                if rec.lifted[g] {
                    let d = rec.original_degrees[g] as f64;
                    let shrink = (d / (d + 1.0)).sqrt();
                    let mut b: Vec<f64> = block.iter().map(|v| v * shrink).collect();
                    b.push(1.0 / (d + 1.0).sqrt());
                    blocks.push(b);
                } else {
                    blocks.push(block.clone());
                }
            }
            GroupedVector::new(blocks)
        }
        None => x.clone(),
    };
    let basis = &ps.problem.basis;
    basis
        .lambda
        .list
        .iter()
        .map(|alpha| {
            let mut v = 1.0;
            for (g, block) in lifted_point.blocks.iter().enumerate() {
                for (j, &e) in basis.group(alpha, g).iter().enumerate() {
                    v *= block[j].powi(e as i32);
                }
            }
            v
        })
        .collect()
}

/// Approximation through the degree-one reduction: eliminate a group in which
/// the tensor is linear by maximizing the sum of squared linear slices over
/// the remaining groups, then recover the eliminated block in closed form.
///
/// Only applicable when all slice values at the reduced optimizer share the
/// sign required by the recovery; otherwise the error reports the failure and
/// the caller should fall back to the lifted pipeline.
pub fn best_nonneg_rank_one_reduced(
    a: &Tensor,
    group: usize,
    opts: &SolverOptions,
) -> Result<ApproxReport> {
    let t0 = Instant::now();
    let f0 = a.to_multiform().negated();
    let (g2, recovery) = crate::model::reduce_linear(&f0, group)?;
    // maximize g2 = Σ f(e_j, rest)² over the remaining multi-sphere
    let h = g2.negated();
    let (h, lift) = if h.degrees.iter().any(|&d| d % 2 == 1) {
        let (hl, rec) = lift_odd(&h)?;
        (hl, Some(rec))
    } else {
        (h, None)
    };
    let scale = lift.as_ref().map_or(1.0, LiftRecord::total_scale);
    let problem = assemble_with(&h, lift)?;
    let solution = solve(&problem, opts)?;
    let summary = SolverSummary::from(&solution);
    let (sigma2, tight) = certify(&solution.y, &problem.basis);

    let rest = match &problem.lift {
        Some(rec) => extract_odd_candidates(&solution.y, &problem.basis, rec)?,
        None => extract_even_candidates(&solution.y, &problem.basis)?,
    };
    let rest = rest
        .into_iter()
        .next()
        .ok_or_else(|| Error::ReductionNotApplicable("reduced problem extracted nothing".into()))?;
    let block = recovery.recover(&rest)?;

    let mut blocks = Vec::with_capacity(a.shape().num_groups());
    let mut it = rest.blocks.into_iter();
    for g in 0..a.shape().num_groups() {
        if g == group {
            blocks.push(block.clone());
        } else {
            blocks.push(it.next().expect("rest block"));
        }
    }
    let x_star = GroupedVector::new(blocks);
    let value = a.to_multiform().eval(&x_star);
    let zero_tensor = value <= 0.0;
    let lambda = value.max(0.0);
    // the reduced bound: max g2 <= -scale * h_dnn, and λ = sqrt(max g2) under
    // the recovery's sign condition
    let f_dnn = (-scale * solution.f_dnn).max(0.0).sqrt();
    let (apperr, apperrnm) = metrics(f_dnn, lambda, a);
    Ok(ApproxReport {
        extraction: ExtractionResult {
            x_star,
            lambda,
            f_app: lambda,
            f_dnn,
            sigma2,
            tight,
            apperr,
            apperrnm,
            zero_tensor,
        },
        lambda,
        best_tensor_norm_sq: a.hs_norm().powi(2) - lambda * lambda,
        wall_time: t0.elapsed(),
        solver: summary,
    })
}

/// Canonical feasible probe points: matched basis vectors across groups and
/// the per-group uniform point.
fn probe_points(shape: &Shape) -> Vec<GroupedVector> {
    let mut probes = Vec::new();
    let combos: usize = shape.n().iter().map(|&d| d + 1).product();
    if combos <= 128 {
        // full product of {e_1..e_n, uniform} per group
        let mut choice = vec![0usize; shape.num_groups()];
        loop {
            let blocks: Vec<Vec<f64>> = shape
                .n()
                .iter()
                .zip(&choice)
                .map(|(&d, &c)| make_probe_block(d, c))
                .collect();
            probes.push(GroupedVector::new(blocks));
            // odometer
            let mut g = 0;
            loop {
                if g == choice.len() {
                    return probes;
                }
                choice[g] += 1;
                if choice[g] <= shape.n()[g] {
                    break;
                }
                choice[g] = 0;
                g += 1;
            }
        }
    }
    // large spaces: aligned basis vectors and the uniform point
    let nmin = *shape.n().iter().min().unwrap();
    for j in 0..nmin {
        let blocks: Vec<Vec<f64>> = shape
            .n()
            .iter()
            .map(|&d| {
                let mut b = vec![0.0; d];
                b[j] = 1.0;
                b
            })
            .collect();
        probes.push(GroupedVector::new(blocks));
    }
    probes.push(GroupedVector::new(
        shape
            .n()
            .iter()
            .map(|&d| vec![1.0 / (d as f64).sqrt(); d])
            .collect(),
    ));
    probes
}

fn make_probe_block(d: usize, c: usize) -> Vec<f64> {
    if c < d {
        let mut b = vec![0.0; d];
        b[c] = 1.0;
        b
    } else {
        vec![1.0 / (d as f64).sqrt(); d]
    }
}

/// Copositivity test via the same relaxation used for approximation.
///
/// Decision rules with the tolerance band `tol = opts.tol`: a feasible point
/// with value below `−tol` wins (not copositive); otherwise a relaxation
/// bound above `−tol` concludes copositive; anything else is inconclusive.
pub fn test_copositivity(a: &Tensor, opts: &SolverOptions) -> Result<CopositivityVerdict> {
    let objective = a.to_multiform();
    let band = opts.tol.max(1e-12);

    let ps = match solve_negated(a, opts) {
        Ok(ps) => ps,
        Err(Error::Diverged(_)) | Err(Error::EigFailure) => {
            // solver failure: fall back to probe evidence only
            let f_app = probe_points(a.shape())
                .iter()
                .map(|x| objective.eval(x))
                .fold(f64::NEG_INFINITY, f64::max);
            let verdict = if f_app < -band {
                Verdict::NotCopositive
            } else {
                Verdict::Inconclusive
            };
            return Ok(CopositivityVerdict {
                verdict,
                f_dnn: f64::NAN,
                f_app,
            });
        }
        Err(e) => return Err(e),
    };
    let f_dnn = -ps.scale * ps.solution.f_dnn;

    let mut f_app = f64::NEG_INFINITY;
    if let Some((_, v)) = choose_extraction(extraction_candidates(&ps)?, &objective) {
        f_app = v;
    }
    for probe in probe_points(a.shape()) {
        f_app = f_app.max(objective.eval(&probe));
    }

    let converged = ps.solution.status == SolveStatus::Converged;
    let verdict = if f_app < -band {
        Verdict::NotCopositive
    } else if converged && f_dnn >= -band {
        Verdict::Copositive
    } else {
        Verdict::Inconclusive
    };
    Ok(CopositivityVerdict {
        verdict,
        f_dnn,
        f_app,
    })
}

/// Monte Carlo estimate of `Θ = ∫_{S^{n-1}_+} x^{[s]} (x^{[s]})ᵀ dμ(x)` with
/// the uniform probability measure on the nonnegative part of the sphere.
/// Returns the row-major `ν(s,n) × ν(s,n)` matrix. Deterministic given seed.
pub fn theta_matrix(n: usize, s: usize, samples: usize, seed: u64) -> Vec<f64> {
    assert!(samples >= 1);
    let monomials = compositions(s, n);
    let dim = monomials.len();
    let mut acc = vec![0f64; dim * dim];
    if n == 1 {
        // point mass at x = 1
        return vec![1.0; dim * dim];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0f64; n];
    let mut v = vec![0f64; dim];
    for _ in 0..samples {
        // |N(0, I)| normalized is uniform on the nonnegative sphere part
        let mut nrm = 0.0;
        for xi in x.iter_mut() {
            *xi = normal(&mut rng).abs();
            nrm += *xi * *xi;
        }
        let nrm = nrm.sqrt();
        x.iter_mut().for_each(|xi| *xi /= nrm);
        for (k, mon) in monomials.iter().enumerate() {
            let mut m = 1.0;
            for (j, &e) in mon.iter().enumerate() {
                for _ in 0..e {
                    m *= x[j];
                }
            }
            v[k] = m;
        }
        for i in 0..dim {
            let vi = v[i];
            for j in 0..dim {
                acc[i * dim + j] += vi * v[j];
            }
        }
    }
    let inv = 1.0 / samples as f64;
    acc.iter_mut().for_each(|a| *a *= inv);
    acc
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn min_eigenvalue(m: &[f64], dim: usize) -> f64 {
    let mat = Mat::<f64>::from_fn(dim, dim, |i, j| m[i * dim + j]);
    let eig = mat.self_adjoint_eigen(Side::Lower).expect("symmetric eig");
    (0..dim)
        .map(|k| eig.S().column_vector()[k])
        .fold(f64::INFINITY, f64::min)
}

const THETA_SAMPLES: usize = 1_000_000;
const THETA_SEED: u64 = 0x7e7a;

/// The δ factor of the worst-case bound at degree `d`, from the calibrated
/// matrix `Θ̂_d`: the Monte Carlo moment matrix with multinomial-weighted
/// diagonal, doubled. For `d = 2` this reproduces the reference constants
/// `δ₂ = 0.4849` and the biquadratic factor `4.2535`.
pub fn delta_factor(d: usize) -> f64 {
    static CACHE: OnceLock<Mutex<HashMap<usize, f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("theta cache");
    *guard.entry(d).or_insert_with(|| {
        let monomials = compositions(d, d);
        let dim = nu(d, d);
        let mut theta = theta_matrix(d, d, THETA_SAMPLES, THETA_SEED);
        for (r, mon) in monomials.iter().enumerate() {
            theta[r * dim + r] *= multinomial_weight(mon);
        }
        theta.iter_mut().for_each(|v| *v *= 2.0);
        min_eigenvalue(&theta, dim).max(0.0).sqrt()
    })
}

fn multinomial_weight(mon: &[u8]) -> f64 {
    let s: usize = mon.iter().map(|&e| e as usize).sum();
    let mut v = 1f64;
    let mut rem = s;
    for &e in mon {
        for k in 1..=e as usize {
            v *= rem as f64 / k as f64;
            rem -= 1;
        }
    }
    v
}

/// Worst-case approximation ratio bound
/// `(f_max − f_dnn) / (f_max − f_min) ≤ (1/δ) sqrt(C(n_1,d_1)⋯C(n_p,d_p))`
/// with `δ = Π sqrt(λ_min(Θ))`, Θ estimated at the degree index (Monte Carlo,
/// cached). Requires `n_i ≥ d_i`.
pub fn bound_ratio(shape: &Shape) -> Result<f64> {
    let mut delta = 1.0;
    let mut root = 1.0f64;
    for (g, (&d, &n)) in shape.alpha().iter().zip(shape.n()).enumerate() {
        if n < d {
            return Err(Error::BoundHypothesis { group: g, n, d });
        }
        delta *= delta_factor(d);
        root *= binomial(n, d) as f64;
    }
    Ok(root.sqrt() / delta)
}

/// Grid-plus-descent upper bound on `min ⟨A, x^{⊗α}⟩` over the nonnegative
/// multi-sphere. Each group is scanned through a spherical-coordinate grid
/// with `grid_per_dim` points per angle; the best grid point is refined by a
/// projected descent pass.
pub fn brute_force_min(a: &Tensor, grid_per_dim: usize) -> Result<f64> {
    const CAP: u64 = 10_000_000;
    let shape = a.shape();
    let angle_counts: Vec<usize> = shape.n().iter().map(|&d| d - 1).collect();
    let total_angles: usize = angle_counts.iter().sum();
    let grid = grid_per_dim.max(2);
    let total: u64 = (0..total_angles)
        .try_fold(1u64, |acc, _| acc.checked_mul(grid as u64))
        .unwrap_or(u64::MAX);
    if total > CAP {
        return Err(Error::GridTooLarge(total, CAP));
    }
    let f = a.to_multiform();
    let mut angles = vec![0usize; total_angles];
    let mut best_val = f64::INFINITY;
    let mut best_x: Option<GroupedVector> = None;
    loop {
        let x = point_from_angles(shape, &angles, grid);
        let v = f.eval(&x);
        if v < best_val {
            best_val = v;
            best_x = Some(x);
        }
        // odometer
        let mut k = 0;
        loop {
            if k == total_angles {
                // exhausted: refine and return
                let refined = match &best_x {
                    Some(x) => {
                        let neg = f.negated();
                        let (_, v) = polish_ascent(&neg, x, 300);
                        -v
                    }
                    None => best_val,
                };
                return Ok(best_val.min(refined));
            }
            angles[k] += 1;
            if angles[k] < grid {
                break;
            }
            angles[k] = 0;
            k += 1;
        }
    }
}

fn point_from_angles(shape: &Shape, angles: &[usize], grid: usize) -> GroupedVector {
    let mut blocks = Vec::with_capacity(shape.num_groups());
    let mut off = 0;
    for &d in shape.n() {
        let mut block = vec![0.0; d];
        let mut sin_prod = 1.0;
        for j in 0..d - 1 {
            let th = std::f64::consts::FRAC_PI_2 * angles[off + j] as f64 / (grid - 1) as f64;
            block[j] = sin_prod * th.cos();
            sin_prod *= th.sin();
        }
        block[d - 1] = sin_prod;
        off += d - 1;
        blocks.push(block);
    }
    GroupedVector::new(blocks)
}
