//! First-order consensus splitting solver for the assembled conic program.
//!
//! Three copies of the matrix variable are kept in consensus: one projected
//! onto the affine set (classes + normalization, closed form), one onto the
//! positive semidefinite cone (eigendecomposition with negative eigenvalues
//! clipped) and one onto the nonnegative orthant. Scaled multipliers tie the
//! copies together; the penalty is rebalanced from the primal/dual residual
//! ratio.

use std::io::Write;
use std::path::PathBuf;

use faer::{Mat, Side};

use crate::basis::class_average;
use crate::error::{Error, Result};
use crate::model::DnnProblem;

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Stopping tolerance on the largest relative residual.
    pub tol: f64,
    pub max_iters: usize,
    /// Initial penalty parameter.
    pub penalty: f64,
    /// Residual-balancing penalty adaptation.
    pub penalty_adapt: bool,
    /// Residuals are evaluated every this many iterations.
    pub check_every: usize,
    /// Optional CSV iteration log (iteration, objective, residuals).
    pub iter_log: Option<PathBuf>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-6,
            max_iters: 20_000,
            penalty: 1.0,
            penalty_adapt: true,
            check_every: 20,
            iter_log: None,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolverOptions {
            tol,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIters,
    NumericalFailure,
}

/// Relative KKT residuals of the consensus iterate.
#[derive(Debug, Clone, Copy, Default)]
pub struct Residuals {
    /// `‖X − Z_psd‖ / (1 + ‖X‖)`
    pub primal_psd: f64,
    /// `‖X − Z_nn‖ / (1 + ‖X‖)`
    pub primal_nn: f64,
    /// Affine violation of the consensus average.
    pub affine: f64,
    /// Relative objective change between consecutive checks.
    pub rel_gap: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.primal_psd
            .max(self.primal_nn)
            .max(self.affine)
            .max(self.rel_gap)
    }
}

#[derive(Debug)]
pub struct DnnSolution {
    /// Final class-averaged, affine-feasible matrix iterate, row-major.
    pub x: Vec<f64>,
    /// Class averages of `x`: the moment vector over `Λ(2τ)`.
    pub y: Vec<f64>,
    /// `⟨C, X⟩` at the reported iterate.
    pub f_dnn: f64,
    pub residuals: Residuals,
    pub iters: usize,
    pub status: SolveStatus,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Exact projection onto `{X ∈ span{A_α} : ⟨Ḡ, X⟩ = 1}`: class-average, then
/// shift along `Ḡ`. Idempotent because `Ḡ` itself lies in the class span.
pub fn project_affine(x: &[f64], problem: &DnnProblem) -> Result<Vec<f64>> {
    let gg = dot(&problem.gbar, &problem.gbar);
    if gg == 0.0 {
        return Err(Error::ZeroNormalization);
    }
    let (_, mut xa) = class_average(x, &problem.basis)?;
    let shift = (1.0 - dot(&problem.gbar, &xa)) / gg;
    for (v, g) in xa.iter_mut().zip(&problem.gbar) {
        *v += shift * g;
    }
    Ok(xa)
}

/// Projection onto the positive semidefinite cone: symmetric
/// eigendecomposition with negative eigenvalues clipped. Reconstructs from
/// whichever side of the spectrum is smaller.
fn psd_project(w: &[f64], dim: usize, out: &mut [f64]) -> Result<()> {
    let m = Mat::<f64>::from_fn(dim, dim, |i, j| w[i * dim + j]);
    let eig = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::EigFailure)?;
    let s = eig.S().column_vector();
    let u = eig.U();
    let pos: Vec<usize> = (0..dim).filter(|&k| s[k] > 0.0).collect();
    let neg: Vec<usize> = (0..dim).filter(|&k| s[k] < 0.0).collect();
    let from_positive = pos.len() <= neg.len();
    let side = if from_positive { &pos } else { &neg };
    let mut b = Mat::<f64>::zeros(dim, side.len());
    for (c, &k) in side.iter().enumerate() {
        let sc = s[k].abs().sqrt();
        for i in 0..dim {
            b[(i, c)] = u[(i, k)] * sc;
        }
    }
    let bb = &b * b.transpose();
    if from_positive {
        for i in 0..dim {
            for j in 0..dim {
                out[i * dim + j] = bb[(i, j)];
            }
        }
    } else {
        // clip negatives: P_+(W) = W + Σ_{λ<0} |λ| u uᵀ
        for i in 0..dim {
            for j in 0..dim {
                out[i * dim + j] = w[i * dim + j] + bb[(i, j)];
            }
        }
    }
    Ok(())
}

/// Relative residual record for an explicit iterate and its cone copies.
pub fn kkt_residuals(
    problem: &DnnProblem,
    x: &[f64],
    z_psd: &[f64],
    z_nn: &[f64],
    rel_gap: f64,
) -> Result<Residuals> {
    let xn = 1.0 + norm(x);
    let n2 = x.len();
    let zbar: Vec<f64> = (0..n2).map(|i| 0.5 * (z_psd[i] + z_nn[i])).collect();
    let zproj = project_affine(&zbar, problem)?;
    Ok(Residuals {
        primal_psd: diff_norm(x, z_psd) / xn,
        primal_nn: diff_norm(x, z_nn) / xn,
        affine: diff_norm(&zbar, &zproj) / (1.0 + norm(&zbar)),
        rel_gap,
    })
}

/// Solve the assembled program with consensus splitting.
pub fn solve(problem: &DnnProblem, opts: &SolverOptions) -> Result<DnnSolution> {
    let dim = problem.dim();
    let n2 = dim * dim;
    let c = &problem.c;
    let gg = dot(&problem.gbar, &problem.gbar);
    if gg == 0.0 {
        return Err(Error::ZeroNormalization);
    }

    let mut log = match &opts.iter_log {
        Some(path) => {
            let mut f = std::fs::File::create(path)?;
            writeln!(
                f,
                "iter,objective,primal_psd,primal_nn,affine,rel_gap,penalty"
            )?;
            Some(f)
        }
        None => None,
    };

    let mut rho = opts.penalty;
    let x0: Vec<f64> = problem.gbar.iter().map(|v| v / gg).collect();
    let mut x = vec![0f64; n2];
    let mut z_psd = x0.clone();
    let mut z_nn = x0;
    let mut u_psd = vec![0f64; n2];
    let mut u_nn = vec![0f64; n2];
    let mut w = vec![0f64; n2];
    let mut z_new = vec![0f64; n2];

    let mut f_prev = f64::INFINITY;
    let mut residuals = Residuals {
        primal_psd: f64::INFINITY,
        primal_nn: f64::INFINITY,
        affine: f64::INFINITY,
        rel_gap: f64::INFINITY,
    };
    let mut status = SolveStatus::MaxIters;
    let mut iters = 0;

    // best-by-residual snapshot of the cone copies
    let mut best_res = f64::INFINITY;
    let mut best_z: Option<(Vec<f64>, Vec<f64>)> = None;

    for k in 0..opts.max_iters {
        iters = k + 1;

        // affine block: argmin <C,X> + rho(‖X−Z_psd+U_psd‖² + ‖X−Z_nn+U_nn‖²)/2
        for i in 0..n2 {
            w[i] = 0.5 * (z_psd[i] - u_psd[i] + z_nn[i] - u_nn[i]) - c[i] / (2.0 * rho);
        }
        x = project_affine(&w, problem)?;

        // cone blocks
        let mut dual_sq = 0f64;
        for i in 0..n2 {
            w[i] = x[i] + u_psd[i];
        }
        psd_project(&w, dim, &mut z_new)?;
        for i in 0..n2 {
            let d = z_new[i] - z_psd[i];
            dual_sq += d * d;
            z_psd[i] = z_new[i];
        }
        for i in 0..n2 {
            let zi = (x[i] + u_nn[i]).max(0.0);
            let d = zi - z_nn[i];
            dual_sq += d * d;
            z_nn[i] = zi;
        }

        // scaled multipliers
        for i in 0..n2 {
            u_psd[i] += x[i] - z_psd[i];
            u_nn[i] += x[i] - z_nn[i];
        }

        if (k + 1) % opts.check_every == 0 || k + 1 == opts.max_iters {
            let f_cur = dot(c, &x);
            let rel_gap = if f_prev.is_finite() {
                (f_cur - f_prev).abs() / (1.0 + f_cur.abs())
            } else {
                f64::INFINITY
            };
            f_prev = f_cur;
            residuals = kkt_residuals(problem, &x, &z_psd, &z_nn, rel_gap)?;
            let xn = 1.0 + norm(&x);
            let dual_rel = rho * dual_sq.sqrt() / xn;
            let max_res = residuals.max().max(dual_rel);

            if let Some(f) = log.as_mut() {
                writeln!(
                    f,
                    "{},{:.12e},{:.3e},{:.3e},{:.3e},{:.3e},{:.3e}",
                    iters,
                    f_cur,
                    residuals.primal_psd,
                    residuals.primal_nn,
                    residuals.affine,
                    residuals.rel_gap,
                    rho
                )?;
            }

            if max_res < best_res {
                best_res = max_res;
                best_z = Some((z_psd.clone(), z_nn.clone()));
            }
            if max_res <= opts.tol {
                status = SolveStatus::Converged;
                break;
            }
            // divergence is judged from the feasibility residuals only;
            // rel_gap is infinite on the very first check by construction
            let feas = residuals
                .primal_psd
                .max(residuals.primal_nn)
                .max(residuals.affine)
                .max(dual_rel);
            if !feas.is_finite() || feas > 1e6 {
                status = SolveStatus::NumericalFailure;
                break;
            }

            if opts.penalty_adapt {
                let primal = residuals.primal_psd.max(residuals.primal_nn);
                if primal > 10.0 * dual_rel && rho < 1e4 {
                    rho *= 2.0;
                    u_psd.iter_mut().for_each(|v| *v *= 0.5);
                    u_nn.iter_mut().for_each(|v| *v *= 0.5);
                } else if dual_rel > 10.0 * primal && rho > 1e-4 {
                    rho *= 0.5;
                    u_psd.iter_mut().for_each(|v| *v *= 2.0);
                    u_nn.iter_mut().for_each(|v| *v *= 2.0);
                }
            }
        }
    }

    if status == SolveStatus::NumericalFailure {
        return Err(Error::Diverged(residuals.max()));
    }

    // report from the class-averaged, affine-projected consensus average of
    // the best iterate, so the value corresponds to an affine-feasible point
    let (zp, zn) = best_z.unwrap_or((z_psd, z_nn));
    let zbar: Vec<f64> = (0..n2).map(|i| 0.5 * (zp[i] + zn[i])).collect();
    let x_final = project_affine(&zbar, problem)?;
    let (y, _) = class_average(&x_final, &problem.basis)?;
    let f_dnn = dot(c, &x_final);
    Ok(DnnSolution {
        x: x_final,
        y,
        f_dnn,
        residuals,
        iters,
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{assemble, g_coefficients};
    use crate::tensor::MultiForm;
    use approx::assert_relative_eq;

    fn solve_form(f: &MultiForm, tol: f64) -> DnnSolution {
        let p = assemble(f).unwrap();
        solve(
            &p,
            &SolverOptions {
                tol,
                max_iters: 100_000,
                ..Default::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn objective_equals_constraint_when_f_is_g() {
        let f = g_coefficients(&[2], &[1]);
        let sol = solve_form(&f, 1e-8);
        assert_eq!(sol.status, SolveStatus::Converged);
        assert_relative_eq!(sol.f_dnn, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn min_diagonal_entry_under_trace() {
        // f = x1² over p=1, d=2, n=2: min X_11 s.t. trace X = 1, X ⪰ 0, X ≥ 0 -> 0
        let mut f = MultiForm::zero(&[2], &[2]);
        let pos = f.index.position(&[2, 0]).unwrap();
        f.coeffs[pos] = 1.0;
        let sol = solve_form(&f, 1e-8);
        assert_eq!(sol.status, SolveStatus::Converged);
        assert!(sol.f_dnn.abs() <= 1e-6, "f_dnn = {}", sol.f_dnn);
        // optimum X = E_22
        let p = assemble(&f).unwrap();
        let dim = p.basis.dim;
        assert_relative_eq!(sol.x[dim * dim - 1], 1.0, epsilon = 1e-4);
    }

    #[test]
    fn affine_projection_identity_and_zero() {
        let f = g_coefficients(&[2], &[1]);
        let p = assemble(&f).unwrap();
        let n2 = p.basis.dim * p.basis.dim;
        // X = 0 -> Gbar / <Gbar, Gbar>
        let zero = vec![0.0; n2];
        let proj = project_affine(&zero, &p).unwrap();
        let gg: f64 = p.gbar.iter().map(|v| v * v).sum();
        for (a, b) in proj.iter().zip(&p.gbar) {
            assert_relative_eq!(*a, b / gg, epsilon = 1e-14);
        }
        // already feasible -> unchanged
        let proj2 = project_affine(&proj, &p).unwrap();
        for (a, b) in proj.iter().zip(&proj2) {
            assert_relative_eq!(*a, *b, epsilon = 1e-14);
        }
    }

    #[test]
    fn affine_projection_matches_least_squares_oracle() {
        // Random X projected onto {class-constant, <Gbar,X> = 1}: compare with
        // a dense least-squares treatment of the same constraints, built from
        // an orthonormal basis of the class span.
        let f = g_coefficients(&[2], &[1]);
        let p = assemble(&f).unwrap();
        let dim = p.basis.dim;
        let n2 = dim * dim;
        let mut x = vec![0.0; n2];
        for (i, v) in x.iter_mut().enumerate() {
            *v = ((i * 13 % 7) as f64 - 3.0) * 0.41;
        }
        // symmetrize input (projection assumes symmetric matrices)
        for r in 0..dim {
            for c in 0..r {
                let avg = 0.5 * (x[r * dim + c] + x[c * dim + r]);
                x[r * dim + c] = avg;
                x[c * dim + r] = avg;
            }
        }
        let got = project_affine(&x, &p).unwrap();

        // oracle: coordinates along orthonormalized class indicators, then
        // enforce the normalization hyperplane within the span
        let nclasses = p.basis.lambda.len();
        let mut coords = vec![0.0; nclasses];
        for (idx, &cls) in p.basis.class_of.iter().enumerate() {
            coords[cls as usize] += x[idx];
        }
        let mut proj: Vec<f64> = vec![0.0; n2];
        for (idx, &cls) in p.basis.class_of.iter().enumerate() {
            proj[idx] = coords[cls as usize] / p.basis.weights[cls as usize];
        }
        let gdotp: f64 = p.gbar.iter().zip(&proj).map(|(a, b)| a * b).sum();
        let gg: f64 = p.gbar.iter().map(|v| v * v).sum();
        let lam = (1.0 - gdotp) / gg;
        for (v, g) in proj.iter_mut().zip(&p.gbar) {
            *v += lam * g;
        }
        for (a, b) in got.iter().zip(&proj) {
            assert_relative_eq!(*a, *b, epsilon = 1e-10);
        }
    }

    #[test]
    fn residuals_zero_at_consensus() {
        let f = g_coefficients(&[2], &[1]);
        let p = assemble(&f).unwrap();
        let n2 = p.basis.dim * p.basis.dim;
        let x = project_affine(&vec![0.0; n2], &p).unwrap();
        let r = kkt_residuals(&p, &x, &x, &x, 0.0).unwrap();
        assert!(r.primal_psd == 0.0 && r.primal_nn == 0.0);
        assert!(r.affine < 1e-14);
    }

    #[test]
    fn residual_scales_linearly_in_perturbation() {
        let f = g_coefficients(&[2], &[1]);
        let p = assemble(&f).unwrap();
        let n2 = p.basis.dim * p.basis.dim;
        let x = project_affine(&vec![0.0; n2], &p).unwrap();
        let r_at = |delta: f64| {
            let mut z = x.clone();
            for v in z.iter_mut() {
                *v += delta;
            }
            kkt_residuals(&p, &x, &z, &x, 0.0).unwrap().primal_psd
        };
        let r1 = r_at(1e-3);
        let r2 = r_at(2e-3);
        assert_relative_eq!(r2 / r1, 2.0, max_relative = 1e-6);
    }

    #[test]
    fn psd_projection_fixes_psd_matrices() {
        let dim = 3;
        // A = Bᵀ B is PSD
        let b = [0.4, -1.0, 0.3, 0.0, 0.7, 1.1, 0.2, 0.2, -0.5];
        let mut a = vec![0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    a[i * 3 + j] += b[k * 3 + i] * b[k * 3 + j];
                }
            }
        }
        let mut out = vec![0.0; 9];
        psd_project(&a, dim, &mut out).unwrap();
        for (x, y) in a.iter().zip(&out) {
            assert_relative_eq!(*x, *y, epsilon = 1e-12);
        }
        // negating makes it negative semidefinite; projection is 0
        let neg: Vec<f64> = a.iter().map(|v| -v).collect();
        psd_project(&neg, dim, &mut out).unwrap();
        for v in &out {
            assert!(v.abs() < 1e-12);
        }
    }
}
