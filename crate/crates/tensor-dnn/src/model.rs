//! Assembly of the conic program: objective and normalization matrices,
//! odd-degree lifting and the degree-one reduction.

use crate::basis::{build_basis, IndexSet, MomentBasis};
use crate::error::{Error, Result};
use crate::tensor::{GroupedVector, MultiForm};

/// Metadata of an odd-degree lift: which groups gained an auxiliary variable
/// and how optimal values scale back.
#[derive(Debug, Clone)]
pub struct LiftRecord {
    /// Per-group flag; lifted groups carry the auxiliary variable as their
    /// last coordinate.
    pub lifted: Vec<bool>,
    /// Per-group factor `sqrt((d+1)^{d+1} / d^d)`; 1 for untouched groups.
    pub scale_factors: Vec<f64>,
    /// Original group dimensions (before appending auxiliaries).
    pub original_dims: Vec<usize>,
    /// Original per-group degrees.
    pub original_degrees: Vec<usize>,
}

impl LiftRecord {
    /// Product of the per-group scale factors: `f_min = total_scale · f̃_min`.
    pub fn total_scale(&self) -> f64 {
        self.scale_factors.iter().product()
    }
}

/// The assembled conic program
/// `min ⟨C, X⟩  s.t.  X constant on classes, ⟨Ḡ, X⟩ = 1, X ⪰ 0, X ≥ 0`.
#[derive(Debug)]
pub struct DnnProblem {
    pub basis: MomentBasis,
    /// Objective matrix `Σ_α (f_α / w_α) A_α`, row-major `dim²`.
    pub c: Vec<f64>,
    /// Normalization matrix `Σ_α (g_α / w_α) A_α`, row-major `dim²`.
    pub gbar: Vec<f64>,
    /// Coefficient vector of the objective form over `Λ(2τ)`.
    pub f: Vec<f64>,
    /// Coefficient vector of the normalization form `Π ‖x^(i)‖^{2τ_i}`.
    pub g: Vec<f64>,
    /// Present when the form was lifted from odd degrees.
    pub lift: Option<LiftRecord>,
}

impl DnnProblem {
    pub fn dim(&self) -> usize {
        self.basis.dim
    }
}

/// `(d+1)^{d+1} / d^d` square-rooted: the odd-lift value scale for degree `d`.
pub fn lift_scale(d: usize) -> f64 {
    let d = d as f64;
    ((d + 1.0).powf(d + 1.0) / d.powf(d)).sqrt()
}

/// Coefficients of `g(x) = Π_i ((x^(i))ᵀ x^(i))^{τ_i}` over `Λ(2τ)`:
/// the coefficient of `x^{2β}` is `Π_i multinomial(τ_i; β^(i))`, zero on
/// indices with any odd exponent.
pub fn g_coefficients(dims: &[usize], tau: &[usize]) -> MultiForm {
    let degrees: Vec<usize> = tau.iter().map(|&t| 2 * t).collect();
    let mut g = MultiForm::zero(dims, &degrees);
    'outer: for (i, alpha) in g.index.list.iter().enumerate() {
        let mut coef = 1f64;
        for gi in 0..dims.len() {
            let a = g.index.group(alpha, gi);
            if a.iter().any(|&e| e % 2 != 0) {
                continue 'outer;
            }
            coef *= multinomial(a.iter().map(|&e| (e / 2) as usize));
        }
        g.coeffs[i] = coef;
    }
    g
}

fn multinomial(parts: impl Iterator<Item = usize>) -> f64 {
    let parts: Vec<usize> = parts.collect();
    let s: usize = parts.iter().sum();
    let mut v = 1f64;
    let mut rem = s;
    for b in parts {
        for k in 1..=b {
            v *= rem as f64 / k as f64;
            rem -= 1;
        }
    }
    v
}

/// Assemble the conic program for an even-degree multi-form (minimization).
pub fn assemble(f: &MultiForm) -> Result<DnnProblem> {
    assemble_with(f, None)
}

/// As [`assemble`], attaching the lift record of a previously lifted form.
pub fn assemble_with(f: &MultiForm, lift: Option<LiftRecord>) -> Result<DnnProblem> {
    for (g, &d) in f.degrees.iter().enumerate() {
        if d % 2 != 0 {
            return Err(Error::OddDegree(g));
        }
    }
    let tau: Vec<usize> = f.degrees.iter().map(|&d| d / 2).collect();
    let basis = build_basis(&f.dims, &tau)?;
    debug_assert_eq!(basis.lambda.len(), f.coeffs.len());
    let g = g_coefficients(&f.dims, &tau);
    let c = basis.class_matrix(&f.coeffs);
    let gbar = basis.class_matrix(&g.coeffs);
    Ok(DnnProblem {
        basis,
        c,
        gbar,
        f: f.coeffs.clone(),
        g: g.coeffs,
        lift,
    })
}

/// Append an auxiliary variable to every odd-degree group: the form becomes
/// `f · Π t_i`, even of degree `d_i + 1` in dimension `n_i + 1` for each
/// lifted group. Optimal values scale back by `Π sqrt((d_i+1)^{d_i+1}/d_i^{d_i})`.
pub fn lift_odd(f: &MultiForm) -> Result<(MultiForm, LiftRecord)> {
    let lifted: Vec<bool> = f.degrees.iter().map(|&d| d % 2 == 1).collect();
    if !lifted.iter().any(|&b| b) {
        return Err(Error::NoOddGroup);
    }
    let new_dims: Vec<usize> = f
        .dims
        .iter()
        .zip(&lifted)
        .map(|(&n, &l)| if l { n + 1 } else { n })
        .collect();
    let new_degrees: Vec<usize> = f
        .degrees
        .iter()
        .zip(&lifted)
        .map(|(&d, &l)| if l { d + 1 } else { d })
        .collect();
    let scale_factors: Vec<f64> = f
        .degrees
        .iter()
        .zip(&lifted)
        .map(|(&d, &l)| if l { lift_scale(d) } else { 1.0 })
        .collect();

    let mut out = MultiForm::zero(&new_dims, &new_degrees);
    let mut buf: Vec<u8> = Vec::with_capacity(new_dims.iter().sum());
    for (alpha, &c) in f.index.list.iter().zip(&f.coeffs) {
        if c == 0.0 {
            continue;
        }
        buf.clear();
        for (g, &lift_here) in lifted.iter().enumerate() {
            buf.extend_from_slice(f.index.group(alpha, g));
            if lift_here {
                buf.push(1);
            }
        }
        let pos = out.index.position(&buf).expect("lifted index in range");
        out.coeffs[pos] = c;
    }
    let record = LiftRecord {
        lifted,
        scale_factors,
        original_dims: f.dims.clone(),
        original_degrees: f.degrees.clone(),
    };
    Ok((out, record))
}

/// Recovery data of the degree-one reduction: maps an optimizer of the
/// reduced problem back to a block for the eliminated group.
pub struct LinearRecovery {
    /// The linear-slice forms `f(e_j, ·)` over the remaining groups.
    pub slices: Vec<MultiForm>,
}

impl LinearRecovery {
    /// Recover the eliminated block `x^(group) = −u_− / ‖u_−‖` from an
    /// optimizer of the reduced problem, where `u_j = f(e_j, rest)`.
    ///
    /// Fails when some `u_j > 0` (the reduction's applicability condition)
    /// or when `u_− = 0`.
    pub fn recover(&self, rest: &GroupedVector) -> Result<Vec<f64>> {
        let u: Vec<f64> = self.slices.iter().map(|s| s.eval(rest)).collect();
        if u.iter().any(|&v| v > 1e-10) {
            return Err(Error::ReductionNotApplicable(
                "a slice value is positive at the reduced optimizer".into(),
            ));
        }
        let uneg: Vec<f64> = u.iter().map(|&v| v.min(0.0)).collect();
        let nrm = uneg.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nrm == 0.0 {
            return Err(Error::ReductionNotApplicable("u_- vanishes".into()));
        }
        Ok(uneg.iter().map(|&v| -v / nrm).collect())
    }
}

/// Degree-one reduction: eliminate a group in which `f` is linear by passing
/// to `g(rest) = Σ_j f(e_j, rest)²`, a form with doubled degrees in the
/// remaining groups.
pub fn reduce_linear(f: &MultiForm, group: usize) -> Result<(MultiForm, LinearRecovery)> {
    if group >= f.num_groups() {
        return Err(Error::DegreeMismatch {
            group,
            degree: 0,
            expected: 1,
        });
    }
    if f.degrees[group] != 1 {
        return Err(Error::DegreeMismatch {
            group,
            degree: f.degrees[group],
            expected: 1,
        });
    }
    let rest_dims: Vec<usize> = f
        .dims
        .iter()
        .enumerate()
        .filter(|&(g, _)| g != group)
        .map(|(_, &n)| n)
        .collect();
    if rest_dims.is_empty() {
        return Err(Error::ReductionNotApplicable("no remaining groups".into()));
    }
    let rest_degrees: Vec<usize> = f
        .degrees
        .iter()
        .enumerate()
        .filter(|&(g, _)| g != group)
        .map(|(_, &d)| d)
        .collect();

    // slice forms f(e_j, rest)
    let n1 = f.dims[group];
    let mut slices = Vec::with_capacity(n1);
    for j in 0..n1 {
        let mut s = MultiForm::zero(&rest_dims, &rest_degrees);
        for (alpha, &c) in f.index.list.iter().zip(&f.coeffs) {
            if c == 0.0 {
                continue;
            }
            let ga = f.index.group(alpha, group);
            if ga[j] != 1 {
                continue;
            }
            let mut rest_idx: Vec<u8> = Vec::with_capacity(rest_dims.iter().sum());
            for g2 in 0..f.num_groups() {
                if g2 != group {
                    rest_idx.extend_from_slice(f.index.group(alpha, g2));
                }
            }
            let pos = s.index.position(&rest_idx).expect("slice index in range");
            s.coeffs[pos] += c;
        }
        slices.push(s);
    }

    // g2 = Σ_j slice_j²
    let doubled: Vec<usize> = rest_degrees.iter().map(|&d| 2 * d).collect();
    let mut g2 = MultiForm::zero(&rest_dims, &doubled);
    for s in &slices {
        let sq = s.multiply(s);
        for (c, &v) in g2.coeffs.iter_mut().zip(&sq.coeffs) {
            *c += v;
        }
    }
    Ok((g2, LinearRecovery { slices }))
}

/// Index set of the lifted problem's moment space, for consistency checks.
pub fn lifted_index_set(record: &LiftRecord) -> IndexSet {
    let dims: Vec<usize> = record
        .original_dims
        .iter()
        .zip(&record.lifted)
        .map(|(&n, &l)| if l { n + 1 } else { n })
        .collect();
    let degrees: Vec<usize> = record
        .original_degrees
        .iter()
        .zip(&record.lifted)
        .map(|(&d, &l)| if l { d + 1 } else { d })
        .collect();
    IndexSet::new(&dims, &degrees)
}
