//! Recovery of approximate optimizers from solved moment vectors, tightness
//! certification and error metrics.

use faer::Mat;

use crate::basis::MomentBasis;
use crate::error::{Error, Result};
use crate::model::LiftRecord;
use crate::tensor::{GroupedVector, Tensor};

/// Outcome of a full extraction pass, in the original shape.
#[derive(Debug, Clone)]
pub struct ExtractionResult {
    /// Extracted point with unit-norm nonnegative blocks (meaningless when
    /// `zero_tensor` is set).
    pub x_star: GroupedVector,
    /// Best nonnegative weight `max(0, ⟨A, x_*^{⊗α}⟩)`.
    pub lambda: f64,
    /// Objective value at the extracted point (λ-scale for approximation runs).
    pub f_app: f64,
    /// Relaxation bound on the same scale.
    pub f_dnn: f64,
    /// Second-largest singular value of the solved moment matrix.
    pub sigma2: f64,
    /// `sigma2 < 1e-6`.
    pub tight: bool,
    pub apperr: f64,
    pub apperrnm: f64,
    /// The best approximation is the zero tensor.
    pub zero_tensor: bool,
}

/// Tightness threshold on the second-largest singular value.
pub const TIGHT_SIGMA2: f64 = 1e-6;

/// Relative tolerance under which competing argmax moments count as tied.
const TIE_RTOL: f64 = 1e-6;

/// Cap on how many tied candidates are expanded.
const MAX_CANDIDATES: usize = 16;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// argmax with ties broken toward the smallest index.
fn argmax(values: impl Iterator<Item = f64>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best
}

/// Diagonal moments `y_{2μ}` in row order of the basis monomials.
pub fn diagonal_moments<'a>(
    y: &'a [f64],
    basis: &'a MomentBasis,
) -> impl Iterator<Item = f64> + 'a {
    (0..basis.dim).map(move |r| y[basis.class(r, r)])
}

fn build_block(
    y: &[f64],
    basis: &MomentBasis,
    gamma: &[u8],
    group: usize,
    nvars: usize,
    search_width: usize,
) -> Vec<f64> {
    // z_j = y at gamma with one unit moved from the peak exponent to slot j
    let off = basis.group_offset(group);
    let k = argmax(gamma[off..off + search_width].iter().map(|&e| e as f64))
        .expect("nonempty group")
        .0;
    let mut z = vec![0f64; nvars];
    let mut idx = gamma.to_vec();
    for (j, zj) in z.iter_mut().enumerate() {
        idx.copy_from_slice(gamma);
        idx[off + k] -= 1;
        idx[off + j] += 1;
        *zj = basis
            .lambda
            .position(&idx)
            .map(|p| y[p])
            .expect("shifted index stays in Lambda");
    }
    z
}

fn extract_even_at(y: &[f64], basis: &MomentBasis, row: usize) -> GroupedVector {
    let gamma2: Vec<u8> = basis.monomials[row].iter().map(|&e| 2 * e).collect();
    let mut blocks = Vec::with_capacity(basis.dims.len());
    for (g, &n) in basis.dims.iter().enumerate() {
        let mut z = build_block(y, basis, &gamma2, g, n, n);
        let nrm = norm(&z);
        z.iter_mut().for_each(|v| *v = v.abs() / nrm);
        blocks.push(z);
    }
    GroupedVector::new(blocks)
}

/// Extraction for even-degree problems: locate the largest diagonal moment
/// `y_{2γ}`, read one matrix column worth of moments per group and normalize
/// absolute values.
pub fn extract_even(y: &[f64], basis: &MomentBasis) -> Result<GroupedVector> {
    let (row, best) = argmax(diagonal_moments(y, basis)).expect("nonempty basis");
    if best <= 0.0 {
        return Err(Error::DegenerateMoments);
    }
    Ok(extract_even_at(y, basis, row))
}

/// All extraction candidates whose defining diagonal moment ties the maximum
/// within a relative tolerance. The first entry is the argmax extraction.
pub fn extract_even_candidates(y: &[f64], basis: &MomentBasis) -> Result<Vec<GroupedVector>> {
    let (_, best) = argmax(diagonal_moments(y, basis)).expect("nonempty basis");
    if best <= 0.0 {
        return Err(Error::DegenerateMoments);
    }
    let cut = best * (1.0 - TIE_RTOL);
    let mut out = Vec::new();
    for (r, v) in diagonal_moments(y, basis).enumerate() {
        if v >= cut && out.len() < MAX_CANDIDATES {
            out.push(extract_even_at(y, basis, r));
        }
    }
    Ok(out)
}

fn odd_search_rows(basis: &MomentBasis, lift: &LiftRecord) -> Vec<usize> {
    // indices of Λ with exponent exactly 1 on every auxiliary variable
    let mut rows = Vec::new();
    'outer: for (i, alpha) in basis.lambda.list.iter().enumerate() {
        for (g, &n) in basis.dims.iter().enumerate() {
            if lift.lifted[g] && basis.group(alpha, g)[n - 1] != 1 {
                continue 'outer;
            }
        }
        rows.push(i);
    }
    rows
}

fn check_lift(basis: &MomentBasis, lift: &LiftRecord) -> Result<()> {
    if lift.lifted.len() != basis.dims.len() {
        return Err(Error::LiftMismatch(format!(
            "{} lift flags vs {} groups",
            lift.lifted.len(),
            basis.dims.len()
        )));
    }
    for (g, (&l, &n)) in lift.lifted.iter().zip(&basis.dims).enumerate() {
        let expect = if l {
            lift.original_dims[g] + 1
        } else {
            lift.original_dims[g]
        };
        if n != expect {
            return Err(Error::LiftMismatch(format!(
                "group {g}: basis dim {n}, lift record implies {expect}"
            )));
        }
    }
    Ok(())
}

fn extract_odd_at(
    y: &[f64],
    basis: &MomentBasis,
    lift: &LiftRecord,
    gamma: &[u8],
) -> Option<GroupedVector> {
    let mut blocks = Vec::with_capacity(basis.dims.len());
    for (g, &n) in basis.dims.iter().enumerate() {
        let n_orig = if lift.lifted[g] { n - 1 } else { n };
        let mut z = build_block(y, basis, gamma, g, n, n_orig);
        let nrm = norm(&z);
        z.iter_mut().for_each(|v| *v = v.abs() / nrm);
        if lift.lifted[g] {
            // strip the auxiliary coordinate; t = 1 means the x-part vanished
            let t = z[n - 1];
            if t > 1.0 - 1e-8 {
                return None;
            }
            z.truncate(n - 1);
            let xn = norm(&z);
            z.iter_mut().for_each(|v| *v /= xn);
        }
        blocks.push(z);
    }
    Some(GroupedVector::new(blocks))
}

/// Extraction for lifted odd-degree problems. The moment search is restricted
/// to indices with exponent exactly 1 on every auxiliary variable; a zero
/// maximum (or an extracted point sitting entirely on an auxiliary axis)
/// certifies the zero tensor.
///
/// Returns `(x in original shape, zero_tensor)`.
pub fn extract_odd(
    y: &[f64],
    basis: &MomentBasis,
    lift: &LiftRecord,
) -> Result<(GroupedVector, bool)> {
    check_lift(basis, lift)?;
    let rows = odd_search_rows(basis, lift);
    let (ri, best) = argmax(rows.iter().map(|&i| y[i])).expect("search set nonempty");
    if best <= 0.0 {
        return Ok((zero_point(lift), true));
    }
    let gamma = basis.lambda.list[rows[ri]].clone();
    match extract_odd_at(y, basis, lift, &gamma) {
        Some(x) => Ok((x, false)),
        None => Ok((zero_point(lift), true)),
    }
}

/// Tied-candidate variant of [`extract_odd`]; empty means zero tensor.
pub fn extract_odd_candidates(
    y: &[f64],
    basis: &MomentBasis,
    lift: &LiftRecord,
) -> Result<Vec<GroupedVector>> {
    check_lift(basis, lift)?;
    let rows = odd_search_rows(basis, lift);
    let (_, best) = argmax(rows.iter().map(|&i| y[i])).expect("search set nonempty");
    if best <= 0.0 {
        return Ok(Vec::new());
    }
    let cut = best * (1.0 - TIE_RTOL);
    let mut out = Vec::new();
    for &i in &rows {
        if y[i] >= cut && out.len() < MAX_CANDIDATES {
            if let Some(x) = extract_odd_at(y, basis, lift, &basis.lambda.list[i].clone()) {
                out.push(x);
            }
        }
    }
    Ok(out)
}

fn zero_point(lift: &LiftRecord) -> GroupedVector {
    GroupedVector::new(lift.original_dims.iter().map(|&n| vec![0.0; n]).collect())
}

/// Tightness certificate: second-largest singular value of `M(y)` and the
/// rank-one test `σ₂ < 1e-6`.
pub fn certify(y: &[f64], basis: &MomentBasis) -> (f64, bool) {
    let dim = basis.dim;
    let m = basis.moment_matrix(y);
    let mat = Mat::<f64>::from_fn(dim, dim, |i, j| m[i * dim + j]);
    let sigma2 = match mat.svd() {
        Ok(svd) if dim >= 2 => svd.S().column_vector()[1],
        _ => 0.0,
    };
    (sigma2, sigma2 < TIGHT_SIGMA2)
}

/// Relative approximation errors
/// `apperr = |f_dnn − f_app| / max(1, |f_dnn|)` and
/// `apperrnm = |f_dnn − f_app| / max(1, ‖A‖)`.
pub fn metrics(f_dnn: f64, f_app: f64, a: &Tensor) -> (f64, f64) {
    let gap = (f_dnn - f_app).abs();
    (gap / f_dnn.abs().max(1.0), gap / a.hs_norm().max(1.0))
}
