//! Monomial bases, the moment-matrix class structure and size accounting.
//!
//! Monomials of degree `s` in `n` variables are ordered lexicographically with
//! `z_1 ≻ z_2 ≻ … ≻ z_n`: the exponent vector with the lexicographically
//! larger entries comes first, so `z^{[2]} = (z1², z1z2, z1z3, …, z2², …, zn²)`.
//! Groups are ordered `x^(1) ≻ … ≻ x^(p)`. Every part of the toolkit
//! (coefficient vectors, moment vectors, extraction) indexes against this one
//! ordering.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Exponent vector over all groups, flattened in group order.
///
/// For a `p`-group problem with dimensions `n_1..n_p` the length is `Σ n_i`
/// and entry `offset_i + j` is the exponent of variable `j` of group `i`.
pub type MultiIndex = Vec<u8>;

/// `ν(s, n) = C(n+s-1, s)`, the number of degree-`s` monomials in `n` variables.
pub fn nu(s: usize, n: usize) -> usize {
    debug_assert!(n >= 1);
    binomial(n + s - 1, s)
}

/// Binomial coefficient as `usize`, saturating at `usize::MAX` on overflow.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > usize::MAX as u128 {
            return usize::MAX;
        }
    }
    acc as usize
}

/// Degree-`s` exponent vectors in `n` variables, lexicographic order.
pub fn compositions(s: usize, n: usize) -> Vec<Vec<u8>> {
    fn rec(s: u8, n: usize, prefix: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if n == 1 {
            prefix.push(s);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for e in (0..=s).rev() {
            prefix.push(e);
            rec(s - e, n - 1, prefix, out);
            prefix.pop();
        }
    }
    assert!(s <= u8::MAX as usize, "degree too large");
    let mut out = Vec::with_capacity(nu(s, n));
    rec(s as u8, n, &mut Vec::with_capacity(n), &mut out);
    out
}

fn cartesian(groups: &[Vec<Vec<u8>>]) -> Vec<MultiIndex> {
    let total: usize = groups.iter().map(Vec::len).product();
    let width: usize = groups.iter().map(|g| g[0].len()).sum();
    let mut acc: Vec<MultiIndex> = vec![Vec::with_capacity(width)];
    for g in groups {
        let mut next = Vec::with_capacity(acc.len() * g.len());
        for a in &acc {
            for m in g {
                let mut v = a.clone();
                v.extend_from_slice(m);
                next.push(v);
            }
        }
        acc = next;
    }
    debug_assert_eq!(acc.len(), total);
    acc
}

/// An ordered multi-degree monomial index set `Λ(d_1..d_p)` with position lookup.
#[derive(Debug, Clone)]
pub struct IndexSet {
    /// Group dimensions `n_i`.
    pub dims: Vec<usize>,
    /// Per-group degrees `d_i`.
    pub degrees: Vec<usize>,
    /// Indices in lexicographic order with group precedence.
    pub list: Vec<MultiIndex>,
    pos: HashMap<MultiIndex, u32>,
    /// Offset of each group inside a flattened index.
    pub offsets: Vec<usize>,
}

impl IndexSet {
    pub fn new(dims: &[usize], degrees: &[usize]) -> Self {
        assert_eq!(dims.len(), degrees.len());
        let groups: Vec<Vec<Vec<u8>>> = dims
            .iter()
            .zip(degrees)
            .map(|(&n, &d)| compositions(d, n))
            .collect();
        let list = cartesian(&groups);
        let pos = list
            .iter()
            .enumerate()
            .map(|(i, v)| (v.clone(), i as u32))
            .collect();
        let mut offsets = Vec::with_capacity(dims.len());
        let mut off = 0;
        for &n in dims {
            offsets.push(off);
            off += n;
        }
        IndexSet {
            dims: dims.to_vec(),
            degrees: degrees.to_vec(),
            list,
            pos,
            offsets,
        }
    }

    pub fn len(&self) -> usize {
        self.list.len()
    }

    pub fn is_empty(&self) -> bool {
        self.list.is_empty()
    }

    /// Position of an exponent vector, if it belongs to the set.
    pub fn position(&self, idx: &[u8]) -> Option<usize> {
        self.pos.get(idx).map(|&i| i as usize)
    }

    /// Slice of `idx` belonging to group `g`.
    pub fn group<'a>(&self, idx: &'a [u8], g: usize) -> &'a [u8] {
        &idx[self.offsets[g]..self.offsets[g] + self.dims[g]]
    }
}

/// Moment-matrix structure for the basis `x^{[τ]}`.
///
/// Positions `(r, c)` of the `dim × dim` moment matrix fall into classes
/// indexed by `α = μ_r + μ_c ∈ Λ(2τ)`; the 0/1 indicator of each class is the
/// coefficient matrix `A_α`, and `w_α` counts its entries (ordered pairs).
#[derive(Debug)]
pub struct MomentBasis {
    /// Group dimensions `n_i` (lifted problems already include the auxiliary variable).
    pub dims: Vec<usize>,
    /// Half-degrees `τ_i` per group.
    pub tau: Vec<usize>,
    /// Degree-`τ` monomials spanning the matrix rows, lexicographic.
    pub monomials: Vec<MultiIndex>,
    /// Matrix dimension `ν(τ, n_1..n_p)`.
    pub dim: usize,
    /// The index set `Λ(2τ)` of moment coordinates.
    pub lambda: IndexSet,
    /// Class of each matrix position, row-major `dim²` table.
    pub class_of: Vec<u32>,
    /// Positions of each class (ordered pairs, row-major scan order).
    pub classes: Vec<Vec<(u32, u32)>>,
    /// `w_α = |classes[α]|` as a float.
    pub weights: Vec<f64>,
    offsets: Vec<usize>,
}

/// Default cap on the moment-matrix dimension.
pub const DEFAULT_DIM_CAP: usize = 20_000;

/// Build the moment basis for half-degrees `tau` over group dimensions `dims`.
pub fn build_basis(dims: &[usize], tau: &[usize]) -> Result<MomentBasis> {
    build_basis_capped(dims, tau, DEFAULT_DIM_CAP)
}

/// As [`build_basis`] with an explicit dimension cap.
pub fn build_basis_capped(dims: &[usize], tau: &[usize], cap: usize) -> Result<MomentBasis> {
    if dims.len() != tau.len() || dims.is_empty() {
        return Err(Error::InvalidShape(format!(
            "{} groups vs {} half-degrees",
            dims.len(),
            tau.len()
        )));
    }
    if dims.contains(&0) {
        return Err(Error::InvalidShape("zero-dimensional group".into()));
    }
    if tau.iter().all(|&t| t == 0) {
        return Err(Error::InvalidShape("all half-degrees are zero".into()));
    }
    let dim: usize = dims.iter().zip(tau).map(|(&n, &t)| nu(t, n)).product();
    if dim > cap {
        return Err(Error::SizeLimit { dim, cap });
    }
    let tau_groups: Vec<Vec<Vec<u8>>> = dims
        .iter()
        .zip(tau)
        .map(|(&n, &t)| compositions(t, n))
        .collect();
    let monomials = cartesian(&tau_groups);
    debug_assert_eq!(monomials.len(), dim);

    let degrees: Vec<usize> = tau.iter().map(|&t| 2 * t).collect();
    let lambda = IndexSet::new(dims, &degrees);

    let mut class_of = vec![0u32; dim * dim];
    let mut classes: Vec<Vec<(u32, u32)>> = vec![Vec::new(); lambda.len()];
    let width = monomials[0].len();
    let mut sum = vec![0u8; width];
    for r in 0..dim {
        for c in 0..dim {
            for k in 0..width {
                sum[k] = monomials[r][k] + monomials[c][k];
            }
            let cls = lambda
                .position(&sum)
                .expect("sum of two degree-tau indices lies in Lambda(2tau)")
                as u32;
            class_of[r * dim + c] = cls;
            classes[cls as usize].push((r as u32, c as u32));
        }
    }
    let weights: Vec<f64> = classes.iter().map(|v| v.len() as f64).collect();
    debug_assert!(weights.iter().all(|&w| w > 0.0));

    let mut offsets = Vec::with_capacity(dims.len());
    let mut off = 0;
    for &n in dims {
        offsets.push(off);
        off += n;
    }
    Ok(MomentBasis {
        dims: dims.to_vec(),
        tau: tau.to_vec(),
        monomials,
        dim,
        lambda,
        class_of,
        classes,
        weights,
        offsets,
    })
}

impl MomentBasis {
    pub fn class(&self, r: usize, c: usize) -> usize {
        self.class_of[r * self.dim + c] as usize
    }

    /// Slice of a flattened exponent vector belonging to group `g`.
    pub fn group<'a>(&self, idx: &'a [u8], g: usize) -> &'a [u8] {
        &idx[self.offsets[g]..self.offsets[g] + self.dims[g]]
    }

    pub fn group_offset(&self, g: usize) -> usize {
        self.offsets[g]
    }

    /// Assemble the moment matrix `M(y) = Σ_α A_α y_α`, row-major.
    pub fn moment_matrix(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.lambda.len());
        self.class_of.iter().map(|&k| y[k as usize]).collect()
    }

    /// Spread a class vector `v` as `Σ_α (v_α / w_α) A_α`, row-major.
    pub fn class_matrix(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.lambda.len());
        self.class_of
            .iter()
            .map(|&k| v[k as usize] / self.weights[k as usize])
            .collect()
    }
}

/// Number of equality constraints of the assembled conic program:
/// `μ(d, n_1..n_p) + 1` where `μ = dim(dim+1)/2 − |Λ(d)|` counts the
/// orthogonal-complement constraints and the extra one is the normalization.
pub fn count_constraints(basis: &MomentBasis) -> usize {
    let dim = basis.dim;
    dim * (dim + 1) / 2 - basis.lambda.len() + 1
}

/// Constraint count from sizes alone, without building a basis.
pub fn count_constraints_for(dims: &[usize], tau: &[usize]) -> usize {
    let dim: usize = dims.iter().zip(tau).map(|(&n, &t)| nu(t, n)).product();
    let nlam: usize = dims.iter().zip(tau).map(|(&n, &t)| nu(2 * t, n)).product();
    dim * (dim + 1) / 2 - nlam + 1
}

/// Orthogonal projection of a symmetric matrix onto `span{A_α}`.
///
/// Returns the class averages `y` and the averaged matrix `Σ_α y_α A_α`.
pub fn class_average(x: &[f64], basis: &MomentBasis) -> Result<(Vec<f64>, Vec<f64>)> {
    let dim = basis.dim;
    if x.len() != dim * dim {
        return Err(Error::DimensionMismatch {
            expected: dim * dim,
            got: x.len(),
        });
    }
    let mut y = vec![0f64; basis.lambda.len()];
    for (idx, &cls) in basis.class_of.iter().enumerate() {
        y[cls as usize] += x[idx];
    }
    for (k, v) in y.iter_mut().enumerate() {
        *v /= basis.weights[k];
    }
    let xavg = basis.moment_matrix(&y);
    Ok((y, xavg))
}
