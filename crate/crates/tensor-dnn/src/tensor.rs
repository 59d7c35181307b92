//! Dense partially symmetric tensors, grouped vectors and multi-forms.

use crate::basis::IndexSet;
use crate::error::{Error, Result};

/// The tuple `(p; α_1..α_p; n_1..n_p)` describing a partially symmetric
/// tensor space: `p` groups, group `i` symmetric of order `α_i` over `ℝ^{n_i}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shape {
    alpha: Vec<usize>,
    n: Vec<usize>,
}

impl Shape {
    pub fn new(alpha: Vec<usize>, n: Vec<usize>) -> Result<Self> {
        if alpha.is_empty() || alpha.len() != n.len() {
            return Err(Error::InvalidShape(format!(
                "{} orders vs {} dimensions",
                alpha.len(),
                n.len()
            )));
        }
        if alpha.contains(&0) || n.contains(&0) {
            return Err(Error::InvalidShape(
                "orders and dimensions must be positive".into(),
            ));
        }
        let shape = Shape { alpha, n };
        if shape.entry_count_checked().is_none() {
            return Err(Error::InvalidShape("entry count overflows".into()));
        }
        Ok(shape)
    }

    /// Symmetric tensors: one group of order `m` over `ℝ^n`.
    pub fn symmetric(m: usize, n: usize) -> Result<Self> {
        Shape::new(vec![m], vec![n])
    }

    /// Non-symmetric order-`r` tensors: `r` groups of order one.
    pub fn multilinear(dims: &[usize]) -> Result<Self> {
        Shape::new(vec![1; dims.len()], dims.to_vec())
    }

    pub fn num_groups(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[usize] {
        &self.alpha
    }

    pub fn n(&self) -> &[usize] {
        &self.n
    }

    /// Total order `r = Σ α_i`.
    pub fn order(&self) -> usize {
        self.alpha.iter().sum()
    }

    /// Dimension of each index slot, grouped: `n_1` repeated `α_1` times, …
    pub fn slot_dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.order());
        for (a, d) in self.alpha.iter().zip(&self.n) {
            dims.extend(std::iter::repeat_n(*d, *a));
        }
        dims
    }

    /// Group owning each slot.
    pub fn slot_groups(&self) -> Vec<usize> {
        let mut groups = Vec::with_capacity(self.order());
        for (g, a) in self.alpha.iter().enumerate() {
            groups.extend(std::iter::repeat_n(g, *a));
        }
        groups
    }

    fn entry_count_checked(&self) -> Option<usize> {
        let mut total = 1usize;
        for (&a, &d) in self.alpha.iter().zip(&self.n) {
            for _ in 0..a {
                total = total.checked_mul(d)?;
            }
        }
        (total <= 1 << 27).then_some(total)
    }

    /// Total number of stored entries `Π n_i^{α_i}`.
    pub fn entry_count(&self) -> usize {
        self.entry_count_checked()
            .expect("validated at construction")
    }

    /// True when some group has odd order.
    pub fn has_odd_group(&self) -> bool {
        self.alpha.iter().any(|&a| a % 2 == 1)
    }
}

/// A point `x = (x^(1), …, x^(p))` of the product of group spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedVector {
    pub blocks: Vec<Vec<f64>>,
}

impl GroupedVector {
    pub fn new(blocks: Vec<Vec<f64>>) -> Self {
        GroupedVector { blocks }
    }

    pub fn zeros_like(shape: &Shape) -> Self {
        GroupedVector {
            blocks: shape.n().iter().map(|&d| vec![0.0; d]).collect(),
        }
    }

    pub fn matches(&self, shape: &Shape) -> bool {
        self.blocks.len() == shape.num_groups()
            && self
                .blocks
                .iter()
                .zip(shape.n())
                .all(|(b, &d)| b.len() == d)
    }

    pub fn block_norm(&self, i: usize) -> f64 {
        self.blocks[i].iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_nonnegative(&self, tol: f64) -> bool {
        self.blocks.iter().flatten().all(|&v| v >= -tol)
    }

    /// Normalize every block to the unit sphere. Blocks with zero norm are left as-is.
    pub fn normalize(&mut self) {
        for b in &mut self.blocks {
            let nrm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            if nrm > 0.0 {
                b.iter_mut().for_each(|v| *v /= nrm);
            }
        }
    }
}

/// Dense partially symmetric tensor with row-major entry storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Shape,
    entries: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: Shape) -> Self {
        let len = shape.entry_count();
        Tensor {
            shape,
            entries: vec![0.0; len],
        }
    }

    pub fn from_entries(shape: Shape, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != shape.entry_count() {
            return Err(Error::DimensionMismatch {
                expected: shape.entry_count(),
                got: entries.len(),
            });
        }
        Ok(Tensor { shape, entries })
    }

    /// Build a tensor from a function of the (0-based) index tuple.
    pub fn from_fn(shape: Shape, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let mut t = Tensor::zeros(shape);
        let mut idx = vec![0usize; t.shape.order()];
        for flat in 0..t.entries.len() {
            t.unflatten(flat, &mut idx);
            t.entries[flat] = f(&idx);
        }
        t
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    fn flatten(&self, idx: &[usize]) -> usize {
        let dims = self.shape.slot_dims();
        debug_assert_eq!(idx.len(), dims.len());
        let mut flat = 0usize;
        for (i, &d) in idx.iter().zip(&dims) {
            debug_assert!(*i < d, "index out of range");
            flat = flat * d + i;
        }
        flat
    }

    fn unflatten(&self, mut flat: usize, idx: &mut [usize]) {
        let dims = self.shape.slot_dims();
        for k in (0..dims.len()).rev() {
            idx[k] = flat % dims[k];
            flat /= dims[k];
        }
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.entries[self.flatten(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let flat = self.flatten(idx);
        self.entries[flat] = v;
    }

    /// Set every entry in the within-group permutation orbit of `idx` to `v`.
    pub fn set_orbit(&mut self, idx: &[usize], v: f64) {
        for flat in self.orbit_positions(idx) {
            self.entries[flat] = v;
        }
    }

    /// Flat positions of the within-group permutation orbit of `idx`.
    pub fn orbit_positions(&self, idx: &[usize]) -> Vec<usize> {
        let groups = self.shape.slot_groups();
        let mut slots_by_group: Vec<Vec<usize>> = vec![Vec::new(); self.shape.num_groups()];
        for (s, &g) in groups.iter().enumerate() {
            slots_by_group[g].push(s);
        }
        let mut out = Vec::new();
        let mut work = idx.to_vec();
        orbit_fold(self, &mut work, &slots_by_group, 0, &mut |t, w| {
            out.push(t.flatten(w));
        });
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn scale(&mut self, c: f64) {
        self.entries.iter_mut().for_each(|v| *v *= c);
    }

    pub fn scaled(&self, c: f64) -> Tensor {
        let mut t = self.clone();
        t.scale(c);
        t
    }

    pub fn negated(&self) -> Tensor {
        self.scaled(-1.0)
    }

    /// Average over within-group slot permutations. Returns the symmetric part
    /// and whether anything changed beyond `tol`.
    pub fn symmetrize(&self, tol: f64) -> (Tensor, bool) {
        let groups = self.shape.slot_groups();
        let mut slots_by_group: Vec<Vec<usize>> = vec![Vec::new(); self.shape.num_groups()];
        for (s, &g) in groups.iter().enumerate() {
            slots_by_group[g].push(s);
        }
        let mut out = Tensor::zeros(self.shape.clone());
        let mut idx = vec![0usize; self.shape.order()];
        let mut changed = false;
        for flat in 0..self.entries.len() {
            self.unflatten(flat, &mut idx);
            let mut sum = 0.0;
            let mut count = 0usize;
            let mut work = idx.clone();
            orbit_fold(self, &mut work, &slots_by_group, 0, &mut |t, w| {
                sum += t.entries[t.flatten(w)];
                count += 1;
            });
            let avg = sum / count as f64;
            if (avg - self.entries[flat]).abs() > tol {
                changed = true;
            }
            out.entries[flat] = avg;
        }
        (out, changed)
    }

    pub fn is_partially_symmetric(&self, tol: f64) -> bool {
        !self.symmetrize(tol).1
    }

    /// Hilbert-Schmidt inner product `Σ a_t b_t`.
    pub fn inner(&self, other: &Tensor) -> Result<f64> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch(format!(
                "{:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a * b)
            .sum())
    }

    /// Hilbert-Schmidt norm.
    pub fn hs_norm(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// The rank-one tensor `x^{⊗α} = (x^(1))^{⊗α_1} ⊗ … ⊗ (x^(p))^{⊗α_p}`.
    pub fn rank_one(x: &GroupedVector, shape: &Shape) -> Result<Tensor> {
        if !x.matches(shape) {
            return Err(Error::ShapeMismatch("blocks do not match shape".into()));
        }
        let groups = shape.slot_groups();
        let mut t = Tensor::zeros(shape.clone());
        let mut idx = vec![0usize; shape.order()];
        for flat in 0..t.entries.len() {
            t.unflatten(flat, &mut idx);
            let mut v = 1.0;
            for (s, &g) in groups.iter().enumerate() {
                v *= x.blocks[g][idx[s]];
            }
            t.entries[flat] = v;
        }
        Ok(t)
    }

    /// `⟨A, x^{⊗α}⟩`, evaluated without materializing the rank-one tensor.
    pub fn eval_multiform(&self, x: &GroupedVector) -> Result<f64> {
        if !x.matches(&self.shape) {
            return Err(Error::ShapeMismatch("blocks do not match shape".into()));
        }
        let groups = self.shape.slot_groups();
        let mut idx = vec![0usize; self.shape.order()];
        let mut acc = 0.0;
        for flat in 0..self.entries.len() {
            let a = self.entries[flat];
            if a == 0.0 {
                continue;
            }
            self.unflatten(flat, &mut idx);
            let mut v = a;
            for (s, &g) in groups.iter().enumerate() {
                v *= x.blocks[g][idx[s]];
            }
            acc += v;
        }
        Ok(acc)
    }

    /// Coefficient vector of `⟨A, x^{⊗α}⟩` in the monomial basis of `Λ(α)`:
    /// the coefficient of `x^α` is the sum of entries over all index tuples
    /// with per-group exponent profile `α`. Non-symmetric input thus maps to
    /// the multi-form of its symmetric part.
    pub fn to_multiform(&self) -> MultiForm {
        let degrees = self.shape.alpha().to_vec();
        let index = IndexSet::new(self.shape.n(), &degrees);
        let mut coeffs = vec![0f64; index.len()];
        let groups = self.shape.slot_groups();
        let width: usize = self.shape.n().iter().sum();
        let mut idx = vec![0usize; self.shape.order()];
        let mut profile = vec![0u8; width];
        for flat in 0..self.entries.len() {
            let a = self.entries[flat];
            if a == 0.0 {
                continue;
            }
            self.unflatten(flat, &mut idx);
            profile.iter_mut().for_each(|e| *e = 0);
            for (s, &g) in groups.iter().enumerate() {
                profile[index.offsets[g] + idx[s]] += 1;
            }
            let pos = index
                .position(&profile)
                .expect("profile lies in Lambda(alpha)");
            coeffs[pos] += a;
        }
        MultiForm {
            dims: self.shape.n().to_vec(),
            degrees,
            index,
            coeffs,
        }
    }

    /// Best nonnegative weight for the rank-one direction `x^{⊗α}`:
    /// `λ = max(0, ⟨A, x^{⊗α}⟩)` together with `‖A − λ x^{⊗α}‖² = ‖A‖² − λ²`.
    ///
    /// Blocks must be unit-norm and nonnegative; rejected otherwise.
    pub fn best_lambda(&self, x: &GroupedVector) -> Result<(f64, f64)> {
        for (i, _) in x.blocks.iter().enumerate() {
            let nrm = x.block_norm(i);
            if (nrm - 1.0).abs() > 1e-8 {
                return Err(Error::NonUnitBlock {
                    block: i,
                    norm: nrm,
                });
            }
            if x.blocks[i].iter().any(|&v| v < -1e-12) {
                return Err(Error::NegativeBlock { block: i });
            }
        }
        let val = self.eval_multiform(x)?;
        let lambda = val.max(0.0);
        Ok((lambda, self.hs_norm().powi(2) - lambda * lambda))
    }
}

fn orbit_fold(
    t: &Tensor,
    work: &mut Vec<usize>,
    slots_by_group: &[Vec<usize>],
    g: usize,
    f: &mut impl FnMut(&Tensor, &[usize]),
) {
    if g == slots_by_group.len() {
        f(t, work);
        return;
    }
    let slots = slots_by_group[g].clone();
    let orig: Vec<usize> = slots.iter().map(|&s| work[s]).collect();
    let mut vals = orig.clone();
    vals.sort_unstable();
    permute_distinct(&mut vals, 0, &mut |perm| {
        for (k, &s) in slots.iter().enumerate() {
            work[s] = perm[k];
        }
        orbit_fold(t, work, slots_by_group, g + 1, f);
    });
    for (k, &s) in slots.iter().enumerate() {
        work[s] = orig[k];
    }
}

/// Enumerate distinct permutations of a sorted multiset in place.
fn permute_distinct(vals: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == vals.len() {
        f(vals);
        return;
    }
    let mut seen = Vec::new();
    for i in k..vals.len() {
        if seen.contains(&vals[i]) {
            continue;
        }
        seen.push(vals[i]);
        vals.swap(k, i);
        permute_distinct(vals, k + 1, f);
        vals.swap(k, i);
    }
}

/// Coefficient vector of a multi-form over `Λ(d_1..d_p)` in lexicographic order.
///
/// `dims` are the group dimensions and `degrees` the per-group homogeneity
/// degrees; for the multi-form of a tensor these are `n_i` and `α_i`.
#[derive(Debug, Clone)]
pub struct MultiForm {
    pub dims: Vec<usize>,
    pub degrees: Vec<usize>,
    pub index: IndexSet,
    pub coeffs: Vec<f64>,
}

impl MultiForm {
    pub fn zero(dims: &[usize], degrees: &[usize]) -> Self {
        let index = IndexSet::new(dims, degrees);
        let coeffs = vec![0f64; index.len()];
        MultiForm {
            dims: dims.to_vec(),
            degrees: degrees.to_vec(),
            index,
            coeffs,
        }
    }

    pub fn num_groups(&self) -> usize {
        self.dims.len()
    }

    pub fn negated(&self) -> MultiForm {
        let mut f = self.clone();
        f.coeffs.iter_mut().for_each(|c| *c = -*c);
        f
    }

    pub fn scaled(&self, s: f64) -> MultiForm {
        let mut f = self.clone();
        f.coeffs.iter_mut().for_each(|c| *c *= s);
        f
    }

    /// Evaluate `Σ_α f_α x^α`.
    pub fn eval(&self, x: &GroupedVector) -> f64 {
        debug_assert_eq!(x.blocks.len(), self.dims.len());
        let mut acc = 0.0;
        for (alpha, &c) in self.index.list.iter().zip(&self.coeffs) {
            if c == 0.0 {
                continue;
            }
            let mut v = c;
            for (g, block) in x.blocks.iter().enumerate() {
                for (j, &e) in self.index.group(alpha, g).iter().enumerate() {
                    for _ in 0..e {
                        v *= block[j];
                    }
                }
            }
            acc += v;
        }
        acc
    }

    /// Gradient of the form at `x`, as one vector per group.
    pub fn gradient(&self, x: &GroupedVector) -> Vec<Vec<f64>> {
        let mut grad: Vec<Vec<f64>> = self.dims.iter().map(|&d| vec![0.0; d]).collect();
        for (alpha, &c) in self.index.list.iter().zip(&self.coeffs) {
            if c == 0.0 {
                continue;
            }
            for (g, block_grad) in grad.iter_mut().enumerate() {
                let exps = self.index.group(alpha, g);
                for (j, &e) in exps.iter().enumerate() {
                    if e == 0 {
                        continue;
                    }
                    // d/dx_j of the monomial: e * x_j^{e-1} * rest
                    let mut v = c * e as f64;
                    for (g2, block) in x.blocks.iter().enumerate() {
                        for (j2, &e2) in self.index.group(alpha, g2).iter().enumerate() {
                            let pow = if g2 == g && j2 == j { e2 - 1 } else { e2 };
                            for _ in 0..pow {
                                v *= block[j2];
                            }
                        }
                    }
                    block_grad[j] += v;
                }
            }
        }
        grad
    }

    /// Pointwise product with another multi-form (degrees add).
    pub fn multiply(&self, other: &MultiForm) -> MultiForm {
        assert_eq!(self.dims, other.dims);
        let degrees: Vec<usize> = self
            .degrees
            .iter()
            .zip(&other.degrees)
            .map(|(a, b)| a + b)
            .collect();
        let mut out = MultiForm::zero(&self.dims, &degrees);
        for (a, &ca) in self.index.list.iter().zip(&self.coeffs) {
            if ca == 0.0 {
                continue;
            }
            for (b, &cb) in other.index.list.iter().zip(&other.coeffs) {
                if cb == 0.0 {
                    continue;
                }
                let sum: Vec<u8> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                let pos = out.index.position(&sum).expect("degree sum in range");
                out.coeffs[pos] += ca * cb;
            }
        }
        out
    }
}
