//! Dense tensors at a point, with index variance tracked per slot.
//!
//! Components are stored row-major: the flat index of `(i_0, .., i_{r-1})` is
//! `sum_k i_k * dim^(r-1-k)`. Symmetry is never assumed from metadata; the
//! checkers in this module measure it.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jets::Jet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variance {
    Lower,
    Upper,
}

impl Variance {
    pub fn flipped(self) -> Variance {
        match self {
            Variance::Lower => Variance::Upper,
            Variance::Upper => Variance::Lower,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    dim: usize,
    variance: Vec<Variance>,
    data: Vec<T>,
}

/// Real components at a point.
pub type PointTensor = Tensor<f64>;

/// Jet-valued components, used when a field must be differentiated further.
pub type JetTensor = Tensor<Jet>;

/// Decodes a flat index into a multi-index.
pub fn unflatten(dim: usize, rank: usize, mut flat: usize, out: &mut [usize]) {
    for k in (0..rank).rev() {
        out[k] = flat % dim;
        flat /= dim;
    }
}

fn flatten(dim: usize, idx: &[usize]) -> usize {
    idx.iter().fold(0, |acc, &i| acc * dim + i)
}

impl<T> Tensor<T> {
    pub fn from_fn(dim: usize, variance: Vec<Variance>, mut f: impl FnMut(&[usize]) -> T) -> Self {
        let rank = variance.len();
        let len = dim.pow(rank as u32);
        let mut idx = vec![0usize; rank];
        let data = (0..len)
            .map(|flat| {
                unflatten(dim, rank, flat, &mut idx);
                f(&idx)
            })
            .collect();
        Tensor {
            dim,
            variance,
            data,
        }
    }

    pub fn from_vec(dim: usize, variance: Vec<Variance>, data: Vec<T>) -> Result<Self> {
        let want = dim.pow(variance.len() as u32);
        if data.len() != want {
            return Err(Error::Shape(format!(
                "{} components supplied, rank {} in dimension {dim} needs {want}",
                data.len(),
                variance.len()
            )));
        }
        Ok(Tensor {
            dim,
            variance,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.variance.len()
    }

    pub fn variance(&self) -> &[Variance] {
        &self.variance
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, idx: &[usize]) -> &T {
        debug_assert_eq!(idx.len(), self.rank());
        &self.data[flatten(self.dim, idx)]
    }

    pub fn get_mut(&mut self, idx: &[usize]) -> &mut T {
        let flat = flatten(self.dim, idx);
        &mut self.data[flat]
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Tensor<U> {
        Tensor {
            dim: self.dim,
            variance: self.variance.clone(),
            data: self.data.iter().map(f).collect(),
        }
    }

    /// Same components with different variance labels (rank must match).
    pub fn relabel(mut self, variance: Vec<Variance>) -> Self {
        assert_eq!(variance.len(), self.variance.len());
        self.variance = variance;
        self
    }
}

impl JetTensor {
    /// Constant terms, i.e. the tensor at the expansion point.
    pub fn values(&self) -> PointTensor {
        self.map(Jet::value)
    }

    pub fn min_order(&self) -> usize {
        self.data.iter().map(Jet::order).min().unwrap_or(0)
    }
}

pub fn lower_slots(rank: usize) -> Vec<Variance> {
    vec![Variance::Lower; rank]
}

impl PointTensor {
    pub fn zeros(dim: usize, variance: Vec<Variance>) -> Self {
        Tensor::from_fn(dim, variance, |_| 0.0)
    }

    /// All-lower tensor built from a component function.
    pub fn lower(dim: usize, rank: usize, f: impl FnMut(&[usize]) -> f64) -> Self {
        Tensor::from_fn(dim, lower_slots(rank), f)
    }

    pub fn from_matrix(m: &DMatrix<f64>, variance: [Variance; 2]) -> Self {
        assert_eq!(m.nrows(), m.ncols());
        Tensor::from_fn(m.nrows(), variance.to_vec(), |i| m[(i[0], i[1])])
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        assert_eq!(self.rank(), 2);
        DMatrix::from_fn(self.dim, self.dim, |i, j| *self.get(&[i, j]))
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|x| x * s)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a - b)
    }

    fn zip(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.dim, other.dim, "tensor dimension mismatch");
        assert_eq!(self.rank(), other.rank(), "tensor rank mismatch");
        Tensor {
            dim: self.dim,
            variance: self.variance.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        }
    }

    /// Componentwise Euclidean norm. Equals the invariant norm in an
    /// orthonormal frame.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    /// Reorders slots: output slot `k` is input slot `perm[k]`.
    pub fn permute(&self, perm: &[usize]) -> Self {
        let rank = self.rank();
        assert_eq!(perm.len(), rank);
        let variance = perm.iter().map(|&p| self.variance[p]).collect();
        let mut src = vec![0usize; rank];
        Tensor::from_fn(self.dim, variance, |idx| {
            for (k, &p) in perm.iter().enumerate() {
                src[p] = idx[k];
            }
            *self.get(&src)
        })
    }

    /// Re-expresses an all-lower tensor in the frame whose vectors are the
    /// columns of `frame`: `T'_{i..} = T_{a..} E^a_i`.
    pub fn in_frame(&self, frame: &DMatrix<f64>) -> Self {
        let mut out = self.clone();
        for slot in 0..self.rank() {
            out = transform_slot(&out, slot, frame);
        }
        out
    }
}

/// Applies `m` to a single slot: `out_{..i..} = sum_a m[(a, i)] t_{..a..}`.
fn transform_slot(t: &PointTensor, slot: usize, m: &DMatrix<f64>) -> PointTensor {
    let dim = t.dim;
    let rank = t.rank();
    let mut src = vec![0usize; rank];
    Tensor::from_fn(dim, t.variance.clone(), |idx| {
        src.copy_from_slice(idx);
        let mut acc = 0.0;
        for a in 0..dim {
            src[slot] = a;
            acc += m[(a, idx[slot])] * t.get(&src);
        }
        acc
    })
}

/// Identity `δ_a^b`.
pub fn kronecker(dim: usize) -> PointTensor {
    Tensor::from_fn(dim, vec![Variance::Lower, Variance::Upper], |i| {
        if i[0] == i[1] {
            1.0
        } else {
            0.0
        }
    })
}

/// Trace over two slots of opposite variance.
pub fn contract(t: &PointTensor, i: usize, j: usize) -> Result<PointTensor> {
    let rank = t.rank();
    if i >= rank || j >= rank || i == j {
        return Err(Error::Shape(format!(
            "cannot contract slots {i} and {j} of a rank-{rank} tensor"
        )));
    }
    if t.variance[i] == t.variance[j] {
        return Err(Error::SameVariance(i, j));
    }
    let keep: Vec<usize> = (0..rank).filter(|&k| k != i && k != j).collect();
    let variance = keep.iter().map(|&k| t.variance[k]).collect();
    let mut src = vec![0usize; rank];
    Ok(Tensor::from_fn(t.dim, variance, |idx| {
        for (pos, &k) in keep.iter().enumerate() {
            src[k] = idx[pos];
        }
        (0..t.dim)
            .map(|a| {
                src[i] = a;
                src[j] = a;
                t.get(&src)
            })
            .sum()
    }))
}

/// Pointwise metric with its inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    g: PointTensor,
    g_inv: PointTensor,
}

impl Metric {
    pub fn new(g: &DMatrix<f64>) -> Result<Metric> {
        let n = g.nrows();
        if n == 0 || g.ncols() != n {
            return Err(Error::Shape(format!(
                "metric must be square and non-empty, got {}x{}",
                g.nrows(),
                g.ncols()
            )));
        }
        let asym = (g - g.transpose()).amax();
        if asym > 1e-12 * (1.0 + g.amax()) {
            return Err(Error::NotPositiveDefinite(format!(
                "asymmetric part of size {asym:e}"
            )));
        }
        let eig = SymmetricEigen::new(g.clone());
        let min = eig.eigenvalues.min();
        // Negated so that NaN is rejected too.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(min > 0.0) {
            return Err(Error::NotPositiveDefinite(format!(
                "smallest eigenvalue {min:e}"
            )));
        }
        let inv = g
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::NotPositiveDefinite("singular".into()))?;
        Ok(Metric {
            g: PointTensor::from_matrix(g, [Variance::Lower, Variance::Lower]),
            g_inv: PointTensor::from_matrix(&inv, [Variance::Upper, Variance::Upper]),
        })
    }

    pub fn euclidean(dim: usize) -> Metric {
        Metric::new(&DMatrix::identity(dim, dim)).expect("identity is a metric")
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    pub fn g(&self) -> &PointTensor {
        &self.g
    }

    pub fn g_inv(&self) -> &PointTensor {
        &self.g_inv
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        self.g.to_matrix()
    }

    pub fn inverse_matrix(&self) -> DMatrix<f64> {
        self.g_inv.to_matrix()
    }

    /// Columns form an orthonormal basis: `E^T g E = 1`.
    pub fn orthonormal_frame(&self) -> DMatrix<f64> {
        crate::linalg::orthonormal_frame(&self.matrix()).expect("metric is positive definite")
    }

    /// Full contraction `a_{i..} b_{j..} g^{ij} ...` of two all-lower tensors.
    pub fn inner(&self, a: &PointTensor, b: &PointTensor) -> f64 {
        let e = self.orthonormal_frame();
        a.in_frame(&e).dot(&b.in_frame(&e))
    }

    pub fn norm(&self, t: &PointTensor) -> f64 {
        self.inner(t, t).max(0.0).sqrt()
    }

    /// `g · g^{-1} - 1`, max-abs.
    pub fn inverse_defect(&self) -> f64 {
        let p = self.matrix() * self.inverse_matrix();
        (p - DMatrix::identity(self.dim(), self.dim())).amax()
    }
}

/// Flips the variance of `slot` using `g` or `g^{-1}`.
pub fn raise_lower(t: &PointTensor, slot: usize, metric: &Metric) -> Result<PointTensor> {
    if slot >= t.rank() {
        return Err(Error::Shape(format!(
            "slot {slot} out of range for rank {}",
            t.rank()
        )));
    }
    if metric.dim() != t.dim() {
        return Err(Error::Shape(format!(
            "metric dimension {} does not match tensor dimension {}",
            metric.dim(),
            t.dim()
        )));
    }
    let m = match t.variance[slot] {
        Variance::Lower => metric.inverse_matrix(),
        Variance::Upper => metric.matrix(),
    };
    let mut out = transform_slot(t, slot, &m);
    out.variance[slot] = t.variance[slot].flipped();
    Ok(out)
}

/// All permutations of `0..k` with their signs.
pub fn permutations(k: usize) -> Vec<(Vec<usize>, f64)> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], sign: f64, out: &mut Vec<(Vec<usize>, f64)>) {
        let k = used.len();
        if prefix.len() == k {
            out.push((prefix.clone(), sign));
            return;
        }
        for i in 0..k {
            if !used[i] {
                // inversions added by placing i now = unused values below i
                let inv = used[..i].iter().filter(|u| !**u).count();
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, if inv % 2 == 0 { sign } else { -sign }, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; k], 1.0, &mut out);
    out
}

fn check_slots(t: &PointTensor, slots: &[usize]) -> Result<()> {
    for (n, &s) in slots.iter().enumerate() {
        if s >= t.rank() || slots[..n].contains(&s) {
            return Err(Error::Shape(format!("invalid slot list {slots:?}")));
        }
    }
    if slots.iter().any(|&s| t.variance[s] != t.variance[slots[0]]) {
        return Err(Error::MixedVariance(slots.to_vec()));
    }
    Ok(())
}

fn young(t: &PointTensor, slots: &[usize], signed: bool) -> Result<PointTensor> {
    check_slots(t, slots)?;
    let perms = permutations(slots.len());
    let weight = 1.0 / perms.len() as f64;
    let mut src = vec![0usize; t.rank()];
    Ok(Tensor::from_fn(t.dim, t.variance.clone(), |idx| {
        let mut acc = 0.0;
        for (p, sign) in &perms {
            src.copy_from_slice(idx);
            for (k, &s) in slots.iter().enumerate() {
                src[s] = idx[slots[p[k]]];
            }
            acc += if signed { *sign } else { 1.0 } * t.get(&src);
        }
        acc * weight
    }))
}

/// Symmetric part over `slots` (round brackets).
pub fn symmetrize(t: &PointTensor, slots: &[usize]) -> Result<PointTensor> {
    young(t, slots, false)
}

/// Skew part over `slots` (square brackets).
pub fn antisymmetrize(t: &PointTensor, slots: &[usize]) -> Result<PointTensor> {
    young(t, slots, true)
}

/// Sparse symmetric projector on `dim^4` components, stored by rows.
pub struct Projector {
    pub dim: usize,
    pub rows: Vec<Vec<(u32, f64)>>,
}

impl Projector {
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(j, w)| w * v[j as usize]).sum())
            .collect()
    }

    pub fn trace(&self) -> f64 {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .filter(|(j, _)| *j as usize == i)
                    .map(|(_, w)| w)
                    .sum::<f64>()
            })
            .sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.rows.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                m[(i, j as usize)] = w;
            }
        }
        m
    }
}

/// Projection onto algebraic curvature tensors, applied directly:
/// skew each pair, symmetrise the pair exchange, then remove the totally
/// skew part (which is all that survives the first Bianchi map there).
fn riemann_project_direct(dim: usize, v: &[f64]) -> Vec<f64> {
    let at = |a: usize, b: usize, c: usize, d: usize| v[((a * dim + b) * dim + c) * dim + d];
    let n4 = dim.pow(4);
    let mut pairs = vec![0.0; n4];
    for a in 0..dim {
        for b in 0..dim {
            for c in 0..dim {
                for d in 0..dim {
                    let skew = |a, b, c, d| {
                        0.25 * (at(a, b, c, d) - at(b, a, c, d) - at(a, b, d, c) + at(b, a, d, c))
                    };
                    pairs[((a * dim + b) * dim + c) * dim + d] =
                        0.5 * (skew(a, b, c, d) + skew(c, d, a, b));
                }
            }
        }
    }
    let perms = permutations(4);
    let mut out = pairs.clone();
    let mut idx = [0usize; 4];
    for (flat, o) in out.iter_mut().enumerate() {
        unflatten(dim, 4, flat, &mut idx);
        let mut total = 0.0;
        for (p, sign) in &perms {
            let j = ((idx[p[0]] * dim + idx[p[1]]) * dim + idx[p[2]]) * dim + idx[p[3]];
            total += sign * pairs[j];
        }
        *o -= total / 24.0;
    }
    out
}

/// Cached projector onto the Riemann-symmetric subspace in dimension `dim`.
pub fn riemann_projector(dim: usize) -> &'static Projector {
    static CACHE: OnceLock<Mutex<HashMap<usize, &'static Projector>>> = OnceLock::new();
    let mut cache = CACHE
        .get_or_init(|| Mutex::new(HashMap::new()))
        .lock()
        .expect("projector cache poisoned");
    cache.entry(dim).or_insert_with(|| {
        let n4 = dim.pow(4);
        let mut unit = vec![0.0; n4];
        let mut rows = vec![Vec::new(); n4];
        for j in 0..n4 {
            unit[j] = 1.0;
            let col = riemann_project_direct(dim, &unit);
            unit[j] = 0.0;
            for (i, w) in col.into_iter().enumerate() {
                if w.abs() > 1e-15 {
                    rows[i].push((j as u32, w));
                }
            }
        }
        Box::leak(Box::new(Projector { dim, rows }))
    })
}

/// Orthogonal projection onto `{T = T_[ab][cd], T_[abc]d = 0}`.
pub fn riemann_project(t: &PointTensor) -> Result<PointTensor> {
    if t.rank() != 4 {
        return Err(Error::Shape(format!(
            "Riemann projection needs rank 4, got rank {}",
            t.rank()
        )));
    }
    if t.variance.iter().any(|v| *v != Variance::Lower) {
        return Err(Error::MixedVariance((0..4).collect()));
    }
    let data = riemann_projector(t.dim).apply(&t.data);
    Tensor::from_vec(t.dim, t.variance.clone(), data)
}

/// Ordered basis `(a, b)`, `a < b`, of two-forms. The element `(a, b)` is the
/// tensor with `+1` at `[a, b]` and `-1` at `[b, a]`, so under the
/// full-contraction inner product `<mu, nu> = mu_ab nu^ab` each has norm² 2.
pub fn two_form_basis(dim: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(dim * dim.saturating_sub(1) / 2);
    for a in 0..dim {
        for b in a + 1..dim {
            out.push((a, b));
        }
    }
    out
}

/// `sum_I w_I e_I` for coefficients in [`two_form_basis`] order.
pub fn two_form_from_coeffs(dim: usize, coeffs: &[f64]) -> PointTensor {
    let mut t = PointTensor::zeros(dim, lower_slots(2));
    for ((a, b), w) in two_form_basis(dim).into_iter().zip(coeffs) {
        *t.get_mut(&[a, b]) += w;
        *t.get_mut(&[b, a]) -= w;
    }
    t
}

/// Coefficients `w_ab = t_ab` (a < b) of the skew part of `t`.
pub fn two_form_coeffs(t: &PointTensor) -> Vec<f64> {
    two_form_basis(t.dim())
        .into_iter()
        .map(|(a, b)| 0.5 * (t.get(&[a, b]) - t.get(&[b, a])))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    Symmetric(usize, usize),
    Antisymmetric(usize, usize),
    /// Pair skewness, pair exchange and the first Bianchi identity.
    Riemann,
}

/// Max-abs violation of a declared symmetry.
pub fn symmetry_defect(t: &PointTensor, sym: Symmetry) -> Result<f64> {
    match sym {
        Symmetry::Symmetric(i, j) => Ok(t.sub(&symmetrize(t, &[i, j])?).max_abs()),
        Symmetry::Antisymmetric(i, j) => Ok(t.sub(&antisymmetrize(t, &[i, j])?).max_abs()),
        Symmetry::Riemann => Ok(t.sub(&riemann_project(t)?).max_abs()),
    }
}
