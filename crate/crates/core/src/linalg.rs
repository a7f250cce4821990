//! Small dense and sparse linear algebra used by the pointwise checks and
//! the least-squares probe.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Off-diagonal Frobenius norm, relative to the matrix norm, at which Jacobi
/// sweeps stop.
pub const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Default relative singular-value cutoff for ranks and kernels.
pub const RANK_TOL: f64 = 1e-9;

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix.
///
/// Returns eigenvalues in ascending order and the matching orthonormal
/// eigenvectors as columns.
pub fn symmetric_eigen(a: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Shape(format!("{}x{} matrix is not square", n, a.ncols())));
    }
    let asym = (a - a.transpose()).amax();
    if asym > 1e-10 * (1.0 + a.amax()) {
        return Err(Error::Shape(format!(
            "matrix is not symmetric (defect {asym:e})"
        )));
    }
    let mut m = (a + a.transpose()) * 0.5;
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = m.norm().max(f64::MIN_POSITIVE);
    let off = |m: &DMatrix<f64>| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[(i, j)] * m[(i, j)];
                }
            }
        }
        s.sqrt()
    };
    let mut sweeps = 0;
    while off(&m) > JACOBI_TOL * scale {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence(sweeps));
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() < f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok((values, vectors))
}

/// Groups sorted eigenvalues whose neighbours differ by less than `tol`.
pub fn group_eigenvalues(values: &[f64], tol: f64) -> Vec<(f64, usize)> {
    let mut groups: Vec<(f64, usize, f64)> = Vec::new();
    for &v in values {
        match groups.last_mut() {
            Some((_, count, last)) if (v - *last).abs() < tol => {
                *count += 1;
                *last = v;
            }
            _ => groups.push((v, 1, v)),
        }
    }
    // report the mean of each cluster
    let mut out = Vec::with_capacity(groups.len());
    let mut start = 0;
    for (_, count, _) in groups {
        let mean = values[start..start + count].iter().sum::<f64>() / count as f64;
        out.push((mean, count));
        start += count;
    }
    out
}

/// Frame `E` with `E^T g E = 1`, from the Cholesky factor `g = L L^T`.
pub fn orthonormal_frame(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = g
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("Cholesky factorisation failed".into()))?;
    let l = chol.l();
    let linv = l
        .try_inverse()
        .ok_or_else(|| Error::NotPositiveDefinite("singular Cholesky factor".into()))?;
    Ok(linv.transpose())
}

/// Singular-value split of a matrix into kernel and co-kernel directions.
#[derive(Debug, Clone)]
pub struct RankSplit {
    pub rank: usize,
    pub threshold: f64,
    /// Descending singular values.
    pub singular_values: Vec<f64>,
    /// Orthonormal columns spanning the numerical kernel.
    pub kernel: DMatrix<f64>,
    /// Orthonormal columns spanning the orthogonal complement of the kernel.
    pub coimage: DMatrix<f64>,
    /// Orthonormal columns spanning the image.
    pub image: DMatrix<f64>,
}

/// Rank, kernel and image of `a` with relative cutoff `tol * sigma_max`.
///
/// With `tol = None` the default cutoff is used and a singular value within a
/// factor of 10 of the cutoff is reported as [`Error::AmbiguousRank`].
pub fn rank_split(a: &DMatrix<f64>, tol: Option<f64>) -> Result<RankSplit> {
    let (m, n) = a.shape();
    // Right singular vectors from a Jacobi decomposition of AᵀA: exactly
    // orthonormal even on repeated singular values, where the left factor of
    // a direct SVD is not. Singular values are recovered as |A v|, which is
    // accurate to rounding in |A| rather than its square root.
    let (_, v) = symmetric_eigen(&(a.transpose() * a))?;
    let images: Vec<DVector<f64>> = (0..n).map(|k| a * v.column(k)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| images[j].norm().total_cmp(&images[i].norm()));
    let sv: Vec<f64> = order.iter().map(|&i| images[i].norm()).collect();
    let smax = sv.first().copied().unwrap_or(0.0);
    let rel = tol.unwrap_or(RANK_TOL);
    let threshold = rel * smax;
    if tol.is_none() && smax > 0.0 {
        let near: Vec<f64> = sv
            .iter()
            .copied()
            .filter(|s| *s > threshold / 10.0 && *s < threshold * 10.0)
            .collect();
        if !near.is_empty() {
            return Err(Error::AmbiguousRank { threshold, near });
        }
    }
    let rank = if smax == 0.0 {
        0
    } else {
        sv.iter().filter(|s| **s > threshold).count()
    };
    let kernel = DMatrix::from_fn(n, n - rank, |r, c| v[(r, order[rank + c])]);
    let coimage = DMatrix::from_fn(n, rank, |r, c| v[(r, order[c])]);
    let image = DMatrix::from_fn(m, rank, |r, c| images[order[c]][r] / sv[c]);
    Ok(RankSplit {
        rank,
        threshold,
        singular_values: sv,
        kernel,
        coimage,
        image,
    })
}

/// Orthonormal basis of the column span of `a` (default cutoff, no guard).
pub fn column_basis(a: &DMatrix<f64>) -> DMatrix<f64> {
    rank_split(a, Some(RANK_TOL))
        .expect("explicit tolerance never reports ambiguity")
        .image
}

/// Cosines of the principal angles between two subspaces given by
/// orthonormal columns, in descending order.
pub fn principal_cosines(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    if a.ncols() == 0 || b.ncols() == 0 {
        return Vec::new();
    }
    let m = a.transpose() * b;
    let mut s: Vec<f64> = m.svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Largest principal angle; `π/2` when the dimensions differ.
pub fn subspace_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    if a.ncols() != b.ncols() {
        return std::f64::consts::FRAC_PI_2;
    }
    if a.ncols() == 0 {
        return 0.0;
    }
    let cos = principal_cosines(a, b);
    let smallest = cos.last().copied().unwrap_or(0.0).clamp(-1.0, 1.0);
    // acos is ill-conditioned near 1; use the sine from 1 - c^2
    (1.0 - smallest * smallest).max(0.0).sqrt().asin()
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, Default)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn new(ncols: usize) -> Self {
        CsrMatrix {
            nrows: 0,
            ncols,
            indptr: vec![0],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Appends a row given as `(column, value)` pairs; duplicates add up.
    pub fn push_row(&mut self, entries: &[(usize, f64)]) {
        for &(c, v) in entries {
            debug_assert!(c < self.ncols);
            if v != 0.0 {
                self.indices.push(c);
                self.values.push(v);
            }
        }
        self.indptr.push(self.indices.len());
        self.nrows += 1;
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.nrows)
            .map(|r| {
                (self.indptr[r]..self.indptr[r + 1])
                    .map(|k| self.values[k] * x[self.indices[k]])
                    .sum()
            })
            .collect()
    }

    pub fn mul_transpose_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ncols];
        for (r, yr) in y.iter().enumerate() {
            for k in self.indptr[r]..self.indptr[r + 1] {
                out[self.indices[k]] += self.values[k] * yr;
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                m[(r, self.indices[k])] += self.values[k];
            }
        }
        m
    }
}

#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub x: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    /// Whether the stopping test was met before `max_iter`.
    pub converged: bool,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Conjugate gradients on the normal equations, without forming them.
///
/// Stops when `|A^T r| <= tol * |A^T b|` or after `max_iter` steps (the
/// last iterate is returned, flagged as not converged). Rank-deficient systems are fine:
/// from a zero start the iterates stay in the row space.
pub fn cgls(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<LeastSquares> {
    assert_eq!(a.nrows, b.len());
    let mut x = vec![0.0; a.ncols];
    let mut r = b.to_vec();
    let mut s = a.mul_transpose_vec(&r);
    let s0 = norm(&s);
    if s0 == 0.0 {
        return Ok(LeastSquares {
            residual_norm: norm(&r),
            x,
            iterations: 0,
            converged: true,
        });
    }
    let mut p = s.clone();
    let mut gamma = s0 * s0;
    for it in 1..=max_iter {
        let q = a.mul_vec(&p);
        let qq: f64 = q.iter().map(|v| v * v).sum();
        if qq == 0.0 || !qq.is_finite() {
            return Err(Error::Probe(format!(
                "normal equations are singular along a search direction (iteration {it})"
            )));
        }
        let alpha = gamma / qq;
        for (xi, pi) in x.iter_mut().zip(&p) {
            *xi += alpha * pi;
        }
        for (ri, qi) in r.iter_mut().zip(&q) {
            *ri -= alpha * qi;
        }
        s = a.mul_transpose_vec(&r);
        let gamma_new: f64 = s.iter().map(|v| v * v).sum();
        if gamma_new.sqrt() <= tol * s0 {
            return Ok(LeastSquares {
                residual_norm: norm(&r),
                x,
                iterations: it,
                converged: true,
            });
        }
        let beta = gamma_new / gamma;
        gamma = gamma_new;
        for (pi, si) in p.iter_mut().zip(&s) {
            *pi = si + beta * *pi;
        }
    }
    Ok(LeastSquares {
        residual_norm: norm(&r),
        x,
        iterations: max_iter,
        converged: false,
    })
}

/// Dense least-squares fallback for small systems; returns the residual norm.
pub fn dense_least_squares_residual(a: &DMatrix<f64>, b: &DVector<f64>) -> f64 {
    let svd = a.clone().svd(true, true);
    let x = svd
        .solve(b, RANK_TOL * svd.singular_values.max())
        .expect("SVD computed with U and V");
    (a * x - b).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn jacobi_diagonalises_small_matrix() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0, 5.0]);
        let (vals, vecs) = symmetric_eigen(&a).unwrap();
        let want = [1.0, 3.0, 5.0];
        for (v, w) in vals.iter().zip(want) {
            assert!((v - w).abs() < 1e-13);
        }
        let recon = &vecs * DMatrix::from_diagonal(&DVector::from_vec(vals)) * vecs.transpose();
        assert!((recon - a).amax() < 1e-13);
    }

    #[test]
    fn jacobi_rejects_nonsymmetric() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(symmetric_eigen(&a).is_err());
    }

    #[test]
    fn grouping_merges_close_values() {
        let g = group_eigenvalues(&[0.0, 1e-9, 0.5, 0.5 + 1e-8, 2.0], 1e-7);
        assert_eq!(g.len(), 3);
        assert_eq!(g[0].1, 2);
        assert_eq!(g[1].1, 2);
        assert_eq!(g[2].1, 1);
    }

    #[test]
    fn frame_is_orthonormal() {
        let g = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 2.0]);
        let e = orthonormal_frame(&g).unwrap();
        assert!((e.transpose() * &g * &e - DMatrix::identity(2, 2)).amax() < 1e-14);
    }

    #[test]
    fn kernel_of_rank_one_matrix() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        let s = rank_split(&a, None).unwrap();
        assert_eq!(s.rank, 1);
        assert_eq!(s.kernel.ncols(), 2);
        assert!((&a * &s.kernel).amax() < 1e-12);
    }

    #[test]
    fn ambiguous_rank_is_reported() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2e-9]));
        assert!(matches!(rank_split(&a, None), Err(Error::AmbiguousRank { .. })));
        assert_eq!(rank_split(&a, Some(1e-6)).unwrap().rank, 1);
    }

    #[test]
    fn cgls_matches_dense_solution() {
        let mut a = CsrMatrix::new(2);
        a.push_row(&[(0, 1.0)]);
        a.push_row(&[(1, 1.0)]);
        a.push_row(&[(0, 1.0), (1, 1.0)]);
        let b = [1.0, 1.0, 0.0];
        let sol = cgls(&a, &b, 1e-14, 100).unwrap();
        let dense = dense_least_squares_residual(&a.to_dense(), &DVector::from_row_slice(&b));
        assert!((sol.residual_norm - dense).abs() < 1e-12);
        assert!((sol.x[0] - 1.0 / 3.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn principal_angle_of_rotated_line(theta in 0.0f64..1.5) {
            let a = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
            let b = DMatrix::from_column_slice(2, 1, &[theta.cos(), theta.sin()]);
            prop_assert!((subspace_distance(&a, &b) - theta).abs() < 1e-9);
        }

        #[test]
        fn jacobi_reconstructs(entries in prop::collection::vec(-1.0f64..1.0, 10)) {
            let mut k = 0;
            let mut a = DMatrix::zeros(4, 4);
            for i in 0..4 {
                for j in i..4 {
                    a[(i, j)] = entries[k];
                    a[(j, i)] = entries[k];
                    k += 1;
                }
            }
            let (vals, vecs) = symmetric_eigen(&a).unwrap();
            let recon = &vecs * DMatrix::from_diagonal(&DVector::from_vec(vals.clone())) * vecs.transpose();
            prop_assert!((recon - &a).amax() < 1e-11);
            prop_assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
