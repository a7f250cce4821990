//! Pointwise curvature algebra: the homomorphism `ℛ: Λ² → Riemann`, the
//! split `Λ² = K ⊕ C`, the curvature operator and the Lie triple identity.
//!
//! Most computations run in an orthonormal frame of the model metric, where
//! raised and lowered components agree. Two-form coefficient vectors are
//! always frame coefficients in [`two_form_basis`] order.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{group_eigenvalues, rank_split, symmetric_eigen, RankSplit};
use crate::models::{mixed_riemann, CurvatureModel, FactorKind};
use crate::tensor::{
    two_form_basis, two_form_coeffs, two_form_from_coeffs, Metric, PointTensor,
    Tensor, Variance,
};

/// Multiplicity grouping tolerance for curvature spectra.
pub const EIGEN_GROUP_TOL: f64 = 1e-7;

/// `R_ab^e_[c ω_d]e` from the mixed curvature `R_ab^e_c` (slots `[a,b,e,c]`).
pub fn curvature_annihilation(mixed: &PointTensor, omega: &PointTensor) -> PointTensor {
    let n = mixed.dim();
    PointTensor::lower(n, 4, |i| {
        let (a, b, c, d) = (i[0], i[1], i[2], i[3]);
        let mut s = 0.0;
        for e in 0..n {
            s += mixed.get(&[a, b, e, c]) * omega.get(&[d, e])
                - mixed.get(&[a, b, e, d]) * omega.get(&[c, e]);
        }
        0.5 * s
    })
}

/// `ℛ(μ)_abcd = 2R_ab^e_[c μ_d]e + 2R_cd^e_[a μ_b]e` without input checks.
pub fn curvature_hom_raw(mixed: &PointTensor, mu: &PointTensor) -> PointTensor {
    let t = curvature_annihilation(mixed, mu);
    PointTensor::lower(mixed.dim(), 4, |i| {
        2.0 * (t.get(&[i[0], i[1], i[2], i[3]]) + t.get(&[i[2], i[3], i[0], i[1]]))
    })
}

fn antisymmetry_defect(mu: &PointTensor) -> f64 {
    mu.add(&mu.permute(&[1, 0])).max_abs()
}

/// `ℛ(μ)` for a two-form `μ`.
pub fn curvature_homomorphism(model: &CurvatureModel, mu: &PointTensor) -> Result<PointTensor> {
    if mu.rank() != 2 || mu.dim() != model.dim {
        return Err(Error::Shape(format!(
            "expected a two-form in dimension {}",
            model.dim
        )));
    }
    let defect = antisymmetry_defect(mu);
    if defect > 1e-12 * (1.0 + mu.max_abs()) {
        return Err(Error::NotAntisymmetric(defect));
    }
    Ok(curvature_hom_raw(&model.mixed(), mu))
}

/// Orthonormal frame `E` of the model metric with its inverse, and the
/// curvature in that frame.
pub struct Frame {
    pub e: DMatrix<f64>,
    pub e_inv: DMatrix<f64>,
    pub riemann: PointTensor,
}

impl Frame {
    pub fn of(model: &CurvatureModel) -> Frame {
        let e = model.metric.orthonormal_frame();
        let e_inv = e.clone().try_inverse().expect("frame is invertible");
        let riemann = model.riemann.in_frame(&e);
        Frame { e, e_inv, riemann }
    }

    /// Coordinate components of a frame two-form given by coefficients.
    pub fn two_form(&self, coeffs: &[f64]) -> PointTensor {
        two_form_from_coeffs(self.e.nrows(), coeffs).in_frame(&self.e_inv)
    }

    /// Frame coefficients of a coordinate two-form.
    pub fn coeffs(&self, omega: &PointTensor) -> Vec<f64> {
        two_form_coeffs(&omega.in_frame(&self.e))
    }
}

/// Matrix of `ℛ` in a frame where the metric is the identity: column `I` is
/// `ℛ(e_I)` flattened.
pub fn hom_matrix_euclidean(riemann: &PointTensor) -> DMatrix<f64> {
    let n = riemann.dim();
    let basis = two_form_basis(n);
    let mixed = mixed_riemann(riemann, &Metric::euclidean(n));
    let mut m = DMatrix::zeros(n.pow(4), basis.len());
    for k in 0..basis.len() {
        let mut w = vec![0.0; basis.len()];
        w[k] = 1.0;
        let img = curvature_hom_raw(&mixed, &two_form_from_coeffs(n, &w));
        m.column_mut(k).copy_from_slice(img.data());
    }
    m
}

/// `K = ker ℛ` and `C = K^⊥`.
#[derive(Debug, Clone)]
pub struct TwoFormSplit {
    /// Orthonormal frame-coefficient columns spanning `K`.
    pub k_coeffs: DMatrix<f64>,
    /// Orthonormal frame-coefficient columns spanning `C`.
    pub c_coeffs: DMatrix<f64>,
    /// Coordinate two-forms spanning `K`.
    pub k_basis: Vec<PointTensor>,
    /// Coordinate two-forms spanning `C`.
    pub c_basis: Vec<PointTensor>,
    pub singular_values: Vec<f64>,
    pub threshold: f64,
}

impl TwoFormSplit {
    pub fn dim_k(&self) -> usize {
        self.k_coeffs.ncols()
    }

    pub fn dim_c(&self) -> usize {
        self.c_coeffs.ncols()
    }

    pub fn projector_k(&self) -> DMatrix<f64> {
        &self.k_coeffs * self.k_coeffs.transpose()
    }

    pub fn projector_c(&self) -> DMatrix<f64> {
        &self.c_coeffs * self.c_coeffs.transpose()
    }
}

/// Splits `Λ²` by thresholding the singular values of `ℛ`. `tol` is relative
/// to the largest singular value; `None` uses the default cutoff with the
/// ambiguity guard.
pub fn split_two_forms(model: &CurvatureModel, tol: Option<f64>) -> Result<TwoFormSplit> {
    let frame = Frame::of(model);
    let m = hom_matrix_euclidean(&frame.riemann);
    let RankSplit {
        kernel,
        coimage,
        singular_values,
        threshold,
        ..
    } = rank_split(&m, tol)?;
    let forms = |cols: &DMatrix<f64>| {
        cols.column_iter()
            .map(|c| frame.two_form(c.as_slice()))
            .collect::<Vec<_>>()
    };
    Ok(TwoFormSplit {
        k_basis: forms(&kernel),
        c_basis: forms(&coimage),
        k_coeffs: kernel,
        c_coeffs: coimage,
        singular_values,
        threshold,
    })
}

/// Matrix of `ω_ab ↦ R_ab^cd ω_cd` on frame coefficients: `A_IJ = 2 R_abcd`.
pub fn curvature_operator_matrix(model: &CurvatureModel) -> DMatrix<f64> {
    operator_matrix_euclidean(&Frame::of(model).riemann)
}

fn operator_matrix_euclidean(riemann: &PointTensor) -> DMatrix<f64> {
    let basis = two_form_basis(riemann.dim());
    DMatrix::from_fn(basis.len(), basis.len(), |i, j| {
        let ((a, b), (c, d)) = (basis[i], basis[j]);
        2.0 * riemann.get(&[a, b, c, d])
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// `(eigenvalue, multiplicity)`, ascending.
    pub groups: Vec<(f64, usize)>,
    /// Frame-coefficient eigenvectors, one per eigenvalue.
    pub eigenforms: Vec<Vec<f64>>,
    /// `max ‖A ω − λ ω‖`.
    pub residual: f64,
    /// Eigenvalues lie in `[0, 2]` (positive scalar curvature) or `[−2, 0]`.
    pub all_in_bounds: bool,
    /// An eigenvalue `±2` occurs and its eigenspace is spanned by Kähler forms.
    pub top_is_kahler: bool,
    pub operator: String,
}

pub(crate) fn sorted_eigen(a: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>, f64)> {
    let (values, vectors) = symmetric_eigen(a)?;
    let mut residual: f64 = 0.0;
    for (k, lambda) in values.iter().enumerate() {
        let v = vectors.column(k);
        residual = residual.max((a * v - v * *lambda).amax());
    }
    Ok((values, vectors, residual))
}

/// Symmetric eigendecomposition of the curvature operator.
pub fn curvature_operator_spectrum(model: &CurvatureModel) -> Result<SpectrumReport> {
    let a = curvature_operator_matrix(model);
    let (values, vectors, residual) = sorted_eigen(&a)?;
    let sign = if model.scalar_curvature() < 0.0 { -1.0 } else { 1.0 };
    let bound_tol = 1e-9;
    let all_in_bounds = values
        .iter()
        .all(|&l| sign * l >= -bound_tol && sign * l <= 2.0 + bound_tol);
    let top: Vec<usize> = (0..values.len())
        .filter(|&k| (values[k] - 2.0 * sign).abs() < EIGEN_GROUP_TOL)
        .collect();
    let top_is_kahler = if top.is_empty() {
        false
    } else {
        let frame = Frame::of(model);
        let kahler = kahler_detect(model);
        let cols: Vec<Vec<f64>> = kahler.iter().map(|j| frame.coeffs(j)).collect();
        let span = DMatrix::from_fn(values.len(), cols.len(), |r, c| cols[c][r]);
        let eig = vectors.select_columns(&top);
        cols.len() == top.len()
            && crate::linalg::subspace_distance(&crate::linalg::column_basis(&span), &eig) < 1e-6
    };
    Ok(SpectrumReport {
        groups: group_eigenvalues(&values, EIGEN_GROUP_TOL),
        eigenforms: vectors
            .column_iter()
            .map(|c| c.iter().copied().collect())
            .collect(),
        eigenvalues: values,
        residual,
        all_in_bounds,
        top_is_kahler,
        operator: "ω_ab ↦ R_ab^cd ω_cd".into(),
    })
}

/// Norm of `R_ab^e_[c R_d]e^f_g + R_cd^e_[a R_b]e^f_g` for a curvature
/// tensor in an orthonormal frame.
pub fn lts_residual_raw(riemann: &PointTensor) -> f64 {
    let n = riemann.dim();
    let mixed = mixed_riemann(riemann, &Metric::euclidean(n));
    let mut total = 0.0;
    for f in 0..n {
        for g in 0..n {
            let mu = PointTensor::lower(n, 2, |i| *riemann.get(&[i[0], i[1], f, g]));
            let t = curvature_hom_raw(&mixed, &mu);
            total += 0.25 * t.dot(&t);
        }
    }
    total.sqrt()
}

/// Lie triple system residual of a model.
pub fn lts_residual(model: &CurvatureModel) -> f64 {
    lts_residual_raw(&Frame::of(model).riemann)
}

fn require_unit_ricci(model: &CurvatureModel) -> Result<()> {
    let defect = model.ricci_defect(1.0);
    if defect > 1e-9 {
        return Err(Error::NotUnitRicci(defect));
    }
    Ok(())
}

/// Norm of `R_abcd − ½R_ab^ef R_cdef − R_a^ef_c R_befd + R_b^ef_c R_aefd`.
pub fn traced_identity_residual(model: &CurvatureModel) -> Result<f64> {
    require_unit_ricci(model)?;
    let r = Frame::of(model).riemann;
    let n = model.dim;
    let t = PointTensor::lower(n, 4, |i| {
        let (a, b, c, d) = (i[0], i[1], i[2], i[3]);
        let mut s = *r.get(&[a, b, c, d]);
        for e in 0..n {
            for f in 0..n {
                s -= 0.5 * r.get(&[a, b, e, f]) * r.get(&[c, d, e, f]);
                s -= r.get(&[a, e, f, c]) * r.get(&[b, e, f, d]);
                s += r.get(&[b, e, f, c]) * r.get(&[a, e, f, d]);
            }
        }
        s
    });
    Ok(t.norm())
}

/// Inverse Ricci `S^ab`, or the degenerate-Ricci error naming flat factors.
fn inverse_ricci(model: &CurvatureModel) -> Result<DMatrix<f64>> {
    let ric = model.ricci().to_matrix();
    let frame = Frame::of(model);
    let ric_frame = frame.e.transpose() * &ric * &frame.e;
    let (values, _) = symmetric_eigen(&ric_frame)?;
    let largest = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let smallest = values.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if largest == 0.0 || smallest <= 1e-9 * largest {
        let flat: Vec<String> = model
            .factors
            .iter()
            .filter(|f| f.kind == FactorKind::Flat)
            .map(|f| format!("flat factor of dimension {} at offset {}", f.dim, f.offset))
            .collect();
        let detail = if flat.is_empty() {
            format!("smallest eigenvalue {smallest:e}")
        } else {
            flat.join(", ")
        };
        return Err(Error::DegenerateRicci(detail));
    }
    Ok(ric.try_inverse().expect("nondegenerate Ricci is invertible"))
}

/// `S_ab^cd = R_ab^c_e S^ed` with `S^ab` the inverse of the Ricci tensor;
/// slots `[a, b, c↑, d↑]`. Invariant under constant rescaling of the metric.
pub fn s_tensor(model: &CurvatureModel) -> Result<PointTensor> {
    let s = inverse_ricci(model)?;
    let mixed = model.mixed();
    let n = model.dim;
    Ok(Tensor::from_fn(
        n,
        vec![Variance::Lower, Variance::Lower, Variance::Upper, Variance::Upper],
        |i| {
            let (a, b, c, d) = (i[0], i[1], i[2], i[3]);
            (0..n)
                .map(|e| mixed.get(&[a, b, c, e]) * s[(e, d)])
                .sum()
        },
    ))
}

/// `S_abcd = S_ab^ef g_ec g_fd`, which carries the Riemann symmetries.
pub fn s_tensor_lowered(model: &CurvatureModel) -> Result<PointTensor> {
    let s = s_tensor(model)?;
    let g = model.metric.matrix();
    let n = model.dim;
    Ok(PointTensor::lower(n, 4, |i| {
        let (a, b, c, d) = (i[0], i[1], i[2], i[3]);
        let mut acc = 0.0;
        for e in 0..n {
            for f in 0..n {
                acc += s.get(&[a, b, e, f]) * g[(e, c)] * g[(f, d)];
            }
        }
        acc
    }))
}

/// Eigenvalues of `ω_ab ↦ S_ab^cd ω_cd`, ascending.
pub fn s_operator_spectrum(model: &CurvatureModel) -> Result<Vec<f64>> {
    let lowered = s_tensor_lowered(model)?;
    let frame = Frame::of(model);
    let a = operator_matrix_euclidean(&lowered.in_frame(&frame.e));
    let asym = (&a - a.transpose()).amax();
    if asym > 1e-10 * (1.0 + a.amax()) {
        return Err(Error::Shape(format!(
            "S-operator is not self-adjoint (defect {asym:e})"
        )));
    }
    Ok(symmetric_eigen(&a)?.0)
}

/// Parallel Kähler-form candidates, one per Hermitian factor, normalized so
/// that `J_a^c J_c^b = −δ_a^b` on the factor.
pub fn kahler_detect(model: &CurvatureModel) -> Vec<PointTensor> {
    let mut out = Vec::new();
    let n = model.dim;
    for factor in &model.factors {
        if factor.kind == FactorKind::Flat || factor.dim < 2 {
            continue;
        }
        let Ok(sub) = model.factor_model(factor) else {
            continue;
        };
        let Ok(spec) = s_tensor_lowered(&sub) else {
            continue;
        };
        let frame = Frame::of(&sub);
        let a = operator_matrix_euclidean(&spec.in_frame(&frame.e));
        let Ok((values, vectors, _)) = sorted_eigen(&a) else {
            continue;
        };
        let top: Vec<usize> = (0..values.len())
            .filter(|&k| (values[k] - 2.0).abs() < EIGEN_GROUP_TOL)
            .collect();
        if top.len() != 1 {
            continue;
        }
        let coeffs: Vec<f64> = vectors.column(top[0]).iter().copied().collect();
        // a unit coefficient vector of a complex structure has norm √(dim/2)
        let scaled: Vec<f64> = coeffs
            .iter()
            .map(|c| c * (factor.dim as f64 / 2.0).sqrt())
            .collect();
        let omega_frame = two_form_from_coeffs(factor.dim, &scaled);
        let m = omega_frame.to_matrix();
        let square = (&m * &m + DMatrix::identity(factor.dim, factor.dim)).amax();
        let omega = omega_frame.in_frame(&frame.e_inv);
        let parallel = curvature_annihilation(&sub.mixed(), &omega).max_abs();
        if square > 1e-8 || parallel > 1e-8 * (1.0 + sub.riemann.max_abs()) {
            continue;
        }
        let o = factor.offset;
        out.push(PointTensor::lower(n, 2, |i| {
            let (a, b) = (i[0], i[1]);
            if (o..o + factor.dim).contains(&a) && (o..o + factor.dim).contains(&b) {
                *omega.get(&[a - o, b - o])
            } else {
                0.0
            }
        }));
    }
    out
}

/// Kernel test for a linear condition on `X ∈ Λ¹ ⊗ C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelCheck {
    pub unknowns: usize,
    pub equations: usize,
    /// Smallest singular value of the system; `None` when `C = 0`.
    pub min_singular_value: Option<f64>,
}

impl KernelCheck {
    pub fn trivial(&self, tol: f64) -> bool {
        self.min_singular_value.is_none_or(|s| s > tol)
    }
}

/// Frame components `X_abc = Σ y_{a,k} C_k(bc)` for each unknown.
fn lambda1_c_basis(split: &TwoFormSplit, n: usize) -> Vec<PointTensor> {
    let mut out = Vec::new();
    for a0 in 0..n {
        for k in 0..split.dim_c() {
            let coeffs: Vec<f64> = split.c_coeffs.column(k).iter().copied().collect();
            let c = two_form_from_coeffs(n, &coeffs);
            out.push(PointTensor::lower(n, 3, |i| {
                if i[0] == a0 {
                    *c.get(&[i[1], i[2]])
                } else {
                    0.0
                }
            }));
        }
    }
    out
}

fn kernel_check(
    model: &CurvatureModel,
    tol: Option<f64>,
    apply: impl Fn(&PointTensor, &PointTensor, &PointTensor) -> Vec<f64>,
) -> Result<KernelCheck> {
    let split = split_two_forms(model, tol)?;
    let frame = Frame::of(model);
    let r = &frame.riemann;
    let ric = {
        let e = &frame.e;
        let m = e.transpose() * model.ricci().to_matrix() * e;
        PointTensor::from_matrix(&m, [Variance::Lower, Variance::Lower])
    };
    let basis = lambda1_c_basis(&split, model.dim);
    if basis.is_empty() {
        return Ok(KernelCheck {
            unknowns: 0,
            equations: 0,
            min_singular_value: None,
        });
    }
    let cols: Vec<Vec<f64>> = basis.iter().map(|x| apply(r, &ric, x)).collect();
    let rows = cols[0].len();
    let m = DMatrix::from_fn(rows, cols.len(), |i, j| cols[j][i]);
    let scale = r.max_abs().max(1e-300);
    let sv = m.svd(false, false).singular_values;
    let min = sv.iter().fold(f64::INFINITY, |acc, s| acc.min(*s)) / scale;
    Ok(KernelCheck {
        unknowns: cols.len(),
        equations: rows,
        min_singular_value: Some(if cols.len() > rows { 0.0 } else { min }),
    })
}

/// `R_b^d X_ade − R_a^d X_bde − R_ab^cd X_cde + R_ab^d_e X^c_cd` on `Λ¹ ⊗ C`.
pub fn trace_equation_check(model: &CurvatureModel, tol: Option<f64>) -> Result<KernelCheck> {
    kernel_check(model, tol, |r, ric, x| {
        let n = r.dim();
        let trace: Vec<f64> = (0..n)
            .map(|d| (0..n).map(|c| x.get(&[c, c, d])).sum())
            .collect();
        PointTensor::lower(n, 3, |i| {
            let (a, b, e) = (i[0], i[1], i[2]);
            let mut s = 0.0;
            for d in 0..n {
                s += ric.get(&[b, d]) * x.get(&[a, d, e]) - ric.get(&[a, d]) * x.get(&[b, d, e]);
                s += r.get(&[a, b, d, e]) * trace[d];
                for c in 0..n {
                    s -= r.get(&[a, b, c, d]) * x.get(&[c, d, e]);
                }
            }
            s
        })
        .into_data()
    })
}

/// The untraced system
/// `R_ab^f_d X_cef + R_ca^f_d X_bef + R_bc^f_d X_aef − (d ↔ e) = 0`.
pub fn full_equation_check(model: &CurvatureModel, tol: Option<f64>) -> Result<KernelCheck> {
    kernel_check(model, tol, |r, _, x| {
        let n = r.dim();
        let mut out = Vec::with_capacity(n.pow(5));
        let term = |a: usize, b: usize, c: usize, d: usize, e: usize| -> f64 {
            (0..n)
                .map(|f| {
                    r.get(&[a, b, f, d]) * x.get(&[c, e, f])
                        + r.get(&[c, a, f, d]) * x.get(&[b, e, f])
                        + r.get(&[b, c, f, d]) * x.get(&[a, e, f])
                })
                .sum()
        };
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        for e in 0..n {
                            out.push(term(a, b, c, d, e) - term(a, b, c, e, d));
                        }
                    }
                }
            }
        }
        out
    })
}

/// Largest `|R_a^cdb X_cdb|` over a basis of `Λ¹ ⊗ C`, relative to `‖R‖`.
pub fn orthogonality_residual(model: &CurvatureModel, tol: Option<f64>) -> Result<f64> {
    let split = split_two_forms(model, tol)?;
    let r = Frame::of(model).riemann;
    let n = model.dim;
    let scale = r.max_abs().max(1e-300);
    let mut worst: f64 = 0.0;
    for x in lambda1_c_basis(&split, n) {
        for a in 0..n {
            let mut s = 0.0;
            for c in 0..n {
                for d in 0..n {
                    for b in 0..n {
                        s += r.get(&[a, c, d, b]) * x.get(&[c, d, b]);
                    }
                }
            }
            worst = worst.max(s.abs() / scale);
        }
    }
    Ok(worst)
}

/// `J^bc R_bc^d_a − 2 J^d_a` (max-abs) for a unit-Ricci model with a
/// Kähler form.
pub fn kahler_trace_residual(model: &CurvatureModel) -> Result<f64> {
    require_unit_ricci(model)?;
    let j = model
        .kahler
        .as_ref()
        .ok_or_else(|| Error::ChartKind("model carries no Kähler form".into()))?;
    let frame = Frame::of(model);
    let jf = j.in_frame(&frame.e);
    let r = &frame.riemann;
    let n = model.dim;
    let t = PointTensor::lower(n, 2, |i| {
        let (d, a) = (i[0], i[1]);
        let mut s = -2.0 * jf.get(&[d, a]);
        for b in 0..n {
            for c in 0..n {
                s += jf.get(&[b, c]) * r.get(&[b, c, d, a]);
            }
        }
        s
    });
    Ok(t.max_abs())
}

/// Random tensor with the Riemann symmetries: the projection of i.i.d.
/// components drawn by `sample`.
pub fn random_riemann_tensor(dim: usize, mut sample: impl FnMut() -> f64) -> PointTensor {
    let raw = PointTensor::lower(dim, 4, |_| sample());
    crate::tensor::riemann_project(&raw).expect("rank-4 lower tensor")
}
