//! Algebraic curvature models at a basepoint and analytic coordinate charts.

mod chart;

pub use chart::{
    make_chart, make_chart_with, warped2d, ChartFactor, ChartGeometry, ChartKind, KillingField,
    WarpFunction,
};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::holonomy;
use crate::space::{Kind, SpaceSpec};
use crate::tensor::{lower_slots, riemann_project, Metric, PointTensor, Tensor, Variance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Sectional curvature of magnitude one (holomorphic sectional curvature
    /// one for Fubini–Study).
    UnitCurvature,
    /// `Ric = ±g`.
    UnitRicci,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorKind {
    Sphere,
    Hyperbolic,
    FubiniStudy,
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Factor {
    pub offset: usize,
    pub dim: usize,
    pub kind: FactorKind,
    /// Carries a parallel Kähler form.
    pub hermitian: bool,
}

/// Metric, curvature and optional Kähler form at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureModel {
    pub dim: usize,
    pub metric: Metric,
    /// `R_abcd`, all indices lower.
    pub riemann: PointTensor,
    /// `J_ab`, all indices lower.
    pub kahler: Option<PointTensor>,
    pub factors: Vec<Factor>,
    pub normalization: Normalization,
}

/// `κ (g_ac g_bd − g_bc g_ad)`.
pub fn constant_curvature_tensor(g: &PointTensor, kappa: f64) -> PointTensor {
    PointTensor::lower(g.dim(), 4, |i| {
        let (a, b, c, d) = (i[0], i[1], i[2], i[3]);
        kappa * (g.get(&[a, c]) * g.get(&[b, d]) - g.get(&[b, c]) * g.get(&[a, d]))
    })
}

/// `c (g_ac g_bd − g_bc g_ad + J_ac J_bd − J_bc J_ad + 2 J_ab J_cd)`.
pub fn fubini_study_tensor(g: &PointTensor, j: &PointTensor, c: f64) -> PointTensor {
    PointTensor::lower(g.dim(), 4, |i| {
        let (a, b, cc, d) = (i[0], i[1], i[2], i[3]);
        let gg = g.get(&[a, cc]) * g.get(&[b, d]) - g.get(&[b, cc]) * g.get(&[a, d]);
        let jj = j.get(&[a, cc]) * j.get(&[b, d]) - j.get(&[b, cc]) * j.get(&[a, d])
            + 2.0 * j.get(&[a, b]) * j.get(&[cc, d]);
        c * (gg + jj)
    })
}

/// Standard symplectic form with `J_{2k,2k+1} = 1`.
pub fn standard_kahler(dim: usize) -> PointTensor {
    PointTensor::lower(dim, 2, |i| {
        let (a, b) = (i[0], i[1]);
        if a % 2 == 0 && b == a + 1 {
            1.0
        } else if b % 2 == 0 && a == b + 1 {
            -1.0
        } else {
            0.0
        }
    })
}

/// `Ric_bd = g^ac R_abcd`.
pub fn ricci_of(riemann: &PointTensor, metric: &Metric) -> PointTensor {
    let n = riemann.dim();
    let gi = metric.g_inv();
    PointTensor::lower(n, 2, |i| {
        let (b, d) = (i[0], i[1]);
        let mut s = 0.0;
        for a in 0..n {
            for c in 0..n {
                s += gi.get(&[a, c]) * riemann.get(&[a, b, c, d]);
            }
        }
        s
    })
}

/// `R_ab^e_c = g^ef R_abfc`, stored in slot order `[a, b, e, c]`.
pub fn mixed_riemann(riemann: &PointTensor, metric: &Metric) -> PointTensor {
    let n = riemann.dim();
    let gi = metric.g_inv();
    Tensor::from_fn(
        n,
        vec![Variance::Lower, Variance::Lower, Variance::Upper, Variance::Lower],
        |i| {
            let (a, b, e, c) = (i[0], i[1], i[2], i[3]);
            (0..n)
                .map(|f| gi.get(&[e, f]) * riemann.get(&[a, b, f, c]))
                .sum()
        },
    )
}

fn unit_sign(kappa: f64) -> f64 {
    if kappa > 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Constant sectional curvature model in an orthonormal frame.
pub fn constant_curvature_model(
    n: usize,
    kappa: f64,
    normalization: Normalization,
) -> Result<CurvatureModel> {
    if n == 0 {
        return Err(Error::InvalidArgument("dimension must be at least 1".into()));
    }
    let k = match normalization {
        Normalization::UnitRicci => {
            if kappa == 0.0 || n == 1 {
                return Err(Error::FlatNormalization(format!(
                    "constant curvature {kappa} in dimension {n} has zero Ricci tensor"
                )));
            }
            unit_sign(kappa) / (n - 1) as f64
        }
        Normalization::UnitCurvature if kappa != 0.0 => unit_sign(kappa),
        _ => kappa,
    };
    let flat = n == 1 || k == 0.0;
    let kind = if flat {
        FactorKind::Flat
    } else if k > 0.0 {
        FactorKind::Sphere
    } else {
        FactorKind::Hyperbolic
    };
    let hermitian = !flat && n == 2;
    let metric = Metric::euclidean(n);
    let riemann = if n == 1 {
        PointTensor::zeros(1, lower_slots(4))
    } else {
        constant_curvature_tensor(metric.g(), k)
    };
    Ok(CurvatureModel {
        dim: n,
        riemann,
        kahler: hermitian.then(|| standard_kahler(2)),
        metric,
        factors: vec![Factor {
            offset: 0,
            dim: n,
            kind,
            hermitian,
        }],
        normalization,
    })
}

/// Fubini–Study curvature coefficient for a normalization.
pub(crate) fn fubini_study_coefficient(n_complex: usize, normalization: Normalization) -> f64 {
    match normalization {
        Normalization::UnitRicci => 1.0 / (2.0 * (n_complex as f64 + 1.0)),
        Normalization::UnitCurvature | Normalization::Custom => 0.25,
    }
}

/// Fubini–Study model on `CP^n` (real dimension `2n`) in a unitary frame.
pub fn fubini_study_model(n_complex: usize, normalization: Normalization) -> Result<CurvatureModel> {
    if n_complex == 0 {
        return Err(Error::InvalidArgument("complex dimension must be at least 1".into()));
    }
    let dim = 2 * n_complex;
    let metric = Metric::euclidean(dim);
    let j = standard_kahler(dim);
    let riemann = fubini_study_tensor(metric.g(), &j, fubini_study_coefficient(n_complex, normalization));
    Ok(CurvatureModel {
        dim,
        metric,
        riemann,
        kahler: Some(j),
        factors: vec![Factor {
            offset: 0,
            dim,
            kind: FactorKind::FubiniStudy,
            hermitian: true,
        }],
        normalization,
    })
}

/// Flat model `R^n`.
pub fn flat_model(n: usize) -> Result<CurvatureModel> {
    constant_curvature_model(n, 0.0, Normalization::Custom)
}

fn block_diag(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(n, n);
    let mut off = 0;
    for b in blocks {
        out.view_mut((off, off), b.shape()).copy_from(b);
        off += b.nrows();
    }
    out
}

/// Riemannian product; the curvature is the direct sum.
pub fn product_model(models: &[CurvatureModel]) -> Result<CurvatureModel> {
    match models {
        [] => return Err(Error::EmptyProduct),
        [one] => return Ok(one.clone()),
        _ => {}
    }
    let dim: usize = models.iter().map(|m| m.dim).sum();
    let metric = Metric::new(&block_diag(
        &models.iter().map(|m| m.metric.matrix()).collect::<Vec<_>>(),
    ))?;
    let mut riemann = PointTensor::zeros(dim, lower_slots(4));
    let mut factors = Vec::new();
    let mut offset = 0;
    for m in models {
        let k = m.dim;
        for (flat, v) in m.riemann.data().iter().enumerate() {
            let idx = [
                flat / (k * k * k),
                flat / (k * k) % k,
                flat / k % k,
                flat % k,
            ];
            *riemann.get_mut(&idx.map(|i| i + offset)) = *v;
        }
        factors.extend(m.factors.iter().map(|f| Factor {
            offset: f.offset + offset,
            ..*f
        }));
        offset += k;
    }
    let kahler = if models.iter().all(|m| m.kahler.is_some()) {
        let blocks: Vec<DMatrix<f64>> = models
            .iter()
            .map(|m| m.kahler.as_ref().map(PointTensor::to_matrix).unwrap_or_default())
            .collect();
        Some(PointTensor::from_matrix(
            &block_diag(&blocks),
            [Variance::Lower, Variance::Lower],
        ))
    } else {
        None
    };
    let first = models[0].normalization;
    let normalization = if models.iter().all(|m| m.normalization == first) {
        first
    } else {
        Normalization::Custom
    };
    Ok(CurvatureModel {
        dim,
        metric,
        riemann,
        kahler,
        factors,
        normalization,
    })
}

/// Model of a parsed space with every curved factor normalized as requested.
/// A factor scale multiplies that factor's metric.
pub fn model_from_spec(spec: &SpaceSpec, normalization: Normalization) -> Result<CurvatureModel> {
    let mut parts = Vec::with_capacity(spec.factors.len());
    for f in &spec.factors {
        let m = match f.kind {
            _ if f.is_flat() => flat_model(f.real_dim())?,
            Kind::Sphere => constant_curvature_model(f.n, 1.0, normalization)?,
            Kind::Hyperbolic => constant_curvature_model(f.n, -1.0, normalization)?,
            Kind::ComplexProjective => fubini_study_model(f.n, normalization)?,
            Kind::Euclidean => unreachable!("euclidean factors are flat"),
        };
        parts.push(if f.scale != 1.0 { m.rescaled(f.scale)? } else { m });
    }
    product_model(&parts)
}

impl CurvatureModel {
    pub fn ricci(&self) -> PointTensor {
        ricci_of(&self.riemann, &self.metric)
    }

    /// `R_ab^e_c` in slot order `[a, b, e, c]`.
    pub fn mixed(&self) -> PointTensor {
        mixed_riemann(&self.riemann, &self.metric)
    }

    pub fn scalar_curvature(&self) -> f64 {
        let ric = self.ricci();
        let gi = self.metric.g_inv();
        ric.dot(gi)
    }

    /// `‖R‖² = R_abcd R^abcd`.
    pub fn riemann_norm_sq(&self) -> f64 {
        self.metric.inner(&self.riemann, &self.riemann)
    }

    pub fn has_flat_factor(&self) -> bool {
        self.factors.iter().any(|f| f.kind == FactorKind::Flat)
    }

    pub fn has_hermitian_factor(&self) -> bool {
        self.factors.iter().any(|f| f.hermitian)
    }

    /// `g ↦ c g`. `R_abcd` and `J_ab` scale by `c`, so `R_ab^c_d` and
    /// `J_a^b` are unchanged.
    pub fn rescaled(&self, c: f64) -> Result<CurvatureModel> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "metric scale must be positive, got {c}"
            )));
        }
        Ok(CurvatureModel {
            dim: self.dim,
            metric: Metric::new(&(self.metric.matrix() * c))?,
            riemann: self.riemann.scale(c),
            kahler: self.kahler.as_ref().map(|j| j.scale(c)),
            factors: self.factors.clone(),
            normalization: Normalization::Custom,
        })
    }

    /// Sub-model on one factor block.
    pub fn factor_model(&self, factor: &Factor) -> Result<CurvatureModel> {
        let (o, k) = (factor.offset, factor.dim);
        let g = self.metric.matrix().view((o, o), (k, k)).into_owned();
        let riemann = PointTensor::lower(k, 4, |i| {
            *self.riemann.get(&[i[0] + o, i[1] + o, i[2] + o, i[3] + o])
        });
        let kahler = if factor.hermitian {
            self.kahler
                .as_ref()
                .map(|j| PointTensor::lower(k, 2, |i| *j.get(&[i[0] + o, i[1] + o])))
        } else {
            None
        };
        Ok(CurvatureModel {
            dim: k,
            metric: Metric::new(&g)?,
            riemann,
            kahler,
            factors: vec![Factor { offset: 0, ..*factor }],
            normalization: self.normalization,
        })
    }

    /// Deviation of `Ric` from `sign · g` (max-abs).
    pub fn ricci_defect(&self, sign: f64) -> f64 {
        self.ricci().sub(&self.metric.g().scale(sign)).max_abs()
    }

    /// `J_a^c J_c^b + δ_a^b` (max-abs) and `R_ab^e_[c J_d]e` (max-abs).
    pub fn kahler_defects(&self) -> Option<(f64, f64)> {
        let j = self.kahler.as_ref()?;
        let n = self.dim;
        let jm = j.to_matrix() * self.metric.inverse_matrix();
        let square = (&jm * &jm + DMatrix::identity(n, n)).amax();
        let parallel = holonomy::curvature_annihilation(&self.mixed(), j).max_abs();
        Some((square, parallel))
    }

    /// Checks the invariants every constructed model must satisfy.
    pub fn validate(&self) -> Result<()> {
        let scale = 1.0 + self.riemann.max_abs();
        let sym = riemann_project(&self.riemann)?.sub(&self.riemann).max_abs();
        if sym > 1e-12 * scale {
            return Err(Error::Shape(format!(
                "curvature fails the Riemann symmetries by {sym:e}"
            )));
        }
        let lts = holonomy::lts_residual(self);
        if lts >= 1e-10 * scale * scale {
            return Err(Error::Shape(format!(
                "curvature is not a Lie triple system (residual {lts:e})"
            )));
        }
        if let Some((square, parallel)) = self.kahler_defects() {
            if square > 1e-12 || parallel > 1e-12 * scale {
                return Err(Error::Shape(format!(
                    "Kähler form defects: J² + 1 = {square:e}, R·J = {parallel:e}"
                )));
            }
        }
        Ok(())
    }
}
