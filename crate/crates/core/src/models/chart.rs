//! Coordinate charts whose metric components are evaluated as jets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    constant_curvature_tensor, fubini_study_tensor, CurvatureModel, Factor, FactorKind,
    Normalization,
};
use crate::error::{Error, Result};
use crate::jets::Jet;
use crate::space::{Kind, SpaceSpec};
use crate::tensor::{lower_slots, JetTensor, Metric, PointTensor, Tensor};

/// Warp factor `Ω(t)` of the metric `Ω²(t) dx² + dt²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WarpFunction {
    Cosh,
    ExpHalfSquare,
    One,
}

impl WarpFunction {
    pub fn eval(&self, t: &Jet) -> Jet {
        match self {
            WarpFunction::Cosh => t.cosh(),
            WarpFunction::ExpHalfSquare => (t * t).scale(0.5).exp(),
            WarpFunction::One => Jet::constant(t.num_vars(), t.order(), 1.0),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            WarpFunction::Cosh => "cosh",
            WarpFunction::ExpHalfSquare => "exp-half-square",
            WarpFunction::One => "one",
        }
    }
}

impl fmt::Display for WarpFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WarpFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cosh" => Ok(WarpFunction::Cosh),
            "exp-half-square" | "exp_half_square" => Ok(WarpFunction::ExpHalfSquare),
            "one" | "1" => Ok(WarpFunction::One),
            other => Err(Error::InvalidArgument(format!(
                "unknown warp function '{other}' (expected cosh, exp-half-square or one)"
            ))),
        }
    }
}

/// Coordinate model of one chart factor. `s2` multiplies the metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ChartKind {
    /// Stereographic: `4 s² / (1 + |x|²)² δ`, sectional curvature `1/s²`.
    Sphere { s2: f64 },
    /// Poincaré ball: `4 s² / (1 − |x|²)² δ`, sectional curvature `−1/s²`.
    Hyperbolic { s2: f64 },
    /// Affine chart with Kähler potential `s² log(1 + |z|²)`,
    /// `z_k = x_{2k} + i x_{2k+1}`.
    FubiniStudy { n: usize, s2: f64 },
    Flat { s2: f64 },
    /// `Ω²(t) dx² + dt²` in coordinates `(x, t)`.
    Warped(WarpFunction),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartFactor {
    pub offset: usize,
    pub dim: usize,
    pub kind: ChartKind,
}

impl ChartFactor {
    pub fn is_flat(&self) -> bool {
        matches!(self.kind, ChartKind::Flat { .. })
    }

    pub fn is_hermitian(&self) -> bool {
        match self.kind {
            ChartKind::Sphere { .. } | ChartKind::Hyperbolic { .. } => self.dim == 2,
            ChartKind::FubiniStudy { .. } => true,
            _ => false,
        }
    }
}

/// Product of analytic chart factors on concatenated coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartGeometry {
    pub num_coords: usize,
    pub factors: Vec<ChartFactor>,
    pub normalization: Normalization,
    pub label: String,
}

/// Chart with every curved factor normalized to `Ric = ±g`.
pub fn make_chart(spec: &SpaceSpec) -> Result<ChartGeometry> {
    make_chart_with(spec, Normalization::UnitRicci)
}

pub fn make_chart_with(spec: &SpaceSpec, normalization: Normalization) -> Result<ChartGeometry> {
    if spec.factors.is_empty() {
        return Err(Error::EmptyProduct);
    }
    let mut factors = Vec::new();
    let mut offset = 0;
    for f in &spec.factors {
        let dim = f.real_dim();
        let unit_ricci = normalization == Normalization::UnitRicci;
        let kind = match f.kind {
            _ if f.is_flat() => ChartKind::Flat { s2: f.scale },
            Kind::Sphere => ChartKind::Sphere {
                s2: f.scale * if unit_ricci { (f.n - 1) as f64 } else { 1.0 },
            },
            Kind::Hyperbolic => ChartKind::Hyperbolic {
                s2: f.scale * if unit_ricci { (f.n - 1) as f64 } else { 1.0 },
            },
            Kind::ComplexProjective => ChartKind::FubiniStudy {
                n: f.n,
                s2: f.scale * if unit_ricci { 2.0 * (f.n as f64 + 1.0) } else { 4.0 },
            },
            Kind::Euclidean => unreachable!("euclidean factors are flat"),
        };
        factors.push(ChartFactor { offset, dim, kind });
        offset += dim;
    }
    let scaled = spec.factors.iter().any(|f| f.scale != 1.0);
    Ok(ChartGeometry {
        num_coords: offset,
        factors,
        normalization: if scaled { Normalization::Custom } else { normalization },
        label: spec.to_string(),
    })
}

/// Two-dimensional warped product `Ω²(t) dx² + dt²`.
pub fn warped2d(omega: WarpFunction) -> ChartGeometry {
    ChartGeometry {
        num_coords: 2,
        factors: vec![ChartFactor {
            offset: 0,
            dim: 2,
            kind: ChartKind::Warped(omega),
        }],
        normalization: Normalization::Custom,
        label: format!("warped2d({omega})"),
    }
}

fn radius_sq(x: &[Jet]) -> Jet {
    let mut r2 = Jet::zero(x[0].num_vars(), x[0].order());
    for xi in x {
        r2.add_product(xi, xi);
    }
    r2
}

/// `J0` on real coordinates: `J0 e_{2k} = e_{2k+1}`, as `J0[row][col]`.
fn complex_structure(row: usize, col: usize) -> f64 {
    if row % 2 == 1 && col + 1 == row {
        1.0
    } else if col % 2 == 1 && row + 1 == col {
        -1.0
    } else {
        0.0
    }
}

impl ChartGeometry {
    pub fn dim(&self) -> usize {
        self.num_coords
    }

    pub fn has_flat_factor(&self) -> bool {
        self.factors.iter().any(ChartFactor::is_flat)
    }

    pub fn is_warped(&self) -> bool {
        self.factors
            .iter()
            .any(|f| matches!(f.kind, ChartKind::Warped(_)))
    }

    /// Constant-coefficient jets `x_i = p_i + h_i`, variables beyond the
    /// coordinates are left free.
    pub fn coordinate_jets(&self, point: &[f64], order: usize, nvars: usize) -> Vec<Jet> {
        (0..self.num_coords)
            .map(|i| Jet::variable(nvars, order, i, point[i]))
            .collect()
    }

    fn check_point(&self, point: &[f64]) -> Result<()> {
        if point.len() != self.num_coords {
            return Err(Error::Shape(format!(
                "chart {} has {} coordinates, got a point with {}",
                self.label,
                self.num_coords,
                point.len()
            )));
        }
        for f in &self.factors {
            if let ChartKind::Hyperbolic { .. } = f.kind {
                let r2: f64 = point[f.offset..f.offset + f.dim].iter().map(|x| x * x).sum();
                if r2 >= 1.0 {
                    return Err(Error::OutsideChart {
                        point: point.to_vec(),
                        reason: format!("|x| = {} on the Poincaré ball", r2.sqrt()),
                    });
                }
            }
        }
        Ok(())
    }

    /// Kähler potential of a Hermitian factor as a jet of the given order.
    fn potential(&self, factor: &ChartFactor, point: &[f64], order: usize, nvars: usize) -> Result<Jet> {
        let x: Vec<Jet> = (0..factor.dim)
            .map(|i| Jet::variable(nvars, order, factor.offset + i, point[factor.offset + i]))
            .collect();
        let r2 = radius_sq(&x);
        match factor.kind {
            ChartKind::FubiniStudy { s2, .. } => Ok((&r2 + 1.0).ln()?.scale(s2)),
            ChartKind::Sphere { s2 } if factor.dim == 2 => Ok((&r2 + 1.0).ln()?.scale(4.0 * s2)),
            ChartKind::Hyperbolic { s2 } if factor.dim == 2 => {
                Ok((&(-&r2) + 1.0).ln()?.scale(-4.0 * s2))
            }
            _ => Err(Error::ChartKind(format!(
                "factor at offset {} carries no Kähler form",
                factor.offset
            ))),
        }
    }

    /// Metric components `g_ab` as jets in `nvars ≥ num_coords` variables.
    pub fn metric_jets(&self, point: &[f64], order: usize, nvars: usize) -> Result<JetTensor> {
        self.check_point(point)?;
        let n = self.num_coords;
        let mut g: JetTensor = Tensor::from_fn(n, lower_slots(2), |_| Jet::zero(nvars, order));
        for f in &self.factors {
            let o = f.offset;
            let x: Vec<Jet> = (0..f.dim)
                .map(|i| Jet::variable(nvars, order, o + i, point[o + i]))
                .collect();
            let diag = |g: &mut JetTensor, c: &Jet| {
                for i in 0..f.dim {
                    *g.get_mut(&[o + i, o + i]) = c.clone();
                }
            };
            match f.kind {
                ChartKind::Flat { s2 } => diag(&mut g, &Jet::constant(nvars, order, s2)),
                ChartKind::Sphere { s2 } => {
                    let d = &radius_sq(&x) + 1.0;
                    diag(&mut g, &(&d * &d).recip()?.scale(4.0 * s2));
                }
                ChartKind::Hyperbolic { s2 } => {
                    let d = &(-&radius_sq(&x)) + 1.0;
                    diag(&mut g, &(&d * &d).recip()?.scale(4.0 * s2));
                }
                ChartKind::FubiniStudy { .. } => {
                    // g = ¼ (Hess K + J0ᵀ Hess K J0)
                    let k = self.potential(f, point, order + 2, nvars)?;
                    let grad: Vec<Jet> = (0..f.dim).map(|i| k.derivative(o + i)).collect();
                    let hess: Vec<Vec<Jet>> = grad
                        .iter()
                        .map(|gi| (0..f.dim).map(|j| gi.derivative(o + j)).collect())
                        .collect();
                    for a in 0..f.dim {
                        for b in 0..f.dim {
                            let mut acc = hess[a][b].clone();
                            for c in 0..f.dim {
                                for d in 0..f.dim {
                                    let w = complex_structure(c, a)
                                        * complex_structure(d, b);
                                    if w != 0.0 {
                                        acc.add_scaled(&hess[c][d], w);
                                    }
                                }
                            }
                            *g.get_mut(&[o + a, o + b]) = acc.scale(0.25);
                        }
                    }
                }
                ChartKind::Warped(omega) => {
                    let w = omega.eval(&x[1]);
                    *g.get_mut(&[o, o]) = &w * &w;
                    *g.get_mut(&[o + 1, o + 1]) = Jet::constant(nvars, order, 1.0);
                }
            }
        }
        Ok(g)
    }

    /// Metric at a point.
    pub fn metric_at(&self, point: &[f64]) -> Result<Metric> {
        let g = self.metric_jets(point, 0, self.num_coords)?;
        Metric::new(&g.values().to_matrix())
    }

    /// Index of the Hermitian factors in `factors`.
    pub fn hermitian_factors(&self) -> Vec<usize> {
        (0..self.factors.len())
            .filter(|&i| self.factors[i].is_hermitian())
            .collect()
    }

    /// Kähler form `J_ab = (J0ᵀ g)_ab` of one Hermitian factor, zero off
    /// that factor's block.
    pub fn kahler_jets(&self, factor: usize, point: &[f64], order: usize, nvars: usize) -> Result<JetTensor> {
        let f = self.hermitian_factor(factor)?;
        let g = self.metric_jets(point, order, nvars)?;
        let o = f.offset;
        Ok(Tensor::from_fn(self.num_coords, lower_slots(2), |i| {
            let mut acc = Jet::zero(nvars, order);
            let (a, b) = (i[0], i[1]);
            if (o..o + f.dim).contains(&a) && (o..o + f.dim).contains(&b) {
                for c in 0..f.dim {
                    let w = complex_structure(c, a - o);
                    if w != 0.0 {
                        acc.add_scaled(g.get(&[o + c, b]), w);
                    }
                }
            }
            acc
        }))
    }

    /// A one-form `φ` with `∇_[a φ_b] = J_ab` on one Hermitian factor:
    /// `φ_a = −½ ∂_b K J0^b_a`.
    pub fn kahler_primitive(&self, factor: usize, point: &[f64], order: usize, nvars: usize) -> Result<Vec<Jet>> {
        let f = self.hermitian_factor(factor)?;
        self.check_point(point)?;
        let k = self.potential(f, point, order + 1, nvars)?;
        let o = f.offset;
        let mut phi = vec![Jet::zero(nvars, order); self.num_coords];
        for a in 0..f.dim {
            for b in 0..f.dim {
                let w = complex_structure(b, a);
                if w != 0.0 {
                    phi[o + a].add_scaled(&k.derivative(o + b), -0.5 * w);
                }
            }
        }
        Ok(phi)
    }

    fn hermitian_factor(&self, factor: usize) -> Result<&ChartFactor> {
        match self.factors.get(factor) {
            Some(f) if f.is_hermitian() => Ok(f),
            _ => Err(Error::ChartKind(format!(
                "factor {factor} of {} is not Hermitian",
                self.label
            ))),
        }
    }

    /// The algebraic model matching the chart at `point`.
    pub fn model_at(&self, point: &[f64]) -> Result<CurvatureModel> {
        let metric = self.metric_at(point)?;
        let n = self.num_coords;
        let g = metric.g();
        let mut riemann = PointTensor::zeros(n, lower_slots(4));
        let mut factors = Vec::new();
        let mut kahler_blocks = Vec::new();
        for (fi, f) in self.factors.iter().enumerate() {
            let o = f.offset;
            let gb = PointTensor::lower(f.dim, 2, |i| *g.get(&[i[0] + o, i[1] + o]));
            let (block, kind) = match f.kind {
                ChartKind::Flat { .. } => (PointTensor::zeros(f.dim, lower_slots(4)), FactorKind::Flat),
                ChartKind::Sphere { s2 } => (constant_curvature_tensor(&gb, 1.0 / s2), FactorKind::Sphere),
                ChartKind::Hyperbolic { s2 } => {
                    (constant_curvature_tensor(&gb, -1.0 / s2), FactorKind::Hyperbolic)
                }
                ChartKind::FubiniStudy { s2, .. } => {
                    let j = self.kahler_jets(fi, point, 0, n)?.values();
                    let jb = PointTensor::lower(f.dim, 2, |i| *j.get(&[i[0] + o, i[1] + o]));
                    (fubini_study_tensor(&gb, &jb, 1.0 / s2), FactorKind::FubiniStudy)
                }
                ChartKind::Warped(_) => {
                    return Err(Error::ChartKind(format!(
                        "{} is not locally symmetric",
                        self.label
                    )))
                }
            };
            let k = f.dim;
            for (flat, v) in block.data().iter().enumerate() {
                let idx = [flat / (k * k * k), flat / (k * k) % k, flat / k % k, flat % k];
                *riemann.get_mut(&idx.map(|i| i + o)) = *v;
            }
            let hermitian = f.is_hermitian();
            if hermitian {
                kahler_blocks.push(self.kahler_jets(fi, point, 0, n)?.values());
            }
            factors.push(Factor {
                offset: o,
                dim: k,
                kind,
                hermitian,
            });
        }
        let kahler = if kahler_blocks.len() == self.factors.len() {
            kahler_blocks.into_iter().reduce(|a, b| a.add(&b))
        } else {
            None
        };
        Ok(CurvatureModel {
            dim: n,
            metric,
            riemann,
            kahler,
            factors,
            normalization: self.normalization,
        })
    }

    /// Closed-form Killing fields of every factor.
    pub fn killing_fields(&self) -> Vec<KillingField> {
        let mut out = Vec::new();
        for f in &self.factors {
            let o = f.offset;
            let rotations = |out: &mut Vec<KillingField>| {
                for i in 0..f.dim {
                    for j in i + 1..f.dim {
                        out.push(KillingField {
                            name: format!("rotation({},{})", o + i, o + j),
                            generator: Generator::Rotation { i: o + i, j: o + j },
                        });
                    }
                }
            };
            let translations = |out: &mut Vec<KillingField>, sign: f64, name: &str| {
                for k in 0..f.dim {
                    out.push(KillingField {
                        name: format!("{name}({})", o + k),
                        generator: Generator::Transvection {
                            offset: o,
                            dim: f.dim,
                            k,
                            sign,
                        },
                    });
                }
            };
            match f.kind {
                ChartKind::Flat { .. } => {
                    translations(&mut out, 0.0, "translation");
                    rotations(&mut out);
                }
                ChartKind::Sphere { .. } => {
                    rotations(&mut out);
                    translations(&mut out, 1.0, "transvection");
                }
                ChartKind::Hyperbolic { .. } => {
                    rotations(&mut out);
                    translations(&mut out, -1.0, "transvection");
                }
                ChartKind::FubiniStudy { n, .. } => {
                    for p in 0..n {
                        for q in p..n {
                            let mut push = |label: &str, re: f64, im: f64| {
                                let mut a = vec![(0.0, 0.0); n * n];
                                a[p * n + q] = (re, im);
                                a[q * n + p] = (-re, im);
                                if p == q {
                                    a[p * n + p] = (0.0, im);
                                }
                                out.push(KillingField {
                                    name: format!("{label}({p},{q})"),
                                    generator: Generator::Unitary { offset: o, n, a },
                                });
                            };
                            if p != q {
                                push("unitary-re", 1.0, 0.0);
                            }
                            push("unitary-im", 0.0, 1.0);
                        }
                    }
                }
                ChartKind::Warped(_) => out.push(KillingField {
                    name: "translation(x)".into(),
                    generator: Generator::Transvection {
                        offset: o,
                        dim: 1,
                        k: 0,
                        sign: 0.0,
                    },
                }),
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Generator {
    /// `x_i ∂_j − x_j ∂_i`.
    Rotation { i: usize, j: usize },
    /// `½(1 + sign·(−|x|²)) e_k + sign · x_k x` on one factor; `sign = 0`
    /// is a translation.
    Transvection {
        offset: usize,
        dim: usize,
        k: usize,
        sign: f64,
    },
    /// `z ↦ A z` for anti-Hermitian `A`, entries `(re, im)` row-major.
    Unitary {
        offset: usize,
        n: usize,
        a: Vec<(f64, f64)>,
    },
}

/// A Killing vector field given in closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct KillingField {
    pub name: String,
    generator: Generator,
}

impl KillingField {
    /// Components `X^a` at coordinate jets `x`.
    pub fn vector(&self, x: &[Jet]) -> Vec<Jet> {
        let (nvars, order) = (x[0].num_vars(), x[0].order());
        let mut v = vec![Jet::zero(nvars, order); x.len()];
        match &self.generator {
            Generator::Rotation { i, j } => {
                v[*j] = x[*i].clone();
                v[*i] = -&x[*j];
            }
            Generator::Transvection {
                offset,
                dim,
                k,
                sign,
            } => {
                let xs = &x[*offset..offset + dim];
                if *sign == 0.0 {
                    v[offset + k] = Jet::constant(nvars, order, 1.0);
                } else {
                    let r2 = radius_sq(xs);
                    for (i, xi) in xs.iter().enumerate() {
                        v[offset + i] = (&x[offset + k] * xi).scale(*sign);
                    }
                    v[offset + k] += &(&r2.scale(-0.5 * sign) + 0.5);
                }
            }
            Generator::Unitary { offset, n, a } => {
                for row in 0..*n {
                    for col in 0..*n {
                        let (re, im) = a[row * n + col];
                        let (zr, zi) = (&x[offset + 2 * col], &x[offset + 2 * col + 1]);
                        // (re + i im)(zr + i zi)
                        v[offset + 2 * row].add_scaled(zr, re);
                        v[offset + 2 * row].add_scaled(zi, -im);
                        v[offset + 2 * row + 1].add_scaled(zi, re);
                        v[offset + 2 * row + 1].add_scaled(zr, im);
                    }
                }
            }
        }
        v
    }

    /// `X_a = g_ab X^b` as jets of the given order.
    pub fn one_form(&self, chart: &ChartGeometry, point: &[f64], order: usize, nvars: usize) -> Result<Vec<Jet>> {
        let g = chart.metric_jets(point, order, nvars)?;
        let x = chart.coordinate_jets(point, order, nvars);
        let v = self.vector(&x);
        let n = chart.num_coords;
        Ok((0..n)
            .map(|a| {
                let mut acc = Jet::zero(nvars, order);
                for (b, vb) in v.iter().enumerate() {
                    acc.add_product(g.get(&[a, b]), vb);
                }
                acc
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::parse_space_spec;

    fn chart(spec: &str) -> ChartGeometry {
        make_chart(&parse_space_spec(spec).unwrap()).unwrap()
    }

    #[test]
    fn sphere_chart_at_origin() {
        let c = make_chart_with(&parse_space_spec("S2").unwrap(), Normalization::UnitCurvature).unwrap();
        let g = c.metric_at(&[0.0, 0.0]).unwrap().matrix();
        assert!((g - nalgebra::DMatrix::identity(2, 2) * 4.0).amax() < 1e-15);
    }

    #[test]
    fn cp1_chart_is_the_unit_ricci_sphere_chart() {
        let s = chart("S2");
        let cp = chart("CP1");
        for p in [[0.1, -0.2], [0.3, 0.25]] {
            let a = s.metric_jets(&p, 3, 2).unwrap();
            let b = cp.metric_jets(&p, 3, 2).unwrap();
            for (x, y) in a.data().iter().zip(b.data()) {
                assert!((x - y).max_abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fubini_study_chart_matches_model_at_origin() {
        for n in 1..4 {
            let c = chart(&format!("CP{n}"));
            let m = c.model_at(&vec![0.0; 2 * n]).unwrap();
            let model = super::super::fubini_study_model(n, Normalization::UnitRicci).unwrap();
            // the chart metric at the origin is 2(n+1) δ
            let e = m.metric.orthonormal_frame();
            let s2 = 2.0 * (n as f64 + 1.0);
            assert!((&e - nalgebra::DMatrix::identity(2 * n, 2 * n) / s2.sqrt()).amax() < 1e-14);
            assert!(m.riemann.in_frame(&e).sub(&model.riemann).max_abs() < 1e-13);
            let j = m.kahler.unwrap().in_frame(&e);
            assert!(j.sub(model.kahler.as_ref().unwrap()).max_abs() < 1e-13);
        }
    }

    #[test]
    fn models_at_points_are_valid() {
        for spec in ["S3", "H2", "CP2", "S2xS1", "CP1xS2"] {
            let c = chart(spec);
            let p: Vec<f64> = (0..c.num_coords).map(|i| 0.3 * ((i as f64) + 0.5).sin()).collect();
            let m = c.model_at(&p).unwrap();
            m.validate().unwrap();
        }
    }

    #[test]
    fn poincare_ball_boundary_is_rejected() {
        let c = chart("H2");
        assert!(matches!(
            c.metric_jets(&[0.8, 0.7], 2, 2),
            Err(Error::OutsideChart { .. })
        ));
    }

    #[test]
    fn unitary_generator_is_linear() {
        let c = chart("CP2");
        let fields = c.killing_fields();
        assert_eq!(fields.len(), 4);
        let x = c.coordinate_jets(&[0.1, 0.2, 0.3, 0.4], 1, 4);
        let v = fields[0].vector(&x);
        // i E_00 z: (x0 + i x1) -> i x0 - x1
        assert!((v[0].value() + 0.2).abs() < 1e-15);
        assert!((v[1].value() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn warp_names_round_trip() {
        for w in [WarpFunction::Cosh, WarpFunction::ExpHalfSquare, WarpFunction::One] {
            assert_eq!(w.name().parse::<WarpFunction>().unwrap(), w);
        }
    }
}
