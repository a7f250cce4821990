//! Differential operators evaluated through jets at a chart point.
//!
//! Every covariant derivative is obtained by pushing Christoffel jets
//! through jet arithmetic, so one derivative costs one jet order. With the
//! metric expanded to order `m`, `Γ` is exact to order `m − 1` and the
//! curvature to order `m − 2`.

pub mod fields;
pub mod khavkine;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::holonomy::{curvature_hom_raw, hom_matrix_euclidean};
use crate::jets::Jet;
use crate::linalg::RANK_TOL;
use crate::models::ChartGeometry;
use crate::tensor::{lower_slots, JetTensor, Metric, PointTensor, Tensor, Variance};

pub use fields::{add_scaled, random_point, symmetric_product, JetField, Valence};
pub use khavkine::{khavkine_j, khavkine_op, killing_2d, KhavkineValue, SINGULAR_TOL};

fn need(operation: &'static str, need: usize, have: usize) -> Result<()> {
    if have < need {
        Err(Error::InsufficientOrder {
            operation,
            need,
            have,
        })
    } else {
        Ok(())
    }
}

/// Levi-Civita data of a metric expanded at one point.
#[derive(Debug, Clone)]
pub struct PointGeometry {
    pub dim: usize,
    pub nvars: usize,
    pub order: usize,
    pub point: Vec<f64>,
    /// `g_ab`, order `m`.
    pub g: JetTensor,
    /// `g^ab`, order `m`.
    pub g_inv: JetTensor,
    /// `Γ^c_ab` in slots `[c, a, b]`, order `m − 1`.
    pub gamma: JetTensor,
    /// `R_abcd`, order `m − 2`.
    pub riemann: JetTensor,
    /// `R_ab^e_c` in slots `[a, b, e, c]`, order `m − 2`.
    pub mixed: JetTensor,
}

impl PointGeometry {
    /// Geometry of a chart at `point`, jets in the chart coordinates only.
    pub fn new(chart: &ChartGeometry, point: &[f64], order: usize) -> Result<PointGeometry> {
        PointGeometry::with_vars(chart, point, order, chart.num_coords)
    }

    /// As [`PointGeometry::new`] with extra free jet variables (for
    /// parameter derivatives such as a deformation `ε`).
    pub fn with_vars(chart: &ChartGeometry, point: &[f64], order: usize, nvars: usize) -> Result<PointGeometry> {
        need("curvature", 2, order)?;
        let g = chart.metric_jets(point, order, nvars)?;
        PointGeometry::from_metric(g, point)
    }

    /// Geometry of arbitrary metric jets; derivatives are taken in the first
    /// `g.dim()` variables.
    pub fn from_metric(g: JetTensor, point: &[f64]) -> Result<PointGeometry> {
        let n = g.dim();
        let order = g.min_order();
        need("curvature", 2, order)?;
        let nvars = g.data()[0].num_vars();
        if nvars < n {
            return Err(Error::NumVarsMismatch(nvars, n));
        }
        let g_inv = jet_inverse(&g, order)?;

        let gamma = Tensor::from_fn(
            n,
            vec![Variance::Upper, Variance::Lower, Variance::Lower],
            |i| {
                let (c, a, b) = (i[0], i[1], i[2]);
                let mut acc = Jet::zero(nvars, order - 1);
                for d in 0..n {
                    let first = &(&g.get(&[d, b]).derivative(a) + &g.get(&[d, a]).derivative(b))
                        - &g.get(&[a, b]).derivative(d);
                    acc.add_product(g_inv.get(&[c, d]), &first);
                }
                acc.scale(0.5)
            },
        );

        // R^r_{s a b} = ∂_a Γ^r_{bs} − ∂_b Γ^r_{as} + Γ^r_{al}Γ^l_{bs} − Γ^r_{bl}Γ^l_{as}
        let up = Tensor::from_fn(n, vec![Variance::Upper, Variance::Lower, Variance::Lower, Variance::Lower], |i| {
            let (r, s, a, b) = (i[0], i[1], i[2], i[3]);
            let mut acc = &gamma.get(&[r, b, s]).derivative(a) - &gamma.get(&[r, a, s]).derivative(b);
            for l in 0..n {
                acc.add_product(gamma.get(&[r, a, l]), gamma.get(&[l, b, s]));
                acc -= &(gamma.get(&[r, b, l]) * gamma.get(&[l, a, s]));
            }
            acc
        });
        // R_{r s a b} lowered on the first slot; pair symmetry makes this the
        // tensor whose commutator convention is (∇_a∇_b − ∇_b∇_a)X^c = R_ab^c_d X^d.
        let riemann = Tensor::from_fn(n, lower_slots(4), |i| {
            let mut acc = Jet::zero(nvars, order - 2);
            for r in 0..n {
                acc.add_product(g.get(&[i[0], r]), up.get(&[r, i[1], i[2], i[3]]));
            }
            acc
        });
        let mixed = Tensor::from_fn(
            n,
            vec![Variance::Lower, Variance::Lower, Variance::Upper, Variance::Lower],
            |i| {
                let mut acc = Jet::zero(nvars, order - 2);
                for f in 0..n {
                    acc.add_product(g_inv.get(&[i[2], f]), riemann.get(&[i[0], i[1], f, i[3]]));
                }
                acc
            },
        );
        Ok(PointGeometry {
            dim: n,
            nvars,
            order,
            point: point.to_vec(),
            g,
            g_inv,
            gamma,
            riemann,
            mixed,
        })
    }

    pub fn metric(&self) -> Result<Metric> {
        Metric::new(&self.g.values().to_matrix())
    }

    /// `∇_a T_{i…}` of an all-lower tensor, derivative slot first; one jet
    /// order is consumed.
    pub fn covariant(&self, t: &JetTensor) -> Result<JetTensor> {
        let k = t.min_order();
        need("covariant derivative", 1, k)?;
        let n = self.dim;
        let r = t.rank();
        Ok(Tensor::from_fn(n, lower_slots(r + 1), |idx| {
            let a = idx[0];
            let rest = &idx[1..];
            let mut acc = t.get(rest).derivative(a);
            let mut j = rest.to_vec();
            for s in 0..r {
                let orig = rest[s];
                for e in 0..n {
                    j[s] = e;
                    let gam = self.gamma.get(&[e, a, orig]);
                    if gam.max_abs() != 0.0 {
                        acc -= &(gam * t.get(&j));
                    }
                }
                j[s] = orig;
            }
            acc
        }))
    }

    /// `∇_a ∇_b h_cd` in slots `[a, b, c, d]`.
    pub fn second_covariant(&self, h: &JetTensor) -> Result<JetTensor> {
        need("second covariant derivative", 2, h.min_order())?;
        self.covariant(&self.covariant(h)?)
    }

    /// `Ric_bd = R_ab^a_d` as jets.
    pub fn ricci(&self) -> JetTensor {
        let n = self.dim;
        Tensor::from_fn(n, lower_slots(2), |i| {
            let mut acc = Jet::zero(self.nvars, self.order - 2);
            for a in 0..n {
                acc += self.mixed.get(&[a, i[0], a, i[1]]);
            }
            acc
        })
    }

    /// Scalar curvature as a jet of order `m − 2`.
    pub fn scalar_curvature(&self) -> Jet {
        let ric = self.ricci();
        let mut acc = Jet::zero(self.nvars, self.order - 2);
        for b in 0..self.dim {
            for d in 0..self.dim {
                acc.add_product(self.g_inv.get(&[b, d]), ric.get(&[b, d]));
            }
        }
        acc
    }

    /// `g^{ab} v_b` of point values.
    pub fn raise(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|a| (0..self.dim).map(|b| self.g_inv.get(&[a, b]).value() * v[b]).sum())
            .collect()
    }
}

/// `Γ^c_ab` at a point from first-order metric jets, slots `[c, a, b]`.
pub fn christoffel(chart: &ChartGeometry, point: &[f64]) -> Result<PointTensor> {
    let n = chart.num_coords;
    let g = chart.metric_jets(point, 1, n)?;
    let g_inv = g
        .values()
        .to_matrix()
        .try_inverse()
        .ok_or_else(|| Error::NotPositiveDefinite("metric is singular".into()))?;
    let dg = |d: usize, a: usize, b: usize| g.get(&[a, b]).derivative(d).value();
    Ok(Tensor::from_fn(
        n,
        vec![Variance::Upper, Variance::Lower, Variance::Lower],
        |i| {
            let (c, a, b) = (i[0], i[1], i[2]);
            0.5 * (0..n)
                .map(|d| g_inv[(c, d)] * (dg(a, d, b) + dg(b, d, a) - dg(d, a, b)))
                .sum::<f64>()
        },
    ))
}

/// Inverse of a symmetric matrix of jets by Newton iteration
/// `X ← X(2 − gX)`, which doubles the number of exact orders per step.
fn jet_inverse(g: &JetTensor, order: usize) -> Result<JetTensor> {
    let n = g.dim();
    let nvars = g.data()[0].num_vars();
    let inv0 = g
        .values()
        .to_matrix()
        .try_inverse()
        .ok_or_else(|| Error::NotPositiveDefinite("metric is singular".into()))?;
    let mut x: Vec<Jet> = inv0.iter().map(|&v| Jet::constant(nvars, order, v)).collect();
    // column-major like DMatrix
    let at = |m: &[Jet], r: usize, c: usize| m[c * n + r].clone();
    let gj: Vec<Jet> = (0..n * n).map(|k| g.get(&[k % n, k / n]).truncate(order)).collect();
    let matmul = |a: &[Jet], b: &[Jet]| -> Vec<Jet> {
        let mut out = vec![Jet::zero(nvars, order); n * n];
        for c in 0..n {
            for r in 0..n {
                let o = &mut out[c * n + r];
                for k in 0..n {
                    o.add_product(&a[k * n + r], &b[c * n + k]);
                }
            }
        }
        out
    };
    let mut exact = 0;
    while exact < order {
        let gx = matmul(&gj, &x);
        let two_minus: Vec<Jet> = (0..n * n)
            .map(|k| {
                let d = if k % n == k / n { 2.0 } else { 0.0 };
                &gx[k].scale(-1.0) + d
            })
            .collect();
        x = matmul(&x, &two_minus);
        exact = 2 * exact + 1;
    }
    Ok(Tensor::from_fn(n, vec![Variance::Upper, Variance::Upper], |i| at(&x, i[0], i[1])))
}

/// `X_a` as a one-form jet tensor.
pub fn one_form(v: Vec<Jet>) -> JetTensor {
    let n = v.len();
    Tensor::from_vec(n, lower_slots(1), v).expect("length matches")
}

/// `∇_(a σ_b)`.
pub fn killing_op(geo: &PointGeometry, sigma: &JetTensor) -> Result<JetTensor> {
    let d = geo.covariant(sigma)?;
    Ok(Tensor::from_fn(geo.dim, lower_slots(2), |i| {
        (d.get(&[i[0], i[1]]) + d.get(&[i[1], i[0]])).scale(0.5)
    }))
}

/// `∇_[a σ_b]`, which needs no connection.
pub fn exterior_half(geo: &PointGeometry, sigma: &JetTensor) -> Result<JetTensor> {
    need("exterior derivative", 1, sigma.min_order())?;
    Ok(Tensor::from_fn(geo.dim, lower_slots(2), |i| {
        (&sigma.get(&[i[1]]).derivative(i[0]) - &sigma.get(&[i[0]]).derivative(i[1])).scale(0.5)
    }))
}

/// `ℛ(μ)` at the point.
pub fn curvature_hom_at(geo: &PointGeometry, mu: &PointTensor) -> PointTensor {
    curvature_hom_raw(&geo.mixed.values(), mu)
}

/// Calabi operator by its defining second-order formula:
/// `∇_(a∇_c)h_bd − ∇_(b∇_c)h_ad − ∇_(a∇_d)h_bc + ∇_(b∇_d)h_ac
///  − R_ab^e_[c h_d]e − R_cd^e_[a h_b]e`.
pub fn calabi_op(geo: &PointGeometry, h: &JetTensor) -> Result<PointTensor> {
    let dd = geo.second_covariant(h)?.values();
    let rm = geo.mixed.values();
    let hv = h.values();
    let n = geo.dim;
    let s = |x: usize, y: usize, p: usize, q: usize| 0.5 * (dd.get(&[x, y, p, q]) + dd.get(&[y, x, p, q]));
    // R_xy^e_[p h_q]e
    let w = |x: usize, y: usize, p: usize, q: usize| {
        let mut acc = 0.0;
        for e in 0..n {
            acc += rm.get(&[x, y, e, p]) * hv.get(&[q, e]) - rm.get(&[x, y, e, q]) * hv.get(&[p, e]);
        }
        0.5 * acc
    };
    Ok(PointTensor::lower(n, 4, |i| {
        let (a, b, c, d) = (i[0], i[1], i[2], i[3]);
        s(a, c, b, d) - s(b, c, a, d) - s(a, d, b, c) + s(b, d, a, c) - w(a, b, c, d) - w(c, d, a, b)
    }))
}

/// `D` applied to an `E`-valued one-form `[τ_bc; ν_bcd]` (form index `b`)
/// and antisymmetrised: returns the two components of `D_a s_b − D_b s_a`
/// in slots `[a, b, c]` and `[a, b, c, d]`.
pub fn prolongation_apply(geo: &PointGeometry, tau: &JetTensor, nu: &JetTensor) -> Result<(PointTensor, PointTensor)> {
    let dtau = geo.covariant(tau)?.values();
    let dnu = geo.covariant(nu)?.values();
    let rm = geo.mixed.values();
    let (tv, nv) = (tau.values(), nu.values());
    let n = geo.dim;
    let f = |a: usize, b: usize, c: usize| dtau.get(&[a, b, c]) - nv.get(&[b, a, c]);
    let g = |a: usize, b: usize, c: usize, d: usize| {
        let mut acc = *dnu.get(&[a, b, c, d]);
        for e in 0..n {
            acc -= rm.get(&[c, d, e, a]) * tv.get(&[b, e]);
        }
        acc
    };
    let first = PointTensor::lower(n, 3, |i| f(i[0], i[1], i[2]) - f(i[1], i[0], i[2]));
    let second = PointTensor::lower(n, 4, |i| g(i[0], i[1], i[2], i[3]) - g(i[1], i[0], i[2], i[3]));
    Ok((first, second))
}

/// Calabi operator through the prolongation: the second component of
/// `∇_a[h; 2∇_[c h_d]b]_b − (a ↔ b)`. Also returns the first component,
/// which vanishes identically.
pub fn calabi_via_prolongation(geo: &PointGeometry, h: &JetTensor) -> Result<(PointTensor, PointTensor)> {
    let dh = geo.covariant(h)?;
    let n = geo.dim;
    let nu = Tensor::from_fn(n, lower_slots(3), |i| {
        let (b, c, d) = (i[0], i[1], i[2]);
        dh.get(&[c, d, b]) - dh.get(&[d, c, b])
    });
    prolongation_apply(geo, h, &nu)
}

/// The quotient operator `ℒ`: `𝒞h` projected onto `ℛ(Λ²)^⊥`, returned in
/// an orthonormal frame at the point.
pub fn l_op(geo: &PointGeometry, h: &JetTensor) -> Result<PointTensor> {
    let c = calabi_op(geo, h)?;
    project_off_image(geo, &c)
}

/// Removes the `ℛ(Λ²)` component of a curvature-type tensor, in frame.
pub fn project_off_image(geo: &PointGeometry, c: &PointTensor) -> Result<PointTensor> {
    let e = geo.metric()?.orthonormal_frame();
    let cf = c.in_frame(&e);
    let rf = geo.riemann.values().in_frame(&e);
    let q = image_basis(&hom_matrix_euclidean(&rf), rf.max_abs());
    let v = nalgebra::DVector::from_column_slice(cf.data());
    let residual = &v - &q * (q.transpose() * &v);
    Tensor::from_vec(geo.dim, lower_slots(4), residual.iter().copied().collect())
}

/// Orthonormal basis of the column span of `a`, dropping singular values
/// below `1e-9 · scale`. The cutoff is absolute in units of the curvature so
/// that a curvature map that is zero up to rounding has an empty image.
fn image_basis(a: &DMatrix<f64>, scale: f64) -> DMatrix<f64> {
    if a.ncols() == 0 || scale == 0.0 {
        return DMatrix::zeros(a.nrows(), 0);
    }
    // Rank-revealing QR. The SVD's left factor loses orthonormality on the
    // repeated singular values these maps have.
    let qr = a.clone().col_piv_qr();
    let r = qr.r();
    let rank = (0..r.nrows().min(r.ncols()))
        .take_while(|&k| r[(k, k)].abs() > RANK_TOL * scale)
        .count();
    qr.q().columns(0, rank).into_owned()
}

/// A section `[σ_c; μ_cd]` of `Λ¹ ⊕ Λ²`.
#[derive(Debug, Clone)]
pub struct ProlongationSection {
    pub sigma: JetTensor,
    pub mu: JetTensor,
}

impl ProlongationSection {
    pub fn new(sigma: JetTensor, mu: JetTensor) -> Result<ProlongationSection> {
        let n = mu.dim();
        let mut defect: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                defect = defect.max((mu.get(&[a, b]) + mu.get(&[b, a])).max_abs());
            }
        }
        if defect > 1e-12 * (1.0 + mu.data().iter().map(Jet::max_abs).fold(0.0, f64::max)) {
            return Err(Error::NotAntisymmetric(defect));
        }
        Ok(ProlongationSection { sigma, mu })
    }

    /// `(σ, ∇_[a σ_b])`, the prolonged Killing datum.
    pub fn from_one_form(geo: &PointGeometry, sigma: JetTensor) -> Result<ProlongationSection> {
        let mu = exterior_half(geo, &sigma)?;
        Ok(ProlongationSection { sigma, mu })
    }
}

/// `D_b[σ_c; μ_cd] = [∇_bσ_c − μ_bc; ∇_bμ_cd − R_cd^e_b σ_e]` as jets.
pub fn prolongation_derivative(geo: &PointGeometry, s: &ProlongationSection) -> Result<(JetTensor, JetTensor)> {
    let n = geo.dim;
    let dsigma = geo.covariant(&s.sigma)?;
    let dmu = geo.covariant(&s.mu)?;
    let tau = Tensor::from_fn(n, lower_slots(2), |i| dsigma.get(i) - s.mu.get(i));
    let nu = Tensor::from_fn(n, lower_slots(3), |i| {
        let (b, c, d) = (i[0], i[1], i[2]);
        let mut acc = dmu.get(i).clone();
        for e in 0..n {
            acc -= &(geo.mixed.get(&[c, d, e, b]) * s.sigma.get(&[e]));
        }
        acc
    });
    Ok((tau, nu))
}

/// `D_a D_b s − D_b D_a s`.
pub fn prolongation_curvature(geo: &PointGeometry, s: &ProlongationSection) -> Result<(PointTensor, PointTensor)> {
    need("prolongation curvature", 3, geo.order)?;
    let (tau, nu) = prolongation_derivative(geo, s)?;
    prolongation_apply(geo, &tau, &nu)
}

/// Second component of the expected curvature,
/// `ℛ(μ)_abcd − (∇^e R_abcd) σ_e` (the gradient term only when asked).
pub fn prolongation_curvature_expected(
    geo: &PointGeometry,
    s: &ProlongationSection,
    gradient: bool,
) -> Result<PointTensor> {
    let mut out = curvature_hom_at(geo, &s.mu.values());
    if gradient {
        need("curvature gradient", 3, geo.order)?;
        let dr = geo.covariant(&geo.riemann)?.values();
        let sigma_up = geo.raise(s.sigma.values().data());
        let n = geo.dim;
        out = out.sub(&PointTensor::lower(n, 4, |i| {
            (0..n)
                .map(|f| dr.get(&[f, i[0], i[1], i[2], i[3]]) * sigma_up[f])
                .sum()
        }));
    }
    Ok(out)
}

/// Max-abs deviation of the prolongation curvature from its closed form;
/// the gradient term is included on non locally symmetric charts.
pub fn prolongation_curvature_residual(geo: &PointGeometry, s: &ProlongationSection, gradient: bool) -> Result<f64> {
    let (first, second) = prolongation_curvature(geo, s)?;
    let expected = prolongation_curvature_expected(geo, s, gradient)?;
    Ok(first.max_abs().max(second.sub(&expected).max_abs()))
}

/// `2[Δ h_a^a − ∇^a∇^b h_ab + R^ab h_ab]` at the point.
pub fn trace_composition(geo: &PointGeometry, h: &JetTensor) -> Result<f64> {
    let dd = geo.second_covariant(h)?.values();
    let gi = geo.g_inv.values();
    let ric = geo.ricci().values();
    let hv = h.values();
    let n = geo.dim;
    let mut lap = 0.0;
    let mut div2 = 0.0;
    let mut rh = 0.0;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let gg = gi.get(&[a, b]) * gi.get(&[c, d]);
                    lap += gg * dd.get(&[a, b, c, d]);
                    let gx = gi.get(&[a, c]) * gi.get(&[b, d]);
                    div2 += gx * dd.get(&[c, d, a, b]);
                    rh += gx * ric.get(&[c, d]) * hv.get(&[a, b]);
                }
            }
        }
    }
    Ok(2.0 * (lap - div2 + rh))
}

/// `(∇^b R) σ_b` with `R` the scalar curvature.
pub fn scalar_gradient_pairing(geo: &PointGeometry, sigma: &JetTensor) -> Result<f64> {
    need("scalar curvature gradient", 3, geo.order)?;
    let r = geo.scalar_curvature();
    let grad: Vec<f64> = (0..geo.dim).map(|b| r.derivative(b).value()).collect();
    let up = geo.raise(&grad);
    Ok(up.iter().zip(sigma.values().data()).map(|(x, s)| x * s).sum())
}

/// `ε`-linear coefficient of the scalar curvature of `g + εh` at `point`.
/// `field` is evaluated with one extra jet variable, the last, for `ε`.
pub fn deformation_coefficient(chart: &ChartGeometry, point: &[f64], field: &JetField, order: usize) -> Result<f64> {
    need("deformation", 3, order)?;
    let n = chart.num_coords;
    let nvars = n + 1;
    let g = chart.metric_jets(point, order, nvars)?;
    let h = field.eval(chart, point, order, nvars)?;
    let eps = Jet::variable(nvars, order, n, 0.0);
    let deformed = Tensor::from_fn(n, lower_slots(2), |i| {
        let mut x = g.get(i).clone();
        x.add_product(&eps, h.get(i));
        x
    });
    let geo = PointGeometry::from_metric(deformed, point)?;
    let mut e = vec![0u8; nvars];
    e[n] = 1;
    geo.scalar_curvature().extract(&e)
}

/// The four type-blocks of `𝒞h` on a product `M × ℝᵖ` that are fed by the
/// mixed part `h_{b b̄}`. Unbarred indices are curved, barred are flat.
#[derive(Debug, Clone)]
pub struct CalabiParts {
    /// `(𝒞h)_{a b c d̄}`, optionally with its `R_ab^e_c κ_e` component removed.
    pub mixed_second: PointTensor,
    /// Symmetric-symmetric part of `(𝒞h)_{a ā b b̄}` in `(a,b)`, `(ā,b̄)`.
    pub symmetric: PointTensor,
    /// Skew-skew part of the same block.
    pub skew: PointTensor,
    /// `(𝒞h)_{ā b̄ c̄ d}`.
    pub flat: PointTensor,
}

impl CalabiParts {
    pub fn max_abs(&self) -> f64 {
        [&self.mixed_second, &self.symmetric, &self.skew, &self.flat]
            .iter()
            .map(|t| t.max_abs())
            .fold(0.0, f64::max)
    }
}

/// Coordinate indices of the curved factors and of the flat factors.
pub fn type_split(chart: &ChartGeometry) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut curved = Vec::new();
    let mut flat = Vec::new();
    for f in &chart.factors {
        let dst = if f.is_flat() { &mut flat } else { &mut curved };
        dst.extend(f.offset..f.offset + f.dim);
    }
    if flat.is_empty() || curved.is_empty() || chart.is_warped() {
        return Err(Error::ChartKind(format!(
            "{} is not a product of a curved factor with a flat one",
            chart.label
        )));
    }
    Ok((curved, flat))
}

/// Splits `𝒞h` by index type. Each part is stored in full dimension and is
/// zero outside its block. With `project`, the first part has its
/// component along `{R_ab^e_c κ_e}` removed, which is exactly the mixed
/// block of `ℛ(Λ²)`.
pub fn product_calabi_parts(
    chart: &ChartGeometry,
    geo: &PointGeometry,
    h: &JetTensor,
    project: bool,
) -> Result<CalabiParts> {
    let (m, f) = type_split(chart)?;
    let n = geo.dim;
    let c = calabi_op(geo, h)?;
    let mut mixed_second = PointTensor::zeros(n, lower_slots(4));
    let mut symmetric = PointTensor::zeros(n, lower_slots(4));
    let mut skew = PointTensor::zeros(n, lower_slots(4));
    let mut flat = PointTensor::zeros(n, lower_slots(4));
    for &a in &m {
        for &b in &m {
            for &x in &m {
                for &dbar in &f {
                    *mixed_second.get_mut(&[a, b, x, dbar]) = *c.get(&[a, b, x, dbar]);
                }
            }
            for &abar in &f {
                for &bbar in &f {
                    let t = |p: usize, q: usize, pb: usize, qb: usize| *c.get(&[p, pb, q, qb]);
                    let (v1, v2, v3, v4) = (t(a, b, abar, bbar), t(b, a, abar, bbar), t(a, b, bbar, abar), t(b, a, bbar, abar));
                    *symmetric.get_mut(&[a, abar, b, bbar]) = 0.25 * (v1 + v2 + v3 + v4);
                    *skew.get_mut(&[a, abar, b, bbar]) = 0.25 * (v1 - v2 - v3 + v4);
                }
            }
        }
    }
    for &abar in &f {
        for &bbar in &f {
            for &cbar in &f {
                for &d in &m {
                    *flat.get_mut(&[abar, bbar, cbar, d]) = *c.get(&[abar, bbar, cbar, d]);
                }
            }
        }
    }
    if project {
        mixed_second = project_mixed_part(geo, &m, &f, &mixed_second)?;
    }
    Ok(CalabiParts {
        mixed_second,
        symmetric,
        skew,
        flat,
    })
}

/// Removes from `T_{a b c d̄}` (for each `d̄`) its component along the span
/// of `R_ab^e_c` over `e`, orthogonally in an orthonormal frame of `M`.
fn project_mixed_part(geo: &PointGeometry, m: &[usize], f: &[usize], t: &PointTensor) -> Result<PointTensor> {
    let k = m.len();
    let gm = DMatrix::from_fn(k, k, |i, j| geo.g.get(&[m[i], m[j]]).value());
    let e = Metric::new(&gm)?.orthonormal_frame();
    let e_inv = e.clone().try_inverse().expect("frame is invertible");
    let rm = geo.mixed.values();
    let to_frame = |src: &dyn Fn(usize, usize, usize) -> f64| -> Vec<f64> {
        PointTensor::lower(k, 3, |i| src(i[0], i[1], i[2])).in_frame(&e).into_data()
    };
    let mut span = DMatrix::zeros(k * k * k, k);
    for (col, &x) in m.iter().enumerate() {
        let v = to_frame(&|a, b, c| *rm.get(&[m[a], m[b], x, m[c]]));
        span.column_mut(col).copy_from_slice(&v);
    }
    let q = image_basis(&span, rm.max_abs());
    let mut out = t.clone();
    for &dbar in f {
        let v = nalgebra::DVector::from_vec(to_frame(&|a, b, c| *t.get(&[m[a], m[b], m[c], dbar])));
        let r = &v - &q * (q.transpose() * &v);
        let back = PointTensor::lower(k, 3, |i| r[(i[0] * k + i[1]) * k + i[2]]).in_frame(&e_inv);
        for a in 0..k {
            for b in 0..k {
                for c in 0..k {
                    *out.get_mut(&[m[a], m[b], m[c], dbar]) = *back.get(&[a, b, c]);
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
