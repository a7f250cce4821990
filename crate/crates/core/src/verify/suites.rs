//! The verification suites. Each draws its fields from per-trial streams of
//! the run seed, runs trials in parallel, merges by trial index and ends with
//! one perturbed input that must be caught.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use super::probe::{exactness_probe, ProbeResult, PROBE_GRIDS, PROBE_RATIO_CLEAN, PROBE_RATIO_FLAGGED};
use super::report::{Check, SuiteReport};
use super::RunConfig;
use crate::diffops::{
    add_scaled, calabi_op, calabi_via_prolongation, deformation_coefficient, exterior_half, khavkine_op,
    killing_2d, killing_op, one_form, product_calabi_parts, project_off_image, prolongation_curvature_residual,
    prolongation_derivative, random_point, scalar_gradient_pairing, symmetric_product, trace_composition,
    JetField, PointGeometry, ProlongationSection, Valence,
};
use crate::error::{Error, Result};
use crate::holonomy::{
    curvature_homomorphism, curvature_operator_spectrum, kahler_trace_residual, lts_residual, lts_residual_raw,
    random_riemann_tensor, s_operator_spectrum, split_two_forms,
};
use crate::jets::Jet;
use crate::linalg::subspace_distance;
use crate::models::{
    fubini_study_model, make_chart, model_from_spec, warped2d, ChartGeometry, CurvatureModel, Normalization,
    WarpFunction,
};
use crate::space::{parse_space_spec, Kind, SpaceSpec};
use crate::tensor::{lower_slots, JetTensor, Tensor};

/// Residual tolerances.
pub const COMPLEX_TOL: f64 = 1e-9;
pub const IDENTITY_TOL: f64 = 1e-9;
pub const KHAVKINE_TOL: f64 = 1e-8;
pub const TRACE_TOL_SYMMETRIC: f64 = 1e-10;
pub const TRACE_TOL_WARPED: f64 = 1e-8;
pub const DPHI_TOL: f64 = 1e-10;
pub const LTS_TOL: f64 = 1e-10;
pub const SPECTRUM_TOL: f64 = 1e-9;
/// Largest principal angle allowed between the zero eigenspace and `C`.
pub const ANGLE_TOL: f64 = 1e-6;
/// Random curvature tensors must miss the Lie triple system identity by this.
pub const LTS_CONTROL_FLOOR: f64 = 1e-3;
pub const LTS_CONTROL_SAMPLES: usize = 200;
pub const LTS_CONTROL_FRACTION: f64 = 0.99;

/// Sample points lie in this coordinate ball.
pub const SAMPLE_RADIUS: f64 = 0.4;
pub const POINTS_PER_FIELD: usize = 5;
/// Random fields are polynomials of this degree.
pub const FIELD_DEGREE: usize = 3;
/// Warped-chart samples keep `|t|` at least this large.
pub const WARPED_T_MIN: f64 = 0.1;
/// Size of the perturbation in negative controls.
pub const NOISE: f64 = 1e-2;

pub const COMPLEX_SPECS: [&str; 8] = ["S2", "S3", "CP2", "H2", "S2xS2", "S3xS1", "CP2xS2", "S2xS1"];
pub const SPHERE_SPECS: [&str; 5] = ["S2", "S3", "S4", "S5", "S6"];
pub const CPN_SPECS: [&str; 3] = ["CP1", "CP2", "CP3"];
/// Unit-Ricci compact models, the non-compact `H2`, and mixed-scale products
/// on which only the rescaling-invariant S-tensor is bounded.
pub const EIGEN_SPECS: [&str; 16] = [
    "S2", "S3", "S4", "S5", "S6", "CP1", "CP2", "CP3", "S2xS2", "S2xS3", "S3xS3", "CP2xS2", "CP1xCP2", "H2",
    "S2@3xS3@0.5", "CP2@2xS4",
];
/// Charts for the pointwise identities; `warped-<name>` selects a warped plane.
pub const IDENTITY_CHARTS: [&str; 12] = [
    "S2",
    "S3",
    "CP1",
    "CP2",
    "H2",
    "R3",
    "S2xS2",
    "S3xS1",
    "S2xS1",
    "CP2xS2",
    "warped-cosh",
    "warped-exp-half-square",
];
pub const LTS_SPECS: [&str; 18] = [
    "S2", "S3", "S4", "S5", "S6", "H2", "H3", "H4", "CP1", "CP2", "CP3", "S2xS2", "S3xS1", "S2xS1", "CP2xS2",
    "R3", "CP1xCP2", "S2@3xH3@0.5",
];

mod stream {
    pub const COMPLEX: u64 = 1;
    pub const COUNTEREXAMPLE: u64 = 2;
    pub const KHAVKINE: u64 = 3;
    pub const REFINED: u64 = 4;
    pub const IDENTITIES: u64 = 5;
    pub const LTS: u64 = 6;
    pub const CONTROL: u64 = 7;
}

fn parse(spec: &str) -> Result<SpaceSpec> {
    parse_space_spec(spec)
}

/// Unit Ricci when possible, unit sectional scale when a flat factor rules
/// that out.
pub fn default_model(spec: &SpaceSpec) -> Result<CurvatureModel> {
    let norm = if spec.has_flat_factor() {
        Normalization::UnitCurvature
    } else {
        Normalization::UnitRicci
    };
    model_from_spec(spec, norm)
}

/// A chart from a space spec or `warped-<name>`.
pub fn chart_from_label(label: &str) -> Result<ChartGeometry> {
    if let Some(name) = label.strip_prefix("warped-") {
        let omega = match name {
            "cosh" => WarpFunction::Cosh,
            "exp-half-square" => WarpFunction::ExpHalfSquare,
            "one" => WarpFunction::One,
            _ => return Err(Error::InvalidArgument(format!("unknown warp function `{name}`"))),
        };
        return Ok(warped2d(omega));
    }
    make_chart(&parse(label)?)
}

fn finish(mut r: SuiteReport, start: Instant) -> SuiteReport {
    r.runtime = start.elapsed();
    r
}

fn max_of(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, f64::max)
}

/// A point of the sample ball; on warped charts `|t| ≥ WARPED_T_MIN`.
fn sample_point(rng: &mut impl Rng, chart: &ChartGeometry) -> Vec<f64> {
    loop {
        let p = random_point(rng, chart.dim(), SAMPLE_RADIUS);
        if !chart.is_warped() || p[1].abs() >= WARPED_T_MIN {
            return p;
        }
    }
}

fn truncate_all(t: &JetTensor, order: usize) -> JetTensor {
    Tensor::from_fn(t.dim(), lower_slots(t.rank()), |i| t.get(i).truncate(order))
}

/// `𝒦(σ)` with `σ_a = g_ab V^b` for a vector field `V` given componentwise by
/// `v`. Rational on curved charts, so no grid reproduces it exactly.
pub fn killing_range_field(v: JetField) -> JetField {
    JetField::custom(Valence::Symmetric, move |chart, p, order, nvars| {
        let m = (order + 1).max(2);
        let geo = PointGeometry::with_vars(chart, p, m, nvars)?;
        let vv = v.eval(chart, p, m, nvars)?;
        let n = chart.dim();
        let sigma = one_form(
            (0..n)
                .map(|a| {
                    let mut acc = Jet::zero(nvars, m);
                    for b in 0..n {
                        acc.add_product(geo.g.get(&[a, b]), vv.get(&[b]));
                    }
                    acc
                })
                .collect(),
        );
        Ok(truncate_all(&killing_op(&geo, &sigma)?, order))
    })
}

/// `h_ab = φ_a θ_b + θ_a φ_b` on a product of a Hermitian factor (the first
/// factor) with a flat one: `∇_[a φ_b] = J_ab` and `θ` is the differential
/// of the last flat coordinate.
pub fn counterexample_field(chart: &ChartGeometry) -> Result<JetField> {
    let flat = chart
        .factors
        .iter()
        .rfind(|f| f.is_flat())
        .ok_or_else(|| Error::ChartKind(format!("{} has no flat factor", chart.label)))?;
    if !chart.factors.first().is_some_and(|f| f.is_hermitian()) {
        return Err(Error::ChartKind(format!("first factor of {} is not Hermitian", chart.label)));
    }
    let theta_index = flat.offset + flat.dim - 1;
    let c = chart.clone();
    Ok(JetField::custom(Valence::Symmetric, move |_, p, order, nvars| {
        let phi = c.kahler_primitive(0, p, order, nvars)?;
        let theta: Vec<Jet> = (0..c.dim())
            .map(|a| Jet::constant(nvars, order, if a == theta_index { 1.0 } else { 0.0 }))
            .collect();
        let h = symmetric_product(&phi, &theta);
        Ok(Tensor::from_fn(h.dim(), lower_slots(2), |i| h.get(i).scale(2.0)))
    }))
}

/// `X_a θ_b + θ_a X_b` for the Killing field `Σ c_k X_k` of the chart and `θ`
/// the differential of the last coordinate. Equal to `2𝒦(z X)`.
fn killing_times_theta(chart: &ChartGeometry, coeffs: Vec<f64>) -> JetField {
    let c = chart.clone();
    JetField::custom(Valence::Symmetric, move |_, p, order, nvars| {
        let x = killing_combination(&c, &coeffs, p, order, nvars)?;
        let n = c.dim();
        let theta: Vec<Jet> = (0..n)
            .map(|a| Jet::constant(nvars, order, if a == n - 1 { 1.0 } else { 0.0 }))
            .collect();
        let h = symmetric_product(&x, &theta);
        Ok(Tensor::from_fn(n, lower_slots(2), |i| h.get(i).scale(2.0)))
    })
}

/// One-form of `Σ c_k X_k` over the chart's closed-form Killing fields;
/// missing coefficients are zero.
fn killing_combination(chart: &ChartGeometry, coeffs: &[f64], p: &[f64], order: usize, nvars: usize) -> Result<Vec<Jet>> {
    let mut acc = vec![Jet::zero(nvars, order); chart.dim()];
    for (kf, &c) in chart.killing_fields().iter().zip(coeffs) {
        if c != 0.0 {
            for (a, y) in acc.iter_mut().zip(kf.one_form(chart, p, order, nvars)?) {
                a.add_scaled(&y, c);
            }
        }
    }
    Ok(acc)
}

/// `ℒh` (or `𝒞h` on flat charts) relative to `max(1, |𝒞h|)`.
fn complex_residual(geo: &PointGeometry, h: &JetTensor, flat: bool) -> Result<f64> {
    let c = calabi_op(geo, h)?;
    let out = if flat { c.clone() } else { project_off_image(geo, &c)? };
    Ok(out.max_abs() / c.max_abs().max(1.0))
}

/// `ℒ∘𝒦 = 0` (`𝒞∘𝒦 = 0` on flat specs) over random cubic one-forms.
pub fn suite_complex(spec: &str, cfg: &RunConfig) -> Result<SuiteReport> {
    cfg.validate()?;
    let start = Instant::now();
    let parsed = parse(spec)?;
    let chart = make_chart(&parsed)?;
    let order = cfg.jet_order("complex property", 3)?;
    let n = chart.dim();
    let flat = chart.factors.iter().all(|f| f.is_flat());
    let tol = cfg.tol_or(COMPLEX_TOL);
    let worst: Vec<f64> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| -> Result<f64> {
            let mut rng = cfg.rng(stream::COMPLEX, t);
            let sigma = JetField::random_polynomial(&mut rng, n, Valence::OneForm, FIELD_DEGREE);
            let mut worst: f64 = 0.0;
            for _ in 0..POINTS_PER_FIELD {
                let p = sample_point(&mut rng, &chart);
                let geo = PointGeometry::new(&chart, &p, order)?;
                let h = killing_op(&geo, &sigma.eval(&chart, &p, order, n)?)?;
                worst = worst.max(complex_residual(&geo, &h, flat)?);
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;

    let mut r = SuiteReport::new("complex", parsed.to_string(), cfg.seed, order);
    let (name, anchor) = if flat {
        ("C∘K relative residual", "the Calabi operator annihilates the range of the Killing operator on flat space")
    } else {
        ("L∘K relative residual", "the Killing operator followed by the quotient Calabi operator is zero")
    };
    r.push(Check::at_most(name, anchor, max_of(worst), tol));

    let mut rng = cfg.rng(stream::CONTROL, stream::COMPLEX as usize);
    let sigma = JetField::random_polynomial(&mut rng, n, Valence::OneForm, FIELD_DEGREE);
    let noise = JetField::random_polynomial(&mut rng, n, Valence::Symmetric, FIELD_DEGREE);
    let p = sample_point(&mut rng, &chart);
    let geo = PointGeometry::new(&chart, &p, order)?;
    let h = killing_op(&geo, &sigma.eval(&chart, &p, order, n)?)?;
    let perturbed = add_scaled(&h, &noise.eval(&chart, &p, order, n)?, NOISE);
    r.push(Check::at_least(
        "negative control: K(σ) + noise is detected",
        "a symmetric tensor off the Killing range is not annihilated",
        complex_residual(&geo, &perturbed, flat)?,
        tol,
    ));
    Ok(finish(r, start))
}

fn probe_all(chart: &ChartGeometry, h: &JetField, grids: &[usize]) -> Result<Vec<ProbeResult>> {
    grids.iter().map(|&g| exactness_probe(chart, h, g)).collect()
}

/// Evidence that `S²×S¹` carries an `ℒ`-closed field outside the Killing
/// range, with `S³×S¹` as the clean comparison.
pub fn suite_counterexample(cfg: &RunConfig) -> Result<SuiteReport> {
    cfg.validate()?;
    let start = Instant::now();
    let order = cfg.jet_order("counterexample", 3)?;
    let tol = cfg.tol_or(IDENTITY_TOL);
    let chart = make_chart(&parse("S2xS1")?)?;
    let h = counterexample_field(&chart)?;
    let n = chart.dim();

    let pointwise: Vec<(f64, f64, f64)> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| -> Result<(f64, f64, f64)> {
            let mut rng = cfg.rng(stream::COUNTEREXAMPLE, t);
            let p = sample_point(&mut rng, &chart);
            let geo = PointGeometry::new(&chart, &p, order)?;
            let phi = one_form(chart.kahler_primitive(0, &p, order, n)?);
            let j = chart.kahler_jets(0, &p, order, n)?.values();
            let dphi = exterior_half(&geo, &phi)?.values().sub(&j).max_abs();
            let hj = h.eval(&chart, &p, order, n)?;
            let parts = product_calabi_parts(&chart, &geo, &hj, true)?.max_abs();
            let l = project_off_image(&geo, &calabi_op(&geo, &hj)?)?.max_abs();
            Ok((dphi, parts, l))
        })
        .collect::<Result<_>>()?;

    let mut r = SuiteReport::new("counterexample", "S2xS1", cfg.seed, order);
    r.push(Check::at_most(
        "dφ − J",
        "the one-form φ is a primitive of the Kähler form",
        max_of(pointwise.iter().map(|x| x.0)),
        cfg.tol_or(DPHI_TOL),
    ));
    r.push(Check::at_most(
        "four Calabi parts on h = φθ",
        "every type-block of the Calabi operator annihilates h on the product",
        max_of(pointwise.iter().map(|x| x.1)),
        tol,
    ));
    r.push(Check::at_most(
        "L(h)",
        "h is closed for the quotient Calabi operator",
        max_of(pointwise.iter().map(|x| x.2)),
        tol,
    ));

    let mut rng = cfg.rng(stream::CONTROL, stream::COUNTEREXAMPLE as usize);
    let control = killing_range_field(JetField::random_polynomial(&mut rng, n, Valence::OneForm, FIELD_DEGREE));
    let on_h = probe_all(&chart, &h, &PROBE_GRIDS)?;
    let on_control = probe_all(&chart, &control, &PROBE_GRIDS)?;
    let ratios: Vec<f64> = on_h.iter().zip(&on_control).map(|(a, b)| a.residual / b.residual).collect();
    let last = PROBE_GRIDS.len() - 1;
    r.push(
        Check::at_least(
            format!("probe ratio h / K-range control at grid {}", PROBE_GRIDS[last]),
            "h is not in the range of the Killing operator on the patch (numerical evidence)",
            ratios[last],
            PROBE_RATIO_FLAGGED,
        )
        .with_values(ratios.clone()),
    );
    r.push(
        Check::at_least(
            "probe residual on h, finest over coarsest grid",
            "the least-squares residual of h plateaus under refinement",
            on_h[last].residual / on_h[0].residual,
            0.5,
        )
        .with_values(on_h.iter().map(|p| p.residual).collect()),
    );
    r.push(
        Check::at_most(
            "probe residual on control at the finest grid",
            "the discretised Killing operator reproduces its own range",
            on_control[last].residual,
            on_control[0].residual,
        )
        .with_values(on_control.iter().map(|p| p.residual).collect()),
    );

    // S³×S¹: the only L-closed fields of this shape are already in the range.
    let chart3 = make_chart(&parse("S3xS1")?)?;
    let n3 = chart3.dim();
    let coeffs: Vec<f64> = chart3
        .killing_fields()
        .iter()
        .map(|kf| if kf.name.contains("translation") { 0.0 } else { rng.random_range(-1.0..=1.0) })
        .collect();
    let closed = killing_times_theta(&chart3, coeffs);
    let mut l3: f64 = 0.0;
    for _ in 0..POINTS_PER_FIELD {
        let p = sample_point(&mut rng, &chart3);
        let geo = PointGeometry::new(&chart3, &p, order)?;
        let hj = closed.eval(&chart3, &p, order, n3)?;
        l3 = l3.max(project_off_image(&geo, &calabi_op(&geo, &hj)?)?.max_abs());
    }
    r.push(Check::at_most(
        "S3xS1: L(X θ) for a Killing X",
        "the comparison field is closed for the quotient Calabi operator",
        l3,
        tol,
    ));
    let control3 = killing_range_field(JetField::random_polynomial(&mut rng, n3, Valence::OneForm, FIELD_DEGREE));
    let a = exactness_probe(&chart3, &closed, PROBE_GRIDS[0])?;
    let b = exactness_probe(&chart3, &control3, PROBE_GRIDS[0])?;
    r.push(
        Check::at_most(
            format!("S3xS1: probe ratio L-closed / K-range control at grid {}", PROBE_GRIDS[0]),
            "on S3xS1 closed fields are exact, so the probe cannot tell them from the control",
            a.residual / b.residual,
            PROBE_RATIO_CLEAN,
        )
        .with_values(vec![a.residual, b.residual]),
    );
    r.push(Check::holds(
        "least-squares solves converged",
        "probe residuals are optima, not iteration caps",
        on_h.iter().chain(&on_control).chain([&a, &b]).all(|p| p.converged),
    ));

    let noise = JetField::random_polynomial(&mut rng, n, Valence::Symmetric, FIELD_DEGREE);
    let p = sample_point(&mut rng, &chart);
    let geo = PointGeometry::new(&chart, &p, order)?;
    let perturbed = h.plus_scaled(&noise, NOISE)?.eval(&chart, &p, order, n)?;
    r.push(Check::at_least(
        "negative control: h + noise is detected",
        "a perturbed field fails the Calabi type-blocks",
        product_calabi_parts(&chart, &geo, &perturbed, true)?.max_abs(),
        tol,
    ));
    Ok(finish(r, start))
}

/// Closed-form curvature-operator spectrum of a single round sphere,
/// hyperbolic space or complex projective space at unit Ricci, ascending.
pub fn expected_spectrum(spec: &SpaceSpec) -> Option<Vec<f64>> {
    let [f] = spec.factors.as_slice() else {
        return None;
    };
    if f.scale != 1.0 {
        return None;
    }
    let n = f.n;
    let mut v = match f.kind {
        Kind::Sphere | Kind::Hyperbolic if n >= 2 => {
            let s = if f.kind == Kind::Sphere { 1.0 } else { -1.0 };
            vec![s * 2.0 / (n as f64 - 1.0); n * (n - 1) / 2]
        }
        Kind::ComplexProjective => {
            let mut v = vec![0.0; n * (n - 1)];
            v.extend(std::iter::repeat_n(2.0 / (n as f64 + 1.0), n * n - 1));
            v.push(2.0);
            v
        }
        _ => return None,
    };
    v.sort_by(f64::total_cmp);
    Some(v)
}

/// `(zero eigenspace vs C distance, dims match)`.
fn zero_space_vs_c(model: &CurvatureModel) -> Result<(f64, bool)> {
    let spec = curvature_operator_spectrum(model)?;
    let zero: Vec<usize> = (0..spec.eigenvalues.len())
        .filter(|&k| spec.eigenvalues[k].abs() < 1e-6)
        .collect();
    let split = split_two_forms(model, None)?;
    if zero.len() != split.dim_c() {
        return Ok((1.0, false));
    }
    if zero.is_empty() {
        return Ok((0.0, true));
    }
    let m = spec.eigenvalues.len();
    let eig = nalgebra::DMatrix::from_fn(m, zero.len(), |r, c| spec.eigenforms[zero[c]][r]);
    Ok((subspace_distance(&eig, &split.c_coeffs), true))
}

/// Spectrum of the curvature operator on 2-forms with the bound, Kähler and
/// closed-form checks that apply to the spec.
pub fn suite_spectrum(spec: &str, cfg: &RunConfig) -> Result<SuiteReport> {
    cfg.validate()?;
    let start = Instant::now();
    let parsed = parse(spec)?;
    let model = default_model(&parsed)?;
    let s = curvature_operator_spectrum(&model)?;
    let tol = cfg.tol_or(SPECTRUM_TOL);
    let mut r = SuiteReport::new("spectrum", parsed.to_string(), cfg.seed, cfg.order);
    r.push(
        Check::at_most(
            "eigen-decomposition residual",
            "eigenvalues of ω_ab ↦ R_ab^cd ω_cd",
            s.residual,
            tol,
        )
        .with_values(s.eigenvalues.clone()),
    );
    if let Some(expected) = expected_spectrum(&parsed) {
        let dev = max_of(s.eigenvalues.iter().zip(&expected).map(|(a, b)| (a - b).abs()));
        r.push(
            Check::at_most(
                "deviation from the closed-form spectrum",
                "round spheres have the single eigenvalue 2/(n−1); CPⁿ has 0, 2/(n+1), 2",
                if s.eigenvalues.len() == expected.len() { dev } else { f64::INFINITY },
                tol,
            )
            .with_values(expected),
        );
    }
    let unit = !parsed.has_flat_factor() && parsed.factors.iter().all(|f| f.scale == 1.0);
    if unit {
        let sign = if model.scalar_curvature() < 0.0 { -1.0 } else { 1.0 };
        r.push(Check::holds(
            "eigenvalues within the bound interval",
            "unit Ricci puts the spectrum in [0, 2] ([−2, 0] for negative Ricci)",
            s.all_in_bounds,
        ));
        let sum: f64 = s.eigenvalues.iter().sum();
        r.push(Check::at_most(
            "eigenvalue sum minus signed dimension",
            "the trace of the curvature operator is the scalar curvature",
            (sum - sign * model.dim as f64).abs(),
            tol,
        ));
    }
    let (dist, dims) = zero_space_vs_c(&model)?;
    r.push(Check::at_most(
        "zero eigenspace vs C, principal angle",
        "the kernel of the curvature operator is the complement C of K",
        if dims { dist } else { f64::INFINITY },
        ANGLE_TOL,
    ));
    if unit {
        let has_top = s.groups.iter().any(|(v, _)| (v.abs() - 2.0).abs() < 1e-6);
        r.push(Check::holds(
            "eigenvalue 2 present iff a Hermitian factor exists",
            "the extreme eigenvalue is attained exactly by Kähler forms",
            has_top == model.has_hermitian_factor() && (!has_top || s.top_is_kahler),
        ));
    }
    Ok(finish(r, start))
}

/// Dimensions of `K = ker ℛ` and its complement `C` in `Λ²`.
pub fn suite_split(spec: &str, cfg: &RunConfig) -> Result<SuiteReport> {
    cfg.validate()?;
    let start = Instant::now();
    let parsed = parse(spec)?;
    let model = default_model(&parsed)?;
    let split = split_two_forms(&model, None)?;
    let n = model.dim;
    let total = (n * (n - 1) / 2) as f64;
    let mut r = SuiteReport::new("split", parsed.to_string(), cfg.seed, cfg.order);
    r.push(Check::at_most("dim_K", "K is the kernel of the curvature homomorphism on 2-forms", split.dim_k() as f64, total));
    r.push(Check::at_most("dim_C", "C is the orthogonal complement of K", split.dim_c() as f64, total));
    r.push(Check::holds(
        "dim_K + dim_C = dim Λ²",
        "K and C split the 2-forms",
        split.dim_k() + split.dim_c() == n * (n - 1) / 2,
    ));
    let on_k = split
        .k_basis
        .iter()
        .map(|k| curvature_homomorphism(&model, k).map(|t| t.max_abs()))
        .collect::<Result<Vec<_>>>()?;
    let scale = model.riemann.max_abs().max(1.0);
    r.push(Check::at_most(
        "max |ℛ(κ)| over a basis of K",
        "the curvature homomorphism vanishes on K",
        max_of(on_k) / scale,
        cfg.tol_or(SPECTRUM_TOL),
    ));
    Ok(finish(r, start))
}

/// Bounds, zero eigenspace, Kähler detection and trace checks across specs;
/// mixed-scale products are checked through the S-tensor.
pub fn suite_eigen_theorem(specs: &[&str], cfg: &RunConfig) -> Result<SuiteReport> {
    cfg.validate()?;
    let start = Instant::now();
    let tol = cfg.tol_or(SPECTRUM_TOL);
    let mut r = SuiteReport::new("eigen-theorem", specs.join(","), cfg.seed, cfg.order);
    for spec in specs {
        let parsed = parse(spec)?;
        if parsed.has_flat_factor() {
            return Err(Error::DegenerateRicci(format!("{parsed} has a flat factor")));
        }
        let model = model_from_spec(&parsed, Normalization::UnitRicci)?;
        let label = parsed.to_string();
        let unit = parsed.factors.iter().all(|f| f.scale == 1.0);
        if unit {
            let s = curvature_operator_spectrum(&model)?;
            let sign = if model.scalar_curvature() < 0.0 { -1.0 } else { 1.0 };
            r.push(
                Check::holds(
                    format!("{label}: eigenvalues within bounds"),
                    "unit Ricci puts the spectrum in [0, 2] ([−2, 0] for negative Ricci)",
                    s.all_in_bounds,
                )
                .with_values(s.eigenvalues.clone()),
            );
            let has_top = s.groups.iter().any(|(v, _)| (v - 2.0 * sign).abs() < 1e-6);
            r.push(Check::holds(
                format!("{label}: eigenvalue ±2 iff Hermitian, spanned by Kähler forms"),
                "the extreme eigenvalue is attained exactly by Kähler forms",
                has_top == model.has_hermitian_factor() && (!has_top || s.top_is_kahler),
            ));
            let sum: f64 = s.eigenvalues.iter().sum();
            r.push(Check::at_most(
                format!("{label}: eigenvalue sum minus signed dimension"),
                "the trace of the curvature operator is the scalar curvature",
                (sum - sign * model.dim as f64).abs(),
                tol,
            ));
            let (dist, dims) = zero_space_vs_c(&model)?;
            r.push(Check::at_most(
                format!("{label}: zero eigenspace vs C"),
                "the kernel of the curvature operator is the complement C of K",
                if dims { dist } else { f64::INFINITY },
                ANGLE_TOL,
            ));
        } else {
            let s = s_operator_spectrum(&model)?;
            let lo = s.first().copied().unwrap_or(0.0);
            let hi = s.last().copied().unwrap_or(0.0);
            r.push(
                Check::holds(
                    format!("{label}: S-operator eigenvalues in [0, 2]"),
                    "the Ricci-normalised curvature operator is bounded on any product",
                    lo >= -tol && hi <= 2.0 + tol,
                )
                .with_values(s.clone()),
            );
            let has_top = s.iter().any(|v| (v - 2.0).abs() < 1e-6);
            r.push(Check::holds(
                format!("{label}: S-eigenvalue 2 iff Hermitian"),
                "the extreme eigenvalue is attained exactly by Kähler forms",
                has_top == model.has_hermitian_factor(),
            ));
        }
    }

    // An arbitrary curvature tensor obeys none of this.
    let mut rng = cfg.rng(stream::CONTROL, 0);
    let raw = random_riemann_tensor(4, || rng.random_range(-1.0..=1.0));
    let mut control = model_from_spec(&parse("S4")?, Normalization::UnitRicci)?;
    control.riemann = raw;
    let s = curvature_operator_spectrum(&control)?;
    let spread = s.eigenvalues.last().unwrap_or(&0.0) - s.eigenvalues.first().unwrap_or(&0.0);
    r.push(Check::at_least(
        "negative control: random curvature tensor spectrum",
        "a non-Einstein curvature tensor breaks the interval bound",
        if s.all_in_bounds { 0.0 } else { spread },
        tol,
    ));
    Ok(finish(r, start))
}

/// Residuals of one Khavkine trial, or the singular denominator met.
enum KhavkineTrial {
    Regular { op: f64, j: f64 },
    Singular(f64),
}

/// Khavkine operator on the Killing range of a warped plane, with the
/// scalar-trace and deformation identities on the same chart.
pub fn suite_khavkine(omega: WarpFunction, cfg: &RunConfig) -> Result<SuiteReport> {
    cfg.validate()?;
    let start = Instant::now();
    let order = cfg.jet_order("Khavkine operator", 5)?;
    let chart = warped2d(omega);
    let tol = cfg.tol_or(KHAVKINE_TOL);
    type Row = (KhavkineTrial, f64, f64);
    let rows: Vec<Row> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| -> Result<Row> {
            let mut rng = cfg.rng(stream::KHAVKINE, t);
            let sigma = JetField::random_polynomial(&mut rng, 2, Valence::OneForm, FIELD_DEGREE);
            let h = JetField::random_polynomial(&mut rng, 2, Valence::Symmetric, FIELD_DEGREE);
            let p = sample_point(&mut rng, &chart);
            let point = [p[0], p[1]];
            let s = sigma.eval(&chart, &p, order, 2)?;
            let (pp, q, rr) = killing_2d(omega, point, s.get(&[0]), s.get(&[1]))?;
            let trial = match khavkine_op(omega, point, &pp, &q, &rr) {
                Ok(v) => KhavkineTrial::Regular {
                    op: v.first.abs().max(v.second.abs()),
                    j: (v.j - s.get(&[1]).value()).abs(),
                },
                Err(Error::SingularWarp { value }) => KhavkineTrial::Singular(value.abs()),
                Err(e) => return Err(e),
            };
            let geo = PointGeometry::new(&chart, &p, 3)?;
            let s3 = sigma.eval(&chart, &p, 3, 2)?;
            let lemma = trace_lemma_residual(&geo, &s3)?;
            let deformation = deformation_residual(&chart, &geo, &p, &h)?;
            Ok((trial, lemma, deformation))
        })
        .collect::<Result<_>>()?;

    let mut r = SuiteReport::new("khavkine", format!("warped-{}", omega.name()), cfg.seed, order);
    let singular: Vec<f64> = rows
        .iter()
        .filter_map(|(k, _, _)| match k {
            KhavkineTrial::Singular(v) => Some(*v),
            KhavkineTrial::Regular { .. } => None,
        })
        .collect();
    if singular.is_empty() {
        let (op, j): (Vec<f64>, Vec<f64>) = rows
            .iter()
            .filter_map(|(k, _, _)| match k {
                KhavkineTrial::Regular { op, j } => Some((*op, *j)),
                KhavkineTrial::Singular(_) => None,
            })
            .unzip();
        r.push(Check::at_most(
            "Khavkine∘K residual",
            "the fourth-order operator annihilates the Killing range on the warped plane",
            max_of(op),
            tol,
        ));
        r.push(Check::at_most(
            "J(K(X, ξ)) − ξ",
            "the intermediate J recovers the t-component of the one-form",
            max_of(j),
            tol,
        ));
    } else {
        r.push(Check::at_least(
            "precondition: |Υ'' + 2ΥΥ'| at sampled points",
            "the Khavkine operator is defined only off the locus Υ'' + 2ΥΥ' = 0",
            max_of(singular),
            crate::diffops::SINGULAR_TOL,
        ));
    }
    r.push(Check::at_most(
        "trace(C(K σ)) + (∇R)σ",
        "the trace of the Calabi operator sends K(σ) to −(∇^b R) σ_b",
        max_of(rows.iter().map(|x| x.1)),
        cfg.tol_or(TRACE_TOL_WARPED),
    ));
    r.push(Check::at_most(
        "ε-coefficient of R(g + εh) + ½ trace(C h)",
        "the linearised scalar curvature is −½ the trace of the Calabi operator",
        max_of(rows.iter().map(|x| x.2)),
        cfg.tol_or(IDENTITY_TOL),
    ));
    r.push(Check::at_least(
        "negative control: K(σ) + noise fails the trace identity",
        "a perturbed field is not sent to −(∇R)σ",
        perturbed_trace_lemma(&chart, cfg, stream::KHAVKINE)?,
        cfg.tol_or(TRACE_TOL_WARPED),
    ));
    Ok(finish(r, start))
}

fn trace_lemma_residual(geo: &PointGeometry, sigma: &JetTensor) -> Result<f64> {
    let h = killing_op(geo, sigma)?;
    Ok((trace_composition(geo, &h)? + scalar_gradient_pairing(geo, sigma)?).abs())
}

fn deformation_residual(chart: &ChartGeometry, geo: &PointGeometry, p: &[f64], h: &JetField) -> Result<f64> {
    let coef = deformation_coefficient(chart, p, h, 3)?;
    let tr = trace_composition(geo, &h.eval(chart, p, 3, chart.dim())?)?;
    Ok((coef + 0.5 * tr).abs())
}

fn perturbed_trace_lemma(chart: &ChartGeometry, cfg: &RunConfig, salt: u64) -> Result<f64> {
    let mut rng = cfg.rng(stream::CONTROL, salt as usize);
    let n = chart.dim();
    let sigma = JetField::random_polynomial(&mut rng, n, Valence::OneForm, FIELD_DEGREE);
    let noise = JetField::random_polynomial(&mut rng, n, Valence::Symmetric, FIELD_DEGREE);
    let p = sample_point(&mut rng, chart);
    let geo = PointGeometry::new(chart, &p, 3)?;
    let s = sigma.eval(chart, &p, 3, n)?;
    let h = add_scaled(&killing_op(&geo, &s)?, &noise.eval(chart, &p, 3, n)?, NOISE);
    Ok((trace_composition(&geo, &h)? + scalar_gradient_pairing(&geo, &s)?).abs())
}

/// `6 J^ab ∇_a Y_b` at the point.
fn kahler_pairing(geo: &PointGeometry, j: &JetTensor, y: &[Jet]) -> Result<f64> {
    let dy = geo.covariant(&one_form(y.to_vec()))?.values();
    let gi = geo.g_inv.values();
    let jv = j.values();
    let n = geo.dim;
    let mut s = 0.0;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    s += gi.get(&[a, c]) * gi.get(&[b, d]) * jv.get(&[c, d]) * dy.get(&[a, b]);
                }
            }
        }
    }
    Ok(6.0 * s)
}

/// `trace(𝒞(𝒦X + Y⊙φ)) = 6J^ab∇_aY_b` on `CPⁿ` for Killing `Y`.
pub fn suite_cpn_refined(n: usize, cfg: &RunConfig) -> Result<SuiteReport> {
    cfg.validate()?;
    if n == 0 {
        return Err(Error::InvalidArgument("CPⁿ needs n ≥ 1".into()));
    }
    let start = Instant::now();
    let order = cfg.jet_order("refined trace identity", 3)?;
    let spec = format!("CP{n}");
    let chart = make_chart(&parse(&spec)?)?;
    let dim = chart.dim();
    let killing = chart.killing_fields().len();
    let tol = cfg.tol_or(IDENTITY_TOL);
    type Row = (f64, f64);
    let evaluate = |rng: &mut rand_chacha::ChaCha8Rng, noise: f64| -> Result<Row> {
        let x = JetField::random_polynomial(rng, dim, Valence::OneForm, FIELD_DEGREE);
        let coeffs: Vec<f64> = (0..killing).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let extra = JetField::random_polynomial(rng, dim, Valence::Symmetric, FIELD_DEGREE);
        let p = sample_point(rng, &chart);
        let geo = PointGeometry::new(&chart, &p, order)?;
        let kx = killing_op(&geo, &x.eval(&chart, &p, order, dim)?)?;
        let y = killing_combination(&chart, &coeffs, &p, order, dim)?;
        let phi = chart.kahler_primitive(0, &p, order, dim)?;
        let j = chart.kahler_jets(0, &p, order, dim)?;
        let mut h = add_scaled(&kx, &symmetric_product(&y, &phi), 1.0);
        if noise != 0.0 {
            h = add_scaled(&h, &extra.eval(&chart, &p, order, dim)?, noise);
        }
        let identity = (trace_composition(&geo, &h)? - kahler_pairing(&geo, &j, &y)?).abs();
        let pure = trace_composition(&geo, &kx)?.abs();
        Ok((identity, pure))
    };
    let rows: Vec<Row> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| evaluate(&mut cfg.rng(stream::REFINED, t), 0.0))
        .collect::<Result<_>>()?;

    let mut r = SuiteReport::new("refined-cpn", spec, cfg.seed, order);
    r.push(Check::at_most(
        "trace(C(K X + Y⊙φ)) − 6 J^ab ∇_a Y_b",
        "on CPⁿ the trace sends K X + Y⊙φ to 6 J^ab ∇_a Y_b for Killing Y",
        max_of(rows.iter().map(|x| x.0)),
        tol,
    ));
    r.push(Check::at_most(
        "trace(C(K X)) with Y = 0",
        "the trace annihilates the Killing range on a locally symmetric space",
        max_of(rows.iter().map(|x| x.1)),
        tol,
    ));
    let model = fubini_study_model(n, Normalization::UnitRicci)?;
    r.push(Check::at_most(
        "J^bc R_bc^d_a − 2 J^d_a on the model",
        "the Kähler form is an eigenform of the curvature with eigenvalue 2",
        kahler_trace_residual(&model)?,
        tol,
    ));
    let (control, _) = evaluate(&mut cfg.rng(stream::CONTROL, stream::REFINED as usize), NOISE)?;
    r.push(Check::at_least(
        "negative control: h + noise breaks the identity",
        "a perturbed field is not sent to 6 J^ab ∇_a Y_b",
        control,
        tol,
    ));
    Ok(finish(r, start))
}

/// Per-trial residuals of the pointwise identities.
struct IdentityRow {
    prolonged_calabi: f64,
    killing_parallel: f64,
    curvature: f64,
    calabi_of_killing: f64,
    trace: f64,
    deformation: f64,
}

/// Pointwise identities on one chart: the prolonged form of the Calabi
/// operator, parallel Killing data, the prolongation curvature, the trace
/// lemma and the deformation identity.
pub fn suite_identities(chart_label: &str, cfg: &RunConfig) -> Result<SuiteReport> {
    cfg.validate()?;
    let start = Instant::now();
    let order = cfg.jet_order("prolongation curvature", 3)?;
    let chart = chart_from_label(chart_label)?;
    let n = chart.dim();
    let warped = chart.is_warped();
    let killing = chart.killing_fields().len();
    let tol = cfg.tol_or(IDENTITY_TOL);
    let rows: Vec<IdentityRow> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| -> Result<IdentityRow> {
            let mut rng = cfg.rng(stream::IDENTITIES, t);
            let hf = JetField::random_polynomial(&mut rng, n, Valence::Symmetric, FIELD_DEGREE);
            let sf = JetField::random_polynomial(&mut rng, n, Valence::OneForm, FIELD_DEGREE);
            let coeffs: Vec<f64> = (0..killing).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let p = sample_point(&mut rng, &chart);
            let geo = PointGeometry::new(&chart, &p, order)?;

            let h = hf.eval(&chart, &p, order, n)?;
            let c = calabi_op(&geo, &h)?;
            let (first, second) = calabi_via_prolongation(&geo, &h)?;
            let prolonged_calabi = first.max_abs().max(second.sub(&c).max_abs()) / c.max_abs().max(1.0);

            let x = one_form(killing_combination(&chart, &coeffs, &p, order, n)?);
            let (tau, nu) = prolongation_derivative(&geo, &ProlongationSection::from_one_form(&geo, x)?)?;
            let killing_parallel = tau.values().max_abs().max(nu.values().max_abs());

            let sigma = sf.eval(&chart, &p, order, n)?;
            let section = ProlongationSection::from_one_form(&geo, sigma.clone())?;
            let curvature = prolongation_curvature_residual(&geo, &section, warped)?;
            let calabi_of_killing = if warped {
                0.0
            } else {
                let kc = calabi_op(&geo, &killing_op(&geo, &sigma)?)?;
                kc.sub(&crate::diffops::curvature_hom_at(&geo, &section.mu.values())).max_abs()
            };
            let trace = trace_lemma_residual(&geo, &sigma)?;
            let deformation = deformation_residual(&chart, &geo, &p, &hf)?;
            Ok(IdentityRow {
                prolonged_calabi,
                killing_parallel,
                curvature,
                calabi_of_killing,
                trace,
                deformation,
            })
        })
        .collect::<Result<_>>()?;

    let label = if warped { chart_label.to_string() } else { chart.label.clone() };
    let mut r = SuiteReport::new("identities", label, cfg.seed, order);
    r.push(Check::at_most(
        "prolonged h: D∧[h; 2∇_[c h_d]b] − [0; C h], relative",
        "the exterior covariant derivative of the prolonged tensor is [0; C h]",
        max_of(rows.iter().map(|x| x.prolonged_calabi)),
        tol,
    ));
    r.push(Check::at_most(
        "D[X; ∇_[a X_b]] for Killing X",
        "Killing fields and their exterior derivatives are parallel for the prolongation connection",
        max_of(rows.iter().map(|x| x.killing_parallel)),
        tol,
    ));
    r.push(Check::at_most(
        if warped {
            "prolongation curvature − (ℛ(μ) − (∇R)σ)"
        } else {
            "prolongation curvature − ℛ(μ)"
        },
        if warped {
            "the curvature of the prolongation connection, with the gradient term off locally symmetric spaces"
        } else {
            "the curvature of the prolongation connection is [0; ℛ(μ)]"
        },
        max_of(rows.iter().map(|x| x.curvature)),
        tol,
    ));
    if !warped {
        r.push(Check::at_most(
            "C(K σ) − ℛ(∇_[a σ_b])",
            "the Calabi operator maps the Killing range into the image of ℛ",
            max_of(rows.iter().map(|x| x.calabi_of_killing)),
            tol,
        ));
    }
    r.push(Check::at_most(
        "trace(C(K σ)) + (∇R)σ",
        "the trace of the Calabi operator sends K(σ) to −(∇^b R) σ_b",
        max_of(rows.iter().map(|x| x.trace)),
        cfg.tol_or(if warped { TRACE_TOL_WARPED } else { TRACE_TOL_SYMMETRIC }),
    ));
    r.push(Check::at_most(
        "ε-coefficient of R(g + εh) + ½ trace(C h)",
        "the linearised scalar curvature is −½ the trace of the Calabi operator",
        max_of(rows.iter().map(|x| x.deformation)),
        tol,
    ));

    let mut rng = cfg.rng(stream::CONTROL, stream::IDENTITIES as usize);
    let hf = JetField::random_polynomial(&mut rng, n, Valence::Symmetric, FIELD_DEGREE);
    let noise = JetField::random_polynomial(&mut rng, n, Valence::Symmetric, FIELD_DEGREE);
    let p = sample_point(&mut rng, &chart);
    let geo = PointGeometry::new(&chart, &p, order)?;
    let h = hf.eval(&chart, &p, order, n)?;
    let (_, second) = calabi_via_prolongation(&geo, &h)?;
    let c = calabi_op(&geo, &add_scaled(&h, &noise.eval(&chart, &p, order, n)?, NOISE))?;
    r.push(Check::at_least(
        "negative control: prolonged h against C(h + noise)",
        "the prolonged identity distinguishes h from a perturbation",
        second.sub(&c).max_abs() / c.max_abs().max(1.0),
        tol,
    ));
    Ok(finish(r, start))
}

/// Lie triple system identity on constructed models and on chart models at
/// random points; random curvature tensors must violate it.
pub fn suite_lts(specs: &[&str], cfg: &RunConfig) -> Result<SuiteReport> {
    cfg.validate()?;
    let start = Instant::now();
    let tol = cfg.tol_or(LTS_TOL);
    let mut worst: f64 = 0.0;
    let mut rng = cfg.rng(stream::LTS, 0);
    for spec in specs {
        let parsed = parse(spec)?;
        worst = worst.max(lts_residual(&default_model(&parsed)?));
        let chart = make_chart(&parsed)?;
        let p = sample_point(&mut rng, &chart);
        worst = worst.max(lts_residual(&chart.model_at(&p)?));
    }
    let mut r = SuiteReport::new("lts", specs.join(","), cfg.seed, cfg.order);
    r.push(Check::at_most(
        "Lie triple system residual",
        "the curvature of a locally symmetric space is a Lie triple system",
        worst,
        tol,
    ));
    let violations: Vec<f64> = (0..LTS_CONTROL_SAMPLES)
        .into_par_iter()
        .map(|k| {
            let mut rng = cfg.rng(stream::LTS, k + 1);
            lts_residual_raw(&random_riemann_tensor(4, || rng.random_range(-1.0..=1.0)))
        })
        .collect();
    let caught = violations.iter().filter(|&&v| v > LTS_CONTROL_FLOOR).count() as f64;
    r.push(Check::at_least(
        "negative control: fraction of random curvature tensors rejected",
        "a generic algebraic curvature tensor is not a Lie triple system",
        caught / LTS_CONTROL_SAMPLES as f64,
        LTS_CONTROL_FRACTION,
    ));
    Ok(finish(r, start))
}

/// Every suite, in a fixed order.
pub fn suite_all(cfg: &RunConfig) -> Result<Vec<SuiteReport>> {
    type Job<'a> = Box<dyn Fn() -> Result<Vec<SuiteReport>> + Send + Sync + 'a>;
    let mut jobs: Vec<Job> = Vec::new();
    for s in SPHERE_SPECS.iter().chain(&CPN_SPECS) {
        jobs.push(Box::new(move || Ok(vec![suite_spectrum(s, cfg)?])));
    }
    jobs.push(Box::new(|| Ok(vec![suite_eigen_theorem(&EIGEN_SPECS, cfg)?])));
    for s in COMPLEX_SPECS {
        jobs.push(Box::new(move || Ok(vec![suite_complex(s, cfg)?])));
    }
    for c in IDENTITY_CHARTS {
        jobs.push(Box::new(move || Ok(vec![suite_identities(c, cfg)?])));
    }
    for w in [WarpFunction::Cosh, WarpFunction::ExpHalfSquare] {
        jobs.push(Box::new(move || Ok(vec![suite_khavkine(w, cfg)?])));
    }
    jobs.push(Box::new(|| Ok(vec![suite_counterexample(cfg)?])));
    for n in [1, 2] {
        jobs.push(Box::new(move || Ok(vec![suite_cpn_refined(n, cfg)?])));
    }
    jobs.push(Box::new(|| Ok(vec![suite_lts(&LTS_SPECS, cfg)?])));
    let out: Vec<Vec<SuiteReport>> = jobs.par_iter().map(|j| j()).collect::<Result<_>>()?;
    Ok(out.into_iter().flatten().collect())
}
