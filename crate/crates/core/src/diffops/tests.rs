use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::models::{make_chart, warped2d, WarpFunction};
use crate::space::parse_space_spec;
use crate::tensor::riemann_project;

fn chart(spec: &str) -> ChartGeometry {
    make_chart(&parse_space_spec(spec).unwrap()).unwrap()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const CHARTS: [&str; 8] = ["S2", "S3", "CP2", "H2", "S2xS2", "S3xS1", "CP1xS2", "S2xS1"];

#[test]
fn christoffels_vanish_where_expected() {
    let flat = chart("R3");
    let geo = PointGeometry::new(&flat, &[0.1, 0.2, -0.3], 3).unwrap();
    assert_eq!(geo.gamma.values().max_abs(), 0.0);
    let s2 = chart("S2");
    let geo = PointGeometry::new(&s2, &[0.0, 0.0], 3).unwrap();
    assert!(geo.gamma.values().max_abs() < 1e-15);
}

#[test]
fn metric_is_parallel() {
    let mut r = rng(1);
    for spec in CHARTS {
        let c = chart(spec);
        let p = random_point(&mut r, c.dim(), 0.4);
        let geo = PointGeometry::new(&c, &p, 3).unwrap();
        let dg = geo.covariant(&geo.g).unwrap();
        assert!(dg.values().max_abs() < 1e-11, "{spec}");
    }
}

#[test]
fn jet_inverse_is_exact_to_full_order() {
    let c = chart("CP2");
    let geo = PointGeometry::new(&c, &[0.1, -0.2, 0.3, 0.05], 4).unwrap();
    let n = geo.dim;
    for a in 0..n {
        for b in 0..n {
            let mut acc = Jet::zero(n, 4);
            for k in 0..n {
                acc.add_product(geo.g.get(&[a, k]), geo.g_inv.get(&[k, b]));
            }
            let want = if a == b { 1.0 } else { 0.0 };
            assert!((&acc + -want).max_abs() < 1e-13);
        }
    }
}

#[test]
fn curvature_matches_known_values() {
    let s2 = chart("S2");
    for p in [[0.0, 0.0], [0.3, -0.1], [-0.2, 0.25]] {
        let geo = PointGeometry::new(&s2, &p, 3).unwrap();
        assert!((geo.scalar_curvature().value() - 2.0).abs() < 1e-12);
    }
    let w = warped2d(WarpFunction::Cosh);
    let geo = PointGeometry::new(&w, &[0.1, 0.3], 3).unwrap();
    assert!((geo.scalar_curvature().value() + 2.0).abs() < 1e-12);
    let flat = chart("R2");
    let geo = PointGeometry::new(&flat, &[0.1, 0.3], 3).unwrap();
    assert_eq!(geo.riemann.values().max_abs(), 0.0);
}

#[test]
fn chart_curvature_matches_the_algebraic_model() {
    let mut r = rng(2);
    for spec in CHARTS {
        let c = chart(spec);
        let p = random_point(&mut r, c.dim(), 0.4);
        let geo = PointGeometry::new(&c, &p, 2).unwrap();
        let model = c.model_at(&p).unwrap();
        let diff = geo.riemann.values().sub(&model.riemann).max_abs();
        assert!(diff < 1e-11, "{spec}: {diff:e}");
    }
}

#[test]
fn order_below_two_is_rejected() {
    let c = chart("S2");
    assert!(matches!(
        PointGeometry::new(&c, &[0.0, 0.0], 1),
        Err(Error::InsufficientOrder { .. })
    ));
}

#[test]
fn closed_form_killing_fields_are_killing() {
    let mut r = rng(3);
    let mut specs = CHARTS.to_vec();
    specs.push("R3");
    for spec in specs {
        let c = chart(spec);
        let p = random_point(&mut r, c.dim(), 0.4);
        let geo = PointGeometry::new(&c, &p, 3).unwrap();
        for kf in c.killing_fields() {
            let sigma = one_form(kf.one_form(&c, &p, 3, c.dim()).unwrap());
            let k = killing_op(&geo, &sigma).unwrap().values().max_abs();
            assert!(k < 1e-11, "{spec} {}: {k:e}", kf.name);
        }
    }
}

#[test]
fn killing_op_is_symmetric() {
    let c = chart("S3");
    let sigma = JetField::random_polynomial(&mut rng(4), 3, Valence::OneForm, 3);
    let p = [0.1, 0.2, -0.1];
    let geo = PointGeometry::new(&c, &p, 3).unwrap();
    let h = killing_op(&geo, &sigma.eval(&c, &p, 3, 3).unwrap()).unwrap().values();
    assert!(h.sub(&h.permute(&[1, 0])).max_abs() < 1e-12);
}

#[test]
fn calabi_of_metric_is_twice_curvature() {
    // derivative terms vanish and the curvature terms add up to 2R
    for spec in ["S3", "CP2", "S2xS1", "R3"] {
        let c = chart(spec);
        let p = vec![0.1; c.dim()];
        let geo = PointGeometry::new(&c, &p, 3).unwrap();
        let out = calabi_op(&geo, &geo.g).unwrap();
        let want = geo.riemann.values().scale(2.0);
        assert!(out.sub(&want).max_abs() < 1e-11, "{spec}");
    }
}

#[test]
fn calabi_on_unit_sphere_matches_closed_form() {
    let c = chart("S3@1");
    let mut r = rng(5);
    let h = JetField::random_polynomial(&mut r, 3, Valence::Symmetric, 3);
    let p = random_point(&mut r, 3, 0.4);
    let geo = PointGeometry::new(&c, &p, 3).unwrap();
    let hj = h.eval(&c, &p, 3, 3).unwrap();
    // S3 with unit Ricci has sectional curvature ½; use the unit sphere
    let unit = crate::models::make_chart_with(&parse_space_spec("S3").unwrap(), crate::models::Normalization::UnitCurvature).unwrap();
    let geo_u = PointGeometry::new(&unit, &p, 3).unwrap();
    let dd = geo_u.second_covariant(&hj).unwrap().values();
    let g = geo_u.g.values();
    let hv = hj.values();
    let t = |a: usize, c: usize, b: usize, d: usize| {
        0.5 * (dd.get(&[a, c, b, d]) + dd.get(&[c, a, b, d])) + g.get(&[a, c]) * hv.get(&[b, d])
    };
    let closed = PointTensor::lower(3, 4, |i| {
        let (a, b, c, d) = (i[0], i[1], i[2], i[3]);
        t(a, c, b, d) - t(b, c, a, d) - t(a, d, b, c) + t(b, d, a, c)
    });
    let direct = calabi_op(&geo_u, &hj).unwrap();
    assert!(direct.sub(&closed).max_abs() < 1e-10);
    let _ = geo;
}

#[test]
fn calabi_output_has_riemann_symmetries() {
    let c = chart("CP2");
    let mut r = rng(6);
    let h = JetField::random_polynomial(&mut r, 4, Valence::Symmetric, 3);
    let p = random_point(&mut r, 4, 0.4);
    let geo = PointGeometry::new(&c, &p, 3).unwrap();
    let out = calabi_op(&geo, &h.eval(&c, &p, 3, 4).unwrap()).unwrap();
    let projected = riemann_project(&out).unwrap();
    assert!(projected.sub(&out).max_abs() < 1e-10 * (1.0 + out.max_abs()));
}

#[test]
fn calabi_of_killing_range_is_curvature_of_exterior_derivative() {
    let mut r = rng(7);
    for spec in CHARTS {
        let c = chart(spec);
        let n = c.dim();
        let sigma = JetField::random_polynomial(&mut r, n, Valence::OneForm, 3);
        let p = random_point(&mut r, n, 0.4);
        let geo = PointGeometry::new(&c, &p, 3).unwrap();
        let s = sigma.eval(&c, &p, 3, n).unwrap();
        let h = killing_op(&geo, &s).unwrap();
        let lhs = calabi_op(&geo, &h).unwrap();
        let rhs = curvature_hom_at(&geo, &exterior_half(&geo, &s).unwrap().values());
        assert!(lhs.sub(&rhs).max_abs() < 1e-9, "{spec}");
    }
}

#[test]
fn prolonged_calabi_agrees_with_direct_formula() {
    let mut r = rng(8);
    let mut charts: Vec<ChartGeometry> = CHARTS.iter().map(|s| chart(s)).collect();
    charts.push(warped2d(WarpFunction::Cosh));
    charts.push(warped2d(WarpFunction::ExpHalfSquare));
    for c in &charts {
        let n = c.dim();
        let h = JetField::random_polynomial(&mut r, n, Valence::Symmetric, 3);
        let p = random_point(&mut r, n, 0.4);
        let geo = PointGeometry::new(c, &p, 3).unwrap();
        let hj = h.eval(c, &p, 3, n).unwrap();
        let direct = calabi_op(&geo, &hj).unwrap();
        let (first, second) = calabi_via_prolongation(&geo, &hj).unwrap();
        assert!(first.max_abs() < 1e-12, "{}", c.label);
        assert!(second.sub(&direct).max_abs() < 1e-9, "{}", c.label);
    }
}

#[test]
fn l_op_equals_calabi_on_constant_curvature() {
    let mut r = rng(9);
    for spec in ["S3", "S4", "H2"] {
        let c = chart(spec);
        let n = c.dim();
        let h = JetField::random_polynomial(&mut r, n, Valence::Symmetric, 3);
        let p = random_point(&mut r, n, 0.4);
        let geo = PointGeometry::new(&c, &p, 3).unwrap();
        let hj = h.eval(&c, &p, 3, n).unwrap();
        let e = geo.metric().unwrap().orthonormal_frame();
        let direct = calabi_op(&geo, &hj).unwrap().in_frame(&e);
        let l = l_op(&geo, &hj).unwrap();
        assert!(direct.sub(&l).max_abs() < 1e-10 * (1.0 + direct.max_abs()), "{spec}");
    }
}

#[test]
fn l_op_annihilates_killing_range_on_cp2() {
    let c = chart("CP2");
    let mut r = rng(10);
    for _ in 0..3 {
        let sigma = JetField::random_polynomial(&mut r, 4, Valence::OneForm, 3);
        let p = random_point(&mut r, 4, 0.4);
        let geo = PointGeometry::new(&c, &p, 3).unwrap();
        let h = killing_op(&geo, &sigma.eval(&c, &p, 3, 4).unwrap()).unwrap();
        let l = l_op(&geo, &h).unwrap();
        let full = calabi_op(&geo, &h).unwrap();
        assert!(full.max_abs() > 1e-3, "test field is not trivially annihilated");
        assert!(l.max_abs() < 1e-9);
    }
}

#[test]
fn killing_data_are_parallel_for_the_prolongation() {
    let mut r = rng(11);
    for spec in ["S2", "S3", "CP2", "H2", "S2xS1"] {
        let c = chart(spec);
        let p = random_point(&mut r, c.dim(), 0.4);
        let geo = PointGeometry::new(&c, &p, 4).unwrap();
        for kf in c.killing_fields() {
            let sigma = one_form(kf.one_form(&c, &p, 4, c.dim()).unwrap());
            let s = ProlongationSection::from_one_form(&geo, sigma).unwrap();
            let (tau, nu) = prolongation_derivative(&geo, &s).unwrap();
            assert!(tau.values().max_abs() < 1e-10, "{spec} {}", kf.name);
            assert!(nu.values().max_abs() < 1e-10, "{spec} {}", kf.name);
        }
    }
}

#[test]
fn prolongation_of_constant_two_form_on_flat_chart() {
    let c = chart("R3");
    let p = [0.1, 0.2, 0.3];
    let geo = PointGeometry::new(&c, &p, 3).unwrap();
    let mu = JetField::polynomial(
        3,
        Valence::TwoForm,
        vec![vec![(vec![0, 0, 0], 1.5)], vec![(vec![0, 0, 0], -0.5)], vec![(vec![0, 0, 0], 2.0)]],
    )
    .unwrap()
    .eval(&c, &p, 3, 3)
    .unwrap();
    let zero = JetField::polynomial(3, Valence::OneForm, vec![vec![]; 3])
        .unwrap()
        .eval(&c, &p, 3, 3)
        .unwrap();
    let s = ProlongationSection::new(zero, mu.clone()).unwrap();
    let (tau, nu) = prolongation_derivative(&geo, &s).unwrap();
    assert!(tau.values().add(&mu.values()).max_abs() < 1e-15);
    assert_eq!(nu.values().max_abs(), 0.0);
}

#[test]
fn non_antisymmetric_mu_is_rejected() {
    let c = chart("R2");
    let h = JetField::random_polynomial(&mut rng(12), 2, Valence::Symmetric, 1)
        .eval(&c, &[0.0, 0.0], 2, 2)
        .unwrap();
    let sigma = JetField::random_polynomial(&mut rng(13), 2, Valence::OneForm, 1)
        .eval(&c, &[0.0, 0.0], 2, 2)
        .unwrap();
    assert!(matches!(
        ProlongationSection::new(sigma, h),
        Err(Error::NotAntisymmetric(_))
    ));
}

#[test]
fn prolongation_curvature_matches_closed_form() {
    let mut r = rng(14);
    for spec in CHARTS {
        let c = chart(spec);
        let n = c.dim();
        let p = random_point(&mut r, n, 0.4);
        let geo = PointGeometry::new(&c, &p, 3).unwrap();
        let s = ProlongationSection::new(
            JetField::random_polynomial(&mut r, n, Valence::OneForm, 3).eval(&c, &p, 3, n).unwrap(),
            JetField::random_polynomial(&mut r, n, Valence::TwoForm, 3).eval(&c, &p, 3, n).unwrap(),
        )
        .unwrap();
        let res = prolongation_curvature_residual(&geo, &s, false).unwrap();
        assert!(res < 1e-9, "{spec}: {res:e}");
    }
}

#[test]
fn prolongation_curvature_on_warped_needs_gradient_term() {
    let c = warped2d(WarpFunction::Cosh);
    let mut r = rng(15);
    let p = random_point(&mut r, 2, 0.4);
    let geo = PointGeometry::new(&c, &p, 3).unwrap();
    let s = ProlongationSection::new(
        JetField::random_polynomial(&mut r, 2, Valence::OneForm, 3).eval(&c, &p, 3, 2).unwrap(),
        JetField::random_polynomial(&mut r, 2, Valence::TwoForm, 3).eval(&c, &p, 3, 2).unwrap(),
    )
    .unwrap();
    // cosh is the hyperbolic plane, so ∇R = 0 there
    assert!(prolongation_curvature_residual(&geo, &s, true).unwrap() < 1e-9);
    let c = warped2d(WarpFunction::ExpHalfSquare);
    let geo = PointGeometry::new(&c, &p, 3).unwrap();
    let s = ProlongationSection::new(
        JetField::random_polynomial(&mut r, 2, Valence::OneForm, 3).eval(&c, &p, 3, 2).unwrap(),
        JetField::random_polynomial(&mut r, 2, Valence::TwoForm, 3).eval(&c, &p, 3, 2).unwrap(),
    )
    .unwrap();
    assert!(prolongation_curvature_residual(&geo, &s, true).unwrap() < 1e-9);
    assert!(prolongation_curvature_residual(&geo, &s, false).unwrap() > 1e-3);
}

#[test]
fn trace_composition_of_killing_range() {
    let mut r = rng(16);
    for spec in ["S2", "CP2", "S2xS1"] {
        let c = chart(spec);
        let n = c.dim();
        let p = random_point(&mut r, n, 0.4);
        let geo = PointGeometry::new(&c, &p, 3).unwrap();
        let s = JetField::random_polynomial(&mut r, n, Valence::OneForm, 3).eval(&c, &p, 3, n).unwrap();
        let h = killing_op(&geo, &s).unwrap();
        assert!(trace_composition(&geo, &h).unwrap().abs() < 1e-10, "{spec}");
    }
    for omega in [WarpFunction::Cosh, WarpFunction::ExpHalfSquare] {
        let c = warped2d(omega);
        let p = random_point(&mut r, 2, 0.4);
        let geo = PointGeometry::new(&c, &p, 3).unwrap();
        let s = JetField::random_polynomial(&mut r, 2, Valence::OneForm, 3).eval(&c, &p, 3, 2).unwrap();
        let h = killing_op(&geo, &s).unwrap();
        let lhs = trace_composition(&geo, &h).unwrap();
        let rhs = -scalar_gradient_pairing(&geo, &s).unwrap();
        assert!((lhs - rhs).abs() < 1e-9, "{omega}: {lhs} vs {rhs}");
    }
    let flat = chart("R3");
    let geo = PointGeometry::new(&flat, &[0.1, 0.1, 0.1], 3).unwrap();
    assert_eq!(trace_composition(&geo, &geo.g).unwrap(), 0.0);
}

#[test]
fn deformation_coefficient_is_minus_half_trace_composition() {
    let mut r = rng(17);
    let mut charts = vec![chart("S2"), chart("CP1"), chart("S2xS1")];
    charts.push(warped2d(WarpFunction::ExpHalfSquare));
    for c in &charts {
        let n = c.dim();
        let h = JetField::random_polynomial(&mut r, n, Valence::Symmetric, 3);
        let p = random_point(&mut r, n, 0.4);
        let lin = deformation_coefficient(c, &p, &h, 3).unwrap();
        let geo = PointGeometry::new(c, &p, 3).unwrap();
        let tc = trace_composition(&geo, &h.eval(c, &p, 3, n).unwrap()).unwrap();
        assert!((lin + 0.5 * tc).abs() < 1e-9, "{}: {lin} vs {tc}", c.label);
    }
}

/// `φ_b θ_b̄` with `θ = dz` on `S² × S¹` (or its `S³ × S¹` analogue).
fn counterexample_field(c: &ChartGeometry) -> JetField {
    let c2 = c.clone();
    JetField::custom(Valence::Symmetric, move |_, p, order, nvars| {
        let phi = c2.kahler_primitive(0, p, order, nvars)?;
        let theta: Vec<Jet> = (0..c2.dim())
            .map(|a| Jet::constant(nvars, order, if a == c2.dim() - 1 { 1.0 } else { 0.0 }))
            .collect();
        Ok(symmetric_product(&phi, &theta))
    })
}

#[test]
fn kahler_primitive_has_exterior_derivative_j() {
    let mut r = rng(18);
    for spec in ["S2", "CP1", "CP2", "S2xS1", "H2"] {
        let c = chart(spec);
        let p = random_point(&mut r, c.dim(), 0.4);
        let geo = PointGeometry::new(&c, &p, 3).unwrap();
        let phi = one_form(c.kahler_primitive(0, &p, 3, c.dim()).unwrap());
        let dphi = exterior_half(&geo, &phi).unwrap().values();
        let j = c.kahler_jets(0, &p, 3, c.dim()).unwrap().values();
        assert!(dphi.sub(&j).max_abs() < 1e-10, "{spec}");
    }
}

#[test]
fn counterexample_field_passes_all_four_parts() {
    let c = chart("S2xS1");
    let h = counterexample_field(&c);
    let mut r = rng(19);
    for _ in 0..3 {
        let p = random_point(&mut r, 3, 0.4);
        let geo = PointGeometry::new(&c, &p, 3).unwrap();
        let hj = h.eval(&c, &p, 3, 3).unwrap();
        let parts = product_calabi_parts(&c, &geo, &hj, true).unwrap();
        assert!(parts.max_abs() < 1e-9);
        assert!(l_op(&geo, &hj).unwrap().max_abs() < 1e-9);
    }
}

#[test]
fn killing_range_passes_all_four_parts_only_after_projection() {
    let c = chart("S2xS1");
    let mut r = rng(20);
    let sigma = JetField::random_polynomial(&mut r, 3, Valence::OneForm, 3);
    let p = random_point(&mut r, 3, 0.4);
    let geo = PointGeometry::new(&c, &p, 3).unwrap();
    let h = killing_op(&geo, &sigma.eval(&c, &p, 3, 3).unwrap()).unwrap();
    let projected = product_calabi_parts(&c, &geo, &h, true).unwrap();
    assert!(projected.max_abs() < 1e-9);
    let raw = product_calabi_parts(&c, &geo, &h, false).unwrap();
    assert!(raw.mixed_second.max_abs() > 1e-3);
}

#[test]
fn product_parts_need_a_flat_factor() {
    let c = chart("S2xS2");
    let geo = PointGeometry::new(&c, &[0.0; 4], 3).unwrap();
    assert!(matches!(
        product_calabi_parts(&c, &geo, &geo.g, true),
        Err(Error::ChartKind(_))
    ));
}

#[test]
fn flat_product_parts_are_flat_second_derivatives() {
    let c = chart("R2xR1");
    // only R1 counts as flat here, R2 is also flat so the split fails
    assert!(type_split(&c).is_err());
    let c = chart("S2xR1");
    let field = JetField::polynomial(
        3,
        Valence::Symmetric,
        vec![
            vec![],
            vec![],
            vec![(vec![1, 0, 0], 1.0)],
            vec![],
            vec![],
            vec![],
        ],
    )
    .unwrap();
    let p = [0.0, 0.0, 0.2];
    let geo = PointGeometry::new(&c, &p, 3).unwrap();
    let parts = product_calabi_parts(&c, &geo, &field.eval(&c, &p, 3, 3).unwrap(), false).unwrap();
    // h_{x z} = x has no flat-direction dependence
    assert!(parts.flat.max_abs() < 1e-12);
}

#[test]
fn refined_cp1_identity() {
    let c = chart("CP1");
    let mut r = rng(21);
    let p = random_point(&mut r, 2, 0.4);
    let geo = PointGeometry::new(&c, &p, 3).unwrap();
    let x = JetField::random_polynomial(&mut r, 2, Valence::OneForm, 3).eval(&c, &p, 3, 2).unwrap();
    let kx = killing_op(&geo, &x).unwrap();
    let phi = c.kahler_primitive(0, &p, 3, 2).unwrap();
    let j = c.kahler_jets(0, &p, 3, 2).unwrap().values();
    for kf in c.killing_fields() {
        let y = kf.one_form(&c, &p, 3, 2).unwrap();
        let h = add_scaled(&kx, &symmetric_product(&y, &phi), 1.0);
        let lhs = trace_composition(&geo, &h).unwrap();
        let dy = geo.covariant(&one_form(y)).unwrap().values();
        let gi = geo.g_inv.values();
        let mut rhs = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                for c2 in 0..2 {
                    for d in 0..2 {
                        rhs += 6.0 * gi.get(&[a, c2]) * gi.get(&[b, d]) * j.get(&[c2, d]) * dy.get(&[a, b]);
                    }
                }
            }
        }
        assert!((lhs - rhs).abs() < 1e-9, "{}: {lhs} vs {rhs}", kf.name);
    }
}
