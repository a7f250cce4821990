//! The fourth-order integrability operator for the Killing equation on the
//! warped plane `Ω(t)² dx² + dt²`, in coordinates `(x, t)`.
//!
//! A symmetric tensor is carried as `(p, q, r) = (h_xx, 2h_xt, h_tt)`.

use crate::error::{Error, Result};
use crate::jets::Jet;
use crate::models::WarpFunction;

/// Denominators closer to zero than this are treated as the singular locus.
pub const SINGULAR_TOL: f64 = 1e-8;

/// `Ω`, `Υ = Ω_t/Ω` and its first two `t`-derivatives as jets in `(x, t)`.
struct Warp {
    omega2: Jet,
    ups: Jet,
    ups1: Jet,
    ups2: Jet,
}

impl Warp {
    /// Jets exact to `order` for `Ω²`, `Υ`, and to `order − 1`, `order − 2`
    /// for `Υ′`, `Υ″`.
    fn at(omega: WarpFunction, t: f64, order: usize) -> Result<Warp> {
        let tj = Jet::variable(2, order + 1, 1, t);
        let om = omega.eval(&tj);
        let ups = &om.derivative(1) * &om.truncate(order).recip()?;
        let ups1 = ups.derivative(1);
        let ups2 = ups1.derivative(1);
        let om = om.truncate(order);
        Ok(Warp {
            omega2: &om * &om,
            ups,
            ups1,
            ups2,
        })
    }
}

/// `(p, q, r) = (X_x + Ω²Υξ, ξ_x + X_t − 2ΥX, ξ_t)` for the one-form
/// `X dx + ξ dt`, with `X`, `ξ` jets in `(x, t)` about `point`.
pub fn killing_2d(omega: WarpFunction, point: [f64; 2], x: &Jet, xi: &Jet) -> Result<(Jet, Jet, Jet)> {
    let order = x.order().min(xi.order());
    if order == 0 {
        return Err(Error::InsufficientOrder {
            operation: "2D Killing operator",
            need: 1,
            have: 0,
        });
    }
    let w = Warp::at(omega, point[1], order)?;
    let p = &x.derivative(0) + &(&w.omega2 * &w.ups * xi);
    let q = &(&xi.derivative(0) + &x.derivative(1)) - &(&w.ups * x).scale(2.0);
    let r = xi.derivative(1);
    Ok((p, q, r))
}

/// Values of the operator together with the intermediate `J`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KhavkineValue {
    /// `J_t − r`.
    pub first: f64,
    /// `J_xx − Ω²ΥJ_t − Ω²Υ′J − q_x + p_t − 2Υp`.
    pub second: f64,
    pub j: f64,
}

/// `J = (p_tt − 2Υp_t − 2Υ′p − q_xt + r_xx − Ω²(Υr_t + 2Υ′r + 2Υ²r)) / (Ω²(Υ″ + 2ΥΥ′))`
/// as a jet; fails on the singular locus.
pub fn khavkine_j(omega: WarpFunction, point: [f64; 2], p: &Jet, q: &Jet, r: &Jet) -> Result<Jet> {
    let order = p.order().min(q.order()).min(r.order());
    if order < 2 {
        return Err(Error::InsufficientOrder {
            operation: "Khavkine J",
            need: 2,
            have: order,
        });
    }
    let w = Warp::at(omega, point[1], order)?;
    let den = &w.omega2 * &(&w.ups2 + &(&w.ups * &w.ups1).scale(2.0));
    if den.value().abs() < SINGULAR_TOL {
        return Err(Error::SingularWarp { value: den.value() });
    }
    let (pt, rt) = (p.derivative(1), r.derivative(1));
    let mut num = pt.derivative(1);
    num -= &(&w.ups * &pt).scale(2.0);
    num -= &(&w.ups1 * p).scale(2.0);
    num -= &q.derivative(0).derivative(1);
    num += &r.derivative(0).derivative(0);
    let inner = &(&(&w.ups * &rt) + &(&w.ups1 * r).scale(2.0)) + &(&(&w.ups * &w.ups) * r).scale(2.0);
    num -= &(&w.omega2 * &inner);
    Ok(&num * &den.recip()?)
}

/// Evaluates both components at the expansion point. Needs `(p, q, r)`
/// exact to order 4.
pub fn khavkine_op(omega: WarpFunction, point: [f64; 2], p: &Jet, q: &Jet, r: &Jet) -> Result<KhavkineValue> {
    let order = p.order().min(q.order()).min(r.order());
    if order < 4 {
        return Err(Error::InsufficientOrder {
            operation: "Khavkine operator",
            need: 4,
            have: order,
        });
    }
    let j = khavkine_j(omega, point, p, q, r)?;
    let w = Warp::at(omega, point[1], order)?;
    let jt = j.derivative(1);
    let first = jt.value() - r.value();
    let second = j.derivative(0).derivative(0).value()
        - (w.omega2.value() * w.ups.value() * jt.value())
        - w.omega2.value() * w.ups1.value() * j.value()
        - q.derivative(0).value()
        + p.derivative(1).value()
        - 2.0 * w.ups.value() * p.value();
    Ok(KhavkineValue {
        first,
        second,
        j: j.value(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffops::{killing_op, one_form, PointGeometry};
    use crate::models::warped2d;

    fn poly(point: [f64; 2], order: usize, c: &[f64; 10]) -> Jet {
        let x = Jet::variable(2, order, 0, point[0]);
        let t = Jet::variable(2, order, 1, point[1]);
        let mons = [
            Jet::constant(2, order, 1.0),
            x.clone(),
            t.clone(),
            &x * &x,
            &x * &t,
            &t * &t,
            &(&x * &x) * &x,
            &(&x * &x) * &t,
            &(&x * &t) * &t,
            &(&t * &t) * &t,
        ];
        let mut acc = Jet::zero(2, order);
        for (m, k) in mons.iter().zip(c) {
            acc.add_scaled(m, *k);
        }
        acc
    }

    const CX: [f64; 10] = [0.3, -0.7, 0.2, 0.5, -0.1, 0.9, -0.4, 0.6, 0.8, -0.2];
    const CXI: [f64; 10] = [-0.5, 0.4, 0.1, -0.3, 0.7, 0.2, 0.9, -0.6, 0.3, 0.5];

    #[test]
    fn annihilates_killing_range_for_cosh_free_warp() {
        let omega = WarpFunction::ExpHalfSquare;
        for point in [[0.1, 0.3], [-0.2, -0.25], [0.3, 0.15]] {
            let x = poly(point, 6, &CX);
            let xi = poly(point, 6, &CXI);
            let (p, q, r) = killing_2d(omega, point, &x, &xi).unwrap();
            let v = khavkine_op(omega, point, &p, &q, &r).unwrap();
            assert!(v.first.abs() < 1e-8 && v.second.abs() < 1e-8, "{v:?}");
            assert!((v.j - xi.value()).abs() < 1e-8);
        }
    }

    #[test]
    fn cosh_and_constant_warps_are_singular() {
        for omega in [WarpFunction::Cosh, WarpFunction::One] {
            let point = [0.1, 0.2];
            let z = poly(point, 5, &CX);
            assert!(matches!(
                khavkine_op(omega, point, &z, &z, &z),
                Err(Error::SingularWarp { .. })
            ));
        }
    }

    #[test]
    fn matches_the_general_killing_operator() {
        let omega = WarpFunction::ExpHalfSquare;
        let chart = warped2d(omega);
        let point = [0.2, -0.3];
        let x = poly(point, 4, &CX);
        let xi = poly(point, 4, &CXI);
        let (p, q, r) = killing_2d(omega, point, &x, &xi).unwrap();
        let geo = PointGeometry::new(&chart, &point, 4).unwrap();
        let h = killing_op(&geo, &one_form(vec![x, xi])).unwrap();
        assert!((h.get(&[0, 0]) - &p).max_abs() < 1e-12);
        assert!((&h.get(&[0, 1]).scale(2.0) - &q).max_abs() < 1e-12);
        assert!((h.get(&[1, 1]) - &r).max_abs() < 1e-12);
    }

    #[test]
    fn first_component_on_pure_r() {
        let omega = WarpFunction::ExpHalfSquare;
        let point = [0.0, 0.4];
        let r = poly(point, 5, &CXI);
        let z = Jet::zero(2, 5);
        let v = khavkine_op(omega, point, &z, &z, &r).unwrap();
        let w = Warp::at(omega, point[1], 5).unwrap();
        let num = &r.derivative(0).derivative(0)
            - &(&w.omega2
                * &(&(&(&w.ups * &r.derivative(1)) + &(&w.ups1 * &r).scale(2.0))
                    + &(&(&w.ups * &w.ups) * &r).scale(2.0)));
        let den = &w.omega2 * &(&w.ups2 + &(&w.ups * &w.ups1).scale(2.0));
        let j = &num * &den.recip().unwrap();
        assert!((v.first - (j.derivative(1).value() - r.value())).abs() < 1e-12);
    }
}
