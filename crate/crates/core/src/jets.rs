//! Truncated multivariate Taylor series ("jets").
//!
//! A [`Jet`] of order `k` in `n` variables stores the Taylor coefficients of a
//! scalar function at a point for every monomial of total degree `<= k`.
//! Arithmetic is exact truncated-polynomial arithmetic, so partial derivatives
//! read off a jet carry no discretisation error.
//!
//! Coefficients are stored densely in graded order: all degree-0 monomials,
//! then degree 1, and so on. Truncating to a lower order is therefore a
//! prefix slice, and binary operations between jets of different orders are
//! exact up to the smaller order.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::sync::{Mutex, OnceLock};

use crate::error::{Error, Result};

/// Order used when no other value is configured.
pub const DEFAULT_ORDER: usize = 6;

/// Largest number of variables a layout may be built for.
pub const MAX_VARS: usize = 8;

/// Monomial tables shared by every jet with the same variable count.
struct Layout {
    nvars: usize,
    max_order: usize,
    exps: Vec<Vec<u8>>,
    /// `offsets[d]` is the number of monomials of degree `< d`.
    offsets: Vec<usize>,
    index: HashMap<Vec<u8>, usize>,
    /// Product triples `(i, j, k)` with `e_i + e_j = e_k`, sorted by `k`.
    mul: Vec<(u32, u32, u32)>,
    /// `mul_end[r]` = number of triples whose result has degree `<= r`.
    mul_end: Vec<usize>,
    /// Per variable: `(src, dst, factor)` so that `d/dx_v` maps coefficient
    /// `src` to `dst` scaled by the exponent.
    deriv: Vec<Vec<(u32, u32, f64)>>,
}

impl Layout {
    fn build(nvars: usize, max_order: usize) -> Layout {
        let mut exps: Vec<Vec<u8>> = Vec::new();
        let mut offsets = vec![0usize];
        for degree in 0..=max_order {
            let mut current = vec![0u8; nvars];
            push_monomials(&mut exps, &mut current, 0, degree);
            offsets.push(exps.len());
        }
        let index: HashMap<Vec<u8>, usize> = exps
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), i))
            .collect();
        let degree = |e: &[u8]| e.iter().map(|&x| x as usize).sum::<usize>();

        let mut mul = Vec::new();
        for (i, ei) in exps.iter().enumerate() {
            let di = degree(ei);
            for (j, ej) in exps.iter().enumerate() {
                if di + degree(ej) > max_order {
                    continue;
                }
                let sum: Vec<u8> = ei.iter().zip(ej).map(|(a, b)| a + b).collect();
                let k = index[&sum];
                mul.push((i as u32, j as u32, k as u32));
            }
        }
        mul.sort_by_key(|t| (t.2, t.0, t.1));
        let mul_end = (0..=max_order)
            .map(|r| mul.partition_point(|t| (t.2 as usize) < offsets[r + 1]))
            .collect();

        let deriv = (0..nvars)
            .map(|v| {
                let mut table: Vec<(u32, u32, f64)> = exps
                    .iter()
                    .enumerate()
                    .filter(|(_, e)| e[v] > 0)
                    .map(|(src, e)| {
                        let mut lowered = e.clone();
                        lowered[v] -= 1;
                        (src as u32, index[&lowered] as u32, e[v] as f64)
                    })
                    .collect();
                table.sort_by_key(|t| t.1);
                table
            })
            .collect();

        Layout {
            nvars,
            max_order,
            exps,
            offsets,
            index,
            mul,
            mul_end,
            deriv,
        }
    }

    fn len(&self, order: usize) -> usize {
        self.offsets[order + 1]
    }
}

fn push_monomials(out: &mut Vec<Vec<u8>>, current: &mut Vec<u8>, var: usize, remaining: usize) {
    if current.is_empty() {
        if remaining == 0 {
            out.push(Vec::new());
        }
        return;
    }
    if var == current.len() - 1 {
        current[var] = remaining as u8;
        out.push(current.clone());
        current[var] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        current[var] = e as u8;
        push_monomials(out, current, var + 1, remaining - e);
    }
    current[var] = 0;
}

fn layout(nvars: usize, order: usize) -> &'static Layout {
    static CACHE: OnceLock<Mutex<HashMap<usize, &'static Layout>>> = OnceLock::new();
    assert!(nvars <= MAX_VARS, "jets support at most {MAX_VARS} variables");
    let mut cache = CACHE
        .get_or_init(|| Mutex::new(HashMap::new()))
        .lock()
        .expect("jet layout cache poisoned");
    match cache.get(&nvars) {
        Some(l) if l.max_order >= order => l,
        _ => {
            // Layouts are never freed; a rebuild only happens when a higher
            // order is requested for the first time.
            let built: &'static Layout =
                Box::leak(Box::new(Layout::build(nvars, order.max(DEFAULT_ORDER))));
            cache.insert(nvars, built);
            built
        }
    }
}

fn wider(a: &'static Layout, b: &'static Layout) -> &'static Layout {
    if a.max_order >= b.max_order {
        a
    } else {
        b
    }
}

/// Truncated Taylor expansion of a scalar function about a point.
#[derive(Clone)]
pub struct Jet {
    layout: &'static Layout,
    order: usize,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut map = f.debug_map();
        for (i, c) in self.coeffs.iter().enumerate() {
            if *c != 0.0 {
                map.entry(&self.layout.exps[i], c);
            }
        }
        map.finish()
    }
}

impl PartialEq for Jet {
    fn eq(&self, other: &Self) -> bool {
        self.layout.nvars == other.layout.nvars
            && self.order == other.order
            && self.coeffs == other.coeffs
    }
}

impl Jet {
    pub fn zero(nvars: usize, order: usize) -> Jet {
        let layout = layout(nvars, order);
        Jet {
            layout,
            order,
            coeffs: vec![0.0; layout.len(order)],
        }
    }

    pub fn constant(nvars: usize, order: usize, value: f64) -> Jet {
        let mut j = Jet::zero(nvars, order);
        j.coeffs[0] = value;
        j
    }

    /// The coordinate function `x_var` expanded about `x_var = value`.
    pub fn variable(nvars: usize, order: usize, var: usize, value: f64) -> Jet {
        assert!(var < nvars, "variable {var} out of range for {nvars} variables");
        let mut j = Jet::constant(nvars, order, value);
        if order >= 1 {
            let mut e = vec![0u8; nvars];
            e[var] = 1;
            let idx = j.layout.index[&e];
            j.coeffs[idx] = 1.0;
        }
        j
    }

    /// Coordinate jets `x_i = point_i + h_i` for every variable.
    pub fn coordinates(point: &[f64], order: usize) -> Vec<Jet> {
        let n = point.len();
        (0..n)
            .map(|i| Jet::variable(n, order, i, point[i]))
            .collect()
    }

    /// Builds a jet from `(multi_index, coefficient)` pairs.
    pub fn from_terms(nvars: usize, order: usize, terms: &[(Vec<u8>, f64)]) -> Result<Jet> {
        let mut j = Jet::zero(nvars, order);
        for (e, c) in terms {
            if e.len() != nvars {
                return Err(Error::NumVarsMismatch(e.len(), nvars));
            }
            let degree: usize = e.iter().map(|&x| x as usize).sum();
            if degree > order {
                return Err(Error::DegreeOutOfRange { degree, order });
            }
            let idx = j.layout.index[e];
            j.coeffs[idx] += c;
        }
        Ok(j)
    }

    pub fn num_vars(&self) -> usize {
        self.layout.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Constant term, i.e. the function value at the expansion point.
    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Raw coefficients in graded order.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Iterates `(multi_index, coefficient)` over the stored support.
    pub fn terms(&self) -> impl Iterator<Item = (&[u8], f64)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| (self.layout.exps[i].as_slice(), c))
    }

    /// Taylor coefficient of a monomial (zero above the truncation order).
    pub fn coeff(&self, multi_index: &[u8]) -> f64 {
        assert_eq!(multi_index.len(), self.num_vars());
        match self.layout.index.get(multi_index) {
            Some(&i) if i < self.coeffs.len() => self.coeffs[i],
            _ => 0.0,
        }
    }

    /// The partial derivative `∂^α f` at the expansion point, `α! · c_α`.
    pub fn extract(&self, multi_index: &[u8]) -> Result<f64> {
        if multi_index.len() != self.num_vars() {
            return Err(Error::NumVarsMismatch(multi_index.len(), self.num_vars()));
        }
        let degree: usize = multi_index.iter().map(|&x| x as usize).sum();
        if degree > self.order {
            return Err(Error::DegreeOutOfRange {
                degree,
                order: self.order,
            });
        }
        let factorial: f64 = multi_index
            .iter()
            .map(|&k| (1..=k as u64).product::<u64>() as f64)
            .product();
        Ok(factorial * self.coeff(multi_index))
    }

    /// Drops every coefficient of degree above `order`.
    pub fn truncate(&self, order: usize) -> Jet {
        if order >= self.order {
            return self.clone();
        }
        Jet {
            layout: self.layout,
            order,
            coeffs: self.coeffs[..self.layout.len(order)].to_vec(),
        }
    }

    /// `∂/∂x_var`; the result is exact to one order less.
    pub fn derivative(&self, var: usize) -> Jet {
        assert!(self.order > 0, "cannot differentiate an order-0 jet");
        assert!(var < self.num_vars());
        let order = self.order - 1;
        let len = self.layout.len(order);
        let mut coeffs = vec![0.0; len];
        for &(src, dst, factor) in &self.layout.deriv[var] {
            let dst = dst as usize;
            if dst < len {
                coeffs[dst] += factor * self.coeffs[src as usize];
            }
        }
        Jet {
            layout: self.layout,
            order,
            coeffs,
        }
    }

    /// `self += a * b`, truncated at `self`'s order (which must not exceed
    /// the operands').
    pub fn add_product(&mut self, a: &Jet, b: &Jet) {
        let order = self.order;
        debug_assert!(a.order >= order && b.order >= order);
        let l = wider(a.layout, b.layout);
        for &(i, j, k) in &l.mul[..l.mul_end[order]] {
            self.coeffs[k as usize] += a.coeffs[i as usize] * b.coeffs[j as usize];
        }
    }

    /// `self += s * a` with `a` truncated to `self`'s order.
    pub fn add_scaled(&mut self, a: &Jet, s: f64) {
        let len = self.coeffs.len();
        debug_assert!(a.coeffs.len() >= len);
        for (x, y) in self.coeffs.iter_mut().zip(&a.coeffs[..len]) {
            *x += s * y;
        }
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            layout: self.layout,
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// Largest absolute coefficient.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Composition `f ∘ self` where `outer[k]` is the k-th Taylor coefficient
    /// of `f` about `self.value()`.
    pub fn compose(&self, outer: &[f64]) -> Result<Jet> {
        if outer.len() < self.order + 1 {
            return Err(Error::SeriesTooShort {
                order: self.order,
                got: outer.len(),
            });
        }
        let mut delta = self.clone();
        delta.coeffs[0] = 0.0;
        let mut acc = Jet::constant(self.num_vars(), self.order, outer[self.order]);
        for k in (0..self.order).rev() {
            let mut next = Jet::constant(self.num_vars(), self.order, outer[k]);
            next.add_product(&acc, &delta);
            acc = next;
        }
        Ok(acc)
    }

    pub fn recip(&self) -> Result<Jet> {
        let a = self.value();
        if a == 0.0 {
            return Err(Error::ZeroDivisor);
        }
        let outer: Vec<f64> = (0..=self.order)
            .map(|k| if k % 2 == 0 { 1.0 } else { -1.0 } / a.powi(k as i32 + 1))
            .collect();
        self.compose(&outer)
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        let outer = taylor_coeffs(self.order, |k| e / factorial(k));
        self.compose(&outer).expect("series length matches order")
    }

    pub fn ln(&self) -> Result<Jet> {
        let a = self.value();
        if a <= 0.0 {
            return Err(Error::Domain {
                function: "ln",
                value: a,
            });
        }
        let outer = taylor_coeffs(self.order, |k| match k {
            0 => a.ln(),
            _ => {
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                sign / (k as f64 * a.powi(k as i32))
            }
        });
        self.compose(&outer)
    }

    pub fn cosh(&self) -> Jet {
        let (c, s) = (self.value().cosh(), self.value().sinh());
        let outer = taylor_coeffs(self.order, |k| {
            (if k % 2 == 0 { c } else { s }) / factorial(k)
        });
        self.compose(&outer).expect("series length matches order")
    }

    pub fn sinh(&self) -> Jet {
        let (c, s) = (self.value().cosh(), self.value().sinh());
        let outer = taylor_coeffs(self.order, |k| {
            (if k % 2 == 0 { s } else { c }) / factorial(k)
        });
        self.compose(&outer).expect("series length matches order")
    }

    /// `self^p` for real `p` via the binomial series about the value.
    pub fn powf(&self, p: f64) -> Result<Jet> {
        let a = self.value();
        if a <= 0.0 {
            return Err(Error::Domain {
                function: "powf",
                value: a,
            });
        }
        let mut binom = 1.0;
        let mut outer = Vec::with_capacity(self.order + 1);
        for k in 0..=self.order {
            outer.push(binom * a.powf(p - k as f64));
            binom *= (p - k as f64) / (k as f64 + 1.0);
        }
        self.compose(&outer)
    }

    pub fn sqrt(&self) -> Result<Jet> {
        self.powf(0.5)
    }

    pub fn powi(&self, n: u32) -> Jet {
        let mut acc = Jet::constant(self.num_vars(), self.order, 1.0);
        for _ in 0..n {
            acc = &acc * self;
        }
        acc
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

fn taylor_coeffs(order: usize, f: impl Fn(usize) -> f64) -> Vec<f64> {
    (0..=order).map(f).collect()
}

/// Binary operation selector for [`jet_arith`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Checked arithmetic: both jets must share variable count and order.
pub fn jet_arith(a: &Jet, b: &Jet, op: ArithOp) -> Result<Jet> {
    if a.num_vars() != b.num_vars() {
        return Err(Error::NumVarsMismatch(a.num_vars(), b.num_vars()));
    }
    if a.order != b.order {
        return Err(Error::OrderMismatch(a.order, b.order));
    }
    Ok(match op {
        ArithOp::Add => a + b,
        ArithOp::Sub => a - b,
        ArithOp::Mul => a * b,
        ArithOp::Div => (a * &b.recip()?).truncate(a.order),
    })
}

/// Univariate composition with a coefficient list, as a free function.
pub fn jet_compose_univariate(outer: &[f64], inner: &Jet) -> Result<Jet> {
    inner.compose(outer)
}

/// `∂^α a` at the expansion point.
pub fn jet_extract(a: &Jet, multi_index: &[u8]) -> Result<f64> {
    a.extract(multi_index)
}

fn check_vars(a: &Jet, b: &Jet) {
    assert_eq!(
        a.num_vars(),
        b.num_vars(),
        "jet variable count mismatch (use jet_arith for a checked operation)"
    );
}

impl Add<&Jet> for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        check_vars(self, rhs);
        let order = self.order.min(rhs.order);
        let len = self.layout.len(order);
        Jet {
            layout: wider(self.layout, rhs.layout),
            order,
            coeffs: self.coeffs[..len]
                .iter()
                .zip(&rhs.coeffs[..len])
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub<&Jet> for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        check_vars(self, rhs);
        let order = self.order.min(rhs.order);
        let len = self.layout.len(order);
        Jet {
            layout: wider(self.layout, rhs.layout),
            order,
            coeffs: self.coeffs[..len]
                .iter()
                .zip(&rhs.coeffs[..len])
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Mul<&Jet> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        check_vars(self, rhs);
        let order = self.order.min(rhs.order);
        let mut out = Jet::zero(self.num_vars(), order);
        out.add_product(self, rhs);
        out
    }
}

impl Div<&Jet> for &Jet {
    type Output = Jet;
    /// Panics on a zero constant term; see [`jet_arith`] for the checked form.
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: &Jet) -> Jet {
        let inv = rhs.recip().expect("division by jet with zero constant term");
        self * &inv
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Add<f64> for &Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] += rhs;
        out
    }
}

macro_rules! forward_owned {
    ($($trait:ident :: $method:ident),*) => {$(
        impl $trait<Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet { (&self).$method(&rhs) }
        }
        impl $trait<&Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet { (&self).$method(rhs) }
        }
        impl $trait<Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet { self.$method(&rhs) }
        }
    )*};
}
forward_owned!(Add::add, Sub::sub, Mul::mul, Div::div);

impl AddAssign<&Jet> for Jet {
    fn add_assign(&mut self, rhs: &Jet) {
        check_vars(self, rhs);
        if rhs.order < self.order {
            *self = self.truncate(rhs.order);
        }
        let len = self.coeffs.len();
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs[..len]) {
            *a += b;
        }
    }
}

impl SubAssign<&Jet> for Jet {
    fn sub_assign(&mut self, rhs: &Jet) {
        check_vars(self, rhs);
        if rhs.order < self.order {
            *self = self.truncate(rhs.order);
        }
        let len = self.coeffs.len();
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs[..len]) {
            *a -= b;
        }
    }
}
