//! Test fields evaluated as jets: seeded random polynomials and
//! combinations of closed-form fields.

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::jets::Jet;
use crate::models::ChartGeometry;
use crate::tensor::{lower_slots, JetTensor, Tensor};

/// Index symmetry of a rank ≤ 2 field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Valence {
    Scalar,
    OneForm,
    Symmetric,
    TwoForm,
}

impl Valence {
    pub fn rank(self) -> usize {
        match self {
            Valence::Scalar => 0,
            Valence::OneForm => 1,
            Valence::Symmetric | Valence::TwoForm => 2,
        }
    }
}

type Evaluator = dyn Fn(&ChartGeometry, &[f64], usize, usize) -> Result<JetTensor> + Send + Sync;

/// A tensor field with a fixed valence whose components can be expanded as
/// jets at any chart point.
#[derive(Clone)]
pub struct JetField {
    pub valence: Valence,
    kind: FieldKind,
}

#[derive(Clone)]
enum FieldKind {
    /// Independent components (upper triangle for symmetric and skew
    /// fields), each a list of `(exponents, coefficient)` monomials in the
    /// chart coordinates.
    Polynomial { dim: usize, components: Vec<Vec<(Vec<u8>, f64)>> },
    Custom(Arc<Evaluator>),
}

impl std::fmt::Debug for JetField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.kind {
            FieldKind::Polynomial { dim, components } => f
                .debug_struct("JetField")
                .field("valence", &self.valence)
                .field("dim", dim)
                .field("monomials", &components.iter().map(Vec::len).sum::<usize>())
                .finish(),
            FieldKind::Custom(_) => f
                .debug_struct("JetField")
                .field("valence", &self.valence)
                .finish_non_exhaustive(),
        }
    }
}

/// All exponent vectors in `dim` variables of total degree at most `degree`.
pub fn monomials(dim: usize, degree: usize) -> Vec<Vec<u8>> {
    fn rec(dim: usize, left: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if cur.len() == dim {
            out.push(cur.clone());
            return;
        }
        for k in 0..=left {
            cur.push(k as u8);
            rec(dim, left - k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(dim, degree, &mut Vec::with_capacity(dim), &mut out);
    out
}

fn component_slots(dim: usize, valence: Valence) -> Vec<Vec<usize>> {
    match valence {
        Valence::Scalar => vec![vec![]],
        Valence::OneForm => (0..dim).map(|a| vec![a]).collect(),
        Valence::Symmetric => (0..dim)
            .flat_map(|a| (a..dim).map(move |b| vec![a, b]))
            .collect(),
        Valence::TwoForm => (0..dim)
            .flat_map(|a| (a + 1..dim).map(move |b| vec![a, b]))
            .collect(),
    }
}

impl JetField {
    /// Polynomial field with independent components given explicitly.
    pub fn polynomial(dim: usize, valence: Valence, components: Vec<Vec<(Vec<u8>, f64)>>) -> Result<JetField> {
        let want = component_slots(dim, valence).len();
        if components.len() != want {
            return Err(Error::Shape(format!(
                "{valence:?} field in dimension {dim} has {want} components, got {}",
                components.len()
            )));
        }
        Ok(JetField {
            valence,
            kind: FieldKind::Polynomial { dim, components },
        })
    }

    /// Random polynomial of degree at most `degree` with coefficients
    /// uniform in `[−1, 1]`.
    pub fn random_polynomial(rng: &mut impl Rng, dim: usize, valence: Valence, degree: usize) -> JetField {
        let monos = monomials(dim, degree);
        let components = component_slots(dim, valence)
            .iter()
            .map(|_| {
                monos
                    .iter()
                    .map(|e| (e.clone(), rng.random_range(-1.0..=1.0)))
                    .collect()
            })
            .collect();
        JetField {
            valence,
            kind: FieldKind::Polynomial { dim, components },
        }
    }

    pub fn custom(
        valence: Valence,
        f: impl Fn(&ChartGeometry, &[f64], usize, usize) -> Result<JetTensor> + Send + Sync + 'static,
    ) -> JetField {
        JetField {
            valence,
            kind: FieldKind::Custom(Arc::new(f)),
        }
    }

    /// Components at `point` as jets of the given order in `nvars`
    /// variables (the first `num_coords` are the chart coordinates).
    pub fn eval(&self, chart: &ChartGeometry, point: &[f64], order: usize, nvars: usize) -> Result<JetTensor> {
        let n = chart.num_coords;
        match &self.kind {
            FieldKind::Custom(f) => f(chart, point, order, nvars),
            FieldKind::Polynomial { dim, components } => {
                if *dim != n {
                    return Err(Error::Shape(format!(
                        "field of dimension {dim} on a chart with {n} coordinates"
                    )));
                }
                let x = chart.coordinate_jets(point, order, nvars);
                let mut cache = std::collections::HashMap::<Vec<u8>, Jet>::new();
                let mut monomial = |e: &[u8]| -> Jet {
                    if let Some(j) = cache.get(e) {
                        return j.clone();
                    }
                    let mut acc = Jet::constant(nvars, order, 1.0);
                    for (i, &k) in e.iter().enumerate() {
                        for _ in 0..k {
                            acc = &acc * &x[i];
                        }
                    }
                    cache.insert(e.to_vec(), acc.clone());
                    acc
                };
                let values: Vec<Jet> = components
                    .iter()
                    .map(|terms| {
                        let mut acc = Jet::zero(nvars, order);
                        for (e, c) in terms {
                            acc.add_scaled(&monomial(e), *c);
                        }
                        acc
                    })
                    .collect();
                let slots = component_slots(n, self.valence);
                let zero = Jet::zero(nvars, order);
                let mut t: JetTensor = Tensor::from_fn(n, lower_slots(self.valence.rank()), |_| zero.clone());
                for (idx, v) in slots.iter().zip(values) {
                    match self.valence {
                        Valence::Symmetric => {
                            *t.get_mut(&[idx[1], idx[0]]) = v.clone();
                        }
                        Valence::TwoForm => {
                            *t.get_mut(&[idx[1], idx[0]]) = -&v;
                        }
                        _ => {}
                    }
                    *t.get_mut(idx) = v;
                }
                Ok(t)
            }
        }
    }

    /// `self + s · other`, componentwise.
    pub fn plus_scaled(&self, other: &JetField, s: f64) -> Result<JetField> {
        if self.valence != other.valence {
            return Err(Error::Shape("cannot add fields of different valence".into()));
        }
        let (a, b) = (self.clone(), other.clone());
        Ok(JetField::custom(self.valence, move |chart, p, order, nvars| {
            let x = a.eval(chart, p, order, nvars)?;
            let y = b.eval(chart, p, order, nvars)?;
            Ok(add_scaled(&x, &y, s))
        }))
    }
}

/// `x + s y` for jet tensors of equal shape.
pub fn add_scaled(x: &JetTensor, y: &JetTensor, s: f64) -> JetTensor {
    let mut out = x.clone();
    for (o, v) in out.data_mut().iter_mut().zip(y.data()) {
        let mut next = o.truncate(o.order().min(v.order()));
        next.add_scaled(v, s);
        *o = next;
    }
    out
}

/// Symmetric product `Y_(a φ_b)`.
pub fn symmetric_product(y: &[Jet], phi: &[Jet]) -> JetTensor {
    let n = y.len();
    Tensor::from_fn(n, lower_slots(2), |i| {
        (&(&y[i[0]] * &phi[i[1]]) + &(&y[i[1]] * &phi[i[0]])).scale(0.5)
    })
}

/// Random point in the ball of radius `radius` about the chart origin.
pub fn random_point(rng: &mut impl Rng, dim: usize, radius: f64) -> Vec<f64> {
    loop {
        let p: Vec<f64> = (0..dim).map(|_| rng.random_range(-radius..=radius)).collect();
        if p.iter().map(|x| x * x).sum::<f64>() <= radius * radius {
            return p;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::make_chart;
    use crate::space::parse_space_spec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn monomial_count() {
        assert_eq!(monomials(2, 3).len(), 10);
        assert_eq!(monomials(4, 3).len(), 35);
    }

    #[test]
    fn polynomial_fields_have_declared_symmetry() {
        let chart = make_chart(&parse_space_spec("S3").unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = JetField::random_polynomial(&mut rng, 3, Valence::Symmetric, 3);
        let w = JetField::random_polynomial(&mut rng, 3, Valence::TwoForm, 3);
        let p = [0.1, -0.2, 0.3];
        let hj = h.eval(&chart, &p, 2, 3).unwrap();
        let wj = w.eval(&chart, &p, 2, 3).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                assert_eq!(hj.get(&[a, b]), hj.get(&[b, a]));
                assert!((wj.get(&[a, b]) + wj.get(&[b, a])).max_abs() == 0.0);
            }
        }
    }

    #[test]
    fn polynomial_expansion_matches_direct_evaluation() {
        let chart = make_chart(&parse_space_spec("R2").unwrap()).unwrap();
        // x^2 y − 3
        let f = JetField::polynomial(
            2,
            Valence::Scalar,
            vec![vec![(vec![2, 1], 1.0), (vec![0, 0], -3.0)]],
        )
        .unwrap();
        let j = f.eval(&chart, &[0.5, 2.0], 3, 2).unwrap();
        let v = &j.data()[0];
        assert!((v.value() - (0.25 * 2.0 - 3.0)).abs() < 1e-15);
        assert!((v.extract(&[1, 0]).unwrap() - 2.0 * 0.5 * 2.0).abs() < 1e-14);
        assert!((v.extract(&[2, 1]).unwrap() - 2.0).abs() < 1e-14);
    }
}
