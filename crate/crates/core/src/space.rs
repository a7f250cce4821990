//! Space specifications such as `S3xS1`, `CP2xR1` or `S2@2xH2`.
//!
//! ```text
//! spec   := factor ('x' factor)*
//! factor := kind digits ('@' scale)?
//! kind   := S | H | CP | R          (case-insensitive)
//! ```
//!
//! The optional scale multiplies the metric of its factor.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Kind {
    Sphere,
    Hyperbolic,
    ComplexProjective,
    Euclidean,
}

impl Kind {
    pub fn symbol(self) -> &'static str {
        match self {
            Kind::Sphere => "S",
            Kind::Hyperbolic => "H",
            Kind::ComplexProjective => "CP",
            Kind::Euclidean => "R",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorSpec {
    pub kind: Kind,
    pub n: usize,
    pub scale: f64,
}

impl FactorSpec {
    pub fn new(kind: Kind, n: usize) -> FactorSpec {
        FactorSpec { kind, n, scale: 1.0 }
    }

    /// Real dimension (`2n` for `CP<n>`).
    pub fn real_dim(&self) -> usize {
        match self.kind {
            Kind::ComplexProjective => 2 * self.n,
            _ => self.n,
        }
    }

    /// One-dimensional spheres and hyperbolic lines are flat.
    pub fn is_flat(&self) -> bool {
        self.kind == Kind::Euclidean || self.n == 1 && self.kind != Kind::ComplexProjective
    }

    /// Carries a parallel Kähler form: `CP<n>`, `S2`, `H2`.
    pub fn is_hermitian(&self) -> bool {
        match self.kind {
            Kind::ComplexProjective => true,
            Kind::Sphere | Kind::Hyperbolic => self.n == 2,
            Kind::Euclidean => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceSpec {
    pub factors: Vec<FactorSpec>,
}

impl SpaceSpec {
    pub fn single(kind: Kind, n: usize) -> SpaceSpec {
        SpaceSpec {
            factors: vec![FactorSpec::new(kind, n)],
        }
    }

    pub fn dim(&self) -> usize {
        self.factors.iter().map(FactorSpec::real_dim).sum()
    }

    pub fn has_flat_factor(&self) -> bool {
        self.factors.iter().any(FactorSpec::is_flat)
    }

    pub fn has_hermitian_factor(&self) -> bool {
        self.factors.iter().any(FactorSpec::is_hermitian)
    }
}

impl fmt::Display for SpaceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, factor) in self.factors.iter().enumerate() {
            if i > 0 {
                f.write_str("x")?;
            }
            write!(f, "{}{}", factor.kind.symbol(), factor.n)?;
            if factor.scale != 1.0 {
                write!(f, "@{}", factor.scale)?;
            }
        }
        Ok(())
    }
}

impl FromStr for SpaceSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_space_spec(s)
    }
}

/// Parses the grammar in the module documentation.
pub fn parse_space_spec(text: &str) -> Result<SpaceSpec> {
    let err = |position: usize, message: String| Error::SpaceSpecParse {
        input: text.to_string(),
        position,
        message,
    };
    if text.is_empty() {
        return Err(err(0, "empty specification".into()));
    }
    let bytes = text.as_bytes();
    let mut pos = 0;
    let mut factors = Vec::new();
    loop {
        let start = pos;
        let rest = &text[pos..];
        let upper = rest.to_ascii_uppercase();
        let kind = if upper.starts_with("CP") {
            pos += 2;
            Kind::ComplexProjective
        } else {
            let c = match rest.chars().next() {
                Some(c) => c,
                None => return Err(err(pos, "expected a factor after 'x'".into())),
            };
            if c.is_whitespace() {
                return Err(err(pos, "whitespace is not allowed".into()));
            }
            pos += c.len_utf8();
            match c.to_ascii_uppercase() {
                'S' => Kind::Sphere,
                'H' => Kind::Hyperbolic,
                'R' => Kind::Euclidean,
                _ => {
                    return Err(err(
                        start,
                        format!("unknown factor kind '{c}' (expected S, H, CP or R)"),
                    ))
                }
            }
        };
        let digits_start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if digits_start == pos {
            return Err(err(pos, "expected a dimension".into()));
        }
        let n: usize = text[digits_start..pos]
            .parse()
            .map_err(|_| err(digits_start, "dimension is too large".into()))?;
        if n == 0 {
            return Err(err(digits_start, "dimension must be at least 1".into()));
        }
        let mut scale = 1.0;
        if pos < bytes.len() && bytes[pos] == b'@' {
            pos += 1;
            let scale_start = pos;
            while pos < bytes.len()
                && (bytes[pos].is_ascii_digit()
                    || matches!(bytes[pos], b'.' | b'e' | b'E' | b'+' | b'-'))
            {
                pos += 1;
            }
            let raw = &text[scale_start..pos];
            scale = raw
                .parse::<f64>()
                .map_err(|_| err(scale_start, format!("malformed scale '{raw}'")))?;
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(err(scale_start, format!("scale must be positive, got {raw}")));
            }
        }
        factors.push(FactorSpec { kind, n, scale });
        if pos == bytes.len() {
            break;
        }
        match bytes[pos] {
            b'x' | b'X' => pos += 1,
            c if (c as char).is_whitespace() => {
                return Err(err(pos, "whitespace is not allowed".into()))
            }
            _ => {
                return Err(err(
                    pos,
                    format!("unexpected character '{}'", text[pos..].chars().next().unwrap()),
                ))
            }
        }
    }
    Ok(SpaceSpec { factors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_products() {
        let s = parse_space_spec("S3xS1").unwrap();
        assert_eq!(
            s.factors,
            vec![FactorSpec::new(Kind::Sphere, 3), FactorSpec::new(Kind::Sphere, 1)]
        );
        let s = parse_space_spec("CP2xR1").unwrap();
        assert_eq!(
            s.factors,
            vec![
                FactorSpec::new(Kind::ComplexProjective, 2),
                FactorSpec::new(Kind::Euclidean, 1)
            ]
        );
        assert_eq!(s.dim(), 5);
    }

    #[test]
    fn parses_scales_and_case() {
        let s = parse_space_spec("S2@2xH2").unwrap();
        assert_eq!(s.factors[0].scale, 2.0);
        assert_eq!(s.factors[1], FactorSpec::new(Kind::Hyperbolic, 2));
        let t = parse_space_spec("cp1Xs2@0.5").unwrap();
        assert_eq!(t.factors[0].kind, Kind::ComplexProjective);
        assert_eq!(t.factors[1].scale, 0.5);
    }

    #[test]
    fn errors_carry_positions() {
        let cases = [
            ("Q2", 0),
            ("S0", 1),
            ("S2xT3", 3),
            ("S2@", 3),
            ("S2@-1", 3),
            ("S2 xS1", 2),
            ("S", 1),
            ("S2x", 3),
            ("", 0),
        ];
        for (input, want) in cases {
            match parse_space_spec(input) {
                Err(Error::SpaceSpecParse { position, .. }) => {
                    assert_eq!(position, want, "input {input:?}")
                }
                other => panic!("{input:?} parsed to {other:?}"),
            }
        }
    }

    #[test]
    fn flat_and_hermitian_flags() {
        let s = parse_space_spec("S2xS1xH2xS3").unwrap();
        let flat: Vec<bool> = s.factors.iter().map(FactorSpec::is_flat).collect();
        let herm: Vec<bool> = s.factors.iter().map(FactorSpec::is_hermitian).collect();
        assert_eq!(flat, vec![false, true, false, false]);
        assert_eq!(herm, vec![true, false, true, false]);
    }

    fn factor() -> impl Strategy<Value = FactorSpec> {
        (
            prop_oneof![
                Just(Kind::Sphere),
                Just(Kind::Hyperbolic),
                Just(Kind::ComplexProjective),
                Just(Kind::Euclidean)
            ],
            1usize..7,
            prop_oneof![Just(1.0), 0.1f64..10.0],
        )
            .prop_map(|(kind, n, scale)| FactorSpec { kind, n, scale })
    }

    proptest! {
        #[test]
        fn print_then_parse_is_identity(factors in prop::collection::vec(factor(), 1..4)) {
            let spec = SpaceSpec { factors };
            let text = spec.to_string();
            prop_assert_eq!(parse_space_spec(&text).unwrap(), spec);
        }
    }
}
