//! Exact affine forms `constant + sum(coeff * parameter)` over the rationals.
//!
//! Every multiplicity and coefficient the solver emits is one of these. The
//! representation is canonical: zero coefficients are never stored, so
//! structural equality is mathematical equality.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

pub type Rational = BigRational;

pub fn rational(n: i64) -> Rational {
    BigRational::from_integer(BigInt::from(n))
}

/// Parses `"-3/4"`, `"2"`, `"-1"`.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().ok()?;
            let d: BigInt = d.trim().parse().ok()?;
            if d.is_zero() {
                return None;
            }
            Some(BigRational::new(n, d))
        }
        None => s.parse::<BigInt>().ok().map(BigRational::from_integer),
    }
}

pub fn format_rational(q: &Rational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct AffineInt {
    constant: Rational,
    coeffs: BTreeMap<String, Rational>,
}

impl AffineInt {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(n: i64) -> Self {
        Self::from_rational(rational(n))
    }

    pub fn from_rational(q: Rational) -> Self {
        Self {
            constant: q,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn parameter(name: impl Into<String>) -> Self {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(name.into(), Rational::one());
        Self {
            constant: Rational::zero(),
            coeffs,
        }
    }

    pub fn from_parts(constant: Rational, coeffs: impl IntoIterator<Item = (String, Rational)>) -> Self {
        let mut out = Self::from_rational(constant);
        for (name, q) in coeffs {
            out.add_term(&name, &q);
        }
        out
    }

    fn add_term(&mut self, name: &str, q: &Rational) {
        if q.is_zero() {
            return;
        }
        let slot = self.coeffs.entry(name.to_string()).or_insert_with(Rational::zero);
        *slot += q;
        if slot.is_zero() {
            self.coeffs.remove(name);
        }
    }

    pub fn constant_term(&self) -> &Rational {
        &self.constant
    }

    pub fn coefficient(&self, name: &str) -> Rational {
        self.coeffs.get(name).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn coefficients(&self) -> impl Iterator<Item = (&str, &Rational)> {
        self.coeffs.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn parameters(&self) -> impl Iterator<Item = &str> {
        self.coeffs.keys().map(String::as_str)
    }

    pub fn is_zero(&self) -> bool {
        self.constant.is_zero() && self.coeffs.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn as_constant(&self) -> Option<&Rational> {
        self.is_constant().then_some(&self.constant)
    }

    /// The value as a machine integer when the form is an integral constant.
    pub fn as_integer(&self) -> Option<i64> {
        self.as_constant()
            .filter(|q| q.is_integer())
            .and_then(|q| q.to_integer().to_i64())
    }

    pub fn scale(&self, q: &Rational) -> Self {
        if q.is_zero() {
            return Self::zero();
        }
        Self {
            constant: &self.constant * q,
            coeffs: self.coeffs.iter().map(|(k, v)| (k.clone(), v * q)).collect(),
        }
    }

    /// Replaces each assigned parameter by its value. Unassigned parameters stay symbolic.
    pub fn substitute(&self, values: &BTreeMap<String, Rational>) -> Self {
        let mut out = Self::from_rational(self.constant.clone());
        for (name, q) in &self.coeffs {
            match values.get(name) {
                Some(v) => out.constant += q * v,
                None => out.add_term(name, q),
            }
        }
        out
    }

    /// Replaces each listed parameter by an affine form.
    pub fn substitute_affine(&self, values: &BTreeMap<String, AffineInt>) -> Self {
        let mut out = Self::from_rational(self.constant.clone());
        for (name, q) in &self.coeffs {
            match values.get(name) {
                Some(v) => out = out + v.scale(q),
                None => out.add_term(name, q),
            }
        }
        out
    }
}

impl From<i64> for AffineInt {
    fn from(n: i64) -> Self {
        Self::constant(n)
    }
}

impl Add for AffineInt {
    type Output = AffineInt;
    fn add(mut self, rhs: AffineInt) -> AffineInt {
        self.constant += rhs.constant;
        for (name, q) in &rhs.coeffs {
            self.add_term(name, q);
        }
        self
    }
}

impl<'a> Add<&'a AffineInt> for &'a AffineInt {
    type Output = AffineInt;
    fn add(self, rhs: &AffineInt) -> AffineInt {
        self.clone() + rhs.clone()
    }
}

impl Neg for AffineInt {
    type Output = AffineInt;
    fn neg(self) -> AffineInt {
        self.scale(&-Rational::one())
    }
}

impl Sub for AffineInt {
    type Output = AffineInt;
    fn sub(self, rhs: AffineInt) -> AffineInt {
        self + (-rhs)
    }
}

impl<'a> Sub<&'a AffineInt> for &'a AffineInt {
    type Output = AffineInt;
    fn sub(self, rhs: &AffineInt) -> AffineInt {
        self.clone() - rhs.clone()
    }
}

impl Mul<&Rational> for &AffineInt {
    type Output = AffineInt;
    fn mul(self, rhs: &Rational) -> AffineInt {
        self.scale(rhs)
    }
}

fn coefficient_prefix(q: &Rational) -> String {
    let a = q.abs();
    if a.is_one() {
        String::new()
    } else if a.is_integer() {
        a.numer().to_string()
    } else {
        format!("({})", format_rational(&a))
    }
}

impl fmt::Display for AffineInt {
    /// Parameters first, then the constant: `c - 2`, `-3c`, `c + 1`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (name, q) in &self.coeffs {
            let sign = if q.is_negative() { "-" } else { "+" };
            if first {
                if q.is_negative() {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            write!(f, "{}{}", coefficient_prefix(q), name)?;
            first = false;
        }
        if !self.constant.is_zero() {
            if first {
                write!(f, "{}", format_rational(&self.constant))?;
            } else {
                let sign = if self.constant.is_negative() { "-" } else { "+" };
                write!(f, " {sign} {}", format_rational(&self.constant.abs()))?;
            }
        }
        Ok(())
    }
}

impl Serialize for AffineInt {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let coeffs: BTreeMap<&str, String> = self
            .coeffs
            .iter()
            .map(|(k, v)| (k.as_str(), format_rational(v)))
            .collect();
        let mut st = serializer.serialize_struct("AffineInt", 3)?;
        st.serialize_field("expr", &self.to_string())?;
        st.serialize_field("constant", &format_rational(&self.constant))?;
        st.serialize_field("coeffs", &coeffs)?;
        st.end()
    }
}
