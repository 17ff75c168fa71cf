//! Exact scalars as rational combinations of declared symbols.
//!
//! A scalar is an element of the Q-vector space spanned by a finite family of
//! symbols (`one`, `pi`, and whatever the user declares). The symbols are
//! treated as Q-linearly independent, so coefficient-wise equality is the
//! ground truth. Every symbol carries a floating witness used only for
//! validation and for the float fallback.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Neg, Sub};
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const ONE: &str = "one";
pub const PI: &str = "pi";

/// Interned symbol name.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol(Arc<str>);

impl Symbol {
    pub fn new(name: &str) -> Self {
        Symbol(Arc::from(name))
    }

    pub fn one() -> Self {
        Symbol::new(ONE)
    }

    pub fn pi() -> Self {
        Symbol::new(PI)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_one(&self) -> bool {
        &*self.0 == ONE
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Declared symbols with their numeric witnesses, in declaration order.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolTable {
    entries: Vec<(Symbol, f64)>,
}

impl Default for SymbolTable {
    fn default() -> Self {
        SymbolTable::new()
    }
}

impl SymbolTable {
    /// A table holding only `one` and `pi`.
    pub fn new() -> Self {
        SymbolTable { entries: vec![(Symbol::one(), 1.0), (Symbol::pi(), std::f64::consts::PI)] }
    }

    /// Declares a symbol. Re-declaring with the identical witness is a no-op.
    pub fn declare(&mut self, name: &str, value: f64) -> Result<Symbol> {
        if !value.is_finite() || value == 0.0 {
            return Err(Error::InvalidWitness { name: name.to_string(), value });
        }
        if let Some(existing) = self.witness(name) {
            return if existing == value { Ok(Symbol::new(name)) } else { Err(Error::DuplicateSymbol(name.to_string())) };
        }
        let sym = Symbol::new(name);
        self.entries.push((sym.clone(), value));
        Ok(sym)
    }

    pub fn witness(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|(s, _)| s.as_str() == name).map(|(_, v)| *v)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.witness(name).is_some()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Symbol, f64)> {
        self.entries.iter().map(|(s, v)| (s, *v))
    }

    /// User-declared entries, i.e. everything except `one` and `pi`.
    pub fn user_entries(&self) -> impl Iterator<Item = (&Symbol, f64)> {
        self.iter().filter(|(s, _)| s.as_str() != ONE && s.as_str() != PI)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// A finite Q-linear combination of symbols.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ExactScalar {
    coeffs: BTreeMap<Symbol, BigRational>,
}

impl ExactScalar {
    pub fn zero() -> Self {
        ExactScalar::default()
    }

    pub fn one() -> Self {
        ExactScalar::rational(BigRational::one())
    }

    pub fn rational(q: BigRational) -> Self {
        ExactScalar::term(Symbol::one(), q)
    }

    pub fn int(k: i64) -> Self {
        ExactScalar::rational(BigRational::from_integer(BigInt::from(k)))
    }

    pub fn ratio(p: i64, q: i64) -> Self {
        ExactScalar::rational(BigRational::new(BigInt::from(p), BigInt::from(q)))
    }

    /// `q * symbol`.
    pub fn term(symbol: Symbol, q: BigRational) -> Self {
        let mut coeffs = BTreeMap::new();
        if !q.is_zero() {
            coeffs.insert(symbol, q);
        }
        ExactScalar { coeffs }
    }

    pub fn from_symbol(symbol: Symbol) -> Self {
        ExactScalar::term(symbol, BigRational::one())
    }

    pub fn symbol(name: &str) -> Self {
        ExactScalar::term(Symbol::new(name), BigRational::one())
    }

    pub fn pi() -> Self {
        ExactScalar::symbol(PI)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeff(&self, name: &str) -> BigRational {
        self.coeffs.iter().find(|(s, _)| s.as_str() == name).map(|(_, q)| q.clone()).unwrap_or_else(BigRational::zero)
    }

    pub fn coeffs(&self) -> impl Iterator<Item = (&Symbol, &BigRational)> {
        self.coeffs.iter()
    }

    pub fn symbols(&self) -> impl Iterator<Item = &Symbol> {
        self.coeffs.keys()
    }

    /// The rational value, if the scalar is a multiple of `one` (zero included).
    pub fn as_rational(&self) -> Option<BigRational> {
        match self.coeffs.len() {
            0 => Some(BigRational::zero()),
            1 => self.coeffs.iter().next().filter(|(s, _)| s.is_one()).map(|(_, q)| q.clone()),
            _ => None,
        }
    }

    pub fn is_rational(&self) -> bool {
        self.as_rational().is_some()
    }

    pub fn scale(&self, q: &BigRational) -> ExactScalar {
        if q.is_zero() {
            return ExactScalar::zero();
        }
        ExactScalar { coeffs: self.coeffs.iter().map(|(s, c)| (s.clone(), c * q)).collect() }
    }

    /// Exact product; defined only when one side is rational.
    pub fn mul(&self, other: &ExactScalar) -> Result<ExactScalar> {
        if let Some(q) = self.as_rational() {
            Ok(other.scale(&q))
        } else if let Some(q) = other.as_rational() {
            Ok(self.scale(&q))
        } else {
            Err(Error::SymbolProductUnrepresentable { lhs: self.to_string(), rhs: other.to_string() })
        }
    }

    /// Membership in 2πZ under independence of the declared symbols.
    pub fn is_in_2pi_z(&self) -> bool {
        self.coeffs.iter().all(|(s, q)| s.as_str() == PI && q.is_integer() && q.to_integer().is_even())
    }

    pub fn float_value(&self, table: &SymbolTable) -> Result<f64> {
        self.coeffs.iter().try_fold(0.0, |acc, (s, q)| {
            let w = table.witness(s.as_str()).ok_or_else(|| Error::UnknownSymbol(s.to_string()))?;
            Ok(acc + rational_to_f64(q) * w)
        })
    }

    pub fn check_declared(&self, table: &SymbolTable) -> Result<()> {
        match self.symbols().find(|s| !table.contains(s.as_str())) {
            Some(s) => Err(Error::UnknownSymbol(s.to_string())),
            None => Ok(()),
        }
    }

    fn add_term(&mut self, s: &Symbol, q: &BigRational) {
        let entry = self.coeffs.entry(s.clone()).or_insert_with(BigRational::zero);
        *entry += q;
        if entry.is_zero() {
            self.coeffs.remove(s);
        }
    }
}

pub fn rational_to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or_else(|| q.numer().to_f64().unwrap_or(f64::NAN) / q.denom().to_f64().unwrap_or(f64::NAN))
}

/// Parses `"p/q"` or `"p"` with decimal integers and `q > 0`.
pub fn parse_rational(text: &str) -> Result<BigRational> {
    let bad = || Error::InvalidRational(text.to_string());
    let (p, q) = match text.split_once('/') {
        Some((p, q)) => (p.trim(), q.trim()),
        None => (text.trim(), "1"),
    };
    let is_int = |s: &str| {
        let digits = s.strip_prefix(['-', '+']).unwrap_or(s);
        !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit())
    };
    if !is_int(p) || !q.bytes().all(|b| b.is_ascii_digit()) || q.is_empty() {
        return Err(bad());
    }
    let p = BigInt::from_str(p).map_err(|_| bad())?;
    let q = BigInt::from_str(q).map_err(|_| bad())?;
    if !q.is_positive() {
        return Err(bad());
    }
    Ok(BigRational::new(p, q))
}

impl Add<&ExactScalar> for &ExactScalar {
    type Output = ExactScalar;
    fn add(self, rhs: &ExactScalar) -> ExactScalar {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Add for ExactScalar {
    type Output = ExactScalar;
    fn add(mut self, rhs: ExactScalar) -> ExactScalar {
        self += &rhs;
        self
    }
}

impl AddAssign<&ExactScalar> for ExactScalar {
    fn add_assign(&mut self, rhs: &ExactScalar) {
        for (s, q) in &rhs.coeffs {
            self.add_term(s, q);
        }
    }
}

impl Neg for &ExactScalar {
    type Output = ExactScalar;
    fn neg(self) -> ExactScalar {
        ExactScalar { coeffs: self.coeffs.iter().map(|(s, q)| (s.clone(), -q)).collect() }
    }
}

impl Neg for ExactScalar {
    type Output = ExactScalar;
    fn neg(self) -> ExactScalar {
        -&self
    }
}

impl Sub<&ExactScalar> for &ExactScalar {
    type Output = ExactScalar;
    fn sub(self, rhs: &ExactScalar) -> ExactScalar {
        self + &(-rhs)
    }
}

impl Sub for ExactScalar {
    type Output = ExactScalar;
    fn sub(self, rhs: ExactScalar) -> ExactScalar {
        &self - &rhs
    }
}

impl fmt::Display for ExactScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        for (i, (s, q)) in self.coeffs.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            if s.is_one() {
                write!(f, "{q}")?;
            } else if q.is_one() {
                write!(f, "{s}")?;
            } else {
                write!(f, "({q})*{s}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for ExactScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for ExactScalar {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let map: BTreeMap<&str, String> = self.coeffs.iter().map(|(s, q)| (s.as_str(), q.to_string())).collect();
        map.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ExactScalar {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let map = BTreeMap::<String, String>::deserialize(deserializer)?;
        let mut out = ExactScalar::zero();
        for (name, text) in map {
            let q = parse_rational(&text).map_err(D::Error::custom)?;
            out += &ExactScalar::term(Symbol::new(&name), q);
        }
        Ok(out)
    }
}

/// `re + i im` with exact parts.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct ComplexExact {
    pub re: ExactScalar,
    pub im: ExactScalar,
}

impl ComplexExact {
    pub fn new(re: ExactScalar, im: ExactScalar) -> Self {
        ComplexExact { re, im }
    }

    pub fn zero() -> Self {
        ComplexExact::default()
    }

    pub fn one() -> Self {
        ComplexExact::real(ExactScalar::one())
    }

    pub fn i() -> Self {
        ComplexExact::imag(ExactScalar::one())
    }

    pub fn real(re: ExactScalar) -> Self {
        ComplexExact { re, im: ExactScalar::zero() }
    }

    pub fn imag(im: ExactScalar) -> Self {
        ComplexExact { re: ExactScalar::zero(), im }
    }

    pub fn ratio(p: i64, q: i64) -> Self {
        ComplexExact::real(ExactScalar::ratio(p, q))
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        ComplexExact { re: self.re.clone(), im: -&self.im }
    }

    /// Multiplication by `i`.
    pub fn mul_i(&self) -> Self {
        ComplexExact { re: -&self.im, im: self.re.clone() }
    }

    pub fn scale(&self, q: &BigRational) -> Self {
        ComplexExact { re: self.re.scale(q), im: self.im.scale(q) }
    }

    pub fn as_rational(&self) -> Option<(BigRational, BigRational)> {
        Some((self.re.as_rational()?, self.im.as_rational()?))
    }

    pub fn mul(&self, other: &ComplexExact) -> Result<ComplexExact> {
        let prod = |x: &ExactScalar, y: &ExactScalar| -> Result<ExactScalar> {
            if x.is_zero() || y.is_zero() {
                Ok(ExactScalar::zero())
            } else {
                x.mul(y)
            }
        };
        let re = &prod(&self.re, &other.re)? - &prod(&self.im, &other.im)?;
        let im = &prod(&self.re, &other.im)? + &prod(&self.im, &other.re)?;
        Ok(ComplexExact { re, im })
    }

    /// Inverse of a nonzero rational complex number.
    pub fn inv(&self) -> Result<ComplexExact> {
        let (a, b) = self.as_rational().ok_or_else(|| Error::NotInvertible(self.to_string()))?;
        let norm = &a * &a + &b * &b;
        if norm.is_zero() {
            return Err(Error::NotInvertible(self.to_string()));
        }
        Ok(ComplexExact { re: ExactScalar::rational(&a / &norm), im: ExactScalar::rational(-(&b / &norm)) })
    }

    pub fn float_value(&self, table: &SymbolTable) -> Result<Complex64> {
        Ok(Complex64::new(self.re.float_value(table)?, self.im.float_value(table)?))
    }

    pub fn check_declared(&self, table: &SymbolTable) -> Result<()> {
        self.re.check_declared(table)?;
        self.im.check_declared(table)
    }
}

impl Add<&ComplexExact> for &ComplexExact {
    type Output = ComplexExact;
    fn add(self, rhs: &ComplexExact) -> ComplexExact {
        ComplexExact { re: &self.re + &rhs.re, im: &self.im + &rhs.im }
    }
}

impl AddAssign<&ComplexExact> for ComplexExact {
    fn add_assign(&mut self, rhs: &ComplexExact) {
        self.re += &rhs.re;
        self.im += &rhs.im;
    }
}

impl Sub<&ComplexExact> for &ComplexExact {
    type Output = ComplexExact;
    fn sub(self, rhs: &ComplexExact) -> ComplexExact {
        ComplexExact { re: &self.re - &rhs.re, im: &self.im - &rhs.im }
    }
}

impl Neg for &ComplexExact {
    type Output = ComplexExact;
    fn neg(self) -> ComplexExact {
        ComplexExact { re: -&self.re, im: -&self.im }
    }
}

impl fmt::Display for ComplexExact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.re.is_zero(), self.im.is_zero()) {
            (_, true) => write!(f, "{}", self.re),
            (true, false) => write!(f, "i*({})", self.im),
            (false, false) => write!(f, "{} + i*({})", self.re, self.im),
        }
    }
}

impl fmt::Debug for ComplexExact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}
