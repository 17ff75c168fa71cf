//! Smooth characters of C^n stored by their exponents.
//!
//! A character is `z -> exp(sum_j a_j z_j + b_j conj(z_j))`. Only the exponent
//! vectors `a`, `b` are kept; every question asked of a character in this
//! crate is linear in them.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{ComplexExact, ExactScalar, SymbolTable};

/// Tolerance on the smallest singular value of a realified lattice basis.
pub const RANK_TOLERANCE: f64 = 1e-9;
/// Tolerance on `|sin(theta / 2)|` in the float triviality fallback.
pub const FLOAT_TRIVIALITY_TOLERANCE: f64 = 1e-9;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CharacterExponent {
    a: Vec<ComplexExact>,
    b: Vec<ComplexExact>,
}

impl CharacterExponent {
    pub fn new(a: Vec<ComplexExact>, b: Vec<ComplexExact>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
        }
        Ok(CharacterExponent { a, b })
    }

    pub fn trivial(n: usize) -> Self {
        CharacterExponent { a: vec![ComplexExact::zero(); n], b: vec![ComplexExact::zero(); n] }
    }

    /// `exp(sum_j c_j x_j + d_j y_j)` in real coordinates `z_j = x_j + i y_j`.
    ///
    /// Uses `x = (z + zbar) / 2` and `y = (z - zbar) / (2i)`, so
    /// `a_j = (c_j - i d_j) / 2` and `b_j = (c_j + i d_j) / 2`.
    pub fn from_real_coords(c: &[ComplexExact], d: &[ComplexExact]) -> Result<Self> {
        if c.len() != d.len() {
            return Err(Error::DimensionMismatch { expected: c.len(), found: d.len() });
        }
        let half = num_rational::BigRational::new(1.into(), 2.into());
        let a = c.iter().zip(d).map(|(c, d)| (c - &d.mul_i()).scale(&half)).collect();
        let b = c.iter().zip(d).map(|(c, d)| (c + &d.mul_i()).scale(&half)).collect();
        Ok(CharacterExponent { a, b })
    }

    /// `exp(sum_j c_j x_j)`.
    pub fn real_exp(c: &[ExactScalar]) -> Self {
        let c: Vec<ComplexExact> = c.iter().cloned().map(ComplexExact::real).collect();
        let d = vec![ComplexExact::zero(); c.len()];
        CharacterExponent::from_real_coords(&c, &d).expect("equal lengths")
    }

    /// `exp(i sum_j d_j y_j)` with real `d_j`; unitary.
    pub fn imag_exp(d: &[ExactScalar]) -> Self {
        let d: Vec<ComplexExact> = d.iter().cloned().map(ComplexExact::imag).collect();
        let c = vec![ComplexExact::zero(); d.len()];
        CharacterExponent::from_real_coords(&c, &d).expect("equal lengths")
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    /// Coefficients of `z_j`.
    pub fn a(&self) -> &[ComplexExact] {
        &self.a
    }

    /// Coefficients of `conj(z_j)`.
    pub fn b(&self) -> &[ComplexExact] {
        &self.b
    }

    pub fn is_trivial(&self) -> bool {
        self.a.iter().chain(&self.b).all(ComplexExact::is_zero)
    }

    pub fn is_holomorphic(&self) -> bool {
        self.b.iter().all(ComplexExact::is_zero)
    }

    /// `|chi| == 1` everywhere, i.e. `b_j = -conj(a_j)`.
    pub fn is_unitary(&self) -> bool {
        self.a.iter().zip(&self.b).all(|(a, b)| (b + &a.conj()).is_zero())
    }

    /// Real-valued on C^n, i.e. `b_j = conj(a_j)`.
    pub fn is_real_valued(&self) -> bool {
        self.a.iter().zip(&self.b).all(|(a, b)| (b - &a.conj()).is_zero())
    }

    pub fn multiply(&self, other: &CharacterExponent) -> Result<CharacterExponent> {
        if self.n() != other.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), found: other.n() });
        }
        Ok(CharacterExponent {
            a: self.a.iter().zip(&other.a).map(|(x, y)| x + y).collect(),
            b: self.b.iter().zip(&other.b).map(|(x, y)| x + y).collect(),
        })
    }

    pub fn inverse(&self) -> CharacterExponent {
        CharacterExponent { a: self.a.iter().map(|x| -x).collect(), b: self.b.iter().map(|x| -x).collect() }
    }

    /// The complex-conjugate character `conj(chi(z))`.
    pub fn conjugate(&self) -> CharacterExponent {
        CharacterExponent {
            a: self.b.iter().map(ComplexExact::conj).collect(),
            b: self.a.iter().map(ComplexExact::conj).collect(),
        }
    }

    /// Splits `chi = hol * unit` with `hol` holomorphic and `unit` unitary.
    ///
    /// The pair is unique: `unit` has `a' = -conj(b), b' = b` and `hol` has
    /// `a' = a + conj(b), b' = 0`.
    pub fn decompose(&self) -> (CharacterExponent, CharacterExponent) {
        let unit = CharacterExponent { a: self.b.iter().map(|b| -&b.conj()).collect(), b: self.b.clone() };
        let hol = CharacterExponent {
            a: self.a.iter().zip(&self.b).map(|(a, b)| a + &b.conj()).collect(),
            b: vec![ComplexExact::zero(); self.n()],
        };
        (hol, unit)
    }

    pub fn unitary_part(&self) -> CharacterExponent {
        self.decompose().1
    }

    pub fn holomorphic_part(&self) -> CharacterExponent {
        self.decompose().0
    }

    /// The unitary character `gamma` with `conj(chi) * gamma^-1` holomorphic.
    pub fn gamma(&self) -> CharacterExponent {
        CharacterExponent { a: self.a.iter().map(|a| -a).collect(), b: self.a.iter().map(ComplexExact::conj).collect() }
    }

    /// `sum_j a_j v_j + b_j conj(v_j)`.
    pub fn eval_exponent(&self, v: &[ComplexExact]) -> Result<ComplexExact> {
        if v.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), found: v.len() });
        }
        let mut acc = ComplexExact::zero();
        for ((a, b), v) in self.a.iter().zip(&self.b).zip(v) {
            acc += &a.mul(v)?;
            acc += &b.mul(&v.conj())?;
        }
        Ok(acc)
    }

    pub fn float_exponents(&self, table: &SymbolTable) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
        let a = self.a.iter().map(|x| x.float_value(table)).collect::<Result<_>>()?;
        let b = self.b.iter().map(|x| x.float_value(table)).collect::<Result<_>>()?;
        Ok((a, b))
    }

    pub fn eval_exponent_float(&self, v: &[Complex64], table: &SymbolTable) -> Result<Complex64> {
        if v.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), found: v.len() });
        }
        let (a, b) = self.float_exponents(table)?;
        Ok(a.iter().zip(&b).zip(v).map(|((a, b), v)| a * v + b * v.conj()).sum())
    }

    /// `chi(v)` as a float.
    pub fn value_float(&self, v: &[Complex64], table: &SymbolTable) -> Result<Complex64> {
        Ok(self.eval_exponent_float(v, table)?.exp())
    }

    pub fn check_declared(&self, table: &SymbolTable) -> Result<()> {
        self.a.iter().chain(&self.b).try_for_each(|x| x.check_declared(table))
    }
}

impl fmt::Display for CharacterExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_trivial() {
            return f.write_str("1");
        }
        f.write_str("exp(")?;
        let mut first = true;
        for (j, (a, b)) in self.a.iter().zip(&self.b).enumerate() {
            for (c, var) in [(a, "z"), (b, "zbar")] {
                if c.is_zero() {
                    continue;
                }
                if !first {
                    f.write_str(" + ")?;
                }
                first = false;
                write!(f, "[{c}]*{var}{}", j + 1)?;
            }
        }
        f.write_str(")")
    }
}

impl fmt::Debug for CharacterExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Product of a family of characters over C^n; the empty product is trivial.
pub fn product<'a>(n: usize, chars: impl IntoIterator<Item = &'a CharacterExponent>) -> Result<CharacterExponent> {
    chars.into_iter().try_fold(CharacterExponent::trivial(n), |acc, c| acc.multiply(c))
}

/// `2n` real-independent generators of a lattice in C^n.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeBasis {
    n: usize,
    generators: Vec<Vec<ComplexExact>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankCertificate {
    pub rank: usize,
    pub min_singular_value: f64,
    pub ok: bool,
}

impl LatticeBasis {
    pub fn new(n: usize, generators: Vec<Vec<ComplexExact>>) -> Result<Self> {
        if generators.len() != 2 * n {
            return Err(Error::DimensionMismatch { expected: 2 * n, found: generators.len() });
        }
        if let Some(g) = generators.iter().find(|g| g.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: g.len() });
        }
        Ok(LatticeBasis { n, generators })
    }

    /// `Z^n + i Z^n`.
    pub fn standard(n: usize) -> Self {
        let unit = |j: usize, value: ComplexExact| {
            (0..n).map(|k| if k == j { value.clone() } else { ComplexExact::zero() }).collect::<Vec<_>>()
        };
        let mut generators: Vec<_> = (0..n).map(|j| unit(j, ComplexExact::one())).collect();
        generators.extend((0..n).map(|j| unit(j, ComplexExact::i())));
        LatticeBasis { n, generators }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn generators(&self) -> &[Vec<ComplexExact>] {
        &self.generators
    }

    pub fn float_generators(&self, table: &SymbolTable) -> Result<Vec<Vec<Complex64>>> {
        self.generators.iter().map(|g| g.iter().map(|x| x.float_value(table)).collect()).collect()
    }

    /// Columns are the realified generators `(re_1..re_n, im_1..im_n)`.
    pub fn realified(&self, table: &SymbolTable) -> Result<DMatrix<f64>> {
        let gens = self.float_generators(table)?;
        Ok(realify_columns(self.n, &gens))
    }

    pub fn rank_certificate(&self, table: &SymbolTable) -> Result<RankCertificate> {
        if self.n == 0 {
            return Ok(RankCertificate { rank: 0, min_singular_value: f64::INFINITY, ok: true });
        }
        let m = self.realified(table)?;
        let sv = m.singular_values();
        let rank = sv.iter().filter(|s| **s > RANK_TOLERANCE).count();
        let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok(RankCertificate { rank, min_singular_value: min, ok: rank == 2 * self.n && min > RANK_TOLERANCE })
    }

    pub fn check_declared(&self, table: &SymbolTable) -> Result<()> {
        self.generators.iter().flatten().try_for_each(|x| x.check_declared(table))
    }
}

pub(crate) fn realify_columns(n: usize, vectors: &[Vec<Complex64>]) -> DMatrix<f64> {
    DMatrix::from_fn(2 * n, vectors.len(), |r, c| if r < n { vectors[c][r].re } else { vectors[c][r - n].im })
}

/// Outcome of a triviality test; `certified` is false when the float
/// fallback decided it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Triviality {
    pub trivial: bool,
    pub certified: bool,
}

/// Exact test that a unitary character is identically 1 on the lattice.
pub fn is_trivial_on_lattice(chi: &CharacterExponent, lattice: &LatticeBasis) -> Result<bool> {
    if !chi.is_unitary() {
        return Err(Error::NotUnitary);
    }
    if chi.n() != lattice.n() {
        return Err(Error::DimensionMismatch { expected: lattice.n(), found: chi.n() });
    }
    for g in lattice.generators() {
        let value = chi.eval_exponent(g)?;
        debug_assert!(value.re.is_zero(), "unitary exponent has a real part");
        if !value.re.is_zero() || !value.im.is_in_2pi_z() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Float test: `|sin(theta / 2)| < 1e-9` at every generator.
pub fn is_trivial_on_lattice_float(chi: &CharacterExponent, lattice: &LatticeBasis, table: &SymbolTable) -> Result<bool> {
    if !chi.is_unitary() {
        return Err(Error::NotUnitary);
    }
    for g in lattice.float_generators(table)? {
        let theta = chi.eval_exponent_float(&g, table)?;
        if theta.re.abs() > FLOAT_TRIVIALITY_TOLERANCE || (theta.im / 2.0).sin().abs() >= FLOAT_TRIVIALITY_TOLERANCE {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Exact test with float fallback when a scalar product leaves the exact
/// layer (or when `force_float` is set).
pub fn triviality_on_lattice(
    chi: &CharacterExponent,
    lattice: &LatticeBasis,
    table: &SymbolTable,
    force_float: bool,
) -> Result<Triviality> {
    if !force_float {
        match is_trivial_on_lattice(chi, lattice) {
            Ok(trivial) => return Ok(Triviality { trivial, certified: true }),
            Err(Error::SymbolProductUnrepresentable { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(Triviality { trivial: is_trivial_on_lattice_float(chi, lattice, table)?, certified: false })
}
