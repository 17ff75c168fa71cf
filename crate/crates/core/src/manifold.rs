//! Solvmanifold data `C^n x_phi C^m / (Gamma' x Gamma'')`, structural
//! validation, and builders for the standard example families.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::characters::{realify_columns, CharacterExponent, LatticeBasis};
use crate::error::{Error, Result};
use crate::exact::{ComplexExact, ExactScalar, Symbol, SymbolTable};

/// Absolute tolerance for the integrality of recovered fiber matrices.
pub const INTEGRALITY_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct SolvManifoldSpec {
    pub name: String,
    pub n: usize,
    pub m: usize,
    pub symbols: SymbolTable,
    /// Diagonal entries of the action on the fiber, one character per `w_i`.
    pub alphas: Vec<CharacterExponent>,
    /// Lattice `Gamma'` in the base C^n.
    pub lattice: LatticeBasis,
    /// Lattice `Gamma''` in the fiber C^m; only used by [`validate`].
    pub lattice_fiber: Option<LatticeBasis>,
}

impl SolvManifoldSpec {
    /// Checks dimensions and that every scalar only uses declared symbols.
    pub fn new(
        name: impl Into<String>,
        n: usize,
        m: usize,
        symbols: SymbolTable,
        alphas: Vec<CharacterExponent>,
        lattice: LatticeBasis,
        lattice_fiber: Option<LatticeBasis>,
    ) -> Result<Self> {
        if alphas.len() != m {
            return Err(Error::DimensionMismatch { expected: m, found: alphas.len() });
        }
        if let Some(a) = alphas.iter().find(|a| a.n() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: a.n() });
        }
        if lattice.n() != n {
            return Err(Error::DimensionMismatch { expected: n, found: lattice.n() });
        }
        if let Some(f) = &lattice_fiber {
            if f.n() != m {
                return Err(Error::DimensionMismatch { expected: m, found: f.n() });
            }
        }
        for a in &alphas {
            a.check_declared(&symbols)?;
        }
        lattice.check_declared(&symbols)?;
        if let Some(f) = &lattice_fiber {
            f.check_declared(&symbols)?;
        }
        Ok(SolvManifoldSpec { name: name.into(), n, m, symbols, alphas, lattice, lattice_fiber })
    }

    /// Complex dimension `n + m`.
    pub fn dim(&self) -> usize {
        self.n + self.m
    }

    /// Unitary parts `beta_i` of the `alpha_i`.
    pub fn betas(&self) -> Vec<CharacterExponent> {
        self.alphas.iter().map(CharacterExponent::unitary_part).collect()
    }

    /// Unitary parts `gamma_i` of the conjugates `conj(alpha_i)`.
    pub fn gammas(&self) -> Vec<CharacterExponent> {
        self.alphas.iter().map(CharacterExponent::gamma).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FiberCheck {
    Ok,
    Violated,
    NotChecked,
}

/// Integer matrix by which one `Gamma'` generator acts on the `Gamma''` basis.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecoveredMatrix {
    /// 1-based index of the `Gamma'` generator.
    pub generator: usize,
    /// Column `k` holds the coordinates of the image of fiber generator `k`.
    pub matrix: Vec<Vec<i64>>,
    pub determinant: i64,
    pub max_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub lattice_rank_ok: bool,
    pub fiber_preserved: FiberCheck,
    pub recovered: Vec<RecoveredMatrix>,
    pub details: Vec<String>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.lattice_rank_ok && self.fiber_preserved != FiberCheck::Violated
    }
}

/// Advisory structural checks: lattice ranks and preservation of `Gamma''`
/// by the action of every `Gamma'` generator.
pub fn validate(spec: &SolvManifoldSpec) -> ValidationReport {
    let mut details = Vec::new();
    let mut lattice_rank_ok = true;
    let lattices = std::iter::once(("base", Some(&spec.lattice))).chain(std::iter::once(("fiber", spec.lattice_fiber.as_ref())));
    for (label, lattice) in lattices {
        let Some(lattice) = lattice else { continue };
        match lattice.rank_certificate(&spec.symbols) {
            Ok(cert) if cert.ok => {}
            Ok(cert) => {
                lattice_rank_ok = false;
                details.push(format!(
                    "{label} lattice: real rank {} < {}, smallest singular value {:.3e}",
                    cert.rank,
                    2 * lattice.n(),
                    cert.min_singular_value
                ));
            }
            Err(e) => {
                lattice_rank_ok = false;
                details.push(format!("{label} lattice: {e}"));
            }
        }
    }

    let (fiber_preserved, recovered) = match &spec.lattice_fiber {
        None => (FiberCheck::NotChecked, Vec::new()),
        Some(fiber) => match check_fiber(spec, fiber, &mut details) {
            Ok(r) => r,
            Err(e) => {
                details.push(format!("fiber preservation: {e}"));
                (FiberCheck::Violated, Vec::new())
            }
        },
    };
    ValidationReport { lattice_rank_ok, fiber_preserved, recovered, details }
}

fn check_fiber(
    spec: &SolvManifoldSpec,
    fiber: &LatticeBasis,
    details: &mut Vec<String>,
) -> Result<(FiberCheck, Vec<RecoveredMatrix>)> {
    let m = spec.m;
    if m == 0 {
        return Ok((FiberCheck::Ok, Vec::new()));
    }
    let fiber_gens = fiber.float_generators(&spec.symbols)?;
    let basis = realify_columns(m, &fiber_gens);
    let Some(lu) = Some(basis.clone().lu()).filter(|lu| lu.is_invertible()) else {
        details.push("fiber lattice basis is singular".into());
        return Ok((FiberCheck::Violated, Vec::new()));
    };
    let mut status = FiberCheck::Ok;
    let mut recovered = Vec::new();
    for (gi, g) in (1..).zip(spec.lattice.float_generators(&spec.symbols)?.iter()) {
        let scale: Vec<Complex64> = spec.alphas.iter().map(|a| a.value_float(g, &spec.symbols)).collect::<Result<_>>()?;
        let images: Vec<Vec<Complex64>> = fiber_gens.iter().map(|h| h.iter().zip(&scale).map(|(w, s)| w * s).collect()).collect();
        let coords = lu.solve(&realify_columns(m, &images)).expect("invertible");
        let rounded = coords.map(f64::round);
        let residual = (&coords - &rounded).abs().max();
        let matrix: Vec<Vec<i64>> = (0..2 * m).map(|r| (0..2 * m).map(|c| rounded[(r, c)] as i64).collect()).collect();
        let determinant = integer_determinant(&matrix);
        if residual > INTEGRALITY_TOLERANCE {
            status = FiberCheck::Violated;
            details.push(format!("generator {gi}: image of the fiber lattice is not integral (residual {residual:.3e})"));
        } else if determinant.abs() != 1 {
            status = FiberCheck::Violated;
            details.push(format!("generator {gi}: recovered integer matrix has determinant {determinant}"));
        }
        recovered.push(RecoveredMatrix { generator: gi, matrix, determinant, max_residual: residual });
    }
    Ok((status, recovered))
}

/// Fraction-free (Bareiss) determinant.
pub fn integer_determinant(matrix: &[Vec<i64>]) -> i64 {
    let n = matrix.len();
    if n == 0 {
        return 1;
    }
    let mut a: Vec<Vec<i128>> = matrix.iter().map(|r| r.iter().map(|&x| x as i128).collect()).collect();
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n - 1 {
        if a[k][k] == 0 {
            match (k + 1..n).find(|&r| a[r][k] != 0) {
                Some(r) => {
                    a.swap(k, r);
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
            }
        }
        prev = a[k][k];
    }
    (sign * a[n - 1][n - 1]) as i64
}

/// The flat torus: all characters trivial, standard lattices.
pub fn torus(n: usize, m: usize) -> Result<SolvManifoldSpec> {
    if n + m == 0 {
        return Err(Error::InvalidBuilder("torus needs n + m >= 1".into()));
    }
    SolvManifoldSpec::new(
        format!("torus(n={n}, m={m})"),
        n,
        m,
        SymbolTable::new(),
        vec![CharacterExponent::trivial(n); m],
        LatticeBasis::standard(n),
        Some(LatticeBasis::standard(m)),
    )
}

/// Imaginary period of the base lattice of [`example1`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TMode {
    /// `t` is a fresh symbol independent of `pi`.
    Symbolic,
    /// `t = (r / s) pi`.
    RationalPi { r: i64, s: i64 },
}

impl fmt::Display for TMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TMode::Symbolic => f.write_str("symbolic"),
            TMode::RationalPi { r, s } => write!(f, "rational_pi({r},{s})"),
        }
    }
}

/// `log((3 + sqrt 5) / 2)`, the translation length of `[[2,1],[1,1]]`.
pub fn golden_log() -> f64 {
    ((3.0 + 5f64.sqrt()) / 2.0).ln()
}

/// `C x_phi C^{2k}` with characters `exp(+-a_i x)`.
///
/// The base lattice is spanned by a real generator `lambda` and `i t`.
pub fn example1(a: &[i64], t_mode: TMode) -> Result<SolvManifoldSpec> {
    if a.is_empty() {
        return Err(Error::InvalidBuilder("example1 needs at least one exponent".into()));
    }
    if a.contains(&0) {
        return Err(Error::InvalidBuilder("example1 exponents must be nonzero integers".into()));
    }
    let mut symbols = SymbolTable::new();
    let lambda = symbols.declare("lambda", golden_log())?;
    let period = match t_mode {
        TMode::Symbolic => ExactScalar::from_symbol(symbols.declare("t", 1.0)?),
        TMode::RationalPi { r, s } => {
            if r == 0 || s == 0 {
                return Err(Error::InvalidBuilder("rational_pi needs nonzero r and s".into()));
            }
            ExactScalar::term(Symbol::pi(), num_rational::BigRational::new(r.into(), s.into()))
        }
    };
    let alphas = a
        .iter()
        .flat_map(|&ai| {
            [CharacterExponent::real_exp(&[ExactScalar::int(ai)]), CharacterExponent::real_exp(&[ExactScalar::int(-ai)])]
        })
        .collect::<Vec<_>>();
    let lattice =
        LatticeBasis::new(1, vec![vec![ComplexExact::real(ExactScalar::from_symbol(lambda))], vec![ComplexExact::imag(period)]])?;
    let m = alphas.len();
    SolvManifoldSpec::new(format!("example1(a={a:?}, t={t_mode})"), 1, m, symbols, alphas, lattice, None)
}

/// `C x_phi C^2` with characters `exp(x), exp(-x)` and a lattice built from a
/// hyperbolic matrix `A` in SL(2, Z).
///
/// The fiber lattice is `L + iL` where `L` is spanned by the columns of the
/// inverse eigenvector matrix of `A`, so the translation `log |eps|` acts on
/// it by `sign(tr A) * A`.
pub fn example2_n1(matrix: [[i64; 2]; 2]) -> Result<SolvManifoldSpec> {
    let [[p, q], [r, s]] = matrix;
    let det = p * s - q * r;
    let trace = p + s;
    if det != 1 {
        return Err(Error::InvalidBuilder(format!("matrix must have determinant 1, got {det}")));
    }
    if trace.abs() <= 2 {
        return Err(Error::InvalidBuilder(format!("matrix must be hyperbolic (|trace| > 2), got trace {trace}")));
    }
    let tr = trace as f64;
    let sign = tr.signum();
    let big = (tr + sign * (tr * tr - 4.0).sqrt()) / 2.0;
    let eigenvalues = [big, 1.0 / big];
    // det = 1 and |tr| > 2 force q != 0
    let (pf, qf) = (p as f64, q as f64);
    let eigvecs = DMatrix::from_fn(2, 2, |row, col| if row == 0 { qf } else { eigenvalues[col] - pf });
    let inv = eigvecs.try_inverse().ok_or_else(|| Error::InvalidBuilder("degenerate eigenvectors".into()))?;

    let mut symbols = SymbolTable::new();
    let logeps = symbols.declare("logeps", big.abs().ln())?;
    let c1 = symbols.declare("c1", 2f64.sqrt())?;
    let mut real_gens = Vec::new();
    for k in 0..2 {
        let mut column = Vec::new();
        for coord in 0..2 {
            let sym = symbols.declare(&format!("u{}{}", k + 1, coord + 1), inv[(coord, k)])?;
            column.push(ComplexExact::real(ExactScalar::from_symbol(sym)));
        }
        real_gens.push(column);
    }
    let mut fiber = real_gens.clone();
    fiber.extend(real_gens.iter().map(|g| g.iter().map(ComplexExact::mul_i).collect()));

    let alphas = vec![CharacterExponent::real_exp(&[ExactScalar::int(1)]), CharacterExponent::real_exp(&[ExactScalar::int(-1)])];
    let lattice = LatticeBasis::new(
        1,
        vec![vec![ComplexExact::real(ExactScalar::from_symbol(logeps))], vec![ComplexExact::imag(ExactScalar::from_symbol(c1))]],
    )?;
    SolvManifoldSpec::new(
        format!("example2_n1(A=[[{p},{q}],[{r},{s}]])"),
        1,
        2,
        symbols,
        alphas,
        lattice,
        Some(LatticeBasis::new(2, fiber)?),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torus_validates() {
        for (n, m) in [(1, 1), (2, 0), (0, 2), (2, 3)] {
            let spec = torus(n, m).unwrap();
            assert!(spec.alphas.iter().all(CharacterExponent::is_trivial));
            let report = validate(&spec);
            assert!(report.lattice_rank_ok);
            assert_eq!(report.fiber_preserved, FiberCheck::Ok, "{n},{m}: {:?}", report.details);
        }
        assert!(torus(0, 0).is_err());
        assert_eq!(torus(1, 1).unwrap().alphas.len(), 1);
    }

    #[test]
    fn example2_recovers_input_matrix() {
        let spec = example2_n1([[2, 1], [1, 1]]).unwrap();
        let report = validate(&spec);
        assert!(report.is_clean(), "{:?}", report.details);
        assert_eq!(report.fiber_preserved, FiberCheck::Ok);
        let first = &report.recovered[0];
        assert_eq!(first.determinant, 1);
        assert!(first.max_residual < INTEGRALITY_TOLERANCE);
        assert_eq!(first.matrix[0][..2], [2, 1]);
        assert_eq!(first.matrix[1][..2], [1, 1]);
        assert_eq!(first.matrix[2][2..], [2, 1]);
        // the imaginary generator acts trivially
        assert_eq!(
            report.recovered[1].matrix,
            (0..4).map(|r| (0..4).map(|c| (r == c) as i64).collect::<Vec<_>>()).collect::<Vec<_>>()
        );
        assert!((spec.symbols.witness("logeps").unwrap() - golden_log()).abs() < 1e-15);
    }

    #[test]
    fn example2_negative_trace_recovers_negated_matrix() {
        let spec = example2_n1([[-2, -1], [-1, -1]]).unwrap();
        let report = validate(&spec);
        assert_eq!(report.fiber_preserved, FiberCheck::Ok, "{:?}", report.details);
        assert_eq!(report.recovered[0].matrix[0][..2], [2, 1]);
    }

    #[test]
    fn example2_rejects_non_hyperbolic() {
        assert!(example2_n1([[1, 0], [0, 1]]).is_err());
        assert!(example2_n1([[0, -1], [1, 0]]).is_err());
        assert!(example2_n1([[2, 1], [1, 2]]).is_err());
    }

    #[test]
    fn irrational_action_violates_fiber() {
        let spec = SolvManifoldSpec::new(
            "bad",
            1,
            1,
            SymbolTable::new(),
            vec![CharacterExponent::real_exp(&[ExactScalar::int(1)])],
            LatticeBasis::standard(1),
            Some(LatticeBasis::standard(1)),
        )
        .unwrap();
        let report = validate(&spec);
        assert_eq!(report.fiber_preserved, FiberCheck::Violated);
        assert!(!report.details.is_empty());
    }

    #[test]
    fn example1_builder() {
        let spec = example1(&[1], TMode::Symbolic).unwrap();
        assert_eq!((spec.n, spec.m), (1, 2));
        assert_eq!(spec.alphas[0], CharacterExponent::real_exp(&[ExactScalar::int(1)]));
        assert_eq!(spec.alphas[1], CharacterExponent::real_exp(&[ExactScalar::int(-1)]));
        assert!(spec.symbols.contains("t"));
        let report = validate(&spec);
        assert!(report.lattice_rank_ok);
        assert_eq!(report.fiber_preserved, FiberCheck::NotChecked);

        let rat = example1(&[1], TMode::RationalPi { r: 1, s: 1 }).unwrap();
        assert_eq!(rat.alphas, spec.alphas);
        assert_eq!(rat.lattice.generators()[1], vec![ComplexExact::imag(ExactScalar::pi())]);
        assert!(!rat.symbols.contains("t"));

        assert!(example1(&[1, 0], TMode::Symbolic).is_err());
        assert!(example1(&[], TMode::Symbolic).is_err());
        assert_eq!(example1(&[2, -3], TMode::Symbolic).unwrap(), example1(&[2, -3], TMode::Symbolic).unwrap());
    }

    #[test]
    fn families_overlap_at_n1() {
        assert_eq!(example1(&[1], TMode::Symbolic).unwrap().alphas, example2_n1([[2, 1], [1, 1]]).unwrap().alphas);
    }

    #[test]
    fn spec_rejects_undeclared_symbols() {
        let alphas = vec![CharacterExponent::real_exp(&[ExactScalar::symbol("s")])];
        let err = SolvManifoldSpec::new("x", 1, 1, SymbolTable::new(), alphas, LatticeBasis::standard(1), None);
        assert_eq!(err.unwrap_err(), Error::UnknownSymbol("s".into()));
    }

    #[test]
    fn bareiss_determinant() {
        assert_eq!(integer_determinant(&[vec![2, 1], vec![1, 1]]), 1);
        assert_eq!(integer_determinant(&[vec![0, 1], vec![1, 0]]), -1);
        assert_eq!(integer_determinant(&[vec![1, 2, 3], vec![4, 5, 6], vec![7, 8, 10]]), -3);
        assert_eq!(integer_determinant(&[vec![1, 2], vec![2, 4]]), 0);
    }
}
