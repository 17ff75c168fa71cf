//! JSON spec files: explicit specs and builder shorthands.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::characters::{CharacterExponent, LatticeBasis};
use crate::error::{Error, Result};
use crate::exact::{ComplexExact, ExactScalar, SymbolTable};
use crate::manifold::{example1, example2_n1, torus, SolvManifoldSpec, TMode};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolDecl {
    pub name: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentLiteral {
    pub a: Vec<ComplexExact>,
    pub b: Vec<ComplexExact>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealExpLiteral {
    pub real_exp: Vec<ExactScalar>,
}

/// `{"a": [..], "b": [..]}` or `{"real_exp": [..]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CharacterLiteral {
    Exponents(ExponentLiteral),
    RealExp(RealExpLiteral),
}

impl CharacterLiteral {
    fn into_character(self) -> Result<CharacterExponent> {
        match self {
            CharacterLiteral::Exponents(e) => CharacterExponent::new(e.a, e.b),
            CharacterLiteral::RealExp(r) => Ok(CharacterExponent::real_exp(&r.real_exp)),
        }
    }
}

/// Explicit spec as stored on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub name: String,
    pub n: usize,
    pub m: usize,
    #[serde(default)]
    pub symbols: Vec<SymbolDecl>,
    pub alphas: Vec<CharacterLiteral>,
    pub lattice: Vec<Vec<ComplexExact>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice_fiber: Option<Vec<Vec<ComplexExact>>>,
}

impl SpecFile {
    pub fn from_spec(spec: &SolvManifoldSpec) -> Self {
        SpecFile {
            name: spec.name.clone(),
            n: spec.n,
            m: spec.m,
            symbols: spec.symbols.user_entries().map(|(s, value)| SymbolDecl { name: s.to_string(), value }).collect(),
            alphas: spec
                .alphas
                .iter()
                .map(|a| CharacterLiteral::Exponents(ExponentLiteral { a: a.a().to_vec(), b: a.b().to_vec() }))
                .collect(),
            lattice: spec.lattice.generators().to_vec(),
            lattice_fiber: spec.lattice_fiber.as_ref().map(|l| l.generators().to_vec()),
        }
    }

    pub fn into_spec(self) -> Result<SolvManifoldSpec> {
        let mut symbols = SymbolTable::new();
        for decl in &self.symbols {
            symbols.declare(&decl.name, decl.value)?;
        }
        let alphas = self.alphas.into_iter().map(CharacterLiteral::into_character).collect::<Result<Vec<_>>>()?;
        let lattice = LatticeBasis::new(self.n, self.lattice)?;
        let lattice_fiber = self.lattice_fiber.map(|g| LatticeBasis::new(self.m, g)).transpose()?;
        SolvManifoldSpec::new(self.name, self.n, self.m, symbols, alphas, lattice, lattice_fiber)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TModeLiteral {
    #[default]
    Symbolic,
    RationalPi {
        r: i64,
        s: i64,
    },
}

impl From<TModeLiteral> for TMode {
    fn from(t: TModeLiteral) -> Self {
        match t {
            TModeLiteral::Symbolic => TMode::Symbolic,
            TModeLiteral::RationalPi { r, s } => TMode::RationalPi { r, s },
        }
    }
}

impl From<TMode> for TModeLiteral {
    fn from(t: TMode) -> Self {
        match t {
            TMode::Symbolic => TModeLiteral::Symbolic,
            TMode::RationalPi { r, s } => TModeLiteral::RationalPi { r, s },
        }
    }
}

/// Builder shorthand, e.g. `{"builder": "example1", "a": [1, -2], "t_mode": "symbolic"}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "builder", rename_all = "snake_case", deny_unknown_fields)]
pub enum BuilderSpec {
    Example1 {
        a: Vec<i64>,
        #[serde(default)]
        t_mode: TModeLiteral,
    },
    #[serde(rename = "example2_n1")]
    Example2N1 {
        matrix: [[i64; 2]; 2],
    },
    Torus {
        n: usize,
        m: usize,
    },
}

impl BuilderSpec {
    pub fn build(&self) -> Result<SolvManifoldSpec> {
        match self {
            BuilderSpec::Example1 { a, t_mode } => example1(a, (*t_mode).into()),
            BuilderSpec::Example2N1 { matrix } => example2_n1(*matrix),
            BuilderSpec::Torus { n, m } => torus(*n, *m),
        }
    }
}

fn malformed(e: serde_json::Error) -> Error {
    Error::MalformedSpec(e.to_string())
}

/// Parses either an explicit spec or a builder shorthand.
pub fn parse_spec(text: &str) -> Result<SolvManifoldSpec> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(malformed)?;
    let is_builder = value.as_object().is_some_and(|o| o.contains_key("builder"));
    // parse the text again so that errors keep line and column
    if is_builder {
        serde_json::from_str::<BuilderSpec>(text).map_err(malformed)?.build()
    } else {
        serde_json::from_str::<SpecFile>(text).map_err(malformed)?.into_spec()
    }
}

pub fn load_spec(path: &Path) -> Result<SolvManifoldSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::MalformedSpec(format!("{}: {e}", path.display())))?;
    parse_spec(&text)
}

/// Pretty-printed explicit form of a spec.
pub fn spec_to_json(spec: &SolvManifoldSpec) -> String {
    serde_json::to_string_pretty(&SpecFile::from_spec(spec)).expect("spec files always serialize")
}

pub fn write_spec(spec: &SolvManifoldSpec, path: &Path) -> Result<()> {
    std::fs::write(path, spec_to_json(spec) + "\n").map_err(|e| Error::MalformedSpec(format!("{}: {e}", path.display())))
}
