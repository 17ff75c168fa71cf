//! The full analysis pipeline and its renderers.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use serde::Serialize;

use crate::cohomology::{BettiNumbers, Cohomology, ConditionReport, HodgeTable, MultiIndex, SweepOptions};
use crate::error::{Error, Result};
use crate::forms::{basis_harmonicity, harmonic_wedge_closure, BasisHarmonicity, WedgeClosure, DEFAULT_MAX_FORMS_DIM};
use crate::kahler::{kaehler_obstruction, KaehlerVerdict};
use crate::manifold::{validate, SolvManifoldSpec, ValidationReport};
use crate::par::Execution;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AnalyzeOptions {
    pub skip_forms: bool,
    pub force_float: bool,
    /// Cap on `n + m` for the forms-level checks.
    pub max_dim: usize,
    pub execution: Execution,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions { skip_forms: false, force_float: false, max_dim: DEFAULT_MAX_FORMS_DIM, execution: Execution::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    FloatFallback,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PairEntry {
    #[serde(rename = "J")]
    pub j: MultiIndex,
    #[serde(rename = "L")]
    pub l: MultiIndex,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub name: String,
    pub n: usize,
    pub m: usize,
    pub mode: Mode,
    pub validation: ValidationReport,
    pub trivial_pairs: Vec<PairEntry>,
    pub hodge: HodgeTable,
    /// Whether counting and explicit enumeration of the basis agree.
    pub hodge_enumeration_agrees: bool,
    pub betti: Vec<u64>,
    pub certified_de_rham: bool,
    pub euler_characteristic: i64,
    pub condition: ConditionReport,
    pub symmetry: bool,
    pub conjugation_symmetry: bool,
    pub serre: bool,
    /// `None` when the forms-level checks were skipped.
    pub harmonic_certified: Option<bool>,
    pub wedge_closure: Option<WedgeClosure>,
    pub harmonicity_failures: Vec<BasisHarmonicity>,
    pub kaehler: KaehlerVerdict,
    pub diagnostics: Vec<String>,
    /// Milliseconds per stage; not part of the deterministic output.
    pub timings: BTreeMap<String, f64>,
}

struct Stopwatch {
    timings: BTreeMap<String, f64>,
}

impl Stopwatch {
    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings.insert(stage.to_string(), start.elapsed().as_secs_f64() * 1e3);
        out
    }
}

/// Runs every check on a spec.
pub fn analyze(spec: &SolvManifoldSpec, options: &AnalyzeOptions) -> Result<RunReport> {
    if !options.skip_forms && spec.dim() > options.max_dim {
        return Err(Error::DimensionCap { dim: spec.dim(), max: options.max_dim });
    }
    let mut clock = Stopwatch { timings: BTreeMap::new() };
    let mut diagnostics = Vec::new();
    let sweep = SweepOptions { execution: options.execution, force_float: options.force_float };

    let validation = clock.time("validate", || validate(spec));
    if !validation.is_clean() {
        diagnostics.push("structural validation reported problems; see validation.details".into());
    }
    let coh = clock.time("trivial_pairs", || Cohomology::compute(spec, sweep))?;
    let pairs = coh.trivial_pairs();
    let mode = if pairs.certified() { Mode::Exact } else { Mode::FloatFallback };
    if mode == Mode::FloatFallback {
        diagnostics.push("lattice triviality decided in floating point; results are not certified".into());
    }
    let hodge = clock.time("hodge_table", || coh.hodge_table());
    let enumerated = clock.time("hodge_enumeration", || coh.hodge_table_by_enumeration())?;
    let condition = clock.time("condition", || coh.check_condition())?;
    let conjugation_symmetry = coh.conjugation_symmetry()?;
    let betti = BettiNumbers { values: hodge.column_sums(), certified_de_rham: condition.holds };

    let mut harmonic_certified = None;
    let mut wedge_closure = None;
    let mut harmonicity_failures = Vec::new();
    if !options.skip_forms {
        match clock.time("harmonicity", || basis_harmonicity(&coh, options.max_dim, options.execution)) {
            Ok(rows) => {
                harmonicity_failures =
                    rows.into_iter().filter(|h| !h.flags.dbar_harmonic() || (condition.holds && !h.flags.d_harmonic())).collect();
                harmonic_certified = Some(harmonicity_failures.is_empty());
            }
            Err(e @ Error::SymbolProductUnrepresentable { .. }) => {
                diagnostics.push(format!("harmonicity not certified: {e}"));
                harmonic_certified = Some(false);
            }
            Err(e) => return Err(e),
        }
        match clock.time("wedge_closure", || harmonic_wedge_closure(&coh, options.max_dim, options.execution)) {
            Ok(w) => wedge_closure = Some(w),
            Err(e @ Error::SymbolProductUnrepresentable { .. }) => diagnostics.push(format!("wedge closure not decided: {e}")),
            Err(e) => return Err(e),
        }
    }
    let kaehler = clock.time("kaehler", || kaehler_obstruction(spec));

    Ok(RunReport {
        schema_version: SCHEMA_VERSION,
        name: spec.name.clone(),
        n: spec.n,
        m: spec.m,
        mode,
        validation,
        trivial_pairs: pairs.iter().map(|(j, l)| PairEntry { j: j.clone(), l: l.clone() }).collect(),
        hodge_enumeration_agrees: enumerated == hodge,
        symmetry: hodge.is_symmetric(),
        serre: hodge.is_serre_dual(),
        euler_characteristic: betti.euler_characteristic(),
        betti: betti.values,
        certified_de_rham: betti.certified_de_rham,
        hodge,
        condition,
        conjugation_symmetry,
        harmonic_certified,
        wedge_closure,
        harmonicity_failures,
        kaehler,
        diagnostics,
        timings: clock.timings,
    })
}

impl RunReport {
    /// Names of the certified checks that failed.
    pub fn failed_checks(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.hodge_enumeration_agrees {
            out.push("hodge_enumeration");
        }
        if self.condition.holds {
            if !self.symmetry {
                out.push("symmetry");
            }
            if !self.conjugation_symmetry {
                out.push("conjugation_symmetry");
            }
            if !self.serre {
                out.push("serre");
            }
        }
        if self.harmonic_certified == Some(false) {
            out.push("harmonic_certified");
        }
        if self.wedge_closure.as_ref().is_some_and(|w| !w.closed) {
            out.push("wedge_closure");
        }
        out
    }

    pub fn exit_code(&self) -> i32 {
        if self.failed_checks().is_empty() {
            0
        } else {
            1
        }
    }

    /// Pretty JSON; timings are dropped unless asked for so that the output is reproducible.
    pub fn to_json(&self, include_timings: bool) -> String {
        let mut value = serde_json::to_value(self).expect("reports always serialize");
        if !include_timings {
            value.as_object_mut().expect("object").remove("timings");
        }
        serde_json::to_string_pretty(&value).expect("reports always serialize")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let yes_no = |b: bool| if b { "yes" } else { "no" };
        let _ = writeln!(s, "{}  (n = {}, m = {}, mode: {})", self.name, self.n, self.m, self.mode_str());
        let _ = writeln!(
            s,
            "lattice rank ok: {}   fiber preserved: {:?}",
            yes_no(self.validation.lattice_rank_ok),
            self.validation.fiber_preserved
        );
        for r in &self.validation.recovered {
            let _ = writeln!(
                s,
                "  generator {} acts by {:?} (det {}, residual {:.1e})",
                r.generator, r.matrix, r.determinant, r.max_residual
            );
        }
        let pairs: Vec<String> = self.trivial_pairs.iter().map(|p| format!("({},{})", p.j, p.l)).collect();
        let _ = writeln!(s, "trivial pairs ({}): {}", pairs.len(), pairs.join(" "));
        let _ = writeln!(s, "hodge numbers h[p][q]:");
        for row in self.hodge.rows() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:>4}")).collect();
            let _ = writeln!(s, " {}", cells.join(""));
        }
        let _ = writeln!(
            s,
            "betti: {:?}  (de Rham certified: {}, euler {})",
            self.betti,
            yes_no(self.certified_de_rham),
            self.euler_characteristic
        );
        let _ = writeln!(s, "condition holds: {}", yes_no(self.condition.holds));
        for v in &self.condition.violations {
            let _ = writeln!(s, "  violated at J={} L={}", v.j, v.l);
        }
        let _ = writeln!(
            s,
            "hodge symmetry: {}   conjugation symmetry: {}   serre duality: {}",
            yes_no(self.symmetry),
            yes_no(self.conjugation_symmetry),
            yes_no(self.serre)
        );
        match (self.harmonic_certified, &self.wedge_closure) {
            (None, None) => {
                let _ = writeln!(s, "forms-level checks skipped");
            }
            (h, w) => {
                let _ = writeln!(s, "harmonic certified: {}", h.map_or("undecided", |b| if b { "yes" } else { "no" }));
                match w {
                    Some(w) => {
                        let _ = writeln!(s, "wedge closure: {} ({} products)", yes_no(w.closed), w.products_checked);
                        if let Some((a, b)) = &w.failure {
                            let _ = writeln!(s, "  first failure: {a} ^ {b}");
                        }
                    }
                    None => {
                        let _ = writeln!(s, "wedge closure: undecided");
                    }
                }
            }
        }
        let witnesses: Vec<String> = self.kaehler.witnesses.iter().map(|w| w.to_string()).collect();
        let _ = writeln!(
            s,
            "kaehler: {}{}   completely solvable: {}",
            if self.kaehler.is_obstructed() { "obstructed" } else { "inconclusive" },
            if witnesses.is_empty() { String::new() } else { format!(" (witnesses {})", witnesses.join(",")) },
            yes_no(self.kaehler.completely_solvable)
        );
        for d in &self.diagnostics {
            let _ = writeln!(s, "note: {d}");
        }
        let failed = self.failed_checks();
        if !failed.is_empty() {
            let _ = writeln!(s, "FAILED: {}", failed.join(", "));
        }
        s
    }

    fn mode_str(&self) -> &'static str {
        match self.mode {
            Mode::Exact => "exact",
            Mode::FloatFallback => "float_fallback",
        }
    }

    pub fn to_latex(&self) -> String {
        hodge_diamond_latex(&self.hodge, &self.name)
    }
}

/// Hodge diamond with `h^{N,N}` on top and `h^{0,0}` at the bottom.
pub fn hodge_diamond_latex(table: &HodgeTable, caption: &str) -> String {
    let dim = table.dim();
    let width = 2 * dim + 1;
    let mut s = String::new();
    let _ = writeln!(s, "% Hodge diamond of {caption}");
    let _ = writeln!(s, "\\begin{{array}}{{{}}}", "c".repeat(width));
    for r in (0..=2 * dim).rev() {
        let mut cells = vec![String::new(); width];
        for p in r.saturating_sub(dim)..=r.min(dim) {
            let q = r - p;
            // h^{r,0} on the left, h^{0,r} on the right
            cells[dim + q - p] = table.get(p, q).to_string();
        }
        let _ = writeln!(s, "{} \\\\", cells.join(" & "));
    }
    let _ = writeln!(s, "\\end{{array}}");
    s
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HarmonicReport {
    pub schema_version: u32,
    pub name: String,
    pub condition_holds: bool,
    pub elements: Vec<BasisHarmonicity>,
}

impl HarmonicReport {
    pub fn all_pass(&self) -> bool {
        self.elements.iter().all(|h| h.flags.dbar_harmonic() && (!self.condition_holds || h.flags.d_harmonic()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for h in &self.elements {
            let _ = writeln!(
                s,
                "({},{}) I={} J={} K={} L={} dbar_closed={} co_closed={} d_harmonic={}",
                h.bidegree.0,
                h.bidegree.1,
                h.element.i,
                h.element.j,
                h.element.k,
                h.element.l,
                h.flags.dbar_closed,
                h.flags.co_closed,
                h.flags.d_harmonic()
            );
        }
        s
    }
}

/// Harmonicity flags of every basis form.
pub fn check_harmonic(spec: &SolvManifoldSpec, options: &AnalyzeOptions) -> Result<HarmonicReport> {
    let coh = Cohomology::compute(spec, SweepOptions { execution: options.execution, force_float: options.force_float })?;
    Ok(HarmonicReport {
        schema_version: SCHEMA_VERSION,
        name: spec.name.clone(),
        condition_holds: coh.check_condition()?.holds,
        elements: basis_harmonicity(&coh, options.max_dim, options.execution)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{example1, torus, TMode};

    #[test]
    fn example1_report() {
        let r = analyze(&example1(&[1], TMode::Symbolic).unwrap(), &AnalyzeOptions::default()).unwrap();
        assert_eq!(r.hodge.rows(), &[vec![1, 1, 1, 1], vec![1, 3, 3, 1], vec![1, 3, 3, 1], vec![1, 1, 1, 1]]);
        assert!(r.condition.holds && r.certified_de_rham);
        assert!(r.kaehler.is_obstructed());
        assert_eq!(r.harmonic_certified, Some(true));
        assert!(r.wedge_closure.as_ref().unwrap().closed);
        assert_eq!(r.exit_code(), 0);
        assert_eq!(r.mode, Mode::Exact);
        let json = r.to_json(false);
        assert!(json.contains("\"schema_version\": 1") && !json.contains("timings"));
        assert!(r.to_json(true).contains("timings"));
        assert!(r.to_text().contains("condition holds: yes"));
    }

    #[test]
    fn rational_pi_fails_condition_only() {
        let r = analyze(&example1(&[1], TMode::RationalPi { r: 1, s: 1 }).unwrap(), &AnalyzeOptions::default()).unwrap();
        assert!(!r.condition.holds);
        assert!(!r.certified_de_rham);
        assert_eq!(r.exit_code(), 0, "{:?}", r.failed_checks());
    }

    #[test]
    fn torus_report_and_options() {
        let spec = torus(1, 1).unwrap();
        let r = analyze(&spec, &AnalyzeOptions { skip_forms: true, ..Default::default() }).unwrap();
        assert_eq!(r.hodge.rows(), &[vec![1, 2, 1], vec![2, 4, 2], vec![1, 2, 1]]);
        assert!(r.harmonic_certified.is_none() && r.wedge_closure.is_none());
        let f = analyze(&spec, &AnalyzeOptions { force_float: true, ..Default::default() }).unwrap();
        assert_eq!(f.mode, Mode::FloatFallback);
        assert_eq!(f.hodge, r.hodge);
        let capped = analyze(&torus(4, 3).unwrap(), &AnalyzeOptions::default());
        assert!(matches!(capped, Err(Error::DimensionCap { dim: 7, max: 6 })));
    }

    #[test]
    fn latex_diamond() {
        let table = HodgeTable::from_rows(vec![vec![1, 2], vec![3, 4]]).unwrap();
        let tex = hodge_diamond_latex(&table, "x");
        let rows: Vec<&str> = tex.lines().filter(|l| l.ends_with("\\\\")).collect();
        assert_eq!(rows, vec![" & 4 &  \\\\", "3 &  & 2 \\\\", " & 1 &  \\\\"]);
    }

    #[test]
    fn check_harmonic_lines() {
        let r = check_harmonic(&example1(&[1], TMode::Symbolic).unwrap(), &AnalyzeOptions::default()).unwrap();
        assert!(r.all_pass());
        assert_eq!(r.to_text().lines().count(), 24);
        assert!(r.to_text().starts_with("(0,0) I={} J={} K={} L={} dbar_closed=true"));
    }
}
