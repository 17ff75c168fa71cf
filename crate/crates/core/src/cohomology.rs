//! The finite basis `B^{p,q}` of twisted invariant forms, Hodge and Betti
//! tables, and the lattice condition under which they are Hodge symmetric.
//!
//! A basis element is a quadruple `(I, J, K, L)` standing for
//! `dz_I ^ (alpha_J^-1 beta_J) dw_J ^ dzbar_K ^ (conj(alpha_L)^-1 gamma_L) dwbar_L`;
//! it is present iff `beta_J gamma_L` is trivial on the base lattice.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Serialize, Serializer};

use crate::characters::{product, triviality_on_lattice, CharacterExponent};
use crate::error::{Error, Result};
use crate::manifold::SolvManifoldSpec;
use crate::par::Execution;

/// Largest fiber dimension swept (4^m pairs).
pub const MAX_FIBER: usize = 12;
/// Largest `n + m` for which the basis is enumerated explicitly.
pub const MAX_ENUMERATION_DIM: usize = 12;

/// Strictly increasing list of 1-based indices.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(mut entries: Vec<usize>) -> Result<Self> {
        entries.sort_unstable();
        if entries.windows(2).any(|w| w[0] == w[1]) || entries.first() == Some(&0) {
            return Err(Error::MalformedSpec(format!("invalid multi-index {entries:?}")));
        }
        Ok(MultiIndex(entries))
    }

    pub fn empty() -> Self {
        MultiIndex(Vec::new())
    }

    /// Bit `k` of `mask` stands for index `k + 1`.
    pub fn from_mask(mask: u32) -> Self {
        MultiIndex((0..32).filter(|k| mask >> k & 1 == 1).map(|k| k as usize + 1).collect())
    }

    pub fn mask(&self) -> u32 {
        self.0.iter().fold(0, |acc, &i| acc | 1 << (i - 1))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entries(&self) -> &[usize] {
        &self.0
    }

    pub fn largest(&self) -> Option<usize> {
        self.0.last().copied()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, i) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{i}")?;
        }
        f.write_str("}")
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for MultiIndex {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(serializer)
    }
}

/// Subsets of `{1..k}` of size `size`, in lexicographic order.
pub fn subsets_of_size(k: usize, size: usize) -> Vec<MultiIndex> {
    fn rec(start: usize, k: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<MultiIndex>) {
        if left == 0 {
            out.push(MultiIndex(cur.clone()));
            return;
        }
        for i in start..=k {
            if k - i + 1 < left {
                break;
            }
            cur.push(i);
            rec(i + 1, k, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if size <= k {
        rec(1, k, size, &mut Vec::with_capacity(size), &mut out);
    }
    out
}

pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize)]
pub struct BasisElement {
    #[serde(rename = "I")]
    pub i: MultiIndex,
    #[serde(rename = "J")]
    pub j: MultiIndex,
    #[serde(rename = "K")]
    pub k: MultiIndex,
    #[serde(rename = "L")]
    pub l: MultiIndex,
}

impl BasisElement {
    pub fn new(i: MultiIndex, j: MultiIndex, k: MultiIndex, l: MultiIndex) -> Self {
        BasisElement { i, j, k, l }
    }

    pub fn bidegree(&self) -> (usize, usize) {
        (self.i.len() + self.j.len(), self.k.len() + self.l.len())
    }

    /// `(I, J, K, L) -> (K, L, I, J)`, the index map of complex conjugation.
    pub fn swapped(&self) -> BasisElement {
        BasisElement { i: self.k.clone(), j: self.l.clone(), k: self.i.clone(), l: self.j.clone() }
    }
}

impl fmt::Display for BasisElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(I={}, J={}, K={}, L={})", self.i, self.j, self.k, self.l)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SweepOptions {
    pub execution: Execution,
    /// Decide lattice triviality in floating point only.
    pub force_float: bool,
}

/// Pairs `(J, L)` with `beta_J gamma_L` trivial on the base lattice.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrivialPairs {
    m: usize,
    pairs: BTreeSet<(MultiIndex, MultiIndex)>,
    certified: bool,
}

impl TrivialPairs {
    /// An explicit pair set, e.g. for synthetic checks.
    pub fn from_pairs(m: usize, pairs: impl IntoIterator<Item = (MultiIndex, MultiIndex)>, certified: bool) -> Self {
        TrivialPairs { m, pairs: pairs.into_iter().collect(), certified }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(MultiIndex, MultiIndex)> {
        self.pairs.iter()
    }

    pub fn contains(&self, j: &MultiIndex, l: &MultiIndex) -> bool {
        self.pairs.contains(&(j.clone(), l.clone()))
    }

    /// False if any pair was decided by the float fallback.
    pub fn certified(&self) -> bool {
        self.certified
    }

    pub fn is_swap_closed(&self) -> bool {
        self.pairs.iter().all(|(j, l)| self.contains(l, j))
    }
}

fn check_fiber_size(m: usize) -> Result<()> {
    if m > MAX_FIBER {
        return Err(Error::FiberTooLarge { m, max: MAX_FIBER });
    }
    Ok(())
}

/// Sums the exponents of `chars[i]` over the bits of `mask`.
fn masked_product(n: usize, chars: &[CharacterExponent], mask: u32) -> Result<CharacterExponent> {
    product(n, chars.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, c)| c))
}

/// Sweeps all `4^m` pairs `(J, L)`.
pub fn trivial_pairs(spec: &SolvManifoldSpec, opts: SweepOptions) -> Result<TrivialPairs> {
    check_fiber_size(spec.m)?;
    let (n, m) = (spec.n, spec.m);
    let betas = spec.betas();
    let gammas = spec.gammas();
    let side = 1usize << m;
    let verdicts = opts.execution.map_range(side * side, |idx| {
        let (jm, lm) = ((idx / side) as u32, (idx % side) as u32);
        let chi = masked_product(n, &betas, jm)?.multiply(&masked_product(n, &gammas, lm)?)?;
        triviality_on_lattice(&chi, &spec.lattice, &spec.symbols, opts.force_float).map(|t| (jm, lm, t))
    });
    let mut pairs = BTreeSet::new();
    let mut certified = true;
    for v in verdicts {
        let (jm, lm, t) = v?;
        certified &= t.certified;
        if t.trivial {
            pairs.insert((MultiIndex::from_mask(jm), MultiIndex::from_mask(lm)));
        }
    }
    Ok(TrivialPairs { m, pairs, certified })
}

/// Dimensions `h[p][q]` for `0 <= p, q <= n + m`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HodgeTable {
    dim: usize,
    h: Vec<Vec<u64>>,
}

impl Serialize for HodgeTable {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.h.serialize(serializer)
    }
}

impl HodgeTable {
    pub fn from_rows(h: Vec<Vec<u64>>) -> Result<Self> {
        let dim = h.len().checked_sub(1).ok_or_else(|| Error::MalformedSpec("empty Hodge table".into()))?;
        if h.iter().any(|row| row.len() != dim + 1) {
            return Err(Error::MalformedSpec("Hodge table is not square".into()));
        }
        Ok(HodgeTable { dim, h })
    }

    /// The counting formula `sum over pairs of C(n, p - |J|) C(n, q - |L|)`.
    pub fn from_pairs(n: usize, pairs: &TrivialPairs) -> Self {
        let dim = n + pairs.m();
        let mut h = vec![vec![0u64; dim + 1]; dim + 1];
        for (j, l) in pairs.iter() {
            for a in 0..=n {
                for b in 0..=n {
                    h[a + j.len()][b + l.len()] += binomial(n, a) * binomial(n, b);
                }
            }
        }
        HodgeTable { dim, h }
    }

    /// `n + m`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, p: usize, q: usize) -> u64 {
        self.h[p][q]
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.h
    }

    pub fn total(&self) -> u64 {
        self.h.iter().flatten().sum()
    }

    /// `h[p][q] == h[q][p]`.
    pub fn is_symmetric(&self) -> bool {
        (0..=self.dim).all(|p| (0..=self.dim).all(|q| self.h[p][q] == self.h[q][p]))
    }

    /// `h[p][q] == h[N - p][N - q]`.
    pub fn is_serre_dual(&self) -> bool {
        let d = self.dim;
        (0..=d).all(|p| (0..=d).all(|q| self.h[p][q] == self.h[d - p][d - q]))
    }

    /// Anti-diagonal sums `sum_{p+q=r} h[p][q]`.
    pub fn column_sums(&self) -> Vec<u64> {
        let mut b = vec![0u64; 2 * self.dim + 1];
        for (p, row) in self.h.iter().enumerate() {
            for (q, v) in row.iter().enumerate() {
                b[p + q] += v;
            }
        }
        b
    }
}

pub fn hodge_symmetry(table: &HodgeTable) -> bool {
    table.is_symmetric()
}

pub fn serre_duality_check(table: &HodgeTable) -> bool {
    table.is_serre_dual()
}

/// Basis of `B^{p,q}` in lexicographic `(I, J, K, L)` order.
pub fn basis_for(n: usize, pairs: &TrivialPairs, p: usize, q: usize) -> Result<Vec<BasisElement>> {
    let dim = n + pairs.m();
    if p > dim || q > dim {
        return Err(Error::BidegreeOutOfRange { p, q, dim });
    }
    if dim > MAX_ENUMERATION_DIM {
        return Err(Error::DimensionCap { dim, max: MAX_ENUMERATION_DIM });
    }
    let mut out = Vec::new();
    for (j, l) in pairs.iter() {
        if j.len() > p || l.len() > q || p - j.len() > n || q - l.len() > n {
            continue;
        }
        let is = subsets_of_size(n, p - j.len());
        let ks = subsets_of_size(n, q - l.len());
        for i in &is {
            for k in &ks {
                out.push(BasisElement::new(i.clone(), j.clone(), k.clone(), l.clone()));
            }
        }
    }
    out.sort();
    Ok(out)
}

/// `(I, J, K, L) -> (K, L, I, J)` maps `B^{p,q}` onto `B^{q,p}` for every bidegree.
pub fn conjugation_symmetry_for(n: usize, pairs: &TrivialPairs) -> Result<bool> {
    let dim = n + pairs.m();
    for p in 0..=dim {
        for q in p..=dim {
            let forward: BTreeSet<_> = basis_for(n, pairs, p, q)?.iter().map(BasisElement::swapped).collect();
            let target: BTreeSet<_> = basis_for(n, pairs, q, p)?.into_iter().collect();
            if forward != target {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationReason {
    TrivialRestrictionButAlphaNontrivial,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    #[serde(rename = "J")]
    pub j: MultiIndex,
    #[serde(rename = "L")]
    pub l: MultiIndex,
    pub reason: ViolationReason,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConditionReport {
    pub holds: bool,
    pub violations: Vec<Violation>,
    /// Number of pairs `(J, L)` examined, i.e. `4^m`.
    pub checked_pairs: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BettiNumbers {
    pub values: Vec<u64>,
    /// Whether the sums are identified with de Rham Betti numbers.
    pub certified_de_rham: bool,
}

impl BettiNumbers {
    pub fn euler_characteristic(&self) -> i64 {
        self.values.iter().enumerate().map(|(r, b)| if r % 2 == 0 { *b as i64 } else { -(*b as i64) }).sum()
    }
}

/// Cohomology data of one spec: the trivial pairs plus everything derived
/// from them.
#[derive(Clone, Debug)]
pub struct Cohomology<'a> {
    spec: &'a SolvManifoldSpec,
    pairs: TrivialPairs,
    opts: SweepOptions,
}

impl<'a> Cohomology<'a> {
    pub fn compute(spec: &'a SolvManifoldSpec, opts: SweepOptions) -> Result<Self> {
        let pairs = trivial_pairs(spec, opts)?;
        Ok(Cohomology { spec, pairs, opts })
    }

    /// Uses a given pair set in place of the lattice sweep.
    pub fn with_pairs(spec: &'a SolvManifoldSpec, pairs: TrivialPairs, opts: SweepOptions) -> Self {
        Cohomology { spec, pairs, opts }
    }

    pub fn spec(&self) -> &SolvManifoldSpec {
        self.spec
    }

    pub fn trivial_pairs(&self) -> &TrivialPairs {
        &self.pairs
    }

    pub fn b_basis(&self, p: usize, q: usize) -> Result<Vec<BasisElement>> {
        basis_for(self.spec.n, &self.pairs, p, q)
    }

    /// All basis elements, ordered by bidegree then lexicographically.
    pub fn full_basis(&self) -> Result<Vec<BasisElement>> {
        let dim = self.spec.dim();
        let mut out = Vec::new();
        for p in 0..=dim {
            for q in 0..=dim {
                out.extend(self.b_basis(p, q)?);
            }
        }
        Ok(out)
    }

    pub fn contains(&self, el: &BasisElement) -> bool {
        let (n, m) = (self.spec.n, self.spec.m);
        el.i.largest().is_none_or(|x| x <= n)
            && el.k.largest().is_none_or(|x| x <= n)
            && el.j.largest().is_none_or(|x| x <= m)
            && el.l.largest().is_none_or(|x| x <= m)
            && self.pairs.contains(&el.j, &el.l)
    }

    pub fn hodge_table(&self) -> HodgeTable {
        HodgeTable::from_pairs(self.spec.n, &self.pairs)
    }

    /// Hodge table by counting the enumerated basis.
    pub fn hodge_table_by_enumeration(&self) -> Result<HodgeTable> {
        let dim = self.spec.dim();
        let mut h = vec![vec![0u64; dim + 1]; dim + 1];
        for (p, row) in h.iter_mut().enumerate() {
            for (q, v) in row.iter_mut().enumerate() {
                *v = self.b_basis(p, q)?.len() as u64;
            }
        }
        HodgeTable::from_rows(h)
    }

    /// For every trivial pair, checks that `alpha_J conj(alpha_L)` is the
    /// trivial character.
    ///
    /// # Panics
    /// If some `alpha_J conj(alpha_L)` is trivial while `(J, L)` is not a
    /// trivial pair; that direction holds identically.
    pub fn check_condition(&self) -> Result<ConditionReport> {
        let spec = self.spec;
        let conj: Vec<_> = spec.alphas.iter().map(CharacterExponent::conjugate).collect();
        let side = 1usize << spec.m;
        let rows = self.opts.execution.map_range(side * side, |idx| -> Result<Option<Violation>> {
            let (jm, lm) = ((idx / side) as u32, (idx % side) as u32);
            let prod = masked_product(spec.n, &spec.alphas, jm)?.multiply(&masked_product(spec.n, &conj, lm)?)?;
            let (j, l) = (MultiIndex::from_mask(jm), MultiIndex::from_mask(lm));
            let in_pairs = self.pairs.contains(&j, &l);
            assert!(!prod.is_trivial() || in_pairs, "alpha_J conj(alpha_L) trivial but (J, L) = ({j}, {l}) not a trivial pair");
            Ok((in_pairs && !prod.is_trivial()).then_some(Violation {
                j,
                l,
                reason: ViolationReason::TrivialRestrictionButAlphaNontrivial,
            }))
        });
        let mut violations = Vec::new();
        for r in rows {
            violations.extend(r?);
        }
        violations.sort_by(|a, b| (&a.j, &a.l).cmp(&(&b.j, &b.l)));
        Ok(ConditionReport { holds: violations.is_empty(), violations, checked_pairs: side * side })
    }

    pub fn conjugation_symmetry(&self) -> Result<bool> {
        conjugation_symmetry_for(self.spec.n, &self.pairs)
    }

    pub fn betti_numbers(&self) -> Result<BettiNumbers> {
        let values = self.hodge_table().column_sums();
        Ok(BettiNumbers { values, certified_de_rham: self.check_condition()?.holds })
    }
}

/// The basis of `B^{p,q}` with default sweep options.
pub fn b_basis(spec: &SolvManifoldSpec, p: usize, q: usize) -> Result<Vec<BasisElement>> {
    Cohomology::compute(spec, SweepOptions::default())?.b_basis(p, q)
}

pub fn hodge_table(spec: &SolvManifoldSpec) -> Result<HodgeTable> {
    Ok(Cohomology::compute(spec, SweepOptions::default())?.hodge_table())
}

pub fn check_condition(spec: &SolvManifoldSpec) -> Result<ConditionReport> {
    Cohomology::compute(spec, SweepOptions::default())?.check_condition()
}

pub fn betti_numbers(spec: &SolvManifoldSpec) -> Result<BettiNumbers> {
    Cohomology::compute(spec, SweepOptions::default())?.betti_numbers()
}

pub fn conjugation_symmetry(spec: &SolvManifoldSpec) -> Result<bool> {
    Cohomology::compute(spec, SweepOptions::default())?.conjugation_symmetry()
}
