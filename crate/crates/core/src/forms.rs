//! Character-twisted invariant forms and the operators acting on them.
//!
//! A form is a finite sum of terms `c * chi * omega` where `c` is an exact
//! complex scalar, `chi` a character of the base C^n and `omega` a wedge word
//! in the generators. Words are stored as bitmasks over the canonical slot
//! order `dz_1..dz_n, dw_1..dw_m, dzbar_1..dzbar_n, dwbar_1..dwbar_m`; in the
//! unitary coframe the same slots hold `e_1..e_N, ebar_1..ebar_N` with
//! `e_{n+i} = alpha_i^-1 dw_i`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::marker::PhantomData;

use serde::Serialize;

use crate::characters::CharacterExponent;
use crate::cohomology::{BasisElement, Cohomology};
use crate::error::{Error, Result};
use crate::exact::ComplexExact;
use crate::manifold::SolvManifoldSpec;
use crate::par::Execution;

/// Largest `n + m` for the forms-level checks by default.
pub const DEFAULT_MAX_FORMS_DIM: usize = 6;
/// Hard limit from the 32-bit word encoding.
pub const MAX_FORMS_DIM: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GeneratorKind {
    Dz,
    Dw,
    Dzbar,
    Dwbar,
}

/// One coordinate differential, 1-based index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Generator {
    pub kind: GeneratorKind,
    pub index: usize,
}

impl Generator {
    pub fn dz(index: usize) -> Self {
        Generator { kind: GeneratorKind::Dz, index }
    }
    pub fn dw(index: usize) -> Self {
        Generator { kind: GeneratorKind::Dw, index }
    }
    pub fn dzbar(index: usize) -> Self {
        Generator { kind: GeneratorKind::Dzbar, index }
    }
    pub fn dwbar(index: usize) -> Self {
        Generator { kind: GeneratorKind::Dwbar, index }
    }

    pub fn bidegree(&self) -> (usize, usize) {
        match self.kind {
            GeneratorKind::Dz | GeneratorKind::Dw => (1, 0),
            GeneratorKind::Dzbar | GeneratorKind::Dwbar => (0, 1),
        }
    }
}

/// Dimensions `(n, m)` and the slot layout derived from them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Layout {
    pub n: usize,
    pub m: usize,
}

impl Layout {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if n + m > MAX_FORMS_DIM {
            return Err(Error::DimensionCap { dim: n + m, max: MAX_FORMS_DIM });
        }
        Ok(Layout { n, m })
    }

    pub fn dim(&self) -> usize {
        self.n + self.m
    }

    fn holo_mask(&self) -> u32 {
        (1u32 << self.dim()) - 1
    }

    fn full_mask(&self) -> u32 {
        ((1u64 << (2 * self.dim())) - 1) as u32
    }

    pub fn slot(&self, g: Generator) -> Result<usize> {
        let (n, m, big) = (self.n, self.m, self.dim());
        let (bound, offset) = match g.kind {
            GeneratorKind::Dz => (n, 0),
            GeneratorKind::Dw => (m, n),
            GeneratorKind::Dzbar => (n, big),
            GeneratorKind::Dwbar => (m, big + n),
        };
        if g.index == 0 || g.index > bound {
            return Err(Error::DimensionMismatch { expected: bound, found: g.index });
        }
        Ok(offset + g.index - 1)
    }

    pub fn generator(&self, slot: usize) -> Generator {
        let (n, big) = (self.n, self.dim());
        let (local, anti) = if slot < big { (slot, false) } else { (slot - big, true) };
        let (kind, index) = match (local < n, anti) {
            (true, false) => (GeneratorKind::Dz, local + 1),
            (false, false) => (GeneratorKind::Dw, local - n + 1),
            (true, true) => (GeneratorKind::Dzbar, local + 1),
            (false, true) => (GeneratorKind::Dwbar, local - n + 1),
        };
        Generator { kind, index }
    }
}

/// Sorted wedge word of distinct generators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Word(u32);

impl Word {
    pub fn empty() -> Self {
        Word(0)
    }

    pub fn from_mask(mask: u32) -> Self {
        Word(mask)
    }

    pub fn mask(&self) -> u32 {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn bidegree(&self, layout: Layout) -> (usize, usize) {
        let h = layout.holo_mask();
        ((self.0 & h).count_ones() as usize, (self.0 & !h).count_ones() as usize)
    }

    /// `self ^ other = sign * (self | other)`, or `None` if they share a generator.
    pub fn wedge(self, other: Word) -> Option<(i8, Word)> {
        if self.0 & other.0 != 0 {
            return None;
        }
        let mut swaps = 0u32;
        let mut rest = other.0;
        while rest != 0 {
            let y = rest.trailing_zeros();
            rest &= rest - 1;
            swaps += (self.0 >> y).count_ones();
        }
        Some((if swaps.is_multiple_of(2) { 1 } else { -1 }, Word(self.0 | other.0)))
    }

    /// Wedge of generators in the given order.
    pub fn from_generators(layout: Layout, gens: &[Generator]) -> Result<Option<(i8, Word)>> {
        let mut sign = 1i8;
        let mut word = Word::empty();
        for g in gens {
            match word.wedge(Word(1 << layout.slot(*g)?)) {
                Some((s, w)) => {
                    sign *= s;
                    word = w;
                }
                None => return Ok(None),
            }
        }
        Ok(Some((sign, word)))
    }

    /// Word of the conjugate monomial, with the reordering sign `(-1)^{pq}`.
    pub fn conjugate(self, layout: Layout) -> (i8, Word) {
        let big = layout.dim();
        let h = self.0 & layout.holo_mask();
        let a = self.0 >> big;
        let (p, q) = self.bidegree(layout);
        (if (p * q) % 2 == 0 { 1 } else { -1 }, Word(a | h << big))
    }

    pub fn generators(&self, layout: Layout) -> Vec<Generator> {
        (0..2 * layout.dim()).filter(|s| self.0 >> s & 1 == 1).map(|s| layout.generator(s)).collect()
    }
}

/// Marker for forms written in the coordinate differentials.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coordinate {}
/// Marker for forms written in the unitary coframe of the canonical metric.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Unitary {}

type Key = (CharacterExponent, Word);

/// Normalized sum of terms `coeff * char * word`.
pub struct Form<B> {
    layout: Layout,
    terms: BTreeMap<Key, ComplexExact>,
    _basis: PhantomData<B>,
}

impl<B> Clone for Form<B> {
    fn clone(&self) -> Self {
        Form { layout: self.layout, terms: self.terms.clone(), _basis: PhantomData }
    }
}

impl<B> PartialEq for Form<B> {
    fn eq(&self, other: &Self) -> bool {
        self.layout == other.layout && self.terms == other.terms
    }
}

impl<B> Eq for Form<B> {}

pub type TwistedForm = Form<Coordinate>;
pub type FrameForm = Form<Unitary>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Term<'a> {
    pub coeff: &'a ComplexExact,
    pub character: &'a CharacterExponent,
    pub word: Word,
}

impl<B> Form<B> {
    pub fn zero(layout: Layout) -> Self {
        Form { layout, terms: BTreeMap::new(), _basis: PhantomData }
    }

    /// `coeff * chi * g_1 ^ ... ^ g_k`.
    pub fn monomial(layout: Layout, coeff: ComplexExact, chi: CharacterExponent, gens: &[Generator]) -> Result<Self> {
        if chi.n() != layout.n {
            return Err(Error::DimensionMismatch { expected: layout.n, found: chi.n() });
        }
        let mut out = Form::zero(layout);
        if let Some((sign, word)) = Word::from_generators(layout, gens)? {
            out.add_term(chi, word, &signed(&coeff, sign));
        }
        Ok(out)
    }

    pub fn constant(layout: Layout, coeff: ComplexExact) -> Self {
        let mut out = Form::zero(layout);
        out.add_term(CharacterExponent::trivial(layout.n), Word::empty(), &coeff);
        out
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = Term<'_>> {
        self.terms.iter().map(|((character, word), coeff)| Term { coeff, character, word: *word })
    }

    fn add_term(&mut self, chi: CharacterExponent, word: Word, coeff: &ComplexExact) {
        if coeff.is_zero() {
            return;
        }
        let key = (chi, word);
        let entry = self.terms.entry(key.clone()).or_default();
        *entry += coeff;
        if entry.is_zero() {
            self.terms.remove(&key);
        }
    }

    fn check_layout(&self, other: &Form<B>) -> Result<()> {
        if self.layout != other.layout {
            return Err(Error::DimensionMismatch { expected: self.layout.dim(), found: other.layout.dim() });
        }
        Ok(())
    }

    pub fn add(&self, other: &Form<B>) -> Result<Form<B>> {
        self.check_layout(other)?;
        let mut out = self.clone();
        for ((chi, w), c) in &other.terms {
            out.add_term(chi.clone(), *w, c);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Form<B>) -> Result<Form<B>> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Form<B> {
        self.map_coeffs(|c| -c)
    }

    pub fn scale(&self, s: &ComplexExact) -> Result<Form<B>> {
        let mut out = Form::zero(self.layout);
        for ((chi, w), c) in &self.terms {
            out.add_term(chi.clone(), *w, &c.mul(s)?);
        }
        Ok(out)
    }

    fn map_coeffs(&self, f: impl Fn(&ComplexExact) -> ComplexExact) -> Form<B> {
        Form { layout: self.layout, terms: self.terms.iter().map(|(k, c)| (k.clone(), f(c))).collect(), _basis: PhantomData }
    }

    /// Graded-commutative product; characters multiply.
    pub fn wedge(&self, other: &Form<B>) -> Result<Form<B>> {
        self.check_layout(other)?;
        let mut out = Form::zero(self.layout);
        for ((c1, w1), k1) in &self.terms {
            for ((c2, w2), k2) in &other.terms {
                if let Some((sign, w)) = w1.wedge(*w2) {
                    out.add_term(c1.multiply(c2)?, w, &signed(&k1.mul(k2)?, sign));
                }
            }
        }
        Ok(out)
    }

    /// Complex conjugate: conjugates coefficients and characters and swaps
    /// holomorphic and anti-holomorphic generators.
    pub fn conjugate(&self) -> Form<B> {
        let mut out = Form::zero(self.layout);
        for ((chi, w), c) in &self.terms {
            let (sign, cw) = w.conjugate(self.layout);
            out.add_term(chi.conjugate(), cw, &signed(&c.conj(), sign));
        }
        out
    }

    pub fn bidegrees(&self) -> BTreeSet<(usize, usize)> {
        self.terms.keys().map(|(_, w)| w.bidegree(self.layout)).collect()
    }

    /// The common bidegree of all terms; `None` for the zero form or mixed forms.
    pub fn homogeneous_bidegree(&self) -> Option<(usize, usize)> {
        let b = self.bidegrees();
        (b.len() == 1).then(|| *b.iter().next().unwrap())
    }

    /// Splits into bidegree components.
    pub fn components(&self) -> BTreeMap<(usize, usize), Form<B>> {
        let mut out: BTreeMap<_, Form<B>> = BTreeMap::new();
        for ((chi, w), c) in &self.terms {
            out.entry(w.bidegree(self.layout)).or_insert_with(|| Form::zero(self.layout)).add_term(chi.clone(), *w, c);
        }
        out
    }

    fn retag<C>(self) -> Form<C> {
        Form { layout: self.layout, terms: self.terms, _basis: PhantomData }
    }
}

fn signed(c: &ComplexExact, sign: i8) -> ComplexExact {
    if sign < 0 {
        -c
    } else {
        c.clone()
    }
}

impl TwistedForm {
    fn derivative(&self, holomorphic: bool) -> Result<TwistedForm> {
        let layout = self.layout;
        let big = layout.dim();
        let mut out = Form::zero(layout);
        for ((chi, w), c) in &self.terms {
            let exps = if holomorphic { chi.a() } else { chi.b() };
            for (j, e) in exps.iter().enumerate() {
                if e.is_zero() {
                    continue;
                }
                let slot = if holomorphic { j } else { big + j };
                if let Some((sign, nw)) = Word(1 << slot).wedge(*w) {
                    out.add_term(chi.clone(), nw, &signed(&e.mul(c)?, sign));
                }
            }
        }
        Ok(out)
    }

    /// `d = partial + dbar`; on `c chi omega`, partial contributes
    /// `c chi (sum_j a_j dz_j) ^ omega`.
    pub fn partial(&self) -> Result<TwistedForm> {
        self.derivative(true)
    }

    /// `c chi (sum_j b_j dzbar_j) ^ omega`.
    pub fn dbar(&self) -> Result<TwistedForm> {
        self.derivative(false)
    }

    pub fn d(&self) -> Result<TwistedForm> {
        self.partial()?.add(&self.dbar()?)
    }

    /// Substitutes `dw_i = alpha_i f_i` and `dwbar_i = conj(alpha_i) fbar_i`.
    pub fn to_frame(&self, spec: &SolvManifoldSpec) -> Result<FrameForm> {
        self.twist_fiber(spec, false).map(Form::retag)
    }
}

impl FrameForm {
    /// Inverse of [`TwistedForm::to_frame`].
    pub fn from_frame(&self, spec: &SolvManifoldSpec) -> Result<TwistedForm> {
        self.twist_fiber(spec, true).map(Form::retag)
    }

    /// Anti-linear Hodge star of the canonical metric, `(p, q) -> (N - p, N - q)`.
    ///
    /// On `c chi e_A ^ ebar_B` it returns
    /// `conj(c) conj(chi) eps(A, B) e_{A^c} ^ ebar_{B^c}` where `eps` makes
    /// `e_A ^ ebar_B ^ e_{A^c} ^ ebar_{B^c}` equal to
    /// `vol = e_1 ^ ebar_1 ^ ... ^ e_N ^ ebar_N`.
    pub fn bar_star(&self) -> Result<FrameForm> {
        if self.bidegrees().len() > 1 {
            return Err(Error::MixedBidegree);
        }
        Ok(self.bar_star_unchecked())
    }

    fn bar_star_unchecked(&self) -> FrameForm {
        let layout = self.layout;
        let full = layout.full_mask();
        let mut out = Form::zero(layout);
        for ((chi, w), c) in &self.terms {
            let sign = star_sign(layout, *w);
            out.add_term(chi.conjugate(), Word(full & !w.0), &signed(&c.conj(), sign));
        }
        out
    }

    /// `e_1 ^ ebar_1 ^ ... ^ e_N ^ ebar_N`.
    pub fn volume(layout: Layout) -> FrameForm {
        let big = layout.dim();
        let mut vol = FrameForm::constant(layout, ComplexExact::one());
        for k in 0..big {
            let pair = Form::<Unitary> {
                layout,
                terms: [((CharacterExponent::trivial(layout.n), Word(1 << k | 1 << (big + k))), ComplexExact::one())]
                    .into_iter()
                    .collect(),
                _basis: PhantomData,
            };
            vol = vol.wedge(&pair).expect("rational coefficients");
        }
        vol
    }
}

impl<B> Form<B> {
    fn twist_fiber(&self, spec: &SolvManifoldSpec, inverse: bool) -> Result<Form<B>> {
        let layout = self.layout;
        if spec.n != layout.n || spec.m != layout.m {
            return Err(Error::DimensionMismatch { expected: spec.dim(), found: layout.dim() });
        }
        let (n, big) = (layout.n, layout.dim());
        let holo: Vec<_> = spec.alphas.iter().map(|a| if inverse { a.inverse() } else { a.clone() }).collect();
        let anti: Vec<_> = holo.iter().map(CharacterExponent::conjugate).collect();
        let mut out = Form::zero(layout);
        for ((chi, w), c) in &self.terms {
            let mut chi = chi.clone();
            for i in 0..layout.m {
                if w.0 >> (n + i) & 1 == 1 {
                    chi = chi.multiply(&holo[i])?;
                }
                if w.0 >> (big + n + i) & 1 == 1 {
                    chi = chi.multiply(&anti[i])?;
                }
            }
            out.add_term(chi, *w, c);
        }
        Ok(out)
    }
}

/// Sign of `e_A ^ ebar_B ^ e_{A^c} ^ ebar_{B^c}` against the interleaved volume.
fn star_sign(layout: Layout, word: Word) -> i8 {
    let big = layout.dim();
    let complement = layout.full_mask() & !word.0;
    // position of each slot in the interleaved volume order
    let pos = |slot: usize| if slot < big { 2 * slot } else { 2 * (slot - big) + 1 };
    let seq: Vec<usize> =
        [word.0, complement].iter().flat_map(|mask| (0..2 * big).filter(move |s| mask >> s & 1 == 1)).map(pos).collect();
    let inversions: usize = (0..seq.len()).map(|i| seq[i + 1..].iter().filter(|&&y| y < seq[i]).count()).sum();
    if inversions.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

impl<B> fmt::Display for Form<B> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        for (k, ((chi, w), c)) in self.terms.iter().enumerate() {
            if k > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "({c}) {chi} ")?;
            if w.is_empty() {
                f.write_str("1")?;
            }
            for (i, g) in w.generators(self.layout).iter().enumerate() {
                if i > 0 {
                    f.write_str("^")?;
                }
                let name = match g.kind {
                    GeneratorKind::Dz => "dz",
                    GeneratorKind::Dw => "dw",
                    GeneratorKind::Dzbar => "dzbar",
                    GeneratorKind::Dwbar => "dwbar",
                };
                write!(f, "{name}{}", g.index)?;
            }
        }
        Ok(())
    }
}

impl<B> fmt::Debug for Form<B> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Twisted-form version of the Hodge star, through the unitary coframe.
pub fn bar_star_twisted(f: &TwistedForm, spec: &SolvManifoldSpec) -> Result<TwistedForm> {
    f.to_frame(spec)?.bar_star()?.from_frame(spec)
}

/// The C-linear Hodge star `*f = bar_star(conj f)`, applied per bidegree.
pub fn hodge_star(f: &TwistedForm, spec: &SolvManifoldSpec) -> Result<TwistedForm> {
    let frame = f.conjugate().to_frame(spec)?;
    frame.bar_star_unchecked().from_frame(spec)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Harmonicity {
    pub dbar_closed: bool,
    pub co_closed: bool,
    pub d_closed: bool,
    pub d_co_closed: bool,
}

impl Harmonicity {
    pub fn dbar_harmonic(&self) -> bool {
        self.dbar_closed && self.co_closed
    }

    pub fn d_harmonic(&self) -> bool {
        self.d_closed && self.d_co_closed
    }
}

/// All four closedness flags of a form of pure bidegree.
pub fn harmonicity(f: &TwistedForm, spec: &SolvManifoldSpec) -> Result<Harmonicity> {
    if f.bidegrees().len() > 1 {
        return Err(Error::MixedBidegree);
    }
    Ok(Harmonicity {
        dbar_closed: f.dbar()?.is_zero(),
        co_closed: bar_star_twisted(f, spec)?.dbar()?.is_zero(),
        d_closed: f.d()?.is_zero(),
        d_co_closed: hodge_star(f, spec)?.d()?.is_zero(),
    })
}

/// `dbar f = 0` and `dbar(bar_star f) = 0`.
pub fn is_dbar_harmonic(f: &TwistedForm, spec: &SolvManifoldSpec) -> Result<bool> {
    if f.bidegrees().len() > 1 {
        return Err(Error::MixedBidegree);
    }
    Ok(f.dbar()?.is_zero() && bar_star_twisted(f, spec)?.dbar()?.is_zero())
}

/// `d f = 0` and `d(*f) = 0`.
pub fn is_d_harmonic(f: &TwistedForm, spec: &SolvManifoldSpec) -> Result<bool> {
    let degrees: BTreeSet<usize> = f.bidegrees().iter().map(|(p, q)| p + q).collect();
    if degrees.len() > 1 {
        return Err(Error::MixedBidegree);
    }
    Ok(f.d()?.is_zero() && hodge_star(f, spec)?.d()?.is_zero())
}

/// Character `alpha_J^-1 beta_J conj(alpha_L)^-1 gamma_L` of a basis element.
pub fn basis_character(spec: &SolvManifoldSpec, el: &BasisElement) -> Result<CharacterExponent> {
    let mut chi = CharacterExponent::trivial(spec.n);
    for &j in el.j.entries() {
        let alpha = &spec.alphas[j - 1];
        chi = chi.multiply(&alpha.inverse())?.multiply(&alpha.unitary_part())?;
    }
    for &l in el.l.entries() {
        let alpha = &spec.alphas[l - 1];
        chi = chi.multiply(&alpha.conjugate().inverse())?.multiply(&alpha.gamma())?;
    }
    Ok(chi)
}

/// The monomial `dz_I ^ (..) dw_J ^ dzbar_K ^ (..) dwbar_L` of a basis element.
pub fn basis_form(coh: &Cohomology<'_>, el: &BasisElement) -> Result<TwistedForm> {
    if !coh.contains(el) {
        return Err(Error::NotInBasis(el.to_string()));
    }
    let spec = coh.spec();
    let layout = Layout::new(spec.n, spec.m)?;
    let gens: Vec<Generator> =
        el.i.entries()
            .iter()
            .map(|&i| Generator::dz(i))
            .chain(el.j.entries().iter().map(|&j| Generator::dw(j)))
            .chain(el.k.entries().iter().map(|&k| Generator::dzbar(k)))
            .chain(el.l.entries().iter().map(|&l| Generator::dwbar(l)))
            .collect();
    TwistedForm::monomial(layout, ComplexExact::one(), basis_character(spec, el)?, &gens)
}

/// Reduced row echelon span of forms over the exact complex scalars.
#[derive(Clone, Debug, Default)]
pub struct Span {
    rows: Vec<(Key, BTreeMap<Key, ComplexExact>)>,
    pivot_of: HashMap<Key, usize>,
}

impl Span {
    pub fn new() -> Self {
        Span::default()
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    fn reduce(&self, mut v: BTreeMap<Key, ComplexExact>) -> Result<BTreeMap<Key, ComplexExact>> {
        for (key, row) in &self.rows {
            let Some(c) = v.get(key).cloned() else { continue };
            for (k, x) in row {
                let entry = v.entry(k.clone()).or_default();
                *entry = &*entry - &c.mul(x)?;
                if entry.is_zero() {
                    v.remove(k);
                }
            }
        }
        Ok(v)
    }

    pub fn insert<B>(&mut self, f: &Form<B>) -> Result<bool> {
        let v = self.reduce(f.terms.clone())?;
        let Some((key, lead)) = v.iter().next().map(|(k, c)| (k.clone(), c.clone())) else {
            return Ok(false);
        };
        let inv = lead.inv()?;
        let row: BTreeMap<_, _> = v.into_iter().map(|(k, c)| c.mul(&inv).map(|c| (k, c))).collect::<Result<_>>()?;
        for (_, other) in self.rows.iter_mut() {
            let Some(c) = other.get(&key).cloned() else { continue };
            for (k, x) in &row {
                let entry = other.entry(k.clone()).or_default();
                *entry = &*entry - &c.mul(x)?;
                if entry.is_zero() {
                    other.remove(k);
                }
            }
        }
        self.pivot_of.insert(key.clone(), self.rows.len());
        self.rows.push((key, row));
        Ok(true)
    }

    pub fn contains<B>(&self, f: &Form<B>) -> Result<bool> {
        Ok(self.reduce(f.terms.clone())?.is_empty())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WedgeClosure {
    pub closed: bool,
    /// First pair (in basis order) whose product leaves the span.
    pub failure: Option<(BasisElement, BasisElement)>,
    pub products_checked: usize,
}

/// Checks that the wedge of any two basis forms lies in the span of the basis.
pub fn harmonic_wedge_closure(coh: &Cohomology<'_>, max_dim: usize, execution: Execution) -> Result<WedgeClosure> {
    let spec = coh.spec();
    if spec.dim() > max_dim {
        return Err(Error::DimensionCap { dim: spec.dim(), max: max_dim });
    }
    let basis = coh.full_basis()?;
    let forms: Vec<TwistedForm> = basis.iter().map(|el| basis_form(coh, el)).collect::<Result<_>>()?;
    let mut span = Span::new();
    for f in &forms {
        span.insert(f)?;
    }
    let words: Vec<u32> = forms.iter().map(|f| f.terms.keys().fold(0, |acc, (_, w)| acc | w.0)).collect();
    let rows = execution.map_range(forms.len(), |i| -> Result<(usize, Option<usize>)> {
        let mut checked = 0;
        for j in i..forms.len() {
            if words[i] & words[j] != 0 {
                continue;
            }
            checked += 1;
            if !span.contains(&forms[i].wedge(&forms[j])?)? {
                return Ok((checked, Some(j)));
            }
        }
        Ok((checked, None))
    });
    let mut products_checked = 0;
    let mut failure = None;
    for (i, r) in rows.into_iter().enumerate() {
        let (checked, bad) = r?;
        products_checked += checked;
        if let (None, Some(j)) = (&failure, bad) {
            failure = Some((basis[i].clone(), basis[j].clone()));
        }
    }
    Ok(WedgeClosure { closed: failure.is_none(), failure, products_checked })
}

/// Harmonicity flags of one basis element.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BasisHarmonicity {
    pub element: BasisElement,
    pub bidegree: (usize, usize),
    #[serde(flatten)]
    pub flags: Harmonicity,
}

/// Harmonicity of every basis form.
pub fn basis_harmonicity(coh: &Cohomology<'_>, max_dim: usize, execution: Execution) -> Result<Vec<BasisHarmonicity>> {
    let spec = coh.spec();
    if spec.dim() > max_dim {
        return Err(Error::DimensionCap { dim: spec.dim(), max: max_dim });
    }
    let basis = coh.full_basis()?;
    execution
        .map(&basis, |el| {
            let f = basis_form(coh, el)?;
            Ok(BasisHarmonicity { element: el.clone(), bidegree: el.bidegree(), flags: harmonicity(&f, spec)? })
        })
        .into_iter()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohomology::{MultiIndex, SweepOptions};
    use crate::exact::ExactScalar;
    use crate::manifold::{example1, torus, TMode};

    fn holo(n: usize, coeffs: &[i64]) -> CharacterExponent {
        CharacterExponent::new(coeffs.iter().map(|&a| ComplexExact::ratio(a, 1)).collect(), vec![ComplexExact::zero(); n])
            .unwrap()
    }

    fn mi(v: &[usize]) -> MultiIndex {
        MultiIndex::new(v.to_vec()).unwrap()
    }

    #[test]
    fn word_signs() {
        let l = Layout::new(2, 1).unwrap();
        let (s, w) = Word::from_generators(l, &[Generator::dz(2), Generator::dz(1)]).unwrap().unwrap();
        assert_eq!(s, -1);
        assert_eq!(w.generators(l), vec![Generator::dz(1), Generator::dz(2)]);
        assert!(Word::from_generators(l, &[Generator::dz(1), Generator::dz(1)]).unwrap().is_none());
        assert!(Word::from_generators(l, &[Generator::dw(2)]).is_err());
        for slot in 0..6 {
            assert_eq!(l.slot(l.generator(slot)).unwrap(), slot);
        }
    }

    #[test]
    fn wedge_examples() {
        let l = Layout::new(1, 1).unwrap();
        let dz = TwistedForm::monomial(l, ComplexExact::one(), CharacterExponent::trivial(1), &[Generator::dz(1)]).unwrap();
        assert!(dz.wedge(&dz).unwrap().is_zero());

        let twisted = TwistedForm::monomial(l, ComplexExact::one(), holo(1, &[-2]), &[Generator::dw(1)]).unwrap();
        let dwbar = TwistedForm::monomial(l, ComplexExact::one(), CharacterExponent::trivial(1), &[Generator::dwbar(1)]).unwrap();
        let expected =
            TwistedForm::monomial(l, ComplexExact::one(), holo(1, &[-2]), &[Generator::dw(1), Generator::dwbar(1)]).unwrap();
        assert_eq!(twisted.wedge(&dwbar).unwrap(), expected);
        assert_eq!(dwbar.wedge(&twisted).unwrap(), expected.neg());
    }

    #[test]
    fn derivative_examples() {
        let l = Layout::new(1, 1).unwrap();
        let f = TwistedForm::monomial(l, ComplexExact::one(), holo(1, &[-2]), &[Generator::dw(1), Generator::dwbar(1)]).unwrap();
        assert!(f.dbar().unwrap().is_zero());

        let ex = CharacterExponent::real_exp(&[ExactScalar::int(1)]);
        let g = TwistedForm::monomial(l, ComplexExact::one(), ex.clone(), &[Generator::dw(1)]).unwrap();
        let expected = TwistedForm::monomial(l, ComplexExact::ratio(1, 2), ex, &[Generator::dz(1), Generator::dw(1)]).unwrap();
        assert_eq!(g.partial().unwrap(), expected);

        let c = TwistedForm::monomial(
            l,
            ComplexExact::ratio(3, 1),
            CharacterExponent::trivial(1),
            &[Generator::dz(1), Generator::dzbar(1)],
        )
        .unwrap();
        assert!(c.d().unwrap().is_zero());
    }

    #[test]
    fn frame_conversion() {
        let spec = example1(&[1], TMode::Symbolic).unwrap();
        let coh = Cohomology::compute(&spec, SweepOptions::default()).unwrap();
        let el = BasisElement::new(MultiIndex::empty(), mi(&[1]), MultiIndex::empty(), mi(&[2]));
        let f = basis_form(&coh, &el).unwrap();
        let frame = f.to_frame(&spec).unwrap();
        let term = frame.terms().next().unwrap();
        assert_eq!(term.character, &spec.betas()[0].multiply(&spec.gammas()[1]).unwrap());
        assert_eq!(frame.from_frame(&spec).unwrap(), f);

        let single = TwistedForm::monomial(
            Layout::new(1, 2).unwrap(),
            ComplexExact::one(),
            basis_character(&spec, &BasisElement::new(MultiIndex::empty(), mi(&[1]), MultiIndex::empty(), MultiIndex::empty()))
                .unwrap(),
            &[Generator::dw(1)],
        )
        .unwrap();
        let beta1 = CharacterExponent::imag_exp(&[ExactScalar::int(-1)]);
        assert_eq!(single.to_frame(&spec).unwrap().terms().next().unwrap().character, &beta1);

        let dz = TwistedForm::monomial(
            Layout::new(1, 2).unwrap(),
            ComplexExact::one(),
            CharacterExponent::trivial(1),
            &[Generator::dz(1)],
        )
        .unwrap();
        assert_eq!(dz.to_frame(&spec).unwrap().retag::<Coordinate>(), dz);
    }

    #[test]
    fn bar_star_low_dimension() {
        let l = Layout::new(1, 0).unwrap();
        let one = FrameForm::constant(l, ComplexExact::one());
        let vol = FrameForm::volume(l);
        assert_eq!(one.bar_star().unwrap(), vol);
        assert_eq!(vol.bar_star().unwrap(), one);
        let e1 = FrameForm::monomial(l, ComplexExact::one(), CharacterExponent::trivial(1), &[Generator::dz(1)]).unwrap();
        assert_eq!(e1.wedge(&e1.bar_star().unwrap()).unwrap(), vol);
        assert_eq!(e1.bar_star().unwrap().homogeneous_bidegree(), Some((0, 1)));

        let mixed = one.add(&e1).unwrap();
        assert_eq!(mixed.bar_star().unwrap_err(), Error::MixedBidegree);
    }

    #[test]
    fn bar_star_is_antilinear() {
        let l = Layout::new(1, 1).unwrap();
        let chi = CharacterExponent::imag_exp(&[ExactScalar::int(3)]);
        let c = ComplexExact::new(ExactScalar::int(2), ExactScalar::int(-5));
        let f = FrameForm::monomial(l, c.clone(), chi.clone(), &[Generator::dz(1), Generator::dwbar(1)]).unwrap();
        let star = f.bar_star().unwrap();
        let term = star.terms().next().unwrap();
        assert_eq!(term.character, &chi.conjugate());
        assert!(term.coeff == &c.conj() || term.coeff == &-&c.conj());
        let norm = f.wedge(&star).unwrap();
        assert_eq!(norm, FrameForm::volume(l).scale(&ComplexExact::ratio(29, 1)).unwrap());
    }

    #[test]
    fn harmonicity_examples() {
        let spec = example1(&[1], TMode::Symbolic).unwrap();
        let l = Layout::new(1, 2).unwrap();
        let dz = TwistedForm::monomial(l, ComplexExact::one(), CharacterExponent::trivial(1), &[Generator::dz(1)]).unwrap();
        assert!(is_dbar_harmonic(&dz, &spec).unwrap());
        assert!(is_d_harmonic(&dz, &spec).unwrap());

        let anti = CharacterExponent::new(vec![ComplexExact::zero()], vec![ComplexExact::ratio(-2, 1)]).unwrap();
        let bad = TwistedForm::monomial(l, ComplexExact::one(), anti, &[Generator::dw(1)]).unwrap();
        assert!(!is_dbar_harmonic(&bad, &spec).unwrap());

        let ex = TwistedForm::monomial(
            l,
            ComplexExact::one(),
            CharacterExponent::real_exp(&[ExactScalar::int(1)]),
            &[Generator::dw(1)],
        )
        .unwrap();
        assert!(!is_d_harmonic(&ex, &spec).unwrap());

        let mixed = dz.add(&TwistedForm::constant(l, ComplexExact::one())).unwrap();
        assert_eq!(is_dbar_harmonic(&mixed, &spec).unwrap_err(), Error::MixedBidegree);

        let torus = torus(1, 0).unwrap();
        let dz1 = TwistedForm::monomial(
            Layout::new(1, 0).unwrap(),
            ComplexExact::one(),
            CharacterExponent::trivial(1),
            &[Generator::dz(1)],
        )
        .unwrap();
        assert!(is_d_harmonic(&dz1, &torus).unwrap());
    }

    #[test]
    fn basis_form_examples() {
        let spec = example1(&[1], TMode::RationalPi { r: 1, s: 1 }).unwrap();
        let coh = Cohomology::compute(&spec, SweepOptions::default()).unwrap();
        let e = MultiIndex::empty;
        let f = basis_form(&coh, &BasisElement::new(mi(&[1]), e(), e(), e())).unwrap();
        assert_eq!(
            f,
            TwistedForm::monomial(
                Layout::new(1, 2).unwrap(),
                ComplexExact::one(),
                CharacterExponent::trivial(1),
                &[Generator::dz(1)]
            )
            .unwrap()
        );

        let g = basis_form(&coh, &BasisElement::new(e(), mi(&[1]), e(), mi(&[1]))).unwrap();
        let expected = TwistedForm::monomial(
            Layout::new(1, 2).unwrap(),
            ComplexExact::one(),
            holo(1, &[-2]),
            &[Generator::dw(1), Generator::dwbar(1)],
        )
        .unwrap();
        assert_eq!(g, expected);
        assert!(is_dbar_harmonic(&g, &spec).unwrap());
        assert!(!is_d_harmonic(&g, &spec).unwrap());

        assert!(matches!(basis_form(&coh, &BasisElement::new(e(), mi(&[1]), e(), e())), Err(Error::NotInBasis(_))));
        assert!(matches!(basis_form(&coh, &BasisElement::new(mi(&[2]), e(), e(), e())), Err(Error::NotInBasis(_))));
    }

    #[test]
    fn conjugate_basis_form_is_swapped_element() {
        let spec = example1(&[1], TMode::Symbolic).unwrap();
        let coh = Cohomology::compute(&spec, SweepOptions::default()).unwrap();
        for el in coh.full_basis().unwrap() {
            let (p, q) = el.bidegree();
            let sign = if (p * q) % 2 == 0 { 1 } else { -1 };
            let conj = basis_form(&coh, &el).unwrap().conjugate();
            let swapped = basis_form(&coh, &el.swapped()).unwrap();
            assert_eq!(conj, swapped.scale(&ComplexExact::ratio(sign, 1)).unwrap(), "{el}");
        }
    }

    #[test]
    fn span_membership() {
        let l = Layout::new(1, 0).unwrap();
        let triv = CharacterExponent::trivial(1);
        let a = TwistedForm::monomial(l, ComplexExact::one(), triv.clone(), &[Generator::dz(1)]).unwrap();
        let b = TwistedForm::monomial(l, ComplexExact::one(), triv.clone(), &[Generator::dzbar(1)]).unwrap();
        let mut span = Span::new();
        assert!(span.insert(&a.add(&b).unwrap()).unwrap());
        assert!(!span.insert(&a.add(&b).unwrap().scale(&ComplexExact::ratio(3, 1)).unwrap()).unwrap());
        assert!(!span.contains(&a).unwrap());
        assert!(span.insert(&a.sub(&b).unwrap()).unwrap());
        assert!(span.contains(&a).unwrap() && span.contains(&b).unwrap());
        assert_eq!(span.dim(), 2);
        assert!(!span.contains(&TwistedForm::constant(l, ComplexExact::one())).unwrap());
    }

    #[test]
    fn wedge_closure_examples() {
        for spec in [torus(1, 1).unwrap(), example1(&[1], TMode::Symbolic).unwrap(), example1(&[2, 3], TMode::Symbolic).unwrap()]
        {
            let coh = Cohomology::compute(&spec, SweepOptions::default()).unwrap();
            let w = harmonic_wedge_closure(&coh, DEFAULT_MAX_FORMS_DIM, Execution::Parallel).unwrap();
            assert!(w.closed, "{}: {:?}", spec.name, w.failure);
            assert!(w.products_checked > 0);
        }
        let big = torus(4, 3).unwrap();
        let coh = Cohomology::compute(&big, SweepOptions::default()).unwrap();
        assert!(matches!(
            harmonic_wedge_closure(&coh, DEFAULT_MAX_FORMS_DIM, Execution::Parallel),
            Err(Error::DimensionCap { .. })
        ));
    }

    #[test]
    fn wedge_closure_detects_missing_products() {
        // drop ({1},{2}) from the symbolic example1 pairs: dw1 ^ dwbar2 now leaves the span
        let spec = example1(&[1], TMode::Symbolic).unwrap();
        let full = crate::cohomology::trivial_pairs(&spec, SweepOptions::default()).unwrap();
        let e = MultiIndex::empty;
        let pairs = crate::cohomology::TrivialPairs::from_pairs(
            2,
            full.iter().filter(|(j, l)| !(*j == mi(&[1, 2]) && *l == mi(&[1, 2]))).cloned(),
            true,
        );
        let coh = Cohomology::with_pairs(&spec, pairs, SweepOptions::default());
        let w = harmonic_wedge_closure(&coh, DEFAULT_MAX_FORMS_DIM, Execution::Sequential).unwrap();
        assert!(!w.closed);
        let (a, b) = w.failure.unwrap();
        assert!(coh.contains(&a) && coh.contains(&b));
        let _ = e;
    }

    #[test]
    fn bar_star_squared_sign_depends_only_on_bidegree() {
        for (n, m) in [(1, 0), (1, 1), (2, 1), (1, 2)] {
            let l = Layout::new(n, m).unwrap();
            let chi = CharacterExponent::imag_exp(&vec![ExactScalar::int(1); n]);
            let mut sigma: BTreeMap<(usize, usize), ComplexExact> = BTreeMap::new();
            for mask in 0..=l.full_mask() {
                let f = FrameForm {
                    layout: l,
                    terms: [((chi.clone(), Word(mask)), ComplexExact::ratio(2, 3))].into(),
                    _basis: PhantomData,
                };
                let twice = f.bar_star().unwrap().bar_star().unwrap();
                let (p, q) = Word(mask).bidegree(l);
                let s = if twice == f {
                    ComplexExact::one()
                } else {
                    assert_eq!(twice, f.neg());
                    ComplexExact::ratio(-1, 1)
                };
                assert_eq!(sigma.entry((p, q)).or_insert_with(|| s.clone()), &s, "(n,m)=({n},{m}) bidegree ({p},{q})");
                assert_eq!(f.bar_star().unwrap().homogeneous_bidegree(), Some((l.dim() - p, l.dim() - q)));
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn small() -> impl Strategy<Value = ComplexExact> {
            (-3i64..=3, 1i64..=2, -3i64..=3, 1i64..=2)
                .prop_map(|(a, b, c, d)| ComplexExact::new(ExactScalar::ratio(a, b), ExactScalar::ratio(c, d)))
        }

        fn character(n: usize) -> impl Strategy<Value = CharacterExponent> {
            (prop::collection::vec(small(), n), prop::collection::vec(small(), n))
                .prop_map(|(a, b)| CharacterExponent::new(a, b).unwrap())
        }

        fn unitary(n: usize) -> impl Strategy<Value = CharacterExponent> {
            prop::collection::vec(-3i64..=3, n)
                .prop_map(|d| CharacterExponent::imag_exp(&d.into_iter().map(ExactScalar::int).collect::<Vec<_>>()))
        }

        fn layout() -> impl Strategy<Value = Layout> {
            (1usize..=2, 0usize..=2).prop_map(|(n, m)| Layout::new(n, m).unwrap())
        }

        fn form<B: 'static>(l: Layout, degree: Option<usize>) -> impl Strategy<Value = Form<B>> {
            let slots: Vec<u32> = (0..2 * l.dim() as u32).collect();
            let size = match degree {
                Some(k) => k.min(slots.len())..=k.min(slots.len()),
                None => 0..=slots.len(),
            };
            let word = prop::sample::subsequence(slots, size).prop_map(|s| s.into_iter().fold(0u32, |acc, b| acc | 1 << b));
            prop::collection::vec((small(), character(l.n), word), 0..4).prop_map(move |terms| {
                let mut f = Form::zero(l);
                for (c, chi, w) in terms {
                    f.add_term(chi, Word(w), &c);
                }
                f
            })
        }

        fn layout_and_form() -> impl Strategy<Value = (Layout, TwistedForm)> {
            layout().prop_flat_map(|l| (Just(l), form(l, None)))
        }

        proptest! {
            #[test]
            fn dga_laws((_l, f) in layout_and_form()) {
                prop_assert!(f.partial().unwrap().partial().unwrap().is_zero());
                prop_assert!(f.dbar().unwrap().dbar().unwrap().is_zero());
                let mixed = f.partial().unwrap().dbar().unwrap().add(&f.dbar().unwrap().partial().unwrap()).unwrap();
                prop_assert!(mixed.is_zero());
                prop_assert!(f.d().unwrap().d().unwrap().is_zero());
            }

            #[test]
            fn bidegree_bookkeeping((l, f) in layout_and_form()) {
                for (p, q) in f.dbar().unwrap().bidegrees() {
                    prop_assert!(f.bidegrees().contains(&(p, q - 1)));
                }
                for (p, q) in f.partial().unwrap().bidegrees() {
                    prop_assert!(f.bidegrees().contains(&(p - 1, q)));
                }
                for ((p, q), c) in f.retag::<Unitary>().components() {
                    prop_assert_eq!(c.bar_star().unwrap().bidegrees().into_iter().collect::<Vec<_>>(), vec![(l.dim() - p, l.dim() - q)]);
                }
            }

            #[test]
            fn leibniz(
                (f, g) in (layout(), 0usize..=3, 0usize..=3)
                    .prop_flat_map(|(l, a, b)| (form::<Coordinate>(l, Some(a)), form::<Coordinate>(l, Some(b))))
            ) {
                let deg = f.terms().next().map_or(0, |t| t.word.len());
                let sign = ComplexExact::ratio(if deg % 2 == 0 { 1 } else { -1 }, 1);
                let lhs = f.wedge(&g).unwrap().d().unwrap();
                let rhs = f.d().unwrap().wedge(&g).unwrap().add(&f.wedge(&g.d().unwrap()).unwrap().scale(&sign).unwrap()).unwrap();
                prop_assert_eq!(lhs, rhs);
            }

            #[test]
            fn graded_commutativity(
                (f, g) in (layout(), 0usize..=3, 0usize..=3)
                    .prop_flat_map(|(l, a, b)| (form::<Coordinate>(l, Some(a)), form::<Coordinate>(l, Some(b))))
            ) {
                let a = f.terms().next().map_or(0, |t| t.word.len());
                let b = g.terms().next().map_or(0, |t| t.word.len());
                let sign = ComplexExact::ratio(if (a * b) % 2 == 0 { 1 } else { -1 }, 1);
                prop_assert_eq!(f.wedge(&g).unwrap(), g.wedge(&f).unwrap().scale(&sign).unwrap());
            }

            #[test]
            fn star_norm_is_positive(
                (l, chi, c, w) in layout().prop_flat_map(|l| (Just(l), unitary(l.n), small(), 0..=l.full_mask()))
            ) {
                prop_assume!(!c.is_zero());
                let f = FrameForm { layout: l, terms: [((chi, Word(w)), c.clone())].into(), _basis: PhantomData };
                let norm = f.wedge(&f.bar_star().unwrap()).unwrap();
                let r = c.re.as_rational().unwrap();
                let i = c.im.as_rational().unwrap();
                let expected = ComplexExact::real(ExactScalar::rational(&r * &r + &i * &i));
                prop_assert_eq!(norm, FrameForm::volume(l).scale(&expected).unwrap());
            }

            #[test]
            fn conjugation_is_involutive((_l, f) in layout_and_form()) {
                prop_assert_eq!(f.conjugate().conjugate(), f);
            }

            #[test]
            fn frame_round_trip(
                (a, f) in (1i64..=3, form::<Coordinate>(Layout::new(1, 2).unwrap(), None))
            ) {
                let spec = example1(&[a], TMode::Symbolic).unwrap();
                prop_assert_eq!(f.to_frame(&spec).unwrap().from_frame(&spec).unwrap(), f);
            }
        }
    }

    #[test]
    fn corpus_basis_forms_are_harmonic() {
        let specs = [
            torus(1, 1).unwrap(),
            example1(&[1], TMode::Symbolic).unwrap(),
            example1(&[1], TMode::RationalPi { r: 1, s: 1 }).unwrap(),
            example1(&[2, 3], TMode::Symbolic).unwrap(),
        ];
        for spec in &specs {
            let coh = Cohomology::compute(spec, SweepOptions::default()).unwrap();
            let holds = coh.check_condition().unwrap().holds;
            for h in basis_harmonicity(&coh, DEFAULT_MAX_FORMS_DIM, Execution::Parallel).unwrap() {
                assert!(h.flags.dbar_harmonic(), "{}: {}", spec.name, h.element);
                if holds {
                    assert!(h.flags.d_harmonic(), "{}: {}", spec.name, h.element);
                }
            }
        }
    }
}
