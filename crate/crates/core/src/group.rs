//! Concrete finitely generated groups with exact normal-form arithmetic.
//!
//! A [`Group`] is a direct product of factors, each either `ℤ^d` or the
//! discrete Heisenberg group `H₃(ℤ)` in Mal'cev coordinates `(a, b, c)` with
//! product `(a,b,c)(a',b',c') = (a+a', b+b', c+c'+ab')`. Elements are flat
//! integer tuples; the coordinates of factor `i` occupy a contiguous slice.
//!
//! Generating sets are always symmetric and contain the identity.

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, RwLock};

use crate::ball::Region;
use crate::error::{Error, Result};

/// A group element in canonical normal form.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Element(pub SmallVec<[i64; 4]>);

impl Element {
    pub fn new(coords: &[i64]) -> Self {
        Element(SmallVec::from_slice(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        Element(SmallVec::from_elem(0, dim))
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({self})")
    }
}

impl FromStr for Element {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().trim_start_matches('(').trim_end_matches(')');
        if s.is_empty() {
            return Err(Error::Parse("empty element".into()));
        }
        s.split(',')
            .map(|t| {
                t.trim()
                    .parse::<i64>()
                    .map_err(|_| Error::Parse(format!("bad coordinate {t:?} in element {s:?}")))
            })
            .collect::<Result<SmallVec<_>>>()
            .map(Element)
    }
}

/// Word length `|g|_S`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WordLength(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FactorKind {
    Abelian(usize),
    Heisenberg,
}

impl FactorKind {
    pub fn dim(self) -> usize {
        match self {
            FactorKind::Abelian(d) => d,
            FactorKind::Heisenberg => 3,
        }
    }

    pub fn growth_degree(self) -> u32 {
        match self {
            FactorKind::Abelian(d) => d as u32,
            FactorKind::Heisenberg => 4,
        }
    }
}

/// Named generating sets shipped per factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GenSet {
    /// `±e_i` for `ℤ^d`; `x^{±1}, y^{±1}` for `H₃`.
    Standard,
    /// All of `{-1,0,1}^d` for `ℤ^d`.
    King,
    /// `x^{±1}, y^{±1}, z^{±1}` for `H₃`, with `z` central.
    Xyz,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Factor {
    pub kind: FactorKind,
    pub gens: GenSet,
    offset: usize,
}

impl Factor {
    fn generators(&self) -> Vec<Vec<i64>> {
        let d = self.kind.dim();
        let mut out = vec![vec![0; d]];
        match (self.kind, self.gens) {
            (FactorKind::Abelian(d), GenSet::Standard) => {
                for i in 0..d {
                    for s in [1, -1] {
                        let mut v = vec![0; d];
                        v[i] = s;
                        out.push(v);
                    }
                }
            }
            (FactorKind::Abelian(d), GenSet::King) => {
                let total = 3usize.pow(d as u32);
                for code in 0..total {
                    let mut c = code;
                    let v: Vec<i64> = (0..d)
                        .map(|_| {
                            let digit = (c % 3) as i64 - 1;
                            c /= 3;
                            digit
                        })
                        .collect();
                    out.push(v);
                }
            }
            (FactorKind::Heisenberg, GenSet::Standard) | (FactorKind::Heisenberg, GenSet::Xyz) => {
                out.extend([vec![1, 0, 0], vec![-1, 0, 0], vec![0, 1, 0], vec![0, -1, 0]]);
                if self.gens == GenSet::Xyz {
                    out.extend([vec![0, 0, 1], vec![0, 0, -1]]);
                }
            }
            _ => unreachable!("validated in parse"),
        }
        out
    }

    fn closed_form(&self, coords: &[i64]) -> Option<u64> {
        match (self.kind, self.gens) {
            (FactorKind::Abelian(_), GenSet::Standard) => {
                Some(coords.iter().map(|c| c.unsigned_abs()).sum())
            }
            (FactorKind::Abelian(_), GenSet::King) => {
                Some(coords.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0))
            }
            _ => None,
        }
    }

    /// Length of an explicit word for `coords`; an upper bound on `|g|`.
    fn length_upper_bound(&self, coords: &[i64]) -> u64 {
        if let Some(n) = self.closed_form(coords) {
            return n;
        }
        // x^a y^b = (a, b, ab); the remaining central part is built from
        // commutators [x^m, y^q] = (0, 0, mq).
        let (a, b, c) = (coords[0], coords[1], coords[2]);
        let k = (c - a * b).unsigned_abs();
        let mut cost = a.unsigned_abs() + b.unsigned_abs();
        if k > 0 {
            let m = k.isqrt().max(1);
            let (q, r) = (k / m, k % m);
            cost += 2 * (m + q);
            if r > 0 {
                cost += 2 * (1 + r);
            }
        }
        cost
    }
}

/// A finitely generated group together with a symmetric generating set.
///
/// Holds lazily grown caches of the identity-centred ball and of containment
/// transforms; all cached data is immutable once published.
pub struct Group {
    name: String,
    factors: Vec<Factor>,
    dim: usize,
    generators: Vec<Element>,
    custom_gens: bool,
    pub(crate) ball_cap: u64,
    pub(crate) region: RwLock<Option<Arc<Region>>>,
    pub(crate) containment: Mutex<FxHashMap<u32, Arc<Vec<u32>>>>,
}

impl fmt::Debug for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Group")
            .field("name", &self.name)
            .field("generators", &self.generators)
            .finish()
    }
}

pub const DEFAULT_BALL_CAP: u64 = 200_000_000;

impl Group {
    /// Parses a backend selection string such as `Z^2`, `H3`, `Z^2#king`
    /// or `H3*Z^1`.
    pub fn parse(spec: &str) -> Result<Arc<Group>> {
        let spec = spec.trim();
        if spec.is_empty() {
            return Err(Error::Parse("empty backend string".into()));
        }
        let mut factors = Vec::new();
        let mut offset = 0;
        for part in spec.split('*') {
            let part = part.trim();
            let (base, gens) = match part.split_once('#') {
                Some((b, g)) => (b.trim(), Some(g.trim())),
                None => (part, None),
            };
            let kind = match base {
                "H3" | "H" | "Heis" => FactorKind::Heisenberg,
                "Z" => FactorKind::Abelian(1),
                _ => {
                    let d = base
                        .strip_prefix("Z^")
                        .and_then(|d| d.parse::<usize>().ok())
                        .filter(|&d| (1..=8).contains(&d))
                        .ok_or_else(|| Error::Parse(format!("unknown backend factor {base:?}")))?;
                    FactorKind::Abelian(d)
                }
            };
            let gens = match (kind, gens) {
                (_, None) | (_, Some("std")) => GenSet::Standard,
                (FactorKind::Abelian(_), Some("king")) => GenSet::King,
                (FactorKind::Heisenberg, Some("xyz")) => GenSet::Xyz,
                (_, Some(g)) => {
                    return Err(Error::Parse(format!("generating set {g:?} not available for {base}")))
                }
            };
            factors.push(Factor { kind, gens, offset });
            offset += kind.dim();
        }
        let name = factors
            .iter()
            .map(|f| {
                let base = match f.kind {
                    FactorKind::Abelian(d) => format!("Z^{d}"),
                    FactorKind::Heisenberg => "H3".to_string(),
                };
                match f.gens {
                    GenSet::Standard => base,
                    GenSet::King => format!("{base}#king"),
                    GenSet::Xyz => format!("{base}#xyz"),
                }
            })
            .collect::<Vec<_>>()
            .join("*");
        let generators = product_generators(&factors, offset);
        Ok(Arc::new(Group::assemble(name, factors, offset, generators, false)))
    }

    /// Same group structure as `spec` but with a user-supplied generating
    /// set; the set is closed under inverses and the identity is added.
    pub fn with_generators(spec: &str, gens: &[Element]) -> Result<Arc<Group>> {
        let base = Group::parse(spec)?;
        let mut set: Vec<Element> = Vec::with_capacity(2 * gens.len() + 1);
        for g in gens {
            base.check(g)?;
            set.push(g.clone());
        }
        let supplied = {
            let mut s = set.clone();
            s.sort();
            s.dedup();
            s
        };
        let e = base.identity();
        let inverses: Vec<Element> = set.iter().map(|g| base.inverse(g)).collect();
        set.extend(inverses);
        set.push(e);
        set.sort();
        set.dedup();
        if set != supplied {
            log::warn!(
                "generating set for {} closed under inverses/identity: {} -> {} elements",
                base.name,
                supplied.len(),
                set.len()
            );
        }
        if set.len() < 2 {
            return Err(Error::usage("generating set must contain a non-identity element"));
        }
        let name = format!("{}[custom]", base.name);
        let factors = base.factors.clone();
        Ok(Arc::new(Group::assemble(name, factors, base.dim, set, true)))
    }

    fn assemble(
        name: String,
        factors: Vec<Factor>,
        dim: usize,
        mut generators: Vec<Element>,
        custom_gens: bool,
    ) -> Group {
        generators.sort();
        generators.dedup();
        Group {
            name,
            factors,
            dim,
            generators,
            custom_gens,
            ball_cap: DEFAULT_BALL_CAP,
            region: RwLock::new(None),
            containment: Mutex::new(FxHashMap::default()),
        }
    }

    /// Copy of this group with a different hard cap on enumerated ball size.
    pub fn with_ball_cap(&self, cap: u64) -> Arc<Group> {
        let mut g = Group::assemble(
            self.name.clone(),
            self.factors.clone(),
            self.dim,
            self.generators.clone(),
            self.custom_gens,
        );
        g.ball_cap = cap;
        Arc::new(g)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    /// Symmetric generating set including the identity, sorted.
    pub fn generators(&self) -> &[Element] {
        &self.generators
    }

    /// Generators other than the identity.
    pub fn moves(&self) -> impl Iterator<Item = &Element> {
        let e = self.identity();
        self.generators.iter().filter(move |g| **g != e)
    }

    /// Declared degree of polynomial growth (Bass–Guivarc'h degree).
    pub fn growth_degree(&self) -> u32 {
        self.factors.iter().map(|f| f.kind.growth_degree()).sum()
    }

    pub fn is_abelian(&self) -> bool {
        self.factors.iter().all(|f| matches!(f.kind, FactorKind::Abelian(_)))
    }

    pub fn identity(&self) -> Element {
        Element::zeros(self.dim)
    }

    pub fn check(&self, g: &Element) -> Result<()> {
        if g.dim() != self.dim {
            return Err(Error::usage(format!(
                "element {g} has {} coordinates but {} expects {}",
                g.dim(),
                self.name,
                self.dim
            )));
        }
        Ok(())
    }

    /// Group product in normal form. Panics on a dimension mismatch; use
    /// [`Group::try_multiply`] for unchecked input.
    pub fn multiply(&self, a: &Element, b: &Element) -> Element {
        debug_assert_eq!(a.dim(), self.dim);
        debug_assert_eq!(b.dim(), self.dim);
        let mut out = a.0.clone();
        for f in &self.factors {
            let o = f.offset;
            match f.kind {
                FactorKind::Abelian(d) => {
                    for i in o..o + d {
                        out[i] += b.0[i];
                    }
                }
                FactorKind::Heisenberg => {
                    out[o + 2] += b.0[o + 2] + a.0[o] * b.0[o + 1];
                    out[o] += b.0[o];
                    out[o + 1] += b.0[o + 1];
                }
            }
        }
        Element(out)
    }

    pub fn try_multiply(&self, a: &Element, b: &Element) -> Result<Element> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.multiply(a, b))
    }

    pub fn inverse(&self, a: &Element) -> Element {
        let mut out = a.0.clone();
        for f in &self.factors {
            let o = f.offset;
            match f.kind {
                FactorKind::Abelian(d) => {
                    for v in &mut out[o..o + d] {
                        *v = -*v;
                    }
                }
                FactorKind::Heisenberg => {
                    let (x, y, z) = (a.0[o], a.0[o + 1], a.0[o + 2]);
                    out[o] = -x;
                    out[o + 1] = -y;
                    out[o + 2] = x * y - z;
                }
            }
        }
        Element(out)
    }

    /// `g^k` for `k ≥ 0`.
    pub fn pow(&self, g: &Element, k: u64) -> Element {
        let mut acc = self.identity();
        let mut base = g.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                acc = self.multiply(&acc, &base);
            }
            base = self.multiply(&base, &base);
            k >>= 1;
        }
        acc
    }

    /// Whether `g` lies in the centre `Z(G)`.
    pub fn is_central(&self, g: &Element) -> bool {
        self.factors.iter().all(|f| match f.kind {
            FactorKind::Abelian(_) => true,
            FactorKind::Heisenberg => g.0[f.offset] == 0 && g.0[f.offset + 1] == 0,
        })
    }

    /// Exact word length from a closed form, when the generating set has one
    /// (`ℓ¹` for standard `ℤ^d` generators, `ℓ^∞` for king moves).
    pub fn closed_form_length(&self, g: &Element) -> Option<WordLength> {
        if self.custom_gens {
            return None;
        }
        let mut total = 0u64;
        for f in &self.factors {
            total += f.closed_form(&g.0[f.offset..f.offset + f.kind.dim()])?;
        }
        Some(WordLength(total as u32))
    }

    /// Length of an explicit word spelling `g` in the shipped generators.
    pub fn length_upper_bound(&self, g: &Element) -> Option<u64> {
        if self.custom_gens {
            return None;
        }
        Some(
            self.factors
                .iter()
                .map(|f| f.length_upper_bound(&g.0[f.offset..f.offset + f.kind.dim()]))
                .sum(),
        )
    }

    /// Lower bound through the abelianisation: each generator moves the
    /// non-central coordinates by at most its own `ℓ¹` norm.
    pub fn length_lower_bound(&self, g: &Element) -> u64 {
        let proj = |x: &Element| -> u64 {
            self.factors
                .iter()
                .map(|f| {
                    let s = &x.0[f.offset..f.offset + f.kind.dim()];
                    match f.kind {
                        FactorKind::Abelian(_) => s.iter().map(|v| v.unsigned_abs()).sum::<u64>(),
                        FactorKind::Heisenberg => s[0].unsigned_abs() + s[1].unsigned_abs(),
                    }
                })
                .sum()
        };
        let step = self.generators.iter().map(proj).max().unwrap_or(1).max(1);
        proj(g).div_ceil(step)
    }

    /// Exact word length. Backends without a closed form read it from the
    /// cached BFS table built by [`Group::ensure_table`].
    pub fn word_length(&self, g: &Element) -> Result<WordLength> {
        self.check(g)?;
        if let Some(n) = self.closed_form_length(g) {
            return Ok(n);
        }
        let region = self.region.read().expect("region lock").clone();
        let available = region.as_ref().map(|r| r.radius());
        if let Some(r) = &region {
            if let Some(i) = r.index_of(g) {
                return Ok(WordLength(r.layer_of(i)));
            }
        }
        let available = available.unwrap_or(0);
        let required = self
            .length_upper_bound(g)
            .map(|b| b as u32)
            .unwrap_or(available + 1)
            .max(available + 1);
        Err(Error::OutOfRange {
            element: g.to_string(),
            available,
            required,
        })
    }

    /// `d_S(x, y) = |x⁻¹ y|`.
    pub fn distance(&self, x: &Element, y: &Element) -> Result<u32> {
        let d = self.multiply(&self.inverse(x), y);
        self.word_length(&d).map(|w| w.0)
    }

    /// Makes sure the BFS distance table covers radius `radius`.
    pub fn ensure_table(&self, radius: u32) -> Result<Arc<Region>> {
        self.region_for(radius)
    }
}

fn product_generators(factors: &[Factor], dim: usize) -> Vec<Element> {
    let mut out = Vec::new();
    for f in factors {
        for g in f.generators() {
            let mut v = Element::zeros(dim);
            v.0[f.offset..f.offset + g.len()].copy_from_slice(&g);
            out.push(v);
        }
    }
    out.sort();
    out.dedup();
    out
}
