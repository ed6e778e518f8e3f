//! Reproducible set families materialised on a window.
//!
//! A [`GeneratorSpec`] plus a window determines the member set bit for bit.
//! Every family re-checks its defining property after construction and
//! returns the evidence as a [`Certificate`].

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ball::{containment_transform, enumerate_ball, window_transform, MetricBall, NONE};
use crate::density::{subball_best_empty, subball_indices, BallRef, Provenance, SubsetWindow};
use crate::error::{Error, Result};
use crate::frac::{to_f64, Q};
use crate::group::{Element, Group};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GeneratorSpec {
    Full,
    Empty,
    Explicit {
        elements: Vec<Element>,
    },
    /// Meets every ball of radius `bound`.
    Syndetic {
        bound: u32,
        pattern: Pattern,
        /// Extra independent inclusion probability on top of the pattern.
        #[serde(default)]
        noise: Option<Q>,
        #[serde(default)]
        seed: u64,
    },
    /// The pattern inside each block, nothing elsewhere.
    PiecewiseSyndetic {
        bound: u32,
        pattern: Pattern,
        blocks: BlockSchedule,
        #[serde(default)]
        seed: u64,
    },
    /// `a_1 = a_2 = s`, `a_{j+1} = s^{j·L_j}` along a generator `s`.
    Lacunary {
        length: u32,
        #[serde(default)]
        direction: Option<Element>,
        #[serde(default)]
        seed: u64,
    },
    /// `base ∪ ⋃_n ⋃_{k ≤ n} S(x_n, k n)` for scheduled `n ≤ horizon`.
    SphereSpoiler {
        base: Box<GeneratorSpec>,
        centers: SpoilerSchedule,
        horizon: u32,
    },
    /// `⋃_{n ≤ horizon} base ∩ I_n` with far, small-gap balls `I_n`.
    SparseBallUnion {
        base: Box<GeneratorSpec>,
        horizon: u32,
    },
    Random {
        density: Q,
        #[serde(default)]
        seed: u64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Pattern {
    /// Every coordinate divisible by `modulus`.
    Lattice { modulus: i64 },
    /// Coordinate sum divisible by `modulus`.
    Diagonal { modulus: i64 },
    /// Greedy `bound`-net in seeded random order.
    Net,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BlockSchedule {
    Explicit {
        blocks: Vec<BallRef>,
    },
    /// Block `n` is `B(s^{base^n}, n)` for `n` in `first..first+count`.
    Geometric {
        base: u64,
        first: u32,
        count: u32,
        #[serde(default)]
        direction: Option<Element>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpoilerCenter {
    pub n: u32,
    pub center: Element,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpoilerSchedule {
    Explicit {
        centers: Vec<SpoilerCenter>,
    },
    /// For each `n`, the first `s^p` (`p = 0, 1, …`) in the window whose
    /// `n²`-ball misses the base set and the earlier spoiler balls.
    AlongDirection {
        ns: Vec<u32>,
        #[serde(default)]
        direction: Option<Element>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpoilerStructure {
    pub n: u32,
    pub center: Element,
    pub sphere_radii: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlacementStep {
    pub n: u32,
    pub r_n: u32,
    /// `I_n`, which is also the quality subball `J`.
    pub ball: BallRef,
    pub gap: Q,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Certificate {
    None,
    Syndetic {
        bound: u32,
        max_distance: u32,
    },
    PiecewiseSyndetic {
        bound: u32,
        blocks: Vec<BallRef>,
        max_distance_in_blocks: u32,
    },
    Lacunary {
        elements: Vec<Element>,
        /// Certified `(lower, upper)` word-length bounds per element.
        lengths: Vec<(u64, u64)>,
    },
    SphereSpoiler {
        base: Box<Certificate>,
        structure: Vec<SpoilerStructure>,
    },
    SparseBallUnion {
        base: Box<Certificate>,
        steps: Vec<PlacementStep>,
        unverified: String,
    },
    Random {
        membership_hash: String,
    },
}

#[derive(Clone, Debug)]
pub struct Generated {
    pub set: SubsetWindow,
    pub certificate: Certificate,
}

impl GeneratorSpec {
    pub fn family(&self) -> &'static str {
        match self {
            GeneratorSpec::Full => "full",
            GeneratorSpec::Empty => "empty",
            GeneratorSpec::Explicit { .. } => "explicit",
            GeneratorSpec::Syndetic { .. } => "syndetic",
            GeneratorSpec::PiecewiseSyndetic { .. } => "piecewise_syndetic",
            GeneratorSpec::Lacunary { .. } => "lacunary",
            GeneratorSpec::SphereSpoiler { .. } => "sphere_spoiler",
            GeneratorSpec::SparseBallUnion { .. } => "sparse_ball_union",
            GeneratorSpec::Random { .. } => "random",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            GeneratorSpec::Syndetic { seed, .. }
            | GeneratorSpec::PiecewiseSyndetic { seed, .. }
            | GeneratorSpec::Lacunary { seed, .. }
            | GeneratorSpec::Random { seed, .. } => *seed,
            GeneratorSpec::SphereSpoiler { base, .. } | GeneratorSpec::SparseBallUnion { base, .. } => base.seed(),
            _ => 0,
        }
    }

    /// The same spec with every seed shifted by `offset`.
    pub fn reseeded(&self, offset: u64) -> GeneratorSpec {
        let mut spec = self.clone();
        match &mut spec {
            GeneratorSpec::Syndetic { seed, .. }
            | GeneratorSpec::PiecewiseSyndetic { seed, .. }
            | GeneratorSpec::Lacunary { seed, .. }
            | GeneratorSpec::Random { seed, .. } => *seed = seed.wrapping_add(offset),
            GeneratorSpec::SphereSpoiler { base, .. } | GeneratorSpec::SparseBallUnion { base, .. } => {
                **base = base.reseeded(offset)
            }
            _ => {}
        }
        spec
    }
}

/// SHA-256 of the newline-delimited member tuples, hex encoded.
pub fn membership_hash(a: &SubsetWindow) -> String {
    let digest = Sha256::digest(a.to_ndjson_tuples().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// The default direction: the largest non-identity generator.
fn default_direction(group: &Group) -> Element {
    group.moves().max().expect("nontrivial generating set").clone()
}

fn check_direction(group: &Group, d: &Option<Element>) -> Result<Element> {
    match d {
        Some(s) => {
            group.check(s)?;
            if *s == group.identity() {
                return Err(Error::usage("direction must not be the identity"));
            }
            Ok(s.clone())
        }
        None => Ok(default_direction(group)),
    }
}

pub fn generate(spec: &GeneratorSpec, window: &MetricBall) -> Result<Generated> {
    let (mask, certificate) = build(spec, window)?;
    let provenance = Provenance::new(spec.family(), serde_json::to_value(spec)?, spec.seed());
    let set = SubsetWindow::from_mask(window.clone(), mask, provenance)?;
    let certificate = match certificate {
        Certificate::None if matches!(spec, GeneratorSpec::Random { .. }) => Certificate::Random {
            membership_hash: membership_hash(&set),
        },
        c => c,
    };
    Ok(Generated { set, certificate })
}

fn build(spec: &GeneratorSpec, window: &MetricBall) -> Result<(Vec<bool>, Certificate)> {
    let n = window.len();
    match spec {
        GeneratorSpec::Full => Ok((vec![true; n], Certificate::None)),
        GeneratorSpec::Empty => Ok((vec![false; n], Certificate::None)),
        GeneratorSpec::Explicit { elements } => {
            let mut mask = vec![false; n];
            for g in elements {
                window.group().check(g)?;
                if let Some(i) = window.index_of(g) {
                    mask[i] = true;
                }
            }
            Ok((mask, Certificate::None))
        }
        GeneratorSpec::Syndetic {
            bound,
            pattern,
            noise,
            seed,
        } => syndetic(window, *bound, pattern, noise.as_ref(), *seed),
        GeneratorSpec::PiecewiseSyndetic {
            bound,
            pattern,
            blocks,
            seed,
        } => piecewise(window, *bound, pattern, blocks, *seed),
        GeneratorSpec::Lacunary {
            length,
            direction,
            seed,
        } => lacunary(window, *length, direction, *seed),
        GeneratorSpec::SphereSpoiler { base, centers, horizon } => {
            let (mask, cert) = build(base, window)?;
            spoiler(window, mask, cert, centers, *horizon)
        }
        GeneratorSpec::SparseBallUnion { base, horizon } => {
            let (mask, cert) = build(base, window)?;
            sparse_union(window, mask, cert, *horizon)
        }
        GeneratorSpec::Random { density, seed } => {
            if density.0 > crate::frac::frac(1, 1) {
                return Err(Error::usage(format!("density {density} exceeds 1")));
            }
            let p = to_f64(&density.0);
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            Ok(((0..n).map(|_| rng.gen::<f64>() < p).collect(), Certificate::None))
        }
    }
}

/// Pattern members among `points` (window indices).
fn pattern_mask(window: &MetricBall, bound: u32, pattern: &Pattern, points: &[usize], seed: u64) -> Result<Vec<bool>> {
    let mut mask = vec![false; window.len()];
    match pattern {
        Pattern::Lattice { modulus } | Pattern::Diagonal { modulus } if *modulus < 1 => {
            return Err(Error::usage(format!("modulus must be positive, got {modulus}")));
        }
        Pattern::Lattice { modulus } => {
            for &i in points {
                mask[i] = window.element(i).0.iter().all(|c| c.rem_euclid(*modulus) == 0);
            }
        }
        Pattern::Diagonal { modulus } => {
            for &i in points {
                mask[i] = window.element(i).0.iter().sum::<i64>().rem_euclid(*modulus) == 0;
            }
        }
        Pattern::Net => {
            let mut order = points.to_vec();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let inside: FxHashSet<usize> = points.iter().copied().collect();
            let mut covered = vec![false; window.len()];
            let region = window.region_at_least(window.radius() + bound)?;
            let near = region.ball_size(bound);
            for i in order {
                if covered[i] {
                    continue;
                }
                mask[i] = true;
                let offset = window.offset(i);
                for z in 0..near {
                    let y = window.group().multiply(offset, region.element(z));
                    if let Some(j) = region.index_of(&y).filter(|&j| j < window.len() && inside.contains(&j)) {
                        covered[j] = true;
                    }
                }
            }
        }
    }
    Ok(mask)
}

fn syndetic(
    window: &MetricBall,
    bound: u32,
    pattern: &Pattern,
    noise: Option<&Q>,
    seed: u64,
) -> Result<(Vec<bool>, Certificate)> {
    if bound == 0 {
        return Err(Error::usage("syndetic bound must be at least 1"));
    }
    let all: Vec<usize> = (0..window.len()).collect();
    let mut mask = pattern_mask(window, bound, pattern, &all, seed)?;
    if let Some(p) = noise {
        let p = to_f64(&p.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6e6f_6973_65);
        for m in mask.iter_mut() {
            let extra = rng.gen::<f64>() < p;
            *m |= extra;
        }
    }
    let sources: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
    let max_distance = if sources.is_empty() {
        NONE
    } else {
        window_transform(window, sources)?.into_iter().max().unwrap_or(0)
    };
    if max_distance > bound {
        return Err(Error::Construction {
            n: bound,
            reason: format!("pattern leaves a point at distance {max_distance} from the set"),
        });
    }
    Ok((mask, Certificate::Syndetic { bound, max_distance }))
}

fn schedule_blocks(group: &Group, blocks: &BlockSchedule) -> Result<Vec<BallRef>> {
    match blocks {
        BlockSchedule::Explicit { blocks } => {
            for b in blocks {
                group.check(&b.center)?;
            }
            Ok(blocks.clone())
        }
        BlockSchedule::Geometric {
            base,
            first,
            count,
            direction,
        } => {
            let s = check_direction(group, direction)?;
            (*first..first + count)
                .map(|n| {
                    let p = base
                        .checked_pow(n)
                        .ok_or_else(|| Error::usage(format!("block {n}: {base}^{n} overflows")))?;
                    Ok(BallRef {
                        center: group.pow(&s, p),
                        radius: n,
                    })
                })
                .collect()
        }
    }
}

fn piecewise(
    window: &MetricBall,
    bound: u32,
    pattern: &Pattern,
    blocks: &BlockSchedule,
    seed: u64,
) -> Result<(Vec<bool>, Certificate)> {
    if bound == 0 {
        return Err(Error::usage("gap bound must be at least 1"));
    }
    let group = window.group();
    let blocks = schedule_blocks(group, blocks)?;
    let mut seen: FxHashSet<Element> = FxHashSet::default();
    let mut mask = vec![false; window.len()];
    let mut max_distance = 0;
    for (k, b) in blocks.iter().enumerate() {
        let ball = enumerate_ball(group, &b.center, b.radius)?;
        for g in ball.elements() {
            if !seen.insert(g.clone()) {
                return Err(Error::usage(format!("block {k} B({}, {}) overlaps an earlier block at {g}", b.center, b.radius)));
            }
        }
        let points: Vec<usize> = ball.elements().filter_map(|g| window.index_of(&g)).collect();
        if points.is_empty() {
            continue;
        }
        let part = pattern_mask(window, bound, pattern, &points, seed.wrapping_add(k as u64))?;
        for &i in &points {
            mask[i] = part[i];
        }
        let inside = SubsetWindow::from_mask(window.clone(), part, Provenance::adhoc())?.restrict(&ball);
        let dist = inside.distance_transform()?;
        for (j, g) in ball.elements().enumerate() {
            if window.contains(&g) {
                max_distance = max_distance.max(dist[j]);
            }
        }
    }
    if max_distance > bound {
        return Err(Error::Construction {
            n: bound,
            reason: format!("a block point lies at distance {max_distance} from the block's members"),
        });
    }
    Ok((
        mask,
        Certificate::PiecewiseSyndetic {
            bound,
            blocks,
            max_distance_in_blocks: max_distance,
        },
    ))
}

/// Certified `(lower, upper)` bounds on `|g|`.
fn length_bounds(group: &Group, g: &Element) -> (u64, u64) {
    if let Ok(w) = group.word_length(g) {
        return (w.0 as u64, w.0 as u64);
    }
    let lo = group.length_lower_bound(g);
    (lo, group.length_upper_bound(g).unwrap_or(u64::MAX))
}

fn lacunary(window: &MetricBall, length: u32, direction: &Option<Element>, seed: u64) -> Result<(Vec<bool>, Certificate)> {
    let group = window.group();
    let s = match direction {
        Some(_) => check_direction(group, direction)?,
        None => {
            let moves: Vec<&Element> = group.moves().collect();
            moves[(seed % moves.len() as u64) as usize].clone()
        }
    };
    let mut exps: Vec<u64> = Vec::new();
    for j in 0..length as u64 {
        let next = match j {
            0 => 1,
            _ => exps[j as usize - 1]
                .checked_mul(j)
                .ok_or_else(|| Error::capability(format!("exponent overflows at term {}", j + 1)))?,
        };
        exps.push(next);
    }
    let elements: Vec<Element> = exps.iter().map(|&p| group.pow(&s, p)).collect();
    let mut mask = vec![false; window.len()];
    for (j, a) in elements.iter().enumerate() {
        match window.index_of(a) {
            Some(i) => mask[i] = true,
            None => {
                return Err(Error::capability(format!(
                    "term {} = {a} lies outside {window:?}; a larger window is required",
                    j + 1
                )))
            }
        }
    }
    let lengths: Vec<(u64, u64)> = elements.iter().map(|a| length_bounds(group, a)).collect();
    if lengths[0].0 == 0 && lengths[0].1 == 0 {
        return Err(Error::usage("the first term must not be the identity"));
    }
    for n in 1..lengths.len() {
        // |a_{n+1}| ≥ n |a_n|, with a_n the n-th term (1-based).
        if lengths[n].0 < n as u64 * lengths[n - 1].1 {
            return Err(Error::Construction {
                n: n as u32 + 1,
                reason: format!(
                    "cannot certify |a_{}| >= {}·|a_{}| from bounds {:?} and {:?}",
                    n + 1,
                    n,
                    n,
                    lengths[n],
                    lengths[n - 1]
                ),
            });
        }
    }
    Ok((mask, Certificate::Lacunary { elements, lengths }))
}

fn spoiler(
    window: &MetricBall,
    mut mask: Vec<bool>,
    base: Certificate,
    schedule: &SpoilerSchedule,
    horizon: u32,
) -> Result<(Vec<bool>, Certificate)> {
    let group = window.group();
    let sources: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
    let to_base = if sources.is_empty() {
        vec![NONE; window.len()]
    } else {
        window_transform(window, sources)?
    };
    let mut placed: Vec<(u32, Vec<u32>)> = Vec::new();
    let mut structure = Vec::new();
    let fits = |x: usize, n: u32, placed: &[(u32, Vec<u32>)]| {
        to_base[x] > n * n && placed.iter().all(|(m, d)| d[x] > n * n + m * m)
    };
    let mut centers: Vec<(u32, usize)> = Vec::new();
    match schedule {
        SpoilerSchedule::Explicit { centers: list } => {
            for c in list.iter().filter(|c| c.n <= horizon) {
                let x = window
                    .index_of(&c.center)
                    .ok_or_else(|| Error::usage(format!("spoiler centre for n = {} lies outside {window:?}", c.n)))?;
                if to_base[x] <= c.n * c.n {
                    return Err(Error::usage(format!(
                        "spoiler centre for n = {}: B({}, {}) meets the base set",
                        c.n,
                        c.center,
                        c.n * c.n
                    )));
                }
                centers.push((c.n, x));
            }
        }
        SpoilerSchedule::AlongDirection { ns, direction } => {
            let s = check_direction(group, direction)?;
            for &n in ns.iter().filter(|&&n| n <= horizon) {
                let mut p = group.identity();
                let found = loop {
                    let Some(x) = window.index_of(&p) else {
                        break None;
                    };
                    if fits(x, n, &placed) {
                        break Some(x);
                    }
                    p = group.multiply(&p, &s);
                };
                let x = found.ok_or_else(|| Error::Construction {
                    n,
                    reason: format!("no power of {s} in the window has an empty {}-ball", n * n),
                })?;
                centers.push((n, x));
                placed.push((n, window_transform(window, vec![x])?));
            }
        }
    }
    for (n, x) in centers {
        if n == 0 {
            return Err(Error::usage("spoiler index n must be at least 1"));
        }
        let d = window_transform(window, vec![x])?;
        for (i, &v) in d.iter().enumerate() {
            if v <= n * n && v % n == 0 {
                mask[i] = true;
            }
        }
        structure.push(SpoilerStructure {
            n,
            center: window.element(x),
            sphere_radii: (0..=n).map(|k| k * n).collect(),
        });
    }
    Ok((
        mask,
        Certificate::SphereSpoiler {
            base: Box::new(base),
            structure,
        },
    ))
}

fn sparse_union(window: &MetricBall, base: Vec<bool>, cert: Certificate, horizon: u32) -> Result<(Vec<bool>, Certificate)> {
    let group = window.group();
    if *window.center() != group.identity() {
        return Err(Error::usage("sparse_ball_union needs a window centred at the identity"));
    }
    let a = SubsetWindow::from_mask(window.clone(), base.clone(), Provenance::adhoc())?;
    let dist = a.distance_transform()?;
    let contain = containment_transform(window)?;
    let region = window.region_at_least(window.radius())?;
    let mut mask = vec![false; window.len()];
    let mut steps = Vec::new();
    let mut r_n = 0u32;
    for n in 1..=horizon {
        let far = n as u64 * r_n as u64;
        let mut found = None;
        'search: for radius in n..=window.radius() {
            for y in 0..window.len() {
                // The nearest point of B(y, R) to e has length |y| - R.
                if contain[y] < radius || (window.dist(y) as u64) <= far + radius as u64 {
                    continue;
                }
                let idx = subball_indices(window, y, radius)?.expect("containment keeps the ball inside");
                let empty = subball_best_empty(group, &dist, &idx, radius)?.map_or(0, |(_, m)| region.ball_size(m) as u64);
                if empty * (n as u64) < idx.len() as u64 {
                    found = Some((y, radius, idx, empty));
                    break 'search;
                }
            }
        }
        let (y, radius, idx, empty) = found.ok_or_else(|| Error::Construction {
            n,
            reason: format!("no ball of radius >= {n} outside B(e, {far}) has gap below 1/{n} in {window:?}"),
        })?;
        for &j in &idx {
            mask[j] = base[j];
        }
        steps.push(PlacementStep {
            n,
            r_n,
            ball: BallRef {
                center: window.element(y),
                radius,
            },
            gap: Q(crate::frac::frac(empty as u128, idx.len() as u128)),
        });
        r_n = r_n.max(idx.iter().map(|&j| window.dist(j)).max().unwrap_or(0));
    }
    Ok((
        mask,
        Certificate::SparseBallUnion {
            base: Box::new(cert),
            steps,
            unverified: "the underflow constants M_{n,k} are not certified".into(),
        },
    ))
}
