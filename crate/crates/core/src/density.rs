//! Gap function, neighbourhood density and group-level ratio statistics.
//!
//! For a window `I = B(c, N)` and a set `A`, the gap `g_A(I)` is the largest
//! normalised size `|B(x, M)| / |I|` of a ball with `M ≥ 1` that sits inside
//! `I` and misses `A`. The density `λ̂(A; ρ)` is the fraction of `I` within
//! distance `⌈ρN⌉` of `A ∩ I`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::{Arc, OnceLock};

use crate::ball::{containment_transform, enumerate_ball, layered_bfs, window_transform, GrowthTable, MetricBall, NONE};
use crate::error::{Error, Result};
use crate::frac::{ceil_mul, frac, Frac, Q};
use crate::group::{Element, Group};

/// Where a set came from: generator family, parameters and seed.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub family: String,
    #[serde(default)]
    pub params: serde_json::Value,
    #[serde(default)]
    pub seed: u64,
}

impl Provenance {
    pub fn new(family: impl Into<String>, params: serde_json::Value, seed: u64) -> Self {
        Provenance {
            family: family.into(),
            params,
            seed,
        }
    }

    pub fn adhoc() -> Self {
        Provenance::new("adhoc", serde_json::Value::Null, 0)
    }
}

/// A set `A` materialised inside a window as `A ∩ window`.
#[derive(Clone)]
pub struct SubsetWindow {
    window: MetricBall,
    members: Vec<bool>,
    count: usize,
    provenance: Provenance,
    dist: OnceLock<Arc<Vec<u32>>>,
}

impl std::fmt::Debug for SubsetWindow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SubsetWindow")
            .field("window", &self.window)
            .field("members", &self.count)
            .field("family", &self.provenance.family)
            .finish()
    }
}

impl SubsetWindow {
    pub fn from_mask(window: MetricBall, members: Vec<bool>, provenance: Provenance) -> Result<Self> {
        if members.len() != window.len() {
            return Err(Error::usage(format!(
                "membership mask has {} entries, window has {}",
                members.len(),
                window.len()
            )));
        }
        let count = members.iter().filter(|&&m| m).count();
        Ok(SubsetWindow {
            window,
            members,
            count,
            provenance,
            dist: OnceLock::new(),
        })
    }

    pub fn from_predicate(
        window: MetricBall,
        provenance: Provenance,
        pred: impl Fn(&Element) -> bool + Sync,
    ) -> Self {
        let members: Vec<bool> = (0..window.len())
            .into_par_iter()
            .map(|i| pred(&window.element(i)))
            .collect();
        Self::from_mask(window, members, provenance).expect("mask sized from window")
    }

    /// Elements outside the window are dropped.
    pub fn from_elements<'a>(
        window: MetricBall,
        provenance: Provenance,
        elements: impl IntoIterator<Item = &'a Element>,
    ) -> Self {
        let mut members = vec![false; window.len()];
        for g in elements {
            if let Some(i) = window.index_of(g) {
                members[i] = true;
            }
        }
        Self::from_mask(window, members, provenance).expect("mask sized from window")
    }

    pub fn empty(window: MetricBall) -> Self {
        let n = window.len();
        Self::from_mask(window, vec![false; n], Provenance::new("empty", serde_json::Value::Null, 0))
            .expect("sized")
    }

    pub fn full(window: MetricBall) -> Self {
        let n = window.len();
        Self::from_mask(window, vec![true; n], Provenance::new("full", serde_json::Value::Null, 0))
            .expect("sized")
    }

    pub fn window(&self) -> &MetricBall {
        &self.window
    }

    pub fn group(&self) -> &Arc<Group> {
        self.window.group()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn mask(&self) -> &[bool] {
        &self.members
    }

    pub fn is_member(&self, i: usize) -> bool {
        self.members[i]
    }

    pub fn contains(&self, g: &Element) -> bool {
        self.window.index_of(g).is_some_and(|i| self.members[i])
    }

    /// `|A ∩ window|`.
    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn member_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i)
    }

    /// Members in canonical window order.
    pub fn members(&self) -> Vec<Element> {
        self.member_indices().map(|i| self.window.element(i)).collect()
    }

    /// `d(x, A ∩ window)` for each window element; `u32::MAX` everywhere when
    /// the set is empty. Zero exactly on members.
    pub fn distance_transform(&self) -> Result<Arc<Vec<u32>>> {
        if let Some(d) = self.dist.get() {
            return Ok(d.clone());
        }
        let d = if self.is_empty() {
            vec![NONE; self.window.len()]
        } else {
            window_transform(&self.window, self.member_indices().collect())?
        };
        Ok(self.dist.get_or_init(|| Arc::new(d)).clone())
    }

    /// `A ∩ sub` as a set on the window `sub`. Points of `sub` outside this
    /// window count as non-members.
    pub fn restrict(&self, sub: &MetricBall) -> SubsetWindow {
        let members: Vec<bool> = (0..sub.len())
            .into_par_iter()
            .map(|i| self.contains(&sub.element(i)))
            .collect();
        SubsetWindow::from_mask(sub.clone(), members, self.provenance.clone()).expect("sized")
    }

    /// Left translate `g·A` on the window `g·I`.
    pub fn translate(&self, g: &Element) -> SubsetWindow {
        let window = self.window.translate(g);
        let moved: Vec<Element> = self
            .members()
            .iter()
            .map(|a| self.group().multiply(g, a))
            .collect();
        SubsetWindow::from_elements(window, self.provenance.clone(), &moved)
    }

    /// Serialises members as newline-delimited comma-separated tuples.
    pub fn to_ndjson_tuples(&self) -> String {
        let mut out = String::new();
        for g in self.members() {
            out.push_str(&g.to_string());
            out.push('\n');
        }
        out
    }
}

/// A ball `B(center, radius)` recorded in reports.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BallRef {
    pub center: Element,
    pub radius: u32,
}

impl BallRef {
    pub fn of(ball: &MetricBall) -> Self {
        BallRef {
            center: ball.center().clone(),
            radius: ball.radius(),
        }
    }
}

/// `g_A(I)` with its witnessing empty ball.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub gap: Q,
    pub witness: Option<BallRef>,
}

/// Largest `M*(x) = min(d(x, A) - 1, contain(x))` with `M* ≥ 1`, first
/// index on ties.
pub(crate) fn best_empty_ball(dist: &[u32], contain: &[u32]) -> Option<(usize, u32)> {
    let mut best: Option<(usize, u32)> = None;
    for (i, (&d, &c)) in dist.iter().zip(contain).enumerate() {
        let m = d.saturating_sub(1).min(c);
        if m >= 1 && best.map_or(true, |(_, b)| m > b) {
            best = Some((i, m));
        }
    }
    best
}

pub fn gap_fraction(a: &SubsetWindow) -> Result<GapReport> {
    let w = a.window();
    let size = w.len() as u128;
    if a.is_empty() {
        return Ok(GapReport {
            gap: Q(frac(1, 1)),
            witness: Some(BallRef::of(w)),
        });
    }
    let dist = a.distance_transform()?;
    let contain = containment_transform(w)?;
    Ok(match best_empty_ball(&dist, &contain) {
        Some((i, m)) => GapReport {
            gap: Q(frac(w.shrink(m).len() as u128, size)),
            witness: Some(BallRef {
                center: w.element(i),
                radius: m,
            }),
        },
        None => GapReport {
            gap: Q::zero(),
            witness: None,
        },
    })
}

/// Window indices of `B(x, r)` where `x` is the window's `xi`-th element,
/// in canonical ball order. `None` if the ball leaves the window.
pub(crate) fn subball_indices(window: &MetricBall, xi: usize, r: u32) -> Result<Option<Vec<usize>>> {
    let group = window.group();
    let region = window.region_at_least(r)?;
    let offset = window.offset(xi).clone();
    let n = region.ball_size(r);
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let y = group.multiply(&offset, region.element(k));
        match window.region().index_of(&y).filter(|&j| j < window.len()) {
            Some(j) => out.push(j),
            None => return Ok(None),
        }
    }
    Ok(Some(out))
}

/// Largest empty radius inside the subball whose window indices are `idx`
/// (radius `r`), read off the window-level distance transform. Exact because
/// a ball inside the subball misses `A ∩ window` iff it misses `A ∩ subball`.
pub(crate) fn subball_best_empty(
    group: &Group,
    dist: &[u32],
    idx: &[usize],
    r: u32,
) -> Result<Option<(usize, u32)>> {
    let contain = group.boundary_distance(r)?;
    let mut best: Option<(usize, u32)> = None;
    for (k, &j) in idx.iter().enumerate() {
        let m = dist[j].saturating_sub(1).min(contain[k] - 1);
        if m >= 1 && best.map_or(true, |(_, b)| m > b) {
            best = Some((k, m));
        }
    }
    Ok(best)
}

fn check_rho(rho: &Frac) -> Result<()> {
    if *rho == frac(0, 1) || *rho > frac(1, 1) {
        return Err(Error::usage(format!("resolution {} must lie in (0, 1]", Q(*rho))));
    }
    Ok(())
}

/// `λ̂(A; ρ) = |{x ∈ I : d(x, A ∩ I) ≤ ⌈ρN⌉}| / |I|`.
pub fn neighborhood_density(a: &SubsetWindow, rho: &Frac) -> Result<Frac> {
    check_rho(rho)?;
    if a.is_empty() {
        return Ok(frac(0, 1));
    }
    let r = ceil_mul(rho, a.window().radius());
    let dist = a.distance_transform()?;
    let near = dist.iter().filter(|&&d| d <= r).count();
    Ok(frac(near as u128, a.window().len() as u128))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityProfile {
    /// Strictly decreasing.
    pub resolutions: Vec<Q>,
    pub values: Vec<Q>,
}

impl DensityProfile {
    /// Value at the finest resolution.
    pub fn headline(&self) -> Option<Q> {
        self.values.last().copied()
    }
}

pub fn density_profile(a: &SubsetWindow, resolutions: &[Frac]) -> Result<DensityProfile> {
    let mut rs = resolutions.to_vec();
    rs.sort_unstable_by(|x, y| y.cmp(x));
    rs.dedup();
    let values = rs
        .iter()
        .map(|r| neighborhood_density(a, r).map(Q))
        .collect::<Result<Vec<_>>>()?;
    Ok(DensityProfile {
        resolutions: rs.into_iter().map(Q).collect(),
        values,
    })
}

/// Exact instance of: an empty ball `B(x, M)` with `M > r = ⌈ρN⌉` forces
/// `λ̂(A; ρ) ≤ 1 - |B(x, M - r)| / |I|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReverseBmCertificate {
    pub rho: Q,
    pub resolution_radius: u32,
    pub witness: Option<BallRef>,
    pub lambda_hat: Q,
    /// `None` when the statement is vacuous (`M ≤ r` or no witness).
    pub bound: Option<Q>,
    pub holds: bool,
}

pub fn reverse_bm_check(a: &SubsetWindow, rho: &Frac, gap: &GapReport) -> Result<ReverseBmCertificate> {
    let lambda_hat = neighborhood_density(a, rho)?;
    let r = ceil_mul(rho, a.window().radius());
    let bound = match &gap.witness {
        Some(w) if w.radius > r => {
            let inner = a.window().shrink(w.radius - r).len() as u128;
            Some(frac(1, 1) - frac(inner, a.window().len() as u128))
        }
        _ => None,
    };
    Ok(ReverseBmCertificate {
        rho: Q(*rho),
        resolution_radius: r,
        witness: gap.witness.clone(),
        lambda_hat: Q(lambda_hat),
        holds: bound.map_or(true, |b| lambda_hat <= b),
        bound: bound.map(Q),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SsRow {
    pub n: u32,
    pub sphere: u64,
    pub ratio: Q,
}

/// `|S(e, n)| / n^{d-1}` for `n = 1..=max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SsTable {
    pub degree: u32,
    pub rows: Vec<SsRow>,
    pub max_ratio: Q,
}

pub fn ss_ratio_table(table: &GrowthTable, degree: Option<u32>) -> Result<SsTable> {
    let d = degree.ok_or_else(|| Error::usage("growth degree unknown: run a growth fit first"))?;
    if d == 0 {
        return Err(Error::usage("growth degree must be at least 1"));
    }
    let rows: Vec<SsRow> = (1..=table.max_radius())
        .map(|n| {
            let s = table.sphere[n as usize];
            SsRow {
                n,
                sphere: s,
                ratio: Q(frac(s as u128, (n as u128).pow(d - 1))),
            }
        })
        .collect();
    let max_ratio = rows.iter().map(|r| r.ratio).max().unwrap_or(Q::zero());
    Ok(SsTable {
        degree: d,
        rows,
        max_ratio,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoublingRow {
    pub center: Element,
    pub radius: u32,
    pub outer: u64,
    pub inner: u64,
    pub ratio: Q,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoublingTable {
    pub rows: Vec<DoublingRow>,
    /// `c² · 32^d`.
    pub bound: Q,
    pub max_ratio: Q,
    pub within_bound: bool,
}

/// `|B(x, r)| / |B(x, ⌊r/2⌋)|` at the given centres, each ball enumerated
/// by a fresh BFS from its centre.
pub fn doubling_table(
    group: &Arc<Group>,
    centers: &[Element],
    radii: &[u32],
    growth_constant: &Frac,
    degree: u32,
) -> Result<DoublingTable> {
    let jobs: Vec<(&Element, u32)> = centers.iter().flat_map(|c| radii.iter().map(move |&r| (c, r))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(c, r)| {
            let layers = layered_bfs(group, c, r, group.ball_cap, None)?;
            let outer: u64 = layers.iter().map(|l| l.len() as u64).sum();
            let inner: u64 = layers[..=(r / 2) as usize].iter().map(|l| l.len() as u64).sum();
            Ok(DoublingRow {
                center: c.clone(),
                radius: r,
                outer,
                inner,
                ratio: Q(frac(outer as u128, inner as u128)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let bound = growth_constant * growth_constant * frac(32u128.pow(degree), 1);
    let max_ratio = rows.iter().map(|r| r.ratio).max().unwrap_or(Q::zero());
    Ok(DoublingTable {
        within_bound: max_ratio.0 <= bound,
        rows,
        bound: Q(bound),
        max_ratio,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoReport {
    /// Maximum of `|C| / |A|` over subballs `C ⊆ A ∩ B` of radius ≥ 1.
    pub value: Q,
    pub witness: Option<BallRef>,
}

pub fn rho_intersection(a: &MetricBall, b: &MetricBall) -> Result<RhoReport> {
    if a.group().name() != b.group().name() {
        return Err(Error::usage("balls belong to different backends"));
    }
    let ca = containment_transform(a)?;
    let cb = containment_transform(b)?;
    let mut best: Option<(usize, u32)> = None;
    for i in 0..a.len() {
        let Some(j) = b.index_of(&a.element(i)) else {
            continue;
        };
        let m = ca[i].min(cb[j]);
        if m >= 1 && best.map_or(true, |(_, bm)| m > bm) {
            best = Some((i, m));
        }
    }
    Ok(match best {
        Some((i, m)) => RhoReport {
            value: Q(frac(a.shrink(m).len() as u128, a.len() as u128)),
            witness: Some(BallRef {
                center: a.element(i),
                radius: m,
            }),
        },
        None => RhoReport {
            value: Q::zero(),
            witness: None,
        },
    })
}

/// Search grid for the `η_n(G, δ)` scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgPlan {
    /// Radii for the first ball; only those with `|A| > n` are used.
    pub a_radii: Vec<u32>,
    pub b_radii: Vec<u32>,
    /// Centres of the second ball are drawn from `B(e, offset_radius)`.
    pub offset_radius: u32,
    /// Upper limit on sampled centres; all are used when fewer exist.
    pub max_offsets: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgPair {
    pub a: BallRef,
    pub b: BallRef,
    pub gap: Q,
    pub rho: Q,
}

/// Sampled estimate of `η_n(G, δ)`. The minimum runs over a subset of all
/// pairs, so it is an upper bound on the true value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SgEstimate {
    UpperBound {
        eta: Q,
        minimizer: SgPair,
        qualifying_pairs: usize,
        sampled_pairs: usize,
    },
    Vacuous {
        sampled_pairs: usize,
    },
}

pub fn sg_eta(group: &Arc<Group>, n: u64, delta: &Frac, plan: &SgPlan) -> Result<SgEstimate> {
    let e = group.identity();
    let offsets_ball = enumerate_ball(group, &e, plan.offset_radius)?;
    let mut offsets: Vec<usize> = (0..offsets_ball.len()).collect();
    if offsets.len() > plan.max_offsets {
        let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
        offsets.shuffle(&mut rng);
        offsets.truncate(plan.max_offsets);
        offsets.sort_unstable();
    }
    let mut a_balls = Vec::new();
    for &r in &plan.a_radii {
        let a = enumerate_ball(group, &e, r)?;
        if a.len() as u64 > n {
            a_balls.push(a);
        }
    }
    let mut jobs = Vec::new();
    for a in &a_balls {
        for &o in &offsets {
            for &rb in &plan.b_radii {
                jobs.push((a, offsets_ball.element(o), rb));
            }
        }
    }
    let sampled = jobs.len();
    let results = jobs
        .par_iter()
        .map(|(a, bc, rb)| -> Result<Option<SgPair>> {
            let b = enumerate_ball(group, bc, *rb)?;
            let set = SubsetWindow::from_predicate((*a).clone(), Provenance::adhoc(), |x| b.contains(x));
            let gap = gap_fraction(&set)?;
            if gap.gap.0 >= *delta {
                return Ok(None);
            }
            let rho = rho_intersection(a, &b)?;
            Ok(Some(SgPair {
                a: BallRef::of(a),
                b: BallRef::of(&b),
                gap: gap.gap,
                rho: rho.value,
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    let qualifying: Vec<SgPair> = results.into_iter().flatten().collect();
    let count = qualifying.len();
    // First minimiser in job order keeps the result scheduler-independent.
    let min = qualifying.into_iter().reduce(|best, p| if p.rho < best.rho { p } else { best });
    Ok(match min {
        Some(p) => SgEstimate::UpperBound {
            eta: p.rho,
            minimizer: p,
            qualifying_pairs: count,
            sampled_pairs: sampled,
        },
        None => SgEstimate::Vacuous { sampled_pairs: sampled },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ball::enumerate_ball;

    fn el(c: &[i64]) -> Element {
        Element::new(c)
    }

    fn z1_window(r: u32) -> MetricBall {
        let g = Group::parse("Z^1").unwrap();
        enumerate_ball(&g, &el(&[0]), r).unwrap()
    }

    #[test]
    fn gap_trivial_cases() {
        let w = z1_window(10);
        let full = SubsetWindow::full(w.clone());
        let r = gap_fraction(&full).unwrap();
        assert_eq!(r.gap, Q::zero());
        assert!(r.witness.is_none());
        let empty = SubsetWindow::empty(w.clone());
        let r = gap_fraction(&empty).unwrap();
        assert_eq!(r.gap.0, frac(1, 1));
        assert_eq!(r.witness, Some(BallRef::of(&w)));
    }

    #[test]
    fn gap_interval_example() {
        let w = z1_window(10);
        let a = SubsetWindow::from_predicate(w, Provenance::adhoc(), |x| {
            let v = x.0[0];
            v <= -1 || v >= 5
        });
        let r = gap_fraction(&a).unwrap();
        assert_eq!(r.gap.0, frac(5, 21));
        assert_eq!(
            r.witness,
            Some(BallRef {
                center: el(&[2]),
                radius: 2
            })
        );
    }

    #[test]
    fn density_examples() {
        let w = z1_window(100);
        let empty = SubsetWindow::empty(w.clone());
        for rho in [frac(1, 50), frac(1, 2), frac(1, 1)] {
            assert_eq!(neighborhood_density(&empty, &rho).unwrap(), frac(0, 1));
        }
        let evens = SubsetWindow::from_predicate(w.clone(), Provenance::adhoc(), |x| x.0[0] % 2 == 0);
        assert_eq!(neighborhood_density(&evens, &frac(1, 50)).unwrap(), frac(1, 1));
        let block = SubsetWindow::from_predicate(w.clone(), Provenance::adhoc(), |x| (0..=49).contains(&x.0[0]));
        assert_eq!(neighborhood_density(&block, &frac(1, 20)).unwrap(), frac(60, 201));
        assert!(neighborhood_density(&block, &frac(0, 1)).is_err());
        assert!(neighborhood_density(&block, &frac(3, 2)).is_err());
    }

    #[test]
    fn profile_is_sorted_and_monotone() {
        let w = z1_window(100);
        let full = SubsetWindow::full(w.clone());
        let p = density_profile(&full, &[frac(1, 20), frac(1, 2), frac(1, 50)]).unwrap();
        assert!(p.values.iter().all(|v| v.0 == frac(1, 1)));
        assert_eq!(p.resolutions[0].0, frac(1, 2));
        let block = SubsetWindow::from_predicate(w, Provenance::adhoc(), |x| (0..=9).contains(&x.0[0]));
        let p = density_profile(&block, &[frac(1, 50), frac(1, 2), frac(1, 5), frac(1, 20)]).unwrap();
        assert!(p.values.windows(2).all(|v| v[0] >= v[1]));
        assert_eq!(p.headline().unwrap().0, frac(14, 201));
    }

    #[test]
    fn reverse_bm_interval_instance() {
        let w = z1_window(10);
        let a = SubsetWindow::from_predicate(w, Provenance::adhoc(), |x| {
            let v = x.0[0];
            v <= -1 || v >= 5
        });
        let gap = gap_fraction(&a).unwrap();
        let cert = reverse_bm_check(&a, &frac(1, 20), &gap).unwrap();
        // r = ⌈0.5⌉ = 1, M = 2: λ̂ counts {-10..0} ∪ {4..10} = 18 points and
        // the bound is 1 - |B(2, 1)|/21 = 18/21, attained with equality.
        assert_eq!(cert.resolution_radius, 1);
        assert_eq!(cert.lambda_hat.0, frac(18, 21));
        assert_eq!(cert.bound.unwrap().0, frac(18, 21));
        assert!(cert.holds);

        let empty = SubsetWindow::empty(z1_window(10));
        let gap = gap_fraction(&empty).unwrap();
        let cert = reverse_bm_check(&empty, &frac(1, 20), &gap).unwrap();
        assert_eq!(cert.lambda_hat, Q::zero());
        // Witness is the whole window (M = 10): 1 - |B(0, 9)|/21 = 2/21.
        assert_eq!(cert.bound.unwrap().0, frac(2, 21));
        assert!(cert.holds);
    }

    #[test]
    fn ss_ratios() {
        let z2 = Group::parse("Z^2").unwrap();
        let t = crate::ball::growth_table(&z2, 20).unwrap();
        let ss = ss_ratio_table(&t, Some(2)).unwrap();
        assert!(ss.rows.iter().all(|r| r.ratio.0 == frac(4, 1)));
        assert_eq!(ss.max_ratio.0, frac(4, 1));
        let z1 = Group::parse("Z^1").unwrap();
        let t = crate::ball::growth_table(&z1, 20).unwrap();
        assert_eq!(ss_ratio_table(&t, Some(1)).unwrap().max_ratio.0, frac(2, 1));
        assert!(ss_ratio_table(&t, None).is_err());
    }

    #[test]
    fn doubling_small_cases() {
        let z1 = Group::parse("Z^1").unwrap();
        let t = doubling_table(&z1, &[el(&[0]), el(&[7])], &[1, 10, 11], &frac(21, 10), 1).unwrap();
        assert_eq!(t.rows[0].ratio.0, frac(3, 1));
        assert_eq!(t.rows[1].ratio.0, frac(21, 11));
        assert!(t.within_bound);
        let z2 = Group::parse("Z^2").unwrap();
        let t = doubling_table(&z2, &[el(&[3, 3])], &[20], &frac(221, 100), 2).unwrap();
        assert_eq!(t.rows[0].ratio.0, frac(841, 221));
    }

    #[test]
    fn rho_examples() {
        let z1 = Group::parse("Z^1").unwrap();
        let a = enumerate_ball(&z1, &el(&[0]), 10).unwrap();
        assert_eq!(rho_intersection(&a, &a).unwrap().value.0, frac(1, 1));
        let far = enumerate_ball(&z1, &el(&[40]), 10).unwrap();
        assert_eq!(rho_intersection(&a, &far).unwrap().value, Q::zero());
        let b = enumerate_ball(&z1, &el(&[6]), 10).unwrap();
        let r = rho_intersection(&a, &b).unwrap();
        assert_eq!(r.value.0, frac(15, 21));
        assert_eq!(
            r.witness,
            Some(BallRef {
                center: el(&[3]),
                radius: 7
            })
        );
    }

    #[test]
    fn sg_delta_one_allows_barely_touching_pairs() {
        let z1 = Group::parse("Z^1").unwrap();
        let plan = SgPlan {
            a_radii: vec![5],
            b_radii: vec![5],
            offset_radius: 10,
            max_offsets: 100,
            seed: 1,
        };
        match sg_eta(&z1, 5, &frac(1, 1), &plan).unwrap() {
            SgEstimate::UpperBound { eta, .. } => assert_eq!(eta, Q::zero()),
            v => panic!("{v:?}"),
        }
        let plan = SgPlan { a_radii: vec![1], ..plan };
        assert!(matches!(sg_eta(&z1, 5, &frac(1, 1), &plan).unwrap(), SgEstimate::Vacuous { .. }));
    }
}
