//! The packing count `F_{δ,ε,A}(n)`.
//!
//! For a subball `I` of the window, `k(I)` is the least number of pairwise
//! disjoint `A`-empty balls inside `I` whose sizes sum to at least `ε|I|`.
//! `F(n)` minimises `k(I)` over subballs of radius `≥ n` with `g_A(I) ≤ δ`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};
use std::fmt;
use std::io::Write;

use crate::ball::{containment_transform, MetricBall};
use crate::density::{subball_best_empty, subball_indices, BallRef, SubsetWindow};
use crate::error::{Error, Result};
use crate::frac::{Frac, Q};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FMode {
    Exact,
    #[serde(rename = "greedy-upper-bound", alias = "greedy")]
    Greedy,
}

impl fmt::Display for FMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FMode::Exact => "exact",
            FMode::Greedy => "greedy-upper-bound",
        })
    }
}

/// One `F` value. `Inconclusive` only arises in greedy mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FValue {
    Zero,
    Finite(u32),
    Infinite,
    Inconclusive,
}

impl fmt::Display for FValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FValue::Zero => f.write_str("0"),
            FValue::Finite(k) => write!(f, "{k}"),
            FValue::Infinite => f.write_str("inf"),
            FValue::Inconclusive => f.write_str("inconclusive"),
        }
    }
}

impl Serialize for FValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            FValue::Finite(k) => s.serialize_u32(*k),
            FValue::Zero => s.serialize_u32(0),
            other => s.collect_str(other),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FOptions {
    /// Exact mode refuses windows of larger radius.
    pub exact_radius_cap: u32,
    /// Exact mode refuses windows with more elements.
    pub exact_element_cap: usize,
    /// Branch-and-bound nodes per subball before giving up.
    pub node_budget: u64,
    /// Greedy mode only: subsample this many subball centres.
    pub max_centers: Option<usize>,
    pub seed: u64,
}

impl Default for FOptions {
    fn default() -> Self {
        FOptions {
            exact_radius_cap: 12,
            exact_element_cap: 5_000,
            node_budget: 2_000_000,
            max_centers: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FEntry {
    pub n: u32,
    #[serde(rename = "F")]
    pub value: FValue,
    pub mode: FMode,
    /// The subball attaining the value; for `∞` the first qualifying subball.
    pub minimizing_ball: Option<BallRef>,
    /// `min ⌈ε|I| / |largest empty ball of I|⌉` over qualifying `I`: a
    /// certified lower bound in both modes.
    pub lower_bound: Option<u32>,
    pub qualifying: usize,
}

#[derive(Clone, Debug)]
struct Subball {
    center: usize,
    radius: u32,
    empty_radius: u32,
    lower: u32,
}

fn check_params(delta: &Frac, eps: &Frac) -> Result<()> {
    let zero = Frac::from_integer(0);
    let one = Frac::from_integer(1);
    if !(zero < *delta && delta < eps && *eps < one) {
        return Err(Error::usage(format!(
            "need 0 < delta < eps < 1, got delta = {}, eps = {}",
            Q(*delta),
            Q(*eps)
        )));
    }
    Ok(())
}

/// `⌈q · n⌉` for large `n`.
fn ceil_mass(q: &Frac, n: u64) -> u64 {
    (q.numer() * n as u128).div_ceil(*q.denom()) as u64
}

fn ball_ref(window: &MetricBall, s: &Subball) -> BallRef {
    BallRef {
        center: window.element(s.center),
        radius: s.radius,
    }
}

/// Every subball `B(x, R) ⊆ window` with `R ≥ n` and `g_A ≤ δ`, in
/// (centre, radius) order.
fn qualifying_subballs(
    a: &SubsetWindow,
    delta: &Frac,
    eps: &Frac,
    n: u32,
    centers: Vec<usize>,
) -> Result<Vec<Subball>> {
    let window = a.window();
    let group = window.group();
    let dist = a.distance_transform()?;
    let contain = containment_transform(window)?;
    let region = window.region_at_least(window.radius())?;
    let per_center: Vec<Result<Vec<Subball>>> = centers
        .into_par_iter()
        .map(|c| {
            let rmax = contain[c];
            let idx = subball_indices(window, c, rmax)?.expect("containment radius keeps the ball inside");
            let mut out = Vec::new();
            for r in n..=rmax {
                let size = region.ball_size(r) as u128;
                let best = subball_best_empty(group, &dist, &idx[..size as usize], r)?;
                let (empty_radius, empty) = match best {
                    Some((_, m)) => (m, region.ball_size(m) as u128),
                    None => (0, 0),
                };
                if empty * delta.denom() > delta.numer() * size {
                    continue;
                }
                let target = ceil_mass(eps, size as u64) as u128;
                let lower = if empty == 0 { u32::MAX } else { target.div_ceil(empty) as u32 };
                out.push(Subball {
                    center: c,
                    radius: r,
                    empty_radius,
                    lower,
                });
            }
            Ok(out)
        })
        .collect();
    let mut all = Vec::new();
    for v in per_center {
        all.extend(v?);
    }
    Ok(all)
}

/// Candidate empty balls `B(y, M)` inside one subball, as bitsets over the
/// subball's local indices, sorted by size (largest first).
struct Candidates {
    size: Vec<u64>,
    bits: Vec<Vec<u64>>,
    points: Vec<Vec<u32>>,
    /// Candidates containing each local point.
    incidence: Vec<Vec<u32>>,
    words: usize,
}

fn candidates(a: &SubsetWindow, s: &Subball) -> Result<Candidates> {
    let window = a.window();
    let group = window.group();
    let dist = a.distance_transform()?;
    let idx = subball_indices(window, s.center, s.radius)?.expect("qualifying subballs lie in the window");
    let contain = group.boundary_distance(s.radius)?;
    let region = window.region_at_least(window.radius())?;
    let mut local = rustc_hash::FxHashMap::default();
    for (k, &j) in idx.iter().enumerate() {
        local.insert(j, k as u32);
    }
    let words = idx.len().div_ceil(64);
    let mut raw: Vec<(u64, usize, u32, Vec<u32>)> = Vec::new();
    for (k, &j) in idx.iter().enumerate() {
        let m = dist[j].saturating_sub(1).min(contain[k] - 1);
        for radius in 1..=m {
            let ball = subball_indices(window, j, radius)?.expect("empty ball inside the subball");
            let pts: Vec<u32> = ball.iter().map(|w| local[w]).collect();
            raw.push((region.ball_size(radius) as u64, k, radius, pts));
        }
    }
    raw.sort_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut incidence = vec![Vec::new(); idx.len()];
    let mut size = Vec::with_capacity(raw.len());
    let mut bits = Vec::with_capacity(raw.len());
    let mut points = Vec::with_capacity(raw.len());
    for (ci, (sz, _, _, pts)) in raw.into_iter().enumerate() {
        let mut b = vec![0u64; words];
        for &p in &pts {
            b[p as usize / 64] |= 1 << (p % 64);
            incidence[p as usize].push(ci as u32);
        }
        size.push(sz);
        bits.push(b);
        points.push(pts);
    }
    Ok(Candidates {
        size,
        bits,
        points,
        incidence,
        words,
    })
}

fn disjoint(a: &[u64], b: &[u64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x & y == 0)
}

fn greedy_count(c: &Candidates, target: u64) -> Option<u32> {
    let mut used = vec![0u64; c.words];
    let (mut mass, mut count) = (0u64, 0u32);
    for (i, b) in c.bits.iter().enumerate() {
        if mass >= target {
            break;
        }
        if disjoint(&used, b) {
            used.iter_mut().zip(b).for_each(|(u, x)| *u |= x);
            mass += c.size[i];
            count += 1;
        }
    }
    (mass >= target).then_some(count)
}

struct Search<'a> {
    c: &'a Candidates,
    target: u64,
    best: u32,
    nodes: u64,
    budget: u64,
}

impl Search<'_> {
    /// Sum of the `r` largest clique values in a greedy cover of `avail` by
    /// cliques "all candidates through point p". A disjoint family takes at
    /// most one candidate per clique.
    fn clique_bound(&self, avail: &[usize], r: u32) -> u64 {
        let mut live = vec![false; self.c.size.len()];
        for &i in avail {
            live[i] = true;
        }
        let mut total = 0u64;
        let mut taken = 0u32;
        for &i in avail {
            if !live[i] {
                continue;
            }
            let p = *self.c.points[i]
                .iter()
                .max_by_key(|&&p| self.c.incidence[p as usize].iter().filter(|&&j| live[j as usize]).count())
                .expect("balls are nonempty");
            for &j in &self.c.incidence[p as usize] {
                live[j as usize] = false;
            }
            total += self.c.size[i];
            taken += 1;
            if taken == r {
                break;
            }
        }
        total
    }

    fn dfs(&mut self, pos: usize, used: &mut Vec<u64>, mass: u64, count: u32) -> Result<()> {
        if mass >= self.target {
            self.best = count;
            return Ok(());
        }
        if count + 1 >= self.best {
            return Ok(());
        }
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(Error::capability(format!(
                "exact packing search exceeded its budget of {} nodes; use greedy mode",
                self.budget
            )));
        }
        let avail: Vec<usize> = (pos..self.c.size.len())
            .filter(|&i| disjoint(used, &self.c.bits[i]))
            .collect();
        let rest = self.best - 1 - count;
        if mass + self.clique_bound(&avail, rest) < self.target {
            return Ok(());
        }
        for &i in &avail {
            let need = (self.target - mass).div_ceil(self.c.size[i]);
            if count as u64 + need >= self.best as u64 {
                break;
            }
            if !disjoint(used, &self.c.bits[i]) {
                continue;
            }
            let saved = used.clone();
            used.iter_mut().zip(&self.c.bits[i]).for_each(|(u, x)| *u |= x);
            self.dfs(i + 1, used, mass + self.c.size[i], count + 1)?;
            *used = saved;
        }
        Ok(())
    }
}

/// Least `k < cutoff` reaching the mass, or `None`.
fn exact_count(c: &Candidates, target: u64, cutoff: u32, budget: u64) -> Result<Option<u32>> {
    let mut s = Search {
        c,
        target,
        best: cutoff,
        nodes: 0,
        budget,
    };
    if let Some(g) = greedy_count(c, target) {
        s.best = s.best.min(g);
    }
    let mut used = vec![0u64; c.words];
    s.dfs(0, &mut used, 0, 0)?;
    Ok((s.best < cutoff).then_some(s.best))
}

fn sample_centers(n: usize, keep: Option<usize>, seed: u64) -> Vec<usize> {
    let mut all: Vec<usize> = (0..n).collect();
    if let Some(k) = keep.filter(|&k| k < n) {
        all.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        all.truncate(k);
        all.sort_unstable();
    }
    all
}

pub fn f_value(a: &SubsetWindow, delta: &Frac, eps: &Frac, n: u32, mode: FMode, opts: &FOptions) -> Result<FEntry> {
    check_params(delta, eps)?;
    if n == 0 {
        return Err(Error::usage("n must be at least 1"));
    }
    let window = a.window();
    if mode == FMode::Exact && (window.radius() > opts.exact_radius_cap || window.len() > opts.exact_element_cap) {
        return Err(Error::capability(format!(
            "exact F needs a window of radius <= {} and at most {} elements, got {:?} with {}",
            opts.exact_radius_cap,
            opts.exact_element_cap,
            window,
            window.len()
        )));
    }
    let contain = containment_transform(window)?;
    let eligible: Vec<usize> = (0..window.len()).filter(|&i| contain[i] >= n).collect();
    let centers = match mode {
        FMode::Exact => eligible,
        FMode::Greedy => {
            let picks = sample_centers(eligible.len(), opts.max_centers, opts.seed);
            picks.into_iter().map(|k| eligible[k]).collect()
        }
    };
    let mut subs = qualifying_subballs(a, delta, eps, n, centers)?;
    let mut entry = FEntry {
        n,
        value: FValue::Zero,
        mode,
        minimizing_ball: None,
        lower_bound: None,
        qualifying: subs.len(),
    };
    if subs.is_empty() {
        return Ok(entry);
    }
    let lower = subs.iter().map(|s| s.lower).min().expect("nonempty");
    entry.lower_bound = (lower != u32::MAX).then_some(lower);
    entry.minimizing_ball = Some(ball_ref(window, &subs[0]));
    let region = window.region_at_least(window.radius())?;
    let target_of = |s: &Subball| ceil_mass(eps, region.ball_size(s.radius) as u64);
    match mode {
        FMode::Exact => {
            subs.sort_by_key(|s| s.lower);
            entry.value = FValue::Infinite;
            let mut best = u32::MAX;
            for s in &subs {
                if s.lower >= best || s.empty_radius == 0 {
                    break;
                }
                let c = candidates(a, s)?;
                if let Some(k) = exact_count(&c, target_of(s), best, opts.node_budget)? {
                    debug_assert!(k >= s.lower);
                    best = k;
                    entry.value = FValue::Finite(k);
                    entry.minimizing_ball = Some(ball_ref(window, s));
                }
            }
        }
        FMode::Greedy => {
            let found: Vec<Result<Option<u32>>> = subs
                .par_iter()
                .map(|s| {
                    if s.empty_radius == 0 {
                        return Ok(None);
                    }
                    Ok(greedy_count(&candidates(a, s)?, target_of(s)))
                })
                .collect();
            entry.value = FValue::Inconclusive;
            let mut best = u32::MAX;
            for (s, k) in subs.iter().zip(found) {
                if let Some(k) = k? {
                    if k < best {
                        best = k;
                        entry.value = FValue::Finite(k);
                        entry.minimizing_ball = Some(ball_ref(window, s));
                    }
                }
            }
        }
    }
    Ok(entry)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    SbmConsistent,
    SbmRefutingWitness,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    /// `F` at the largest `n` at least this large reads as consistent.
    pub consistent_at_least: u32,
    /// A finite `F` at most this large in the upper half of the range
    /// reads as a refuting witness.
    pub refuting_at_most: u32,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            consistent_at_least: 10,
            refuting_at_most: 3,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FScan {
    pub delta: Q,
    pub eps: Q,
    pub entries: Vec<FEntry>,
    pub verdict: Verdict,
    pub thresholds: Thresholds,
}

impl FScan {
    /// CSV with header `n,F,mode,ball`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["n", "F", "mode", "ball"])?;
        for e in &self.entries {
            let ball = e
                .minimizing_ball
                .as_ref()
                .map(|b| format!("B({};{})", b.center, b.radius))
                .unwrap_or_default();
            out.write_record([e.n.to_string(), e.value.to_string(), e.mode.to_string(), ball])?;
        }
        out.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

fn verdict(entries: &[FEntry], t: &Thresholds) -> Verdict {
    let Some(last) = entries.last() else {
        return Verdict::Inconclusive;
    };
    let consistent = match last.value {
        FValue::Infinite => true,
        FValue::Finite(k) if last.mode == FMode::Exact => k >= t.consistent_at_least,
        FValue::Zero => false,
        _ => last.lower_bound.is_some_and(|lb| lb >= t.consistent_at_least),
    };
    if consistent {
        return Verdict::SbmConsistent;
    }
    let half = entries.len() / 2;
    let refuting = entries[half..]
        .iter()
        .any(|e| matches!(e.value, FValue::Finite(k) if k <= t.refuting_at_most));
    if refuting {
        Verdict::SbmRefutingWitness
    } else {
        Verdict::Inconclusive
    }
}

/// `F(n)` for `n` in `lo..=hi`, in increasing `n`.
pub fn f_scan(
    a: &SubsetWindow,
    delta: &Frac,
    eps: &Frac,
    (lo, hi): (u32, u32),
    mode: FMode,
    opts: &FOptions,
    thresholds: &Thresholds,
) -> Result<FScan> {
    check_params(delta, eps)?;
    if lo == 0 || lo > hi {
        return Err(Error::usage(format!("invalid n range {lo}..={hi}")));
    }
    let entries = (lo..=hi)
        .into_par_iter()
        .map(|n| f_value(a, delta, eps, n, mode, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(FScan {
        delta: Q(*delta),
        eps: Q(*eps),
        verdict: verdict(&entries, thresholds),
        entries,
        thresholds: thresholds.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ball::enumerate_ball;
    use crate::density::Provenance;
    use crate::frac::frac;
    use crate::group::{Element, Group};

    fn set(spec: &str, radius: u32, pred: impl Fn(&Element) -> bool + Sync) -> SubsetWindow {
        let g = Group::parse(spec).unwrap();
        let w = enumerate_ball(&g, &g.identity(), radius).unwrap();
        SubsetWindow::from_predicate(w, Provenance::adhoc(), pred)
    }

    /// Exhaustive `k(I)` over all disjoint families of empty balls.
    fn brute_k(c: &Candidates, target: u64) -> Option<u32> {
        fn go(c: &Candidates, target: u64, pos: usize, used: &[u64], mass: u64, count: u32, best: &mut Option<u32>) {
            if mass >= target {
                if best.map_or(true, |b| count < b) {
                    *best = Some(count);
                }
                return;
            }
            for i in pos..c.size.len() {
                if disjoint(used, &c.bits[i]) {
                    let next: Vec<u64> = used.iter().zip(&c.bits[i]).map(|(u, x)| u | x).collect();
                    go(c, target, i + 1, &next, mass + c.size[i], count + 1, best);
                }
            }
        }
        let mut best = None;
        go(c, target, 0, &vec![0u64; c.words], 0, 0, &mut best);
        best
    }

    #[test]
    fn rejects_bad_parameters() {
        let a = set("Z", 5, |_| true);
        let e = f_value(&a, &frac(1, 2), &frac(1, 2), 1, FMode::Exact, &FOptions::default()).unwrap_err();
        assert!(matches!(e, Error::Usage(_)));
        let big = set("Z^2", 13, |_| true);
        let e = f_value(&big, &frac(1, 10), &frac(1, 2), 1, FMode::Exact, &FOptions::default()).unwrap_err();
        assert!(e.is_capability());
    }

    #[test]
    fn empty_set_never_qualifies() {
        let a = set("Z^2", 6, |_| false);
        let scan = f_scan(&a, &frac(1, 10), &frac(1, 2), (1, 6), FMode::Exact, &FOptions::default(), &Thresholds::default()).unwrap();
        assert!(scan.entries.iter().all(|e| e.value == FValue::Zero && e.qualifying == 0));
        assert_eq!(scan.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn evens_admit_no_empty_ball() {
        let a = set("Z", 12, |g| g.0[0] % 2 == 0);
        for n in 1..=12 {
            let e = f_value(&a, &frac(1, 5), &frac(1, 2), n, FMode::Exact, &FOptions::default()).unwrap();
            assert_eq!(e.value, FValue::Infinite, "n = {n}");
            assert!(e.qualifying > 0);
        }
    }

    #[test]
    fn exact_search_matches_exhaustive_packing() {
        for (spec, radius) in [("Z", 9), ("Z^2", 4), ("H3", 3)] {
            for seed in 0..6u64 {
                let a = set(spec, radius, |g| {
                    let h = g.0.iter().fold(seed.wrapping_mul(0x9e37_79b9), |h, &c| {
                        (h ^ c as u64).wrapping_mul(0x1000_0000_01b3)
                    });
                    h % 5 == 0
                });
                let s = Subball {
                    center: 0,
                    radius,
                    empty_radius: 1,
                    lower: 0,
                };
                let c = candidates(&a, &s).unwrap();
                let size = a.window().len() as u64;
                for eps in [frac(1, 5), frac(1, 3), frac(3, 5)] {
                    let target = ceil_mass(&eps, size);
                    let got = exact_count(&c, target, u32::MAX, u64::MAX).unwrap();
                    assert_eq!(got, brute_k(&c, target), "{spec} seed {seed} eps {}", Q(eps));
                    if let (Some(g), Some(e)) = (greedy_count(&c, target), got) {
                        assert!(e <= g);
                    }
                }
            }
        }
    }

    #[test]
    fn lattice_in_plane_is_consistent() {
        let a = set("Z^2", 12, |g| g.0[0] % 2 == 0 && g.0[1] % 2 == 0);
        let scan = f_scan(&a, &frac(1, 20), &frac(1, 2), (10, 12), FMode::Exact, &FOptions::default(), &Thresholds::default()).unwrap();
        let last = scan.entries.last().unwrap();
        assert!(matches!(last.value, FValue::Infinite) || matches!(last.value, FValue::Finite(k) if k >= 10));
        assert_eq!(scan.verdict, Verdict::SbmConsistent);
        assert_eq!(last.lower_bound, Some(32));
    }

    #[test]
    fn csv_layout() {
        let a = set("Z", 12, |g| g.0[0] % 2 == 0);
        let scan = f_scan(&a, &frac(1, 5), &frac(1, 2), (11, 12), FMode::Exact, &FOptions::default(), &Thresholds::default()).unwrap();
        let mut buf = Vec::new();
        scan.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("n,F,mode,ball"));
        assert_eq!(text.lines().nth(1), Some("11,inf,exact,B(0;11)"));
    }
}
