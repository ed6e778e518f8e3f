//! Closed balls, spheres and growth functions in the Cayley graph.
//!
//! Every ball is stored as a left translate of the identity-centred ball: the
//! word metric is left-invariant, so `B(g, n) = g · B(e, n)` with distances
//! preserved. The identity ball ([`Region`]) is enumerated once per group by
//! layered BFS, sorted per layer by coordinate tuple, and reused for every
//! smaller radius as a prefix.

use rayon::prelude::*;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::frac::{frac, Frac, Q};
use crate::group::{Element, Group};

pub(crate) const NONE: u32 = u32::MAX;

/// Identity-centred ball `B(e, R)` with its Cayley-graph adjacency.
pub struct Region {
    radius: u32,
    elements: Vec<Element>,
    layer: Vec<u32>,
    index: FxHashMap<Element, u32>,
    offsets: Vec<usize>,
    moves: usize,
    adjacency: Vec<u32>,
}

impl Region {
    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn element(&self, i: usize) -> &Element {
        &self.elements[i]
    }

    pub fn index_of(&self, g: &Element) -> Option<usize> {
        self.index.get(g).map(|&i| i as usize)
    }

    pub fn layer_of(&self, i: usize) -> u32 {
        self.layer[i]
    }

    /// `α_r = |B(e, r)|` for `r ≤ radius`.
    pub fn ball_size(&self, r: u32) -> usize {
        self.offsets[r.min(self.radius) as usize + 1]
    }

    pub fn sphere(&self, r: u32) -> &[Element] {
        let r = r as usize;
        &self.elements[self.offsets[r]..self.offsets[r + 1]]
    }

    /// Indices of `x·s` for every non-identity generator `s`; [`NONE`] when
    /// the neighbour lies outside the region.
    pub(crate) fn neighbors(&self, i: usize) -> &[u32] {
        &self.adjacency[i * self.moves..(i + 1) * self.moves]
    }

    fn build(group: &Group, radius: u32, cap: u64) -> Result<Region> {
        let layers = layered_bfs(group, &group.identity(), radius, cap, Some(group.growth_degree()))?;
        let mut elements = Vec::new();
        let mut layer = Vec::new();
        let mut offsets = vec![0];
        for (k, l) in layers.into_iter().enumerate() {
            layer.extend(std::iter::repeat(k as u32).take(l.len()));
            elements.extend(l);
            offsets.push(elements.len());
        }
        let index: FxHashMap<Element, u32> =
            elements.iter().enumerate().map(|(i, g)| (g.clone(), i as u32)).collect();
        let moves: Vec<&Element> = group.moves().collect();
        let adjacency: Vec<u32> = elements
            .par_iter()
            .flat_map_iter(|x| {
                moves
                    .iter()
                    .map(|s| index.get(&group.multiply(x, s)).copied().unwrap_or(NONE))
                    .collect::<Vec<_>>()
            })
            .collect();
        Ok(Region {
            radius,
            elements,
            layer,
            index,
            offsets,
            moves: moves.len(),
            adjacency,
        })
    }
}

/// Layered BFS from `center` by right multiplication with generators.
/// Layer `k` holds exactly the elements at distance `k`, sorted.
pub(crate) fn layered_bfs(
    group: &Group,
    center: &Element,
    radius: u32,
    cap: u64,
    degree: Option<u32>,
) -> Result<Vec<Vec<Element>>> {
    group.check(center)?;
    let moves: Vec<&Element> = group.moves().collect();
    let mut seen: FxHashSet<Element> = FxHashSet::default();
    seen.insert(center.clone());
    let mut layers = vec![vec![center.clone()]];
    let mut total: u64 = 1;
    for k in 1..=radius {
        let prev = layers.last().expect("nonempty");
        let mut next: Vec<Element> = prev
            .par_iter()
            .flat_map_iter(|x| moves.iter().map(move |s| group.multiply(x, s)))
            .filter(|y| !seen.contains(y))
            .collect();
        next.par_sort_unstable();
        next.dedup();
        total += next.len() as u64;
        if total > cap {
            return Err(Error::Resource { predicted: total, cap });
        }
        if let Some(d) = degree {
            if k >= 2 && 4 * k >= radius && k < radius {
                let predicted = (total as f64) * (radius as f64 / k as f64).powi(d as i32);
                if predicted > cap as f64 {
                    return Err(Error::Resource {
                        predicted: predicted as u64,
                        cap,
                    });
                }
            }
        }
        seen.extend(next.iter().cloned());
        layers.push(next);
    }
    Ok(layers)
}

impl Group {
    /// The cached identity ball, grown to at least `radius`.
    pub(crate) fn region_for(&self, radius: u32) -> Result<Arc<Region>> {
        if let Some(r) = self.region.read().expect("region lock").as_ref() {
            if r.radius() >= radius {
                return Ok(r.clone());
            }
        }
        let mut slot = self.region.write().expect("region lock");
        if let Some(r) = slot.as_ref() {
            if r.radius() >= radius {
                return Ok(r.clone());
            }
        }
        let region = Arc::new(Region::build(self, radius, self.ball_cap)?);
        *slot = Some(region.clone());
        Ok(region)
    }

    /// For each element `x` of `B(e, radius)`, the distance from `x` to the
    /// outer boundary sphere `S(e, radius + 1)`.
    pub(crate) fn boundary_distance(&self, radius: u32) -> Result<Arc<Vec<u32>>> {
        if let Some(v) = self.containment.lock().expect("containment lock").get(&radius) {
            return Ok(v.clone());
        }
        let region = self.region_for(radius + 1)?;
        let limit = region.ball_size(radius + 1);
        let inner = region.ball_size(radius);
        let dist = multi_source_bfs(&region, limit, inner..limit);
        let out = Arc::new(dist[..inner].to_vec());
        self.containment
            .lock()
            .expect("containment lock")
            .insert(radius, out.clone());
        Ok(out)
    }
}

/// Multi-source BFS over region indices `< limit`. Unreached entries are
/// [`NONE`].
pub(crate) fn multi_source_bfs(
    region: &Region,
    limit: usize,
    sources: impl IntoIterator<Item = usize>,
) -> Vec<u32> {
    let mut dist = vec![NONE; limit];
    let mut queue = VecDeque::new();
    for s in sources {
        if s < limit && dist[s] == NONE {
            dist[s] = 0;
            queue.push_back(s);
        }
    }
    while let Some(i) = queue.pop_front() {
        let d = dist[i] + 1;
        for &j in region.neighbors(i) {
            let j = j as usize;
            if j < limit && dist[j] == NONE {
                dist[j] = d;
                queue.push_back(j);
            }
        }
    }
    dist
}

/// Closed ball `B(center, radius)`.
#[derive(Clone)]
pub struct MetricBall {
    group: Arc<Group>,
    center: Element,
    center_inv: Element,
    radius: u32,
    region: Arc<Region>,
}

impl std::fmt::Debug for MetricBall {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "B({}, {})", self.center, self.radius)
    }
}

/// Enumerates `B(center, radius)` with exact distances, layered by sphere.
pub fn enumerate_ball(group: &Arc<Group>, center: &Element, radius: u32) -> Result<MetricBall> {
    group.check(center)?;
    let region = group.region_for(radius)?;
    Ok(MetricBall {
        group: group.clone(),
        center: center.clone(),
        center_inv: group.inverse(center),
        radius,
        region,
    })
}

impl MetricBall {
    pub fn group(&self) -> &Arc<Group> {
        &self.group
    }

    pub fn center(&self) -> &Element {
        &self.center
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.region.ball_size(self.radius)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The `i`-th element in canonical order (by layer, then by the
    /// coordinates of its identity-centred preimage).
    pub fn element(&self, i: usize) -> Element {
        self.group.multiply(&self.center, self.region.element(i))
    }

    /// Identity-centred offset `center⁻¹ · g` of the `i`-th element.
    pub fn offset(&self, i: usize) -> &Element {
        self.region.element(i)
    }

    pub fn index_of(&self, g: &Element) -> Option<usize> {
        let local = self.group.multiply(&self.center_inv, g);
        self.region.index_of(&local).filter(|&i| i < self.len())
    }

    pub fn contains(&self, g: &Element) -> bool {
        self.index_of(g).is_some()
    }

    /// Distance from the centre to the `i`-th element.
    pub fn dist(&self, i: usize) -> u32 {
        self.region.layer_of(i)
    }

    pub fn elements(&self) -> impl Iterator<Item = Element> + '_ {
        (0..self.len()).map(move |i| self.element(i))
    }

    /// Elements of the sphere `S(center, k)`, `k ≤ radius`.
    pub fn layer(&self, k: u32) -> Vec<Element> {
        if k > self.radius {
            return Vec::new();
        }
        self.region
            .sphere(k)
            .iter()
            .map(|z| self.group.multiply(&self.center, z))
            .collect()
    }

    pub fn sphere_size(&self, k: u32) -> usize {
        if k > self.radius {
            return 0;
        }
        self.region.ball_size(k) - if k == 0 { 0 } else { self.region.ball_size(k - 1) }
    }

    /// The same ball translated on the left by `g`.
    pub fn translate(&self, g: &Element) -> MetricBall {
        let center = self.group.multiply(g, &self.center);
        MetricBall {
            center_inv: self.group.inverse(&center),
            center,
            group: self.group.clone(),
            radius: self.radius,
            region: self.region.clone(),
        }
    }

    /// `B(center, r)` for `r ≤ radius`.
    pub fn shrink(&self, r: u32) -> MetricBall {
        let mut b = self.clone();
        b.radius = r.min(self.radius);
        b
    }

    /// Region covering `B(center, r)` in identity-centred coordinates;
    /// indices below `ball_size(radius)` coincide with this ball's indices.
    pub(crate) fn region_at_least(&self, r: u32) -> Result<Arc<Region>> {
        if self.region.radius() >= r {
            Ok(self.region.clone())
        } else {
            self.group.region_for(r)
        }
    }

    pub(crate) fn region(&self) -> &Arc<Region> {
        &self.region
    }
}

/// Exact map from window elements to `d(x, targets)`.
#[derive(Clone, Debug)]
pub struct DistanceMap {
    pub window: MetricBall,
    /// Indexed like the window; `u32::MAX` when no target is reachable.
    pub dist: Vec<u32>,
}

impl DistanceMap {
    pub fn get(&self, g: &Element) -> Option<u32> {
        self.window.index_of(g).map(|i| self.dist[i])
    }
}

/// `d(x, T)` for every `x` in the window, by multi-source BFS over
/// `B(center, 2·radius)`. Every geodesic between two window points stays in
/// that ball, so the restriction is exact.
pub fn distance_to_set(window: &MetricBall, targets: &[Element]) -> Result<DistanceMap> {
    if targets.is_empty() {
        return Err(Error::usage("distance_to_set needs at least one target"));
    }
    let sources = targets
        .iter()
        .map(|t| {
            window
                .index_of(t)
                .ok_or_else(|| Error::usage(format!("target {t} lies outside {window:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let dist = window_transform(window, sources)?;
    Ok(DistanceMap {
        window: window.clone(),
        dist,
    })
}

/// BFS transform from window-index sources, truncated to the window.
pub(crate) fn window_transform(window: &MetricBall, sources: Vec<usize>) -> Result<Vec<u32>> {
    let region = window.region_at_least(2 * window.radius())?;
    let limit = region.ball_size(2 * window.radius());
    let mut dist = multi_source_bfs(&region, limit, sources);
    dist.truncate(window.len());
    Ok(dist)
}

/// Containment radii for every element of the window: entry `i` is the
/// largest `M` with `B(x_i, M) ⊆ window`.
pub fn containment_transform(window: &MetricBall) -> Result<Arc<Vec<u32>>> {
    let d = window.group().boundary_distance(window.radius())?;
    Ok(Arc::new(d.iter().map(|&v| v - 1).collect()))
}

/// Largest `M` such that `B(x, M) ⊆ window`: the distance from `x` to the
/// complement, minus one.
pub fn containment_radius(window: &MetricBall, x: &Element) -> Result<u32> {
    let i = window
        .index_of(x)
        .ok_or_else(|| Error::usage(format!("{x} is not in {window:?}")))?;
    let d = window.group().boundary_distance(window.radius())?;
    Ok(d[i] - 1)
}

/// Growth function `α_0..α_max` and sphere sizes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrowthTable {
    pub alpha: Vec<u64>,
    pub sphere: Vec<u64>,
}

pub fn growth_table(group: &Arc<Group>, max_radius: u32) -> Result<GrowthTable> {
    if max_radius < 1 {
        return Err(Error::usage("growth table needs max_radius >= 1"));
    }
    let region = group.region_for(max_radius)?;
    let alpha: Vec<u64> = (0..=max_radius).map(|r| region.ball_size(r) as u64).collect();
    let sphere = alpha
        .iter()
        .enumerate()
        .map(|(n, &a)| if n == 0 { a } else { a - alpha[n - 1] })
        .collect();
    Ok(GrowthTable { alpha, sphere })
}

impl GrowthTable {
    pub fn max_radius(&self) -> u32 {
        self.alpha.len() as u32 - 1
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["n", "alpha_n", "sphere_n"])?;
        for (n, (a, s)) in self.alpha.iter().zip(&self.sphere).enumerate() {
            out.write_record([n.to_string(), a.to_string(), s.to_string()])?;
        }
        out.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Fitted polynomial growth `α_n ≍ n^d` over a range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    /// Least-squares slope of `log α_n` against `log n`.
    pub degree: f64,
    pub degree_round: u32,
    /// Smallest `c ≥ 1` with `n^d / c ≤ α_n ≤ c n^d` on the range.
    pub constant: Q,
    pub range: (u32, u32),
}

pub fn fit_growth_degree(table: &GrowthTable, range: (u32, u32)) -> Result<GrowthFit> {
    let (lo, hi) = range;
    if lo < 1 || hi > table.max_radius() || hi < lo || hi - lo + 1 < 5 {
        return Err(Error::usage(format!(
            "fit range [{lo}, {hi}] must lie in [1, {}] and hold at least 5 points",
            table.max_radius()
        )));
    }
    let pts: Vec<(f64, f64)> = (lo..=hi)
        .map(|n| ((n as f64).ln(), (table.alpha[n as usize] as f64).ln()))
        .collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let degree = sxy / sxx;
    let degree_round = degree.round().max(0.0) as u32;
    let constant = envelope_constant(table, range, degree_round);
    Ok(GrowthFit {
        degree,
        degree_round,
        constant: Q(constant),
        range,
    })
}

/// `max_n max(α_n / n^d, n^d / α_n)` over the range, at least 1.
pub fn envelope_constant(table: &GrowthTable, (lo, hi): (u32, u32), d: u32) -> Frac {
    let mut c = frac(1, 1);
    for n in lo..=hi {
        let a = table.alpha[n as usize] as u128;
        let p = (n as u128).pow(d);
        c = c.max(frac(a, p)).max(frac(p, a));
    }
    c
}
