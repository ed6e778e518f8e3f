//! Equal-radius ball families with small gaps and their common translates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ball::{containment_transform, enumerate_ball, MetricBall, NONE};
use crate::density::{gap_fraction, subball_best_empty, subball_indices, BallRef, SubsetWindow};
use crate::error::{Error, Result};
use crate::frac::{Frac, Q};
use crate::group::Element;

/// Balls `J_i = B(a_i, R)` with sets `A_i` such that `g_{A_i}(J_i) ≤ δ`.
#[derive(Clone, Debug)]
pub struct DeltaConfiguration {
    balls: Vec<MetricBall>,
    sets: Vec<SubsetWindow>,
    delta: Frac,
}

impl DeltaConfiguration {
    pub fn new(balls: Vec<MetricBall>, sets: Vec<SubsetWindow>, delta: Frac) -> Result<Self> {
        if balls.is_empty() || balls.len() != sets.len() {
            return Err(Error::usage(format!(
                "a configuration needs matching nonempty ball and set lists, got {} and {}",
                balls.len(),
                sets.len()
            )));
        }
        let radius = balls[0].radius();
        if let Some(b) = balls.iter().find(|b| b.radius() != radius) {
            return Err(Error::usage(format!("all balls need radius {radius}, {b:?} differs")));
        }
        for (i, (j, a)) in balls.iter().zip(&sets).enumerate() {
            let gap = gap_fraction(&a.restrict(j))?.gap.0;
            if gap > delta {
                return Err(Error::usage(format!(
                    "ball {i} {j:?} has gap {} above delta {}",
                    Q(gap),
                    Q(delta)
                )));
            }
        }
        Ok(DeltaConfiguration { balls, sets, delta })
    }

    pub fn radius(&self) -> u32 {
        self.balls[0].radius()
    }

    pub fn balls(&self) -> &[MetricBall] {
        &self.balls
    }

    pub fn sets(&self) -> &[SubsetWindow] {
        &self.sets
    }

    pub fn delta(&self) -> Frac {
        self.delta
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrongSubconfigWitness {
    pub c: Element,
    pub w: u32,
    /// `hits[i] ∈ A_i ∩ B(a_i c, w)`.
    pub hits: Vec<Element>,
}

/// First `c ∈ B(e, R)` in canonical order with `A_i ∩ B(a_i c, w) ≠ ∅`
/// for every `i`; the hit is the first such element in ball order.
pub fn strong_subconfig_search(config: &DeltaConfiguration, w: u32) -> Result<Option<StrongSubconfigWitness>> {
    let group = config.balls[0].group().clone();
    let shifts = enumerate_ball(&group, &group.identity(), config.radius())?;
    let near = enumerate_ball(&group, &group.identity(), w)?;
    'outer: for c in shifts.elements() {
        let mut hits = Vec::with_capacity(config.balls.len());
        for (j, a) in config.balls.iter().zip(&config.sets) {
            let p = group.multiply(j.center(), &c);
            match near.translate(&p).elements().find(|q| a.contains(q)) {
                Some(q) => hits.push(q),
                None => continue 'outer,
            }
        }
        let witness = StrongSubconfigWitness { c, w, hits };
        verify_witness(config, &witness)?;
        return Ok(Some(witness));
    }
    Ok(None)
}

fn verify_witness(config: &DeltaConfiguration, wit: &StrongSubconfigWitness) -> Result<()> {
    let group = config.balls[0].group();
    for ((j, a), hit) in config.balls.iter().zip(&config.sets).zip(&wit.hits) {
        let around = enumerate_ball(group, &group.multiply(j.center(), &wit.c), wit.w)?;
        if !a.contains(hit) || !around.contains(hit) {
            return Err(Error::Validation {
                path: "strong_subconfig_search".into(),
                reason: format!("hit {hit} failed re-verification"),
            });
        }
    }
    Ok(())
}

/// How `w_estimate` samples configurations inside one window.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConfigSampler {
    /// Configurations to collect.
    pub count: usize,
    /// Balls per configuration.
    pub balls: usize,
    pub radii: Vec<u32>,
    #[serde(default)]
    pub seed: u64,
    /// Draws before giving up; `50 · count` when absent.
    #[serde(default)]
    pub max_draws: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum WEstimate {
    Estimate {
        w: u32,
        sampled: usize,
        /// A configuration attaining `w`.
        worst: Vec<BallRef>,
    },
    Vacuous {
        draws: usize,
    },
}

/// Largest over sampled `δ`-configurations of the least `w` admitting a
/// strong subconfiguration, all sets being `A` itself.
pub fn w_estimate(a: &SubsetWindow, delta: &Frac, sampler: &ConfigSampler) -> Result<WEstimate> {
    if sampler.balls == 0 || sampler.radii.is_empty() {
        return Err(Error::usage("sampler needs at least one ball and one radius"));
    }
    let window = a.window();
    let group = window.group();
    let dist = a.distance_transform()?;
    let contain = containment_transform(window)?;
    let region = window.region_at_least(window.radius())?;
    let eligible: Vec<Vec<usize>> = sampler
        .radii
        .iter()
        .map(|&r| (0..window.len()).filter(|&i| contain[i] >= r).collect())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(sampler.seed);
    let draws = sampler.max_draws.unwrap_or(50 * sampler.count);
    let mut best: Option<(u32, Vec<BallRef>)> = None;
    let mut sampled = 0;
    let mut drawn = 0;
    while sampled < sampler.count && drawn < draws {
        drawn += 1;
        let k = rng.gen_range(0..sampler.radii.len());
        let r = sampler.radii[k];
        if eligible[k].is_empty() {
            continue;
        }
        let centers: Vec<usize> = (0..sampler.balls)
            .map(|_| eligible[k][rng.gen_range(0..eligible[k].len())])
            .collect();
        let mut small = true;
        for &c in &centers {
            let idx = subball_indices(window, c, r)?.expect("eligible centres keep the ball inside");
            let empty = subball_best_empty(group, &dist, &idx, r)?
                .map_or(0, |(_, m)| region.ball_size(m) as u128);
            if empty * delta.denom() > delta.numer() * idx.len() as u128 {
                small = false;
                break;
            }
        }
        if !small {
            continue;
        }
        sampled += 1;
        let shifts = enumerate_ball(group, &group.identity(), r)?;
        let w = shifts
            .elements()
            .map(|c| {
                centers
                    .iter()
                    .map(|&i| {
                        let p = group.multiply(&window.element(i), &c);
                        window.index_of(&p).map_or(NONE, |j| dist[j])
                    })
                    .max()
                    .unwrap_or(0)
            })
            .min()
            .unwrap_or(NONE);
        if best.as_ref().map_or(true, |(b, _)| w > *b) {
            let refs = centers
                .iter()
                .map(|&i| BallRef {
                    center: window.element(i),
                    radius: r,
                })
                .collect();
            best = Some((w, refs));
        }
    }
    Ok(match best {
        Some((w, worst)) => WEstimate::Estimate { w, sampled, worst },
        None => WEstimate::Vacuous { draws: drawn },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::Provenance;
    use crate::frac::frac;
    use crate::group::Group;

    fn evens(center: i64, radius: u32) -> (MetricBall, SubsetWindow) {
        let g = Group::parse("Z").unwrap();
        let ball = enumerate_ball(&g, &Element::new(&[center]), radius).unwrap();
        let window = enumerate_ball(&g, &g.identity(), 40).unwrap();
        (ball, SubsetWindow::from_predicate(window, Provenance::adhoc(), |x| x.0[0] % 2 == 0))
    }

    #[test]
    fn evens_with_odd_offset() {
        let (j1, a1) = evens(0, 10);
        let (j2, a2) = evens(7, 10);
        let config = DeltaConfiguration::new(vec![j1, j2], vec![a1, a2], frac(1, 10)).unwrap();
        assert!(strong_subconfig_search(&config, 0).unwrap().is_none());
        let wit = strong_subconfig_search(&config, 1).unwrap().unwrap();
        assert_eq!(wit.c, Element::new(&[0]));
        assert_eq!(wit.hits, vec![Element::new(&[0]), Element::new(&[6])]);
    }

    #[test]
    fn full_balls_need_no_radius() {
        let g = Group::parse("H3").unwrap();
        let window = enumerate_ball(&g, &g.identity(), 6).unwrap();
        let full = SubsetWindow::full(window);
        let j1 = enumerate_ball(&g, &Element::new(&[1, 0, 0]), 2).unwrap();
        let j2 = enumerate_ball(&g, &Element::new(&[0, -1, 1]), 2).unwrap();
        let config = DeltaConfiguration::new(vec![j1, j2], vec![full.clone(), full], frac(1, 100)).unwrap();
        let wit = strong_subconfig_search(&config, 0).unwrap().unwrap();
        assert_eq!(wit.c, g.identity());
        assert_eq!(wit.hits, vec![Element::new(&[1, 0, 0]), Element::new(&[0, -1, 1])]);
    }

    #[test]
    fn single_ball_matches_brute_force() {
        // The first shift in canonical order is (-1,0); its radius-1 ball
        // around (0,1) meets the lattice at the origin.
        let g = Group::parse("Z^2").unwrap();
        let window = enumerate_ball(&g, &g.identity(), 10).unwrap();
        let a = SubsetWindow::from_predicate(window, Provenance::adhoc(), |x| x.0[0] % 3 == 0 && x.0[1] % 3 == 0);
        let j = enumerate_ball(&g, &Element::new(&[1, 1]), 2).unwrap();
        let config = DeltaConfiguration::new(vec![j], vec![a.clone()], frac(1, 2)).unwrap();
        let wit = strong_subconfig_search(&config, 1).unwrap().unwrap();
        assert_eq!(wit.c, Element::new(&[-1, 0]));
        assert_eq!(wit.hits, vec![Element::new(&[0, 0])]);
    }

    #[test]
    fn rejects_wide_gaps_and_mixed_radii() {
        let (j1, a1) = evens(0, 10);
        let (j2, a2) = evens(7, 9);
        assert!(DeltaConfiguration::new(vec![j1.clone(), j2], vec![a1.clone(), a2], frac(1, 2)).is_err());
        let g = Group::parse("Z").unwrap();
        let empty = SubsetWindow::empty(enumerate_ball(&g, &g.identity(), 40).unwrap());
        assert!(DeltaConfiguration::new(vec![j1], vec![empty], frac(1, 2)).is_err());
    }

    #[test]
    fn w_for_full_and_evens() {
        let g = Group::parse("Z").unwrap();
        let window = enumerate_ball(&g, &g.identity(), 30).unwrap();
        let sampler = ConfigSampler {
            count: 20,
            balls: 3,
            radii: vec![4, 8],
            seed: 11,
            max_draws: None,
        };
        let full = SubsetWindow::full(window.clone());
        assert!(matches!(w_estimate(&full, &frac(1, 10), &sampler).unwrap(), WEstimate::Estimate { w: 0, sampled: 20, .. }));
        let evens = SubsetWindow::from_predicate(window.clone(), Provenance::adhoc(), |x| x.0[0] % 2 == 0);
        assert!(matches!(w_estimate(&evens, &frac(1, 10), &sampler).unwrap(), WEstimate::Estimate { w: 1, .. }));
        let empty = SubsetWindow::empty(window);
        assert_eq!(w_estimate(&empty, &frac(1, 10), &sampler).unwrap(), WEstimate::Vacuous { draws: 1000 });
    }
}
