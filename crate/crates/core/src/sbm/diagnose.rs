use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ball::{containment_transform, enumerate_ball};
use crate::density::{gap_fraction, neighborhood_density, BallRef, SubsetWindow};
use crate::error::{Error, Result};
use crate::frac::{frac, Frac, Q};

/// Which subballs `J = B(x, R) ⊆ window` to examine.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubballPlan {
    pub radii: Vec<u32>,
    /// Sample this many centres per radius; all centres when absent.
    #[serde(default)]
    pub max_centers: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

pub fn default_delta_grid() -> Vec<Frac> {
    vec![frac(1, 100), frac(1, 50), frac(1, 20), frac(1, 10), frac(1, 5), frac(1, 2), frac(1, 1)]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubballSample {
    pub ball: BallRef,
    pub gap: Q,
    pub lambda_hat: Q,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisRow {
    pub eps: Q,
    /// Largest grid value with no violation; the grid minimum when collapsed.
    pub delta_hat: Q,
    /// Even the smallest grid value admits a violating subball.
    pub collapsed: bool,
    /// Violating subball of smallest gap, first in plan order on ties.
    pub violating: Option<SubballSample>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BmDiagnosis {
    pub rho: Q,
    pub grid: Vec<Q>,
    pub sampled: usize,
    pub rows: Vec<DiagnosisRow>,
}

/// Gap and density of every planned subball, in (radius, centre) order.
pub fn sample_subballs(a: &SubsetWindow, plan: &SubballPlan, rho: &Frac) -> Result<Vec<SubballSample>> {
    let window = a.window();
    let contain = containment_transform(window)?;
    let mut balls = Vec::new();
    for (k, &r) in plan.radii.iter().enumerate() {
        let mut centers: Vec<usize> = (0..window.len()).filter(|&i| contain[i] >= r).collect();
        if let Some(keep) = plan.max_centers.filter(|&m| m < centers.len()) {
            centers.shuffle(&mut ChaCha8Rng::seed_from_u64(plan.seed.wrapping_add(k as u64)));
            centers.truncate(keep);
            centers.sort_unstable();
        }
        balls.extend(centers.into_iter().map(|c| (c, r)));
    }
    balls
        .into_par_iter()
        .map(|(c, r)| {
            let j = enumerate_ball(window.group(), &window.element(c), r)?;
            let sub = a.restrict(&j);
            Ok(SubballSample {
                ball: BallRef::of(&j),
                gap: gap_fraction(&sub)?.gap,
                lambda_hat: Q(neighborhood_density(&sub, rho)?),
            })
        })
        .collect()
}

/// For each `ε`, the largest grid `δ` such that every sampled `J` with
/// `g_A(J) ≤ δ` has `λ̂_J(A; ρ) ≥ 1 - ε`.
pub fn bm_diagnose(
    a: &SubsetWindow,
    eps_list: &[Frac],
    plan: &SubballPlan,
    rho: &Frac,
    grid: &[Frac],
) -> Result<BmDiagnosis> {
    if grid.is_empty() {
        return Err(Error::usage("delta grid is empty"));
    }
    let mut grid = grid.to_vec();
    grid.sort();
    grid.dedup();
    let samples = sample_subballs(a, plan, rho)?;
    let one = Frac::from_integer(1);
    let rows = eps_list
        .iter()
        .map(|eps| {
            let floor = if *eps >= one { Frac::from_integer(0) } else { one - eps };
            let violating = samples
                .iter()
                .filter(|s| s.lambda_hat.0 < floor)
                .min_by(|x, y| x.gap.cmp(&y.gap))
                .cloned();
            let ok: Vec<&Frac> = match &violating {
                Some(v) => grid.iter().filter(|d| **d < v.gap.0).collect(),
                None => grid.iter().collect(),
            };
            DiagnosisRow {
                eps: Q(*eps),
                delta_hat: Q(**ok.last().unwrap_or(&&grid[0])),
                collapsed: ok.is_empty(),
                violating,
            }
        })
        .collect();
    Ok(BmDiagnosis {
        rho: Q(*rho),
        grid: grid.into_iter().map(Q).collect(),
        sampled: samples.len(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::Provenance;
    use crate::group::Group;

    fn window(spec: &str, r: u32) -> crate::ball::MetricBall {
        let g = Group::parse(spec).unwrap();
        enumerate_ball(&g, &g.identity(), r).unwrap()
    }

    #[test]
    fn full_set_never_violates() {
        let a = SubsetWindow::full(window("Z^2", 8));
        let plan = SubballPlan {
            radii: vec![3, 5],
            max_centers: None,
            seed: 0,
        };
        let d = bm_diagnose(&a, &[frac(1, 10), frac(1, 2)], &plan, &frac(1, 5), &default_delta_grid()).unwrap();
        for row in &d.rows {
            assert_eq!(row.delta_hat, Q(frac(1, 1)));
            assert!(!row.collapsed && row.violating.is_none());
        }
        // Centres of radius-3 subballs fill B(0,5), radius-5 ones fill B(0,3).
        assert_eq!(d.sampled, 61 + 25);
    }

    #[test]
    fn single_point_violates() {
        let a = SubsetWindow::from_predicate(window("Z", 10), Provenance::adhoc(), |g| g.0[0] == 0);
        let plan = SubballPlan {
            radii: vec![10],
            max_centers: None,
            seed: 0,
        };
        let d = bm_diagnose(&a, &[frac(1, 2)], &plan, &frac(1, 10), &default_delta_grid()).unwrap();
        let row = &d.rows[0];
        // Only J = B(0,10): largest empty ball B(6,4) has 9 of 21 points and
        // the 1-neighbourhood of {0} covers 3 of 21.
        let v = row.violating.as_ref().unwrap();
        assert_eq!(v.gap, Q(frac(9, 21)));
        assert_eq!(v.lambda_hat, Q(frac(3, 21)));
        assert_eq!(row.delta_hat, Q(frac(1, 5)));
        assert!(!row.collapsed);
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = SubsetWindow::from_predicate(window("Z^2", 9), Provenance::adhoc(), |g| (g.0[0] + 2 * g.0[1]) % 3 == 0);
        let plan = SubballPlan {
            radii: vec![4],
            max_centers: Some(7),
            seed: 3,
        };
        let x = sample_subballs(&a, &plan, &frac(1, 4)).unwrap();
        let y = sample_subballs(&a, &plan, &frac(1, 4)).unwrap();
        assert_eq!(x.len(), 7);
        assert_eq!(x, y);
    }
}
