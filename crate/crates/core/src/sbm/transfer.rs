//! Moving density between two word metrics on the same group.
//!
//! With `d_S ≤ K d_{S'}` and `d_{S'} ≤ K d_S`, an `S`-ball `J = B_S(g, N)`
//! contains `I' = B_{S'}(g, ⌊N/K⌋)`. Points of `J` within `S`-distance `r` of
//! `A ∩ J` are within `S'`-distance `K r`, so the `S'`-density `μ'` of `A ∩ J`
//! on `I'` satisfies `μ' ≥ 1 - (1 - θ) / τ` where `θ` is the `S`-density on
//! `J` and `τ = |I'| / |J|`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::ball::{containment_transform, enumerate_ball, envelope_constant, growth_table, multi_source_bfs};
use crate::density::{neighborhood_density, BallRef, SubsetWindow};
use crate::error::{Error, Result};
use crate::frac::{ceil_mul, frac, Frac, Q};
use crate::group::{Element, Group, WordLength};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferPlan {
    /// Radii `N` of the sampled `S`-balls.
    pub radii: Vec<u32>,
    #[serde(default)]
    pub max_centers: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    pub rho: Q,
    /// Range for both growth envelopes.
    pub fit_range: (u32, u32),
    /// `K` is measured on `B_S(e, k_radius)`.
    pub k_radius: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferWindow {
    pub ball: BallRef,
    pub inner_radius: u32,
    pub theta: Q,
    pub tau: Q,
    pub mu_prime: Q,
    /// `I' ⊆ J` checked element by element.
    pub contained: bool,
    /// `τ ≥ c'/(cK)`.
    pub tau_bound_holds: bool,
    /// `μ' ≥ 1 - (1 - θ)/τ`.
    pub inequality_holds: bool,
    /// When `θ > 1 - c'/(cK)`: whether `μ' > 0`.
    pub positive_transfer: Option<bool>,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub s: String,
    pub s_prime: String,
    pub k: u32,
    /// Largest observed length ratio, both directions.
    pub k_ratio: Q,
    pub k_sample: usize,
    pub degree: u32,
    /// Envelope constant of the `S` growth function.
    pub c_s: Q,
    /// Envelope constant of the `S'` growth function.
    pub c_s_prime: Q,
    /// `c'/(cK)` with `c' = 1/c_s_prime`, `c = c_s`.
    pub bound: Q,
    /// `c'/(cK^d)`, the form the ball-size estimate yields directly.
    pub bound_kd: Q,
    pub rho: Q,
    pub windows: Vec<TransferWindow>,
    pub all_hold: bool,
}

/// Word length, growing the distance table on demand.
fn length_growing(group: &Group, g: &Element) -> Result<WordLength> {
    loop {
        match group.word_length(g) {
            Err(Error::OutOfRange { required, .. }) => {
                group.ensure_table(required)?;
            }
            other => return other,
        }
    }
}

/// Measured bi-Lipschitz ratio between two generating sets on `B_S(e, r)`.
pub fn lipschitz_ratio(s: &Arc<Group>, s_prime: &Arc<Group>, r: u32) -> Result<(Frac, usize)> {
    if s.dim() != s_prime.dim() {
        return Err(Error::usage(format!(
            "{} and {} do not share coordinates",
            s.name(),
            s_prime.name()
        )));
    }
    let ball = enumerate_ball(s, &s.identity(), r)?;
    let mut worst = frac(1, 1);
    for i in 1..ball.len() {
        let g = ball.element(i);
        let a = ball.dist(i) as u128;
        let b = length_growing(s_prime, &g)?.0 as u128;
        worst = worst.max(frac(a, b)).max(frac(b, a));
    }
    Ok((worst, ball.len() - 1))
}

pub fn density_transfer_check(a: &SubsetWindow, s_prime: &Arc<Group>, plan: &TransferPlan) -> Result<TransferReport> {
    let window = a.window();
    let s = window.group();
    let rho = plan.rho.0;
    let (ratio, k_sample) = lipschitz_ratio(s, s_prime, plan.k_radius)?;
    let k = ratio.ceil().to_integer() as u32;
    let (lo, hi) = plan.fit_range;
    if lo < 1 || hi < lo {
        return Err(Error::usage(format!("invalid fit range [{lo}, {hi}]")));
    }
    let table = growth_table(s, hi)?;
    let table_prime = growth_table(s_prime, hi)?;
    let d = crate::ball::fit_growth_degree(&table, (lo, hi))?.degree_round;
    let c_s = envelope_constant(&table, (lo, hi), d);
    let c_sp = envelope_constant(&table_prime, (lo, hi), d);
    let bound = Frac::from_integer(1) / (c_s * c_sp * Frac::from_integer(k as u128));
    let bound_kd = Frac::from_integer(1) / (c_s * c_sp * Frac::from_integer((k as u128).pow(d)));

    let contain = containment_transform(window)?;
    let mut jobs = Vec::new();
    for (idx, &n) in plan.radii.iter().enumerate() {
        let mut centers: Vec<usize> = (0..window.len()).filter(|&i| contain[i] >= n).collect();
        if let Some(keep) = plan.max_centers.filter(|&m| m < centers.len()) {
            centers.shuffle(&mut ChaCha8Rng::seed_from_u64(plan.seed.wrapping_add(idx as u64)));
            centers.truncate(keep);
            centers.sort_unstable();
        }
        jobs.extend(centers.into_iter().map(|c| (c, n)));
    }
    let one = Frac::from_integer(1);
    let windows = jobs
        .into_par_iter()
        .map(|(c, n)| -> Result<TransferWindow> {
            let g = window.element(c);
            let j = enumerate_ball(s, &g, n)?;
            let inner = n / k;
            let r = ceil_mul(&rho, n);
            let outer = inner + k * r;
            let theta = neighborhood_density(&a.restrict(&j), &rho)?;
            let region = s_prime.region_for(outer)?;
            let inner_len = region.ball_size(inner);
            let limit = region.ball_size(outer);
            let mut contained = true;
            let mut sources = Vec::new();
            for z in 0..limit {
                let y = s_prime.multiply(&g, region.element(z));
                let in_j = j.contains(&y);
                if z < inner_len && !in_j {
                    contained = false;
                }
                if in_j && a.contains(&y) {
                    sources.push(z);
                }
            }
            let dist = multi_source_bfs(&region, limit, sources);
            let near = dist[..inner_len].iter().filter(|&&v| v <= k * r).count();
            let tau = frac(inner_len as u128, j.len() as u128);
            let mu = frac(near as u128, inner_len as u128);
            // μ' ≥ 1 - (1-θ)/τ  ⇔  μ'τ + 1 ≥ τ + θ.
            let inequality_holds = mu * tau + one >= tau + theta;
            let tau_bound_holds = tau >= bound;
            let positive_transfer = (theta + bound > one).then_some(near > 0);
            Ok(TransferWindow {
                ball: BallRef { center: g, radius: n },
                inner_radius: inner,
                theta: Q(theta),
                tau: Q(tau),
                mu_prime: Q(mu),
                contained,
                tau_bound_holds,
                inequality_holds,
                positive_transfer,
                holds: contained && tau_bound_holds && inequality_holds && positive_transfer != Some(false),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TransferReport {
        s: s.name().to_string(),
        s_prime: s_prime.name().to_string(),
        k,
        k_ratio: Q(ratio),
        k_sample,
        degree: d,
        c_s: Q(c_s),
        c_s_prime: Q(c_sp),
        bound: Q(bound),
        bound_kd: Q(bound_kd),
        rho: plan.rho,
        all_hold: !windows.is_empty() && windows.iter().all(|w| w.holds),
        windows,
    })
}
