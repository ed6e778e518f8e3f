use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ball::enumerate_ball;
use crate::density::SubsetWindow;
use crate::error::{Error, Result};
use crate::group::Element;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NathansonOptions {
    /// Shifts are drawn from `B(e, shift_radius) \ {e}`.
    pub shift_radius: u32,
    /// Results with `|B ∩ window|` below this are discarded.
    pub floor: usize,
}

impl Default for NathansonOptions {
    fn default() -> Self {
        NathansonOptions {
            shift_radius: 4,
            floor: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NathansonResult {
    /// `t_1, …, t_n` in the order chosen.
    pub shifts: Vec<Element>,
    /// `C = {t_i⁻¹}` in shift order.
    pub c: Vec<Element>,
    /// `B_n` in canonical window order.
    pub b: Vec<Element>,
    /// `|B_m ∩ window|` after each step.
    pub sizes: Vec<usize>,
}

/// Greedy chain `B_0 = A`, `B_m = B_{m-1} ∩ B_{m-1} t_m`, each `t_m`
/// maximising `|B_m|` (central shifts first on ties, then canonical order).
/// Every element of `B_n · C` is re-verified to lie in `A`.
pub fn nathanson_search(a: &SubsetWindow, n: usize, opts: &NathansonOptions) -> Result<Option<NathansonResult>> {
    if n == 0 {
        return Err(Error::usage("nathanson_search needs n >= 1"));
    }
    let window = a.window();
    let group = window.group();
    let pool = enumerate_ball(group, &group.identity(), opts.shift_radius)?;
    let mut candidates: Vec<Element> = pool.elements().skip(1).collect();
    candidates.sort_by_key(|t| !group.is_central(t));
    let mut current: Vec<bool> = a.mask().to_vec();
    let mut shifts: Vec<Element> = Vec::new();
    let mut sizes = Vec::new();
    for _ in 0..n {
        let members: Vec<usize> = (0..current.len()).filter(|&i| current[i]).collect();
        let scored: Vec<(usize, Vec<usize>)> = candidates
            .par_iter()
            .map(|t| {
                if shifts.contains(t) {
                    return (0, Vec::new());
                }
                let t_inv = group.inverse(t);
                let kept: Vec<usize> = members
                    .iter()
                    .copied()
                    .filter(|&i| {
                        let y = group.multiply(&window.element(i), &t_inv);
                        window.index_of(&y).is_some_and(|j| current[j])
                    })
                    .collect();
                (kept.len(), kept)
            })
            .collect();
        let Some((pick, (size, kept))) = scored
            .into_iter()
            .enumerate()
            .max_by(|(i, x), (j, y)| x.0.cmp(&y.0).then(j.cmp(i)))
        else {
            return Ok(None);
        };
        if size == 0 {
            return Ok(None);
        }
        current = vec![false; current.len()];
        for i in kept {
            current[i] = true;
        }
        shifts.push(candidates[pick].clone());
        sizes.push(size);
    }
    let b: Vec<Element> = (0..current.len()).filter(|&i| current[i]).map(|i| window.element(i)).collect();
    if b.len() < opts.floor {
        return Ok(None);
    }
    let c: Vec<Element> = shifts.iter().map(|t| group.inverse(t)).collect();
    for x in &b {
        for y in &c {
            let p = group.multiply(x, y);
            if !a.contains(&p) {
                return Err(Error::Validation {
                    path: "nathanson_search".into(),
                    reason: format!("{x}·{y} = {p} is not in the set"),
                });
            }
        }
    }
    Ok(Some(NathansonResult { shifts, c, b, sizes }))
}
