use rayon::prelude::*;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::ball::MetricBall;
use crate::density::{BallRef, SubsetWindow};
use crate::error::{Error, Result};
use crate::group::{Element, Group};

/// Pair budget for [`difference_set`] when none is given.
pub const DEFAULT_PAIR_BUDGET: u64 = 50_000_000;

/// `D_m(A) = {g : #{(a, b) ∈ (A ∩ window)² : a⁻¹b = g} ≥ m}` with all counts.
#[derive(Clone, Debug, Serialize)]
pub struct DifferenceSet {
    pub m: u64,
    pub window: BallRef,
    pub pairs: u64,
    /// Sorted by element.
    pub counts: Vec<(Element, u64)>,
    /// Sorted by element.
    pub members: Vec<Element>,
    #[serde(skip)]
    group: Option<Arc<Group>>,
}

impl DifferenceSet {
    pub fn count(&self, g: &Element) -> u64 {
        self.counts
            .binary_search_by(|(h, _)| h.cmp(g))
            .map_or(0, |i| self.counts[i].1)
    }

    pub fn is_member(&self, g: &Element) -> bool {
        self.members.binary_search(g).is_ok()
    }
}

pub fn difference_set(a: &SubsetWindow, m: u64, pair_budget: u64) -> Result<DifferenceSet> {
    if m < 2 {
        return Err(Error::usage(format!("multiplicity threshold must be at least 2, got {m}")));
    }
    let pairs = (a.len() as u64).saturating_mul(a.len() as u64);
    if pairs > pair_budget {
        return Err(Error::capability(format!(
            "{pairs} pairs exceed the budget of {pair_budget}; subsample the set (results would not be exact)"
        )));
    }
    let group = a.group().clone();
    let members = a.members();
    let inverses: Vec<Element> = members.iter().map(|x| group.inverse(x)).collect();
    let merged = inverses
        .par_iter()
        .fold(FxHashMap::default, |mut acc: FxHashMap<Element, u64>, ai| {
            for b in &members {
                *acc.entry(group.multiply(ai, b)).or_default() += 1;
            }
            acc
        })
        .reduce(FxHashMap::default, |mut x, y| {
            for (g, c) in y {
                *x.entry(g).or_default() += c;
            }
            x
        });
    let mut counts: Vec<(Element, u64)> = merged.into_iter().collect();
    counts.par_sort_unstable_by(|x, y| x.0.cmp(&y.0));
    let members = counts.iter().filter(|(_, c)| *c >= m).map(|(g, _)| g.clone()).collect();
    Ok(DifferenceSet {
        m,
        window: BallRef::of(a.window()),
        pairs,
        counts,
        members,
        group: Some(group),
    })
}

/// Central elements of the window: everything for abelian groups, the
/// elements with vanishing non-central coordinates otherwise.
pub fn central_elements(window: &MetricBall) -> Vec<Element> {
    let g = window.group();
    window.elements().filter(|x| g.is_central(x)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CenterCheck {
    pub r: u32,
    pub checked: usize,
    pub passed: bool,
    /// Supplied elements `g` with `B(g, r) ∩ D = ∅`, in input order.
    pub failures: Vec<Element>,
}

pub fn center_syndetic_check(d: &DifferenceSet, r: u32, centrals: &[Element]) -> Result<CenterCheck> {
    let group = d.group.as_ref().expect("difference sets carry their group");
    let members: FxHashSet<&Element> = d.members.iter().collect();
    let ball = crate::ball::enumerate_ball(group, &group.identity(), r)?;
    let offsets: Vec<Element> = ball.elements().collect();
    let failures: Vec<Element> = centrals
        .par_iter()
        .filter(|g| !offsets.iter().any(|z| members.contains(&group.multiply(g, z))))
        .cloned()
        .collect();
    Ok(CenterCheck {
        r,
        checked: centrals.len(),
        passed: failures.is_empty(),
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ball::enumerate_ball;
    use crate::density::Provenance;

    fn set(spec: &str, r: u32, pred: impl Fn(&Element) -> bool + Sync) -> SubsetWindow {
        let g = Group::parse(spec).unwrap();
        SubsetWindow::from_predicate(enumerate_ball(&g, &g.identity(), r).unwrap(), Provenance::adhoc(), pred)
    }

    #[test]
    fn evens_on_a_line() {
        let a = set("Z", 100, |x| x.0[0] % 2 == 0);
        let d = difference_set(&a, 3, DEFAULT_PAIR_BUDGET).unwrap();
        // 101 evens in [-100, 100]; the difference 2j is hit 101 - |j| times.
        for (g, c) in &d.counts {
            let v = g.0[0];
            assert_eq!(v % 2, 0);
            assert_eq!(*c, 101 - (v / 2).unsigned_abs());
        }
        let expect: Vec<Element> = (-98..=98).map(|j| Element::new(&[2 * j])).collect();
        assert_eq!(d.members, expect);
        let centrals = central_elements(a.window());
        let check = center_syndetic_check(&d, 1, &centrals).unwrap();
        assert!(check.passed);
        assert_eq!(check.checked, 201);
    }

    #[test]
    fn singleton_has_only_the_identity() {
        let a = set("H3", 3, |x| x.0.as_slice() == [1, 1, 0]);
        let d = difference_set(&a, 2, DEFAULT_PAIR_BUDGET).unwrap();
        assert_eq!(d.counts, vec![(Element::new(&[0, 0, 0]), 1)]);
        assert!(d.members.is_empty());
    }

    #[test]
    fn counts_are_symmetric_and_exact() {
        let a = set("H3", 3, |x| (x.0[0] * 3 + x.0[1] * 5 + x.0[2]).rem_euclid(4) == 1);
        let d = difference_set(&a, 2, DEFAULT_PAIR_BUDGET).unwrap();
        let g = a.group();
        let members = a.members();
        for (h, c) in &d.counts {
            assert_eq!(d.count(&g.inverse(h)), *c);
            let brute = members
                .iter()
                .flat_map(|x| members.iter().map(move |y| (x, y)))
                .filter(|(x, y)| g.multiply(&g.inverse(x), y) == *h)
                .count() as u64;
            assert_eq!(brute, *c);
        }
        assert_eq!(d.counts.iter().map(|(_, c)| c).sum::<u64>(), d.pairs);
    }

    #[test]
    fn budget_and_threshold_errors() {
        let a = set("Z^2", 10, |_| true);
        assert!(difference_set(&a, 3, 1000).unwrap_err().is_capability());
        assert!(matches!(difference_set(&a, 1, DEFAULT_PAIR_BUDGET), Err(Error::Usage(_))));
    }

    #[test]
    fn heisenberg_centre_is_the_c_axis() {
        let g = Group::parse("H3").unwrap();
        let w = enumerate_ball(&g, &g.identity(), 6).unwrap();
        let centrals = central_elements(&w);
        assert!(centrals.iter().all(|x| x.0[0] == 0 && x.0[1] == 0));
        // xyx⁻¹y⁻¹ = (0,0,1) and x²yx⁻²y⁻¹ = (0,0,2) have lengths 4 and 6;
        // (0,0,3) needs 8.
        assert_eq!(centrals.len(), 5);
        g.ensure_table(8).unwrap();
        assert_eq!(g.word_length(&Element::new(&[0, 0, 3])).unwrap().0, 8);
    }
}
