//! Acceptance suite: twelve end-to-end criteria, one PASS/FAIL line each.
//!
//! Run with `cargo test -p sbmkit --test acceptance -- --nocapture` to see the
//! table. Every criterion runs even when an earlier one fails; the test fails
//! at the end if any did.

use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sbmkit::frac::{frac, Frac};
use sbmkit::generators::{Pattern, SpoilerCenter, SpoilerSchedule};
use sbmkit::sbm::{
    center_syndetic_check, central_elements, density_transfer_check, difference_set, f_scan, nathanson_search,
    FMode, FOptions, FValue, NathansonOptions, Thresholds, TransferPlan, Verdict, DEFAULT_PAIR_BUDGET,
};
use sbmkit::{
    doubling_table, emit_report, enumerate_ball, fit_growth_degree, gap_fraction, generate, growth_table,
    reverse_bm_check, run_experiment, ss_ratio_table, Element, ExperimentConfig, GeneratorSpec, Group, MetricBall,
    Provenance, SubsetWindow, Q,
};

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn origin_window(spec: &str, r: u32) -> (Arc<Group>, MetricBall) {
    let g = Group::parse(spec).unwrap();
    let w = enumerate_ball(&g, &g.identity(), r).unwrap();
    (g, w)
}

fn growth_exactness() -> Outcome {
    let start = Instant::now();
    let g = Group::parse("Z^2").map_err(err)?;
    let t = growth_table(&g, 50).map_err(err)?;
    let elapsed = start.elapsed();
    for n in 0..=50i64 {
        let lattice = (-n..=n)
            .flat_map(|x| (-n..=n).map(move |y| (x, y)))
            .filter(|(x, y)| x.abs() + y.abs() <= n)
            .count() as u64;
        let closed = (2 * n * n + 2 * n + 1) as u64;
        if t.alpha[n as usize] != lattice || lattice != closed {
            return Err(format!("n = {n}: table {} lattice {lattice} closed form {closed}", t.alpha[n as usize]));
        }
    }
    ensure(
        elapsed < Duration::from_secs(1),
        format!("alpha_0..alpha_50 exact, alpha_50 = {}, {elapsed:.2?}", t.alpha[50]),
    )
}

fn heisenberg_degree() -> Outcome {
    let start = Instant::now();
    let g = Group::parse("H3").map_err(err)?;
    let t = growth_table(&g, 25).map_err(err)?;
    let elapsed = start.elapsed();
    let fit = fit_growth_degree(&t, (10, 25)).map_err(err)?;
    ensure(
        (3.6..=4.4).contains(&fit.degree) && elapsed < Duration::from_secs(60),
        format!("d_hat = {:.4} on [10, 25], alpha_25 = {}, BFS {elapsed:.2?}", fit.degree, t.alpha[25]),
    )
}

fn envelope() -> Outcome {
    let mut details = Vec::new();
    for (spec, max, range) in [("Z", 50, (5, 50)), ("Z^2", 50, (5, 50)), ("H3", 25, (10, 25))] {
        let g = Group::parse(spec).map_err(err)?;
        let t = growth_table(&g, max).map_err(err)?;
        let fit = fit_growth_degree(&t, range).map_err(err)?;
        let c = fit.constant.0;
        let d = fit.degree_round;
        for n in range.0..=range.1 {
            let p = frac((n as u128).pow(d), 1);
            let a = frac(t.alpha[n as usize] as u128, 1);
            if p / c > a || a > c * p {
                return Err(format!("{spec}: envelope fails at n = {n}"));
            }
        }
        if c >= frac(10, 1) {
            return Err(format!("{spec}: c_hat = {} is not below 10", Q(c)));
        }
        details.push(format!("{spec} d = {d} c_hat = {:.3}", sbmkit::frac::to_f64(&c)));
    }
    Ok(details.join(", "))
}

fn sphere_ratios() -> Outcome {
    let z2 = growth_table(&Group::parse("Z^2").map_err(err)?, 50).map_err(err)?;
    let ss = ss_ratio_table(&z2, Some(2)).map_err(err)?;
    if let Some(r) = ss.rows.iter().find(|r| r.ratio != Q(frac(4, 1))) {
        return Err(format!("Z^2 ratio at n = {} is {}", r.n, r.ratio));
    }
    let h = growth_table(&Group::parse("H3").map_err(err)?, 25).map_err(err)?;
    let ratios: Vec<Frac> = (10..=25u128).map(|n| frac(h.sphere[n as usize] as u128, n.pow(3))).collect();
    let max = *ratios.iter().max().unwrap();
    let min = *ratios.iter().min().unwrap();
    let spread = max / min;
    ensure(
        spread < frac(3, 1),
        format!("Z^2 ratio 4 on [1, 50]; H3 |S(n)|/n^3 max/min = {:.4} on [10, 25]", sbmkit::frac::to_f64(&spread)),
    )
}

fn doubling() -> Outcome {
    let mut details = Vec::new();
    let mut failures = Vec::new();
    for (spec, max, range) in [("Z", 50, (5, 50)), ("Z^2", 50, (5, 50)), ("H3", 25, (10, 25))] {
        let g = Group::parse(spec).map_err(err)?;
        let t = growth_table(&g, max).map_err(err)?;
        let fit = fit_growth_degree(&t, range).map_err(err)?;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ball = enumerate_ball(&g, &g.identity(), 10).map_err(err)?;
        let centers: Vec<Element> = (0..3).map(|_| ball.element(rng.gen_range(0..ball.len()))).collect();
        let radii: Vec<u32> = (1..=max).collect();
        let table = doubling_table(&g, &centers, &radii, &fit.constant.0, fit.degree_round).map_err(err)?;
        let slack = frac(6 * (2u128.pow(fit.degree_round) + 1), 5);
        let mut over: Vec<u32> = table.rows.iter().filter(|r| r.ratio.0 >= slack).map(|r| r.radius).collect();
        over.sort_unstable();
        over.dedup();
        let max_ratio = sbmkit::frac::to_f64(&table.max_ratio.0);
        if !table.within_bound {
            failures.push(format!("{spec}: max ratio {max_ratio:.3} exceeds the proof bound {}", table.bound));
        }
        if !over.is_empty() {
            failures.push(format!(
                "{spec}: ratio >= {:.1} at radii {over:?} (max {max_ratio:.3})",
                sbmkit::frac::to_f64(&slack)
            ));
        }
        details.push(format!("{spec} max {max_ratio:.3} vs slack {:.1}", sbmkit::frac::to_f64(&slack)));
    }
    if failures.is_empty() {
        Ok(format!("proof bound holds; {}", details.join(", ")))
    } else {
        Err(failures.join("; "))
    }
}

/// Random instances: a window radius and a set drawn at a random density.
fn instances(spec: &str, radii: std::ops::RangeInclusive<u32>, count: usize, seed: u64) -> Vec<SubsetWindow> {
    let g = Group::parse(spec).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let r = rng.gen_range(radii.clone());
            let w = enumerate_ball(&g, &g.identity(), r).unwrap();
            let p: f64 = match rng.gen_range(0..4) {
                0 => rng.gen_range(0.0..0.05),
                1 => rng.gen_range(0.0..0.3),
                _ => rng.gen_range(0.0..1.0),
            };
            let mask = (0..w.len()).map(|_| rng.gen::<f64>() < p).collect();
            SubsetWindow::from_mask(w, mask, Provenance::adhoc()).unwrap()
        })
        .collect()
}

/// Pairwise word distances on the window, read off the length table.
fn pairwise(w: &MetricBall) -> Vec<Vec<u32>> {
    let g = w.group();
    g.ensure_table(2 * w.radius()).unwrap();
    let elems: Vec<Element> = w.elements().collect();
    elems
        .iter()
        .map(|x| elems.iter().map(|y| g.distance(x, y).unwrap()).collect())
        .collect()
}

/// Largest `|B(x, M)|` over `x ∈ I`, `M ≥ 1`, with `B(x, M) ⊆ I` and
/// `B(x, M) ∩ A = ∅`, by direct counting.
fn oracle_gap(a: &SubsetWindow) -> Frac {
    let w = a.window();
    let d = pairwise(w);
    let alpha = growth_table(w.group(), 2 * w.radius()).unwrap().alpha;
    let members: Vec<usize> = (0..w.len()).filter(|&i| a.is_member(i)).collect();
    let mut best = 0u64;
    for x in 0..w.len() {
        for m in 1..=2 * w.radius() {
            let inside = d[x].iter().filter(|&&v| v <= m).count() as u64;
            if inside != alpha[m as usize] {
                break;
            }
            if members.iter().any(|&j| d[x][j] <= m) {
                break;
            }
            best = best.max(inside);
        }
    }
    frac(best as u128, w.len() as u128)
}

fn gap_oracle() -> Outcome {
    let mut details = Vec::new();
    for (spec, radii, seed) in [("Z", 1..=8, 11), ("Z^2", 1..=8, 12), ("H3", 1..=5, 13)] {
        let sets = instances(spec, radii, 200, seed);
        for (k, a) in sets.iter().enumerate() {
            let got = gap_fraction(a).map_err(err)?.gap.0;
            let want = if a.is_empty() { frac(1, 1) } else { oracle_gap(a) };
            if got != want {
                return Err(format!("{spec} instance {k}: gap_fraction {} oracle {}", Q(got), Q(want)));
            }
        }
        details.push(format!("{spec} 200/200"));
    }
    Ok(details.join(", "))
}

fn reverse_bm() -> Outcome {
    let mut details = Vec::new();
    for (spec, radii, seed) in [("Z", 4..=20, 21), ("Z^2", 4..=12, 22), ("H3", 3..=6, 23)] {
        let sets = instances(spec, radii, 100, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut bounded = 0;
        for (k, a) in sets.iter().enumerate() {
            let rho = frac(rng.gen_range(1..=10), 20);
            let gap = gap_fraction(a).map_err(err)?;
            let cert = reverse_bm_check(a, &rho, &gap).map_err(err)?;
            // Independent recount of the neighbourhood and of the bound.
            let w = a.window();
            let d = pairwise(w);
            let r = cert.resolution_radius;
            let near = (0..w.len()).filter(|&x| (0..w.len()).any(|y| a.is_member(y) && d[x][y] <= r)).count();
            let lambda = frac(near as u128, w.len() as u128);
            let holds = match &gap.witness {
                Some(b) if b.radius > r && !a.is_empty() => {
                    let inner = growth_table(w.group(), b.radius).unwrap().alpha[(b.radius - r) as usize];
                    lambda <= frac(1, 1) - frac(inner as u128, w.len() as u128)
                }
                _ => true,
            };
            if cert.lambda_hat.0 != lambda || !cert.holds || !holds {
                return Err(format!("{spec} instance {k}: certificate {cert:?}, recount {}", Q(lambda)));
            }
            bounded += cert.bound.is_some() as usize;
        }
        details.push(format!("{spec} 100/100 ({bounded} with a nontrivial bound)"));
    }
    Ok(details.join(", "))
}

fn separation() -> Outcome {
    let start = Instant::now();
    let (_, w) = origin_window("Z^2", 12);
    let lattice = GeneratorSpec::Syndetic {
        bound: 2,
        pattern: Pattern::Lattice { modulus: 2 },
        noise: None,
        seed: 0,
    };
    let a = generate(&lattice, &w).map_err(err)?.set;
    let opts = FOptions::default();
    let t = Thresholds::default();
    let scan = f_scan(&a, &frac(1, 20), &frac(1, 2), (10, 12), FMode::Exact, &opts, &t).map_err(err)?;
    let last = scan.entries.last().unwrap();
    let syndetic_ok = match last.value {
        FValue::Infinite => true,
        FValue::Finite(k) => k >= 10,
        _ => false,
    } && scan.verdict == Verdict::SbmConsistent;
    // Concentric spheres of radii 0, 6, 12 around the origin.
    let spoiler = GeneratorSpec::SphereSpoiler {
        base: Box::new(GeneratorSpec::Empty),
        centers: SpoilerSchedule::Explicit {
            centers: vec![SpoilerCenter {
                n: 6,
                center: Element::new(&[0, 0]),
            }],
        },
        horizon: 6,
    };
    let b = generate(&spoiler, &w).map_err(err)?.set;
    // At eps = 1/2 every qualifying ball needs at least eps/delta = 10 empty
    // balls, so the spoiler is scanned at eps = 1/10.
    let spoiled = f_scan(&b, &frac(1, 20), &frac(1, 10), (10, 12), FMode::Exact, &opts, &t).map_err(err)?;
    let small = spoiled
        .entries
        .iter()
        .find(|e| matches!(e.value, FValue::Finite(k) if k <= 3));
    let elapsed = start.elapsed();
    let detail = format!(
        "lattice F(12) = {} ({:?}, lower bound {:?}); spoiler F = [{}] ({:?}); {elapsed:.2?}",
        last.value,
        scan.verdict,
        last.lower_bound,
        spoiled.entries.iter().map(|e| e.value.to_string()).collect::<Vec<_>>().join(", "),
        spoiled.verdict,
    );
    ensure(syndetic_ok && small.is_some() && elapsed < Duration::from_secs(300), detail)
}

fn difference_sets() -> Outcome {
    let (_, w) = origin_window("Z", 100);
    let evens = SubsetWindow::from_predicate(w.clone(), Provenance::adhoc(), |x| x.0[0] % 2 == 0);
    let d = difference_set(&evens, 3, DEFAULT_PAIR_BUDGET).map_err(err)?;
    let centrals = central_elements(&w);
    let even_check = center_syndetic_check(&d, 1, &centrals).map_err(err)?;
    let lac = generate(
        &GeneratorSpec::Lacunary {
            length: 5,
            direction: Some(Element::new(&[1])),
            seed: 0,
        },
        &w,
    )
    .map_err(err)?
    .set;
    let dl = difference_set(&lac, 3, DEFAULT_PAIR_BUDGET).map_err(err)?;
    let lac_check = center_syndetic_check(&dl, 5, &centrals).map_err(err)?;
    ensure(
        even_check.passed && !lac_check.passed,
        format!(
            "evens: |D_3| = {}, r = 1 passes on {}; lacunary: D_3 = {:?}, r = 5 fails on {} of {}",
            d.members.len(),
            even_check.checked,
            dl.members,
            lac_check.failures.len(),
            lac_check.checked
        ),
    )
}

fn nathanson() -> Outcome {
    let start = Instant::now();
    let (_, w) = origin_window("Z^2", 60);
    let spec = GeneratorSpec::Syndetic {
        bound: 2,
        pattern: Pattern::Net,
        noise: Some(Q(frac(1, 10))),
        seed: 3,
    };
    let a = generate(&spec, &w).map_err(err)?.set;
    let r = nathanson_search(&a, 3, &NathansonOptions::default())
        .map_err(err)?
        .ok_or("no chain found")?;
    let g = a.group();
    let verified = r.b.iter().all(|x| r.c.iter().all(|y| a.contains(&g.multiply(x, y))));
    let elapsed = start.elapsed();
    ensure(
        r.b.len() >= 10 && r.c.len() == 3 && verified && elapsed < Duration::from_secs(60),
        format!("|A| = {}, |B| = {}, C = {:?}, sizes {:?}, {elapsed:.2?}", a.len(), r.b.len(), r.c, r.sizes),
    )
}

fn data_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "metadata.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

fn determinism() -> Outcome {
    let config = ExperimentConfig::smoke();
    let root = tempfile::tempdir().map_err(err)?;
    let mut runs = Vec::new();
    for threads in [1, 4, 8] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(err)?;
        for rep in 0..2 {
            let dir = root.path().join(format!("t{threads}-{rep}"));
            let report = pool.install(|| run_experiment(&config)).map_err(err)?;
            emit_report(&report, &dir).map_err(err)?;
            runs.push((format!("{threads} threads, run {}", rep + 1), data_files(&dir)));
        }
    }
    let (_, first) = &runs[0];
    for (label, files) in &runs[1..] {
        if files != first {
            return Err(format!("{label} differs from the single-threaded run"));
        }
    }
    Ok(format!("{} data files identical across 6 runs at 1, 4, 8 threads", first.len()))
}

fn transfer() -> Outcome {
    let (_, w) = origin_window("Z^2", 24);
    let a = SubsetWindow::from_predicate(w, Provenance::adhoc(), |x| (x.0[0] + x.0[1]) % 2 == 0);
    let king = Group::parse("Z^2#king").map_err(err)?;
    let plan = TransferPlan {
        radii: vec![8, 12, 16],
        max_centers: Some(8),
        seed: 2,
        rho: Q(frac(1, 10)),
        fit_range: (5, 20),
        k_radius: 10,
    };
    let r = density_transfer_check(&a, &king, &plan).map_err(err)?;
    ensure(
        r.k == 2 && r.all_hold,
        format!(
            "K = {} (ratio {} over {} elements), {} windows hold, bound c'/(cK) = {}",
            r.k,
            r.k_ratio,
            r.k_sample,
            r.windows.iter().filter(|w| w.holds).count(),
            r.bound
        ),
    )
}

#[test]
fn acceptance_suite() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("growth exactness", growth_exactness),
        ("heisenberg degree", heisenberg_degree),
        ("growth envelope", envelope),
        ("sphere ratios", sphere_ratios),
        ("doubling", doubling),
        ("gap oracle", gap_oracle),
        ("reverse inequality", reverse_bm),
        ("separation", separation),
        ("difference sets", difference_sets),
        ("nathanson search", nathanson),
        ("determinism", determinism),
        ("density transfer", transfer),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!("[{tag}] {:02} {name}: {detail} [{:.2?}]", i + 1, start.elapsed());
        if outcome.is_err() {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
