//! Config-driven experiment runs.
//!
//! One [`ExperimentConfig`] names a group, windows, generated sets and a list
//! of analyses. [`run_experiment`] executes them in dependency order and
//! [`emit_report`] writes one CSV and one JSON file per analysis, named
//! `kind.windowid.{csv,json}`, plus `report.json`. Wall-clock data lives only
//! in `metadata.json`, so every other file is byte-identical across reruns.

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use crate::ball::{enumerate_ball, fit_growth_degree, growth_table, GrowthFit, GrowthTable, MetricBall};
use crate::density::{
    density_profile, doubling_table, gap_fraction, reverse_bm_check, sg_eta, ss_ratio_table, SgEstimate, SgPlan,
    SubsetWindow,
};
use crate::error::{Error, Result};
use crate::frac::{Frac, Q};
use crate::generators::{generate, Certificate, GeneratorSpec};
use crate::group::{Element, Group};
use crate::sbm::{
    bm_diagnose, center_syndetic_check, central_elements, default_delta_grid, density_transfer_check,
    difference_set, f_scan, nathanson_search, FMode, FOptions, NathansonOptions, SubballPlan, Thresholds,
    TransferPlan, DEFAULT_PAIR_BUDGET,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable naming the directory reports are written under.
pub const OUTPUT_ROOT_ENV: &str = "SBMKIT_OUTPUT_ROOT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    /// Group and generating set, e.g. `"H3"` or `"Z^2#king"`.
    pub group: String,
    /// Added to every generator seed.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub windows: Vec<WindowSpec>,
    #[serde(default)]
    pub sets: Vec<SetSpec>,
    pub analyses: Vec<Analysis>,
    /// Relative to the output root; the config name when absent.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub id: String,
    /// The identity when absent.
    #[serde(default)]
    pub center: Option<Element>,
    pub radius: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetSpec {
    pub id: String,
    pub generator: GeneratorSpec,
}

/// A set materialised on a window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub set: String,
    pub window: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "analysis", rename_all = "snake_case")]
pub enum Analysis {
    Growth {
        max_radius: u32,
        #[serde(default)]
        fit_range: Option<(u32, u32)>,
    },
    Ss {
        fit_range: (u32, u32),
    },
    Doubling {
        centers: Vec<Element>,
        radii: Vec<u32>,
        fit_range: (u32, u32),
    },
    Gap {
        #[serde(flatten)]
        target: Target,
        /// Also certify the reverse inequality at this resolution.
        #[serde(default)]
        rho: Option<Q>,
    },
    Density {
        #[serde(flatten)]
        target: Target,
        rho: Vec<Q>,
    },
    FScan {
        #[serde(flatten)]
        target: Target,
        delta: Q,
        eps: Q,
        n_range: (u32, u32),
        mode: FMode,
        #[serde(default)]
        options: FOptions,
        #[serde(default)]
        thresholds: Thresholds,
    },
    BmDiagnose {
        #[serde(flatten)]
        target: Target,
        eps: Vec<Q>,
        rho: Q,
        plan: SubballPlan,
    },
    Sg {
        n: Vec<u64>,
        delta: Q,
        plan: SgPlan,
    },
    Diffset {
        #[serde(flatten)]
        target: Target,
        m: u64,
        #[serde(default)]
        pair_budget: Option<u64>,
        /// Run the central syndeticity check at this radius.
        #[serde(default)]
        center_radius: Option<u32>,
    },
    Nathanson {
        #[serde(flatten)]
        target: Target,
        n: usize,
        #[serde(default)]
        options: NathansonOptions,
    },
    Transfer {
        #[serde(flatten)]
        target: Target,
        /// The second generating set, e.g. `"Z^2#king"`.
        other: String,
        plan: TransferPlan,
    },
}

impl Analysis {
    pub fn kind(&self) -> &'static str {
        match self {
            Analysis::Growth { .. } => "growth",
            Analysis::Ss { .. } => "ss",
            Analysis::Doubling { .. } => "doubling",
            Analysis::Gap { .. } => "gap",
            Analysis::Density { .. } => "density",
            Analysis::FScan { .. } => "fscan",
            Analysis::BmDiagnose { .. } => "bm_diagnose",
            Analysis::Sg { .. } => "sg",
            Analysis::Diffset { .. } => "diffset",
            Analysis::Nathanson { .. } => "nathanson",
            Analysis::Transfer { .. } => "transfer",
        }
    }

    /// Growth, then fitted quantities, then set analyses.
    fn rank(&self) -> u8 {
        match self {
            Analysis::Growth { .. } => 0,
            Analysis::Ss { .. } | Analysis::Doubling { .. } => 1,
            _ => 2,
        }
    }

    fn target(&self) -> Option<&Target> {
        match self {
            Analysis::Gap { target, .. }
            | Analysis::Density { target, .. }
            | Analysis::FScan { target, .. }
            | Analysis::BmDiagnose { target, .. }
            | Analysis::Diffset { target, .. }
            | Analysis::Nathanson { target, .. }
            | Analysis::Transfer { target, .. } => Some(target),
            _ => None,
        }
    }

    /// File stem `kind.windowid`; group-level analyses use `group`.
    pub fn stem(&self) -> String {
        match self.target() {
            Some(t) => format!("{}.{}-{}", self.kind(), t.set, t.window),
            None => format!("{}.group", self.kind()),
        }
    }

    fn fit_range(&self) -> Option<(u32, u32)> {
        match self {
            Analysis::Growth { fit_range, .. } => *fit_range,
            Analysis::Ss { fit_range } | Analysis::Doubling { fit_range, .. } => Some(*fit_range),
            _ => None,
        }
    }
}

fn invalid(path: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Validation {
        path: path.into(),
        reason: reason.into(),
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Canonical serialisation; parsing it back reproduces it byte for byte.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// SHA-256 of the canonical serialisation, hex encoded. The output
    /// directory is not part of the experiment and is left out.
    pub fn hash(&self) -> String {
        let bare = ExperimentConfig {
            output_dir: None,
            ..self.clone()
        };
        hex(&Sha256::digest(bare.to_json().as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        let group = Group::parse(&self.group).map_err(|e| invalid("group", e.to_string()))?;
        let mut window_ids = FxHashMap::default();
        for (i, w) in self.windows.iter().enumerate() {
            if window_ids.insert(w.id.as_str(), i).is_some() {
                return Err(invalid(format!("windows[{i}].id"), format!("duplicate window id {:?}", w.id)));
            }
            if let Some(c) = &w.center {
                group.check(c).map_err(|e| invalid(format!("windows[{i}].center"), e.to_string()))?;
            }
        }
        let mut set_ids = FxHashMap::default();
        for (i, s) in self.sets.iter().enumerate() {
            if set_ids.insert(s.id.as_str(), i).is_some() {
                return Err(invalid(format!("sets[{i}].id"), format!("duplicate set id {:?}", s.id)));
            }
        }
        let mut stems = FxHashMap::default();
        for (i, a) in self.analyses.iter().enumerate() {
            let at = |field: &str| format!("analyses[{i}].{field}");
            if let Some(prev) = stems.insert(a.stem(), i) {
                return Err(invalid(
                    format!("analyses[{i}]"),
                    format!("writes the same files as analyses[{prev}] ({})", a.stem()),
                ));
            }
            if let Some(t) = a.target() {
                if !set_ids.contains_key(t.set.as_str()) {
                    return Err(invalid(at("set"), format!("unknown set {:?}", t.set)));
                }
                if !window_ids.contains_key(t.window.as_str()) {
                    return Err(invalid(at("window"), format!("unknown window {:?}", t.window)));
                }
            }
            if let Some((lo, hi)) = a.fit_range() {
                if lo < 1 || hi < lo + 4 {
                    return Err(invalid(at("fit_range"), format!("[{lo}, {hi}] needs 1 <= lo and at least 5 points")));
                }
            }
            let positive = |q: &Q, field: &str| {
                if q.0 == Frac::from_integer(0) || q.0 > Frac::from_integer(1) {
                    Err(invalid(at(field), format!("{q} must lie in (0, 1]")))
                } else {
                    Ok(())
                }
            };
            match a {
                Analysis::Growth { max_radius, fit_range } => {
                    if *max_radius < 1 {
                        return Err(invalid(at("max_radius"), "must be at least 1"));
                    }
                    if let Some((_, hi)) = fit_range.filter(|r| r.1 > *max_radius) {
                        return Err(invalid(at("fit_range"), format!("upper end {hi} exceeds max_radius {max_radius}")));
                    }
                }
                Analysis::Doubling { centers, radii, .. } => {
                    if centers.is_empty() || radii.is_empty() {
                        return Err(invalid(at("centers"), "centers and radii must be nonempty"));
                    }
                    for c in centers {
                        group.check(c).map_err(|e| invalid(at("centers"), e.to_string()))?;
                    }
                }
                Analysis::Gap { rho: Some(r), .. } => positive(r, "rho")?,
                Analysis::Density { rho, .. } => {
                    if rho.is_empty() {
                        return Err(invalid(at("rho"), "needs at least one resolution"));
                    }
                    for r in rho {
                        positive(r, "rho")?;
                    }
                }
                Analysis::FScan {
                    delta,
                    eps,
                    n_range,
                    options,
                    ..
                } => {
                    if !(delta.0 > Frac::from_integer(0) && delta.0 < eps.0 && eps.0 < Frac::from_integer(1)) {
                        return Err(invalid(at("delta"), format!("need 0 < delta < eps < 1, got {delta} and {eps}")));
                    }
                    if n_range.0 < 1 || n_range.1 < n_range.0 {
                        return Err(invalid(at("n_range"), format!("invalid range {n_range:?}")));
                    }
                    if options.node_budget == 0 || options.exact_element_cap == 0 {
                        return Err(invalid(at("options"), "budgets must be positive"));
                    }
                }
                Analysis::BmDiagnose { eps, rho, plan, .. } => {
                    positive(rho, "rho")?;
                    for e in eps {
                        positive(e, "eps")?;
                    }
                    if plan.radii.is_empty() {
                        return Err(invalid(at("plan.radii"), "needs at least one radius"));
                    }
                }
                Analysis::Sg { n, delta, plan } => {
                    positive(delta, "delta")?;
                    if n.is_empty() || plan.a_radii.is_empty() || plan.b_radii.is_empty() || plan.max_offsets == 0 {
                        return Err(invalid(at("plan"), "n, radii and max_offsets must be nonempty and positive"));
                    }
                }
                Analysis::Diffset { m, pair_budget, .. } => {
                    if *m < 2 {
                        return Err(invalid(at("m"), "must be at least 2"));
                    }
                    if *pair_budget == Some(0) {
                        return Err(invalid(at("pair_budget"), "must be positive"));
                    }
                }
                Analysis::Nathanson { n, .. } => {
                    if *n < 1 {
                        return Err(invalid(at("n"), "must be at least 1"));
                    }
                }
                Analysis::Transfer { other, plan, .. } => {
                    Group::parse(other).map_err(|e| invalid(at("other"), e.to_string()))?;
                    positive(&plan.rho, "plan.rho")?;
                    if plan.radii.is_empty() {
                        return Err(invalid(at("plan.radii"), "needs at least one radius"));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// The analyses in execution order: a growth analysis is inserted when a
    /// fitted quantity needs one, then everything is stably sorted by rank.
    pub fn schedule(&self) -> Vec<Analysis> {
        let mut plan = self.analyses.clone();
        let needed: Option<(u32, u32)> = plan
            .iter()
            .filter(|a| a.rank() == 1)
            .filter_map(|a| a.fit_range())
            .max_by_key(|r| r.1);
        if let Some((lo, hi)) = needed {
            match plan.iter_mut().find(|a| matches!(a, Analysis::Growth { .. })) {
                Some(Analysis::Growth { max_radius, fit_range }) => {
                    *max_radius = (*max_radius).max(hi);
                    fit_range.get_or_insert((lo, hi));
                }
                _ => plan.push(Analysis::Growth {
                    max_radius: hi,
                    fit_range: Some((lo, hi)),
                }),
            }
        }
        plan.sort_by_key(Analysis::rank);
        plan
    }

    /// A small composite run on the Heisenberg group: growth, sphere ratios,
    /// doubling and an exact F-scan of a syndetic net.
    pub fn smoke() -> Self {
        let text = include_str!("../configs/smoke.json");
        Self::from_json(text).expect("bundled config is valid")
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Completed,
    CapabilityError,
}

#[derive(Clone, Debug, Serialize)]
pub struct AnalysisRecord {
    pub kind: String,
    pub stem: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Headline outcome with the label of the evidence behind it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evidence: Option<String>,
    pub data: serde_json::Value,
    #[serde(skip)]
    pub csv: Option<Vec<u8>>,
    #[serde(skip)]
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub name: String,
    pub group: String,
    pub config_hash: String,
    pub records: Vec<AnalysisRecord>,
}

impl RunReport {
    /// 0 when every analysis completed, 2 when some hit a capability limit.
    pub fn exit_code(&self) -> i32 {
        if self.records.iter().any(|r| r.status == Status::CapabilityError) {
            2
        } else {
            0
        }
    }
}

struct Outcome {
    data: serde_json::Value,
    csv: Vec<u8>,
    verdict: Option<String>,
    evidence: Option<String>,
}

impl Outcome {
    fn new(data: impl Serialize, csv: Vec<u8>, evidence: &str) -> Result<Self> {
        Ok(Outcome {
            data: serde_json::to_value(data)?,
            csv,
            verdict: None,
            evidence: Some(evidence.to_string()),
        })
    }

    fn verdict(mut self, v: impl Into<String>) -> Self {
        self.verdict = Some(v.into());
        self
    }
}

fn csv_rows<I, R>(header: &[&str], rows: I) -> Result<Vec<u8>>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| Error::io("<csv>", e.into_error()))
}

struct Runner<'c> {
    config: &'c ExperimentConfig,
    group: Arc<Group>,
    growth: Option<(GrowthTable, Option<GrowthFit>)>,
    windows: FxHashMap<String, MetricBall>,
    sets: FxHashMap<(String, String), (SubsetWindow, Certificate)>,
}

impl Runner<'_> {
    fn window(&mut self, id: &str) -> Result<MetricBall> {
        if let Some(w) = self.windows.get(id) {
            return Ok(w.clone());
        }
        let spec = self.config.windows.iter().find(|w| w.id == id).expect("validated");
        let center = spec.center.clone().unwrap_or_else(|| self.group.identity());
        let w = enumerate_ball(&self.group, &center, spec.radius)?;
        self.windows.insert(id.to_string(), w.clone());
        Ok(w)
    }

    fn set(&mut self, t: &Target) -> Result<SubsetWindow> {
        let key = (t.set.clone(), t.window.clone());
        if let Some((a, _)) = self.sets.get(&key) {
            return Ok(a.clone());
        }
        let window = self.window(&t.window)?;
        let spec = &self.config.sets.iter().find(|s| s.id == t.set).expect("validated").generator;
        let g = generate(&spec.reseeded(self.config.seed), &window)?;
        self.sets.insert(key, (g.set.clone(), g.certificate));
        Ok(g.set)
    }

    fn fit(&self, range: (u32, u32)) -> Result<(GrowthTable, GrowthFit)> {
        let (table, _) = self.growth.as_ref().ok_or_else(|| Error::usage("growth has not run"))?;
        Ok((table.clone(), fit_growth_degree(table, range)?))
    }

    fn run(&mut self, a: &Analysis) -> Result<Outcome> {
        let q = |x: &Q| x.0;
        match a {
            Analysis::Growth { max_radius, fit_range } => {
                let table = growth_table(&self.group, *max_radius)?;
                let fit = fit_range.map(|r| fit_growth_degree(&table, r)).transpose()?;
                let mut csv = Vec::new();
                table.write_csv(&mut csv)?;
                self.growth = Some((table.clone(), fit.clone()));
                let verdict = fit.as_ref().map(|f| format!("degree {}", f.degree_round));
                let out = Outcome::new(serde_json::json!({ "table": table, "fit": fit }), csv, "exact")?;
                Ok(match verdict {
                    Some(v) => out.verdict(v),
                    None => out,
                })
            }
            Analysis::Ss { fit_range } => {
                let (table, fit) = self.fit(*fit_range)?;
                let ss = ss_ratio_table(&table, Some(fit.degree_round))?;
                let csv = csv_rows(
                    &["n", "sphere_n", "ratio"],
                    ss.rows.iter().map(|r| [r.n.to_string(), r.sphere.to_string(), r.ratio.to_string()]),
                )?;
                Ok(Outcome::new(&ss, csv, "exact")?.verdict(format!("max ratio {}", ss.max_ratio)))
            }
            Analysis::Doubling { centers, radii, fit_range } => {
                let (_, fit) = self.fit(*fit_range)?;
                let t = doubling_table(&self.group, centers, radii, &fit.constant.0, fit.degree_round)?;
                let csv = csv_rows(
                    &["center", "radius", "outer", "inner", "ratio"],
                    t.rows.iter().map(|r| {
                        [
                            r.center.to_string(),
                            r.radius.to_string(),
                            r.outer.to_string(),
                            r.inner.to_string(),
                            r.ratio.to_string(),
                        ]
                    }),
                )?;
                let v = if t.within_bound { "within-bound" } else { "exceeds-bound" };
                Ok(Outcome::new(&t, csv, "exact")?.verdict(v))
            }
            Analysis::Gap { target, rho } => {
                let set = self.set(target)?;
                let gap = gap_fraction(&set)?;
                let reverse = rho.map(|r| reverse_bm_check(&set, &r.0, &gap)).transpose()?;
                let witness = gap
                    .witness
                    .as_ref()
                    .map(|b| format!("B({};{})", b.center, b.radius))
                    .unwrap_or_default();
                let csv = csv_rows(&["gap", "witness"], [[gap.gap.to_string(), witness]])?;
                let v = format!("gap {}", gap.gap);
                Ok(Outcome::new(serde_json::json!({ "gap": gap, "reverse_bm": reverse }), csv, "exact")?.verdict(v))
            }
            Analysis::Density { target, rho } => {
                let set = self.set(target)?;
                let rs: Vec<Frac> = rho.iter().map(q).collect();
                let p = density_profile(&set, &rs)?;
                let csv = csv_rows(
                    &["rho", "lambda_hat"],
                    p.resolutions.iter().zip(&p.values).map(|(r, v)| [r.to_string(), v.to_string()]),
                )?;
                Ok(Outcome::new(&p, csv, "exact")?)
            }
            Analysis::FScan {
                target,
                delta,
                eps,
                n_range,
                mode,
                options,
                thresholds,
            } => {
                let set = self.set(target)?;
                let scan = f_scan(&set, &delta.0, &eps.0, *n_range, *mode, options, thresholds)?;
                let mut csv = Vec::new();
                scan.write_csv(&mut csv)?;
                let v = serde_json::to_value(scan.verdict)?.as_str().unwrap_or_default().to_string();
                Ok(Outcome::new(&scan, csv, &mode.to_string())?.verdict(v))
            }
            Analysis::BmDiagnose { target, eps, rho, plan } => {
                let set = self.set(target)?;
                let eps: Vec<Frac> = eps.iter().map(q).collect();
                let d = bm_diagnose(&set, &eps, plan, &rho.0, &default_delta_grid())?;
                let csv = csv_rows(
                    &["eps", "delta_hat", "collapsed"],
                    d.rows.iter().map(|r| [r.eps.to_string(), r.delta_hat.to_string(), r.collapsed.to_string()]),
                )?;
                Ok(Outcome::new(&d, csv, "sampled")?)
            }
            Analysis::Sg { n, delta, plan } => {
                let mut rows = Vec::new();
                let mut data = Vec::new();
                for &k in n {
                    let est = sg_eta(&self.group, k, &delta.0, plan)?;
                    let (status, eta) = match &est {
                        SgEstimate::UpperBound { eta, .. } => ("upper-bound", eta.to_string()),
                        SgEstimate::Vacuous { .. } => ("vacuous", String::new()),
                    };
                    rows.push([k.to_string(), status.to_string(), eta]);
                    data.push(serde_json::json!({ "n": k, "estimate": est }));
                }
                let csv = csv_rows(&["n", "status", "eta"], rows)?;
                Ok(Outcome::new(data, csv, "sampled-upper-bound")?)
            }
            Analysis::Diffset {
                target,
                m,
                pair_budget,
                center_radius,
            } => {
                let set = self.set(target)?;
                let d = difference_set(&set, *m, pair_budget.unwrap_or(DEFAULT_PAIR_BUDGET))?;
                let check = center_radius
                    .map(|r| center_syndetic_check(&d, r, &central_elements(set.window())))
                    .transpose()?;
                let csv = csv_rows(
                    &["element", "count", "member"],
                    d.counts
                        .iter()
                        .map(|(g, c)| [g.to_string(), c.to_string(), (*c >= *m).to_string()]),
                )?;
                let v = check.as_ref().map(|c| if c.passed { "center-syndetic" } else { "center-check-failed" });
                let out = Outcome::new(serde_json::json!({ "difference_set": d, "center_check": check }), csv, "exact")?;
                Ok(match v {
                    Some(v) => out.verdict(v),
                    None => out,
                })
            }
            Analysis::Nathanson { target, n, options } => {
                let set = self.set(target)?;
                let r = nathanson_search(&set, *n, options)?;
                let csv = match &r {
                    Some(r) => csv_rows(
                        &["step", "shift", "size"],
                        r.shifts
                            .iter()
                            .zip(&r.sizes)
                            .enumerate()
                            .map(|(i, (t, s))| [(i + 1).to_string(), t.to_string(), s.to_string()]),
                    )?,
                    None => csv_rows(&["step", "shift", "size"], Vec::<[String; 3]>::new())?,
                };
                let v = if r.is_some() { "found" } else { "none" };
                Ok(Outcome::new(&r, csv, "greedy-verified")?.verdict(v))
            }
            Analysis::Transfer { target, other, plan } => {
                let set = self.set(target)?;
                let other = Group::parse(other)?;
                let t = density_transfer_check(&set, &other, plan)?;
                let csv = csv_rows(
                    &["center", "radius", "inner_radius", "theta", "tau", "mu_prime", "holds"],
                    t.windows.iter().map(|w| {
                        [
                            w.ball.center.to_string(),
                            w.ball.radius.to_string(),
                            w.inner_radius.to_string(),
                            w.theta.to_string(),
                            w.tau.to_string(),
                            w.mu_prime.to_string(),
                            w.holds.to_string(),
                        ]
                    }),
                )?;
                let v = if t.all_hold { "holds" } else { "violated" };
                Ok(Outcome::new(&t, csv, "exact-sampled-windows")?.verdict(v))
            }
        }
    }
}

/// Runs every analysis. Capability errors are recorded and the run goes on;
/// any other error aborts it.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    let mut runner = Runner {
        config,
        group: Group::parse(&config.group)?,
        growth: None,
        windows: FxHashMap::default(),
        sets: FxHashMap::default(),
    };
    let mut records = Vec::new();
    for a in config.schedule() {
        let start = Instant::now();
        let result = runner.run(&a);
        let seconds = start.elapsed().as_secs_f64();
        let record = match result {
            Ok(o) => AnalysisRecord {
                kind: a.kind().into(),
                stem: a.stem(),
                status: Status::Completed,
                error: None,
                verdict: o.verdict,
                evidence: o.evidence,
                data: o.data,
                csv: Some(o.csv),
                seconds,
            },
            Err(e) if e.is_capability() => {
                log::warn!("{}: {e}", a.stem());
                AnalysisRecord {
                    kind: a.kind().into(),
                    stem: a.stem(),
                    status: Status::CapabilityError,
                    error: Some(e.to_string()),
                    verdict: None,
                    evidence: None,
                    data: serde_json::Value::Null,
                    csv: None,
                    seconds,
                }
            }
            Err(e) => return Err(e),
        };
        records.push(record);
    }
    Ok(RunReport {
        schema_version: SCHEMA_VERSION,
        name: config.name.clone(),
        group: config.group.clone(),
        config_hash: config.hash(),
        records,
    })
}

/// Output directory: `root` (or the environment variable, or `.`) joined
/// with the config's `output_dir` or name.
pub fn output_dir(config: &ExperimentConfig, root: Option<&Path>) -> PathBuf {
    let root = root
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    root.join(config.output_dir.clone().unwrap_or_else(|| PathBuf::from(&config.name)))
}

#[derive(Serialize)]
struct Envelope<'a> {
    schema_version: u32,
    config_hash: &'a str,
    record: &'a AnalysisRecord,
}

#[derive(Serialize)]
struct Metadata<'a> {
    schema_version: u32,
    config_hash: &'a str,
    crate_version: &'static str,
    finished_unix_seconds: u64,
    threads: usize,
    timings: Vec<(&'a str, f64)>,
}

fn write(path: PathBuf, bytes: &[u8]) -> Result<PathBuf> {
    std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes the report under `dir` and returns the files written. An empty
/// report writes nothing.
pub fn emit_report(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    if report.records.is_empty() {
        log::warn!("report {:?} has no analyses; nothing written", report.name);
        return Ok(Vec::new());
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for r in &report.records {
        if let Some(csv) = &r.csv {
            files.push(write(dir.join(format!("{}.csv", r.stem)), csv)?);
        }
        let env = Envelope {
            schema_version: report.schema_version,
            config_hash: &report.config_hash,
            record: r,
        };
        let json = serde_json::to_vec_pretty(&env)?;
        files.push(write(dir.join(format!("{}.json", r.stem)), &json)?);
    }
    files.push(write(dir.join("report.json"), &serde_json::to_vec_pretty(report)?)?);
    let meta = Metadata {
        schema_version: report.schema_version,
        config_hash: &report.config_hash,
        crate_version: env!("CARGO_PKG_VERSION"),
        finished_unix_seconds: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
        threads: rayon::current_num_threads(),
        timings: report.records.iter().map(|r| (r.stem.as_str(), r.seconds)).collect(),
    };
    files.push(write(dir.join("metadata.json"), &serde_json::to_vec_pretty(&meta)?)?);
    Ok(files)
}
