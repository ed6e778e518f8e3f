//! `sbmkit`: run single analyses or whole experiment configs.
//!
//! Exit codes: 0 when every analysis completed, 2 when some analysis hit a
//! capability limit, 1 on invalid input.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use sbmkit::experiment::{output_dir, Analysis, SetSpec, Target, WindowSpec, OUTPUT_ROOT_ENV};
use sbmkit::frac::Q;
use sbmkit::sbm::{FMode, FOptions, NathansonOptions, Thresholds, TransferPlan};
use sbmkit::{emit_report, generate, run_experiment, Element, Error, ExperimentConfig, GeneratorSpec, Group};

#[derive(Parser)]
#[command(name = "sbmkit", version, about = "Word metrics, gaps and ball-measure diagnostics on nilpotent groups")]
struct Cli {
    /// Directory reports are written under.
    #[arg(long, global = true, env = OUTPUT_ROOT_ENV)]
    output_root: Option<PathBuf>,
    /// Worker threads; all cores when absent.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ball and sphere sizes, optionally with a polynomial fit.
    Growth {
        #[command(flatten)]
        group: GroupArg,
        #[arg(long)]
        max_radius: u32,
        /// Fit range as `lo,hi`.
        #[arg(long, value_parser = parse_pair)]
        fit: Option<(u32, u32)>,
    },
    /// Largest empty ball of a set in a window.
    Gap {
        #[command(flatten)]
        target: SetArgs,
        #[arg(long)]
        rho: Option<Q>,
    },
    /// F(n) over a range of n.
    Fscan {
        #[command(flatten)]
        target: SetArgs,
        #[arg(long)]
        delta: Q,
        #[arg(long)]
        eps: Q,
        /// Range as `lo,hi`.
        #[arg(long, value_parser = parse_pair)]
        n: (u32, u32),
        #[arg(long, default_value = "exact")]
        mode: String,
        #[arg(long)]
        node_budget: Option<u64>,
    },
    /// Sampled upper bounds on the SG constant.
    SgScan {
        #[command(flatten)]
        group: GroupArg,
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<u64>,
        #[arg(long)]
        delta: Q,
        #[arg(long, value_delimiter = ',', required = true)]
        a_radii: Vec<u32>,
        #[arg(long, value_delimiter = ',', required = true)]
        b_radii: Vec<u32>,
        #[arg(long, default_value_t = 4)]
        offset_radius: u32,
        #[arg(long, default_value_t = 64)]
        max_offsets: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Difference set with multiplicity threshold m.
    Diffset {
        #[command(flatten)]
        target: SetArgs,
        #[arg(long)]
        m: u64,
        #[arg(long)]
        pair_budget: Option<u64>,
        #[arg(long)]
        center_radius: Option<u32>,
    },
    /// Greedy search for B with B·C inside the set, |C| = n.
    Nathanson {
        #[command(flatten)]
        target: SetArgs,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 4)]
        shift_radius: u32,
        #[arg(long, default_value_t = 1)]
        floor: usize,
    },
    /// Density transfer to a second generating set.
    Transfer {
        #[command(flatten)]
        target: SetArgs,
        /// The second generating set, e.g. `Z^2#king`.
        #[arg(long)]
        other: String,
        #[arg(long, value_delimiter = ',', required = true)]
        radii: Vec<u32>,
        #[arg(long)]
        rho: Q,
        #[arg(long, value_parser = parse_pair)]
        fit: (u32, u32),
        #[arg(long, default_value_t = 8)]
        k_radius: u32,
        #[arg(long)]
        max_centers: Option<usize>,
    },
    /// Print a generated set as one element per line.
    Generate {
        #[command(flatten)]
        target: SetArgs,
        /// Print the certificate as JSON instead of the members.
        #[arg(long)]
        certificate: bool,
    },
    /// Run an experiment config.
    Run {
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Args)]
struct GroupArg {
    /// Group and generating set, e.g. `Z^2`, `H3`, `Z^2#king`.
    #[arg(long, short)]
    group: String,
}

#[derive(Args)]
struct SetArgs {
    #[command(flatten)]
    group: GroupArg,
    /// Generator spec as JSON, `@file.json`, or a family name such as `full`.
    #[arg(long)]
    set: String,
    #[arg(long)]
    radius: u32,
    /// Window centre as comma-separated coordinates; the identity by default.
    #[arg(long)]
    center: Option<Element>,
}

fn parse_pair(s: &str) -> Result<(u32, u32), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected lo,hi, got {s:?}"))?;
    let a = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
    let b = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
    Ok((a, b))
}

fn parse_spec(text: &str) -> Result<GeneratorSpec> {
    let json = match text.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?,
        None if text.trim_start().starts_with('{') => text.to_string(),
        None => format!("{{\"family\": {}}}", serde_json::to_string(text)?),
    };
    serde_json::from_str(&json).with_context(|| format!("invalid generator spec {text:?}"))
}

impl SetArgs {
    fn into_parts(self) -> Result<(String, WindowSpec, SetSpec, Target)> {
        let window = WindowSpec {
            id: "w".into(),
            center: self.center,
            radius: self.radius,
        };
        let set = SetSpec {
            id: "a".into(),
            generator: parse_spec(&self.set)?,
        };
        let target = Target {
            set: "a".into(),
            window: "w".into(),
        };
        Ok((self.group.group, window, set, target))
    }
}

fn single(name: &str, group: String, parts: Option<(WindowSpec, SetSpec)>, analysis: Analysis) -> ExperimentConfig {
    let (windows, sets) = parts.map_or((Vec::new(), Vec::new()), |(w, s)| (vec![w], vec![s]));
    ExperimentConfig {
        name: name.into(),
        group,
        seed: 0,
        windows,
        sets,
        analyses: vec![analysis],
        output_dir: None,
    }
}

fn targeted(
    name: &str,
    args: SetArgs,
    make: impl FnOnce(Target) -> Analysis,
) -> Result<ExperimentConfig> {
    let (group, w, s, t) = args.into_parts()?;
    Ok(single(name, group, Some((w, s)), make(t)))
}

/// Builds the config a subcommand stands for; `None` for `generate`.
fn config_for(command: Command) -> Result<Option<ExperimentConfig>> {
    let config = match command {
        Command::Growth { group, max_radius, fit } => single(
            "growth",
            group.group,
            None,
            Analysis::Growth {
                max_radius,
                fit_range: fit,
            },
        ),
        Command::Gap { target, rho } => targeted("gap", target, |target| Analysis::Gap { target, rho })?,
        Command::Fscan {
            target,
            delta,
            eps,
            n,
            mode,
            node_budget,
        } => {
            let mode: FMode = serde_json::from_value(serde_json::Value::String(mode.clone()))
                .with_context(|| format!("unknown mode {mode:?}; use exact or greedy"))?;
            let mut options = FOptions::default();
            if let Some(b) = node_budget {
                options.node_budget = b;
            }
            targeted("fscan", target, |target| Analysis::FScan {
                target,
                delta,
                eps,
                n_range: n,
                mode,
                options,
                thresholds: Thresholds::default(),
            })?
        }
        Command::SgScan {
            group,
            n,
            delta,
            a_radii,
            b_radii,
            offset_radius,
            max_offsets,
            seed,
        } => single(
            "sg",
            group.group,
            None,
            Analysis::Sg {
                n,
                delta,
                plan: sbmkit::density::SgPlan {
                    a_radii,
                    b_radii,
                    offset_radius,
                    max_offsets,
                    seed,
                },
            },
        ),
        Command::Diffset {
            target,
            m,
            pair_budget,
            center_radius,
        } => targeted("diffset", target, |target| Analysis::Diffset {
            target,
            m,
            pair_budget,
            center_radius,
        })?,
        Command::Nathanson {
            target,
            n,
            shift_radius,
            floor,
        } => targeted("nathanson", target, |target| Analysis::Nathanson {
            target,
            n,
            options: NathansonOptions { shift_radius, floor },
        })?,
        Command::Transfer {
            target,
            other,
            radii,
            rho,
            fit,
            k_radius,
            max_centers,
        } => targeted("transfer", target, |target| Analysis::Transfer {
            target,
            other,
            plan: TransferPlan {
                radii,
                max_centers,
                seed: 0,
                rho,
                fit_range: fit,
                k_radius,
            },
        })?,
        Command::Generate { .. } => return Ok(None),
        Command::Run {
            config,
            output_dir,
            seed,
        } => {
            let mut c = ExperimentConfig::load(&config)?;
            if let Some(d) = output_dir {
                c.output_dir = Some(d);
            }
            if let Some(s) = seed {
                c.seed = s;
            }
            c
        }
    };
    Ok(Some(config))
}

fn print_generated(target: SetArgs, certificate: bool) -> Result<()> {
    let (group, window, set, _) = target.into_parts()?;
    let g = Group::parse(&group)?;
    let center = window.center.unwrap_or_else(|| g.identity());
    let ball = sbmkit::enumerate_ball(&g, &center, window.radius)?;
    let out = generate(&set.generator, &ball)?;
    if certificate {
        println!("{}", serde_json::to_string_pretty(&out.certificate)?);
    } else {
        print!("{}", out.set.to_ndjson_tuples());
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<i32> {
    let root = cli.output_root;
    let Some(config) = (match cli.command {
        Command::Generate { target, certificate } => {
            print_generated(target, certificate)?;
            None
        }
        other => config_for(other)?,
    }) else {
        return Ok(0);
    };
    config.validate()?;
    let report = run_experiment(&config)?;
    let dir = output_dir(&config, root.as_deref());
    let files = emit_report(&report, &dir)?;
    for r in &report.records {
        match (&r.verdict, &r.error) {
            (_, Some(e)) => println!("{}: {}", r.stem, e),
            (Some(v), None) => println!("{}: {}", r.stem, v),
            (None, None) => println!("{}: completed", r.stem),
        }
    }
    eprintln!("wrote {} files to {}", files.len(), dir.display());
    Ok(report.exit_code())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            let capability = e.downcast_ref::<Error>().is_some_and(Error::is_capability);
            ExitCode::from(if capability { 2 } else { 1 })
        }
    }
}
