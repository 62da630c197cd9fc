//! Command-line front end: certify, construct regions, simulate, tabulate escape
//! cones and re-render figures from exported documents.
//!
//! Exit codes: 0 success or certified, 2 not certified or construction failed,
//! 1 usage, input or I/O error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use tropcert::certify::{certify_system, certify_system_on_fan, Strategy, SystemVerdict};
use tropcert::fan::Fan2;
use tropcert::rational::{parse_q, Q};
use tropcert::region::construct_region;
use tropcert::report::{escape_table, family_entries, Report, RunConfig};
use tropcert::simulate::{permanence_report, run_ensemble, EnsembleConfig, ScheduleChoice};
use tropcert::system::{parse_model, VkSystem};
use tropcert::vec2::RatVec2;

#[derive(Parser)]
#[command(name = "tropcert", version, about = "Certify permanence of planar power-law systems with bounded variable rates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a cone inclusion and test separation and strict embedding.
    Certify {
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Construct and exactly verify a forward-invariant polygon.
    Region {
        input: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Starting scaffold parameter; larger values give larger polygons.
        #[arg(long, default_value_t = 1.0)]
        t_hat: f64,
        /// Also build this many nested members at t_hat * 2^k.
        #[arg(long, default_value_t = 0)]
        family: usize,
    },
    /// Integrate an ensemble under random rate schedules and report bounds.
    Simulate {
        input: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 20)]
        runs: usize,
        #[arg(long, default_value_t = 50.0)]
        t_end: f64,
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
        #[arg(long, value_enum, default_value_t = ScheduleArg::Random)]
        schedule: ScheduleArg,
        /// Period of piecewise-constant schedules, or inverse frequency of sinusoidal ones.
        #[arg(long, default_value_t = 1.0)]
        period: f64,
        /// Half-width of the log-box initial states are drawn from.
        #[arg(long, default_value_t = 3.0)]
        log_box: f64,
        /// Record every this many steps.
        #[arg(long, default_value_t = 100)]
        stride: usize,
        /// Region document to track entries and exits against.
        #[arg(long, conflicts_with = "no_region")]
        region: Option<PathBuf>,
        /// Skip constructing a region when none is given.
        #[arg(long)]
        no_region: bool,
    },
    /// Tabulate the escape cone of every cell of a fan.
    Escape {
        /// Model whose fan is used; omit with --fan custom:<path>.
        input: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Re-render the figure of an exported document.
    Plot {
        document: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct Common {
    /// Fattening parameter in (0,1) as p/q.
    #[arg(long, default_value = "1/100000")]
    varrho: String,
    /// Widening of ray-shaped cones as p/q.
    #[arg(long, default_value = "1/1024")]
    eta: String,
    /// Override the rate bound of the model, as p/q in (0,1].
    #[arg(long)]
    epsilon: Option<String>,
    /// comparison, normal, or custom:<path> to a document {"rays": [[p,q], ...]}.
    #[arg(long, default_value = "comparison")]
    fan: String,
    #[arg(long, value_enum, default_value_t = StrategyArg::Dominance)]
    strategy: StrategyArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for documents and figures; documents go to stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write an SVG figure (requires --out).
    #[arg(long)]
    svg: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Dominance,
    /// Toric inclusion; requires a weakly reversible reaction graph.
    Toric,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleArg {
    Random,
    Sinusoidal,
    Unit,
}

#[derive(Deserialize)]
struct FanDocument {
    rays: Vec<RatVec2>,
}

enum FanArg {
    Comparison,
    Normal,
    Custom(Vec<RatVec2>),
}

struct Setup {
    config: RunConfig,
    varrho: Q,
    eta: Q,
    fan: FanArg,
}

fn parse_fan(spec: &str) -> Result<FanArg> {
    match spec {
        "comparison" => Ok(FanArg::Comparison),
        "normal" => Ok(FanArg::Normal),
        _ => {
            let path = spec.strip_prefix("custom:").ok_or_else(|| anyhow!("unknown fan {spec:?}"))?;
            let text = fs::read_to_string(path).with_context(|| format!("reading fan {path}"))?;
            let doc: FanDocument = serde_json::from_str(&text).with_context(|| format!("parsing fan {path}"))?;
            Ok(FanArg::Custom(doc.rays))
        }
    }
}

fn setup(command: &str, input: Option<&Path>, c: &Common) -> Result<Setup> {
    let varrho = parse_q(&c.varrho)?;
    let eta = parse_q(&c.eta)?;
    let epsilon = c.epsilon.as_deref().map(parse_q).transpose()?;
    if c.svg && c.out.is_none() {
        bail!("--svg requires --out");
    }
    let fan = parse_fan(&c.fan)?;
    let config = RunConfig {
        command: command.into(),
        input: input.map(|p| p.display().to_string()),
        varrho: varrho.clone(),
        eta: eta.clone(),
        epsilon,
        fan: c.fan.clone(),
        strategy: match c.strategy {
            StrategyArg::Dominance => "dominance".into(),
            StrategyArg::Toric => "toric".into(),
        },
        seed: c.seed,
        runs: 0,
        t_end: 0.0,
        step: 0.0,
        t_hat: 0.0,
        family: 0,
        out: c.out.as_ref().map(|p| p.display().to_string()),
        svg: c.svg,
    };
    Ok(Setup { config, varrho, eta, fan })
}

fn load_system(path: &Path, epsilon: &Option<Q>) -> Result<VkSystem> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let sys = parse_model(&text)?.system()?;
    match epsilon {
        Some(e) => Ok(VkSystem::new(sys.terms, e.clone())?),
        None => Ok(sys),
    }
}

fn certify(sys: &VkSystem, s: &Setup, strategy: StrategyArg) -> Result<SystemVerdict> {
    let (v, e, seed) = (s.varrho.clone(), s.eta.clone(), s.config.seed);
    Ok(match (strategy, &s.fan) {
        (StrategyArg::Toric, _) => certify_system(sys, Strategy::ToricIfWeaklyReversible, v, e, seed)?,
        (StrategyArg::Dominance, FanArg::Comparison) => certify_system(sys, Strategy::DominanceComparison, v, e, seed)?,
        (StrategyArg::Dominance, FanArg::Normal) => certify_system(sys, Strategy::DominanceNormal, v, e, seed)?,
        (StrategyArg::Dominance, FanArg::Custom(rays)) => {
            certify_system_on_fan(sys, &Fan2::from_rays(rays, v.clone())?, v, e, seed)?
        }
    })
}

/// Writes `name.json` (and `name.svg` when asked) under `--out`, or the document to stdout.
fn emit(report: &Report, out: &Option<String>, svg: bool, name: &str) -> Result<()> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {dir}"))?;
            let path = Path::new(dir).join(format!("{name}.json"));
            fs::write(&path, report.to_json() + "\n").with_context(|| format!("writing {}", path.display()))?;
            if svg {
                let path = Path::new(dir).join(format!("{name}.svg"));
                fs::write(&path, report.render_svg()).with_context(|| format!("writing {}", path.display()))?;
            }
        }
        None => println!("{}", report.to_json()),
    }
    Ok(())
}

fn describe_failure(v: &SystemVerdict) {
    for c in v.certificate.failing_cells() {
        eprintln!("cell {:?}: cone {:?} meets escape cone {:?} (witness {:?})", c.cell, c.cone, c.escape.limit, c.witness);
    }
    for f in v.certificate.faces.iter().filter(|f| !f.pass) {
        eprintln!("face {:?} < {:?}: generator {:?} escapes the ray cone", f.ray, f.sector, f.witness);
    }
    if !v.embedding.pass {
        eprintln!("strict embedding fails: worst sample {:?}", v.embedding.worst);
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Certify { input, common } => {
            let s = setup("certify", Some(&input), &common)?;
            let sys = load_system(&input, &s.config.epsilon)?;
            let verdict = certify(&sys, &s, common.strategy)?;
            let permanent = verdict.permanent;
            if !permanent {
                describe_failure(&verdict);
            }
            let report = Report::Certificate { config: s.config.clone(), verdict };
            emit(&report, &s.config.out, s.config.svg, "certificate")?;
            eprintln!("{}", if permanent { "certified permanent" } else { "not certified" });
            Ok(if permanent { 0 } else { 2 })
        }
        Command::Region { input, common, t_hat, family } => {
            let mut s = setup("region", Some(&input), &common)?;
            s.config.t_hat = t_hat;
            s.config.family = family;
            let sys = load_system(&input, &s.config.epsilon)?;
            let verdict = certify(&sys, &s, common.strategy)?;
            if !verdict.permanent {
                describe_failure(&verdict);
                eprintln!("not certified; no region constructed");
                return Ok(2);
            }
            let poly = match construct_region(&verdict.di, t_hat) {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("{e}");
                    return Ok(2);
                }
            };
            let members = family_entries(&verdict.di, &poly, family)?;
            let nested = members.iter().all(|m| m.verified && m.nested_in_next != Some(false));
            eprintln!(
                "verified polygon with {} vertices at t = {}{}",
                poly.vertices.len(),
                poly.t_hat,
                if family > 0 { format!("; family nested: {nested}") } else { String::new() }
            );
            let report = Report::Region { config: s.config.clone(), di: verdict.di, polygon: poly, family: members };
            emit(&report, &s.config.out, s.config.svg, "region")?;
            Ok(if nested { 0 } else { 2 })
        }
        Command::Simulate { input, common, runs, t_end, step, schedule, period, log_box, stride, region, no_region } => {
            let mut s = setup("simulate", Some(&input), &common)?;
            if runs == 0 {
                bail!("--runs must be positive");
            }
            if !(t_end > 0.0 && step > 0.0 && period > 0.0 && log_box >= 0.0) {
                bail!("--t-end, --step and --period must be positive");
            }
            s.config.runs = runs;
            s.config.t_end = t_end;
            s.config.step = step;
            let sys = load_system(&input, &s.config.epsilon)?;
            let poly = match (&region, no_region) {
                (Some(path), _) => {
                    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                    match Report::from_json(&text)? {
                        Report::Region { polygon, .. } => Some(polygon),
                        _ => bail!("{} is not a region document", path.display()),
                    }
                }
                (None, true) => None,
                (None, false) => {
                    let verdict = certify(&sys, &s, common.strategy)?;
                    if verdict.permanent {
                        construct_region(&verdict.di, 1.0).ok()
                    } else {
                        eprintln!("not certified; simulating without a region");
                        None
                    }
                }
            };
            let cfg = EnsembleConfig {
                runs,
                seed: s.config.seed,
                t_end,
                step,
                log_box,
                schedule: match schedule {
                    ScheduleArg::Random => ScheduleChoice::PiecewiseRandom { period },
                    ScheduleArg::Sinusoidal => ScheduleChoice::Sinusoidal { frequency: 1.0 / period },
                    ScheduleArg::Unit => ScheduleChoice::Unit,
                },
                stride,
            };
            let trajectories = run_ensemble(&sys, &cfg, poly.as_ref())?;
            let report = permanence_report(&trajectories)?;
            eprintln!(
                "post-burn-in bounds x in [{:e}, {:e}], y in [{:e}, {:e}]",
                report.lower[0], report.upper[0], report.lower[1], report.upper[1]
            );
            if report.region_tracked {
                eprintln!(
                    "region: all runs entered: {}; runs leaving after entry: {}",
                    report.all_entered, report.violations
                );
            }
            if report.unbounded_amplitude {
                eprintln!("amplitude depends on the initial state (spread {:.3}); no uniform bounds", report.amplitude_spread);
            }
            let doc = Report::Trajectories { config: s.config.clone(), trajectories, report, region: poly };
            emit(&doc, &s.config.out, s.config.svg, "trajectories")?;
            Ok(0)
        }
        Command::Escape { input, common } => {
            let s = setup("escape", input.as_deref(), &common)?;
            let fan = match (&s.fan, &input) {
                (FanArg::Custom(rays), _) => Fan2::from_rays(rays, s.varrho.clone())?,
                (FanArg::Comparison, Some(p)) => Fan2::comparison(&load_system(p, &None)?.sources(), s.varrho.clone())?,
                (FanArg::Normal, Some(p)) => Fan2::normal(&load_system(p, &None)?.sources(), s.varrho.clone())?,
                (_, None) => bail!("escape needs an input model or --fan custom:<path>"),
            };
            let report = Report::Escape { cells: escape_table(&fan)?, fan };
            emit(&report, &s.config.out, s.config.svg, "escape")?;
            Ok(0)
        }
        Command::Plot { document, out } => {
            let text = fs::read_to_string(&document).with_context(|| format!("reading {}", document.display()))?;
            let report = Report::from_json(&text)?;
            let svg = report.render_svg();
            match out {
                Some(dir) => {
                    fs::create_dir_all(&dir)?;
                    let stem = document.file_stem().and_then(|s| s.to_str()).unwrap_or("figure");
                    fs::write(dir.join(format!("{stem}.svg")), svg)?;
                }
                None => print!("{svg}"),
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
