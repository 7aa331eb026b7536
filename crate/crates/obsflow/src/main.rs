use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use sha2::{Digest, Sha256};

use obsflow::config::{ExperimentConfig, Preset, TraceSource, WorkloadConfig};
use obsflow::report::{self, Manifest};
use obsflow::sweep::{run_sweep, Workload};
use obsflow::tracefile::{self, create};
use obsflow::units::Duration;
use obsflow::{export, Error};
use obsflow_core::classifier::{summarize, ClassifierConfig};
use obsflow_core::prediction::{mine_rules, sessions, MinerConfig};
use obsflow_core::trace::{synthesize_trace, WorkloadSpec};

/// Trace-driven simulation of push-based observatory data delivery.
#[derive(Parser)]
#[command(name = "obsflow", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Seed for trace synthesis and the simulator; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, short, global = true)]
    out_dir: Option<PathBuf>,
    /// More log output (repeatable).
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Only print errors.
    #[arg(long, short, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a calibrated trace with its catalog and user table.
    Generate {
        /// Workload spec file (TOML, the fields of `[trace.synthetic]`).
        #[arg(long, conflicts_with = "preset")]
        spec: Option<PathBuf>,
        #[arg(long, default_value = "ooi-like")]
        preset: Preset,
        #[arg(long)]
        users: Option<u32>,
        /// Trace length, e.g. "30 d".
        #[arg(long)]
        duration: Option<Duration>,
    },
    /// Report user classes, request-type volume and overlap duplication.
    Classify {
        trace: PathBuf,
        /// Defaults to catalog.csv next to the trace.
        #[arg(long)]
        catalog: Option<PathBuf>,
        /// Also mine association rules from user sessions into this file.
        #[arg(long)]
        rules: Option<PathBuf>,
    },
    /// Run a sweep and write its reports into a fresh run directory.
    Run {
        /// Experiment config (TOML); without one the preset sweep runs.
        config: Option<PathBuf>,
        #[arg(long, default_value = "ooi-like")]
        preset: Preset,
        /// Worker threads; defaults to the available parallelism.
        #[arg(long)]
        threads: Option<usize>,
        /// Also dump final caches, groups and rules of every cell.
        #[arg(long)]
        state: bool,
    },
    /// Re-render the tables of a run directory and check its digests.
    Report { run: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match (cli.global.quiet, cli.global.verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Info,
        (false, 1) => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).format_target(false).init();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match cli.command {
        Command::Generate { spec, preset, users, duration } => generate(g, spec.as_deref(), preset, users, duration),
        Command::Classify { trace, catalog, rules } => classify(&trace, catalog.as_deref(), rules.as_deref()),
        Command::Run { config, preset, threads, state } => run(g, config.as_deref(), preset, threads, state),
        Command::Report { run } => show(&run),
    }
}

fn generate(g: &Global, spec: Option<&Path>, preset: Preset, users: Option<u32>, duration: Option<Duration>) -> Result<()> {
    let mut w = match spec {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str::<WorkloadConfig>(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => WorkloadConfig::preset(preset),
    };
    w.n_users = users.or(w.n_users);
    w.duration = duration.or(w.duration);
    if g.seed.is_some() {
        w.seed = g.seed;
    }
    let spec = w.resolve(1);
    let out = g.out_dir.clone().unwrap_or_else(|| PathBuf::from("trace"));
    let t = synthesize_trace(&spec)?;
    tracefile::save(&out, &t.records, &t.catalog, &t.users)?;
    info!("wrote {} records for {} users to {}", t.records.len(), t.users.len(), out.display());
    print_calibration(&spec, &t.records, &t.catalog);
    Ok(())
}

fn print_calibration(spec: &WorkloadSpec, records: &[obsflow_core::trace::AccessRecord], catalog: &obsflow_core::trace::Catalog) {
    let s = summarize(records, catalog, &ClassifierConfig::default());
    let (r, rt, o) = s.type_mix();
    println!("{:<28}{:>10}{:>10}", "", "measured", "target");
    println!("{:<28}{:>10.4}{:>10.4}", "program volume share", s.program_volume_share(), spec.program_volume_fraction);
    println!("{:<28}{:>10.4}{:>10.4}", "regular share", r, spec.mix.regular);
    println!("{:<28}{:>10.4}{:>10.4}", "real-time share", rt, spec.mix.real_time);
    println!("{:<28}{:>10.4}{:>10.4}", "overlapping share", o, spec.mix.overlapping);
    let dup = spec.overlap_duplicate_fraction.map_or_else(|| "-".to_string(), |d| format!("{d:.4}"));
    println!("{:<28}{:>10.4}{:>10}", "overlap duplicate share", s.duplicate_share(), dup);
}

fn classify(trace: &Path, catalog: Option<&Path>, rules: Option<&Path>) -> Result<()> {
    let catalog = catalog.map(Path::to_path_buf).unwrap_or_else(|| trace.with_file_name("catalog.csv"));
    let t = tracefile::load(trace, &catalog, None)?;
    let s = summarize(&t.records, &t.catalog, &ClassifierConfig::default());
    let (r, rt, o) = s.type_mix();
    println!("users\t{}", s.users);
    println!("human users\t{:.4}", s.human_user_share());
    println!("program users\t{:.4}", s.program_user_share());
    println!("human volume\t{:.4}", 1.0 - s.program_volume_share());
    println!("program volume\t{:.4}", s.program_volume_share());
    println!("regular\t{r:.4}");
    println!("real-time\t{rt:.4}");
    println!("overlapping\t{o:.4}");
    println!("overlap fresh bytes\t{}", s.fresh_bytes);
    println!("overlap duplicate bytes\t{}", s.duplicate_bytes);
    println!("overlap duplicate share\t{:.4}", s.duplicate_share());
    if let Some(path) = rules {
        let cfg = MinerConfig::default();
        let mined = mine_rules(&sessions(&t.records, cfg.session_gap), &cfg);
        export::write_rules(create(path)?, &mined, &t.catalog)?;
        info!("wrote {} rules to {}", mined.rules.len(), path.display());
    }
    Ok(())
}

fn run(g: &Global, config: Option<&Path>, preset: Preset, threads: Option<usize>, state: bool) -> Result<()> {
    let mut cfg = match config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::preset(preset),
    };
    if let Some(seed) = g.seed {
        cfg.seed = seed;
        if let TraceSource::Synthetic(w) = &mut cfg.trace {
            w.seed = None;
        }
    }
    if let Some(dir) = &g.out_dir {
        cfg.out_dir = dir.clone();
    }
    cfg.validate()?;
    let workload = Workload::prepare(&cfg)?;
    info!("{} records, {} cells", workload.records.len(), cfg.sweep.len());
    let threads = threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let total = cfg.sweep.len();
    let results = run_sweep(&cfg, &workload, threads, state, &|i, cell| info!("[{}/{total}] {cell}", i + 1))?;
    let dir = report::fresh_run_dir(&cfg.out_dir, &cfg.hash()?)?;
    report::write_run(&dir, &cfg, &results)?;
    if state {
        for (i, r) in results.iter().enumerate() {
            let sub = dir.join("state").join(format!("{i:03}-{}", r.cell.strategy));
            std::fs::create_dir_all(&sub).map_err(|e| Error::Path(sub.clone(), e))?;
            let caches = r.outcome.caches.iter().map(|(d, c)| (*d, c));
            export::write_cache_dump(create(&sub.join("cache.csv"))?, caches, &workload.catalog)?;
            if let Some(p) = &r.outcome.placement {
                export::write_groups(create(&sub.join("groups.csv"))?, p)?;
            }
            if let Some(rules) = &r.outcome.rules {
                export::write_rules(create(&sub.join("rules.csv"))?, rules, &workload.catalog)?;
            }
        }
    }
    let rows: Vec<report::CellRow> = results.iter().map(report::CellRow::from).collect();
    print!("{}", report::summary(&rows));
    println!("reports in {}", dir.display());
    Ok(())
}

fn show(run: &Path) -> Result<()> {
    let path = run.join("manifest.json");
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    let mut bad = Vec::new();
    for (name, digest) in &manifest.files {
        let bytes = std::fs::read(run.join(name)).with_context(|| format!("reading {name}"))?;
        if hex::encode(Sha256::digest(&bytes)) != *digest {
            bad.push(name.as_str());
        }
    }
    if !bad.is_empty() {
        warn!("files changed since the run: {}", bad.join(", "));
    }
    let rows = report::read_cells(std::fs::File::open(run.join("cells.csv"))?)?;
    if rows.len() != manifest.cells {
        bail!("cells.csv holds {} rows, the manifest says {}", rows.len(), manifest.cells);
    }
    println!("config {} seed {}", &manifest.config_sha256[..12], manifest.seed);
    print!("{}", report::summary(&rows));
    Ok(())
}
