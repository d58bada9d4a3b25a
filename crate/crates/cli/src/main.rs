use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use diffloc::channel::{export_dataset, ingest_dataset, MpcGroup, Scene};
use diffloc::experiments::{
    build_default_scene, export_report, full_scale_scene, load_report, quartiles, run_sweep, synthesize_profiles,
    SweepConfig, SweepReport,
};
use diffloc::fap::{select_fap, DEFAULT_T_FAP_DB};
use diffloc::par::ExecMode;

/// Diffraction-aided outdoor-to-indoor positioning experiments.
#[derive(Parser)]
#[command(name = "diffloc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the default sweep configuration (TOML), optionally exporting the
    /// scene's synthesized multipath dataset.
    Scene(SceneArgs),
    /// Run a frequency sweep and write CSV reports.
    Sweep(SweepArgs),
    /// Ingest a line-delimited multipath dataset and tally first arriving paths.
    Ingest(IngestArgs),
    /// Re-read a report directory and write it out again.
    Report(ReportArgs),
}

#[derive(Args)]
struct SceneArgs {
    /// Use the 0.5 m grid on floors 3-7 instead of the desk-scale grid.
    #[arg(long)]
    full_scale: bool,
    /// Write the configuration here instead of stdout.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Sweep configuration whose scene is used for --dataset.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Also write the synthesized top-k multipath records to this file.
    #[arg(long, requires = "frequency")]
    dataset: Option<PathBuf>,
    /// Carrier frequency for --dataset, in Hz.
    #[arg(long)]
    frequency: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep configuration (TOML). Defaults to the built-in desk-scale scene.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output directory for the CSV reports.
    #[arg(short, long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// FAP threshold below the strongest path, in dB.
    #[arg(long)]
    t_fap: Option<f64>,
    /// Noise realisations per receiver and frequency.
    #[arg(long)]
    trials: Option<usize>,
    /// Use exact FAP lengths as ranges.
    #[arg(long)]
    noiseless: bool,
    /// Run on a single thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct IngestArgs {
    /// Dataset file (one JSON record per line).
    dataset: PathBuf,
    #[arg(long, default_value_t = 400e6)]
    bandwidth: f64,
    #[arg(long, default_value_t = 290.0)]
    temperature: f64,
    #[arg(long, default_value_t = DEFAULT_T_FAP_DB)]
    t_fap: f64,
    /// Write per-pair FAP selections as CSV into this directory.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory holding a previously written report.
    #[arg(long)]
    from: PathBuf,
    /// Destination directory.
    #[arg(short, long)]
    out: PathBuf,
}

fn load_config(path: Option<&Path>) -> Result<SweepConfig> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            SweepConfig::from_toml(&text).with_context(|| format!("parsing {}", p.display()))
        }
        None => Ok(SweepConfig::default()),
    }
}

fn scene(args: SceneArgs) -> Result<()> {
    let mut cfg = load_config(args.config.as_deref())?;
    if args.full_scale {
        cfg.scene = full_scale_scene();
    } else if args.config.is_none() {
        cfg.scene = build_default_scene();
    }
    let text = cfg.to_toml();
    match &args.output {
        Some(p) => fs::write(p, &text).with_context(|| format!("writing {}", p.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    if let (Some(path), Some(f)) = (&args.dataset, args.frequency) {
        let scene = Scene::new(cfg.scene)?;
        let pdps = synthesize_profiles(&scene, f, cfg.exec);
        export_dataset(path, &pdps).with_context(|| format!("writing {}", path.display()))?;
        let n: usize = pdps.iter().map(|p| p.len()).sum();
        eprintln!("wrote {n} records to {}", path.display());
    }
    Ok(())
}

fn summarize(report: &SweepReport) {
    eprintln!(
        "{:>10}  {:>4}  {:>6} {:>6} {:>6} {:>6}  {:>9} {:>9} {:>9}  {:>8}",
        "f (GHz)", "band", "MPC1%", "MPC2%", "MPC3%", "MPC4%", "D-NLS p50", "LLS p50", "PEB p50", "excluded"
    );
    let median = |v: &[f64]| quartiles(v).map_or(f64::NAN, |q| q.median);
    for r in &report.results {
        eprintln!(
            "{:>10.2}  {:>4}  {:>6.1} {:>6.1} {:>6.1} {:>6.1}  {:>9.3} {:>9.3} {:>9.3}  {:>7.1}%",
            r.frequency_hz / 1e9,
            r.band,
            r.p_fap[0],
            r.p_fap[1],
            r.p_fap[2],
            r.p_fap[3],
            median(&r.dnls_errors),
            median(&r.lls_errors),
            median(&r.peb),
            100.0 * r.exclusion_rate()
        );
    }
}

fn sweep(args: SweepArgs) -> Result<()> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(t) = args.t_fap {
        cfg.t_fap_db = t;
    }
    if let Some(n) = args.trials {
        cfg.trials = n;
    }
    if args.noiseless {
        cfg.noiseless = true;
    }
    if args.sequential {
        cfg.exec = ExecMode::Sequential;
    }
    let report = run_sweep(&cfg)?;
    export_report(&report, &args.out).with_context(|| format!("writing reports to {}", args.out.display()))?;
    summarize(&report);
    Ok(())
}

fn ingest(args: IngestArgs) -> Result<()> {
    let report = ingest_dataset(&args.dataset, args.bandwidth, args.temperature)
        .with_context(|| format!("ingesting {}", args.dataset.display()))?;
    for r in &report.rejected {
        eprintln!("line {}: rejected: {}", r.line, r.reason);
    }
    let mut counts = [0usize; 4];
    let mut rows = Vec::new();
    for pdp in &report.pdps {
        if let Ok(sel) = select_fap(pdp, args.t_fap) {
            counts[sel.chosen.group.index()] += 1;
            rows.push((pdp.anchor_id, pdp.rx_id, sel));
        }
    }
    println!(
        "{} records accepted, {} rejected, {} profiles",
        report.accepted,
        report.rejected.len(),
        report.pdps.len()
    );
    let total: usize = counts.iter().sum();
    for g in MpcGroup::ALL {
        let pct = if total == 0 {
            0.0
        } else {
            100.0 * counts[g.index()] as f64 / total as f64
        };
        println!("{g}: {pct:.2}% of first arriving paths");
    }
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        let path = dir.join("fap.csv");
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(["anchor_id", "rx_id", "group", "interactions", "path_length_m", "snr_db"])?;
        for (a, rx, sel) in rows {
            w.write_record([
                a.to_string(),
                rx.to_string(),
                sel.chosen.group.to_string(),
                sel.chosen.path_string(),
                sel.chosen.path_length.to_string(),
                sel.chosen.snr_db.to_string(),
            ])?;
        }
        w.flush()?;
    }
    if report.accepted == 0 && !report.rejected.is_empty() {
        bail!("every record was rejected");
    }
    Ok(())
}

fn report(args: ReportArgs) -> Result<()> {
    let report = load_report(&args.from).with_context(|| format!("reading {}", args.from.display()))?;
    export_report(&report, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    summarize(&report);
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Scene(a) => scene(a),
        Command::Sweep(a) => sweep(a),
        Command::Ingest(a) => ingest(a),
        Command::Report(a) => report(a),
    }
}
