use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use icon_core::distributions::io::{write_matrix_csv, write_points_csv};
use icon_core::equivalence::{self, TheoremId, TheoremReport};
use icon_core::pipeline::{
    ablation_sweep, build_supervisory, hungarian_accuracy, load_dataset, run_experiment, synth_generate, write_sweep_csv,
    ExperimentConfig, Sides, SynthKind,
};

#[derive(Parser)]
#[command(name = "icon", version, about = "Information-contrastive learning experiments")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file or directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Suppress progress and summaries.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a toy dataset as a point CSV.
    Synth {
        #[arg(long, default_value = "blobs")]
        kind: String,
        #[arg(long, default_value_t = 120)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        noise: f64,
    },
    /// Write the supervisory matrix of a config as CSV.
    BuildP,
    /// Run an experiment and write its artifacts.
    Train,
    /// Hungarian accuracy of an assignments CSV.
    Eval {
        /// CSV with `cluster` and `label` columns.
        assignments: PathBuf,
    },
    /// Run the equivalence checks.
    Verify {
        /// Restrict to these checks (comma separated).
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
    },
    /// Grid over debiasing weight and walk length.
    Sweep {
        #[arg(long, value_delimiter = ',', default_value = "0,0.2,0.4,0.6,0.8")]
        alphas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        walks: Vec<usize>,
        /// Number of seeds, starting from `--seed` (or the config seed).
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        /// Side(s) the weight is applied to: p, q or both.
        #[arg(long, default_value = "both")]
        sides: String,
    },
}

fn load_config(global: &Global) -> Result<ExperimentConfig> {
    let path = global.config.as_ref().context("--config is required")?;
    let mut cfg = ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn out_path<'a>(global: &'a Global, what: &str) -> Result<&'a Path> {
    global.out.as_deref().with_context(|| format!("--out is required for {what}"))
}

fn report_table(reports: &[TheoremReport]) -> String {
    let mut s = format!("{:<20} {:>9} {:>12} {:>12} {:>10}  status\n", "check", "instances", "max_abs_gap", "max_rel_gap", "tolerance");
    for r in reports {
        s += &format!(
            "{:<20} {:>9} {:>12.3e} {:>12.3e} {:>10.1e}  {}\n",
            r.id.name(),
            r.instances,
            r.max_abs_gap,
            r.max_rel_gap,
            r.tolerance,
            if r.passed { "PASS" } else { "FAIL" }
        );
        for note in &r.notes {
            s += &format!("    {note}\n");
        }
    }
    s
}

fn eval_assignments(path: &Path) -> Result<f64> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).with_context(|| format!("no `{name}` column"));
    let (c, l) = (col("cluster")?, col("label")?);
    let mut predicted = Vec::new();
    let mut labels = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        predicted.push(rec[c].parse::<usize>()?);
        labels.push(rec[l].parse::<i64>()?);
    }
    Ok(hungarian_accuracy(&predicted, &labels)?)
}

fn run(cli: Cli) -> Result<bool> {
    let g = &cli.global;
    match &cli.command {
        Command::Synth { kind, n, noise } => {
            let kind: SynthKind = kind.parse()?;
            let d = synth_generate(kind, *n, *noise, g.seed.unwrap_or(0))?;
            let out = out_path(g, "synth")?;
            write_points_csv(out, &d.points, Some(&d.labels))?;
            if !g.quiet {
                eprintln!("wrote {} points to {}", n, out.display());
            }
        }
        Command::BuildP => {
            let cfg = load_config(g)?;
            cfg.check_paths()?;
            let data = load_dataset(&cfg)?;
            let (p, _) = build_supervisory(&cfg, &data)?;
            let out = out_path(g, "build-p")?;
            write_matrix_csv(out, p.probs())?;
            if !g.quiet {
                eprintln!("wrote {}x{} supervisory matrix to {}", p.n_rows(), p.n_cols(), out.display());
            }
        }
        Command::Train => {
            let cfg = load_config(g)?;
            let outcome = run_experiment(&cfg, g.out.as_deref())?;
            if !g.quiet {
                println!("{}", serde_json::to_string_pretty(&outcome.metrics)?);
            }
        }
        Command::Eval { assignments } => {
            let acc = eval_assignments(assignments)?;
            println!("{}", serde_json::json!({ "hungarian_accuracy": acc }));
        }
        Command::Verify { only } => {
            let seed = g.seed.unwrap_or(0);
            let reports = if only.is_empty() {
                equivalence::run_all(seed)?
            } else {
                let ids = only
                    .iter()
                    .map(|name| TheoremId::parse(name).with_context(|| format!("unknown check `{name}`")))
                    .collect::<Result<Vec<_>>>()?;
                ids.into_iter().map(|id| equivalence::run(id, seed)).collect::<icon_core::Result<Vec<_>>>()?
            };
            let json = serde_json::to_string_pretty(&reports)?;
            match &g.out {
                Some(path) => std::fs::write(path, json + "\n")?,
                None => println!("{json}"),
            }
            if !g.quiet {
                eprint!("{}", report_table(&reports));
            }
            return Ok(reports.iter().all(|r| r.passed));
        }
        Command::Sweep { alphas, walks, seeds, sides } => {
            let cfg = load_config(g)?;
            let sides: Sides = sides.parse()?;
            if *seeds == 0 {
                bail!("--seeds must be at least 1");
            }
            let seed_list: Vec<u64> = (cfg.seed..cfg.seed + seeds).collect();
            let out = out_path(g, "sweep")?;
            let rows = ablation_sweep(&cfg, alphas, walks, &seed_list, sides, Some(out))?;
            write_sweep_csv(&rows, &out.join("sweep.csv"))?;
            if !g.quiet {
                for r in &rows {
                    println!(
                        "alpha {:.3} walks {} accuracy {} loss {:.6} mean max prob {:.4}",
                        r.alpha,
                        r.walk_steps,
                        r.hungarian_accuracy.map_or("n/a".into(), |a| format!("{a:.4}")),
                        r.final_loss,
                        r.mean_max_prob
                    );
                }
            }
        }
    }
    Ok(true)
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("ICON_THREADS") {
        let n: usize = v.parse().with_context(|| format!("ICON_THREADS={v} is not a count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match init_threads().and_then(|_| run(cli)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
