use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use geodescent_harness::compare::{compare, to_csv, to_text, write_plot_files};
use geodescent_harness::config::{load_config, LoadedConfig};
use geodescent_harness::experiment::build;
use geodescent_harness::fit::fit_rate;
use geodescent_harness::runner::{run_experiment, Report};
use geodescent_harness::trace::{read_trace, Trace};
use rayon::prelude::*;

/// Environment variable naming the directory experiment outputs go under.
const OUTPUT_ROOT_VAR: &str = "GEODESCENT_OUTPUT_ROOT";

const OK: u8 = 0;
const VIOLATION: u8 = 1;
const USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "geodescent", version, about = "Run and inspect Riemannian descent experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run { config: PathBuf },
    /// Run every `*.toml` config in a directory concurrently.
    Batch { dir: PathBuf },
    /// Fit log(gap) against log(k) on a trace.
    Fit {
        trace: PathBuf,
        #[arg(long = "from")]
        from: usize,
        #[arg(long = "to")]
        to: usize,
    },
    /// Compare traces of the same objective and start.
    Compare {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        /// Write the full per-k table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Write one two-column `k gap` file per trace.
        #[arg(long)]
        plot_dir: Option<PathBuf>,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
}

fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_VAR).map_or_else(|| PathBuf::from("runs"), PathBuf::from)
}

fn load(path: &Path) -> Option<LoadedConfig> {
    match load_config(path) {
        Ok(c) => {
            for w in &c.warnings {
                eprintln!("warning: {}: {w}", path.display());
            }
            Some(c)
        }
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            None
        }
    }
}

fn summarize(r: &Report) {
    println!(
        "{}: {} after {} iterations, final gap {}",
        r.name,
        if r.passed { "PASS" } else { "FAIL" },
        r.iterations,
        r.final_gap.map_or("n/a".into(), |g| format!("{g:.3e}"))
    );
    for g in &r.guarantees {
        println!(
            "  {} {}: worst slack {}, worst ratio {}{}",
            if g.passed { "ok  " } else { "FAIL" },
            g.name,
            g.worst_slack.map_or("n/a".into(), |s| format!("{s:.3e}")),
            g.worst_ratio.map_or("n/a".into(), |s| format!("{s:.3e}")),
            g.first_violation.map_or(String::new(), |k| format!(", first violation at k = {k}"))
        );
    }
    for f in &r.fits {
        println!("  fit on [{}, {}]: slope {:.4}, r2 {:.4}", f.window.0, f.window.1, f.slope, f.r2);
    }
    for e in &r.errors {
        println!("  error: {e}");
    }
}

fn run(path: &Path) -> u8 {
    let Some(cfg) = load(path) else { return USAGE };
    match run_experiment(&cfg, &output_root()) {
        Ok(r) => {
            summarize(&r);
            if r.passed {
                OK
            } else {
                VIOLATION
            }
        }
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            USAGE
        }
    }
}

fn batch(dir: &Path) -> u8 {
    let mut paths: Vec<PathBuf> = match std::fs::read_dir(dir) {
        Ok(entries) => entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "toml"))
            .collect(),
        Err(e) => {
            eprintln!("error: {}: {e}", dir.display());
            return USAGE;
        }
    };
    paths.sort();
    if paths.is_empty() {
        eprintln!("error: no .toml configs in {}", dir.display());
        return USAGE;
    }
    let loaded: Vec<Option<LoadedConfig>> = paths.iter().map(|p| load(p)).collect();
    if loaded.iter().any(Option::is_none) {
        return USAGE;
    }
    let loaded: Vec<LoadedConfig> = loaded.into_iter().flatten().collect();
    let mut names: Vec<&str> = loaded.iter().map(|c| c.name.as_str()).collect();
    names.sort();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        eprintln!("error: two experiments are named {}", w[0]);
        return USAGE;
    }
    let root = output_root();
    let results: Vec<_> = loaded.par_iter().map(|c| run_experiment(c, &root)).collect();
    let mut code = OK;
    for (p, r) in paths.iter().zip(results) {
        match r {
            Ok(r) => {
                summarize(&r);
                if !r.passed {
                    code = code.max(VIOLATION);
                }
            }
            Err(e) => {
                eprintln!("error: {}: {e}", p.display());
                code = USAGE;
            }
        }
    }
    code
}

fn read(path: &Path) -> Option<Trace> {
    match read_trace(path) {
        Ok(t) => {
            if t.truncated {
                eprintln!("warning: {}: dropped a truncated final line", path.display());
            }
            Some(t)
        }
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            None
        }
    }
}

fn fit(path: &Path, from: usize, to: usize) -> u8 {
    let Some(t) = read(path) else { return USAGE };
    let gaps: Vec<f64> = t.steps.iter().map(|s| s.gap).collect();
    match fit_rate(&gaps, from, to) {
        Ok(f) => {
            println!("{}", serde_json::to_string_pretty(&f).expect("fit serializes"));
            OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            USAGE
        }
    }
}

fn compare_cmd(paths: &[PathBuf], csv: Option<&Path>, plot_dir: Option<&Path>) -> u8 {
    let Some(traces) = paths.iter().map(|p| read(p)).collect::<Option<Vec<_>>>() else { return USAGE };
    let c = match compare(&traces) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return USAGE;
        }
    };
    print!("{}", to_text(&c));
    if let Some(p) = csv {
        if let Err(e) = std::fs::write(p, to_csv(&c)) {
            eprintln!("error: {}: {e}", p.display());
            return USAGE;
        }
    }
    if let Some(d) = plot_dir {
        match write_plot_files(&traces, d) {
            Ok(files) => {
                for f in files {
                    println!("wrote {}", f.display());
                }
            }
            Err(e) => {
                eprintln!("error: {}: {e}", d.display());
                return USAGE;
            }
        }
    }
    OK
}

fn validate(path: &Path) -> u8 {
    let Some(cfg) = load(path) else { return USAGE };
    match build(&cfg.config) {
        Ok(_) => {
            println!("{}: valid", path.display());
            OK
        }
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            USAGE
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    ExitCode::from(match &cli.command {
        Command::Run { config } => run(config),
        Command::Batch { dir } => batch(dir),
        Command::Fit { trace, from, to } => fit(trace, *from, *to),
        Command::Compare { traces, csv, plot_dir } => compare_cmd(traces, csv.as_deref(), plot_dir.as_deref()),
        Command::Validate { config } => validate(config),
    })
}
