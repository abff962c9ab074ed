//! `swing`: solve, verify and price swing options from a JSON config.
//!
//! Exit codes: 0 success, 1 invalid input or I/O failure, 2 a verifier
//! check failed.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use swing_core::config::RunConfig;
use swing_core::io::{read_surface_csv, surface_csv_string};
use swing_core::montecarlo::price;
use swing_core::verify::{verify, GridInfo};
use swing_core::{marginal_left, solve_dp};

const SURFACE_FILE: &str = "surface.csv";
const SOLVE_FILE: &str = "solve.json";
const VERIFY_FILE: &str = "verify.json";
const PRICE_FILE: &str = "price.json";

#[derive(Parser)]
#[command(name = "swing", version, about = "Swing options with a rate cap and a volume budget")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the DP and write the surface CSV plus metadata.
    Solve(Common),
    /// Run every verifier check; exit 2 if any fails.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Verify this surface CSV instead of a freshly solved one.
        #[arg(long)]
        surface: Option<PathBuf>,
    },
    /// Primal and dual Monte-Carlo bounds.
    Price(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; falls back to the config's `out`, then `.`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paths: Option<usize>,
}

struct Loaded {
    config: RunConfig,
    hash: String,
    out: PathBuf,
}

impl Common {
    fn load(&self) -> Result<Loaded> {
        let text = fs::read_to_string(&self.config)
            .with_context(|| format!("reading {}", self.config.display()))?;
        let mut config: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing {}", self.config.display()))?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(paths) = self.paths {
            config.n_paths = paths;
        }
        config.validate().context("invalid configuration")?;
        let out = self
            .out
            .clone()
            .or_else(|| config.out.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
        let hash = config.hash();
        Ok(Loaded { config, hash, out })
    }
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn solve(common: &Common) -> Result<ExitCode> {
    let Loaded { config, hash, out } = common.load()?;
    let (model, volume) = config.model.build()?;
    let surface = solve_dp(&model, &volume)?;
    let csv = surface_csv_string(&model, &surface, &marginal_left(&model, &surface)?)?;
    let csv_path = out.join(SURFACE_FILE);
    fs::write(&csv_path, &csv).with_context(|| format!("writing {}", csv_path.display()))?;
    let level = config.start_level()?;
    let meta = json!({
        "config_hash": hash,
        "model": config.model,
        "model_id": model.id(),
        "grid": GridInfo::of(&volume, model.step_count()),
        "dt": model.time().dt(),
        "dy": volume.dy(),
        "y0": config.y0,
        "value": surface.value(0, 0, level),
        "surface": { "file": SURFACE_FILE, "rows": csv.lines().count() - 1, "sha256": sha256_hex(csv.as_bytes()) },
    });
    write_json(&out.join(SOLVE_FILE), &meta)?;
    println!("J(0, y0={}) = {:.10}  ({} written)", config.y0, surface.value(0, 0, level), csv_path.display());
    Ok(ExitCode::SUCCESS)
}

fn verify_cmd(common: &Common, surface_path: Option<&Path>) -> Result<ExitCode> {
    let Loaded { config, hash, out } = common.load()?;
    let (model, volume) = config.model.build()?;
    let surface = match surface_path {
        Some(path) => {
            let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
            read_surface_csv(BufReader::new(file), &model, &volume)
                .with_context(|| format!("reading {}", path.display()))?
        }
        None => solve_dp(&model, &volume)?,
    };
    let report = verify(&model, &surface, config.tolerances, Some(&config.model))?;
    let mut value = serde_json::to_value(&report)?;
    value["config_hash"] = json!(hash);
    value["model"] = json!(config.model);
    write_json(&out.join(VERIFY_FILE), &value)?;
    let failed: Vec<&str> = report.failures().map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        println!("verify: all {} checks pass", report.checks.len());
        Ok(ExitCode::SUCCESS)
    } else {
        println!("verify: {} of {} checks FAIL: {}", failed.len(), report.checks.len(), failed.join(", "));
        Ok(ExitCode::from(2))
    }
}

fn price_cmd(common: &Common) -> Result<ExitCode> {
    let Loaded { config, hash, out } = common.load()?;
    let (model, volume) = config.model.build()?;
    let surface = solve_dp(&model, &volume)?;
    let report = price(&model, &surface, config.y0, config.n_paths, config.seed)?;
    let mut value = serde_json::to_value(&report)?;
    value["model"] = json!(config.model);
    value["config_hash"] = json!(hash);
    write_json(&out.join(PRICE_FILE), &value)?;
    println!(
        "primal {:.6} ± {:.6}  dual {:.6} ± {:.6}  gap {:.6}",
        report.primal.mean, report.primal.stderr, report.dual.mean, report.dual.stderr, report.gap
    );
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Solve(common) => solve(common),
        Command::Verify { common, surface } => verify_cmd(common, surface.as_deref()),
        Command::Price(common) => price_cmd(common),
    };
    outcome.unwrap_or_else(|err| {
        eprintln!("error: {err:#}");
        ExitCode::from(1)
    })
}
