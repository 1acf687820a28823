use clap::{Args, Parser, Subcommand};
use pmci::config::RunConfig;
use pmci::density::DefectReport;
use pmci::engine::{build_seed, diagnostics, iterate, run_pipeline, Diagnostics};
use pmci::error::{Error, Result};
use pmci::export::{self, PatchFile};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "pmci", version, about = "Convex-integration solutions of radial Perona-Malik problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Seed, density steps, diagnostics and exports.
    Run(Common),
    /// Parabolic seed only; writes `seed.csv`.
    Seed(Common),
    /// One more density step on the field saved in the output directory.
    Step(Common),
    /// Diagnostics on the field saved in the output directory.
    Verify(Common),
    /// Writes `curves.dat` for the configured flux.
    DumpGeometry(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overriding the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sampling seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of density steps, overriding the configuration.
    #[arg(long)]
    iterations: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<(RunConfig, PathBuf)> {
        let (mut cfg, base) = match &self.config {
            Some(p) => (
                RunConfig::from_path(p)?,
                p.parent().map(Path::to_path_buf).unwrap_or_default(),
            ),
            None => (RunConfig::default(), PathBuf::from(".")),
        };
        if let Some(o) = &self.out {
            cfg.output = o.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(k) = self.iterations {
            cfg.iterations = k;
        }
        cfg.validate()?;
        Ok((cfg, base))
    }
}

fn summary(d: &Diagnostics) {
    for item in &d.items {
        println!(
            "{} {} value={:e} limit={:e} {}",
            if item.pass { "PASS" } else { "FAIL" },
            item.name,
            item.value,
            item.limit,
            item.detail
        );
    }
    println!(
        "patches={} defect={:e} displacement={:e}/{:e}",
        d.patch_count, d.defect, d.total_displacement, d.displacement_budget
    );
}

fn verdict(d: &Diagnostics) -> ExitCode {
    summary(d);
    if d.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn saved(cfg: &RunConfig) -> Result<(PatchFile, Vec<DefectReport>)> {
    let dir = &cfg.output;
    let patches: PatchFile = export::read_json(&dir.join(export::PATCH_FILE))?;
    let reports = match dir.join(export::DEFECT_FILE) {
        p if p.exists() => export::read_json(&p)?,
        _ => Vec::new(),
    };
    Ok((patches, reports))
}

fn execute(command: &Command) -> Result<ExitCode> {
    match command {
        Command::Run(c) => {
            let (cfg, base) = c.load()?;
            let result = run_pipeline(&cfg, &base)?;
            export::export_all(&cfg.output, &result.field, &result.reports, &result.diagnostics)?;
            Ok(verdict(&result.diagnostics))
        }
        Command::Seed(c) => {
            let (cfg, base) = c.load()?;
            let seed = build_seed(&cfg, &base)?;
            std::fs::create_dir_all(&cfg.output).map_err(|e| Error::io(cfg.output.display().to_string(), e))?;
            seed.field.seed.write_csv(&cfg.output.join("seed.csv"))?;
            println!(
                "M={:e} lambda={:e} lambda-={:e} delta0={:e} l0={:e}",
                seed.bound, seed.lambda, seed.field.spec.lambda_minus, seed.field.seed.delta0, seed.field.spec.l0
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Step(c) => {
            let (cfg, base) = c.load()?;
            let seed = build_seed(&cfg, &base)?;
            let (patches, mut reports) = saved(&cfg)?;
            let field = seed.field.clone().restore(&patches.generations)?;
            let (field, new) = iterate(&cfg, field, reports.len(), 1)?;
            reports.extend(new);
            let d = diagnostics(&seed, &field, &reports, &cfg)?;
            export::export_all(&cfg.output, &field, &reports, &d)?;
            Ok(verdict(&d))
        }
        Command::Verify(c) => {
            let (cfg, base) = c.load()?;
            let seed = build_seed(&cfg, &base)?;
            let (patches, reports) = saved(&cfg)?;
            let field = seed.field.clone().restore(&patches.generations)?;
            let d = diagnostics(&seed, &field, &reports, &cfg)?;
            export::write_diagnostics(&cfg.output.join(export::DIAGNOSTIC_FILE), &d)?;
            Ok(verdict(&d))
        }
        Command::DumpGeometry(c) => {
            let (cfg, base) = c.load()?;
            let seed = build_seed(&cfg, &base)?;
            std::fs::create_dir_all(&cfg.output).map_err(|e| Error::io(cfg.output.display().to_string(), e))?;
            export::write_curves(&cfg.output.join(export::CURVE_FILE), &seed.field)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
