//! Experiment driver: parse a config (file and/or flags), run the requested
//! pipeline, print a human summary, and write JSON-lines records.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use roughmls::config::{Command as ExperimentCommand, ExperimentConfig, Overrides};
use roughmls::experiment::run_experiment;
use roughmls::report::{to_json_lines, VERDICT_FAIL};

#[derive(Parser)]
#[command(
    name = "roughmls",
    about = "Coset projections, good periodicity, and marked-length-spectrum experiments on free products of free abelian groups",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Subcommand)]
enum CliCommand {
    /// Verify the projection axioms and geodesic lemmas; estimate C.
    VerifyProjections(RunArgs),
    /// Perturb seeded elements into good (short-head, long-tail) form.
    FindGoodElement(RunArgs),
    /// Power property margins and periodicity of good elements.
    VerifyPeriodicity(RunArgs),
    /// Compare marked length spectra of two metrics on a sample.
    MlsExperiment(RunArgs),
    /// The square-root perturbation: equal spectra, unbounded gap, no rough
    /// geodesics.
    CounterexampleDemo(RunArgs),
    /// The full pipeline: constants, good elements, additivity, bound vs gap.
    RigidityCheck(RunArgs),
    /// Estimate and print every constant with provenance.
    ConstantsReport(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Plain-text config file; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Write JSON-lines records here (one record per line).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Seed for all sampling (mandatory, here or in the config).
    #[arg(long)]
    seed: Option<u64>,

    /// Verification ball radius.
    #[arg(long)]
    radius: Option<u32>,

    /// Largest power used by spectrum computations.
    #[arg(long)]
    nmax: Option<u32>,

    /// Quasi-geodesic multiplicative constant (rational, e.g. `1` or `3/2`).
    #[arg(long)]
    tau: Option<String>,

    /// Quasi-geodesic additive constant (rational).
    #[arg(long)]
    eta: Option<String>,

    /// Elements per sample or per sphere.
    #[arg(long)]
    samples: Option<u32>,

    /// Constant overrides: `C=..,L=..,R=..,kappa_bar=..`.
    #[arg(long = "override")]
    overrides: Option<String>,

    /// First metric spec (`standard | bfs:<genset> | sqrt:<base> | shift:<base>:<o>`).
    #[arg(long)]
    metric1: Option<String>,

    /// Second metric spec.
    #[arg(long)]
    metric2: Option<String>,

    /// Factor ranks of the presentation, e.g. `1,1` or `2,1`.
    #[arg(long)]
    factors: Option<String>,

    /// Suppress the human summary on stdout.
    #[arg(long)]
    quiet: bool,
}

fn build_config(command: ExperimentCommand, args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            let parsed = ExperimentConfig::parse(&text).context("parsing config")?;
            anyhow::ensure!(
                parsed.command == command,
                "config names command `{}` but the CLI invoked `{}`",
                parsed.command.as_str(),
                command.as_str()
            );
            parsed
        }
        None => ExperimentConfig::new(command),
    };
    if let Some(seed) = args.seed {
        cfg.seed = Some(seed);
    }
    if let Some(radius) = args.radius {
        cfg.radius = radius;
    }
    if let Some(nmax) = args.nmax {
        cfg.n_max = nmax;
    }
    if let Some(tau) = &args.tau {
        cfg.tau = roughmls::rational::parse_rational(tau)
            .with_context(|| format!("bad --tau `{tau}`"))?;
    }
    if let Some(eta) = &args.eta {
        cfg.eta = roughmls::rational::parse_rational(eta)
            .with_context(|| format!("bad --eta `{eta}`"))?;
    }
    if let Some(samples) = args.samples {
        cfg.sample_count = samples;
    }
    if let Some(spec) = &args.overrides {
        cfg.overrides = Overrides::parse(spec).context("parsing --override")?;
    }
    if let Some(m1) = &args.metric1 {
        cfg.metric1 = m1.clone();
    }
    if let Some(m2) = &args.metric2 {
        cfg.metric2 = Some(m2.clone());
    }
    if let Some(factors) = &args.factors {
        let parsed: Result<Vec<usize>, _> =
            factors.split(',').map(|s| s.trim().parse()).collect();
        cfg.factors = parsed.with_context(|| format!("bad --factors `{factors}`"))?;
        cfg.labels = None;
    }
    cfg.validate().context("validating config")?;
    Ok(cfg)
}

fn main() -> ExitCode {
    match run() {
        Ok(ok) => {
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run() -> Result<bool> {
    let cli = Cli::parse();
    let (command, args) = match &cli.command {
        CliCommand::VerifyProjections(a) => (ExperimentCommand::VerifyProjections, a),
        CliCommand::FindGoodElement(a) => (ExperimentCommand::FindGoodElement, a),
        CliCommand::VerifyPeriodicity(a) => (ExperimentCommand::VerifyPeriodicity, a),
        CliCommand::MlsExperiment(a) => (ExperimentCommand::MlsExperiment, a),
        CliCommand::CounterexampleDemo(a) => (ExperimentCommand::CounterexampleDemo, a),
        CliCommand::RigidityCheck(a) => (ExperimentCommand::RigidityCheck, a),
        CliCommand::ConstantsReport(a) => (ExperimentCommand::ConstantsReport, a),
    };
    let cfg = build_config(command, args)?;
    let run = run_experiment(&cfg).context("running experiment")?;

    if let Some(out) = &args.out {
        fs::write(out, to_json_lines(&run.records))
            .with_context(|| format!("writing records to {}", out.display()))?;
        for (i, (_, csv)) in run.csv.iter().enumerate() {
            let path = out.with_extension(format!("{i}.csv"));
            fs::write(&path, csv)
                .with_context(|| format!("writing csv to {}", path.display()))?;
        }
    }

    if !args.quiet {
        println!("{}", run.summary);
        for record in run.records.iter().filter(|r| r.verdict == VERDICT_FAIL) {
            println!("  FAIL {} {}", record.instance, record.measured);
        }
    }
    Ok(run.ok)
}
