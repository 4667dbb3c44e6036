//! `gibbs` — run replication experiments, single chains and diagnostics from
//! JSON configs.
//!
//! Exit status: 0 on success, 1 for configuration or input errors, 2 when the
//! computation itself fails.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gibbs_core::diagnostics::{concentration_slope, mgf_condition_check};
use gibbs_core::harness::{
    build_divergence, load_json, read_radius_pairs, resolve_omega, run_experiment, write_experiment, DataSource,
    ExperimentSpec, MgfSpec, RunOptions, SampleSpec,
};
use gibbs_core::model::read_dataset_csv_path;
use gibbs_core::rng::{stream, stream_rng};
use gibbs_core::sampler::{mh_run, ss_mh_run, write_chain_csv, ChainSummary, GibbsTarget};
use gibbs_core::GibbsError;

#[derive(Parser)]
#[command(name = "gibbs", version, about = "Gibbs posterior experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replication experiments over a grid of sample sizes.
    Experiment {
        #[command(subcommand)]
        action: ExperimentAction,
    },
    /// Run one chain; writes draws.csv and summary.json.
    Sample {
        config: PathBuf,
        #[arg(long, default_value = "sample-out")]
        out: PathBuf,
    },
    Diagnose {
        #[command(subcommand)]
        action: DiagnoseAction,
    },
}

#[derive(Subcommand)]
enum ExperimentAction {
    Run {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Full-size replication counts.
        #[arg(long)]
        full: bool,
        /// Record wall_ms (outputs stop being byte-reproducible).
        #[arg(long)]
        timing: bool,
        #[arg(long)]
        workers: Option<usize>,
    },
}

#[derive(Subcommand)]
enum DiagnoseAction {
    /// Exponential-moment check over a θ grid; prints a JSON report.
    Mgf { config: PathBuf },
    /// Log–log slope of radius against n from a results CSV.
    Rate { results: PathBuf },
}

/// Errors in what the user supplied, as opposed to failures while computing.
fn input_error(e: GibbsError) -> GibbsError {
    match e {
        GibbsError::Config(_) => e,
        other => GibbsError::Config(other.to_string()),
    }
}

fn exit_code(e: &GibbsError) -> u8 {
    match e {
        GibbsError::Config(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(command: Command) -> Result<(), GibbsError> {
    match command {
        Command::Experiment { action: ExperimentAction::Run { config, out, full, timing, workers } } => {
            let spec: ExperimentSpec = load_json(&config)?;
            let output = run_experiment(&spec, &RunOptions { full, record_timing: timing, workers })?;
            for path in write_experiment(&out, &output)? {
                println!("wrote {}", path.display());
            }
            for g in &output.summary.grid {
                println!(
                    "n={} rows={} errors={} mean_radius={} mean_misclass_est={}",
                    g.n,
                    g.rows,
                    g.errors,
                    fmt_opt(g.mean_radius),
                    fmt_opt(g.mean_misclass_est)
                );
            }
            if let Some(fit) = &output.summary.rate_fit {
                println!("slope {}", fit.slope);
            }
            if output.summary.errors > 0 {
                eprintln!("{} of {} rows failed; see the error column", output.summary.errors, output.rows.len());
            }
            Ok(())
        }
        Command::Sample { config, out } => sample(&config, &out),
        Command::Diagnose { action: DiagnoseAction::Mgf { config } } => {
            let spec: MgfSpec = load_json(&config)?;
            let star = match (&spec.theta_star, spec.generator.truth().as_point()) {
                (Some(t), _) => t.clone(),
                (None, Some(t)) => t.to_vec(),
                (None, None) => return Err(GibbsError::Config("generator truth is a function; set thetaStar".into())),
            };
            let mut rng = stream_rng(spec.seed, stream::DIAGNOSTIC);
            let design = spec.generator.generate(spec.mc_size.max(1), &mut rng).map_err(input_error)?;
            let div = build_divergence(spec.divergence, &spec.loss, &spec.generator, &design).map_err(input_error)?;
            let report = mgf_condition_check(
                &spec.loss,
                &spec.grid,
                &star,
                spec.omega,
                &div,
                spec.r,
                &spec.generator,
                spec.mc_size,
                &mut rng,
            )?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::Diagnose { action: DiagnoseAction::Rate { results } } => {
            let file = File::open(&results)
                .map_err(|e| GibbsError::Config(format!("cannot read {}: {e}", results.display())))?;
            let pairs = read_radius_pairs(file).map_err(input_error)?;
            let fit = concentration_slope(&pairs).map_err(input_error)?;
            println!("slope {}", fit.slope);
            println!("intercept {}", fit.intercept);
            println!("points {}", fit.pairs.len());
            Ok(())
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.4}"))
}

fn sample(config: &Path, out: &Path) -> Result<(), GibbsError> {
    let spec: SampleSpec = load_json(config)?;
    let (data, n) = match &spec.data {
        DataSource::Generate { generator, n, seed } => {
            (generator.generate(*n, &mut stream_rng(*seed, stream::DATA)).map_err(input_error)?, *n)
        }
        DataSource::Csv { path, layout } => {
            let path =
                if path.is_relative() { config.parent().unwrap_or(Path::new(".")).join(path) } else { path.clone() };
            let data = read_dataset_csv_path(&path, layout).map_err(input_error)?;
            let n = data.len();
            (data, n)
        }
    };
    let omega = resolve_omega(&spec.rate, n, &data)?;
    let target = GibbsTarget::new(spec.loss.clone(), spec.prior.clone(), &data, omega).map_err(input_error)?;
    let chain = if target.is_sparse() {
        ss_mh_run(&target, &spec.mh)?.to_dense(target.dim() - 1)
    } else {
        mh_run(&target, &spec.mh)?
    };
    std::fs::create_dir_all(out)?;
    let draws = out.join("draws.csv");
    write_chain_csv(&chain, File::create(&draws)?)?;
    let summary = serde_json::json!({
        "summary": ChainSummary::new(&chain, spec.level)?,
        "config": spec,
    });
    let summary_path = out.join("summary.json");
    let mut f = File::create(&summary_path)?;
    serde_json::to_writer_pretty(&mut f, &summary)?;
    f.write_all(b"\n")?;
    println!("wrote {}", draws.display());
    println!("wrote {}", summary_path.display());
    println!("omega {omega}");
    println!("acceptance {}", chain.acceptance_rate());
    Ok(())
}
