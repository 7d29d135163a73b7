//! `lrfact`: generate instances, solve, diagnose and run the desk-scale experiments.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lrfact::harness::io::{atomic_write, factors_from_text, factors_to_text, matrix_to_text, read_text, trace_to_csv};
use lrfact::harness::{
    diagnose, gen_instance, run_fig1, run_fig2, run_fig3, run_single, solver_config, DiagnoseOptions,
    ExperimentConfig, HarnessError, RunBundle, FIG3_C_VALUES,
};
use lrfact::Exec;

#[derive(Parser)]
#[command(name = "lrfact", version, about = "Factored low-rank recovery with column-sparsity penalties")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance and write its config and ground truth.
    Gen(Common),
    /// Generate an instance and solve it with the configured model.
    Solve(Common),
    /// Check a stored solution against the instance its config describes.
    Diagnose {
        #[command(flatten)]
        common: Common,
        /// Factor file written by `solve` or `experiment`.
        #[arg(long)]
        solution: PathBuf,
        /// Samples for the KL inequality probe.
        #[arg(long, default_value_t = 100)]
        probe_samples: usize,
    },
    /// Desk-scale convergence studies and the lambda sweep.
    Experiment {
        which: Figure,
        #[command(flatten)]
        common: Common,
        /// Comma-separated `c` values for fig3.
        #[arg(long, value_delimiter = ',')]
        c_values: Option<Vec<f64>>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Figure {
    Fig1,
    Fig2,
    Fig3,
}

#[derive(Args)]
struct Common {
    /// `key = value` config file, applied before the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Write zero wall times so that reruns give identical bytes.
    #[arg(long)]
    deterministic: bool,
    /// Run independent work items on one thread.
    #[arg(long)]
    sequential: bool,
    #[arg(long)]
    m: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    r: Option<String>,
    #[arg(long)]
    kappa: Option<String>,
    #[arg(long)]
    sample_ratio: Option<String>,
    /// full, uniform_mask or gaussian.
    #[arg(long)]
    operator: Option<String>,
    /// l20 or dc.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    a: Option<String>,
    #[arg(long)]
    mu_tilde: Option<String>,
    #[arg(long)]
    c: Option<String>,
    /// Expression in `c`, `a` and `specnorm(X0)`.
    #[arg(long)]
    lambda_rule: Option<String>,
    #[arg(long)]
    rho_rule: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    max_iters: Option<String>,
    #[arg(long)]
    seed: Option<String>,
}

impl Common {
    fn resolve(&self, base: ExperimentConfig) -> Result<ExperimentConfig, HarnessError> {
        let mut cfg = base;
        if let Some(path) = &self.config {
            cfg.apply_text(&read_text(path)?)?;
        }
        let flags = [
            ("m", &self.m),
            ("n", &self.n),
            ("r", &self.r),
            ("kappa", &self.kappa),
            ("sample_ratio", &self.sample_ratio),
            ("operator", &self.operator),
            ("model", &self.model),
            ("a", &self.a),
            ("mu_tilde", &self.mu_tilde),
            ("c", &self.c),
            ("lambda_rule", &self.lambda_rule),
            ("rho_rule", &self.rho_rule),
            ("epsilon", &self.epsilon),
            ("max_iters", &self.max_iters),
            ("seed", &self.seed),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn exec(&self) -> Exec {
        if self.sequential {
            Exec::Sequential
        } else {
            Exec::default()
        }
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), HarnessError> {
    atomic_write(&dir.join(name), contents.as_bytes())
}

fn write_run(dir: &Path, b: &RunBundle, prefix: &str, deterministic: bool) -> Result<(), HarnessError> {
    write(dir, &format!("{prefix}config.txt"), &b.summary.config.to_text())?;
    write(dir, &format!("{prefix}trace.csv"), &trace_to_csv(&b.result.trace.records, deterministic))?;
    write(dir, &format!("{prefix}factors.txt"), &factors_to_text(&b.result.w))?;
    let summary = b.summary.to_key_values(deterministic).to_text();
    write(dir, &format!("{prefix}summary.txt"), &summary)?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Gen(common) => {
            let cfg = common.resolve(ExperimentConfig::fig1())?;
            let inst = gen_instance(&cfg)?;
            write(&common.out_dir, "config.txt", &cfg.to_text())?;
            write(&common.out_dir, "M.txt", &matrix_to_text(&inst.m_true))?;
            println!(
                "m = {}\nn = {}\np = {}\nspecnorm_x0 = {:?}",
                cfg.m,
                cfg.n,
                inst.op.p(),
                inst.specnorm_x0()?
            );
        }
        Command::Solve(common) => {
            let cfg = common.resolve(ExperimentConfig::fig1())?;
            let b = run_single(&cfg, &solver_config(&cfg))?;
            write_run(&common.out_dir, &b, "", common.deterministic)?;
            print!("{}", b.summary.to_key_values(common.deterministic).to_text());
        }
        Command::Diagnose {
            common,
            solution,
            probe_samples,
        } => {
            let cfg = common.resolve(ExperimentConfig::fig1())?;
            let inst = gen_instance(&cfg)?;
            let w = factors_from_text(&read_text(&solution)?)?;
            let mut opts = DiagnoseOptions::default();
            opts.probe.samples = probe_samples;
            opts.probe.seed = cfg.seed;
            opts.probe.exec = common.exec();
            let text = diagnose(&cfg, &inst, &w, &opts)?.to_key_values().to_text();
            write(&common.out_dir, "diagnose.txt", &text)?;
            print!("{text}");
        }
        Command::Experiment {
            which,
            common,
            c_values,
        } => match which {
            Figure::Fig1 | Figure::Fig2 => {
                let fig1 = matches!(which, Figure::Fig1);
                let base = if fig1 { ExperimentConfig::fig1() } else { ExperimentConfig::fig2() };
                let cfg = common.resolve(base)?;
                let solver = solver_config(&cfg);
                let b = if fig1 { run_fig1(&cfg, &solver)? } else { run_fig2(&cfg, &solver)? };
                write_run(&common.out_dir, &b, "", common.deterministic)?;
                print!("{}", b.summary.to_key_values(common.deterministic).to_text());
            }
            Figure::Fig3 => {
                let cfg = common.resolve(ExperimentConfig::fig3())?;
                let cs = c_values.unwrap_or_else(|| FIG3_C_VALUES.to_vec());
                let (sweep, bundles) = run_fig3(&cfg, &cs, &solver_config(&cfg), common.exec())?;
                for (i, b) in bundles.iter().enumerate() {
                    write_run(&common.out_dir, b, &format!("run{i}_"), common.deterministic)?;
                }
                let csv = sweep.to_csv();
                write(&common.out_dir, "sweep.csv", &csv)?;
                print!("{csv}");
            }
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::FAILURE
        }
    }
}
