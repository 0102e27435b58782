use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hintscout::check::{check_losses, Fault};
use hintscout::core::hints::PositionRule;
use hintscout::core::repr::DEFAULT_SAMPLE_BUDGET;
use hintscout::core::similarity::DEFAULT_RBF_FRACTION;
use hintscout::core::MetricSpec;
use hintscout::{cmd_select, cmd_similarity, Error, ReprOptions, SelectOptions};

/// Pick distillation hint positions by clustering teacher layers.
#[derive(Debug, Parser)]
#[command(name = "hintscout", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the layer-by-layer similarity matrix of a dump.
    Similarity {
        manifest: PathBuf,
        #[command(flatten)]
        metric: MetricArgs,
        #[command(flatten)]
        repr: ReprArgs,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Cluster the layers of a dump and emit a hint config.
    Select {
        manifest: PathBuf,
        #[command(flatten)]
        metric: MetricArgs,
        #[command(flatten)]
        repr: ReprArgs,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, value_enum, default_value_t = Rule::Center)]
        rule: Rule,
        #[arg(long = "max-iters", default_value_t = 100)]
        max_iters: usize,
        /// Let k-means keep iterating when a step raises the cost.
        #[arg(long)]
        no_cost_guard: bool,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run the built-in checks of the distillation loss kernels.
    CheckLosses {
        #[arg(long, hide = true, default_value = "none", value_parser = parse_fault)]
        fault: Fault,
    },
}

#[derive(Debug, Args)]
struct MetricArgs {
    #[arg(long, value_enum, default_value_t = Metric::CkaLinear)]
    metric: Metric,
    /// RBF bandwidth as a fraction of the median pairwise distance.
    #[arg(long, default_value_t = DEFAULT_RBF_FRACTION)]
    rbf_fraction: f64,
}

#[derive(Debug, Args)]
struct ReprArgs {
    /// z-score each channel before comparing layers.
    #[arg(long)]
    normalize: bool,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_BUDGET)]
    max_samples: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Metric {
    CkaLinear,
    CkaRbf,
    R2cca,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Rule {
    Center,
    Last,
}

fn parse_fault(s: &str) -> Result<Fault, String> {
    Fault::parse(s).ok_or_else(|| format!("unknown fault {s:?}"))
}

impl MetricArgs {
    fn spec(&self) -> Result<MetricSpec, Error> {
        Ok(match self.metric {
            Metric::CkaLinear => MetricSpec::cka_linear(),
            Metric::CkaRbf => MetricSpec::cka_rbf(self.rbf_fraction)?,
            Metric::R2cca => MetricSpec::r2_cca(),
        })
    }
}

impl ReprArgs {
    fn options(&self) -> ReprOptions {
        ReprOptions {
            normalize: self.normalize,
            max_samples: self.max_samples,
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    hintscout::init_threads_from_env()?;
    match cli.command {
        Command::Similarity {
            manifest,
            metric,
            repr,
            out,
        } => {
            let done = cmd_similarity(&manifest, metric.spec()?, repr.options(), &out)?;
            println!("layers: {}", done.matrix.len());
            println!("metric: {}", done.matrix.metric.kind.as_str());
            println!(
                "similarity: {:.1} ms (total {:.1} ms)",
                done.timings.similarity_ms, done.timings.total_ms
            );
            for f in &done.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Select {
            manifest,
            metric,
            repr,
            k,
            rule,
            max_iters,
            no_cost_guard,
            out,
        } => {
            let opts = SelectOptions {
                metric: metric.spec()?,
                k,
                rule: match rule {
                    Rule::Center => PositionRule::Center,
                    Rule::Last => PositionRule::Last,
                },
                max_iterations: max_iters,
                cost_guard: !no_cost_guard,
                repr: repr.options(),
            };
            let done = cmd_select(&manifest, &opts, &out)?;
            let positions: Vec<String> = done.hint.hint_positions.iter().map(|p| p.to_string()).collect();
            println!("positions: {}", positions.join(" "));
            println!("cost: {}", done.assignment.cost);
            println!(
                "iterations: {} ({})",
                done.assignment.iterations_run,
                done.assignment.stop_reason.as_str()
            );
            if !done.assignment.converged {
                eprintln!(
                    "warning: k-means stopped without converging ({})",
                    done.assignment.stop_reason.as_str()
                );
            }
            println!(
                "timings: represent {:.1} ms, cluster {:.1} ms, total {:.1} ms",
                done.timings.represent_ms, done.timings.cluster_ms, done.timings.total_ms
            );
            for f in &done.files {
                println!("wrote {}", f.display());
            }
        }
        Command::CheckLosses { fault } => {
            let report = check_losses(fault);
            for c in &report {
                match &c.error {
                    None => println!("ok   {}", c.name),
                    Some(e) => println!("FAIL {}: {e}", c.name),
                }
            }
            let passed = report.iter().filter(|c| c.passed()).count();
            println!("{passed}/{} checks passed", report.len());
            if let Some(first) = report.iter().find(|c| !c.passed()) {
                return Err(Error::Check(first.name.to_string()));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 64 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
