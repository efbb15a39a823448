use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fairsynth_core::dataset::{load_csv, load_csv_with_schema, RoleConfig};
use fairsynth_core::graph::AttributeGraph;
use fairsynth_core::hardness::{reduce, SatInstance};
use fairsynth_core::par::Exec;
use fairsynth_core::pipeline::{self, Budget, EvaluateConfig, RunConfig};
use fairsynth_core::selection::{SearchConfig, SelectorMode};
use fairsynth_core::{selftest, Error};

#[derive(Parser)]
#[command(name = "fairsynth", version, about = "Private, fairness-constrained synthetic tables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a tree model to a CSV and sample a synthetic table.
    Generate(GenerateArgs),
    /// Compare a synthetic table with its source.
    Evaluate(EvaluateArgs),
    /// Encode a DIMACS 3-CNF formula as a fair-tree instance.
    Reduce(ReduceArgs),
    /// Run the built-in oracle checks.
    Selftest,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    roles: PathBuf,
    #[arg(long, conflicts_with = "rho")]
    epsilon: Option<f64>,
    /// Defaults to 1/n².
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    /// Budget fractions for 1-way measurement, selection and 2-way measurement.
    #[arg(long, value_delimiter = ',')]
    split: Option<Vec<f64>>,
    #[arg(long, default_value = "greedy")]
    selector: SelectorMode,
    /// Skip all noise; no privacy guarantee.
    #[arg(long)]
    noiseless: bool,
    /// Graph JSON whose weights replace the selection scores (noiseless only).
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    n_out: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    sensitivity: f64,
    #[arg(long, default_value_t = fairsynth_core::selection::DEFAULT_MAX_QUEUE)]
    max_queue: usize,
    #[arg(long)]
    sequential: bool,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    budget: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    original: PathBuf,
    #[arg(long)]
    synthetic: PathBuf,
    #[arg(long)]
    roles: PathBuf,
    /// Outcome value counted as positive (default: second code).
    #[arg(long)]
    positive: Option<String>,
    /// Protected value counted as privileged (default: second code).
    #[arg(long)]
    privileged: Option<String>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ReduceArgs {
    #[arg(long)]
    cnf: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::BudgetExceeded { .. } => 3,
        Error::GuardTripped(_) => 4,
        _ => 2,
    }
}

fn write_json(path: Option<&Path>, value: &impl serde::Serialize) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::Config(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn generate(a: GenerateArgs) -> Result<(), Error> {
    let roles = RoleConfig::from_json_file(&a.roles)?;
    let load = load_csv(&a.input, &roles)?;
    for w in &load.warnings {
        eprintln!("warning: {w}");
    }
    let budget = match (a.epsilon, a.rho) {
        (Some(epsilon), None) => Budget::Approx { epsilon, delta: a.delta },
        (None, Some(rho)) => Budget::Rho { rho, delta: a.delta },
        (None, None) if a.noiseless => Budget::Rho { rho: 0.0, delta: None },
        _ => return Err(Error::Config("give exactly one of --epsilon or --rho".into())),
    };
    let mut cfg = RunConfig::new(budget, a.selector);
    cfg.noiseless = a.noiseless;
    if let Some(s) = a.split {
        cfg.split = s
            .try_into()
            .map_err(|s: Vec<f64>| Error::Config(format!("--split takes 3 fractions, got {}", s.len())))?;
    }
    cfg.n_out = a.n_out;
    cfg.seed = a.seed;
    cfg.sensitivity = a.sensitivity;
    cfg.exec = if a.sequential { Exec::Sequential } else { Exec::Parallel };
    cfg.search = SearchConfig {
        max_queue: a.max_queue,
        trace: false,
    };
    if let Some(w) = &a.weights {
        cfg.weights = Some(AttributeGraph::from_json_file(w)?);
    }
    let out = pipeline::generate(&load.table, &cfg)?;
    out.synthetic.write_csv(&a.output)?;
    write_json(Some(&a.model), &out.model_document(a.selector))?;
    write_json(Some(&a.budget), &out.budget)?;
    match (out.budget.noiseless, out.budget.epsilon, out.budget.delta) {
        (false, Some(eps), Some(delta)) => eprintln!(
            "wrote {} rows; rho {:.6} spent, ({eps:.6}, {delta:e})-DP",
            out.synthetic.n_rows(),
            out.budget.rho_spent
        ),
        _ => eprintln!(
            "wrote {} rows; noiseless, tree weight {}",
            out.synthetic.n_rows(),
            out.tree.total_weight()
        ),
    }
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<(), Error> {
    let roles = RoleConfig::from_json_file(&a.roles)?;
    let original = load_csv(&a.original, &roles)?.table;
    let synthetic = load_csv_with_schema(&a.synthetic, original.schema())?;
    let cfg = EvaluateConfig {
        positive: a.positive,
        privileged: a.privileged,
        exec: Exec::Parallel,
    };
    let report = pipeline::evaluate(&original, &synthetic, &cfg)?;
    write_json(a.output.as_deref(), &report)
}

fn reduce_cmd(a: ReduceArgs) -> Result<(), Error> {
    let text = fs::read_to_string(&a.cnf).map_err(|e| Error::Config(format!("cannot read {}: {e}", a.cnf.display())))?;
    let phi = SatInstance::parse_dimacs(&text)?;
    let red = reduce(&phi)?;
    let mut doc = red.graph.to_document();
    doc.target_weight = Some(red.k);
    write_json(a.output.as_deref(), &doc)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Reduce(a) => reduce_cmd(a),
        Command::Selftest => {
            let checks = selftest::run();
            let mut ok = true;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                ok &= c.passed;
            }
            return if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE };
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
