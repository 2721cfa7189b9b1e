//! Batch entry points wiring the generators, planner, runtime, oracles, and
//! analysis suites into reproducible experiments. Data goes to stdout or
//! files; logs go to stderr; every command is deterministic given its
//! configuration and seed (remote backend aside).

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use lambda_rlm::analysis::{simulate_scaling, sweep_optimal_k, DirectMode, ScalingRow};
use lambda_rlm::answers::TaskType;
use lambda_rlm::doc::Document;
use lambda_rlm::lambda::{
    self, normalize, parse_expr, render_with_span, Expr, StepKind, DEFAULT_FUEL,
};
use lambda_rlm::oracle::{
    Oracle, OracleProfile, RemoteOracle, StochasticOracle, SymbolicOracle,
};
use lambda_rlm::planner::{
    detect_task, estimate_accuracy, estimate_cost, estimate_multihop_cost, make_plan, Strategy,
};
use lambda_rlm::runtime::{
    execute_multihop, execute_pairwise, execute_phi, ExecTrace, TraceFile,
    DEFAULT_PREVIEW_BUDGET,
};
use lambda_rlm::taskgen::{
    gen_aggregate, gen_multihop, gen_needle, gen_pairwise, render_pairs, score, Metric,
    TaskInstance,
};
use lambda_rlm::verify;

/// Environment variable holding the bearer token for the remote backend.
const REMOTE_TOKEN_ENV: &str = "LAMBDA_RLM_TOKEN";

#[derive(Parser)]
#[command(
    name = "lambda-rlm",
    about = "Typed combinator runtime for recursive long-context reasoning",
    version
)]
struct Cli {
    /// Worker threads for simulation suites; 0 picks the default
    /// (logical cores for `scaling`, 1 for `verify`).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ProfileArgs {
    /// Builtin profile name (`appendix-a`, `scaling`) or a TOML path.
    #[arg(long, default_value = "appendix-a")]
    profile: String,
}

#[derive(Subcommand)]
enum Command {
    /// Print the step-by-step factorial reduction, or normalize --expr.
    DemoLambda {
        /// A term to normalize instead of the factorial demonstration.
        #[arg(long)]
        expr: Option<String>,
        #[arg(long, default_value_t = DEFAULT_FUEL)]
        fuel: usize,
    },
    /// Generate a synthetic task instance with exact ground truth.
    Gen {
        #[arg(long)]
        task: String,
        /// Document length in tokens (search and aggregate tasks).
        #[arg(long, default_value_t = 8_000)]
        tokens: usize,
        /// Item count (pairwise tasks).
        #[arg(long, default_value_t = 200)]
        items: usize,
        /// Corpus size (multi-hop tasks).
        #[arg(long, default_value_t = 20)]
        docs: usize,
        /// Category count (aggregate tasks).
        #[arg(long, default_value_t = 5)]
        categories: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the instance JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute and print the plan, cost estimate, and accuracy estimate.
    Plan {
        #[arg(long)]
        tokens: usize,
        #[command(flatten)]
        profile: ProfileArgs,
        #[arg(long, default_value = "appendix_sqrt")]
        strategy: Strategy,
        #[arg(long, default_value_t = 0.8)]
        alpha: f64,
        #[arg(long, default_value = "aggregate")]
        task: String,
    },
    /// Alias of `plan`: pre-execution estimates for a configuration.
    Estimate {
        #[arg(long)]
        tokens: usize,
        #[command(flatten)]
        profile: ProfileArgs,
        #[arg(long, default_value = "appendix_sqrt")]
        strategy: Strategy,
        #[arg(long, default_value_t = 0.8)]
        alpha: f64,
        #[arg(long, default_value = "aggregate")]
        task: String,
    },
    /// Generate or load an instance, detect, plan, execute, and score.
    Run {
        #[arg(long, default_value = "aggregate")]
        task: String,
        #[arg(long, default_value_t = 8_000)]
        tokens: usize,
        #[arg(long, default_value_t = 200)]
        items: usize,
        #[arg(long, default_value_t = 20)]
        docs: usize,
        #[arg(long, default_value_t = 5)]
        categories: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        profile: ProfileArgs,
        #[arg(long, default_value = "appendix_sqrt")]
        strategy: Strategy,
        #[arg(long, default_value_t = 0.8)]
        alpha: f64,
        /// Oracle backend: symbolic, stochastic, or remote.
        #[arg(long, default_value = "symbolic")]
        backend: String,
        /// Endpoint URL; required with --backend remote.
        #[arg(long)]
        endpoint: Option<String>,
        #[arg(long, default_value_t = 30)]
        timeout_secs: u64,
        /// Load this instance JSON instead of generating one.
        #[arg(long)]
        instance: Option<PathBuf>,
        /// Write the run's trace JSON here.
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Run a verification suite and print one pass/fail line per check.
    Verify {
        /// termination | cost | accuracy | optimal_k | lambda
        /// (also: appendix-a, pairwise, multihop, determinism, all)
        suite: String,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Monte-Carlo scaling experiment; rows as CSV.
    Scaling {
        #[arg(long, default_value = "aggregate")]
        task: String,
        #[arg(long, value_delimiter = ',', default_value = "8000,16000,32000,64000,128000")]
        grid: Vec<usize>,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[command(flatten)]
        profile: ProfileArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Score the direct baseline on the first K tokens instead of
        /// extrapolating the accuracy model past the window.
        #[arg(long)]
        truncate: bool,
        /// Write CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the closed-form cost bound for every k in [2, k-max].
    SweepK {
        #[arg(long)]
        tokens: usize,
        #[arg(long)]
        tau: usize,
        #[command(flatten)]
        profile: ProfileArgs,
        #[arg(long, default_value_t = 16)]
        k_max: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let default_jobs = match &cli.command {
        Command::Verify { .. } => 1,
        _ => 0,
    };
    let jobs = if cli.jobs > 0 { cli.jobs } else { default_jobs };
    if jobs > 0 {
        // ignore failure: the global pool can only be configured once
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            println!("{}", json!({ "error": { "message": message } }));
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode, String> {
    match command {
        Command::DemoLambda { expr, fuel } => cmd_demo_lambda(expr, fuel),
        Command::Gen {
            task,
            tokens,
            items,
            docs,
            categories,
            seed,
            out,
        } => cmd_gen(&task, tokens, items, docs, categories, seed, out),
        Command::Plan {
            tokens,
            profile,
            strategy,
            alpha,
            task,
        }
        | Command::Estimate {
            tokens,
            profile,
            strategy,
            alpha,
            task,
        } => cmd_plan(tokens, &profile.profile, strategy, alpha, &task),
        Command::Run {
            task,
            tokens,
            items,
            docs,
            categories,
            seed,
            profile,
            strategy,
            alpha,
            backend,
            endpoint,
            timeout_secs,
            instance,
            trace_out,
        } => cmd_run(RunConfig {
            task,
            tokens,
            items,
            docs,
            categories,
            seed,
            profile: profile.profile,
            strategy,
            alpha,
            backend,
            endpoint,
            timeout_secs,
            instance,
            trace_out,
        }),
        Command::Verify {
            suite,
            trials,
            seed,
        } => cmd_verify(&suite, trials, seed),
        Command::Scaling {
            task,
            grid,
            trials,
            profile,
            seed,
            truncate,
            out,
        } => cmd_scaling(&task, &grid, trials, &profile.profile, seed, truncate, out),
        Command::SweepK {
            tokens,
            tau,
            profile,
            k_max,
        } => cmd_sweep_k(tokens, tau, &profile.profile, k_max),
    }
}

fn load_profile(name_or_path: &str) -> Result<OracleProfile, String> {
    OracleProfile::resolve(name_or_path).map_err(|e| format!("profile {name_or_path:?}: {e}"))
}

fn parse_task(name: &str) -> Result<TaskType, String> {
    TaskType::from_name(name).ok_or_else(|| {
        format!(
            "unknown task {name:?}; expected one of {}",
            TaskType::ALL.map(|t| t.name()).join(", ")
        )
    })
}

fn cmd_demo_lambda(expr: Option<String>, fuel: usize) -> Result<ExitCode, String> {
    let term = match &expr {
        Some(text) => parse_expr(text).map_err(|e| e.to_string())?,
        None => Expr::app(
            Expr::app(lambda::y_combinator(), lambda::factorial_recipe()),
            Expr::int(3),
        ),
    };
    if expr.is_none() {
        eprintln!("reducing factorial(3) through the fixed-point combinator");
    }
    match normalize(&term, fuel) {
        Ok((nf, trace)) => {
            print_reduction(&trace.steps);
            println!("= {nf}");
            eprintln!("normalized in {} steps", trace.fuel_used);
            Ok(ExitCode::SUCCESS)
        }
        Err(exhausted) => {
            print_reduction(&exhausted.trace.steps);
            println!("= {}", exhausted.partial);
            eprintln!(
                "fuel exhausted after {} steps; the term may diverge",
                exhausted.trace.fuel_used
            );
            Ok(ExitCode::FAILURE)
        }
    }
}

fn print_reduction(steps: &[lambda::TraceStep]) {
    for step in steps {
        let (text, span) = render_with_span(&step.before, Some(&step.path));
        let rule = match step.kind {
            StepKind::Beta => "β",
            StepKind::Delta => "δ",
        };
        println!("= {text}");
        if let Some((start, end)) = span {
            let caret = " ".repeat(start + 2) + &"^".repeat((end - start).max(1));
            println!("{caret} {rule}");
        }
    }
}

fn generate_instance(
    task: TaskType,
    tokens: usize,
    items: usize,
    docs: usize,
    categories: usize,
    seed: u64,
) -> Result<TaskInstance, String> {
    match task {
        TaskType::Search => Ok(gen_needle(tokens, seed)),
        TaskType::Aggregate => Ok(gen_aggregate(tokens, categories, seed)),
        TaskType::Pairwise => Ok(gen_pairwise(items, seed)),
        TaskType::MultiHop => Ok(gen_multihop(docs, seed)),
        other => Err(format!("no generator for task {other}")),
    }
}

fn cmd_gen(
    task: &str,
    tokens: usize,
    items: usize,
    docs: usize,
    categories: usize,
    seed: u64,
    out: Option<PathBuf>,
) -> Result<ExitCode, String> {
    let task = parse_task(task)?;
    let instance = generate_instance(task, tokens, items, docs, categories, seed)?;
    let json = instance.to_json();
    match out {
        Some(path) => {
            std::fs::write(&path, &json).map_err(|e| format!("writing {path:?}: {e}"))?;
            eprintln!("wrote {} ({} tokens)", path.display(), instance.n);
        }
        None => println!("{json}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_plan(
    tokens: usize,
    profile: &str,
    strategy: Strategy,
    alpha: f64,
    task: &str,
) -> Result<ExitCode, String> {
    let profile = load_profile(profile)?;
    let task = parse_task(task)?;
    let plan = make_plan(task, tokens, &profile, alpha, strategy);
    let estimate = estimate_cost(&plan, tokens, &profile);
    let accuracy = estimate_accuracy(&plan, tokens, &profile);
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "plan": plan,
            "estimate": estimate,
            "estimated_accuracy": accuracy,
        }))
        .expect("serializable")
    );
    Ok(ExitCode::SUCCESS)
}

struct RunConfig {
    task: String,
    tokens: usize,
    items: usize,
    docs: usize,
    categories: usize,
    seed: u64,
    profile: String,
    strategy: Strategy,
    alpha: f64,
    backend: String,
    endpoint: Option<String>,
    timeout_secs: u64,
    instance: Option<PathBuf>,
    trace_out: Option<PathBuf>,
}

fn build_oracle(config: &RunConfig, profile: &OracleProfile) -> Result<Box<dyn Oracle>, String> {
    match config.backend.as_str() {
        "symbolic" => Ok(Box::new(SymbolicOracle::new(profile.clone()))),
        "stochastic" => Ok(Box::new(StochasticOracle::with_seed(
            profile.clone(),
            profile.seed ^ config.seed,
        ))),
        "remote" => {
            let endpoint = config
                .endpoint
                .as_ref()
                .ok_or("--backend remote requires --endpoint")?;
            let oracle = RemoteOracle::new(
                profile.clone(),
                endpoint.clone(),
                Duration::from_secs(config.timeout_secs),
            )
            .map_err(|e| e.to_string())?
            .with_token(std::env::var(REMOTE_TOKEN_ENV).ok());
            Ok(Box::new(oracle))
        }
        other => Err(format!(
            "unknown backend {other:?}; expected symbolic, stochastic, or remote"
        )),
    }
}

fn cmd_run(config: RunConfig) -> Result<ExitCode, String> {
    let profile = load_profile(&config.profile)?;
    let requested = parse_task(&config.task)?;
    let instance = match &config.instance {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| format!("reading {path:?}: {e}"))?;
            TaskInstance::from_json(&text).map_err(|e| format!("parsing {path:?}: {e}"))?
        }
        None => generate_instance(
            requested,
            config.tokens,
            config.items,
            config.docs,
            config.categories,
            config.seed,
        )?,
    };
    let oracle = build_oracle(&config, &profile)?;
    let mut trace = ExecTrace::new();

    let detection =
        detect_task(&instance.doc, oracle.as_ref(), &mut trace).map_err(|e| e.to_string())?;
    let task = detection.task;
    if task != instance.task {
        trace.event(format!(
            "detected {task} but the instance is {}; running the detected plan",
            instance.task
        ));
    }

    let n = match task {
        TaskType::MultiHop => instance.n,
        _ => instance.doc.len(),
    };
    let plan = make_plan(task, n.max(1), &profile, config.alpha, config.strategy)
        .with_filter_keywords(lambda_rlm::answers::content_keywords(&instance.query));
    if !plan.accuracy_feasible {
        trace.event("accuracy target infeasible under the window constraint".to_string());
    }
    let estimate = match task {
        TaskType::MultiHop => {
            let sizes: Vec<usize> = instance.corpus.iter().map(Document::len).collect();
            estimate_multihop_cost(&sizes, &profile)
        }
        _ => estimate_cost(&plan, n.max(1), &profile),
    };

    let answer: Document = match task {
        TaskType::Pairwise => {
            let same = |a: &str, b: &str| a == b;
            let outcome =
                execute_pairwise(&instance.doc, &same, &plan, oracle.as_ref(), &mut trace)
                    .map_err(|e| e.to_string())?;
            render_pairs(&outcome.pairs)
        }
        TaskType::MultiHop => {
            let outcome = execute_multihop(
                &instance.corpus,
                &instance.query,
                oracle.as_ref(),
                DEFAULT_PREVIEW_BUDGET,
                &mut trace,
            )
            .map_err(|e| e.to_string())?;
            outcome.answer
        }
        _ => execute_phi(&instance.doc, &plan, oracle.as_ref(), &mut trace)
            .map_err(|e| e.to_string())?,
    };

    let exact = score(&answer, &instance.truth, Metric::Exact);
    let f1 = score(&answer, &instance.truth, Metric::F1);

    if let Some(path) = &config.trace_out {
        let file = TraceFile::new(plan.clone(), &trace, answer.to_text());
        std::fs::write(path, file.to_json()).map_err(|e| format!("writing {path:?}: {e}"))?;
        eprintln!("trace written to {}", path.display());
    }

    let summary = json!({
        "task": task.name(),
        "n": n,
        "oracle_calls": trace.oracle_calls,
        "predicted_calls": estimate.predicted_calls,
        "accumulated_cost": trace.accumulated_cost,
        "estimated_cost": estimate.total,
        "score_exact": exact,
        "score_f1": f1,
        "pruned_chunks": trace.pruned_chunks,
        "backend": config.backend,
    });
    println!("{summary}");
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(suite: &str, trials: usize, seed: u64) -> Result<ExitCode, String> {
    let reports: Vec<verify::SuiteReport> = match suite {
        "termination" => vec![verify::verify_termination(seed)],
        "cost" => vec![verify::verify_cost(seed)],
        "accuracy" => vec![verify::verify_scaling(trials, seed)],
        "optimal_k" => vec![verify::verify_optimal_k(seed)],
        "lambda" => vec![verify::verify_lambda()],
        "appendix-a" => vec![verify::verify_appendix_trace()],
        "pairwise" => vec![verify::verify_pairwise(seed)],
        "multihop" => vec![verify::verify_multihop(seed)],
        "determinism" => vec![verify::verify_determinism(seed)],
        "all" => vec![
            verify::verify_lambda(),
            verify::verify_termination(seed),
            verify::verify_cost(seed),
            verify::verify_appendix_trace(),
            verify::verify_optimal_k(seed),
            verify::verify_pairwise(seed),
            verify::verify_multihop(seed),
            verify::verify_determinism(seed),
            verify::verify_scaling(trials, seed),
        ],
        other => {
            return Err(format!(
                "unknown suite {other:?}; expected termination, cost, accuracy, optimal_k, \
                 lambda, appendix-a, pairwise, multihop, determinism, or all"
            ));
        }
    };
    let mut all_passed = true;
    for report in &reports {
        print!("{}", report.render());
        all_passed &= report.passed();
    }
    Ok(if all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn rows_to_csv(rows: &[ScalingRow]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row).expect("row serializes");
    }
    String::from_utf8(writer.into_inner().expect("csv flush")).expect("csv is utf-8")
}

fn cmd_scaling(
    task: &str,
    grid: &[usize],
    trials: usize,
    profile: &str,
    seed: u64,
    truncate: bool,
    out: Option<PathBuf>,
) -> Result<ExitCode, String> {
    let task = parse_task(task)?;
    let profile = load_profile(profile)?;
    let mode = if truncate {
        DirectMode::Truncate
    } else {
        DirectMode::Extrapolate
    };
    let rows =
        simulate_scaling(task, grid, trials, &profile, seed, mode).map_err(|e| e.to_string())?;
    let csv_text = rows_to_csv(&rows);
    match out {
        Some(path) => {
            std::fs::write(&path, &csv_text).map_err(|e| format!("writing {path:?}: {e}"))?;
            eprintln!("wrote {} rows to {}", rows.len(), path.display());
        }
        None => print!("{csv_text}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep_k(tokens: usize, tau: usize, profile: &str, k_max: usize) -> Result<ExitCode, String> {
    let profile = load_profile(profile)?;
    let (argmin, table) = sweep_optimal_k(tokens, tau, &profile, k_max);
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "argmin_k": argmin,
            "table": table.iter().map(|(k, v)| json!({"k": k, "bound": v})).collect::<Vec<_>>(),
        }))
        .expect("serializable")
    );
    Ok(ExitCode::SUCCESS)
}
