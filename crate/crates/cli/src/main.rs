use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use tensor_dnn::{
    best_nonneg_rank_one, bound_ratio, brute_force_min, test_copositivity, Shape, SolverOptions,
    Tensor,
};

use tdnn_cli::gen::{generate, instance_seed};
use tdnn_cli::io;
use tdnn_cli::report::{self, hms};

/// Best nonnegative rank-one tensor approximation and copositivity testing
/// via doubly nonnegative relaxations.
#[derive(Parser)]
#[command(name = "tdnn", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Solver stopping tolerance.
    #[arg(long, global = true, default_value_t = 1e-6)]
    tol: f64,

    /// Solver iteration cap.
    #[arg(long, global = true, default_value_t = 20_000)]
    max_iters: usize,

    /// Seed for random families and batch runs.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Write a CSV iteration log of the solve to this path.
    #[arg(long, global = true)]
    log: Option<PathBuf>,

    /// Emit a JSON report instead of text.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Args)]
struct InputArgs {
    /// Tensor file (text or JSON format).
    file: Option<PathBuf>,

    /// Generate a tensor family instead: `name:arg1,arg2,…`
    /// (e.g. `levi_civita:3`, `example7:3,10`, `matmul:2,2,2`).
    #[arg(long, value_name = "FAMILY")]
    generate: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Best nonnegative rank-one approximation of a tensor.
    Approx {
        #[command(flatten)]
        input: InputArgs,
        /// Eliminate a degree-one group (1-based) through the squared linear
        /// slices instead of lifting it. Falls back with an error when the
        /// recovery's sign condition fails.
        #[arg(long, value_name = "GROUP")]
        reduce_linear: Option<usize>,
    },
    /// Copositivity test of a tensor.
    Coposit(InputArgs),
    /// Worst-case approximation bound constant for a shape.
    Bound {
        /// Comma-separated group orders, e.g. `2,2`.
        #[arg(long)]
        alpha: String,
        /// Comma-separated group dimensions, e.g. `3,4`.
        #[arg(long)]
        n: String,
    },
    /// Batch run of a random family with per-instance rows and a summary.
    Batch {
        /// Random family name (`random_sym` or `diag_dominated`).
        #[arg(long)]
        family: String,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        /// Number of instances.
        #[arg(long)]
        rep: usize,
    },
    /// Brute-force grid oracle for the minimum of `⟨A, x^{⊗α}⟩`.
    Oracle {
        #[command(flatten)]
        input: InputArgs,
        /// Grid points per spherical angle.
        #[arg(long, default_value_t = 30)]
        grid: usize,
    },
}

fn load_tensor(input: &InputArgs, seed: u64) -> Result<Tensor> {
    match (&input.file, &input.generate) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            io::parse(&text)
        }
        (None, Some(spec)) => generate(spec, seed),
        (Some(_), Some(_)) => bail!("pass either a file or --generate, not both"),
        (None, None) => bail!("no input: pass a tensor file or --generate"),
    }
}

fn solver_options(cli: &Cli) -> SolverOptions {
    SolverOptions {
        tol: cli.tol,
        max_iters: cli.max_iters,
        iter_log: cli.log.clone(),
        ..Default::default()
    }
}

fn parse_usize_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| anyhow!("bad integer {t:?}"))
        })
        .collect()
}

#[derive(Serialize)]
struct BatchInstance {
    instance: usize,
    seed: u64,
    verdict: String,
    f_dnn: f64,
    f_app: f64,
    time_ms: u128,
}

#[derive(Serialize)]
struct BatchSummary {
    family: String,
    m: usize,
    n: usize,
    rep: usize,
    time_ms_min: u128,
    time_ms_mean: f64,
    time_ms_max: u128,
    f_dnn_min: f64,
    f_dnn_mean: f64,
    f_dnn_max: f64,
    prob_copositive: f64,
}

#[derive(Serialize)]
struct BatchJson {
    kind: &'static str,
    instances: Vec<BatchInstance>,
    summary: BatchSummary,
}

fn run_batch(cli: &Cli, family: &str, m: usize, n: usize, rep: usize) -> Result<BatchJson> {
    if rep == 0 {
        bail!("--rep must be positive");
    }
    match family {
        "random_sym" | "diag_dominated" | "example19" | "example20" => {}
        other => bail!("batch supports random families only, got {other:?}"),
    }
    let opts = solver_options(cli);
    let spec = format!("{family}:{m},{n}");
    let instances: Vec<BatchInstance> = (0..rep)
        .into_par_iter()
        .map(|i| {
            let seed = instance_seed(cli.seed, i as u64);
            let t0 = Instant::now();
            let tensor = generate(&spec, seed).expect("family validated above");
            let opts = SolverOptions {
                iter_log: None,
                ..opts.clone()
            };
            let v = test_copositivity(&tensor, &opts);
            let elapsed = t0.elapsed();
            match v {
                Ok(v) => BatchInstance {
                    instance: i,
                    seed,
                    verdict: v.verdict.to_string(),
                    f_dnn: v.f_dnn,
                    f_app: v.f_app,
                    time_ms: elapsed.as_millis(),
                },
                Err(e) => BatchInstance {
                    instance: i,
                    seed,
                    verdict: format!("error: {e}"),
                    f_dnn: f64::NAN,
                    f_app: f64::NAN,
                    time_ms: elapsed.as_millis(),
                },
            }
        })
        .collect();
    let times: Vec<u128> = instances.iter().map(|r| r.time_ms).collect();
    let fdnns: Vec<f64> = instances
        .iter()
        .map(|r| r.f_dnn)
        .filter(|v| v.is_finite())
        .collect();
    let ncop = instances
        .iter()
        .filter(|r| r.verdict == "copositive")
        .count();
    let summary = BatchSummary {
        family: family.to_string(),
        m,
        n,
        rep,
        time_ms_min: times.iter().copied().min().unwrap_or(0),
        time_ms_mean: times.iter().sum::<u128>() as f64 / rep as f64,
        time_ms_max: times.iter().copied().max().unwrap_or(0),
        f_dnn_min: fdnns.iter().copied().fold(f64::INFINITY, f64::min),
        f_dnn_mean: fdnns.iter().sum::<f64>() / fdnns.len().max(1) as f64,
        f_dnn_max: fdnns.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        prob_copositive: ncop as f64 / rep as f64,
    };
    Ok(BatchJson {
        kind: "batch",
        instances,
        summary,
    })
}

fn run(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Approx {
            input,
            reduce_linear,
        } => {
            let tensor = load_tensor(input, cli.seed)?;
            let rep = match reduce_linear {
                Some(group) => {
                    if *group == 0 {
                        bail!("--reduce-linear takes a 1-based group index");
                    }
                    tensor_dnn::best_nonneg_rank_one_reduced(
                        &tensor,
                        group - 1,
                        &solver_options(cli),
                    )?
                }
                None => best_nonneg_rank_one(&tensor, &solver_options(cli))?,
            };
            if cli.json {
                let full = report::ApproxJsonFull {
                    report: report::approx_json(&rep),
                    solver: report::solver_json(&rep),
                };
                println!("{}", serde_json::to_string_pretty(&full)?);
            } else {
                report::print_approx_text(&rep);
            }
            Ok(0)
        }
        Command::Coposit(input) => {
            let tensor = load_tensor(input, cli.seed)?;
            let t0 = Instant::now();
            let v = test_copositivity(&tensor, &solver_options(cli))?;
            let wall = t0.elapsed();
            if cli.json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&report::coposit_json(&v, wall))?
                );
            } else {
                println!("verdict   {}", v.verdict);
                println!("f_dnn     {:.6}", v.f_dnn);
                println!("f_app     {:.6}", v.f_app);
                println!("time      {} ({} ms)", hms(wall), wall.as_millis());
            }
            Ok(0)
        }
        Command::Bound { alpha, n } => {
            let alpha = parse_usize_list(alpha)?;
            let n = parse_usize_list(n)?;
            let shape = Shape::new(alpha, n)?;
            let ratio = bound_ratio(&shape)?;
            if cli.json {
                println!("{}", serde_json::json!({"kind": "bound", "ratio": ratio}));
            } else {
                println!("bound ratio {ratio:.4}");
            }
            Ok(0)
        }
        Command::Batch { family, m, n, rep } => {
            let out = run_batch(cli, family, *m, *n, *rep)?;
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&out)?);
            } else {
                for r in &out.instances {
                    println!(
                        "{:>5}  {:<14} f_dnn {:>10.4}  f_app {:>10.4}  {:>6} ms",
                        r.instance, r.verdict, r.f_dnn, r.f_app, r.time_ms
                    );
                }
                let s = &out.summary;
                println!(
                    "summary {} m={} n={} rep={}  time(ms) {};{:.1};{}  f_dnn {:.4};{:.4};{:.4}  prob {:.4}",
                    s.family,
                    s.m,
                    s.n,
                    s.rep,
                    s.time_ms_min,
                    s.time_ms_mean,
                    s.time_ms_max,
                    s.f_dnn_min,
                    s.f_dnn_mean,
                    s.f_dnn_max,
                    s.prob_copositive
                );
            }
            Ok(0)
        }
        Command::Oracle { input, grid } => {
            let tensor = load_tensor(input, cli.seed)?;
            let min = brute_force_min(&tensor, *grid)?;
            if cli.json {
                println!(
                    "{}",
                    serde_json::json!({"kind": "oracle", "min": min, "grid": grid})
                );
            } else {
                println!("grid minimum {min:.6}");
            }
            Ok(0)
        }
    }
}

fn classify_error(e: &anyhow::Error) -> i32 {
    match e.downcast_ref::<tensor_dnn::Error>() {
        Some(tensor_dnn::Error::Diverged(_)) | Some(tensor_dnn::Error::EigFailure) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    // die quietly when the consumer closes the pipe
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    // deterministic single-threaded linear algebra; batch parallelism comes
    // from the instance pool
    faer::set_global_parallelism(faer::Par::Seq);
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(classify_error(&e) as u8)
        }
    }
}
