use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use relucert::bounds::{
    check_with_bounds, crown_propagate, interval_propagate, zonotope_propagate, AlphaPolicy, BoundMethod, BoundVerdict,
};
use relucert::complete::{export_milp, msr_bounds, verify_complete, BabConfig, Budget, VerificationStatus};
use relucert::explain::{explanation_report, integrated_gradients, ore_greedy, ExplainConfig, DEFAULT_IG_STEPS};
use relucert::geometry::{VolumeMethod, DEFAULT_SAMPLES};
use relucert::preimage::{
    approx_export, exact_export, preimage_exact, verify_quantitative, ApproxConfig, QuantitativeStatus,
    DEFAULT_PREIMAGE_CAP, Z99,
};
use relucert::property::Problem;
use relucert::report::{bounds_from_interval, sha256_hex, RunReport};
use relucert::{Error, Network};

const EXIT_USAGE: u8 = 64;
const EXIT_DATA: u8 = 65;
const EXIT_NOINPUT: u8 = 66;
const EXIT_CAP: u8 = 3;
const EXIT_IO: u8 = 74;

#[derive(Parser)]
#[command(name = "relucert", version, about = "Verify, invert and explain ReLU networks")]
struct Cli {
    /// Worker threads (default: all cores)
    #[arg(long, global = true, env = "RELUCERT_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a pre/postcondition spec
    Verify {
        model: PathBuf,
        spec: PathBuf,
        #[arg(long, value_enum, default_value = "complete")]
        method: Method,
        /// Lower ReLU slope policy (bound methods default to zero, complete to adaptive)
        #[arg(long, value_enum)]
        alpha: Option<Alpha>,
        /// Seconds before branch-and-bound gives up
        #[arg(long)]
        timeout: Option<f64>,
        #[arg(long)]
        max_nodes: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute the inputs that map into the postcondition
    Preimage {
        model: PathBuf,
        spec: PathBuf,
        #[arg(long, value_enum, default_value = "exact")]
        mode: Mode,
        /// Required proportion (defaults to the spec's `proportion`)
        #[arg(long)]
        target_coverage: Option<f64>,
        #[arg(long, default_value_t = 100)]
        max_iters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Monte Carlo samples when the input is not 2-D
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: usize,
        /// Tune relaxation slopes per subdomain
        #[arg(long)]
        alpha_opt: bool,
        /// Largest number of polytopes exact mode may produce
        #[arg(long, default_value_t = DEFAULT_PREIMAGE_CAP)]
        cap: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Attribute a prediction and find a robust explanation
    Explain {
        model: PathBuf,
        /// Comma-separated input point
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        input: Vec<f64>,
        #[arg(long)]
        epsilon: f64,
        /// Expected label (defaults to the prediction)
        #[arg(long)]
        label: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_IG_STEPS)]
        ig_steps: usize,
        /// Require the label to win strictly
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bracket the maximal safe radius around a point
    Msr {
        model: PathBuf,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        input: Vec<f64>,
        #[arg(long)]
        label: Option<usize>,
        #[arg(long, default_value_t = 1.0)]
        cap: f64,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the big-M MILP encoding of a spec in LP format
    ExportMilp {
        model: PathBuf,
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Interval,
    Zonotope,
    Crown,
    Complete,
}

#[derive(Clone, Copy, ValueEnum)]
enum Alpha {
    Zero,
    Adaptive,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Exact,
    Approx,
}

impl Alpha {
    fn policy(self) -> AlphaPolicy {
        match self {
            Alpha::Zero => AlphaPolicy::Zero,
            Alpha::Adaptive => AlphaPolicy::Adaptive,
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::CapExceeded { .. } => EXIT_CAP,
            Error::InvalidArgument(_) => EXIT_USAGE,
            _ => EXIT_DATA,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Verify {
            model,
            spec,
            method,
            alpha,
            timeout,
            max_nodes,
            seed,
            out,
        } => verify(&model, &spec, method, alpha, timeout, max_nodes, seed, out.as_deref()),
        Command::Preimage {
            model,
            spec,
            mode,
            target_coverage,
            max_iters,
            seed,
            samples,
            alpha_opt,
            cap,
            out,
        } => {
            let config = ApproxConfig {
                target_coverage: 0.0,
                max_iters,
                alpha_opt,
                seed,
                samples,
            };
            preimage(&model, &spec, mode, target_coverage, config, cap, out.as_deref())
        }
        Command::Explain {
            model,
            input,
            epsilon,
            label,
            ig_steps,
            strict,
            out,
        } => explain(&model, &input, epsilon, label, ig_steps, strict, out.as_deref()),
        Command::Msr {
            model,
            input,
            label,
            cap,
            tol,
            out,
        } => msr(&model, &input, label, cap, tol, out.as_deref()),
        Command::ExportMilp { model, spec, out } => milp(&model, &spec, out.as_deref()),
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure {
        code: EXIT_NOINPUT,
        message: format!("cannot read {}: {e}", path.display()),
    })
}

fn load_model(path: &Path) -> Result<Network, Failure> {
    let bytes = read(path)?;
    Network::from_reader(bytes.as_slice()).map_err(|e| Failure {
        code: EXIT_DATA,
        message: format!("{}: {e}", path.display()),
    })
}

/// The problem plus the digest of the bytes it was parsed from.
fn load_spec(path: &Path, net: &Network) -> Result<(Problem, String), Failure> {
    let bytes = read(path)?;
    let problem = Problem::from_reader(bytes.as_slice(), net.output_dim()).map_err(|e| Failure {
        code: EXIT_DATA,
        message: format!("{}: {e}", path.display()),
    })?;
    net.check_input(&problem.input.lower).map_err(|e| Failure {
        code: EXIT_DATA,
        message: format!("{}: {e}", path.display()),
    })?;
    Ok((problem, sha256_hex(&bytes)))
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure {
            code: EXIT_IO,
            message: format!("cannot write {}: {e}", path.display()),
        }),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn status_code(status: &str) -> u8 {
    match status {
        "Verified" | "Holds" | "Computed" => 0,
        "Falsified" | "Violated" => 1,
        _ => 2,
    }
}

fn finish(mut report: RunReport, start: Instant, out: Option<&Path>) -> Outcome {
    report.elapsed_seconds = start.elapsed().as_secs_f64();
    emit(&report.to_json(), out)?;
    Ok(status_code(&report.status))
}

#[allow(clippy::too_many_arguments)]
fn verify(
    model_path: &Path,
    spec_path: &Path,
    method: Method,
    alpha: Option<Alpha>,
    timeout: Option<f64>,
    max_nodes: Option<usize>,
    seed: u64,
    out: Option<&Path>,
) -> Outcome {
    let net = load_model(model_path)?;
    let (problem, digest) = load_spec(spec_path, &net)?;
    let start = Instant::now();
    let mut report = RunReport::new("verify", &model_path.display().to_string(), "Unknown");
    report.spec_digest = Some(digest);
    report.seed = Some(seed);
    let (input, post) = (&problem.input, &problem.output);

    let bound_method = match method {
        Method::Interval => Some(BoundMethod::Interval),
        Method::Zonotope => Some(BoundMethod::Zonotope),
        Method::Crown => Some(BoundMethod::Crown(alpha.unwrap_or(Alpha::Zero).policy())),
        Method::Complete => None,
    };
    if let Some(bm) = bound_method {
        let check = check_with_bounds(&net, input, post, &bm)?;
        let (lo, hi) = match &bm {
            BoundMethod::Interval => {
                let r = interval_propagate(&net, input)?;
                (r.lower, r.upper)
            }
            BoundMethod::Zonotope => zonotope_propagate(&net, input)?.zonotope.interval(),
            BoundMethod::Crown(policy) => {
                let r = crown_propagate(&net, input, policy)?;
                (r.lower, r.upper)
            }
        };
        report.status = match check.verdict {
            BoundVerdict::Verified => "Verified",
            BoundVerdict::Unknown => "Unknown",
        }
        .into();
        report.bounds = Some(bounds_from_interval(&lo, &hi));
        report.settings = json!({
            "method": method_name(method),
            "alpha": alpha_name(&bm),
        });
        report.details = json!({
            "row_bounds": check.row_bounds,
            "margins": check.margins,
        });
        eprintln!("{}: {} ({})", spec_path.display(), report.status, method_name(method));
        return finish(report, start, out);
    }

    let budget = Budget {
        max_nodes: max_nodes.or(Budget::default().max_nodes),
        timeout: timeout.map(Duration::from_secs_f64),
    };
    let config = BabConfig {
        budget,
        alpha: alpha.unwrap_or(Alpha::Adaptive).policy(),
        seed,
        ..BabConfig::default()
    };
    let verdict = verify_complete(&net, input, post, &config)?;
    report.status = format!("{:?}", verdict.status);
    report.settings = json!({
        "method": "complete",
        "alpha": if matches!(config.alpha, AlphaPolicy::Zero) { "zero" } else { "adaptive" },
        "max_nodes": budget.max_nodes,
        "timeout": timeout,
    });
    let mut details = json!({
        "nodes": verdict.stats.nodes,
        "branches": verdict.stats.branches,
        "bound": verdict.stats.bound,
    });
    if let Some(w) = &verdict.witness {
        let y = net.forward(w)?;
        details["witness_output"] = json!(y);
        details["witness_violation"] = json!(post.violation(&y));
        report.witness = Some(w.clone());
    }
    report.details = details;
    eprintln!(
        "{}: {} after {} nodes",
        spec_path.display(),
        report.status,
        verdict.stats.nodes
    );
    if verdict.status == VerificationStatus::Unknown {
        eprintln!("budget exhausted; rerun with a larger --max-nodes or --timeout");
    }
    finish(report, start, out)
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Interval => "interval",
        Method::Zonotope => "zonotope",
        Method::Crown => "crown",
        Method::Complete => "complete",
    }
}

fn alpha_name(m: &BoundMethod) -> Option<&'static str> {
    match m {
        BoundMethod::Crown(AlphaPolicy::Zero) => Some("zero"),
        BoundMethod::Crown(_) => Some("adaptive"),
        _ => None,
    }
}

fn preimage(
    model_path: &Path,
    spec_path: &Path,
    mode: Mode,
    target: Option<f64>,
    mut config: ApproxConfig,
    cap: usize,
    out: Option<&Path>,
) -> Outcome {
    let net = load_model(model_path)?;
    let (mut problem, digest) = load_spec(spec_path, &net)?;
    if let Some(p) = target {
        if !(0.0..=1.0).contains(&p) {
            return Err(usage(format!("--target-coverage {p} not in [0, 1]")));
        }
        problem.proportion = Some(p);
    }
    let start = Instant::now();
    let mut report = RunReport::new("preimage", &model_path.display().to_string(), "Computed");
    report.spec_digest = Some(digest);
    report.seed = Some(config.seed);
    let planar = problem.input.dim() == 2;

    match mode {
        Mode::Exact => {
            let mut pre = preimage_exact(&net, &problem.input, &problem.output, cap)?;
            let method = if planar {
                VolumeMethod::Exact2D
            } else {
                VolumeMethod::MonteCarlo {
                    samples: config.samples,
                    seed: config.seed,
                }
            };
            pre.compute_volumes(method)?;
            let coverage = pre.union_volume(method)? / problem.input.volume();
            report.coverage = Some(coverage);
            if let Some(p) = problem.proportion {
                report.status = if planar {
                    if coverage >= p {
                        "Holds"
                    } else {
                        "Violated"
                    }
                } else {
                    let margin = Z99 * (coverage * (1.0 - coverage) / config.samples.max(1) as f64).sqrt();
                    if coverage - margin >= p {
                        "Holds"
                    } else {
                        "Unknown"
                    }
                }
                .into();
            }
            report.settings = json!({
                "mode": "exact",
                "cap": cap,
                "proportion": problem.proportion,
                "samples": if planar { None } else { Some(config.samples) },
            });
            report.details = exact_export(&net, &pre, Some(coverage));
            eprintln!(
                "{} polytopes, coverage {coverage:.6}: {}",
                pre.polytopes.len(),
                report.status
            );
        }
        Mode::Approx => {
            let spec = problem.quantitative()?;
            config.target_coverage = spec.proportion;
            let verdict = verify_quantitative(&net, &spec, &config)?;
            report.status = match verdict.status {
                QuantitativeStatus::Holds => "Holds",
                QuantitativeStatus::Unknown => "Unknown",
            }
            .into();
            report.coverage = Some(verdict.coverage);
            report.settings = json!({
                "mode": "approx",
                "proportion": spec.proportion,
                "max_iters": config.max_iters,
                "alpha_opt": config.alpha_opt,
                "samples": if planar { None } else { Some(config.samples) },
            });
            let mut details = approx_export(&verdict.approx);
            details["margin"] = json!(verdict.margin);
            details["splits"] = json!(verdict
                .approx
                .splits
                .iter()
                .map(|s| json!({"dim": s.dim, "at": s.at, "gain": s.gain}))
                .collect::<Vec<_>>());
            report.details = details;
            eprintln!(
                "coverage {:.6} after {} iterations: {}",
                verdict.coverage, verdict.approx.iterations, report.status
            );
        }
    }
    finish(report, start, out)
}

fn resolve_label(net: &Network, label: Option<usize>) -> Result<Option<usize>, Failure> {
    match label {
        Some(l) if l >= net.output_dim() => Err(usage(format!(
            "label {l} out of range for {} outputs",
            net.output_dim()
        ))),
        other => Ok(other),
    }
}

#[allow(clippy::too_many_arguments)]
fn explain(
    model_path: &Path,
    x: &[f64],
    epsilon: f64,
    label: Option<usize>,
    steps: usize,
    strict: bool,
    out: Option<&Path>,
) -> Outcome {
    let net = load_model(model_path)?;
    net.check_input(x).map_err(|e| usage(e.to_string()))?;
    if steps == 0 {
        return Err(usage("--ig-steps must be at least 1"));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(usage(format!("--epsilon {epsilon} must be finite and ≥ 0")));
    }
    let label = match resolve_label(&net, label)? {
        Some(l) => l,
        None => net.predicted_label(x)?,
    };
    let start = Instant::now();
    let baseline = vec![0.0; x.len()];
    let ig = integrated_gradients(&net, x, &baseline, label, steps)?;
    let config = if strict {
        ExplainConfig::strict()
    } else {
        ExplainConfig::default()
    };
    let explanation = ore_greedy(&net, x, epsilon, label, &ig.scores, &config)?;
    let mut report = RunReport::new(
        "explain",
        &model_path.display().to_string(),
        if explanation.verified { "Verified" } else { "Unknown" },
    );
    report.settings = json!({
        "input": x,
        "label": label,
        "ig_steps": steps,
        "baseline": baseline,
        "margin": config.margin,
        "max_nodes": config.bab.budget.max_nodes,
    });
    report.details = explanation_report(&explanation, &ig);
    eprintln!(
        "label {label}: {} of {} features fixed at epsilon {epsilon}",
        explanation.fixed_features.len(),
        x.len()
    );
    finish(report, start, out)
}

fn msr(model_path: &Path, x: &[f64], label: Option<usize>, cap: f64, tol: f64, out: Option<&Path>) -> Outcome {
    let net = load_model(model_path)?;
    net.check_input(x).map_err(|e| usage(e.to_string()))?;
    let label = match resolve_label(&net, label)? {
        Some(l) => l,
        None => net.predicted_label(x)?,
    };
    let start = Instant::now();
    let config = BabConfig::default();
    let result = msr_bounds(&net, x, label, cap, tol, &config)?;
    let status = if result.inconclusive == 0 {
        "Computed"
    } else {
        "Unknown"
    };
    let mut report = RunReport::new("msr", &model_path.display().to_string(), status);
    report.seed = Some(config.seed);
    report.settings = json!({
        "input": x,
        "label": label,
        "cap": cap,
        "tol": tol,
        "max_nodes": config.budget.max_nodes,
    });
    report.details = json!({
        "lower": result.lower,
        "upper": result.upper,
        "probes": result.probes,
        "inconclusive": result.inconclusive,
    });
    eprintln!("safe radius in [{}, {}]", result.lower, result.upper);
    report.elapsed_seconds = start.elapsed().as_secs_f64();
    emit(&report.to_json(), out)?;
    Ok(if result.inconclusive == 0 { 0 } else { 2 })
}

fn milp(model_path: &Path, spec_path: &Path, out: Option<&Path>) -> Outcome {
    let net = load_model(model_path)?;
    let (problem, _) = load_spec(spec_path, &net)?;
    let crown = crown_propagate(&net, &problem.input, &AlphaPolicy::Zero)?;
    let text = export_milp(&net, &problem.input, &problem.output, &crown.bounds)?;
    emit(&text, out)?;
    eprintln!("wrote LP model for {}", spec_path.display());
    Ok(0)
}
