use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use ntrack_core::analysis::{best_certificate, rate_certificate, RateCertificate, DEFAULT_GRID};
use ntrack_core::harness::{
    build_problem, check_record, load_record, preset, preset_names, run_experiment, save_record, topology_sweep,
    write_atomic, AlgorithmSpec, RunConfig, RunRecord, SweepEntry,
};
use ntrack_core::topology::{build_topology, metropolis_weights, spectral_stats, NetworkDocument, TopologyKind};

/// Decentralized Newton tracking experiments.
#[derive(Parser)]
#[command(name = "ntrack", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Spectral report of a topology and its Metropolis mixing matrix.
    Spectra(SpectraArgs),
    /// Run every configured method once.
    Solve(SolveArgs),
    /// Repeat a run over topologies or step-size pairs.
    Sweep(SweepArgs),
    /// Rate certificate from bounds, spectra and step sizes.
    Certify(CertifyArgs),
    /// Invariant suites on a recorded or fresh run.
    Check(CheckArgs),
}

#[derive(Args)]
struct Source {
    /// JSON run configuration.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in preset name.
    #[arg(long)]
    preset: Option<String>,
    /// Override the iteration budget.
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    seed_topology: Option<u64>,
    #[arg(long)]
    seed_data: Option<u64>,
}

impl Source {
    fn given(&self) -> bool {
        self.config.is_some() || self.preset.is_some()
    }

    fn load(&self) -> Result<RunConfig> {
        let mut config = match (&self.config, &self.preset) {
            (Some(path), _) => RunConfig::load(path)?,
            (None, Some(name)) => preset(name)?,
            (None, None) => bail!(usage(format!(
                "pass --config <path> or --preset <name> (presets: {})",
                preset_names().collect::<Vec<_>>().join(", ")
            ))),
        };
        if let Some(iters) = self.iters {
            config.iterations = iters;
        }
        if let Some(seed) = self.seed_topology {
            config.topology.seed = seed;
        }
        if let Some(seed) = self.seed_data {
            config.problem.set_seed(seed);
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct SpectraArgs {
    #[command(flatten)]
    source: Source,
    /// Topology kind; overrides the configuration's topology.
    #[arg(long)]
    kind: Option<TopologyKind>,
    #[arg(long, default_value_t = 10)]
    n: usize,
    /// Edge fraction for random graphs.
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    /// Also write `network.json` into this directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    source: Source,
    /// Directory for CSV traces, `record.json` and `plot.py`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Topologies such as `line,cycle,random:0.5`; defaults to the configured sweep.
    #[arg(long, value_delimiter = ',')]
    topologies: Vec<String>,
    /// Step sizes for a parameter sweep over the first configured method.
    #[arg(long, value_delimiter = ',')]
    alpha: Vec<f64>,
    /// Regularizers for the parameter sweep; ignored by methods without one.
    #[arg(long, value_delimiter = ',')]
    eps: Vec<f64>,
}

#[derive(Args)]
struct CertifyArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, requires_all = ["l", "lambda_max", "lambda_hat_min", "alpha", "eps"])]
    mu: Option<f64>,
    #[arg(long)]
    l: Option<f64>,
    #[arg(long)]
    lambda_max: Option<f64>,
    #[arg(long)]
    lambda_hat_min: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, default_value_t = 2.0)]
    beta: f64,
    #[arg(long, default_value_t = 2.0)]
    phi: f64,
    /// Search beta and phi over a grid and keep the largest rate.
    #[arg(long)]
    grid: bool,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    source: Source,
    /// `record.json` written by `solve`; checks are recomputed from its traces.
    #[arg(long, conflicts_with_all = ["config", "preset"])]
    record: Option<PathBuf>,
}

/// Error raised for bad flag combinations.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(message: String) -> Usage {
    Usage(message)
}

/// Error raised when an invariant suite reports violations.
#[derive(Debug)]
struct ChecksFailed(usize);

impl std::fmt::Display for ChecksFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} check(s) failed", self.0)
    }
}

impl std::error::Error for ChecksFailed {}

fn print(value: &Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("json value"));
}

fn spectra(args: SpectraArgs) -> Result<Value> {
    let (kind, n, tau, seed) = match args.kind {
        Some(kind) => (kind, args.n, args.tau, args.source.seed_topology.unwrap_or(0)),
        None if args.source.given() => {
            let t = args.source.load()?.topology;
            (t.kind, t.n, t.tau, t.seed)
        }
        None => bail!(usage("pass --kind, --config or --preset".into())),
    };
    let graph = build_topology(kind, n, tau, seed)?;
    let mixing = metropolis_weights(&graph);
    let stats = spectral_stats(&mixing)?;
    let mut report = json!({
        "kind": kind,
        "n": n,
        "tau": tau,
        "seed": seed,
        "edges": graph.edge_count(),
        "lambda_max": stats.lambda_max,
        "lambda_hat_min": stats.lambda_hat_min,
        "eigenvalues": stats.eigenvalues.as_slice(),
    });
    if let Some(dir) = args.out {
        let path = dir.join("network.json");
        let doc = serde_json::to_string_pretty(&NetworkDocument::new(&graph, &mixing))?;
        write_atomic(&path, doc.as_bytes())?;
        report["network"] = json!(path);
    }
    Ok(report)
}

fn summary(record: &RunRecord) -> Value {
    let runs: Vec<Value> = record
        .runs
        .iter()
        .map(|run| {
            let trace = &run.trace;
            json!({
                "label": run.label,
                "iterations": trace.len().saturating_sub(1),
                "final_error": trace.final_error(),
                "first_below_1e-6": trace.first_below(1e-6),
                "first_below_1e-8": trace.first_below(1e-8),
                "slope": trace.fit_rate().ok().map(|f| f.slope),
                "diverged": trace.diverged,
                "comm_rounds": run.total_cost.rounds,
                "scalars_sent": run.total_cost.scalars,
                "delta_prime": run.certificate.and_then(|c| c.delta_prime),
            })
        })
        .collect();
    json!({
        "name": record.config.name,
        "dataset_digest": record.dataset_digest,
        "lambda_max": record.spectra.lambda_max,
        "lambda_hat_min": record.spectra.lambda_hat_min,
        "mu_f": record.bounds.mu_f,
        "l_f": record.bounds.l_f,
        "runs": runs,
        "checks_failed": record.checks.iter().filter(|c| !c.passed).count(),
    })
}

fn save(record: &RunRecord, dir: Option<&Path>) -> Result<Option<PathBuf>> {
    match dir {
        Some(dir) => {
            save_record(record, dir)?;
            Ok(Some(dir.to_path_buf()))
        }
        None => Ok(None),
    }
}

fn solve(args: SolveArgs) -> Result<Value> {
    let config = args.source.load()?;
    let record = run_experiment(&config)?;
    let out = args.out.or_else(|| config.output.clone());
    let mut report = summary(&record);
    report["output"] = json!(save(&record, out.as_deref())?);
    Ok(report)
}

fn parse_entry(text: &str) -> Result<SweepEntry> {
    let (kind, tau) = match text.split_once(':') {
        Some((kind, tau)) => (kind, tau.parse::<f64>().with_context(|| format!("tau in {text:?}"))?),
        None => (text, 1.0),
    };
    let kind = kind
        .parse::<TopologyKind>()
        .map_err(|e| usage(format!("{text:?}: {e}")))?;
    Ok(SweepEntry { kind, tau })
}

fn with_pair(spec: &AlgorithmSpec, alpha: f64, eps: f64) -> AlgorithmSpec {
    match *spec {
        AlgorithmSpec::NewtonTracking { .. } => AlgorithmSpec::NewtonTracking { alpha, eps },
        AlgorithmSpec::PrimalDual { .. } => AlgorithmSpec::PrimalDual { alpha, eps },
        AlgorithmSpec::Dlm { .. } => AlgorithmSpec::Dlm { alpha, eps },
        AlgorithmSpec::GradientTracking { .. } => AlgorithmSpec::GradientTracking { alpha },
        AlgorithmSpec::Extra { .. } => AlgorithmSpec::Extra { alpha },
    }
}

fn sweep(args: SweepArgs) -> Result<Value> {
    let config = args.source.load()?;
    let out = args.out.or_else(|| config.output.clone());
    let entries: Vec<SweepEntry> = if args.topologies.is_empty() {
        config.sweep.clone()
    } else {
        args.topologies.iter().map(|t| parse_entry(t)).collect::<Result<_>>()?
    };
    let parameter_sweep = !args.alpha.is_empty() || !args.eps.is_empty();

    let records: Vec<(String, RunRecord)> = if parameter_sweep {
        let first = config
            .algorithms
            .first()
            .ok_or_else(|| anyhow!(usage("parameter sweep needs a configured method".into())))?;
        let alphas = if args.alpha.is_empty() {
            vec![first.alpha()]
        } else {
            args.alpha.clone()
        };
        let epss = if args.eps.is_empty() {
            vec![first.eps().unwrap_or(0.0)]
        } else {
            args.eps.clone()
        };
        let mut variant = config.clone();
        variant.algorithms = alphas
            .iter()
            .flat_map(|&a| epss.iter().map(move |&e| (a, e)))
            .map(|(a, e)| with_pair(first, a, e))
            .collect();
        variant.algorithms.dedup();
        let configs: Vec<RunConfig> = if entries.is_empty() {
            vec![variant]
        } else {
            entries.iter().map(|&e| variant.with_topology(e)).collect()
        };
        configs
            .iter()
            .map(|c| Ok((c.name.clone(), run_experiment(c)?)))
            .collect::<Result<_>>()?
    } else {
        if entries.is_empty() {
            bail!(usage(
                "nothing to sweep: configure `sweep`, or pass --topologies or --alpha/--eps".into()
            ));
        }
        let records = topology_sweep(&config, &entries)?;
        entries.iter().map(|e| e.label()).zip(records).collect()
    };

    let mut reports = Vec::with_capacity(records.len());
    for (k, (name, record)) in records.iter().enumerate() {
        let dir = out.as_ref().map(|d| {
            let leaf = entries.get(k).map_or_else(|| "params".to_string(), |e| e.label());
            d.join(leaf)
        });
        let mut report = summary(record);
        report["name"] = json!(name);
        report["output"] = json!(save(record, dir.as_deref())?);
        reports.push(report);
    }
    Ok(json!({ "sweep": reports }))
}

fn certificate_json(label: &str, cert: &RateCertificate) -> Value {
    let mut value = serde_json::to_value(cert).expect("certificate serializes");
    value["label"] = json!(label);
    value["threshold"] = json!(cert.threshold());
    value["contraction_factor"] = json!(cert.contraction_factor());
    value
}

fn certify(args: CertifyArgs) -> Result<Value> {
    if let Some(mu) = args.mu {
        let required = |v: Option<f64>| v.expect("clap enforces requires_all");
        let cert = RateCertificate::from_constants(
            mu,
            required(args.l),
            required(args.lambda_max),
            required(args.lambda_hat_min),
            required(args.alpha),
            required(args.eps),
            args.beta,
            args.phi,
        )?;
        let cert = if args.grid {
            let (mu, l, lmax, lhat, a, e) = (
                cert.mu_f,
                cert.l_f,
                cert.lambda_max,
                cert.lambda_hat_min,
                cert.alpha,
                cert.eps,
            );
            let mut best = cert;
            for &beta in &DEFAULT_GRID {
                for &phi in &DEFAULT_GRID {
                    let c = RateCertificate::from_constants(mu, l, lmax, lhat, a, e, beta, phi)?;
                    if c.delta_prime.unwrap_or(f64::NEG_INFINITY) > best.delta_prime.unwrap_or(f64::NEG_INFINITY) {
                        best = c;
                    }
                }
            }
            best
        } else {
            cert
        };
        return Ok(json!({ "certificates": [certificate_json("constants", &cert)] }));
    }

    let config = args.source.load()?;
    let problem = build_problem(&config)?;
    let mut out = Vec::new();
    for spec in &config.algorithms {
        let (alpha, eps) = match (args.alpha, args.eps, spec.certified_pair()) {
            (Some(a), Some(e), _) => (a, e),
            (_, _, Some(pair)) => pair,
            _ => continue,
        };
        let cert = if args.grid || config.analysis.grid {
            best_certificate(&problem.bounds, &problem.spectra, alpha, eps, &DEFAULT_GRID)?
        } else {
            rate_certificate(&problem.bounds, &problem.spectra, alpha, eps, args.beta, args.phi)?
        };
        out.push(certificate_json(spec.name(), &cert));
    }
    if out.is_empty() {
        bail!(usage(
            "no method with (alpha, eps) to certify; pass --alpha and --eps".into()
        ));
    }
    Ok(json!({ "certificates": out }))
}

fn check(args: CheckArgs) -> Result<Value> {
    let record = match &args.record {
        Some(path) => load_record(path)?,
        None => {
            let mut config = args.source.load()?;
            config.analysis.checks = true;
            run_experiment(&config)?
        }
    };
    let checks = check_record(&record);
    let failed = checks.iter().filter(|c| !c.passed).count();
    print(&json!({ "checks": checks, "failed": failed }));
    if failed > 0 {
        return Err(ChecksFailed(failed).into());
    }
    Ok(Value::Null)
}

fn error_kind(err: &anyhow::Error) -> &'static str {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<ntrack_core::Error>() {
            return e.kind();
        }
        if cause.downcast_ref::<Usage>().is_some() {
            return "usage";
        }
        if cause.downcast_ref::<ChecksFailed>().is_some() {
            return "checks_failed";
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return "json";
        }
    }
    "error"
}

fn fail(kind: &str, message: String) -> ExitCode {
    eprintln!("{}", json!({ "error": kind, "message": message }));
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.render().to_string().trim_end().to_string()),
    };
    let result = match cli.command {
        Command::Spectra(args) => spectra(args),
        Command::Solve(args) => solve(args),
        Command::Sweep(args) => sweep(args),
        Command::Certify(args) => certify(args),
        Command::Check(args) => check(args),
    };
    match result {
        Ok(Value::Null) => ExitCode::SUCCESS,
        Ok(report) => {
            print(&report);
            ExitCode::SUCCESS
        }
        Err(e) => fail(error_kind(&e), format!("{e:#}")),
    }
}
