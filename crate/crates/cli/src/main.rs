use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use schedlab::adversary::{
    loss_accounting, metric_adversary, opt_prime, opt_prime_bound, run_adversary, Adversary,
    AdversaryTrace, DirectedAdversary, StarAdversary,
};
use schedlab::algorithms::PolicyKind;
use schedlab::embedding::{embed_prim, verify_embedding};
use schedlab::harness::{emit_report, run_experiment, ExperimentConfig, ReportFormat};
use schedlab::metric::{
    random_directed_metric, random_metric, uniform_metric, MetricFile, StarFile, StarMetric,
    TransitionGraph,
};
use schedlab::oracle::offline_opt;
use schedlab::sched::{Instance, Schedule};

#[derive(Parser)]
#[command(
    name = "schedlab",
    version,
    about = "Colored packet scheduling with transition costs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment sweep and write a CSV or JSON report.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Report file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the config's format (default: from the --out extension, then the config).
        #[arg(long)]
        format: Option<String>,
        /// Replaces the config's seed list with this single seed.
        #[arg(long, env = "SCHEDLAB_SEED")]
        seed: Option<u64>,
    },
    /// Exact offline optimum of a small instance.
    Opt {
        #[arg(long)]
        instance: PathBuf,
        /// Also write the optimal schedule as JSON.
        #[arg(long)]
        schedule: Option<PathBuf>,
    },
    /// Star embedding of a symmetric metric.
    Embed {
        #[arg(long)]
        metric: PathBuf,
        #[arg(long, default_value_t = 0)]
        root: usize,
        /// Check Steiner dominance on up to this many subsets.
        #[arg(long)]
        verify: Option<usize>,
        #[arg(long, env = "SCHEDLAB_SEED", default_value_t = 0)]
        seed: u64,
    },
    /// Play an adversary against a policy.
    Adversary {
        #[arg(long, value_enum)]
        kind: AdversaryArg,
        /// Transition matrix, or a star file for `--kind star`.
        #[arg(long)]
        metric: PathBuf,
        #[arg(long)]
        laxity: u64,
        #[arg(long, default_value = "tsp-edf")]
        policy: String,
        /// Embedding root for `--kind metric`.
        #[arg(long, default_value_t = 0)]
        root: usize,
        /// Fail instead of raising a laxity that is too small.
        #[arg(long)]
        no_clamp: bool,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Write a transition matrix.
    Metric {
        #[arg(long)]
        colors: usize,
        /// Uniform cost for every transition; random weights when omitted.
        #[arg(long)]
        uniform: Option<u64>,
        #[arg(long, env = "SCHEDLAB_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        min: u64,
        #[arg(long, default_value_t = 10)]
        max: u64,
        #[arg(long)]
        directed: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AdversaryArg {
    Star,
    Metric,
    Directed,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_or_print(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

fn print_json(value: &serde_json::Value) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("json value")
    );
}

fn load_graph(path: &Path) -> Result<TransitionGraph> {
    let file: MetricFile = serde_json::from_str(&read(path)?)
        .with_context(|| format!("parsing {}", path.display()))?;
    Ok(TransitionGraph::try_from(file)?)
}

fn cmd_run(
    config: &Path,
    out: Option<&Path>,
    format: Option<&str>,
    seed: Option<u64>,
) -> Result<()> {
    let mut cfg = ExperimentConfig::from_json(&read(config)?)?;
    if let Some(s) = seed {
        cfg.seeds = vec![s];
    }
    let format = match (
        format,
        out.and_then(|p| p.extension()).and_then(|e| e.to_str()),
    ) {
        (Some(f), _) => f.parse()?,
        (None, Some("json")) => ReportFormat::Json,
        (None, Some("csv")) => ReportFormat::Csv,
        (None, _) => cfg.format,
    };
    let rows = run_experiment(&cfg)?;
    for row in rows.iter().filter(|r| !r.notes.is_empty()) {
        eprintln!("L={} seed={}: {}", row.laxity, row.seed, row.notes);
    }
    write_or_print(out, &emit_report(&rows, format)?)
}

fn cmd_opt(instance: &Path, schedule: Option<&Path>) -> Result<()> {
    let inst = Instance::from_json(&read(instance)?)
        .with_context(|| format!("parsing {}", instance.display()))?;
    let result = offline_opt(&inst)?;
    if let Some(p) = schedule {
        fs::write(p, result.schedule.to_json())
            .with_context(|| format!("writing {}", p.display()))?;
    }
    print_json(&json!({
        "opt": result.opt,
        "packets": inst.packets.len(),
        "horizon": inst.horizon,
        "explored": result.explored,
        "schedule": result.schedule.to_records(),
    }));
    Ok(())
}

fn cmd_embed(metric: &Path, root: usize, verify: Option<usize>, seed: u64) -> Result<()> {
    let g = load_graph(metric)?;
    let result = embed_prim(&g, root)?;
    let mut out = json!({
        "star": result.star.to_file(),
        "total": result.star.total().to_string(),
        "tree": result.trace,
    });
    if let Some(budget) = verify {
        let report = verify_embedding(&g, root, &result, budget, seed)?;
        out["verification"] = serde_json::to_value(&report)?;
        if !report.is_ok() {
            print_json(&out);
            bail!("embedding check failed");
        }
    }
    print_json(&out);
    Ok(())
}

fn play<A: Adversary>(
    mut adv: A,
    laxity: u64,
    policy: PolicyKind,
) -> Result<(AdversaryTrace, u64, Schedule)> {
    let mut p = policy.build(adv.graph(), laxity, adv.horizon())?;
    let (run, trace) = run_adversary(&mut adv, &mut p)?;
    Ok((trace, run.schedule.throughput(), run.schedule))
}

#[allow(clippy::too_many_arguments)]
fn cmd_adversary(
    kind: AdversaryArg,
    metric: &Path,
    laxity: u64,
    policy: &str,
    root: usize,
    clamp: bool,
    trace_out: Option<&Path>,
) -> Result<()> {
    let policy: PolicyKind = policy.parse()?;
    let text = read(metric)?;
    let (trace, alg, schedule) = match kind {
        AdversaryArg::Star => {
            let star = match serde_json::from_str::<StarFile>(&text) {
                Ok(f) => StarMetric::from_file(&f)?,
                Err(_) => bail!(
                    "{} is not a star file (expected root and weights)",
                    metric.display()
                ),
            };
            let adv = StarAdversary::new(&star, laxity, clamp)?;
            let l = adv.params().laxity;
            play(adv, l, policy)?
        }
        AdversaryArg::Metric => {
            let adv = metric_adversary(&load_graph(metric)?, root, laxity, clamp)?;
            let l = adv.params().laxity;
            play(adv, l, policy)?
        }
        AdversaryArg::Directed => {
            let adv = DirectedAdversary::new(&load_graph(metric)?, laxity, clamp)?;
            let l = adv.params().laxity;
            play(adv, l, policy)?
        }
    };
    if let Some(p) = trace_out {
        fs::write(p, trace.to_json()).with_context(|| format!("writing {}", p.display()))?;
    }
    let offline = opt_prime(&trace)?.throughput();
    let loss = loss_accounting(&trace, &schedule)?;
    print_json(&json!({
        "kind": trace.kind,
        "policy": policy.as_str(),
        "laxity": trace.laxity,
        "clamped": trace.clamped,
        "case": trace.case,
        "packets": trace.packets.len(),
        "alg": alg,
        "opt_prime": offline,
        "opt_prime_bound": opt_prime_bound(&trace)?.to_string(),
        "ratio": if offline == 0 { 1.0 } else { alg as f64 / offline as f64 },
        "loss": loss,
    }));
    Ok(())
}

fn cmd_metric(
    colors: usize,
    uniform: Option<u64>,
    seed: u64,
    min: u64,
    max: u64,
    directed: bool,
    out: Option<&Path>,
) -> Result<()> {
    if colors == 0 {
        bail!("--colors must be positive");
    }
    if min > max {
        bail!("--min exceeds --max");
    }
    let g = match (uniform, directed) {
        (Some(d), _) => uniform_metric(colors, d),
        (None, true) => random_directed_metric(colors, seed, min..=max),
        (None, false) => random_metric(colors, seed, min..=max),
    };
    let mut text = serde_json::to_string_pretty(&g.to_file())?;
    text.push('\n');
    write_or_print(out, text.as_bytes())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            out,
            format,
            seed,
        } => cmd_run(&config, out.as_deref(), format.as_deref(), seed),
        Command::Opt { instance, schedule } => cmd_opt(&instance, schedule.as_deref()),
        Command::Embed {
            metric,
            root,
            verify,
            seed,
        } => cmd_embed(&metric, root, verify, seed),
        Command::Adversary {
            kind,
            metric,
            laxity,
            policy,
            root,
            no_clamp,
            trace,
        } => cmd_adversary(
            kind,
            &metric,
            laxity,
            &policy,
            root,
            !no_clamp,
            trace.as_deref(),
        ),
        Command::Metric {
            colors,
            uniform,
            seed,
            min,
            max,
            directed,
            out,
        } => cmd_metric(colors, uniform, seed, min, max, directed, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<schedlab::harness::HarnessError>()
                .is_some_and(|h| matches!(h, schedlab::harness::HarnessError::UnknownFormat(_)))
            {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
