//! Experiment sweeps: build a metric and a packet source, run a policy,
//! compare against the oracle or the adversary's offline schedule, and
//! emit one row per run.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{
    metric_adversary, opt_prime, run_adversary, Adversary, AdversaryError, AdversaryTrace,
    DirectedAdversary, StarAdversary,
};
use crate::algorithms::{tsp_edf_bound, AlgorithmError, PolicyKind};
use crate::metric::{
    best_tour, prim_mst, random_directed_metric, random_metric, uniform_metric, Color, MetricError,
    MetricFile, StarMetric, TransitionGraph, Weight,
};
use crate::oracle::{offline_opt, ORACLE_MAX_HORIZON, ORACLE_MAX_PACKETS};
use crate::sched::{
    min_laxity, simulate, validate_schedule, Instance, Packet, SchedError, Schedule,
    SimulationError, StaticSource,
};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unknown report format `{0}` (expected csv or json)")]
    UnknownFormat(String),
    #[error("reading {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Sched(#[from] SchedError),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error(transparent)]
    Algorithm(#[from] AlgorithmError),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
    #[error("report encoding: {0}")]
    Encode(String),
}

fn read_file(path: &PathBuf) -> Result<String, HarnessError> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
        path: path.clone(),
        message: e.to_string(),
    })
}

fn default_weight_range() -> [Weight; 2] {
    [1, 10]
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricSource {
    File {
        path: PathBuf,
    },
    Uniform {
        colors: usize,
        cost: Weight,
    },
    Random {
        colors: usize,
        seed: u64,
        #[serde(default = "default_weight_range")]
        weights: [Weight; 2],
        #[serde(default)]
        directed: bool,
    },
    Star {
        weights: Vec<i64>,
        #[serde(default)]
        root: Color,
    },
}

/// A resolved metric source.
#[derive(Clone, Debug)]
pub struct BuiltMetric {
    pub id: String,
    pub graph: TransitionGraph,
    pub star: Option<StarMetric>,
}

impl MetricSource {
    pub fn build(&self) -> Result<BuiltMetric, HarnessError> {
        Ok(match self {
            MetricSource::File { path } => {
                let file: MetricFile = serde_json::from_str(&read_file(path)?)
                    .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
                BuiltMetric {
                    id: format!("file:{}", path.display()),
                    graph: TransitionGraph::try_from(file)?,
                    star: None,
                }
            }
            MetricSource::Uniform { colors, cost } => BuiltMetric {
                id: format!("uniform({colors},{cost})"),
                graph: uniform_metric(*colors, *cost),
                star: None,
            },
            MetricSource::Random {
                colors,
                seed,
                weights,
                directed,
            } => {
                if weights[0] > weights[1] {
                    return Err(HarnessError::Config("weight range is empty".into()));
                }
                let range = weights[0]..=weights[1];
                let (graph, tag) = if *directed {
                    (
                        random_directed_metric(*colors, *seed, range),
                        "random-directed",
                    )
                } else {
                    (random_metric(*colors, *seed, range), "random")
                };
                BuiltMetric {
                    id: format!("{tag}({colors},{seed})"),
                    graph,
                    star: None,
                }
            }
            MetricSource::Star { weights, root } => {
                let star = StarMetric::from_integers(weights, *root)?;
                let list: Vec<String> = weights.iter().map(ToString::to_string).collect();
                BuiltMetric {
                    id: format!("star({})", list.join(",")),
                    graph: star.to_transition_graph(),
                    star: Some(star),
                }
            }
        })
    }
}

fn default_clamp() -> bool {
    true
}

/// Where packets come from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceConfig {
    /// Star adversary; needs a star metric.
    Star {
        #[serde(default = "default_clamp")]
        clamp: bool,
    },
    /// Star adversary on the Prim embedding of a symmetric metric.
    Metric {
        #[serde(default)]
        root: Color,
        #[serde(default = "default_clamp")]
        clamp: bool,
    },
    Directed {
        #[serde(default = "default_clamp")]
        clamp: bool,
    },
    /// Fixed instance (or serialized trace). The policy laxity is the
    /// smaller of the sweep value and the instance's own laxity.
    StaticFile { path: PathBuf },
    /// Random static instance: releases in `1..=2L`, laxities in `L..=2L`.
    RandomStatic { packets: usize },
}

impl SourceConfig {
    pub fn name(&self) -> &'static str {
        match self {
            SourceConfig::Star { .. } => "star",
            SourceConfig::Metric { .. } => "metric",
            SourceConfig::Directed { .. } => "directed",
            SourceConfig::StaticFile { .. } => "static_file",
            SourceConfig::RandomStatic { .. } => "random_static",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, HarnessError> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(HarnessError::UnknownFormat(other.to_string())),
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        })
    }
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub metric: MetricSource,
    pub policy: PolicyKind,
    pub source: SourceConfig,
    #[serde(default)]
    pub laxities: Vec<u64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub format: ReportFormat,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.laxities.contains(&0) {
            return Err(HarnessError::Config("laxities must be positive".into()));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("at least one seed is required".into()));
        }
        match (&self.source, &self.metric) {
            (SourceConfig::Star { .. }, MetricSource::Star { .. }) => {}
            (SourceConfig::Star { .. }, _) => {
                return Err(HarnessError::Config(
                    "the star adversary needs a star metric; use the metric adversary otherwise"
                        .into(),
                ))
            }
            (SourceConfig::RandomStatic { packets: 0 }, _) => {
                return Err(HarnessError::Config(
                    "random_static needs at least one packet".into(),
                ))
            }
            _ => {}
        }
        Ok(())
    }
}

/// One run of a policy against a source.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub metric: String,
    pub colors: usize,
    pub policy: String,
    pub source: String,
    /// Laxity requested by the sweep.
    pub laxity: u64,
    /// Laxity actually used (after clamping).
    pub effective_laxity: u64,
    /// `MST / L`; absent for directed graphs.
    pub delta: Option<f64>,
    /// `TSP / L`.
    pub gamma: f64,
    pub case: Option<u8>,
    pub packets: u64,
    pub alg: u64,
    pub opt_oracle: Option<u64>,
    pub opt_prime: Option<u64>,
    /// Reference value used as the ratio denominator.
    pub opt: u64,
    /// `oracle`, `opt_prime`, `alg` or `packet_count`.
    pub opt_source: String,
    pub ratio: f64,
    /// `1 - 3 sqrt(TSP / L)`.
    pub bound: f64,
    pub idle: u64,
    pub transition: u64,
    pub dropped: u64,
    /// The policy's schedule validates against the serialized instance.
    pub replay_ok: bool,
    pub seed: u64,
    pub notes: String,
}

/// CSV column order, identical to the field order of [`ResultRow`].
pub const CSV_HEADER: [&str; 23] = [
    "metric",
    "colors",
    "policy",
    "source",
    "laxity",
    "effective_laxity",
    "delta",
    "gamma",
    "case",
    "packets",
    "alg",
    "opt_oracle",
    "opt_prime",
    "opt",
    "opt_source",
    "ratio",
    "bound",
    "idle",
    "transition",
    "dropped",
    "replay_ok",
    "seed",
    "notes",
];

fn header() -> &'static [&'static str] {
    &CSV_HEADER
}

/// Random static instance with minimum laxity exactly `laxity`.
pub fn random_static_instance(
    graph: &TransitionGraph,
    packets: usize,
    laxity: u64,
    seed: u64,
) -> Result<Instance, SchedError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut list: Vec<Packet> = (0..packets)
        .map(|id| {
            let r = rng.gen_range(1..=2 * laxity);
            let d = r + rng.gen_range(laxity..=2 * laxity);
            Packet::new(id, r, d, rng.gen_range(0..graph.colors()))
        })
        .collect();
    list[0].d = list[0].r + laxity;
    Instance::new(graph.clone(), list, None)
}

struct Outcome {
    schedule: Schedule,
    instance: Instance,
    trace: Option<AdversaryTrace>,
    effective_laxity: u64,
    notes: Vec<String>,
}

fn run_source(
    config: &ExperimentConfig,
    metric: &BuiltMetric,
    laxity: u64,
    seed: u64,
) -> Result<Outcome, HarnessError> {
    fn play<A: Adversary>(
        mut adv: A,
        laxity: u64,
        kind: PolicyKind,
    ) -> Result<Outcome, HarnessError> {
        let mut policy = kind.build(adv.graph(), laxity, adv.horizon())?;
        let (run, trace) = run_adversary(&mut adv, &mut policy)?;
        let mut notes = Vec::new();
        if trace.clamped {
            notes.push(format!(
                "laxity raised from {} to {}",
                trace.requested_laxity, trace.laxity
            ));
        }
        Ok(Outcome {
            schedule: run.schedule,
            instance: run.instance,
            effective_laxity: trace.laxity,
            trace: Some(trace),
            notes,
        })
    }
    let g = &metric.graph;
    match &config.source {
        SourceConfig::Star { clamp } => {
            let star = metric.star.as_ref().ok_or_else(|| {
                HarnessError::Config("the star adversary needs a star metric".into())
            })?;
            let adv = StarAdversary::new(star, laxity, *clamp)?;
            let l = adv.params().laxity;
            play(adv, l, config.policy)
        }
        SourceConfig::Metric { root, clamp } => {
            let adv = metric_adversary(g, *root, laxity, *clamp)?;
            let l = adv.params().laxity;
            play(adv, l, config.policy)
        }
        SourceConfig::Directed { clamp } => {
            let adv = DirectedAdversary::new(g, laxity, *clamp)?;
            let l = adv.params().laxity;
            play(adv, l, config.policy)
        }
        SourceConfig::StaticFile { path } => {
            let text = read_file(path)?;
            let instance = Instance::from_json(&text)
                .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
            // A serialized adversary trace keeps its offline schedule.
            let trace = serde_json::from_str::<AdversaryTrace>(&text).ok();
            if instance.graph != *g {
                return Err(HarnessError::Config(format!(
                    "{}: instance metric differs from the configured metric",
                    path.display()
                )));
            }
            let own = min_laxity(&instance.packets)?;
            let mut notes = Vec::new();
            let l = if own < laxity {
                notes.push(format!("laxity lowered to the instance minimum {own}"));
                own
            } else {
                laxity
            };
            let mut out = static_run(instance, l, config.policy, notes)?;
            out.trace = trace;
            Ok(out)
        }
        SourceConfig::RandomStatic { packets } => {
            let instance = random_static_instance(g, *packets, laxity, seed)?;
            static_run(instance, laxity, config.policy, Vec::new())
        }
    }
}

fn static_run(
    instance: Instance,
    laxity: u64,
    kind: PolicyKind,
    notes: Vec<String>,
) -> Result<Outcome, HarnessError> {
    let mut policy = kind.build(&instance.graph, laxity, instance.horizon)?;
    let run = simulate(&mut StaticSource::new(&instance), &mut policy)?;
    Ok(Outcome {
        schedule: run.schedule,
        instance: run.instance,
        trace: None,
        effective_laxity: laxity,
        notes,
    })
}

fn replays(outcome: &Outcome) -> bool {
    let json = match &outcome.trace {
        Some(t) => t.to_json(),
        None => outcome.instance.to_json(),
    };
    Instance::from_json(&json)
        .map(|inst| validate_schedule(&inst, &outcome.schedule).is_ok())
        .unwrap_or(false)
}

fn run_row(
    config: &ExperimentConfig,
    metric: &BuiltMetric,
    tsp: Weight,
    mst: Option<Weight>,
    laxity: u64,
    seed: u64,
) -> Result<ResultRow, HarnessError> {
    let mut out = run_source(config, metric, laxity, seed)?;
    let inst = &out.instance;
    let alg = out.schedule.throughput();
    let n = inst.packets.len() as u64;

    let opt_oracle =
        if inst.packets.len() <= ORACLE_MAX_PACKETS && inst.horizon <= ORACLE_MAX_HORIZON {
            Some(
                offline_opt(inst)
                    .map_err(|e| HarnessError::Config(e.to_string()))?
                    .opt,
            )
        } else {
            out.notes.push(format!(
                "oracle capacity exceeded ({} packets, horizon {})",
                inst.packets.len(),
                inst.horizon
            ));
            None
        };
    let opt_prime_value = match &out.trace {
        Some(t) => Some(opt_prime(t)?.throughput()),
        None => None,
    };
    let (mut opt, mut opt_source) = match (opt_oracle, opt_prime_value) {
        (Some(o), Some(p)) if p > o => (p, "opt_prime"),
        (Some(o), _) => (o, "oracle"),
        (None, Some(p)) => (p, "opt_prime"),
        (None, None) => {
            out.notes
                .push("no offline reference; using the packet count".into());
            (n, "packet_count")
        }
    };
    if alg > opt {
        out.notes
            .push(format!("policy beat the offline reference {opt}"));
        opt = alg;
        opt_source = "alg";
    }
    let counts = out.schedule.counts_in(1, out.schedule.len());
    let l = out.effective_laxity;
    Ok(ResultRow {
        metric: metric.id.clone(),
        colors: metric.graph.colors(),
        policy: config.policy.as_str().to_string(),
        source: config.source.name().to_string(),
        laxity,
        effective_laxity: l,
        delta: mst.map(|m| m as f64 / l as f64),
        gamma: tsp as f64 / l as f64,
        case: out.trace.as_ref().and_then(|t| t.case).map(u8::from),
        packets: n,
        alg,
        opt_oracle,
        opt_prime: opt_prime_value,
        opt,
        opt_source: opt_source.to_string(),
        ratio: if opt == 0 {
            1.0
        } else {
            alg as f64 / opt as f64
        },
        bound: tsp_edf_bound(tsp, l),
        idle: counts.idle,
        transition: counts.transition,
        dropped: n - alg,
        replay_ok: replays(&out),
        seed,
        notes: out.notes.join("; "),
    })
}

/// Runs every `(L, seed)` pair of the sweep, in parallel, returning rows in
/// configuration order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ResultRow>, HarnessError> {
    config.validate()?;
    if config.laxities.is_empty() {
        return Ok(Vec::new());
    }
    let metric = config.metric.build()?;
    let tsp = best_tour(&metric.graph).weight;
    let mst = if metric.graph.is_directed() {
        None
    } else {
        Some(prim_mst(&metric.graph, 0)?.total_weight)
    };
    let jobs: Vec<(u64, u64)> = config
        .laxities
        .iter()
        .flat_map(|&l| config.seeds.iter().map(move |&s| (l, s)))
        .collect();
    jobs.par_iter()
        .map(|&(l, s)| run_row(config, &metric, tsp, mst, l, s))
        .collect()
}

/// Serializes rows. CSV always starts with [`CSV_HEADER`]; JSON is an array
/// of row objects.
pub fn emit_report(rows: &[ResultRow], format: ReportFormat) -> Result<Vec<u8>, HarnessError> {
    let enc = |e: &dyn fmt::Display| HarnessError::Encode(e.to_string());
    match format {
        ReportFormat::Json => {
            let mut out = serde_json::to_vec_pretty(rows).map_err(|e| enc(&e))?;
            out.push(b'\n');
            Ok(out)
        }
        ReportFormat::Csv => {
            let mut w = csv::WriterBuilder::new()
                .has_headers(false)
                .from_writer(Vec::new());
            w.write_record(header()).map_err(|e| enc(&e))?;
            for row in rows {
                w.serialize(row).map_err(|e| enc(&e))?;
            }
            w.into_inner().map_err(|e| enc(&e))
        }
    }
}

/// Reads a report produced by [`emit_report`].
pub fn parse_report(bytes: &[u8], format: ReportFormat) -> Result<Vec<ResultRow>, HarnessError> {
    let enc = |e: &dyn fmt::Display| HarnessError::Encode(e.to_string());
    match format {
        ReportFormat::Json => serde_json::from_slice(bytes).map_err(|e| enc(&e)),
        ReportFormat::Csv => {
            let mut r = csv::Reader::from_reader(bytes);
            let found = r.headers().map_err(|e| enc(&e))?;
            if found.iter().ne(header().iter().copied()) {
                return Err(HarnessError::Encode("unexpected CSV header".into()));
            }
            r.deserialize()
                .collect::<Result<_, _>>()
                .map_err(|e| enc(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(
        metric: MetricSource,
        policy: PolicyKind,
        source: SourceConfig,
        laxities: Vec<u64>,
    ) -> ExperimentConfig {
        ExperimentConfig {
            metric,
            policy,
            source,
            laxities,
            seeds: vec![7],
            format: ReportFormat::Csv,
        }
    }

    #[test]
    fn uniform_static_row_meets_bound() {
        let cfg = config(
            MetricSource::Uniform { colors: 3, cost: 1 },
            PolicyKind::TspEdf,
            SourceConfig::RandomStatic { packets: 12 },
            vec![300],
        );
        let rows = run_experiment(&cfg).unwrap();
        assert_eq!(rows.len(), 1);
        let row = &rows[0];
        assert_eq!(row.opt_source, "oracle");
        assert!((row.bound - 0.7).abs() < 1e-12);
        assert!(row.ratio >= row.bound);
        assert!(row.replay_ok);
    }

    #[test]
    fn star_adversary_row_records_case() {
        let cfg = config(
            MetricSource::Star {
                weights: vec![0, 2],
                root: 0,
            },
            PolicyKind::Edf,
            SourceConfig::Star { clamp: true },
            vec![50],
        );
        let row = &run_experiment(&cfg).unwrap()[0];
        assert!(row.case.is_some());
        assert!(row.ratio < 1.0, "{row:?}");
        assert!(row.opt_prime.is_some());
        assert!(row.notes.contains("oracle capacity exceeded"));
        assert!(row.replay_ok);
    }

    #[test]
    fn empty_sweep_is_empty() {
        let cfg = config(
            MetricSource::Uniform { colors: 2, cost: 1 },
            PolicyKind::Edf,
            SourceConfig::RandomStatic { packets: 3 },
            vec![],
        );
        assert!(run_experiment(&cfg).unwrap().is_empty());
    }

    #[test]
    fn config_errors() {
        let mut cfg = config(
            MetricSource::Uniform { colors: 2, cost: 1 },
            PolicyKind::Edf,
            SourceConfig::Star { clamp: true },
            vec![10],
        );
        assert!(matches!(run_experiment(&cfg), Err(HarnessError::Config(_))));
        cfg.source = SourceConfig::RandomStatic { packets: 3 };
        cfg.laxities = vec![0];
        assert!(matches!(run_experiment(&cfg), Err(HarnessError::Config(_))));
        assert!(ExperimentConfig::from_json(r#"{"metric":{"kind":"uniform","colors":2,"cost":1},"policy":"fifo","source":{"kind":"directed"}}"#).is_err());
        assert!(matches!(
            "xml".parse::<ReportFormat>(),
            Err(HarnessError::UnknownFormat(_))
        ));
    }

    #[test]
    fn config_json_defaults() {
        let cfg = ExperimentConfig::from_json(
            r#"{"metric":{"kind":"random","colors":4,"seed":3},"policy":"tsp-edf","source":{"kind":"metric"},"laxities":[100]}"#,
        )
        .unwrap();
        assert_eq!(cfg.seeds, vec![0]);
        assert_eq!(cfg.format, ReportFormat::Csv);
        assert_eq!(
            cfg.source,
            SourceConfig::Metric {
                root: 0,
                clamp: true
            }
        );
    }

    #[test]
    fn report_round_trips() {
        let cfg = config(
            MetricSource::Random {
                colors: 3,
                seed: 1,
                weights: [1, 5],
                directed: false,
            },
            PolicyKind::Edf,
            SourceConfig::RandomStatic { packets: 6 },
            vec![20, 40],
        );
        let rows = run_experiment(&cfg).unwrap();
        for format in [ReportFormat::Csv, ReportFormat::Json] {
            let bytes = emit_report(&rows, format).unwrap();
            assert_eq!(parse_report(&bytes, format).unwrap(), rows);
        }
        let one = emit_report(&rows[..1], ReportFormat::Csv).unwrap();
        assert_eq!(String::from_utf8(one).unwrap().lines().count(), 2);
        let empty = String::from_utf8(emit_report(&[], ReportFormat::Csv).unwrap()).unwrap();
        assert_eq!(empty.trim_end(), header().join(","));
    }

    #[test]
    fn header_matches_row_fields() {
        let row = ResultRow {
            metric: String::new(),
            colors: 0,
            policy: String::new(),
            source: String::new(),
            laxity: 0,
            effective_laxity: 0,
            delta: None,
            gamma: 0.0,
            case: None,
            packets: 0,
            alg: 0,
            opt_oracle: None,
            opt_prime: None,
            opt: 0,
            opt_source: String::new(),
            ratio: 0.0,
            bound: 0.0,
            idle: 0,
            transition: 0,
            dropped: 0,
            replay_ok: true,
            seed: 0,
            notes: String::new(),
        };
        let mut w = csv::Writer::from_writer(Vec::new());
        w.serialize(&row).unwrap();
        let text = String::from_utf8(w.into_inner().unwrap()).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
    }

    #[test]
    fn rows_follow_config_order() {
        let cfg = config(
            MetricSource::Uniform { colors: 2, cost: 1 },
            PolicyKind::Edf,
            SourceConfig::RandomStatic { packets: 4 },
            vec![30, 10, 20],
        );
        let laxities: Vec<u64> = run_experiment(&cfg)
            .unwrap()
            .iter()
            .map(|r| r.laxity)
            .collect();
        assert_eq!(laxities, vec![30, 10, 20]);
    }
}
