use schedlab::adversary::{run_adversary, StarAdversary};
use schedlab::algorithms::PolicyKind;
use schedlab::harness::{
    emit_report, parse_report, run_experiment, ExperimentConfig, MetricSource, ReportFormat,
    SourceConfig,
};
use schedlab::metric::StarMetric;

fn config(
    metric: MetricSource,
    policy: PolicyKind,
    source: SourceConfig,
    laxities: Vec<u64>,
    seeds: Vec<u64>,
) -> ExperimentConfig {
    ExperimentConfig {
        metric,
        policy,
        source,
        laxities,
        seeds,
        format: ReportFormat::Csv,
    }
}

#[test]
fn rows_are_sane_and_reproducible() {
    let configs = [
        config(
            MetricSource::Random {
                colors: 4,
                seed: 11,
                weights: [1, 6],
                directed: false,
            },
            PolicyKind::TspEdf,
            SourceConfig::RandomStatic { packets: 10 },
            vec![40, 200, 900],
            vec![1, 2, 3],
        ),
        config(
            MetricSource::Random {
                colors: 4,
                seed: 5,
                weights: [1, 4],
                directed: false,
            },
            PolicyKind::Edf,
            SourceConfig::Metric {
                root: 1,
                clamp: true,
            },
            vec![100, 400],
            vec![0],
        ),
        config(
            MetricSource::Random {
                colors: 3,
                seed: 8,
                weights: [1, 4],
                directed: true,
            },
            PolicyKind::TspEdf,
            SourceConfig::Directed { clamp: true },
            vec![300, 1200],
            vec![0],
        ),
        config(
            MetricSource::Uniform { colors: 3, cost: 1 },
            PolicyKind::Bg,
            SourceConfig::Metric {
                root: 0,
                clamp: true,
            },
            vec![90],
            vec![0],
        ),
    ];
    for cfg in &configs {
        let rows = run_experiment(cfg).unwrap();
        assert_eq!(rows.len(), cfg.laxities.len() * cfg.seeds.len());
        for row in &rows {
            assert!((0.0..=1.0).contains(&row.ratio), "{row:?}");
            assert!(row.bound < 1.0);
            assert!(row.replay_ok);
            assert!(row.opt >= row.alg);
            assert_eq!(row.dropped, row.packets - row.alg);
            if row.opt_oracle.is_none() {
                assert!(!row.notes.is_empty(), "fallback must be noted: {row:?}");
            }
        }
        assert_eq!(run_experiment(cfg).unwrap(), rows);
        for format in [ReportFormat::Csv, ReportFormat::Json] {
            assert_eq!(
                parse_report(&emit_report(&rows, format).unwrap(), format).unwrap(),
                rows
            );
        }
    }
}

/// `(1 - ratio) sqrt(L / w)` stays within fixed positive limits as `L` grows.
#[test]
fn star_loss_scales_with_root_delta() {
    for weights in [vec![0, 4], vec![0, 2, 2]] {
        for policy in [PolicyKind::Edf, PolicyKind::TspEdf] {
            let w: i64 = weights.iter().sum();
            let laxities: Vec<u64> = (3..=12).map(|k| w as u64 * k * k).collect();
            let cfg = config(
                MetricSource::Star {
                    weights: weights.clone(),
                    root: 0,
                },
                policy,
                SourceConfig::Star { clamp: false },
                laxities,
                vec![0],
            );
            let scaled: Vec<f64> = run_experiment(&cfg)
                .unwrap()
                .iter()
                .map(|r| (1.0 - r.ratio) * (r.effective_laxity as f64 / w as f64).sqrt())
                .collect();
            let lo = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = scaled.iter().cloned().fold(0.0, f64::max);
            assert!(lo > 0.0 && hi < 3.0, "{weights:?} {policy}: {scaled:?}");
        }
    }
}

#[test]
fn static_file_source_replays_a_trace() {
    let star = StarMetric::from_integers(&[0, 2], 0).unwrap();
    let g = star.to_transition_graph();
    let mut adv = StarAdversary::new(&star, 50, false).unwrap();
    let mut p = PolicyKind::Edf.build(&g, 50, 150).unwrap();
    let (run, trace) = run_adversary(&mut adv, &mut p).unwrap();

    let dir = std::env::temp_dir().join(format!("schedlab-harness-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("trace.json");
    std::fs::write(&path, trace.to_json()).unwrap();
    let cfg = config(
        MetricSource::Star {
            weights: vec![0, 2],
            root: 0,
        },
        PolicyKind::Edf,
        SourceConfig::StaticFile { path },
        vec![50],
        vec![0],
    );
    let rows = run_experiment(&cfg).unwrap();
    assert_eq!(rows[0].alg, run.schedule.throughput());
    assert_eq!(rows[0].opt_source, "opt_prime");
    assert_eq!(rows[0].case, trace.case.map(u8::from));
    assert!(rows[0].replay_ok);
}
