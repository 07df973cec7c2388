use std::collections::BTreeMap;

use sfplan::config::{ExperimentConfig, Method};
use sfplan::harness::*;
use sfplan::plot::{parse_summary, render_plots};

fn small(env: &str, methods: Vec<Method>) -> ExperimentConfig {
    ExperimentConfig {
        env: env.into(),
        methods,
        seeds: vec![0, 1],
        budget: 1000,
        steps: Some(4000),
        episodes: 3,
        cadence: 1000,
        ..ExperimentConfig::default()
    }
}

#[test]
fn identical_configs_give_identical_files() {
    let cfg = small("office", vec![Method::SfFsaVi, Method::Lof, Method::Flat]);
    let a = run_learning_experiment(&cfg).unwrap();
    let b = run_learning_experiment(&cfg).unwrap();
    assert_eq!(records_csv(&a.records).unwrap(), records_csv(&b.records).unwrap());
    assert_eq!(summary_csv(&a.summary).unwrap(), summary_csv(&b.summary).unwrap());
    assert_eq!(a.log, b.log);
}

#[test]
fn summary_is_recomputable_from_raw_rows() {
    let cfg = small("delivery", vec![Method::SfFsaVi, Method::Lof]);
    let out = run_learning_experiment(&cfg).unwrap();
    let text = records_csv(&out.records).unwrap();
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut groups: BTreeMap<(String, u64), Vec<f64>> = BTreeMap::new();
    for row in reader.records() {
        let row = row.unwrap();
        groups.entry((row[3].to_string(), row[6].parse().unwrap())).or_default().push(row[7].parse().unwrap());
    }
    let summary = parse_summary(&summary_csv(&out.summary).unwrap()).unwrap();
    assert_eq!(summary.len(), groups.len());
    for s in &summary {
        let v = &groups[&(s.method.clone(), s.x)];
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
        assert_eq!(s.n, v.len());
        assert!((s.mean - mean).abs() < 1e-9 && (s.std - std).abs() < 1e-9);
    }
}

#[test]
fn early_sf_points_are_horizon_capped() {
    let cfg = ExperimentConfig { budget: 3000, ..small("office", vec![Method::SfFsaVi]) };
    let out = run_learning_experiment(&cfg).unwrap();
    let first = out.records.iter().filter(|r| r.x == 1000).collect::<Vec<_>>();
    assert!(!first.is_empty());
    assert!(first.iter().all(|r| r.metric == -(cfg.horizon as f64)));
    assert!(out.log.iter().all(|l| l.contains("|CCS|")));
}

#[test]
fn flat_learning_curve_improves_to_the_optimum() {
    let cfg = ExperimentConfig {
        tasks: vec!["sequential".into()],
        seeds: vec![0],
        steps: Some(300_000),
        cadence: 50_000,
        episodes: 1,
        ..small("office", vec![Method::Flat])
    };
    let out = run_learning_experiment(&cfg).unwrap();
    let metrics: Vec<f64> = out.records.iter().map(|r| r.metric).collect();
    assert!(metrics.last().unwrap() >= metrics.first().unwrap());
    // Optimal return from planning over the exact basis.
    let plan = run_planning_experiment(&ExperimentConfig { methods: vec![Method::SfFsaVi], ..cfg.clone() }).unwrap();
    assert_eq!(metrics.last(), plan.records.last().map(|r| &r.metric));
}

#[test]
fn planning_ops_follow_the_closed_forms() {
    for (env, states, exits) in [("office", 100u64, 6u64), ("delivery", 225, 4)] {
        let cfg = ExperimentConfig { seeds: vec![0], episodes: 1, ..small(env, vec![Method::SfFsaVi, Method::Lof]) };
        let out = run_planning_experiment(&cfg).unwrap();
        let ccs: u64 = out.log[0].split_whitespace().nth(4).unwrap().parse().unwrap();
        let mut totals: BTreeMap<&str, u64> = BTreeMap::new();
        for task in ["sequential", "disjunction", "composite"] {
            let fsa = sfplan::fixtures::task(env, task).unwrap();
            let nu = fsa.num_nonterminal() as u64;
            for method in ["sf-fsa-vi", "lof"] {
                let rows: Vec<&RunRecord> = out.records.iter().filter(|r| r.task == task && r.method == method).collect();
                let per = if method == "sf-fsa-vi" { nu * exits * ccs } else { nu * states * exits };
                for (k, r) in rows.iter().enumerate() {
                    assert_eq!(r.ops, per * (k as u64 + 1), "{env}/{task}/{method}");
                }
                *totals.entry(method).or_default() += rows.last().unwrap().ops;
            }
        }
        assert!(totals["sf-fsa-vi"] < totals["lof"]);
    }
}

#[test]
fn task_met_by_every_exit_plans_in_two_iterations() {
    let cfg = ExperimentConfig {
        tasks: vec!["disjunction".into()],
        seeds: vec![0],
        episodes: 1,
        min_priority: 1e-2,
        ..small("double_slit", vec![Method::SfFsaVi, Method::Lof])
    };
    let out = run_planning_experiment(&cfg).unwrap();
    for method in ["sf-fsa-vi", "lof"] {
        assert_eq!(out.records.iter().filter(|r| r.method == method).map(|r| r.x).max(), Some(2));
    }
}

#[test]
fn rendered_figure_has_four_panels() {
    let mut rows = Vec::new();
    for env in ["office", "delivery"] {
        let cfg = ExperimentConfig { seeds: vec![0], ..small(env, vec![Method::SfFsaVi, Method::Lof]) };
        rows.push(summary_csv(&run_learning_experiment(&cfg).unwrap().summary).unwrap());
        rows.push(summary_csv(&run_planning_experiment(&cfg).unwrap().summary).unwrap());
    }
    let refs: Vec<&str> = rows.iter().map(String::as_str).collect();
    let svg = render_plots(&refs).unwrap();
    assert_eq!(svg.matches("<g ").count(), 4);
    assert_eq!(render_plots(&refs).unwrap(), svg);
}

#[test]
fn zero_seeds_is_a_config_error() {
    let cfg = ExperimentConfig { seeds: vec![], ..ExperimentConfig::default() };
    assert_eq!(run_learning_experiment(&cfg).unwrap_err().exit_code(), 2);
}
