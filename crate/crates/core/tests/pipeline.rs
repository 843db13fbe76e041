//! End-to-end flows: simulate counts, fit the competing models, rank
//! them, and check the verdict lands where the source physics says it
//! should.

use std::collections::BTreeSet;

use approx::assert_relative_eq;
use tomosel::likelihood::block_max_loglik;
use tomosel::models::{
    fit_model, rank_models, ModelSpec, Observable, Scoring, Verdict,
};
use tomosel::qstate::PauliAxis;
use tomosel::qubit_analytic::{standard_mle_qubit, QubitSummary};
use tomosel::simulator::{run_experiment, BlockOrdering, Schedule, SourceConfig};
use tomosel::twoqubit::{
    build_alternative_models, inconsistency_scan, joint_mle, multiplicity_table,
    JointMleOptions,
};

fn drift_specs() -> Vec<ModelSpec> {
    let mut shared = BTreeSet::new();
    shared.insert(Observable::Axis(PauliAxis::Z));
    vec![
        ModelSpec::standard(6),
        ModelSpec::masked("halves", vec![0, 0, 0, 1, 1, 1], shared),
        ModelSpec::per_block(6),
    ]
}

#[test]
fn frozen_source_passes_the_consistency_check() {
    let cfg = SourceConfig::new(0.9, 0.4, 0.0, 60601).unwrap();
    let schedule = Schedule::xyz_passes(2, 500, BlockOrdering::Blocked);
    let record = run_experiment(&cfg, &schedule).unwrap();
    let fitted = drift_specs()
        .iter()
        .map(|spec| fit_model::<f64>(spec, &record, Scoring::Aic).unwrap())
        .collect();
    let report = rank_models(fitted).unwrap();
    assert_eq!(report.verdict, Verdict::Consistent);
    assert_eq!(report.standard().fitted.spec.label, "standard");
}

#[test]
fn strong_drift_flips_the_verdict() {
    // Slow enough to stay coherent within one 500-shot block, fast
    // enough to decohere across the six: the regime the grouping sees.
    let cfg = SourceConfig::new(0.9, 0.0, 0.08, 60602).unwrap();
    let schedule = Schedule::xyz_passes(2, 500, BlockOrdering::Blocked);
    let record = run_experiment(&cfg, &schedule).unwrap();
    let fitted = drift_specs()
        .iter()
        .map(|spec| fit_model::<f64>(spec, &record, Scoring::Aic).unwrap())
        .collect();
    let report = rank_models(fitted).unwrap();
    assert_eq!(report.verdict, Verdict::Inconsistent);
    assert!(report.best().fitted.spec.label != "standard");
    assert!(report.standard().weight < 0.05);
}

#[test]
fn randomizing_the_schedule_hides_slow_drift_from_the_grouping() {
    // The same drifting source, measured with per-shot randomized
    // settings: every block now sees the whole trajectory, so the pooled
    // averages agree across blocks and the standard model survives.
    let cfg = SourceConfig::new(0.9, 0.0, 0.1, 60603).unwrap();
    let blocked = Schedule::xyz_passes(2, 500, BlockOrdering::Blocked);
    let shuffled = Schedule::xyz_passes(2, 500, BlockOrdering::Randomized);

    let grouped_report = |schedule: &Schedule| {
        let record = run_experiment(&cfg, schedule).unwrap();
        let fitted = drift_specs()
            .iter()
            .map(|spec| fit_model::<f64>(spec, &record, Scoring::Aic).unwrap())
            .collect();
        rank_models(fitted).unwrap()
    };

    assert_eq!(grouped_report(&blocked).verdict, Verdict::Inconsistent);
    assert_eq!(grouped_report(&shuffled).verdict, Verdict::Consistent);
}

#[test]
fn closed_forms_match_the_generic_fit_on_a_feasible_record() {
    let cfg = SourceConfig::new(0.7, 1.1, 0.0, 60604).unwrap();
    let schedule = Schedule::xyz_passes(1, 600, BlockOrdering::Blocked);
    let record = run_experiment(&cfg, &schedule).unwrap();

    let standard =
        fit_model::<f64>(&ModelSpec::standard(3), &record, Scoring::Aic).unwrap();
    let per_block =
        fit_model::<f64>(&ModelSpec::per_block(3), &record, Scoring::Aic).unwrap();

    let summary = QubitSummary::<f64>::from_record(&record).unwrap();
    assert!(summary.radius() < 1.0);
    let analytic = standard_mle_qubit(&summary);
    let alt_lnl: f64 = record.blocks().iter().map(block_max_loglik::<f64>).sum();

    assert_relative_eq!(
        standard.omega,
        analytic.ln_likelihood - analytic.param_count as f64,
        epsilon = 1e-8,
    );
    assert_relative_eq!(per_block.omega, alt_lnl - 3.0, epsilon = 1e-8);
}

#[test]
fn pair_pipeline_stays_consistent_for_a_steady_product_source() {
    let cfg = SourceConfig::new(0.8, 0.9, 0.0, 60605).unwrap();
    let schedule = Schedule::nine_settings(500, BlockOrdering::Blocked);
    let record = run_experiment(&cfg, &schedule).unwrap();

    let table = multiplicity_table::<f64>(&record).unwrap();
    assert_eq!(table.total_estimates(), 27);
    let scan = inconsistency_scan(&table);
    let specs = build_alternative_models(&record, &scan, 4.0).unwrap();
    let fitted = specs
        .iter()
        .map(|spec| fit_model::<f64>(spec, &record, Scoring::Aic).unwrap())
        .collect();
    let report = rank_models(fitted).unwrap();
    assert_eq!(report.verdict, Verdict::Consistent);
}

#[test]
fn pair_pipeline_flags_a_drifting_product_source() {
    let cfg = SourceConfig::new(0.8, 0.0, 0.2, 60606).unwrap();
    let schedule = Schedule::nine_settings(500, BlockOrdering::Blocked);
    let record = run_experiment(&cfg, &schedule).unwrap();

    let table = multiplicity_table::<f64>(&record).unwrap();
    let scan = inconsistency_scan(&table);
    let specs = build_alternative_models(&record, &scan, 4.0).unwrap();
    let fitted: Vec<_> = specs
        .iter()
        .map(|spec| fit_model::<f64>(spec, &record, Scoring::Aic).unwrap())
        .collect();
    let joint = joint_mle::<f64>(&record, &JointMleOptions::default()).unwrap();
    assert!(joint.converged);
    let report = rank_models(fitted).unwrap();
    assert_eq!(report.verdict, Verdict::Inconsistent);
}

#[test]
fn the_pipeline_runs_in_single_precision() {
    let cfg = SourceConfig::<f32>::new(0.9, 0.0, 0.0, 60607).unwrap();
    let schedule = Schedule::xyz_passes(2, 500, BlockOrdering::Blocked);
    let record = run_experiment(&cfg, &schedule).unwrap();
    let fitted: Vec<tomosel::FittedModel32> = drift_specs()
        .iter()
        .map(|spec| fit_model::<f32>(spec, &record, Scoring::Aic).unwrap())
        .collect();
    assert!(fitted.iter().all(|f| f.omega.is_finite()));
    let report: tomosel::AicReport32 = rank_models(fitted).unwrap();
    assert_eq!(report.ranked.len(), 3);
    let weight_sum: f32 = report.ranked.iter().map(|r| r.weight).sum();
    assert!((weight_sum - 1.0).abs() < 1e-5);
}
