//! Randomized invariants of the state algebra, the model fits, and the
//! simulator.

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use tomosel::likelihood::{
    block_max_loglik, multinomial_loglik, BlockData, ExperimentRecord, RecordMetadata,
};
use tomosel::models::{
    akaike_weights, fit_model, rank_models, model_averaged_prediction, ModelSpec, Observable,
    Scoring,
};
use tomosel::qstate::{
    bloch_to_density, born_probabilities, project_positive_eigenspace, BlochVector,
    DensityMatrix, MeasurementSetting, Outcome, PauliAxis, Sign,
};
use tomosel::qubit_analytic::{delta_aic_exact, radial_surface_state, QubitSummary};
use tomosel::simulator::{run_experiment, BlockOrdering, Schedule, SourceConfig};

fn qubit_block(axis: PauliAxis, plus: u64, minus: u64, idx: usize) -> BlockData {
    let mut counts = BTreeMap::new();
    counts.insert(Outcome::Single(Sign::Plus), plus);
    counts.insert(Outcome::Single(Sign::Minus), minus);
    BlockData::new(MeasurementSetting::Single(axis), counts, idx).unwrap()
}

fn pair_block(axes: (PauliAxis, PauliAxis), cells: [u64; 4], idx: usize) -> BlockData {
    let mut counts = BTreeMap::new();
    let signs = [Sign::Plus, Sign::Minus];
    let mut cell = cells.iter();
    for a in signs {
        for b in signs {
            counts.insert(Outcome::Pair(a, b), *cell.next().unwrap());
        }
    }
    BlockData::new(MeasurementSetting::Pair(axes.0, axes.1), counts, idx).unwrap()
}

fn six_block_record(counts: [[u64; 2]; 6]) -> ExperimentRecord {
    let axes = [
        PauliAxis::X,
        PauliAxis::Y,
        PauliAxis::Z,
        PauliAxis::X,
        PauliAxis::Y,
        PauliAxis::Z,
    ];
    let blocks = axes
        .into_iter()
        .zip(counts)
        .enumerate()
        .map(|(i, (axis, [p, m]))| qubit_block(axis, p, m, i))
        .collect();
    ExperimentRecord::new(1, blocks, RecordMetadata::default()).unwrap()
}

fn block_counts() -> impl Strategy<Value = [u64; 2]> {
    (0u64..300, 0u64..300)
        .prop_filter("block needs at least one shot", |(p, m)| p + m > 0)
        .prop_map(|(p, m)| [p, m])
}

fn ball_vector() -> impl Strategy<Value = [f64; 3]> {
    [-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64]
        .prop_filter("inside the Bloch ball", |v| {
            (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt() <= 0.999
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn bloch_vectors_survive_the_density_round_trip(v in ball_vector()) {
        let rho = DensityMatrix::new(
            bloch_to_density(&BlochVector::new(v[0], v[1], v[2])).matrix().clone(),
        ).unwrap();
        let back = rho.bloch_vector().unwrap();
        prop_assert!((back.x - v[0]).abs() < 1e-12);
        prop_assert!((back.y - v[1]).abs() < 1e-12);
        prop_assert!((back.z - v[2]).abs() < 1e-12);
    }

    #[test]
    fn positive_projection_is_physical_and_idempotent(
        v in [-1.6..1.6f64, -1.6..1.6f64, -1.6..1.6f64],
    ) {
        let raw = bloch_to_density(&BlochVector::new(v[0], v[1], v[2]));
        let projected = match project_positive_eigenspace(&raw) {
            Ok(state) => state,
            // All-nonpositive spectra have no physical part to keep.
            Err(_) => return Ok(()),
        };
        let eigs = projected.eigenvalues();
        prop_assert!(eigs.iter().all(|&e| e >= -1e-12));
        prop_assert!((eigs.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        let again = project_positive_eigenspace(
            &tomosel::qstate::LinearInversionMatrix::new(projected.matrix().clone()).unwrap(),
        ).unwrap();
        prop_assert!(projected.trace_distance(&again) < 1e-10);
    }

    #[test]
    fn born_rule_gives_a_distribution(v in ball_vector()) {
        let rho = DensityMatrix::new(
            bloch_to_density(&BlochVector::new(v[0], v[1], v[2])).matrix().clone(),
        ).unwrap();
        for axis in PauliAxis::ALL {
            let probs = born_probabilities(&rho, &MeasurementSetting::Single(axis)).unwrap();
            let total: f64 = probs.values().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(probs.values().all(|&p| (-1e-15..=1.0 + 1e-12).contains(&p)));
        }
    }

    #[test]
    fn akaike_weights_ignore_a_common_shift(
        omegas in prop::collection::vec(-50.0..50.0f64, 2..6),
        shift in -100.0..100.0f64,
    ) {
        let plain = akaike_weights(&omegas);
        let shifted: Vec<f64> = omegas.iter().map(|o| o + shift).collect();
        let moved = akaike_weights(&shifted);
        prop_assert!((plain.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (a, b) in plain.iter().zip(&moved) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn pair_averages_reconstruct_the_cell_frequencies(
        cells in prop::array::uniform4(0u64..400),
    ) {
        prop_assume!(cells.iter().sum::<u64>() > 0);
        let block = pair_block((PauliAxis::Y, PauliAxis::Z), cells, 0);
        let avg = tomosel::twoqubit::per_setting_averages::<f64>(&block).unwrap();
        let total = block.total() as f64;
        for (outcome, &count) in block.counts() {
            let Outcome::Pair(a, b) = outcome else { unreachable!() };
            let (sa, sb) = (a.value::<f64>(), b.value::<f64>());
            let rebuilt = 0.25
                * (1.0 + sa * avg.marginal_a + sb * avg.marginal_b
                    + sa * sb * avg.correlator);
            prop_assert!((rebuilt - count as f64 / total).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_analytic_delta_matches_assembled_likelihoods(
        shots in 10u64..2000,
        fractions in prop::array::uniform3(0.78..0.975f64),
        signs in prop::array::uniform3(prop::bool::ANY),
    ) {
        let n = shots as f64;
        let mut counts = [0u64; 3];
        let mut averages = [0f64; 3];
        for i in 0..3 {
            counts[i] = (n * fractions[i]).round() as u64;
            let mut m = (2 * counts[i]) as f64 / n - 1.0;
            if signs[i] {
                m = -m;
                counts[i] = shots - counts[i];
            }
            averages[i] = m;
        }
        let radius = averages.iter().map(|m| m * m).sum::<f64>().sqrt();
        prop_assume!(radius > 1.0 && radius < 1.8);
        prop_assume!(averages.iter().all(|m| m.abs() <= 0.95));

        let summary =
            QubitSummary::new(averages[0], averages[1], averages[2], shots).unwrap();
        let delta = delta_aic_exact(&summary).unwrap();

        let surface = radial_surface_state(&summary).unwrap();
        let mut lnl_standard = 0.0;
        let mut lnl_alternative = 0.0;
        for (i, axis) in PauliAxis::ALL.into_iter().enumerate() {
            let block = qubit_block(axis, counts[i], shots - counts[i], i);
            let probs =
                born_probabilities(&surface, &MeasurementSetting::Single(axis)).unwrap();
            lnl_standard += multinomial_loglik(block.counts(), &probs).unwrap();
            lnl_alternative += block_max_loglik::<f64>(&block);
        }
        prop_assert!(
            (delta - (1.0 + lnl_standard - lnl_alternative)).abs() <= 1e-9,
            "delta {} vs assembled {}",
            delta,
            1.0 + lnl_standard - lnl_alternative,
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn coarser_groupings_never_fit_better(counts in prop::array::uniform6(block_counts())) {
        let record = six_block_record(counts);
        let mut shared = BTreeSet::new();
        shared.insert(Observable::Axis(PauliAxis::Z));
        let standard = fit_model::<f64>(&ModelSpec::standard(6), &record, Scoring::Aic).unwrap();
        let halves = fit_model::<f64>(
            &ModelSpec::masked("halves", vec![0, 0, 0, 1, 1, 1], shared),
            &record,
            Scoring::Aic,
        ).unwrap();
        let per_block =
            fit_model::<f64>(&ModelSpec::per_block(6), &record, Scoring::Aic).unwrap();

        prop_assert!(standard.ln_likelihood <= halves.ln_likelihood + 1e-7);
        prop_assert!(halves.ln_likelihood <= per_block.ln_likelihood + 1e-7);

        let bound: f64 = record.blocks().iter().map(block_max_loglik::<f64>).sum();
        prop_assert!((per_block.ln_likelihood - bound).abs() < 1e-9);
        prop_assert!(standard.ln_likelihood <= bound + 1e-9);
    }

    #[test]
    fn reports_rank_deterministically_and_mix_predictions(
        counts in prop::array::uniform6(block_counts()),
    ) {
        let record = six_block_record(counts);
        let fitted = vec![
            fit_model::<f64>(&ModelSpec::standard(6), &record, Scoring::Aic).unwrap(),
            fit_model::<f64>(&ModelSpec::per_block(6), &record, Scoring::Aic).unwrap(),
        ];
        let report = rank_models(fitted).unwrap();
        prop_assert_eq!(report.ranked[0].delta, 0.0);
        for pair in report.ranked.windows(2) {
            prop_assert!(pair[0].fitted.omega >= pair[1].fitted.omega);
            prop_assert!(pair[1].delta <= 0.0);
        }
        let weight_sum: f64 = report.ranked.iter().map(|r| r.weight).sum();
        prop_assert!((weight_sum - 1.0).abs() < 1e-12);

        let mixed = model_averaged_prediction(
            &report,
            &MeasurementSetting::Single(PauliAxis::X),
        ).unwrap();
        let total: f64 = mixed.values().sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        prop_assert!(mixed.values().all(|&p| (-1e-12..=1.0 + 1e-12).contains(&p)));
    }

    #[test]
    fn simulated_records_are_deterministic_and_complete(
        p in 0.0..1.0f64,
        phi0 in -3.0..3.0f64,
        sigma in 0.0..0.3f64,
        seed in any::<u64>(),
        shots in 1u64..40,
        randomized in prop::bool::ANY,
    ) {
        let ordering = if randomized {
            BlockOrdering::Randomized
        } else {
            BlockOrdering::Blocked
        };
        let cfg = SourceConfig::new(p, phi0, sigma, seed).unwrap();
        let schedule = Schedule::xyz_passes(2, shots, ordering);
        let first = run_experiment(&cfg, &schedule).unwrap();
        let second = run_experiment(&cfg, &schedule).unwrap();
        prop_assert_eq!(first.blocks(), second.blocks());
        for block in first.blocks() {
            prop_assert_eq!(block.total(), shots);
        }
        prop_assert_eq!(first.total_shots(), schedule.total_shots());
    }
}
