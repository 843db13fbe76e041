//! Measurement records and multinomial log-likelihoods.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::qstate::{MeasurementSetting, Outcome, PauliAxis};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum LikelihoodError {
    #[error("block {order_index} contains no counts")]
    EmptyBlock { order_index: usize },
    #[error("outcome {label:?} does not belong to setting {setting}")]
    OutcomeMismatch { label: String, setting: String },
    #[error("block {order_index} measures {got} qubits, record declares {expected}")]
    QubitCountMismatch {
        order_index: usize,
        expected: usize,
        got: usize,
    },
    #[error("record must have exactly one block per order index 0..{expected}")]
    NonContiguousOrder { expected: usize },
    #[error("record has {got} qubits, expected {expected}")]
    WrongQubitNumber { expected: u8, got: u8 },
    #[error("observed outcome {outcome} has probability zero under the model")]
    ImpossibleOutcome { outcome: String },
    #[error("record contains no blocks")]
    EmptyRecord,
}

/// Counts observed in one contiguous run of shots with a fixed setting.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockData {
    setting: MeasurementSetting,
    counts: BTreeMap<Outcome, u64>,
    order_index: usize,
}

impl BlockData {
    /// Validates the labels against the setting, fills missing outcomes
    /// with zero, and rejects empty blocks.
    pub fn new(
        setting: MeasurementSetting,
        counts: BTreeMap<Outcome, u64>,
        order_index: usize,
    ) -> Result<Self, LikelihoodError> {
        let allowed = setting.outcomes();
        for outcome in counts.keys() {
            if !allowed.contains(outcome) {
                return Err(LikelihoodError::OutcomeMismatch {
                    label: outcome.to_string(),
                    setting: setting.to_string(),
                });
            }
        }
        let mut full = BTreeMap::new();
        for outcome in allowed {
            full.insert(outcome, counts.get(&outcome).copied().unwrap_or(0));
        }
        if full.values().sum::<u64>() == 0 {
            return Err(LikelihoodError::EmptyBlock { order_index });
        }
        Ok(Self {
            setting,
            counts: full,
            order_index,
        })
    }

    pub fn setting(&self) -> MeasurementSetting {
        self.setting
    }

    pub fn counts(&self) -> &BTreeMap<Outcome, u64> {
        &self.counts
    }

    pub fn count(&self, outcome: Outcome) -> u64 {
        self.counts.get(&outcome).copied().unwrap_or(0)
    }

    pub fn order_index(&self) -> usize {
        self.order_index
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }
}

/// Free-form provenance carried alongside the counts.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RecordMetadata {
    pub seed: Option<u64>,
    pub schedule: Option<String>,
    pub p: Option<f64>,
    pub drift_sigma: Option<f64>,
    pub phi0: Option<f64>,
    pub notes: Option<String>,
}

/// A complete tomography data set: an ordered sequence of count blocks.
#[derive(Clone, Debug)]
pub struct ExperimentRecord {
    n_qubits: u8,
    blocks: Vec<BlockData>,
    metadata: RecordMetadata,
}

impl ExperimentRecord {
    /// Sorts blocks by `order_index` and validates that the indices are
    /// exactly `0..n` and that every setting matches `n_qubits`.
    pub fn new(
        n_qubits: u8,
        mut blocks: Vec<BlockData>,
        metadata: RecordMetadata,
    ) -> Result<Self, LikelihoodError> {
        if blocks.is_empty() {
            return Err(LikelihoodError::EmptyRecord);
        }
        blocks.sort_by_key(|b| b.order_index);
        for (i, block) in blocks.iter().enumerate() {
            if block.order_index != i {
                return Err(LikelihoodError::NonContiguousOrder {
                    expected: blocks.len(),
                });
            }
            if block.setting.n_qubits() != n_qubits as usize {
                return Err(LikelihoodError::QubitCountMismatch {
                    order_index: block.order_index,
                    expected: n_qubits as usize,
                    got: block.setting.n_qubits(),
                });
            }
        }
        Ok(Self {
            n_qubits,
            blocks,
            metadata,
        })
    }

    pub fn n_qubits(&self) -> u8 {
        self.n_qubits
    }

    pub fn blocks(&self) -> &[BlockData] {
        &self.blocks
    }

    pub fn metadata(&self) -> &RecordMetadata {
        &self.metadata
    }

    pub fn total_shots(&self) -> u64 {
        self.blocks.iter().map(BlockData::total).sum()
    }

    /// Distinct settings in order of first appearance.
    pub fn distinct_settings(&self) -> Vec<MeasurementSetting> {
        let mut seen = Vec::new();
        for block in &self.blocks {
            if !seen.contains(&block.setting) {
                seen.push(block.setting);
            }
        }
        seen
    }
}

/// Sample averages of one block, enough to reconstruct its empirical
/// outcome distribution.
#[derive(Clone, Debug, PartialEq)]
pub enum BlockAverages<T> {
    Single {
        axis: PauliAxis,
        mean: T,
    },
    Pair {
        axes: (PauliAxis, PauliAxis),
        correlator: T,
        marginal_a: T,
        marginal_b: T,
    },
}

/// Per-block sample averages for a whole record.
#[derive(Clone, Debug)]
pub struct EmpiricalAverages<T> {
    pub per_block: Vec<BlockAverages<T>>,
}

impl<T: Real> EmpiricalAverages<T> {
    pub fn from_record(record: &ExperimentRecord) -> Result<Self, LikelihoodError> {
        let per_block = record
            .blocks()
            .iter()
            .map(empirical_averages)
            .collect::<Result<_, _>>()?;
        Ok(Self { per_block })
    }
}

/// Sample averages of the measured Pauli observables in one block.
pub fn empirical_averages<T: Real>(block: &BlockData) -> Result<BlockAverages<T>, LikelihoodError> {
    let n = T::from_u64(block.total()).unwrap();
    if block.total() == 0 {
        return Err(LikelihoodError::EmptyBlock {
            order_index: block.order_index(),
        });
    }
    match block.setting() {
        MeasurementSetting::Single(axis) => {
            let mut sum = T::zero();
            for (outcome, &count) in block.counts() {
                if let Outcome::Single(s) = outcome {
                    sum += s.value::<T>() * T::from_u64(count).unwrap();
                }
            }
            Ok(BlockAverages::Single {
                axis,
                mean: sum / n,
            })
        }
        MeasurementSetting::Pair(a, b) => {
            let mut corr = T::zero();
            let mut ma = T::zero();
            let mut mb = T::zero();
            for (outcome, &count) in block.counts() {
                if let Outcome::Pair(sa, sb) = outcome {
                    let c = T::from_u64(count).unwrap();
                    let va = sa.value::<T>();
                    let vb = sb.value::<T>();
                    corr += va * vb * c;
                    ma += va * c;
                    mb += vb * c;
                }
            }
            Ok(BlockAverages::Pair {
                axes: (a, b),
                correlator: corr / n,
                marginal_a: ma / n,
                marginal_b: mb / n,
            })
        }
    }
}

/// Multinomial log-likelihood `sum_o n_o ln p_o` in nats.
///
/// Outcomes with zero counts contribute nothing even at zero probability;
/// a positive count on a zero-probability outcome is an error, never a
/// silent `-inf`.
pub fn multinomial_loglik<T: Real>(
    counts: &BTreeMap<Outcome, u64>,
    probs: &BTreeMap<Outcome, T>,
) -> Result<T, LikelihoodError> {
    let mut total = T::zero();
    for (outcome, &count) in counts {
        if count == 0 {
            continue;
        }
        let p = probs.get(outcome).copied().unwrap_or_else(T::zero);
        if p <= T::zero() {
            return Err(LikelihoodError::ImpossibleOutcome {
                outcome: outcome.to_string(),
            });
        }
        total += T::from_u64(count).unwrap() * p.ln();
    }
    Ok(total)
}

/// Largest log-likelihood any model can reach on one block: the multinomial
/// log-likelihood at the empirical frequencies, `sum_o n_o ln(n_o / N)`.
///
/// For a single-axis block this equals `-N * H(f_plus)` with `H` the
/// Shannon entropy in nats.
pub fn block_max_loglik<T: Real>(block: &BlockData) -> T {
    let n = T::from_u64(block.total()).unwrap();
    let mut total = T::zero();
    for &count in block.counts().values() {
        if count == 0 {
            continue;
        }
        let c = T::from_u64(count).unwrap();
        total += c * (c / n).ln();
    }
    total
}

/// Empirical outcome frequencies of pooled counts.
pub(crate) fn empirical_probs<T: Real>(counts: &BTreeMap<Outcome, u64>) -> BTreeMap<Outcome, T> {
    let n = T::from_u64(counts.values().sum()).unwrap();
    counts
        .iter()
        .map(|(&o, &c)| (o, T::from_u64(c).unwrap() / n))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::Sign;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single_block(n_plus: u64, n_minus: u64, axis: PauliAxis, idx: usize) -> BlockData {
        let mut counts = BTreeMap::new();
        counts.insert(Outcome::Single(Sign::Plus), n_plus);
        counts.insert(Outcome::Single(Sign::Minus), n_minus);
        BlockData::new(MeasurementSetting::Single(axis), counts, idx).unwrap()
    }

    fn probs_pm(p_plus: f64) -> BTreeMap<Outcome, f64> {
        let mut probs = BTreeMap::new();
        probs.insert(Outcome::Single(Sign::Plus), p_plus);
        probs.insert(Outcome::Single(Sign::Minus), 1.0 - p_plus);
        probs
    }

    #[test]
    fn multinomial_loglik_known_value() {
        let block = single_block(60, 40, PauliAxis::Z, 0);
        let ll = multinomial_loglik(block.counts(), &probs_pm(0.6)).unwrap();
        assert_relative_eq!(ll, -67.30116670092565, epsilon = 1e-12);
    }

    #[test]
    fn zero_count_outcomes_contribute_nothing() {
        let block = single_block(100, 0, PauliAxis::X, 0);
        let ll = multinomial_loglik(block.counts(), &probs_pm(1.0)).unwrap();
        assert_eq!(ll, 0.0);
    }

    #[test]
    fn impossible_outcome_is_an_error() {
        let block = single_block(99, 1, PauliAxis::X, 0);
        assert!(matches!(
            multinomial_loglik(block.counts(), &probs_pm(1.0)),
            Err(LikelihoodError::ImpossibleOutcome { .. })
        ));
    }

    #[test]
    fn block_max_loglik_balanced_coin() {
        let block = single_block(250, 250, PauliAxis::Y, 0);
        assert_relative_eq!(
            block_max_loglik::<f64>(&block),
            -346.5735902799727,
            epsilon = 1e-12
        );
    }

    #[test]
    fn block_max_matches_multinomial_at_empirical_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for i in 0..200 {
            let n_plus = rng.random_range(0..=500u64);
            let n_minus = 500 - n_plus;
            if n_plus == 0 && n_minus == 0 {
                continue;
            }
            let block = single_block(n_plus, n_minus, PauliAxis::Z, i);
            let via_probs =
                multinomial_loglik(block.counts(), &empirical_probs::<f64>(block.counts()))
                    .unwrap();
            let direct = block_max_loglik::<f64>(&block);
            assert!((via_probs - direct).abs() <= 1e-12 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn block_max_equals_entropy_formula() {
        let block = single_block(300, 200, PauliAxis::X, 0);
        let f = 0.6f64;
        let entropy = -(f * f.ln() + (1.0 - f) * (1.0 - f).ln());
        assert_relative_eq!(block_max_loglik::<f64>(&block), -500.0 * entropy, epsilon = 1e-10);
    }

    #[test]
    fn block_max_dominates_other_models() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for i in 0..100 {
            let n_plus = rng.random_range(1..500u64);
            let block = single_block(n_plus, 500 - n_plus, PauliAxis::X, i);
            let best = block_max_loglik::<f64>(&block);
            let p: f64 = rng.random_range(0.001..0.999);
            let other = multinomial_loglik(block.counts(), &probs_pm(p)).unwrap();
            assert!(other <= best + 1e-12);
        }
    }

    #[test]
    fn empirical_averages_single() {
        let block = single_block(60, 40, PauliAxis::X, 0);
        match empirical_averages::<f64>(&block).unwrap() {
            BlockAverages::Single { axis, mean } => {
                assert_eq!(axis, PauliAxis::X);
                assert_relative_eq!(mean, 0.2, epsilon = 1e-14);
            }
            _ => panic!("expected single"),
        }
    }

    #[test]
    fn empirical_averages_pair() {
        let mut counts = BTreeMap::new();
        counts.insert("++".parse::<Outcome>().unwrap(), 40u64);
        counts.insert("+\u{2212}".parse::<Outcome>().unwrap(), 10);
        counts.insert("\u{2212}+".parse::<Outcome>().unwrap(), 20);
        counts.insert("\u{2212}\u{2212}".parse::<Outcome>().unwrap(), 30);
        let block = BlockData::new("XY".parse().unwrap(), counts, 0).unwrap();
        match empirical_averages::<f64>(&block).unwrap() {
            BlockAverages::Pair {
                axes,
                correlator,
                marginal_a,
                marginal_b,
            } => {
                assert_eq!(axes, (PauliAxis::X, PauliAxis::Y));
                // (40 - 10 - 20 + 30) / 100
                assert_relative_eq!(correlator, 0.4, epsilon = 1e-14);
                // (40 + 10 - 20 - 30) / 100
                assert_relative_eq!(marginal_a, 0.0, epsilon = 1e-14);
                // (40 - 10 + 20 - 30) / 100
                assert_relative_eq!(marginal_b, 0.2, epsilon = 1e-14);
            }
            _ => panic!("expected pair"),
        }
    }

    #[test]
    fn block_data_validates_labels() {
        let mut counts = BTreeMap::new();
        counts.insert("++".parse::<Outcome>().unwrap(), 5u64);
        let err = BlockData::new("X".parse().unwrap(), counts, 0);
        assert!(matches!(err, Err(LikelihoodError::OutcomeMismatch { .. })));

        let empty: BTreeMap<Outcome, u64> = BTreeMap::new();
        assert!(matches!(
            BlockData::new("X".parse().unwrap(), empty, 3),
            Err(LikelihoodError::EmptyBlock { order_index: 3 })
        ));
    }

    #[test]
    fn block_data_fills_missing_outcomes_with_zero() {
        let mut counts = BTreeMap::new();
        counts.insert(Outcome::Single(Sign::Plus), 7u64);
        let block = BlockData::new("Z".parse().unwrap(), counts, 0).unwrap();
        assert_eq!(block.count(Outcome::Single(Sign::Minus)), 0);
        assert_eq!(block.counts().len(), 2);
    }

    #[test]
    fn record_validates_order_and_qubit_count() {
        let blocks = vec![
            single_block(10, 10, PauliAxis::X, 0),
            single_block(10, 10, PauliAxis::Y, 2),
        ];
        assert!(matches!(
            ExperimentRecord::new(1, blocks, RecordMetadata::default()),
            Err(LikelihoodError::NonContiguousOrder { .. })
        ));

        let blocks = vec![single_block(10, 10, PauliAxis::X, 0)];
        assert!(matches!(
            ExperimentRecord::new(2, blocks, RecordMetadata::default()),
            Err(LikelihoodError::QubitCountMismatch { .. })
        ));

        assert!(matches!(
            ExperimentRecord::new(1, Vec::new(), RecordMetadata::default()),
            Err(LikelihoodError::EmptyRecord)
        ));
    }

    #[test]
    fn record_sorts_blocks_by_order_index() {
        let blocks = vec![
            single_block(1, 2, PauliAxis::Y, 1),
            single_block(3, 4, PauliAxis::X, 0),
        ];
        let record = ExperimentRecord::new(1, blocks, RecordMetadata::default()).unwrap();
        assert_eq!(record.blocks()[0].setting().to_string(), "X");
        assert_eq!(record.total_shots(), 10);
        assert_eq!(record.distinct_settings().len(), 2);
    }
}
