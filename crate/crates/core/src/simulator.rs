//! Synthetic experiments from a drifting source, plus a Monte Carlo
//! power study over the model-selection pipeline.
//!
//! The source emits a state whose Bloch vector rotates in the XY plane
//! with a phase performing a Gaussian random walk, one step per shot.
//! Two-qubit schedules use a product of two independently drifting
//! sources. Everything is deterministic given the seed: each consumer
//! (walks, outcome draws, shuffling, trials) owns its own stream of one
//! counter-based generator.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use thiserror::Error;

use crate::likelihood::{BlockData, ExperimentRecord, LikelihoodError, RecordMetadata};
use crate::models::{fit_model, rank_models, ModelError, ModelSpec, Scoring, Verdict};
use crate::qstate::{
    bloch_to_density, born_probabilities, BlochVector, DensityMatrix, MeasurementSetting,
    Outcome, QStateError,
};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum SimulatorError {
    #[error("depolarization weight {p} is outside [0, 1]")]
    InvalidPurity { p: f64 },
    #[error("drift step deviation {sigma} is negative")]
    InvalidSigma { sigma: f64 },
    #[error("schedule has no blocks")]
    EmptySchedule,
    #[error("schedule block {index} has zero shots")]
    ZeroShots { index: usize },
    #[error("schedule mixes single-qubit and pair settings")]
    MixedSettings,
    #[error("power study needs at least one trial")]
    NoTrials,
    #[error(transparent)]
    Likelihood(#[from] LikelihoodError),
    #[error(transparent)]
    QState(#[from] QStateError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Drifting-source parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SourceConfig<T> {
    /// Weight of the rotating pure component; `1 - p` is maximally mixed.
    pub p: T,
    /// Initial phase of the XY-plane rotation, radians.
    pub phi0: T,
    /// Standard deviation of the per-shot phase increment, radians.
    pub sigma_step: T,
    pub seed: u64,
}

impl<T: Real> SourceConfig<T> {
    pub fn new(p: T, phi0: T, sigma_step: T, seed: u64) -> Result<Self, SimulatorError> {
        if !(T::zero()..=T::one()).contains(&p) {
            return Err(SimulatorError::InvalidPurity {
                p: p.to_f64().unwrap_or(f64::NAN),
            });
        }
        if sigma_step.is_nan() || sigma_step < T::zero() {
            return Err(SimulatorError::InvalidSigma {
                sigma: sigma_step.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(Self {
            p,
            phi0,
            sigma_step,
            seed,
        })
    }
}

/// Whether shots run block by block or with settings shuffled over the
/// whole experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockOrdering {
    Blocked,
    /// Settings are assigned to time slots by a seeded uniform permutation
    /// while the source keeps drifting in time order.
    Randomized,
}

/// An ordered list of (setting, shots) blocks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schedule {
    blocks: Vec<(MeasurementSetting, u64)>,
    ordering: BlockOrdering,
}

impl Schedule {
    pub fn new(
        blocks: Vec<(MeasurementSetting, u64)>,
        ordering: BlockOrdering,
    ) -> Result<Self, SimulatorError> {
        if blocks.is_empty() {
            return Err(SimulatorError::EmptySchedule);
        }
        for (index, (_, shots)) in blocks.iter().enumerate() {
            if *shots == 0 {
                return Err(SimulatorError::ZeroShots { index });
            }
        }
        let n_qubits = blocks[0].0.n_qubits();
        if blocks.iter().any(|(s, _)| s.n_qubits() != n_qubits) {
            return Err(SimulatorError::MixedSettings);
        }
        Ok(Self { blocks, ordering })
    }

    /// `passes` rounds of X, Y, Z blocks with `shots` each.
    pub fn xyz_passes(passes: usize, shots: u64, ordering: BlockOrdering) -> Self {
        let blocks = (0..passes)
            .flat_map(|_| crate::qstate::PauliAxis::ALL)
            .map(|axis| (MeasurementSetting::Single(axis), shots))
            .collect();
        Self::new(blocks, ordering).expect("passes and shots are nonzero")
    }

    /// The nine pair settings with `shots` each.
    pub fn nine_settings(shots: u64, ordering: BlockOrdering) -> Self {
        let blocks = crate::twoqubit::enumerate_settings()
            .into_iter()
            .map(|s| (s, shots))
            .collect();
        Self::new(blocks, ordering).expect("nine nonzero blocks")
    }

    pub fn blocks(&self) -> &[(MeasurementSetting, u64)] {
        &self.blocks
    }

    pub fn ordering(&self) -> BlockOrdering {
        self.ordering
    }

    pub fn n_qubits(&self) -> usize {
        self.blocks[0].0.n_qubits()
    }

    pub fn total_shots(&self) -> u64 {
        self.blocks.iter().map(|(_, n)| n).sum()
    }
}

/// One phase value per shot.
#[derive(Clone, Debug, PartialEq)]
pub struct DriftTrajectory<T> {
    pub phases: Vec<T>,
}

const STREAM_WALK_A: u64 = 1;
const STREAM_WALK_B: u64 = 2;
const STREAM_OUTCOMES: u64 = 3;
const STREAM_SHUFFLE: u64 = 4;
const STREAM_TRIAL_BASE: u64 = 1000;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// The source state at phase `phi`: Bloch vector `(p cos phi, p sin phi, 0)`.
pub fn source_state<T: Real>(phi: T, p: T) -> Result<DensityMatrix<T>, SimulatorError> {
    if !(p >= T::zero() && p <= T::one()) {
        return Err(SimulatorError::InvalidPurity {
            p: p.to_f64().unwrap_or(f64::NAN),
        });
    }
    let bloch = BlochVector::new(p * phi.cos(), p * phi.sin(), T::zero());
    Ok(DensityMatrix::new(
        bloch_to_density(&bloch).matrix().clone(),
    )?)
}

fn walk_with_stream<T: Real>(
    cfg: &SourceConfig<T>,
    n_shots: u64,
    stream: u64,
) -> DriftTrajectory<T> {
    let mut phases = Vec::with_capacity(n_shots as usize);
    let mut phi = cfg.phi0;
    if cfg.sigma_step > T::zero() {
        let sigma = cfg.sigma_step.to_f64().expect("finite step deviation");
        let normal = Normal::new(0.0, sigma).expect("validated deviation");
        let mut rng = stream_rng(cfg.seed, stream);
        for _ in 0..n_shots {
            phases.push(phi);
            phi += T::of(normal.sample(&mut rng));
        }
    } else {
        phases.resize(n_shots as usize, phi);
    }
    DriftTrajectory { phases }
}

/// The phase random walk of the (first) source qubit: `phi_0 = phi0`,
/// i.i.d. Gaussian increments with deviation `sigma_step`.
pub fn drift_walk<T: Real>(cfg: &SourceConfig<T>, n_shots: u64) -> DriftTrajectory<T> {
    walk_with_stream(cfg, n_shots, STREAM_WALK_A)
}

/// Outcome distribution memoized on the phases and setting it came from.
type CachedOutcomes<T> = (T, Option<T>, MeasurementSetting, Vec<(Outcome, T)>);

/// Simulates the schedule shot by shot against the drifting source and
/// aggregates counts per block.
pub fn run_experiment<T: Real>(
    cfg: &SourceConfig<T>,
    schedule: &Schedule,
) -> Result<ExperimentRecord, SimulatorError> {
    SourceConfig::new(cfg.p, cfg.phi0, cfg.sigma_step, cfg.seed)?;
    let total = schedule.total_shots();
    let n_qubits = schedule.n_qubits();
    let walk_a = walk_with_stream(cfg, total, STREAM_WALK_A);
    let walk_b = if n_qubits == 2 {
        Some(walk_with_stream(cfg, total, STREAM_WALK_B))
    } else {
        None
    };

    let mut assignment: Vec<usize> = schedule
        .blocks()
        .iter()
        .enumerate()
        .flat_map(|(i, (_, shots))| std::iter::repeat_n(i, *shots as usize))
        .collect();
    if schedule.ordering() == BlockOrdering::Randomized {
        assignment.shuffle(&mut stream_rng(cfg.seed, STREAM_SHUFFLE));
    }

    let mut outcome_rng = stream_rng(cfg.seed, STREAM_OUTCOMES);
    let mut counts: Vec<BTreeMap<Outcome, u64>> =
        vec![BTreeMap::new(); schedule.blocks().len()];
    // Outcome distributions repeat whenever the phases and setting repeat
    // (always, for a frozen source), so cache the last one.
    let mut cached: Option<CachedOutcomes<T>> = None;
    for (k, &block_idx) in assignment.iter().enumerate() {
        let setting = schedule.blocks()[block_idx].0;
        let phi_a = walk_a.phases[k];
        let phi_b = walk_b.as_ref().map(|w| w.phases[k]);
        let fresh = match &cached {
            Some((a, b, s, _)) => !(*a == phi_a && *b == phi_b && *s == setting),
            None => true,
        };
        if fresh {
            let state = match phi_b {
                None => source_state(phi_a, cfg.p)?,
                Some(phi_b) => {
                    let a = source_state(phi_a, cfg.p)?;
                    let b = source_state(phi_b, cfg.p)?;
                    DensityMatrix::new(a.matrix().kron(b.matrix()))?
                }
            };
            let probs = born_probabilities(&state, &setting)?;
            cached = Some((phi_a, phi_b, setting, probs.into_iter().collect()));
        }
        let outcome_probs = &cached.as_ref().unwrap().3;
        let u = T::of(outcome_rng.random::<f64>());
        let mut acc = T::zero();
        let mut chosen = outcome_probs.last().expect("settings have outcomes").0;
        for &(outcome, prob) in outcome_probs {
            acc += prob;
            if u < acc {
                chosen = outcome;
                break;
            }
        }
        *counts[block_idx].entry(chosen).or_insert(0) += 1;
    }

    let blocks = counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| BlockData::new(schedule.blocks()[i].0, c, i))
        .collect::<Result<Vec<_>, _>>()?;
    let metadata = RecordMetadata {
        seed: Some(cfg.seed),
        schedule: Some(
            match schedule.ordering() {
                BlockOrdering::Blocked => "blocked",
                BlockOrdering::Randomized => "randomized",
            }
            .to_string(),
        ),
        p: cfg.p.to_f64(),
        drift_sigma: cfg.sigma_step.to_f64(),
        phi0: cfg.phi0.to_f64(),
        notes: None,
    };
    Ok(ExperimentRecord::new(n_qubits as u8, blocks, metadata)?)
}

/// Detection statistics from repeated simulated experiments.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerEstimate<T> {
    /// Fraction of trials whose verdict was INCONSISTENT.
    pub fraction: T,
    /// Binomial standard error of the fraction.
    pub std_error: T,
    pub detections: u64,
    pub trials: u64,
}

/// Runs `n_trials` independent simulated experiments, fits every model of
/// the set to each, and reports how often the ranking rejects the
/// standard model. Trials draw sub-seeds from the master seed by counter,
/// so the result does not depend on execution order.
pub fn monte_carlo_power<T: Real>(
    cfg: &SourceConfig<T>,
    schedule: &Schedule,
    specs: &[ModelSpec],
    scoring: Scoring,
    n_trials: u64,
) -> Result<PowerEstimate<T>, SimulatorError> {
    if n_trials == 0 {
        return Err(SimulatorError::NoTrials);
    }
    let flags = (0..n_trials)
        .into_par_iter()
        .map(|trial| -> Result<bool, SimulatorError> {
            let mut trial_cfg = *cfg;
            trial_cfg.seed = stream_rng(cfg.seed, STREAM_TRIAL_BASE + trial).random();
            let record = run_experiment(&trial_cfg, schedule)?;
            let fitted = specs
                .iter()
                .map(|spec| fit_model::<T>(spec, &record, scoring))
                .collect::<Result<Vec<_>, _>>()?;
            let report = rank_models(fitted)?;
            Ok(report.verdict == Verdict::Inconsistent)
        })
        .collect::<Result<Vec<bool>, _>>()?;
    let detections = flags.iter().filter(|&&d| d).count() as u64;
    let trials = T::from_u64(n_trials).unwrap();
    let fraction = T::from_u64(detections).unwrap() / trials;
    let std_error = (fraction * (T::one() - fraction) / trials).sqrt();
    Ok(PowerEstimate {
        fraction,
        std_error,
        detections,
        trials: n_trials,
    })
}
