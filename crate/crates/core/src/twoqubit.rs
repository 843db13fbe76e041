//! Two-qubit specifics: the nine-setting measurement layout, redundant
//! estimates of local observables across settings, a z-score scan for
//! disagreement between those estimates, and an iterative joint
//! maximum-likelihood fit.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::likelihood::{multinomial_loglik, BlockData, ExperimentRecord, LikelihoodError};
use crate::linalg::CMatrix;
use crate::models::{determined_by, ModelSpec, Observable};
use crate::qstate::{
    born_probabilities, DensityMatrix, MeasurementSetting, Outcome, PauliAxis, QStateError,
};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum TwoQubitError {
    #[error("record has {got} qubits, expected 2")]
    WrongQubitNumber { got: u8 },
    #[error("record is missing setting {missing}")]
    MissingSetting { missing: String },
    #[error(transparent)]
    Likelihood(#[from] LikelihoodError),
    #[error(transparent)]
    QState(#[from] QStateError),
}

/// The nine axis-pair settings in row-major order, `XX` through `ZZ`.
pub fn enumerate_settings() -> Vec<MeasurementSetting> {
    let mut settings = Vec::with_capacity(9);
    for a in PauliAxis::ALL {
        for b in PauliAxis::ALL {
            settings.push(MeasurementSetting::Pair(a, b));
        }
    }
    settings
}

/// Empirical averages a single pair-setting block determines.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SettingAverages<T> {
    pub correlator: T,
    pub marginal_a: T,
    pub marginal_b: T,
}

/// Correlator and marginal averages from one block's counts.
pub fn per_setting_averages<T: Real>(block: &BlockData) -> Result<SettingAverages<T>, TwoQubitError> {
    if block.setting().n_qubits() != 2 {
        return Err(TwoQubitError::WrongQubitNumber {
            got: block.setting().n_qubits() as u8,
        });
    }
    let n = T::from_u64(block.total()).unwrap();
    let mut correlator = T::zero();
    let mut marginal_a = T::zero();
    let mut marginal_b = T::zero();
    for (&outcome, &count) in block.counts() {
        let (s1, s2) = match outcome {
            Outcome::Pair(s1, s2) => (s1.value::<T>(), s2.value::<T>()),
            Outcome::Single(_) => unreachable!("pair setting has pair outcomes"),
        };
        let f = T::from_u64(count).unwrap() / n;
        correlator += s1 * s2 * f;
        marginal_a += s1 * f;
        marginal_b += s2 * f;
    }
    Ok(SettingAverages {
        correlator,
        marginal_a,
        marginal_b,
    })
}

/// Per-setting averages pooled over all blocks of a record.
#[derive(Clone, Debug)]
pub struct TwoQubitAverages<T> {
    per_setting: BTreeMap<MeasurementSetting, (SettingAverages<T>, u64)>,
}

impl<T: Real> TwoQubitAverages<T> {
    /// Pools counts per setting across blocks. Every distinct setting in
    /// the record appears once.
    pub fn from_record(record: &ExperimentRecord) -> Result<Self, TwoQubitError> {
        if record.n_qubits() != 2 {
            return Err(TwoQubitError::WrongQubitNumber {
                got: record.n_qubits(),
            });
        }
        let mut pooled: BTreeMap<MeasurementSetting, BTreeMap<Outcome, u64>> = BTreeMap::new();
        for block in record.blocks() {
            let entry = pooled.entry(block.setting()).or_default();
            for (&o, &c) in block.counts() {
                *entry.entry(o).or_insert(0) += c;
            }
        }
        let mut per_setting = BTreeMap::new();
        for (setting, counts) in pooled {
            let block = BlockData::new(setting, counts, 0)?;
            let averages = per_setting_averages(&block)?;
            per_setting.insert(setting, (averages, block.total()));
        }
        Ok(Self { per_setting })
    }

    pub fn get(&self, setting: MeasurementSetting) -> Option<&(SettingAverages<T>, u64)> {
        self.per_setting.get(&setting)
    }

    pub fn settings(&self) -> impl Iterator<Item = MeasurementSetting> + '_ {
        self.per_setting.keys().copied()
    }
}

/// Every estimate each observable receives, keyed by observable. With
/// all nine settings present the correlators appear once and each local
/// marginal three times, 27 estimates in total.
#[derive(Clone, Debug)]
pub struct MultiplicityTable<T> {
    pub entries: BTreeMap<Observable, Vec<(MeasurementSetting, T)>>,
    pub shots: BTreeMap<MeasurementSetting, u64>,
}

impl<T> MultiplicityTable<T> {
    pub fn total_estimates(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }
}

/// Collects the redundant estimates of all fifteen observables. Requires
/// every one of the nine settings to appear in the record.
pub fn multiplicity_table<T: Real>(
    record: &ExperimentRecord,
) -> Result<MultiplicityTable<T>, TwoQubitError> {
    let averages = TwoQubitAverages::from_record(record)?;
    for setting in enumerate_settings() {
        if averages.get(setting).is_none() {
            return Err(TwoQubitError::MissingSetting {
                missing: setting.to_string(),
            });
        }
    }
    let mut entries: BTreeMap<Observable, Vec<(MeasurementSetting, T)>> = BTreeMap::new();
    let mut shots = BTreeMap::new();
    for setting in enumerate_settings() {
        let &(avg, n) = averages.get(setting).unwrap();
        shots.insert(setting, n);
        let (a, b) = match setting {
            MeasurementSetting::Pair(a, b) => (a, b),
            MeasurementSetting::Single(_) => unreachable!(),
        };
        entries
            .entry(Observable::Corr(a, b))
            .or_default()
            .push((setting, avg.correlator));
        entries
            .entry(Observable::MargA(a))
            .or_default()
            .push((setting, avg.marginal_a));
        entries
            .entry(Observable::MargB(b))
            .or_default()
            .push((setting, avg.marginal_b));
    }
    Ok(MultiplicityTable { entries, shots })
}

/// Worst disagreement between two redundant estimates of one observable.
#[derive(Clone, Debug)]
pub struct ScanEntry<T> {
    pub observable: Observable,
    /// `|m1 - m2| / sqrt((1 - m1^2)/N1 + (1 - m2^2)/N2)` for the worst pair.
    pub z: T,
    pub settings: (MeasurementSetting, MeasurementSetting),
    pub values: (T, T),
}

/// Scans each multiply-estimated observable for incompatible estimates,
/// worst first.
pub fn inconsistency_scan<T: Real>(table: &MultiplicityTable<T>) -> Vec<ScanEntry<T>> {
    let mut entries: Vec<ScanEntry<T>> = Vec::new();
    for (&observable, estimates) in &table.entries {
        if estimates.len() < 2 {
            continue;
        }
        let mut worst: Option<ScanEntry<T>> = None;
        for i in 0..estimates.len() {
            for j in (i + 1)..estimates.len() {
                let (s1, m1) = estimates[i];
                let (s2, m2) = estimates[j];
                let n1 = T::from_u64(table.shots[&s1]).unwrap();
                let n2 = T::from_u64(table.shots[&s2]).unwrap();
                let gap = (m1 - m2).abs();
                let variance = (T::one() - m1 * m1) / n1 + (T::one() - m2 * m2) / n2;
                let z = if gap == T::zero() {
                    T::zero()
                } else if variance <= T::zero() {
                    T::infinity()
                } else {
                    gap / variance.sqrt()
                };
                if worst.as_ref().is_none_or(|w| z > w.z) {
                    worst = Some(ScanEntry {
                        observable,
                        z,
                        settings: (s1, s2),
                        values: (m1, m2),
                    });
                }
            }
        }
        entries.push(worst.unwrap());
    }
    entries.sort_by(|a, b| b.z.partial_cmp(&a.z).unwrap_or(std::cmp::Ordering::Equal));
    entries
}

#[derive(Clone, Copy, Debug)]
pub struct JointMleOptions<T> {
    /// Stop once an accepted step improves the log-likelihood by less.
    pub tol: T,
    pub max_iters: usize,
}

impl<T: Real> Default for JointMleOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::opt_tol(),
            max_iters: 100_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct JointMleResult<T> {
    pub estimate: DensityMatrix<T>,
    pub ln_likelihood: T,
    pub iterations: usize,
    pub converged: bool,
    /// Log-likelihood after every accepted step, monotone by construction.
    pub lnl_trace: Vec<T>,
    /// The final estimate has an eigenvalue at numerical zero.
    pub rank_deficient: bool,
}

/// Iterative maximum-likelihood fit of one state to all blocks of a
/// two-qubit record.
///
/// Each step maps `rho` to `G rho G / tr` with `G = (1 - eps) I + eps R`,
/// where `R` averages the projectors of observed outcomes weighted by
/// `count / probability`. A step is kept only if it does not lower the
/// log-likelihood, so the trace is monotone; the damping `eps` shrinks
/// after a rejection and grows again after an acceptance.
pub fn joint_mle<T: Real>(
    record: &ExperimentRecord,
    options: &JointMleOptions<T>,
) -> Result<JointMleResult<T>, TwoQubitError> {
    if record.n_qubits() != 2 {
        return Err(TwoQubitError::WrongQubitNumber {
            got: record.n_qubits(),
        });
    }

    // Pool per setting; the likelihood only depends on pooled counts.
    let mut pooled: BTreeMap<MeasurementSetting, BTreeMap<Outcome, u64>> = BTreeMap::new();
    for block in record.blocks() {
        let entry = pooled.entry(block.setting()).or_default();
        for (&o, &c) in block.counts() {
            *entry.entry(o).or_insert(0) += c;
        }
    }
    struct Term<T> {
        projector: CMatrix<T>,
        count: T,
    }
    let mut terms: Vec<Term<T>> = Vec::new();
    let mut total = T::zero();
    for (setting, counts) in &pooled {
        for (&outcome, &count) in counts {
            if count == 0 {
                continue;
            }
            let c = T::from_u64(count).unwrap();
            terms.push(Term {
                projector: setting.projector(outcome)?,
                count: c,
            });
            total += c;
        }
    }

    let p_floor = T::of(1e-300).max(T::min_positive_value());
    let lnl_of = |rho: &CMatrix<T>| -> T {
        let mut lnl = T::zero();
        for term in &terms {
            let p = rho.trace_product_re(&term.projector).max(p_floor);
            lnl += term.count * p.ln();
        }
        lnl
    };

    let quarter = T::of(0.25);
    let mut rho = CMatrix::<T>::identity(4).scale(quarter);
    let mut lnl = lnl_of(&rho);
    let mut trace = vec![lnl];
    let mut eps = T::one();
    let eps_floor = T::of(1e-12);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < options.max_iters {
        iterations += 1;
        // R = sum_o (n_o / p_o) E_o / N, same trace-one normalization as rho.
        let mut r = CMatrix::<T>::zeros(4);
        for term in &terms {
            let p = rho.trace_product_re(&term.projector).max(p_floor);
            r = r.add(&term.projector.scale(term.count / (p * total)));
        }
        let mut accepted = false;
        while eps >= eps_floor {
            let g = CMatrix::<T>::identity(4)
                .scale(T::one() - eps)
                .add(&r.scale(eps));
            let candidate = g.matmul(&rho).matmul(&g);
            let tr = candidate.trace().re;
            if tr.is_nan() || tr <= T::zero() {
                eps *= T::of(0.5);
                continue;
            }
            let candidate = candidate.scale(T::one() / tr).hermitize();
            let candidate_lnl = lnl_of(&candidate);
            if candidate_lnl >= lnl {
                let gain = candidate_lnl - lnl;
                rho = candidate;
                lnl = candidate_lnl;
                trace.push(lnl);
                eps = (eps * T::of(2.0)).min(T::one());
                accepted = true;
                if gain < options.tol {
                    converged = true;
                }
                break;
            }
            eps *= T::of(0.5);
        }
        if !accepted {
            // No damping level improves the likelihood: a fixed point at
            // working precision.
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }

    let estimate = DensityMatrix::new(rho)?;
    let rank_deficient = estimate.rank() < 4;
    // Report the likelihood block by block so it lines up with the other
    // model fits.
    let mut ln_likelihood = T::zero();
    for block in record.blocks() {
        let probs = born_probabilities(&estimate, &block.setting())?;
        ln_likelihood += multinomial_loglik(block.counts(), &probs)?;
    }
    Ok(JointMleResult {
        estimate,
        ln_likelihood,
        iterations,
        converged,
        lnl_trace: trace,
        rank_deficient,
    })
}

/// Standard and per-setting models plus one masked model per observable
/// whose redundant estimates disagree beyond `z_threshold`. Each masked
/// model frees exactly that observable across the per-setting groups and
/// shares everything else.
pub fn build_alternative_models<T: Real>(
    record: &ExperimentRecord,
    scan: &[ScanEntry<T>],
    z_threshold: T,
) -> Result<Vec<ModelSpec>, TwoQubitError> {
    if record.n_qubits() != 2 {
        return Err(TwoQubitError::WrongQubitNumber {
            got: record.n_qubits(),
        });
    }
    let mut specs = vec![
        ModelSpec::standard(record.blocks().len()),
        ModelSpec::per_setting(record),
    ];
    let all: std::collections::BTreeSet<Observable> = record
        .blocks()
        .iter()
        .flat_map(|b| determined_by(b.setting()))
        .collect();
    let per_setting_grouping = ModelSpec::per_setting(record).grouping;
    for entry in scan {
        if entry.z <= z_threshold {
            continue;
        }
        let mut shared = all.clone();
        shared.remove(&entry.observable);
        specs.push(ModelSpec::masked(
            format!("free-{}", entry.observable),
            per_setting_grouping.clone(),
            shared,
        ));
    }
    Ok(specs)
}
