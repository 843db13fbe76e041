//! Candidate models over a measurement record, their constrained fits,
//! and information-criterion ranking.
//!
//! A model partitions the blocks into groups, assigns each group its own
//! state, and optionally forces a set of Pauli components to be shared
//! across all groups. The standard tomographic assumption is the
//! single-group model; alternatives encode source drift (per-block groups)
//! or setting-correlated sources (per-setting groups, masked sharing).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::likelihood::{multinomial_loglik, ExperimentRecord, LikelihoodError};
use crate::optim::{self, GroupBarrier, GroupProblem, LikelihoodTerm, MaskProblem};
use crate::qstate::{
    born_probabilities, bloch_to_density, BlochVector, DensityMatrix, MeasurementSetting,
    Outcome, PauliAxis, QStateError, Sign,
};
use crate::scalar::Real;
use crate::twoqubit::{joint_mle, JointMleOptions, TwoQubitError};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("grouping length {got} does not match block count {expected}")]
    GroupingLength { expected: usize, got: usize },
    #[error("shared observable {observable} does not apply to a {n_qubits}-qubit record")]
    ObservableQubitMismatch { observable: String, n_qubits: u8 },
    #[error("model ranking needs at least two fitted models")]
    NeedTwoModels,
    #[error("model ranking needs exactly one standard-role model, found {found}")]
    NotExactlyOneStandard { found: usize },
    #[error("records with {got} qubits are not supported")]
    UnsupportedQubitNumber { got: u8 },
    #[error("sample-size correction needs n > K + 1 (n = {n}, K = {k})")]
    TooFewSamplesForCorrection { n: u64, k: usize },
    #[error("predictive group {group} out of range for {n_groups} groups")]
    PredictiveGroupOutOfRange { group: usize, n_groups: usize },
    #[error("cannot parse {text:?} as an observable")]
    ObservableParse { text: String },
    #[error(transparent)]
    Likelihood(#[from] LikelihoodError),
    #[error(transparent)]
    QState(#[from] QStateError),
    #[error(transparent)]
    TwoQubit(#[from] TwoQubitError),
}

/// A Pauli component of a state: an axis expectation for one qubit, or a
/// correlator / local marginal for two qubits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Observable {
    /// Single-qubit axis expectation, printed as `X`.
    Axis(PauliAxis),
    /// Two-qubit correlator, printed as `XY`.
    Corr(PauliAxis, PauliAxis),
    /// First-qubit marginal, printed as `XI`.
    MargA(PauliAxis),
    /// Second-qubit marginal, printed as `IX`.
    MargB(PauliAxis),
}

impl Observable {
    pub fn n_qubits(&self) -> usize {
        match self {
            Observable::Axis(_) => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observable::Axis(a) => write!(f, "{a}"),
            Observable::Corr(a, b) => write!(f, "{a}{b}"),
            Observable::MargA(a) => write!(f, "{a}I"),
            Observable::MargB(b) => write!(f, "I{b}"),
        }
    }
}

impl FromStr for Observable {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ModelError::ObservableParse {
            text: s.to_string(),
        };
        let chars: Vec<char> = s.chars().collect();
        let axis = |c: char| c.to_string().parse::<PauliAxis>().map_err(|_| err());
        match chars.len() {
            1 => Ok(Observable::Axis(axis(chars[0])?)),
            2 => match (chars[0], chars[1]) {
                ('I', 'I') => Err(err()),
                (a, 'I') => Ok(Observable::MargA(axis(a)?)),
                ('I', b) => Ok(Observable::MargB(axis(b)?)),
                (a, b) => Ok(Observable::Corr(axis(a)?, axis(b)?)),
            },
            _ => Err(err()),
        }
    }
}

/// Canonical component list of a state: 3 axis expectations for one qubit,
/// or 9 correlators followed by the two sets of marginals for two qubits.
pub fn components(n_qubits: u8) -> Vec<Observable> {
    match n_qubits {
        1 => PauliAxis::ALL.iter().map(|&a| Observable::Axis(a)).collect(),
        2 => {
            let mut comps = Vec::with_capacity(15);
            for a in PauliAxis::ALL {
                for b in PauliAxis::ALL {
                    comps.push(Observable::Corr(a, b));
                }
            }
            for a in PauliAxis::ALL {
                comps.push(Observable::MargA(a));
            }
            for b in PauliAxis::ALL {
                comps.push(Observable::MargB(b));
            }
            comps
        }
        _ => Vec::new(),
    }
}

/// Components of the state that a block's setting determines.
pub fn determined_by(setting: MeasurementSetting) -> Vec<Observable> {
    match setting {
        MeasurementSetting::Single(a) => vec![Observable::Axis(a)],
        MeasurementSetting::Pair(a, b) => vec![
            Observable::Corr(a, b),
            Observable::MargA(a),
            Observable::MargB(b),
        ],
    }
}

/// Whether a model plays the part of the null hypothesis in ranking.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelRole {
    Standard,
    Alternative,
}

/// Description of one candidate model: how blocks are grouped and which
/// components all groups share.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub label: String,
    pub role: ModelRole,
    /// Group id per block, compact ids in order of first appearance.
    pub grouping: Vec<usize>,
    /// Components forced equal across every group. Components outside the
    /// set vary freely per group.
    pub shared: BTreeSet<Observable>,
    /// Which group's state predicts future samples (for model averaging).
    pub predictive_group: usize,
}

impl ModelSpec {
    /// Single group holding every block: the standard tomographic model.
    pub fn standard(n_blocks: usize) -> Self {
        Self {
            label: "standard".to_string(),
            role: ModelRole::Standard,
            grouping: vec![0; n_blocks],
            shared: BTreeSet::new(),
            predictive_group: 0,
        }
    }

    /// One group per block: every block gets its own state.
    pub fn per_block(n_blocks: usize) -> Self {
        Self {
            label: "per-block".to_string(),
            role: ModelRole::Alternative,
            grouping: (0..n_blocks).collect(),
            shared: BTreeSet::new(),
            predictive_group: 0,
        }
    }

    /// One group per distinct setting, in order of first appearance.
    pub fn per_setting(record: &ExperimentRecord) -> Self {
        let settings = record.distinct_settings();
        let grouping = record
            .blocks()
            .iter()
            .map(|b| settings.iter().position(|&s| s == b.setting()).unwrap())
            .collect();
        Self {
            label: "per-setting".to_string(),
            role: ModelRole::Alternative,
            grouping,
            shared: BTreeSet::new(),
            predictive_group: 0,
        }
    }

    /// Custom grouping with a shared-component mask.
    pub fn masked(
        label: impl Into<String>,
        grouping: Vec<usize>,
        shared: BTreeSet<Observable>,
    ) -> Self {
        Self {
            label: label.into(),
            role: ModelRole::Alternative,
            grouping: compact_grouping(grouping),
            shared,
            predictive_group: 0,
        }
    }

    pub fn with_predictive_group(mut self, group: usize) -> Self {
        self.predictive_group = group;
        self
    }

    pub fn n_groups(&self) -> usize {
        self.grouping.iter().copied().max().map_or(0, |m| m + 1)
    }

    fn validate(&self, record: &ExperimentRecord) -> Result<(), ModelError> {
        if self.grouping.len() != record.blocks().len() {
            return Err(ModelError::GroupingLength {
                expected: record.blocks().len(),
                got: self.grouping.len(),
            });
        }
        for observable in &self.shared {
            if observable.n_qubits() != record.n_qubits() as usize {
                return Err(ModelError::ObservableQubitMismatch {
                    observable: observable.to_string(),
                    n_qubits: record.n_qubits(),
                });
            }
        }
        if self.predictive_group >= self.n_groups() {
            return Err(ModelError::PredictiveGroupOutOfRange {
                group: self.predictive_group,
                n_groups: self.n_groups(),
            });
        }
        Ok(())
    }
}

/// Relabels group ids to compact 0-based ids in order of first appearance.
fn compact_grouping(grouping: Vec<usize>) -> Vec<usize> {
    let mut map: Vec<usize> = Vec::new();
    grouping
        .into_iter()
        .map(|g| {
            if let Some(pos) = map.iter().position(|&m| m == g) {
                pos
            } else {
                map.push(g);
                map.len() - 1
            }
        })
        .collect()
}

/// Which information criterion orders the models.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scoring {
    /// `omega = lnL - K`.
    Aic,
    /// AIC with the small-sample correction term.
    Aicc,
}

/// `omega = lnL - K`; larger is better.
pub fn aic<T: Real>(ln_likelihood: T, param_count: usize) -> T {
    ln_likelihood - T::from_usize(param_count).unwrap()
}

/// Small-sample corrected score `aic - K(K+1) / (n - K - 1)`.
pub fn aicc<T: Real>(ln_likelihood: T, param_count: usize, n_samples: u64) -> Result<T, ModelError> {
    let k = T::from_usize(param_count).unwrap();
    if n_samples <= param_count as u64 + 1 {
        return Err(ModelError::TooFewSamplesForCorrection {
            n: n_samples,
            k: param_count,
        });
    }
    let n = T::from_u64(n_samples).unwrap();
    Ok(aic(ln_likelihood, param_count) - k * (k + T::one()) / (n - k - T::one()))
}

/// Effective number of free parameters in one group's estimate: the
/// dimension of the rank-r density manifold, `2dr - r^2 - 1`, capped by
/// the number of independently determined components.
pub fn count_parameters<T: Real>(estimate: &DensityMatrix<T>, n_determined: usize) -> usize {
    let d = estimate.dim();
    let r = estimate.rank().max(1);
    (2 * d * r - r * r - 1).min(n_determined)
}

/// A model together with its constrained maximum-likelihood fit and score.
#[derive(Clone, Debug)]
pub struct FittedModel<T> {
    pub spec: ModelSpec,
    /// One state per group, indexed by group id.
    pub estimates: Vec<DensityMatrix<T>>,
    pub ln_likelihood: T,
    pub param_count: usize,
    /// Score under the requested criterion; larger is better.
    pub omega: T,
    pub scoring: Scoring,
    pub converged: bool,
    pub notes: Vec<String>,
}

impl<T: Real> FittedModel<T> {
    pub fn omega_aic(&self) -> T {
        aic(self.ln_likelihood, self.param_count)
    }

    pub fn omega_aicc(&self, n_samples: u64) -> Result<T, ModelError> {
        aicc(self.ln_likelihood, self.param_count, n_samples)
    }
}

struct RawFit<T> {
    states: Vec<DensityMatrix<T>>,
    /// Fitted outcome distribution per block, aligned with the record.
    block_probs: Vec<BTreeMap<Outcome, T>>,
    param_count: usize,
    converged: bool,
    notes: Vec<String>,
}

/// Fits `spec` to `record` by constrained maximum likelihood and scores it.
pub fn fit_model<T: Real>(
    spec: &ModelSpec,
    record: &ExperimentRecord,
    scoring: Scoring,
) -> Result<FittedModel<T>, ModelError> {
    spec.validate(record)?;
    let raw = match record.n_qubits() {
        1 => fit_groups_single(spec, record)?,
        2 => fit_groups_pair(spec, record)?,
        n => return Err(ModelError::UnsupportedQubitNumber { got: n }),
    };
    let mut ln_likelihood = T::zero();
    for (block, probs) in record.blocks().iter().zip(&raw.block_probs) {
        ln_likelihood += multinomial_loglik(block.counts(), probs)?;
    }
    let omega = match scoring {
        Scoring::Aic => aic(ln_likelihood, raw.param_count),
        Scoring::Aicc => aicc(ln_likelihood, raw.param_count, record.total_shots())?,
    };
    Ok(FittedModel {
        spec: spec.clone(),
        estimates: raw.states,
        ln_likelihood,
        param_count: raw.param_count,
        omega,
        scoring,
        converged: raw.converged,
        notes: raw.notes,
    })
}

/// Pooled `(n_plus, n_minus)` per (group, axis) plus the global pool.
fn fit_groups_single<T: Real>(
    spec: &ModelSpec,
    record: &ExperimentRecord,
) -> Result<RawFit<T>, ModelError> {
    let n_groups = spec.n_groups();
    let shared_active = n_groups > 1 && !spec.shared.is_empty();
    let is_shared = |axis: PauliAxis| shared_active && spec.shared.contains(&Observable::Axis(axis));

    let mut group_counts = vec![[(0u64, 0u64); 3]; n_groups];
    let mut global_counts = [(0u64, 0u64); 3];
    for (block, &g) in record.blocks().iter().zip(&spec.grouping) {
        let axis = match block.setting() {
            MeasurementSetting::Single(a) => a,
            MeasurementSetting::Pair(_, _) => unreachable!("validated single-qubit record"),
        };
        let plus = block.count(Outcome::Single(Sign::Plus));
        let minus = block.count(Outcome::Single(Sign::Minus));
        let slot = &mut group_counts[g][axis.index()];
        slot.0 += plus;
        slot.1 += minus;
        global_counts[axis.index()].0 += plus;
        global_counts[axis.index()].1 += minus;
    }

    // Pool backing each (group, axis) value under the mask.
    let pool_for = |g: usize, axis: PauliAxis| -> (u64, u64) {
        if is_shared(axis) {
            global_counts[axis.index()]
        } else {
            group_counts[g][axis.index()]
        }
    };
    let freq = |counts: (u64, u64)| -> Option<(T, T)> {
        let total = counts.0 + counts.1;
        if total == 0 {
            return None;
        }
        let n = T::from_u64(total).unwrap();
        Some((
            T::from_u64(counts.0).unwrap() / n,
            T::from_u64(counts.1).unwrap() / n,
        ))
    };

    // Unconstrained per-variable optimum: the pooled averages.
    let mut values = vec![[T::zero(); 3]; n_groups];
    for (g, value) in values.iter_mut().enumerate() {
        for axis in PauliAxis::ALL {
            if let Some((fp, fm)) = freq(pool_for(g, axis)) {
                value[axis.index()] = fp - fm;
            }
        }
    }
    let feasible = values.iter().all(|v| {
        let norm_sq: T = v.iter().map(|&x| x * x).sum();
        norm_sq <= T::one() + T::epsilon() * T::of(16.0)
    });

    let mut converged = true;
    let mut notes = Vec::new();
    if !feasible {
        // Constrained case: run the interior-point maximizer.
        let (problem, var_index) = build_single_problem(spec, &group_counts);
        let solution = optim::maximize(&problem);
        if !solution.converged {
            converged = false;
            notes.push("constrained maximizer stopped before full convergence".to_string());
        }
        for g in 0..n_groups {
            for axis in PauliAxis::ALL {
                values[g][axis.index()] = solution.values[var_index[g][axis.index()]];
            }
        }
    }

    // Fitted per-block outcome distributions. In the unconstrained case
    // these are the pooled frequencies themselves, computed directly from
    // the counts so that nested models agree bit for bit.
    let half = T::of(0.5);
    let block_probs = record
        .blocks()
        .iter()
        .zip(&spec.grouping)
        .map(|(block, &g)| {
            let axis = match block.setting() {
                MeasurementSetting::Single(a) => a,
                MeasurementSetting::Pair(_, _) => unreachable!(),
            };
            let (p_plus, p_minus) = if feasible {
                freq(pool_for(g, axis)).expect("block pools are nonempty")
            } else {
                let v = values[g][axis.index()];
                ((T::one() + v) * half, (T::one() - v) * half)
            };
            let mut probs = BTreeMap::new();
            probs.insert(Outcome::Single(Sign::Plus), p_plus);
            probs.insert(Outcome::Single(Sign::Minus), p_minus);
            probs
        })
        .collect();

    let mut states = Vec::with_capacity(n_groups);
    for v in &values {
        let bloch = BlochVector::new(v[0], v[1], v[2]);
        states.push(DensityMatrix::new(
            bloch_to_density(&bloch).matrix().clone(),
        )?);
    }

    let determined = |g: usize, axis: PauliAxis| group_counts[g][axis.index()].0
        + group_counts[g][axis.index()].1
        > 0;
    let param_count = if !shared_active {
        let mut total = 0;
        for (g, state) in states.iter().enumerate() {
            let n_det = PauliAxis::ALL.iter().filter(|&&a| determined(g, a)).count();
            total += count_parameters(state, n_det);
        }
        total
    } else {
        let mut total = 0;
        for axis in PauliAxis::ALL {
            if is_shared(axis) {
                if global_counts[axis.index()].0 + global_counts[axis.index()].1 > 0 {
                    total += 1;
                }
            } else {
                total += (0..n_groups).filter(|&g| determined(g, axis)).count();
            }
        }
        total
    };

    Ok(RawFit {
        states,
        block_probs,
        param_count,
        converged,
        notes,
    })
}

/// Assembles the ball-constrained problem for a single-qubit mask.
/// Returns the problem and the variable index per (group, axis). A
/// shared axis maps every group's pooled term to one common variable,
/// which is the same likelihood as pooling globally.
fn build_single_problem<T: Real>(
    spec: &ModelSpec,
    group_counts: &[[(u64, u64); 3]],
) -> (MaskProblem<T>, Vec<[usize; 3]>) {
    let n_groups = group_counts.len();
    let shared_active = n_groups > 1 && !spec.shared.is_empty();
    let is_shared = |axis: PauliAxis| shared_active && spec.shared.contains(&Observable::Axis(axis));

    let mut n_vars = 0;
    let mut shared_var = [usize::MAX; 3];
    for axis in PauliAxis::ALL {
        if is_shared(axis) {
            shared_var[axis.index()] = n_vars;
            n_vars += 1;
        }
    }
    let mut var_index = vec![[usize::MAX; 3]; n_groups];
    let mut groups = Vec::with_capacity(n_groups);
    for g in 0..n_groups {
        let mut var_of_comp = Vec::with_capacity(3);
        for axis in PauliAxis::ALL {
            let var = if is_shared(axis) {
                shared_var[axis.index()]
            } else {
                let v = n_vars;
                n_vars += 1;
                v
            };
            var_index[g][axis.index()] = var;
            var_of_comp.push(var);
        }
        let mut terms = Vec::new();
        for axis in PauliAxis::ALL {
            let (plus, minus) = group_counts[g][axis.index()];
            if plus + minus == 0 {
                continue;
            }
            terms.push(LikelihoodTerm {
                outcomes: vec![
                    (
                        vec![(axis.index(), T::one())],
                        T::from_u64(plus).unwrap(),
                    ),
                    (
                        vec![(axis.index(), -T::one())],
                        T::from_u64(minus).unwrap(),
                    ),
                ],
                dim_factor: T::of(0.5),
            });
        }
        groups.push(GroupProblem {
            var_of_comp,
            terms,
            barrier: GroupBarrier::Ball,
        });
    }
    (MaskProblem { n_vars, groups }, var_index)
}

fn fit_groups_pair<T: Real>(
    spec: &ModelSpec,
    record: &ExperimentRecord,
) -> Result<RawFit<T>, ModelError> {
    let n_groups = spec.n_groups();
    let shared_active = n_groups > 1 && !spec.shared.is_empty();
    if shared_active {
        fit_pair_masked(spec, record)
    } else {
        fit_pair_free(spec, record)
    }
}

/// All-free grouped fit: groups with one distinct setting have a closed
/// form (the empirical averages); groups mixing settings need the
/// iterative joint maximizer.
fn fit_pair_free<T: Real>(
    spec: &ModelSpec,
    record: &ExperimentRecord,
) -> Result<RawFit<T>, ModelError> {
    let n_groups = spec.n_groups();
    let comps = components(2);
    let mut converged = true;
    let mut notes = Vec::new();
    let mut states: Vec<Option<DensityMatrix<T>>> = vec![None; n_groups];
    let mut block_probs: Vec<Option<BTreeMap<Outcome, T>>> = vec![None; record.blocks().len()];
    let mut param_count = 0;

    for (g, state_slot) in states.iter_mut().enumerate() {
        let member_indices: Vec<usize> = (0..record.blocks().len())
            .filter(|&i| spec.grouping[i] == g)
            .collect();
        let settings: BTreeSet<MeasurementSetting> = member_indices
            .iter()
            .map(|&i| record.blocks()[i].setting())
            .collect();
        let n_det: BTreeSet<Observable> = settings
            .iter()
            .flat_map(|&s| determined_by(s))
            .collect();

        if settings.len() == 1 {
            // Pool the group's blocks and read off the empirical averages.
            let mut pooled: BTreeMap<Outcome, u64> = BTreeMap::new();
            for &i in &member_indices {
                for (&o, &c) in record.blocks()[i].counts() {
                    *pooled.entry(o).or_insert(0) += c;
                }
            }
            let probs: BTreeMap<Outcome, T> = crate::likelihood::empirical_probs(&pooled);
            let mut values = vec![T::zero(); comps.len()];
            for (idx, obs) in comps.iter().enumerate() {
                if !n_det.contains(obs) {
                    continue;
                }
                let mut sum = T::zero();
                for (&o, &p) in &probs {
                    if let Outcome::Pair(s1, s2) = o {
                        let sign = match obs {
                            Observable::Corr(_, _) => s1.value::<T>() * s2.value::<T>(),
                            Observable::MargA(_) => s1.value::<T>(),
                            Observable::MargB(_) => s2.value::<T>(),
                            Observable::Axis(_) => unreachable!(),
                        };
                        sum += sign * p;
                    }
                }
                values[idx] = sum;
            }
            let state = pair_state_from_components(&comps, &values)?;
            param_count += count_parameters(&state, n_det.len());
            *state_slot = Some(state);
            for &i in &member_indices {
                block_probs[i] = Some(probs.clone());
            }
        } else {
            // Multiple settings constrain one state: iterative joint MLE
            // on the group's blocks.
            let sub_blocks: Vec<_> = member_indices
                .iter()
                .enumerate()
                .map(|(new_idx, &i)| {
                    let b = &record.blocks()[i];
                    crate::likelihood::BlockData::new(b.setting(), b.counts().clone(), new_idx)
                })
                .collect::<Result<_, _>>()?;
            let sub_record =
                ExperimentRecord::new(2, sub_blocks, record.metadata().clone())?;
            let result = joint_mle(&sub_record, &JointMleOptions::default())?;
            if !result.converged {
                converged = false;
                notes.push(format!(
                    "group {g}: joint maximizer hit its iteration limit"
                ));
            }
            if result.rank_deficient {
                notes.push(format!(
                    "group {g}: estimate is rank deficient, its parameter count is reduced"
                ));
            }
            param_count += count_parameters(&result.estimate, n_det.len());
            for &i in &member_indices {
                let setting = record.blocks()[i].setting();
                block_probs[i] = Some(born_probabilities(&result.estimate, &setting)?);
            }
            *state_slot = Some(result.estimate);
        }
    }

    Ok(RawFit {
        states: states.into_iter().map(Option::unwrap).collect(),
        block_probs: block_probs.into_iter().map(Option::unwrap).collect(),
        param_count,
        converged,
        notes,
    })
}

/// Masked two-qubit fit through the positive-definite barrier maximizer.
fn fit_pair_masked<T: Real>(
    spec: &ModelSpec,
    record: &ExperimentRecord,
) -> Result<RawFit<T>, ModelError> {
    let n_groups = spec.n_groups();
    let comps = components(2);
    let paulis: Vec<_> = comps.iter().map(|o| pair_pauli_matrix::<T>(o)).collect();

    // Pool counts per (group, setting).
    let mut pooled: Vec<BTreeMap<MeasurementSetting, BTreeMap<Outcome, u64>>> =
        vec![BTreeMap::new(); n_groups];
    for (block, &g) in record.blocks().iter().zip(&spec.grouping) {
        let entry = pooled[g].entry(block.setting()).or_default();
        for (&o, &c) in block.counts() {
            *entry.entry(o).or_insert(0) += c;
        }
    }

    // Variable layout: one global variable per shared component, one
    // variable per (group, free component).
    let mut n_vars = 0;
    let mut shared_var: BTreeMap<Observable, usize> = BTreeMap::new();
    for obs in &comps {
        if spec.shared.contains(obs) {
            shared_var.insert(*obs, n_vars);
            n_vars += 1;
        }
    }
    let mut var_index: Vec<Vec<usize>> = Vec::with_capacity(n_groups);
    let mut groups = Vec::with_capacity(n_groups);
    for group_counts in &pooled {
        let mut var_of_comp = Vec::with_capacity(comps.len());
        for obs in &comps {
            if let Some(&v) = shared_var.get(obs) {
                var_of_comp.push(v);
            } else {
                var_of_comp.push(n_vars);
                n_vars += 1;
            }
        }
        var_index.push(var_of_comp.clone());
        let mut terms = Vec::new();
        for (setting, counts) in group_counts {
            let (a, b) = match setting {
                MeasurementSetting::Pair(a, b) => (*a, *b),
                MeasurementSetting::Single(_) => unreachable!("validated two-qubit record"),
            };
            let corr_idx = comps
                .iter()
                .position(|o| *o == Observable::Corr(a, b))
                .unwrap();
            let ma_idx = comps
                .iter()
                .position(|o| *o == Observable::MargA(a))
                .unwrap();
            let mb_idx = comps
                .iter()
                .position(|o| *o == Observable::MargB(b))
                .unwrap();
            let outcomes = counts
                .iter()
                .map(|(&o, &c)| {
                    let (s1, s2) = match o {
                        Outcome::Pair(s1, s2) => (s1.value::<T>(), s2.value::<T>()),
                        Outcome::Single(_) => unreachable!(),
                    };
                    (
                        vec![(corr_idx, s1 * s2), (ma_idx, s1), (mb_idx, s2)],
                        T::from_u64(c).unwrap(),
                    )
                })
                .collect();
            terms.push(LikelihoodTerm {
                outcomes,
                dim_factor: T::of(0.25),
            });
        }
        groups.push(GroupProblem {
            var_of_comp,
            terms,
            barrier: GroupBarrier::Psd {
                paulis: paulis.clone(),
                dim: 4,
            },
        });
    }

    let problem = MaskProblem { n_vars, groups };
    let solution = optim::maximize(&problem);
    let mut converged = true;
    let mut notes = Vec::new();
    if !solution.converged {
        converged = false;
        notes.push("constrained maximizer stopped before full convergence".to_string());
    }

    let mut states = Vec::with_capacity(n_groups);
    for group_vars in &var_index {
        let values: Vec<T> = group_vars.iter().map(|&v| solution.values[v]).collect();
        states.push(pair_state_from_components(&comps, &values)?);
    }
    let quarter = T::of(0.25);
    let block_probs = record
        .blocks()
        .iter()
        .zip(&spec.grouping)
        .map(|(block, &g)| {
            let (a, b) = match block.setting() {
                MeasurementSetting::Pair(a, b) => (a, b),
                MeasurementSetting::Single(_) => unreachable!(),
            };
            let corr = solution.values[var_index[g][comps
                .iter()
                .position(|o| *o == Observable::Corr(a, b))
                .unwrap()]];
            let ma = solution.values[var_index[g][comps
                .iter()
                .position(|o| *o == Observable::MargA(a))
                .unwrap()]];
            let mb = solution.values[var_index[g][comps
                .iter()
                .position(|o| *o == Observable::MargB(b))
                .unwrap()]];
            block
                .setting()
                .outcomes()
                .into_iter()
                .map(|o| {
                    let (s1, s2) = match o {
                        Outcome::Pair(s1, s2) => (s1.value::<T>(), s2.value::<T>()),
                        Outcome::Single(_) => unreachable!(),
                    };
                    let p = (T::one() + s1 * s2 * corr + s1 * ma + s2 * mb) * quarter;
                    (o, p.max(T::zero()))
                })
                .collect()
        })
        .collect();

    // Literal mask counting: each shared component with any data counts
    // once, each free component once per group that determines it.
    let mut determined_global: BTreeSet<Observable> = BTreeSet::new();
    let mut determined_group: Vec<BTreeSet<Observable>> = vec![BTreeSet::new(); n_groups];
    for (block, &g) in record.blocks().iter().zip(&spec.grouping) {
        for obs in determined_by(block.setting()) {
            determined_global.insert(obs);
            determined_group[g].insert(obs);
        }
    }
    let mut param_count = 0;
    for obs in &comps {
        if spec.shared.contains(obs) {
            if determined_global.contains(obs) {
                param_count += 1;
            }
        } else {
            param_count += (0..n_groups)
                .filter(|&g| determined_group[g].contains(obs))
                .count();
        }
    }

    Ok(RawFit {
        states,
        block_probs,
        param_count,
        converged,
        notes,
    })
}

/// 4x4 Pauli operator of a two-qubit component.
fn pair_pauli_matrix<T: Real>(observable: &Observable) -> crate::linalg::CMatrix<T> {
    let id = crate::linalg::CMatrix::<T>::identity(2);
    match observable {
        Observable::Corr(a, b) => a.matrix::<T>().kron(&b.matrix::<T>()),
        Observable::MargA(a) => a.matrix::<T>().kron(&id),
        Observable::MargB(b) => id.kron(&b.matrix::<T>()),
        Observable::Axis(_) => unreachable!("two-qubit component"),
    }
}

/// Builds `rho = (I + sum_c v_c P_c) / 4` and validates it.
fn pair_state_from_components<T: Real>(
    comps: &[Observable],
    values: &[T],
) -> Result<DensityMatrix<T>, ModelError> {
    let mut mat = crate::linalg::CMatrix::<T>::identity(4);
    for (obs, &v) in comps.iter().zip(values) {
        if v != T::zero() {
            mat = mat.add(&pair_pauli_matrix::<T>(obs).scale(v));
        }
    }
    Ok(DensityMatrix::new(mat.scale(T::of(0.25)))?)
}

/// Relative model weights `exp(omega_k - omega_max)`, normalized to 1.
pub fn akaike_weights<T: Real>(omegas: &[T]) -> Vec<T> {
    if omegas.is_empty() {
        return Vec::new();
    }
    let max = omegas.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = omegas.iter().map(|&o| (o - max).exp()).collect();
    let sum: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Did the data keep the standard model on top?
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Consistent,
    Inconsistent,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Consistent => write!(f, "CONSISTENT"),
            Verdict::Inconsistent => write!(f, "INCONSISTENT"),
        }
    }
}

/// One row of a ranking: the fit, its score gap to the best model, and
/// its relative weight.
#[derive(Clone, Debug)]
pub struct RankedModel<T> {
    pub fitted: FittedModel<T>,
    /// `omega - omega_best`, zero for the leader.
    pub delta: T,
    pub weight: T,
}

/// Ranked comparison of candidate fits.
#[derive(Clone, Debug)]
pub struct AicReport<T> {
    /// Best model first.
    pub ranked: Vec<RankedModel<T>>,
    pub verdict: Verdict,
}

impl<T: Real> AicReport<T> {
    pub fn best(&self) -> &RankedModel<T> {
        &self.ranked[0]
    }

    pub fn standard(&self) -> &RankedModel<T> {
        self.ranked
            .iter()
            .find(|r| r.fitted.spec.role == ModelRole::Standard)
            .expect("ranking validated exactly one standard model")
    }
}

/// Orders fitted models by score and judges the standard model.
///
/// The verdict is CONSISTENT exactly when the standard model's score is
/// at least every alternative's. Score ties within [`Real::tie_tol`]
/// rank the model with fewer parameters first, and the standard model
/// wins exact ties.
pub fn rank_models<T: Real>(fitted: Vec<FittedModel<T>>) -> Result<AicReport<T>, ModelError> {
    if fitted.len() < 2 {
        return Err(ModelError::NeedTwoModels);
    }
    let n_standard = fitted
        .iter()
        .filter(|f| f.spec.role == ModelRole::Standard)
        .count();
    if n_standard != 1 {
        return Err(ModelError::NotExactlyOneStandard { found: n_standard });
    }

    let tie = T::tie_tol();
    let mut models = fitted;
    models.sort_by(|a, b| {
        b.omega
            .partial_cmp(&a.omega)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    // Within near-ties prefer fewer parameters, then the standard model.
    let mut swapped = true;
    while swapped {
        swapped = false;
        for i in 1..models.len() {
            let close = (models[i - 1].omega - models[i].omega).abs() <= tie;
            if !close {
                continue;
            }
            let prefer_later = models[i].param_count < models[i - 1].param_count
                || (models[i].param_count == models[i - 1].param_count
                    && models[i].spec.role == ModelRole::Standard
                    && models[i - 1].spec.role != ModelRole::Standard);
            if prefer_later {
                models.swap(i - 1, i);
                swapped = true;
            }
        }
    }

    let omega_std = models
        .iter()
        .find(|m| m.spec.role == ModelRole::Standard)
        .map(|m| m.omega)
        .unwrap();
    let omega_alt_max = models
        .iter()
        .filter(|m| m.spec.role != ModelRole::Standard)
        .map(|m| m.omega)
        .fold(T::neg_infinity(), T::max);
    let verdict = if omega_std >= omega_alt_max - tie {
        Verdict::Consistent
    } else {
        Verdict::Inconsistent
    };

    let omegas: Vec<T> = models.iter().map(|m| m.omega).collect();
    let weights = akaike_weights(&omegas);
    let best = omegas[0];
    let ranked = models
        .into_iter()
        .zip(weights)
        .map(|(fitted, weight)| RankedModel {
            delta: fitted.omega - best,
            fitted,
            weight,
        })
        .collect();
    Ok(AicReport { ranked, verdict })
}

/// Weight-averaged outcome distribution over the ranked models, using
/// each model's predictive group.
pub fn model_averaged_prediction<T: Real>(
    report: &AicReport<T>,
    setting: &MeasurementSetting,
) -> Result<BTreeMap<Outcome, T>, ModelError> {
    let mut acc: BTreeMap<Outcome, T> = setting
        .outcomes()
        .into_iter()
        .map(|o| (o, T::zero()))
        .collect();
    for ranked in &report.ranked {
        let spec = &ranked.fitted.spec;
        let state = ranked
            .fitted
            .estimates
            .get(spec.predictive_group)
            .ok_or(ModelError::PredictiveGroupOutOfRange {
                group: spec.predictive_group,
                n_groups: ranked.fitted.estimates.len(),
            })?;
        let probs = born_probabilities(state, setting)?;
        for (o, p) in probs {
            *acc.get_mut(&o).unwrap() += ranked.weight * p;
        }
    }
    Ok(acc)
}
