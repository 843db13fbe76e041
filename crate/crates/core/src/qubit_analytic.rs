//! Closed-form single-qubit results for comparing the standard model
//! against the per-block alternative.
//!
//! For one qubit measured along the three Pauli axes, the score gap
//! between "one state fits everything" and "one state per block" has an
//! analytic form in the axis averages alone. These functions evaluate it
//! without running the generic fitting machinery, which gives the rest of
//! the crate an independent path to validate against.

use thiserror::Error;

use crate::likelihood::{BlockAverages, EmpiricalAverages, ExperimentRecord};
use crate::qstate::{bloch_to_density, BlochVector, DensityMatrix, PauliAxis};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum AnalyticError {
    #[error("axis average {value} lies outside [-1, 1]")]
    ComponentOutOfRange { value: f64 },
    #[error("shots per axis must be positive")]
    NoShots,
    #[error("record has {got} qubits, expected 1")]
    WrongQubitNumber { got: u8 },
    #[error("record has no block measuring axis {axis}")]
    MissingAxis { axis: PauliAxis },
    #[error("axes have unequal pooled shot counts: {counts:?}")]
    UnequalAxisShots { counts: [u64; 3] },
    #[error("Bloch radius {r} is not above 1, the boundary comparison does not apply")]
    RadiusNotAboveOne { r: f64 },
    #[error("Bloch radius {r} is below 1, the expansion around the boundary does not apply")]
    RadiusBelowOne { r: f64 },
    #[error("an axis average sits at magnitude 1, the expansion is singular there")]
    AxisAtUnitMagnitude,
    #[error("all axis averages vanish")]
    ZeroRadius,
}

/// Sufficient statistics of a three-axis single-qubit experiment:
/// the axis averages and the common number of shots per axis.
#[derive(Clone, Copy, Debug)]
pub struct QubitSummary<T> {
    x: T,
    y: T,
    z: T,
    shots_per_axis: u64,
}

impl<T: Real> QubitSummary<T> {
    pub fn new(x: T, y: T, z: T, shots_per_axis: u64) -> Result<Self, AnalyticError> {
        for m in [x, y, z] {
            if !(m >= -T::one() && m <= T::one()) {
                return Err(AnalyticError::ComponentOutOfRange {
                    value: m.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        if shots_per_axis == 0 {
            return Err(AnalyticError::NoShots);
        }
        Ok(Self {
            x,
            y,
            z,
            shots_per_axis,
        })
    }

    /// Pools a record's blocks per axis. Requires a single-qubit record
    /// covering all three axes with the same pooled total on each.
    pub fn from_record(record: &ExperimentRecord) -> Result<Self, AnalyticError> {
        if record.n_qubits() != 1 {
            return Err(AnalyticError::WrongQubitNumber {
                got: record.n_qubits(),
            });
        }
        let averages = EmpiricalAverages::<T>::from_record(record)
            .expect("validated record has nonempty blocks");
        let mut sums = [T::zero(); 3];
        let mut totals = [0u64; 3];
        for (avg, block) in averages.per_block.iter().zip(record.blocks()) {
            if let BlockAverages::Single { axis, mean } = avg {
                let n = block.total();
                sums[axis.index()] += *mean * T::from_u64(n).unwrap();
                totals[axis.index()] += n;
            }
        }
        for axis in PauliAxis::ALL {
            if totals[axis.index()] == 0 {
                return Err(AnalyticError::MissingAxis { axis });
            }
        }
        if totals[0] != totals[1] || totals[1] != totals[2] {
            return Err(AnalyticError::UnequalAxisShots { counts: totals });
        }
        let n = T::from_u64(totals[0]).unwrap();
        Self::new(sums[0] / n, sums[1] / n, sums[2] / n, totals[0])
    }

    pub fn averages(&self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    pub fn shots_per_axis(&self) -> u64 {
        self.shots_per_axis
    }

    pub fn radius(&self) -> T {
        radius(self.x, self.y, self.z)
    }

    /// Reconstructed (possibly fractional) per-axis counts `(n_plus, n_minus)`.
    fn counts(&self) -> [(T, T); 3] {
        let n = T::from_u64(self.shots_per_axis).unwrap();
        let half = T::of(0.5);
        [self.x, self.y, self.z]
            .map(|m| (n * (T::one() + m) * half, n * (T::one() - m) * half))
    }
}

/// Euclidean length of the estimated Bloch vector.
pub fn radius<T: Real>(x: T, y: T, z: T) -> T {
    (x * x + y * y + z * z).sqrt()
}

/// Outcome of the standard-model fit to a three-axis summary.
#[derive(Clone, Debug)]
pub struct StandardQubitFit<T> {
    pub state: DensityMatrix<T>,
    pub ln_likelihood: T,
    pub param_count: usize,
    /// Whether the estimate was forced onto the pure-state boundary.
    pub boundary: bool,
}

/// Log-likelihood of Bloch vector `b` against reconstructed counts,
/// `-inf` if a positive count meets zero probability.
fn bloch_loglik<T: Real>(counts: &[(T, T); 3], b: [T; 3]) -> T {
    let half = T::of(0.5);
    let mut total = T::zero();
    for i in 0..3 {
        let (n_plus, n_minus) = counts[i];
        let p_plus = (T::one() + b[i]) * half;
        let p_minus = (T::one() - b[i]) * half;
        for (n, p) in [(n_plus, p_plus), (n_minus, p_minus)] {
            if n > T::zero() {
                if p <= T::zero() {
                    return T::neg_infinity();
                }
                total += n * p.ln();
            }
        }
    }
    total
}

/// Maximum-likelihood state under the standard model.
///
/// Inside the Bloch ball the axis averages themselves are the MLE. When
/// their radius exceeds 1 the estimate is the renormalized vector refined
/// by a Newton search over the sphere surface, so the returned
/// log-likelihood never falls below that of the renormalized seed.
pub fn standard_mle_qubit<T: Real>(summary: &QubitSummary<T>) -> StandardQubitFit<T> {
    let [x, y, z] = summary.averages();
    let r = summary.radius();
    let counts = summary.counts();
    if r <= T::one() {
        let state = DensityMatrix::new(
            bloch_to_density(&BlochVector::new(x, y, z))
                .matrix()
                .clone(),
        )
        .expect("radius <= 1 gives a physical state");
        let ln_likelihood = bloch_loglik(&counts, [x, y, z]);
        let param_count = if r < T::one() { 3 } else { 2 };
        return StandardQubitFit {
            state,
            ln_likelihood,
            param_count,
            boundary: false,
        };
    }
    let seed = [x / r, y / r, z / r];
    let (b, ln_likelihood) = refine_on_sphere(&counts, seed);
    let state = DensityMatrix::new(
        bloch_to_density(&BlochVector::new(b[0], b[1], b[2]))
            .matrix()
            .clone(),
    )
    .expect("unit Bloch vector gives a physical state");
    StandardQubitFit {
        state,
        ln_likelihood,
        param_count: 2,
        boundary: true,
    }
}

/// The renormalized estimate `(X, Y, Z) / R`, the closed-form
/// approximation to the boundary MLE. Requires a nonzero radius.
pub fn radial_surface_state<T: Real>(
    summary: &QubitSummary<T>,
) -> Result<DensityMatrix<T>, AnalyticError> {
    let [x, y, z] = summary.averages();
    let r = summary.radius();
    if r <= T::zero() {
        return Err(AnalyticError::ZeroRadius);
    }
    Ok(DensityMatrix::new(
        bloch_to_density(&BlochVector::new(x / r, y / r, z / r))
            .matrix()
            .clone(),
    )
    .expect("unit Bloch vector gives a physical state"))
}

/// Newton ascent of the likelihood over the unit sphere, parameterized in
/// an orthonormal frame anchored at the seed direction.
fn refine_on_sphere<T: Real>(counts: &[(T, T); 3], seed: [T; 3]) -> ([T; 3], T) {
    let frame = orthonormal_frame(seed);
    let embed = |alpha: T, beta: T| -> [T; 3] {
        let (ca, sa) = (alpha.cos(), alpha.sin());
        let (cb, sb) = (beta.cos(), beta.sin());
        let mut b = [T::zero(); 3];
        for i in 0..3 {
            b[i] = frame[0][i] * ca * cb + frame[1][i] * sa * cb + frame[2][i] * sb;
        }
        b
    };
    let mut alpha = T::zero();
    let mut beta = T::zero();
    let mut f = bloch_loglik(counts, embed(alpha, beta));
    for _ in 0..80 {
        let (ca, sa) = (alpha.cos(), alpha.sin());
        let (cb, sb) = (beta.cos(), beta.sin());
        let b = embed(alpha, beta);
        let mut da = [T::zero(); 3];
        let mut db = [T::zero(); 3];
        let mut daa = [T::zero(); 3];
        let mut dab = [T::zero(); 3];
        let mut dbb = [T::zero(); 3];
        for i in 0..3 {
            let (u1, u2, u3) = (frame[0][i], frame[1][i], frame[2][i]);
            da[i] = -u1 * sa * cb + u2 * ca * cb;
            db[i] = -u1 * ca * sb - u2 * sa * sb + u3 * cb;
            daa[i] = -u1 * ca * cb - u2 * sa * cb;
            dab[i] = u1 * sa * sb - u2 * ca * sb;
            dbb[i] = -u1 * ca * cb - u2 * sa * cb - u3 * sb;
        }
        let mut grad = [T::zero(); 2];
        let mut hess = [[T::zero(); 2]; 2];
        for i in 0..3 {
            let (n_plus, n_minus) = counts[i];
            let p_plus = T::one() + b[i];
            let p_minus = T::one() - b[i];
            // Guard: a zero-probability axis with counts means -inf, the
            // line search below never accepts such a point.
            let g = n_plus / p_plus - n_minus / p_minus;
            let h = -n_plus / (p_plus * p_plus) - n_minus / (p_minus * p_minus);
            grad[0] += g * da[i];
            grad[1] += g * db[i];
            hess[0][0] += h * da[i] * da[i] + g * daa[i];
            hess[0][1] += h * da[i] * db[i] + g * dab[i];
            hess[1][1] += h * db[i] * db[i] + g * dbb[i];
        }
        hess[1][0] = hess[0][1];
        let gnorm = grad[0].abs().max(grad[1].abs());
        if gnorm <= T::opt_tol() * T::of(0.01) * (T::one() + f.abs()) {
            break;
        }
        // Newton direction if the Hessian is negative definite, otherwise
        // plain gradient ascent.
        let det = hess[0][0] * hess[1][1] - hess[0][1] * hess[0][1];
        let (mut step_a, mut step_b) = if hess[0][0] < T::zero() && det > T::zero() {
            (
                -(hess[1][1] * grad[0] - hess[0][1] * grad[1]) / det,
                -(hess[0][0] * grad[1] - hess[0][1] * grad[0]) / det,
            )
        } else {
            let scale = T::one() / (T::one() + gnorm);
            (grad[0] * scale, grad[1] * scale)
        };
        let mut improved = false;
        for _ in 0..60 {
            let trial_f = bloch_loglik(counts, embed(alpha + step_a, beta + step_b));
            if trial_f > f {
                alpha += step_a;
                beta += step_b;
                f = trial_f;
                improved = true;
                break;
            }
            step_a *= T::of(0.5);
            step_b *= T::of(0.5);
        }
        if !improved {
            break;
        }
    }
    (embed(alpha, beta), f)
}

/// Orthonormal frame whose first vector is `seed` normalized.
fn orthonormal_frame<T: Real>(seed: [T; 3]) -> [[T; 3]; 3] {
    let norm = radius(seed[0], seed[1], seed[2]);
    let u1 = [seed[0] / norm, seed[1] / norm, seed[2] / norm];
    // Pick the coordinate axis least aligned with u1 to start Gram-Schmidt.
    let mut pick = 0;
    let mut best = u1[0].abs();
    for (i, u) in u1.iter().enumerate().skip(1) {
        if u.abs() < best {
            best = u.abs();
            pick = i;
        }
    }
    let mut e = [T::zero(); 3];
    e[pick] = T::one();
    let dot = e[0] * u1[0] + e[1] * u1[1] + e[2] * u1[2];
    let mut u2 = [e[0] - dot * u1[0], e[1] - dot * u1[1], e[2] - dot * u1[2]];
    let n2 = radius(u2[0], u2[1], u2[2]);
    for v in &mut u2 {
        *v /= n2;
    }
    let u3 = [
        u1[1] * u2[2] - u1[2] * u2[1],
        u1[2] * u2[0] - u1[0] * u2[2],
        u1[0] * u2[1] - u1[1] * u2[0],
    ];
    [u1, u2, u3]
}

/// Exact score gap `Omega_standard - Omega_per_block` for a radius above 1,
/// evaluated from the closed form in the axis averages.
///
/// Positive values favor the standard model. The per-axis summand has a
/// finite limit at `|M| = 1`, `ln((R + 1) / (2R))`, which is evaluated
/// directly instead of through the singular logarithms.
pub fn delta_aic_exact<T: Real>(summary: &QubitSummary<T>) -> Result<T, AnalyticError> {
    let r = summary.radius();
    if r <= T::one() {
        return Err(AnalyticError::RadiusNotAboveOne {
            r: r.to_f64().unwrap_or(f64::NAN),
        });
    }
    let n = T::from_u64(summary.shots_per_axis()).unwrap();
    let half = T::of(0.5);
    let mut sum = T::zero();
    for m_signed in summary.averages() {
        let m = m_signed.abs();
        if m == T::zero() {
            continue;
        }
        if T::one() - m == T::zero() {
            sum += ((r + T::one()) / (T::of(2.0) * r)).ln();
            continue;
        }
        let a = m / r;
        let log_ratio = (-a * a).ln_1p() - (-m * m).ln_1p();
        let log_odds = a.ln_1p() - (-a).ln_1p() + (-m).ln_1p() - m.ln_1p();
        sum += half * log_ratio + half * m * log_odds;
    }
    Ok(T::one() + n * sum)
}

/// Second-order expansion of [`delta_aic_exact`] around `R = 1`.
#[derive(Clone, Copy, Debug)]
pub struct TaylorDelta<T> {
    pub value: T,
    /// Whether `(R - 1)^2` is small against every `1 - M^2`, the regime
    /// where the expansion tracks the exact gap.
    pub regime_ok: bool,
}

/// Expansion `1 - N (R - 1)^2 sum_a M_a^2 / (2 (1 - M_a^2))`.
pub fn delta_aic_taylor<T: Real>(summary: &QubitSummary<T>) -> Result<TaylorDelta<T>, AnalyticError> {
    let r = summary.radius();
    if r < T::one() {
        return Err(AnalyticError::RadiusBelowOne {
            r: r.to_f64().unwrap_or(f64::NAN),
        });
    }
    let n = T::from_u64(summary.shots_per_axis()).unwrap();
    let excess = r - T::one();
    let mut coeff = T::zero();
    let mut smallest_gap = T::one();
    for m in summary.averages() {
        let gap = T::one() - m * m;
        if gap == T::zero() {
            return Err(AnalyticError::AxisAtUnitMagnitude);
        }
        coeff += m * m / (T::of(2.0) * gap);
        smallest_gap = smallest_gap.min(gap);
    }
    let value = T::one() - n * excess * excess * coeff;
    let regime_ok = excess * excess <= T::of(0.1) * smallest_gap;
    Ok(TaylorDelta { value, regime_ok })
}

/// Threshold constant `C` such that, to second order, the standard model
/// stays ahead of the per-block model exactly while `R - 1 <= C / sqrt(N)`.
///
/// Returns `None` when every axis average vanishes: then the expansion
/// puts no constraint on the radius excess.
pub fn consistency_threshold<T: Real>(x: T, y: T, z: T) -> Option<T> {
    let mut coeff = T::zero();
    for m in [x, y, z] {
        let gap = T::one() - m * m;
        if gap == T::zero() {
            return Some(T::zero());
        }
        coeff += m * m / (T::of(2.0) * gap);
    }
    if coeff == T::zero() {
        None
    } else {
        Some(T::one() / coeff.sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    use crate::likelihood::{BlockData, RecordMetadata};
    use crate::qstate::{MeasurementSetting, Outcome, Sign};

    fn summary(x: f64, y: f64, z: f64, n: u64) -> QubitSummary<f64> {
        QubitSummary::new(x, y, z, n).unwrap()
    }

    #[test]
    fn radius_of_equal_components() {
        assert_relative_eq!(
            radius(0.6, 0.6, 0.6),
            1.0392304845413263,
            epsilon = 1e-15
        );
    }

    #[test]
    fn summary_rejects_bad_inputs() {
        assert!(QubitSummary::new(1.2, 0.0, 0.0, 10).is_err());
        assert!(QubitSummary::new(0.1, 0.0, 0.0, 0).is_err());
    }

    #[test]
    fn summary_from_record_pools_axes() {
        let mk = |axis: &str, plus: u64, minus: u64, idx: usize| {
            let mut counts = BTreeMap::new();
            counts.insert(Outcome::Single(Sign::Plus), plus);
            counts.insert(Outcome::Single(Sign::Minus), minus);
            BlockData::new(axis.parse::<MeasurementSetting>().unwrap(), counts, idx).unwrap()
        };
        let record = ExperimentRecord::new(
            1,
            vec![
                mk("X", 300, 200, 0),
                mk("Y", 250, 250, 1),
                mk("Z", 100, 400, 2),
                mk("X", 400, 100, 3),
                mk("Y", 250, 250, 4),
                mk("Z", 200, 300, 5),
            ],
            RecordMetadata::default(),
        )
        .unwrap();
        let s = QubitSummary::<f64>::from_record(&record).unwrap();
        assert_eq!(s.shots_per_axis(), 1000);
        let [x, y, z] = s.averages();
        assert_relative_eq!(x, 0.4, epsilon = 1e-14);
        assert_relative_eq!(y, 0.0, epsilon = 1e-14);
        assert_relative_eq!(z, -0.4, epsilon = 1e-14);

        // Remove one Z block: pooled totals no longer match.
        let record = ExperimentRecord::new(
            1,
            vec![mk("X", 300, 200, 0), mk("Y", 250, 250, 1), mk("Z", 100, 400, 2), mk("X", 1, 0, 3)],
            RecordMetadata::default(),
        )
        .unwrap();
        assert!(matches!(
            QubitSummary::<f64>::from_record(&record),
            Err(AnalyticError::UnequalAxisShots { .. })
        ));
    }

    #[test]
    fn interior_mle_is_the_axis_averages() {
        let s = summary(0.2, 0.1, -0.3, 500);
        let fit = standard_mle_qubit(&s);
        assert!(!fit.boundary);
        assert_eq!(fit.param_count, 3);
        let b = fit.state.bloch_vector().unwrap();
        assert_relative_eq!(b.x, 0.2, epsilon = 1e-13);
        assert_relative_eq!(b.y, 0.1, epsilon = 1e-13);
        assert_relative_eq!(b.z, -0.3, epsilon = 1e-13);
    }

    #[test]
    fn boundary_mle_is_pure_and_at_least_as_good_as_the_seed() {
        let s = summary(0.6, 0.6, 0.6, 500);
        let fit = standard_mle_qubit(&s);
        assert!(fit.boundary);
        assert_eq!(fit.param_count, 2);
        assert_relative_eq!(fit.state.purity(), 1.0, epsilon = 1e-12);
        let seed = radial_surface_state(&s).unwrap();
        let seed_b = seed.bloch_vector().unwrap();
        let seed_ll = bloch_loglik(&s.counts(), [seed_b.x, seed_b.y, seed_b.z]);
        assert!(fit.ln_likelihood >= seed_ll - 1e-12);
    }

    #[test]
    fn refined_boundary_mle_beats_dense_sphere_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let scale: f64 = rng.random_range(1.01..1.25);
            let dir: [f64; 3] = [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ];
            let norm = radius(dir[0], dir[1], dir[2]);
            if norm < 0.3 {
                continue;
            }
            let s = summary(
                (dir[0] / norm * scale).clamp(-1.0, 1.0),
                (dir[1] / norm * scale).clamp(-1.0, 1.0),
                (dir[2] / norm * scale).clamp(-1.0, 1.0),
                200,
            );
            if s.radius() <= 1.0 {
                continue;
            }
            let fit = standard_mle_qubit(&s);
            let counts = s.counts();
            let mut grid_best = f64::NEG_INFINITY;
            let steps = 80;
            for i in 0..steps {
                let theta = std::f64::consts::PI * (i as f64 + 0.5) / steps as f64;
                for j in 0..(2 * steps) {
                    let phi = std::f64::consts::PI * j as f64 / steps as f64;
                    let b = [
                        theta.sin() * phi.cos(),
                        theta.sin() * phi.sin(),
                        theta.cos(),
                    ];
                    grid_best = grid_best.max(bloch_loglik(&counts, b));
                }
            }
            // The grid is coarse; the refined optimum must not lose to it.
            assert!(
                fit.ln_likelihood >= grid_best - 1e-6,
                "refined {} vs grid {}",
                fit.ln_likelihood,
                grid_best
            );
        }
    }

    #[test]
    fn exact_gap_matches_frozen_value() {
        let s = summary(0.6, 0.6, 0.6, 100);
        let delta = delta_aic_exact(&s).unwrap();
        assert_relative_eq!(delta, 0.8830174004816115, epsilon = 1e-11);
    }

    #[test]
    fn exact_gap_requires_radius_above_one() {
        let s = summary(0.5, 0.5, 0.5, 100);
        assert!(matches!(
            delta_aic_exact(&s),
            Err(AnalyticError::RadiusNotAboveOne { .. })
        ));
    }

    #[test]
    fn exact_gap_tends_to_one_at_the_boundary() {
        let eps = 1e-7;
        let m = (1.0 + eps) / 3.0f64.sqrt();
        let s = summary(m, m, m, 1000);
        let delta = delta_aic_exact(&s).unwrap();
        assert!((delta - 1.0).abs() < 1e-4, "delta = {delta}");
    }

    #[test]
    fn unit_magnitude_axis_uses_the_finite_limit() {
        let s = summary(1.0, 0.8, 0.0, 50);
        let exact = delta_aic_exact(&s).unwrap();
        let s_near = summary(1.0 - 1e-9, 0.8, 0.0, 50);
        let near = delta_aic_exact(&s_near).unwrap();
        assert!((exact - near).abs() < 1e-5, "{exact} vs {near}");
        assert!(exact.is_finite());
    }

    #[test]
    fn gap_is_even_in_each_axis_average() {
        let a = summary(0.8, 0.6, 0.4, 200);
        let b = summary(-0.8, 0.6, -0.4, 200);
        assert_relative_eq!(
            delta_aic_exact(&a).unwrap(),
            delta_aic_exact(&b).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn taylor_value_and_relative_error_at_frozen_point() {
        let s = summary(0.59, 0.59, 0.59, 500);
        let exact = delta_aic_exact(&s).unwrap();
        let taylor = delta_aic_taylor(&s).unwrap();
        assert!(taylor.regime_ok);
        let rel = ((taylor.value - exact) / (exact - 1.0)).abs();
        assert_relative_eq!(rel, 0.060083574, max_relative = 1e-5);
    }

    #[test]
    fn taylor_equals_one_at_radius_one() {
        let m = 1.0 / 3.0f64.sqrt();
        let s = summary(m, m, m, 400);
        let taylor = delta_aic_taylor(&s).unwrap();
        assert_relative_eq!(taylor.value, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn taylor_sign_matches_threshold_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let m: f64 = rng.random_range(0.1..0.9);
            let excess: f64 = rng.random_range(1e-4..0.05);
            let scale = (1.0 + excess) / (m * 3.0f64.sqrt());
            let mm = m * scale.min(1.0 / m * 0.999);
            let s = summary(mm, mm, mm, 1000);
            let r = s.radius();
            if r <= 1.0 {
                continue;
            }
            let taylor = delta_aic_taylor(&s).unwrap();
            let c = consistency_threshold(mm, mm, mm).unwrap();
            let predicted_consistent = (r - 1.0) <= c / (1000f64).sqrt();
            if (taylor.value).abs() < 1e-10 {
                continue;
            }
            assert_eq!(taylor.value >= 0.0, predicted_consistent);
        }
    }

    #[test]
    fn threshold_frozen_value() {
        let m = 1.0 / 3.0f64.sqrt();
        let c = consistency_threshold(m, m, m).unwrap();
        assert_relative_eq!(c, 1.1547005383792515, epsilon = 1e-12);
    }

    #[test]
    fn threshold_edge_cases() {
        assert!(consistency_threshold(0.0f64, 0.0, 0.0).is_none());
        assert_eq!(consistency_threshold(1.0f64, 0.0, 0.0), Some(0.0));
    }

    #[test]
    fn works_in_f32() {
        let s = QubitSummary::<f32>::new(0.6, 0.6, 0.6, 100).unwrap();
        let delta = delta_aic_exact(&s).unwrap();
        assert!((delta - 0.883).abs() < 1e-3);
        let fit = standard_mle_qubit(&s);
        assert!(fit.boundary);
        assert!((fit.state.purity() - 1.0).abs() < 1e-5);
    }
}
