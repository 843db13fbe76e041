//! Qubit states, Pauli measurements, and Born-rule probabilities.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use thiserror::Error;

use crate::linalg::CMatrix;
use crate::scalar::Real;

/// Canonical "minus" glyph used in outcome labels (U+2212).
pub const MINUS_SIGN: char = '\u{2212}';

#[derive(Debug, Error)]
pub enum QStateError {
    #[error("matrix is not Hermitian (deviation {deviation})")]
    NotHermitian { deviation: f64 },
    #[error("matrix trace is {trace}, expected 1")]
    TraceNotOne { trace: f64 },
    #[error("matrix has eigenvalue {min} below the physical threshold")]
    NegativeEigenvalue { min: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unsupported matrix dimension {dim}, expected 2 or 4")]
    UnsupportedDimension { dim: usize },
    #[error("cannot parse {text:?} as {what}")]
    Parse { text: String, what: &'static str },
}

/// One of the three Pauli measurement axes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

impl PauliAxis {
    pub const ALL: [PauliAxis; 3] = [PauliAxis::X, PauliAxis::Y, PauliAxis::Z];

    /// The 2x2 Pauli matrix for this axis, with `sigma_y = [[0, -i], [i, 0]]`.
    pub fn matrix<T: Real>(self) -> CMatrix<T> {
        let zero = Complex::new(T::zero(), T::zero());
        let one = Complex::new(T::one(), T::zero());
        let i = Complex::new(T::zero(), T::one());
        match self {
            PauliAxis::X => CMatrix::from_rows(&[vec![zero, one], vec![one, zero]]),
            PauliAxis::Y => CMatrix::from_rows(&[vec![zero, -i], vec![i, zero]]),
            PauliAxis::Z => CMatrix::from_rows(&[vec![one, zero], vec![zero, -one]]),
        }
    }

    pub fn index(self) -> usize {
        match self {
            PauliAxis::X => 0,
            PauliAxis::Y => 1,
            PauliAxis::Z => 2,
        }
    }
}

impl fmt::Display for PauliAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PauliAxis::X => write!(f, "X"),
            PauliAxis::Y => write!(f, "Y"),
            PauliAxis::Z => write!(f, "Z"),
        }
    }
}

impl FromStr for PauliAxis {
    type Err = QStateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "X" | "x" => Ok(PauliAxis::X),
            "Y" | "y" => Ok(PauliAxis::Y),
            "Z" | "z" => Ok(PauliAxis::Z),
            _ => Err(QStateError::Parse {
                text: s.to_string(),
                what: "Pauli axis",
            }),
        }
    }
}

/// Sign of a single-qubit measurement outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub const ALL: [Sign; 2] = [Sign::Plus, Sign::Minus];

    pub fn value<T: Real>(self) -> T {
        match self {
            Sign::Plus => T::one(),
            Sign::Minus => -T::one(),
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sign::Plus => write!(f, "+"),
            Sign::Minus => write!(f, "{MINUS_SIGN}"),
        }
    }
}

/// What was measured in one experimental block: a single Pauli axis for one
/// qubit, or a pair of local axes for two qubits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MeasurementSetting {
    Single(PauliAxis),
    Pair(PauliAxis, PauliAxis),
}

impl MeasurementSetting {
    pub fn n_qubits(&self) -> usize {
        match self {
            MeasurementSetting::Single(_) => 1,
            MeasurementSetting::Pair(_, _) => 2,
        }
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits()
    }

    /// Outcomes in canonical order: `+, -` or `++, +-, -+, --`.
    pub fn outcomes(&self) -> Vec<Outcome> {
        match self {
            MeasurementSetting::Single(_) => {
                Sign::ALL.iter().map(|&s| Outcome::Single(s)).collect()
            }
            MeasurementSetting::Pair(_, _) => {
                let mut out = Vec::with_capacity(4);
                for &a in &Sign::ALL {
                    for &b in &Sign::ALL {
                        out.push(Outcome::Pair(a, b));
                    }
                }
                out
            }
        }
    }

    /// Projector onto `outcome` for this setting.
    pub fn projector<T: Real>(&self, outcome: Outcome) -> Result<CMatrix<T>, QStateError> {
        let half = T::of(0.5);
        let sign_proj = |axis: PauliAxis, s: Sign| {
            CMatrix::identity(2)
                .add(&axis.matrix::<T>().scale(s.value::<T>()))
                .scale(half)
        };
        match (self, outcome) {
            (MeasurementSetting::Single(a), Outcome::Single(s)) => Ok(sign_proj(*a, s)),
            (MeasurementSetting::Pair(a, b), Outcome::Pair(sa, sb)) => {
                Ok(sign_proj(*a, sa).kron(&sign_proj(*b, sb)))
            }
            _ => Err(QStateError::DimensionMismatch {
                expected: self.dim(),
                got: outcome.n_qubits() * 2,
            }),
        }
    }
}

impl fmt::Display for MeasurementSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasurementSetting::Single(a) => write!(f, "{a}"),
            MeasurementSetting::Pair(a, b) => write!(f, "{a}{b}"),
        }
    }
}

impl FromStr for MeasurementSetting {
    type Err = QStateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let chars: Vec<char> = s.chars().collect();
        match chars.len() {
            1 => Ok(MeasurementSetting::Single(chars[0].to_string().parse()?)),
            2 => Ok(MeasurementSetting::Pair(
                chars[0].to_string().parse()?,
                chars[1].to_string().parse()?,
            )),
            _ => Err(QStateError::Parse {
                text: s.to_string(),
                what: "measurement setting",
            }),
        }
    }
}

/// Result label of a single shot: one sign per measured qubit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Outcome {
    Single(Sign),
    Pair(Sign, Sign),
}

impl Outcome {
    pub fn n_qubits(&self) -> usize {
        match self {
            Outcome::Single(_) => 1,
            Outcome::Pair(_, _) => 2,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Single(s) => write!(f, "{s}"),
            Outcome::Pair(a, b) => write!(f, "{a}{b}"),
        }
    }
}

impl FromStr for Outcome {
    type Err = QStateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse_sign = |c: char| match c {
            '+' => Ok(Sign::Plus),
            '-' | MINUS_SIGN => Ok(Sign::Minus),
            _ => Err(QStateError::Parse {
                text: s.to_string(),
                what: "outcome",
            }),
        };
        let chars: Vec<char> = s.chars().collect();
        match chars.len() {
            1 => Ok(Outcome::Single(parse_sign(chars[0])?)),
            2 => Ok(Outcome::Pair(parse_sign(chars[0])?, parse_sign(chars[1])?)),
            _ => Err(QStateError::Parse {
                text: s.to_string(),
                what: "outcome",
            }),
        }
    }
}

/// Bloch vector of a single qubit. The components are Pauli expectation
/// values, so each lies in `[-1, 1]`; the vector is physical only when its
/// norm is at most 1, but estimators are allowed to produce longer vectors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochVector<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> BlochVector<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn components(&self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    pub fn norm(&self) -> T {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn is_physical(&self) -> bool {
        self.norm() <= T::one() + T::tol_eigen()
    }
}

/// Hermitian unit-trace matrix produced by linear inversion. It may fail
/// positivity, so it is kept distinct from [`DensityMatrix`].
#[derive(Clone, Debug)]
pub struct LinearInversionMatrix<T> {
    mat: CMatrix<T>,
}

impl<T: Real> LinearInversionMatrix<T> {
    pub fn new(mat: CMatrix<T>) -> Result<Self, QStateError> {
        validate_hermitian_unit_trace(&mat)?;
        Ok(Self {
            mat: mat.hermitize(),
        })
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.dim()
    }

    /// Smallest eigenvalue; negative values flag an unphysical estimate.
    pub fn min_eigenvalue(&self) -> T {
        self.mat.eigvalsh()[0]
    }

    pub fn bloch_vector(&self) -> Result<BlochVector<T>, QStateError> {
        density_to_bloch(&self.mat)
    }
}

/// Positive semidefinite, Hermitian, unit-trace matrix: a physical state.
#[derive(Clone, Debug)]
pub struct DensityMatrix<T> {
    mat: CMatrix<T>,
}

impl<T: Real> DensityMatrix<T> {
    /// Validates Hermiticity, unit trace, and positivity (eigenvalues may
    /// dip below zero only by the numerical tolerance).
    pub fn new(mat: CMatrix<T>) -> Result<Self, QStateError> {
        validate_hermitian_unit_trace(&mat)?;
        let mat = mat.hermitize();
        let min = mat.eigvalsh()[0];
        if min < -T::tol_eigen() {
            return Err(QStateError::NegativeEigenvalue {
                min: min.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(Self { mat })
    }

    /// Maximally mixed state `I / dim`.
    pub fn maximally_mixed(dim: usize) -> Self {
        let mat = CMatrix::identity(dim).scale(T::one() / T::from_usize(dim).unwrap());
        Self { mat }
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.dim()
    }

    pub fn eigenvalues(&self) -> Vec<T> {
        self.mat.eigvalsh()
    }

    /// `Tr rho^2`; 1 for pure states, `1/dim` for the maximally mixed state.
    pub fn purity(&self) -> T {
        self.mat.trace_product_re(&self.mat)
    }

    /// Number of eigenvalues above the rank tolerance.
    pub fn rank(&self) -> usize {
        self.eigenvalues()
            .iter()
            .filter(|&&v| v > T::tol_rank())
            .count()
    }

    pub fn bloch_vector(&self) -> Result<BlochVector<T>, QStateError> {
        density_to_bloch(&self.mat)
    }

    /// Expectation value `Tr(rho O)` of a Hermitian observable.
    pub fn expectation(&self, observable: &CMatrix<T>) -> T {
        self.mat.trace_product_re(observable)
    }

    /// Trace distance `|| rho - sigma ||_1 / 2`.
    pub fn trace_distance(&self, other: &Self) -> T {
        let diff = self.mat.sub(&other.mat);
        let half = T::of(0.5);
        diff.eigvalsh().iter().map(|v| v.abs()).sum::<T>() * half
    }
}

fn validate_hermitian_unit_trace<T: Real>(mat: &CMatrix<T>) -> Result<(), QStateError> {
    let dim = mat.dim();
    if dim != 2 && dim != 4 {
        return Err(QStateError::UnsupportedDimension { dim });
    }
    let dev = mat.hermitian_deviation();
    if dev > T::tol_hermitian() {
        return Err(QStateError::NotHermitian {
            deviation: dev.to_f64().unwrap_or(f64::NAN),
        });
    }
    let trace = mat.trace();
    let trace_err = (trace - Complex::new(T::one(), T::zero())).norm();
    if trace_err > T::tol_hermitian() * T::of(4.0) {
        return Err(QStateError::TraceNotOne {
            trace: trace.re.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(())
}

/// `rho = (I + x sigma_x + y sigma_y + z sigma_z) / 2`.
///
/// The result is Hermitian with unit trace for any input; it is positive
/// semidefinite exactly when the Bloch norm is at most 1.
pub fn bloch_to_density<T: Real>(b: &BlochVector<T>) -> LinearInversionMatrix<T> {
    let mut mat = CMatrix::identity(2);
    for (component, axis) in b.components().into_iter().zip(PauliAxis::ALL) {
        mat = mat.add(&axis.matrix::<T>().scale(component));
    }
    LinearInversionMatrix {
        mat: mat.scale(T::of(0.5)),
    }
}

/// Pauli expectation values of a 2x2 Hermitian matrix.
pub fn density_to_bloch<T: Real>(mat: &CMatrix<T>) -> Result<BlochVector<T>, QStateError> {
    if mat.dim() != 2 {
        return Err(QStateError::DimensionMismatch {
            expected: 2,
            got: mat.dim(),
        });
    }
    let comps: Vec<T> = PauliAxis::ALL
        .iter()
        .map(|a| mat.trace_product_re(&a.matrix::<T>()))
        .collect();
    Ok(BlochVector::new(comps[0], comps[1], comps[2]))
}

/// Projects a linear-inversion estimate onto the physical states by zeroing
/// negative eigenvalues and renormalizing the trace.
///
/// A matrix that is already positive semidefinite passes through unchanged.
/// For a qubit with one negative eigenvalue this is exactly the projector
/// onto the positive eigenvector.
pub fn project_positive_eigenspace<T: Real>(
    m: &LinearInversionMatrix<T>,
) -> Result<DensityMatrix<T>, QStateError> {
    let eig = m.matrix().eigh();
    if eig.values[0] >= -T::tol_eigen() {
        return DensityMatrix::new(m.matrix().clone());
    }
    let dim = m.dim();
    let clipped: Vec<T> = eig.values.iter().map(|&v| v.max(T::zero())).collect();
    let total: T = clipped.iter().copied().sum();
    if total <= T::zero() {
        return Err(QStateError::NegativeEigenvalue {
            min: eig.values[0].to_f64().unwrap_or(f64::NAN),
        });
    }
    let mut lambda = CMatrix::zeros(dim);
    for (i, &v) in clipped.iter().enumerate() {
        lambda.set(i, i, Complex::new(v / total, T::zero()));
    }
    let mat = eig
        .vectors
        .matmul(&lambda)
        .matmul(&eig.vectors.adjoint())
        .hermitize();
    DensityMatrix::new(mat)
}

/// Born-rule outcome distribution for measuring `setting` on `rho`.
pub fn born_probabilities<T: Real>(
    rho: &DensityMatrix<T>,
    setting: &MeasurementSetting,
) -> Result<BTreeMap<Outcome, T>, QStateError> {
    if rho.dim() != setting.dim() {
        return Err(QStateError::DimensionMismatch {
            expected: setting.dim(),
            got: rho.dim(),
        });
    }
    let mut probs = BTreeMap::new();
    for outcome in setting.outcomes() {
        let proj = setting.projector::<T>(outcome)?;
        let p = rho.expectation(&proj).max(T::zero());
        probs.insert(outcome, p);
    }
    Ok(probs)
}
