//! Floating-point scalar abstraction used throughout the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point scalar the library is generic over (`f32` or `f64`).
///
/// The associated constants are validation and solver tolerances tuned to
/// the precision of the concrete type.
pub trait Real:
    Float + FromPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
    /// Tolerance for Hermiticity and unit-trace checks.
    fn tol_hermitian() -> Self;

    /// How far below zero an eigenvalue may sit before a matrix is
    /// rejected as unphysical.
    fn tol_eigen() -> Self;

    /// Eigenvalues above this threshold count toward the numerical rank.
    fn tol_rank() -> Self;

    /// Smallest barrier weight used by the constrained maximizer.
    fn barrier_mu_min() -> Self;

    /// Convergence tolerance for iterative likelihood maximizers.
    fn opt_tol() -> Self;

    /// Score difference below which two models are treated as tied.
    fn tie_tol() -> Self;

    /// Lossy conversion from an `f64` literal.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }
}

impl Real for f64 {
    fn tol_hermitian() -> Self {
        1e-12
    }

    fn tol_eigen() -> Self {
        1e-10
    }

    fn tol_rank() -> Self {
        1e-8
    }

    fn barrier_mu_min() -> Self {
        1e-12
    }

    fn opt_tol() -> Self {
        1e-10
    }

    fn tie_tol() -> Self {
        1e-9
    }
}

impl Real for f32 {
    fn tol_hermitian() -> Self {
        1e-5
    }

    fn tol_eigen() -> Self {
        1e-4
    }

    fn tol_rank() -> Self {
        3e-4
    }

    fn barrier_mu_min() -> Self {
        1e-5
    }

    fn opt_tol() -> Self {
        1e-4
    }

    fn tie_tol() -> Self {
        1e-3
    }
}
