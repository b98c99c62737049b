//! Dense real linear algebra: eigenvalues, definiteness tests and the
//! Lyapunov / Riccati solvers every gain design is built on.

mod eigen;
mod lu;
mod matrix;
mod riccati;

pub use eigen::{
    eigenvalues, is_hurwitz, is_positive_definite, max_symmetric_eigenvalue,
    min_symmetric_eigenvalue, symmetric_eigen, Spectrum, SymmetricEigen, MAX_EIGEN_DIM,
};
pub use lu::{rank, Lu};
pub use matrix::DenseMatrix;
pub(crate) use matrix::norm2;
pub use riccati::{
    care_residual, lyapunov_residual, solve_care, solve_care_detailed, solve_lyapunov, stabilizability_margin,
    stabilizing_gain_bass, uncontrollable_unstable_mode, CareSolution, MAX_LYAPUNOV_DIM,
};

pub use num_complex::Complex64;

/// Tolerances shared by the numeric routines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericPolicy {
    /// Relative backward error accepted for an eigenpair.
    pub eig_backward_error: f64,
    /// Frobenius residual accepted for the algebraic Riccati equation.
    pub riccati_residual: f64,
    /// Relative residual accepted for the Lyapunov equation.
    pub lyapunov_residual: f64,
    /// Largest `|m_ij - m_ji|` (relative to `max(1, max|m|)`) treated as symmetric.
    pub symmetry_tol: f64,
    pub hurwitz_margin: f64,
    pub max_newton_iterations: usize,
}

impl Default for NumericPolicy {
    fn default() -> Self {
        Self {
            eig_backward_error: 1e-9,
            riccati_residual: 1e-8,
            lyapunov_residual: 1e-9,
            symmetry_tol: 1e-10,
            hurwitz_margin: 0.0,
            max_newton_iterations: 100,
        }
    }
}
