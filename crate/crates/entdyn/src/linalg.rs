//! Exact complex linear algebra on the two-qubit Hilbert space.
//!
//! Basis ordering is fixed to |00>, |01>, |10>, |11> with the first label
//! referring to qubit 1. All storage is dense and fixed-size; the Hilbert
//! space dimension never changes.

use nalgebra::{Matrix2, Matrix4, Vector4};
use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;

/// 4x4 complex operator on the two-qubit space.
pub type Operator = Matrix4<C64>;

/// 2x2 complex operator on a single qubit.
pub type SingleQubitOperator = Matrix2<C64>;

/// Which qubit a single-qubit operator acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Qubit {
    One,
    Two,
}

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("state vector has (near-)zero norm and cannot be normalized")]
    ZeroNorm,
    #[error("matrix is not a valid density matrix: {0}")]
    InvalidDensityMatrix(String),
}

pub const NORM_TOL: f64 = 1e-9;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity2() -> SingleQubitOperator {
    SingleQubitOperator::identity()
}

pub fn sigma_x() -> SingleQubitOperator {
    SingleQubitOperator::new(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0))
}

pub fn sigma_y() -> SingleQubitOperator {
    SingleQubitOperator::new(c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0))
}

pub fn sigma_z() -> SingleQubitOperator {
    SingleQubitOperator::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0))
}

/// Deexcitation operator |0><1|.
pub fn sigma_minus() -> SingleQubitOperator {
    SingleQubitOperator::new(c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0))
}

/// Excitation operator |1><0|.
pub fn sigma_plus() -> SingleQubitOperator {
    SingleQubitOperator::new(c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0))
}

/// Normalized pure state of the two-qubit system.
///
/// Amplitudes are ordered (psi00, psi01, psi10, psi11). Every public
/// constructor normalizes, so the squared norm is 1 within `NORM_TOL`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureState {
    amps: Vector4<C64>,
}

impl PureState {
    /// Normalize an arbitrary amplitude vector into a state.
    pub fn new(amps: Vector4<C64>) -> Result<Self, LinalgError> {
        let norm = amps.norm();
        if norm < 1e-14 {
            return Err(LinalgError::ZeroNorm);
        }
        Ok(Self {
            amps: amps / c(norm, 0.0),
        })
    }

    pub fn from_amplitudes(a00: C64, a01: C64, a10: C64, a11: C64) -> Result<Self, LinalgError> {
        Self::new(Vector4::new(a00, a01, a10, a11))
    }

    /// |00>
    pub fn ket00() -> Self {
        Self::from_amplitudes(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)).unwrap()
    }

    /// (|00> + |11>)/sqrt(2)
    pub fn bell_phi_plus() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self::from_amplitudes(c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)).unwrap()
    }

    /// (|00> - |11>)/sqrt(2)
    pub fn bell_phi_minus() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self::from_amplitudes(c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-s, 0.0)).unwrap()
    }

    /// (|01> + |10>)/sqrt(2)
    pub fn bell_psi_plus() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self::from_amplitudes(c(0.0, 0.0), c(s, 0.0), c(s, 0.0), c(0.0, 0.0)).unwrap()
    }

    /// (|00> - |01> + i|10> + i sqrt(5)|11>)/sqrt(8), the protection-figure state.
    pub fn protection_figure_state() -> Self {
        Self::from_amplitudes(
            c(1.0, 0.0),
            c(-1.0, 0.0),
            c(0.0, 1.0),
            c(0.0, 5.0f64.sqrt()),
        )
        .unwrap()
    }

    #[inline]
    pub fn amplitudes(&self) -> &Vector4<C64> {
        &self.amps
    }

    #[inline]
    pub fn a00(&self) -> C64 {
        self.amps[0]
    }
    #[inline]
    pub fn a01(&self) -> C64 {
        self.amps[1]
    }
    #[inline]
    pub fn a10(&self) -> C64 {
        self.amps[2]
    }
    #[inline]
    pub fn a11(&self) -> C64 {
        self.amps[3]
    }

    /// Projector |psi><psi|.
    pub fn projector(&self) -> Operator {
        self.amps * self.amps.adjoint()
    }
}

/// Spin flip of an arbitrary (not necessarily normalized) amplitude vector:
/// (sigma_y (x) sigma_y) v*.
#[inline]
pub fn spin_flip_vector(v: &Vector4<C64>) -> Vector4<C64> {
    Vector4::new(
        -v[3].conj(),
        v[2].conj(),
        v[1].conj(),
        -v[0].conj(),
    )
}

/// Spin flip state psi~ = (sigma_y (x) sigma_y) psi*.
pub fn spin_flip(psi: &PureState) -> PureState {
    PureState {
        amps: spin_flip_vector(psi.amplitudes()),
    }
}

/// Embed a single-qubit operator on the stated qubit: J (x) I or I (x) J.
pub fn embed(op: &SingleQubitOperator, qubit: Qubit) -> Operator {
    match qubit {
        Qubit::One => op.kronecker(&identity2()),
        Qubit::Two => identity2().kronecker(op),
    }
}

/// <psi|O|psi>
#[inline]
pub fn expectation(op: &Operator, psi: &PureState) -> C64 {
    (psi.amplitudes().adjoint() * op * psi.amplitudes())[0]
}

/// Tilde expectation <psi~|O|psi>.
#[inline]
pub fn tilde_expectation(op: &Operator, psi: &PureState) -> C64 {
    let tilde = spin_flip_vector(psi.amplitudes());
    (tilde.adjoint() * op * psi.amplitudes())[0]
}

/// <phi~|chi> for arbitrary (unnormalized) vectors phi, chi,
/// with phi~ = (sigma_y (x) sigma_y) phi*. Equals phi^T S chi.
#[inline]
pub fn tilde_overlap(phi: &Vector4<C64>, chi: &Vector4<C64>) -> C64 {
    spin_flip_vector(phi).dotc(chi)
}

/// Unconditional 4x4 state of the system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix {
    mat: Matrix4<C64>,
}

impl DensityMatrix {
    /// Validate Hermiticity, unit trace and positivity within 1e-9.
    pub fn new(mat: Matrix4<C64>) -> Result<Self, LinalgError> {
        let herm_dev = (mat - mat.adjoint()).norm();
        if herm_dev > 1e-9 {
            return Err(LinalgError::InvalidDensityMatrix(format!(
                "Hermiticity deviation {herm_dev:.3e}"
            )));
        }
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > 1e-9 || tr.im.abs() > 1e-9 {
            return Err(LinalgError::InvalidDensityMatrix(format!(
                "trace {tr} != 1"
            )));
        }
        let herm = (mat + mat.adjoint()) * c(0.5, 0.0);
        let eig = herm.symmetric_eigenvalues();
        if eig.iter().any(|&l| l < -1e-9) {
            return Err(LinalgError::InvalidDensityMatrix(format!(
                "negative eigenvalue {:.3e}",
                eig.iter().cloned().fold(f64::INFINITY, f64::min)
            )));
        }
        Ok(Self { mat })
    }

    /// Density matrix of a pure state.
    pub fn from_pure(psi: &PureState) -> Self {
        Self {
            mat: psi.projector(),
        }
    }

    pub fn maximally_mixed() -> Self {
        Self {
            mat: Matrix4::identity() * c(0.25, 0.0),
        }
    }

    #[inline]
    pub fn matrix(&self) -> &Matrix4<C64> {
        &self.mat
    }

    /// Re-symmetrize and renormalize the trace; used by integrators to
    /// control floating-point drift.
    pub fn repaired(mat: Matrix4<C64>) -> Result<Self, LinalgError> {
        let herm = (mat + mat.adjoint()) * c(0.5, 0.0);
        let tr = herm.trace().re;
        if tr.abs() < 1e-14 {
            return Err(LinalgError::InvalidDensityMatrix("zero trace".into()));
        }
        Ok(Self {
            mat: herm / c(tr, 0.0),
        })
    }

    /// Spin-flipped matrix rho~ = (sy (x) sy) rho* (sy (x) sy).
    pub fn spin_flipped(&self) -> Matrix4<C64> {
        let syy = sigma_y().kronecker(&sigma_y());
        syy * self.mat.conjugate() * syy
    }

    /// Trace distance (1/2)||rho - other||_1.
    pub fn trace_distance(&self, other: &DensityMatrix) -> f64 {
        let diff = (self.mat - other.mat + (self.mat - other.mat).adjoint()) * c(0.5, 0.0);
        0.5 * diff.symmetric_eigenvalues().iter().map(|l| l.abs()).sum::<f64>()
    }
}

/// Partial trace, keeping the stated qubit. Output is Hermitian with unit
/// trace for a valid input.
pub fn partial_trace(rho: &DensityMatrix, keep: Qubit) -> Matrix2<C64> {
    let m = rho.matrix();
    // index = 2*q1 + q2
    match keep {
        Qubit::One => Matrix2::new(
            m[(0, 0)] + m[(1, 1)],
            m[(0, 2)] + m[(1, 3)],
            m[(2, 0)] + m[(3, 1)],
            m[(2, 2)] + m[(3, 3)],
        ),
        Qubit::Two => Matrix2::new(
            m[(0, 0)] + m[(2, 2)],
            m[(0, 1)] + m[(2, 3)],
            m[(1, 0)] + m[(3, 2)],
            m[(1, 1)] + m[(3, 3)],
        ),
    }
}
