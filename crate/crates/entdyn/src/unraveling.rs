//! Correlation-matrix representation of diffusive unravelings.
//!
//! A diffusive unraveling is fixed by an LxL complex symmetric matrix u
//! constraining the complex Wiener increments: dxi dxi^dag = I dt and
//! dxi dxi^T = u dt. Physical u are those for which the 2Lx2L real
//! covariance block matrix of the noise quadratures,
//!
//!   R = (1/2) [[I + Re u, Im u], [Im u, I - Re u]],
//!
//! is positive semidefinite. The boundary (singular R) is admitted: the
//! protection unraveling u = -I lives there.

use crate::channels::LindbladChannel;
use crate::entanglement::{self, EntanglementError, EPS_C};
use crate::linalg::{expectation, PureState, C64};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

/// Eigenvalue tolerance for admitting a correlation matrix as physical.
pub const PHYSICALITY_TOL: f64 = 1e-10;

/// Entries of the quadrature factor below this magnitude are snapped to
/// zero, so that structurally vanishing quadratures (e.g. Re dxi under the
/// protection unraveling) are exactly zero.
const FACTOR_SNAP: f64 = 1e-13;

#[derive(Debug, Error)]
pub enum UnravelingError {
    #[error("correlation matrix is not symmetric (deviation {0:.3e})")]
    NotSymmetric(f64),
    #[error("correlation matrix is unphysical: R has eigenvalue {0:.3e}")]
    Unphysical(f64),
    #[error("correlation matrix dimension {got} does not match channel size {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("protection unraveling requires local Hermitian Lindblad operators")]
    Ineligible,
    #[error("policy does not apply to this channel")]
    ChannelMismatch,
    #[error(transparent)]
    Entanglement(#[from] EntanglementError),
}

/// Build the 2Lx2L real quadrature covariance matrix (without the dt/2
/// normalization carried conceptually; stored as R such that
/// cov[(Re dxi, Im dxi)] = R dt).
pub fn quadrature_covariance(u: &DMatrix<C64>) -> DMatrix<f64> {
    let l = u.nrows();
    let mut r = DMatrix::zeros(2 * l, 2 * l);
    for i in 0..l {
        for j in 0..l {
            let delta = if i == j { 1.0 } else { 0.0 };
            r[(i, j)] = 0.5 * (delta + u[(i, j)].re);
            r[(i, j + l)] = 0.5 * u[(i, j)].im;
            r[(i + l, j)] = 0.5 * u[(i, j)].im;
            r[(i + l, j + l)] = 0.5 * (delta - u[(i, j)].re);
        }
    }
    r
}

/// True iff the quadrature covariance matrix is positive semidefinite
/// within `PHYSICALITY_TOL`.
pub fn physicality_check(u: &DMatrix<C64>) -> bool {
    if (u - u.transpose()).norm() > 1e-12 {
        return false;
    }
    let r = quadrature_covariance(u);
    r.symmetric_eigenvalues()
        .iter()
        .all(|&l| l >= -PHYSICALITY_TOL)
}

/// A physical correlation matrix with its noise factorization.
///
/// Construction verifies symmetry and physicality and precomputes a factor
/// A with A A^T = R, so sampling is a matrix-vector product.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    u: DMatrix<C64>,
    factor: DMatrix<f64>,
}

impl CorrelationMatrix {
    pub fn new(u: DMatrix<C64>) -> Result<Self, UnravelingError> {
        let sym_dev = (&u - u.transpose()).norm();
        if sym_dev > 1e-12 {
            return Err(UnravelingError::NotSymmetric(sym_dev));
        }
        if let Some(factor) = Self::diagonal_factor(&u) {
            return Ok(Self { u, factor });
        }
        let r = quadrature_covariance(&u);
        let n = r.nrows();
        let eig = r.symmetric_eigen();
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -PHYSICALITY_TOL {
            return Err(UnravelingError::Unphysical(min));
        }
        let mut factor = eig.eigenvectors;
        for j in 0..n {
            let s = eig.eigenvalues[j].max(0.0).sqrt();
            for i in 0..n {
                factor[(i, j)] *= s;
                if factor[(i, j)].abs() < FACTOR_SNAP {
                    factor[(i, j)] = 0.0;
                }
            }
        }
        Ok(Self { u, factor })
    }

    /// Analytic factor for diagonal u: R splits into per-operator 2x2
    /// blocks over (x_k, y_k) with eigenvalues (1 +- |u_kk|)/2 and
    /// reflection eigenvectors at half the phase of u_kk. Besides speed
    /// (adaptive diagonal policies rebuild u every step), this yields the
    /// structural zeros exactly: u_kk = -e^{2i phi} gives dxi_k
    /// proportional to i e^{i phi}, cancelling Re[dxi* F] identically.
    fn diagonal_factor(u: &DMatrix<C64>) -> Option<DMatrix<f64>> {
        let l = u.nrows();
        for i in 0..l {
            for j in 0..l {
                if i != j && u[(i, j)] != C64::from(0.0) {
                    return None;
                }
            }
        }
        if u.diagonal().iter().any(|z| z.norm() > 1.0 + PHYSICALITY_TOL) {
            return None; // unphysical; let the generic path report it
        }
        let mut factor = DMatrix::zeros(2 * l, 2 * l);
        for k in 0..l {
            let z = u[(k, k)];
            // Snap |u_kk| = 1 computed as 1 - O(eps): otherwise the minor
            // eigenvalue sqrt leaks a ~1e-8 component into the quadrature
            // that adaptive policies rely on being exactly dark.
            let modulus = if z.norm() > 1.0 - 1e-12 {
                1.0
            } else {
                z.norm()
            };
            let half = 0.5 * z.arg();
            let (s_plus, s_minus) = (
                (0.5 * (1.0 + modulus)).sqrt(),
                (0.5 * (1.0 - modulus)).sqrt(),
            );
            let (sin, cos) = half.sin_cos();
            let snap = |v: f64| if v.abs() < FACTOR_SNAP { 0.0 } else { v };
            // columns k and k+l of the factor drive quadratures (x_k, y_k)
            factor[(k, k)] = snap(s_plus * cos);
            factor[(k + l, k)] = snap(s_plus * sin);
            factor[(k, k + l)] = snap(-s_minus * sin);
            factor[(k + l, k + l)] = snap(s_minus * cos);
        }
        Some(factor)
    }

    /// Fixed u = 0 (heterodyne-like, uncorrelated complex noise).
    pub fn heterodyne(dim: usize) -> Self {
        Self::new(DMatrix::zeros(dim, dim)).expect("u = 0 is physical")
    }

    /// Fixed u = -I, the protection unraveling.
    pub fn protection(dim: usize) -> Self {
        Self::new(DMatrix::from_diagonal_element(dim, dim, C64::from(-1.0)))
            .expect("u = -I is physical")
    }

    /// Fixed scalar multiple of the identity.
    pub fn scaled_identity(dim: usize, z: C64) -> Result<Self, UnravelingError> {
        Self::new(DMatrix::from_diagonal_element(dim, dim, z))
    }

    pub fn dim(&self) -> usize {
        self.u.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.u
    }

    /// Draw one correlated complex Wiener increment dxi over a step dt.
    pub fn sample_noise(&self, dt: f64, rng: &mut impl Rng) -> Vec<C64> {
        let n = self.factor.nrows();
        let l = n / 2;
        let w = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let z = &self.factor * w * dt.sqrt();
        (0..l).map(|k| C64::new(z[k], z[k + l])).collect()
    }
}

/// Measurement record increment Y dt = <J^dag u + J^T> dt + dxi
/// for the current component associated with each Lindblad operator.
pub fn measurement_current(
    psi: &PureState,
    channel: &LindbladChannel,
    u: &CorrelationMatrix,
    dxi: &[C64],
    dt: f64,
) -> Vec<C64> {
    let l = channel.len();
    let expvals: Vec<C64> = channel
        .operators()
        .iter()
        .map(|op| expectation(&op.full, psi))
        .collect();
    (0..l)
        .map(|k| {
            let mut det = expvals[k];
            for (i, e) in expvals.iter().enumerate() {
                det += e.conj() * u.matrix()[(i, k)];
            }
            det * C64::from(dt) + dxi[k]
        })
        .collect()
}

/// Sign selector for the optimal-bound policies: `Plus` minimizes the
/// average concurrence (upper bound for C(rho)), `Minus` maximizes it
/// (lower bound for the concurrence of assistance).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptSign {
    Plus,
    Minus,
}

impl OptSign {
    fn as_f64(self) -> f64 {
        match self {
            OptSign::Plus => 1.0,
            OptSign::Minus => -1.0,
        }
    }
}

/// A fixed or state-adaptive rule producing the correlation matrix for the
/// next integration step.
#[derive(Debug, Clone)]
pub enum UnravelingPolicy {
    /// Constant matrix, physicality checked at construction.
    Fixed(CorrelationMatrix),
    /// u = -I; freezes concurrence for local Hermitian channels.
    Protection,
    /// Nonlocal extremal unraveling of the two-qubit dephasing channel.
    DephasingOpt(OptSign),
    /// Nonlocal extremal unraveling of the amplitude damping channel.
    ZeroTOpt(OptSign),
    /// Minimizing antidiagonal-block unraveling of the infinite-T channel.
    InfTOptPlus,
    /// Diagonal adaptive unraveling cancelling the concurrence noise term.
    Localized,
}

/// Result of one policy evaluation. `fallback` marks steps at which an
/// adaptive phase was undefined (degenerate concurrence) and the fixed
/// protection matrix was substituted.
pub struct PolicyEval {
    pub u: CorrelationMatrix,
    pub fallback: bool,
}

impl UnravelingPolicy {
    /// Eligibility check, run once at simulation start.
    pub fn validate(&self, channel: &LindbladChannel) -> Result<(), UnravelingError> {
        match self {
            UnravelingPolicy::Fixed(u) => {
                if u.dim() != channel.len() {
                    return Err(UnravelingError::DimensionMismatch {
                        got: u.dim(),
                        expected: channel.len(),
                    });
                }
                Ok(())
            }
            UnravelingPolicy::Protection => {
                if channel.all_local() && channel.all_hermitian() {
                    Ok(())
                } else {
                    Err(UnravelingError::Ineligible)
                }
            }
            UnravelingPolicy::DephasingOpt(_) => {
                use crate::channels::ChannelKind;
                if channel.kind() == ChannelKind::Dephasing && channel.len() == 2 {
                    Ok(())
                } else {
                    Err(UnravelingError::ChannelMismatch)
                }
            }
            UnravelingPolicy::ZeroTOpt(_) => {
                if channel.is_amplitude_damping() {
                    Ok(())
                } else {
                    Err(UnravelingError::ChannelMismatch)
                }
            }
            UnravelingPolicy::InfTOptPlus => {
                use crate::channels::{ChannelKind, InfTRepresentation};
                if channel.kind()
                    == ChannelKind::InfiniteTemperature(InfTRepresentation::RaisingLowering)
                    && channel.len() == 4
                {
                    Ok(())
                } else {
                    Err(UnravelingError::ChannelMismatch)
                }
            }
            UnravelingPolicy::Localized => {
                if channel.all_local() {
                    Ok(())
                } else {
                    Err(UnravelingError::Ineligible)
                }
            }
        }
    }

    /// True if the emitted matrix depends on the conditional state.
    pub fn is_adaptive(&self) -> bool {
        !matches!(
            self,
            UnravelingPolicy::Fixed(_) | UnravelingPolicy::Protection
        )
    }

    /// Evaluate the policy at the pre-step conditional state.
    pub fn evaluate(
        &self,
        psi: &PureState,
        channel: &LindbladChannel,
    ) -> Result<PolicyEval, UnravelingError> {
        let l = channel.len();
        match self {
            UnravelingPolicy::Fixed(u) => Ok(PolicyEval {
                u: u.clone(),
                fallback: false,
            }),
            UnravelingPolicy::Protection => Ok(PolicyEval {
                u: CorrelationMatrix::protection(l),
                fallback: false,
            }),
            UnravelingPolicy::DephasingOpt(sign) => {
                let c = entanglement::preconcurrence(psi);
                if c.norm() <= EPS_C {
                    return Ok(PolicyEval {
                        u: CorrelationMatrix::protection(l),
                        fallback: true,
                    });
                }
                let s = sign.as_f64();
                let ea = C64::from_polar(1.0, (psi.a01() * psi.a10()).arg());
                let eb = C64::from_polar(1.0, (psi.a00() * psi.a11()).arg());
                let ec = C64::from_polar(1.0, c.arg());
                let diag = ec * (ea - eb) * C64::from(0.5 * s);
                let off = ec * (ea + eb) * C64::from(-0.5 * s);
                let mut u = DMatrix::zeros(2, 2);
                u[(0, 0)] = diag;
                u[(1, 1)] = diag;
                u[(0, 1)] = off;
                u[(1, 0)] = off;
                Ok(PolicyEval {
                    u: CorrelationMatrix::new(u)?,
                    fallback: false,
                })
            }
            UnravelingPolicy::ZeroTOpt(sign) => {
                let c = entanglement::preconcurrence(psi);
                if c.norm() <= EPS_C {
                    return Ok(PolicyEval {
                        u: CorrelationMatrix::protection(l),
                        fallback: true,
                    });
                }
                // theta_opt = arg(c psi11^2); defaults to 0 when psi11 = 0
                // (the u12 term then multiplies a vanishing amplitude).
                let phase = c * psi.a11() * psi.a11();
                let theta = if phase.norm() == 0.0 { 0.0 } else { phase.arg() };
                let off = C64::from_polar(1.0, theta) * C64::from(-sign.as_f64());
                let mut u = DMatrix::zeros(2, 2);
                u[(0, 1)] = off;
                u[(1, 0)] = off;
                Ok(PolicyEval {
                    u: CorrelationMatrix::new(u)?,
                    fallback: false,
                })
            }
            UnravelingPolicy::InfTOptPlus => {
                let c = entanglement::preconcurrence(psi);
                if c.norm() <= EPS_C {
                    return Ok(PolicyEval {
                        u: CorrelationMatrix::protection(l),
                        fallback: true,
                    });
                }
                let ec = C64::from_polar(1.0, c.arg());
                let e11 = C64::from_polar(1.0, 2.0 * psi.a11().arg());
                let e00 = C64::from_polar(1.0, 2.0 * psi.a00().arg());
                let mut u = DMatrix::zeros(4, 4);
                // thermal ordering: (sm q1, sm q2, sp q1, sp q2)
                u[(0, 1)] = -ec * e11;
                u[(1, 0)] = -ec * e11;
                u[(2, 3)] = -ec * e00;
                u[(3, 2)] = -ec * e00;
                Ok(PolicyEval {
                    u: CorrelationMatrix::new(u)?,
                    fallback: false,
                })
            }
            UnravelingPolicy::Localized => {
                let cval = entanglement::concurrence(psi);
                if cval > 0.0 && cval <= EPS_C {
                    return Ok(PolicyEval {
                        u: CorrelationMatrix::protection(l),
                        fallback: true,
                    });
                }
                let f = entanglement::noise_f(psi, channel)?;
                let mut u = DMatrix::zeros(l, l);
                for (k, fk) in f.iter().enumerate() {
                    // -(F_k/|F_k|)^2 cancels the noise term exactly;
                    // vanishing F_k defaults to -1 (any phase works there).
                    u[(k, k)] = if fk.norm() == 0.0 {
                        C64::from(-1.0)
                    } else {
                        let ph = fk / C64::from(fk.norm());
                        -ph * ph
                    };
                }
                Ok(PolicyEval {
                    u: CorrelationMatrix::new(u)?,
                    fallback: false,
                })
            }
        }
    }
}
