//! Constructors for the noisy channels as ordered Lindblad operator sets
//! with locality metadata.
//!
//! Operator ordering is part of the public contract: correlation matrices
//! index into it. The orders are frozen as follows.
//!
//! - dephasing:  (sqrt(g) P0 (x) I, I (x) sqrt(g) P0), P0 = s- s+ = |0><0|
//! - thermal:    (sqrt(g-) s- (x) I, I (x) sqrt(g-) s-,
//!                sqrt(g+) s+ (x) I, I (x) sqrt(g+) s+)
//! - infinite T (raising/lowering): thermal ordering with g- = g+ = Gamma
//! - infinite T (hermitian xy): (sqrt(G) sx, sqrt(G) sy) per qubit
//! - depolarizing: (sx, sy, sz) per qubit, scaled by sqrt(g)

use crate::linalg::{
    embed, identity2, sigma_minus, sigma_plus, sigma_x, sigma_y, sigma_z, Operator, Qubit,
    SingleQubitOperator, C64,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("rate must be positive, got {0}")]
    NonPositiveRate(f64),
    #[error("mean occupation must be nonnegative, got {0}")]
    NegativeOccupation(f64),
    #[error("composed channels assign operators to the same qubit")]
    OverlappingQubits,
    #[error("composed channels must contain only local operators")]
    NonLocalPart,
}

/// Representation selector for the infinite-temperature bath.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfTRepresentation {
    /// Four operators sqrt(Gamma) sigma_-/sigma_+ per qubit, thermal ordering.
    RaisingLowering,
    /// Two Hermitian operators sqrt(Gamma) sigma_x, sigma_y per qubit.
    HermitianXY,
}

/// What family a channel was built from; drives policy eligibility checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelKind {
    Dephasing,
    Thermal { nbar: f64 },
    InfiniteTemperature(InfTRepresentation),
    Depolarizing,
    Composite,
    Empty,
}

/// A single Lindblad operator with its locality metadata. The rate is
/// embedded as a sqrt(rate) prefactor inside the operator.
#[derive(Debug, Clone)]
pub struct ChannelOperator {
    pub full: Operator,
    /// `None` marks a nonlocal operator.
    pub qubit: Option<Qubit>,
    /// The underlying 2x2 operator (sqrt(rate) included) for local entries.
    pub single_qubit_form: Option<SingleQubitOperator>,
}

impl ChannelOperator {
    fn local(form: SingleQubitOperator, qubit: Qubit) -> Self {
        Self {
            full: embed(&form, qubit),
            qubit: Some(qubit),
            single_qubit_form: Some(form),
        }
    }

    pub fn is_hermitian(&self) -> bool {
        (self.full - self.full.adjoint()).norm() < 1e-12
    }
}

/// Ordered set of Lindblad operators defining the environment coupling.
#[derive(Debug, Clone)]
pub struct LindbladChannel {
    ops: Vec<ChannelOperator>,
    kind: ChannelKind,
    max_rate: f64,
}

impl LindbladChannel {
    fn from_local_ops(
        ops: Vec<(SingleQubitOperator, Qubit)>,
        kind: ChannelKind,
        max_rate: f64,
    ) -> Self {
        Self {
            ops: ops
                .into_iter()
                .map(|(form, q)| ChannelOperator::local(form, q))
                .collect(),
            kind,
            max_rate,
        }
    }

    /// Channel with no operators; the trajectory of an isolated system.
    pub fn empty() -> Self {
        Self {
            ops: Vec::new(),
            kind: ChannelKind::Empty,
            max_rate: 0.0,
        }
    }

    /// Two-qubit dephasing: J = sqrt(g) (s-s+ (x) I, I (x) s-s+).
    pub fn dephasing(gamma: f64) -> Result<Self, ChannelError> {
        if gamma <= 0.0 {
            return Err(ChannelError::NonPositiveRate(gamma));
        }
        let p0 = sigma_minus() * sigma_plus() * C64::from(gamma.sqrt());
        Ok(Self::from_local_ops(
            vec![(p0, Qubit::One), (p0, Qubit::Two)],
            ChannelKind::Dephasing,
            gamma,
        ))
    }

    /// Dephasing acting on a single qubit only (one operator).
    pub fn dephasing_on(gamma: f64, qubit: Qubit) -> Result<Self, ChannelError> {
        if gamma <= 0.0 {
            return Err(ChannelError::NonPositiveRate(gamma));
        }
        let p0 = sigma_minus() * sigma_plus() * C64::from(gamma.sqrt());
        Ok(Self::from_local_ops(
            vec![(p0, qubit)],
            ChannelKind::Dephasing,
            gamma,
        ))
    }

    /// Thermal bath with emission rate g(nbar+1) and absorption rate g*nbar.
    /// For nbar = 0 the absorption operators vanish and the channel reduces
    /// to two-operator amplitude damping.
    pub fn thermal(gamma: f64, nbar: f64) -> Result<Self, ChannelError> {
        if gamma <= 0.0 {
            return Err(ChannelError::NonPositiveRate(gamma));
        }
        if nbar < 0.0 {
            return Err(ChannelError::NegativeOccupation(nbar));
        }
        let g_minus = gamma * (nbar + 1.0);
        let g_plus = gamma * nbar;
        let sm = sigma_minus() * C64::from(g_minus.sqrt());
        let mut ops = vec![(sm, Qubit::One), (sm, Qubit::Two)];
        if nbar > 0.0 {
            let sp = sigma_plus() * C64::from(g_plus.sqrt());
            ops.push((sp, Qubit::One));
            ops.push((sp, Qubit::Two));
        }
        Ok(Self::from_local_ops(
            ops,
            ChannelKind::Thermal { nbar },
            g_minus.max(g_plus),
        ))
    }

    /// Infinite-temperature limit nbar -> inf, g -> 0 with g*nbar = Gamma.
    pub fn infinite_temperature(
        big_gamma: f64,
        repr: InfTRepresentation,
    ) -> Result<Self, ChannelError> {
        if big_gamma <= 0.0 {
            return Err(ChannelError::NonPositiveRate(big_gamma));
        }
        let ops = match repr {
            InfTRepresentation::RaisingLowering => {
                let sm = sigma_minus() * C64::from(big_gamma.sqrt());
                let sp = sigma_plus() * C64::from(big_gamma.sqrt());
                vec![
                    (sm, Qubit::One),
                    (sm, Qubit::Two),
                    (sp, Qubit::One),
                    (sp, Qubit::Two),
                ]
            }
            InfTRepresentation::HermitianXY => {
                let sx = sigma_x() * C64::from(big_gamma.sqrt());
                let sy = sigma_y() * C64::from(big_gamma.sqrt());
                vec![
                    (sx, Qubit::One),
                    (sy, Qubit::One),
                    (sx, Qubit::Two),
                    (sy, Qubit::Two),
                ]
            }
        };
        Ok(Self::from_local_ops(
            ops,
            ChannelKind::InfiniteTemperature(repr),
            big_gamma,
        ))
    }

    /// Infinite-temperature bath acting on a single qubit.
    pub fn infinite_temperature_on(
        big_gamma: f64,
        repr: InfTRepresentation,
        qubit: Qubit,
    ) -> Result<Self, ChannelError> {
        if big_gamma <= 0.0 {
            return Err(ChannelError::NonPositiveRate(big_gamma));
        }
        let ops = match repr {
            InfTRepresentation::RaisingLowering => vec![
                (sigma_minus() * C64::from(big_gamma.sqrt()), qubit),
                (sigma_plus() * C64::from(big_gamma.sqrt()), qubit),
            ],
            InfTRepresentation::HermitianXY => vec![
                (sigma_x() * C64::from(big_gamma.sqrt()), qubit),
                (sigma_y() * C64::from(big_gamma.sqrt()), qubit),
            ],
        };
        Ok(Self::from_local_ops(
            ops,
            ChannelKind::InfiniteTemperature(repr),
            big_gamma,
        ))
    }

    /// Depolarizing channel sqrt(g)(sx, sy, sz) on both qubits.
    pub fn depolarizing(gamma: f64) -> Result<Self, ChannelError> {
        if gamma <= 0.0 {
            return Err(ChannelError::NonPositiveRate(gamma));
        }
        let s = C64::from(gamma.sqrt());
        let mut ops = Vec::new();
        for q in [Qubit::One, Qubit::Two] {
            ops.push((sigma_x() * s, q));
            ops.push((sigma_y() * s, q));
            ops.push((sigma_z() * s, q));
        }
        Ok(Self::from_local_ops(ops, ChannelKind::Depolarizing, gamma))
    }

    /// Concatenate per-qubit channels, preserving operator order and
    /// locality tags. The parts must act on disjoint qubits.
    pub fn compose(parts: &[LindbladChannel]) -> Result<Self, ChannelError> {
        let mut seen_one = false;
        let mut seen_two = false;
        let mut ops = Vec::new();
        let mut max_rate: f64 = 0.0;
        for part in parts {
            let mut part_one = false;
            let mut part_two = false;
            for op in &part.ops {
                match op.qubit {
                    Some(Qubit::One) => part_one = true,
                    Some(Qubit::Two) => part_two = true,
                    None => return Err(ChannelError::NonLocalPart),
                }
            }
            if (part_one && seen_one) || (part_two && seen_two) {
                return Err(ChannelError::OverlappingQubits);
            }
            seen_one |= part_one;
            seen_two |= part_two;
            ops.extend(part.ops.iter().cloned());
            max_rate = max_rate.max(part.max_rate);
        }
        Ok(Self {
            ops,
            kind: ChannelKind::Composite,
            max_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn operators(&self) -> &[ChannelOperator] {
        &self.ops
    }

    pub fn kind(&self) -> ChannelKind {
        self.kind
    }

    /// Largest decay rate entering the operators; sets the step-size scale.
    pub fn max_rate(&self) -> f64 {
        self.max_rate
    }

    pub fn all_hermitian(&self) -> bool {
        self.ops.iter().all(|op| op.is_hermitian())
    }

    pub fn all_local(&self) -> bool {
        self.ops.iter().all(|op| op.qubit.is_some())
    }

    /// True if the channel is two-operator amplitude damping (thermal nbar=0).
    pub fn is_amplitude_damping(&self) -> bool {
        matches!(self.kind, ChannelKind::Thermal { nbar } if nbar == 0.0) && self.len() == 2
    }

    /// Sum of J_k^dagger J_k over all operators; the no-jump drift kernel.
    pub fn dagger_product_sum(&self) -> Operator {
        let mut acc = Operator::zeros();
        for op in &self.ops {
            acc += op.full.adjoint() * op.full;
        }
        acc
    }
}

/// Identity on a single qubit; re-exported convenience for tests and docs.
pub fn single_qubit_identity() -> SingleQubitOperator {
    identity2()
}
