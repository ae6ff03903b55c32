//! Entanglement dynamics of continuously monitored two-qubit Markovian open
//! quantum systems.
//!
//! The crate integrates diffusive quantum-trajectory stochastic equations
//! under arbitrary physical unravelings of a Lindblad master equation,
//! tracks ensemble-averaged concurrence and entanglement of formation,
//! implements protection and optimal-bound monitoring policies, and
//! cross-checks everything against a deterministic master-equation solver
//! and closed-form solutions.

pub mod channels;
pub mod config;
pub mod ensemble;
pub mod entanglement;
pub mod linalg;
pub mod oracle;
pub mod report;
pub mod selftest;
pub mod trajectory;
pub mod unraveling;

pub use channels::LindbladChannel;
pub use ensemble::{EnsembleConfig, EnsembleStats};
pub use entanglement::{concurrence, preconcurrence, wootters_concurrence};
pub use linalg::{DensityMatrix, Operator, PureState, SingleQubitOperator};
pub use trajectory::{TrajectoryConfig, TrajectoryRecord};
pub use unraveling::{CorrelationMatrix, UnravelingPolicy};
