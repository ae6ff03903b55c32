//! Flat key-value scenario files.
//!
//! Syntax: one `key = value` pair per line, `#` starts a comment, blank
//! lines ignored. Lists are comma separated. Unknown keys are rejected so
//! typos fail loudly instead of silently using a default.

use crate::channels::{ChannelError, InfTRepresentation, LindbladChannel};
use crate::ensemble::haar_random_state;
use crate::linalg::{Qubit, C64};
use crate::linalg::PureState;
use crate::trajectory::split_rng;
use crate::unraveling::{CorrelationMatrix, OptSign, UnravelingError, UnravelingPolicy};
use nalgebra::{DMatrix, Vector4};
use std::collections::BTreeMap;
use thiserror::Error;

const KNOWN_KEYS: &[&str] = &[
    "channel.kind",
    "channel.gamma",
    "channel.nbar",
    "channel.representation",
    "policy.kind",
    "policy.sign",
    "policy.fixed_u",
    "initial.kind",
    "initial.amplitudes",
    "sim.dt",
    "sim.t_final",
    "sim.checkpoints",
    "ensemble.n_traj",
    "ensemble.n_states",
    "seed",
    "output.path",
    "output.record_states",
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("missing required key `{0}`")]
    MissingKey(&'static str),
    #[error("key `{key}`: {message}")]
    BadValue { key: &'static str, message: String },
    #[error("key `channel.kind`: {0}")]
    Channel(#[from] ChannelError),
    #[error("key `policy.kind`: {0}")]
    Policy(#[from] UnravelingError),
}

fn bad(key: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::BadValue {
        key,
        message: message.into(),
    }
}

/// Parsed but not yet interpreted scenario file.
#[derive(Debug, Clone, Default)]
pub struct ScenarioConfig {
    values: BTreeMap<String, String>,
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let stripped = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            }
            .trim();
            if stripped.is_empty() {
                continue;
            }
            let (key, value) = stripped.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                text: stripped.to_string(),
            })?;
            let key = key.trim();
            let value = value.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                });
            }
            if values
                .insert(key.to_string(), value.to_string())
                .is_some()
            {
                return Err(ConfigError::DuplicateKey {
                    line,
                    key: key.to_string(),
                });
            }
        }
        Ok(Self { values })
    }

    fn get(&self, key: &'static str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn require(&self, key: &'static str) -> Result<&str, ConfigError> {
        self.get(key).ok_or(ConfigError::MissingKey(key))
    }

    fn f64_value(&self, key: &'static str) -> Result<f64, ConfigError> {
        let raw = self.require(key)?;
        raw.parse()
            .map_err(|_| bad(key, format!("`{raw}` is not a number")))
    }

    fn f64_or(&self, key: &'static str, default: f64) -> Result<f64, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(raw) => raw
                .parse()
                .map_err(|_| bad(key, format!("`{raw}` is not a number"))),
        }
    }

    fn usize_value(&self, key: &'static str) -> Result<usize, ConfigError> {
        let raw = self.require(key)?;
        raw.parse()
            .map_err(|_| bad(key, format!("`{raw}` is not a non-negative integer")))
    }

    fn f64_list(&self, key: &'static str) -> Result<Vec<f64>, ConfigError> {
        let raw = self.require(key)?;
        raw.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|_| bad(key, format!("`{s}` is not a number")))
            })
            .collect()
    }

    pub fn seed(&self) -> Result<u64, ConfigError> {
        let raw = self.require("seed")?;
        raw.parse()
            .map_err(|_| bad("seed", format!("`{raw}` is not a u64")))
    }

    pub fn dt(&self) -> Result<f64, ConfigError> {
        self.f64_value("sim.dt")
    }

    pub fn t_final(&self) -> Result<f64, ConfigError> {
        self.f64_value("sim.t_final")
    }

    pub fn checkpoints(&self) -> Result<Vec<f64>, ConfigError> {
        let list = self.f64_list("sim.checkpoints")?;
        if list.is_empty() {
            return Err(bad("sim.checkpoints", "list is empty"));
        }
        Ok(list)
    }

    pub fn n_traj(&self) -> Result<usize, ConfigError> {
        self.usize_value("ensemble.n_traj")
    }

    pub fn n_states(&self) -> Result<usize, ConfigError> {
        self.usize_value("ensemble.n_states")
    }

    pub fn gamma(&self) -> Result<f64, ConfigError> {
        let g = self.f64_value("channel.gamma")?;
        if g <= 0.0 || !g.is_finite() {
            return Err(bad("channel.gamma", format!("rate must be positive, got {g}")));
        }
        Ok(g)
    }

    pub fn output_path(&self) -> Result<&str, ConfigError> {
        self.require("output.path")
    }

    pub fn output_path_opt(&self) -> Option<&str> {
        self.get("output.path")
    }

    pub fn record_states(&self) -> Result<bool, ConfigError> {
        match self.get("output.record_states") {
            None => Ok(false),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(other) => Err(bad(
                "output.record_states",
                format!("expected true or false, got `{other}`"),
            )),
        }
    }

    pub fn channel(&self) -> Result<LindbladChannel, ConfigError> {
        let gamma = self.gamma()?;
        let representation = || -> Result<InfTRepresentation, ConfigError> {
            match self.require("channel.representation")? {
                "raising_lowering" => Ok(InfTRepresentation::RaisingLowering),
                "hermitian_xy" => Ok(InfTRepresentation::HermitianXY),
                other => Err(bad(
                    "channel.representation",
                    format!("expected raising_lowering or hermitian_xy, got `{other}`"),
                )),
            }
        };
        let channel = match self.require("channel.kind")? {
            "dephasing" => LindbladChannel::dephasing(gamma)?,
            "amplitude_damping" => LindbladChannel::thermal(gamma, 0.0)?,
            "thermal" => LindbladChannel::thermal(gamma, self.f64_or("channel.nbar", 0.0)?)?,
            "infinite_temperature" => {
                LindbladChannel::infinite_temperature(gamma, representation()?)?
            }
            "depolarizing" => LindbladChannel::depolarizing(gamma)?,
            // Dephasing on qubit 1 plus a Hermitian x/y pair on qubit 2 at
            // the same rate: the two-channel protection demonstration.
            "dephasing_xy" => LindbladChannel::compose(&[
                LindbladChannel::dephasing_on(gamma, Qubit::One)?,
                LindbladChannel::infinite_temperature_on(
                    gamma,
                    InfTRepresentation::HermitianXY,
                    Qubit::Two,
                )?,
            ])?,
            other => {
                return Err(bad(
                    "channel.kind",
                    format!(
                        "expected one of dephasing, amplitude_damping, thermal, \
                         infinite_temperature, depolarizing, dephasing_xy; got `{other}`"
                    ),
                ))
            }
        };
        Ok(channel)
    }

    /// The configured optimal-bound sign, defaulting to plus when the key
    /// is absent.
    pub fn opt_sign_or_plus(&self) -> Result<OptSign, ConfigError> {
        if self.get("policy.sign").is_none() {
            return Ok(OptSign::Plus);
        }
        self.sign()
    }

    fn sign(&self) -> Result<OptSign, ConfigError> {
        match self.require("policy.sign")? {
            "plus" => Ok(OptSign::Plus),
            "minus" => Ok(OptSign::Minus),
            other => Err(bad(
                "policy.sign",
                format!("expected plus or minus, got `{other}`"),
            )),
        }
    }

    fn fixed_u(&self, dim: usize) -> Result<CorrelationMatrix, ConfigError> {
        let entries = self.f64_list("policy.fixed_u")?;
        if entries.len() != 2 * dim * dim {
            return Err(bad(
                "policy.fixed_u",
                format!(
                    "expected {} reals (re,im for each of {dim}x{dim} entries), got {}",
                    2 * dim * dim,
                    entries.len()
                ),
            ));
        }
        let mut u = DMatrix::<C64>::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                let k = 2 * (i * dim + j);
                u[(i, j)] = C64::new(entries[k], entries[k + 1]);
            }
        }
        Ok(CorrelationMatrix::new(u)?)
    }

    /// Build and validate the policy against the channel.
    pub fn policy(&self, channel: &LindbladChannel) -> Result<UnravelingPolicy, ConfigError> {
        let policy = match self.require("policy.kind")? {
            "fixed" => UnravelingPolicy::Fixed(self.fixed_u(channel.len())?),
            "protection" => UnravelingPolicy::Protection,
            "dephasing_opt" => UnravelingPolicy::DephasingOpt(self.sign()?),
            "zero_t_opt" => UnravelingPolicy::ZeroTOpt(self.sign()?),
            "inf_t_opt" => UnravelingPolicy::InfTOptPlus,
            "localized" => UnravelingPolicy::Localized,
            other => {
                return Err(bad(
                    "policy.kind",
                    format!(
                        "expected one of fixed, protection, dephasing_opt, zero_t_opt, \
                         inf_t_opt, localized; got `{other}`"
                    ),
                ))
            }
        };
        policy.validate(channel)?;
        Ok(policy)
    }

    /// Initial pure state: either fixed amplitudes or one Haar sample
    /// drawn from a dedicated substream of the master seed.
    pub fn initial_state(&self) -> Result<PureState, ConfigError> {
        match self.require("initial.kind")? {
            "fixed" => {
                let reals = self.f64_list("initial.amplitudes")?;
                if reals.len() != 8 {
                    return Err(bad(
                        "initial.amplitudes",
                        format!("expected 8 reals (re,im per amplitude), got {}", reals.len()),
                    ));
                }
                let v = Vector4::new(
                    C64::new(reals[0], reals[1]),
                    C64::new(reals[2], reals[3]),
                    C64::new(reals[4], reals[5]),
                    C64::new(reals[6], reals[7]),
                );
                PureState::new(v)
                    .map_err(|_| bad("initial.amplitudes", "amplitudes have zero norm"))
            }
            "haar" => {
                // substream far above any trajectory index
                let mut rng = split_rng(self.seed()?, u64::from(u32::MAX) + 2);
                Ok(haar_random_state(&mut rng))
            }
            other => Err(bad(
                "initial.kind",
                format!("expected fixed or haar, got `{other}`"),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::ChannelKind as CK;
    use approx::assert_abs_diff_eq;

    const BASE: &str = "\
channel.kind = dephasing
channel.gamma = 1.0
policy.kind = protection
initial.kind = fixed
initial.amplitudes = 1, 0, 0, 0, 0, 0, 0, 1   # Bell phi+
sim.dt = 0.001
sim.t_final = 1.0
sim.checkpoints = 0.5, 1.0
ensemble.n_traj = 10
seed = 42
output.path = out.csv
";

    #[test]
    fn round_trips_a_complete_scenario() {
        let cfg = ScenarioConfig::parse(BASE).unwrap();
        let channel = cfg.channel().unwrap();
        assert!(matches!(channel.kind(), CK::Dephasing));
        let policy = cfg.policy(&channel).unwrap();
        assert!(matches!(policy, UnravelingPolicy::Protection));
        let psi = cfg.initial_state().unwrap();
        assert_abs_diff_eq!(psi.a00().re, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_eq!(cfg.seed().unwrap(), 42);
        assert_eq!(cfg.checkpoints().unwrap(), vec![0.5, 1.0]);
        assert_eq!(cfg.n_traj().unwrap(), 10);
        assert!(!cfg.record_states().unwrap());
        assert_eq!(cfg.output_path().unwrap(), "out.csv");
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        let err = ScenarioConfig::parse("channel.knd = dephasing").unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey { line: 1, .. }));
        assert!(err.to_string().contains("channel.knd"));

        let err = ScenarioConfig::parse("seed = 1\nseed = 2").unwrap_err();
        assert!(matches!(err, ConfigError::DuplicateKey { line: 2, .. }));
    }

    #[test]
    fn missing_key_error_names_the_key() {
        let cfg = ScenarioConfig::parse("channel.gamma = 1.0").unwrap();
        let err = cfg.channel().unwrap_err();
        assert!(err.to_string().contains("channel.kind"), "{err}");
    }

    #[test]
    fn rejects_bad_values_with_key_names() {
        let cfg = ScenarioConfig::parse("channel.kind = dephasing\nchannel.gamma = -1").unwrap();
        let err = cfg.channel().unwrap_err();
        assert!(err.to_string().contains("channel.gamma"), "{err}");

        let cfg = ScenarioConfig::parse("seed = banana").unwrap();
        assert!(cfg.seed().is_err());
    }

    #[test]
    fn policy_validation_uses_the_channel() {
        // protection needs Hermitian local operators; amplitude damping fails
        let text = BASE.replace("channel.kind = dephasing", "channel.kind = amplitude_damping");
        let cfg = ScenarioConfig::parse(&text).unwrap();
        let channel = cfg.channel().unwrap();
        assert!(cfg.policy(&channel).is_err());
    }

    #[test]
    fn fixed_u_is_parsed_row_major() {
        let text = BASE.replace(
            "policy.kind = protection",
            "policy.kind = fixed\npolicy.fixed_u = 0,0, 0,1, 0,1, 0,0",
        );
        let cfg = ScenarioConfig::parse(&text).unwrap();
        let channel = cfg.channel().unwrap();
        let policy = cfg.policy(&channel).unwrap();
        match policy {
            UnravelingPolicy::Fixed(u) => {
                assert_eq!(u.matrix()[(0, 1)], C64::new(0.0, 1.0));
                assert_eq!(u.matrix()[(0, 0)], C64::new(0.0, 0.0));
            }
            other => panic!("expected fixed policy, got {other:?}"),
        }
    }

    #[test]
    fn haar_initial_is_seed_deterministic() {
        let text = BASE.replace(
            "initial.kind = fixed\ninitial.amplitudes = 1, 0, 0, 0, 0, 0, 0, 1   # Bell phi+",
            "initial.kind = haar",
        );
        let cfg = ScenarioConfig::parse(&text).unwrap();
        let a = cfg.initial_state().unwrap();
        let b = cfg.initial_state().unwrap();
        assert_eq!(a.amplitudes(), b.amplitudes());
        assert_abs_diff_eq!(a.amplitudes().norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn composite_protection_channel_builds() {
        let text = BASE.replace("channel.kind = dephasing", "channel.kind = dephasing_xy");
        let cfg = ScenarioConfig::parse(&text).unwrap();
        let channel = cfg.channel().unwrap();
        assert_eq!(channel.len(), 3);
        assert!(channel.all_hermitian());
        assert!(channel.all_local());
    }
}
