//! Monte Carlo orchestration: Haar-random initial states, parallel
//! trajectory batches with deterministic seeding, ensemble statistics at
//! checkpoint times, and the analytic bound-performance studies.
//!
//! Determinism contract: trajectory i uses noise substream i of the master
//! seed (see `trajectory::split_rng`), trajectories are collected in index
//! order, and the final reduction is sequential — so the statistics are
//! bit-identical for any worker count.

use crate::channels::LindbladChannel;
use crate::entanglement::eof_of_concurrence;
use crate::linalg::{DensityMatrix, LinalgError, PureState, C64};
use crate::oracle::{
    appendix_c_dephasing, appendix_c_zero_t, dephasing_bounds, state_parameters, zero_t_bounds,
    OracleError,
};
use crate::trajectory::{self, TrajectoryConfig, TrajectoryError};
use crate::unraveling::{OptSign, UnravelingPolicy};
use nalgebra::{Matrix4, Vector4};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

pub const HISTOGRAM_BINS: usize = 64;

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("trajectory {index} failed: {source}")]
    Trajectory {
        index: usize,
        source: TrajectoryError,
    },
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("invalid ensemble configuration: {0}")]
    InvalidConfig(String),
    #[error("bound violated at t = {t}: exact = {exact}, bound = {bound}")]
    BoundViolation { t: f64, exact: f64, bound: f64 },
}

/// Uniform (Haar) random pure state: four i.i.d. standard complex Gaussian
/// amplitudes, normalized.
pub fn haar_random_state(rng: &mut impl Rng) -> PureState {
    let mut v = Vector4::zeros();
    for i in 0..4 {
        v[i] = C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
    }
    PureState::new(v).expect("Gaussian vector has nonzero norm")
}

#[derive(Debug, Clone)]
pub struct EnsembleConfig {
    /// Template trajectory; `stream` and `record_*` fields are managed by
    /// the ensemble runner.
    pub base: TrajectoryConfig,
    pub n_traj: usize,
    /// Times at which statistics are computed; must sit on the dt grid.
    pub checkpoints: Vec<f64>,
}

/// Statistics of the conditional-state ensemble at one checkpoint.
#[derive(Debug, Clone)]
pub struct CheckpointStats {
    pub t: f64,
    pub mean_c: f64,
    pub se_c: f64,
    pub var_c: f64,
    pub mean_eof: f64,
    pub histogram: Vec<u64>,
    /// rho(t) = E[|psi><psi|] reconstructed from the ensemble.
    pub rho: DensityMatrix,
    /// Frobenius norm of the entrywise standard-error matrix of rho.
    pub rho_se: f64,
}

#[derive(Debug, Clone)]
pub struct EnsembleStats {
    pub checkpoints: Vec<CheckpointStats>,
    pub n_traj: usize,
    pub fallback_events: usize,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Map checkpoint times to step indices, validating grid alignment.
fn checkpoint_steps(config: &EnsembleConfig) -> Result<Vec<usize>, EnsembleError> {
    let dt = config.base.dt;
    let n_steps = config.base.n_steps();
    config
        .checkpoints
        .iter()
        .map(|&t| {
            if t < 0.0 || t > config.base.t_final + 0.5 * dt {
                return Err(EnsembleError::InvalidConfig(format!(
                    "checkpoint {t} outside [0, t_final]"
                )));
            }
            let steps = t / dt;
            if (steps - steps.round()).abs() > 1e-6 {
                return Err(EnsembleError::InvalidConfig(format!(
                    "checkpoint {t} is not a multiple of dt = {dt}"
                )));
            }
            Ok((steps.round() as usize).min(n_steps))
        })
        .collect()
}

struct TrajSummary {
    /// (concurrence, eof, projector) per checkpoint.
    obs: Vec<(f64, f64, Matrix4<C64>)>,
    fallbacks: usize,
}

/// Run `n_traj` trajectories from the shared initial state and aggregate
/// observables at the checkpoint times.
pub fn run_ensemble(config: &EnsembleConfig) -> Result<EnsembleStats, EnsembleError> {
    if config.n_traj == 0 {
        return Err(EnsembleError::InvalidConfig("n_traj must be >= 1".into()));
    }
    if config.checkpoints.is_empty() {
        return Err(EnsembleError::InvalidConfig(
            "at least one checkpoint required".into(),
        ));
    }
    let steps = checkpoint_steps(config)?;
    let stride = steps
        .iter()
        .filter(|&&s| s > 0)
        .fold(0, |acc, &s| gcd(acc, s))
        .max(1);

    let summaries: Vec<TrajSummary> = (0..config.n_traj)
        .into_par_iter()
        .map(|i| -> Result<TrajSummary, EnsembleError> {
            let mut traj_config = config.base.clone();
            traj_config.stream = i as u64;
            traj_config.record_stride = stride;
            traj_config.record_states = true;
            traj_config.record_currents = false;
            let record = trajectory::run(&traj_config)
                .map_err(|source| EnsembleError::Trajectory { index: i, source })?;
            let states = record.states.as_ref().expect("states were recorded");
            let obs = steps
                .iter()
                .map(|&s| {
                    let idx = s / stride;
                    (
                        record.concurrence[idx],
                        record.eof[idx],
                        states[idx].projector(),
                    )
                })
                .collect();
            Ok(TrajSummary {
                obs,
                fallbacks: record.fallback_events,
            })
        })
        .collect::<Result<_, _>>()?;

    // Sequential reduction in trajectory order: worker-count independent.
    let n = config.n_traj as f64;
    let mut stats = Vec::with_capacity(steps.len());
    for (ci, &step) in steps.iter().enumerate() {
        let t = step as f64 * config.base.dt;
        let mut sum_c = 0.0;
        let mut sumsq_c = 0.0;
        let mut sum_eof = 0.0;
        let mut histogram = vec![0u64; HISTOGRAM_BINS];
        let mut sum_proj = Matrix4::<C64>::zeros();
        let mut sumsq_entries = [[0.0f64; 4]; 4];
        for summary in &summaries {
            let (c, eof, proj) = &summary.obs[ci];
            sum_c += c;
            sumsq_c += c * c;
            sum_eof += eof;
            let bin = ((c * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1);
            histogram[bin] += 1;
            sum_proj += proj;
            for i in 0..4 {
                for j in 0..4 {
                    sumsq_entries[i][j] += proj[(i, j)].norm_sqr();
                }
            }
        }
        let mean_c = sum_c / n;
        let var_c = if config.n_traj > 1 {
            ((sumsq_c - n * mean_c * mean_c) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        let mean_proj = sum_proj / C64::from(n);
        let mut se2 = 0.0;
        if config.n_traj > 1 {
            for i in 0..4 {
                for j in 0..4 {
                    let var = ((sumsq_entries[i][j] - n * mean_proj[(i, j)].norm_sqr())
                        / (n - 1.0))
                        .max(0.0);
                    se2 += var / n;
                }
            }
        }
        stats.push(CheckpointStats {
            t,
            mean_c,
            se_c: (var_c / n).sqrt(),
            var_c,
            mean_eof: sum_eof / n,
            histogram,
            rho: DensityMatrix::repaired(mean_proj)?,
            rho_se: se2.sqrt(),
        });
    }
    Ok(EnsembleStats {
        checkpoints: stats,
        n_traj: config.n_traj,
        fallback_events: summaries.iter().map(|s| s.fallbacks).sum(),
    })
}

/// Channel family selector for the analytic bound-performance studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyChannel {
    Dephasing,
    ZeroT,
}

/// One sampled initial state at one time: the exact unconditional value
/// against the extremal-unraveling bound. For sign +, exact is C(rho) and
/// ratio = exact/bound; for sign -, exact is C_A(rho) and ratio =
/// bound/exact. Both ratios live in [0, 1] (1 = tight).
#[derive(Debug, Clone, Copy)]
pub struct StudyRow {
    pub t: f64,
    pub c0: f64,
    pub exact: f64,
    pub bound: f64,
    pub ratio: f64,
}

/// Compare the closed-form exact entanglement of the unconditional state
/// against the extremal bound curves over Haar-random initial states.
/// Errors on any bound violation beyond 1e-9 (the curves are analytic).
pub fn bound_performance_study(
    channel: StudyChannel,
    sign: OptSign,
    gamma: f64,
    times: &[f64],
    n_states: usize,
    seed: u64,
) -> Result<Vec<StudyRow>, EnsembleError> {
    if gamma <= 0.0 {
        return Err(EnsembleError::InvalidConfig(format!(
            "rate must be positive, got {gamma}"
        )));
    }
    let mut rng = trajectory::split_rng(seed, u64::from(u32::MAX) + 1);
    let mut rows = Vec::with_capacity(n_states * times.len());
    for _ in 0..n_states {
        let psi = haar_random_state(&mut rng);
        let p = state_parameters(&psi);
        for &t in times {
            let (exact_c, exact_ca) = match channel {
                StudyChannel::Dephasing => appendix_c_dephasing(p.c0, p.x0, p.w0, gamma, t),
                StudyChannel::ZeroT => appendix_c_zero_t(p.c0, p.p11, gamma, t),
            };
            let bound = match channel {
                StudyChannel::Dephasing => dephasing_bounds(p.c0, p.x0, gamma, sign, t)?,
                StudyChannel::ZeroT => zero_t_bounds(p.c0, p.p11, gamma, sign, t),
            };
            let (exact, ratio) = match sign {
                OptSign::Plus => {
                    if exact_c > bound + 1e-9 {
                        return Err(EnsembleError::BoundViolation {
                            t,
                            exact: exact_c,
                            bound,
                        });
                    }
                    let ratio = if bound <= 1e-12 { 1.0 } else { exact_c / bound };
                    (exact_c, ratio)
                }
                OptSign::Minus => {
                    if exact_ca < bound - 1e-9 {
                        return Err(EnsembleError::BoundViolation {
                            t,
                            exact: exact_ca,
                            bound,
                        });
                    }
                    let ratio = if exact_ca <= 1e-12 {
                        1.0
                    } else {
                        bound / exact_ca
                    };
                    (exact_ca, ratio)
                }
            };
            rows.push(StudyRow {
                t,
                c0: p.c0,
                exact,
                bound,
                ratio,
            });
        }
    }
    Ok(rows)
}

/// Empirical CDF of the tightness ratios at one study time, on a uniform
/// grid over [0, 1].
pub fn ratio_cdf(rows: &[StudyRow], t: f64, grid: usize) -> Vec<(f64, f64)> {
    let ratios: Vec<f64> = rows
        .iter()
        .filter(|r| (r.t - t).abs() < 1e-12)
        .map(|r| r.ratio)
        .collect();
    let n = ratios.len().max(1) as f64;
    (0..=grid)
        .map(|i| {
            let x = i as f64 / grid as f64;
            let count = ratios.iter().filter(|&&r| r <= x).count();
            (x, count as f64 / n)
        })
        .collect()
}

/// Fraction of sampled states whose tightness ratio is at least
/// `threshold` at time t (e.g. 0.8 = error below 20%).
pub fn fraction_at_least(rows: &[StudyRow], t: f64, threshold: f64) -> f64 {
    let at_t: Vec<&StudyRow> = rows.iter().filter(|r| (r.t - t).abs() < 1e-12).collect();
    if at_t.is_empty() {
        return 0.0;
    }
    at_t.iter().filter(|r| r.ratio >= threshold).count() as f64 / at_t.len() as f64
}

/// Per-checkpoint spread of the concurrence distribution under a
/// localizing policy.
#[derive(Debug, Clone, Copy)]
pub struct LocalizationRow {
    pub t: f64,
    pub mean_c: f64,
    pub var_c: f64,
    pub mean_eof: f64,
    /// |mean EoF - h((1 + sqrt(1 - mean_C^2))/2)|: zero iff the ensemble
    /// EoF is a function of the (deterministic) ensemble concurrence.
    pub eof_gap: f64,
}

/// Variance report for the localization property of the protection and
/// localized unravelings.
pub fn localization_study(
    config: &EnsembleConfig,
) -> Result<Vec<LocalizationRow>, EnsembleError> {
    if !matches!(
        config.base.policy,
        UnravelingPolicy::Protection | UnravelingPolicy::Localized
    ) {
        return Err(EnsembleError::InvalidConfig(
            "localization study requires the protection or localized policy".into(),
        ));
    }
    let stats = run_ensemble(config)?;
    Ok(stats
        .checkpoints
        .iter()
        .map(|cp| LocalizationRow {
            t: cp.t,
            mean_c: cp.mean_c,
            var_c: cp.var_c,
            mean_eof: cp.mean_eof,
            eof_gap: (cp.mean_eof - eof_of_concurrence(cp.mean_c)).abs(),
        })
        .collect())
}

/// Convenience: equal-rate channel/policy scenario builders used by tests
/// and the CLI share this default trajectory template.
pub fn base_trajectory(
    initial_state: PureState,
    channel: LindbladChannel,
    policy: UnravelingPolicy,
    dt: f64,
    t_final: f64,
    seed: u64,
) -> TrajectoryConfig {
    TrajectoryConfig {
        initial_state,
        channel,
        policy,
        dt,
        t_final,
        seed,
        stream: 0,
        record_stride: 1,
        record_states: false,
        record_currents: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{InfTRepresentation, LindbladChannel};
    use crate::entanglement::concurrence;
    use crate::linalg::{c, embed, Qubit};
    use crate::unraveling::CorrelationMatrix;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn haar_states_are_normalized_and_centered() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let n = 100_000;
        let mut mean = Vector4::<C64>::zeros();
        for _ in 0..n {
            let psi = haar_random_state(&mut rng);
            assert_abs_diff_eq!(psi.amplitudes().norm(), 1.0, epsilon = 1e-12);
            mean += psi.amplitudes();
        }
        let tol = 5.0 / (n as f64).sqrt();
        for i in 0..4 {
            assert_abs_diff_eq!((mean[i] / C64::from(n as f64)).norm(), 0.0, epsilon = tol);
        }
    }

    /// Two-sample Kolmogorov-Smirnov statistic.
    fn ks_statistic(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let (n, m) = (a.len(), b.len());
        let mut d: f64 = 0.0;
        let (mut i, mut j) = (0, 0);
        while i < n && j < m {
            if a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
            d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
        }
        d
    }

    #[test]
    fn haar_concurrence_distribution_is_locally_unitary_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        let n = 10_000;
        // fixed local unitary: (phase-mixed x rotation) on each qubit
        let theta: f64 = 0.7;
        let rot = nalgebra::Matrix2::new(
            c(theta.cos(), 0.0),
            c(0.0, theta.sin()),
            c(0.0, theta.sin()),
            c(theta.cos(), 0.0),
        );
        let full = embed(&rot, Qubit::One) * embed(&rot, Qubit::Two);
        let mut plain = Vec::with_capacity(n);
        let mut rotated = Vec::with_capacity(n);
        for _ in 0..n {
            let a = haar_random_state(&mut rng);
            plain.push(concurrence(&a));
            let b = haar_random_state(&mut rng);
            rotated.push(concurrence(
                &PureState::new(full * b.amplitudes()).unwrap(),
            ));
        }
        let d = ks_statistic(plain, rotated);
        // 1% critical value for the two-sample statistic
        let critical = 1.628 * ((2.0 * n as f64) / (n as f64 * n as f64)).sqrt();
        assert!(d < critical, "KS = {d:.4}, critical = {critical:.4}");
    }

    #[test]
    fn single_trajectory_ensemble_reduces_to_the_trajectory() {
        let base = base_trajectory(
            PureState::protection_figure_state(),
            LindbladChannel::thermal(1.0, 0.0).unwrap(),
            UnravelingPolicy::Fixed(CorrelationMatrix::heterodyne(2)),
            1e-3,
            0.5,
            99,
        );
        let config = EnsembleConfig {
            base: base.clone(),
            n_traj: 1,
            checkpoints: vec![0.0, 0.25, 0.5],
        };
        let stats = run_ensemble(&config).unwrap();

        let mut traj_config = base;
        traj_config.record_stride = 250;
        traj_config.record_states = false;
        let record = trajectory::run(&traj_config).unwrap();

        for (cp, (cv, eof)) in stats
            .checkpoints
            .iter()
            .zip(record.concurrence.iter().zip(&record.eof))
        {
            assert_eq!(cp.mean_c, *cv);
            assert_eq!(cp.mean_eof, *eof);
            assert_eq!(cp.se_c, 0.0);
            assert_eq!(cp.var_c, 0.0);
            assert_eq!(cp.histogram.iter().sum::<u64>(), 1);
        }
    }

    #[test]
    fn ensemble_is_deterministic_across_worker_counts() {
        let config = EnsembleConfig {
            base: base_trajectory(
                PureState::bell_psi_plus(),
                LindbladChannel::thermal(1.0, 0.0).unwrap(),
                UnravelingPolicy::ZeroTOpt(OptSign::Plus),
                1e-3,
                0.2,
                7,
            ),
            n_traj: 64,
            checkpoints: vec![0.1, 0.2],
        };
        let run_with = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_ensemble(&config).unwrap())
        };
        let a = run_with(1);
        let b = run_with(4);
        for (x, y) in a.checkpoints.iter().zip(&b.checkpoints) {
            assert_eq!(x.mean_c.to_bits(), y.mean_c.to_bits());
            assert_eq!(x.var_c.to_bits(), y.var_c.to_bits());
            assert_eq!(x.histogram, y.histogram);
            assert_eq!(x.rho.matrix(), y.rho.matrix());
        }
    }

    #[test]
    fn partial_protection_decays_at_twice_the_rate() {
        // dephasing on qubit 1 kept protected (u = -1), hermitian-xy pair
        // on qubit 2 monitored with diag(-1, 1): k = 2 gamma.
        let gamma = 1.0;
        let channel = LindbladChannel::compose(&[
            LindbladChannel::dephasing_on(gamma, Qubit::One).unwrap(),
            LindbladChannel::infinite_temperature_on(
                gamma,
                InfTRepresentation::HermitianXY,
                Qubit::Two,
            )
            .unwrap(),
        ])
        .unwrap();
        let mut u = DMatrix::<C64>::zeros(3, 3);
        u[(0, 0)] = c(-1.0, 0.0);
        u[(1, 1)] = c(-1.0, 0.0);
        u[(2, 2)] = c(1.0, 0.0);
        let cu = CorrelationMatrix::new(u).unwrap();
        assert_abs_diff_eq!(
            crate::entanglement::k_of_u(&channel, &cu).unwrap(),
            2.0 * gamma,
            epsilon = 1e-12
        );
        let config = EnsembleConfig {
            base: base_trajectory(
                PureState::protection_figure_state(),
                channel,
                UnravelingPolicy::Fixed(cu),
                1e-3,
                1.0,
                11,
            ),
            n_traj: 200,
            checkpoints: vec![0.5, 1.0],
        };
        let stats = run_ensemble(&config).unwrap();
        let c0 = concurrence(&PureState::protection_figure_state());
        for cp in &stats.checkpoints {
            let expected = c0 * (-2.0 * gamma * cp.t).exp();
            assert!(
                (cp.mean_c - expected).abs() < 3.0 * cp.se_c.max(1e-4),
                "t = {}: mean = {}, expected = {}, se = {}",
                cp.t,
                cp.mean_c,
                expected,
                cp.se_c
            );
        }
    }

    #[test]
    fn study_has_no_violations_and_zero_t_is_tight() {
        let times = [0.25, 1.0];
        let rows = bound_performance_study(
            StudyChannel::Dephasing,
            OptSign::Plus,
            1.0,
            &times,
            500,
            5,
        )
        .unwrap();
        assert_eq!(rows.len(), 1000);
        assert!(rows.iter().all(|r| r.ratio <= 1.0 + 1e-9));

        let rows =
            bound_performance_study(StudyChannel::ZeroT, OptSign::Plus, 1.0, &times, 500, 5)
                .unwrap();
        // exactness: the zero-T plus bound is the exact concurrence
        for r in &rows {
            assert_abs_diff_eq!(r.exact, r.bound, epsilon = 1e-12);
        }

        let cdf = ratio_cdf(&rows, 1.0, 10);
        assert_eq!(cdf.len(), 11);
        assert_abs_diff_eq!(cdf[10].1, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fraction_at_least(&rows, 1.0, 0.8), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn localization_study_on_protection() {
        let config = EnsembleConfig {
            base: base_trajectory(
                PureState::protection_figure_state(),
                LindbladChannel::dephasing(1.0).unwrap(),
                UnravelingPolicy::Protection,
                1e-3,
                0.5,
                13,
            ),
            n_traj: 50,
            checkpoints: vec![0.25, 0.5],
        };
        let rows = localization_study(&config).unwrap();
        let c0 = concurrence(&PureState::protection_figure_state());
        for row in &rows {
            assert_abs_diff_eq!(row.mean_c, c0, epsilon = 5e-3);
            assert!(row.var_c < 1e-4, "var = {}", row.var_c);
        }
        // policy gate
        let mut bad = config;
        bad.base.policy = UnravelingPolicy::Fixed(CorrelationMatrix::heterodyne(2));
        assert!(localization_study(&bad).is_err());
    }

    #[test]
    fn checkpoints_must_sit_on_the_grid() {
        let config = EnsembleConfig {
            base: base_trajectory(
                PureState::bell_phi_plus(),
                LindbladChannel::dephasing(1.0).unwrap(),
                UnravelingPolicy::Protection,
                1e-3,
                1.0,
                1,
            ),
            n_traj: 2,
            checkpoints: vec![0.0005],
        };
        assert!(matches!(
            run_ensemble(&config),
            Err(EnsembleError::InvalidConfig(_))
        ));
    }
}
