//! Deterministic references for the stochastic machinery: a Runge-Kutta
//! integrator for the unconditional Lindblad master equation, and the
//! closed-form concurrence curves (exponential decay, extremal-unraveling
//! bounds for dephasing / zero- and infinite-temperature damping, and the
//! exact pure-initial-state solutions).

use crate::channels::LindbladChannel;
use crate::linalg::{DensityMatrix, LinalgError, PureState, C64};
use crate::unraveling::OptSign;
use nalgebra::Matrix4;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("invalid oracle parameters: {0}")]
    InvalidParameters(String),
    #[error("trace drifted by {0:.3e} during master-equation integration")]
    TraceDrift(f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Configuration for the unconditional master-equation flow.
#[derive(Debug, Clone)]
pub struct MasterConfig {
    pub initial: DensityMatrix,
    pub channel: LindbladChannel,
    pub dt: f64,
    pub t_final: f64,
}

/// Right-hand side of drho/dt = sum_k (J rho J^dag - 1/2 {J^dag J, rho}).
fn lindblad_rhs(rho: &Matrix4<C64>, channel: &LindbladChannel) -> Matrix4<C64> {
    let mut out = Matrix4::zeros();
    for op in channel.operators() {
        let j = &op.full;
        let jd = j.adjoint();
        let jdj = jd * j;
        out += j * rho * jd - (jdj * rho + rho * jdj) * C64::from(0.5);
    }
    out
}

/// Classical fixed-step RK4 flow of the master equation. Returns the state
/// at every step including t = 0; Hermiticity and trace are repaired after
/// each step, with the pre-repair trace drift bounded by 1e-8.
pub fn integrate_master(
    config: &MasterConfig,
) -> Result<Vec<(f64, DensityMatrix)>, OracleError> {
    if !(config.dt > 0.0) || config.t_final < config.dt {
        return Err(OracleError::InvalidParameters(format!(
            "dt = {}, t_final = {}",
            config.dt, config.t_final
        )));
    }
    if config.dt * config.channel.max_rate() > 0.01 {
        return Err(OracleError::InvalidParameters(format!(
            "dt * max_rate = {:.3e} exceeds 0.01",
            config.dt * config.channel.max_rate()
        )));
    }
    let n_steps = (config.t_final / config.dt).round().max(1.0) as usize;
    let dt = config.dt;
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push((0.0, config.initial));
    let mut rho = *config.initial.matrix();
    for step in 1..=n_steps {
        let k1 = lindblad_rhs(&rho, &config.channel);
        let k2 = lindblad_rhs(&(rho + k1 * C64::from(0.5 * dt)), &config.channel);
        let k3 = lindblad_rhs(&(rho + k2 * C64::from(0.5 * dt)), &config.channel);
        let k4 = lindblad_rhs(&(rho + k3 * C64::from(dt)), &config.channel);
        rho += (k1 + (k2 + k3) * C64::from(2.0) + k4) * C64::from(dt / 6.0);
        let drift = (rho.trace() - C64::from(1.0)).norm();
        if drift > 1e-8 {
            return Err(OracleError::TraceDrift(drift));
        }
        let repaired = DensityMatrix::repaired(rho)?;
        rho = *repaired.matrix();
        out.push((step as f64 * dt, repaired));
    }
    Ok(out)
}

/// Master-equation state at specific times (nearest grid point; the grid
/// is fine enough that no interpolation is needed).
pub fn master_at_times(
    initial: &DensityMatrix,
    channel: &LindbladChannel,
    dt: f64,
    times: &[f64],
) -> Result<Vec<DensityMatrix>, OracleError> {
    let t_final = times.iter().cloned().fold(0.0, f64::max).max(dt);
    let series = integrate_master(&MasterConfig {
        initial: *initial,
        channel: channel.clone(),
        dt,
        t_final,
    })?;
    Ok(times
        .iter()
        .map(|&t| {
            let idx = (t / dt).round() as usize;
            series[idx.min(series.len() - 1)].1
        })
        .collect())
}

/// C0 e^{-k t}: average concurrence under local monitoring of local
/// channels.
pub fn exponential_bound(c0: f64, k: f64, t: f64) -> f64 {
    c0 * (-k * t).exp()
}

/// Extremal-unraveling concurrence curves for the two-qubit dephasing
/// channel:  max{0, C0 (1+e^{-gt})/2 -+ X0 (1-e^{-gt})/2}.
pub fn dephasing_bounds(
    c0: f64,
    x0: f64,
    gamma: f64,
    sign: OptSign,
    t: f64,
) -> Result<f64, OracleError> {
    if !(0.0..=1.0 + 1e-12).contains(&c0) || c0 > x0 + 1e-12 || x0 > 1.0 + 1e-12 {
        return Err(OracleError::InvalidParameters(format!(
            "need 0 <= C0 <= X0 <= 1, got C0 = {c0}, X0 = {x0}"
        )));
    }
    let e = (-gamma * t).exp();
    let s = match sign {
        OptSign::Plus => 1.0,
        OptSign::Minus => -1.0,
    };
    Ok((0.5 * c0 * (1.0 + e) - s * 0.5 * x0 * (1.0 - e)).max(0.0))
}

/// Time at which the plus-branch dephasing curve reaches zero; infinite
/// when X0 <= C0 (the curve never vanishes).
pub fn dephasing_separability_time(c0: f64, x0: f64, gamma: f64) -> f64 {
    if x0 <= c0 {
        f64::INFINITY
    } else {
        -((x0 - c0) / (x0 + c0)).ln() / gamma
    }
}

/// Extremal curves for amplitude damping (zero-temperature bath):
/// max{0, e^{-gt}(C0 -+ 2 p11 (1 - e^{-gt}))}, p11 = |psi11(0)|^2.
pub fn zero_t_bounds(c0: f64, p11: f64, gamma: f64, sign: OptSign, t: f64) -> f64 {
    let e = (-gamma * t).exp();
    let s = match sign {
        OptSign::Plus => 1.0,
        OptSign::Minus => -1.0,
    };
    (e * (c0 - s * 2.0 * p11 * (1.0 - e))).max(0.0)
}

/// Minimizing curve for the infinite-temperature bath from a Bell-class
/// state: max{0, e^{-2 G t}(C0 - sinh(2 G t))}.
pub fn inf_t_bell_bound(c0: f64, big_gamma: f64, t: f64) -> f64 {
    let x = 2.0 * big_gamma * t;
    ((-x).exp() * (c0 - x.sinh())).max(0.0)
}

/// Separability time of `inf_t_bell_bound`: arcsinh(C0)/(2 G).
pub fn inf_t_separability_time(c0: f64, big_gamma: f64) -> f64 {
    c0.asinh() / (2.0 * big_gamma)
}

/// Exact (C, C_A) of the unconditional state under two-qubit dephasing
/// from a pure initial state:
///   C   = max{0, (-(1-e) X0 + sqrt((1-e)^2 W0^2 + 4 e C0^2)) / 2}
///   C_A =        ( (1-e) X0 + sqrt((1-e)^2 X0^2 + 4 e C0^2)) / 2
/// with e = e^{-gt}.
pub fn appendix_c_dephasing(c0: f64, x0: f64, w0: f64, gamma: f64, t: f64) -> (f64, f64) {
    let e = (-gamma * t).exp();
    let om = 1.0 - e;
    let c = 0.5 * (-om * x0 + (om * om * w0 * w0 + 4.0 * e * c0 * c0).sqrt());
    let ca = 0.5 * (om * x0 + (om * om * x0 * x0 + 4.0 * e * c0 * c0).sqrt());
    (c.max(0.0), ca)
}

/// Exact (C, C_A) of the unconditional state under amplitude damping from
/// a pure initial state:
///   C   = max{0, e^{-gt}(C0 - 2 p11 (1-e^{-gt}))}
///   C_A =        e^{-gt}(2 p11 (1-e^{-gt}) + sqrt(4 p11^2 (1-e^{-gt})^2 + C0^2))
pub fn appendix_c_zero_t(c0: f64, p11: f64, gamma: f64, t: f64) -> (f64, f64) {
    let e = (-gamma * t).exp();
    let q = 2.0 * p11 * (1.0 - e);
    let c = (e * (c0 - q)).max(0.0);
    let ca = e * (q + (q * q + c0 * c0).sqrt());
    (c, ca)
}

/// Initial-state parameters entering every closed-form curve.
#[derive(Debug, Clone, Copy)]
pub struct StateParams {
    pub c0: f64,
    pub x0: f64,
    pub w0: f64,
    pub p11: f64,
}

pub fn state_parameters(psi: &PureState) -> StateParams {
    StateParams {
        c0: crate::entanglement::concurrence(psi),
        x0: crate::entanglement::x_function(psi),
        w0: crate::entanglement::w_function(psi),
        p11: psi.a11().norm_sqr(),
    }
}

/// A labelled analytic curve t -> value, as emitted by the CLI.
#[derive(Debug, Clone)]
pub enum BoundCurve {
    ExpLocal { c0: f64, k: f64 },
    DephasingPlus { c0: f64, x0: f64, gamma: f64 },
    DephasingMinus { c0: f64, x0: f64, gamma: f64 },
    ZeroTPlus { c0: f64, p11: f64, gamma: f64 },
    ZeroTMinus { c0: f64, p11: f64, gamma: f64 },
    InfTBellPlus { c0: f64, big_gamma: f64 },
    AppCDephasingC { c0: f64, x0: f64, w0: f64, gamma: f64 },
    AppCDephasingCA { c0: f64, x0: f64, w0: f64, gamma: f64 },
    AppCZeroTC { c0: f64, p11: f64, gamma: f64 },
    AppCZeroTCA { c0: f64, p11: f64, gamma: f64 },
}

impl BoundCurve {
    pub fn label(&self) -> &'static str {
        match self {
            BoundCurve::ExpLocal { .. } => "exp_local",
            BoundCurve::DephasingPlus { .. } => "dephasing_plus",
            BoundCurve::DephasingMinus { .. } => "dephasing_minus",
            BoundCurve::ZeroTPlus { .. } => "zeroT_plus",
            BoundCurve::ZeroTMinus { .. } => "zeroT_minus",
            BoundCurve::InfTBellPlus { .. } => "infT_bell_plus",
            BoundCurve::AppCDephasingC { .. } => "appC_dephasing_C",
            BoundCurve::AppCDephasingCA { .. } => "appC_dephasing_CA",
            BoundCurve::AppCZeroTC { .. } => "appC_zeroT_C",
            BoundCurve::AppCZeroTCA { .. } => "appC_zeroT_CA",
        }
    }

    pub fn value(&self, t: f64) -> Result<f64, OracleError> {
        Ok(match *self {
            BoundCurve::ExpLocal { c0, k } => exponential_bound(c0, k, t),
            BoundCurve::DephasingPlus { c0, x0, gamma } => {
                dephasing_bounds(c0, x0, gamma, OptSign::Plus, t)?
            }
            BoundCurve::DephasingMinus { c0, x0, gamma } => {
                dephasing_bounds(c0, x0, gamma, OptSign::Minus, t)?
            }
            BoundCurve::ZeroTPlus { c0, p11, gamma } => {
                zero_t_bounds(c0, p11, gamma, OptSign::Plus, t)
            }
            BoundCurve::ZeroTMinus { c0, p11, gamma } => {
                zero_t_bounds(c0, p11, gamma, OptSign::Minus, t)
            }
            BoundCurve::InfTBellPlus { c0, big_gamma } => inf_t_bell_bound(c0, big_gamma, t),
            BoundCurve::AppCDephasingC { c0, x0, w0, gamma } => {
                appendix_c_dephasing(c0, x0, w0, gamma, t).0
            }
            BoundCurve::AppCDephasingCA { c0, x0, w0, gamma } => {
                appendix_c_dephasing(c0, x0, w0, gamma, t).1
            }
            BoundCurve::AppCZeroTC { c0, p11, gamma } => appendix_c_zero_t(c0, p11, gamma, t).0,
            BoundCurve::AppCZeroTCA { c0, p11, gamma } => appendix_c_zero_t(c0, p11, gamma, t).1,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::InfTRepresentation;
    use crate::ensemble::haar_random_state;
    use crate::entanglement::wootters_concurrence;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn master_starts_at_initial_projector() {
        let rho0 = DensityMatrix::from_pure(&PureState::bell_phi_plus());
        let series = integrate_master(&MasterConfig {
            initial: rho0,
            channel: LindbladChannel::dephasing(1.0).unwrap(),
            dt: 1e-3,
            t_final: 0.01,
        })
        .unwrap();
        assert_eq!(series[0].0, 0.0);
        assert_abs_diff_eq!(
            (series[0].1.matrix() - rho0.matrix()).norm(),
            0.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn infinite_temperature_relaxes_to_maximally_mixed() {
        let series = integrate_master(&MasterConfig {
            initial: DensityMatrix::from_pure(&PureState::ket00()),
            channel: LindbladChannel::infinite_temperature(
                1.0,
                InfTRepresentation::RaisingLowering,
            )
            .unwrap(),
            dt: 1e-3,
            t_final: 10.0,
        })
        .unwrap();
        let last = series.last().unwrap().1;
        assert_abs_diff_eq!(
            (last.matrix() - DensityMatrix::maximally_mixed().matrix()).norm(),
            0.0,
            epsilon = 1e-6
        );
    }

    #[test]
    fn dephasing_master_concurrence_is_exponential() {
        let gamma = 1.0;
        let series = integrate_master(&MasterConfig {
            initial: DensityMatrix::from_pure(&PureState::bell_phi_plus()),
            channel: LindbladChannel::dephasing(gamma).unwrap(),
            dt: 1e-3,
            t_final: 2.0,
        })
        .unwrap();
        for idx in [0, 500, 1000, 2000] {
            let (t, rho) = &series[idx];
            assert_abs_diff_eq!(
                wootters_concurrence(rho),
                (-gamma * t).exp(),
                epsilon = 1e-6
            );
        }
    }

    #[test]
    fn exponential_bound_examples() {
        assert_eq!(exponential_bound(0.7, 0.0, 5.0), 0.7);
        assert_abs_diff_eq!(exponential_bound(1.0, 1.0, 2.0), (-2.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(
            exponential_bound(0.5, 4.0 * 0.8, 1.0),
            0.5 * (-3.2f64).exp(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn dephasing_bounds_examples() {
        let (c0, x0, g) = (0.4, 0.7, 1.0);
        for sign in [OptSign::Plus, OptSign::Minus] {
            assert_abs_diff_eq!(
                dephasing_bounds(c0, x0, g, sign, 0.0).unwrap(),
                c0,
                epsilon = 1e-12
            );
        }
        // degenerate X0 = C0: plus branch is exponential, minus is constant
        for t in [0.0, 0.5, 2.0] {
            assert_abs_diff_eq!(
                dephasing_bounds(c0, c0, g, OptSign::Plus, t).unwrap(),
                c0 * (-g * t).exp(),
                epsilon = 1e-12
            );
            assert_abs_diff_eq!(
                dephasing_bounds(c0, c0, g, OptSign::Minus, t).unwrap(),
                c0,
                epsilon = 1e-12
            );
        }
        // asymptotics of the minus branch
        assert_abs_diff_eq!(
            dephasing_bounds(c0, x0, g, OptSign::Minus, 1e3).unwrap(),
            0.5 * (c0 + x0),
            epsilon = 1e-12
        );
        // plus branch hits zero exactly at the separability time
        let ts = dephasing_separability_time(c0, x0, g);
        assert_abs_diff_eq!(
            dephasing_bounds(c0, x0, g, OptSign::Plus, ts).unwrap(),
            0.0,
            epsilon = 1e-12
        );
        assert!(dephasing_bounds(0.8, 0.5, g, OptSign::Plus, 0.0).is_err());
        assert!(dephasing_separability_time(c0, c0, g).is_infinite());
    }

    #[test]
    fn zero_t_bounds_examples() {
        let g = 1.0;
        for sign in [OptSign::Plus, OptSign::Minus] {
            for t in [0.0, 0.3, 1.0] {
                assert_abs_diff_eq!(
                    zero_t_bounds(0.6, 0.0, g, sign, t),
                    0.6 * (-g * t).exp(),
                    epsilon = 1e-12
                );
            }
        }
        // Phi+ has C0 = 1, p11 = 1/2: plus branch is e^{-2gt}
        for t in [0.0, 0.4, 1.5] {
            assert_abs_diff_eq!(
                zero_t_bounds(1.0, 0.5, g, OptSign::Plus, t),
                (-2.0 * g * t).exp(),
                epsilon = 1e-12
            );
        }
        // minus branch with C0 < 2 p11 rises above C0 before decaying
        let (c0, p11) = (0.3, 0.45);
        let peak = (0..400)
            .map(|i| zero_t_bounds(c0, p11, g, OptSign::Minus, i as f64 * 0.01))
            .fold(0.0, f64::max);
        assert!(peak > c0 + 1e-3);
        assert!(zero_t_bounds(c0, p11, g, OptSign::Minus, 20.0) < 1e-6);
    }

    #[test]
    fn inf_t_bell_bound_examples() {
        assert_abs_diff_eq!(inf_t_bell_bound(1.0, 0.7, 0.0), 1.0, epsilon = 1e-15);
        let ts = inf_t_separability_time(1.0, 0.7);
        assert_abs_diff_eq!(ts, (1.0 + 2.0f64.sqrt()).ln() / (2.0 * 0.7), epsilon = 1e-12);
        assert_abs_diff_eq!(inf_t_bell_bound(1.0, 0.7, ts), 0.0, epsilon = 1e-12);
        assert!(inf_t_bell_bound(1.0, 0.7, ts + 0.1) == 0.0);
    }

    #[test]
    fn inf_t_bound_matches_master_equation_from_bell_state() {
        let big_gamma = 1.0;
        let channel =
            LindbladChannel::infinite_temperature(big_gamma, InfTRepresentation::RaisingLowering)
                .unwrap();
        let times = [0.0, 0.1, 0.2, 0.3, 0.44];
        let rhos = master_at_times(
            &DensityMatrix::from_pure(&PureState::bell_phi_plus()),
            &channel,
            1e-3,
            &times,
        )
        .unwrap();
        for (t, rho) in times.iter().zip(&rhos) {
            assert_abs_diff_eq!(
                wootters_concurrence(rho),
                inf_t_bell_bound(1.0, big_gamma, *t),
                epsilon = 1e-4
            );
        }
    }

    #[test]
    fn appendix_c_examples() {
        let g = 1.0;
        // Phi+ dephasing: C = e^{-gt}, C_A = 1
        for t in [0.0, 0.5, 2.0] {
            let (c, ca) = appendix_c_dephasing(1.0, 1.0, -1.0, g, t);
            assert_abs_diff_eq!(c, (-g * t).exp(), epsilon = 1e-12);
            assert_abs_diff_eq!(ca, 1.0, epsilon = 1e-12);
        }
        let (c, ca) = appendix_c_zero_t(0.7, 0.3, g, 0.0);
        assert_abs_diff_eq!(c, 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(ca, 0.7, epsilon = 1e-12);
    }

    #[test]
    fn appendix_c_matches_master_equation_for_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let gamma = 1.0;
        let times = [0.3, 1.0, 3.0];
        for _ in 0..5 {
            let psi = haar_random_state(&mut rng);
            let p = state_parameters(&psi);
            let rho0 = DensityMatrix::from_pure(&psi);

            let rhos =
                master_at_times(&rho0, &LindbladChannel::dephasing(gamma).unwrap(), 1e-3, &times)
                    .unwrap();
            for (t, rho) in times.iter().zip(&rhos) {
                let (c, _) = appendix_c_dephasing(p.c0, p.x0, p.w0, gamma, *t);
                assert_abs_diff_eq!(wootters_concurrence(rho), c, epsilon = 1e-6);
            }

            let rhos = master_at_times(
                &rho0,
                &LindbladChannel::thermal(gamma, 0.0).unwrap(),
                1e-3,
                &times,
            )
            .unwrap();
            for (t, rho) in times.iter().zip(&rhos) {
                let (c, _) = appendix_c_zero_t(p.c0, p.p11, gamma, *t);
                assert_abs_diff_eq!(wootters_concurrence(rho), c, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn bound_ordering_and_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let gamma = 1.0;
        for _ in 0..200 {
            let psi = haar_random_state(&mut rng);
            let p = state_parameters(&psi);
            for i in 0..=40 {
                let t = i as f64 * 0.1;
                let (c, ca) = appendix_c_dephasing(p.c0, p.x0, p.w0, gamma, t);
                let plus = dephasing_bounds(p.c0, p.x0, gamma, OptSign::Plus, t).unwrap();
                let minus = dephasing_bounds(p.c0, p.x0, gamma, OptSign::Minus, t).unwrap();
                assert!(c <= plus + 1e-12);
                assert!(ca >= minus - 1e-12);
                for v in [c, ca, plus, minus] {
                    assert!((-1e-12..=1.0 + 1e-12).contains(&v));
                }
                // algebraic identity: zeroT plus branch is the exact C
                let (zc, _) = appendix_c_zero_t(p.c0, p.p11, gamma, t);
                let zplus = zero_t_bounds(p.c0, p.p11, gamma, OptSign::Plus, t);
                assert_abs_diff_eq!(zc, zplus, epsilon = 1e-12);
            }
        }
    }
}
