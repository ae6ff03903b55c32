//! Fast end-to-end invariant battery for a fresh checkout. Each check is a
//! self-contained property with its own tolerance; the CLI prints one line
//! per check. Sizes are chosen so the whole suite runs in well under ten
//! minutes on a laptop.

use crate::channels::{InfTRepresentation, LindbladChannel};
use crate::ensemble::{
    base_trajectory, bound_performance_study, haar_random_state, run_ensemble, EnsembleConfig,
    StudyChannel,
};
use crate::entanglement::{concurrence, k_of_u, wootters_concurrence};
use crate::linalg::{DensityMatrix, PureState, Qubit};
use crate::oracle;
use crate::trajectory::{self, split_rng};
use crate::unraveling::{CorrelationMatrix, OptSign, UnravelingPolicy};

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(
    results: &mut Vec<CheckResult>,
    name: &'static str,
    run: impl FnOnce() -> Result<String, String>,
) {
    let (passed, detail) = match run() {
        Ok(detail) => (true, detail),
        Err(detail) => (false, detail),
    };
    results.push(CheckResult {
        name,
        passed,
        detail,
    });
}

fn expect(ok: bool, detail: String) -> Result<String, String> {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

pub fn run_selftest() -> Vec<CheckResult> {
    let mut results = Vec::new();
    let reference = PureState::protection_figure_state();
    let c_ref = (1.0 + 5.0_f64.sqrt()) / 4.0;

    check(&mut results, "reference_state_concurrence", || {
        let c = concurrence(&reference);
        expect(
            (c - c_ref).abs() < 1e-15,
            format!("C = {c:.15}, expected {c_ref:.15}"),
        )
    });

    check(&mut results, "wootters_matches_pure_concurrence", || {
        let mut rng = split_rng(101, 0);
        let mut worst: f64 = 0.0;
        for _ in 0..200 {
            let psi = haar_random_state(&mut rng);
            let rho = DensityMatrix::from_pure(&psi);
            worst = worst.max((wootters_concurrence(&rho) - concurrence(&psi)).abs());
        }
        expect(worst < 1e-7, format!("max |mixed - pure| = {worst:.2e}"))
    });

    check(&mut results, "correlation_matrix_physicality", || {
        use nalgebra::DMatrix;
        use crate::linalg::c;
        let ok = CorrelationMatrix::heterodyne(2).matrix().iter().all(|z| z.norm() == 0.0)
            && CorrelationMatrix::scaled_identity(2, c(1.0, 0.0)).is_ok()
            && CorrelationMatrix::scaled_identity(2, c(-1.0, 0.0)).is_ok()
            && CorrelationMatrix::new(DMatrix::from_diagonal_element(2, 2, c(2.0, 0.0))).is_err();
        expect(ok, "|u| <= 1 accepted, |u| > 1 rejected".into())
    });

    check(&mut results, "protection_noise_is_imaginary", || {
        let u = CorrelationMatrix::protection(3);
        let mut rng = split_rng(7, 0);
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            for z in u.sample_noise(1e-3, &mut rng).iter() {
                worst = worst.max(z.re.abs());
            }
        }
        expect(worst == 0.0, format!("max |Re| = {worst:.2e}"))
    });

    check(&mut results, "k_table", || {
        use crate::linalg::c;
        use nalgebra::DMatrix;
        let g = 1.3;
        let deph = LindbladChannel::dephasing(g).unwrap();
        let k1 = k_of_u(&deph, &CorrelationMatrix::scaled_identity(2, c(1.0, 0.0)).unwrap()).unwrap();
        let k2 = k_of_u(&deph, &CorrelationMatrix::protection(2)).unwrap();
        let inf = LindbladChannel::infinite_temperature(g, InfTRepresentation::RaisingLowering)
            .unwrap();
        let mut u = DMatrix::zeros(4, 4);
        u[(0, 2)] = c(1.0, 0.0);
        u[(2, 0)] = c(1.0, 0.0);
        u[(1, 3)] = c(1.0, 0.0);
        u[(3, 1)] = c(1.0, 0.0);
        let k3 = k_of_u(&inf, &CorrelationMatrix::new(u).unwrap()).unwrap();
        let ok = (k1 - g).abs() < 1e-12 && k2.abs() < 1e-12 && (k3 - 4.0 * g).abs() < 1e-12;
        expect(ok, format!("k(I) = {k1}, k(-I) = {k2}, k(raising) = {k3}"))
    });

    check(&mut results, "protection_freezes_concurrence", || {
        let channel = LindbladChannel::compose(&[
            LindbladChannel::dephasing_on(1.0, Qubit::One).unwrap(),
            LindbladChannel::infinite_temperature_on(
                1.0,
                InfTRepresentation::HermitianXY,
                Qubit::Two,
            )
            .unwrap(),
        ])
        .unwrap();
        let mut worst: f64 = 0.0;
        for stream in 0..5 {
            let mut cfg = base_trajectory(
                reference.clone(),
                channel.clone(),
                UnravelingPolicy::Protection,
                1e-3,
                1.0,
                21,
            );
            cfg.stream = stream;
            let rec = trajectory::run(&cfg).unwrap();
            for cv in &rec.concurrence {
                worst = worst.max((cv - c_ref).abs());
            }
        }
        expect(worst < 5e-3, format!("max |C - C0| = {worst:.2e}"))
    });

    check(&mut results, "localized_decay_is_deterministic", || {
        // the adaptive policy is frozen over each step, leaving an
        // O(sqrt(t dt)) residual, so per-trajectory determinism needs a
        // fine step
        let channel = LindbladChannel::thermal(1.0, 0.0).unwrap();
        let mut worst: f64 = 0.0;
        for stream in 0..3 {
            let mut cfg = base_trajectory(
                PureState::bell_psi_plus(),
                channel.clone(),
                UnravelingPolicy::Localized,
                2e-6,
                0.5,
                22,
            );
            cfg.stream = stream;
            cfg.record_stride = 25_000;
            let rec = trajectory::run(&cfg).unwrap();
            for (t, cv) in rec.times.iter().zip(&rec.concurrence) {
                worst = worst.max((cv - (-t).exp()).abs());
            }
        }
        expect(worst < 5e-3, format!("max |C - e^(-t)| = {worst:.2e}"))
    });

    check(&mut results, "master_equation_dephasing_decay", || {
        let channel = LindbladChannel::dephasing(1.0).unwrap();
        let initial = DensityMatrix::from_pure(&PureState::bell_phi_plus());
        let sol = oracle::integrate_master(&oracle::MasterConfig {
            channel,
            initial,
            dt: 1e-3,
            t_final: 1.0,
        })
        .unwrap();
        let (t, rho) = sol.last().unwrap();
        let cw = wootters_concurrence(rho);
        let expected = (-t).exp();
        expect(
            (cw - expected).abs() < 1e-6,
            format!("C({t}) = {cw:.8}, expected {expected:.8}"),
        )
    });

    check(&mut results, "closed_forms_match_master", || {
        let mut rng = split_rng(31, 0);
        let mut worst: f64 = 0.0;
        for _ in 0..5 {
            let psi = haar_random_state(&mut rng);
            let p = oracle::state_parameters(&psi);
            for (channel, is_dephasing) in [
                (LindbladChannel::dephasing(1.0).unwrap(), true),
                (LindbladChannel::thermal(1.0, 0.0).unwrap(), false),
            ] {
                let sol = oracle::integrate_master(&oracle::MasterConfig {
                    channel,
                    initial: DensityMatrix::from_pure(&psi),
                    dt: 2e-4,
                    t_final: 1.0,
                })
                .unwrap();
                let (t, rho) = sol.last().unwrap();
                let cw = wootters_concurrence(rho);
                let (cf, _) = if is_dephasing {
                    oracle::appendix_c_dephasing(p.c0, p.x0, p.w0, 1.0, *t)
                } else {
                    oracle::appendix_c_zero_t(p.c0, p.p11, 1.0, *t)
                };
                worst = worst.max((cw - cf).abs());
            }
        }
        expect(worst < 1e-6, format!("max |closed - master| = {worst:.2e}"))
    });

    check(&mut results, "bound_study_has_no_violations", || {
        for (channel, label) in [
            (StudyChannel::Dephasing, "dephasing"),
            (StudyChannel::ZeroT, "zero_t"),
        ] {
            for sign in [OptSign::Plus, OptSign::Minus] {
                bound_performance_study(channel, sign, 1.0, &[0.25, 1.0], 200, 17)
                    .map_err(|e| format!("{label}: {e}"))?;
            }
        }
        Ok("800 state/curve combinations clean".into())
    });

    check(&mut results, "ensemble_matches_exponential_bound", || {
        let config = EnsembleConfig {
            base: base_trajectory(
                reference.clone(),
                LindbladChannel::dephasing(1.0).unwrap(),
                UnravelingPolicy::Fixed(
                    CorrelationMatrix::scaled_identity(2, crate::linalg::c(1.0, 0.0)).unwrap(),
                ),
                1e-3,
                1.0,
                41,
            ),
            n_traj: 400,
            checkpoints: vec![0.5, 1.0],
        };
        let stats = run_ensemble(&config).map_err(|e| e.to_string())?;
        for cp in &stats.checkpoints {
            let expected = c_ref * (-cp.t).exp();
            let tol = 3.0 * cp.se_c;
            if (cp.mean_c - expected).abs() >= tol {
                return Err(format!(
                    "t = {}: mean = {:.5}, expected {:.5}, 3SE = {:.5}",
                    cp.t, cp.mean_c, expected, tol
                ));
            }
        }
        Ok("mean concurrence within 3SE of C0 e^(-k t)".into())
    });

    check(&mut results, "ensemble_worker_count_determinism", || {
        let config = EnsembleConfig {
            base: base_trajectory(
                PureState::bell_psi_plus(),
                LindbladChannel::thermal(1.0, 0.0).unwrap(),
                UnravelingPolicy::ZeroTOpt(OptSign::Plus),
                1e-3,
                0.2,
                55,
            ),
            n_traj: 64,
            checkpoints: vec![0.2],
        };
        let run_with = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_ensemble(&config).unwrap())
        };
        let a = run_with(1);
        let b = run_with(4);
        let ok = a.checkpoints[0].mean_c.to_bits() == b.checkpoints[0].mean_c.to_bits()
            && a.checkpoints[0].rho.matrix() == b.checkpoints[0].rho.matrix();
        expect(ok, "1-worker and 4-worker results bit-identical".into())
    });

    results
}
