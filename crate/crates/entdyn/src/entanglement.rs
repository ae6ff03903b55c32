//! Entanglement measures and the stochastic increments of concurrence and
//! entanglement of formation along diffusive trajectories.
//!
//! The preconcurrence c(psi) = <psi|psi~> is the basic object here; its
//! modulus is the pure-state concurrence. The drift amplitude V and noise
//! amplitude F drive the Ito increment of C(psi) under a given unraveling.
//!
//! Two conventions are fixed once and documented at the functions: the
//! noise term of dC is 2 Re[dxi^dag F] with
//! F_k = (c/C)(<J~_k> - c* <J_k>), as follows from the chain rule applied
//! to c (quadratic in psi*); and the quadratic-variation coefficient in
//! the EoF drift is h''(C) (from dEoF = h' dC + (1/2) h'' (dC)^2 with
//! (dC)^2 = 2 Re(F^T u* F + |F|^2) dt).

use crate::channels::LindbladChannel;
use crate::linalg::{
    expectation, tilde_expectation, tilde_overlap, DensityMatrix, PureState,
    C64,
};
use crate::unraveling::CorrelationMatrix;
use nalgebra::Matrix4;
use thiserror::Error;

/// Below this concurrence the phase c/C entering V and F is numerically
/// undefined.
pub const EPS_C: f64 = 1e-12;

/// Guard width around C = 1 where dh/dC diverges.
pub const EPS_MAX_C: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum EntanglementError {
    #[error("concurrence {0:.3e} is below the degeneracy threshold; c/C undefined")]
    DegenerateConcurrence(f64),
    #[error("concurrence {0} too close to 1; dh/dC diverges")]
    MaximalConcurrence(f64),
    #[error("operation requires local operators and a locality-compatible u")]
    NonLocalInput,
}

/// c(psi) = <psi|psi~> = 2(psi01* psi10* - psi00* psi11*).
#[inline]
pub fn preconcurrence(psi: &PureState) -> C64 {
    2.0 * (psi.a01().conj() * psi.a10().conj() - psi.a00().conj() * psi.a11().conj())
}

/// Pure-state concurrence C(psi) = |c(psi)|.
#[inline]
pub fn concurrence(psi: &PureState) -> f64 {
    preconcurrence(psi).norm()
}

/// X(psi) = 2(|psi01 psi10| + |psi00 psi11|); upper envelope of C over
/// local phase changes.
pub fn x_function(psi: &PureState) -> f64 {
    2.0 * ((psi.a01() * psi.a10()).norm() + (psi.a00() * psi.a11()).norm())
}

/// W(psi) = 2(|psi01 psi10| - |psi00 psi11|).
pub fn w_function(psi: &PureState) -> f64 {
    2.0 * ((psi.a01() * psi.a10()).norm() - (psi.a00() * psi.a11()).norm())
}

/// Principal square root of a Hermitian PSD matrix; small negative
/// eigenvalues from roundoff are clamped to zero.
fn psd_sqrt(m: &Matrix4<C64>) -> Matrix4<C64> {
    let eig = m.symmetric_eigen();
    let mut out = Matrix4::zeros();
    for j in 0..4 {
        let s = eig.eigenvalues[j].max(0.0).sqrt();
        let v = eig.eigenvectors.column(j);
        out += (v * v.adjoint()) * C64::from(s);
    }
    out
}

/// Mixed-state concurrence: max{0, l1 - l2 - l3 - l4}, where l_i are the
/// decreasing square roots of the eigenvalues of rho rho~. Evaluated via
/// the Hermitian product sqrt(rho) rho~ sqrt(rho), which shares those
/// eigenvalues and admits a stable symmetric eigensolve.
pub fn wootters_concurrence(rho: &DensityMatrix) -> f64 {
    let s = psd_sqrt(rho.matrix());
    let m = s * rho.spin_flipped() * s;
    let herm = (m + m.adjoint()) * C64::from(0.5);
    let mut lambdas: Vec<f64> = herm
        .symmetric_eigenvalues()
        .iter()
        .map(|&l| l.max(0.0).sqrt())
        .collect();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    (lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]).max(0.0)
}

/// Binary entropy h(x) = -x log2 x - (1-x) log2(1-x), with 0 log 0 = 0.
pub fn binary_entropy(x: f64) -> f64 {
    let term = |p: f64| if p <= 0.0 { 0.0 } else { -p * p.log2() };
    term(x) + term(1.0 - x)
}

/// Entanglement of formation as a function of concurrence,
/// h[(1 + sqrt(1 - C^2))/2].
pub fn eof_of_concurrence(c: f64) -> f64 {
    let c = c.clamp(0.0, 1.0);
    binary_entropy(0.5 * (1.0 + (1.0 - c * c).sqrt()))
}

/// Entanglement of formation of a pure state.
pub fn eof_pure(psi: &PureState) -> f64 {
    eof_of_concurrence(concurrence(psi))
}

/// dEoF/dC = -(C / (2 s ln 2)) ln((1-s)/(1+s)), s = sqrt(1-C^2).
pub fn eof_dc(c: f64) -> f64 {
    let s = (1.0 - c * c).sqrt();
    -(c / (2.0 * s * std::f64::consts::LN_2)) * ((1.0 - s) / (1.0 + s)).ln()
}

/// d^2 EoF/dC^2 = -(1/ln 2) [ln((1-s)/(1+s)) / (2 s^3) + 1/s^2].
pub fn eof_d2c(c: f64) -> f64 {
    let s = (1.0 - c * c).sqrt();
    -(((1.0 - s) / (1.0 + s)).ln() / (2.0 * s * s * s) + 1.0 / (s * s))
        / std::f64::consts::LN_2
}

/// Tilde expectations <J~_k> for every channel operator.
fn tilde_vector(psi: &PureState, channel: &LindbladChannel) -> Vec<C64> {
    channel
        .operators()
        .iter()
        .map(|op| tilde_expectation(&op.full, psi))
        .collect()
}

/// Deterministic amplitude of dC(psi): the four-term expression
///
///   V = -Re[(c/C)( <(J^dag J)~> - (1/c)|<J~>|^2
///         + (c/C^2) <J~>^T u* <J~> - sum_kl <(J_k psi)~|J_l psi> u*_kl )].
pub fn drift_v(
    psi: &PureState,
    channel: &LindbladChannel,
    u: &CorrelationMatrix,
) -> Result<f64, EntanglementError> {
    let c = preconcurrence(psi);
    let cval = c.norm();
    if cval == 0.0 && channel.all_local() {
        // Every term carries a factor c for local operators; the limit is 0.
        return Ok(0.0);
    }
    if cval <= EPS_C {
        return Err(EntanglementError::DegenerateConcurrence(cval));
    }
    let l = channel.len();
    let a = tilde_vector(psi, channel);
    let t_jj = tilde_expectation(&channel.dagger_product_sum(), psi);
    let a_norm2: f64 = a.iter().map(|z| z.norm_sqr()).sum();
    let mut quad = C64::from(0.0);
    let mut msum = C64::from(0.0);
    for k in 0..l {
        let jk_psi = channel.operators()[k].full * psi.amplitudes();
        for lidx in 0..l {
            let ustar = u.matrix()[(k, lidx)].conj();
            quad += a[k] * ustar * a[lidx];
            let jl_psi = channel.operators()[lidx].full * psi.amplitudes();
            msum += tilde_overlap(&jk_psi, &jl_psi) * ustar;
        }
    }
    let phase = c / C64::from(cval);
    let inner = t_jj - C64::from(a_norm2) / c + phase / C64::from(cval) * quad - msum;
    Ok(-(phase * inner).re)
}

/// Noise amplitude F_k = (c/C)(<J~_k> - c* <J_k>). For local J_k this
/// reduces to C(psi)((1/2) tr J_k - <J_k>). Returns the zero vector at
/// exactly C = 0 (F carries an overall factor C for local operators).
pub fn noise_f(
    psi: &PureState,
    channel: &LindbladChannel,
) -> Result<Vec<C64>, EntanglementError> {
    let c = preconcurrence(psi);
    let cval = c.norm();
    if cval == 0.0 {
        return Ok(vec![C64::from(0.0); channel.len()]);
    }
    if cval <= EPS_C {
        return Err(EntanglementError::DegenerateConcurrence(cval));
    }
    let phase = c / C64::from(cval);
    Ok(channel
        .operators()
        .iter()
        .map(|op| {
            let a = tilde_expectation(&op.full, psi);
            let b = expectation(&op.full, psi);
            phase * (a - c.conj() * b)
        })
        .collect())
}

/// Decay rate of the average concurrence for local channels under local
/// monitoring:
///
///   k(u) = (1/2) sum_k [tr(J_k^dag J_k) - (1/2)|tr J_k|^2]
///        + (1/2) Re sum_kl u*_kl [tr(J_k J_l) - (1/2) tr J_k tr J_l],
///
/// with single-qubit traces and the second sum restricted to same-qubit
/// pairs (u must vanish across qubits).
pub fn k_of_u(
    channel: &LindbladChannel,
    u: &CorrelationMatrix,
) -> Result<f64, EntanglementError> {
    if !channel.all_local() {
        return Err(EntanglementError::NonLocalInput);
    }
    let ops = channel.operators();
    let l = ops.len();
    let mut k = 0.0;
    for op in ops {
        let j = op.single_qubit_form.expect("local operator");
        k += 0.5 * ((j.adjoint() * j).trace().re - 0.5 * j.trace().norm_sqr());
    }
    let mut second = C64::from(0.0);
    for a in 0..l {
        for b in 0..l {
            let same_qubit = ops[a].qubit == ops[b].qubit;
            if !same_qubit {
                if u.matrix()[(a, b)].norm() > 1e-12 {
                    return Err(EntanglementError::NonLocalInput);
                }
                continue;
            }
            let ja = ops[a].single_qubit_form.expect("local operator");
            let jb = ops[b].single_qubit_form.expect("local operator");
            second +=
                u.matrix()[(a, b)].conj() * ((ja * jb).trace() - 0.5 * ja.trace() * jb.trace());
        }
    }
    Ok(k + 0.5 * second.re)
}

/// One Ito increment of the concurrence, dC = V dt + 2 Re[dxi^dag F].
///
/// The factor two on the noise term follows from c being quadratic in
/// psi*: dc* picks up 2 dxi^dag <psi~|f>, twice the naive first-order
/// reading. Verification against finite differences of C along integrated
/// steps only converges at O(dt^{3/2}) with this factor in place.
pub fn dc_increment(
    psi: &PureState,
    channel: &LindbladChannel,
    u: &CorrelationMatrix,
    dxi: &[C64],
    dt: f64,
) -> Result<f64, EntanglementError> {
    let v = drift_v(psi, channel, u)?;
    let f = noise_f(psi, channel)?;
    let noise: f64 = dxi.iter().zip(&f).map(|(z, fk)| (z.conj() * fk).re).sum();
    Ok(v * dt + 2.0 * noise)
}

/// Drift of the entanglement of formation,
/// h'(C) V + h''(C) Re(F^T u* F + |F|^2), from the Ito chain rule with
/// (dC)^2 = 2 Re(F^T u* F + |F|^2) dt.
pub fn eof_drift(
    psi: &PureState,
    channel: &LindbladChannel,
    u: &CorrelationMatrix,
) -> Result<f64, EntanglementError> {
    let cval = concurrence(psi);
    if 1.0 - cval <= EPS_MAX_C {
        return Err(EntanglementError::MaximalConcurrence(cval));
    }
    let v = drift_v(psi, channel, u)?;
    let f = noise_f(psi, channel)?;
    let mut quad = C64::from(0.0);
    let mut norm2 = 0.0;
    for k in 0..f.len() {
        norm2 += f[k].norm_sqr();
        for l in 0..f.len() {
            quad += f[k] * u.matrix()[(k, l)].conj() * f[l];
        }
    }
    Ok(eof_dc(cval) * v + eof_d2c(cval) * (quad.re + norm2))
}
