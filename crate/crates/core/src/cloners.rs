//! Concrete cloning machines and the closed-form fidelity laws they obey.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector};

use crate::channels::BroadcastChannel;
use crate::densops::{
    cis, psi, psi_perp, qubit_from_params, ComplexMatrix, DensityOperator, QubitParams, C64, ZERO,
};
use crate::error::{invalid, Error, Result};
use crate::fidelity::FidelityValue;

/// Threshold below which a Gram–Schmidt remainder is treated as dependent.
const DEPENDENCE_TOL: f64 = 1e-8;

/// Largest copy count accepted by [`gisin_massar_channel`].
pub const MAX_GM_COPIES: usize = 6;

pub const COMMUTE_TOL: f64 = 1e-10;

/// Order in which canonical basis vectors are tried when completing a unitary.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CompletionOrder {
    #[default]
    Forward,
    Reverse,
}

/// Extends orthonormal columns fixed at the given positions to an `n × n`
/// unitary. Free positions are filled left to right with canonical basis
/// vectors orthogonalised against everything accepted so far.
pub fn complete_unitary(
    n: usize,
    specified: &[(usize, DVector<C64>)],
    order: CompletionOrder,
) -> Result<ComplexMatrix> {
    let mut slots: Vec<Option<DVector<C64>>> = vec![None; n];
    let mut basis: Vec<DVector<C64>> = Vec::with_capacity(n);
    for (pos, v) in specified {
        if *pos >= n || v.len() != n || slots[*pos].is_some() {
            return Err(Error::DimensionMismatch(format!(
                "column {pos} of length {} does not fit a {n}x{n} unitary",
                v.len()
            )));
        }
        if (v.norm() - 1.0).abs() > 1e-12 {
            return Err(invalid(
                "specified",
                format!("column {pos} is not normalised"),
            ));
        }
        if let Some(overlap) = basis.iter().map(|b| b.dotc(v).norm()).reduce(f64::max) {
            if overlap > 1e-12 {
                return Err(invalid(
                    "specified",
                    format!("column {pos} is not orthogonal"),
                ));
            }
        }
        slots[*pos] = Some(v.clone());
        basis.push(v.clone());
    }

    let candidates: Box<dyn Iterator<Item = usize>> = match order {
        CompletionOrder::Forward => Box::new(0..n),
        CompletionOrder::Reverse => Box::new((0..n).rev()),
    };
    let mut fresh = Vec::with_capacity(n - basis.len());
    for e in candidates {
        if basis.len() == n {
            break;
        }
        let mut v = DVector::<C64>::zeros(n);
        v[e] = C64::from(1.0);
        // two passes of modified Gram–Schmidt
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dotc(&v);
                v.axpy(-proj, b, C64::from(1.0));
            }
        }
        let norm = v.norm();
        if norm > DEPENDENCE_TOL {
            v.unscale_mut(norm);
            basis.push(v.clone());
            fresh.push(v);
        }
    }
    let mut fresh = fresh.into_iter();
    let mut m = DMatrix::<C64>::zeros(n, n);
    for (col, slot) in slots.into_iter().enumerate() {
        let v = match slot {
            Some(v) => v,
            None => fresh.next().ok_or_else(|| {
                Error::Inconsistent("unitary completion ran out of vectors".into())
            })?,
        };
        m.set_column(col, &v);
    }
    ComplexMatrix::from_dmatrix(m)
}

fn pure_ancilla(d: usize) -> Vec<f64> {
    let mut spectrum = vec![0.0; d];
    spectrum[0] = 1.0;
    spectrum
}

/// The 1→2 machine with a priori phase ω: ancilla dimension 4, ancilla in
/// `|0⟩`, and every clone equal to `(e^{i(π/2−ω)}|0⟩ + |1⟩)/√2`.
pub fn omega_dqcm(omega: f64) -> Result<BroadcastChannel> {
    omega_dqcm_with(omega, CompletionOrder::Forward)
}

pub fn omega_dqcm_with(omega: f64, order: CompletionOrder) -> Result<BroadcastChannel> {
    if !omega.is_finite() {
        return Err(invalid("omega", "must be finite"));
    }
    let far = cis(PI - 2.0 * omega) * 0.5;
    let near = cis(FRAC_PI_2 - omega) * 0.5;
    let half = C64::from(0.5);
    let first = DVector::from_vec(vec![far, ZERO, near, ZERO, near, ZERO, half, ZERO]);
    let fifth = DVector::from_vec(vec![ZERO, far, ZERO, near, ZERO, near, ZERO, half]);
    let u = complete_unitary(8, &[(0, first), (4, fifth)], order)?;
    BroadcastChannel::new(u, pure_ancilla(4), 2)
}

/// The pure clone produced by [`omega_dqcm`].
pub fn omega_dqcm_clone(omega: f64) -> Result<DensityOperator> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    DensityOperator::from_pure(&[cis(FRAC_PI_2 - omega) * s, C64::from(s)])
}

/// λ(z|ψ⟩⟨ψ| + (1−z)|ψ⊥⟩⟨ψ⊥|) + (1−λ)(z|ψ⊥⟩⟨ψ⊥| + (1−z)|ψ⟩⟨ψ|).
pub fn scaling_channel_output(p: &QubitParams, z: f64) -> Result<DensityOperator> {
    p.validate()?;
    check_unit("z", z)?;
    let weight_psi = p.lambda * z + (1.0 - p.lambda) * (1.0 - z);
    let rescaled = QubitParams {
        lambda: weight_psi,
        ..*p
    };
    qubit_from_params(&rescaled)
}

fn check_unit(field: &'static str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(invalid(field, format!("{v} is outside [0, 1]")))
    }
}

/// [√((λ(1−z) + (1−λ)z)(1−λ)) + √((λz + (1−λ)(1−z))λ)]².
pub fn fidelity_lambda_z(lambda: f64, z: f64) -> Result<FidelityValue> {
    check_unit("lambda", lambda)?;
    check_unit("z", z)?;
    let perp = ((lambda * (1.0 - z) + (1.0 - lambda) * z) * (1.0 - lambda)).sqrt();
    let along = ((lambda * z + (1.0 - lambda) * (1.0 - z)) * lambda).sqrt();
    Ok(FidelityValue::from_raw((perp + along).powi(2)))
}

/// Scaling weight (2M+1)/(3M) of the optimal symmetric 1→M cloner.
pub fn optimal_z(copies: usize) -> Result<f64> {
    if copies < 2 {
        return Err(invalid("M", format!("need M ≥ 2, got {copies}")));
    }
    let m = copies as f64;
    Ok((2.0 * m + 1.0) / (3.0 * m))
}

pub fn optimal_mixed_fidelity(copies: usize, lambda: f64) -> Result<FidelityValue> {
    fidelity_lambda_z(lambda, optimal_z(copies)?)
}

/// Scaling weight and shrinking factor of the optimal N→M cloner.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingParams {
    pub z: f64,
    pub f: f64,
    pub input_copies: usize,
    pub copies: usize,
}

pub fn nm_scaling_params(input_copies: usize, copies: usize) -> Result<ScalingParams> {
    if input_copies == 0 {
        return Err(invalid("N", "need N ≥ 1"));
    }
    if input_copies > copies {
        return Err(invalid(
            "N",
            format!("N = {input_copies} exceeds M = {copies}"),
        ));
    }
    let (n, m) = (input_copies as f64, copies as f64);
    let z = (n * m + m + n) / (m * (n + 2.0));
    let f = (n / m) * (m + 2.0) / (n + 2.0);
    if (z - (1.0 + f) / 2.0).abs() > 1e-12 {
        return Err(Error::Inconsistent(format!(
            "z = {z} but (1 + f)/2 = {}",
            (1.0 + f) / 2.0
        )));
    }
    Ok(ScalingParams {
        z,
        f,
        input_copies,
        copies,
    })
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Symmetric 1→M universal cloner.
///
/// The isometry sends `|s⟩` to `Σ_w β_{s,w} |D_{s+w}⟩ ⊗ |w⟩`, where `|D_W⟩` is
/// the Dicke state of the `M` clone qubits with `W` excitations and `|w⟩`,
/// `w = 0..M−1`, spans an `M`-dimensional anticlone register, with
/// `β²_{s,w} = 2·C(M−1, w) / ((M+1)·C(M, s+w))`. For `s = 0` these are the
/// weights `2(M−w)/(M(M+1))` of `M−w` good and `w` flipped clones. The
/// anticlone register doubles as the residual, so `d = 2^{M−1}·M`.
pub fn gisin_massar_channel(copies: usize) -> Result<BroadcastChannel> {
    if !(2..=MAX_GM_COPIES).contains(&copies) {
        return Err(invalid(
            "M",
            format!("supported range is 2..={MAX_GM_COPIES}, got {copies}"),
        ));
    }
    let m = copies;
    let residual = m;
    let n = (1usize << m) * residual;
    let d = n / 2;
    let image = |s: usize| -> DVector<C64> {
        let mut v = DVector::<C64>::zeros(n);
        for w in 0..m {
            let weight = s + w;
            let dicke_norm = binomial(m, weight);
            let beta = (2.0 * binomial(m - 1, w) / ((m as f64 + 1.0) * dicke_norm)).sqrt();
            let amp = C64::from(beta / dicke_norm.sqrt());
            for string in (0..1usize << m).filter(|x| x.count_ones() as usize == weight) {
                v[string * residual + w] = amp;
            }
        }
        v
    };
    let u = complete_unitary(n, &[(0, image(0)), (d, image(1))], CompletionOrder::Forward)?;
    BroadcastChannel::new(u, pure_ancilla(d), m)
}

fn tensor_power(v: &[C64; 2], copies: usize) -> DVector<C64> {
    let mut out = DVector::from_element(1, C64::from(1.0));
    let q = DVector::from_column_slice(v);
    for _ in 0..copies {
        out = out.kronecker(&q);
    }
    out
}

/// Perfect broadcaster for the commuting family ρ_s(θ, ω, ·): maps
/// `|ψ⟩|0…0⟩ → |ψ⟩^{⊗M}` and `|ψ⊥⟩|0…0⟩ → |ψ⊥⟩^{⊗M}`.
pub fn known_basis_broadcaster(theta: f64, omega: f64, copies: usize) -> Result<BroadcastChannel> {
    if !(2..=12).contains(&copies) {
        return Err(invalid(
            "M",
            format!("supported range is 2..=12, got {copies}"),
        ));
    }
    if !(theta.is_finite() && omega.is_finite()) {
        return Err(invalid("theta/omega", "must be finite"));
    }
    let d = 1usize << (copies - 1);
    let good = tensor_power(&psi(theta, omega), copies);
    let flip = tensor_power(&psi_perp(theta, omega), copies);
    let (s, c) = theta.sin_cos();
    // |0⟩ = cos θ|ψ⟩ − sin θ|ψ⊥⟩,  |1⟩ = e^{−iω}(sin θ|ψ⟩ + cos θ|ψ⊥⟩)
    let zero_image = &good * C64::from(c) - &flip * C64::from(s);
    let one_image = (&good * C64::from(s) + &flip * C64::from(c)) * cis(-omega);
    let u = complete_unitary(
        2 * d,
        &[(0, zero_image), (d, one_image)],
        CompletionOrder::Forward,
    )?;
    BroadcastChannel::new(u, pure_ancilla(d), copies)
}

/// True iff `max |r1·r2 − r2·r1| < 1e−10`; operators of different dimension
/// never commute.
pub fn commutes(r1: &DensityOperator, r2: &DensityOperator) -> bool {
    if r1.dim() != r2.dim() {
        return false;
    }
    let (a, b) = (r1.matrix().as_dmatrix(), r2.matrix().as_dmatrix());
    let comm = a * b - b * a;
    comm.iter().all(|z| z.norm() < COMMUTE_TOL)
}

/// Images of `|0⟩|0⟩` and `|1⟩|0⟩`, the columns selected by a pure ancilla.
pub fn column_images(ch: &BroadcastChannel) -> (DVector<C64>, DVector<C64>) {
    let d = ch.ancilla_dim();
    (ch.unitary().column(0), ch.unitary().column(d))
}
