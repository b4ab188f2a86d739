//! Uhlmann fidelity, its closed qubit form, and shrinking-factor extraction.

use nalgebra::DMatrix;

use crate::densops::{
    hermitian_eigen, noise_floor, psd_sqrt, BlochVector, DensityOperator, QubitParams, C64,
};
use crate::error::{invalid, Error, Result};

/// Eigenvalues of √ρ₁ρ₂√ρ₁ above this (negative) floor are clamped to zero.
pub const EIGEN_CLAMP: f64 = 1e-10;
/// Tolerance for the radicand x − x² − |y|² in the closed form.
pub const RADICAND_TOL: f64 = 1e-10;
/// Matches the eigenvalue noise floor of a 2×2 unit-trace operator.
pub const DETERMINANT_FLOOR: f64 = 16.0 * f64::EPSILON;
/// Maximum residual for accepting a shrinking factor.
pub const SCALING_RESIDUAL_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct FidelityValue(f64);

impl FidelityValue {
    pub(crate) fn from_raw(v: f64) -> Self {
        Self(v)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<FidelityValue> for f64 {
    fn from(f: FidelityValue) -> f64 {
        f.0
    }
}

/// Scale `f` in ρ_out = ((1−f)/2)·I + f·ρ_in.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct ShrinkingFactor(f64);

impl ShrinkingFactor {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// F(ρ₁, ρ₂) = [tr √(√ρ₁ ρ₂ √ρ₁)]².
pub fn uhlmann_fidelity(r1: &DensityOperator, r2: &DensityOperator) -> Result<FidelityValue> {
    if r1.dim() != r2.dim() {
        return Err(Error::DimensionMismatch(format!(
            "fidelity between dimensions {} and {}",
            r1.dim(),
            r2.dim()
        )));
    }
    let s = psd_sqrt(r1.matrix().as_dmatrix())?;
    let inner: DMatrix<C64> = &s * r2.matrix().as_dmatrix() * &s;
    let (values, _) = hermitian_eigen(&inner);
    let floor = noise_floor(&values);
    let mut root_sum = 0.0;
    for v in values {
        if v < -EIGEN_CLAMP {
            return Err(Error::NotDensityOperator(format!(
                "√ρ₁ρ₂√ρ₁ has eigenvalue {v:e}"
            )));
        }
        if v > floor {
            root_sum += v.sqrt();
        }
    }
    Ok(FidelityValue(root_sum * root_sum))
}

/// Closed-form fidelity between ρ_A = [[x, y], [y*, 1−x]] and ρ_s(θ, ω, λ).
pub fn qubit_fidelity_closed_form(x: f64, y: C64, p: &QubitParams) -> Result<FidelityValue> {
    p.validate()?;
    if !(x.is_finite() && y.re.is_finite() && y.im.is_finite()) {
        return Err(invalid("x/y", "non-finite output entries"));
    }
    let radicand = x - x * x - y.norm_sqr();
    if radicand < -RADICAND_TOL {
        return Err(Error::NegativeRadicand(radicand));
    }
    Ok(FidelityValue(closed_form_unchecked(
        x, y, p.theta, p.omega, p.lambda,
    )))
}

/// The closed form without validation. A determinant at or below
/// `DETERMINANT_FLOOR` is rounding noise of a pure output and counts as zero.
#[inline]
pub(crate) fn closed_form_unchecked(x: f64, y: C64, theta: f64, omega: f64, lambda: f64) -> f64 {
    let bias = 2.0 * lambda - 1.0;
    let (s2, c2) = (2.0 * theta).sin_cos();
    // e^{iω}y + e^{−iω}y* = 2 Re(e^{iω} y)
    let (so, co) = omega.sin_cos();
    let phase_term = 2.0 * (co * y.re - so * y.im);
    let radicand = x - x * x - y.norm_sqr();
    let radicand = if radicand <= DETERMINANT_FLOOR {
        0.0
    } else {
        radicand
    };
    0.5 + 0.5 * bias * (2.0 * x - 1.0) * c2
        + 0.5 * bias * phase_term * s2
        + 2.0 * ((lambda - lambda * lambda) * radicand).sqrt()
}

/// Returns `None` when ρ_out is not a scaling of ρ_in (including ρ_in = I/2).
pub fn shrinking_factor(
    rho_in: &DensityOperator,
    rho_out: &DensityOperator,
) -> Result<Option<ShrinkingFactor>> {
    let r_in = BlochVector::of(rho_in)?;
    let r_out = BlochVector::of(rho_out)?;
    let norm2 = r_in.x * r_in.x + r_in.y * r_in.y + r_in.z * r_in.z;
    if norm2 < 1e-24 {
        return Ok(None);
    }
    let f = (r_out.x * r_in.x + r_out.y * r_in.y + r_out.z * r_in.z) / norm2;
    let predicted = BlochVector {
        x: f * r_in.x,
        y: f * r_in.y,
        z: f * r_in.z,
    };
    // the density matrices differ by half the Bloch difference
    let residual = 0.5
        * [
            predicted.x - r_out.x,
            predicted.y - r_out.y,
            predicted.z - r_out.z,
        ]
        .iter()
        .map(|d| d.abs())
        .fold(0.0, f64::max);
    if residual < SCALING_RESIDUAL_TOL {
        Ok(Some(ShrinkingFactor(f)))
    } else {
        Ok(None)
    }
}

/// ((1−f)/2)·I + f·ρ for a qubit ρ.
pub fn apply_shrinking(rho: &DensityOperator, f: f64) -> Result<DensityOperator> {
    let b = BlochVector::of(rho)?;
    BlochVector {
        x: f * b.x,
        y: f * b.y,
        z: f * b.z,
    }
    .to_density()
}
