//! Dense complex matrices, density operators and qubit state construction.
//!
//! Tensor products use the row-major Kronecker convention: the basis index of
//! `a ⊗ b` is `i_a * dim_b + i_b`, so the left factor is the most significant.

use std::fmt;

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{invalid, Error, Result};

pub type C64 = Complex<f64>;

/// Hermiticity tolerance (max elementwise deviation).
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Allowed deviation of the trace from one.
pub const TRACE_TOL: f64 = 1e-12;
/// Smallest eigenvalue accepted for a density operator.
pub const PSD_TOL: f64 = 1e-10;
/// Eigenvalues in `[-PSD_CLAMP, 0)` are clamped to zero by the square root;
/// anything below is rejected.
pub const PSD_CLAMP: f64 = 1e-8;

pub(crate) const ZERO: C64 = Complex::new(0.0, 0.0);
pub(crate) const ONE: C64 = Complex::new(1.0, 0.0);

#[inline]
pub(crate) fn cis(phase: f64) -> C64 {
    Complex::from_polar(1.0, phase)
}

/// A dense complex matrix with finite entries.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ComplexMatrix{}", self.0)
    }
}

impl ComplexMatrix {
    pub fn from_row_major(rows: usize, cols: usize, entries: Vec<C64>) -> Result<Self> {
        if rows * cols != entries.len() {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        Self::from_dmatrix(DMatrix::from_row_slice(rows, cols, &entries))
    }

    pub fn from_dmatrix(m: DMatrix<C64>) -> Result<Self> {
        if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            Ok(Self(m))
        } else {
            Err(Error::NonFinite)
        }
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn diagonal(diag: &[C64]) -> Self {
        Self(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.0[(row, col)]
    }

    /// Entries in row-major order.
    pub fn to_row_major(&self) -> Vec<C64> {
        self.0.transpose().iter().copied().collect()
    }

    pub fn as_dmatrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_dmatrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn column(&self, j: usize) -> DVector<C64> {
        self.0.column(j).into_owned()
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols() != rhs.rows() {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows(),
                self.cols(),
                rhs.rows(),
                rhs.cols()
            )));
        }
        Ok(Self(&self.0 * &rhs.0))
    }

    pub fn kron(&self, rhs: &Self) -> Self {
        Self(self.0.kronecker(&rhs.0))
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    /// Largest elementwise modulus of `self - other`; infinite on shape mismatch.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.0.shape() != other.0.shape() {
            return f64::INFINITY;
        }
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        self.max_abs_diff(&self.adjoint())
    }
}

/// Eigen-decomposition of the Hermitian part of `m`; eigenvalues ascending.
pub(crate) fn hermitian_eigen(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let herm = (m + m.adjoint()).scale(0.5);
    let eig = herm.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (values, vectors)
}

/// Eigenvalues this close to zero (relative to the spectral radius) are
/// rounding noise; their square roots would otherwise leak ~1e-8 errors.
pub(crate) fn noise_floor(values: &[f64]) -> f64 {
    let scale = values.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    8.0 * values.len() as f64 * f64::EPSILON * scale
}

/// Hermitian PSD square root with the `PSD_CLAMP` policy.
pub(crate) fn psd_sqrt(m: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let (values, vectors) = hermitian_eigen(m);
    let floor = noise_floor(&values);
    let mut roots = Vec::with_capacity(values.len());
    for v in values {
        if v < -PSD_CLAMP {
            return Err(Error::NotDensityOperator(format!(
                "eigenvalue {v:e} below -{PSD_CLAMP:e}"
            )));
        }
        roots.push(C64::from(if v > floor { v.sqrt() } else { 0.0 }));
    }
    let scaled = DMatrix::from_fn(vectors.nrows(), vectors.ncols(), |r, c| {
        vectors[(r, c)] * roots[c]
    });
    Ok(&scaled * vectors.adjoint())
}

/// A positive semidefinite, unit-trace Hermitian matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    matrix: ComplexMatrix,
}

impl DensityOperator {
    /// Validates Hermiticity, trace and positivity.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::NotDensityOperator(format!(
                "{}x{} matrix is not square",
                matrix.rows(),
                matrix.cols()
            )));
        }
        let herm = matrix.hermiticity_defect();
        if herm > HERMITIAN_TOL {
            return Err(Error::NotDensityOperator(format!(
                "hermiticity defect {herm:e}"
            )));
        }
        let tr = matrix.trace();
        if (tr - ONE).norm() > TRACE_TOL {
            return Err(Error::NotDensityOperator(format!("trace {tr}")));
        }
        let (values, _) = hermitian_eigen(matrix.as_dmatrix());
        if let Some(&min) = values.first() {
            if min < -PSD_TOL {
                return Err(Error::NotDensityOperator(format!(
                    "eigenvalue {min:e} is negative"
                )));
            }
        }
        Ok(Self { matrix })
    }

    /// Wraps matrices produced by trace- and positivity-preserving maps of
    /// valid inputs.
    pub(crate) fn from_trusted(matrix: DMatrix<C64>) -> Self {
        debug_assert!(matrix.is_square());
        Self {
            matrix: ComplexMatrix(matrix),
        }
    }

    pub fn from_pure(state: &[C64]) -> Result<Self> {
        let v = DVector::from_column_slice(state);
        let norm = v.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(invalid("state", "zero or non-finite vector"));
        }
        let v = v.unscale(norm);
        Self::new(ComplexMatrix::from_dmatrix(&v * v.adjoint())?)
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self::from_trusted(DMatrix::identity(dim, dim).unscale(dim as f64))
    }

    /// Computational basis projector `|index⟩⟨index|`.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut m = DMatrix::zeros(dim, dim);
        m[(index, index)] = ONE;
        Self::from_trusted(m)
    }

    /// `diag(weights)`; weights must lie on the probability simplex.
    pub fn diagonal(weights: &[f64]) -> Result<Self> {
        let diag: Vec<C64> = weights.iter().map(|&w| C64::from(w)).collect();
        Self::new(ComplexMatrix::diagonal(&diag))
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.matrix.get(row, col)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigen(self.matrix.as_dmatrix()).0
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.matrix.max_abs_diff(&other.matrix)
    }
}

/// The triple (θ, ω, λ) describing λ|ψ⟩⟨ψ| + (1−λ)|ψ⊥⟩⟨ψ⊥|.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QubitParams {
    pub theta: f64,
    pub omega: f64,
    pub lambda: f64,
}

impl QubitParams {
    pub fn new(theta: f64, omega: f64, lambda: f64) -> Result<Self> {
        let p = Self {
            theta,
            omega,
            lambda,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.theta.is_finite() {
            return Err(invalid("theta", "must be finite"));
        }
        if !self.omega.is_finite() {
            return Err(invalid("omega", "must be finite"));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(invalid(
                "lambda",
                format!("{} is outside [0, 1]", self.lambda),
            ));
        }
        Ok(())
    }
}

/// |ψ⟩ = cos θ|0⟩ + e^{iω} sin θ|1⟩.
pub fn psi(theta: f64, omega: f64) -> [C64; 2] {
    [C64::from(theta.cos()), cis(omega) * theta.sin()]
}

/// |ψ⊥⟩ = −sin θ|0⟩ + e^{iω} cos θ|1⟩.
pub fn psi_perp(theta: f64, omega: f64) -> [C64; 2] {
    [C64::from(-theta.sin()), cis(omega) * theta.cos()]
}

pub fn qubit_from_params(p: &QubitParams) -> Result<DensityOperator> {
    p.validate()?;
    let a = psi(p.theta, p.omega);
    let b = psi_perp(p.theta, p.omega);
    let m = DMatrix::from_fn(2, 2, |r, c| {
        a[r] * a[c].conj() * p.lambda + b[r] * b[c].conj() * (1.0 - p.lambda)
    });
    Ok(DensityOperator::from_trusted(m))
}

/// Kronecker product of two density operators.
pub fn tensor(a: &DensityOperator, b: &DensityOperator) -> DensityOperator {
    DensityOperator::from_trusted(a.matrix.kron(&b.matrix).0)
}

fn check_dims(total: usize, dims: &[usize]) -> Result<()> {
    let product: usize = dims.iter().product();
    if dims.is_empty() || dims.contains(&0) || product != total {
        return Err(Error::DimensionMismatch(format!(
            "subsystem dims {dims:?} do not multiply to {total}"
        )));
    }
    Ok(())
}

/// Reduced state on the subsystems listed in `keep` (in the given order).
pub fn reduce(rho: &DensityOperator, dims: &[usize], keep: &[usize]) -> Result<DensityOperator> {
    check_dims(rho.dim(), dims)?;
    let mut seen = vec![false; dims.len()];
    for &k in keep {
        if k >= dims.len() || seen[k] {
            return Err(Error::DimensionMismatch(format!(
                "invalid kept subsystem {k} for {} subsystems",
                dims.len()
            )));
        }
        seen[k] = true;
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !seen[*i]).collect();

    let mut strides = vec![1usize; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    let offset = |digits: &[usize], which: &[usize]| -> usize {
        which
            .iter()
            .zip(digits)
            .map(|(&sys, &digit)| digit * strides[sys])
            .sum()
    };
    let kept_dims: Vec<usize> = keep.iter().map(|&k| dims[k]).collect();
    let traced_dims: Vec<usize> = traced.iter().map(|&k| dims[k]).collect();
    let kept_offsets: Vec<usize> = digit_strings(&kept_dims)
        .iter()
        .map(|d| offset(d, keep))
        .collect();
    let traced_offsets: Vec<usize> = digit_strings(&traced_dims)
        .iter()
        .map(|d| offset(d, &traced))
        .collect();

    let m = rho.matrix.as_dmatrix();
    let n = kept_offsets.len();
    let out = DMatrix::from_fn(n, n, |a, b| {
        traced_offsets
            .iter()
            .map(|&t| m[(kept_offsets[a] + t, kept_offsets[b] + t)])
            .sum()
    });
    Ok(DensityOperator::from_trusted(out))
}

/// All mixed-radix digit strings for `dims`, most significant first.
fn digit_strings(dims: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::with_capacity(dims.len())];
    for &d in dims {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..d).map(move |digit| {
                    let mut s = prefix.clone();
                    s.push(digit);
                    s
                })
            })
            .collect();
    }
    out
}

/// Marginal of `rho` on subsystem `keep`.
pub fn partial_trace(
    rho: &DensityOperator,
    dims: &[usize],
    keep: usize,
) -> Result<DensityOperator> {
    reduce(rho, dims, &[keep])
}

pub fn mat_sqrt_psd(rho: &DensityOperator) -> Result<ComplexMatrix> {
    psd_sqrt(rho.matrix.as_dmatrix()).map(ComplexMatrix)
}

/// True iff `max |U†U − I| ≤ tol` elementwise.
pub fn is_unitary(u: &ComplexMatrix, tol: f64) -> bool {
    unitarity_defect(u) <= tol
}

pub(crate) fn unitarity_defect(u: &ComplexMatrix) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    let gram = u.0.adjoint() * &u.0;
    let id = DMatrix::<C64>::identity(u.rows(), u.rows());
    gram.iter()
        .zip(id.iter())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max)
}

/// Real Bloch coordinates with ρ = (I + x σx + y σy + z σz) / 2.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn of(rho: &DensityOperator) -> Result<Self> {
        if rho.dim() != 2 {
            return Err(Error::DimensionMismatch(format!(
                "Bloch vector needs a qubit, got dimension {}",
                rho.dim()
            )));
        }
        let off = rho.get(0, 1);
        Ok(Self {
            x: 2.0 * off.re,
            y: -2.0 * off.im,
            z: (rho.get(0, 0) - rho.get(1, 1)).re,
        })
    }

    pub fn to_density(&self) -> Result<DensityOperator> {
        let m = ComplexMatrix::from_row_major(
            2,
            2,
            vec![
                C64::new((1.0 + self.z) / 2.0, 0.0),
                C64::new(self.x / 2.0, -self.y / 2.0),
                C64::new(self.x / 2.0, self.y / 2.0),
                C64::new((1.0 - self.z) / 2.0, 0.0),
            ],
        )?;
        DensityOperator::new(m)
    }
}

pub fn bloch_roundtrip(p: &QubitParams) -> Result<BlochVector> {
    BlochVector::of(&qubit_from_params(p)?)
}
