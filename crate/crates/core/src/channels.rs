//! Unitary broadcast channels acting on one input qubit and a diagonal
//! ancilla, together with the coefficient analysis behind the universality
//! conditions.
//!
//! The input basis is `|s⟩ ⊗ |k⟩` with index `s·d + k`. The output space is
//! split as `M` copy qubits followed by a residual register of dimension
//! `r = 2d / 2^M`, so an output index reads `j·r + t` where the row block
//! `j = b₀b₁…b_{M−1}` carries the copy bits, copy 0 most significant.
//!
//! The coefficient analysis concerns one designated copy `c`. Its bit has
//! stride `2^{M−1−c}` inside `j`; a row block is called *even* for copy `c`
//! when that bit is 0, and its partner block sets the bit. For the last copy
//! this is ordinary parity of `j`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8, PI};

use nalgebra::{DMatrix, DVector};

use crate::densops::{
    partial_trace, qubit_from_params, unitarity_defect, ComplexMatrix, DensityOperator,
    QubitParams, C64, ZERO,
};
use crate::error::{invalid, Error, Result};
use crate::fidelity::uhlmann_fidelity;

pub const UNITARY_TOL: f64 = 1e-10;
pub const SPECTRUM_TOL: f64 = 1e-12;
/// Allowed disagreement between simulated and block-sum coefficients.
pub const COEFFICIENT_TOL: f64 = 1e-9;
pub const SCHWARZ_TOL: f64 = 1e-9;

/// The copy analysed when none is given.
pub const DEFAULT_COPY: usize = 0;

pub fn default_theta_grid() -> Vec<f64> {
    vec![0.0, FRAC_PI_8, FRAC_PI_4, 3.0 * FRAC_PI_8, FRAC_PI_2]
}

pub fn default_omega_grid() -> Vec<f64> {
    vec![0.0, PI / 3.0, 2.0 * PI / 3.0, PI, 3.0 * FRAC_PI_2]
}

/// Unitary `U` on qubit ⊗ ancilla with ancilla state `diag(c₀, …, c_{d−1})`,
/// read out as `M` copies plus a residual register.
#[derive(Clone, Debug, PartialEq)]
pub struct BroadcastChannel {
    unitary: ComplexMatrix,
    ancilla_spectrum: Vec<f64>,
    copies: usize,
}

impl BroadcastChannel {
    pub fn new(unitary: ComplexMatrix, ancilla_spectrum: Vec<f64>, copies: usize) -> Result<Self> {
        let d = ancilla_spectrum.len();
        if d == 0 {
            return Err(invalid("ancilla_spectrum", "empty"));
        }
        if copies < 2 {
            return Err(invalid(
                "copies",
                format!("need at least 2 copies, got {copies}"),
            ));
        }
        if unitary.rows() != 2 * d || unitary.cols() != 2 * d {
            return Err(Error::DimensionMismatch(format!(
                "unitary is {}x{} but the ancilla has dimension {d}",
                unitary.rows(),
                unitary.cols()
            )));
        }
        if copies >= usize::BITS as usize || !(2 * d).is_multiple_of(1usize << copies) {
            return Err(Error::DimensionMismatch(format!(
                "2d = {} is not divisible by 2^{copies}",
                2 * d
            )));
        }
        if ancilla_spectrum
            .iter()
            .any(|c| !(c.is_finite() && *c >= 0.0))
        {
            return Err(invalid(
                "ancilla_spectrum",
                "entries must be finite and non-negative",
            ));
        }
        let total: f64 = ancilla_spectrum.iter().sum();
        if (total - 1.0).abs() > SPECTRUM_TOL {
            return Err(invalid(
                "ancilla_spectrum",
                format!("sums to {total}, not 1"),
            ));
        }
        let defect = unitarity_defect(&unitary);
        if defect > UNITARY_TOL {
            return Err(Error::NotUnitary(defect));
        }
        Ok(Self {
            unitary,
            ancilla_spectrum,
            copies,
        })
    }

    /// `U = I` with the ancilla in `|0⟩`.
    pub fn identity(ancilla_dim: usize, copies: usize) -> Result<Self> {
        let mut spectrum = vec![0.0; ancilla_dim];
        if let Some(first) = spectrum.first_mut() {
            *first = 1.0;
        }
        Self::new(ComplexMatrix::identity(2 * ancilla_dim), spectrum, copies)
    }

    pub fn ancilla_dim(&self) -> usize {
        self.ancilla_spectrum.len()
    }

    pub fn copies(&self) -> usize {
        self.copies
    }

    pub fn unitary(&self) -> &ComplexMatrix {
        &self.unitary
    }

    pub fn ancilla_spectrum(&self) -> &[f64] {
        &self.ancilla_spectrum
    }

    pub fn ancilla_state(&self) -> DensityOperator {
        let diag: Vec<C64> = self
            .ancilla_spectrum
            .iter()
            .map(|&c| C64::from(c))
            .collect();
        DensityOperator::from_trusted(ComplexMatrix::diagonal(&diag).into_dmatrix())
    }

    /// Dimension `2d / 2^M` of the register left after the copies.
    pub fn residual_dim(&self) -> usize {
        (2 * self.ancilla_dim()) >> self.copies
    }

    /// `[2, …, 2, r]`: the copies followed by the residual register.
    pub fn output_dims(&self) -> Vec<usize> {
        let mut dims = vec![2; self.copies];
        dims.push(self.residual_dim());
        dims
    }

    fn check_copy(&self, copy: usize) -> Result<()> {
        if copy >= self.copies {
            return Err(invalid(
                "copy_index",
                format!("{copy} out of range for {} copies", self.copies),
            ));
        }
        Ok(())
    }

    /// Column of `U` that is the image of `|s⟩|k⟩`.
    fn image(&self, s: usize, k: usize) -> DVector<C64> {
        self.unitary.column(s * self.ancilla_dim() + k)
    }

    /// The single-copy qubit map ρ ↦ tr_rest[U(ρ ⊗ ρ_anc)U†] on `copy`.
    pub fn clone_map(&self, copy: usize) -> Result<CloneMap> {
        self.check_copy(copy)?;
        let d = self.ancilla_dim();
        let r = self.residual_dim();
        let stride = 1usize << (self.copies - 1 - copy);
        let blocks = 1usize << self.copies;
        let u = self.unitary.as_dmatrix();
        let mut transfer = [[ZERO; 4]; 4];
        for (k, &weight) in self.ancilla_spectrum.iter().enumerate() {
            if weight == 0.0 {
                continue;
            }
            for j in (0..blocks).filter(|j| (j / stride).is_multiple_of(2)) {
                for t in 0..r {
                    let rows = [j * r + t, (j + stride) * r + t];
                    for (a, &ra) in rows.iter().enumerate() {
                        for (b, &rb) in rows.iter().enumerate() {
                            for s in 0..2 {
                                for sp in 0..2 {
                                    transfer[2 * a + b][2 * s + sp] +=
                                        u[(ra, s * d + k)] * u[(rb, sp * d + k)].conj() * weight;
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(CloneMap { transfer })
    }
}

/// Linear map on 2×2 matrices, `out[a][b] = Σ T[(a,b),(s,s')] ρ[s][s']`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CloneMap {
    transfer: [[C64; 4]; 4],
}

impl CloneMap {
    /// Output entries `[ρ00, ρ01, ρ10, ρ11]` for input entries in the same layout.
    #[inline]
    pub fn apply_entries(&self, rho: &[C64; 4]) -> [C64; 4] {
        let mut out = [ZERO; 4];
        for (o, row) in out.iter_mut().zip(self.transfer.iter()) {
            *o = row.iter().zip(rho.iter()).map(|(t, x)| t * x).sum();
        }
        out
    }

    pub fn apply(&self, rho: &DensityOperator) -> Result<DensityOperator> {
        if rho.dim() != 2 {
            return Err(Error::DimensionMismatch(format!(
                "clone map acts on qubits, got dimension {}",
                rho.dim()
            )));
        }
        let e = [rho.get(0, 0), rho.get(0, 1), rho.get(1, 0), rho.get(1, 1)];
        let o = self.apply_entries(&e);
        Ok(DensityOperator::from_trusted(DMatrix::from_row_slice(
            2, 2, &o,
        )))
    }
}

/// Full joint output U(ρ ⊗ ρ_anc)U†.
pub fn apply_broadcast(ch: &BroadcastChannel, rho: &DensityOperator) -> Result<DensityOperator> {
    if rho.dim() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "broadcast input must be a qubit, got dimension {}",
            rho.dim()
        )));
    }
    let n = 2 * ch.ancilla_dim();
    let r = rho.matrix().as_dmatrix();
    let mut out = DMatrix::<C64>::zeros(n, n);
    for (k, &weight) in ch.ancilla_spectrum.iter().enumerate() {
        if weight == 0.0 {
            continue;
        }
        let images = [ch.image(0, k), ch.image(1, k)];
        for s in 0..2 {
            for sp in 0..2 {
                let coeff = r[(s, sp)] * weight;
                if coeff != ZERO {
                    out += (&images[s] * images[sp].adjoint()) * coeff;
                }
            }
        }
    }
    Ok(DensityOperator::from_trusted(out))
}

/// Marginal of the joint output on subsystem `copy_index` of `subsystem_dims`.
pub fn clone_marginal(
    ch: &BroadcastChannel,
    rho: &DensityOperator,
    copy_index: usize,
    subsystem_dims: &[usize],
) -> Result<DensityOperator> {
    let joint = apply_broadcast(ch, rho)?;
    partial_trace(&joint, subsystem_dims, copy_index)
}

/// Marginal on `copy` under the channel's own output dims.
pub fn copy_marginal(
    ch: &BroadcastChannel,
    rho: &DensityOperator,
    copy: usize,
) -> Result<DensityOperator> {
    ch.check_copy(copy)?;
    clone_marginal(ch, rho, copy, &ch.output_dims())
}

/// The vectors `|u^i_{j,k}⟩`: column block `i` (input qubit), row block `j`,
/// ancilla column `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockPartition {
    ancilla_dim: usize,
    copies: usize,
    block_dim: usize,
    blocks: Vec<DVector<C64>>,
}

impl BlockPartition {
    /// Slices any `2d × 2d` matrix; unitarity is not required.
    pub fn from_matrix(u: &ComplexMatrix, ancilla_dim: usize, copies: usize) -> Result<Self> {
        let n = 2 * ancilla_dim;
        if u.rows() != n || u.cols() != n {
            return Err(Error::DimensionMismatch(format!(
                "expected a {n}x{n} matrix, got {}x{}",
                u.rows(),
                u.cols()
            )));
        }
        if copies == 0 || copies >= usize::BITS as usize || !n.is_multiple_of(1usize << copies) {
            return Err(Error::DimensionMismatch(format!(
                "2d = {n} is not divisible by 2^{copies}"
            )));
        }
        let block_dim = n >> copies;
        let row_blocks = 1usize << copies;
        let m = u.as_dmatrix();
        let mut blocks = Vec::with_capacity(2 * row_blocks * ancilla_dim);
        for i in 0..2 {
            for j in 0..row_blocks {
                for k in 0..ancilla_dim {
                    let col = i * ancilla_dim + k;
                    blocks.push(
                        m.view((j * block_dim, col), (block_dim, 1))
                            .column(0)
                            .into_owned(),
                    );
                }
            }
        }
        Ok(Self {
            ancilla_dim,
            copies,
            block_dim,
            blocks,
        })
    }

    pub fn ancilla_dim(&self) -> usize {
        self.ancilla_dim
    }

    pub fn copies(&self) -> usize {
        self.copies
    }

    /// Dimension `2^{1−M}·d` of every block vector.
    pub fn block_dim(&self) -> usize {
        self.block_dim
    }

    pub fn row_blocks(&self) -> usize {
        1 << self.copies
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> &DVector<C64> {
        &self.blocks[(i * self.row_blocks() + j) * self.ancilla_dim + k]
    }

    pub fn reassemble(&self) -> ComplexMatrix {
        let n = 2 * self.ancilla_dim;
        let mut m = DMatrix::zeros(n, n);
        for i in 0..2 {
            for j in 0..self.row_blocks() {
                for k in 0..self.ancilla_dim {
                    m.view_mut(
                        (j * self.block_dim, i * self.ancilla_dim + k),
                        (self.block_dim, 1),
                    )
                    .copy_from(self.get(i, j, k));
                }
            }
        }
        ComplexMatrix::from_dmatrix(m).expect("blocks hold finite entries")
    }

    fn stride(&self, copy: usize) -> Result<usize> {
        if copy >= self.copies {
            return Err(invalid(
                "copy_index",
                format!("{copy} out of range for {} copies", self.copies),
            ));
        }
        Ok(1 << (self.copies - 1 - copy))
    }

    /// Row blocks whose bit for `copy` is 0, ascending.
    fn even_blocks(&self, copy: usize) -> Result<(usize, Vec<usize>)> {
        let stride = self.stride(copy)?;
        let even = (0..self.row_blocks())
            .filter(|j| (j / stride).is_multiple_of(2))
            .collect();
        Ok((stride, even))
    }

    /// E_x and E_y as block sums over the even row blocks of `copy`.
    pub fn block_sums(&self, ancilla_spectrum: &[f64], copy: usize) -> Result<(f64, C64)> {
        if ancilla_spectrum.len() != self.ancilla_dim {
            return Err(Error::DimensionMismatch(format!(
                "spectrum has {} entries for ancilla dimension {}",
                ancilla_spectrum.len(),
                self.ancilla_dim
            )));
        }
        let (stride, even) = self.even_blocks(copy)?;
        let mut e_x = 0.0;
        let mut e_y = ZERO;
        for (k, &c) in ancilla_spectrum.iter().enumerate() {
            for &j in &even {
                for i in 0..2 {
                    e_x += c * self.get(i, j, k).norm_squared();
                    e_y += self.get(i, j + stride, k).dotc(self.get(i, j, k)) * c;
                }
            }
        }
        Ok((e_x, e_y))
    }
}

pub fn extract_blocks(ch: &BroadcastChannel) -> Result<BlockPartition> {
    BlockPartition::from_matrix(&ch.unitary, ch.ancilla_dim(), ch.copies)
}

/// Affine-in-λ structure x = Aλ + B, y = Cλ + D of one clone at fixed (θ, ω).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: C64,
    pub d: C64,
    /// A + 2B from simulation.
    pub e_x: f64,
    /// C + 2D from simulation.
    pub e_y: C64,
    /// Phase of E_y.
    pub delta: f64,
    /// E_x from the block sums of U.
    pub e_x_blocks: f64,
    /// E_y from the block sums of U.
    pub e_y_blocks: C64,
}

impl ChannelCoefficients {
    pub fn x(&self, lambda: f64) -> f64 {
        self.a * lambda + self.b
    }

    pub fn y(&self, lambda: f64) -> C64 {
        self.c * lambda + self.d
    }
}

pub fn compute_coefficients(
    ch: &BroadcastChannel,
    theta: f64,
    omega: f64,
) -> Result<ChannelCoefficients> {
    compute_coefficients_on_copy(ch, theta, omega, DEFAULT_COPY)
}

pub fn compute_coefficients_on_copy(
    ch: &BroadcastChannel,
    theta: f64,
    omega: f64,
    copy: usize,
) -> Result<ChannelCoefficients> {
    let marginal = |lambda: f64| -> Result<(f64, C64)> {
        let rho = qubit_from_params(&QubitParams::new(theta, omega, lambda)?)?;
        let m = copy_marginal(ch, &rho, copy)?;
        Ok((m.get(0, 0).re, m.get(0, 1)))
    };
    let (x0, y0) = marginal(0.0)?;
    let (x1, y1) = marginal(1.0)?;
    let (a, b, c, d) = (x1 - x0, x0, y1 - y0, y0);
    let e_x = a + 2.0 * b;
    let e_y = c + d * 2.0;
    let (e_x_blocks, e_y_blocks) = extract_blocks(ch)?.block_sums(&ch.ancilla_spectrum, copy)?;
    let gap = (e_x - e_x_blocks).abs().max((e_y - e_y_blocks).norm());
    if gap > COEFFICIENT_TOL {
        return Err(Error::Inconsistent(format!(
            "simulated (E_x, E_y) = ({e_x}, {e_y}) but block sums give ({e_x_blocks}, {e_y_blocks})"
        )));
    }
    Ok(ChannelCoefficients {
        a,
        b,
        c,
        d,
        e_x,
        e_y,
        delta: e_y.arg(),
        e_x_blocks,
        e_y_blocks,
    })
}

/// `(max |E_x − 1|, max |E_y|)` over the grid; both vanish for any
/// universal broadcaster.
pub fn universality_residual(
    ch: &BroadcastChannel,
    theta_grid: &[f64],
    omega_grid: &[f64],
) -> Result<(f64, f64)> {
    universality_residual_on_copy(ch, theta_grid, omega_grid, DEFAULT_COPY)
}

pub fn universality_residual_on_copy(
    ch: &BroadcastChannel,
    theta_grid: &[f64],
    omega_grid: &[f64],
    copy: usize,
) -> Result<(f64, f64)> {
    let mut r_x: f64 = 0.0;
    let mut r_y: f64 = 0.0;
    for &theta in theta_grid {
        for &omega in omega_grid {
            let co = compute_coefficients_on_copy(ch, theta, omega, copy)?;
            r_x = r_x.max((co.e_x - 1.0).abs());
            r_y = r_y.max(co.e_y.norm());
        }
    }
    Ok((r_x, r_y))
}

/// The vectors L₀, L₁ of a 1→2 channel; ⟨L₀|L₀⟩ = B and ⟨L₁|L₀⟩ = D.
#[derive(Clone, Debug, PartialEq)]
pub struct LVectors {
    pub l0: DVector<C64>,
    pub l1: DVector<C64>,
    /// `w[j·d + k] = −sin θ·u⁰_{j,k} + e^{iω} cos θ·u¹_{j,k}`.
    pub w: Vec<DVector<C64>>,
}

pub fn build_l_vectors(ch: &BroadcastChannel, theta: f64, omega: f64) -> Result<LVectors> {
    build_l_vectors_on_copy(ch, theta, omega, DEFAULT_COPY)
}

pub fn build_l_vectors_on_copy(
    ch: &BroadcastChannel,
    theta: f64,
    omega: f64,
    copy: usize,
) -> Result<LVectors> {
    if ch.copies != 2 {
        return Err(invalid(
            "copies",
            format!("L-vectors need M = 2, got {}", ch.copies),
        ));
    }
    let bp = extract_blocks(ch)?;
    let d = ch.ancilla_dim();
    let (s, c) = theta.sin_cos();
    let phase = crate::densops::cis(omega) * c;
    let w: Vec<DVector<C64>> = (0..bp.row_blocks())
        .flat_map(|j| (0..d).map(move |k| (j, k)))
        .map(|(j, k)| bp.get(0, j, k) * C64::from(-s) + bp.get(1, j, k) * phase)
        .collect();
    let (stride, even) = bp.even_blocks(copy)?;
    let mut l0 = Vec::with_capacity(d * d);
    let mut l1 = Vec::with_capacity(d * d);
    for (k, &ck) in ch.ancilla_spectrum.iter().enumerate() {
        let root = ck.sqrt();
        for &j in &even {
            l0.extend(w[j * d + k].iter().map(|z| z * root));
            l1.extend(w[(j + stride) * d + k].iter().map(|z| z * root));
        }
    }
    Ok(LVectors {
        l0: DVector::from_vec(l0),
        l1: DVector::from_vec(l1),
        w,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchwarzCheck {
    pub saturated: bool,
    /// L₀ = g·L₁ when saturated and L₁ ≠ 0.
    pub g: Option<C64>,
    /// ⟨L₀|L₀⟩⟨L₁|L₁⟩ − |⟨L₁|L₀⟩|² (non-negative up to rounding).
    pub gap: f64,
}

pub fn schwarz_proportionality(lv: &LVectors) -> SchwarzCheck {
    let n00 = lv.l0.norm_squared();
    let n11 = lv.l1.norm_squared();
    let overlap = lv.l1.dotc(&lv.l0);
    let gap = n00 * n11 - overlap.norm_sqr();
    let saturated = gap < SCHWARZ_TOL;
    let g = (saturated && n11 > 1e-24).then(|| overlap / n11);
    SchwarzCheck { saturated, g, gap }
}

/// `max_k |⟨u⁰_{j,k}|u¹_{j,k}⟩ + ⟨u⁰_{j',k}|u¹_{j',k}⟩|` over ancilla indices with
/// `c_k > 0`, where `j, j'` are the odd row blocks of the default copy.
pub fn orthogonality_residual(bp: &BlockPartition, ancilla_spectrum: &[f64]) -> Result<f64> {
    orthogonality_residual_on_copy(bp, ancilla_spectrum, DEFAULT_COPY)
}

pub fn orthogonality_residual_on_copy(
    bp: &BlockPartition,
    ancilla_spectrum: &[f64],
    copy: usize,
) -> Result<f64> {
    if bp.copies != 2 {
        return Err(invalid(
            "copies",
            format!("orthogonality residual needs M = 2, got {}", bp.copies),
        ));
    }
    if ancilla_spectrum.len() != bp.ancilla_dim {
        return Err(Error::DimensionMismatch(format!(
            "spectrum has {} entries for ancilla dimension {}",
            ancilla_spectrum.len(),
            bp.ancilla_dim
        )));
    }
    let (stride, even) = bp.even_blocks(copy)?;
    let mut worst: f64 = 0.0;
    for (k, &ck) in ancilla_spectrum.iter().enumerate() {
        if ck <= 0.0 {
            continue;
        }
        let sum: C64 = even
            .iter()
            .map(|&j| bp.get(0, j + stride, k).dotc(bp.get(1, j + stride, k)))
            .sum();
        worst = worst.max(sum.norm());
    }
    Ok(worst)
}

/// Least-squares fit of G(θ) = ½ + (a/2)·cos²2θ, where G averages the λ = 0
/// clone fidelity at θ and −θ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThetaFit {
    pub a: f64,
    /// Largest absolute deviation of G from the fitted model.
    pub residual: f64,
}

pub fn theta_fit(ch: &BroadcastChannel, omega: f64, theta_samples: &[f64]) -> Result<ThetaFit> {
    theta_fit_on_copy(ch, omega, theta_samples, DEFAULT_COPY)
}

pub fn theta_fit_on_copy(
    ch: &BroadcastChannel,
    omega: f64,
    theta_samples: &[f64],
    copy: usize,
) -> Result<ThetaFit> {
    if ch.copies != 2 {
        return Err(invalid(
            "copies",
            format!("theta fit needs M = 2, got {}", ch.copies),
        ));
    }
    if theta_samples.is_empty() {
        return Err(invalid("theta_samples", "empty"));
    }
    let clone_fidelity = |theta: f64| -> Result<f64> {
        let input = qubit_from_params(&QubitParams::new(theta, omega, 0.0)?)?;
        let out = copy_marginal(ch, &input, copy)?;
        Ok(uhlmann_fidelity(&out, &input)?.value())
    };
    let mut points = Vec::with_capacity(theta_samples.len());
    for &theta in theta_samples {
        let g = 0.5 * (clone_fidelity(theta)? + clone_fidelity(-theta)?);
        let basis = 0.5 * (2.0 * theta).cos().powi(2);
        points.push((basis, g - 0.5));
    }
    let denom: f64 = points.iter().map(|(t, _)| t * t).sum();
    let a = if denom > 0.0 {
        points.iter().map(|(t, g)| t * g).sum::<f64>() / denom
    } else {
        0.0
    };
    let residual = points
        .iter()
        .map(|(t, g)| (g - a * t).abs())
        .fold(0.0, f64::max);
    Ok(ThetaFit { a, residual })
}
