//! Numerical search for broadcast channels whose clone fidelity is constant
//! over a sample of mixed input qubits.
//!
//! Channels are encoded as `U = exp(iH)` for a Hermitian generator `H` plus a
//! point on the ancilla simplex. The objective scores the worst clone: the
//! spread is the largest per-copy range of fidelities, the mean the smallest
//! per-copy mean. A universal broadcaster would reach spread 0 at its level;
//! the floors found here are numerical evidence, not a proof.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::io::Write;

use nalgebra::{DMatrix, Schur};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channels::{BroadcastChannel, CloneMap};
use crate::densops::{cis, hermitian_eigen, qubit_from_params, ComplexMatrix, QubitParams, C64};
use crate::error::{invalid, Error, Result};
use crate::fidelity::closed_form_unchecked;
use crate::optim::NelderMead;
use crate::report::format_f64;

/// A fidelity spread below this counts as numerically universal.
pub const UNIVERSALITY_TOL: f64 = 1e-6;
/// Weight μ of the level penalty μ·(mean − level)².
pub const PENALTY_WEIGHT: f64 = 10.0;
pub const DEFAULT_BUDGET: usize = 20_000;
pub const DEFAULT_RESTARTS: usize = 8;
pub const DEFAULT_ANCILLA_DIM: usize = 4;
pub const DEFAULT_COPIES: usize = 2;
/// Random states drawn in addition to the fixed probes.
pub const DEFAULT_RANDOM_STATES: usize = 64;
/// Half-width of the box from which restart points are drawn.
pub const RESTART_BOX: f64 = PI;

/// Search coordinates of a broadcast channel on `dim_total = 2d` dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelParameterization {
    dim_total: usize,
    /// `n` diagonal entries of H, then (re, im) of each strict-upper entry in
    /// row-major order: `n²` reals.
    hermitian_params: Vec<f64>,
    /// `d − 1` coordinates of the ancilla spectrum.
    simplex_params: Vec<f64>,
}

impl ChannelParameterization {
    pub fn new(
        dim_total: usize,
        hermitian_params: Vec<f64>,
        simplex_params: Vec<f64>,
    ) -> Result<Self> {
        if dim_total < 2 || !dim_total.is_multiple_of(2) {
            return Err(invalid(
                "dim_total",
                format!("must be even and ≥ 2, got {dim_total}"),
            ));
        }
        if hermitian_params.len() != dim_total * dim_total {
            return Err(Error::DimensionMismatch(format!(
                "{} generator coordinates for dimension {dim_total}, need {}",
                hermitian_params.len(),
                dim_total * dim_total
            )));
        }
        if simplex_params.len() != dim_total / 2 - 1 {
            return Err(Error::DimensionMismatch(format!(
                "{} simplex coordinates for ancilla dimension {}, need {}",
                simplex_params.len(),
                dim_total / 2,
                dim_total / 2 - 1
            )));
        }
        if hermitian_params
            .iter()
            .chain(&simplex_params)
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            dim_total,
            hermitian_params,
            simplex_params,
        })
    }

    /// All-zero coordinates: `U = I`, uniform ancilla spectrum.
    pub fn zeros(ancilla_dim: usize) -> Self {
        let n = 2 * ancilla_dim;
        Self {
            dim_total: n,
            hermitian_params: vec![0.0; n * n],
            simplex_params: vec![0.0; ancilla_dim.saturating_sub(1)],
        }
    }

    pub fn dim_total(&self) -> usize {
        self.dim_total
    }

    pub fn ancilla_dim(&self) -> usize {
        self.dim_total / 2
    }

    pub fn hermitian_params(&self) -> &[f64] {
        &self.hermitian_params
    }

    pub fn simplex_params(&self) -> &[f64] {
        &self.simplex_params
    }

    pub fn len(&self) -> usize {
        self.hermitian_params.len() + self.simplex_params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat coordinate vector: generator first, then simplex.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.hermitian_params.clone();
        v.extend_from_slice(&self.simplex_params);
        v
    }

    pub fn from_slice(ancilla_dim: usize, coords: &[f64]) -> Result<Self> {
        let n = 2 * ancilla_dim;
        if coords.len() != n * n + ancilla_dim.saturating_sub(1) {
            return Err(Error::DimensionMismatch(format!(
                "{} coordinates for ancilla dimension {ancilla_dim}",
                coords.len()
            )));
        }
        Self::new(n, coords[..n * n].to_vec(), coords[n * n..].to_vec())
    }

    pub fn generator(&self) -> DMatrix<C64> {
        let n = self.dim_total;
        let mut h = DMatrix::<C64>::zeros(n, n);
        for i in 0..n {
            h[(i, i)] = C64::from(self.hermitian_params[i]);
        }
        let mut at = n;
        for i in 0..n {
            for j in i + 1..n {
                let z = C64::new(self.hermitian_params[at], self.hermitian_params[at + 1]);
                h[(i, j)] = z;
                h[(j, i)] = z.conj();
                at += 2;
            }
        }
        h
    }

    /// `c_k ∝ y_k²` with `y_0 = 1` and `y_k = 1 + p_{k−1}`.
    pub fn spectrum(&self) -> Vec<f64> {
        let y: Vec<f64> = std::iter::once(1.0)
            .chain(self.simplex_params.iter().map(|p| 1.0 + p))
            .collect();
        let total: f64 = y.iter().map(|v| v * v).sum();
        y.iter().map(|v| v * v / total).collect()
    }

    /// Unitary `exp(iH)` assembled from the eigen-decomposition of `H`.
    pub fn unitary(&self) -> DMatrix<C64> {
        let (values, vectors) = hermitian_eigen(&self.generator());
        let phased = DMatrix::from_fn(vectors.nrows(), vectors.ncols(), |r, c| {
            vectors[(r, c)] * cis(values[c])
        });
        phased * vectors.adjoint()
    }

    /// Coordinates of an existing channel; its spectrum must have `c₀ > 0`.
    pub fn encode(ch: &BroadcastChannel) -> Result<Self> {
        let spectrum = ch.ancilla_spectrum();
        let c0 = spectrum[0];
        if c0 <= 0.0 {
            return Err(invalid("ancilla_spectrum", "c₀ must be positive to encode"));
        }
        let simplex_params = spectrum[1..]
            .iter()
            .map(|c| (c / c0).sqrt() - 1.0)
            .collect();

        let u = ch.unitary().as_dmatrix().clone();
        let n = u.nrows();
        let (q, t) = Schur::new(u).unpack();
        // U is normal, so its Schur form is diagonal up to rounding.
        let phases = DMatrix::from_fn(n, n, |r, c| {
            if r == c {
                C64::from(t[(r, r)].arg())
            } else {
                C64::from(0.0)
            }
        });
        let h = &q * phases * q.adjoint();
        let mut hermitian_params = Vec::with_capacity(n * n);
        hermitian_params.extend((0..n).map(|i| h[(i, i)].re));
        for i in 0..n {
            for j in i + 1..n {
                let z = (h[(i, j)] + h[(j, i)].conj()) * 0.5;
                hermitian_params.push(z.re);
                hermitian_params.push(z.im);
            }
        }
        Self::new(n, hermitian_params, simplex_params)
    }
}

pub fn decode(cp: &ChannelParameterization, copies: usize) -> Result<BroadcastChannel> {
    BroadcastChannel::new(
        ComplexMatrix::from_dmatrix(cp.unitary())?,
        cp.spectrum(),
        copies,
    )
}

/// Input states for the constancy objective.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSample {
    pub states: Vec<QubitParams>,
    pub seed: u64,
}

impl StateSample {
    /// λ ∈ {0, ½, 1} × θ ∈ {0, π/4, π/2} × ω ∈ {0, π/2}.
    pub fn probes() -> Vec<QubitParams> {
        Self::probes_at(&[0.0, FRAC_PI_2])
    }

    fn probes_at(omegas: &[f64]) -> Vec<QubitParams> {
        let mut out = Vec::new();
        for &lambda in &[0.0, 0.5, 1.0] {
            for &theta in &[0.0, FRAC_PI_4, FRAC_PI_2] {
                for &omega in omegas {
                    out.push(QubitParams {
                        theta,
                        omega,
                        lambda,
                    });
                }
            }
        }
        out
    }

    /// Fixed probes followed by `random_states` draws with θ ∈ [0, π/2],
    /// ω ∈ [0, 2π), λ ∈ [0, 1].
    pub fn generate(seed: u64, random_states: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut states = Self::probes();
        states.extend((0..random_states).map(|_| QubitParams {
            theta: rng.random_range(0.0..=FRAC_PI_2),
            omega: rng.random_range(0.0..2.0 * PI),
            lambda: rng.random_range(0.0..=1.0),
        }));
        Self { states, seed }
    }

    /// Like [`generate`](Self::generate) but with every state at phase `omega`.
    pub fn fixed_omega(omega: f64, seed: u64, random_states: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut states = Self::probes_at(&[omega]);
        states.extend((0..random_states).map(|_| QubitParams {
            theta: rng.random_range(0.0..=FRAC_PI_2),
            omega,
            lambda: rng.random_range(0.0..=1.0),
        }));
        Self { states, seed }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// A sample with its density matrices precomputed.
struct PreparedSample {
    params: Vec<QubitParams>,
    entries: Vec<[C64; 4]>,
}

impl PreparedSample {
    fn new(sample: &StateSample) -> Result<Self> {
        if sample.is_empty() {
            return Err(invalid("sample", "no states"));
        }
        let mut entries = Vec::with_capacity(sample.len());
        for p in &sample.states {
            let rho = qubit_from_params(p)?;
            entries.push([rho.get(0, 0), rho.get(0, 1), rho.get(1, 0), rho.get(1, 1)]);
        }
        Ok(Self {
            params: sample.states.clone(),
            entries,
        })
    }

    fn copy_stats(&self, map: &CloneMap) -> CopyStats {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for (p, rho) in self.params.iter().zip(&self.entries) {
            let out = map.apply_entries(rho);
            let f = closed_form_unchecked(out[0].re, out[1], p.theta, p.omega, p.lambda);
            min = min.min(f);
            max = max.max(f);
            sum += f;
        }
        CopyStats {
            mean: sum / self.params.len() as f64,
            spread: max - min,
        }
    }

    fn constancy(&self, ch: &BroadcastChannel) -> Result<Constancy> {
        let per_copy = (0..ch.copies())
            .map(|c| ch.clone_map(c).map(|m| self.copy_stats(&m)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Constancy::from_copies(per_copy))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CopyStats {
    pub mean: f64,
    /// max − min of the clone fidelity over the sample.
    pub spread: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constancy {
    /// Smallest per-copy mean.
    pub mean: f64,
    /// Largest per-copy spread.
    pub spread: f64,
    pub per_copy: Vec<CopyStats>,
}

impl Constancy {
    fn from_copies(per_copy: Vec<CopyStats>) -> Self {
        let mean = per_copy
            .iter()
            .map(|s| s.mean)
            .fold(f64::INFINITY, f64::min);
        let spread = per_copy.iter().map(|s| s.spread).fold(0.0, f64::max);
        Self {
            mean,
            spread,
            per_copy,
        }
    }
}

pub fn constancy_objective(ch: &BroadcastChannel, sample: &StateSample) -> Result<Constancy> {
    PreparedSample::new(sample)?.constancy(ch)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchConfig {
    pub copies: usize,
    pub ancilla_dim: usize,
    /// Objective evaluations per restart.
    pub budget: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Starting point of restart 0; later restarts draw from the box.
    pub initial: Option<ChannelParameterization>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            copies: DEFAULT_COPIES,
            ancilla_dim: DEFAULT_ANCILLA_DIM,
            budget: DEFAULT_BUDGET,
            restarts: DEFAULT_RESTARTS,
            seed: 42,
            initial: None,
        }
    }
}

impl SearchConfig {
    fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(invalid("budget", "must be at least 1"));
        }
        if self.restarts == 0 {
            return Err(invalid("restarts", "must be at least 1"));
        }
        if self.ancilla_dim == 0 || self.ancilla_dim > 8 {
            return Err(invalid(
                "d",
                format!("supported range is 1..=8, got {}", self.ancilla_dim),
            ));
        }
        // surfaces divisibility and copy-count errors before the search starts
        decode(
            &ChannelParameterization::zeros(self.ancilla_dim),
            self.copies,
        )?;
        if let Some(init) = &self.initial {
            if init.ancilla_dim() != self.ancilla_dim {
                return Err(Error::DimensionMismatch(format!(
                    "initial point has ancilla dimension {}, search uses {}",
                    init.ancilla_dim(),
                    self.ancilla_dim
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TradeoffPoint {
    pub target_level: f64,
    pub achieved_spread: f64,
    pub achieved_mean: f64,
    /// spread + μ·(mean − level)² at the reported point.
    pub objective: f64,
    /// Objective evaluations summed over restarts.
    pub evaluations_used: usize,
    pub params: ChannelParameterization,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TradeoffCurve {
    pub points: Vec<TradeoffPoint>,
}

pub const CSV_HEADER: [&str; 4] = [
    "target_level",
    "achieved_spread",
    "achieved_mean",
    "evaluations_used",
];

impl TradeoffCurve {
    pub fn min_spread(&self) -> Option<f64> {
        self.points
            .iter()
            .map(|p| p.achieved_spread)
            .reduce(f64::min)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let io = |e: csv::Error| Error::Inconsistent(format!("csv output failed: {e}"));
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(CSV_HEADER).map_err(io)?;
        for p in &self.points {
            w.write_record([
                format_f64(p.target_level),
                format_f64(p.achieved_spread),
                format_f64(p.achieved_mean),
                p.evaluations_used.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| io(e.into()))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is ASCII"))
    }
}

fn level_objective(
    prepared: &PreparedSample,
    ancilla_dim: usize,
    copies: usize,
    level: f64,
    coords: &[f64],
) -> f64 {
    let Ok(cp) = ChannelParameterization::from_slice(ancilla_dim, coords) else {
        return f64::INFINITY;
    };
    match decode(&cp, copies).and_then(|ch| prepared.constancy(&ch)) {
        Ok(c) => c.spread + PENALTY_WEIGHT * (c.mean - level).powi(2),
        Err(_) => f64::INFINITY,
    }
}

/// Restart `r` draws from its own ChaCha stream keyed by `(seed, r)`.
fn restart_start(cfg: &SearchConfig, restart: usize) -> Vec<f64> {
    if restart == 0 {
        if let Some(init) = &cfg.initial {
            return init.to_vec();
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(restart as u64);
    let len = ChannelParameterization::zeros(cfg.ancilla_dim).len();
    (0..len)
        .map(|_| rng.random_range(-RESTART_BOX..RESTART_BOX))
        .collect()
}

/// Result of [`multistart`].
#[derive(Clone, Debug, PartialEq)]
pub struct MultistartResult {
    pub x: Vec<f64>,
    pub value: f64,
    /// Evaluations summed over restarts.
    pub evaluations: usize,
}

/// Minimises `objective` over channel coordinates with `cfg.restarts`
/// independent Nelder–Mead runs of `cfg.budget` evaluations each. Ties go to
/// the lowest restart index.
pub fn multistart<F>(cfg: &SearchConfig, objective: F) -> Result<MultistartResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    cfg.validate()?;
    let optimizer = NelderMead {
        max_evals: cfg.budget,
        ..Default::default()
    };
    let runs: Vec<_> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| optimizer.minimize(&objective, &restart_start(cfg, r)))
        .collect();
    let evaluations = runs.iter().map(|m| m.evaluations).sum();
    let best = runs
        .into_iter()
        .reduce(|best, m| if m.value < best.value { m } else { best })
        .expect("at least one restart");
    Ok(MultistartResult {
        x: best.x,
        value: best.value,
        evaluations,
    })
}

/// Best point (lowest penalised objective) over all restarts.
pub fn minimize_spread_at_level(
    cfg: &SearchConfig,
    target_level: f64,
    sample: &StateSample,
) -> Result<TradeoffPoint> {
    cfg.validate()?;
    if !(target_level > 0.0 && target_level <= 1.0) {
        return Err(invalid(
            "target_level",
            format!("{target_level} is outside (0, 1]"),
        ));
    }
    let prepared = PreparedSample::new(sample)?;
    let best = multistart(cfg, |x| {
        level_objective(&prepared, cfg.ancilla_dim, cfg.copies, target_level, x)
    })?;
    let params = ChannelParameterization::from_slice(cfg.ancilla_dim, &best.x)?;
    let stats = prepared.constancy(&decode(&params, cfg.copies)?)?;
    Ok(TradeoffPoint {
        target_level,
        achieved_spread: stats.spread,
        achieved_mean: stats.mean,
        objective: best.value,
        evaluations_used: best.evaluations,
        params,
    })
}

/// One search per level, reported in ascending level order.
pub fn tradeoff_sweep(
    cfg: &SearchConfig,
    levels: &[f64],
    sample: &StateSample,
) -> Result<TradeoffCurve> {
    let mut sorted = levels.to_vec();
    if sorted.iter().any(|l| !l.is_finite()) {
        return Err(invalid("levels", "must be finite"));
    }
    sorted.sort_by(f64::total_cmp);
    let points = sorted
        .iter()
        .map(|&level| minimize_spread_at_level(cfg, level, sample))
        .collect::<Result<Vec<_>>>()?;
    Ok(TradeoffCurve { points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloners::omega_dqcm;
    use crate::densops::is_unitary;

    #[test]
    fn zero_params_decode_to_identity_and_uniform_spectrum() {
        let ch = decode(&ChannelParameterization::zeros(4), 2).unwrap();
        assert!(ch.unitary().max_abs_diff(&ComplexMatrix::identity(8)) < 1e-15);
        assert!(ch
            .ancilla_spectrum()
            .iter()
            .all(|c| (c - 0.25).abs() < 1e-15));
    }

    #[test]
    fn lengths_are_checked() {
        assert!(ChannelParameterization::new(8, vec![0.0; 63], vec![0.0; 3]).is_err());
        assert!(ChannelParameterization::new(8, vec![0.0; 64], vec![0.0; 2]).is_err());
        assert!(ChannelParameterization::new(7, vec![0.0; 49], vec![0.0; 2]).is_err());
        assert!(ChannelParameterization::from_slice(4, &[0.0; 66]).is_err());
        assert_eq!(ChannelParameterization::zeros(4).len(), 67);
    }

    #[test]
    fn encode_roundtrips_the_omega_machine() {
        let ch = omega_dqcm(1.3).unwrap();
        let cp = ChannelParameterization::encode(&ch).unwrap();
        assert_eq!(cp.simplex_params(), &[-1.0, -1.0, -1.0]);
        let back = decode(&cp, 2).unwrap();
        assert!(is_unitary(back.unitary(), 1e-12));
        assert!(back.unitary().max_abs_diff(ch.unitary()) < 1e-10);
        assert_eq!(back.ancilla_spectrum(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn probes_are_part_of_every_full_sample() {
        let s = StateSample::generate(7, 5);
        assert_eq!(s.len(), 23);
        assert_eq!(&s.states[..18], StateSample::probes().as_slice());
        assert_eq!(s, StateSample::generate(7, 5));
        assert_ne!(s, StateSample::generate(8, 5));
        let f = StateSample::fixed_omega(0.4, 7, 5);
        assert!(f.states.iter().all(|p| p.omega == 0.4));
    }

    #[test]
    fn invalid_search_requests() {
        let sample = StateSample::generate(1, 2);
        let cfg = SearchConfig {
            budget: 0,
            ..Default::default()
        };
        assert!(minimize_spread_at_level(&cfg, 0.5, &sample).is_err());
        let cfg = SearchConfig {
            budget: 10,
            restarts: 1,
            ..Default::default()
        };
        assert!(minimize_spread_at_level(&cfg, 0.0, &sample).is_err());
        assert!(minimize_spread_at_level(&cfg, 1.5, &sample).is_err());
        let cfg = SearchConfig {
            ancilla_dim: 3,
            budget: 10,
            ..Default::default()
        };
        assert!(minimize_spread_at_level(&cfg, 0.5, &sample).is_err());
    }

    #[test]
    fn empty_sweep_is_header_only() {
        let curve =
            tradeoff_sweep(&SearchConfig::default(), &[], &StateSample::generate(1, 1)).unwrap();
        assert!(curve.points.is_empty());
        assert_eq!(
            curve.to_csv_string().unwrap(),
            "target_level,achieved_spread,achieved_mean,evaluations_used\n"
        );
    }
}
