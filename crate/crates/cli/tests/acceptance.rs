//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use qubit_broadcast::channels::{
    compute_coefficients, copy_marginal, default_omega_grid, default_theta_grid,
    universality_residual, BroadcastChannel,
};
use qubit_broadcast::cloners::{
    gisin_massar_channel, omega_dqcm, omega_dqcm_clone, optimal_mixed_fidelity, optimal_z,
};
use qubit_broadcast::densops::{
    is_unitary, qubit_from_params, BlochVector, ComplexMatrix, QubitParams, C64,
};
use qubit_broadcast::fidelity::{qubit_fidelity_closed_form, uhlmann_fidelity};
use qubit_broadcast::nutsearch::{decode, ChannelParameterization, UNIVERSALITY_TOL};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_input(rng: &mut ChaCha8Rng) -> QubitParams {
    QubitParams::new(
        rng.random_range(-PI..PI),
        rng.random_range(0.0..2.0 * PI),
        rng.random_range(0.0..=1.0),
    )
    .unwrap()
}

fn random_channel(rng: &mut ChaCha8Rng) -> BroadcastChannel {
    let h = (0..64).map(|_| rng.random_range(-PI..PI)).collect();
    let s = (0..3).map(|_| rng.random_range(-1.5..1.5)).collect();
    decode(&ChannelParameterization::new(8, h, s).unwrap(), 2).unwrap()
}

fn fidelity_of_copy(ch: &BroadcastChannel, p: &QubitParams, copy: usize) -> f64 {
    let rho = qubit_from_params(p).unwrap();
    uhlmann_fidelity(&copy_marginal(ch, &rho, copy).unwrap(), &rho)
        .unwrap()
        .value()
}

fn closed_form_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        // output drawn uniformly from the Bloch ball
        let b = loop {
            let v = [0; 3].map(|_| rng.random_range(-1.0..1.0f64));
            if v.iter().map(|c| c * c).sum::<f64>() <= 1.0 {
                break BlochVector {
                    x: v[0],
                    y: v[1],
                    z: v[2],
                };
            }
        };
        let out = b.to_density().unwrap();
        let p = random_input(&mut rng);
        let closed = qubit_fidelity_closed_form(out.get(0, 0).re, out.get(0, 1), &p)
            .unwrap()
            .value();
        let general = uhlmann_fidelity(&out, &qubit_from_params(&p).unwrap())
            .unwrap()
            .value();
        worst = worst.max((closed - general).abs());
    }
    let elapsed = start.elapsed();
    outcome(
        worst < 1e-9 && elapsed < Duration::from_secs(10),
        format!("max deviation {worst:.2e} over 10^4 pairs in {elapsed:.2?}"),
    )
}

fn five_sixths() -> Outcome {
    let formula = optimal_mixed_fidelity(2, 0.0).unwrap().value();
    let ch = gisin_massar_channel(2).unwrap();
    let simulated = fidelity_of_copy(&ch, &QubitParams::new(0.9, 2.1, 0.0).unwrap(), 0);
    outcome(
        (formula - 5.0 / 6.0).abs() < 1e-12 && (simulated - 5.0 / 6.0).abs() < 1e-9,
        format!("formula {formula:.15}, simulated {simulated:.15}"),
    )
}

fn gisin_massar_law() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut worst: f64 = 0.0;
    for copies in 2..=4 {
        let ch = gisin_massar_channel(copies).unwrap();
        for _ in 0..100 {
            let p = random_input(&mut rng);
            let expected = optimal_mixed_fidelity(copies, p.lambda).unwrap().value();
            for copy in 0..copies {
                worst = worst.max((fidelity_of_copy(&ch, &p, copy) - expected).abs());
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst < 1e-9 && elapsed < Duration::from_secs(60),
        format!("max deviation {worst:.2e} for M in 2..=4 in {elapsed:.2?}"),
    )
}

fn lambda_shape() -> Outcome {
    let mut asym: f64 = 0.0;
    let mut drop: f64 = 0.0;
    for copies in [2, 3, 4, 10] {
        let f: Vec<f64> = (0..=100)
            .map(|i| {
                optimal_mixed_fidelity(copies, i as f64 / 100.0)
                    .unwrap()
                    .value()
            })
            .collect();
        for i in 0..=100 {
            asym = asym.max((f[i] - f[100 - i]).abs());
        }
        for i in 0..50 {
            drop = drop.max(f[i] - f[i + 1]);
        }
    }
    outcome(
        asym < 1e-12 && drop <= 1e-12,
        format!("max asymmetry {asym:.2e}, max decrease on [0, 1/2] {drop:.2e}"),
    )
}

fn omega_machine() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let mut unitary = true;
    let mut state_gap: f64 = 0.0;
    let mut fid_gap: f64 = 0.0;
    for _ in 0..1000 {
        let omega = rng.random_range(0.0..2.0 * PI);
        let ch = omega_dqcm(omega).unwrap();
        unitary &= ch.unitary().rows() == 8 && is_unitary(ch.unitary(), 1e-10);
        let expected = omega_dqcm_clone(omega).unwrap();
        let p = QubitParams::new(
            rng.random_range(-PI..PI),
            omega,
            rng.random_range(0.0..=1.0),
        )
        .unwrap();
        let rho = qubit_from_params(&p).unwrap();
        for copy in 0..2 {
            let m = copy_marginal(&ch, &rho, copy).unwrap();
            state_gap = state_gap.max(m.max_abs_diff(&expected));
            fid_gap = fid_gap.max((uhlmann_fidelity(&m, &rho).unwrap().value() - 0.5).abs());
        }
    }
    outcome(
        unitary && state_gap < 1e-10 && fid_gap < 1e-10,
        format!("unitary {unitary}, clone deviation {state_gap:.2e}, |F - 1/2| {fid_gap:.2e}"),
    )
}

fn coefficient_extraction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let mut agree: f64 = 0.0;
    let mut vary: f64 = 0.0;
    for _ in 0..100 {
        let ch = random_channel(&mut rng);
        let mut first = None;
        for &theta in &default_theta_grid() {
            for &omega in &default_omega_grid() {
                let co = compute_coefficients(&ch, theta, omega).unwrap();
                agree = agree
                    .max((co.e_x_blocks - (co.a + 2.0 * co.b)).abs())
                    .max((co.e_y_blocks - (co.c + co.d * 2.0)).norm());
                let (ex, ey) = *first.get_or_insert((co.e_x_blocks, co.e_y_blocks));
                vary = vary
                    .max((co.e_x_blocks - ex).abs())
                    .max((co.e_y_blocks - ey).norm());
            }
        }
    }
    outcome(
        agree < 1e-9 && vary < 1e-10,
        format!("block sums vs simulation {agree:.2e}, variation over grid {vary:.2e}"),
    )
}

/// Input into the residual, ancilla bits into the clones: both clones are I/2.
fn swap_out_channel() -> BroadcastChannel {
    let mut entries = vec![C64::from(0.0); 64];
    for s in 0..2 {
        for k in 0..4 {
            entries[(2 * k + s) * 8 + s * 4 + k] = C64::from(1.0);
        }
    }
    BroadcastChannel::new(
        ComplexMatrix::from_row_major(8, 8, entries).unwrap(),
        vec![0.25; 4],
        2,
    )
    .unwrap()
}

fn unit_coefficients_chain() -> Outcome {
    let channels = [
        ("identity", BroadcastChannel::identity(4, 2).unwrap()),
        ("Gisin-Massar", gisin_massar_channel(2).unwrap()),
        ("swap-out", swap_out_channel()),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, ch) in &channels {
        let (r_x, r_y) =
            universality_residual(ch, &default_theta_grid(), &default_omega_grid()).unwrap();
        let mut gap: f64 = 0.0;
        for &theta in &default_theta_grid() {
            for &omega in &default_omega_grid() {
                let f = fidelity_of_copy(ch, &QubitParams::new(theta, omega, 0.5).unwrap(), 0);
                gap = gap.max((f - 1.0).abs());
            }
        }
        pass &= r_x < 1e-9 && r_y < 1e-9 && gap < 1e-9;
        parts.push(format!("{name} |1 - F| {gap:.2e}"));
    }
    outcome(pass, parts.join(", "))
}

fn bloch_contraction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let mut worst: f64 = 0.0;
    for copies in [2, 3] {
        let ch = gisin_massar_channel(copies).unwrap();
        let z = optimal_z(copies).unwrap();
        for _ in 0..100 {
            let p = random_input(&mut rng);
            let rho = qubit_from_params(&p).unwrap();
            let len = BlochVector::of(&copy_marginal(&ch, &rho, 0).unwrap())
                .unwrap()
                .norm();
            worst = worst.max((len - (2.0 * p.lambda - 1.0).abs() * (2.0 * z - 1.0)).abs());
        }
    }
    outcome(worst < 1e-9, format!("max deviation {worst:.2e}"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("qbcast-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn sweep(args: &[&str], out: &PathBuf) -> Result<Vec<[f64; 3]>, String> {
    let o = Command::new(env!("CARGO_BIN_EXE_qbcast"))
        .arg("nut-sweep")
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    if !o.status.success() {
        return Err(String::from_utf8_lossy(&o.stderr).into_owned());
    }
    let text = std::fs::read_to_string(out).map_err(|e| e.to_string())?;
    text.lines()
        .skip(1)
        .map(|l| {
            let v: Vec<f64> = l.split(',').take(3).map(|c| c.parse().unwrap()).collect();
            Ok([v[0], v[1], v[2]])
        })
        .collect()
}

const SWEEP_ARGS: [&str; 14] = [
    "-M",
    "2",
    "-d",
    "4",
    "--seed",
    "42",
    "--budget",
    "20000",
    "--restarts",
    "8",
    "--levels",
    "0.55,0.6,0.65,0.7,0.75,0.8,0.85,0.9,0.95,1.0",
    "--random-states",
    "64",
];

fn search_corroboration() -> Outcome {
    let start = Instant::now();
    let points = match sweep(&SWEEP_ARGS, &scratch("sweep.csv")) {
        Ok(p) => p,
        Err(e) => return outcome(false, format!("sweep failed: {e}")),
    };
    let floor = points.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
    let control = sweep(
        &[
            "--levels",
            "0.5",
            "--fixed-omega",
            "1.1",
            "--init",
            "omega-dqcm",
            "--seed",
            "42",
        ],
        &scratch("control.csv"),
    );
    let control_spread = match control {
        Ok(p) if p.len() == 1 => p[0][1],
        Ok(_) => return outcome(false, "control produced no point"),
        Err(e) => return outcome(false, format!("control failed: {e}")),
    };
    let elapsed = start.elapsed();
    outcome(
        points.len() == 10 && floor >= UNIVERSALITY_TOL && control_spread < 1e-8 && elapsed < Duration::from_secs(900),
        format!(
            "smallest spread over {} levels {floor:.3e}, control spread {control_spread:.2e}, {elapsed:.1?}",
            points.len()
        ),
    )
}

fn cli_determinism() -> Outcome {
    let (a, b) = (scratch("det-a.csv"), scratch("det-b.csv"));
    let args = [
        "--levels",
        "0.6,0.9",
        "--budget",
        "3000",
        "--restarts",
        "4",
        "--seed",
        "42",
    ];
    if let Err(e) = sweep(&args, &a).and_then(|_| sweep(&args, &b)) {
        return outcome(false, format!("sweep failed: {e}"));
    }
    let (x, y) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    outcome(
        x == y && !x.is_empty(),
        format!("{} bytes, identical: {}", x.len(), x == y),
    )
}

fn main() {
    type Check = fn() -> Outcome;
    let criteria: [(&str, Check); 10] = [
        (
            "closed-form fidelity equals Uhlmann fidelity",
            closed_form_oracle,
        ),
        ("optimal 1->2 fidelity of pure inputs is 5/6", five_sixths),
        (
            "Gisin-Massar clones follow the mixed-state law",
            gisin_massar_law,
        ),
        (
            "mixed-state law is symmetric and rises towards lambda = 1/2",
            lambda_shape,
        ),
        (
            "omega machine: unitary, pure clones, fidelity 1/2",
            omega_machine,
        ),
        (
            "E_x, E_y block sums match simulation and are basis independent",
            coefficient_extraction,
        ),
        (
            "E_x = 1, E_y = 0 forces F = 1 at lambda = 1/2",
            unit_coefficients_chain,
        ),
        ("Gisin-Massar Bloch contraction", bloch_contraction),
        (
            "search finds no universal broadcaster; control succeeds",
            search_corroboration,
        ),
        ("nut-sweep CSV is byte-deterministic", cli_determinism),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failures += 1;
        }
        println!(
            "criterion {:>2} {}: {} ({})",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            name,
            o.detail
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
