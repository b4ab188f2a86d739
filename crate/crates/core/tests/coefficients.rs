mod common;

use common::{random_channel, random_input};
use qubit_broadcast::channels::{
    build_l_vectors, compute_coefficients, copy_marginal, default_omega_grid, default_theta_grid,
    universality_residual, BroadcastChannel,
};
use qubit_broadcast::cloners::gisin_massar_channel;
use qubit_broadcast::densops::{qubit_from_params, ComplexMatrix, QubitParams, C64};
use qubit_broadcast::fidelity::uhlmann_fidelity;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Copy k of the ancilla's bits into the clone registers and park the input
/// in the residual; with a uniform ancilla both clones are I/2.
fn swap_out_channel() -> BroadcastChannel {
    let d = 4;
    let mut entries = vec![C64::from(0.0); 64];
    for s in 0..2 {
        for k in 0..d {
            entries[(2 * k + s) * 8 + s * d + k] = C64::from(1.0);
        }
    }
    BroadcastChannel::new(
        ComplexMatrix::from_row_major(8, 8, entries).unwrap(),
        vec![0.25; 4],
        2,
    )
    .unwrap()
}

fn marginal_entries(ch: &BroadcastChannel, p: &QubitParams) -> (f64, C64) {
    let m = copy_marginal(ch, &qubit_from_params(p).unwrap(), 0).unwrap();
    (m.get(0, 0).re, m.get(0, 1))
}

#[test]
fn marginals_are_affine_in_lambda() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let ch = random_channel(&mut rng, 4, 2);
        let p = random_input(&mut rng);
        let at = |lambda| marginal_entries(&ch, &QubitParams { lambda, ..p });
        let ((x0, y0), (xh, yh), (x1, y1)) = (at(0.0), at(0.5), at(1.0));
        assert!((xh - 0.5 * (x0 + x1)).abs() < 1e-10);
        assert!((yh - (y0 + y1) * 0.5).norm() < 1e-10);
    }
}

#[test]
fn block_sums_agree_with_simulation_and_ignore_the_input_basis() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let ch = random_channel(&mut rng, 4, 2);
        let mut ex = Vec::new();
        let mut ey = Vec::new();
        for &theta in &default_theta_grid() {
            for &omega in &default_omega_grid() {
                let co = compute_coefficients(&ch, theta, omega).unwrap();
                assert!((co.e_x - co.e_x_blocks).abs() < 1e-9);
                assert!((co.e_y - co.e_y_blocks).norm() < 1e-9);
                assert!((co.e_x - (co.a + 2.0 * co.b)).abs() < 1e-15);
                ex.push(co.e_x);
                ey.push(co.e_y);
            }
        }
        assert!(ex.iter().all(|v| (v - ex[0]).abs() < 1e-10));
        assert!(ey.iter().all(|v| (v - ey[0]).norm() < 1e-10));
    }
}

#[test]
fn l_vector_products_reproduce_b_and_d() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..100 {
        let ch = random_channel(&mut rng, 4, 2);
        let p = random_input(&mut rng);
        let co = compute_coefficients(&ch, p.theta, p.omega).unwrap();
        let lv = build_l_vectors(&ch, p.theta, p.omega).unwrap();
        assert!((lv.l0.norm_squared() - co.b).abs() < 1e-9);
        assert!((lv.l1.dotc(&lv.l0) - co.d).norm() < 1e-9);
    }
}

#[test]
fn unit_e_coefficients_force_perfect_fidelity_at_half() {
    let half =
        |theta, omega| qubit_from_params(&QubitParams::new(theta, omega, 0.5).unwrap()).unwrap();
    for ch in [
        BroadcastChannel::identity(4, 2).unwrap(),
        gisin_massar_channel(2).unwrap(),
        swap_out_channel(),
    ] {
        let (r_x, r_y) =
            universality_residual(&ch, &default_theta_grid(), &default_omega_grid()).unwrap();
        assert!(r_x < 1e-9 && r_y < 1e-9, "residuals {r_x} {r_y}");
        for &theta in &default_theta_grid() {
            for &omega in &default_omega_grid() {
                let rho = half(theta, omega);
                let f = uhlmann_fidelity(&copy_marginal(&ch, &rho, 0).unwrap(), &rho)
                    .unwrap()
                    .value();
                assert!((f - 1.0).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn constant_outputs() {
    let co = compute_coefficients(&swap_out_channel(), 0.3, 0.9).unwrap();
    assert!(co.a.abs() < 1e-15 && (co.b - 0.5).abs() < 1e-15 && (co.e_x - 1.0).abs() < 1e-15);
    // the input moves to the residual and the pure ancilla k = 0 fills the clones with |00⟩
    let mut entries = vec![C64::from(0.0); 64];
    for s in 0..2 {
        for k in 0..4 {
            let row = (k % 2) * 2 + s + 4 * (k / 2);
            entries[row * 8 + s * 4 + k] = C64::from(1.0);
        }
    }
    let ch = BroadcastChannel::new(
        ComplexMatrix::from_row_major(8, 8, entries).unwrap(),
        vec![1.0, 0.0, 0.0, 0.0],
        2,
    )
    .unwrap();
    let co = compute_coefficients(&ch, 0.7, 0.2).unwrap();
    assert!((co.e_x - 2.0).abs() < 1e-12 && co.a.abs() < 1e-12 && (co.b - 1.0).abs() < 1e-12);
    let (r_x, _) =
        universality_residual(&ch, &default_theta_grid(), &default_omega_grid()).unwrap();
    assert!((r_x - 1.0).abs() < 1e-12);
}
