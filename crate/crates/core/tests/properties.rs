use std::f64::consts::PI;

use proptest::prelude::*;
use qubit_broadcast::channels::apply_broadcast;
use qubit_broadcast::cloners::{fidelity_lambda_z, optimal_mixed_fidelity};
use qubit_broadcast::densops::{
    bloch_roundtrip, is_unitary, partial_trace, qubit_from_params, tensor, BlochVector,
    QubitParams, C64,
};
use qubit_broadcast::fidelity::{qubit_fidelity_closed_form, uhlmann_fidelity};
use qubit_broadcast::nutsearch::{decode, ChannelParameterization};

fn qubit() -> impl Strategy<Value = QubitParams> {
    (-PI..PI, 0.0..2.0 * PI, 0.0..=1.0f64).prop_map(|(theta, omega, lambda)| QubitParams {
        theta,
        omega,
        lambda,
    })
}

fn params(ancilla_dim: usize) -> impl Strategy<Value = ChannelParameterization> {
    let n = 2 * ancilla_dim;
    (
        prop::collection::vec(-PI..PI, n * n),
        prop::collection::vec(-3.0..3.0f64, ancilla_dim - 1),
    )
        .prop_map(move |(h, s)| ChannelParameterization::new(n, h, s).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn closed_form_agrees_with_uhlmann(p in qubit(), q in qubit()) {
        let out = qubit_from_params(&q).unwrap();
        let closed = qubit_fidelity_closed_form(out.get(0, 0).re, out.get(0, 1), &p).unwrap().value();
        let general = uhlmann_fidelity(&out, &qubit_from_params(&p).unwrap()).unwrap().value();
        prop_assert!((closed - general).abs() < 1e-9);
    }

    #[test]
    fn fidelity_is_symmetric_and_bounded(p in qubit(), q in qubit()) {
        let (a, b) = (qubit_from_params(&p).unwrap(), qubit_from_params(&q).unwrap());
        let f = uhlmann_fidelity(&a, &b).unwrap().value();
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&f));
        prop_assert!((f - uhlmann_fidelity(&b, &a).unwrap().value()).abs() < 1e-10);
        prop_assert!((uhlmann_fidelity(&a, &a).unwrap().value() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bloch_roundtrip_and_length(p in qubit()) {
        let rho = qubit_from_params(&p).unwrap();
        let b = bloch_roundtrip(&p).unwrap();
        prop_assert!((b.norm() - (2.0 * p.lambda - 1.0).abs()).abs() < 1e-12);
        prop_assert!(b.to_density().unwrap().max_abs_diff(&rho) < 1e-12);
        prop_assert_eq!(b, BlochVector::of(&rho).unwrap());
    }

    #[test]
    fn partial_traces_of_products(p in qubit(), q in qubit()) {
        let (a, b) = (qubit_from_params(&p).unwrap(), qubit_from_params(&q).unwrap());
        let ab = tensor(&a, &b);
        prop_assert!(partial_trace(&ab, &[2, 2], 0).unwrap().max_abs_diff(&a) < 1e-12);
        prop_assert!(partial_trace(&ab, &[2, 2], 1).unwrap().max_abs_diff(&b) < 1e-12);
    }

    #[test]
    fn decode_yields_valid_channels(cp in params(4)) {
        let ch = decode(&cp, 2).unwrap();
        prop_assert!(is_unitary(ch.unitary(), 1e-10));
        let total: f64 = ch.ancilla_spectrum().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(ch.ancilla_spectrum().iter().all(|c| *c >= 0.0));
        let again = decode(&cp, 2).unwrap();
        prop_assert_eq!(ch.unitary().to_row_major(), again.unitary().to_row_major());
    }

    #[test]
    fn broadcast_output_is_a_state(cp in params(2), p in qubit()) {
        let ch = decode(&cp, 2).unwrap();
        let out = apply_broadcast(&ch, &qubit_from_params(&p).unwrap()).unwrap();
        prop_assert!((out.matrix().trace() - C64::from(1.0)).norm() < 1e-12);
        prop_assert!(out.eigenvalues().iter().all(|v| *v > -1e-12));
    }

    #[test]
    fn mixed_fidelity_is_symmetric_in_lambda(m in 2usize..50, lambda in 0.0..=1.0f64) {
        let a = optimal_mixed_fidelity(m, lambda).unwrap().value();
        let b = optimal_mixed_fidelity(m, 1.0 - lambda).unwrap().value();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn fidelity_grows_with_z(lambda in 0.0..0.5f64, z1 in 0.5..=1.0f64, z2 in 0.5..=1.0f64) {
        let (lo, hi) = if z1 <= z2 { (z1, z2) } else { (z2, z1) };
        let f_lo = fidelity_lambda_z(lambda, lo).unwrap().value();
        let f_hi = fidelity_lambda_z(lambda, hi).unwrap().value();
        prop_assert!(f_hi >= f_lo - 1e-12);
    }
}

#[test]
fn mixed_fidelity_rises_towards_the_middle() {
    for m in [2, 3, 5, 10] {
        let grid: Vec<f64> = (0..=100)
            .map(|i| optimal_mixed_fidelity(m, i as f64 / 100.0).unwrap().value())
            .collect();
        for i in 0..50 {
            assert!(grid[i + 1] >= grid[i] - 1e-12);
            assert!((grid[i] - grid[100 - i]).abs() < 1e-12);
        }
    }
}
