#![allow(dead_code)]

use qubit_broadcast::channels::BroadcastChannel;
use qubit_broadcast::densops::QubitParams;
use qubit_broadcast::nutsearch::{decode, ChannelParameterization};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

pub fn random_params(rng: &mut ChaCha8Rng, ancilla_dim: usize) -> ChannelParameterization {
    let n = 2 * ancilla_dim;
    let h = (0..n * n).map(|_| rng.random_range(-PI..PI)).collect();
    let s = (0..ancilla_dim - 1)
        .map(|_| rng.random_range(-1.5..1.5))
        .collect();
    ChannelParameterization::new(n, h, s).unwrap()
}

pub fn random_channel(rng: &mut ChaCha8Rng, ancilla_dim: usize, copies: usize) -> BroadcastChannel {
    decode(&random_params(rng, ancilla_dim), copies).unwrap()
}

pub fn random_input(rng: &mut ChaCha8Rng) -> QubitParams {
    QubitParams::new(
        rng.random_range(-PI..PI),
        rng.random_range(0.0..2.0 * PI),
        rng.random_range(0.0..=1.0),
    )
    .unwrap()
}
