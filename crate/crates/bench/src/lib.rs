//! Deterministic inputs shared by the benchmarks.

use qganf_core::dataprep::{l2_normalize, make_windows, synthetic_prices};
use qganf_core::engines::FqganCircuit;
use qganf_core::neural::{Activation, DenseNet, Matrix};
use qganf_core::qsim::{amplitude_embed, StateVector};
use qganf_core::{WindowSpec, WindowedDataset};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Smooth positive values with no two entries equal.
pub fn wave(len: usize, phase: f64) -> Vec<f64> {
    (0..len).map(|i| 1.5 + (0.37 * i as f64 + phase).sin()).collect()
}

pub fn real_state(n_qubits: usize, phase: f64) -> StateVector {
    let (unit, _) = l2_normalize(&wave(1 << n_qubits, phase)).expect("nonzero wave");
    amplitude_embed(&unit, n_qubits).expect("valid embedding")
}

pub fn price_series(n: usize) -> Vec<f64> {
    synthetic_prices(n, 1).prices().to_vec()
}

pub fn scaled_windows(n: usize, b: usize, f: usize) -> WindowedDataset {
    let raw = price_series(n);
    let (lo, hi) = raw.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let scaled: Vec<f64> = raw.iter().map(|v| (v - lo) / (hi - lo)).collect();
    make_windows(&scaled, &WindowSpec::new(b, f).expect("valid spec")).expect("enough data")
}

/// A circuit for `(b, f)` and the joint states of the first `batch` windows.
pub fn fqgan_batch(b: usize, f: usize, batch: usize) -> (FqganCircuit, Vec<StateVector>, Vec<f64>) {
    let ds = scaled_windows(batch + b + f + 10, b, f);
    let gen_qubits = qganf_core::vqc::ceil_log2(b);
    let theta = wave(3 * gen_qubits, 0.5);
    let circuit = FqganCircuit::new(b, f, 3, theta.clone()).expect("supported window");
    let joints = ds.pairs[..batch]
        .iter()
        .map(|p| {
            let past = p.normalized_past().expect("nonzero past");
            let target = p.normalized_target().expect("nonzero target");
            circuit.joint_state(&past, &target).expect("joint state")
        })
        .collect();
    (circuit, joints, theta)
}

pub fn dense_net_and_batch(rows: usize) -> (DenseNet, Matrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let net = DenseNet::new(&[16, 64, 64, 4], Activation::LeakyRelu, Activation::Linear, &mut rng).expect("sizes");
    let data: Vec<Vec<f64>> = (0..rows).map(|r| wave(16, r as f64)).collect();
    (net, Matrix::from_rows(&data).expect("rectangular"))
}
