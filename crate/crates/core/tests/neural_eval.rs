use proptest::prelude::*;
use qganf_core::dataprep::synthetic_prices;
use qganf_core::eval::{cell_seed, mae, r2, rmse, run_cell, window_sweep, write_sweep_csv};
use qganf_core::neural::{bce_grad, bce_loss, mse_grad, mse_loss, Activation, AdamConfig, AdamState, DenseNet, Matrix};
use qganf_core::{ModelKind, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_batch(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data: Vec<Vec<f64>> = (0..rows)
        .map(|_| (0..cols).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    Matrix::from_rows(&data).unwrap()
}

fn net_loss(net: &DenseNet, x: &Matrix, labels: &[f64]) -> f64 {
    bce_loss(&net.predict(x).unwrap().data, labels).unwrap()
}

fn close(analytic: f64, numeric: f64) -> bool {
    (analytic - numeric).abs() <= 1e-4 * numeric.abs().max(1e-3)
}

#[test]
fn backward_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let h = 1e-6;
    for trial in 0..10 {
        let mut net = DenseNet::new(&[5, 7, 4, 1], Activation::LeakyRelu, Activation::Sigmoid, &mut rng).unwrap();
        let x = random_batch(&mut rng, 6, 5);
        let labels: Vec<f64> = (0..6).map(|i| (i % 2) as f64).collect();
        let cache = net.forward(&x).unwrap();
        let g_out = bce_grad(&cache.output().data, &labels).unwrap();
        let grads = net
            .backward(&cache, &Matrix { rows: 6, cols: 1, data: g_out })
            .unwrap();

        let base = net.params();
        for (i, &analytic) in grads.flat().iter().enumerate() {
            let mut p = base.clone();
            p[i] = base[i] + h;
            net.set_params(&p).unwrap();
            let up = net_loss(&net, &x, &labels);
            p[i] = base[i] - h;
            net.set_params(&p).unwrap();
            let down = net_loss(&net, &x, &labels);
            let numeric = (up - down) / (2.0 * h);
            assert!(close(analytic, numeric), "trial {trial} param {i}: {analytic} vs {numeric}");
        }
        net.set_params(&base).unwrap();

        for i in 0..x.data.len() {
            let mut xp = x.clone();
            xp.data[i] += h;
            let up = net_loss(&net, &xp, &labels);
            xp.data[i] -= 2.0 * h;
            let down = net_loss(&net, &xp, &labels);
            let numeric = (up - down) / (2.0 * h);
            assert!(close(grads.input.data[i], numeric), "trial {trial} input {i}");
        }
    }
}

#[test]
fn linear_output_mse_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let net = DenseNet::new(&[3, 4, 2], Activation::LeakyRelu, Activation::Linear, &mut rng).unwrap();
    let x = random_batch(&mut rng, 4, 3);
    let target = vec![0.3; 8];
    let cache = net.forward(&x).unwrap();
    let g = mse_grad(&cache.output().data, &target).unwrap();
    let grads = net.backward(&cache, &Matrix { rows: 4, cols: 2, data: g }).unwrap();
    let h = 1e-6;
    for i in 0..x.data.len() {
        let mut xp = x.clone();
        xp.data[i] += h;
        let up = mse_loss(&net.predict(&xp).unwrap().data, &target).unwrap();
        xp.data[i] -= 2.0 * h;
        let down = mse_loss(&net.predict(&xp).unwrap().data, &target).unwrap();
        assert!(close(grads.input.data[i], (up - down) / (2.0 * h)));
    }
}

#[test]
fn adam_matches_textbook_update() {
    let config = AdamConfig::with_lr(0.01);
    let mut state = AdamState::new(2);
    let mut params = vec![1.0, -2.0];
    let grads = [[0.5, -1.0], [0.25, 3.0], [-0.1, 0.0]];
    let (b1, b2, eps) = (config.beta1, config.beta2, config.epsilon);
    let mut expect = params.clone();
    let (mut m, mut v) = ([0.0; 2], [0.0; 2]);
    for (t, g) in grads.iter().enumerate() {
        state.step(&config, &mut params, g).unwrap();
        let t = (t + 1) as i32;
        for i in 0..2 {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / (1.0 - b1.powi(t));
            let v_hat = v[i] / (1.0 - b2.powi(t));
            expect[i] -= config.lr * m_hat / (v_hat.sqrt() + eps);
        }
        for i in 0..2 {
            assert!((params[i] - expect[i]).abs() < 1e-14);
        }
    }
}

#[test]
fn metric_examples() {
    let (p, t) = ([1.0, 2.0, 3.0], [2.0, 2.0, 2.0]);
    assert!((rmse(&p, &t).unwrap() - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
    assert!((mae(&p, &t).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    assert!(r2(&p, &t).is_err());
    assert!((r2(&t, &p).unwrap() - (1.0 - 2.0 / 2.0)).abs() < 1e-15);
}

proptest! {
    #[test]
    fn mae_is_bounded_by_rmse(pairs in prop::collection::vec((-1e3..1e3f64, -1e3..1e3f64), 1..50)) {
        let (p, t): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let (r, m) = (rmse(&p, &t).unwrap(), mae(&p, &t).unwrap());
        let max = p.iter().zip(&t).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(m <= r * (1.0 + 1e-12) + 1e-12);
        prop_assert!(r <= max * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn mean_predictor_scores_zero(t in prop::collection::vec(-1e3..1e3f64, 2..50)) {
        let mean = t.iter().sum::<f64>() / t.len() as f64;
        let ss: f64 = t.iter().map(|v| (v - mean).powi(2)).sum();
        prop_assume!(ss > 1e-6);
        prop_assert!(r2(&vec![mean; t.len()], &t).unwrap().abs() < 1e-9);
    }
}

fn quick_fqgan() -> TrainConfig {
    let mut c = TrainConfig::for_kind(ModelKind::Fqgan);
    c.epochs = 2;
    c
}

#[test]
fn single_cell_sweep_equals_run_cell() {
    let series = synthetic_prices(160, 4);
    let report = window_sweep(&series, &[ModelKind::Fqgan], &[(4, 2)], 9, 0.8, |_| quick_fqgan()).unwrap();
    assert!(report.failures.is_empty());
    let mut config = quick_fqgan();
    config.seed = cell_seed(9, 4, 2, ModelKind::Fqgan);
    let direct = run_cell(&series, 4, 2, &config, 0.8).unwrap();
    assert_eq!(report.cells, vec![direct]);
}

#[test]
fn sweep_records_unsupported_cells_and_sorts() {
    let series = synthetic_prices(160, 4);
    let windows = [(8, 4), (4, 2), (4, 1)];
    let kinds = [ModelKind::Fqgan, ModelKind::HybridQgan];
    let report = window_sweep(&series, &kinds, &windows, 1, 0.8, |k| {
        let mut c = TrainConfig::for_kind(k);
        c.epochs = 1;
        c.batch_size = 32;
        c
    })
    .unwrap();
    let cells: Vec<_> = report.cells.iter().map(|c| (c.kind, c.b, c.f)).collect();
    assert_eq!(
        cells,
        vec![
            (ModelKind::HybridQgan, 4, 1),
            (ModelKind::Fqgan, 4, 2),
            (ModelKind::Fqgan, 8, 4),
        ]
    );
    let failed: Vec<_> = report.failures.iter().map(|c| (c.kind, c.b, c.f)).collect();
    assert!(failed.contains(&(ModelKind::Fqgan, 4, 1)));
    assert!(failed.contains(&(ModelKind::HybridQgan, 4, 2)));

    let mut buf = Vec::new();
    write_sweep_csv(&report, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next(), Some("kind,b,f,split,n_pairs,rmse,mae,r2"));
    assert_eq!(text.lines().count(), 1 + 2 * cells.len());
}

#[test]
fn empty_sweep_is_rejected() {
    let series = synthetic_prices(100, 4);
    assert!(window_sweep(&series, &[], &[(4, 2)], 0, 0.8, TrainConfig::for_kind).is_err());
}
