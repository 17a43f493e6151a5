use nalgebra::{DMatrix, DVector};
use qgamp_core::{
    gamp_run, squared_error, GampConfig, Label, Matrix, MixingMatrix, OutputChannel, Prior, RunOptions, ScalarQuantizer,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Problem {
    a: Matrix,
    x: Vec<f64>,
    s: Vec<f64>,
}

fn problem(n: usize, m: usize, sigma2: f64, seed: u64) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = (1.0 / m as f64).sqrt();
    let data = (0..m * n)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let a = Matrix::from_row_major(m, n, data).unwrap();
    let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let s = a
        .mul_vec(&x)
        .into_iter()
        .map(|z| z + sigma2.sqrt() * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Problem { a, x, s }
}

fn encode(q: &ScalarQuantizer, s: &[f64]) -> Vec<Label> {
    s.iter().map(|&v| q.encode(v).unwrap()).collect()
}

fn gaussian() -> Prior {
    Prior::gaussian(0.0, 1.0).unwrap()
}

#[test]
fn four_matrix_products_per_iteration() {
    let p = problem(40, 80, 0.0, 1);
    let q = ScalarQuantizer::uniform(8, -2.0, 2.0).unwrap();
    let y = encode(&q, &p.s);
    let a = MixingMatrix::new(p.a);
    let ch = OutputChannel::new(q, 0.0).unwrap();
    let cfg = GampConfig {
        max_iters: 7,
        stop_tol: 0.0,
        ..GampConfig::default()
    };
    let out = gamp_run(&a, &y, &ch, &gaussian(), &cfg, RunOptions::default()).unwrap();
    assert_eq!(out.iterations, 7);
    assert_eq!(a.products(), 4 * 7);
}

#[test]
fn uninformative_labels_leave_the_prior_mean() {
    let p = problem(10, 20, 0.0, 2);
    let q = ScalarQuantizer::regular(vec![], None).unwrap();
    let y = encode(&q, &p.s);
    let prior = Prior::gaussian(0.4, 2.0).unwrap();
    let ch = OutputChannel::new(q, 0.0).unwrap();
    let out = gamp_run(
        &MixingMatrix::new(p.a),
        &y,
        &ch,
        &prior,
        &GampConfig::default(),
        RunOptions::default(),
    )
    .unwrap();
    assert!(out.x_hat.iter().all(|&v| (v - 0.4).abs() < 1e-12));
}

#[test]
fn runs_are_bit_identical() {
    let p = problem(60, 120, 0.0, 3);
    let q = ScalarQuantizer::modulo(0.25, 4).unwrap();
    let y = encode(&q, &p.s);
    let ch = OutputChannel::new(q, 0.0).unwrap();
    let a = MixingMatrix::new(p.a);
    let opts = RunOptions {
        truth: Some(&p.x),
        keep_snapshots: true,
    };
    let r1 = gamp_run(&a, &y, &ch, &gaussian(), &GampConfig::default(), opts).unwrap();
    let r2 = gamp_run(&a, &y, &ch, &gaussian(), &GampConfig::default(), opts).unwrap();
    assert_eq!(r1, r2);
}

#[test]
fn permuting_rows_and_columns_permutes_the_estimate() {
    let (n, m) = (30, 70);
    let p = problem(n, m, 0.0, 4);
    let q = ScalarQuantizer::uniform(16, -2.0, 2.0).unwrap();
    let y = encode(&q, &p.s);
    let ch = OutputChannel::new(q, 0.0).unwrap();
    let cfg = GampConfig {
        max_iters: 10,
        ..GampConfig::default()
    };
    let base = gamp_run(
        &MixingMatrix::new(p.a.clone()),
        &y,
        &ch,
        &gaussian(),
        &cfg,
        RunOptions::default(),
    )
    .unwrap();

    let rows: Vec<usize> = (0..m).map(|i| (i * 17 + 5) % m).collect();
    let cols: Vec<usize> = (0..n).map(|j| (j * 7 + 3) % n).collect();
    let mut permuted = Matrix::zeros(m, n);
    for (i, &ri) in rows.iter().enumerate() {
        for (j, &cj) in cols.iter().enumerate() {
            permuted.set(i, j, p.a.get(ri, cj));
        }
    }
    let y_perm: Vec<Label> = rows.iter().map(|&ri| y[ri]).collect();
    let out = gamp_run(
        &MixingMatrix::new(permuted),
        &y_perm,
        &ch,
        &gaussian(),
        &cfg,
        RunOptions::default(),
    )
    .unwrap();
    for (j, &cj) in cols.iter().enumerate() {
        // Summation order changes, so equality is up to rounding.
        assert!((out.x_hat[j] - base.x_hat[cj]).abs() < 1e-10);
    }
}

#[test]
fn fine_quantization_reaches_the_linear_gaussian_posterior() {
    let (n, m, sigma2) = (50, 100, 0.1);
    let p = problem(n, m, sigma2, 5);
    // Cells of width ~2e-4 against noise of standard deviation ~0.3.
    let q = ScalarQuantizer::uniform(1 << 16, -6.0, 6.0).unwrap();
    let y = encode(&q, &p.s);
    let ch = OutputChannel::new(q, sigma2).unwrap();
    let cfg = GampConfig {
        max_iters: 200,
        ..GampConfig::default()
    };
    let out = gamp_run(
        &MixingMatrix::new(p.a.clone()),
        &y,
        &ch,
        &gaussian(),
        &cfg,
        RunOptions::default(),
    )
    .unwrap();

    let a = DMatrix::from_row_slice(m, n, p.a.as_slice());
    let s = DVector::from_column_slice(&p.s);
    let h = a.transpose() * &a / sigma2 + DMatrix::identity(n, n);
    let exact = h.cholesky().unwrap().solve(&(a.transpose() * s / sigma2));
    let exact: Vec<f64> = exact.iter().copied().collect();

    let (mse_gamp, mse_exact) = (squared_error(&p.x, &out.x_hat), squared_error(&p.x, &exact));
    assert!(
        ((mse_gamp - mse_exact) / mse_exact).abs() < 0.01,
        "gamp {mse_gamp} vs posterior mean {mse_exact}"
    );
}
