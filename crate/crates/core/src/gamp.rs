//! Generalized approximate message passing for a quantized output channel.
//!
//! One iteration:
//!
//! ```text
//! p      = A² τ̂                  (per-measurement prior variance of z)
//! ẑ      = A x̂ − u_prev ⊙ p
//! (u, τ) = d1_d2(y, ẑ, p)         (output channel, componentwise)
//! r      = 1 / (A²ᵀ τ)
//! q      = x̂ + r ⊙ (Aᵀ u)
//! (x̂, τ̂) = denoise(q, r)          (prior, componentwise)
//! ```
//!
//! The measurement step starts from `u = 0`, so the first iteration has no
//! Onsager correction.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicUsize, Ordering};

use crate::channels::{OutputChannel, Prior, TAU_MIN};
use crate::error::{Error, Result};
use crate::quantizer::Label;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidInput(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `out = M x`
    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    /// `out = Mᵀ x`
    pub fn tr_mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.rows);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (&xi, row) in x.iter().zip(self.data.chunks_exact(self.cols)) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * xi;
            }
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        self.mul_vec_into(x, &mut out);
        out
    }
}

/// A mixing matrix together with its elementwise square. Counts
/// matrix-vector products so tests can check the per-iteration cost.
#[derive(Debug)]
pub struct MixingMatrix {
    a: Matrix,
    a_sq: Matrix,
    products: AtomicUsize,
}

impl Clone for MixingMatrix {
    fn clone(&self) -> Self {
        MixingMatrix {
            a: self.a.clone(),
            a_sq: self.a_sq.clone(),
            products: AtomicUsize::new(0),
        }
    }
}

impl MixingMatrix {
    pub fn new(a: Matrix) -> Self {
        let a_sq = a.map(|v| v * v);
        MixingMatrix {
            a,
            a_sq,
            products: AtomicUsize::new(0),
        }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.a
    }

    pub fn squared(&self) -> &Matrix {
        &self.a_sq
    }

    /// Number of measurements `m`.
    pub fn rows(&self) -> usize {
        self.a.rows
    }

    /// Signal dimension `n`.
    pub fn cols(&self) -> usize {
        self.a.cols
    }

    /// Matrix-vector products performed so far.
    pub fn products(&self) -> usize {
        self.products.load(Ordering::Relaxed)
    }

    fn count(&self) {
        self.products.fetch_add(1, Ordering::Relaxed);
    }

    fn a_mul(&self, x: &[f64], out: &mut [f64]) {
        self.count();
        self.a.mul_vec_into(x, out);
    }

    fn a_tr_mul(&self, x: &[f64], out: &mut [f64]) {
        self.count();
        self.a.tr_mul_vec_into(x, out);
    }

    fn sq_mul(&self, x: &[f64], out: &mut [f64]) {
        self.count();
        self.a_sq.mul_vec_into(x, out);
    }

    fn sq_tr_mul(&self, x: &[f64], out: &mut [f64]) {
        self.count();
        self.a_sq.tr_mul_vec_into(x, out);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GampConfig {
    pub max_iters: usize,
    /// Stop when `‖x̂ₜ₊₁ − x̂ₜ‖ ≤ stop_tol · ‖x̂ₜ₊₁‖`.
    pub stop_tol: f64,
    /// Weight of the new iterate; `1` is undamped.
    pub damping: f64,
    pub tau_min: f64,
}

impl Default for GampConfig {
    fn default() -> Self {
        GampConfig {
            max_iters: 25,
            stop_tol: 1e-8,
            damping: 1.0,
            tau_min: TAU_MIN,
        }
    }
}

impl GampConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Config(format!(
                "damping must be in (0, 1], got {}",
                self.damping
            )));
        }
        if !(self.tau_min > 0.0) || !(self.stop_tol >= 0.0) {
            return Err(Error::Config(
                "tau_min must be positive and stop_tol non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GampState {
    pub x_hat: Vec<f64>,
    pub tau_hat: Vec<f64>,
    pub u: Vec<f64>,
    pub tau: Vec<f64>,
    pub iter: usize,
}

/// Prior mean/variance everywhere, `u = 0`.
pub fn gamp_init(prior: &Prior, n: usize, m: usize) -> GampState {
    GampState {
        x_hat: vec![prior.mean(); n],
        tau_hat: vec![prior.variance(); n],
        u: vec![0.0; m],
        tau: vec![0.0; m],
        iter: 0,
    }
}

/// Counters for one step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    /// Measurements whose cell had no mass under the current prediction.
    pub degenerate: usize,
    /// Variable nodes whose `A²ᵀτ` had to be floored.
    pub floored: usize,
}

/// One GAMP sweep. Returns the next state.
pub fn gamp_step(
    state: &GampState,
    a: &MixingMatrix,
    y: &[Label],
    channel: &OutputChannel,
    prior: &Prior,
    cfg: &GampConfig,
) -> Result<(GampState, StepStats)> {
    let (m, n) = (a.rows(), a.cols());
    if y.len() != m || state.x_hat.len() != n || state.u.len() != m {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: A is {m}x{n}, y has {}, state has n={} m={}",
            y.len(),
            state.x_hat.len(),
            state.u.len()
        )));
    }
    let t = state.iter;
    let mut stats = StepStats::default();

    // Measurement side.
    let mut p = vec![0.0; m];
    a.sq_mul(&state.tau_hat, &mut p);
    let mut z_hat = vec![0.0; m];
    a.a_mul(&state.x_hat, &mut z_hat);
    let mut u = vec![0.0; m];
    let mut tau = vec![0.0; m];
    for i in 0..m {
        let nu = p[i].max(cfg.tau_min);
        let zh = z_hat[i] - state.u[i] * p[i];
        if !zh.is_finite() || !nu.is_finite() {
            return Err(Error::Divergence { iteration: t });
        }
        let upd = channel.d1_d2(y[i], zh, nu)?;
        if upd.degenerate {
            stats.degenerate += 1;
        }
        u[i] = upd.u;
        tau[i] = upd.tau.clamp(cfg.tau_min, 1.0 / nu);
    }
    let d = cfg.damping;
    if d < 1.0 {
        for i in 0..m {
            u[i] = d * u[i] + (1.0 - d) * state.u[i];
            tau[i] = d * tau[i] + (1.0 - d) * state.tau[i];
        }
    }

    // Variable side.
    let mut r = vec![0.0; n];
    a.a_tr_mul(&u, &mut r);
    let mut s = vec![0.0; n];
    a.sq_tr_mul(&tau, &mut s);
    let mut x_hat = vec![0.0; n];
    let mut tau_hat = vec![0.0; n];
    for j in 0..n {
        let prec = if s[j] < cfg.tau_min {
            stats.floored += 1;
            cfg.tau_min
        } else {
            s[j]
        };
        let nu = 1.0 / prec;
        let q = state.x_hat[j] + r[j] * nu;
        let (f, e) = prior.denoise(q, nu);
        if !f.is_finite() || !e.is_finite() {
            return Err(Error::Divergence { iteration: t });
        }
        x_hat[j] = d * f + (1.0 - d) * state.x_hat[j];
        tau_hat[j] = (d * e + (1.0 - d) * state.tau_hat[j]).max(f64::MIN_POSITIVE);
    }

    Ok((
        GampState {
            x_hat,
            tau_hat,
            u,
            tau,
            iter: t + 1,
        },
        stats,
    ))
}

/// Per-iteration summary.
#[derive(Debug, Clone, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    pub mean_tau_hat: f64,
    /// `‖x − x̂‖²/n` when the true signal was supplied.
    pub mse: Option<f64>,
    /// Relative change of `x̂` in this iteration.
    pub rel_change: f64,
    pub x_hat: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions<'a> {
    pub truth: Option<&'a [f64]>,
    pub keep_snapshots: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GampOutput {
    pub x_hat: Vec<f64>,
    pub tau_hat: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub degenerate_events: usize,
    pub history: Vec<IterRecord>,
}

/// Iterates [`gamp_step`] from [`gamp_init`] until the relative change of `x̂`
/// drops below `cfg.stop_tol` or `cfg.max_iters` is reached.
pub fn gamp_run(
    a: &MixingMatrix,
    y: &[Label],
    channel: &OutputChannel,
    prior: &Prior,
    cfg: &GampConfig,
    opts: RunOptions<'_>,
) -> Result<GampOutput> {
    cfg.validate()?;
    if let Some(x) = opts.truth {
        if x.len() != a.cols() {
            return Err(Error::InvalidInput("truth length differs from n".into()));
        }
    }
    let mut state = gamp_init(prior, a.cols(), a.rows());
    let mut history = Vec::new();
    let mut degenerate_events = 0;
    let mut converged = false;
    while state.iter < cfg.max_iters {
        let (next, stats) = gamp_step(&state, a, y, channel, prior, cfg)?;
        degenerate_events += stats.degenerate;
        let diff: f64 = next
            .x_hat
            .iter()
            .zip(&state.x_hat)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let norm: f64 = next.x_hat.iter().map(|v| v * v).sum();
        let rel_change = if norm > 0.0 {
            libm::sqrt(diff / norm)
        } else {
            libm::sqrt(diff)
        };
        let n = next.x_hat.len().max(1) as f64;
        history.push(IterRecord {
            iter: next.iter,
            mean_tau_hat: next.tau_hat.iter().sum::<f64>() / n,
            mse: opts.truth.map(|x| squared_error(x, &next.x_hat)),
            rel_change,
            x_hat: opts.keep_snapshots.then(|| next.x_hat.clone()),
        });
        state = next;
        if rel_change <= cfg.stop_tol {
            converged = true;
            break;
        }
    }
    Ok(GampOutput {
        x_hat: state.x_hat,
        tau_hat: state.tau_hat,
        iterations: state.iter,
        converged,
        degenerate_events,
        history,
    })
}

/// `‖x − x̂‖² / n`
pub fn squared_error(x: &[f64], x_hat: &[f64]) -> f64 {
    let n = x.len().max(1) as f64;
    x.iter().zip(x_hat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n
}
