//! Monte Carlo sweeps over the measurement ratio.

use std::fmt;
use std::io::Write;
use std::time::Instant;

use qgamp_core::{
    gamp_run, lloyd, lloyd_initial_levels, optimize_family, squared_error, DesignObjective, Error as CoreError,
    GampConfig, GaussianSource, MixingMatrix, OutputChannel, Prior, RunOptions, ScalarQuantizer, SeConfig, Search,
    UniformFamily,
};
use rayon::prelude::*;

use crate::error::{HarnessError, Result};
use crate::instance::{generate_instance, trial_rng, Instance};
use crate::lmmse::{decode_all, lmmse_estimate};
use crate::oracle::{grid_posterior_oracle, GridSpec, MAX_DIM};

/// Default cap on `n · m` for one instance.
pub const DEFAULT_MAX_MATRIX_ENTRIES: usize = 1 << 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Estimator {
    Gamp,
    Lmmse,
    Oracle,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::Gamp => "gamp",
            Estimator::Lmmse => "lmmse",
            Estimator::Oracle => "oracle",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gamp" => Some(Estimator::Gamp),
            "lmmse" => Some(Estimator::Lmmse),
            "oracle" => Some(Estimator::Oracle),
            _ => None,
        }
    }
}

/// How the quantizer is obtained for a given ratio. Scales are relative to
/// the measurement standard deviation `σ_z = √(β E[x²])`.
#[derive(Debug, Clone, PartialEq)]
pub enum QuantizerRecipe {
    /// `levels` uniform cells on `[−loading·σ_z, loading·σ_z]`.
    Uniform { levels: u32, loading: f64 },
    /// Uniform cells on `[−‖Ax‖_∞, ‖Ax‖_∞]`, rebuilt for every trial.
    Adaptive { levels: u32 },
    /// Lloyd quantizer for `N(0, σ_z²)`.
    Lloyd { levels: u32 },
    /// Family member minimizing the state-evolution fixed point over the
    /// scale bracket `[lo·σ_z, hi·σ_z]`, with the worst case taken over a
    /// relative window of half-width `margin` around each scale.
    Designed {
        family: UniformFamily,
        count: u32,
        lo: f64,
        hi: f64,
        margin: f64,
    },
    /// The same quantizer at every ratio.
    Fixed(ScalarQuantizer),
}

/// Default robustness window for designed quantizers. The modulo fixed point
/// jumps from good to uninformative as the period shrinks, and finite-size
/// GAMP fails near the jump well before state evolution does.
pub const DESIGN_MARGIN: f64 = 0.2;

impl QuantizerRecipe {
    pub fn designed(family: UniformFamily, count: u32) -> Self {
        let (lo, hi) = match family {
            UniformFamily::Regular => (0.1, 6.0),
            UniformFamily::Modulo => (0.02, 3.0),
        };
        QuantizerRecipe::Designed {
            family,
            count,
            lo,
            hi,
            margin: DESIGN_MARGIN,
        }
    }

    /// Short name used in estimator tags.
    pub fn tag(&self) -> String {
        match self {
            QuantizerRecipe::Uniform { levels, .. } => format!("uniform-{levels}"),
            QuantizerRecipe::Adaptive { levels } => format!("adaptive-{levels}"),
            QuantizerRecipe::Lloyd { levels } => format!("lloyd-{levels}"),
            QuantizerRecipe::Designed { family, count, .. } => format!("{}-{count}", family.name()),
            QuantizerRecipe::Fixed(q) => format!("fixed-{}", q.num_labels()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub n: usize,
    pub m_over_n: Vec<f64>,
    pub prior: Prior,
    pub quantizer: QuantizerRecipe,
    pub sigma2: f64,
    pub trials: usize,
    pub seed: u64,
    pub estimators: Vec<Estimator>,
    pub gamp: GampConfig,
    pub se: SeConfig,
    pub oracle_grid: GridSpec,
    /// Appended to estimator names as `gamp:<label>`.
    pub label: Option<String>,
    pub max_matrix_entries: usize,
}

impl ExperimentSpec {
    pub fn new(n: usize, m_over_n: Vec<f64>, prior: Prior, quantizer: QuantizerRecipe) -> Self {
        ExperimentSpec {
            n,
            m_over_n,
            prior,
            quantizer,
            sigma2: 0.0,
            trials: 1,
            seed: 0,
            estimators: vec![Estimator::Gamp],
            gamp: GampConfig::default(),
            se: SeConfig::default(),
            oracle_grid: GridSpec::default(),
            label: None,
            max_matrix_entries: DEFAULT_MAX_MATRIX_ENTRIES,
        }
    }

    /// Number of measurements for a ratio.
    pub fn m_for(&self, ratio: f64) -> usize {
        (ratio * self.n as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HarnessError::Spec(msg));
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.m_over_n.is_empty() {
            return bad("m_over_n is empty".into());
        }
        if self.estimators.is_empty() {
            return bad("no estimators selected".into());
        }
        if !(self.sigma2 >= 0.0) || !self.sigma2.is_finite() {
            return bad(format!("sigma2 must be non-negative, got {}", self.sigma2));
        }
        for &r in &self.m_over_n {
            if !(r > 0.0) || !r.is_finite() {
                return bad(format!("m_over_n entries must be positive, got {r}"));
            }
            let m = self.m_for(r);
            if m == 0 {
                return bad(format!("m/n = {r} gives no measurements at n = {}", self.n));
            }
            if self.n.saturating_mul(m) > self.max_matrix_entries {
                return bad(format!(
                    "n·m = {} exceeds the cap of {} entries",
                    self.n * m,
                    self.max_matrix_entries
                ));
            }
        }
        if self.estimators.contains(&Estimator::Oracle) && self.n > MAX_DIM {
            return bad(format!("the grid oracle needs n ≤ {MAX_DIM}, got {}", self.n));
        }
        self.gamp.validate()?;
        Ok(())
    }

    fn measurement_variance(&self, ratio: f64) -> f64 {
        self.prior.second_moment() / ratio
    }

    fn estimator_name(&self, e: Estimator) -> String {
        match &self.label {
            Some(l) => format!("{}:{l}", e.name()),
            None => e.name().to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialFlag {
    Ok,
    /// GAMP hit `max_iters` before the stopping rule.
    MaxIters,
    Diverged,
    /// The grid oracle found no consistent point.
    Infeasible,
}

impl fmt::Display for TrialFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrialFlag::Ok => "ok",
            TrialFlag::MaxIters => "max-iters",
            TrialFlag::Diverged => "diverged",
            TrialFlag::Infeasible => "infeasible",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub m_over_n: f64,
    pub m: usize,
    pub trial: usize,
    pub estimator: Estimator,
    pub estimator_name: String,
    /// `‖x − x̂‖² / n`; NaN when the estimator failed.
    pub sq_err: f64,
    pub iterations: usize,
    pub flag: TrialFlag,
    pub seconds: f64,
}

/// Medians over the trials of one `(m/n, estimator)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub m_over_n: f64,
    pub estimator: Estimator,
    pub estimator_name: String,
    pub median_sq_err: f64,
    pub median_db: f64,
    pub median_iterations: f64,
    pub failures: usize,
}

/// Quantizer chosen for one ratio, for the run metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedQuantizer {
    pub m_over_n: f64,
    /// `None` for the adaptive recipe.
    pub quantizer: Option<ScalarQuantizer>,
    pub predicted_mse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub records: Vec<TrialRecord>,
    pub summaries: Vec<Summary>,
    pub quantizers: Vec<ResolvedQuantizer>,
}

impl ExperimentOutput {
    pub fn summary(&self, m_over_n: f64, estimator: Estimator) -> Option<&Summary> {
        self.summaries
            .iter()
            .find(|s| s.m_over_n == m_over_n && s.estimator == estimator)
    }
}

/// `10 log₁₀(v)`
pub fn db(v: f64) -> f64 {
    10.0 * v.log10()
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let k = values.len() / 2;
    if values.len() % 2 == 1 {
        values[k]
    } else {
        0.5 * (values[k - 1] + values[k])
    }
}

fn resolve(spec: &ExperimentSpec, ratio: f64) -> Result<ResolvedQuantizer> {
    let var_z = spec.measurement_variance(ratio);
    let sd_z = var_z.sqrt();
    let (quantizer, predicted_mse) = match &spec.quantizer {
        QuantizerRecipe::Uniform { levels, loading } => (
            Some(ScalarQuantizer::uniform(*levels, -loading * sd_z, loading * sd_z)?),
            None,
        ),
        QuantizerRecipe::Adaptive { .. } => (None, None),
        QuantizerRecipe::Lloyd { levels } => {
            let src = GaussianSource::new(0.0, var_z)?;
            let k = *levels as usize;
            let res = lloyd(k, &src, &lloyd_initial_levels(k, &src), 1e-10 * sd_z, 10_000)?;
            (Some(res.quantizer), None)
        }
        QuantizerRecipe::Designed {
            family,
            count,
            lo,
            hi,
            margin,
        } => {
            let obj = DesignObjective {
                prior: spec.prior,
                beta: 1.0 / ratio,
                sigma2: spec.sigma2,
                se_config: spec.se,
            };
            let search = Search {
                margin: *margin,
                ..Search::new(lo * sd_z, hi * sd_z)
            };
            let d = optimize_family(*family, *count, &obj, &search)?;
            (Some(d.quantizer), Some(d.predicted_mse))
        }
        QuantizerRecipe::Fixed(q) => (Some(q.clone()), None),
    };
    Ok(ResolvedQuantizer {
        m_over_n: ratio,
        quantizer,
        predicted_mse,
    })
}

fn trial_quantizer(spec: &ExperimentSpec, resolved: &ResolvedQuantizer, inst: &Instance) -> Result<ScalarQuantizer> {
    match (&resolved.quantizer, &spec.quantizer) {
        (Some(q), _) => Ok(q.clone()),
        (None, QuantizerRecipe::Adaptive { levels }) => {
            let r = inst.z_inf_norm();
            let r = if r > 0.0 { r } else { 1.0 };
            Ok(ScalarQuantizer::uniform(*levels, -r, r)?)
        }
        (None, _) => unreachable!("only the adaptive recipe defers construction"),
    }
}

fn run_trial(spec: &ExperimentSpec, resolved: &ResolvedQuantizer, trial: usize) -> Result<Vec<TrialRecord>> {
    let ratio = resolved.m_over_n;
    let m = spec.m_for(ratio);
    let mut rng = trial_rng(spec.seed, m, trial);
    let inst = generate_instance(spec.n, m, &spec.prior, spec.sigma2, &mut rng);
    let q = trial_quantizer(spec, resolved, &inst)?;
    let y = inst.labels(&q)?;
    let channel = OutputChannel::new(q.clone(), spec.sigma2)?;
    let mut out = Vec::with_capacity(spec.estimators.len());
    let mut mixing = None;
    for &e in &spec.estimators {
        let start = Instant::now();
        let (sq_err, iterations, flag) = match e {
            Estimator::Gamp => {
                let a = mixing.get_or_insert_with(|| MixingMatrix::new(inst.a.clone()));
                match gamp_run(a, &y, &channel, &spec.prior, &spec.gamp, RunOptions::default()) {
                    Ok(r) => {
                        let flag = if r.converged {
                            TrialFlag::Ok
                        } else {
                            TrialFlag::MaxIters
                        };
                        (squared_error(&inst.x, &r.x_hat), r.iterations, flag)
                    }
                    Err(CoreError::Divergence { iteration }) => (f64::NAN, iteration, TrialFlag::Diverged),
                    Err(err) => return Err(err.into()),
                }
            }
            Estimator::Lmmse => {
                let src = GaussianSource::new(0.0, spec.measurement_variance(ratio))?;
                let noise = q.measurement_distortion(&src)? + spec.sigma2;
                let y_hat = decode_all(&q, &y)?;
                let est = lmmse_estimate(&inst.a, &y_hat, &spec.prior, noise)?;
                (squared_error(&inst.x, &est), 0, TrialFlag::Ok)
            }
            Estimator::Oracle => match grid_posterior_oracle(&inst.a, &y, &channel, &spec.prior, &spec.oracle_grid) {
                Ok(est) => (squared_error(&inst.x, &est), 0, TrialFlag::Ok),
                Err(HarnessError::OracleInfeasible) => (f64::NAN, 0, TrialFlag::Infeasible),
                Err(err) => return Err(err),
            },
        };
        out.push(TrialRecord {
            m_over_n: ratio,
            m,
            trial,
            estimator: e,
            estimator_name: spec.estimator_name(e),
            sq_err,
            iterations,
            flag,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(out)
}

/// Runs every `(m/n, trial)` pair, in parallel on the current rayon pool.
/// Records come back ordered by ratio, trial and estimator regardless of the
/// schedule.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    let quantizers: Vec<ResolvedQuantizer> = spec
        .m_over_n
        .par_iter()
        .map(|&r| resolve(spec, r))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..quantizers.len())
        .flat_map(|k| (0..spec.trials).map(move |t| (k, t)))
        .collect();
    let records: Vec<TrialRecord> = jobs
        .par_iter()
        .map(|&(k, t)| run_trial(spec, &quantizers[k], t))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    let mut summaries = Vec::new();
    for &ratio in &spec.m_over_n {
        for &e in &spec.estimators {
            let cell: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.m_over_n == ratio && r.estimator == e)
                .collect();
            let mut errs: Vec<f64> = cell.iter().map(|r| r.sq_err).filter(|v| v.is_finite()).collect();
            let mut iters: Vec<f64> = cell.iter().map(|r| r.iterations as f64).collect();
            let med = median(&mut errs);
            summaries.push(Summary {
                m_over_n: ratio,
                estimator: e,
                estimator_name: spec.estimator_name(e),
                median_sq_err: med,
                median_db: db(med),
                median_iterations: median(&mut iters),
                failures: cell.len() - errs.len(),
            });
        }
    }
    Ok(ExperimentOutput {
        records,
        summaries,
        quantizers,
    })
}

pub const TRIALS_HEADER: [&str; 7] = ["m_over_n", "estimator", "trial", "sq_err", "sq_err_db", "iters", "flag"];

/// Raw trial rows. Wall time is left out so the file is reproducible.
pub fn write_trials_csv<'a, W: Write>(records: impl IntoIterator<Item = &'a TrialRecord>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRIALS_HEADER)?;
    for r in records {
        w.write_record([
            r.m_over_n.to_string(),
            r.estimator_name.clone(),
            r.trial.to_string(),
            r.sq_err.to_string(),
            db(r.sq_err).to_string(),
            r.iterations.to_string(),
            r.flag.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
