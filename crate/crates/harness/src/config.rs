//! TOML spec files. Every table rejects unknown keys.
//!
//! Experiment file:
//!
//! ```toml
//! n = 100
//! m_over_n = [3.0, 4.0]
//! trials = 200
//! seed = 1
//! estimators = ["gamp", "lmmse"]
//! sigma2 = 0.0                 # optional
//! label = "uniform"            # optional, tags estimator names
//!
//! [prior]
//! kind = "gaussian"            # or "gauss-bernoulli" with rho, on_variance
//! mean = 0.0
//! variance = 1.0
//!
//! [quantizer]
//! kind = "uniform"             # loading in units of σ_z
//! levels = 16
//! loading = 3.0
//!
//! [gamp]                       # optional
//! max_iters = 25
//! ```
//!
//! Quantizer recipes: `uniform {levels, loading}`, `adaptive {levels}`,
//! `lloyd {levels}`, `se-regular {levels, lo?, hi?}`,
//! `se-modulo {labels, lo?, hi?}`, or a fixed quantizer block
//! (`regular`, `binned`, `modulo`).
//!
//! Quantizer block: `regular {thresholds, levels?}`,
//! `binned {thresholds, binning, levels?}`, `modulo {step, labels}`.

use qgamp_core::{GampConfig, Prior, QuantizerKind, ScalarQuantizer, SeConfig, UniformFamily};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::experiment::{Estimator, ExperimentSpec, QuantizerRecipe, DEFAULT_MAX_MATRIX_ENTRIES};
use crate::oracle::GridSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PriorSpec {
    Gaussian { mean: f64, variance: f64 },
    GaussBernoulli { rho: f64, on_variance: f64 },
}

impl PriorSpec {
    pub fn build(&self) -> Result<Prior> {
        Ok(match *self {
            PriorSpec::Gaussian { mean, variance } => Prior::gaussian(mean, variance)?,
            PriorSpec::GaussBernoulli { rho, on_variance } => Prior::gauss_bernoulli(rho, on_variance)?,
        })
    }

    pub fn from_prior(p: &Prior) -> Self {
        match *p {
            Prior::Gaussian { mean, variance } => PriorSpec::Gaussian { mean, variance },
            Prior::GaussBernoulli { rho, on_variance } => PriorSpec::GaussBernoulli { rho, on_variance },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum QuantizerSpec {
    Regular {
        thresholds: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        levels: Option<Vec<f64>>,
    },
    Binned {
        thresholds: Vec<f64>,
        binning: Vec<u32>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        levels: Option<Vec<f64>>,
    },
    Modulo {
        step: f64,
        labels: u32,
    },
}

impl QuantizerSpec {
    pub fn build(&self) -> Result<ScalarQuantizer> {
        Ok(match self {
            QuantizerSpec::Regular { thresholds, levels } => {
                ScalarQuantizer::regular(thresholds.clone(), levels.clone())?
            }
            QuantizerSpec::Binned {
                thresholds,
                binning,
                levels,
            } => ScalarQuantizer::binned(thresholds.clone(), binning.clone(), levels.clone())?,
            QuantizerSpec::Modulo { step, labels } => ScalarQuantizer::modulo(*step, *labels)?,
        })
    }

    pub fn from_quantizer(q: &ScalarQuantizer) -> Self {
        let levels = q.levels().map(<[f64]>::to_vec);
        match q.kind() {
            QuantizerKind::Modulo { step, labels } => QuantizerSpec::Modulo { step, labels },
            QuantizerKind::Regular => QuantizerSpec::Regular {
                thresholds: q.thresholds().to_vec(),
                levels,
            },
            QuantizerKind::Binned => QuantizerSpec::Binned {
                thresholds: q.thresholds().to_vec(),
                binning: q.binning().to_vec(),
                levels,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RecipeSpec {
    Uniform {
        levels: u32,
        loading: f64,
    },
    Adaptive {
        levels: u32,
    },
    Lloyd {
        levels: u32,
    },
    SeRegular {
        levels: u32,
        lo: Option<f64>,
        hi: Option<f64>,
        margin: Option<f64>,
    },
    SeModulo {
        labels: u32,
        lo: Option<f64>,
        hi: Option<f64>,
        margin: Option<f64>,
    },
    Regular {
        thresholds: Vec<f64>,
        levels: Option<Vec<f64>>,
    },
    Binned {
        thresholds: Vec<f64>,
        binning: Vec<u32>,
        levels: Option<Vec<f64>>,
    },
    Modulo {
        step: f64,
        labels: u32,
    },
}

impl RecipeSpec {
    pub fn build(&self) -> Result<QuantizerRecipe> {
        let designed =
            |family, count, lo: Option<f64>, hi: Option<f64>, margin: Option<f64>| match QuantizerRecipe::designed(
                family, count,
            ) {
                QuantizerRecipe::Designed {
                    family,
                    count,
                    lo: dlo,
                    hi: dhi,
                    margin: dmargin,
                } => QuantizerRecipe::Designed {
                    family,
                    count,
                    lo: lo.unwrap_or(dlo),
                    hi: hi.unwrap_or(dhi),
                    margin: margin.unwrap_or(dmargin),
                },
                other => other,
            };
        Ok(match self.clone() {
            RecipeSpec::Uniform { levels, loading } => {
                if !(loading > 0.0) {
                    return Err(HarnessError::Spec(format!("loading must be positive, got {loading}")));
                }
                QuantizerRecipe::Uniform { levels, loading }
            }
            RecipeSpec::Adaptive { levels } => QuantizerRecipe::Adaptive { levels },
            RecipeSpec::Lloyd { levels } => QuantizerRecipe::Lloyd { levels },
            RecipeSpec::SeRegular { levels, lo, hi, margin } => {
                designed(UniformFamily::Regular, levels, lo, hi, margin)
            }
            RecipeSpec::SeModulo { labels, lo, hi, margin } => designed(UniformFamily::Modulo, labels, lo, hi, margin),
            RecipeSpec::Regular { thresholds, levels } => {
                QuantizerRecipe::Fixed(QuantizerSpec::Regular { thresholds, levels }.build()?)
            }
            RecipeSpec::Binned {
                thresholds,
                binning,
                levels,
            } => QuantizerRecipe::Fixed(
                QuantizerSpec::Binned {
                    thresholds,
                    binning,
                    levels,
                }
                .build()?,
            ),
            RecipeSpec::Modulo { step, labels } => QuantizerRecipe::Fixed(ScalarQuantizer::modulo(step, labels)?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GampSpec {
    pub max_iters: Option<usize>,
    pub stop_tol: Option<f64>,
    pub damping: Option<f64>,
}

impl GampSpec {
    pub fn build(&self) -> GampConfig {
        let d = GampConfig::default();
        GampConfig {
            max_iters: self.max_iters.unwrap_or(d.max_iters),
            stop_tol: self.stop_tol.unwrap_or(d.stop_tol),
            damping: self.damping.unwrap_or(d.damping),
            tau_min: d.tau_min,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeSpec {
    pub quad_nodes: Option<usize>,
    pub max_iters: Option<usize>,
    pub fp_tol: Option<f64>,
}

impl SeSpec {
    pub fn build(&self) -> SeConfig {
        let d = SeConfig::default();
        SeConfig {
            quad_nodes: self.quad_nodes.unwrap_or(d.quad_nodes),
            max_iters: self.max_iters.unwrap_or(d.max_iters),
            fp_tol: self.fp_tol.unwrap_or(d.fp_tol),
            nu_floor: d.nu_floor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    pub points: Option<usize>,
    pub radius_sds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub n: usize,
    pub m_over_n: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub estimators: Vec<String>,
    #[serde(default)]
    pub sigma2: f64,
    pub label: Option<String>,
    pub max_matrix_entries: Option<usize>,
    pub prior: PriorSpec,
    pub quantizer: RecipeSpec,
    #[serde(default)]
    pub gamp: GampSpec,
    #[serde(default)]
    pub se: SeSpec,
    #[serde(default)]
    pub oracle: OracleSpec,
}

impl ExperimentFile {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn build(&self) -> Result<ExperimentSpec> {
        let estimators = self
            .estimators
            .iter()
            .map(|s| Estimator::parse(s).ok_or_else(|| HarnessError::Spec(format!("unknown estimator `{s}`"))))
            .collect::<Result<Vec<_>>>()?;
        let grid = GridSpec::default();
        let spec = ExperimentSpec {
            n: self.n,
            m_over_n: self.m_over_n.clone(),
            prior: self.prior.build()?,
            quantizer: self.quantizer.build()?,
            sigma2: self.sigma2,
            trials: self.trials,
            seed: self.seed,
            estimators,
            gamp: self.gamp.build(),
            se: self.se.build(),
            oracle_grid: GridSpec {
                points: self.oracle.points.unwrap_or(grid.points),
                radius_sds: self.oracle.radius_sds.unwrap_or(grid.radius_sds),
            },
            label: self.label.clone(),
            max_matrix_entries: self.max_matrix_entries.unwrap_or(DEFAULT_MAX_MATRIX_ENTRIES),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// `se` subcommand input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeFile {
    /// `n / m`
    pub beta: f64,
    #[serde(default)]
    pub sigma2: f64,
    pub prior: PriorSpec,
    pub quantizer: QuantizerSpec,
    #[serde(default)]
    pub se: SeSpec,
}

impl SeFile {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }
}

/// `design` subcommand input. The bracket is absolute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignFile {
    pub beta: f64,
    #[serde(default)]
    pub sigma2: f64,
    pub families: Vec<String>,
    pub counts: Vec<u32>,
    pub lo: f64,
    pub hi: f64,
    pub grid_points: Option<usize>,
    pub rel_tol: Option<f64>,
    /// Robustness window; the plain fixed point is minimized when absent.
    pub margin: Option<f64>,
    pub prior: PriorSpec,
    #[serde(default)]
    pub se: SeSpec,
}

impl DesignFile {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn families(&self) -> Result<Vec<UniformFamily>> {
        self.families
            .iter()
            .map(|f| match f.as_str() {
                "regular" => Ok(UniformFamily::Regular),
                "modulo" => Ok(UniformFamily::Modulo),
                other => Err(HarnessError::Spec(format!("unknown family `{other}`"))),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXPERIMENT: &str = r#"
        n = 20
        m_over_n = [2.0, 3.0]
        trials = 3
        seed = 11
        estimators = ["gamp", "lmmse"]

        [prior]
        kind = "gaussian"
        mean = 0.0
        variance = 1.0

        [quantizer]
        kind = "uniform"
        levels = 8
        loading = 3.0
    "#;

    #[test]
    fn experiment_file_round_trip() {
        let f = ExperimentFile::parse(EXPERIMENT).unwrap();
        let spec = f.build().unwrap();
        assert_eq!(spec.n, 20);
        assert_eq!(
            spec.quantizer,
            QuantizerRecipe::Uniform {
                levels: 8,
                loading: 3.0
            }
        );
        let again = ExperimentFile::parse(&toml::to_string(&f).unwrap()).unwrap();
        assert_eq!(again, f);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let top = EXPERIMENT.replace("seed = 11", "seed = 11\nsneed = 3");
        assert!(ExperimentFile::parse(&top).is_err());
        let nested = EXPERIMENT.replace("loading = 3.0", "loading = 3.0\nwidth = 1.0");
        assert!(ExperimentFile::parse(&nested).is_err());
        let prior = EXPERIMENT.replace("mean = 0.0", "mean = 0.0\nrho = 0.1");
        assert!(ExperimentFile::parse(&prior).is_err());
    }

    #[test]
    fn unknown_estimator_is_rejected() {
        let f = ExperimentFile::parse(&EXPERIMENT.replace("\"lmmse\"", "\"lasso\"")).unwrap();
        assert!(f.build().is_err());
    }

    #[test]
    fn quantizer_blocks_round_trip() {
        let qs = [
            ScalarQuantizer::regular(vec![-1.0, 0.0, 1.0], Some(vec![-1.5, -0.5, 0.5, 1.5])).unwrap(),
            ScalarQuantizer::binned(vec![-1.0, 0.0, 1.0], vec![1, 2, 1, 2], None).unwrap(),
            ScalarQuantizer::modulo(0.25, 4).unwrap(),
        ];
        for q in qs {
            let text = toml::to_string(&QuantizerSpec::from_quantizer(&q)).unwrap();
            let back: QuantizerSpec = toml::from_str(&text).unwrap();
            assert_eq!(back.build().unwrap(), q);
        }
    }
}
