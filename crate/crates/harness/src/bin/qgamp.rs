use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qgamp::config::{DesignFile, ExperimentFile, PriorSpec, QuantizerSpec, SeFile};
use qgamp::experiment::db;
use qgamp::figures::Figure;
use qgamp::{
    run_experiment, write_trials_csv, ExperimentOutput, ExperimentSpec, HarnessError, QuantizerRecipe, Result,
};
use qgamp_core::{optimize_family, DesignObjective, SeEvaluator, SeProblem, Search};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "qgamp", version, about = "GAMP reconstruction from quantized measurements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Base seed; overrides the spec file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Trials per ratio; overrides the spec file.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Output CSV path (default: stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment spec file.
    Run {
        spec: PathBuf,
    },
    /// State-evolution trajectory for a problem file.
    Se {
        problem: PathBuf,
    },
    /// SE-optimal uniform quantizers for a design file.
    Design {
        spec: PathBuf,
    },
    Fig4,
    Fig5,
    Fig6,
    Fig7,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("qgamp-error kind=usage message={first:?}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qgamp-error kind={} message={:?}", e.kind(), e.to_string());
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(HarnessError::Spec("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| HarnessError::Spec(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Run { spec } => {
            let mut s = ExperimentFile::parse(&read(spec)?)?.build()?;
            if let Some(seed) = cli.seed {
                s.seed = seed;
            }
            if let Some(t) = cli.trials {
                s.trials = t;
            }
            experiments(&[s], cli.out.as_deref())
        }
        Command::Se { problem } => se(&SeFile::parse(&read(problem)?)?, cli.out.as_deref()),
        Command::Design { spec } => design(&DesignFile::parse(&read(spec)?)?, cli.out.as_deref()),
        Command::Fig4 => figure(Figure::Fig4, &cli),
        Command::Fig5 => figure(Figure::Fig5, &cli),
        Command::Fig6 => figure(Figure::Fig6, &cli),
        Command::Fig7 => figure(Figure::Fig7, &cli),
    })
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| HarnessError::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(io::BufWriter::new(fs::File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn figure(fig: Figure, cli: &Cli) -> Result<()> {
    experiments(&fig.specs(cli.trials, cli.seed.unwrap_or(1)), cli.out.as_deref())
}

fn experiments(specs: &[ExperimentSpec], out: Option<&Path>) -> Result<()> {
    let outputs = specs.iter().map(run_experiment).collect::<Result<Vec<_>>>()?;
    write_trials_csv(outputs.iter().flat_map(|o| &o.records), sink(out)?)?;
    for o in &outputs {
        for s in &o.summaries {
            eprintln!(
                "summary m_over_n={} estimator={} median_db={:.3} median_iters={} failures={}",
                s.m_over_n, s.estimator_name, s.median_db, s.median_iterations, s.failures
            );
        }
    }
    if let Some(p) = out {
        let mut meta = p.as_os_str().to_owned();
        meta.push(".meta.toml");
        fs::write(meta, metadata(specs, &outputs)?)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Metadata {
    experiment: Vec<ExperimentMeta>,
}

#[derive(Serialize)]
struct ExperimentMeta {
    n: usize,
    trials: usize,
    seed: u64,
    sigma2: f64,
    recipe: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    design_margin: Option<f64>,
    gamp_max_iters: usize,
    gamp_stop_tol: f64,
    gamp_damping: f64,
    prior: PriorSpec,
    ratio: Vec<RatioMeta>,
}

#[derive(Serialize)]
struct RatioMeta {
    m_over_n: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    predicted_mse_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    quantizer: Option<QuantizerSpec>,
}

fn metadata(specs: &[ExperimentSpec], outputs: &[ExperimentOutput]) -> Result<String> {
    let experiment = specs
        .iter()
        .zip(outputs)
        .map(|(s, o)| ExperimentMeta {
            n: s.n,
            trials: s.trials,
            seed: s.seed,
            sigma2: s.sigma2,
            recipe: s.quantizer.tag(),
            design_margin: match s.quantizer {
                QuantizerRecipe::Designed { margin, .. } => Some(margin),
                _ => None,
            },
            gamp_max_iters: s.gamp.max_iters,
            gamp_stop_tol: s.gamp.stop_tol,
            gamp_damping: s.gamp.damping,
            prior: PriorSpec::from_prior(&s.prior),
            ratio: o
                .quantizers
                .iter()
                .map(|r| RatioMeta {
                    m_over_n: r.m_over_n,
                    predicted_mse_db: r.predicted_mse.map(db),
                    quantizer: r.quantizer.as_ref().map(QuantizerSpec::from_quantizer),
                })
                .collect(),
        })
        .collect();
    toml::to_string(&Metadata { experiment }).map_err(|e| HarnessError::Spec(e.to_string()))
}

fn se(file: &SeFile, out: Option<&Path>) -> Result<()> {
    let prob = SeProblem::new(file.beta, file.sigma2, file.prior.build()?, file.quantizer.build()?)?;
    let tr = SeEvaluator::new(file.se.build())?.run(&prob);
    let mut w = csv::Writer::from_writer(sink(out)?);
    w.write_record(["t", "tau"])?;
    for (t, tau) in tr.taus.iter().enumerate() {
        w.write_record([t.to_string(), tau.to_string()])?;
    }
    w.flush()?;
    eprintln!(
        "se converged={} steps={} fixed_point_db={:.4} clamped_steps={}",
        tr.converged,
        tr.steps(),
        db(tr.fixed_point),
        tr.clamped.len()
    );
    Ok(())
}

fn design(file: &DesignFile, out: Option<&Path>) -> Result<()> {
    let obj = DesignObjective {
        prior: file.prior.build()?,
        beta: file.beta,
        sigma2: file.sigma2,
        se_config: file.se.build(),
    };
    let mut search = Search::new(file.lo, file.hi);
    if let Some(g) = file.grid_points {
        search.grid_points = g;
    }
    if let Some(t) = file.rel_tol {
        search.rel_tol = t;
    }
    if let Some(m) = file.margin {
        search.margin = m;
    }
    let jobs: Vec<_> = file
        .families()?
        .into_iter()
        .flat_map(|f| file.counts.iter().map(move |&c| (f, c)))
        .collect();
    let designs = jobs
        .par_iter()
        .map(|&(f, c)| optimize_family(f, c, &obj, &search))
        .collect::<Result<Vec<_>, _>>()?;
    let mut w = csv::Writer::from_writer(sink(out)?);
    w.write_record(["family", "levels", "param", "predicted_mse_db"])?;
    for d in designs {
        w.write_record([
            d.family.name().to_string(),
            d.count.to_string(),
            d.param.to_string(),
            db(d.predicted_mse).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
