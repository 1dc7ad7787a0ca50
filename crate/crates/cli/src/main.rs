//! `lllsampler`: sample, estimate and check CSP instances from the command line.

mod output;

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lllsampler::inference::infer_marginal;
use lllsampler::params::{check_strong_condition, derive_parameters, weak_condition};
use lllsampler::rng::stream;
use lllsampler::verify::{brute_force, gof_joint, gof_test, tail_diagnostic, tail_precondition};
use lllsampler::{
    parse_instance, CspFormula, Error, FrozenMode, LllParameters, ParameterMode, PartialAssignment,
    Sampler, SamplerConfig,
};
use rayon::prelude::*;
use serde::ser::{Serialize, SerializeMap, Serializer};

use output::{f17, F17, LabelMap};

/// Ordinals computed in parallel before their output is written.
const BLOCK: u64 = 4096;

#[derive(Parser)]
#[command(name = "lllsampler", version, about = "Uniform sampling of CSP solutions in the local lemma regime")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw uniform satisfying assignments, one JSON object per line.
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        samples: u64,
        /// Target bias of the Monte-Carlo frozen oracle.
        #[arg(long, default_value_t = 0.01)]
        epsilon: f64,
    },
    /// Draw one variable from its marginal and report the frequencies.
    Marginal {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        var: String,
        #[arg(long, default_value_t = 1)]
        samples: u64,
        #[arg(long, default_value_t = 0.01)]
        epsilon: f64,
    },
    /// Estimate a marginal to relative error `epsilon` with failure probability `delta`.
    Infer {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        var: String,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 0.01)]
        mc_epsilon: f64,
    },
    /// Report p, p' and the strong and weak local lemma conditions.
    Check {
        #[command(flatten)]
        common: Common,
    },
    /// Compare samples against brute-force enumeration; exit 3 if the test fails.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10_000)]
        samples: u64,
        #[arg(long, default_value_t = 1e-3)]
        significance: f64,
        #[arg(long, default_value_t = 0.01)]
        epsilon: f64,
    },
    /// Path-length tail table over `calls` marginal samples.
    Stats {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10_000)]
        calls: u64,
        #[arg(long, default_value_t = 4)]
        max_i: u32,
        #[arg(long, default_value_t = 0.01)]
        epsilon: f64,
    },
}

#[derive(Args)]
struct Common {
    /// JSON or DIMACS instance file.
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, value_enum, default_value_t = Params::Weak)]
    params: Params,
    /// Explicit threshold p' (requires --zeta).
    #[arg(long, requires = "zeta")]
    p_prime: Option<f64>,
    #[arg(long, requires = "p_prime")]
    zeta: Option<f64>,
    /// Upper bound on the violation probability, for families without a closed form.
    #[arg(long)]
    p_max: Option<f64>,
    /// Frozen oracle; defaults to exact when every constraint has a closed form.
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Trials per Monte-Carlo frozen-oracle query, overriding the derived count.
    #[arg(long)]
    mc_trials: Option<u64>,
    #[arg(long)]
    trial_cap: Option<u64>,
    #[arg(long)]
    draw_budget: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Params {
    Weak,
    Strong,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Exact,
    Mc,
}

#[derive(serde::Serialize)]
struct MarginalReport<'a> {
    var: &'a str,
    samples: u64,
    counts: LabelMap<'a, u64>,
    frequencies: LabelMap<'a, F17>,
}

#[derive(serde::Serialize)]
struct InferReport<'a> {
    var: &'a str,
    estimates: LabelMap<'a, F17>,
    samples: u64,
    batch_size: u64,
    batches: u64,
    epsilon: F17,
    delta: F17,
}

#[derive(serde::Serialize)]
struct VerifyReport {
    solutions: u64,
    samples: u64,
    chi_squared: F17,
    dof: usize,
    p_value: F17,
    significance: F17,
    joint_pass: bool,
    marginal_pass: bool,
    max_marginal_error: F17,
    pass: bool,
}

#[derive(serde::Serialize)]
struct TailRowOut {
    i: u32,
    threshold: u64,
    empirical: F17,
    bound: F17,
    band: F17,
    within: bool,
}

#[derive(serde::Serialize)]
struct StatsReport {
    calls: u64,
    precondition_lhs: F17,
    precondition_rhs: F17,
    mean_path_length: F17,
    max_path_length: u64,
    rows: Vec<TailRowOut>,
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse(_) | Error::InvalidFormula(_) | Error::UnknownVariable(_) => 1,
            Error::ConditionViolated { .. }
            | Error::NotClosedForm { .. }
            | Error::InfeasibleComponent { .. }
            | Error::Unsatisfiable { .. } => 2,
            Error::BudgetExceeded { .. } | Error::RecursionGuard { .. } | Error::TooLarge { .. } => 4,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure {
            code: 1,
            message: e.to_string(),
        }
    }
}

type Outcome = Result<(), Failure>;

impl Common {
    fn load(&self) -> Result<CspFormula, Failure> {
        let text = fs::read_to_string(&self.instance).map_err(|e| Failure {
            code: 1,
            message: format!("{}: {e}", self.instance.display()),
        })?;
        Ok(parse_instance(&text)?)
    }

    fn parameters(&self, formula: &CspFormula) -> Result<LllParameters, Failure> {
        let mode = match (self.p_prime, self.zeta, self.params) {
            (Some(p_prime), Some(zeta), _) => ParameterMode::Explicit { p_prime, zeta },
            (_, _, Params::Weak) => ParameterMode::Weak,
            (_, _, Params::Strong) => ParameterMode::Strong,
        };
        Ok(derive_parameters(formula, self.p_max, mode)?)
    }

    fn config(&self, formula: &CspFormula, epsilon: f64) -> Result<SamplerConfig, Failure> {
        let params = self.parameters(formula)?;
        let mode = self.mode.unwrap_or(if formula.has_closed_forms() {
            Mode::Exact
        } else {
            Mode::Mc
        });
        let frozen = match mode {
            Mode::Exact if !formula.has_closed_forms() => {
                return Err(Failure {
                    code: 2,
                    message: "exact frozen oracle needs closed-form violation probabilities; use --mode mc".into(),
                })
            }
            Mode::Exact => FrozenMode::Exact,
            Mode::Mc => match self.mc_trials {
                Some(trials) => FrozenMode::MonteCarlo { epsilon, trials },
                None => FrozenMode::monte_carlo(formula, params.p_prime, epsilon),
            },
        };
        let mut config = SamplerConfig::new(params, frozen);
        if let Some(t) = self.trial_cap {
            config.trial_cap = t;
        }
        if let Some(b) = self.draw_budget {
            config.draw_budget = b;
        }
        Ok(config)
    }

    fn writer(&self) -> Result<Box<dyn Write>, Failure> {
        Ok(match &self.out {
            Some(p) => Box::new(BufWriter::new(fs::File::create(p)?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }

    fn pool(&self) -> Result<rayon::ThreadPool, Failure> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs.max(1))
            .build()
            .map_err(|e| Failure {
                code: 1,
                message: e.to_string(),
            })
    }
}

fn var_index(formula: &CspFormula, name: &str) -> Result<usize, Failure> {
    formula
        .var_index(name)
        .ok_or_else(|| Error::UnknownVariable(name.into()).into())
}

/// Run `f` on ordinals `start..end` in parallel; results come back in ordinal order.
fn parallel_block<T: Send>(
    pool: &rayon::ThreadPool,
    jobs: usize,
    start: u64,
    end: u64,
    f: impl Fn(u64, u64) -> lllsampler::Result<Vec<T>> + Sync,
) -> lllsampler::Result<Vec<T>> {
    let len = end - start;
    let chunk = len.div_ceil(4 * jobs.max(1) as u64).max(1);
    let chunks: Vec<(u64, u64)> = (start..end)
        .step_by(chunk as usize)
        .map(|s| (s, (s + chunk).min(end)))
        .collect();
    let parts: Vec<Vec<T>> = pool.install(|| {
        chunks
            .into_par_iter()
            .map(|(s, e)| f(s, e))
            .collect::<lllsampler::Result<_>>()
    })?;
    Ok(parts.into_iter().flatten().collect())
}

/// Draw full assignments `start..end` on streams `(seed, ordinal)`.
fn draw_samples(
    formula: &CspFormula,
    config: &SamplerConfig,
    pool: &rayon::ThreadPool,
    jobs: usize,
    seed: u64,
    start: u64,
    end: u64,
) -> lllsampler::Result<Vec<Vec<u32>>> {
    parallel_block(pool, jobs, start, end, |s, e| {
        let mut sampler = Sampler::new(formula, config, stream(seed, s));
        (s..e)
            .map(|i| {
                sampler.reset(stream(seed, i));
                sampler.sample()
            })
            .collect()
    })
}

struct Labeled<'a> {
    formula: &'a CspFormula,
    values: &'a [u32],
}

impl Serialize for Labeled<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.values.len()))?;
        for (var, &x) in self.formula.variables().iter().zip(self.values) {
            map.serialize_entry(&var.name, &var.labels[x as usize])?;
        }
        map.end()
    }
}

fn write_json(out: &mut dyn Write, value: &impl Serialize) -> Outcome {
    serde_json::to_writer(&mut *out, value).map_err(io::Error::from)?;
    out.write_all(b"\n")?;
    Ok(())
}

fn cmd_sample(common: &Common, samples: u64, epsilon: f64) -> Outcome {
    let formula = common.load()?;
    let config = common.config(&formula, epsilon)?;
    let pool = common.pool()?;
    let mut out = common.writer()?;
    let mut start = 0;
    while start < samples {
        let end = (start + BLOCK).min(samples);
        let block = draw_samples(&formula, &config, &pool, common.jobs, common.seed, start, end)?;
        for values in &block {
            write_json(
                &mut out,
                &Labeled {
                    formula: &formula,
                    values,
                },
            )?;
        }
        start = end;
    }
    out.flush()?;
    Ok(())
}

fn cmd_marginal(common: &Common, var: &str, samples: u64, epsilon: f64) -> Outcome {
    let formula = common.load()?;
    let v = var_index(&formula, var)?;
    let config = common.config(&formula, epsilon)?;
    let pool = common.pool()?;
    let draws = parallel_block(&pool, common.jobs, 0, samples, |s, e| {
        let mut sampler = Sampler::new(&formula, &config, stream(common.seed, s));
        (s..e)
            .map(|i| {
                sampler.reset(stream(common.seed, i));
                sampler.marginal(v)
            })
            .collect()
    })?;
    let labels = &formula.variable(v).labels;
    let mut counts = vec![0u64; labels.len()];
    for x in draws {
        counts[x as usize] += 1;
    }
    let report = MarginalReport {
        var,
        samples,
        counts: labels.iter().map(String::as_str).zip(counts.iter().copied()).collect(),
        frequencies: labels
            .iter()
            .map(String::as_str)
            .zip(counts.iter().map(|&c| f17(c as f64 / samples.max(1) as f64)))
            .collect(),
    };
    let mut out = common.writer()?;
    write_json(&mut out, &report)?;
    out.flush()?;
    Ok(())
}

fn cmd_infer(common: &Common, var: &str, epsilon: f64, delta: f64, mc_epsilon: f64) -> Outcome {
    if !(epsilon > 0.0 && delta > 0.0) {
        return Err(Failure {
            code: 1,
            message: "--epsilon and --delta must be positive".into(),
        });
    }
    let formula = common.load()?;
    let v = var_index(&formula, var)?;
    let config = common.config(&formula, mc_epsilon)?;
    let est = infer_marginal(&formula, v, epsilon, delta, &config, common.seed)?;
    let report = InferReport {
        var,
        estimates: formula
            .variable(v)
            .labels
            .iter()
            .map(String::as_str)
            .zip(est.estimates.iter().map(|&p| f17(p)))
            .collect(),
        samples: est.samples,
        batch_size: est.batch_size,
        batches: est.batches,
        epsilon: f17(epsilon),
        delta: f17(delta),
    };
    let mut out = common.writer()?;
    write_json(&mut out, &report)?;
    out.flush()?;
    Ok(())
}

fn cmd_check(common: &Common) -> Outcome {
    let formula = common.load()?;
    let p = match common.p_max {
        Some(p) => p,
        None => formula.max_violation_probability()?,
    };
    let (q, k, d) = (formula.max_domain(), formula.width(), formula.degree());
    let (weak_lhs, weak) = weak_condition(q, d, p);
    let strong = check_strong_condition(&formula, p);
    let mut out = common.writer()?;
    let g = |x: f64| format!("{:.16e}", x);
    writeln!(out, "variables={}", formula.num_vars())?;
    writeln!(out, "constraints={}", formula.num_constraints())?;
    writeln!(out, "q={q}")?;
    writeln!(out, "k={k}")?;
    writeln!(out, "degree={d}")?;
    writeln!(out, "p={}", g(p))?;
    writeln!(out, "weak_lhs={}", g(weak_lhs))?;
    writeln!(out, "weak={weak}")?;
    writeln!(out, "strong_lhs={}", g(strong.lhs))?;
    writeln!(out, "strong_rhs={}", g(strong.rhs))?;
    writeln!(out, "strong={}", strong.holds)?;
    match common.parameters(&formula) {
        Ok(params) => {
            writeln!(out, "parameters=accepted")?;
            writeln!(out, "p_prime={}", g(params.p_prime))?;
            writeln!(out, "eta={}", g(params.eta))?;
            writeln!(out, "zeta={}", g(params.zeta))?;
            writeln!(out, "theta_min={}", g(params.theta_min()))?;
            let (lhs, rhs, holds) = tail_precondition(&params);
            writeln!(out, "tail_precondition_lhs={}", g(lhs))?;
            writeln!(out, "tail_precondition_rhs={}", g(rhs))?;
            writeln!(out, "tail_precondition={holds}")?;
        }
        Err(f) => writeln!(out, "parameters=rejected: {}", f.message)?,
    }
    out.flush()?;
    Ok(())
}

fn cmd_verify(common: &Common, samples: u64, significance: f64, epsilon: f64) -> Outcome {
    let formula = common.load()?;
    let config = common.config(&formula, epsilon)?;
    let exact = brute_force(
        &formula,
        &PartialAssignment::new(formula.num_vars()),
        lllsampler::verify::DEFAULT_ENUM_CAP,
    )?;
    if exact.num_solutions() == 0 {
        return Err(Failure {
            code: 2,
            message: "instance has no solutions".into(),
        });
    }
    let pool = common.pool()?;
    let drawn = draw_samples(&formula, &config, &pool, common.jobs, common.seed, 0, samples)?;
    let joint = gof_joint(&exact, drawn.iter().map(|s| s.as_slice()), significance);
    let mut max_err = 0.0f64;
    let mut marginal_pass = true;
    for v in 0..formula.num_vars() {
        let mut counts = vec![0u64; formula.domain_size(v) as usize];
        for s in &drawn {
            counts[s[v] as usize] += 1;
        }
        let mu = exact.marginal(v);
        for (x, &c) in counts.iter().enumerate() {
            max_err = max_err.max((c as f64 / samples.max(1) as f64 - mu[x]).abs());
        }
        marginal_pass &= gof_test(&counts, &mu, significance).pass;
    }
    let pass = joint.pass && marginal_pass;
    let mut out = common.writer()?;
    write_json(
        &mut out,
        &VerifyReport {
            solutions: exact.num_solutions(),
            samples,
            chi_squared: f17(joint.statistic),
            dof: joint.dof,
            p_value: f17(joint.p_value),
            significance: f17(significance),
            joint_pass: joint.pass,
            marginal_pass,
            max_marginal_error: f17(max_err),
            pass,
        },
    )?;
    out.flush()?;
    if pass {
        Ok(())
    } else {
        Err(Failure {
            code: 3,
            message: "goodness-of-fit test failed".into(),
        })
    }
}

fn cmd_stats(common: &Common, calls: u64, max_i: u32, epsilon: f64) -> Outcome {
    let formula = common.load()?;
    let config = common.config(&formula, epsilon)?;
    let report = tail_diagnostic(&formula, &config, calls, common.seed, max_i)?;
    let rows = report
        .rows
        .iter()
        .map(|r| TailRowOut {
            i: r.i,
            threshold: r.threshold,
            empirical: f17(r.empirical),
            bound: f17(r.bound),
            band: f17(r.band),
            within: r.within,
        })
        .collect();
    let mut out = common.writer()?;
    write_json(
        &mut out,
        &StatsReport {
            calls: report.calls,
            precondition_lhs: f17(report.precondition_lhs),
            precondition_rhs: f17(report.precondition_rhs),
            mean_path_length: f17(report.mean_path_length),
            max_path_length: report.max_path_length,
            rows,
        },
    )?;
    out.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    match &cli.command {
        Command::Sample {
            common,
            samples,
            epsilon,
        } => cmd_sample(common, *samples, *epsilon),
        Command::Marginal {
            common,
            var,
            samples,
            epsilon,
        } => cmd_marginal(common, var, *samples, *epsilon),
        Command::Infer {
            common,
            var,
            epsilon,
            delta,
            mc_epsilon,
        } => cmd_infer(common, var, *epsilon, *delta, *mc_epsilon),
        Command::Check { common } => cmd_check(common),
        Command::Verify {
            common,
            samples,
            significance,
            epsilon,
        } => cmd_verify(common, *samples, *significance, *epsilon),
        Command::Stats {
            common,
            calls,
            max_i,
            epsilon,
        } => cmd_stats(common, *calls, *max_i, *epsilon),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
