//! `logtree`: command-line front end for the random-tree laboratory.
//!
//! Exit status is 0 on success, 1 when a gate fails (the report is still
//! written) and 2 on usage errors.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use logtree::asympt::{expected_width_prediction, mode_prediction, model_constants};
use logtree::exact::{
    central_moment_dp, enumerate_exact, expected_profile_dp, expected_profile_stirling, supports_moment_dp,
    TableValue, EXACT_BOUNDARY,
};
use logtree::generate::{generate_depths, profile_from_depths};
use logtree::model::{log_n, width_and_mode};
use logtree::montecarlo::{
    convergence_experiment, figure1_experiment, run_gates, simulate_with, GateConfig, RunOptions, DEFAULT_BUDGET,
};
use logtree::rng::DEFAULT_SEED;
use logtree::scalar::{ratio_to_f64, Rational, Scalar};
use logtree::series::{profile_row_increasing, tau_exact, DegreeFunction, RATIONAL_ROW_CAP};
use logtree::{parse_model_spec, Error, TreeModelSpec};

/// Largest `n` for which the moment table is computed in rationals.
const RATIONAL_MOMENT_N: usize = 100;

#[derive(Parser)]
#[command(name = "logtree", version, about = "Profiles, widths and modes of random logarithmic-height trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct Common {
    /// Output file, written atomically; stdout when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct Exec {
    /// Worker threads (default: available parallelism).
    #[arg(long, env = "LOGTREE_THREADS")]
    threads: Option<usize>,
    /// Lift the n * reps budget.
    #[arg(long)]
    allow_large: bool,
}

impl Exec {
    fn options(&self) -> RunOptions {
        RunOptions {
            threads: self.threads,
            allow_large: self.allow_large,
            budget: DEFAULT_BUDGET,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Histogram {
    Width,
    Mode,
}

#[derive(Subcommand)]
enum Command {
    /// Grow one tree and report its profile.
    Generate {
        #[arg(long)]
        model: String,
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Include the depth of every node in JSON output.
        #[arg(long)]
        depths: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Exact expected profile row `mu_{n,k}`.
    ExactProfile {
        #[arg(long)]
        model: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k_max: Option<usize>,
        /// Use floating point even where rationals are available.
        #[arg(long)]
        float: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Exact central moments `E (Y_{n,k} - mu_{n,k})^m` of one row.
    ExactMoments {
        #[arg(long)]
        model: String,
        #[arg(long)]
        n: usize,
        /// Highest moment order.
        #[arg(long, default_value_t = 4)]
        m_max: usize,
        /// Order written in CSV output.
        #[arg(long, default_value_t = 2)]
        order: usize,
        #[arg(long)]
        float: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Drift and variance constants of a family.
    Constants {
        #[arg(long)]
        model: String,
        #[command(flatten)]
        common: Common,
    },
    /// Leading-order width and mode predictions.
    Predict {
        #[arg(long)]
        model: String,
        #[arg(long)]
        n: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Simulate many trees and summarize widths, modes and profiles.
    Simulate {
        #[arg(long)]
        model: String,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        reps: u64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Histogram written in CSV output.
        #[arg(long, value_enum, default_value = "width")]
        histogram: Histogram,
        #[command(flatten)]
        exec: Exec,
        #[command(flatten)]
        common: Common,
    },
    /// Run the whole verification suite.
    Gates {
        /// Gate config file with `full` and `quick` profiles; the bundled one by default.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "full")]
        profile: String,
        /// Overrides the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        exec: Exec,
        #[command(flatten)]
        common: Common,
    },
    /// Compare the width histogram with the level histograms around `L_n`.
    Figure1 {
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 300)]
        reps: u64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Histogram written in CSV output: `width` or `level_K`.
        #[arg(long, default_value = "width")]
        histogram: String,
        #[command(flatten)]
        exec: Exec,
        #[command(flatten)]
        common: Common,
    },
    /// Follow the width ratio along one growing tree.
    Converge {
        #[arg(long, default_value = "recursive")]
        model: String,
        #[arg(long, default_value_t = 190)]
        ell_max: u32,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 0.9)]
        lower: f64,
        #[arg(long, default_value_t = 1.1)]
        upper: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Exact profile law of a tiny tree by enumeration.
    Oracle {
        #[arg(long)]
        model: String,
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Tree count and expected profile from generating functions.
    Series {
        #[arg(long)]
        model: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k_max: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
}

enum Outcome {
    Done,
    GateFailed,
}

fn usage(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidArgument {
        field,
        reason: reason.into(),
    }
}

fn model(text: &str) -> logtree::Result<TreeModelSpec> {
    parse_model_spec(text)
}

/// Writes to a temporary file next to `path` and renames it into place.
fn emit(common: &Common, body: &str) -> logtree::Result<()> {
    let io = |e: std::io::Error| usage("output", e.to_string());
    match &common.output {
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(body.as_bytes()).map_err(io)
        }
        Some(path) => {
            let dir = match path.parent() {
                Some(p) if !p.as_os_str().is_empty() => p,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
            tmp.write_all(body.as_bytes()).map_err(io)?;
            tmp.persist(path).map_err(|e| io(e.error))?;
            Ok(())
        }
    }
}

fn emit_json(common: &Common, value: &impl serde::Serialize) -> logtree::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Numerical(e.to_string()))?;
    text.push('\n');
    emit(common, &text)
}

fn json_only(common: &Common, command: &str) -> logtree::Result<()> {
    match common.format {
        Format::Json => Ok(()),
        Format::Csv => Err(usage("format", format!("`{command}` writes JSON only"))),
    }
}

fn pairs_csv<K: std::fmt::Display>(header: &str, rows: impl Iterator<Item = (K, u64)>) -> String {
    let mut out = format!("{header}\n");
    for (k, c) in rows {
        out.push_str(&format!("{k},{c}\n"));
    }
    out
}

fn row_csv(n: usize, row: &[f64]) -> String {
    let mut out = String::from("n,k,value\n");
    for (k, v) in row.iter().enumerate() {
        out.push_str(&format!("{n},{k},{v:?}\n"));
    }
    out
}

fn row_output<S: Scalar + TableValue>(common: &Common, head: Value, n: usize, row: &[S]) -> logtree::Result<()> {
    match common.format {
        Format::Csv => emit(common, &row_csv(n, &row.iter().map(Scalar::to_f64).collect::<Vec<_>>())),
        Format::Json => {
            let mut v = head;
            v["row"] = Value::Array(row.iter().map(TableValue::json).collect());
            emit_json(common, &v)
        }
    }
}

fn exact_profile(spec: &str, n: usize, k_max: Option<usize>, float: bool, common: &Common) -> logtree::Result<()> {
    let m = model(spec)?;
    if n == 0 {
        return Err(Error::UnsupportedSize {
            n: 0,
            reason: "trees have at least one node".into(),
        });
    }
    let series = matches!(m, TreeModelSpec::Increasing { .. } | TreeModelSpec::Mobile);
    let exact_cap = match m {
        TreeModelSpec::Recursive => 1000,
        _ if series => RATIONAL_ROW_CAP,
        _ => EXACT_BOUNDARY,
    };
    let exact = !float && n <= exact_cap;
    let k_max = k_max.unwrap_or(if exact {
        n - 1
    } else {
        (n - 1).min((5.0 * log_n(n as f64)).ceil() as usize + 10)
    });
    let head = json!({ "model": m.to_string(), "n": n, "k_max": k_max, "exact": exact });
    fn row<S: Scalar>(m: &TreeModelSpec, n: usize, k_max: usize, series: bool) -> logtree::Result<Vec<S>> {
        if *m == TreeModelSpec::Recursive {
            expected_profile_stirling::<S>(n, k_max)
        } else if series {
            Ok(profile_row_increasing::<S>(m, n, k_max)?.coeffs)
        } else {
            Ok(expected_profile_dp::<S>(m, n, k_max)?.mu.swap_remove(n))
        }
    }
    if exact {
        row_output(common, head, n, &row::<Rational>(&m, n, k_max, series)?)
    } else {
        row_output(common, head, n, &row::<f64>(&m, n, k_max, series)?)
    }
}

fn exact_moments(spec: &str, n: usize, m_max: usize, order: usize, float: bool, common: &Common) -> logtree::Result<()> {
    let m = model(spec)?;
    if !supports_moment_dp(&m) {
        return Err(Error::UnsupportedModel {
            op: "exact-moments",
            model: m.to_string(),
            reason: "moment tables need a two-way split".into(),
        });
    }
    if order > m_max {
        return Err(usage("order", "must not exceed --m-max"));
    }
    let k_max = n.saturating_sub(1);
    let exact = !float && n <= RATIONAL_MOMENT_N;
    fn write<S: Scalar + TableValue>(
        m: &TreeModelSpec,
        n: usize,
        k_max: usize,
        m_max: usize,
        order: usize,
        exact: bool,
        common: &Common,
    ) -> logtree::Result<()> {
        let t = central_moment_dp::<S>(m, n, k_max, m_max)?;
        match common.format {
            Format::Csv => {
                let row: Vec<f64> = (0..=k_max).map(|k| t.moment(order, n, k).to_f64()).collect();
                emit(common, &row_csv(n, &row))
            }
            Format::Json => {
                let moments: Vec<Value> = (0..=m_max)
                    .map(|o| Value::Array((0..=k_max).map(|k| t.moment(o, n, k).json()).collect()))
                    .collect();
                let mu: Vec<Value> = t.mu[n].iter().map(TableValue::json).collect();
                emit_json(
                    common,
                    &json!({
                        "model": m.to_string(),
                        "n": n,
                        "exact": exact,
                        "mu": mu,
                        "moments": moments,
                    }),
                )
            }
        }
    }
    if exact {
        write::<Rational>(&m, n, k_max, m_max, order, exact, common)
    } else {
        write::<f64>(&m, n, k_max, m_max, order, exact, common)
    }
}

fn predict(spec: &str, n: f64, common: &Common) -> logtree::Result<()> {
    json_only(common, "predict")?;
    let m = model(spec)?;
    if n.is_nan() || n < 1.0 {
        return Err(usage("n", "must be at least 1"));
    }
    let c = model_constants(&m);
    let l = log_n(n);
    let mode = match m {
        TreeModelSpec::Recursive => Some(mode_prediction(n)?),
        _ => None,
    };
    let finite = |x: f64| if x.is_finite() { json!(x) } else { Value::Null };
    let width = if c.width_regular {
        json!(expected_width_prediction(&m, n)?)
    } else {
        Value::Null
    };
    emit_json(
        common,
        &json!({
            "model": m.to_string(),
            "n": n,
            "L_n": l,
            "frac": l - l.floor(),
            "v": finite(c.v),
            "sigma2": finite(c.sigma2),
            "expected_width": width,
            "k_hat": mode.map(|p| p.k_hat),
            "width_level": mode.map(|p| p.width_level),
        }),
    )
}

fn series(spec: &str, n: usize, k_max: Option<usize>, common: &Common) -> logtree::Result<()> {
    json_only(common, "series")?;
    let m = model(spec)?;
    let phi = DegreeFunction::from_model(&m)?;
    if n == 0 || n > RATIONAL_ROW_CAP {
        return Err(Error::UnsupportedSize {
            n: n as u64,
            reason: format!("series rows are exact for 1 <= n <= {RATIONAL_ROW_CAP}"),
        });
    }
    let tau = tau_exact(&phi, n)?;
    let k_max = k_max.unwrap_or(n - 1);
    let row: Option<Vec<Value>> = if ratio_to_f64(&tau) == 0.0 {
        None
    } else {
        let coeffs = match m {
            TreeModelSpec::Recursive => expected_profile_stirling::<Rational>(n, k_max)?,
            TreeModelSpec::Port => logtree::series::profile_row_for::<Rational>(&phi, n, k_max)?.coeffs,
            _ => profile_row_increasing::<Rational>(&m, n, k_max)?.coeffs,
        };
        Some(coeffs.iter().map(TableValue::json).collect())
    };
    emit_json(
        common,
        &json!({
            "model": m.to_string(),
            "n": n,
            "tau": tau.json(),
            "tau_float": ratio_to_f64(&tau),
            "row": row,
        }),
    )
}

fn run(cli: Cli) -> logtree::Result<Outcome> {
    match cli.command {
        Command::Generate {
            model: spec,
            n,
            seed,
            depths,
            common,
        } => {
            let m = model(&spec)?;
            let d = generate_depths(&m, n, seed)?;
            let profile = profile_from_depths(&d);
            let w = width_and_mode(&profile)?;
            match common.format {
                Format::Csv => emit(&common, &pairs_csv("level,count", profile.counts.iter().copied().enumerate()))?,
                Format::Json => {
                    let mut v = json!({
                        "model": m.to_string(),
                        "n": n,
                        "seed": seed,
                        "profile": profile.counts,
                        "width": w.width,
                        "mode_level": w.mode_level,
                    });
                    if depths {
                        v["depths"] = json!(d.depths);
                    }
                    emit_json(&common, &v)?
                }
            }
        }
        Command::ExactProfile {
            model,
            n,
            k_max,
            float,
            common,
        } => exact_profile(&model, n, k_max, float, &common)?,
        Command::ExactMoments {
            model,
            n,
            m_max,
            order,
            float,
            common,
        } => exact_moments(&model, n, m_max, order, float, &common)?,
        Command::Constants { model: spec, common } => {
            json_only(&common, "constants")?;
            let m = model(&spec)?;
            let mut v = serde_json::to_value(model_constants(&m)).map_err(|e| Error::Numerical(e.to_string()))?;
            v["model"] = json!(m.to_string());
            emit_json(&common, &v)?
        }
        Command::Predict { model, n, common } => predict(&model, n, &common)?,
        Command::Simulate {
            model: spec,
            n,
            reps,
            seed,
            histogram,
            exec,
            common,
        } => {
            let s = simulate_with(&model(&spec)?, n, reps, seed, &exec.options())?;
            match (common.format, histogram) {
                (Format::Json, _) => emit_json(&common, &s)?,
                (Format::Csv, Histogram::Width) => {
                    emit(&common, &pairs_csv("value,freq", s.width_hist.iter().map(|(k, c)| (*k, *c))))?
                }
                (Format::Csv, Histogram::Mode) => {
                    emit(&common, &pairs_csv("level,count", s.mode_hist.iter().map(|(k, c)| (*k, *c))))?
                }
            }
        }
        Command::Gates {
            config,
            profile,
            seed,
            exec,
            common,
        } => {
            json_only(&common, "gates")?;
            let mut cfg = match &config {
                Some(path) => GateConfig::from_path(path, &profile)?,
                None => GateConfig::builtin(&profile)?,
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.allow_large |= exec.allow_large;
            let report = run_gates(&cfg, exec.threads, |r, elapsed| {
                eprintln!(
                    "[{}] criterion {} {} ({:.1} s)",
                    if r.pass() { "pass" } else { "FAIL" },
                    r.criterion,
                    r.experiment,
                    elapsed.as_secs_f64()
                );
            })?;
            emit_json(&common, &report)?;
            if !report.pass {
                return Ok(Outcome::GateFailed);
            }
        }
        Command::Figure1 {
            n,
            reps,
            seed,
            histogram,
            exec,
            common,
        } => {
            let r = figure1_experiment(n, reps, seed, &exec.options())?;
            match common.format {
                Format::Json => emit_json(&common, &r)?,
                Format::Csv => {
                    let h = if histogram == "width" {
                        &r.width_hist
                    } else {
                        r.level_hists
                            .get(&histogram)
                            .ok_or_else(|| usage("histogram", format!("choose width or one of {:?}", r.level_hists.keys())))?
                    };
                    emit(&common, &pairs_csv("value,freq", h.iter().map(|(k, c)| (*k, *c))))?
                }
            }
            if !r.gate.pass {
                return Ok(Outcome::GateFailed);
            }
        }
        Command::Converge {
            model: spec,
            ell_max,
            seed,
            lower,
            upper,
            common,
        } => {
            json_only(&common, "converge")?;
            let r = convergence_experiment(&model(&spec)?, ell_max, seed, (lower, upper))?;
            emit_json(&common, &r)?;
            if r.gates.iter().any(|g| !g.pass) {
                return Ok(Outcome::GateFailed);
            }
        }
        Command::Oracle { model: spec, n, common } => {
            json_only(&common, "oracle")?;
            let m = model(&spec)?;
            let law = enumerate_exact(&m, n)?;
            emit_json(&common, &json!({ "model": m.to_string(), "n": n, "outcomes": law }))?
        }
        Command::Series {
            model,
            n,
            k_max,
            common,
        } => series(&model, n, k_max, &common)?,
    }
    Ok(Outcome::Done)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::GateFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
