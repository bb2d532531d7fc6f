//! Pass/fail checks of simulated statistics against predictions. Every
//! band is a declared engineering threshold taken from the gate config.

use serde::Serialize;

use super::stats::mean_var;
use super::{run_replications, RunOptions, Samples, SimSummary};
use crate::asympt::{expected_width_prediction, mode_prediction, model_constants};
use crate::error::{Error, Result};
use crate::exact::{central_moment_dp, enumerate_exact, supports_moment_dp, StirlingRows, MAX_MOMENT_N};
use crate::generate::{grow_checkpoints, GrowthSchedule};
use crate::model::{log_n, TreeModelSpec};
use crate::scalar::{Rational, Scalar};

/// How `measured` is compared with `reference`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Rule {
    /// `lower <= measured / reference <= upper`.
    RatioBand { lower: f64, upper: f64 },
    /// `|measured - reference| <= tolerance`.
    Within,
    /// `measured <= reference`.
    AtMost,
    /// `measured < reference`.
    Below,
    Equal,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GateResult {
    pub name: String,
    pub rule: Rule,
    pub measured: f64,
    pub reference: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Where the reference value comes from.
    pub source: String,
}

impl GateResult {
    pub fn new(
        name: impl Into<String>,
        rule: Rule,
        measured: f64,
        reference: f64,
        tolerance: f64,
        source: impl Into<String>,
    ) -> Self {
        let pass = match &rule {
            Rule::RatioBand { lower, upper } => {
                let r = measured / reference;
                *lower <= r && r <= *upper
            }
            Rule::Within => (measured - reference).abs() <= tolerance,
            Rule::AtMost => measured <= reference,
            Rule::Below => measured < reference,
            Rule::Equal => measured == reference,
        };
        GateResult {
            name: name.into(),
            rule,
            measured,
            reference,
            tolerance,
            pass,
            source: source.into(),
        }
    }
}

const WIDTH_FORMULA: &str = "n / sqrt(2 pi sigma2 L_n)";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WidthGateReport {
    pub n_small: u64,
    pub n_large: u64,
    pub mean_small: f64,
    pub mean_large: f64,
    pub ratio_small: f64,
    pub ratio_large: f64,
    pub gates: Vec<GateResult>,
}

/// Mean width over the predicted mean width at two sizes: the larger must
/// sit in `[lower, upper]` and be closer to 1.
pub fn width_gate(
    model: &TreeModelSpec,
    n_small: u64,
    n_large: u64,
    reps: u64,
    seed: u64,
    (lower, upper): (f64, f64),
    opts: &RunOptions,
) -> Result<WidthGateReport> {
    let small = run_replications(model, n_small, reps, seed, opts)?;
    let large = run_replications(model, n_large, reps, seed, opts)?;
    width_gate_from(&small, &large, (lower, upper))
}

pub(crate) fn width_gate_from(small: &Samples, large: &Samples, (lower, upper): (f64, f64)) -> Result<WidthGateReport> {
    let model = &large.model;
    let mean_small = mean_var(&small.widths()).0;
    let mean_large = mean_var(&large.widths()).0;
    let ratio_small = mean_small / expected_width_prediction(model, small.n as f64)?;
    let reference = expected_width_prediction(model, large.n as f64)?;
    let ratio_large = mean_large / reference;
    let gates = vec![
        GateResult::new(
            format!("width_ratio_n{}", large.n),
            Rule::RatioBand { lower, upper },
            mean_large,
            reference,
            (1.0 - lower).max(upper - 1.0),
            WIDTH_FORMULA,
        ),
        GateResult::new(
            "width_ratio_shrinks",
            Rule::Below,
            (ratio_large - 1.0).abs(),
            (ratio_small - 1.0).abs(),
            0.0,
            format!("|ratio - 1| at n = {}", small.n),
        ),
    ];
    Ok(WidthGateReport {
        n_small: small.n,
        n_large: large.n,
        mean_small,
        mean_large,
        ratio_small,
        ratio_large,
        gates,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VarianceRow {
    pub n: u64,
    pub var: f64,
    /// `Var(W_n) L_n^3 / n^2`.
    pub scaled_var: f64,
    pub m4: f64,
    /// `E(W_n - E W_n)^4 L_n^6 / n^4`.
    pub scaled_m4: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VarianceReport {
    pub rows: Vec<VarianceRow>,
    pub gates: Vec<GateResult>,
}

/// The scaled second and fourth central moments of `W_n` must stay within
/// a factor `max_ratio` across the sizes.
pub fn variance_scaling_gate(
    model: &TreeModelSpec,
    n_list: &[u64],
    reps: u64,
    seed: u64,
    max_ratio: f64,
    opts: &RunOptions,
) -> Result<VarianceReport> {
    if n_list.len() < 3 {
        return Err(Error::arg("n_list", "variance scaling needs at least three sizes"));
    }
    let samples = n_list
        .iter()
        .map(|&n| run_replications(model, n, reps, seed, opts))
        .collect::<Result<Vec<_>>>()?;
    variance_scaling_from(&samples.iter().collect::<Vec<_>>(), max_ratio)
}

pub(crate) fn variance_scaling_from(samples: &[&Samples], max_ratio: f64) -> Result<VarianceReport> {
    if samples.len() < 3 {
        return Err(Error::arg("n_list", "variance scaling needs at least three sizes"));
    }
    let rows: Vec<VarianceRow> = samples
        .iter()
        .map(|s| {
            let summary = SimSummary::from_samples(s);
            let n = s.n as f64;
            let l = log_n(n);
            let m4 = summary.width_moments.iter().find(|m| m.order == 4).map_or(0.0, |m| m.value);
            VarianceRow {
                n: s.n,
                var: summary.width_var,
                scaled_var: summary.width_var * l.powi(3) / (n * n),
                m4,
                scaled_m4: m4 * l.powi(6) / n.powi(4),
            }
        })
        .collect();
    let spread = |f: &dyn Fn(&VarianceRow) -> f64| {
        let max = rows.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        let min = rows.iter().map(f).fold(f64::INFINITY, f64::min);
        if min > 0.0 {
            max / min
        } else {
            f64::INFINITY
        }
    };
    let gates = vec![
        GateResult::new(
            "variance_scaling_s2",
            Rule::AtMost,
            spread(&|r| r.scaled_var),
            max_ratio,
            0.0,
            "max/min of Var(W_n) L_n^3 / n^2",
        ),
        GateResult::new(
            "variance_scaling_s4",
            Rule::AtMost,
            spread(&|r| r.scaled_m4),
            max_ratio,
            0.0,
            "max/min of E(W_n - EW_n)^4 L_n^6 / n^4",
        ),
    ];
    Ok(VarianceReport { rows, gates })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailPoint {
    pub t: f64,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModeTailReport {
    pub n: u64,
    pub center: f64,
    pub tail: Vec<TailPoint>,
    pub mode_peak: Option<usize>,
    pub k_hat: Option<i64>,
    pub gates: Vec<GateResult>,
}

/// Empirical `P(|k* - v L_n| >= T)`; must be nonincreasing in `T` and at most
/// `tail_max` at the largest `T`. For recursive trees the most frequent mode
/// must also lie within `window` of the predicted argmax level.
pub fn mode_tail_gate(
    model: &TreeModelSpec,
    n: u64,
    reps: u64,
    seed: u64,
    thresholds: &[f64],
    tail_max: f64,
    window: i64,
    opts: &RunOptions,
) -> Result<ModeTailReport> {
    let samples = run_replications(model, n, reps, seed, opts)?;
    mode_tail_from(&samples, thresholds, tail_max, window)
}

pub(crate) fn mode_tail_from(samples: &Samples, thresholds: &[f64], tail_max: f64, window: i64) -> Result<ModeTailReport> {
    let c = model_constants(&samples.model);
    if !c.width_regular {
        return Err(Error::unsupported("mode_tail_gate", &samples.model, "model is not width-regular"));
    }
    if thresholds.is_empty() {
        return Err(Error::arg("thresholds", "no tail thresholds given"));
    }
    let mut ts = thresholds.to_vec();
    ts.sort_by(f64::total_cmp);
    let center = c.v * log_n(samples.n as f64);
    let reps = samples.reps() as f64;
    let tail: Vec<TailPoint> = ts
        .iter()
        .map(|&t| TailPoint {
            t,
            probability: samples
                .trees
                .iter()
                .filter(|tr| (tr.mode_level as f64 - center).abs() >= t)
                .count() as f64
                / reps,
        })
        .collect();
    let increases = tail
        .windows(2)
        .filter(|w| w[1].probability > w[0].probability)
        .count();
    let last = tail.last().expect("nonempty thresholds");
    let mut gates = vec![
        GateResult::new("mode_tail_monotone", Rule::Equal, increases as f64, 0.0, 0.0, "count of increases"),
        GateResult::new(
            format!("mode_tail_at_{}", last.t),
            Rule::AtMost,
            last.probability,
            tail_max,
            0.0,
            "declared threshold",
        ),
    ];
    let summary = SimSummary::from_samples(samples);
    let mode_peak = summary.mode_peak();
    let mut k_hat = None;
    if samples.model == TreeModelSpec::Recursive && samples.n >= 2 {
        let pred = mode_prediction(samples.n as f64)?;
        k_hat = Some(pred.k_hat);
        gates.push(GateResult::new(
            "mode_peak_near_k_hat",
            Rule::Within,
            mode_peak.unwrap_or(0) as f64,
            pred.k_hat as f64,
            window as f64,
            "floor(L_n - 1 + gamma)",
        ));
    }
    Ok(ModeTailReport {
        n: samples.n,
        center,
        tail,
        mode_peak,
        k_hat,
        gates,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentCheck {
    pub k: usize,
    pub m: u32,
    pub exact: f64,
    pub measured: f64,
    pub se: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProfileMomentReport {
    pub n: u64,
    pub reps: u64,
    pub source: String,
    pub checks: Vec<MomentCheck>,
    /// Per order, `max_k |P^(m)_{n,k}| / (max(|Delta|,1)^m L_n^-m mu_{n,k}^m)`.
    pub envelope_constants: Vec<f64>,
    pub gate: GateResult,
}

/// Exact `mu_{n,k}` and `P^{(m)}_{n,k}` (`m <= m_max`) for levels `0..=k_max`.
fn exact_moments(model: &TreeModelSpec, n: usize, k_max: usize, m_max: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>, String)> {
    let dp = supports_moment_dp(model);
    if dp && n <= 100 {
        let t = central_moment_dp::<Rational>(model, n, k_max, m_max)?;
        let mu = t.mu[n].iter().map(Scalar::to_f64).collect();
        let pm = (0..=m_max).map(|m| (0..=k_max).map(|k| t.moment(m, n, k).to_f64()).collect()).collect();
        Ok((mu, pm, "exact central-moment table (rational)".into()))
    } else if dp && n <= MAX_MOMENT_N {
        let t = central_moment_dp::<f64>(model, n, k_max, m_max)?;
        let mu = t.mu[n].clone();
        let pm = (0..=m_max).map(|m| (0..=k_max).map(|k| t.moment(m, n, k)).collect()).collect();
        Ok((mu, pm, "exact central-moment table (compensated float)".into()))
    } else {
        let d = enumerate_exact(model, n).map_err(|_| {
            Error::unsupported("profile_moment_gate", model, "no exact moment table for this model and size")
        })?;
        let mu = (0..=k_max).map(|k| d.mean(k).to_f64()).collect();
        let pm = (0..=m_max)
            .map(|m| (0..=k_max).map(|k| d.central_moment(k, m as u32).to_f64()).collect())
            .collect();
        Ok((mu, pm, "brute-force enumeration".into()))
    }
}

/// Empirical `(1/N) sum (Y_{n,k} - mu_{n,k})^m` against the exact
/// `P^{(m)}_{n,k}`, within `z` standard errors. Levels are all levels for
/// `n <= 8`, otherwise `floor(v L_n) + delta` for `|delta| <= 3`.
pub fn profile_moment_gate(
    model: &TreeModelSpec,
    n: u64,
    reps: u64,
    m_max: u32,
    z: f64,
    seed: u64,
    opts: &RunOptions,
) -> Result<ProfileMomentReport> {
    let samples = run_replications(model, n, reps, seed, opts)?;
    profile_moment_from(&samples, m_max, z)
}

pub(crate) fn profile_moment_from(samples: &Samples, m_max: u32, z: f64) -> Result<ProfileMomentReport> {
    let model = &samples.model;
    let n = samples.n as usize;
    let l = log_n(n as f64);
    let c = model_constants(model);
    let levels: Vec<usize> = if n <= 8 {
        (0..n).collect()
    } else {
        let center = (c.v * l).floor() as i64;
        (center - 3..=center + 3)
            .filter(|&k| k >= 0 && (k as usize) < n)
            .map(|k| k as usize)
            .collect()
    };
    let k_max = *levels.iter().max().expect("n >= 1");
    let (mu, pm, source) = exact_moments(model, n, k_max, m_max as usize)?;
    let reps = samples.reps() as f64;
    let mut checks = Vec::new();
    let mut envelope = vec![0.0f64; m_max as usize + 1];
    for &k in &levels {
        let y = samples.level(k);
        for m in 1..=m_max {
            let terms: Vec<f64> = y.iter().map(|v| (v - mu[k]).powi(m as i32)).collect();
            let (measured, var) = mean_var(&terms);
            let se = (var / reps).sqrt();
            let exact = pm[m as usize][k];
            let pass = if se > 0.0 {
                (measured - exact).abs() <= z * se
            } else {
                (measured - exact).abs() <= 1e-9 * exact.abs().max(1.0)
            };
            checks.push(MomentCheck {
                k,
                m,
                exact,
                measured,
                se,
                pass,
            });
            let delta = (k as f64 - c.v * l).abs().max(1.0);
            let scale = (delta / l * mu[k]).powi(m as i32);
            if scale > 0.0 {
                envelope[m as usize] = envelope[m as usize].max(exact.abs() / scale);
            }
        }
    }
    let failures = checks.iter().filter(|c| !c.pass).count();
    let gate = GateResult::new(
        format!("profile_moments_n{n}"),
        Rule::Equal,
        failures as f64,
        0.0,
        z,
        source.clone(),
    );
    Ok(ProfileMomentReport {
        n: samples.n,
        reps: samples.reps() as u64,
        source,
        checks,
        envelope_constants: envelope,
        gate,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergencePoint {
    pub n: u64,
    pub width: u64,
    pub ratio: f64,
    /// `Y_{n, floor(L_n)} / mu_{n, floor(L_n)}` (recursive trees).
    pub level_ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub model: TreeModelSpec,
    pub seed: u64,
    pub points: Vec<ConvergencePoint>,
    pub oscillation_first: f64,
    pub oscillation_last: f64,
    pub max_width_step: u64,
    pub gates: Vec<GateResult>,
}

/// Grows one tree through `n_l = floor(e^sqrt(l))`, `l <= ell_max`. The final
/// width ratio must lie in `[lower, upper]` and its range over the last third
/// of checkpoints must be smaller than over the first third.
pub fn convergence_experiment(
    model: &TreeModelSpec,
    ell_max: u32,
    seed: u64,
    (lower, upper): (f64, f64),
) -> Result<ConvergenceReport> {
    let schedule = GrowthSchedule::exponential_sqrt(ell_max);
    let traj = grow_checkpoints(model, &schedule, seed)?;
    if traj.points.len() < 3 {
        return Err(Error::arg("ell_max", "need at least three checkpoints"));
    }
    let mut stirling = (*model == TreeModelSpec::Recursive).then(|| {
        let top = traj.points.last().map_or(1, |p| p.n);
        StirlingRows::<f64>::new(log_n(top as f64).floor() as usize + 1)
    });
    let points: Vec<ConvergencePoint> = traj
        .points
        .iter()
        .map(|p| {
            let level_ratio = stirling.as_mut().map(|rows| {
                while (rows.n() as u64) < p.n {
                    rows.advance();
                }
                let k = log_n(p.n as f64).floor() as usize;
                p.counts.get(k).copied().unwrap_or(0) as f64 / rows.row()[k]
            });
            ConvergencePoint {
                n: p.n,
                width: p.width,
                ratio: p.ratio,
                level_ratio,
            }
        })
        .collect();
    let third = points.len() / 3;
    let range = |ps: &[ConvergencePoint]| {
        let max = ps.iter().map(|p| p.ratio).fold(f64::NEG_INFINITY, f64::max);
        let min = ps.iter().map(|p| p.ratio).fold(f64::INFINITY, f64::min);
        max - min
    };
    let oscillation_first = range(&points[..third]);
    let oscillation_last = range(&points[points.len() - third..]);
    let last = points.last().expect("nonempty");
    let reference = expected_width_prediction(model, last.n as f64)?;
    let gates = vec![
        GateResult::new(
            format!("path_width_ratio_n{}", last.n),
            Rule::RatioBand { lower, upper },
            last.width as f64,
            reference,
            (1.0 - lower).max(upper - 1.0),
            WIDTH_FORMULA,
        ),
        GateResult::new(
            "path_oscillation_shrinks",
            Rule::Below,
            oscillation_last,
            oscillation_first,
            0.0,
            "ratio range over the first third of checkpoints",
        ),
    ];
    Ok(ConvergenceReport {
        model: model.clone(),
        seed,
        points,
        oscillation_first,
        oscillation_last,
        max_width_step: traj.max_width_step,
        gates,
    })
}
