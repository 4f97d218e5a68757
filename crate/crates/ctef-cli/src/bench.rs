//! Benchmark grids: repeated simulate-and-fit trials over a varying model
//! parameter, with per-trial records, summary statistics and box plots.
//!
//! A grid is described by a JSON config file:
//!
//! ```json
//! {
//!   "vary": "tau",
//!   "values": [0, 1, 3, 5],
//!   "w": [0.5, 0.65, 1.2, 2.0],
//!   "trials": 100,
//!   "p": 3, "n": 18,
//!   "tau": 0.0, "noise": 0.01, "ratio": 2.0,
//!   "seed": 0,
//!   "offset_threshold": 1.0, "shape_threshold": 1.0
//! }
//! ```
//!
//! `vary` is one of `tau`, `noise`, `ratio`; `values` lists the grid points;
//! `w` is a single weight or one weight per value; the fixed fields fill in
//! the parameters that do not vary. Thresholds feed the exceedance counters
//! in the summary. Every field except `vary` and `values` has a default.

use std::fmt::Write as _;
use std::time::Instant;

use ctef::pipeline::{self, FitResult};
use ctef::simulate::{simulate, stream_rng, SimSpec};
use ctef::solver::SolveOptions;
use ctef::{metrics, Error};
use rayon::prelude::*;
use serde::Deserialize;

use crate::svg::{box_stats, BoxStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VaryParam {
    Tau,
    Noise,
    Ratio,
}

impl VaryParam {
    pub fn as_str(&self) -> &'static str {
        match self {
            VaryParam::Tau => "tau",
            VaryParam::Noise => "noise",
            VaryParam::Ratio => "ratio",
        }
    }
}

/// One weight for the whole grid or one per grid value.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum WeightSpec {
    Single(f64),
    PerValue(Vec<f64>),
}

impl Default for WeightSpec {
    fn default() -> Self {
        WeightSpec::Single(pipeline::DEFAULT_WEIGHT)
    }
}

fn default_trials() -> usize {
    100
}
fn default_p() -> usize {
    3
}
fn default_n() -> usize {
    18
}
fn default_noise() -> f64 {
    0.01
}
fn default_ratio() -> f64 {
    2.0
}
fn default_threshold() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub vary: VaryParam,
    pub values: Vec<f64>,
    #[serde(default)]
    pub w: WeightSpec,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_p")]
    pub p: usize,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub tau: f64,
    #[serde(default = "default_noise")]
    pub noise: f64,
    #[serde(default = "default_ratio")]
    pub ratio: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_threshold")]
    pub offset_threshold: f64,
    #[serde(default = "default_threshold")]
    pub shape_threshold: f64,
}

impl GridConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.values.is_empty() {
            return Err("values must be nonempty".into());
        }
        if self.trials == 0 {
            return Err("trials must be at least 1".into());
        }
        if let WeightSpec::PerValue(w) = &self.w {
            if w.len() != self.values.len() {
                return Err(format!(
                    "w lists {} weights for {} values",
                    w.len(),
                    self.values.len()
                ));
            }
        }
        Ok(())
    }

    pub fn weight_for(&self, value_index: usize) -> f64 {
        match &self.w {
            WeightSpec::Single(w) => *w,
            WeightSpec::PerValue(w) => w[value_index],
        }
    }

    fn spec_for(&self, value: f64, seed: u64) -> SimSpec {
        let mut spec = SimSpec::new(self.p, self.n, self.tau, self.noise, self.ratio, seed);
        match self.vary {
            VaryParam::Tau => spec.concentration = value,
            VaryParam::Noise => spec.noise_pct = value,
            VaryParam::Ratio => spec.axis_ratio = value,
        }
        spec
    }
}

/// One simulate-and-fit trial. Error fields are NaN when the trial failed.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub trial: usize,
    pub value: f64,
    /// Stream id of the trial's generator, derived from the master seed.
    pub seed: u64,
    pub offset_error: f64,
    pub shape_error: f64,
    pub status: String,
    /// All fitted inverse axis lengths positive and within their bounds.
    pub ellipsoid_ok: bool,
    /// Some inverse axis length ended on the lower feasible bound, the
    /// signature of a fit escaping toward an oversized ellipsoid.
    pub a_at_lower_bound: bool,
    /// Not reproducible between runs; written to a separate timings file.
    pub wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct ValueSummary {
    pub value: f64,
    pub metric: &'static str,
    pub stats: Option<BoxStats>,
    pub n_exceed: usize,
    pub n_failed: usize,
}

#[derive(Debug)]
pub struct GridOutcome {
    pub records: Vec<TrialRecord>,
    pub summaries: Vec<ValueSummary>,
}

fn run_trial(config: &GridConfig, value_index: usize, trial: usize) -> TrialRecord {
    let stream = (value_index as u64) << 32 | trial as u64;
    let mut rng = stream_rng(config.seed, stream);
    let value = config.values[value_index];
    let spec = config.spec_for(value, config.seed);
    let weight = config.weight_for(value_index);
    let started = Instant::now();

    let outcome: Result<(FitResult, f64, f64), Error> = (|| {
        let (data, truth) = simulate(&spec, &mut rng)?;
        let fit = pipeline::fit(&data, weight, &SolveOptions::default())?;
        let offset =
            metrics::offset_error(&fit.ellipsoid_original.center, &truth.center)?;
        let shape =
            metrics::shape_error(&fit.ellipsoid_original.shape_matrix(), &truth.lambda)?;
        Ok((fit, offset, shape))
    })();
    let wall_time_s = started.elapsed().as_secs_f64();

    match outcome {
        Ok((fit, offset_error, shape_error)) => {
            let a = &fit.params_pca.a;
            let ellipsoid_ok = (0..a.len())
                .all(|i| a[i] > 0.0 && a[i] <= fit.feasible.a_upper[i]);
            let a_at_lower_bound = (0..a.len())
                .any(|i| a[i] - fit.feasible.a_lower[i] <= 1e-8 * fit.feasible.a_lower[i]);
            TrialRecord {
                trial,
                value,
                seed: stream,
                offset_error,
                shape_error,
                status: fit.report.status.as_str().to_string(),
                ellipsoid_ok,
                a_at_lower_bound,
                wall_time_s,
            }
        }
        Err(e) => TrialRecord {
            trial,
            value,
            seed: stream,
            offset_error: f64::NAN,
            shape_error: f64::NAN,
            status: format!("failed: {e}"),
            ellipsoid_ok: false,
            a_at_lower_bound: false,
            wall_time_s,
        },
    }
}

/// Runs the whole grid. Trials execute in a worker pool with one derived
/// generator stream per (value, trial) pair; records come back ordered by
/// value then trial index regardless of scheduling.
pub fn run_grid(config: &GridConfig) -> Result<GridOutcome, String> {
    config.validate()?;
    let mut records = Vec::with_capacity(config.values.len() * config.trials);
    for value_index in 0..config.values.len() {
        let mut batch: Vec<TrialRecord> = (0..config.trials)
            .into_par_iter()
            .map(|trial| run_trial(config, value_index, trial))
            .collect();
        records.append(&mut batch);
    }

    let mut summaries = Vec::new();
    for (value_index, &value) in config.values.iter().enumerate() {
        let block = &records[value_index * config.trials..(value_index + 1) * config.trials];
        for (metric, threshold, extract) in [
            (
                "offset",
                config.offset_threshold,
                Box::new(|r: &TrialRecord| r.offset_error) as Box<dyn Fn(&TrialRecord) -> f64>,
            ),
            (
                "shape",
                config.shape_threshold,
                Box::new(|r: &TrialRecord| r.shape_error),
            ),
        ] {
            let values: Vec<f64> = block.iter().map(&extract).collect();
            let n_failed = values.iter().filter(|v| !v.is_finite()).count();
            let n_exceed = values
                .iter()
                .filter(|v| v.is_finite() && **v > threshold)
                .count();
            summaries.push(ValueSummary {
                value,
                metric,
                stats: box_stats(&values),
                n_exceed,
                n_failed,
            });
        }
    }
    Ok(GridOutcome { records, summaries })
}

/// Deterministic per-trial CSV; wall time deliberately lives elsewhere so
/// that repeated runs with one seed are byte-identical.
pub fn trials_csv(records: &[TrialRecord]) -> String {
    let mut out = String::from(
        "trial,value,seed,offset_error,shape_error,status,ellipsoid_ok,a_at_lower_bound\n",
    );
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.trial,
            r.value,
            r.seed,
            r.offset_error,
            r.shape_error,
            r.status,
            r.ellipsoid_ok,
            r.a_at_lower_bound
        );
    }
    out
}

pub fn timings_csv(records: &[TrialRecord]) -> String {
    let mut out = String::from("trial,value,wall_time_s\n");
    for r in records {
        let _ = writeln!(out, "{},{},{:.6}", r.trial, r.value, r.wall_time_s);
    }
    out
}

pub fn summary_csv(summaries: &[ValueSummary]) -> String {
    let mut out = String::from(
        "value,metric,n,median,q1,q3,whisker_low,whisker_high,n_exceed,n_failed\n",
    );
    for s in summaries {
        match &s.stats {
            Some(b) => {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{}",
                    s.value,
                    s.metric,
                    b.n,
                    b.median,
                    b.q1,
                    b.q3,
                    b.whisker_low,
                    b.whisker_high,
                    s.n_exceed,
                    s.n_failed
                );
            }
            None => {
                let _ = writeln!(
                    out,
                    "{},{},0,nan,nan,nan,nan,nan,{},{}",
                    s.value, s.metric, s.n_exceed, s.n_failed
                );
            }
        }
    }
    out
}
