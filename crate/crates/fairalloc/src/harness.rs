//! Randomized cross-validation of the precomputing allocator against
//! progressive filling.
//!
//! Scenarios are drawn from uniform integer ranges with one generator
//! stream per trial, so a given `(seed, trial)` pair always produces the
//! same scenario no matter how trials are scheduled. Each trial allocates
//! with both algorithms and buckets the per-user task deltas.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::drf::{self, DrfOptions};
use crate::error::Error;
use crate::pdrf;
use crate::rational::Rational;
use crate::scenario::{Allocation, Scenario, UserDemand, UserId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n_users: usize,
    pub n_resources: usize,
    /// Inclusive per-entry demand range.
    pub demand_range: (u64, u64),
    /// Inclusive per-resource capacity range.
    pub reserve_range: (u64, u64),
    pub trials: usize,
    pub seed: u64,
    /// Options for the progressive-filling reference runs.
    pub drf_options: DrfOptions,
    /// Apply the single top-up sweep after precomputation.
    pub finishing_pass: bool,
}

impl ExperimentConfig {
    pub fn check(&self) -> Result<(), Error> {
        let fail = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.n_users == 0 {
            return fail("n_users must be at least 1");
        }
        if self.n_resources == 0 {
            return fail("n_resources must be at least 1");
        }
        if self.trials == 0 {
            return fail("trials must be at least 1");
        }
        let (dlo, dhi) = self.demand_range;
        if dlo > dhi {
            return fail("demand_range low end exceeds high end");
        }
        if dhi == 0 {
            return fail("demand_range must allow a positive demand");
        }
        let (rlo, rhi) = self.reserve_range;
        if rlo > rhi {
            return fail("reserve_range low end exceeds high end");
        }
        if rhi == 0 {
            return fail("reserve_range must allow a positive capacity");
        }
        Ok(())
    }
}

/// Draws the scenario for one trial. Deterministic in `(seed, trial)`: the
/// generator is seeded once and the trial index selects an independent
/// stream. All-zero demand rows are redrawn, everything else is accepted.
pub fn generate_scenario(config: &ExperimentConfig, trial: u64) -> Result<Scenario, Error> {
    config.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(trial);

    let (rlo, rhi) = config.reserve_range;
    let resources: Vec<u64> = (0..config.n_resources)
        .map(|_| rng.random_range(rlo..=rhi))
        .collect();

    let width = (config.n_users.max(2) - 1).to_string().len();
    let (dlo, dhi) = config.demand_range;
    let users = (0..config.n_users)
        .map(|i| {
            let demand = loop {
                let row: Vec<u64> = (0..config.n_resources)
                    .map(|_| rng.random_range(dlo..=dhi))
                    .collect();
                if row.iter().any(|&d| d > 0) {
                    break row;
                }
            };
            UserDemand::new(format!("u{i:0width$}"), demand)
        })
        .collect();
    Ok(Scenario::new(resources, users))
}

/// Per-user task difference, `candidate - reference`. Requires both
/// allocations to cover the same users.
pub fn compare(
    reference: &Allocation,
    candidate: &Allocation,
) -> Result<BTreeMap<UserId, i64>, Error> {
    if reference.tasks.len() != candidate.tasks.len()
        || !reference.tasks.keys().eq(candidate.tasks.keys())
    {
        return Err(Error::UserSetMismatch);
    }
    reference
        .tasks
        .iter()
        .map(|(user, &ref_count)| {
            let cand_count = candidate.tasks[user];
            let delta = cand_count as i128 - ref_count as i128;
            i64::try_from(delta)
                .map(|d| (user.clone(), d))
                .map_err(|_| Error::Overflow("task delta"))
        })
        .collect()
}

/// How one trial's deltas distribute: counts of users under- or
/// over-allocated by exactly 1, exactly 2, or more, plus the extreme
/// magnitudes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialDeviation {
    pub under_by_1: u64,
    pub under_by_2: u64,
    pub under_gt_2: u64,
    pub over_by_1: u64,
    pub over_by_2: u64,
    pub over_gt_2: u64,
    pub max_under: u64,
    pub max_over: u64,
}

impl TrialDeviation {
    /// Users the candidate left short, regardless of magnitude.
    pub fn under_total(&self) -> u64 {
        self.under_by_1 + self.under_by_2 + self.under_gt_2
    }

    /// Users the candidate gave extra tasks, regardless of magnitude.
    pub fn over_total(&self) -> u64 {
        self.over_by_1 + self.over_by_2 + self.over_gt_2
    }
}

pub fn bucket_deltas(deltas: &BTreeMap<UserId, i64>) -> TrialDeviation {
    let mut out = TrialDeviation::default();
    for &delta in deltas.values() {
        if delta < 0 {
            let magnitude = delta.unsigned_abs();
            match magnitude {
                1 => out.under_by_1 += 1,
                2 => out.under_by_2 += 1,
                _ => out.under_gt_2 += 1,
            }
            out.max_under = out.max_under.max(magnitude);
        } else if delta > 0 {
            let magnitude = delta as u64;
            match magnitude {
                1 => out.over_by_1 += 1,
                2 => out.over_by_2 += 1,
                _ => out.over_gt_2 += 1,
            }
            out.max_over = out.max_over.max(magnitude);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviationStats {
    pub config: ExperimentConfig,
    pub trials: Vec<TrialDeviation>,
}

/// Aggregates over all trials. Bucket fields are means of per-trial user
/// counts; `*_avg` and `*_std` are the mean and sample standard deviation
/// of the per-trial totals; `max_*` are global extremes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub under_by_1: f64,
    pub under_by_2: f64,
    pub under_gt_2: f64,
    pub over_by_1: f64,
    pub over_by_2: f64,
    pub over_gt_2: f64,
    pub max_under: u64,
    pub max_over: u64,
    pub under_avg: f64,
    pub under_std: f64,
    pub over_avg: f64,
    pub over_std: f64,
}

fn mean(values: impl Iterator<Item = u64> + Clone, n: usize) -> f64 {
    values.map(|v| v as f64).sum::<f64>() / n as f64
}

fn sample_std(values: impl Iterator<Item = u64> + Clone, n: usize) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let avg = mean(values.clone(), n);
    let squares: f64 = values.map(|v| (v as f64 - avg).powi(2)).sum();
    (squares / (n - 1) as f64).sqrt()
}

impl DeviationStats {
    pub fn aggregates(&self) -> Option<Aggregates> {
        if self.trials.is_empty() {
            return None;
        }
        let n = self.trials.len();
        let t = &self.trials;
        Some(Aggregates {
            under_by_1: mean(t.iter().map(|d| d.under_by_1), n),
            under_by_2: mean(t.iter().map(|d| d.under_by_2), n),
            under_gt_2: mean(t.iter().map(|d| d.under_gt_2), n),
            over_by_1: mean(t.iter().map(|d| d.over_by_1), n),
            over_by_2: mean(t.iter().map(|d| d.over_by_2), n),
            over_gt_2: mean(t.iter().map(|d| d.over_gt_2), n),
            max_under: t.iter().map(|d| d.max_under).max().unwrap_or(0),
            max_over: t.iter().map(|d| d.max_over).max().unwrap_or(0),
            under_avg: mean(t.iter().map(|d| d.under_total()), n),
            under_std: sample_std(t.iter().map(|d| d.under_total()), n),
            over_avg: mean(t.iter().map(|d| d.over_total()), n),
            over_std: sample_std(t.iter().map(|d| d.over_total()), n),
        })
    }
}

/// Runs every trial, in parallel when worker threads are available. Trial
/// results are collected in index order, so aggregates do not depend on the
/// schedule.
pub fn run_experiment(config: &ExperimentConfig) -> Result<DeviationStats, Error> {
    config.check()?;
    let mut reference_options = config.drf_options.clone();
    reference_options.collect_trace = false;

    let trials: Vec<TrialDeviation> = (0..config.trials as u64)
        .into_par_iter()
        .map(|trial| {
            let scenario = generate_scenario(config, trial)?;
            let (reference, _) = drf::allocate(&scenario, &reference_options)?;
            let result = pdrf::allocate(&scenario)?;
            let candidate = if config.finishing_pass {
                pdrf::finishing_pass(&scenario, &result)?
            } else {
                result.allocation
            };
            let deltas = compare(&reference, &candidate)?;
            Ok(bucket_deltas(&deltas))
        })
        .collect::<Result<_, Error>>()?;

    Ok(DeviationStats {
        config: config.clone(),
        trials,
    })
}

pub const CSV_HEADER: &str = "interval_lo,interval_hi,under_1,under_2,under_gt2,under_max,under_avg,under_std,over_1,over_2,over_gt2,over_max,over_avg,over_std";

/// One-row CSV table of the aggregates, keyed by the demand interval.
pub fn csv_table(stats: &DeviationStats) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    if let Some(agg) = stats.aggregates() {
        let (lo, hi) = stats.config.demand_range;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            lo,
            hi,
            agg.under_by_1,
            agg.under_by_2,
            agg.under_gt_2,
            agg.max_under,
            agg.under_avg,
            agg.under_std,
            agg.over_by_1,
            agg.over_by_2,
            agg.over_gt_2,
            agg.max_over,
            agg.over_avg,
            agg.over_std,
        ));
    }
    out
}

#[derive(Serialize)]
struct ExportDocument<'a> {
    schema_version: u32,
    /// Standard deviations use the sample (n-1) definition.
    std_definition: &'static str,
    /// Bucket aggregates are means of per-trial user counts.
    bucket_definition: &'static str,
    config: &'a ExperimentConfig,
    aggregates: Option<Aggregates>,
    trials: &'a [TrialDeviation],
}

/// Serializes the full per-trial record plus aggregates.
pub fn json_document(stats: &DeviationStats) -> String {
    let doc = ExportDocument {
        schema_version: 1,
        std_definition: "sample",
        bucket_definition: "users per trial deviating by the bucket amount",
        config: &stats.config,
        aggregates: stats.aggregates(),
        trials: &stats.trials,
    };
    serde_json::to_string_pretty(&doc).expect("export document serializes")
}

/// Writes `stats.csv` and `stats.json` into `dir`, creating it if needed.
pub fn export_stats(stats: &DeviationStats, dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("stats.csv"), csv_table(stats))?;
    std::fs::write(dir.join("stats.json"), json_document(stats))?;
    Ok(())
}

/// Predicted progressive-filling iteration count for this configuration's
/// expected demands: the tightest capacity over mean column demand. The
/// heap factor `log2(n)` multiplies per-iteration cost, not the count.
pub fn predicted_reference_iterations(scenario: &Scenario) -> Result<Rational, Error> {
    drf::predicted_iterations(scenario)
}
