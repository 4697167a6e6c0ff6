//! Multi-run Monte Carlo experiments over an LHV mixture with postselection.
//!
//! Run `i` draws from `ChaCha8Rng::seed_from_u64(master_seed)` switched to
//! stream `i`, so a run's trials depend only on `(master_seed, i)`. Records are
//! collected in run order before aggregation; the report is bit-identical for
//! any number of workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::events::{Cell, JointCounts, Setting, SettingTally, Trial};
use crate::lhv::{draw_outcomes, draw_trial, Mixture, PostselectionPolicy};
use crate::stats::{chsh, win_count};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("trials_per_run must be at least 1")]
    NoTrials,
    #[error("runs must be at least 1")]
    NoRuns,
    #[error("cannot start worker pool: {0}")]
    Pool(String),
    #[error("removal range {from}..={to} is empty")]
    EmptyRange { from: u64, to: u64 },
}

/// How setting pairs are chosen per trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum SettingSource {
    /// Independent fair bits for both parties.
    #[default]
    Uniform,
    /// Cycle 00, 01, 10, 11 deterministically. Test hook.
    RoundRobin,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub trials_per_run: u64,
    pub runs: u64,
    pub mixture: Mixture,
    pub policy: PostselectionPolicy,
    pub master_seed: u64,
    pub settings: SettingSource,
}

impl SimConfig {
    pub const DEFAULT_TRIALS: u64 = 245;
    pub const DEFAULT_RUNS: u64 = 100_000;

    pub fn new(mixture: Mixture, policy: PostselectionPolicy, master_seed: u64) -> Self {
        SimConfig {
            trials_per_run: Self::DEFAULT_TRIALS,
            runs: Self::DEFAULT_RUNS,
            mixture,
            policy,
            master_seed,
            settings: SettingSource::Uniform,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.trials_per_run == 0 {
            return Err(SimError::NoTrials);
        }
        if self.runs == 0 {
            return Err(SimError::NoRuns);
        }
        Ok(())
    }
}

/// Generator for one run.
pub fn run_rng(master_seed: u64, run_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(run_index);
    rng
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Master seed used by [`sweep`] for the row with `removals` removals.
pub fn sweep_seed(master_seed: u64, removals: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(removals))
}

/// Outcome of a single simulated run, after postselection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub run_index: u64,
    pub tally: SettingTally,
    pub joint: JointCounts,
    pub removed: u64,
    pub n_after: u64,
    pub k: u64,
    /// `None` when postselection left a cell empty.
    pub s: Option<f64>,
    pub ds: Option<f64>,
}

impl RunRecord {
    pub fn is_degenerate(&self) -> bool {
        self.s.is_none()
    }
}

/// Raw trials of run `run_index`, before postselection.
pub fn generate_run(cfg: &SimConfig, run_index: u64) -> Vec<Trial> {
    let mut rng = run_rng(cfg.master_seed, run_index);
    (0..cfg.trials_per_run)
        .map(|i| match cfg.settings {
            SettingSource::Uniform => draw_trial(&cfg.mixture, &mut rng),
            SettingSource::RoundRobin => {
                let (x, y) = round_robin_settings(i);
                draw_outcomes(&cfg.mixture, x, y, &mut rng)
            }
        })
        .collect()
}

pub fn run_once(cfg: &SimConfig, run_index: u64) -> RunRecord {
    let mut trials = generate_run(cfg, run_index);
    let removed = cfg.policy.apply_in_place(&mut trials);
    let joint = JointCounts::from_trials(&trials);
    let (k, n_after) = win_count(&joint);
    let report = chsh(&joint).ok();
    RunRecord {
        run_index,
        tally: joint.tally(),
        joint,
        removed,
        n_after,
        k,
        s: report.as_ref().map(|r| r.s),
        ds: report.as_ref().map(|r| r.ds),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub min: f64,
    pub q05: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q95: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub trials_per_run: u64,
    pub runs: u64,
    pub master_seed: u64,
    pub mean_zeros_a: f64,
    pub mean_ones_a: f64,
    pub mean_zeros_b: f64,
    pub mean_ones_b: f64,
    pub mean_cell_counts: [f64; 4],
    pub mean_removed: f64,
    pub mean_n_after: f64,
    /// Over non-degenerate runs.
    pub mean_s: f64,
    /// Sample standard deviation of S over runs, divided by sqrt(runs used).
    pub se_s: f64,
    /// Mean of the per-run standard error of S.
    pub mean_ds: f64,
    pub mean_k: f64,
    pub se_k: f64,
    /// Mean of per-run `k / n_after`, over runs with `n_after > 0`.
    pub mean_win_rate: f64,
    pub se_win_rate: f64,
    pub degenerate_runs: u64,
    pub s_summary: Option<Summary>,
}

/// Neumaier-compensated sum.
fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Mean and standard error of the mean; `(NaN, NaN)` for no values.
fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = compensated_sum(values.iter().copied()) / n as f64;
    if n == 1 {
        return (mean, f64::NAN);
    }
    let ss = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean)));
    (mean, (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt())
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn summarize(mut values: Vec<f64>) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    Some(Summary {
        min: values[0],
        q05: quantile(&values, 0.05),
        q25: quantile(&values, 0.25),
        median: quantile(&values, 0.5),
        q75: quantile(&values, 0.75),
        q95: quantile(&values, 0.95),
        max: values[values.len() - 1],
    })
}

/// Aggregates run records. Integer counts are summed exactly.
pub fn aggregate(cfg: &SimConfig, records: &[RunRecord]) -> SimReport {
    let runs = records.len() as f64;
    let int_mean = |f: &dyn Fn(&RunRecord) -> u64| -> f64 {
        records.iter().map(|r| u128::from(f(r))).sum::<u128>() as f64 / runs
    };
    let mut mean_cell_counts = [0.0; 4];
    for (i, dst) in mean_cell_counts.iter_mut().enumerate() {
        *dst = int_mean(&|r| r.tally.cell_counts[i]);
    }

    let s_values: Vec<f64> = records.iter().filter_map(|r| r.s).collect();
    let ds_values: Vec<f64> = records.iter().filter_map(|r| r.ds).collect();
    let (mean_s, se_s) = mean_and_se(&s_values);
    let (mean_ds, _) = mean_and_se(&ds_values);
    let k_values: Vec<f64> = records.iter().map(|r| r.k as f64).collect();
    let (_, se_k) = mean_and_se(&k_values);
    let rates: Vec<f64> = records
        .iter()
        .filter(|r| r.n_after > 0)
        .map(|r| r.k as f64 / r.n_after as f64)
        .collect();
    let (mean_win_rate, se_win_rate) = mean_and_se(&rates);

    SimReport {
        trials_per_run: cfg.trials_per_run,
        runs: records.len() as u64,
        master_seed: cfg.master_seed,
        mean_zeros_a: int_mean(&|r| r.tally.zeros_a),
        mean_ones_a: int_mean(&|r| r.tally.ones_a),
        mean_zeros_b: int_mean(&|r| r.tally.zeros_b),
        mean_ones_b: int_mean(&|r| r.tally.ones_b),
        mean_cell_counts,
        mean_removed: int_mean(&|r| r.removed),
        mean_n_after: int_mean(&|r| r.n_after),
        mean_s,
        se_s,
        mean_ds,
        mean_k: int_mean(&|r| r.k),
        se_k,
        mean_win_rate,
        se_win_rate,
        degenerate_runs: records.iter().filter(|r| r.is_degenerate()).count() as u64,
        s_summary: summarize(s_values),
    }
}

/// All run records, in run order, on the current rayon pool.
pub fn run_all(cfg: &SimConfig) -> Result<Vec<RunRecord>, SimError> {
    cfg.validate()?;
    Ok((0..cfg.runs)
        .into_par_iter()
        .map(|i| run_once(cfg, i))
        .collect())
}

fn with_workers<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T, SimError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| SimError::Pool(e.to_string()))?;
    Ok(pool.install(job))
}

pub fn monte_carlo(cfg: &SimConfig) -> Result<SimReport, SimError> {
    let records = run_all(cfg)?;
    Ok(aggregate(cfg, &records))
}

/// [`monte_carlo`] on a dedicated pool of `workers` threads.
pub fn monte_carlo_with_workers(cfg: &SimConfig, workers: usize) -> Result<SimReport, SimError> {
    with_workers(workers, || monte_carlo(cfg))?
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub removals: u64,
    pub mean_s: f64,
    pub se_s: f64,
    pub mean_k: f64,
    pub mean_removed: f64,
    pub degenerate_runs: u64,
}

/// One [`monte_carlo`] per removal cap in `from..=to`, each seeded with
/// [`sweep_seed`]. The policy's cell and mode are taken from `cfg`.
pub fn sweep(cfg: &SimConfig, from: u64, to: u64) -> Result<Vec<SweepRow>, SimError> {
    if from > to {
        return Err(SimError::EmptyRange { from, to });
    }
    (from..=to)
        .map(|n| {
            let mut row_cfg = cfg.clone();
            row_cfg.policy.max_removals = n;
            row_cfg.master_seed = sweep_seed(cfg.master_seed, n);
            let r = monte_carlo(&row_cfg)?;
            Ok(SweepRow {
                removals: n,
                mean_s: r.mean_s,
                se_s: r.se_s,
                mean_k: r.mean_k,
                mean_removed: r.mean_removed,
                degenerate_runs: r.degenerate_runs,
            })
        })
        .collect()
}

pub fn sweep_with_workers(
    cfg: &SimConfig,
    from: u64,
    to: u64,
    workers: usize,
) -> Result<Vec<SweepRow>, SimError> {
    with_workers(workers, || sweep(cfg, from, to))?
}

pub const SWEEP_HEADER: &str = "N,mean_S,se_S,mean_k,mean_removed,degenerate_runs";

pub fn render_sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.removals, r.mean_s, r.se_s, r.mean_k, r.mean_removed, r.degenerate_runs
        ));
    }
    out
}

/// Setting pair of trial `i` under round-robin scheduling.
pub fn round_robin_settings(i: u64) -> (Setting, Setting) {
    let c = Cell::from_index((i % 4) as usize);
    (c.a, c.b)
}
