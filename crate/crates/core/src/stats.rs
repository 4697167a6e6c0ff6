//! Test statistics over joint counts: correlators, CHSH S, the win count k
//! and its binomial tail, setting-uniformity tests and no-signaling reports.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::events::{Cell, JointCounts, OutcomePair, Setting, SettingTally};

/// Local-model bound on the per-trial win probability under uniform settings.
pub const LHV_WIN_BOUND: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("cell {cell} is empty, correlator undefined")]
    EmptyCell { cell: Cell },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlator {
    pub e: f64,
    pub de: f64,
}

/// `E = (n++ + n-- - n+- - n-+) / N` with standard error `sqrt((1 - E^2) / N)`.
pub fn correlator(cell: [u64; 4]) -> Option<Correlator> {
    let n: u64 = cell.iter().sum();
    if n == 0 {
        return None;
    }
    let agree = cell[0] + cell[3];
    let disagree = cell[1] + cell[2];
    let nf = n as f64;
    let e = (agree as f64 - disagree as f64) / nf;
    let de = ((1.0 - e * e).max(0.0) / nf).sqrt();
    Some(Correlator { e, de })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChshReport {
    /// Correlators in cell order 00, 01, 10, 11.
    pub e: [f64; 4],
    pub de: [f64; 4],
    pub s: f64,
    pub ds: f64,
    pub k: u64,
    pub n: u64,
    pub p_k: f64,
}

/// CHSH sign of each cell: only 11 enters negatively.
pub const CHSH_SIGNS: [f64; 4] = [1.0, 1.0, 1.0, -1.0];

pub fn chsh_value(e: &[f64; 4]) -> f64 {
    e[0] + e[1] + e[2] - e[3]
}

pub fn chsh(jc: &JointCounts) -> Result<ChshReport, StatsError> {
    let mut e = [0.0; 4];
    let mut de = [0.0; 4];
    for cell in Cell::ALL {
        let c = correlator(jc.cell(cell)).ok_or(StatsError::EmptyCell { cell })?;
        e[cell.index()] = c.e;
        de[cell.index()] = c.de;
    }
    let s = chsh_value(&e);
    let ds = de.iter().map(|d| d * d).sum::<f64>().sqrt();
    let (k, n) = win_count(jc);
    let p_k = k_pvalue(k, n, LHV_WIN_BOUND)?;
    Ok(ChshReport {
        e,
        de,
        s,
        ds,
        k,
        n,
        p_k,
    })
}

/// Matches in cells 00, 01, 10 plus mismatches in cell 11, over all trials.
pub fn win_count(jc: &JointCounts) -> (u64, u64) {
    let mut k = 0;
    for cell in Cell::ALL {
        let counts = jc.cell(cell);
        let wins_on_match = cell != Cell::from_index(3);
        for pair in OutcomePair::ALL {
            if pair.is_match() == wins_on_match {
                k += counts[pair.index()];
            }
        }
    }
    (k, jc.total())
}

fn check_prob(p: f64) -> Result<(), StatsError> {
    if p.is_finite() && p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(StatsError::InvalidArgument(format!(
            "probability must lie in (0, 1), got {p}"
        )))
    }
}

fn ln_binom_pmf(n: u64, i: u64, ln_p: f64, ln_q: f64, ln_n_fact: f64) -> f64 {
    ln_n_fact - ln_gamma(i as f64 + 1.0) - ln_gamma((n - i) as f64 + 1.0)
        + i as f64 * ln_p
        + (n - i) as f64 * ln_q
}

/// `ln Σ exp(terms)`.
fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// `(P(X < k), P(X >= k))` for `X ~ Binomial(n, p)`. The tail that lies away
/// from the mean is summed directly in log space; the other is its complement.
fn binom_tails(n: u64, k: u64, p: f64) -> (f64, f64) {
    if k == 0 {
        return (0.0, 1.0);
    }
    if k > n {
        return (1.0, 0.0);
    }
    let ln_p = p.ln();
    let ln_q = (-p).ln_1p();
    let ln_n_fact = ln_gamma(n as f64 + 1.0);
    let term = move |i: u64| ln_binom_pmf(n, i, ln_p, ln_q, ln_n_fact);
    let mean = n as f64 * p;
    if k as f64 > mean {
        let upper = log_sum_exp((k..=n).map(term)).exp().min(1.0);
        (1.0 - upper, upper)
    } else {
        let lower = log_sum_exp((0..k).map(term)).exp().min(1.0);
        (lower, 1.0 - lower)
    }
}

/// Exact upper tail `P(X >= k)` for `X ~ Binomial(n, p0)`.
pub fn k_pvalue(k: u64, n: u64, p0: f64) -> Result<f64, StatsError> {
    check_prob(p0)?;
    if k > n {
        return Err(StatsError::InvalidArgument(format!("k = {k} exceeds n = {n}")));
    }
    Ok(binom_tails(n, k, p0).1)
}

/// Exact lower tail `P(X <= observed)` for `X ~ Binomial(total, cell_prob)`.
pub fn exact_binom_cdf(total: u64, observed: u64, cell_prob: f64) -> Result<f64, StatsError> {
    check_prob(cell_prob)?;
    if observed > total {
        return Err(StatsError::InvalidArgument(format!(
            "observed = {observed} exceeds total = {total}"
        )));
    }
    Ok(binom_tails(total, observed + 1, cell_prob).0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub chi2: f64,
    pub dof: u32,
    pub p: f64,
}

/// Pearson chi-square of the four setting cells against the uniform law.
pub fn uniformity_chi2(t: &SettingTally) -> Result<ChiSquare, StatsError> {
    let total = t.total();
    if total == 0 {
        return Err(StatsError::InvalidArgument("zero total".into()));
    }
    let expected = total as f64 / 4.0;
    let chi2 = t
        .cell_counts
        .iter()
        .map(|&o| (o as f64 - expected).powi(2) / expected)
        .sum::<f64>();
    let dist = ChiSquared::new(3.0).expect("3 degrees of freedom");
    Ok(ChiSquare {
        chi2,
        dof: 3,
        p: dist.sf(chi2),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub p_hat: f64,
    pub mc_se: f64,
    pub samples: u64,
}

/// Monte Carlo estimate of `P(X <= observed)` where `X` is one cell count of a
/// uniform multinomial over `total` trials, i.e. `X ~ Binomial(total, cell_prob)`.
pub fn min_cell_tail(
    total: u64,
    observed: u64,
    cell_prob: f64,
    samples: u64,
    seed: u64,
) -> Result<TailEstimate, StatsError> {
    check_prob(cell_prob)?;
    if observed > total {
        return Err(StatsError::InvalidArgument(format!(
            "observed = {observed} exceeds total = {total}"
        )));
    }
    if samples == 0 {
        return Err(StatsError::InvalidArgument("samples must be at least 1".into()));
    }
    let dist = Binomial::new(total, cell_prob)
        .map_err(|e| StatsError::InvalidArgument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hits = (0..samples)
        .filter(|_| dist.sample(&mut rng) <= observed)
        .count() as u64;
    let p_hat = hits as f64 / samples as f64;
    Ok(TailEstimate {
        p_hat,
        mc_se: (p_hat * (1.0 - p_hat) / samples as f64).sqrt(),
        samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Party {
    A,
    B,
}

impl std::fmt::Display for Party {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(match self {
            Party::A => "A",
            Party::B => "B",
        })
    }
}

/// One party's `+1` count at a fixed own setting, split by the remote setting.
///
/// Differences are taken as remote setting 0 minus remote setting 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoSignalRow {
    pub party: Party,
    pub own_setting: u8,
    pub plus_remote0: u64,
    pub total_remote0: u64,
    pub plus_remote1: u64,
    pub total_remote1: u64,
    pub count_diff: i64,
    /// `None` when either compared cell is empty.
    pub prop_diff: Option<f64>,
    /// Pooled two-proportion z; `None` when undefined.
    pub z: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoSignalReport {
    /// Rows ordered (A,0), (A,1), (B,0), (B,1).
    pub rows: [NoSignalRow; 4],
}

impl NoSignalReport {
    pub fn row(&self, party: Party, own_setting: u8) -> &NoSignalRow {
        let base = match party {
            Party::A => 0,
            Party::B => 2,
        };
        &self.rows[base + own_setting as usize]
    }
}

/// Pooled two-proportion z statistic for `x0/n0 - x1/n1`.
pub fn two_proportion_z(x0: u64, n0: u64, x1: u64, n1: u64) -> Option<f64> {
    if n0 == 0 || n1 == 0 {
        return None;
    }
    let (n0f, n1f) = (n0 as f64, n1 as f64);
    let pooled = (x0 + x1) as f64 / (n0f + n1f);
    if pooled <= 0.0 || pooled >= 1.0 {
        return None;
    }
    let se = (pooled * (1.0 - pooled) * (1.0 / n0f + 1.0 / n1f)).sqrt();
    Some((x0 as f64 / n0f - x1 as f64 / n1f) / se)
}

fn no_signal_row(jc: &JointCounts, party: Party, own: Setting) -> NoSignalRow {
    let remote = [Setting::Zero, Setting::One];
    let cells = remote.map(|r| match party {
        Party::A => Cell::new(own, r),
        Party::B => Cell::new(r, own),
    });
    let plus = cells.map(|c| {
        let n = jc.cell(c);
        match party {
            // ++ and +-
            Party::A => n[0] + n[1],
            // ++ and -+
            Party::B => n[0] + n[2],
        }
    });
    let totals = cells.map(|c| jc.cell_total(c));
    let prop_diff = (totals[0] > 0 && totals[1] > 0)
        .then(|| plus[0] as f64 / totals[0] as f64 - plus[1] as f64 / totals[1] as f64);
    NoSignalRow {
        party,
        own_setting: own.index() as u8,
        plus_remote0: plus[0],
        total_remote0: totals[0],
        plus_remote1: plus[1],
        total_remote1: totals[1],
        count_diff: plus[0] as i64 - plus[1] as i64,
        prop_diff,
        z: two_proportion_z(plus[0], totals[0], plus[1], totals[1]),
    }
}

pub fn no_signal_report(jc: &JointCounts) -> NoSignalReport {
    NoSignalReport {
        rows: [
            no_signal_row(jc, Party::A, Setting::Zero),
            no_signal_row(jc, Party::A, Setting::One),
            no_signal_row(jc, Party::B, Setting::Zero),
            no_signal_row(jc, Party::B, Setting::One),
        ],
    }
}
