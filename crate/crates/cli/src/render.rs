//! Text, JSON and CSV renderings. Values are rounded only here; text uses six
//! decimals, JSON and CSV carry full precision.

use std::fmt::Write as _;
use std::path::Path;

use chsh_core::events::{Cell, JointCounts, SettingTally};
use chsh_core::harness::{render_sweep_csv, SimConfig, SimReport, SweepRow};
use chsh_core::stats::{ChiSquare, ChshReport, NoSignalReport, NoSignalRow, TailEstimate};
use clap::ValueEnum;
use serde::Serialize;
use serde_json::json;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

const RULE_SHORT: &str = "----------------------------------------";
const RULE_LONG: &str = "----------------------------------------------";

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn signed(v: f64) -> String {
    format!("{v:+.6}")
}

fn opt6(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |v| format!("{v:.6}"))
}

fn opt_csv(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

fn tally_text(out: &mut String, t: &SettingTally) {
    let _ = writeln!(out, "number of random 0's for A = {}", t.zeros_a);
    let _ = writeln!(out, "number of random 1's for A = {}", t.ones_a);
    let _ = writeln!(out, "number of random 0's for B = {}", t.zeros_b);
    let _ = writeln!(out, "number of random 1's for B = {}", t.ones_b);
    for cell in Cell::ALL {
        let _ = writeln!(out, "number of random {cell} events = {}", t.cell(cell));
    }
}

fn tally_csv(out: &mut String, t: &SettingTally) {
    let _ = writeln!(out, "zeros_a,{}", t.zeros_a);
    let _ = writeln!(out, "ones_a,{}", t.ones_a);
    let _ = writeln!(out, "zeros_b,{}", t.zeros_b);
    let _ = writeln!(out, "ones_b,{}", t.ones_b);
    for cell in Cell::ALL {
        let _ = writeln!(out, "cell_{cell},{}", t.cell(cell));
    }
}

fn tally_json(t: &SettingTally) -> serde_json::Value {
    json!({
        "zeros_a": t.zeros_a,
        "ones_a": t.ones_a,
        "zeros_b": t.zeros_b,
        "ones_b": t.ones_b,
        "cell_counts": t.cell_counts,
    })
}

pub fn analyze(format: Format, t: &SettingTally, jc: &JointCounts, r: &ChshReport) -> String {
    let mut out = String::new();
    match format {
        Format::Text => {
            tally_text(&mut out, t);
            let _ = writeln!(out, "{RULE_SHORT}");
            let _ = writeln!(out, "k/n: {}/{}", r.k, r.n);
            let _ = writeln!(out, "p-value : {:.6}", r.p_k);
            let _ = writeln!(out);
            let width = jc
                .cells
                .iter()
                .flatten()
                .map(|c| c.to_string().len())
                .max()
                .unwrap_or(1);
            let _ = writeln!(out, "xy     ++,+-,-+,--");
            for cell in Cell::ALL {
                let row: Vec<String> = jc
                    .cell(cell)
                    .iter()
                    .map(|c| format!("{c:>width$}"))
                    .collect();
                let _ = writeln!(out, "ab {cell} [{}]", row.join(" "));
            }
            let _ = writeln!(out);
            let _ = writeln!(out, " E (RND00  RND01  RND10  RND11 )");
            let e: Vec<String> = r.e.iter().map(|&v| signed(v)).collect();
            let _ = writeln!(out, "   ({}) measured", e.join(", "));
            let de: Vec<String> = r.de.iter().map(|v| format!(" {v:.6}")).collect();
            let _ = writeln!(out, "+/-({} )", de.join(","));
            let _ = writeln!(out, "CHSH S : {:.6} +- {:.6}", r.s, r.ds);
        }
        Format::Json => {
            out = to_json(&json!({
                "tally": tally_json(t),
                "counts": jc.cells,
                "e": r.e,
                "de": r.de,
                "s": r.s,
                "ds": r.ds,
                "k": r.k,
                "n": r.n,
                "p_k": r.p_k,
            }));
        }
        Format::Csv => {
            out.push_str("field,value\n");
            tally_csv(&mut out, t);
            for cell in Cell::ALL {
                let c = jc.cell(cell);
                let _ = writeln!(out, "n_pp_{cell},{}", c[0]);
                let _ = writeln!(out, "n_pm_{cell},{}", c[1]);
                let _ = writeln!(out, "n_mp_{cell},{}", c[2]);
                let _ = writeln!(out, "n_mm_{cell},{}", c[3]);
            }
            for cell in Cell::ALL {
                let _ = writeln!(out, "e_{cell},{}", r.e[cell.index()]);
                let _ = writeln!(out, "de_{cell},{}", r.de[cell.index()]);
            }
            let _ = writeln!(out, "s,{}", r.s);
            let _ = writeln!(out, "ds,{}", r.ds);
            let _ = writeln!(out, "k,{}", r.k);
            let _ = writeln!(out, "n,{}", r.n);
            let _ = writeln!(out, "p_k,{}", r.p_k);
        }
    }
    out
}

pub struct Uniformity {
    pub tally: SettingTally,
    pub chi: ChiSquare,
    pub min_cell: Cell,
    pub min_count: u64,
    pub mc: TailEstimate,
    pub exact: f64,
    pub seed: u64,
}

pub fn uniformity(format: Format, u: &Uniformity) -> String {
    let mut out = String::new();
    match format {
        Format::Text => {
            tally_text(&mut out, &u.tally);
            let _ = writeln!(out, "{RULE_SHORT}");
            let _ = writeln!(out, "chi-square : {:.6} (dof {})", u.chi.chi2, u.chi.dof);
            let _ = writeln!(out, "chi-square p-value : {:.6}", u.chi.p);
            let _ = writeln!(out, "minimum cell : {} = {}", u.min_cell, u.min_count);
            let _ = writeln!(
                out,
                "Monte Carlo P(count <= {}) : {:.6} +- {:.6} ({} samples, seed {})",
                u.min_count, u.mc.p_hat, u.mc.mc_se, u.mc.samples, u.seed
            );
            let _ = writeln!(out, "exact binomial P(count <= {}) : {:.6}", u.min_count, u.exact);
        }
        Format::Json => {
            out = to_json(&json!({
                "tally": tally_json(&u.tally),
                "chi2": u.chi.chi2,
                "dof": u.chi.dof,
                "chi2_p": u.chi.p,
                "min_cell": u.min_cell.to_string(),
                "min_count": u.min_count,
                "mc_p": u.mc.p_hat,
                "mc_se": u.mc.mc_se,
                "samples": u.mc.samples,
                "seed": u.seed,
                "exact_p": u.exact,
            }));
        }
        Format::Csv => {
            out.push_str("field,value\n");
            tally_csv(&mut out, &u.tally);
            let _ = writeln!(out, "chi2,{}", u.chi.chi2);
            let _ = writeln!(out, "dof,{}", u.chi.dof);
            let _ = writeln!(out, "chi2_p,{}", u.chi.p);
            let _ = writeln!(out, "min_cell,{}", u.min_cell);
            let _ = writeln!(out, "min_count,{}", u.min_count);
            let _ = writeln!(out, "mc_p,{}", u.mc.p_hat);
            let _ = writeln!(out, "mc_se,{}", u.mc.mc_se);
            let _ = writeln!(out, "samples,{}", u.mc.samples);
            let _ = writeln!(out, "seed,{}", u.seed);
            let _ = writeln!(out, "exact_p,{}", u.exact);
        }
    }
    out
}

fn nosignal_row_json(r: &NoSignalRow) -> serde_json::Value {
    json!({
        "party": r.party.to_string(),
        "own_setting": r.own_setting,
        "plus_remote0": r.plus_remote0,
        "total_remote0": r.total_remote0,
        "plus_remote1": r.plus_remote1,
        "total_remote1": r.total_remote1,
        "count_diff": r.count_diff,
        "prop_diff": r.prop_diff,
        "z": r.z,
    })
}

pub fn nosignal(format: Format, report: &NoSignalReport) -> String {
    let mut out = String::new();
    match format {
        Format::Text => {
            let _ = writeln!(
                out,
                "party own  +1/N (remote 0)  +1/N (remote 1)  count_diff  prop_diff  z"
            );
            for r in &report.rows {
                let _ = writeln!(
                    out,
                    "{:<5} {:<3}  {:>15}  {:>15}  {:>10}  {:>9}  {}",
                    r.party,
                    r.own_setting,
                    format!("{}/{}", r.plus_remote0, r.total_remote0),
                    format!("{}/{}", r.plus_remote1, r.total_remote1),
                    r.count_diff,
                    opt6(r.prop_diff),
                    opt6(r.z),
                );
            }
        }
        Format::Json => {
            let rows: Vec<_> = report.rows.iter().map(nosignal_row_json).collect();
            out = to_json(&rows);
        }
        Format::Csv => {
            out.push_str("party,own_setting,plus_remote0,total_remote0,plus_remote1,total_remote1,count_diff,prop_diff,z\n");
            for r in &report.rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{}",
                    r.party,
                    r.own_setting,
                    r.plus_remote0,
                    r.total_remote0,
                    r.plus_remote1,
                    r.total_remote1,
                    r.count_diff,
                    opt_csv(r.prop_diff),
                    opt_csv(r.z),
                );
            }
        }
    }
    out
}

fn sim_settings_json(cfg: &SimConfig) -> serde_json::Value {
    json!({
        "trials": cfg.trials_per_run,
        "runs": cfg.runs,
        "removals": cfg.policy.max_removals,
        "mode": cfg.policy.mode.to_string(),
        "cell": cfg.policy.cell.to_string(),
        "seed": cfg.master_seed,
    })
}

pub fn simulate(format: Format, cfg: &SimConfig, r: &SimReport) -> String {
    let mut out = String::new();
    match format {
        Format::Text => {
            let _ = writeln!(
                out,
                "trials = {}, runs = {}, removals = {}, mode = {}, cell = {}, seed = {}",
                cfg.trials_per_run,
                cfg.runs,
                cfg.policy.max_removals,
                cfg.policy.mode,
                cfg.policy.cell,
                cfg.master_seed
            );
            let _ = writeln!(out, "mean number of 0's for A = {:.6}", r.mean_zeros_a);
            let _ = writeln!(out, "mean number of 1's for A = {:.6}", r.mean_ones_a);
            let _ = writeln!(out, "mean number of 0's for B = {:.6}", r.mean_zeros_b);
            let _ = writeln!(out, "mean number of 1's for B = {:.6}", r.mean_ones_b);
            for cell in Cell::ALL {
                let _ = writeln!(
                    out,
                    "mean number of {cell} events = {:.6}",
                    r.mean_cell_counts[cell.index()]
                );
            }
            let _ = writeln!(out, "{RULE_LONG}");
            let _ = writeln!(out, "mean S = {:.6}", r.mean_s);
            let _ = writeln!(out, "mean k = {:.6}", r.mean_k);
            let _ = writeln!(out, "{RULE_LONG}");
            let _ = writeln!(out, "se of mean S = {:.6}", r.se_s);
            let _ = writeln!(out, "mean per-run S uncertainty = {:.6}", r.mean_ds);
            let _ = writeln!(out, "se of mean k = {:.6}", r.se_k);
            let _ = writeln!(out, "mean k/n = {:.6} +- {:.6}", r.mean_win_rate, r.se_win_rate);
            let _ = writeln!(out, "mean removed = {:.6}", r.mean_removed);
            let _ = writeln!(out, "mean n after removal = {:.6}", r.mean_n_after);
            let _ = writeln!(out, "degenerate runs = {}", r.degenerate_runs);
            if let Some(s) = &r.s_summary {
                let _ = writeln!(
                    out,
                    "S min/q05/q25/median/q75/q95/max = {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6}",
                    s.min, s.q05, s.q25, s.median, s.q75, s.q95, s.max
                );
            }
        }
        Format::Json => {
            out = to_json(&json!({
                "settings": sim_settings_json(cfg),
                "report": r,
            }));
        }
        Format::Csv => {
            out.push_str("field,value\n");
            let _ = writeln!(out, "trials,{}", cfg.trials_per_run);
            let _ = writeln!(out, "runs,{}", cfg.runs);
            let _ = writeln!(out, "removals,{}", cfg.policy.max_removals);
            let _ = writeln!(out, "mode,{}", cfg.policy.mode);
            let _ = writeln!(out, "cell,{}", cfg.policy.cell);
            let _ = writeln!(out, "seed,{}", cfg.master_seed);
            let _ = writeln!(out, "mean_zeros_a,{}", r.mean_zeros_a);
            let _ = writeln!(out, "mean_ones_a,{}", r.mean_ones_a);
            let _ = writeln!(out, "mean_zeros_b,{}", r.mean_zeros_b);
            let _ = writeln!(out, "mean_ones_b,{}", r.mean_ones_b);
            for cell in Cell::ALL {
                let _ = writeln!(out, "mean_cell_{cell},{}", r.mean_cell_counts[cell.index()]);
            }
            let _ = writeln!(out, "mean_s,{}", r.mean_s);
            let _ = writeln!(out, "se_s,{}", r.se_s);
            let _ = writeln!(out, "mean_ds,{}", r.mean_ds);
            let _ = writeln!(out, "mean_k,{}", r.mean_k);
            let _ = writeln!(out, "se_k,{}", r.se_k);
            let _ = writeln!(out, "mean_win_rate,{}", r.mean_win_rate);
            let _ = writeln!(out, "se_win_rate,{}", r.se_win_rate);
            let _ = writeln!(out, "mean_removed,{}", r.mean_removed);
            let _ = writeln!(out, "mean_n_after,{}", r.mean_n_after);
            let _ = writeln!(out, "degenerate_runs,{}", r.degenerate_runs);
        }
    }
    out
}

pub fn sweep(format: Format, rows: &[SweepRow], cfg: &SimConfig) -> String {
    match format {
        Format::Csv => render_sweep_csv(rows),
        Format::Json => to_json(&json!({
            "settings": sim_settings_json(cfg),
            "rows": rows,
        })),
        Format::Text => {
            let mut out = String::new();
            let _ = writeln!(
                out,
                "trials = {}, runs = {}, mode = {}, cell = {}, seed = {}",
                cfg.trials_per_run, cfg.runs, cfg.policy.mode, cfg.policy.cell, cfg.master_seed
            );
            let _ = writeln!(out, "  N      mean S        se S      mean k  mean removed  degenerate");
            for r in rows {
                let _ = writeln!(
                    out,
                    "{:>3}  {:>10.6}  {:>10.6}  {:>10.6}  {:>12.6}  {:>10}",
                    r.removals, r.mean_s, r.se_s, r.mean_k, r.mean_removed, r.degenerate_runs
                );
            }
            out
        }
    }
}

pub fn sweep_written(format: Format, path: &Path, rows: usize, cfg: &SimConfig) -> String {
    match format {
        Format::Json => to_json(&json!({
            "out": path.display().to_string(),
            "rows": rows,
            "seed": cfg.master_seed,
        })),
        Format::Csv => format!("out,rows,seed\n{},{rows},{}\n", path.display(), cfg.master_seed),
        Format::Text => format!(
            "wrote {rows} rows to {} (seed = {})\n",
            path.display(),
            cfg.master_seed
        ),
    }
}

pub fn written(format: Format, path: &Path, trials: usize) -> String {
    match format {
        Format::Json => to_json(&json!({ "out": path.display().to_string(), "trials": trials })),
        Format::Csv => format!("out,trials\n{},{trials}\n", path.display()),
        Format::Text => format!("wrote {trials} trials to {}\n", path.display()),
    }
}
