//! Acceptance suite: one PASS/FAIL line per criterion, sub-checks indented below.
//! Every tolerance is a literal in this file.

mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode, Output};
use std::time::{Duration, Instant};

use chsh_core::events::{Cell, JointCounts, Outcome, Setting, HENSEN_245_COUNTS};
use chsh_core::harness::{run_all, SimConfig};
use chsh_core::ingest::{parse_canonical, parse_matrix, render_canonical, ColumnMap, IngestError, OutcomeEncoding};
use chsh_core::lhv::{
    canonical_saturating_mixture, draw_outcomes, Mixture, Orientation, PostselectionPolicy,
    RemovalMode, Strategy,
};
use chsh_core::stats::{self, no_signal_report, win_count, Party};
use rand::rngs::StdRng;
use rand::SeedableRng;
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_chsh");
const SIM_SEED: u64 = 20_151_021;

struct Check {
    name: String,
    pass: bool,
    detail: String,
}

fn check(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Check {
    Check {
        name: name.into(),
        pass,
        detail: detail.into(),
    }
}

fn within(name: &str, got: f64, want: f64, tol: f64) -> Check {
    check(
        name,
        (got - want).abs() <= tol,
        format!("{got:.6} vs {want} +- {tol}"),
    )
}

fn chsh(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("chsh binary runs")
}

fn chsh_json(args: &[&str]) -> Result<Value, String> {
    let o = chsh(args);
    if !o.status.success() {
        return Err(format!(
            "exit {:?}: {}",
            o.status.code(),
            String::from_utf8_lossy(&o.stderr)
        ));
    }
    serde_json::from_slice(&o.stdout).map_err(|e| e.to_string())
}

fn fixture_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/hensen_245.csv")
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or(f64::NAN)
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

// 1. bundled dataset through the CLI
fn fixture_statistics() -> Vec<Check> {
    let v = match chsh_json(&["--format", "json", "analyze", fixture_path().to_str().unwrap()]) {
        Ok(v) => v,
        Err(e) => return vec![check("analyze runs", false, e)],
    };
    let mut out = Vec::new();
    let e_want = [0.736, 0.595, 0.484, -0.608];
    let de_want = [0.093, 0.090, 0.111, 0.111];
    for i in 0..4 {
        let cell = Cell::from_index(i);
        out.push(within(&format!("E{cell}"), f(&v["e"][i]), e_want[i], 0.001));
        out.push(within(&format!("dE{cell}"), f(&v["de"][i]), de_want[i], 0.001));
    }
    out.push(within("S", f(&v["s"]), 2.422, 0.001));
    out.push(within("dS", f(&v["ds"]), 0.204, 0.001));
    out.push(check("k = 196", v["k"] == 196, v["k"].to_string()));
    out.push(check("n = 245", v["n"] == 245, v["n"].to_string()));
    out
}

// 2. exact binomial tail of the win count
fn win_count_pvalue() -> Vec<Check> {
    let oracle = common::exact_binom_range(245, 3, 4, 196, 245);
    let p = stats::k_pvalue(196, 245, 0.75).unwrap();
    let rel = (p - oracle).abs() / oracle;
    vec![
        check(
            "agrees with exact rational tail",
            rel <= 1e-9,
            format!("{p:.12} vs {oracle:.12} (rel {rel:.2e}, tol 1e-9)"),
        ),
        within("near printed value", p, 0.039, 0.01),
    ]
}

// 3. Monte Carlo tail of the smallest setting cell
fn min_cell_tail() -> Vec<Check> {
    let start = Instant::now();
    let est = stats::min_cell_tail(4746, 1143, 0.25, 1_000_000, SIM_SEED).unwrap();
    let took = start.elapsed();
    let exact = stats::exact_binom_cdf(4746, 1143, 0.25).unwrap();
    let oracle = common::exact_binom_range(4746, 1, 4, 0, 1143);
    vec![
        check(
            "exact cdf matches rational oracle",
            (exact - oracle).abs() <= 1e-9 * oracle,
            format!("{exact:.12} vs {oracle:.12}"),
        ),
        check(
            "estimate within 3 se of exact",
            (est.p_hat - exact).abs() <= 3.0 * est.mc_se,
            format!("{:.6} vs {exact:.6}, se {:.6}", est.p_hat, est.mc_se),
        ),
        within("estimate near 0.07", est.p_hat, 0.07, 0.01),
        check(
            "10^6 samples under 5 s",
            took < Duration::from_secs(5),
            format!("{took:.2?}"),
        ),
    ]
}

/// Straight-line reference simulation with its own generator: uniform settings,
/// uniform pick among the four canonical strategies, joint flip, then removal of
/// the first `removals` cell-00 mismatches. Returns (mean S, se, non-degenerate runs).
fn oracle_mean_s(runs: u64, trials: u64, removals: u64, seed: u64) -> (f64, f64, u64) {
    const STRATS: [[i8; 4]; 4] = [[1, 1, 1, 1], [1, 1, 1, -1], [1, -1, 1, 1], [1, -1, -1, 1]];
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut good = 0u64;
    for run in 0..runs {
        let mut state = seed ^ run.wrapping_mul(0xA076_1D64_78BD_642F);
        let mut next = || {
            state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            z ^ (z >> 31)
        };
        // per cell: [matches, mismatches]
        let mut tab = [[0u64; 2]; 4];
        let mut removed = 0;
        for _ in 0..trials {
            let r = next();
            let x = (r & 1) as usize;
            let y = ((r >> 1) & 1) as usize;
            let s = STRATS[((r >> 2) & 3) as usize];
            // a joint flip does not change the product
            let _flip = (r >> 4) & 1;
            let product = s[x] * s[2 + y];
            let cell = 2 * x + y;
            let mismatch = product < 0;
            if cell == 0 && mismatch && removed < removals {
                removed += 1;
                continue;
            }
            tab[cell][mismatch as usize] += 1;
        }
        if tab.iter().any(|c| c[0] + c[1] == 0) {
            continue;
        }
        let e = |c: [u64; 2]| (c[0] as f64 - c[1] as f64) / (c[0] + c[1]) as f64;
        let s = e(tab[0]) + e(tab[1]) + e(tab[2]) - e(tab[3]);
        sum += s;
        sum_sq += s * s;
        good += 1;
    }
    let n = good as f64;
    let mean = sum / n;
    let var = (sum_sq - n * mean * mean) / (n - 1.0);
    (mean, (var / n).sqrt(), good)
}

// 4. postselected LHV simulation at the headline setting
fn headline_simulation() -> Vec<Check> {
    let start = Instant::now();
    let seed = SIM_SEED.to_string();
    let v = match chsh_json(&[
        "--format", "json", "simulate", "--trials", "245", "--runs", "100000", "--removals",
        "14", "--mode", "mismatch", "--cell", "00", "--seed", &seed,
    ]) {
        Ok(v) => v,
        Err(e) => return vec![check("simulate runs", false, e)],
    };
    let took = start.elapsed();
    let r = &v["report"];
    let mut out = Vec::new();
    let cells_want = [47.25, 61.25, 61.25, 61.25];
    for (i, want) in cells_want.iter().enumerate() {
        out.push(within(
            &format!("mean {} count", Cell::from_index(i)),
            f(&r["mean_cell_counts"][i]),
            *want,
            0.15,
        ));
    }
    out.push(within("mean zeros for A", f(&r["mean_zeros_a"]), 108.5, 0.15));
    out.push(within("mean ones for A", f(&r["mean_ones_a"]), 122.5, 0.15));

    let (o_mean, o_se, _) = oracle_mean_s(100_000, 245, 14, 0x5EED_0F_0AC1E);
    let s = f(&r["mean_s"]);
    let se = f(&r["se_s"]);
    let combined = (se * se + o_se * o_se).sqrt();
    out.push(check(
        "mean S matches reference simulation",
        (s - o_mean).abs() <= 3.0 * combined,
        format!("{s:.6} vs {o_mean:.6}, 3 sigma = {:.6}", 3.0 * combined),
    ));
    out.push(check(
        "reference S in [2.39, 2.46]",
        (2.39..=2.46).contains(&o_mean),
        format!("{o_mean:.6}"),
    ));
    let k = f(&r["mean_k"]);
    let se_k = f(&r["se_k"]);
    out.push(check(
        "mean k = 183.75 within 3 se",
        (k - 183.75).abs() <= 3.0 * se_k,
        format!("{k:.4}, se {se_k:.4}"),
    ));
    out.push(check(
        "runtime under 60 s",
        took < Duration::from_secs(60),
        format!("{took:.2?}"),
    ));
    out
}

// 5. S as a function of the removal cap
fn removal_sweep() -> Vec<Check> {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    let seed = SIM_SEED.to_string();
    let o = chsh(&[
        "sweep", "--max", "15", "--runs", "100000", "--seed", &seed, "--out",
        path.to_str().unwrap(),
    ]);
    if !o.status.success() {
        return vec![check("sweep runs", false, String::from_utf8_lossy(&o.stderr))];
    }
    let text = std::fs::read_to_string(&path).unwrap();
    let rows: Vec<(u64, f64, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let c: Vec<&str> = l.split(',').collect();
            (c[0].parse().unwrap(), c[1].parse().unwrap(), c[2].parse().unwrap())
        })
        .collect();
    let mut out = vec![check("16 rows", rows.len() == 16, rows.len().to_string())];
    let mut worst = f64::INFINITY;
    for w in rows.windows(2) {
        let slack = 2.0 * (w[0].2.powi(2) + w[1].2.powi(2)).sqrt();
        worst = worst.min(w[1].1 - w[0].1 + slack);
    }
    out.push(check(
        "non-decreasing within 2 combined se",
        worst >= 0.0,
        format!("min margin {worst:.6}"),
    ));
    if let Some(&(_, s0, se0)) = rows.first() {
        out.push(check(
            "S(0) = 2 within 3 se",
            (s0 - 2.0).abs() <= 3.0 * se0,
            format!("{s0:.6}, se {se0:.6}"),
        ));
    }
    if let Some(&(_, s14, _)) = rows.iter().find(|r| r.0 == 14) {
        out.push(check("S(14) in [2.39, 2.46]", (2.39..=2.46).contains(&s14), format!("{s14:.6}")));
    }
    out
}

fn locality() -> Check {
    let settings = [Setting::Zero, Setting::One];
    let mut violations = 0;
    let mut cases = 0;
    for (i, s) in Strategy::all().enumerate() {
        for symmetrize in [false, true] {
            let m = Mixture::single(s, symmetrize);
            let rng = StdRng::seed_from_u64(i as u64);
            for fixed in settings {
                let a: Vec<Outcome> = settings
                    .iter()
                    .map(|&y| draw_outcomes(&m, fixed, y, &mut rng.clone()).outcome_a)
                    .collect();
                let b: Vec<Outcome> = settings
                    .iter()
                    .map(|&x| draw_outcomes(&m, x, fixed, &mut rng.clone()).outcome_b)
                    .collect();
                violations += (a[0] != a[1]) as u32 + (b[0] != b[1]) as u32;
                cases += 2;
            }
        }
    }
    check(
        "(a) outcomes ignore the remote setting, 16 strategies",
        violations == 0,
        format!("{violations} violations in {cases} cases"),
    )
}

fn equal_cell_identity() -> Check {
    // every way of splitting m = 6 trials per cell, sampled on a lattice
    let mut bad = 0;
    let mut tried = 0;
    let splits: Vec<[u64; 4]> = (0..=6u64)
        .flat_map(|a| (0..=6 - a).flat_map(move |b| (0..=6 - a - b).map(move |c| [a, b, c, 6 - a - b - c])))
        .collect();
    for (i, c0) in splits.iter().enumerate() {
        for j in [0, 7, 31, 55, 83] {
            let cells = [*c0, splits[(i + j) % splits.len()], splits[(i * 3 + j) % splits.len()], splits[(i * 5 + 1) % splits.len()]];
            let jc = JointCounts::new(cells);
            let (k, n) = win_count(&jc);
            let s = stats::chsh(&jc).unwrap().s;
            tried += 1;
            if (k as f64 / n as f64 - (4.0 + s) / 8.0).abs() > 1e-12 {
                bad += 1;
            }
        }
    }
    check(
        "(b) k/n = (4 + S)/8 for equal cells",
        bad == 0,
        format!("{bad} mismatches in {tried} tables"),
    )
}

fn sim(runs: u64, removals: u64, mode: RemovalMode, seed: u64) -> SimConfig {
    let mut c = SimConfig::new(
        canonical_saturating_mixture(),
        PostselectionPolicy::new(Cell::from_index(0), removals, mode),
        seed,
    );
    c.runs = runs;
    c
}

fn no_signal_centered() -> Check {
    let records = run_all(&sim(400, 0, RemovalMode::MismatchAny, SIM_SEED)).unwrap();
    let mut worst = 0.0f64;
    for (party, own) in [(Party::A, 0u8), (Party::A, 1), (Party::B, 0), (Party::B, 1)] {
        let z: Vec<f64> = records
            .iter()
            .filter_map(|r| no_signal_report(&r.joint).row(party, own).z)
            .collect();
        let (m, se) = mean_se(&z);
        worst = worst.max((m / se).abs());
    }
    check(
        "(c) mean z centered without removal (400 runs)",
        worst < 3.0,
        format!("max |mean z| / se = {worst:.3} (tol 3)"),
    )
}

fn oriented_signal() -> Check {
    let records = run_all(&sim(
        400,
        14,
        RemovalMode::MismatchOriented(Orientation::PlusMinus),
        SIM_SEED,
    ))
    .unwrap();
    let d: Vec<f64> = records
        .iter()
        .map(|r| no_signal_report(&r.joint).row(Party::A, 0).count_diff as f64)
        .collect();
    let (m, se) = mean_se(&d);
    check(
        "(d) oriented +- removal shifts A's counts (400 runs)",
        m.abs() > 4.0 * se,
        format!("mean count_diff {m:.3}, se {se:.3} (tol 4 se)"),
    )
}

fn ingest_strict() -> Check {
    let d = chsh_core::fixture_hensen_245();
    let mut problems = Vec::new();
    if parse_canonical(&render_canonical(&d)).ok().as_ref() != Some(&d) {
        problems.push("canonical round trip".to_string());
    }
    let matrix: String = d
        .trials()
        .iter()
        .map(|t| {
            let o = |o: Outcome| if o == Outcome::Plus { 1 } else { 0 };
            format!("5 {} {} {} {}\n", o(t.outcome_b), t.setting_a.index(), o(t.outcome_a), t.setting_b.index())
        })
        .collect();
    let map = ColumnMap::new(2, 4, 3, 1, OutcomeEncoding::ZeroOne).unwrap();
    if parse_matrix(&matrix, &map).ok().as_ref() != Some(&d) {
        problems.push("matrix round trip".to_string());
    }
    let h = "setting_a,setting_b,outcome_a,outcome_b\n";
    let cases: [(&str, String, fn(&IngestError) -> bool); 6] = [
        ("header", "a,b,c,d\n0,0,1,1\n".into(), |e| matches!(e, IngestError::Header { .. })),
        ("setting", format!("{h}0,0,1,1\n0,2,1,-1\n"), |e| matches!(e, IngestError::SettingNotBinary { line: 3, .. })),
        ("outcome", format!("{h}0,0,0,1\n"), |e| matches!(e, IngestError::OutcomeOutOfRange { line: 2, .. })),
        ("short", format!("{h}0,0,1\n"), |e| matches!(e, IngestError::ShortRow { line: 2, .. })),
        ("extra", format!("{h}0,0,1,1,1\n"), |e| matches!(e, IngestError::ExtraFields { line: 2, .. })),
        ("numeric", format!("{h}0,x,1,1\n"), |e| {
            matches!(e, IngestError::NonNumeric { line: 2, .. } | IngestError::SettingNotBinary { line: 2, .. })
        }),
    ];
    for (name, text, ok) in cases {
        match parse_canonical(&text) {
            Err(e) if ok(&e) => {}
            other => problems.push(format!("{name}: {other:?}")),
        }
    }
    if ColumnMap::new(0, 0, 1, 2, OutcomeEncoding::PlusMinusOne).is_ok() {
        problems.push("duplicate column accepted".into());
    }
    check(
        "(e) ingest round trips and strict rejections",
        problems.is_empty(),
        if problems.is_empty() { "8 cases".to_string() } else { problems.join("; ") },
    )
}

fn worker_independence() -> Check {
    let seed = SIM_SEED.to_string();
    let base = ["--format", "json", "simulate", "--runs", "20000", "--removals", "14", "--seed", &seed];
    let one = chsh(&[&base[..], &["--workers", "1"]].concat());
    let eight = chsh(&[&base[..], &["--workers", "8"]].concat());
    check(
        "(f) --workers 1 and 8 give identical stdout",
        one.status.success() && one.stdout == eight.stdout,
        format!("{} bytes", one.stdout.len()),
    )
}

// 6. structural properties
fn properties() -> Vec<Check> {
    vec![
        locality(),
        equal_cell_identity(),
        no_signal_centered(),
        oriented_signal(),
        ingest_strict(),
        worker_independence(),
    ]
}

fn main() -> ExitCode {
    // the bundled file must still hold the reference table
    assert_eq!(
        chsh_core::read_canonical(fixture_path()).unwrap().joint_counts(),
        JointCounts::new(HENSEN_245_COUNTS)
    );
    let criteria: [(&str, fn() -> Vec<Check>); 6] = [
        ("bundled 245-trial dataset statistics", fixture_statistics),
        ("win-count p-value", win_count_pvalue),
        ("minimum setting-cell tail", min_cell_tail),
        ("postselected LHV simulation, N = 14", headline_simulation),
        ("removal sweep N = 0..15", removal_sweep),
        ("structural properties", properties),
    ];
    let mut failed = 0;
    for (i, (title, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let checks = run();
        let pass = checks.iter().all(|c| c.pass);
        failed += !pass as u32;
        println!(
            "{} criterion {}: {title} ({:.1?})",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed()
        );
        for c in &checks {
            println!("    [{}] {}: {}", if c.pass { "ok" } else { "FAIL" }, c.name, c.detail);
        }
    }
    println!("{} of {} criteria passed", criteria.len() as u32 - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
