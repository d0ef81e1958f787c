//! Output files: CSV tables, the JSON estimation report, the Table-1 style
//! text layout and plot-ready series.
//!
//! CSV numbers use nine significant digits and `.` as decimal separator.
//! Nothing time- or host-dependent is written, so equal inputs give
//! byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mc::{McRow, McSummary};
use crate::numerics::{normal_quantile, LinkKind};

/// Format version of every file written here.
pub const SCHEMA_VERSION: u32 = 1;

pub const MC_HEADER: [&str; 8] = ["estimator", "link", "tau", "n", "gamma", "statistic", "value", "mc_se"];
pub const EFFECTS_HEADER: [&str; 12] = [
    "tau", "link", "effect", "estimate", "se", "ci_lower", "ci_upper", "elasticity", "mu", "q_hat", "f_hat",
    "bandwidth",
];
pub const SCALE_TEST_HEADER: [&str; 7] = ["tau", "link", "mu", "gamma_hat", "v_hat", "t_stat", "p_value"];
pub const ORACLE_HEADER: [&str; 8] =
    ["tau", "channel", "closed_form", "brute_force", "mc_se", "difference", "tolerance", "pass"];

/// `printf("%.9g")`.
pub fn fmt_g9(v: f64) -> String {
    fmt_g(v, 9)
}

pub fn fmt_g(v: f64, digits: usize) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let p = digits.max(1);
    let sci = format!("{:.*e}", p - 1, v);
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if exp < -4 || exp >= p as i32 {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (p as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, v)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn write_rows<const N: usize>(path: &Path, header: [&str; N], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_g9).unwrap_or_default()
}

/// Long-format Monte Carlo table.
pub fn write_mc_table(path: &Path, rows: &[McRow]) -> Result<()> {
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.estimator.clone(),
                r.link.to_string(),
                fmt_g9(r.tau),
                r.n.to_string(),
                fmt_g9(r.gamma),
                r.statistic.clone(),
                fmt_g9(r.value),
                fmt_g9(r.mc_se),
            ]
        })
        .collect();
    write_rows(path, MC_HEADER, &rows)
}

/// Failed-replication counts, one row per cell.
pub fn write_failures(path: &Path, summary: &McSummary) -> Result<()> {
    let rows: Vec<Vec<String>> = summary
        .failures
        .iter()
        .map(|f| {
            vec![
                f.link.to_string(),
                fmt_g9(f.tau),
                fmt_g9(f.gamma),
                f.failed.to_string(),
                f.reps.to_string(),
                f.invalid.to_string(),
            ]
        })
        .collect();
    write_rows(path, ["link", "tau", "gamma", "failed", "reps", "invalid"], &rows)
}

/// The bias/variance/MSE table laid out like the paper: one block per
/// statistic, one line per estimator and link, one column per level.
pub fn render_table1(summary: &McSummary) -> String {
    let mut taus: Vec<f64> = summary.rows.iter().map(|r| r.tau).collect();
    taus.sort_by(f64::total_cmp);
    taus.dedup();
    let mut ns: Vec<usize> = summary.rows.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();

    let mut out = String::new();
    let label_width = 20;
    let mut header = format!("{:<10}{:<label_width$}", "", "");
    for t in &taus {
        header.push_str(&format!("{:>12}", format!("tau={}", fmt_g(*t, 4))));
    }
    for n in ns {
        out.push_str(&format!("n = {n}\n{header}\n"));
        for (stat, title) in [("bias", "Bias"), ("variance", "Variance"), ("mse", "MSE")] {
            let mut first = true;
            for est in ["location", "scale"] {
                for link in LinkKind::ALL {
                    let cells: Vec<Option<&McRow>> = taus
                        .iter()
                        .map(|&t| {
                            summary
                                .rows
                                .iter()
                                .find(|r| r.n == n && r.estimator == est && r.link == link && r.tau == t && r.statistic == stat)
                        })
                        .collect();
                    if cells.iter().all(|c| c.is_none()) {
                        continue;
                    }
                    let sym = if est == "location" { "Pi_L" } else { "Pi_S" };
                    let label = format!("{sym} ({link})");
                    out.push_str(&format!("{:<10}{:<label_width$}", if first { title } else { "" }, label));
                    first = false;
                    for c in cells {
                        match c {
                            Some(r) => out.push_str(&format!("{:>12.3}", r.value)),
                            None => out.push_str(&format!("{:>12}", "-")),
                        }
                    }
                    out.push('\n');
                }
            }
        }
        out.push('\n');
    }
    out
}

pub fn write_table1(path: &Path, summary: &McSummary) -> Result<()> {
    fs::write(path, render_table1(summary)).map_err(|e| Error::io(path, e))
}

/// The coverage table laid out like the paper: per sample size, one block
/// per estimator, one line per slope (and link), one column per level.
pub fn render_table2(summary: &McSummary) -> String {
    let cov: Vec<&McRow> = summary.rows.iter().filter(|r| r.statistic == "coverage").collect();
    let sorted = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let taus = sorted(cov.iter().map(|r| r.tau).collect());
    let gammas = sorted(cov.iter().map(|r| r.gamma).collect());
    let mut ns: Vec<usize> = cov.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    let mut links: Vec<LinkKind> = LinkKind::ALL.into_iter().filter(|l| cov.iter().any(|r| r.link == *l)).collect();
    links.dedup();
    let show_link = links.len() > 1;

    let mut out = String::new();
    let mut header = format!("{:<10}{:<20}", "", "gamma");
    for t in &taus {
        header.push_str(&format!("{:>12}", format!("tau={}", fmt_g(*t, 4))));
    }
    for n in ns {
        out.push_str(&format!("n = {n}\n{header}\n"));
        for (est, title) in [("location", "Location"), ("scale", "Scale")] {
            let mut first = true;
            for &link in &links {
                for &g in &gammas {
                    let cells: Vec<Option<&&McRow>> = taus
                        .iter()
                        .map(|&t| {
                            cov.iter()
                                .find(|r| r.n == n && r.estimator == est && r.link == link && r.gamma == g && r.tau == t)
                        })
                        .collect();
                    if cells.iter().all(|c| c.is_none()) {
                        continue;
                    }
                    let label = if show_link { format!("{} ({link})", fmt_g(g, 4)) } else { fmt_g(g, 4) };
                    out.push_str(&format!("{:<10}{:<20}", if first { title } else { "" }, label));
                    first = false;
                    for c in cells {
                        match c {
                            Some(r) => out.push_str(&format!("{:>12.3}", r.value)),
                            None => out.push_str(&format!("{:>12}", "-")),
                        }
                    }
                    out.push('\n');
                }
            }
        }
        out.push('\n');
    }
    out
}

pub fn write_table2(path: &Path, summary: &McSummary) -> Result<()> {
    fs::write(path, render_table2(summary)).map_err(|e| Error::io(path, e))
}

fn tau_tag(tau: f64) -> String {
    fmt_g9(tau).replace('-', "m")
}

/// `power.csv` in the long format plus `power_tau_<tau>.csv` curves.
pub fn write_power(dir: &Path, summary: &McSummary) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let mut written = vec![dir.join("power.csv")];
    write_mc_table(&written[0], &summary.rows)?;
    for c in &summary.power {
        let path = dir.join(format!("power_tau_{}.csv", tau_tag(c.tau)));
        let rows: Vec<Vec<String>> = (0..c.gamma.len())
            .map(|k| vec![fmt_g9(c.gamma[k]), fmt_g9(c.raw[k]), fmt_g9(c.adjusted[k]), fmt_g9(c.mc_se[k])])
            .collect();
        write_rows(&path, ["gamma", "reject_raw", "reject_adjusted", "mc_se"], &rows)?;
        written.push(path);
    }
    Ok(written)
}

/// `normality.csv` plus one QQ series per cell (theoretical vs sample
/// quantiles at plotting positions `(i - 0.5) / m`).
pub fn write_normality(dir: &Path, summary: &McSummary) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let mut written = vec![dir.join("normality.csv")];
    write_mc_table(&written[0], &summary.rows)?;
    for s in &summary.studentized {
        let path = dir.join(format!(
            "qq_{}_{}_tau_{}_gamma_{}.csv",
            s.estimator,
            s.link,
            tau_tag(s.tau),
            tau_tag(s.gamma)
        ));
        let mut v = s.values.clone();
        v.sort_by(f64::total_cmp);
        let m = v.len() as f64;
        let rows: Vec<Vec<String>> = v
            .iter()
            .enumerate()
            .map(|(i, &x)| vec![fmt_g9(normal_quantile((i as f64 + 0.5) / m)), fmt_g9(x)])
            .collect();
        write_rows(&path, ["theoretical", "sample"], &rows)?;
        written.push(path);
    }
    Ok(written)
}

/// One row of `effects.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectRow {
    pub tau: f64,
    pub link: LinkKind,
    pub effect: String,
    pub estimate: f64,
    pub se: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub elasticity: Option<f64>,
    /// Scale pivot; absent for simultaneous shifts.
    pub mu: Option<f64>,
    pub q_hat: f64,
    pub f_hat: f64,
    pub bandwidth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleTestRow {
    pub tau: f64,
    pub link: LinkKind,
    pub mu: f64,
    pub gamma_hat: f64,
    pub v_hat: f64,
    pub t_stat: f64,
    pub p_value: f64,
}

/// Everything `estimate` produces, mirrored in `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectReport {
    pub schema_version: u32,
    pub outcome: String,
    pub targets: Vec<String>,
    pub controls: Vec<String>,
    pub n: usize,
    pub rows_dropped: usize,
    pub log_outcome: bool,
    pub level: f64,
    pub effects: Vec<EffectRow>,
    pub scale_tests: Vec<ScaleTestRow>,
}

pub fn write_effects_csv(path: &Path, rows: &[EffectRow]) -> Result<()> {
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                fmt_g9(r.tau),
                r.link.to_string(),
                r.effect.clone(),
                fmt_g9(r.estimate),
                fmt_g9(r.se),
                fmt_g9(r.ci_lower),
                fmt_g9(r.ci_upper),
                opt(r.elasticity),
                opt(r.mu),
                fmt_g9(r.q_hat),
                fmt_g9(r.f_hat),
                fmt_g9(r.bandwidth),
            ]
        })
        .collect();
    write_rows(path, EFFECTS_HEADER, &rows)
}

pub fn write_scale_test_csv(path: &Path, rows: &[ScaleTestRow]) -> Result<()> {
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                fmt_g9(r.tau),
                r.link.to_string(),
                fmt_g9(r.mu),
                fmt_g9(r.gamma_hat),
                fmt_g9(r.v_hat),
                fmt_g9(r.t_stat),
                fmt_g9(r.p_value),
            ]
        })
        .collect();
    write_rows(path, SCALE_TEST_HEADER, &rows)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// `effects.csv`, `scale_test.csv` (when present) and `report.json`.
pub fn write_effect_report(dir: &Path, report: &EffectReport) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let mut written = vec![dir.join("effects.csv")];
    write_effects_csv(&written[0], &report.effects)?;
    if !report.scale_tests.is_empty() {
        let p = dir.join("scale_test.csv");
        write_scale_test_csv(&p, &report.scale_tests)?;
        written.push(p);
    }
    let p = dir.join("report.json");
    write_json(&p, report)?;
    written.push(p);
    Ok(written)
}

/// One comparison of closed-form and simulated effects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub tau: f64,
    pub channel: String,
    pub closed_form: f64,
    pub brute_force: f64,
    pub mc_se: f64,
    pub tolerance: f64,
}

impl OracleRow {
    pub fn difference(&self) -> f64 {
        self.brute_force - self.closed_form
    }

    pub fn passes(&self) -> bool {
        self.difference().abs() <= self.tolerance
    }
}

pub fn write_oracle_csv(path: &Path, rows: &[OracleRow]) -> Result<()> {
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                fmt_g9(r.tau),
                r.channel.clone(),
                fmt_g9(r.closed_form),
                fmt_g9(r.brute_force),
                fmt_g9(r.mc_se),
                fmt_g9(r.difference()),
                fmt_g9(r.tolerance),
                r.passes().to_string(),
            ]
        })
        .collect();
    write_rows(path, ORACLE_HEADER, &rows)
}
