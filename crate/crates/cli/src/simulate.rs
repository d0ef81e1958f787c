//! Monte Carlo and oracle subcommands.

use std::fs;
use std::path::Path;

use upe_core::effects::PolicySpec;
use upe_core::mc::{run_bias_table, run_coverage_table, run_normality_diag, run_power_curve, McConfig, McSummary};
use upe_core::numerics::LinkKind;
use upe_core::oracle::{brute_force_effect, closed_form_effects, stein_check, NormalLinearDgp, SteinCheck};
use upe_core::report::{
    fmt_g9, write_failures, write_mc_table, write_normality, write_oracle_csv, write_power, write_table1, write_table2, OracleRow,
};

use crate::config::{SimFile, Table};
use crate::{CliError, OracleArgs, SimArgs};

/// Profile defaults, then the config file, then flags. One configuration
/// per sample size.
fn resolve(args: &SimArgs, base: McConfig, sizes: &[usize]) -> Result<(Vec<McConfig>, SimFile), CliError> {
    let file = SimFile::load(args.config.as_deref())?;
    let mut cfg = file.apply(base);
    if args.full_scale && args.reps.is_none() {
        cfg.reps = crate::config::FULL_SCALE_REPS;
    }
    cfg.reps = args.reps.unwrap_or(cfg.reps);
    cfg.seed = args.seed.unwrap_or(cfg.seed);
    cfg.workers = args.workers.unwrap_or(cfg.workers);
    let sizes = match (&args.n, &file.n) {
        (Some(n), _) => n.clone(),
        (None, Some(n)) => n.to_vec(),
        (None, None) => sizes.to_vec(),
    };
    if sizes.is_empty() {
        return Err(CliError::Config("n must list at least one sample size".into()));
    }
    let cfgs: Vec<McConfig> = sizes.iter().map(|&n| McConfig { n, ..cfg.clone() }).collect();
    for c in &cfgs {
        c.validate()?;
    }
    Ok((cfgs, file))
}

/// Power and normality files are per design; they take one sample size.
fn resolve_single(args: &SimArgs, base: McConfig) -> Result<McConfig, CliError> {
    let (mut cfgs, _) = resolve(args, base, &[1000])?;
    if cfgs.len() != 1 {
        return Err(CliError::Config(format!("expected one sample size, got {}", cfgs.len())));
    }
    Ok(cfgs.remove(0))
}

fn merge(parts: Vec<McSummary>) -> McSummary {
    parts.into_iter().fold(McSummary::default(), |mut acc, s| {
        acc.rows.extend(s.rows);
        acc.failures.extend(s.failures);
        acc
    })
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("{}: {e}", dir.display())))
}

fn warn_invalid(summary: &McSummary) {
    for f in summary.invalid_cells() {
        eprintln!(
            "warning: {} tau = {} gamma = {}: {} of {} replications failed; cell reported as invalid",
            f.link, f.tau, f.gamma, f.failed, f.reps
        );
    }
}

fn announce(path: &Path) {
    eprintln!("wrote {}", path.display());
}

pub fn simulate(args: SimArgs) -> Result<(), CliError> {
    let (cfgs, file) = resolve(&args, McConfig::table_design(1000), &[500, 1000])?;
    let tables = file.tables.clone().unwrap_or_else(|| vec![Table::Bias, Table::Coverage]);
    create_dir(&args.out)?;
    if tables.contains(&Table::Bias) {
        let bias = merge(cfgs.iter().map(run_bias_table).collect::<Result<_, _>>()?);
        warn_invalid(&bias);
        let p = args.out.join("bias_table.csv");
        write_mc_table(&p, &bias.rows)?;
        announce(&p);
        let p = args.out.join("bias_failures.csv");
        write_failures(&p, &bias)?;
        announce(&p);
        let p = args.out.join("table1.txt");
        write_table1(&p, &bias)?;
        announce(&p);
        print!("{}", upe_core::report::render_table1(&bias));
    }
    if tables.contains(&Table::Coverage) {
        // The coverage table is reported for the correctly specified link
        // unless links are configured explicitly.
        let links = file.links.clone().unwrap_or_else(|| vec![LinkKind::Probit]);
        let cov = merge(
            cfgs.iter()
                .map(|c| run_coverage_table(&McConfig { links: links.clone(), ..c.clone() }))
                .collect::<Result<_, _>>()?,
        );
        warn_invalid(&cov);
        let p = args.out.join("coverage_table.csv");
        write_mc_table(&p, &cov.rows)?;
        announce(&p);
        let p = args.out.join("coverage_failures.csv");
        write_failures(&p, &cov)?;
        announce(&p);
        let p = args.out.join("table2.txt");
        write_table2(&p, &cov)?;
        announce(&p);
    }
    Ok(())
}

pub fn power(args: SimArgs) -> Result<(), CliError> {
    let cfg = resolve_single(&args, McConfig::power_design(1000))?;
    let summary = run_power_curve(&cfg)?;
    warn_invalid(&summary);
    for p in write_power(&args.out, &summary)? {
        announce(&p);
    }
    let p = args.out.join("failures.csv");
    write_failures(&p, &summary)?;
    announce(&p);
    for c in &summary.power {
        println!("tau = {}: null critical value {}", fmt_g9(c.tau), fmt_g9(c.critical_value));
    }
    Ok(())
}

/// Default cells: the probit estimator at the quartiles and the median for
/// two slopes.
fn normality_design() -> McConfig {
    McConfig {
        links: vec![LinkKind::Probit],
        taus: vec![0.25, 0.5, 0.75],
        gamma_grid: vec![0.25, 0.75],
        ..McConfig::table_design(1000)
    }
}

pub fn normality(args: SimArgs) -> Result<(), CliError> {
    let cfg = resolve_single(&args, normality_design())?;
    let summary = run_normality_diag(&cfg)?;
    warn_invalid(&summary);
    for p in write_normality(&args.out, &summary)? {
        announce(&p);
    }
    let p = args.out.join("failures.csv");
    write_failures(&p, &summary)?;
    announce(&p);
    for s in &summary.studentized {
        println!(
            "{} {} tau = {} gamma = {}: KS = {}, p = {}",
            s.estimator,
            s.link,
            fmt_g9(s.tau),
            fmt_g9(s.gamma),
            fmt_g9(s.ks_statistic),
            fmt_g9(s.ks_p_value)
        );
    }
    Ok(())
}

pub const ORACLE_TAUS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
/// Absolute floor of the oracle tolerance `max(3 MC-se, floor)`.
pub const ORACLE_TOLERANCE_FLOOR: f64 = 5e-3;
const STEIN_NODES: usize = 64;

pub fn oracle(args: OracleArgs) -> Result<(), CliError> {
    let file = SimFile::load(args.config.as_deref())?;
    let base = NormalLinearDgp::standard(1.0, 0.0, 1.0);
    let dgp = file.dgp.as_ref().map_or(base, |d| d.apply(base));
    let base_policy = PolicySpec {
        ldot0: 1.0,
        sdot0: -1.0,
        mu: dgp.mu_x,
    };
    let policy = file.policy.as_ref().map_or(base_policy, |p| p.apply(base_policy));
    let taus = file.taus.clone().unwrap_or_else(|| ORACLE_TAUS.to_vec());
    let delta = args.delta.or(file.delta).unwrap_or(0.01);
    let nsim = args.nsim.or(file.nsim).unwrap_or(4_000_000);
    let seed = args.seed.or(file.seed).unwrap_or(McConfig::table_design(1000).seed);
    dgp.validate()?;
    policy.validate()?;

    let mut rows = Vec::new();
    let mut stein = Vec::new();
    for &tau in &taus {
        let here = format!("tau = {tau}");
        let cf = closed_form_effects(&dgp, &policy, tau).map_err(CliError::at(&here))?;
        let bf = brute_force_effect(&dgp, &policy, tau, delta, nsim, seed).map_err(CliError::at(&here))?;
        for (channel, closed, brute, se) in [
            ("location", cf.pi_l, bf.pi_l, bf.pi_l_se),
            ("scale", cf.pi_s, bf.pi_s, bf.pi_s_se),
        ] {
            rows.push(OracleRow {
                tau,
                channel: channel.into(),
                closed_form: closed,
                brute_force: brute,
                mc_se: se,
                tolerance: (3.0 * se).max(ORACLE_TOLERANCE_FLOOR),
            });
        }
        stein.push((tau, stein_check(&dgp, tau, STEIN_NODES).map_err(CliError::at(&here))?));
    }

    create_dir(&args.out)?;
    let p = args.out.join("oracle.csv");
    write_oracle_csv(&p, &rows)?;
    announce(&p);
    let p = args.out.join("stein.csv");
    write_stein(&p, &stein).map_err(upe_core::Error::from)?;
    announce(&p);

    let failed = rows.iter().filter(|r| !r.passes()).count();
    for r in &rows {
        println!(
            "tau = {:<4} {:<8} closed form {:>12} brute force {:>12} (tolerance {}){}",
            fmt_g9(r.tau),
            r.channel,
            fmt_g9(r.closed_form),
            fmt_g9(r.brute_force),
            fmt_g9(r.tolerance),
            if r.passes() { "" } else { "  MISMATCH" }
        );
    }
    if failed > 0 {
        eprintln!("warning: {failed} of {} comparisons outside tolerance", rows.len());
    }
    Ok(())
}

fn write_stein(path: &Path, rows: &[(f64, SteinCheck)]) -> csv::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["tau", "lhs", "rhs", "residual"])?;
    for (tau, s) in rows {
        w.write_record([fmt_g9(*tau), fmt_g9(s.lhs), fmt_g9(s.rhs), fmt_g9(s.residual)])?;
    }
    w.flush()?;
    Ok(())
}
