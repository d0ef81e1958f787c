use std::path::PathBuf;

use upe_core::cdf_model::BasisSpec;
use upe_core::data::{ingest_csv, ColumnMapping, Dataset};
use upe_core::effects::{
    estimate_location_scale, estimate_simultaneous, EstimationSettings, PolicySpec, SimultaneousPolicy,
};
use upe_core::inference::{
    effect_confidence_intervals, influence_rows, scale_effect_ttest, simultaneous_influence_rows,
    EffectInterval, InferenceOptions,
};
use upe_core::numerics::{mean_sd, LinkKind};
use upe_core::report::{fmt_g, write_effect_report, EffectReport, EffectRow, ScaleTestRow, SCHEMA_VERSION};

use crate::config::EstimateFile;
use crate::{CliError, EstimateArgs};

enum Mode {
    LocationScale(PolicySpec),
    Simultaneous(SimultaneousPolicy),
}

struct Resolved {
    data: PathBuf,
    mapping: ColumnMapping,
    taus: Vec<f64>,
    links: Vec<LinkKind>,
    settings: EstimationSettings,
    level: f64,
    out: PathBuf,
    ldot0: Option<f64>,
    sdot0: Option<f64>,
    mu: Option<f64>,
    ldot: Option<Vec<f64>>,
    simultaneous: bool,
}

fn missing(key: &str) -> CliError {
    CliError::Config(format!("`{key}` is required (flag --{key} or config key)"))
}

fn resolve(args: EstimateArgs) -> Result<Resolved, CliError> {
    let file = EstimateFile::load(args.config.as_deref())?;
    let policy = file.policy.unwrap_or_default();
    let sim_file = file.simultaneous;
    let simultaneous = args.simultaneous || sim_file.is_some();

    let links: Vec<LinkKind> = match args.link {
        Some(l) => l.into_iter().map(Into::into).collect(),
        None => file.links.unwrap_or_else(|| vec![LinkKind::Probit]),
    };
    let mut settings = EstimationSettings::new(links[0]);
    settings.basis = args
        .basis
        .map(Into::into)
        .or(file.basis)
        .map(|b| BasisSpec::uniform(b, if simultaneous { 2 } else { 1 }));
    settings.bandwidth = args.bandwidth.or(file.bandwidth);
    settings.log_outcome = args.log_outcome || file.log_outcome.unwrap_or(false);

    Ok(Resolved {
        data: args.data.or(file.data).ok_or_else(|| missing("data"))?,
        mapping: ColumnMapping {
            y: args.y.or(file.y).ok_or_else(|| missing("y"))?,
            x: args.x.or(file.x).ok_or_else(|| missing("x"))?,
            w: args.w.or(file.w).unwrap_or_default(),
        },
        taus: args.tau.or(file.taus).unwrap_or_else(|| vec![0.1, 0.25, 0.5, 0.75, 0.9]),
        links,
        settings,
        level: args.level.or(file.level).unwrap_or(0.95),
        out: args.out.or(file.out).ok_or_else(|| missing("out"))?,
        ldot0: args.ldot0.or(policy.ldot0),
        sdot0: args.sdot0.or(policy.sdot0),
        mu: args.mu.or(policy.mu),
        ldot: args.ldot.or(sim_file.and_then(|s| s.ldot)),
        simultaneous,
    })
}

/// Exactly one of the two policy blocks may be present.
fn mode(r: &Resolved, dataset: &Dataset) -> Result<Mode, CliError> {
    if r.simultaneous {
        if r.ldot0.is_some() || r.sdot0.is_some() || r.mu.is_some() {
            return Err(CliError::Config(
                "ldot0/sdot0/mu belong to the location-scale policy; use ldot with a simultaneous shift".into(),
            ));
        }
        if r.mapping.x.len() != 2 {
            return Err(CliError::Config(format!(
                "a simultaneous shift needs two targets, got {}",
                r.mapping.x.len()
            )));
        }
        let ldot = r.ldot.as_deref().unwrap_or(&[1.0, 1.0]);
        let ldot: [f64; 2] = ldot
            .try_into()
            .map_err(|_| CliError::Config(format!("ldot needs two values, got {}", ldot.len())))?;
        Ok(Mode::Simultaneous(SimultaneousPolicy::new(ldot)?))
    } else {
        if r.ldot.is_some() {
            return Err(CliError::Config("ldot requires --simultaneous".into()));
        }
        if r.mapping.x.len() != 1 {
            return Err(CliError::Config(format!(
                "a location-scale shift needs one target, got {} (use --simultaneous for two)",
                r.mapping.x.len()
            )));
        }
        let mu = r.mu.unwrap_or_else(|| mean_sd(&dataset.x[0]).0);
        Ok(Mode::LocationScale(PolicySpec::new(
            r.ldot0.unwrap_or(1.0),
            r.sdot0.unwrap_or(-1.0),
            mu,
        )?))
    }
}

fn validate(r: &Resolved) -> Result<(), CliError> {
    if r.taus.is_empty() || r.taus.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
        return Err(CliError::Config("tau values must lie in (0, 1)".into()));
    }
    if !(r.level > 0.0 && r.level < 1.0) {
        return Err(CliError::Config(format!("level {} not in (0, 1)", r.level)));
    }
    if let Some(h) = r.settings.bandwidth {
        if !(h > 0.0 && h.is_finite()) {
            return Err(CliError::Config(format!("bandwidth {h} must be positive")));
        }
    }
    Ok(())
}

fn effect_row(
    tau: f64,
    link: LinkKind,
    ci: &EffectInterval,
    elasticity: Option<f64>,
    mu: Option<f64>,
    q_hat: f64,
    f_hat: f64,
    bandwidth: f64,
) -> EffectRow {
    EffectRow {
        tau,
        link,
        effect: ci.effect.clone(),
        estimate: ci.estimate,
        se: ci.se,
        ci_lower: ci.lower,
        ci_upper: ci.upper,
        elasticity,
        mu,
        q_hat,
        f_hat,
        bandwidth,
    }
}

pub fn run(args: EstimateArgs) -> Result<(), CliError> {
    let r = resolve(args)?;
    validate(&r)?;
    let (dataset, load) = ingest_csv(&r.data, &r.mapping)?;
    dataset.check_estimation_size()?;
    let mode = mode(&r, &dataset)?;
    eprintln!(
        "read {} rows from {}, dropped {}",
        load.rows_read,
        r.data.display(),
        load.rows_dropped
    );

    let opts = InferenceOptions::default();
    let mut effects = Vec::new();
    let mut scale_tests = Vec::new();
    for &link in &r.links {
        let settings = EstimationSettings {
            link,
            ..r.settings.clone()
        };
        for &tau in &r.taus {
            let here = format!("tau = {tau} ({link})");
            match &mode {
                Mode::LocationScale(policy) => {
                    let (est, fit) =
                        estimate_location_scale(&dataset, policy, tau, &settings).map_err(CliError::at(&here))?;
                    let comps = influence_rows(&fit, &est, &opts).map_err(CliError::at(&here))?;
                    let cis = effect_confidence_intervals(&comps, r.level)?;
                    for ci in &cis {
                        let el = if ci.effect == "scale" { est.elasticity } else { None };
                        effects.push(effect_row(tau, link, ci, el, Some(policy.mu), est.q_hat, est.f_hat, est.bandwidth));
                    }
                    let t = scale_effect_ttest(&comps, policy.mu).map_err(CliError::at(&here))?;
                    scale_tests.push(ScaleTestRow {
                        tau,
                        link,
                        mu: policy.mu,
                        gamma_hat: t.gamma_hat,
                        v_hat: t.v_hat,
                        t_stat: t.t_stat,
                        p_value: t.p_value,
                    });
                }
                Mode::Simultaneous(policy) => {
                    let (est, fit) =
                        estimate_simultaneous(&dataset, policy, tau, &settings).map_err(CliError::at(&here))?;
                    let comps = simultaneous_influence_rows(&fit, &est, &opts).map_err(CliError::at(&here))?;
                    for ci in &effect_confidence_intervals(&comps, r.level)? {
                        effects.push(effect_row(tau, link, ci, None, None, est.q_hat, est.f_hat, est.bandwidth));
                    }
                }
            }
        }
    }

    let report = EffectReport {
        schema_version: SCHEMA_VERSION,
        outcome: dataset.y_name.clone(),
        targets: dataset.x_names.clone(),
        controls: dataset.w_names.clone(),
        n: dataset.n(),
        rows_dropped: load.rows_dropped,
        log_outcome: r.settings.log_outcome,
        level: r.level,
        effects,
        scale_tests,
    };
    for path in write_effect_report(&r.out, &report)? {
        eprintln!("wrote {}", path.display());
    }
    print_effects(&report);
    Ok(())
}

fn print_effects(report: &EffectReport) {
    println!(
        "{:>6} {:>7} {:>12} {:>11} {:>10} {:>24}",
        "tau", "link", "effect", "estimate", "se", "interval"
    );
    for e in &report.effects {
        println!(
            "{:>6} {:>7} {:>12} {:>11} {:>10} {:>24}",
            fmt_g(e.tau, 4),
            e.link,
            e.effect,
            fmt_g(e.estimate, 5),
            fmt_g(e.se, 4),
            format!("[{}, {}]", fmt_g(e.ci_lower, 5), fmt_g(e.ci_upper, 5))
        );
    }
    for t in &report.scale_tests {
        println!(
            "scale test tau = {} ({}): t = {}, p = {}",
            fmt_g(t.tau, 4),
            t.link,
            fmt_g(t.t_stat, 4),
            fmt_g(t.p_value, 4)
        );
    }
}
