//! Pilot run of the simulation design: prints the cells the acceptance
//! thresholds are taken from.
//!
//!     cargo run --release -p upe-core --example pilot [reps] [bias|coverage|normality|power]

use std::time::Instant;

use upe_core::mc::{run_bias_table, run_coverage_table, run_normality_diag, run_power_curve, McConfig};
use upe_core::numerics::LinkKind;

fn main() -> upe_core::Result<()> {
    let reps: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let only = std::env::args().nth(2);
    let wanted = |name: &str| only.as_deref().map_or(true, |o| o == name);
    let t = Instant::now();

    if wanted("bias") {
        let table = run_bias_table(&McConfig { reps, ..McConfig::table_design(1000) })?;
        println!("# bias table, n = 1000 ({:.1?})", t.elapsed());
        for r in &table.rows {
            println!(
                "{:9} {:6} tau={:<5} {:9} {:>10.5} ± {:.5}",
                r.estimator, r.link, r.tau, r.statistic, r.value, r.mc_se
            );
        }
        println!("invalid cells: {}", table.invalid_cells().count());
    }

    if wanted("coverage") {
        let cov = run_coverage_table(&McConfig {
            reps,
            links: vec![LinkKind::Probit],
            ..McConfig::table_design(1000)
        })?;
        println!("# coverage, n = 1000 ({:.1?})", t.elapsed());
        for r in &cov.rows {
            println!("{:9} gamma={:<5} tau={:<5} {:.4} ± {:.4}", r.estimator, r.gamma, r.tau, r.value, r.mc_se);
        }
        println!("invalid cells: {}", cov.invalid_cells().count());
    }

    if wanted("normality") {
        let norm = run_normality_diag(&McConfig {
            reps,
            links: vec![LinkKind::Probit],
            taus: vec![0.25, 0.5, 0.75],
            gamma_grid: vec![0.25, 0.75],
            ..McConfig::table_design(1000)
        })?;
        println!("# normality ({:.1?})", t.elapsed());
        if let Ok(dir) = std::env::var("PILOT_OUT") {
            upe_core::report::write_normality(std::path::Path::new(&dir), &norm)?;
        }
        for s in &norm.studentized {
            let m = s.values.len() as f64;
            let mean = s.values.iter().sum::<f64>() / m;
            let sd = (s.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt();
            println!(
                "{:9} gamma={:<5} tau={:<5} KS={:.4} p={:.4} mean={:.3} sd={:.3}",
                s.estimator, s.gamma, s.tau, s.ks_statistic, s.ks_p_value, mean, sd
            );
        }
    }

    if wanted("power") {
        let power = run_power_curve(&McConfig {
            reps,
            gamma_grid: vec![-0.4, -0.2, -0.1, 0.0, 0.1, 0.2, 0.4],
            ..McConfig::power_design(1000)
        })?;
        println!("# power, n = 1000 ({:.1?})", t.elapsed());
        for c in &power.power {
            println!("tau={} crit={:.4}", c.tau, c.critical_value);
            for k in 0..c.gamma.len() {
                println!("  gamma={:<5} raw={:.4} adj={:.4}", c.gamma[k], c.raw[k], c.adjusted[k]);
            }
        }
        println!("invalid cells: {}", power.invalid_cells().count());
    }
    Ok(())
}
