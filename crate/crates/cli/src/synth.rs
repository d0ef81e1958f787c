//! Synthetic CSV fixtures.
//!
//! `wage1-like` mimics the schema and rough marginals of a cross-section of
//! hourly wages (log wage on education with experience, tenure and two
//! indicators as controls); the error is heteroskedastic in education so
//! that scale effects are non-zero. `mc` is the simulation design
//! `y = x + u` with independent standard normals.

use std::path::Path;

use rand::Rng;
use rand_distr::{Bernoulli, Distribution, Gamma, Normal};
use upe_core::oracle::NormalLinearDgp;
use upe_core::rng::substream;

use crate::{CliError, Profile, SynthArgs};

pub const WAGE1_ROWS: usize = 526;
const MC_ROWS: usize = 1000;

pub const WAGE1_COLUMNS: [&str; 7] = ["wage", "lwage", "educ", "exper", "tenure", "nonwhite", "female"];

pub fn run(args: SynthArgs) -> Result<(), CliError> {
    let n = args.n.unwrap_or(match args.profile {
        Profile::Wage1Like => WAGE1_ROWS,
        Profile::Mc => MC_ROWS,
    });
    if n == 0 {
        return Err(CliError::Config("n must be positive".into()));
    }
    let (header, rows) = match args.profile {
        Profile::Wage1Like => (WAGE1_COLUMNS.to_vec(), wage1_like(n, args.seed)),
        Profile::Mc => (vec!["y", "x"], mc(n, args.seed)),
    };
    write(&args.out, &header, &rows).map_err(upe_core::Error::from)?;
    eprintln!("wrote {} rows to {}", n, args.out.display());
    Ok(())
}

fn write(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> csv::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn mc(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let dgp = NormalLinearDgp::standard(1.0, 0.0, 1.0);
    let (x, u) = dgp.draw(n, seed, 0);
    x.iter().zip(&u).map(|(&x, &u)| vec![dgp.outcome(x, u), x]).collect()
}

fn wage1_like(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let stream = |k| substream(seed, 0, k);
    let (mut r_educ, mut r_exper, mut r_tenure, mut r_nw, mut r_fem, mut r_u) =
        (stream(0), stream(1), stream(2), stream(3), stream(4), stream(5));
    let educ_d = Normal::new(12.56_f64, 2.77).unwrap();
    let exper_d = Gamma::new(1.6_f64, 10.6).unwrap();
    let tenure_d = Gamma::new(0.7_f64, 7.2).unwrap();
    let nonwhite_d = Bernoulli::new(0.10).unwrap();
    let female_d = Bernoulli::new(0.48).unwrap();
    let u_d = Normal::new(0.0_f64, 1.0).unwrap();

    (0..n)
        .map(|_| {
            let educ = educ_d.sample(&mut r_educ).round().clamp(0.0, 18.0);
            let exper = exper_d.sample(&mut r_exper).round().clamp(1.0, 51.0);
            let tenure = tenure_d.sample(&mut r_tenure).round().min(exper);
            let nonwhite = f64::from(u8::from(r_nw.sample(nonwhite_d)));
            let female = f64::from(u8::from(r_fem.sample(female_d)));
            let sd = 0.42 * (1.0_f64 + 0.04 * (educ - 12.56)).max(0.3);
            let lw = 0.28 + 0.092 * educ + 0.0041 * exper + 0.022 * tenure - 0.29 * female - 0.02 * nonwhite
                + sd * u_d.sample(&mut r_u);
            let wage = ((lw.exp() * 100.0).round() / 100.0).max(0.53);
            vec![wage, wage.ln(), educ, exper, tenure, nonwhite, female]
        })
        .collect()
}
