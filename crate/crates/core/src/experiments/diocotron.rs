//! Diocotron instability of an annular electron column in a uniform field.

use std::path::{Path, PathBuf};

use crate::diagnostics::{exterior_fraction, mode_amplitude, total_charge, total_energy, RadiusBand};
use crate::error::{Error, Result};
use crate::fields::{Grid2D, ScalarField};
use crate::model::{MagneticProfile, ScaleParams};
use crate::pic::{apply_boundary, push_with, sample_initial, solve_fields, Ensemble};
use crate::pushers::SchemeRegistry;

use super::config::{step_count, DiocotronConfig, ExperimentConfig};
use super::output::{fmt_f64, write_manifest, write_snapshot, CsvStream, Manifest, ManifestError};

pub const TIMESERIES_HEADER: [&str; 10] = [
    "t",
    "Q",
    "H",
    "removed",
    "A_l",
    "a_l_status",
    "exterior_fraction",
    "residual",
    "iterations",
    "step",
];

/// Diagnostics at one time level, taken after boundary handling and the
/// field solve and before the push.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeRow {
    pub t: f64,
    pub step: u64,
    pub q: f64,
    pub h: f64,
    /// Particles absorbed since the previous row.
    pub removed: usize,
    pub a_l: Option<f64>,
    pub a_l_status: String,
    pub exterior_fraction: f64,
    pub residual: f64,
    pub iterations: usize,
}

impl TimeRow {
    fn csv(&self) -> Vec<String> {
        vec![
            fmt_f64(self.t),
            fmt_f64(self.q),
            fmt_f64(self.h),
            self.removed.to_string(),
            self.a_l.map_or("nan".into(), fmt_f64),
            self.a_l_status.clone(),
            fmt_f64(self.exterior_fraction),
            fmt_f64(self.residual),
            self.iterations.to_string(),
            self.step.to_string(),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub step: u64,
    pub rho: ScalarField,
}

#[derive(Debug, Clone)]
pub struct DiocotronReport {
    pub rows: Vec<TimeRow>,
    pub snapshots: Vec<Snapshot>,
    pub ensemble: Ensemble,
}

impl DiocotronReport {
    /// Row at the step closest to `t`.
    pub fn row_at(&self, t: f64) -> Option<&TimeRow> {
        self.rows
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
    }
}

pub fn domain_grid(cfg: &DiocotronConfig) -> Result<Grid2D> {
    let [lo, hi] = cfg.domain;
    Grid2D::new(lo, hi, lo, hi, cfg.nx, cfg.ny)
}

/// Samples the initial ensemble and runs the PIC loop; with `out`, writes
/// `timeseries.csv`, the snapshots and `manifest.json` there.
pub fn run_diocotron(cfg: &DiocotronConfig, out: Option<&Path>) -> Result<DiocotronReport> {
    cfg.validate()?;
    let ens = sample_initial(&cfg.init, cfg.n_particles, cfg.seed)?;
    run_ensemble(cfg, ens, out)
}

struct Writer<'a> {
    dir: &'a Path,
    series: CsvStream,
    files: Vec<String>,
}

/// Runs the PIC loop on a prepared ensemble.
pub fn run_ensemble(cfg: &DiocotronConfig, ens: Ensemble, out: Option<&Path>) -> Result<DiocotronReport> {
    cfg.validate()?;
    let mut writer = match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            Some(Writer {
                dir,
                series: CsvStream::create(&dir.join("timeseries.csv"), &TIMESERIES_HEADER)?,
                files: vec!["timeseries.csv".into()],
            })
        }
        None => None,
    };
    let mut report = DiocotronReport {
        rows: vec![],
        snapshots: vec![],
        ensemble: ens,
    };
    let result = drive(cfg, &mut report, writer.as_mut());
    if let Some(w) = writer.as_mut() {
        w.series.flush()?;
        let err = result.as_ref().err().map(ManifestError::from);
        write_manifest(
            w.dir,
            &Manifest {
                version: crate::VERSION,
                status: if err.is_some() { "failed" } else { "ok" },
                config: &ExperimentConfig::Diocotron(cfg.clone()),
                files: w.files.clone(),
                completed_steps: err.as_ref().map(|_| report.ensemble.step_index()),
                error: err,
            },
        )?;
    }
    result.map(|_| report)
}

fn drive(cfg: &DiocotronConfig, report: &mut DiocotronReport, mut writer: Option<&mut Writer>) -> Result<()> {
    let grid = domain_grid(cfg)?;
    let p = ScaleParams::new(cfg.eps, cfg.tau, cfg.sigma, cfg.dt)?;
    let b = MagneticProfile::uniform(cfg.b0)?;
    let registry = SchemeRegistry::default();
    let scheme = registry.get(cfg.scheme.name())?;
    let band = RadiusBand {
        r_inner: cfg.init.r_minus,
        r_outer: cfg.init.r_plus,
    };
    let n_steps = step_count(cfg.t_final, cfg.dt, "dt")?;
    let snapshot_steps = cfg
        .snapshot_times
        .iter()
        .map(|&t| cfg.snapshot_step(t))
        .collect::<Result<Vec<_>>>()?;

    let ens = &mut report.ensemble;
    let mut guess: Option<ScalarField> = None;
    for n in 0..=n_steps {
        let removed = apply_boundary(ens, &grid);
        let solve = solve_fields(ens, &grid, &cfg.poisson, guess.as_ref())?;
        let t = n as f64 * cfg.dt;
        let (a_l, a_l_status) = match mode_amplitude(&solve.fields.rho, cfg.mode, &band) {
            Ok(a) => (Some(a), "ok".to_string()),
            Err(Error::Diagnostic(_)) => (None, "diagnostic-error".to_string()),
            Err(e) => return Err(e),
        };
        let row = TimeRow {
            t,
            step: n as u64,
            q: total_charge(ens),
            h: total_energy(ens, &solve.fields.e),
            removed,
            a_l,
            a_l_status,
            exterior_fraction: exterior_fraction(ens, &band),
            residual: solve.residual,
            iterations: solve.iterations,
        };
        if let Some(w) = writer.as_deref_mut() {
            w.series.row(&row.csv())?;
        }
        report.rows.push(row);
        for (k, _) in snapshot_steps.iter().enumerate().filter(|(_, &s)| s == n) {
            let snap = Snapshot {
                t,
                step: n as u64,
                rho: solve.fields.rho.clone(),
            };
            if let Some(w) = writer.as_deref_mut() {
                let stem = format!("rho_{k:03}");
                let path: PathBuf = write_snapshot(w.dir, &stem, "rho", &snap.rho, t, n as u64)?;
                w.files.push(path.file_name().unwrap().to_string_lossy().into_owned());
                w.files.push(format!("{stem}.json"));
            }
            report.snapshots.push(snap);
        }
        if n < n_steps {
            let (_, fields) = push_with(ens, solve, &grid, &p, &b, scheme)?;
            guess = Some(fields.phi);
        }
    }
    Ok(())
}
