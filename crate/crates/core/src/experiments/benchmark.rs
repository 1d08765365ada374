//! Single-particle benchmark: `E = -x`, `b(x) = 1 + ε sin|x|`.

use std::path::Path;

use rayon::prelude::*;

use crate::diagnostics::{convergence_slope, expectation_error, traj_error, ErrorSeries, PathBundle, SlopeFit};
use crate::error::{Error, Result};
use crate::fields::ElectricField;
use crate::model::{sub, MagneticProfile, ScaleParams, Vec2};
use crate::noise::{coarsen, NoiseDraw, NoiseStream};
use crate::pushers::{GCState, GcRegistry, GuidingCenterModel, PhaseState, Pusher, Scheme, SchemeRegistry};

use super::config::{step_count, BenchmarkConfig, Study};
use super::output::{fmt_f64, write_manifest, CsvTable, Manifest};

/// Paths per parallel work item; partial statistics merge in this order.
pub const PATH_CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRow {
    pub eps: f64,
    pub dt: f64,
    pub error: Vec2,
    pub std_error: Vec2,
    pub n_paths: usize,
    pub m_xi: f64,
}

/// Slope fit of one error component, or why it could not be fitted.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeOutcome {
    pub component: usize,
    pub abscissa: &'static str,
    pub fit: std::result::Result<SlopeFit, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub rows: Vec<BenchmarkRow>,
    pub slopes: Vec<SlopeOutcome>,
}

impl BenchmarkReport {
    pub fn slope(&self, component: usize) -> Option<&SlopeFit> {
        self.slopes
            .iter()
            .find(|s| s.component == component)
            .and_then(|s| s.fit.as_ref().ok())
    }

    pub fn errors_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(vec![
            "eps", "dt", "error1", "error2", "std_err1", "std_err2", "n_paths", "m_xi",
        ]);
        for r in &self.rows {
            t.push(vec![
                fmt_f64(r.eps),
                fmt_f64(r.dt),
                fmt_f64(r.error[0]),
                fmt_f64(r.error[1]),
                fmt_f64(r.std_error[0]),
                fmt_f64(r.std_error[1]),
                r.n_paths.to_string(),
                fmt_f64(r.m_xi),
            ]);
        }
        t
    }

    pub fn slopes_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(vec![
            "component", "abscissa", "slope", "ci_low", "ci_high", "intercept", "n_used", "excluded", "status",
        ]);
        for s in &self.slopes {
            let row = match &s.fit {
                Ok(f) => vec![
                    s.component.to_string(),
                    s.abscissa.into(),
                    fmt_f64(f.slope),
                    fmt_f64(f.ci_low),
                    fmt_f64(f.ci_high),
                    fmt_f64(f.intercept),
                    f.used.len().to_string(),
                    f.excluded.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(";"),
                    "ok".into(),
                ],
                Err(msg) => {
                    let mut r = vec![s.component.to_string(), s.abscissa.into()];
                    r.extend(std::iter::repeat_n("nan".to_string(), 4));
                    r.extend(["0".into(), String::new(), msg.clone()]);
                    r
                }
            };
            t.push(row);
        }
        t
    }
}

struct Setup<'a> {
    scheme: &'a dyn Pusher,
    e: ElectricField,
    b: MagneticProfile,
    noise: NoiseStream,
}

fn integrate(
    scheme: &dyn Pusher,
    mut s: PhaseState,
    e: &ElectricField,
    b: &MagneticProfile,
    p: &ScaleParams,
    draws: &[NoiseDraw],
) -> Result<PhaseState> {
    for &xi in draws {
        s = scheme.step(s, e, b, p, xi)?;
    }
    if !s.is_finite() {
        return Err(Error::Domain(format!(
            "{} produced a non-finite state (eps={}, dt={}, sigma={}, tau={})",
            scheme.name(),
            p.epsilon(),
            p.dt(),
            p.sigma(),
            p.tau()
        )));
    }
    Ok(s)
}

#[allow(clippy::too_many_arguments)]
fn integrate_gc(
    gc: &dyn GuidingCenterModel,
    u0: Vec2,
    e: &ElectricField,
    b: &MagneticProfile,
    eps: f64,
    tau: f64,
    dt: f64,
    n: usize,
) -> Result<Vec2> {
    let mut g = GCState::new(u0);
    for _ in 0..n {
        g = gc.step(g, e, b, eps, tau, dt)?;
    }
    Ok(g.u)
}

fn max_xi(draws: &[NoiseDraw]) -> f64 {
    draws.iter().fold(0.0, |m, d| m.max(d.max_abs()))
}

/// Runs `per_path` for path ids `0..n_paths` in fixed chunks and merges the
/// chunk bundles in id order.
fn bundle_paths<F>(n_paths: usize, levels: usize, per_path: F) -> Result<Vec<PathBundle>>
where
    F: Fn(u64, &mut [PathBundle]) -> Result<()> + Sync,
{
    let n_chunks = n_paths.div_ceil(PATH_CHUNK);
    let parts: Vec<Result<Vec<PathBundle>>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut local = vec![PathBundle::default(); levels];
            let end = ((c + 1) * PATH_CHUNK).min(n_paths);
            for id in c * PATH_CHUNK..end {
                per_path(id as u64, &mut local)?;
            }
            Ok(local)
        })
        .collect();
    let mut total = vec![PathBundle::default(); levels];
    for part in parts {
        for (t, p) in total.iter_mut().zip(part?) {
            t.extend(p);
        }
    }
    Ok(total)
}

fn error_row(eps: f64, dt: f64, bundle: &PathBundle, target: Vec2) -> Result<BenchmarkRow> {
    let (error, std_error) = if bundle.n_paths() == 1 {
        (traj_error(bundle.mean(), target), [0.0, 0.0])
    } else {
        let e = expectation_error(bundle, target)?;
        (e.error, e.std_error)
    };
    Ok(BenchmarkRow {
        eps,
        dt,
        error,
        std_error,
        n_paths: bundle.n_paths(),
        m_xi: bundle.m_xi,
    })
}

fn against_guiding_center(cfg: &BenchmarkConfig, set: &Setup, gc: &dyn GuidingCenterModel) -> Result<Vec<BenchmarkRow>> {
    let dt = cfg.dt.ok_or_else(|| Error::config("dt", "required by this study"))?;
    let n = step_count(cfg.t_final, dt, "dt")?;
    let mut rows = vec![];
    for &eps in &cfg.eps_list {
        let p = ScaleParams::new(eps, cfg.tau, cfg.sigma, dt)?;
        let s0 = PhaseState::new(cfg.x0, cfg.initial_velocity(eps));
        let u_n = integrate_gc(gc, cfg.x0, &set.e, &set.b, eps, cfg.tau, dt, n)?;
        // the same path ids at every ε: common random numbers across the sweep
        let bundle = bundle_paths(cfg.n_paths, 1, |id, out| {
            let draws = set.noise.draws(id, 0, n);
            let s = integrate(set.scheme, s0, &set.e, &set.b, &p, &draws)?;
            out[0].push(s.x, max_xi(&draws));
            Ok(())
        })?;
        rows.push(error_row(eps, dt, &bundle[0], u_n)?);
    }
    Ok(rows)
}

fn weak_order(cfg: &BenchmarkConfig, set: &Setup, reference: &dyn Pusher) -> Result<Vec<BenchmarkRow>> {
    let dts = cfg
        .dt_list
        .clone()
        .ok_or_else(|| Error::config("dt_list", "required by the weak-order study"))?;
    let eps = cfg.eps_list[0];
    let n_ref = cfg.reference_steps()?;
    let dt_ref = cfg.t_final / n_ref as f64;
    let p_ref = ScaleParams::new(eps, cfg.tau, cfg.sigma, dt_ref)?;
    let mut levels = vec![];
    for &dt in &dts {
        let n = step_count(cfg.t_final, dt, "dt_list")?;
        levels.push((dt, n_ref / n, ScaleParams::new(eps, cfg.tau, cfg.sigma, dt)?));
    }
    let s0 = PhaseState::new(cfg.x0, cfg.initial_velocity(eps));
    let bundles = bundle_paths(cfg.n_paths, levels.len(), |id, out| {
        let fine = set.noise.draws(id, 0, n_ref);
        let m = max_xi(&fine);
        let x_ref = integrate(reference, s0, &set.e, &set.b, &p_ref, &fine)?.x;
        for ((_, ratio, p), bundle) in levels.iter().zip(out.iter_mut()) {
            let coarse = coarsen(&fine, *ratio);
            let x = integrate(set.scheme, s0, &set.e, &set.b, p, &coarse)?.x;
            bundle.push(sub(x, x_ref), m);
        }
        Ok(())
    })?;
    levels
        .iter()
        .zip(&bundles)
        .map(|((dt, _, _), b)| error_row(eps, *dt, b, [0.0, 0.0]))
        .collect()
}

/// Runs the configured study and fits per-component slopes.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkReport> {
    cfg.validate()?;
    let schemes = SchemeRegistry::default();
    let set = Setup {
        scheme: schemes.get(cfg.scheme.name())?,
        e: ElectricField::benchmark(),
        b: MagneticProfile::benchmark(),
        noise: NoiseStream::new(cfg.seed),
    };
    let (rows, abscissa) = match cfg.study {
        Study::SinglePath | Study::Expectation => {
            let gcs = GcRegistry::default();
            let name = cfg
                .gc_model
                .ok_or_else(|| Error::config("gc_model", "required by this study"))?
                .name();
            (against_guiding_center(cfg, &set, gcs.get(name)?)?, "eps")
        }
        Study::WeakOrder => (weak_order(cfg, &set, schemes.get(Scheme::Apsi2.name())?)?, "dt"),
    };
    let xs: Vec<f64> = rows.iter().map(|r| if abscissa == "eps" { r.eps } else { r.dt }).collect();
    let with_se = rows.iter().any(|r| r.n_paths > 1);
    let mut slopes = vec![];
    for c in 0..2 {
        let errs = rows.iter().map(|r| r.error[c]).collect();
        let se = with_se.then(|| rows.iter().map(|r| r.std_error[c]).collect());
        let fit = ErrorSeries::with_std_errors(xs.clone(), errs, se)
            .and_then(|s| convergence_slope(&s))
            .map_err(|e| e.to_string());
        slopes.push(SlopeOutcome {
            component: c + 1,
            abscissa,
            fit,
        });
    }
    Ok(BenchmarkReport { rows, slopes })
}

/// Writes `errors.csv`, `slopes.csv` and `manifest.json` into `dir`.
pub fn write_benchmark(dir: &Path, cfg: &BenchmarkConfig, report: &BenchmarkReport) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    report.errors_csv().write(&dir.join("errors.csv"))?;
    report.slopes_csv().write(&dir.join("slopes.csv"))?;
    write_manifest(
        dir,
        &Manifest {
            version: crate::VERSION,
            status: "ok",
            config: &super::config::ExperimentConfig::Benchmark(cfg.clone()),
            files: vec!["errors.csv".into(), "slopes.csv".into()],
            error: None,
            completed_steps: None,
        },
    )
}
