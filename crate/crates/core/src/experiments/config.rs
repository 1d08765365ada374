use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pic::DiocotronInit;
use crate::poisson::PoissonConfig;
use crate::pushers::{GcModel, Scheme};

/// Tolerance on `T/Δt` (and step ratios) being integers.
pub const INTEGRAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum ExperimentConfig {
    Benchmark(BenchmarkConfig),
    Diocotron(DiocotronConfig),
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            ExperimentConfig::Benchmark(c) => c.validate(),
            ExperimentConfig::Diocotron(c) => c.validate(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentConfig::Benchmark(_) => "benchmark",
            ExperimentConfig::Diocotron(_) => "diocotron",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Study {
    /// One Brownian path, error against the guiding-center solution per ε.
    SinglePath,
    /// Mean over `n_paths` paths against the guiding-center solution per ε.
    Expectation,
    /// Coupled-noise refinement in Δt against a fine APSI2 reference.
    WeakOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum V0Mode {
    Fixed,
    /// `v(0) = ε v0`.
    OrderEpsilon,
}

fn default_x0() -> [f64; 2] {
    [0.3, 0.2]
}

fn default_v0() -> [f64; 2] {
    [-0.7, 0.08]
}

fn default_one() -> usize {
    1
}

fn default_refinement() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub study: Study,
    pub scheme: Scheme,
    pub eps_list: Vec<f64>,
    /// Step for the single-path and expectation studies.
    #[serde(default)]
    pub dt: Option<f64>,
    /// Steps for the weak-order study.
    #[serde(default)]
    pub dt_list: Option<Vec<f64>>,
    pub t_final: f64,
    pub sigma: f64,
    pub tau: f64,
    #[serde(default = "default_x0")]
    pub x0: [f64; 2],
    #[serde(default = "default_v0")]
    pub v0: [f64; 2],
    #[serde(default = "default_v0_mode")]
    pub v0_mode: V0Mode,
    #[serde(default = "default_one")]
    pub n_paths: usize,
    /// Guiding-center reference; unused by the weak-order study.
    #[serde(default)]
    pub gc_model: Option<GcModel>,
    #[serde(default)]
    pub seed: u64,
    /// Weak-order reference step is `min(dt_list) / ref_refinement`.
    #[serde(default = "default_refinement")]
    pub ref_refinement: usize,
}

fn default_v0_mode() -> V0Mode {
    V0Mode::Fixed
}

/// Number of steps `T/Δt`, or a config error naming `field`.
pub fn step_count(t_final: f64, dt: f64, field: &str) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::config(field, format!("time step must be positive and finite, got {dt}")));
    }
    let ratio = t_final / dt;
    let n = ratio.round();
    if n < 1.0 || (ratio - n).abs() > INTEGRAL_TOL {
        return Err(Error::config(
            field,
            format!("t_final / dt = {ratio} is not a positive integer (dt = {dt})"),
        ));
    }
    Ok(n as usize)
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be positive and finite, got {v}")))
    }
}

fn nonnegative(field: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be nonnegative and finite, got {v}")))
    }
}

fn strictly_monotone(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] > w[0]) || v.windows(2).all(|w| w[1] < w[0])
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        positive("t_final", self.t_final)?;
        nonnegative("sigma", self.sigma)?;
        positive("tau", self.tau)?;
        if self.eps_list.is_empty() {
            return Err(Error::config("eps_list", "must not be empty"));
        }
        for &e in &self.eps_list {
            positive("eps_list", e)?;
        }
        if !strictly_monotone(&self.eps_list) {
            return Err(Error::config("eps_list", "must be strictly monotone"));
        }
        if !self.x0.iter().chain(&self.v0).all(|c| c.is_finite()) {
            return Err(Error::config("x0", "initial state must be finite"));
        }
        if self.n_paths < 1 {
            return Err(Error::config("n_paths", "must be at least 1"));
        }
        match self.study {
            Study::SinglePath | Study::Expectation => {
                let dt = self
                    .dt
                    .ok_or_else(|| Error::config("dt", "required by this study"))?;
                step_count(self.t_final, dt, "dt")?;
                if self.dt_list.is_some() {
                    return Err(Error::config("dt_list", "only used by the weak-order study"));
                }
                if self.gc_model.is_none() {
                    return Err(Error::config("gc_model", "required by this study"));
                }
                if self.study == Study::SinglePath && self.n_paths != 1 {
                    return Err(Error::config("n_paths", "single-path study uses exactly one path"));
                }
            }
            Study::WeakOrder => {
                let dts = self
                    .dt_list
                    .as_ref()
                    .ok_or_else(|| Error::config("dt_list", "required by the weak-order study"))?;
                if self.dt.is_some() {
                    return Err(Error::config("dt", "weak-order study takes dt_list"));
                }
                if self.eps_list.len() != 1 {
                    return Err(Error::config("eps_list", "weak-order study takes exactly one epsilon"));
                }
                if dts.len() < 3 || !strictly_monotone(dts) {
                    return Err(Error::config("dt_list", "needs at least 3 strictly monotone steps"));
                }
                if self.ref_refinement < 1 {
                    return Err(Error::config("ref_refinement", "must be at least 1"));
                }
                let n_ref = self.reference_steps()?;
                for &dt in dts {
                    let n = step_count(self.t_final, dt, "dt_list")?;
                    if n_ref % n != 0 {
                        return Err(Error::config(
                            "dt_list",
                            format!("dt = {dt} does not divide into reference steps"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Step count of the fine reference of the weak-order study.
    pub fn reference_steps(&self) -> Result<usize> {
        let dts = self
            .dt_list
            .as_ref()
            .ok_or_else(|| Error::config("dt_list", "required by the weak-order study"))?;
        let dt_min = dts.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok(step_count(self.t_final, dt_min, "dt_list")? * self.ref_refinement)
    }

    pub fn initial_velocity(&self, eps: f64) -> [f64; 2] {
        match self.v0_mode {
            V0Mode::Fixed => self.v0,
            V0Mode::OrderEpsilon => [eps * self.v0[0], eps * self.v0[1]],
        }
    }
}

fn default_domain() -> [f64; 2] {
    [-8.0, 8.0]
}

fn default_b0() -> f64 {
    1.0
}

fn default_scheme() -> Scheme {
    Scheme::Apsi1
}

fn default_mode() -> u32 {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiocotronConfig {
    #[serde(default)]
    pub init: DiocotronInit,
    pub n_particles: usize,
    pub nx: usize,
    pub ny: usize,
    /// `[lo, hi]` of the square domain `[lo, hi]²`.
    #[serde(default = "default_domain")]
    pub domain: [f64; 2],
    pub eps: f64,
    pub sigma: f64,
    pub tau: f64,
    pub dt: f64,
    pub t_final: f64,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default)]
    pub poisson: PoissonConfig,
    #[serde(default)]
    pub seed: u64,
    /// Uniform magnetic field strength.
    #[serde(default = "default_b0")]
    pub b0: f64,
    /// Azimuthal mode reported in the time series.
    #[serde(default = "default_mode")]
    pub mode: u32,
}

impl DiocotronConfig {
    pub fn validate(&self) -> Result<()> {
        self.init.validate()?;
        if self.n_particles < 1 {
            return Err(Error::config("n_particles", "must be at least 1"));
        }
        if self.nx < 3 || self.ny < 3 {
            return Err(Error::config("nx", "grid needs at least 3 nodes per axis"));
        }
        if !(self.domain[1] > self.domain[0]) || !self.domain.iter().all(|d| d.is_finite()) {
            return Err(Error::config("domain", "needs finite lo < hi"));
        }
        positive("eps", self.eps)?;
        nonnegative("sigma", self.sigma)?;
        positive("tau", self.tau)?;
        positive("t_final", self.t_final)?;
        step_count(self.t_final, self.dt, "dt")?;
        if !(self.b0 != 0.0 && self.b0.is_finite()) {
            return Err(Error::config("b0", "must be finite and nonzero"));
        }
        if self.mode < 1 {
            return Err(Error::config("mode", "must be at least 1"));
        }
        for &t in &self.snapshot_times {
            if !(0.0..=self.t_final).contains(&t) {
                return Err(Error::config(
                    "snapshot_times",
                    format!("{t} lies outside [0, {}]", self.t_final),
                ));
            }
            self.snapshot_step(t)?;
        }
        self.poisson.validate()
    }

    /// Step index at which snapshot time `t` is reached.
    pub fn snapshot_step(&self, t: f64) -> Result<usize> {
        if t == 0.0 {
            return Ok(0);
        }
        step_count(t, self.dt, "snapshot_times")
    }
}

fn parse_error(e: serde_json::Error) -> Error {
    Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Parses and validates a JSON experiment description.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = serde_json::from_str(text).map_err(parse_error)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

const PRESETS: &[(&str, &str)] = &[
    ("fig1a", include_str!("../../presets/fig1a.json")),
    ("fig1b", include_str!("../../presets/fig1b.json")),
    ("fig1c", include_str!("../../presets/fig1c.json")),
    ("fig1d", include_str!("../../presets/fig1d.json")),
    ("fig2a", include_str!("../../presets/fig2a.json")),
    ("fig2b", include_str!("../../presets/fig2b.json")),
    ("fig2c", include_str!("../../presets/fig2c.json")),
    ("fig2d", include_str!("../../presets/fig2d.json")),
    ("fig4a", include_str!("../../presets/fig4a.json")),
    ("fig4b", include_str!("../../presets/fig4b.json")),
    ("fig5a", include_str!("../../presets/fig5a.json")),
    ("fig5b", include_str!("../../presets/fig5b.json")),
    ("dio-eps2", include_str!("../../presets/dio-eps2.json")),
    ("dio-eps4", include_str!("../../presets/dio-eps4.json")),
    ("dio-collisional", include_str!("../../presets/dio-collisional.json")),
    ("dio-collisional-eps4", include_str!("../../presets/dio-collisional-eps4.json")),
];

const ALIASES: &[(&str, &str)] = &[("fig2cd", "fig2c")];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).chain(ALIASES.iter().map(|(a, _)| *a)).collect()
}

/// Raw JSON of a shipped preset.
pub fn preset_text(name: &str) -> Result<&'static str> {
    let name = ALIASES.iter().find(|(a, _)| *a == name).map_or(name, |(_, t)| t);
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| {
            Error::config(
                "preset",
                format!("unknown preset {name:?}; known: {}", preset_names().join(", ")),
            )
        })
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    parse_config(preset_text(name)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn bench(name: &str) -> BenchmarkConfig {
        match preset(name).unwrap() {
            ExperimentConfig::Benchmark(c) => c,
            other => panic!("{name} is {}", other.kind()),
        }
    }

    fn dio(name: &str) -> DiocotronConfig {
        match preset(name).unwrap() {
            ExperimentConfig::Diocotron(c) => c,
            other => panic!("{name} is {}", other.kind()),
        }
    }

    fn halvings(lo: i32, hi: i32) -> Vec<f64> {
        (lo..=hi).map(|m| 2f64.powi(-m)).collect()
    }

    #[test]
    fn every_preset_parses() {
        for name in preset_names() {
            preset(name).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn fig1_presets() {
        let a = bench("fig1a");
        assert_eq!(a.scheme, Scheme::Apsi1);
        assert_eq!(a.study, Study::SinglePath);
        assert!((a.dt.unwrap() - PI / 30.0).abs() < 1e-15);
        assert!((a.t_final - PI).abs() < 1e-15);
        assert_eq!((a.sigma, a.tau), (1.0, 1.0));
        assert_eq!(a.eps_list, halvings(1, 10));
        assert_eq!(a.x0, [0.3, 0.2]);
        assert_eq!(a.v0, [-0.7, 0.08]);

        let c = bench("fig1c");
        assert_eq!((c.sigma, c.tau), (2f64.powi(-6), 2f64.powi(6)));
        assert_eq!(c.eps_list, a.eps_list);
        assert_eq!(bench("fig1b").scheme, Scheme::Apsi2);
        assert_eq!(bench("fig1d").scheme, Scheme::Apsi2);
    }

    #[test]
    fn fig2cd_preset() {
        let c = bench("fig2cd");
        assert_eq!(c, bench("fig2c"));
        assert_eq!(c.x0, [10.0, 14.0]);
        assert_eq!(c.v0_mode, V0Mode::OrderEpsilon);
        assert_eq!(c.gc_model, Some(GcModel::REuler));
        assert_eq!(c.n_paths, 10_000);
        assert_eq!(c.eps_list, halvings(1, 6));
        assert_eq!(c.initial_velocity(0.5), [-0.35, 0.04]);
    }

    #[test]
    fn weak_order_presets() {
        let a = bench("fig4b");
        assert_eq!(a.eps_list, vec![1e-4]);
        let dts = a.dt_list.clone().unwrap();
        for (m, dt) in dts.iter().enumerate() {
            assert!((dt - PI / 30.0 / 2f64.powi(m as i32)).abs() < 1e-15);
        }
        assert_eq!(a.reference_steps().unwrap(), 30 * 16 * 4);
        let b = bench("fig5b");
        assert_eq!((b.scheme, b.eps_list.clone()), (Scheme::Apsi2, vec![1e-8]));
        assert_eq!(b.dt_list.unwrap().len(), 5);
    }

    #[test]
    fn diocotron_presets() {
        let d = dio("dio-eps2");
        assert_eq!((d.sigma, d.tau, d.eps), (1.0, 1.0, 1e-2));
        assert_eq!(d.init.l_modes, 5);
        assert_eq!(d.snapshot_times, vec![5.0, 10.0, 15.0, 20.0]);
        let c = dio("dio-collisional");
        assert_eq!((c.sigma, c.tau, c.eps), (1.0, 1e-2, 1e-2));
        assert_eq!(c.snapshot_times, vec![0.1, 0.3, 0.5, 1.0]);
        assert_eq!(c.snapshot_step(0.3).unwrap(), 30);
    }

    #[test]
    fn negative_tau_names_the_field() {
        let text = preset_text("fig1a").unwrap().replace("\"tau\": 1.0", "\"tau\": -1.0");
        match parse_config(&text) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "tau"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_and_syntax_errors() {
        let text = preset_text("fig1a").unwrap().replace("\"sigma\"", "\"sigmaa\"");
        assert!(matches!(parse_config(&text), Err(Error::Parse { .. })));
        match parse_config("{\n  \"experiment\": \"benchmark\",\n  oops\n}") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_integral_step_count_is_rejected() {
        let text = preset_text("fig1a")
            .unwrap()
            .replace("\"t_final\": 3.141592653589793", "\"t_final\": 3.0");
        match parse_config(&text) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "dt"),
            other => panic!("{other:?}"),
        }
        assert_eq!(step_count(PI, PI / 30.0, "dt").unwrap(), 30);
        assert!(step_count(PI, 2.0 * PI / 15.0, "dt").is_err());
    }

    #[test]
    fn snapshot_outside_run_is_rejected() {
        let mut d = dio("dio-collisional");
        d.snapshot_times.push(1.5);
        assert!(matches!(d.validate(), Err(Error::Config { field, .. }) if field == "snapshot_times"));
    }
}
