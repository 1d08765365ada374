//! Moments, conserved functionals, error metrics and slope fits.
//!
//! Energy and entropy balances are the two-dimensional ones: the collision
//! operator contributes `(2σQ - ∫|v|²f)/τ` to `dH/dt` and
//! `(2Q - σ∫|∇_v f|²/f)/τ` to `dS/dt` (rates in the unscaled time; divide by
//! `ε` in the scaled system).

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::fields::{ElectricField, Grid2D, ScalarField, VectorField};
use crate::model::{mat_r, norm, scale, sub, MagneticProfile, Vec2};
use crate::pic::{deposit_charge, deposit_with, Ensemble, CHUNK};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConservedReport {
    pub t: f64,
    /// Total charge `Q`.
    pub q: f64,
    /// Energy `H`: kinetic plus field.
    pub h: f64,
    pub s_est: Option<f64>,
}

/// `ρ` and `J` of the alive particles.
pub fn moments(e: &Ensemble, grid: &Grid2D) -> Result<(ScalarField, VectorField)> {
    let rho = deposit_charge(e, grid)?;
    let jx = deposit_with(e, grid, |p| p.weight() * p.state.v[0])?;
    let jy = deposit_with(e, grid, |p| p.weight() * p.state.v[1])?;
    let j = VectorField {
        grid: *grid,
        values: jx.values.iter().zip(&jy.values).map(|(a, b)| [*a, *b]).collect(),
    };
    Ok((rho, j))
}

pub fn total_charge(e: &Ensemble) -> f64 {
    e.alive_weight()
}

/// `½ Σ α|v|²` over alive particles, reduced in fixed chunk order.
pub fn kinetic_energy(e: &Ensemble) -> f64 {
    0.5 * e
        .particles()
        .par_chunks(CHUNK)
        .map(|c| {
            c.iter()
                .filter(|p| p.alive())
                .map(|p| p.weight() * (p.state.v[0].powi(2) + p.state.v[1].powi(2)))
                .sum::<f64>()
        })
        .collect::<Vec<_>>()
        .iter()
        .sum::<f64>()
}

/// `½ ∫ |E|²` by the trapezoidal rule.
pub fn field_energy(field: &VectorField) -> f64 {
    let g = field.grid;
    let mut acc = 0.0;
    for i in 0..g.nx {
        for j in 0..g.ny {
            let v = field.get(i, j);
            acc += (v[0] * v[0] + v[1] * v[1]) * g.node_volume(i, j);
        }
    }
    0.5 * acc
}

pub fn total_energy(e: &Ensemble, field: &VectorField) -> f64 {
    kinetic_energy(e) + field_energy(field)
}

/// Collisional energy production `(2σQ - Σα|v|²)/τ` of the 2D+2V model.
pub fn energy_collision_rate(e: &Ensemble, sigma: f64, tau: f64) -> f64 {
    (2.0 * sigma * total_charge(e) - 2.0 * kinetic_energy(e)) / tau
}

/// Bins of the phase-space histogram used by [`entropy_estimate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramConfig {
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    pub vx_range: [f64; 2],
    pub vy_range: [f64; 2],
    pub bins: [usize; 4],
}

impl Default for HistogramConfig {
    fn default() -> Self {
        HistogramConfig {
            x_range: [-8.0, 8.0],
            y_range: [-8.0, 8.0],
            vx_range: [-4.0, 4.0],
            vy_range: [-4.0, 4.0],
            bins: [16; 4],
        }
    }
}

impl HistogramConfig {
    fn cell_volume(&self) -> f64 {
        [self.x_range, self.y_range, self.vx_range, self.vy_range]
            .iter()
            .zip(self.bins)
            .map(|(r, n)| (r[1] - r[0]) / n as f64)
            .product()
    }

    /// Bin of one coordinate; values outside the range go to the edge bin.
    fn bin(range: [f64; 2], n: usize, x: f64) -> usize {
        let s = ((x - range[0]) / (range[1] - range[0]) * n as f64).floor();
        s.clamp(0.0, (n - 1) as f64) as usize
    }
}

/// Histogram estimate of `S = ∫ f ln f dx dv`. Empty cells contribute zero.
pub fn entropy_estimate(e: &Ensemble, bins: &HistogramConfig) -> f64 {
    let [nx, ny, nu, nv] = bins.bins;
    let mut counts = vec![0.0; nx * ny * nu * nv];
    for p in e.alive() {
        let s = p.state;
        let k = ((HistogramConfig::bin(bins.x_range, nx, s.x[0]) * ny
            + HistogramConfig::bin(bins.y_range, ny, s.x[1]))
            * nu
            + HistogramConfig::bin(bins.vx_range, nu, s.v[0]))
            * nv
            + HistogramConfig::bin(bins.vy_range, nv, s.v[1]);
        counts[k] += p.weight();
    }
    let vol = bins.cell_volume();
    counts
        .iter()
        .filter(|&&w| w > 0.0)
        .map(|&w| w * (w / vol).ln())
        .sum()
}

/// `z = ε⁻¹ v - R(x_prev) E(x_prev)`: distance of a particle from the drift
/// manifold.
pub fn slow_manifold_deviation(
    x_prev: Vec2,
    v: Vec2,
    field: &ElectricField,
    b: &MagneticProfile,
    eps: f64,
    tau: f64,
) -> Result<Vec2> {
    let r = mat_r(x_prev, b, eps, tau)?;
    Ok(sub(scale(1.0 / eps, v), r.apply(field.eval(x_prev)?)))
}

/// Componentwise `|x - u|`.
pub fn traj_error(x_n: Vec2, u_n: Vec2) -> Vec2 {
    [(x_n[0] - u_n[0]).abs(), (x_n[1] - u_n[1]).abs()]
}

/// Running mean and variance (Welford) of 2-vectors.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Moments2 {
    pub n: usize,
    pub mean: Vec2,
    m2: Vec2,
}

impl Moments2 {
    #[allow(clippy::needless_range_loop)]
    pub fn push(&mut self, x: Vec2) {
        self.n += 1;
        let nf = self.n as f64;
        for k in 0..2 {
            let d = x[k] - self.mean[k];
            self.mean[k] += d / nf;
            self.m2[k] += d * (x[k] - self.mean[k]);
        }
    }

    /// Chan et al. pairwise merge.
    pub fn merge(&mut self, other: &Moments2) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        for k in 0..2 {
            let d = other.mean[k] - self.mean[k];
            self.mean[k] += d * nb / n;
            self.m2[k] += other.m2[k] + d * d * na * nb / n;
        }
        self.n += other.n;
    }

    /// Unbiased sample variance per component.
    pub fn variance(&self) -> Vec2 {
        if self.n < 2 {
            return [0.0, 0.0];
        }
        let d = (self.n - 1) as f64;
        [self.m2[0] / d, self.m2[1] / d]
    }

    /// Standard error of the mean per component.
    pub fn std_error(&self) -> Vec2 {
        let v = self.variance();
        let n = self.n as f64;
        [(v[0] / n).sqrt(), (v[1] / n).sqrt()]
    }
}

/// Terminal states of a set of Brownian paths with their running statistics.
#[derive(Debug, Clone, Default)]
pub struct PathBundle {
    pub terminal: Vec<Vec2>,
    pub stats: Moments2,
    /// Largest absolute noise component seen on any path.
    pub m_xi: f64,
}

impl PathBundle {
    pub fn push(&mut self, x_n: Vec2, max_xi: f64) {
        self.terminal.push(x_n);
        self.stats.push(x_n);
        self.m_xi = self.m_xi.max(max_xi);
    }

    pub fn n_paths(&self) -> usize {
        self.stats.n
    }

    /// Appends `other`; the merge order must be fixed for reproducible sums.
    pub fn extend(&mut self, other: PathBundle) {
        self.stats.merge(&other.stats);
        self.terminal.extend(other.terminal);
        self.m_xi = self.m_xi.max(other.m_xi);
    }

    pub fn mean(&self) -> Vec2 {
        self.stats.mean
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpectationError {
    pub error: Vec2,
    pub std_error: Vec2,
}

/// `|mean(x^N) - u^N|` per component with the Monte Carlo standard error.
pub fn expectation_error(bundle: &PathBundle, u_n: Vec2) -> Result<ExpectationError> {
    if bundle.n_paths() < 2 {
        return Err(Error::Diagnostic(format!(
            "expectation error needs at least 2 paths, got {}",
            bundle.n_paths()
        )));
    }
    Ok(ExpectationError {
        error: traj_error(bundle.mean(), u_n),
        std_error: bundle.stats.std_error(),
    })
}

/// One component of an error table against a monotone abscissa (ε or Δt).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorSeries {
    pub abscissae: Vec<f64>,
    pub errors: Vec<f64>,
    /// Monte Carlo standard errors; points under the noise floor are dropped.
    pub std_errors: Option<Vec<f64>>,
}

impl ErrorSeries {
    pub fn new(abscissae: Vec<f64>, errors: Vec<f64>) -> Result<Self> {
        Self::with_std_errors(abscissae, errors, None)
    }

    pub fn with_std_errors(abscissae: Vec<f64>, errors: Vec<f64>, std_errors: Option<Vec<f64>>) -> Result<Self> {
        if abscissae.len() != errors.len() || std_errors.as_ref().is_some_and(|s| s.len() != errors.len()) {
            return Err(Error::Diagnostic("error series columns differ in length".into()));
        }
        let inc = abscissae.windows(2).all(|w| w[1] > w[0]);
        let dec = abscissae.windows(2).all(|w| w[1] < w[0]);
        if !(inc || dec) {
            return Err(Error::Diagnostic("abscissae must be strictly monotone".into()));
        }
        if errors.iter().any(|e| !(*e >= 0.0)) {
            return Err(Error::Diagnostic("errors must be nonnegative".into()));
        }
        Ok(ErrorSeries {
            abscissae,
            errors,
            std_errors,
        })
    }
}

/// Least-squares log-log slope with its 95% confidence interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub intercept: f64,
    /// Indices used in the fit.
    pub used: Vec<usize>,
    /// Indices dropped as zero or below the noise floor.
    pub excluded: Vec<usize>,
}

/// Factor of the standard error below which a point is treated as noise.
pub const NOISE_FLOOR_FACTOR: f64 = 3.0;

/// Ordinary least squares on `(ln abscissa, ln error)`.
pub fn convergence_slope(series: &ErrorSeries) -> Result<SlopeFit> {
    let mut used = vec![];
    let mut excluded = vec![];
    for (k, &err) in series.errors.iter().enumerate() {
        let floor = series
            .std_errors
            .as_ref()
            .map_or(0.0, |s| NOISE_FLOOR_FACTOR * s[k]);
        if err > 0.0 && err >= floor {
            used.push(k);
        } else {
            excluded.push(k);
        }
    }
    if used.len() < 3 {
        return Err(Error::Diagnostic(format!(
            "slope fit needs at least 3 usable points, got {} ({} excluded)",
            used.len(),
            excluded.len()
        )));
    }
    let xs: Vec<f64> = used.iter().map(|&k| series.abscissae[k].ln()).collect();
    let ys: Vec<f64> = used.iter().map(|&k| series.errors[k].ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let dof = n - 2.0;
    let se = (sse / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| Error::Diagnostic(e.to_string()))?
        .inverse_cdf(0.975);
    Ok(SlopeFit {
        slope,
        ci_low: slope - t * se,
        ci_high: slope + t * se,
        intercept,
        used,
        excluded,
    })
}

/// Radial band of the azimuthal diagnostic; samples are taken on the
/// central circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct RadiusBand {
    pub r_inner: f64,
    pub r_outer: f64,
}

impl RadiusBand {
    pub fn center(&self) -> f64 {
        0.5 * (self.r_inner + self.r_outer)
    }
}

/// Angles sampled by [`mode_amplitude`].
pub const MODE_SAMPLES: usize = 512;

/// Relative amplitude of azimuthal mode `l`:
/// `|(2/N) Σ ρ(r, θ_j) e^{-ilθ_j}| / mean(ρ)` at the band's central radius.
pub fn mode_amplitude(rho: &ScalarField, l: u32, band: &RadiusBand) -> Result<f64> {
    if l == 0 {
        return Err(Error::Diagnostic("mode number must be >= 1".into()));
    }
    let r = band.center();
    let n = MODE_SAMPLES;
    let (mut re, mut im, mut sum) = (0.0, 0.0, 0.0);
    for k in 0..n {
        let theta = std::f64::consts::TAU * k as f64 / n as f64;
        let val = rho.sample([r * theta.cos(), r * theta.sin()])?;
        let phase = l as f64 * theta;
        re += val * phase.cos();
        im -= val * phase.sin();
        sum += val;
    }
    let mean = sum / n as f64;
    if mean.abs() <= f64::MIN_POSITIVE {
        return Err(Error::Diagnostic(format!("zero mean density on the circle r = {r}")));
    }
    Ok(2.0 / n as f64 * re.hypot(im) / mean)
}

/// Fraction of the alive charge outside the closed annulus `[r_inner, r_outer]`.
pub fn exterior_fraction(e: &Ensemble, band: &RadiusBand) -> f64 {
    let total = total_charge(e);
    if total == 0.0 {
        return 0.0;
    }
    let outside: f64 = e
        .alive()
        .filter(|p| {
            let r = norm(p.state.x);
            r < band.r_inner || r > band.r_outer
        })
        .fold(0.0, |acc, p| acc + p.weight());
    outside / total
}
