//! Particle ensemble and the self-consistent PIC step.
//!
//! Particle loops run on rayon in fixed-size chunks. Deposition accumulates
//! one private grid per chunk and merges the chunk grids in chunk order, so
//! sums are bit-identical regardless of how many workers execute the loop.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{ElectricField, Grid2D, ScalarField, VectorField};
use crate::model::{norm, MagneticProfile, ScaleParams};
use crate::noise::NoiseStream;
use crate::poisson::{e_from_phi, solve_poisson_from, BoundaryCondition, PoissonConfig};
use crate::pushers::{PhaseState, Pusher};

/// Particles per work item in every parallel loop.
pub const CHUNK: usize = 16_384;

/// Half-width of the velocity box used to truncate initial velocities.
pub const VELOCITY_BOX: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub state: PhaseState,
    weight: f64,
    id: u64,
    alive: bool,
}

impl Particle {
    pub fn new(id: u64, state: PhaseState, weight: f64) -> Self {
        Particle {
            state,
            weight,
            id,
            alive: true,
        }
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn alive(&self) -> bool {
        self.alive
    }
}

#[derive(Debug, Clone)]
pub struct Ensemble {
    particles: Vec<Particle>,
    total_weight0: f64,
    noise: NoiseStream,
    step: u64,
}

impl Ensemble {
    /// Builds an ensemble from `(state, weight)` pairs; ids are assigned in order.
    pub fn from_states(states: impl IntoIterator<Item = (PhaseState, f64)>, rng_seed: u64) -> Result<Self> {
        let particles: Vec<Particle> = states
            .into_iter()
            .enumerate()
            .map(|(k, (s, w))| Particle::new(k as u64, s, w))
            .collect();
        if let Some(p) = particles.iter().find(|p| !(p.weight >= 0.0) || !p.weight.is_finite()) {
            return Err(Error::config("weight", format!("particle {} has weight {}", p.id, p.weight)));
        }
        let total_weight0 = particles.iter().map(|p| p.weight).sum();
        Ok(Ensemble {
            particles,
            total_weight0,
            noise: NoiseStream::new(rng_seed),
            step: 0,
        })
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn alive(&self) -> impl Iterator<Item = &Particle> {
        self.particles.iter().filter(|p| p.alive)
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn alive_count(&self) -> usize {
        self.alive().count()
    }

    pub fn total_weight0(&self) -> f64 {
        self.total_weight0
    }

    pub fn rng_seed(&self) -> u64 {
        self.noise.seed()
    }

    /// Number of completed PIC steps; also the noise counter of the next push.
    pub fn step_index(&self) -> u64 {
        self.step
    }

    /// Alive weight, summed per chunk and merged in chunk order.
    pub fn alive_weight(&self) -> f64 {
        self.particles
            .par_chunks(CHUNK)
            .map(|c| c.iter().filter(|p| p.alive).fold(0.0, |acc, p| acc + p.weight))
            .collect::<Vec<_>>()
            .into_iter()
            .fold(0.0, |acc, w| acc + w)
    }

    /// Marks particle `k` (by index) as absorbed.
    pub fn kill(&mut self, k: usize) {
        self.particles[k].alive = false;
    }
}

/// Diocotron initial data: annular density
/// `d0(x) = (1 + α cos(lθ)) exp(-4(|x| - 5)²)` on `r⁻ ≤ |x| ≤ r⁺`, and a
/// Gaussian velocity distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiocotronInit {
    pub r_minus: f64,
    pub r_plus: f64,
    pub alpha_pert: f64,
    pub l_modes: u32,
    pub sigma_v: f64,
}

impl Default for DiocotronInit {
    fn default() -> Self {
        DiocotronInit {
            r_minus: 3.5,
            r_plus: 6.5,
            alpha_pert: 0.2,
            l_modes: 5,
            sigma_v: 1.0,
        }
    }
}

impl DiocotronInit {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_minus > 0.0 && self.r_plus > self.r_minus && self.r_plus.is_finite()) {
            return Err(Error::config("init.r_minus", "need 0 < r_minus < r_plus"));
        }
        if !(0.0..1.0).contains(&self.alpha_pert) {
            return Err(Error::config("init.alpha_pert", "must lie in [0, 1)"));
        }
        if !(self.sigma_v > 0.0 && self.sigma_v.is_finite()) {
            return Err(Error::config("init.sigma_v", "must be > 0"));
        }
        Ok(())
    }

    /// Initial density `d0(x)`.
    pub fn density(&self, x: [f64; 2]) -> f64 {
        let r = norm(x);
        if r < self.r_minus || r > self.r_plus {
            return 0.0;
        }
        let theta = x[1].atan2(x[0]);
        (1.0 + self.alpha_pert * (self.l_modes as f64 * theta).cos()) * (-4.0 * (r - 5.0).powi(2)).exp()
    }

    /// `∫ d0 dx` by the midpoint rule with `n × n` cells on `[-r⁺, r⁺]²`.
    pub fn total_charge(&self, n: usize) -> f64 {
        let h = 2.0 * self.r_plus / n as f64;
        let lo = -self.r_plus;
        (0..n)
            .into_par_iter()
            .map(|i| {
                let x = lo + (i as f64 + 0.5) * h;
                (0..n)
                    .map(|j| self.density([x, lo + (j as f64 + 0.5) * h]))
                    .sum::<f64>()
            })
            .collect::<Vec<_>>()
            .iter()
            .sum::<f64>()
            * h
            * h
    }
}

/// Quadrature resolution of the total charge used for particle weights.
pub const CHARGE_QUADRATURE_CELLS: usize = 1024;

/// Samples `n_particles` markers from `f0(x, v) = d0(x)/(2π) exp(-|v|²/2)`.
///
/// Positions come from rejection sampling against the envelope
/// `(1 + α)` on the bounding square of the annulus; velocities are Gaussian
/// with variance `sigma_v` per component, redrawn outside the velocity box.
pub fn sample_initial(init: &DiocotronInit, n_particles: usize, seed: u64) -> Result<Ensemble> {
    init.validate()?;
    if n_particles == 0 {
        return Err(Error::config("n_particles", "must be >= 1"));
    }
    let q_total = init.total_charge(CHARGE_QUADRATURE_CELLS);
    let box_area = (2.0 * init.r_plus).powi(2);
    let acceptance = q_total / (box_area * (1.0 + init.alpha_pert));
    if !(acceptance >= 1e-4) {
        return Err(Error::config(
            "init",
            format!("rejection acceptance rate {acceptance:e} is below 1e-4"),
        ));
    }
    let weight = q_total / n_particles as f64;
    let normal = Normal::new(0.0, init.sigma_v.sqrt()).map_err(|e| Error::config("init.sigma_v", e.to_string()))?;
    let envelope = 1.0 + init.alpha_pert;
    let rp = init.r_plus;

    let n_chunks = n_particles.div_ceil(CHUNK);
    let chunks: Vec<Vec<Particle>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            // Separate key space from the push noise, which uses `seed` directly.
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15);
            rng.set_stream(c as u64);
            let start = c * CHUNK;
            let end = (start + CHUNK).min(n_particles);
            let mut out = Vec::with_capacity(end - start);
            for id in start..end {
                let x = loop {
                    let x = [rng.random_range(-rp..rp), rng.random_range(-rp..rp)];
                    if init.density(x) >= envelope * rng.random::<f64>() && init.density(x) > 0.0 {
                        break x;
                    }
                };
                let mut v = [0.0; 2];
                for comp in v.iter_mut() {
                    *comp = loop {
                        let s: f64 = normal.sample(&mut rng);
                        if s.abs() <= VELOCITY_BOX {
                            break s;
                        }
                    };
                }
                out.push(Particle::new(id as u64, PhaseState::new(x, v), weight));
            }
            out
        })
        .collect();
    let particles: Vec<Particle> = chunks.into_iter().flatten().collect();
    Ok(Ensemble {
        total_weight0: weight * n_particles as f64,
        particles,
        noise: NoiseStream::new(seed),
        step: 0,
    })
}

/// Scatters `value(p)` of every alive particle to the grid with bilinear
/// weights, divided by each node's control volume.
pub fn deposit_with<F>(e: &Ensemble, grid: &Grid2D, value: F) -> Result<ScalarField>
where
    F: Fn(&Particle) -> f64 + Sync,
{
    deposit_filtered(e, grid, value, |_| true)
}

fn deposit_filtered<F, P>(e: &Ensemble, grid: &Grid2D, value: F, include: P) -> Result<ScalarField>
where
    F: Fn(&Particle) -> f64 + Sync,
    P: Fn(&Particle) -> bool + Sync,
{
    let partials: Vec<Result<Vec<f64>>> = e
        .particles
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; grid.len()];
            for p in chunk.iter().filter(|p| p.alive && include(p)) {
                let cw = grid.cell_weights(p.state.x).map_err(|_| {
                    Error::Internal(format!(
                        "particle {} at ({}, {}) is outside the grid; apply boundary handling first",
                        p.id, p.state.x[0], p.state.x[1]
                    ))
                })?;
                let q = value(p);
                for (k, w) in grid.corner_indices(&cw).into_iter().zip(cw.w) {
                    acc[k] += w * q;
                }
            }
            Ok(acc)
        })
        .collect();
    let mut total = vec![0.0; grid.len()];
    for part in partials {
        for (t, a) in total.iter_mut().zip(part?) {
            *t += a;
        }
    }
    for i in 0..grid.nx {
        for j in 0..grid.ny {
            total[grid.index(i, j)] /= grid.node_volume(i, j);
        }
    }
    ScalarField::from_values(*grid, total)
}

/// Charge density `ρ` of the alive particles.
pub fn deposit_charge(e: &Ensemble, grid: &Grid2D) -> Result<ScalarField> {
    deposit_with(e, grid, |p| p.weight)
}

/// Identifies boundary nodes of a periodic grid: both copies receive the
/// combined density.
pub fn fold_periodic(rho: &mut ScalarField) {
    let g = rho.grid;
    let (nx, ny) = (g.nx, g.ny);
    // control volumes are halved on edges, so the folded density is the mean
    for j in 0..ny {
        let v = 0.5 * (rho.get(0, j) + rho.get(nx - 1, j));
        rho.set(0, j, v);
        rho.set(nx - 1, j, v);
    }
    for i in 0..nx {
        let v = 0.5 * (rho.get(i, 0) + rho.get(i, ny - 1));
        rho.set(i, 0, v);
        rho.set(i, ny - 1, v);
    }
}

/// Marks alive particles outside the closed domain as dead and returns how
/// many were removed.
pub fn apply_boundary(e: &mut Ensemble, domain: &Grid2D) -> usize {
    let mut removed = 0;
    for p in e.particles.iter_mut().filter(|p| p.alive) {
        if !domain.contains(p.state.x) {
            p.alive = false;
            removed += 1;
        }
    }
    removed
}

#[derive(Debug, Clone)]
pub struct StepReport {
    pub removed: usize,
    pub removed_weight: f64,
    pub residual: f64,
    pub iterations: usize,
    pub rho0: f64,
    pub wall_time: Duration,
}

/// Fields of the current particle positions.
#[derive(Debug, Clone)]
pub struct StepFields {
    pub rho: ScalarField,
    pub phi: ScalarField,
    pub e: VectorField,
}

/// Self-consistent field of the current positions, computed without
/// touching the ensemble. Alive particles outside the grid are listed in
/// `leaving` and excluded from the deposit.
#[derive(Debug, Clone)]
pub struct FieldSolve {
    pub leaving: Vec<usize>,
    pub removed_weight: f64,
    pub residual: f64,
    pub iterations: usize,
    pub rho0: f64,
    pub fields: StepFields,
}

pub fn solve_fields(
    e: &Ensemble,
    grid: &Grid2D,
    pcfg: &PoissonConfig,
    phi_guess: Option<&ScalarField>,
) -> Result<FieldSolve> {
    let leaving: Vec<usize> = e
        .particles
        .iter()
        .enumerate()
        .filter(|(_, q)| q.alive && !grid.contains(q.state.x))
        .map(|(k, _)| k)
        .collect();
    let removed_weight = leaving.iter().fold(0.0, |acc, &k| acc + e.particles[k].weight);
    let mut rho = deposit_filtered(e, grid, |p| p.weight, |p| grid.contains(p.state.x))?;
    if pcfg.bc == BoundaryCondition::Periodic {
        fold_periodic(&mut rho);
    }
    let sol = solve_poisson_from(&rho, pcfg, phi_guess)?;
    let field = e_from_phi(&sol.phi, pcfg.bc);
    Ok(FieldSolve {
        leaving,
        removed_weight,
        residual: sol.residual,
        iterations: sol.iterations,
        rho0: sol.rho0,
        fields: StepFields {
            rho,
            phi: sol.phi,
            e: field,
        },
    })
}

/// One PIC step: boundary → deposition → Poisson → `E = -∇φ` → push.
///
/// The field is frozen during the push and sampled at pre-push positions.
/// If the field solve or any push fails, the ensemble is left untouched.
pub fn pic_step(
    e: &mut Ensemble,
    grid: &Grid2D,
    pcfg: &PoissonConfig,
    p: &ScaleParams,
    b: &MagneticProfile,
    scheme: &dyn Pusher,
) -> Result<StepReport> {
    pic_step_from(e, grid, pcfg, p, b, scheme, None).map(|(r, _)| r)
}

/// [`pic_step`] with an optional Poisson warm start; also returns the fields
/// used for the push.
pub fn pic_step_from(
    e: &mut Ensemble,
    grid: &Grid2D,
    pcfg: &PoissonConfig,
    p: &ScaleParams,
    b: &MagneticProfile,
    scheme: &dyn Pusher,
    phi_guess: Option<&ScalarField>,
) -> Result<(StepReport, StepFields)> {
    let start = Instant::now();
    if e.particles.is_empty() {
        return Err(Error::config("ensemble", "cannot step an empty ensemble"));
    }
    let solve = solve_fields(e, grid, pcfg, phi_guess)?;
    let mut out = push_with(e, solve, grid, p, b, scheme)?;
    out.0.wall_time = start.elapsed();
    Ok(out)
}

/// Pushes every alive particle inside the grid through a precomputed field
/// solve, then marks the solve's leaving particles dead. Nothing is modified
/// if any push fails.
pub fn push_with(
    e: &mut Ensemble,
    solve: FieldSolve,
    grid: &Grid2D,
    p: &ScaleParams,
    b: &MagneticProfile,
    scheme: &dyn Pusher,
) -> Result<(StepReport, StepFields)> {
    let start = Instant::now();
    let FieldSolve {
        leaving,
        removed_weight,
        residual,
        iterations,
        rho0,
        fields,
    } = solve;
    let StepFields { rho, phi, e: field } = fields;
    let efield = ElectricField::Grid(field);

    let step = e.step;
    let noise = &e.noise;
    let pushed: Vec<PhaseState> = e
        .particles
        .par_iter()
        .map(|q| {
            if q.alive && grid.contains(q.state.x) {
                scheme.step(q.state, &efield, b, p, noise.draw(q.id, step))
            } else {
                Ok(q.state)
            }
        })
        .collect::<Result<_>>()?;

    for &k in &leaving {
        e.particles[k].alive = false;
    }
    for (q, s) in e.particles.iter_mut().zip(pushed) {
        q.state = s;
    }
    e.step += 1;

    let ElectricField::Grid(field) = efield else { unreachable!() };
    Ok((
        StepReport {
            removed: leaving.len(),
            removed_weight,
            residual,
            iterations,
            rho0,
            wall_time: start.elapsed(),
        },
        StepFields { rho, phi, e: field },
    ))
}
