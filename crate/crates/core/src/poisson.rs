//! Finite-difference solve of `-Δφ = ρ - ρ0` and `E = -∇φ` on a [`Grid2D`].
//!
//! The 5-point Laplacian is inverted with unpreconditioned conjugate
//! gradients; the returned potential always meets the relative residual
//! tolerance of the config or the call fails.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Grid2D, ScalarField, VectorField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryCondition {
    /// `φ = 0` on the boundary nodes.
    Dirichlet,
    /// Node `n-1` is identified with node `0` on both axes.
    Periodic,
}

/// Neutralizing background subtracted from the source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rho0Mode {
    Zero,
    SpatialMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoissonConfig {
    pub bc: BoundaryCondition,
    pub rho0_mode: Rho0Mode,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_tol() -> f64 {
    1e-10
}

fn default_max_iter() -> usize {
    20_000
}

impl Default for PoissonConfig {
    fn default() -> Self {
        PoissonConfig {
            bc: BoundaryCondition::Dirichlet,
            rho0_mode: Rho0Mode::SpatialMean,
            tol: default_tol(),
            max_iter: default_max_iter(),
        }
    }
}

impl PoissonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::config("poisson.tol", "must be > 0"));
        }
        if self.max_iter == 0 {
            return Err(Error::config("poisson.max_iter", "must be >= 1"));
        }
        if self.bc == BoundaryCondition::Periodic && self.rho0_mode != Rho0Mode::SpatialMean {
            return Err(Error::config(
                "poisson.rho0_mode",
                "periodic boundary conditions require rho0_mode = spatial-mean",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PoissonSolution {
    pub phi: ScalarField,
    /// Background actually subtracted.
    pub rho0: f64,
    /// Final relative residual `‖b - Aφ‖ / ‖b‖`.
    pub residual: f64,
    pub iterations: usize,
}

/// Unknowns of the discrete problem: interior nodes (Dirichlet) or the
/// unique nodes of the torus (periodic).
struct Laplacian {
    mx: usize,
    my: usize,
    periodic: bool,
    cx: f64,
    cy: f64,
}

impl Laplacian {
    fn new(grid: &Grid2D, bc: BoundaryCondition) -> Self {
        let periodic = bc == BoundaryCondition::Periodic;
        let (mx, my) = if periodic {
            (grid.nx - 1, grid.ny - 1)
        } else {
            (grid.nx - 2, grid.ny - 2)
        };
        Laplacian {
            mx,
            my,
            periodic,
            cx: 1.0 / (grid.hx * grid.hx),
            cy: 1.0 / (grid.hy * grid.hy),
        }
    }

    fn len(&self) -> usize {
        self.mx * self.my
    }

    /// Grid node of unknown `(a, b)`.
    fn node(&self, a: usize, b: usize) -> (usize, usize) {
        if self.periodic {
            (a, b)
        } else {
            (a + 1, b + 1)
        }
    }

    /// `out = -Δ_h x`
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let (mx, my) = (self.mx, self.my);
        let diag = 2.0 * (self.cx + self.cy);
        for a in 0..mx {
            for b in 0..my {
                let k = a * my + b;
                let (left, right, down, up) = if self.periodic {
                    (
                        x[((a + mx - 1) % mx) * my + b],
                        x[((a + 1) % mx) * my + b],
                        x[a * my + (b + my - 1) % my],
                        x[a * my + (b + 1) % my],
                    )
                } else {
                    (
                        if a > 0 { x[k - my] } else { 0.0 },
                        if a + 1 < mx { x[k + my] } else { 0.0 },
                        if b > 0 { x[k - 1] } else { 0.0 },
                        if b + 1 < my { x[k + 1] } else { 0.0 },
                    )
                };
                out[k] = diag * x[k] - self.cx * (left + right) - self.cy * (down + up);
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn remove_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

/// Background value for `mode`: zero or the domain average of `rho`.
pub fn background(rho: &ScalarField, mode: Rho0Mode) -> f64 {
    match mode {
        Rho0Mode::Zero => 0.0,
        Rho0Mode::SpatialMean => rho.integral() / rho.grid.area(),
    }
}

/// Solves `-Δ_h φ = ρ - ρ0`.
pub fn solve_poisson(rho: &ScalarField, cfg: &PoissonConfig) -> Result<ScalarField> {
    solve_poisson_from(rho, cfg, None).map(|s| s.phi)
}

/// As [`solve_poisson`], starting the iteration from `guess` when given and
/// reporting the residual and iteration count.
pub fn solve_poisson_from(
    rho: &ScalarField,
    cfg: &PoissonConfig,
    guess: Option<&ScalarField>,
) -> Result<PoissonSolution> {
    cfg.validate()?;
    let grid = rho.grid;
    if rho.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("charge density contains non-finite values".into()));
    }
    let op = Laplacian::new(&grid, cfg.bc);
    let rho0 = background(rho, cfg.rho0_mode);

    let mut rhs = vec![0.0; op.len()];
    for a in 0..op.mx {
        for b in 0..op.my {
            let (i, j) = op.node(a, b);
            rhs[a * op.my + b] = rho.get(i, j) - rho0;
        }
    }
    if op.periodic {
        let mean = rhs.iter().sum::<f64>() / rhs.len() as f64;
        let scale = rho.max_abs().max(1.0);
        if mean.abs() > 1e-12 * scale {
            return Err(Error::Domain(format!(
                "periodic source has nonzero mean {mean:e}; the problem is incompatible"
            )));
        }
        remove_mean(&mut rhs);
    }

    let bnorm = dot(&rhs, &rhs).sqrt();
    let mut phi = ScalarField::zeros(grid);
    if bnorm == 0.0 {
        return Ok(PoissonSolution {
            phi,
            rho0,
            residual: 0.0,
            iterations: 0,
        });
    }

    let mut x = vec![0.0; op.len()];
    if let Some(g) = guess {
        if g.grid == grid {
            for a in 0..op.mx {
                for b in 0..op.my {
                    let (i, j) = op.node(a, b);
                    x[a * op.my + b] = g.get(i, j);
                }
            }
            if op.periodic {
                remove_mean(&mut x);
            }
        }
    }

    let (iterations, residual) = conjugate_gradient(&op, &rhs, &mut x, bnorm, cfg)?;

    for a in 0..op.mx {
        for b in 0..op.my {
            let (i, j) = op.node(a, b);
            phi.set(i, j, x[a * op.my + b]);
        }
    }
    if op.periodic {
        for j in 0..grid.ny - 1 {
            let v = phi.get(0, j);
            phi.set(grid.nx - 1, j, v);
        }
        for i in 0..grid.nx {
            let v = phi.get(i, 0);
            phi.set(i, grid.ny - 1, v);
        }
    }
    Ok(PoissonSolution {
        phi,
        rho0,
        residual,
        iterations,
    })
}

fn conjugate_gradient(
    op: &Laplacian,
    rhs: &[f64],
    x: &mut [f64],
    bnorm: f64,
    cfg: &PoissonConfig,
) -> Result<(usize, f64)> {
    let n = rhs.len();
    let mut ax = vec![0.0; n];
    op.apply(x, &mut ax);
    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    if op.periodic {
        remove_mean(&mut r);
    }
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    let mut it = 0;
    while rr.sqrt() > cfg.tol * bnorm {
        if it == cfg.max_iter {
            return Err(Error::Solver {
                iterations: it,
                residual: rr.sqrt() / bnorm,
            });
        }
        op.apply(&p, &mut ap);
        let alpha = rr / dot(&p, &ap);
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let rr_new = dot(&r, &r);
        // Refresh the recursive residual periodically to bound drift.
        if (it + 1) % 50 == 0 {
            op.apply(x, &mut ax);
            for k in 0..n {
                r[k] = rhs[k] - ax[k];
            }
            if op.periodic {
                remove_mean(&mut r);
            }
        }
        let rr_next = if (it + 1) % 50 == 0 { dot(&r, &r) } else { rr_new };
        let beta = rr_next / rr;
        for k in 0..n {
            p[k] = r[k] + beta * p[k];
        }
        rr = rr_next;
        it += 1;
    }
    // True residual of the returned iterate.
    op.apply(x, &mut ax);
    let mut true_r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    if op.periodic {
        remove_mean(x);
        remove_mean(&mut true_r);
    }
    let residual = dot(&true_r, &true_r).sqrt() / bnorm;
    if residual > cfg.tol {
        return Err(Error::Solver { iterations: it, residual });
    }
    Ok((it, residual))
}

/// `E = -∇φ`: central differences inside, one-sided second-order
/// differences on Dirichlet boundaries, wrapped differences for periodic.
pub fn e_from_phi(phi: &ScalarField, bc: BoundaryCondition) -> VectorField {
    let g = phi.grid;
    let (nx, ny) = (g.nx, g.ny);
    let mut e = VectorField::zeros(g);
    let dx = |i: usize, j: usize| -> f64 {
        if i > 0 && i < nx - 1 {
            (phi.get(i + 1, j) - phi.get(i - 1, j)) / (2.0 * g.hx)
        } else if bc == BoundaryCondition::Periodic {
            (phi.get(1, j) - phi.get(nx - 2, j)) / (2.0 * g.hx)
        } else if i == 0 {
            (-3.0 * phi.get(0, j) + 4.0 * phi.get(1, j) - phi.get(2, j)) / (2.0 * g.hx)
        } else {
            (3.0 * phi.get(nx - 1, j) - 4.0 * phi.get(nx - 2, j) + phi.get(nx - 3, j)) / (2.0 * g.hx)
        }
    };
    let dy = |i: usize, j: usize| -> f64 {
        if j > 0 && j < ny - 1 {
            (phi.get(i, j + 1) - phi.get(i, j - 1)) / (2.0 * g.hy)
        } else if bc == BoundaryCondition::Periodic {
            (phi.get(i, 1) - phi.get(i, ny - 2)) / (2.0 * g.hy)
        } else if j == 0 {
            (-3.0 * phi.get(i, 0) + 4.0 * phi.get(i, 1) - phi.get(i, 2)) / (2.0 * g.hy)
        } else {
            (3.0 * phi.get(i, ny - 1) - 4.0 * phi.get(i, ny - 2) + phi.get(i, ny - 3)) / (2.0 * g.hy)
        }
    };
    for i in 0..nx {
        for j in 0..ny {
            e.values[g.index(i, j)] = [-dx(i, j), -dy(i, j)];
        }
    }
    e
}

/// Relative residual `‖(ρ - ρ0) + Δ_h φ‖ / ‖ρ - ρ0‖` over the unknown nodes.
pub fn discrete_residual(phi: &ScalarField, rho: &ScalarField, cfg: &PoissonConfig) -> f64 {
    let op = Laplacian::new(&phi.grid, cfg.bc);
    let rho0 = background(rho, cfg.rho0_mode);
    let mut x = vec![0.0; op.len()];
    let mut b = vec![0.0; op.len()];
    for a in 0..op.mx {
        for c in 0..op.my {
            let (i, j) = op.node(a, c);
            x[a * op.my + c] = phi.get(i, j);
            b[a * op.my + c] = rho.get(i, j) - rho0;
        }
    }
    if op.periodic {
        remove_mean(&mut b);
    }
    let mut ax = vec![0.0; op.len()];
    op.apply(&x, &mut ax);
    let r: f64 = b.iter().zip(&ax).map(|(bb, a)| (bb - a).powi(2)).sum::<f64>().sqrt();
    let bn = dot(&b, &b).sqrt();
    if bn == 0.0 {
        r
    } else {
        r / bn
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn periodic_cfg() -> PoissonConfig {
        PoissonConfig {
            bc: BoundaryCondition::Periodic,
            ..PoissonConfig::default()
        }
    }

    #[test]
    fn zero_source_gives_zero_potential() {
        let g = Grid2D::square(0.0, 1.0, 9).unwrap();
        let rho = ScalarField::from_fn(g, |_| 0.7);
        for cfg in [PoissonConfig::default(), periodic_cfg()] {
            let phi = solve_poisson(&rho, &cfg).unwrap();
            assert!(phi.max_abs() < 1e-14);
        }
        let zero_bg = PoissonConfig {
            rho0_mode: Rho0Mode::Zero,
            ..PoissonConfig::default()
        };
        let phi = solve_poisson(&ScalarField::zeros(g), &zero_bg).unwrap();
        assert!(phi.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn periodic_requires_mean_background() {
        let cfg = PoissonConfig {
            bc: BoundaryCondition::Periodic,
            rho0_mode: Rho0Mode::Zero,
            ..PoissonConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config { .. })));
    }

    #[test]
    fn incompatible_periodic_source_is_rejected() {
        let g = Grid2D::square(0.0, 1.0, 9).unwrap();
        // Not periodic-consistent: the x = 1 column differs from x = 0.
        let rho = ScalarField::from_fn(g, |x| if x[0] == 1.0 { 5.0 } else { 0.0 });
        assert!(matches!(solve_poisson(&rho, &periodic_cfg()), Err(Error::Domain(_))));
    }

    #[test]
    fn dirichlet_boundary_and_residual() {
        let g = Grid2D::square(0.0, 1.0, 17).unwrap();
        let rho = ScalarField::from_fn(g, |x| (3.0 * x[0]).sin() + x[1] * x[1]);
        let cfg = PoissonConfig::default();
        let sol = solve_poisson_from(&rho, &cfg, None).unwrap();
        assert!(sol.residual <= cfg.tol);
        assert!(discrete_residual(&sol.phi, &rho, &cfg) <= cfg.tol);
        for k in 0..17 {
            for (i, j) in [(0, k), (16, k), (k, 0), (k, 16)] {
                assert_eq!(sol.phi.get(i, j), 0.0);
            }
        }
    }

    #[test]
    fn non_convergence_reports_residual() {
        let g = Grid2D::square(0.0, 1.0, 33).unwrap();
        // generic source, not a discrete eigenvector
        let rho = ScalarField::from_fn(g, |x| (7.0 * x[0] * x[1]).exp() + x[0]);
        let cfg = PoissonConfig {
            max_iter: 3,
            rho0_mode: Rho0Mode::Zero,
            ..PoissonConfig::default()
        };
        match solve_poisson(&rho, &cfg) {
            Err(Error::Solver { iterations, residual }) => {
                assert_eq!(iterations, 3);
                assert!(residual > cfg.tol);
            }
            other => panic!("expected solver error, got {:?}", other.map(|f| f.max_abs())),
        }
    }

    #[test]
    fn periodic_gauge_is_zero_mean() {
        let g = Grid2D::square(0.0, 2.0 * PI, 33).unwrap();
        let rho = ScalarField::from_fn(g, |x| x[0].cos() + x[1].cos());
        let phi = solve_poisson(&rho, &periodic_cfg()).unwrap();
        let n = 32;
        let mean: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| phi.get(i, j)).sum::<f64>()
            / (n * n) as f64;
        assert!(mean.abs() < 1e-12);
    }

    #[test]
    fn gradient_of_simple_data() {
        let g = Grid2D::square(0.0, 1.0, 9).unwrap();
        let c = ScalarField::from_fn(g, |_| 2.5);
        for bc in [BoundaryCondition::Dirichlet, BoundaryCondition::Periodic] {
            assert!(e_from_phi(&c, bc).values.iter().all(|v| v[0] == 0.0 && v[1] == 0.0));
        }
        let lin = ScalarField::from_fn(g, |x| x[0]);
        let e = e_from_phi(&lin, BoundaryCondition::Dirichlet);
        for i in 0..9 {
            for j in 0..9 {
                let v = e.get(i, j);
                assert!((v[0] + 1.0).abs() < 1e-12 && v[1].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn warm_start_converges_immediately() {
        let g = Grid2D::square(0.0, 1.0, 17).unwrap();
        let rho = ScalarField::from_fn(g, |x| (PI * x[0]).sin() * (PI * x[1]).sin());
        let cfg = PoissonConfig {
            rho0_mode: Rho0Mode::Zero,
            ..PoissonConfig::default()
        };
        let cold = solve_poisson_from(&rho, &cfg, None).unwrap();
        let warm = solve_poisson_from(&rho, &cfg, Some(&cold.phi)).unwrap();
        assert!(warm.iterations <= 1);
    }
}
