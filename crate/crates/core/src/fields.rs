//! Grids, nodal fields and electric-field sources.
//!
//! Nodal arrays are stored row-major by x-index then y-index: node `(i, j)`
//! lives at `i * ny + j`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MagneticProfile, Vec2};

/// Uniform node-centred rectangular mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
}

/// Bilinear (cloud-in-cell) stencil of one point: the lower-left node of
/// its cell and the weights of the four cell corners, ordered
/// `(i,j), (i+1,j), (i,j+1), (i+1,j+1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellWeights {
    pub i: usize,
    pub j: usize,
    pub w: [f64; 4],
}

impl Grid2D {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64, nx: usize, ny: usize) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::config("grid", format!("need at least 3x3 nodes, got {nx}x{ny}")));
        }
        if !(xmax > xmin) || !(ymax > ymin) || ![xmin, xmax, ymin, ymax].iter().all(|v| v.is_finite()) {
            return Err(Error::config("grid", "bounds must be finite with max > min"));
        }
        Ok(Grid2D {
            xmin,
            xmax,
            ymin,
            ymax,
            nx,
            ny,
            hx: (xmax - xmin) / (nx - 1) as f64,
            hy: (ymax - ymin) / (ny - 1) as f64,
        })
    }

    /// Square grid with `n × n` nodes on `[lo, hi]²`.
    pub fn square(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::new(lo, hi, lo, hi, n, n)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.ny + j
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> Vec2 {
        [self.xmin + i as f64 * self.hx, self.ymin + j as f64 * self.hy]
    }

    pub fn area(&self) -> f64 {
        (self.xmax - self.xmin) * (self.ymax - self.ymin)
    }

    /// Closed-domain membership test.
    #[inline]
    pub fn contains(&self, x: Vec2) -> bool {
        x[0] >= self.xmin && x[0] <= self.xmax && x[1] >= self.ymin && x[1] <= self.ymax
    }

    /// Trapezoidal area weight of node `(i, j)`: 1 inside, ½ on edges, ¼ at corners.
    #[inline]
    pub fn node_area_weight(&self, i: usize, j: usize) -> f64 {
        let wx = if i == 0 || i == self.nx - 1 { 0.5 } else { 1.0 };
        let wy = if j == 0 || j == self.ny - 1 { 0.5 } else { 1.0 };
        wx * wy
    }

    /// Control-volume area of node `(i, j)`.
    #[inline]
    pub fn node_volume(&self, i: usize, j: usize) -> f64 {
        self.hx * self.hy * self.node_area_weight(i, j)
    }

    /// Bilinear weights at `x`; out-of-domain points are a domain error.
    #[inline]
    pub fn cell_weights(&self, x: Vec2) -> Result<CellWeights> {
        if !self.contains(x) {
            return Err(Error::Domain(format!(
                "point ({}, {}) outside grid [{}, {}]x[{}, {}]",
                x[0], x[1], self.xmin, self.xmax, self.ymin, self.ymax
            )));
        }
        let sx = (x[0] - self.xmin) / self.hx;
        let sy = (x[1] - self.ymin) / self.hy;
        let i = (sx.floor() as usize).min(self.nx - 2);
        let j = (sy.floor() as usize).min(self.ny - 2);
        let fx = sx - i as f64;
        let fy = sy - j as f64;
        Ok(CellWeights {
            i,
            j,
            w: [(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy],
        })
    }

    /// Flat indices of the four corners matching [`CellWeights::w`].
    #[inline]
    pub fn corner_indices(&self, cw: &CellWeights) -> [usize; 4] {
        let base = self.index(cw.i, cw.j);
        [base, base + self.ny, base + 1, base + self.ny + 1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid2D,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid2D) -> Self {
        ScalarField {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn(Vec2) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.nx {
            for j in 0..grid.ny {
                values.push(f(grid.node(i, j)));
            }
        }
        ScalarField { grid, values }
    }

    pub fn from_values(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Internal(format!(
                "scalar field needs {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(ScalarField { grid, values })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.grid.index(i, j);
        self.values[k] = v;
    }

    pub fn sample(&self, x: Vec2) -> Result<f64> {
        let cw = self.grid.cell_weights(x)?;
        let idx = self.grid.corner_indices(&cw);
        Ok(idx.iter().zip(cw.w).map(|(&k, w)| w * self.values[k]).sum())
    }

    /// Trapezoidal integral over the grid domain.
    pub fn integral(&self) -> f64 {
        let g = &self.grid;
        let mut acc = 0.0;
        for i in 0..g.nx {
            for j in 0..g.ny {
                acc += self.get(i, j) * g.node_volume(i, j);
            }
        }
        acc
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub grid: Grid2D,
    pub values: Vec<Vec2>,
}

impl VectorField {
    pub fn zeros(grid: Grid2D) -> Self {
        VectorField {
            grid,
            values: vec![[0.0, 0.0]; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn(Vec2) -> Vec2) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.nx {
            for j in 0..grid.ny {
                values.push(f(grid.node(i, j)));
            }
        }
        VectorField { grid, values }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Vec2 {
        self.values[self.grid.index(i, j)]
    }

    #[inline]
    pub fn sample(&self, x: Vec2) -> Result<Vec2> {
        let cw = self.grid.cell_weights(x)?;
        let idx = self.grid.corner_indices(&cw);
        let mut out = [0.0, 0.0];
        for (&k, w) in idx.iter().zip(cw.w) {
            let v = self.values[k];
            out[0] += w * v[0];
            out[1] += w * v[1];
        }
        Ok(out)
    }
}

type FieldFn = Arc<dyn Fn(Vec2) -> Vec2 + Send + Sync>;

/// Source of the electric field seen by a particle.
#[derive(Clone)]
pub enum ElectricField {
    Analytic(FieldFn),
    Grid(VectorField),
}

impl fmt::Debug for ElectricField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ElectricField::Analytic(_) => f.write_str("ElectricField::Analytic"),
            ElectricField::Grid(v) => write!(f, "ElectricField::Grid({}x{})", v.grid.nx, v.grid.ny),
        }
    }
}

impl ElectricField {
    pub fn analytic<F>(f: F) -> Self
    where
        F: Fn(Vec2) -> Vec2 + Send + Sync + 'static,
    {
        ElectricField::Analytic(Arc::new(f))
    }

    /// The benchmark closure `E(x) = -x`.
    pub fn benchmark() -> Self {
        Self::analytic(|x| [-x[0], -x[1]])
    }

    pub fn zero() -> Self {
        Self::analytic(|_| [0.0, 0.0])
    }

    #[inline]
    pub fn eval(&self, x: Vec2) -> Result<Vec2> {
        match self {
            ElectricField::Analytic(f) => Ok(f(x)),
            ElectricField::Grid(v) => v.sample(x),
        }
    }
}

/// `b̃(εx)` for the given profile.
#[inline]
pub fn eval_b(profile: &MagneticProfile, x: Vec2, eps: f64) -> f64 {
    profile.eval(x, eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_grid(n: usize) -> Grid2D {
        Grid2D::square(0.0, 1.0, n).unwrap()
    }

    #[test]
    fn analytic_benchmark_field() {
        let e = ElectricField::benchmark();
        assert_eq!(e.eval([0.3, 0.2]).unwrap(), [-0.3, -0.2]);
    }

    #[test]
    fn grid_field_reproduces_constants() {
        let g = unit_grid(5);
        let e = ElectricField::Grid(VectorField::from_fn(g, |_| [2.0, -1.0]));
        let v = e.eval([0.37, 0.81]).unwrap();
        assert!((v[0] - 2.0).abs() < 1e-13 && (v[1] + 1.0).abs() < 1e-13);
    }

    #[test]
    fn grid_field_reproduces_linear_data() {
        let g = unit_grid(5);
        let e = ElectricField::Grid(VectorField::from_fn(g, |x| [x[0], 2.0 * x[1]]));
        let v = e.eval([0.25, 0.75]).unwrap();
        assert!((v[0] - 0.25).abs() < 1e-13 && (v[1] - 1.5).abs() < 1e-13);
    }

    #[test]
    fn bilinear_exact_on_bilinear_data() {
        let g = Grid2D::new(-1.0, 2.0, 0.5, 1.5, 7, 4).unwrap();
        let f = |x: Vec2| 1.0 + 2.0 * x[0] - 0.5 * x[1] + 3.0 * x[0] * x[1];
        let s = ScalarField::from_fn(g, f);
        for x in [[-1.0, 0.5], [2.0, 1.5], [0.123, 1.01], [1.999, 0.51]] {
            assert!((s.sample(x).unwrap() - f(x)).abs() < 1e-13);
        }
    }

    #[test]
    fn out_of_domain_is_error() {
        let g = unit_grid(4);
        let e = ElectricField::Grid(VectorField::zeros(g));
        assert!(matches!(e.eval([1.01, 0.5]), Err(Error::Domain(_))));
        assert!(e.eval([1.0, 1.0]).is_ok());
    }

    #[test]
    fn grid_validation() {
        assert!(Grid2D::new(0.0, 1.0, 0.0, 1.0, 2, 5).is_err());
        assert!(Grid2D::new(1.0, 0.0, 0.0, 1.0, 5, 5).is_err());
        let g = Grid2D::new(-8.0, 8.0, -8.0, 8.0, 129, 129).unwrap();
        assert_eq!(g.hx, 0.125);
        assert_eq!(g.node(128, 0), [8.0, -8.0]);
    }

    #[test]
    fn eval_b_examples() {
        let b = MagneticProfile::benchmark();
        assert_eq!(eval_b(&b, [0.0, 0.0], 0.01), 1.0);
        let u = MagneticProfile::uniform(3.0).unwrap();
        assert_eq!(eval_b(&u, [4.0, 1.0], 0.5), 3.0);
        let x = [std::f64::consts::FRAC_PI_2, 0.0];
        assert!((eval_b(&b, x, 0.125) - 1.125).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn weights_are_a_partition_of_unity(x in -8.0f64..=8.0, y in -8.0f64..=8.0) {
            let g = Grid2D::square(-8.0, 8.0, 33).unwrap();
            let cw = g.cell_weights([x, y]).unwrap();
            prop_assert!(cw.w.iter().all(|&w| w >= 0.0));
            prop_assert!((cw.w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }
    }
}
