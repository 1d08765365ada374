//! Scale parameters, magnetic profiles and the 2×2 matrix kernels shared by
//! every scheme.
//!
//! All kernels are recomputed on demand: their entries depend on the position
//! through the magnetic profile.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

pub type Vec2 = [f64; 2];

/// Stage coefficient of the two-stage scheme, `1 - 1/√2`.
pub const GAMMA: f64 = 1.0 - std::f64::consts::FRAC_1_SQRT_2;

#[inline]
pub fn add(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn scale(s: f64, a: Vec2) -> Vec2 {
    [s * a[0], s * a[1]]
}

/// `a + s·b`
#[inline]
pub fn axpy(a: Vec2, s: f64, b: Vec2) -> Vec2 {
    [a[0] + s * b[0], a[1] + s * b[1]]
}

#[inline]
pub fn norm(a: Vec2) -> f64 {
    a[0].hypot(a[1])
}

#[inline]
pub fn is_finite(a: Vec2) -> bool {
    a[0].is_finite() && a[1].is_finite()
}

/// The rotation generator `K = [[0, 1], [-1, 0]]` applied to `w`.
#[inline]
pub fn apply_k(w: Vec2) -> Vec2 {
    [w[1], -w[0]]
}

/// Row-major 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);
    pub const K: Mat2 = Mat2([[0.0, 1.0], [-1.0, 0.0]]);

    /// `a·I + c·K`
    #[inline]
    pub fn id_plus_k(a: f64, c: f64) -> Mat2 {
        Mat2([[a, c], [-c, a]])
    }

    #[inline]
    pub fn apply(&self, w: Vec2) -> Vec2 {
        let m = &self.0;
        [m[0][0] * w[0] + m[0][1] * w[1], m[1][0] * w[0] + m[1][1] * w[1]]
    }

    pub fn mul(&self, other: &Mat2) -> Mat2 {
        let (a, b) = (&self.0, &other.0);
        let mut out = [[0.0; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, entry) in row.iter_mut().enumerate() {
                *entry = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Mat2(out)
    }

    pub fn scaled(&self, s: f64) -> Mat2 {
        let m = &self.0;
        Mat2([[s * m[0][0], s * m[0][1]], [s * m[1][0], s * m[1][1]]])
    }

    pub fn sub(&self, other: &Mat2) -> Mat2 {
        let (a, b) = (&self.0, &other.0);
        Mat2([
            [a[0][0] - b[0][0], a[0][1] - b[0][1]],
            [a[1][0] - b[1][0], a[1][1] - b[1][1]],
        ])
    }

    pub fn transpose(&self) -> Mat2 {
        let m = &self.0;
        Mat2([[m[0][0], m[1][0]], [m[0][1], m[1][1]]])
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }
}

/// Inverse of `a·I - c·K`, i.e. `(a·I + c·K) / (a² + c²)`.
///
/// Uses `K² = -I`, so `(aI - cK)(aI + cK) = (a² + c²) I`.
#[inline]
pub fn resolvent(a: f64, c: f64) -> Mat2 {
    let den = a * a + c * c;
    Mat2::id_plus_k(a / den, c / den)
}

/// Dimensionless scales of one run: `ε`, `τ`, `σ`, `Δt` and the derived
/// stiffness ratios `δ = Δt/ε`, `λ = Δt/ε²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaleParams {
    epsilon: f64,
    tau: f64,
    sigma: f64,
    dt: f64,
    delta: f64,
    lambda: f64,
}

impl ScaleParams {
    pub fn new(epsilon: f64, tau: f64, sigma: f64, dt: f64) -> Result<Self> {
        let check_pos = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(name, format!("must be finite and > 0, got {v}")))
            }
        };
        check_pos("epsilon", epsilon)?;
        check_pos("tau", tau)?;
        check_pos("dt", dt)?;
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::config("sigma", format!("must be finite and >= 0, got {sigma}")));
        }
        Ok(ScaleParams {
            epsilon,
            tau,
            sigma,
            dt,
            delta: dt / epsilon,
            lambda: dt / (epsilon * epsilon),
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    /// `Δt/ε`
    pub fn delta(&self) -> f64 {
        self.delta
    }
    /// `Δt/ε²`
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(epsilon, self.tau, self.sigma, self.dt)
    }
    pub fn with_dt(&self, dt: f64) -> Result<Self> {
        Self::new(self.epsilon, self.tau, self.sigma, dt)
    }
    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        Self::new(self.epsilon, self.tau, sigma, self.dt)
    }
    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        Self::new(self.epsilon, tau, self.sigma, self.dt)
    }

    /// Amplitude `√(2σδ/τ)` multiplying the Gaussian draw in every scheme.
    #[inline]
    pub fn noise_amplitude(&self) -> f64 {
        (2.0 * self.sigma * self.delta / self.tau).sqrt()
    }
}

type ProfileFn = Arc<dyn Fn(Vec2) -> f64 + Send + Sync>;

#[derive(Clone)]
enum ProfileKind {
    Uniform,
    /// `b(x) = 1 + ε·sin(|x|)`
    Benchmark,
    /// User-supplied `b̃`, evaluated at `εx`.
    Scaled(ProfileFn),
}

/// Scalar magnetic field under maximal ordering, `b(x) = b̃(εx)`.
#[derive(Clone)]
pub struct MagneticProfile {
    kind: ProfileKind,
    b0: f64,
    s_exponent: f64,
}

impl fmt::Debug for MagneticProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ProfileKind::Uniform => "uniform",
            ProfileKind::Benchmark => "benchmark",
            ProfileKind::Scaled(_) => "scaled",
        };
        f.debug_struct("MagneticProfile")
            .field("kind", &kind)
            .field("b0", &self.b0)
            .field("s_exponent", &self.s_exponent)
            .finish()
    }
}

impl MagneticProfile {
    /// Constant field `b ≡ b0`.
    pub fn uniform(b0: f64) -> Result<Self> {
        if b0 == 0.0 || !b0.is_finite() {
            return Err(Error::Domain(format!("b0 must be finite and nonzero, got {b0}")));
        }
        Ok(MagneticProfile {
            kind: ProfileKind::Uniform,
            b0,
            s_exponent: f64::INFINITY,
        })
    }

    /// The benchmark field `b(x) = 1 + ε·sin(|x|)`, with `b0 = 1` and
    /// `b - b0 = O(ε)`.
    pub fn benchmark() -> Self {
        MagneticProfile {
            kind: ProfileKind::Benchmark,
            b0: 1.0,
            s_exponent: 1.0,
        }
    }

    /// General profile `b̃`; `b0` is read off as `b̃(0)`.
    pub fn scaled<F>(btilde: F, s_exponent: f64) -> Result<Self>
    where
        F: Fn(Vec2) -> f64 + Send + Sync + 'static,
    {
        let b0 = btilde([0.0, 0.0]);
        if b0 == 0.0 || !b0.is_finite() {
            return Err(Error::Domain(format!("b~(0) must be finite and nonzero, got {b0}")));
        }
        if !(s_exponent > 0.0) {
            return Err(Error::Domain(format!("s exponent must be positive, got {s_exponent}")));
        }
        Ok(MagneticProfile {
            kind: ProfileKind::Scaled(Arc::new(btilde)),
            b0,
            s_exponent,
        })
    }

    pub fn b0(&self) -> f64 {
        self.b0
    }

    /// Exponent `s` with `b(x) - b0 = O(ε^s)`; infinite for a uniform field.
    pub fn s_exponent(&self) -> f64 {
        self.s_exponent
    }

    /// `b̃(εx)`.
    #[inline]
    pub fn eval(&self, x: Vec2, eps: f64) -> f64 {
        match &self.kind {
            ProfileKind::Uniform => self.b0,
            ProfileKind::Benchmark => 1.0 + eps * norm(x).sin(),
            ProfileKind::Scaled(f) => f(scale(eps, x)),
        }
    }
}

/// `M(x)`: inverse of `(1 + δ/τ)I - λ b̃(εx) K`.
#[inline]
pub fn mat_m(x: Vec2, b: &MagneticProfile, p: &ScaleParams) -> Mat2 {
    let bx = b.eval(x, p.epsilon);
    resolvent(1.0 + p.delta / p.tau, p.lambda * bx)
}

/// `M_γ(x)`: inverse of `(1 + γδ/τ)I - γλ b̃(εx) K`.
#[inline]
pub fn mat_m_gamma(x: Vec2, b: &MagneticProfile, p: &ScaleParams) -> Mat2 {
    let bx = b.eval(x, p.epsilon);
    resolvent(1.0 + GAMMA * p.delta / p.tau, GAMMA * p.lambda * bx)
}

/// `R(x) = (b̃(εx) τ² K + ε τ I) / ((b̃(εx) τ)² + ε²)`.
pub fn mat_r(x: Vec2, b: &MagneticProfile, eps: f64, tau: f64) -> Result<Mat2> {
    let bx = b.eval(x, eps);
    let den = (bx * tau).powi(2) + eps * eps;
    if !(den > 0.0) || !den.is_finite() {
        return Err(Error::Domain(format!(
            "R(x) denominator is {den} (b={bx}, eps={eps}, tau={tau})"
        )));
    }
    Ok(Mat2::id_plus_k(eps * tau / den, bx * tau * tau / den))
}

/// `R0 = K / b0`.
pub fn mat_r0(b0: f64) -> Result<Mat2> {
    if b0 == 0.0 || !b0.is_finite() {
        return Err(Error::Domain(format!("b0 must be finite and nonzero, got {b0}")));
    }
    Ok(Mat2::K.scaled(1.0 / b0))
}
