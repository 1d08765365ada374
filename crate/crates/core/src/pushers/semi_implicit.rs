use crate::error::Result;
use crate::fields::ElectricField;
use crate::model::{add, apply_k, axpy, mat_m, mat_m_gamma, scale, sub, MagneticProfile, ScaleParams, Vec2, GAMMA};
use crate::noise::NoiseDraw;

use super::{PhaseState, Pusher};

/// First-order semi-implicit step.
///
/// Solves `v' = v + δE(x) + λ b̃(εx) K v' - (δ/τ) v' + √(2σδ/τ) ξ` and
/// `x' = x + δ v'` through the closed-form inverse `M(x)`.
#[inline]
pub fn apsi1_step(
    s: PhaseState,
    e: &ElectricField,
    b: &MagneticProfile,
    p: &ScaleParams,
    xi: NoiseDraw,
) -> Result<PhaseState> {
    let delta = p.delta();
    let ex = e.eval(s.x)?;
    let rhs = axpy(axpy(s.v, delta, ex), p.noise_amplitude(), xi.xi);
    let v = mat_m(s.x, b, p).apply(rhs);
    Ok(PhaseState {
        x: axpy(s.x, delta, v),
        v,
    })
}

/// Intermediate quantities of one two-stage step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Apsi2Stages {
    /// First-stage position `x_n^(1)`.
    pub x1: Vec2,
    /// First-stage velocity `v_n^(1)`.
    pub v1: Vec2,
    /// Predictor point `x_n^(2) = x^n + (δ/2γ) v_n^(1)`.
    pub x2: Vec2,
    pub next: PhaseState,
}

/// Force `E(x) + (b̃(εx)/ε) K v - v/τ`.
#[inline]
fn force(ex: Vec2, bx: f64, v: Vec2, p: &ScaleParams) -> Vec2 {
    let rot = scale(bx / p.epsilon(), apply_k(v));
    sub(add(ex, rot), scale(1.0 / p.tau(), v))
}

/// All stages of the second-order two-stage step.
pub fn apsi2_stages(
    s: PhaseState,
    e: &ElectricField,
    b: &MagneticProfile,
    p: &ScaleParams,
    xi: NoiseDraw,
) -> Result<Apsi2Stages> {
    let delta = p.delta();
    let gd = GAMMA * delta;

    let ex = e.eval(s.x)?;
    let v1 = mat_m_gamma(s.x, b, p).apply(axpy(s.v, gd, ex));
    let x1 = axpy(s.x, gd, v1);

    // v1 solves the first stage, so δγF1 = v1 - v^n; the explicit form is kept
    // because it is what enters the second stage.
    let f1 = force(ex, b.eval(s.x, p.epsilon()), v1, p);
    let x2 = axpy(s.x, delta / (2.0 * GAMMA), v1);
    let ex2 = e.eval(x2)?;

    let rhs = axpy(
        axpy(axpy(s.v, (1.0 - GAMMA) * delta, f1), gd, ex2),
        p.noise_amplitude(),
        xi.xi,
    );
    let v = mat_m_gamma(x2, b, p).apply(rhs);
    let x = axpy(axpy(s.x, (1.0 - GAMMA) * delta, v1), gd, v);
    Ok(Apsi2Stages {
        x1,
        v1,
        x2,
        next: PhaseState { x, v },
    })
}

/// Second-order two-stage semi-implicit step.
#[inline]
pub fn apsi2_step(
    s: PhaseState,
    e: &ElectricField,
    b: &MagneticProfile,
    p: &ScaleParams,
    xi: NoiseDraw,
) -> Result<PhaseState> {
    apsi2_stages(s, e, b, p, xi).map(|st| st.next)
}

/// Explicit Euler–Maruyama step; only meaningful when `Δt ≪ ε²`.
pub fn em_step(
    s: PhaseState,
    e: &ElectricField,
    b: &MagneticProfile,
    p: &ScaleParams,
    xi: NoiseDraw,
) -> Result<PhaseState> {
    let delta = p.delta();
    let ex = e.eval(s.x)?;
    let f = force(ex, b.eval(s.x, p.epsilon()), s.v, p);
    Ok(PhaseState {
        x: axpy(s.x, delta, s.v),
        v: axpy(axpy(s.v, delta, f), p.noise_amplitude(), xi.xi),
    })
}

/// Residual of a relation `lhs = Σ terms`, relative to the largest term.
fn relative_residual(lhs: Vec2, terms: &[Vec2]) -> f64 {
    let mut r = lhs;
    let mut mag = lhs[0].abs().max(lhs[1].abs());
    for t in terms {
        r = sub(r, *t);
        mag = mag.max(t[0].abs()).max(t[1].abs());
    }
    r[0].abs().max(r[1].abs()) / mag.max(1.0)
}

/// Largest relative residual of the two implicit relations of the
/// first-order scheme, evaluated at a candidate output `next`.
pub fn apsi1_residual(
    prev: PhaseState,
    next: PhaseState,
    e: &ElectricField,
    b: &MagneticProfile,
    p: &ScaleParams,
    xi: NoiseDraw,
) -> Result<f64> {
    let delta = p.delta();
    let ex = e.eval(prev.x)?;
    let bx = b.eval(prev.x, p.epsilon());
    let rx = relative_residual(next.x, &[prev.x, scale(delta, next.v)]);
    let rv = relative_residual(
        next.v,
        &[
            prev.v,
            scale(delta, ex),
            scale(p.lambda() * bx, apply_k(next.v)),
            scale(-delta / p.tau(), next.v),
            scale(p.noise_amplitude(), xi.xi),
        ],
    );
    Ok(rx.max(rv))
}

/// Largest relative residual of the four update relations of the two-stage
/// scheme, with `F^(1)`, `F^(2)` rebuilt from the stage values.
pub fn apsi2_residual(
    prev: PhaseState,
    st: &Apsi2Stages,
    e: &ElectricField,
    b: &MagneticProfile,
    p: &ScaleParams,
    xi: NoiseDraw,
) -> Result<f64> {
    let delta = p.delta();
    let gd = GAMMA * delta;
    let eps = p.epsilon();
    let ex = e.eval(prev.x)?;
    let x2 = axpy(prev.x, delta / (2.0 * GAMMA), st.v1);
    let ex2 = e.eval(x2)?;
    let bx = b.eval(prev.x, eps);
    let bx2 = b.eval(x2, eps);
    let next = st.next;

    // γδF terms expanded so each piece is a separately bounded term.
    let gd_f1 = [
        scale(gd, ex),
        scale(gd * bx / eps, apply_k(st.v1)),
        scale(-gd / p.tau(), st.v1),
    ];
    let r1 = relative_residual(st.x1, &[prev.x, scale(gd, st.v1)]);
    let r2 = relative_residual(st.v1, &[prev.v, gd_f1[0], gd_f1[1], gd_f1[2]]);
    let r3 = relative_residual(
        next.x,
        &[prev.x, scale((1.0 - GAMMA) * delta, st.v1), scale(gd, next.v)],
    );
    let c = (1.0 - GAMMA) / GAMMA;
    let r4 = relative_residual(
        next.v,
        &[
            prev.v,
            scale(c, gd_f1[0]),
            scale(c, gd_f1[1]),
            scale(c, gd_f1[2]),
            scale(gd, ex2),
            scale(gd * bx2 / eps, apply_k(next.v)),
            scale(-gd / p.tau(), next.v),
            scale(p.noise_amplitude(), xi.xi),
        ],
    );
    Ok(r1.max(r2).max(r3).max(r4).max(relative_residual(st.x2, &[x2])))
}

#[derive(Debug, Default, Clone, Copy)]
pub struct Apsi1;

#[derive(Debug, Default, Clone, Copy)]
pub struct Apsi2;

#[derive(Debug, Default, Clone, Copy)]
pub struct EulerMaruyama;

impl Pusher for Apsi1 {
    fn name(&self) -> &'static str {
        "APSI1"
    }
    fn step(&self, s: PhaseState, e: &ElectricField, b: &MagneticProfile, p: &ScaleParams, xi: NoiseDraw) -> Result<PhaseState> {
        apsi1_step(s, e, b, p, xi)
    }
}

impl Pusher for Apsi2 {
    fn name(&self) -> &'static str {
        "APSI2"
    }
    fn step(&self, s: PhaseState, e: &ElectricField, b: &MagneticProfile, p: &ScaleParams, xi: NoiseDraw) -> Result<PhaseState> {
        apsi2_step(s, e, b, p, xi)
    }
}

impl Pusher for EulerMaruyama {
    fn name(&self) -> &'static str {
        "EM"
    }
    fn step(&self, s: PhaseState, e: &ElectricField, b: &MagneticProfile, p: &ScaleParams, xi: NoiseDraw) -> Result<PhaseState> {
        em_step(s, e, b, p, xi)
    }
}
