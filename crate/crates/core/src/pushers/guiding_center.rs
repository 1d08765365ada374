use crate::error::Result;
use crate::fields::ElectricField;
use crate::model::{axpy, mat_r, mat_r0, MagneticProfile, GAMMA};

use super::{GCState, GuidingCenterModel};

/// Forward Euler on `u' = R0 E(u)`.
pub fn gc_euler_step(g: GCState, e: &ElectricField, b0: f64, dt: f64) -> Result<GCState> {
    let r0 = mat_r0(b0)?;
    let drift = r0.apply(e.eval(g.u)?);
    Ok(GCState { u: axpy(g.u, dt, drift) })
}

/// Two-stage second-order step on `u' = R0 E(u)`:
/// `u1 = u + (Δt/2γ) R0 E(u)`, `u' = u + (1-γ)Δt R0 E(u) + γΔt R0 E(u1)`.
pub fn gc_si2_step(g: GCState, e: &ElectricField, b0: f64, dt: f64) -> Result<GCState> {
    let r0 = mat_r0(b0)?;
    let k1 = r0.apply(e.eval(g.u)?);
    let u1 = axpy(g.u, dt / (2.0 * GAMMA), k1);
    let k2 = r0.apply(e.eval(u1)?);
    Ok(GCState {
        u: axpy(axpy(g.u, (1.0 - GAMMA) * dt, k1), GAMMA * dt, k2),
    })
}

/// Forward Euler on `u' = R(u) E(u)`, which keeps the `O(ε)` corrections of
/// the resolvent.
pub fn gcr_euler_step(
    g: GCState,
    e: &ElectricField,
    b: &MagneticProfile,
    eps: f64,
    tau: f64,
    dt: f64,
) -> Result<GCState> {
    let r = mat_r(g.u, b, eps, tau)?;
    Ok(GCState {
        u: axpy(g.u, dt, r.apply(e.eval(g.u)?)),
    })
}

#[derive(Debug, Default, Clone, Copy)]
pub struct GcEuler;

#[derive(Debug, Default, Clone, Copy)]
pub struct GcSi2;

#[derive(Debug, Default, Clone, Copy)]
pub struct GcREuler;

impl GuidingCenterModel for GcEuler {
    fn name(&self) -> &'static str {
        "R0-euler"
    }
    fn step(&self, g: GCState, e: &ElectricField, b: &MagneticProfile, _eps: f64, _tau: f64, dt: f64) -> Result<GCState> {
        gc_euler_step(g, e, b.b0(), dt)
    }
}

impl GuidingCenterModel for GcSi2 {
    fn name(&self) -> &'static str {
        "R0-si2"
    }
    fn step(&self, g: GCState, e: &ElectricField, b: &MagneticProfile, _eps: f64, _tau: f64, dt: f64) -> Result<GCState> {
        gc_si2_step(g, e, b.b0(), dt)
    }
}

impl GuidingCenterModel for GcREuler {
    fn name(&self) -> &'static str {
        "R-euler"
    }
    fn step(&self, g: GCState, e: &ElectricField, b: &MagneticProfile, eps: f64, tau: f64, dt: f64) -> Result<GCState> {
        gcr_euler_step(g, e, b, eps, tau, dt)
    }
}
