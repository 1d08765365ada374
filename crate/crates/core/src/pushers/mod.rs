//! Single-particle integrators.
//!
//! Particle schemes implement [`Pusher`]; guiding-center integrators implement
//! [`GuidingCenterModel`]. Both families are collected in name-keyed
//! registries so experiments can pick a scheme from a config string.

mod guiding_center;
mod registry;
mod semi_implicit;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fields::ElectricField;
use crate::model::{MagneticProfile, ScaleParams, Vec2};
pub use crate::noise::NoiseDraw;

pub use guiding_center::{gc_euler_step, gc_si2_step, gcr_euler_step, GcEuler, GcREuler, GcSi2};
pub use registry::{GcRegistry, Registry, SchemeRegistry};
pub use semi_implicit::{
    apsi1_residual, apsi1_step, apsi2_residual, apsi2_stages, apsi2_step, em_step, Apsi1, Apsi2,
    Apsi2Stages, EulerMaruyama,
};

/// Particle phase-space state `(x, v)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhaseState {
    pub x: Vec2,
    pub v: Vec2,
}

impl PhaseState {
    pub fn new(x: Vec2, v: Vec2) -> Self {
        PhaseState { x, v }
    }

    pub fn is_finite(&self) -> bool {
        crate::model::is_finite(self.x) && crate::model::is_finite(self.v)
    }
}

/// Guiding-center position.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GCState {
    pub u: Vec2,
}

impl GCState {
    pub fn new(u: Vec2) -> Self {
        GCState { u }
    }
}

/// A one-step map for the stochastic particle system.
pub trait Pusher: Send + Sync {
    fn name(&self) -> &'static str;

    fn step(
        &self,
        s: PhaseState,
        e: &ElectricField,
        b: &MagneticProfile,
        p: &ScaleParams,
        xi: NoiseDraw,
    ) -> Result<PhaseState>;
}

/// A one-step map for a guiding-center limit model.
pub trait GuidingCenterModel: Send + Sync {
    fn name(&self) -> &'static str;

    fn step(
        &self,
        g: GCState,
        e: &ElectricField,
        b: &MagneticProfile,
        eps: f64,
        tau: f64,
        dt: f64,
    ) -> Result<GCState>;
}

/// Particle schemes known to the default registry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "APSI1")]
    Apsi1,
    #[serde(rename = "APSI2")]
    Apsi2,
    #[serde(rename = "EM")]
    EulerMaruyama,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Apsi1 => "APSI1",
            Scheme::Apsi2 => "APSI2",
            Scheme::EulerMaruyama => "EM",
        }
    }
}

/// Guiding-center integrators known to the default registry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GcModel {
    #[serde(rename = "R0-euler")]
    R0Euler,
    #[serde(rename = "R0-si2")]
    R0Si2,
    #[serde(rename = "R-euler")]
    REuler,
}

impl GcModel {
    pub fn name(self) -> &'static str {
        match self {
            GcModel::R0Euler => "R0-euler",
            GcModel::R0Si2 => "R0-si2",
            GcModel::REuler => "R-euler",
        }
    }
}
