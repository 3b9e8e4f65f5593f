use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::model::{GroupId, NodeId};

/// Offered load of one flow group between one hub and one spoke.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficSpec {
    pub group: GroupId,
    pub src: NodeId,
    pub dst: NodeId,
    pub base_rate_mbps: f64,
    #[serde(default)]
    pub diurnal_amplitude: f64,
    #[serde(default = "default_period")]
    pub diurnal_period_s: f64,
    #[serde(default)]
    pub noise_std: f64,
}

fn default_period() -> f64 {
    600.0
}

/// `base * (1 + A sin(2 pi t / period)) * (1 + N(0, noise_std))`, clamped at zero.
/// A normal draw is taken from `rng` only when `noise_std > 0`.
pub fn offered_rate<R: Rng + ?Sized>(spec: &TrafficSpec, time_s: f64, rng: &mut R) -> f64 {
    let diurnal = 1.0 + spec.diurnal_amplitude * (2.0 * PI * time_s / spec.diurnal_period_s).sin();
    let noise = if spec.noise_std > 0.0 {
        let z: f64 = StandardNormal.sample(rng);
        1.0 + spec.noise_std * z
    } else {
        1.0
    };
    (spec.base_rate_mbps * diurnal * noise).max(0.0)
}
