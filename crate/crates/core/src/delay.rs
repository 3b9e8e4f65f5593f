//! Queueing-delay predictors shared by both optimizers.
//!
//! Both predictors are M/M/1 sojourn times on top of the link's propagation
//! delay. The routing form looks at the total link load; the QoS form treats a
//! class's allocation as a private server of rate `alloc` draining `demand`.
//! Rates are Mbps (1000 bits per ms) and delays are ms.

use serde::{Deserialize, Serialize};

use crate::error::DelayError;
use crate::model::{OverlayLink, RATE_FLOOR};

/// Denominator guard for the QoS predictor, in Mbps.
pub const HEADROOM_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DelayVariant {
    #[default]
    Mm1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayModelSpec {
    #[serde(default)]
    pub variant: DelayVariant,
    #[serde(default = "default_packet_bits")]
    pub mean_packet_bits: f64,
}

fn default_packet_bits() -> f64 {
    12_000.0
}

impl Default for DelayModelSpec {
    fn default() -> Self {
        Self {
            variant: DelayVariant::Mm1,
            mean_packet_bits: default_packet_bits(),
        }
    }
}

/// A delay prediction. `Saturated` marks a queue with no spare service rate;
/// it is never represented as a float.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Delay {
    Ms(f64),
    Saturated,
}

impl Delay {
    pub fn finite(self) -> Option<f64> {
        match self {
            Delay::Ms(v) => Some(v),
            Delay::Saturated => None,
        }
    }

    pub fn is_saturated(self) -> bool {
        matches!(self, Delay::Saturated)
    }
}

impl DelayModelSpec {
    /// Packet size expressed in Mbps·ms, so `service_ms = packet / rate`.
    fn packet_mbit_ms(&self) -> f64 {
        self.mean_packet_bits / 1000.0
    }

    /// Delay on `link` when it carries `total_load_mbps` of traffic from all groups.
    pub fn predict_delay_spr(
        &self,
        link: &OverlayLink,
        total_load_mbps: f64,
    ) -> Result<Delay, DelayError> {
        if total_load_mbps < 0.0 || total_load_mbps.is_nan() {
            return Err(DelayError::NegativeLoad(total_load_mbps));
        }
        let spare = link.capacity_mbps - total_load_mbps;
        if spare <= 0.0 {
            return Ok(Delay::Saturated);
        }
        Ok(Delay::Ms(link.prop_delay_ms + self.packet_mbit_ms() / spare))
    }

    /// Delay seen by a class offering `class_demand_mbps` into an allocation of
    /// `class_alloc_mbps`.
    pub fn predict_delay_qos(
        &self,
        link: &OverlayLink,
        class_demand_mbps: f64,
        class_alloc_mbps: f64,
    ) -> Result<Delay, DelayError> {
        if class_alloc_mbps < RATE_FLOOR || class_alloc_mbps.is_nan() {
            return Err(DelayError::AllocBelowFloor(class_alloc_mbps));
        }
        if class_demand_mbps < 0.0 || class_demand_mbps.is_nan() {
            return Err(DelayError::NegativeLoad(class_demand_mbps));
        }
        if class_demand_mbps >= class_alloc_mbps {
            return Ok(Delay::Saturated);
        }
        let headroom = (class_alloc_mbps - class_demand_mbps).max(HEADROOM_EPS);
        Ok(Delay::Ms(link.prop_delay_ms + self.packet_mbit_ms() / headroom))
    }

    /// Finite convex extension of [`predict_delay_qos`](Self::predict_delay_qos)
    /// for use inside the optimizer. Below `RATE_FLOOR` of headroom the curve
    /// continues along its tangent, so it stays convex and decreasing in the
    /// allocation even when the allocation is short of demand.
    pub fn qos_delay_relaxed(&self, link: &OverlayLink, demand: f64, alloc: f64) -> f64 {
        let s = self.packet_mbit_ms();
        let u0 = RATE_FLOOR;
        let u = alloc - demand;
        if u >= u0 {
            link.prop_delay_ms + s / u
        } else {
            link.prop_delay_ms + s / u0 - s / (u0 * u0) * (u - u0)
        }
    }

    /// Derivative of [`qos_delay_relaxed`](Self::qos_delay_relaxed) with respect to `alloc`.
    pub fn qos_delay_relaxed_slope(&self, demand: f64, alloc: f64) -> f64 {
        let s = self.packet_mbit_ms();
        let u = (alloc - demand).max(RATE_FLOOR);
        -s / (u * u)
    }

    /// Largest total load that keeps the routing-form delay within `bound_ms`.
    /// `None` when the bound does not exceed the propagation delay.
    pub fn invert_delay_bound(&self, link: &OverlayLink, bound_ms: f64) -> Option<f64> {
        let budget = bound_ms - link.prop_delay_ms;
        if budget.is_nan() || budget <= 0.0 {
            return None;
        }
        Some((link.capacity_mbps - self.packet_mbit_ms() / budget).max(0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LinkKind;

    fn link(cap: f64, prop: f64) -> OverlayLink {
        OverlayLink {
            id: "e".into(),
            src: "a".into(),
            dst: "b".into(),
            capacity_mbps: cap,
            prop_delay_ms: prop,
            kind: LinkKind::Mstp,
        }
    }

    #[test]
    fn spr_examples() {
        let m = DelayModelSpec::default();
        let l = link(6.0, 10.0);
        assert_eq!(m.predict_delay_spr(&l, 3.0).unwrap(), Delay::Ms(14.0));
        assert_eq!(m.predict_delay_spr(&l, 0.0).unwrap(), Delay::Ms(12.0));
        assert_eq!(m.predict_delay_spr(&l, 6.0).unwrap(), Delay::Saturated);
        assert!(m.predict_delay_spr(&l, -1.0).is_err());
    }

    #[test]
    fn qos_examples() {
        let m = DelayModelSpec::default();
        let l = link(12.0, 15.0);
        assert_eq!(m.predict_delay_qos(&l, 2.0, 4.0).unwrap(), Delay::Ms(21.0));
        assert_eq!(m.predict_delay_qos(&l, 0.0, 6.0).unwrap(), Delay::Ms(17.0));
        assert_eq!(m.predict_delay_qos(&l, 4.0, 4.0).unwrap(), Delay::Saturated);
        assert_eq!(
            m.predict_delay_qos(&l, 1.0, 0.001),
            Err(DelayError::AllocBelowFloor(0.001))
        );
    }

    #[test]
    fn inverse_examples() {
        let m = DelayModelSpec::default();
        let l = link(6.0, 10.0);
        assert!((m.invert_delay_bound(&l, 15.0).unwrap() - 3.6).abs() < 1e-12);
        assert_eq!(m.invert_delay_bound(&l, 10.0), None);
        assert_eq!(m.invert_delay_bound(&l, 12.0), Some(0.0));
        let far = m.invert_delay_bound(&l, 1e12).unwrap();
        assert!((far - 6.0).abs() < 1e-9);
        assert_eq!(m.invert_delay_bound(&l, f64::INFINITY), Some(6.0));
    }

    #[test]
    fn relaxed_form_matches_exact_above_floor() {
        let m = DelayModelSpec::default();
        let l = link(12.0, 15.0);
        let exact = m.predict_delay_qos(&l, 2.0, 4.0).unwrap().finite().unwrap();
        assert_eq!(m.qos_delay_relaxed(&l, 2.0, 4.0), exact);
        // Tangent continuation is continuous at the floor.
        let at = m.qos_delay_relaxed(&l, 2.0, 2.0 + RATE_FLOOR);
        let below = m.qos_delay_relaxed(&l, 2.0, 2.0 + RATE_FLOOR - 1e-9);
        assert!((at - below).abs() < 1e-3);
        assert!(m.qos_delay_relaxed(&l, 2.0, 1.0) > at);
    }
}
