//! Per-link class-based queuing in fixed point.
//!
//! Amounts are integer multiples of 1e-9 Mbit so that every tick conserves
//! fluid exactly: `arrivals = served + dropped + (backlog_after - backlog_before)`.

use crate::model::PriorityTier;

/// Fixed-point units per Mbit.
pub const UNITS_PER_MBIT: f64 = 1e9;

pub fn to_units(mbit: f64) -> u64 {
    if mbit <= 0.0 {
        0
    } else {
        (mbit * UNITS_PER_MBIT).round() as u64
    }
}

pub fn to_mbit(units: u64) -> f64 {
    units as f64 / UNITS_PER_MBIT
}

/// Scheduling parameters of one class on one link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassConfig {
    pub tier: PriorityTier,
    /// WFQ weight; only read for weighted classes.
    pub weight: f64,
    /// Maximum rate in Mbps; only applied to weighted classes.
    pub shaper_mbps: Option<f64>,
}

/// What happened to one class during one tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TickOutcome {
    pub served: u64,
    pub dropped: u64,
    pub backlog: u64,
}

/// Serves one tick on a link of `capacity_mbps`.
///
/// Strict classes drain in rank order. The remaining budget is water-filled
/// over weighted classes in proportion to their weights, each capped by its
/// content and shaper. Whatever exceeds `buffer_limit` after service is dropped.
pub fn schedule_link_tick(
    capacity_mbps: f64,
    tick_s: f64,
    buffer_limit: u64,
    classes: &[ClassConfig],
    backlog: &[u64],
    arrivals: &[u64],
) -> Vec<TickOutcome> {
    let n = classes.len();
    debug_assert_eq!(backlog.len(), n);
    debug_assert_eq!(arrivals.len(), n);
    let content: Vec<u64> = backlog.iter().zip(arrivals).map(|(b, a)| b + a).collect();
    let mut served = vec![0u64; n];
    let mut budget = to_units(capacity_mbps * tick_s);

    let mut strict: Vec<(u8, usize)> = classes
        .iter()
        .enumerate()
        .filter_map(|(i, c)| match c.tier {
            PriorityTier::Strict(rank) => Some((rank, i)),
            PriorityTier::Weighted => None,
        })
        .collect();
    strict.sort();
    for (_, i) in strict {
        let s = content[i].min(budget);
        served[i] = s;
        budget -= s;
    }

    let weighted: Vec<usize> = (0..n).filter(|&i| !classes[i].tier.is_strict()).collect();
    let caps: Vec<u64> = (0..n)
        .map(|i| match classes[i].shaper_mbps {
            Some(rate) if !classes[i].tier.is_strict() => content[i].min(to_units(rate * tick_s)),
            _ => content[i],
        })
        .collect();
    water_fill(&weighted, classes, &caps, &mut served, budget);

    (0..n)
        .map(|i| {
            let left = content[i] - served[i];
            let dropped = left.saturating_sub(buffer_limit);
            TickOutcome { served: served[i], dropped, backlog: left - dropped }
        })
        .collect()
}

fn water_fill(
    members: &[usize],
    classes: &[ClassConfig],
    caps: &[u64],
    served: &mut [u64],
    mut budget: u64,
) {
    let mut active: Vec<usize> = members.to_vec();
    loop {
        active.retain(|&i| served[i] < caps[i]);
        if budget == 0 || active.is_empty() {
            return;
        }
        let mut total_weight: f64 = active.iter().map(|&i| classes[i].weight.max(0.0)).sum();
        let equal = total_weight <= 0.0;
        if equal {
            total_weight = active.len() as f64;
        }
        let share = |i: usize| -> u64 {
            let w = if equal { 1.0 } else { classes[i].weight.max(0.0) };
            (budget as f64 * w / total_weight).floor() as u64
        };
        let shares: Vec<u64> = active.iter().map(|&i| share(i)).collect();

        let mut saturated = false;
        for (&i, &s) in active.iter().zip(&shares) {
            let need = caps[i] - served[i];
            if need <= s {
                served[i] = caps[i];
                budget -= need;
                saturated = true;
            }
        }
        if saturated {
            continue;
        }
        for (&i, &s) in active.iter().zip(&shares) {
            served[i] += s;
            budget -= s;
        }
        // Flooring leaves a few units; hand them out one at a time.
        for &i in &active {
            if budget == 0 {
                break;
            }
            if served[i] < caps[i] {
                served[i] += 1;
                budget -= 1;
            }
        }
    }
}

/// Running state of one class queue on one link.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClassQueue {
    pub backlog: u64,
    pub arrived_epoch: u64,
    pub served_epoch: u64,
    pub dropped_epoch: u64,
    /// Sum of end-of-tick backlogs over the epoch.
    pub backlog_ticks: u128,
    pub delay_estimate_ms: f64,
}

impl ClassQueue {
    pub fn record(&mut self, arrived: u64, outcome: TickOutcome) {
        self.arrived_epoch += arrived;
        self.served_epoch += outcome.served;
        self.dropped_epoch += outcome.dropped;
        self.backlog = outcome.backlog;
        self.backlog_ticks += u128::from(outcome.backlog);
    }

    pub fn reset_epoch(&mut self) {
        self.arrived_epoch = 0;
        self.served_epoch = 0;
        self.dropped_epoch = 0;
        self.backlog_ticks = 0;
    }
}

/// Link delay seen by a class: propagation plus the time to drain its backlog
/// at the rate it was actually served. Reported values are capped at `10 * D`.
pub fn estimate_class_delay(
    prop_delay_ms: f64,
    backlog_mbit: f64,
    service_rate_mbps: f64,
    sla_ms: f64,
) -> f64 {
    let cap = 10.0 * sla_ms;
    if backlog_mbit <= 0.0 {
        return prop_delay_ms;
    }
    if service_rate_mbps <= 0.0 {
        return cap;
    }
    (prop_delay_ms + backlog_mbit / service_rate_mbps * 1000.0).min(cap)
}

#[cfg(test)]
mod tests {
    use super::*;

    const STRICT0: ClassConfig =
        ClassConfig { tier: PriorityTier::Strict(0), weight: 0.0, shaper_mbps: None };

    fn weighted(w: f64) -> ClassConfig {
        ClassConfig { tier: PriorityTier::Weighted, weight: w, shaper_mbps: None }
    }

    fn m(x: f64) -> u64 {
        to_units(x)
    }

    #[test]
    fn underload_is_fully_served() {
        let out = schedule_link_tick(6.0, 0.1, m(0.25), &[STRICT0], &[0], &[m(0.4)]);
        assert_eq!(out[0], TickOutcome { served: m(0.4), dropped: 0, backlog: 0 });
    }

    #[test]
    fn strict_preempts_weighted() {
        let out = schedule_link_tick(
            6.0,
            0.1,
            m(0.25),
            &[STRICT0, weighted(1.0)],
            &[0, 0],
            &[m(0.4), m(0.4)],
        );
        assert_eq!(out[0].served, m(0.4));
        assert_eq!(out[1].served, m(0.2));
        assert_eq!(out[1].backlog, m(0.2));
    }

    #[test]
    fn unused_share_is_redistributed() {
        let out = schedule_link_tick(
            6.0,
            0.1,
            m(0.25),
            &[weighted(0.25), weighted(0.75)],
            &[0, 0],
            &[m(0.5), m(0.1)],
        );
        assert_eq!(out[0].served, m(0.5));
        assert_eq!(out[1].served, m(0.1));
    }

    #[test]
    fn shaper_caps_service() {
        let mut cfg = weighted(1.0);
        cfg.shaper_mbps = Some(2.0);
        let out = schedule_link_tick(6.0, 0.1, m(1.0), &[cfg], &[0], &[m(0.5)]);
        assert_eq!(out[0].served, m(0.2));
        assert_eq!(out[0].backlog, m(0.3));
    }

    #[test]
    fn overflow_is_dropped() {
        let out = schedule_link_tick(1.0, 0.1, m(0.25), &[weighted(1.0)], &[m(0.2)], &[m(0.3)]);
        assert_eq!(out[0].served, m(0.1));
        assert_eq!(out[0].backlog, m(0.25));
        assert_eq!(out[0].dropped, m(0.15));
    }

    #[test]
    fn delay_estimates() {
        assert_eq!(estimate_class_delay(10.0, 0.0, 0.0, 15.0), 10.0);
        assert!((estimate_class_delay(10.0, 0.2, 2.0, 150.0) - 110.0).abs() < 1e-12);
        assert_eq!(estimate_class_delay(10.0, 0.2, 0.0, 150.0), 1500.0);
    }
}
