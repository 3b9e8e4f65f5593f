//! Discrete-time fluid simulation of the overlay.
//!
//! Each tick, every demand draws its offered rate, splits it over routes per
//! the installed routing policy, and every link serves its class queues with
//! the CBQ scheduler. Relay routes load each of their links with the full
//! route share (links are fed open-loop rather than by upstream departures).
//! Counters roll up into one [`LinkMeasurement`] per link every measurement
//! period.

pub mod scheduler;
pub mod traffic;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::{
    ClassMeasurement, CommodityId, FlowGroup, GroupId, LinkMeasurement, OverlayLink, PriorityTier,
    QosPolicy, RouteId, SprPolicy,
};
use crate::scenario::{Commodity, Scenario, SimConfig};
use scheduler::{
    estimate_class_delay, schedule_link_tick, to_mbit, to_units, ClassConfig, ClassQueue,
};
use traffic::offered_rate;

/// Offered volume of one demand on one route during an epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteUsage {
    pub commodity: CommodityId,
    pub group: GroupId,
    pub route: RouteId,
    pub offered_mbit: f64,
}

/// Everything observed during one measurement epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: u64,
    pub links: Vec<LinkMeasurement>,
    pub routes: Vec<RouteUsage>,
    /// Mean offered rate at ingress per demand (before any drop).
    pub ingress_mbps: BTreeMap<CommodityId, f64>,
    /// Volume served on links that terminate at a spoke.
    pub delivered_mbit: f64,
}

struct LinkState {
    link: OverlayLink,
    /// Indexed like `World::groups`.
    queues: Vec<ClassQueue>,
    to_spoke: bool,
}

struct DemandState {
    commodity: Commodity,
    group: usize,
    /// Link indices per candidate route.
    route_links: Vec<Vec<usize>>,
}

pub struct World {
    config: SimConfig,
    groups: Vec<FlowGroup>,
    links: Vec<LinkState>,
    link_index: BTreeMap<crate::model::LinkId, usize>,
    demands: Vec<DemandState>,
    rng: ChaCha8Rng,
    tick: u64,
    epoch: u64,
}

impl World {
    pub fn new(scenario: &Scenario, seed: u64) -> Self {
        let groups = scenario.flow_groups.clone();
        let group_index: BTreeMap<&GroupId, usize> =
            groups.iter().enumerate().map(|(i, g)| (&g.id, i)).collect();
        let links: Vec<LinkState> = scenario
            .topology
            .links
            .iter()
            .map(|l| LinkState {
                link: l.clone(),
                queues: vec![ClassQueue::default(); groups.len()],
                to_spoke: scenario
                    .topology
                    .node(&l.dst)
                    .is_some_and(|n| n.role == crate::model::NodeRole::Spoke),
            })
            .collect();
        let link_index: BTreeMap<_, _> =
            links.iter().enumerate().map(|(i, l)| (l.link.id.clone(), i)).collect();
        let demands = scenario
            .commodities()
            .into_iter()
            .map(|c| DemandState {
                group: group_index[&c.group],
                route_links: c
                    .routes
                    .iter()
                    .map(|r| r.links.iter().map(|l| link_index[l]).collect())
                    .collect(),
                commodity: c,
            })
            .collect();
        Self {
            config: scenario.sim.clone(),
            groups,
            links,
            link_index,
            demands,
            rng: ChaCha8Rng::seed_from_u64(seed),
            tick: 0,
            epoch: 0,
        }
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    fn class_configs(&self, link: &OverlayLink, qos: &QosPolicy) -> Vec<ClassConfig> {
        let link_qos = qos.links.get(&link.id);
        let n_weighted = self
            .groups
            .iter()
            .filter(|g| g.priority_tier == PriorityTier::Weighted)
            .count()
            .max(1);
        self.groups
            .iter()
            .map(|g| {
                let weight = link_qos
                    .and_then(|q| q.wfq_weights.get(&g.id).copied())
                    .unwrap_or(1.0 / n_weighted as f64);
                let shaper_mbps = link_qos.and_then(|q| q.shaper_rates.get(&g.id).copied());
                ClassConfig { tier: g.priority_tier, weight, shaper_mbps }
            })
            .collect()
    }

    /// Split of one demand's tick volume over its routes. Demands missing
    /// from the policy spread evenly over every candidate route.
    fn split(&self, d: &DemandState, policy: &SprPolicy, units: u64) -> Vec<u64> {
        let n = d.commodity.routes.len();
        let ratios: Vec<f64> = match policy.entries.get(&d.commodity.id) {
            Some(entry) => d
                .commodity
                .routes
                .iter()
                .map(|r| entry.split_ratios.get(&r.id).copied().unwrap_or(0.0))
                .collect(),
            None => vec![1.0 / n as f64; n],
        };
        let mut out: Vec<u64> = ratios.iter().map(|x| (units as f64 * x).floor() as u64).collect();
        let assigned: u64 = out.iter().sum();
        if let Some(last) = (0..n).rev().find(|&i| ratios[i] > 0.0) {
            out[last] += units.saturating_sub(assigned);
        }
        out
    }

    /// Advances one measurement period under the given policies.
    pub fn run_epoch(&mut self, spr: &SprPolicy, qos: &QosPolicy) -> EpochRecord {
        let ticks = self.config.ticks_per_epoch();
        let tick_s = self.config.tick_s;
        let buffer = to_units(self.config.buffer_limit_mbit);
        let n_groups = self.groups.len();
        let configs: Vec<Vec<ClassConfig>> =
            self.links.iter().map(|l| self.class_configs(&l.link, qos)).collect();

        for l in &mut self.links {
            for q in &mut l.queues {
                q.reset_epoch();
            }
        }
        let mut ingress_units = vec![0u64; self.demands.len()];
        let mut route_units: Vec<Vec<u64>> =
            self.demands.iter().map(|d| vec![0; d.commodity.routes.len()]).collect();
        let mut delivered = 0u64;

        for _ in 0..ticks {
            let time_s = self.tick as f64 * tick_s;
            let mut arrivals = vec![vec![0u64; n_groups]; self.links.len()];
            for (di, d) in self.demands.iter().enumerate() {
                let rate = offered_rate(&d.commodity.traffic, time_s, &mut self.rng);
                let units = to_units(rate * tick_s);
                ingress_units[di] += units;
                for (ri, share) in self.split(d, spr, units).into_iter().enumerate() {
                    route_units[di][ri] += share;
                    for &li in &d.route_links[ri] {
                        arrivals[li][d.group] += share;
                    }
                }
            }
            for (li, l) in self.links.iter_mut().enumerate() {
                let backlog: Vec<u64> = l.queues.iter().map(|q| q.backlog).collect();
                let out = schedule_link_tick(
                    l.link.capacity_mbps,
                    tick_s,
                    buffer,
                    &configs[li],
                    &backlog,
                    &arrivals[li],
                );
                for ((q, o), &a) in l.queues.iter_mut().zip(out).zip(&arrivals[li]) {
                    q.record(a, o);
                    if l.to_spoke {
                        delivered += o.served;
                    }
                }
            }
            self.tick += 1;
        }

        let period = self.config.measurement_period_s;
        let epoch = self.epoch;
        let links = self
            .links
            .iter_mut()
            .map(|l| {
                let mut arrived_total = 0u64;
                let classes = l
                    .queues
                    .iter_mut()
                    .zip(&self.groups)
                    .map(|(q, g)| {
                        arrived_total += q.arrived_epoch;
                        let throughput = to_mbit(q.served_epoch) / period;
                        let mean_backlog = q.backlog_ticks as f64 / ticks as f64 / scheduler::UNITS_PER_MBIT;
                        q.delay_estimate_ms = estimate_class_delay(
                            l.link.prop_delay_ms,
                            mean_backlog,
                            throughput,
                            g.sla.max_e2e_delay_ms,
                        );
                        ClassMeasurement {
                            group: g.id.clone(),
                            offered_mbps: to_mbit(q.arrived_epoch) / period,
                            throughput_mbps: throughput,
                            delay_ms: q.delay_estimate_ms,
                            loss_fraction: if q.arrived_epoch == 0 {
                                0.0
                            } else {
                                q.dropped_epoch as f64 / q.arrived_epoch as f64
                            },
                        }
                    })
                    .collect();
                LinkMeasurement {
                    epoch,
                    link: l.link.id.clone(),
                    classes,
                    utilization: to_mbit(arrived_total) / (l.link.capacity_mbps * period),
                }
            })
            .collect();

        let routes = self
            .demands
            .iter()
            .zip(&route_units)
            .flat_map(|(d, units)| {
                d.commodity.routes.iter().zip(units).map(|(r, &u)| RouteUsage {
                    commodity: d.commodity.id.clone(),
                    group: d.commodity.group.clone(),
                    route: r.id.clone(),
                    offered_mbit: to_mbit(u),
                })
            })
            .collect();
        let ingress_mbps = self
            .demands
            .iter()
            .zip(&ingress_units)
            .map(|(d, &u)| (d.commodity.id.clone(), to_mbit(u) / period))
            .collect();
        self.epoch += 1;
        EpochRecord { epoch, links, routes, ingress_mbps, delivered_mbit: to_mbit(delivered) }
    }

    /// Current backlog of every class on `link`, in Mbit.
    pub fn backlogs(&self, link: &crate::model::LinkId) -> Option<Vec<f64>> {
        let li = *self.link_index.get(link)?;
        Some(self.links[li].queues.iter().map(|q| to_mbit(q.backlog)).collect())
    }
}

/// Per-route offered rates for one demand; used by tests and the All-TNs fallback.
pub fn split_ingress(offered_mbps: f64, commodity: &Commodity, policy: &SprPolicy) -> Vec<(RouteId, f64)> {
    match policy.entries.get(&commodity.id) {
        Some(entry) => commodity
            .routes
            .iter()
            .map(|r| (r.id.clone(), offered_mbps * entry.split_ratios.get(&r.id).copied().unwrap_or(0.0)))
            .collect(),
        None => {
            let share = offered_mbps / commodity.routes.len() as f64;
            commodity.routes.iter().map(|r| (r.id.clone(), share)).collect()
        }
    }
}
