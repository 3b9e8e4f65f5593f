//! SLA satisfaction and delay statistics per flow group.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::ExperimentError;
use crate::model::GroupId;
use crate::scenario::{PolicyMode, Scenario};
use crate::sim::EpochRecord;

/// End-to-end delay of one flow group in one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct E2eSample {
    pub epoch: u64,
    pub group: GroupId,
    pub delay_ms: f64,
    /// Offered volume behind the sample; zero means the convention delay was used.
    pub offered_mbit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub group: GroupId,
    pub sla_ms: f64,
    pub sla_satisfaction_pct: f64,
    pub avg_delay_ms: f64,
    pub p95_delay_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub mode: PolicyMode,
    pub seed: u64,
    pub horizon_s: u64,
    pub groups: Vec<GroupReport>,
    /// Maximum link utilization per epoch.
    pub mlu: Vec<f64>,
    pub offered_mbit: f64,
    pub delivered_mbit: f64,
    pub spr_solves: usize,
    pub qos_solves: usize,
}

impl RunReport {
    pub fn group(&self, id: &str) -> Option<&GroupReport> {
        self.groups.iter().find(|g| g.group.as_str() == id)
    }
}

/// Nearest-rank percentile: the smallest sample with at least `p`% of the
/// samples at or below it.
pub fn percentile_nearest_rank(samples: &[f64], p: f64) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

/// Traffic-weighted route delay per group and epoch, where a route's delay is
/// the sum of its links' per-class delays. Groups without traffic in an epoch
/// get the mean propagation delay of their candidate routes.
pub fn e2e_samples(records: &[EpochRecord], scenario: &Scenario) -> Vec<E2eSample> {
    let commodities = scenario.commodities();
    let mut idle_delay: BTreeMap<&GroupId, (f64, usize)> = BTreeMap::new();
    for c in &commodities {
        let slot = idle_delay.entry(&c.group).or_insert((0.0, 0));
        for r in &c.routes {
            slot.0 += r.prop_delay_ms(&scenario.topology);
            slot.1 += 1;
        }
    }
    let route_links: BTreeMap<(&str, &str), &[crate::model::LinkId]> = commodities
        .iter()
        .flat_map(|c| c.routes.iter().map(move |r| ((c.id.as_str(), r.id.as_str()), r.links.as_slice())))
        .collect();

    let mut out = Vec::new();
    for rec in records {
        let link_delay: BTreeMap<(&str, &str), f64> = rec
            .links
            .iter()
            .flat_map(|l| {
                l.classes.iter().map(move |c| ((l.link.as_str(), c.group.as_str()), c.delay_ms))
            })
            .collect();
        let mut acc: BTreeMap<&GroupId, (f64, f64)> = BTreeMap::new();
        for u in &rec.routes {
            let slot = acc.entry(&u.group).or_insert((0.0, 0.0));
            if u.offered_mbit <= 0.0 {
                continue;
            }
            let links = route_links[&(u.commodity.as_str(), u.route.as_str())];
            let d: f64 = links
                .iter()
                .map(|l| link_delay.get(&(l.as_str(), u.group.as_str())).copied().unwrap_or(0.0))
                .sum();
            slot.0 += u.offered_mbit * d;
            slot.1 += u.offered_mbit;
        }
        for g in &scenario.flow_groups {
            let (weighted, volume) = acc.get(&g.id).copied().unwrap_or((0.0, 0.0));
            let delay_ms = if volume > 0.0 {
                weighted / volume
            } else {
                idle_delay.get(&g.id).map_or(0.0, |&(s, n)| if n == 0 { 0.0 } else { s / n as f64 })
            };
            out.push(E2eSample { epoch: rec.epoch, group: g.id.clone(), delay_ms, offered_mbit: volume });
        }
    }
    out
}

/// Satisfaction, mean and p95 per group, in scenario group order.
pub fn summarize_groups(
    samples: &[E2eSample],
    scenario: &Scenario,
) -> Result<Vec<GroupReport>, ExperimentError> {
    scenario
        .flow_groups
        .iter()
        .map(|g| {
            let delays: Vec<f64> =
                samples.iter().filter(|s| s.group == g.id).map(|s| s.delay_ms).collect();
            let p95 = percentile_nearest_rank(&delays, 95.0).ok_or(ExperimentError::EmptyStream)?;
            let sla = g.sla.max_e2e_delay_ms;
            let satisfied = delays.iter().filter(|&&d| d <= sla).count();
            let n = delays.len() as f64;
            Ok(GroupReport {
                group: g.id.clone(),
                sla_ms: sla,
                sla_satisfaction_pct: 100.0 * satisfied as f64 / n,
                avg_delay_ms: delays.iter().sum::<f64>() / n,
                p95_delay_ms: p95,
            })
        })
        .collect()
}

pub fn epoch_mlu(record: &EpochRecord) -> f64 {
    record.links.iter().map(|l| l.utilization).fold(0.0, f64::max)
}

/// Everything in a [`RunReport`] that derives from the measurement stream.
pub struct ReportBody {
    pub groups: Vec<GroupReport>,
    pub mlu: Vec<f64>,
    pub offered_mbit: f64,
    pub delivered_mbit: f64,
    pub samples: Vec<E2eSample>,
}

pub fn compute_report(records: &[EpochRecord], scenario: &Scenario) -> Result<ReportBody, ExperimentError> {
    if records.is_empty() {
        return Err(ExperimentError::EmptyStream);
    }
    let samples = e2e_samples(records, scenario);
    let groups = summarize_groups(&samples, scenario)?;
    let period = scenario.sim.measurement_period_s;
    Ok(ReportBody {
        groups,
        mlu: records.iter().map(epoch_mlu).collect(),
        offered_mbit: records.iter().flat_map(|r| r.ingress_mbps.values()).sum::<f64>() * period,
        delivered_mbit: records.iter().map(|r| r.delivered_mbit).sum(),
        samples,
    })
}
