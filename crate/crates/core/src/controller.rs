//! Centralized control plane: a slow routing loop and a fast QoS loop,
//! both time-triggered and run in lockstep with the simulator clock.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{SolverError, SprError};
use crate::model::{CommodityId, GroupId, LinkId, LinkQos, PriorityTier, QosPolicy, SprPolicy};
use crate::qos::{apply_outcomes, solve_qos_all, LinkQosOutcome, QosClass};
use crate::scenario::{Commodity, PolicyMode, Scenario};
use crate::sim::EpochRecord;
use crate::spr::{extract_policy, solve_spr, SprDemand, SprInstance, SprObjective, SprStatus};

/// One EWMA step; the first observation initializes the estimate.
pub fn ewma(prior: Option<f64>, observed: f64, alpha: f64) -> f64 {
    match prior {
        Some(p) => alpha * observed + (1.0 - alpha) * p,
        None => observed,
    }
}

/// Smoothed offered rates (pre-drop), per demand and per link class.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DemandEstimate {
    pub commodities: BTreeMap<CommodityId, f64>,
    pub link_classes: BTreeMap<LinkId, BTreeMap<GroupId, f64>>,
}

/// Folds one measurement epoch into the estimate.
pub fn update_demand(estimate: &DemandEstimate, record: &EpochRecord, alpha: f64) -> DemandEstimate {
    let mut next = estimate.clone();
    for (id, &observed) in &record.ingress_mbps {
        let v = ewma(estimate.commodities.get(id).copied(), observed, alpha);
        next.commodities.insert(id.clone(), v);
    }
    for link in &record.links {
        let prior = estimate.link_classes.get(&link.link);
        let slot = next.link_classes.entry(link.link.clone()).or_default();
        for c in &link.classes {
            let p = prior.and_then(|m| m.get(&c.group).copied());
            slot.insert(c.group.clone(), ewma(p, c.offered_mbps, alpha));
        }
    }
    next
}

/// Equal WFQ weights among weighted classes on every link; no shapers.
pub fn default_qos_policy<'a>(
    links: impl IntoIterator<Item = &'a LinkId>,
    tiers: &BTreeMap<GroupId, PriorityTier>,
) -> QosPolicy {
    let weighted: Vec<&GroupId> =
        tiers.iter().filter(|(_, t)| !t.is_strict()).map(|(g, _)| g).collect();
    let mut link_qos = LinkQos::default();
    for g in &weighted {
        link_qos.wfq_weights.insert((*g).clone(), 1.0 / weighted.len() as f64);
    }
    QosPolicy { links: links.into_iter().map(|l| (l.clone(), link_qos.clone())).collect() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlLoop {
    Spr,
    Qos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyAction {
    Install,
    Hold,
}

/// One changed policy value; `None` means absent on that side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyChange {
    pub key: String,
    pub old: Option<f64>,
    pub new: Option<f64>,
}

/// A line of the policy-change log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEvent {
    pub time_s: u64,
    pub mode: PolicyMode,
    #[serde(rename = "loop")]
    pub control_loop: ControlLoop,
    pub action: PolicyAction,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub changes: Vec<PolicyChange>,
}

fn diff_maps(prefix: &str, old: &BTreeMap<String, f64>, new: &BTreeMap<String, f64>, out: &mut Vec<PolicyChange>) {
    let keys: std::collections::BTreeSet<&String> = old.keys().chain(new.keys()).collect();
    for k in keys {
        let (o, n) = (old.get(k).copied(), new.get(k).copied());
        if o != n {
            out.push(PolicyChange { key: format!("{prefix}{k}"), old: o, new: n });
        }
    }
}

fn spr_flat(p: &SprPolicy) -> BTreeMap<String, f64> {
    p.entries
        .iter()
        .flat_map(|(c, e)| e.split_ratios.iter().map(move |(r, v)| (format!("{c}/{r}"), *v)))
        .collect()
}

fn qos_flat(p: &QosPolicy) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for (l, q) in &p.links {
        for (field, m) in [("alloc", &q.alloc_rates), ("weight", &q.wfq_weights), ("shaper", &q.shaper_rates)] {
            for (g, v) in m {
                out.insert(format!("{l}/{g}/{field}"), *v);
            }
        }
    }
    out
}

pub struct Controller {
    mode: PolicyMode,
    alpha: f64,
    spr_period: u64,
    qos_period: u64,
    scenario: Scenario,
    commodities: Vec<Commodity>,
    pub estimate: DemandEstimate,
    pub spr_policy: SprPolicy,
    pub qos_policy: QosPolicy,
    pub events: Vec<PolicyEvent>,
    pub spr_solves: usize,
    pub qos_solves: usize,
}

impl Controller {
    /// Starts from the uniform split and the default queuing parameters, with
    /// demand estimates seeded from the scenario's base rates.
    pub fn new(scenario: &Scenario, mode: PolicyMode) -> Self {
        let commodities = scenario.commodities();
        let estimate = DemandEstimate {
            commodities: commodities
                .iter()
                .map(|c| (c.id.clone(), c.traffic.base_rate_mbps))
                .collect(),
            link_classes: BTreeMap::new(),
        };
        let qos_policy =
            default_qos_policy(scenario.topology.links.iter().map(|l| &l.id), &scenario.tiers());
        Self {
            mode,
            alpha: scenario.control.demand_ewma_alpha,
            spr_period: scenario.control.spr_period_s,
            qos_period: scenario.control.qos_period_s,
            scenario: scenario.clone(),
            commodities,
            estimate,
            spr_policy: SprPolicy::default(),
            qos_policy,
            events: Vec::new(),
            spr_solves: 0,
            qos_solves: 0,
        }
    }

    pub fn observe(&mut self, record: &EpochRecord) {
        self.estimate = update_demand(&self.estimate, record, self.alpha);
    }

    /// Runs whichever loops are due at `time_s`. Infeasibility holds the
    /// installed policy; numerical solver faults are returned.
    pub fn control_step(&mut self, time_s: u64) -> Result<(), SolverError> {
        let routing = matches!(self.mode, PolicyMode::Mlu | PolicyMode::MluQos);
        let mut rerouted = false;
        if routing && time_s.is_multiple_of(self.spr_period) {
            rerouted = self.spr_step(time_s)?;
        }
        if self.mode == PolicyMode::MluQos && time_s.is_multiple_of(self.qos_period) {
            self.qos_step(time_s, rerouted);
        }
        Ok(())
    }

    fn spr_step(&mut self, time_s: u64) -> Result<bool, SolverError> {
        self.spr_solves += 1;
        let demands = self
            .commodities
            .iter()
            .map(|c| SprDemand {
                id: c.id.clone(),
                group: c.group.clone(),
                demand_mbps: self.estimate.commodities.get(&c.id).copied().unwrap_or(0.0),
                sla_ms: self.scenario.group(&c.group).map_or(f64::INFINITY, |g| g.sla.max_e2e_delay_ms),
                candidates: c.routes.clone(),
            })
            .collect();
        let instance = SprInstance {
            topology: &self.scenario.topology,
            demands,
            objective: SprObjective::MinMlu,
            measured_loads: BTreeMap::new(),
        };
        let hold = match solve_spr(&instance, &self.scenario.delay_model) {
            Ok(sol) if sol.status != SprStatus::Infeasible => {
                let policy = extract_policy(&sol);
                let mut changes = Vec::new();
                diff_maps("", &spr_flat(&self.spr_policy), &spr_flat(&policy), &mut changes);
                self.spr_policy = policy;
                self.log(time_s, ControlLoop::Spr, PolicyAction::Install, None, changes);
                return Ok(true);
            }
            Ok(_) => "routing problem is infeasible".to_string(),
            Err(SprError::NoFeasibleRoute(c)) => format!("demand {c} has no delay-feasible route"),
            Err(SprError::Solver(e)) => return Err(e),
        };
        self.log(time_s, ControlLoop::Spr, PolicyAction::Hold, Some(hold), Vec::new());
        Ok(false)
    }

    /// Per-link class demands implied by the smoothed demand and the
    /// installed routing policy.
    pub fn projected_link_demand(&self) -> BTreeMap<LinkId, BTreeMap<GroupId, f64>> {
        let mut out: BTreeMap<LinkId, BTreeMap<GroupId, f64>> = BTreeMap::new();
        for c in &self.commodities {
            let b = self.estimate.commodities.get(&c.id).copied().unwrap_or(0.0);
            for (route, share) in crate::sim::split_ingress(b, c, &self.spr_policy) {
                let Some(r) = c.routes.iter().find(|r| r.id == route) else { continue };
                for l in &r.links {
                    *out.entry(l.clone()).or_default().entry(c.group.clone()).or_insert(0.0) += share;
                }
            }
        }
        out
    }

    fn qos_step(&mut self, time_s: u64, rerouted: bool) {
        self.qos_solves += 1;
        // Right after a reroute the measured per-link history describes the
        // old routing, so the projection is used instead.
        let demand = if rerouted || self.estimate.link_classes.is_empty() {
            self.projected_link_demand()
        } else {
            self.estimate.link_classes.clone()
        };
        let class_demands: BTreeMap<LinkId, Vec<QosClass>> = demand
            .into_iter()
            .map(|(l, groups)| {
                let classes = groups
                    .into_iter()
                    .filter_map(|(g, d)| {
                        let fg = self.scenario.group(&g)?;
                        Some(QosClass {
                            group: g,
                            demand_mbps: d,
                            sla_ms: fg.sla.max_e2e_delay_ms,
                            tier: fg.priority_tier,
                        })
                    })
                    .collect();
                (l, classes)
            })
            .collect();
        let outcomes = solve_qos_all(
            &self.scenario.topology.links,
            &class_demands,
            &self.scenario.delay_model,
            &self.scenario.qos,
        );
        let before = qos_flat(&self.qos_policy);
        apply_outcomes(&mut self.qos_policy, &outcomes, &self.scenario.tiers());
        let mut changes = Vec::new();
        diff_maps("", &before, &qos_flat(&self.qos_policy), &mut changes);
        self.log(time_s, ControlLoop::Qos, PolicyAction::Install, None, changes);
        for (link, outcome) in &outcomes {
            if let LinkQosOutcome::Failed(e) = outcome {
                self.log(
                    time_s,
                    ControlLoop::Qos,
                    PolicyAction::Hold,
                    Some(format!("link {link}: {e}")),
                    Vec::new(),
                );
            }
        }
    }

    fn log(
        &mut self,
        time_s: u64,
        control_loop: ControlLoop,
        action: PolicyAction,
        reason: Option<String>,
        changes: Vec<PolicyChange>,
    ) {
        self.events.push(PolicyEvent { time_s, mode: self.mode, control_loop, action, reason, changes });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::builtin;

    #[test]
    fn ewma_arithmetic() {
        assert!((ewma(Some(4.0), 8.0, 0.3) - 5.2).abs() < 1e-12);
        assert_eq!(ewma(None, 7.0, 0.3), 7.0);
        let mut b = Some(1.0);
        for _ in 0..50 {
            b = Some(ewma(b, 0.0, 0.3));
        }
        assert!(b.unwrap() < 0.7_f64.powi(49));
    }

    #[test]
    fn default_policy_weights() {
        let links = [LinkId::from("e")];
        let two = BTreeMap::from([
            (GroupId::from("a"), PriorityTier::Weighted),
            (GroupId::from("b"), PriorityTier::Weighted),
            (GroupId::from("c"), PriorityTier::Strict(0)),
        ]);
        let q = default_qos_policy(&links, &two);
        let w = &q.links[&links[0]].wfq_weights;
        assert_eq!(w.values().copied().collect::<Vec<_>>(), vec![0.5, 0.5]);
        assert!(q.links[&links[0]].shaper_rates.is_empty());

        let one = BTreeMap::from([(GroupId::from("a"), PriorityTier::Weighted)]);
        assert_eq!(default_qos_policy(&links, &one).links[&links[0]].wfq_weights.len(), 1);
        let none = BTreeMap::from([(GroupId::from("c"), PriorityTier::Strict(1))]);
        assert!(default_qos_policy(&links, &none).links[&links[0]].wfq_weights.is_empty());
    }

    #[test]
    fn cadence_per_mode() {
        let scenario = builtin("sdwan_mix").unwrap();
        for (mode, spr, qos) in
            [(PolicyMode::AllTns, 0, 0), (PolicyMode::Mlu, 3, 0), (PolicyMode::MluQos, 3, 11)]
        {
            let mut c = Controller::new(&scenario, mode);
            for t in 0..=100 {
                c.control_step(t).unwrap();
            }
            assert_eq!((c.spr_solves, c.qos_solves), (spr, qos), "{mode:?}");
        }
    }

    #[test]
    fn all_tns_keeps_uniform_split() {
        let scenario = builtin("sdwan_mix").unwrap();
        let mut c = Controller::new(&scenario, PolicyMode::AllTns);
        c.control_step(0).unwrap();
        assert!(c.spr_policy.entries.is_empty() && c.events.is_empty());
    }

    #[test]
    fn infeasible_routing_holds_policy() {
        let mut scenario = builtin("sdwan_mix").unwrap();
        let mut c = Controller::new(&scenario, PolicyMode::Mlu);
        c.control_step(0).unwrap();
        let installed = c.spr_policy.clone();
        assert!(!installed.entries.is_empty());

        // Demand far beyond every link: the capped LP has no feasible point.
        for t in &mut scenario.traffic {
            t.base_rate_mbps *= 100.0;
        }
        let mut overloaded = Controller::new(&scenario, PolicyMode::Mlu);
        overloaded.spr_policy = installed.clone();
        overloaded.control_step(50).unwrap();
        assert_eq!(overloaded.spr_policy, installed);
        let last = overloaded.events.last().unwrap();
        assert_eq!(last.action, PolicyAction::Hold);
        assert!(overloaded.spr_policy.violations().is_empty());
    }
}
