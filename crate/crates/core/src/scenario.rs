//! Scenario files: topology, flow groups, traffic, and loop parameters.
//!
//! Scenarios are JSON documents carrying an explicit `schema_version`. Two
//! scenarios ship with the crate and are addressable as `builtin:mstp_only`
//! and `builtin:sdwan_mix`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::delay::DelayModelSpec;
use crate::error::ScenarioError;
use crate::model::{
    validate_topology, CommodityId, FlowGroup, GroupId, NodeId, NodeRole, PriorityTier, Route,
    Topology,
};
use crate::qos::QosParams;
use crate::sim::traffic::TrafficSpec;

pub const SCHEMA_VERSION: u32 = 1;

const BUILTIN_PREFIX: &str = "builtin:";

const BUILTINS: &[(&str, &str)] = &[
    ("mstp_only", include_str!("../scenarios/mstp_only.json")),
    ("sdwan_mix", include_str!("../scenarios/sdwan_mix.json")),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyMode {
    /// All candidate routes used evenly, fixed queuing parameters.
    AllTns,
    /// Routing re-optimized for minimum MLU, fixed queuing parameters.
    Mlu,
    /// Routing and per-link rate allocation both re-optimized.
    MluQos,
}

impl PolicyMode {
    pub const ALL: [PolicyMode; 3] = [PolicyMode::AllTns, PolicyMode::Mlu, PolicyMode::MluQos];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyMode::AllTns => "all-tns",
            PolicyMode::Mlu => "mlu",
            PolicyMode::MluQos => "mlu-qos",
        }
    }
}

impl fmt::Display for PolicyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown policy mode `{s}` (expected all-tns, mlu or mlu-qos)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub tick_s: f64,
    pub measurement_period_s: f64,
    pub buffer_limit_mbit: f64,
    pub horizon_s: u64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            tick_s: 0.1,
            measurement_period_s: 1.0,
            buffer_limit_mbit: 0.25,
            horizon_s: 600,
            seed: 42,
        }
    }
}

impl SimConfig {
    pub fn ticks_per_epoch(&self) -> u64 {
        (self.measurement_period_s / self.tick_s).round() as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlConfig {
    pub spr_period_s: u64,
    pub qos_period_s: u64,
    pub policy_mode: PolicyMode,
    pub demand_ewma_alpha: f64,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            spr_period_s: 50,
            qos_period_s: 10,
            policy_mode: PolicyMode::MluQos,
            demand_ewma_alpha: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub topology: Topology,
    pub flow_groups: Vec<FlowGroup>,
    pub traffic: Vec<TrafficSpec>,
    #[serde(default)]
    pub delay_model: DelayModelSpec,
    #[serde(default)]
    pub qos: QosParams,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub control: ControlConfig,
}

/// One routed traffic aggregate: a flow group between one hub and one spoke.
#[derive(Debug, Clone, PartialEq)]
pub struct Commodity {
    pub id: CommodityId,
    pub group: GroupId,
    pub traffic: TrafficSpec,
    /// Candidate routes permitted by the group's allowed links, sorted by id.
    pub routes: Vec<Route>,
}

impl Scenario {
    pub fn group(&self, id: &GroupId) -> Option<&FlowGroup> {
        self.flow_groups.iter().find(|g| &g.id == id)
    }

    pub fn tiers(&self) -> BTreeMap<GroupId, PriorityTier> {
        self.flow_groups.iter().map(|g| (g.id.clone(), g.priority_tier)).collect()
    }

    pub fn commodity_id(traffic: &TrafficSpec) -> CommodityId {
        CommodityId(format!("{}:{}->{}", traffic.group, traffic.src, traffic.dst))
    }

    /// One commodity per traffic entry, in file order.
    pub fn commodities(&self) -> Vec<Commodity> {
        self.traffic
            .iter()
            .map(|t| {
                let routes = match self.group(&t.group) {
                    Some(g) => self
                        .topology
                        .routes_between(&t.src, &t.dst)
                        .into_iter()
                        .filter(|r| g.allows(r))
                        .collect(),
                    None => Vec::new(),
                };
                Commodity {
                    id: Self::commodity_id(t),
                    group: t.group.clone(),
                    traffic: t.clone(),
                    routes,
                }
            })
            .collect()
    }

    /// Every invariant violation, each naming the offending entity.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            out.push(format!("schema_version {} is not supported", self.schema_version));
        }
        out.extend(validate_topology(&self.topology));

        let link_ids: BTreeSet<_> = self.topology.links.iter().map(|l| &l.id).collect();
        let mut group_ids = BTreeSet::new();
        for g in &self.flow_groups {
            if !group_ids.insert(&g.id) {
                out.push(format!("flow group {}: duplicate id", g.id));
            }
            if !(g.sla.max_e2e_delay_ms > 0.0) {
                out.push(format!("flow group {}: max_e2e_delay_ms must be positive", g.id));
            }
            if !(g.demand_mbps >= 0.0) {
                out.push(format!("flow group {}: demand_mbps must be non-negative", g.id));
            }
            if let PriorityTier::Strict(rank) = g.priority_tier {
                if rank > PriorityTier::MAX_STRICT_RANK {
                    out.push(format!("flow group {}: strict rank {rank} exceeds 3", g.id));
                }
            }
            for l in &g.allowed_links {
                if !link_ids.contains(l) {
                    out.push(format!("flow group {}: allowed link {l} does not exist", g.id));
                }
            }
        }

        let mut pairs = BTreeSet::new();
        for (t, c) in self.traffic.iter().zip(self.commodities()) {
            if !pairs.insert(c.id.clone()) {
                out.push(format!("traffic {}: duplicate entry", c.id));
            }
            if !group_ids.contains(&t.group) {
                out.push(format!("traffic {}: unknown flow group {}", c.id, t.group));
                continue;
            }
            for end in [&t.src, &t.dst] {
                if self.topology.node(end).is_none() {
                    out.push(format!("traffic {}: unknown node {end}", c.id));
                }
            }
            if self.topology.node(&t.src).is_some_and(|n| n.role != NodeRole::Hub) {
                out.push(format!("traffic {}: source {} is not a hub", c.id, t.src));
            }
            if c.routes.is_empty() {
                out.push(format!("traffic {}: no allowed route from {} to {}", c.id, t.src, t.dst));
            }
            if !(t.base_rate_mbps >= 0.0) {
                out.push(format!("traffic {}: base_rate_mbps must be non-negative", c.id));
            }
            if !(0.0..1.0).contains(&t.diurnal_amplitude) {
                out.push(format!("traffic {}: diurnal_amplitude must be in [0, 1)", c.id));
            }
            if !(t.diurnal_period_s > 0.0) {
                out.push(format!("traffic {}: diurnal_period_s must be positive", c.id));
            }
            if !(t.noise_std >= 0.0) {
                out.push(format!("traffic {}: noise_std must be non-negative", c.id));
            }
        }

        if !(self.delay_model.mean_packet_bits > 0.0) {
            out.push("delay_model: mean_packet_bits must be positive".into());
        }
        if !(self.qos.alpha > 0.0) || !(self.qos.base_shortfall_penalty > 0.0) {
            out.push("qos: alpha and base_shortfall_penalty must be positive".into());
        }

        let sim = &self.sim;
        let ratio = sim.measurement_period_s / sim.tick_s;
        if !(sim.tick_s > 0.0) || (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
            out.push("sim: tick_s must divide measurement_period_s".into());
        }
        if sim.horizon_s == 0 {
            out.push("sim: horizon_s must be positive".into());
        }
        if !(sim.buffer_limit_mbit > 0.0) {
            out.push("sim: buffer_limit_mbit must be positive".into());
        }

        let ctl = &self.control;
        if ctl.qos_period_s == 0 || ctl.spr_period_s == 0 || !ctl.spr_period_s.is_multiple_of(ctl.qos_period_s)
        {
            out.push("control: qos_period_s must divide spr_period_s".into());
        }
        for (name, period) in [("spr_period_s", ctl.spr_period_s), ("qos_period_s", ctl.qos_period_s)] {
            let r = period as f64 / sim.measurement_period_s;
            if (r - r.round()).abs() > 1e-9 {
                out.push(format!("control: {name} must be a multiple of the measurement period"));
            }
        }
        if sim.measurement_period_s != 1.0 {
            out.push("sim: measurement_period_s must be 1 s (control runs on whole seconds)".into());
        }
        if !(0.0..=1.0).contains(&ctl.demand_ewma_alpha) || ctl.demand_ewma_alpha == 0.0 {
            out.push("control: demand_ewma_alpha must be in (0, 1]".into());
        }
        out
    }
}

fn parse(source: &str, text: &str) -> Result<Scenario, ScenarioError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        ScenarioError::Parse {
            path: source.to_owned(),
            line: inner.line(),
            column: inner.column(),
            field,
            message: inner.to_string(),
        }
    })?;
    if scenario.schema_version != SCHEMA_VERSION {
        return Err(ScenarioError::UnsupportedVersion(scenario.schema_version));
    }
    let violations = scenario.violations();
    if !violations.is_empty() {
        return Err(ScenarioError::Invalid(violations));
    }
    Ok(scenario)
}

/// Parses and validates scenario JSON.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    parse("<inline>", text)
}

pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    BUILTINS.iter().map(|(n, _)| *n)
}

pub fn builtin(name: &str) -> Result<Scenario, ScenarioError> {
    let (_, text) = BUILTINS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| ScenarioError::UnknownBuiltin(name.to_owned()))?;
    parse(&format!("{BUILTIN_PREFIX}{name}"), text)
}

/// Loads `builtin:NAME` or a JSON file path.
pub fn load_scenario(spec: &str) -> Result<Scenario, ScenarioError> {
    if let Some(name) = spec.strip_prefix(BUILTIN_PREFIX) {
        return builtin(name);
    }
    let path = Path::new(spec);
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse(spec, &text)
}

/// Spoke-side sites in id order.
pub fn spokes(topology: &Topology) -> Vec<NodeId> {
    let mut v: Vec<NodeId> = topology
        .nodes
        .iter()
        .filter(|n| n.role == NodeRole::Spoke)
        .map(|n| n.id.clone())
        .collect();
    v.sort();
    v
}
