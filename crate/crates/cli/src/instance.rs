//! Standalone solver instance files for `spr-solve` and `qos-solve`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use sdwan_core::delay::DelayModelSpec;
use sdwan_core::model::{CommodityId, GroupId, LinkId, OverlayLink, Route, Topology};
use sdwan_core::qos::{QosClass, QosParams};
use sdwan_core::spr::{SprDemand, SprInstance, SprObjective};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SprMethod {
    #[default]
    Lp,
    LocalSearch,
}

#[derive(Debug, Clone, Deserialize)]
pub struct DemandEntry {
    pub id: CommodityId,
    pub group: GroupId,
    pub demand_mbps: f64,
    pub sla_ms: f64,
    /// Each route is the ordered list of its link ids.
    pub routes: Vec<Vec<LinkId>>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct SprInstanceFile {
    pub topology: Topology,
    pub demands: Vec<DemandEntry>,
    #[serde(default)]
    pub objective: SprObjective,
    #[serde(default)]
    pub measured_loads: BTreeMap<LinkId, f64>,
    #[serde(default)]
    pub delay_model: DelayModelSpec,
    #[serde(default)]
    pub method: SprMethod,
    #[serde(default)]
    pub seed: u64,
}

impl SprInstanceFile {
    pub fn instance(&self) -> SprInstance<'_> {
        SprInstance {
            topology: &self.topology,
            demands: self
                .demands
                .iter()
                .map(|d| SprDemand {
                    id: d.id.clone(),
                    group: d.group.clone(),
                    demand_mbps: d.demand_mbps,
                    sla_ms: d.sla_ms,
                    candidates: d.routes.iter().map(|r| Route::new(r.clone())).collect(),
                })
                .collect(),
            objective: self.objective,
            measured_loads: self.measured_loads.clone(),
        }
    }

    /// Ids that do not resolve against the topology.
    pub fn dangling_links(&self) -> Vec<String> {
        self.demands
            .iter()
            .flat_map(|d| d.routes.iter().flatten().map(move |l| (d, l)))
            .filter(|(_, l)| self.topology.link(l).is_none())
            .map(|(d, l)| format!("demand {}: unknown link {l}", d.id))
            .collect()
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct QosInstanceFile {
    pub link: OverlayLink,
    pub classes: Vec<QosClass>,
    #[serde(default)]
    pub params: QosParams,
    #[serde(default)]
    pub delay_model: DelayModelSpec,
}
