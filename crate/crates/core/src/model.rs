//! Shared domain types: topology, flow groups, routing and QoS policies, and
//! per-epoch link measurements.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Split fractions at or below this share of a demand are not installed on devices.
pub const ACTIVATION_THRESHOLD: f64 = 0.01;

/// Smallest rate (Mbps) the QoS optimizer hands to a class with positive demand.
pub const RATE_FLOOR: f64 = 0.01;

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

string_id!(
    /// Identifier of a site (hub or spoke).
    NodeId
);
string_id!(
    /// Identifier of an overlay link.
    LinkId
);
string_id!(
    /// Identifier of a flow group (application class).
    GroupId
);
string_id!(
    /// Identifier of a route: its link ids joined by `+`.
    RouteId
);
string_id!(
    /// Identifier of a routed demand, `group:src->dst`.
    CommodityId
);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeRole {
    Hub,
    Spoke,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub role: NodeRole,
}

/// Access network an overlay link rides on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LinkKind {
    #[serde(rename = "MSTP")]
    Mstp,
    #[serde(rename = "MV")]
    Mv,
    #[serde(rename = "MAN")]
    Man,
}

/// A directed overlay tunnel between two sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlayLink {
    pub id: LinkId,
    pub src: NodeId,
    pub dst: NodeId,
    /// Bandwidth in Mbps.
    pub capacity_mbps: f64,
    /// One-way propagation delay in ms.
    pub prop_delay_ms: f64,
    pub kind: LinkKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub nodes: Vec<Node>,
    pub links: Vec<OverlayLink>,
}

impl Topology {
    pub fn link(&self, id: &LinkId) -> Option<&OverlayLink> {
        self.links.iter().find(|l| &l.id == id)
    }

    pub fn node(&self, id: &NodeId) -> Option<&Node> {
        self.nodes.iter().find(|n| &n.id == id)
    }

    /// Enumerates the candidate routes from `src` to `dst`: every direct link,
    /// then every two-hop relay through another hub. Routes come out sorted by id.
    pub fn routes_between(&self, src: &NodeId, dst: &NodeId) -> Vec<Route> {
        let mut routes: Vec<Route> = self
            .links
            .iter()
            .filter(|l| &l.src == src && &l.dst == dst)
            .map(|l| Route::new(vec![l.id.clone()]))
            .collect();
        for first in self.links.iter().filter(|l| &l.src == src && &l.dst != dst) {
            let via_hub = self
                .node(&first.dst)
                .is_some_and(|n| n.role == NodeRole::Hub);
            if !via_hub {
                continue;
            }
            for second in self
                .links
                .iter()
                .filter(|l| l.src == first.dst && &l.dst == dst)
            {
                routes.push(Route::new(vec![first.id.clone(), second.id.clone()]));
            }
        }
        routes.sort_by(|a, b| a.id.cmp(&b.id));
        routes
    }
}

/// An ordered sequence of overlay links. Single-link routes are the common
/// case; hub relays use two.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Route {
    pub id: RouteId,
    pub links: Vec<LinkId>,
}

impl Route {
    pub fn new(links: Vec<LinkId>) -> Self {
        let id = RouteId(
            links
                .iter()
                .map(LinkId::as_str)
                .collect::<Vec<_>>()
                .join("+"),
        );
        Self { id, links }
    }

    pub fn single(link: impl Into<LinkId>) -> Self {
        Self::new(vec![link.into()])
    }

    pub fn prop_delay_ms(&self, topology: &Topology) -> f64 {
        self.links
            .iter()
            .filter_map(|l| topology.link(l))
            .map(|l| l.prop_delay_ms)
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlaSpec {
    /// End-to-end delay bound in ms.
    pub max_e2e_delay_ms: f64,
}

/// Scheduling tier: strict-priority queues preempt everything below them,
/// weighted classes share what is left.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorityTier {
    Strict(u8),
    Weighted,
}

impl PriorityTier {
    /// Highest strict rank (rank 0 is served first).
    pub const MAX_STRICT_RANK: u8 = 3;

    pub fn is_strict(self) -> bool {
        matches!(self, PriorityTier::Strict(_))
    }

    /// Priority weight used to scale the shortfall penalty: rank 0 gets 4,
    /// rank 3 gets 1, weighted classes 0.
    pub fn weight(self) -> f64 {
        match self {
            PriorityTier::Strict(rank) => f64::from(Self::MAX_STRICT_RANK + 1 - rank.min(3)),
            PriorityTier::Weighted => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowGroup {
    pub id: GroupId,
    pub name: String,
    pub sla: SlaSpec,
    pub priority_tier: PriorityTier,
    pub allowed_links: BTreeSet<LinkId>,
    #[serde(default)]
    pub demand_mbps: f64,
}

impl FlowGroup {
    pub fn allows(&self, route: &Route) -> bool {
        route.links.iter().all(|l| self.allowed_links.contains(l))
    }
}

/// Routing decision for one demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitEntry {
    pub split_ratios: BTreeMap<RouteId, f64>,
    pub active_set: BTreeSet<RouteId>,
}

impl SplitEntry {
    /// Uniform split over `routes`, all active.
    pub fn uniform<'a>(routes: impl IntoIterator<Item = &'a RouteId>) -> Self {
        let routes: Vec<&RouteId> = routes.into_iter().collect();
        let share = 1.0 / routes.len().max(1) as f64;
        Self {
            split_ratios: routes.iter().map(|r| ((*r).clone(), share)).collect(),
            active_set: routes.into_iter().cloned().collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SprPolicy {
    pub entries: BTreeMap<CommodityId, SplitEntry>,
}

impl SprPolicy {
    /// Checks the split invariants; returns a description per violation.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (id, entry) in &self.entries {
            let sum: f64 = entry.split_ratios.values().sum();
            if (sum - 1.0).abs() > 1e-9 {
                out.push(format!("{id}: split ratios sum to {sum}"));
            }
            for (route, &x) in &entry.split_ratios {
                if !(0.0..=1.0).contains(&x) {
                    out.push(format!("{id}: ratio {x} on {route} outside [0, 1]"));
                }
                if (x > ACTIVATION_THRESHOLD) != entry.active_set.contains(route) {
                    out.push(format!("{id}: active set disagrees with ratio on {route}"));
                }
            }
        }
        out
    }
}

/// QoS parameters for one link.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinkQos {
    pub alloc_rates: BTreeMap<GroupId, f64>,
    pub wfq_weights: BTreeMap<GroupId, f64>,
    pub shaper_rates: BTreeMap<GroupId, f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QosPolicy {
    pub links: BTreeMap<LinkId, LinkQos>,
}

/// Observations of one class on one link over a measurement epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMeasurement {
    pub group: GroupId,
    pub offered_mbps: f64,
    pub throughput_mbps: f64,
    pub delay_ms: f64,
    pub loss_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkMeasurement {
    pub epoch: u64,
    pub link: LinkId,
    pub classes: Vec<ClassMeasurement>,
    pub utilization: f64,
}

/// Checks every topology invariant; an empty result means the topology is valid.
pub fn validate_topology(topology: &Topology) -> Vec<String> {
    let mut out = Vec::new();
    let mut node_ids = BTreeSet::new();
    for node in &topology.nodes {
        if !node_ids.insert(&node.id) {
            out.push(format!("node {}: duplicate id", node.id));
        }
    }
    let mut link_ids = BTreeSet::new();
    for link in &topology.links {
        if !link_ids.insert(&link.id) {
            out.push(format!("link {}: duplicate id", link.id));
        }
        if !(link.capacity_mbps > 0.0 && link.capacity_mbps.is_finite()) {
            out.push(format!(
                "link {}: capacity {} Mbps must be positive",
                link.id, link.capacity_mbps
            ));
        }
        if !(link.prop_delay_ms >= 0.0 && link.prop_delay_ms.is_finite()) {
            out.push(format!(
                "link {}: propagation delay {} ms must be non-negative",
                link.id, link.prop_delay_ms
            ));
        }
        for end in [&link.src, &link.dst] {
            if !node_ids.contains(end) {
                out.push(format!("link {}: endpoint {} does not exist", link.id, end));
            }
        }
    }
    out
}

/// Dense, lexicographically ordered index of the topology's links.
pub fn index_links(topology: &Topology) -> Result<BTreeMap<LinkId, usize>, ModelError> {
    let mut ids: Vec<&LinkId> = topology.links.iter().map(|l| &l.id).collect();
    ids.sort();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(ModelError::DuplicateLink(w[0].clone()));
    }
    Ok(ids.into_iter().cloned().enumerate().map(|(i, id)| (id, i)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn link(id: &str, src: &str, dst: &str, cap: f64, prop: f64, kind: LinkKind) -> OverlayLink {
        OverlayLink {
            id: id.into(),
            src: src.into(),
            dst: dst.into(),
            capacity_mbps: cap,
            prop_delay_ms: prop,
            kind,
        }
    }

    fn nodes() -> Vec<Node> {
        let mut v = vec![];
        for h in ["h1", "h2"] {
            v.push(Node { id: h.into(), role: NodeRole::Hub });
        }
        for s in ["s1", "s2", "s3"] {
            v.push(Node { id: s.into(), role: NodeRole::Spoke });
        }
        v
    }

    fn mixed() -> Topology {
        let mut links = vec![];
        for h in ["h1", "h2"] {
            for s in ["s1", "s2", "s3"] {
                links.push(link(&format!("mstp-{h}-{s}"), h, s, 6.0, 10.0, LinkKind::Mstp));
                links.push(link(&format!("mv-{h}-{s}"), h, s, 12.0, 15.0, LinkKind::Mv));
            }
        }
        links.push(link("man-h1-h2", "h1", "h2", 4.0, 2.0, LinkKind::Man));
        links.push(link("man-h2-h1", "h2", "h1", 4.0, 2.0, LinkKind::Man));
        Topology { nodes: nodes(), links }
    }

    #[test]
    fn mixed_topology_is_valid() {
        assert!(validate_topology(&mixed()).is_empty());
    }

    #[test]
    fn zero_capacity_is_reported() {
        let mut t = mixed();
        t.links[0].capacity_mbps = 0.0;
        let v = validate_topology(&t);
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("mstp-h1-s1"));
    }

    #[test]
    fn dangling_endpoint_is_reported() {
        let mut t = mixed();
        t.links[3].src = "h9".into();
        let v = validate_topology(&t);
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("h9"));
    }

    #[test]
    fn index_is_lexicographic() {
        let mut t = mixed();
        t.links = ["L2", "L10", "L1"]
            .iter()
            .map(|id| link(id, "h1", "s1", 1.0, 1.0, LinkKind::Mv))
            .collect();
        let idx = index_links(&t).unwrap();
        assert_eq!(idx[&LinkId::from("L1")], 0);
        assert_eq!(idx[&LinkId::from("L10")], 1);
        assert_eq!(idx[&LinkId::from("L2")], 2);

        t.links.clear();
        assert!(index_links(&t).unwrap().is_empty());

        t.links = ["c", "a", "b"]
            .iter()
            .map(|id| link(id, "h1", "s1", 1.0, 1.0, LinkKind::Mv))
            .collect();
        let idx: Vec<_> = index_links(&t).unwrap().into_iter().collect();
        assert_eq!(idx, vec![("a".into(), 0), ("b".into(), 1), ("c".into(), 2)]);
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let mut t = mixed();
        t.links.push(t.links[0].clone());
        assert!(matches!(index_links(&t), Err(ModelError::DuplicateLink(_))));
        assert_eq!(validate_topology(&t).len(), 1);
    }

    #[test]
    fn relay_routes_go_through_hubs() {
        let t = mixed();
        let routes: Vec<String> = t
            .routes_between(&"h1".into(), &"s1".into())
            .into_iter()
            .map(|r| r.id.0)
            .collect();
        assert_eq!(
            routes,
            vec![
                "man-h1-h2+mstp-h2-s1",
                "man-h1-h2+mv-h2-s1",
                "mstp-h1-s1",
                "mv-h1-s1"
            ]
        );
        let relay = Route::new(vec!["man-h1-h2".into(), "mv-h2-s1".into()]);
        assert_eq!(relay.prop_delay_ms(&t), 17.0);
    }

    #[test]
    fn tier_weights() {
        assert_eq!(PriorityTier::Strict(0).weight(), 4.0);
        assert_eq!(PriorityTier::Strict(3).weight(), 1.0);
        assert_eq!(PriorityTier::Weighted.weight(), 0.0);
    }

    #[test]
    fn policy_violations_catch_bad_sums() {
        let mut p = SprPolicy::default();
        let routes: Vec<RouteId> = vec!["a".into(), "b".into()];
        p.entries.insert("k".into(), SplitEntry::uniform(&routes));
        assert!(p.violations().is_empty());
        p.entries.get_mut(&CommodityId::from("k")).unwrap().split_ratios
            .insert("a".into(), 0.7);
        assert_eq!(p.violations().len(), 1);
    }
}
