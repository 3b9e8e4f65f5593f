//! Slow-loop routing optimization: choose split fractions of every demand over
//! its candidate routes, minimizing either the maximum link utilization or the
//! predicted delay, subject to link capacities and per-group delay bounds.
//!
//! Delay bounds are linearized into link load caps. A route's slack
//! `D_k - prop(route)` is divided evenly among its links, and each link's cap
//! is the load at which the M/M/1 delay reaches its share of the bound. For a
//! single-link route this is exact.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::delay::{Delay, DelayModelSpec};
use crate::error::{SolverError, SprError};
use crate::model::{
    CommodityId, GroupId, LinkId, Route, RouteId, SplitEntry, SprPolicy, Topology,
    ACTIVATION_THRESHOLD,
};
use crate::solver::{solve_lp, Constraint, LpOutcome, LpProblem, Sense};

/// Cost per route when a link's predicted delay is unbounded.
const SATURATED_DELAY_COST: f64 = 1e6;

/// Restarts of the local search beyond the initial descending-demand greedy.
pub const LOCAL_SEARCH_RESTARTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SprObjective {
    #[default]
    MinMlu,
    MinQuality,
}

/// One demand to route: traffic of one flow group between one ingress and
/// one egress site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SprDemand {
    pub id: CommodityId,
    pub group: GroupId,
    pub demand_mbps: f64,
    pub sla_ms: f64,
    pub candidates: Vec<Route>,
}

#[derive(Debug, Clone)]
pub struct SprInstance<'a> {
    pub topology: &'a Topology,
    pub demands: Vec<SprDemand>,
    pub objective: SprObjective,
    /// Loads at which `MinQuality` freezes its delay coefficients. Missing links count as idle.
    pub measured_loads: BTreeMap<LinkId, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SprStatus {
    Optimal,
    LocalOptimum,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SprSolution {
    pub x: BTreeMap<CommodityId, BTreeMap<RouteId, f64>>,
    pub loads: BTreeMap<LinkId, f64>,
    pub mlu: f64,
    pub status: SprStatus,
}

/// A delay-feasible route together with the load cap it imposes on each link.
#[derive(Debug, Clone)]
struct FeasibleRoute {
    route: Route,
    caps: Vec<(LinkId, f64)>,
}

fn feasible_routes(
    topology: &Topology,
    demand: &SprDemand,
    delay_model: &DelayModelSpec,
) -> Vec<FeasibleRoute> {
    let mut out = Vec::new();
    'routes: for route in &demand.candidates {
        let links: Option<Vec<_>> = route.links.iter().map(|l| topology.link(l)).collect();
        let Some(links) = links else { continue };
        if links.is_empty() {
            continue;
        }
        let slack = demand.sla_ms - route.prop_delay_ms(topology);
        if slack <= 0.0 {
            continue;
        }
        let share = slack / links.len() as f64;
        let mut caps = Vec::with_capacity(links.len());
        for link in links {
            match delay_model.invert_delay_bound(link, link.prop_delay_ms + share) {
                Some(cap) if cap > 0.0 => caps.push((link.id.clone(), cap)),
                _ => continue 'routes,
            }
        }
        out.push(FeasibleRoute { route: route.clone(), caps });
    }
    out
}

/// Per-demand feasible routes plus the per-link load caps they induce.
struct Filtered {
    routes: Vec<Vec<FeasibleRoute>>,
    link_caps: BTreeMap<LinkId, f64>,
}

fn filter_instance(
    instance: &SprInstance<'_>,
    delay_model: &DelayModelSpec,
) -> Result<Filtered, SprError> {
    let mut routes = Vec::with_capacity(instance.demands.len());
    let mut link_caps: BTreeMap<LinkId, f64> = BTreeMap::new();
    for d in &instance.demands {
        let f = feasible_routes(instance.topology, d, delay_model);
        if f.is_empty() {
            return Err(SprError::NoFeasibleRoute(d.id.clone()));
        }
        for r in &f {
            for (l, cap) in &r.caps {
                let entry = link_caps.entry(l.clone()).or_insert(f64::INFINITY);
                *entry = entry.min(*cap);
            }
        }
        routes.push(f);
    }
    for (l, cap) in link_caps.iter_mut() {
        if let Some(link) = instance.topology.link(l) {
            *cap = cap.min(link.capacity_mbps);
        }
    }
    Ok(Filtered { routes, link_caps })
}

/// Column layout of the routing LP.
#[derive(Debug, Clone)]
pub struct SprLp {
    pub problem: LpProblem,
    /// `(demand index, route)` for each split column; the last column is MLU.
    pub columns: Vec<(usize, Route)>,
    /// Demands with zero volume, routed uniformly outside the LP.
    pub idle: Vec<(usize, Vec<Route>)>,
    pub link_caps: BTreeMap<LinkId, f64>,
}

impl SprLp {
    pub fn mlu_column(&self) -> usize {
        self.columns.len()
    }
}

fn route_delay_cost(
    topology: &Topology,
    route: &Route,
    loads: &BTreeMap<LinkId, f64>,
    delay_model: &DelayModelSpec,
) -> f64 {
    route
        .links
        .iter()
        .filter_map(|l| topology.link(l))
        .map(|link| {
            let load = loads.get(&link.id).copied().unwrap_or(0.0).max(0.0);
            match delay_model.predict_delay_spr(link, load) {
                Ok(Delay::Ms(v)) => v,
                _ => SATURATED_DELAY_COST,
            }
        })
        .sum()
}

/// Builds the routing LP: split columns per feasible route plus one MLU column,
/// normalized utilization rows, capped capacity rows and one convexity row per
/// demand.
pub fn build_spr_lp(
    instance: &SprInstance<'_>,
    delay_model: &DelayModelSpec,
) -> Result<SprLp, SprError> {
    let filtered = filter_instance(instance, delay_model)?;
    let mut columns = Vec::new();
    let mut idle = Vec::new();
    for (i, d) in instance.demands.iter().enumerate() {
        if d.demand_mbps > 0.0 {
            for r in &filtered.routes[i] {
                columns.push((i, r.route.clone()));
            }
        } else {
            idle.push((i, filtered.routes[i].iter().map(|r| r.route.clone()).collect()));
        }
    }
    let n = columns.len() + 1;
    let mlu = n - 1;

    let mut objective = vec![0.0; n];
    match instance.objective {
        SprObjective::MinMlu => objective[mlu] = 1.0,
        SprObjective::MinQuality => {
            for (j, (_, route)) in columns.iter().enumerate() {
                objective[j] =
                    route_delay_cost(instance.topology, route, &instance.measured_loads, delay_model);
            }
        }
    }

    let mut per_link: BTreeMap<&LinkId, Vec<(usize, f64)>> = BTreeMap::new();
    for (j, (i, route)) in columns.iter().enumerate() {
        let b = instance.demands[*i].demand_mbps;
        for l in &route.links {
            per_link.entry(l).or_default().push((j, b));
        }
    }
    let mut constraints = Vec::new();
    for (l, terms) in &per_link {
        let Some(link) = instance.topology.link(l) else { continue };
        let mut util: Vec<(usize, f64)> =
            terms.iter().map(|&(j, b)| (j, b / link.capacity_mbps)).collect();
        util.push((mlu, -1.0));
        constraints.push(Constraint::sparse(n, &util, Sense::Le, 0.0));
        let cap = filtered.link_caps.get(*l).copied().unwrap_or(link.capacity_mbps);
        constraints.push(Constraint::sparse(n, terms, Sense::Le, cap));
    }
    let mut by_demand: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    for (j, (i, _)) in columns.iter().enumerate() {
        by_demand.entry(*i).or_default().push((j, 1.0));
    }
    for terms in by_demand.values() {
        constraints.push(Constraint::sparse(n, terms, Sense::Eq, 1.0));
    }

    Ok(SprLp {
        problem: LpProblem {
            objective,
            constraints,
            bounds: vec![(0.0, f64::INFINITY); n],
        },
        columns,
        idle,
        link_caps: filtered.link_caps,
    })
}

fn link_loads(
    instance: &SprInstance<'_>,
    x: &BTreeMap<CommodityId, BTreeMap<RouteId, f64>>,
) -> BTreeMap<LinkId, f64> {
    let mut loads: BTreeMap<LinkId, f64> =
        instance.topology.links.iter().map(|l| (l.id.clone(), 0.0)).collect();
    for d in &instance.demands {
        let Some(split) = x.get(&d.id) else { continue };
        for route in &d.candidates {
            let share = split.get(&route.id).copied().unwrap_or(0.0);
            if share == 0.0 {
                continue;
            }
            for l in &route.links {
                *loads.entry(l.clone()).or_insert(0.0) += d.demand_mbps * share;
            }
        }
    }
    loads
}

fn max_utilization(topology: &Topology, loads: &BTreeMap<LinkId, f64>) -> f64 {
    topology
        .links
        .iter()
        .map(|l| loads.get(&l.id).copied().unwrap_or(0.0) / l.capacity_mbps)
        .fold(0.0, f64::max)
}

fn uniform(routes: &[Route]) -> BTreeMap<RouteId, f64> {
    let share = 1.0 / routes.len() as f64;
    routes.iter().map(|r| (r.id.clone(), share)).collect()
}

fn finish(
    instance: &SprInstance<'_>,
    x: BTreeMap<CommodityId, BTreeMap<RouteId, f64>>,
    status: SprStatus,
) -> SprSolution {
    let loads = link_loads(instance, &x);
    let mlu = max_utilization(instance.topology, &loads);
    SprSolution { x, loads, mlu, status }
}

/// Solves the routing LP.
pub fn solve_spr(
    instance: &SprInstance<'_>,
    delay_model: &DelayModelSpec,
) -> Result<SprSolution, SprError> {
    let lp = build_spr_lp(instance, delay_model)?;
    let mut x: BTreeMap<CommodityId, BTreeMap<RouteId, f64>> = BTreeMap::new();
    for (i, routes) in &lp.idle {
        x.insert(instance.demands[*i].id.clone(), uniform(routes));
    }
    if !lp.columns.is_empty() {
        match solve_lp(&lp.problem)? {
            LpOutcome::Infeasible => {
                return Ok(SprSolution {
                    x: BTreeMap::new(),
                    loads: BTreeMap::new(),
                    mlu: f64::INFINITY,
                    status: SprStatus::Infeasible,
                })
            }
            LpOutcome::Unbounded => {
                return Err(SolverError::Malformed("routing LP reported unbounded".into()).into())
            }
            LpOutcome::Optimal { x: values, .. } => {
                for ((i, route), v) in lp.columns.iter().zip(&values) {
                    x.entry(instance.demands[*i].id.clone())
                        .or_default()
                        .insert(route.id.clone(), v.max(0.0));
                }
            }
        }
    }
    for split in x.values_mut() {
        let sum: f64 = split.values().sum();
        if sum > 0.0 {
            for v in split.values_mut() {
                *v /= sum;
            }
        }
    }
    Ok(finish(instance, x, SprStatus::Optimal))
}

struct SearchState<'a> {
    instance: &'a SprInstance<'a>,
    routes: Vec<Vec<FeasibleRoute>>,
    link_caps: &'a BTreeMap<LinkId, f64>,
    active: Vec<usize>,
    capacity: BTreeMap<LinkId, f64>,
}

impl SearchState<'_> {
    fn loads(&self, assignment: &[usize]) -> BTreeMap<LinkId, f64> {
        let mut loads: BTreeMap<LinkId, f64> = BTreeMap::new();
        for (&i, &r) in self.active.iter().zip(assignment) {
            let b = self.instance.demands[i].demand_mbps;
            for l in &self.routes[i][r].route.links {
                *loads.entry(l.clone()).or_insert(0.0) += b;
            }
        }
        loads
    }

    fn mlu(&self, loads: &BTreeMap<LinkId, f64>) -> f64 {
        loads
            .iter()
            .map(|(l, v)| v / self.capacity.get(l).copied().unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max)
    }

    fn within_caps(&self, loads: &BTreeMap<LinkId, f64>) -> bool {
        loads
            .iter()
            .all(|(l, v)| *v <= self.link_caps.get(l).copied().unwrap_or(f64::INFINITY) + 1e-9)
    }

    fn greedy(&self, order: &[usize]) -> Vec<usize> {
        // `order` indexes into `self.active`.
        let mut assignment = vec![0; self.active.len()];
        let mut loads: BTreeMap<LinkId, f64> = BTreeMap::new();
        for &a in order {
            let i = self.active[a];
            let b = self.instance.demands[i].demand_mbps;
            let mut best: Option<(bool, f64, usize)> = None;
            for (r, fr) in self.routes[i].iter().enumerate() {
                let mut peak = 0.0_f64;
                let mut fits = true;
                for l in &fr.route.links {
                    let after = loads.get(l).copied().unwrap_or(0.0) + b;
                    peak = peak.max(after / self.capacity.get(l).copied().unwrap_or(f64::INFINITY));
                    fits &= after <= self.link_caps.get(l).copied().unwrap_or(f64::INFINITY) + 1e-9;
                }
                let better = match best {
                    None => true,
                    Some((bf, bp, _)) => (fits && !bf) || (fits == bf && peak < bp),
                };
                if better {
                    best = Some((fits, peak, r));
                }
            }
            let r = best.map(|b| b.2).unwrap_or(0);
            assignment[a] = r;
            for l in &self.routes[i][r].route.links {
                *loads.entry(l.clone()).or_insert(0.0) += b;
            }
        }
        assignment
    }

    /// Best-improvement descent over single-demand reassignments.
    fn descend(&self, mut assignment: Vec<usize>, max_iters: usize) -> (Vec<usize>, f64) {
        let mut current = self.mlu(&self.loads(&assignment));
        // Demands are scanned in lexicographic id order so ties favor the smallest id.
        let mut scan: Vec<usize> = (0..self.active.len()).collect();
        scan.sort_by(|&a, &b| {
            self.instance.demands[self.active[a]]
                .id
                .cmp(&self.instance.demands[self.active[b]].id)
        });
        for _ in 0..max_iters {
            let mut best: Option<(f64, usize, usize)> = None;
            for &a in &scan {
                let i = self.active[a];
                let original = assignment[a];
                for r in 0..self.routes[i].len() {
                    if r == original {
                        continue;
                    }
                    assignment[a] = r;
                    let m = self.mlu(&self.loads(&assignment));
                    if m < current - 1e-12 && best.is_none_or(|(bm, _, _)| m < bm - 1e-12) {
                        best = Some((m, a, r));
                    }
                }
                assignment[a] = original;
            }
            match best {
                Some((m, a, r)) => {
                    assignment[a] = r;
                    current = m;
                }
                None => break,
            }
        }
        (assignment, current)
    }
}

/// Local search over single-route assignments. Starts from a greedy
/// least-utilization placement in descending-demand order, then restarts from
/// seeded shuffles of that order; keeps the best local optimum.
pub fn local_search_spr(
    instance: &SprInstance<'_>,
    delay_model: &DelayModelSpec,
    seed: u64,
    max_iters: usize,
) -> Result<SprSolution, SprError> {
    let filtered = filter_instance(instance, delay_model)?;
    let active: Vec<usize> = (0..instance.demands.len())
        .filter(|&i| instance.demands[i].demand_mbps > 0.0)
        .collect();
    let state = SearchState {
        instance,
        routes: filtered.routes,
        link_caps: &filtered.link_caps,
        active,
        capacity: instance
            .topology
            .links
            .iter()
            .map(|l| (l.id.clone(), l.capacity_mbps))
            .collect(),
    };

    let mut order: Vec<usize> = (0..state.active.len()).collect();
    order.sort_by(|&a, &b| {
        let (da, db) = (&instance.demands[state.active[a]], &instance.demands[state.active[b]]);
        db.demand_mbps.total_cmp(&da.demand_mbps).then_with(|| da.id.cmp(&db.id))
    });
    let mut best = state.descend(state.greedy(&order), max_iters);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..LOCAL_SEARCH_RESTARTS {
        order.shuffle(&mut rng);
        let cand = state.descend(state.greedy(&order), max_iters);
        if cand.1 < best.1 - 1e-12 {
            best = cand;
        }
    }

    let mut x: BTreeMap<CommodityId, BTreeMap<RouteId, f64>> = BTreeMap::new();
    for (i, d) in instance.demands.iter().enumerate() {
        if d.demand_mbps <= 0.0 {
            let routes: Vec<Route> = state.routes[i].iter().map(|r| r.route.clone()).collect();
            x.insert(d.id.clone(), uniform(&routes));
        }
    }
    for (&i, &r) in state.active.iter().zip(&best.0) {
        let mut split = BTreeMap::new();
        split.insert(state.routes[i][r].route.id.clone(), 1.0);
        x.insert(instance.demands[i].id.clone(), split);
    }
    let loads = state.loads(&best.0);
    let feasible = state.within_caps(&loads);
    let solution = finish(instance, x, SprStatus::LocalOptimum);
    Ok(SprSolution {
        status: if feasible && solution.mlu <= 1.0 + 1e-9 {
            SprStatus::LocalOptimum
        } else {
            SprStatus::Infeasible
        },
        ..solution
    })
}

/// Turns split fractions into an installable policy: drops routes at or below
/// the activation threshold and renormalizes the rest.
pub fn extract_policy(solution: &SprSolution) -> SprPolicy {
    let mut entries = BTreeMap::new();
    for (id, split) in &solution.x {
        let mut active: BTreeSet<RouteId> = split
            .iter()
            .filter(|(_, &v)| v > ACTIVATION_THRESHOLD)
            .map(|(r, _)| r.clone())
            .collect();
        if active.is_empty() {
            if let Some((r, _)) = split.iter().max_by(|a, b| a.1.total_cmp(b.1)) {
                active.insert(r.clone());
            }
        }
        let sum: f64 = active.iter().map(|r| split[r]).sum();
        let split_ratios: BTreeMap<RouteId, f64> = if sum > 0.0 {
            active.iter().map(|r| (r.clone(), split[r] / sum)).collect()
        } else {
            let share = 1.0 / active.len() as f64;
            active.iter().map(|r| (r.clone(), share)).collect()
        };
        entries.insert(id.clone(), SplitEntry { split_ratios, active_set: active });
    }
    SprPolicy { entries }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LinkKind, Node, NodeRole, OverlayLink};

    fn topo(links: &[(&str, f64, f64)]) -> Topology {
        Topology {
            nodes: vec![
                Node { id: "h".into(), role: NodeRole::Hub },
                Node { id: "s".into(), role: NodeRole::Spoke },
            ],
            links: links
                .iter()
                .map(|&(id, cap, prop)| OverlayLink {
                    id: id.into(),
                    src: "h".into(),
                    dst: "s".into(),
                    capacity_mbps: cap,
                    prop_delay_ms: prop,
                    kind: LinkKind::Mv,
                })
                .collect(),
        }
    }

    fn demand(id: &str, b: f64, sla: f64, links: &[&str]) -> SprDemand {
        SprDemand {
            id: id.into(),
            group: "g".into(),
            demand_mbps: b,
            sla_ms: sla,
            candidates: links.iter().map(|l| Route::single(*l)).collect(),
        }
    }

    fn instance<'a>(t: &'a Topology, demands: Vec<SprDemand>) -> SprInstance<'a> {
        SprInstance {
            topology: t,
            demands,
            objective: SprObjective::MinMlu,
            measured_loads: BTreeMap::new(),
        }
    }

    #[test]
    fn lp_equalizes_utilization() {
        let t = topo(&[("A", 10.0, 0.0), ("B", 5.0, 0.0)]);
        let inst = instance(&t, vec![demand("k", 6.0, 1e9, &["A", "B"])]);
        let s = solve_spr(&inst, &DelayModelSpec::default()).unwrap();
        assert_eq!(s.status, SprStatus::Optimal);
        assert!((s.mlu - 0.4).abs() < 1e-7);
        let x = &s.x[&CommodityId::from("k")];
        assert!((x[&RouteId::from("A")] - 2.0 / 3.0).abs() < 1e-6);
        assert!((x[&RouteId::from("B")] - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn single_link_is_forced() {
        let t = topo(&[("A", 6.0, 0.0)]);
        let inst = instance(&t, vec![demand("k", 4.0, 1e9, &["A"])]);
        let s = solve_spr(&inst, &DelayModelSpec::default()).unwrap();
        assert!((s.mlu - 2.0 / 3.0).abs() < 1e-9);
        assert_eq!(s.x[&CommodityId::from("k")][&RouteId::from("A")], 1.0);
    }

    #[test]
    fn delay_bound_removes_slow_link() {
        // A: prop 10 ms, C 6; a 12 ms bound leaves 6 - 12/2 = 0 Mbps of headroom.
        let t = topo(&[("A", 6.0, 10.0), ("B", 6.0, 2.0)]);
        let inst = instance(&t, vec![demand("k", 1.0, 12.0, &["A", "B"])]);
        let lp = build_spr_lp(&inst, &DelayModelSpec::default()).unwrap();
        assert_eq!(lp.columns.len(), 1);
        assert_eq!(lp.columns[0].1.id, RouteId::from("B"));
        let s = solve_spr(&inst, &DelayModelSpec::default()).unwrap();
        assert_eq!(s.x[&CommodityId::from("k")].len(), 1);
        assert_eq!(s.x[&CommodityId::from("k")][&RouteId::from("B")], 1.0);
    }

    #[test]
    fn no_feasible_route_names_the_demand() {
        let t = topo(&[("A", 6.0, 10.0)]);
        let inst = instance(&t, vec![demand("crit", 1.0, 10.0, &["A"])]);
        assert_eq!(
            solve_spr(&inst, &DelayModelSpec::default()),
            Err(SprError::NoFeasibleRoute("crit".into()))
        );
    }

    #[test]
    fn zero_demand_is_uniform() {
        let t = topo(&[("A", 6.0, 0.0), ("B", 6.0, 0.0), ("C", 6.0, 0.0)]);
        let inst = instance(&t, vec![demand("k", 0.0, 1e9, &["A", "B", "C"])]);
        let s = solve_spr(&inst, &DelayModelSpec::default()).unwrap();
        assert_eq!(s.mlu, 0.0);
        let policy = extract_policy(&s);
        let e = &policy.entries[&CommodityId::from("k")];
        assert_eq!(e.active_set.len(), 3);
        assert!(e.split_ratios.values().all(|v| (v - 1.0 / 3.0).abs() < 1e-12));
    }

    #[test]
    fn overload_is_infeasible() {
        let t = topo(&[("A", 6.0, 0.0), ("B", 6.0, 0.0)]);
        let inst = instance(&t, vec![demand("k", 13.0, 1e9, &["A", "B"])]);
        let s = solve_spr(&inst, &DelayModelSpec::default()).unwrap();
        assert_eq!(s.status, SprStatus::Infeasible);
    }

    #[test]
    fn local_search_separates_equal_demands() {
        let t = topo(&[("A", 10.0, 0.0), ("B", 10.0, 0.0)]);
        let inst = instance(
            &t,
            vec![demand("k1", 6.0, 1e9, &["A", "B"]), demand("k2", 6.0, 1e9, &["A", "B"])],
        );
        let s = local_search_spr(&inst, &DelayModelSpec::default(), 7, 100).unwrap();
        assert!((s.mlu - 0.6).abs() < 1e-12);
        assert_eq!(s.status, SprStatus::LocalOptimum);
    }

    #[test]
    fn local_search_shows_relaxation_gap() {
        let t = topo(&[("A", 10.0, 0.0), ("B", 5.0, 0.0)]);
        let inst = instance(&t, vec![demand("k", 6.0, 1e9, &["A", "B"])]);
        let s = local_search_spr(&inst, &DelayModelSpec::default(), 1, 100).unwrap();
        assert!((s.mlu - 0.6).abs() < 1e-12);
        assert_eq!(s.x[&CommodityId::from("k")][&RouteId::from("A")], 1.0);

        let single = instance(&t, vec![demand("k", 4.0, 1e9, &["B"])]);
        let s = local_search_spr(&single, &DelayModelSpec::default(), 1, 100).unwrap();
        assert!((s.mlu - 0.8).abs() < 1e-12);
    }

    #[test]
    fn threshold_drops_tiny_splits() {
        let mut x = BTreeMap::new();
        x.insert(
            CommodityId::from("k"),
            BTreeMap::from([(RouteId::from("A"), 0.995), (RouteId::from("B"), 0.005)]),
        );
        let sol = SprSolution { x, loads: BTreeMap::new(), mlu: 0.0, status: SprStatus::Optimal };
        let p = extract_policy(&sol);
        let e = &p.entries[&CommodityId::from("k")];
        assert_eq!(e.active_set.iter().map(|r| r.as_str()).collect::<Vec<_>>(), vec!["A"]);
        assert_eq!(e.split_ratios[&RouteId::from("A")], 1.0);
        assert!(p.violations().is_empty());

        let mut x = BTreeMap::new();
        x.insert(
            CommodityId::from("k"),
            BTreeMap::from([(RouteId::from("A"), 2.0 / 3.0), (RouteId::from("B"), 1.0 / 3.0)]),
        );
        let sol = SprSolution { x, loads: BTreeMap::new(), mlu: 0.0, status: SprStatus::Optimal };
        let e = &extract_policy(&sol).entries[&CommodityId::from("k")];
        assert_eq!(e.active_set.len(), 2);
        assert!((e.split_ratios[&RouteId::from("B")] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn quality_objective_prefers_faster_route() {
        let t = topo(&[("A", 10.0, 5.0), ("B", 10.0, 20.0)]);
        let mut inst = instance(&t, vec![demand("k", 2.0, 1e9, &["A", "B"])]);
        inst.objective = SprObjective::MinQuality;
        let s = solve_spr(&inst, &DelayModelSpec::default()).unwrap();
        assert_eq!(s.x[&CommodityId::from("k")][&RouteId::from("A")], 1.0);
    }
}
