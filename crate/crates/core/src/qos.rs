//! Fast-loop QoS optimization on a single link.
//!
//! Each class `k` with demand `d` gets a rate `z` that minimizes
//!
//! ```text
//! sum_k  -d_k ln z_k + alpha * y_k / D_k + M_k * h_k      s.t.  sum_k z_k <= C
//! ```
//!
//! where the demand shortfall `h = max(0, d - z)` and the SLA slack
//! `y = max(0, f(z) - D)` are substituted exactly. Every term depends on one
//! class only, so the problem is separable apart from the budget row. It is
//! solved by bisection on the budget multiplier, with each class's best
//! response found by bisection on its own (monotone) subgradient.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::delay::DelayModelSpec;
use crate::error::QosError;
use crate::model::{GroupId, LinkId, LinkQos, OverlayLink, PriorityTier, QosPolicy, RATE_FLOOR};
use crate::solver::Objective;

/// Shaper ceiling above the allocated rate.
pub const SHAPER_HEADROOM: f64 = 0.05;

const BISECT_ITERS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QosParams {
    /// Weight of SLA slack relative to fairness.
    pub alpha: f64,
    /// Shortfall penalty for a weighted class; strict classes scale it by `1 + tier weight`.
    pub base_shortfall_penalty: f64,
}

impl Default for QosParams {
    fn default() -> Self {
        Self { alpha: 0.01, base_shortfall_penalty: 1e4 }
    }
}

impl QosParams {
    pub fn shortfall_penalty(&self, tier: PriorityTier) -> f64 {
        self.base_shortfall_penalty * (1.0 + tier.weight())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QosClass {
    pub group: GroupId,
    pub demand_mbps: f64,
    pub sla_ms: f64,
    pub tier: PriorityTier,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QosInstance {
    pub link: OverlayLink,
    pub classes: Vec<QosClass>,
    pub alpha: f64,
    /// `M_k`, aligned with `classes`.
    pub shortfall_penalty: Vec<f64>,
}

impl QosInstance {
    /// Keeps the classes with positive demand and assigns tier-scaled penalties.
    pub fn new(link: OverlayLink, classes: Vec<QosClass>, params: &QosParams) -> Self {
        let classes: Vec<QosClass> = classes.into_iter().filter(|c| c.demand_mbps > 0.0).collect();
        let shortfall_penalty = classes.iter().map(|c| params.shortfall_penalty(c.tier)).collect();
        Self { link, classes, alpha: params.alpha, shortfall_penalty }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAllocation {
    pub group: GroupId,
    pub demand_mbps: f64,
    /// Allocated rate `z`.
    pub alloc_mbps: f64,
    /// SLA slack `y` in ms.
    pub sla_slack_ms: f64,
    /// Demand shortfall `h` in Mbps.
    pub shortfall_mbps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QosStatus {
    Optimal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QosSolution {
    pub link: LinkId,
    pub classes: Vec<ClassAllocation>,
    pub objective: f64,
    pub status: QosStatus,
}

/// One class's term of the objective.
struct ClassTerm<'a> {
    link: &'a OverlayLink,
    model: &'a DelayModelSpec,
    demand: f64,
    sla: f64,
    alpha: f64,
    penalty: f64,
}

impl ClassTerm<'_> {
    fn slack(&self, z: f64) -> f64 {
        (self.model.qos_delay_relaxed(self.link, self.demand, z) - self.sla).max(0.0)
    }

    fn value(&self, z: f64) -> f64 {
        -self.demand * z.ln()
            + self.alpha * self.slack(z) / self.sla
            + self.penalty * (self.demand - z).max(0.0)
    }

    /// Derivative from the right; non-decreasing in `z`.
    fn right_slope(&self, z: f64) -> f64 {
        let mut s = -self.demand / z;
        if self.model.qos_delay_relaxed(self.link, self.demand, z) > self.sla {
            s += self.alpha / self.sla * self.model.qos_delay_relaxed_slope(self.demand, z);
        }
        if z < self.demand {
            s -= self.penalty;
        }
        s
    }

    /// Minimizer of `value(z) + price * z` over `[RATE_FLOOR, cap]`.
    fn best_response(&self, price: f64, cap: f64) -> f64 {
        if self.right_slope(RATE_FLOOR) + price >= 0.0 {
            return RATE_FLOOR;
        }
        if self.right_slope(cap) + price < 0.0 {
            return cap;
        }
        let (mut lo, mut hi) = (RATE_FLOOR, cap);
        for _ in 0..BISECT_ITERS {
            let mid = 0.5 * (lo + hi);
            if self.right_slope(mid) + price >= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}

fn terms<'a>(instance: &'a QosInstance, model: &'a DelayModelSpec) -> Vec<ClassTerm<'a>> {
    instance
        .classes
        .iter()
        .zip(&instance.shortfall_penalty)
        .map(|(c, &penalty)| ClassTerm {
            link: &instance.link,
            model,
            demand: c.demand_mbps,
            sla: c.sla_ms,
            alpha: instance.alpha,
            penalty,
        })
        .collect()
}

/// The substituted per-link objective as an [`Objective`], for cross-checks
/// against the generic solvers. The gradient is the right derivative.
pub struct QosObjective<'a> {
    terms: Vec<ClassTerm<'a>>,
}

impl<'a> QosObjective<'a> {
    pub fn new(instance: &'a QosInstance, model: &'a DelayModelSpec) -> Self {
        Self { terms: terms(instance, model) }
    }
}

impl Objective for QosObjective<'_> {
    fn dim(&self) -> usize {
        self.terms.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.terms.iter().zip(x).map(|(t, &z)| t.value(z)).sum()
    }
    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        for ((g, t), &z) in grad.iter_mut().zip(&self.terms).zip(x) {
            *g = t.right_slope(z);
        }
    }
}

/// Solves the QoS problem on one link.
pub fn solve_qos_link(
    instance: &QosInstance,
    delay_model: &DelayModelSpec,
) -> Result<QosSolution, QosError> {
    let n = instance.classes.len();
    if n == 0 {
        return Err(QosError::NoClasses(instance.link.id.clone()));
    }
    let capacity = instance.link.capacity_mbps;
    if capacity < n as f64 * RATE_FLOOR {
        return Err(QosError::CapacityBelowFloor {
            link: instance.link.id.clone(),
            capacity,
            classes: n,
        });
    }
    let terms = terms(instance, delay_model);
    let respond = |price: f64| -> Vec<f64> {
        terms.iter().map(|t| t.best_response(price, capacity)).collect()
    };

    let free = respond(0.0);
    let z = if free.iter().sum::<f64>() <= capacity {
        free
    } else {
        let mut lo = 0.0;
        let mut hi = terms
            .iter()
            .map(|t| -t.right_slope(RATE_FLOOR))
            .fold(0.0, f64::max)
            + 1.0;
        for _ in 0..BISECT_ITERS {
            let mid = 0.5 * (lo + hi);
            if respond(mid).iter().sum::<f64>() > capacity {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // The best response can jump at a kink; blend the two sides of the
        // bracket so the budget is met exactly.
        let under = respond(hi);
        let over = respond(lo);
        let (su, so): (f64, f64) = (under.iter().sum(), over.iter().sum());
        let theta = if so > su { ((capacity - su) / (so - su)).clamp(0.0, 1.0) } else { 0.0 };
        under.iter().zip(&over).map(|(u, o)| u + theta * (o - u)).collect()
    };

    let classes = instance
        .classes
        .iter()
        .zip(&terms)
        .zip(&z)
        .map(|((c, t), &z)| ClassAllocation {
            group: c.group.clone(),
            demand_mbps: c.demand_mbps,
            alloc_mbps: z,
            sla_slack_ms: t.slack(z),
            shortfall_mbps: (c.demand_mbps - z).max(0.0),
        })
        .collect();
    let objective = terms.iter().zip(&z).map(|(t, &z)| t.value(z)).sum();
    Ok(QosSolution {
        link: instance.link.id.clone(),
        classes,
        objective,
        status: QosStatus::Optimal,
    })
}

/// Result of the fast loop for one link.
#[derive(Debug, Clone, PartialEq)]
pub enum LinkQosOutcome {
    Solved(QosSolution),
    /// No class had positive demand; the installed policy stays as is.
    Unchanged,
    Failed(QosError),
}

/// Solves every link independently, in link-id order.
pub fn solve_qos_all(
    links: &[OverlayLink],
    class_demands: &BTreeMap<LinkId, Vec<QosClass>>,
    delay_model: &DelayModelSpec,
    params: &QosParams,
) -> BTreeMap<LinkId, LinkQosOutcome> {
    let mut links: Vec<&OverlayLink> = links.iter().collect();
    links.sort_by(|a, b| a.id.cmp(&b.id));
    links
        .into_iter()
        .map(|link| {
            let classes = class_demands.get(&link.id).cloned().unwrap_or_default();
            let instance = QosInstance::new(link.clone(), classes, params);
            let outcome = if instance.classes.is_empty() {
                LinkQosOutcome::Unchanged
            } else {
                match solve_qos_link(&instance, delay_model) {
                    Ok(s) => LinkQosOutcome::Solved(s),
                    Err(e) => LinkQosOutcome::Failed(e),
                }
            };
            (link.id.clone(), outcome)
        })
        .collect()
}

/// Maps allocations to device parameters: weighted classes get WFQ weights
/// proportional to their rate and a shaper slightly above it; strict classes
/// keep their allocation for reporting only.
pub fn policy_from_allocation(
    solution: &QosSolution,
    tiers: &BTreeMap<GroupId, PriorityTier>,
) -> LinkQos {
    let mut qos = LinkQos::default();
    let weighted: Vec<&ClassAllocation> = solution
        .classes
        .iter()
        .filter(|c| tiers.get(&c.group).is_some_and(|t| !t.is_strict()))
        .collect();
    let total: f64 = weighted.iter().map(|c| c.alloc_mbps).sum();
    for c in &solution.classes {
        qos.alloc_rates.insert(c.group.clone(), c.alloc_mbps);
    }
    for c in weighted {
        qos.wfq_weights.insert(c.group.clone(), c.alloc_mbps / total);
        qos.shaper_rates
            .insert(c.group.clone(), c.alloc_mbps * (1.0 + SHAPER_HEADROOM));
    }
    qos
}

/// Installs solved links into `policy`, leaving unchanged and failed links alone.
pub fn apply_outcomes(
    policy: &mut QosPolicy,
    outcomes: &BTreeMap<LinkId, LinkQosOutcome>,
    tiers: &BTreeMap<GroupId, PriorityTier>,
) {
    for (link, outcome) in outcomes {
        if let LinkQosOutcome::Solved(s) = outcome {
            policy.links.insert(link.clone(), policy_from_allocation(s, tiers));
        }
    }
}
