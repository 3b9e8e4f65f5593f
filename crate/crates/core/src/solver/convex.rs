//! Projected gradient descent over a box intersected with one budget row.

use crate::error::SolverError;

pub const MAX_ITERS: usize = 10_000;
pub const DEFAULT_TOL: f64 = 1e-6;

const ARMIJO_C: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const MIN_STEP: f64 = 1e-20;

/// A differentiable objective.
pub trait Objective {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], grad: &mut [f64]);
}

/// Closure-backed objective, handy in tests and for small problems.
pub struct FnObjective<V, G> {
    pub dim: usize,
    pub value: V,
    pub gradient: G,
}

impl<V, G> Objective for FnObjective<V, G>
where
    V: Fn(&[f64]) -> f64,
    G: Fn(&[f64], &mut [f64]),
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }
    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        (self.gradient)(x, grad)
    }
}

/// `sum(x) <= cap` or `sum(x) == cap`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Budget {
    AtMost(f64),
    Exactly(f64),
}

impl Budget {
    pub fn cap(self) -> f64 {
        match self {
            Budget::AtMost(c) | Budget::Exactly(c) => c,
        }
    }

    pub fn admits(self, sum: f64, tol: f64) -> bool {
        match self {
            Budget::AtMost(c) => sum <= c + tol,
            Budget::Exactly(c) => (sum - c).abs() <= tol,
        }
    }
}

pub struct ConvexProblem<'a> {
    pub objective: &'a dyn Objective,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub budget: Option<Budget>,
}

impl ConvexProblem<'_> {
    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub(crate) fn check(&self) -> Result<(), SolverError> {
        let n = self.dim();
        if self.upper.len() != n || self.objective.dim() != n {
            return Err(SolverError::Malformed(format!(
                "dimension mismatch: {} lower, {} upper, objective {}",
                n,
                self.upper.len(),
                self.objective.dim()
            )));
        }
        if self.lower.iter().zip(&self.upper).any(|(l, u)| !(l <= u)) {
            return Err(SolverError::Malformed("lower bound above upper bound".into()));
        }
        if let Some(b) = self.budget {
            let min_sum: f64 = self.lower.iter().sum();
            if min_sum > b.cap() + 1e-12 {
                return Err(SolverError::Malformed(format!(
                    "budget {} is below the sum of lower bounds {min_sum}",
                    b.cap()
                )));
            }
            if let Budget::Exactly(c) = b {
                if self.upper.iter().sum::<f64>() < c - 1e-12 {
                    return Err(SolverError::Malformed(format!(
                        "budget {c} exceeds the sum of upper bounds"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Euclidean projection onto the feasible set.
    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        let clamp = |tau: f64| -> Vec<f64> {
            y.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .map(|(v, (l, u))| (v - tau).clamp(*l, *u))
                .collect()
        };
        let Some(budget) = self.budget else {
            return clamp(0.0);
        };
        let cap = budget.cap();
        let boxed = clamp(0.0);
        let sum: f64 = boxed.iter().sum();
        if matches!(budget, Budget::AtMost(_)) && sum <= cap {
            return boxed;
        }
        // sum(clamp(y - tau)) is piecewise linear and non-increasing in tau,
        // with kinks where a coordinate hits a bound.
        let mut kinks: Vec<f64> = y
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .flat_map(|(v, (l, u))| [v - u, v - l])
            .filter(|t| t.is_finite())
            .collect();
        kinks.sort_by(f64::total_cmp);
        kinks.dedup();
        let total = |tau: f64| -> f64 { clamp(tau).iter().sum() };
        if kinks.is_empty() {
            return boxed;
        }
        let first = kinks[0];
        if total(first) <= cap {
            return clamp(first);
        }
        for w in kinks.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (fa, fb) = (total(a), total(b));
            if fb <= cap {
                let tau = if fa == fb { a } else { a + (fa - cap) / (fa - fb) * (b - a) };
                return clamp(tau);
            }
        }
        clamp(*kinks.last().unwrap())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexSolution {
    pub x: Vec<f64>,
    pub value: f64,
    /// Norm of `x - P(x - grad f(x))`.
    pub residual: f64,
    pub iterations: usize,
    /// False when the iteration cap was hit before `residual <= tol`.
    pub converged: bool,
}

fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

fn stationarity(problem: &ConvexProblem<'_>, x: &[f64], grad: &[f64]) -> f64 {
    let trial: Vec<f64> = x.iter().zip(grad).map(|(v, g)| v - g).collect();
    norm_diff(x, &problem.project(&trial))
}

/// Minimizes a smooth convex objective by projected gradient with Armijo
/// backtracking (initial step 1, halving).
pub fn minimize_convex(
    problem: &ConvexProblem<'_>,
    start: &[f64],
    tol: f64,
) -> Result<ConvexSolution, SolverError> {
    problem.check()?;
    if start.len() != problem.dim() {
        return Err(SolverError::Malformed("start has the wrong dimension".into()));
    }
    let f = problem.objective;
    let mut x = problem.project(start);
    let mut value = f.value(&x);
    if !value.is_finite() {
        return Err(SolverError::NonFiniteStart);
    }
    let mut grad = vec![0.0; x.len()];
    f.gradient(&x, &mut grad);

    for iter in 0..MAX_ITERS {
        let residual = stationarity(problem, &x, &grad);
        if residual <= tol {
            return Ok(ConvexSolution { x, value, residual, iterations: iter, converged: true });
        }
        let mut step = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(&grad).map(|(v, g)| v - step * g).collect();
            let cand = problem.project(&trial);
            let cand_value = f.value(&cand);
            let decrease: f64 = grad.iter().zip(cand.iter().zip(&x)).map(|(g, (c, v))| g * (c - v)).sum();
            if cand_value.is_finite() && cand_value <= value + ARMIJO_C * decrease {
                x = cand;
                value = cand_value;
                break;
            }
            step *= BACKTRACK;
            if step < MIN_STEP {
                // No descent available at machine precision.
                let residual = stationarity(problem, &x, &grad);
                return Ok(ConvexSolution {
                    x,
                    value,
                    residual,
                    iterations: iter,
                    converged: residual <= tol,
                });
            }
        }
        f.gradient(&x, &mut grad);
    }
    let residual = stationarity(problem, &x, &grad);
    Ok(ConvexSolution {
        x,
        value,
        residual,
        iterations: MAX_ITERS,
        converged: residual <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log_utility(weights: Vec<f64>) -> impl Objective {
        let w2 = weights.clone();
        FnObjective {
            dim: weights.len(),
            value: move |x: &[f64]| -> f64 {
                weights.iter().zip(x).map(|(w, z)| -w * z.ln()).sum()
            },
            gradient: move |x: &[f64], g: &mut [f64]| {
                for ((gi, w), z) in g.iter_mut().zip(&w2).zip(x) {
                    *gi = -w / z;
                }
            },
        }
    }

    #[test]
    fn clipped_quadratic() {
        let obj = FnObjective {
            dim: 1,
            value: |x: &[f64]| (x[0] - 2.0).powi(2),
            gradient: |x: &[f64], g: &mut [f64]| g[0] = 2.0 * (x[0] - 2.0),
        };
        let p = ConvexProblem { objective: &obj, lower: vec![0.0], upper: vec![1.0], budget: None };
        let s = minimize_convex(&p, &[0.5], DEFAULT_TOL).unwrap();
        assert!(s.converged);
        assert!((s.x[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn equal_log_weights_split_evenly() {
        let obj = log_utility(vec![8.0, 8.0]);
        let p = ConvexProblem {
            objective: &obj,
            lower: vec![0.01; 2],
            upper: vec![12.0; 2],
            budget: Some(Budget::AtMost(12.0)),
        };
        let s = minimize_convex(&p, &[1.0, 2.0], DEFAULT_TOL).unwrap();
        assert!(s.converged, "{s:?}");
        assert!((s.x[0] - 6.0).abs() < 1e-5 && (s.x[1] - 6.0).abs() < 1e-5, "{s:?}");
    }

    #[test]
    fn log_weights_split_proportionally() {
        let obj = log_utility(vec![9.0, 3.0]);
        let p = ConvexProblem {
            objective: &obj,
            lower: vec![0.01; 2],
            upper: vec![8.0; 2],
            budget: Some(Budget::AtMost(8.0)),
        };
        let s = minimize_convex(&p, &[1.0, 1.0], DEFAULT_TOL).unwrap();
        assert!(s.converged);
        assert!((s.x[0] - 6.0).abs() < 1e-5 && (s.x[1] - 2.0).abs() < 1e-5, "{s:?}");
    }

    #[test]
    fn projection_hits_budget_and_box() {
        let obj = log_utility(vec![1.0; 3]);
        let p = ConvexProblem {
            objective: &obj,
            lower: vec![0.0; 3],
            upper: vec![1.0, 5.0, 5.0],
            budget: Some(Budget::Exactly(4.0)),
        };
        let x = p.project(&[3.0, 3.0, -1.0]);
        assert!((x.iter().sum::<f64>() - 4.0).abs() < 1e-12);
        assert_eq!(x[0], 1.0);
        assert_eq!(x[2], 0.0);
        assert!((x[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn non_finite_start_is_rejected() {
        let obj = log_utility(vec![1.0]);
        let p = ConvexProblem { objective: &obj, lower: vec![0.0], upper: vec![1.0], budget: None };
        assert_eq!(minimize_convex(&p, &[0.0], 1e-6), Err(SolverError::NonFiniteStart));
    }
}
