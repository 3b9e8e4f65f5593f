//! Exhaustive grid search, used only to cross-check the real solvers.

use super::convex::ConvexProblem;
use crate::error::SolverError;

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub x: Vec<f64>,
    pub value: f64,
}

/// Evaluates the objective at every feasible point of a grid and returns the
/// best one, or `None` when no candidate is feasible.
///
/// Each axis holds the integer multiples of `resolution` inside the box plus
/// the two box bounds. Under a budget row, every coordinate is additionally
/// tried at the value that makes the budget tight given the other (gridded)
/// coordinates, so optima on the budget face or at an off-grid bound are
/// representable.
pub fn grid_oracle(
    problem: &ConvexProblem<'_>,
    resolution: f64,
) -> Result<Option<GridPoint>, SolverError> {
    let n = problem.dim();
    if n > 3 {
        return Err(SolverError::TooManyVariables(n));
    }
    problem.check().or_else(|e| match e {
        // An empty feasible set is a valid (empty) answer for the oracle.
        SolverError::Malformed(ref m) if m.contains("budget") => Ok(()),
        other => Err(other),
    })?;
    if !(resolution > 0.0) {
        return Err(SolverError::Malformed(format!("resolution {resolution}")));
    }

    let axes: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let (lo, hi) = (problem.lower[i], problem.upper[i]);
            let first = (lo / resolution - 1e-9).ceil() as i64;
            let last = (hi / resolution + 1e-9).floor() as i64;
            let mut axis = vec![lo];
            axis.extend((first..=last).map(|j| j as f64 * resolution).filter(|&v| v > lo && v < hi));
            if hi > lo {
                axis.push(hi);
            }
            axis
        })
        .collect();

    let mut best: Option<GridPoint> = None;
    let mut consider = |x: &[f64]| {
        let feasible = problem.budget.is_none_or(|b| b.admits(x.iter().sum(), 1e-9));
        if feasible {
            let v = problem.objective.value(x);
            if v.is_finite() && best.as_ref().is_none_or(|b| v < b.value) {
                best = Some(GridPoint { x: x.to_vec(), value: v });
            }
        }
    };

    let mut idx = vec![0usize; n];
    let mut x = vec![0.0; n];
    loop {
        for i in 0..n {
            x[i] = axes[i][idx[i]];
        }
        consider(&x);
        if let Some(budget) = problem.budget {
            let total: f64 = x.iter().sum();
            for i in 0..n {
                let tight = budget.cap() - (total - x[i]);
                if tight >= problem.lower[i] && tight <= problem.upper[i] && tight != x[i] {
                    let saved = x[i];
                    x[i] = tight;
                    consider(&x);
                    x[i] = saved;
                }
            }
        }
        // odometer increment
        let mut d = 0;
        loop {
            if d == n {
                return Ok(best);
            }
            idx[d] += 1;
            if idx[d] < axes[d].len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::convex::{Budget, FnObjective};

    #[test]
    fn finds_even_split() {
        let obj = FnObjective {
            dim: 2,
            value: |x: &[f64]| -8.0 * x[0].ln() - 8.0 * x[1].ln(),
            gradient: |_: &[f64], _: &mut [f64]| {},
        };
        let p = ConvexProblem {
            objective: &obj,
            lower: vec![0.01; 2],
            upper: vec![12.0; 2],
            budget: Some(Budget::AtMost(12.0)),
        };
        let best = grid_oracle(&p, 0.05).unwrap().unwrap();
        assert!((best.x[0] - 6.0).abs() <= 0.05 && (best.x[1] - 6.0).abs() <= 0.05);
    }

    #[test]
    fn monotone_single_variable() {
        let obj = FnObjective {
            dim: 1,
            value: |x: &[f64]| -x[0].ln(),
            gradient: |_: &[f64], _: &mut [f64]| {},
        };
        let p = ConvexProblem { objective: &obj, lower: vec![0.01], upper: vec![5.0], budget: None };
        let best = grid_oracle(&p, 0.05).unwrap().unwrap();
        assert!((best.x[0] - 5.0).abs() < 1e-9);
    }

    #[test]
    fn empty_feasible_set() {
        let obj = FnObjective {
            dim: 2,
            value: |x: &[f64]| x[0] + x[1],
            gradient: |_: &[f64], _: &mut [f64]| {},
        };
        let p = ConvexProblem {
            objective: &obj,
            lower: vec![1.0; 2],
            upper: vec![2.0; 2],
            budget: Some(Budget::AtMost(1.0)),
        };
        assert_eq!(grid_oracle(&p, 0.1).unwrap(), None);
    }

    #[test]
    fn bounds_and_budget_face_are_candidates() {
        // Optimum (0.01, 0.99) is off the 0.05 lattice in both coordinates.
        let obj = FnObjective {
            dim: 2,
            value: |x: &[f64]| 10.0 * x[0] - x[1],
            gradient: |_: &[f64], _: &mut [f64]| {},
        };
        let p = ConvexProblem {
            objective: &obj,
            lower: vec![0.01; 2],
            upper: vec![2.0; 2],
            budget: Some(Budget::AtMost(1.0)),
        };
        let best = grid_oracle(&p, 0.05).unwrap().unwrap();
        assert!((best.x[0] - 0.01).abs() < 1e-12 && (best.x[1] - 0.99).abs() < 1e-12, "{best:?}");
    }

    #[test]
    fn rejects_four_variables() {
        let obj = FnObjective {
            dim: 4,
            value: |_: &[f64]| 0.0,
            gradient: |_: &[f64], _: &mut [f64]| {},
        };
        let p = ConvexProblem {
            objective: &obj,
            lower: vec![0.0; 4],
            upper: vec![1.0; 4],
            budget: None,
        };
        assert_eq!(grid_oracle(&p, 0.5), Err(SolverError::TooManyVariables(4)));
    }
}
