//! Dense two-phase simplex with Bland's rule.
//!
//! Variables with finite lower bounds are shifted to start at zero, finite
//! upper bounds become explicit rows, and free variables are split. Ties in
//! both the entering and leaving choice go to the lowest column index, so a
//! given problem always follows the same pivot sequence.

use crate::error::SolverError;

pub const MAX_PIVOTS: usize = 100_000;

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const PHASE1_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(coeffs: Vec<f64>, sense: Sense, rhs: f64) -> Self {
        Self { coeffs, sense, rhs }
    }

    /// Builds a dense row of width `n` from `(index, coefficient)` pairs.
    /// Repeated indices accumulate.
    pub fn sparse(n: usize, terms: &[(usize, f64)], sense: Sense, rhs: f64) -> Self {
        let mut coeffs = vec![0.0; n];
        for &(i, a) in terms {
            coeffs[i] += a;
        }
        Self { coeffs, sense, rhs }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().zip(x).map(|(a, v)| a * v).sum()
    }

    /// How far `x` is outside this row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// Minimize `objective · x` subject to the rows and per-variable bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub bounds: Vec<(f64, f64)>,
}

impl LpProblem {
    /// A problem over `n` variables, all bounded below by zero.
    pub fn nonnegative(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            constraints: Vec::new(),
            bounds: vec![(0.0, f64::INFINITY); n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    fn check(&self) -> Result<(), SolverError> {
        let n = self.num_vars();
        if self.bounds.len() != n {
            return Err(SolverError::Malformed(format!(
                "{} bounds for {n} variables",
                self.bounds.len()
            )));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(SolverError::Malformed("non-finite objective".into()));
        }
        for (i, row) in self.constraints.iter().enumerate() {
            if row.coeffs.len() != n {
                return Err(SolverError::Malformed(format!(
                    "row {i} has {} coefficients for {n} variables",
                    row.coeffs.len()
                )));
            }
            if row.coeffs.iter().any(|a| !a.is_finite()) || !row.rhs.is_finite() {
                return Err(SolverError::Malformed(format!("row {i} is not finite")));
            }
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY
            {
                return Err(SolverError::Malformed(format!(
                    "variable {j} has bounds [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn is_optimal(&self) -> bool {
        matches!(self, LpOutcome::Optimal { .. })
    }
}

/// How an original variable maps onto nonnegative tableau columns:
/// `x = offset + sign * col (- col2)`.
#[derive(Debug, Clone, Copy)]
struct VarMap {
    col: usize,
    sign: f64,
    offset: f64,
    neg_col: Option<usize>,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    cost_row: Vec<f64>,
    cost_value: f64,
    pivots: usize,
}

enum Step {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        self.rhs[r] /= p;
        let pivot_row = self.rows[r].clone();
        let pivot_rhs = self.rhs[r];
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let f = self.rows[i][c];
            if f != 0.0 {
                for (v, pv) in self.rows[i].iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                self.rows[i][c] = 0.0;
                self.rhs[i] -= f * pivot_rhs;
            }
        }
        let f = self.cost_row[c];
        if f != 0.0 {
            for (v, pv) in self.cost_row.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.cost_row[c] = 0.0;
            self.cost_value -= f * pivot_rhs;
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Loads reduced costs for `costs` given the current basis.
    fn price(&mut self, costs: &[f64]) {
        self.cost_row = costs.to_vec();
        self.cost_value = 0.0;
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = costs[b];
            if cb != 0.0 {
                for (v, a) in self.cost_row.iter_mut().zip(&self.rows[i]) {
                    *v -= cb * a;
                }
                self.cost_value -= cb * self.rhs[i];
            }
        }
    }

    fn run(&mut self, allowed: &[bool]) -> Result<Step, SolverError> {
        loop {
            if self.pivots >= MAX_PIVOTS {
                return Err(SolverError::IterationLimit(MAX_PIVOTS));
            }
            let Some(c) = (0..self.cost_row.len()).find(|&j| allowed[j] && self.cost_row[j] < -COST_TOL)
            else {
                return Ok(Step::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][c];
                if a > PIVOT_TOL {
                    let ratio = self.rhs[i] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((k, best)) => {
                            if ratio < best - 1e-12
                                || (ratio <= best + 1e-12 && self.basis[i] < self.basis[k])
                            {
                                Some((i, ratio))
                            } else {
                                Some((k, best))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return Ok(Step::Unbounded),
                Some((r, _)) => self.pivot(r, c),
            }
        }
    }
}

/// Solves `problem`. Infeasible and unbounded problems are reported as
/// outcomes; only malformed input and the pivot cap are errors.
pub fn solve_lp(problem: &LpProblem) -> Result<LpOutcome, SolverError> {
    problem.check()?;
    let n = problem.num_vars();

    // Column layout: structural columns first, then slacks/surplus, then artificials.
    let mut maps = Vec::with_capacity(n);
    let mut ncols = 0;
    let mut bound_rows: Vec<(usize, f64)> = Vec::new();
    for &(lo, hi) in &problem.bounds {
        let col = ncols;
        ncols += 1;
        let m = if lo.is_finite() {
            if hi.is_finite() {
                bound_rows.push((col, hi - lo));
            }
            VarMap { col, sign: 1.0, offset: lo, neg_col: None }
        } else if hi.is_finite() {
            VarMap { col, sign: -1.0, offset: hi, neg_col: None }
        } else {
            let neg = ncols;
            ncols += 1;
            VarMap { col, sign: 1.0, offset: 0.0, neg_col: Some(neg) }
        };
        maps.push(m);
    }
    let structural = ncols;

    struct Row {
        coeffs: Vec<f64>,
        sense: Sense,
        rhs: f64,
    }
    let mut rows: Vec<Row> = Vec::new();
    for c in &problem.constraints {
        let mut coeffs = vec![0.0; structural];
        let mut rhs = c.rhs;
        for (j, &a) in c.coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let m = maps[j];
            coeffs[m.col] += a * m.sign;
            if let Some(neg) = m.neg_col {
                coeffs[neg] -= a;
            }
            rhs -= a * m.offset;
        }
        rows.push(Row { coeffs, sense: c.sense, rhs });
    }
    for (col, width) in bound_rows {
        let mut coeffs = vec![0.0; structural];
        coeffs[col] = 1.0;
        rows.push(Row { coeffs, sense: Sense::Le, rhs: width });
    }
    for r in rows.iter_mut() {
        if r.rhs < 0.0 {
            r.rhs = -r.rhs;
            for a in r.coeffs.iter_mut() {
                *a = -*a;
            }
            r.sense = match r.sense {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
        }
    }

    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.sense != Sense::Eq).count();
    let n_art = rows.iter().filter(|r| r.sense != Sense::Le).count();
    let total = structural + n_slack + n_art;
    let art_start = structural + n_slack;

    let mut tab = Tableau {
        rows: Vec::with_capacity(m),
        rhs: Vec::with_capacity(m),
        basis: Vec::with_capacity(m),
        cost_row: vec![0.0; total],
        cost_value: 0.0,
        pivots: 0,
    };
    let (mut next_slack, mut next_art) = (structural, art_start);
    for r in rows {
        let mut full = r.coeffs;
        full.resize(total, 0.0);
        let basic = match r.sense {
            Sense::Le => {
                full[next_slack] = 1.0;
                next_slack += 1;
                next_slack - 1
            }
            Sense::Ge => {
                full[next_slack] = -1.0;
                next_slack += 1;
                full[next_art] = 1.0;
                next_art += 1;
                next_art - 1
            }
            Sense::Eq => {
                full[next_art] = 1.0;
                next_art += 1;
                next_art - 1
            }
        };
        tab.rows.push(full);
        tab.rhs.push(r.rhs);
        tab.basis.push(basic);
    }

    if n_art > 0 {
        let mut phase1 = vec![0.0; total];
        for c in phase1.iter_mut().skip(art_start) {
            *c = 1.0;
        }
        tab.price(&phase1);
        let allowed = vec![true; total];
        tab.run(&allowed)?;
        if -tab.cost_value > PHASE1_TOL {
            return Ok(LpOutcome::Infeasible);
        }
        // Pivot zero-level artificials out where a structural column allows it.
        for i in 0..m {
            if tab.basis[i] >= art_start {
                if let Some(c) = (0..art_start).find(|&j| tab.rows[i][j].abs() > PIVOT_TOL) {
                    tab.pivot(i, c);
                }
            }
        }
    }

    let mut costs = vec![0.0; total];
    for (j, m) in maps.iter().enumerate() {
        let c = problem.objective[j];
        costs[m.col] += c * m.sign;
        if let Some(neg) = m.neg_col {
            costs[neg] -= c;
        }
    }
    tab.price(&costs);
    let allowed: Vec<bool> = (0..total).map(|j| j < art_start).collect();
    if let Step::Unbounded = tab.run(&allowed)? {
        return Ok(LpOutcome::Unbounded);
    }

    let mut cols = vec![0.0; total];
    for (i, &b) in tab.basis.iter().enumerate() {
        cols[b] = tab.rhs[i].max(0.0);
    }
    let x: Vec<f64> = maps
        .iter()
        .map(|m| {
            let mut v = m.offset + m.sign * cols[m.col];
            if let Some(neg) = m.neg_col {
                v -= cols[neg];
            }
            v
        })
        .collect();
    let objective = problem.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpOutcome::Optimal { x, objective })
}
