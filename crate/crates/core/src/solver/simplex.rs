//! Bounded-variable primal revised simplex with a dense LU-factorized basis,
//! product-form updates, periodic refactorization, and Bland's rule engaged
//! after stall detection.
//!
//! The solver keeps its basis between calls, so bound changes (branching,
//! fixing binaries) re-solve from the previous basis: phase 1 repairs the
//! handful of violated basics, then phase 2 reoptimizes.

use crate::milp::{ConstraintSense, MilpModel};

const PIVOT_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;
const REFACTOR_EVERY: usize = 100;
const STALL_LIMIT: u32 = 100;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum SimplexError {
    SingularBasis,
    IterationLimit,
}

impl std::fmt::Display for SimplexError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SimplexError::SingularBasis => write!(f, "basis factorization became singular"),
            SimplexError::IterationLimit => write!(f, "simplex iteration limit exceeded"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub(crate) struct LpOutcome {
    pub status: LpStatus,
    pub objective: f64,
    pub iterations: u64,
}

struct Eta {
    pivot_row: usize,
    col: Vec<f64>,
}

struct LuFactor {
    /// Row-major combined L (below diagonal, unit) and U (on/above).
    lu: Vec<f64>,
    /// Transposed copy for cache-friendly BTRAN.
    lu_t: Vec<f64>,
    perm: Vec<usize>,
}

impl LuFactor {
    fn identity(m: usize) -> Self {
        let mut lu = vec![0.0; m * m];
        for k in 0..m {
            lu[k * m + k] = 1.0;
        }
        LuFactor {
            lu_t: lu.clone(),
            lu,
            perm: (0..m).collect(),
        }
    }
}

/// LP over the relaxation of a [`MilpModel`] with mutable working bounds.
pub(crate) struct LpSolver {
    n_struct: usize,
    m: usize,
    n_total: usize,
    // CSC storage for structural columns.
    col_starts: Vec<usize>,
    col_rows: Vec<usize>,
    col_vals: Vec<f64>,
    obj: Vec<f64>,
    rhs: Vec<f64>,
    orig_lb: Vec<f64>,
    orig_ub: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    // Basis state.
    basis: Vec<usize>,
    in_basis_pos: Vec<usize>,
    at_upper: Vec<bool>,
    x: Vec<f64>,
    factor: LuFactor,
    etas: Vec<Eta>,
    factor_valid: bool,
    pub iteration_limit: u64,
}

const NOT_BASIC: usize = usize::MAX;

impl LpSolver {
    pub fn new(model: &MilpModel) -> Self {
        let n_struct = model.num_vars();
        let m = model.num_constraints();
        let n_total = n_struct + m;

        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_struct];
        let mut rhs = Vec::with_capacity(m);
        let mut slack_lb = Vec::with_capacity(m);
        let mut slack_ub = Vec::with_capacity(m);
        for (row, con) in model.constraints().iter().enumerate() {
            for &(var, c) in &con.coeffs {
                if c != 0.0 {
                    cols[var.index()].push((row, c));
                }
            }
            rhs.push(con.rhs);
            match con.sense {
                ConstraintSense::Le => {
                    slack_lb.push(0.0);
                    slack_ub.push(f64::INFINITY);
                }
                ConstraintSense::Ge => {
                    slack_lb.push(f64::NEG_INFINITY);
                    slack_ub.push(0.0);
                }
                ConstraintSense::Eq => {
                    slack_lb.push(0.0);
                    slack_ub.push(0.0);
                }
            }
        }

        let mut col_starts = Vec::with_capacity(n_struct + 1);
        let mut col_rows = Vec::new();
        let mut col_vals = Vec::new();
        col_starts.push(0);
        for col in &cols {
            for &(row, val) in col {
                col_rows.push(row);
                col_vals.push(val);
            }
            col_starts.push(col_rows.len());
        }

        let mut obj = vec![0.0; n_total];
        for &(var, c) in model.objective() {
            obj[var.index()] += c;
        }

        let mut lb: Vec<f64> = model.vars().iter().map(|v| v.lb).collect();
        let mut ub: Vec<f64> = model.vars().iter().map(|v| v.ub).collect();
        lb.extend_from_slice(&slack_lb);
        ub.extend_from_slice(&slack_ub);

        let basis: Vec<usize> = (n_struct..n_total).collect();
        let mut in_basis_pos = vec![NOT_BASIC; n_total];
        for (pos, &var) in basis.iter().enumerate() {
            in_basis_pos[var] = pos;
        }

        LpSolver {
            n_struct,
            m,
            n_total,
            col_starts,
            col_rows,
            col_vals,
            obj,
            rhs,
            orig_lb: lb.clone(),
            orig_ub: ub.clone(),
            lb,
            ub,
            basis,
            in_basis_pos,
            at_upper: vec![false; n_total],
            x: vec![0.0; n_total],
            factor: LuFactor::identity(m),
            etas: Vec::new(),
            factor_valid: true,
            iteration_limit: 500_000,
        }
    }

    pub fn set_bounds(&mut self, var: usize, lb: f64, ub: f64) {
        self.lb[var] = lb;
        self.ub[var] = ub;
    }

    pub fn bounds(&self, var: usize) -> (f64, f64) {
        (self.lb[var], self.ub[var])
    }

    pub fn original_bounds(&self, var: usize) -> (f64, f64) {
        (self.orig_lb[var], self.orig_ub[var])
    }

    pub fn reset_bounds(&mut self) {
        self.lb[..self.n_struct].copy_from_slice(&self.orig_lb[..self.n_struct]);
        self.ub[..self.n_struct].copy_from_slice(&self.orig_ub[..self.n_struct]);
    }

    /// Structural variable values of the last solve.
    pub fn values(&self) -> &[f64] {
        &self.x[..self.n_struct]
    }

    pub fn current_bounds(&self) -> (&[f64], &[f64]) {
        (&self.lb[..self.n_struct], &self.ub[..self.n_struct])
    }

    fn col_entries(&self, var: usize) -> ColIter<'_> {
        if var < self.n_struct {
            ColIter::Structural {
                rows: &self.col_rows[self.col_starts[var]..self.col_starts[var + 1]],
                vals: &self.col_vals[self.col_starts[var]..self.col_starts[var + 1]],
                idx: 0,
            }
        } else {
            ColIter::Slack {
                row: var - self.n_struct,
                done: false,
            }
        }
    }

    fn factorize(&mut self) -> Result<(), SimplexError> {
        let m = self.m;
        self.factor.lu.iter_mut().for_each(|v| *v = 0.0);
        for pos in 0..m {
            let var = self.basis[pos];
            if var < self.n_struct {
                for idx in self.col_starts[var]..self.col_starts[var + 1] {
                    self.factor.lu[self.col_rows[idx] * m + pos] = self.col_vals[idx];
                }
            } else {
                self.factor.lu[(var - self.n_struct) * m + pos] = 1.0;
            }
        }
        let lu = &mut self.factor.lu;
        let perm = &mut self.factor.perm;
        for (i, p) in perm.iter_mut().enumerate() {
            *p = i;
        }
        let mut rowk = vec![0.0; m];
        for k in 0..m {
            let mut best = k;
            let mut best_abs = lu[k * m + k].abs();
            for i in (k + 1)..m {
                let a = lu[i * m + k].abs();
                if a > best_abs {
                    best_abs = a;
                    best = i;
                }
            }
            if best_abs < 1e-11 {
                return Err(SimplexError::SingularBasis);
            }
            if best != k {
                for j in 0..m {
                    lu.swap(k * m + j, best * m + j);
                }
                perm.swap(k, best);
            }
            let pivot = lu[k * m + k];
            rowk[(k + 1)..m].copy_from_slice(&lu[(k * m + k + 1)..(k * m + m)]);
            for i in (k + 1)..m {
                let f = lu[i * m + k] / pivot;
                if f != 0.0 {
                    lu[i * m + k] = f;
                    let row = &mut lu[(i * m + k + 1)..(i * m + m)];
                    let top = &rowk[(k + 1)..m];
                    for (a, b) in row.iter_mut().zip(top) {
                        *a -= f * b;
                    }
                }
            }
        }
        // Transposed copy for BTRAN.
        let lu_t = &mut self.factor.lu_t;
        for i in 0..m {
            for j in 0..m {
                lu_t[j * m + i] = lu[i * m + j];
            }
        }
        self.etas.clear();
        self.factor_valid = true;
        Ok(())
    }

    /// Solves `B x = v` in place.
    fn ftran(&self, v: &mut [f64]) {
        let m = self.m;
        let lu = &self.factor.lu;
        let mut w = vec![0.0; m];
        for k in 0..m {
            w[k] = v[self.factor.perm[k]];
        }
        for k in 1..m {
            let row = &lu[k * m..k * m + k];
            let mut acc = 0.0;
            for (j, &l) in row.iter().enumerate() {
                acc += l * w[j];
            }
            w[k] -= acc;
        }
        for k in (0..m).rev() {
            let row = &lu[k * m + k..k * m + m];
            let mut acc = 0.0;
            for (off, &u) in row.iter().enumerate().skip(1) {
                acc += u * w[k + off];
            }
            w[k] = (w[k] - acc) / row[0];
        }
        for eta in &self.etas {
            let r = eta.pivot_row;
            let wr = w[r] / eta.col[r];
            for (i, (&a, wi)) in eta.col.iter().zip(w.iter_mut()).enumerate() {
                if i != r {
                    *wi -= a * wr;
                }
            }
            w[r] = wr;
        }
        v.copy_from_slice(&w);
    }

    /// Solves `B^T y = c` in place.
    fn btran(&self, c: &mut [f64]) {
        let m = self.m;
        for eta in self.etas.iter().rev() {
            let r = eta.pivot_row;
            let mut acc = c[r];
            for (j, &a) in eta.col.iter().enumerate() {
                if j != r {
                    acc -= a * c[j];
                }
            }
            c[r] = acc / eta.col[r];
        }
        let lu_t = &self.factor.lu_t;
        let mut s = vec![0.0; m];
        for i in 0..m {
            let row = &lu_t[i * m..i * m + i];
            let mut acc = 0.0;
            for (j, &u) in row.iter().enumerate() {
                acc += u * s[j];
            }
            s[i] = (c[i] - acc) / lu_t[i * m + i];
        }
        for i in (0..m).rev() {
            let row = &lu_t[i * m + i + 1..i * m + m];
            let mut acc = 0.0;
            for (off, &l) in row.iter().enumerate() {
                acc += l * s[i + 1 + off];
            }
            s[i] -= acc;
        }
        for k in 0..m {
            c[self.factor.perm[k]] = s[k];
        }
    }

    fn nonbasic_resting_value(&self, var: usize) -> f64 {
        let (l, u) = (self.lb[var], self.ub[var]);
        if l == u {
            l
        } else if self.at_upper[var] && u.is_finite() {
            u
        } else if l.is_finite() {
            l
        } else if u.is_finite() {
            u
        } else {
            0.0
        }
    }

    /// Recomputes nonbasic resting values and basic values from the factor.
    fn compute_primal(&mut self) {
        let m = self.m;
        let mut rhs_work = self.rhs.clone();
        for var in 0..self.n_total {
            if self.in_basis_pos[var] != NOT_BASIC {
                continue;
            }
            let value = self.nonbasic_resting_value(var);
            self.x[var] = value;
            if value != 0.0 {
                let mut it = self.col_entries(var);
                while let Some((row, a)) = it.next() {
                    rhs_work[row] -= a * value;
                }
            }
        }
        self.ftran(&mut rhs_work);
        for pos in 0..m {
            self.x[self.basis[pos]] = rhs_work[pos];
        }
    }

    fn infeasibility(&self) -> f64 {
        let mut total = 0.0;
        for &var in &self.basis {
            let v = self.x[var];
            if v < self.lb[var] {
                total += self.lb[var] - v;
            } else if v > self.ub[var] {
                total += v - self.ub[var];
            }
        }
        total
    }

    fn basic_violation(&self, var: usize) -> f64 {
        let v = self.x[var];
        let scale = 1.0 + v.abs();
        if v < self.lb[var] - FEAS_TOL * scale {
            self.lb[var] - v
        } else if v > self.ub[var] + FEAS_TOL * scale {
            v - self.ub[var]
        } else {
            0.0
        }
    }

    fn objective_value(&self) -> f64 {
        self.obj
            .iter()
            .zip(&self.x)
            .map(|(c, x)| c * x)
            .sum()
    }

    /// Solves from the current basis and working bounds.
    pub fn solve(&mut self) -> Result<LpOutcome, SimplexError> {
        match self.solve_inner() {
            Ok(out) => Ok(out),
            Err(SimplexError::SingularBasis) => {
                // Reset to the all-slack basis and retry once.
                self.basis = (self.n_struct..self.n_total).collect();
                self.in_basis_pos.iter_mut().for_each(|p| *p = NOT_BASIC);
                for (pos, &var) in self.basis.iter().enumerate() {
                    self.in_basis_pos[var] = pos;
                }
                self.etas.clear();
                self.factor_valid = false;
                self.solve_inner()
            }
            Err(e) => Err(e),
        }
    }

    fn solve_inner(&mut self) -> Result<LpOutcome, SimplexError> {
        if !self.factor_valid {
            self.factorize()?;
        }
        self.compute_primal();
        let mut iterations = 0u64;

        for _attempt in 0..3 {
            match self.run_phase(true, &mut iterations)? {
                PhaseEnd::Done => {}
                PhaseEnd::Infeasible => {
                    return Ok(LpOutcome {
                        status: LpStatus::Infeasible,
                        objective: f64::INFINITY,
                        iterations,
                    });
                }
                PhaseEnd::Unbounded => return Err(SimplexError::SingularBasis),
            }
            match self.run_phase(false, &mut iterations)? {
                PhaseEnd::Done => {}
                PhaseEnd::Unbounded => {
                    return Ok(LpOutcome {
                        status: LpStatus::Unbounded,
                        objective: f64::NEG_INFINITY,
                        iterations,
                    });
                }
                PhaseEnd::Infeasible => unreachable!(),
            }

            // Polish: refactorize and recompute so returned values are clean.
            self.factorize()?;
            self.compute_primal();
            let clean = (0..self.m).all(|pos| self.basic_violation(self.basis[pos]) == 0.0);
            if clean {
                return Ok(LpOutcome {
                    status: LpStatus::Optimal,
                    objective: self.objective_value(),
                    iterations,
                });
            }
            // Drift uncovered by the refactorization: rerun the phases.
        }
        Err(SimplexError::IterationLimit)
    }

    fn run_phase(&mut self, phase1: bool, iterations: &mut u64) -> Result<PhaseEnd, SimplexError> {
        let mut stall = 0u32;
        let mut bland = false;
        let mut last_measure = f64::INFINITY;
        loop {
            if *iterations > self.iteration_limit {
                return Err(SimplexError::IterationLimit);
            }
            let mut cost = vec![0.0; self.m];
            let measure = if phase1 {
                let mut any = false;
                for (pos, &var) in self.basis.iter().enumerate() {
                    if self.basic_violation(var) > 0.0 {
                        any = true;
                        cost[pos] = if self.x[var] < self.lb[var] { -1.0 } else { 1.0 };
                    }
                }
                if !any {
                    return Ok(PhaseEnd::Done);
                }
                self.infeasibility()
            } else {
                for (pos, &var) in self.basis.iter().enumerate() {
                    cost[pos] = self.obj[var];
                }
                self.objective_value()
            };
            if measure < last_measure - 1e-13 * (1.0 + measure.abs()) {
                stall = 0;
                bland = false;
            } else {
                stall += 1;
                if stall >= STALL_LIMIT {
                    bland = true;
                }
            }
            last_measure = measure;

            match self.pivot_step(&cost, phase1, bland)? {
                StepResult::Moved => *iterations += 1,
                StepResult::NoEntering => {
                    if phase1 && self.infeasibility() > 1e-6 {
                        return Ok(PhaseEnd::Infeasible);
                    }
                    return Ok(PhaseEnd::Done);
                }
                StepResult::Unbounded => return Ok(PhaseEnd::Unbounded),
            }
        }
    }

    /// One simplex pivot against the given basic cost vector. `phase1`
    /// controls the ratio-test treatment of already-violated basics.
    fn pivot_step(
        &mut self,
        basic_cost: &[f64],
        phase1: bool,
        bland: bool,
    ) -> Result<StepResult, SimplexError> {
        let m = self.m;
        // Reduced costs: d_j = c_j - y . A_j, with y = B^-T c_B.
        let mut y = basic_cost.to_vec();
        self.btran(&mut y);

        let mut entering: Option<(usize, f64, f64)> = None; // (var, |d|, dir)
        for var in 0..self.n_total {
            if self.in_basis_pos[var] != NOT_BASIC || self.lb[var] == self.ub[var] {
                continue;
            }
            let c_j = if phase1 { 0.0 } else { self.obj[var] };
            let mut dot = 0.0;
            let mut it = self.col_entries(var);
            while let Some((row, a)) = it.next() {
                dot += a * y[row];
            }
            let d = c_j - dot;
            // Nonbasic values rest exactly on a bound (or 0 when free).
            let xv = self.x[var];
            let can_increase = xv < self.ub[var];
            let can_decrease = xv > self.lb[var];
            let dir = if d < -DUAL_TOL && can_increase {
                1.0
            } else if d > DUAL_TOL && can_decrease {
                -1.0
            } else {
                continue;
            };
            let score = d.abs();
            if bland {
                entering = Some((var, score, dir));
                break;
            }
            let replace = match &entering {
                Some((_, best, _)) => score > *best,
                None => true,
            };
            if replace {
                entering = Some((var, score, dir));
            }
        }
        let Some((q, _, dir)) = entering else {
            return Ok(StepResult::NoEntering);
        };

        // alpha = B^-1 A_q; basics move at rate -dir * alpha per unit step.
        let mut alpha = vec![0.0; m];
        let mut it = self.col_entries(q);
        while let Some((row, a)) = it.next() {
            alpha[row] = a;
        }
        self.ftran(&mut alpha);

        // Ratio test.
        let own_limit = if self.lb[q].is_finite() && self.ub[q].is_finite() {
            self.ub[q] - self.lb[q]
        } else {
            f64::INFINITY
        };
        let mut best_t = own_limit;
        let mut leaving: Option<(usize, f64, f64)> = None; // (pos, |alpha|, bound hit)
        for (pos, &a) in alpha.iter().enumerate() {
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            let var = self.basis[pos];
            let rate = -dir * a;
            let v = self.x[var];
            let (l, u) = (self.lb[var], self.ub[var]);
            let target = if phase1 && v < l - FEAS_TOL * (1.0 + v.abs()) {
                // Violated below: blocks when rising to its lower bound.
                if rate > 0.0 {
                    Some(l)
                } else {
                    None
                }
            } else if phase1 && v > u + FEAS_TOL * (1.0 + v.abs()) {
                if rate < 0.0 {
                    Some(u)
                } else {
                    None
                }
            } else if rate > 0.0 {
                u.is_finite().then_some(u)
            } else {
                l.is_finite().then_some(l)
            };
            let Some(bound) = target else { continue };
            let t = ((bound - v) / rate).max(0.0);
            let take = if t < best_t - 1e-12 {
                true
            } else if t <= best_t + 1e-12 {
                // Tie: prefer a bound flip; among rows, the largest pivot
                // (or the lowest variable id under Bland's rule).
                match &leaving {
                    None => false,
                    Some((lpos, labs, _)) => {
                        if bland {
                            self.basis[pos] < self.basis[*lpos]
                        } else {
                            a.abs() > *labs
                        }
                    }
                }
            } else {
                false
            };
            if take {
                best_t = t.min(best_t);
                leaving = Some((pos, a.abs(), bound));
            }
        }

        if leaving.is_none() && own_limit.is_infinite() {
            return Ok(if phase1 {
                StepResult::NoEntering
            } else {
                StepResult::Unbounded
            });
        }

        let t = best_t;
        // Apply the step to all basics.
        for (pos, &a) in alpha.iter().enumerate() {
            if a != 0.0 {
                let var = self.basis[pos];
                self.x[var] -= dir * t * a;
            }
        }

        match leaving {
            Some((r, _, bound)) => {
                let leaving_var = self.basis[r];
                self.x[q] += dir * t;
                self.x[leaving_var] = bound;
                self.at_upper[leaving_var] = bound == self.ub[leaving_var];
                self.in_basis_pos[leaving_var] = NOT_BASIC;
                self.basis[r] = q;
                self.in_basis_pos[q] = r;
                self.etas.push(Eta {
                    pivot_row: r,
                    col: alpha,
                });
                if self.etas.len() >= REFACTOR_EVERY {
                    self.factorize()?;
                    self.compute_primal();
                }
            }
            None => {
                // Bound flip: the entering variable lands exactly on its
                // other bound.
                let target = if dir > 0.0 { self.ub[q] } else { self.lb[q] };
                self.x[q] = target;
                self.at_upper[q] = dir > 0.0;
            }
        }
        Ok(StepResult::Moved)
    }
}

enum StepResult {
    Moved,
    NoEntering,
    Unbounded,
}

enum PhaseEnd {
    Done,
    Infeasible,
    Unbounded,
}

enum ColIter<'a> {
    Structural {
        rows: &'a [usize],
        vals: &'a [f64],
        idx: usize,
    },
    Slack {
        row: usize,
        done: bool,
    },
}

impl ColIter<'_> {
    #[inline]
    fn next(&mut self) -> Option<(usize, f64)> {
        match self {
            ColIter::Structural { rows, vals, idx } => {
                if *idx < rows.len() {
                    let out = (rows[*idx], vals[*idx]);
                    *idx += 1;
                    Some(out)
                } else {
                    None
                }
            }
            ColIter::Slack { row, done } => {
                if *done {
                    None
                } else {
                    *done = true;
                    Some((*row, 1.0))
                }
            }
        }
    }
}
