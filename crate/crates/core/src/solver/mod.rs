//! Exact MILP solving at desk scale: LP relaxations via bounded-variable
//! revised simplex, depth-first/best-bound branch-and-bound with warm-start
//! incumbents, and a brute-force enumeration oracle for tiny instances.

mod simplex;

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;
use std::time::Instant;

use log::{debug, info};
use thiserror::Error;

use crate::milp::{Assignment, MilpModel, SolveStatus, VarId, VarKind};
use simplex::{LpSolver, LpStatus};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("model has no variables")]
    EmptyModel,
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("brute force refuses {0} free binaries (cap is {MAX_BRUTE_FORCE_BINARIES})")]
    TooManyBinaries(usize),
    #[error("warm start rejected: {0}")]
    InvalidWarmStart(String),
}

pub const MAX_BRUTE_FORCE_BINARIES: usize = 25;

/// Variable-selection rule for branching.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BranchRule {
    /// Branch by descending variable priority class, most-fractional within
    /// a class, lowest id on ties.
    StructuralPriority,
    /// Most-fractional over all binaries, lowest id on ties.
    MostFractional,
}

/// Node-selection rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeSelection {
    /// Depth-first dive until the first incumbent, then best bound.
    BestBoundDive,
    /// Pure depth-first, always diving on the rounded child.
    DepthFirstDive,
}

/// Fractional LP information handed to a rounding heuristic.
pub struct HeuristicInput<'a> {
    /// LP values of all model variables at the current node.
    pub values: &'a [f64],
    /// Working lower bounds (reflecting branching fixings).
    pub lower: &'a [f64],
    /// Working upper bounds.
    pub upper: &'a [f64],
}

/// Proposes integer values for the free binaries given a fractional LP
/// solution; the solver completes the proposal with a residual LP and keeps
/// it only if it beats the incumbent.
pub type RoundingHeuristic = Arc<dyn Fn(&HeuristicInput<'_>) -> Option<Vec<(VarId, bool)>> + Send + Sync>;

#[derive(Clone)]
pub struct SolverConfig {
    pub abs_gap: f64,
    pub rel_gap: f64,
    pub feas_tol: f64,
    pub int_tol: f64,
    pub node_limit: Option<u64>,
    pub time_limit: Option<f64>,
    pub branching: BranchRule,
    pub node_selection: NodeSelection,
    /// Reserved for randomized components; the default algorithms are
    /// deterministic and ignore it.
    pub seed: u64,
    pub verbose: bool,
    pub heuristic: Option<RoundingHeuristic>,
    /// Run the rounding heuristic every this many nodes.
    pub heuristic_frequency: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            abs_gap: 1e-6,
            rel_gap: 1e-4,
            feas_tol: 1e-7,
            int_tol: 1e-6,
            node_limit: None,
            time_limit: None,
            branching: BranchRule::StructuralPriority,
            node_selection: NodeSelection::BestBoundDive,
            seed: 0,
            verbose: false,
            heuristic: None,
            heuristic_frequency: 1,
        }
    }
}

impl std::fmt::Debug for SolverConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SolverConfig")
            .field("abs_gap", &self.abs_gap)
            .field("rel_gap", &self.rel_gap)
            .field("feas_tol", &self.feas_tol)
            .field("int_tol", &self.int_tol)
            .field("node_limit", &self.node_limit)
            .field("time_limit", &self.time_limit)
            .field("branching", &self.branching)
            .field("node_selection", &self.node_selection)
            .field("seed", &self.seed)
            .field("verbose", &self.verbose)
            .field("heuristic", &self.heuristic.as_ref().map(|_| "<fn>"))
            .field("heuristic_frequency", &self.heuristic_frequency)
            .finish()
    }
}

impl SolverConfig {
    /// Tight tolerances for oracle comparisons in tests.
    pub fn exact() -> Self {
        SolverConfig {
            abs_gap: 1e-9,
            rel_gap: 0.0,
            ..Default::default()
        }
    }
}

/// Search statistics for one `solve_milp` call.
#[derive(Clone, Debug, Default)]
pub struct BnbStats {
    pub nodes: u64,
    pub lp_iterations: u64,
    pub incumbent_objective: f64,
    pub best_bound: f64,
    pub wall_seconds: f64,
}

/// Solves the LP relaxation of `model`.
pub fn solve_lp(model: &MilpModel, config: &SolverConfig) -> Result<Assignment, SolverError> {
    if model.num_vars() == 0 {
        return Err(SolverError::EmptyModel);
    }
    let mut lp = LpSolver::new(model);
    lp_to_assignment(model, &mut lp, config)
}

/// Solves the LP relaxation with the given variables fixed by bounds.
pub fn solve_lp_fixed(
    model: &MilpModel,
    fixings: &[(VarId, f64)],
    config: &SolverConfig,
) -> Result<Assignment, SolverError> {
    if model.num_vars() == 0 {
        return Err(SolverError::EmptyModel);
    }
    let mut lp = LpSolver::new(model);
    for &(var, value) in fixings {
        lp.set_bounds(var.index(), value, value);
    }
    lp_to_assignment(model, &mut lp, config)
}

fn lp_to_assignment(
    model: &MilpModel,
    lp: &mut LpSolver,
    _config: &SolverConfig,
) -> Result<Assignment, SolverError> {
    let outcome = lp.solve().map_err(|e| SolverError::Numerical(e.to_string()))?;
    Ok(match outcome.status {
        LpStatus::Optimal => Assignment {
            values: lp.values().to_vec(),
            objective: model.objective_value(lp.values()),
            status: SolveStatus::Optimal,
        },
        LpStatus::Infeasible => Assignment {
            values: Vec::new(),
            objective: f64::INFINITY,
            status: SolveStatus::Infeasible,
        },
        LpStatus::Unbounded => Assignment {
            values: Vec::new(),
            objective: f64::NEG_INFINITY,
            status: SolveStatus::Unbounded,
        },
    })
}

struct NodeRec {
    parent: usize,
    var: usize,
    value: bool,
    depth: u32,
}

struct OpenNode {
    node: usize,
    estimate: f64,
}

impl PartialEq for OpenNode {
    fn eq(&self, other: &Self) -> bool {
        self.node == other.node
    }
}
impl Eq for OpenNode {}
impl PartialOrd for OpenNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OpenNode {
    // BinaryHeap is a max-heap; order reversed for best (lowest) bound first,
    // ties by lowest node id.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .estimate
            .partial_cmp(&self.estimate)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.node.cmp(&self.node))
    }
}

struct Search<'a> {
    model: &'a MilpModel,
    config: &'a SolverConfig,
    lp: LpSolver,
    heur_lp: Option<LpSolver>,
    arena: Vec<NodeRec>,
    incumbent: Option<(f64, Vec<f64>)>,
    stats: BnbStats,
    started: Instant,
}

impl<'a> Search<'a> {
    fn gap_slack(&self, incumbent: f64) -> f64 {
        self.config
            .abs_gap
            .max(self.config.rel_gap * incumbent.abs())
    }

    fn cutoff(&self) -> f64 {
        match &self.incumbent {
            Some((obj, _)) => obj - self.gap_slack(*obj),
            None => f64::INFINITY,
        }
    }

    fn apply_node_bounds(&mut self, node: usize) {
        self.lp.reset_bounds();
        let mut cur = node;
        while cur != 0 {
            let rec = &self.arena[cur];
            let v = if rec.value { 1.0 } else { 0.0 };
            self.lp.set_bounds(rec.var, v, v);
            cur = rec.parent;
        }
    }

    /// Fixes the free binaries at `values` (rounded) and solves the residual
    /// LP under otherwise-original bounds; installs the result as incumbent
    /// if it is feasible and better.
    fn try_candidate(&mut self, fixings: &[(usize, f64)]) -> Result<bool, SolverError> {
        let heur_lp = self
            .heur_lp
            .get_or_insert_with(|| LpSolver::new(self.model));
        heur_lp.reset_bounds();
        for &(var, value) in fixings {
            heur_lp.set_bounds(var, value, value);
        }
        let outcome = heur_lp
            .solve()
            .map_err(|e| SolverError::Numerical(e.to_string()))?;
        self.stats.lp_iterations += outcome.iterations;
        if outcome.status != LpStatus::Optimal {
            return Ok(false);
        }
        let values = heur_lp.values().to_vec();
        let objective = self.model.objective_value(&values);
        let better = match &self.incumbent {
            Some((best, _)) => objective < best - 1e-12,
            None => true,
        };
        if !better {
            return Ok(false);
        }
        // Every incumbent must survive an independent feasibility re-check.
        if let Err(v) = self.model.check_assignment(&values, self.config.feas_tol * 10.0) {
            debug!("candidate rejected by feasibility check: {}", v.description);
            return Ok(false);
        }
        if self.config.verbose {
            info!(
                "incumbent {objective:.9} at node {} ({} nodes explored)",
                self.arena.len(),
                self.stats.nodes
            );
        }
        self.incumbent = Some((objective, values));
        Ok(true)
    }

    fn run_heuristic(&mut self) -> Result<(), SolverError> {
        let Some(heur) = self.config.heuristic.clone() else {
            return Ok(());
        };
        let (lower, upper) = self.lp.current_bounds();
        let input = HeuristicInput {
            values: self.lp.values(),
            lower,
            upper,
        };
        let Some(proposal) = heur(&input) else {
            return Ok(());
        };
        let fixings: Vec<(usize, f64)> = proposal
            .into_iter()
            .map(|(var, v)| (var.index(), if v { 1.0 } else { 0.0 }))
            .collect();
        self.try_candidate(&fixings)?;
        Ok(())
    }

    fn select_branch_var(&self, free_binaries: &[usize]) -> Option<usize> {
        let values = self.lp.values();
        let mut best: Option<(i32, f64, usize)> = None; // (priority, frac score, var)
        for &var in free_binaries {
            let (l, u) = self.lp.bounds(var);
            if l == u {
                continue;
            }
            let v = values[var];
            let frac = (v - v.round()).abs();
            if frac <= self.config.int_tol {
                continue;
            }
            let priority = match self.config.branching {
                BranchRule::StructuralPriority => self.model.vars()[var].branch_priority,
                BranchRule::MostFractional => 0,
            };
            // Most fractional: distance to 0.5 smallest, i.e. score largest.
            let score = -(v - 0.5).abs();
            let replace = match &best {
                Some((bp, bs, bv)) => {
                    (priority, score, std::cmp::Reverse(var))
                        > (*bp, *bs, std::cmp::Reverse(*bv))
                }
                None => true,
            };
            if replace {
                best = Some((priority, score, var));
            }
        }
        best.map(|(_, _, var)| var)
    }

    fn limits_hit(&self) -> bool {
        if let Some(limit) = self.config.node_limit {
            if self.stats.nodes >= limit {
                return true;
            }
        }
        if let Some(limit) = self.config.time_limit {
            if self.started.elapsed().as_secs_f64() >= limit {
                return true;
            }
        }
        false
    }
}

/// Branch-and-bound MILP solve. Returns the best incumbent with a proof that
/// `incumbent - best_bound <= max(abs_gap, rel_gap * |incumbent|)`, or status
/// `LimitReached` with both values reported.
pub fn solve_milp(
    model: &MilpModel,
    config: &SolverConfig,
    warm_start: Option<&Assignment>,
) -> Result<(Assignment, BnbStats), SolverError> {
    if model.num_vars() == 0 {
        return Err(SolverError::EmptyModel);
    }
    let started = Instant::now();
    let mut search = Search {
        model,
        config,
        lp: LpSolver::new(model),
        heur_lp: None,
        arena: vec![NodeRec {
            parent: 0,
            var: 0,
            value: false,
            depth: 0,
        }],
        incumbent: None,
        stats: BnbStats::default(),
        started,
    };

    if let Some(warm) = warm_start {
        if warm.values.len() != model.num_vars() {
            return Err(SolverError::InvalidWarmStart(format!(
                "expected {} values, got {}",
                model.num_vars(),
                warm.values.len()
            )));
        }
        for (i, var) in model.vars().iter().enumerate() {
            if var.kind == VarKind::Binary {
                let v = warm.values[i];
                if (v - v.round()).abs() > config.int_tol {
                    return Err(SolverError::InvalidWarmStart(format!(
                        "binary `{}` = {v} not integral",
                        var.name
                    )));
                }
            }
        }
        if let Err(v) = model.check_assignment(&warm.values, config.feas_tol * 10.0) {
            return Err(SolverError::InvalidWarmStart(v.description));
        }
        let fixings: Vec<(usize, f64)> = model
            .vars()
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary && v.lb != v.ub)
            .map(|(i, _)| (i, warm.values[i].round()))
            .collect();
        // Re-fit the continuous part so the installed incumbent is the best
        // completion of the warm integer assignment.
        if !search.try_candidate(&fixings)? {
            let objective = model.objective_value(&warm.values);
            search.incumbent = Some((objective, warm.values.clone()));
        }
    }

    let free_binaries: Vec<usize> = model
        .free_binaries()
        .iter()
        .map(|v| v.index())
        .collect();

    // Open set: a dive stack plus a best-bound heap.
    let mut stack: Vec<OpenNode> = vec![OpenNode {
        node: 0,
        estimate: f64::NEG_INFINITY,
    }];
    let mut heap: BinaryHeap<OpenNode> = BinaryHeap::new();
    let mut best_bound = f64::NEG_INFINITY;
    let mut limit_hit = false;

    loop {
        // The initial dive ends at the first incumbent under BestBoundDive.
        if matches!(config.node_selection, NodeSelection::BestBoundDive)
            && search.incumbent.is_some()
            && !stack.is_empty()
        {
            for n in stack.drain(..) {
                heap.push(n);
            }
        }
        let Some(open) = stack.pop().or_else(|| heap.pop()) else {
            break;
        };

        // Lower bound over everything still open, for the gap test.
        let open_min = stack
            .iter()
            .map(|n| n.estimate)
            .chain(heap.iter().map(|n| n.estimate))
            .fold(open.estimate, f64::min);
        best_bound = best_bound.max(open_min.min(search.incumbent_objective()));

        if let Some((inc, _)) = &search.incumbent {
            if open.estimate >= inc - search.gap_slack(*inc) && open.estimate > f64::NEG_INFINITY {
                continue;
            }
        }
        if search.limits_hit() {
            limit_hit = true;
            break;
        }

        search.stats.nodes += 1;
        search.apply_node_bounds(open.node);
        let outcome = search
            .lp
            .solve()
            .map_err(|e| SolverError::Numerical(e.to_string()))?;
        search.stats.lp_iterations += outcome.iterations;

        match outcome.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                // A ray of any node's relaxation is a ray of the root's.
                return Ok((
                    Assignment {
                        values: Vec::new(),
                        objective: f64::NEG_INFINITY,
                        status: SolveStatus::Unbounded,
                    },
                    search.stats,
                ));
            }
            LpStatus::Optimal => {}
        }
        let bound = outcome.objective;
        if bound >= search.cutoff() {
            continue;
        }

        match search.select_branch_var(&free_binaries) {
            None => {
                // Integer feasible: complete with a residual LP and record.
                let fixings: Vec<(usize, f64)> = free_binaries
                    .iter()
                    .map(|&v| (v, search.lp.values()[v].round()))
                    .collect();
                search.try_candidate(&fixings)?;
                continue;
            }
            Some(var) => {
                if search.stats.nodes % config.heuristic_frequency.max(1) == 0 {
                    // Heuristic sees this node's fractional LP solution.
                    search.run_heuristic()?;
                }
                let near = search.lp.values()[var].round() >= 0.5;
                let depth = search.arena[open.node].depth + 1;
                search.arena.push(NodeRec {
                    parent: open.node,
                    var,
                    value: near,
                    depth,
                });
                let near_id = search.arena.len() - 1;
                search.arena.push(NodeRec {
                    parent: open.node,
                    var,
                    value: !near,
                    depth,
                });
                let far_id = search.arena.len() - 1;
                let dive = matches!(config.node_selection, NodeSelection::DepthFirstDive)
                    || search.incumbent.is_none();
                if dive {
                    // Far child explored later.
                    stack.push(OpenNode {
                        node: far_id,
                        estimate: bound,
                    });
                    stack.push(OpenNode {
                        node: near_id,
                        estimate: bound,
                    });
                } else {
                    heap.push(OpenNode {
                        node: near_id,
                        estimate: bound,
                    });
                    heap.push(OpenNode {
                        node: far_id,
                        estimate: bound,
                    });
                }
            }
        }
        if config.verbose && search.stats.nodes % 50 == 0 {
            info!(
                "node {}: bound {:.6}, incumbent {}",
                search.stats.nodes,
                bound,
                search
                    .incumbent
                    .as_ref()
                    .map(|(o, _)| format!("{o:.6}"))
                    .unwrap_or_else(|| "-".into())
            );
        }
    }

    let wall = started.elapsed().as_secs_f64();
    search.stats.wall_seconds = wall;
    match search.incumbent {
        Some((objective, values)) => {
            let bound = if limit_hit {
                best_bound
            } else {
                // Search exhausted: the tree proves optimality up to the gap.
                objective
            };
            search.stats.incumbent_objective = objective;
            search.stats.best_bound = bound.min(objective);
            let status = if limit_hit {
                SolveStatus::LimitReached
            } else if objective - search.stats.best_bound <= search.config.abs_gap {
                SolveStatus::Optimal
            } else {
                SolveStatus::FeasibleWithGap
            };
            Ok((
                Assignment {
                    values,
                    objective,
                    status,
                },
                search.stats,
            ))
        }
        None => {
            search.stats.incumbent_objective = f64::INFINITY;
            search.stats.best_bound = if limit_hit { best_bound } else { f64::INFINITY };
            Ok((
                Assignment {
                    values: Vec::new(),
                    objective: f64::INFINITY,
                    status: if limit_hit {
                        SolveStatus::LimitReached
                    } else {
                        SolveStatus::Infeasible
                    },
                },
                search.stats,
            ))
        }
    }
}

impl Search<'_> {
    fn incumbent_objective(&self) -> f64 {
        match &self.incumbent {
            Some((obj, _)) => *obj,
            None => f64::INFINITY,
        }
    }
}

/// Enumerates all assignments of the free binaries (with interval-arithmetic
/// pruning), solving the residual LP for each; exact up to LP tolerance.
pub fn brute_force(model: &MilpModel, config: &SolverConfig) -> Result<Assignment, SolverError> {
    if model.num_vars() == 0 {
        return Err(SolverError::EmptyModel);
    }
    let binaries: Vec<usize> = model.free_binaries().iter().map(|v| v.index()).collect();
    if binaries.len() > MAX_BRUTE_FORCE_BINARIES {
        return Err(SolverError::TooManyBinaries(binaries.len()));
    }
    if binaries.is_empty() {
        return solve_lp(model, config);
    }

    // Per-row activity intervals over all variables at their bounds; fixing a
    // binary shrinks its contribution to a point.
    let m = model.num_constraints();
    let mut lo = vec![0.0f64; m];
    let mut hi = vec![0.0f64; m];
    let mut is_free_binary = vec![false; model.num_vars()];
    for &b in &binaries {
        is_free_binary[b] = true;
    }
    for (row, con) in model.constraints().iter().enumerate() {
        for &(var, c) in &con.coeffs {
            let v = model.var(var);
            let (l, u) = if is_free_binary[var.index()] {
                (0.0, 1.0)
            } else {
                (v.lb, v.ub)
            };
            let (a, b) = (c * l, c * u);
            lo[row] += a.min(b);
            hi[row] += a.max(b);
        }
    }
    // Rows touched by each free binary, for incremental interval updates.
    let mut rows_of: Vec<Vec<(usize, f64)>> = vec![Vec::new(); model.num_vars()];
    for (row, con) in model.constraints().iter().enumerate() {
        for &(var, c) in &con.coeffs {
            if is_free_binary[var.index()] && c != 0.0 {
                rows_of[var.index()].push((row, c));
            }
        }
    }

    let mut ctx = BruteCtx {
        model,
        lp: LpSolver::new(model),
        binaries: &binaries,
        rows_of: &rows_of,
        lo,
        hi,
        best: None,
        unbounded: false,
    };
    ctx.recurse(0)?;

    if let Some((objective, values)) = ctx.best {
        Ok(Assignment {
            values,
            objective,
            status: SolveStatus::Optimal,
        })
    } else if ctx.unbounded {
        Ok(Assignment {
            values: Vec::new(),
            objective: f64::NEG_INFINITY,
            status: SolveStatus::Unbounded,
        })
    } else {
        Ok(Assignment {
            values: Vec::new(),
            objective: f64::INFINITY,
            status: SolveStatus::Infeasible,
        })
    }
}

struct BruteCtx<'a> {
    model: &'a MilpModel,
    lp: LpSolver,
    binaries: &'a [usize],
    rows_of: &'a [Vec<(usize, f64)>],
    lo: Vec<f64>,
    hi: Vec<f64>,
    best: Option<(f64, Vec<f64>)>,
    unbounded: bool,
}

impl BruteCtx<'_> {
    fn recurse(&mut self, depth: usize) -> Result<(), SolverError> {
        if depth == self.binaries.len() {
            let outcome = self
                .lp
                .solve()
                .map_err(|e| SolverError::Numerical(e.to_string()))?;
            match outcome.status {
                LpStatus::Optimal => {
                    let obj = self.model.objective_value(self.lp.values());
                    let better = match &self.best {
                        Some((b, _)) => obj < b - 1e-12,
                        None => true,
                    };
                    if better {
                        self.best = Some((obj, self.lp.values().to_vec()));
                    }
                }
                LpStatus::Unbounded => self.unbounded = true,
                LpStatus::Infeasible => {}
            }
            return Ok(());
        }
        let var = self.binaries[depth];
        for value in [false, true] {
            self.apply(var, value);
            if !self.pruned(var) {
                self.lp.set_bounds(var, value as u8 as f64, value as u8 as f64);
                self.recurse(depth + 1)?;
                let (l, u) = self.lp.original_bounds(var);
                self.lp.set_bounds(var, l, u);
            }
            self.unapply(var, value);
        }
        Ok(())
    }

    fn apply(&mut self, var: usize, value: bool) {
        let v = value as u8 as f64;
        for &(row, c) in &self.rows_of[var] {
            self.lo[row] += c * v - c.min(0.0);
            self.hi[row] += c * v - c.max(0.0);
        }
    }

    fn unapply(&mut self, var: usize, value: bool) {
        let v = value as u8 as f64;
        for &(row, c) in &self.rows_of[var] {
            self.lo[row] -= c * v - c.min(0.0);
            self.hi[row] -= c * v - c.max(0.0);
        }
    }

    /// Infeasibility certificate from interval arithmetic on the rows the
    /// variable touches.
    fn pruned(&self, var: usize) -> bool {
        use crate::milp::ConstraintSense::*;
        for &(row, _) in &self.rows_of[var] {
            let con = &self.model.constraints()[row];
            let tol = 1e-9 * (1.0 + con.rhs.abs());
            let dead = match con.sense {
                Le => self.lo[row] > con.rhs + tol,
                Ge => self.hi[row] < con.rhs - tol,
                Eq => self.lo[row] > con.rhs + tol || self.hi[row] < con.rhs - tol,
            };
            if dead {
                return true;
            }
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::ConstraintSense::*;

    fn cfg() -> SolverConfig {
        SolverConfig::exact()
    }

    #[test]
    fn lp_single_bound() {
        // max x s.t. x <= 1, as min -x.
        let mut m = MilpModel::new("t");
        let x = m
            .add_variable("x", 0.0, f64::INFINITY, VarKind::Continuous)
            .unwrap();
        m.add_constraint(vec![(x, 1.0)], Le, 1.0).unwrap();
        m.set_objective(vec![(x, -1.0)]);
        let sol = solve_lp(&m, &cfg()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.value(x) - 1.0).abs() < 1e-9);
        assert!((sol.objective + 1.0).abs() < 1e-9);
    }

    #[test]
    fn lp_two_var_facet() {
        // min -x - y s.t. x + y <= 1, x, y in [0, 1]: objective -1.
        let mut m = MilpModel::new("t");
        let x = m.add_variable("x", 0.0, 1.0, VarKind::Continuous).unwrap();
        let y = m.add_variable("y", 0.0, 1.0, VarKind::Continuous).unwrap();
        m.add_constraint(vec![(x, 1.0), (y, 1.0)], Le, 1.0).unwrap();
        m.set_objective(vec![(x, -1.0), (y, -1.0)]);
        let sol = solve_lp(&m, &cfg()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective + 1.0).abs() < 1e-9);
    }

    #[test]
    fn lp_contradictory_bounds_infeasible() {
        let mut m = MilpModel::new("t");
        let x = m
            .add_variable("x", f64::NEG_INFINITY, f64::INFINITY, VarKind::Continuous)
            .unwrap();
        m.add_constraint(vec![(x, 1.0)], Ge, 2.0).unwrap();
        m.add_constraint(vec![(x, 1.0)], Le, 1.0).unwrap();
        let sol = solve_lp(&m, &cfg()).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn lp_unbounded_detected() {
        let mut m = MilpModel::new("t");
        let x = m
            .add_variable("x", 0.0, f64::INFINITY, VarKind::Continuous)
            .unwrap();
        m.set_objective(vec![(x, -1.0)]);
        let sol = solve_lp(&m, &cfg()).unwrap();
        assert_eq!(sol.status, SolveStatus::Unbounded);
    }

    fn knapsack() -> (MilpModel, VarId, VarId) {
        // max 3a + 2b s.t. 2a + 2b <= 3, binary, as min -3a - 2b.
        let mut m = MilpModel::new("knap");
        let a = m.add_variable("a", 0.0, 1.0, VarKind::Binary).unwrap();
        let b = m.add_variable("b", 0.0, 1.0, VarKind::Binary).unwrap();
        m.add_constraint(vec![(a, 2.0), (b, 2.0)], Le, 3.0).unwrap();
        m.set_objective(vec![(a, -3.0), (b, -2.0)]);
        (m, a, b)
    }

    #[test]
    fn milp_knapsack() {
        let (m, a, b) = knapsack();
        let (sol, stats) = solve_milp(&m, &cfg(), None).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective + 3.0).abs() < 1e-9);
        assert!((sol.value(a) - 1.0).abs() < 1e-6);
        assert!(sol.value(b).abs() < 1e-6);
        assert!(stats.nodes >= 1);
    }

    #[test]
    fn brute_force_knapsack_matches() {
        let (m, _, _) = knapsack();
        let bf = brute_force(&m, &cfg()).unwrap();
        assert_eq!(bf.status, SolveStatus::Optimal);
        assert!((bf.objective + 3.0).abs() < 1e-9);
    }

    #[test]
    fn milp_all_continuous_equals_lp() {
        let mut m = MilpModel::new("t");
        let x = m.add_variable("x", 0.0, 4.0, VarKind::Continuous).unwrap();
        let y = m.add_variable("y", 0.0, 4.0, VarKind::Continuous).unwrap();
        m.add_constraint(vec![(x, 1.0), (y, 2.0)], Le, 5.0).unwrap();
        m.set_objective(vec![(x, -1.0), (y, -1.0)]);
        let lp = solve_lp(&m, &cfg()).unwrap();
        let (milp, _) = solve_milp(&m, &cfg(), None).unwrap();
        assert!((lp.objective - milp.objective).abs() < 1e-9);
    }

    #[test]
    fn brute_force_no_binaries_equals_lp() {
        let mut m = MilpModel::new("t");
        let x = m.add_variable("x", -1.0, 2.0, VarKind::Continuous).unwrap();
        m.set_objective(vec![(x, 1.0)]);
        let lp = solve_lp(&m, &cfg()).unwrap();
        let bf = brute_force(&m, &cfg()).unwrap();
        assert!((lp.objective - bf.objective).abs() < 1e-12);
    }

    #[test]
    fn brute_force_infeasible_for_all() {
        let mut m = MilpModel::new("t");
        let a = m.add_variable("a", 0.0, 1.0, VarKind::Binary).unwrap();
        let b = m.add_variable("b", 0.0, 1.0, VarKind::Binary).unwrap();
        m.add_constraint(vec![(a, 1.0), (b, 1.0)], Ge, 3.0).unwrap();
        let bf = brute_force(&m, &cfg()).unwrap();
        assert_eq!(bf.status, SolveStatus::Infeasible);
        let (sol, _) = solve_milp(&m, &cfg(), None).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn brute_force_refuses_large_models() {
        let mut m = MilpModel::new("t");
        for i in 0..26 {
            m.add_variable(format!("b{i}"), 0.0, 1.0, VarKind::Binary)
                .unwrap();
        }
        assert!(matches!(
            brute_force(&m, &cfg()),
            Err(SolverError::TooManyBinaries(26))
        ));
    }

    #[test]
    fn determinism_same_nodes_and_objective() {
        let (m, _, _) = knapsack();
        let (s1, t1) = solve_milp(&m, &cfg(), None).unwrap();
        let (s2, t2) = solve_milp(&m, &cfg(), None).unwrap();
        assert_eq!(s1.objective, s2.objective);
        assert_eq!(t1.nodes, t2.nodes);
    }

    #[test]
    fn degenerate_lp_terminates() {
        // Many redundant rows through the same vertex.
        let mut m = MilpModel::new("degen");
        let x = m.add_variable("x", 0.0, 10.0, VarKind::Continuous).unwrap();
        let y = m.add_variable("y", 0.0, 10.0, VarKind::Continuous).unwrap();
        for s in 1..8 {
            m.add_constraint(vec![(x, 1.0), (y, s as f64)], Le, 1.0)
                .unwrap();
        }
        m.set_objective(vec![(x, -1.0), (y, -1.0)]);
        let sol = solve_lp(&m, &cfg()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective + 1.0).abs() < 1e-8);
    }
}
