//! Translation of (dataset, basis sets, hyperparameters) into the
//! tree-learning MILP, and decoding of solver assignments back into a
//! symbolic decision tree.
//!
//! Tree nodes are numbered 1..=N with N = 2^(D+1)-1; node n has children 2n
//! and 2n+1; terminals are 2^D..=N. A binary d_n marks branching nodes, z_in
//! assigns data points to leaf nodes, (a_nk, b_n) parameterize the split
//! g_n(x) = sum_k a_nk phi_k(x) tested as g < b (left) / g >= b (right), and
//! c_kn are the leaf combination coefficients. Routing uses big-M rows with
//! an epsilon margin to emulate the strict inequality; the bilinear products
//! z_in * yhat_in are linearized exactly through delta_in boxes.
//!
//! Model-size convention: every formulation variable is declared, including
//! the bound-fixed d_1 (=1) and terminal d_n (=0) and the absolute-value
//! splits for the leaf-coefficient magnitudes. Rows are emitted verbatim over
//! their index sets, with one reduction: the w-link row `w_nk <= 1 - d_n` is
//! dropped wherever d_n is bound-fixed (for fixed d_n = 1 the implied
//! `w_nk = 0` is applied as variable bounds instead). When N_F is absent the
//! leaf coefficients get explicit bound rows in place of the w machinery.

use std::sync::Arc;

use thiserror::Error;

use crate::dataset::Dataset;
use crate::expr::{BasisError, BasisSet};
use crate::milp::{
    Assignment, ConstraintSense::*, MilpModel, ModelError, SolveStatus, VarId, VarKind,
};
use crate::solver::{self, HeuristicInput, RoundingHeuristic, SolverConfig};
use crate::tree::{SymbolicTree, TreeNode};

#[derive(Debug, Error)]
pub enum FormulationError {
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperParams(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error(transparent)]
    Featurize(#[from] BasisError),
    #[error("model construction failed: {0}")]
    Model(#[from] ModelError),
    #[error("assignment has no solution (status {0:?})")]
    NoSolution(SolveStatus),
    #[error("inconsistent solution: {0}")]
    Inconsistent(String),
}

/// Big-M mode for the routing and product-linearization rows.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BigM {
    /// One constant used verbatim in every big-M row.
    Global(f64),
    /// Per-row constants derived from the declared coefficient bounds and
    /// the featurized data.
    PerRowDerived,
}

/// Learning-problem hyperparameters.
#[derive(Clone, Debug)]
pub struct HyperParams {
    pub depth: u32,
    /// Cap on basis functions per splitting condition; `None` omits the cap.
    pub n_b: Option<u32>,
    /// Cap on basis functions per leaf expression; `None` omits the w
    /// machinery entirely.
    pub n_f: Option<u32>,
    pub lambda_c: f64,
    pub lambda_m: f64,
    pub a_bounds: (f64, f64),
    pub b_bounds: (f64, f64),
    pub c_bounds: (f64, f64),
    pub y_bounds: (f64, f64),
    pub big_m: BigM,
    /// Routing margin emulating strictness of `g < b`.
    pub epsilon: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            depth: 1,
            n_b: None,
            n_f: None,
            lambda_c: 0.0,
            lambda_m: 0.0,
            a_bounds: (-100.0, 100.0),
            b_bounds: (-100.0, 100.0),
            c_bounds: (-1000.0, 1000.0),
            y_bounds: (-1000.0, 1000.0),
            big_m: BigM::PerRowDerived,
            epsilon: 1e-4,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<(), FormulationError> {
        let err = |m: &str| Err(FormulationError::InvalidHyperParams(m.to_string()));
        if self.depth < 1 {
            return err("depth must be at least 1");
        }
        if self.depth > 8 {
            return err("depth above 8 is not supported");
        }
        for (name, (lb, ub)) in [
            ("a", self.a_bounds),
            ("b", self.b_bounds),
            ("c", self.c_bounds),
            ("y", self.y_bounds),
        ] {
            if !(lb <= ub) {
                return Err(FormulationError::InvalidHyperParams(format!(
                    "{name} bounds inverted: [{lb}, {ub}]"
                )));
            }
        }
        if !(self.epsilon > 0.0) {
            return err("routing epsilon must be positive");
        }
        if let BigM::Global(m) = self.big_m {
            if !(m > 0.0) {
                return err("global big-M must be positive");
            }
        }
        if self.lambda_c < 0.0 || self.lambda_m < 0.0 {
            return err("objective weights must be nonnegative");
        }
        Ok(())
    }
}

/// Node arithmetic for a complete binary tree of the given depth.
#[derive(Clone, Copy, Debug)]
pub struct Topology {
    pub depth: u32,
}

impl Topology {
    pub fn n_nodes(&self) -> usize {
        (1usize << (self.depth + 1)) - 1
    }

    pub fn first_terminal(&self) -> usize {
        1usize << self.depth
    }

    pub fn is_terminal(&self, n: usize) -> bool {
        n >= self.first_terminal()
    }

    pub fn internal_nodes(&self) -> impl Iterator<Item = usize> {
        1..self.first_terminal()
    }

    pub fn nodes(&self) -> impl Iterator<Item = usize> + use<> {
        1..=self.n_nodes()
    }

    pub fn terminals(&self) -> impl Iterator<Item = usize> + use<> {
        self.first_terminal()..=self.n_nodes()
    }

    /// Ancestors of `n` with the side taken to continue toward `n`:
    /// `(m, true)` means the path went left at `m`.
    pub fn ancestors(&self, n: usize) -> Vec<(usize, bool)> {
        let mut out = Vec::new();
        let mut cur = n;
        while cur > 1 {
            let parent = cur / 2;
            out.push((parent, cur == 2 * parent));
            cur = parent;
        }
        out.reverse();
        out
    }
}

/// Home of every model variable, keyed by the formulation's symbols.
#[derive(Clone, Debug)]
pub struct VariableIndexMap {
    pub topology: Topology,
    pub n_points: usize,
    pub kb_len: usize,
    pub kf_len: usize,
    pub has_w: bool,
    d: Vec<VarId>,
    a: Vec<VarId>,
    omega: Vec<VarId>,
    b: Vec<VarId>,
    c: Vec<VarId>,
    w: Vec<VarId>,
    yhat: Vec<VarId>,
    delta: Vec<VarId>,
    ypred: Vec<VarId>,
    z: Vec<VarId>,
    eps_pos: Vec<VarId>,
    eps_neg: Vec<VarId>,
    chat_pos: Vec<VarId>,
    chat_neg: Vec<VarId>,
}

impl VariableIndexMap {
    pub fn d(&self, node: usize) -> VarId {
        self.d[node - 1]
    }
    pub fn a(&self, node: usize, k: usize) -> VarId {
        self.a[(node - 1) * self.kb_len + k]
    }
    pub fn omega(&self, node: usize, k: usize) -> VarId {
        self.omega[(node - 1) * self.kb_len + k]
    }
    pub fn b(&self, node: usize) -> VarId {
        self.b[node - 1]
    }
    pub fn c(&self, node: usize, k: usize) -> VarId {
        self.c[(node - 1) * self.kf_len + k]
    }
    pub fn w(&self, node: usize, k: usize) -> Option<VarId> {
        self.has_w
            .then(|| self.w[(node - 1) * self.kf_len + k])
    }
    pub fn yhat(&self, i: usize, node: usize) -> VarId {
        self.yhat[i * self.topology.n_nodes() + node - 1]
    }
    pub fn delta(&self, i: usize, node: usize) -> VarId {
        self.delta[i * self.topology.n_nodes() + node - 1]
    }
    pub fn ypred(&self, i: usize) -> VarId {
        self.ypred[i]
    }
    pub fn z(&self, i: usize, node: usize) -> VarId {
        self.z[i * self.topology.n_nodes() + node - 1]
    }
    pub fn eps(&self, i: usize) -> (VarId, VarId) {
        (self.eps_pos[i], self.eps_neg[i])
    }
    pub fn chat(&self, node: usize, k: usize) -> (VarId, VarId) {
        let idx = (node - 1) * self.kf_len + k;
        (self.chat_pos[idx], self.chat_neg[idx])
    }
}

/// Builds the learning MILP. Featurization happens here, once; domain errors
/// surface with the offending row and basis function.
pub fn build(
    data: &Dataset,
    kb: &BasisSet,
    kf: &BasisSet,
    hp: &HyperParams,
) -> Result<(MilpModel, VariableIndexMap), FormulationError> {
    hp.validate()?;
    if data.is_empty() {
        return Err(FormulationError::EmptyDataset);
    }
    let phi_b = kb.featurize(data)?;
    let phi_f = kf.featurize(data)?;
    build_with_features(data.targets(), &phi_b, &phi_f, hp)
}

pub(crate) fn build_with_features(
    targets: &[f64],
    phi_b: &[Vec<f64>],
    phi_f: &[Vec<f64>],
    hp: &HyperParams,
) -> Result<(MilpModel, VariableIndexMap), FormulationError> {
    let topo = Topology { depth: hp.depth };
    let n_nodes = topo.n_nodes();
    let n_points = targets.len();
    let kb_len = phi_b[0].len();
    let kf_len = phi_f[0].len();
    let has_w = hp.n_f.is_some();
    let (a_lb, a_ub) = hp.a_bounds;
    let (b_lb, b_ub) = hp.b_bounds;
    let (c_lb, c_ub) = hp.c_bounds;
    let (y_lb, y_ub) = hp.y_bounds;

    let mut model = MilpModel::new("symtree");

    // d_n: branching flags; the root is forced to branch and terminals are
    // forced not to, via bounds rather than rows.
    let mut d = Vec::with_capacity(n_nodes);
    for n in topo.nodes() {
        let (lb, ub) = if n == 1 {
            (1.0, 1.0)
        } else if topo.is_terminal(n) {
            (0.0, 0.0)
        } else {
            (0.0, 1.0)
        };
        let id = model.add_variable(format!("d{n}"), lb, ub, VarKind::Binary)?;
        model.set_branch_priority(id, 3);
        d.push(id);
    }

    let mut a = Vec::with_capacity((topo.first_terminal() - 1) * kb_len);
    let mut omega = Vec::with_capacity(a.capacity());
    let mut b = Vec::with_capacity(topo.first_terminal() - 1);
    for n in topo.internal_nodes() {
        for k in 0..kb_len {
            a.push(model.add_variable(format!("a{n}_{k}"), a_lb, a_ub, VarKind::Continuous)?);
        }
        for k in 0..kb_len {
            let id = model.add_variable(format!("om{n}_{k}"), 0.0, 1.0, VarKind::Binary)?;
            model.set_branch_priority(id, 2);
            omega.push(id);
        }
        b.push(model.add_variable(format!("b{n}"), b_lb, b_ub, VarKind::Continuous)?);
    }

    let mut c = Vec::with_capacity(n_nodes * kf_len);
    for n in topo.nodes() {
        for k in 0..kf_len {
            c.push(model.add_variable(format!("c{n}_{k}"), c_lb, c_ub, VarKind::Continuous)?);
        }
    }
    let mut w = Vec::new();
    if has_w {
        for n in topo.nodes() {
            let forced_branch = n == 1;
            for k in 0..kf_len {
                let ub = if forced_branch { 0.0 } else { 1.0 };
                let id = model.add_variable(format!("w{n}_{k}"), 0.0, ub, VarKind::Binary)?;
                model.set_branch_priority(id, 2);
                w.push(id);
            }
        }
    }

    let (delta_lb, delta_ub) = (y_lb.min(0.0), y_ub.max(0.0));
    let mut yhat = Vec::with_capacity(n_points * n_nodes);
    let mut delta = Vec::with_capacity(n_points * n_nodes);
    for i in 0..n_points {
        for n in topo.nodes() {
            yhat.push(model.add_variable(
                format!("yh{i}_{n}"),
                y_lb,
                y_ub,
                VarKind::Continuous,
            )?);
        }
        for n in topo.nodes() {
            delta.push(model.add_variable(
                format!("dl{i}_{n}"),
                delta_lb,
                delta_ub,
                VarKind::Continuous,
            )?);
        }
    }
    let mut ypred = Vec::with_capacity(n_points);
    for i in 0..n_points {
        ypred.push(model.add_variable(format!("yp{i}"), y_lb, y_ub, VarKind::Continuous)?);
    }
    let mut z = Vec::with_capacity(n_points * n_nodes);
    for i in 0..n_points {
        for n in topo.nodes() {
            let id = model.add_variable(format!("z{i}_{n}"), 0.0, 1.0, VarKind::Binary)?;
            model.set_branch_priority(id, 1);
            z.push(id);
        }
    }
    let mut eps_pos = Vec::with_capacity(n_points);
    let mut eps_neg = Vec::with_capacity(n_points);
    for i in 0..n_points {
        eps_pos.push(model.add_variable(
            format!("ep{i}"),
            0.0,
            f64::INFINITY,
            VarKind::Continuous,
        )?);
        eps_neg.push(model.add_variable(
            format!("en{i}"),
            0.0,
            f64::INFINITY,
            VarKind::Continuous,
        )?);
    }
    let chat_ub = c_lb.abs().max(c_ub.abs());
    let mut chat_pos = Vec::with_capacity(n_nodes * kf_len);
    let mut chat_neg = Vec::with_capacity(n_nodes * kf_len);
    for n in topo.nodes() {
        for k in 0..kf_len {
            chat_pos.push(model.add_variable(
                format!("cp{n}_{k}"),
                0.0,
                chat_ub,
                VarKind::Continuous,
            )?);
            chat_neg.push(model.add_variable(
                format!("cm{n}_{k}"),
                0.0,
                chat_ub,
                VarKind::Continuous,
            )?);
        }
    }

    let map = VariableIndexMap {
        topology: topo,
        n_points,
        kb_len,
        kf_len,
        has_w,
        d,
        a,
        omega,
        b,
        c,
        w,
        yhat,
        delta,
        ypred,
        z,
        eps_pos,
        eps_neg,
        chat_pos,
        chat_neg,
    };

    // Tree-structure logic: children may branch only under a branching parent.
    for n in topo.internal_nodes() {
        for child in [2 * n, 2 * n + 1] {
            model.add_constraint(
                vec![(map.d(child), 1.0), (map.d(n), -1.0)],
                Le,
                0.0,
            )?;
        }
    }
    // No data on branching nodes.
    for i in 0..n_points {
        for n in topo.nodes() {
            model.add_constraint(vec![(map.z(i, n), 1.0), (map.d(n), 1.0)], Le, 1.0)?;
        }
    }
    // Each point is assigned to exactly one node.
    for i in 0..n_points {
        let row = topo.nodes().map(|n| (map.z(i, n), 1.0)).collect();
        model.add_constraint(row, Eq, 1.0)?;
    }
    // Assignment only below branching ancestors.
    for i in 0..n_points {
        for n in topo.nodes() {
            for (m, _) in topo.ancestors(n) {
                model.add_constraint(
                    vec![(map.z(i, n), 1.0), (map.d(m), -1.0)],
                    Le,
                    0.0,
                )?;
            }
        }
    }
    // Split coefficients exist only on selected features of branching nodes.
    for n in topo.internal_nodes() {
        for k in 0..kb_len {
            model.add_constraint(
                vec![(map.a(n, k), 1.0), (map.omega(n, k), -a_ub)],
                Le,
                0.0,
            )?;
            model.add_constraint(
                vec![(map.a(n, k), 1.0), (map.omega(n, k), -a_lb)],
                Ge,
                0.0,
            )?;
        }
        for k in 0..kb_len {
            model.add_constraint(vec![(map.omega(n, k), 1.0), (map.d(n), -1.0)], Le, 0.0)?;
        }
    }
    // Routing: an assigned point satisfies every ancestor's split condition.
    let m_cap = a_lb.abs().max(a_ub.abs());
    let b_cap = b_lb.abs().max(b_ub.abs());
    for i in 0..n_points {
        for n in topo.nodes() {
            let ancestors = topo.ancestors(n);
            for &(m, went_left) in &ancestors {
                let big_m = match hp.big_m {
                    BigM::Global(v) => v,
                    BigM::PerRowDerived => {
                        let sum: f64 =
                            phi_b[i].iter().map(|p| m_cap * p.abs()).sum::<f64>();
                        sum + b_cap + hp.epsilon
                    }
                };
                let mut row: Vec<(VarId, f64)> = Vec::with_capacity(kb_len + 2);
                for k in 0..kb_len {
                    if phi_b[i][k] != 0.0 {
                        row.push((map.a(m, k), phi_b[i][k]));
                    }
                }
                row.push((map.b(m), -1.0));
                if went_left {
                    row.push((map.z(i, n), big_m));
                    model.add_constraint(row, Le, big_m - hp.epsilon)?;
                } else {
                    row.push((map.z(i, n), -big_m));
                    model.add_constraint(row, Ge, -big_m)?;
                }
            }
        }
    }
    // Node predictions from leaf coefficients.
    for i in 0..n_points {
        for n in topo.nodes() {
            let mut row: Vec<(VarId, f64)> = Vec::with_capacity(kf_len + 1);
            row.push((map.yhat(i, n), 1.0));
            for k in 0..kf_len {
                if phi_f[i][k] != 0.0 {
                    row.push((map.c(n, k), -phi_f[i][k]));
                }
            }
            model.add_constraint(row, Eq, 0.0)?;
        }
    }
    // Leaf-coefficient gating.
    if has_w {
        for n in topo.nodes() {
            for k in 0..kf_len {
                let wid = map.w(n, k).unwrap();
                model.add_constraint(vec![(map.c(n, k), 1.0), (wid, -c_ub)], Le, 0.0)?;
                model.add_constraint(vec![(map.c(n, k), 1.0), (wid, -c_lb)], Ge, 0.0)?;
            }
            // `w <= 1 - d` only where d_n is genuinely free; bound-fixed
            // nodes were handled at declaration.
            if n != 1 && !topo.is_terminal(n) {
                for k in 0..kf_len {
                    model.add_constraint(
                        vec![(map.w(n, k).unwrap(), 1.0), (map.d(n), 1.0)],
                        Le,
                        1.0,
                    )?;
                }
            }
        }
    } else {
        for n in topo.nodes() {
            for k in 0..kf_len {
                model.add_constraint(vec![(map.c(n, k), 1.0)], Le, c_ub)?;
                model.add_constraint(vec![(map.c(n, k), 1.0)], Ge, c_lb)?;
            }
        }
    }
    // Exact linearization of delta_in = z_in * yhat_in.
    let delta_m = match hp.big_m {
        BigM::Global(v) => v,
        BigM::PerRowDerived => y_lb.abs().max(y_ub.abs()),
    };
    for i in 0..n_points {
        for n in topo.nodes() {
            let (dl, yh, zi) = (map.delta(i, n), map.yhat(i, n), map.z(i, n));
            model.add_constraint(vec![(dl, 1.0), (zi, -y_ub)], Le, 0.0)?;
            model.add_constraint(vec![(dl, 1.0), (zi, -y_lb)], Ge, 0.0)?;
            model.add_constraint(vec![(dl, 1.0), (yh, -1.0), (zi, delta_m)], Le, delta_m)?;
            model.add_constraint(vec![(dl, 1.0), (yh, -1.0), (zi, -delta_m)], Ge, -delta_m)?;
        }
    }
    // Tree prediction per point.
    for i in 0..n_points {
        let mut row: Vec<(VarId, f64)> = vec![(map.ypred(i), 1.0)];
        row.extend(topo.nodes().map(|n| (map.delta(i, n), -1.0)));
        model.add_constraint(row, Eq, 0.0)?;
    }
    // Complexity caps.
    if let Some(n_b) = hp.n_b {
        for n in topo.internal_nodes() {
            let row = (0..kb_len).map(|k| (map.omega(n, k), 1.0)).collect();
            model.add_constraint(row, Le, n_b as f64)?;
        }
    }
    if let Some(n_f) = hp.n_f {
        for n in topo.nodes() {
            let row = (0..kf_len)
                .map(|k| (map.w(n, k).unwrap(), 1.0))
                .collect();
            model.add_constraint(row, Le, n_f as f64)?;
        }
    }
    // Absolute-value reformulations.
    for (i, &y) in targets.iter().enumerate() {
        let (ep, en) = map.eps(i);
        model.add_constraint(
            vec![(ep, 1.0), (en, -1.0), (map.ypred(i), 1.0)],
            Eq,
            y,
        )?;
    }
    for n in topo.nodes() {
        for k in 0..kf_len {
            let (cp, cn) = map.chat(n, k);
            model.add_constraint(
                vec![(cp, 1.0), (cn, -1.0), (map.c(n, k), -1.0)],
                Eq,
                0.0,
            )?;
        }
    }

    // Objective: mean absolute error + tree complexity + coefficient mass.
    let mut obj: Vec<(VarId, f64)> = Vec::new();
    let inv_n = 1.0 / n_points as f64;
    for i in 0..n_points {
        let (ep, en) = map.eps(i);
        obj.push((ep, inv_n));
        obj.push((en, inv_n));
    }
    if hp.lambda_c != 0.0 {
        for n in topo.nodes() {
            obj.push((map.d(n), hp.lambda_c));
        }
    }
    if hp.lambda_m != 0.0 {
        for n in topo.nodes() {
            for k in 0..kf_len {
                let (cp, cn) = map.chat(n, k);
                obj.push((cp, hp.lambda_m));
                obj.push((cn, hp.lambda_m));
            }
        }
    }
    model.set_objective(obj);

    Ok((model, map))
}

/// Objective split into its three terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectiveBreakdown {
    pub l_acc: f64,
    pub l_c: f64,
    pub l_m: f64,
}

/// Decoded symbolic decision tree plus training-point routing.
#[derive(Clone, Debug)]
pub enum DecodedNode {
    Branch { split: Vec<f64>, threshold: f64 },
    Leaf { coefficients: Vec<f64> },
    Inactive,
}

#[derive(Clone, Debug)]
pub struct TreeSolution {
    pub depth: u32,
    /// Indexed by node id; index 0 is unused.
    pub nodes: Vec<DecodedNode>,
    /// Leaf node id per training point.
    pub routing: Vec<usize>,
    pub breakdown: ObjectiveBreakdown,
}

impl TreeSolution {
    pub fn node(&self, n: usize) -> &DecodedNode {
        &self.nodes[n]
    }

    pub fn branch_nodes(&self) -> impl Iterator<Item = (usize, &[f64], f64)> {
        self.nodes.iter().enumerate().filter_map(|(n, node)| {
            if let DecodedNode::Branch { split, threshold } = node {
                Some((n, split.as_slice(), *threshold))
            } else {
                None
            }
        })
    }

    pub fn leaf_nodes(&self) -> impl Iterator<Item = (usize, &[f64])> {
        self.nodes.iter().enumerate().filter_map(|(n, node)| {
            if let DecodedNode::Leaf { coefficients } = node {
                Some((n, coefficients.as_slice()))
            } else {
                None
            }
        })
    }
}

/// Reads a solver assignment back into a tree, with consistency checks:
/// binaries are read with 0.5 rounding, coefficients verbatim, the objective
/// breakdown is recomputed from the assignment and compared to the solver
/// objective, and the routing must respect the tree logic.
pub fn decode(
    assignment: &Assignment,
    map: &VariableIndexMap,
    hp: &HyperParams,
) -> Result<TreeSolution, FormulationError> {
    if !assignment.has_solution() {
        return Err(FormulationError::NoSolution(assignment.status));
    }
    let topo = map.topology;
    let value = |id: VarId| assignment.value(id);
    let is_on = |id: VarId| value(id) > 0.5;

    let mut kinds = vec![DecodedNode::Inactive];
    let mut active = vec![false; topo.n_nodes() + 1];
    active[1] = true;
    for n in topo.nodes() {
        if n > 1 {
            let parent = n / 2;
            active[n] = active[parent] && is_on(map.d(parent));
        }
        let branching = is_on(map.d(n));
        if branching && !active[n] {
            return Err(FormulationError::Inconsistent(format!(
                "node {n} branches but is not active"
            )));
        }
        if branching && topo.is_terminal(n) {
            return Err(FormulationError::Inconsistent(format!(
                "terminal node {n} branches"
            )));
        }
        let node = if branching {
            DecodedNode::Branch {
                split: (0..map.kb_len).map(|k| value(map.a(n, k))).collect(),
                threshold: value(map.b(n)),
            }
        } else if active[n] {
            DecodedNode::Leaf {
                coefficients: (0..map.kf_len).map(|k| value(map.c(n, k))).collect(),
            }
        } else {
            DecodedNode::Inactive
        };
        kinds.push(node);
    }
    if !matches!(kinds[1], DecodedNode::Branch { .. }) {
        return Err(FormulationError::Inconsistent("root does not branch".into()));
    }

    let mut routing = Vec::with_capacity(map.n_points);
    for i in 0..map.n_points {
        let assigned: Vec<usize> = topo.nodes().filter(|&n| is_on(map.z(i, n))).collect();
        if assigned.len() != 1 {
            return Err(FormulationError::Inconsistent(format!(
                "point {i} assigned to {} nodes",
                assigned.len()
            )));
        }
        let n = assigned[0];
        if !matches!(kinds[n], DecodedNode::Leaf { .. }) {
            return Err(FormulationError::Inconsistent(format!(
                "point {i} routed to non-leaf node {n}"
            )));
        }
        routing.push(n);
    }

    // Zero out leaves that received no training points.
    for n in topo.nodes() {
        if matches!(kinds[n], DecodedNode::Leaf { .. }) && !routing.contains(&n) {
            kinds[n] = DecodedNode::Leaf {
                coefficients: vec![0.0; map.kf_len],
            };
        }
    }

    let l_acc = (0..map.n_points)
        .map(|i| {
            let (ep, en) = map.eps(i);
            value(ep) + value(en)
        })
        .sum::<f64>()
        / map.n_points as f64;
    let l_c = topo.nodes().map(|n| value(map.d(n)).round()).sum::<f64>();
    let l_m = topo
        .nodes()
        .flat_map(|n| (0..map.kf_len).map(move |k| (n, k)))
        .map(|(n, k)| value(map.c(n, k)).abs())
        .sum::<f64>();
    let breakdown = ObjectiveBreakdown { l_acc, l_c, l_m };

    let recomputed = l_acc + hp.lambda_c * l_c + hp.lambda_m * l_m;
    if (recomputed - assignment.objective).abs() > 1e-6 * (1.0 + assignment.objective.abs()) {
        return Err(FormulationError::Inconsistent(format!(
            "objective breakdown {recomputed} disagrees with solver objective {}",
            assignment.objective
        )));
    }

    Ok(TreeSolution {
        depth: topo.depth,
        nodes: kinds,
        routing,
        breakdown,
    })
}

/// Converts a decoded solution into a standalone predictive tree.
pub fn to_symbolic_tree(
    solution: &TreeSolution,
    kb: &BasisSet,
    kf: &BasisSet,
) -> Result<SymbolicTree, FormulationError> {
    let nodes = solution
        .nodes
        .iter()
        .map(|node| match node {
            DecodedNode::Branch { split, threshold } => TreeNode::Branch {
                split: split.clone(),
                threshold: *threshold,
            },
            DecodedNode::Leaf { coefficients } => TreeNode::Leaf {
                coefficients: coefficients.clone(),
            },
            DecodedNode::Inactive => TreeNode::Inactive,
        })
        .collect();
    SymbolicTree::new(solution.depth, kb.clone(), kf.clone(), nodes)
        .map_err(|e| FormulationError::Inconsistent(e.to_string()))
}

/// The objective terms of a decoded solution, recomputed from scratch: the
/// accuracy term by running tree inference over the training data.
pub fn objective_terms(
    solution: &TreeSolution,
    data: &Dataset,
    kb: &BasisSet,
    kf: &BasisSet,
) -> Result<ObjectiveBreakdown, FormulationError> {
    let tree = to_symbolic_tree(solution, kb, kf)?;
    let mut total = 0.0;
    for i in 0..data.len() {
        let pred = tree
            .predict(&data.row(i))
            .map_err(|e| FormulationError::Inconsistent(e.to_string()))?;
        total += (data.target(i) - pred).abs();
    }
    let l_c = solution.branch_nodes().count() as f64;
    let l_m = solution
        .leaf_nodes()
        .map(|(_, c)| c.iter().map(|v| v.abs()).sum::<f64>())
        .sum::<f64>();
    Ok(ObjectiveBreakdown {
        l_acc: total / data.len() as f64,
        l_c,
        l_m,
    })
}

/// All index subsets of `{0..n}` with 1..=cap elements, ordered by size then
/// lexicographically.
fn subsets_up_to(n: usize, cap: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for mask in 1u32..(1u32 << n) {
        let size = mask.count_ones() as usize;
        if size <= cap {
            out.push((0..n).filter(|k| mask >> k & 1 == 1).collect());
        }
    }
    out.sort_by_key(|s| (s.len(), s.clone()));
    out
}

/// Least-absolute-error fit of `targets[rows]` over the basis columns in
/// `subset`, via the standard positive/negative residual-split LP.
fn l1_subset_fit(
    rows: &[usize],
    phi: &[Vec<f64>],
    targets: &[f64],
    kf_len: usize,
    subset: &[usize],
    c_bounds: (f64, f64),
) -> Option<(Vec<f64>, f64)> {
    if rows.is_empty() {
        return Some((vec![0.0; kf_len], 0.0));
    }
    let mut model = MilpModel::new("leaf_fit");
    let mut cs = Vec::with_capacity(subset.len());
    for &k in subset {
        cs.push(
            model
                .add_variable(format!("c{k}"), c_bounds.0, c_bounds.1, VarKind::Continuous)
                .ok()?,
        );
    }
    let mut obj = Vec::new();
    for (r, &i) in rows.iter().enumerate() {
        let ep = model
            .add_variable(format!("ep{r}"), 0.0, f64::INFINITY, VarKind::Continuous)
            .ok()?;
        let en = model
            .add_variable(format!("en{r}"), 0.0, f64::INFINITY, VarKind::Continuous)
            .ok()?;
        let mut row = vec![(ep, 1.0), (en, -1.0)];
        for (j, &k) in subset.iter().enumerate() {
            if phi[i][k] != 0.0 {
                row.push((cs[j], phi[i][k]));
            }
        }
        model.add_constraint(row, Eq, targets[i]).ok()?;
        obj.push((ep, 1.0));
        obj.push((en, 1.0));
    }
    model.set_objective(obj);
    let sol = solver::solve_lp(&model, &SolverConfig::exact()).ok()?;
    if sol.status != SolveStatus::Optimal {
        return None;
    }
    let mut coeffs = vec![0.0; kf_len];
    for (j, &k) in subset.iter().enumerate() {
        coeffs[k] = sol.value(cs[j]);
    }
    Some((coeffs, sol.objective))
}

/// Best leaf fit over all subsets of at most `n_f` basis functions (or the
/// single full fit when uncapped). Ties go to the earliest subset in
/// (size, lexicographic) order.
fn best_leaf_fit(
    rows: &[usize],
    phi: &[Vec<f64>],
    targets: &[f64],
    kf_len: usize,
    n_f: Option<usize>,
    c_bounds: (f64, f64),
) -> Option<(Vec<usize>, Vec<f64>, f64)> {
    match n_f {
        None => {
            let all: Vec<usize> = (0..kf_len).collect();
            let (coeffs, err) = l1_subset_fit(rows, phi, targets, kf_len, &all, c_bounds)?;
            Some((all, coeffs, err))
        }
        Some(cap) => {
            let mut best: Option<(Vec<usize>, Vec<f64>, f64)> = None;
            for subset in subsets_up_to(kf_len, cap.min(kf_len)) {
                let Some((coeffs, err)) =
                    l1_subset_fit(rows, phi, targets, kf_len, &subset, c_bounds)
                else {
                    continue;
                };
                let better = best.as_ref().map_or(true, |(_, _, e)| err < e - 1e-12);
                if better {
                    best = Some((subset, coeffs, err));
                }
            }
            best
        }
    }
}

/// Maximum-margin separating condition `g(x) < b` / `g(x) >= b` over the
/// basis columns in `subset`, with coefficients in the unit box. Returns the
/// split, the threshold and the achieved margin (0 when not separable).
fn margin_split(
    left: &[usize],
    right: &[usize],
    phi_b: &[Vec<f64>],
    subset: &[usize],
) -> Option<(Vec<f64>, f64, f64)> {
    let b_cap = 1.0
        + left
            .iter()
            .chain(right)
            .map(|&i| subset.iter().map(|&k| phi_b[i][k].abs()).sum::<f64>())
            .fold(0.0f64, f64::max);
    let mut model = MilpModel::new("margin");
    let mut avars = Vec::with_capacity(subset.len());
    for &k in subset {
        avars.push(
            model
                .add_variable(format!("a{k}"), -1.0, 1.0, VarKind::Continuous)
                .ok()?,
        );
    }
    let b = model
        .add_variable("b", -b_cap, b_cap, VarKind::Continuous)
        .ok()?;
    let t = model
        .add_variable("t", 0.0, 4.0 * b_cap, VarKind::Continuous)
        .ok()?;
    for (&i, is_left) in left
        .iter()
        .map(|i| (i, true))
        .chain(right.iter().map(|i| (i, false)))
    {
        let mut row = Vec::with_capacity(subset.len() + 2);
        for (j, &k) in subset.iter().enumerate() {
            if phi_b[i][k] != 0.0 {
                row.push((avars[j], phi_b[i][k]));
            }
        }
        row.push((b, -1.0));
        if is_left {
            row.push((t, 1.0));
            model.add_constraint(row, Le, 0.0).ok()?;
        } else {
            row.push((t, -1.0));
            model.add_constraint(row, Ge, 0.0).ok()?;
        }
    }
    model.set_objective(vec![(t, -1.0)]);
    let sol = solver::solve_lp(&model, &SolverConfig::exact()).ok()?;
    if sol.status != SolveStatus::Optimal {
        return None;
    }
    let a: Vec<f64> = avars.iter().map(|&v| sol.value(v)).collect();
    Some((a, sol.value(b), sol.value(t)))
}

/// Largest factor by which a unit-box split can be scaled while staying
/// within the declared coefficient bounds.
fn split_scale_cap(a: &[f64], subset: &[usize], b: f64, hp: &HyperParams) -> f64 {
    let mut cap = f64::INFINITY;
    for (j, _) in subset.iter().enumerate() {
        let v = a[j];
        if v > 1e-12 {
            cap = cap.min(hp.a_bounds.1 / v);
        } else if v < -1e-12 {
            cap = cap.min(hp.a_bounds.0 / v);
        }
    }
    if b > 1e-12 {
        cap = cap.min(hp.b_bounds.1 / b);
    } else if b < -1e-12 {
        cap = cap.min(hp.b_bounds.0 / b);
    }
    if cap.is_infinite() {
        1.0
    } else {
        cap.max(0.0)
    }
}

/// Completes a per-point leaf assignment into a full integer fixing of the
/// model's binaries: topology flags, split feature selections proven
/// epsilon-separable by margin LPs, leaf feature selections, and the
/// assignment variables. Returns `None` when some branching node cannot
/// separate its sides within the declared bounds.
pub(crate) fn complete_routing(
    routing: &[usize],
    phi_b: &[Vec<f64>],
    phi_f: &[Vec<f64>],
    targets: &[f64],
    map: &VariableIndexMap,
    hp: &HyperParams,
) -> Option<Vec<(VarId, bool)>> {
    let topo = map.topology;
    let mut is_branch = vec![false; topo.n_nodes() + 1];
    for &leaf in routing {
        if leaf <= 1 || leaf > topo.n_nodes() {
            return None;
        }
        for (m, _) in topo.ancestors(leaf) {
            is_branch[m] = true;
        }
    }
    is_branch[1] = true;
    if routing.iter().any(|&leaf| is_branch[leaf]) {
        return None;
    }

    let mut fixings: Vec<(VarId, bool)> = Vec::new();
    for n in topo.internal_nodes() {
        if n != 1 {
            fixings.push((map.d(n), is_branch[n]));
        }
    }

    let nb_cap = hp
        .n_b
        .map(|v| v as usize)
        .unwrap_or(map.kb_len)
        .min(map.kb_len);
    let subsets = subsets_up_to(map.kb_len, nb_cap);
    for n in topo.internal_nodes() {
        if !is_branch[n] {
            for k in 0..map.kb_len {
                fixings.push((map.omega(n, k), false));
            }
            continue;
        }
        let mut left = Vec::new();
        let mut right = Vec::new();
        for (i, &leaf) in routing.iter().enumerate() {
            for &(m, went_left) in &topo.ancestors(leaf) {
                if m == n {
                    if went_left {
                        left.push(i);
                    } else {
                        right.push(i);
                    }
                }
            }
        }
        let mut best: Option<(f64, &Vec<usize>)> = None;
        for subset in &subsets {
            let Some((a, b, t)) = margin_split(&left, &right, phi_b, subset) else {
                continue;
            };
            let scaled = t * split_scale_cap(&a, subset, b, hp);
            if scaled < hp.epsilon * 1.0001 {
                continue;
            }
            if best.as_ref().map_or(true, |(s, _)| scaled > s + 1e-12) {
                best = Some((scaled, subset));
            }
        }
        let chosen = best?.1;
        for k in 0..map.kb_len {
            fixings.push((map.omega(n, k), chosen.contains(&k)));
        }
    }

    if map.has_w {
        let nf_cap = hp.n_f.unwrap() as usize;
        for n in topo.nodes() {
            if n == 1 {
                continue; // w at the root is bound-fixed to 0
            }
            let active = topo.ancestors(n).iter().all(|&(m, _)| is_branch[m]);
            let is_leaf = active && !is_branch[n];
            if !is_leaf {
                for k in 0..map.kf_len {
                    fixings.push((map.w(n, k).unwrap(), false));
                }
                continue;
            }
            let rows: Vec<usize> = routing
                .iter()
                .enumerate()
                .filter(|&(_, &l)| l == n)
                .map(|(i, _)| i)
                .collect();
            let (subset, _, _) =
                best_leaf_fit(&rows, phi_f, targets, map.kf_len, Some(nf_cap), hp.c_bounds)?;
            for k in 0..map.kf_len {
                fixings.push((map.w(n, k).unwrap(), subset.contains(&k)));
            }
        }
    }

    for (i, &leaf) in routing.iter().enumerate() {
        for n in topo.nodes() {
            fixings.push((map.z(i, n), n == leaf));
        }
    }
    Some(fixings)
}

/// Rounding heuristic for the branch-and-bound search: thresholds the
/// fractional split of the node relaxation to route every point, refines the
/// two-sided assignment by alternating leaf refits and reassignments, repairs
/// it to a geometrically consistent routing, and completes it into integer
/// fixings.
pub fn rounding_heuristic(
    map: &VariableIndexMap,
    phi_b: &[Vec<f64>],
    phi_f: &[Vec<f64>],
    targets: &[f64],
    hp: &HyperParams,
) -> RoundingHeuristic {
    let map = map.clone();
    let phi_b = phi_b.to_vec();
    let phi_f = phi_f.to_vec();
    let targets = targets.to_vec();
    let hp = hp.clone();
    Arc::new(move |input: &HeuristicInput<'_>| {
        propose_routing(input, &map, &phi_b, &phi_f, &targets, &hp).and_then(|routing| {
            complete_routing(&routing, &phi_b, &phi_f, &targets, &map, &hp)
        })
    })
}

fn propose_routing(
    input: &HeuristicInput<'_>,
    map: &VariableIndexMap,
    phi_b: &[Vec<f64>],
    phi_f: &[Vec<f64>],
    targets: &[f64],
    hp: &HyperParams,
) -> Option<Vec<usize>> {
    let topo = map.topology;
    let n_points = targets.len();
    let terminals: Vec<usize> = topo.terminals().collect();

    // Branching fixings from the node: a point may be pinned to a node, or
    // barred from one.
    let forced: Vec<Option<usize>> = (0..n_points)
        .map(|i| topo.nodes().find(|&n| input.lower[map.z(i, n).index()] > 0.5))
        .collect();
    let allowed = |i: usize, n: usize| input.upper[map.z(i, n).index()] > 0.5;

    // Initial routing: descend through the fractional splits.
    let mut routing: Vec<usize> = (0..n_points)
        .map(|i| {
            if let Some(f) = forced[i] {
                return f;
            }
            let mut n = 1usize;
            while !topo.is_terminal(n) {
                let g: f64 = (0..map.kb_len)
                    .map(|k| input.values[map.a(n, k).index()] * phi_b[i][k])
                    .sum();
                n = if g < input.values[map.b(n).index()] {
                    2 * n
                } else {
                    2 * n + 1
                };
            }
            n
        })
        .collect();

    let em_allowed = forced
        .iter()
        .all(|f| f.map_or(true, |n| topo.is_terminal(n)));
    if em_allowed {
        // Alternate leaf refits with pointwise reassignment to the
        // best-fitting leaf. Pinned points never move.
        for _ in 0..30 {
            let mut fits: Vec<Option<Vec<f64>>> = vec![None; topo.n_nodes() + 1];
            for &t in &terminals {
                let rows: Vec<usize> = routing
                    .iter()
                    .enumerate()
                    .filter(|&(_, &l)| l == t)
                    .map(|(i, _)| i)
                    .collect();
                let nf = hp.n_f.map(|v| v as usize);
                fits[t] = best_leaf_fit(&rows, phi_f, targets, map.kf_len, nf, hp.c_bounds)
                    .map(|(_, coeffs, _)| coeffs);
            }
            let mut changed = false;
            for i in 0..n_points {
                if forced[i].is_some() {
                    continue;
                }
                // Argmin of leaf fit error; ties keep the current leaf, then
                // the lowest node id.
                let mut best: Option<(f64, usize)> = None;
                for &t in &terminals {
                    if !allowed(i, t) {
                        continue;
                    }
                    let Some(coeffs) = &fits[t] else { continue };
                    let pred: f64 = coeffs
                        .iter()
                        .zip(&phi_f[i])
                        .map(|(c, p)| c * p)
                        .sum();
                    let err = (targets[i] - pred).abs();
                    let replace = match best {
                        None => true,
                        Some((be, bt)) => {
                            err < be - 1e-12
                                || ((err - be).abs() <= 1e-12
                                    && t == routing[i]
                                    && bt != routing[i])
                        }
                    };
                    if replace {
                        best = Some((err, t));
                    }
                }
                if let Some((_, t)) = best {
                    if t != routing[i] {
                        routing[i] = t;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }

        // Geometric repair: derive one split per internal node from the
        // labels, then re-route every free point through those splits so the
        // proposal is consistent with some tree.
        let nb_cap = hp
            .n_b
            .map(|v| v as usize)
            .unwrap_or(map.kb_len)
            .min(map.kb_len);
        let subsets = subsets_up_to(map.kb_len, nb_cap);
        let mut planes: Vec<Option<(Vec<usize>, Vec<f64>, f64)>> =
            vec![None; topo.first_terminal()];
        for n in topo.internal_nodes() {
            let mut left = Vec::new();
            let mut right = Vec::new();
            for (i, &leaf) in routing.iter().enumerate() {
                for &(m, went_left) in &topo.ancestors(leaf) {
                    if m == n {
                        if went_left {
                            left.push(i);
                        } else {
                            right.push(i);
                        }
                    }
                }
            }
            let mut best: Option<(f64, Vec<usize>, Vec<f64>, f64)> = None;
            for subset in &subsets {
                let Some((a, b, t)) = margin_split(&left, &right, phi_b, subset) else {
                    continue;
                };
                let scaled = t * split_scale_cap(&a, subset, b, hp);
                if best.as_ref().map_or(true, |(s, ..)| scaled > s + 1e-12) {
                    best = Some((scaled, subset.clone(), a, b));
                }
            }
            let (_, subset, a, b) = best?;
            planes[n] = Some((subset, a, b));
        }
        for i in 0..n_points {
            if forced[i].is_some() {
                continue;
            }
            let mut n = 1usize;
            while !topo.is_terminal(n) {
                let (subset, a, b) = planes[n].as_ref()?;
                let g: f64 = subset
                    .iter()
                    .zip(a)
                    .map(|(&k, ak)| ak * phi_b[i][k])
                    .sum();
                n = if g < *b { 2 * n } else { 2 * n + 1 };
            }
            if allowed(i, n) {
                routing[i] = n;
            }
        }
    }
    Some(routing)
}

/// Moves each branch threshold to the midpoint of the empty interval between
/// the two sides' nearest training points. Routing (and hence the objective)
/// is unchanged; the reported boundary becomes a canonical representative of
/// the solver's degenerate optimal face.
pub fn center_thresholds(
    solution: &mut TreeSolution,
    phi_b: &[Vec<f64>],
    hp: &HyperParams,
) {
    let topo = Topology {
        depth: solution.depth,
    };
    let routing = solution.routing.clone();
    for n in 1..solution.nodes.len() {
        let split = match &solution.nodes[n] {
            DecodedNode::Branch { split, .. } => split.clone(),
            _ => continue,
        };
        let mut max_left = f64::NEG_INFINITY;
        let mut min_right = f64::INFINITY;
        for (i, &leaf) in routing.iter().enumerate() {
            for &(m, went_left) in &topo.ancestors(leaf) {
                if m != n {
                    continue;
                }
                let g: f64 = split
                    .iter()
                    .zip(&phi_b[i])
                    .map(|(a, p)| a * p)
                    .sum();
                if went_left {
                    max_left = max_left.max(g);
                } else {
                    min_right = min_right.min(g);
                }
            }
        }
        if max_left.is_finite() && min_right.is_finite() && max_left < min_right {
            let mid = (0.5 * max_left + 0.5 * min_right)
                .clamp(hp.b_bounds.0, hp.b_bounds.1);
            if mid > max_left && mid <= min_right {
                if let DecodedNode::Branch { threshold, .. } = &mut solution.nodes[n] {
                    *threshold = mid;
                }
            }
        }
    }
}
