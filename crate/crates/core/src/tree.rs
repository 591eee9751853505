//! The learned symbolic decision tree as a standalone predictive object:
//! inference, pretty-printing, and (de)serialization, independent of any
//! solver.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{print_combination, BasisRole, BasisSet, Binding, EvalError};

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("malformed tree: {0}")]
    Malformed(String),
    #[error("schema violation at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("document is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Basis(String),
}

/// Node roles: a branching test, a leaf expression, or unused.
#[derive(Clone, Debug, PartialEq)]
pub enum TreeNode {
    Branch { split: Vec<f64>, threshold: f64 },
    Leaf { coefficients: Vec<f64> },
    Inactive,
}

/// Decision tree with basis-function splits (`g(x) < b` goes left,
/// `g(x) >= b` goes right) and linear-combination leaves.
#[derive(Clone, Debug)]
pub struct SymbolicTree {
    depth: u32,
    basis_branch: BasisSet,
    basis_leaf: BasisSet,
    /// Indexed by node id 1..=N; index 0 is unused.
    nodes: Vec<TreeNode>,
}

impl SymbolicTree {
    pub fn new(
        depth: u32,
        basis_branch: BasisSet,
        basis_leaf: BasisSet,
        mut nodes: Vec<TreeNode>,
    ) -> Result<Self, TreeError> {
        let n_nodes = (1usize << (depth + 1)) - 1;
        if nodes.len() == n_nodes {
            nodes.insert(0, TreeNode::Inactive);
        }
        if nodes.len() != n_nodes + 1 {
            return Err(TreeError::Malformed(format!(
                "expected {n_nodes} nodes for depth {depth}, got {}",
                nodes.len().saturating_sub(1)
            )));
        }
        let tree = SymbolicTree {
            depth,
            basis_branch,
            basis_leaf,
            nodes,
        };
        tree.validate()?;
        Ok(tree)
    }

    fn validate(&self) -> Result<(), TreeError> {
        if !matches!(self.nodes[1], TreeNode::Branch { .. }) {
            return Err(TreeError::Malformed("root must be a branch".into()));
        }
        let n_nodes = self.nodes.len() - 1;
        let mut leaves = 0;
        for n in 1..=n_nodes {
            match &self.nodes[n] {
                TreeNode::Branch { split, .. } => {
                    if split.len() != self.basis_branch.len() {
                        return Err(TreeError::Malformed(format!(
                            "node {n}: split has {} coefficients, expected {}",
                            split.len(),
                            self.basis_branch.len()
                        )));
                    }
                    if 2 * n > n_nodes {
                        return Err(TreeError::Malformed(format!(
                            "terminal node {n} cannot branch"
                        )));
                    }
                    for child in [2 * n, 2 * n + 1] {
                        if matches!(self.nodes[child], TreeNode::Inactive) {
                            return Err(TreeError::Malformed(format!(
                                "branch node {n} has inactive child {child}"
                            )));
                        }
                    }
                }
                TreeNode::Leaf { coefficients } => {
                    leaves += 1;
                    if coefficients.len() != self.basis_leaf.len() {
                        return Err(TreeError::Malformed(format!(
                            "node {n}: leaf has {} coefficients, expected {}",
                            coefficients.len(),
                            self.basis_leaf.len()
                        )));
                    }
                    for child in [2 * n, 2 * n + 1] {
                        if child <= n_nodes && !matches!(self.nodes[child], TreeNode::Inactive) {
                            return Err(TreeError::Malformed(format!(
                                "leaf node {n} has active child {child}"
                            )));
                        }
                    }
                }
                TreeNode::Inactive => {
                    for child in [2 * n, 2 * n + 1] {
                        if child <= n_nodes && !matches!(self.nodes[child], TreeNode::Inactive) {
                            return Err(TreeError::Malformed(format!(
                                "inactive node {n} has active child {child}"
                            )));
                        }
                    }
                }
            }
        }
        if leaves == 0 {
            return Err(TreeError::Malformed("tree has no leaves".into()));
        }
        Ok(())
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn basis_branch(&self) -> &BasisSet {
        &self.basis_branch
    }

    pub fn basis_leaf(&self) -> &BasisSet {
        &self.basis_leaf
    }

    pub fn node(&self, n: usize) -> &TreeNode {
        &self.nodes[n]
    }

    pub fn leaf_ids(&self) -> Vec<usize> {
        (1..self.nodes.len())
            .filter(|&n| matches!(self.nodes[n], TreeNode::Leaf { .. }))
            .collect()
    }

    /// The node reached by descending the splits for this row.
    pub fn predict_leaf<B: Binding + ?Sized>(&self, row: &B) -> Result<usize, TreeError> {
        let mut n = 1usize;
        loop {
            match &self.nodes[n] {
                TreeNode::Branch { split, threshold } => {
                    let mut g = 0.0;
                    for (a, e) in split.iter().zip(self.basis_branch.exprs()) {
                        if *a != 0.0 {
                            g += a * e.eval(row)?;
                        }
                    }
                    n = if g < *threshold { 2 * n } else { 2 * n + 1 };
                }
                TreeNode::Leaf { .. } => return Ok(n),
                TreeNode::Inactive => {
                    return Err(TreeError::Malformed(format!(
                        "descent reached inactive node {n}"
                    )));
                }
            }
        }
    }

    /// Evaluates the leaf expression reached by this row.
    pub fn predict<B: Binding + ?Sized>(&self, row: &B) -> Result<f64, TreeError> {
        let leaf = self.predict_leaf(row)?;
        let TreeNode::Leaf { coefficients } = &self.nodes[leaf] else {
            unreachable!();
        };
        let mut out = 0.0;
        for (c, e) in coefficients.iter().zip(self.basis_leaf.exprs()) {
            if *c != 0.0 {
                out += c * e.eval(row)?;
            }
        }
        Ok(out)
    }

    /// Renders the piecewise equation, one line per leaf with its full path
    /// condition.
    pub fn to_text(&self) -> String {
        let mut lines = Vec::new();
        for leaf in self.leaf_ids() {
            let TreeNode::Leaf { coefficients } = &self.nodes[leaf] else {
                continue;
            };
            let expr = print_combination(coefficients, &self.basis_leaf, 1e-9)
                .unwrap_or_else(|_| "?".into());
            let mut conds = Vec::new();
            let mut cur = leaf;
            while cur > 1 {
                let parent = cur / 2;
                if let TreeNode::Branch { split, threshold } = &self.nodes[parent] {
                    let g = print_combination(split, &self.basis_branch, 1e-9)
                        .unwrap_or_else(|_| "?".into());
                    let op = if cur == 2 * parent { "<" } else { ">=" };
                    conds.push(format!(
                        "{} {} {}",
                        g,
                        op,
                        crate::expr::format_sig(*threshold, 4)
                    ));
                }
                cur = parent;
            }
            conds.reverse();
            lines.push(format!("{} if {}", expr, conds.join(" and ")));
        }
        lines.join("\n")
    }
}

#[derive(Serialize, Deserialize)]
struct TreeDocument {
    depth: u32,
    variables: Vec<String>,
    basis_branch: Vec<String>,
    basis_leaf: Vec<String>,
    nodes: Vec<NodeDocument>,
}

#[derive(Serialize, Deserialize)]
struct NodeDocument {
    id: usize,
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    a: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c: Option<Vec<f64>>,
}

/// Serializes the tree as a JSON document. Basis functions are stored as
/// expression text and re-parsed on load; coefficients round-trip exactly.
pub fn serialize(tree: &SymbolicTree) -> String {
    let nodes = (1..tree.nodes.len())
        .map(|n| match &tree.nodes[n] {
            TreeNode::Branch { split, threshold } => NodeDocument {
                id: n,
                kind: "branch".into(),
                a: Some(split.clone()),
                b: Some(*threshold),
                c: None,
            },
            TreeNode::Leaf { coefficients } => NodeDocument {
                id: n,
                kind: "leaf".into(),
                a: None,
                b: None,
                c: Some(coefficients.clone()),
            },
            TreeNode::Inactive => NodeDocument {
                id: n,
                kind: "inactive".into(),
                a: None,
                b: None,
                c: None,
            },
        })
        .collect();
    let doc = TreeDocument {
        depth: tree.depth,
        variables: tree.basis_branch.variables().to_vec(),
        basis_branch: tree.basis_branch.texts().to_vec(),
        basis_leaf: tree.basis_leaf.texts().to_vec(),
        nodes,
    };
    serde_json::to_string_pretty(&doc).expect("tree document serializes")
}

/// Parses and validates a tree document.
pub fn deserialize(text: &str) -> Result<SymbolicTree, TreeError> {
    let doc: TreeDocument = serde_json::from_str(text)?;
    let basis_branch = BasisSet::parse(&doc.basis_branch, &doc.variables, BasisRole::Branching)
        .map_err(|e| TreeError::Schema {
            path: "basis_branch".into(),
            message: e.to_string(),
        })?;
    let basis_leaf = BasisSet::parse(&doc.basis_leaf, &doc.variables, BasisRole::Leaf)
        .map_err(|e| TreeError::Schema {
            path: "basis_leaf".into(),
            message: e.to_string(),
        })?;
    let n_nodes = (1usize << (doc.depth + 1)) - 1;
    if doc.nodes.len() != n_nodes {
        return Err(TreeError::Schema {
            path: "nodes".into(),
            message: format!("expected {n_nodes} nodes for depth {}", doc.depth),
        });
    }
    let mut nodes = vec![TreeNode::Inactive; n_nodes];
    for (idx, node) in doc.nodes.iter().enumerate() {
        let path = format!("nodes[{idx}]");
        if node.id != idx + 1 {
            return Err(TreeError::Schema {
                path: format!("{path}.id"),
                message: format!("expected id {} in order, got {}", idx + 1, node.id),
            });
        }
        nodes[idx] = match node.kind.as_str() {
            "branch" => TreeNode::Branch {
                split: node.a.clone().ok_or_else(|| TreeError::Schema {
                    path: format!("{path}.a"),
                    message: "branch node requires split coefficients".into(),
                })?,
                threshold: node.b.ok_or_else(|| TreeError::Schema {
                    path: format!("{path}.b"),
                    message: "branch node requires a threshold".into(),
                })?,
            },
            "leaf" => TreeNode::Leaf {
                coefficients: node.c.clone().ok_or_else(|| TreeError::Schema {
                    path: format!("{path}.c"),
                    message: "leaf node requires coefficients".into(),
                })?,
            },
            "inactive" => TreeNode::Inactive,
            other => {
                return Err(TreeError::Schema {
                    path: format!("{path}.kind"),
                    message: format!("unknown kind `{other}`"),
                });
            }
        };
    }
    SymbolicTree::new(doc.depth, basis_branch, basis_leaf, nodes).map_err(|e| match e {
        TreeError::Malformed(message) => TreeError::Schema {
            path: "nodes".into(),
            message,
        },
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn case1_like_tree() -> SymbolicTree {
        let vars: Vec<String> = vec!["x1".into(), "x2".into()];
        let kb = BasisSet::parse(
            &["x1", "x2", "x1^2", "x2^2", "x1*x2"],
            &vars,
            BasisRole::Branching,
        )
        .unwrap();
        let kf = BasisSet::parse(
            &["1", "x1", "x2", "x1^2", "x2^2", "x1*x2"],
            &vars,
            BasisRole::Leaf,
        )
        .unwrap();
        SymbolicTree::new(
            1,
            kb,
            kf,
            vec![
                TreeNode::Branch {
                    split: vec![0.0, 0.0, 1.01, 1.0, 0.0],
                    threshold: 2.54,
                },
                TreeNode::Leaf {
                    coefficients: vec![0.0, 0.0, 0.0, 1.0, 1.0, 0.0],
                },
                TreeNode::Leaf {
                    coefficients: vec![0.0, 0.0, 1.0, 1.0, 0.0, 0.0],
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn predicts_by_regime() {
        let tree = case1_like_tree();
        let origin = [("x1", 0.0), ("x2", 0.0)];
        assert_eq!(tree.predict_leaf(&origin[..]).unwrap(), 2);
        assert_eq!(tree.predict(&origin[..]).unwrap(), 0.0);

        let outside = [("x1", 2.0), ("x2", 2.0)];
        assert_eq!(tree.predict_leaf(&outside[..]).unwrap(), 3);
        assert_eq!(tree.predict(&outside[..]).unwrap(), 6.0);
    }

    #[test]
    fn boundary_routes_right() {
        let vars: Vec<String> = vec!["x".into()];
        let kb = BasisSet::parse(&["x"], &vars, BasisRole::Branching).unwrap();
        let kf = BasisSet::parse(&["1"], &vars, BasisRole::Leaf).unwrap();
        let tree = SymbolicTree::new(
            1,
            kb,
            kf,
            vec![
                TreeNode::Branch {
                    split: vec![1.0],
                    threshold: 2.0,
                },
                TreeNode::Leaf {
                    coefficients: vec![-1.0],
                },
                TreeNode::Leaf {
                    coefficients: vec![1.0],
                },
            ],
        )
        .unwrap();
        assert_eq!(tree.predict_leaf(&[("x", 2.0)][..]).unwrap(), 3);
        assert_eq!(tree.predict_leaf(&[("x", 1.9999)][..]).unwrap(), 2);
    }

    #[test]
    fn identical_leaves_make_split_irrelevant() {
        let vars: Vec<String> = vec!["x".into()];
        let kb = BasisSet::parse(&["x"], &vars, BasisRole::Branching).unwrap();
        let kf = BasisSet::parse(&["1", "x"], &vars, BasisRole::Leaf).unwrap();
        let tree = SymbolicTree::new(
            1,
            kb,
            kf,
            vec![
                TreeNode::Branch {
                    split: vec![1.0],
                    threshold: 0.0,
                },
                TreeNode::Leaf {
                    coefficients: vec![2.0, 3.0],
                },
                TreeNode::Leaf {
                    coefficients: vec![2.0, 3.0],
                },
            ],
        )
        .unwrap();
        for x in [-2.0, -0.5, 0.0, 1.0, 7.5] {
            let v = tree.predict(&[("x", x)][..]).unwrap();
            assert!((v - (2.0 + 3.0 * x)).abs() < 1e-12);
        }
    }

    #[test]
    fn to_text_matches_reporting_style() {
        let vars: Vec<String> = vec!["M".into()];
        let kb = BasisSet::parse(&["log10(M)", "M"], &vars, BasisRole::Branching).unwrap();
        let kf = BasisSet::parse(&["1", "log10(M)", "M"], &vars, BasisRole::Leaf).unwrap();
        let tree = SymbolicTree::new(
            1,
            kb,
            kf,
            vec![
                TreeNode::Branch {
                    split: vec![1.0, 0.0],
                    threshold: 4.24,
                },
                TreeNode::Leaf {
                    coefficients: vec![-0.49, 1.0, 0.0],
                },
                TreeNode::Leaf {
                    coefficients: vec![-11.28, 3.4, 0.0],
                },
            ],
        )
        .unwrap();
        let text = tree.to_text();
        assert!(
            text.contains("3.4*log10(M) - 11.28 if log10(M) >= 4.24"),
            "unexpected rendering:\n{text}"
        );
    }

    #[test]
    fn serde_round_trip_is_exact() {
        let tree = case1_like_tree();
        let doc = serialize(&tree);
        let back = deserialize(&doc).unwrap();
        for n in 1..=3 {
            assert_eq!(tree.node(n), back.node(n));
        }
        let doc2 = serialize(&back);
        assert_eq!(doc, doc2);
    }

    #[test]
    fn deserialize_rejects_leaf_root() {
        let tree = case1_like_tree();
        let doc = serialize(&tree).replace("\"kind\": \"branch\"", "\"kind\": \"leaf\"");
        // The mutated root is missing `c`, or fails validation if present.
        let err = deserialize(&doc).unwrap_err();
        match err {
            TreeError::Schema { .. } => {}
            other => panic!("expected schema error, got {other:?}"),
        }
    }
}
