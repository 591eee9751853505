//! In-memory representation of a mixed-integer linear program with bounded
//! variables, plus free-MPS export.

mod mps;

pub use mps::write_mps;

use std::collections::HashSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("variable `{name}`: lower bound {lb} exceeds upper bound {ub}")]
    InvertedBounds { name: String, lb: f64, ub: f64 },
    #[error("variable name must be nonempty")]
    EmptyName,
    #[error("variable name `{0}` collides with an existing name after MPS sanitization")]
    DuplicateName(String),
    #[error("binary variable `{name}` must have integral bounds within [0, 1], got [{lb}, {ub}]")]
    BadBinaryBounds { name: String, lb: f64, ub: f64 },
    #[error("invalid variable handle {0:?}")]
    InvalidHandle(VarId),
    #[error("non-finite coefficient {value} on variable {var:?}")]
    NonFiniteCoefficient { var: VarId, value: f64 },
    #[error("duplicate variable {0:?} in constraint")]
    DuplicateVariable(VarId),
    #[error("non-finite right-hand side {0}")]
    NonFiniteRhs(f64),
    #[error("model has no variables")]
    EmptyModel,
}

/// Dense handle to a model variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub(crate) usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Dense handle to a model constraint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConstraintId(pub(crate) usize);

impl ConstraintId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintSense {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
pub struct Variable {
    pub name: String,
    pub lb: f64,
    pub ub: f64,
    pub kind: VarKind,
    /// Branching priority for the structural-priority rule; higher first.
    pub branch_priority: i32,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub coeffs: Vec<(VarId, f64)>,
    pub sense: ConstraintSense,
    pub rhs: f64,
}

/// Solution status as reported by the solvers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    FeasibleWithGap,
    Infeasible,
    Unbounded,
    LimitReached,
}

/// A (candidate) solution: variable values plus objective and status.
#[derive(Clone, Debug)]
pub struct Assignment {
    pub values: Vec<f64>,
    pub objective: f64,
    pub status: SolveStatus,
}

impl Assignment {
    pub fn value(&self, var: VarId) -> f64 {
        self.values[var.0]
    }

    pub fn has_solution(&self) -> bool {
        matches!(
            self.status,
            SolveStatus::Optimal | SolveStatus::FeasibleWithGap
        ) || (self.status == SolveStatus::LimitReached && !self.values.is_empty())
    }
}

/// One violated row or bound found by [`MilpModel::check_assignment`].
#[derive(Clone, Debug)]
pub struct FeasibilityViolation {
    pub description: String,
    pub amount: f64,
}

/// Minimization MILP: bounded variables, sparse linear rows, sparse linear
/// objective.
#[derive(Clone, Debug, Default)]
pub struct MilpModel {
    pub name: String,
    vars: Vec<Variable>,
    constraints: Vec<Constraint>,
    objective: Vec<(VarId, f64)>,
    sanitized_names: HashSet<String>,
}

impl MilpModel {
    pub fn new(name: impl Into<String>) -> Self {
        MilpModel {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn add_variable(
        &mut self,
        name: impl Into<String>,
        lb: f64,
        ub: f64,
        kind: VarKind,
    ) -> Result<VarId, ModelError> {
        let name = name.into();
        if name.is_empty() {
            return Err(ModelError::EmptyName);
        }
        if lb > ub {
            return Err(ModelError::InvertedBounds { name, lb, ub });
        }
        if kind == VarKind::Binary {
            let integral = |v: f64| v == 0.0 || v == 1.0;
            if !(0.0..=1.0).contains(&lb) || !(0.0..=1.0).contains(&ub) || !integral(lb) || !integral(ub)
            {
                return Err(ModelError::BadBinaryBounds { name, lb, ub });
            }
        }
        let sanitized = mps::sanitize_name(&name);
        if !self.sanitized_names.insert(sanitized) {
            return Err(ModelError::DuplicateName(name));
        }
        self.vars.push(Variable {
            name,
            lb,
            ub,
            kind,
            branch_priority: 0,
        });
        Ok(VarId(self.vars.len() - 1))
    }

    pub fn add_constraint(
        &mut self,
        coeffs: Vec<(VarId, f64)>,
        sense: ConstraintSense,
        rhs: f64,
    ) -> Result<ConstraintId, ModelError> {
        if !rhs.is_finite() {
            return Err(ModelError::NonFiniteRhs(rhs));
        }
        let mut seen = HashSet::with_capacity(coeffs.len());
        for &(var, value) in &coeffs {
            if var.0 >= self.vars.len() {
                return Err(ModelError::InvalidHandle(var));
            }
            if !value.is_finite() {
                return Err(ModelError::NonFiniteCoefficient { var, value });
            }
            if !seen.insert(var) {
                return Err(ModelError::DuplicateVariable(var));
            }
        }
        self.constraints.push(Constraint { coeffs, sense, rhs });
        Ok(ConstraintId(self.constraints.len() - 1))
    }

    /// Replaces the (minimization) objective.
    pub fn set_objective(&mut self, coeffs: Vec<(VarId, f64)>) {
        self.objective = coeffs;
    }

    pub fn set_branch_priority(&mut self, var: VarId, priority: i32) {
        self.vars[var.0].branch_priority = priority;
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn num_binaries(&self) -> usize {
        self.vars.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.vars[id.0]
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn constraint(&self, id: ConstraintId) -> &Constraint {
        &self.constraints[id.0]
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &[(VarId, f64)] {
        &self.objective
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective
            .iter()
            .map(|&(var, c)| c * values[var.0])
            .sum()
    }

    /// Binary variables whose bounds leave both 0 and 1 available.
    pub fn free_binaries(&self) -> Vec<VarId> {
        self.vars
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary && v.lb != v.ub)
            .map(|(i, _)| VarId(i))
            .collect()
    }

    /// Independent re-evaluation of all rows, bounds and integrality.
    pub fn check_assignment(&self, values: &[f64], tol: f64) -> Result<(), FeasibilityViolation> {
        if values.len() != self.vars.len() {
            return Err(FeasibilityViolation {
                description: format!(
                    "assignment has {} values for {} variables",
                    values.len(),
                    self.vars.len()
                ),
                amount: f64::INFINITY,
            });
        }
        for (i, v) in self.vars.iter().enumerate() {
            let x = values[i];
            let scale = 1.0 + x.abs();
            if x < v.lb - tol * scale || x > v.ub + tol * scale {
                return Err(FeasibilityViolation {
                    description: format!(
                        "variable `{}` = {} outside bounds [{}, {}]",
                        v.name, x, v.lb, v.ub
                    ),
                    amount: (v.lb - x).max(x - v.ub),
                });
            }
            if v.kind == VarKind::Binary {
                let frac = (x - x.round()).abs();
                if frac > 1e-6 {
                    return Err(FeasibilityViolation {
                        description: format!("binary `{}` = {} not integral", v.name, x),
                        amount: frac,
                    });
                }
            }
        }
        for (ci, con) in self.constraints.iter().enumerate() {
            let mut activity = 0.0;
            let mut scale = 1.0 + con.rhs.abs();
            for &(var, c) in &con.coeffs {
                let term = c * values[var.0];
                activity += term;
                scale = scale.max(term.abs());
            }
            let violation = match con.sense {
                ConstraintSense::Le => activity - con.rhs,
                ConstraintSense::Ge => con.rhs - activity,
                ConstraintSense::Eq => (activity - con.rhs).abs(),
            };
            if violation > tol * scale {
                return Err(FeasibilityViolation {
                    description: format!(
                        "constraint {} violated: activity {} vs rhs {} ({:?})",
                        ci, activity, con.rhs, con.sense
                    ),
                    amount: violation,
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_variable_examples() {
        let mut m = MilpModel::new("t");
        let d1 = m.add_variable("d_1", 1.0, 1.0, VarKind::Binary).unwrap();
        assert_eq!(d1, VarId(0));
        let y = m
            .add_variable("y_pred_5", -1000.0, 1000.0, VarKind::Continuous)
            .unwrap();
        assert_eq!(y.index(), 1);
        let z = m.add_variable("z_3_2", 0.0, 1.0, VarKind::Binary).unwrap();
        assert_eq!(z.index(), 2);
        assert_eq!(m.num_binaries(), 2);
    }

    #[test]
    fn inverted_bounds_rejected() {
        let mut m = MilpModel::new("t");
        assert!(matches!(
            m.add_variable("x", 2.0, 1.0, VarKind::Continuous),
            Err(ModelError::InvertedBounds { .. })
        ));
    }

    #[test]
    fn duplicate_sanitized_names_rejected() {
        let mut m = MilpModel::new("t");
        m.add_variable("a.b", 0.0, 1.0, VarKind::Continuous).unwrap();
        assert!(matches!(
            m.add_variable("a:b", 0.0, 1.0, VarKind::Continuous),
            Err(ModelError::DuplicateName(_))
        ));
    }

    #[test]
    fn constraint_examples() {
        let mut m = MilpModel::new("t");
        let d1 = m.add_variable("d_1", 1.0, 1.0, VarKind::Binary).unwrap();
        let d2 = m.add_variable("d_2", 0.0, 1.0, VarKind::Binary).unwrap();
        m.add_constraint(vec![(d2, 1.0), (d1, -1.0)], ConstraintSense::Le, 0.0)
            .unwrap();
        m.add_constraint(vec![(d1, 1.0), (d2, 1.0)], ConstraintSense::Eq, 1.0)
            .unwrap();
        // Vacuous empty row is stored verbatim.
        m.add_constraint(vec![], ConstraintSense::Le, 1.0).unwrap();
        assert_eq!(m.num_constraints(), 3);
        assert!(m.check_assignment(&[1.0, 0.0], 1e-7).is_ok());
        assert!(m.check_assignment(&[1.0, 1.0], 1e-7).is_err());
    }

    #[test]
    fn bad_rows_rejected() {
        let mut m = MilpModel::new("t");
        let x = m.add_variable("x", 0.0, 1.0, VarKind::Continuous).unwrap();
        assert!(matches!(
            m.add_constraint(vec![(VarId(9), 1.0)], ConstraintSense::Le, 0.0),
            Err(ModelError::InvalidHandle(_))
        ));
        assert!(matches!(
            m.add_constraint(vec![(x, f64::NAN)], ConstraintSense::Le, 0.0),
            Err(ModelError::NonFiniteCoefficient { .. })
        ));
        assert!(matches!(
            m.add_constraint(vec![(x, 1.0), (x, 2.0)], ConstraintSense::Le, 0.0),
            Err(ModelError::DuplicateVariable(_))
        ));
    }
}
