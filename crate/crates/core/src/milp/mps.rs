//! Free-format MPS export.
//!
//! Deterministic: variables and rows are emitted in handle order, so
//! identical models yield byte-identical text. Integer variables are wrapped
//! in `INTORG`/`INTEND` marker pairs; the objective row is named `OBJ`.

use std::fmt::Write as _;

use super::{MilpModel, ModelError, VarKind};

/// MPS names allow `[A-Za-z0-9_]`, at most 64 characters.
pub(crate) fn sanitize_name(name: &str) -> String {
    let mut out: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect();
    out.truncate(64);
    out
}

fn number(v: f64) -> String {
    format!("{}", v)
}

/// Serializes the model as free-format MPS text.
pub fn write_mps(model: &MilpModel) -> Result<String, ModelError> {
    if model.num_vars() == 0 {
        return Err(ModelError::EmptyModel);
    }
    let mut out = String::new();
    let model_name = if model.name.is_empty() {
        "MODEL".to_string()
    } else {
        sanitize_name(&model.name)
    };
    let _ = writeln!(out, "NAME {}", model_name);

    let _ = writeln!(out, "ROWS");
    let _ = writeln!(out, " N OBJ");
    for (i, con) in model.constraints().iter().enumerate() {
        let tag = match con.sense {
            super::ConstraintSense::Le => 'L',
            super::ConstraintSense::Ge => 'G',
            super::ConstraintSense::Eq => 'E',
        };
        let _ = writeln!(out, " {} R{}", tag, i);
    }

    // Column-major view of the rows plus the objective.
    let mut columns: Vec<Vec<(String, f64)>> = vec![Vec::new(); model.num_vars()];
    for &(var, c) in model.objective() {
        columns[var.index()].push(("OBJ".to_string(), c));
    }
    for (i, con) in model.constraints().iter().enumerate() {
        for &(var, c) in &con.coeffs {
            columns[var.index()].push((format!("R{}", i), c));
        }
    }

    let _ = writeln!(out, "COLUMNS");
    let mut in_integer_block = false;
    let mut marker_count = 0usize;
    for (j, var) in model.vars().iter().enumerate() {
        let is_integer = var.kind == VarKind::Binary;
        if is_integer != in_integer_block {
            let kind = if is_integer { "'INTORG'" } else { "'INTEND'" };
            let _ = writeln!(out, "    MARKER{} 'MARKER' {}", marker_count, kind);
            marker_count += 1;
            in_integer_block = is_integer;
        }
        let name = sanitize_name(&var.name);
        if columns[j].is_empty() {
            // A column must appear at least once to be declared.
            let _ = writeln!(out, "    {} OBJ 0", name);
        } else {
            for (row, c) in &columns[j] {
                let _ = writeln!(out, "    {} {} {}", name, row, number(*c));
            }
        }
    }
    if in_integer_block {
        let _ = writeln!(out, "    MARKER{} 'MARKER' 'INTEND'", marker_count);
    }

    let _ = writeln!(out, "RHS");
    for (i, con) in model.constraints().iter().enumerate() {
        if con.rhs != 0.0 {
            let _ = writeln!(out, "    RHS R{} {}", i, number(con.rhs));
        }
    }

    let _ = writeln!(out, "BOUNDS");
    for var in model.vars() {
        let name = sanitize_name(&var.name);
        if var.kind == VarKind::Binary {
            if var.lb == var.ub {
                let _ = writeln!(out, " FX BND {} {}", name, number(var.lb));
            } else {
                let _ = writeln!(out, " BV BND {}", name);
            }
            continue;
        }
        let lb_finite = var.lb.is_finite();
        let ub_finite = var.ub.is_finite();
        match (lb_finite, ub_finite) {
            (true, true) if var.lb == var.ub => {
                let _ = writeln!(out, " FX BND {} {}", name, number(var.lb));
            }
            (true, true) => {
                let _ = writeln!(out, " LO BND {} {}", name, number(var.lb));
                let _ = writeln!(out, " UP BND {} {}", name, number(var.ub));
            }
            (true, false) => {
                let _ = writeln!(out, " LO BND {} {}", name, number(var.lb));
            }
            (false, true) => {
                let _ = writeln!(out, " MI BND {}", name);
                let _ = writeln!(out, " UP BND {} {}", name, number(var.ub));
            }
            (false, false) => {
                let _ = writeln!(out, " FR BND {}", name);
            }
        }
    }
    let _ = writeln!(out, "ENDATA");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{ConstraintSense, MilpModel, VarKind};

    #[test]
    fn skeleton_for_single_binary() {
        let mut m = MilpModel::new("mini");
        let x = m.add_variable("x", 0.0, 1.0, VarKind::Binary).unwrap();
        m.add_constraint(vec![(x, 1.0)], ConstraintSense::Ge, 0.0)
            .unwrap();
        m.set_objective(vec![(x, 1.0)]);
        let text = write_mps(&m).unwrap();
        assert!(text.contains("'MARKER' 'INTORG'"));
        assert!(text.contains(" BV BND x"));
        assert!(text.contains("ENDATA"));
    }

    #[test]
    fn free_variable_bound_line() {
        let mut m = MilpModel::new("free");
        let x = m
            .add_variable("x", f64::NEG_INFINITY, f64::INFINITY, VarKind::Continuous)
            .unwrap();
        m.set_objective(vec![(x, 1.0)]);
        m.add_constraint(vec![(x, 1.0)], ConstraintSense::Ge, -5.0)
            .unwrap();
        let text = write_mps(&m).unwrap();
        assert!(text.contains(" FR BND x"));
    }

    #[test]
    fn export_is_deterministic() {
        let build = || {
            let mut m = MilpModel::new("det");
            let a = m.add_variable("a", 0.0, 1.0, VarKind::Binary).unwrap();
            let b = m
                .add_variable("b", -2.5, f64::INFINITY, VarKind::Continuous)
                .unwrap();
            m.add_constraint(vec![(a, 2.0), (b, -1.0)], ConstraintSense::Le, 3.0)
                .unwrap();
            m.set_objective(vec![(a, -3.0), (b, 1.0)]);
            write_mps(&m).unwrap()
        };
        assert_eq!(build(), build());
    }

    #[test]
    fn empty_model_rejected() {
        let m = MilpModel::new("empty");
        assert!(matches!(write_mps(&m), Err(ModelError::EmptyModel)));
    }
}
