//! Randomized cross-checks of the LP and MILP solvers against independent
//! oracles: exhaustive vertex enumeration for LPs, brute-force binary
//! enumeration for MILPs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use symtree::milp::{ConstraintSense, MilpModel, SolveStatus, VarKind};
use symtree::solver::{brute_force, solve_lp, solve_milp, SolverConfig};

fn random_model(seed: u64, n_bin: usize, n_cont: usize, n_rows: usize) -> MilpModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = MilpModel::new(format!("rand{seed}"));
    let mut vars = Vec::new();
    let mut anchor = Vec::new();
    for i in 0..n_bin {
        vars.push(
            m.add_variable(format!("b{i}"), 0.0, 1.0, VarKind::Binary)
                .unwrap(),
        );
        anchor.push(rng.gen_range(0..=1) as f64);
    }
    for i in 0..n_cont {
        let lb = -(rng.gen_range(0..=10) as f64) / 2.0;
        let ub = (rng.gen_range(0..=10) as f64) / 2.0;
        vars.push(
            m.add_variable(format!("x{i}"), lb, ub, VarKind::Continuous)
                .unwrap(),
        );
        anchor.push(lb + (ub - lb) * rng.gen_range(0..=4) as f64 / 4.0);
    }
    for _ in 0..n_rows {
        let nnz = rng.gen_range(1..=vars.len().min(6));
        let mut picked: Vec<usize> = (0..vars.len()).collect();
        for k in 0..nnz {
            let j = rng.gen_range(k..picked.len());
            picked.swap(k, j);
        }
        let coeffs: Vec<_> = picked[..nnz]
            .iter()
            .map(|&j| (j, (rng.gen_range(-10..=10) as f64) / 2.0))
            .filter(|&(_, c)| c != 0.0)
            .collect();
        if coeffs.is_empty() {
            continue;
        }
        let sense = match rng.gen_range(0..8) {
            0 => ConstraintSense::Eq,
            1 | 2 => ConstraintSense::Ge,
            _ => ConstraintSense::Le,
        };
        // Most rows are anchored to a known-feasible point so that a healthy
        // fraction of instances is feasible; the rest are fully random.
        let activity: f64 = coeffs.iter().map(|&(j, c)| c * anchor[j]).sum();
        let rhs = if rng.gen_range(0..10) < 7 {
            let slack = (rng.gen_range(0..=6) as f64) / 2.0;
            match sense {
                ConstraintSense::Le => activity + slack,
                ConstraintSense::Ge => activity - slack,
                ConstraintSense::Eq => activity,
            }
        } else {
            (rng.gen_range(-12..=12) as f64) / 2.0
        };
        let coeffs = coeffs.into_iter().map(|(j, c)| (vars[j], c)).collect();
        m.add_constraint(coeffs, sense, rhs).unwrap();
    }
    let obj: Vec<_> = vars
        .iter()
        .map(|&v| (v, (rng.gen_range(-6..=6) as f64) / 2.0))
        .collect();
    m.set_objective(obj);
    m
}

/// All-vertex enumeration oracle for small LPs with finite bounds: every
/// optimum of a nonempty bounded polytope is attained at a vertex, i.e. at n
/// linearly independent active hyperplanes drawn from rows and bounds.
fn lp_vertex_oracle(model: &MilpModel) -> Option<f64> {
    let n = model.num_vars();
    // Hyperplanes: (normal, rhs) for each row (as equality) and each bound.
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for con in model.constraints() {
        let mut normal = vec![0.0; n];
        for &(var, c) in &con.coeffs {
            normal[var.index()] = c;
        }
        planes.push((normal, con.rhs));
    }
    for (j, v) in model.vars().iter().enumerate() {
        let mut low = vec![0.0; n];
        low[j] = 1.0;
        planes.push((low.clone(), v.lb));
        low[j] = 1.0;
        planes.push((low, v.ub));
    }

    let mut best: Option<f64> = None;
    let k = planes.len();
    let mut choice: Vec<usize> = (0..n).collect();
    loop {
        // Solve the n x n system of the chosen active planes.
        let mut a = vec![0.0; n * n];
        let mut b = vec![0.0; n];
        for (r, &p) in choice.iter().enumerate() {
            a[r * n..(r + 1) * n].copy_from_slice(&planes[p].0);
            b[r] = planes[p].1;
        }
        if let Some(x) = gauss_solve(&mut a, &mut b, n) {
            if model.check_assignment(&x, 1e-9).is_ok() {
                let obj = model.objective_value(&x);
                best = Some(match best {
                    Some(cur) => cur.min(obj),
                    None => obj,
                });
            }
        }
        // Next combination.
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if choice[i] != i + k - n {
                choice[i] += 1;
                for j in i + 1..n {
                    choice[j] = choice[j - 1] + 1;
                }
                break;
            }
        }
    }
}

fn gauss_solve(a: &mut [f64], b: &mut [f64], n: usize) -> Option<Vec<f64>> {
    for col in 0..n {
        let mut pivot = col;
        for r in col + 1..n {
            if a[r * n + col].abs() > a[pivot * n + col].abs() {
                pivot = r;
            }
        }
        if a[pivot * n + col].abs() < 1e-9 {
            return None;
        }
        if pivot != col {
            for j in 0..n {
                a.swap(col * n + j, pivot * n + j);
            }
            b.swap(col, pivot);
        }
        let p = a[col * n + col];
        for r in 0..n {
            if r != col && a[r * n + col] != 0.0 {
                let f = a[r * n + col] / p;
                for j in col..n {
                    a[r * n + j] -= f * a[col * n + j];
                }
                b[r] -= f * b[col];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i * n + i]).collect())
}

#[test]
fn lp_matches_vertex_enumeration() {
    let cfg = SolverConfig::exact();
    let mut solved = 0;
    for seed in 0..60 {
        let model = random_model(1000 + seed, 0, 4, 4);
        let oracle = lp_vertex_oracle(&model);
        let sol = solve_lp(&model, &cfg).unwrap();
        match (oracle, sol.status) {
            (Some(best), SolveStatus::Optimal) => {
                assert!(
                    (best - sol.objective).abs() <= 1e-6 * (1.0 + best.abs()),
                    "seed {seed}: oracle {best} vs simplex {}",
                    sol.objective
                );
                model.check_assignment(&sol.values, 1e-6).unwrap();
                solved += 1;
            }
            (None, SolveStatus::Infeasible) => {}
            (oracle, status) => {
                panic!("seed {seed}: oracle {oracle:?} but simplex status {status:?}")
            }
        }
    }
    assert!(solved >= 20, "only {solved} feasible instances; weak test");
}

#[test]
fn milp_matches_brute_force_on_random_instances() {
    let cfg = SolverConfig::exact();
    let mut optimal = 0;
    for seed in 0..50 {
        let n_bin = 2 + (seed as usize % 11);
        let n_cont = seed as usize % 8;
        let n_rows = 3 + (seed as usize % 18);
        let model = random_model(seed, n_bin, n_cont, n_rows);
        let oracle = brute_force(&model, &cfg).unwrap();
        let (sol, stats) = solve_milp(&model, &cfg, None).unwrap();
        assert_eq!(
            oracle.status, sol.status,
            "seed {seed}: oracle {:?} vs bnb {:?}",
            oracle.status, sol.status
        );
        if oracle.status == SolveStatus::Optimal {
            assert!(
                (oracle.objective - sol.objective).abs() <= 1e-6,
                "seed {seed}: oracle {} vs bnb {} (nodes {})",
                oracle.objective,
                sol.objective,
                stats.nodes
            );
            model.check_assignment(&sol.values, 1e-6).unwrap();
            assert!(stats.best_bound <= sol.objective + 1e-9);
            optimal += 1;
        }
    }
    assert!(optimal >= 15, "only {optimal} feasible instances; weak test");
}

#[test]
fn milp_determinism_across_runs() {
    let cfg = SolverConfig::exact();
    for seed in [3u64, 17, 29] {
        let model = random_model(seed, 8, 4, 10);
        let (s1, t1) = solve_milp(&model, &cfg, None).unwrap();
        let (s2, t2) = solve_milp(&model, &cfg, None).unwrap();
        assert_eq!(s1.status, s2.status);
        assert_eq!(t1.nodes, t2.nodes);
        if s1.status == SolveStatus::Optimal {
            assert_eq!(s1.objective, s2.objective);
        }
    }
}
