//! End-to-end checks of the tree-learning formulation on tiny instances:
//! build, solve (branch-and-bound vs brute force), decode, and the
//! structural invariants of returned assignments.

use symtree::dataset::Dataset;
use symtree::expr::{BasisRole, BasisSet};
use symtree::formulation::{
    build, center_thresholds, decode, objective_terms, rounding_heuristic, to_symbolic_tree,
    BigM, HyperParams,
};
use symtree::milp::SolveStatus;
use symtree::solver::{brute_force, solve_milp, SolverConfig};

fn vars(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// 1-D step data: y = 0 below the origin, 1 at or above it.
fn step_dataset(xs: &[f64]) -> Dataset {
    let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| if x < 0.0 { 0.0 } else { 1.0 }).collect();
    Dataset::new(vars(&["x"]), rows, ys).unwrap()
}

fn tiny_hp() -> HyperParams {
    HyperParams {
        depth: 1,
        n_b: Some(1),
        a_bounds: (-10.0, 10.0),
        b_bounds: (-10.0, 10.0),
        c_bounds: (-10.0, 10.0),
        y_bounds: (-10.0, 10.0),
        big_m: BigM::Global(30.0),
        ..Default::default()
    }
}

#[test]
fn tiny_step_instance_solves_exactly() {
    let data = step_dataset(&[-1.5, -0.6, 0.4, 1.2]);
    let kb = BasisSet::parse(&["x", "x^2"], data.feature_names(), BasisRole::Branching).unwrap();
    let kf = BasisSet::parse(&["1", "x"], data.feature_names(), BasisRole::Leaf).unwrap();
    let hp = tiny_hp();
    let (model, map) = build(&data, &kb, &kf, &hp).unwrap();

    let cfg = SolverConfig::exact();
    let oracle = brute_force(&model, &cfg).unwrap();
    let (sol, stats) = solve_milp(&model, &cfg, None).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!(
        (sol.objective - oracle.objective).abs() <= 1e-6,
        "bnb {} vs oracle {} ({} nodes)",
        sol.objective,
        oracle.objective,
        stats.nodes
    );
    // The step is exactly representable: constant leaves 0 and 1.
    assert!(sol.objective.abs() <= 1e-7, "objective {}", sol.objective);

    let solution = decode(&sol, &map, &hp).unwrap();
    let tree = to_symbolic_tree(&solution, &kb, &kf).unwrap();
    // Decoded routing matches tree inference on every training point.
    for i in 0..data.len() {
        let leaf = tree.predict_leaf(&data.row(i)).unwrap();
        assert_eq!(leaf, solution.routing[i], "point {i}");
    }
    // Objective terms recomputed by inference agree with the solve.
    let terms = objective_terms(&solution, &data, &kb, &kf).unwrap();
    assert!(terms.l_acc <= 1e-7);
    assert_eq!(terms.l_c, 1.0);
}

#[test]
fn single_point_is_forced_to_a_child_of_the_root() {
    let data = Dataset::new(vars(&["x"]), vec![vec![0.7]], vec![2.0]).unwrap();
    let kb = BasisSet::parse(&["x"], data.feature_names(), BasisRole::Branching).unwrap();
    let kf = BasisSet::parse(&["1"], data.feature_names(), BasisRole::Leaf).unwrap();
    let hp = HyperParams {
        n_b: None,
        ..tiny_hp()
    };
    let (model, map) = build(&data, &kb, &kf, &hp).unwrap();
    let (sol, _) = solve_milp(&model, &SolverConfig::exact(), None).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!(sol.value(map.z(0, 1)) < 0.5, "root cannot hold data");
    let z2 = sol.value(map.z(0, 2));
    let z3 = sol.value(map.z(0, 3));
    assert!((z2 + z3 - 1.0).abs() < 1e-6);
    assert!(sol.objective.abs() < 1e-7, "constant leaf fits one point");
}

#[test]
fn linearization_is_exact_in_returned_assignments() {
    let data = step_dataset(&[-2.0, -1.0, -0.2, 0.3, 0.9, 1.7]);
    let kb = BasisSet::parse(&["x", "x^2"], data.feature_names(), BasisRole::Branching).unwrap();
    let kf = BasisSet::parse(&["1", "x"], data.feature_names(), BasisRole::Leaf).unwrap();
    let hp = tiny_hp();
    let (model, map) = build(&data, &kb, &kf, &hp).unwrap();
    let (sol, _) = solve_milp(&model, &SolverConfig::exact(), None).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    for i in 0..data.len() {
        for n in 1..=3usize {
            let z = sol.value(map.z(i, n));
            let delta = sol.value(map.delta(i, n));
            let yhat = sol.value(map.yhat(i, n));
            let expect = if z > 0.5 { yhat } else { 0.0 };
            assert!(
                (delta - expect).abs() <= 1e-6,
                "delta[{i},{n}] = {delta}, yhat = {yhat}, z = {z}"
            );
        }
    }
}

#[test]
fn heuristic_and_warm_paths_agree_with_oracle() {
    let data = step_dataset(&[-1.8, -0.9, -0.1, 0.2, 0.8, 1.9]);
    let kb = BasisSet::parse(&["x", "x^2"], data.feature_names(), BasisRole::Branching).unwrap();
    let kf = BasisSet::parse(&["1", "x"], data.feature_names(), BasisRole::Leaf).unwrap();
    let hp = tiny_hp();
    let (model, map) = build(&data, &kb, &kf, &hp).unwrap();
    let phi_b = kb.featurize(&data).unwrap();
    let phi_f = kf.featurize(&data).unwrap();

    let mut cfg = SolverConfig::exact();
    cfg.heuristic = Some(rounding_heuristic(
        &map,
        &phi_b,
        &phi_f,
        data.targets(),
        &hp,
    ));
    let oracle = brute_force(&model, &SolverConfig::exact()).unwrap();
    let (sol, _) = solve_milp(&model, &cfg, None).unwrap();
    assert!((sol.objective - oracle.objective).abs() <= 1e-6);
}

#[test]
fn centered_thresholds_preserve_routing() {
    let data = step_dataset(&[-1.5, -0.6, 0.4, 1.2]);
    let kb = BasisSet::parse(&["x", "x^2"], data.feature_names(), BasisRole::Branching).unwrap();
    let kf = BasisSet::parse(&["1", "x"], data.feature_names(), BasisRole::Leaf).unwrap();
    let hp = tiny_hp();
    let (model, map) = build(&data, &kb, &kf, &hp).unwrap();
    let (sol, _) = solve_milp(&model, &SolverConfig::exact(), None).unwrap();
    let mut solution = decode(&sol, &map, &hp).unwrap();
    let phi_b = kb.featurize(&data).unwrap();
    center_thresholds(&mut solution, &phi_b, &hp);
    let tree = to_symbolic_tree(&solution, &kb, &kf).unwrap();
    for i in 0..data.len() {
        assert_eq!(
            tree.predict_leaf(&data.row(i)).unwrap(),
            solution.routing[i]
        );
    }
}

#[test]
fn omitting_nf_and_full_nf_agree_on_exact_data() {
    let data = step_dataset(&[-1.5, -0.6, -0.2, 0.4, 0.9, 1.2]);
    let kb = BasisSet::parse(&["x"], data.feature_names(), BasisRole::Branching).unwrap();
    let kf = BasisSet::parse(&["1", "x"], data.feature_names(), BasisRole::Leaf).unwrap();
    let without = HyperParams {
        n_f: None,
        ..tiny_hp()
    };
    let with = HyperParams {
        n_f: Some(2),
        ..tiny_hp()
    };
    let cfg = SolverConfig::exact();
    let (m1, _) = build(&data, &kb, &kf, &without).unwrap();
    let (m2, _) = build(&data, &kb, &kf, &with).unwrap();
    let s1 = brute_force(&m1, &cfg).unwrap();
    let s2 = brute_force(&m2, &cfg).unwrap();
    assert!((s1.objective - s2.objective).abs() <= 1e-6);
}

#[test]
fn model_size_matches_closed_form() {
    // Variables: d N + (a + omega) Kb*int + b int + c N*Kf + yhat/delta/z
    // 3*N_d*N + ypred N_d + eps 2*N_d + chat 2*N*Kf (+ w N*Kf).
    let data = step_dataset(&[-1.0, -0.3, 0.5, 1.1]);
    let kb = BasisSet::parse(&["x", "x^2"], data.feature_names(), BasisRole::Branching).unwrap();
    let kf = BasisSet::parse(&["1", "x"], data.feature_names(), BasisRole::Leaf).unwrap();
    let hp = tiny_hp();
    let (model, _) = build(&data, &kb, &kf, &hp).unwrap();
    let (n_d, n, kb_l, kf_l) = (4usize, 3usize, 2usize, 2usize);
    let expected_vars =
        n + 2 * kb_l + 1 + n * kf_l + 3 * n_d * n + n_d + 2 * n_d + 2 * n * kf_l;
    assert_eq!(model.num_vars(), expected_vars);
    // Rows: tree1 2, tree2 N_d*N, tree3 N_d, tree4 2*N_d, a-omega 2*Kb,
    // omega-d Kb, routing 2*N_d, yhat N_d*N, c-bounds 2*N*Kf, delta 4*N_d*N,
    // ypred N_d, NB 1, eps N_d, chat N*Kf.
    let expected_rows = 2
        + n_d * n
        + n_d
        + 2 * n_d
        + 2 * kb_l
        + kb_l
        + 2 * n_d
        + n_d * n
        + 2 * n * kf_l
        + 4 * n_d * n
        + n_d
        + 1
        + n_d
        + n * kf_l;
    assert_eq!(model.num_constraints(), expected_rows);
}
