mod common;

use sfplan_core::ccs::{sfols, ExactSolver, SfolsConfig};
use sfplan_core::fsa::{build_product, Fsa, FsaState};
use sfplan_core::grid::{build_delivery, build_office, PropositionMap};
use sfplan_core::planner::*;
use sfplan_core::sf::PolicyHandle;
use sfplan_core::{EnvModel, StateId};

fn office_tasks() -> Vec<(&'static str, Fsa)> {
    vec![
        (
            "sequential",
            Fsa::new(&["u0", "u1", "u2"], &["t"], Some("u0"), None, &[("u0", "coffee", "u1"), ("u1", "mail", "u2"), ("u2", "o", "t")])
                .unwrap(),
        ),
        (
            "disjunction",
            Fsa::new(
                &["u0", "u1", "u2"],
                &["t"],
                Some("u0"),
                None,
                &[("u0", "coffee", "u1"), ("u0", "mail", "u2"), ("u1", "o", "t"), ("u2", "o", "t")],
            )
            .unwrap(),
        ),
        (
            "composite",
            Fsa::new(
                &["u0", "u1", "u2", "u3"],
                &["t"],
                Some("u0"),
                None,
                &[
                    ("u0", "coffee", "u1"),
                    ("u0", "mail", "u2"),
                    ("u1", "mail", "u3"),
                    ("u2", "coffee", "u3"),
                    ("u3", "o", "t"),
                ],
            )
            .unwrap(),
        ),
    ]
}

fn exact_ccs(env: &EnvModel) -> Vec<PolicyHandle> {
    sfols(env, &mut ExactSolver::new(env), &SfolsConfig::default()).unwrap().policies
}

fn history_cfg() -> PlanConfig {
    PlanConfig {
        keep_history: true,
        ..PlanConfig::default()
    }
}

fn check_plan(policies: &[PolicyHandle], fsa: &Fsa, props: &PropositionMap, env: &EnvModel) -> PlanResult {
    let plan = sf_fsa_vi(policies, fsa, props, env, &history_cfg()).unwrap();
    assert!(plan.converged && plan.iterations <= 1000);
    // Terminal override after every sweep.
    for sweep in &plan.history {
        for u in fsa.nonterminal() {
            for j in 0..env.dim() {
                if fsa.is_terminal(fsa.tau_exit(u, props, j)) {
                    assert_eq!(sweep[u.0][j], 1.0);
                }
            }
        }
    }
    // Contraction.
    for k in 1..plan.residuals.len() {
        assert!(plan.residuals[k] <= env.gamma() * plan.residuals[k - 1] + 1e-12);
    }
    // Residuals stay positive until the last sweep.
    assert!(plan.residuals[..plan.residuals.len() - 1].iter().all(|&r| r > 0.0));
    let per = (fsa.num_nonterminal() * env.dim() * policies.len()) as u64;
    assert!(plan.op_counts.iter().all(|&c| c == per));
    assert_eq!(plan.op_count, per * plan.iterations as u64);
    plan
}

#[test]
fn office_values_match_the_flat_product() {
    let (env, props) = build_office();
    let policies = exact_ccs(&env);
    for (name, fsa) in office_tasks() {
        let plan = check_plan(&policies, &fsa, &props, &env);
        let product = build_product(&fsa, &env, &props).unwrap();
        let oracle = common::product_v(&product);
        for x in 0..product.num_states() {
            let (u, s) = product.split(x);
            let gap = (plan.value(&policies, u, s) - oracle[x]).abs();
            assert!(gap <= 1e-6, "{name}: gap {gap} at ({}, {})", u.0, s.0);
        }
    }
}

#[test]
fn delivery_values_match_the_flat_product_on_free_cells() {
    let (env, props) = build_delivery();
    let layout = sfplan_core::grid::delivery_layout();
    let policies = exact_ccs(&env);
    let fsa = Fsa::new(
        &["u0", "u1", "u2", "u3"],
        &["t"],
        Some("u0"),
        None,
        &[("u0", "A", "u1"), ("u1", "B", "u2"), ("u2", "C", "u3"), ("u3", "H", "t")],
    )
    .unwrap();
    let plan = check_plan(&policies, &fsa, &props, &env);
    let product = build_product(&fsa, &env, &props).unwrap();
    let oracle = common::product_v(&product);
    for x in 0..product.num_states() {
        let (u, s) = product.split(x);
        if layout.obstacles.contains(&layout.cell_of(s)) {
            continue;
        }
        assert!((plan.value(&policies, u, s) - oracle[x]).abs() <= 1e-6);
    }
}

#[test]
fn single_edge_task_converges_fast_and_rolls_out_optimally() {
    let (env, props) = build_office();
    let policies = exact_ccs(&env);
    let fsa = Fsa::new(&["u0"], &["t"], Some("u0"), None, &[("u0", "coffee", "t")]).unwrap();
    let plan = check_plan(&policies, &fsa, &props, &env);
    // Sweep 1 fixes the coffee exits; the other exits settle once values
    // have propagated through the chain of exits entered on the way to
    // coffee (at most two here), and one more sweep confirms.
    assert!(plan.iterations <= 4);
    assert_eq!(*plan.residuals.last().unwrap(), 0.0);
    let start = env.start().unwrap();
    let nearest = props
        .slots_of("coffee")
        .into_iter()
        .filter_map(|j| common::bfs(&env, start)[env.exits()[j].0])
        .min()
        .unwrap();
    let mut mu = extract_policy(&plan, &policies);
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
    let stats = evaluate_product_policy(&mut mu, &fsa, &props, &env, 3, DEFAULT_HORIZON, &mut rng).unwrap();
    assert_eq!(stats.mean, -(nearest as f64));
    assert_eq!(stats.std, 0.0);
}

#[test]
fn composite_rollout_visits_both_items_before_an_office() {
    let (env, props) = build_office();
    let policies = exact_ccs(&env);
    let (_, fsa) = office_tasks().into_iter().nth(2).unwrap();
    let plan = check_plan(&policies, &fsa, &props, &env);
    let mut mu = extract_policy(&plan, &policies);
    let (mut u, mut s) = (fsa.initial(), env.start().unwrap());
    let mut visited = Vec::new();
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
    for _ in 0..DEFAULT_HORIZON {
        let a = ProductPolicy::act(&mut mu, u, s);
        let (next, _) = env.sample_transition(s, a, &mut rng).unwrap();
        if env.is_terminal_transition(s, next) {
            visited.push(props.of_state(&env, next).unwrap().to_string());
            u = fsa.tau_exit(u, &props, env.exit_slot(next).unwrap());
            if fsa.is_terminal(u) {
                break;
            }
        }
        s = next;
    }
    let n = visited.len();
    assert_eq!(visited[n - 1], "o");
    assert!(visited.iter().any(|p| p == "coffee") && visited.iter().any(|p| p == "mail"));
    // The planned value at the start is the product optimum.
    let product = build_product(&fsa, &env, &props).unwrap();
    let oracle = common::product_v(&product);
    let x = product.index(FsaState(0), env.start().unwrap());
    assert!((plan.value(&policies, FsaState(0), StateId(x % env.num_states())) - oracle[x]).abs() <= 1e-6);
}

#[test]
fn gauss_seidel_reaches_the_same_fixed_point() {
    let (env, props) = build_office();
    let policies = exact_ccs(&env);
    for (_, fsa) in office_tasks() {
        let jacobi = sf_fsa_vi(&policies, &fsa, &props, &env, &PlanConfig::default()).unwrap();
        let cfg = PlanConfig {
            gauss_seidel: true,
            ..PlanConfig::default()
        };
        let gs = sf_fsa_vi(&policies, &fsa, &props, &env, &cfg).unwrap();
        assert!(gs.iterations <= jacobi.iterations);
        for (a, b) in jacobi.weights.iter().zip(&gs.weights) {
            assert!(a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() <= 1e-7));
        }
    }
}

#[test]
fn empty_policy_set_is_rejected() {
    let (env, props) = build_office();
    let (_, fsa) = office_tasks().remove(0);
    assert!(sf_fsa_vi(&[], &fsa, &props, &env, &PlanConfig::default()).is_err());
}

#[test]
fn task_satisfied_by_every_exit_converges_in_two_sweeps() {
    let (env, props) = sfplan_core::grid::build_double_slit();
    let policies = sfols(&env, &mut ExactSolver::new(&env), &SfolsConfig { min_priority: 1e-2, ..SfolsConfig::default() })
        .unwrap()
        .policies;
    let fsa = Fsa::new(&["u0"], &["t"], Some("u0"), None, &[("u0", "blue", "t"), ("u0", "red", "t")]).unwrap();
    let plan = check_plan(&policies, &fsa, &props, &env);
    assert_eq!(plan.iterations, 2);
    assert_eq!(plan.weights[0].0, vec![1.0, 1.0]);
}
