mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sfplan_core::ccs::*;
use sfplan_core::lp::maximize_boxed;
use sfplan_core::{ActionId, EnvModel, FeatureVector, StateId, WeightVector};

/// Random 6-state, 3-action, 2-exit model (exits are states 4 and 5) with
/// small negative features on ordinary transitions and a start at state 0.
fn random_mdp(seed: u64) -> EnvModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let exits = vec![StateId(4), StateId(5)];
    let mut b = EnvModel::builder(6, 3, exits.clone())
        .gamma(0.9)
        .initial(vec![1.0 / 6.0; 6])
        .start(StateId(0))
        .reference(vec![0.5, 0.2, 0.2, 0.1, 0.0, 0.0]);
    for s in 0..6 {
        for a in 0..3 {
            let mut targets: Vec<usize> = (0..6).collect();
            for i in (1..6).rev() {
                targets.swap(i, rng.random_range(0..=i));
            }
            let k = rng.random_range(1..=3);
            let mut weights: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|x| *x /= total);
            for (&t, &p) in targets.iter().take(k).zip(&weights) {
                let phi = if s < 4 && t >= 4 {
                    FeatureVector::one_hot(2, t - 4)
                } else {
                    FeatureVector(vec![-rng.random_range(0.0..0.3), -rng.random_range(0.0..0.3)])
                };
                b.transition(StateId(s), ActionId(a), StateId(t), p, phi);
            }
        }
    }
    b.build().unwrap()
}

/// Expected SFs of every deterministic policy at the reference
/// distribution, by solving `(I − γ P_π) ψ = r_π` per component.
fn all_policy_psis(env: &EnvModel) -> Vec<[f64; 2]> {
    let (n, m, g) = (env.num_states(), env.num_actions(), env.gamma());
    let mut out = Vec::new();
    for code in 0..m.pow(n as u32) {
        let policy: Vec<usize> = (0..n).map(|s| (code / m.pow(s as u32)) % m).collect();
        let mut a = DMatrix::<f64>::identity(n, n);
        let mut r = DMatrix::<f64>::zeros(n, 2);
        for s in 0..n {
            for t in env.transitions(StateId(s), ActionId(policy[s])) {
                let phi = env.feature(t.feature);
                r[(s, 0)] += t.prob * phi[0];
                r[(s, 1)] += t.prob * phi[1];
                if !env.is_terminal_transition(StateId(s), t.next) {
                    a[(s, t.next.0)] -= g * t.prob;
                }
            }
        }
        let lu = a.lu();
        let mut psi = [0.0; 2];
        for k in 0..2 {
            let col = lu.solve(&DVector::from_column_slice(r.column(k).as_slice())).unwrap();
            psi[k] = env.reference_dist().iter().zip(col.iter()).map(|(p, x)| p * x).sum();
        }
        out.push(psi);
    }
    out
}

/// Vertices of the upper envelope of `λ ψ_0 + (1 − λ) ψ_1` over λ ∈ [0, 1],
/// walked from λ = 1 down to 0.
fn upper_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let value = |p: &[f64; 2], l: f64| l * p[0] + (1.0 - l) * p[1];
    let mut current = *points
        .iter()
        .max_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])))
        .unwrap();
    let mut hull = vec![current];
    let mut lambda = 1.0;
    loop {
        // Next point that overtakes `current` as λ decreases.
        let mut next: Option<([f64; 2], f64)> = None;
        for q in points {
            if q[1] <= current[1] + 1e-12 {
                continue;
            }
            // λ at which the two lines cross.
            let denom = (q[0] - q[1]) - (current[0] - current[1]);
            let cross = if denom.abs() < 1e-15 { f64::INFINITY } else { (current[1] - q[1]) / denom };
            if !(cross < lambda + 1e-12) || cross < 0.0 {
                continue;
            }
            let better = match next {
                None => true,
                Some((b, l)) => cross > l + 1e-12 || ((cross - l).abs() <= 1e-12 && q[1] > b[1]),
            };
            if better {
                next = Some((*q, cross));
            }
        }
        match next {
            Some((q, l)) if value(&q, l - 1e-9) > value(&current, l - 1e-9) => {
                current = q;
                lambda = l;
                hull.push(q);
            }
            _ => return hull,
        }
    }
}

fn same_set(a: &[[f64; 2]], b: &[[f64; 2]], tol: f64) -> bool {
    let close = |x: &[f64; 2], y: &[f64; 2]| (x[0] - y[0]).abs() <= tol && (x[1] - y[1]).abs() <= tol;
    a.iter().all(|x| b.iter().any(|y| close(x, y))) && b.iter().all(|y| a.iter().any(|x| close(x, y)))
}

#[test]
fn sfols_recovers_the_brute_force_hull() {
    for seed in [0u64, 1, 2, 3] {
        let env = random_mdp(seed);
        let brute = upper_hull(&all_policy_psis(&env));
        let cfg = SfolsConfig {
            min_priority: 0.0,
            ..SfolsConfig::default()
        };
        let ccs = sfols(&env, &mut ExactSolver::new(&env), &cfg).unwrap();
        let found: Vec<[f64; 2]> = ccs.psis().iter().map(|p| [p[0], p[1]]).collect();
        assert!(same_set(&found, &brute, 1e-6), "seed {seed}: sfols {found:?} vs hull {brute:?}");
    }
}

#[test]
fn smp_matches_brute_force_maximum() {
    let env = random_mdp(0);
    let all = all_policy_psis(&env);
    let ccs = sfols(&env, &mut ExactSolver::new(&env), &SfolsConfig::default()).unwrap();
    for k in 0..=20 {
        let l = k as f64 / 20.0;
        let w = [l, 1.0 - l];
        let brute = all.iter().map(|p| w[0] * p[0] + w[1] * p[1]).fold(f64::NEG_INFINITY, f64::max);
        assert!((smp_value(&ccs.psis(), &w) - brute).abs() <= 1e-6);
    }
}

#[test]
fn single_exit_family_collapses_to_one_policy() {
    let mut b = EnvModel::builder(3, 2, vec![StateId(2)]).gamma(0.9).start(StateId(0));
    for s in 0..3usize {
        let right = StateId((s + 1).min(2));
        let phi = if s < 2 && right.0 == 2 { FeatureVector::one_hot(1, 0) } else { FeatureVector::zeros(1) };
        b.transition(StateId(s), ActionId(0), right, 1.0, phi);
        b.transition(StateId(s), ActionId(1), StateId(s), 1.0, FeatureVector::zeros(1));
    }
    let env = b.build().unwrap();
    let ccs = sfols(&env, &mut ExactSolver::new(&env), &SfolsConfig::default()).unwrap();
    assert_eq!(ccs.len(), 1);
}

#[test]
fn coverage_is_monotone_across_iterations() {
    let env = random_mdp(1);
    let ccs = sfols(&env, &mut ExactSolver::new(&env), &SfolsConfig::default()).unwrap();
    let grid: Vec<[f64; 2]> = (0..1000).map(|k| [k as f64 / 999.0, 1.0 - k as f64 / 999.0]).collect();
    let mut prev = vec![f64::NEG_INFINITY; grid.len()];
    for calls in 1..=ccs.log.len() {
        let psis: Vec<FeatureVector> = ccs.prefix(calls).into_iter().map(|p| p.mean_sf).collect();
        for (w, pv) in grid.iter().zip(prev.iter_mut()) {
            let v = smp_value(&psis, w);
            assert!(v >= *pv);
            *pv = v;
        }
    }
}

#[test]
fn tiny_iteration_cap_is_reported() {
    let env = random_mdp(2);
    let cfg = SfolsConfig {
        max_iterations: 1,
        ..SfolsConfig::default()
    };
    assert_eq!(sfols(&env, &mut ExactSolver::new(&env), &cfg).unwrap_err(), sfplan_core::Error::CapExceeded(1));
}

fn psi_strategy(d: usize) -> impl Strategy<Value = Vec<FeatureVector>> {
    proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, d), 1..5)
        .prop_map(|v| v.into_iter().map(FeatureVector).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn corners_lie_on_two_active_constraints(psis in psi_strategy(3), new in proptest::collection::vec(-1.0f64..1.0, 3)) {
        let psi_new = FeatureVector(new);
        let deleted: Vec<WeightVector> = (0..3).map(|k| WeightVector::extremum(3, k)).chain([WeightVector::uniform(3)]).collect();
        let popped = WeightVector::uniform(3);
        for c in corner_weights(&psi_new, &popped, &psis, &deleted) {
            prop_assert!(c.iter().all(|&x| x >= 0.0) && (c.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            let vn: f64 = c.dot(&psi_new);
            let ties = psis.iter().filter(|p| (c.dot(p) - vn).abs() <= 1e-7).count();
            let faces = c.iter().filter(|&&x| x.abs() <= 1e-7).count();
            prop_assert!(ties + faces >= 1, "corner {:?} meets no other constraint", c.0);
            prop_assert!(vn >= smp_value(&psis, &c) - 1e-7);
        }
    }

    #[test]
    fn lp_bound_dominates_set_max(psis in psi_strategy(2), raw in 0.0f64..1.0) {
        // Visited values taken from the set itself keep the LP feasible.
        let visited: Vec<(WeightVector, f64)> = [0.0, 0.5, 1.0]
            .iter()
            .map(|&l| {
                let w = WeightVector(vec![l, 1.0 - l]);
                let v = smp_value(&psis, &w);
                (w, v)
            })
            .collect();
        let w = WeightVector(vec![raw, 1.0 - raw]);
        let a: Vec<Vec<f64>> = visited.iter().map(|(v, _)| v.0.clone()).collect();
        let b: Vec<f64> = visited.iter().map(|(_, x)| *x).collect();
        let sol = maximize_boxed(&w, &a, &b, &[-10.0, -10.0], &[1.0, 1.0]).unwrap();
        prop_assert!(sol.objective >= smp_value(&psis, &w) - 1e-9);
        prop_assert!(estimate_improvement(&w, &psis, &visited, (-10.0, 1.0)).unwrap() >= 0.0);
    }
}
