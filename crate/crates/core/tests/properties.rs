use coin_core::agent::{q_value, solver_action, ActionContext};
use coin_core::game::{self, GameContext};
use coin_core::harness::{repair_caches, run_policy};
use coin_core::scenario::{generate_scenario, generate_tasks};
use coin_core::seeding::{stream_rng, Stream};
use coin_core::solver::{self, KnapsackInstance};
use coin_core::{cost, Policy, ScenarioConfig, SimConfig};
use proptest::prelude::*;

fn knapsack_input() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64, f64)> {
    (1usize..=7).prop_flat_map(|f| {
        (
            prop::collection::vec(-1.0f64..1.0, f),
            prop::collection::vec(1u32..=10, f).prop_map(|v| v.into_iter().map(f64::from).collect()),
            0u32..=20,
            0u32..=20,
        )
            .prop_map(|(values, volumes, fin, ein)| (values, volumes, f64::from(fin), f64::from(ein)))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn knapsack_is_feasible_and_optimal((values, volumes, fin, ein) in knapsack_input()) {
        let inst = KnapsackInstance::new(values.clone(), volumes, fin, ein);
        let dp = solver::solve_optimal_action(&inst).unwrap();
        let bf = solver::brute_force_action(&inst).unwrap();
        prop_assert!(inst.feasible(&dp));
        prop_assert_eq!(solver::objective(&values, &dp), solver::objective(&values, &bf));
    }

    #[test]
    fn more_cache_never_hurts((values, volumes, fin, ein) in knapsack_input(), extra in 0u32..=10) {
        let small = KnapsackInstance::new(values.clone(), volumes.clone(), fin, ein);
        let large = KnapsackInstance::new(values.clone(), volumes, fin + f64::from(extra), ein + f64::from(extra));
        let a = solver::objective(&values, &solver::solve_optimal_action(&small).unwrap());
        let b = solver::objective(&values, &solver::solve_optimal_action(&large).unwrap());
        prop_assert!(b >= a - 1e-12);
    }

    #[test]
    fn q_is_linear_in_theta(
        theta in prop::collection::vec(-5.0f64..5.0, 6),
        other in prop::collection::vec(-5.0f64..5.0, 6),
        action in prop::collection::vec(0u8..=2, 6),
        k in -3.0f64..3.0,
    ) {
        let combined: Vec<f64> = theta.iter().zip(&other).map(|(a, b)| a + k * b).collect();
        let lhs = q_value(&combined, &action).unwrap();
        let rhs = q_value(&theta, &action).unwrap() + k * q_value(&other, &action).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
    }

    #[test]
    fn solver_action_respects_eligibility(
        theta in prop::collection::vec(-1.0f64..1.0, 8),
        eligible in prop::collection::vec(any::<bool>(), 8),
    ) {
        let ctx = ActionContext {
            volumes: vec![1.0; 8],
            eligible: eligible.clone(),
            fin_cache: 3.0,
            ein_cache: 5.0,
        };
        let action = solver_action(&theta, &ctx).unwrap();
        for (a, e) in action.iter().zip(&eligible) {
            prop_assert!(*e || *a == 0);
        }
        prop_assert!(action.iter().filter(|&&a| a == 1).count() <= 3);
        prop_assert!(action.iter().filter(|&&a| a == 2).count() <= 5);
    }

    #[test]
    fn equilibrium_repair_fits_caches(seed in 0u64..1000) {
        let config = ScenarioConfig { users: 6, subtasks: 3, ..ScenarioConfig::default() };
        let scenario = generate_scenario(&config, seed).unwrap();
        let tasks = generate_tasks(&config, &mut stream_rng(seed, Stream::Tasks));
        let ctx = GameContext::new(&scenario, &tasks);
        let out = game::run_splitting_game(&ctx, 10_000, &mut stream_rng(seed, Stream::Game));
        let (repaired, pulled) = repair_caches(&tasks, &out.profile, scenario.fin.cache_bits, scenario.ein.cache_bits);
        prop_assert!(cost::check_caches(&tasks, &repaired, &scenario.fin, &scenario.ein).is_ok());
        let offloaded = |p: &coin_core::StrategyProfile| (0..p.len()).filter(|&u| p.is_offloaded(u)).count();
        prop_assert_eq!(offloaded(&out.profile), offloaded(&repaired) + pulled);
    }
}

fn small_config() -> SimConfig {
    let mut c = SimConfig::desk();
    c.scenario.users = 4;
    c.scenario.subtasks = 3;
    c.scenario.slots = 20;
    c.experiment.episodes = 3;
    c
}

#[test]
fn every_unit_is_placed_exactly_once() {
    let c = small_config();
    for policy in Policy::ALL {
        let run = run_policy(&c, policy, 3).unwrap();
        assert_eq!(run.records.len(), 60);
        for r in &run.records {
            assert_eq!(r.n_local + r.n_fin + r.n_ein, 12, "{policy}");
            assert!(r.system_cost.is_finite() && r.system_cost > 0.0);
        }
    }
}

#[test]
fn runs_are_deterministic_per_seed() {
    let c = small_config();
    for policy in Policy::ALL {
        let a = run_policy(&c, policy, 11).unwrap();
        let b = run_policy(&c, policy, 11).unwrap();
        assert_eq!(a.records, b.records, "{policy}");
        let other = run_policy(&c, policy, 12).unwrap();
        assert_ne!(a.records, other.records, "{policy}");
    }
}

#[test]
fn proposed_network_is_returned_and_finite() {
    let run = run_policy(&small_config(), Policy::Proposed, 5).unwrap();
    let net = run.network.expect("proposed runs keep their network");
    assert!(net.all_finite());
    assert_eq!(net.input_width(), 24);
    assert_eq!(net.output_width(), 12);
}
