use proptest::prelude::*;

use swing_core::io::{read_surface_csv, surface_csv_string};
use swing_core::montecarlo::{dual_bound, policy_path_value, sample_path, simulate_primal, ZeroMap};
use swing_core::verify::{brute_force_value, decision_cells, optimality_gap};
use swing_core::{
    build_model, marginal_left, marginal_predictable, solve_dp, LatticeModel, ModelParams, PolicyTable, TimeGrid,
    VolumeGrid,
};

fn small_model() -> impl Strategy<Value = ModelParams> {
    prop_oneof![
        (80.0..120.0f64, 80.0..120.0f64, 0.1..0.6f64, 0.0..0.08f64)
            .prop_map(|(s, k, sigma, r)| ModelParams::gbm_call(s, k, sigma, r)),
        (0.2..3.0f64).prop_map(ModelParams::indicator_exponential),
        (0.0..1.2f64).prop_map(ModelParams::indicator_deterministic),
        (50.0..150.0f64, 0.0..150.0f64, -0.1..0.1f64).prop_map(|(s, k, r)| ModelParams::constant(s, k, r)),
    ]
}

fn build(params: &ModelParams, horizon: f64, steps: usize, cap: f64) -> Option<(LatticeModel, VolumeGrid)> {
    let grid = TimeGrid::new(horizon, steps).ok()?;
    let model = build_model(params, &grid).ok()?;
    Some((model, VolumeGrid::new(&grid, cap).ok()?))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dp_matches_enumeration(params in small_model(), steps in 1usize..=3, cap in 0.4..3.0f64, horizon in 0.2..1.5f64) {
        let Some((model, volume)) = build(&params, horizon, steps, cap) else { return Ok(()) };
        prop_assume!(decision_cells(&model, &volume) <= 16);
        let surface = solve_dp(&model, &volume).unwrap();
        for j in 0..volume.len() {
            let oracle = brute_force_value(&model, &volume, j, 16).unwrap().value;
            prop_assert!((oracle - surface.value(0, 0, j)).abs() <= 1e-12 * (1.0 + oracle.abs()));
        }
    }

    #[test]
    fn value_is_monotone_and_concave_in_volume(params in small_model(), steps in 2usize..25, cap in 0.3..3.0f64) {
        let Some((model, volume)) = build(&params, 1.0, steps, cap) else { return Ok(()) };
        let surface = solve_dp(&model, &volume).unwrap();
        let scale = 1e-10 * (1.0 + model.max_payoff());
        for i in 0..=steps {
            for k in 0..model.nodes(i).len() {
                let row = surface.row(i, k);
                for j in 1..row.len() {
                    prop_assert!(row[j] + scale >= row[j - 1]);
                    if j + 1 < row.len() {
                        prop_assert!(row[j + 1] - 2.0 * row[j] + row[j - 1] <= scale);
                    }
                }
            }
        }
    }

    #[test]
    fn any_control_has_nonnegative_gap(params in small_model(), steps in 2usize..20, stream in 0u64..1000) {
        let Some((model, volume)) = build(&params, 1.0, steps, 1.0) else { return Ok(()) };
        let surface = solve_dp(&model, &volume).unwrap();
        let d = marginal_predictable(&model, &surface).unwrap();
        let control = PolicyTable::random(&model, &volume, 5, stream);
        let gap = optimality_gap(&model, &surface, &d, &control).unwrap();
        for cell in gap.iter().flatten().flatten() {
            prop_assert!(*cell >= -1e-10 * (1.0 + model.max_payoff()));
        }
    }

    #[test]
    fn simulated_volume_never_exceeds_budget(params in small_model(), steps in 2usize..30, start in 0usize..40, seed in 0u64..50) {
        let Some((model, volume)) = build(&params, 1.0, steps, 1.5) else { return Ok(()) };
        let level = start.min(volume.levels());
        let policy = PolicyTable::random(&model, &volume, seed, 0);
        for p in 0..20 {
            let path = sample_path(&model, seed, p);
            let (_, used) = policy_path_value(&model, &policy, volume.dy(), &path, level).unwrap();
            prop_assert!(used <= level);
        }
    }

    #[test]
    fn zero_map_dominates_primal(params in small_model(), steps in 2usize..15, seed in 0u64..100) {
        let Some((model, volume)) = build(&params, 1.0, steps, 1.0) else { return Ok(()) };
        let surface = solve_dp(&model, &volume).unwrap();
        let d = marginal_predictable(&model, &surface).unwrap();
        let level = volume.levels();
        let policy = PolicyTable::always(&model, &volume);
        let primal = simulate_primal(&model, &policy, volume.dy(), level, 200, seed).unwrap();
        let dual = dual_bound(&model, &surface, &d, level, 200, seed, &ZeroMap).unwrap();
        // same paths, so the inequality holds path by path
        prop_assert!(dual.mean + 1e-12 >= primal.mean);
    }

    #[test]
    fn surface_csv_round_trips(params in small_model(), steps in 1usize..8, cap in 0.5..2.5f64) {
        let Some((model, volume)) = build(&params, 0.75, steps, cap) else { return Ok(()) };
        let surface = solve_dp(&model, &volume).unwrap();
        let text = surface_csv_string(&model, &surface, &marginal_left(&model, &surface).unwrap()).unwrap();
        prop_assert_eq!(read_surface_csv(text.as_bytes(), &model, &volume).unwrap(), surface);
    }
}

/// `E[min(b, L * rho)]` for `rho ~ Exp(lambda)` by composite Simpson on the density.
fn exponential_oracle(lambda: f64, cap: f64, budget: f64) -> f64 {
    let upper = 40.0 / lambda;
    let n = 40_000;
    let h = upper / n as f64;
    let f = |s: f64| (cap * s).min(budget) * lambda * (-lambda * s).exp();
    let mut sum = f(0.0) + f(upper);
    for i in 1..n {
        sum += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * h / 3.0
}

#[test]
fn exponential_surface_tracks_quadrature_everywhere() {
    let (lambda, cap, steps) = (1.7, 1.3, 400);
    let grid = TimeGrid::new(1.0, steps).unwrap();
    let model = build_model(&ModelParams::indicator_exponential(lambda), &grid).unwrap();
    let volume = VolumeGrid::new(&grid, cap).unwrap();
    let surface = solve_dp(&model, &volume).unwrap();
    for i in (0..steps).step_by(37) {
        for j in (0..volume.len()).step_by(29) {
            let t = grid.time(i);
            let budget = (j as f64 * volume.dy()).min(cap * (1.0 - t));
            // min(b, L * min(rho, T - t)) = min(b, L * rho) once b <= L * (T - t)
            let expected = exponential_oracle(lambda, cap, budget);
            let got = surface.value(i, 0, j);
            assert!((got - expected).abs() <= cap * grid.dt() + 1e-6, "i={i} j={j}: {got} vs {expected}");
        }
    }
}
