use impact_game::finite::{self, KernelMatrices, Strategy as Schedule};
use impact_game::model::{DecayKernel, GameParams, TimeGrid, VarianceFunction};
use impact_game::numeric;
use impact_game::simulation::{self, Simulator};
use nalgebra::DVector;
use proptest::prelude::*;

fn game(n: usize, intervals: usize, gamma: f64, theta: f64, power: bool) -> GameParams {
    let kernel = if power { DecayKernel::power_law(1.5).unwrap() } else { DecayKernel::exponential(1.3).unwrap() };
    GameParams::new(
        n,
        gamma,
        theta,
        kernel,
        VarianceFunction::bachelier(0.8).unwrap(),
        TimeGrid::equidistant(intervals, 1.0).unwrap(),
    )
    .unwrap()
}

fn schedules(trades: &[Vec<f64>]) -> Vec<Schedule> {
    trades.iter().map(|t| Schedule::from_trades(DVector::from_vec(t.clone()))).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn impacted_path_matches_double_loop(
        n in 1usize..=4,
        intervals in 0usize..=15,
        power in any::<bool>(),
        seed in any::<u64>(),
        raw in prop::collection::vec(-2.0f64..2.0, 64),
    ) {
        let p = game(n, intervals, 0.0, 0.0, power);
        let m = intervals + 1;
        let trades: Vec<Vec<f64>> = (0..n).map(|i| raw[i * 16..i * 16 + m].to_vec()).collect();
        let strategies = schedules(&trades);
        let sim = Simulator::new(&p, &strategies).unwrap();
        let s0 = sim.unaffected(seed, 3);
        let path = simulation::impacted_path(&p, &strategies, s0.clone()).unwrap();
        let t = p.grid().times();
        for k in 0..m {
            let mut impact = 0.0;
            for l in 0..k {
                for x in &trades {
                    impact += p.kernel().eval(t[k] - t[l]).unwrap() * x[l];
                }
            }
            prop_assert!((path.impacted[k] - (s0[k] - impact)).abs() <= 1e-12 * impact.abs().max(1.0));
        }
    }

    #[test]
    fn opposite_trades_leave_the_price_alone(intervals in 0usize..=15, seed in any::<u64>(), raw in prop::collection::vec(-2.0f64..2.0, 16)) {
        let p = game(2, intervals, 0.0, 0.0, false);
        let x = raw[..=intervals].to_vec();
        let minus: Vec<f64> = x.iter().map(|v| -v).collect();
        let strategies = schedules(&[x, minus]);
        let sim = Simulator::new(&p, &strategies).unwrap();
        let s0 = sim.unaffected(seed, 0);
        prop_assert_eq!(sim.price_path(s0.clone()).impacted, s0);
    }

    #[test]
    fn antithetic_paths_flip_only_the_linear_part(intervals in 0usize..=12, seed in any::<u64>(), raw in prop::collection::vec(-2.0f64..2.0, 26)) {
        let p = game(2, intervals, 1.0, 0.2, false);
        let strategies = schedules(&[raw[..=intervals].to_vec(), raw[13..14 + intervals].to_vec()]);
        let sim = Simulator::new(&p, &strategies).unwrap();
        let s0 = sim.unaffected(seed, 11);
        let flipped: Vec<f64> = s0.iter().map(|x| -x).collect();
        for (a, b) in sim.cost_parts(&s0).iter().zip(sim.cost_parts(&flipped)) {
            prop_assert_eq!(a.linear, -b.linear);
            prop_assert_eq!(a.quadratic, b.quadratic);
        }
    }

    #[test]
    fn identical_seeds_give_identical_samples(seed in any::<u64>(), count in 1u64..50) {
        let p = game(2, 6, 0.5, 0.1, true);
        let eq = finite::nash_equilibrium(&p, &[1.0, 0.3]).unwrap();
        let a = simulation::simulate_paths(&p, &eq.strategies, count, seed).unwrap();
        let b = simulation::simulate_paths(&p, &eq.strategies, count, seed).unwrap();
        prop_assert_eq!(&a, &b);
        let longer = simulation::simulate_paths(&p, &eq.strategies, count + 7, seed).unwrap();
        prop_assert_eq!(&longer[..count as usize], &a[..]);
    }
}

#[test]
fn costs_are_deterministic_without_volatility() {
    let p = GameParams::new(
        3,
        2.0,
        0.3,
        DecayKernel::exponential(1.0).unwrap(),
        VarianceFunction::bachelier(0.0).unwrap(),
        TimeGrid::equidistant(7, 1.0).unwrap(),
    )
    .unwrap()
    .with_s0(4.0)
    .unwrap();
    let eq = finite::nash_equilibrium(&p, &[1.0, -2.0, 0.5]).unwrap();
    let targets = simulation::cost_moment_targets(&p, &eq.strategies).unwrap();
    for s in simulation::simulate_paths(&p, &eq.strategies, 10, 9).unwrap() {
        for (c, (mean, _)) in s.costs.iter().zip(&targets) {
            assert!((c - mean).abs() <= 1e-12 * mean.abs().max(1.0));
        }
    }
}

#[test]
fn moments_match_closed_forms() {
    let p = game(2, 10, 0.0, 0.15, false).with_s0(2.0).unwrap();
    let eq = finite::nash_equilibrium(&p, &[0.7, -1.1]).unwrap();
    let report = simulation::validate_moments(&p, &eq.strategies, 100_000, 17).unwrap();
    assert!(report.max_abs_z() <= 3.0, "{report:?}");
}

#[test]
fn moment_targets_ignore_risk_aversion() {
    let p = game(2, 10, 0.0, 0.15, false);
    let q = p.with_gamma(3.0).unwrap();
    let eq = finite::nash_equilibrium(&q, &[1.0, 0.5]).unwrap();
    let a = simulation::cost_moment_targets(&p, &eq.strategies).unwrap();
    let b = simulation::cost_moment_targets(&q, &eq.strategies).unwrap();
    assert_eq!(a, b);
    let others = vec![eq.strategies[1].clone()];
    let mv = finite::mv_cost(&eq.strategies[0], &others, &q).unwrap();
    let (mean, var) = a[0];
    assert!((mv - (mean + 1.5 * var)).abs() <= 1e-12 * mv.abs().max(1.0));
}

#[test]
fn cara_expectation_matches_lognormal_value() {
    let p = game(2, 10, 0.5, 0.05, false).with_s0(1.0).unwrap();
    let eq = finite::nash_equilibrium(&p, &[1.0, 0.2]).unwrap();
    let report = simulation::validate_cara(&p, &eq.strategies, 100_000, 99).unwrap();
    assert!(report.max_abs_z() <= 3.0, "{report:?}");
    for a in &report.agents {
        let u = a.utility.unwrap();
        assert!((u.target - simulation::cara_utility(0.5, -(a.log_target / 0.5))).abs() < 1e-12);
    }
}

#[test]
fn cara_without_risk_aversion_is_the_mean_check() {
    let p = game(2, 10, 0.0, 0.05, false);
    let eq = finite::nash_equilibrium(&p, &[1.0, 0.2]).unwrap();
    let cara = simulation::validate_cara(&p, &eq.strategies, 5_000, 4).unwrap();
    let moments = simulation::validate_moments(&p, &eq.strategies, 5_000, 4).unwrap();
    for (c, m) in cara.agents.iter().zip(&moments.agents) {
        let u = c.utility.unwrap();
        assert_eq!(u.estimate, -m.mean.estimate);
        assert_eq!(u.target, -m.mean.target);
        assert_eq!(c.z, -m.mean.z);
    }
}

#[test]
fn large_exponents_fall_back_to_log_space() {
    let p = game(1, 4, 50.0, 0.0, false).with_s0(-20.0).unwrap();
    let eq = finite::nash_equilibrium(&p, &[1.0]).unwrap();
    let report = simulation::validate_cara(&p, &eq.strategies, 2_000, 5).unwrap();
    let a = report.agents[0];
    assert!(a.utility.is_none());
    assert!(a.log_target > simulation::EXP_GUARD);
    assert!(a.log_mean_exp.is_finite() && a.z.is_finite());
}

#[test]
fn cara_requires_bachelier() {
    let p = GameParams::new(
        1,
        1.0,
        0.0,
        DecayKernel::exponential(1.0).unwrap(),
        VarianceFunction::tabulated(vec![0.0, 1.0], vec![0.0, 2.0]).unwrap(),
        TimeGrid::equidistant(3, 1.0).unwrap(),
    )
    .unwrap();
    let eq = finite::nash_equilibrium(&p, &[1.0]).unwrap();
    assert!(simulation::validate_cara(&p, &eq.strategies, 10, 0).is_err());
    assert!(simulation::validate(&p, &eq.strategies, 10, 0).unwrap().cara.is_none());
}

#[test]
fn reduction_order_does_not_matter() {
    let p = game(2, 10, 0.5, 0.1, false);
    let eq = finite::nash_equilibrium(&p, &[1.0, 0.4]).unwrap();
    let samples = simulation::simulate_paths(&p, &eq.strategies, 20_000, 8).unwrap();
    let forward = numeric::sum(samples.iter().map(|s| s.costs[0]));
    let backward = numeric::sum(samples.iter().rev().map(|s| s.costs[0]));
    assert!((forward - backward).abs() <= 1e-12 * forward.abs());
}

#[test]
fn simulated_deviation_is_worse_than_equilibrium() {
    let gamma = 0.5;
    let p = game(2, 10, gamma, 0.1, false);
    let mats = KernelMatrices::build(&p);
    let eq = finite::nash_equilibrium(&p, &[1.0, 0.4]).unwrap();
    let star = &eq.strategies[0];
    let m = star.len();
    let d = DVector::from_fn(m, |k, _| if k % 2 == 0 { 0.3 } else { -0.3 });
    let d = &d - DVector::from_element(m, d.mean());
    let deviation = Schedule::new(&star.trades + d, star.inventory).unwrap();
    let gap = finite::optimality_gap(&deviation, star, eq.multipliers[0], &mats).unwrap();

    let count = 50_000;
    let estimate = |own: &Schedule| {
        let profile = vec![own.clone(), eq.strategies[1].clone()];
        let costs: Vec<f64> =
            simulation::simulate_paths(&p, &profile, count, 21).unwrap().iter().map(|s| s.costs[0]).collect();
        let mean = numeric::sum(costs.iter().copied()) / count as f64;
        let var = numeric::sum(costs.iter().map(|c| (c - mean).powi(2))) / (count as f64 - 1.0);
        (mean + 0.5 * gamma * var, (var / count as f64).sqrt())
    };
    let (mv_star, se_star) = estimate(star);
    let (mv_dev, se_dev) = estimate(&deviation);
    assert!(3.0 * (se_star + se_dev) < gap, "count too small for gap {gap}");
    assert!(mv_dev > mv_star, "{mv_dev} <= {mv_star}");
}
