use impact_game::finite::{self, KernelMatrices};
use impact_game::model::{DecayKernel, GameParams, TimeGrid, VarianceFunction};
use impact_game::threshold::{self, ThresholdProblem, Which, DEFAULT_RESOLUTION};

fn problem(kernel: DecayKernel, n: usize, intervals: usize, gamma: f64) -> ThresholdProblem {
    ThresholdProblem::new(n, intervals, gamma, kernel, VarianceFunction::bachelier(1.0).unwrap()).unwrap()
}

fn exp(n: usize, intervals: usize, gamma: f64) -> ThresholdProblem {
    problem(DecayKernel::exponential(1.0).unwrap(), n, intervals, gamma)
}

#[test]
fn five_agents_reach_one_independently_of_risk() {
    let thetas: Vec<f64> = [0.0, 1.0, 3.0]
        .iter()
        .map(|&g| threshold::critical_theta_v(&exp(5, 500, g), DEFAULT_RESOLUTION).unwrap().theta_star)
        .collect();
    for t in &thetas {
        assert!((t - 1.0).abs() <= 0.01, "{thetas:?}");
    }
    let spread =
        thetas.iter().fold(f64::NEG_INFINITY, |m, t| m.max(*t)) - thetas.iter().fold(f64::INFINITY, |m, t| m.min(*t));
    assert!(spread <= 0.01);
}

#[test]
fn witness_pair_brackets_the_switch() {
    for which in [Which::V, Which::W] {
        for gamma in [0.0, 2.0] {
            let p = exp(3, 120, gamma);
            let r = threshold::critical_theta(&p, which, DEFAULT_RESOLUTION).unwrap();
            assert!(r.monotone);
            let vector = |theta: f64| {
                let mats = KernelMatrices::build(&p.params(theta).unwrap());
                match which {
                    Which::V => finite::compute_v(&mats, 3).unwrap().value,
                    Which::W => finite::compute_w(&mats).unwrap().value,
                }
            };
            let above = threshold::oscillation_report(vector(r.theta_star + DEFAULT_RESOLUTION).as_slice()).unwrap();
            let below = threshold::oscillation_report(vector(r.theta_star - DEFAULT_RESOLUTION).as_slice()).unwrap();
            assert!(!above.oscillating && below.oscillating, "{which} gamma={gamma}");
            assert!(r.bracket.1 - r.bracket.0 <= DEFAULT_RESOLUTION);
        }
    }
}

#[test]
fn risk_aversion_lowers_the_w_threshold() {
    let calm = threshold::critical_theta_w(&exp(2, 100, 0.0), DEFAULT_RESOLUTION).unwrap().theta_star;
    let risky = threshold::critical_theta_w(&exp(2, 100, 10.0), DEFAULT_RESOLUTION).unwrap().theta_star;
    assert!(risky < calm);
}

#[test]
fn power_law_thresholds_stay_near_a_quarter() {
    let kernel = DecayKernel::power_law(2.0).unwrap();
    let v = threshold::critical_theta_v(&problem(kernel, 2, 200, 0.0), DEFAULT_RESOLUTION).unwrap().theta_star;
    let w = threshold::critical_theta_w(&problem(kernel, 2, 200, 0.0), DEFAULT_RESOLUTION).unwrap().theta_star;
    assert!((v - 0.25).abs() <= 0.025, "theta_v = {v}");
    assert!((w - 0.25).abs() <= 0.025, "theta_w = {w}");
}

#[test]
fn sweeps_are_deterministic_and_ordered() {
    let kernel = DecayKernel::exponential(1.0).unwrap();
    let variance = VarianceFunction::bachelier(1.0).unwrap();
    let points = threshold::grid(&[2, 3], &[40, 80], &[0.0, 1.0]);
    let a = threshold::sweep(&points, Which::V, kernel, &variance, 1e-3);
    let b = threshold::sweep(&points, Which::V, kernel, &variance, 1e-3);
    assert_eq!(a, b);
    for (row, point) in a.iter().zip(&points) {
        assert_eq!(&row.point, point);
        let r = row.result.as_ref().unwrap();
        assert_eq!((r.n, r.intervals, r.gamma), (point.n, point.intervals, point.gamma));
    }
}

#[test]
fn w_rows_of_a_sweep_ignore_agent_count() {
    let kernel = DecayKernel::exponential(1.0).unwrap();
    let variance = VarianceFunction::bachelier(1.0).unwrap();
    let rows = threshold::sweep(&threshold::grid(&[2, 6], &[60], &[1.0]), Which::W, kernel, &variance, 1e-3);
    let t: Vec<f64> = rows.iter().map(|r| r.result.as_ref().unwrap().theta_star).collect();
    assert_eq!(t[0], t[1]);
}

#[test]
fn v_thresholds_grow_linearly_in_agents() {
    let t: Vec<f64> = (2..=5)
        .map(|n| threshold::critical_theta_v(&exp(n, 300, 0.0), DEFAULT_RESOLUTION).unwrap().theta_star)
        .collect();
    for pair in t.windows(2) {
        assert!((pair[1] - pair[0] - 0.25).abs() < 0.01, "{t:?}");
    }
}

#[test]
fn convergence_flag_compares_against_half_grid() {
    let r = threshold::critical_theta_v(&exp(2, 40, 0.0), 1e-3).unwrap();
    let half = threshold::critical_theta_v(&exp(2, 20, 0.0), 1e-3).unwrap();
    assert_eq!(r.converged, (r.theta_star - half.theta_star).abs() <= 2e-3);
}

#[test]
fn v_oscillates_without_transaction_costs() {
    let p = GameParams::new(
        2,
        0.0,
        0.0,
        DecayKernel::exponential(1.0).unwrap(),
        VarianceFunction::bachelier(1.0).unwrap(),
        TimeGrid::equidistant(100, 1.0).unwrap(),
    )
    .unwrap();
    let v = finite::compute_v(&KernelMatrices::build(&p), 2).unwrap().value;
    let r = threshold::oscillation_report(v.as_slice()).unwrap();
    assert!(r.oscillating && r.negative_mass > 0.0);
}
