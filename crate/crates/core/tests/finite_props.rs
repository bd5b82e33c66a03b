use impact_game::finite::{self, KernelMatrices, Strategy as Schedule};
use impact_game::model::{DecayKernel, GameParams, TimeGrid, VarianceFunction};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn kernel() -> impl Strategy<Value = DecayKernel> {
    prop_oneof![
        (0.1f64..5.0).prop_map(|r| DecayKernel::exponential(r).unwrap()),
        (0.2f64..3.0).prop_map(|p| DecayKernel::power_law(p).unwrap()),
    ]
}

fn game() -> impl Strategy<Value = (GameParams, Vec<f64>)> {
    (1usize..=5, 0usize..=25, 0.0f64..5.0, 0.0f64..1.0, kernel(), 0.1f64..2.0, -5.0f64..5.0).prop_flat_map(
        |(n, intervals, gamma, theta, kernel, sigma, s0)| {
            let params = GameParams::new(
                n,
                gamma,
                theta,
                kernel,
                VarianceFunction::bachelier(sigma).unwrap(),
                TimeGrid::equidistant(intervals, 1.0).unwrap(),
            )
            .unwrap()
            .with_s0(s0)
            .unwrap();
            (Just(params), prop::collection::vec(-2.0f64..2.0, n))
        },
    )
}

fn others_of(strategies: &[Schedule], i: usize) -> Vec<Schedule> {
    strategies.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, s)| s.clone()).collect()
}

// Entrywise definition of the matrices, independent of the library builder.
fn direct_matrices(p: &GameParams) -> (DMatrix<f64>, DMatrix<f64>) {
    let t = p.grid().times();
    let m = t.len();
    let g = |x: f64| p.kernel().eval(x).unwrap();
    let phi = |x: f64| p.variance().eval(x).unwrap();
    let mut full = DMatrix::zeros(m, m);
    let mut tilde = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            full[(i, j)] = g((t[i] - t[j]).abs()) + p.gamma() * phi(t[i].min(t[j]));
            if i > j {
                tilde[(i, j)] = g(t[i] - t[j]);
            }
        }
        full[(i, i)] += 2.0 * p.theta();
        tilde[(i, i)] = 0.5 * g(0.0);
    }
    (full, tilde)
}

// Expected cost plus (γ/2)·variance written out as double sums over the grid.
fn direct_mv_cost(p: &GameParams, own: &[f64], others: &[Vec<f64>]) -> f64 {
    let t = p.grid().times();
    let m = t.len();
    let g = |x: f64| p.kernel().eval(x).unwrap();
    let phi = |x: f64| p.variance().eval(x).unwrap();
    let inventory: f64 = own.iter().sum();
    let mut cost = -inventory * p.s0();
    for k in 0..m {
        cost += (0.5 * g(0.0) + p.theta()) * own[k] * own[k];
        for l in 0..k {
            cost += g(t[k] - t[l]) * own[k] * own[l];
        }
        for other in others {
            cost += 0.5 * g(0.0) * own[k] * other[k];
            for l in 0..k {
                cost += g(t[k] - t[l]) * own[k] * other[l];
            }
        }
    }
    let mut var = 0.0;
    for k in 0..m {
        for l in 0..m {
            var += own[k] * own[l] * phi(t[k].min(t[l]));
        }
    }
    cost + 0.5 * p.gamma() * var
}

// Bordered KKT system [[Γ, 1], [1ᵀ, 0]] for the constrained minimizer.
fn kkt_best_response(p: &GameParams, others: &[Schedule], inventory: f64) -> DVector<f64> {
    let (full, tilde) = direct_matrices(p);
    let m = full.nrows();
    let mut a = DMatrix::zeros(m + 1, m + 1);
    a.view_mut((0, 0), (m, m)).copy_from(&full);
    let mut rhs = DVector::zeros(m + 1);
    let total = others.iter().fold(DVector::zeros(m), |acc, s| acc + &s.trades);
    rhs.rows_mut(0, m).copy_from(&(-(&tilde * total)));
    for k in 0..m {
        a[(k, m)] = 1.0;
        a[(m, k)] = 1.0;
    }
    rhs[m] = inventory;
    a.lu().solve(&rhs).unwrap().rows(0, m).into_owned()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn matrices_match_entrywise_definition((p, _) in game()) {
        let mats = KernelMatrices::build(&p);
        let (full, tilde) = direct_matrices(&p);
        prop_assert!((&mats.gamma_full - full).amax() <= 1e-14);
        prop_assert!((&mats.gamma_tilde - tilde).amax() <= 1e-14);
        prop_assert_eq!(&mats.gamma_full, &mats.gamma_full.transpose());
    }

    #[test]
    fn tilde_splits_the_undamped_kernel((p, _) in game()) {
        let plain = p.with_gamma(0.0).unwrap().with_theta(0.0).unwrap();
        let mats = KernelMatrices::build(&plain);
        let sum = &mats.gamma_tilde + mats.gamma_tilde.transpose();
        prop_assert!((sum - &mats.gamma_full).amax() <= 1e-15);
    }

    #[test]
    fn systems_are_positive((p, _) in game(), seed in 0u64..1000) {
        let mats = KernelMatrices::build(&p);
        let m = mats.size();
        let x = DVector::from_fn(m, |i, _| ((i as u64 * 7919 + seed) % 13) as f64 - 6.0 + 0.5);
        for a in [mats.gamma_full.clone(), mats.v_system(p.n()), mats.w_system()] {
            prop_assert!(x.dot(&(&a * &x)) > 0.0);
        }
    }

    #[test]
    fn equilibrium_is_a_fixed_point_of_best_response((p, inv) in game()) {
        let eq = finite::nash_equilibrium(&p, &inv).unwrap();
        prop_assert!(eq.foc_residual <= 1e-10);
        for (i, s) in eq.strategies.iter().enumerate() {
            let others = others_of(&eq.strategies, i);
            let br = finite::best_response(&others, inv[i], &p).unwrap();
            prop_assert!((&br.trades - &s.trades).amax() <= 1e-9);
            let kkt = kkt_best_response(&p, &others, inv[i]);
            prop_assert!((&br.trades - kkt).amax() <= 1e-8 * s.trades.amax().max(1.0));
        }
    }

    #[test]
    fn mv_cost_matches_double_sums((p, inv) in game()) {
        let eq = finite::nash_equilibrium(&p, &inv).unwrap();
        for (i, s) in eq.strategies.iter().enumerate() {
            let others = others_of(&eq.strategies, i);
            let raw: Vec<Vec<f64>> = others.iter().map(|o| o.trades.iter().copied().collect()).collect();
            let own: Vec<f64> = s.trades.iter().copied().collect();
            let direct = direct_mv_cost(&p, &own, &raw);
            let lib = finite::mv_cost(s, &others, &p).unwrap();
            prop_assert!((direct - lib).abs() <= 1e-10 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn deviations_cost_exactly_the_gap((p, inv) in game(), shift in prop::collection::vec(-1.0f64..1.0, 26)) {
        let m = p.grid().len();
        prop_assume!(m >= 2);
        let mats = KernelMatrices::build(&p);
        let eq = finite::nash_equilibrium(&p, &inv).unwrap();
        let mut d = DVector::from_fn(m, |k, _| shift[k]);
        let mean = d.mean();
        d.add_scalar_mut(-mean);
        prop_assume!(d.amax() > 1e-6);
        let star = &eq.strategies[0];
        let candidate = Schedule::new(&star.trades + &d, star.inventory).unwrap();
        let others = others_of(&eq.strategies, 0);
        let increase = mats.mv_cost(p.s0(), &candidate, &others).unwrap() - mats.mv_cost(p.s0(), star, &others).unwrap();
        let gap = finite::optimality_gap(&candidate, star, eq.multipliers[0], &mats).unwrap();
        prop_assert!(increase > 0.0);
        prop_assert!((increase - gap).abs() <= 1e-9);
    }

    #[test]
    fn equilibrium_is_linear_in_inventories((p, x) in game(), y_seed in prop::collection::vec(-2.0f64..2.0, 5), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let y = &y_seed[..p.n()];
        let combo: Vec<f64> = x.iter().zip(y).map(|(x, y)| a * x + b * y).collect();
        let ex = finite::nash_equilibrium(&p, &x).unwrap();
        let ey = finite::nash_equilibrium(&p, y).unwrap();
        let ec = finite::nash_equilibrium(&p, &combo).unwrap();
        for i in 0..p.n() {
            let lin = &ex.strategies[i].trades * a + &ey.strategies[i].trades * b;
            prop_assert!((&ec.strategies[i].trades - lin).amax() <= 1e-9);
        }
    }

    #[test]
    fn strategies_do_not_depend_on_initial_price((p, inv) in game(), s0 in -100.0f64..100.0) {
        let a = finite::nash_equilibrium(&p, &inv).unwrap();
        let b = finite::nash_equilibrium(&p.clone().with_s0(s0).unwrap(), &inv).unwrap();
        for (sa, sb) in a.strategies.iter().zip(&b.strategies) {
            prop_assert_eq!(&sa.trades, &sb.trades);
        }
    }

    #[test]
    fn w_does_not_depend_on_agent_count((p, _) in game(), extra in 1usize..4) {
        let w1 = finite::compute_w(&KernelMatrices::build(&p)).unwrap().value;
        let w2 = finite::compute_w(&KernelMatrices::build(&p.with_agents(p.n() + extra).unwrap())).unwrap().value;
        prop_assert_eq!(w1, w2);
    }

    #[test]
    fn base_vectors_sum_to_one((p, _) in game()) {
        let mats = KernelMatrices::build(&p);
        let v = finite::compute_v(&mats, p.n()).unwrap().value;
        let w = finite::compute_w(&mats).unwrap().value;
        prop_assert!((v.sum() - 1.0).abs() <= 1e-12);
        prop_assert!((w.sum() - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn single_agent_v_has_no_sell_backs_at_zero_cost() {
    for rho in [0.5, 1.0, 3.0] {
        for gamma in [0.0, 1.0, 4.0] {
            let p = GameParams::standard(1, 80, gamma, 0.0, rho, 1.0).unwrap();
            let v = finite::compute_v(&KernelMatrices::build(&p), 1).unwrap().value;
            assert!(v.min() >= -1e-12 * v.amax(), "rho={rho} gamma={gamma}");
        }
    }
}

#[test]
fn closed_form_w_on_a_small_sweep() {
    for rho in [0.5, 2.0] {
        for intervals in [1, 2, 7, 40] {
            let p = GameParams::standard(3, intervals, 0.0, 0.25, rho, 1.0).unwrap();
            let w = finite::compute_w(&KernelMatrices::build(&p)).unwrap().value;
            let reference = finite::w_closed_form(intervals, rho).unwrap();
            assert!((w - reference).amax() <= 1e-12);
        }
    }
}
