//! Finite-horizon market impact game.
//!
//! With `Γ^{γ,θ}_{ij} = G(|t_i − t_j|) + γ φ(t_i ∧ t_j) + 2θ δ_{ij}` and `Γ̃`
//! the lower triangle of `Γ^{0,0}` with halved diagonal, the unique
//! mean-variance Nash equilibrium is
//!
//! ```text
//! ξ*_i = X̄ v + (X_i − X̄) w,
//! v ∝ [Γ^{γ,θ} + (n−1) Γ̃]⁻¹ 1,   w ∝ [Γ^{γ,θ} − Γ̃]⁻¹ 1,
//! ```
//!
//! both normalized to unit sum. The module also carries an independent
//! best-response solver and the optimality-gap identity used to certify
//! equilibria.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, Conditioned, Factorized};
use crate::model::{DecayKernel, GameParams};
use crate::numeric;

/// The pair `(Γ^{γ,θ}, Γ̃)` on one time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrices {
    pub gamma_full: DMatrix<f64>,
    pub gamma_tilde: DMatrix<f64>,
}

impl KernelMatrices {
    pub fn build(params: &GameParams) -> Self {
        let t = params.grid().times();
        let size = t.len();
        let kernel = params.kernel();
        let phi = params.variance();
        let (gamma, theta) = (params.gamma(), params.theta());

        let g = DMatrix::from_fn(size, size, |i, j| kernel.at((t[i] - t[j]).abs()));
        let gamma_full = DMatrix::from_fn(size, size, |i, j| {
            let mut x = g[(i, j)] + gamma * phi.at(t[i].min(t[j]));
            if i == j {
                x += 2.0 * theta;
            }
            x
        });
        let gamma_tilde = DMatrix::from_fn(size, size, |i, j| match i.cmp(&j) {
            std::cmp::Ordering::Less => 0.0,
            std::cmp::Ordering::Equal => 0.5 * g[(i, i)],
            std::cmp::Ordering::Greater => g[(i, j)],
        });
        KernelMatrices { gamma_full, gamma_tilde }
    }

    pub fn size(&self) -> usize {
        self.gamma_full.nrows()
    }

    /// `Γ^{γ,θ} + (n−1) Γ̃`, the system behind `v`.
    pub fn v_system(&self, n: usize) -> DMatrix<f64> {
        &self.gamma_full + &self.gamma_tilde * (n as f64 - 1.0)
    }

    /// `Γ^{γ,θ} − Γ̃`, the system behind `w`.
    pub fn w_system(&self) -> DMatrix<f64> {
        &self.gamma_full - &self.gamma_tilde
    }

    /// Mean-variance cost `−X S_0 + ½ ξᵀΓξ + ξᵀ Γ̃ Σ_{j≠i} ξ_j`.
    pub fn mv_cost(&self, s0: f64, strategy: &Strategy, others: &[Strategy]) -> Result<f64> {
        self.check_len(strategy)?;
        let xi = &strategy.trades;
        let mut own = 0.5 * xi.dot(&(&self.gamma_full * xi));
        if !others.is_empty() {
            let total = self.aggregate(others)?;
            own += xi.dot(&(&self.gamma_tilde * total));
        }
        Ok(-strategy.inventory * s0 + own)
    }

    /// Unique minimizer of the mean-variance cost over `{ξ : 1ᵀξ = X}` given
    /// the other agents' strategies.
    pub fn best_response(&self, others: &[Strategy], inventory: f64) -> Result<Strategy> {
        let size = self.size();
        let f = Factorized::new(self.gamma_full.clone())?;
        let y = f.solve(&DVector::from_element(size, 1.0))?;
        let mut rhs = DVector::zeros(size);
        if !others.is_empty() {
            rhs = -(&self.gamma_tilde * self.aggregate(others)?);
        }
        let z = f.solve(&rhs)?;
        let lambda = (inventory - numeric::sum(z.iter().copied())) / numeric::sum(y.iter().copied());
        Strategy::new(z + y * lambda, inventory)
    }

    fn check_len(&self, s: &Strategy) -> Result<()> {
        if s.len() != self.size() {
            return Err(Error::Domain(format!(
                "strategy has {} trades but the grid has {} times",
                s.len(),
                self.size()
            )));
        }
        Ok(())
    }

    fn aggregate(&self, strategies: &[Strategy]) -> Result<DVector<f64>> {
        let mut total = DVector::zeros(self.size());
        for s in strategies {
            self.check_len(s)?;
            total += &s.trades;
        }
        Ok(total)
    }
}

pub fn build_matrices(params: &GameParams) -> KernelMatrices {
    KernelMatrices::build(params)
}

/// Shares sold at each grid time (negative entries are purchases) together
/// with the inventory they liquidate.
#[derive(Debug, Clone, PartialEq)]
pub struct Strategy {
    pub trades: DVector<f64>,
    pub inventory: f64,
}

impl Strategy {
    /// Checks `1ᵀξ = X` to within `1e-9 · max(1, |X|)`.
    pub fn new(trades: DVector<f64>, inventory: f64) -> Result<Self> {
        let total = numeric::sum(trades.iter().copied());
        if !((total - inventory).abs() <= 1e-9 * inventory.abs().max(1.0)) {
            return Err(Error::Domain(format!("trades sum to {total}, inventory is {inventory}")));
        }
        Ok(Strategy { trades, inventory })
    }

    /// A strategy liquidating exactly what its trades add up to.
    pub fn from_trades(trades: DVector<f64>) -> Self {
        let inventory = numeric::sum(trades.iter().copied());
        Strategy { trades, inventory }
    }

    pub fn zeros(len: usize) -> Self {
        Strategy { trades: DVector::zeros(len), inventory: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.trades.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trades.is_empty()
    }
}

/// Equilibrium of one finite-horizon game.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumSolution {
    pub v: DVector<f64>,
    pub w: DVector<f64>,
    pub strategies: Vec<Strategy>,
    /// Lagrange multipliers `α_i`, the mean of `Γξ*_i + Γ̃Σ_{j≠i}ξ*_j`.
    pub multipliers: Vec<f64>,
    /// Largest normwise relative deviation of that vector from `α_i 1`.
    pub foc_residual: f64,
    pub mv_costs: Vec<f64>,
    pub condition_v: f64,
    pub condition_w: f64,
}

impl EquilibriumSolution {
    pub fn ill_conditioned(&self) -> bool {
        !(self.condition_v.max(self.condition_w) <= linalg::ILL_CONDITIONED)
    }
}

fn normalized_solution(system: DMatrix<f64>) -> Result<Conditioned<DVector<f64>>> {
    let size = system.nrows();
    let sol = linalg::solve_conditioned(system, &DVector::from_element(size, 1.0))?;
    let total = numeric::sum(sol.value.iter().copied());
    if !(total.is_finite() && total != 0.0) {
        return Err(Error::Singular { condition: sol.condition });
    }
    Ok(sol.map(|x| x / total))
}

/// `v`: the normalized common strategy when all inventories are equal.
pub fn compute_v(mats: &KernelMatrices, n: usize) -> Result<Conditioned<DVector<f64>>> {
    if n == 0 {
        return Err(Error::invalid("n", "need at least one agent"));
    }
    normalized_solution(mats.v_system(n))
}

/// `w`: the normalized common strategy when inventories sum to zero. Does not
/// depend on the number of agents.
pub fn compute_w(mats: &KernelMatrices) -> Result<Conditioned<DVector<f64>>> {
    normalized_solution(mats.w_system())
}

/// `w` at `θ = 1/4, γ = 0` for `G(t) = e^{-ρt}` on the equidistant grid of
/// `[0, 1]` with `intervals` steps: flat up to the last trade, which carries
/// the remainder.
pub fn w_closed_form(intervals: usize, rho: f64) -> Result<DVector<f64>> {
    if intervals < 1 {
        return Err(Error::Domain("closed-form w needs at least one interval".into()));
    }
    DecayKernel::exponential(rho)?;
    let n = intervals as f64;
    let a = -(-rho / n).exp_m1();
    let denom = n * a + 1.0;
    let mut w = DVector::from_element(intervals + 1, a / denom);
    w[intervals] = 1.0 / denom;
    Ok(w)
}

pub fn nash_equilibrium(params: &GameParams, inventories: &[f64]) -> Result<EquilibriumSolution> {
    let n = params.n();
    if inventories.len() != n {
        return Err(Error::invalid("inventories", format!("expected {n} inventories, got {}", inventories.len())));
    }
    if inventories.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("inventories", "must be finite"));
    }
    let mats = KernelMatrices::build(params);
    let v = compute_v(&mats, n)?;
    let w = compute_w(&mats)?;
    let mean = numeric::sum(inventories.iter().copied()) / n as f64;

    let strategies = inventories
        .iter()
        .map(|&x| Strategy::new(&v.value * mean + &w.value * (x - mean), x))
        .collect::<Result<Vec<_>>>()?;

    let total = strategies.iter().fold(DVector::zeros(mats.size()), |acc, s| acc + &s.trades);
    let norm_full = inf_norm(&mats.gamma_full);
    let norm_tilde = inf_norm(&mats.gamma_tilde);
    let mut multipliers = Vec::with_capacity(n);
    let mut foc_residual: f64 = 0.0;
    for s in &strategies {
        let rest = &total - &s.trades;
        let r = &mats.gamma_full * &s.trades + &mats.gamma_tilde * &rest;
        let alpha = numeric::sum(r.iter().copied()) / r.len() as f64;
        let deviation = r.iter().map(|x| (x - alpha).abs()).fold(0.0, f64::max);
        let scale = norm_full * s.trades.amax() + norm_tilde * rest.amax();
        if scale > 0.0 {
            foc_residual = foc_residual.max(deviation / scale);
        }
        multipliers.push(alpha);
    }

    let mut mv_costs = Vec::with_capacity(n);
    for (i, s) in strategies.iter().enumerate() {
        let others: Vec<Strategy> =
            strategies.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, s)| s.clone()).collect();
        mv_costs.push(mats.mv_cost(params.s0(), s, &others)?);
    }

    Ok(EquilibriumSolution {
        v: v.value,
        w: w.value,
        strategies,
        multipliers,
        foc_residual,
        mv_costs,
        condition_v: v.condition,
        condition_w: w.condition,
    })
}

pub fn mv_cost(strategy: &Strategy, others: &[Strategy], params: &GameParams) -> Result<f64> {
    KernelMatrices::build(params).mv_cost(params.s0(), strategy, others)
}

pub fn best_response(others: &[Strategy], inventory: f64, params: &GameParams) -> Result<Strategy> {
    KernelMatrices::build(params).best_response(others, inventory)
}

/// `α 1ᵀ(η − ξ*) + ½ (η − ξ*)ᵀ Γ^{γ,θ} (η − ξ*)`: the cost increase from
/// deviating to `candidate` while the co-players stay at equilibrium.
pub fn optimality_gap(
    candidate: &Strategy,
    equilibrium: &Strategy,
    multiplier: f64,
    mats: &KernelMatrices,
) -> Result<f64> {
    mats.check_len(candidate)?;
    mats.check_len(equilibrium)?;
    let scale = candidate.inventory.abs().max(equilibrium.inventory.abs()).max(1.0);
    if (candidate.inventory - equilibrium.inventory).abs() > 1e-9 * scale {
        return Err(Error::Domain(format!(
            "candidate liquidates {} but the equilibrium strategy liquidates {}",
            candidate.inventory, equilibrium.inventory
        )));
    }
    let d = &candidate.trades - &equilibrium.trades;
    let linear = multiplier * numeric::sum(d.iter().copied());
    let quadratic = 0.5 * d.dot(&(&mats.gamma_full * &d));
    Ok(linear + quadratic)
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}
