//! Monte Carlo realization of execution costs with Gaussian unaffected prices.
//!
//! The unaffected price moves by independent Gaussian increments with
//! variance `φ(t_k) − φ(t_{k−1})`. Given deterministic strategies, the
//! impacted price is
//!
//! ```text
//! S_k = S⁰_k − Σ_{m<k} G(t_k − t_m) Σ_i ξ_{i,m}
//! ```
//!
//! and agent `i` pays
//!
//! ```text
//! Σ_k [½G(0)ξ²_{i,k} − S_k ξ_{i,k} + ½G(0) ξ_{i,k} Σ_{j≠i} ξ_{j,k} + θ ξ²_{i,k}].
//! ```
//!
//! Path `p` draws from stream `p` of a ChaCha8 generator keyed by the seed, so
//! every path is reproducible on its own and the parallel schedule does not
//! matter.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::finite::{KernelMatrices, Strategy};
use crate::model::GameParams;
use crate::numeric::{self, CompensatedSum};

/// Above this exponent the CARA comparison is reported in log space only.
pub const EXP_GUARD: f64 = 500.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PricePath {
    pub unaffected: Vec<f64>,
    pub impacted: Vec<f64>,
}

/// Realized cost split into the part linear in `S⁰` and the rest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostParts {
    /// `−Σ_k S⁰_k ξ_{i,k}`.
    pub linear: f64,
    /// Impact, latency and transaction-cost terms; path independent.
    pub quadratic: f64,
}

impl CostParts {
    pub fn total(&self) -> f64 {
        self.linear + self.quadratic
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostSample {
    pub path: u64,
    pub costs: Vec<f64>,
}

/// Precomputed per-instance state shared by all paths.
#[derive(Debug, Clone)]
pub struct Simulator {
    s0: f64,
    increment_sd: Vec<f64>,
    trades: Vec<Vec<f64>>,
    impact: Vec<f64>,
    quadratic: Vec<f64>,
}

impl Simulator {
    pub fn new(params: &GameParams, strategies: &[Strategy]) -> Result<Self> {
        let times = params.grid().times();
        let len = times.len();
        if strategies.is_empty() {
            return Err(Error::invalid("strategies", "need at least one strategy"));
        }
        if let Some(s) = strategies.iter().find(|s| s.len() != len) {
            return Err(Error::invalid("strategies", format!("strategy of length {} on a grid of {len}", s.len())));
        }
        let phi = times.iter().map(|&t| params.variance().eval(t)).collect::<Result<Vec<_>>>()?;
        let increment_sd =
            phi.iter().enumerate().map(|(k, &p)| (p - if k == 0 { 0.0 } else { phi[k - 1] }).max(0.0).sqrt()).collect();

        let trades: Vec<Vec<f64>> = strategies.iter().map(|s| s.trades.iter().copied().collect()).collect();
        let aggregate: Vec<f64> = (0..len).map(|k| numeric::sum(trades.iter().map(|x| x[k]))).collect();
        let kernel = params.kernel();
        let g0 = kernel.eval(0.0)?;
        let mut impact = vec![0.0; len];
        for k in 0..len {
            let mut acc = CompensatedSum::new();
            for m in 0..k {
                acc.add(kernel.eval(times[k] - times[m])? * aggregate[m]);
            }
            impact[k] = acc.value();
        }
        let theta = params.theta();
        let quadratic = trades
            .iter()
            .map(|x| {
                numeric::sum((0..len).map(|k| {
                    let others = aggregate[k] - x[k];
                    (0.5 * g0 + theta) * x[k] * x[k] + impact[k] * x[k] + 0.5 * g0 * x[k] * others
                }))
            })
            .collect();
        Ok(Simulator { s0: params.s0(), increment_sd, trades, impact, quadratic })
    }

    pub fn agents(&self) -> usize {
        self.trades.len()
    }

    pub fn unaffected(&self, seed: u64, path: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path);
        let mut price = self.s0;
        self.increment_sd
            .iter()
            .map(|sd| {
                let z: f64 = StandardNormal.sample(&mut rng);
                price += sd * z;
                price
            })
            .collect()
    }

    pub fn price_path(&self, unaffected: Vec<f64>) -> PricePath {
        let impacted = unaffected.iter().zip(&self.impact).map(|(s, i)| s - i).collect();
        PricePath { unaffected, impacted }
    }

    pub fn cost_parts(&self, unaffected: &[f64]) -> Vec<CostParts> {
        self.trades
            .iter()
            .zip(&self.quadratic)
            .map(|(x, &quadratic)| CostParts { linear: -numeric::dot(unaffected, x), quadratic })
            .collect()
    }

    pub fn sample(&self, seed: u64, path: u64) -> CostSample {
        let s = self.unaffected(seed, path);
        CostSample { path, costs: self.cost_parts(&s).iter().map(CostParts::total).collect() }
    }

    pub fn run(&self, count: u64, seed: u64) -> Result<Vec<CostSample>> {
        if count == 0 {
            return Err(Error::Domain("need at least one path".into()));
        }
        Ok((0..count).into_par_iter().map(|p| self.sample(seed, p)).collect())
    }
}

pub fn simulate_paths(params: &GameParams, strategies: &[Strategy], count: u64, seed: u64) -> Result<Vec<CostSample>> {
    Simulator::new(params, strategies)?.run(count, seed)
}

/// Impacted path recomputed from the price-impact formula.
pub fn impacted_path(params: &GameParams, strategies: &[Strategy], unaffected: Vec<f64>) -> Result<PricePath> {
    if unaffected.len() != params.grid().len() {
        return Err(Error::invalid("unaffected", "length must match the grid"));
    }
    Ok(Simulator::new(params, strategies)?.price_path(unaffected))
}

/// `(x − target)/se`, with a vanishing standard error read as agreement when
/// the difference is round-off.
pub fn z_score(estimate: f64, target: f64, standard_error: f64) -> f64 {
    let diff = estimate - target;
    if standard_error > 0.0 {
        diff / standard_error
    } else if diff.abs() <= 1e-12 * target.abs().max(estimate.abs()).max(1.0) {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparison {
    pub estimate: f64,
    pub target: f64,
    pub standard_error: f64,
    pub z: f64,
}

impl Comparison {
    fn new(estimate: f64, target: f64, standard_error: f64) -> Self {
        Comparison { estimate, target, standard_error, z: z_score(estimate, target, standard_error) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentMoments {
    pub mean: Comparison,
    pub variance: Comparison,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub seed: u64,
    pub count: u64,
    pub agents: Vec<AgentMoments>,
}

impl MomentReport {
    pub fn max_abs_z(&self) -> f64 {
        self.agents.iter().flat_map(|a| [a.mean.z.abs(), a.variance.z.abs()]).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AgentCara {
    /// Sample mean of `u_γ(−𝒞)` and its target `u_γ(−MV_γ)`, absent when
    /// `γ · cost` is too large to exponentiate.
    pub utility: Option<Comparison>,
    /// `ln E[e^{γ𝒞}]`: sample estimate and the Gaussian value `γE + γ²V/2`.
    pub log_mean_exp: f64,
    pub log_target: f64,
    /// z-score of the scaled comparison `E[e^{γ𝒞 − s}]` against its target,
    /// sign-adjusted to refer to the utility.
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaraReport {
    pub seed: u64,
    pub count: u64,
    pub gamma: f64,
    pub agents: Vec<AgentCara>,
}

impl CaraReport {
    pub fn max_abs_z(&self) -> f64 {
        self.agents.iter().map(|a| a.z.abs()).fold(0.0, f64::max)
    }
}

/// Closed-form mean and variance of each agent's realized cost.
pub fn cost_moment_targets(params: &GameParams, strategies: &[Strategy]) -> Result<Vec<(f64, f64)>> {
    let mats = KernelMatrices::build(&params.with_gamma(0.0)?);
    let times = params.grid().times();
    let phi = times.iter().map(|&t| params.variance().eval(t)).collect::<Result<Vec<_>>>()?;
    strategies
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let others: Vec<Strategy> =
                strategies.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, s)| s.clone()).collect();
            let mean = mats.mv_cost(params.s0(), s, &others)?;
            let x = &s.trades;
            let mut var = CompensatedSum::new();
            for p in 0..x.len() {
                for q in 0..x.len() {
                    var.add(x[p] * x[q] * phi[p.min(q)]);
                }
            }
            Ok((mean, var.value()))
        })
        .collect()
}

fn agent_costs(samples: &[CostSample], agent: usize) -> Vec<f64> {
    samples.iter().map(|s| s.costs[agent]).collect()
}

fn mean_and_se(x: &[f64]) -> (f64, f64) {
    let count = x.len() as f64;
    let mean = numeric::sum(x.iter().copied()) / count;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let var = numeric::sum(x.iter().map(|c| (c - mean) * (c - mean))) / (count - 1.0);
    (mean, (var / count).sqrt())
}

/// Sample variance and the standard error of that estimate from the fourth
/// central moment.
fn variance_and_se(x: &[f64]) -> (f64, f64) {
    let count = x.len() as f64;
    if x.len() < 2 {
        return (0.0, 0.0);
    }
    let mean = numeric::sum(x.iter().copied()) / count;
    let m2 = numeric::sum(x.iter().map(|c| (c - mean).powi(2))) / count;
    let m4 = numeric::sum(x.iter().map(|c| (c - mean).powi(4))) / count;
    let var = m2 * count / (count - 1.0);
    (var, ((m4 - m2 * m2).max(0.0) / count).sqrt())
}

pub fn moments_from_samples(
    params: &GameParams,
    strategies: &[Strategy],
    samples: &[CostSample],
    seed: u64,
) -> Result<MomentReport> {
    let targets = cost_moment_targets(params, strategies)?;
    let agents = targets
        .iter()
        .enumerate()
        .map(|(i, &(mean_target, var_target))| {
            let costs = agent_costs(samples, i);
            let (mean, mean_se) = mean_and_se(&costs);
            let (var, var_se) = variance_and_se(&costs);
            AgentMoments {
                mean: Comparison::new(mean, mean_target, mean_se),
                variance: Comparison::new(var, var_target, var_se),
            }
        })
        .collect();
    Ok(MomentReport { seed, count: samples.len() as u64, agents })
}

pub fn validate_moments(params: &GameParams, strategies: &[Strategy], count: u64, seed: u64) -> Result<MomentReport> {
    let samples = simulate_paths(params, strategies, count, seed)?;
    moments_from_samples(params, strategies, &samples, seed)
}

/// `u_γ(x) = (1 − e^{−γx})/γ` for `γ > 0` and `−x` for `γ = 0`.
pub fn cara_utility(gamma: f64, x: f64) -> f64 {
    if gamma == 0.0 {
        -x
    } else {
        -(-gamma * x).exp_m1() / gamma
    }
}

pub fn cara_from_samples(
    params: &GameParams,
    strategies: &[Strategy],
    samples: &[CostSample],
    seed: u64,
) -> Result<CaraReport> {
    if params.variance().sigma().is_none() {
        return Err(Error::invalid("variance", "the CARA comparison needs a Bachelier model"));
    }
    let gamma = params.gamma();
    let targets = cost_moment_targets(params, strategies)?;
    let agents = targets
        .iter()
        .enumerate()
        .map(|(i, &(mean_target, var_target))| {
            let costs = agent_costs(samples, i);
            if gamma == 0.0 {
                let (mean, se) = mean_and_se(&costs);
                let utility = Comparison::new(-mean, -mean_target, se);
                return AgentCara { utility: Some(utility), log_mean_exp: 0.0, log_target: 0.0, z: utility.z };
            }
            let log_target = gamma * mean_target + 0.5 * gamma * gamma * var_target;
            let shift = costs.iter().map(|c| gamma * c).fold(log_target, f64::max);
            let scaled: Vec<f64> = costs.iter().map(|c| (gamma * c - shift).exp()).collect();
            let (mean, se) = mean_and_se(&scaled);
            let target = (log_target - shift).exp();
            let z = -z_score(mean, target, se);
            let log_mean_exp = shift + mean.ln();
            let utility = (shift <= EXP_GUARD).then(|| {
                let u: Vec<f64> = costs.iter().map(|c| cara_utility(gamma, -c)).collect();
                let (u_mean, _) = mean_and_se(&u);
                let u_target = -log_target.exp_m1() / gamma;
                Comparison { estimate: u_mean, target: u_target, standard_error: shift.exp() * se / gamma, z }
            });
            AgentCara { utility, log_mean_exp, log_target, z }
        })
        .collect();
    Ok(CaraReport { seed, count: samples.len() as u64, gamma, agents })
}

pub fn validate_cara(params: &GameParams, strategies: &[Strategy], count: u64, seed: u64) -> Result<CaraReport> {
    let samples = simulate_paths(params, strategies, count, seed)?;
    cara_from_samples(params, strategies, &samples, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloReport {
    pub seed: u64,
    pub count: u64,
    pub moments: MomentReport,
    pub cara: Option<CaraReport>,
}

/// Moments and, for Bachelier models, the CARA comparison from one set of paths.
pub fn validate(params: &GameParams, strategies: &[Strategy], count: u64, seed: u64) -> Result<MonteCarloReport> {
    let samples = simulate_paths(params, strategies, count, seed)?;
    let moments = moments_from_samples(params, strategies, &samples, seed)?;
    let cara = match params.variance().sigma() {
        Some(_) => Some(cara_from_samples(params, strategies, &samples, seed)?),
        None => None,
    };
    Ok(MonteCarloReport { seed, count, moments, cara })
}
