//! Infinite-horizon game on the integer grid `ℕ₀` with `G(t) = e^{-ρt}` and a
//! Bachelier unaffected price.
//!
//! The equilibrium base sequences are geometric. `v` decays at the rate `α`
//! solving
//!
//! ```text
//! 1/(e^{α+ρ} − 1) − n/(e^{α−ρ} − 1) − γσ² e^{−α}/(1 − e^{−α})² = 0,   α ∈ (0, ρ),
//! ```
//!
//! and `w` at the rate `β` solving
//!
//! ```text
//! 2θ + 1/2 + 1/(e^{β+ρ} − 1) − γσ² e^{−β}/(1 − e^{−β})² = 0,   β > 0.
//! ```
//!
//! `v` is only an equilibrium building block at `θ = (n−1)/4`; `w` works for
//! any `θ ≥ 0`. Both residuals have poles, so the roots are found by
//! bisection on brackets that the sign structure guarantees.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::finite::KernelMatrices;
use crate::model::{DecayKernel, GameParams, TimeGrid, VarianceFunction};
use crate::numeric;

/// Default bracket width for both root solves.
pub const DEFAULT_ROOT_TOL: f64 = 1e-14;
/// Residual level below which bisection stops refining once the bracket is
/// narrower than the requested tolerance.
pub const ROOT_RESIDUAL_TARGET: f64 = 1e-12;
/// Default ℓ¹ mass allowed to be discarded by truncation.
pub const DEFAULT_TAIL_BOUND: f64 = 1e-12;

/// Market parameters of the infinite-horizon game.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InfiniteParams {
    pub n: usize,
    pub rho: f64,
    pub gamma: f64,
    pub sigma: f64,
}

impl InfiniteParams {
    /// Requires `γ, σ, ρ > 0`: without risk aversion there is no incentive to
    /// finish trading and no equilibrium in `ℓ¹`.
    pub fn new(n: usize, rho: f64, gamma: f64, sigma: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", "need at least one agent"));
        }
        for (name, x) in [("rho", rho), ("gamma", gamma), ("sigma", sigma)] {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::invalid(name, format!("must be finite and positive, got {x}")));
            }
        }
        Ok(InfiniteParams { n, rho, gamma, sigma })
    }

    /// `θ* = (n − 1)/4`.
    pub fn critical_theta(&self) -> f64 {
        (self.n as f64 - 1.0) / 4.0
    }

    fn risk(&self) -> f64 {
        self.gamma * self.sigma * self.sigma
    }

    /// The finite game on `{0, …, last}` that the infinite matrices truncate to.
    pub fn truncated_game(&self, theta: f64, last: usize) -> Result<GameParams> {
        GameParams::new(
            self.n,
            self.gamma,
            theta,
            DecayKernel::exponential(self.rho)?,
            VarianceFunction::bachelier(self.sigma)?,
            TimeGrid::integers(last),
        )
    }
}

/// `γσ² e^{−x}/(1 − e^{−x})²`, the constant the identities produce.
fn risk_term(risk: f64, x: f64) -> f64 {
    let d = (-x).exp_m1();
    risk * (-x).exp() / (d * d)
}

pub fn alpha_residual(alpha: f64, params: &InfiniteParams) -> Result<f64> {
    if alpha.is_nan() || alpha < 0.0 {
        return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
    }
    if alpha == 0.0 || alpha == params.rho {
        return Err(Error::Pole(format!("alpha = {alpha} with rho = {}", params.rho)));
    }
    Ok(alpha_residual_unchecked(alpha, params))
}

fn alpha_residual_unchecked(alpha: f64, p: &InfiniteParams) -> f64 {
    1.0 / (alpha + p.rho).exp_m1() - p.n as f64 / (alpha - p.rho).exp_m1() - risk_term(p.risk(), alpha)
}

pub fn beta_residual(beta: f64, theta: f64, params: &InfiniteParams) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::Domain(format!("beta must be positive, got {beta}")));
    }
    Ok(beta_residual_unchecked(beta, theta, params))
}

fn beta_residual_unchecked(beta: f64, theta: f64, p: &InfiniteParams) -> f64 {
    2.0 * theta + 0.5 + 1.0 / (beta + p.rho).exp_m1() - risk_term(p.risk(), beta)
}

/// A root located by bisection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Root {
    pub value: f64,
    pub residual: f64,
    pub bracket: (f64, f64),
    pub evaluations: usize,
}

impl Root {
    fn from_bisection(b: numeric::Bisection) -> Self {
        Root { value: b.root, residual: b.residual, bracket: (b.lo, b.hi), evaluations: b.evaluations }
    }
}

/// Decay rate of `v`. The bracket `(ε, ρ − ε)` starts at `ε = ρ/4` and
/// shrinks tenfold until the residual changes sign.
pub fn solve_alpha(params: &InfiniteParams, tol: f64) -> Result<Root> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", "must be positive"));
    }
    let rho = params.rho;
    let f = |a: f64| alpha_residual_unchecked(a, params);
    let mut eps = 0.25 * rho;
    loop {
        let (lo, hi) = (eps, rho - eps);
        if lo < hi && f(lo) < 0.0 && f(hi) > 0.0 {
            let b = numeric::bisect_to_residual(f, lo, hi, tol, ROOT_RESIDUAL_TARGET).expect("sign change checked");
            return Ok(Root::from_bisection(b));
        }
        if eps <= 1e-14 {
            return Err(Error::NoBracket { lo, hi, what: "alpha residual" });
        }
        eps = (eps * 0.1).max(1e-14);
    }
}

/// `α = arccosh[(γσ² cosh ρ + 2 sinh ρ)/(γσ² + 2 sinh ρ)]`, the single-agent
/// root, evaluated as `2 asinh(sinh(ρ/2) √(γσ²/(γσ² + 2 sinh ρ)))` to avoid
/// cancellation near `arccosh(1)`.
pub fn alpha_closed_form_n1(rho: f64, gamma: f64, sigma: f64) -> Result<f64> {
    let p = InfiniteParams::new(1, rho, gamma, sigma)?;
    let risk = p.risk();
    Ok(2.0 * ((0.5 * rho).sinh() * (risk / (risk + 2.0 * rho.sinh())).sqrt()).asinh())
}

/// Decay rate of `w`: lower end `1e-12`, upper end doubled from 1 until the
/// residual is positive.
pub fn solve_beta(theta: f64, params: &InfiniteParams, tol: f64) -> Result<Root> {
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(Error::invalid("theta", format!("must be finite and nonnegative, got {theta}")));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", "must be positive"));
    }
    let g = |b: f64| beta_residual_unchecked(b, theta, params);
    let lo = 1e-12;
    if !(g(lo) < 0.0) {
        return Err(Error::NoBracket { lo, hi: lo, what: "beta residual at the lower end" });
    }
    let mut hi = 1.0;
    while !(g(hi) > 0.0) {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::NoBracket { lo, hi, what: "beta residual" });
        }
    }
    let b = numeric::bisect_to_residual(g, lo, hi, tol, ROOT_RESIDUAL_TARGET).expect("sign change checked");
    Ok(Root::from_bisection(b))
}

/// A sequence cut after `values.len()` terms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncatedSequence {
    pub values: Vec<f64>,
    /// Exact mass of the discarded tail.
    pub tail_mass: f64,
}

impl TruncatedSequence {
    /// Index of the last retained term.
    pub fn last_index(&self) -> usize {
        self.values.len() - 1
    }
}

/// Smallest `M` with `e^{−rate·M} ≤ ε`.
fn truncation_index(rate: f64, eps: f64) -> usize {
    ((1.0 / eps).ln() / rate).ceil().max(0.0) as usize
}

fn check_tail_bound(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid("eps", format!("tail bound must lie in (0, 1), got {eps}")))
    }
}

/// `v_0 = (e^α − 1)/(e^α − e^{α−ρ})`, `v_i = e^{−αi}/K` for `i ≥ 1` with
/// `K = 1/(e^α − 1) + 1/(1 − e^{α−ρ})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VProfile {
    alpha: f64,
    rho: f64,
}

impl VProfile {
    pub fn new(alpha: f64, rho: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < rho) {
            return Err(Error::Domain(format!("alpha = {alpha} must lie in (0, rho = {rho})")));
        }
        Ok(VProfile { alpha, rho })
    }

    /// `1ᵀν`.
    pub fn mass(&self) -> f64 {
        1.0 / self.alpha.exp_m1() + self.nu0()
    }

    fn nu0(&self) -> f64 {
        -1.0 / (self.alpha - self.rho).exp_m1()
    }

    /// Unnormalized `ν_0 = 1/(1 − e^{α−ρ})`, `ν_i = e^{−αi}`.
    pub fn nu(&self, i: usize) -> f64 {
        if i == 0 {
            self.nu0()
        } else {
            (-self.alpha * i as f64).exp()
        }
    }

    pub fn term(&self, i: usize) -> f64 {
        if i == 0 {
            self.alpha.exp_m1() / (self.alpha.exp() - (self.alpha - self.rho).exp())
        } else {
            self.nu(i) / self.mass()
        }
    }

    /// Mass of `v_{M+1}, v_{M+2}, …`.
    pub fn tail_after(&self, last: usize) -> f64 {
        (-self.alpha * (last + 1) as f64).exp() / (-(-self.alpha).exp_m1() * self.mass())
    }

    pub fn take(&self, len: usize) -> TruncatedSequence {
        TruncatedSequence { values: (0..len).map(|i| self.term(i)).collect(), tail_mass: self.tail_after(len - 1) }
    }
}

/// `w_i = (1 − e^{−β}) e^{−βi}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WProfile {
    beta: f64,
}

impl WProfile {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Domain(format!("beta must be positive, got {beta}")));
        }
        Ok(WProfile { beta })
    }

    /// Unnormalized `ω_i = e^{−βi}`.
    pub fn omega(&self, i: usize) -> f64 {
        (-self.beta * i as f64).exp()
    }

    pub fn term(&self, i: usize) -> f64 {
        -(-self.beta).exp_m1() * self.omega(i)
    }

    pub fn tail_after(&self, last: usize) -> f64 {
        (-self.beta * (last + 1) as f64).exp()
    }

    pub fn take(&self, len: usize) -> TruncatedSequence {
        TruncatedSequence { values: (0..len).map(|i| self.term(i)).collect(), tail_mass: self.tail_after(len - 1) }
    }
}

/// `v` cut at `M = ⌈ln(1/ε)/α⌉`, so the discarded mass is at most `ε`.
pub fn infinite_v(alpha: f64, rho: f64, eps: f64) -> Result<TruncatedSequence> {
    check_tail_bound(eps)?;
    let profile = VProfile::new(alpha, rho)?;
    Ok(profile.take(truncation_index(alpha, eps) + 1))
}

/// `w` cut at `M = ⌈ln(1/ε)/β⌉`.
pub fn infinite_w(beta: f64, eps: f64) -> Result<TruncatedSequence> {
    check_tail_bound(eps)?;
    let profile = WProfile::new(beta)?;
    Ok(profile.take(truncation_index(beta, eps) + 1))
}

/// Outcome of checking `A x = c 1` on a finite section of the infinite matrices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityCheck {
    /// The constant `c = γσ² e^{−r}/(1 − e^{−r})²` for the decay rate `r`.
    pub constant: f64,
    /// `max |(A x)_i − c|` over the checked rows.
    pub max_deviation: f64,
    /// Rows `0..=rows_checked` were compared.
    pub rows_checked: usize,
    /// Last index of the grid the matrices were rebuilt on.
    pub last_index: usize,
}

/// Smallest `M' ≥ ⌈ln(1/ε)/r⌉` for which the terms dropped from rows
/// `i ≤ M'/2`, bounded by `(1 + γσ² i) e^{−r(M'+1)}/(1 − e^{−r})`, stay below `ε`.
fn identity_truncation(rate: f64, risk: f64, eps: f64) -> usize {
    let mut last = truncation_index(rate, eps);
    let geometric = -1.0 / (-rate).exp_m1();
    while (1.0 + risk * (last / 2) as f64) * (-rate * (last + 1) as f64).exp() * geometric > eps {
        last += 1;
    }
    last
}

fn check_rows(a: &nalgebra::DMatrix<f64>, x: &[f64], constant: f64, last: usize) -> IdentityCheck {
    let rows = last / 2;
    let max_deviation = (0..=rows)
        .map(|i| {
            let row: Vec<f64> = a.row(i).iter().copied().collect();
            (numeric::dot(&row, x) - constant).abs()
        })
        .fold(0.0, f64::max);
    IdentityCheck { constant, max_deviation, rows_checked: rows, last_index: last }
}

/// Checks `[Γ^{γ,θ*} + (n−1)Γ̃] ν = c 1` on the first half of a truncation.
pub fn verify_v_identity(params: &InfiniteParams, alpha: f64, eps: f64) -> Result<IdentityCheck> {
    check_tail_bound(eps)?;
    let profile = VProfile::new(alpha, params.rho)?;
    let last = identity_truncation(alpha, params.risk(), eps);
    let mats = KernelMatrices::build(&params.truncated_game(params.critical_theta(), last)?);
    let nu: Vec<f64> = (0..=last).map(|i| profile.nu(i)).collect();
    Ok(check_rows(&mats.v_system(params.n), &nu, risk_term(params.risk(), alpha), last))
}

/// Checks `(Γ^{γ,θ} − Γ̃) ω = c 1` on the first half of a truncation.
pub fn verify_w_identity(params: &InfiniteParams, theta: f64, beta: f64, eps: f64) -> Result<IdentityCheck> {
    check_tail_bound(eps)?;
    let profile = WProfile::new(beta)?;
    let last = identity_truncation(beta, params.risk(), eps);
    let mats = KernelMatrices::build(&params.truncated_game(theta, last)?);
    let omega: Vec<f64> = (0..=last).map(|i| profile.omega(i)).collect();
    Ok(check_rows(&mats.w_system(), &omega, risk_term(params.risk(), beta), last))
}

/// Infinite-horizon equilibrium, truncated to a common length.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfiniteEquilibrium {
    pub theta: f64,
    pub alpha: Root,
    pub beta: Root,
    pub v: TruncatedSequence,
    pub w: TruncatedSequence,
    pub strategies: Vec<Vec<f64>>,
    /// Bound on `|X_i − Σ_k ξ_{i,k}|` from the discarded tails.
    pub tail_bounds: Vec<f64>,
}

impl InfiniteEquilibrium {
    pub fn len(&self) -> usize {
        self.w.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// `ξ*_i = X̄ v + (X_i − X̄) w` on `ℕ₀`.
///
/// If the inventories do not sum to zero, `θ` must equal `(n−1)/4`: for any
/// other level there is no equilibrium built from exponentially decaying
/// strategies.
pub fn infinite_nash(
    params: &InfiniteParams,
    theta: f64,
    inventories: &[f64],
    eps: f64,
) -> Result<InfiniteEquilibrium> {
    check_tail_bound(eps)?;
    if inventories.len() != params.n {
        return Err(Error::invalid(
            "inventories",
            format!("expected {} inventories, got {}", params.n, inventories.len()),
        ));
    }
    if inventories.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("inventories", "must be finite"));
    }
    let total = numeric::sum(inventories.iter().copied());
    let scale: f64 = inventories.iter().map(|x| x.abs()).sum();
    let zero_sum = total.abs() <= 1e-12 * scale || scale == 0.0;
    let mean = if zero_sum { 0.0 } else { total / params.n as f64 };

    let critical = params.critical_theta();
    if !zero_sum && (theta - critical).abs() > 1e-12 * critical.max(1.0) {
        return Err(Error::Rejected(format!(
            "inventories do not sum to zero, so theta must equal (n-1)/4 = {critical}; \
             for theta = {theta} no Nash equilibrium with exponentially decaying strategies exists"
        )));
    }

    let beta = solve_beta(theta, params, DEFAULT_ROOT_TOL)?;
    let alpha = solve_alpha(params, DEFAULT_ROOT_TOL)?;
    let w_profile = WProfile::new(beta.value)?;
    let v_profile = VProfile::new(alpha.value, params.rho)?;
    let len = truncation_index(beta.value, eps).max(truncation_index(alpha.value, eps)) + 1;
    let w = w_profile.take(len);
    let v = v_profile.take(len);

    let mut strategies = Vec::with_capacity(params.n);
    let mut tail_bounds = Vec::with_capacity(params.n);
    for &x in inventories {
        let spread = x - mean;
        let xi: Vec<f64> = (0..len).map(|k| mean * v.values[k] + spread * w.values[k]).collect();
        strategies.push(xi);
        tail_bounds.push(mean.abs() * v.tail_mass + spread.abs() * w.tail_mass);
    }
    Ok(InfiniteEquilibrium { theta, alpha, beta, v, w, strategies, tail_bounds })
}
