//! Market primitives: trading-time grids, impact decay kernels, variance
//! functions of the unaffected price, and the parameter bundle describing one
//! game instance.
//!
//! Built-in kernels are normalized to `G(0) = 1`. A different impact scale is
//! equivalent to rescaling `θ` and `γ`.

use serde::Serialize;

use crate::error::{Error, Result};

/// Strictly increasing trading times `t_0 < t_1 < … < t_N`, all nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::invalid("grid", "a time grid needs at least one point"));
        }
        if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::invalid("grid", "times must be finite and nonnegative"));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("grid", "times must be strictly increasing"));
        }
        Ok(TimeGrid { times })
    }

    /// `t_k = k T / N` for `k = 0..=N`. `N = 0` gives the single time 0.
    pub fn equidistant(intervals: usize, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid("horizon", format!("must be positive, got {horizon}")));
        }
        if intervals == 0 {
            return Ok(TimeGrid { times: vec![0.0] });
        }
        let n = intervals as f64;
        Ok(TimeGrid { times: (0..=intervals).map(|k| k as f64 * horizon / n).collect() })
    }

    /// The integer grid `{0, 1, …, last}` used for infinite-horizon truncations.
    pub fn integers(last: usize) -> Self {
        TimeGrid { times: (0..=last).map(|k| k as f64).collect() }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Number of trading times, `N + 1`.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of intervals `N`.
    pub fn intervals(&self) -> usize {
        self.times.len() - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecayKernel {
    /// `G(t) = e^{-ρ t}`
    Exponential { rho: f64 },
    /// `G(t) = (1 + t)^{-p}`
    PowerLaw { p: f64 },
}

impl DecayKernel {
    pub fn exponential(rho: f64) -> Result<Self> {
        positive("rho", rho).map(|rho| DecayKernel::Exponential { rho })
    }

    pub fn power_law(p: f64) -> Result<Self> {
        positive("p", p).map(|p| DecayKernel::PowerLaw { p })
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("decay kernel evaluated at t = {t} < 0")));
        }
        Ok(self.at(t))
    }

    /// Evaluation without the domain check; `t` must be nonnegative.
    pub(crate) fn at(&self, t: f64) -> f64 {
        match *self {
            DecayKernel::Exponential { rho } => (-rho * t).exp(),
            DecayKernel::PowerLaw { p } => (1.0 + t).powf(-p),
        }
    }
}

/// `φ(t) = Var(S⁰_t)` of the unaffected price.
#[derive(Debug, Clone, PartialEq)]
pub enum VarianceFunction {
    /// Arithmetic Brownian motion `S_0 + σ B_t`, so `φ(t) = σ² t`.
    Bachelier { sigma: f64 },
    /// Piecewise linear through `(times[k], values[k])`, constant outside.
    Tabulated { times: Vec<f64>, values: Vec<f64> },
}

impl VarianceFunction {
    /// `σ = 0` is accepted and gives a deterministic unaffected price.
    pub fn bachelier(sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::invalid("sigma", format!("must be finite and nonnegative, got {sigma}")));
        }
        Ok(VarianceFunction::Bachelier { sigma })
    }

    pub fn tabulated(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::invalid("variance", "need matching, nonempty time and value tables"));
        }
        TimeGrid::new(times.clone())?;
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("variance", "values must be finite and nonnegative"));
        }
        if values.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::invalid("variance", "a variance function must be nondecreasing"));
        }
        Ok(VarianceFunction::Tabulated { times, values })
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("variance function evaluated at t = {t} < 0")));
        }
        Ok(self.at(t))
    }

    pub(crate) fn at(&self, t: f64) -> f64 {
        match self {
            VarianceFunction::Bachelier { sigma } => sigma * sigma * t,
            VarianceFunction::Tabulated { times, values } => {
                let k = times.partition_point(|s| *s <= t);
                if k == 0 {
                    values[0]
                } else if k == times.len() {
                    values[k - 1]
                } else {
                    let (t0, t1) = (times[k - 1], times[k]);
                    let (v0, v1) = (values[k - 1], values[k]);
                    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
                }
            }
        }
    }

    pub fn sigma(&self) -> Option<f64> {
        match self {
            VarianceFunction::Bachelier { sigma } => Some(*sigma),
            VarianceFunction::Tabulated { .. } => None,
        }
    }
}

/// Everything that specifies one finite-horizon game instance.
#[derive(Debug, Clone, PartialEq)]
pub struct GameParams {
    n: usize,
    gamma: f64,
    theta: f64,
    kernel: DecayKernel,
    variance: VarianceFunction,
    grid: TimeGrid,
    s0: f64,
}

impl GameParams {
    pub fn new(
        n: usize,
        gamma: f64,
        theta: f64,
        kernel: DecayKernel,
        variance: VarianceFunction,
        grid: TimeGrid,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", "need at least one agent"));
        }
        nonnegative("gamma", gamma)?;
        nonnegative("theta", theta)?;
        Ok(GameParams { n, gamma, theta, kernel, variance, grid, s0: 0.0 })
    }

    /// The setting used throughout the numerics: `e^{-ρt}` decay, Bachelier
    /// variance, equidistant grid on `[0, 1]` with `N` intervals.
    pub fn standard(n: usize, intervals: usize, gamma: f64, theta: f64, rho: f64, sigma: f64) -> Result<Self> {
        Self::new(
            n,
            gamma,
            theta,
            DecayKernel::exponential(rho)?,
            VarianceFunction::bachelier(sigma)?,
            TimeGrid::equidistant(intervals, 1.0)?,
        )
    }

    pub fn with_s0(mut self, s0: f64) -> Result<Self> {
        if !s0.is_finite() {
            return Err(Error::invalid("s0", "must be finite"));
        }
        self.s0 = s0;
        Ok(self)
    }

    pub fn with_theta(&self, theta: f64) -> Result<Self> {
        nonnegative("theta", theta)?;
        Ok(GameParams { theta, ..self.clone() })
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        nonnegative("gamma", gamma)?;
        Ok(GameParams { gamma, ..self.clone() })
    }

    pub fn with_agents(&self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", "need at least one agent"));
        }
        Ok(GameParams { n, ..self.clone() })
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn theta(&self) -> f64 {
        self.theta
    }
    pub fn kernel(&self) -> &DecayKernel {
        &self.kernel
    }
    pub fn variance(&self) -> &VarianceFunction {
        &self.variance
    }
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }
    pub fn s0(&self) -> f64 {
        self.s0
    }
}

fn positive(name: &'static str, x: f64) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(Error::invalid(name, format!("must be finite and positive, got {x}")))
    }
}

fn nonnegative(name: &'static str, x: f64) -> Result<f64> {
    if x >= 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(Error::invalid(name, format!("must be finite and nonnegative, got {x}")))
    }
}
