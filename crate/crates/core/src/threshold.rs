//! Oscillation of the base vectors and the transaction-cost levels at which
//! it stops.
//!
//! For small `θ` the equilibrium base vectors alternate between buying and
//! selling. The critical level `θ_v(n, N, γ)` is the smallest `θ` at which
//! `min_i v_i ≥ 0`, and `θ_w(N, γ)` the same for `w`. Both are located by
//! bisection on `θ`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::finite::KernelMatrices;
use crate::linalg;
use crate::model::{DecayKernel, GameParams, TimeGrid, VarianceFunction};
use crate::numeric;

pub const DEFAULT_RESOLUTION: f64 = 1e-4;
/// Components below `-OSCILLATION_TOL · max|x|` count as sell-backs.
pub const OSCILLATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    V,
    W,
}

impl fmt::Display for Which {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Which::V => "v",
            Which::W => "w",
        })
    }
}

impl FromStr for Which {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "v" => Ok(Which::V),
            "w" => Ok(Which::W),
            _ => Err(Error::invalid("which", format!("expected v or w, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OscillationReport {
    pub min_component: f64,
    /// Total size of the components below the oscillation tolerance.
    pub negative_mass: f64,
    pub oscillating: bool,
}

pub fn oscillation_report(x: &[f64]) -> Result<OscillationReport> {
    if x.is_empty() {
        return Err(Error::Domain("oscillation report of an empty vector".into()));
    }
    if x.iter().any(|c| c.is_nan()) {
        return Err(Error::Domain("vector contains NaN".into()));
    }
    let scale = x.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let cutoff = -OSCILLATION_TOL * scale;
    let min_component = x.iter().copied().fold(f64::INFINITY, f64::min);
    let negative_mass = numeric::sum(x.iter().filter(|c| **c < cutoff).map(|c| -c));
    Ok(OscillationReport { min_component, negative_mass, oscillating: min_component < cutoff })
}

/// The game family whose threshold is sought: all parameters except `θ`, on
/// the equidistant grid of `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdProblem {
    pub n: usize,
    pub intervals: usize,
    pub gamma: f64,
    pub kernel: DecayKernel,
    pub variance: VarianceFunction,
}

impl ThresholdProblem {
    pub fn new(
        n: usize,
        intervals: usize,
        gamma: f64,
        kernel: DecayKernel,
        variance: VarianceFunction,
    ) -> Result<Self> {
        let problem = ThresholdProblem { n, intervals, gamma, kernel, variance };
        problem.params(0.0)?;
        Ok(problem)
    }

    pub fn params(&self, theta: f64) -> Result<GameParams> {
        GameParams::new(
            self.n,
            self.gamma,
            theta,
            self.kernel,
            self.variance.clone(),
            TimeGrid::equidistant(self.intervals, 1.0)?,
        )
    }

    fn with_intervals(&self, intervals: usize) -> Self {
        ThresholdProblem { intervals, ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdResult {
    pub which: Which,
    pub n: usize,
    pub intervals: usize,
    pub gamma: f64,
    /// Upper end of the final bracket, where the vector has no negative entry.
    pub theta_star: f64,
    pub bracket: (f64, f64),
    /// Linear solves spent, including the witness checks.
    pub evaluations: usize,
    /// The vector oscillates at `theta_star − resolution` and does not at
    /// `theta_star + resolution`.
    pub monotone: bool,
    /// The threshold at `N/2` intervals agrees within `2 · resolution`.
    pub converged: bool,
}

/// The `θ`-independent part of the linear system; `θ` enters as `2θ I`.
struct Oracle {
    base: DMatrix<f64>,
    evaluations: usize,
}

impl Oracle {
    fn new(problem: &ThresholdProblem, which: Which) -> Result<Self> {
        let mats = KernelMatrices::build(&problem.params(0.0)?);
        let base = match which {
            Which::V => mats.v_system(problem.n),
            Which::W => mats.w_system(),
        };
        Ok(Oracle { base, evaluations: 0 })
    }

    fn vector(&mut self, theta: f64) -> Result<DVector<f64>> {
        self.evaluations += 1;
        let size = self.base.nrows();
        let mut system = self.base.clone();
        for k in 0..size {
            system[(k, k)] += 2.0 * theta;
        }
        let x = linalg::solve_conditioned(system, &DVector::from_element(size, 1.0))?.value;
        let total = numeric::sum(x.iter().copied());
        Ok(x / total)
    }

    fn settled(&mut self, theta: f64) -> Result<bool> {
        let x = self.vector(theta)?;
        Ok(!oscillation_report(x.as_slice())?.oscillating)
    }
}

struct Search {
    theta_star: f64,
    bracket: (f64, f64),
    evaluations: usize,
    monotone: bool,
}

fn search(problem: &ThresholdProblem, which: Which, resolution: f64) -> Result<Search> {
    let mut oracle = Oracle::new(problem, which)?;
    if oracle.settled(0.0)? {
        return Ok(Search { theta_star: 0.0, bracket: (0.0, 0.0), evaluations: oracle.evaluations, monotone: true });
    }
    // w does not depend on n, so neither does its bracket.
    let scale = match which {
        Which::V => problem.n as f64,
        Which::W => 1.0,
    };
    let ceiling = 16.0 * scale;
    let mut hi = scale.max(1.0);
    while !oracle.settled(hi)? {
        if hi >= ceiling {
            return Err(Error::NoBracket { lo: 0.0, hi, what: "oscillation threshold" });
        }
        hi = (2.0 * hi).min(ceiling);
    }
    let mut lo = 0.0;
    while hi - lo > resolution {
        let mid = 0.5 * (lo + hi);
        if oracle.settled(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let above = oracle.settled(hi + resolution)?;
    let below = hi - resolution <= 0.0 || !oracle.settled(hi - resolution)?;
    Ok(Search { theta_star: hi, bracket: (lo, hi), evaluations: oracle.evaluations, monotone: above && below })
}

pub fn critical_theta(problem: &ThresholdProblem, which: Which, resolution: f64) -> Result<ThresholdResult> {
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(Error::invalid("resolution", format!("must be positive, got {resolution}")));
    }
    let found = search(problem, which, resolution)?;
    let coarse = search(&problem.with_intervals(problem.intervals / 2), which, resolution)?;
    Ok(ThresholdResult {
        which,
        n: problem.n,
        intervals: problem.intervals,
        gamma: problem.gamma,
        theta_star: found.theta_star,
        bracket: found.bracket,
        evaluations: found.evaluations,
        monotone: found.monotone,
        converged: (found.theta_star - coarse.theta_star).abs() <= 2.0 * resolution,
    })
}

/// `θ_v(n, N, γ)`.
pub fn critical_theta_v(problem: &ThresholdProblem, resolution: f64) -> Result<ThresholdResult> {
    critical_theta(problem, Which::V, resolution)
}

/// `θ_w(N, γ)`; the number of agents plays no role.
pub fn critical_theta_w(problem: &ThresholdProblem, resolution: f64) -> Result<ThresholdResult> {
    critical_theta(problem, Which::W, resolution)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub n: usize,
    pub intervals: usize,
    pub gamma: f64,
}

/// All combinations, ordered by `n`, then `N`, then `γ`.
pub fn grid(ns: &[usize], intervals: &[usize], gammas: &[f64]) -> Vec<SweepPoint> {
    let mut points = Vec::with_capacity(ns.len() * intervals.len() * gammas.len());
    for &n in ns {
        for &intervals in intervals {
            for &gamma in gammas {
                points.push(SweepPoint { n, intervals, gamma });
            }
        }
    }
    points
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub point: SweepPoint,
    pub which: Which,
    pub result: Result<ThresholdResult>,
}

/// Thresholds for every grid point, evaluated in parallel and returned in
/// grid order. A failing point is recorded in its row.
pub fn sweep(
    points: &[SweepPoint],
    which: Which,
    kernel: DecayKernel,
    variance: &VarianceFunction,
    resolution: f64,
) -> Vec<SweepRow> {
    points
        .par_iter()
        .map(|&point| {
            let result = ThresholdProblem::new(point.n, point.intervals, point.gamma, kernel, variance.clone())
                .and_then(|problem| critical_theta(&problem, which, resolution));
            SweepRow { point, which, result }
        })
        .collect()
}

pub const SWEEP_COLUMNS: [&str; 9] =
    ["n", "N", "gamma", "which", "theta_star", "bracket_lo", "bracket_hi", "evaluations", "converged"];
