//! Dense solves for the nonsymmetric positive systems of the game.
//!
//! Factorization is nalgebra's partially pivoted LU. Every factorization
//! carries a one-norm condition estimate (Hager's method with Higham's
//! alternating-sign safeguard), computed from the LU factors with a handful of
//! extra triangular solves.

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::error::{Error, Result};

/// Condition estimates above this value flag a result as ill-conditioned.
pub const ILL_CONDITIONED: f64 = 1e12;

/// A value obtained from a linear solve, with the estimated condition number
/// of the matrix that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Conditioned<T> {
    pub value: T,
    pub condition: f64,
}

impl<T> Conditioned<T> {
    pub fn ill_conditioned(&self) -> bool {
        !(self.condition <= ILL_CONDITIONED)
    }

    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> Conditioned<U> {
        Conditioned { value: f(self.value), condition: self.condition }
    }
}

pub struct Factorized {
    lu: LU<f64, Dyn, Dyn>,
    l: DMatrix<f64>,
    u: DMatrix<f64>,
    condition: f64,
}

impl Factorized {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        assert!(a.is_square(), "factorized matrix must be square");
        let norm = one_norm(&a);
        let lu = a.lu();
        let l = lu.l();
        let u = lu.u();
        if u.diagonal().iter().any(|d| *d == 0.0 || !d.is_finite()) {
            return Err(Error::Singular { condition: f64::INFINITY });
        }
        let mut f = Factorized { lu, l, u, condition: f64::NAN };
        let inv_norm = f.estimate_inverse_one_norm();
        f.condition = norm * inv_norm;
        if !f.condition.is_finite() {
            return Err(Error::Singular { condition: f.condition });
        }
        Ok(f)
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        let x = self.lu.solve(b).ok_or(Error::Singular { condition: self.condition })?;
        if x.iter().all(|v| v.is_finite()) {
            Ok(x)
        } else {
            Err(Error::Singular { condition: self.condition })
        }
    }

    /// Solves `Aᵀ x = b` from the factors of `P A = L U`.
    pub fn solve_transpose(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        let mut x = b.clone();
        let ok = self.u.tr_solve_upper_triangular_mut(&mut x) && self.l.tr_solve_lower_triangular_mut(&mut x);
        if !ok {
            return Err(Error::Singular { condition: self.condition });
        }
        self.lu.p().inv_permute_rows(&mut x);
        Ok(x)
    }

    fn estimate_inverse_one_norm(&self) -> f64 {
        let n = self.dim();
        if n == 1 {
            return 1.0 / self.u[(0, 0)].abs();
        }
        let solve = |b: &DVector<f64>| self.solve(b).unwrap_or_else(|_| DVector::from_element(n, f64::INFINITY));
        let solve_t =
            |b: &DVector<f64>| self.solve_transpose(b).unwrap_or_else(|_| DVector::from_element(n, f64::INFINITY));

        let mut x = DVector::from_element(n, 1.0 / n as f64);
        let mut estimate = 0.0;
        let mut last_j = usize::MAX;
        for _ in 0..5 {
            let y = solve(&x);
            estimate = y.lp_norm(1);
            let signs = y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
            let z = solve_t(&signs);
            let j = z.iamax();
            if z[j].abs() <= z.dot(&x) || j == last_j {
                break;
            }
            last_j = j;
            x.fill(0.0);
            x[j] = 1.0;
        }
        let alt = DVector::from_fn(n, |i, _| {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            s * (1.0 + i as f64 / (n - 1) as f64)
        });
        let alt_estimate = 2.0 * solve(&alt).lp_norm(1) / (3.0 * n as f64);
        estimate.max(alt_estimate)
    }
}

/// Maximum absolute column sum.
pub fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter().map(|c| c.lp_norm(1)).fold(0.0, f64::max)
}

/// Solves `A x = b` and attaches the condition estimate of `A`.
pub fn solve_conditioned(a: DMatrix<f64>, b: &DVector<f64>) -> Result<Conditioned<DVector<f64>>> {
    let f = Factorized::new(a)?;
    let value = f.solve(b)?;
    Ok(Conditioned { value, condition: f.condition() })
}
