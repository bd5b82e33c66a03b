//! Small numerical kernels shared across modules: compensated summation and a
//! sign-change bisection.

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl Extend<f64> for CompensatedSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

/// Compensated sum of an iterator.
pub fn sum(iter: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = CompensatedSum::new();
    acc.extend(iter);
    acc.value()
}

/// Compensated dot product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    sum(a.iter().zip(b).map(|(x, y)| x * y))
}

/// Outcome of a bisection run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bisection {
    /// Endpoint of the final bracket with the smaller |f|.
    pub root: f64,
    pub residual: f64,
    pub lo: f64,
    pub hi: f64,
    pub evaluations: usize,
}

impl Bisection {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Bisects `f` on `[lo, hi]` where `f(lo)` and `f(hi)` have opposite signs.
///
/// Stops once the bracket is no wider than `tol` or no float lies strictly
/// between the endpoints. The caller is responsible for the sign change;
/// `None` is returned when it is absent.
pub fn bisect(f: impl FnMut(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Option<Bisection> {
    bisect_to_residual(f, lo, hi, tol, f64::INFINITY)
}

/// Like [`bisect`], but keeps halving past `tol` until one endpoint has
/// `|f| ≤ ftol` or the endpoints are adjacent floats.
pub fn bisect_to_residual(
    mut f: impl FnMut(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    ftol: f64,
) -> Option<Bisection> {
    let mut f_lo = f(lo);
    let mut f_hi = f(hi);
    let mut evaluations = 2;
    if f_lo == 0.0 {
        return Some(Bisection { root: lo, residual: 0.0, lo, hi: lo, evaluations });
    }
    if f_hi == 0.0 {
        return Some(Bisection { root: hi, residual: 0.0, lo: hi, hi, evaluations });
    }
    if f_lo.is_nan() || f_hi.is_nan() || f_lo.signum() == f_hi.signum() {
        return None;
    }
    while hi - lo > tol || f_lo.abs().min(f_hi.abs()) > ftol {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        evaluations += 1;
        if f_mid == 0.0 {
            return Some(Bisection { root: mid, residual: 0.0, lo: mid, hi: mid, evaluations });
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    let (root, residual) = if f_lo.abs() <= f_hi.abs() { (lo, f_lo) } else { (hi, f_hi) };
    Some(Bisection { root, residual, lo, hi, evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_cancelled_terms() {
        let xs = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(xs.iter().sum::<f64>(), 0.0);
        assert_eq!(sum(xs), 2.0);
    }

    #[test]
    fn bisect_sqrt2() {
        let b = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-15).unwrap();
        assert!((b.root - std::f64::consts::SQRT_2).abs() < 4e-16);
        assert!(b.width() <= 1e-15);
    }

    #[test]
    fn bisect_requires_sign_change() {
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_none());
    }

    #[test]
    fn residual_target_refines_past_tol() {
        let f = |x: f64| 1e6 * (x - 0.3);
        let coarse = bisect(f, 0.0, 1.0, 1e-3).unwrap();
        let fine = bisect_to_residual(f, 0.0, 1.0, 1e-3, 1e-6).unwrap();
        assert!(coarse.residual.abs() > 1e-6);
        assert!(fine.residual.abs() <= 1e-6);
        let stuck = bisect_to_residual(f, 0.0, 1.0, 1e-3, 0.0).unwrap();
        assert!(stuck.hi - stuck.lo <= f64::EPSILON);
    }

    #[test]
    fn bisect_stops_at_adjacent_floats() {
        let b = bisect(|x| x - 0.1, 0.0, 1.0, 0.0).unwrap();
        assert!(b.hi - b.lo <= f64::EPSILON);
    }
}
