//! Scalar numerical kernel: bracketed root finding, golden-section
//! maximization, damped fixed-point iteration and central differences.
//!
//! Every routine takes a plain closure `FnMut(T) -> T`. A non-finite
//! return value (NaN, or an infinity where a finite value is required)
//! is treated as "undefined at this point" and reported as
//! [`Error::Domain`].

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

/// Convergence controls shared by the iterative routines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance<T> {
    pub abs_tol: T,
    pub rel_tol: T,
    pub max_iter: usize,
}

impl<T: Scalar> Tolerance<T> {
    pub fn new(abs_tol: T, rel_tol: T, max_iter: usize) -> Result<Self> {
        if !(abs_tol > T::zero()) || !abs_tol.is_finite() {
            return Err(invalid(format!("abs_tol must be positive, got {abs_tol}")));
        }
        if !(rel_tol >= T::zero()) || !rel_tol.is_finite() {
            return Err(invalid(format!(
                "rel_tol must be nonnegative, got {rel_tol}"
            )));
        }
        if max_iter == 0 {
            return Err(invalid("max_iter must be at least 1"));
        }
        Ok(Self {
            abs_tol,
            rel_tol,
            max_iter,
        })
    }

    /// Tolerance with `abs_tol` raised to what the scalar type can resolve.
    pub fn at_least(abs_tol: f64, rel_tol: f64, max_iter: usize) -> Self {
        let floor = T::tol_floor();
        Self {
            abs_tol: T::lit(abs_tol).max(floor),
            rel_tol: T::lit(rel_tol).max(T::epsilon()),
            max_iter,
        }
    }

    fn width_ok(&self, width: T, at: T) -> bool {
        width <= self.abs_tol + self.rel_tol * at.abs()
    }
}

impl<T: Scalar> Default for Tolerance<T> {
    /// `abs_tol = 1e-10`, `rel_tol = 1e-12`, 200 iterations (floored for `f32`).
    fn default() -> Self {
        Self::at_least(1e-10, 1e-12, 200)
    }
}

/// Closed interval `[lo, hi]` with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Scalar> Bracket<T> {
    pub fn new(lo: T, hi: T) -> Result<Self> {
        if lo < hi && lo.is_finite() && hi.is_finite() {
            Ok(Self { lo, hi })
        } else {
            Err(invalid(format!(
                "bracket requires finite lo < hi, got [{lo}, {hi}]"
            )))
        }
    }

    pub fn width(&self) -> T {
        self.hi - self.lo
    }

    pub fn contains(&self, x: T) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn clamp(&self, x: T) -> T {
        x.max(self.lo).min(self.hi)
    }
}

fn eval<T: Scalar>(f: &mut impl FnMut(T) -> T, x: T) -> Result<T> {
    let y = f(x);
    if y.is_finite() {
        Ok(y)
    } else {
        Err(Error::Domain { x: x.as_f64() })
    }
}

/// Finds a root of `f` inside `bracket`.
///
/// Alternates bisection with a false-position (secant) step. The secant
/// candidate is only used when it falls strictly inside the current
/// bracket, so the bracket width at least halves every two iterations.
/// Terminates when `|f(x)| <= abs_tol`, when the bracket is narrower than
/// `abs_tol + rel_tol * |x|`, or when the bracket can no longer be split
/// at this precision.
pub fn find_root<T, F>(mut f: F, bracket: Bracket<T>, tol: &Tolerance<T>) -> Result<T>
where
    T: Scalar,
    F: FnMut(T) -> T,
{
    let (mut lo, mut hi) = (bracket.lo, bracket.hi);
    let mut f_lo = eval(&mut f, lo)?;
    let mut f_hi = eval(&mut f, hi)?;

    if f_lo.abs() <= tol.abs_tol {
        return Ok(lo);
    }
    if f_hi.abs() <= tol.abs_tol {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::NoSignChange {
            lo: lo.as_f64(),
            hi: hi.as_f64(),
            f_lo: f_lo.as_f64(),
            f_hi: f_hi.as_f64(),
        });
    }

    let two = T::lit(2.0);
    for iter in 0..tol.max_iter {
        let mid = lo + (hi - lo) / two;
        if tol.width_ok(hi - lo, mid) || mid <= lo || mid >= hi {
            return Ok(if f_lo.abs() <= f_hi.abs() { lo } else { hi });
        }

        let x = if iter % 2 == 1 {
            let secant = lo - f_lo * (hi - lo) / (f_hi - f_lo);
            if secant > lo && secant < hi {
                secant
            } else {
                mid
            }
        } else {
            mid
        };

        let fx = eval(&mut f, x)?;
        if fx.abs() <= tol.abs_tol {
            return Ok(x);
        }
        if fx.signum() == f_lo.signum() {
            lo = x;
            f_lo = fx;
        } else {
            hi = x;
            f_hi = fx;
        }
    }

    Err(Error::MaxIterExceeded {
        iterations: tol.max_iter,
        last: ((lo + hi) / two).as_f64(),
    })
}

/// Result of a one-dimensional maximization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum<T> {
    pub argmax: T,
    pub max: T,
    /// The function was flat over the initial probe points; any point of
    /// the bracket is a maximizer.
    pub degenerate: bool,
}

/// Golden-section search for the maximum of a unimodal `f` on `bracket`.
///
/// `f` may return `-inf` to mark infeasible points; NaN is a domain error.
/// The bracket endpoints are also evaluated, so a maximizer sitting on the
/// boundary is returned exactly.
pub fn maximize_1d<T, F>(mut f: F, bracket: Bracket<T>, tol: &Tolerance<T>) -> Result<Maximum<T>>
where
    T: Scalar,
    F: FnMut(T) -> T,
{
    let mut probe = |x: T| -> Result<T> {
        let y = f(x);
        if y.is_nan() || y == T::infinity() {
            Err(Error::Domain { x: x.as_f64() })
        } else {
            Ok(y)
        }
    };

    let inv_phi = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
    let (mut a, mut b) = (bracket.lo, bracket.hi);
    let f_lo = probe(a)?;
    let f_hi = probe(b)?;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = probe(c)?;
    let mut fd = probe(d)?;

    let probes = [f_lo, f_hi, fc, fd];
    let top = probes.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    let bottom = probes.iter().fold(T::infinity(), |m, &v| m.min(v));
    let scale = T::one().max(top.abs()).max(bottom.abs());
    let degenerate = top.is_finite() && top - bottom <= T::lit(4.0) * T::epsilon() * scale;

    let mut iterations = 0;
    while !tol.width_ok(b - a, (a + b) / T::lit(2.0)) {
        if iterations >= tol.max_iter {
            return Err(Error::MaxIterExceeded {
                iterations,
                last: ((a + b) / T::lit(2.0)).as_f64(),
            });
        }
        iterations += 1;
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            if !(c < d) {
                break;
            }
            fc = probe(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            if !(c < d) {
                break;
            }
            fd = probe(d)?;
        }
    }

    let mid = (a + b) / T::lit(2.0);
    let f_mid = probe(mid)?;
    let mut best = (mid, f_mid);
    for cand in [(bracket.lo, f_lo), (bracket.hi, f_hi)] {
        if cand.1 > best.1 {
            best = cand;
        }
    }
    Ok(Maximum {
        argmax: best.0,
        max: best.1,
        degenerate,
    })
}

/// Damping factor used by [`fixed_point`].
pub const DEFAULT_DAMPING: f64 = 0.5;

/// Solves `x = h(x)` on `bracket` by damped iteration with `ω = 0.5`.
pub fn fixed_point<T, H>(h: H, init: T, bracket: Bracket<T>, tol: &Tolerance<T>) -> Result<T>
where
    T: Scalar,
    H: FnMut(T) -> T,
{
    fixed_point_damped(h, init, bracket, tol, T::lit(DEFAULT_DAMPING))
}

/// Solves `x = h(x)` by the iteration `x <- (1-ω)x + ω h(x)`, clamped to
/// `bracket`.
///
/// If the residual stops shrinking (oscillation or divergence) or the
/// iteration budget runs out, falls back to bracketed root finding on
/// `x - h(x)`, which requires `h` to map the bracket into itself.
pub fn fixed_point_damped<T, H>(
    mut h: H,
    init: T,
    bracket: Bracket<T>,
    tol: &Tolerance<T>,
    omega: T,
) -> Result<T>
where
    T: Scalar,
    H: FnMut(T) -> T,
{
    if !(omega > T::zero() && omega <= T::one()) {
        return Err(invalid(format!("damping must lie in (0, 1], got {omega}")));
    }

    let mut x = bracket.clamp(init);
    let mut prev = T::infinity();
    let mut stalls = 0;
    for _ in 0..tol.max_iter {
        let r = eval(&mut h, x)? - x;
        if r.abs() <= tol.abs_tol {
            return Ok(x);
        }
        if r.abs() >= prev {
            stalls += 1;
            if stalls >= 3 {
                break;
            }
        } else {
            stalls = 0;
        }
        prev = r.abs();
        x = bracket.clamp(x + omega * r);
    }

    find_root(|y| y - h(y), bracket, tol).map_err(|e| match e {
        Error::NoSignChange { .. } => Error::MaxIterExceeded {
            iterations: tol.max_iter,
            last: x.as_f64(),
        },
        other => other,
    })
}

/// Order of a central finite difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdOrder {
    First,
    Second,
}

/// Default step `max(1e-5, 1e-5 |x|)`.
pub fn fd_step<T: Scalar>(x: T) -> T {
    let base = T::lit(1e-5);
    base.max(base * x.abs())
}

/// Central finite difference of `f` at `x`.
pub fn fd_derivative<T, F>(mut f: F, x: T, order: FdOrder, step: T) -> Result<T>
where
    T: Scalar,
    F: FnMut(T) -> T,
{
    if !(step > T::zero()) || !step.is_finite() {
        return Err(invalid(format!(
            "finite-difference step must be positive, got {step}"
        )));
    }
    let up = eval(&mut f, x + step)?;
    let down = eval(&mut f, x - step)?;
    match order {
        FdOrder::First => Ok((up - down) / (T::lit(2.0) * step)),
        FdOrder::Second => {
            let at = eval(&mut f, x)?;
            Ok((up - T::lit(2.0) * at + down) / (step * step))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerance<f64> {
        Tolerance::default()
    }

    fn br(lo: f64, hi: f64) -> Bracket<f64> {
        Bracket::new(lo, hi).unwrap()
    }

    #[test]
    fn tolerance_defaults() {
        let t = tol();
        assert_eq!(t.abs_tol, 1e-10);
        assert_eq!(t.rel_tol, 1e-12);
        assert_eq!(t.max_iter, 200);
        assert!(Tolerance::<f64>::new(0.0, 0.0, 10).is_err());
        assert!(Tolerance::<f64>::new(1e-8, -1.0, 10).is_err());
        assert!(Tolerance::<f64>::new(1e-8, 0.0, 0).is_err());
    }

    #[test]
    fn bracket_requires_order() {
        assert!(Bracket::new(1.0, 1.0).is_err());
        assert!(Bracket::new(2.0, 1.0).is_err());
        assert!(Bracket::new(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn root_of_linear() {
        let x = find_root(|x| x - 1.0, br(0.0, 2.0), &tol()).unwrap();
        assert!((x - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn root_of_sqrt2() {
        let x = find_root(|x| x * x - 2.0, br(0.0, 2.0), &tol()).unwrap();
        assert!((x - 2f64.sqrt()).abs() <= 1e-10);
    }

    #[test]
    fn root_of_foc_quadratic() {
        // (51 - sqrt(105)) / 4 by the quadratic formula
        let expected = (51.0 - 105f64.sqrt()) / 4.0;
        let x = find_root(|p| 2.0 * p * p - 51.0 * p + 312.0, br(0.0, 12.0), &tol()).unwrap();
        assert!((x - expected).abs() <= 1e-10);
        assert!((x - 10.18826).abs() < 1e-5);
    }

    #[test]
    fn root_without_sign_change() {
        let err = find_root(|x| x * x + 1.0, br(-1.0, 1.0), &tol()).unwrap_err();
        assert!(matches!(err, Error::NoSignChange { .. }));
    }

    #[test]
    fn root_budget_exhausted() {
        let t = Tolerance::new(1e-300, 0.0, 3).unwrap();
        let err = find_root(|x| x * x * x - 0.3, br(0.0, 1.0), &t).unwrap_err();
        assert!(matches!(err, Error::MaxIterExceeded { iterations: 3, .. }));
    }

    #[test]
    fn root_reports_undefined_points() {
        let err = find_root(|x: f64| (x - 0.5).ln(), br(0.0, 2.0), &tol()).unwrap_err();
        assert!(matches!(err, Error::Domain { .. }));
    }

    #[test]
    fn maximize_parabola() {
        let m = maximize_1d(|x| -(x - 3.0) * (x - 3.0), br(0.0, 10.0), &tol()).unwrap();
        assert!((m.argmax - 3.0).abs() <= 1e-8);
        assert!(!m.degenerate);
    }

    #[test]
    fn maximize_best_response_profile() {
        // U1(p1) at p2 = 4, p_s = 0 on linear demand 12 - p
        let m = maximize_1d(|p| p * (12.0 - p - 4.0), br(0.0, 12.0), &tol()).unwrap();
        assert!((m.argmax - 4.0).abs() <= 1e-7);
        assert!((m.max - 16.0).abs() <= 1e-12);
    }

    #[test]
    fn maximize_flat_is_degenerate() {
        let m = maximize_1d(|_| 2.5, br(-1.0, 1.0), &tol()).unwrap();
        assert!(m.degenerate);
        assert!(m.argmax >= -1.0 && m.argmax <= 1.0);
        assert_eq!(m.max, 2.5);
    }

    #[test]
    fn maximize_on_boundary() {
        let m = maximize_1d(|x| x, br(0.0, 1.0), &tol()).unwrap();
        assert_eq!(m.argmax, 1.0);
    }

    #[test]
    fn fixed_point_examples() {
        let t = tol();
        let b = br(0.0, 100.0);
        assert!(fixed_point(|_| 0.0, 5.0, b, &t).unwrap().abs() <= 1e-10);
        assert!((fixed_point(|_| 7.0, 0.0, b, &t).unwrap() - 7.0).abs() <= 1e-10);
        // D = 12 (6 - D) / 6 has the solution (1/12 + 1/6)^-1 = 4
        let d = fixed_point(|d| 12.0 * (6.0 - d) / 6.0, 0.0, br(0.0, 12.0), &t).unwrap();
        assert!((d - 4.0).abs() <= 1e-9);
    }

    #[test]
    fn fixed_point_falls_back_when_iteration_diverges() {
        // slope -50: damped iteration cannot contract, root finding takes over
        let h = |x: f64| (100.0 - 50.0 * x).max(0.0);
        let x = fixed_point(h, 0.0, br(0.0, 100.0), &tol()).unwrap();
        assert!((x - h(x)).abs() <= 1e-9);
        assert!((x - 100.0 / 51.0).abs() <= 1e-10);
    }

    #[test]
    fn fixed_point_rejects_bad_damping() {
        assert!(fixed_point_damped(|x| x, 0.0, br(0.0, 1.0), &tol(), 0.0).is_err());
        assert!(fixed_point_damped(|x| x, 0.0, br(0.0, 1.0), &tol(), 1.5).is_err());
    }

    #[test]
    fn central_differences_on_quadratic() {
        let sq = |x: f64| x * x;
        let d1 = fd_derivative(sq, 3.0, FdOrder::First, 1e-4).unwrap();
        assert!((d1 - 6.0).abs() <= 1e-8);
        let d2 = fd_derivative(sq, 3.0, FdOrder::Second, 1e-3).unwrap();
        assert!((d2 - 2.0).abs() <= 1e-4);
    }

    #[test]
    fn central_difference_of_concave_demand_is_negative() {
        // (1 / (12 - p) + 1/6)^-1 at p = 4
        let demand = |p: f64| 1.0 / (1.0 / (12.0 - p) + 1.0 / 6.0);
        let d2 = fd_derivative(demand, 4.0, FdOrder::Second, fd_step(4.0)).unwrap();
        assert!(d2 < 0.0);
    }

    #[test]
    fn central_difference_domain_error() {
        let err = fd_derivative(|x: f64| x.sqrt(), 0.0, FdOrder::First, 1e-3).unwrap_err();
        assert!(matches!(err, Error::Domain { .. }));
        assert!(fd_derivative(|x: f64| x, 0.0, FdOrder::First, 0.0).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let x = find_root(
            |x: f32| x * x - 2.0,
            Bracket::new(0.0f32, 2.0).unwrap(),
            &Tolerance::default(),
        )
        .unwrap();
        assert!((x - 2f32.sqrt()).abs() <= 1e-5);
        let m = maximize_1d(
            |x: f32| -(x - 3.0) * (x - 3.0),
            Bracket::new(0.0f32, 10.0).unwrap(),
            &Tolerance::default(),
        )
        .unwrap();
        assert!((m.argmax - 3.0).abs() <= 1e-3);
    }
}
