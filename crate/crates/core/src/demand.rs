//! Congestion-sensitive demand response.
//!
//! End users see the price-only demand `D̃(p) = D_max - d p`. Realized
//! demand is reduced by a congestion factor `g` that depends on the load
//! carried over the CP-ISP link, so it solves `D = [g_κ(D) D̃(p)]⁺` where
//! `g_κ(D) = g((1 - κ) D)`: only the uncached fraction of demand crosses
//! the link.
//!
//! For the linear factor `g(x) = (B - λ - x) / (B - λ)` the fixed point
//! has the closed form `D = (1/D̃ + a)⁻¹` with `a = (1 - κ) / (B - λ)`.
//! The M/M/1-motivated factor has no closed form and is only served by
//! the fixed-point solver.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::{self, Bracket, Tolerance};
use crate::scalar::Scalar;

/// Shape of the congestion factor `g`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CongestionKind {
    /// `g(x) = (B - λ - x) / (B - λ)`.
    Linear,
    /// `g(x) = (1 - λ / (B - x)) / (1 - λ / B)`, from M/M/1 mean delay.
    Mm1,
    /// `g ≡ 1`: demand is linear in price.
    Uncongested,
}

/// Parameters of a demand-response function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DemandParams<T> {
    d_max: T,
    d_sens: T,
    bandwidth: T,
    lambda: T,
    kappa: T,
    kind: CongestionKind,
}

impl<T: Scalar> DemandParams<T> {
    /// `bandwidth` may be `+inf` (no capacity limit, `a = 0`).
    pub fn new(
        d_max: T,
        d_sens: T,
        bandwidth: T,
        lambda: T,
        kappa: T,
        kind: CongestionKind,
    ) -> Result<Self> {
        if !(d_max > T::zero()) || !d_max.is_finite() {
            return Err(invalid(format!(
                "d_max must be positive and finite, got {d_max}"
            )));
        }
        if !(d_sens > T::zero()) || !d_sens.is_finite() {
            return Err(invalid(format!(
                "price sensitivity d must be positive and finite, got {d_sens}"
            )));
        }
        if !(lambda >= T::zero()) || !lambda.is_finite() {
            return Err(invalid(format!(
                "lambda must be nonnegative and finite, got {lambda}"
            )));
        }
        if !(bandwidth > lambda) {
            return Err(invalid(format!(
                "bandwidth B = {bandwidth} must exceed lambda = {lambda}"
            )));
        }
        if !(kappa >= T::zero() && kappa <= T::one()) {
            return Err(invalid(format!(
                "caching factor kappa must lie in [0, 1], got {kappa}"
            )));
        }
        Ok(Self {
            d_max,
            d_sens,
            bandwidth,
            lambda,
            kappa,
            kind,
        })
    }

    /// Linear demand `D_max - d p` with no congestion.
    pub fn linear(d_max: T, d_sens: T) -> Result<Self> {
        Self::new(
            d_max,
            d_sens,
            T::infinity(),
            T::zero(),
            T::zero(),
            CongestionKind::Uncongested,
        )
    }

    /// Concave demand `(1/(D_max - d p) + a)⁻¹` parameterized directly by
    /// `a >= 0` (realized as `B = 1/a`, `λ = 0`, `κ = 0`).
    pub fn from_a(d_max: T, d_sens: T, a: T) -> Result<Self> {
        if !(a >= T::zero()) || !a.is_finite() {
            return Err(invalid(format!(
                "a must be nonnegative and finite, got {a}"
            )));
        }
        let bandwidth = if a > T::zero() {
            a.recip()
        } else {
            T::infinity()
        };
        Self::new(
            d_max,
            d_sens,
            bandwidth,
            T::zero(),
            T::zero(),
            CongestionKind::Linear,
        )
    }

    pub fn with_kappa(self, kappa: T) -> Result<Self> {
        Self::new(
            self.d_max,
            self.d_sens,
            self.bandwidth,
            self.lambda,
            kappa,
            self.kind,
        )
    }

    pub fn d_max(&self) -> T {
        self.d_max
    }

    pub fn d_sens(&self) -> T {
        self.d_sens
    }

    pub fn bandwidth(&self) -> T {
        self.bandwidth
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn kappa(&self) -> T {
        self.kappa
    }

    pub fn kind(&self) -> CongestionKind {
        self.kind
    }

    /// Price at which demand vanishes, `D_max / d`.
    pub fn p_max(&self) -> T {
        self.d_max / self.d_sens
    }

    /// `a = (1 - κ) / (B - λ)`, zero without congestion or at `κ = 1`.
    pub fn a(&self) -> T {
        match self.kind {
            CongestionKind::Uncongested => T::zero(),
            _ => (T::one() - self.kappa) / (self.bandwidth - self.lambda),
        }
    }

    /// Largest demand the link can carry, `(B - λ) / (1 - κ)`.
    pub fn link_capacity(&self) -> T {
        match self.kind {
            CongestionKind::Uncongested => T::infinity(),
            _ => {
                let uncached = T::one() - self.kappa;
                if uncached > T::zero() {
                    (self.bandwidth - self.lambda) / uncached
                } else {
                    T::infinity()
                }
            }
        }
    }

    /// Upper bound `min{(B - λ)/(1 - κ), D_max}` on realized demand.
    pub fn demand_bound(&self) -> T {
        self.link_capacity().min(self.d_max)
    }

    /// Demand is linear in price: no congestion, or everything cached.
    pub fn is_linear(&self) -> bool {
        self.a() == T::zero()
    }

    fn check_price(&self, p: T) -> Result<T> {
        let p_max = self.p_max();
        let slack = T::lit(8.0) * T::epsilon() * p_max;
        if !p.is_finite() || p < T::zero() || p > p_max + slack {
            return Err(Error::PriceOutOfRange {
                price: p.as_f64(),
                p_max: p_max.as_f64(),
            });
        }
        Ok(p.min(p_max))
    }

    /// Unclamped congestion factor at carried demand `dval`, or `None` when
    /// the M/M/1 queue is past saturation.
    fn raw_congestion(&self, dval: T) -> Option<T> {
        let load = (T::one() - self.kappa) * dval;
        match self.kind {
            CongestionKind::Uncongested => Some(T::one()),
            CongestionKind::Linear => Some(T::one() - load / (self.bandwidth - self.lambda)),
            CongestionKind::Mm1 => {
                if load >= self.bandwidth {
                    None
                } else {
                    let headroom = T::one() - self.lambda / self.bandwidth;
                    Some((T::one() - self.lambda / (self.bandwidth - load)) / headroom)
                }
            }
        }
    }

    /// Congestion factor clamped to `[0, 1]`; total on `dval >= 0`.
    fn clamped_congestion(&self, dval: T) -> (T, bool) {
        match self.raw_congestion(dval) {
            Some(g) if g < T::zero() => (T::zero(), true),
            Some(g) if g > T::one() => (T::one(), true),
            Some(g) => (g, false),
            None => (T::zero(), true),
        }
    }

    /// `dg_κ/dD` at carried demand `dval`, on the unclamped branch.
    fn congestion_slope(&self, dval: T) -> T {
        let uncached = T::one() - self.kappa;
        match self.kind {
            CongestionKind::Uncongested => T::zero(),
            CongestionKind::Linear => -self.a(),
            CongestionKind::Mm1 => {
                let free = self.bandwidth - uncached * dval;
                let headroom = T::one() - self.lambda / self.bandwidth;
                -self.lambda * uncached / (free * free * headroom)
            }
        }
    }
}

/// Realized demand, with a flag recording whether the `[·]⁺` clamp (or
/// the `[0, 1]` clamp on `g`) was active at the solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DemandValue<T> {
    pub value: T,
    pub clamped: bool,
}

/// Price-only demand `D̃(p) = D_max - p d`.
pub fn tilde_demand<T: Scalar>(p: T, params: &DemandParams<T>) -> Result<T> {
    let p = params.check_price(p)?;
    Ok((params.d_max - p * params.d_sens).max(T::zero()))
}

/// Congestion factor `g_κ(D) = g((1 - κ) D)`, clamped to `[0, 1]`.
pub fn congestion_factor<T: Scalar>(dval: T, params: &DemandParams<T>) -> Result<T> {
    if !(dval >= T::zero()) || !dval.is_finite() {
        return Err(invalid(format!(
            "carried demand must be nonnegative, got {dval}"
        )));
    }
    let load = (T::one() - params.kappa) * dval;
    if params.kind != CongestionKind::Uncongested && load >= params.bandwidth {
        return Err(Error::CapacityExceeded {
            load: load.as_f64(),
            capacity: params.bandwidth.as_f64(),
        });
    }
    Ok(params.clamped_congestion(dval).0)
}

/// Solves `D = [g_κ(D) D̃]⁺` for a given price-only demand `D̃ >= 0`.
///
/// The map `D ↦ g_κ(D) D̃` is nonincreasing, so the solution on
/// `[0, D̃]` is unique.
pub fn solve_congested_demand<T: Scalar>(
    tilde: T,
    params: &DemandParams<T>,
) -> Result<DemandValue<T>> {
    if !(tilde >= T::zero()) || !tilde.is_finite() {
        return Err(invalid(format!(
            "price-only demand must be nonnegative, got {tilde}"
        )));
    }
    if tilde == T::zero() {
        return Ok(DemandValue {
            value: T::zero(),
            clamped: false,
        });
    }
    if params.kind == CongestionKind::Uncongested || params.kappa == T::one() {
        return Ok(DemandValue {
            value: tilde,
            clamped: false,
        });
    }

    let tol = demand_tolerance(params);
    let map = |d: T| (params.clamped_congestion(d).0 * tilde).max(T::zero());
    let bracket = Bracket::new(T::zero(), tilde)?;
    let value = numerics::fixed_point(map, T::zero(), bracket, &tol)?;
    let clamped = value <= T::zero() || params.clamped_congestion(value).1;
    Ok(DemandValue { value, clamped })
}

fn demand_tolerance<T: Scalar>(params: &DemandParams<T>) -> Tolerance<T> {
    let scale = params.d_max.max(T::one()).as_f64();
    Tolerance::at_least(1e-13 * scale, 1e-15, 400)
}

/// Demand at price `p` as the fixed point of `D = [g_κ(D) D̃(p)]⁺`.
pub fn demand_fixed_point<T: Scalar>(p: T, params: &DemandParams<T>) -> Result<DemandValue<T>> {
    let tilde = tilde_demand(p, params)?;
    solve_congested_demand(tilde, params)
}

/// Closed-form demand `(1/D̃(p) + a)⁻¹`, evaluated as `D̃ / (1 + a D̃)` so
/// that `p = p_max` and `a = 0` need no special casing.
pub fn demand_closed_form<T: Scalar>(p: T, params: &DemandParams<T>) -> Result<DemandValue<T>> {
    if params.kind == CongestionKind::Mm1 {
        return Err(Error::ModelMismatch(
            "closed-form demand needs a linear or absent congestion factor",
        ));
    }
    let tilde = tilde_demand(p, params)?;
    let value = tilde / (T::one() + params.a() * tilde);
    Ok(DemandValue {
        value,
        clamped: false,
    })
}

/// Demand by the closed form where one exists, else by the fixed point.
pub fn demand<T: Scalar>(p: T, params: &DemandParams<T>) -> Result<DemandValue<T>> {
    match params.kind {
        CongestionKind::Mm1 => demand_fixed_point(p, params),
        _ => demand_closed_form(p, params),
    }
}

/// `dD/dp`, always strictly negative on the price domain.
///
/// Implicit differentiation of `D = g_κ(D) D̃` gives
/// `dD/dD̃ = g / (1 - D̃ g')`; with `dD̃/dp = -d` this reduces to
/// `-d (1 + a D̃)⁻²` for the linear factor.
pub fn demand_derivative<T: Scalar>(p: T, params: &DemandParams<T>) -> Result<T> {
    let tilde = tilde_demand(p, params)?;
    let d = params.d_sens;
    match params.kind {
        CongestionKind::Uncongested => Ok(-d),
        CongestionKind::Linear => {
            let denom = T::one() + params.a() * tilde;
            Ok(-d / (denom * denom))
        }
        CongestionKind::Mm1 => {
            let dv = solve_congested_demand(tilde, params)?.value;
            let (g, _) = params.clamped_congestion(dv);
            let slope = params.congestion_slope(dv);
            Ok(-d * g / (T::one() - tilde * slope))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{fd_derivative, fd_step, FdOrder};

    fn linear_g(b: f64, lambda: f64, kappa: f64) -> DemandParams<f64> {
        DemandParams::new(12.0, 1.0, b, lambda, kappa, CongestionKind::Linear).unwrap()
    }

    #[test]
    fn parameter_invariants() {
        use CongestionKind::*;
        assert!(DemandParams::new(0.0, 1.0, 10.0, 0.0, 0.0, Linear).is_err());
        assert!(DemandParams::new(12.0, 0.0, 10.0, 0.0, 0.0, Linear).is_err());
        assert!(DemandParams::new(12.0, 1.0, 4.0, 4.0, 0.0, Linear).is_err());
        assert!(DemandParams::new(12.0, 1.0, 10.0, -1.0, 0.0, Linear).is_err());
        assert!(DemandParams::new(12.0, 1.0, 10.0, 4.0, 1.1, Linear).is_err());
        assert!(DemandParams::new(12.0, 1.0, 10.0, 4.0, f64::NAN, Linear).is_err());
        assert!(DemandParams::from_a(12.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn derived_quantities() {
        let p = linear_g(10.0, 4.0, 0.5);
        assert_eq!(p.p_max(), 12.0);
        assert!((p.a() - 0.5 / 6.0).abs() < 1e-15);
        assert_eq!(p.link_capacity(), 12.0);
        assert_eq!(p.with_kappa(1.0).unwrap().a(), 0.0);
        assert!(p.with_kappa(1.0).unwrap().is_linear());
        assert_eq!(DemandParams::from_a(12.0, 1.0, 0.0).unwrap().a(), 0.0);
        assert_eq!(DemandParams::from_a(12.0, 1.0, 0.25).unwrap().a(), 0.25);
    }

    #[test]
    fn tilde_examples() {
        let p = DemandParams::linear(12.0, 1.0).unwrap();
        assert_eq!(tilde_demand(0.0, &p).unwrap(), 12.0);
        assert_eq!(tilde_demand(12.0, &p).unwrap(), 0.0);
        assert_eq!(tilde_demand(4.0, &p).unwrap(), 8.0);
        assert!(matches!(
            tilde_demand(-0.1, &p),
            Err(Error::PriceOutOfRange { .. })
        ));
        assert!(matches!(
            tilde_demand(12.5, &p),
            Err(Error::PriceOutOfRange { .. })
        ));
    }

    #[test]
    fn congestion_examples() {
        for kind in [
            CongestionKind::Linear,
            CongestionKind::Mm1,
            CongestionKind::Uncongested,
        ] {
            let p = DemandParams::new(12.0, 1.0, 10.0, 4.0, 0.0, kind).unwrap();
            assert_eq!(congestion_factor(0.0, &p).unwrap(), 1.0);
        }
        assert_eq!(
            congestion_factor(6.0, &linear_g(10.0, 4.0, 0.0)).unwrap(),
            0.0
        );
        // linear g_κ vanishes at (B - λ)/(1 - κ)
        assert!(
            congestion_factor(12.0, &linear_g(10.0, 4.0, 0.5))
                .unwrap()
                .abs()
                < 1e-15
        );

        let mm1 = DemandParams::<f64>::new(12.0, 1.0, 10.0, 5.0, 0.0, CongestionKind::Mm1).unwrap();
        assert!((congestion_factor(2.0, &mm1).unwrap() - 0.75).abs() < 1e-15);
        // past B - λ the M/M/1 factor would go negative
        assert_eq!(congestion_factor(6.0, &mm1).unwrap(), 0.0);
        assert!(matches!(
            congestion_factor(10.0, &mm1),
            Err(Error::CapacityExceeded { .. })
        ));
    }

    #[test]
    fn fixed_point_examples() {
        let at_pmax = demand_fixed_point(12.0, &linear_g(10.0, 4.0, 0.0)).unwrap();
        assert_eq!(at_pmax.value, 0.0);

        let free = DemandParams::linear(12.0, 1.0).unwrap();
        assert_eq!(demand_fixed_point(3.0, &free).unwrap().value, 9.0);

        let d = demand_fixed_point(0.0, &linear_g(10.0, 4.0, 0.0)).unwrap();
        assert!((d.value - 4.0).abs() < 1e-10);
        assert!(!d.clamped);
    }

    #[test]
    fn closed_form_examples() {
        let lin = DemandParams::from_a(12.0, 1.0, 0.0).unwrap();
        for p in [0.0, 1.5, 6.0, 11.9, 12.0] {
            assert_eq!(
                demand_closed_form(p, &lin).unwrap().value,
                tilde_demand(p, &lin).unwrap()
            );
        }
        let d0 = demand_closed_form(0.0, &linear_g(10.0, 4.0, 0.0))
            .unwrap()
            .value;
        assert!((d0 - 4.0).abs() < 1e-14);
        let d_half = demand_closed_form(0.0, &linear_g(10.0, 4.0, 0.5))
            .unwrap()
            .value;
        assert!((d_half - 6.0).abs() < 1e-14);

        let mm1 = DemandParams::new(12.0, 1.0, 10.0, 4.0, 0.0, CongestionKind::Mm1).unwrap();
        assert!(matches!(
            demand_closed_form(1.0, &mm1),
            Err(Error::ModelMismatch(_))
        ));
        assert!(matches!(
            demand_closed_form(13.0, &lin),
            Err(Error::PriceOutOfRange { .. })
        ));
    }

    #[test]
    fn derivative_examples() {
        let lin = DemandParams::linear(12.0, 1.0).unwrap();
        assert_eq!(demand_derivative(5.0, &lin).unwrap(), -1.0);

        let conc = DemandParams::<f64>::from_a(12.0, 1.0, 1.0).unwrap();
        let analytic = demand_derivative(4.0, &conc).unwrap();
        let fd = fd_derivative(
            |p| demand_closed_form(p, &conc).unwrap().value,
            4.0,
            FdOrder::First,
            fd_step(4.0),
        )
        .unwrap();
        assert!((analytic - fd).abs() < 1e-6);

        for p in [0.0, 3.0, 7.5, 11.99] {
            assert!(demand_derivative(p, &conc).unwrap() < 0.0);
        }
    }

    #[test]
    fn mm1_derivative_matches_finite_difference() {
        let mm1 = DemandParams::<f64>::new(12.0, 1.0, 20.0, 2.0, 0.3, CongestionKind::Mm1).unwrap();
        for p in [1.0, 4.0, 9.0] {
            let analytic = demand_derivative(p, &mm1).unwrap();
            let fd = fd_derivative(
                |q| demand_fixed_point(q, &mm1).unwrap().value,
                p,
                FdOrder::First,
                1e-4,
            )
            .unwrap();
            assert!((analytic - fd).abs() < 1e-6, "p={p}: {analytic} vs {fd}");
            assert!(analytic < 0.0);
        }
    }

    #[test]
    fn single_precision_closed_form() {
        let p =
            DemandParams::<f32>::new(12.0, 1.0, 10.0, 4.0, 0.0, CongestionKind::Linear).unwrap();
        let d = demand_closed_form(0.0f32, &p).unwrap().value;
        assert!((d - 4.0).abs() < 1e-5);
        let fp = demand_fixed_point(0.0f32, &p).unwrap().value;
        assert!((fp - 4.0).abs() < 1e-4);
    }
}
