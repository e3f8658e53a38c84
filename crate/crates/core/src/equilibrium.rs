//! Interior Nash equilibria of the ISP/CP pricing game.
//!
//! The ISP (player 1) sets `p1`, the CP (player 2) sets `p2`, and end users
//! respond to the total price `p = p1 + p2` with demand `D(p)`. A regulated
//! side payment `p_s`, scaled by `side_payment_scale`, flows from CP to ISP
//! when positive:
//!
//! ```text
//! U1 = (p1 + s) D(p) - c        U2 = (p2 - s) D(p),      s = scale * p_s
//! ```
//!
//! At an interior equilibrium both players' first-order conditions give
//! `p1 + s = p/2 = p2 - s`, with `p*` the root of `D(p) + D'(p) p / 2 = 0`.

use serde::Serialize;

use crate::demand::{self, CongestionKind, DemandParams};
use crate::error::{invalid, Error, Result};
use crate::numerics::{self, Bracket, Tolerance};
use crate::scalar::Scalar;

/// Gain threshold above which a unilateral deviation counts as improving.
pub const DEVIATION_GAIN_TOL: f64 = 1e-9;

/// Relative validity margin below which a report flags boundary proximity.
pub const BOUNDARY_PROXIMITY: f64 = 1e-2;

/// Game parameters shared by both players.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GameSpec<T> {
    pub demand: DemandParams<T>,
    /// Side payment `p_s`; positive flows CP to ISP.
    pub side_payment: T,
    /// Multiplier on `p_s`: 1 on the Internet, `1 - κ` under ICN caching.
    pub side_payment_scale: T,
    /// Fixed cost subtracted from the ISP utility (caching cost under ICN).
    pub fixed_cost_isp: T,
}

impl<T: Scalar> GameSpec<T> {
    pub fn new(
        demand: DemandParams<T>,
        side_payment: T,
        side_payment_scale: T,
        fixed_cost_isp: T,
    ) -> Result<Self> {
        if !side_payment.is_finite() {
            return Err(invalid(format!(
                "side payment must be finite, got {side_payment}"
            )));
        }
        if !(side_payment_scale >= T::zero() && side_payment_scale <= T::one()) {
            return Err(invalid(format!(
                "side payment scale must lie in [0, 1], got {side_payment_scale}"
            )));
        }
        if !(fixed_cost_isp >= T::zero()) || !fixed_cost_isp.is_finite() {
            return Err(invalid(format!(
                "ISP fixed cost must be nonnegative, got {fixed_cost_isp}"
            )));
        }
        Ok(Self {
            demand,
            side_payment,
            side_payment_scale,
            fixed_cost_isp,
        })
    }

    /// Unscaled side payment, no fixed cost.
    pub fn simple(demand: DemandParams<T>, side_payment: T) -> Result<Self> {
        Self::new(demand, side_payment, T::one(), T::zero())
    }

    /// `scale * p_s`.
    pub fn effective_side_payment(&self) -> T {
        self.side_payment_scale * self.side_payment
    }

    fn side_payment_error(&self, bound: T) -> Error {
        let kappa = self.demand.kappa();
        Error::SidePaymentTooLarge {
            effective: self.effective_side_payment().as_f64(),
            bound: bound.as_f64(),
            kappa: (kappa > T::zero()).then(|| kappa.as_f64()),
        }
    }
}

/// The two players.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Player {
    /// Player 1, the access provider.
    Isp,
    /// Player 2, the content provider.
    Cp,
}

/// How an equilibrium was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    ClosedFormLinear,
    ClosedFormConcave,
    NumericFoc,
    BestResponseIteration,
}

impl SolveMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveMethod::ClosedFormLinear => "closed_form_linear",
            SolveMethod::ClosedFormConcave => "closed_form_concave",
            SolveMethod::NumericFoc => "numeric_foc",
            SolveMethod::BestResponseIteration => "best_response_iteration",
        }
    }
}

/// Equilibrium prices, demand and utilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Equilibrium<T> {
    pub p1: T,
    pub p2: T,
    /// Always exactly `p1 + p2`.
    pub p_total: T,
    pub demand_at_eq: T,
    pub u1: T,
    pub u2: T,
    pub method: SolveMethod,
    /// `|D(p) + D'(p) p / 2|` at `p_total`.
    pub foc_residual: T,
    /// `|scale * p_s| < p_total / 2`.
    pub valid_interior: bool,
}

fn total_demand<T: Scalar>(p: T, spec: &GameSpec<T>) -> Result<T> {
    Ok(demand::demand(p, &spec.demand)?.value)
}

/// ISP utility `(p1 + s) D(p1 + p2) - c`.
pub fn utility_isp<T: Scalar>(p1: T, p2: T, spec: &GameSpec<T>) -> Result<T> {
    let d = total_demand(p1 + p2, spec)?;
    Ok((p1 + spec.effective_side_payment()) * d - spec.fixed_cost_isp)
}

/// CP utility `(p2 - s) D(p1 + p2)`.
pub fn utility_cp<T: Scalar>(p1: T, p2: T, spec: &GameSpec<T>) -> Result<T> {
    let d = total_demand(p1 + p2, spec)?;
    Ok((p2 - spec.effective_side_payment()) * d)
}

fn utility<T: Scalar>(player: Player, own: T, other: T, spec: &GameSpec<T>) -> Result<T> {
    match player {
        Player::Isp => utility_isp(own, other, spec),
        Player::Cp => utility_cp(other, own, spec),
    }
}

/// Own-price margin that multiplies demand in a player's utility.
fn margin<T: Scalar>(player: Player, own: T, spec: &GameSpec<T>) -> T {
    match player {
        Player::Isp => own + spec.effective_side_payment(),
        Player::Cp => own - spec.effective_side_payment(),
    }
}

/// `F(p) = D(p) + D'(p) p / 2`; its root is the equilibrium total price.
pub fn foc_residual<T: Scalar>(p: T, spec: &GameSpec<T>) -> Result<T> {
    let d = total_demand(p, spec)?;
    let slope = demand::demand_derivative(p, &spec.demand)?;
    Ok(d + slope * p / T::lit(2.0))
}

/// Builds the equilibrium record for total price `p_star` split as
/// `p1 = p*/2 - s`, `p2 = p*/2 + s`.
fn split<T: Scalar>(spec: &GameSpec<T>, p_star: T, method: SolveMethod) -> Result<Equilibrium<T>> {
    let half = p_star / T::lit(2.0);
    let s = spec.effective_side_payment();
    equilibrium_at(half - s, half + s, spec, method)
}

/// Equilibrium record for arbitrary prices (e.g. the end of best-response
/// dynamics), with validity judged against `p_total / 2`.
pub fn equilibrium_at<T: Scalar>(
    p1: T,
    p2: T,
    spec: &GameSpec<T>,
    method: SolveMethod,
) -> Result<Equilibrium<T>> {
    let p_total = p1 + p2;
    let d = total_demand(p_total, spec)?;
    let s = spec.effective_side_payment();
    Ok(Equilibrium {
        p1,
        p2,
        p_total,
        demand_at_eq: d,
        u1: (p1 + s) * d - spec.fixed_cost_isp,
        u2: (p2 - s) * d,
        method,
        foc_residual: foc_residual(p_total, spec)?.abs(),
        valid_interior: s.abs() < p_total / T::lit(2.0),
    })
}

/// Equilibrium of the linear-demand game:
/// `p1 = D_max/(3d) - s`, `p2 = D_max/(3d) + s`, `U1 = U2 = D_max²/(9d)`.
pub fn nash_linear<T: Scalar>(spec: &GameSpec<T>) -> Result<Equilibrium<T>> {
    if !spec.demand.is_linear() {
        return Err(Error::ModelMismatch(
            "linear equilibrium needs linear demand (no congestion or kappa = 1)",
        ));
    }
    let d_max = spec.demand.d_max();
    let d = spec.demand.d_sens();
    let third = d_max / (T::lit(3.0) * d);
    let s = spec.effective_side_payment();
    if !(s.abs() < third) {
        return Err(spec.side_payment_error(third));
    }
    let p1 = third - s;
    let p2 = third + s;
    let p_total = p1 + p2;
    let u = d_max * d_max / (T::lit(9.0) * d);
    Ok(Equilibrium {
        p1,
        p2,
        p_total,
        demand_at_eq: d_max / T::lit(3.0),
        u1: u - spec.fixed_cost_isp,
        u2: u,
        method: SolveMethod::ClosedFormLinear,
        foc_residual: foc_residual(p_total, spec)?.abs(),
        valid_interior: true,
    })
}

/// Closed-form equilibrium total price for `D = (1/(D_max - d p) + a)⁻¹`.
///
/// `(4aD_max + 3 - sqrt(8aD_max + 9)) / (4ad)` with the numerator
/// rationalized to `p_max (1 - 2 / (3 + sqrt(8aD_max + 9)))`, which is
/// free of cancellation as `a -> 0` and equals `2 p_max / 3` at `a = 0`.
pub fn concave_total_price<T: Scalar>(d_max: T, d_sens: T, a: T) -> T {
    let root = (T::lit(8.0) * a * d_max + T::lit(9.0)).sqrt();
    d_max / d_sens * (T::one() - T::lit(2.0) / (T::lit(3.0) + root))
}

/// Equilibrium from the closed-form total price, split by the side payment.
pub fn nash_concave_closed<T: Scalar>(spec: &GameSpec<T>) -> Result<Equilibrium<T>> {
    if spec.demand.kind() == CongestionKind::Mm1 {
        return Err(Error::ModelMismatch(
            "closed-form equilibrium needs a linear or absent congestion factor",
        ));
    }
    let p_star = concave_total_price(spec.demand.d_max(), spec.demand.d_sens(), spec.demand.a());
    let eq = split(spec, p_star, SolveMethod::ClosedFormConcave)?;
    if !eq.valid_interior {
        return Err(spec.side_payment_error(p_star / T::lit(2.0)));
    }
    Ok(eq)
}

/// `[1e-6 p_max, (1 - 1e-6) p_max]`: `F > 0` near zero and `F < 0` near
/// `p_max` for any strictly decreasing demand.
pub fn default_foc_bracket<T: Scalar>(spec: &GameSpec<T>) -> Bracket<T> {
    let p_max = spec.demand.p_max();
    let eps = T::lit(1e-6);
    Bracket {
        lo: eps * p_max,
        hi: (T::one() - eps) * p_max,
    }
}

fn foc_tolerance<T: Scalar>() -> Tolerance<T> {
    Tolerance::at_least(1e-14, 1e-15, 400)
}

/// Equilibrium total price as the root of `D(p) + D'(p) p / 2` on
/// `bracket`. Works for every congestion kind.
pub fn nash_numeric_foc<T: Scalar>(
    spec: &GameSpec<T>,
    bracket: Bracket<T>,
) -> Result<Equilibrium<T>> {
    let p_star = foc_total_price(spec, bracket)?;
    let eq = split(spec, p_star, SolveMethod::NumericFoc)?;
    if !eq.valid_interior {
        return Err(spec.side_payment_error(p_star / T::lit(2.0)));
    }
    Ok(eq)
}

/// Root of `D(p) + D'(p) p / 2` on `bracket`.
pub fn foc_total_price<T: Scalar>(spec: &GameSpec<T>, bracket: Bracket<T>) -> Result<T> {
    numerics::find_root(
        |p| foc_residual(p, spec).unwrap_or_else(|_| T::nan()),
        bracket,
        &foc_tolerance(),
    )
}

/// Interior equilibrium candidate without the side-payment check: closed
/// form where one exists, numeric first-order condition for M/M/1
/// congestion. Callers inspect `valid_interior`.
pub fn equilibrium_candidate<T: Scalar>(spec: &GameSpec<T>) -> Result<Equilibrium<T>> {
    match spec.demand.kind() {
        CongestionKind::Mm1 => {
            let p_star = foc_total_price(spec, default_foc_bracket(spec))?;
            split(spec, p_star, SolveMethod::NumericFoc)
        }
        _ => {
            let d = &spec.demand;
            let p_star = concave_total_price(d.d_max(), d.d_sens(), d.a());
            split(spec, p_star, SolveMethod::ClosedFormConcave)
        }
    }
}

/// A player's best reply to the other's price.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BestResponse<T> {
    pub price: T,
    pub utility: T,
    /// The feasible own-price interval was empty or the utility flat on it.
    pub degenerate: bool,
}

/// Own-price interval `[max(0, ∓s), p_max - p_other]` on which a player's
/// margin is nonnegative and total demand is defined.
fn own_price_range<T: Scalar>(player: Player, p_other: T, spec: &GameSpec<T>) -> (T, T) {
    let s = spec.effective_side_payment();
    let lower = match player {
        Player::Isp => (-s).max(T::zero()),
        Player::Cp => s.max(T::zero()),
    };
    (lower, spec.demand.p_max() - p_other)
}

/// `∂U/∂p_own = D(p) + margin D'(p)`.
fn marginal_utility<T: Scalar>(player: Player, own: T, other: T, spec: &GameSpec<T>) -> Result<T> {
    let p = own + other;
    let d = total_demand(p, spec)?;
    let slope = demand::demand_derivative(p, &spec.demand)?;
    Ok(d + margin(player, own, spec) * slope)
}

/// Best response of `player` to `p_other`.
///
/// Golden-section search over the feasible own-price interval (utility is
/// concave in own price there); an interior maximizer is then sharpened by
/// a bracketed root of the marginal utility around the search result.
pub fn best_response<T: Scalar>(
    player: Player,
    p_other: T,
    spec: &GameSpec<T>,
) -> Result<BestResponse<T>> {
    let p_max = spec.demand.p_max();
    if !p_other.is_finite() || p_other < T::zero() || p_other > p_max {
        return Err(Error::PriceOutOfRange {
            price: p_other.as_f64(),
            p_max: p_max.as_f64(),
        });
    }
    let (lower, upper) = own_price_range(player, p_other, spec);
    if !(upper > lower) {
        // no room to price: demand is zero at any feasible own price
        let at = lower.min(p_max - p_other).max(T::zero());
        let margin = margin(player, lower, spec);
        let cost = if player == Player::Isp {
            spec.fixed_cost_isp
        } else {
            T::zero()
        };
        let d = total_demand(at + p_other, spec)?;
        return Ok(BestResponse {
            price: lower,
            utility: margin * d - cost,
            degenerate: true,
        });
    }

    let bracket = Bracket::new(lower, upper)?;
    let tol = Tolerance::default();
    let found = numerics::maximize_1d(
        |own| utility(player, own, p_other, spec).unwrap_or_else(|_| T::nan()),
        bracket,
        &tol,
    )?;

    let mut price = found.argmax;
    if price > lower && price < upper {
        let reach = T::lit(1e-6) * T::one().max(p_max);
        let lo = (price - reach).max(lower);
        let hi = (price + reach).min(upper);
        let mu = |own: T| marginal_utility(player, own, p_other, spec).unwrap_or_else(|_| T::nan());
        let (m_lo, m_hi) = (mu(lo), mu(hi));
        if m_lo >= T::zero() && m_hi <= T::zero() {
            if let Ok(polished) = numerics::find_root(mu, Bracket::new(lo, hi)?, &foc_tolerance()) {
                price = polished;
            }
        }
    }
    let utility = utility(player, price, p_other, spec)?;
    Ok(BestResponse {
        price,
        utility,
        degenerate: found.degenerate,
    })
}

/// Update order for best-response dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateMode {
    /// Both players respond to the previous round's prices.
    #[default]
    Simultaneous,
    /// The ISP moves first; the CP responds to the ISP's new price.
    Sequential,
}

/// Price path of best-response dynamics; `points[0]` is the initial pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory<T> {
    pub points: Vec<(T, T)>,
    pub converged: bool,
}

impl<T: Scalar> Trajectory<T> {
    pub fn last(&self) -> (T, T) {
        *self
            .points
            .last()
            .expect("trajectory holds the initial point")
    }
}

/// Iterated best responses for `rounds` rounds. Convergence means the last
/// two iterates differ by less than `tol` in both coordinates.
pub fn best_response_dynamics<T: Scalar>(
    spec: &GameSpec<T>,
    init: (T, T),
    rounds: usize,
    mode: UpdateMode,
    tol: T,
) -> Result<Trajectory<T>> {
    if rounds == 0 {
        return Err(invalid("best-response dynamics needs at least one round"));
    }
    let p_max = spec.demand.p_max();
    let (p1, p2) = init;
    if !(p1 >= T::zero() && p2 >= T::zero() && p1 + p2 <= p_max) {
        return Err(invalid(format!(
            "initial prices ({p1}, {p2}) must be nonnegative with sum at most {p_max}"
        )));
    }

    let mut points = Vec::with_capacity(rounds + 1);
    points.push(init);
    let mut current = init;
    for _ in 0..rounds {
        let next1 = best_response(Player::Isp, current.1, spec)?.price;
        let next2 = match mode {
            UpdateMode::Simultaneous => best_response(Player::Cp, current.0, spec)?.price,
            UpdateMode::Sequential => best_response(Player::Cp, next1, spec)?.price,
        };
        current = (next1, next2);
        points.push(current);
    }
    let prev = points[points.len() - 2];
    let converged = (current.0 - prev.0).abs() < tol && (current.1 - prev.1).abs() < tol;
    Ok(Trajectory { points, converged })
}

/// Outcome of scanning one player's unilateral deviations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeviationCheck<T> {
    /// Deviation price with the largest utility gain.
    pub best_price: T,
    /// Largest gain over the equilibrium utility (may be negative).
    pub best_gain: T,
    pub improving: bool,
}

/// Definitional Nash check on a uniform deviation grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NashReport<T> {
    pub passed: bool,
    pub isp: DeviationCheck<T>,
    pub cp: DeviationCheck<T>,
    /// `1 - |s| / (p_total / 2)`; nonpositive when the validity bound fails.
    pub validity_margin: T,
    pub near_boundary: bool,
    pub n_deviations: usize,
}

fn scan_deviations<T: Scalar>(
    player: Player,
    own: T,
    other: T,
    spec: &GameSpec<T>,
    n: usize,
) -> Result<DeviationCheck<T>> {
    let base = utility(player, own, other, spec)?;
    let (lower, upper) = own_price_range(player, other, spec);
    let mut best = DeviationCheck {
        best_price: own,
        best_gain: T::neg_infinity(),
        improving: false,
    };
    if !(upper > lower) || n == 0 {
        best.best_gain = T::zero();
        return Ok(best);
    }
    let steps = T::from_usize(n.saturating_sub(1).max(1)).unwrap_or_else(T::one);
    for i in 0..n {
        let frac = T::from_usize(i).unwrap_or_else(T::zero) / steps;
        let price = (lower + (upper - lower) * frac).min(upper);
        let gain = utility(player, price, other, spec)? - base;
        if gain > best.best_gain {
            best.best_gain = gain;
            best.best_price = price;
        }
    }
    best.improving = best.best_gain > T::lit(DEVIATION_GAIN_TOL);
    Ok(best)
}

/// Checks that neither player gains more than [`DEVIATION_GAIN_TOL`] by a
/// unilateral deviation to any of `n_deviations` grid prices.
pub fn verify_nash<T: Scalar>(
    eq: &Equilibrium<T>,
    spec: &GameSpec<T>,
    n_deviations: usize,
) -> Result<NashReport<T>> {
    let isp = scan_deviations(Player::Isp, eq.p1, eq.p2, spec, n_deviations)?;
    let cp = scan_deviations(Player::Cp, eq.p2, eq.p1, spec, n_deviations)?;
    let half = eq.p_total / T::lit(2.0);
    let validity_margin = if half > T::zero() {
        T::one() - spec.effective_side_payment().abs() / half
    } else {
        T::neg_infinity()
    };
    Ok(NashReport {
        passed: eq.valid_interior && !isp.improving && !cp.improving,
        isp,
        cp,
        validity_margin,
        near_boundary: validity_margin < T::lit(BOUNDARY_PROXIMITY),
        n_deviations,
    })
}
