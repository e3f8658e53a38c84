//! Internet and ICN scenarios and caching-factor sweeps.
//!
//! On the Internet the CP pays the ISP (`p_s >= 0`) and nothing is cached.
//! Under ICN the ISP pays the CP (`p_s <= 0`) and caches a fraction `κ` of
//! content, which shrinks the congestion parameter to `a = (1-κ)/(B-λ)`,
//! scales the side payment to `(1-κ) p_s`, and costs the ISP `c(κ)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::caching::{cost_of_kappa, CachingCostModel};
use crate::demand::DemandParams;
use crate::equilibrium::{equilibrium_candidate, GameSpec};
use crate::error::{invalid, Error, Result};
use crate::numerics::{maximize_1d, Bracket, Tolerance};
use crate::scalar::Scalar;

/// Number of points in the default caching-factor grid.
pub const DEFAULT_GRID_POINTS: usize = 101;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Internet,
    Icn,
}

/// `n` uniform points on `[0, 1]`.
pub fn uniform_kappa_grid<T: Scalar>(n: usize) -> Vec<T> {
    match n {
        0 => Vec::new(),
        1 => vec![T::zero()],
        _ => {
            let last = T::from_usize(n - 1).unwrap_or_else(T::one);
            (0..n)
                .map(|i| (T::from_usize(i).unwrap_or_else(T::zero) / last).min(T::one()))
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig<T> {
    pub regime: Regime,
    /// Demand parameters; their own `κ` is ignored and set per grid point.
    pub demand: DemandParams<T>,
    pub side_payment: T,
    /// Caching cost; `None` means caching is free.
    pub cost_model: Option<CachingCostModel<T>>,
    pub kappa_grid: Vec<T>,
}

impl<T: Scalar> ScenarioConfig<T> {
    pub fn new(
        regime: Regime,
        demand: DemandParams<T>,
        side_payment: T,
        cost_model: Option<CachingCostModel<T>>,
        kappa_grid: Vec<T>,
    ) -> Result<Self> {
        if !side_payment.is_finite() {
            return Err(invalid(format!(
                "side payment must be finite, got {side_payment}"
            )));
        }
        match regime {
            Regime::Internet if side_payment < T::zero() => {
                return Err(invalid(
                    "the Internet regime takes a CP-to-ISP side payment (p_s >= 0)",
                ));
            }
            Regime::Icn if side_payment > T::zero() => {
                return Err(invalid(
                    "the ICN regime takes an ISP-to-CP side payment (p_s <= 0)",
                ));
            }
            _ => {}
        }
        if kappa_grid
            .iter()
            .any(|k| !(*k >= T::zero() && *k <= T::one()))
        {
            return Err(invalid("caching factors in the grid must lie in [0, 1]"));
        }
        if kappa_grid.windows(2).any(|w| w[1] < w[0]) {
            return Err(invalid("caching-factor grid must be sorted ascending"));
        }
        Ok(Self {
            regime,
            demand,
            side_payment,
            cost_model,
            kappa_grid,
        })
    }

    /// ICN scenario on the default 101-point grid.
    pub fn icn(
        demand: DemandParams<T>,
        side_payment: T,
        cost_model: Option<CachingCostModel<T>>,
    ) -> Result<Self> {
        Self::new(
            Regime::Icn,
            demand,
            side_payment,
            cost_model,
            uniform_kappa_grid(DEFAULT_GRID_POINTS),
        )
    }

    fn game_at(&self, kappa: T) -> Result<(GameSpec<T>, T)> {
        if !(kappa >= T::zero() && kappa <= T::one()) {
            return Err(invalid(format!(
                "caching factor must lie in [0, 1], got {kappa}"
            )));
        }
        let (kappa, scale, cost) = match self.regime {
            Regime::Internet => (T::zero(), T::one(), T::zero()),
            Regime::Icn => {
                let cost = match &self.cost_model {
                    Some(model) => cost_of_kappa(kappa, model)?,
                    None => T::zero(),
                };
                (kappa, T::one() - kappa, cost)
            }
        };
        let demand = self.demand.with_kappa(kappa)?;
        Ok((
            GameSpec::new(demand, self.side_payment, scale, cost)?,
            kappa,
        ))
    }
}

/// Equilibrium summary at one caching factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRecord<T> {
    pub kappa: T,
    pub a: T,
    pub p1: T,
    pub p2: T,
    pub p_total: T,
    pub demand: T,
    /// ISP utility net of `cache_cost`.
    pub u1: T,
    pub u2: T,
    pub cache_cost: T,
    pub valid_interior: bool,
}

impl<T: Scalar> SweepRecord<T> {
    /// ISP utility before the caching cost.
    pub fn gross_u1(&self) -> T {
        self.u1 + self.cache_cost
    }
}

fn record_at<T: Scalar>(config: &ScenarioConfig<T>, kappa: T) -> Result<SweepRecord<T>> {
    let (spec, kappa) = config.game_at(kappa)?;
    let eq = equilibrium_candidate(&spec)?;
    Ok(SweepRecord {
        kappa,
        a: spec.demand.a(),
        p1: eq.p1,
        p2: eq.p2,
        p_total: eq.p_total,
        demand: eq.demand_at_eq,
        u1: eq.u1,
        u2: eq.u2,
        cache_cost: spec.fixed_cost_isp,
        valid_interior: eq.valid_interior,
    })
}

/// Interior equilibrium of the scenario at caching factor `kappa` (forced to
/// 0 on the Internet). Fails with the offending `κ` when
/// `|(1-κ) p_s| >= p*/2`.
pub fn solve_scenario<T: Scalar>(config: &ScenarioConfig<T>, kappa: T) -> Result<SweepRecord<T>> {
    let record = record_at(config, kappa)?;
    if !record.valid_interior {
        return Err(Error::SidePaymentTooLarge {
            effective: (record.p2 - record.p1).as_f64() / 2.0,
            bound: (record.p_total / T::lit(2.0)).as_f64(),
            kappa: Some(record.kappa.as_f64()),
        });
    }
    Ok(record)
}

/// One record per grid point, in grid order. Points violating the
/// side-payment bound are kept with `valid_interior = false`.
pub fn kappa_sweep<T: Scalar>(config: &ScenarioConfig<T>) -> Result<Vec<SweepRecord<T>>> {
    if config.kappa_grid.is_empty() {
        return Err(invalid("caching-factor grid is empty"));
    }
    config
        .kappa_grid
        .par_iter()
        .map(|&kappa| record_at(config, kappa))
        .collect()
}

/// Maximizer of the net ISP utility over `κ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimalKappa<T> {
    pub kappa_star: T,
    pub record: SweepRecord<T>,
    /// Local maxima found by the coarse scan.
    pub local_maxima: usize,
    /// More than one local maximum: `U1*(κ)` is not unimodal on the grid.
    pub not_unimodal: bool,
}

fn objective<T: Scalar>(record: &SweepRecord<T>) -> T {
    if record.valid_interior {
        record.u1
    } else {
        T::neg_infinity()
    }
}

/// Coarse scan of `U1*(κ)` on 101 points, then golden-section refinement
/// around every local maximum; returns the best candidate. Caching factors
/// without an interior equilibrium are excluded.
pub fn optimal_kappa<T: Scalar>(
    config: &ScenarioConfig<T>,
    refine_tol: T,
) -> Result<OptimalKappa<T>> {
    if config.regime != Regime::Icn {
        return Err(Error::ModelMismatch(
            "caching-factor optimization applies to the ICN regime",
        ));
    }
    if !(refine_tol > T::zero()) {
        return Err(invalid(format!(
            "refinement tolerance must be positive, got {refine_tol}"
        )));
    }
    let grid: Vec<T> = uniform_kappa_grid(DEFAULT_GRID_POINTS);
    let values = grid
        .par_iter()
        .map(|&k| record_at(config, k).map(|r| objective(&r)))
        .collect::<Result<Vec<T>>>()?;

    let last = grid.len() - 1;
    let peaks: Vec<usize> = (0..=last)
        .filter(|&i| values[i].is_finite())
        .filter(|&i| {
            (i == 0 || values[i] > values[i - 1]) && (i == last || values[i] >= values[i + 1])
        })
        .collect();
    if peaks.is_empty() {
        return Err(Error::SidePaymentTooLarge {
            effective: config.side_payment.as_f64(),
            bound: f64::NAN,
            kappa: None,
        });
    }

    let tol = Tolerance::at_least(refine_tol.as_f64(), 0.0, 200);
    let mut best = (grid[peaks[0]], values[peaks[0]]);
    for &i in &peaks {
        if values[i] > best.1 {
            best = (grid[i], values[i]);
        }
        let lo = grid[i.saturating_sub(1)];
        let hi = grid[(i + 1).min(last)];
        let refined = maximize_1d(
            |k| {
                record_at(config, k)
                    .map(|r| objective(&r))
                    .unwrap_or_else(|_| T::nan())
            },
            Bracket::new(lo, hi)?,
            &tol,
        )?;
        if refined.max > best.1 {
            best = (refined.argmax, refined.max);
        }
    }

    let record = record_at(config, best.0)?;
    Ok(OptimalKappa {
        kappa_star: best.0,
        record,
        local_maxima: peaks.len(),
        not_unimodal: peaks.len() > 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::caching::PopularityDistribution;
    use crate::demand::CongestionKind;
    use crate::equilibrium::concave_total_price;

    fn demand() -> DemandParams<f64> {
        DemandParams::new(12.0, 1.0, 10.0, 4.0, 0.0, CongestionKind::Linear).unwrap()
    }

    fn uniform_cost(gamma: f64) -> Option<CachingCostModel<f64>> {
        Some(CachingCostModel::new(PopularityDistribution::uniform(1000).unwrap(), gamma).unwrap())
    }

    #[test]
    fn regime_sign_conventions() {
        assert!(ScenarioConfig::new(Regime::Internet, demand(), -1.0, None, vec![0.0]).is_err());
        assert!(ScenarioConfig::new(Regime::Icn, demand(), 1.0, None, vec![0.0]).is_err());
        assert!(ScenarioConfig::new(Regime::Icn, demand(), -1.0, None, vec![0.5, 0.2]).is_err());
        assert!(ScenarioConfig::new(Regime::Icn, demand(), -1.0, None, vec![1.2]).is_err());
    }

    #[test]
    fn icn_at_zero_matches_internet() {
        let icn = ScenarioConfig::icn(demand(), -1.0, uniform_cost(3.0)).unwrap();
        let net = ScenarioConfig::new(Regime::Internet, demand(), 0.0, None, vec![0.0]).unwrap();
        let a = solve_scenario(&icn, 0.0).unwrap();
        let b = solve_scenario(&net, 0.7).unwrap();
        assert_eq!(b.kappa, 0.0);
        assert_eq!(a.p_total, b.p_total);
        assert_eq!(a.cache_cost, 0.0);
        // same p_s in both regimes gives identical splits
        let net_same = ScenarioConfig::new(Regime::Icn, demand(), -1.0, None, vec![0.0]).unwrap();
        let c = solve_scenario(&net_same, 0.0).unwrap();
        assert_eq!((a.p1, a.p2, a.u1), (c.p1, c.p2, c.u1));
    }

    #[test]
    fn full_caching_is_linear_game() {
        let cfg = ScenarioConfig::icn(demand(), -1.0, uniform_cost(2.0)).unwrap();
        let r = solve_scenario(&cfg, 1.0).unwrap();
        assert_eq!(r.a, 0.0);
        assert!((r.p1 - 4.0).abs() < 1e-12 && (r.p2 - 4.0).abs() < 1e-12);
        assert!((r.u1 - (16.0 - 2.0)).abs() < 1e-9);
        assert!((r.u2 - 16.0).abs() < 1e-12);
    }

    #[test]
    fn half_caching_uses_scaled_a() {
        let d = DemandParams::<f64>::new(12.0, 1.0, 6.0, 0.0, 0.0, CongestionKind::Linear).unwrap();
        let cfg = ScenarioConfig::icn(d, -1.0, None).unwrap();
        let r = solve_scenario(&cfg, 0.5).unwrap();
        assert!((r.a - 1.0 / 12.0).abs() < 1e-15);
        assert!((r.p_total - concave_total_price(12.0, 1.0, 1.0 / 12.0)).abs() < 1e-12);
        assert!((r.p1 - (r.p_total / 2.0 + 0.5)).abs() < 1e-12);
    }

    #[test]
    fn sweep_flags_invalid_points() {
        // |p_s| = 5 exceeds p*/2 = 4.5 at κ = 0 but (1-κ)|p_s| shrinks with caching
        let cfg =
            ScenarioConfig::new(Regime::Icn, demand(), -5.0, None, vec![0.0, 0.5, 1.0]).unwrap();
        let rows = kappa_sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(!rows[0].valid_interior);
        assert!(rows[2].valid_interior);
        let err = solve_scenario(&cfg, 0.0).unwrap_err();
        assert!(matches!(err, Error::SidePaymentTooLarge { kappa: Some(k), .. } if k == 0.0));
    }

    #[test]
    fn sweep_examples() {
        let cfg = ScenarioConfig::new(
            Regime::Icn,
            demand(),
            -1.0,
            uniform_cost(0.0),
            vec![0.0, 1.0],
        )
        .unwrap();
        let rows = kappa_sweep(&cfg).unwrap();
        assert!(rows[1].u1 >= rows[0].u1);

        let one = ScenarioConfig::new(Regime::Icn, demand(), -1.0, None, vec![0.3]).unwrap();
        assert_eq!(kappa_sweep(&one).unwrap().len(), 1);

        let net = ScenarioConfig::new(Regime::Internet, demand(), 1.0, None, vec![0.0, 0.4, 0.9])
            .unwrap();
        let rows = kappa_sweep(&net).unwrap();
        assert!(rows.iter().all(|r| *r == rows[0] && r.kappa == 0.0));

        let empty = ScenarioConfig::new(Regime::Icn, demand(), -1.0, None, vec![]).unwrap();
        assert!(kappa_sweep(&empty).is_err());
    }

    #[test]
    fn free_caching_is_optimal_at_one() {
        let cfg = ScenarioConfig::icn(demand(), -1.0, uniform_cost(0.0)).unwrap();
        let opt = optimal_kappa(&cfg, 1e-4).unwrap();
        assert_eq!(opt.kappa_star, 1.0);
    }

    #[test]
    fn expensive_caching_is_optimal_at_zero() {
        let cfg = ScenarioConfig::icn(demand(), -1.0, uniform_cost(16.0)).unwrap();
        let opt = optimal_kappa(&cfg, 1e-4).unwrap();
        assert!(opt.kappa_star <= 1e-4, "{opt:?}");
    }

    #[test]
    fn optimization_requires_icn() {
        let net = ScenarioConfig::new(Regime::Internet, demand(), 1.0, None, vec![0.0]).unwrap();
        assert!(matches!(
            optimal_kappa(&net, 1e-4),
            Err(Error::ModelMismatch(_))
        ));
    }
}
