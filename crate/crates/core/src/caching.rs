//! Caching cost as a function of the caching factor.
//!
//! Out of `N` users, a fraction `π(j)` of content items is of interest to
//! exactly `j` users, with `π` nonincreasing in `j`. The ISP caches the most
//! popular classes first. Caching the top `f` classes serves the request
//! share
//!
//! ```text
//! κ(f) = Σ_{j > N-f} j π(j) / Σ_j j π(j)
//! ```
//!
//! at a cost proportional to the number of cached items,
//! `c(f) = Σ_{j > N-f} π(j) / Σ_{j >= 1} π(j)`, scaled by `γ`. Class `j = 0`
//! is never requested and never cached. Fractional `f` interpolates
//! linearly between whole classes. The uniform density `π(z) = 1/N` on
//! `[0, N]` is handled in continuous form: `κ = 1 - (1 - f/N)²`,
//! `c = f/N`.

use std::io::Read;
use std::path::Path;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::numerics::{self, Bracket, Tolerance};
use crate::scalar::Scalar;

/// Second-difference tolerance of [`check_convexity`].
pub const CONVEXITY_TOL: f64 = 1e-8;
/// First-difference tolerance of [`check_convexity`].
pub const MONOTONICITY_TOL: f64 = 1e-10;

/// Which family a distribution came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PopularityKind<T> {
    Uniform,
    TruncatedZipf { exponent: T },
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
enum Shape<T> {
    Uniform,
    Tabulated {
        mass: Vec<T>,
        /// `count[k]`: item mass of the top `k` classes.
        count: Vec<T>,
        /// `weight[k]`: request mass `Σ j π(j)` of the top `k` classes.
        weight: Vec<T>,
    },
}

/// Nonincreasing popularity mass over `j ∈ {0..N}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PopularityDistribution<T> {
    n_users: usize,
    kind: PopularityKind<T>,
    shape: Shape<T>,
}

impl<T: Scalar> PopularityDistribution<T> {
    /// Continuous uniform density on `[0, N]`.
    pub fn uniform(n_users: usize) -> Result<Self> {
        if n_users == 0 {
            return Err(invalid("popularity distribution needs at least one user"));
        }
        Ok(Self {
            n_users,
            kind: PopularityKind::Uniform,
            shape: Shape::Uniform,
        })
    }

    /// `π(j) ∝ (j + 1)^(-s)` on `j ∈ {0..N}`.
    pub fn truncated_zipf(n_users: usize, exponent: T) -> Result<Self> {
        if n_users == 0 {
            return Err(invalid("popularity distribution needs at least one user"));
        }
        if !(exponent > T::zero()) || !exponent.is_finite() {
            return Err(invalid(format!(
                "Zipf exponent must be positive, got {exponent}"
            )));
        }
        let mass = (0..=n_users)
            .map(|j| {
                T::from_usize(j + 1)
                    .unwrap_or_else(T::infinity)
                    .powf(-exponent)
            })
            .collect();
        let mut dist = Self::tabulated(mass)?;
        dist.kind = PopularityKind::TruncatedZipf { exponent };
        Ok(dist)
    }

    /// Tabulated `π(0..N)`; rejects increasing or negative mass and
    /// renormalizes to unit total.
    pub fn custom(mass: Vec<T>) -> Result<Self> {
        Self::tabulated(mass)
    }

    fn tabulated(mut mass: Vec<T>) -> Result<Self> {
        if mass.len() < 2 {
            return Err(invalid(
                "popularity table needs entries for j = 0 and at least j = 1",
            ));
        }
        for (j, &m) in mass.iter().enumerate() {
            if !(m >= T::zero()) || !m.is_finite() {
                return Err(invalid(format!(
                    "popularity mass at j = {j} must be nonnegative, got {m}"
                )));
            }
            if j > 0 && m > mass[j - 1] {
                return Err(Error::NotMonotone {
                    index: j,
                    value: m.as_f64(),
                    previous: mass[j - 1].as_f64(),
                });
            }
        }
        let total = mass.iter().fold(T::zero(), |acc, &m| acc + m);
        if !(total > T::zero()) {
            return Err(invalid("popularity mass sums to zero"));
        }
        for m in &mut mass {
            *m = *m / total;
        }

        let n_users = mass.len() - 1;
        let mut count = Vec::with_capacity(n_users + 1);
        let mut weight = Vec::with_capacity(n_users + 1);
        let (mut c, mut w) = (T::zero(), T::zero());
        count.push(c);
        weight.push(w);
        for j in (1..=n_users).rev() {
            c = c + mass[j];
            w = w + T::from_usize(j).unwrap_or_else(T::infinity) * mass[j];
            count.push(c);
            weight.push(w);
        }
        if !(w > T::zero()) {
            return Err(invalid(
                "no content is requested by any user (all mass at j = 0)",
            ));
        }
        Ok(Self {
            n_users,
            kind: PopularityKind::Custom,
            shape: Shape::Tabulated {
                mass,
                count,
                weight,
            },
        })
    }

    /// Reads a two-column CSV with header `j,pi` and rows `j = 0, 1, ..., N`.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::Table(e.to_string()))?
            .clone();
        if headers.len() != 2 || &headers[0] != "j" || &headers[1] != "pi" {
            return Err(Error::Table(format!(
                "expected header `j,pi`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut mass = Vec::new();
        for (idx, record) in rdr.records().enumerate() {
            let line = idx + 2;
            let record = record.map_err(|e| Error::Table(format!("line {line}: {e}")))?;
            let j: usize = record[0]
                .parse()
                .map_err(|_| Error::Table(format!("line {line}: bad index `{}`", &record[0])))?;
            if j != mass.len() {
                return Err(Error::Table(format!(
                    "line {line}: expected j = {}, found j = {j} (rows must be ascending from 0)",
                    mass.len()
                )));
            }
            let pi: f64 = record[1]
                .parse()
                .map_err(|_| Error::Table(format!("line {line}: bad mass `{}`", &record[1])))?;
            mass.push(T::lit(pi));
        }
        Self::custom(mass).map_err(|e| match e {
            Error::NotMonotone { index, value, previous } => Error::Table(format!(
                "line {}: pi({index}) = {value} exceeds pi({}) = {previous}; mass must be nonincreasing in j",
                index + 2,
                index - 1
            )),
            other => other,
        })
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| Error::Table(format!("{}: {e}", path.display())))?;
        Self::from_csv_reader(file)
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn kind(&self) -> PopularityKind<T> {
        self.kind
    }

    /// Normalized mass `π(0..N)`, or `None` for the continuous uniform law.
    pub fn mass(&self) -> Option<&[T]> {
        match &self.shape {
            Shape::Uniform => None,
            Shape::Tabulated { mass, .. } => Some(mass),
        }
    }

    fn n(&self) -> T {
        T::from_usize(self.n_users).unwrap_or_else(T::infinity)
    }

    fn check_f(&self, f: T) -> Result<T> {
        if !(f >= T::zero() && f <= self.n()) {
            return Err(Error::Domain { x: f.as_f64() });
        }
        Ok(f)
    }

    /// Normalized cached item fraction `c(f) / γ`.
    pub fn cost_fraction_of_f(&self, f: T) -> Result<T> {
        let f = self.check_f(f)?;
        Ok(match &self.shape {
            Shape::Uniform => f / self.n(),
            Shape::Tabulated { count, .. } => interpolate(count, f) / count[self.n_users],
        })
    }
}

/// Linear interpolation of a prefix table at fractional class count `f`.
fn interpolate<T: Scalar>(table: &[T], f: T) -> T {
    let last = table.len() - 1;
    let k = f.floor().to_usize().unwrap_or(last).min(last);
    if k == last {
        return table[last];
    }
    let frac = f - T::from_usize(k).unwrap_or_else(T::zero);
    table[k] + frac * (table[k + 1] - table[k])
}

/// Caching factor achieved by caching the top `f` popularity classes,
/// normalized so `κ(0) = 0` and `κ(N) = 1`.
pub fn kappa_of_f<T: Scalar>(f: T, dist: &PopularityDistribution<T>) -> Result<T> {
    let f = dist.check_f(f)?;
    Ok(match &dist.shape {
        Shape::Uniform => {
            let rest = T::one() - f / dist.n();
            T::one() - rest * rest
        }
        Shape::Tabulated { weight, .. } => interpolate(weight, f) / weight[dist.n_users],
    })
}

/// Inverts [`kappa_of_f`] by bracketed root finding on `[0, N]`.
pub fn f_of_kappa<T: Scalar>(kappa: T, dist: &PopularityDistribution<T>) -> Result<T> {
    if !(kappa >= T::zero() && kappa <= T::one()) {
        return Err(Error::Domain { x: kappa.as_f64() });
    }
    let bracket = Bracket::new(T::zero(), dist.n())?;
    let tol = Tolerance::at_least(1e-15, 0.0, 400);
    numerics::find_root(
        |f| {
            kappa_of_f(f, dist)
                .map(|k| k - kappa)
                .unwrap_or_else(|_| T::nan())
        },
        bracket,
        &tol,
    )
}

/// Popularity law plus the scale `γ` that converts the normalized cached
/// item fraction into utility units.
#[derive(Debug, Clone, PartialEq)]
pub struct CachingCostModel<T> {
    pub distribution: PopularityDistribution<T>,
    cost_scale: T,
}

impl<T: Scalar> CachingCostModel<T> {
    pub fn new(distribution: PopularityDistribution<T>, cost_scale: T) -> Result<Self> {
        if !(cost_scale >= T::zero()) || !cost_scale.is_finite() {
            return Err(invalid(format!(
                "cost scale must be nonnegative, got {cost_scale}"
            )));
        }
        Ok(Self {
            distribution,
            cost_scale,
        })
    }

    pub fn cost_scale(&self) -> T {
        self.cost_scale
    }
}

/// Caching cost `c(κ)`, with `c(0) = 0` and `c(1) = γ`.
pub fn cost_of_kappa<T: Scalar>(kappa: T, model: &CachingCostModel<T>) -> Result<T> {
    let f = f_of_kappa(kappa, &model.distribution)?;
    Ok(model.cost_scale * model.distribution.cost_fraction_of_f(f)?)
}

/// Shape check of `c(κ)` on a uniform grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvexityReport<T> {
    pub passed: bool,
    pub n_grid: usize,
    pub min_first_diff: T,
    pub min_second_diff: T,
}

/// Evaluates the normalized cost `c(κ)/γ` on `n_grid` uniform points of
/// `[0, 1]`. Passes iff first differences exceed `-1e-10` and second
/// differences exceed `-1e-8`.
pub fn check_convexity<T: Scalar>(
    model: &CachingCostModel<T>,
    n_grid: usize,
) -> Result<ConvexityReport<T>> {
    if n_grid < 5 {
        return Err(invalid(format!(
            "convexity check needs at least 5 grid points, got {n_grid}"
        )));
    }
    let last = T::from_usize(n_grid - 1).unwrap_or_else(T::one);
    let costs = (0..n_grid)
        .map(|i| {
            let kappa = (T::from_usize(i).unwrap_or_else(T::zero) / last).min(T::one());
            let f = f_of_kappa(kappa, &model.distribution)?;
            model.distribution.cost_fraction_of_f(f)
        })
        .collect::<Result<Vec<T>>>()?;

    let min_first_diff = costs
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(T::infinity(), T::min);
    let min_second_diff = costs
        .windows(3)
        .map(|w| w[2] - w[1] - (w[1] - w[0]))
        .fold(T::infinity(), T::min);
    Ok(ConvexityReport {
        passed: min_first_diff > -T::lit(MONOTONICITY_TOL)
            && min_second_diff > -T::lit(CONVEXITY_TOL),
        n_grid,
        min_first_diff,
        min_second_diff,
    })
}
