use clap::{Args, ValueEnum};
use icn_game::equilibrium::default_foc_bracket;
use icn_game::{
    best_response_dynamics, check_convexity, cost_of_kappa, demand_closed_form, demand_derivative,
    demand_fixed_point, equilibrium_at, equilibrium_candidate, f_of_kappa, kappa_sweep,
    nash_concave_closed, nash_linear, nash_numeric_foc, optimal_kappa, uniform_kappa_grid,
    utility_cp, utility_isp, CachingCostModel, CongestionKind, DemandParams, Equilibrium, Error,
    GameSpec, PopularityDistribution, Regime, ScenarioConfig, SolveMethod, UpdateMode,
};

use crate::config::{Congestion, Popularity, RegimeArg, RunConfig};
use crate::output::{Cell, Report};
use crate::CliError;

const DEFAULT_N_USERS: usize = 1000;
const DEFAULT_ZIPF_S: f64 = 1.0;
const DEFAULT_REFINE_TOL: f64 = 1e-6;
const BR_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Linear,
    Closed,
    Foc,
    BrDynamics,
}

#[derive(Debug, Clone, Args)]
pub struct NashArgs {
    /// Solver; defaults to `closed`, or `foc` for M/M/1 congestion.
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    /// Rounds for `--method br-dynamics`.
    #[arg(long, default_value_t = 500)]
    pub rounds: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// Also locate the caching factor that maximizes the ISP utility.
    #[arg(long)]
    pub optimal: bool,
}

#[derive(Debug, Clone, Args)]
pub struct BrArgs {
    #[arg(long, default_value_t = 0.0)]
    pub init_p1: f64,
    #[arg(long, default_value_t = 0.0)]
    pub init_p2: f64,
    #[arg(long, default_value_t = 100)]
    pub rounds: usize,
    /// The CP responds to the ISP's new price within the same round.
    #[arg(long)]
    pub sequential: bool,
}

fn required(value: Option<f64>, flag: &'static str) -> Result<f64, CliError> {
    value.ok_or(CliError::Missing(flag))
}

fn demand_params(cfg: &RunConfig, kappa: f64) -> Result<DemandParams<f64>, CliError> {
    let d_max = required(cfg.dmax, "dmax")?;
    let d = required(cfg.d, "d")?;
    if let Some(a) = cfg.a {
        if cfg.b.is_some() || cfg.lambda.is_some() {
            return Err(CliError::Input(
                "--a cannot be combined with --b or --lambda".into(),
            ));
        }
        if matches!(cfg.g, Some(Congestion::Mm1 | Congestion::Uncongested)) {
            return Err(CliError::Input(
                "--a describes the linear congestion factor; use --b with --g mm1".into(),
            ));
        }
        return Ok(DemandParams::from_a(d_max, d, a)?.with_kappa(kappa)?);
    }
    let kind = match cfg.g {
        Some(Congestion::Linear) => CongestionKind::Linear,
        Some(Congestion::Mm1) => CongestionKind::Mm1,
        Some(Congestion::Uncongested) => CongestionKind::Uncongested,
        None if cfg.b.is_some() => CongestionKind::Linear,
        None => CongestionKind::Uncongested,
    };
    let b = match (kind, cfg.b) {
        (_, Some(b)) => b,
        (CongestionKind::Uncongested, None) => f64::INFINITY,
        (_, None) => return Err(CliError::Missing("b")),
    };
    Ok(DemandParams::new(
        d_max,
        d,
        b,
        cfg.lambda.unwrap_or(0.0),
        kappa,
        kind,
    )?)
}

fn popularity(cfg: &RunConfig) -> Result<PopularityDistribution<f64>, CliError> {
    if let Some(path) = &cfg.popularity_csv {
        return Ok(PopularityDistribution::from_csv_path(path)?);
    }
    let n = cfg.n_users.unwrap_or(DEFAULT_N_USERS);
    Ok(match cfg.popularity.unwrap_or(Popularity::Uniform) {
        Popularity::Uniform => PopularityDistribution::uniform(n)?,
        Popularity::Zipf => {
            PopularityDistribution::truncated_zipf(n, cfg.zipf_s.unwrap_or(DEFAULT_ZIPF_S))?
        }
    })
}

fn cost_model(cfg: &RunConfig, default_gamma: f64) -> Result<CachingCostModel<f64>, CliError> {
    Ok(CachingCostModel::new(
        popularity(cfg)?,
        cfg.gamma.unwrap_or(default_gamma),
    )?)
}

/// Game at the configured caching factor. On the ICN regime the side
/// payment is scaled by `1 - κ` and the ISP bears the caching cost.
fn game_spec(cfg: &RunConfig) -> Result<GameSpec<f64>, CliError> {
    let kappa = cfg.kappa.unwrap_or(0.0);
    let demand = demand_params(cfg, kappa)?;
    let p_s = cfg.ps.unwrap_or(0.0);
    match cfg.regime.unwrap_or(RegimeArg::Internet) {
        RegimeArg::Internet => Ok(GameSpec::simple(demand, p_s)?),
        RegimeArg::Icn => {
            let cost = match cfg.gamma {
                Some(_) => cost_of_kappa(kappa, &cost_model(cfg, 0.0)?)?,
                None => 0.0,
            };
            Ok(GameSpec::new(demand, p_s, 1.0 - kappa, cost)?)
        }
    }
}

fn grid_points(cfg: &RunConfig, min: usize) -> Result<usize, CliError> {
    let n = cfg.grid.unwrap_or(icn_game::market::DEFAULT_GRID_POINTS);
    if n < min {
        return Err(CliError::Input(format!(
            "--grid must be at least {min}, got {n}"
        )));
    }
    Ok(n)
}

pub fn demand(cfg: &RunConfig) -> Result<Report, CliError> {
    let params = demand_params(cfg, cfg.kappa.unwrap_or(0.0))?;
    let n = grid_points(cfg, 2)?;
    let p_max = params.p_max();
    let mut report = Report::new(vec![
        "p",
        "demand_closed_form",
        "demand_fixed_point",
        "derivative",
    ]);
    for i in 0..n {
        let p = if i + 1 == n {
            p_max
        } else {
            p_max * i as f64 / (n - 1) as f64
        };
        let closed = match params.kind() {
            CongestionKind::Mm1 => Cell::Empty,
            _ => Cell::Num(demand_closed_form(p, &params)?.value),
        };
        report.rows.push(vec![
            Cell::Num(p),
            closed,
            Cell::Num(demand_fixed_point(p, &params)?.value),
            Cell::Num(demand_derivative(p, &params)?),
        ]);
    }
    Ok(report)
}

fn equilibrium_row(eq: &Equilibrium<f64>) -> Vec<Cell> {
    vec![
        Cell::Num(eq.p1),
        Cell::Num(eq.p2),
        Cell::Num(eq.p_total),
        Cell::Num(eq.demand_at_eq),
        Cell::Num(eq.u1),
        Cell::Num(eq.u2),
        Cell::Text(eq.method.as_str()),
        Cell::Num(eq.foc_residual),
        Cell::Bool(eq.valid_interior),
    ]
}

pub fn nash(cfg: &RunConfig, args: &NashArgs) -> Result<Report, CliError> {
    let spec = game_spec(cfg)?;
    let method = args.method.unwrap_or(match spec.demand.kind() {
        CongestionKind::Mm1 => Method::Foc,
        _ => Method::Closed,
    });
    let eq = match method {
        Method::Linear => nash_linear(&spec)?,
        Method::Closed => nash_concave_closed(&spec)?,
        Method::Foc => nash_numeric_foc(&spec, default_foc_bracket(&spec))?,
        Method::BrDynamics => {
            let traj = best_response_dynamics(
                &spec,
                (0.0, 0.0),
                args.rounds,
                UpdateMode::Sequential,
                BR_TOL,
            )?;
            let (p1, p2) = traj.last();
            if !traj.converged {
                return Err(Error::MaxIterExceeded {
                    iterations: args.rounds,
                    last: p1 + p2,
                }
                .into());
            }
            let eq = equilibrium_at(p1, p2, &spec, SolveMethod::BestResponseIteration)?;
            if !eq.valid_interior {
                return Err(Error::SidePaymentTooLarge {
                    effective: spec.effective_side_payment(),
                    bound: eq.p_total / 2.0,
                    kappa: (spec.demand.kappa() > 0.0).then_some(spec.demand.kappa()),
                }
                .into());
            }
            eq
        }
    };
    let mut report = Report::new(vec![
        "p1",
        "p2",
        "p_total",
        "demand",
        "u1",
        "u2",
        "method",
        "foc_residual",
        "valid_interior",
    ]);
    report.rows.push(equilibrium_row(&eq));
    Ok(report)
}

fn scenario(cfg: &RunConfig) -> Result<ScenarioConfig<f64>, CliError> {
    let demand = demand_params(cfg, 0.0)?;
    let p_s = cfg.ps.unwrap_or(0.0);
    let grid = uniform_kappa_grid(grid_points(cfg, 1)?);
    Ok(match cfg.regime.unwrap_or(RegimeArg::Icn) {
        RegimeArg::Icn => {
            ScenarioConfig::new(Regime::Icn, demand, p_s, Some(cost_model(cfg, 0.0)?), grid)?
        }
        RegimeArg::Internet => ScenarioConfig::new(Regime::Internet, demand, p_s, None, grid)?,
    })
}

pub fn sweep(cfg: &RunConfig, args: &SweepArgs) -> Result<Report, CliError> {
    let config = scenario(cfg)?;
    let mut report = Report::new(vec![
        "kappa",
        "a",
        "p1",
        "p2",
        "p_total",
        "demand",
        "u1",
        "u2",
        "cache_cost",
        "valid_interior",
    ]);
    for r in kappa_sweep(&config)? {
        report.rows.push(vec![
            Cell::Num(r.kappa),
            Cell::Num(r.a),
            Cell::Num(r.p1),
            Cell::Num(r.p2),
            Cell::Num(r.p_total),
            Cell::Num(r.demand),
            Cell::Num(r.u1),
            Cell::Num(r.u2),
            Cell::Num(r.cache_cost),
            Cell::Bool(r.valid_interior),
        ]);
    }
    if args.optimal {
        let opt = optimal_kappa(&config, cfg.refine_tol.unwrap_or(DEFAULT_REFINE_TOL))?;
        report.summary_key = "optimal";
        report.summary = vec![
            ("kappa_star", Cell::Num(opt.kappa_star)),
            ("u1", Cell::Num(opt.record.u1)),
            ("u2", Cell::Num(opt.record.u2)),
            ("local_maxima", Cell::Int(opt.local_maxima as u64)),
            ("not_unimodal", Cell::Bool(opt.not_unimodal)),
        ];
    }
    Ok(report)
}

/// Simultaneous updates can overshoot to `p1 + p2 > p_max`, where demand
/// is zero.
fn trajectory_utilities(p1: f64, p2: f64, spec: &GameSpec<f64>) -> Result<(f64, f64), CliError> {
    if p1 + p2 > spec.demand.p_max() {
        return Ok((-spec.fixed_cost_isp, 0.0));
    }
    Ok((utility_isp(p1, p2, spec)?, utility_cp(p1, p2, spec)?))
}

pub fn br_dynamics(cfg: &RunConfig, args: &BrArgs) -> Result<Report, CliError> {
    let spec = game_spec(cfg)?;
    let mode = if args.sequential {
        UpdateMode::Sequential
    } else {
        UpdateMode::Simultaneous
    };
    let traj = best_response_dynamics(
        &spec,
        (args.init_p1, args.init_p2),
        args.rounds,
        mode,
        BR_TOL,
    )?;
    let mut report = Report::new(vec!["round", "p1", "p2", "u1", "u2"]);
    for (round, &(p1, p2)) in traj.points.iter().enumerate() {
        let (u1, u2) = trajectory_utilities(p1, p2, &spec)?;
        report.rows.push(vec![
            Cell::Int(round as u64),
            Cell::Num(p1),
            Cell::Num(p2),
            Cell::Num(u1),
            Cell::Num(u2),
        ]);
    }
    let distance = match spec.demand.kind() {
        CongestionKind::Mm1 => Cell::Empty,
        _ => {
            let eq = equilibrium_candidate(&spec)?;
            let (p1, p2) = traj.last();
            if eq.valid_interior {
                Cell::Num((p1 - eq.p1).abs().max((p2 - eq.p2).abs()))
            } else {
                Cell::Empty
            }
        }
    };
    report.summary_key = "dynamics";
    report.summary = vec![
        ("converged", Cell::Bool(traj.converged)),
        ("distance", distance),
    ];
    Ok(report)
}

pub fn caching_cost(cfg: &RunConfig) -> Result<Report, CliError> {
    let model = cost_model(cfg, 1.0)?;
    let n = grid_points(cfg, 5)?;
    let mut report = Report::new(vec!["kappa", "f", "cost"]);
    for kappa in uniform_kappa_grid::<f64>(n) {
        report.rows.push(vec![
            Cell::Num(kappa),
            Cell::Num(f_of_kappa(kappa, &model.distribution)?),
            Cell::Num(cost_of_kappa(kappa, &model)?),
        ]);
    }
    let check = check_convexity(&model, n)?;
    report.summary_key = "convexity";
    report.summary = vec![
        ("convex", Cell::Bool(check.passed)),
        ("min_first_diff", Cell::Num(check.min_first_diff)),
        ("min_second_diff", Cell::Num(check.min_second_diff)),
    ];
    Ok(report)
}
