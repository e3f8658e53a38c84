use icn_game::equilibrium::default_foc_bracket;
use icn_game::{
    best_response, best_response_dynamics, nash_concave_closed, nash_linear, nash_numeric_foc,
    utility_isp, verify_nash, CongestionKind, DemandParams, GameSpec, Player, UpdateMode,
};
use proptest::prelude::*;

fn concave_spec(d_max: f64, d: f64, a: f64, p_s: f64) -> GameSpec<f64> {
    GameSpec::simple(DemandParams::from_a(d_max, d, a).unwrap(), p_s).unwrap()
}

#[test]
fn closed_form_matches_numeric_foc_on_grid() {
    for &a in &[1e-6, 0.01, 0.1, 1.0, 10.0] {
        for &d_max in &[1.0, 12.0, 100.0] {
            for &d in &[0.5, 1.0, 2.0] {
                let spec = concave_spec(d_max, d, a, 0.0);
                let closed = nash_concave_closed(&spec).unwrap();
                let foc = nash_numeric_foc(&spec, default_foc_bracket(&spec)).unwrap();
                assert!(
                    (closed.p_total - foc.p_total).abs() <= 1e-8,
                    "a={a} d_max={d_max} d={d}: {} vs {}",
                    closed.p_total,
                    foc.p_total
                );
            }
        }
    }
}

#[test]
fn small_a_recovers_linear_equilibrium() {
    let spec = concave_spec(12.0, 1.0, 1e-9, 1.0);
    let eq = nash_concave_closed(&spec).unwrap();
    let lin =
        nash_linear(&GameSpec::simple(DemandParams::linear(12.0, 1.0).unwrap(), 1.0).unwrap())
            .unwrap();
    assert!((eq.p1 - lin.p1).abs() < 1e-4);
    assert!((eq.p2 - lin.p2).abs() < 1e-4);
    assert!((eq.u1 - lin.u1).abs() < 1e-4);

    let foc = nash_numeric_foc(
        &concave_spec(12.0, 1.0, 1e-8, 0.0),
        default_foc_bracket(&spec),
    )
    .unwrap();
    assert!((foc.p_total - 8.0).abs() < 1e-4);
}

#[test]
fn mm1_equilibrium_is_verified() {
    let demand = DemandParams::<f64>::new(12.0, 1.0, 10.0, 4.0, 0.3, CongestionKind::Mm1).unwrap();
    let spec = GameSpec::simple(demand, 0.5).unwrap();
    let eq = nash_numeric_foc(&spec, default_foc_bracket(&spec)).unwrap();
    assert!(eq.foc_residual.abs() < 1e-9);
    assert!(verify_nash(&eq, &spec, 1000).unwrap().passed);
}

#[test]
fn dynamics_reach_the_equilibrium() {
    let spec = concave_spec(12.0, 1.0, 0.5, -0.5);
    let eq = nash_concave_closed(&spec).unwrap();
    for mode in [UpdateMode::Simultaneous, UpdateMode::Sequential] {
        let traj = best_response_dynamics(&spec, (0.0, 0.0), 200, mode, 1e-9).unwrap();
        let (p1, p2) = traj.last();
        assert!(traj.converged, "{mode:?}");
        assert!(
            (p1 - eq.p1).abs() < 1e-6 && (p2 - eq.p2).abs() < 1e-6,
            "{mode:?}"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn equilibrium_is_a_mutual_best_response(d_max in 1.0..50.0f64, d in 0.2..4.0f64, a in 0.0..2.0f64, frac in -0.9..0.9f64) {
        let base = concave_spec(d_max, d, a, 0.0);
        let p_star = nash_concave_closed(&base).unwrap().p_total;
        let spec = concave_spec(d_max, d, a, frac * p_star / 2.0);
        let eq = nash_concave_closed(&spec).unwrap();
        let br1 = best_response(Player::Isp, eq.p2, &spec).unwrap();
        let br2 = best_response(Player::Cp, eq.p1, &spec).unwrap();
        let scale = spec.demand.p_max().max(1.0);
        prop_assert!((br1.price - eq.p1).abs() <= 1e-6 * scale, "{} vs {}", br1.price, eq.p1);
        prop_assert!((br2.price - eq.p2).abs() <= 1e-6 * scale, "{} vs {}", br2.price, eq.p2);
    }

    #[test]
    fn total_price_ignores_side_payment(d_max in 1.0..50.0f64, d in 0.2..4.0f64, a in 0.0..2.0f64, f1 in -0.99..0.99f64, f2 in -0.99..0.99f64) {
        let p_star = nash_concave_closed(&concave_spec(d_max, d, a, 0.0)).unwrap().p_total;
        let e1 = nash_concave_closed(&concave_spec(d_max, d, a, f1 * p_star / 2.0)).unwrap();
        let e2 = nash_concave_closed(&concave_spec(d_max, d, a, f2 * p_star / 2.0)).unwrap();
        prop_assert!((e1.p_total - e2.p_total).abs() <= 1e-9 * p_star.max(1.0));
        prop_assert!((e1.demand_at_eq - e2.demand_at_eq).abs() <= 1e-9 * d_max);
        prop_assert!((e1.u1 - e2.u1).abs() <= 1e-9 * e1.u1.abs().max(1.0));
        prop_assert!(e1.valid_interior && e2.valid_interior);
    }

    #[test]
    fn linear_equilibrium_values(d_max in 1.0..100.0f64, d in 0.1..5.0f64, frac in -0.99..0.99f64) {
        let p_s = frac * d_max / (3.0 * d);
        let spec = GameSpec::simple(DemandParams::linear(d_max, d).unwrap(), p_s).unwrap();
        let eq = nash_linear(&spec).unwrap();
        let u = d_max * d_max / (9.0 * d);
        prop_assert!((eq.p1 - (d_max / (3.0 * d) - p_s)).abs() < 1e-9 * d_max / d);
        prop_assert!((eq.u1 - u).abs() <= 1e-12 * u.max(1.0) * 10.0);
        prop_assert!((eq.u2 - u).abs() <= 1e-12 * u.max(1.0) * 10.0);
        let dev = utility_isp(eq.p1 * 0.9, eq.p2, &spec).unwrap();
        prop_assert!(dev <= eq.u1);
    }
}
