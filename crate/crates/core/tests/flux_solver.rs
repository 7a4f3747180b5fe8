use fmflow::flux_solver::{
    deviation_flux, flux_residual, initial_flux_contribution, solve_flux, FluxGrid, FluxHistory, InitialData, Problem,
};
use fmflow::steady_state::TemperatureProfile;
use fmflow::{BoundaryPoint, Dim, Wall};
use proptest::prelude::*;

fn short(t_max: f64, n_theta: usize) -> FluxGrid {
    FluxGrid { t_max, n_theta, ..FluxGrid::default() }
}

fn max_diff(a: &FluxHistory, b: &FluxHistory) -> f64 {
    a.values.iter().flatten().zip(b.values.iter().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn doubled_steady_data_gives_doubled_flux() {
    for profile in [TemperatureProfile::walls(0.7, 1.0).unwrap(), TemperatureProfile::constant(Dim::Two)] {
        let p = Problem::new(profile, 0.5, InitialData::ScaledSteady { rho0: 2.0 }).unwrap();
        let h = solve_flux(&p, &short(10.0, 32)).unwrap();
        let target = 2.0 / p.steady.c_s;
        assert!(h.values.iter().flatten().all(|v| (v - target).abs() < 1e-4));
        assert!(deviation_flux(&h, 2.0, p.steady.c_s).sup() < 1e-4);
    }
}

#[test]
fn solver_is_linear_in_the_initial_data() {
    let profile = TemperatureProfile::walls(0.6, 1.0).unwrap();
    let g1 = InitialData::UniformMaxwellian { rho0: 1.0, temperature: 0.5 };
    let g2 = InitialData::Separable { rho0: 1.0, gradient: 0.5, temperature: 0.9 };
    let grid = short(10.0, 2);
    let solve = |g: InitialData| solve_flux(&Problem::new(profile.clone(), 0.5, g).unwrap(), &grid).unwrap();
    let (h1, h2) = (solve(g1.clone()), solve(g2.clone()));
    for (a, b) in [(1.0, 1.0), (2.0, 0.5), (0.3, 1.7)] {
        let mix = solve(InitialData::Mixture { components: vec![(a, g1.clone()), (b, g2.clone())] });
        for i in 0..mix.nodes {
            for j in 0..mix.values[i].len() {
                let expect = a * h1.values[i][j] + b * h2.values[i][j];
                assert!((mix.values[i][j] - expect).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn flux_bound_is_stable_under_refinement() {
    let p = Problem::new(
        TemperatureProfile::constant(Dim::Two),
        0.5,
        InitialData::UniformMaxwellian { rho0: 1.0, temperature: 0.5 },
    )
    .unwrap();
    let coarse = solve_flux(&p, &short(10.0, 32)).unwrap().sup();
    let fine = solve_flux(&p, &FluxGrid { dt: 0.025, ..short(10.0, 32) }).unwrap().sup();
    assert!((coarse - fine).abs() < 1e-4 * fine);
}

#[test]
fn symmetric_disk_data_gives_symmetric_flux() {
    let p = Problem::new(
        TemperatureProfile::cosine_dip(0.3).unwrap(),
        0.5,
        InitialData::Separable { rho0: 1.0, gradient: 0.4, temperature: 0.6 },
    )
    .unwrap();
    let h = solve_flux(&p, &FluxGrid { t_max: 3.0, n_theta: 16, n_phi: 24, ..FluxGrid::default() }).unwrap();
    for i in 1..8 {
        for j in 0..h.values[i].len() {
            assert!((h.values[i][j] - h.values[16 - i][j]).abs() < 1e-6);
        }
    }
    assert!(h.values.iter().flatten().all(|v| *v >= 0.0));
}

#[test]
fn cold_start_deviation_is_negative_initially() {
    let p = Problem::new(
        TemperatureProfile::constant(Dim::One),
        1.0,
        InitialData::UniformMaxwellian { rho0: 1.0, temperature: 0.5 },
    )
    .unwrap();
    let h = solve_flux(&p, &short(5.0, 2)).unwrap();
    let dev = deviation_flux(&h, 1.0, p.steady.c_s);
    for wall in [Wall::Left, Wall::Right] {
        let y = BoundaryPoint::Wall(wall);
        let d0 = dev.at_wall(wall, 0.0).unwrap();
        // Incoming flux of a Maxwellian at temperature T0: rho0 sqrt(T0) / (2 sqrt(pi)).
        let oracle = 0.5f64.sqrt() / (2.0 * std::f64::consts::PI.sqrt());
        assert!((d0 - (oracle - 1.0 / p.steady.c_s)).abs() < 1e-10);
        assert!((p.initial.incoming_flux(&p.steady, y) - oracle).abs() < 1e-10);
        assert!(d0 < 0.0);
        assert!(initial_flux_contribution(&p, y, 0.5, 0).unwrap() >= 0.0);
    }
}

#[test]
fn exact_steady_history_has_tiny_residual() {
    let p = Problem::new(TemperatureProfile::walls(0.5, 1.0).unwrap(), 0.7, InitialData::ScaledSteady { rho0: 1.0 })
        .unwrap();
    let grid = short(10.0, 2);
    let steps = grid.steps();
    let exact = FluxHistory {
        dim: Dim::One,
        nodes: 2,
        dt: grid.dt,
        values: vec![vec![1.0 / p.steady.c_s; steps + 1]; 2],
        residual: None,
    };
    assert!(flux_residual(&p, &grid, &exact).unwrap() < 1e-6);
    let mut bad = exact.clone();
    bad.values[1][steps / 2] *= 1.1;
    assert!(flux_residual(&p, &grid, &bad).unwrap() > 1e-3);
}

#[test]
fn history_csv_and_header_round_trip() {
    let p = Problem::new(
        TemperatureProfile::constant(Dim::Two),
        0.5,
        InitialData::UniformMaxwellian { rho0: 1.0, temperature: 0.5 },
    )
    .unwrap();
    let h = solve_flux(&p, &short(2.0, 8)).unwrap();
    let mut csv = Vec::new();
    h.write_csv(&mut csv).unwrap();
    let back = FluxHistory::read_csv(csv.as_slice(), Dim::Two, 8, h.dt).unwrap();
    assert_eq!(back.values, h.values);
    let header = h.header(serde_json::json!({ "note": "x" }));
    let text = serde_json::to_string(&header).unwrap();
    assert!(text.contains("\"levels\":41"));
    assert!(max_diff(&back, &h) == 0.0);
}

#[test]
fn velocity_independent_rate_zero_matches_plain_solve() {
    let p = Problem::new(
        TemperatureProfile::constant(Dim::One),
        0.5,
        InitialData::UniformMaxwellian { rho0: 1.0, temperature: 0.5 },
    )
    .unwrap();
    let grid = short(10.0, 2);
    let a = solve_flux(&p, &grid).unwrap();
    let b = fmflow::flux_solver::solve_with_rate(&p, &grid, 0.0).unwrap();
    assert_eq!(a.values, b.values);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn csv_round_trip_is_bit_exact(values in proptest::collection::vec(-1e3f64..1e3, 2 * 11)) {
        let h = FluxHistory {
            dim: Dim::One,
            nodes: 2,
            dt: 0.05,
            values: vec![values[..11].to_vec(), values[11..].to_vec()],
            residual: None,
        };
        let mut csv = Vec::new();
        h.write_csv(&mut csv).unwrap();
        let back = FluxHistory::read_csv(csv.as_slice(), Dim::One, 2, 0.05).unwrap();
        prop_assert_eq!(back.values, h.values);
    }

    #[test]
    fn interpolation_stays_within_node_range(theta in -10.0f64..10.0, t in 0.0f64..0.5) {
        let values: Vec<Vec<f64>> = (0..6).map(|i| (0..11).map(|j| (i * 11 + j) as f64).collect()).collect();
        let h = FluxHistory { dim: Dim::Two, nodes: 6, dt: 0.05, values, residual: None };
        let v = h.at_angle(theta, t).unwrap();
        prop_assert!((0.0..=65.0).contains(&v));
    }
}
