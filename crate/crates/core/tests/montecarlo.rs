use fmflow::flux_solver::{solve_flux, FluxGrid, InitialData, Problem};
use fmflow::kernels::flight_cdf;
use fmflow::montecarlo::{
    diffuse_flights, empirical_flux, AdvanceOptions, Flight, FluxTally, Particle, ParticleEnsemble,
};
use fmflow::quadrature::{erf, GaussRule};
use fmflow::stats::ks_statistic;
use fmflow::steady_state::TemperatureProfile;
use fmflow::transport::{moments, MomentQuadrature};
use fmflow::{Dim, Wall};
use proptest::prelude::*;
use std::f64::consts::PI;

fn cold(dim: Dim, alpha: f64) -> Problem {
    Problem::new(
        TemperatureProfile::constant(dim),
        alpha,
        InitialData::UniformMaxwellian { rho0: 1.0, temperature: 0.5 },
    )
    .unwrap()
}

#[test]
fn million_particle_initial_ensemble() {
    let e = ParticleEnsemble::new(&cold(Dim::Two, 0.5), 1_000_000, 99).unwrap();
    let prof = e.density_profile(32).unwrap();
    // Binomial count per equal-area bin: n p (1 - p) with p = 1/32.
    let n = 1_000_000f64;
    let p = 1.0 / 32.0;
    let sigma = (n * p * (1.0 - p)).sqrt() / (n * p);
    for d in &prof.density {
        assert!((d - 1.0).abs() < 3.0 * sigma, "{d}");
    }
    let s = 0.5f64.sqrt() * 0.5f64.sqrt();
    let cdf = |v: f64| {
        let z = v / s;
        erf(z / 2f64.sqrt()) - (2.0 / PI).sqrt() * z * (-z * z / 2.0).exp()
    };
    let mut speeds: Vec<f64> = e.particles.iter().map(|p| p.zeta.iter().map(|c| c * c).sum::<f64>().sqrt()).collect();
    assert!(ks_statistic(&mut speeds, cdf) < 0.002);
}

#[test]
fn diffuse_steady_flux_matches_the_steady_state() {
    let p = Problem::new(TemperatureProfile::constant(Dim::Two), 1.0, InitialData::ScaledSteady { rho0: 1.0 }).unwrap();
    let mut e = ParticleEnsemble::new(&p, 1_000_000, 5).unwrap();
    let mut tally = FluxTally::new(Dim::Two, 1, 0.0, 50.0, 1).unwrap();
    e.advance(&p.steady.profile, 1.0, 50.0, None, AdvanceOptions::default(), Some(&mut tally)).unwrap();
    let f = empirical_flux(&tally);
    let (v, se) = (f.value[0][0].unwrap(), f.std_error[0][0].unwrap());
    assert!((v - 1.0 / p.steady.c_s).abs() < 3.0 * se, "{v} +- {se}");
}

#[test]
fn quadrupling_particles_halves_standard_errors() {
    let p = cold(Dim::One, 0.5);
    let run = |n, seed| {
        let mut e = ParticleEnsemble::new(&p, n, seed).unwrap();
        let mut tally = FluxTally::new(Dim::One, 0, 0.0, 1.0, 5).unwrap();
        for k in 1..=5 {
            e.advance(&p.steady.profile, 0.5, k as f64, None, AdvanceOptions::default(), Some(&mut tally)).unwrap();
        }
        empirical_flux(&tally)
    };
    let (a, b) = (run(50_000, 1), run(200_000, 2));
    for w in 0..2 {
        for k in 0..5 {
            let ratio = a.std_error[w][k].unwrap() / b.std_error[w][k].unwrap();
            assert!((ratio - 2.0).abs() < 0.4, "{ratio}");
        }
    }
}

/// Average of the solver density over `[lo, hi]` (slab) or the disk of radius `hi`.
fn bin_density(p: &Problem, h: &fmflow::flux_solver::FluxHistory, t: f64, lo: f64, hi: f64) -> f64 {
    let quad = MomentQuadrature::default();
    let rule = GaussRule::new(3);
    match p.dim() {
        Dim::One => rule.integrate(lo, hi, |x| moments(p, h, [x, 0.0], t, &quad).unwrap().density) / (hi - lo),
        Dim::Two => {
            // Radial symmetry: average over the central disk with area weight 2 r dr / hi^2.
            rule.integrate(0.0, hi, |r| 2.0 * r * moments(p, h, [r, 0.0], t, &quad).unwrap().density) / (hi * hi)
        }
    }
}

#[test]
fn four_standard_scenarios_agree_with_the_solvers() {
    for dim in [Dim::One, Dim::Two] {
        for alpha in [0.5, 1.0] {
            let p = cold(dim, alpha);
            let h = solve_flux(&p, &FluxGrid { t_max: 10.0, n_theta: 64, ..FluxGrid::default() }).unwrap();
            let mut e = ParticleEnsemble::new(&p, 200_000, 17).unwrap();
            let mut tally = FluxTally::new(dim, 8, 0.0, 1.0, 10).unwrap();
            for k in 1..=10 {
                e.advance(&p.steady.profile, alpha, k as f64, None, AdvanceOptions::default(), Some(&mut tally))
                    .unwrap();
            }
            let f = empirical_flux(&tally);
            let rule = GaussRule::new(2);
            let (mut ok, mut total) = (0, 0);
            for b in 0..tally.boundary_bins {
                for k in 0..tally.time_bins {
                    let (t0, t1) = (tally.time_edge(k), tally.time_edge(k + 1));
                    let solver = match dim {
                        Dim::One => {
                            rule.integrate_composite(t0, t1, 20, |t| h.at_wall(Wall::from_index(b), t).unwrap())
                        }
                        Dim::Two => {
                            let (a0, a1) = tally.boundary_edges(b);
                            rule.integrate_composite(t0, t1, 20, |t| {
                                rule.integrate_composite(a0, a1, 8, |th| h.at_angle(th, t).unwrap()) / (a1 - a0)
                            })
                        }
                    } / (t1 - t0);
                    total += 1;
                    if (f.value[b][k].unwrap() - solver).abs() <= 3.0 * f.std_error[b][k].unwrap() {
                        ok += 1;
                    }
                }
            }
            assert!(ok as f64 >= 0.95 * total as f64, "d{} a{alpha}: {ok}/{total}", dim.value());
            let prof = e.density_profile(8).unwrap();
            let centre = match dim {
                Dim::One => (3, bin_density(&p, &h, 10.0, -0.25, 0.0)),
                Dim::Two => (0, bin_density(&p, &h, 10.0, 0.0, (1.0f64 / 8.0).sqrt())),
            };
            let (mc, se) = (prof.density[centre.0], prof.std_error[centre.0]);
            assert!((mc - centre.1).abs() < 3.0 * se, "centre density {mc} +- {se} vs {}", centre.1);
        }
    }
}

#[test]
fn flight_law_matches_the_renewal_kernel() {
    for (dim, walls) in [
        (Dim::One, TemperatureProfile::walls(0.5, 1.0).unwrap()),
        (Dim::Two, TemperatureProfile::cosine_dip(0.4).unwrap()),
    ] {
        let flights = diffuse_flights(&walls, 0.5, 100_000, 16, 42).unwrap();
        assert!(flights.iter().filter(|f| f.chords >= 3).count() > 10_000);
        let mut sigma: Vec<f64> = flights.iter().map(Flight::normalized).collect();
        let ks = ks_statistic(&mut sigma, |s| flight_cdf(dim, s));
        assert!(ks < 0.005, "d{} KS {ks}", dim.value());
    }
}

#[test]
fn killing_mode_tracks_velocity_dependent_weights() {
    let p = cold(Dim::Two, 0.5);
    let model = fmflow::transport::DampingModel::new(0.5, 1.0, 2.0).unwrap();
    let mut a = ParticleEnsemble::new(&p, 200_000, 3).unwrap();
    let mut b = a.clone();
    a.advance(&p.steady.profile, 0.5, 3.0, Some(&model), AdvanceOptions::default(), None).unwrap();
    b.advance(&p.steady.profile, 0.5, 3.0, Some(&model), AdvanceOptions { killing: true }, None).unwrap();
    let alive = b.particles.iter().filter(|q| q.alive).count() as f64 / 200_000.0;
    let se = (alive * (1.0 - alive) / 200_000.0).sqrt() * PI;
    assert!((a.weight_sum() - b.weight_sum()).abs() < 4.0 * se, "{} vs {}", a.weight_sum(), b.weight_sum());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn particles_stay_in_the_domain_and_weights_are_conserved(
        two in any::<bool>(),
        alpha in 0.0f64..=1.0,
        r in 0.0f64..1.0,
        a in 0.0f64..6.3,
        vx in -3.0f64..3.0,
        vy in -3.0f64..3.0,
        t_end in 0.1f64..20.0,
    ) {
        let dim = if two { Dim::Two } else { Dim::One };
        let x = if two { [r * a.cos(), r * a.sin()] } else { [2.0 * r - 1.0, 0.0] };
        let particle = Particle { x, zeta: [vx, vy, 0.3], weight: 0.7, alive: true, word_pos: 0 };
        let mut e = ParticleEnsemble::from_particles(dim, 9, vec![particle; 4]);
        let walls = TemperatureProfile::constant(dim);
        let stats = e.advance(&walls, alpha, t_end, None, AdvanceOptions::default(), None).unwrap();
        prop_assert_eq!(stats.diffuse + stats.specular, stats.wall_hits);
        for q in &e.particles {
            prop_assert!(q.x[0].hypot(q.x[1]) <= 1.0 + 1e-9);
            prop_assert_eq!(q.weight, 0.7);
            if alpha == 0.0 {
                let v0 = if two { vx.hypot(vy) } else { vx.abs() };
                let v1 = if two { q.zeta[0].hypot(q.zeta[1]) } else { q.zeta[0].abs() };
                prop_assert!((v0 - v1).abs() <= 1e-12 * v0.max(1.0));
            }
        }
    }
}
