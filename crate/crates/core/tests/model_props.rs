mod common;

use nalgebra::DVector;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relcrawl::equilibrium::{homotopy_equilibrium, sorted_symmetric_eigenvalues};
use relcrawl::integrate::{flow_map, integrate, IntegratorConfig};
use relcrawl::model::{Crawler, CrawlerParams, Layout};
use relcrawl::reduction::{Se2, SymmetryReduction};

use common::{standard_planar, standard_spatial};

/// Random non-degenerate configuration near the ground, some masses below it.
fn random_q(rng: &mut ChaCha8Rng, layout: Layout) -> Vec<f64> {
    let d = layout.dim();
    loop {
        let mut q: Vec<f64> = (0..layout.n_coords()).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        for i in 0..layout.n_masses() {
            q[i * d + d - 1] = rng.random::<f64>() * 0.6 - 0.2;
        }
        let ok = layout
            .pairs()
            .iter()
            .all(|&(i, j)| (0..d).map(|a| (q[i * d + a] - q[j * d + a]).powi(2)).sum::<f64>().sqrt() > 0.1);
        if ok {
            return q;
        }
    }
}

fn random_u(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
}

fn crawlers() -> Vec<Crawler> {
    vec![
        Crawler::planar(CrawlerParams::standard()).unwrap(),
        Crawler::spatial(CrawlerParams::spatial_default()).unwrap(),
    ]
}

#[test]
fn viscous_acceleration_is_minus_rayleigh_matrix_times_velocity() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for c in crawlers() {
        let n = c.n_coords();
        let sched = c.constant_schedule();
        for _ in 0..100 {
            let q = random_q(&mut rng, c.layout());
            let u = random_u(&mut rng, n);
            let mut y = q.clone();
            y.extend(&u);
            let mut y0 = q.clone();
            y0.extend(vec![0.0; n]);
            let a = c.eom(0.0, &y, &sched).unwrap();
            let a0 = c.eom(0.0, &y0, &sched).unwrap();
            let nu_u = c.rayleigh_matrix(&q).unwrap() * DVector::from_column_slice(&u);
            for i in 0..n {
                assert!((a[n + i] - a0[n + i] + nu_u[i]).abs() < 1e-10, "component {i}");
            }
        }
    }
}

#[test]
fn rayleigh_function_is_a_psd_quadratic_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for c in crawlers() {
        let n = c.n_coords();
        for _ in 0..100 {
            let q = random_q(&mut rng, c.layout());
            let u = random_u(&mut rng, n);
            let r = c.rayleigh_value(&q, &u).unwrap();
            let u2: Vec<f64> = u.iter().map(|x| 2.0 * x).collect();
            assert!((c.rayleigh_value(&q, &u2).unwrap() - 4.0 * r).abs() < 1e-12 * r.max(1.0));
            let nu = c.rayleigh_matrix(&q).unwrap();
            assert!((&nu - nu.transpose()).amax() < 1e-14);
            let uv = DVector::from_column_slice(&u);
            assert!((uv.dot(&(&nu * &uv)) - 2.0 * r).abs() < 1e-11 * r.max(1.0));
            assert!(sorted_symmetric_eigenvalues(&nu)[0] >= -1e-12);
        }
    }
}

#[test]
fn translation_equivariance_of_the_vector_field() {
    let red = standard_planar();
    let c = red.crawler();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let sched = relcrawl::model::RestLengthSchedule::three_spring_gait(0.3);
    for _ in 0..50 {
        let mut y = random_q(&mut rng, Layout::Planar);
        y.extend(random_u(&mut rng, 6));
        let t = rng.random::<f64>();
        let a = c.eom(t, &y, &sched).unwrap();
        let b = c.eom(t, &red.act(&1.0, &y), &sched).unwrap();
        let scale = a.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        for i in 0..12 {
            assert!((a[i] - b[i]).abs() <= 1e-13 * scale, "component {i}: {} vs {}", a[i], b[i]);
        }
    }
}

#[test]
fn planar_isometry_equivariance_of_the_vector_field() {
    let red = standard_spatial();
    let c = red.crawler();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let sched = c.constant_schedule();
    for _ in 0..50 {
        let mut y = random_q(&mut rng, Layout::Spatial);
        y.extend(random_u(&mut rng, 12));
        let g =
            Se2::new(rng.random::<f64>() * 6.0 - 3.0, rng.random::<f64>() * 4.0 - 2.0, rng.random::<f64>() * 4.0 - 2.0);
        let dy = c.eom(0.0, &y, &sched).unwrap();
        let moved = c.eom(0.0, &red.act(&g, &y), &sched).unwrap();
        // tangent vectors only rotate
        let expect = red.act(&Se2::rotation(g.phi), &dy);
        let scale = dy.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        for i in 0..24 {
            assert!((moved[i] - expect[i]).abs() <= 1e-10 * scale, "component {i}");
        }
    }
}

#[test]
fn potential_force_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for c in crawlers() {
        let n = c.n_coords();
        let rest = c.params().rest_lengths.clone();
        let sched = c.constant_schedule();
        for _ in 0..100 {
            let q = random_q(&mut rng, c.layout());
            let mut y = q.clone();
            y.extend(vec![0.0; n]);
            let acc = c.eom(0.0, &y, &sched).unwrap();
            let h = 1e-6;
            for i in 0..n {
                let mut qp = q.clone();
                let mut qm = q.clone();
                qp[i] += h;
                qm[i] -= h;
                let fd = (c.total_potential(&qp, &rest).unwrap() - c.total_potential(&qm, &rest).unwrap()) / (2.0 * h);
                assert!((acc[n + i] + fd).abs() < 1e-6, "coordinate {i}: {} vs {}", -acc[n + i], fd);
            }
        }
    }
}

#[test]
fn potential_hessian_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for c in crawlers() {
        let n = c.n_coords();
        let rest = c.params().rest_lengths.clone();
        for _ in 0..20 {
            let q = random_q(&mut rng, c.layout());
            let hess = c.potential_hessian(&q, &rest).unwrap();
            let h = 1e-6;
            for j in 0..n {
                let mut qp = q.clone();
                let mut qm = q.clone();
                qp[j] += h;
                qm[j] -= h;
                let gp = c.potential_gradient(&qp, &rest).unwrap();
                let gm = c.potential_gradient(&qm, &rest).unwrap();
                for i in 0..n {
                    assert!((hess[(i, j)] - (gp[i] - gm[i]) / (2.0 * h)).abs() < 1e-5);
                }
            }
        }
    }
}

fn perturbed_start(seed: u64) -> (relcrawl::reduction::PlanarReduction, Vec<f64>) {
    let red = standard_planar();
    let eq = homotopy_equilibrium(&red).unwrap();
    let mut y = red.lift_configuration(&eq.shape, &0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in y.iter_mut() {
        *v += 0.05 * (rng.random::<f64>() - 0.5);
    }
    y.extend(random_u(&mut rng, 6).iter().map(|v| 0.5 * v));
    (red, y)
}

#[test]
fn energy_balance_along_unforced_trajectories() {
    let (red, y0) = perturbed_start(7);
    let c = red.crawler();
    let sched = c.constant_schedule();
    let rest = c.params().rest_lengths.clone();
    let cfg = IntegratorConfig::with_tolerances(1e-11, 1e-13);
    let traj = integrate(|t, y, dy| c.eom_rhs(t, y, &sched, dy), 0.0, &y0, 5.1, &cfg).unwrap();
    let energy = |t: f64| {
        let y = traj.sample_at(t).unwrap();
        c.total_energy(&y[..6], &y[6..], &rest).unwrap()
    };
    let h: f64 = 1e-4;
    let mut worst: f64 = 0.0;
    let mut prev = energy(0.0);
    for k in 1..200 {
        let t = 5.0 * k as f64 / 200.0;
        let y = traj.sample_at(t).unwrap();
        let de = (energy(t + h) - energy(t - h)) / (2.0 * h);
        let r = c.rayleigh_value(&y[..6], &y[6..]).unwrap();
        worst = worst.max((de + 2.0 * r).abs());
        let e = energy(t);
        assert!(e <= prev + 1e-9, "energy increased at t = {t}");
        prev = e;
    }
    assert!(worst < 1e-5, "max |dE/dt + 2R| = {worst:e}");
}

#[test]
fn undamped_crawler_above_ground_conserves_energy() {
    let p = CrawlerParams { nu_s: 0.0, nu_ns: 0.0, nu_db: 0.0, ..CrawlerParams::standard() };
    let c = Crawler::planar(p).unwrap();
    let sched = c.constant_schedule();
    let rest = c.params().rest_lengths.clone();
    // launched upward with a spin, stays above the ground for 10 time units
    let mut y = vec![0.0, 20.0, 1.1, 20.0, 0.5, 20.9];
    y.extend([0.3, 5.0, -0.2, 5.2, 0.1, 4.9]);
    let cfg = IntegratorConfig::default();
    let traj = integrate(|t, y, dy| c.eom_rhs(t, y, &sched, dy), 0.0, &y, 10.0, &cfg).unwrap();
    let e0 = c.total_energy(&y[..6], &y[6..], &rest).unwrap();
    for s in traj.states() {
        assert!(s[1] > 0.0 && s[3] > 0.0 && s[5] > 0.0);
        let e = c.total_energy(&s[..6], &s[6..], &rest).unwrap();
        assert!((e - e0).abs() < 1e-7 * e0.abs(), "drift {:e}", e - e0);
    }
}

#[test]
fn free_fall_follows_the_ballistic_arc() {
    let c = Crawler::planar(CrawlerParams::standard()).unwrap();
    let sched = c.constant_schedule();
    let h = 3f64.sqrt() / 2.0;
    let mut y = vec![0.0, 1.0, 1.0, 1.0, 0.5, 1.0 + h];
    y.extend([0.0; 6]);
    let traj = integrate(|t, y, dy| c.eom_rhs(t, y, &sched, dy), 0.0, &y, 1.3, &IntegratorConfig::default()).unwrap();
    for k in 0..=130 {
        let t = k as f64 / 100.0;
        let s = traj.sample_at(t).unwrap();
        assert!((s[1] - (1.0 - t * t / 2.0)).abs() < 1e-9, "t = {t}");
        assert!((s[5] - (1.0 + h - t * t / 2.0)).abs() < 1e-9);
        assert!(s[0].abs() < 1e-12);
    }
}

#[test]
fn equilibrium_is_a_rest_point_of_the_flow() {
    let red = standard_planar();
    let c = red.crawler();
    let eq = homotopy_equilibrium(&red).unwrap();
    let q = red.lift_configuration(&eq.shape, &0.0).unwrap();
    let rest = c.params().rest_lengths.clone();
    let mut y = q.clone();
    y.extend([0.0; 6]);
    let sched = c.constant_schedule();
    let dy = c.eom(0.0, &y, &sched).unwrap();
    let acc = dy[6..].iter().map(|a| a * a).sum::<f64>().sqrt();
    assert!(acc <= 1e-9, "|q̈| = {acc:e}");
    assert_eq!(c.total_energy(&q, &[0.0; 6], &rest).unwrap(), c.total_potential(&q, &rest).unwrap());
    let end = flow_map(|t, y, dy| c.eom_rhs(t, y, &sched, dy), &y, 0.0, 10.0, &IntegratorConfig::default()).unwrap();
    let dist = end.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    assert!(dist <= 1e-10, "drift {dist:e}");
}

#[test]
fn spatial_equilibrium_is_a_rest_point() {
    let red = standard_spatial();
    let c = red.crawler();
    let eq = homotopy_equilibrium(&red).unwrap();
    let mut y = red.lift_configuration(&eq.shape, &Se2::IDENTITY).unwrap();
    y.extend([0.0; 12]);
    let dy = c.eom(0.0, &y, &c.constant_schedule()).unwrap();
    assert!(dy[12..].iter().all(|a| a.abs() < 1e-9));
}
