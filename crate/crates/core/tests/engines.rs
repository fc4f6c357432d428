//! Walk-on-spheres against closed forms and against the time-stepped
//! frozen integrator.

use stirring::contact::{advance, Advance, Mode, SimConfig, SystemState};
use stirring::geometry::{Space, Vector};
use stirring::harmonic::{hit_distribution, wos_hit, Obstacles, WosConfig, WosOutcome};
use stirring::rng::run_replicas;

/// Probability that Brownian motion from radius `1 + delta` reaches radius
/// `b` before the unit sphere.
fn radial_escape(d: usize, b: f64, delta: f64) -> f64 {
    let g = |x: f64| x.powf(2.0 - d as f64);
    (1.0 - g(1.0 + delta)) / (1.0 - g(b))
}

fn radial_case<const D: usize>(b: f64, delta: f64, seed: u64) {
    let sp = Space::<D>::euclidean();
    let o = sp.point([0.0; D]);
    let obs = Obstacles::unit_balls(sp, vec![o]).unwrap();
    let cfg = WosConfig::new(1e-6).with_outer(o, b);
    let mut start = [0.0; D];
    start[0] = 1.0 + delta;
    let n = 100_000;
    let est = hit_distribution(sp.point(start), &obs, &cfg, &[Vector::axis(0)], 1, n, seed).unwrap();
    let p = est.escaped as f64 / n as f64;
    let exact = radial_escape(D, b, delta);
    let se = (exact * (1.0 - exact) / n as f64).sqrt();
    assert!((p - exact).abs() < 3.0 * se, "d={D} b={b}: {p} vs {exact}");
}

#[test]
fn radial_escape_grid() {
    for (i, b) in [2.0, 8.0].into_iter().enumerate() {
        radial_case::<3>(b, 0.05, 10 + i as u64);
        radial_case::<4>(b, 0.05, 20 + i as u64);
    }
}

#[test]
fn wos_and_frozen_integrator_agree_on_first_hit() {
    let sp = Space::<2>::torus(8.0).unwrap();
    let x = sp.point([2.0, 2.0]);
    let y = sp.point([5.5, 4.0]);
    let start = sp.point([3.4, 2.6]);
    let obs = Obstacles::unit_balls(sp, vec![x, y]).unwrap();

    let n_wos = 20_000;
    let wos = run_replicas(n_wos, 31, |_, rng| wos_hit(start, &obs, &WosConfig::new(1e-4), rng).unwrap());
    let wos_x = wos.iter().filter(|h| matches!(h, WosOutcome::Hit { obstacle: 0, .. })).count();

    let n_euler = 2_000;
    let cfg = SimConfig::new(sp, 5e-3, 0.0, 32, Mode::Frozen).unwrap();
    let init = SystemState::new(&sp, start, x, Some(y)).unwrap();
    let euler = run_replicas(n_euler, 32, |_, rng| {
        let mut s = init;
        loop {
            if let Advance::Step(rep) = advance(&mut s, &cfg, None, rng).unwrap() {
                if rep.d_lx > 0.0 || rep.d_ly > 0.0 {
                    return rep.d_lx >= rep.d_ly;
                }
            }
        }
    });
    let euler_x = euler.iter().filter(|&&hit_x| hit_x).count();

    let (p1, p2) = (wos_x as f64 / n_wos as f64, euler_x as f64 / n_euler as f64);
    let pooled = (wos_x + euler_x) as f64 / (n_wos + n_euler) as f64;
    let se = (pooled * (1.0 - pooled) * (1.0 / n_wos as f64 + 1.0 / n_euler as f64)).sqrt();
    let z = (p1 - p2) / se;
    let p_value = statrs::function::erf::erfc(z.abs() / std::f64::consts::SQRT_2);
    assert!(p_value > 0.01, "wos {p1} vs euler {p2}, z = {z}");
    assert!(p1 > 0.5, "start is closer to X: {p1}");
}
