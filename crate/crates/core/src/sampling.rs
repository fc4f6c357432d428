//! Exact samplers for sphere hitting laws.
//!
//! The hitting distribution of the unit sphere for Brownian motion started
//! inside the unit ball at `x` has density `(1 - |x|^2) / |z - x|^d` with
//! respect to the normalized surface measure. In the plane this is the
//! wrapped Cauchy law, sampled by inverting its CDF. For `d >= 3` we sample
//! the cosine `t = z . x/|x|`, whose density is proportional to
//! `(1 - t^2)^((d-3)/2) (1 + rho^2 - 2 rho t)^(-d/2)`, and then attach a
//! uniform direction in the orthogonal complement.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::geometry::Vector;
use crate::rng::gaussian;

/// Uniform point on the unit sphere of R^D.
pub fn uniform_sphere<const D: usize, R: Rng + ?Sized>(rng: &mut R) -> Vector<D> {
    loop {
        let g: Vector<D> = gaussian(rng, 1.0);
        let n = g.norm();
        if n > 1e-300 {
            return g * (1.0 / n);
        }
    }
}

/// Angular increment of the wrapped Cauchy law with concentration `rho`,
/// density `(1 - rho^2) / (2 pi (1 + rho^2 - 2 rho cos w))` on `(-pi, pi]`.
pub fn wrapped_cauchy<R: Rng + ?Sized>(rho: f64, rng: &mut R) -> f64 {
    debug_assert!((0.0..1.0).contains(&rho));
    let u: f64 = rng.random();
    let k = (1.0 - rho) / (1.0 + rho);
    2.0 * (k * (PI * (u - 0.5)).tan()).atan()
}

/// Exit point on the unit sphere of Brownian motion started at `x`, `|x| < 1`.
pub fn poisson_kernel_ball<const D: usize, R: Rng + ?Sized>(x: &Vector<D>, rng: &mut R) -> Vector<D> {
    let rho = x.norm();
    debug_assert!(rho < 1.0, "start must lie inside the unit ball");
    if rho == 0.0 {
        return uniform_sphere(rng);
    }
    let axis = *x * (1.0 / rho);
    if D == 2 {
        let base = axis[1].atan2(axis[0]);
        let th = base + wrapped_cauchy(rho, rng);
        let mut z = Vector::<D>::ZERO;
        z[0] = th.cos();
        z[1] = th.sin();
        return z;
    }
    let d = D as f64;
    // Uniform proposal is cheap when the kernel is flat enough.
    let bound = (1.0 + rho) / (1.0 - rho).powi(D as i32 - 1);
    if bound <= 8.0 {
        loop {
            let z: Vector<D> = uniform_sphere(rng);
            let dist_sq = (z - *x).norm_sq();
            let dens = (1.0 - rho * rho) / dist_sq.powf(0.5 * d);
            if rng.random::<f64>() * bound <= dens {
                return z;
            }
        }
    }
    let t = kernel_cosine(rho, D, rng);
    attach_orthogonal(&axis, t, rng)
}

/// Cosine to the start direction for the kernel, via a truncated beta-prime
/// proposal on `y = s/a - 1`, `s = |z - x|^2`, `a = (1 - rho)^2`.
fn kernel_cosine<R: Rng + ?Sized>(rho: f64, d: usize, rng: &mut R) -> f64 {
    let a = (1.0 - rho) * (1.0 - rho);
    let b = (1.0 + rho) * (1.0 + rho);
    let y_max = (b - a) / a;
    let alpha = (d as f64 - 1.0) / 2.0;
    let beta = Beta::new(alpha, 0.5).expect("valid beta parameters");
    let expo = (d as f64 - 3.0) / 2.0;
    loop {
        let u: f64 = beta.sample(rng);
        if u >= 1.0 {
            continue;
        }
        let y = u / (1.0 - u);
        if y > y_max {
            continue;
        }
        let s = a * (1.0 + y);
        if expo > 0.0 {
            let w = ((b - s) / (b - a)).max(0.0).powf(expo);
            if rng.random::<f64>() > w {
                continue;
            }
        }
        return ((1.0 + rho * rho - s) / (2.0 * rho)).clamp(-1.0, 1.0);
    }
}

fn attach_orthogonal<const D: usize, R: Rng + ?Sized>(axis: &Vector<D>, t: f64, rng: &mut R) -> Vector<D> {
    loop {
        let g: Vector<D> = gaussian(rng, 1.0);
        let perp = g - *axis * g.dot(axis);
        let n = perp.norm();
        if n > 1e-12 {
            let s = (1.0 - t * t).max(0.0).sqrt();
            return *axis * t + perp * (s / n);
        }
    }
}

/// Hitting point of the unit sphere for Brownian motion started outside the
/// unit ball at `x`. Returns `None` when the path escapes to infinity (only
/// possible for `d >= 3`, with probability `1 - |x|^(2-d)`).
pub fn exterior_hit<const D: usize, R: Rng + ?Sized>(x: &Vector<D>, rng: &mut R) -> Option<Vector<D>> {
    let r = x.norm();
    debug_assert!(r > 1.0);
    if D > 2 {
        let p_hit = r.powi(2 - D as i32);
        if rng.random::<f64>() >= p_hit {
            return None;
        }
    }
    // Kelvin inversion: the conditional law is the interior kernel at x/|x|^2.
    let inv = *x * (1.0 / (r * r));
    Some(poisson_kernel_ball(&inv, rng))
}

/// Density of the unit-ball kernel at `z` (w.r.t. normalized surface measure).
pub fn poisson_kernel_density<const D: usize>(x: &Vector<D>, z: &Vector<D>) -> f64 {
    (1.0 - x.norm_sq()) / (*z - *x).norm_sq().powf(0.5 * D as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replica_rng;

    /// Reference CDF of the kernel cosine by brute-force quadrature of the
    /// one-dimensional density.
    fn cosine_cdf(rho: f64, d: usize, t: f64) -> f64 {
        let dens = |u: f64| {
            (1.0 - u * u).max(0.0).powf((d as f64 - 3.0) / 2.0)
                * (1.0 + rho * rho - 2.0 * rho * u).powf(-(d as f64) / 2.0)
        };
        // substitution u = cos(phi) removes endpoint singularities
        let integrate = |lo: f64, hi: f64| {
            let (p_lo, p_hi) = (hi.acos(), lo.acos());
            let n = 20000;
            let h = (p_hi - p_lo) / n as f64;
            (0..n)
                .map(|i| {
                    let p = p_lo + (i as f64 + 0.5) * h;
                    dens(p.cos()) * p.sin() * h
                })
                .sum::<f64>()
        };
        integrate(-1.0, t) / integrate(-1.0, 1.0)
    }

    fn check_kernel<const D: usize>(rho: f64) {
        let mut rng = replica_rng(11, D as u64 * 1000 + (rho * 100.0) as u64);
        let mut x = Vector::<D>::ZERO;
        x[0] = rho;
        let n = 40_000;
        let mut ts: Vec<f64> = (0..n)
            .map(|_| {
                let z = poisson_kernel_ball(&x, &mut rng);
                assert!((z.norm() - 1.0).abs() < 1e-12);
                z[0]
            })
            .collect();
        ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut dmax: f64 = 0.0;
        for q in [0.05, 0.2, 0.4, 0.6, 0.8, 0.95] {
            let t = ts[(q * n as f64) as usize];
            dmax = dmax.max((cosine_cdf(rho, D, t) - q).abs());
        }
        assert!(dmax < 0.012, "d={D} rho={rho} dmax={dmax}");
    }

    #[test]
    fn kernel_cosine_matches_quadrature() {
        for rho in [0.1, 0.5, 0.9, 0.97] {
            check_kernel::<3>(rho);
            check_kernel::<4>(rho);
        }
        check_kernel::<6>(0.3);
        check_kernel::<6>(0.8);
    }

    #[test]
    fn wrapped_cauchy_mean_cosine() {
        let mut rng = replica_rng(3, 0);
        let n = 200_000;
        let rho = (-0.5f64).exp();
        let m = (0..n).map(|_| wrapped_cauchy(rho, &mut rng).cos()).sum::<f64>() / n as f64;
        assert!((m - rho).abs() < 0.006, "{m}");
    }

    #[test]
    fn exterior_hit_probability_and_first_moment() {
        let mut rng = replica_rng(5, 0);
        let mut x = Vector::<3>::ZERO;
        x[0] = 2.0;
        let n = 100_000;
        let hits: Vec<Vector<3>> = (0..n).filter_map(|_| exterior_hit(&x, &mut rng)).collect();
        let p = hits.len() as f64 / n as f64;
        assert!((p - 0.5).abs() < 0.006, "{p}");
        // conditional mean of z.e1 is the harmonic extension of z1 evaluated
        // at the inverted point: |x*| = 1/2
        let m = hits.iter().map(|z| z[0]).sum::<f64>() / hits.len() as f64;
        assert!((m - 0.5).abs() < 0.01, "{m}");
    }
}
