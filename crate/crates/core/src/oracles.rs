//! Exact samplers for the driver observed on the inverse local-time clock of
//! a single fixed unit ball.
//!
//! In the plane the position `Z` on the unit circle at local time `t` has the
//! harmonic measure from `e^{-t} Z_0`, so the angle performs a wrapped
//! Cauchy walk. For `d >= 3` the chain is defective: it survives a local
//! time increment `delta` with probability `e^{-(d-2) delta}` and then moves
//! by the hitting law of the unit sphere from `e^{-delta} v`. The scaling
//! coupling builds the same process from a free Brownian path `B` and its
//! running minimum radius `M`: `U = B / M` has local time `-log M`.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::Vector;
use crate::rng::{gaussian, run_replicas, SimRng};
use crate::sampling::{exterior_hit, poisson_kernel_ball, uniform_sphere, wrapped_cauchy};
use crate::stats::EstimatorResult;

/// Angle after a local-time increment `delta` of the planar chain.
pub fn chain2d_step<R: Rng + ?Sized>(theta: f64, delta: f64, rng: &mut R) -> f64 {
    debug_assert!(delta > 0.0);
    theta + wrapped_cauchy((-delta).exp(), rng)
}

fn steps_for(horizon: f64, delta: f64) -> Result<(usize, f64)> {
    if !(horizon > 0.0 && delta > 0.0) {
        return Err(Error::InvalidConfig(format!("horizon {horizon} and step {delta} must be positive")));
    }
    let n = (horizon / delta).round().max(1.0) as usize;
    Ok((n, horizon / n as f64))
}

/// `E (L^1_u)^2` for the planar chain started uniform: the first component
/// of the vector local time is the Riemann sum of `cos(theta)` over the
/// local-time grid of step `delta` (rounded so that it divides `u`).
pub fn vector_local_time_2d(u: f64, n_paths: usize, delta: f64, seed: u64) -> Result<EstimatorResult> {
    let (n, h) = steps_for(u, delta)?;
    let sq = run_replicas(n_paths, seed, |_, rng| {
        let mut theta = 2.0 * PI * rng.random::<f64>();
        let mut l1 = 0.0;
        for _ in 0..n {
            l1 += theta.cos() * h;
            theta = chain2d_step(theta, h, rng);
        }
        l1 * l1
    });
    EstimatorResult::from_samples(format!("vector_local_time_2d(u={u}, delta={h})"), &sq)
}

/// Position of the defective chain on the unit sphere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SphereChainState<const D: usize> {
    pub v: Vector<D>,
    pub ell: f64,
    pub alive: bool,
}

impl<const D: usize> SphereChainState<D> {
    pub fn start(v: Vector<D>) -> Self {
        debug_assert!((v.norm() - 1.0).abs() < 1e-12);
        SphereChainState { v, ell: 0.0, alive: true }
    }
}

pub fn kelvin_chain_step<const D: usize, R: Rng + ?Sized>(
    state: SphereChainState<D>,
    delta: f64,
    rng: &mut R,
) -> SphereChainState<D> {
    debug_assert!(D >= 3 && state.alive);
    let survive = (-(D as f64 - 2.0) * delta).exp();
    if rng.random::<f64>() >= survive {
        return SphereChainState { alive: false, ..state };
    }
    let x = state.v * (-delta).exp();
    SphereChainState { v: poisson_kernel_ball(&x, rng), ell: state.ell + delta, alive: true }
}

/// `E (L^1_inf)^2` at a single step size, chain started uniform on the sphere.
/// The first component of the vector local time is `delta` times the sum of
/// `v_1` over the states visited before death.
pub fn kelvin_linf_sq<const D: usize>(delta: f64, n_paths: usize, seed: u64) -> Result<EstimatorResult> {
    if D < 3 {
        return Err(Error::RecurrentCase);
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidConfig(format!("step {delta} must be positive")));
    }
    let sq = run_replicas(n_paths, seed, |_, rng| {
        let mut s = SphereChainState::start(uniform_sphere::<D, _>(rng));
        let mut l1 = 0.0;
        while s.alive {
            l1 += s.v[0] * delta;
            s = kelvin_chain_step(s, delta, rng);
        }
        l1 * l1
    });
    EstimatorResult::from_samples(format!("kelvin_linf_sq(d={D}, delta={delta})"), &sq)
}

/// Three-level Richardson extrapolation over `deltas = [h, h/2, h/4]`,
/// removing the first- and second-order terms of the step-size bias.
/// Levels use independent seeds so their errors add in quadrature.
pub fn kelvin_linf_sq_extrapolated<const D: usize>(
    deltas: [f64; 3],
    n_paths: usize,
    seed: u64,
) -> Result<(EstimatorResult, Vec<EstimatorResult>)> {
    let [h0, h1, h2] = deltas;
    if (h0 / h1 - 2.0).abs() > 1e-9 || (h1 / h2 - 2.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig("step sizes must halve between levels".into()));
    }
    let levels = deltas
        .iter()
        .enumerate()
        .map(|(i, &h)| kelvin_linf_sq::<D>(h, n_paths, seed.wrapping_add(i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let est = EstimatorResult::combine(
        format!("kelvin_linf_sq(d={D}, extrapolated)"),
        &[(1.0 / 3.0, &levels[0]), (-2.0, &levels[1]), (8.0 / 3.0, &levels[2])],
    );
    Ok((est, levels))
}

/// Survivors of the defective chain at local time `level` from `v0`; a
/// single exact step since the chain is a semigroup.
pub fn kelvin_level_sample<const D: usize>(v0: Vector<D>, level: f64, n: usize, seed: u64) -> Vec<Vector<D>> {
    run_replicas(n, seed, |_, rng| {
        let s = kelvin_chain_step(SphereChainState::start(v0), level, rng);
        s.alive.then_some(s.v)
    })
    .into_iter()
    .flatten()
    .collect()
}

/// State of the scaling coupling.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouplingState<const D: usize> {
    /// Free Brownian position.
    pub b: Vector<D>,
    /// Running minimum of `|B|`.
    pub m: f64,
    /// `int M^{-2} ds`; far jumps contribute their mean exit time.
    pub c: f64,
    /// Local time `-log M`.
    pub lu: f64,
}

impl<const D: usize> CouplingState<D> {
    pub fn u(&self) -> Vector<D> {
        self.b * (1.0 / self.m)
    }
}

#[derive(Clone, Debug)]
pub struct CouplingTrace<const D: usize> {
    pub final_state: CouplingState<D>,
    /// `U` at the first instant its local time reaches each requested level.
    pub level_hits: Vec<Vector<D>>,
    pub escaped: bool,
    /// The floor on `M` was reached (local time truncated).
    pub truncated: bool,
    pub steps: u64,
}

/// Tuning of [`scaling_coupling_path`]; lengths are relative to `M`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouplingConfig {
    /// Euler step of the time-changed clock.
    pub dt: f64,
    pub floor: f64,
    /// Escape test radius: beyond `escape * M` the return is sampled exactly.
    pub escape: f64,
    /// Width of the band around `|B| = M` where Euler steps are used.
    pub band: f64,
}

impl CouplingConfig {
    pub fn new(dt: f64) -> Self {
        CouplingConfig { dt, floor: (-10.0f64).exp(), escape: 4.0, band: 0.1 }
    }
}

/// Free Brownian path from `v0` on the unit sphere with running minimum `M`.
///
/// Near `|B| = M` the path takes Euler steps of variance `dt M^2` (unit
/// steps of the time-changed clock). Away from it the path jumps to a
/// uniform point on a sphere that stays above `M`, which leaves `M`
/// unchanged. Beyond radius `escape * M` it either escapes or returns to the
/// sphere of radius `M` with the exact exterior hitting law.
pub fn scaling_coupling_path<const D: usize>(
    v0: Vector<D>,
    cfg: &CouplingConfig,
    levels: &[f64],
    rng: &mut SimRng,
) -> Result<CouplingTrace<D>> {
    if D < 3 {
        return Err(Error::RecurrentCase);
    }
    let mut s = CouplingState { b: v0, m: 1.0, c: 0.0, lu: 0.0 };
    let mut hits = Vec::with_capacity(levels.len());
    let mut steps = 0u64;
    let (mut escaped, mut truncated) = (false, false);
    loop {
        while hits.len() < levels.len() && s.lu >= levels[hits.len()] {
            hits.push(s.u());
        }
        let r = s.b.norm();
        if r >= cfg.escape * s.m {
            match exterior_hit(&(s.b * (1.0 / s.m)), rng) {
                None => {
                    escaped = true;
                    break;
                }
                Some(z) => s.b = z * s.m,
            }
            continue;
        }
        let gap = r - s.m;
        if gap >= 2.0 * cfg.band * s.m {
            let rho = gap - cfg.band * s.m;
            s.b += uniform_sphere::<D, _>(rng) * rho;
            s.c += (rho / s.m).powi(2) / D as f64;
            continue;
        }
        s.b += gaussian(rng, cfg.dt * s.m * s.m);
        s.c += cfg.dt;
        steps += 1;
        let r = s.b.norm();
        if r < s.m {
            if r <= cfg.floor {
                s.m = cfg.floor;
                s.lu = -cfg.floor.ln();
                truncated = true;
                break;
            }
            debug_assert!(r < s.m);
            s.m = r;
            s.lu = -r.ln();
        }
    }
    Ok(CouplingTrace { final_state: s, level_hits: hits, escaped, truncated, steps })
}
