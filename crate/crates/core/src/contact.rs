//! Discretized engine for the driver `B` and the balls `X`, `Y`.
//!
//! Each step adds a Gaussian increment to the driver and then restores the
//! hard constraints `|B - X| >= 1`, `|B - Y| >= 1`, `|X - Y| >= 2` by
//! projection. The penetration depth removed by each projection is the
//! local-time increment of the ball involved.
//!
//! * `Pushing`: the ball touched by the driver moves away along the normal;
//!   if it then overlaps its partner, the partner is moved along the line of
//!   centers. The partner never pushes back.
//! * `Frozen`: the balls stay put and the driver is projected out of them,
//!   i.e. reflected Brownian motion in the complement of the balls.
//!
//! [`advance`] optionally replaces the Euler step by exact moves when the
//! driver is far from every ball (see [`FarField`]).

use rand::Rng;
use serde::Serialize;

use crate::clocks::LocalTimeLedger;
use crate::error::{Error, Result};
use crate::geometry::{Edge, Point, Space, UnfoldedPoint, Vector};
use crate::rng::{gaussian, replica_rng, SimRng};
use crate::sampling::{exterior_hit, uniform_sphere};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Pushing,
    Frozen,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Which {
    X,
    Y,
}

impl Which {
    pub fn other(self) -> Which {
        match self {
            Which::X => Which::Y,
            Which::Y => Which::X,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimConfig<const D: usize> {
    pub space: Space<D>,
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    pub tol_overlap: f64,
    pub max_contact_iters: usize,
    pub mode: Mode,
    /// Keep every `snapshot_stride`-th state in [`run_path`]; 0 disables snapshots.
    pub snapshot_stride: usize,
}

impl<const D: usize> SimConfig<D> {
    pub fn new(space: Space<D>, dt: f64, t_end: f64, seed: u64, mode: Mode) -> Result<Self> {
        let cfg =
            SimConfig { space, dt, t_end, seed, tol_overlap: 1e-9, max_contact_iters: 64, mode, snapshot_stride: 0 };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt < 0.01) {
            return Err(Error::InvalidConfig(format!("dt = {} must lie in (0, 0.01)", self.dt)));
        }
        if !(self.t_end >= 0.0) {
            return Err(Error::InvalidConfig(format!("t_end = {} must be nonnegative", self.t_end)));
        }
        if self.max_contact_iters < 8 {
            return Err(Error::InvalidConfig("max_contact_iters must be at least 8".into()));
        }
        if !(self.tol_overlap > 0.0) {
            return Err(Error::InvalidConfig("tol_overlap must be positive".into()));
        }
        Ok(())
    }
}

/// A unit ball with its lifted center and the local times of the driver on it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ball<const D: usize> {
    pub lifted: UnfoldedPoint<D>,
    pub local_time: f64,
    pub vector_local_time: Vector<D>,
}

impl<const D: usize> Ball<D> {
    pub fn at(center: Point<D>) -> Self {
        Ball { lifted: UnfoldedPoint::at(center), local_time: 0.0, vector_local_time: Vector::ZERO }
    }

    pub fn center(&self) -> Point<D> {
        self.lifted.origin_ref
    }
}

/// How much the recorded time `t` can be trusted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Clock {
    /// Sum of Euler steps.
    Exact,
    /// Far-field jumps add their mean exit time; long-run time averages stay unbiased.
    MeanExitTime,
    /// An exact return from far away was used; `t` no longer measures time.
    Untracked,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemState<const D: usize> {
    pub t: f64,
    pub driver: UnfoldedPoint<D>,
    pub x: Ball<D>,
    pub y: Option<Ball<D>>,
    /// Ball most recently pushed by the driver.
    pub pusher: Option<Which>,
    pub clock: Clock,
}

impl<const D: usize> SystemState<D> {
    /// Check the standing assumptions and build the state at time 0.
    pub fn new(space: &Space<D>, driver: Point<D>, x: Point<D>, y: Option<Point<D>>) -> Result<Self> {
        let bx = space.distance(&driver, &x);
        if bx < 1.0 - 1e-12 {
            return Err(Error::Geometry(format!("|B - X| = {bx} < 1")));
        }
        if let Some(y) = y {
            let by = space.distance(&driver, &y);
            let xy = space.distance(&x, &y);
            if by < 1.0 - 1e-12 {
                return Err(Error::Geometry(format!("|B - Y| = {by} < 1")));
            }
            if xy < 2.0 - 1e-12 {
                return Err(Error::Geometry(format!("|X - Y| = {xy} < 2")));
            }
            if bx == 1.0 && by == 1.0 {
                return Err(Error::Geometry("driver starts on both spheres".into()));
            }
        }
        Ok(SystemState {
            t: 0.0,
            driver: UnfoldedPoint::at(driver),
            x: Ball::at(x),
            y: y.map(Ball::at),
            pusher: None,
            clock: Clock::Exact,
        })
    }

    pub fn b(&self) -> Point<D> {
        self.driver.origin_ref
    }

    pub fn lx(&self) -> f64 {
        self.x.local_time
    }

    pub fn ly(&self) -> f64 {
        self.y.map_or(0.0, |y| y.local_time)
    }

    /// Total local time `L = L^X + L^Y`.
    pub fn local_time(&self) -> f64 {
        self.lx() + self.ly()
    }

    pub fn ball(&self, which: Which) -> Option<&Ball<D>> {
        match which {
            Which::X => Some(&self.x),
            Which::Y => self.y.as_ref(),
        }
    }

    /// Distance from the driver to each sphere surface (negative inside).
    pub fn gaps(&self, space: &Space<D>) -> (f64, Option<f64>) {
        let b = self.b();
        let gx = space.distance(&b, &self.x.center()) - 1.0;
        let gy = self.y.map(|y| space.distance(&b, &y.center()) - 1.0);
        (gx, gy)
    }

    /// All hard constraints hold within `tol`.
    pub fn constraints_hold(&self, space: &Space<D>, tol: f64) -> bool {
        let (gx, gy) = self.gaps(space);
        if gx < -tol || gy.is_some_and(|g| g < -tol) {
            return false;
        }
        match self.y {
            Some(y) => space.distance(&self.x.center(), &y.center()) >= 2.0 - tol,
            None => true,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct StepReport {
    pub d_lx: f64,
    pub d_ly: f64,
    pub pushes_x: u32,
    pub pushes_y: u32,
    pub double_contact: bool,
}

impl StepReport {
    pub fn pushed(&self) -> bool {
        self.pushes_x + self.pushes_y > 0
    }

    fn add_push(&mut self, which: Which, depth: f64) {
        match which {
            Which::X => {
                self.d_lx += depth;
                self.pushes_x += 1;
            }
            Which::Y => {
                self.d_ly += depth;
                self.pushes_y += 1;
            }
        }
    }
}

fn ball_mut<'a, const D: usize>(x: &'a mut Ball<D>, y: &'a mut Option<Ball<D>>, w: Which) -> &'a mut Ball<D> {
    match w {
        Which::X => x,
        Which::Y => y.as_mut().expect("second ball present"),
    }
}

/// Penetration depths of the driver into X and Y; the deeper one (if any
/// exceeds `tol`) is returned first.
fn deepest<const D: usize>(
    space: &Space<D>,
    b: &Point<D>,
    x: &Ball<D>,
    y: &Option<Ball<D>>,
    tol: f64,
) -> (Option<(Which, f64)>, bool) {
    let dx = 1.0 - space.distance(b, &x.center());
    let dy = y.map(|y| 1.0 - space.distance(b, &y.center()));
    let double = dx > tol && dy.is_some_and(|d| d > tol);
    let pick = match dy {
        Some(dy) if dy > dx => (Which::Y, dy),
        _ => (Which::X, dx),
    };
    (if pick.1 > tol { Some(pick) } else { None }, double)
}

/// Pushing-mode projection loop on full ball state.
pub fn resolve_pushing<const D: usize>(
    cfg: &SimConfig<D>,
    b: &Point<D>,
    x: &mut Ball<D>,
    y: &mut Option<Ball<D>>,
    pusher: &mut Option<Which>,
) -> Result<StepReport> {
    let space = &cfg.space;
    let tol = cfg.tol_overlap;
    let mut report = StepReport::default();
    for _ in 0..cfg.max_contact_iters {
        let mut moved = false;
        let (hit, double) = deepest(space, b, x, y, tol);
        report.double_contact |= double;
        if let Some((which, depth)) = hit {
            let ball = ball_mut(&mut *x, &mut *y, which);
            let n = space.outward_normal(&ball.center(), b)?;
            ball.lifted.shift(space, n * -depth);
            ball.local_time += depth;
            ball.vector_local_time += n * depth;
            report.add_push(which, depth);
            *pusher = Some(which);
            moved = true;
        }
        if let Some(yb) = y.as_mut() {
            let gap = 2.0 - space.distance(&x.center(), &yb.center());
            if gap > tol {
                let (p, q) = match pusher.unwrap_or(Which::X) {
                    Which::X => (&*x, yb),
                    Which::Y => (&*yb, &mut *x),
                };
                let dir = space.outward_normal(&p.center(), &q.center())?;
                q.lifted.shift(space, dir * gap);
                moved = true;
            }
        }
        if !moved {
            return Ok(report);
        }
    }
    Err(Error::ContactStalled { iters: cfg.max_contact_iters })
}

/// Frozen-mode projection of the driver out of the (fixed) balls.
pub fn project_driver<const D: usize>(
    cfg: &SimConfig<D>,
    driver: &mut UnfoldedPoint<D>,
    x: &mut Ball<D>,
    y: &mut Option<Ball<D>>,
) -> Result<StepReport> {
    let space = &cfg.space;
    let tol = cfg.tol_overlap;
    let mut report = StepReport::default();
    for _ in 0..cfg.max_contact_iters {
        let (hit, double) = deepest(space, &driver.origin_ref, x, y, tol);
        report.double_contact |= double;
        let Some((which, depth)) = hit else {
            return Ok(report);
        };
        let ball = ball_mut(&mut *x, &mut *y, which);
        let n = space.outward_normal(&ball.center(), &driver.origin_ref)?;
        driver.shift(space, n * depth);
        ball.local_time += depth;
        ball.vector_local_time += n * depth;
        report.add_push(which, depth);
    }
    Err(Error::ContactStalled { iters: cfg.max_contact_iters })
}

/// Restore the constraints after the driver moved to `b` (pushing mode).
/// Returns the new centers of X and Y.
pub fn resolve_contacts<const D: usize>(
    b: &Point<D>,
    x: &Point<D>,
    y: Option<&Point<D>>,
    cfg: &SimConfig<D>,
) -> Result<(Point<D>, Option<Point<D>>, StepReport)> {
    let mut bx = Ball::at(*x);
    let mut by = y.map(|p| Ball::at(*p));
    let mut pusher = None;
    let report = resolve_pushing(cfg, b, &mut bx, &mut by, &mut pusher)?;
    Ok((bx.center(), by.map(|b| b.center()), report))
}

/// One Euler step with a given driver increment.
pub fn step<const D: usize>(
    state: &SystemState<D>,
    cfg: &SimConfig<D>,
    noise: Vector<D>,
) -> Result<(SystemState<D>, StepReport)> {
    let mut s = *state;
    let report = step_in_place(&mut s, cfg, noise)?;
    Ok((s, report))
}

#[inline]
pub fn step_in_place<const D: usize>(
    s: &mut SystemState<D>,
    cfg: &SimConfig<D>,
    noise: Vector<D>,
) -> Result<StepReport> {
    let space = &cfg.space;
    let moved = space.translate(s.driver.origin_ref, noise);
    s.driver = space.unfold_step(&s.driver, moved)?;
    let report = match cfg.mode {
        Mode::Pushing => {
            let b = s.driver.origin_ref;
            resolve_pushing(cfg, &b, &mut s.x, &mut s.y, &mut s.pusher)?
        }
        Mode::Frozen => project_driver(cfg, &mut s.driver, &mut s.x, &mut s.y)?,
    };
    s.t += cfg.dt;
    debug_assert!(s.constraints_hold(space, 10.0 * cfg.tol_overlap));
    Ok(report)
}

/// Exact moves for the driver away from the balls.
///
/// When the driver is at least `2 * band` from every sphere it jumps to a
/// uniform point of the largest sphere around it that stays `band` clear of
/// the balls (capped at `r/4` on a torus and at the outer sphere when one
/// is set). Single-ball runs in R^d may also set `return_radius`: once the
/// driver is that far from the ball it is returned to the ball surface (or
/// lost to infinity for `d >= 3`) with the exact exterior hitting law.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FarField {
    pub band: f64,
    pub return_radius: Option<f64>,
    /// Absorbing sphere around ball X; the run stops within `outer_eps` of it.
    pub outer_radius: Option<f64>,
    pub outer_eps: f64,
}

impl FarField {
    pub fn new(band: f64) -> Self {
        FarField { band, return_radius: None, outer_radius: None, outer_eps: 1e-6 }
    }

    pub fn with_return(mut self, radius: f64) -> Self {
        self.return_radius = Some(radius);
        self
    }

    pub fn with_outer(mut self, radius: f64) -> Self {
        self.outer_radius = Some(radius);
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Advance {
    Step(StepReport),
    Jump,
    /// Returned to the surface of X from far away.
    Returned,
    /// Lost to infinity (transient case).
    Escaped,
    /// Reached the outer absorbing sphere.
    Exited,
}

impl Advance {
    pub fn report(&self) -> StepReport {
        match self {
            Advance::Step(r) => *r,
            _ => StepReport::default(),
        }
    }
}

/// One move of the engine: an Euler step near the balls, an exact move otherwise.
pub fn advance<const D: usize>(
    s: &mut SystemState<D>,
    cfg: &SimConfig<D>,
    far: Option<&FarField>,
    rng: &mut SimRng,
) -> Result<Advance> {
    if let Some(ff) = far {
        let space = &cfg.space;
        let (gx, gy) = s.gaps(space);
        let gap = gy.map_or(gx, |g| g.min(gx));
        let outer_gap = ff.outer_radius.map(|r| r - (gx + 1.0));
        if let Some(og) = outer_gap {
            if og <= ff.outer_eps {
                return Ok(Advance::Exited);
            }
        }
        if gap >= 2.0 * ff.band {
            if let (Some(rr), None, Edge::Infinite) = (ff.return_radius, s.y, space.edge()) {
                if gx + 1.0 >= rr {
                    let rel = space.displacement(&s.x.center(), &s.b());
                    s.clock = Clock::Untracked;
                    return match exterior_hit(&rel, rng) {
                        None => Ok(Advance::Escaped),
                        Some(z) => {
                            let target = space.translate(s.x.center(), z);
                            let v = space.displacement(&s.b(), &target);
                            s.driver.shift(space, v);
                            Ok(Advance::Returned)
                        }
                    };
                }
            }
            let mut rho = gap - ff.band;
            if let Some(r) = space.edge_length() {
                rho = rho.min(0.25 * r);
            }
            if let Some(og) = outer_gap {
                rho = rho.min(og);
            }
            let dir: Vector<D> = uniform_sphere(rng);
            s.driver.shift(space, dir * rho);
            s.t += rho * rho / D as f64;
            s.clock = s.clock.max(Clock::MeanExitTime);
            return Ok(Advance::Jump);
        }
    }
    let noise = gaussian(rng, cfg.dt);
    Ok(Advance::Step(step_in_place(s, cfg, noise)?))
}

/// Everything [`run_path`] records.
#[derive(Clone, Debug)]
pub struct PathRecord<const D: usize> {
    pub ledger_x: LocalTimeLedger,
    pub ledger_y: LocalTimeLedger,
    pub ledger: LocalTimeLedger,
    pub snapshots: Vec<SystemState<D>>,
    pub final_state: SystemState<D>,
    pub steps: u64,
    pub double_contact_steps: u64,
}

/// Advance `t_end / dt` Euler steps from `initial`, calling `observe` after
/// each step. The noise stream is `replica_rng(cfg.seed, replica)`.
pub fn run_path_with<const D: usize, F>(
    cfg: &SimConfig<D>,
    initial: &SystemState<D>,
    replica: u64,
    mut observe: F,
) -> Result<PathRecord<D>>
where
    F: FnMut(&SystemState<D>, &StepReport),
{
    cfg.validate()?;
    if !initial.constraints_hold(&cfg.space, 1e-12) {
        return Err(Error::Geometry("initial state violates the standing assumptions".into()));
    }
    let mut rng = replica_rng(cfg.seed, replica);
    let n_steps = (cfg.t_end / cfg.dt).round() as u64;
    let mut s = *initial;
    let mut rec = PathRecord {
        ledger_x: LocalTimeLedger::new(),
        ledger_y: LocalTimeLedger::new(),
        ledger: LocalTimeLedger::new(),
        snapshots: Vec::new(),
        final_state: s,
        steps: 0,
        double_contact_steps: 0,
    };
    if cfg.snapshot_stride > 0 {
        rec.snapshots.push(s);
    }
    for k in 1..=n_steps {
        let noise = gaussian(&mut rng, cfg.dt);
        let report = step_in_place(&mut s, cfg, noise)?;
        // keep time on the exact grid
        s.t = k as f64 * cfg.dt;
        rec.double_contact_steps += u64::from(report.double_contact);
        rec.ledger_x.record(s.t, s.lx());
        rec.ledger_y.record(s.t, s.ly());
        rec.ledger.record(s.t, s.local_time());
        if cfg.snapshot_stride > 0 && k % cfg.snapshot_stride as u64 == 0 {
            rec.snapshots.push(s);
        }
        observe(&s, &report);
    }
    rec.ledger_x.flush();
    rec.ledger_y.flush();
    rec.ledger.flush();
    rec.steps = n_steps;
    rec.final_state = s;
    Ok(rec)
}

pub fn run_path<const D: usize>(cfg: &SimConfig<D>, initial: &SystemState<D>) -> Result<PathRecord<D>> {
    run_path_with(cfg, initial, 0, |_, _| {})
}

/// Uniformly random admissible configuration: X, Y uniform on the torus with
/// `|X - Y| >= min_sep`, B uniform outside both balls.
pub fn random_configuration<const D: usize>(
    space: &Space<D>,
    min_sep: f64,
    rng: &mut SimRng,
) -> Result<SystemState<D>> {
    let r = space.edge_length().ok_or(Error::InfiniteSpace)?;
    let mut unif = || {
        let mut c = [0.0; D];
        for v in c.iter_mut() {
            *v = rng.random::<f64>() * r;
        }
        space.point(c)
    };
    let x = unif();
    let y = loop {
        let y = unif();
        if space.distance(&x, &y) >= min_sep.max(2.0) {
            break y;
        }
    };
    let b = loop {
        let b = unif();
        if space.distance(&b, &x) > 1.0 && space.distance(&b, &y) > 1.0 {
            break b;
        }
    };
    SystemState::new(space, b, x, Some(y))
}
