//! Flat torus arithmetic and the lifted ("unfolded") coordinates used to
//! follow a path across the seams of the torus.
//!
//! Everything here is a pure function of its arguments. Dimension is a const
//! generic so that hot loops work on stack arrays.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A plain `D`-vector.
#[derive(Clone, Copy, PartialEq)]
pub struct Vector<const D: usize>(pub [f64; D]);

impl<const D: usize> Vector<D> {
    pub const ZERO: Self = Vector([0.0; D]);

    pub fn new(c: [f64; D]) -> Self {
        Vector(c)
    }

    /// Unit vector along axis `k`.
    pub fn axis(k: usize) -> Self {
        let mut c = [0.0; D];
        c[k] = 1.0;
        Vector(c)
    }

    pub fn dot(&self, other: &Self) -> f64 {
        let mut s = 0.0;
        for i in 0..D {
            s += self.0[i] * other.0[i];
        }
        s
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl<const D: usize> Default for Vector<D> {
    fn default() -> Self {
        Self::ZERO
    }
}

impl<const D: usize> fmt::Debug for Vector<D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl<const D: usize> Index<usize> for Vector<D> {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl<const D: usize> IndexMut<usize> for Vector<D> {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl<const D: usize> Add for Vector<D> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl<const D: usize> AddAssign for Vector<D> {
    fn add_assign(&mut self, rhs: Self) {
        for i in 0..D {
            self.0[i] += rhs.0[i];
        }
    }
}

impl<const D: usize> Sub for Vector<D> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        self -= rhs;
        self
    }
}

impl<const D: usize> SubAssign for Vector<D> {
    fn sub_assign(&mut self, rhs: Self) {
        for i in 0..D {
            self.0[i] -= rhs.0[i];
        }
    }
}

impl<const D: usize> Mul<f64> for Vector<D> {
    type Output = Self;
    fn mul(mut self, s: f64) -> Self {
        for c in self.0.iter_mut() {
            *c *= s;
        }
        self
    }
}

impl<const D: usize> Neg for Vector<D> {
    type Output = Self;
    fn neg(self) -> Self {
        self * -1.0
    }
}

/// Torus edge length, or the whole of R^d.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Edge {
    Finite(f64),
    Infinite,
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Edge::Finite(r) => write!(f, "{r}"),
            Edge::Infinite => write!(f, "inf"),
        }
    }
}

/// The ambient space: the flat torus `R^D / (r Z^D)` or `R^D` itself.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Space<const D: usize> {
    edge: Edge,
}

impl<const D: usize> Space<D> {
    /// Torus of edge `r`. The edge must exceed 4 so that two unit balls and
    /// the driver fit without self-overlap across the seams.
    pub fn torus(r: f64) -> Result<Self> {
        if D < 2 {
            return Err(Error::InvalidConfig(format!("dimension {D} < 2")));
        }
        if !(r > 4.0) || !r.is_finite() {
            return Err(Error::InvalidConfig(format!("torus edge {r} must exceed 4")));
        }
        Ok(Space { edge: Edge::Finite(r) })
    }

    pub fn euclidean() -> Self {
        assert!(D >= 2, "dimension must be at least 2");
        Space { edge: Edge::Infinite }
    }

    pub fn from_edge(edge: Edge) -> Result<Self> {
        match edge {
            Edge::Finite(r) => Self::torus(r),
            Edge::Infinite => Ok(Self::euclidean()),
        }
    }

    pub fn edge(&self) -> Edge {
        self.edge
    }

    pub fn edge_length(&self) -> Option<f64> {
        match self.edge {
            Edge::Finite(r) => Some(r),
            Edge::Infinite => None,
        }
    }

    pub fn dim(&self) -> usize {
        D
    }

    /// Canonical point for raw coordinates: wrapped on a torus, unchanged in R^D.
    pub fn point(&self, raw: [f64; D]) -> Point<D> {
        match self.edge {
            Edge::Finite(r) => Point(wrap_coords(Vector(raw), r)),
            Edge::Infinite => Point(Vector(raw)),
        }
    }

    /// Reduce raw coordinates onto `[0, r)^D`.
    pub fn wrap(&self, raw: Vector<D>) -> Result<Point<D>> {
        match self.edge {
            Edge::Finite(r) => Ok(Point(wrap_coords(raw, r))),
            Edge::Infinite => Err(Error::InfiniteSpace),
        }
    }

    /// Translate a point, re-canonicalizing on the torus.
    pub fn translate(&self, p: Point<D>, v: Vector<D>) -> Point<D> {
        match self.edge {
            Edge::Finite(r) => Point(wrap_coords(p.0 + v, r)),
            Edge::Infinite => Point(p.0 + v),
        }
    }

    /// Minimal-norm `v` with `a + v = b (mod r)`. Components lie in
    /// `(-r/2, r/2]`; an exact half-edge tie resolves to `+r/2`.
    pub fn displacement(&self, a: &Point<D>, b: &Point<D>) -> Vector<D> {
        let mut v = b.0 - a.0;
        if let Edge::Finite(r) = self.edge {
            let half = 0.5 * r;
            for c in v.0.iter_mut() {
                if *c > half {
                    *c -= r;
                } else if *c <= -half {
                    *c += r;
                }
            }
        }
        v
    }

    pub fn distance(&self, a: &Point<D>, b: &Point<D>) -> f64 {
        self.displacement(a, b).norm()
    }

    /// Unit outward normal at `p` of the sphere centered at `center`.
    pub fn outward_normal(&self, center: &Point<D>, p: &Point<D>) -> Result<Vector<D>> {
        let v = self.displacement(center, p);
        let n = v.norm();
        if n == 0.0 {
            return Err(Error::DegenerateNormal);
        }
        Ok(v * (1.0 / n))
    }

    /// Advance a lifted point to follow a move to `new_torus`.
    pub fn unfold_step(&self, prev: &UnfoldedPoint<D>, new_torus: Point<D>) -> Result<UnfoldedPoint<D>> {
        let v = self.displacement(&prev.origin_ref, &new_torus);
        if let Edge::Finite(r) = self.edge {
            for (component, c) in v.0.iter().enumerate() {
                if c.abs() >= 0.5 * r {
                    return Err(Error::UnfoldingAmbiguity { component, size: c.abs() });
                }
            }
        }
        Ok(UnfoldedPoint { coords: prev.coords + v, origin_ref: new_torus })
    }
}

fn wrap_coords<const D: usize>(mut v: Vector<D>, r: f64) -> Vector<D> {
    for c in v.0.iter_mut() {
        let w = c.rem_euclid(r);
        // rem_euclid may round up to r for tiny negative inputs
        *c = if w >= r { 0.0 } else { w };
    }
    v
}

/// A canonical point of the space.
#[derive(Clone, Copy, PartialEq, Debug, Default)]
pub struct Point<const D: usize>(Vector<D>);

impl<const D: usize> Point<D> {
    pub fn coords(&self) -> &Vector<D> {
        &self.0
    }

    pub fn to_vector(self) -> Vector<D> {
        self.0
    }
}

/// A lifted copy of a torus point; `coords = origin_ref (mod r)`.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct UnfoldedPoint<const D: usize> {
    pub coords: Vector<D>,
    pub origin_ref: Point<D>,
}

impl<const D: usize> UnfoldedPoint<D> {
    /// Lift a canonical point to itself.
    pub fn at(p: Point<D>) -> Self {
        UnfoldedPoint { coords: p.0, origin_ref: p }
    }

    /// Move both the lift and its torus image by `v`.
    pub fn shift(&mut self, space: &Space<D>, v: Vector<D>) {
        self.coords += v;
        self.origin_ref = space.translate(self.origin_ref, v);
    }
}

/// Surface area of the unit sphere in R^d.
pub fn sphere_area(d: usize) -> f64 {
    let half = d as f64 / 2.0;
    2.0 * std::f64::consts::PI.powf(half) / statrs::function::gamma::gamma(half)
}

/// Volume of the unit ball in R^d.
pub fn ball_volume(d: usize) -> f64 {
    sphere_area(d) / d as f64
}
