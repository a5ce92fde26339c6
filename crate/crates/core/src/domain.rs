//! Rectangular computational domains and the node grid laid over them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    DirichletRectangle,
    FullPlane,
}

/// An axis-aligned rectangle sampled by an `n1 x n2` node grid.
///
/// Node `(i, j)` sits at `(x1_min + i*h1, x2_min + j*h2)`. Flat storage is
/// row-major with `x1` varying fastest: `index = j * n1 + i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain2D {
    pub x1_min: f64,
    pub x1_max: f64,
    pub x2_min: f64,
    pub x2_max: f64,
    pub n1: usize,
    pub n2: usize,
    pub boundary: BoundaryKind,
}

impl Domain2D {
    pub fn new(
        x1: (f64, f64),
        x2: (f64, f64),
        n1: usize,
        n2: usize,
        boundary: BoundaryKind,
    ) -> Result<Self> {
        let d = Domain2D {
            x1_min: x1.0,
            x1_max: x1.1,
            x2_min: x2.0,
            x2_max: x2.1,
            n1,
            n2,
            boundary,
        };
        d.validate()?;
        Ok(d)
    }

    /// Square `[-half, half]^2` with `n` nodes per axis.
    pub fn square(half: f64, n: usize, boundary: BoundaryKind) -> Result<Self> {
        Self::new((-half, half), (-half, half), n, n, boundary)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x1_min, self.x1_max, self.x2_min, self.x2_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidDomain("bounds must be finite".into()));
        }
        if !(self.x1_min < self.x1_max && self.x2_min < self.x2_max) {
            return Err(Error::InvalidDomain(format!(
                "empty rectangle [{}, {}] x [{}, {}]",
                self.x1_min, self.x1_max, self.x2_min, self.x2_max
            )));
        }
        if self.n1 < 4 || self.n2 < 4 {
            return Err(Error::InvalidDomain(format!(
                "need at least 4 nodes per axis, got {} x {}",
                self.n1, self.n2
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn h1(&self) -> f64 {
        (self.x1_max - self.x1_min) / (self.n1 - 1) as f64
    }

    #[inline]
    pub fn h2(&self) -> f64 {
        (self.x2_max - self.x2_min) / (self.n2 - 1) as f64
    }

    #[inline]
    pub fn cell_area(&self) -> f64 {
        self.h1() * self.h2()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n1 + i
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.n1, idx / self.n1)
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.x1_min + i as f64 * self.h1(),
            self.x2_min + j as f64 * self.h2(),
        ]
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        if self.boundary == BoundaryKind::FullPlane {
            return p[0].is_finite() && p[1].is_finite();
        }
        let tol1 = 1e-12 * (self.x1_max - self.x1_min);
        let tol2 = 1e-12 * (self.x2_max - self.x2_min);
        p[0] >= self.x1_min - tol1
            && p[0] <= self.x1_max + tol1
            && p[1] >= self.x2_min - tol2
            && p[1] <= self.x2_max + tol2
    }

    /// Nearest grid node to `p`, or an error if `p` is outside the rectangle.
    pub fn nearest_node(&self, p: [f64; 2]) -> Result<(usize, usize)> {
        let inside = p[0] >= self.x1_min - 0.5 * self.h1()
            && p[0] <= self.x1_max + 0.5 * self.h1()
            && p[1] >= self.x2_min - 0.5 * self.h2()
            && p[1] <= self.x2_max + 0.5 * self.h2();
        if !inside {
            return Err(Error::OutsideDomain(p[0], p[1]));
        }
        let i = ((p[0] - self.x1_min) / self.h1()).round().clamp(0.0, (self.n1 - 1) as f64);
        let j = ((p[1] - self.x2_min) / self.h2()).round().clamp(0.0, (self.n2 - 1) as f64);
        Ok((i as usize, j as usize))
    }

    pub fn same_grid(&self, other: &Domain2D) -> bool {
        self.n1 == other.n1
            && self.n2 == other.n2
            && (self.x1_min - other.x1_min).abs() <= 1e-12
            && (self.x1_max - other.x1_max).abs() <= 1e-12
            && (self.x2_min - other.x2_min).abs() <= 1e-12
            && (self.x2_max - other.x2_max).abs() <= 1e-12
    }

    pub fn nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n2).flat_map(move |j| (0..self.n1).map(move |i| (i, j)))
    }
}
