//! Real and complex functions sampled on a [`Domain2D`] node grid.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domain::Domain2D;
use crate::error::{Error, Result};

/// Real-valued grid data (distance fields, test functions for certificates).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealGrid {
    pub domain: Domain2D,
    pub values: Vec<f64>,
}

impl RealGrid {
    pub fn new(domain: Domain2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} values, got {}",
                domain.len(),
                values.len()
            )));
        }
        Ok(RealGrid { domain, values })
    }

    pub fn from_fn(domain: Domain2D, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = domain.nodes().map(|(i, j)| f(domain.node(i, j))).collect();
        RealGrid { domain, values }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.domain.index(i, j)]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Bilinear interpolation inside the rectangle.
    pub fn interpolate(&self, p: [f64; 2]) -> Result<f64> {
        let d = &self.domain;
        if !d.contains(p) {
            return Err(Error::OutsideDomain(p[0], p[1]));
        }
        let (i0, j0, s, t) = cell_of(d, p);
        let v00 = self.at(i0, j0);
        let v10 = self.at(i0 + 1, j0);
        let v01 = self.at(i0, j0 + 1);
        let v11 = self.at(i0 + 1, j0 + 1);
        Ok((1.0 - s) * (1.0 - t) * v00 + s * (1.0 - t) * v10 + (1.0 - s) * t * v01 + s * t * v11)
    }
}

/// Complex-valued grid data with the cell area as quadrature weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub domain: Domain2D,
    pub values: Vec<Complex64>,
}

impl GridFunction {
    pub fn zeros(domain: Domain2D) -> Self {
        GridFunction {
            domain,
            values: vec![Complex64::new(0.0, 0.0); domain.len()],
        }
    }

    pub fn new(domain: Domain2D, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} values, got {}",
                domain.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Numeric("grid function has non-finite values".into()));
        }
        Ok(GridFunction { domain, values })
    }

    pub fn from_fn(domain: Domain2D, f: impl Fn([f64; 2]) -> Complex64) -> Self {
        let values = domain.nodes().map(|(i, j)| f(domain.node(i, j))).collect();
        GridFunction { domain, values }
    }

    pub fn from_real(grid: &RealGrid) -> Self {
        GridFunction {
            domain: grid.domain,
            values: grid.values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    /// Discrete delta `1/cellarea` at node `(i, j)`.
    pub fn delta(domain: Domain2D, i: usize, j: usize) -> Self {
        let mut g = Self::zeros(domain);
        g.values[domain.index(i, j)] = Complex64::new(1.0 / domain.cell_area(), 0.0);
        g
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.values[self.domain.index(i, j)]
    }

    pub fn cell_area(&self) -> f64 {
        self.domain.cell_area()
    }

    pub fn norm_l2_sq(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.cell_area()
    }

    pub fn norm_l2(&self) -> f64 {
        self.norm_l2_sq().sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest modulus on the outer `layers` rows and columns.
    pub fn boundary_max(&self, layers: usize) -> f64 {
        let d = &self.domain;
        let mut m: f64 = 0.0;
        for (i, j) in d.nodes() {
            if i < layers || j < layers || i + layers >= d.n1 || j + layers >= d.n2 {
                m = m.max(self.at(i, j).norm());
            }
        }
        m
    }

    pub fn real_part(&self) -> RealGrid {
        RealGrid {
            domain: self.domain,
            values: self.values.iter().map(|v| v.re).collect(),
        }
    }
}

/// Cell containing `p` and the local coordinates within it.
pub(crate) fn cell_of(d: &Domain2D, p: [f64; 2]) -> (usize, usize, f64, f64) {
    let fx = ((p[0] - d.x1_min) / d.h1()).clamp(0.0, (d.n1 - 1) as f64);
    let fy = ((p[1] - d.x2_min) / d.h2()).clamp(0.0, (d.n2 - 1) as f64);
    let i0 = (fx.floor() as usize).min(d.n1 - 2);
    let j0 = (fy.floor() as usize).min(d.n2 - 2);
    (i0, j0, fx - i0 as f64, fy - j0 as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::BoundaryKind;

    #[test]
    fn bilinear_interpolation_reproduces_affine_data() {
        let d = Domain2D::new((-1.0, 2.0), (0.0, 1.0), 7, 5, BoundaryKind::DirichletRectangle).unwrap();
        let g = RealGrid::from_fn(d, |p| 3.0 * p[0] - 2.0 * p[1] + 0.5);
        for p in [[0.123, 0.77], [2.0, 1.0], [-1.0, 0.0], [1.5, 0.3]] {
            let v = g.interpolate(p).unwrap();
            assert!((v - (3.0 * p[0] - 2.0 * p[1] + 0.5)).abs() < 1e-12);
        }
        assert!(g.interpolate([2.5, 0.0]).is_err());
    }

    #[test]
    fn delta_has_unit_mass() {
        let d = Domain2D::square(1.0, 9, BoundaryKind::DirichletRectangle).unwrap();
        let g = GridFunction::delta(d, 4, 4);
        let mass: f64 = g.values.iter().map(|v| v.re).sum::<f64>() * d.cell_area();
        assert!((mass - 1.0).abs() < 1e-14);
    }
}
