//! Constant-coefficient heat kernels by Fourier quadrature.
//!
//! With `xi = t^{-1/4} zeta`, `G(z, t) = t^{-1/2} g(z t^{-1/4})` where
//! `g(y) = (2 pi)^{-2} \int exp(i zeta . y - A(zeta)) d zeta`. The profile `g` is
//! evaluated on a trapezoid lattice over the box where `exp(-A) >= 1e-18`;
//! far in the tail the contour is shifted to `zeta + i eta` along the dual
//! direction of `y`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::domain::Domain2D;
use crate::error::{Error, Result};
use crate::evolve::{KernelMethod, KernelSlice};
use crate::field::{unit_angles, Coefs, CoefficientField, DEFAULT_ANGLES};
use crate::grid::GridFunction;
use crate::optimize::golden_min;
use crate::symbol::{k_of_q, q_of_coefs, REAL_TOL};

/// `-ln 1e-18`.
pub const TRUNCATION_EXPONENT: f64 = 41.446_531_673_892_82;
pub const DEFAULT_LATTICE: usize = 256;
/// Relative size of `|g|` below which the shifted contour is used.
pub const SHIFT_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct ConstantKernel {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// `min_{|xi|=1} A(xi)`.
    pub c_min: f64,
    /// Half-width of the `zeta` box.
    pub radius: f64,
    pub lattice: usize,
    k: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    g0: f64,
}

impl ConstantKernel {
    pub fn new(coefs: &Coefs) -> Result<Self> {
        Self::with_lattice(coefs, DEFAULT_LATTICE)
    }

    pub fn from_field(field: &CoefficientField) -> Result<Self> {
        let c = field.constant_coefs().ok_or_else(|| {
            Error::Parameter("Fourier kernel requires constant coefficients".into())
        })?;
        Self::new(&c)
    }

    /// `lattice` intervals across `[-R, R]`; must be even.
    pub fn with_lattice(coefs: &Coefs, lattice: usize) -> Result<Self> {
        if !coefs.is_real(REAL_TOL) {
            return Err(Error::Parameter("Fourier kernel requires real coefficients".into()));
        }
        if lattice < 8 || lattice % 2 != 0 {
            return Err(Error::Parameter(format!("lattice size must be even and >= 8, got {lattice}")));
        }
        let c = Coefs::real(coefs.alpha.re, coefs.beta.re, coefs.gamma.re);
        let c_min = c.min_re_symbol(&unit_angles(DEFAULT_ANGLES));
        if !(c_min > 0.0) {
            return Err(Error::Ellipticity {
                i: 0,
                j: 0,
                detail: format!("min A on the unit circle is {c_min:e}"),
            });
        }
        let q = q_of_coefs(&c)?;
        let radius = (TRUNCATION_EXPONENT / c_min).powf(0.25);
        let half = lattice / 2;
        let dz = radius / half as f64;
        let nodes: Vec<f64> = (0..=half).map(|p| p as f64 * dz).collect();
        let end = |p: usize| if p == 0 || p == half { 0.5 } else { 1.0 };
        let mut weights = vec![0.0; (half + 1) * (half + 1)];
        for p in 0..=half {
            for q in 0..=half {
                let a = c.symbol_re([nodes[p], nodes[q]]);
                weights[p * (half + 1) + q] = end(p) * end(q) * dz * dz * (-a).exp() / (PI * PI);
            }
        }
        let g0 = weights.iter().sum();
        Ok(Self {
            alpha: c.alpha.re,
            beta: c.beta.re,
            gamma: c.gamma.re,
            c_min,
            radius,
            lattice,
            k: k_of_q(q),
            nodes,
            weights,
            g0,
        })
    }

    pub fn coefs(&self) -> Coefs {
        Coefs::real(self.alpha, self.beta, self.gamma)
    }

    /// `k(Q)` used for the contour shift.
    pub fn k(&self) -> f64 {
        self.k
    }

    /// Profile `g(y) = G(y, 1)` on the symmetric cosine lattice.
    pub fn profile_lattice(&self, y: [f64; 2]) -> f64 {
        let m = self.nodes.len();
        let c1: Vec<f64> = self.nodes.iter().map(|z| (z * y[0]).cos()).collect();
        let c2: Vec<f64> = self.nodes.iter().map(|z| (z * y[1]).cos()).collect();
        let mut s = 0.0;
        for p in 0..m {
            let row = &self.weights[p * m..(p + 1) * m];
            let inner: f64 = row.iter().zip(&c2).map(|(w, c)| w * c).sum();
            s += c1[p] * inner;
        }
        s
    }

    /// `g(y)`, switching to the shifted contour when the lattice value is
    /// below `SHIFT_THRESHOLD * g(0)`.
    pub fn profile(&self, y: [f64; 2]) -> f64 {
        let g = self.profile_lattice(y);
        if g.abs() >= SHIFT_THRESHOLD * self.g0 {
            return g;
        }
        self.profile_shifted(y).unwrap_or(g)
    }

    pub fn profile_at_origin(&self) -> f64 {
        self.g0
    }

    /// Maximizer `xi*` of `xi . y` on `{A(xi) = 1}` and the value `F*(y)`.
    pub fn dual_direction(&self, y: [f64; 2]) -> Result<([f64; 2], f64)> {
        let c = self.coefs();
        let n = DEFAULT_ANGLES;
        let dth = 2.0 * PI / n as f64;
        let ratio = |th: f64| {
            let (s, co) = th.sin_cos();
            (y[0] * co + y[1] * s) / c.symbol_re([co, s]).sqrt().sqrt()
        };
        let mut best = (0.0, f64::NEG_INFINITY);
        for k in 0..n {
            let th = k as f64 * dth;
            let r = ratio(th);
            if r > best.1 {
                best = (th, r);
            }
        }
        let neg = |th: f64| -ratio(th);
        let (th, v) = golden_min(&neg, best.0 - dth, best.0 + dth, 1e-12)?;
        let th = if -v >= best.1 { th } else { best.0 };
        let (s, co) = th.sin_cos();
        let a = c.symbol_re([co, s]).sqrt().sqrt();
        let xi = [co / a, s / a];
        Ok((xi, xi[0] * y[0] + xi[1] * y[1]))
    }

    fn complex_symbol(&self, w1: Complex64, w2: Complex64) -> Complex64 {
        let a = w1 * w1;
        let b = w2 * w2;
        a * a * self.alpha + a * b * (2.0 * self.beta) + b * b * self.gamma
    }

    /// `g(y)` on the contour `zeta + i eta`, `eta = lambda xi*` with
    /// `lambda = (F*(y) / 4k)^{1/3}`.
    pub fn profile_shifted(&self, y: [f64; 2]) -> Result<f64> {
        let (xi, fstar) = self.dual_direction(y)?;
        let lambda = (fstar.max(0.0) / (4.0 * self.k)).cbrt();
        self.profile_with_shift(y, [lambda * xi[0], lambda * xi[1]])
    }

    /// `g(y)` on the contour `zeta + i eta` for any real shift `eta`.
    pub fn profile_with_shift(&self, y: [f64; 2], eta: [f64; 2]) -> Result<f64> {
        let log_mag = |z1: f64, z2: f64| {
            let w1 = Complex64::new(z1, eta[0]);
            let w2 = Complex64::new(z2, eta[1]);
            -(eta[0] * y[0] + eta[1] * y[1]) - self.complex_symbol(w1, w2).re
        };
        let ne = (eta[0] * eta[0] + eta[1] * eta[1]).sqrt();
        let mut peak = f64::NEG_INFINITY;
        let probe = 64;
        let mut radius = self.radius + 2.0 * ne;
        for p in 0..=probe {
            for q in 0..=probe {
                let z1 = -radius + 2.0 * radius * p as f64 / probe as f64;
                let z2 = -radius + 2.0 * radius * q as f64 / probe as f64;
                peak = peak.max(log_mag(z1, z2));
            }
        }
        for _ in 0..40 {
            let mut edge = f64::NEG_INFINITY;
            for p in 0..=probe {
                let s = -radius + 2.0 * radius * p as f64 / probe as f64;
                for (z1, z2) in [(s, radius), (s, -radius), (radius, s), (-radius, s)] {
                    edge = edge.max(log_mag(z1, z2));
                }
            }
            if edge < peak - TRUNCATION_EXPONENT {
                break;
            }
            radius *= 1.25;
        }
        let mut n = self.lattice.max(256);
        let mut previous = f64::NAN;
        loop {
            let (fine, coarse) = self.shifted_sum(y, eta, radius, n);
            let scale = fine.abs().max(f64::MIN_POSITIVE);
            if (fine - coarse).abs() <= 1e-8 * scale {
                return Ok(fine);
            }
            if n >= 4096 {
                let res = (fine - coarse).abs() / scale;
                if previous.is_finite() && (fine - previous).abs() <= 1e-6 * scale {
                    return Ok(fine);
                }
                return Err(Error::Convergence { iterations: n, residual: res });
            }
            previous = fine;
            n *= 2;
        }
    }

    /// Trapezoid sums on `n` and `n/2` intervals per axis.
    fn shifted_sum(&self, y: [f64; 2], eta: [f64; 2], radius: f64, n: usize) -> (f64, f64) {
        let dz = 2.0 * radius / n as f64;
        let shift = -(eta[0] * y[0] + eta[1] * y[1]);
        let z: Vec<f64> = (0..=n).map(|p| -radius + p as f64 * dz).collect();
        let w = |p: usize| if p == 0 || p == n { 0.5 } else { 1.0 };
        let wc = |p: usize| if p % 2 != 0 { 0.0 } else if p == 0 || p == n { 0.5 } else { 1.0 };
        let w1: Vec<Complex64> = z.iter().map(|&v| Complex64::new(v, eta[0])).collect();
        let w2: Vec<Complex64> = z.iter().map(|&v| Complex64::new(v, eta[1])).collect();
        let mut fine = 0.0;
        let mut coarse = 0.0;
        for p in 0..=n {
            for q in 0..=n {
                let ph = Complex64::new(shift, z[p] * y[0] + z[q] * y[1]) - self.complex_symbol(w1[p], w2[q]);
                let v = ph.exp().re;
                fine += w(p) * w(q) * v;
                coarse += wc(p) * wc(q) * v;
            }
        }
        let norm = 1.0 / (4.0 * PI * PI);
        (fine * dz * dz * norm, coarse * 4.0 * dz * dz * norm)
    }

    /// `G(z, t)`.
    pub fn eval(&self, z: [f64; 2], t: f64) -> Result<f64> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::Parameter(format!("kernel time must be positive, got {t}")));
        }
        let s = t.powf(-0.25);
        Ok(t.powf(-0.5) * self.profile([z[0] * s, z[1] * s]))
    }
}

/// `(2 pi)^{-2} \int exp(i xi . z - t A(xi)) d xi` for a constant real field.
pub fn kernel_constant_fourier(field: &CoefficientField, z: [f64; 2], t: f64) -> Result<Complex64> {
    if !(t > 0.0) {
        return Err(Error::Parameter(format!("kernel time must be positive, got {t}")));
    }
    let k = ConstantKernel::from_field(field)?;
    Ok(Complex64::new(k.eval(z, t)?, 0.0))
}

/// `G(x - x', t)` sampled on every node of `domain`.
pub fn fourier_slice(
    kernel: &ConstantKernel,
    domain: &Domain2D,
    source: (usize, usize),
    times: &[f64],
) -> Result<KernelSlice> {
    let sp = domain.node(source.0, source.1);
    let mut values = Vec::with_capacity(times.len());
    for &t in times {
        let mut g = GridFunction::zeros(*domain);
        for (i, j) in domain.nodes() {
            let p = domain.node(i, j);
            g.values[domain.index(i, j)] = Complex64::new(kernel.eval([p[0] - sp[0], p[1] - sp[1]], t)?, 0.0);
        }
        values.push(g);
    }
    Ok(KernelSlice {
        source,
        source_point: sp,
        times: times.to_vec(),
        values,
        method: KernelMethod::FourierConstant,
    })
}
