//! Pointwise symbol quantities: `A(x, xi)`, the shape ratio `Q`, regimes,
//! the constants `k` and `sigma`, strong convexity, the good class and `theta`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domain::Domain2D;
use crate::error::{Error, Result};
use crate::field::{Coefs, CoefficientField};
use crate::smoothing::gaussian_smooth;

/// Tolerance used to decide that a coefficient is real-valued.
pub const REAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `-1 < Q < 0`
    QNegative,
    /// `0 <= Q <= 3`
    Convex,
    /// `Q > 3`
    QLarge,
}

impl Regime {
    pub fn of(q: f64) -> Regime {
        if q < 0.0 {
            Regime::QNegative
        } else if q <= 3.0 {
            Regime::Convex
        } else {
            Regime::QLarge
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Regime::QNegative => "q_negative",
            Regime::Convex => "convex",
            Regime::QLarge => "q_large",
        }
    }
}

/// Optimal constant in `Re A(xi + i eta) >= -k A(eta)` as a function of `Q`.
pub fn k_of_q(q: f64) -> f64 {
    match Regime::of(q) {
        Regime::QNegative => 8.0 * (1.0 - q) / ((1.0 + q) * (1.0 + q)),
        Regime::Convex => 8.0,
        Regime::QLarge => q * q - 1.0,
    }
}

/// `sigma = (3/4) (4k)^{-1/3}`.
pub fn sigma_of_k(k: f64) -> f64 {
    0.75 * (4.0 * k).powf(-1.0 / 3.0)
}

pub fn sigma_of_q(q: f64) -> f64 {
    sigma_of_k(k_of_q(q))
}

/// The strongly convex constant `3 * 2^{1/3} / 16`.
pub fn sigma_convex() -> f64 {
    3.0 * 2f64.cbrt() / 16.0
}

pub fn eval_symbol(field: &CoefficientField, x: [f64; 2], xi: [f64; 2]) -> Result<Complex64> {
    Ok(field.coefs(x)?.symbol(xi))
}

/// `Q = beta / sqrt(alpha gamma)` for real coefficients with `alpha, gamma > 0`.
pub fn q_of_coefs(c: &Coefs) -> Result<f64> {
    if !c.is_real(REAL_TOL) {
        return Err(Error::Classification("coefficients are not real-valued".into()));
    }
    if !(c.alpha.re > 0.0 && c.gamma.re > 0.0) {
        return Err(Error::Classification(format!(
            "alpha = {} and gamma = {} must be positive",
            c.alpha.re, c.gamma.re
        )));
    }
    Ok(c.beta.re / (c.alpha.re * c.gamma.re).sqrt())
}

pub fn eval_q(field: &CoefficientField, x: [f64; 2]) -> Result<f64> {
    q_of_coefs(&field.coefs(x)?)
}

/// Per-node regime data and the global constants `k*`, `sigma*`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegimeClassification {
    pub domain: Domain2D,
    pub q: Vec<f64>,
    pub regime: Vec<Regime>,
    pub k: Vec<f64>,
    pub sigma: Vec<f64>,
    pub k_star: f64,
    pub sigma_star: f64,
}

impl RegimeClassification {
    pub fn q_range(&self) -> (f64, f64) {
        let lo = self.q.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    pub fn regimes_present(&self) -> Vec<Regime> {
        let mut out = Vec::new();
        for r in [Regime::QNegative, Regime::Convex, Regime::QLarge] {
            if self.regime.contains(&r) {
                out.push(r);
            }
        }
        out
    }
}

pub fn classify_regime(field: &CoefficientField) -> Result<RegimeClassification> {
    let d = *field.domain();
    let n = d.len();
    let mut q = Vec::with_capacity(n);
    let mut regime = Vec::with_capacity(n);
    let mut k = Vec::with_capacity(n);
    let mut sigma = Vec::with_capacity(n);
    for (i, j) in d.nodes() {
        let qi = q_of_coefs(&field.node_coefs(i, j))?;
        if qi <= -1.0 {
            return Err(Error::Ellipticity {
                i,
                j,
                detail: format!("Q = {qi} <= -1"),
            });
        }
        let ki = k_of_q(qi);
        q.push(qi);
        regime.push(Regime::of(qi));
        k.push(ki);
        sigma.push(sigma_of_k(ki));
    }
    let k_star = k.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(RegimeClassification {
        domain: d,
        q,
        regime,
        k,
        sigma,
        k_star,
        sigma_star: sigma_of_k(k_star),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StrongConvexity {
    pub per_node: Vec<bool>,
    pub all: bool,
}

/// Node-wise test of `0 <= beta <= 3 sqrt(alpha gamma)`.
pub fn check_strong_convexity(field: &CoefficientField) -> Result<StrongConvexity> {
    let d = field.domain();
    let mut per_node = Vec::with_capacity(d.len());
    for (i, j) in d.nodes() {
        let c = field.node_coefs(i, j);
        if !c.is_real(REAL_TOL) {
            return Err(Error::Classification(format!("non-real coefficients at node ({i}, {j})")));
        }
        let b = c.beta.re;
        per_node.push(b >= 0.0 && b <= 3.0 * (c.alpha.re * c.gamma.re).sqrt());
    }
    let all = per_node.iter().all(|&b| b);
    Ok(StrongConvexity { per_node, all })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GoodClassReport {
    pub is_real: bool,
    /// Empirical `c` in `|grad alpha| + |grad beta| + |grad gamma| <= c w^{3/4}`;
    /// infinite when the estimate blows up as the step is halved.
    pub grad_bound_constant: f64,
    pub in_good_class: bool,
    /// Allowed growth of the estimate when the step is halved.
    pub tolerance: f64,
    /// Steps actually used (the requested step is raised to the grid spacing).
    pub steps: [f64; 2],
    pub estimates: [f64; 2],
}

const GOOD_CLASS_GROWTH: f64 = 0.5;

fn derivative(f: &dyn Fn(f64) -> f64, x: f64, lo: f64, hi: f64, s: f64) -> f64 {
    let eps = 1e-12 * (hi - lo);
    if x - s >= lo - eps && x + s <= hi + eps {
        (f(x + s) - f(x - s)) / (2.0 * s)
    } else if x + 2.0 * s <= hi + eps {
        (-3.0 * f(x) + 4.0 * f(x + s) - f(x + 2.0 * s)) / (2.0 * s)
    } else {
        (3.0 * f(x) - 4.0 * f(x - s) + f(x - 2.0 * s)) / (2.0 * s)
    }
}

fn grad_constant(field: &CoefficientField, s: f64) -> f64 {
    let d = field.domain();
    let mut c_max: f64 = 0.0;
    for (i, j) in d.nodes() {
        let p = d.node(i, j);
        let w = field.node_coefs(i, j).w;
        let mut total = 0.0;
        for comp in 0..3 {
            let pick = |c: Coefs| match comp {
                0 => c.alpha.re,
                1 => c.beta.re,
                _ => c.gamma.re,
            };
            let f1 = |x: f64| pick(field.coefs_unchecked([x, p[1]]));
            let f2 = |y: f64| pick(field.coefs_unchecked([p[0], y]));
            let g1 = derivative(&f1, p[0], d.x1_min, d.x1_max, s);
            let g2 = derivative(&f2, p[1], d.x2_min, d.x2_max, s);
            total += g1.hypot(g2);
        }
        c_max = c_max.max(total / w.powf(0.75));
    }
    c_max
}

/// Membership test for the good class: real coefficients whose gradients
/// are controlled by `w^{3/4}`, estimated by finite differences at
/// `fd_step` and `fd_step/2` (each raised to at least the grid spacing).
pub fn check_good_class(field: &CoefficientField, fd_step: f64) -> Result<GoodClassReport> {
    let d = field.domain();
    if d.n1 < 4 || d.n2 < 4 {
        return Err(Error::Resolution("need at least 4 nodes per axis".into()));
    }
    if !(fd_step > 0.0 && fd_step.is_finite()) {
        return Err(Error::Parameter(format!("fd_step must be positive, got {fd_step}")));
    }
    let h = d.h1().max(d.h2());
    let s1 = fd_step.max(2.0 * h);
    let s2 = 0.5 * s1;
    let width = (d.x1_max - d.x1_min).min(d.x2_max - d.x2_min);
    if 2.0 * s1 > width {
        return Err(Error::Resolution(format!(
            "step {s1} is too large for a domain of width {width}"
        )));
    }
    let is_real = d.nodes().all(|(i, j)| field.node_coefs(i, j).is_real(REAL_TOL));
    let c1 = grad_constant(field, s1);
    let c2 = grad_constant(field, s2);
    let finite = c2.is_finite() && c2 <= (1.0 + GOOD_CLASS_GROWTH) * c1 + 1e-9;
    let constant = if finite { c1.max(c2) } else { f64::INFINITY };
    Ok(GoodClassReport {
        is_real,
        grad_bound_constant: constant,
        in_good_class: is_real && finite,
        tolerance: GOOD_CLASS_GROWTH,
        steps: [s1, s2],
        estimates: [c1, c2],
    })
}

/// A good-class surrogate `A~` and the weighted distance `theta` to it.
#[derive(Debug, Clone)]
pub struct SymbolDistance {
    pub theta: f64,
    pub surrogate: CoefficientField,
    /// Mollification scale of the chosen surrogate; `0` means no smoothing.
    pub smoothing_scale: f64,
    /// Guaranteed pointwise bound `|A - A~| <= pointwise_bound w |xi|^4`.
    pub pointwise_bound: f64,
}

/// Points per cell edge at which the weighted sup distance is sampled.
const THETA_SUBSAMPLING: usize = 4;

/// `sup_x max_{|xi|=1} |A(x, xi) - A~(x, xi)| / w(x)`, sampled between nodes.
pub fn weighted_symbol_distance(field: &CoefficientField, other: &CoefficientField) -> f64 {
    let d = field.domain();
    let m = field.angles() / 4 + 1;
    let angles: Vec<(f64, f64)> = (0..m)
        .map(|k| {
            let th = 0.5 * std::f64::consts::PI * k as f64 / (m - 1) as f64;
            (th.cos(), th.sin())
        })
        .collect();
    let r = THETA_SUBSAMPLING;
    let axis = |n: usize, lo: f64, h: f64| -> Vec<f64> {
        (0..=(n - 1) * r).map(|k| lo + h * k as f64 / r as f64).collect()
    };
    let xs = axis(d.n1, d.x1_min, d.h1());
    let ys = axis(d.n2, d.x2_min, d.h2());
    let mut sup: f64 = 0.0;
    for &y in &ys {
        for &x in &xs {
            let p = [x.min(d.x1_max), y.min(d.x2_max)];
            let a = field.coefs_unchecked(p);
            let b = other.coefs_unchecked(p);
            let diff = Coefs {
                alpha: a.alpha - b.alpha,
                beta: a.beta - b.beta,
                gamma: a.gamma - b.gamma,
                w: a.w,
            };
            if diff.alpha.norm() + diff.beta.norm() + diff.gamma.norm() == 0.0 {
                continue;
            }
            for &(c, s) in &angles {
                sup = sup.max(diff.symbol([c, s]).norm() / a.w);
            }
        }
    }
    sup
}

fn surrogate(field: &CoefficientField, scale: f64) -> Result<CoefficientField> {
    let d = *field.domain();
    let (a, b, g, w) = field.node_tables();
    let smooth = |v: &[Complex64]| -> Vec<Complex64> {
        let re: Vec<f64> = v.iter().map(|z| z.re).collect();
        let out = if scale > 0.0 {
            gaussian_smooth(&re, d.n1, d.n2, scale / d.h1(), scale / d.h2())
        } else {
            re
        };
        out.into_iter().map(|x| Complex64::new(x, 0.0)).collect()
    };
    CoefficientField::tabulated(d, smooth(&a), smooth(&b), smooth(&g), w)
}

/// Searches mollified real-part surrogates over `smoothing_scales` and
/// returns the good-class candidate closest to `field` in the weighted sup
/// distance. A scale of `0` takes real parts without smoothing.
pub fn estimate_theta(field: &CoefficientField, smoothing_scales: &[f64]) -> Result<SymbolDistance> {
    if smoothing_scales.is_empty() {
        return Err(Error::Parameter("at least one smoothing scale is required".into()));
    }
    if let Some(s) = smoothing_scales.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
        return Err(Error::Parameter(format!("invalid smoothing scale {s}")));
    }
    let h = field.domain().h1().max(field.domain().h2());
    if check_good_class(field, 2.0 * h)?.in_good_class {
        return Ok(SymbolDistance {
            theta: 0.0,
            surrogate: field.clone(),
            smoothing_scale: 0.0,
            pointwise_bound: 0.0,
        });
    }
    let mut best: Option<SymbolDistance> = None;
    for &scale in smoothing_scales {
        let cand = surrogate(field, scale)?;
        if !check_good_class(&cand, 2.0 * h)?.in_good_class {
            continue;
        }
        let theta = weighted_symbol_distance(field, &cand);
        if best.as_ref().is_none_or(|b| theta < b.theta) {
            best = Some(SymbolDistance {
                theta,
                surrogate: cand,
                smoothing_scale: scale,
                pointwise_bound: 2.0 * theta,
            });
        }
    }
    best.ok_or(Error::NoSurrogate {
        tried: smoothing_scales.len(),
    })
}
