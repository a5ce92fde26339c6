//! Symbol-induced Finsler geometry: the dual norm
//! `F*(x, v) = sup { v . xi : A(x, xi) <= 1 }`, grid distances from a source,
//! and admissibility certificates for smooth test functions.

use petgraph::algo::dijkstra;
use petgraph::graph::{NodeIndex, UnGraph};
use serde::{Deserialize, Serialize};

use crate::domain::Domain2D;
use crate::error::{Error, Result};
use crate::field::{Coefs, CoefficientField, DEFAULT_ANGLES};
use crate::grid::RealGrid;
use crate::optimize::golden_min;
use crate::smoothing::gaussian_smooth;

/// Relative slack allowed in `A(x, grad phi) <= 1` for certificates.
pub const CERT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
pub struct FinslerMetric<'a> {
    pub field: &'a CoefficientField,
    pub angles: usize,
}

impl<'a> FinslerMetric<'a> {
    pub fn new(field: &'a CoefficientField) -> Self {
        FinslerMetric {
            field,
            angles: DEFAULT_ANGLES,
        }
    }

    pub fn with_angles(mut self, angles: usize) -> Self {
        self.angles = angles.max(8);
        self
    }

    pub fn dual_norm(&self, x: [f64; 2], v: [f64; 2]) -> Result<f64> {
        dual_norm_coefs(&self.field.coefs(x)?, v, self.angles)
    }
}

/// Dual norm for fixed coefficients, from an angular scan of
/// `|v . u| / A(u)^{1/4}` over a half circle refined by golden-section search.
pub fn dual_norm_coefs(c: &Coefs, v: [f64; 2], angles: usize) -> Result<f64> {
    if v[0] == 0.0 && v[1] == 0.0 {
        return Ok(0.0);
    }
    let n = (angles / 2).max(4);
    let dth = std::f64::consts::PI / n as f64;
    let ratio = |th: f64| {
        let (s, co) = th.sin_cos();
        let a = c.symbol_re([co, s]);
        (v[0] * co + v[1] * s).abs() / a.sqrt().sqrt()
    };
    let mut best = (0.0, f64::NEG_INFINITY);
    for k in 0..n {
        let th = k as f64 * dth;
        let (s, co) = th.sin_cos();
        let a = c.symbol_re([co, s]);
        if !(a > 0.0) {
            return Err(Error::Metric(format!("A(x, u) = {a:e} <= 0 at angle {th}")));
        }
        let r = (v[0] * co + v[1] * s).abs() / a.sqrt().sqrt();
        if r > best.1 {
            best = (th, r);
        }
    }
    let neg = |th: f64| -ratio(th);
    let (_, fv) = golden_min(&neg, best.0 - dth, best.0 + dth, 1e-9)?;
    Ok(best.1.max(-fv))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMethod {
    DijkstraStencil,
    FastSweeping,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistanceField {
    pub source: [f64; 2],
    pub source_node: (usize, usize),
    pub values: RealGrid,
    pub method: DistanceMethod,
    pub stencil_order: usize,
    /// Multiplicative factors `(lower, upper)` with
    /// `lower * value <= d <= upper * value` from the stencil's angular error.
    pub bracket: Option<(f64, f64)>,
    pub iterations: usize,
}

impl DistanceField {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values.at(i, j)
    }

    pub fn domain(&self) -> &Domain2D {
        &self.values.domain
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Coprime offsets with max-norm at most `order`, sorted by angle.
pub fn stencil(order: usize) -> Vec<(i64, i64)> {
    let k = order as i64;
    let mut out = Vec::new();
    for a in -k..=k {
        for b in -k..=k {
            if (a, b) != (0, 0) && gcd(a, b) == 1 {
                out.push((a, b));
            }
        }
    }
    out.sort_by(|p, q| {
        let ta = (p.1 as f64).atan2(p.0 as f64);
        let tb = (q.1 as f64).atan2(q.0 as f64);
        ta.partial_cmp(&tb).unwrap()
    });
    out
}

/// Worst relative overestimate of `F*` by the cheapest two-offset path.
fn polygon_error(c: &Coefs, offsets: &[(i64, i64)], h: [f64; 2], angles: usize) -> Result<f64> {
    let vecs: Vec<[f64; 2]> = offsets.iter().map(|&(a, b)| [a as f64 * h[0], b as f64 * h[1]]).collect();
    let norms: Vec<f64> = vecs
        .iter()
        .map(|v| dual_norm_coefs(c, *v, angles))
        .collect::<Result<_>>()?;
    let theta: Vec<f64> = vecs.iter().map(|v| v[1].atan2(v[0])).collect();
    let m = vecs.len();
    let mut worst: f64 = 0.0;
    let samples = 360;
    for s in 0..samples {
        let th = -std::f64::consts::PI + 2.0 * std::f64::consts::PI * (s as f64 + 0.5) / samples as f64;
        let dir = [th.cos(), th.sin()];
        let k = (0..m)
            .find(|&k| {
                let a = theta[k];
                let b = if k + 1 < m { theta[k + 1] } else { theta[0] + 2.0 * std::f64::consts::PI };
                let t = if th < a { th + 2.0 * std::f64::consts::PI } else { th };
                t >= a && t <= b
            })
            .unwrap_or(m - 1);
        let (p, q) = (vecs[k], vecs[(k + 1) % m]);
        let det = p[0] * q[1] - p[1] * q[0];
        let a = (dir[0] * q[1] - dir[1] * q[0]) / det;
        let b = (p[0] * dir[1] - p[1] * dir[0]) / det;
        let path = a * norms[k] + b * norms[(k + 1) % m];
        let exact = dual_norm_coefs(c, dir, angles)?;
        worst = worst.max(path / exact - 1.0);
    }
    Ok(worst)
}

pub fn distance_field(
    metric: &FinslerMetric,
    source: [f64; 2],
    method: DistanceMethod,
    stencil_order: usize,
) -> Result<DistanceField> {
    let d = *metric.field.domain();
    let (si, sj) = d.nearest_node(source)?;
    match method {
        DistanceMethod::DijkstraStencil => dijkstra_distance(metric, (si, sj), stencil_order),
        DistanceMethod::FastSweeping => fast_sweeping(metric, (si, sj), 1e-10, 20_000),
    }
}

fn dijkstra_distance(metric: &FinslerMetric, src: (usize, usize), order: usize) -> Result<DistanceField> {
    if order == 0 {
        return Err(Error::Parameter("stencil order must be at least 1".into()));
    }
    let field = metric.field;
    let d = *field.domain();
    let (h1, h2) = (d.h1(), d.h2());
    let offsets = stencil(order);
    let half: Vec<(i64, i64)> = offsets
        .iter()
        .cloned()
        .filter(|&(a, b)| b > 0 || (b == 0 && a > 0))
        .collect();
    let constant = field.constant_coefs();
    let const_w: Option<Vec<f64>> = match &constant {
        Some(c) => Some(
            half.iter()
                .map(|&(a, b)| dual_norm_coefs(c, [a as f64 * h1, b as f64 * h2], metric.angles))
                .collect::<Result<_>>()?,
        ),
        None => None,
    };
    let mut g: UnGraph<(), f64> = UnGraph::with_capacity(d.len(), d.len() * half.len());
    for _ in 0..d.len() {
        g.add_node(());
    }
    for (i, j) in d.nodes() {
        for (k, &(a, b)) in half.iter().enumerate() {
            let (ii, jj) = (i as i64 + a, j as i64 + b);
            if ii < 0 || jj < 0 || ii >= d.n1 as i64 || jj >= d.n2 as i64 {
                continue;
            }
            let w = match &const_w {
                Some(ws) => ws[k],
                None => {
                    let p = d.node(i, j);
                    let mid = [p[0] + 0.5 * a as f64 * h1, p[1] + 0.5 * b as f64 * h2];
                    let c = field.coefs_unchecked(mid);
                    dual_norm_coefs(&c, [a as f64 * h1, b as f64 * h2], metric.angles)?
                }
            };
            g.add_edge(
                NodeIndex::new(d.index(i, j)),
                NodeIndex::new(d.index(ii as usize, jj as usize)),
                w,
            );
        }
    }
    let dist = dijkstra(&g, NodeIndex::new(d.index(src.0, src.1)), None, |e| *e.weight());
    let mut values = vec![f64::INFINITY; d.len()];
    for (node, v) in dist {
        values[node.index()] = v;
    }
    let delta = match &constant {
        Some(c) => polygon_error(c, &offsets, [h1, h2], metric.angles)?,
        None => {
            let mut worst: f64 = 0.0;
            let stride = (d.n1.max(d.n2) / 8).max(1);
            for (i, j) in d.nodes().filter(|(i, j)| i % stride == 0 && j % stride == 0) {
                worst = worst.max(polygon_error(&field.node_coefs(i, j), &offsets, [h1, h2], metric.angles)?);
            }
            worst
        }
    };
    Ok(DistanceField {
        source: d.node(src.0, src.1),
        source_node: src,
        values: RealGrid::new(d, values)?,
        method: DistanceMethod::DijkstraStencil,
        stencil_order: order,
        bracket: Some((1.0 / (1.0 + delta), 1.0)),
        iterations: 1,
    })
}

/// Largest `|d H / d p_i|` for `H = A^{1/4}` over nodes and directions.
fn viscosity(field: &CoefficientField, angles: usize) -> [f64; 2] {
    let d = field.domain();
    let table = crate::field::unit_angles(angles);
    let mut s = [0.0f64; 2];
    for (i, j) in d.nodes() {
        let c = field.node_coefs(i, j);
        let (a, b, g) = (c.alpha.re, c.beta.re, c.gamma.re);
        for &(u1, u2) in &table {
            let r = c.symbol_re([u1, u2]).sqrt().sqrt();
            let (x1, x2) = (u1 / r, u2 / r);
            s[0] = s[0].max((a * x1 * x1 * x1 + b * x1 * x2 * x2).abs());
            s[1] = s[1].max((b * x1 * x1 * x2 + g * x2 * x2 * x2).abs());
        }
    }
    s
}

/// Lax-Friedrichs sweeping for `A(x, grad phi)^{1/4} = 1`.
pub fn fast_sweeping(
    metric: &FinslerMetric,
    src: (usize, usize),
    tol: f64,
    max_sweeps: usize,
) -> Result<DistanceField> {
    let field = metric.field;
    let d = *field.domain();
    let (n1, n2) = (d.n1, d.n2);
    let (h1, h2) = (d.h1(), d.h2());
    let vis = viscosity(field, metric.angles);
    let (s1, s2) = (vis[0] * 1.001, vis[1] * 1.001);
    let big = 1e10;
    let mut phi = vec![big; d.len()];
    let mut fixed = vec![false; d.len()];
    let sc = field.node_coefs(src.0, src.1);
    let ps = d.node(src.0, src.1);
    for (i, j) in d.nodes() {
        if (i as i64 - src.0 as i64).abs() <= 2 && (j as i64 - src.1 as i64).abs() <= 2 {
            let p = d.node(i, j);
            let k = d.index(i, j);
            phi[k] = dual_norm_coefs(&sc, [p[0] - ps[0], p[1] - ps[1]], metric.angles)?;
            fixed[k] = true;
        }
    }
    let coefs: Vec<Coefs> = d.nodes().map(|(i, j)| field.node_coefs(i, j)).collect();
    let denom = s1 / h1 + s2 / h2;
    let mut last = f64::INFINITY;
    for sweep in 0..max_sweeps {
        let mut change: f64 = 0.0;
        let (ri, rj) = match sweep % 4 {
            0 => (false, false),
            1 => (true, false),
            2 => (true, true),
            _ => (false, true),
        };
        for jj in 1..n2 - 1 {
            let j = if rj { n2 - 1 - jj } else { jj };
            for ii in 1..n1 - 1 {
                let i = if ri { n1 - 1 - ii } else { ii };
                let k = d.index(i, j);
                if fixed[k] {
                    continue;
                }
                let (e, w) = (phi[k + 1], phi[k - 1]);
                let (nn, ss) = (phi[k + n1], phi[k - n1]);
                let p = [(e - w) / (2.0 * h1), (nn - ss) / (2.0 * h2)];
                let hval = coefs[k].symbol_re(p).max(0.0).sqrt().sqrt();
                let cand = (1.0 - hval + s1 * (e + w) / (2.0 * h1) + s2 * (nn + ss) / (2.0 * h2)) / denom;
                if cand < phi[k] {
                    change = change.max(phi[k] - cand);
                    phi[k] = cand;
                }
            }
        }
        for j in 0..n2 {
            for (a, b, c) in [(0usize, 1usize, 2usize), (n1 - 1, n1 - 2, n1 - 3)] {
                let (ka, kb, kc) = (d.index(a, j), d.index(b, j), d.index(c, j));
                if !fixed[ka] {
                    let ext = (2.0 * phi[kb] - phi[kc]).max(phi[kc]);
                    if ext < phi[ka] {
                        change = change.max(phi[ka] - ext);
                        phi[ka] = ext;
                    }
                }
            }
        }
        for i in 0..n1 {
            for (a, b, c) in [(0usize, 1usize, 2usize), (n2 - 1, n2 - 2, n2 - 3)] {
                let (ka, kb, kc) = (d.index(i, a), d.index(i, b), d.index(i, c));
                if !fixed[ka] {
                    let ext = (2.0 * phi[kb] - phi[kc]).max(phi[kc]);
                    if ext < phi[ka] {
                        change = change.max(phi[ka] - ext);
                        phi[ka] = ext;
                    }
                }
            }
        }
        last = change;
        if change < tol && sweep >= 4 {
            return Ok(DistanceField {
                source: ps,
                source_node: src,
                values: RealGrid::new(d, phi)?,
                method: DistanceMethod::FastSweeping,
                stencil_order: 0,
                bracket: None,
                iterations: sweep + 1,
            });
        }
    }
    Err(Error::Convergence {
        iterations: max_sweeps,
        residual: last,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdmissibleCertificate {
    pub phi: RealGrid,
    pub m: f64,
    pub sup_a_grad: f64,
    pub sup_hessian_ratio: f64,
    /// `sup |grad phi| w^{1/4}`; reported, not enforced.
    pub sup_ew_gradient: f64,
    pub admissible: bool,
    pub tol: f64,
}

impl AdmissibleCertificate {
    /// Certified lower bound `phi(b) - phi(a)` for `d_M(a, b)` (grid nodes).
    pub fn lower_bound(&self, a: (usize, usize), b: (usize, usize)) -> Option<f64> {
        if self.admissible {
            Some(self.phi.at(b.0, b.1) - self.phi.at(a.0, a.1))
        } else {
            None
        }
    }
}

/// Finite-difference sup of `A(x, grad phi)` and `|Hess phi| w^{1/2}` over interior nodes.
pub fn certify_admissible(metric: &FinslerMetric, phi: &RealGrid, m: f64) -> Result<AdmissibleCertificate> {
    let d = *metric.field.domain();
    if !phi.domain.same_grid(&d) {
        return Err(Error::GridMismatch("phi and the metric live on different grids".into()));
    }
    let (h1, h2) = (d.h1(), d.h2());
    let mut sup_a: f64 = 0.0;
    let mut sup_h: f64 = 0.0;
    let mut sup_e: f64 = 0.0;
    let finite = phi.values.iter().all(|v| v.is_finite());
    for j in 1..d.n2 - 1 {
        for i in 1..d.n1 - 1 {
            let f = |a: usize, b: usize| phi.at(a, b);
            let g1 = (f(i + 1, j) - f(i - 1, j)) / (2.0 * h1);
            let g2 = (f(i, j + 1) - f(i, j - 1)) / (2.0 * h2);
            let f11 = (f(i + 1, j) - 2.0 * f(i, j) + f(i - 1, j)) / (h1 * h1);
            let f22 = (f(i, j + 1) - 2.0 * f(i, j) + f(i, j - 1)) / (h2 * h2);
            let f12 = (f(i + 1, j + 1) - f(i + 1, j - 1) - f(i - 1, j + 1) + f(i - 1, j - 1)) / (4.0 * h1 * h2);
            let c = metric.field.node_coefs(i, j);
            sup_a = sup_a.max(c.symbol_re([g1, g2]));
            sup_h = sup_h.max((f11 * f11 + 2.0 * f12 * f12 + f22 * f22).sqrt() * c.w.sqrt());
            sup_e = sup_e.max(g1.hypot(g2) * c.w.sqrt().sqrt());
        }
    }
    let admissible = finite && sup_a <= 1.0 + CERT_TOL && sup_h <= m;
    Ok(AdmissibleCertificate {
        phi: phi.clone(),
        m,
        sup_a_grad: sup_a,
        sup_hessian_ratio: sup_h,
        sup_ew_gradient: sup_e,
        admissible,
        tol: CERT_TOL,
    })
}

/// Gaussian smoothing of `phi` with standard deviation `scale` (physical units).
pub fn mollify_phi(phi: &RealGrid, scale: f64) -> Result<RealGrid> {
    let d = phi.domain;
    let h = d.h1().min(d.h2());
    if !(scale >= h * (1.0 - 1e-12)) {
        return Err(Error::Parameter(format!("smoothing scale {scale} is below the grid spacing {h}")));
    }
    let v = gaussian_smooth(&phi.values, d.n1, d.n2, scale / d.h1(), scale / d.h2());
    RealGrid::new(d, v)
}

/// Mollifies a distance field, rescales it so that `sup A(grad phi) <= 1`
/// and takes `M` from the resulting Hessian bound.
pub fn build_certificate(metric: &FinslerMetric, dist: &DistanceField, scale: f64) -> Result<AdmissibleCertificate> {
    let mut phi = mollify_phi(&dist.values, scale)?;
    let probe = certify_admissible(metric, &phi, f64::INFINITY)?;
    if probe.sup_a_grad > 1.0 {
        let s = probe.sup_a_grad.powf(-0.25) * (1.0 - 1e-12);
        phi.values.iter_mut().for_each(|v| *v *= s);
    }
    let probe = certify_admissible(metric, &phi, f64::INFINITY)?;
    certify_admissible(metric, &phi, probe.sup_hessian_ratio * (1.0 + 1e-9))
}
