//! Verification of the Gaussian upper bound
//! `|G(x,x',t)| <= c_eps t^{-s} exp(-(sigma* - eps) d^{4/3} / t^{1/3} + c_{eps,M} t)`,
//! empirical exponential constants and sharpness probes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::KernelSlice;
use crate::finsler::{AdmissibleCertificate, DistanceField};
use crate::forms::twisted_form;
use crate::fourier::ConstantKernel;
use crate::field::CoefficientField;
use crate::grid::GridFunction;
use crate::symbol::sigma_of_k;

/// Relative slack tolerated before a sample counts as a violation.
pub const VIOLATION_SLACK: f64 = 1e-9;
/// Spatial calibration stride; the test lattice has `stride^2` times as many nodes.
pub const DEFAULT_STRIDE: usize = 2;

/// `lambda = (d / (4 k t))^{1/3}`.
pub fn optimal_lambda(d: f64, k: f64, t: f64) -> f64 {
    (d / (4.0 * k * t)).cbrt()
}

/// `-lambda d + k lambda^4 t`.
pub fn lambda_exponent(d: f64, k: f64, t: f64, lambda: f64) -> f64 {
    -lambda * d + k * lambda.powi(4) * t
}

/// `-sigma(k) d^{4/3} / t^{1/3}`.
pub fn gaussian_exponent(d: f64, k: f64, t: f64) -> f64 {
    -sigma_of_k(k) * d.powf(4.0 / 3.0) / t.cbrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundSample {
    pub node: (usize, usize),
    pub point: [f64; 2],
    pub t: f64,
    pub d: f64,
    pub lhs: f64,
    pub calibration: bool,
}

/// Samples `(x, t)` of `|G|` with the distance from the source; zeros are dropped.
pub fn collect_samples(kernel: &KernelSlice, dist: &DistanceField, stride: usize) -> Result<Vec<BoundSample>> {
    let d = *dist.domain();
    if kernel.values.iter().any(|g| !g.domain.same_grid(&d)) {
        return Err(Error::GridMismatch("kernel and distance grids differ".into()));
    }
    if kernel.source != dist.source_node {
        return Err(Error::GridMismatch(format!(
            "kernel source {:?} differs from distance source {:?}",
            kernel.source, dist.source_node
        )));
    }
    if let Some(t) = kernel.times.iter().find(|t| !(**t > 0.0)) {
        return Err(Error::Parameter(format!("bound times must be positive, got {t}")));
    }
    if stride == 0 {
        return Err(Error::Parameter("calibration stride must be positive".into()));
    }
    let (si, sj) = (kernel.source.0 as i64, kernel.source.1 as i64);
    let st = stride as i64;
    let mut out = Vec::new();
    for (&t, g) in kernel.times.iter().zip(&kernel.values) {
        for (i, j) in d.nodes() {
            let lhs = g.at(i, j).norm();
            if !(lhs > 0.0) {
                continue;
            }
            let cal = (i as i64 - si).rem_euclid(st) == 0 && (j as i64 - sj).rem_euclid(st) == 0;
            out.push(BoundSample {
                node: (i, j),
                point: d.node(i, j),
                t,
                d: dist.at(i, j),
                lhs,
                calibration: cal,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittedConstants {
    pub log_c_eps: f64,
    pub c_eps: f64,
    pub c_eps_m: f64,
}

fn log_excess(s: &BoundSample, sigma: f64, s_used: f64) -> f64 {
    s.lhs.ln() + s_used * s.t.ln() + sigma * s.d.powf(4.0 / 3.0) / s.t.cbrt()
}

/// Rule selecting `c_{eps,M}` on the calibration set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthFit {
    /// `c_{eps,M} = 0`: minimizes the bound at the final calibration time.
    #[default]
    Zero,
    /// Minimizes the mean log-slack `max_j (L_j - c t_j) + c mean(t)` over `c >= 0`.
    MeanSlack,
}

/// Calibration log-excess `L_j`, raised at local maxima of each time slice to
/// the maximum of the piecewise bicubic interpolant of the calibration values
/// over the surrounding cells.
fn refined_excess(samples: &[BoundSample], sigma: f64, s_used: f64, stride: usize) -> Vec<(f64, f64)> {
    use std::collections::HashMap;
    const SUB: usize = 16;
    let lookup: HashMap<(u64, usize, usize), f64> = samples
        .iter()
        .filter(|s| s.calibration)
        .map(|s| ((s.t.to_bits(), s.node.0, s.node.1), log_excess(s, sigma, s_used)))
        .collect();
    let lagrange = |nodes: [f64; 4], x: f64| -> [f64; 4] {
        let mut w = [1.0; 4];
        for a in 0..4 {
            for b in 0..4 {
                if a != b {
                    w[a] *= (x - nodes[b]) / (nodes[a] - nodes[b]);
                }
            }
        }
        w
    };
    samples
        .iter()
        .filter(|s| s.calibration)
        .map(|s| {
            let key = s.t.to_bits();
            let (i, j) = s.node;
            let l0 = lookup[&(key, i, j)];
            let at = |a: i64, b: i64| -> Option<f64> {
                let ii = i as i64 + a * stride as i64;
                let jj = j as i64 + b * stride as i64;
                if ii < 0 || jj < 0 {
                    return None;
                }
                lookup.get(&(key, ii as usize, jj as usize)).copied()
            };
            let mut patch = [[0.0; 5]; 5];
            for a in 0..5 {
                for b in 0..5 {
                    match at(a as i64 - 2, b as i64 - 2) {
                        Some(v) => patch[a][b] = v,
                        None => return (l0, s.t),
                    }
                }
            }
            for a in 1..4 {
                for b in 1..4 {
                    if patch[a][b] > l0 {
                        return (l0, s.t);
                    }
                }
            }
            let mut best = l0;
            for pu in 0..=2 * SUB {
                let u = pu as f64 / SUB as f64 - 1.0;
                let ou: i64 = if u < 0.0 { -2 } else { -1 };
                let nu = [ou as f64, ou as f64 + 1.0, ou as f64 + 2.0, ou as f64 + 3.0];
                let wu = lagrange(nu, u);
                for pv in 0..=2 * SUB {
                    let v = pv as f64 / SUB as f64 - 1.0;
                    let ov: i64 = if v < 0.0 { -2 } else { -1 };
                    let nv = [ov as f64, ov as f64 + 1.0, ov as f64 + 2.0, ov as f64 + 3.0];
                    let wv = lagrange(nv, v);
                    let mut val = 0.0;
                    for a in 0..4 {
                        for b in 0..4 {
                            val += wu[a] * wv[b] * patch[(ou + 2) as usize + a][(ov + 2) as usize + b];
                        }
                    }
                    best = best.max(val);
                }
            }
            (best, s.t)
        })
        .collect()
}

pub fn fit_constants(samples: &[BoundSample], sigma: f64, s_used: f64, stride: usize, rule: GrowthFit) -> Result<FittedConstants> {
    let cal = refined_excess(samples, sigma, s_used, stride);
    if cal.is_empty() {
        return Err(Error::Parameter("calibration lattice is empty".into()));
    }
    let head = |c: f64| cal.iter().map(|&(l, t)| l - c * t).fold(f64::NEG_INFINITY, f64::max);
    if rule == GrowthFit::Zero {
        let log_c_eps = head(0.0);
        return Ok(FittedConstants { log_c_eps, c_eps: log_c_eps.exp(), c_eps_m: 0.0 });
    }
    let t_mean = cal.iter().map(|x| x.1).sum::<f64>() / cal.len() as f64;
    let obj = |c: f64| head(c) + c * t_mean;
    let t_min = cal.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
    let l_min_t = cal.iter().filter(|x| x.1 == t_min).map(|x| x.0).fold(f64::NEG_INFINITY, f64::max);
    let mut hi: f64 = 1.0;
    for &(l, t) in &cal {
        if t > t_min {
            hi = hi.max((l - l_min_t) / (t - t_min) + 1.0);
        }
    }
    let (mut a, mut b) = (0.0, hi);
    for _ in 0..200 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if obj(m1) <= obj(m2) {
            b = m2;
        } else {
            a = m1;
        }
    }
    let mut c = 0.5 * (a + b);
    if obj(0.0) <= obj(c) {
        c = 0.0;
    }
    let log_c_eps = head(c);
    Ok(FittedConstants { log_c_eps, c_eps: log_c_eps.exp(), c_eps_m: c })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub x: [f64; 2],
    pub x_prime: [f64; 2],
    pub t: f64,
    /// `ln rhs - ln lhs`.
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundRecord {
    pub t: f64,
    /// Angle of `x - x'` in radians.
    pub direction: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

/// `ln rhs` of the bound at a sample.
pub fn log_rhs(c: &FittedConstants, sigma: f64, s_used: f64, t: f64, d: f64) -> f64 {
    c.log_c_eps - s_used * t.ln() - sigma * d.powf(4.0 / 3.0) / t.cbrt() + c.c_eps_m * t
}

/// Evaluates fixed constants on every sample.
pub fn evaluate_bound(
    samples: &[BoundSample],
    constants: &FittedConstants,
    sigma: f64,
    s_used: f64,
    source_point: [f64; 2],
) -> (Vec<Violation>, Vec<BoundRecord>, f64) {
    let mut violations = Vec::new();
    let mut records = Vec::with_capacity(samples.len());
    let mut min_margin = f64::INFINITY;
    for s in samples {
        let lr = log_rhs(constants, sigma, s_used, s.t, s.d);
        let margin = lr - s.lhs.ln();
        min_margin = min_margin.min(margin);
        if margin < -VIOLATION_SLACK {
            violations.push(Violation { x: s.point, x_prime: source_point, t: s.t, margin });
        }
        let dz = [s.point[0] - source_point[0], s.point[1] - source_point[1]];
        records.push(BoundRecord {
            t: s.t,
            direction: if dz == [0.0, 0.0] { 0.0 } else { dz[1].atan2(dz[0]) },
            lhs: s.lhs,
            rhs: lr.exp(),
            margin,
        });
    }
    (violations, records, min_margin)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundOptions {
    pub epsilon: f64,
    pub s_used: f64,
    pub stride: usize,
    pub growth_fit: GrowthFit,
    /// Replaces `sigma* - penalty - eps` as the exponent constant.
    pub sigma_override: Option<f64>,
    /// `c theta` for non-good symbols.
    pub theta_penalty: f64,
    pub m_proxy: Option<f64>,
}

impl Default for BoundOptions {
    fn default() -> Self {
        Self { epsilon: 0.02, s_used: 0.5, stride: DEFAULT_STRIDE, growth_fit: GrowthFit::Zero, sigma_override: None, theta_penalty: 0.0, m_proxy: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sharpness {
    pub sigma_plus_delta_fails: bool,
    pub delta: f64,
    pub sigma_empirical: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub epsilon: f64,
    pub m_proxy: Option<f64>,
    pub s_used: f64,
    pub sigma_star: f64,
    pub sigma_used: f64,
    pub theta_penalty: f64,
    pub fitted_c_eps: f64,
    pub fitted_c_eps_m: f64,
    pub calibration_samples: usize,
    pub tested_samples: usize,
    pub min_margin: f64,
    pub violations: Vec<Violation>,
    pub sigma_empirical: Option<f64>,
    pub sharpness: Option<Sharpness>,
    #[serde(skip)]
    pub records: Vec<BoundRecord>,
}

impl BoundReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Fits `(c_eps, c_{eps,M})` on the calibration lattice and tests every sample.
pub fn verify_bound(kernel: &KernelSlice, dist: &DistanceField, sigma_star: f64, opts: &BoundOptions) -> Result<BoundReport> {
    if !(opts.epsilon > 0.0 && opts.epsilon < 1.0) && opts.sigma_override.is_none() {
        return Err(Error::Parameter(format!("epsilon must lie in (0, 1), got {}", opts.epsilon)));
    }
    let samples = collect_samples(kernel, dist, opts.stride)?;
    verify_samples(&samples, kernel.source_point, sigma_star, opts)
}

pub fn verify_samples(samples: &[BoundSample], source_point: [f64; 2], sigma_star: f64, opts: &BoundOptions) -> Result<BoundReport> {
    let sigma = opts.sigma_override.unwrap_or(sigma_star - opts.theta_penalty - opts.epsilon);
    let constants = fit_constants(samples, sigma, opts.s_used, opts.stride, opts.growth_fit)?;
    let (violations, records, min_margin) = evaluate_bound(samples, &constants, sigma, opts.s_used, source_point);
    Ok(BoundReport {
        epsilon: opts.epsilon,
        m_proxy: opts.m_proxy,
        s_used: opts.s_used,
        sigma_star,
        sigma_used: sigma,
        theta_penalty: opts.theta_penalty,
        fitted_c_eps: constants.c_eps,
        fitted_c_eps_m: constants.c_eps_m,
        calibration_samples: samples.iter().filter(|s| s.calibration).count(),
        tested_samples: samples.len(),
        min_margin,
        violations,
        sigma_empirical: None,
        sharpness: None,
        records,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SigmaOptions {
    pub directions: usize,
    pub radii: (f64, f64),
    pub radial_points: usize,
    pub times: Vec<f64>,
    pub s_used: f64,
    /// Smallest `X = F*^{4/3} / t^{1/3}` used in the fit.
    pub x_min: f64,
}

impl Default for SigmaOptions {
    fn default() -> Self {
        Self {
            directions: 37,
            radii: (1.0, 3.0),
            radial_points: 200,
            times: vec![1e-1, 1e-2, 1e-3, 1e-4],
            s_used: 0.5,
            x_min: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionSigma {
    pub angle: f64,
    pub raw: f64,
    pub smoothed: f64,
    pub points_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaEstimate {
    pub sigma: f64,
    pub angle: f64,
    pub per_direction: Vec<DirectionSigma>,
}

/// Upper concave hull of points sorted by abscissa (monotone chain).
fn upper_hull(pts: &[(f64, f64)]) -> Vec<usize> {
    let mut hull: Vec<usize> = Vec::new();
    for k in 0..pts.len() {
        while hull.len() >= 2 {
            let a = pts[hull[hull.len() - 2]];
            let b = pts[hull[hull.len() - 1]];
            let c = pts[k];
            let cross = (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(k);
    }
    hull
}

/// Least-squares slope of `y` on `x`.
fn slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Decay rate along the envelope of `(X, L)` with `L = ln(t^s |G| / c0) + ln(X)/2`.
fn direction_sigma(mut pts: Vec<(f64, f64)>) -> Option<(f64, usize)> {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pts.len() < 3 {
        return None;
    }
    let hull = upper_hull(&pts);
    let interior: Vec<usize> = hull
        .iter()
        .copied()
        .filter(|&k| k > 0 && k + 1 < pts.len() && pts[k].1 >= pts[k - 1].1 && pts[k].1 >= pts[k + 1].1)
        .collect();
    let chosen: Vec<(f64, f64)> = if interior.len() >= 3 {
        interior.iter().map(|&k| pts[k]).collect()
    } else if hull.len() >= 4 {
        hull[1..hull.len() - 1].iter().map(|&k| pts[k]).collect()
    } else {
        hull.iter().skip(1).map(|&k| pts[k]).collect()
    };
    if chosen.len() < 2 {
        return None;
    }
    Some((-slope(&chosen), chosen.len()))
}

/// Empirical exponential constant of a constant-coefficient kernel:
/// minimum over directions of the envelope decay rate in `X = F*^{4/3}/t^{1/3}`.
pub fn empirical_sigma(kernel: &ConstantKernel, opts: &SigmaOptions) -> Result<SigmaEstimate> {
    if opts.directions < 3 || opts.radial_points < 3 || opts.times.is_empty() {
        return Err(Error::Parameter("empirical sigma needs directions, radii and times".into()));
    }
    if let Some(t) = opts.times.iter().find(|t| !(**t > 0.0)) {
        return Err(Error::Parameter(format!("times must be positive, got {t}")));
    }
    let c0 = kernel.profile_at_origin();
    let n = opts.directions;
    let angles: Vec<f64> = (0..n).map(|k| std::f64::consts::PI * k as f64 / n as f64).collect();
    let one = |th: f64| -> Result<Option<(f64, usize)>> {
        let u = [th.cos(), th.sin()];
        let (_, f1) = kernel.dual_direction(u)?;
        let mut pts = Vec::new();
        for &t in &opts.times {
            for p in 0..opts.radial_points {
                let r = opts.radii.0 + (opts.radii.1 - opts.radii.0) * p as f64 / (opts.radial_points - 1) as f64;
                let x = (r * f1).powf(4.0 / 3.0) / t.cbrt();
                if x < opts.x_min {
                    continue;
                }
                let z = [r * u[0], r * u[1]];
                let g = kernel.eval(z, t)?.abs();
                if g < 1e-300 {
                    return Err(Error::Underflow { value: g, z1: z[0], z2: z[1], t });
                }
                pts.push((x, (t.powf(opts.s_used) * g / c0).ln() + 0.5 * x.ln()));
            }
        }
        Ok(direction_sigma(pts))
    };
    let raw: Vec<Option<(f64, usize)>> = std::thread::scope(|s| {
        let handles: Vec<_> = angles.iter().map(|&th| s.spawn(move || one(th))).collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Numeric("probe thread panicked".into()))))
            .collect::<Result<Vec<_>>>()
    })?;
    let values: Vec<f64> = raw.iter().map(|r| r.map(|x| x.0).unwrap_or(f64::NAN)).collect();
    let mut per_direction = Vec::with_capacity(n);
    for k in 0..n {
        let mut w = [values[(k + n - 1) % n], values[k], values[(k + 1) % n]];
        w.sort_by(|a, b| a.total_cmp(b));
        per_direction.push(DirectionSigma {
            angle: angles[k],
            raw: values[k],
            smoothed: w[1],
            points_used: raw[k].map(|x| x.1).unwrap_or(0),
        });
    }
    let best = per_direction
        .iter()
        .filter(|d| d.smoothed.is_finite())
        .min_by(|a, b| a.smoothed.total_cmp(&b.smoothed))
        .ok_or_else(|| Error::Numeric("no direction produced an envelope fit".into()))?;
    Ok(SigmaEstimate { sigma: best.smoothed, angle: best.angle, per_direction: per_direction.clone() })
}

/// True when `sigma* + delta` is not attainable: `sigma_emp + |delta|/4 < sigma* + delta`.
pub fn sharpness_probe(kernel: &ConstantKernel, sigma_star: f64, delta: f64, opts: &SigmaOptions) -> Result<Sharpness> {
    let est = empirical_sigma(kernel, opts)?;
    Ok(sharpness_from_estimate(est.sigma, sigma_star, delta))
}

pub fn sharpness_from_estimate(sigma_empirical: f64, sigma_star: f64, delta: f64) -> Sharpness {
    Sharpness {
        sigma_plus_delta_fails: sigma_empirical + 0.25 * delta.abs() < sigma_star + delta,
        delta,
        sigma_empirical,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwistedMarginEntry {
    pub phi_index: usize,
    pub lambda: f64,
    pub worst_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwistedMarginReport {
    pub k_star: f64,
    pub tol_h: f64,
    pub worst_margin: f64,
    pub entries: Vec<TwistedMarginEntry>,
    pub passes: bool,
}

/// `min [Re Q_{lambda phi}(u) + k* lambda^4 ||u||^2] / ((1 + lambda^3) ||u||^2)` over samples.
pub fn twisted_margin_report(
    field: &CoefficientField,
    phis: &[AdmissibleCertificate],
    lambdas: &[f64],
    samples: &[GridFunction],
    k_star: f64,
    tol_h: f64,
) -> Result<TwistedMarginReport> {
    if samples.is_empty() || phis.is_empty() || lambdas.is_empty() {
        return Err(Error::Parameter("twisted margin report needs phi, lambda and u samples".into()));
    }
    let mut entries = Vec::new();
    let mut worst = f64::INFINITY;
    for (pi, cert) in phis.iter().enumerate() {
        if !cert.admissible {
            return Err(Error::Certificate(format!(
                "phi #{pi} is not admissible: sup A(grad phi) = {}, Hessian ratio {} vs M = {}",
                cert.sup_a_grad, cert.sup_hessian_ratio, cert.m
            )));
        }
        for &lambda in lambdas {
            let mut w = f64::INFINITY;
            for u in samples {
                let n2 = u.norm_l2_sq();
                if n2 == 0.0 {
                    continue;
                }
                let q = twisted_form(field, u, &cert.phi, lambda)?.re;
                w = w.min((q + k_star * lambda.powi(4) * n2) / ((1.0 + lambda.powi(3)) * n2));
            }
            worst = worst.min(w);
            entries.push(TwistedMarginEntry { phi_index: pi, lambda, worst_margin: w });
        }
    }
    Ok(TwistedMarginReport { k_star, tol_h, worst_margin: worst, entries, passes: worst >= -tol_h })
}

/// One perturbation in the non-good-class path.
#[derive(Debug, Clone)]
pub struct PerturbedCase {
    pub amplitude: f64,
    pub theta: f64,
    pub sigma_star: f64,
    pub kernel: KernelSlice,
    pub dist: DistanceField,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbedOutcome {
    pub amplitude: f64,
    pub theta: f64,
    pub sigma_star: f64,
    pub sigma_used: f64,
    pub violations: usize,
    pub min_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaPathReport {
    pub epsilon: f64,
    /// Fitted `c` in `sigma* - c theta - eps`.
    pub c: f64,
    /// Largest exponent constant without violations on the calibration case.
    pub sigma_calibrated: f64,
    pub outcomes: Vec<PerturbedOutcome>,
}

impl ThetaPathReport {
    pub fn holds(&self) -> bool {
        self.outcomes.iter().all(|o| o.violations == 0)
    }
}

/// Fits `c` once on the case with the largest `theta` and reuses it for every case.
pub fn theta_path(cases: &[PerturbedCase], opts: &BoundOptions) -> Result<ThetaPathReport> {
    let cal = cases
        .iter()
        .max_by(|a, b| a.theta.total_cmp(&b.theta))
        .ok_or_else(|| Error::Parameter("no perturbed cases".into()))?;
    let samples = collect_samples(&cal.kernel, &cal.dist, opts.stride)?;
    let holds = |sigma: f64| -> Result<bool> {
        let o = BoundOptions { sigma_override: Some(sigma), ..*opts };
        Ok(verify_samples(&samples, cal.kernel.source_point, cal.sigma_star, &o)?.holds())
    };
    let top = cal.sigma_star - opts.epsilon;
    let sigma_calibrated = if holds(top)? {
        top
    } else {
        let (mut lo, mut hi) = (0.0, top);
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if holds(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    let c = if cal.theta > 0.0 { ((top - sigma_calibrated) / cal.theta).max(0.0) } else { 0.0 };
    let mut outcomes = Vec::new();
    for case in cases {
        let o = BoundOptions { theta_penalty: c * case.theta, ..*opts };
        let r = verify_bound(&case.kernel, &case.dist, case.sigma_star, &o)?;
        outcomes.push(PerturbedOutcome {
            amplitude: case.amplitude,
            theta: case.theta,
            sigma_star: case.sigma_star,
            sigma_used: r.sigma_used,
            violations: r.violations.len(),
            min_margin: r.min_margin,
        });
    }
    Ok(ThetaPathReport { epsilon: opts.epsilon, c, sigma_calibrated, outcomes })
}
